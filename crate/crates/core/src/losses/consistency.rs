//! Part deformation consistency: part-wise nearest-neighbor agreement of
//! deformed shapes in template space, in geometry and in semantics.

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::fields::sdc::argmax;
use crate::geometry::chamfer::chamfer;
use crate::geometry::kdtree::{dist2, nearest_brute, KdTree};

type P = [f64; 3];

/// `argmin_{y∈Q} ‖x − y‖²`, lowest index on ties.
pub fn match_point(x: P, q: &[P]) -> Result<P> {
    KdTree::from_slice(q).nearest(x).map(|(i, _)| q[i])
}

/// One part of a deformed shape.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PartSet {
    /// Deformed positions.
    pub points: Vec<P>,
    /// Semantic features carried from the source points.
    pub features: Vec<Vec<f64>>,
    /// Row of each point in the shape's stacked point list.
    pub rows: Vec<usize>,
}

/// Deformed points of one shape split by the arg-max part of their source
/// features.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformedPartSets {
    pub parts: Vec<PartSet>,
}

impl DeformedPartSets {
    /// `deformed[r]` is the image of a source point whose feature is row `r`
    /// of `features` (n×k).
    pub fn new(deformed: &[P], features: &Tensor) -> Result<Self> {
        if deformed.len() != features.rows() {
            return Err(Error::config(format!(
                "{} deformed points but {} feature rows",
                deformed.len(),
                features.rows()
            )));
        }
        let mut parts = vec![PartSet::default(); features.cols()];
        for (r, &p) in deformed.iter().enumerate() {
            let o = features.row(r);
            let s = &mut parts[argmax(o)];
            s.points.push(p);
            s.features.push(o.to_vec());
            s.rows.push(r);
        }
        Ok(Self { parts })
    }

    pub fn k(&self) -> usize {
        self.parts.len()
    }
}

/// A nearest-neighbor pair from one set to another, with the weight it
/// carries in the part-wise mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Match {
    pub part: usize,
    /// Index within the source part.
    pub src: usize,
    /// Index within the target part.
    pub dst: usize,
    pub weight: f64,
}

fn check_k(a: &DeformedPartSets, b: &DeformedPartSets) -> Result<()> {
    if a.k() != b.k() {
        return Err(Error::config(format!("part counts differ: {} vs {}", a.k(), b.k())));
    }
    Ok(())
}

/// Matches of every point of `a` into the same part of `b`, both
/// directions included (direction A→B first). Parts empty on either side
/// are skipped.
pub fn part_matches(a: &DeformedPartSets, b: &DeformedPartSets) -> Result<(Vec<Match>, Vec<Match>)> {
    check_k(a, b)?;
    let mut ab = Vec::new();
    let mut ba = Vec::new();
    for (i, (pa, pb)) in a.parts.iter().zip(&b.parts).enumerate() {
        if pa.points.is_empty() || pb.points.is_empty() {
            continue;
        }
        for (out, from, to) in [(&mut ab, pa, pb), (&mut ba, pb, pa)] {
            let tree = KdTree::from_slice(&to.points);
            let w = 1.0 / from.points.len() as f64;
            for (s, &x) in from.points.iter().enumerate() {
                let (d, _) = tree.nearest(x)?;
                out.push(Match {
                    part: i,
                    src: s,
                    dst: d,
                    weight: w,
                });
            }
        }
    }
    Ok((ab, ba))
}

fn directed_geo(from: &PartSet, to: &PartSet, nearest: impl Fn(&[P], P) -> f64) -> f64 {
    let mut s = 0.0;
    for &x in &from.points {
        s += nearest(&to.points, x);
    }
    s / from.points.len() as f64
}

fn pdc_geo_with(a: &DeformedPartSets, b: &DeformedPartSets, nearest: impl Fn(&[P], P) -> f64 + Copy) -> Result<f64> {
    check_k(a, b)?;
    let mut total = 0.0;
    for (pa, pb) in a.parts.iter().zip(&b.parts) {
        if pa.points.is_empty() || pb.points.is_empty() {
            continue;
        }
        total += directed_geo(pa, pb, nearest) + directed_geo(pb, pa, nearest);
    }
    Ok(total)
}

/// Sum over parts of the symmetric mean squared nearest-neighbor distance.
pub fn pdc_geo(a: &DeformedPartSets, b: &DeformedPartSets) -> Result<f64> {
    pdc_geo_with(a, b, |q, x| KdTree::from_slice(q).nearest(x).map(|r| r.1).unwrap_or(0.0))
}

/// Quadratic-time reference for [`pdc_geo`].
pub fn pdc_geo_brute(a: &DeformedPartSets, b: &DeformedPartSets) -> Result<f64> {
    pdc_geo_with(a, b, |q, x| nearest_brute(q, x).map(|r| r.1).unwrap_or(0.0))
}

fn feature_dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum over parts of the symmetric mean squared feature discrepancy between
/// each point and its spatial nearest neighbor in the same part.
pub fn pdc_sem(a: &DeformedPartSets, b: &DeformedPartSets) -> Result<f64> {
    let (ab, ba) = part_matches(a, b)?;
    Ok(pdc_sem_from(a, b, &ab, &ba))
}

pub(crate) fn pdc_sem_from(a: &DeformedPartSets, b: &DeformedPartSets, ab: &[Match], ba: &[Match]) -> f64 {
    let mut total = 0.0;
    for (from, to, ms) in [(a, b, ab), (b, a, ba)] {
        for m in ms {
            total += m.weight * feature_dist2(&from.parts[m.part].features[m.src], &to.parts[m.part].features[m.dst]);
        }
    }
    total
}

/// Quadratic-time reference for [`pdc_sem`].
pub fn pdc_sem_brute(a: &DeformedPartSets, b: &DeformedPartSets) -> Result<f64> {
    check_k(a, b)?;
    let mut total = 0.0;
    for (pa, pb) in a.parts.iter().zip(&b.parts) {
        if pa.points.is_empty() || pb.points.is_empty() {
            continue;
        }
        for (from, to) in [(pa, pb), (pb, pa)] {
            let mut s = 0.0;
            for (x, o) in from.points.iter().zip(&from.features) {
                let mut best = 0;
                for (j, &y) in to.points.iter().enumerate() {
                    if dist2(*x, y) < dist2(*x, to.points[best]) {
                        best = j;
                    }
                }
                s += feature_dist2(o, &to.features[best]);
            }
            total += s / from.points.len() as f64;
        }
    }
    Ok(total)
}

/// Chamfer distance between two deformed shapes.
pub fn geo_loss(p: &[P], q: &[P]) -> Result<f64> {
    chamfer(p, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sets(points: &[P], labels: &[usize], k: usize) -> DeformedPartSets {
        let mut f = Tensor::zeros(points.len(), k);
        for (r, &l) in labels.iter().enumerate() {
            f.set(r, l, 5.0);
        }
        DeformedPartSets::new(points, &f).unwrap()
    }

    #[test]
    fn match_examples() {
        let q = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]];
        assert_eq!(match_point([0.0; 3], &q).unwrap(), [1.0, 0.0, 0.0]);
        assert_eq!(match_point(q[1], &q).unwrap(), q[1]);
        assert!(matches!(match_point([0.0; 3], &[]), Err(Error::Domain(_))));
    }

    #[test]
    fn match_equals_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q: Vec<P> = (0..100).map(|_| [0; 3].map(|_| rng.random_range(-1.0..1.0))).collect();
        for _ in 0..50 {
            let x = [0; 3].map(|_| rng.random_range(-1.0..1.0));
            let (i, _) = nearest_brute(&q, x).unwrap();
            assert_eq!(match_point(x, &q).unwrap(), q[i]);
        }
    }

    #[test]
    fn pdc_geo_examples() {
        let a = sets(&[[0.0; 3]], &[0], 1);
        let b = sets(&[[1.0, 0.0, 0.0]], &[0], 1);
        assert_eq!(pdc_geo(&a, &b).unwrap(), 2.0);
        assert_eq!(pdc_geo(&a, &a).unwrap(), 0.0);
        // a part missing on one side contributes nothing
        let c = sets(&[[0.0; 3], [5.0, 0.0, 0.0]], &[0, 1], 2);
        let d = sets(&[[0.0; 3]], &[0], 2);
        assert_eq!(pdc_geo(&c, &d).unwrap(), 0.0);
        let e = sets(&[[0.0; 3]], &[0], 3);
        assert!(matches!(pdc_geo(&c, &e), Err(Error::Config(_))));
    }

    #[test]
    fn pdc_sem_constant_offset() {
        let pts = [[0.0; 3], [0.5, 0.0, 0.0], [0.0, 0.7, 0.1]];
        let fa = Tensor::from_vec(3, 2, vec![3.0, 0.0, 0.0, 2.0, 4.0, 1.0]);
        let v = [0.25, -0.5];
        let mut fb = fa.clone();
        for r in 0..3 {
            fb.row_mut(r)[0] += v[0];
            fb.row_mut(r)[1] += v[1];
        }
        let a = DeformedPartSets::new(&pts, &fa).unwrap();
        let b = DeformedPartSets::new(&pts, &fb).unwrap();
        assert_eq!(pdc_sem(&a, &a).unwrap(), 0.0);
        let parts = a.parts.iter().zip(&b.parts).filter(|(x, y)| !x.points.is_empty() && !y.points.is_empty()).count();
        let expect = parts as f64 * 2.0 * (v[0] * v[0] + v[1] * v[1]);
        assert!((pdc_sem(&a, &b).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn geo_loss_examples() {
        assert_eq!(geo_loss(&[[0.0; 3]], &[[1.0, 0.0, 0.0]]).unwrap(), 2.0);
        assert!(matches!(geo_loss(&[], &[[1.0, 0.0, 0.0]]), Err(Error::Domain(_))));
    }

    fn random_sets(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DeformedPartSets {
        let pts: Vec<P> = (0..n).map(|_| [0; 3].map(|_| rng.random_range(-1.0..1.0))).collect();
        let f = Tensor::from_vec(n, k, (0..n * k).map(|_| rng.random_range(-2.0..2.0)).collect());
        DeformedPartSets::new(&pts, &f).unwrap()
    }

    proptest! {
        #[test]
        fn spatial_index_matches_brute_force(seed in 0u64..500, n in 1usize..60, m in 1usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_sets(&mut rng, n, 2);
            let b = random_sets(&mut rng, m, 2);
            let g = pdc_geo(&a, &b).unwrap();
            prop_assert_eq!(g.to_bits(), pdc_geo_brute(&a, &b).unwrap().to_bits());
            prop_assert!((g - pdc_geo(&b, &a).unwrap()).abs() <= 1e-12);
            let s = pdc_sem(&a, &b).unwrap();
            prop_assert!((s - pdc_sem_brute(&a, &b).unwrap()).abs() <= 1e-12 * s.max(1.0));
            prop_assert!(g >= 0.0 && s >= 0.0);
        }
    }
}
