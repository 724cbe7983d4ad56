//! Point samples of shapes: surface points with normals, query points with
//! signed distances, and per-point semantic features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::sdf::norm;
use super::synth::SynthSpec;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::io::quantize;

pub type Point = [f64; 3];

/// One training shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeSample {
    /// Number of semantic parts (feature width).
    pub parts: usize,
    pub surface: Vec<Point>,
    pub normals: Vec<Point>,
    /// surface × parts
    pub surface_features: Tensor,
    pub labels: Option<Vec<usize>>,
    pub query: Vec<Point>,
    pub sdf: Vec<f64>,
    /// query × parts
    pub query_features: Tensor,
}

impl ShapeSample {
    pub fn validate(&self) -> Result<()> {
        let ns = self.surface.len();
        let nq = self.query.len();
        if self.normals.len() != ns {
            return Err(Error::config(format!("{} normals for {ns} surface points", self.normals.len())));
        }
        if self.surface_features.shape() != (ns, self.parts) || self.query_features.shape() != (nq, self.parts) {
            return Err(Error::config("feature matrix shape does not match point counts and parts"));
        }
        if self.sdf.len() != nq {
            return Err(Error::config(format!("{} distances for {nq} query points", self.sdf.len())));
        }
        if let Some(l) = &self.labels {
            if l.len() != ns {
                return Err(Error::config(format!("{} labels for {ns} surface points", l.len())));
            }
            if let Some(&bad) = l.iter().find(|&&v| v >= self.parts) {
                return Err(Error::config(format!("label {bad} out of range 0..{}", self.parts)));
            }
        }
        let finite = self
            .surface
            .iter()
            .chain(&self.normals)
            .chain(&self.query)
            .flatten()
            .chain(&self.sdf)
            .chain(self.surface_features.data())
            .chain(self.query_features.data())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("non-finite value in shape sample"));
        }
        Ok(())
    }

    /// Part of each surface point by arg-max of its semantic feature.
    pub fn feature_parts(&self) -> Vec<usize> {
        (0..self.surface.len())
            .map(|r| crate::fields::sdc::argmax(self.surface_features.row(r)))
            .collect()
    }

    /// Sub-sample without replacement.
    pub fn subsample<R: Rng + ?Sized>(&self, n_surface: usize, n_query: usize, rng: &mut R) -> Self {
        let si = choose(self.surface.len(), n_surface, rng);
        let qi = choose(self.query.len(), n_query, rng);
        Self {
            parts: self.parts,
            surface: si.iter().map(|&i| self.surface[i]).collect(),
            normals: si.iter().map(|&i| self.normals[i]).collect(),
            surface_features: self.surface_features.gather_rows(&si),
            labels: self.labels.as_ref().map(|l| si.iter().map(|&i| l[i]).collect()),
            query: qi.iter().map(|&i| self.query[i]).collect(),
            sdf: qi.iter().map(|&i| self.sdf[i]).collect(),
            query_features: self.query_features.gather_rows(&qi),
        }
    }
}

/// `k` distinct indices out of `n` in selection order; all of them when `k ≥ n`.
fn choose<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleOptions {
    pub n_surface: usize,
    pub n_query: usize,
    /// Feature temperature: features are `onehot(label) / tau`.
    pub tau: f64,
    /// Standard deviation of near-surface query offsets.
    pub near_sigma: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            n_surface: 2048,
            n_query: 2048,
            tau: 0.2,
            near_sigma: 0.05,
        }
    }
}

/// Sample with default feature temperature and near-surface spread.
pub fn sample_shape(spec: &SynthSpec, n_surface: usize, n_query: usize, seed: u64) -> Result<ShapeSample> {
    sample_shape_with(
        spec,
        &SampleOptions {
            n_surface,
            n_query,
            ..SampleOptions::default()
        },
        seed,
    )
}

pub fn sample_shape_with(spec: &SynthSpec, opts: &SampleOptions, seed: u64) -> Result<ShapeSample> {
    spec.validate()?;
    if !(opts.tau.is_finite() && opts.tau > 0.0) {
        return Err(Error::config("feature temperature must be positive"));
    }
    let union = &spec.union;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let areas: Vec<f64> = union.parts.iter().map(|p| p.primitive.area()).collect();
    let total: f64 = areas.iter().sum();
    let inside_cube = |p: &Point| p.iter().all(|v| v.abs() <= 1.0);

    let mut surface = Vec::with_capacity(opts.n_surface);
    let mut normals = Vec::with_capacity(opts.n_surface);
    let mut labels = Vec::with_capacity(opts.n_surface);
    let budget = 1000 * opts.n_surface.max(1);
    let mut attempts = 0;
    while surface.len() < opts.n_surface {
        attempts += 1;
        if attempts > budget {
            return Err(Error::domain("could not place surface samples: the shape surface is covered or outside the unit cube"));
        }
        let mut t = rng.random::<f64>() * total;
        let mut i = areas.len() - 1;
        for (j, a) in areas.iter().enumerate() {
            if t < *a {
                i = j;
                break;
            }
            t -= a;
        }
        let (p, _) = union.parts[i].primitive.sample_surface(&mut rng);
        let p = p.map(quantize);
        if !inside_cube(&p) {
            continue;
        }
        // reject points buried inside another primitive
        let covered = union.parts.iter().enumerate().any(|(j, q)| j != i && q.primitive.sdf(p) < 0.0);
        if covered {
            continue;
        }
        let g = union.gradient(p);
        let n = norm(g);
        surface.push(p);
        normals.push(g.map(|v| quantize(v / n)));
        labels.push(union.label(p));
    }

    let near = Normal::new(0.0, opts.near_sigma).map_err(|e| Error::config(e.to_string()))?;
    let n_near = opts.n_query / 2;
    let mut query = Vec::with_capacity(opts.n_query);
    while query.len() < opts.n_query {
        let p: Point = if query.len() < n_near && !surface.is_empty() {
            let s = surface[rng.random_range(0..surface.len())];
            s.map(|v| v + near.sample(&mut rng))
        } else {
            [0; 3].map(|_| rng.random_range(-1.0..=1.0))
        };
        let p = p.map(quantize);
        if inside_cube(&p) {
            query.push(p);
        }
    }
    let sdf: Vec<f64> = query.iter().map(|&p| quantize(union.sdf(p))).collect();
    let k = spec.parts;
    let feature_matrix = |labels: &[usize]| {
        let mut t = Tensor::zeros(labels.len(), k);
        for (r, &l) in labels.iter().enumerate() {
            t.set(r, l, quantize(1.0 / opts.tau));
        }
        t
    };
    let surface_features = feature_matrix(&labels);
    let query_labels: Vec<usize> = query.iter().map(|&p| union.label(p)).collect();
    let query_features = feature_matrix(&query_labels);
    let s = ShapeSample {
        parts: k,
        surface,
        normals,
        surface_features,
        labels: Some(labels),
        query,
        sdf,
        query_features,
    };
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sdf::{Part, Primitive, Union};
    use crate::geometry::synth::{family_shape, Family};

    fn unit_sphere() -> SynthSpec {
        SynthSpec::from_parts(
            2,
            Union {
                parts: vec![Part {
                    primitive: Primitive::sphere([0.0; 3], 1.0),
                    label: 0,
                }],
            },
        )
        .unwrap()
    }

    #[test]
    fn unit_sphere_samples_have_radius_one() {
        let s = sample_shape(&unit_sphere(), 500, 100, 1).unwrap();
        for (p, n) in s.surface.iter().zip(&s.normals) {
            assert!((norm(*p) - 1.0).abs() <= 1e-6);
            assert!((norm(*n) - 1.0).abs() <= 1e-6);
        }
        assert!(s.query.iter().flatten().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn two_part_labels_follow_part_argmin_and_sdf_vanishes_on_surface() {
        let spec = family_shape(Family::Sphere, 0, 3);
        let s = sample_shape(&spec, 400, 400, 2).unwrap();
        let labels = s.labels.as_ref().unwrap();
        for (p, &l) in s.surface.iter().zip(labels) {
            assert_eq!(l, spec.union.label(*p));
            assert!(spec.union.sdf(*p).abs() <= 1e-6);
        }
        assert_eq!(s.feature_parts(), *labels);
        assert!(labels.contains(&0) && labels.contains(&1));
    }

    #[test]
    fn sampling_is_reproducible() {
        let spec = family_shape(Family::Chair, 2, 3);
        let a = sample_shape(&spec, 300, 300, 9).unwrap();
        let b = sample_shape(&spec, 300, 300, 9).unwrap();
        assert_eq!(a, b);
        let c = sample_shape(&spec, 300, 300, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn eikonal_holds_away_from_features() {
        for family in [Family::Sphere, Family::Chair, Family::Table] {
            let spec = family_shape(family, 1, 4);
            let s = sample_shape(&spec, 300, 600, 1).unwrap();
            for &p in s.query.iter().chain(&s.surface) {
                if spec.union.feature_distance(p) < 1e-3 {
                    continue;
                }
                let g = spec.union.gradient(p);
                assert!((norm(g) - 1.0).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn covered_surface_is_a_domain_error() {
        let spec = SynthSpec::from_parts(
            2,
            Union {
                parts: vec![Part {
                    primitive: Primitive::sphere([0.0; 3], 3.0),
                    label: 1,
                }],
            },
        )
        .unwrap();
        assert!(matches!(sample_shape(&spec, 10, 10, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn subsample_picks_distinct_rows() {
        let spec = family_shape(Family::Table, 0, 1);
        let s = sample_shape(&spec, 200, 200, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sub = s.subsample(50, 70, &mut rng);
        assert_eq!((sub.surface.len(), sub.query.len()), (50, 70));
        sub.validate().unwrap();
        let mut seen = sub.surface.clone();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        seen.dedup();
        assert_eq!(seen.len(), 50);
    }
}
