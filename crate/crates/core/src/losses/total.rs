//! The full training objective over a batch, recorded on a tape so that
//! parameter gradients follow by reverse mode.

use super::consistency::{part_matches, pdc_sem_from, DeformedPartSets, Match};
use super::recon::{ReconTerms, NORMAL_EPS};
use super::weights::{ConsistencyPoints, LossWeights};
use crate::autodiff::{Binder, ParamVector, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::fields::model::Model;
use crate::fields::sdc::assignment_matrix;
use crate::geometry::kdtree::KdTree;
use crate::geometry::sample::ShapeSample;

/// A shape in a batch and the row of its latent code.
#[derive(Clone, Copy, Debug)]
pub struct BatchShape<'a> {
    pub index: usize,
    pub sample: &'a ShapeSample,
}

/// Per-term values of one evaluation, unweighted except `total` and `rec`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Breakdown {
    pub total: f64,
    pub rec: f64,
    pub rec_terms: ReconTerms,
    pub pdc_geo: f64,
    pub pdc_sem: f64,
    pub scale: f64,
    pub geo: f64,
    pub smooth: f64,
    pub normal: f64,
    pub c: f64,
    pub emb: f64,
    /// Mean per-shape global scaling factor.
    pub r_mean: f64,
}

impl Breakdown {
    pub const CSV_HEADER: &'static str = "total,rec,pdc_geo,pdc_sem,scale,geo,smooth,normal,c,emb,r_mean";

    pub fn values(&self) -> [f64; 11] {
        [
            self.total,
            self.rec,
            self.pdc_geo,
            self.pdc_sem,
            self.scale,
            self.geo,
            self.smooth,
            self.normal,
            self.c,
            self.emb,
            self.r_mean,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

struct ShapeNodes {
    /// Deformed consistency points, m×3.
    deformed: Var,
    parts: DeformedPartSets,
    points: Vec<[f64; 3]>,
}

fn scalar(tape: &mut Tape, v: f64) -> Var {
    tape.constant(Tensor::scalar(v))
}

fn sum_all(tape: &mut Tape, terms: &[Var]) -> Var {
    let mut it = terms.iter();
    let first = *it.next().expect("at least one term");
    it.fold(first, |acc, &t| tape.add(acc, t))
}

fn mean_rows(tape: &mut Tape, a: Var, start: usize, len: usize) -> Var {
    if len == 0 {
        return scalar(tape, 0.0);
    }
    let s = tape.slice_rows(a, start, len);
    tape.mean(s)
}

fn rows_of(t: &Tensor) -> Vec<[f64; 3]> {
    (0..t.rows()).map(|r| [t.get(r, 0), t.get(r, 1), t.get(r, 2)]).collect()
}

/// Mean of `1 − ⟨g/‖g‖, n⟩` over rows.
fn misalignment(tape: &mut Tape, g: Var, n: Var) -> Var {
    let rows = tape.value(g).rows();
    let dot = tape.dot_rows(g, n);
    let len = tape.norm_rows(g);
    let floor = tape.constant(Tensor::filled(rows, 1, NORMAL_EPS));
    let len = tape.max(len, floor);
    let cos = tape.div(dot, len);
    let c = tape.neg(cos);
    let c = tape.offset(c, 1.0);
    tape.mean(c)
}

/// `Σ w · ‖a[src] − b[dst]‖²` over a match list, using stacked-row indices.
fn matched_sq(tape: &mut Tape, a: Var, b: Var, src: Vec<usize>, dst: Vec<usize>, w: Vec<f64>) -> Var {
    if src.is_empty() {
        return scalar(tape, 0.0);
    }
    let n = w.len();
    let pa = tape.gather_rows(a, src);
    let pb = tape.gather_rows(b, dst);
    let d = tape.sub(pa, pb);
    let d2 = tape.square(d);
    let r = tape.row_sum(d2);
    let wv = tape.constant(Tensor::from_vec(n, 1, w));
    let r = tape.mul(r, wv);
    tape.sum(r)
}

fn part_pairs(from: &DeformedPartSets, to: &DeformedPartSets, ms: &[Match]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let src = ms.iter().map(|m| from.parts[m.part].rows[m.src]).collect();
    let dst = ms.iter().map(|m| to.parts[m.part].rows[m.dst]).collect();
    (src, dst, ms.iter().map(|m| m.weight).collect())
}

fn nearest_pairs(from: &[[f64; 3]], to: &[[f64; 3]]) -> Result<(Vec<usize>, Vec<usize>, Vec<f64>)> {
    let tree = KdTree::from_slice(to);
    let w = 1.0 / from.len() as f64;
    let mut dst = Vec::with_capacity(from.len());
    for &x in from {
        dst.push(tree.nearest(x)?.0);
    }
    Ok(((0..from.len()).collect(), dst, vec![w; from.len()]))
}

/// Latent-code rows of the batch shapes, 1×d nodes.
pub fn latent_codes(tape: &mut Tape, binder: &mut Binder<'_>, model: &Model, batch: &[BatchShape<'_>]) -> Result<Vec<Var>> {
    let latent = binder.var(tape, model.blocks.latent);
    batch
        .iter()
        .map(|b| {
            if b.index >= model.config.shapes {
                return Err(Error::config(format!(
                    "shape index {} out of range for {} latent codes",
                    b.index, model.config.shapes
                )));
            }
            Ok(tape.slice_rows(latent, b.index, 1))
        })
        .collect()
}

/// Record the weighted objective of `batch` with one code node per shape.
/// Per-shape terms are averaged over the batch and pairwise terms over the
/// pairs (0,1), (2,3), …
pub fn total_loss_tape(
    tape: &mut Tape,
    binder: &mut Binder<'_>,
    model: &Model,
    batch: &[BatchShape<'_>],
    codes: &[Var],
    weights: &LossWeights,
) -> Result<(Var, Breakdown)> {
    weights.validate()?;
    if batch.is_empty() {
        return Err(Error::config("empty batch"));
    }
    if codes.len() != batch.len() {
        return Err(Error::config(format!("{} codes for {} shapes", codes.len(), batch.len())));
    }
    if batch.len() < 2 && weights.any_consistency() {
        return Err(Error::config("consistency terms need a batch of at least two shapes"));
    }
    let k = model.config.parts;
    let inv_b = 1.0 / batch.len() as f64;
    let mut bd = Breakdown::default();
    let mut rec_parts = Vec::new();
    let mut smooth_parts = Vec::new();
    let mut normal_parts = Vec::new();
    let mut c_parts = Vec::new();
    let mut r_parts = Vec::new();
    let mut shapes = Vec::new();

    for (b, &code) in batch.iter().zip(codes) {
        let s = b.sample;
        s.validate()?;
        if s.parts != k {
            return Err(Error::config(format!("shape has {} parts, model expects {k}", s.parts)));
        }
        let (ns, nq) = (s.surface.len(), s.query.len());
        let n = ns + nq;
        if n == 0 {
            return Err(Error::domain("shape without sample points"));
        }
        let pts: Vec<[f64; 3]> = s.surface.iter().chain(&s.query).copied().collect();
        let points = Tensor::from_rows(&pts);
        let features = Tensor::concat_rows(&[&s.surface_features, &s.query_features]);
        let assign = assignment_matrix(&features, model.config.sdc);
        let st = model.shape_tape(tape, binder, code, &points, &assign, ns);

        // reconstruction
        let mut target = vec![0.0; ns];
        target.extend_from_slice(&s.sdf);
        let target = tape.constant(Tensor::from_vec(n, 1, target));
        let diff = tape.sub(st.field, target);
        let diff = tape.abs(diff);
        let sdf = tape.mean(diff);
        let gnorm = tape.norm_rows(st.field_grad);
        let eik = tape.offset(gnorm, -1.0);
        let eik = tape.abs(eik);
        let eik = tape.mean(eik);
        let (normal, nloss) = if ns > 0 {
            let nrm = tape.constant(Tensor::from_rows(&s.normals));
            let g = tape.slice_rows(st.field_grad, 0, ns);
            let normal = misalignment(tape, g, nrm);
            let tg = st.template_grad.expect("surface rows present");
            (normal, misalignment(tape, tg, nrm))
        } else {
            (scalar(tape, 0.0), scalar(tape, 0.0))
        };
        let off = if nq > 0 {
            let f = tape.slice_rows(st.field, ns, nq);
            let f = tape.abs(f);
            let f = tape.scale(f, -weights.delta);
            let f = tape.exp(f);
            tape.mean(f)
        } else {
            scalar(tape, 0.0)
        };
        let terms = ReconTerms {
            sdf: tape.value(sdf).item(),
            normal: tape.value(normal).item(),
            eikonal: tape.value(eik).item(),
            off_surface: tape.value(off).item(),
        };
        let rw = &weights.recon;
        let ws = [
            tape.scale(sdf, rw.sdf),
            tape.scale(normal, rw.normal),
            tape.scale(eik, rw.eikonal),
            tape.scale(off, rw.off_surface),
        ];
        rec_parts.push(sum_all(tape, &ws));
        bd.rec_terms.sdf += terms.sdf * inv_b;
        bd.rec_terms.normal += terms.normal * inv_b;
        bd.rec_terms.eikonal += terms.eikonal * inv_b;
        bd.rec_terms.off_surface += terms.off_surface * inv_b;

        // deformation regularizers over query points
        let sm = if nq > 0 {
            let sq: Vec<Var> = st
                .jacobian
                .iter()
                .map(|&j| {
                    let q = tape.slice_rows(j, ns, nq);
                    let q = tape.square(q);
                    tape.sum(q)
                })
                .collect();
            let total = sum_all(tape, &sq);
            tape.scale(total, 1.0 / nq as f64)
        } else {
            scalar(tape, 0.0)
        };
        smooth_parts.push(sm);
        normal_parts.push(nloss);
        let ds = tape.abs(st.delta_s);
        c_parts.push(mean_rows(tape, ds, ns, nq));

        // consistency point set
        let (start, m) = match weights.consistency_points {
            ConsistencyPoints::Surface => (0, ns),
            ConsistencyPoints::All => (0, n),
        };
        if m == 0 {
            return Err(Error::domain("shape has no points for the consistency terms"));
        }
        let deformed = tape.slice_rows(st.deformed, start, m);
        let dvals = rows_of(tape.value(deformed));
        let cfeat = features.slice_rows(start, m);
        let parts = DeformedPartSets::new(&dvals, &cfeat)?;

        // global scale
        let src = &pts[start..start + m];
        let den: f64 = src.iter().map(|x| x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sum();
        if den <= 0.0 {
            return Err(Error::domain("scale factor undefined: all points at the origin"));
        }
        let x = tape.constant(Tensor::from_rows(src));
        let num = tape.dot_rows(x, deformed);
        let num = tape.sum(num);
        r_parts.push(tape.scale(num, 1.0 / den));
        shapes.push(ShapeNodes {
            deformed,
            parts,
            points: dvals,
        });
    }

    let avg = |tape: &mut Tape, parts: &[Var], c: f64| {
        let s = sum_all(tape, parts);
        tape.scale(s, c)
    };
    let rec = avg(tape, &rec_parts, inv_b);
    let smooth = avg(tape, &smooth_parts, inv_b);
    let normal = avg(tape, &normal_parts, inv_b);
    let c = avg(tape, &c_parts, inv_b);
    let r_mean = avg(tape, &r_parts, inv_b);
    let scale = tape.offset(r_mean, -1.0);
    let scale = tape.abs(scale);

    // pairwise terms
    let pairs = batch.len() / 2;
    let mut geo_parts = Vec::new();
    let mut pdc_parts = Vec::new();
    let mut sem = 0.0;
    for p in 0..pairs {
        let (a, b) = (&shapes[2 * p], &shapes[2 * p + 1]);
        let (ab, ba) = part_matches(&a.parts, &b.parts)?;
        let (s1, d1, w1) = part_pairs(&a.parts, &b.parts, &ab);
        let (s2, d2, w2) = part_pairs(&b.parts, &a.parts, &ba);
        let t1 = matched_sq(tape, a.deformed, b.deformed, s1, d1, w1);
        let t2 = matched_sq(tape, b.deformed, a.deformed, s2, d2, w2);
        pdc_parts.push(tape.add(t1, t2));
        sem += pdc_sem_from(&a.parts, &b.parts, &ab, &ba);
        if a.points.is_empty() || b.points.is_empty() {
            return Err(Error::domain("chamfer distance of an empty point set"));
        }
        let (s1, d1, w1) = nearest_pairs(&a.points, &b.points)?;
        let (s2, d2, w2) = nearest_pairs(&b.points, &a.points)?;
        let t1 = matched_sq(tape, a.deformed, b.deformed, s1, d1, w1);
        let t2 = matched_sq(tape, b.deformed, a.deformed, s2, d2, w2);
        geo_parts.push(tape.add(t1, t2));
    }
    let (pdc_geo, geo) = if pairs > 0 {
        let inv_p = 1.0 / pairs as f64;
        (avg(tape, &pdc_parts, inv_p), avg(tape, &geo_parts, inv_p))
    } else {
        (scalar(tape, 0.0), scalar(tape, 0.0))
    };
    let pdc_sem = if pairs > 0 { sem / pairs as f64 } else { 0.0 };

    // embeddings: mean square of the batch codes and of the priors
    let z = tape.concat_rows(codes);
    let z2 = tape.square(z);
    let z2 = tape.mean(z2);
    let e = binder.var(tape, model.blocks.priors);
    let e2 = tape.square(e);
    let e2 = tape.mean(e2);
    let emb = tape.add(z2, e2);

    let mut terms = vec![rec];
    for (w, v) in [
        (weights.pdc_geo, pdc_geo),
        (weights.scale, scale),
        (weights.geo, geo),
        (weights.smooth, smooth),
        (weights.normal, normal),
        (weights.correction, c),
        (weights.emb, emb),
    ] {
        if w > 0.0 {
            terms.push(tape.scale(v, w));
        }
    }
    if weights.pdc_sem > 0.0 && pdc_sem != 0.0 {
        terms.push(scalar(tape, weights.pdc_sem * pdc_sem));
    }
    let total = sum_all(tape, &terms);

    let val = |tape: &Tape, v: Var| tape.value(v).item();
    bd.total = val(tape, total);
    bd.rec = val(tape, rec);
    bd.pdc_geo = val(tape, pdc_geo);
    bd.pdc_sem = pdc_sem;
    bd.scale = val(tape, scale);
    bd.geo = val(tape, geo);
    bd.smooth = val(tape, smooth);
    bd.normal = val(tape, normal);
    bd.c = val(tape, c);
    bd.emb = val(tape, emb);
    bd.r_mean = val(tape, r_mean);
    Ok((total, bd))
}

/// Objective value with codes taken from the latent table.
pub fn total_loss(model: &Model, params: &ParamVector, batch: &[BatchShape<'_>], weights: &LossWeights) -> Result<Breakdown> {
    let mut tape = Tape::new();
    let mut binder = Binder::with_trainable(params, &[]);
    let codes = latent_codes(&mut tape, &mut binder, model, batch)?;
    Ok(total_loss_tape(&mut tape, &mut binder, model, batch, &codes, weights)?.1)
}

/// Objective value and its gradient with respect to every parameter block.
pub fn total_loss_grad(
    model: &Model,
    params: &ParamVector,
    batch: &[BatchShape<'_>],
    weights: &LossWeights,
) -> Result<(Breakdown, ParamVector)> {
    let mut tape = Tape::new();
    let mut binder = Binder::new(params);
    let codes = latent_codes(&mut tape, &mut binder, model, batch)?;
    let (root, bd) = total_loss_tape(&mut tape, &mut binder, model, batch, &codes, weights)?;
    let grads = tape.backward(root);
    Ok((bd, binder.collect(&grads)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::ReconWeights;
    use crate::fields::model::tests::tiny_config;
    use crate::geometry::sample::sample_shape;
    use crate::geometry::synth::{family_shape, Family};
    use crate::losses::{consistency, recon, regular, scale};

    fn samples(n: usize) -> Vec<ShapeSample> {
        (0..n)
            .map(|i| sample_shape(&family_shape(Family::Sphere, i, 7), 10, 10, 11 + i as u64).unwrap())
            .collect()
    }

    fn batch(s: &[ShapeSample]) -> Vec<BatchShape<'_>> {
        s.iter().enumerate().map(|(index, sample)| BatchShape { index, sample }).collect()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn matches_pointwise_definitions() {
        let m = Model::new(tiny_config()).unwrap();
        let p = m.init(3);
        let s = samples(2);
        let w = LossWeights::default();
        let bd = total_loss(&m, &p, &batch(&s), &w).unwrap();
        let fields: Vec<_> = (0..2).map(|i| m.shape_field(&p, m.code(&p, i)).unwrap()).collect();
        let mut rec = 0.0;
        let mut sm = 0.0;
        let mut nl = 0.0;
        let mut c = 0.0;
        let mut sets = Vec::new();
        let mut deformed = Vec::new();
        let mut pairs = Vec::new();
        for (f, s) in fields.iter().zip(&s) {
            let jet = |x: [f64; 3], o: &[f64]| f.deformer.deform_dual(x, &f.alpha(o));
            rec += recon::recon_loss(s, |x, o| f.eval_grad(x, o), w.delta, &w.recon).unwrap() / 2.0;
            sm += regular::smooth_loss(s, jet) / 2.0;
            nl += regular::normal_loss(s, jet, |u| f.template_grad(u).1) / 2.0;
            c += regular::correction_loss(s, jet) / 2.0;
            let (u, _) = f.deform_points(&s.surface, &s.surface_features);
            sets.push(DeformedPartSets::new(&u, &s.surface_features).unwrap());
            pairs.push(s.surface.iter().zip(&u).map(|(x, y)| (*x, [0, 1, 2].map(|j| y[j] - x[j]))).collect::<Vec<_>>());
            deformed.push(u);
        }
        assert!(close(bd.rec, rec), "{} vs {rec}", bd.rec);
        assert!(close(bd.smooth, sm));
        assert!(close(bd.normal, nl));
        assert!(close(bd.c, c));
        assert!(close(bd.pdc_geo, consistency::pdc_geo(&sets[0], &sets[1]).unwrap()));
        assert!(close(bd.pdc_sem, consistency::pdc_sem(&sets[0], &sets[1]).unwrap()));
        assert!(close(bd.geo, consistency::geo_loss(&deformed[0], &deformed[1]).unwrap()));
        assert!(close(bd.r_mean, scale::mean_scale(&pairs).unwrap()));
        assert!(close(bd.scale, scale::scale_loss(&pairs).unwrap()));
        let codes: Vec<&[f64]> = (0..2).map(|i| m.code(&p, i)).collect();
        let e = m.priors(&p);
        let emb = regular::emb_loss(codes.iter().copied(), std::iter::empty()) / 8.0 + regular::emb_loss(std::iter::empty(), [e.data()]) / 6.0;
        assert!(close(bd.emb, emb));
        let expect = bd.rec
            + w.pdc_geo * bd.pdc_geo
            + w.pdc_sem * bd.pdc_sem
            + w.scale * bd.scale
            + w.geo * bd.geo
            + w.smooth * bd.smooth
            + w.normal * bd.normal
            + w.correction * bd.c
            + w.emb * bd.emb;
        assert!(close(bd.total, expect));
    }

    #[test]
    fn zero_weights_leave_reconstruction() {
        let m = Model::new(tiny_config()).unwrap();
        let p = m.init(4);
        let s = samples(3);
        let bd = total_loss(&m, &p, &batch(&s), &LossWeights::recon_only()).unwrap();
        assert_eq!(bd.total, bd.rec);
        assert!(bd.pdc_geo > 0.0 && bd.smooth > 0.0, "terms are still reported");
    }

    #[test]
    fn each_weight_enters_linearly() {
        let m = Model::new(tiny_config()).unwrap();
        let p = m.init(5);
        let s = samples(2);
        let base = LossWeights::recon_only();
        let rec = total_loss(&m, &p, &batch(&s), &base).unwrap().total;
        let one = LossWeights { pdc_geo: 3.0, ..base };
        let two = LossWeights { pdc_geo: 6.0, ..base };
        let a = total_loss(&m, &p, &batch(&s), &one).unwrap().total - rec;
        let b = total_loss(&m, &p, &batch(&s), &two).unwrap().total - rec;
        assert!(a > 0.0 && close(b, 2.0 * a));
    }

    #[test]
    fn single_shape_with_pairwise_terms_is_config_error() {
        let m = Model::new(tiny_config()).unwrap();
        let p = m.init(6);
        let s = samples(1);
        let w = LossWeights::default();
        assert!(matches!(total_loss(&m, &p, &batch(&s), &w), Err(Error::Config(_))));
        let solo = LossWeights { smooth: 1.0, ..LossWeights::recon_only() };
        assert!(total_loss(&m, &p, &batch(&s), &solo).is_ok());
    }

    fn unit_term_weights() -> Vec<(&'static str, LossWeights)> {
        let zero = LossWeights {
            recon: ReconWeights { sdf: 0.0, normal: 0.0, eikonal: 0.0, off_surface: 0.0 },
            ..LossWeights::recon_only()
        };
        let r = |recon| LossWeights { recon, ..zero };
        vec![
            ("sdf", r(ReconWeights { sdf: 1.0, ..zero.recon })),
            ("rec_normal", r(ReconWeights { normal: 1.0, ..zero.recon })),
            ("eikonal", r(ReconWeights { eikonal: 1.0, ..zero.recon })),
            ("off_surface", r(ReconWeights { off_surface: 1.0, ..zero.recon })),
            ("pdc_geo", LossWeights { pdc_geo: 1.0, ..zero }),
            ("pdc_sem", LossWeights { pdc_sem: 1.0, ..zero }),
            ("scale", LossWeights { scale: 1.0, ..zero }),
            ("geo", LossWeights { geo: 1.0, ..zero }),
            ("smooth", LossWeights { smooth: 1.0, ..zero }),
            ("normal", LossWeights { normal: 1.0, ..zero }),
            ("correction", LossWeights { correction: 1.0, ..zero }),
            ("emb", LossWeights { emb: 1.0, ..zero }),
        ]
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = Model::new(tiny_config()).unwrap();
        let p = m.init(8);
        assert!(p.len() <= 2000);
        let s = samples(2);
        let b = batch(&s);
        for (name, w) in unit_term_weights() {
            let (_, g) = total_loss_grad(&m, &p, &b, &w).unwrap();
            let f = |q: &ParamVector| total_loss(&m, q, &b, &w).unwrap().total;
            let h = 1e-6;
            let mut worst = 0.0f64;
            for i in (0..p.len()).step_by(5) {
                let mut qp = p.clone();
                let mut qm = p.clone();
                qp.data_mut()[i] += h;
                qm.data_mut()[i] -= h;
                let fd = (f(&qp) - f(&qm)) / (2.0 * h);
                let ad = g.data()[i];
                let scale = fd.abs().max(ad.abs()).max(1.0);
                worst = worst.max((fd - ad).abs() / scale);
            }
            assert!(worst <= 1e-5, "{name}: worst relative error {worst}");
        }
    }
}
