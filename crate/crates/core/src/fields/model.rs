//! The full model: template field, hypernetwork-conditioned deformation
//! field, per-shape latent codes and part deformation priors, all stored in
//! one [`ParamVector`].

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::hyper::{HyperBlocks, HyperNet};
use super::mlp::{forward_dual_tape, retangent_rows, MlpBlocks, MlpSpec, MlpWeights, Seeds};
use super::sdc::{assignment, SdcMode};
use crate::autodiff::dual::unit_seed;
use crate::autodiff::{Binder, BlockId, Dual3, Layout, ParamVector, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub latent_dim: usize,
    pub prior_dim: usize,
    pub parts: usize,
    pub shapes: usize,
    pub template_width: usize,
    pub template_depth: usize,
    pub deform_width: usize,
    pub deform_depth: usize,
    pub hyper_hidden: usize,
    pub omega: f64,
    pub sdc: SdcMode,
    /// Standard deviation of the Gaussian used for codes and priors.
    pub code_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: 256,
            prior_dim: 64,
            parts: 2,
            shapes: 1,
            template_width: 128,
            template_depth: 5,
            deform_width: 128,
            deform_depth: 6,
            hyper_hidden: 64,
            omega: 30.0,
            sdc: SdcMode::Soft,
            code_std: 0.01,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("latent_dim", self.latent_dim),
            ("prior_dim", self.prior_dim),
            ("shapes", self.shapes),
            ("template_width", self.template_width),
            ("template_depth", self.template_depth),
            ("deform_width", self.deform_width),
            ("deform_depth", self.deform_depth),
            ("hyper_hidden", self.hyper_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.parts < 2 {
            return Err(Error::config(format!("need at least 2 parts, got {}", self.parts)));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::config("omega must be positive"));
        }
        if !(self.code_std.is_finite() && self.code_std >= 0.0) {
            return Err(Error::config("code_std must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelBlocks {
    pub template: MlpBlocks,
    pub hyper: HyperBlocks,
    /// shapes × latent_dim
    pub latent: BlockId,
    /// parts × prior_dim
    pub priors: BlockId,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub template: MlpSpec,
    pub deform: MlpSpec,
    pub hyper: HyperNet,
    pub layout: Arc<Layout>,
    pub blocks: ModelBlocks,
}

const TEMPLATE: &str = "template.";
const HYPER: &str = "hyper";
const LATENT: &str = "latent";
const PRIORS: &str = "priors";

/// Output of the deformation field at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeformOut {
    pub delta_x: [f64; 3],
    pub delta_s: f64,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let template = MlpSpec::siren(3, c.template_width, c.template_depth, 1, c.omega);
        let deform = MlpSpec::siren(3 + c.prior_dim, c.deform_width, c.deform_depth, 4, c.omega);
        let hyper = HyperNet::new(deform.clone(), c.latent_dim, c.hyper_hidden);
        let mut layout = Layout::new();
        let tb = template.register(&mut layout, TEMPLATE);
        let hb = hyper.register(&mut layout, HYPER);
        let latent = layout.push(LATENT, c.shapes, c.latent_dim);
        let priors = layout.push(PRIORS, c.parts, c.prior_dim);
        Ok(Self {
            config,
            template,
            deform,
            hyper,
            layout: Arc::new(layout),
            blocks: ModelBlocks {
                template: tb,
                hyper: hb,
                latent,
                priors,
            },
        })
    }

    /// Rebuild a model and check that `layout` matches it block for block.
    pub fn with_layout(config: ModelConfig, layout: &Layout) -> Result<Self> {
        let m = Self::new(config)?;
        if m.layout.blocks().len() != layout.blocks().len() {
            return Err(Error::config(format!(
                "layout has {} blocks, model expects {}",
                layout.blocks().len(),
                m.layout.blocks().len()
            )));
        }
        for (a, b) in m.layout.blocks().iter().zip(layout.blocks()) {
            if a.name != b.name || a.rows != b.rows || a.cols != b.cols {
                return Err(Error::config(format!(
                    "block {} ({}x{}) does not match expected {} ({}x{})",
                    b.name, b.rows, b.cols, a.name, a.rows, a.cols
                )));
            }
        }
        Ok(m)
    }

    pub fn init(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamVector::zeros(self.layout.clone());
        MlpWeights::init(&self.template, &mut rng).store(&mut p, &self.blocks.template);
        self.hyper.init(&mut p, &self.blocks.hyper, &mut rng);
        if self.config.code_std > 0.0 {
            let g = Normal::new(0.0, self.config.code_std).expect("valid std");
            for id in [self.blocks.latent, self.blocks.priors] {
                for v in p.block_mut(id) {
                    *v = g.sample(&mut rng);
                }
            }
        }
        p
    }

    /// Blocks other than the latent codes: both nets and the part priors.
    pub fn shared_blocks(&self) -> Vec<BlockId> {
        (0..self.layout.blocks().len())
            .map(BlockId)
            .filter(|&b| b != self.blocks.latent)
            .collect()
    }

    pub fn code<'p>(&self, params: &'p ParamVector, shape: usize) -> &'p [f64] {
        let d = self.config.latent_dim;
        &params.block(self.blocks.latent)[shape * d..(shape + 1) * d]
    }

    pub fn set_code(&self, params: &mut ParamVector, shape: usize, z: &[f64]) {
        let d = self.config.latent_dim;
        params.block_mut(self.blocks.latent)[shape * d..(shape + 1) * d].copy_from_slice(z);
    }

    pub fn priors(&self, params: &ParamVector) -> Tensor {
        params.tensor(self.blocks.priors)
    }

    pub fn template_weights(&self, params: &ParamVector) -> MlpWeights {
        MlpWeights::from_params(&self.template, params, &self.blocks.template)
    }

    pub fn template_eval(&self, params: &ParamVector, u: [f64; 3]) -> f64 {
        self.template_weights(params).forward(&self.template, &u)[0]
    }

    pub fn deformer(&self, params: &ParamVector, z: &[f64]) -> Result<Deformer> {
        Ok(Deformer {
            spec: self.deform.clone(),
            weights: self.hyper.generate(params, &self.blocks.hyper, z)?,
        })
    }

    /// Everything needed to evaluate one shape's field.
    pub fn shape_field(&self, params: &ParamVector, z: &[f64]) -> Result<ShapeField> {
        Ok(ShapeField {
            template_spec: self.template.clone(),
            template: self.template_weights(params),
            deformer: self.deformer(params, z)?,
            priors: self.priors(params),
            mode: self.config.sdc,
        })
    }

    /// Tape pass of one shape on a stack of points.
    ///
    /// `points` is n×3, `assign` the n×k part assignment (constant in x),
    /// `code` a 1×d node. The first `surface` rows additionally get the
    /// template-space gradient of the template field.
    pub fn shape_tape(
        &self,
        tape: &mut Tape,
        binder: &mut Binder<'_>,
        code: Var,
        points: &Tensor,
        assign: &Tensor,
        surface: usize,
    ) -> ShapeTape {
        let n = points.rows();
        let template_layers = self.blocks.template.bind(tape, binder);
        let priors = binder.var(tape, self.blocks.priors);
        let deform_layers = self.hyper.generate_tape(tape, binder, &self.blocks.hyper, code);

        let x = tape.constant(points.clone());
        let a = tape.constant(assign.clone());
        let alpha = tape.matmul(a, priors);
        let input = tape.concat_cols(&[x, alpha]);
        let d = forward_dual_tape(&self.deform, tape, &deform_layers, input, Seeds::Unit).output;
        let delta_x = tape.slice_cols(d.value, 0, 3);
        let delta_s = tape.slice_cols(d.value, 3, 1);
        let jacobian = d.tangents.map(|t| tape.slice_cols(t, 0, 3));
        let ds_grad = d.tangents.map(|t| tape.slice_cols(t, 3, 1));

        let deformed = tape.add(x, delta_x);
        let seeds = [0, 1, 2].map(|j| {
            let e = tape.constant(unit_seed(n, 3, j));
            tape.add(e, jacobian[j])
        });
        let pass = forward_dual_tape(&self.template, tape, &template_layers, deformed, Seeds::Given(seeds));
        let t = pass.output;
        let field = tape.add(t.value, delta_s);
        let cols = [0, 1, 2].map(|j| tape.add(t.tangents[j], ds_grad[j]));
        let field_grad = tape.concat_cols(&cols);
        let template_grad = (surface > 0).then(|| {
            let g = retangent_rows(&self.template, tape, &template_layers, &pass, 0, surface, Seeds::Unit);
            tape.concat_cols(&g)
        });
        ShapeTape {
            delta_x,
            delta_s,
            jacobian,
            deformed,
            field,
            field_grad,
            template_grad,
        }
    }
}

/// Nodes produced by [`Model::shape_tape`].
#[derive(Clone, Copy, Debug)]
pub struct ShapeTape {
    /// n×3
    pub delta_x: Var,
    /// n×1
    pub delta_s: Var,
    /// `∂Δx/∂x_j`, each n×3.
    pub jacobian: [Var; 3],
    /// `x + Δx`, n×3.
    pub deformed: Var,
    /// `T(x + Δx) + Δs`, n×1.
    pub field: Var,
    /// Spatial gradient of the field, n×3.
    pub field_grad: Var,
    /// `∇T` at the deformed surface rows, surface×3.
    pub template_grad: Option<Var>,
}

/// A deformation net with weights generated for one latent code.
#[derive(Clone, Debug)]
pub struct Deformer {
    pub spec: MlpSpec,
    pub weights: MlpWeights,
}

impl Deformer {
    fn input(x: [f64; 3], alpha: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 + alpha.len());
        v.extend_from_slice(&x);
        v.extend_from_slice(alpha);
        v
    }

    pub fn deform(&self, x: [f64; 3], alpha: &[f64]) -> DeformOut {
        let o = self.weights.forward(&self.spec, &Self::input(x, alpha));
        DeformOut {
            delta_x: [o[0], o[1], o[2]],
            delta_s: o[3],
        }
    }

    /// Outputs `(Δx₀, Δx₁, Δx₂, Δs)` with spatial derivatives.
    pub fn deform_dual(&self, x: [f64; 3], alpha: &[f64]) -> [Dual3; 4] {
        let mut input: Vec<Dual3> = Dual3::seed(x).to_vec();
        input.extend(alpha.iter().map(|&a| Dual3::constant(a)));
        let o = self.weights.forward_dual(&self.spec, &input);
        [o[0], o[1], o[2], o[3]]
    }

    /// Row-batched `(Δx, Δs)`: inputs n×3 and n×d′, output n×4.
    pub fn deform_batch(&self, x: &Tensor, alpha: &Tensor) -> Tensor {
        self.weights.forward_batch(&self.spec, &Tensor::concat_cols(&[x, alpha]))
    }
}

/// Read-only evaluator of one shape's field `T(x + Δx) + Δs`.
#[derive(Clone, Debug)]
pub struct ShapeField {
    pub template_spec: MlpSpec,
    pub template: MlpWeights,
    pub deformer: Deformer,
    pub priors: Tensor,
    pub mode: SdcMode,
}

impl ShapeField {
    pub fn alpha(&self, o: &[f64]) -> Vec<f64> {
        let w = assignment(o, self.mode);
        let mut a = vec![0.0; self.priors.cols()];
        for (i, wi) in w.iter().enumerate() {
            for (aj, e) in a.iter_mut().zip(self.priors.row(i)) {
                *aj += wi * e;
            }
        }
        a
    }

    fn alpha_batch(&self, features: &Tensor) -> Tensor {
        let a = super::sdc::assignment_matrix(features, self.mode);
        a.matmul(false, &self.priors, false)
    }

    pub fn template_eval(&self, u: [f64; 3]) -> f64 {
        self.template.forward(&self.template_spec, &u)[0]
    }

    pub fn template_grad(&self, u: [f64; 3]) -> (f64, [f64; 3]) {
        let t = self.template.forward_dual(&self.template_spec, &Dual3::seed(u))[0];
        (t.value, t.dx)
    }

    pub fn deform(&self, x: [f64; 3], o: &[f64]) -> DeformOut {
        self.deformer.deform(x, &self.alpha(o))
    }

    pub fn eval(&self, x: [f64; 3], o: &[f64]) -> f64 {
        let d = self.deform(x, o);
        let u = [x[0] + d.delta_x[0], x[1] + d.delta_x[1], x[2] + d.delta_x[2]];
        self.template_eval(u) + d.delta_s
    }

    /// Value and spatial gradient (features held fixed).
    pub fn eval_grad(&self, x: [f64; 3], o: &[f64]) -> (f64, [f64; 3]) {
        let d = self.deformer.deform_dual(x, &self.alpha(o));
        let s = Dual3::seed(x);
        let u = [s[0] + d[0], s[1] + d[1], s[2] + d[2]];
        let t = self.template.forward_dual(&self.template_spec, &u)[0];
        let f = t + d[3];
        (f.value, f.dx)
    }

    /// Batched deformation: returns deformed points `x + Δx` and `Δs`.
    pub fn deform_points(&self, points: &[[f64; 3]], features: &Tensor) -> (Vec<[f64; 3]>, Vec<f64>) {
        let x = Tensor::from_rows(points);
        let out = self.deformer.deform_batch(&x, &self.alpha_batch(features));
        let mut u = Vec::with_capacity(points.len());
        let mut ds = Vec::with_capacity(points.len());
        for (r, p) in points.iter().enumerate() {
            let o = out.row(r);
            u.push([p[0] + o[0], p[1] + o[1], p[2] + o[2]]);
            ds.push(o[3]);
        }
        (u, ds)
    }

    /// Batched field values.
    pub fn eval_batch(&self, points: &[[f64; 3]], features: &Tensor) -> Vec<f64> {
        let (u, ds) = self.deform_points(points, features);
        let t = self.template.forward_batch(&self.template_spec, &Tensor::from_rows(&u));
        t.data().iter().zip(&ds).map(|(a, b)| a + b).collect()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn tiny_config() -> ModelConfig {
        ModelConfig {
            latent_dim: 4,
            prior_dim: 3,
            parts: 2,
            shapes: 3,
            template_width: 6,
            template_depth: 3,
            deform_width: 5,
            deform_depth: 3,
            hyper_hidden: 4,
            omega: 30.0,
            sdc: SdcMode::Soft,
            code_std: 0.3,
        }
    }

    fn zero_hyper(m: &Model, p: &mut ParamVector) {
        for head in &m.blocks.hyper.heads {
            for &(w, b) in &head.layers {
                p.block_mut(w).fill(0.0);
                p.block_mut(b).fill(0.0);
            }
        }
    }

    #[test]
    fn zero_deformation_reduces_to_template() {
        let m = Model::new(tiny_config()).unwrap();
        let mut p = m.init(1);
        zero_hyper(&m, &mut p);
        let f = m.shape_field(&p, m.code(&p, 0)).unwrap();
        for x in [[0.1, 0.2, 0.3], [-0.7, 0.4, 0.9]] {
            let d = f.deform(x, &[1.0, -1.0]);
            assert_eq!(d.delta_x, [0.0; 3]);
            assert_eq!(d.delta_s, 0.0);
            assert_eq!(f.eval(x, &[0.5, 0.0]), m.template_eval(&p, x));
        }
    }

    #[test]
    fn correction_only_shifts_field() {
        let m = Model::new(tiny_config()).unwrap();
        let mut p = m.init(2);
        zero_hyper(&m, &mut p);
        let (_, b) = *m.blocks.hyper.heads.last().unwrap().layers.last().unwrap();
        let last = m.deform.layers.last().unwrap();
        p.block_mut(b)[last.outputs * last.inputs + 3] = 0.25;
        let f = m.shape_field(&p, m.code(&p, 1)).unwrap();
        let x = [0.3, -0.1, 0.5];
        assert_eq!(f.eval(x, &[0.0, 1.0]), m.template_eval(&p, x) + 0.25);
    }

    #[test]
    fn spatial_gradient_matches_finite_differences() {
        let m = Model::new(tiny_config()).unwrap();
        let p = m.init(3);
        let f = m.shape_field(&p, m.code(&p, 2)).unwrap();
        let o = [0.4, -0.2];
        let x = [0.12, -0.33, 0.27];
        let (v, g) = f.eval_grad(x, &o);
        assert_eq!(v, f.eval(x, &o));
        let h = 1e-6;
        for j in 0..3 {
            let (mut xp, mut xm) = (x, x);
            xp[j] += h;
            xm[j] -= h;
            let fd = (f.eval(xp, &o) - f.eval(xm, &o)) / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1.0), "{fd} vs {}", g[j]);
        }
        let dd = f.deformer.deform_dual(x, &f.alpha(&o));
        for j in 0..3 {
            let (mut xp, mut xm) = (x, x);
            xp[j] += h;
            xm[j] -= h;
            let (a, b) = (f.deform(xp, &o), f.deform(xm, &o));
            for i in 0..3 {
                let fd = (a.delta_x[i] - b.delta_x[i]) / (2.0 * h);
                assert!((fd - dd[i].dx[j]).abs() <= 1e-5 * fd.abs().max(1.0));
            }
        }
    }

    #[test]
    fn deformation_is_continuous() {
        let m = Model::new(tiny_config()).unwrap();
        let p = m.init(4);
        let f = m.shape_field(&p, m.code(&p, 0)).unwrap();
        let x = [0.2, 0.2, -0.4];
        let a = f.deform(x, &[1.0, 0.0]);
        let mut prev = f64::INFINITY;
        for e in [1e-2, 1e-4, 1e-6, 1e-8] {
            let b = f.deform([x[0] + e, x[1], x[2]], &[1.0, 0.0]);
            let d = (0..3).map(|i| (a.delta_x[i] - b.delta_x[i]).abs()).sum::<f64>() + (a.delta_s - b.delta_s).abs();
            assert!(d <= prev);
            prev = d;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn tape_pass_matches_pointwise_evaluation() {
        let m = Model::new(tiny_config()).unwrap();
        let p = m.init(5);
        let pts = [[0.1, 0.2, 0.3], [-0.4, 0.5, 0.0], [0.8, -0.6, 0.1]];
        let feats = Tensor::from_vec(3, 2, vec![2.0, 0.0, -1.0, 1.0, 0.3, 0.3]);
        let assign = super::super::sdc::assignment_matrix(&feats, SdcMode::Soft);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&p);
        let latent = binder.var(&mut tape, m.blocks.latent);
        let code = tape.gather_rows(latent, vec![1]);
        let st = m.shape_tape(&mut tape, &mut binder, code, &Tensor::from_rows(&pts), &assign, 2);
        let f = m.shape_field(&p, m.code(&p, 1)).unwrap();
        let batch = f.eval_batch(&pts, &feats);
        for (r, x) in pts.iter().enumerate() {
            let o = feats.row(r);
            let (v, g) = f.eval_grad(*x, o);
            assert!((tape.value(st.field).get(r, 0) - v).abs() < 1e-12);
            assert!((batch[r] - v).abs() < 1e-12);
            for j in 0..3 {
                assert!((tape.value(st.field_grad).get(r, j) - g[j]).abs() < 1e-9);
            }
            if r < 2 {
                let d = f.deform(*x, o);
                let u = [0, 1, 2].map(|i| x[i] + d.delta_x[i]);
                let (_, tg) = f.template_grad(u);
                let tt = st.template_grad.unwrap();
                for j in 0..3 {
                    assert!((tape.value(tt).get(r, j) - tg[j]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn layout_mismatch_is_config_error() {
        let m = Model::new(tiny_config()).unwrap();
        let mut other = tiny_config();
        other.deform_width = 7;
        assert!(matches!(Model::with_layout(other, &m.layout), Err(Error::Config(_))));
        assert!(Model::with_layout(tiny_config(), &m.layout).is_ok());
        let mut bad = tiny_config();
        bad.parts = 1;
        assert!(matches!(Model::new(bad), Err(Error::Config(_))));
    }
}
