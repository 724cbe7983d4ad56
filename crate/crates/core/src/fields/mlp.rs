//! Multilayer perceptrons with sine, ReLU or linear layers, evaluated three
//! ways: plain `f64`, forward-mode [`Dual3`], and on a [`Tape`].

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::autodiff::dual::unit_seed;
use crate::autodiff::{BlockId, Dual3, DualVar, Layout, ParamVector, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    /// `sin(omega · (W x + b))`
    Sine { omega: f64 },
    Relu,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl LayerSpec {
    /// Weight entries plus bias entries.
    pub fn param_count(&self) -> usize {
        self.outputs * self.inputs + self.outputs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    pub layers: Vec<LayerSpec>,
}

impl MlpSpec {
    /// `depth` linear layers: all sine except a linear output layer.
    pub fn siren(inputs: usize, width: usize, depth: usize, outputs: usize, omega: f64) -> Self {
        Self::stack(inputs, width, depth, outputs, Activation::Sine { omega })
    }

    /// `depth` linear layers: ReLU hidden layers and a linear output layer.
    pub fn relu(inputs: usize, width: usize, depth: usize, outputs: usize) -> Self {
        Self::stack(inputs, width, depth, outputs, Activation::Relu)
    }

    fn stack(inputs: usize, width: usize, depth: usize, outputs: usize, hidden: Activation) -> Self {
        assert!(depth >= 1, "an MLP needs at least one layer");
        let mut layers = Vec::with_capacity(depth);
        let mut fan_in = inputs;
        for l in 0..depth {
            let last = l + 1 == depth;
            let out = if last { outputs } else { width };
            layers.push(LayerSpec {
                inputs: fan_in,
                outputs: out,
                activation: if last { Activation::Linear } else { hidden },
            });
            fan_in = out;
        }
        Self { layers }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("MLP has no layers"));
        }
        for w in self.layers.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(Error::config(format!(
                    "layer widths do not chain: {} outputs feed {} inputs",
                    w[0].outputs, w[1].inputs
                )));
            }
        }
        Ok(())
    }

    /// Append `{prefix}w{l}` / `{prefix}b{l}` blocks for every layer.
    pub fn register(&self, layout: &mut Layout, prefix: &str) -> MlpBlocks {
        MlpBlocks {
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(l, s)| {
                    let w = layout.push(format!("{prefix}w{l}"), s.outputs, s.inputs);
                    let b = layout.push(format!("{prefix}b{l}"), 1, s.outputs);
                    (w, b)
                })
                .collect(),
        }
    }

    /// Standalone layout for this net with unprefixed block names.
    pub fn layout(&self) -> Arc<Layout> {
        let mut l = Layout::new();
        self.register(&mut l, "");
        Arc::new(l)
    }
}

/// Block ids of one net inside a larger parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpBlocks {
    pub layers: Vec<(BlockId, BlockId)>,
}

impl MlpBlocks {
    /// Look up `w{l}`/`b{l}` blocks by name and check their shapes.
    pub fn find(spec: &MlpSpec, layout: &Layout, prefix: &str) -> Result<Self> {
        let mut layers = Vec::with_capacity(spec.depth());
        for (l, s) in spec.layers.iter().enumerate() {
            let get = |name: String, rows: usize, cols: usize| -> Result<BlockId> {
                let id = layout
                    .find(&name)
                    .ok_or_else(|| Error::config(format!("missing parameter block {name}")))?;
                let b = layout.block(id);
                if (b.rows, b.cols) != (rows, cols) {
                    return Err(Error::config(format!(
                        "block {name} is {}x{}, net expects {rows}x{cols}",
                        b.rows, b.cols
                    )));
                }
                Ok(id)
            };
            layers.push((
                get(format!("{prefix}w{l}"), s.outputs, s.inputs)?,
                get(format!("{prefix}b{l}"), 1, s.outputs)?,
            ));
        }
        Ok(Self { layers })
    }

    pub fn bind(&self, tape: &mut Tape, binder: &mut crate::autodiff::Binder<'_>) -> Vec<(Var, Var)> {
        self.layers
            .iter()
            .map(|&(w, b)| (binder.var(tape, w), binder.var(tape, b)))
            .collect()
    }
}

/// Concrete weights: `(W out×in, b 1×out)` per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpWeights {
    pub layers: Vec<(Tensor, Tensor)>,
}

fn act(a: Activation, y: f64) -> f64 {
    match a {
        Activation::Sine { omega } => (omega * y).sin(),
        Activation::Relu => y.max(0.0),
        Activation::Linear => y,
    }
}

fn act_dual(a: Activation, y: Dual3) -> Dual3 {
    match a {
        Activation::Sine { omega } => y.scale(omega).sin(),
        Activation::Relu => y.relu(),
        Activation::Linear => y,
    }
}

impl MlpWeights {
    pub fn from_params(spec: &MlpSpec, params: &ParamVector, blocks: &MlpBlocks) -> Self {
        let _ = spec;
        Self {
            layers: blocks
                .layers
                .iter()
                .map(|&(w, b)| (params.tensor(w), params.tensor(b)))
                .collect(),
        }
    }

    pub fn zeros(spec: &MlpSpec) -> Self {
        Self {
            layers: spec
                .layers
                .iter()
                .map(|s| (Tensor::zeros(s.outputs, s.inputs), Tensor::zeros(1, s.outputs)))
                .collect(),
        }
    }

    /// Sinusoidal-network initialization for sine stacks; He-uniform for
    /// ReLU stacks. Biases use `U[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Self {
        let omega = spec.layers.iter().find_map(|l| match l.activation {
            Activation::Sine { omega } => Some(omega),
            _ => None,
        });
        let layers = spec
            .layers
            .iter()
            .enumerate()
            .map(|(l, s)| {
                let fan_in = s.inputs.max(1) as f64;
                let bound = match (omega, l) {
                    (Some(_), 0) => 1.0 / fan_in,
                    (Some(w0), _) => 6f64.sqrt() / (w0 * fan_in.sqrt()),
                    (None, _) => (6.0 / fan_in).sqrt(),
                };
                let wd = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                let bb = 1.0 / fan_in.sqrt();
                let bd = Uniform::new_inclusive(-bb, bb).expect("finite bound");
                let w = (0..s.outputs * s.inputs).map(|_| wd.sample(rng)).collect();
                let b = (0..s.outputs).map(|_| bd.sample(rng)).collect();
                (Tensor::from_vec(s.outputs, s.inputs, w), Tensor::from_vec(1, s.outputs, b))
            })
            .collect();
        Self { layers }
    }

    /// Write into the blocks of a parameter vector.
    pub fn store(&self, params: &mut ParamVector, blocks: &MlpBlocks) {
        for ((w, b), &(wi, bi)) in self.layers.iter().zip(&blocks.layers) {
            params.block_mut(wi).copy_from_slice(w.data());
            params.block_mut(bi).copy_from_slice(b.data());
        }
    }

    pub fn forward(&self, spec: &MlpSpec, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for ((w, b), s) in self.layers.iter().zip(&spec.layers) {
            let mut out = Vec::with_capacity(s.outputs);
            for o in 0..s.outputs {
                let row = w.row(o);
                let mut acc = b.data()[o];
                for (wi, hi) in row.iter().zip(&h) {
                    acc += wi * hi;
                }
                out.push(act(s.activation, acc));
            }
            h = out;
        }
        h
    }

    pub fn forward_dual(&self, spec: &MlpSpec, x: &[Dual3]) -> Vec<Dual3> {
        let mut h = x.to_vec();
        for ((w, b), s) in self.layers.iter().zip(&spec.layers) {
            let mut out = Vec::with_capacity(s.outputs);
            for o in 0..s.outputs {
                let row = w.row(o);
                let mut acc = Dual3::constant(b.data()[o]);
                for (&wi, hi) in row.iter().zip(&h) {
                    acc = acc + *hi * wi;
                }
                out.push(act_dual(s.activation, acc));
            }
            h = out;
        }
        h
    }

    /// Row-batched value pass: `x` is n×inputs.
    pub fn forward_batch(&self, spec: &MlpSpec, x: &Tensor) -> Tensor {
        let mut h = x.clone();
        for ((w, b), s) in self.layers.iter().zip(&spec.layers) {
            let mut y = h.matmul(false, w, true);
            let bias = b.data();
            for r in 0..y.rows() {
                for (v, bb) in y.row_mut(r).iter_mut().zip(bias) {
                    *v = act(s.activation, *v + bb);
                }
            }
            h = y;
        }
        h
    }
}

/// Spatial derivative of a net in terms of the given parameter vector.
///
/// The net's blocks are looked up as `w{l}`/`b{l}`; the input is the point
/// itself, so the net must take exactly three inputs.
pub fn forward_dual(spec: &MlpSpec, params: &ParamVector, x: [f64; 3]) -> Result<Vec<Dual3>> {
    spec.validate()?;
    if spec.inputs() != 3 {
        return Err(Error::config(format!(
            "spatial net must take 3 inputs, got {}",
            spec.inputs()
        )));
    }
    let blocks = MlpBlocks::find(spec, params.layout(), "")?;
    let w = MlpWeights::from_params(spec, params, &blocks);
    Ok(w.forward_dual(spec, &Dual3::seed(x)))
}

/// Tangent seeds entering the first layer of a tape pass.
#[derive(Clone, Copy, Debug)]
pub enum Seeds {
    /// Input column `j` is coordinate `j` (j < 3); other columns are constant.
    Unit,
    /// Explicit n×inputs tangent nodes.
    Given([Var; 3]),
}

/// Result of a tape pass with tangents: the output dual and, per layer, the
/// elementwise slope of the activation (None for linear layers).
pub struct DualPass {
    pub output: DualVar,
    pub slopes: Vec<Option<Var>>,
}

fn tape_linear_value(tape: &mut Tape, h: Var, w: Var, b: Var) -> Var {
    let y = tape.matmul_t(h, false, w, true);
    tape.add_row(y, b)
}

fn first_layer_tangents(tape: &mut Tape, seeds: Seeds, w: Var, n: usize, inputs: usize) -> [Var; 3] {
    match seeds {
        Seeds::Unit => [0, 1, 2].map(|j| {
            let e = tape.constant(unit_seed(1, inputs, j));
            let row = tape.matmul_t(e, false, w, true);
            tape.repeat_rows(row, n)
        }),
        Seeds::Given(t) => t.map(|tj| tape.matmul_t(tj, false, w, true)),
    }
}

/// Value-only tape pass; `x` is n×inputs.
pub fn forward_tape(spec: &MlpSpec, tape: &mut Tape, layers: &[(Var, Var)], x: Var) -> Var {
    let mut h = x;
    for (s, &(w, b)) in spec.layers.iter().zip(layers) {
        let y = tape_linear_value(tape, h, w, b);
        h = match s.activation {
            Activation::Sine { omega } => {
                let a = tape.scale(y, omega);
                tape.sin(a)
            }
            Activation::Relu => tape.relu(y),
            Activation::Linear => y,
        };
    }
    h
}

/// Tape pass carrying spatial tangents; `x` is n×inputs.
pub fn forward_dual_tape(
    spec: &MlpSpec,
    tape: &mut Tape,
    layers: &[(Var, Var)],
    x: Var,
    seeds: Seeds,
) -> DualPass {
    let n = tape.value(x).rows();
    let mut value = x;
    let mut tangents: Option<[Var; 3]> = None;
    let mut slopes = Vec::with_capacity(spec.depth());
    for (s, &(w, b)) in spec.layers.iter().zip(layers) {
        let y = tape_linear_value(tape, value, w, b);
        let ty = match tangents {
            None => first_layer_tangents(tape, seeds, w, n, s.inputs),
            Some(t) => t.map(|tj| tape.matmul_t(tj, false, w, true)),
        };
        match s.activation {
            Activation::Sine { omega } => {
                let a = tape.scale(y, omega);
                value = tape.sin(a);
                let c = tape.cos(a);
                let slope = tape.scale(c, omega);
                tangents = Some(ty.map(|tj| tape.mul(slope, tj)));
                slopes.push(Some(slope));
            }
            Activation::Relu => {
                value = tape.relu(y);
                let mask = tape.value(y).map(|v| if v > 0.0 { 1.0 } else { 0.0 });
                let slope = tape.constant(mask);
                tangents = Some(ty.map(|tj| tape.mul(slope, tj)));
                slopes.push(Some(slope));
            }
            Activation::Linear => {
                value = y;
                tangents = Some(ty);
                slopes.push(None);
            }
        }
    }
    DualPass {
        output: DualVar {
            value,
            tangents: tangents.expect("validated nets have a layer"),
        },
        slopes,
    }
}

/// Re-run only the tangent recursion of an earlier pass on a row range,
/// with new seeds. Reuses the recorded activation slopes.
pub fn retangent_rows(
    spec: &MlpSpec,
    tape: &mut Tape,
    layers: &[(Var, Var)],
    pass: &DualPass,
    start: usize,
    len: usize,
    seeds: Seeds,
) -> [Var; 3] {
    let mut tangents: Option<[Var; 3]> = None;
    for ((s, &(w, _)), slope) in spec.layers.iter().zip(layers).zip(&pass.slopes) {
        let ty = match tangents {
            None => first_layer_tangents(tape, seeds, w, len, s.inputs),
            Some(t) => t.map(|tj| tape.matmul_t(tj, false, w, true)),
        };
        tangents = Some(match slope {
            Some(sl) => {
                let sl = tape.slice_rows(*sl, start, len);
                ty.map(|tj| tape.mul(sl, tj))
            }
            None => ty,
        });
    }
    tangents.expect("validated nets have a layer")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Binder;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_net_has_identity_jacobian() {
        let spec = MlpSpec {
            layers: vec![LayerSpec {
                inputs: 3,
                outputs: 3,
                activation: Activation::Linear,
            }],
        };
        let mut p = ParamVector::zeros(spec.layout());
        let w = p.layout().find("w0").unwrap();
        for i in 0..3 {
            p.block_mut(w)[i * 3 + i] = 1.0;
        }
        let out = forward_dual(&spec, &p, [1.0, 2.0, 3.0]).unwrap();
        for (i, o) in out.iter().enumerate() {
            assert_eq!(o.value, (i + 1) as f64);
            let mut e = [0.0; 3];
            e[i] = 1.0;
            assert_eq!(o.dx, e);
        }
    }

    #[test]
    fn sine_with_zero_weight_has_zero_slope() {
        let spec = MlpSpec {
            layers: vec![LayerSpec {
                inputs: 3,
                outputs: 1,
                activation: Activation::Sine { omega: 1.0 },
            }],
        };
        let p = ParamVector::zeros(spec.layout());
        let out = forward_dual(&spec, &p, [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(out[0].dx[0], 0.0);
    }

    #[test]
    fn mismatched_layout_is_config_error() {
        let spec = MlpSpec::siren(3, 4, 2, 1, 30.0);
        let other = MlpSpec::siren(3, 5, 2, 1, 30.0);
        let p = ParamVector::zeros(other.layout());
        assert!(matches!(forward_dual(&spec, &p, [0.0; 3]), Err(Error::Config(_))));
        let bad = MlpSpec::siren(4, 4, 2, 1, 30.0);
        let p = ParamVector::zeros(bad.layout());
        assert!(matches!(forward_dual(&bad, &p, [0.0; 3]), Err(Error::Config(_))));
    }

    #[test]
    fn random_sine_net_jacobian_matches_central_differences() {
        let spec = MlpSpec::siren(3, 4, 2, 2, 30.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = MlpWeights::init(&spec, &mut rng);
        let x = [0.21, -0.4, 0.13];
        let d = w.forward_dual(&spec, &Dual3::seed(x));
        let h = 1e-6;
        for axis in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[axis] += h;
            xm[axis] -= h;
            let fp = w.forward(&spec, &xp);
            let fm = w.forward(&spec, &xm);
            for o in 0..2 {
                let fd = (fp[o] - fm[o]) / (2.0 * h);
                let ad = d[o].dx[axis];
                assert!((fd - ad).abs() <= 1e-6 * ad.abs().max(1.0), "{fd} vs {ad}");
            }
        }
    }

    #[test]
    fn tape_pass_matches_dual3_pass() {
        let spec = MlpSpec::siren(3, 6, 3, 2, 30.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = MlpWeights::init(&spec, &mut rng);
        let mut p = ParamVector::zeros(spec.layout());
        let blocks = MlpBlocks::find(&spec, p.layout(), "").unwrap();
        w.store(&mut p, &blocks);
        let pts = [[0.1, 0.2, -0.3], [-0.5, 0.05, 0.7]];
        let mut tape = Tape::new();
        let mut binder = Binder::new(&p);
        let layers = blocks.bind(&mut tape, &mut binder);
        let x = tape.constant(Tensor::from_rows(&pts));
        let pass = forward_dual_tape(&spec, &mut tape, &layers, x, Seeds::Unit);
        let redo = retangent_rows(&spec, &mut tape, &layers, &pass, 1, 1, Seeds::Unit);
        for (r, pt) in pts.iter().enumerate() {
            let d = w.forward_dual(&spec, &Dual3::seed(*pt));
            for o in 0..2 {
                assert!((tape.value(pass.output.value).get(r, o) - d[o].value).abs() < 1e-12);
                for j in 0..3 {
                    let t = tape.value(pass.output.tangents[j]).get(r, o);
                    assert!((t - d[o].dx[j]).abs() < 1e-10);
                    if r == 1 {
                        assert!((tape.value(redo[j]).get(0, o) - d[o].dx[j]).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_weights_with_bias_is_constant() {
        let spec = MlpSpec::siren(3, 4, 5, 1, 30.0);
        let mut w = MlpWeights::zeros(&spec);
        w.layers[4].1 = Tensor::scalar(0.75);
        for x in [[0.0, 0.0, 0.0], [0.3, -0.9, 0.5]] {
            assert_eq!(w.forward(&spec, &x), vec![0.75]);
        }
    }
}
