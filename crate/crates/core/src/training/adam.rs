//! Bias-corrected Adam with optional lazy row updates.

use crate::autodiff::{BlockId, ParamVector};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr.is_finite()
            && self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps.is_finite()
            && self.eps > 0.0;
        if !ok {
            return Err(Error::config(format!("invalid optimizer settings {self:?}")));
        }
        Ok(())
    }
}

/// First and second moments in the parameter layout.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.m.iter().chain(&self.v).all(|x| x.is_finite())
    }

    fn update(&mut self, cfg: &AdamConfig, theta: &mut [f64], g: &[f64], offset: usize) {
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for (i, (p, &gi)) in theta.iter_mut().zip(g).enumerate() {
            let m = &mut self.m[offset + i];
            let v = &mut self.v[offset + i];
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gi;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gi * gi;
            let mh = *m / c1;
            let vh = *v / c2;
            *p -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
    }

    /// One step on a flat slice.
    pub fn step_slice(&mut self, cfg: &AdamConfig, theta: &mut [f64], grad: &[f64]) -> Result<()> {
        check(theta.len(), self.len(), grad)?;
        self.step += 1;
        self.update(cfg, theta, grad, 0);
        Ok(())
    }

    /// One step on a parameter vector. Rows of the `lazy` blocks whose
    /// gradient is exactly zero keep both their values and their moments.
    pub fn step(&mut self, cfg: &AdamConfig, params: &mut ParamVector, grads: &ParamVector, lazy: &[BlockId]) -> Result<()> {
        if params.layout() != grads.layout() {
            return Err(Error::config("gradient layout differs from parameter layout"));
        }
        check(params.len(), self.len(), grads.data())?;
        self.step += 1;
        let layout = params.layout().clone();
        for (b, spec) in layout.blocks().iter().enumerate() {
            let range = spec.range();
            let g = &grads.data()[range.clone()];
            if lazy.contains(&BlockId(b)) && spec.cols > 0 {
                for r in 0..spec.rows {
                    let rr = r * spec.cols..(r + 1) * spec.cols;
                    if g[rr.clone()].iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    let off = range.start + rr.start;
                    let theta = &mut params.data_mut()[off..off + spec.cols];
                    self.update(cfg, theta, &g[rr], off);
                }
            } else {
                let theta = &mut params.data_mut()[range.clone()];
                self.update(cfg, theta, g, range.start);
            }
        }
        Ok(())
    }
}

fn check(params: usize, state: usize, grad: &[f64]) -> Result<()> {
    if params != state || grad.len() != params {
        return Err(Error::config(format!(
            "optimizer sizes differ: {params} parameters, {state} moments, {} gradients",
            grad.len()
        )));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::numerical(format!("non-finite gradient at coordinate {i}")));
    }
    Ok(())
}

/// Rescale `g` in place so that its Euclidean norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_global_norm(g: &mut [f64], max_norm: f64) -> f64 {
    let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > max_norm && n.is_finite() {
        let s = max_norm / n;
        g.iter_mut().for_each(|x| *x *= s);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Layout;
    use std::sync::Arc;

    fn vector(data: Vec<f64>) -> ParamVector {
        let mut l = Layout::new();
        l.push("latent", 2, 2);
        l.push("w", 1, data.len() - 4);
        ParamVector::from_vec(Arc::new(l), data).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let cfg = AdamConfig::default();
        let mut p = vector(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let before = p.clone();
        let g = vector(vec![0.0; 5]);
        let mut s = AdamState::new(5);
        s.step(&cfg, &mut p, &g, &[]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_is_signed_learning_rate() {
        let cfg = AdamConfig {
            lr: 1e-2,
            ..AdamConfig::default()
        };
        let mut theta = vec![0.0, 0.0, 0.0];
        let g = [3.0, -0.5, 1e-3];
        let mut s = AdamState::new(3);
        s.step_slice(&cfg, &mut theta, &g).unwrap();
        for (t, gi) in theta.iter().zip(g) {
            let expect = -cfg.lr * gi / (gi.abs() + cfg.eps);
            assert!((t - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        let cfg = AdamConfig {
            lr: 1e-2,
            ..AdamConfig::default()
        };
        let mut theta = vec![0.6, -0.8];
        let mut s = AdamState::new(2);
        for _ in 0..500 {
            let g: Vec<f64> = theta.iter().map(|t| 2.0 * t).collect();
            s.step_slice(&cfg, &mut theta, &g).unwrap();
        }
        let n = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
        assert!(n < 1e-3, "{n}");
    }

    #[test]
    fn lazy_rows_without_gradient_are_untouched() {
        let cfg = AdamConfig::default();
        let mut p = vector(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let lazy = [BlockId(0)];
        let mut s = AdamState::new(5);
        s.step(&cfg, &mut p, &vector(vec![1.0, 1.0, 1.0, 1.0, 1.0]), &lazy).unwrap();
        let after_first = p.clone();
        s.step(&cfg, &mut p, &vector(vec![0.0, 0.0, 1.0, 0.5, 1.0]), &lazy).unwrap();
        assert_eq!(&p.data()[..2], &after_first.data()[..2]);
        assert_ne!(&p.data()[2..4], &after_first.data()[2..4]);
        let m1 = 1.0 - cfg.beta1;
        assert_eq!(&s.m[..2], &[m1, m1]);
    }

    #[test]
    fn non_finite_gradient_aborts_without_change() {
        let cfg = AdamConfig::default();
        let mut p = vector(vec![1.0; 5]);
        let before = p.clone();
        let mut s = AdamState::new(5);
        let err = s.step(&cfg, &mut p, &vector(vec![0.0, f64::NAN, 0.0, 0.0, 0.0]), &[]);
        assert!(matches!(err, Err(Error::Numerical(_))));
        assert_eq!(p, before);
        assert_eq!(s.step, 0);
    }

    #[test]
    fn clipping() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_global_norm(&mut g, 10.0), 5.0);
        assert_eq!(g, vec![3.0, 4.0]);
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
    }
}
