//! Regularizers on the deformation field, the embeddings, and the
//! correspondence uncertainty.

use crate::autodiff::Dual3;
use crate::geometry::sample::ShapeSample;

type P = [f64; 3];

/// Deformation outputs `(Δx₀, Δx₁, Δx₂, Δs)` with spatial derivatives.
pub type DeformJet = [Dual3; 4];

fn mean(s: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Mean over query points of `‖∂Δx/∂x‖_F²`.
pub fn smooth_loss(shape: &ShapeSample, deform: impl Fn(P, &[f64]) -> DeformJet) -> f64 {
    let mut s = 0.0;
    for (r, &x) in shape.query.iter().enumerate() {
        let d = deform(x, shape.query_features.row(r));
        for c in &d[..3] {
            s += c.dx.iter().map(|v| v * v).sum::<f64>();
        }
    }
    mean(s, shape.query.len())
}

/// Mean over surface points of `1 − ⟨∇T/‖∇T‖, n̄⟩` at `x + Δx`, the
/// template gradient taken in template coordinates.
pub fn normal_loss(
    shape: &ShapeSample,
    deform: impl Fn(P, &[f64]) -> DeformJet,
    template_grad: impl Fn(P) -> P,
) -> f64 {
    let mut s = 0.0;
    for (r, (&x, n)) in shape.surface.iter().zip(&shape.normals).enumerate() {
        let d = deform(x, shape.surface_features.row(r));
        let g = template_grad([x[0] + d[0].value, x[1] + d[1].value, x[2] + d[2].value]);
        s += 1.0 - super::recon::cosine(g, *n);
    }
    mean(s, shape.surface.len())
}

/// Mean `|Δs|` over query points.
pub fn correction_loss(shape: &ShapeSample, deform: impl Fn(P, &[f64]) -> DeformJet) -> f64 {
    let s: f64 = shape
        .query
        .iter()
        .enumerate()
        .map(|(r, &x)| deform(x, shape.query_features.row(r))[3].value.abs())
        .sum();
    mean(s, shape.query.len())
}

/// `Σ‖zᵢ‖² + Σ‖eⱼ‖²`.
pub fn emb_loss<'a>(codes: impl IntoIterator<Item = &'a [f64]>, priors: impl IntoIterator<Item = &'a [f64]>) -> f64 {
    codes
        .into_iter()
        .chain(priors)
        .map(|v| v.iter().map(|x| x * x).sum::<f64>())
        .sum()
}

/// `1 − exp(−γ‖(p + Δp) − (q + Δq)‖²)`.
pub fn uncertainty(p: P, dp: P, q: P, dq: P, gamma: f64) -> f64 {
    let d2: f64 = (0..3).map(|j| (p[j] + dp[j] - q[j] - dq[j]).powi(2)).sum();
    1.0 - (-gamma * d2).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shape(n: usize, seed: u64) -> ShapeSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = || -> Vec<P> { (0..n).map(|_| [0; 3].map(|_| rng.random_range(-1.0..1.0))).collect() };
        let surface = pts();
        let query = pts();
        ShapeSample {
            parts: 2,
            normals: surface.iter().map(|_| [0.0, 0.0, 1.0]).collect(),
            surface_features: Tensor::filled(n, 2, 1.0),
            labels: None,
            sdf: vec![0.1; n],
            query_features: Tensor::filled(n, 2, 1.0),
            surface,
            query,
        }
    }

    fn zero(_: P, _: &[f64]) -> DeformJet {
        [Dual3::constant(0.0); 4]
    }

    #[test]
    fn zero_deformation_examples() {
        let s = shape(30, 1);
        assert_eq!(smooth_loss(&s, zero), 0.0);
        assert_eq!(correction_loss(&s, zero), 0.0);
        assert_eq!(normal_loss(&s, zero, |_| [0.0, 0.0, 1.0]), 0.0);
        assert_eq!(normal_loss(&s, zero, |_| [0.0, 0.0, -1.0]), 2.0);
    }

    #[test]
    fn linear_deformation_gives_frobenius_norm() {
        let a = [[0.5, -1.0, 2.0], [0.0, 3.0, 0.25], [1.5, 0.0, -0.5]];
        let lin = |x: P, _: &[f64]| -> DeformJet {
            let s = Dual3::seed(x);
            let row = |i: usize| s[0].scale(a[i][0]) + s[1].scale(a[i][1]) + s[2].scale(a[i][2]);
            [row(0), row(1), row(2), Dual3::constant(0.0)]
        };
        let fro: f64 = a.iter().flatten().map(|v| v * v).sum();
        assert!((smooth_loss(&shape(20, 2), lin) - fro).abs() < 1e-12);
    }

    #[test]
    fn smooth_matches_finite_difference_jacobian() {
        let f = |x: P| -> [f64; 3] { [x[0].sin() * x[1], (x[1] * x[2]).cos(), x[0] * x[0] - x[2]] };
        let jet = |x: P, _: &[f64]| -> DeformJet {
            let s = Dual3::seed(x);
            [(s[0].sin()) * s[1], (s[1] * s[2]).cos(), s[0] * s[0] - s[2], Dual3::constant(0.0)]
        };
        let s = shape(25, 3);
        let h = 1e-6;
        let mut fd = 0.0;
        for &x in &s.query {
            for j in 0..3 {
                let (mut xp, mut xm) = (x, x);
                xp[j] += h;
                xm[j] -= h;
                let (a, b) = (f(xp), f(xm));
                fd += (0..3).map(|i| ((a[i] - b[i]) / (2.0 * h)).powi(2)).sum::<f64>();
            }
        }
        fd /= s.query.len() as f64;
        let ad = smooth_loss(&s, jet);
        assert!((fd - ad).abs() <= 1e-5 * ad.abs().max(1.0), "{fd} vs {ad}");
    }

    #[test]
    fn correction_examples() {
        let s = shape(10, 4);
        let c = |_: P, _: &[f64]| -> DeformJet { [Dual3::constant(0.0), Dual3::constant(0.0), Dual3::constant(0.0), Dual3::constant(-0.3)] };
        assert!((correction_loss(&s, c) - 0.3).abs() < 1e-15);
        let v = |x: P, _: &[f64]| -> DeformJet { [Dual3::constant(0.0), Dual3::constant(0.0), Dual3::constant(0.0), Dual3::constant(x[0])] };
        let direct = s.query.iter().map(|x| x[0].abs()).sum::<f64>() / 10.0;
        assert_eq!(correction_loss(&s, v), direct);
    }

    #[test]
    fn emb_examples() {
        let z = [vec![0.0; 4], vec![3.0, 4.0, 0.0, 0.0]];
        let e = [vec![0.0; 2]];
        assert_eq!(emb_loss(z[..1].iter().map(|v| v.as_slice()), e.iter().map(|v| v.as_slice())), 0.0);
        assert_eq!(emb_loss(z.iter().map(|v| v.as_slice()), e.iter().map(|v| v.as_slice())), 25.0);
    }

    #[test]
    fn uncertainty_examples() {
        let p = [0.1, 0.2, 0.3];
        assert_eq!(uncertainty(p, [0.0; 3], p, [0.0; 3], 10.0), 0.0);
        assert_eq!(uncertainty(p, [0.0; 3], [1.0, 2.0, 3.0], [0.0; 3], 0.0), 0.0);
        let q = [p[0] + 2f64.ln().sqrt(), p[1], p[2]];
        assert!((uncertainty(p, [0.0; 3], q, [0.0; 3], 1.0) - 0.5).abs() < 1e-15);
        let u = uncertainty(p, [0.5; 3], q, [-0.2; 3], 3.0);
        assert!((0.0..1.0).contains(&u));
    }
}
