//! Signed-distance reconstruction objective.

use super::weights::ReconWeights;
use crate::error::{Error, Result};
use crate::geometry::sample::ShapeSample;

type P = [f64; 3];

/// The four reconstruction summands, each a mean over its point set.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReconTerms {
    /// `|F − s̄|` over surface and query points.
    pub sdf: f64,
    /// `1 − ⟨∇F/‖∇F‖, n̄⟩` over surface points.
    pub normal: f64,
    /// `|‖∇F‖ − 1|` over surface and query points.
    pub eikonal: f64,
    /// `exp(−δ|F|)` over query points.
    pub off_surface: f64,
}

impl ReconTerms {
    pub fn sum(&self) -> f64 {
        self.sdf + self.normal + self.eikonal + self.off_surface
    }

    pub fn weighted(&self, w: &ReconWeights) -> f64 {
        w.sdf * self.sdf + w.normal * self.normal + w.eikonal * self.eikonal + w.off_surface * self.off_surface
    }
}

fn mean(s: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Evaluate the summands for `field(x, o) = (F, ∇F)`, with `o` the
/// point's semantic feature.
pub fn recon_terms(shape: &ShapeSample, field: impl Fn(P, &[f64]) -> (f64, P), delta: f64) -> Result<ReconTerms> {
    if shape.normals.len() != shape.surface.len() {
        return Err(Error::config(format!(
            "reconstruction needs one normal per surface point ({} normals, {} points)",
            shape.normals.len(),
            shape.surface.len()
        )));
    }
    let (mut sdf, mut normal, mut eik, mut off) = (0.0, 0.0, 0.0, 0.0);
    for (r, (x, n)) in shape.surface.iter().zip(&shape.normals).enumerate() {
        let (f, g) = field(*x, shape.surface_features.row(r));
        sdf += f.abs();
        normal += 1.0 - cosine(g, *n);
        eik += (norm(g) - 1.0).abs();
    }
    for (r, (x, s)) in shape.query.iter().zip(&shape.sdf).enumerate() {
        let (f, g) = field(*x, shape.query_features.row(r));
        sdf += (f - s).abs();
        eik += (norm(g) - 1.0).abs();
        off += (-delta * f.abs()).exp();
    }
    let all = shape.surface.len() + shape.query.len();
    Ok(ReconTerms {
        sdf: mean(sdf, all),
        normal: mean(normal, shape.surface.len()),
        eikonal: mean(eik, all),
        off_surface: mean(off, shape.query.len()),
    })
}

fn norm(g: P) -> f64 {
    (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt()
}

/// Lower bound on a gradient norm in the normal-alignment terms.
pub const NORMAL_EPS: f64 = 1e-12;

/// `⟨g/‖g‖, n⟩`, with `‖g‖` floored at [`NORMAL_EPS`].
pub fn cosine(g: P, n: P) -> f64 {
    (g[0] * n[0] + g[1] * n[1] + g[2] * n[2]) / norm(g).max(NORMAL_EPS)
}

/// Weighted reconstruction loss.
pub fn recon_loss(
    shape: &ShapeSample,
    field: impl Fn(P, &[f64]) -> (f64, P),
    delta: f64,
    weights: &ReconWeights,
) -> Result<f64> {
    Ok(recon_terms(shape, field, delta)?.weighted(weights))
}
