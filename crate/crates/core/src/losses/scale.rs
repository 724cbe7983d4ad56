//! Global scaling factor of a deformation and the penalty on its drift.

use crate::error::{Error, Result};

type P = [f64; 3];

/// Least-squares scale `r` minimizing `Σ‖x + Δx − r x‖²`:
/// `r = Σ xᵀ(x + Δx) / Σ xᵀx`.
pub fn closed_form_r(points: &[(P, P)]) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, d) in points {
        for j in 0..3 {
            num += x[j] * (x[j] + d[j]);
            den += x[j] * x[j];
        }
    }
    if den <= 0.0 {
        return Err(Error::domain("scale factor undefined: all points at the origin"));
    }
    Ok(num / den)
}

/// The objective `closed_form_r` minimizes.
pub fn scale_residual(points: &[(P, P)], r: f64) -> f64 {
    points
        .iter()
        .map(|(x, d)| (0..3).map(|j| (x[j] + d[j] - r * x[j]).powi(2)).sum::<f64>())
        .sum()
}

/// `|mean_s r_s − 1|` over the shapes of a batch.
pub fn scale_loss(shapes: &[Vec<(P, P)>]) -> Result<f64> {
    Ok((mean_scale(shapes)? - 1.0).abs())
}

/// Mean of the per-shape scale factors.
pub fn mean_scale(shapes: &[Vec<(P, P)>]) -> Result<f64> {
    if shapes.is_empty() {
        return Err(Error::domain("scale factor of an empty batch"));
    }
    let mut s = 0.0;
    for shape in shapes {
        s += closed_form_r(shape)?;
    }
    Ok(s / shapes.len() as f64)
}
