//! Semantic-aware deformation codes: per-point mixtures of the learned part
//! deformation priors.

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// How a semantic feature selects part priors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SdcMode {
    /// Softmax-weighted combination of all priors.
    #[default]
    Soft,
    /// The single prior of the arg-max part.
    Hard,
}

impl std::str::FromStr for SdcMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft" => Ok(Self::Soft),
            "hard" => Ok(Self::Hard),
            _ => Err(Error::config(format!("unknown sdc mode {s:?} (soft|hard)"))),
        }
    }
}

impl std::fmt::Display for SdcMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Soft => "soft",
            Self::Hard => "hard",
        })
    }
}

/// Numerically stable softmax.
pub fn softmax(o: &[f64]) -> Vec<f64> {
    let m = o.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = o.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(o: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in o.iter().enumerate().skip(1) {
        if v > o[best] {
            best = i;
        }
    }
    best
}

/// Mixing weights over the k parts.
pub fn assignment(o: &[f64], mode: SdcMode) -> Vec<f64> {
    match mode {
        SdcMode::Soft => softmax(o),
        SdcMode::Hard => {
            let mut w = vec![0.0; o.len()];
            if !o.is_empty() {
                w[argmax(o)] = 1.0;
            }
            w
        }
    }
}

fn combine(weights: &[f64], priors: &Tensor) -> Result<Vec<f64>> {
    if weights.len() != priors.rows() {
        return Err(Error::config(format!(
            "semantic feature has {} parts, priors have {}",
            weights.len(),
            priors.rows()
        )));
    }
    let mut alpha = vec![0.0; priors.cols()];
    for (i, w) in weights.iter().enumerate() {
        for (a, e) in alpha.iter_mut().zip(priors.row(i)) {
            *a += w * e;
        }
    }
    Ok(alpha)
}

/// `Σᵢ softmax(o)ᵢ · eᵢ` with priors stored as k×d′ rows.
pub fn sdc_soft(o: &[f64], priors: &Tensor) -> Result<Vec<f64>> {
    combine(&softmax(o), priors)
}

/// `e_{argmax o}`.
pub fn sdc_hard(o: &[f64], priors: &Tensor) -> Result<Vec<f64>> {
    if o.len() != priors.rows() {
        return combine(o, priors);
    }
    Ok(priors.row(argmax(o)).to_vec())
}

pub fn sdc(o: &[f64], priors: &Tensor, mode: SdcMode) -> Result<Vec<f64>> {
    match mode {
        SdcMode::Soft => sdc_soft(o, priors),
        SdcMode::Hard => sdc_hard(o, priors),
    }
}

/// n×k assignment matrix for a batch of features (n×k).
pub fn assignment_matrix(features: &Tensor, mode: SdcMode) -> Tensor {
    let mut out = Tensor::zeros(features.rows(), features.cols());
    for r in 0..features.rows() {
        let w = assignment(features.row(r), mode);
        out.row_mut(r).copy_from_slice(&w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn priors(rows: &[&[f64]]) -> Tensor {
        let cols = rows[0].len();
        Tensor::from_vec(rows.len(), cols, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    #[test]
    fn uniform_features_average_priors() {
        let e = priors(&[&[1.0, 4.0], &[3.0, -2.0]]);
        assert_eq!(sdc_soft(&[0.0, 0.0], &e).unwrap(), vec![2.0, 1.0]);
    }

    #[test]
    fn log_two_feature_gives_half_quarter_quarter() {
        let w = softmax(&[2f64.ln(), 0.0, 0.0]);
        for (a, b) in w.iter().zip([0.5, 0.25, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_softmax_selects_first_prior() {
        let e = priors(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let a = sdc_soft(&[10.0, -10.0], &e).unwrap();
        // softmax weight of the second part is 1/(1+e^20)
        let w2 = 1.0 / (1.0 + 20f64.exp());
        assert!((a[0] - (1.0 - w2)).abs() < 1e-15);
        assert!((a[0] - 1.0).abs() < 1e-8 && a[1].abs() < 1e-8);
    }

    #[test]
    fn hard_assignment_examples() {
        let e = priors(&[&[7.0, 7.0], &[1.0, 2.0]]);
        assert_eq!(sdc_hard(&[3.0, 1.0], &e).unwrap(), vec![7.0, 7.0]);
        assert_eq!(sdc_hard(&[1.0, 1.0], &e).unwrap(), vec![7.0, 7.0]);
        let e3 = priors(&[&[1.0], &[2.0], &[3.0]]);
        assert_eq!(sdc_hard(&[0.1, 0.9, 0.5], &e3).unwrap(), vec![2.0]);
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let e = priors(&[&[1.0], &[2.0]]);
        assert!(matches!(sdc_soft(&[0.0, 0.0, 0.0], &e), Err(Error::Config(_))));
        assert!(matches!(sdc_hard(&[0.0], &e), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(o in prop::collection::vec(-50.0f64..50.0, 2..9)) {
            let s: f64 = softmax(&o).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn softmax_is_shift_invariant(o in prop::collection::vec(-20.0f64..20.0, 2..9), c in -100.0f64..100.0) {
            let a = softmax(&o);
            let shifted: Vec<f64> = o.iter().map(|v| v + c).collect();
            let b = softmax(&shifted);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn sharpened_soft_approaches_hard(
            o in prop::collection::vec(-1.0f64..1.0, 2..6),
            e in prop::collection::vec(-2.0f64..2.0, 12),
        ) {
            let k = o.len();
            let i = argmax(&o);
            let gap = o.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| o[i] - v).fold(f64::INFINITY, f64::min);
            // the limit only holds for clearly separated maxima
            prop_assume!(gap > 0.02);
            let pri = Tensor::from_vec(k, 2, e[..2 * k].to_vec());
            let beta = 1e3;
            let sharp: Vec<f64> = o.iter().map(|v| v * beta).collect();
            let soft = sdc_soft(&sharp, &pri).unwrap();
            let hard = sdc_hard(&o, &pri).unwrap();
            let emax = pri.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let dist = soft.iter().zip(&hard).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(dist <= 1e-6 * emax.max(1e-300));
        }
    }
}
