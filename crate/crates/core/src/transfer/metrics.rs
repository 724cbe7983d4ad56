//! Correspondence metrics: keypoint accuracy and part-label overlap.

use super::keypoints::KeypointSet;
use crate::error::{Error, Result};
use crate::geometry::kdtree::dist2;

/// Percentage of keypoints (over names present in both sets) whose
/// prediction lies within each threshold of the ground truth.
pub fn pck(predicted: &KeypointSet, truth: &KeypointSet, thresholds: &[f64]) -> Result<Vec<f64>> {
    let mut d = Vec::new();
    for (name, t) in truth.iter() {
        if let Some(p) = predicted.get(name) {
            d.push(dist2(p, t).sqrt());
        }
    }
    if d.is_empty() {
        return Err(Error::domain("no keypoint names in common"));
    }
    Ok(thresholds
        .iter()
        .map(|&tau| 100.0 * d.iter().filter(|&&x| x <= tau).count() as f64 / d.len() as f64)
        .collect())
}

/// Per-part intersection over union; `None` for parts absent from both.
pub fn part_iou(predicted: &[usize], truth: &[usize], k: usize) -> Result<Vec<Option<f64>>> {
    if predicted.len() != truth.len() {
        return Err(Error::config(format!("{} predicted labels for {} points", predicted.len(), truth.len())));
    }
    let mut inter = vec![0usize; k];
    let mut union = vec![0usize; k];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::domain(format!("label out of range 0..{k}")));
        }
        if p == t {
            inter[p] += 1;
            union[p] += 1;
        } else {
            union[p] += 1;
            union[t] += 1;
        }
    }
    Ok(inter
        .iter()
        .zip(&union)
        .map(|(&i, &u)| (u > 0).then(|| i as f64 / u as f64))
        .collect())
}

/// Mean of [`part_iou`] over parts present in either labeling.
pub fn miou(predicted: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    let ious: Vec<f64> = part_iou(predicted, truth, k)?.into_iter().flatten().collect();
    if ious.is_empty() {
        return Err(Error::domain("no labeled points"));
    }
    Ok(ious.iter().sum::<f64>() / ious.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(pts: &[[f64; 3]]) -> KeypointSet {
        KeypointSet::new(pts.iter().enumerate().map(|(i, p)| (format!("k{i}"), *p)).collect()).unwrap()
    }

    #[test]
    fn pck_examples() {
        let gt = set(&[[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert_eq!(pck(&gt, &gt, &[0.0, 0.05, 0.1]).unwrap(), vec![100.0; 3]);
        let pred = set(&[[0.01, 0.0, 0.0], [1.0, 0.02, 0.0], [0.0, 1.0, 0.03], [0.5, 0.0, 1.0]]);
        assert_eq!(pck(&pred, &gt, &[0.1]).unwrap(), vec![75.0]);
        assert_eq!(pck(&pred, &gt, &[f64::INFINITY]).unwrap(), vec![100.0]);
        let other = KeypointSet::new(vec![("x".into(), [0.0; 3])]).unwrap();
        assert!(matches!(pck(&other, &gt, &[0.1]), Err(Error::Domain(_))));
    }

    #[test]
    fn miou_examples() {
        assert_eq!(miou(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap(), 1.0);
        assert_eq!(miou(&[0, 0], &[1, 1], 2).unwrap(), 0.0);
        // part 0: one shared point, three in the union; part 1 appears only in truth
        let iou = part_iou(&[0, 0, 0], &[0, 1, 1], 3).unwrap();
        assert!((iou[0].unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(iou[1], Some(0.0));
        assert_eq!(iou[2], None);
        assert!(matches!(miou(&[0], &[0, 1], 2), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn pck_is_monotone(d in prop::collection::vec(0.0f64..0.3, 1..20), a in 0.0f64..0.3, b in 0.0f64..0.3) {
            let gt = set(&vec![[0.0; 3]; d.len()]);
            let pred = set(&d.iter().map(|&x| [x, 0.0, 0.0]).collect::<Vec<_>>());
            let (lo, hi) = (a.min(b), a.max(b));
            let v = pck(&pred, &gt, &[lo, hi]).unwrap();
            prop_assert!(v[0] <= v[1] && (0.0..=100.0).contains(&v[0]));
        }

        #[test]
        fn miou_invariant_under_relabeling(
            pairs in prop::collection::vec((0usize..4, 0usize..4), 1..50),
            perm in Just([2usize, 0, 3, 1]),
        ) {
            let p: Vec<usize> = pairs.iter().map(|x| x.0).collect();
            let t: Vec<usize> = pairs.iter().map(|x| x.1).collect();
            let pp: Vec<usize> = p.iter().map(|&l| perm[l]).collect();
            let tp: Vec<usize> = t.iter().map(|&l| perm[l]).collect();
            let a = miou(&p, &t, 4).unwrap();
            prop_assert!((a - miou(&pp, &tp, 4).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
