//! Attribute transfer by distance-weighted k-nearest-neighbor voting in the
//! template space.

use crate::error::{Error, Result};
use crate::geometry::kdtree::KdTree;

type P = [f64; 3];

/// Guard added to squared distances in the vote weights.
pub const WEIGHT_EPS: f64 = 1e-12;

/// Per-point attributes carried through a transfer.
#[derive(Clone, Debug, PartialEq)]
pub enum Attributes {
    /// Categorical labels in `0..k`.
    Labels { k: usize, values: Vec<usize> },
    /// Real vectors of a fixed width (colors, offsets).
    Continuous { dim: usize, values: Vec<Vec<f64>> },
}

impl Attributes {
    pub fn len(&self) -> usize {
        match self {
            Self::Labels { values, .. } => values.len(),
            Self::Continuous { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Labels { k, values } => {
                if let Some(v) = values.iter().find(|&&v| v >= *k) {
                    return Err(Error::domain(format!("label {v} out of range 0..{k}")));
                }
            }
            Self::Continuous { dim, values } => {
                if values.iter().any(|v| v.len() != *dim) {
                    return Err(Error::config(format!("attribute rows must have width {dim}")));
                }
            }
        }
        Ok(())
    }
}

/// Neighbor weights `1/(d² + ε)` of the `n` nearest source points (clamped
/// to the source size), ordered by distance then index.
pub fn neighbor_weights(tree: &KdTree, x: P, n: usize) -> Vec<(usize, f64)> {
    tree.knn(x, n).into_iter().map(|(i, d2)| (i, 1.0 / (d2 + WEIGHT_EPS))).collect()
}

/// Transfer source attributes onto target points; both point sets live in
/// template space. Labels take the heaviest vote (lowest label on ties);
/// continuous values take the weighted mean.
pub fn transfer_attributes(source: &[P], attrs: &Attributes, target: &[P], n: usize) -> Result<Attributes> {
    if source.is_empty() {
        return Err(Error::domain("attribute transfer from an empty source"));
    }
    if attrs.len() != source.len() {
        return Err(Error::config(format!("{} attributes for {} source points", attrs.len(), source.len())));
    }
    if n == 0 {
        return Err(Error::config("neighbor count must be positive"));
    }
    attrs.validate()?;
    let tree = KdTree::from_slice(source);
    let out = match attrs {
        Attributes::Labels { k, values } => {
            let mut out = Vec::with_capacity(target.len());
            for &x in target {
                let mut votes = vec![0.0; *k];
                for (i, w) in neighbor_weights(&tree, x, n) {
                    votes[values[i]] += w;
                }
                out.push(crate::fields::sdc::argmax(&votes));
            }
            Attributes::Labels { k: *k, values: out }
        }
        Attributes::Continuous { dim, values } => {
            let mut out = Vec::with_capacity(target.len());
            for &x in target {
                let mut acc = vec![0.0; *dim];
                let mut total = 0.0;
                for (i, w) in neighbor_weights(&tree, x, n) {
                    total += w;
                    for (a, v) in acc.iter_mut().zip(&values[i]) {
                        *a += w * v;
                    }
                }
                acc.iter_mut().for_each(|a| *a /= total);
                out.push(acc);
            }
            Attributes::Continuous { dim: *dim, values: out }
        }
    };
    Ok(out)
}

/// Stack several labeled sources into one pooled set.
pub fn pool_labeled(sources: &[(Vec<P>, Vec<usize>)], k: usize) -> (Vec<P>, Attributes) {
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (p, l) in sources {
        pts.extend_from_slice(p);
        labels.extend_from_slice(l);
    }
    (pts, Attributes::Labels { k, values: labels })
}
