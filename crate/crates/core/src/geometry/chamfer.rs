//! Symmetric Chamfer distance (mean squared nearest-neighbor distance in
//! both directions).

use super::kdtree::{nearest_brute, KdTree};
use crate::error::{Error, Result};

type P = [f64; 3];

/// Mean over `a` of the squared distance to the nearest point of `b`.
pub fn directed(a: &[P], b: &KdTree) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::domain("Chamfer distance of an empty point set"));
    }
    let mut s = 0.0;
    for &x in a {
        s += b.nearest(x)?.1;
    }
    Ok(s / a.len() as f64)
}

pub fn chamfer(p: &[P], q: &[P]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::domain("Chamfer distance of an empty point set"));
    }
    let tp = KdTree::from_slice(p);
    let tq = KdTree::from_slice(q);
    Ok(directed(p, &tq)? + directed(q, &tp)?)
}

/// Quadratic-time reference with identical arithmetic.
pub fn chamfer_brute(p: &[P], q: &[P]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::domain("Chamfer distance of an empty point set"));
    }
    let dir = |a: &[P], b: &[P]| -> Result<f64> {
        let mut s = 0.0;
        for &x in a {
            s += nearest_brute(b, x)?.1;
        }
        Ok(s / a.len() as f64)
    };
    Ok(dir(p, q)? + dir(q, p)?)
}
