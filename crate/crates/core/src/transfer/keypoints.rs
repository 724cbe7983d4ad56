use crate::error::{Error, Result};

/// Named 3D landmarks with unique names, kept in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeypointSet {
    points: Vec<(String, [f64; 3])>,
}

impl KeypointSet {
    pub fn new(points: Vec<(String, [f64; 3])>) -> Result<Self> {
        let mut s = Self::default();
        for (n, p) in points {
            s.push(n, p)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, name: impl Into<String>, p: [f64; 3]) -> Result<()> {
        let name = name.into();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::config(format!("invalid keypoint name {name:?}")));
        }
        if self.get(&name).is_some() {
            return Err(Error::config(format!("duplicate keypoint name {name}")));
        }
        self.points.push((name, p));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<[f64; 3]> {
        self.points.iter().find(|(n, _)| n == name).map(|&(_, p)| p)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, [f64; 3])> {
        self.points.iter().map(|(n, p)| (n.as_str(), *p))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.points.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keep only keypoints whose names also occur in `other`.
    pub fn common_with(&self, other: &Self) -> Self {
        Self {
            points: self.points.iter().filter(|(n, _)| other.get(n).is_some()).cloned().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_ordered() {
        let mut k = KeypointSet::default();
        k.push("a", [0.0; 3]).unwrap();
        k.push("b", [1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(k.push("a", [2.0; 3]), Err(Error::Config(_))));
        assert!(k.push("has space", [0.0; 3]).is_err());
        assert_eq!(k.names().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(k.get("b"), Some([1.0, 0.0, 0.0]));
        let other = KeypointSet::new(vec![("b".into(), [0.0; 3])]).unwrap();
        assert_eq!(k.common_with(&other).len(), 1);
    }
}
