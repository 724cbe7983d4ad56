//! Triangle meshes, OBJ text and topology measures.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::io::fmt_g9;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Number of distinct undirected edges.
    pub fn edge_count(&self) -> usize {
        let mut edges = HashSet::with_capacity(self.faces.len() * 3 / 2 + 1);
        for f in &self.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges.len()
    }

    /// `V − E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.faces.len() as i64
    }

    pub fn triangle_area(&self, f: [usize; 3]) -> f64 {
        let [a, b, c] = f.map(|i| self.vertices[i]);
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
        0.5 * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
    }

    /// Drop vertices no face refers to, keeping the order of the rest.
    pub fn compact(&mut self) {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut kept = Vec::new();
        for f in &mut self.faces {
            for i in f.iter_mut() {
                if remap[*i] == usize::MAX {
                    remap[*i] = kept.len();
                    kept.push(self.vertices[*i]);
                }
                *i = remap[*i];
            }
        }
        self.vertices = kept;
    }

    /// Area-weighted random points on the surface (deterministic in `rng`).
    pub fn sample_points<R: rand::Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<[f64; 3]> {
        if self.faces.is_empty() {
            return Vec::new();
        }
        let mut cum = Vec::with_capacity(self.faces.len());
        let mut total = 0.0;
        for &f in &self.faces {
            total += self.triangle_area(f);
            cum.push(total);
        }
        (0..n)
            .map(|_| {
                let t = rng.random::<f64>() * total;
                let i = cum.partition_point(|&c| c < t).min(self.faces.len() - 1);
                let [a, b, c] = self.faces[i].map(|j| self.vertices[j]);
                let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                [0, 1, 2].map(|k| a[k] + u * (b[k] - a[k]) + v * (c[k] - a[k]))
            })
            .collect()
    }

    /// Wavefront OBJ: `v` lines then 1-based `f` lines.
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            s.push_str(&format!("v {} {} {}\n", fmt_g9(v[0]), fmt_g9(v[1]), fmt_g9(v[2])));
        }
        for f in &self.faces {
            s.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
        }
        s
    }

    pub fn from_obj(text: &str) -> Result<Self> {
        let mut m = Self::default();
        for (n, line) in text.lines().enumerate() {
            let bad = |msg: &str| Error::Parse {
                path: "<obj>".into(),
                line: n + 1,
                msg: msg.to_string(),
            };
            let mut it = line.split_whitespace();
            match it.next() {
                Some("v") => {
                    let v: Vec<f64> = it.map(|t| t.parse().map_err(|_| bad("bad vertex coordinate"))).collect::<Result<_>>()?;
                    if v.len() != 3 {
                        return Err(bad("vertex needs 3 coordinates"));
                    }
                    m.vertices.push([v[0], v[1], v[2]]);
                }
                Some("f") => {
                    let f: Vec<usize> = it
                        .map(|t| t.split('/').next().unwrap_or("").parse::<usize>().map_err(|_| bad("bad face index")))
                        .collect::<Result<_>>()?;
                    if f.len() != 3 || f.iter().any(|&i| i == 0 || i > m.vertices.len()) {
                        return Err(bad("face needs 3 in-range indices"));
                    }
                    m.faces.push([f[0] - 1, f[1] - 1, f[2] - 1]);
                }
                _ => {}
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> Mesh {
        Mesh {
            vertices: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            faces: vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        }
    }

    #[test]
    fn tetrahedron_is_a_sphere() {
        let t = tetra();
        assert_eq!(t.edge_count(), 6);
        assert_eq!(t.euler_characteristic(), 2);
    }

    #[test]
    fn obj_round_trip() {
        let t = tetra();
        let s = t.to_obj();
        assert!(s.starts_with("v 0 0 0\n"));
        assert!(s.contains("f 1 3 2\n"));
        assert_eq!(Mesh::from_obj(&s).unwrap(), t);
        assert!(Mesh::from_obj("v 0 0\n").is_err());
        assert!(Mesh::from_obj("v 0 0 0\nf 1 2 3\n").is_err());
    }

    #[test]
    fn compact_drops_unreferenced_vertices() {
        let mut m = Mesh {
            vertices: vec![[9.0; 3], [0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            faces: vec![[1, 2, 3]],
        };
        m.compact();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.faces, vec![[0, 1, 2]]);
        assert!((m.triangle_area([0, 1, 2]) - 0.5).abs() < 1e-15);
    }
}
