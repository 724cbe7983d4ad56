//! Marching cubes over a regular grid spanning `[-1, 1]³`.

use std::collections::HashMap;

use super::mc_tables::{EDGE_TABLE, TRI_TABLE};
use super::mesh::Mesh;

/// Cube corner offsets in lookup-table order.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Corner pairs joined by each cube edge.
const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Interpolation parameters this close to an endpoint snap onto the corner.
const SNAP: f64 = 1e-6;

/// Spacing between grid samples for `resolution` samples per axis.
pub fn cell_size(resolution: usize) -> f64 {
    2.0 / (resolution.max(2) - 1) as f64
}

pub fn grid_coord(i: usize, resolution: usize) -> f64 {
    -1.0 + i as f64 * cell_size(resolution)
}

/// All grid sample positions, x fastest, then y, then z.
pub fn grid_points(resolution: usize) -> Vec<[f64; 3]> {
    let r = resolution;
    let mut pts = Vec::with_capacity(r * r * r);
    for k in 0..r {
        for j in 0..r {
            for i in 0..r {
                pts.push([grid_coord(i, r), grid_coord(j, r), grid_coord(k, r)]);
            }
        }
    }
    pts
}

/// Extract the `iso` level set of a field sampled at `resolution³` points.
pub fn marching_cubes(field: impl Fn([f64; 3]) -> f64, resolution: usize, iso: f64) -> Mesh {
    let values: Vec<f64> = grid_points(resolution).into_iter().map(field).collect();
    marching_cubes_values(&values, resolution, iso)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Corner(usize),
    Edge(usize, usize),
}

/// Marching cubes over precomputed samples in [`grid_points`] order.
///
/// Corners below `iso` are inside. Triangles are wound so that their
/// normals point toward increasing field values.
pub fn marching_cubes_values(values: &[f64], resolution: usize, iso: f64) -> Mesh {
    let r = resolution;
    assert_eq!(values.len(), r * r * r, "value grid does not match resolution");
    let mut mesh = Mesh::default();
    if r < 2 {
        return mesh;
    }
    let idx = |i: usize, j: usize, k: usize| i + r * (j + r * k);
    let pos = |g: usize| {
        let (i, j, k) = (g % r, (g / r) % r, g / (r * r));
        [grid_coord(i, r), grid_coord(j, r), grid_coord(k, r)]
    };
    let mut cache: HashMap<Key, usize> = HashMap::new();
    let mut vertex = |mesh: &mut Mesh, a: usize, b: usize| -> usize {
        let (va, vb) = (values[a], values[b]);
        let t = (iso - va) / (vb - va);
        let key = if t <= SNAP {
            Key::Corner(a)
        } else if t >= 1.0 - SNAP {
            Key::Corner(b)
        } else {
            Key::Edge(a.min(b), a.max(b))
        };
        *cache.entry(key).or_insert_with(|| {
            let p = match key {
                Key::Corner(c) => pos(c),
                Key::Edge(..) => {
                    let (pa, pb) = (pos(a), pos(b));
                    [0, 1, 2].map(|m| pa[m] + t * (pb[m] - pa[m]))
                }
            };
            mesh.vertices.push(p);
            mesh.vertices.len() - 1
        })
    };
    for k in 0..r - 1 {
        for j in 0..r - 1 {
            for i in 0..r - 1 {
                let corner = CORNERS.map(|c| idx(i + c[0], j + c[1], k + c[2]));
                let mut case = 0usize;
                for (b, &g) in corner.iter().enumerate() {
                    if values[g] < iso {
                        case |= 1 << b;
                    }
                }
                if EDGE_TABLE[case] == 0 {
                    continue;
                }
                let mut ev = [usize::MAX; 12];
                for (e, pair) in EDGES.iter().enumerate() {
                    if EDGE_TABLE[case] & (1 << e) != 0 {
                        ev[e] = vertex(&mut mesh, corner[pair[0]], corner[pair[1]]);
                    }
                }
                for tri in TRI_TABLE[case].chunks(3) {
                    if tri[0] < 0 {
                        break;
                    }
                    let f = [ev[tri[0] as usize], ev[tri[2] as usize], ev[tri[1] as usize]];
                    if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                        continue;
                    }
                    if mesh.triangle_area(f) <= 1e-12 {
                        continue;
                    }
                    mesh.faces.push(f);
                }
            }
        }
    }
    mesh.compact();
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(c: [f64; 3], r: f64) -> impl Fn([f64; 3]) -> f64 {
        move |p: [f64; 3]| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2)).sqrt() - r
    }

    #[test]
    fn sphere_is_closed_genus_zero() {
        let m = marching_cubes(sphere([0.0; 3], 0.5), 64, 0.0);
        assert_eq!(m.euler_characteristic(), 2);
        let h = cell_size(64);
        let diag = h * 3f64.sqrt();
        let f = sphere([0.0; 3], 0.5);
        for &v in &m.vertices {
            assert!(v.iter().all(|c| c.abs() <= 1.0));
            // the SDF is 1-Lipschitz
            assert!(f(v).abs() <= diag);
        }
    }

    #[test]
    fn triangles_face_outward() {
        let m = marching_cubes(sphere([0.0; 3], 0.5), 24, 0.0);
        for &f in &m.faces {
            let [a, b, c] = f.map(|i| m.vertices[i]);
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            let n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
            let centroid: Vec<f64> = (0..3).map(|k| (a[k] + b[k] + c[k]) / 3.0).collect();
            assert!(n[0] * centroid[0] + n[1] * centroid[1] + n[2] * centroid[2] > 0.0);
        }
    }

    #[test]
    fn constant_field_gives_empty_mesh() {
        assert!(marching_cubes(|_| 1.0, 16, 0.0).is_empty());
        assert!(marching_cubes(|_| -1.0, 16, 0.0).is_empty());
        let tiny = marching_cubes(sphere([0.0; 3], 0.5), 2, 0.0);
        assert!(tiny.faces.len() <= 4);
    }

    #[test]
    fn translation_keeps_vertex_count() {
        let a = marching_cubes(sphere([0.0; 3], 0.5), 48, 0.0).vertices.len() as f64;
        let b = marching_cubes(sphere([0.071, -0.043, 0.029], 0.5), 48, 0.0).vertices.len() as f64;
        assert!((a - b).abs() <= 0.05 * a, "{a} vs {b}");
    }
}
