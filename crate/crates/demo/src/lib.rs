//! Browser demo over procedural shape families: SDF slices with part
//! labels, marching-cubes meshes with topology counts, and label transfer
//! with correspondence uncertainty. A checkpoint written by `pdc train`
//! can be loaded to show the learned fields instead of the analytic ones.

use pdc_core::autodiff::ParamVector;
use pdc_core::fields::{shape_grid_values, template_grid_values, Model, ShapeField};
use pdc_core::geometry::mc::{cell_size, grid_coord};
use pdc_core::geometry::{family_shape, marching_cubes, marching_cubes_values, sample_shape, Family, Mesh, ShapeSample};
use pdc_core::io::Checkpoint;
use pdc_core::transfer::{miou, transfer_labels, DeformedSurface};
use pdc_core::{Error, Result};
use wasm_bindgen::prelude::*;

const SURFACE_POINTS: usize = 1024;
const UNCERTAINTY_GAMMA: f64 = 10.0;

/// Values of a z-slice: signed distances row by row, plus the part label of
/// the nearest primitive at each pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    pub size: usize,
    pub sdf: Vec<f64>,
    pub labels: Vec<u32>,
}

pub fn family(name: &str) -> Result<Family> {
    name.parse()
}

pub fn slice(family: Family, index: usize, seed: u64, z: f64, size: usize) -> Slice {
    let spec = family_shape(family, index, seed);
    let mut sdf = Vec::with_capacity(size * size);
    let mut labels = Vec::with_capacity(size * size);
    for j in 0..size {
        for i in 0..size {
            // image rows run top to bottom
            let p = [grid_coord(i, size), -grid_coord(j, size), z];
            sdf.push(spec.union.sdf(p));
            labels.push(spec.union.label(p) as u32);
        }
    }
    Slice { size, sdf, labels }
}

pub fn analytic_mesh(family: Family, index: usize, seed: u64, resolution: usize) -> Mesh {
    let spec = family_shape(family, index, seed);
    marching_cubes(|p| spec.union.sdf(p), resolution, 0.0)
}

pub fn samples(family: Family, index: usize, seed: u64) -> Result<ShapeSample> {
    sample_shape(&family_shape(family, index, seed), SURFACE_POINTS, 16, index as u64)
}

/// Labels voted from `source` onto `target` surface samples by their
/// `n` nearest source points, in template space when fields are given.
pub fn label_transfer(
    source: &ShapeSample,
    target: &ShapeSample,
    fields: Option<(&ShapeField, &ShapeField)>,
    n: usize,
) -> Result<(Vec<usize>, Vec<f64>, f64)> {
    let labels = source.labels.as_deref().ok_or_else(|| Error::domain("source has no labels"))?;
    let truth = target.labels.as_deref().ok_or_else(|| Error::domain("target has no labels"))?;
    let (s, t) = match fields {
        Some((fs, ft)) => (DeformedSurface::new(source, fs), DeformedSurface::new(target, ft)),
        None => (DeformedSurface::identity(source), DeformedSurface::identity(target)),
    };
    let r = transfer_labels(&[(&s, labels)], &t, source.parts, n, UNCERTAINTY_GAMMA)?;
    let m = miou(&r.labels, truth, source.parts)?;
    Ok((r.labels, r.uncertainty, m))
}

fn js_err(e: Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
pub struct SliceView {
    inner: Slice,
}

#[wasm_bindgen]
impl SliceView {
    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        self.inner.size
    }

    #[wasm_bindgen(getter)]
    pub fn sdf(&self) -> Vec<f64> {
        self.inner.sdf.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn labels(&self) -> Vec<u32> {
        self.inner.labels.clone()
    }
}

#[wasm_bindgen]
pub struct MeshView {
    inner: Mesh,
}

#[wasm_bindgen]
impl MeshView {
    /// Flat xyz triples.
    #[wasm_bindgen(getter)]
    pub fn positions(&self) -> Vec<f32> {
        self.inner.vertices.iter().flat_map(|v| v.map(|c| c as f32)).collect()
    }

    #[wasm_bindgen(getter)]
    pub fn indices(&self) -> Vec<u32> {
        self.inner.faces.iter().flat_map(|f| f.map(|i| i as u32)).collect()
    }

    #[wasm_bindgen(getter)]
    pub fn vertex_count(&self) -> usize {
        self.inner.vertices.len()
    }

    #[wasm_bindgen(getter)]
    pub fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    #[wasm_bindgen(getter)]
    pub fn face_count(&self) -> usize {
        self.inner.faces.len()
    }

    #[wasm_bindgen(getter)]
    pub fn euler(&self) -> i64 {
        self.inner.euler_characteristic()
    }
}

#[wasm_bindgen]
pub struct TransferView {
    points: Vec<[f64; 3]>,
    labels: Vec<usize>,
    truth: Vec<usize>,
    uncertainty: Vec<f64>,
    miou: f64,
}

#[wasm_bindgen]
impl TransferView {
    /// Target surface samples, flat xyz.
    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f32> {
        self.points.iter().flat_map(|v| v.map(|c| c as f32)).collect()
    }

    #[wasm_bindgen(getter)]
    pub fn labels(&self) -> Vec<u32> {
        self.labels.iter().map(|&l| l as u32).collect()
    }

    #[wasm_bindgen(getter)]
    pub fn truth(&self) -> Vec<u32> {
        self.truth.iter().map(|&l| l as u32).collect()
    }

    #[wasm_bindgen(getter)]
    pub fn uncertainty(&self) -> Vec<f64> {
        self.uncertainty.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn miou(&self) -> f64 {
        self.miou
    }

    /// Fraction of target points whose voted label is wrong.
    #[wasm_bindgen(getter)]
    pub fn error_rate(&self) -> f64 {
        let wrong = self.labels.iter().zip(&self.truth).filter(|(a, b)| a != b).count();
        wrong as f64 / self.labels.len().max(1) as f64
    }
}

/// Page state: the seed of the procedural families and an optional trained
/// model whose codes belong to shapes `0..shapes` of one family.
#[wasm_bindgen]
pub struct Demo {
    seed: u64,
    trained: Option<(Model, ParamVector)>,
}

impl Demo {
    fn field(&self, index: usize) -> Option<Result<ShapeField>> {
        let (m, p) = self.trained.as_ref()?;
        (index < m.config.shapes).then(|| m.shape_field(p, m.code(p, index)))
    }
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Demo {
        Demo {
            seed: seed as u64,
            trained: None,
        }
    }

    /// Load a checkpoint; returns a one-line summary.
    pub fn load_checkpoint(&mut self, bytes: &[u8]) -> std::result::Result<String, JsValue> {
        let ck = Checkpoint::from_bytes(bytes).map_err(js_err)?;
        let model = ck.model().map_err(js_err)?;
        let summary = format!(
            "{} shapes, {} parts, {} parameters",
            model.config.shapes,
            model.config.parts,
            ck.params.len()
        );
        self.trained = Some((model, ck.params));
        Ok(summary)
    }

    pub fn has_model(&self) -> bool {
        self.trained.is_some()
    }

    pub fn slice(&self, family_name: &str, index: usize, z: f64, size: usize) -> std::result::Result<SliceView, JsValue> {
        let f = family(family_name).map_err(js_err)?;
        Ok(SliceView {
            inner: slice(f, index, self.seed, z, size.max(2)),
        })
    }

    /// Mesh of the analytic shape, or with `learned` of the trained shape
    /// field (`index` in range) or template (`index` past the codes).
    pub fn mesh(&self, family_name: &str, index: usize, resolution: usize, learned: bool) -> std::result::Result<MeshView, JsValue> {
        let f = family(family_name).map_err(js_err)?;
        let r = resolution.clamp(2, 96);
        let inner = match (&self.trained, learned) {
            (Some((m, p)), true) => match self.field(index) {
                Some(field) => {
                    let s = samples(f, index, self.seed).map_err(js_err)?;
                    let values = shape_grid_values(&field.map_err(js_err)?, &s, r).map_err(js_err)?;
                    marching_cubes_values(&values, r, 0.0)
                }
                None => marching_cubes_values(&template_grid_values(m, p, r), r, 0.0),
            },
            _ => analytic_mesh(f, index, self.seed, r),
        };
        Ok(MeshView { inner })
    }

    pub fn transfer(&self, family_name: &str, source: usize, target: usize, n: usize, learned: bool) -> std::result::Result<TransferView, JsValue> {
        let f = family(family_name).map_err(js_err)?;
        let s = samples(f, source, self.seed).map_err(js_err)?;
        let t = samples(f, target, self.seed).map_err(js_err)?;
        let fields = match (learned, self.field(source), self.field(target)) {
            (true, Some(a), Some(b)) => Some((a.map_err(js_err)?, b.map_err(js_err)?)),
            _ => None,
        };
        let (labels, uncertainty, m) = label_transfer(&s, &t, fields.as_ref().map(|(a, b)| (a, b)), n.max(1)).map_err(js_err)?;
        Ok(TransferView {
            points: t.surface.clone(),
            truth: t.labels.clone().unwrap_or_default(),
            labels,
            uncertainty,
            miou: m,
        })
    }

    /// Grid spacing of a mesh resolution, for display.
    pub fn cell(&self, resolution: usize) -> f64 {
        cell_size(resolution)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_signs_match_labels_inside() {
        let s = slice(Family::Sphere, 0, 1, 0.0, 33);
        assert_eq!(s.sdf.len(), 33 * 33);
        // centre pixel lies inside the body
        assert!(s.sdf[16 * 33 + 16] < 0.0);
        assert!(s.sdf[0] > 0.0);
        assert!(s.labels.iter().all(|&l| l < 2));
    }

    #[test]
    fn analytic_sphere_mesh_is_closed_genus_zero() {
        let m = analytic_mesh(Family::Sphere, 0, 1, 32);
        assert!(!m.is_empty());
        assert_eq!(m.euler_characteristic(), 2);
    }

    #[test]
    fn self_transfer_is_exact() {
        let s = samples(Family::Chair, 2, 1).unwrap();
        let (labels, u, m) = label_transfer(&s, &s, None, 10).unwrap();
        assert_eq!(Some(labels), s.labels);
        assert_eq!(m, 1.0);
        assert!(u.iter().all(|&v| v.is_finite()));
    }

    #[test]
    fn unknown_family_is_reported() {
        assert!(family("teapot").is_err());
    }

    #[test]
    fn demo_falls_back_to_analytic_without_model() {
        let d = Demo::new(1);
        assert!(!d.has_model());
        let m = d.mesh("chair", 0, 20, true).ok().unwrap();
        assert!(m.face_count() > 0);
        let t = d.transfer("table", 0, 1, 10, true).ok().unwrap();
        assert!(t.miou() > 0.0 && t.error_rate() < 1.0);
    }
}
