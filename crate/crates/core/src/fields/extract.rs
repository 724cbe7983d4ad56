//! Dense field evaluation on the meshing grid.

use super::model::{Model, ShapeField};
use crate::autodiff::{ParamVector, Tensor};
use crate::error::{Error, Result};
use crate::geometry::kdtree::KdTree;
use crate::geometry::mc::{grid_points, marching_cubes_values};
use crate::geometry::mesh::Mesh;
use crate::geometry::sample::ShapeSample;

const CHUNK: usize = 4096;

/// Semantic features for arbitrary points: each takes the feature of its
/// nearest surface sample.
pub fn features_at(sample: &ShapeSample, points: &[[f64; 3]]) -> Result<Tensor> {
    if sample.surface.is_empty() {
        return Err(Error::domain("shape has no surface samples to borrow features from"));
    }
    let tree = KdTree::from_slice(&sample.surface);
    let mut out = Tensor::zeros(points.len(), sample.parts);
    for (r, &x) in points.iter().enumerate() {
        let (i, _) = tree.nearest(x)?;
        out.row_mut(r).copy_from_slice(sample.surface_features.row(i));
    }
    Ok(out)
}

/// Shape field values at the `resolution³` grid.
pub fn shape_grid_values(field: &ShapeField, sample: &ShapeSample, resolution: usize) -> Result<Vec<f64>> {
    let pts = grid_points(resolution);
    let mut out = Vec::with_capacity(pts.len());
    for chunk in pts.chunks(CHUNK) {
        let f = features_at(sample, chunk)?;
        out.extend(field.eval_batch(chunk, &f));
    }
    Ok(out)
}

pub fn shape_mesh(field: &ShapeField, sample: &ShapeSample, resolution: usize) -> Result<Mesh> {
    Ok(marching_cubes_values(&shape_grid_values(field, sample, resolution)?, resolution, 0.0))
}

/// Template values at the `resolution³` grid.
pub fn template_grid_values(model: &Model, params: &ParamVector, resolution: usize) -> Vec<f64> {
    let w = model.template_weights(params);
    let mut out = Vec::new();
    for chunk in grid_points(resolution).chunks(CHUNK) {
        out.extend_from_slice(w.forward_batch(&model.template, &Tensor::from_rows(chunk)).data());
    }
    out
}

pub fn template_mesh(model: &Model, params: &ParamVector, resolution: usize) -> Mesh {
    marching_cubes_values(&template_grid_values(model, params, resolution), resolution, 0.0)
}
