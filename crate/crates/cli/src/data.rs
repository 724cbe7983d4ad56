//! Dataset directories: `shape_NNNN.shape` files with optional `.kp`
//! keypoint files beside them.

use std::path::{Path, PathBuf};

use pdc_core::geometry::{family_shape, sample_shape, Family, ShapeSample};
use pdc_core::io::{format_keypoints, format_shape, load_keypoints, load_shape, write_atomic};
use pdc_core::training::stream_seed;
use pdc_core::transfer::KeypointSet;
use pdc_core::{Error, Result};
use rayon::prelude::*;

pub const SHAPE_EXT: &str = "shape";
pub const KEYPOINT_EXT: &str = "kp";
const GEN_SAMPLE: u64 = 5;

pub struct Dataset {
    pub paths: Vec<PathBuf>,
    pub shapes: Vec<ShapeSample>,
}

impl Dataset {
    /// Every `.shape` file in `dir`, sorted by name.
    pub fn load(dir: &Path) -> Result<Self> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths = Vec::new();
        for e in entries {
            let p = e.map_err(|e| Error::io(dir, e))?.path();
            if p.extension().is_some_and(|x| x == SHAPE_EXT) {
                paths.push(p);
            }
        }
        paths.sort();
        if paths.is_empty() {
            return Err(Error::domain(format!("no .{SHAPE_EXT} files in {}", dir.display())));
        }
        let shapes = paths.par_iter().map(|p| load_shape(p)).collect::<Result<Vec<_>>>()?;
        let k = shapes[0].parts;
        if let Some((p, s)) = paths.iter().zip(&shapes).find(|(_, s)| s.parts != k) {
            return Err(Error::domain(format!("{} has k={} but the dataset has k={k}", p.display(), s.parts)));
        }
        Ok(Self { paths, shapes })
    }

    pub fn parts(&self) -> usize {
        self.shapes[0].parts
    }
}

pub fn keypoint_path(shape: &Path) -> PathBuf {
    shape.with_extension(KEYPOINT_EXT)
}

/// Keypoints stored beside a shape file.
pub fn shape_keypoints(shape: &Path) -> Result<KeypointSet> {
    load_keypoints(&keypoint_path(shape))
}

/// Write `count` shapes of `family` with their keypoints into `out`.
pub fn generate(family: Family, count: usize, seed: u64, n_surface: usize, n_query: usize, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let spec = family_shape(family, i, seed);
            let sample = sample_shape(&spec, n_surface, n_query, stream_seed(seed, GEN_SAMPLE, i as u64))?;
            let path = out.join(format!("shape_{i:04}.{SHAPE_EXT}"));
            write_atomic(&path, format_shape(&sample).as_bytes())?;
            write_atomic(&keypoint_path(&path), format_keypoints(&spec.keypoints).as_bytes())?;
            Ok(path)
        })
        .collect()
}
