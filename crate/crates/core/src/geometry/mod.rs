//! Spatial index, analytic shapes, sampling and isosurface extraction.

pub mod chamfer;
pub mod kdtree;
pub mod mc;
mod mc_tables;
pub mod mesh;
pub mod sample;
pub mod sdf;
pub mod synth;

pub use chamfer::{chamfer, chamfer_brute};
pub use kdtree::{dist2, nearest_brute, KdTree};
pub use mc::{marching_cubes, marching_cubes_values};
pub use mesh::Mesh;
pub use sample::{sample_shape, sample_shape_with, SampleOptions, ShapeSample};
pub use sdf::{Part, Primitive, Union};
pub use synth::{family_shape, Family, SynthSpec};
