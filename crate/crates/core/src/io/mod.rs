//! Persistence: shape files, checkpoints, configuration and report formats.

pub mod checkpoint;
pub mod config;
pub mod files;
pub mod format;
pub mod hash;
pub mod shape;

pub use checkpoint::Checkpoint;
pub use config::KeyValues;
pub use files::{format_keypoints, format_labels, load_keypoints, load_labels, parse_keypoints, parse_labels, read_text, write_atomic};
pub use format::{fmt_g9, quantize};
pub use hash::fnv1a64;
pub use shape::{format_shape, load_shape, parse_shape, save_shape};
