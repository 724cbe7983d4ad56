//! Dense-correspondence applications through the shared template space.

pub mod apply;
pub mod keypoints;
pub mod metrics;
pub mod vote;

pub use apply::{transfer_keypoints, transfer_keypoints_direct, transfer_labels, DeformedSurface, LabelTransfer, TransferReport};
pub use keypoints::KeypointSet;
pub use metrics::{miou, part_iou, pck};
pub use vote::{neighbor_weights, pool_labeled, transfer_attributes, Attributes, WEIGHT_EPS};
