//! Training objective terms.

pub mod consistency;
pub mod recon;
pub mod regular;
pub mod scale;
pub mod total;
pub mod weights;

pub use consistency::{geo_loss, match_point, part_matches, pdc_geo, pdc_geo_brute, pdc_sem, pdc_sem_brute, DeformedPartSets, Match, PartSet};
pub use recon::{recon_loss, recon_terms, ReconTerms};
pub use regular::{correction_loss, emb_loss, normal_loss, smooth_loss, uncertainty, DeformJet};
pub use scale::{closed_form_r, mean_scale, scale_loss, scale_residual};
pub use total::{latent_codes, total_loss, total_loss_grad, total_loss_tape, BatchShape, Breakdown};
pub use weights::{ConsistencyPoints, LossWeights, ReconWeights};
