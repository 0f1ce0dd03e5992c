//! Segment removal (SR) and frequency masking (FM) augmentation.
//!
//! SR excises randomly placed fixed-size chunks so the audio shortens; FM
//! zeroes randomly drawn frequency bands over the whole signal. The SR-FM
//! composition re-segments each recording's shortened audio into full
//! windows before masking.

mod mask;
mod removal;
mod srfm;

pub use mask::{apply_frequency_mask, sample_mask_bands, FreqMaskSpec, FrequencyMasker, MaskBand, MAX_PLACEMENT_RETRIES};
pub use removal::{apply_segment_removal, chunk_count, plan_segment_removal, RemovalPlan, SegmentRemovalSpec};
pub use srfm::{generate_sr_fm_copies, srfm_tag, write_sidecar, AugmentedSegment, SrFmConfig};
