//! Corpus ingestion: manifests, audio I/O and normalization, segmentation.

mod audio;
mod manifest;
mod segment;
mod wav;

pub use audio::{filter_min_duration, normalize_audio, Waveform, TARGET_RATE_HZ};
pub use manifest::{
    load_manifest, parse_manifest, summarize, write_manifest, AgeGroup, DatasetManifest,
    RecordingMeta, SummaryRow, MIN_SPEAKERS_PER_DIALECT,
};
pub use segment::{
    segment_count, segment_id, segment_recording, segment_with, Provenance, Segment,
    SEGMENT_SECONDS,
};
pub use wav::{read_wav, write_wav};
