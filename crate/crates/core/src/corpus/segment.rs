use std::fmt;
use std::str::FromStr;

use super::audio::{Waveform, TARGET_RATE_HZ};
use crate::error::Error;

pub const SEGMENT_SECONDS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    Original,
    Converted,
    SrFm,
    ConvertedSrFm,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Converted => "converted",
            Provenance::SrFm => "srfm",
            Provenance::ConvertedSrFm => "converted_srfm",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "original" => Ok(Provenance::Original),
            "converted" => Ok(Provenance::Converted),
            "srfm" => Ok(Provenance::SrFm),
            "converted_srfm" => Ok(Provenance::ConvertedSrFm),
            other => Err(Error::Validation(format!("unknown provenance {other:?}"))),
        }
    }
}

/// A fixed-length slice of a recording, tagged with where it came from.
///
/// `tag` distinguishes derived variants of the same recording (`orig`,
/// `rvc1`, `srfm0`, ...) and is part of the segment id.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub waveform: Waveform,
    pub recording_id: String,
    pub segment_index: usize,
    pub start_s: f64,
    pub provenance: Provenance,
    pub tag: String,
}

impl Segment {
    pub fn id(&self) -> String {
        segment_id(&self.recording_id, &self.tag, self.segment_index)
    }
}

pub fn segment_id(recording_id: &str, tag: &str, index: usize) -> String {
    format!("{recording_id}__{tag}__{index}")
}

/// Number of full windows in a recording of the given duration at 16 kHz.
pub fn segment_count(duration_s: f64, seg_len_s: f64) -> usize {
    let total = (duration_s * TARGET_RATE_HZ as f64).round() as usize;
    let win = (seg_len_s * TARGET_RATE_HZ as f64).round() as usize;
    total.checked_div(win).unwrap_or(0)
}

/// Cut an original recording into consecutive non-overlapping windows; the
/// trailing remainder is dropped.
pub fn segment_recording(w: &Waveform, recording_id: &str, seg_len_s: f64) -> Vec<Segment> {
    segment_with(w, recording_id, seg_len_s, Provenance::Original, "orig")
}

pub fn segment_with(
    w: &Waveform,
    recording_id: &str,
    seg_len_s: f64,
    provenance: Provenance,
    tag: &str,
) -> Vec<Segment> {
    let win = (seg_len_s * w.rate_hz as f64).round() as usize;
    if win == 0 {
        return Vec::new();
    }
    w.samples
        .chunks_exact(win)
        .enumerate()
        .map(|(i, chunk)| Segment {
            waveform: Waveform::mono(chunk.to_vec(), w.rate_hz),
            recording_id: recording_id.to_string(),
            segment_index: i,
            start_s: (i * win) as f64 / w.rate_hz as f64,
            provenance,
            tag: tag.to_string(),
        })
        .collect()
}
