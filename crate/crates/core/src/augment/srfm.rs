use std::io::Write;

use super::mask::{sample_mask_bands, FreqMaskSpec, FrequencyMasker, MaskBand};
use super::removal::{apply_segment_removal, plan_segment_removal, SegmentRemovalSpec};
use crate::corpus::{segment_with, Provenance, Segment, Waveform, SEGMENT_SECONDS};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrFmConfig {
    pub removal: SegmentRemovalSpec,
    pub mask: FreqMaskSpec,
    pub seg_len_s: f64,
}

impl Default for SrFmConfig {
    fn default() -> Self {
        SrFmConfig {
            removal: SegmentRemovalSpec::default(),
            mask: FreqMaskSpec::default(),
            seg_len_s: SEGMENT_SECONDS,
        }
    }
}

/// One SR-FM output window with enough provenance to rebuild it.
#[derive(Debug, Clone)]
pub struct AugmentedSegment {
    pub segment: Segment,
    pub pass: usize,
    pub source_tag: String,
    pub removed_s: f64,
    pub bands: Vec<MaskBand>,
}

/// Tag for pass `pass` of SR-FM applied to segments tagged `source_tag`.
pub fn srfm_tag(source_tag: &str, pass: usize) -> String {
    if source_tag == "orig" {
        format!("srfm{pass}")
    } else {
        format!("{source_tag}srfm{pass}")
    }
}

/// Generate `k` SR-FM passes over one recording's segments.
///
/// Each pass removes chunks from every segment, concatenates the retained
/// audio in segment order, cuts it into full windows (dropping the
/// remainder) and masks each window with a fresh band draw. Pass seeds are
/// derived from `(seed, recording_id, source tag, pass)`.
pub fn generate_sr_fm_copies(
    recording_segments: &[Segment],
    k: usize,
    seed: u64,
    cfg: &SrFmConfig,
) -> Result<Vec<AugmentedSegment>> {
    let Some(first) = recording_segments.first() else {
        return Ok(Vec::new());
    };
    if k == 0 {
        return Ok(Vec::new());
    }
    let recording_id = first.recording_id.as_str();
    let source_tag = first.tag.as_str();
    for s in recording_segments {
        if s.recording_id != recording_id || s.tag != source_tag {
            return Err(Error::Validation(format!(
                "SR-FM input mixes {}/{} with {}/{}",
                recording_id, source_tag, s.recording_id, s.tag
            )));
        }
        if !s.waveform.is_normalized() {
            return Err(Error::Validation(format!("segment {} is not 16 kHz mono", s.id())));
        }
    }
    let provenance = match first.provenance {
        Provenance::Original => Provenance::SrFm,
        Provenance::Converted => Provenance::ConvertedSrFm,
        other => {
            return Err(Error::Validation(format!("SR-FM cannot be applied to {other} segments")))
        }
    };
    let mut ordered: Vec<&Segment> = recording_segments.iter().collect();
    ordered.sort_by_key(|s| s.segment_index);
    let rate = first.waveform.rate_hz;
    let masker = FrequencyMasker::default();

    let mut out = Vec::new();
    for pass in 0..k {
        let pass_seed = derive_seed(seed, &[recording_id.into(), source_tag.into(), pass.into()]);
        let mut retained: Vec<f32> = Vec::new();
        let mut removed_s = 0.0;
        for seg in &ordered {
            let plan_seed = derive_seed(pass_seed, &["sr".into(), seg.segment_index.into()]);
            let plan = plan_segment_removal(seg.waveform.duration_s(), &cfg.removal, plan_seed)?;
            removed_s += plan.removed_s();
            retained.extend(apply_segment_removal(&seg.waveform, &plan)?.samples);
        }
        let tag = srfm_tag(source_tag, pass);
        let windows = segment_with(&Waveform::mono(retained, rate), recording_id, cfg.seg_len_s, provenance, &tag);
        for mut window in windows {
            let band_seed = derive_seed(pass_seed, &["fm".into(), window.segment_index.into()]);
            let bands = sample_mask_bands(&cfg.mask, band_seed)?;
            window.waveform = masker.apply(&window.waveform, &bands)?;
            out.push(AugmentedSegment {
                segment: window,
                pass,
                source_tag: source_tag.to_string(),
                removed_s,
                bands,
            });
        }
    }
    Ok(out)
}

/// Sidecar CSV mapping each augmented segment to its source and draw.
pub fn write_sidecar<W: Write>(writer: W, items: &[AugmentedSegment]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["segment_id", "source_recording", "source_tag", "pass", "window_index", "removed_s", "bands_hz"])
        .map_err(|e| Error::csv("sidecar", e))?;
    for it in items {
        let bands = it
            .bands
            .iter()
            .map(|b| format!("{:.1}-{:.1}", b.lo_hz, b.hi_hz))
            .collect::<Vec<_>>()
            .join(";");
        wtr.write_record([
            it.segment.id(),
            it.segment.recording_id.clone(),
            it.source_tag.clone(),
            it.pass.to_string(),
            it.segment.segment_index.to_string(),
            format!("{:.4}", it.removed_s),
            bands,
        ])
        .map_err(|e| Error::csv("sidecar", e))?;
    }
    wtr.flush().map_err(|e| Error::io("<sidecar writer>", e))
}
