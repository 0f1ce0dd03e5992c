//! Synthetic dialect corpora.
//!
//! Each recording is a sequence of vowel-like syllables. The dialect sets a
//! global spectral tilt, each speaker adds a nuisance resonance and a pitch
//! offset, and "converted" audio keeps content, timing, pitch and tilt while
//! swapping the speaker resonance for the target's.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{impulse_train, resonate};
use crate::augment::{generate_sr_fm_copies, SrFmConfig};
use crate::conversion::{assign_targets, ConversionMode, TargetSpeakers};
use crate::corpus::{segment_recording, segment_with, AgeGroup, DatasetManifest, Provenance, RecordingMeta, Segment, Waveform, SEGMENT_SECONDS, TARGET_RATE_HZ};
use crate::embed::{EmbeddingTable, MelExtractor};
use crate::error::Result;
use crate::experiment::SegmentCatalog;
use crate::seed::{derive_seed, rng_from_seed};

/// Speakers, total seconds and sample count per age group of the overview
/// table that [`overview_manifest`] reproduces.
pub const OVERVIEW_GROUPS: [(AgeGroup, usize, f64, usize); 3] = [
    (AgeGroup::Young, 139, 32440.17, 3170),
    (AgeGroup::Middle, 237, 59966.90, 5875),
    (AgeGroup::Old, 198, 64476.90, 6352),
];

/// Manifest-only corpus with the overview table's per-group speaker counts
/// and total durations over 20 dialects. Recording counts are chosen so the
/// dropped trailing partial windows bring the 10 s sample count close to
/// the table's.
pub fn overview_manifest(seed: u64) -> Result<DatasetManifest> {
    let n_dialects = 20;
    let mut rng = rng_from_seed(seed);
    let mut recs = Vec::new();
    for (group, speakers, total_s, samples) in OVERVIEW_GROUPS {
        // Each recording drops on average half a window
        let expected_loss = total_s / 10.0 - samples as f64;
        let n_recs = ((2.0 * expected_loss).round() as usize).max(speakers);
        let weights: Vec<f64> = (0..n_recs).map(|_| rng.random_range(0.5..1.5)).collect();
        let wsum: f64 = weights.iter().sum();
        // Durations in centiseconds summing exactly to the total
        let total_cs = (total_s * 100.0).round() as i64;
        let mut cs: Vec<i64> = weights.iter().map(|w| (w / wsum * total_cs as f64).floor() as i64).collect();
        let short = total_cs - cs.iter().sum::<i64>();
        for c in cs.iter_mut().take(short as usize) {
            *c += 1;
        }
        for (i, c) in cs.into_iter().enumerate() {
            // First pass gives every speaker one recording, the rest cycle
            let spk = i % speakers;
            let dialect = spk % n_dialects;
            recs.push(RecordingMeta {
                recording_id: format!("{}_{spk:03}_{i:03}", group.as_str()),
                speaker_id: format!("{}_{spk:03}", group.as_str()),
                dialect: format!("dialect{dialect:02}"),
                age_group: group,
                path: String::new(),
                duration_s: c as f64 / 100.0,
            });
        }
    }
    Ok(DatasetManifest::from_recordings(recs)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthCorpusSpec {
    pub n_dialects: usize,
    pub speakers_per_dialect: usize,
    pub recordings_per_speaker: usize,
    pub recording_s: f64,
    pub seed: u64,
}

impl Default for SynthCorpusSpec {
    fn default() -> Self {
        SynthCorpusSpec { n_dialects: 2, speakers_per_dialect: 12, recordings_per_speaker: 10, recording_s: 20.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpeaker {
    pub speaker_id: String,
    pub age_group: AgeGroup,
    pub f0_hz: f64,
    /// Speaker-specific resonance `(frequency, bandwidth)`.
    pub nuisance: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub spec: SynthCorpusSpec,
    pub manifest: DatasetManifest,
    pub speakers: BTreeMap<String, SynthSpeaker>,
    /// One-pole tilt coefficient per dialect name.
    pub tilts: BTreeMap<String, f64>,
    /// Conversion targets, one per age group.
    pub targets: BTreeMap<AgeGroup, SynthSpeaker>,
}

const VOWELS: [(f64, f64, f64); 6] = [
    (730.0, 1090.0, 2440.0),
    (530.0, 1840.0, 2480.0),
    (270.0, 2290.0, 3010.0),
    (570.0, 840.0, 2410.0),
    (300.0, 870.0, 2240.0),
    (660.0, 1720.0, 2410.0),
];

fn base_f0(g: AgeGroup) -> f64 {
    match g {
        AgeGroup::Young => 130.0,
        AgeGroup::Middle => 118.0,
        AgeGroup::Old => 110.0,
    }
}

impl SynthCorpus {
    pub fn generate(spec: SynthCorpusSpec) -> Result<Self> {
        let mut rng = rng_from_seed(derive_seed(spec.seed, &["speakers".into()]));
        let mut recs = Vec::new();
        let mut speakers = BTreeMap::new();
        let mut tilts = BTreeMap::new();
        for d in 0..spec.n_dialects {
            let dialect = format!("dialect{d:02}");
            // Spread tilts evenly over [-0.85, 0.85]
            let tilt = if spec.n_dialects == 1 { 0.0 } else { -0.85 + 1.7 * d as f64 / (spec.n_dialects - 1) as f64 };
            tilts.insert(dialect.clone(), tilt);
            for s in 0..spec.speakers_per_dialect {
                let age_group = AgeGroup::ALL[s % 3];
                let speaker_id = format!("d{d:02}_spk{s:02}");
                let spk = SynthSpeaker {
                    speaker_id: speaker_id.clone(),
                    age_group,
                    f0_hz: base_f0(age_group) + rng.random_range(-15.0..15.0),
                    nuisance: (rng.random_range(800.0..3500.0), 200.0),
                };
                speakers.insert(speaker_id.clone(), spk);
                for r in 0..spec.recordings_per_speaker {
                    let recording_id = format!("{speaker_id}_rec{r:02}");
                    recs.push(RecordingMeta {
                        path: format!("audio/{recording_id}.wav"),
                        recording_id,
                        speaker_id: speaker_id.clone(),
                        dialect: dialect.clone(),
                        age_group,
                        duration_s: spec.recording_s,
                    });
                }
            }
        }
        let targets = AgeGroup::ALL
            .iter()
            .map(|&g| {
                let t = SynthSpeaker {
                    speaker_id: format!("target_{}", g.as_str()),
                    age_group: g,
                    f0_hz: base_f0(g),
                    nuisance: (rng.random_range(1000.0..3000.0), 200.0),
                };
                (g, t)
            })
            .collect();
        let (manifest, _) = DatasetManifest::from_recordings(recs)?;
        Ok(SynthCorpus { spec, manifest, speakers, tilts, targets })
    }

    fn render(&self, rec: &RecordingMeta, voice: &SynthSpeaker) -> Waveform {
        let spk = &self.speakers[&rec.speaker_id];
        let tilt = self.tilts[&rec.dialect];
        let fs = TARGET_RATE_HZ as f64;
        let n = (rec.duration_s * fs).round() as usize;
        // Content depends only on the recording, never on the voice
        let mut rng = rng_from_seed(derive_seed(self.spec.seed, &["content".into(), rec.recording_id.as_str().into()]));
        let mut x = vec![0.0; n];
        let mut pos = 0;
        while pos < n {
            let syl = ((rng.random_range(0.15..0.30) * fs) as usize).min(n - pos);
            let gap = (rng.random_range(0.04..0.10) * fs) as usize;
            let v = VOWELS[rng.random_range(0..VOWELS.len())];
            let f0 = spk.f0_hz * (1.0 + rng.random_range(-0.04..0.04));
            let mut block = impulse_train(f0, syl as f64 / fs, TARGET_RATE_HZ);
            for (f, bw) in [(v.0, 80.0), (v.1, 100.0), (v.2, 120.0)] {
                resonate(&mut block, f, bw, TARGET_RATE_HZ);
            }
            let len = block.len();
            for (i, b) in block.iter().enumerate() {
                let taper = 0.5 - 0.5 * (2.0 * PI * i as f64 / len.max(2) as f64).cos();
                if pos + i < n {
                    x[pos + i] += b * taper;
                }
            }
            pos += syl + gap;
        }
        // Speaker colouring: add a resonant copy at the voice's nuisance band
        let mut colour = x.clone();
        resonate(&mut colour, voice.nuisance.0, voice.nuisance.1, TARGET_RATE_HZ);
        let peak = colour.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let xpeak = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        for (a, c) in x.iter_mut().zip(&colour) {
            *a += 0.7 * c * xpeak / peak;
        }
        // Dialect tilt: two cascaded one-pole sections
        for _ in 0..2 {
            let mut y1 = 0.0;
            for v in x.iter_mut() {
                y1 = *v + tilt * y1;
                *v = y1;
            }
        }
        let mut noise = rng_from_seed(derive_seed(self.spec.seed, &["noise".into(), rec.recording_id.as_str().into()]));
        super::normalize_peak(&mut x, 0.5);
        for v in x.iter_mut() {
            *v += 0.002 * noise.sample::<f64, _>(StandardNormal);
        }
        Waveform::from_f64(&x, TARGET_RATE_HZ)
    }

    /// Audio of an original recording.
    pub fn recording_audio(&self, rec: &RecordingMeta) -> Waveform {
        let spk = &self.speakers[&rec.speaker_id];
        self.render(rec, spk)
    }

    /// The same recording rendered with the target's speaker resonance.
    pub fn converted_audio(&self, rec: &RecordingMeta, target: &SynthSpeaker) -> Waveform {
        self.render(rec, target)
    }
}

/// What [`SynthCorpus::materialize`] derives besides the originals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaterializeOptions {
    pub modes: Vec<ConversionMode>,
    pub srfm_k: usize,
    /// Also run SR-FM over converted segments.
    pub srfm_on_converted: bool,
    pub srfm: SrFmConfig,
    pub seed: u64,
}

type Embedded = (Segment, Vec<f32>);

impl SynthCorpus {
    pub fn target_speakers(&self) -> TargetSpeakers {
        let id = |g| Some(self.targets[&g].speaker_id.clone());
        TargetSpeakers { young: id(AgeGroup::Young), middle: id(AgeGroup::Middle), old: id(AgeGroup::Old) }
    }

    /// Segment every recording, add the requested converted and SR-FM
    /// segments, and embed everything with the built-in backend. Segments
    /// stay in memory, so catalog paths are empty.
    pub fn materialize(&self, opts: &MaterializeOptions) -> Result<(SegmentCatalog, EmbeddingTable)> {
        let targets = self.target_speakers();
        let assignments = opts.modes.iter().map(|&m| assign_targets(&self.manifest, m, &targets)).collect::<Result<Vec<_>>>()?;
        let by_id: BTreeMap<&str, &SynthSpeaker> = self.targets.values().map(|t| (t.speaker_id.as_str(), t)).collect();
        let mel = MelExtractor::default();
        let per_rec: Vec<Result<Vec<Embedded>>> = self
            .manifest
            .recordings
            .par_iter()
            .map(|rec| {
                let mut segs = segment_recording(&self.recording_audio(rec), &rec.recording_id, SEGMENT_SECONDS);
                let mut extra = generate_sr_fm_copies(&segs, opts.srfm_k, opts.seed, &opts.srfm)?;
                for a in &assignments {
                    let target = by_id[a.mapping[&rec.age_group].as_str()];
                    let conv = segment_with(&self.converted_audio(rec, target), &rec.recording_id, SEGMENT_SECONDS, Provenance::Converted, a.mode.as_str());
                    if opts.srfm_on_converted {
                        extra.extend(generate_sr_fm_copies(&conv, opts.srfm_k, opts.seed, &opts.srfm)?);
                    }
                    segs.extend(conv);
                }
                segs.extend(extra.into_iter().map(|a| a.segment));
                Ok(segs
                    .into_iter()
                    .map(|s| {
                        let e = mel.embed(&s.waveform);
                        (s, e)
                    })
                    .collect())
            })
            .collect();
        let mut catalog = SegmentCatalog::default();
        let mut table = EmbeddingTable::new(mel.dim())?;
        for items in per_rec {
            let items = items?;
            catalog.extend(SegmentCatalog::from_segments(&self.manifest, items.iter().map(|(s, _)| (s, String::new())))?)?;
            for (s, e) in items {
                table.insert(s.id(), e)?;
            }
        }
        Ok((catalog, table))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::summarize;

    #[test]
    fn overview_shape() {
        let m = overview_manifest(1).unwrap();
        let rows = summarize(&m);
        assert_eq!(rows.iter().map(|r| r.speakers).collect::<Vec<_>>(), vec![139, 237, 198, 574]);
        for (row, (_, _, total, samples)) in rows.iter().zip(OVERVIEW_GROUPS) {
            assert!((row.total_seconds - total).abs() < 1e-6, "{} vs {total}", row.total_seconds);
            let rel = (row.samples as f64 / samples as f64 - 1.0).abs();
            assert!(rel < 0.03, "{}: {} vs {samples}", row.label, row.samples);
        }
        assert_eq!(m.dialects.len(), 20);
    }

    #[test]
    fn corpus_is_deterministic_and_conversion_keeps_timing() {
        let spec = SynthCorpusSpec { speakers_per_dialect: 3, recordings_per_speaker: 1, recording_s: 2.0, ..Default::default() };
        let c = SynthCorpus::generate(spec).unwrap();
        assert_eq!(c.manifest.recordings.len(), 6);
        let rec = &c.manifest.recordings[0];
        let a = c.recording_audio(rec);
        assert_eq!(a, c.recording_audio(rec));
        assert_eq!(a.frames(), 32_000);
        let conv = c.converted_audio(rec, &c.targets[&AgeGroup::Middle]);
        assert_eq!(conv.frames(), a.frames());
        assert_ne!(conv, a);
        assert!(a.samples.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn materialize_counts() {
        let spec = SynthCorpusSpec { speakers_per_dialect: 3, recordings_per_speaker: 1, ..Default::default() };
        let c = SynthCorpus::generate(spec).unwrap();
        let opts = MaterializeOptions { modes: vec![ConversionMode::Rvc1], srfm_k: 2, ..Default::default() };
        let (cat, table) = c.materialize(&opts).unwrap();
        let tags = cat.count_by_tag();
        // 20 s recordings: two windows, one window after removal
        assert_eq!(tags["orig"], 12);
        assert_eq!(tags["rvc1"], 12);
        assert_eq!(tags["srfm0"], 6);
        assert_eq!(tags["srfm1"], 6);
        assert_eq!(table.len(), cat.len());
    }
}
