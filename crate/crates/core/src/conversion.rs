//! Boundary to externally converted audio: target assignment, conversion
//! manifests and per-pair drift screening.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::acoustics::{extract_pitch, PitchConfig};
use crate::corpus::{read_wav, AgeGroup, DatasetManifest, Waveform, TARGET_RATE_HZ};
use crate::error::{Error, Result};
use crate::stats::mean_std;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConversionMode {
    /// One middle-aged target for every recording.
    Rvc1,
    /// One age-matched target per age group.
    Rvc3,
}

impl ConversionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConversionMode::Rvc1 => "rvc1",
            ConversionMode::Rvc3 => "rvc3",
        }
    }
}

impl fmt::Display for ConversionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConversionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rvc1" => Ok(ConversionMode::Rvc1),
            "rvc3" => Ok(ConversionMode::Rvc3),
            other => Err(Error::Config(format!("unknown conversion mode {other:?}"))),
        }
    }
}

/// Configured target speaker ids per age group.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TargetSpeakers {
    pub young: Option<String>,
    pub middle: Option<String>,
    pub old: Option<String>,
}

impl TargetSpeakers {
    pub fn get(&self, g: AgeGroup) -> Option<&str> {
        match g {
            AgeGroup::Young => self.young.as_deref(),
            AgeGroup::Middle => self.middle.as_deref(),
            AgeGroup::Old => self.old.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetAssignment {
    pub mode: ConversionMode,
    pub mapping: BTreeMap<AgeGroup, String>,
}

impl TargetAssignment {
    pub fn target_for(&self, g: AgeGroup) -> Option<&str> {
        self.mapping.get(&g).map(String::as_str)
    }
}

/// Map every age group present in `manifest` to a target speaker.
pub fn assign_targets(manifest: &DatasetManifest, mode: ConversionMode, targets: &TargetSpeakers) -> Result<TargetAssignment> {
    let mut mapping = BTreeMap::new();
    match mode {
        ConversionMode::Rvc1 => {
            let t = targets
                .middle
                .as_deref()
                .ok_or_else(|| Error::Config("rvc1 needs a middle-aged target speaker".into()))?;
            for &g in &manifest.age_groups {
                mapping.insert(g, t.to_string());
            }
        }
        ConversionMode::Rvc3 => {
            for &g in &manifest.age_groups {
                let t = targets
                    .get(g)
                    .ok_or_else(|| Error::Config(format!("rvc3 needs a target speaker for age group {g}")))?;
                mapping.insert(g, t.to_string());
            }
            let distinct: HashSet<&String> = mapping.values().collect();
            if distinct.len() != mapping.len() {
                return Err(Error::Config("rvc3 targets must be distinct across age groups".into()));
            }
        }
    }
    Ok(TargetAssignment { mode, mapping })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConversionPair {
    pub recording_id: String,
    pub converted_path: PathBuf,
    pub target_speaker_id: String,
    pub mode: ConversionMode,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConversionManifest {
    pub pairs: Vec<ConversionPair>,
}

const CONV_HEADER: [&str; 4] = ["recording_id", "converted_path", "target_speaker_id", "mode"];

impl ConversionManifest {
    pub fn parse<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::csv("conversion manifest", e))?;
        if headers.iter().collect::<Vec<_>>() != CONV_HEADER {
            return Err(Error::Format {
                what: "conversion manifest".into(),
                line: 1,
                msg: format!("expected header {}", CONV_HEADER.join(",")),
            });
        }
        let mut pairs = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::csv("conversion manifest", e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let mode = rec[3].parse::<ConversionMode>().map_err(|e| Error::Format {
                what: "conversion manifest".into(),
                line,
                msg: e.to_string(),
            })?;
            pairs.push(ConversionPair {
                recording_id: rec[0].to_string(),
                converted_path: PathBuf::from(&rec[1]),
                target_speaker_id: rec[2].to_string(),
                mode,
            });
        }
        Ok(ConversionManifest { pairs })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(f))
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(CONV_HEADER).map_err(|e| Error::csv("conversion manifest", e))?;
        for p in &self.pairs {
            wtr.write_record([
                p.recording_id.as_str(),
                &p.converted_path.to_string_lossy(),
                &p.target_speaker_id,
                p.mode.as_str(),
            ])
            .map_err(|e| Error::csv("conversion manifest", e))?;
        }
        wtr.flush().map_err(|e| Error::io("<conversion manifest writer>", e))
    }

    /// Pairs for one mode keyed by recording id.
    pub fn for_mode(&self, mode: ConversionMode) -> BTreeMap<&str, &ConversionPair> {
        self.pairs.iter().filter(|p| p.mode == mode).map(|p| (p.recording_id.as_str(), p)).collect()
    }

    /// Check that `mode` is total over `dataset`: every recording has exactly
    /// one converted file, no pair points at an unknown recording, targets
    /// agree with `assignment`, and (when `base_dir` is given) every file exists.
    pub fn validate(&self, dataset: &DatasetManifest, assignment: &TargetAssignment, base_dir: Option<&Path>) -> Result<()> {
        let mode = assignment.mode;
        let mut seen = HashSet::new();
        for p in self.pairs.iter().filter(|p| p.mode == mode) {
            if !seen.insert(p.recording_id.as_str()) {
                return Err(Error::DuplicateKey(format!("{} ({mode})", p.recording_id)));
            }
            let rec = dataset
                .recording(&p.recording_id)
                .ok_or_else(|| Error::Validation(format!("converted pair for unknown recording {}", p.recording_id)))?;
            let want = assignment.target_for(rec.age_group).unwrap_or_default();
            if p.target_speaker_id != want {
                return Err(Error::Validation(format!(
                    "recording {} converted to {} but {mode} assigns {want} to {}",
                    p.recording_id, p.target_speaker_id, rec.age_group
                )));
            }
            if let Some(base) = base_dir {
                let path = base.join(&p.converted_path);
                if !path.is_file() {
                    return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
                }
            }
        }
        if let Some(r) = dataset.recordings.iter().find(|r| !seen.contains(r.recording_id.as_str())) {
            return Err(Error::MissingConverted(format!("{} ({mode})", r.recording_id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCheckConfig {
    pub max_drift_s: f64,
    /// Relative mean-pitch change above which a pair is flagged.
    pub pitch_warn_ratio: f64,
    pub pitch: PitchConfig,
}

impl Default for PairCheckConfig {
    fn default() -> Self {
        PairCheckConfig { max_drift_s: 0.1, pitch_warn_ratio: 0.10, pitch: PitchConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    pub rate_ok: bool,
    pub channels_ok: bool,
    /// Converted minus original duration.
    pub duration_drift_s: f64,
    /// `None` when the file has no voiced frames or could not be analysed.
    pub mean_pitch_orig_hz: Option<f64>,
    pub mean_pitch_conv_hz: Option<f64>,
    pub verdict: Verdict,
}

impl PairReport {
    /// Relative change in mean voiced pitch, when both sides are voiced.
    pub fn pitch_delta_ratio(&self) -> Option<f64> {
        Some(self.mean_pitch_conv_hz? / self.mean_pitch_orig_hz? - 1.0)
    }
}

fn mean_pitch(w: &Waveform, cfg: &PitchConfig) -> Option<f64> {
    if w.channels != 1 {
        return None;
    }
    extract_pitch(w, cfg).ok()?.mean_voiced()
}

pub fn validate_converted_pair(orig: &Waveform, conv: &Waveform, cfg: &PairCheckConfig) -> PairReport {
    let rate_ok = orig.rate_hz == TARGET_RATE_HZ && conv.rate_hz == TARGET_RATE_HZ;
    let channels_ok = orig.channels == 1 && conv.channels == 1;
    let duration_drift_s = conv.duration_s() - orig.duration_s();
    let po = mean_pitch(orig, &cfg.pitch);
    let pc = mean_pitch(conv, &cfg.pitch);
    let mut report = PairReport {
        rate_ok,
        channels_ok,
        duration_drift_s,
        mean_pitch_orig_hz: po,
        mean_pitch_conv_hz: pc,
        verdict: Verdict::Pass,
    };
    report.verdict = if !rate_ok || !channels_ok || duration_drift_s.abs() > cfg.max_drift_s {
        Verdict::Fail
    } else {
        match report.pitch_delta_ratio() {
            Some(r) if r.abs() <= cfg.pitch_warn_ratio => Verdict::Pass,
            _ => Verdict::Warn,
        }
    };
    report
}

/// File-based variant; decoding failures name the offending path.
pub fn validate_converted_files(orig: &Path, conv: &Path, cfg: &PairCheckConfig) -> Result<PairReport> {
    let o = read_wav(orig)?;
    let c = read_wav(conv)?;
    Ok(validate_converted_pair(&o, &c, cfg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PitchStabilityReport {
    pub pairs_used: usize,
    /// Indices of pairs dropped because one side had no voiced frames.
    pub excluded: Vec<usize>,
    pub orig_mean_hz: f64,
    pub orig_std_hz: f64,
    pub conv_mean_hz: f64,
    pub conv_std_hz: f64,
    pub mean_abs_delta_hz: f64,
}

impl fmt::Display for PitchStabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.2} ± {:.2} Hz to {:.2} ± {:.2} Hz (mean |delta| {:.2} Hz over {} pairs)",
            self.orig_mean_hz, self.orig_std_hz, self.conv_mean_hz, self.conv_std_hz, self.mean_abs_delta_hz, self.pairs_used
        )
    }
}

pub fn pitch_stability_report(pairs: &[(Waveform, Waveform)], cfg: &PitchConfig) -> Result<PitchStabilityReport> {
    if pairs.is_empty() {
        return Err(Error::Validation("pitch stability report needs at least one pair".into()));
    }
    let means: Vec<(Option<f64>, Option<f64>)> =
        pairs.par_iter().map(|(o, c)| (mean_pitch(o, cfg), mean_pitch(c, cfg))).collect();
    pitch_stability_from_means(&means)
}

/// Same report from per-pair mean voiced pitch already computed, e.g. the
/// fields of [`PairReport`]. `None` marks an unvoiced side.
pub fn pitch_stability_from_means(means: &[(Option<f64>, Option<f64>)]) -> Result<PitchStabilityReport> {
    if means.is_empty() {
        return Err(Error::Validation("pitch stability report needs at least one pair".into()));
    }
    let mut orig = Vec::new();
    let mut conv = Vec::new();
    let mut excluded = Vec::new();
    for (i, m) in means.iter().enumerate() {
        match *m {
            (Some(a), Some(b)) => {
                orig.push(a);
                conv.push(b);
            }
            _ => {
                log::warn!("pair {i}: no voiced frames on one side; excluded");
                excluded.push(i);
            }
        }
    }
    if orig.is_empty() {
        return Err(Error::Validation("no pair has voiced frames on both sides".into()));
    }
    let (orig_mean_hz, orig_std_hz) = mean_std(&orig);
    let (conv_mean_hz, conv_std_hz) = mean_std(&conv);
    let mean_abs_delta_hz = orig.iter().zip(&conv).map(|(a, b)| (b - a).abs()).sum::<f64>() / orig.len() as f64;
    Ok(PitchStabilityReport {
        pairs_used: orig.len(),
        excluded,
        orig_mean_hz,
        orig_std_hz,
        conv_mean_hz,
        conv_std_hz,
        mean_abs_delta_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::RecordingMeta;
    use crate::dsp::Resampler;
    use crate::synth;

    fn manifest(groups: &[AgeGroup]) -> DatasetManifest {
        let mut recs = Vec::new();
        for (gi, &g) in groups.iter().enumerate() {
            for s in 0..3 {
                recs.push(RecordingMeta {
                    recording_id: format!("r{gi}_{s}"),
                    speaker_id: format!("spk{gi}_{s}"),
                    dialect: "d".into(),
                    age_group: g,
                    path: format!("r{gi}_{s}.wav"),
                    duration_s: 12.0,
                });
            }
        }
        DatasetManifest::from_recordings(recs).unwrap().0
    }

    fn targets() -> TargetSpeakers {
        TargetSpeakers { young: Some("ty".into()), middle: Some("tm".into()), old: Some("to".into()) }
    }

    #[test]
    fn rvc1_maps_everything_to_middle() {
        let a = assign_targets(&manifest(&AgeGroup::ALL), ConversionMode::Rvc1, &targets()).unwrap();
        assert_eq!(a.mapping.len(), 3);
        assert!(a.mapping.values().all(|t| t == "tm"));
    }

    #[test]
    fn rvc3_is_age_matched() {
        let a = assign_targets(&manifest(&AgeGroup::ALL), ConversionMode::Rvc3, &targets()).unwrap();
        assert_eq!(a.target_for(AgeGroup::Young), Some("ty"));
        assert_eq!(a.target_for(AgeGroup::Middle), Some("tm"));
        assert_eq!(a.target_for(AgeGroup::Old), Some("to"));
    }

    #[test]
    fn rvc3_restricted_to_present_groups() {
        let only_m = TargetSpeakers { middle: Some("tm".into()), ..Default::default() };
        let a = assign_targets(&manifest(&[AgeGroup::Middle]), ConversionMode::Rvc3, &only_m).unwrap();
        assert_eq!(a.mapping.len(), 1);
        let err = assign_targets(&manifest(&AgeGroup::ALL), ConversionMode::Rvc3, &only_m).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn rvc3_rejects_shared_targets() {
        let t = TargetSpeakers { young: Some("x".into()), middle: Some("x".into()), old: Some("o".into()) };
        assert!(assign_targets(&manifest(&AgeGroup::ALL), ConversionMode::Rvc3, &t).is_err());
    }

    fn conv_manifest(m: &DatasetManifest, a: &TargetAssignment) -> ConversionManifest {
        ConversionManifest {
            pairs: m
                .recordings
                .iter()
                .map(|r| ConversionPair {
                    recording_id: r.recording_id.clone(),
                    converted_path: format!("conv/{}.wav", r.recording_id).into(),
                    target_speaker_id: a.target_for(r.age_group).unwrap().to_string(),
                    mode: a.mode,
                })
                .collect(),
        }
    }

    #[test]
    fn manifest_totality_and_round_trip() {
        let m = manifest(&AgeGroup::ALL);
        let a = assign_targets(&m, ConversionMode::Rvc3, &targets()).unwrap();
        let cm = conv_manifest(&m, &a);
        cm.validate(&m, &a, None).unwrap();
        let mut buf = Vec::new();
        cm.write(&mut buf).unwrap();
        assert_eq!(ConversionManifest::parse(&buf[..]).unwrap(), cm);

        let mut missing = cm.clone();
        missing.pairs.pop();
        assert!(matches!(missing.validate(&m, &a, None), Err(Error::MissingConverted(_))));

        let mut dup = cm.clone();
        dup.pairs.push(cm.pairs[0].clone());
        assert!(matches!(dup.validate(&m, &a, None), Err(Error::DuplicateKey(_))));

        let mut unknown = cm.clone();
        unknown.pairs[0].recording_id = "nope".into();
        assert!(unknown.validate(&m, &a, None).is_err());

        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(cm.validate(&m, &a, Some(dir.path())), Err(Error::Io { .. })));
    }

    fn saw(f0: f64) -> Waveform {
        Waveform::from_f64(&synth::sawtooth(f0, 1.5, 0.4, 16_000), 16_000)
    }

    #[test]
    fn identical_pair_passes() {
        let w = saw(118.0);
        let r = validate_converted_pair(&w, &w, &PairCheckConfig::default());
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.duration_drift_s, 0.0);
        assert_eq!(r.pitch_delta_ratio(), Some(0.0));
    }

    #[test]
    fn wrong_rate_fails() {
        let w = saw(118.0);
        let up = Resampler::new(16_000, 22_050).process(&w.to_f64());
        let r = validate_converted_pair(&w, &Waveform::from_f64(&up, 22_050), &PairCheckConfig::default());
        assert_eq!(r.verdict, Verdict::Fail);
        assert!(!r.rate_ok);
    }

    #[test]
    fn pitch_shift_warns() {
        let r = validate_converted_pair(&saw(118.0), &saw(118.0 * 1.2), &PairCheckConfig::default());
        assert_eq!(r.verdict, Verdict::Warn);
        assert!((r.pitch_delta_ratio().unwrap() - 0.2).abs() < 0.02);
    }

    #[test]
    fn drift_fails_and_tightening_never_passes() {
        let o = saw(118.0);
        let mut longer = o.samples.clone();
        longer.extend(std::iter::repeat_n(0.0, 2400)); // +0.15 s
        let c = Waveform::mono(longer, 16_000);
        let mut cfg = PairCheckConfig::default();
        assert_eq!(validate_converted_pair(&o, &c, &cfg).verdict, Verdict::Fail);
        cfg.max_drift_s = 0.2;
        assert_ne!(validate_converted_pair(&o, &c, &cfg).verdict, Verdict::Fail);
        for tol in [0.1, 0.05, 0.0] {
            cfg.max_drift_s = tol;
            assert_eq!(validate_converted_pair(&o, &c, &cfg).verdict, Verdict::Fail);
        }
    }

    #[test]
    fn undecodable_file_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.wav");
        std::fs::write(&bad, b"not a wav").unwrap();
        let err = validate_converted_files(&bad, &bad, &PairCheckConfig::default()).unwrap_err();
        assert!(err.to_string().contains("bad.wav"), "{err}");
    }

    #[test]
    fn stability_on_sawtooth_pairs() {
        let pairs: Vec<_> = (0..10).map(|_| (saw(118.0), saw(118.0))).collect();
        let r = pitch_stability_report(&pairs, &PitchConfig::default()).unwrap();
        assert!((r.orig_mean_hz - 118.0).abs() < 2.0 && (r.conv_mean_hz - 118.0).abs() < 2.0);
        assert!(r.mean_abs_delta_hz < 1.0);
        assert_eq!(r.mean_abs_delta_hz, 0.0);
        let text = r.to_string();
        assert!(text.contains(" ± ") && text.contains(" Hz to "));
    }

    #[test]
    fn stability_excludes_silent_pairs() {
        let silent = Waveform::mono(vec![0.0; 16_000], 16_000);
        let pairs = vec![(saw(118.0), saw(118.0)), (silent.clone(), silent)];
        let r = pitch_stability_report(&pairs, &PitchConfig::default()).unwrap();
        assert_eq!(r.excluded, vec![1]);
        assert_eq!(r.pairs_used, 1);
    }

    #[test]
    fn stability_from_means_by_hand() {
        let r = pitch_stability_from_means(&[(Some(100.0), Some(110.0)), (None, Some(90.0)), (Some(120.0), Some(110.0))]).unwrap();
        assert_eq!(r.excluded, vec![1]);
        assert_eq!(r.pairs_used, 2);
        assert_eq!(r.orig_mean_hz, 110.0);
        assert_eq!(r.conv_mean_hz, 110.0);
        assert_eq!(r.mean_abs_delta_hz, 10.0);
        assert!(pitch_stability_from_means(&[(None, None)]).is_err());
    }
}
