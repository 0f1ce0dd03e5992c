//! Paired set summaries of pitch and formants (e.g. originals vs converted).

use rayon::prelude::*;

use super::formant::{extract_formants, FormantConfig};
use super::pitch::{extract_pitch, PitchConfig, PitchContour};
use crate::corpus::Waveform;
use crate::error::{Error, Result};
use crate::stats::mean_std;

/// Per-file means over voiced frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FileAnalysis {
    pub index: usize,
    pub voiced_frames: usize,
    pub formant_frames: usize,
    pub mean_pitch_hz: f64,
    pub mean_formants_hz: [f64; 3],
}

/// Set-level mean and sample standard deviation of the per-file means.
#[derive(Debug, Clone, PartialEq)]
pub struct SetStats {
    pub files: usize,
    pub excluded: Vec<usize>,
    pub mean_pitch_hz: f64,
    pub std_pitch_hz: f64,
    pub mean_f_hz: [f64; 3],
    pub std_f_hz: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSummary {
    pub a: SetStats,
    pub b: SetStats,
    pub per_file_a: Vec<FileAnalysis>,
    pub per_file_b: Vec<FileAnalysis>,
}

impl AnalysisSummary {
    pub fn delta_pitch_hz(&self) -> f64 {
        self.b.mean_pitch_hz - self.a.mean_pitch_hz
    }

    pub fn delta_f_hz(&self) -> [f64; 3] {
        std::array::from_fn(|k| self.b.mean_f_hz[k] - self.a.mean_f_hz[k])
    }

    pub fn delta_std_f_hz(&self) -> [f64; 3] {
        std::array::from_fn(|k| self.b.std_f_hz[k] - self.a.std_f_hz[k])
    }

    /// Human-readable report lines, e.g. `F1 mean: 535.71 Hz to 624.39 Hz`.
    pub fn report_lines(&self) -> Vec<String> {
        let mut out = vec![format!(
            "Pitch: {:.2} ± {:.2} Hz to {:.2} ± {:.2} Hz",
            self.a.mean_pitch_hz, self.a.std_pitch_hz, self.b.mean_pitch_hz, self.b.std_pitch_hz
        )];
        for k in 0..3 {
            out.push(format!("F{} mean: {:.2} Hz to {:.2} Hz", k + 1, self.a.mean_f_hz[k], self.b.mean_f_hz[k]));
            out.push(format!("F{} std: {:.2} to {:.2}", k + 1, self.a.std_f_hz[k], self.b.std_f_hz[k]));
        }
        out
    }
}

/// Index of the pitch frame whose centre is nearest `t`.
fn nearest_frame(c: &PitchContour, t: f64) -> Option<usize> {
    let times = &c.frame_times_s;
    if times.is_empty() {
        return None;
    }
    let i = times.partition_point(|&x| x < t);
    if i == 0 {
        return Some(0);
    }
    if i == times.len() {
        return Some(i - 1);
    }
    Some(if t - times[i - 1] <= times[i] - t { i - 1 } else { i })
}

/// Mean voiced pitch and mean F1-F3 over reliable frames that fall on voiced
/// pitch frames. `None` if the file has no voiced frames or no reliable
/// voiced formant frames.
pub fn analyze_file(w: &Waveform, index: usize, pcfg: &PitchConfig, fcfg: &FormantConfig) -> Result<Option<FileAnalysis>> {
    let contour = extract_pitch(w, pcfg)?;
    let Some(mean_pitch_hz) = contour.mean_voiced() else {
        return Ok(None);
    };
    let track = extract_formants(w, fcfg)?;
    let mut sums = [0.0; 3];
    let mut n = 0usize;
    for f in &track.frames {
        let Some(v) = f.formants else { continue };
        if nearest_frame(&contour, f.time_s).is_some_and(|i| contour.voiced[i]) {
            for k in 0..3 {
                sums[k] += v[k];
            }
            n += 1;
        }
    }
    if n == 0 {
        return Ok(None);
    }
    Ok(Some(FileAnalysis {
        index,
        voiced_frames: contour.voiced_count(),
        formant_frames: n,
        mean_pitch_hz,
        mean_formants_hz: sums.map(|s| s / n as f64),
    }))
}

fn analyze_set(set: &[Waveform], name: &str) -> Result<(SetStats, Vec<FileAnalysis>)> {
    let (pcfg, fcfg) = (PitchConfig::default(), FormantConfig::default());
    let results = set
        .par_iter()
        .enumerate()
        .map(|(i, w)| analyze_file(w, i, &pcfg, &fcfg))
        .collect::<Result<Vec<_>>>()?;
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Some(a) => kept.push(a),
            None => {
                log::warn!("set {name}: file {i} has no voiced frames; excluded");
                excluded.push(i);
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::Validation(format!("set {name}: no file has voiced frames")));
    }
    let (mean_pitch_hz, std_pitch_hz) = mean_std(&kept.iter().map(|a| a.mean_pitch_hz).collect::<Vec<_>>());
    let mut mean_f_hz = [0.0; 3];
    let mut std_f_hz = [0.0; 3];
    for k in 0..3 {
        (mean_f_hz[k], std_f_hz[k]) = mean_std(&kept.iter().map(|a| a.mean_formants_hz[k]).collect::<Vec<_>>());
    }
    let stats = SetStats { files: kept.len(), excluded, mean_pitch_hz, std_pitch_hz, mean_f_hz, std_f_hz };
    Ok((stats, kept))
}

/// Summarize two sets of recordings. Files without voiced frames are
/// excluded with a warning; a set with nothing left is an error.
pub fn summarize_pairs(set_a: &[Waveform], set_b: &[Waveform]) -> Result<AnalysisSummary> {
    if set_a.is_empty() || set_b.is_empty() {
        return Err(Error::Validation("both sets must be nonempty".into()));
    }
    let (a, per_file_a) = analyze_set(set_a, "a")?;
    let (b, per_file_b) = analyze_set(set_b, "b")?;
    Ok(AnalysisSummary { a, b, per_file_a, per_file_b })
}
