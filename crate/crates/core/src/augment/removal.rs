use rand::Rng;

use crate::corpus::{Waveform, TARGET_RATE_HZ};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentRemovalSpec {
    /// Fraction of the duration to remove.
    pub ratio: f64,
    /// Length of each removed chunk in seconds.
    pub chunk_s: f64,
}

impl Default for SegmentRemovalSpec {
    fn default() -> Self {
        SegmentRemovalSpec { ratio: 0.5, chunk_s: 0.3 }
    }
}

/// Sorted, pairwise disjoint chunks of equal length, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct RemovalPlan {
    pub duration_s: f64,
    pub chunk_s: f64,
    pub intervals: Vec<(f64, f64)>,
}

impl RemovalPlan {
    pub fn removed_s(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }
}

/// `floor(ratio * duration / chunk)`, tolerant to rounding in the quotient.
pub fn chunk_count(duration_s: f64, spec: &SegmentRemovalSpec) -> usize {
    (spec.ratio * duration_s / spec.chunk_s + 1e-9).floor().max(0.0) as usize
}

/// Draw chunk positions uniformly among all disjoint placements.
///
/// Positions live on the 16 kHz sample grid: the free space left after
/// reserving every chunk is split by sorted uniform draws, which gives each
/// ordered disjoint configuration equal probability without rejection.
pub fn plan_segment_removal(duration_s: f64, spec: &SegmentRemovalSpec, seed: u64) -> Result<RemovalPlan> {
    if !(spec.chunk_s.is_finite() && spec.chunk_s > 0.0) {
        return Err(Error::Validation(format!("chunk length must be positive, got {}", spec.chunk_s)));
    }
    if !(spec.ratio.is_finite() && spec.ratio >= 0.0) {
        return Err(Error::Validation(format!("removal ratio must be non-negative, got {}", spec.ratio)));
    }
    if duration_s < spec.chunk_s {
        return Err(Error::InfeasiblePlan(format!(
            "duration {duration_s} s is shorter than one {} s chunk",
            spec.chunk_s
        )));
    }
    let grid = TARGET_RATE_HZ as f64;
    let total = (duration_s * grid).round() as usize;
    let chunk = (spec.chunk_s * grid).round() as usize;
    let n = chunk_count(duration_s, spec);
    if spec.ratio > 1.0 || n * chunk > total {
        return Err(Error::InfeasiblePlan(format!(
            "{n} chunks of {} s exceed {duration_s} s",
            spec.chunk_s
        )));
    }
    let free = total - n * chunk;
    let mut rng = rng_from_seed(seed);
    let mut gaps: Vec<usize> = (0..n).map(|_| rng.random_range(0..=free)).collect();
    gaps.sort_unstable();
    let intervals = gaps
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let start = g + i * chunk;
            (start as f64 / grid, (start + chunk) as f64 / grid)
        })
        .collect();
    Ok(RemovalPlan { duration_s, chunk_s: spec.chunk_s, intervals })
}

/// Excise the planned chunks and concatenate what remains.
pub fn apply_segment_removal(w: &Waveform, plan: &RemovalPlan) -> Result<Waveform> {
    if w.channels != 1 {
        return Err(Error::Validation("segment removal expects mono audio".into()));
    }
    let rate = w.rate_hz as f64;
    let len = w.samples.len();
    let mut out = Vec::with_capacity(len);
    let mut cursor = 0usize;
    for &(start_s, end_s) in &plan.intervals {
        if !(start_s >= 0.0 && end_s > start_s) {
            return Err(Error::Validation(format!("bad removal interval ({start_s}, {end_s})")));
        }
        let start = (start_s * rate).round() as usize;
        let end = start + ((end_s - start_s) * rate).round() as usize;
        if end > len {
            return Err(Error::Validation(format!(
                "removal interval ({start_s}, {end_s}) exceeds {} s of audio",
                w.duration_s()
            )));
        }
        if start < cursor {
            return Err(Error::Validation(format!("removal interval ({start_s}, {end_s}) overlaps its predecessor")));
        }
        out.extend_from_slice(&w.samples[cursor..start]);
        cursor = end;
    }
    out.extend_from_slice(&w.samples[cursor..]);
    Ok(Waveform::mono(out, w.rate_hz))
}
