//! Difference-function (YIN) pitch estimator.

use std::io::Write;

use crate::corpus::Waveform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchConfig {
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    /// Integration window of the difference function.
    pub window_s: f64,
    pub hop_s: f64,
    /// Voicing threshold on the cumulative-mean-normalized difference.
    pub threshold: f64,
    /// Frames quieter than this RMS are unvoiced.
    pub silence_rms: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        PitchConfig { fmin_hz: 60.0, fmax_hz: 400.0, window_s: 0.040, hop_s: 0.010, threshold: 0.2, silence_rms: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PitchContour {
    pub frame_times_s: Vec<f64>,
    /// NaN where unvoiced.
    pub f0_hz: Vec<f64>,
    pub voiced: Vec<bool>,
}

impl PitchContour {
    pub fn voiced_f0(&self) -> impl Iterator<Item = f64> + '_ {
        self.f0_hz.iter().zip(&self.voiced).filter(|(_, &v)| v).map(|(&f, _)| f)
    }

    pub fn voiced_count(&self) -> usize {
        self.voiced.iter().filter(|&&v| v).count()
    }

    pub fn mean_voiced(&self) -> Option<f64> {
        let n = self.voiced_count();
        (n > 0).then(|| self.voiced_f0().sum::<f64>() / n as f64)
    }

    pub fn median_voiced(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.voiced_f0().collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        Some(if v.len().is_multiple_of(2) { (v[m - 1] + v[m]) / 2.0 } else { v[m] })
    }

    /// CSV `time_s,f0_hz,voiced`; unvoiced frames carry an empty f0 cell.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["time_s", "f0_hz", "voiced"]).map_err(|e| Error::csv("pitch", e))?;
        for i in 0..self.frame_times_s.len() {
            let f0 = if self.voiced[i] { format!("{:.3}", self.f0_hz[i]) } else { String::new() };
            wtr.write_record([format!("{:.3}", self.frame_times_s[i]), f0, (self.voiced[i] as u8).to_string()])
                .map_err(|e| Error::csv("pitch", e))?;
        }
        wtr.flush().map_err(|e| Error::io("<pitch writer>", e))
    }
}

pub fn extract_pitch(w: &Waveform, cfg: &PitchConfig) -> Result<PitchContour> {
    if w.channels != 1 {
        return Err(Error::Validation("pitch extraction expects mono audio".into()));
    }
    if !(cfg.fmin_hz > 0.0 && cfg.fmax_hz > cfg.fmin_hz) {
        return Err(Error::Validation(format!("bad pitch range {}..{} Hz", cfg.fmin_hz, cfg.fmax_hz)));
    }
    let rate = w.rate_hz as f64;
    let x = w.to_f64();
    let win = (cfg.window_s * rate).round() as usize;
    let hop = ((cfg.hop_s * rate).round() as usize).max(1);
    let tau_min = ((rate / cfg.fmax_hz).floor() as usize).max(2);
    let tau_max = (rate / cfg.fmin_hz).ceil() as usize;
    let span = win + tau_max + 1;

    let mut contour = PitchContour::default();
    let mut d = vec![0.0; tau_max + 2];
    let mut cmnd = vec![1.0; tau_max + 2];
    let mut start = 0;
    while start + span <= x.len() {
        let frame = &x[start..start + span];
        contour.frame_times_s.push((start as f64 + win as f64 / 2.0) / rate);
        let energy = frame[..win].iter().map(|v| v * v).sum::<f64>() / win as f64;
        let f0 = if energy.sqrt() < cfg.silence_rms {
            None
        } else {
            for (tau, dv) in d.iter_mut().enumerate().take(tau_max + 2).skip(1) {
                *dv = (0..win).map(|j| (frame[j] - frame[j + tau]).powi(2)).sum();
            }
            let mut running = 0.0;
            for tau in 1..=tau_max + 1 {
                running += d[tau];
                cmnd[tau] = if running > 0.0 { d[tau] * tau as f64 / running } else { 1.0 };
            }
            pick_period(&cmnd, tau_min, tau_max, cfg.threshold).map(|tau| rate / tau)
        };
        match f0 {
            Some(f) if f >= cfg.fmin_hz && f <= cfg.fmax_hz => {
                contour.f0_hz.push(f);
                contour.voiced.push(true);
            }
            _ => {
                contour.f0_hz.push(f64::NAN);
                contour.voiced.push(false);
            }
        }
        start += hop;
    }
    Ok(contour)
}

/// First dip below `threshold`, followed down to its local minimum and
/// refined by parabolic interpolation.
fn pick_period(cmnd: &[f64], tau_min: usize, tau_max: usize, threshold: f64) -> Option<f64> {
    let mut tau = (tau_min..=tau_max).find(|&t| cmnd[t] < threshold)?;
    while tau < tau_max && cmnd[tau + 1] < cmnd[tau] {
        tau += 1;
    }
    let (a, b, c) = (cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 1e-12 { (0.5 * (a - c) / denom).clamp(-1.0, 1.0) } else { 0.0 };
    Some(tau as f64 + shift)
}
