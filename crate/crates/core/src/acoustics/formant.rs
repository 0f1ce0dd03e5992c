//! Formant tracking by autocorrelation LPC and polynomial root solving.

use std::io::Write;

use nalgebra::DMatrix;

use crate::corpus::Waveform;
use crate::dsp::window::gaussian;
use crate::dsp::Resampler;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormantConfig {
    pub pre_emphasis: f64,
    pub analysis_rate_hz: u32,
    pub window_s: f64,
    pub hop_s: f64,
    pub order: usize,
    /// Resonances wider than this are not formant candidates.
    pub max_bandwidth_hz: f64,
    /// Candidates below this frequency (near DC) are ignored.
    pub min_freq_hz: f64,
    /// Frames quieter than this RMS are skipped as low-confidence.
    pub silence_rms: f64,
    /// Frames whose LPC prediction gain (r0 / residual energy) falls below
    /// this are treated as unstructured noise.
    pub min_prediction_gain_db: f64,
}

impl Default for FormantConfig {
    fn default() -> Self {
        FormantConfig {
            pre_emphasis: 0.97,
            analysis_rate_hz: 10_000,
            window_s: 0.025,
            hop_s: 0.010,
            order: 12,
            max_bandwidth_hz: 400.0,
            min_freq_hz: 90.0,
            silence_rms: 1e-4,
            min_prediction_gain_db: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormantFrame {
    pub time_s: f64,
    /// F1 < F2 < F3, present when the frame is reliable.
    pub formants: Option<[f64; 3]>,
    /// 0 for unreliable frames, otherwise 1 - mean(bandwidth) / max_bandwidth.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FormantTrack {
    pub frames: Vec<FormantFrame>,
}

impl FormantTrack {
    pub fn reliable(&self) -> impl Iterator<Item = &[f64; 3]> {
        self.frames.iter().filter_map(|f| f.formants.as_ref())
    }

    pub fn reliable_count(&self) -> usize {
        self.reliable().count()
    }

    /// Per-formant median over reliable frames.
    pub fn medians(&self) -> Option<[f64; 3]> {
        let rel: Vec<&[f64; 3]> = self.reliable().collect();
        if rel.is_empty() {
            return None;
        }
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let mut v: Vec<f64> = rel.iter().map(|f| f[k]).collect();
            v.sort_by(f64::total_cmp);
            let m = v.len() / 2;
            *o = if v.len().is_multiple_of(2) { (v[m - 1] + v[m]) / 2.0 } else { v[m] };
        }
        Some(out)
    }

    /// CSV `time_s,f1,f2,f3,conf`; unreliable frames carry empty formant cells.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["time_s", "f1", "f2", "f3", "conf"]).map_err(|e| Error::csv("formants", e))?;
        for f in &self.frames {
            let cells: [String; 3] = match f.formants {
                Some(v) => v.map(|x| format!("{x:.2}")),
                None => [String::new(), String::new(), String::new()],
            };
            wtr.write_record([
                format!("{:.3}", f.time_s),
                cells[0].clone(),
                cells[1].clone(),
                cells[2].clone(),
                format!("{:.3}", f.confidence),
            ])
            .map_err(|e| Error::csv("formants", e))?;
        }
        wtr.flush().map_err(|e| Error::io("<formant writer>", e))
    }
}

/// Levinson-Durbin recursion. Returns predictor polynomial `[1, a1, .., ap]`
/// and the residual energy, or `None` when the autocorrelation is not
/// positive definite.
pub(crate) fn levinson(r: &[f64], order: usize) -> Option<(Vec<f64>, f64)> {
    if r[0] <= 0.0 {
        return None;
    }
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=order {
        let acc: f64 = (1..i).map(|j| a[j] * r[i - j]).sum::<f64>() + r[i];
        let k = -acc / err;
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if err <= 0.0 || k.abs() >= 1.0 {
            return None;
        }
    }
    Some((a, err))
}

fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|lag| x.iter().zip(&x[lag..]).map(|(a, b)| a * b).sum())
        .collect()
}

/// Roots of `1 + a1 z^-1 + ... + ap z^-p` via companion-matrix eigenvalues.
fn predictor_roots(a: &[f64]) -> Vec<nalgebra::Complex<f64>> {
    let p = a.len() - 1;
    let mut m = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        m[(0, j)] = -a[j + 1];
    }
    for i in 1..p {
        m[(i, i - 1)] = 1.0;
    }
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn extract_formants(w: &Waveform, cfg: &FormantConfig) -> Result<FormantTrack> {
    if w.channels != 1 {
        return Err(Error::Validation("formant extraction expects mono audio".into()));
    }
    let x = w.to_f64();
    let mut emph = Vec::with_capacity(x.len());
    let mut prev = 0.0;
    for &v in &x {
        emph.push(v - cfg.pre_emphasis * prev);
        prev = v;
    }
    let fs = cfg.analysis_rate_hz as f64;
    let y = Resampler::new(w.rate_hz, cfg.analysis_rate_hz).process(&emph);
    let win = (cfg.window_s * fs).round() as usize;
    let hop = ((cfg.hop_s * fs).round() as usize).max(1);
    let window = gaussian(win);
    let nyquist = fs / 2.0;

    let mut track = FormantTrack::default();
    let mut start = 0;
    let mut frame = vec![0.0; win];
    while start + win <= y.len() {
        let time_s = (start as f64 + win as f64 / 2.0) / fs;
        let raw = &y[start..start + win];
        let rms = (raw.iter().map(|v| v * v).sum::<f64>() / win as f64).sqrt();
        start += hop;
        let unreliable = FormantFrame { time_s, formants: None, confidence: 0.0 };
        if rms < cfg.silence_rms {
            track.frames.push(unreliable);
            continue;
        }
        for ((f, &s), &g) in frame.iter_mut().zip(raw).zip(&window) {
            *f = s * g;
        }
        let r = autocorrelation(&frame, cfg.order);
        let Some((a, err)) = levinson(&r, cfg.order) else {
            track.frames.push(unreliable);
            continue;
        };
        if 10.0 * (r[0] / err).log10() < cfg.min_prediction_gain_db {
            track.frames.push(unreliable);
            continue;
        }
        let roots = predictor_roots(&a);
        if roots.iter().any(|z| z.norm() >= 1.0) {
            track.frames.push(unreliable);
            continue;
        }
        let mut cands: Vec<(f64, f64)> = roots
            .iter()
            .filter(|z| z.im > 0.0)
            .map(|z| (z.arg() * fs / (2.0 * std::f64::consts::PI), -z.norm().ln() * fs / std::f64::consts::PI))
            .filter(|&(f, bw)| f > cfg.min_freq_hz && f < nyquist - 50.0 && bw < cfg.max_bandwidth_hz)
            .collect();
        cands.sort_by(|p, q| p.0.total_cmp(&q.0));
        if cands.len() < 3 || !(cands[0].0 < cands[1].0 && cands[1].0 < cands[2].0) {
            track.frames.push(unreliable);
            continue;
        }
        let conf = 1.0 - cands[..3].iter().map(|c| c.1).sum::<f64>() / (3.0 * cfg.max_bandwidth_hz);
        track.frames.push(FormantFrame {
            time_s,
            formants: Some([cands[0].0, cands[1].0, cands[2].0]),
            confidence: conf,
        });
    }
    Ok(track)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn within(got: [f64; 3], want: [f64; 3], tol: f64) -> bool {
        got.iter().zip(&want).all(|(g, w)| (g / w - 1.0).abs() <= tol)
    }

    #[test]
    fn recovers_synthetic_vowel() {
        let x = synth::vowel(120.0, &[(700.0, 80.0), (1220.0, 90.0), (2600.0, 120.0)], 1.0, 16_000);
        let t = extract_formants(&Waveform::from_f64(&x, 16_000), &FormantConfig::default()).unwrap();
        let med = t.medians().expect("reliable frames");
        assert!(within(med, [700.0, 1220.0, 2600.0], 0.05), "{med:?}");
        for f in t.reliable() {
            assert!(f[0] < f[1] && f[1] < f[2]);
        }
    }

    #[test]
    fn recovers_shifted_vowel() {
        let x = synth::vowel(118.0, &[(624.0, 80.0), (1598.0, 90.0), (2666.0, 120.0)], 1.0, 16_000);
        let t = extract_formants(&Waveform::from_f64(&x, 16_000), &FormantConfig::default()).unwrap();
        let med = t.medians().expect("reliable frames");
        assert!(within(med, [624.0, 1598.0, 2666.0], 0.05), "{med:?}");
    }

    #[test]
    fn white_noise_is_mostly_unreliable() {
        let x = synth::white_noise(1.0, 0.1, 16_000, 3);
        let t = extract_formants(&Waveform::from_f64(&x, 16_000), &FormantConfig::default()).unwrap();
        assert!(t.reliable_count() * 2 <= t.frames.len(), "{} of {}", t.reliable_count(), t.frames.len());
    }

    #[test]
    fn levinson_on_ar1() {
        // r[k] = 0.9^k is the autocorrelation of an AR(1) process x = 0.9 x[-1] + e
        let r: Vec<f64> = (0..4).map(|k| 0.9f64.powi(k)).collect();
        let (a, err) = levinson(&r, 3).unwrap();
        assert!((err - (1.0 - 0.81)).abs() < 1e-12);
        assert!((a[1] + 0.9).abs() < 1e-12 && a[2].abs() < 1e-12 && a[3].abs() < 1e-12);
    }

    #[test]
    fn silence_gives_no_formants() {
        let w = Waveform::mono(vec![0.0; 8000], 16_000);
        let t = extract_formants(&w, &FormantConfig::default()).unwrap();
        assert!(!t.frames.is_empty());
        assert_eq!(t.reliable_count(), 0);
    }
}
