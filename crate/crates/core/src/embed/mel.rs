use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::corpus::Waveform;
use crate::dsp::window::hann_periodic;

pub const LOG_FLOOR: f64 = 1e-10;
pub const BUILTIN_DIM: usize = 128;

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Log-mel band statistics: per-band mean and standard deviation over frames.
pub struct MelExtractor {
    rate_hz: u32,
    win: usize,
    hop: usize,
    n_fft: usize,
    window: Vec<f64>,
    /// Per band: first bin and triangular weights.
    bands: Vec<(usize, Vec<f64>)>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MelExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MelExtractor")
            .field("rate_hz", &self.rate_hz)
            .field("win", &self.win)
            .field("hop", &self.hop)
            .field("n_fft", &self.n_fft)
            .field("n_bands", &self.bands.len())
            .finish()
    }
}

impl Default for MelExtractor {
    fn default() -> Self {
        MelExtractor::new(16_000, 64)
    }
}

impl MelExtractor {
    /// 25 ms window, 10 ms hop, HTK-style triangular filters spanning 0..Nyquist.
    pub fn new(rate_hz: u32, n_bands: usize) -> Self {
        let win = (rate_hz as usize * 25) / 1000;
        let hop = (rate_hz as usize * 10) / 1000;
        let n_fft = win.next_power_of_two();
        let n_bins = n_fft / 2 + 1;
        let bin_hz = rate_hz as f64 / n_fft as f64;
        let top = hz_to_mel(rate_hz as f64 / 2.0);
        let edges: Vec<f64> = (0..n_bands + 2).map(|i| mel_to_hz(top * i as f64 / (n_bands + 1) as f64)).collect();
        let bands = (0..n_bands)
            .map(|b| {
                let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
                let first = (lo / bin_hz).ceil() as usize;
                let last = ((hi / bin_hz).floor() as usize).min(n_bins - 1);
                let mut w: Vec<f64> = (first..=last)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        if f <= mid { (f - lo) / (mid - lo) } else { (hi - f) / (hi - mid) }
                    })
                    .map(|x| x.max(0.0))
                    .collect();
                // Narrow low bands can fall between bins; give them the nearest bin
                if w.iter().all(|&x| x == 0.0) {
                    let k = (mid / bin_hz).round() as usize;
                    return (k, vec![1.0]);
                }
                while w.last() == Some(&0.0) {
                    w.pop();
                }
                (first, w)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(n_fft);
        MelExtractor { rate_hz, win, hop, n_fft, window: hann_periodic(win), bands, fft }
    }

    pub fn dim(&self) -> usize {
        2 * self.bands.len()
    }

    /// Log-mel frames (`n_frames × n_bands`). Signals shorter than one window
    /// are zero-padded to a single frame.
    pub fn log_mel(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n_frames = if x.len() <= self.win { 1 } else { 1 + (x.len() - self.win) / self.hop };
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_fft];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut out = Vec::with_capacity(n_frames);
        for t in 0..n_frames {
            let start = t * self.hop;
            for (i, c) in buf.iter_mut().enumerate() {
                let v = if i < self.win { x.get(start + i).copied().unwrap_or(0.0) * self.window[i] } else { 0.0 };
                *c = Complex::new(v, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            let frame = self
                .bands
                .iter()
                .map(|(first, w)| {
                    let e: f64 = w.iter().enumerate().map(|(j, wt)| wt * buf[first + j].norm_sqr()).sum();
                    e.max(LOG_FLOOR).ln()
                })
                .collect();
            out.push(frame);
        }
        out
    }

    /// Mean and population standard deviation of each band, means first.
    pub fn embed(&self, w: &Waveform) -> Vec<f32> {
        let frames = self.log_mel(&w.to_f64());
        let nb = self.bands.len();
        let n = frames.len() as f64;
        // Accumulate offsets from the first frame so constant bands give exact zeros
        let base = frames[0].clone();
        let mut s1 = vec![0.0; nb];
        let mut s2 = vec![0.0; nb];
        for f in &frames {
            for b in 0..nb {
                let d = f[b] - base[b];
                s1[b] += d;
                s2[b] += d * d;
            }
        }
        let mean = (0..nb).map(|b| (base[b] + s1[b] / n) as f32);
        let std = (0..nb).map(|b| {
            let m = s1[b] / n;
            ((s2[b] / n - m * m).max(0.0)).sqrt() as f32
        });
        mean.chain(std).collect()
    }
}

/// Built-in 128-dim embedding for a 16 kHz mono waveform.
pub fn compute_builtin_embedding(w: &Waveform) -> Vec<f32> {
    MelExtractor::default().embed(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn cosine(a: &[f32], b: &[f32]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
        let na: f64 = a.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn silence_is_floor_and_zero_std() {
        let e = compute_builtin_embedding(&Waveform::mono(vec![0.0; 16_000], 16_000));
        assert_eq!(e.len(), BUILTIN_DIM);
        for &m in &e[..64] {
            assert_eq!(m, LOG_FLOOR.ln() as f32);
        }
        assert!(e[64..].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn deterministic() {
        let w = Waveform::from_f64(&synth::white_noise(1.0, 0.2, 16_000, 9), 16_000);
        let a = compute_builtin_embedding(&w);
        let b = compute_builtin_embedding(&w);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn sine_and_noise_differ() {
        let s = compute_builtin_embedding(&Waveform::from_f64(&synth::sine(500.0, 1.0, 0.5, 16_000), 16_000));
        let n = compute_builtin_embedding(&Waveform::from_f64(&synth::white_noise(1.0, 0.2, 16_000, 1), 16_000));
        assert!(cosine(&s, &n) < 0.9, "{}", cosine(&s, &n));
    }

    #[test]
    fn every_band_has_weight() {
        let m = MelExtractor::default();
        assert_eq!(m.dim(), 128);
        for (_, w) in &m.bands {
            assert!(w.iter().any(|&x| x > 0.0));
        }
    }

    #[test]
    fn circular_shift_invariance_for_stationary_noise() {
        // Hop-aligned shifts leave every frame intact except the few that
        // straddle the wrap point, so a long input bounds the change
        let x = synth::white_noise(300.0, 0.2, 16_000, 4);
        let a = compute_builtin_embedding(&Waveform::from_f64(&x, 16_000));
        for shift in [160usize, 16_000, 1_234_560] {
            let mut y = x.clone();
            y.rotate_left(shift);
            let b = compute_builtin_embedding(&Waveform::from_f64(&y, 16_000));
            let worst = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0f32, f32::max);
            assert!(worst < 1e-3, "shift {shift}: {worst}");
        }
    }
}
