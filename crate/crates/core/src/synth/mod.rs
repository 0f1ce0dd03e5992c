//! Synthetic signals and corpora with known ground truth.
//!
//! Used by the test suites and by the CLI's `synth` command to build a
//! small self-contained corpus.

mod corpus;

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::seed::rng_from_seed;

pub use corpus::{overview_manifest, MaterializeOptions, SynthCorpus, SynthCorpusSpec, SynthSpeaker, OVERVIEW_GROUPS};

pub fn sine(freq_hz: f64, secs: f64, amp: f64, rate: u32) -> Vec<f64> {
    let n = (secs * rate as f64).round() as usize;
    (0..n).map(|i| amp * (2.0 * PI * freq_hz * i as f64 / rate as f64).sin()).collect()
}

/// Band-limited sawtooth (all harmonics below Nyquist, amplitude 1/k).
pub fn sawtooth(freq_hz: f64, secs: f64, amp: f64, rate: u32) -> Vec<f64> {
    let n = (secs * rate as f64).round() as usize;
    let harmonics = ((rate as f64 / 2.0) / freq_hz).floor() as usize;
    let mut out = vec![0.0; n];
    for k in 1..=harmonics {
        let w = 2.0 * PI * freq_hz * k as f64 / rate as f64;
        let a = amp * 2.0 / PI / k as f64;
        for (i, o) in out.iter_mut().enumerate() {
            *o += a * (w * i as f64).sin();
        }
    }
    out
}

pub fn white_noise(secs: f64, amp: f64, rate: u32, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let n = (secs * rate as f64).round() as usize;
    (0..n).map(|_| amp * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Unit impulse train at `f0_hz`.
pub fn impulse_train(f0_hz: f64, secs: f64, rate: u32) -> Vec<f64> {
    let n = (secs * rate as f64).round() as usize;
    let period = rate as f64 / f0_hz;
    let mut out = vec![0.0; n];
    let mut t = 0.0f64;
    while (t as usize) < n {
        out[t.round() as usize % n] = 1.0;
        t += period;
    }
    out
}

/// Two-pole resonator applied in place.
pub fn resonate(x: &mut [f64], freq_hz: f64, bandwidth_hz: f64, rate: u32) {
    let fs = rate as f64;
    let r = (-PI * bandwidth_hz / fs).exp();
    let theta = 2.0 * PI * freq_hz / fs;
    let (a1, a2) = (2.0 * r * theta.cos(), -r * r);
    let gain = 1.0 - r;
    let (mut y1, mut y2) = (0.0, 0.0);
    for v in x.iter_mut() {
        let y = gain * *v + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}

/// Peak-normalize to `peak`.
pub fn normalize_peak(x: &mut [f64], peak: f64) {
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m > 0.0 {
        x.iter_mut().for_each(|v| *v *= peak / m);
    }
}

/// All-pole vowel: impulse train through a cascade of resonators given as
/// `(frequency, bandwidth)` pairs.
pub fn vowel(f0_hz: f64, formants: &[(f64, f64)], secs: f64, rate: u32) -> Vec<f64> {
    let mut x = impulse_train(f0_hz, secs, rate);
    for &(f, bw) in formants {
        resonate(&mut x, f, bw, rate);
    }
    normalize_peak(&mut x, 0.5);
    x
}
