use crate::dsp::Resampler;
use crate::error::{Error, Result};

pub const TARGET_RATE_HZ: u32 = 16_000;
const MIN_SOURCE_RATE_HZ: u32 = 8_000;

/// Interleaved PCM audio with samples nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub rate_hz: u32,
    pub channels: u16,
}

impl Waveform {
    pub fn mono(samples: Vec<f32>, rate_hz: u32) -> Self {
        Waveform { samples, rate_hz, channels: 1 }
    }

    pub fn from_f64(samples: &[f64], rate_hz: u32) -> Self {
        Waveform::mono(samples.iter().map(|&v| v as f32).collect(), rate_hz)
    }

    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels.max(1) as usize
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.rate_hz as f64
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&v| v as f64).collect()
    }

    pub fn is_normalized(&self) -> bool {
        self.rate_hz == TARGET_RATE_HZ && self.channels == 1
    }
}

/// Convert to 16 kHz mono: channels are averaged, the rate is converted with
/// a windowed-sinc polyphase filter, and samples are clamped to [-1, 1].
pub fn normalize_audio(w: &Waveform) -> Result<Waveform> {
    if w.rate_hz < MIN_SOURCE_RATE_HZ {
        return Err(Error::UnsupportedRate(w.rate_hz));
    }
    let ch = w.channels as usize;
    if ch == 0 || ch > 2 {
        return Err(Error::Validation(format!("unsupported channel count {ch}")));
    }
    if w.is_normalized() {
        let samples = w.samples.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        return Ok(Waveform::mono(samples, TARGET_RATE_HZ));
    }
    let mono: Vec<f64> = w
        .samples
        .chunks_exact(ch)
        .map(|frame| frame.iter().map(|&v| v as f64).sum::<f64>() / ch as f64)
        .collect();
    let resampled = Resampler::new(w.rate_hz, TARGET_RATE_HZ).process(&mono);
    let samples = resampled.iter().map(|&v| (v as f32).clamp(-1.0, 1.0)).collect();
    Ok(Waveform::mono(samples, TARGET_RATE_HZ))
}

/// Keep waveforms lasting at least `min_s` seconds, preserving order.
pub fn filter_min_duration(ws: Vec<Waveform>, min_s: f64) -> Vec<Waveform> {
    ws.into_iter().filter(|w| w.duration_s() >= min_s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::num_complex::Complex;
    use rustfft::FftPlanner;

    fn sine(rate: u32, f: f64, secs: f64, amp: f64) -> Vec<f64> {
        let n = (rate as f64 * secs) as usize;
        (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * f * i as f64 / rate as f64).sin())
            .collect()
    }

    #[test]
    fn normalized_input_is_bit_identical() {
        let w = Waveform::from_f64(&sine(16_000, 440.0, 0.5, 0.7), 16_000);
        assert_eq!(normalize_audio(&w).unwrap(), w);
    }

    #[test]
    fn low_rate_is_rejected() {
        let w = Waveform::mono(vec![0.0; 400], 4_000);
        assert!(matches!(normalize_audio(&w), Err(Error::UnsupportedRate(4000))));
    }

    #[test]
    fn stereo_48k_sine_lands_on_1khz_bin() {
        let mono = sine(48_000, 1000.0, 1.0, 0.5);
        let mut inter = Vec::with_capacity(mono.len() * 2);
        for v in &mono {
            inter.push(*v as f32);
            inter.push(*v as f32);
        }
        let w = Waveform { samples: inter, rate_hz: 48_000, channels: 2 };
        let out = normalize_audio(&w).unwrap();
        assert_eq!(out.rate_hz, 16_000);
        assert_eq!(out.channels, 1);
        assert_eq!(out.samples.len(), 16_000);

        // FFT-peak oracle
        let n = out.samples.len();
        let mut buf: Vec<Complex<f64>> =
            out.samples.iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let peak = (1..n / 2)
            .max_by(|&a, &b| buf[a].norm().partial_cmp(&buf[b].norm()).unwrap())
            .unwrap();
        let bin_hz = 16_000.0 / n as f64;
        assert!((peak as f64 * bin_hz - 1000.0).abs() <= bin_hz);
    }

    #[test]
    fn clamps_out_of_range_samples() {
        let w = Waveform::mono(vec![1.5, -2.0, 0.25], 16_000);
        assert_eq!(normalize_audio(&w).unwrap().samples, vec![1.0, -1.0, 0.25]);
    }

    #[test]
    fn min_duration_filter() {
        let mk = |secs: f64| Waveform::mono(vec![0.0; (secs * 16_000.0) as usize], 16_000);
        let out = filter_min_duration(vec![mk(0.5), mk(1.0), mk(3.2)], 1.0);
        let d: Vec<f64> = out.iter().map(|w| w.duration_s()).collect();
        assert_eq!(d, vec![1.0, 3.2]);
        assert!(filter_min_duration(vec![], 1.0).is_empty());
        let all = vec![mk(1.0), mk(2.0)];
        assert_eq!(filter_min_duration(all.clone(), 1.0), all);
    }
}
