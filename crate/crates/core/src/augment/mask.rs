use num_complex::Complex;
use rand::Rng;

use crate::corpus::{Waveform, TARGET_RATE_HZ};
use crate::dsp::Stft;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

pub const MAX_PLACEMENT_RETRIES: usize = 100;
const FFT_SIZE: usize = 1024;
const HOP: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqMaskSpec {
    pub count_min: usize,
    pub count_max: usize,
    pub bw_min_hz: f64,
    pub bw_max_hz: f64,
    pub f_low_hz: f64,
    pub f_high_hz: f64,
}

impl Default for FreqMaskSpec {
    fn default() -> Self {
        FreqMaskSpec {
            count_min: 1,
            count_max: 3,
            bw_min_hz: 100.0,
            bw_max_hz: 2500.0,
            f_low_hz: 0.0,
            f_high_hz: TARGET_RATE_HZ as f64 / 2.0,
        }
    }
}

impl FreqMaskSpec {
    fn validate(&self) -> Result<()> {
        if self.count_min < 1 || self.count_min > self.count_max {
            return Err(Error::Validation(format!(
                "mask count range {}..={} is invalid",
                self.count_min, self.count_max
            )));
        }
        if !(self.bw_min_hz > 0.0 && self.bw_min_hz <= self.bw_max_hz) {
            return Err(Error::Validation(format!(
                "mask bandwidth range {}..={} Hz is invalid",
                self.bw_min_hz, self.bw_max_hz
            )));
        }
        if !(self.f_low_hz >= 0.0 && self.f_high_hz > self.f_low_hz) {
            return Err(Error::Validation(format!(
                "mask placement window {}..{} Hz is invalid",
                self.f_low_hz, self.f_high_hz
            )));
        }
        if self.bw_min_hz > self.f_high_hz - self.f_low_hz {
            return Err(Error::Validation(format!(
                "minimum bandwidth {} Hz does not fit in {}..{} Hz",
                self.bw_min_hz, self.f_low_hz, self.f_high_hz
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskBand {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl MaskBand {
    pub fn width(&self) -> f64 {
        self.hi_hz - self.lo_hz
    }

    pub fn overlaps(&self, other: &MaskBand) -> bool {
        self.lo_hz < other.hi_hz && other.lo_hz < self.hi_hz
    }
}

/// Draw between `count_min` and `count_max` pairwise disjoint bands.
///
/// Widths are uniform in Hz and clipped to the placement window. A band that
/// cannot be placed without overlap after [`MAX_PLACEMENT_RETRIES`] attempts is
/// dropped, so the result may hold fewer bands than drawn but never zero.
/// Bands are returned sorted by lower edge.
pub fn sample_mask_bands(spec: &FreqMaskSpec, seed: u64) -> Result<Vec<MaskBand>> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let window = spec.f_high_hz - spec.f_low_hz;
    let bw_max = spec.bw_max_hz.min(window);
    let k = rng.random_range(spec.count_min..=spec.count_max);
    let mut bands: Vec<MaskBand> = Vec::with_capacity(k);
    for _ in 0..k {
        for _ in 0..MAX_PLACEMENT_RETRIES {
            let bw = rng.random_range(spec.bw_min_hz..=bw_max);
            let lo = spec.f_low_hz + rng.random_range(0.0..=(window - bw));
            let band = MaskBand { lo_hz: lo, hi_hz: (lo + bw).min(spec.f_high_hz) };
            if !bands.iter().any(|b| b.overlaps(&band)) {
                bands.push(band);
                break;
            }
        }
    }
    bands.sort_by(|a, b| a.lo_hz.total_cmp(&b.lo_hz));
    Ok(bands)
}

/// STFT bin-zeroing mask (1024-point Hann, hop 256, overlap-add).
#[derive(Debug)]
pub struct FrequencyMasker {
    stft: Stft,
}

impl Default for FrequencyMasker {
    fn default() -> Self {
        FrequencyMasker { stft: Stft::new(FFT_SIZE, HOP) }
    }
}

impl FrequencyMasker {
    pub fn apply(&self, w: &Waveform, bands: &[MaskBand]) -> Result<Waveform> {
        if w.channels != 1 {
            return Err(Error::Validation("frequency masking expects mono audio".into()));
        }
        let rate = w.rate_hz as f64;
        let nyquist = rate / 2.0;
        for b in bands {
            if !(b.lo_hz >= 0.0 && b.lo_hz < b.hi_hz && b.hi_hz <= nyquist) {
                return Err(Error::Validation(format!(
                    "mask band {}..{} Hz lies outside 0..{nyquist} Hz",
                    b.lo_hz, b.hi_hz
                )));
            }
        }
        if bands.is_empty() {
            return Ok(w.clone());
        }
        let masked: Vec<usize> = (0..self.stft.n_bins())
            .filter(|&k| {
                let f = self.stft.bin_hz(k, rate);
                bands.iter().any(|b| f >= b.lo_hz && f <= b.hi_hz)
            })
            .collect();
        let out = self.stft.filter(&w.to_f64(), |bins| {
            for &k in &masked {
                bins[k] = Complex::new(0.0, 0.0);
            }
        });
        Ok(Waveform::from_f64(&out, w.rate_hz))
    }
}

/// Zero every short-time spectrum bin inside the given bands over the full
/// duration. Output length equals input length.
pub fn apply_frequency_mask(w: &Waveform, bands: &[MaskBand]) -> Result<Waveform> {
    FrequencyMasker::default().apply(w, bands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::FftPlanner;

    #[test]
    fn default_draws_respect_ranges() {
        let spec = FreqMaskSpec::default();
        for seed in 0..500 {
            let bands = sample_mask_bands(&spec, seed).unwrap();
            assert!((1..=3).contains(&bands.len()));
            for b in &bands {
                assert!(b.width() >= 100.0 - 1e-9 && b.width() <= 2500.0 + 1e-9);
                assert!(b.lo_hz >= 0.0 && b.hi_hz <= 8000.0);
            }
            for (i, a) in bands.iter().enumerate() {
                for b in &bands[i + 1..] {
                    assert!(!a.overlaps(b));
                }
            }
        }
    }

    #[test]
    fn forced_single_band() {
        let spec = FreqMaskSpec { count_min: 1, count_max: 1, ..Default::default() };
        for seed in 0..50 {
            assert_eq!(sample_mask_bands(&spec, seed).unwrap().len(), 1);
        }
    }

    #[test]
    fn narrow_window_clips_widths() {
        let spec = FreqMaskSpec { f_low_hz: 1000.0, f_high_hz: 1300.0, ..Default::default() };
        for seed in 0..10_000 {
            let bands = sample_mask_bands(&spec, seed).unwrap();
            assert!(!bands.is_empty());
            for b in &bands {
                assert!(b.width() <= 300.0 + 1e-9);
                assert!(b.lo_hz >= 1000.0 && b.hi_hz <= 1300.0 + 1e-9);
            }
        }
    }

    #[test]
    fn invalid_specs() {
        let bad = FreqMaskSpec { count_min: 0, ..Default::default() };
        assert!(sample_mask_bands(&bad, 0).is_err());
        let bad = FreqMaskSpec { bw_min_hz: 500.0, f_low_hz: 0.0, f_high_hz: 400.0, ..Default::default() };
        assert!(sample_mask_bands(&bad, 0).is_err());
    }

    #[test]
    fn band_above_nyquist_is_rejected() {
        let w = Waveform::mono(vec![0.0; 1600], 16_000);
        let err = apply_frequency_mask(&w, &[MaskBand { lo_hz: 7000.0, hi_hz: 9000.0 }]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn empty_band_list_round_trips() {
        let w = Waveform::mono((0..16_000).map(|i| ((i * 7919) % 200) as f32 / 200.0 - 0.5).collect(), 16_000);
        let out = FrequencyMasker::default().stft.filter(&w.to_f64(), |_| {});
        let err: f64 = out.iter().zip(&w.samples).map(|(a, &b)| (a - b as f64).powi(2)).sum();
        let sig: f64 = w.samples.iter().map(|&b| (b as f64).powi(2)).sum();
        assert!(10.0 * (err / sig).log10() < -50.0);
        assert_eq!(apply_frequency_mask(&w, &[]).unwrap(), w);
    }

    #[test]
    fn out_of_band_sine_is_preserved() {
        let n = 32_000;
        let x: Vec<f64> = (0..n).map(|i| 0.5 * (2.0 * std::f64::consts::PI * 3000.0 * i as f64 / 16_000.0).sin()).collect();
        let w = Waveform::from_f64(&x, 16_000);
        let y = apply_frequency_mask(&w, &[MaskBand { lo_hz: 1000.0, hi_hz: 2000.0 }]).unwrap();
        assert_eq!(y.samples.len(), n);
        let peak = |s: &[f64]| {
            let mut buf: Vec<Complex<f64>> = s.iter().map(|&v| Complex::new(v, 0.0)).collect();
            FftPlanner::new().plan_fft_forward(s.len()).process(&mut buf);
            buf[..s.len() / 2].iter().map(|c| c.norm()).fold(0.0, f64::max)
        };
        let ratio_db = 20.0 * (peak(&y.to_f64()) / peak(&x)).log10();
        assert!(ratio_db.abs() < 0.5, "{ratio_db} dB");
    }
}
