//! Short-time Fourier analysis/synthesis with weighted overlap-add.
//!
//! Frames are centered: the first frame starts half a window before the
//! signal. Synthesis divides by the summed squared window at every output
//! sample, so an unmodified spectrum reconstructs the input to rounding error.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::window::hann_periodic;

pub struct Stft {
    n_fft: usize,
    hop: usize,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("n_fft", &self.n_fft).field("hop", &self.hop).finish()
    }
}

impl Stft {
    pub fn new(n_fft: usize, hop: usize) -> Self {
        let mut planner = FftPlanner::new();
        Stft {
            n_fft,
            hop,
            window: hann_periodic(n_fft),
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft),
        }
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Center frequency of bin `k` at the given sample rate.
    pub fn bin_hz(&self, k: usize, rate_hz: f64) -> f64 {
        k as f64 * rate_hz / self.n_fft as f64
    }

    fn frame_starts(&self, len: usize) -> impl Iterator<Item = isize> + '_ {
        let first = -(self.n_fft as isize / 2);
        (0..)
            .map(move |t: isize| first + t * self.hop as isize)
            .take_while(move |&s| s < len.max(1) as isize)
    }

    /// Window offset and the signal range `lo..hi` a frame covers.
    fn frame_span(&self, start: isize, len: usize) -> (usize, usize, usize) {
        let lo = start.max(0) as usize;
        let hi = ((start + self.n_fft as isize).max(0) as usize).min(len);
        ((lo as isize - start) as usize, lo, hi.max(lo))
    }

    /// Analyze `signal`, let `edit` modify each frame's half spectrum
    /// (`n_fft/2 + 1` bins), and resynthesize a signal of the same length.
    pub fn filter<F>(&self, signal: &[f64], mut edit: F) -> Vec<f64>
    where
        F: FnMut(&mut [Complex<f64>]),
    {
        let n = self.n_fft;
        let len = signal.len();
        let mut out = vec![0.0; len];
        let mut norm = vec![0.0; len];
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        let mut iscratch = vec![Complex::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        let scale = 1.0 / n as f64;
        let half = n / 2 + 1;
        let mut spec_a = vec![Complex::new(0.0, 0.0); half];
        let mut spec_b = vec![Complex::new(0.0, 0.0); half];
        let starts: Vec<isize> = self.frame_starts(len).collect();
        // Two real frames share one complex transform: a in re, b in im
        for pair in starts.chunks(2) {
            buf.iter_mut().for_each(|b| *b = Complex::new(0.0, 0.0));
            for (slot, &start) in pair.iter().enumerate() {
                let (off, lo, hi) = self.frame_span(start, len);
                for ((b, &x), &w) in buf[off..].iter_mut().zip(&signal[lo..hi]).zip(&self.window[off..]) {
                    if slot == 0 {
                        b.re = x * w;
                    } else {
                        b.im = x * w;
                    }
                }
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..half {
                let z = buf[k];
                let zc = buf[(n - k) % n].conj();
                spec_a[k] = (z + zc) * 0.5;
                spec_b[k] = Complex::new(0.0, -0.5) * (z - zc);
            }
            edit(&mut spec_a);
            if pair.len() == 2 {
                edit(&mut spec_b);
            }
            for spec in [&mut spec_a, &mut spec_b] {
                // restore Hermitian symmetry from the edited half spectrum
                spec[0].im = 0.0;
                spec[n / 2].im = 0.0;
            }
            let i = Complex::new(0.0, 1.0);
            for k in 0..half {
                buf[k] = spec_a[k] + i * spec_b[k];
            }
            for k in half..n {
                buf[k] = spec_a[n - k].conj() + i * spec_b[n - k].conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut iscratch);
            for (slot, &start) in pair.iter().enumerate() {
                let (off, lo, hi) = self.frame_span(start, len);
                let frame = buf[off..].iter().zip(&self.window[off..]);
                for ((o, nm), (b, &w)) in out[lo..hi].iter_mut().zip(&mut norm[lo..hi]).zip(frame) {
                    *o += if slot == 0 { b.re } else { b.im } * scale * w;
                    *nm += w * w;
                }
            }
        }
        for (o, w) in out.iter_mut().zip(&norm) {
            if *w > 1e-8 {
                *o /= w;
            } else {
                *o = 0.0;
            }
        }
        out
    }

    /// Power spectra (|X|^2 over the half spectrum) of every frame.
    pub fn power_frames(&self, signal: &[f64]) -> Vec<Vec<f64>> {
        let n = self.n_fft;
        let len = signal.len();
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        self.frame_starts(len)
            .map(|start| {
                for (i, b) in buf.iter_mut().enumerate() {
                    let j = start + i as isize;
                    let x = if j >= 0 && (j as usize) < len { signal[j as usize] } else { 0.0 };
                    *b = Complex::new(x * self.window[i], 0.0);
                }
                self.forward.process_with_scratch(&mut buf, &mut scratch);
                buf[..n / 2 + 1].iter().map(|c| c.norm_sqr()).collect()
            })
            .collect()
    }
}
