//! Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel.

use super::window::kaiser;

/// Zero crossings of the sinc kernel on each side, measured at the lower of
/// the two rates.
const ZERO_CROSSINGS: usize = 64;
/// Kaiser shape parameter; about 80 dB stop-band attenuation.
const KAISER_BETA: f64 = 8.0;
/// Cutoff as a fraction of the lower Nyquist frequency. The transition band
/// ends before Nyquist for the chosen kernel length.
const ROLLOFF: f64 = 0.94;

#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    half: usize,
    // phase -> taps for input samples m-half+1 ..= m+half
    table: Vec<Vec<f64>>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Resampler {
    pub fn new(from_hz: u32, to_hz: u32) -> Self {
        let g = gcd(from_hz as usize, to_hz as usize);
        let up = to_hz as usize / g;
        let down = from_hz as usize / g;
        // cutoff in cycles per input sample
        let ratio = up as f64 / down as f64;
        let fc = 0.5 * ratio.min(1.0) * ROLLOFF;
        let half_width = ZERO_CROSSINGS as f64 / (2.0 * 0.5 * ratio.min(1.0));
        let half = half_width.ceil() as usize;
        let table = (0..up)
            .map(|phase| {
                let frac = phase as f64 / up as f64;
                (0..2 * half)
                    .map(|i| {
                        // input index j = m - half + 1 + i, tau = frac + m - j
                        let tau = frac + half as f64 - 1.0 - i as f64;
                        let x = 2.0 * fc * tau;
                        let sinc = if x.abs() < 1e-12 {
                            1.0
                        } else {
                            (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
                        };
                        2.0 * fc * sinc * kaiser(tau / half_width, KAISER_BETA)
                    })
                    .collect()
            })
            .collect();
        Resampler { up, down, half, table }
    }

    pub fn is_identity(&self) -> bool {
        self.up == self.down
    }

    /// Number of output samples produced for `n` input samples.
    pub fn output_len(&self, n: usize) -> usize {
        (n * self.up).div_ceil(self.down)
    }

    pub fn process(&self, input: &[f64]) -> Vec<f64> {
        if self.is_identity() {
            return input.to_vec();
        }
        let n_out = self.output_len(input.len());
        let n_in = input.len() as isize;
        let mut out = Vec::with_capacity(n_out);
        for n in 0..n_out {
            let pos = n * self.down;
            let m = (pos / self.up) as isize;
            let phase = pos % self.up;
            let taps = &self.table[phase];
            let first = m - self.half as isize + 1;
            let mut acc = 0.0;
            if first >= 0 && first + taps.len() as isize <= n_in {
                let seg = &input[first as usize..first as usize + taps.len()];
                for (x, h) in seg.iter().zip(taps) {
                    acc += x * h;
                }
            } else {
                for (i, h) in taps.iter().enumerate() {
                    let j = first + i as isize;
                    if j >= 0 && j < n_in {
                        acc += input[j as usize] * h;
                    }
                }
            }
            out.push(acc);
        }
        out
    }
}
