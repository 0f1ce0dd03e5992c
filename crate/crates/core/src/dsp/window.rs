use std::f64::consts::PI;

/// Periodic Hann window (sums to a constant under hop = len/4 overlap).
pub fn hann_periodic(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

/// Symmetric Hann window.
pub fn hann_symmetric(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (len - 1) as f64).cos())
        .collect()
}

/// Gaussian window with edges at roughly -60 dB. Both ends are shifted down so
/// that the first and last samples are zero.
pub fn gaussian(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let mid = (len - 1) as f64 / 2.0;
    let edge = (-12.0f64).exp();
    (0..len)
        .map(|i| {
            let x = (i as f64 - mid) / (mid + 1.0);
            ((-12.0 * x * x).exp() - edge) / (1.0 - edge)
        })
        .collect()
}

/// Zeroth-order modified Bessel function of the first kind (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser window evaluated at a normalized position `t` in [-1, 1].
pub fn kaiser(t: f64, beta: f64) -> f64 {
    if t.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - t * t).sqrt()) / bessel_i0(beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_hann_squared_overlap_is_constant() {
        let n = 1024;
        let hop = 256;
        let w = hann_periodic(n);
        for offset in 0..hop {
            let s: f64 = (0..n / hop).map(|k| w[offset + k * hop].powi(2)).sum();
            assert!((s - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn bessel_matches_known_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-12);
        assert!((bessel_i0(5.0) - 27.239_871_823_604_45).abs() < 1e-9);
    }
}
