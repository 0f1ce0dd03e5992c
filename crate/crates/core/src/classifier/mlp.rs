use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Layer weights are stored input-major: `w1` is `D × H1`, so a batch
/// `X` (`n × D`) maps to `X·w1 + b1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
    pub leaky_slope: f64,
}

impl MlpParams {
    /// `(D, H1, H2, C)`.
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.w1.nrows(), self.w1.ncols(), self.w2.ncols(), self.w3.ncols())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn tensors(&self) -> [&[f64]; 6] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
            self.w3.as_slice().expect("standard layout"),
            self.b3.as_slice().expect("standard layout"),
        ]
    }

    fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
            self.w3.as_slice_mut().expect("standard layout"),
            self.b3.as_slice_mut().expect("standard layout"),
        ]
    }

    /// All parameters in checkpoint order: w1, b1, w2, b2, w3, b3 (row-major).
    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params(), "flat parameter length");
        let mut off = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[off..off + t.len()]);
            off += t.len();
        }
    }

    pub(crate) fn zeros(d: usize, h1: usize, h2: usize, c: usize, leaky_slope: f64) -> Self {
        MlpParams {
            w1: Array2::zeros((d, h1)),
            b1: Array1::zeros(h1),
            w2: Array2::zeros((h1, h2)),
            b2: Array1::zeros(h2),
            w3: Array2::zeros((h2, c)),
            b3: Array1::zeros(c),
            leaky_slope,
        }
    }
}

/// He-normal weights (variance 2 / fan_in), zero biases.
pub fn init_params(d: usize, h1: usize, h2: usize, c: usize, leaky_slope: f64, seed: u64) -> Result<MlpParams> {
    if d == 0 || h1 == 0 || h2 == 0 || c == 0 {
        return Err(Error::Config(format!("network dimensions must be positive, got {d}-{h1}-{h2}-{c}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut p = MlpParams::zeros(d, h1, h2, c, leaky_slope);
    for w in [&mut p.w1, &mut p.w2, &mut p.w3] {
        let normal = Normal::new(0.0, (2.0 / w.nrows() as f64).sqrt()).expect("positive std");
        w.iter_mut().for_each(|x| *x = normal.sample(&mut rng));
    }
    Ok(p)
}

/// Inverted-dropout masks for one batch: entries are 0 or `1 / (1 - p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub m1: Array2<f64>,
    pub m2: Array2<f64>,
}

pub fn sample_masks<R: Rng>(rng: &mut R, batch: usize, h1: usize, h2: usize, p: f64) -> DropoutMasks {
    let keep = 1.0 / (1.0 - p);
    let mut draw = |rows, cols| Array2::from_shape_fn((rows, cols), |_| if rng.random::<f64>() < p { 0.0 } else { keep });
    let m1 = draw(batch, h1);
    let m2 = draw(batch, h2);
    DropoutMasks { m1, m2 }
}

fn leaky(z: &Array2<f64>, slope: f64) -> Array2<f64> {
    z.mapv(|v| if v > 0.0 { v } else { slope * v })
}

/// Row-wise numerically stable softmax.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}

struct Activations {
    z1: Array2<f64>,
    a1: Array2<f64>,
    z2: Array2<f64>,
    a2: Array2<f64>,
    probs: Array2<f64>,
}

fn check_input(p: &MlpParams, x: &ArrayView2<f64>, masks: Option<&DropoutMasks>) -> Result<()> {
    let (d, h1, h2, _) = p.dims();
    if x.ncols() != d {
        return Err(Error::Validation(format!("input dim {} != model dim {d}", x.ncols())));
    }
    if let Some(m) = masks {
        if m.m1.dim() != (x.nrows(), h1) || m.m2.dim() != (x.nrows(), h2) {
            return Err(Error::Validation("dropout mask shape does not match batch".into()));
        }
    }
    Ok(())
}

fn run(p: &MlpParams, x: &ArrayView2<f64>, masks: Option<&DropoutMasks>) -> Activations {
    let z1 = x.dot(&p.w1) + &p.b1;
    let mut a1 = leaky(&z1, p.leaky_slope);
    if let Some(m) = masks {
        a1 *= &m.m1;
    }
    let z2 = a1.dot(&p.w2) + &p.b2;
    let mut a2 = leaky(&z2, p.leaky_slope);
    if let Some(m) = masks {
        a2 *= &m.m2;
    }
    let logits = a2.dot(&p.w3) + &p.b3;
    Activations { z1, a1, z2, a2, probs: softmax_rows(&logits) }
}

/// Class probabilities for a batch (`n × C`). `masks` freezes dropout;
/// `None` is inference mode.
pub fn forward_batch(p: &MlpParams, x: ArrayView2<f64>, masks: Option<&DropoutMasks>) -> Result<Array2<f64>> {
    check_input(p, &x, masks)?;
    Ok(run(p, &x, masks).probs)
}

/// Inference-mode probabilities for a single vector.
pub fn forward(p: &MlpParams, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    let xb = x.insert_axis(Axis(0));
    Ok(forward_batch(p, xb, None)?.row(0).to_owned())
}

pub fn predict(p: &MlpParams, x: ArrayView2<f64>) -> Result<Vec<usize>> {
    let probs = forward_batch(p, x, None)?;
    Ok(probs
        .axis_iter(Axis(0))
        .map(|row| row.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b }).0)
        .collect())
}

fn check_labels(labels: &[usize], n: usize, c: usize) -> Result<()> {
    if labels.len() != n || n == 0 {
        return Err(Error::Validation(format!("need one label per row ({n} rows, {} labels)", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::Validation(format!("label {bad} out of range for {c} classes")));
    }
    Ok(())
}

fn cross_entropy(probs: &Array2<f64>, labels: &[usize]) -> f64 {
    labels.iter().enumerate().map(|(i, &l)| -probs[[i, l]].max(1e-300).ln()).sum::<f64>() / labels.len() as f64
}

/// Mean cross-entropy of the batch under the given masks.
pub fn loss(p: &MlpParams, x: ArrayView2<f64>, labels: &[usize], masks: Option<&DropoutMasks>) -> Result<f64> {
    check_input(p, &x, masks)?;
    check_labels(labels, x.nrows(), p.dims().3)?;
    Ok(cross_entropy(&run(p, &x, masks).probs, labels))
}

/// Gradients of the mean cross-entropy, same shapes as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
    /// Gradient with respect to the output pre-activations (`n × C`).
    pub logits: Array2<f64>,
}

impl Gradients {
    pub fn to_flat(&self) -> Vec<f64> {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.w2.as_slice().expect("standard layout"),
            self.b2.as_slice().expect("standard layout"),
            self.w3.as_slice().expect("standard layout"),
            self.b3.as_slice().expect("standard layout"),
        ]
        .concat()
    }
}

fn leaky_grad(z: &Array2<f64>, upstream: &mut Array2<f64>, slope: f64) {
    Zip::from(upstream).and(z).for_each(|g, &v| {
        if v <= 0.0 {
            *g *= slope;
        }
    });
}

/// Loss and exact gradients for a batch with frozen dropout masks.
pub fn grad(p: &MlpParams, x: ArrayView2<f64>, labels: &[usize], masks: Option<&DropoutMasks>) -> Result<(f64, Gradients)> {
    check_input(p, &x, masks)?;
    check_labels(labels, x.nrows(), p.dims().3)?;
    let n = x.nrows() as f64;
    let act = run(p, &x, masks);
    let loss = cross_entropy(&act.probs, labels);

    let mut dlogits = act.probs.clone();
    for (i, &l) in labels.iter().enumerate() {
        dlogits[[i, l]] -= 1.0;
    }
    dlogits /= n;
    let w3 = act.a2.t().dot(&dlogits);
    let b3 = dlogits.sum_axis(Axis(0));

    let mut da2 = dlogits.dot(&p.w3.t());
    if let Some(m) = masks {
        da2 *= &m.m2;
    }
    leaky_grad(&act.z2, &mut da2, p.leaky_slope);
    let w2 = act.a1.t().dot(&da2);
    let b2 = da2.sum_axis(Axis(0));

    let mut da1 = da2.dot(&p.w2.t());
    if let Some(m) = masks {
        da1 *= &m.m1;
    }
    leaky_grad(&act.z1, &mut da1, p.leaky_slope);
    let w1 = x.t().dot(&da1);
    let b1 = da1.sum_axis(Axis(0));

    Ok((loss, Gradients { w1, b1, w2, b2, w3, b3, logits: dlogits }))
}
