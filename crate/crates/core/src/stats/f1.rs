use crate::error::{Error, Result};

/// Counts indexed as `[true class][predicted class]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix { n_classes, counts: vec![0; n_classes * n_classes] }
    }

    pub fn from_labels(truth: &[usize], pred: &[usize]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::Validation(format!(
                "label length mismatch: {} true vs {} predicted",
                truth.len(),
                pred.len()
            )));
        }
        let n = truth.iter().chain(pred).copied().max().map_or(0, |m| m + 1);
        let mut cm = ConfusionMatrix::new(n);
        for (&t, &p) in truth.iter().zip(pred) {
            cm.counts[t * n + p] += 1;
        }
        Ok(cm)
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n_classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        (0..self.n_classes).map(|p| self.get(class, p)).sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        (0..self.n_classes).map(|t| self.get(t, class)).sum()
    }

    /// F1 of one class; 0 when precision + recall is 0.
    pub fn f1(&self, class: usize) -> f64 {
        let tp = self.get(class, class) as f64;
        let denom = (self.support(class) + self.predicted(class)) as f64;
        if tp == 0.0 || denom == 0.0 {
            0.0
        } else {
            2.0 * tp / denom
        }
    }

    /// Support-weighted mean of per-class F1.
    pub fn weighted_f1(&self) -> f64 {
        let total = self.total() as f64;
        if total == 0.0 {
            return 0.0;
        }
        (0..self.n_classes)
            .map(|c| self.support(c) as f64 / total * self.f1(c))
            .sum()
    }
}

pub fn weighted_f1(truth: &[usize], pred: &[usize]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::Validation("weighted F1 needs at least one label".into()));
    }
    Ok(ConfusionMatrix::from_labels(truth, pred)?.weighted_f1())
}
