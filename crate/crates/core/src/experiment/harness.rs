use std::collections::BTreeMap;

use ndarray::Array2;
use rayon::prelude::*;

use super::catalog::{SegmentCatalog, SegmentRecord};
use super::condition::{build_training_set, ConditionSpec};
use super::split::sample_split;
use crate::classifier::{predict, train, Dataset, TrainConfig};
use crate::corpus::{DatasetManifest, Provenance};
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::stats::{mean_std, weighted_f1};

/// Everything a run reads. Shared immutably across concurrent runs.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentData<'a> {
    pub manifest: &'a DatasetManifest,
    pub catalog: &'a SegmentCatalog,
    pub embeddings: &'a EmbeddingTable,
}

impl ExperimentData<'_> {
    fn labels(&self) -> BTreeMap<&str, usize> {
        self.manifest.dialects.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect()
    }

    /// Fail fast if any segment the condition could use lacks an embedding.
    pub fn check_coverage(&self, cond: &ConditionSpec) -> Result<()> {
        let tags = cond.train_tags();
        for r in &self.catalog.records {
            if (r.provenance == Provenance::Original || tags.contains(&r.tag)) && self.embeddings.get(&r.segment_id).is_none() {
                return Err(Error::MissingEmbedding(r.segment_id.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run_index: usize,
    pub seed: u64,
    /// Weighted F1 on the test segments.
    pub score: f64,
    pub n_original: usize,
    pub n_converted: usize,
    pub n_srfm: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub epochs: usize,
}

/// Scores of one condition across runs, ordered by run index.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDistribution {
    pub condition: String,
    pub results: Vec<RunResult>,
}

impl RunDistribution {
    pub fn from_scores(condition: impl Into<String>, scores: &[f64]) -> Self {
        let results = scores
            .iter()
            .enumerate()
            .map(|(i, &score)| RunResult {
                run_index: i,
                seed: 0,
                score,
                n_original: 0,
                n_converted: 0,
                n_srfm: 0,
                n_val: 0,
                n_test: 0,
                epochs: 0,
            })
            .collect();
        RunDistribution { condition: condition.into(), results }
    }

    pub fn scores(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.score).collect()
    }

    pub fn mean_std(&self) -> (f64, f64) {
        mean_std(&self.scores())
    }

    /// Mean per-run training counts `(original, converted, srfm)`, rounded.
    pub fn mean_counts(&self) -> (usize, usize, usize) {
        let n = self.results.len().max(1) as f64;
        let avg = |f: fn(&RunResult) -> usize| (self.results.iter().map(f).sum::<usize>() as f64 / n).round() as usize;
        (avg(|r| r.n_original), avg(|r| r.n_converted), avg(|r| r.n_srfm))
    }
}

/// Seed of run `i`: independent of the condition, so all conditions see
/// the same splits.
pub fn run_seed(base_seed: u64, i: usize) -> u64 {
    derive_seed(base_seed, &["run".into(), i.into()])
}

fn matrix(rows: &[&SegmentRecord], table: &EmbeddingTable) -> Result<Array2<f64>> {
    let mut x = Array2::zeros((rows.len(), table.dim()));
    for (i, r) in rows.iter().enumerate() {
        let v = table.require(&r.segment_id)?;
        x.row_mut(i).iter_mut().zip(v).for_each(|(d, &s)| *d = s as f64);
    }
    Ok(x)
}

/// Z-score all matrices with the column statistics of `train`.
fn standardize(train: &mut Array2<f64>, others: &mut [&mut Array2<f64>]) {
    let n = train.nrows() as f64;
    for j in 0..train.ncols() {
        let col = train.column(j);
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 1e-24 { var.sqrt() } else { 1.0 };
        for m in std::iter::once(&mut *train).chain(others.iter_mut().map(|m| &mut **m)) {
            m.column_mut(j).mapv_inplace(|v| (v - mean) / sd);
        }
    }
}

/// Train on one sampled split and score the test speakers.
pub fn run_once(data: &ExperimentData<'_>, cond: &ConditionSpec, run_index: usize, seed: u64, cfg: &TrainConfig) -> Result<RunResult> {
    let split = sample_split(data.manifest, seed)?;
    let sets = build_training_set(cond, &split, data.catalog)?;
    let labels = data.labels();
    let y = |rows: &[&SegmentRecord]| -> Result<Vec<usize>> {
        rows.iter()
            .map(|r| labels.get(r.dialect.as_str()).copied().ok_or_else(|| Error::Validation(format!("unknown dialect {}", r.dialect))))
            .collect()
    };
    let mut xtr = matrix(&sets.train, data.embeddings)?;
    let mut xva = matrix(&sets.val, data.embeddings)?;
    let mut xte = matrix(&sets.test, data.embeddings)?;
    standardize(&mut xtr, &mut [&mut xva, &mut xte]);
    let train_set = Dataset::new(xtr, y(&sets.train)?)?;
    let val_set = Dataset::new(xva, y(&sets.val)?)?;
    let test_y = y(&sets.test)?;
    let cfg = TrainConfig { seed: derive_seed(seed, &["train".into()]), ..*cfg };
    let outcome = train(&cfg, &train_set, &val_set, labels.len())?;
    let pred = predict(&outcome.params, xte.view())?;
    Ok(RunResult {
        run_index,
        seed,
        score: weighted_f1(&test_y, &pred)?,
        n_original: sets.count_train(|p| p == Provenance::Original),
        n_converted: sets.count_train(|p| p == Provenance::Converted),
        n_srfm: sets.count_train(|p| matches!(p, Provenance::SrFm | Provenance::ConvertedSrFm)),
        n_val: sets.val.len(),
        n_test: sets.test.len(),
        epochs: outcome.history.len(),
    })
}

/// Run the given run indices (in any order) and return results sorted by
/// index. `workers` > 1 runs in a dedicated thread pool.
pub fn run_scheduled(
    data: &ExperimentData<'_>,
    cond: &ConditionSpec,
    indices: &[usize],
    base_seed: u64,
    cfg: &TrainConfig,
    workers: usize,
) -> Result<RunDistribution> {
    if indices.is_empty() {
        return Err(Error::Config("need at least one run".into()));
    }
    data.check_coverage(cond)?;
    let one = |i: usize| {
        let seed = run_seed(base_seed, i);
        run_once(data, cond, i, seed, cfg).map_err(|e| Error::RunFailed { run_index: i, seed, source: Box::new(e) })
    };
    let results: Vec<Result<RunResult>> = if workers <= 1 {
        indices.iter().map(|&i| one(i)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
        pool.install(|| indices.par_iter().map(|&i| one(i)).collect())
    };
    let mut ok = Vec::with_capacity(results.len());
    let mut first_err: Option<Error> = None;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                let lower = match (&first_err, &e) {
                    (Some(Error::RunFailed { run_index: a, .. }), Error::RunFailed { run_index: b, .. }) => b < a,
                    (None, _) => true,
                    _ => false,
                };
                if lower {
                    first_err = Some(e);
                }
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    ok.sort_by_key(|r| r.run_index);
    Ok(RunDistribution { condition: cond.name(), results: ok })
}

/// `n_runs` runs with seeds derived from `base_seed`.
pub fn run_many(
    data: &ExperimentData<'_>,
    cond: &ConditionSpec,
    n_runs: usize,
    base_seed: u64,
    cfg: &TrainConfig,
    workers: usize,
) -> Result<RunDistribution> {
    let indices: Vec<usize> = (0..n_runs).collect();
    run_scheduled(data, cond, &indices, base_seed, cfg, workers)
}
