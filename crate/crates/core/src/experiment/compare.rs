use std::io::{Read, Write};

use super::condition::ConditionSpec;
use super::harness::RunDistribution;
use crate::conversion::ConversionMode;
use crate::error::{Error, Result};
use crate::stats::{mann_whitney_u, significance_stars};

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub test: String,
    pub reference: Option<String>,
    pub p_value: Option<f64>,
    pub test_mean: f64,
    pub test_std: f64,
    pub reference_mean: Option<f64>,
    pub reference_std: Option<f64>,
    pub n_original: usize,
    pub n_converted: usize,
    pub n_srfm: usize,
}

impl ComparisonRow {
    /// A row with no reference (e.g. Baseline).
    pub fn unreferenced(dist: &RunDistribution) -> Self {
        let (test_mean, test_std) = dist.mean_std();
        let (n_original, n_converted, n_srfm) = dist.mean_counts();
        ComparisonRow {
            test: dist.condition.clone(),
            reference: None,
            p_value: None,
            test_mean,
            test_std,
            reference_mean: None,
            reference_std: None,
            n_original,
            n_converted,
            n_srfm,
        }
    }

    pub fn stars(&self) -> &'static str {
        self.p_value.map_or("", significance_stars)
    }

    pub fn delta(&self) -> Option<f64> {
        Some(self.test_mean - self.reference_mean?)
    }
}

/// Two-sided Mann-Whitney U comparison of `test` against `reference`.
pub fn compare_conditions(test: &RunDistribution, reference: &RunDistribution) -> ComparisonRow {
    let u = mann_whitney_u(&test.scores(), &reference.scores());
    let (rm, rs) = reference.mean_std();
    ComparisonRow {
        reference: Some(reference.condition.clone()),
        p_value: Some(u.p_value),
        reference_mean: Some(rm),
        reference_std: Some(rs),
        ..ComparisonRow::unreferenced(test)
    }
}

/// Reference condition following the comparison pattern of the results
/// table: SR-FM alone and RVC-3 alone against Baseline/RVC-1, RVC alone
/// against the strongest SR-FM, RVC-1 + SR-FM against RVC-1, RVC-3 + SR-FM
/// against RVC-1 + SR-FM. Falls back to Baseline when the preferred
/// reference was not run.
pub fn default_reference(cond: &ConditionSpec, available: &[ConditionSpec]) -> Option<ConditionSpec> {
    if cond.is_baseline() {
        return None;
    }
    let has = |c: &ConditionSpec| available.contains(c);
    let preferred = match (cond.rvc, cond.srfm_k) {
        (None, _) => None,
        (Some(ConversionMode::Rvc1), 0) => available.iter().filter(|c| c.rvc.is_none() && c.srfm_k > 0).max_by_key(|c| c.srfm_k).cloned(),
        (Some(ConversionMode::Rvc3), 0) => Some(ConditionSpec { rvc: Some(ConversionMode::Rvc1), ..cond.clone() }),
        (Some(ConversionMode::Rvc1), _) => Some(ConditionSpec { rvc: Some(ConversionMode::Rvc1), srfm_k: 0, ..ConditionSpec::baseline() }),
        (Some(ConversionMode::Rvc3), _) => Some(ConditionSpec { rvc: Some(ConversionMode::Rvc1), ..cond.clone() }),
    };
    preferred.filter(has).or_else(|| Some(ConditionSpec::baseline()).filter(has))
}

const RUNS_HEADER: [&str; 6] = ["condition", "run_index", "weighted_f1", "n_original", "n_converted", "n_srfm"];

/// Per-run CSV `condition,run_index,weighted_f1,n_original,n_converted,n_srfm`.
pub fn write_runs<W: Write>(writer: W, dists: &[RunDistribution]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(RUNS_HEADER).map_err(|e| Error::csv("runs", e))?;
    for d in dists {
        for r in &d.results {
            wtr.write_record([
                d.condition.clone(),
                r.run_index.to_string(),
                r.score.to_string(),
                r.n_original.to_string(),
                r.n_converted.to_string(),
                r.n_srfm.to_string(),
            ])
            .map_err(|e| Error::csv("runs", e))?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<runs writer>", e))
}

/// Read a per-run CSV back into distributions, in order of first appearance.
/// The count columns are optional and read back as zero when absent.
pub fn read_runs<R: Read>(reader: R) -> Result<Vec<RunDistribution>> {
    let mut rdr = csv::Reader::from_reader(reader);
    // (condition, [(run_index, score, counts)])
    type Rows = Vec<(usize, f64, [usize; 3])>;
    let mut out: Vec<(String, Rows)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv("runs", e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let fmt = |msg: String| Error::Format { what: "runs".into(), line, msg };
        if rec.len() != 3 && rec.len() != 6 {
            return Err(fmt(format!("expected 3 or 6 columns, got {}", rec.len())));
        }
        let idx: usize = rec[1].parse().map_err(|_| fmt(format!("bad run_index {:?}", &rec[1])))?;
        let score: f64 = rec[2].parse().map_err(|_| fmt(format!("bad weighted_f1 {:?}", &rec[2])))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(fmt(format!("weighted_f1 {score} outside [0, 1]")));
        }
        let mut counts = [0usize; 3];
        for (c, cell) in counts.iter_mut().zip(rec.iter().skip(3)) {
            *c = cell.parse().map_err(|_| fmt(format!("bad count {cell:?}")))?;
        }
        match out.iter_mut().find(|(c, _)| c == &rec[0]) {
            Some((_, v)) => v.push((idx, score, counts)),
            None => out.push((rec[0].to_string(), vec![(idx, score, counts)])),
        }
    }
    Ok(out
        .into_iter()
        .map(|(c, mut v)| {
            v.sort_by_key(|x| x.0);
            let mut d = RunDistribution::from_scores(c, &v.iter().map(|x| x.1).collect::<Vec<_>>());
            for (r, (i, _, [o, c, s])) in d.results.iter_mut().zip(&v) {
                r.run_index = *i;
                (r.n_original, r.n_converted, r.n_srfm) = (*o, *c, *s);
            }
            d
        })
        .collect())
}

fn label_of(name: &str) -> String {
    name.parse::<ConditionSpec>().map(|c| c.label()).unwrap_or_else(|_| name.to_string())
}

/// Comparison table in results-table column order, with converted and SR-FM
/// counts broken out after the combined augmented count.
pub fn write_comparison<W: Write>(writer: W, group: &str, rows: &[ComparisonRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "Test",
        "Age group",
        "# Original",
        "# Augmented",
        "# Converted",
        "# SR-FM",
        "Tested against",
        "p-value",
        "Mean weighted F1",
    ])
    .map_err(|e| Error::csv("comparison", e))?;
    for r in rows {
        let aug = r.n_converted + r.n_srfm;
        wtr.write_record([
            label_of(&r.test),
            group.to_string(),
            r.n_original.to_string(),
            if aug == 0 { "-".into() } else { aug.to_string() },
            r.n_converted.to_string(),
            r.n_srfm.to_string(),
            r.reference.as_deref().map_or("-".into(), label_of),
            r.p_value.map_or("-".into(), |p| format!("{p:.3}")),
            format!("{:.3} ± {:.3}", r.test_mean, r.test_std),
        ])
        .map_err(|e| Error::csv("comparison", e))?;
    }
    wtr.flush().map_err(|e| Error::io("<comparison writer>", e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub condition: String,
    pub age_group: String,
    pub delta_f1: f64,
    pub stars: String,
}

/// CSV `condition,age_group,delta_f1,stars`.
pub fn write_deltas<W: Write>(writer: W, rows: &[DeltaRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["condition", "age_group", "delta_f1", "stars"]).map_err(|e| Error::csv("deltas", e))?;
    for r in rows {
        wtr.write_record([r.condition.clone(), r.age_group.clone(), format!("{:.4}", r.delta_f1), r.stars.clone()])
            .map_err(|e| Error::csv("deltas", e))?;
    }
    wtr.flush().map_err(|e| Error::io("<deltas writer>", e))
}
