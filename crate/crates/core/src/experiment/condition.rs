use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use super::catalog::{SegmentCatalog, SegmentRecord};
use super::split::{Partition, SplitAssignment};
use crate::augment::srfm_tag;
use crate::conversion::ConversionMode;
use crate::corpus::Provenance;
use crate::error::{Error, Result};

/// Which segments SR-FM copies are drawn from in a combined condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SrFmSource {
    Originals,
    OriginalsAndConverted,
}

/// A training condition. Names parse as `baseline`, `srfm6`, `rvc1`,
/// `rvc3+srfm6`, with an optional `@all` suffix that also draws SR-FM
/// copies from converted audio.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConditionSpec {
    pub rvc: Option<ConversionMode>,
    pub srfm_k: usize,
    pub srfm_source: SrFmSource,
}

impl ConditionSpec {
    pub fn baseline() -> Self {
        ConditionSpec { rvc: None, srfm_k: 0, srfm_source: SrFmSource::Originals }
    }

    pub fn is_baseline(&self) -> bool {
        self.rvc.is_none() && self.srfm_k == 0
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    /// Human label in table style, e.g. `RVC-1 + SR-FM-6`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(m) = self.rvc {
            parts.push(match m {
                ConversionMode::Rvc1 => "RVC-1".to_string(),
                ConversionMode::Rvc3 => "RVC-3".to_string(),
            });
        }
        if self.srfm_k > 0 {
            parts.push(format!("SR-FM-{}", self.srfm_k));
        }
        if parts.is_empty() {
            "Baseline".into()
        } else {
            parts.join(" + ")
        }
    }

    /// Catalog tags admitted into the training set (always includes `orig`).
    pub fn train_tags(&self) -> HashSet<String> {
        let mut tags = HashSet::from(["orig".to_string()]);
        if let Some(m) = self.rvc {
            tags.insert(m.as_str().to_string());
        }
        for pass in 0..self.srfm_k {
            tags.insert(srfm_tag("orig", pass));
            if let (Some(m), SrFmSource::OriginalsAndConverted) = (self.rvc, self.srfm_source) {
                tags.insert(srfm_tag(m.as_str(), pass));
            }
        }
        tags
    }
}

impl fmt::Display for ConditionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.rvc, self.srfm_k) {
            (None, 0) => f.write_str("baseline")?,
            (None, k) => write!(f, "srfm{k}")?,
            (Some(m), 0) => f.write_str(m.as_str())?,
            (Some(m), k) => write!(f, "{m}+srfm{k}")?,
        }
        if self.srfm_k > 0 && self.rvc.is_some() && self.srfm_source == SrFmSource::OriginalsAndConverted {
            f.write_str("@all")?;
        }
        Ok(())
    }
}

impl FromStr for ConditionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse condition {s:?}"));
        let lower = s.trim().to_ascii_lowercase().replace("sr-fm-", "srfm").replace("rvc-", "rvc").replace(' ', "");
        let (body, all) = match lower.strip_suffix("@all") {
            Some(b) => (b.to_string(), true),
            None => (lower, false),
        };
        if body == "baseline" {
            return if all { Err(bad()) } else { Ok(ConditionSpec::baseline()) };
        }
        let mut spec = ConditionSpec::baseline();
        for part in body.split('+') {
            if let Some(k) = part.strip_prefix("srfm") {
                let k: usize = k.parse().map_err(|_| bad())?;
                if k == 0 || spec.srfm_k != 0 {
                    return Err(bad());
                }
                spec.srfm_k = k;
            } else if part == "rvc1" || part == "rvc3" {
                if spec.rvc.is_some() {
                    return Err(bad());
                }
                spec.rvc = Some(part.parse()?);
            } else {
                return Err(bad());
            }
        }
        if all {
            if spec.rvc.is_none() || spec.srfm_k == 0 {
                return Err(bad());
            }
            spec.srfm_source = SrFmSource::OriginalsAndConverted;
        }
        Ok(spec)
    }
}

/// Segments for one run, as references into the catalog.
#[derive(Debug, Clone)]
pub struct RunSets<'a> {
    pub train: Vec<&'a SegmentRecord>,
    pub val: Vec<&'a SegmentRecord>,
    pub test: Vec<&'a SegmentRecord>,
}

impl RunSets<'_> {
    pub fn count_train(&self, pred: impl Fn(Provenance) -> bool) -> usize {
        self.train.iter().filter(|r| pred(r.provenance)).count()
    }
}

/// Train = originals of train speakers plus the condition's derived
/// segments of train speakers; val and test hold originals only.
pub fn build_training_set<'a>(
    cond: &ConditionSpec,
    split: &SplitAssignment,
    catalog: &'a SegmentCatalog,
) -> Result<RunSets<'a>> {
    let tags = cond.train_tags();
    let lookup = split.lookup();
    let mut sets = RunSets { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    let mut converted_recordings = HashSet::new();
    let mut train_originals = Vec::new();
    for r in &catalog.records {
        let Some(&part) = lookup.get(r.speaker_id.as_str()) else { continue };
        match (part, r.provenance) {
            (Partition::Val, Provenance::Original) => sets.val.push(r),
            (Partition::Test, Provenance::Original) => sets.test.push(r),
            (Partition::Train, p) if tags.contains(&r.tag) => {
                match p {
                    Provenance::Original => train_originals.push(r.recording_id.as_str()),
                    Provenance::Converted => {
                        converted_recordings.insert(r.recording_id.as_str());
                    }
                    Provenance::SrFm | Provenance::ConvertedSrFm => {}
                }
                sets.train.push(r);
            }
            _ => {}
        }
    }
    if cond.rvc.is_some() {
        if let Some(missing) = train_originals.iter().find(|id| !converted_recordings.contains(*id)) {
            let mode = cond.rvc.map(|m| m.as_str()).unwrap_or_default();
            return Err(Error::MissingConverted(format!("{missing} ({mode})")));
        }
    }
    if cond.srfm_k > 0 {
        let last = srfm_tag("orig", cond.srfm_k - 1);
        if !catalog.records.iter().any(|r| r.tag == last) {
            return Err(Error::Config(format!("condition {cond} needs SR-FM pass {} segments ({last})", cond.srfm_k - 1)));
        }
    }
    if sets.train.is_empty() || sets.val.is_empty() || sets.test.is_empty() {
        return Err(Error::Validation(format!("condition {cond}: a partition has no segments")));
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        for (text, name, label) in [
            ("baseline", "baseline", "Baseline"),
            ("SR-FM-6", "srfm6", "SR-FM-6"),
            ("rvc1", "rvc1", "RVC-1"),
            ("RVC-3 + SR-FM-6", "rvc3+srfm6", "RVC-3 + SR-FM-6"),
            ("rvc1+srfm1@all", "rvc1+srfm1@all", "RVC-1 + SR-FM-1"),
        ] {
            let c: ConditionSpec = text.parse().unwrap();
            assert_eq!(c.name(), name);
            assert_eq!(c.label(), label);
            assert_eq!(c.name().parse::<ConditionSpec>().unwrap(), c);
        }
        for bad in ["", "srfm0", "rvc2", "baseline@all", "srfm1@all", "rvc1+rvc3", "srfm1+srfm2"] {
            assert!(bad.parse::<ConditionSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn baseline_iff_no_rvc_and_no_srfm() {
        assert!(ConditionSpec::baseline().is_baseline());
        assert!(!"srfm1".parse::<ConditionSpec>().unwrap().is_baseline());
        assert!(!"rvc1".parse::<ConditionSpec>().unwrap().is_baseline());
    }

    #[test]
    fn tags() {
        let c: ConditionSpec = "rvc1+srfm2@all".parse().unwrap();
        let want: HashSet<String> = ["orig", "rvc1", "srfm0", "srfm1", "rvc1srfm0", "rvc1srfm1"].map(String::from).into();
        assert_eq!(c.train_tags(), want);
        let c: ConditionSpec = "rvc3+srfm1".parse().unwrap();
        let want: HashSet<String> = ["orig", "rvc3", "srfm0"].map(String::from).into();
        assert_eq!(c.train_tags(), want);
    }
}
