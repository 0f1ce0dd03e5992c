use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::segment::{segment_count, SEGMENT_SECONDS};
use crate::error::{Error, Result};

/// Dialects with fewer distinct speakers are dropped at load time.
pub const MIN_SPEAKERS_PER_DIALECT: usize = 3;

const HEADER: [&str; 6] = ["recording_id", "speaker_id", "dialect", "age_group", "path", "duration_s"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgeGroup {
    Young,
    Middle,
    Old,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 3] = [AgeGroup::Young, AgeGroup::Middle, AgeGroup::Old];

    pub fn as_str(self) -> &'static str {
        match self {
            AgeGroup::Young => "young",
            AgeGroup::Middle => "middle",
            AgeGroup::Old => "old",
        }
    }

    /// Capitalized label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            AgeGroup::Young => "Young",
            AgeGroup::Middle => "Middle",
            AgeGroup::Old => "Old",
        }
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgeGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "young" => Ok(AgeGroup::Young),
            "middle" => Ok(AgeGroup::Middle),
            "old" => Ok(AgeGroup::Old),
            other => Err(Error::Validation(format!("unknown age group {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub recording_id: String,
    pub speaker_id: String,
    pub dialect: String,
    pub age_group: AgeGroup,
    pub path: String,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub recordings: Vec<RecordingMeta>,
    pub dialects: BTreeSet<String>,
    pub age_groups: BTreeSet<AgeGroup>,
}

impl DatasetManifest {
    /// Validate recordings and drop dialects with fewer than three speakers.
    /// Returns the manifest and the names of dropped dialects.
    pub fn from_recordings(recordings: Vec<RecordingMeta>) -> Result<(Self, Vec<String>)> {
        if recordings.is_empty() {
            return Err(Error::Validation("manifest contains no recordings".into()));
        }
        let mut ids = HashSet::new();
        let mut speakers: HashMap<&str, (&str, AgeGroup)> = HashMap::new();
        for r in &recordings {
            if !ids.insert(r.recording_id.as_str()) {
                return Err(Error::Validation(format!("duplicate recording_id {}", r.recording_id)));
            }
            if !(r.duration_s.is_finite() && r.duration_s >= 0.0) {
                return Err(Error::Validation(format!(
                    "recording {} has invalid duration {}",
                    r.recording_id, r.duration_s
                )));
            }
            let entry = speakers.entry(&r.speaker_id).or_insert((&r.dialect, r.age_group));
            if entry.0 != r.dialect {
                return Err(Error::Validation(format!(
                    "speaker {} appears under dialects {} and {}",
                    r.speaker_id, entry.0, r.dialect
                )));
            }
            if entry.1 != r.age_group {
                return Err(Error::Validation(format!(
                    "speaker {} appears in age groups {} and {}",
                    r.speaker_id, entry.1, r.age_group
                )));
            }
        }
        let mut per_dialect: BTreeMap<&str, HashSet<&str>> = BTreeMap::new();
        for r in &recordings {
            per_dialect.entry(&r.dialect).or_default().insert(&r.speaker_id);
        }
        let dropped: Vec<String> = per_dialect
            .iter()
            .filter(|(_, s)| s.len() < MIN_SPEAKERS_PER_DIALECT)
            .map(|(d, _)| d.to_string())
            .collect();
        let kept: Vec<RecordingMeta> =
            recordings.into_iter().filter(|r| !dropped.contains(&r.dialect)).collect();
        if kept.is_empty() {
            return Err(Error::Validation(format!(
                "no dialect has at least {MIN_SPEAKERS_PER_DIALECT} speakers"
            )));
        }
        Ok((DatasetManifest::from_validated(kept), dropped))
    }

    fn from_validated(recordings: Vec<RecordingMeta>) -> Self {
        let dialects = recordings.iter().map(|r| r.dialect.clone()).collect();
        let age_groups = recordings.iter().map(|r| r.age_group).collect();
        DatasetManifest { recordings, dialects, age_groups }
    }

    /// Speaker ids per dialect.
    pub fn speakers_by_dialect(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for r in &self.recordings {
            out.entry(r.dialect.clone()).or_default().insert(r.speaker_id.clone());
        }
        out
    }

    pub fn speaker_count(&self) -> usize {
        self.recordings.iter().map(|r| r.speaker_id.as_str()).collect::<HashSet<_>>().len()
    }

    pub fn recording(&self, id: &str) -> Option<&RecordingMeta> {
        self.recordings.iter().find(|r| r.recording_id == id)
    }

    /// Sub-manifest of one age group, re-applying the dialect speaker floor.
    pub fn restrict_to(&self, group: AgeGroup) -> Result<(Self, Vec<String>)> {
        let recs = self.recordings.iter().filter(|r| r.age_group == group).cloned().collect();
        DatasetManifest::from_recordings(recs)
    }
}

pub fn parse_manifest<R: Read>(reader: R) -> Result<(DatasetManifest, Vec<String>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::csv("manifest", e))?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::Format {
            what: "manifest".into(),
            line: 1,
            msg: format!("expected header {:?}, found {:?}", HEADER.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut recordings = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::csv("manifest", e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let rec: RecordingMeta = row
            .deserialize(Some(&headers))
            .map_err(|e| Error::Format { what: "manifest".into(), line, msg: e.to_string() })?;
        recordings.push(rec);
    }
    DatasetManifest::from_recordings(recordings)
}

/// Load and validate a manifest file; dropped dialects are logged.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (manifest, dropped) = parse_manifest(file)?;
    for d in &dropped {
        log::warn!("dialect {d} has fewer than {MIN_SPEAKERS_PER_DIALECT} speakers; dropped");
    }
    Ok(manifest)
}

pub fn write_manifest<W: Write>(writer: W, manifest: &DatasetManifest) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in &manifest.recordings {
        wtr.serialize(r).map_err(|e| Error::csv("manifest", e))?;
    }
    if manifest.recordings.is_empty() {
        wtr.write_record(HEADER).map_err(|e| Error::csv("manifest", e))?;
    }
    wtr.flush().map_err(|e| Error::io("<manifest writer>", e))?;
    Ok(())
}

/// One row of the dataset overview table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub speakers: usize,
    pub total_seconds: f64,
    pub samples: usize,
    /// Speakers drawn for each of the validation and test sets.
    pub val_test_speakers: usize,
}

fn summary_row(label: &str, recs: &[&RecordingMeta]) -> SummaryRow {
    let mut per_dialect: BTreeMap<&str, HashSet<&str>> = BTreeMap::new();
    for r in recs {
        per_dialect.entry(&r.dialect).or_default().insert(&r.speaker_id);
    }
    SummaryRow {
        label: label.to_string(),
        speakers: recs.iter().map(|r| r.speaker_id.as_str()).collect::<HashSet<_>>().len(),
        total_seconds: recs.iter().map(|r| r.duration_s).sum(),
        samples: recs.iter().map(|r| segment_count(r.duration_s, SEGMENT_SECONDS)).sum(),
        val_test_speakers: per_dialect.values().map(|s| s.len().div_ceil(10)).sum(),
    }
}

/// Per-age-group overview rows followed by an `All` row.
pub fn summarize(manifest: &DatasetManifest) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for g in AgeGroup::ALL {
        let recs: Vec<&RecordingMeta> = manifest.recordings.iter().filter(|r| r.age_group == g).collect();
        if !recs.is_empty() {
            rows.push(summary_row(g.label(), &recs));
        }
    }
    let all: Vec<&RecordingMeta> = manifest.recordings.iter().collect();
    rows.push(summary_row("All", &all));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, spk: &str, dialect: &str, age: AgeGroup, dur: f64) -> RecordingMeta {
        RecordingMeta {
            recording_id: id.into(),
            speaker_id: spk.into(),
            dialect: dialect.into(),
            age_group: age,
            path: format!("audio/{id}.wav"),
            duration_s: dur,
        }
    }

    #[test]
    fn drops_dialects_below_three_speakers() {
        let mut recs = Vec::new();
        for s in 0..5 {
            recs.push(rec(&format!("a{s}"), &format!("sa{s}"), "A", AgeGroup::Old, 30.0));
        }
        for s in 0..2 {
            recs.push(rec(&format!("b{s}"), &format!("sb{s}"), "B", AgeGroup::Old, 30.0));
        }
        let (m, dropped) = DatasetManifest::from_recordings(recs).unwrap();
        assert_eq!(dropped, vec!["B".to_string()]);
        assert_eq!(m.dialects.iter().collect::<Vec<_>>(), vec!["A"]);
        assert_eq!(m.recordings.len(), 5);
    }

    #[test]
    fn empty_manifest_is_rejected() {
        let text = HEADER.join(",") + "\n";
        assert!(matches!(parse_manifest(text.as_bytes()), Err(Error::Validation(_))));
    }

    #[test]
    fn duplicate_recording_is_rejected() {
        let text = "recording_id,speaker_id,dialect,age_group,path,duration_s\n\
                    r1,s1,A,young,a.wav,10\nr1,s2,A,young,b.wav,10\n";
        let err = parse_manifest(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("duplicate recording_id r1"));
    }

    #[test]
    fn parse_error_reports_line() {
        let text = "recording_id,speaker_id,dialect,age_group,path,duration_s\n\
                    r1,s1,A,young,a.wav,10\nr2,s2,A,teen,b.wav,10\n";
        match parse_manifest(text.as_bytes()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "recording_id,speaker_id,dialect,age_group,path,duration_s\nr1,s1,A,young,a.wav,abc\n";
        match parse_manifest(text.as_bytes()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn speaker_in_two_dialects_is_rejected() {
        let recs = vec![
            rec("r1", "s1", "A", AgeGroup::Young, 10.0),
            rec("r2", "s1", "B", AgeGroup::Young, 10.0),
        ];
        assert!(DatasetManifest::from_recordings(recs).is_err());
    }

    #[test]
    fn write_then_parse_is_identity() {
        let recs: Vec<_> = (0..6)
            .map(|i| rec(&format!("r{i}"), &format!("s{}", i % 3), "A", AgeGroup::Middle, 12.5 + i as f64))
            .collect();
        let (m, _) = DatasetManifest::from_recordings(recs).unwrap();
        let mut buf = Vec::new();
        write_manifest(&mut buf, &m).unwrap();
        let (m2, _) = parse_manifest(buf.as_slice()).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn summary_counts() {
        let mut recs = Vec::new();
        for s in 0..12 {
            recs.push(rec(&format!("y{s}"), &format!("ys{s}"), "A", AgeGroup::Young, 25.0));
        }
        for s in 0..3 {
            recs.push(rec(&format!("o{s}"), &format!("os{s}"), "B", AgeGroup::Old, 9.9));
        }
        let (m, _) = DatasetManifest::from_recordings(recs).unwrap();
        let rows = summarize(&m);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].label, "Young");
        assert_eq!(rows[0].speakers, 12);
        assert_eq!(rows[0].samples, 24);
        assert_eq!(rows[0].val_test_speakers, 2);
        assert_eq!(rows[1].samples, 0);
        assert_eq!(rows[2].label, "All");
        assert_eq!(rows[2].speakers, 15);
        assert!((rows[2].total_seconds - (300.0 + 29.7)).abs() < 1e-9);
        assert_eq!(rows[2].val_test_speakers, 3);
    }
}
