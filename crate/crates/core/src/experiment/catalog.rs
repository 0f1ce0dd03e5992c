use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_audio, read_wav, AgeGroup, DatasetManifest, Provenance, Segment};
use crate::embed::{EmbeddingTable, MelExtractor};
use crate::error::{Error, Result};

/// One segment known to the experiment, original or derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub segment_id: String,
    pub recording_id: String,
    pub speaker_id: String,
    pub dialect: String,
    pub age_group: AgeGroup,
    #[serde(with = "provenance_str")]
    pub provenance: Provenance,
    /// Variant tag: `orig`, `rvc1`, `srfm0`, `rvc1srfm0`, ...
    pub tag: String,
    /// Audio location, relative to the catalog file; may be empty.
    pub path: String,
}

mod provenance_str {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::corpus::Provenance;

    pub fn serialize<S: Serializer>(p: &Provenance, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(p.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Provenance, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentCatalog {
    pub records: Vec<SegmentRecord>,
}

impl SegmentCatalog {
    /// Attach speaker metadata from `manifest` to segments.
    pub fn from_segments<'a>(
        manifest: &DatasetManifest,
        segments: impl IntoIterator<Item = (&'a Segment, String)>,
    ) -> Result<Self> {
        let mut records = Vec::new();
        for (seg, path) in segments {
            let meta = manifest
                .recording(&seg.recording_id)
                .ok_or_else(|| Error::Validation(format!("segment {} has unknown recording", seg.id())))?;
            records.push(SegmentRecord {
                segment_id: seg.id(),
                recording_id: seg.recording_id.clone(),
                speaker_id: meta.speaker_id.clone(),
                dialect: meta.dialect.clone(),
                age_group: meta.age_group,
                provenance: seg.provenance,
                tag: seg.tag.clone(),
                path,
            });
        }
        let cat = SegmentCatalog { records };
        cat.check_unique()?;
        Ok(cat)
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.segment_id.as_str()) {
                return Err(Error::DuplicateKey(r.segment_id.clone()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn extend(&mut self, other: SegmentCatalog) -> Result<()> {
        self.records.extend(other.records);
        self.check_unique()
    }

    /// Records whose recording belongs to `manifest`.
    pub fn restrict_to(&self, manifest: &DatasetManifest) -> SegmentCatalog {
        let ids: HashSet<&str> = manifest.recordings.iter().map(|r| r.recording_id.as_str()).collect();
        SegmentCatalog { records: self.records.iter().filter(|r| ids.contains(r.recording_id.as_str())).cloned().collect() }
    }

    /// Every record must agree with the manifest on speaker, dialect and age.
    pub fn check_against(&self, manifest: &DatasetManifest) -> Result<()> {
        for r in &self.records {
            let m = manifest
                .recording(&r.recording_id)
                .ok_or_else(|| Error::Validation(format!("segment {} refers to unknown recording {}", r.segment_id, r.recording_id)))?;
            if m.speaker_id != r.speaker_id || m.dialect != r.dialect || m.age_group != r.age_group {
                return Err(Error::Validation(format!("segment {} disagrees with the manifest", r.segment_id)));
            }
        }
        Ok(())
    }

    pub fn count_by_tag(&self) -> BTreeMap<&str, usize> {
        let mut m = BTreeMap::new();
        for r in &self.records {
            *m.entry(r.tag.as_str()).or_insert(0) += 1;
        }
        m
    }

    /// Built-in log-mel embedding of every record's audio. Relative paths
    /// resolve against `base_dir`.
    pub fn embed_builtin(&self, base_dir: &Path) -> Result<EmbeddingTable> {
        let mel = MelExtractor::default();
        let vectors: Vec<Result<Vec<f32>>> = self
            .records
            .par_iter()
            .map(|r| Ok(mel.embed(&normalize_audio(&read_wav(base_dir.join(&r.path))?)?)))
            .collect();
        let mut table = EmbeddingTable::new(mel.dim())?;
        for (r, v) in self.records.iter().zip(vectors) {
            table.insert(r.segment_id.clone(), v?)?;
        }
        Ok(table)
    }

    pub fn parse<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let records = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<SegmentRecord>, _>>()
            .map_err(|e| Error::csv("segment catalog", e))?;
        let cat = SegmentCatalog { records };
        cat.check_unique()?;
        Ok(cat)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(f))
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for r in &self.records {
            wtr.serialize(r).map_err(|e| Error::csv("segment catalog", e))?;
        }
        if self.records.is_empty() {
            wtr.write_record(["segment_id", "recording_id", "speaker_id", "dialect", "age_group", "provenance", "tag", "path"])
                .map_err(|e| Error::csv("segment catalog", e))?;
        }
        wtr.flush().map_err(|e| Error::io("<catalog writer>", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let cat = SegmentCatalog {
            records: vec![SegmentRecord {
                segment_id: "r__srfm0__0".into(),
                recording_id: "r".into(),
                speaker_id: "s".into(),
                dialect: "d".into(),
                age_group: AgeGroup::Old,
                provenance: Provenance::SrFm,
                tag: "srfm0".into(),
                path: "segments/r__srfm0__0.wav".into(),
            }],
        };
        let mut buf = Vec::new();
        cat.write(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("segment_id,recording_id,speaker_id,dialect,age_group,provenance,tag,path\n"));
        assert!(text.contains(",old,srfm,srfm0,"));
        assert_eq!(SegmentCatalog::parse(&buf[..]).unwrap(), cat);
        let mut empty = Vec::new();
        SegmentCatalog::default().write(&mut empty).unwrap();
        assert_eq!(SegmentCatalog::parse(&empty[..]).unwrap().len(), 0);
    }
}
