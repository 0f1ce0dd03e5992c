use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::corpus::DatasetManifest;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Partition {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DialectSplit {
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub train: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub run_seed: u64,
    pub dialects: BTreeMap<String, DialectSplit>,
}

impl SplitAssignment {
    pub fn partition_of(&self, speaker: &str) -> Option<Partition> {
        self.dialects.values().find_map(|d| {
            if d.val.iter().any(|s| s == speaker) {
                Some(Partition::Val)
            } else if d.test.iter().any(|s| s == speaker) {
                Some(Partition::Test)
            } else if d.train.iter().any(|s| s == speaker) {
                Some(Partition::Train)
            } else {
                None
            }
        })
    }

    /// Speaker id to partition for every assigned speaker.
    pub fn lookup(&self) -> std::collections::HashMap<&str, Partition> {
        let mut m = std::collections::HashMap::new();
        for d in self.dialects.values() {
            m.extend(d.val.iter().map(|s| (s.as_str(), Partition::Val)));
            m.extend(d.test.iter().map(|s| (s.as_str(), Partition::Test)));
            m.extend(d.train.iter().map(|s| (s.as_str(), Partition::Train)));
        }
        m
    }
}

/// Validation and test speakers per dialect: ⌈S / 10⌉ each.
pub fn split_size(speakers: usize) -> usize {
    speakers.div_ceil(10)
}

/// Draw val then test speakers per dialect without replacement; the rest
/// train. Deterministic per `run_seed` and independent of dialect order.
pub fn sample_split(manifest: &DatasetManifest, run_seed: u64) -> Result<SplitAssignment> {
    let mut dialects = BTreeMap::new();
    for (dialect, speakers) in manifest.speakers_by_dialect() {
        let s = speakers.len();
        let n = split_size(s);
        if 2 * n >= s {
            return Err(Error::InfeasibleSplit { dialect, speakers: s });
        }
        let mut pool: Vec<String> = speakers.into_iter().collect();
        let mut rng = rng_from_seed(derive_seed(run_seed, &["split".into(), dialect.as_str().into()]));
        pool.shuffle(&mut rng);
        let train = pool.split_off(2 * n);
        let test = pool.split_off(n);
        dialects.insert(dialect, DialectSplit { val: pool, test, train });
    }
    Ok(SplitAssignment { run_seed, dialects })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AgeGroup, RecordingMeta};

    fn manifest(sizes: &[usize]) -> DatasetManifest {
        let mut recs = Vec::new();
        for (d, &n) in sizes.iter().enumerate() {
            for s in 0..n {
                recs.push(RecordingMeta {
                    recording_id: format!("d{d}s{s}r0"),
                    speaker_id: format!("d{d}s{s}"),
                    dialect: format!("dialect{d:02}"),
                    age_group: AgeGroup::Middle,
                    path: String::new(),
                    duration_s: 20.0,
                });
            }
        }
        DatasetManifest::from_recordings(recs).unwrap().0
    }

    #[test]
    fn sizes_from_formula() {
        let m = manifest(&[10, 3, 25]);
        let s = sample_split(&m, 1).unwrap();
        let got: Vec<(usize, usize, usize)> = s.dialects.values().map(|d| (d.val.len(), d.test.len(), d.train.len())).collect();
        assert_eq!(got, vec![(1, 1, 8), (1, 1, 1), (3, 3, 19)]);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let m = manifest(&[30, 30]);
        assert_eq!(sample_split(&m, 5).unwrap(), sample_split(&m, 5).unwrap());
        assert_ne!(sample_split(&m, 5).unwrap(), sample_split(&m, 6).unwrap());
    }

    #[test]
    fn disjoint_and_complete() {
        let m = manifest(&[4, 11, 40]);
        for seed in 0..50 {
            let s = sample_split(&m, seed).unwrap();
            let lookup = s.lookup();
            assert_eq!(lookup.len(), m.speaker_count());
            let total: usize = s.dialects.values().map(|d| d.val.len() + d.test.len() + d.train.len()).sum();
            assert_eq!(total, m.speaker_count());
        }
    }

    #[test]
    fn ceil_helper() {
        assert_eq!(split_size(1), 1);
        assert_eq!(split_size(10), 1);
        assert_eq!(split_size(11), 2);
        assert_eq!(split_size(25), 3);
    }
}
