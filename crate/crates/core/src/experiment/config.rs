use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::condition::ConditionSpec;
use crate::classifier::TrainConfig;
use crate::corpus::AgeGroup;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingSource {
    /// Compute log-mel statistics from the catalog's segment audio.
    Builtin,
    /// Precomputed table (CSV or binary).
    Table(PathBuf),
}

/// Age-group restriction of an experiment; `None` means all groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupSelection(pub Option<AgeGroup>);

impl GroupSelection {
    pub fn name(self) -> &'static str {
        self.0.map_or("all", AgeGroup::as_str)
    }

    pub fn label(self) -> &'static str {
        self.0.map_or("All", AgeGroup::label)
    }
}

impl FromStr for GroupSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("all") {
            Ok(GroupSelection(None))
        } else {
            s.parse().map(|g| GroupSelection(Some(g))).map_err(|e| Error::Config(e.to_string()))
        }
    }
}

/// `key = value` experiment description. Relative paths resolve against the
/// config file's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    pub catalog: PathBuf,
    pub embeddings: EmbeddingSource,
    pub conditions: Vec<ConditionSpec>,
    pub groups: Vec<GroupSelection>,
    pub n_runs: usize,
    pub base_seed: u64,
    pub workers: usize,
    pub train: TrainConfig,
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

pub fn parse_list<T: FromStr<Err = Error>>(v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse()).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut manifest = None;
        let mut catalog = None;
        let mut embeddings = EmbeddingSource::Builtin;
        let mut conditions = vec![ConditionSpec::baseline()];
        let mut groups = vec![GroupSelection(None)];
        let mut n_runs = 250;
        let mut base_seed = 0;
        let mut workers = 1;
        let mut train = TrainConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "manifest" => manifest = Some(base_dir.join(v)),
                "catalog" => catalog = Some(base_dir.join(v)),
                "embeddings" => {
                    embeddings = if v == "builtin" { EmbeddingSource::Builtin } else { EmbeddingSource::Table(base_dir.join(v)) }
                }
                "conditions" => conditions = parse_list(v)?,
                "age_groups" => groups = parse_list(v)?,
                "n_runs" => n_runs = parse_num(k, v)?,
                "base_seed" => base_seed = parse_num(k, v)?,
                "workers" => workers = parse_num(k, v)?,
                "h1" => train.h1 = parse_num(k, v)?,
                "h2" => train.h2 = parse_num(k, v)?,
                "leaky_slope" => train.leaky_slope = parse_num(k, v)?,
                "dropout" => train.dropout_p = parse_num(k, v)?,
                "lr" => train.lr = parse_num(k, v)?,
                "batch" => train.batch = parse_num(k, v)?,
                "epochs" => train.epochs = parse_num(k, v)?,
                "patience" => train.patience = parse_num(k, v)?,
                other => return Err(Error::Config(format!("line {}: unknown key {other:?}", lineno + 1))),
            }
        }
        let cfg = ExperimentConfig {
            manifest: manifest.ok_or_else(|| Error::Config("missing key manifest".into()))?,
            catalog: catalog.ok_or_else(|| Error::Config("missing key catalog".into()))?,
            embeddings,
            conditions,
            groups,
            n_runs,
            base_seed,
            workers,
            train,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if self.conditions.is_empty() || self.groups.is_empty() {
            return Err(Error::Config("need at least one condition and one age group".into()));
        }
        self.train.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let text = "\
# experiment
manifest = data/manifest.csv
catalog = data/catalog.csv
embeddings = emb.bin
conditions = baseline, rvc1, rvc1+srfm6
age_groups = young,all
n_runs = 5
base_seed = 42
workers = 2
h1 = 64
h2 = 32
dropout = 0.2
lr = 0.002
batch = 16
epochs = 30
patience = 5
leaky_slope = 0.02
";
        let cfg = ExperimentConfig::parse(text, Path::new("/base")).unwrap();
        assert_eq!(cfg.manifest, Path::new("/base/data/manifest.csv"));
        assert_eq!(cfg.embeddings, EmbeddingSource::Table("/base/emb.bin".into()));
        assert_eq!(cfg.conditions.len(), 3);
        assert_eq!(cfg.groups, vec![GroupSelection(Some(AgeGroup::Young)), GroupSelection(None)]);
        assert_eq!((cfg.n_runs, cfg.base_seed, cfg.workers), (5, 42, 2));
        assert_eq!((cfg.train.h1, cfg.train.h2, cfg.train.batch, cfg.train.epochs, cfg.train.patience), (64, 32, 16, 30, 5));
        assert_eq!((cfg.train.dropout_p, cfg.train.lr, cfg.train.leaky_slope), (0.2, 0.002, 0.02));
    }

    #[test]
    fn rejects_unknown_and_missing() {
        assert!(ExperimentConfig::parse("manifest = m\ncatalog = c\nbogus = 1\n", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("catalog = c\n", Path::new(".")).is_err());
        assert!(ExperimentConfig::parse("manifest = m\ncatalog = c\ndropout = 1.0\n", Path::new(".")).is_err());
        let ok = ExperimentConfig::parse("manifest = m\ncatalog = c\n", Path::new(".")).unwrap();
        assert_eq!(ok.n_runs, 250);
        assert_eq!(ok.embeddings, EmbeddingSource::Builtin);
    }
}
