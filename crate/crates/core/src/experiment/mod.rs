//! Speaker-disjoint evaluation: split sampling, condition assembly, the
//! repeated-run harness and pairwise comparison of run distributions.

mod catalog;
mod compare;
mod condition;
mod config;
mod harness;
mod split;

pub use catalog::{SegmentCatalog, SegmentRecord};
pub use compare::{
    compare_conditions, default_reference, read_runs, write_comparison, write_deltas, write_runs, ComparisonRow, DeltaRow,
};
pub use condition::{build_training_set, ConditionSpec, RunSets, SrFmSource};
pub use config::{parse_list, EmbeddingSource, ExperimentConfig, GroupSelection};
pub use harness::{run_many, run_once, run_scheduled, run_seed, ExperimentData, RunDistribution, RunResult};
pub use split::{sample_split, split_size, DialectSplit, Partition, SplitAssignment};
