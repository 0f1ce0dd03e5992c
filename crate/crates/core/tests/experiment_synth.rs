use std::collections::HashMap;
use std::sync::OnceLock;
use std::time::Instant;

use dialectkit::classifier::TrainConfig;
use dialectkit::conversion::ConversionMode;
use dialectkit::corpus::Provenance;
use dialectkit::embed::EmbeddingTable;
use dialectkit::experiment::{
    build_training_set, run_many, run_once, run_scheduled, run_seed, sample_split, ConditionSpec, ExperimentData, Partition,
    SegmentCatalog,
};
use dialectkit::synth::{MaterializeOptions, SynthCorpus, SynthCorpusSpec};

struct Fixture {
    corpus: SynthCorpus,
    catalog: SegmentCatalog,
    table: EmbeddingTable,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let t = Instant::now();
        let corpus = SynthCorpus::generate(SynthCorpusSpec { seed: 7, ..Default::default() }).unwrap();
        let opts = MaterializeOptions { modes: vec![ConversionMode::Rvc1], srfm_k: 1, seed: 7, ..Default::default() };
        let (catalog, table) = corpus.materialize(&opts).unwrap();
        eprintln!("materialized {} segments in {:?}", catalog.len(), t.elapsed());
        Fixture { corpus, catalog, table }
    })
}

fn data() -> ExperimentData<'static> {
    let f = fixture();
    ExperimentData { manifest: &f.corpus.manifest, catalog: &f.catalog, embeddings: &f.table }
}

fn cfg() -> TrainConfig {
    TrainConfig { h1: 64, h2: 32, ..Default::default() }
}

#[test]
fn baseline_separates_dialects() {
    let t = Instant::now();
    let dist = run_many(&data(), &ConditionSpec::baseline(), 5, 11, &cfg(), 1).unwrap();
    let (mean, _) = dist.mean_std();
    eprintln!("baseline scores {:?} in {:?}", dist.scores(), t.elapsed());
    assert!(mean >= 0.9, "{mean}");
}

#[test]
fn runs_are_deterministic_and_order_free() {
    let cond = ConditionSpec::baseline();
    let a = run_once(&data(), &cond, 3, run_seed(5, 3), &cfg()).unwrap();
    let b = run_once(&data(), &cond, 3, run_seed(5, 3), &cfg()).unwrap();
    assert_eq!(a, b);

    let fwd = run_scheduled(&data(), &cond, &[0, 1, 2, 3], 5, &cfg(), 1).unwrap();
    let rev = run_scheduled(&data(), &cond, &[3, 1, 0, 2], 5, &cfg(), 2).unwrap();
    let mut x = fwd.scores();
    let mut y = rev.scores();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    assert_eq!(x, y);
    assert_eq!(fwd, rev);
}

#[test]
fn single_run_has_zero_std() {
    let dist = run_many(&data(), &ConditionSpec::baseline(), 1, 2, &cfg(), 1).unwrap();
    assert_eq!(dist.results.len(), 1);
    assert_eq!(dist.mean_std().1, 0.0);
}

#[test]
fn training_sets_respect_partitions_and_counts() {
    let f = fixture();
    let base: ConditionSpec = "baseline".parse().unwrap();
    let rvc: ConditionSpec = "rvc1".parse().unwrap();
    let srfm: ConditionSpec = "srfm1".parse().unwrap();
    for i in 0..10 {
        let split = sample_split(&f.corpus.manifest, run_seed(1, i)).unwrap();
        let part = split.lookup();
        let b = build_training_set(&base, &split, &f.catalog).unwrap();
        let r = build_training_set(&rvc, &split, &f.catalog).unwrap();
        let s = build_training_set(&srfm, &split, &f.catalog).unwrap();
        for sets in [&b, &r, &s] {
            assert!(sets.train.iter().all(|x| part[x.speaker_id.as_str()] == Partition::Train));
            assert!(sets.val.iter().all(|x| part[x.speaker_id.as_str()] == Partition::Val && x.provenance == Provenance::Original));
            assert!(sets.test.iter().all(|x| part[x.speaker_id.as_str()] == Partition::Test && x.provenance == Provenance::Original));
            assert_eq!(sets.val.len(), b.val.len());
            assert_eq!(sets.test.len(), b.test.len());
        }
        assert!(b.train.iter().all(|x| x.provenance == Provenance::Original));
        assert_eq!(r.train.len(), 2 * b.train.len());
        let ratio = (s.train.len() - b.train.len()) as f64 / b.train.len() as f64;
        assert!((0.46..=0.52).contains(&ratio), "{ratio}");
    }
}

#[test]
fn converted_segments_pair_with_originals() {
    let f = fixture();
    let mut by_rec: HashMap<(&str, &str), usize> = HashMap::new();
    for r in &f.catalog.records {
        *by_rec.entry((r.recording_id.as_str(), r.tag.as_str())).or_default() += 1;
    }
    for rec in &f.corpus.manifest.recordings {
        assert_eq!(by_rec[&(rec.recording_id.as_str(), "orig")], by_rec[&(rec.recording_id.as_str(), "rvc1")]);
    }
}
