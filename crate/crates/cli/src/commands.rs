use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use dialectkit::acoustics::{project_embeddings, summarize_pairs, ProjectionMethod};
use dialectkit::augment::{generate_sr_fm_copies, write_sidecar, SrFmConfig};
use dialectkit::conversion::{
    assign_targets, pitch_stability_from_means, validate_converted_pair, ConversionManifest, ConversionMode, ConversionPair,
    PairCheckConfig, TargetSpeakers, Verdict,
};
use dialectkit::corpus::{
    load_manifest, normalize_audio, read_wav, segment_recording, segment_with, summarize, write_manifest, AgeGroup,
    DatasetManifest, Provenance, Segment, Waveform, SEGMENT_SECONDS,
};
use dialectkit::embed::load_embedding_table;
use dialectkit::experiment::{
    compare_conditions, default_reference, parse_list, read_runs, run_many, write_comparison, write_deltas, write_runs,
    ComparisonRow, ConditionSpec, DeltaRow, EmbeddingSource, ExperimentConfig, ExperimentData, GroupSelection,
    SegmentCatalog,
};
use dialectkit::synth::{overview_manifest, SynthCorpus, SynthCorpusSpec};

use crate::{AnalyzeArgs, AugmentArgs, Cli, Command, EmbedArgs, IngestArgs, RunArgs, SegmentArgs, SynthArgs, ValidateArgs};

/// Error as reported on stderr: a short kind, a message and the exit status.
#[derive(Debug)]
pub struct CliError {
    kind: &'static str,
    message: String,
    code: u8,
}

impl CliError {
    fn usage(kind: &'static str, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into(), code: 2 }
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    pub fn exit_code(&self) -> u8 {
        self.code
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<dialectkit::Error> for CliError {
    fn from(e: dialectkit::Error) -> Self {
        let code = if matches!(e, dialectkit::Error::Config(_)) { 2 } else { 1 };
        CliError { kind: e.kind(), message: e.to_string(), code }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError { kind: "io", message: format!("i/o error on {}: {e}", path.display()), code: 1 }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?))
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

struct Ctx<'a> {
    cli: &'a Cli,
    config: Option<ExperimentConfig>,
}

impl Ctx<'_> {
    fn require_config(&self) -> Result<&ExperimentConfig> {
        self.config.as_ref().ok_or_else(|| CliError::usage("missing_config", "this command needs --config"))
    }

    /// Explicit flag, else the config's value.
    fn pick(&self, flag: &Option<PathBuf>, from_config: fn(&ExperimentConfig) -> &PathBuf, what: &str) -> Result<PathBuf> {
        match (flag, &self.config) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(c)) => Ok(from_config(c).clone()),
            (None, None) => Err(CliError::usage("missing_config", format!("need --{what} or --config"))),
        }
    }

    fn manifest_path(&self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        self.pick(flag, |c| &c.manifest, "manifest")
    }

    fn catalog_path(&self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        self.pick(flag, |c| &c.catalog, "catalog")
    }

    fn seed(&self) -> u64 {
        self.cli.seed.or(self.config.as_ref().map(|c| c.base_seed)).unwrap_or(0)
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cli.out_dir.join(name)
    }
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) if !p.is_file() => {
            return Err(CliError::usage("missing_config", format!("config file {} not found", p.display())));
        }
        Some(p) => Some(ExperimentConfig::load(p).map_err(|e| CliError { code: 2, ..e.into() })?),
        None => None,
    };
    let ctx = Ctx { cli, config };
    fs::create_dir_all(&cli.out_dir).map_err(|e| io_err(&cli.out_dir, e))?;
    match &cli.command {
        Command::Synth(a) => synth(&ctx, a),
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Segment(a) => segment(&ctx, a),
        Command::Augment(a) => augment(&ctx, a),
        Command::ValidateConversion(a) => validate_conversion(&ctx, a),
        Command::Embed(a) => embed(&ctx, a),
        Command::Run(a) => run(&ctx, a),
        Command::Report => report(&ctx),
        Command::Analyze(a) => analyze(&ctx, a),
    }
}

/// Manifest with recording paths resolved against its directory.
fn load_resolved_manifest(path: &Path) -> Result<DatasetManifest> {
    let mut m = load_manifest(path)?;
    let base = parent_dir(path);
    for r in &mut m.recordings {
        if !r.path.is_empty() {
            r.path = base.join(&r.path).to_string_lossy().into_owned();
        }
    }
    Ok(m)
}

fn load_audio(path: &Path) -> Result<Waveform> {
    Ok(normalize_audio(&read_wav(path)?)?)
}

fn write_catalog(path: &Path, catalog: &SegmentCatalog) -> Result<()> {
    catalog.write(create(path)?)?;
    Ok(())
}

fn synth(ctx: &Ctx<'_>, a: &SynthArgs) -> Result<()> {
    let seed = ctx.seed();
    if a.overview {
        let m = overview_manifest(seed)?;
        write_manifest(create(&ctx.out("manifest.csv"))?, &m)?;
        println!("wrote {} recordings to {}", m.recordings.len(), ctx.out("manifest.csv").display());
        return Ok(());
    }
    let spec = SynthCorpusSpec {
        n_dialects: a.dialects,
        speakers_per_dialect: a.speakers,
        recordings_per_speaker: a.recordings,
        recording_s: a.seconds,
        seed,
    };
    let corpus = SynthCorpus::generate(spec)?;
    let targets = corpus.target_speakers();
    let by_id: BTreeMap<&str, _> = corpus.targets.values().map(|t| (t.speaker_id.as_str(), t)).collect();
    let modes = [ConversionMode::Rvc1, ConversionMode::Rvc3];
    let assignments = modes.iter().map(|&m| assign_targets(&corpus.manifest, m, &targets)).collect::<dialectkit::Result<Vec<_>>>()?;
    for dir in ["audio", "conv/rvc1", "conv/rvc3"] {
        let p = ctx.out(dir);
        fs::create_dir_all(&p).map_err(|e| io_err(&p, e))?;
    }
    corpus.manifest.recordings.par_iter().try_for_each(|rec| -> Result<()> {
        dialectkit::corpus::write_wav(ctx.out(&rec.path), &corpus.recording_audio(rec))?;
        for asg in &assignments {
            let target = by_id[asg.mapping[&rec.age_group].as_str()];
            let path = ctx.out(&format!("conv/{}/{}.wav", asg.mode, rec.recording_id));
            dialectkit::corpus::write_wav(path, &corpus.converted_audio(rec, target))?;
        }
        Ok(())
    })?;
    write_manifest(create(&ctx.out("manifest.csv"))?, &corpus.manifest)?;
    let mut conv = ConversionManifest::default();
    for asg in &assignments {
        for rec in &corpus.manifest.recordings {
            conv.pairs.push(ConversionPair {
                recording_id: rec.recording_id.clone(),
                converted_path: PathBuf::from(format!("conv/{}/{}.wav", asg.mode, rec.recording_id)),
                target_speaker_id: asg.mapping[&rec.age_group].clone(),
                mode: asg.mode,
            });
        }
    }
    conv.write(create(&ctx.out("conversion.csv"))?)?;
    let targets_line = AgeGroup::ALL
        .iter()
        .map(|&g| format!("{}={}", g.as_str(), targets.get(g).unwrap_or_default()))
        .collect::<Vec<_>>()
        .join(",");
    let mut cfg = create(&ctx.out("experiment.cfg"))?;
    writeln!(
        cfg,
        "# synthetic corpus, conversion targets {targets_line}\n\
         manifest = manifest.csv\n\
         catalog = catalog.csv\n\
         embeddings = embeddings.csv\n\
         conditions = baseline,rvc1,rvc3\n\
         age_groups = all\n\
         n_runs = 250\n\
         base_seed = {seed}\n\
         workers = 1"
    )
    .map_err(|e| io_err(&ctx.out("experiment.cfg"), e))?;
    cfg.flush().map_err(|e| io_err(&ctx.out("experiment.cfg"), e))?;
    println!(
        "wrote {} recordings, {} converted files; targets {targets_line}",
        corpus.manifest.recordings.len(),
        conv.pairs.len()
    );
    Ok(())
}

fn ingest(ctx: &Ctx<'_>, a: &IngestArgs) -> Result<()> {
    let path = ctx.manifest_path(&a.manifest)?;
    let m = load_resolved_manifest(&path)?;
    if let Some(r) = m.recordings.iter().find(|r| !r.path.is_empty() && !Path::new(&r.path).is_file()) {
        return Err(dialectkit::Error::Validation(format!("recording {} audio {} not found", r.recording_id, r.path)).into());
    }
    let rows = summarize(&m);
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let csv_err = |e: csv::Error| CliError { kind: "format", message: e.to_string(), code: 1 };
        w.write_record(["Age group", "# Speakers", "Total Seconds", "# Samples", "# Val/Test Speakers"]).map_err(csv_err)?;
        for r in &rows {
            w.write_record([
                r.label.clone(),
                r.speakers.to_string(),
                format!("{:.2}", r.total_seconds),
                r.samples.to_string(),
                r.val_test_speakers.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| io_err(Path::new("<summary>"), e))?;
    }
    let out = ctx.out("summary.csv");
    fs::write(&out, &buf).map_err(|e| io_err(&out, e))?;
    print!("{}", String::from_utf8_lossy(&buf));
    eprintln!("{} recordings, {} dialects", m.recordings.len(), m.dialects.len());
    Ok(())
}

fn segment(ctx: &Ctx<'_>, a: &SegmentArgs) -> Result<()> {
    let manifest = load_resolved_manifest(&ctx.manifest_path(&a.manifest)?)?;
    let mut jobs: Vec<(String, PathBuf, Provenance, String)> = manifest
        .recordings
        .iter()
        .map(|r| (r.recording_id.clone(), PathBuf::from(&r.path), Provenance::Original, "orig".to_string()))
        .collect();
    if let Some(conv_path) = &a.conversion {
        let conv = ConversionManifest::load(conv_path)?;
        let base = parent_dir(conv_path);
        for name in &a.modes {
            let mode: ConversionMode = name.parse()?;
            let pairs = conv.for_mode(mode);
            for r in &manifest.recordings {
                let p = pairs
                    .get(r.recording_id.as_str())
                    .ok_or_else(|| dialectkit::Error::MissingConverted(format!("{} ({mode})", r.recording_id)))?;
                jobs.push((r.recording_id.clone(), base.join(&p.converted_path), Provenance::Converted, mode.as_str().to_string()));
            }
        }
    }
    let seg_dir = ctx.out("segments");
    fs::create_dir_all(&seg_dir).map_err(|e| io_err(&seg_dir, e))?;
    let per_job: Vec<Vec<(Segment, String)>> = jobs
        .par_iter()
        .map(|(id, path, prov, tag)| -> Result<Vec<(Segment, String)>> {
            let w = load_audio(path)?;
            let segs = if *prov == Provenance::Original {
                segment_recording(&w, id, SEGMENT_SECONDS)
            } else {
                segment_with(&w, id, SEGMENT_SECONDS, *prov, tag)
            };
            segs.into_iter()
                .map(|s| {
                    let rel = format!("segments/{}.wav", s.id());
                    dialectkit::corpus::write_wav(ctx.out(&rel), &s.waveform)?;
                    Ok((s, rel))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let flat: Vec<(&Segment, String)> = per_job.iter().flatten().map(|(s, p)| (s, p.clone())).collect();
    let catalog = SegmentCatalog::from_segments(&manifest, flat)?;
    write_catalog(&ctx.out("catalog.csv"), &catalog)?;
    for (tag, n) in catalog.count_by_tag() {
        println!("{tag}\t{n}");
    }
    Ok(())
}

fn segment_index(segment_id: &str) -> Result<usize> {
    segment_id
        .rsplit("__")
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| dialectkit::Error::Validation(format!("segment id {segment_id} has no window index")).into())
}

/// Rewrite relative catalog paths so they stay valid when the catalog is
/// written to `out_dir` instead of `from_dir`.
fn rebase(catalog: &mut SegmentCatalog, from_dir: &Path, out_dir: &Path) {
    let same = match (from_dir.canonicalize(), out_dir.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if same {
        return;
    }
    for r in &mut catalog.records {
        if !r.path.is_empty() && Path::new(&r.path).is_relative() {
            r.path = from_dir.join(&r.path).to_string_lossy().into_owned();
        }
    }
}

fn augment(ctx: &Ctx<'_>, a: &AugmentArgs) -> Result<()> {
    if a.k == 0 {
        return Err(CliError::usage("config", "--k must be at least 1"));
    }
    let manifest = load_resolved_manifest(&ctx.manifest_path(&a.manifest)?)?;
    let cat_path = ctx.catalog_path(&a.catalog)?;
    let cat_dir = parent_dir(&cat_path);
    let mut catalog = SegmentCatalog::load(&cat_path)?;
    catalog.check_against(&manifest)?;
    // Drop earlier SR-FM output so reruns replace it
    catalog.records.retain(|r| !matches!(r.provenance, Provenance::SrFm | Provenance::ConvertedSrFm));
    let mut groups: BTreeMap<(String, String), Vec<&dialectkit::experiment::SegmentRecord>> = BTreeMap::new();
    for r in &catalog.records {
        let wanted = r.provenance == Provenance::Original || (a.include_converted && r.provenance == Provenance::Converted);
        if wanted {
            groups.entry((r.recording_id.clone(), r.tag.clone())).or_default().push(r);
        }
    }
    let seed = ctx.seed();
    let cfg = SrFmConfig::default();
    let seg_dir = ctx.out("segments");
    fs::create_dir_all(&seg_dir).map_err(|e| io_err(&seg_dir, e))?;
    let groups: Vec<_> = groups.into_iter().collect();
    let produced: Vec<Vec<(dialectkit::augment::AugmentedSegment, String)>> = groups
        .par_iter()
        .map(|((rec, _), recs)| -> Result<_> {
            let segs = recs
                .iter()
                .map(|r| {
                    let waveform = read_wav(cat_dir.join(&r.path))?;
                    let segment_index = segment_index(&r.segment_id)?;
                    Ok(Segment {
                        start_s: segment_index as f64 * SEGMENT_SECONDS,
                        waveform,
                        recording_id: rec.clone(),
                        segment_index,
                        provenance: r.provenance,
                        tag: r.tag.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            generate_sr_fm_copies(&segs, a.k, seed, &cfg)?
                .into_iter()
                .map(|aug| {
                    let rel = format!("segments/{}.wav", aug.segment.id());
                    dialectkit::corpus::write_wav(ctx.out(&rel), &aug.segment.waveform)?;
                    Ok((aug, rel))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let flat: Vec<_> = produced.into_iter().flatten().collect();
    rebase(&mut catalog, &cat_dir, &ctx.cli.out_dir);
    catalog.extend(SegmentCatalog::from_segments(&manifest, flat.iter().map(|(aug, p)| (&aug.segment, p.clone())))?)?;
    write_catalog(&ctx.out("catalog.csv"), &catalog)?;
    let items: Vec<_> = flat.into_iter().map(|(aug, _)| aug).collect();
    write_sidecar(create(&ctx.out("srfm_sidecar.csv"))?, &items)?;
    for (tag, n) in catalog.count_by_tag() {
        println!("{tag}\t{n}");
    }
    Ok(())
}

fn parse_targets(s: &str) -> Result<TargetSpeakers> {
    let mut t = TargetSpeakers::default();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::usage("config", format!("bad target {part:?}; expected group=speaker")))?;
        let slot = match k.trim().parse::<AgeGroup>()? {
            AgeGroup::Young => &mut t.young,
            AgeGroup::Middle => &mut t.middle,
            AgeGroup::Old => &mut t.old,
        };
        *slot = Some(v.trim().to_string());
    }
    Ok(t)
}

fn validate_conversion(ctx: &Ctx<'_>, a: &ValidateArgs) -> Result<()> {
    let manifest = load_resolved_manifest(&ctx.manifest_path(&a.manifest)?)?;
    let mode: ConversionMode = a.mode.parse()?;
    let targets = parse_targets(&a.targets)?;
    let assignment = assign_targets(&manifest, mode, &targets)?;
    let conv = ConversionManifest::load(&a.conversion)?;
    let base = parent_dir(&a.conversion);
    conv.validate(&manifest, &assignment, Some(&base))?;
    let pairs = conv.for_mode(mode);
    let check = PairCheckConfig::default();
    let loaded: Vec<(String, Waveform, Waveform)> = manifest
        .recordings
        .par_iter()
        .map(|r| -> Result<_> {
            let orig = read_wav(&r.path)?;
            let converted = read_wav(base.join(&pairs[r.recording_id.as_str()].converted_path))?;
            Ok((r.recording_id.clone(), orig, converted))
        })
        .collect::<Result<_>>()?;
    let reports: Vec<_> = loaded.par_iter().map(|(_, o, c)| validate_converted_pair(o, c, &check)).collect();
    let out = ctx.out(&format!("conversion_check_{mode}.csv"));
    let mut w = csv::Writer::from_writer(create(&out)?);
    let csv_err = |e: csv::Error| CliError { kind: "format", message: e.to_string(), code: 1 };
    w.write_record(["recording_id", "verdict", "rate_ok", "channels_ok", "duration_drift_s", "mean_pitch_orig_hz", "mean_pitch_conv_hz"])
        .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
    let mut counts = [0usize; 3];
    for ((id, _, _), r) in loaded.iter().zip(&reports) {
        let (i, name) = match r.verdict {
            Verdict::Pass => (0, "pass"),
            Verdict::Warn => (1, "warn"),
            Verdict::Fail => (2, "fail"),
        };
        counts[i] += 1;
        w.write_record([
            id.clone(),
            name.to_string(),
            r.rate_ok.to_string(),
            r.channels_ok.to_string(),
            format!("{:.4}", r.duration_drift_s),
            opt(r.mean_pitch_orig_hz),
            opt(r.mean_pitch_conv_hz),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_err(&out, e))?;
    println!("{mode}: {} pass, {} warn, {} fail", counts[0], counts[1], counts[2]);
    let means: Vec<_> = reports
        .iter()
        .filter(|r| r.verdict != Verdict::Fail)
        .map(|r| (r.mean_pitch_orig_hz, r.mean_pitch_conv_hz))
        .collect();
    if !means.is_empty() {
        println!("pitch: {}", pitch_stability_from_means(&means)?);
    }
    if counts[2] > 0 {
        return Err(dialectkit::Error::Validation(format!("{} converted files failed; see {}", counts[2], out.display())).into());
    }
    Ok(())
}

fn embed(ctx: &Ctx<'_>, a: &EmbedArgs) -> Result<()> {
    let cat_path = ctx.catalog_path(&a.catalog)?;
    let catalog = SegmentCatalog::load(&cat_path)?;
    let table = if a.backend == "builtin" {
        catalog.embed_builtin(&parent_dir(&cat_path))?
    } else {
        let t = load_embedding_table(&a.backend)?;
        if let Some(r) = catalog.records.iter().find(|r| t.get(&r.segment_id).is_none()) {
            return Err(dialectkit::Error::MissingEmbedding(r.segment_id.clone()).into());
        }
        t
    };
    let out = ctx.out(if a.binary { "embeddings.bin" } else { "embeddings.csv" });
    table.save(&out, a.binary)?;
    println!("{} embeddings of dimension {} written to {}", table.len(), table.dim(), out.display());
    Ok(())
}

fn run(ctx: &Ctx<'_>, a: &RunArgs) -> Result<()> {
    let cfg = ctx.require_config()?;
    let conditions: Vec<ConditionSpec> = match &a.conditions {
        Some(s) => parse_list(s)?,
        None => cfg.conditions.clone(),
    };
    let groups: Vec<GroupSelection> = match &a.groups {
        Some(s) => parse_list(s)?,
        None => cfg.groups.clone(),
    };
    let n_runs = a.runs.unwrap_or(cfg.n_runs);
    if n_runs == 0 || conditions.is_empty() || groups.is_empty() {
        return Err(CliError::usage("config", "need at least one run, condition and age group"));
    }
    let workers = ctx.cli.workers.unwrap_or(cfg.workers);
    let seed = ctx.seed();
    let manifest = load_manifest(&cfg.manifest)?;
    let catalog = SegmentCatalog::load(&cfg.catalog)?;
    catalog.check_against(&manifest)?;
    let embeddings = match &cfg.embeddings {
        EmbeddingSource::Table(p) => load_embedding_table(p)?,
        EmbeddingSource::Builtin => catalog.embed_builtin(&parent_dir(&cfg.catalog))?,
    };
    for g in groups {
        let (m, cat) = match g.0 {
            None => (manifest.clone(), catalog.clone()),
            Some(age) => {
                let (m, dropped) = manifest.restrict_to(age)?;
                for d in dropped {
                    log::warn!("{}: dialect {d} has too few speakers; dropped", g.name());
                }
                let cat = catalog.restrict_to(&m);
                (m, cat)
            }
        };
        let data = ExperimentData { manifest: &m, catalog: &cat, embeddings: &embeddings };
        let mut dists = Vec::new();
        for c in &conditions {
            let d = run_many(&data, c, n_runs, seed, &cfg.train, workers)?;
            let (mean, sd) = d.mean_std();
            println!("{}\t{}\t{mean:.4} ± {sd:.4}", g.label(), c.label());
            dists.push(d);
        }
        write_runs(create(&ctx.out(&format!("runs_{}.csv", g.name())))?, &dists)?;
    }
    Ok(())
}

fn report(ctx: &Ctx<'_>) -> Result<()> {
    let dir = &ctx.cli.out_dir;
    let mut found: BTreeMap<GroupSelection, PathBuf> = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(g) = name.strip_prefix("runs_").and_then(|n| n.strip_suffix(".csv")) {
            if let Ok(g) = g.parse::<GroupSelection>() {
                found.insert(g, path);
            }
        }
    }
    if found.is_empty() {
        return Err(CliError::usage("no_runs", format!("no run distributions found in {}", dir.display())));
    }
    let mut deltas = Vec::new();
    for (g, path) in &found {
        let dists = read_runs(File::open(path).map_err(|e| io_err(path, e))?)?;
        let specs: Vec<ConditionSpec> = dists.iter().map(|d| d.condition.parse()).collect::<dialectkit::Result<_>>()?;
        let by_spec = |c: &ConditionSpec| specs.iter().position(|s| s == c).map(|i| &dists[i]);
        let baseline = by_spec(&ConditionSpec::baseline());
        let mut rows = Vec::new();
        for (spec, d) in specs.iter().zip(&dists) {
            let row = match default_reference(spec, &specs).and_then(|r| by_spec(&r)) {
                Some(reference) => compare_conditions(d, reference),
                None => ComparisonRow::unreferenced(d),
            };
            rows.push(row);
            if let (Some(b), false) = (baseline, spec.is_baseline()) {
                let vs = compare_conditions(d, b);
                deltas.push(DeltaRow {
                    condition: spec.label(),
                    age_group: g.label().to_string(),
                    delta_f1: vs.delta().unwrap_or(0.0),
                    stars: vs.stars().to_string(),
                });
            }
        }
        let out = ctx.out(&format!("comparison_{}.csv", g.name()));
        write_comparison(create(&out)?, g.label(), &rows)?;
        let mut buf = Vec::new();
        write_comparison(&mut buf, g.label(), &rows)?;
        print!("{}", String::from_utf8_lossy(&buf));
    }
    write_deltas(create(&ctx.out("deltas.csv"))?, &deltas)?;
    Ok(())
}

fn analyze(ctx: &Ctx<'_>, a: &AnalyzeArgs) -> Result<()> {
    let mut did = false;
    if let Some(conv_path) = &a.conversion {
        did = true;
        let manifest = load_resolved_manifest(&ctx.manifest_path(&a.manifest)?)?;
        let mode: ConversionMode = a.mode.parse()?;
        let conv = ConversionManifest::load(conv_path)?;
        let base = parent_dir(conv_path);
        let pairs = conv.for_mode(mode);
        let ids: Vec<&str> = manifest.recordings.iter().map(|r| r.recording_id.as_str()).filter(|id| pairs.contains_key(id)).collect();
        if ids.is_empty() {
            return Err(dialectkit::Error::MissingConverted(format!("no {mode} pairs for manifest recordings")).into());
        }
        let loaded: Vec<(Waveform, Waveform)> = ids
            .par_iter()
            .map(|id| -> Result<_> {
                let rec = manifest.recording(id).expect("id from manifest");
                Ok((load_audio(Path::new(&rec.path))?, load_audio(&base.join(&pairs[id].converted_path))?))
            })
            .collect::<Result<_>>()?;
        let (orig, converted): (Vec<_>, Vec<_>) = loaded.into_iter().unzip();
        let summary = summarize_pairs(&orig, &converted)?;
        let out = ctx.out(&format!("acoustics_{mode}.csv"));
        let mut w = csv::Writer::from_writer(create(&out)?);
        let csv_err = |e: csv::Error| CliError { kind: "format", message: e.to_string(), code: 1 };
        w.write_record(["set", "recording_id", "voiced_frames", "formant_frames", "mean_pitch_hz", "f1_hz", "f2_hz", "f3_hz"])
            .map_err(csv_err)?;
        for (set, files) in [("original", &summary.per_file_a), ("converted", &summary.per_file_b)] {
            for f in files {
                w.write_record([
                    set.to_string(),
                    ids[f.index].to_string(),
                    f.voiced_frames.to_string(),
                    f.formant_frames.to_string(),
                    format!("{:.3}", f.mean_pitch_hz),
                    format!("{:.3}", f.mean_formants_hz[0]),
                    format!("{:.3}", f.mean_formants_hz[1]),
                    format!("{:.3}", f.mean_formants_hz[2]),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| io_err(&out, e))?;
        let lines = summary.report_lines();
        let txt = ctx.out(&format!("acoustics_{mode}_summary.txt"));
        fs::write(&txt, lines.join("\n") + "\n").map_err(|e| io_err(&txt, e))?;
        for l in lines {
            println!("{l}");
        }
    }
    let emb_path = match (&a.embeddings, &ctx.config) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(ExperimentConfig { embeddings: EmbeddingSource::Table(p), .. })) if a.conversion.is_none() => Some(p.clone()),
        _ => None,
    };
    if let Some(emb_path) = emb_path {
        did = true;
        let method: ProjectionMethod = a.method.parse()?;
        let table = load_embedding_table(&emb_path)?;
        let mut proj = project_embeddings(&table, method, ctx.seed())?;
        if let Ok(cat_path) = ctx.catalog_path(&a.catalog) {
            let catalog = SegmentCatalog::load(&cat_path)?;
            let meta: BTreeMap<&str, _> = catalog.records.iter().map(|r| (r.segment_id.as_str(), r)).collect();
            proj.annotate(|id| {
                meta.get(id).map(|r| (r.speaker_id.clone(), r.age_group.as_str().to_string(), r.provenance.as_str().to_string()))
            });
        }
        let out = ctx.out(&format!("projection_{}.csv", method.as_str()));
        proj.write_csv(create(&out)?)?;
        println!("{} points projected with {} to {}", proj.points.len(), method.as_str(), out.display());
    }
    if !did {
        return Err(CliError::usage("missing_config", "analyze needs --conversion or --embeddings (or --config)"));
    }
    Ok(())
}
