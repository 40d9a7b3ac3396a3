use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use serde::Serialize;
use serde_json::json;

use hostility_core::analysis::{export_plot_data, ne_frequency_by_class, AnalysisError, CountMode};
use hostility_core::corpus::{
    compute_stats, load_corpus, Corpus, CorpusError, CorpusFormat, FineLabel, LabelSet, Post, Split,
};
use hostility_core::evaluation::{
    coarse_report, compare_to_baseline, fine_grained_report, BaselineChoice, BaselineTable,
    EvalMode, EvaluationReport, PredictionRecord,
};
use hostility_core::model::{
    evaluate_model, gate_predictions, grid_search_model, load_checkpoint, prepare, save_checkpoint,
    train_on, FeatureExtractor, ModelError, Task, TrainedModel,
};
use hostility_core::textprep::{load_list, LexiconTagger, Preprocessor};

use crate::config::{
    hash_json, load_config, load_grid, resolve, Overrides, ResolvedRun, RunConfig,
};
use crate::{AnalyzeArgs, EvalArgs, Failure, IngestArgs, PredictArgs, TrainArgs};

type CmdResult = Result<(), Failure>;

trait Classify<T> {
    fn validation(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn validation(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Validation(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

/// Model errors caused by bad inputs count as validation failures.
fn classify_model(e: ModelError) -> Failure {
    match e {
        ModelError::Spec(_)
        | ModelError::DegenerateInput(_)
        | ModelError::Checkpoint(_)
        | ModelError::Json(_)
        | ModelError::Prep(_) => Failure::Validation(e.into()),
        other => Failure::Runtime(other.into()),
    }
}

fn infer_split(path: &Path) -> Option<Split> {
    let stem = path.file_stem()?.to_str()?.to_ascii_lowercase();
    if stem.contains("train") {
        Some(Split::Train)
    } else if stem.contains("dev") || stem.contains("val") {
        Some(Split::Dev)
    } else if stem.contains("test") {
        Some(Split::Test)
    } else {
        None
    }
}

fn read_corpus(path: &Path, split: Split) -> Result<Corpus, Failure> {
    if !path.exists() {
        return Err(Failure::Validation(anyhow!(
            "corpus file {} does not exist",
            path.display()
        )));
    }
    load_corpus(path, CorpusFormat::from_path(path), split)
        .map_err(|e: CorpusError| anyhow!("{}: {e}", path.display()))
        .validation()
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CmdResult {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .with_context(|| format!("cannot create {}", dir.display()))
                .runtime()?;
        }
    }
    fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .runtime()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let text = serde_json::to_string_pretty(value).runtime()?;
    write_file(path, text + "\n")
}

fn config_or_default(path: Option<&PathBuf>) -> Result<RunConfig, Failure> {
    path.map_or_else(|| Ok(RunConfig::default()), |p| load_config(p))
        .validation()
}

pub fn ingest(args: IngestArgs) -> CmdResult {
    let config = args
        .config
        .as_deref()
        .map(load_config)
        .transpose()
        .validation()?;
    let mut inputs: Vec<(PathBuf, Split)> = Vec::new();
    for path in &args.files {
        let split = args
            .split
            .or_else(|| infer_split(path))
            .ok_or_else(|| anyhow!("cannot tell the split of {}; pass --split", path.display()))
            .validation()?;
        inputs.push((path.clone(), split));
    }
    if inputs.is_empty() {
        if let Some(c) = &config {
            for split in Split::ALL {
                if let Some(p) = c.corpus.get(split) {
                    inputs.push((p.clone(), split));
                }
            }
        }
    }
    if inputs.is_empty() {
        return Err(Failure::Validation(anyhow!("no corpus files given")));
    }
    let parts = inputs
        .iter()
        .map(|(p, s)| read_corpus(p, *s))
        .collect::<Result<Vec<_>, _>>()?;
    let corpus = Corpus::merge(parts).validation()?;
    let stats = compute_stats(&corpus);
    print!("{}", stats.to_table());
    let files: Vec<_> = inputs
        .iter()
        .map(|(p, s)| json!({"path": p, "split": s.as_str()}))
        .collect();
    let hash = hash_json(&json!({"command": "ingest", "files": files}));
    if args.dry_run {
        println!("dry run: config hash {hash}");
        return Ok(());
    }
    let out = args.out.unwrap_or_else(|| {
        config
            .map_or_else(|| PathBuf::from("runs"), |c| c.output_dir)
            .join("stats.json")
    });
    write_json(&out, &json!({"config_hash": hash, "stats": stats}))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn resolve_train(args: &TrainArgs) -> Result<ResolvedRun, Failure> {
    let mut config = config_or_default(args.config.as_ref())?;
    if let Some(p) = &args.train {
        config.corpus.train = Some(p.clone());
    }
    if let Some(p) = &args.dev {
        config.corpus.dev = Some(p.clone());
    }
    let overrides = Overrides {
        model: args.model.clone(),
        encoder: args.encoder,
        seed: args.seed,
        mode: args.mode,
        name: args.name.clone(),
        output_dir: args.output_dir.clone(),
    };
    resolve(config, &overrides).validation()
}

#[derive(Serialize)]
struct RunManifest<'a> {
    schema_version: u32,
    name: &'a str,
    config_hash: &'a str,
    model: String,
    seed: u64,
    encoders: Vec<String>,
    train_posts: usize,
    dev_posts: Option<usize>,
    grid_points: Option<usize>,
    dev_summary: Option<BTreeMap<String, f64>>,
    wall_clock_seconds: f64,
}

pub fn train(args: TrainArgs) -> CmdResult {
    let run = resolve_train(&args)?;
    let hash = run.hash();
    let train_path = run
        .corpus
        .train
        .clone()
        .ok_or_else(|| anyhow!("no training corpus: set [corpus].train or pass --train"))
        .validation()?;
    let grid = args
        .grid
        .as_ref()
        .map(|p| load_grid(p, run.train.metric))
        .transpose()
        .validation()?;
    let train_corpus = read_corpus(&train_path, Split::Train)?;
    let dev_corpus = run
        .corpus
        .dev
        .as_ref()
        .map(|p| read_corpus(p, Split::Dev))
        .transpose()?;
    if grid.is_some() && dev_corpus.is_none() {
        return Err(Failure::Validation(anyhow!(
            "grid search needs a dev corpus"
        )));
    }
    if args.dry_run {
        println!("{}", serde_json::to_string_pretty(&run).runtime()?);
        println!("config hash {hash}");
        println!(
            "dry run: {} train / {} dev posts validated, nothing written",
            train_corpus.len(),
            dev_corpus.as_ref().map_or(0, Corpus::len)
        );
        return Ok(());
    }

    let started = Instant::now();
    log::info!("run {} ({}), config hash {hash}", run.name, run.spec.kind);
    let extractor =
        FeatureExtractor::new(&run.spec, Preprocessor::new(run.prep)).map_err(classify_model)?;
    let train_data = prepare(&extractor, &train_corpus).map_err(classify_model)?;
    let dev_data = dev_corpus
        .as_ref()
        .map(|c| prepare(&extractor, c))
        .transpose()
        .map_err(classify_model)?;
    let run_dir = run.run_dir();
    let mut config = run.train.clone();
    let mut grid_points = None;
    if let (Some(grid), Some(dev)) = (&grid, &dev_data) {
        let outcome = grid_search_model(&run.spec, run.prep, &train_data, dev, grid, &run.train)
            .map_err(classify_model)?;
        grid_points = Some(outcome.leaderboard.entries.len());
        log::info!(
            "grid search over {} points done",
            outcome.leaderboard.entries.len()
        );
        write_json(&run_dir.join("leaderboard.json"), &outcome.leaderboard)?;
        config = outcome.best_config;
    }
    let (model, history) = train_on(&run.spec, run.prep, &train_data, dev_data.as_ref(), &config)
        .map_err(classify_model)?;
    save_checkpoint(&model, &run_dir.join("checkpoint"), Some(&hash)).map_err(classify_model)?;
    write_json(&run_dir.join("history.json"), &history)?;
    write_json(&run_dir.join("config.json"), &run)?;
    let dev_summary = dev_data
        .as_ref()
        .map(|d| evaluate_model(&model, d, run.mode).map(|r| r.summary()))
        .transpose()
        .map_err(classify_model)?;
    let manifest = RunManifest {
        schema_version: 1,
        name: &run.name,
        config_hash: &hash,
        model: run.spec.kind.to_string(),
        seed: config.seed,
        encoders: run
            .spec
            .encoders
            .iter()
            .map(|e| e.backend.to_string())
            .collect(),
        train_posts: train_corpus.len(),
        dev_posts: dev_corpus.as_ref().map(Corpus::len),
        grid_points,
        dev_summary: dev_summary.clone(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&run_dir.join("manifest.json"), &manifest)?;
    println!("trained {} into {}", run.spec.kind, run_dir.display());
    for (metric, value) in dev_summary.iter().flatten() {
        println!("dev {metric:<12} {:.4}", value);
    }
    Ok(())
}

fn load_model(dir: &Path) -> Result<(TrainedModel, Option<String>), Failure> {
    let (model, manifest) = load_checkpoint(dir)
        .map_err(|e| anyhow!("{}: {e}", dir.display()))
        .validation()?;
    Ok((model, manifest.config_hash))
}

fn checkpoint_dir(
    run: Option<&PathBuf>,
    checkpoint: Option<&PathBuf>,
) -> Result<Option<PathBuf>, Failure> {
    match (run, checkpoint) {
        (Some(_), Some(_)) => Err(Failure::Validation(anyhow!(
            "pass --run or --checkpoint, not both"
        ))),
        (Some(r), None) => Ok(Some(r.join("checkpoint"))),
        (None, c) => Ok(c.cloned()),
    }
}

fn run_config(run: Option<&PathBuf>) -> Result<Option<ResolvedRun>, Failure> {
    let Some(dir) = run else { return Ok(None) };
    let path = dir.join("config.json");
    let text = fs::read_to_string(&path)
        .with_context(|| format!("cannot read {}", path.display()))
        .validation()?;
    Ok(Some(serde_json::from_str(&text).validation()?))
}

/// Predictions for `corpus` from a checkpoint, optionally gated by a fine
/// model in pipeline mode.
fn predict_corpus(
    model: &TrainedModel,
    fine: Option<&TrainedModel>,
    corpus: &Corpus,
    mode: EvalMode,
) -> Result<Vec<PredictionRecord>, Failure> {
    let features = |m: &TrainedModel| -> Result<_, Failure> {
        let ex =
            FeatureExtractor::new(&m.spec, Preprocessor::new(m.prep)).map_err(classify_model)?;
        prepare(&ex, corpus).map_err(classify_model)
    };
    let data = features(model)?;
    match fine {
        None => model.predict(&data, mode).map_err(classify_model),
        Some(f) => {
            if model.task() != Task::Coarse || f.task() != Task::Fine {
                return Err(Failure::Validation(anyhow!(
                    "gating needs a coarse checkpoint and a fine-grained one"
                )));
            }
            let coarse = model
                .predict(&data, EvalMode::Pipeline)
                .map_err(classify_model)?;
            let fine_preds = f
                .predict(&features(f)?, EvalMode::GoldHostile)
                .map_err(classify_model)?;
            gate_predictions(&coarse, &fine_preds).map_err(classify_model)
        }
    }
}

fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .validation()?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line)
            .with_context(|| format!("{} line {}", path.display(), i + 1))
            .validation()?;
        out.push(record);
    }
    Ok(out)
}

fn has_fine(predictions: &[PredictionRecord]) -> bool {
    predictions.iter().any(|r| {
        !r.fine.is_empty()
            || FineLabel::ALL
                .iter()
                .any(|l| r.scores.contains_key(l.as_str()))
    })
}

fn deltas_csv(report: &EvaluationReport, choice: BaselineChoice<'_>) -> Result<String, Failure> {
    let rows =
        compare_to_baseline(&report.summary(), &BaselineTable::shipped(), choice).validation()?;
    let mut out = String::from("metric,ours,baseline_model,baseline,delta,below_baseline\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.2},{},{:.2},{:+.2},{}\n",
            r.metric, r.ours, r.baseline_model, r.baseline, r.delta, r.below_baseline
        ));
    }
    Ok(out)
}

pub fn eval(args: EvalArgs) -> CmdResult {
    let run = run_config(args.run.as_ref())?;
    let checkpoint = checkpoint_dir(args.run.as_ref(), args.checkpoint.as_ref())?;
    if checkpoint.is_some() == args.predictions.is_some() {
        return Err(Failure::Validation(anyhow!(
            "pass exactly one of --run, --checkpoint or --predictions"
        )));
    }
    let corpus_path = args
        .corpus
        .clone()
        .or_else(|| run.as_ref().and_then(|r| r.corpus.get(args.split).cloned()))
        .ok_or_else(|| anyhow!("no {} corpus: pass --corpus", args.split))
        .validation()?;
    let corpus = read_corpus(&corpus_path, args.split)?;
    let mode = args
        .mode
        .or(run.as_ref().map(|r| r.mode))
        .unwrap_or_default();

    let (predictions, task, metadata) = match &checkpoint {
        Some(dir) => {
            let (model, hash) = load_model(dir)?;
            let fine = args
                .fine_checkpoint
                .as_deref()
                .map(load_model)
                .transpose()?;
            let preds = predict_corpus(&model, fine.as_ref().map(|(m, _)| m), &corpus, mode)?;
            let task = if fine.is_some() {
                None
            } else {
                Some(model.task())
            };
            let meta = json!({
                "config_hash": hash,
                "seed": model.config.seed,
                "prep": model.prep,
                "model": model.spec.kind,
                "checkpoint": dir,
            });
            (preds, task, meta)
        }
        None => {
            let path = args.predictions.as_ref().expect("checked above");
            let preds = read_predictions(path)?;
            let task = (!has_fine(&preds)).then_some(Task::Coarse);
            (preds, task, json!({"predictions": path}))
        }
    };
    let coarse = match task {
        Some(Task::Fine) => None,
        _ => Some(coarse_report(&predictions, &corpus).validation()?),
    };
    let fine = match task {
        Some(Task::Coarse) => None,
        _ => Some(fine_grained_report(&predictions, &corpus, mode).validation()?),
    };
    let mut report = EvaluationReport::new(coarse, fine);
    let mut metadata = metadata;
    metadata["split"] = json!(args.split.as_str());
    metadata["mode"] = json!(mode);
    metadata["corpus"] = json!(corpus_path);
    if metadata.get("config_hash").is_none_or(|h| h.is_null()) {
        metadata["config_hash"] = json!(hash_json(&metadata));
    }
    report.metadata = metadata;

    let choice = match args.baseline.as_deref() {
        None | Some("best") => BaselineChoice::Best,
        Some(name) => BaselineChoice::Model(name),
    };
    let deltas = deltas_csv(&report, choice)?;
    if args.dry_run {
        for (metric, value) in report.summary() {
            println!("{metric:<12} {value:.4}");
        }
        println!("dry run: nothing written");
        return Ok(());
    }
    let out = args.out.clone().unwrap_or_else(|| {
        args.run
            .clone()
            .unwrap_or_default()
            .join(format!("eval-{}", args.split))
    });
    write_json(&out.join("report.json"), &report)?;
    for (stem, csv) in report.confusion_csvs() {
        write_file(&out.join(format!("{stem}.csv")), csv)?;
    }
    write_file(&out.join("baseline_delta.csv"), &deltas)?;
    for (metric, value) in report.summary() {
        println!("{metric:<12} {:.4}", value);
    }
    print!("{deltas}");
    println!("wrote {}", out.display());
    Ok(())
}

/// Reads `id<TAB>text` rows; extra columns are ignored and a leading
/// `id<TAB>text` header is skipped.
pub fn read_inputs(path: &Path) -> Result<Corpus, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .validation()?;
    let mut posts = Vec::new();
    let mut seen = HashSet::new();
    let mut problems = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default().trim();
        let body = fields.next();
        if n == 1
            && id.eq_ignore_ascii_case("id")
            && body.is_some_and(|b| b.trim().eq_ignore_ascii_case("text"))
        {
            continue;
        }
        match body {
            None => problems.push(format!("line {n}: expected id<TAB>text")),
            Some(_) if id.is_empty() => problems.push(format!("line {n}: empty id")),
            Some(b) if b.trim().is_empty() => problems.push(format!("line {n}: empty text")),
            Some(_) if !seen.insert(id.to_string()) => {
                problems.push(format!("line {n}: duplicate id {id:?}"))
            }
            Some(b) => posts.push(Post {
                id: id.to_string(),
                text: b.to_string(),
                labels: LabelSet::non_hostile(),
                split: Split::Test,
            }),
        }
    }
    if !problems.is_empty() {
        return Err(Failure::Validation(anyhow!(
            "{}: {} malformed row(s)\n  {}",
            path.display(),
            problems.len(),
            problems.join("\n  ")
        )));
    }
    Corpus::new(posts).validation()
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    #[serde(flatten)]
    record: &'a PredictionRecord,
    config_hash: Option<&'a str>,
}

pub fn predict(args: PredictArgs) -> CmdResult {
    let dir = checkpoint_dir(args.run.as_ref(), args.checkpoint.as_ref())?
        .ok_or_else(|| anyhow!("pass --run or --checkpoint"))
        .validation()?;
    let (model, hash) = load_model(&dir)?;
    let fine = args
        .fine_checkpoint
        .as_deref()
        .map(load_model)
        .transpose()?;
    let corpus = read_inputs(&args.input)?;
    let mode = args.mode.unwrap_or_default();
    if args.dry_run {
        println!(
            "dry run: {} posts validated against {}",
            corpus.len(),
            dir.display()
        );
        return Ok(());
    }
    let predictions = predict_corpus(&model, fine.as_ref().map(|(m, _)| m), &corpus, mode)?;
    let mut out = String::new();
    for record in &predictions {
        let line = PredictionLine {
            record,
            config_hash: hash.as_deref(),
        };
        out.push_str(&serde_json::to_string(&line).runtime()?);
        out.push('\n');
    }
    match &args.out {
        Some(path) => {
            write_file(path, out)?;
            eprintln!(
                "wrote {} predictions to {}",
                predictions.len(),
                path.display()
            );
        }
        None => std::io::stdout().write_all(out.as_bytes()).runtime()?,
    }
    Ok(())
}

pub fn analyze(args: AnalyzeArgs) -> CmdResult {
    let predictions = read_predictions(&args.predictions)?;
    let corpus = read_corpus(&args.corpus, args.split)?;
    let mut tagger = LexiconTagger::shipped();
    if let Some(path) = &args.lexicon {
        tagger.extend(load_list(path).validation()?);
    }
    let count = if args.documents {
        CountMode::Documents
    } else {
        CountMode::Occurrences
    };
    let tables =
        ne_frequency_by_class(&corpus, &predictions, &tagger, args.top_k, count).map_err(|e| {
            match e {
                AnalysisError::MissingPredictions(_)
                | AnalysisError::UnknownPosts(_)
                | AnalysisError::DuplicatePrediction(_) => Failure::Validation(e.into()),
                other => Failure::Runtime(other.into()),
            }
        })?;
    let hash = hash_json(&json!({
        "command": "analyze",
        "predictions": args.predictions,
        "corpus": args.corpus,
        "split": args.split.as_str(),
        "top_k": args.top_k,
        "count": count,
    }));
    if args.dry_run {
        println!("dry run: config hash {hash}");
        return Ok(());
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("analysis"));
    export_plot_data(&tables, &out).runtime()?;
    write_json(
        &out.join("provenance.json"),
        &json!({"config_hash": hash, "split": args.split.as_str(), "top_k": args.top_k, "count": count}),
    )?;
    for table in tables.values() {
        let top: Vec<String> = table
            .entries
            .iter()
            .take(5)
            .map(|e| format!("{} ({})", e.entity, e.count))
            .collect();
        println!(
            "{:<12} {:>5} posts  {}",
            table.class,
            table.posts,
            top.join(", ")
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
