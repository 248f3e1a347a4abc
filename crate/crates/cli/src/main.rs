use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use targen_core::engine::{
    plausibility, repair_instance, Backend, ExecutionCache, FixtureBackend, FixtureEntry, GenerationRequest, HttpBackend,
    Prediction, RawCandidate, ReplayExecutor, WireRequest, WireResponse,
};
use targen_core::pipeline::{apply_exclusion_filters, mine_repo, split, MineConfig, SplitRatios};
use targen_core::prompt::{Codec, IoConfig, IoFormat};
use targen_core::special::SpecialTokens;
use targen_core::tokenize::PunctTokenizer;
use targen_core::trust::{
    cross_validate, extract_features, permutation_importance, train_forest, ForestConfig, ForestModel, FEATURE_NAMES,
};
use targen_core::{load_dataset, metrics, read_jsonl, save_dataset, taxonomy, write_jsonl, RepairInstance};

#[derive(Parser)]
#[command(name = "targen", version, about = "Automated test-case repair pipeline")]
struct Cli {
    /// Special-token mapping JSON (token name to surface string).
    #[arg(long, global = true)]
    specials: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render model inputs and expected outputs.
    Encode {
        #[arg(long, default_value = "io2")]
        io: IoFormat,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 512)]
        max_input: usize,
        #[arg(long, default_value_t = 256)]
        max_output: usize,
    },
    /// Generate candidate repairs and optionally validate them.
    Repair {
        #[arg(long, default_value = "io2")]
        io: IoFormat,
        #[arg(long, alias = "in")]
        dataset: PathBuf,
        /// `http://host:port` of an inference service, or a recorded fixture file.
        #[arg(long)]
        backend: String,
        #[arg(long, default_value_t = 40)]
        beam: usize,
        #[arg(long)]
        out: PathBuf,
        /// Recorded execution logs (digest, log) used to validate candidates.
        #[arg(long)]
        logs: Option<PathBuf>,
        /// Append every backend exchange to this fixture file.
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long, default_value_t = 512)]
        max_input: usize,
        #[arg(long, default_value_t = 256)]
        max_output: usize,
    },
    /// Score predictions against the ground truth.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Categorise each repair and count its AST edits.
    Categorize {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract trust features, with labels taken from an evaluation report.
    Features {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate a trust model, then fit and save it on all rows.
    PredictTrust {
        #[arg(long)]
        train: PathBuf,
        #[arg(long, value_enum, default_value_t = Label::Em)]
        labels: Label,
        #[arg(long, default_value_t = 5)]
        cv: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Report file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply a saved trust model to a features CSV.
    ApplyTrust {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mine broken/repaired test pairs from a git history.
    Mine {
        #[arg(long)]
        repo: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Exclusion report; defaults to `<out>.exclusions.csv`.
        #[arg(long)]
        exclusions: Option<PathBuf>,
        #[arg(long)]
        project: Option<String>,
        #[arg(long, default_value = "src/test")]
        test_root: String,
        #[arg(long, default_value = "@Test")]
        test_annotation: String,
    },
    /// Chronological per-project train/val/test split.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "80,5,15")]
        ratios: SplitRatios,
        /// Directory for train.jsonl, val.jsonl and test.jsonl; defaults to the input's directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Label {
    Em,
    Plausible,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let codec = match &cli.specials {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Codec::new(Box::new(PunctTokenizer), SpecialTokens::from_mapping_json(&text)?)
        }
        None => Codec::default(),
    };
    match cli.command {
        Command::Encode { io, input, out, max_input, max_output } => encode(&codec, io, &input, &out, max_input, max_output),
        Command::Repair { io, dataset, backend, beam, out, logs, record, max_input, max_output } => {
            let config = IoConfig::new(io).with_budget(max_input, max_output);
            repair(&codec, &config, &dataset, &backend, beam, &out, logs.as_deref(), record.as_deref())
        }
        Command::Evaluate { predictions, dataset, out } => {
            let data = load_dataset(&dataset)?;
            let preds: Vec<Prediction> = read_jsonl(&predictions)?;
            let report = metrics::evaluate(codec.tokenizer(), &data, &preds)?;
            write_json(&out, &report)?;
            info!("n={} em={:.1} pr={:.1} bleu={:.1} codebleu={:.1}", report.n, report.em, report.pr, report.bleu, report.codebleu);
            Ok(())
        }
        Command::Categorize { dataset, out } => categorize(&dataset, &out),
        Command::Features { dataset, report, out } => features(&codec, &dataset, report.as_deref(), &out),
        Command::PredictTrust { train, labels, cv, seed, trees, model, out } => {
            let cfg = ForestConfig { n_trees: trees, seed, ..ForestConfig::default() };
            predict_trust(&codec, &train, labels, cv, &cfg, model.as_deref(), out.as_deref())
        }
        Command::ApplyTrust { model, features, out } => apply_trust(&model, &features, &out),
        Command::Mine { repo, out, exclusions, project, test_root, test_annotation } => {
            let config = MineConfig { test_root, test_annotation, project };
            let exclusions = exclusions.unwrap_or_else(|| with_suffix(&out, ".exclusions.csv"));
            mine(&codec, &repo, &config, &out, &exclusions)
        }
        Command::Split { input, ratios, out_dir } => {
            let dir = out_dir.unwrap_or_else(|| input.parent().map(Path::to_path_buf).unwrap_or_default());
            let data = load_dataset(&input)?;
            let s = split(data, ratios, codec.tokenizer());
            fs::create_dir_all(&dir).ok();
            for (name, part) in [("train", &s.train), ("val", &s.val), ("test", &s.test)] {
                save_dataset(part, dir.join(format!("{name}.jsonl")))?;
            }
            for id in &s.dropped_trivial {
                info!("dropped trivial repair {id}");
            }
            println!("train={} val={} test={} dropped_trivial={}", s.train.len(), s.val.len(), s.test.len(), s.dropped_trivial.len());
            Ok(())
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn encode(codec: &Codec, io: IoFormat, input: &Path, out: &Path, max_input: usize, max_output: usize) -> Result<()> {
    let data = load_dataset(input)?;
    let config = IoConfig::new(io).with_budget(max_input, max_output);
    let mut rows = Vec::with_capacity(data.len());
    for inst in &data {
        match codec.encode_instance(inst, &config) {
            Ok(r) => rows.push(r),
            Err(e) => warn!("skipping {}: {e}", inst.id),
        }
    }
    write_jsonl(&rows, out)?;
    println!("encoded {} of {} instances", rows.len(), data.len());
    Ok(())
}

/// Wraps a backend and keeps every exchange for later replay.
struct Recorder<'a> {
    inner: &'a dyn Backend,
    entries: Mutex<Vec<FixtureEntry>>,
}

impl Backend for Recorder<'_> {
    fn generate(&self, request: &GenerationRequest) -> targen_core::Result<Vec<RawCandidate>> {
        let out = self.inner.generate(request)?;
        let entry = FixtureEntry {
            request: WireRequest {
                input: request.input.clone(),
                beam_size: request.beam_size,
                max_new_tokens: request.max_output_tokens,
            },
            response: WireResponse { candidates: out.clone() },
        };
        self.entries.lock().unwrap().push(entry);
        Ok(out)
    }
}

#[allow(clippy::too_many_arguments)]
fn repair(
    codec: &Codec,
    config: &IoConfig,
    dataset: &Path,
    backend: &str,
    beam: usize,
    out: &Path,
    logs: Option<&Path>,
    record: Option<&Path>,
) -> Result<()> {
    let data = load_dataset(dataset)?;
    let base: Box<dyn Backend> = if backend.starts_with("http://") || backend.starts_with("https://") {
        let http = HttpBackend::new(backend);
        http.health().context("inference service health check")?;
        Box::new(http)
    } else {
        Box::new(FixtureBackend::load(backend)?)
    };
    let recorder = Recorder { inner: base.as_ref(), entries: Mutex::new(Vec::new()) };
    let backend: &dyn Backend = if record.is_some() { &recorder } else { base.as_ref() };
    let executor = logs.map(ReplayExecutor::load).transpose()?;
    let cache = ExecutionCache::new();

    let mut preds = Vec::with_capacity(data.len());
    let mut plausible = 0;
    for inst in &data {
        let mut p = match repair_instance(codec, inst, config, backend, beam) {
            Ok(p) => p,
            Err(e @ (targen_core::Error::Transport { .. } | targen_core::Error::Protocol(_))) => return Err(e.into()),
            Err(e) => {
                warn!("skipping {}: {e}", inst.id);
                continue;
            }
        };
        if let Some(ex) = &executor {
            plausible += plausibility(codec, inst, &mut p.candidates, config.output, ex, &cache) as usize;
        }
        preds.push(p);
    }
    write_jsonl(&preds, out)?;
    if let Some(path) = record {
        write_jsonl(&recorder.entries.into_inner().unwrap(), path)?;
    }
    match executor {
        Some(_) => println!("repaired {} of {} instances, {plausible} plausible", preds.len(), data.len()),
        None => println!("repaired {} of {} instances", preds.len(), data.len()),
    }
    Ok(())
}

fn breakage_kind(inst: &RepairInstance) -> String {
    serde_json::to_value(inst.breakage.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn categorize(dataset: &Path, out: &Path) -> Result<()> {
    let data = load_dataset(dataset)?;
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["id", "categories", "ast_edits", "breakage_kind"])?;
    for inst in &data {
        let cat = taxonomy::categorize(&inst.breakage_lines(), &inst.repaired_lines()?);
        w.write_record([inst.id.clone(), cat.label(), cat.ast_edit_count.to_string(), breakage_kind(inst)])?;
    }
    w.flush()?;
    println!("categorized {} instances", data.len());
    Ok(())
}

fn features(codec: &Codec, dataset: &Path, report: Option<&Path>, out: &Path) -> Result<()> {
    let data = load_dataset(dataset)?;
    let rows = match report {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let r: metrics::EvalReport = serde_json::from_str(&text)?;
            Some(r.rows.into_iter().map(|r| (r.id.clone(), r)).collect::<std::collections::HashMap<_, _>>())
        }
        None => None,
    };
    let mut w = csv::Writer::from_path(out)?;
    let mut header: Vec<&str> = vec!["id"];
    header.extend(FEATURE_NAMES);
    if rows.is_some() {
        header.extend(["em", "plausible"]);
    }
    w.write_record(&header)?;
    for inst in &data {
        let mut rec = vec![inst.id.clone()];
        rec.extend(extract_features(codec.tokenizer(), inst).to_row().iter().map(f64::to_string));
        if let Some(rows) = &rows {
            let Some(r) = rows.get(&inst.id) else {
                warn!("no evaluation row for {}", inst.id);
                continue;
            };
            rec.extend([(r.em as u8).to_string(), (r.plausible as u8).to_string()]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

struct FeatureTable {
    ids: Vec<String>,
    rows: Vec<Vec<f64>>,
    em: Option<Vec<bool>>,
    plausible: Option<Vec<bool>>,
}

fn read_features(path: &Path) -> Result<FeatureTable> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let feats: Vec<usize> = FEATURE_NAMES
        .iter()
        .map(|n| col(n).with_context(|| format!("{}: missing column {n}", path.display())))
        .collect::<Result<_>>()?;
    let (id_col, em_col, pl_col) = (col("id"), col("em"), col("plausible"));
    let mut t = FeatureTable { ids: Vec::new(), rows: Vec::new(), em: em_col.map(|_| Vec::new()), plausible: pl_col.map(|_| Vec::new()) };
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64> {
            rec[c].trim().parse().with_context(|| format!("{}: row {}: bad number {:?}", path.display(), i + 2, &rec[c]))
        };
        let flag = |c: usize| -> Result<bool> {
            match rec[c].trim() {
                "1" | "true" => Ok(true),
                "0" | "false" => Ok(false),
                v => bail!("{}: row {}: bad label {v:?}", path.display(), i + 2),
            }
        };
        t.ids.push(id_col.map_or_else(|| i.to_string(), |c| rec[c].to_string()));
        t.rows.push(feats.iter().map(|&c| num(c)).collect::<Result<_>>()?);
        if let (Some(v), Some(c)) = (t.em.as_mut(), em_col) {
            v.push(flag(c)?);
        }
        if let (Some(v), Some(c)) = (t.plausible.as_mut(), pl_col) {
            v.push(flag(c)?);
        }
    }
    Ok(t)
}

#[derive(Serialize)]
struct TrustReport {
    label: &'static str,
    rows: usize,
    positives: usize,
    cv: targen_core::trust::CvReport,
    importance: Vec<targen_core::trust::Importance>,
    oob_accuracy: Option<f64>,
}

fn predict_trust(
    codec: &Codec,
    train: &Path,
    label: Label,
    k: usize,
    cfg: &ForestConfig,
    model_out: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let t = read_features(train)?;
    let (name, labels) = match label {
        Label::Em => ("em", t.em),
        Label::Plausible => ("plausible", t.plausible),
    };
    let labels = labels.with_context(|| format!("{}: no {name} column", train.display()))?;
    let cv = cross_validate(&t.rows, &labels, k, cfg)?;
    let mut model = train_forest(&t.rows, &labels, cfg)?;
    model.tokenizer = codec.tokenizer().name().to_string();
    let importance = permutation_importance(&model, &t.rows, &labels, cfg.seed);
    if let Some(p) = model_out {
        model.save(p)?;
    }
    let report = TrustReport {
        label: name,
        rows: t.rows.len(),
        positives: labels.iter().filter(|&&l| l).count(),
        cv,
        importance,
        oob_accuracy: model.oob_accuracy,
    };
    match out {
        Some(p) => write_json(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn apply_trust(model: &Path, features: &Path, out: &Path) -> Result<()> {
    let model = ForestModel::load(model)?;
    let t = read_features(features)?;
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["id", "probability", "trusted"])?;
    for (id, row) in t.ids.iter().zip(&t.rows) {
        let p = model.predict_proba(row);
        w.write_record([id.clone(), format!("{p:.4}"), (p >= 0.5).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn mine(codec: &Codec, repo: &Path, config: &MineConfig, out: &Path, exclusions: &Path) -> Result<()> {
    let mined = mine_repo(repo, config)?;
    let total = mined.len();
    let outcome = apply_exclusion_filters(mined, codec)?;
    save_dataset(&outcome.kept, out)?;
    let mut w = csv::Writer::from_path(exclusions)?;
    w.write_record(["id", "commit", "reason", "detail"])?;
    for e in &outcome.excluded {
        w.write_record([e.id.as_str(), e.commit.as_str(), e.reason.code(), e.detail.as_str()])?;
    }
    w.flush()?;
    let mut summary = format!("mined={total} kept={}", outcome.kept.len());
    for r in targen_core::pipeline::ExclusionReason::ALL {
        summary += &format!(" {}={}", r.code(), outcome.count(r));
    }
    println!("{summary}");
    Ok(())
}
