//! `simresnet` subcommands: `gen`, `train`, `eval`, `predict`, `bench` and
//! `shakedown`.
//!
//! Every run that names an output writes a [`RunManifest`] beside it
//! (`<output>.manifest.json`, or `manifest.json` inside an output directory),
//! also when the command fails. Exit codes: 0 success, 1 runtime or domain
//! failure, 2 usage error. The seed falls back to `SIMRESNET_SEED`.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::activation::ActivationKind;
use crate::data::{
    gen_synthetic, load_model, load_pictures, save_model, save_pictures, write_eta_csv,
    write_histogram_csv, write_summary_json, GroupSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{fit_lognormal, histogram};
use crate::shakedown::{
    brute_force_factor, check_certificate, shakedown_factor, ShakedownInstance, SolverSettings,
};
use crate::trainer::{
    choose_pictures, evaluate, make_wide, normalize, parse_feature_list, picture_outputs,
    predict_limit, select_all, train_averaged_reports, train_from, train_pooled, Group,
    NormalizationTransform, PictureSample, TrainConfig, TrainReport,
};

#[derive(Debug, Parser)]
#[command(
    name = "simresnet",
    version,
    about = "Micro-width residual networks and static shakedown"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic corpus CSV.
    Gen(GenArgs),
    /// Normalize a corpus, train a network, save model and loss history.
    Train(TrainArgs),
    /// Per-picture errors, corpus statistics and histograms.
    Eval(EvalArgs),
    /// One predicted limit per picture plus log-normal fits.
    Predict(PredictArgs),
    /// Training wall-clock time per width multiplier.
    Bench(BenchArgs),
    /// Static shakedown factor of an instance file.
    Shakedown(ShakedownArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    #[arg(long, env = "SIMRESNET_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub group: Group,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub pictures: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..), default_value_t = 150)]
    pub measurements: u64,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainOptions {
    /// Comma-separated subset of feret, area, ar.
    #[arg(long, default_value = "feret")]
    pub features: String,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub depth: u64,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    /// Epoch cap.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub iterations: u64,
    #[arg(long, default_value = "sigmoid")]
    pub activation: ActivationKind,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub width_multiplier: u64,
    /// Always run the full epoch cap.
    #[arg(long)]
    pub no_early_stop: bool,
    #[command(flatten)]
    pub seed: SeedArg,
}

impl TrainOptions {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            max_iterations: self.iterations as usize,
            depth: self.depth as usize,
            activation: self.activation,
            seed: self.seed.seed,
            width_multiplier: self.width_multiplier as usize,
            plateau_window: if self.no_early_stop {
                0
            } else {
                TrainConfig::default().plateau_window
            },
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub options: TrainOptions,
    /// Train this many seeded pictures separately and average the weights.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub avg: u64,
    /// Fit one network jointly to this many seeded pictures (0 = all).
    #[arg(long, conflicts_with_all = ["avg", "picture"])]
    pub pool: Option<u64>,
    /// Train on this picture id instead of a seeded choice.
    #[arg(long, conflicts_with = "avg")]
    pub picture: Option<String>,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Loss history CSV (`run,epoch,loss`).
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output directory for eta.csv, summary.json and histogram CSVs.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub bins: u64,
    /// Picture whose input and output histograms are written (default: first).
    #[arg(long)]
    pub hist_picture: Option<String>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Predictions CSV.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Log-normal fits of predicted and true limits.
    #[arg(long)]
    pub fits: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Corpus to benchmark on; a seeded synthetic V corpus when absent.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "1,2,4", value_delimiter = ',')]
    pub multipliers: Vec<usize>,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub repeats: u64,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: u64,
    #[arg(long, default_value = "feret")]
    pub features: String,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub depth: u64,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value = "sigmoid")]
    pub activation: ActivationKind,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ShakedownArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also run the brute-force reference and require agreement.
    #[arg(long)]
    pub oracle: bool,
    /// Oracle grid spacing as a fraction of the yield strength.
    #[arg(long, default_value_t = 0.01)]
    pub grid_step: f64,
    #[arg(long)]
    pub tol_bisect: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: Option<String>,
}

impl FileRecord {
    fn of(path: &Path) -> Self {
        FileRecord {
            path: path.display().to_string(),
            sha256: std::fs::read(path)
                .ok()
                .map(|b| hex::encode(Sha256::digest(&b))),
        }
    }
}

/// Record of one command invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub timings: Value,
    pub status: String,
    pub error: Option<String>,
}

/// What a command produced: files, timings and a stdout summary.
#[derive(Default)]
struct Outcome {
    outputs: Vec<PathBuf>,
    timings: serde_json::Map<String, Value>,
}

struct Plan {
    command: &'static str,
    config: Value,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    manifest: PathBuf,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let plan = plan_for(&cli.command);
    let start = Instant::now();
    let mut outcome = Outcome::default();
    let result = execute(&cli.command, &mut outcome);
    outcome
        .timings
        .insert("total_seconds".into(), json!(start.elapsed().as_secs_f64()));
    let manifest = RunManifest {
        command: plan.command.into(),
        config: plan.config,
        seed: plan.seed,
        inputs: plan.inputs.iter().map(|p| FileRecord::of(p)).collect(),
        outputs: outcome.outputs.iter().map(|p| FileRecord::of(p)).collect(),
        timings: Value::Object(outcome.timings),
        status: if result.is_ok() { "ok" } else { "error" }.into(),
        error: result.as_ref().err().map(|e| e.to_string()),
    };
    let written = serde_json::to_string_pretty(&manifest)
        .map_err(Error::from)
        .and_then(|t| {
            std::fs::write(&plan.manifest, t + "\n").map_err(|e| Error::io(&plan.manifest, e))
        });
    if let Err(e) = written {
        eprintln!("warning: could not write manifest: {e}");
    }
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn manifest_beside(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn plan_for(command: &Command) -> Plan {
    match command {
        Command::Gen(a) => Plan {
            command: "gen",
            config: json!({"group": a.group.to_string(), "pictures": a.pictures, "measurements": a.measurements}),
            seed: Some(a.seed.seed),
            inputs: vec![],
            manifest: manifest_beside(&a.output),
        },
        Command::Train(a) => Plan {
            command: "train",
            config: json!({
                "train": a.options.config(),
                "features": a.options.features,
                "avg": a.avg,
                "pool": a.pool,
                "picture": a.picture,
            }),
            seed: Some(a.options.seed.seed),
            inputs: vec![a.corpus.clone()],
            manifest: manifest_beside(&a.output),
        },
        Command::Eval(a) => Plan {
            command: "eval",
            config: json!({"bins": a.bins, "hist_picture": a.hist_picture}),
            seed: None,
            inputs: vec![a.model.clone(), a.corpus.clone()],
            manifest: a.output.join("manifest.json"),
        },
        Command::Predict(a) => Plan {
            command: "predict",
            config: json!({}),
            seed: None,
            inputs: vec![a.model.clone(), a.corpus.clone()],
            manifest: manifest_beside(&a.output),
        },
        Command::Bench(a) => Plan {
            command: "bench",
            config: json!({
                "multipliers": a.multipliers,
                "repeats": a.repeats,
                "epochs": a.epochs,
                "features": a.features,
                "depth": a.depth,
                "lr": a.lr,
                "activation": a.activation,
            }),
            seed: Some(a.seed.seed),
            inputs: a.corpus.iter().cloned().collect(),
            manifest: manifest_beside(&a.output),
        },
        Command::Shakedown(a) => Plan {
            command: "shakedown",
            config: json!({
                "oracle": a.oracle,
                "grid_step": a.grid_step,
                "tol_bisect": a.tol_bisect,
                "max_iter": a.max_iter,
            }),
            seed: None,
            inputs: vec![a.instance.clone()],
            manifest: manifest_beside(&a.output),
        },
    }
}

fn execute(command: &Command, out: &mut Outcome) -> Result<()> {
    match command {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Shakedown(a) => cmd_shakedown(a, out),
    }
}

fn cmd_gen(a: &GenArgs, out: &mut Outcome) -> Result<()> {
    let spec = GroupSpec::for_group(a.group);
    let pictures = gen_synthetic(
        &spec,
        a.pictures as usize,
        a.measurements as usize,
        a.seed.seed,
    )?;
    save_pictures(&a.output, &pictures)?;
    out.outputs.push(a.output.clone());
    let targets: Vec<f64> = pictures.iter().map(|p| p.target).collect();
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    println!(
        "group {}: {} pictures x {} measurements, mean target {mean:.1} MPa -> {}",
        a.group,
        pictures.len(),
        a.measurements,
        a.output.display()
    );
    Ok(())
}

/// Loads a corpus and normalizes the requested channels corpus-wide.
fn prepared_corpus(
    path: &Path,
    features: &str,
) -> Result<(Vec<PictureSample>, NormalizationTransform)> {
    let channels = parse_feature_list(features)?;
    let raw = select_all(&load_pictures(path)?, &channels)?;
    normalize(&raw)
}

fn write_history(path: &Path, reports: &[TrainReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["run", "epoch", "loss"])?;
    for (run, r) in reports.iter().enumerate() {
        for (epoch, loss) in r.loss_history.iter().enumerate() {
            w.write_record([run.to_string(), (epoch + 1).to_string(), loss.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn cmd_train(a: &TrainArgs, out: &mut Outcome) -> Result<()> {
    let cfg = TrainConfig {
        averaging_count: a.avg as usize,
        ..a.options.config()
    };
    cfg.validate()?;
    let (pictures, transform) = prepared_corpus(&a.corpus, &a.options.features)?;
    let start = Instant::now();
    let (network, reports, used): (_, Vec<TrainReport>, Vec<String>) = if let Some(k) = a.pool {
        let k = if k == 0 { pictures.len() } else { k as usize };
        let chosen = pick(&pictures, k, cfg.seed)?;
        let report = train_pooled(&chosen, &cfg)?;
        (report.network.clone(), vec![report], ids(&chosen))
    } else if let Some(id) = &a.picture {
        let p = find_picture(&pictures, id)?;
        let net = make_wide(p.feature_dim(), cfg.width_multiplier, &cfg)?;
        let report = train_from(net, p, &cfg)?;
        (report.network.clone(), vec![report], vec![id.clone()])
    } else {
        let chosen = pick(&pictures, cfg.averaging_count, cfg.seed)?;
        let (net, reports) = train_averaged_reports(&chosen, &cfg)?;
        (net, reports, ids(&chosen))
    };
    out.timings
        .insert("train_seconds".into(), json!(start.elapsed().as_secs_f64()));
    save_model(&network, &transform, cfg.seed, &a.output)?;
    out.outputs.push(a.output.clone());
    if let Some(h) = &a.history {
        write_history(h, &reports)?;
        out.outputs.push(h.clone());
    }
    let report = evaluate(&network, &pictures)?;
    for r in &reports {
        println!(
            "trained {} epochs ({:?}), final loss {:.3e}",
            r.iterations,
            r.stop_reason,
            r.loss_history.last().copied().unwrap_or(f64::NAN)
        );
    }
    println!(
        "pictures {}; corpus eta_bar {:.6}, theta {:.6} -> {}",
        used.join(","),
        report.eta_bar,
        report.theta,
        a.output.display()
    );
    Ok(())
}

fn ids(pictures: &[PictureSample]) -> Vec<String> {
    pictures.iter().map(|p| p.picture_id.clone()).collect()
}

fn pick(pictures: &[PictureSample], count: usize, seed: u64) -> Result<Vec<PictureSample>> {
    Ok(choose_pictures(pictures.len(), count, seed)?
        .into_iter()
        .map(|i| pictures[i].clone())
        .collect())
}

fn find_picture<'a>(pictures: &'a [PictureSample], id: &str) -> Result<&'a PictureSample> {
    pictures
        .iter()
        .find(|p| p.picture_id == id)
        .ok_or_else(|| Error::Domain(format!("picture {id} not in corpus")))
}

/// Corpus in the model's channel order and normalization.
fn corpus_for_model(
    transform: &NormalizationTransform,
    path: &Path,
) -> Result<(Vec<PictureSample>, Vec<PictureSample>)> {
    let raw = load_pictures(path)?;
    let missing: Vec<&str> = transform
        .channels
        .iter()
        .filter(|c| !raw[0].channels.contains(c))
        .map(|c| c.short_name())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Dimension(format!(
            "corpus lacks the model's feature channels: {}",
            missing.join(",")
        )));
    }
    let raw = select_all(&raw, &transform.channels)?;
    let normalized = transform.apply(&raw)?;
    Ok((raw, normalized))
}

fn cmd_eval(a: &EvalArgs, out: &mut Outcome) -> Result<()> {
    std::fs::create_dir_all(&a.output).map_err(|e| Error::io(&a.output, e))?;
    let model = load_model(&a.model)?;
    let (raw, pictures) = corpus_for_model(&model.transform, &a.corpus)?;
    let report = evaluate(&model.network, &pictures)?;

    let eta_path = a.output.join("eta.csv");
    write_eta_csv(&report, &eta_path)?;
    out.outputs.push(eta_path);
    let summary_path = a.output.join("summary.json");
    let config = json!({
        "model": a.model.display().to_string(),
        "corpus": a.corpus.display().to_string(),
        "features": model.transform.channels.iter().map(|c| c.short_name()).collect::<Vec<_>>(),
        "depth": model.network.depth(),
        "width": model.network.width(),
    });
    write_summary_json(&report, config, &summary_path)?;
    out.outputs.push(summary_path);

    let index = match &a.hist_picture {
        Some(id) => raw
            .iter()
            .position(|p| &p.picture_id == id)
            .ok_or_else(|| Error::Domain(format!("picture {id} not in corpus")))?,
        None => 0,
    };
    let bins = a.bins as usize;
    for (c, kind) in model.transform.channels.iter().enumerate() {
        let values: Vec<f64> = raw[index].features.iter().map(|r| r[c]).collect();
        let path = a
            .output
            .join(format!("hist_input_{}.csv", kind.short_name()));
        write_histogram_csv(&histogram(&values, bins)?, &path)?;
        out.outputs.push(path);
    }
    let outputs: Vec<f64> = picture_outputs(&model.network, &pictures[index])?
        .iter()
        .map(|x| {
            model
                .transform
                .denormalize_target(x.iter().sum::<f64>() / x.len() as f64)
        })
        .collect();
    let path = a.output.join("hist_output.csv");
    write_histogram_csv(&histogram(&outputs, bins)?, &path)?;
    out.outputs.push(path);

    println!(
        "P = {}, eta_bar = {:.6}, theta = {:.6}; histograms of {} -> {}",
        report.pictures,
        report.eta_bar,
        report.theta,
        raw[index].picture_id,
        a.output.display()
    );
    Ok(())
}

fn fit_json(values: &[f64]) -> Value {
    match fit_lognormal(values) {
        Ok(f) => json!({"mu": f.mu, "s": f.s, "median": f.median(), "n": values.len()}),
        Err(e) => json!({"error": e.to_string(), "n": values.len()}),
    }
}

fn cmd_predict(a: &PredictArgs, out: &mut Outcome) -> Result<()> {
    let model = load_model(&a.model)?;
    let (raw, pictures) = corpus_for_model(&model.transform, &a.corpus)?;
    let mut w = csv::Writer::from_path(&a.output)?;
    w.write_record([
        "picture_id",
        "group",
        "true_mpa",
        "predicted_mpa",
        "flagged",
    ])?;
    let (mut predicted, mut truth, mut excluded) = (Vec::new(), Vec::new(), Vec::new());
    for (r, p) in raw.iter().zip(&pictures) {
        let limit = predict_limit(&model.network, p, &model.transform)?;
        let flagged = !(limit > 0.0 && limit.is_finite());
        if flagged {
            eprintln!(
                "warning: picture {} has non-positive predicted limit {limit}",
                r.picture_id
            );
            excluded.push(r.picture_id.clone());
        } else {
            predicted.push(limit);
        }
        truth.push(r.target);
        w.write_record([
            r.picture_id.clone(),
            r.group.to_string(),
            r.target.to_string(),
            limit.to_string(),
            flagged.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&a.output, e))?;
    out.outputs.push(a.output.clone());
    let fits = json!({
        "predicted": fit_json(&predicted),
        "true": fit_json(&truth),
        "excluded": excluded,
    });
    if let Some(path) = &a.fits {
        std::fs::write(path, serde_json::to_string_pretty(&fits)? + "\n")
            .map_err(|e| Error::io(path, e))?;
        out.outputs.push(path.clone());
    }
    println!("{} predictions -> {}", raw.len(), a.output.display());
    println!("log-normal fits: {fits}");
    Ok(())
}

fn cmd_bench(a: &BenchArgs, out: &mut Outcome) -> Result<()> {
    if a.multipliers.is_empty() || a.multipliers.contains(&0) {
        return Err(Error::Domain("width multipliers must be >= 1".into()));
    }
    let (pictures, _) = match &a.corpus {
        Some(path) => prepared_corpus(path, &a.features)?,
        None => {
            let raw = gen_synthetic(&GroupSpec::for_group(Group::V), 10, 150, a.seed.seed)?;
            normalize(&select_all(&raw, &parse_feature_list(&a.features)?)?)?
        }
    };
    let picture = &pick(&pictures, 1, a.seed.seed)?[0];
    let mut w = csv::Writer::from_path(&a.output)?;
    w.write_record(["multiplier", "N", "seconds", "final_loss"])?;
    for &m in &a.multipliers {
        let cfg = TrainConfig {
            learning_rate: a.lr,
            max_iterations: a.epochs as usize,
            depth: a.depth as usize,
            activation: a.activation,
            seed: a.seed.seed,
            width_multiplier: m,
            plateau_window: 0,
            ..TrainConfig::default()
        };
        let mut best = f64::INFINITY;
        let mut final_loss = f64::NAN;
        for _ in 0..a.repeats {
            let net = make_wide(picture.feature_dim(), m, &cfg)?;
            let start = Instant::now();
            let report = train_from(net, picture, &cfg)?;
            best = best.min(start.elapsed().as_secs_f64());
            final_loss = *report.loss_history.last().expect("at least one epoch");
        }
        let n = m * picture.feature_dim();
        w.write_record([
            m.to_string(),
            n.to_string(),
            best.to_string(),
            final_loss.to_string(),
        ])?;
        out.timings
            .insert(format!("multiplier_{m}_seconds"), json!(best));
        println!("multiplier {m:>3}  N = {n:>4}  {best:.4} s  final loss {final_loss:.3e}");
        std::io::stdout().flush().ok();
    }
    w.flush().map_err(|e| Error::io(&a.output, e))?;
    out.outputs.push(a.output.clone());
    Ok(())
}

fn cmd_shakedown(a: &ShakedownArgs, out: &mut Outcome) -> Result<()> {
    let inst = ShakedownInstance::load(&a.instance)?;
    let mut settings = SolverSettings::for_instance(&inst);
    if let Some(t) = a.tol_bisect {
        settings.tol_bisect = t;
    }
    if let Some(m) = a.max_iter {
        settings.max_iter = m;
    }
    let start = Instant::now();
    let sol = shakedown_factor(&inst, &settings)?;
    out.timings
        .insert("solve_seconds".into(), json!(start.elapsed().as_secs_f64()));
    let report = check_certificate(&inst, sol.alpha, &sol.residual, settings.tol_feas);
    let mut doc = json!({
        "alpha": sol.alpha,
        "alpha_upper": sol.alpha_upper,
        "elastic_limit": sol.elastic_limit,
        "residual": sol.residual,
        "feasibility_report": report,
        "settings": settings,
    });
    println!(
        "alpha = {:.6} (bracket [{:.6}, {:.6}], elastic limit {:.6}), certificate {}",
        sol.alpha,
        sol.alpha,
        sol.alpha_upper,
        sol.elastic_limit,
        if report.passed { "passed" } else { "FAILED" }
    );
    let mut failure =
        (!report.passed).then(|| Error::Verification("certificate re-check failed".into()));
    if a.oracle {
        let reference = brute_force_factor(&inst, a.grid_step)?;
        let gap = (sol.alpha - reference).abs() / sol.alpha;
        let agrees = oracle_agrees(sol.alpha, reference, a.grid_step, settings.tol_bisect);
        println!(
            "brute-force alpha = {reference:.6} (grid step {}), relative gap {gap:.2e}",
            a.grid_step
        );
        doc["oracle"] = json!({
            "alpha": reference,
            "grid_step": a.grid_step,
            "relative_gap": gap,
            "agrees": agrees,
        });
        if !agrees && failure.is_none() {
            failure = Some(Error::Verification(format!(
                "solver alpha {} and brute-force alpha {reference} disagree",
                sol.alpha
            )));
        }
    }
    std::fs::write(&a.output, serde_json::to_string_pretty(&doc)? + "\n")
        .map_err(|e| Error::io(&a.output, e))?;
    out.outputs.push(a.output.clone());
    failure.map_or(Ok(()), Err)
}

/// Relative gap between solver and reference within the grid resolution
/// plus the bisection width.
pub fn oracle_agrees(alpha: f64, reference: f64, grid_step: f64, tol_bisect: f64) -> bool {
    (alpha - reference).abs() <= (grid_step + tol_bisect) * alpha
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(
            run([
                "simresnet",
                "gen",
                "--group",
                "V",
                "--pictures",
                "0",
                "-o",
                "x.csv"
            ]),
            2
        );
        assert_eq!(run(["simresnet", "nonsense"]), 2);
        assert_eq!(
            run([
                "simresnet",
                "gen",
                "--group",
                "Q",
                "--pictures",
                "1",
                "-o",
                "x.csv"
            ]),
            2
        );
    }

    #[test]
    fn manifest_path_is_beside_output() {
        assert_eq!(
            manifest_beside(Path::new("out/v.csv")),
            PathBuf::from("out/v.csv.manifest.json")
        );
    }

    #[test]
    fn oracle_agreement_rule() {
        assert!(oracle_agrees(5.0, 5.0, 0.01, 1e-3));
        assert!(oracle_agrees(5.0, 4.96, 0.01, 1e-3));
        assert!(oracle_agrees(5.0, 5.05, 0.01, 1e-3));
        assert!(!oracle_agrees(5.0, 4.8, 0.01, 1e-3));
        assert!(!oracle_agrees(5.0, 5.1, 0.01, 1e-3));
    }

    #[test]
    fn train_options_map_to_config() {
        let cli = Cli::try_parse_from([
            "simresnet",
            "train",
            "--corpus",
            "c.csv",
            "-o",
            "m.json",
            "--depth",
            "8",
            "--lr",
            "0.05",
            "--no-early-stop",
            "--seed",
            "3",
        ])
        .unwrap();
        let Command::Train(a) = cli.command else {
            panic!()
        };
        let cfg = a.options.config();
        assert_eq!((cfg.depth, cfg.seed, cfg.plateau_window), (8, 3, 0));
        assert_eq!(cfg.learning_rate, 0.05);
    }
}
