//! `disparity` command line: simulate data, decompose the disparity, fit
//! the direct-effect forest, form sub-groups and audit a classifier.

pub mod config;
pub mod error;
pub mod stages;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use disparity_core::audit::{gap_analysis, CiMode, PredictionSet};
use disparity_core::decompose::{decomposition_report, DecompositionResult};
use disparity_core::hetero_forest::IndividualEffects;
use disparity_core::scm_sim::{sample, ScmSpec};
use disparity_core::subgroup::{assign, export_histogram};
use disparity_core::tabular::write_csv;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::RunConfig;
pub use error::{CliError, CliResult, EXIT_CONFIG, EXIT_OK, EXIT_STAGE};

#[derive(Debug, Parser)]
#[command(name = "disparity", version, about = "Causal disparity decomposition and sub-group audits")]
pub struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages; 0 or absent uses every core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Audit interval method; overrides the config.
    #[arg(long, global = true, value_enum)]
    pub ci: Option<CiArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CiArg {
    Bootstrap,
    Reruns,
}

impl From<CiArg> for CiMode {
    fn from(c: CiArg) -> Self {
        match c {
            CiArg::Bootstrap => CiMode::Bootstrap,
            CiArg::Reruns => CiMode::Reruns,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a dataset from an SCM and write its true effects.
    Simulate {
        /// SCM definition (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Number of rows.
        #[arg(long)]
        n: usize,
    },
    /// Estimate the TV decomposition.
    Decompose {
        /// Ground-truth JSON from `simulate`; adds a comparison table.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Fit the direct-effect forest and export individual effects.
    Effects,
    /// Bin individual effects into sub-groups and describe them.
    Subgroup {
        /// Reuse an effects CSV instead of fitting the forest.
        #[arg(long)]
        effects: Option<PathBuf>,
    },
    /// Audit the baseline classifier per sub-group.
    Audit {
        #[arg(long)]
        effects: Option<PathBuf>,
        /// Audit these predictions instead of training the baseline.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Every stage in order, with a manifest of the outputs.
    Pipeline,
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate { spec, n } => simulate(cli, spec, *n),
        Command::Decompose { truth } => decompose(cli, truth.as_deref()),
        Command::Effects => effects(cli),
        Command::Subgroup { effects } => subgroup(cli, effects.as_deref()),
        Command::Audit { effects, predictions } => audit(cli, effects.as_deref(), predictions.as_deref()),
        Command::Pipeline => pipeline(cli),
    })
}

/// Loaded config with command-line overrides applied and checked.
fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::config("--config is required for this command"))?;
    let mut cfg = RunConfig::from_file(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(c) = cli.ci {
        cfg.ci = c.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Output files written so far, relative to `dir`.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn create(cli: &Cli, cfg: Option<&RunConfig>) -> CliResult<Self> {
        let dir = cli
            .out
            .clone()
            .or_else(|| cfg.and_then(RunConfig::out_dir))
            .ok_or_else(|| CliError::config("an output directory is required (--out or config \"out\")"))?;
        std::fs::create_dir_all(&dir).map_err(|e| CliError::config(format!("{}: {e}", dir.display())))?;
        Ok(Outputs { dir, files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }
}

fn write_err(e: impl std::fmt::Display) -> CliError {
    CliError::Stage {
        stage: "write",
        message: e.to_string(),
    }
}

fn simulate(cli: &Cli, spec_path: &Path, n: usize) -> CliResult<()> {
    let seed = cli.seed.ok_or_else(|| CliError::config("--seed is required"))?;
    if n == 0 {
        return Err(CliError::config("--n must be at least 1"));
    }
    let spec = ScmSpec::from_json_file(spec_path).map_err(|e| CliError::config(e.to_string()))?;
    let mut out = Outputs::create(cli, None)?;
    let data = sample(&spec, n, seed).map_err(CliError::stage("simulate"))?;
    let truth = spec.true_effects().map_err(CliError::stage("simulate"))?;
    write_csv(&data, out.path("data.csv")).map_err(write_err)?;
    write_json(&truth, &out.path("truth.json"))?;
    write_json(&spec.role_schema(), &out.path("schema.json"))?;
    for (name, v) in truth.entries() {
        println!("{name:<7} {v:>10.6}");
    }
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(write_err)?;
    std::fs::write(path, text + "\n").map_err(write_err)
}

fn print_decomposition(result: &DecompositionResult) {
    for r in decomposition_report(result).rows {
        println!("{:<7} {}", r.effect, r.summary);
    }
}

fn decompose(cli: &Cli, truth: Option<&Path>) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let truth = truth
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<disparity_core::scm_sim::GroundTruth>(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", p.display())))
        })
        .transpose()?;
    let data = cfg.load()?;
    let mut out = Outputs::create(cli, Some(&cfg))?;
    let result = stages::decompose(&cfg, &data, cfg.seed()?)?;
    let report = decomposition_report(&result);
    report.write_json(out.path("decomposition.json")).map_err(write_err)?;
    report.write_csv(out.path("decomposition.csv")).map_err(write_err)?;
    match truth {
        None => print_decomposition(&result),
        Some(t) => {
            let path = out.path("comparison.csv");
            let mut text = String::from("effect,estimate,truth,difference\n");
            println!("{:<7} {:>10} {:>10} {:>10}", "effect", "estimate", "truth", "diff");
            for ((name, est), (_, tv)) in result.effects().into_iter().zip(t.entries()) {
                let diff = est.point - tv;
                text += &format!("{name},{:.6},{tv:.6},{diff:.6}\n", est.point);
                println!("{name:<7} {:>10.6} {tv:>10.6} {diff:>10.6}", est.point);
            }
            std::fs::write(path, text).map_err(write_err)?;
        }
    }
    Ok(())
}

fn effects(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let data = cfg.load()?;
    let mut out = Outputs::create(cli, Some(&cfg))?;
    let f = stages::forest(&cfg, &data, cfg.seed()?)?;
    let hist = export_histogram(&f.effects, cfg.histogram_width).map_err(CliError::stage("forest"))?;
    f.effects.write_csv(out.path("effects.csv")).map_err(write_err)?;
    f.importance.write_csv(out.path("importance.csv")).map_err(write_err)?;
    hist.write_csv(out.path("histogram.csv")).map_err(write_err)?;
    for (name, s) in f.importance.ranked().into_iter().take(5) {
        println!("{name:<20} {s:.6}");
    }
    Ok(())
}

fn read_effects(path: &Path) -> CliResult<IndividualEffects> {
    IndividualEffects::read_csv(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn effects_or_fit(cfg: &RunConfig, data: &disparity_core::RoledDataset, path: Option<&Path>) -> CliResult<IndividualEffects> {
    match path {
        Some(p) => read_effects(p),
        None => Ok(stages::forest(cfg, data, cfg.seed()?)?.effects),
    }
}

fn subgroup(cli: &Cli, effects_path: Option<&Path>) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let data = cfg.load()?;
    let mut out = Outputs::create(cli, Some(&cfg))?;
    let effects = effects_or_fit(&cfg, &data, effects_path)?;
    let (_, summary) = stages::subgroup(&cfg, &data, &effects)?;
    summary.write_json(out.path("subgroup.json")).map_err(write_err)?;
    summary.write_csv(out.path("subgroup.csv")).map_err(write_err)?;
    for g in &summary.groups {
        let tv = g.tv.map(|v| format!("{v:.6}")).unwrap_or_else(|| "n/a".into());
        println!("{:<12} n={:<7} tv={tv}", g.label, g.n);
    }
    Ok(())
}

fn audit(cli: &Cli, effects_path: Option<&Path>, predictions: Option<&Path>) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let seed = cfg.seed()?;
    let predictions = predictions
        .map(|p| PredictionSet::read_csv(p).map_err(|e| CliError::config(format!("{}: {e}", p.display()))))
        .transpose()?;
    let data = cfg.load()?;
    let mut out = Outputs::create(cli, Some(&cfg))?;
    let effects = effects_or_fit(&cfg, &data, effects_path)?;
    let assignment = assign(&effects, &cfg.binning()?).map_err(CliError::stage("subgroup"))?;
    let (preds, report) = match predictions {
        Some(p) => {
            let report = stages::audit_predictions(&cfg, &data, &assignment, &p, seed)?;
            (p, report)
        }
        None => {
            let a = stages::audit(&cfg, &data, &assignment, seed)?;
            (a.predictions, a.report)
        }
    };
    let gaps = gap_analysis(&report);
    preds.write_csv(out.path("predictions.csv")).map_err(write_err)?;
    report.write_json(out.path("audit.json")).map_err(write_err)?;
    report.write_csv(out.path("audit.csv")).map_err(write_err)?;
    gaps.write_json(out.path("gaps.json")).map_err(write_err)?;
    gaps.write_plot_csv(&report, out.path("gaps.csv")).map_err(write_err)?;
    print_audit(&report);
    Ok(())
}

fn print_audit(report: &disparity_core::audit::AuditReport) {
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "n/a".into());
    println!("{:<12} {:>9} {:>9} {:>9}", "group", "precision", "recall", "accuracy");
    for g in std::iter::once(&report.overall).chain(&report.groups) {
        let m = g.all.metrics();
        println!("{:<12} {:>9} {:>9} {:>9}", g.label, fmt(m.precision), fmt(m.recall), fmt(m.accuracy));
    }
}

#[derive(Debug, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_hash: String,
    /// Sorted by file name.
    pub files: Vec<ManifestEntry>,
}

fn manifest(out: &Outputs, seed: u64, config_hash: String) -> CliResult<Manifest> {
    let mut names = out.files.clone();
    names.sort();
    let files = names
        .into_iter()
        .map(|file| {
            let bytes = std::fs::read(out.dir.join(&file)).map_err(write_err)?;
            Ok(ManifestEntry {
                sha256: hex::encode(Sha256::digest(&bytes)),
                bytes: bytes.len() as u64,
                file,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Manifest {
        seed,
        config_hash,
        files,
    })
}

/// Names of the files `pipeline` writes besides manifest.json.
pub const PIPELINE_ARTIFACTS: [&str; 6] =
    ["decomposition.json", "effects.csv", "histogram.csv", "subgroup.json", "audit.json", "gaps.csv"];

fn pipeline(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let seed = cfg.seed()?;
    let data = cfg.load()?;
    let mut out = Outputs::create(cli, Some(&cfg))?;

    let decomposition = stages::decompose(&cfg, &data, seed)?;
    let forest = stages::forest(&cfg, &data, seed)?;
    let hist = export_histogram(&forest.effects, cfg.histogram_width).map_err(CliError::stage("forest"))?;
    let (assignment, summary) = stages::subgroup(&cfg, &data, &forest.effects)?;
    let audit = stages::audit(&cfg, &data, &assignment, seed)?;
    let gaps = gap_analysis(&audit.report);

    let [dj, ec, hc, sj, aj, gc] = PIPELINE_ARTIFACTS;
    decomposition_report(&decomposition).write_json(out.path(dj)).map_err(write_err)?;
    forest.effects.write_csv(out.path(ec)).map_err(write_err)?;
    hist.write_csv(out.path(hc)).map_err(write_err)?;
    summary.write_json(out.path(sj)).map_err(write_err)?;
    audit.report.write_json(out.path(aj)).map_err(write_err)?;
    gaps.write_plot_csv(&audit.report, out.path(gc)).map_err(write_err)?;
    let m = manifest(&out, seed, cfg.hash())?;
    write_json(&m, &out.dir.join("manifest.json"))?;

    print_decomposition(&decomposition);
    print_audit(&audit.report);
    Ok(())
}
