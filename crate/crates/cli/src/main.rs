use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use picsurv::comparators::{bootstrap_ci, fit_pi_mle, pi_summary, turnbull_npmle, BootstrapConfig};
use picsurv::config::RunConfig;
use picsurv::data::{cohort_dataset, Dataset};
use picsurv::mcmc::{sample_posterior, summarize, write_draws_csv};
use picsurv::priors::{elicit, ElicitedQuantiles, Preset};
use picsurv::simulate::{simulate_cohort, write_truth_csv, DgpConfig};
use picsurv::study::{run_study, write_study_outputs, Method, StudyConfig};
use picsurv::{Error, ModelKind};

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("PICSURV_BUILD_REV"), ")");
const BUILD: &str = concat!("picsurv ", env!("CARGO_PKG_VERSION"), " (", env!("PICSURV_BUILD_REV"), ")");

#[derive(Parser)]
#[command(name = "picsurv", version = VERSION, about = "Prevalence-incidence-cure models for interval-censored cohorts")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "PICSURV_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a cohort from the benchmark data-generating process.
    Simulate(SimulateArgs),
    /// Fit the PIC model (posterior sampling) or the PI model (maximum likelihood).
    Fit(FitArgs),
    /// Turn elicited 95% intervals into a prior specification.
    Elicit(ElicitArgs),
    /// Run a replicated simulation study.
    Study(StudyArgs),
    /// Turnbull nonparametric estimate of the survival curve.
    Npmle(NpmleArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Data-generating configuration (JSON); flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ElicitArgs {
    #[arg(long = "quantiles-json")]
    quantiles_json: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Pic,
    Pi,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Informative,
    Vague,
    Misspecified,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Informative => Preset::InformativeCervical,
            PresetArg::Vague => Preset::VagueCervical,
            PresetArg::Misspecified => Preset::MisspecifiedCervical,
        }
    }
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_enum, default_value = "vague")]
    preset: PresetArg,
    #[arg(long)]
    seed: Option<u64>,
    /// Bootstrap resamples per PI replication.
    #[arg(long)]
    resamples: Option<usize>,
    /// Full study configuration (JSON); flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NpmleArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

type CmdResult = Result<ExitCode, Error>;

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn manifest(command: &str, body: Value) -> Value {
    let mut m = json!({ "command": command, "build": BUILD });
    if let (Value::Object(m), Value::Object(b)) = (&mut m, body) {
        m.extend(b);
    }
    m
}

/// Sibling manifest path for single-file outputs.
fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn cmd_simulate(args: SimulateArgs) -> CmdResult {
    let mut config = match &args.config {
        Some(p) => serde_json::from_str::<DgpConfig>(&read(p)?)?,
        None => DgpConfig::default(),
    };
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let cohort = simulate_cohort(&config)?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("data.csv"), cohort_dataset(&cohort).to_csv())?;
    write_truth_csv(&cohort, BufWriter::new(fs::File::create(args.out.join("truth.csv"))?))?;
    write_json(
        &args.out.join("manifest.json"),
        &manifest("simulate", json!({ "config": config, "redrawn_subjects": cohort.redrawn })),
    )?;
    if cohort.redrawn > 0 {
        eprintln!("note: {} uninformative subjects were re-drawn", cohort.redrawn);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_fit(args: FitArgs) -> CmdResult {
    let config = RunConfig::from_json(&read(&args.config)?)?;
    let data = Dataset::parse(&read(&args.data)?)?;
    let centering = config.prepare(&data)?;
    let records = data.to_records(&config.covariates, &centering)?;
    let profiles = config.model_profiles(&centering);
    let times = &config.survival_times;
    fs::create_dir_all(&args.out)?;
    let base = json!({
        "data": args.data.display().to_string(),
        "config": config,
        "centering": centering,
        "n_records": records.len(),
    });
    let status = match config.model {
        ModelKind::Pic => {
            let prior = config.prior.resolve();
            let chains = sample_posterior(&records, &prior, ModelKind::Pic, &config.sampler)?;
            let summary = summarize(&chains, &profiles, times, &config.time_unit, records.len())?;
            write_json(&args.out.join("summary.json"), &summary)?;
            write_draws_csv(&chains, BufWriter::new(fs::File::create(args.out.join("draws.csv"))?))?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            if summary.converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("warning: chains have not converged (max rhat {:.3})", chains.max_rhat());
                ExitCode::from(2)
            }
        }
        ModelKind::Pi => {
            let mut fit = match fit_pi_mle(&records, &config.mle) {
                Ok(f) => f,
                Err(e @ Error::NonConvergence { .. }) => {
                    eprintln!("warning: {e}");
                    write_json(&args.out.join("manifest.json"), &manifest("fit", base))?;
                    return Ok(ExitCode::from(2));
                }
                Err(e) => return Err(e),
            };
            let intervals = match bootstrap_ci(&records, &mut fit, &config.bootstrap, &profiles, times) {
                Ok(b) => Some(b),
                Err(e @ Error::CiUnavailable { .. }) => {
                    eprintln!("warning: {e}");
                    None
                }
                Err(e) => return Err(e),
            };
            let summary = pi_summary(&fit, intervals.as_ref(), &profiles, times, &config.time_unit, records.len())?;
            write_json(&args.out.join("fit.json"), &summary)?;
            let mut csv = String::new();
            if let Some(b) = &intervals {
                csv.push_str(&b.names.join(","));
                csv.push('\n');
                for row in &b.draws {
                    csv.push_str(&row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
                    csv.push('\n');
                }
            }
            fs::write(args.out.join("bootstrap.csv"), csv)?;
            ExitCode::SUCCESS
        }
    };
    write_json(&args.out.join("manifest.json"), &manifest("fit", base))?;
    Ok(status)
}

fn cmd_elicit(args: ElicitArgs) -> CmdResult {
    let q: ElicitedQuantiles = serde_json::from_str(&read(&args.quantiles_json)?)?;
    let spec = elicit(&q)?;
    write_json(&args.out, &spec)?;
    write_json(
        &manifest_path(&args.out),
        &manifest("elicit", json!({ "quantiles": q })),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_study(args: StudyArgs) -> CmdResult {
    let mut config = match &args.config {
        Some(p) => serde_json::from_str::<StudyConfig>(&read(p)?)?,
        None => StudyConfig::default(),
    };
    if let Some(r) = args.reps {
        config.reps = r;
    }
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(b) = args.resamples {
        config.bootstrap = BootstrapConfig { resamples: b, ..config.bootstrap };
    }
    match args.method {
        Some(MethodArg::Pi) => config.method = Method::Pi,
        Some(MethodArg::Pic) => config.method = Method::Pic(args.preset.into()),
        None => {}
    }
    let result = run_study(&config)?;
    let m = &result.metrics;
    let body = json!({
        "config": config,
        "replication_seeds": result.seeds,
        "n_reps": m.n_reps,
        "n_failed_fit": m.n_failed_fit,
        "n_failed_ci": m.n_failed_ci,
        "n_flagged": m.n_flagged,
        "redrawn_subjects": result.redrawn_subjects,
    });
    write_study_outputs(&args.out, &result, &manifest("study", body))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_npmle(args: NpmleArgs) -> CmdResult {
    let data = Dataset::parse_intervals(&read(&args.data)?)?;
    let curve = turnbull_npmle(&data.intervals())?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    curve.write_csv(BufWriter::new(fs::File::create(&args.out)?))?;
    write_json(
        &manifest_path(&args.out),
        &manifest(
            "npmle",
            json!({ "data": args.data.display().to_string(), "iterations": curve.iterations }),
        ),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Elicit(a) => cmd_elicit(a),
        Command::Study(a) => cmd_study(a),
        Command::Npmle(a) => cmd_npmle(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
