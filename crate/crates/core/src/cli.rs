//! Command-line driver: `simulate`, `plan`, `estimate`, `diagnose`, `synth`.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 config error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};

use crate::designs::{draw_plan, estimate, DesignKind, DesignSpec, SamplePlan};
use crate::diagnostics::{stratum_diagnostics, theorem_report};
use crate::error::{Error, Result};
use crate::harness::{cell_tag, replication_seed, run_simulation, SimConfig, StrataConfig};
use crate::pool::synth::{preset, synth_pool, SynthSpec, DEFAULT_PRESET_SIZE};
use crate::pool::{load_labels, load_pool, write_pool, Pool, Schema};
use crate::proposal::{build_proposal, Proposal, ScoreTransform, TransformFamily, DEFAULT_FLOOR};
use crate::strata::{allocate_proportional, Stratification, DEFAULT_MIN_COUNT, DEFAULT_MIN_FRAC};

/// Tolerance below which a theorem criterion is reported as zero.
pub const VERDICT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "sis", version, about = "Label-efficient defect-rate estimation with stratified importance sampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte-Carlo grid of a config and write report.json / report.csv.
    Simulate(SimulateArgs),
    /// Draw a labelling plan (ids and weights) for one design.
    Plan(PlanArgs),
    /// Estimate the defect rate from a plan and the revealed labels.
    Estimate(EstimateArgs),
    /// Print per-stratum diagnostics and the predicted design orderings.
    Diagnose(DiagnoseArgs),
    /// Write a synthetic oracle-complete pool.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Pool CSV; defaults to the config's `pool` field.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long, value_parser = parse_design)]
    pub design: DesignKind,
    #[arg(long)]
    pub budget: usize,
    #[arg(long)]
    pub seed: u64,
    /// Reproduce replication M of a simulation run with master seed `--seed`.
    #[arg(long, value_name = "M")]
    pub replication: Option<usize>,
    /// Position of the proposal in the simulation config (with --replication).
    #[arg(long, default_value_t = 0, requires = "replication")]
    pub proposal_index: usize,
    /// categorical:ATTR | cross:A,B,... | quantile:FEATURE:FEATURE_BINS:SCORE_BINS
    #[arg(long, value_parser = parse_strata)]
    pub strata: Option<StrataConfig>,
    #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_FRAC)]
    pub min_frac: f64,
    #[arg(long, value_parser = parse_family, default_value = "raw_score")]
    pub family: TransformFamily,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    pub floor: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub plan: PathBuf,
    /// CSV with columns id,true_label.
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub pool: PathBuf,
    /// JSON report path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Pool CSV; defaults to the config's `pool` field.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["preset", "spec"])))]
pub struct SynthArgs {
    /// two-strata-aligned | two-strata-misaligned | low-defect
    #[arg(long)]
    pub preset: Option<String>,
    /// JSON synthetic spec.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Pool size for presets.
    #[arg(long, default_value_t = DEFAULT_PRESET_SIZE)]
    pub size: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_design(s: &str) -> std::result::Result<DesignKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_family(s: &str) -> std::result::Result<TransformFamily, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses the compact `--strata` syntax into a config section.
pub fn parse_strata(s: &str) -> std::result::Result<StrataConfig, String> {
    let (method, rest) = s
        .split_once(':')
        .ok_or_else(|| format!("strata spec `{s}` needs the form METHOD:PARAMS"))?;
    let params = match method {
        "categorical" if !rest.is_empty() => serde_json::json!({ "attr": rest }),
        "cross" if !rest.is_empty() => {
            let attrs: Vec<&str> = rest.split(',').collect();
            serde_json::json!({ "attrs": attrs })
        }
        "quantile" => {
            let parts: Vec<&str> = rest.split(':').collect();
            let [feature, fb, sb] = parts[..] else {
                return Err(format!("quantile strata need FEATURE:FEATURE_BINS:SCORE_BINS, got `{rest}`"));
            };
            let bins = |x: &str| x.parse::<usize>().map_err(|_| format!("`{x}` is not a bin count"));
            serde_json::json!({ "feature": feature, "feature_bins": bins(fb)?, "score_bins": bins(sb)? })
        }
        _ => return Err(format!("unrecognised strata spec `{s}`")),
    };
    Ok(StrataConfig {
        method: method.to_string(),
        params,
        min_count: DEFAULT_MIN_COUNT,
        min_frac: DEFAULT_MIN_FRAC,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn flush(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pool from `--pool`, or from the config's `pool` field resolved against the
/// config file's directory.
fn resolve_pool(explicit: Option<&Path>, config: &SimConfig, config_path: &Path) -> Result<Pool> {
    let path = match (explicit, &config.pool) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) if p.is_relative() => config_path.parent().unwrap_or(Path::new("")).join(p),
        (None, Some(p)) => p.clone(),
        (None, None) => return Err(Error::Config("no pool given (use --pool or the config `pool` field)".into())),
    };
    load_pool(path, &Schema::default())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let config = SimConfig::load(&args.config)?;
    let pool = resolve_pool(args.pool.as_deref(), &config, &args.config)?;
    if args.workers == Some(0) {
        return Err(Error::InvalidArgument("--workers must be at least 1".into()));
    }
    let report = run_simulation(&pool, &config, args.workers)?;
    report.write_to_dir(&args.out)
}

pub fn cmd_plan(args: &PlanArgs) -> Result<SamplePlan> {
    let pool = load_pool(&args.pool, &Schema::default())?;
    let strata = match (&args.strata, args.design.is_stratified()) {
        (Some(cfg), true) => {
            let cfg = StrataConfig {
                min_count: args.min_count,
                min_frac: args.min_frac,
                ..cfg.clone()
            };
            Some(cfg.build(&pool)?)
        }
        (None, true) => {
            return Err(Error::InvalidArgument(format!("{} needs --strata", args.design)));
        }
        _ => None,
    };
    let proposal: Option<Proposal<f64>> = if args.design.uses_proposal() {
        let transform = ScoreTransform::new(args.family, args.floor)?;
        Some(build_proposal(&pool, &transform, args.alpha)?)
    } else {
        None
    };
    let spec = DesignSpec::new(args.design, args.budget, strata.as_ref(), proposal.as_ref());
    let seed = match args.replication {
        Some(m) => replication_seed(args.seed, cell_tag(args.design.tag(), args.proposal_index), args.budget, m),
        None => args.seed,
    };
    let plan = draw_plan(&spec, &pool, seed)?;
    let mut out = create(&args.out)?;
    plan.write_csv(&mut out)?;
    flush(out, &args.out)?;
    Ok(plan)
}

pub fn cmd_estimate<W: Write>(args: &EstimateArgs, stdout: &mut W) -> Result<f64> {
    let file = File::open(&args.plan).map_err(|e| Error::io(&args.plan, e))?;
    let plan = SamplePlan::read_csv(file)?;
    let labels = load_labels(&args.labels)?;
    let pool = load_pool(&args.pool, &Schema::default())?;
    let est = estimate(&plan, &labels, &pool)?;
    match &args.out {
        Some(path) => {
            let mut out = create(path)?;
            est.write_json(&mut out)?;
            writeln!(out).map_err(|e| Error::io(path, e))?;
            flush(out, path)?;
        }
        None => {
            est.write_json(&mut *stdout)?;
            writeln!(stdout).map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(est.value)
}

pub fn cmd_diagnose<W: Write>(args: &DiagnoseArgs, stdout: &mut W) -> Result<()> {
    let config = SimConfig::load(&args.config)?;
    let pool = resolve_pool(args.pool.as_deref(), &config, &args.config)?;
    if !pool.is_oracle_complete() {
        return Err(Error::NotOracleComplete("diagnosis"));
    }
    let strata = match &config.strata {
        Some(s) => s.build(&pool)?,
        None => Stratification::trivial(&pool),
    };
    let mut proposals: Vec<(String, Proposal<f64>)> = config
        .proposals()
        .iter()
        .map(|p| Ok((format!("{} alpha={}", p.family.name(), p.alpha), p.build(&pool)?)))
        .collect::<Result<_>>()?;
    if proposals.is_empty() {
        proposals.push(("uniform alpha=0".into(), Proposal::uniform(pool.len())?));
    }

    let io = |e| Error::io("<stdout>", e);
    for (name, prop) in &proposals {
        let diag = stratum_diagnostics(&pool, &strata, prop)?;
        writeln!(stdout, "# proposal {name}").map_err(io)?;
        diag.write_csv(&mut *stdout)?;
        for &n in &config.budgets {
            let alloc = allocate_proportional(&strata, n)?;
            let report = theorem_report(&diag, &alloc, n)?;
            write!(stdout, "{}", report.summary(VERDICT_TOLERANCE)).map_err(io)?;
        }
    }
    stdout.flush().map_err(io)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Pool> {
    let spec = match (&args.preset, &args.spec) {
        (Some(name), _) => preset(name, args.size)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<SynthSpec>(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        (None, None) => return Err(Error::InvalidArgument("synth needs --preset or --spec".into())),
    };
    let pool = synth_pool(&spec, args.seed)?;
    let mut out = create(&args.out)?;
    write_pool(&pool, &mut out)?;
    flush(out, &args.out)?;
    Ok(pool)
}

pub fn run<W: Write>(cli: &Cli, stdout: &mut W) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Plan(a) => cmd_plan(a).map(|_| ()),
        Command::Estimate(a) => cmd_estimate(a, stdout).map(|_| ()),
        Command::Diagnose(a) => cmd_diagnose(a, stdout),
        Command::Synth(a) => cmd_synth(a).map(|_| ()),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    match run(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::StrataMethod;

    #[test]
    fn strata_syntax() {
        let c = parse_strata("categorical:stratum").unwrap();
        assert_eq!(c.method().unwrap(), StrataMethod::Categorical { attr: "stratum".into() });
        let c = parse_strata("cross:pred_label,region").unwrap();
        assert_eq!(
            c.method().unwrap(),
            StrataMethod::Cross { attrs: vec!["pred_label".into(), "region".into()] }
        );
        let c = parse_strata("quantile:perimeter:4:3").unwrap();
        assert_eq!(
            c.method().unwrap(),
            StrataMethod::Quantile { feature: "perimeter".into(), feature_bins: 4, score_bins: 3 }
        );
        for bad in ["categorical", "categorical:", "quantile:a:2", "quantile:a:x:2", "kmeans:3"] {
            assert!(parse_strata(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(main_with_args(["sis", "plan", "--pool", "x.csv"]), 2);
        assert_eq!(main_with_args(["sis", "frobnicate"]), 2);
        assert_eq!(
            main_with_args(["sis", "synth", "--preset", "low-defect", "--spec", "s.json", "--seed", "1", "--out", "x"]),
            2
        );
    }
}
