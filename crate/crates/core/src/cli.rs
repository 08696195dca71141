//! Command-line surface: argument parsing, config merging, dispatch.
//!
//! Every setting can come from a flat key=value config file (keys are the
//! long flag names); explicit flags win. With --json a command prints one
//! JSON document on stdout and keeps prose on stderr. Randomized commands
//! take their seed from --seed, then the CRN_SEED variable, then entropy;
//! a seed not given on the command line is printed for reproducibility.

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::Rng;
use serde_json::json;

use crate::analysis::{classify_db, summarize, DbClass};
use crate::data::{load_config, parse_named_values, resolve_data, save_csv, time_grid};
use crate::enumeration::{count_mechanisms, count_steps, enumerate_mechanisms, EnumerationFilter};
use crate::fitting::{db_complete, fit, FitProblem, FitResult, StartSpec, Weighting};
use crate::kinetics::{sample_with_noise, KineticSystem, NoiseSpec, RateSpec};
use crate::mechanism::Mechanism;
use crate::pipeline::{
    load_results, rank_report, screen, write_rank_plots, Criterion, RankReport, ScreenConfig,
};
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "crn",
    version,
    about = "Enumerate, analyze, simulate, fit and screen mass-action reaction mechanisms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count reaction steps for M species, or mechanisms if --steps is given
    Count(CountArgs),
    /// Write every mechanism of R steps over M species, one per line
    Enumerate(EnumerateArgs),
    /// Structural report: linkage classes, deficiency, detailed balance
    Analyze(AnalyzeArgs),
    /// Integrate the mass-action ODEs and write a concentration table
    Simulate(SimulateArgs),
    /// Estimate rate coefficients from concentration-time data
    Fit(FitArgs),
    /// Fit every candidate mechanism against a dataset and rank them
    Screen(ScreenArgs),
    /// Render a screen results file as a ranking table and plot data
    Rank(RankArgs),
}

#[derive(Args)]
struct CountArgs {
    #[arg(long)]
    species: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    /// Count only mechanisms using every one of the M species
    #[arg(long)]
    exact_species: bool,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long)]
    species: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    exact_species: bool,
    #[arg(long)]
    mass_conserving: bool,
    /// Keep only this detailed-balance class (udb or cdb)
    #[arg(long)]
    db_class: Option<String>,
    /// Stop after N mechanisms
    #[arg(long)]
    limit: Option<u128>,
    /// Refuse to materialize more than this many mechanisms
    #[arg(long)]
    cap: Option<u128>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Mechanism text, e.g. "X <=> Y; 2 X <=> X + Y"
    #[arg(long)]
    mechanism: Option<String>,
    /// File holding the mechanism text
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Mechanism text or a file holding it
    #[arg(long)]
    mechanism: Option<String>,
    /// Rate coefficients, e.g. "k1=0.1,km1=0.1,k2=1"
    #[arg(long)]
    rates: Option<String>,
    /// Complete missing backward coefficients from detailed balance
    #[arg(long)]
    db_complete: bool,
    /// Initial concentrations, e.g. "X=2,Y=3"
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Relative observation noise, e.g. 0.02
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Mechanism text or a file holding it
    #[arg(long)]
    mechanism: Option<String>,
    /// CSV path or fixture:salicylic / fixture:sim-m2r2
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    db_constrained: bool,
    /// Residual weighting: unit or relative
    #[arg(long)]
    weights: Option<String>,
    /// Starting coefficients, e.g. "k1=1,km1=1,k2=1,km2=1"
    #[arg(long)]
    start: Option<String>,
    /// Number of starts; extras are drawn log-uniform
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Estimate initial concentrations missing from the data
    #[arg(long)]
    fit_init: bool,
    /// Fit plain coefficients instead of logs (admits negative estimates)
    #[arg(long)]
    allow_negative: bool,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ScreenArgs {
    #[arg(long)]
    species: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    mass_conserving: bool,
    #[arg(long)]
    exact_species: bool,
    /// Fit CDB candidates in the detailed-balance parametrization
    #[arg(long)]
    db_constrained: bool,
    /// Ranking criterion: aic, bic or rss
    #[arg(long)]
    criterion: Option<String>,
    /// Rows in the ranking table
    #[arg(long)]
    top: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Refuse to fit more than this many candidates
    #[arg(long)]
    cap: Option<u128>,
    /// Reuse records already in the output file
    #[arg(long)]
    resume: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    /// Screen results file (JSON lines)
    #[arg(short, long)]
    input: Option<PathBuf>,
    #[arg(long)]
    criterion: Option<String>,
    #[arg(long)]
    top: Option<usize>,
    /// Write observed-vs-fitted CSVs for the ranked rows into this directory
    #[arg(long)]
    plots: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Entry point used by the binary: parses std::env args, runs, maps errors
/// to exit codes (2 empty candidate set, 3 cap exceeded, 1 anything else).
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            match e {
                Error::EmptyCandidates => 2,
                Error::CapExceeded { .. } => 3,
                _ => 1,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Count(args) => cmd_count(args),
        Command::Enumerate(args) => cmd_enumerate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Screen(args) => cmd_screen(args),
        Command::Rank(args) => cmd_rank(args),
    }
}

// config plumbing: a config file is a bag of long-flag settings; each
// command takes the keys it knows and rejects leftovers

type Cfg = BTreeMap<String, String>;

fn cfg_load(path: &Option<PathBuf>) -> Result<Cfg> {
    match path {
        None => Ok(Cfg::new()),
        Some(p) => Ok(load_config(p)?.into_iter().collect()),
    }
}

fn cfg_take<T: std::str::FromStr>(cfg: &mut Cfg, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match cfg.remove(key) {
        None => Ok(None),
        Some(raw) => raw
            .trim()
            .parse::<T>()
            .map(Some)
            .map_err(|e| Error::Config(format!("config key {}: {}", key, e))),
    }
}

fn cfg_flag(cfg: &mut Cfg, key: &str, flag: bool) -> Result<bool> {
    Ok(flag || cfg_take::<bool>(cfg, key)?.unwrap_or(false))
}

fn cfg_done(cfg: Cfg) -> Result<()> {
    if cfg.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "unknown config keys: {}",
            cfg.keys().cloned().collect::<Vec<_>>().join(", ")
        )))
    }
}

fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("missing required --{} (flag or config)", flag)))
}

/// A mechanism argument is text when it looks like the grammar, else a path.
fn resolve_mechanism(value: &str) -> Result<Mechanism> {
    if value.contains("->") || value.contains("<=>") {
        Mechanism::parse(value)
    } else {
        let text = std::fs::read_to_string(value)
            .map_err(|e| Error::Mechanism(format!("{}: {}", value, e)))?;
        Mechanism::parse(text.trim())
    }
}

/// Seed resolution: --seed, else CRN_SEED, else entropy. The bool reports
/// whether the value was selected rather than given on the command line.
fn resolve_seed(flag: Option<u64>) -> (u64, bool) {
    match flag {
        Some(s) => (s, false),
        None => match std::env::var("CRN_SEED").ok().and_then(|v| v.trim().parse().ok()) {
            Some(s) => (s, true),
            None => (rand::rng().random(), true),
        },
    }
}

fn parse_weights(text: &str) -> Result<Weighting> {
    match text.to_ascii_lowercase().as_str() {
        "unit" => Ok(Weighting::Unit),
        "relative" => Ok(Weighting::Relative),
        other => Err(Error::Config(format!(
            "unknown weighting {:?} (expected unit or relative)",
            other
        ))),
    }
}

fn parse_db_class(text: &str) -> Result<DbClass> {
    match text.to_ascii_lowercase().as_str() {
        "udb" => Ok(DbClass::Udb),
        "cdb" => Ok(DbClass::Cdb),
        other => Err(Error::Config(format!(
            "unknown detailed-balance class {:?} (expected udb or cdb)",
            other
        ))),
    }
}

fn cmd_count(args: CountArgs) -> Result<()> {
    let mut cfg = cfg_load(&args.config)?;
    let species = require(args.species.or(cfg_take(&mut cfg, "species")?), "species")?;
    let steps = args.steps.or(cfg_take(&mut cfg, "steps")?);
    let exact = cfg_flag(&mut cfg, "exact-species", args.exact_species)?;
    cfg_done(cfg)?;
    match steps {
        Some(r) => println!("{}", count_mechanisms(species, r, exact)),
        None if exact => {
            return Err(Error::Config(
                "--exact-species needs --steps: it is a property of mechanisms".into(),
            ))
        }
        None => println!("{}", count_steps(species)),
    }
    Ok(())
}

fn cmd_enumerate(args: EnumerateArgs) -> Result<()> {
    let mut cfg = cfg_load(&args.config)?;
    let species = require(args.species.or(cfg_take(&mut cfg, "species")?), "species")?;
    let steps = require(args.steps.or(cfg_take(&mut cfg, "steps")?), "steps")?;
    let exact = cfg_flag(&mut cfg, "exact-species", args.exact_species)?;
    let mass = cfg_flag(&mut cfg, "mass-conserving", args.mass_conserving)?;
    let db_class = args
        .db_class
        .or(cfg_take(&mut cfg, "db-class")?)
        .map(|t| parse_db_class(&t))
        .transpose()?;
    let limit = args.limit.or(cfg_take(&mut cfg, "limit")?);
    let cap = args.cap.or(cfg_take(&mut cfg, "cap")?).unwrap_or(1_000_000);
    let output = require(args.output.or(cfg_take(&mut cfg, "output")?), "output")?;
    cfg_done(cfg)?;

    let filter = EnumerationFilter {
        exact_species: exact,
        mass_conserving: mass,
        db_class,
    };
    let file = std::fs::File::create(&output)?;
    let mut out = BufWriter::new(file);
    let mut written: u128 = 0;
    for mech in enumerate_mechanisms(species, steps, filter)? {
        if limit.is_some_and(|n| written >= n) {
            break;
        }
        if written >= cap {
            return Err(Error::CapExceeded {
                count: written + 1,
                cap,
            });
        }
        writeln!(out, "{}\t{}", mech.canonical_id(), mech.serialize())?;
        written += 1;
    }
    out.flush()?;
    eprintln!("{} mechanisms -> {}", written, output.display());
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let mut cfg = cfg_load(&args.config)?;
    let mechanism = args.mechanism.or(cfg_take(&mut cfg, "mechanism")?);
    let file: Option<PathBuf> = args.file.or(cfg_take(&mut cfg, "file")?);
    let json = cfg_flag(&mut cfg, "json", args.json)?;
    cfg_done(cfg)?;

    let mech = match (mechanism, file) {
        (Some(text), None) => Mechanism::parse(&text)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Mechanism(format!("{}: {}", path.display(), e)))?;
            Mechanism::parse(text.trim())?
        }
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "--mechanism and --file are mutually exclusive".into(),
            ))
        }
        (None, None) => return Err(Error::Config("need --mechanism or --file".into())),
    };

    let summary = summarize(&mech);
    let conditions = if summary.db_class.is_some() {
        classify_db(&mech)?.1
    } else {
        Vec::new()
    };
    let db_class = match summary.db_class {
        Some(c) => c.to_string(),
        None => "NOT_APPLICABLE".to_string(),
    };

    if json {
        let doc = json!({
            "id": mech.canonical_id(),
            "M": mech.m(),
            "R": mech.r(),
            "N": summary.n,
            "L": summary.l,
            "S": summary.s,
            "deficiency": summary.deficiency,
            "reversible": summary.reversible,
            "weakly_reversible": summary.weakly_reversible,
            "mass_conserving": summary.mass_conserving,
            "db_class": db_class,
            "conditions": conditions.iter().map(|c| json!({
                "kind": c.kind.to_string(),
                "exponents": c.exponents,
                "rendered": c.render(),
            })).collect::<Vec<_>>(),
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(());
    }

    println!("mechanism: {}", mech.serialize());
    println!("id: {}", mech.canonical_id());
    println!(
        "M = {}  R = {}  N = {}  L = {}  S = {}  deficiency = {}",
        mech.m(),
        mech.r(),
        summary.n,
        summary.l,
        summary.s,
        summary.deficiency
    );
    println!(
        "reversible: {}  weakly reversible: {}  mass conserving: {}",
        summary.reversible, summary.weakly_reversible, summary.mass_conserving
    );
    println!("detailed balance: {}", db_class);
    if !conditions.is_empty() {
        println!(
            "conditions ({} circuit, {} forest):",
            summary.n_circuit_conditions, summary.n_forest_conditions
        );
        for c in &conditions {
            println!("  [{}] {}", c.kind, c.render());
        }
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = cfg_load(&args.config)?;
    let mechanism = require(args.mechanism.or(cfg_take(&mut cfg, "mechanism")?), "mechanism")?;
    let rates_text = require(args.rates.or(cfg_take(&mut cfg, "rates")?), "rates")?;
    let db_comp = cfg_flag(&mut cfg, "db-complete", args.db_complete)?;
    let init_text = require(args.init.or(cfg_take(&mut cfg, "init")?), "init")?;
    let t_end = require(args.t_end.or(cfg_take(&mut cfg, "t-end")?), "t-end")?;
    let dt = require(args.dt.or(cfg_take(&mut cfg, "dt")?), "dt")?;
    let noise = args.noise.or(cfg_take(&mut cfg, "noise")?);
    let seed_flag = args.seed.or(cfg_take(&mut cfg, "seed")?);
    let output = require(args.output.or(cfg_take(&mut cfg, "output")?), "output")?;
    cfg_done(cfg)?;

    let mech = resolve_mechanism(&mechanism)?;
    let spec = RateSpec::parse(&mech, &rates_text)?;
    let rates = if db_comp {
        db_complete(&mech, &spec)?
    } else {
        spec.complete(&mech)?
    };

    let init = parse_named_values(&init_text)?;
    let names = mech.species_names();
    let mut c0 = vec![0.0; mech.m()];
    let mut seen = vec![false; mech.m()];
    for (name, value) in &init {
        let idx = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("unknown species {:?} in --init", name)))?;
        if value.is_sign_negative() || !value.is_finite() {
            return Err(Error::Config(format!(
                "initial concentration of {} must be finite and non-negative",
                name
            )));
        }
        c0[idx] = *value;
        seen[idx] = true;
    }
    for (idx, seen) in seen.iter().enumerate() {
        if !seen {
            return Err(Error::Config(format!(
                "missing initial concentration for {}",
                names[idx]
            )));
        }
    }

    let grid = time_grid(t_end, dt)?;
    let system = KineticSystem::new(&mech, &rates)?;
    let traj = system.integrate(&c0, t_end, &grid, &Default::default())?;

    let set = match noise {
        Some(sigma) => {
            let (seed, chosen) = resolve_seed(seed_flag);
            if chosen {
                eprintln!("seed: {}", seed);
            }
            sample_with_noise(&traj, &NoiseSpec::new(sigma, seed)?)
        }
        None => crate::data::ObservationSet {
            times: traj.times.clone(),
            species: traj.names.clone(),
            values: traj
                .states
                .iter()
                .map(|row| row.iter().copied().map(Some).collect())
                .collect(),
            init: None,
            time_label: None,
            value_label: None,
        },
    };
    save_csv(&set, &output)?;
    eprintln!(
        "{} samples of {} species -> {}",
        set.times.len(),
        set.species.len(),
        output.display()
    );
    Ok(())
}

fn fit_json(result: &FitResult) -> serde_json::Value {
    json!({
        "names": result.names,
        "estimates": result.estimates,
        "std_errors": result.std_errors,
        "correlation": result.correlation,
        "rates": {
            "k_plus": result.rates.k_plus,
            "k_minus": result.rates.k_minus,
        },
        "init_estimates": result.init_estimates
            .iter()
            .map(|(name, value)| json!({"species": name, "value": value}))
            .collect::<Vec<_>>(),
        "rss": result.rss,
        "n": result.n,
        "p": result.p,
        "aic": result.aic,
        "bic": result.bic,
        "converged": result.converged,
        "iterations": result.iterations,
        "n_starts": result.n_starts,
        "start_index": result.start_index,
        "rank_deficient": result.rank_deficient,
        "db_violation": result.db_violation,
    })
}

fn render_fit(result: &FitResult, out: &mut impl Write) -> std::io::Result<()> {
    for (i, name) in result.names.iter().enumerate() {
        match &result.std_errors {
            Some(se) => writeln!(
                out,
                "{:<8} {:>14.8} +/- {:.8}",
                name, result.estimates[i], se[i]
            )?,
            None => writeln!(out, "{:<8} {:>14.8}", name, result.estimates[i])?,
        }
    }
    writeln!(
        out,
        "rss {:.6e}  n {}  p {}  aic {:.4}  bic {:.4}",
        result.rss, result.n, result.p, result.aic, result.bic
    )?;
    writeln!(
        out,
        "{} after {} iterations (best of {} starts: index {})",
        if result.converged {
            "converged"
        } else {
            "did not converge"
        },
        result.iterations,
        result.n_starts,
        result.start_index
    )?;
    if let Some(v) = result.db_violation {
        writeln!(out, "detailed-balance violation: {:.3e}", v)?;
    }
    if result.rank_deficient {
        writeln!(out, "warning: rank-deficient Jacobian at the optimum")?;
    }
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let mut cfg = cfg_load(&args.config)?;
    let mechanism = require(args.mechanism.or(cfg_take(&mut cfg, "mechanism")?), "mechanism")?;
    let data_spec: String = require(args.data.or(cfg_take(&mut cfg, "data")?), "data")?;
    let db_constrained = cfg_flag(&mut cfg, "db-constrained", args.db_constrained)?;
    let weights = args
        .weights
        .or(cfg_take(&mut cfg, "weights")?)
        .map(|t| parse_weights(&t))
        .transpose()?
        .unwrap_or(Weighting::Unit);
    let start = args.start.or(cfg_take(&mut cfg, "start")?);
    let n_starts = args.starts.or(cfg_take(&mut cfg, "starts")?).unwrap_or(1);
    let seed_flag = args.seed.or(cfg_take(&mut cfg, "seed")?);
    let fit_init = cfg_flag(&mut cfg, "fit-init", args.fit_init)?;
    let allow_negative = cfg_flag(&mut cfg, "allow-negative", args.allow_negative)?;
    let json = cfg_flag(&mut cfg, "json", args.json)?;
    cfg_done(cfg)?;

    let mech = resolve_mechanism(&mechanism)?;
    let data = resolve_data(&data_spec)?;
    let mut problem = FitProblem::new(mech.clone(), data);
    problem.weighting = weights;
    problem.db_constrained = db_constrained;
    problem.fit_init = fit_init;
    problem.allow_negative = allow_negative;

    let start_rates = start
        .map(|text| RateSpec::parse(&mech, &text).and_then(|s| s.complete(&mech)))
        .transpose()?;
    let seed = if n_starts > 1 {
        let (seed, chosen) = resolve_seed(seed_flag);
        if chosen {
            eprintln!("seed: {}", seed);
        }
        seed
    } else {
        seed_flag.unwrap_or(0)
    };
    let starts = StartSpec {
        rates: start_rates,
        n_starts,
        seed,
    };

    let result = fit(&problem, &starts)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&fit_json(&result))?);
    } else {
        let stdout = std::io::stdout();
        render_fit(&result, &mut stdout.lock())?;
    }
    Ok(())
}

fn render_screen_summary(report: &RankReport, out: &mut impl Write) -> std::io::Result<()> {
    out.write_all(report.render().as_bytes())
}

fn cmd_screen(args: ScreenArgs) -> Result<()> {
    let mut cfg = cfg_load(&args.config)?;
    let species = require(args.species.or(cfg_take(&mut cfg, "species")?), "species")?;
    let steps = require(args.steps.or(cfg_take(&mut cfg, "steps")?), "steps")?;
    let data_spec: String = require(args.data.or(cfg_take(&mut cfg, "data")?), "data")?;
    let mass = cfg_flag(&mut cfg, "mass-conserving", args.mass_conserving)?;
    let exact = cfg_flag(&mut cfg, "exact-species", args.exact_species)?;
    let db_constrained = cfg_flag(&mut cfg, "db-constrained", args.db_constrained)?;
    let criterion = args
        .criterion
        .or(cfg_take(&mut cfg, "criterion")?)
        .map(|t| Criterion::parse(&t))
        .transpose()?
        .unwrap_or(Criterion::Aic);
    let top = args.top.or(cfg_take(&mut cfg, "top")?).unwrap_or(10);
    let workers = args.workers.or(cfg_take(&mut cfg, "workers")?).unwrap_or(1);
    let cap = args.cap.or(cfg_take(&mut cfg, "cap")?).unwrap_or(1_000_000);
    let resume = cfg_flag(&mut cfg, "resume", args.resume)?;
    let output = require(args.output.or(cfg_take(&mut cfg, "output")?), "output")?;
    cfg_done(cfg)?;

    let data = resolve_data(&data_spec)?;
    let mut config = ScreenConfig::new(species, steps, output, data_spec);
    config.filter.mass_conserving = mass;
    config.filter.exact_species = exact;
    config.db_constrained = db_constrained;
    config.criterion = criterion;
    config.top_k = top;
    config.workers = workers;
    config.cap = cap;
    config.resume = resume;

    let outcome = screen(&config, &data)?;
    eprintln!(
        "{} candidates ({} reused), {} converged -> {}",
        outcome.n_candidates,
        outcome.n_reused,
        outcome.n_converged,
        config.output.display()
    );
    let report = rank_report(&outcome.records, criterion, top);
    let stdout = std::io::stdout();
    render_screen_summary(&report, &mut stdout.lock())?;
    Ok(())
}

fn cmd_rank(args: RankArgs) -> Result<()> {
    let mut cfg = cfg_load(&args.config)?;
    let input = require(args.input.or(cfg_take(&mut cfg, "input")?), "input")?;
    let criterion = args
        .criterion
        .or(cfg_take(&mut cfg, "criterion")?)
        .map(|t| Criterion::parse(&t))
        .transpose()?
        .unwrap_or(Criterion::Aic);
    let top = args.top.or(cfg_take(&mut cfg, "top")?).unwrap_or(10);
    let plots: Option<PathBuf> = args.plots.or(cfg_take(&mut cfg, "plots")?);
    cfg_done(cfg)?;

    let (meta, records) = load_results(&input)?;
    let report = rank_report(&records, criterion, top);
    let stdout = std::io::stdout();
    render_screen_summary(&report, &mut stdout.lock())?;
    if let Some(dir) = plots {
        let data = resolve_data(&meta.data)?;
        let files = write_rank_plots(&report, &records, &data, &dir, 200)?;
        eprintln!("{} plot files -> {}", files.len(), dir.display());
    }
    Ok(())
}
