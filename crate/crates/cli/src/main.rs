//! Command-line driver for the four-photon GHZ experiment simulator.
//!
//! Angles are degrees at this boundary (radians internally); every float in
//! emitted files is rounded to 12 significant digits, and any command run
//! twice with the same flags and seed produces byte-identical outputs.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 numerical
//! non-convergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use ghzsim::hardy::{self, HardySettings};
use ghzsim::noise;
use ghzsim::optics;
use ghzsim::quantum::DensityMatrix;
use ghzsim::swapping::{self, BsmConfig};
use ghzsim::tomography::{self, MleOptions};
use ghzsim::witness;
use ghzsim::{checks, Error, Result};

#[derive(Parser)]
#[command(
    name = "ghzsim",
    version,
    about = "Simulates a postselected four-photon GHZ experiment: generation, witness, tomography, swapping, and a Hardy-type nonlocality test"
)]
struct Cli {
    /// Cap the number of worker threads used by parallel sections.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a four-photon state as density-matrix JSON.
    State(StateArgs),
    /// Evaluate the GHZ witness, exactly or from simulated counts.
    Witness(WitnessArgs),
    /// Tomography: simulate a counts file or reconstruct a state from one.
    Tomo {
        #[command(subcommand)]
        command: TomoCommand,
    },
    /// Entanglement-swapping analysis from a state or from tomography counts.
    Swap(SwapArgs),
    /// Hardy-type inequality: evaluate, search settings, threshold, simulate.
    Hardy {
        #[command(subcommand)]
        command: HardyCommand,
    },
    /// Run every built-in reference check and print a pass/fail table.
    ReproducePaper,
}

/// Flags selecting and degrading the working state.
#[derive(Args, Clone)]
struct StateSelect {
    /// Base state: `ghz`, `psi-in`, or a density-matrix JSON file.
    #[arg(long, default_value = "ghz")]
    state: String,

    /// Population-error weight ε in [0, 1].
    #[arg(long = "noise-eps", default_value_t = 0.0)]
    noise_eps: f64,

    /// GHZ coherence factor λ in [0, 1].
    #[arg(long = "noise-lambda", default_value_t = 1.0)]
    noise_lambda: f64,

    /// White-noise survival probability p in [0, 1].
    #[arg(long = "noise-white", default_value_t = 1.0)]
    noise_white: f64,

    /// Relative phase between the GHZ branches, degrees.
    #[arg(long = "phase-deg", default_value_t = 0.0)]
    phase_deg: f64,
}

impl StateSelect {
    fn resolve(&self) -> Result<DensityMatrix> {
        let base = match self.state.as_str() {
            "ghz" => {
                // the pipeline applies the λ coherence damping itself
                let rho =
                    optics::generate_ghz_pipeline(self.noise_lambda, self.phase_deg.to_radians())?;
                return noise::white_noise(
                    &noise::population_noise(&rho, self.noise_eps)?,
                    self.noise_white,
                );
            }
            "psi-in" => {
                let pair = optics::epr_pair();
                pair.tensor(&pair)?.to_density_matrix()
            }
            path => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str::<DensityMatrix>(&text)?
            }
        };
        let params = noise::NoiseParams {
            epsilon_pop: self.noise_eps,
            lambda_coh: self.noise_lambda,
            p_white: self.noise_white,
        };
        noise::apply_noise(&base, &params)
    }
}

#[derive(Args)]
struct StateArgs {
    #[command(flatten)]
    select: StateSelect,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WitnessArgs {
    #[command(flatten)]
    select: StateSelect,
    /// Simulate the counting experiment instead of evaluating exactly.
    #[arg(long)]
    simulate: bool,
    /// Fourfold coincidence rate per second.
    #[arg(long, default_value_t = 0.42)]
    rate: f64,
    /// H/V-basis acquisition time, seconds.
    #[arg(long = "time-hv", default_value_t = 10_000.0)]
    time_hv: f64,
    /// Acquisition time per M_k setting, seconds.
    #[arg(long = "time-mk", default_value_t = 2_000.0)]
    time_mk: f64,
    /// Bootstrap resamples for uncertainties.
    #[arg(long, default_value_t = witness::DEFAULT_BOOTSTRAP_RESAMPLES)]
    resamples: usize,
    /// RNG seed; required when simulating.
    #[arg(long)]
    seed: Option<u64>,
    /// Report JSON output file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Counts CSV output file (simulation only).
    #[arg(long = "counts-out")]
    counts_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TomoCommand {
    /// Simulate Poissonian counts over all 3^n settings.
    Simulate(TomoSimulateArgs),
    /// Maximum-likelihood reconstruction from a counts file.
    Reconstruct(TomoReconstructArgs),
}

#[derive(Args)]
struct TomoSimulateArgs {
    #[command(flatten)]
    select: StateSelect,
    #[arg(long, default_value_t = 0.42)]
    rate: f64,
    /// Acquisition time per setting, seconds.
    #[arg(long, default_value_t = 267.0)]
    time: f64,
    /// Detector-efficiency CSV (`qubit,outcome_bit,efficiency`).
    #[arg(long)]
    efficiencies: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Counts CSV output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TomoReconstructArgs {
    /// Counts CSV input file.
    #[arg(long)]
    counts: PathBuf,
    /// Detector-efficiency CSV; when given, counts are corrected first.
    #[arg(long)]
    efficiencies: Option<PathBuf>,
    /// Convergence tolerance on the relative likelihood gain.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 5000)]
    max_iter: usize,
    /// Reconstructed density-matrix JSON output file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConfigArg {
    /// Discriminate φ⁺/φ⁻ (bare PBS).
    Phi,
    /// Discriminate ψ⁺/ψ⁻ (45° HWP in one input).
    Psi,
}

#[derive(Args)]
struct SwapArgs {
    #[command(flatten)]
    select: StateSelect,
    /// Analyze recorded tomography counts instead of a state.
    #[arg(long)]
    counts: Option<PathBuf>,
    /// Detector-efficiency CSV for the counts path.
    #[arg(long)]
    efficiencies: Option<PathBuf>,
    /// Which Bell pair the measurement discriminates (state path only).
    #[arg(long, value_enum, default_value_t = ConfigArg::Phi)]
    config: ConfigArg,
    /// Partitions with fewer counts are flagged low-statistics.
    #[arg(long = "min-counts", default_value_t = 50.0)]
    min_counts: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum HardyCommand {
    /// Evaluate the eight terms and I on a state.
    Eval(HardyEvalArgs),
    /// Search for the settings maximizing I.
    Search(HardySearchArgs),
    /// White-noise violation threshold of a settings file.
    Threshold(HardyThresholdArgs),
    /// Simulate the eight-setting counting experiment.
    Simulate(HardySimulateArgs),
}

#[derive(Args)]
struct HardyEvalArgs {
    #[command(flatten)]
    select: StateSelect,
    /// Settings JSON (`alpha1_deg`, `alpha_deg`, `beta1_deg`, `beta_deg`).
    #[arg(long)]
    settings: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HardySearchArgs {
    #[command(flatten)]
    select: StateSelect,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long)]
    seed: u64,
    /// Settings JSON output file (feeds the other hardy subcommands).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HardyThresholdArgs {
    #[arg(long)]
    settings: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HardySimulateArgs {
    #[command(flatten)]
    select: StateSelect,
    #[arg(long)]
    settings: PathBuf,
    /// Comma-separated acquisition times for the 8 settings, seconds;
    /// default 28800,28800 then 14400 for the rest.
    #[arg(long)]
    times: Option<String>,
    /// Uniform acquisition time for all settings (overrides --times).
    #[arg(long)]
    time: Option<f64>,
    #[arg(long, default_value_t = 0.42)]
    rate: f64,
    #[arg(long)]
    efficiencies: Option<PathBuf>,
    #[arg(long, default_value_t = witness::DEFAULT_BOOTSTRAP_RESAMPLES)]
    resamples: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

/// Rounds to 12 significant digits.
fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn fmt_num(x: f64) -> String {
    round_sig(x).to_string()
}

fn round_json_numbers(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(x) = n.as_f64() {
                    if let Some(rounded) = serde_json::Number::from_f64(round_sig(x)) {
                        *n = rounded;
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json_numbers),
        Value::Object(map) => map.values_mut().for_each(round_json_numbers),
        _ => {}
    }
}

/// Serializes with 12-significant-digit floats; writes to the file when
/// given, otherwise to stdout.
fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut v = serde_json::to_value(value)?;
    round_json_numbers(&mut v);
    let text = format!("{}\n", serde_json::to_string_pretty(&v)?);
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn write_json_if<T: Serialize>(value: &T, out: &Option<PathBuf>) -> Result<()> {
    if let Some(path) = out {
        emit_json(value, Some(path))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn require_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or_else(|| Error::MalformedInput {
        context: "--seed is required for stochastic commands".into(),
    })
}

fn load_settings(path: &Path) -> Result<HardySettings> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn load_efficiencies(path: &Path) -> Result<tomography::DetectorEfficiencies> {
    tomography::read_efficiencies_csv(std::fs::File::open(path)?)
}

// ---------------------------------------------------------------------------
// Command bodies
// ---------------------------------------------------------------------------

fn cmd_state(args: &StateArgs) -> Result<u8> {
    let rho = args.select.resolve()?;
    if args.out.is_some() {
        if rho.n_qubits() == 4 {
            let f = rho.fidelity(&ghzsim::ghz_state(4)?)?;
            println!("fidelity to ideal GHZ = {}", fmt_num(f));
        }
        write_json_if(&rho, &args.out)?;
    } else {
        emit_json(&rho, None)?;
    }
    Ok(0)
}

fn cmd_witness(args: &WitnessArgs) -> Result<u8> {
    let rho = args.select.resolve()?;
    if args.simulate {
        let seed = require_seed(args.seed)?;
        let sim = witness::simulate_witness_counts(
            &rho,
            args.rate,
            args.time_hv,
            args.time_mk,
            args.resamples,
            seed,
        )?;
        let unc = sim.report.uncertainties.as_ref().expect("simulated report");
        println!(
            "F = {} ± {}",
            fmt_num(sim.report.fidelity),
            fmt_num(unc.fidelity)
        );
        println!(
            "<W> = {} ± {}",
            fmt_num(sim.report.w_expect),
            fmt_num(unc.w_expect)
        );
        println!(
            "<A> = {} ± {}, Mbar = {} ± {}",
            fmt_num(sim.report.a_expect),
            fmt_num(unc.a_expect),
            fmt_num(sim.report.m_bar),
            fmt_num(unc.m_bar)
        );
        write_json_if(&sim.report, &args.out)?;
        if let Some(path) = &args.counts_out {
            witness::write_witness_counts_csv(&sim, std::fs::File::create(path)?)?;
            println!("wrote {}", path.display());
        }
    } else {
        let report = witness::evaluate_witness(&rho)?;
        println!("F = {}", fmt_num(report.fidelity));
        println!("<W> = {}", fmt_num(report.w_expect));
        println!(
            "<A> = {}, Mbar = {}",
            fmt_num(report.a_expect),
            fmt_num(report.m_bar)
        );
        write_json_if(&report, &args.out)?;
    }
    Ok(0)
}

fn cmd_tomo_simulate(args: &TomoSimulateArgs) -> Result<u8> {
    let rho = args.select.resolve()?;
    let settings = tomography::generate_settings(rho.n_qubits());
    let efficiencies = args
        .efficiencies
        .as_deref()
        .map(load_efficiencies)
        .transpose()?;
    let dataset = tomography::simulate_counts(
        &rho,
        &settings,
        args.rate,
        args.time,
        efficiencies.as_ref(),
        args.seed,
    )?;
    tomography::write_counts_csv(&dataset, std::fs::File::create(&args.out)?)?;
    println!(
        "simulated {} settings, {} events; wrote {}",
        settings.len(),
        dataset.total_counts(),
        args.out.display()
    );
    Ok(0)
}

fn cmd_tomo_reconstruct(args: &TomoReconstructArgs) -> Result<u8> {
    let mut dataset = tomography::read_counts_csv(std::fs::File::open(&args.counts)?)?;
    if let Some(path) = &args.efficiencies {
        dataset.efficiencies = Some(load_efficiencies(path)?);
        dataset = tomography::efficiency_correct(&dataset)?;
    }
    let result = tomography::mle_reconstruct(
        &dataset,
        &MleOptions {
            tol: args.tol,
            max_iter: args.max_iter,
            ..Default::default()
        },
    )?;
    println!(
        "iterations = {}, log-likelihood = {}, converged = {}",
        result.iterations,
        fmt_num(result.log_likelihood),
        result.converged
    );
    if result.rho.n_qubits() >= 2 {
        let f = result
            .rho
            .fidelity(&ghzsim::ghz_state(result.rho.n_qubits())?)?;
        println!("fidelity to ideal GHZ = {}", fmt_num(f));
    }
    let mut v = serde_json::to_value(&result.rho)?;
    v.as_object_mut().expect("object").insert(
        "metadata".into(),
        json!({
            "iterations": result.iterations,
            "log_likelihood": result.log_likelihood,
            "converged": result.converged,
        }),
    );
    round_json_numbers(&mut v);
    if let Some(path) = &args.out {
        std::fs::write(path, format!("{}\n", serde_json::to_string_pretty(&v)?))?;
        println!("wrote {}", path.display());
    }
    if !result.converged {
        eprintln!("warning: reconstruction did not converge");
        return Ok(2);
    }
    Ok(0)
}

fn print_swap_report(report: &swapping::SwapReport) {
    for outcome in &report.outcomes {
        println!(
            "{}: probability = {}, fidelity = {}{}",
            outcome.bell.label(),
            fmt_num(outcome.probability),
            fmt_num(outcome.fidelity),
            if outcome.low_statistics {
                " (low statistics)"
            } else {
                ""
            }
        );
    }
    match report.average_fidelity {
        Some(avg) => println!("average fidelity = {}", fmt_num(avg)),
        None => println!("no discriminated outcome fired"),
    }
}

fn cmd_swap(args: &SwapArgs) -> Result<u8> {
    let report = if let Some(counts) = &args.counts {
        if matches!(args.config, ConfigArg::Psi) {
            return Err(Error::MalformedInput {
                context: "tomography counts discriminate the phi pair; --config psi \
                          applies to the state path only"
                    .into(),
            });
        }
        let mut dataset = tomography::read_counts_csv(std::fs::File::open(counts)?)?;
        if let Some(path) = &args.efficiencies {
            dataset.efficiencies = Some(load_efficiencies(path)?);
        }
        swapping::swap_from_tomography(
            &dataset,
            &swapping::SwapTomographyOptions {
                min_counts: args.min_counts,
                ..Default::default()
            },
        )?
    } else {
        let rho = args.select.resolve()?;
        let config = match args.config {
            ConfigArg::Phi => BsmConfig::PhiPair,
            ConfigArg::Psi => BsmConfig::PsiPair,
        };
        swapping::swap_analyze(&rho, config)?
    };
    print_swap_report(&report);
    write_json_if(&report, &args.out)?;
    Ok(0)
}

fn cmd_hardy_eval(args: &HardyEvalArgs) -> Result<u8> {
    let rho = args.select.resolve()?;
    let settings = load_settings(&args.settings)?;
    let result = hardy::hardy_evaluate(&rho, &settings)?;
    for (label, value) in hardy::TERM_LABELS.iter().zip(&result.terms) {
        println!("<{label}> = {}", fmt_num(*value));
    }
    println!("I = {}", fmt_num(result.i_value));
    if let Some(path) = &args.out {
        let rows: Vec<Value> = hardy::TERM_LABELS
            .iter()
            .zip(&result.terms)
            .map(|(label, value)| json!({"label": label, "value": value}))
            .collect();
        let mut v = json!({
            "settings": serde_json::to_value(settings)?,
            "terms": rows,
            "i_value": result.i_value,
        });
        round_json_numbers(&mut v);
        std::fs::write(path, format!("{}\n", serde_json::to_string_pretty(&v)?))?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn cmd_hardy_search(args: &HardySearchArgs) -> Result<u8> {
    let rho = args.select.resolve()?;
    let (settings, i_star) = hardy::search_settings(&rho, args.restarts, args.seed)?;
    let deg = settings.to_degrees();
    println!(
        "alpha1 = {}°, alpha = {}°, beta1 = {}°, beta = {}°",
        fmt_num(deg[0]),
        fmt_num(deg[1]),
        fmt_num(deg[2]),
        fmt_num(deg[3])
    );
    println!("I* = {}", fmt_num(i_star));
    write_json_if(&settings, &args.out)?;
    Ok(0)
}

fn cmd_hardy_threshold(args: &HardyThresholdArgs) -> Result<u8> {
    let settings = load_settings(&args.settings)?;
    let (p_star, fidelity_star) = hardy::white_noise_threshold(&settings)?;
    println!("p* = {}", fmt_num(p_star));
    println!("fidelity* = {}", fmt_num(fidelity_star));
    write_json_if(
        &json!({"p_star": p_star, "fidelity_star": fidelity_star}),
        &args.out,
    )?;
    Ok(0)
}

fn parse_times(args: &HardySimulateArgs) -> Result<[f64; 8]> {
    if let Some(t) = args.time {
        return Ok([t; 8]);
    }
    match &args.times {
        None => Ok(checks::HARDY_TIMES_S),
        Some(spec) => {
            let parts: Vec<f64> = spec
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| Error::MalformedInput {
                        context: format!("bad time '{s}' in --times"),
                    })
                })
                .collect::<Result<_>>()?;
            let arr: [f64; 8] = parts
                .try_into()
                .map_err(|v: Vec<f64>| Error::MalformedInput {
                    context: format!("--times needs 8 values, got {}", v.len()),
                })?;
            Ok(arr)
        }
    }
}

fn cmd_hardy_simulate(args: &HardySimulateArgs) -> Result<u8> {
    let rho = args.select.resolve()?;
    let settings = load_settings(&args.settings)?;
    let times = parse_times(args)?;
    let efficiencies = args
        .efficiencies
        .as_deref()
        .map(load_efficiencies)
        .transpose()?;
    let exact = hardy::hardy_evaluate(&rho, &settings)?;
    let sim = hardy::simulate_hardy_counts(
        &rho,
        &settings,
        &times,
        args.rate,
        efficiencies.as_ref(),
        args.resamples,
        args.seed,
    )?;
    let unc = sim.result.uncertainties.as_ref().expect("simulated result");
    for (t, label) in hardy::TERM_LABELS.iter().enumerate() {
        println!(
            "<{label}>: theory = {}, estimate = {} ± {}",
            fmt_num(exact.terms[t]),
            fmt_num(sim.result.terms[t]),
            fmt_num(unc.term_sigmas[t])
        );
    }
    println!(
        "I: theory = {}, estimate = {} ± {} ({}σ)",
        fmt_num(exact.i_value),
        fmt_num(sim.result.i_value),
        fmt_num(unc.i_sigma),
        fmt_num(unc.significance)
    );
    if let Some(path) = &args.out {
        let rows: Vec<Value> = hardy::TERM_LABELS
            .iter()
            .enumerate()
            .map(|(t, label)| {
                json!({
                    "label": label,
                    "theory": exact.terms[t],
                    "estimate": sim.result.terms[t],
                    "sigma": unc.term_sigmas[t],
                })
            })
            .collect();
        let mut v = json!({
            "settings": serde_json::to_value(settings)?,
            "terms": rows,
            "i": {
                "theory": exact.i_value,
                "estimate": sim.result.i_value,
                "sigma": unc.i_sigma,
                "significance": unc.significance,
            },
        });
        round_json_numbers(&mut v);
        std::fs::write(path, format!("{}\n", serde_json::to_string_pretty(&v)?))?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn cmd_reproduce_paper() -> Result<u8> {
    let outcomes = checks::run_all();
    for outcome in &outcomes {
        println!("{}", outcome.line());
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!(
        "{}/{} checks passed",
        outcomes.len() - failed,
        outcomes.len()
    );
    Ok(if failed == 0 { 0 } else { 1 })
}

fn run(cli: &Cli) -> Result<u8> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::NonPositive {
                name: "threads",
                value: 0.0,
            });
        }
        // ignore the error if a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match &cli.command {
        Command::State(args) => cmd_state(args),
        Command::Witness(args) => cmd_witness(args),
        Command::Tomo { command } => match command {
            TomoCommand::Simulate(args) => cmd_tomo_simulate(args),
            TomoCommand::Reconstruct(args) => cmd_tomo_reconstruct(args),
        },
        Command::Swap(args) => cmd_swap(args),
        Command::Hardy { command } => match command {
            HardyCommand::Eval(args) => cmd_hardy_eval(args),
            HardyCommand::Search(args) => cmd_hardy_search(args),
            HardyCommand::Threshold(args) => cmd_hardy_threshold(args),
            HardyCommand::Simulate(args) => cmd_hardy_simulate(args),
        },
        Command::ReproducePaper => cmd_reproduce_paper(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // usage and version requests are not errors
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
