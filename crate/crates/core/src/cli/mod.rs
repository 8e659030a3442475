//! Command-line front end.
//!
//! Every command resolves its settings into a [`RunConfig`], which is embedded
//! in each CSV as a `# config:` line and in each JSON report as `config`.

pub mod verify;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::closedforms::{analytic_value, parse_params, ClosedForm, Family, Identity};
use crate::divergence::{run_witness, write_slope_csv, Functional, SlopeEstimate, Witness};
use crate::error::Error;
use crate::flow::{flow_run, relative_l1, write_history_csv, write_profile_csv as write_flow_profile, FlowConfig};
use crate::functionals::{
    entropy, free_energy, g_functional, interaction, j_functional, kinetic, log_moment, potential_moment,
    schrodinger_energy, FreeEnergyParams, SchrodingerParams,
};
use crate::groundstate::{
    gaussian_trial, minimize, write_profile_csv as write_wave_profile, MinimizeOptions,
};
use crate::grids::{GridSpec, Grading};
use crate::inequalities::{scan_phase_diagram, write_phase_csv, Diagram, PhaseCell, Region, SweepRange};
use verify::{run_suite, Suite, VerifySettings};

/// Environment variable holding the default grid profile, e.g. `N=4096,rmax=200,grading=geometric`.
pub const GRID_ENV: &str = "LOGLAB_GRID";

#[derive(Debug, Parser)]
#[command(name = "loglab", version, about = "Logarithmic free energies and Schrödinger–Poisson energies in the plane")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// grid profile `N=..,rmax=..,grading=..`
    #[arg(long = "grid", env = GRID_ENV, global = true, value_name = "PROFILE")]
    pub grid_profile: Option<String>,
    /// number of radial nodes
    #[arg(long = "grid.N", global = true, value_name = "N")]
    pub grid_n: Option<usize>,
    /// outer radius of the grid
    #[arg(long = "grid.rmax", global = true, value_name = "R")]
    pub grid_rmax: Option<f64>,
    /// uniform or geometric
    #[arg(long = "grid.grading", global = true, value_name = "GRADING")]
    pub grid_grading: Option<Grading>,
    /// seed of randomized corpora
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// write a matplotlib script that plots the CSV outputs
    #[arg(long, global = true, value_name = "PATH")]
    pub plot: Option<PathBuf>,
    /// more log output (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    #[serde(skip)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a functional on a closed-form density, or an analytic identity
    Eval(EvalArgs),
    /// Run verification suites
    Verify(VerifyArgs),
    /// Label a phase diagram
    Phase(PhaseArgs),
    /// Measure the divergence rate of a test-function family
    Diverge(DivergeArgs),
    /// Run the Wasserstein gradient flow of the free energy
    Flow(FlowArgs),
    /// Minimize the Schrödinger energy at fixed mass
    Minimize(MinimizeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalFunctional {
    FreeEnergy,
    Entropy,
    PotentialMoment,
    LogMoment,
    Interaction,
    G,
    J,
    Kinetic,
    Schrodinger,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub functional: Option<EvalFunctional>,
    /// closed-form density, e.g. `rho-eta:eta=3` or `k-minimizer:a=0.5,lambda=1`
    #[arg(long)]
    pub density: Option<String>,
    #[arg(long = "M", default_value_t = 1.0)]
    pub mass: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    /// analytic quantity `id[:key=value,...]`, e.g. `k-constant:a=0.5`
    #[arg(long)]
    pub identity: Option<String>,
    /// fail (exit 1) unless the value is within `--tol` of this
    #[arg(long, allow_hyphen_values = true)]
    pub expect: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// also write the JSON report here
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    pub suite: Suite,
    /// full JSON report with every check
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// size of the random corpus of the inequalities suite
    #[arg(long, default_value_t = 24)]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    FreeEnergy,
    Schrodinger,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PhaseArgs {
    #[arg(long, value_enum, default_value_t = Which::FreeEnergy)]
    pub which: Which,
    /// `start:stop:step` for `a`
    #[arg(long, allow_hyphen_values = true, default_value = "-1:3:0.05")]
    pub a: String,
    /// `start:stop:step` for `b`
    #[arg(long, allow_hyphen_values = true, default_value = "-3:3:0.05")]
    pub b: String,
    /// `start:stop:step` for `γ`
    #[arg(long, allow_hyphen_values = true, default_value = "-2:3:0.05")]
    pub gamma: String,
    /// `start:stop:step` for `Mβ`
    #[arg(long, allow_hyphen_values = true, default_value = "-3:4:0.05")]
    pub mbeta: String,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long = "M", default_value_t = 1.0)]
    pub mass: f64,
    /// measure the witness slope on this many randomly chosen unbounded cells
    #[arg(long, default_value_t = 0)]
    pub confirm: usize,
    /// CSV output; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyChoice {
    Translate,
    ScaleUp,
    ScaleDown,
    WaveScale,
    TwoBubble,
    Lattice,
    ZetaLimit,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DivergeArgs {
    #[arg(long, value_enum, conflicts_with = "auto")]
    pub family: Option<FamilyChoice>,
    /// pick the witness attached to the parameters
    #[arg(long)]
    pub auto: bool,
    /// bubble fraction of the two-bubble family
    #[arg(long, default_value_t = 0.3)]
    pub eps: f64,
    /// bump radius exponent of the lattice family
    #[arg(long = "a-exp", default_value_t = 4.0)]
    pub a_exp: f64,
    #[arg(long, value_enum, default_value_t = Which::FreeEnergy)]
    pub energy: Which,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub a: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub b: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long = "M", default_value_t = 1.0)]
    pub mass: f64,
    /// CSV of energy against log of the family parameter
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FlowArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub b: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long = "M", allow_hyphen_values = true, default_value_t = 1.0)]
    pub mass: f64,
    /// initial density
    #[arg(long, default_value = "gaussian")]
    pub init: String,
    /// time step; 0.8 of the stability bound when absent
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// steady-state threshold on the relative dissipation
    #[arg(long)]
    pub stop: Option<f64>,
    #[arg(long = "record-every")]
    pub record_every: Option<usize>,
    /// CSV history `time,F,dissipation,mass`
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV of the final density
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MinimizeArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: f64,
    #[arg(long = "M", default_value_t = 1.0)]
    pub mass: f64,
    /// number of nodes; overrides the grid profile
    #[arg(long)]
    pub n: Option<usize>,
    /// outer radius; overrides the grid profile
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub step: Option<f64>,
    /// run where boundedness is undecided
    #[arg(long = "allow-unknown")]
    pub allow_unknown: bool,
    /// full JSON report including the profile and the energy trace
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV `r,u`
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub parameters: serde_json::Value,
    pub grid: GridSpec,
    pub outputs: Vec<PathBuf>,
    pub seed: u64,
    pub version: String,
}

impl RunConfig {
    fn new(command: &str, parameters: &impl Serialize, grid: GridSpec, outputs: Vec<PathBuf>, seed: u64) -> Self {
        RunConfig {
            command: command.into(),
            parameters: serde_json::to_value(parameters).unwrap_or(serde_json::Value::Null),
            grid,
            outputs,
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    /// One-line JSON for CSV headers.
    pub fn header(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

/// How a command ended.
#[derive(Debug)]
pub enum Failure {
    /// a check did not pass, a run did not converge or a divergence was not confirmed
    Failed(String),
    /// bad arguments or parameters outside the admissible set
    Invalid(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Failed(_) => 1,
            Failure::Invalid(_) => 2,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Unstable(_) => Failure::Failed(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Invalid(format!("i/o: {e}"))
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Failed(m) => eprintln!("FAILED: {m}"),
                Failure::Invalid(m) => eprintln!("error: {m}"),
            }
            f.code()
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult {
    let g = &cli.global;
    match &cli.command {
        Command::Eval(a) => cmd_eval(g, a),
        Command::Verify(a) => cmd_verify(g, a),
        Command::Phase(a) => cmd_phase(g, a),
        Command::Diverge(a) => cmd_diverge(g, a),
        Command::Flow(a) => cmd_flow(g, a),
        Command::Minimize(a) => cmd_minimize(g, a),
    }
}

/// Parse a grid profile `N=..,rmax=..,grading=..` on top of `base`.
pub fn parse_grid_profile(s: &str, base: GridSpec) -> crate::Result<GridSpec> {
    let mut g = base;
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Parameter(format!("grid profile entries are key=value, got `{item}`")))?;
        let bad = || Error::Parameter(format!("bad value `{v}` for grid key `{k}`"));
        match k.trim() {
            "N" | "n" => g.n = v.trim().parse().map_err(|_| bad())?,
            "rmax" | "R" => g.r_max = v.trim().parse().map_err(|_| bad())?,
            "grading" => g.grading = v.trim().parse()?,
            other => return Err(Error::Parameter(format!("unknown grid key `{other}`"))),
        }
    }
    Ok(g)
}

impl GlobalArgs {
    /// Command default, then the profile, then the individual flags.
    pub fn grid(&self, default: GridSpec) -> crate::Result<GridSpec> {
        let mut g = match &self.grid_profile {
            Some(p) => parse_grid_profile(p, default)?,
            None => default,
        };
        if let Some(n) = self.grid_n {
            g.n = n;
        }
        if let Some(r) = self.grid_rmax {
            g.r_max = r;
        }
        if let Some(gr) = self.grid_grading {
            g.grading = gr;
        }
        Ok(g)
    }
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &serde_json::Value) -> io::Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()
}

fn print_json(value: &serde_json::Value) -> io::Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)
}

fn outputs(paths: &[&Option<PathBuf>]) -> Vec<PathBuf> {
    paths.iter().filter_map(|p| (*p).clone()).collect()
}

fn need(v: Option<f64>, flag: &str, what: &str) -> std::result::Result<f64, Failure> {
    v.ok_or_else(|| Failure::Invalid(format!("{what} needs --{flag}")))
}

fn cmd_eval(g: &GlobalArgs, a: &EvalArgs) -> CliResult {
    let grid_spec = g.grid(GridSpec::default())?;
    let config = RunConfig::new("eval", a, grid_spec, outputs(&[&a.json]), g.seed);
    let mut report = json!({ "config": config });
    let value = match (a.functional, &a.identity) {
        (Some(f), _) => {
            let spec = a
                .density
                .as_deref()
                .ok_or_else(|| Failure::Invalid("--functional needs --density".into()))?;
            let family: Family = spec.parse()?;
            let form = ClosedForm::new(family, a.mass)?;
            let grid = grid_spec.build()?;
            let v = eval_functional(f, &form, &grid, a)?;
            report["functional"] = json!(f);
            report["density"] = json!(family);
            if let Some(id) = &a.identity {
                report["analytic"] = json!(eval_identity(id, a.mass)?);
            }
            v
        }
        (None, Some(id)) => eval_identity(id, a.mass)?,
        (None, None) => return Err(Failure::Invalid("eval needs --functional or --identity".into())),
    };
    report["value"] = json!(value);
    let pass = a.expect.map(|e| (value - e).abs() <= a.tol);
    if let Some(e) = a.expect {
        report["expected"] = json!(e);
        report["tolerance"] = json!(a.tol);
        report["pass"] = json!(pass);
    }
    print_json(&report)?;
    if let Some(p) = &a.json {
        write_json(p, &report)?;
    }
    match (pass, a.expect) {
        (Some(false), Some(e)) => Err(Failure::Failed(format!("value {value} is not within {} of {e}", a.tol))),
        _ => Ok(()),
    }
}

fn eval_functional(
    f: EvalFunctional,
    form: &ClosedForm,
    grid: &crate::grids::RadialGrid,
    a: &EvalArgs,
) -> std::result::Result<f64, Failure> {
    let m = a.mass;
    if matches!(f, EvalFunctional::Kinetic | EvalFunctional::Schrodinger) {
        let u = form.wave(grid)?;
        return Ok(match f {
            EvalFunctional::Kinetic => kinetic(&u),
            _ => {
                let what = "the Schrödinger energy";
                let p = SchrodingerParams::new(
                    need(a.alpha, "alpha", what)?,
                    need(a.beta, "beta", what)?,
                    need(a.gamma, "gamma", what)?,
                    m,
                )?;
                schrodinger_energy(&u, &p)?
            }
        });
    }
    let rho = form.density(grid)?;
    Ok(match f {
        EvalFunctional::FreeEnergy => {
            let what = "the free energy";
            let p = FreeEnergyParams::with_entropy(need(a.a, "a", what)?, need(a.b, "b", what)?, a.c, m)?;
            free_energy(&rho, &p)?
        }
        EvalFunctional::Entropy => entropy(&rho, m)?,
        EvalFunctional::PotentialMoment => potential_moment(&rho),
        EvalFunctional::LogMoment => log_moment(&rho)?,
        EvalFunctional::Interaction => interaction(&rho),
        EvalFunctional::G => g_functional(&rho, need(a.a, "a", "G_a")?)?,
        EvalFunctional::J => j_functional(&rho, need(a.eta, "eta", "J_η")?)?,
        EvalFunctional::Kinetic | EvalFunctional::Schrodinger => unreachable!(),
    })
}

fn eval_identity(spec: &str, mass: f64) -> std::result::Result<f64, Failure> {
    let (id, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut params = parse_params(rest)?;
    params.entry("M".into()).or_insert(mass);
    Ok(analytic_value(Identity::parse(id, &params)?)?)
}

fn cmd_verify(g: &GlobalArgs, a: &VerifyArgs) -> CliResult {
    let grid = g.grid(GridSpec::default())?;
    let config = RunConfig::new("verify", a, grid, outputs(&[&a.report]), g.seed);
    let settings = VerifySettings { grid, seed: g.seed, samples: a.samples };
    let checks = run_suite(a.suite, &settings)?;
    let failures: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
    for c in &failures {
        eprintln!(
            "[{}] {}: value {} vs {} breaks tolerance {:e} (error {:e})",
            c.suite, c.name, c.value, c.expected, c.tolerance, c.error
        );
    }
    let pass = failures.is_empty();
    let summary = json!({
        "config": config,
        "suite": a.suite,
        "checks": checks.len(),
        "failed": failures.len(),
        "pass": pass,
        "failures": failures,
    });
    print_json(&summary)?;
    if let Some(p) = &a.report {
        write_json(p, &json!({ "config": config, "suite": a.suite, "pass": pass, "checks": checks }))?;
    }
    if pass {
        Ok(())
    } else {
        Err(Failure::Failed(format!("{} of {} checks failed", failures.len(), checks.len())))
    }
}

/// Functional attached to a phase-diagram cell.
pub fn cell_functional(which: Diagram, cell: &PhaseCell) -> crate::Result<Functional> {
    Ok(match which {
        Diagram::FreeEnergy => Functional::FreeEnergy(FreeEnergyParams::new(cell.x, cell.y, 1.0)?),
        Diagram::Schrodinger { alpha, mass } => {
            Functional::Schrodinger(SchrodingerParams::new(alpha, cell.y / mass, cell.x, mass)?)
        }
    })
}

/// Measure the witness of `count` unbounded cells drawn with `seed`.
pub fn confirm_unbounded(
    which: Diagram,
    cells: &[PhaseCell],
    count: usize,
    seed: u64,
) -> crate::Result<Vec<(PhaseCell, Option<SlopeEstimate>)>> {
    let unbounded: Vec<&PhaseCell> = cells.iter().filter(|c| c.label.region == Region::Unbounded).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = sample_indices(&mut rng, unbounded.len(), count.min(unbounded.len())).into_vec();
    picks.sort_unstable();
    picks
        .par_iter()
        .map(|&i| {
            let cell = *unbounded[i];
            let est = match cell.label.witness {
                Some(w) => Some(run_witness(w, &cell_functional(which, &cell)?)?),
                None => None,
            };
            Ok((cell, est))
        })
        .collect()
}

fn cmd_phase(g: &GlobalArgs, a: &PhaseArgs) -> CliResult {
    let grid = g.grid(GridSpec::default())?;
    let config = RunConfig::new("phase", a, grid, outputs(&[&a.out]), g.seed);
    let (which, xs, ys) = match a.which {
        Which::FreeEnergy => (Diagram::FreeEnergy, a.a.parse::<SweepRange>()?, a.b.parse::<SweepRange>()?),
        Which::Schrodinger => (
            Diagram::Schrodinger { alpha: a.alpha, mass: a.mass },
            a.gamma.parse::<SweepRange>()?,
            a.mbeta.parse::<SweepRange>()?,
        ),
    };
    let cells = scan_phase_diagram(which, &xs, &ys)?;
    let header = config.header();
    match &a.out {
        Some(p) => {
            let mut f = create(p)?;
            write_phase_csv(&mut f, which, &cells, &header)?;
            f.flush()?;
        }
        None => write_phase_csv(&mut io::stdout().lock(), which, &cells, &header)?,
    }
    let count = |r: Region| cells.iter().filter(|c| c.label.region == r).count();
    let confirmed = confirm_unbounded(which, &cells, a.confirm, g.seed)?;
    let unconfirmed: Vec<String> = confirmed
        .iter()
        .filter(|(_, e)| !e.as_ref().is_some_and(|e| e.rate < 0.0))
        .map(|(c, _)| format!("({}, {})", c.x, c.y))
        .collect();
    if a.out.is_some() {
        let samples: Vec<_> = confirmed
            .iter()
            .map(|(c, e)| {
                json!({
                    "x": c.x, "y": c.y,
                    "witness": c.label.witness.map(|w| w.to_string()),
                    "rate": e.as_ref().map(|e| e.rate),
                    "analytic_slope": e.as_ref().and_then(|e| e.analytic_slope),
                })
            })
            .collect();
        print_json(&json!({
            "config": config,
            "cells": cells.len(),
            "bounded": count(Region::Bounded),
            "unbounded": count(Region::Unbounded),
            "unknown": count(Region::Unknown),
            "confirmed": samples,
        }))?;
    }
    if let Some(p) = &g.plot {
        write_plot(p, &phase_plot(a.out.as_deref(), a.which))?;
    }
    if unconfirmed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Failed(format!("no divergence confirmed at {}", unconfirmed.join(", "))))
    }
}

fn cmd_diverge(g: &GlobalArgs, a: &DivergeArgs) -> CliResult {
    let grid = g.grid(GridSpec::default())?;
    let config = RunConfig::new("diverge", a, grid, outputs(&[&a.out, &a.json]), g.seed);
    let functional = match a.energy {
        Which::FreeEnergy => Functional::FreeEnergy(FreeEnergyParams::with_entropy(a.a, a.b, a.c, a.mass)?),
        Which::Schrodinger => Functional::Schrodinger(SchrodingerParams::new(a.alpha, a.beta, a.gamma, a.mass)?),
    };
    let witness = match (a.family, a.auto) {
        (Some(f), _) => match f {
            FamilyChoice::Translate => Witness::Translate,
            FamilyChoice::ScaleUp => Witness::ScaleUp,
            FamilyChoice::ScaleDown => Witness::ScaleDown,
            FamilyChoice::WaveScale => Witness::WaveScale,
            FamilyChoice::TwoBubble => Witness::TwoBubble { eps: a.eps },
            FamilyChoice::Lattice => Witness::Lattice { a_exp: a.a_exp },
            FamilyChoice::ZetaLimit => Witness::ZetaLimit,
        },
        (None, true) => functional
            .witness()
            .ok_or_else(|| Failure::Invalid("no divergence witness is attached to these parameters".into()))?,
        (None, false) => return Err(Failure::Invalid("diverge needs --family or --auto".into())),
    };
    let est = run_witness(witness, &functional)?;
    let report = json!({ "config": config, "witness": witness.to_string(), "estimate": est });
    print_json(&report)?;
    if let Some(p) = &a.json {
        write_json(p, &report)?;
    }
    if let Some(p) = &a.out {
        let mut f = create(p)?;
        write_slope_csv(&mut f, &est, &config.header())?;
        f.flush()?;
    }
    if let Some(p) = &g.plot {
        write_plot(p, &diverge_plot(a.out.as_deref()))?;
    }
    if est.divergence_confirmed {
        Ok(())
    } else {
        Err(Failure::Failed(format!(
            "{witness}: rate {} with analytic slope {:?} does not confirm divergence",
            est.rate, est.analytic_slope
        )))
    }
}

/// Default grid of the flow: uniform, 601 nodes on `[0, 60]`.
pub const FLOW_GRID: GridSpec = GridSpec { n: 601, r_max: 60.0, grading: Grading::Uniform };

fn cmd_flow(g: &GlobalArgs, a: &FlowArgs) -> CliResult {
    let spec = g.grid(FLOW_GRID)?;
    let config = RunConfig::new("flow", a, spec, outputs(&[&a.out, &a.profile, &a.json]), g.seed);
    let params = FreeEnergyParams::with_entropy(a.a, a.b, a.c, a.mass)?;
    let mut fc = FlowConfig::on_grid(params, spec.build()?)?;
    if let Some(dt) = a.dt {
        fc.dt = dt;
    }
    if let Some(s) = a.steps {
        fc.steps = s;
    }
    if let Some(s) = a.stop {
        fc.stop = s;
    }
    if let Some(r) = a.record_every {
        fc.record_every = r;
    }
    let init: Family = a.init.parse()?;
    let rho0 = ClosedForm::new(init, a.mass)?.density(&fc.grid)?;
    let state = flow_run(&fc, &rho0)?;
    let first = state.history.first().map_or(a.mass, |h| h.mass);
    let mass = state.mass();
    let mut report = json!({
        "config": config,
        "dt": fc.dt,
        "steps": state.steps,
        "time": state.time,
        "converged": state.converged,
        "free_energy": state.free_energy(&params),
        "initial_free_energy": state.history.first().map(|h| h.free_energy),
        "mass": mass,
        "relative_mass_drift": (mass - first).abs() / first,
    });
    // without interaction the minimizer is the ρ_η with η = a/c
    if a.b == 0.0 && a.a / a.c > 1.0 {
        let eta = a.a / a.c;
        let form = ClosedForm::new(Family::RhoEta { eta }, a.mass)?;
        report["reference"] = json!({
            "density": Family::RhoEta { eta },
            "free_energy": a.c * a.mass * ((eta - 1.0) / std::f64::consts::PI).ln(),
            "relative_l1": relative_l1(&state.density, |r| form.evaluate(r)),
        });
    }
    print_json(&report)?;
    if let Some(p) = &a.json {
        write_json(p, &report)?;
    }
    let header = config.header();
    if let Some(p) = &a.out {
        let mut f = create(p)?;
        write_history_csv(&mut f, &state, &header)?;
        f.flush()?;
    }
    if let Some(p) = &a.profile {
        let mut f = create(p)?;
        write_flow_profile(&mut f, &state, &header)?;
        f.flush()?;
    }
    if let Some(p) = &g.plot {
        write_plot(p, &flow_plot(a.out.as_deref(), a.profile.as_deref()))?;
    }
    if state.converged {
        Ok(())
    } else {
        Err(Failure::Failed(format!("no steady state after {} steps", state.steps)))
    }
}

fn cmd_minimize(g: &GlobalArgs, a: &MinimizeArgs) -> CliResult {
    let mut opts = MinimizeOptions::default();
    let mut spec = g.grid(opts.grid)?;
    if let Some(n) = a.n {
        spec.n = n;
    }
    if let Some(r) = a.rmax {
        spec.r_max = r;
    }
    opts.grid = spec;
    if let Some(t) = a.tol {
        opts.tolerance = t;
    }
    if let Some(m) = a.max_iter {
        opts.max_iterations = m;
    }
    if let Some(s) = a.step {
        opts.step = s;
    }
    opts.allow_unknown = a.allow_unknown;
    let config = RunConfig::new("minimize", a, spec, outputs(&[&a.out, &a.profile]), g.seed);
    let p = SchrodingerParams::new(a.alpha, a.beta, a.gamma, a.mass)?;
    let rep = minimize(&p, &opts)?;
    let trial = schrodinger_energy(&gaussian_trial(&spec.build()?, a.mass)?, &p)?;
    let summary = json!({
        "config": config,
        "energy": rep.energy,
        "energy_quadrature": rep.energy_quadrature,
        "gaussian_trial_energy": trial,
        "theta": rep.theta,
        "residual": rep.residual,
        "iterations": rep.iterations,
        "converged": rep.converged,
        "mass": rep.mass,
    });
    print_json(&summary)?;
    if let Some(path) = &a.out {
        write_json(path, &json!({ "config": config, "gaussian_trial_energy": trial, "report": rep }))?;
    }
    if let Some(path) = &a.profile {
        let mut f = create(path)?;
        write_wave_profile(&mut f, &rep, &config.header())?;
        f.flush()?;
    }
    if let Some(path) = &g.plot {
        write_plot(path, &minimize_plot(a.profile.as_deref()))?;
    }
    if rep.converged {
        Ok(())
    } else {
        Err(Failure::Failed(format!(
            "residual {} after {} iterations is above the tolerance {}",
            rep.residual, rep.iterations, opts.tolerance
        )))
    }
}

fn write_plot(path: &Path, script: &str) -> io::Result<()> {
    let mut f = create(path)?;
    f.write_all(script.as_bytes())?;
    f.flush()
}

fn csv_or_stdin(p: Option<&Path>) -> String {
    match p {
        Some(p) => format!("{:?}", p.display().to_string()),
        None => "sys.argv[1]".into(),
    }
}

const PLOT_PRELUDE: &str = "import sys\nimport pandas as pd\nimport matplotlib.pyplot as plt\n\n";

fn phase_plot(csv: Option<&Path>, which: Which) -> String {
    let (x, y) = match which {
        Which::FreeEnergy => ("a", "b"),
        Which::Schrodinger => ("gamma", "mbeta"),
    };
    format!(
        "{PLOT_PRELUDE}df = pd.read_csv({}, comment=\"#\")\n\
colors = {{\"bounded\": \"tab:blue\", \"unbounded\": \"tab:red\", \"unknown\": \"lightgrey\"}}\n\
fig, ax = plt.subplots(figsize=(6, 5))\n\
for label, part in df.groupby(\"label\"):\n    ax.scatter(part[\"{x}\"], part[\"{y}\"], s=4, c=colors[label], label=label)\n\
ax.set_xlabel(\"{x}\")\nax.set_ylabel(\"{y}\")\nax.legend()\nfig.savefig(\"phase.png\", dpi=150)\n",
        csv_or_stdin(csv)
    )
}

fn diverge_plot(csv: Option<&Path>) -> String {
    format!(
        "{PLOT_PRELUDE}df = pd.read_csv({}, comment=\"#\")\n\
fig, ax = plt.subplots()\nax.plot(df[\"log_param\"], df[\"energy\"], \"o-\")\n\
ax.set_xlabel(\"log parameter\")\nax.set_ylabel(\"energy\")\nfig.savefig(\"diverge.png\", dpi=150)\n",
        csv_or_stdin(csv)
    )
}

fn flow_plot(history: Option<&Path>, profile: Option<&Path>) -> String {
    let mut s = format!(
        "{PLOT_PRELUDE}h = pd.read_csv({}, comment=\"#\")\n\
fig, ax = plt.subplots()\nax.plot(h[\"time\"], h[\"F\"])\nax.set_xscale(\"log\")\n\
ax.set_xlabel(\"t\")\nax.set_ylabel(\"F\")\nfig.savefig(\"flow_energy.png\", dpi=150)\n",
        csv_or_stdin(history)
    );
    if let Some(p) = profile {
        s.push_str(&format!(
            "p = pd.read_csv({:?}, comment=\"#\")\nfig, ax = plt.subplots()\nax.loglog(p[\"r\"][1:], p[\"rho\"][1:])\n\
ax.set_xlabel(\"r\")\nax.set_ylabel(\"rho\")\nfig.savefig(\"flow_profile.png\", dpi=150)\n",
            p.display().to_string()
        ));
    }
    s
}

fn minimize_plot(profile: Option<&Path>) -> String {
    format!(
        "{PLOT_PRELUDE}p = pd.read_csv({}, comment=\"#\")\n\
fig, ax = plt.subplots()\nax.plot(p[\"r\"], p[\"u\"])\nax.set_xlabel(\"r\")\nax.set_ylabel(\"u\")\n\
fig.savefig(\"ground_state.png\", dpi=150)\n",
        csv_or_stdin(profile)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_profile_overrides_in_order() {
        let g = parse_grid_profile("N=300, rmax=12, grading=uniform", GridSpec::default()).unwrap();
        assert_eq!(g, GridSpec { n: 300, r_max: 12.0, grading: Grading::Uniform });
        let args = GlobalArgs {
            grid_profile: Some("N=300".into()),
            grid_n: Some(512),
            grid_rmax: None,
            grid_grading: None,
            seed: 0,
            plot: None,
            verbose: 0,
        };
        let g = args.grid(FLOW_GRID).unwrap();
        assert_eq!((g.n, g.r_max, g.grading), (512, 60.0, Grading::Uniform));
        assert!(parse_grid_profile("N=abc", GridSpec::default()).is_err());
        assert!(parse_grid_profile("depth=3", GridSpec::default()).is_err());
    }

    #[test]
    fn bad_arguments_exit_with_two() {
        assert_eq!(run(["loglab", "eval", "--functional", "entropy", "--density", "rho-eta:eta=0.5"]), 2);
        assert_eq!(run(["loglab", "frobnicate"]), 2);
        assert_eq!(run(["loglab", "eval"]), 2);
    }

    #[test]
    fn eval_expectation_sets_exit_code() {
        let base = ["loglab", "eval", "--functional", "interaction", "--density", "rho-star", "--M", "1"];
        let with = |v: &str| {
            let mut a: Vec<&str> = base.to_vec();
            a.extend(["--expect", v, "--tol", "1e-5"]);
            run(a)
        };
        assert_eq!(with("0.5"), 0);
        assert_eq!(with("0.6"), 1);
    }

    #[test]
    fn unbounded_minimization_is_invalid_input() {
        assert_eq!(run(["loglab", "minimize", "--alpha", "-1", "--beta", "0", "--gamma", "0", "--n", "64", "--rmax", "8"]), 2);
    }

    #[test]
    fn identity_takes_mass_from_flag() {
        let v = eval_identity("rho-star-interaction", 2.0).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
        let v = eval_identity("k-constant:a=0", 1.0).unwrap();
        assert!((v + (std::f64::consts::E * std::f64::consts::PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn run_config_is_deterministic() {
        let a = VerifyArgs { suite: Suite::Scaling, report: None, samples: 3 };
        let c1 = RunConfig::new("verify", &a, GridSpec::default(), vec![], 7).header();
        let c2 = RunConfig::new("verify", &a, GridSpec::default(), vec![], 7).header();
        assert_eq!(c1, c2);
        assert!(c1.contains("\"seed\":7"));
    }
}
