//! Command implementations behind the `ptsync` binary.
//!
//! Every command returns a [`Status`] whose numeric value is the process
//! exit code: 0 success, 2 input error, 3 assumption violation, 4 numerical
//! failure. Commands that fail with 3 or 4 still write their reports.

pub mod args;

use std::fmt;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use ptsync_core::config::{benchmark, RunConfig};
use ptsync_core::dynamics::QuadCheck;
use ptsync_core::linalg::DEFAULT_TOL;
use ptsync_core::network::{validate, CouplingMode, ValidationReport};
use ptsync_core::regulator::RegulatorKind;
use ptsync_core::simulator::{integrate, write_truncated_csv, RunSummary, Trajectory};
use ptsync_core::{Error, MultiWeightNetwork, PhiClass, Regulator, ScalarModel};

pub use args::Cli;
use args::{BenchmarkArgs, BenchmarkMode, Command, ModelKind, RegulatorArg, ScalarArgs, SimulateArgs, SweepArgs, SweepParam, ValidateArgs};

/// Environment variable overriding the structural tolerance.
pub const TOL_ENV: &str = "PTSYNC_TOL";

const QUAD_TRIALS: usize = 10_000;
const QUAD_RADIUS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    InputError,
    AssumptionViolated,
    NumericalFailure,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::InputError => 2,
            Status::AssumptionViolated => 3,
            Status::NumericalFailure => 4,
        }
    }

    /// The exit status an error from the core library maps to.
    pub fn of(e: &Error) -> Self {
        match e {
            Error::AssumptionViolated(_)
            | Error::NotNegativeInTS { .. }
            | Error::NotNegativeDefinite { .. }
            | Error::DegenerateKernel { .. }
            | Error::NonPositiveEntry { .. } => Status::AssumptionViolated,
            Error::Blowup { .. } | Error::NonFiniteState { .. } | Error::StepUnderflow { .. } | Error::NoConvergence(_) => {
                Status::NumericalFailure
            }
            _ => Status::InputError,
        }
    }
}

/// A command that stopped before producing its normal output.
#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { status: Status::InputError, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self { status: Status::of(&e), message: e.to_string() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

type CmdResult = Result<Status, Failure>;

/// Process streams, replaceable in tests.
pub struct Streams<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

enum Dest<'p> {
    File(&'p Path),
    Out,
    Err,
}

fn emit(dest: Dest<'_>, io: &mut Streams<'_>, bytes: &[u8]) -> Result<(), Failure> {
    let res = match dest {
        Dest::File(p) => std::fs::write(p, bytes).map_err(|e| format!("{}: {e}", p.display())),
        Dest::Out => io.out.write_all(bytes).map_err(|e| e.to_string()),
        Dest::Err => io.err.write_all(bytes).map_err(|e| e.to_string()),
    };
    res.map_err(Failure::input)
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

/// `PTSYNC_TOL` if set, otherwise the library default.
pub fn structural_tolerance() -> Result<f64, Failure> {
    match std::env::var(TOL_ENV) {
        Err(_) => Ok(DEFAULT_TOL),
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(t) if t > 0.0 && t.is_finite() => Ok(t),
            _ => Err(Failure::input(format!("{TOL_ENV} must be a positive number, got {s:?}"))),
        },
    }
}

fn load(path: &Path, tol: f64) -> Result<(RunConfig, MultiWeightNetwork), Failure> {
    let cfg = RunConfig::load(path)?;
    let net = cfg.build_network(tol)?;
    Ok((cfg, net))
}

pub fn run(cli: &Cli, io: &mut Streams<'_>) -> CmdResult {
    match &cli.command {
        Command::Validate(a) => cmd_validate(a, cli.seed, io),
        Command::Simulate(a) => cmd_simulate(a, io),
        Command::Scalar(a) => cmd_scalar(a, io),
        Command::Sweep(a) => cmd_sweep(a, io),
        Command::Benchmark(a) => cmd_benchmark(a, io),
    }
}

#[derive(Serialize)]
struct ValidateOutput<'a> {
    #[serde(flatten)]
    report: &'a ValidationReport,
    hf_check: QuadCheck,
    seed: u64,
}

fn cmd_validate(a: &ValidateArgs, seed: u64, io: &mut Streams<'_>) -> CmdResult {
    let tol = structural_tolerance()?;
    let (cfg, net) = load(&a.config, tol)?;
    let report = validate(&net, cfg.dynamics.hf())?;
    let out = ValidateOutput { report: &report, hf_check: cfg.dynamics.verify_quad(QUAD_TRIALS, QUAD_RADIUS, seed), seed };
    let dest = a.out_json.as_deref().or(cfg.outputs.json.as_deref()).map_or(Dest::Out, Dest::File);
    emit(dest, io, &json_bytes(&out))?;
    if report.assumptions_hold && report.failure.is_none() {
        Ok(Status::Ok)
    } else {
        let _ = writeln!(io.err, "assumption violated: {}", report.failure.as_deref().unwrap_or("A1 check failed"));
        Ok(Status::AssumptionViolated)
    }
}

#[derive(Serialize)]
struct SimulationSummary {
    status: &'static str,
    mode: CouplingMode,
    eta: f64,
    threshold: Option<f64>,
    eta_sufficient: bool,
    assumptions_hold: bool,
    samples: usize,
    #[serde(flatten)]
    run: Option<RunSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<String>,
    wall_time_s: f64,
}

fn cmd_simulate(a: &SimulateArgs, io: &mut Streams<'_>) -> CmdResult {
    let tol = structural_tolerance()?;
    let (cfg, net) = load(&a.config, tol)?;
    let report = validate(&net, cfg.dynamics.hf())?;
    if !report.eta_sufficient {
        for w in &report.warnings {
            let _ = writeln!(io.err, "warning: {w}");
        }
    }
    let started = Instant::now();
    let result = integrate(&net, &cfg.dynamics, &cfg.initial_states, &cfg.integrator_config());
    let wall_time_s = started.elapsed().as_secs_f64();

    let mut csv = Vec::new();
    let (traj, failure): (&Trajectory, Option<&Error>) = match &result {
        Ok(t) => {
            t.write_csv(&mut csv, a.full_state).expect("in-memory write");
            (t, None)
        }
        Err(f) => {
            write_truncated_csv(f, &mut csv, a.full_state).expect("in-memory write");
            (&f.partial, Some(&f.error))
        }
    };
    let summary = SimulationSummary {
        status: if failure.is_some() { "truncated" } else { "complete" },
        mode: report.mode,
        eta: net.eta(),
        threshold: report.threshold,
        eta_sufficient: report.eta_sufficient,
        assumptions_hold: report.assumptions_hold,
        samples: traj.len(),
        run: traj.summary(),
        failure: failure.map(Error::to_string),
        wall_time_s,
    };
    let csv_path = a.out_csv.as_deref().or(cfg.outputs.csv.as_deref());
    let json_path = a.out_json.as_deref().or(cfg.outputs.json.as_deref());
    write_pair(io, csv_path, &csv, json_path, &json_bytes(&summary))?;
    match failure {
        None => Ok(Status::Ok),
        Some(e) => {
            let _ = writeln!(io.err, "integration failed: {e}");
            Ok(Status::of(e))
        }
    }
}

/// Data to its file or stdout; the JSON summary to its file, else to
/// whichever stream the data left free.
fn write_pair(io: &mut Streams<'_>, data_path: Option<&Path>, data: &[u8], json_path: Option<&Path>, json: &[u8]) -> Result<(), Failure> {
    emit(data_path.map_or(Dest::Out, Dest::File), io, data)?;
    let json_dest = match (json_path, data_path) {
        (Some(p), _) => Dest::File(p),
        (None, Some(_)) => Dest::Out,
        (None, None) => Dest::Err,
    };
    emit(json_dest, io, json)
}

#[derive(Serialize)]
struct ScalarSummary {
    model: ScalarModel,
    classification: Option<PhiClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    classification_note: Option<String>,
    stop_gap: f64,
    samples: usize,
    steps: usize,
    max_rel_error: Option<f64>,
}

fn scalar_model(a: &ScalarArgs) -> Result<ScalarModel, Error> {
    let reg = match a.regulator {
        RegulatorArg::Power => Regulator::power(a.horizon, a.ell)?,
        RegulatorArg::ExpA => Regulator::exp_a(a.horizon, a.a)?,
        RegulatorArg::ExpB => Regulator::exp_b(a.horizon, a.a)?,
    };
    match a.kind {
        ModelKind::Lemma2 => ScalarModel::lemma2(reg, a.delta, a.v0),
        ModelKind::Power => ScalarModel::power(reg, a.delta, a.p, a.v0),
        ModelKind::Lemma3 => ScalarModel::lemma3(reg, a.delta1, a.delta2, a.p, a.v0),
    }
}

fn cmd_scalar(a: &ScalarArgs, io: &mut Streams<'_>) -> CmdResult {
    let m = scalar_model(a).map_err(|e| Failure::input(e.to_string()))?;
    let stop_gap = a.stop_gap.unwrap_or(1e-3 * a.horizon);
    let tr = m.simulate(stop_gap, a.samples)?;
    let (classification, classification_note) = match m.classify_phi() {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let mut csv = String::from("t,V_numeric,V_closed_form\n");
    let mut max_rel = Some(0.0f64);
    for (&t, &lv) in tr.times.iter().zip(&tr.ln_values) {
        let exact = m.closed_form_ln(t).ok();
        max_rel = match (max_rel, exact) {
            (Some(r), Some(le)) if lv == le => Some(r),
            (Some(r), Some(le)) => Some(r.max((lv - le).exp_m1().abs())),
            _ => None,
        };
        let exact_col = exact.map_or(String::new(), |le| format!("{:?}", le.exp()));
        csv.push_str(&format!("{:?},{:?},{exact_col}\n", t, lv.exp()));
    }
    let summary = ScalarSummary {
        model: m,
        classification,
        classification_note,
        stop_gap,
        samples: tr.times.len(),
        steps: tr.steps,
        max_rel_error: max_rel,
    };
    write_pair(io, a.out_csv.as_deref(), csv.as_bytes(), a.out_json.as_deref(), &json_bytes(&summary))?;
    Ok(Status::Ok)
}

struct SweepRow {
    value: f64,
    summary: Option<RunSummary>,
    failure: Option<Error>,
}

fn sweep_config(base: &RunConfig, param: SweepParam, v: f64) -> Result<RunConfig, Failure> {
    let mut cfg = base.clone();
    match param {
        SweepParam::Eta => cfg.network.eta = v,
        SweepParam::Ell => {
            let reg = &cfg.network.regulator;
            if reg.kind != RegulatorKind::Power {
                return Err(Failure::input("an ell sweep needs a power regulator"));
            }
            cfg.network.regulator = Regulator::power(reg.horizon, v)?;
        }
        SweepParam::ShrinkFactor => {
            let mut ic = cfg.integrator_config();
            ic.shrink_factor = v;
            cfg.integrator = Some(ic);
        }
    }
    Ok(cfg)
}

fn cmd_sweep(a: &SweepArgs, io: &mut Streams<'_>) -> CmdResult {
    let tol = structural_tolerance()?;
    let base = RunConfig::load(&a.config)?;
    let jobs: Vec<(f64, RunConfig, MultiWeightNetwork)> = a
        .values
        .iter()
        .map(|&v| {
            let cfg = sweep_config(&base, a.param, v)?;
            let net = cfg.build_network(tol).map_err(|e| Failure::input(format!("value {v}: {e}")))?;
            Ok((v, cfg, net))
        })
        .collect::<Result<_, Failure>>()?;

    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|(v, cfg, net)| match integrate(net, &cfg.dynamics, &cfg.initial_states, &cfg.integrator_config()) {
            Ok(t) => SweepRow { value: *v, summary: t.summary(), failure: None },
            Err(f) => SweepRow { value: *v, summary: None, failure: Some(f.error) },
        })
        .collect();

    let mut csv = String::from("value,final_error_ratio,ln_ratio,monotone_W,status\n");
    for r in &rows {
        let (ratio, ln_ratio, mono) = r.summary.as_ref().map_or((String::new(), String::new(), String::new()), |s| {
            (
                format!("{:?}", s.ratio),
                format!("{:?}", s.ln_ratio),
                s.lyapunov_monotone.map_or(String::new(), |b| b.to_string()),
            )
        });
        let status = r.failure.as_ref().map_or("ok".to_string(), |e| format!("\"{e}\""));
        csv.push_str(&format!("{:?},{ratio},{ln_ratio},{mono},{status}\n", r.value));
    }
    emit(a.out_csv.as_deref().map_or(Dest::Out, Dest::File), io, csv.as_bytes())?;
    match rows.iter().find_map(|r| r.failure.as_ref()) {
        None => Ok(Status::Ok),
        Some(e) => {
            let _ = writeln!(io.err, "at least one run failed: {e}");
            Ok(Status::NumericalFailure)
        }
    }
}

fn cmd_benchmark(a: &BenchmarkArgs, io: &mut Streams<'_>) -> CmdResult {
    if !(a.eta > 0.0 && a.eta.is_finite()) {
        return Err(Failure::input(format!("eta must be positive, got {}", a.eta)));
    }
    let cfg = match a.mode {
        BenchmarkMode::Sync => benchmark::sync(a.eta),
        BenchmarkMode::Pinned => benchmark::pinned(a.eta),
    };
    let mut text = cfg.to_json();
    text.push('\n');
    emit(a.out_json.as_deref().map_or(Dest::Out, Dest::File), io, text.as_bytes())?;
    Ok(Status::Ok)
}

/// Runs the parsed command against the real process streams.
pub fn main_with(cli: &Cli) -> u8 {
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    let mut streams = Streams { out: &mut out, err: &mut err };
    match run(cli, &mut streams) {
        Ok(s) => s.code(),
        Err(f) => {
            let _ = writeln!(streams.err, "error: {f}");
            f.status.code()
        }
    }
}
