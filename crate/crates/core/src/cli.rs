//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{FieldSel, RunConfig};
use crate::diagnostics::energy;
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid;
use crate::initial_data::{dilation_report, scaled_profile, smooth_bump, truncated_profile, DataSpec};
use crate::io::{read_snapshot, write_slice_csv, write_snapshot};
use crate::linear::{alpha_max, apply_semigroup, block_probe, dyadic_energy, gradient_velocity_norm, vector_besov_norm, verify_block_decay, LinearCoeffs};
use crate::littlewood_paley::{BesovSpec, DyadicPartition};
use crate::run::{ensure_dir, simulate, write_file, write_outputs, Manifest};
use crate::verify::{run_suites, Suite, SuiteVerdict};

/// Exit code of a successful run.
pub const EXIT_OK: i32 = 0;
/// Invalid input, configuration or I/O failure.
pub const EXIT_INVALID: i32 = 1;
/// Vacuum, non-finite values or an aborted trajectory.
pub const EXIT_ABORT: i32 = 2;
/// A verification suite did not pass.
pub const EXIT_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "korteweg", version, about = "Pseudo-spectral Navier-Stokes-Korteweg laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a configured run and write trajectory, diagnostics and manifest.
    Simulate(SimulateArgs),
    /// Build the configured initial data and report its norms without simulating.
    Data(DataArgs),
    /// Fit the decay of the linear semigroup on one dyadic block.
    Semigroup(SemigroupArgs),
    /// Run named verification suites.
    Verify(VerifyArgs),
    /// Besov norm of a snapshot component or of configured initial data.
    Besov(BesovArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory (defaults to the config's `output`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SemigroupArgs {
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    /// Pressure stiffness; the block fit needs 0.
    #[arg(long = "K", default_value_t = 0.0, allow_hyphen_values = true)]
    pub k: f64,
    #[arg(long, default_value_t = 2, allow_hyphen_values = true)]
    pub block: i32,
    #[arg(long, default_value_t = 0.5)]
    pub tmax: f64,
    #[arg(long, default_value_t = 24)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    #[arg(long, default_value_t = 1024)]
    pub n: usize,
    /// Box length in units of 2π.
    #[arg(long, default_value_t = 8.0)]
    pub periods: f64,
    /// Output directory for `semigroup.csv` and `semigroup.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suite to run; repeatable. All suites when omitted.
    #[arg(long = "suite")]
    pub suites: Vec<String>,
    /// Config supplying parameters, data and stepper; the built-in small-data run otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for `verify.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FieldArg {
    Q,
    Rho,
    U,
}

#[derive(Debug, Args)]
pub struct BesovArgs {
    /// Snapshot file written by `data` or a compatible tool.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub input: Option<PathBuf>,
    /// Component of the snapshot to measure.
    #[arg(long, default_value_t = 0)]
    pub component: usize,
    /// Config whose initial data is measured.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Field of the initial data.
    #[arg(long, value_enum, default_value_t = FieldArg::Q)]
    pub field: FieldArg,
    #[arg(long, allow_hyphen_values = true)]
    pub s: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Summability index; `inf` accepted.
    #[arg(long, default_value_t = f64::INFINITY)]
    pub r: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub quiet: bool,
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NumericalAbort { .. } | Error::Vacuum { .. } | Error::NonFinite { .. } => EXIT_ABORT,
        _ => EXIT_INVALID,
    }
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Data(a) => cmd_data(a),
        Command::Semigroup(a) => cmd_semigroup(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Besov(a) => cmd_besov(a),
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Format(e.to_string()))
}

fn cmd_simulate(a: SimulateArgs) -> Result<i32> {
    let cfg = load(&a.config, a.common.seed)?;
    let dir = a.common.out.clone().unwrap_or_else(|| cfg.output.clone());
    let sim = simulate(&cfg)?;
    write_outputs(&sim, &dir)?;
    let traj = &sim.trajectory;
    if !a.common.quiet {
        let t = traj.last().map_or(0.0, |l| l.0);
        println!("{} snapshots to t = {t} written to {}", traj.len(), dir.display());
    }
    match &traj.abort {
        Some(ab) => {
            eprintln!("error: run aborted at t = {}: {}", ab.time, ab.reason);
            Ok(EXIT_ABORT)
        }
        None => Ok(EXIT_OK),
    }
}

/// Norms of a built state: sup, critical Besov and energy.
fn data_report(cfg: &RunConfig, grid: &Grid, state: &crate::state::FluidState) -> Result<Value> {
    let partition = DyadicPartition::new(grid)?;
    let n = grid.dim() as f64;
    let q = std::slice::from_ref(&state.q);
    let u = state.u.components();
    let rho = state.rho();
    let mut report = json!({
        "kind": cfg.data.name(),
        "rho_min": rho.min(),
        "rho_max": rho.max(),
        "q_linf": state.q.linf_norm(),
        "u_linf": state.u.linf_norm(),
        "q_besov_n2_2_1": vector_besov_norm(&partition, q, n / 2.0, 1.0),
        "u_besov_n2m1_2_1": vector_besov_norm(&partition, u, n / 2.0 - 1.0, 1.0),
        "q_besov_n2_2_inf": vector_besov_norm(&partition, q, n / 2.0, f64::INFINITY),
        "u_besov_n2m1_2_inf": vector_besov_norm(&partition, u, n / 2.0 - 1.0, f64::INFINITY),
        "energy": energy(state, &cfg.params)?,
    });
    match &cfg.data {
        DataSpec::TruncatedProfile { epsilon, l0, .. } => {
            let t = truncated_profile(*epsilon, *l0, grid)?;
            report["truncated"] = json!({
                "norm_inf": t.norm_inf,
                "norm_r2": t.norm_r(&partition, 2.0),
                "norm_r1": t.norm_r(&partition, 1.0),
            });
        }
        DataSpec::ScaledProfile { lambda_scale, radius, .. } => {
            let phi = smooth_bump(grid, *radius)?;
            let h = scaled_profile(&phi, *lambda_scale)?;
            report["dilation"] = serde_json::to_value(dilation_report(&phi, &h, *lambda_scale)?).map_err(|e| Error::Format(e.to_string()))?;
        }
        _ => {}
    }
    Ok(report)
}

fn cmd_data(a: DataArgs) -> Result<i32> {
    let cfg = load(&a.config, a.common.seed)?;
    let dir = a.common.out.clone().unwrap_or_else(|| cfg.output.clone());
    let grid = cfg.grid.build()?;
    let data = cfg.data.build(&grid, cfg.seed, cfg.params.mu)?;
    let state = &data.state;
    let report = data_report(&cfg, &grid, state)?;
    ensure_dir(&dir)?;
    let mut fields = vec![&state.q];
    fields.extend(state.u.components());
    let snap = dir.join("data.bin");
    write_snapshot(&snap, &fields).map_err(|e| Error::Io(format!("cannot write {}: {e}", snap.display())))?;
    let mut outputs = vec!["data.bin".to_string()];
    if grid.dim() == 1 {
        let names: Vec<String> = std::iter::once("q".to_string()).chain((0..grid.dim()).map(|i| format!("u{i}"))).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        write_slice_csv(&dir.join("data.csv"), &names, &fields)?;
        outputs.push("data.csv".into());
    }
    let mut manifest = Manifest::new("data", Some(&cfg), &report);
    manifest.outputs = outputs;
    write_file(&dir.join("manifest.json"), to_json(&manifest)?.as_bytes())?;
    if !a.common.quiet {
        println!("{}", to_json(&report)?);
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct SemigroupVerdict {
    block: i32,
    predicted_rate: f64,
    measured_rate: f64,
    c_fit: f64,
    alpha: f64,
    k_l_non_increasing: bool,
}

fn cmd_semigroup(a: SemigroupArgs) -> Result<i32> {
    let coeffs = LinearCoeffs::from_physical(a.mu, a.lambda, a.kappa, a.k)?;
    if a.samples < 4 {
        return Err(Error::InvalidArgument("at least four time samples required".into()));
    }
    if !(a.tmax > 0.0) {
        return Err(Error::InvalidArgument(format!("tmax must be positive, got {}", a.tmax)));
    }
    if !(a.periods > 0.0) {
        return Err(Error::InvalidArgument(format!("periods must be positive, got {}", a.periods)));
    }
    let grid = Grid::new(a.dim, a.n, 2.0 * std::f64::consts::PI * a.periods)?;
    let partition = DyadicPartition::new(&grid)?;
    if !partition.contains(a.block) {
        return Err(Error::BlockOutOfRange { block: a.block, min: partition.j_min(), max: partition.j_max() });
    }
    let times: Vec<f64> = (0..a.samples).map(|k| a.tmax * k as f64 / (a.samples - 1) as f64).collect();
    let rep = verify_block_decay(&partition, a.block, &coeffs, &times)?;
    let alpha = alpha_max(&coeffs);
    let probe = block_probe(&partition, a.block)?;
    let mut csv = String::from("t,block_norm,k_l\n");
    let mut ks = Vec::with_capacity(times.len());
    for &t in &times {
        let st = apply_semigroup(&probe, t, &coeffs)?;
        let k = dyadic_energy(&partition, &st, a.block, alpha, &coeffs)?;
        csv.push_str(&format!("{t:.17e},{:.17e},{k:.17e}\n", gradient_velocity_norm(&st)));
        ks.push(k);
    }
    let verdict = SemigroupVerdict {
        block: a.block,
        predicted_rate: rep.predicted_rate,
        measured_rate: rep.measured_rate,
        c_fit: rep.c_fit,
        alpha,
        k_l_non_increasing: ks.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-13)),
    };
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        write_file(&dir.join("semigroup.csv"), csv.as_bytes())?;
        let mut manifest = Manifest::new("semigroup", None, &verdict);
        manifest.outputs = vec!["semigroup.csv".into()];
        write_file(&dir.join("semigroup.json"), to_json(&manifest)?.as_bytes())?;
    }
    if !a.quiet {
        println!("{}", to_json(&verdict)?);
    }
    Ok(EXIT_OK)
}

fn cmd_verify(a: VerifyArgs) -> Result<i32> {
    let suites: Vec<Suite> = if a.suites.is_empty() {
        Suite::ALL.to_vec()
    } else {
        a.suites.iter().map(|s| s.parse()).collect::<Result<_>>()?
    };
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default_small_data(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let verdicts: Vec<SuiteVerdict> = run_suites(&suites, &cfg);
    if !a.quiet {
        for v in &verdicts {
            let line = serde_json::to_string(v).map_err(|e| Error::Format(e.to_string()))?;
            println!("{} {} {line}", if v.passed { "PASS" } else { "FAIL" }, v.suite);
        }
    }
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        let manifest = Manifest::new("verify", Some(&cfg), &verdicts);
        write_file(&dir.join("verify.json"), to_json(&manifest)?.as_bytes())?;
    }
    Ok(if verdicts.iter().all(|v| v.passed) { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_besov(a: BesovArgs) -> Result<i32> {
    let spec = BesovSpec::new(a.s, a.p, a.r);
    spec.validate()?;
    let field: SpectralField = match (&a.input, &a.config) {
        (Some(path), _) => {
            let mut comps = read_snapshot(path).map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
            if a.component >= comps.len() {
                return Err(Error::InvalidArgument(format!("component {} out of range (snapshot has {})", a.component, comps.len())));
            }
            comps.swap_remove(a.component)
        }
        (None, Some(path)) => {
            let cfg = load(path, a.seed)?;
            let grid = cfg.grid.build()?;
            let state = cfg.data.build(&grid, cfg.seed, cfg.params.mu)?.state;
            match a.field {
                FieldArg::Q => state.q,
                FieldArg::Rho => state.rho().add_constant(-1.0),
                FieldArg::U => {
                    if a.p != 2.0 {
                        return Err(Error::InvalidNormSpec("velocity Besov norms are measured with p = 2".into()));
                    }
                    let partition = DyadicPartition::new(&grid)?;
                    let value = vector_besov_norm(&partition, state.u.components(), a.s, a.r);
                    return print_besov(&spec, FieldSel::U.name(), value, None, a.quiet);
                }
            }
        }
        (None, None) => return Err(Error::InvalidArgument("either --input or --config is required".into())),
    };
    let partition = DyadicPartition::new(field.grid())?;
    let value = partition.besov_norm(&field, &spec)?;
    let blocks = partition.block_norms(&field, a.p);
    let name = match (a.input.is_some(), a.field) {
        (true, _) => "snapshot",
        (false, FieldArg::Rho) => FieldSel::Rho.name(),
        (false, _) => FieldSel::Q.name(),
    };
    print_besov(&spec, name, value, Some((partition.j_min(), blocks)), a.quiet)
}

fn print_besov(spec: &BesovSpec, field: &str, value: f64, blocks: Option<(i32, Vec<f64>)>, quiet: bool) -> Result<i32> {
    if !quiet {
        let mut out = json!({ "spec": spec.id(), "field": field, "value": value });
        if let Some((j_min, b)) = blocks {
            out["j_min"] = json!(j_min);
            out["block_norms"] = json!(b);
        }
        println!("{}", to_json(&out)?);
    }
    Ok(EXIT_OK)
}
