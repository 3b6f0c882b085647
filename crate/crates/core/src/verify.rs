//! Named verification suites run by `korteweg verify`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::diagnostics::{run_dissipation_check, scaling_invariance_check};
use crate::error::{Error, Result};
use crate::field::{SpectralField, VectorField};
use crate::grid::Grid;
use crate::initial_data::{geometric_ratio, homogeneous_profile, smooth_noise, truncated_profile};
use crate::linear::{alpha_max, apply_semigroup, duhamel_linf_split, dyadic_energy, verify_block_decay, LinearCoeffs};
use crate::littlewood_paley::{block_scaling_check, DyadicPartition};
use crate::model::{
    div_k_general, div_k_log, div_k_viscous, effective_velocity, quasi_solution_residual, CapillarityForm, Effective,
    Nhv1, Params,
};
use crate::run::{prepare, simulate};
use crate::solver::{integrate, picard_solve, solve_heat, Scheme, TimeStepperConfig};
use crate::state::FluidState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    TensorIdentity,
    SemigroupDecay,
    QuasiSolution,
    Energy,
    Scaling,
    BesovProfile,
    Effective,
    Picard,
    Duhamel,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::TensorIdentity,
        Suite::SemigroupDecay,
        Suite::QuasiSolution,
        Suite::Energy,
        Suite::Scaling,
        Suite::BesovProfile,
        Suite::Effective,
        Suite::Picard,
        Suite::Duhamel,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::TensorIdentity => "tensor-identity",
            Suite::SemigroupDecay => "semigroup-decay",
            Suite::QuasiSolution => "quasi-solution",
            Suite::Energy => "energy",
            Suite::Scaling => "scaling",
            Suite::BesovProfile => "besov-profile",
            Suite::Effective => "effective",
            Suite::Picard => "picard",
            Suite::Duhamel => "duhamel",
        }
    }

    pub fn run(&self, cfg: &RunConfig) -> Result<SuiteVerdict> {
        match self {
            Suite::TensorIdentity => tensor_identity(cfg),
            Suite::SemigroupDecay => semigroup_decay(),
            Suite::QuasiSolution => quasi_solution(cfg),
            Suite::Energy => energy(std::slice::from_ref(cfg)),
            Suite::Scaling => scaling(cfg),
            Suite::BesovProfile => besov_profile(),
            Suite::Effective => effective(cfg),
            Suite::Picard => picard(cfg),
            Suite::Duhamel => duhamel(cfg),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(Suite::name).collect();
            Error::InvalidArgument(format!("unknown suite '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

/// One measured quantity and the bound it must respect.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value <= tolerance`; NaN fails.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 0.0 } else { 1.0 }, tolerance: 0.0, passed: ok }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteVerdict {
    pub suite: Suite,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub details: Value,
}

impl SuiteVerdict {
    fn new(suite: Suite, checks: Vec<Check>, details: Value) -> Self {
        Self { suite, passed: checks.iter().all(|c| c.passed), checks, details }
    }

    /// Verdict of a suite that raised an error instead of finishing.
    pub fn errored(suite: Suite, e: &Error) -> Self {
        Self { suite, passed: false, checks: vec![Check::holds("completed", false)], details: json!({ "error": e.to_string() }) }
    }
}

/// Runs `suites` in parallel; the output keeps the input order.
pub fn run_suites(suites: &[Suite], cfg: &RunConfig) -> Vec<SuiteVerdict> {
    suites.par_iter().map(|s| s.run(cfg).unwrap_or_else(|e| SuiteVerdict::errored(*s, &e))).collect()
}

/// Largest `|x / mean - 1|`.
pub fn spread(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v / mean - 1.0).abs()).fold(0.0, f64::max)
}

fn rel_l2(a: &VectorField, b: &VectorField) -> f64 {
    a.sub(b).l2_norm() / b.l2_norm().max(f64::MIN_POSITIVE)
}

fn random_state(grid: &Grid, rng: &mut ChaCha8Rng, kmax: i64, amp: f64) -> FluidState {
    let q = smooth_noise(grid, rng, kmax, amp);
    let u = VectorField::new((0..grid.dim()).map(|_| smooth_noise(grid, rng, kmax, amp)).collect()).expect("same grid");
    FluidState { q, u }
}

/// Three forms of the capillary term on random positive densities whose logarithm is resolved on the grid.
pub fn tensor_identity(cfg: &RunConfig) -> Result<SuiteVerdict> {
    let kappa = cfg.params.kappa;
    let params = Params { capillarity_form: CapillarityForm::InverseDensity, ..cfg.params.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for dim in [1, 2] {
        let grid = Grid::new(dim, 64, 2.0 * PI)?;
        for _ in 0..10 {
            let amp = rng.gen_range(0.05..0.25);
            let kmax = rng.gen_range(1..=2);
            let rho = smooth_noise(&grid, &mut rng, kmax, amp).add_constant(1.0);
            let a = div_k_general(&rho, &params)?;
            let b = div_k_log(&rho, kappa)?;
            let c = div_k_viscous(&rho, kappa)?;
            worst = worst.max(rel_l2(&a, &b)).max(rel_l2(&b, &c)).max(rel_l2(&a, &c));
            samples += 1;
        }
    }
    Ok(SuiteVerdict::new(
        Suite::TensorIdentity,
        vec![Check::at_most("pairwise_rel_error", worst, 1e-8)],
        json!({ "samples": samples, "kappa": kappa }),
    ))
}

/// Decay-rate fits on blocks 2..4 over a capillarity sweep, and monotonicity of the dyadic energy.
pub fn semigroup_decay() -> Result<SuiteVerdict> {
    let grid = Grid::new(1, 1024, 2.0 * PI * 8.0)?;
    let partition = DyadicPartition::new(&grid)?;
    let blocks = [2, 3, 4];
    let kappas = [0.01, 0.04, 0.16];
    let mut checks = Vec::new();
    let mut c_fits = Vec::new();
    let mut table = Vec::new();
    for &kappa in &kappas {
        let coeffs = LinearCoeffs::from_physical(1.0, 0.0, kappa, 0.0)?;
        let mut per_block = Vec::new();
        for &l in &blocks {
            let predicted = coeffs.decay_prefactor() * 4f64.powi(l);
            let times: Vec<f64> = (0..24).map(|k| 20.0 * k as f64 / (23.0 * predicted)).collect();
            let rep = verify_block_decay(&partition, l, &coeffs, &times)?;
            per_block.push(rep.c_fit);
            table.push(json!({ "kappa": kappa, "block": l, "measured_rate": rep.measured_rate, "predicted_rate": rep.predicted_rate, "c_fit": rep.c_fit }));
        }
        checks.push(Check::at_most(format!("rate_l_uniformity_kappa_{kappa}"), spread(&per_block), 0.2));
        c_fits.push(per_block.iter().sum::<f64>() / per_block.len() as f64);
    }
    checks.push(Check::at_most("prefactor_tracking", spread(&c_fits), 0.3));

    let lyap = lyapunov_monotonicity(0)?;
    checks.push(Check::at_most("lyapunov_max_increase", lyap.max_increase, 0.0));
    Ok(SuiteVerdict::new(
        Suite::SemigroupDecay,
        checks,
        json!({ "fits": table, "c_fit_per_kappa": c_fits, "lyapunov": lyap }),
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovReport {
    pub alpha: f64,
    pub blocks: Vec<i32>,
    pub samples: usize,
    /// Largest relative step-to-step increase of any `k_l`; non-positive when monotone.
    pub max_increase: f64,
}

/// `k_l(t)` along the exact pressureless flow with `mu = 1, lambda = 0, kappa = 1` at the largest
/// admissible cross weight, for every block of a 2D grid and 50 times per block.
pub fn lyapunov_monotonicity(seed: u64) -> Result<LyapunovReport> {
    let grid = Grid::new(2, 64, 2.0 * PI)?;
    let partition = DyadicPartition::new(&grid)?;
    let coeffs = LinearCoeffs::from_physical(1.0, 0.0, 1.0, 0.0)?;
    let alpha = alpha_max(&coeffs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state0 = random_state(&grid, &mut rng, 31, 1.0);
    let blocks: Vec<i32> = partition.range().collect();
    let rises: Vec<f64> = blocks
        .par_iter()
        .map(|&l| {
            let horizon = 4.0 / (coeffs.decay_prefactor() * 4f64.powi(l));
            let ks: Vec<f64> = (0..50)
                .map(|k| {
                    let st = apply_semigroup(&state0, horizon * k as f64 / 49.0, &coeffs)?;
                    dyadic_energy(&partition, &st, l, alpha, &coeffs)
                })
                .collect::<Result<_>>()?;
            Ok(ks.windows(2).map(|w| (w[1] - w[0]) / w[0].max(f64::MIN_POSITIVE)).fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<_>>()?;
    // Rounding noise of a flat sequence is tolerated at the 1e-13 level.
    let max_increase = rises.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(LyapunovReport { alpha, blocks, samples: 50, max_increase: if max_increase < 1e-13 { max_increase.min(0.0) } else { max_increase } })
}

/// `1 + amplitude exp(2 sum_a (cos(x_a - pi) - 1))`, analytic and periodic.
pub fn periodic_bump(grid: &Grid, amplitude: f64) -> Result<SpectralField> {
    let dim = grid.dim();
    let k = 2.0 * PI / grid.length();
    SpectralField::from_fn(grid, |x| 1.0 + amplitude * (2.0 * (0..dim).map(|a| (k * x[a] - PI).cos() - 1.0).sum::<f64>()).exp())
}

/// Residual of `(rho1, -mu grad ln rho1)` along the heat flow of a bump.
pub fn quasi_solution(cfg: &RunConfig) -> Result<SuiteVerdict> {
    let mu = cfg.params.mu;
    let grid = Grid::new(2, 64, 2.0 * PI)?;
    let rho0 = periodic_bump(&grid, 0.3)?;
    let times: Vec<f64> = (0..20).map(|k| 0.05 * k as f64).collect();
    let rel: Vec<f64> = times
        .par_iter()
        .map(|&t| Ok(quasi_solution_residual(&solve_heat(&rho0, mu, t)?, mu)?.relative))
        .collect::<Result<_>>()?;
    let worst = rel.iter().cloned().fold(0.0, f64::max);
    Ok(SuiteVerdict::new(
        Suite::QuasiSolution,
        vec![Check::at_most("relative_residual", worst, 1e-8)],
        json!({ "mu": mu, "times": times, "relative": rel }),
    ))
}

/// Energy inequality on each config and on its linearized counterpart.
pub fn energy(configs: &[RunConfig]) -> Result<SuiteVerdict> {
    let mut checks = Vec::new();
    let mut details = Vec::new();
    for (i, cfg) in configs.iter().enumerate() {
        for mute in [false, true] {
            let mut c = cfg.clone();
            c.mute_nonlinearity = mute;
            let label = format!("{i}_{:?}{}", c.variant, if mute { "_linear" } else { "" }).to_lowercase();
            let sim = simulate(&c)?;
            checks.push(Check::holds(format!("{label}_completed"), sim.trajectory.completed()));
            let v = run_dissipation_check(&c, &sim.trajectory, 0.0)?;
            checks.push(Check::at_most(format!("{label}_violation"), v.max_violation, v.tolerance));
            checks.push(Check::holds(format!("{label}_monotone"), !v.energy_increase));
            details.push(json!({ "run": label, "initial": v.records.first().map(|r| r.total), "final": v.records.last().map(|r| r.total) }));
        }
    }
    Ok(SuiteVerdict::new(Suite::Energy, checks, Value::Array(details)))
}

/// Dilation by 2 of the config in the linear and nonlinear sectors.
pub fn scaling(cfg: &RunConfig) -> Result<SuiteVerdict> {
    let mut lin = cfg.clone();
    lin.mute_nonlinearity = true;
    let a = scaling_invariance_check(&lin, 2, 1e-10)?;
    let mut non = cfg.clone();
    non.mute_nonlinearity = false;
    let b = scaling_invariance_check(&non, 2, 1e-4)?;
    Ok(SuiteVerdict::new(
        Suite::Scaling,
        vec![
            Check::at_most("linear_mismatch", a.density_mismatch.max(a.velocity_mismatch), a.tolerance),
            Check::at_most("nonlinear_mismatch", b.density_mismatch.max(b.velocity_mismatch), b.tolerance),
        ],
        json!({ "linear": a, "nonlinear": b }),
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncatedTrend {
    pub epsilon: f64,
    pub l0: Vec<i32>,
    /// `|.|_{B^{N/2-1}_{2,inf}} 2^{l0 eps}` per cut level.
    pub scaled_inf: Vec<f64>,
    /// Measured `l^2 / l^inf` ratio over predicted band-truncated geometric ratio.
    pub ratio_r2: Vec<f64>,
}

/// Critical norms of `|x|^{-(1-eps)}` cut above `2^{l0}` on a 1D grid.
pub fn truncated_trend(epsilon: f64, l0s: &[i32]) -> Result<TruncatedTrend> {
    let grid = Grid::new(1, 1 << 14, 2.0 * PI * 64.0)?;
    let partition = DyadicPartition::new(&grid)?;
    let mut scaled_inf = Vec::new();
    let mut ratio_r2 = Vec::new();
    for &l0 in l0s {
        let t = truncated_profile(epsilon, l0, &grid)?;
        scaled_inf.push(t.norm_inf * 2f64.powf(l0 as f64 * epsilon));
        let m = (partition.j_max() - l0 + 1) as usize;
        ratio_r2.push(t.norm_r(&partition, 2.0) / t.norm_inf / geometric_ratio(epsilon, 2.0, m));
    }
    Ok(TruncatedTrend { epsilon, l0: l0s.to_vec(), scaled_inf, ratio_r2 })
}

/// Mid-band flatness of homogeneous profiles and the trends of truncated ones.
pub fn besov_profile() -> Result<SuiteVerdict> {
    let cases = [(1usize, 0.5, 1usize << 14, 2.0 * PI * 64.0), (2, 1.0, 1024, 2.0 * PI * 16.0)];
    let mut checks = Vec::new();
    let mut flat = Vec::new();
    for (dim, sigma, n, length) in cases {
        let grid = Grid::new(dim, n, length)?;
        let partition = DyadicPartition::new(&grid)?;
        let f = homogeneous_profile(sigma, &grid)?;
        let rep = block_scaling_check(&partition, &f, sigma);
        checks.push(Check::at_most(format!("flatness_n{dim}_sigma{sigma}"), rep.max_deviation, 0.1));
        flat.push(rep);
    }
    let trend = truncated_trend(0.1, &[-2, 0, 2])?;
    checks.push(Check::at_most("truncated_l0_trend", spread(&trend.scaled_inf), 0.25));
    let worst = trend.ratio_r2.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most("truncated_r_trend", worst, 0.25));
    Ok(SuiteVerdict::new(Suite::BesovProfile, checks, json!({ "flatness": flat, "truncated": trend })))
}

/// Regime parameters for the effective-velocity comparison: the config's if it qualifies.
fn regime_params(cfg: &RunConfig) -> Params {
    if cfg.params.in_quasi_solution_regime() {
        cfg.params.clone()
    } else {
        Params::quasi_solution(cfg.params.mu, cfg.params.pressure.stiffness())
    }
}

/// Relative sup distance between the `(q, u)` run mapped to `(q, v)` and the `(q, v)` run.
pub fn effective_mismatch(params: &Params, state0: &FluidState, dt: f64, steps: usize) -> Result<f64> {
    let stepper = TimeStepperConfig::new(dt, dt * steps as f64, Scheme::ExpRk2);
    let a = integrate(&Nhv1 { params: params.clone() }, state0, &stepper)?;
    let eff = Effective::new(params.clone())?;
    let v0 = FluidState::new(state0.q.clone(), effective_velocity(&state0.q, &state0.u, params.mu))?;
    let b = integrate(&eff, &v0, &stepper)?;
    if !a.completed() || !b.completed() {
        return Err(Error::NumericalAbort { time: 0.0, reason: "effective comparison aborted".into() });
    }
    let mut worst: f64 = 0.0;
    for (sa, sb) in a.snapshots.iter().zip(&b.internal) {
        let mapped = FluidState::new(sa.q.clone(), effective_velocity(&sa.q, &sa.u, params.mu))?;
        worst = worst.max(mapped.max_abs_diff(sb) / sb.max_abs().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Ten steps of the `(q, u)` and `(q, v)` systems from the config data.
pub fn effective(cfg: &RunConfig) -> Result<SuiteVerdict> {
    let params = regime_params(cfg);
    let mut c = cfg.clone();
    c.params = params.clone();
    c.variant = crate::model::SystemVariant::Nhv1;
    c.mute_nonlinearity = false;
    let prep = prepare(&c)?;
    let err = effective_mismatch(&params, &prep.physical0, cfg.stepper.dt, 10)?;
    Ok(SuiteVerdict::new(
        Suite::Effective,
        vec![Check::at_most("sup_rel_error", err, 1e-6)],
        json!({ "mu": params.mu, "kappa": params.kappa, "dt": cfg.stepper.dt, "steps": 10 }),
    ))
}

/// Picard iterates of the config's system on a short horizon against the time stepper.
pub fn picard(cfg: &RunConfig) -> Result<SuiteVerdict> {
    let mut c = cfg.clone();
    c.mute_nonlinearity = false;
    let prep = prepare(&c)?;
    let horizon = cfg.stepper.horizon.min(0.1);
    let dt = cfg.stepper.dt.min(horizon / 10.0);
    let rep = picard_solve(prep.system.as_ref(), &prep.internal0, horizon, dt, 8)?;
    let mut checks = vec![Check::holds("converging", !rep.diverged)];
    let first: Vec<f64> = rep.ratios.iter().take(4).cloned().collect();
    checks.push(Check::holds("four_ratios", first.len() == 4));
    checks.push(Check::at_most("max_ratio_n2_to_n5", first.iter().cloned().fold(0.0, f64::max), 1.0 - f64::EPSILON));
    let traj = integrate(prep.system.as_ref(), &prep.internal0, &TimeStepperConfig::new(dt, horizon, Scheme::ExpRk2))?;
    let last = traj.internal.last().expect("non-empty trajectory");
    let limit = rep.final_state();
    let rel = limit.max_abs_diff(last) / last.max_abs().max(f64::MIN_POSITIVE);
    checks.push(Check::at_most("limit_vs_stepper", rel, 1e-4));
    Ok(SuiteVerdict::new(
        Suite::Picard,
        checks,
        json!({ "horizon": horizon, "dt": dt, "differences": rep.differences, "ratios": rep.ratios }),
    ))
}

/// Duhamel reconstruction of `q` and grid stability of the fitted sup-norm constants.
pub fn duhamel(cfg: &RunConfig) -> Result<SuiteVerdict> {
    let coeffs = cfg.params.linear_coeffs()?;
    let coeffs = LinearCoeffs::new(coeffs.a, coeffs.b, coeffs.c, 0.0)?;
    let coarse = Grid::new(2, 32, 2.0 * PI)?;
    let fine = Grid::new(2, 64, 2.0 * PI)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let q = smooth_noise(&coarse, &mut rng, 4, 0.02);
    let u = VectorField::new(vec![smooth_noise(&coarse, &mut rng, 4, 0.1), smooth_noise(&coarse, &mut rng, 4, 0.1)])?;
    let s0 = FluidState::new(q, u)?;
    let horizon = 1.0;
    let reports = [&coarse, &fine]
        .par_iter()
        .map(|g| {
            let st = s0.resample(g)?;
            duhamel_linf_split(&DyadicPartition::new(g)?, &st, &coeffs, horizon)
        })
        .collect::<Result<Vec<_>>>()?;
    let (a, b) = (&reports[0], &reports[1]);
    let checks = vec![
        Check::at_most("split_rel_error", a.split_rel_error.max(b.split_rel_error), 1e-6),
        Check::holds("heat_bound", a.heat_bound_holds && b.heat_bound_holds),
        Check::at_most("c_fit_q_grid_change", (b.c_fit_q / a.c_fit_q - 1.0).abs(), 0.25),
        Check::at_most("c_fit_smoothing_grid_change", (b.c_fit_smoothing / a.c_fit_smoothing - 1.0).abs(), 0.25),
    ];
    Ok(SuiteVerdict::new(Suite::Duhamel, checks, json!({ "coarse": a, "fine": b })))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn spread_of_constant_is_zero() {
        assert_eq!(spread(&[2.0, 2.0, 2.0]), 0.0);
        assert!((spread(&[1.0, 3.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nan_check_fails() {
        assert!(!Check::at_most("x", f64::NAN, 1.0).passed);
    }

    #[test]
    fn tensor_identity_on_default_config() {
        let v = tensor_identity(&RunConfig::default_small_data()).unwrap();
        assert!(v.passed, "{v:?}");
    }
}
