//! Energy, dissipation, scaling invariance and sup-norm monitors.

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::field::{SpectralField, VectorField};
use crate::grid::Grid;
use crate::linear::{critical_data_norm, LinearCoeffs};
use crate::littlewood_paley::DyadicPartition;
use crate::model::{Params, PressureLaw, SystemVariant, VACUUM_FLOOR};
use crate::run::prepare;
use crate::solver::{integrate, Trajectory};
use crate::state::FluidState;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyRecord {
    pub time: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub capillary: f64,
    pub viscous_dissipated: f64,
    /// `kinetic + potential + capillary`.
    pub total: f64,
}

fn density(state: &FluidState) -> Result<SpectralField> {
    let rho = state.rho();
    let min = rho.min();
    if !(min >= VACUUM_FLOOR) {
        return Err(Error::Vacuum { min_density: min, floor: VACUUM_FLOOR });
    }
    Ok(rho)
}

/// The three stored energies of a state; `viscous_dissipated` is left at zero.
pub fn energy(state: &FluidState, params: &Params) -> Result<EnergyRecord> {
    let rho = density(state)?;
    let kinetic = 0.5 * rho.zip_map(&state.u.norm_squared(), |r, u2| r * u2).integral();
    let pi1 = params.pressure.energy_potential(1.0);
    let potential = rho.map(|r| params.pressure.energy_potential(r) - pi1).integral();
    let grad = rho.gradient().norm_squared();
    let capillary = 0.5 * params.capillarity(&rho).zip_map(&grad, |k, g| k * g).integral();
    Ok(EnergyRecord { time: 0.0, kinetic, potential, capillary, viscous_dissipated: 0.0, total: kinetic + potential + capillary })
}

/// `int 2 mu(rho) |D(u)|^2 + lambda(rho) (div u)^2`.
pub fn dissipation_rate(state: &FluidState, params: &Params) -> Result<f64> {
    let rho = density(state)?;
    let (mu_r, lambda_r) = params.viscosities(&rho);
    let u = &state.u;
    let dim = u.dim();
    let grads: Vec<VectorField> = u.components().iter().map(|c| c.gradient()).collect();
    let mut strain2 = SpectralField::zeros(rho.grid());
    for i in 0..dim {
        for j in 0..dim {
            let d = grads[i].component(j).add(grads[j].component(i)).scale(0.5);
            strain2 = strain2.add(&d.mul(&d));
        }
    }
    let div = u.divergence();
    let density = mu_r.mul(&strain2).scale(2.0).add(&lambda_r.mul(&div.mul(&div)));
    Ok(density.integral())
}

fn accumulate(
    times: &[f64],
    states: &[FluidState],
    energy_of: impl Fn(&FluidState) -> Result<EnergyRecord>,
    rate_of: impl Fn(&FluidState) -> Result<f64>,
) -> Result<Vec<EnergyRecord>> {
    let mut out: Vec<EnergyRecord> = Vec::with_capacity(times.len());
    let mut prev_rate = 0.0;
    for (k, (t, s)) in times.iter().zip(states).enumerate() {
        let mut e = energy_of(s)?;
        let rate = rate_of(s)?;
        e.time = *t;
        if k > 0 {
            let last = out[k - 1];
            e.viscous_dissipated = last.viscous_dissipated + 0.5 * (t - last.time) * (rate + prev_rate);
        }
        prev_rate = rate;
        out.push(e);
    }
    Ok(out)
}

/// Energy records of every snapshot with the trapezoid-accumulated dissipation.
pub fn energy_series(traj: &Trajectory, params: &Params) -> Result<Vec<EnergyRecord>> {
    accumulate(&traj.times, &traj.snapshots, |s| energy(s, params), |s| dissipation_rate(s, params))
}

/// Energy of the linearized system: `|u|^2 / 2 + d q^2 / 2 + c |grad q|^2 / 2`.
pub fn quadratic_energy(state: &FluidState, coeffs: &LinearCoeffs) -> EnergyRecord {
    let kinetic = 0.5 * state.u.components().iter().map(|c| c.mul(c).integral()).sum::<f64>();
    let potential = 0.5 * coeffs.d * state.q.mul(&state.q).integral();
    let capillary = 0.5 * coeffs.c * state.q.gradient().norm_squared().integral();
    EnergyRecord { time: 0.0, kinetic, potential, capillary, viscous_dissipated: 0.0, total: kinetic + potential + capillary }
}

/// `int a |grad u|^2 + b (div u)^2`, the exact dissipation of the quadratic energy.
pub fn quadratic_dissipation_rate(state: &FluidState, coeffs: &LinearCoeffs) -> f64 {
    let grad2: f64 = state.u.components().iter().map(|c| c.gradient().norm_squared().integral()).sum();
    let div = state.u.divergence();
    coeffs.a * grad2 + coeffs.b * div.mul(&div).integral()
}

pub fn quadratic_energy_series(times: &[f64], states: &[FluidState], coeffs: &LinearCoeffs) -> Vec<EnergyRecord> {
    accumulate(times, states, |s| Ok(quadratic_energy(s, coeffs)), |s| Ok(quadratic_dissipation_rate(s, coeffs)))
        .expect("quadratic energies do not fail")
}

/// Energy series matching the dynamics of `cfg`: the quadratic energy of the evolved variables
/// for runs with the nonlinearity muted, the full energy otherwise.
pub fn run_energy_series(cfg: &RunConfig, traj: &Trajectory) -> Result<Vec<EnergyRecord>> {
    if !cfg.mute_nonlinearity || cfg.variant == SystemVariant::Heat {
        return energy_series(traj, &cfg.params);
    }
    let coeffs = cfg.params.linear_coeffs()?;
    // The perturbation is the linearly evolved part; the other variants map linearly to (q, u).
    let states = if cfg.variant == SystemVariant::Perturbation { &traj.internal } else { &traj.snapshots };
    Ok(quadratic_energy_series(&traj.times, states, &coeffs))
}

#[derive(Clone, Debug, Serialize)]
pub struct DissipationVerdict {
    pub passed: bool,
    pub tolerance: f64,
    /// Largest `(total(t) + dissipated(t)) / total(0) - 1`.
    pub max_violation: f64,
    /// Whether the total energy ever increased between snapshots.
    pub energy_increase: bool,
    pub records: Vec<EnergyRecord>,
}

/// Checks `total(t) + dissipated(t) <= total(0) (1 + tol)` with `tol = 1e-3 + allowance`.
pub fn dissipation_check(traj: &Trajectory, params: &Params, allowance: f64) -> Result<DissipationVerdict> {
    if traj.len() < 3 {
        return Err(Error::InvalidArgument(format!("dissipation check needs at least 3 snapshots, got {}", traj.len())));
    }
    let records = energy_series(traj, params)?;
    Ok(dissipation_verdict(records, allowance))
}

/// [`dissipation_check`] with the energy matching the dynamics of `cfg`.
pub fn run_dissipation_check(cfg: &RunConfig, traj: &Trajectory, allowance: f64) -> Result<DissipationVerdict> {
    if traj.len() < 3 {
        return Err(Error::InvalidArgument(format!("dissipation check needs at least 3 snapshots, got {}", traj.len())));
    }
    Ok(dissipation_verdict(run_energy_series(cfg, traj)?, allowance))
}

/// Verdict on a precomputed energy series.
pub fn dissipation_verdict(records: Vec<EnergyRecord>, allowance: f64) -> DissipationVerdict {
    let tolerance = 1e-3 + allowance;
    let e0 = records[0].total;
    let scale = e0.abs().max(f64::MIN_POSITIVE);
    let max_violation = records.iter().map(|r| (r.total + r.viscous_dissipated - e0) / scale).fold(f64::NEG_INFINITY, f64::max);
    let energy_increase = records.windows(2).any(|w| w[1].total > w[0].total * (1.0 + 1e-12) + 1e-300);
    DissipationVerdict { passed: max_violation <= tolerance && !energy_increase, tolerance, max_violation, energy_increase, records }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingVerdict {
    pub lambda: u32,
    /// Sup over snapshots of `|rho_lambda(t, x) - rho(lambda^2 t, lambda x)|`.
    pub density_mismatch: f64,
    /// Sup over snapshots of `|u_lambda - lambda u| / sup |lambda u|`.
    pub velocity_mismatch: f64,
    pub snapshots: usize,
    pub passed: bool,
    pub tolerance: f64,
}

/// Rescaled copy of `cfg`: box `L / lambda`, same point count, pressure `lambda^2 P`, times `/ lambda^2`.
pub fn rescaled_config(cfg: &RunConfig, lambda: f64) -> RunConfig {
    let mut out = cfg.clone();
    out.grid.length /= lambda;
    out.params.pressure = match cfg.params.pressure {
        PressureLaw::Linear { k } => PressureLaw::Linear { k: k * lambda * lambda },
        PressureLaw::Gamma { a, gamma } => PressureLaw::Gamma { a: a * lambda * lambda, gamma },
    };
    out.stepper.dt /= lambda * lambda;
    out.stepper.horizon /= lambda * lambda;
    out
}

/// Runs `cfg` and its `lambda`-rescaled copy and compares them on the shared grid points.
pub fn scaling_invariance_check(cfg: &RunConfig, lambda_scale: u32, tolerance: f64) -> Result<ScalingVerdict> {
    if lambda_scale == 0 || !lambda_scale.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("lambda must be a power of two, got {lambda_scale}")));
    }
    cfg.validate()?;
    let lam = lambda_scale as f64;
    let scaled_cfg = rescaled_config(cfg, lam);
    scaled_cfg.validate()?;

    let base = prepare(cfg)?;
    let scaled = prepare(&scaled_cfg)?;
    // Same samples on the small box are the base data at lambda x; velocities carry a factor lambda.
    let grid = scaled.grid.clone();
    let phys0 = FluidState {
        q: base.physical0.q.with_grid(&grid)?,
        u: VectorField::new(base.physical0.u.components().iter().map(|c| c.with_grid(&grid).map(|f| f.scale(lam))).collect::<Result<_>>()?)?,
    };
    let internal0 = scaled.internal_from_physical(&phys0)?;
    let run_a = integrate(base.system.as_ref(), &base.internal0, &cfg.stepper)?;
    let run_b = integrate(scaled.system.as_ref(), &internal0, &scaled_cfg.stepper)?;
    if !run_a.completed() || !run_b.completed() || run_a.len() != run_b.len() {
        return Err(Error::NumericalAbort { time: run_a.last().map_or(0.0, |l| l.0), reason: "scaling runs did not complete".into() });
    }
    let mut dmax: f64 = 0.0;
    let mut umax: f64 = 0.0;
    for (a, b) in run_a.snapshots.iter().zip(&run_b.snapshots) {
        let ra = a.q.samples().iter().map(|v| v.exp());
        let rb = b.q.samples().iter().map(|v| v.exp());
        dmax = ra.zip(rb).fold(dmax, |m, (x, y)| m.max((x - y).abs()));
        let scale = a.u.linf_norm() * lam;
        if scale > 0.0 {
            let mut diff: f64 = 0.0;
            for (ca, cb) in a.u.components().iter().zip(b.u.components()) {
                diff = ca.samples().iter().zip(cb.samples()).fold(diff, |m, (x, y)| m.max((x * lam - y).abs()));
            }
            umax = umax.max(diff / scale);
        }
    }
    Ok(ScalingVerdict {
        lambda: lambda_scale,
        density_mismatch: dmax,
        velocity_mismatch: umax,
        snapshots: run_a.len(),
        passed: dmax.max(umax) <= tolerance,
        tolerance,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LinfSeries {
    pub times: Vec<f64>,
    pub rho_max: Vec<f64>,
    pub inv_rho_max: Vec<f64>,
    pub q_max: Vec<f64>,
    pub bound: Option<f64>,
    /// Whether `max(|rho|, |1/rho|)` exceeded `bound`.
    pub flagged: bool,
}

/// Per-snapshot `|rho|_inf`, `|1/rho|_inf` and `|q|_inf`.
pub fn linf_monitor(traj: &Trajectory, bound: Option<f64>) -> LinfSeries {
    let mut out = LinfSeries { times: traj.times.clone(), rho_max: vec![], inv_rho_max: vec![], q_max: vec![], bound, flagged: false };
    for s in &traj.snapshots {
        let (qmin, qmax) = (s.q.min(), s.q.max());
        out.rho_max.push(qmax.exp());
        out.inv_rho_max.push((-qmin).exp());
        out.q_max.push(s.q.linf_norm());
    }
    if let Some(b) = bound {
        out.flagged = out.rho_max.iter().chain(&out.inv_rho_max).any(|&v| v > b);
    }
    out
}

/// `max_t (|q(t)|_inf - |q0|_inf) / |(grad q0, u0)|_{B^{N/2-1}_{2,2}}`.
pub fn linf_fit_constant(traj: &Trajectory) -> Result<f64> {
    let first = traj.snapshots.first().ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    let grid: &Grid = first.grid();
    let partition = DyadicPartition::new(grid)?;
    let data = critical_data_norm(&partition, first, grid.dim());
    if data == 0.0 {
        return Ok(0.0);
    }
    let q0 = first.q.linf_norm();
    Ok(traj.snapshots.iter().map(|s| (s.q.linf_norm() - q0) / data).fold(0.0, f64::max))
}
