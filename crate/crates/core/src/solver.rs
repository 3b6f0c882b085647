//! Exponential time stepping around the exact linear flow, Picard iteration and the heat solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid;
use crate::linear::{vector_besov_norm, LinearOperator, ModeMap};
use crate::littlewood_paley::{time_lp, DyadicPartition};
use crate::model::{Evolution, VACUUM_FLOOR};
use crate::state::FluidState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExpEuler,
    #[default]
    ExpRk2,
    Picard,
}

fn default_picard_iters() -> usize {
    6
}

fn default_stride() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeStepperConfig {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_picard_iters")]
    pub picard_iters: usize,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
}

impl TimeStepperConfig {
    pub fn new(dt: f64, horizon: f64, scheme: Scheme) -> Self {
        Self { dt, horizon, scheme, picard_iters: default_picard_iters(), snapshot_stride: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt > 0 violated (dt = {})", self.dt)));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::InvalidParams(format!("T ≥ dt violated (T = {}, dt = {})", self.horizon, self.dt)));
        }
        if self.picard_iters < 1 {
            return Err(Error::InvalidParams("picard_iters ≥ 1 violated".into()));
        }
        if self.snapshot_stride < 1 {
            return Err(Error::InvalidParams("snapshot_stride ≥ 1 violated".into()));
        }
        Ok(())
    }

    /// Number of steps; the step is shortened so that they tile the horizon exactly.
    pub fn steps(&self) -> usize {
        ((self.horizon / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    pub fn effective_dt(&self) -> f64 {
        self.horizon / self.steps() as f64
    }
}

/// Precomputed mode maps for one step size.
pub struct ExpStepper {
    grid: Grid,
    h: f64,
    scheme: Scheme,
    exp: ModeMap,
    phi1: ModeMap,
    phi2: ModeMap,
}

impl ExpStepper {
    pub fn new(op: &LinearOperator, grid: &Grid, h: f64, scheme: Scheme) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
        }
        let [exp, phi1, phi2] = op.phi_maps(grid, h);
        Ok(Self { grid: grid.clone(), h, scheme, exp, phi1, phi2 })
    }

    pub fn dt(&self) -> f64 {
        self.h
    }

    /// `exp(hL) U + h phi1(hL) N`.
    fn euler(&self, u: &FluidState, n: &FluidState) -> FluidState {
        let g = &self.grid;
        self.exp.apply(g, u).add(&self.phi1.apply(g, n).scale(self.h))
    }

    /// One step from `(t, state)`.
    pub fn step(&self, system: &dyn Evolution, t: f64, state: &FluidState) -> Result<FluidState> {
        let n0 = system.nonlinear(t, state)?;
        let a = self.euler(state, &n0);
        match self.scheme {
            Scheme::ExpEuler => Ok(a),
            Scheme::ExpRk2 | Scheme::Picard => {
                let n1 = system.nonlinear(t + self.h, &a)?;
                let corr = self.phi2.apply(&self.grid, &n1.sub(&n0)).scale(self.h);
                Ok(a.add(&corr))
            }
        }
    }
}

/// Single exponential step; builds the mode maps on the fly.
pub fn step_exponential(system: &dyn Evolution, state: &FluidState, t: f64, dt: f64, scheme: Scheme) -> Result<FluidState> {
    let stepper = ExpStepper::new(&system.operator(), state.grid(), dt, scheme)?;
    let next = stepper.step(system, t, state)?;
    check_state(system, t + dt, &next)?;
    Ok(next)
}

fn check_state(system: &dyn Evolution, t: f64, state: &FluidState) -> Result<()> {
    if !state.is_finite() {
        return Err(Error::NumericalAbort { time: t, reason: "non-finite values".into() });
    }
    let phys = system.physical(t, state);
    let min_rho = phys.q.min().exp();
    if !(min_rho >= VACUUM_FLOOR) {
        return Err(Error::NumericalAbort { time: t, reason: format!("vacuum: min density {min_rho:e} below {VACUUM_FLOOR:e}") });
    }
    Ok(())
}

/// Largest step allowed by the transport condition `dt <= 0.25 dx / max|u|`.
pub fn cfl_limit(state: &FluidState) -> f64 {
    let umax = state.u.linf_norm();
    if umax == 0.0 {
        f64::INFINITY
    } else {
        0.25 * state.grid().spacing() / umax
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AbortRecord {
    pub time: f64,
    pub reason: String,
}

/// Time-ordered snapshots of one run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Physical `(ln rho, u)`.
    pub snapshots: Vec<FluidState>,
    /// Evolved variables of the system.
    pub internal: Vec<FluidState>,
    pub dt: f64,
    pub abort: Option<AbortRecord>,
}

impl Trajectory {
    pub fn new(dt: f64) -> Self {
        Self { times: Vec::new(), snapshots: Vec::new(), internal: Vec::new(), dt, abort: None }
    }

    pub fn push(&mut self, t: f64, physical: FluidState, internal: FluidState) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::UnsortedTimes);
            }
        }
        self.times.push(t);
        self.snapshots.push(physical);
        self.internal.push(internal);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &FluidState)> {
        self.times.last().map(|&t| (t, self.snapshots.last().unwrap()))
    }

    pub fn completed(&self) -> bool {
        self.abort.is_none()
    }
}

/// Integrates `system` from `state0` with an exponential scheme; aborts gracefully on vacuum,
/// non-finite values or a transport condition violation, keeping the last safe snapshot.
pub fn integrate(system: &dyn Evolution, state0: &FluidState, cfg: &TimeStepperConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let steps = cfg.steps();
    let h = cfg.effective_dt();
    let stepper = ExpStepper::new(&system.operator(), state0.grid(), h, cfg.scheme)?;
    let mut traj = Trajectory::new(h);
    check_state(system, 0.0, state0)?;
    traj.push(0.0, system.physical(0.0, state0), state0.clone())?;
    let mut state = state0.clone();
    for k in 0..steps {
        let t = k as f64 * h;
        let phys_now = system.physical(t, &state);
        if h > cfl_limit(&phys_now) {
            traj.abort = Some(AbortRecord { time: t, reason: format!("CFL violated: dt = {h:e} > {:e}", cfl_limit(&phys_now)) });
            break;
        }
        let next = match stepper.step(system, t, &state).and_then(|n| check_state(system, t + h, &n).map(|_| n)) {
            Ok(n) => n,
            Err(Error::NumericalAbort { time, reason }) => {
                traj.abort = Some(AbortRecord { time, reason });
                break;
            }
            Err(Error::Vacuum { min_density, floor }) => {
                traj.abort = Some(AbortRecord { time: t, reason: format!("vacuum: min density {min_density:e} below {floor:e}") });
                break;
            }
            Err(e) => return Err(e),
        };
        state = next;
        let t_next = (k + 1) as f64 * h;
        if (k + 1) % cfg.snapshot_stride == 0 || k + 1 == steps {
            traj.push(t_next, system.physical(t_next, &state), state.clone())?;
        }
    }
    Ok(traj)
}

/// Exact heat evolution of a positive density.
pub fn solve_heat(rho1_0: &SpectralField, mu: f64, t: f64) -> Result<SpectralField> {
    let min = rho1_0.min();
    if !(min >= VACUUM_FLOOR) {
        return Err(Error::Vacuum { min_density: min, floor: VACUUM_FLOOR });
    }
    if !(mu > 0.0) || !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("heat flow needs mu > 0 and t >= 0, got mu={mu}, t={t}")));
    }
    Ok(rho1_0.heat(mu, t))
}

/// Discrete analogue of the `F_T` norm on a time history.
pub fn ft_norm(partition: &DyadicPartition, times: &[f64], states: &[FluidState]) -> f64 {
    let n = partition.grid().dim() as f64;
    let r = f64::INFINITY;
    let mut sup: f64 = 0.0;
    let mut integrand = Vec::with_capacity(states.len());
    for st in states {
        let q = std::slice::from_ref(&st.q);
        let u = st.u.components();
        let low = vector_besov_norm(partition, q, n / 2.0, r) + vector_besov_norm(partition, u, n / 2.0 - 1.0, r);
        let high = vector_besov_norm(partition, q, n / 2.0 + 2.0, r) + vector_besov_norm(partition, u, n / 2.0 + 1.0, r);
        sup = sup.max(low);
        integrand.push(high);
    }
    let int = if times.len() > 1 { time_lp(times, &integrand, 1.0) } else { 0.0 };
    sup + int
}

#[derive(Clone, Debug, Serialize)]
pub struct PicardReport {
    pub times: Vec<f64>,
    /// `F_T` norm of the difference of consecutive iterates; entry `k` is `|U^{k+1} - U^k|`.
    pub differences: Vec<f64>,
    /// `r_n = |delta_n| / |delta_{n-1}|` for `n >= 2`.
    pub ratios: Vec<f64>,
    pub diverged: bool,
    #[serde(skip)]
    pub history: Vec<FluidState>,
}

impl PicardReport {
    pub fn final_state(&self) -> &FluidState {
        self.history.last().expect("history is never empty")
    }
}

/// Picard iteration of the mild formulation on the uniform grid `t_k = k h`.
///
/// Iterate 0 is the linear flow of the data; iterate `n` adds the Duhamel integral of the
/// nonlinearity along iterate `n - 1`, accumulated with a second-order exponential quadrature.
pub fn picard_solve(system: &dyn Evolution, state0: &FluidState, horizon: f64, dt: f64, n_iter: usize) -> Result<PicardReport> {
    let cfg = TimeStepperConfig { dt, horizon, scheme: Scheme::Picard, picard_iters: n_iter, snapshot_stride: 1 };
    cfg.validate()?;
    let grid = state0.grid().clone();
    let partition = DyadicPartition::new(&grid)?;
    let steps = cfg.steps();
    let h = cfg.effective_dt();
    let [exp, phi1, phi2] = system.operator().phi_maps(&grid, h);
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();

    let mut linear = Vec::with_capacity(steps + 1);
    linear.push(state0.clone());
    for k in 0..steps {
        let next = exp.apply(&grid, &linear[k]);
        linear.push(next);
    }

    let mut current = linear.clone();
    let mut differences = Vec::new();
    let mut ratios = Vec::new();
    let mut diverged = false;
    for _ in 0..n_iter {
        let forcing: Result<Vec<FluidState>> = times.iter().zip(&current).map(|(&t, s)| system.nonlinear(t, s)).collect();
        let forcing = match forcing {
            Ok(f) => f,
            Err(_) => {
                diverged = true;
                break;
            }
        };
        let mut next = Vec::with_capacity(steps + 1);
        let mut integral = FluidState::zeros(&grid);
        next.push(linear[0].clone());
        for k in 0..steps {
            let jump = forcing[k + 1].sub(&forcing[k]);
            integral = exp
                .apply(&grid, &integral)
                .add(&phi1.apply(&grid, &forcing[k]).scale(h))
                .add(&phi2.apply(&grid, &jump).scale(h));
            next.push(linear[k + 1].add(&integral));
        }
        let delta: Vec<FluidState> = next.iter().zip(&current).map(|(a, b)| a.sub(b)).collect();
        let d = ft_norm(&partition, &times, &delta);
        if let Some(&prev) = differences.last() {
            let r: f64 = if prev > 0.0 { d / prev } else { 0.0 };
            ratios.push(r);
            if !(r <= 2.0) {
                diverged = true;
            }
        }
        differences.push(d);
        current = next;
        if diverged || !current.iter().all(FluidState::is_finite) {
            diverged = true;
            break;
        }
    }
    Ok(PicardReport { times, differences, ratios, diverged, history: current })
}
