//! Wiring of configurations to systems, runs and on-disk artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{DiagnosticSpec, FieldSel, RunConfig};
use crate::diagnostics::{linf_monitor, run_energy_series};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid;
use crate::initial_data::split_quasi_solution;
use crate::io::encode_snapshot;
use crate::linear::{vector_besov_norm, LinearOperator};
use crate::littlewood_paley::{BesovSpec, DyadicPartition};
use crate::model::{effective_velocity, generator, log_density, Effective, Evolution, Nhv1, Perturbation, RhoForm, SystemVariant};
use crate::solver::{integrate, solve_heat, Trajectory};
use crate::state::FluidState;

/// Linear part of another system, with the nonlinearity dropped.
pub struct Muted(pub Box<dyn Evolution>);

impl Evolution for Muted {
    fn operator(&self) -> LinearOperator {
        self.0.operator()
    }
    fn rhs(&self, _t: f64, s: &FluidState) -> Result<FluidState> {
        let g = s.grid().clone();
        Ok(generator(&self.operator(), &g).apply(&g, s))
    }
    fn nonlinear(&self, _t: f64, s: &FluidState) -> Result<FluidState> {
        Ok(FluidState::zeros(s.grid()))
    }
    fn physical(&self, t: f64, s: &FluidState) -> FluidState {
        self.0.physical(t, s)
    }
}

/// A configuration turned into a system and its initial state.
pub struct Prepared {
    pub variant: SystemVariant,
    pub grid: Grid,
    pub system: Box<dyn Evolution>,
    pub physical0: FluidState,
    pub internal0: FluidState,
    pub background: Option<SpectralField>,
    mu: f64,
}

impl Prepared {
    /// Evolved variables carried by a physical state.
    pub fn internal_from_physical(&self, phys: &FluidState) -> Result<FluidState> {
        match self.variant {
            SystemVariant::Effective => FluidState::new(phys.q.clone(), effective_velocity(&phys.q, &phys.u, self.mu)),
            SystemVariant::Perturbation => {
                let bg = self.background.as_ref().expect("perturbation runs carry a background");
                let rho1 = SpectralField::from_samples(phys.q.grid(), bg.samples().to_vec())?;
                split_quasi_solution(phys, &rho1, self.mu)
            }
            _ => Ok(phys.clone()),
        }
    }
}

/// Builds the system and the initial state of `cfg`.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let data = cfg.data.build(&grid, cfg.seed, cfg.params.mu)?;
    let params = cfg.params.clone();
    let system: Box<dyn Evolution> = match cfg.variant {
        SystemVariant::Nhv1 | SystemVariant::Heat => Box::new(Nhv1 { params }),
        SystemVariant::RhoForm => Box::new(RhoForm { params }),
        SystemVariant::Effective => Box::new(Effective::new(params)?),
        SystemVariant::Perturbation => {
            let bg = data.background.clone().ok_or_else(|| Error::InvalidParams("perturbation runs need a background density".into()))?;
            Box::new(Perturbation::new(params, bg)?)
        }
    };
    let system: Box<dyn Evolution> = if cfg.mute_nonlinearity { Box::new(Muted(system)) } else { system };
    let mut prep = Prepared {
        variant: cfg.variant,
        grid,
        system,
        physical0: data.state.clone(),
        internal0: data.state.clone(),
        background: data.background,
        mu: cfg.params.mu,
    };
    prep.internal0 = prep.internal_from_physical(&data.state)?;
    Ok(prep)
}

/// Snapshots of the exact heat flow of `exp(q0)` and the matching quasi-solution velocity.
fn heat_trajectory(cfg: &RunConfig, prep: &Prepared) -> Result<Trajectory> {
    let rho0 = prep.physical0.q.map(f64::exp);
    let steps = cfg.stepper.steps();
    let h = cfg.stepper.effective_dt();
    let mut traj = Trajectory::new(h);
    let mu = cfg.params.mu;
    for k in 0..=steps {
        if k % cfg.stepper.snapshot_stride != 0 && k != steps {
            continue;
        }
        let t = k as f64 * h;
        let rho = solve_heat(&rho0, mu, t)?;
        let q = log_density(&rho);
        let u = q.gradient().scale(-mu);
        let s = FluidState::new(q, u)?;
        traj.push(t, s.clone(), s)?;
    }
    Ok(traj)
}

/// Named columns sampled at every snapshot.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DiagnosticTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DiagnosticTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i + 1]).collect())
    }
}

fn besov_column(partition: &DyadicPartition, state: &FluidState, field: FieldSel, spec: &BesovSpec) -> Result<f64> {
    match field {
        FieldSel::Q => partition.besov_norm(&state.q, spec),
        FieldSel::Rho => partition.besov_norm(&state.rho().add_constant(-1.0), spec),
        FieldSel::U => Ok(vector_besov_norm(partition, state.u.components(), spec.s, spec.r)),
    }
}

/// Evaluates the configured diagnostics on every snapshot.
pub fn diagnostic_table(cfg: &RunConfig, traj: &Trajectory) -> Result<DiagnosticTable> {
    let mut table = DiagnosticTable::default();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let grid = cfg.grid.build()?;
    let partition = DyadicPartition::new(&grid)?;
    for d in &cfg.diagnostics {
        match d {
            DiagnosticSpec::Besov { field, s, p, r } => {
                let spec = BesovSpec::new(*s, *p, *r);
                table.columns.push(format!("besov_{}[{}]", field.name(), spec.id().replace(',', ";")));
                cols.push(traj.snapshots.iter().map(|st| besov_column(&partition, st, *field, &spec)).collect::<Result<_>>()?);
            }
            DiagnosticSpec::Energy => {
                let e = run_energy_series(cfg, traj)?;
                for name in ["kinetic", "potential", "capillary", "viscous_dissipated", "total"] {
                    table.columns.push(format!("energy_{name}"));
                }
                cols.push(e.iter().map(|r| r.kinetic).collect());
                cols.push(e.iter().map(|r| r.potential).collect());
                cols.push(e.iter().map(|r| r.capillary).collect());
                cols.push(e.iter().map(|r| r.viscous_dissipated).collect());
                cols.push(e.iter().map(|r| r.total).collect());
            }
            DiagnosticSpec::Linf { bound } => {
                let m = linf_monitor(traj, *bound);
                table.columns.extend(["rho_max", "inv_rho_max", "q_max"].map(String::from));
                cols.push(m.rho_max);
                cols.push(m.inv_rho_max);
                cols.push(m.q_max);
            }
        }
    }
    table.rows = (0..traj.len()).map(|k| std::iter::once(traj.times[k]).chain(cols.iter().map(|c| c[k])).collect()).collect();
    Ok(table)
}

/// A finished (or aborted) run.
pub struct Simulation {
    pub config: RunConfig,
    pub trajectory: Trajectory,
    pub table: DiagnosticTable,
}

/// Runs `cfg`: builds the data, integrates and evaluates the diagnostics.
pub fn simulate(cfg: &RunConfig) -> Result<Simulation> {
    let prep = prepare(cfg)?;
    let trajectory = if cfg.variant == SystemVariant::Heat {
        heat_trajectory(cfg, &prep)?
    } else {
        integrate(prep.system.as_ref(), &prep.internal0, &cfg.stepper)?
    };
    let table = diagnostic_table(cfg, &trajectory)?;
    Ok(Simulation { config: cfg.clone(), trajectory, table })
}

/// Binary trajectory: magic `NSKT`, snapshot count, then for each snapshot its time and fields.
pub fn encode_trajectory(w: &mut impl Write, traj: &Trajectory) -> Result<()> {
    w.write_all(b"NSKT")?;
    w.write_all(&(traj.len() as u32).to_le_bytes())?;
    for (t, s) in traj.times.iter().zip(&traj.snapshots) {
        w.write_all(&t.to_le_bytes())?;
        let mut fields = vec![&s.q];
        fields.extend(s.u.components());
        encode_snapshot(w, &fields)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, T: Serialize> {
    pub program: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config_hash: Option<String>,
    pub config: Option<&'a RunConfig>,
    pub outputs: Vec<String>,
    pub result: T,
}

impl<'a, T: Serialize> Manifest<'a, T> {
    pub fn new(command: &'a str, config: Option<&'a RunConfig>, result: T) -> Self {
        Self {
            program: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_hash: config.map(RunConfig::hash),
            config,
            outputs: Vec::new(),
            result,
        }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("cannot create output directory {}: {e}", dir.display())))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub snapshots: usize,
    pub final_time: f64,
    pub completed: bool,
    pub abort: Option<crate::solver::AbortRecord>,
}

/// Writes `trajectory.bin`, `diagnostics.csv` and `manifest.json` into `dir`.
pub fn write_outputs(sim: &Simulation, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let traj_path = dir.join("trajectory.bin");
    let mut bytes = Vec::new();
    encode_trajectory(&mut bytes, &sim.trajectory)?;
    write_file(&traj_path, &bytes)?;
    let csv_path = dir.join("diagnostics.csv");
    write_file(&csv_path, sim.table.to_csv().as_bytes())?;
    let summary = RunSummary {
        snapshots: sim.trajectory.len(),
        final_time: sim.trajectory.last().map_or(0.0, |l| l.0),
        completed: sim.trajectory.completed(),
        abort: sim.trajectory.abort.clone(),
    };
    let mut manifest = Manifest::new("simulate", Some(&sim.config), summary);
    manifest.outputs = vec!["trajectory.bin".into(), "diagnostics.csv".into()];
    let man_path = dir.join("manifest.json");
    write_file(&man_path, serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?.as_bytes())?;
    Ok(vec![traj_path, csv_path, man_path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_data::DataSpec;
    use crate::linear::apply_semigroup;
    use crate::model::Params;
    use crate::solver::{Scheme, TimeStepperConfig};

    #[test]
    fn equilibrium_run_is_constant() {
        let mut cfg = RunConfig::default_small_data();
        cfg.data = DataSpec::Equilibrium;
        cfg.stepper = TimeStepperConfig::new(0.01, 0.05, Scheme::ExpRk2);
        let sim = simulate(&cfg).unwrap();
        assert!(sim.trajectory.snapshots.iter().all(|s| s.max_abs() == 0.0));
    }

    #[test]
    fn muted_run_matches_semigroup() {
        let mut cfg = RunConfig::default_small_data();
        cfg.mute_nonlinearity = true;
        cfg.stepper = TimeStepperConfig::new(0.02, 0.2, Scheme::ExpEuler);
        let sim = simulate(&cfg).unwrap();
        let coeffs = cfg.params.linear_coeffs().unwrap();
        let s0 = &sim.trajectory.snapshots[0];
        for (t, s) in sim.trajectory.times.iter().zip(&sim.trajectory.snapshots) {
            let exact = apply_semigroup(s0, *t, &coeffs).unwrap();
            assert!(s.sub(&exact).l2_norm() <= 1e-12 * exact.l2_norm());
        }
    }

    #[test]
    fn pressureless_quasi_solution_is_reproduced() {
        let mut cfg = RunConfig::default_small_data();
        cfg.variant = SystemVariant::Perturbation;
        cfg.params = Params::quasi_solution(0.5, 0.0);
        cfg.data = DataSpec::QuasiSolution {
            background: Box::new(DataSpec::GaussianBump { amplitude: 0.4, width: 0.8, center: None }),
            perturbation: 0.0,
            kmax: 3,
        };
        cfg.stepper = TimeStepperConfig::new(0.01, 0.2, Scheme::ExpRk2);
        let sim = simulate(&cfg).unwrap();
        let prep = prepare(&cfg).unwrap();
        let rho0 = prep.background.unwrap();
        for (t, s) in sim.trajectory.times.iter().zip(&sim.trajectory.snapshots) {
            let rho1 = solve_heat(&rho0, 0.5, *t).unwrap();
            let q = log_density(&rho1);
            let u = q.gradient().scale(-0.5);
            assert!(s.q.sub(&q).linf_norm() < 1e-7);
            assert!(s.u.sub(&u).linf_norm() < 1e-7);
        }
    }

    #[test]
    fn heat_variant_and_csv_determinism() {
        let mut cfg = RunConfig::default_small_data();
        cfg.variant = SystemVariant::Heat;
        cfg.data = DataSpec::GaussianBump { amplitude: 0.5, width: 0.6, center: None };
        cfg.stepper = TimeStepperConfig::new(0.02, 0.2, Scheme::ExpRk2);
        let a = simulate(&cfg).unwrap();
        let m = a.table.column("rho_max").unwrap();
        assert!(m.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let b = simulate(&cfg).unwrap();
        assert_eq!(a.table.to_csv(), b.table.to_csv());
    }

    #[test]
    fn writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::default_small_data();
        cfg.stepper = TimeStepperConfig::new(0.02, 0.06, Scheme::ExpRk2);
        let sim = simulate(&cfg).unwrap();
        let files = write_outputs(&sim, dir.path()).unwrap();
        assert!(files.iter().all(|f| f.exists()));
        let man: serde_json::Value = serde_json::from_slice(&fs::read(&files[2]).unwrap()).unwrap();
        assert_eq!(man["config_hash"].as_str().unwrap(), cfg.hash());
    }
}
