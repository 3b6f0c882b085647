//! Physical parameters, pressure laws, the capillary tensor and right-hand sides of every system.
//!
//! Throughout, the strain is `D(u) = (grad u + grad u^T) / 2` and `D(u) g` denotes the
//! vector `sum_j D_ij g_j`. All products are followed by the 2/3 rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{SpectralField, VectorField};
use crate::linear::{LinearCoeffs, LinearOperator};
use crate::quadrature::CompositeRule;
use crate::state::FluidState;

/// Hard floor on the density below which a run is aborted.
pub const VACUUM_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CapillarityForm {
    /// `kappa(rho) = kappa`.
    Constant,
    /// `kappa(rho) = kappa / rho`.
    #[default]
    InverseDensity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ViscosityForm {
    /// `mu(rho) = mu`, `lambda(rho) = lambda`.
    Constant,
    /// `mu(rho) = mu rho`, `lambda(rho) = lambda rho`.
    #[default]
    ShallowWater,
}

/// Barotropic pressure law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PressureLaw {
    /// `P(rho) = k rho`; `k = 0` is the pressureless case.
    Linear { k: f64 },
    /// `P(rho) = a rho^gamma`.
    Gamma { a: f64, gamma: f64 },
}

impl Default for PressureLaw {
    fn default() -> Self {
        PressureLaw::Linear { k: 1.0 }
    }
}

/// `P`, the energy potential `Pi` and the log-pressure potential `F` at one density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PressureValues {
    pub p: f64,
    pub pi: f64,
    pub f: f64,
}

impl PressureLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PressureLaw::Linear { k } if !(k >= 0.0 && k.is_finite()) => {
                Err(Error::InvalidParams(format!("pressure constant must be non-negative, got {k}")))
            }
            PressureLaw::Gamma { a, gamma } if !(a > 0.0 && gamma > 0.0 && a.is_finite() && gamma.is_finite()) => {
                Err(Error::InvalidParams(format!("gamma law needs a > 0 and gamma > 0, got a={a}, gamma={gamma}")))
            }
            _ => Ok(()),
        }
    }

    pub fn pressure(&self, s: f64) -> f64 {
        match *self {
            PressureLaw::Linear { k } => k * s,
            PressureLaw::Gamma { a, gamma } => a * s.powf(gamma),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            PressureLaw::Linear { k } => k,
            PressureLaw::Gamma { a, gamma } => a * gamma * s.powf(gamma - 1.0),
        }
    }

    /// `P'(1)`, the stiffness of the linearized system.
    pub fn stiffness(&self) -> f64 {
        self.derivative(1.0)
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, PressureLaw::Linear { .. })
    }

    /// `Pi(s) = s (int_1^s P(z)/z^2 dz - P(1))`.
    pub fn energy_potential(&self, s: f64) -> f64 {
        match *self {
            PressureLaw::Linear { k } => k * (s * s.ln() - s),
            PressureLaw::Gamma { .. } => s * (integrate_from_one(s, |z| self.pressure(z) / (z * z)) - self.pressure(1.0)),
        }
    }

    /// `F(s) = int_1^s P'(z)/z dz`, so that `grad F(rho) = grad P(rho) / rho`.
    pub fn log_potential(&self, s: f64) -> f64 {
        match *self {
            PressureLaw::Linear { k } => k * s.ln(),
            PressureLaw::Gamma { .. } => integrate_from_one(s, |z| self.derivative(z) / z),
        }
    }

    pub fn eval(&self, s: f64) -> Result<PressureValues> {
        if !(s > 0.0) {
            return Err(Error::InvalidArgument(format!("density must be positive, got {s}")));
        }
        Ok(PressureValues { p: self.pressure(s), pi: self.energy_potential(s), f: self.log_potential(s) })
    }
}

fn integrate_from_one(s: f64, f: impl Fn(f64) -> f64) -> f64 {
    if s == 1.0 {
        return 0.0;
    }
    // Integrate in log z so that wide ranges stay well resolved.
    let end = s.ln();
    let panels = ((end.abs() * 4.0).ceil() as usize).max(2);
    CompositeRule::new(0.0, end, panels, 16).integrate(|t| {
        let z = t.exp();
        f(z) * z
    })
}

/// Evaluates `(P, Pi, F)` at density `s`.
pub fn pressure_eval(law: &PressureLaw, s: f64) -> Result<PressureValues> {
    law.eval(s)
}

/// Physical coefficients and constitutive selectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub mu: f64,
    pub lambda: f64,
    pub kappa: f64,
    #[serde(default)]
    pub capillarity_form: CapillarityForm,
    #[serde(default)]
    pub viscosity_form: ViscosityForm,
    #[serde(default)]
    pub pressure: PressureLaw,
}

impl Params {
    pub fn new(mu: f64, lambda: f64, kappa: f64, pressure: PressureLaw) -> Self {
        Self {
            mu,
            lambda,
            kappa,
            capillarity_form: CapillarityForm::InverseDensity,
            viscosity_form: ViscosityForm::ShallowWater,
            pressure,
        }
    }

    /// The regime in which the effective velocity and quasi-solutions exist:
    /// `kappa = mu^2`, `lambda = 0`.
    pub fn quasi_solution(mu: f64, k: f64) -> Self {
        Self::new(mu, 0.0, mu * mu, PressureLaw::Linear { k })
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParams(format!("μ>0 violated (μ = {})", self.mu)));
        }
        if !self.lambda.is_finite() || !(2.0 * self.mu + self.lambda > 0.0) {
            return Err(Error::InvalidParams(format!(
                "2μ+λ>0 violated (μ = {}, λ = {})",
                self.mu, self.lambda
            )));
        }
        if !(2.0 * self.mu + dim as f64 * self.lambda >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "2μ+Nλ≥0 violated (μ = {}, λ = {}, N = {dim})",
                self.mu, self.lambda
            )));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParams(format!("κ>0 violated (κ = {})", self.kappa)));
        }
        self.pressure.validate()
    }

    /// Whether `kappa = mu^2` and `lambda = 0` hold (to relative rounding).
    pub fn in_quasi_solution_regime(&self) -> bool {
        self.lambda == 0.0 && (self.kappa - self.mu * self.mu).abs() <= 1e-12 * self.kappa
    }

    fn require_quasi_solution_regime(&self) -> Result<()> {
        if !self.in_quasi_solution_regime() {
            return Err(Error::Regime(format!(
                "requires κ = μ² and λ = 0 (μ = {}, λ = {}, κ = {})",
                self.mu, self.lambda, self.kappa
            )));
        }
        Ok(())
    }

    /// Coefficients of the system linearized at `rho = 1, u = 0`.
    pub fn linear_coeffs(&self) -> Result<LinearCoeffs> {
        LinearCoeffs::from_physical(self.mu, self.lambda, self.kappa, self.pressure.stiffness())
    }

    /// `kappa(rho)`.
    pub fn capillarity(&self, rho: &SpectralField) -> SpectralField {
        match self.capillarity_form {
            CapillarityForm::Constant => SpectralField::constant(rho.grid(), self.kappa),
            CapillarityForm::InverseDensity => rho.map(|r| self.kappa / r),
        }
    }

    /// `(mu(rho), lambda(rho))`.
    pub fn viscosities(&self, rho: &SpectralField) -> (SpectralField, SpectralField) {
        match self.viscosity_form {
            ViscosityForm::Constant => (SpectralField::constant(rho.grid(), self.mu), SpectralField::constant(rho.grid(), self.lambda)),
            ViscosityForm::ShallowWater => (rho.scale(self.mu), rho.scale(self.lambda)),
        }
    }

    /// `kappa(rho) + rho kappa'(rho)`.
    fn kappa_plus(&self, rho: &SpectralField) -> SpectralField {
        match self.capillarity_form {
            CapillarityForm::Constant => SpectralField::constant(rho.grid(), self.kappa),
            CapillarityForm::InverseDensity => SpectralField::zeros(rho.grid()),
        }
    }
}

/// `ln rho`, projected onto the dealiased modes.
pub fn log_density(rho: &SpectralField) -> SpectralField {
    rho.map(f64::ln).dealias()
}

fn check_vacuum(rho: &SpectralField) -> Result<()> {
    let min = rho.min();
    if !(min >= VACUUM_FLOOR) {
        return Err(Error::Vacuum { min_density: min, floor: VACUUM_FLOOR });
    }
    Ok(())
}

/// `sum_j d_j (a_j b)` for a tensor given as `a_j * b_i` rows: here `div(w (x) g)` with `w_i g_j`.
fn div_outer(w: &VectorField, g: &VectorField, weight: Option<&SpectralField>) -> VectorField {
    let dim = w.dim();
    let comps = (0..dim)
        .map(|i| {
            let mut acc = SpectralField::zeros(w.grid());
            for j in 0..dim {
                let mut t = w.component(i).product(g.component(j));
                if let Some(c) = weight {
                    t = t.product(c);
                }
                acc = acc.add(&t.derivative(j));
            }
            acc
        })
        .collect();
    VectorField::from_components_unchecked(comps)
}

/// Hessian entries `d_i d_j f`, row-major.
fn hessian(f: &SpectralField) -> Vec<Vec<SpectralField>> {
    let dim = f.grid().dim();
    let g = f.gradient();
    (0..dim).map(|i| (0..dim).map(|j| g.component(i).derivative(j)).collect()).collect()
}

/// `div K` from the defining formula for the capillarity law selected in `params`.
pub fn div_k_general(rho: &SpectralField, params: &Params) -> Result<VectorField> {
    check_vacuum(rho)?;
    let grad = rho.gradient();
    let kap = params.capillarity(rho);
    let scalar = rho
        .product(&kap)
        .product(&rho.laplacian())
        .add(&params.kappa_plus(rho).product(&grad.norm_squared().dealias()).scale(0.5));
    let first = scalar.gradient();
    let second = div_outer(&grad, &grad, Some(&kap));
    Ok(first.sub(&second))
}

/// `div K = kappa rho (grad Lap ln rho + grad |grad ln rho|^2 / 2)`, valid for `kappa(rho) = kappa / rho`.
pub fn div_k_log(rho: &SpectralField, kappa: f64) -> Result<VectorField> {
    check_vacuum(rho)?;
    let q = log_density(rho);
    let gq = q.gradient();
    let inner = q.laplacian().add(&gq.norm_squared().dealias().scale(0.5));
    Ok(inner.gradient().map_components(|c| c.product(rho).scale(kappa)))
}

/// `div K = kappa div(rho grad grad ln rho)`, valid for `kappa(rho) = kappa / rho`.
pub fn div_k_viscous(rho: &SpectralField, kappa: f64) -> Result<VectorField> {
    check_vacuum(rho)?;
    let q = log_density(rho);
    let h = hessian(&q);
    let dim = rho.grid().dim();
    let comps = (0..dim)
        .map(|j| {
            let mut acc = SpectralField::zeros(rho.grid());
            for (i, row) in h.iter().enumerate() {
                acc = acc.add(&rho.product(&row[j]).derivative(i));
            }
            acc.scale(kappa)
        })
        .collect();
    Ok(VectorField::from_components_unchecked(comps))
}

/// `D(u) g` with the symmetric strain.
pub fn strain_apply(u: &VectorField, g: &VectorField) -> VectorField {
    let dim = u.dim();
    let comps = (0..dim)
        .map(|i| {
            let mut acc = SpectralField::zeros(u.grid());
            for j in 0..dim {
                let dij = u.component(j).derivative(i).add(&u.component(i).derivative(j));
                acc = acc.add(&dij.product(g.component(j)));
            }
            acc.scale(0.5)
        })
        .collect();
    VectorField::from_components_unchecked(comps)
}

/// `(w . grad) v`, dealiased.
pub fn directional(w: &VectorField, v: &VectorField) -> VectorField {
    v.map_components(|c| w.advect(c).dealias())
}

/// `w . grad f`, dealiased.
pub fn transport(w: &VectorField, f: &SpectralField) -> SpectralField {
    w.advect(f).dealias()
}

/// `grad F(rho)` with `rho = exp(q)`.
fn grad_log_pressure(q: &SpectralField, law: &PressureLaw) -> VectorField {
    match *law {
        PressureLaw::Linear { k } => q.gradient().scale(k),
        PressureLaw::Gamma { .. } => q.map(|v| law.log_potential(v.exp())).dealias().gradient(),
    }
}

/// Right-hand side of the log-density system with shallow-water viscosities.
pub fn rhs_nhv1(q: &SpectralField, u: &VectorField, params: &Params) -> Result<FluidState> {
    let (mu, lambda, kappa) = (params.mu, params.lambda, params.kappa);
    let gq = q.gradient();
    let div = u.divergence();
    let dq = transport(u, q).add(&div).scale(-1.0);
    let du = directional(u, u)
        .scale(-1.0)
        .add(&u.laplacian().scale(mu))
        .add(&strain_apply(u, &gq).scale(2.0 * mu))
        .add(&div.gradient().scale(lambda + mu))
        .add(&gq.map_components(|c| c.product(&div)).scale(lambda))
        .sub(&grad_log_pressure(q, &params.pressure))
        .add(&q.laplacian().gradient().scale(kappa))
        .add(&gq.norm_squared().dealias().gradient().scale(0.5 * kappa));
    FluidState::new(dq, du)
}

/// Right-hand side of the conservative density system, written for the unknowns `(ln rho, u)`.
pub fn rhs_rho_form(q: &SpectralField, u: &VectorField, params: &Params) -> Result<FluidState> {
    let rho = q.map(f64::exp).dealias();
    check_vacuum(&rho)?;
    let inv = q.map(|v| (-v).exp()).dealias();
    let mass_flux = u.mul_scalar(&rho).dealias();
    let drho = mass_flux.divergence().scale(-1.0);
    let dq = drho.product(&inv);

    let (mu_r, lambda_r) = params.viscosities(&rho);
    let dim = u.dim();
    let grads: Vec<VectorField> = u.components().iter().map(|c| c.gradient()).collect();
    let viscous = VectorField::from_components_unchecked(
        (0..dim)
            .map(|i| {
                let mut acc = SpectralField::zeros(q.grid());
                for j in 0..dim {
                    // 2 D_ij = d_j u_i + d_i u_j
                    let two_d = grads[i].component(j).add(grads[j].component(i));
                    acc = acc.add(&mu_r.product(&two_d).derivative(j));
                }
                acc
            })
            .collect(),
    );
    let bulk = lambda_r.product(&u.divergence()).gradient();
    let pressure = rho.map(|r| params.pressure.pressure(r)).dealias().gradient();
    let capillary = div_k_general(&rho, params)?;
    let force = viscous.add(&bulk).sub(&pressure).add(&capillary);
    let du = directional(u, u).scale(-1.0).add(&force.map_components(|c| c.product(&inv)));
    FluidState::new(dq, du)
}

/// `v = u + mu grad q`.
pub fn effective_velocity(q: &SpectralField, u: &VectorField, mu: f64) -> VectorField {
    u.add(&q.gradient().scale(mu))
}

/// `u = v - mu grad q`.
pub fn physical_velocity(q: &SpectralField, v: &VectorField, mu: f64) -> VectorField {
    v.sub(&q.gradient().scale(mu))
}

/// Right-hand side of the effective-velocity system in `(q, v)`.
pub fn rhs_effective(q: &SpectralField, v: &VectorField, params: &Params) -> Result<FluidState> {
    params.require_quasi_solution_regime()?;
    let mu = params.mu;
    let gq = q.gradient();
    let u = physical_velocity(q, v, mu);
    let dq = q
        .laplacian()
        .scale(mu)
        .sub(&transport(v, q))
        .sub(&v.divergence())
        .add(&gq.norm_squared().dealias().scale(mu));
    let dv = directional(&u, v)
        .scale(-1.0)
        .add(&v.laplacian().scale(mu))
        .add(&directional(&gq, v).scale(mu))
        .sub(&grad_log_pressure(q, &params.pressure));
    FluidState::new(dq, dv)
}

/// Right-hand side of the perturbation `(h2, u2)` around the quasi-solution built on `rho1`.
pub fn rhs_perturbation(h2: &SpectralField, u2: &VectorField, rho1: &SpectralField, params: &Params) -> Result<FluidState> {
    params.require_quasi_solution_regime()?;
    check_vacuum(rho1)?;
    let k = match params.pressure {
        PressureLaw::Linear { k } => k,
        PressureLaw::Gamma { .. } => {
            return Err(Error::Regime("the perturbation system is stated for a linear pressure law".into()))
        }
    };
    let mu = params.mu;
    let mu2 = mu * mu;
    let g = log_density(rho1);
    let gg = g.gradient();
    let u1 = gg.scale(-mu);
    let gh = h2.gradient();

    let source_h = transport(u2, h2).scale(-1.0);
    let dh = u2
        .divergence()
        .scale(-1.0)
        .add(&gg.dot(&gh).dealias().scale(mu))
        .sub(&transport(u2, &g))
        .add(&source_h);

    let source_u = directional(u2, u2)
        .scale(-1.0)
        .add(&strain_apply(u2, &gh).scale(2.0 * mu))
        .sub(&gg.scale(k))
        .add(&gh.norm_squared().dealias().gradient().scale(0.5 * mu2));
    let du = u2
        .laplacian()
        .scale(mu)
        .add(&u2.divergence().gradient().scale(mu))
        .add(&h2.laplacian().gradient().scale(mu2))
        .sub(&gh.scale(k))
        .add(&strain_apply(u2, &gg).scale(2.0 * mu))
        .add(&strain_apply(&u1, &gh).scale(2.0 * mu))
        .sub(&directional(&u1, u2))
        .sub(&directional(u2, &u1))
        .add(&gg.dot(&gh).dealias().gradient().scale(mu2))
        .add(&source_u);
    FluidState::new(dh, du)
}

/// Residuals of the quasi-solution `(rho1, -mu grad ln rho1)` with `d rho1/dt = mu Lap rho1`.
#[derive(Clone, Debug, Serialize)]
pub struct QuasiResidual {
    /// Residual of the `(rho, v)` system at `v = u + mu grad ln rho`.
    pub effective_l2: f64,
    /// Mass equation of the conservative density system.
    pub mass_l2: f64,
    pub mass_linf: f64,
    /// Momentum equation of the conservative density system.
    pub momentum_l2: f64,
    pub momentum_linf: f64,
    /// `L^2` size of the largest individual momentum term.
    pub scale: f64,
    /// Largest residual divided by `scale`.
    pub relative: f64,
}

/// Momentum residual `rho (du/dt + u.grad u) - div(2 mu rho D u) + grad P - div K` at the quasi-solution,
/// with `kappa(rho) = mu^2 / rho`, `lambda = 0` and `P = k rho`.
pub fn quasi_solution_momentum_residual(rho1: &SpectralField, mu: f64, k: f64) -> Result<(VectorField, f64)> {
    check_vacuum(rho1)?;
    let params = Params::quasi_solution(mu, k);
    let q = log_density(rho1);
    let u = q.gradient().scale(-mu);
    let rho_t = rho1.laplacian().scale(mu);
    let inv = rho1.map(|r| 1.0 / r).dealias();
    let u_t = rho_t.product(&inv).gradient().scale(-mu);
    let inertia = u_t.add(&directional(&u, &u)).map_components(|c| c.product(rho1));
    let dim = u.dim();
    let grads: Vec<VectorField> = u.components().iter().map(|c| c.gradient()).collect();
    let viscous = VectorField::from_components_unchecked(
        (0..dim)
            .map(|i| {
                let mut acc = SpectralField::zeros(rho1.grid());
                for j in 0..dim {
                    let two_d = grads[i].component(j).add(grads[j].component(i));
                    acc = acc.add(&rho1.product(&two_d).scale(mu).derivative(j));
                }
                acc
            })
            .collect(),
    );
    let pressure = rho1.gradient().scale(k);
    let capillary = div_k_general(rho1, &params)?;
    let scale = [inertia.l2_norm(), viscous.l2_norm(), capillary.l2_norm()].into_iter().fold(0.0, f64::max);
    Ok((inertia.sub(&viscous).add(&pressure).sub(&capillary), scale))
}

/// Evaluates the pressureless quasi-solution residuals.
pub fn quasi_solution_residual(rho1: &SpectralField, mu: f64) -> Result<QuasiResidual> {
    check_vacuum(rho1)?;
    let q = log_density(rho1);
    let u = q.gradient().scale(-mu);
    let rho_t = rho1.laplacian().scale(mu);

    // (rho, v) form: rho_t - mu Lap rho + div(rho v) and rho (v_t + u.grad v) - div(mu rho grad v).
    let v = effective_velocity(&q, &u, mu);
    let eff_mass = rho_t.sub(&rho1.laplacian().scale(mu)).add(&v.mul_scalar(rho1).dealias().divergence());
    let eff = eff_mass.l2_norm().max(v.l2_norm());

    let mass = rho_t.add(&u.mul_scalar(rho1).dealias().divergence());
    let (momentum, scale) = quasi_solution_momentum_residual(rho1, mu, 0.0)?;
    let mass_scale = rho_t.l2_norm().max(f64::MIN_POSITIVE);
    let scale = scale.max(f64::MIN_POSITIVE);
    let relative = (mass.l2_norm() / mass_scale).max(momentum.l2_norm() / scale).max(eff / mass_scale);
    Ok(QuasiResidual {
        effective_l2: eff,
        mass_l2: mass.l2_norm(),
        mass_linf: mass.linf_norm(),
        momentum_l2: momentum.l2_norm(),
        momentum_linf: momentum.linf_norm(),
        scale,
        relative,
    })
}

/// Which set of equations a run integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemVariant {
    RhoForm,
    Nhv1,
    Effective,
    Perturbation,
    Heat,
}

/// A semilinear system `dU/dt = L U + N(t, U)` with `L` diagonal in Fourier space.
pub trait Evolution: Sync {
    fn operator(&self) -> LinearOperator;
    /// Full right-hand side at time `t`.
    fn rhs(&self, t: f64, state: &FluidState) -> Result<FluidState>;
    /// The physical state `(ln rho, u)` carried by the evolved variables at time `t`.
    fn physical(&self, _t: f64, state: &FluidState) -> FluidState {
        state.clone()
    }
    /// `N(t, U) = rhs - L U`.
    fn nonlinear(&self, t: f64, state: &FluidState) -> Result<FluidState> {
        let grid = state.grid().clone();
        let lin = generator(&self.operator(), &grid).apply(&grid, state);
        Ok(self.rhs(t, state)?.sub(&lin))
    }
}

/// The generator `L` as a per-shell map.
pub fn generator(op: &LinearOperator, grid: &crate::grid::Grid) -> crate::linear::ModeMap {
    crate::linear::ModeMap {
        pot: grid.shells().iter().map(|&s| op.potential_symbol(s)).collect(),
        rot: grid.shells().iter().map(|&s| -op.rotational * s).collect(),
    }
}

fn physical_operator(params: &Params) -> LinearOperator {
    LinearOperator {
        q_diffusion: 0.0,
        capillarity: params.kappa,
        stiffness: params.pressure.stiffness(),
        nu: 2.0 * params.mu + params.lambda,
        rotational: params.mu,
    }
}

/// Log-density system with shallow-water viscosities.
pub struct Nhv1 {
    pub params: Params,
}

impl Evolution for Nhv1 {
    fn operator(&self) -> LinearOperator {
        physical_operator(&self.params)
    }
    fn rhs(&self, _t: f64, s: &FluidState) -> Result<FluidState> {
        rhs_nhv1(&s.q, &s.u, &self.params)
    }
}

/// Conservative density system carried in `(ln rho, u)`.
pub struct RhoForm {
    pub params: Params,
}

impl Evolution for RhoForm {
    fn operator(&self) -> LinearOperator {
        physical_operator(&self.params)
    }
    fn rhs(&self, _t: f64, s: &FluidState) -> Result<FluidState> {
        rhs_rho_form(&s.q, &s.u, &self.params)
    }
}

/// Effective-velocity system in `(q, v)`.
pub struct Effective {
    pub params: Params,
}

impl Effective {
    pub fn new(params: Params) -> Result<Self> {
        params.require_quasi_solution_regime()?;
        Ok(Self { params })
    }
}

impl Evolution for Effective {
    fn operator(&self) -> LinearOperator {
        LinearOperator {
            q_diffusion: self.params.mu,
            capillarity: 0.0,
            stiffness: self.params.pressure.stiffness(),
            nu: self.params.mu,
            rotational: self.params.mu,
        }
    }
    fn rhs(&self, _t: f64, s: &FluidState) -> Result<FluidState> {
        rhs_effective(&s.q, &s.u, &self.params)
    }
    fn physical(&self, _t: f64, s: &FluidState) -> FluidState {
        FluidState { q: s.q.clone(), u: physical_velocity(&s.q, &s.u, self.params.mu) }
    }
}

/// Perturbation around the quasi-solution whose density solves the heat equation from `rho1_0`.
pub struct Perturbation {
    pub params: Params,
    pub rho1_0: SpectralField,
}

impl Perturbation {
    pub fn new(params: Params, rho1_0: SpectralField) -> Result<Self> {
        params.require_quasi_solution_regime()?;
        check_vacuum(&rho1_0)?;
        Ok(Self { params, rho1_0 })
    }

    pub fn background(&self, t: f64) -> SpectralField {
        self.rho1_0.heat(self.params.mu, t)
    }
}

impl Evolution for Perturbation {
    fn operator(&self) -> LinearOperator {
        physical_operator(&self.params)
    }
    fn rhs(&self, t: f64, s: &FluidState) -> Result<FluidState> {
        rhs_perturbation(&s.q, &s.u, &self.background(t), &self.params)
    }
    fn physical(&self, t: f64, s: &FluidState) -> FluidState {
        let g = log_density(&self.background(t));
        let u1 = g.gradient().scale(-self.params.mu);
        FluidState { q: g.add(&s.q), u: u1.add(&s.u) }
    }
}

/// The linearized system alone (nonlinearity muted).
pub struct Linearized {
    pub op: LinearOperator,
}

impl Evolution for Linearized {
    fn operator(&self) -> LinearOperator {
        self.op
    }
    fn rhs(&self, _t: f64, s: &FluidState) -> Result<FluidState> {
        let g = s.grid().clone();
        Ok(generator(&self.op, &g).apply(&g, s))
    }
    fn nonlinear(&self, _t: f64, s: &FluidState) -> Result<FluidState> {
        Ok(FluidState::zeros(s.grid()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{E, PI};

    fn smooth(grid: &Grid, kmax: i64, amp: f64, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<Complex64> = (0..grid.len())
            .map(|i| {
                let k = grid.mode(i);
                let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                if k2 > 0 && k2 <= kmax * kmax {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let f = SpectralField::from_coeffs(grid, c).unwrap();
        let m = f.linf_norm();
        f.scale(amp / m)
    }

    fn small_state(grid: &Grid, amp: f64, seed: u64) -> FluidState {
        let q = smooth(grid, 4, amp, seed);
        let u = VectorField::new((0..grid.dim()).map(|a| smooth(grid, 4, amp, seed + 10 + a as u64)).collect()).unwrap();
        FluidState::new(q, u).unwrap()
    }

    fn rel(a: &VectorField, b: &VectorField) -> f64 {
        a.sub(b).l2_norm() / b.l2_norm().max(1e-300)
    }

    #[test]
    fn pressure_reference_values() {
        let law = PressureLaw::Linear { k: 2.5 };
        let one = law.eval(1.0).unwrap();
        let e = law.eval(E).unwrap();
        assert!((e.pi - one.pi - 2.5).abs() < 1e-12);
        assert_eq!(one.f, 0.0);
        assert!(law.eval(0.0).is_err());
        assert!(law.eval(-1.0).is_err());
    }

    #[test]
    fn gamma_law_quadrature_matches_closed_form() {
        let (a, gamma) = (1.3, 1.4);
        let law = PressureLaw::Gamma { a, gamma };
        for &s in &[0.2, 0.9, 1.0, 1.7, 5.0] {
            let v = law.eval(s).unwrap();
            let pi = s * (a * (s.powf(gamma - 1.0) - 1.0) / (gamma - 1.0) - a);
            let f = a * gamma * (s.powf(gamma - 1.0) - 1.0) / (gamma - 1.0);
            assert!((v.pi - pi).abs() < 1e-12 * (1.0 + pi.abs()));
            assert!((v.f - f).abs() < 1e-12 * (1.0 + f.abs()));
        }
    }

    #[test]
    fn energy_potential_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for law in [PressureLaw::Linear { k: 0.7 }, PressureLaw::Gamma { a: 2.0, gamma: 1.4 }, PressureLaw::Gamma { a: 0.5, gamma: 3.0 }] {
            for _ in 0..20 {
                let s: f64 = rng.gen_range(0.3..3.0);
                // Richardson-extrapolated central difference.
                let d = |h: f64| (law.energy_potential(s + h) - law.energy_potential(s - h)) / (2.0 * h);
                let h = 1e-3;
                let dpi = (4.0 * d(h / 2.0) - d(h)) / 3.0;
                let p = law.pressure(s);
                assert!((s * dpi - law.energy_potential(s) - p).abs() <= 1e-10 * p.abs().max(1.0));
            }
            let d1 = (law.energy_potential(1.0 + 1e-5) - law.energy_potential(1.0 - 1e-5)) / 2e-5;
            assert!(d1.abs() < 1e-9);
        }
    }

    #[test]
    fn params_validation() {
        let mut p = Params::new(1.0, -3.0, 1.0, PressureLaw::Linear { k: 1.0 });
        let e = p.validate(2).unwrap_err().to_string();
        assert!(e.contains("2μ+λ>0 violated"), "{e}");
        p.lambda = -1.5;
        assert!(p.validate(2).unwrap_err().to_string().contains("2μ+Nλ≥0"));
        assert!(p.validate(1).is_ok());
        p.lambda = 0.0;
        p.kappa = 0.0;
        assert!(p.validate(2).is_err());
        assert!(Params::quasi_solution(0.8, 1.0).in_quasi_solution_regime());
    }

    #[test]
    fn capillary_tensor_forms_agree() {
        for dim in 1..=2 {
            let g = Grid::new(dim, 64, 2.0 * PI).unwrap();
            let rho = smooth(&g, 2, 0.2, 3).add_constant(1.0);
            let p = Params::new(1.0, 0.0, 0.6, PressureLaw::Linear { k: 1.0 });
            let a = div_k_general(&rho, &p).unwrap();
            let b = div_k_log(&rho, 0.6).unwrap();
            let c = div_k_viscous(&rho, 0.6).unwrap();
            assert!(rel(&a, &b) < 1e-8, "{}", rel(&a, &b));
            assert!(rel(&c, &b) < 1e-8, "{}", rel(&c, &b));
            let pc = Params { capillarity_form: CapillarityForm::Constant, ..p };
            let k = div_k_general(&rho, &pc).unwrap();
            let reduced = rho.laplacian().gradient().map_components(|f| f.product(&rho).scale(0.6));
            assert!(rel(&k, &reduced) < 1e-8);
        }
    }

    #[test]
    fn capillary_tensor_vanishes_on_constants_and_rejects_vacuum() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let p = Params::new(1.0, 0.0, 1.0, PressureLaw::Linear { k: 1.0 });
        let rho = SpectralField::constant(&g, 1.7);
        assert!(div_k_general(&rho, &p).unwrap().linf_norm() < 1e-12);
        assert!(div_k_log(&rho, 1.0).unwrap().linf_norm() < 1e-12);
        let bad = SpectralField::constant(&g, -1.0);
        assert!(matches!(div_k_general(&bad, &p), Err(Error::Vacuum { .. })));
        assert!(matches!(div_k_log(&bad, 1.0), Err(Error::Vacuum { .. })));
    }

    #[test]
    fn nhv1_equilibrium_and_linearization() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let p = Params::new(1.0, 0.5, 0.8, PressureLaw::Linear { k: 1.3 });
        let z = rhs_nhv1(&SpectralField::zeros(&g), &VectorField::zeros(&g), &p).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        let mode = SpectralField::from_fn(&g, |x| (2.0 * x[0] + x[1]).cos()).unwrap();
        let mut prev = None;
        for eps in [1e-3, 5e-4] {
            let q = mode.scale(eps);
            let st = FluidState::new(q.clone(), VectorField::zeros(&g)).unwrap();
            let full = rhs_nhv1(&q, &VectorField::zeros(&g), &p).unwrap();
            let lin = generator(&physical_operator(&p), &g).apply(&g, &st);
            let err = full.sub(&lin).l2_norm();
            if let Some(e) = prev {
                let ratio: f64 = e / err;
                assert!((3.5..=4.5).contains(&ratio), "{ratio}");
            }
            prev = Some(err);
        }
        let q = mode.scale(1e-9);
        let full = rhs_nhv1(&q, &VectorField::zeros(&g), &p).unwrap();
        let expect = q.gradient().scale(-1.3).add(&q.laplacian().gradient().scale(0.8));
        assert!(rel(&full.u, &expect) < 1e-7);
    }

    #[test]
    fn nhv1_matches_density_form() {
        for dim in 1..=2 {
            let g = Grid::new(dim, 64, 2.0 * PI).unwrap();
            let st = small_state(&g, 0.05, 5);
            for law in [PressureLaw::Linear { k: 1.0 }, PressureLaw::Gamma { a: 1.0, gamma: 1.4 }] {
                let p = Params::new(0.9, 0.3, 0.7, law);
                let a = rhs_nhv1(&st.q, &st.u, &p).unwrap();
                let b = rhs_rho_form(&st.q, &st.u, &p).unwrap();
                let eq = a.q.sub(&b.q).l2_norm() / a.q.l2_norm();
                assert!(eq <= 1e-6, "{eq}");
                assert!(rel(&a.u, &b.u) < 1e-6, "{}", rel(&a.u, &b.u));
            }
        }
    }

    #[test]
    fn effective_system_cases() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let p = Params::quasi_solution(0.7, 1.0);
        let q = smooth(&g, 3, 0.1, 2);
        let u = q.gradient().scale(-0.7);
        assert!(effective_velocity(&q, &u, 0.7).linf_norm() < 1e-15);
        let c = SpectralField::constant(&g, 0.3);
        let r = rhs_effective(&c, &VectorField::zeros(&g), &p).unwrap();
        assert!(r.max_abs() < 1e-14);
        let bad = Params::new(0.7, 0.1, 0.49, PressureLaw::Linear { k: 1.0 });
        assert!(matches!(rhs_effective(&c, &VectorField::zeros(&g), &bad), Err(Error::Regime(_))));
    }

    #[test]
    fn effective_rhs_is_the_transformed_nhv1_rhs() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let p = Params::quasi_solution(0.6, 1.2);
        let st = small_state(&g, 0.05, 8);
        let v = effective_velocity(&st.q, &st.u, p.mu);
        let a = rhs_nhv1(&st.q, &st.u, &p).unwrap();
        let b = rhs_effective(&st.q, &v, &p).unwrap();
        assert!(a.q.sub(&b.q).l2_norm() <= 1e-10 * a.q.l2_norm());
        let dv = a.u.add(&a.q.gradient().scale(p.mu));
        assert!(rel(&b.u, &dv) < 1e-10, "{}", rel(&b.u, &dv));
    }

    #[test]
    fn quasi_solution_residual_small() {
        let g = Grid::new(2, 64, 2.0 * PI).unwrap();
        let rho = SpectralField::constant(&g, 1.0);
        let r = quasi_solution_residual(&rho, 0.5).unwrap();
        assert!(r.momentum_l2 < 1e-14 && r.mass_l2 < 1e-14);
        let bump = SpectralField::from_fn(&g, |x| {
            let d2 = (x[0] - PI).powi(2) + (x[1] - PI).powi(2);
            1.0 + 0.3 * (-d2 / 0.8).exp()
        })
        .unwrap()
        .heat(0.5, 0.2);
        let r = quasi_solution_residual(&bump, 0.5).unwrap();
        assert!(r.relative < 1e-8, "{r:?}");
        let (res, _) = quasi_solution_momentum_residual(&bump, 0.5, 2.0).unwrap();
        let k = bump.gradient().scale(2.0);
        assert!(res.sub(&k).l2_norm() < 1e-8 * k.l2_norm());
    }

    #[test]
    fn perturbation_cases() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let p = Params::quasi_solution(0.5, 1.5);
        let rho1 = smooth(&g, 2, 0.2, 4).add_constant(1.0);
        let zero = rhs_perturbation(&SpectralField::zeros(&g), &VectorField::zeros(&g), &rho1, &p).unwrap();
        let expect = log_density(&rho1).gradient().scale(-1.5);
        assert!(zero.q.linf_norm() < 1e-14);
        assert!(rel(&zero.u, &expect) < 1e-12);

        // Flat background reduces to the log-density system.
        let st = small_state(&g, 0.05, 9);
        let one = SpectralField::constant(&g, 1.0);
        let a = rhs_perturbation(&st.q, &st.u, &one, &p).unwrap();
        let b = rhs_nhv1(&st.q, &st.u, &p).unwrap();
        assert!(a.q.sub(&b.q).l2_norm() <= 1e-10 * b.q.l2_norm());
        assert!(rel(&a.u, &b.u) < 1e-10);
    }

    #[test]
    fn perturbation_consistent_with_full_system() {
        let g = Grid::new(2, 64, 2.0 * PI).unwrap();
        let mu = 0.5;
        let p = Params::quasi_solution(mu, 1.5);
        let rho1 = smooth(&g, 2, 0.2, 4).add_constant(1.0);
        let st = small_state(&g, 0.02, 12);
        let lr = log_density(&rho1);
        let q = lr.add(&st.q);
        let u = lr.gradient().scale(-mu).add(&st.u);
        let full = rhs_nhv1(&q, &u, &p).unwrap();
        let pert = rhs_perturbation(&st.q, &st.u, &rho1, &p).unwrap();
        // d/dt ln rho1 = mu Lap rho1 / rho1 and d/dt u1 = -mu grad of that.
        let g_t = rho1.laplacian().scale(mu).product(&rho1.map(|r| 1.0 / r).dealias());
        let dq = g_t.add(&pert.q);
        let du = g_t.gradient().scale(-mu).add(&pert.u);
        assert!(full.q.sub(&dq).l2_norm() <= 1e-6 * full.q.l2_norm(), "{}", full.q.sub(&dq).l2_norm() / full.q.l2_norm());
        assert!(rel(&du, &full.u) < 1e-6, "{}", rel(&du, &full.u));
    }

    #[test]
    fn evolution_nonlinear_part_of_linearized_is_zero() {
        let g = Grid::new(1, 32, 2.0 * PI).unwrap();
        let st = small_state(&g, 0.1, 1);
        let lin = Linearized { op: physical_operator(&Params::new(1.0, 0.0, 1.0, PressureLaw::Linear { k: 1.0 })) };
        assert_eq!(lin.nonlinear(0.0, &st).unwrap().max_abs(), 0.0);
        let n = Nhv1 { params: Params::new(1.0, 0.0, 1.0, PressureLaw::Linear { k: 1.0 }) };
        let tiny = st.scale(1e-6);
        let nl = n.nonlinear(0.0, &tiny).unwrap();
        assert!(nl.max_abs() < 1e-9);
    }
}
