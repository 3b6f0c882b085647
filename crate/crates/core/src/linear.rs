//! Exact Fourier-space solution of the linearized capillary systems.
//!
//! The linear system is
//!
//! ```text
//! dq/dt + div u = 0
//! du/dt - a Lap u - b grad div u - c grad Lap q + d grad q = 0
//! ```
//!
//! Per wavenumber with `s = |xi|^2` the potential sector in `(q, div u)` obeys
//! `q' = -div u`, `(div u)' = -nu s div u + (c s^2 + d s) q` with `nu = a + b`, and the
//! rotational part decays like `exp(-a s t)`.

use nalgebra::{Matrix2, SMatrix};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{SpectralField, VectorField};
use crate::grid::Grid;
use crate::littlewood_paley::DyadicPartition;
use crate::quadrature::CompositeRule;
use crate::state::FluidState;

/// Coefficients of the linear system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearCoeffs {
    /// Shear diffusion, the viscosity `mu`.
    pub a: f64,
    /// Bulk coupling `lambda + mu`.
    pub b: f64,
    /// Capillarity.
    pub c: f64,
    /// Pressure stiffness; zero selects the pressureless system.
    pub d: f64,
    /// Potential-sector viscosity `a + b = 2 mu + lambda`.
    pub nu: f64,
}

impl LinearCoeffs {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let nu = a + b;
        if !(a > 0.0) {
            return Err(Error::InvalidParams(format!("shear diffusion must be positive, got {a}")));
        }
        if !(nu > 0.0) {
            return Err(Error::InvalidParams(format!("a+b>0 violated (a+b = {nu})")));
        }
        if !(c > 0.0) {
            return Err(Error::InvalidParams(format!("capillarity must be positive, got {c}")));
        }
        if !(d >= 0.0) {
            return Err(Error::InvalidParams(format!("pressure stiffness must be non-negative, got {d}")));
        }
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParams("coefficients must be finite".into()));
        }
        Ok(Self { a, b, c, d, nu })
    }

    /// Coefficients from viscosities `mu`, `lambda`, capillarity and pressure stiffness.
    pub fn from_physical(mu: f64, lambda: f64, kappa: f64, stiffness: f64) -> Result<Self> {
        Self::new(mu, lambda + mu, kappa, stiffness)
    }

    pub fn operator(&self) -> LinearOperator {
        LinearOperator {
            q_diffusion: 0.0,
            capillarity: self.c,
            stiffness: self.d,
            nu: self.nu,
            rotational: self.a,
        }
    }

    pub fn regime(&self) -> Regime {
        let disc = self.nu * self.nu - 4.0 * self.c;
        if disc < 0.0 {
            Regime::Oscillatory
        } else if disc == 0.0 {
            Regime::Resonant
        } else {
            Regime::Overdamped
        }
    }

    /// `min(1, 4c / nu^2) * nu`, the decay prefactor of a unit block.
    pub fn decay_prefactor(&self) -> f64 {
        (4.0 * self.c / (self.nu * self.nu)).min(1.0) * self.nu
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Oscillatory,
    Resonant,
    Overdamped,
}

/// The closed-form exponential `exp(-t A)` with `A = [[0, -s], [c s, nu s]]`.
///
/// Acts on `(Lap q, div u)` of the pressureless system.
pub fn closed_form_exp(xi2: f64, t: f64, coeffs: &LinearCoeffs) -> Result<Matrix2<f64>> {
    if !(xi2 >= 0.0) || !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("need |xi|^2 >= 0 and t >= 0, got {xi2}, {t}")));
    }
    if coeffs.d != 0.0 {
        return Err(Error::Regime("closed form covers the pressureless system only".into()));
    }
    Ok(closed_form_unchecked(xi2, t, coeffs.c, coeffs.nu))
}

fn closed_form_unchecked(s: f64, t: f64, kappa: f64, nu: f64) -> Matrix2<f64> {
    let st = s * t;
    if st == 0.0 {
        return Matrix2::identity();
    }
    let half = 0.5 * nu;
    let gap = kappa - half * half;
    let nu_p = gap.abs().sqrt();
    let damp = -half * st;
    // (e^{damp} h1, e^{damp} h2)
    let (h1, h2) = if gap > 0.0 {
        let w = nu_p * st;
        let e = damp.exp();
        (e * w.cos(), e * w.sin() / nu_p)
    } else if gap == 0.0 {
        let e = damp.exp();
        (e, e * st)
    } else {
        let w = nu_p * st;
        let ep = (damp + w).exp();
        let em = (damp - w).exp();
        (0.5 * (ep + em), 0.5 * (ep - em) / nu_p)
    };
    Matrix2::new(h1 + half * h2, h2, -kappa * h2, h1 - half * h2)
}

/// Per-mode generator of a linear system in `(q, div u)` plus a rotational decay rate.
///
/// The potential symbol is `[[-q_diffusion s, -1], [capillarity s^2 + stiffness s, -nu s]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearOperator {
    pub q_diffusion: f64,
    pub capillarity: f64,
    pub stiffness: f64,
    pub nu: f64,
    pub rotational: f64,
}

impl LinearOperator {
    pub fn potential_symbol(&self, s: f64) -> Matrix2<f64> {
        Matrix2::new(
            -self.q_diffusion * s,
            -1.0,
            self.capillarity * s * s + self.stiffness * s,
            -self.nu * s,
        )
    }

    /// `exp(t M(s))` in `(q, div u)` variables.
    pub fn potential_exp(&self, s: f64, t: f64) -> Matrix2<f64> {
        if self.q_diffusion == 0.0 && self.stiffness == 0.0 && s > 0.0 && self.capillarity > 0.0 {
            let e = closed_form_unchecked(s, t, self.capillarity, self.nu);
            // Conjugate from (Lap q, div u) = (-s q, div u).
            return Matrix2::new(e[(0, 0)], -e[(0, 1)] / s, -s * e[(1, 0)], e[(1, 1)]);
        }
        (self.potential_symbol(s) * t).exp()
    }

    /// Exact flow over time `t`.
    pub fn propagator(&self, grid: &Grid, t: f64) -> ModeMap {
        let pot = grid.shells().par_iter().map(|&s| self.potential_exp(s, t)).collect();
        let rot = grid.shells().iter().map(|&s| (-self.rotational * s * t).exp()).collect();
        ModeMap { pot, rot }
    }

    /// Exponential-integrator matrices `(exp(hM), phi1(hM), phi2(hM))` per shell.
    pub fn phi_maps(&self, grid: &Grid, h: f64) -> [ModeMap; 3] {
        let per: Vec<[Matrix2<f64>; 3]> = grid.shells().par_iter().map(|&s| phi_matrices(self.potential_symbol(s) * h)).collect();
        let rots: Vec<[f64; 3]> = grid.shells().iter().map(|&s| phi_scalars(-self.rotational * s * h)).collect();
        let pick = |k: usize| ModeMap {
            pot: per.iter().map(|m| m[k]).collect(),
            rot: rots.iter().map(|r| r[k]).collect(),
        };
        [pick(0), pick(1), pick(2)]
    }
}

/// `exp(Z)`, `phi1(Z)`, `phi2(Z)` from one exponential of an augmented block matrix.
pub fn phi_matrices(z: Matrix2<f64>) -> [Matrix2<f64>; 3] {
    let mut w = SMatrix::<f64, 6, 6>::zeros();
    w.fixed_view_mut::<2, 2>(0, 0).copy_from(&z);
    w.fixed_view_mut::<2, 2>(0, 2).copy_from(&Matrix2::identity());
    w.fixed_view_mut::<2, 2>(2, 4).copy_from(&Matrix2::identity());
    let e = w.exp();
    [
        e.fixed_view::<2, 2>(0, 0).into_owned(),
        e.fixed_view::<2, 2>(0, 2).into_owned(),
        e.fixed_view::<2, 2>(0, 4).into_owned(),
    ]
}

/// Scalar `exp(z)`, `phi1(z)`, `phi2(z)`.
pub fn phi_scalars(z: f64) -> [f64; 3] {
    if z.abs() < 0.5 {
        // Taylor series: phi_k(z) = sum_j z^j / (j + k)!
        let mut phi1 = 0.0;
        let mut phi2 = 0.0;
        let mut term = 1.0;
        for j in 0..30 {
            phi1 += term / (j + 1) as f64;
            phi2 += term / ((j + 1) * (j + 2)) as f64;
            term *= z / (j + 1) as f64;
        }
        return [z.exp(), phi1, phi2];
    }
    let phi1 = z.exp_m1() / z;
    [z.exp(), phi1, (phi1 - 1.0) / z]
}

/// Per-shell linear maps acting on `(q, div u)` and on the rotational velocity.
#[derive(Clone, Debug)]
pub struct ModeMap {
    pub pot: Vec<Matrix2<f64>>,
    pub rot: Vec<f64>,
}

impl ModeMap {
    /// Applies the map mode by mode.
    pub fn apply(&self, grid: &Grid, state: &FluidState) -> FluidState {
        let dim = grid.dim();
        let qc = state.q.coeffs();
        let uc: Vec<&[Complex64]> = state.u.components().iter().map(|c| c.coeffs()).collect();
        let out: Vec<(Complex64, [Complex64; 3])> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let shell = grid.shell_of(i);
                let s = grid.shells()[shell];
                let m = &self.pot[shell];
                let xi = grid.wavevector(i);
                let mut u = [Complex64::new(0.0, 0.0); 3];
                for a in 0..dim {
                    u[a] = uc[a][i];
                }
                let q = qc[i];
                if s == 0.0 {
                    let r = self.rot[shell];
                    return (q * m[(0, 0)], [u[0] * r, u[1] * r, u[2] * r]);
                }
                let div: Complex64 = (0..dim).map(|a| Complex64::new(0.0, xi[a]) * u[a]).sum();
                let q_new = q * m[(0, 0)] + div * m[(0, 1)];
                let div_new = q * m[(1, 0)] + div * m[(1, 1)];
                let r = self.rot[shell];
                let mut out = [Complex64::new(0.0, 0.0); 3];
                for a in 0..dim {
                    let pot_old = Complex64::new(0.0, -xi[a]) * div / s;
                    let pot_new = Complex64::new(0.0, -xi[a]) * div_new / s;
                    out[a] = (u[a] - pot_old) * r + pot_new;
                }
                (q_new, out)
            })
            .collect();
        let q = SpectralField::from_coeffs_unchecked(grid, out.iter().map(|o| o.0).collect());
        let u = VectorField::from_components_unchecked(
            (0..dim)
                .map(|a| SpectralField::from_coeffs_unchecked(grid, out.iter().map(|o| o.1[a]).collect()))
                .collect(),
        );
        FluidState { q, u }
    }
}

/// Exact linear evolution of `state0` over time `t`.
pub fn apply_semigroup(state0: &FluidState, t: f64, coeffs: &LinearCoeffs) -> Result<FluidState> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be non-negative, got {t}")));
    }
    let grid = state0.grid();
    Ok(coeffs.operator().propagator(grid, t).apply(grid, state0))
}

/// Potential and rotational parts of a velocity field.
pub fn helmholtz(u: &VectorField) -> (VectorField, VectorField) {
    let div = u.divergence();
    let pot = div.inverse_laplacian().gradient();
    let rot = u.sub(&pot);
    (pot, rot)
}

/// Result of a decay-rate fit on one dyadic block.
#[derive(Clone, Debug, Serialize)]
pub struct BlockDecayReport {
    pub block: i32,
    pub measured_rate: f64,
    pub predicted_rate: f64,
    /// `measured_rate / predicted_rate`.
    pub c_fit: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

/// Unit-norm potential probe `(grad q0, u0) = (grad Delta_l q, 0)` with a flat spectrum.
pub fn block_probe(partition: &DyadicPartition, l: i32) -> Result<FluidState> {
    let grid = partition.grid();
    let flat = SpectralField::from_coeffs(grid, vec![Complex64::new(1.0, 0.0); grid.len()])?;
    let q = partition.block(&flat, l)?;
    let norm = q.gradient().l2_norm();
    if norm == 0.0 {
        return Err(Error::InvalidArgument(format!("block {l} holds no grid modes")));
    }
    FluidState::new(q.scale(1.0 / norm), VectorField::zeros(grid))
}

/// `||(grad q, u)||_{L^2}` computed from coefficients.
pub fn gradient_velocity_norm(state: &FluidState) -> f64 {
    let g = state.grid();
    let qc = state.q.coeffs();
    let mut sum = 0.0;
    for i in 0..g.len() {
        sum += g.xi_squared(i) * qc[i].norm_sqr();
    }
    for c in state.u.components() {
        sum += c.coeffs().iter().map(|v| v.norm_sqr()).sum::<f64>();
    }
    (sum * g.volume()).sqrt() / g.len() as f64
}

/// Fits the decay rate of the exact flow on block `l`.
///
/// The rate is minus the least-squares slope of `ln ||(grad q, u)||` over the last half of `t_grid`.
pub fn verify_block_decay(partition: &DyadicPartition, l: i32, coeffs: &LinearCoeffs, t_grid: &[f64]) -> Result<BlockDecayReport> {
    if t_grid.len() < 4 {
        return Err(Error::InvalidArgument("at least four time samples required".into()));
    }
    if coeffs.d != 0.0 {
        return Err(Error::Regime("block decay is checked on the pressureless system".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid[0] < 0.0 {
        return Err(Error::UnsortedTimes);
    }
    let probe = block_probe(partition, l)?;
    let norms: Vec<f64> = t_grid
        .par_iter()
        .map(|&t| apply_semigroup(&probe, t, coeffs).map(|s| gradient_velocity_norm(&s)))
        .collect::<Result<_>>()?;
    let start = t_grid.len() / 2;
    let slope = least_squares_slope(&t_grid[start..], &norms[start..].iter().map(|v| v.ln()).collect::<Vec<_>>());
    let measured_rate = -slope;
    let predicted_rate = coeffs.decay_prefactor() * 4f64.powi(l);
    Ok(BlockDecayReport {
        block: l,
        measured_rate,
        predicted_rate,
        c_fit: measured_rate / predicted_rate,
        times: t_grid.to_vec(),
        norms,
    })
}

pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Largest admissible cross-term weight for the dyadic energy.
pub fn alpha_max(coeffs: &LinearCoeffs) -> f64 {
    0.5 * coeffs.c.sqrt()
}

/// Dyadic energy `k_l` with `k_l^2 = |u_l|^2 + c |grad q_l|^2 + d |q_l|^2 + 2 alpha (grad q_l, u_l)`.
pub fn dyadic_energy(partition: &DyadicPartition, state: &FluidState, l: i32, alpha: f64, coeffs: &LinearCoeffs) -> Result<f64> {
    let amax = alpha_max(coeffs);
    if !(alpha >= 0.0 && alpha <= amax) {
        return Err(Error::InvalidArgument(format!(
            "alpha = {alpha} exceeds sqrt(c)/2 = {amax}; the bounds k^2/2 <= |u|^2 + c|grad q|^2 <= 3k^2/2 would fail"
        )));
    }
    let g = partition.grid();
    let q = partition.block(&state.q, l)?;
    let qc = q.coeffs();
    let ucs: Vec<SpectralField> = state.u.components().iter().map(|c| partition.block(c, l)).collect::<Result<_>>()?;
    let mut total = 0.0;
    for i in 0..g.len() {
        let s = g.xi_squared(i);
        if s == 0.0 {
            continue;
        }
        let xi = g.wavevector(i);
        let mut u2 = 0.0;
        let mut cross = 0.0;
        for (a, c) in ucs.iter().enumerate() {
            let u = c.coeffs()[i];
            u2 += u.norm_sqr();
            // Re(conj(i xi_a q) u_a)
            let gq = Complex64::new(0.0, xi[a]) * qc[i];
            cross += (gq.conj() * u).re;
        }
        total += u2 + (coeffs.c * s + coeffs.d) * qc[i].norm_sqr() + 2.0 * alpha * cross;
    }
    Ok((total.max(0.0) * g.volume()).sqrt() / g.len() as f64)
}

/// Outcome of the maximum-principle splitting of `q`.
#[derive(Clone, Debug, Serialize)]
pub struct DuhamelReport {
    pub times: Vec<f64>,
    /// Max over times of `|q_split - q_direct|_inf / max_t |q_direct|_inf`.
    pub split_rel_error: f64,
    pub q0_sup: f64,
    /// Max over times of the heat part `|exp(t c/nu Lap) q0|_inf`.
    pub heat_sup: f64,
    pub heat_bound_holds: bool,
    pub q_sup: f64,
    /// `|(grad q0, u0)|` in the critical `B^{N/2-1}_{2,2}` norm.
    pub data_norm: f64,
    /// `(sup_t |q|_inf - |q0|_inf) / data_norm`.
    pub c_fit_q: f64,
    /// `sup_t sqrt(t) |(grad q, u)|_inf / data_norm`.
    pub c_fit_smoothing: f64,
}

/// Time samples used by the splitting check: log-spaced near zero plus uniform.
pub fn duhamel_times(horizon: f64, count: usize) -> Vec<f64> {
    let mut t: Vec<f64> = (0..count)
        .map(|k| horizon * 10f64.powf(-4.0 + 4.0 * k as f64 / (count - 1) as f64))
        .chain((1..=count).map(|k| horizon * k as f64 / count as f64))
        .collect();
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    t.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs());
    t
}

/// Reconstructs `q` from its heat part and the Duhamel integral and compares with the exact flow.
pub fn duhamel_linf_split(partition: &DyadicPartition, state0: &FluidState, coeffs: &LinearCoeffs, horizon: f64) -> Result<DuhamelReport> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    if coeffs.d != 0.0 {
        return Err(Error::Regime("the splitting is stated for the pressureless system".into()));
    }
    let grid = state0.grid();
    let dim = grid.dim();
    let times = duhamel_times(horizon, 24);
    let op = coeffs.operator();
    let heat_rate = coeffs.c / coeffs.nu;

    // Initial (q, div u) per mode.
    let qc0 = state0.q.coeffs();
    let div0 = state0.u.divergence();
    let dc0 = div0.coeffs();
    let active: Vec<usize> = (0..grid.len()).filter(|&i| qc0[i].norm() + dc0[i].norm() > 0.0).collect();

    let mut split_err: f64 = 0.0;
    let mut q_scale: f64 = state0.q.linf_norm();
    let mut heat_sup: f64 = 0.0;
    let mut q_sup: f64 = state0.q.linf_norm();
    let mut smoothing: f64 = 0.0;
    for &t in &times {
        let direct = apply_semigroup(state0, t, coeffs)?;
        let heat = state0.q.heat(heat_rate, t);
        let integral: Vec<(usize, Complex64)> = active
            .par_iter()
            .map(|&i| {
                let s = grid.xi_squared(i);
                if s == 0.0 {
                    return (i, Complex64::new(0.0, 0.0));
                }
                let stiff = (coeffs.nu * s).max(heat_rate * s) * t;
                let panels = ((stiff / 2.0).ceil() as usize).clamp(2, 4000);
                let rule = CompositeRule::new(0.0, t, panels, 10);
                let mut acc = Complex64::new(0.0, 0.0);
                for (&tau, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let m = op.potential_exp(s, tau);
                    let q = qc0[i] * m[(0, 0)] + dc0[i] * m[(0, 1)];
                    let dv = qc0[i] * m[(1, 0)] + dc0[i] * m[(1, 1)];
                    let dc = dv * coeffs.nu - q * (coeffs.c * s);
                    acc += dc * (w * (-heat_rate * s * (t - tau)).exp());
                }
                (i, acc)
            })
            .collect();
        let mut ic = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (i, v) in integral {
            ic[i] = v;
        }
        let duhamel = SpectralField::from_coeffs_unchecked(grid, ic);
        let split = heat.axpby(1.0, &duhamel, -1.0 / coeffs.nu);
        split_err = split_err.max(split.sub(&direct.q).linf_norm());
        q_scale = q_scale.max(direct.q.linf_norm());
        heat_sup = heat_sup.max(heat.linf_norm());
        q_sup = q_sup.max(direct.q.linf_norm());
        let gq = direct.q.gradient();
        let mag = gq.norm_squared().add(&direct.u.norm_squared());
        smoothing = smoothing.max(t.sqrt() * mag.max().max(0.0).sqrt());
    }
    let q0_sup = state0.q.linf_norm();
    let data_norm = critical_data_norm(partition, state0, dim);
    Ok(DuhamelReport {
        times,
        split_rel_error: split_err / q_scale.max(f64::MIN_POSITIVE),
        q0_sup,
        heat_sup,
        heat_bound_holds: heat_sup <= q0_sup + 1e-10,
        q_sup,
        data_norm,
        c_fit_q: (q_sup - q0_sup) / data_norm,
        c_fit_smoothing: smoothing / data_norm,
    })
}

/// `|(grad q, u)|_{B^{N/2-1}_{2,2}}`, combining components in `l^2`.
pub fn critical_data_norm(partition: &DyadicPartition, state: &FluidState, dim: usize) -> f64 {
    let s = 0.5 * dim as f64 - 1.0;
    let mut fields: Vec<SpectralField> = state.q.gradient().into_components();
    fields.extend(state.u.components().iter().cloned());
    vector_besov_norm(partition, &fields, s, 2.0)
}

/// `l^r` Besov norm with `L^2` blocks of a vector whose components are given separately.
pub fn vector_besov_norm(partition: &DyadicPartition, components: &[SpectralField], s: f64, r: f64) -> f64 {
    let mut blocks = vec![0.0; partition.len()];
    for c in components {
        for (b, v) in partition.block_l2_norms(c).into_iter().enumerate() {
            blocks[b] += v * v;
        }
    }
    let norms: Vec<f64> = blocks.into_iter().map(f64::sqrt).collect();
    partition.aggregate(&norms, s, r, partition.j_min(), partition.j_max())
}

/// Comparison of the time-weighted semigroup norm with a negative Besov norm of the data.
#[derive(Clone, Debug, Serialize)]
pub struct CharacterizationReport {
    pub left: f64,
    pub right: f64,
    pub ratio: f64,
}

/// `|| t^s |exp(tB)(grad q0, u0)|_{L^p} ||_{L^r(dt/t)}` against `|(grad q0, u0)|_{B^{-2s}_{p,r}}`.
pub fn semigroup_besov_characterization(
    partition: &DyadicPartition,
    state0: &FluidState,
    coeffs: &LinearCoeffs,
    s: f64,
    p: f64,
    r: f64,
) -> Result<CharacterizationReport> {
    if !(r >= 1.0) || !(p >= 1.0) {
        return Err(Error::InvalidNormSpec(format!("p and r must be at least 1, got {p}, {r}")));
    }
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("time weight must be positive, got {s}")));
    }
    if coeffs.d != 0.0 {
        return Err(Error::Regime("characterization is stated for the pressureless system".into()));
    }
    let mut comps: Vec<SpectralField> = state0.q.gradient().into_components();
    comps.extend(state0.u.components().iter().cloned());
    let right = if p == 2.0 {
        vector_besov_norm(partition, &comps, -2.0 * s, r)
    } else {
        let mag = magnitude(&comps);
        partition.besov_norm_on(&mag, -2.0 * s, p, r, partition.j_min(), partition.j_max())?
    };
    if right == 0.0 {
        return Ok(CharacterizationReport { left: 0.0, right: 0.0, ratio: 0.0 });
    }
    // Log-spaced times spanning the diffusive scales of every resolvable block.
    let rate_hi = coeffs.nu.max(coeffs.a) * 4f64.powi(partition.j_max() + 1);
    let rate_lo = coeffs.decay_prefactor().min(coeffs.a) * 4f64.powi(partition.j_min()) / 4.0;
    let (tau0, tau1) = ((1e-3 / rate_hi).ln(), (40.0 / rate_lo).ln());
    let count = 160;
    let taus: Vec<f64> = (0..count).map(|k| tau0 + (tau1 - tau0) * k as f64 / (count - 1) as f64).collect();
    let values: Vec<f64> = taus
        .par_iter()
        .map(|&tau| {
            let t = tau.exp();
            let st = apply_semigroup(state0, t, coeffs)?;
            let mut c = st.q.gradient().into_components();
            c.extend(st.u.components().iter().cloned());
            Ok(t.powf(s) * magnitude(&c).lp_norm(p))
        })
        .collect::<Result<_>>()?;
    let left = crate::littlewood_paley::time_lp(&taus, &values, r);
    Ok(CharacterizationReport { left, right, ratio: left / right })
}

fn magnitude(components: &[SpectralField]) -> SpectralField {
    let mut acc = components[0].mul(&components[0]);
    for c in &components[1..] {
        acc = acc.add(&c.mul(c));
    }
    acc.map(|v| v.max(0.0).sqrt())
}
