//! Initial-data families: homogeneous profiles, high-pass truncations, dilated bumps,
//! density jumps and quasi-solution data.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{SpectralField, VectorField};
use crate::grid::Grid;
use crate::littlewood_paley::{chi, DyadicPartition};
use crate::model::{log_density, VACUUM_FLOOR};
use crate::state::FluidState;

/// Signed distance to `c` along one periodic axis, in `[-L/2, L/2)`.
fn wrap(x: f64, c: f64, length: f64) -> f64 {
    let d = x - c;
    d - length * (d / length + 0.5).floor()
}

fn radius_from(grid: &Grid, x: [f64; 3], c: [f64; 3]) -> f64 {
    (0..grid.dim()).map(|a| wrap(x[a], c[a], grid.length()).powi(2)).sum::<f64>().sqrt()
}

fn cell_center(grid: &Grid) -> [f64; 3] {
    let c = 0.5 * grid.length();
    let mut out = [0.0; 3];
    out[..grid.dim()].iter_mut().for_each(|v| *v = c);
    out
}

fn check_density(rho: &SpectralField) -> Result<()> {
    let min = rho.min();
    if !(min >= VACUUM_FLOOR) {
        return Err(Error::Vacuum { min_density: min, floor: VACUUM_FLOOR });
    }
    Ok(())
}

/// `sum_k (-1)^k a_k` by the Cohen-Villegas-Zagier acceleration.
fn alternating_sum(a: impl Fn(f64) -> f64) -> f64 {
    let n = 40;
    let d = (3.0 + 8f64.sqrt()).powi(n);
    let d = 0.5 * (d + 1.0 / d);
    let (mut b, mut c, mut s) = (-1.0, -d, 0.0);
    let nf = n as f64;
    for k in 0..n {
        let kf = k as f64;
        c = b - c;
        s += c * a(kf);
        b *= (kf + nf) * (kf - nf) / ((kf + 0.5) * (kf + 1.0));
    }
    s / d
}

/// Riemann zeta for real `s != 1`, `s > 0`.
pub fn riemann_zeta(s: f64) -> f64 {
    alternating_sum(|k| (k + 1.0).powf(-s)) / (1.0 - 2f64.powf(1.0 - s))
}

/// Dirichlet beta for real `s > 0`.
pub fn dirichlet_beta(s: f64) -> f64 {
    alternating_sum(|k| (2.0 * k + 1.0).powf(-s))
}

/// `sum_{m in Z^N, m != 0} |m|^{-sigma}`, analytically continued to `0 < sigma < N`.
pub fn lattice_zeta(dim: usize, sigma: f64) -> Option<f64> {
    match dim {
        1 => Some(2.0 * riemann_zeta(sigma)),
        2 => Some(4.0 * riemann_zeta(0.5 * sigma) * dirichlet_beta(0.5 * sigma)),
        _ => None,
    }
}

/// `|x|^{-sigma}` on the torus, windowed before the cell boundary.
///
/// The singular cell gets the value that makes the lattice sum of the profile reproduce its
/// integral, so the sampled field carries no spurious flat spectrum.
#[derive(Clone, Copy, Debug)]
pub struct RadialProfile {
    pub sigma: f64,
    pub window: f64,
    core_factor: f64,
}

impl RadialProfile {
    pub fn new(grid: &Grid, sigma: f64) -> Result<Self> {
        let n = grid.dim() as f64;
        if !(sigma > 0.0 && sigma < n) {
            return Err(Error::InvalidArgument(format!("sigma must lie in (0, {n}), got {sigma}")));
        }
        // Without a lattice constant, fall back to a one-cell cap.
        let core_factor = lattice_zeta(grid.dim(), sigma).map_or(1.0, |z| -z);
        Ok(Self { sigma, window: 0.45 * grid.length(), core_factor })
    }

    pub fn eval(&self, r: f64) -> f64 {
        chi(r / self.window) * r.powf(-self.sigma)
    }

    /// Samples `x -> profile(scale * |x - center|)`.
    pub fn sample(&self, grid: &Grid, scale: f64) -> SpectralField {
        let c = cell_center(grid);
        let core = self.core_factor * (scale * grid.spacing()).powf(-self.sigma);
        SpectralField::from_fn(grid, |x| {
            let r = scale * radius_from(grid, x, c);
            if r == 0.0 {
                core
            } else {
                self.eval(r)
            }
        })
        .expect("finite profile")
    }
}

/// Periodized homogeneous profile `|x|^{-sigma}` centered in the cell.
pub fn homogeneous_profile(sigma: f64, grid: &Grid) -> Result<SpectralField> {
    Ok(RadialProfile::new(grid, sigma)?.sample(grid, 1.0))
}

/// Truncated profile together with its two critical norms.
#[derive(Clone, Debug)]
pub struct TruncatedProfile {
    pub field: SpectralField,
    pub epsilon: f64,
    pub l0: i32,
    /// `B^{N/2-1}_{2,inf}` norm.
    pub norm_inf: f64,
}

impl TruncatedProfile {
    /// `B^{N/2-1}_{2,r}` norm.
    pub fn norm_r(&self, partition: &DyadicPartition, r: f64) -> f64 {
        let s = 0.5 * partition.grid().dim() as f64 - 1.0;
        partition.aggregate(&partition.block_l2_norms(&self.field), s, r, partition.j_min(), partition.j_max())
    }
}

/// High-pass filter with `Delta_l = 0` for every `l < l0`: the multiplier vanishes for `|xi| <= 2^{l0}`.
pub fn high_pass(f: &SpectralField, l0: i32) -> SpectralField {
    let cut = 2f64.powi(l0);
    f.apply_radial(|s| 1.0 - chi(0.75 * s.sqrt() / cut))
}

/// High-pass truncation above `2^{l0}` of `|x|^{-(1 - epsilon)}`.
pub fn truncated_profile(epsilon: f64, l0: i32, grid: &Grid) -> Result<TruncatedProfile> {
    if !(epsilon > 0.0 && epsilon <= 0.1) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1/10], got {epsilon}")));
    }
    let partition = DyadicPartition::new(grid)?;
    if !partition.contains(l0) {
        return Err(Error::BlockOutOfRange { block: l0, min: partition.j_min(), max: partition.j_max() });
    }
    let sigma = 1.0 - epsilon;
    let profile = RadialProfile::new(grid, sigma)?.sample(grid, 1.0);
    let field = high_pass(&profile, l0);
    let s = 0.5 * grid.dim() as f64 - 1.0;
    let norm_inf = partition.aggregate(&partition.block_l2_norms(&field), s, f64::INFINITY, partition.j_min(), partition.j_max());
    Ok(TruncatedProfile { field, epsilon, l0, norm_inf })
}

/// `((1 - 2^{-r eps m}) / (1 - 2^{-r eps}))^{1/r}`: the `l^r / l^inf` ratio of `2^{-j eps}` over `m` blocks.
pub fn geometric_ratio(epsilon: f64, r: f64, blocks: usize) -> f64 {
    let q = 2f64.powf(-r * epsilon);
    ((1.0 - q.powi(blocks as i32)) / (1.0 - q)).powf(1.0 / r)
}

/// Smooth compactly supported bump `exp(1 - 1/(1 - |x - c|^2 / R^2))`, equal to 1 at the center.
pub fn smooth_bump(grid: &Grid, radius: f64) -> Result<SpectralField> {
    if !(radius > 0.0 && radius < 0.5 * grid.length()) {
        return Err(Error::InvalidArgument(format!("bump radius must lie in (0, L/2), got {radius}")));
    }
    let c = cell_center(grid);
    SpectralField::from_fn(grid, |x| {
        let t = (radius_from(grid, x, c) / radius).powi(2);
        if t < 1.0 {
            (1.0 - 1.0 / (1.0 - t)).exp()
        } else {
            0.0
        }
    })
}

/// Single dilated copy `phi(lambda (x - c) + c)` about the cell center `c`, exact on the grid.
///
/// `phi` must vanish on the boundary of the cell.
pub fn scaled_profile(phi: &SpectralField, lambda_scale: u32) -> Result<SpectralField> {
    if lambda_scale == 0 || !lambda_scale.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("lambda must be a power of two, got {lambda_scale}")));
    }
    let grid = phi.grid();
    let n = grid.n() as i64;
    let lam = lambda_scale as i64;
    let half = n / 2;
    let src = phi.samples();
    let scale = phi.linf_norm().max(f64::MIN_POSITIVE);
    let mut leak: f64 = 0.0;
    let mut out = vec![0.0; grid.len()];
    for (i, v) in out.iter_mut().enumerate() {
        let m = grid.multi_index(i);
        let mut target = [0usize; 3];
        let mut inside = true;
        for a in 0..grid.dim() {
            let j = half + lam * (m[a] as i64 - half);
            if !(0..n).contains(&j) {
                inside = false;
            }
            target[a] = j.rem_euclid(n) as usize;
        }
        if inside {
            *v = src[grid.flat_index(target)];
        }
    }
    // The copy is cut at the cell boundary, so the source must vanish there.
    for (i, &v) in src.iter().enumerate() {
        let m = grid.multi_index(i);
        if (0..grid.dim()).any(|a| m[a] == 0 || m[a] as i64 == n - 1) {
            leak = leak.max(v.abs());
        }
    }
    if lambda_scale > 1 && leak > 1e-12 * scale {
        return Err(Error::InvalidArgument(format!(
            "profile does not vanish near the cell boundary (|phi| = {leak:e} there)"
        )));
    }
    SpectralField::from_samples(grid, out)
}

/// Band-truncated norm relations of a dilated profile.
#[derive(Clone, Debug, Serialize)]
pub struct DilationReport {
    pub lambda: u32,
    pub critical_ratio: f64,
    pub low_ratio: f64,
    pub linf_ratio: f64,
}

/// `B^{N/2}_{2,1}`, `B^{N/2-2}_{2,1}` and sup-norm ratios of `h = phi(lambda .)` to `phi`,
/// measured with `phi` on blocks `[j_min, j_max - k]` and `h` on the shifted blocks, `lambda = 2^k`.
pub fn dilation_report(phi: &SpectralField, h: &SpectralField, lambda_scale: u32) -> Result<DilationReport> {
    let grid = phi.grid();
    let p = DyadicPartition::new(grid)?;
    let k = lambda_scale.trailing_zeros() as i32;
    if p.j_max() - k < p.j_min() {
        return Err(Error::InvalidArgument("dilation leaves no common band".into()));
    }
    let n = grid.dim() as f64;
    let (bp, bh) = (p.block_l2_norms(phi), p.block_l2_norms(h));
    let norm = |b: &[f64], s: f64, lo: i32| p.aggregate(b, s, 1.0, lo, lo + p.j_max() - k - p.j_min());
    Ok(DilationReport {
        lambda: lambda_scale,
        critical_ratio: norm(&bh, n / 2.0, p.j_min() + k) / norm(&bp, n / 2.0, p.j_min()),
        low_ratio: norm(&bh, n / 2.0 - 2.0, p.j_min() + k) / norm(&bp, n / 2.0 - 2.0, p.j_min()),
        linf_ratio: h.linf_norm() / phi.linf_norm(),
    })
}

/// `rho = 1 + amplitude exp(-|x - c|^2 / (2 width^2))`.
pub fn gaussian_bump(grid: &Grid, amplitude: f64, width: f64, center: Option<[f64; 3]>) -> Result<SpectralField> {
    if !(width > 0.0) {
        return Err(Error::InvalidArgument(format!("width must be positive, got {width}")));
    }
    let c = center.unwrap_or_else(|| cell_center(grid));
    let rho = SpectralField::from_fn(grid, |x| 1.0 + amplitude * (-radius_from(grid, x, c).powi(2) / (2.0 * width * width)).exp())?;
    check_density(&rho)?;
    Ok(rho)
}

/// Density `1 + height` on the half cell `[location, location + L/2)` along axis 0 and 1 elsewhere,
/// with tanh edges of width `smoothing_cells` grid cells.
pub fn density_jump(grid: &Grid, location: f64, height: f64, smoothing_cells: f64) -> Result<SpectralField> {
    if !(smoothing_cells >= 1.0) {
        return Err(Error::InvalidArgument(format!("smoothing must span at least one cell, got {smoothing_cells}")));
    }
    if !(1.0 + height >= VACUUM_FLOOR) {
        return Err(Error::Vacuum { min_density: 1.0 + height, floor: VACUUM_FLOOR });
    }
    let l = grid.length();
    let w = 0.5 * smoothing_cells * grid.spacing();
    let mid = location + 0.25 * l;
    let rho = SpectralField::from_fn(grid, |x| {
        let d = wrap(x[0], mid, l).abs();
        1.0 + height * 0.5 * (1.0 + ((0.25 * l - d) / w).tanh())
    })?;
    check_density(&rho)?;
    Ok(rho)
}

/// Seeded field with random coefficients on `0 < |k| <= kmax`, scaled to sup norm `amplitude`.
pub fn smooth_noise(grid: &Grid, rng: &mut ChaCha8Rng, kmax: i64, amplitude: f64) -> SpectralField {
    let c: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            let k = grid.mode(i);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if k2 > 0 && k2 <= kmax * kmax {
                Complex64::new(a, b)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let f = SpectralField::from_coeffs(grid, c).expect("finite coefficients");
    let m = f.linf_norm();
    if m == 0.0 {
        f
    } else {
        f.scale(amplitude / m)
    }
}

/// `(ln rho1 + h2, -mu grad ln rho1 + u2)`.
pub fn quasi_solution_data(rho1_0: &SpectralField, h2_0: &SpectralField, u2_0: &VectorField, mu: f64) -> Result<FluidState> {
    check_density(rho1_0)?;
    let g = log_density(rho1_0);
    let u1 = g.gradient().scale(-mu);
    FluidState::new(g.add(h2_0), u1.add(u2_0))
}

/// Inverse of [`quasi_solution_data`].
pub fn split_quasi_solution(state: &FluidState, rho1_0: &SpectralField, mu: f64) -> Result<FluidState> {
    check_density(rho1_0)?;
    let g = log_density(rho1_0);
    let u1 = g.gradient().scale(-mu);
    FluidState::new(state.q.sub(&g), state.u.sub(&u1))
}

fn default_kmax() -> i64 {
    3
}

/// Initial-data selector of a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSpec {
    Equilibrium,
    /// `q = amplitude |x|^{-sigma} / sup`.
    HomogeneousProfile { sigma: f64, amplitude: f64 },
    /// First velocity component `amplitude u0 / sup` with `u0` the truncated profile.
    TruncatedProfile { epsilon: f64, l0: i32, amplitude: f64 },
    /// `rho = 1 + amplitude bump(lambda x)` with a bump of the given radius.
    ScaledProfile { lambda_scale: u32, amplitude: f64, radius: f64 },
    GaussianBump {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Option<[f64; 3]>,
    },
    DensityJump { location: f64, height: f64, smoothing_cells: f64 },
    /// Seeded smooth `q` and `u` of the given sup size.
    SmoothNoise {
        amplitude: f64,
        #[serde(default = "default_kmax")]
        kmax: i64,
    },
    /// Background density from `background`, plus a seeded perturbation `(h2, u2)` of sup size `perturbation`.
    QuasiSolution {
        background: Box<DataSpec>,
        #[serde(default)]
        perturbation: f64,
        #[serde(default = "default_kmax")]
        kmax: i64,
    },
}

/// Constructed data; `background` is the quasi-solution density when there is one.
#[derive(Clone, Debug)]
pub struct InitialData {
    pub state: FluidState,
    pub background: Option<SpectralField>,
}

impl DataSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DataSpec::Equilibrium => "equilibrium",
            DataSpec::HomogeneousProfile { .. } => "homogeneous_profile",
            DataSpec::TruncatedProfile { .. } => "truncated_profile",
            DataSpec::ScaledProfile { .. } => "scaled_profile",
            DataSpec::GaussianBump { .. } => "gaussian_bump",
            DataSpec::DensityJump { .. } => "density_jump",
            DataSpec::SmoothNoise { .. } => "smooth_noise",
            DataSpec::QuasiSolution { .. } => "quasi_solution",
        }
    }

    /// Range checks that need no grid.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        match self {
            DataSpec::HomogeneousProfile { sigma, amplitude } => {
                if !(*sigma > 0.0 && *sigma < dim as f64) {
                    return bad(format!("σ ∈ (0, N) violated (σ = {sigma})"));
                }
                if !amplitude.is_finite() {
                    return bad("amplitude must be finite".into());
                }
            }
            DataSpec::TruncatedProfile { epsilon, .. } if !(*epsilon > 0.0 && *epsilon <= 0.1) => {
                return bad(format!("ε ∈ (0, 1/10] violated (ε = {epsilon})"));
            }
            DataSpec::ScaledProfile { lambda_scale, amplitude, radius } => {
                if *lambda_scale == 0 || !lambda_scale.is_power_of_two() {
                    return bad(format!("λ must be a power of two ≥ 1 (λ = {lambda_scale})"));
                }
                if !(1.0 + amplitude.min(0.0) >= VACUUM_FLOOR) {
                    return bad(format!("density floor violated (amplitude = {amplitude})"));
                }
                if !(*radius > 0.0) {
                    return bad(format!("radius must be positive (radius = {radius})"));
                }
            }
            DataSpec::GaussianBump { amplitude, width, .. } => {
                if !(*width > 0.0) {
                    return bad(format!("width must be positive (width = {width})"));
                }
                if !(1.0 + amplitude.min(0.0) >= VACUUM_FLOOR) {
                    return bad(format!("density floor violated (amplitude = {amplitude})"));
                }
            }
            DataSpec::DensityJump { height, smoothing_cells, .. } => {
                if !(1.0 + height >= VACUUM_FLOOR) {
                    return bad(format!("density floor violated (height = {height})"));
                }
                if !(*smoothing_cells >= 1.0) {
                    return bad(format!("smoothing_cells ≥ 1 violated ({smoothing_cells})"));
                }
            }
            DataSpec::SmoothNoise { amplitude, kmax } => {
                if !amplitude.is_finite() || *kmax < 1 {
                    return bad("smooth noise needs a finite amplitude and kmax ≥ 1".into());
                }
            }
            DataSpec::QuasiSolution { background, perturbation, kmax } => {
                if matches!(**background, DataSpec::QuasiSolution { .. }) {
                    return bad("quasi-solution background cannot itself be a quasi-solution".into());
                }
                if !perturbation.is_finite() || *kmax < 1 {
                    return bad("perturbation must be finite and kmax ≥ 1".into());
                }
                background.validate(dim)?;
            }
            _ => {}
        }
        Ok(())
    }

    /// Builds the state; `mu` sets the quasi-solution velocity.
    pub fn build(&self, grid: &Grid, seed: u64, mu: f64) -> Result<InitialData> {
        self.validate(grid.dim())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zero_u = || VectorField::zeros(grid);
        let from_rho = |rho: SpectralField| -> Result<InitialData> {
            check_density(&rho)?;
            Ok(InitialData { state: FluidState::new(log_density(&rho), zero_u())?, background: None })
        };
        match self {
            DataSpec::Equilibrium => Ok(InitialData { state: FluidState::zeros(grid), background: None }),
            DataSpec::HomogeneousProfile { sigma, amplitude } => {
                let f = homogeneous_profile(*sigma, grid)?;
                let q = f.scale(amplitude / f.linf_norm());
                Ok(InitialData { state: FluidState::new(q, zero_u())?, background: None })
            }
            DataSpec::TruncatedProfile { epsilon, l0, amplitude } => {
                let t = truncated_profile(*epsilon, *l0, grid)?;
                let u0 = t.field.scale(amplitude / t.field.linf_norm());
                let mut comps = vec![u0];
                comps.extend((1..grid.dim()).map(|_| SpectralField::zeros(grid)));
                Ok(InitialData { state: FluidState::new(SpectralField::zeros(grid), VectorField::new(comps)?)?, background: None })
            }
            DataSpec::ScaledProfile { lambda_scale, amplitude, radius } => {
                let phi = smooth_bump(grid, *radius)?;
                let h = scaled_profile(&phi, *lambda_scale)?;
                from_rho(h.scale(*amplitude).add_constant(1.0))
            }
            DataSpec::GaussianBump { amplitude, width, center } => from_rho(gaussian_bump(grid, *amplitude, *width, *center)?),
            DataSpec::DensityJump { location, height, smoothing_cells } => {
                from_rho(density_jump(grid, *location, *height, *smoothing_cells)?)
            }
            DataSpec::SmoothNoise { amplitude, kmax } => {
                let q = smooth_noise(grid, &mut rng, *kmax, *amplitude);
                let u = VectorField::new((0..grid.dim()).map(|_| smooth_noise(grid, &mut rng, *kmax, *amplitude)).collect())?;
                Ok(InitialData { state: FluidState::new(q, u)?, background: None })
            }
            DataSpec::QuasiSolution { background, perturbation, kmax } => {
                let base = background.build(grid, seed, mu)?;
                let rho1 = base.state.q.map(f64::exp);
                let h2 = smooth_noise(grid, &mut rng, *kmax, *perturbation);
                let u2 = VectorField::new((0..grid.dim()).map(|_| smooth_noise(grid, &mut rng, *kmax, *perturbation)).collect())?;
                let state = quasi_solution_data(&rho1, &h2, &u2, mu)?;
                Ok(InitialData { state, background: Some(rho1) })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::littlewood_paley::block_scaling_check;
    use std::f64::consts::{LN_2, PI};

    #[test]
    fn zeta_reference_values() {
        assert!((riemann_zeta(0.5) + 1.460_354_508_809_586_8).abs() < 1e-13);
        assert!((riemann_zeta(2.0) - PI * PI / 6.0).abs() < 1e-13);
        assert!((dirichlet_beta(1.0) - PI / 4.0).abs() < 1e-13);
        assert!((dirichlet_beta(0.5) - 0.667_691_457_189_609_2).abs() < 1e-13);
        assert!((lattice_zeta(2, 1.0).unwrap() + 3.900_264_920_001_956).abs() < 1e-10);
        assert!(lattice_zeta(3, 1.0).is_none());
    }

    #[test]
    fn profile_range_checks() {
        let g = Grid::new(1, 64, 1.0).unwrap();
        assert!(homogeneous_profile(0.0, &g).is_err());
        assert!(homogeneous_profile(1.0, &g).is_err());
        assert!(homogeneous_profile(0.5, &g).is_ok());
        assert!(truncated_profile(0.2, 0, &g).is_err());
        assert!(truncated_profile(0.1, 40, &g).is_err());
    }

    #[test]
    fn small_sigma_profile_is_smooth() {
        let g = Grid::new(1, 1024, 2.0 * PI).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let f = homogeneous_profile(1e-3, &g).unwrap();
        let b = p.block_l2_norms(&f);
        let top = b[b.len() - 3..].iter().cloned().fold(0.0, f64::max);
        assert!(top < 1e-3 * f.l2_norm(), "{top}");
    }

    #[test]
    fn profile_flat_mid_band_1d() {
        let g = Grid::new(1, 1 << 14, 2.0 * PI * 64.0).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let f = homogeneous_profile(0.5, &g).unwrap();
        let rep = block_scaling_check(&p, &f, 0.5);
        assert!(rep.max_deviation < 0.1, "{rep:?}");
    }

    #[test]
    fn dilation_shifts_blocks() {
        let g = Grid::new(1, 1 << 14, 2.0 * PI * 64.0).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let prof = RadialProfile::new(&g, 0.5).unwrap();
        let f = prof.sample(&g, 1.0);
        let f2 = prof.sample(&g, 2.0);
        let (a, b) = (p.block_l2_norms(&f), p.block_l2_norms(&f2));
        let (lo, hi) = crate::littlewood_paley::middle_third(&p);
        let expect = 2f64.powf(0.5 - 0.5);
        for l in lo + 1..=hi {
            let i = (l - p.j_min()) as usize;
            // Blocks of f(2x) equal blocks of f one index lower times 2^{-N/2}.
            let shifted = b[i] / a[i - 1] * 2f64.powf(0.5);
            assert!((shifted - 1.0).abs() < 0.1, "l={l}: {shifted}");
            let homog = a[i] / a[i - 1];
            assert!((homog / expect - 1.0).abs() < 0.1, "l={l}: {homog}");
        }
    }

    #[test]
    fn truncated_profile_low_blocks_vanish() {
        let g = Grid::new(1, 4096, 2.0 * PI * 16.0).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let t = truncated_profile(0.1, 3, &g).unwrap();
        let b = p.block_l2_norms(&t.field);
        for l in p.j_min()..3 {
            assert!(b[(l - p.j_min()) as usize] < 1e-14 * t.field.l2_norm(), "block {l}");
        }
        assert!(t.norm_r(&p, 2.0) >= t.norm_inf);
    }

    #[test]
    fn geometric_ratio_limits() {
        assert!((geometric_ratio(0.1, 2.0, 1) - 1.0).abs() < 1e-15);
        let full = (1.0 / (1.0 - 2f64.powf(-0.2))).sqrt();
        assert!((geometric_ratio(0.1, 2.0, 10_000) - full).abs() < 1e-12);
    }

    #[test]
    fn scaled_profile_cases() {
        let g = Grid::new(2, 64, 2.0 * PI).unwrap();
        let phi = smooth_bump(&g, 0.7).unwrap();
        assert_eq!(scaled_profile(&phi, 1).unwrap().samples(), phi.samples());
        assert!(scaled_profile(&phi, 3).is_err());
        let h = scaled_profile(&phi, 4).unwrap();
        assert_eq!(h.linf_norm(), phi.linf_norm());
        let wide = gaussian_bump(&g, 1.0, 2.0, None).unwrap().add_constant(-1.0);
        assert!(scaled_profile(&wide, 4).is_err());
    }

    #[test]
    fn scaled_profile_matches_direct_evaluation() {
        let g = Grid::new(1, 256, 2.0 * PI).unwrap();
        let phi = smooth_bump(&g, 0.6).unwrap();
        let h = scaled_profile(&phi, 4).unwrap();
        let direct = smooth_bump(&g, 0.15).unwrap();
        assert!(h.sub(&direct).linf_norm() < 1e-14);
    }

    #[test]
    fn jump_cases() {
        let g = Grid::new(1, 256, 2.0 * PI).unwrap();
        let flat = density_jump(&g, 1.0, 0.0, 2.0).unwrap();
        assert!(flat.sub(&SpectralField::constant(&g, 1.0)).linf_norm() == 0.0);
        let j = density_jump(&g, 1.0, 1.0, 2.0).unwrap();
        assert!((j.map(f64::ln).linf_norm() - LN_2).abs() < 1e-3);
        assert!(density_jump(&g, 1.0, -1.0, 2.0).is_err());
        assert!(density_jump(&g, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn quasi_solution_round_trip() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let rho1 = gaussian_bump(&g, 0.5, 0.8, None).unwrap();
        let pure = quasi_solution_data(&rho1, &SpectralField::zeros(&g), &VectorField::zeros(&g), 0.7).unwrap();
        let g1 = log_density(&rho1);
        assert!(pure.q.sub(&g1).linf_norm() == 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h2 = smooth_noise(&g, &mut rng, 3, 0.1);
        let u2 = VectorField::new(vec![smooth_noise(&g, &mut rng, 3, 0.1), smooth_noise(&g, &mut rng, 3, 0.1)]).unwrap();
        let s = quasi_solution_data(&rho1, &h2, &u2, 0.7).unwrap();
        let back = split_quasi_solution(&s, &rho1, 0.7).unwrap();
        assert!(back.q.sub(&h2).linf_norm() < 1e-14);
        assert!(back.u.sub(&u2).linf_norm() < 1e-14);
        assert!(quasi_solution_data(&SpectralField::constant(&g, 0.0), &h2, &u2, 0.7).is_err());
    }

    #[test]
    fn data_spec_builds_and_validates() {
        let g = Grid::new(2, 32, 2.0 * PI).unwrap();
        let spec: DataSpec = toml::from_str("kind = \"quasi_solution\"\nperturbation = 0.01\n[background]\nkind = \"gaussian_bump\"\namplitude = 0.3\nwidth = 0.8\n").unwrap();
        let d = spec.build(&g, 5, 0.5).unwrap();
        assert!(d.background.is_some());
        let again = spec.build(&g, 5, 0.5).unwrap();
        assert_eq!(d.state.q.samples(), again.state.q.samples());
        assert!(DataSpec::HomogeneousProfile { sigma: 2.5, amplitude: 1.0 }.validate(2).is_err());
        assert!(DataSpec::ScaledProfile { lambda_scale: 3, amplitude: 0.1, radius: 1.0 }.validate(2).is_err());
        assert!(DataSpec::GaussianBump { amplitude: -1.5, width: 1.0, center: None }.validate(2).is_err());
    }
}
