//! Scalar and vector fields on a periodic grid, carried in sample and Fourier form.
//!
//! Coefficients are the unnormalized DFT of the samples, so the zero mode equals
//! `mean * npoints`. Either representation is computed on first access.

use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// A real scalar field on a [`Grid`].
#[derive(Clone)]
pub struct SpectralField {
    grid: Grid,
    samples: OnceLock<Vec<f64>>,
    coeffs: OnceLock<Vec<Complex64>>,
}

impl std::fmt::Debug for SpectralField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralField")
            .field("grid", &self.grid)
            .field("mean", &self.mean())
            .finish()
    }
}

impl SpectralField {
    pub fn from_samples(grid: &Grid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        if let Some(index) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self::from_samples_unchecked(grid, samples))
    }

    pub(crate) fn from_samples_unchecked(grid: &Grid, samples: Vec<f64>) -> Self {
        let cell = OnceLock::new();
        let _ = cell.set(samples);
        Self { grid: grid.clone(), samples: cell, coeffs: OnceLock::new() }
    }

    /// Builds a field from Fourier coefficients, projecting onto Hermitian-symmetric data.
    pub fn from_coeffs(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        if let Some(index) = coeffs.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self::from_coeffs_unchecked(grid, coeffs))
    }

    pub(crate) fn from_coeffs_unchecked(grid: &Grid, coeffs: Vec<Complex64>) -> Self {
        let sym: Vec<Complex64> = (0..coeffs.len())
            .into_par_iter()
            .map(|i| 0.5 * (coeffs[i] + coeffs[grid.conjugate_index(i)].conj()))
            .collect();
        let cell = OnceLock::new();
        let _ = cell.set(sym);
        Self { grid: grid.clone(), samples: OnceLock::new(), coeffs: cell }
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> f64 + Sync) -> Result<Self> {
        let samples: Vec<f64> = (0..grid.len()).into_par_iter().map(|i| f(grid.point(i))).collect();
        Self::from_samples(grid, samples)
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self::from_samples_unchecked(grid, vec![value; grid.len()])
    }

    /// The same values on another grid with equal dimension and point count.
    pub fn with_grid(&self, grid: &Grid) -> Result<Self> {
        if grid.dim() != self.grid.dim() || grid.n() != self.grid.n() {
            return Err(Error::GridMismatch);
        }
        fn copy<T: Clone>(cell: &OnceLock<T>) -> OnceLock<T> {
            let out = OnceLock::new();
            if let Some(v) = cell.get() {
                let _ = out.set(v.clone());
            }
            out
        }
        let samples = copy(&self.samples);
        let coeffs = copy(&self.coeffs);
        Ok(Self { grid: grid.clone(), samples, coeffs })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        self.samples.get_or_init(|| {
            let coeffs = self.coeffs.get().expect("field holds one representation");
            let mut data = coeffs.clone();
            self.grid.inverse(&mut data);
            data.into_iter().map(|c| c.re).collect()
        })
    }

    pub fn coeffs(&self) -> &[Complex64] {
        self.coeffs.get_or_init(|| {
            let samples = self.samples.get().expect("field holds one representation");
            let mut data: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            self.grid.forward(&mut data);
            data
        })
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples();
        self.samples.into_inner().expect("samples initialized")
    }

    /// Forward transform followed by inverse transform.
    pub fn roundtrip(&self) -> Self {
        let mut data: Vec<Complex64> = self.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.grid.forward(&mut data);
        self.grid.inverse(&mut data);
        Self::from_samples_unchecked(&self.grid, data.into_iter().map(|c| c.re).collect())
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Multiplies every coefficient by `m(xi)`.
    ///
    /// A non-finite symbol at `xi = 0` is read as zero; anywhere else it is an error.
    pub fn apply_multiplier(&self, m: impl Fn([f64; 3]) -> Complex64 + Sync) -> Result<Self> {
        let coeffs = self.coeffs();
        let out: Result<Vec<Complex64>> = (0..coeffs.len())
            .into_par_iter()
            .map(|i| {
                let xi = self.grid.wavevector(i);
                let v = m(xi);
                if v.re.is_finite() && v.im.is_finite() {
                    Ok(v * coeffs[i])
                } else if i == 0 {
                    Ok(ZERO)
                } else {
                    Err(Error::SingularMultiplier { xi })
                }
            })
            .collect();
        Ok(Self::from_coeffs_unchecked(&self.grid, out?))
    }

    /// Real radial multiplier `m(|xi|^2)`, with `m` assumed finite.
    pub fn apply_radial(&self, m: impl Fn(f64) -> f64 + Sync) -> Self {
        let coeffs = self.coeffs();
        let out: Vec<Complex64> = (0..coeffs.len())
            .into_par_iter()
            .map(|i| coeffs[i] * m(self.grid.xi_squared(i)))
            .collect();
        Self::from_coeffs_unchecked(&self.grid, out)
    }

    /// Partial derivative along `axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        assert!(axis < self.grid.dim(), "axis out of range");
        let coeffs = self.coeffs();
        let out: Vec<Complex64> = (0..coeffs.len())
            .into_par_iter()
            .map(|i| coeffs[i] * Complex64::new(0.0, self.grid.wavevector(i)[axis]))
            .collect();
        Self::from_coeffs_unchecked(&self.grid, out)
    }

    pub fn gradient(&self) -> VectorField {
        VectorField::from_components_unchecked(
            (0..self.grid.dim()).map(|a| self.derivative(a)).collect(),
        )
    }

    pub fn laplacian(&self) -> Self {
        self.apply_radial(|s| -s)
    }

    /// Inverse Laplacian on mean-free fields; the zero mode is discarded.
    pub fn inverse_laplacian(&self) -> Self {
        self.apply_radial(|s| if s > 0.0 { -1.0 / s } else { 0.0 })
    }

    /// Heat flow `exp(t * diffusivity * Laplacian)`.
    pub fn heat(&self, diffusivity: f64, t: f64) -> Self {
        self.apply_radial(|s| (-diffusivity * s * t).exp())
    }

    /// Removes every mode outside the 2/3-rule ball `|k| <= n/3`.
    pub fn dealias(&self) -> Self {
        let coeffs = self.coeffs();
        let n = self.grid.n() as f64;
        let out: Vec<Complex64> = (0..coeffs.len())
            .into_par_iter()
            .map(|i| if retained(&self.grid, i, n) { coeffs[i] } else { ZERO })
            .collect();
        Self::from_coeffs_unchecked(&self.grid, out)
    }

    /// Whether all modes outside the dealiasing ball vanish (to `tol` relative).
    pub fn is_dealiased(&self, tol: f64) -> bool {
        let coeffs = self.coeffs();
        let n = self.grid.n() as f64;
        let total: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        let outside: f64 = coeffs
            .iter()
            .enumerate()
            .filter(|(i, _)| !retained(&self.grid, *i, n))
            .map(|(_, c)| c.norm_sqr())
            .sum();
        outside <= tol * tol * total.max(f64::MIN_POSITIVE)
    }

    /// Pointwise map on samples.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        let s: Vec<f64> = self.samples().par_iter().map(|&v| f(v)).collect();
        Self::from_samples_unchecked(&self.grid, s)
    }

    /// Pointwise map that rejects non-finite output.
    pub fn try_map(&self, f: impl Fn(f64) -> f64 + Sync) -> Result<Self> {
        let s: Vec<f64> = self.samples().par_iter().map(|&v| f(v)).collect();
        Self::from_samples(&self.grid, s)
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        assert!(self.grid == other.grid, "grid mismatch");
        let a = self.samples();
        let b = other.samples();
        let s: Vec<f64> = a.par_iter().zip(b.par_iter()).map(|(&x, &y)| f(x, y)).collect();
        Self::from_samples_unchecked(&self.grid, s)
    }

    /// Linear combination `a * self + b * other`, carried out in whichever form is available.
    pub fn axpby(&self, a: f64, other: &Self, b: f64) -> Self {
        assert!(self.grid == other.grid, "grid mismatch");
        if let (Some(x), Some(y)) = (self.coeffs.get(), other.coeffs.get()) {
            let c: Vec<Complex64> = x.iter().zip(y).map(|(p, q)| p * a + q * b).collect();
            let cell = OnceLock::new();
            let _ = cell.set(c);
            return Self { grid: self.grid.clone(), samples: OnceLock::new(), coeffs: cell };
        }
        self.zip_map(other, |x, y| a * x + b * y)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpby(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpby(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> Self {
        if let Some(c) = self.coeffs.get() {
            let cell = OnceLock::new();
            let _ = cell.set(c.iter().map(|v| v * a).collect());
            return Self { grid: self.grid.clone(), samples: OnceLock::new(), coeffs: cell };
        }
        self.map(|v| a * v)
    }

    pub fn add_constant(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    /// Pointwise product without dealiasing.
    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |x, y| x * y)
    }

    /// Pointwise product followed by the 2/3 rule.
    pub fn product(&self, other: &Self) -> Self {
        self.mul(other).dealias()
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        Ok(self.add(other))
    }

    pub fn mean(&self) -> f64 {
        if let Some(c) = self.coeffs.get() {
            return c[0].re / self.grid.len() as f64;
        }
        self.samples().iter().sum::<f64>() / self.grid.len() as f64
    }

    /// Rectangle-rule integral over the box.
    pub fn integral(&self) -> f64 {
        self.mean() * self.grid.volume()
    }

    pub fn min(&self) -> f64 {
        self.samples().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn linf_norm(&self) -> f64 {
        self.samples().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `L^2` norm by the rectangle rule.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.samples().iter().map(|v| v * v).sum();
        (sum * self.grid.cell_volume()).sqrt()
    }

    /// `L^2` norm computed from the coefficients by Parseval.
    pub fn l2_norm_spectral(&self) -> f64 {
        let sum: f64 = self.coeffs().iter().map(|c| c.norm_sqr()).sum();
        (sum * self.grid.volume()).sqrt() / self.grid.len() as f64
    }

    /// `L^p` norm by the rectangle rule; `p = inf` is the max over samples.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.linf_norm();
        }
        if p == 2.0 {
            return self.l2_norm();
        }
        let sum: f64 = self.samples().iter().map(|v| v.abs().powf(p)).sum();
        (sum * self.grid.cell_volume()).powf(1.0 / p)
    }

    /// `L^2` inner product.
    pub fn inner(&self, other: &Self) -> f64 {
        let a = self.samples();
        let b = other.samples();
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.grid.cell_volume()
    }

    /// Spectral interpolation onto a grid of the same box length and dimension.
    ///
    /// Modes that the target cannot represent symmetrically are dropped.
    pub fn resample(&self, target: &Grid) -> Result<Self> {
        if target.dim() != self.grid.dim() || target.length() != self.grid.length() {
            return Err(Error::GridMismatch);
        }
        let keep = (self.grid.n().min(target.n()) / 2) as i64;
        let factor = target.len() as f64 / self.grid.len() as f64;
        let src = self.coeffs();
        let mut out = vec![ZERO; target.len()];
        for (i, c) in src.iter().enumerate() {
            let k = self.grid.mode(i);
            if (0..self.grid.dim()).all(|a| k[a].abs() < keep) {
                out[target.index_of_mode(k)] = c * factor;
            }
        }
        Ok(Self::from_coeffs_unchecked(target, out))
    }

    /// Maximum absolute sample difference, as a fraction of `max(|other|_inf, floor)`.
    pub fn rel_linf_diff(&self, other: &Self, floor: f64) -> f64 {
        let d = self.sub(other).linf_norm();
        d / other.linf_norm().max(floor)
    }
}

fn retained(grid: &Grid, i: usize, n: f64) -> bool {
    let k = grid.mode(i);
    let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
    9.0 * k2 <= n * n
}

/// A vector field with one scalar component per spatial axis.
#[derive(Clone, Debug)]
pub struct VectorField {
    components: Vec<SpectralField>,
}

impl VectorField {
    pub fn new(components: Vec<SpectralField>) -> Result<Self> {
        let first = components.first().ok_or(Error::RankMismatch { expected: 1, got: 0 })?;
        let grid = first.grid();
        if components.len() != grid.dim() {
            return Err(Error::RankMismatch { expected: grid.dim(), got: components.len() });
        }
        if components.iter().any(|c| c.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { components })
    }

    pub(crate) fn from_components_unchecked(components: Vec<SpectralField>) -> Self {
        Self { components }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { components: (0..grid.dim()).map(|_| SpectralField::zeros(grid)).collect() }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> [f64; 3] + Sync) -> Result<Self> {
        let comps = (0..grid.dim())
            .map(|a| SpectralField::from_fn(grid, |x| f(x)[a]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components: comps })
    }

    pub fn grid(&self) -> &Grid {
        self.components[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, axis: usize) -> &SpectralField {
        &self.components[axis]
    }

    pub fn components(&self) -> &[SpectralField] {
        &self.components
    }

    pub fn into_components(self) -> Vec<SpectralField> {
        self.components
    }

    pub fn map_components(&self, f: impl Fn(&SpectralField) -> SpectralField) -> Self {
        Self { components: self.components.iter().map(f).collect() }
    }

    pub fn zip_components(&self, other: &Self, f: impl Fn(&SpectralField, &SpectralField) -> SpectralField) -> Self {
        Self {
            components: self.components.iter().zip(&other.components).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn divergence(&self) -> SpectralField {
        let mut acc = self.components[0].derivative(0);
        for a in 1..self.dim() {
            acc = acc.add(&self.components[a].derivative(a));
        }
        acc
    }

    /// Curl components: none in 1D, the scalar vorticity in 2D, three components in 3D.
    pub fn curl(&self) -> Vec<SpectralField> {
        let c = &self.components;
        match self.dim() {
            1 => Vec::new(),
            2 => vec![c[1].derivative(0).sub(&c[0].derivative(1))],
            _ => vec![
                c[2].derivative(1).sub(&c[1].derivative(2)),
                c[0].derivative(2).sub(&c[2].derivative(0)),
                c[1].derivative(0).sub(&c[0].derivative(1)),
            ],
        }
    }

    pub fn laplacian(&self) -> Self {
        self.map_components(|c| c.laplacian())
    }

    pub fn dealias(&self) -> Self {
        self.map_components(|c| c.dealias())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_components(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_components(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_components(|c| c.scale(s))
    }

    pub fn axpby(&self, a: f64, other: &Self, b: f64) -> Self {
        self.zip_components(other, |x, y| x.axpby(a, y, b))
    }

    /// Multiplies every component by a scalar field, without dealiasing.
    pub fn mul_scalar(&self, f: &SpectralField) -> Self {
        self.map_components(|c| c.mul(f))
    }

    /// Pointwise dot product without dealiasing.
    pub fn dot(&self, other: &Self) -> SpectralField {
        let mut acc = self.components[0].mul(&other.components[0]);
        for a in 1..self.dim() {
            acc = acc.add(&self.components[a].mul(&other.components[a]));
        }
        acc
    }

    pub fn norm_squared(&self) -> SpectralField {
        self.dot(self)
    }

    /// Directional derivative `(self . grad) f` without dealiasing.
    pub fn advect(&self, f: &SpectralField) -> SpectralField {
        self.dot(&f.gradient())
    }

    /// `(self . grad) w` componentwise, without dealiasing.
    pub fn advect_vector(&self, w: &Self) -> Self {
        w.map_components(|c| self.advect(c))
    }

    pub fn l2_norm(&self) -> f64 {
        self.components.iter().map(|c| c.l2_norm().powi(2)).sum::<f64>().sqrt()
    }

    /// Max over grid points of the Euclidean magnitude.
    pub fn linf_norm(&self) -> f64 {
        self.norm_squared().max().max(0.0).sqrt()
    }

    /// Max over components of the absolute sample difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.sub(b).linf_norm())
            .fold(0.0, f64::max)
    }

    pub fn resample(&self, target: &Grid) -> Result<Self> {
        Ok(Self {
            components: self.components.iter().map(|c| c.resample(target)).collect::<Result<_>>()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_band_limited(grid: &Grid, kmax: i64, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = vec![ZERO; grid.len()];
        for (i, v) in c.iter_mut().enumerate() {
            let k = grid.mode(i);
            if (0..grid.dim()).all(|a| k[a].abs() <= kmax) {
                *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        SpectralField::from_coeffs(grid, c).unwrap()
    }

    #[test]
    fn constant_round_trips() {
        let g = Grid::new(2, 16, 3.0).unwrap();
        let f = SpectralField::constant(&g, 1.0);
        let r = f.roundtrip();
        assert!(r.samples().iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!((f.coeffs()[0].re - g.len() as f64).abs() < 1e-10);
        assert!((f.mean() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dirac_has_flat_spectrum() {
        let g = Grid::new(1, 32, 1.0).unwrap();
        let mut s = vec![0.0; 32];
        s[5] = 1.0;
        let f = SpectralField::from_samples(&g, s.clone()).unwrap();
        assert!(f.coeffs().iter().all(|c| (c.norm() - 1.0).abs() < 1e-12));
        let r = f.roundtrip();
        for (a, b) in r.samples().iter().zip(&s) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_samples_rejected() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let mut s = vec![0.0; 8];
        s[3] = f64::NAN;
        assert_eq!(SpectralField::from_samples(&g, s).unwrap_err(), Error::NonFinite { index: 3 });
    }

    #[test]
    fn parseval_matches_quadrature() {
        for dim in 1..=3 {
            let g = Grid::new(dim, 16, 2.5).unwrap();
            let f = random_band_limited(&g, 5, dim as u64);
            let f = SpectralField::from_samples(&g, f.samples().to_vec()).unwrap();
            let a = f.l2_norm();
            let b = f.l2_norm_spectral();
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn gradient_of_sine() {
        let l = 3.0;
        let g = Grid::new(1, 32, l).unwrap();
        let f = SpectralField::from_fn(&g, |x| (2.0 * PI * x[0] / l).sin()).unwrap();
        let d = f.derivative(0);
        for (i, v) in d.samples().iter().enumerate() {
            let x = g.point(i)[0];
            assert!((v - 2.0 * PI / l * (2.0 * PI * x / l).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let f = SpectralField::constant(&g, 4.2);
        assert!(f.laplacian().linf_norm() < 1e-12);
    }

    #[test]
    fn inverse_laplacian_inverts_on_mean_free() {
        let g = Grid::new(2, 32, 2.0).unwrap();
        let f = random_band_limited(&g, 10, 7);
        let back = f.laplacian().inverse_laplacian();
        let expect = f.add_constant(-f.mean());
        assert!(back.sub(&expect).l2_norm() <= 1e-10 * expect.l2_norm());
    }

    #[test]
    fn singular_multiplier_rejected() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let f = random_band_limited(&g, 4, 1);
        let ok = f.apply_multiplier(|xi| Complex64::new(1.0 / xi[0].abs(), 0.0));
        assert!(ok.is_ok());
        let bad = f.apply_multiplier(|xi| {
            if (xi[0] - 2.0 * PI).abs() < 1e-9 { Complex64::new(f64::INFINITY, 0.0) } else { Complex64::new(1.0, 0.0) }
        });
        assert!(matches!(bad, Err(Error::SingularMultiplier { .. })));
    }

    #[test]
    fn multipliers_compose() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let f = random_band_limited(&g, 6, 3);
        let m1 = |xi: [f64; 3]| Complex64::new(1.0 + xi[0] * xi[0], xi[1]);
        let m2 = |xi: [f64; 3]| Complex64::new((-0.01 * xi[1] * xi[1]).exp(), 0.3 * xi[0]);
        let a = f.apply_multiplier(m1).unwrap().apply_multiplier(m2).unwrap();
        let b = f.apply_multiplier(|xi| m1(xi) * m2(xi)).unwrap();
        let diff: f64 = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).norm_sqr()).sum();
        let norm: f64 = b.coeffs().iter().map(|x| x.norm_sqr()).sum();
        assert!(diff.sqrt() <= 1e-13 * norm.sqrt());
    }

    #[test]
    fn curl_grad_and_div_curl_vanish() {
        for dim in 2..=3 {
            let g = Grid::new(dim, 16, 1.0).unwrap();
            let f = random_band_limited(&g, 7, 11);
            let f = f.scale(1.0 / f.l2_norm());
            for c in f.gradient().curl() {
                assert!(c.linf_norm() < 1e-12 * f.gradient().linf_norm().max(1.0));
            }
            if dim == 3 {
                let v = VectorField::new(vec![
                    random_band_limited(&g, 7, 1),
                    random_band_limited(&g, 7, 2),
                    random_band_limited(&g, 7, 3),
                ])
                .unwrap();
                let w = VectorField::new(v.curl()).unwrap();
                assert!(w.divergence().linf_norm() < 1e-10);
            }
        }
    }

    #[test]
    fn dealias_fixed_point_and_nyquist() {
        let g = Grid::new(1, 32, 1.0).unwrap();
        let f = random_band_limited(&g, 10, 5);
        assert!(f.dealias().sub(&f).linf_norm() < 1e-14);
        let nyq = SpectralField::from_fn(&g, |x| (PI * 32.0 * x[0]).cos()).unwrap();
        assert!(nyq.linf_norm() > 0.5);
        assert!(nyq.dealias().linf_norm() < 1e-14);
    }

    #[test]
    fn dealiased_product_matches_fine_grid() {
        for dim in 1..=2 {
            let g = Grid::new(dim, 32, 1.7).unwrap();
            let fine = Grid::new(dim, 64, 1.7).unwrap();
            let a = random_band_limited(&g, 10, 21).dealias();
            let b = random_band_limited(&g, 10, 22).dealias();
            let coarse = a.product(&b);
            let exact = a.resample(&fine).unwrap().mul(&b.resample(&fine).unwrap());
            let reference = exact.resample(&g).unwrap().dealias();
            let err = coarse.sub(&reference).l2_norm();
            assert!(err <= 1e-10 * reference.l2_norm());
        }
    }

    #[test]
    fn resample_preserves_band_limited_values() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let fine = Grid::new(1, 64, 1.0).unwrap();
        let f = random_band_limited(&g, 5, 9);
        let up = f.resample(&fine).unwrap();
        for i in 0..16 {
            assert!((up.samples()[4 * i] - f.samples()[i]).abs() < 1e-12);
        }
        let down = up.resample(&g).unwrap();
        assert!(down.sub(&f).linf_norm() < 1e-12);
    }
}
