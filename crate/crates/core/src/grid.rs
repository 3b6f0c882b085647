//! Periodic box `[0, L)^dim` sampled on `n` points per axis.
//!
//! Flat indices are row-major with axis 0 slowest. Wavenumber index `m` on an
//! axis maps to the signed mode `k = m` for `m < n/2` and `k = m - n` otherwise,
//! so the Nyquist mode is `k = -n/2` and `xi = 2 pi k / L`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

struct Inner {
    dim: usize,
    n: usize,
    length: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Wavevector per flat index (unused axes are zero).
    xi: Vec<[f64; 3]>,
    /// Signed integer mode per flat index.
    modes: Vec<[i64; 3]>,
    /// Distinct values of `|xi|^2`, and the shell each flat index falls in.
    shells: Vec<f64>,
    shell_of: Vec<u32>,
}

/// Cheaply clonable grid descriptor with cached FFT plans and wavevectors.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<Inner>,
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length must be positive, got {length}")));
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let total = n.pow(dim as u32);
        let mut xi = Vec::with_capacity(total);
        let mut modes = Vec::with_capacity(total);
        for idx in 0..total {
            let mut k = [0i64; 3];
            let mut w = [0.0; 3];
            let mut rem = idx;
            for axis in (0..dim).rev() {
                let m = rem % n;
                rem /= n;
                let signed = if m < n / 2 { m as i64 } else { m as i64 - n as i64 };
                k[axis] = signed;
                w[axis] = 2.0 * PI * signed as f64 / length;
            }
            xi.push(w);
            modes.push(k);
        }
        let mut by_norm: HashMap<i64, u32> = HashMap::new();
        let mut shells = Vec::new();
        let mut shell_of = Vec::with_capacity(total);
        let base = (2.0 * PI / length).powi(2);
        for k in &modes {
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            let slot = *by_norm.entry(k2).or_insert_with(|| {
                shells.push(base * k2 as f64);
                (shells.len() - 1) as u32
            });
            shell_of.push(slot);
        }
        Ok(Self {
            inner: Arc::new(Inner { dim, n, length, forward, inverse, xi, modes, shells, shell_of }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn length(&self) -> f64 {
        self.inner.length
    }

    /// Grid spacing `h = L / n`.
    pub fn spacing(&self) -> f64 {
        self.inner.length / self.inner.n as f64
    }

    pub fn len(&self) -> usize {
        self.inner.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume of one grid cell, `h^dim`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim() as i32)
    }

    /// Volume of the box, `L^dim`.
    pub fn volume(&self) -> f64 {
        self.length().powi(self.dim() as i32)
    }

    /// Smallest nonzero wavenumber magnitude `2 pi / L`.
    pub fn xi_min(&self) -> f64 {
        2.0 * PI / self.length()
    }

    /// Nyquist wavenumber magnitude `pi n / L`.
    pub fn xi_nyquist(&self) -> f64 {
        PI * self.n() as f64 / self.length()
    }

    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        self.inner.xi[idx]
    }

    pub fn wavevectors(&self) -> &[[f64; 3]] {
        &self.inner.xi
    }

    pub fn mode(&self, idx: usize) -> [i64; 3] {
        self.inner.modes[idx]
    }

    pub fn xi_squared(&self, idx: usize) -> f64 {
        self.inner.shells[self.inner.shell_of[idx] as usize]
    }

    /// Distinct values of `|xi|^2` on the grid.
    pub fn shells(&self) -> &[f64] {
        &self.inner.shells
    }

    /// Index into [`Grid::shells`] of the mode at `idx`.
    pub fn shell_of(&self, idx: usize) -> usize {
        self.inner.shell_of[idx] as usize
    }

    /// Flat index of the mode `-k` for the mode stored at `idx`.
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let n = self.n();
        let k = self.inner.modes[idx];
        let mut out = 0;
        for axis in 0..self.dim() {
            let m = (-k[axis]).rem_euclid(n as i64) as usize;
            out = out * n + m;
        }
        out
    }

    /// Flat index of the signed mode `k` (taken modulo `n`).
    pub fn index_of_mode(&self, k: [i64; 3]) -> usize {
        let n = self.n() as i64;
        let mut out = 0usize;
        for axis in 0..self.dim() {
            out = out * self.n() + k[axis].rem_euclid(n) as usize;
        }
        out
    }

    /// Physical coordinates of grid point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let n = self.n();
        let h = self.spacing();
        let mut x = [0.0; 3];
        let mut rem = idx;
        for axis in (0..self.dim()).rev() {
            x[axis] = (rem % n) as f64 * h;
            rem /= n;
        }
        x
    }

    /// Multi-index of grid point `idx`.
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let n = self.n();
        let mut m = [0usize; 3];
        let mut rem = idx;
        for axis in (0..self.dim()).rev() {
            m[axis] = rem % n;
            rem /= n;
        }
        m
    }

    pub fn flat_index(&self, m: [usize; 3]) -> usize {
        let mut out = 0;
        for axis in 0..self.dim() {
            out = out * self.n() + m[axis] % self.n();
        }
        out
    }

    /// Unnormalized forward DFT along every axis.
    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.forward);
    }

    /// Inverse DFT along every axis, normalized by the number of points.
    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.inverse);
        let scale = 1.0 / self.len() as f64;
        for c in data.iter_mut() {
            *c *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n();
        let dim = self.dim();
        debug_assert_eq!(data.len(), self.len());
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // Last axis is contiguous.
        plan.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..dim.saturating_sub(1) {
            let stride = n.pow((dim - 1 - axis) as u32);
            let block = stride * n;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (j, v) in line.iter_mut().enumerate() {
                        *v = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[base + j * stride] = *v;
                    }
                }
            }
        }
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.dim() == other.dim()
                && self.n() == other.n()
                && self.length() == other.length())
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim())
            .field("n", &self.n())
            .field("length", &self.length())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(0, 16, 1.0).is_err());
        assert!(Grid::new(4, 16, 1.0).is_err());
        assert!(Grid::new(1, 12, 1.0).is_err());
        assert!(Grid::new(1, 4, 1.0).is_err());
        assert!(Grid::new(2, 16, 0.0).is_err());
        assert!(Grid::new(2, 16, f64::NAN).is_err());
    }

    #[test]
    fn wavenumbers_are_symmetric_except_nyquist() {
        let g = Grid::new(1, 16, 2.0 * PI).unwrap();
        let ks: Vec<i64> = (0..16).map(|i| g.mode(i)[0]).collect();
        assert_eq!(ks[0], 0);
        assert_eq!(ks[1], 1);
        assert_eq!(ks[8], -8);
        assert_eq!(ks[15], -1);
        for i in 1..16 {
            if ks[i] != -8 {
                assert!(ks.contains(&(-ks[i])));
            }
        }
        assert!((g.xi_nyquist() - 8.0).abs() < 1e-14);
    }

    #[test]
    fn conjugate_index_round_trips() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        for idx in 0..g.len() {
            let c = g.conjugate_index(idx);
            assert_eq!(g.conjugate_index(c), idx);
            let (a, b) = (g.mode(idx), g.mode(c));
            for axis in 0..3 {
                assert_eq!((a[axis] + b[axis]).rem_euclid(8), 0);
            }
        }
    }
}
