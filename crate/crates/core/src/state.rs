//! A scalar-vector pair at one time instant.

use crate::error::{Error, Result};
use crate::field::{SpectralField, VectorField};
use crate::grid::Grid;

/// Log-density `q` (or another scalar unknown) together with a velocity-like field.
#[derive(Clone, Debug)]
pub struct FluidState {
    pub q: SpectralField,
    pub u: VectorField,
}

impl FluidState {
    pub fn new(q: SpectralField, u: VectorField) -> Result<Self> {
        if q.grid() != u.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { q, u })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { q: SpectralField::zeros(grid), u: VectorField::zeros(grid) }
    }

    pub fn grid(&self) -> &Grid {
        self.q.grid()
    }

    /// Density `exp(q)`.
    pub fn rho(&self) -> SpectralField {
        self.q.map(f64::exp)
    }

    pub fn axpby(&self, a: f64, other: &Self, b: f64) -> Self {
        Self { q: self.q.axpby(a, &other.q, b), u: self.u.axpby(a, &other.u, b) }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpby(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpby(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { q: self.q.scale(a), u: self.u.scale(a) }
    }

    pub fn dealias(&self) -> Self {
        Self { q: self.q.dealias(), u: self.u.dealias() }
    }

    /// Largest absolute sample difference over all components.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.q.sub(&other.q).linf_norm().max(self.u.max_abs_diff(&other.u))
    }

    /// Largest absolute sample over all components.
    pub fn max_abs(&self) -> f64 {
        self.u.components().iter().fold(self.q.linf_norm(), |m, c| m.max(c.linf_norm()))
    }

    /// `sqrt(||q||^2 + ||u||^2)` in `L^2`.
    pub fn l2_norm(&self) -> f64 {
        (self.q.l2_norm().powi(2) + self.u.l2_norm().powi(2)).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.q.samples().iter().all(|v| v.is_finite())
            && self.u.components().iter().all(|c| c.samples().iter().all(|v| v.is_finite()))
    }

    pub fn resample(&self, target: &Grid) -> Result<Self> {
        Ok(Self { q: self.q.resample(target)?, u: self.u.resample(target)? })
    }
}
