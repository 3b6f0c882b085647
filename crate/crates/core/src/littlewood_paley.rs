//! Dyadic frequency blocks and Besov-type norms.
//!
//! The low-pass cutoff `chi` is a radial smooth step, equal to 1 for `|xi| <= 3/4` and
//! 0 for `|xi| >= 1`. The block cutoff is `phi(xi) = chi(xi/2) - chi(xi)`, so that
//! `phi` is supported in `3/4 <= |xi| <= 2`, equals 1 on `1 <= |xi| <= 3/2`, and the
//! dyadic sum telescopes.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::Grid;

fn bump(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// Smooth step from 1 at `t <= 0` to 0 at `t >= 1`.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let a = bump(1.0 - t);
    a / (a + bump(t))
}

/// Low-pass cutoff as a function of the radius `|xi|`.
pub fn chi(r: f64) -> f64 {
    smooth_step((r - 0.75) * 4.0)
}

/// Annulus cutoff as a function of the radius `|xi|`.
pub fn phi(r: f64) -> f64 {
    chi(0.5 * r) - chi(r)
}

/// The blocks a grid can resolve, with their cutoffs.
#[derive(Clone, Debug)]
pub struct DyadicPartition {
    grid: Grid,
    j_min: i32,
    j_max: i32,
}

impl DyadicPartition {
    pub fn new(grid: &Grid) -> Result<Self> {
        let j_min = grid.xi_min().log2().floor() as i32;
        let j_max = (0.5 * grid.xi_nyquist()).log2().floor() as i32;
        if j_max < j_min {
            return Err(Error::InvalidGrid("grid resolves no dyadic block".into()));
        }
        Ok(Self { grid: grid.clone(), j_min, j_max })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn range(&self) -> std::ops::RangeInclusive<i32> {
        self.j_min..=self.j_max
    }

    pub fn len(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Radii on which the resolvable blocks sum to one.
    pub fn certified_band(&self) -> (f64, f64) {
        (2f64.powi(self.j_min), 1.5 * 2f64.powi(self.j_max))
    }

    pub fn contains(&self, l: i32) -> bool {
        self.range().contains(&l)
    }

    fn check(&self, l: i32) -> Result<()> {
        if !self.contains(l) {
            return Err(Error::BlockOutOfRange { block: l, min: self.j_min, max: self.j_max });
        }
        Ok(())
    }

    /// Weight of block `l` at radius `r`.
    pub fn weight(l: i32, r: f64) -> f64 {
        phi(r * 2f64.powi(-l))
    }

    /// Sum of the resolvable block weights at radius `r`.
    pub fn partition_sum(&self, r: f64) -> f64 {
        self.range().map(|l| Self::weight(l, r)).sum()
    }

    /// `Delta_l f`.
    pub fn block(&self, f: &SpectralField, l: i32) -> Result<SpectralField> {
        self.check(l)?;
        Ok(f.apply_radial(|s| Self::weight(l, s.sqrt())))
    }

    /// `S_l f = chi(2^-l D) f`, with no range restriction.
    pub fn low_pass(&self, f: &SpectralField, l: i32) -> SpectralField {
        f.apply_radial(|s| chi(s.sqrt() * 2f64.powi(-l)))
    }

    /// Sum of all resolvable blocks.
    pub fn reconstruct(&self, f: &SpectralField) -> SpectralField {
        let range = self.range();
        f.apply_radial(move |s| {
            let r = s.sqrt();
            range.clone().map(|l| Self::weight(l, r)).sum()
        })
    }

    /// `L^2` norm of every block, from the coefficients.
    pub fn block_l2_norms(&self, f: &SpectralField) -> Vec<f64> {
        let g = &self.grid;
        let coeffs = f.coeffs();
        let nb = self.len();
        // Fixed chunking keeps the summation order, and so the result, independent of scheduling.
        let partials: Vec<Vec<f64>> = (0..coeffs.len())
            .collect::<Vec<_>>()
            .par_chunks(4096)
            .map(|chunk| {
                let mut acc = vec![0.0; nb];
                for &i in chunk {
                    let r = g.xi_squared(i).sqrt();
                    if r > 0.0 {
                        let lo = (r.log2().floor() as i32 - 1).max(self.j_min);
                        let hi = (r.log2().floor() as i32 + 1).min(self.j_max);
                        let e = coeffs[i].norm_sqr();
                        for l in lo..=hi {
                            let w = Self::weight(l, r);
                            acc[(l - self.j_min) as usize] += w * w * e;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut sums = vec![0.0; nb];
        for p in partials {
            sums.iter_mut().zip(p).for_each(|(x, y)| *x += y);
        }
        let scale = g.volume() / (g.len() as f64).powi(2);
        sums.into_iter().map(|v| (v * scale).sqrt()).collect()
    }

    /// `L^p` norm of every block.
    pub fn block_norms(&self, f: &SpectralField, p: f64) -> Vec<f64> {
        if p == 2.0 {
            return self.block_l2_norms(f);
        }
        self.range()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|l| f.apply_radial(|s| Self::weight(l, s.sqrt())).lp_norm(p))
            .collect()
    }

    pub fn besov_norm(&self, f: &SpectralField, spec: &BesovSpec) -> Result<f64> {
        spec.validate()?;
        if spec.hybrid.is_some() {
            return Err(Error::InvalidNormSpec("hybrid spec passed to the plain Besov norm".into()));
        }
        self.besov_norm_on(f, spec.s, spec.p, spec.r, self.j_min, self.j_max)
    }

    /// Besov aggregation restricted to blocks `lo..=hi` (clamped to the resolvable range).
    pub fn besov_norm_on(&self, f: &SpectralField, s: f64, p: f64, r: f64, lo: i32, hi: i32) -> Result<f64> {
        check_index("p", p)?;
        check_index("r", r)?;
        let norms = self.block_norms(f, p);
        Ok(self.aggregate(&norms, s, r, lo, hi))
    }

    /// Weighted `l^r` sum of precomputed block norms over `lo..=hi`.
    pub fn aggregate(&self, norms: &[f64], s: f64, r: f64, lo: i32, hi: i32) -> f64 {
        let terms = self
            .range()
            .zip(norms)
            .filter(|(l, _)| (lo..=hi).contains(l))
            .map(|(l, n)| 2f64.powf(l as f64 * s) * n);
        lr_sum(terms, r)
    }

    pub fn hybrid_besov_norm(&self, f: &SpectralField, spec: &BesovSpec) -> Result<f64> {
        spec.validate()?;
        let h = spec
            .hybrid
            .as_ref()
            .ok_or_else(|| Error::InvalidNormSpec("hybrid parameters missing".into()))?;
        self.check(h.l0)?;
        let low = self.besov_norm_on(f, h.s_low, h.p_low, h.r_low, self.j_min, h.l0)?;
        let high = self.besov_norm_on(f, h.s_high, h.p_high, h.r_high, h.l0 + 1, self.j_max)?;
        Ok(low + high)
    }

    /// Chemin–Lerner norm: time `L^rho` per block (trapezoid rule), then weighted `l^r`.
    pub fn chemin_lerner_norm(&self, times: &[f64], fields: &[SpectralField], rho: f64, spec: &BesovSpec) -> Result<f64> {
        spec.validate()?;
        check_index("rho", rho)?;
        check_times(times, fields.len())?;
        let per_time: Vec<Vec<f64>> = fields.par_iter().map(|f| self.block_norms(f, spec.p)).collect();
        let per_block: Vec<f64> = (0..self.len())
            .map(|b| {
                let series: Vec<f64> = per_time.iter().map(|v| v[b]).collect();
                time_lp(times, &series, rho)
            })
            .collect();
        Ok(self.aggregate(&per_block, spec.s, spec.r, self.j_min, self.j_max))
    }

    /// Plain `L^rho_T(B^s_{p,r})`: Besov norm per time, then time `L^rho`.
    pub fn time_besov_norm(&self, times: &[f64], fields: &[SpectralField], rho: f64, spec: &BesovSpec) -> Result<f64> {
        check_times(times, fields.len())?;
        let series: Vec<f64> = fields.iter().map(|f| self.besov_norm(f, spec)).collect::<Result<_>>()?;
        Ok(time_lp(times, &series, rho))
    }

    /// Values `2^{j(N/2 - sigma)} ||Delta_j f||_{L^2}` over the resolvable range.
    pub fn scaling_sequence(&self, f: &SpectralField, sigma: f64) -> Vec<(i32, f64)> {
        let e = 0.5 * self.grid.dim() as f64 - sigma;
        self.range()
            .zip(self.block_l2_norms(f))
            .map(|(l, n)| (l, 2f64.powf(l as f64 * e) * n))
            .collect()
    }
}

fn check_index(name: &str, v: f64) -> Result<()> {
    if v.is_nan() || v < 1.0 {
        return Err(Error::InvalidNormSpec(format!("{name} must lie in [1, inf], got {v}")));
    }
    Ok(())
}

fn check_times(times: &[f64], count: usize) -> Result<()> {
    if times.len() != count {
        return Err(Error::InvalidArgument("one time per field required".into()));
    }
    if times.len() < 2 {
        return Err(Error::InvalidArgument("at least two time samples required".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::UnsortedTimes);
    }
    Ok(())
}

/// `l^r` sum of non-negative terms.
pub fn lr_sum(terms: impl Iterator<Item = f64>, r: f64) -> f64 {
    if r.is_infinite() {
        terms.fold(0.0, f64::max)
    } else if r == 1.0 {
        terms.sum()
    } else {
        terms.map(|t| t.powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

/// Time `L^rho` norm of a sampled series by the trapezoid rule.
pub fn time_lp(times: &[f64], values: &[f64], rho: f64) -> f64 {
    if rho.is_infinite() {
        return values.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let integral: f64 = times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0].abs().powf(rho) + v[1].abs().powf(rho)))
        .sum();
    integral.powf(1.0 / rho)
}

/// Split-regularity parameters for a hybrid Besov norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridSpec {
    pub s_low: f64,
    pub s_high: f64,
    pub l0: i32,
    pub p_low: f64,
    pub p_high: f64,
    pub r_low: f64,
    pub r_high: f64,
}

/// Descriptor of a Besov norm `B^s_{p,r}`, optionally hybrid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovSpec {
    pub s: f64,
    pub p: f64,
    pub r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hybrid: Option<HybridSpec>,
}

impl BesovSpec {
    pub fn new(s: f64, p: f64, r: f64) -> Self {
        Self { s, p, r, hybrid: None }
    }

    pub fn hybrid(h: HybridSpec) -> Self {
        Self { s: h.s_low, p: h.p_low, r: h.r_low, hybrid: Some(h) }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.s.is_finite() {
            return Err(Error::InvalidNormSpec("regularity index must be finite".into()));
        }
        check_index("p", self.p)?;
        check_index("r", self.r)?;
        if let Some(h) = &self.hybrid {
            for (n, v) in [("p_low", h.p_low), ("p_high", h.p_high), ("r_low", h.r_low), ("r_high", h.r_high)] {
                check_index(n, v)?;
            }
        }
        Ok(())
    }

    /// Compact identifier such as `s=1.5,p=2,r=inf` or with `,l0=3` for hybrid specs.
    pub fn id(&self) -> String {
        let f = |v: f64| if v.is_infinite() { "inf".to_string() } else { format!("{v}") };
        match &self.hybrid {
            None => format!("s={},p={},r={}", f(self.s), f(self.p), f(self.r)),
            Some(h) => format!(
                "s={}/{},p={}/{},r={}/{},l0={}",
                f(h.s_low),
                f(h.s_high),
                f(h.p_low),
                f(h.p_high),
                f(h.r_low),
                f(h.r_high),
                h.l0
            ),
        }
    }
}

/// Time series of one norm.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormSeries {
    pub spec: BesovSpec,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl NormSeries {
    pub fn new(spec: BesovSpec) -> Self {
        Self { spec, times: Vec::new(), values: Vec::new() }
    }

    pub fn push(&mut self, t: f64, v: f64) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::UnsortedTimes);
            }
        }
        if !(v >= 0.0) {
            return Err(Error::InvalidArgument(format!("norm value must be non-negative, got {v}")));
        }
        self.times.push(t);
        self.values.push(v);
        Ok(())
    }

    /// CSV rows `time,spec-id,value`.
    pub fn csv_rows(&self) -> Vec<String> {
        let id = self.spec.id();
        self.times
            .iter()
            .zip(&self.values)
            .map(|(t, v)| format!("{t:.17e},\"{id}\",{v:.17e}"))
            .collect()
    }
}

/// Outcome of a dyadic scaling check.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub sigma: f64,
    pub blocks: Vec<i32>,
    pub values: Vec<f64>,
    /// Largest relative deviation from the mean over the checked blocks.
    pub max_deviation: f64,
}

/// Checks that `2^{j(N/2 - sigma)} ||Delta_j f||` is flat over the middle third of the range.
pub fn block_scaling_check(partition: &DyadicPartition, f: &SpectralField, sigma: f64) -> ScalingReport {
    let seq = partition.scaling_sequence(f, sigma);
    let (lo, hi) = middle_third(partition);
    let sel: Vec<(i32, f64)> = seq.into_iter().filter(|(l, _)| (lo..=hi).contains(l)).collect();
    let mean = sel.iter().map(|(_, v)| v).sum::<f64>() / sel.len() as f64;
    let max_deviation = sel.iter().map(|(_, v)| (v / mean - 1.0).abs()).fold(0.0, f64::max);
    ScalingReport {
        sigma,
        blocks: sel.iter().map(|(l, _)| *l).collect(),
        values: sel.iter().map(|(_, v)| *v).collect(),
        max_deviation,
    }
}

/// Middle third of the resolvable block range (at least one block).
pub fn middle_third(partition: &DyadicPartition) -> (i32, i32) {
    let n = partition.len() as i32;
    let third = n / 3;
    let lo = partition.j_min() + third;
    let hi = (partition.j_max() - third).max(lo);
    (lo, hi)
}

/// Pure Fourier mode `cos(xi . x)` for integer mode `k`, normalized to unit `L^2` norm.
pub fn unit_mode(grid: &Grid, k: [i64; 3]) -> SpectralField {
    let mut c = vec![Complex64::new(0.0, 0.0); grid.len()];
    c[grid.index_of_mode(k)] = Complex64::new(1.0, 0.0);
    c[grid.index_of_mode([-k[0], -k[1], -k[2]])] = Complex64::new(1.0, 0.0);
    let f = SpectralField::from_coeffs(grid, c).expect("finite coefficients");
    let n = f.l2_norm();
    f.scale(1.0 / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(grid: &Grid, seed: u64, band: (f64, f64)) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<Complex64> = (0..grid.len())
            .map(|i| {
                let r = grid.xi_squared(i).sqrt();
                if r >= band.0 && r <= band.1 {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        SpectralField::from_coeffs(grid, c).unwrap()
    }

    #[test]
    fn cutoffs_have_stated_supports() {
        assert_eq!(chi(0.75), 1.0);
        assert_eq!(chi(1.0), 0.0);
        assert_eq!(phi(0.74), 0.0);
        assert_eq!(phi(2.01), 0.0);
        assert!((phi(1.0) - 1.0).abs() < 1e-15);
        assert!((phi(1.5) - 1.0).abs() < 1e-15);
        assert!(phi(0.9) > 0.0 && phi(0.9) < 1.0);
        for i in 0..=200 {
            let r = 0.7 + i as f64 * 0.01;
            assert!((0.0..=1.0).contains(&phi(r)));
        }
    }

    #[test]
    fn partition_of_unity_on_certified_band() {
        let g = Grid::new(2, 64, 2.0 * PI).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let (lo, hi) = p.certified_band();
        for i in 0..g.len() {
            let r = g.xi_squared(i).sqrt();
            if r >= lo && r <= hi {
                assert!((p.partition_sum(r) - 1.0).abs() <= 1e-10, "r = {r}");
            }
        }
        // Non-homogeneous variant: chi plus the blocks from 0 upward.
        for i in 0..=400 {
            let r = i as f64 * 0.05;
            if r <= hi {
                let s: f64 = chi(r) + (0..=p.j_max()).map(|l| DyadicPartition::weight(l, r)).sum::<f64>();
                assert!((s - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn block_range_on_unit_box() {
        let g = Grid::new(1, 256, 2.0 * PI).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        assert_eq!(p.j_min(), 0);
        assert_eq!(p.j_max(), 6);
        assert!(p.block(&SpectralField::zeros(&g), 7).is_err());
    }

    #[test]
    fn single_mode_blocks() {
        let g = Grid::new(1, 128, 2.0 * PI).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let f = unit_mode(&g, [8, 0, 0]);
        let b = p.block(&f, 3).unwrap();
        assert!(b.sub(&f).linf_norm() < 1e-14);
        assert!(p.block(&f, 5).unwrap().linf_norm() < 1e-14);
        let norm = p.besov_norm(&f, &BesovSpec::new(1.5, 2.0, f64::INFINITY)).unwrap();
        let expect = 2f64.powf(3.0 * 1.5);
        assert!(norm >= expect / 2.0 && norm <= expect * 2.0);
    }

    #[test]
    fn reconstruction_on_band_limited_field() {
        let g = Grid::new(2, 64, 2.0 * PI).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let f = random_field(&g, 3, p.certified_band());
        let sum = p.range().map(|l| p.block(&f, l).unwrap()).reduce(|a, b| a.add(&b)).unwrap();
        assert!(sum.sub(&f).l2_norm() <= 1e-8 * f.l2_norm());
        assert!(p.reconstruct(&f).sub(&f).l2_norm() <= 1e-8 * f.l2_norm());
    }

    #[test]
    fn block_orthogonality() {
        let g = Grid::new(1, 256, 2.0 * PI).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let f = random_field(&g, 4, (1.0, 100.0));
        for l in p.range() {
            for m in p.range() {
                if (l - m).abs() >= 2 {
                    let b = p.block(&p.block(&f, l).unwrap(), m).unwrap();
                    assert!(b.linf_norm() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn spectral_block_norms_match_quadrature() {
        let g = Grid::new(2, 32, 3.0).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let f = random_field(&g, 5, (0.0, 50.0));
        let fast = p.block_l2_norms(&f);
        for (b, l) in p.range().enumerate() {
            let slow = p.block(&f, l).unwrap().l2_norm();
            assert!((fast[b] - slow).abs() <= 1e-12 * slow.max(1e-300));
        }
        let viaq: Vec<f64> = p.range().map(|l| p.block(&f, l).unwrap().lp_norm(2.0)).collect();
        let direct = p.block_norms(&f, 3.0);
        assert_eq!(direct.len(), viaq.len());
    }

    #[test]
    fn zero_field_and_homogeneity() {
        let g = Grid::new(1, 64, 1.0).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let spec = BesovSpec::new(0.5, 2.0, 1.0);
        assert_eq!(p.besov_norm(&SpectralField::zeros(&g), &spec).unwrap(), 0.0);
        let f = random_field(&g, 6, (0.0, 1e9));
        let a = p.besov_norm(&f, &spec).unwrap();
        let b = p.besov_norm(&f.scale(-3.5), &spec).unwrap();
        assert!((b - 3.5 * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn interpolation_inequality() {
        let g = Grid::new(2, 64, 2.0 * PI).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        for seed in 0..5 {
            let f = random_field(&g, seed, (0.0, 1e9));
            let (s1, s2) = (1.5, -0.5);
            let n1 = p.besov_norm(&f, &BesovSpec::new(s1, 2.0, 2.0)).unwrap();
            let n2 = p.besov_norm(&f, &BesovSpec::new(s2, 2.0, 2.0)).unwrap();
            for th in [0.25, 0.5, 0.75] {
                let mid = p.besov_norm(&f, &BesovSpec::new(th * s1 + (1.0 - th) * s2, 2.0, 2.0)).unwrap();
                assert!(mid <= n1.powf(th) * n2.powf(1.0 - th) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn derivative_shift_factor_is_bounded() {
        let g = Grid::new(1, 256, 2.0 * PI).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let mut ratios = Vec::new();
        for seed in 0..5 {
            let f = random_field(&g, seed, (0.0, 1e9));
            let a = p.besov_norm(&f.derivative(0), &BesovSpec::new(0.0, 2.0, 1.0)).unwrap();
            let b = p.besov_norm(&f, &BesovSpec::new(1.0, 2.0, 1.0)).unwrap();
            ratios.push(a / b);
        }
        // Each block of the derivative sits between 3/4 and 2 times the block itself.
        assert!(ratios.iter().all(|&r| (0.75..=2.0).contains(&r)));
    }

    #[test]
    fn hybrid_reduces_to_plain() {
        let g = Grid::new(2, 64, 2.0 * PI).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let f = random_field(&g, 9, (0.0, 1e9));
        let h = HybridSpec { s_low: 1.0, s_high: 1.0, l0: 2, p_low: 2.0, p_high: 2.0, r_low: 1.0, r_high: 1.0 };
        let a = p.hybrid_besov_norm(&f, &BesovSpec::hybrid(h.clone())).unwrap();
        let b = p.besov_norm(&f, &BesovSpec::new(1.0, 2.0, 1.0)).unwrap();
        assert!((a - b).abs() <= 1e-12 * b);

        let h2 = HybridSpec { s_low: 0.5, s_high: 2.0, l0: 3, p_low: 2.0, p_high: 2.0, r_low: 1.0, r_high: 2.0 };
        let a = p.hybrid_besov_norm(&f, &BesovSpec::hybrid(h2)).unwrap();
        let low = p.besov_norm_on(&f, 0.5, 2.0, 1.0, p.j_min(), 3).unwrap();
        let high = p.besov_norm_on(&f, 2.0, 2.0, 2.0, 4, p.j_max()).unwrap();
        assert!((a - (low + high)).abs() <= 1e-12 * a);

        let bad = HybridSpec { l0: 40, ..h };
        assert!(matches!(p.hybrid_besov_norm(&f, &BesovSpec::hybrid(bad)), Err(Error::BlockOutOfRange { .. })));
    }

    #[test]
    fn hybrid_low_part_vanishes_above_l0() {
        let g = Grid::new(1, 256, 2.0 * PI).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let f = random_field(&g, 2, (16.0, 60.0));
        assert_eq!(p.besov_norm_on(&f, 1.0, 2.0, 1.0, p.j_min(), 2).unwrap(), 0.0);
    }

    #[test]
    fn chemin_lerner_orderings() {
        let g = Grid::new(1, 128, 2.0 * PI).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let a = unit_mode(&g, [2, 0, 0]);
        let b = unit_mode(&g, [16, 0, 0]);
        let times: Vec<f64> = (0..21).map(|i| i as f64 * 0.05).collect();
        let fields: Vec<SpectralField> = times
            .iter()
            .map(|t| a.scale((-t * 3.0f64).exp()).add(&b.scale((t * 2.0f64).cos())))
            .collect();
        // Constant in time.
        let spec = BesovSpec::new(0.5, 2.0, 1.0);
        let consts = vec![a.clone(); times.len()];
        let cl = p.chemin_lerner_norm(&times, &consts, f64::INFINITY, &spec).unwrap();
        assert!((cl - p.besov_norm(&a, &spec).unwrap()).abs() < 1e-12);
        // r = rho = 2: both orders agree.
        let s22 = BesovSpec::new(0.5, 2.0, 2.0);
        let x = p.chemin_lerner_norm(&times, &fields, 2.0, &s22).unwrap();
        let y = p.time_besov_norm(&times, &fields, 2.0, &s22).unwrap();
        assert!((x - y).abs() <= 1e-12 * y);
        // r = 1 <= rho = inf.
        let x = p.chemin_lerner_norm(&times, &fields, f64::INFINITY, &spec).unwrap();
        let y = p.time_besov_norm(&times, &fields, f64::INFINITY, &spec).unwrap();
        assert!(x >= y * (1.0 - 1e-12));
        // r = inf >= rho = 2.
        let sinf = BesovSpec::new(0.5, 2.0, f64::INFINITY);
        let x = p.chemin_lerner_norm(&times, &fields, 2.0, &sinf).unwrap();
        let y = p.time_besov_norm(&times, &fields, 2.0, &sinf).unwrap();
        assert!(x <= y * (1.0 + 1e-12));
    }

    #[test]
    fn unsorted_times_rejected() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let p = DyadicPartition::new(&g).unwrap();
        let f = vec![SpectralField::zeros(&g); 3];
        let r = p.chemin_lerner_norm(&[0.0, 0.2, 0.1], &f, 2.0, &BesovSpec::new(0.0, 2.0, 2.0));
        assert_eq!(r.unwrap_err(), Error::UnsortedTimes);
    }

    #[test]
    fn invalid_indices_rejected() {
        assert!(BesovSpec::new(0.0, 0.5, 1.0).validate().is_err());
        assert!(BesovSpec::new(0.0, 2.0, f64::NAN).validate().is_err());
        assert!(BesovSpec::new(0.0, f64::INFINITY, f64::INFINITY).validate().is_ok());
    }

    #[test]
    fn spec_ids() {
        assert_eq!(BesovSpec::new(1.5, 2.0, f64::INFINITY).id(), "s=1.5,p=2,r=inf");
    }
}
