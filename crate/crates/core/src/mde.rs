//! Matrix Dyson Equation for deformed Wigner matrices.
//!
//! In the eigenbasis of `D` the solution is diagonal,
//! `M_i(z) = 1 / (d_i - z - s m(z))` with `m = <M>`, so everything reduces to
//! one scalar fixed-point equation for `m`. `s` is the variance weight of the
//! Wigner part (1 for `W + D`, `p_1^2` for `p_1 W_1 + D`).

use num_complex::Complex64 as c64;
use serde::Serialize;

use crate::ensembles::{Deformation, WeightVector};
use crate::error::{LabError, Result};

/// Residual tolerance of the solver.
pub const TOLERANCE: f64 = 1e-12;
/// Iteration cap per continuation stage.
pub const MAX_ITERATIONS: usize = 100_000;
/// Damping of the fixed-point phase.
const DAMPING: f64 = 0.5;
/// Switch from damped iteration to Newton below this residual.
const NEWTON_SWITCH: f64 = 1e-4;
/// Starting height of the η-continuation.
const CONTINUATION_START: f64 = 10.0;
/// Offset used for the density of states.
pub const DENSITY_ETA: f64 = 1e-7;
/// Offset standing in for the real axis when `M(e)` is needed in the bulk.
pub const REAL_AXIS_ETA: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct MdeSolution {
    pub z: c64,
    /// `<M(z)>`.
    pub m: c64,
    /// `M(z)` in the eigenbasis of `D`.
    pub m_diag: Vec<c64>,
    pub iterations: usize,
    pub residual: f64,
    /// Variance weight `s` in `-1/M = z - D + s<M>`.
    pub variance: f64,
}

impl MdeSolution {
    pub fn n(&self) -> usize {
        self.m_diag.len()
    }

    /// Diagonal of `Im M`.
    pub fn im_diag(&self) -> Vec<f64> {
        self.m_diag.iter().map(|x| x.im).collect()
    }

    /// `||M(z)||` (M is normal, so this is the largest modulus).
    pub fn norm(&self) -> f64 {
        self.m_diag.iter().fold(0.0, |a, x| a.max(x.norm()))
    }
}

/// Scalar MDE for a fixed deformation spectrum.
#[derive(Clone, Debug)]
pub struct Mde {
    d: Vec<f64>,
    variance: f64,
}

impl Mde {
    pub fn new(d: &[f64]) -> Self {
        Self { d: d.to_vec(), variance: 1.0 }
    }

    pub fn with_variance(d: &[f64], variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(LabError::Domain(format!("variance weight must be positive, got {variance}")));
        }
        if d.is_empty() || d.iter().any(|x| !x.is_finite()) {
            return Err(LabError::Domain("deformation spectrum must be non-empty and finite".into()));
        }
        Ok(Self { d: d.to_vec(), variance })
    }

    pub fn for_deformation(def: &Deformation) -> Self {
        Self::new(def.eigenvalues())
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.d
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    /// `(1/N) sum_i 1/(d_i - z - s m)` and its derivative in `m`.
    fn map(&self, z: c64, m: c64) -> (c64, c64) {
        let shift = z + m * self.variance;
        let mut g = c64::new(0.0, 0.0);
        let mut dg = c64::new(0.0, 0.0);
        for &di in &self.d {
            let r = (c64::new(di, 0.0) - shift).inv();
            g += r;
            dg += r * r;
        }
        let n = self.d.len() as f64;
        (g / n, dg * (self.variance / n))
    }

    /// Iterate at fixed `z` (upper half-plane) from `m`.
    fn iterate(&self, z: c64, mut m: c64, max_iter: usize) -> (c64, usize, f64) {
        let mut residual = f64::INFINITY;
        for it in 0..max_iter {
            let (g, dg) = self.map(z, m);
            residual = (m - g).norm();
            if residual <= TOLERANCE {
                return (m, it, residual);
            }
            let damped = m * (1.0 - DAMPING) + g * DAMPING;
            m = if residual < NEWTON_SWITCH {
                let step = m - (m - g) / (c64::new(1.0, 0.0) - dg);
                if step.im > 0.0 && step.is_finite() {
                    step
                } else {
                    damped
                }
            } else {
                damped
            };
        }
        (m, max_iter, residual)
    }

    /// Solve in the upper half-plane by halving `Im z` from 10 with warm starts.
    fn solve_upper(&self, z: c64) -> Result<(c64, usize, f64)> {
        let target = z.im;
        let mut eta = CONTINUATION_START.max(target);
        let mut m = c64::new(0.0, 1.0) / (1.0 + eta);
        let mut total = 0;
        loop {
            let zz = c64::new(z.re, eta);
            let (mm, it, res) = self.iterate(zz, m, MAX_ITERATIONS);
            total += it;
            if res > TOLERANCE || !(mm.im > 0.0) {
                return Err(LabError::Solver { iterations: total, residual: res });
            }
            m = mm;
            if eta <= target {
                return Ok((m, total, res));
            }
            eta = (eta / 2.0).max(target);
        }
    }

    fn finish(&self, z: c64, m_upper: c64, iterations: usize, residual: f64) -> MdeSolution {
        // M(conj z) = conj M(z) for real d.
        let m = if z.im > 0.0 { m_upper } else { m_upper.conj() };
        let shift = z + m * self.variance;
        let m_diag = self.d.iter().map(|&di| (c64::new(di, 0.0) - shift).inv()).collect();
        MdeSolution { z, m, m_diag, iterations, residual, variance: self.variance }
    }

    /// Solve `-1/M = z - D + s<M>` with `Im M Im z > 0`.
    pub fn solve(&self, z: c64) -> Result<MdeSolution> {
        if z.im == 0.0 || !z.is_finite() {
            return Err(LabError::Domain(format!("spectral parameter must have nonzero imaginary part, got {z}")));
        }
        let zu = if z.im > 0.0 { z } else { z.conj() };
        let (m, it, res) = self.solve_upper(zu)?;
        Ok(self.finish(z, m, it, res))
    }

    /// Solve starting from a nearby solution; falls back to continuation.
    pub fn solve_near(&self, z: c64, guess: c64) -> Result<MdeSolution> {
        if z.im == 0.0 || !z.is_finite() {
            return Err(LabError::Domain(format!("spectral parameter must have nonzero imaginary part, got {z}")));
        }
        let (zu, gu) = if z.im > 0.0 { (z, guess) } else { (z.conj(), guess.conj()) };
        if gu.im > 0.0 && gu.is_finite() {
            let (m, it, res) = self.iterate(zu, gu, 200);
            if res <= TOLERANCE && m.im > 0.0 {
                return Ok(self.finish(z, m, it, res));
            }
        }
        self.solve(z)
    }

    /// `M(e)` on the real axis in the bulk, approximated at height 1e-12.
    pub fn at_energy(&self, e: f64) -> Result<MdeSolution> {
        self.solve(c64::new(e, REAL_AXIS_ETA))
    }

    /// scDos at a single energy via one Richardson step on `Im m / pi`.
    pub fn density_at(&self, e: f64) -> Result<f64> {
        let a = self.solve(c64::new(e, DENSITY_ETA))?;
        let b = self.solve_near(c64::new(e, 2.0 * DENSITY_ETA), a.m)?;
        Ok(richardson(a.m.im, b.m.im))
    }
}

fn richardson(im_eta: f64, im_2eta: f64) -> f64 {
    ((2.0 * im_eta - im_2eta) / std::f64::consts::PI).max(0.0)
}

pub fn solve_mde(d: &[f64], z: c64) -> Result<MdeSolution> {
    Mde::new(d).solve(z)
}

/// MDE of `p_1 W_1 + p_2 W_2` conditioned on `W_2`: deformation `p_2 * eig(W_2)`,
/// variance weight `p_1^2`.
pub fn solve_mde_of_sum(w2_eigenvalues: &[f64], p: &WeightVector, z: c64) -> Result<MdeSolution> {
    conditioned_mde(w2_eigenvalues, p)?.solve(z)
}

/// The conditioned MDE of a two-component combination.
pub fn conditioned_mde(w2_eigenvalues: &[f64], p: &WeightVector) -> Result<Mde> {
    if p.len() != 2 {
        return Err(LabError::Config(format!("expected two weights, got {}", p.len())));
    }
    let (p1, p2) = (p.weights()[0], p.weights()[1]);
    let d: Vec<f64> = w2_eigenvalues.iter().map(|x| p2 * x).collect();
    Mde::with_variance(&d, p1 * p1)
}

/// Stieltjes transform of the standard semicircle law, `m^2 + z m + 1 = 0`.
pub fn semicircle_stieltjes(z: c64) -> c64 {
    let two = c64::new(2.0, 0.0);
    let m = (-z + (z - two).sqrt() * (z + two).sqrt()) / 2.0;
    if z.im * m.im >= 0.0 {
        m
    } else {
        (-z - (z - two).sqrt() * (z + two).sqrt()) / 2.0
    }
}

/// Semicircle density `sqrt(4 - e^2)/(2 pi)`.
pub fn semicircle_density(e: f64) -> f64 {
    if e.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - e * e).sqrt() / (2.0 * std::f64::consts::PI)
    }
}

/// Tabulated self-consistent density of states.
#[derive(Clone, Debug)]
pub struct DensityModel {
    pub grid: Vec<f64>,
    pub rho: Vec<f64>,
    pub eta0: f64,
    /// `int_{-inf}^{e} rho` at the grid points (trapezoid rule).
    pub cumulative: Vec<f64>,
    mde: Mde,
}

/// Base grid spacing.
const GRID_STEP: f64 = 1e-3;
/// Per-cell trapezoid defect that triggers bisection.
const CELL_TOLERANCE: f64 = 1e-12;
const MIN_CELL: f64 = 1e-9;

/// Build the scDos for `W + D`.
pub fn build_density(d: &[f64]) -> Result<DensityModel> {
    build_density_for(&Mde::new(d))
}

/// Build the scDos of an arbitrary scalar MDE.
pub fn build_density_for(mde: &Mde) -> Result<DensityModel> {
    let dmin = mde.d.iter().copied().fold(f64::INFINITY, f64::min);
    let dmax = mde.d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let radius = 2.0 * mde.variance.sqrt();
    let lo = ((dmin - radius - 0.05) / GRID_STEP).floor() as i64;
    let hi = ((dmax + radius + 0.05) / GRID_STEP).ceil() as i64;

    // Sweep left to right, warm-starting from the neighbour.
    let mut base: Vec<(f64, c64, c64)> = Vec::with_capacity((hi - lo + 1) as usize);
    let mut prev: Option<(c64, c64)> = None;
    for k in lo..=hi {
        let e = k as f64 * GRID_STEP;
        let (a, b) = eval_pair(mde, e, prev)?;
        prev = Some((a, b));
        base.push((e, a, b));
    }

    let mut grid = Vec::with_capacity(base.len() * 2);
    let mut rho = Vec::with_capacity(base.len() * 2);
    grid.push(base[0].0);
    rho.push(richardson(base[0].1.im, base[0].2.im));
    for w in base.windows(2) {
        let (ea, ma, mb) = w[0];
        let (eb, na, nb) = w[1];
        let ra = richardson(ma.im, mb.im);
        let rb = richardson(na.im, nb.im);
        refine(mde, (ea, ra, ma, mb), (eb, rb), &mut grid, &mut rho)?;
    }

    let mut cumulative = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for i in 1..grid.len() {
        acc += 0.5 * (rho[i] + rho[i - 1]) * (grid[i] - grid[i - 1]);
        cumulative.push(acc);
    }
    Ok(DensityModel { grid, rho, eta0: DENSITY_ETA, cumulative, mde: mde.clone() })
}

fn eval_pair(mde: &Mde, e: f64, guess: Option<(c64, c64)>) -> Result<(c64, c64)> {
    let z1 = c64::new(e, DENSITY_ETA);
    let z2 = c64::new(e, 2.0 * DENSITY_ETA);
    match guess {
        Some((g1, g2)) => Ok((mde.solve_near(z1, g1)?.m, mde.solve_near(z2, g2)?.m)),
        None => {
            let a = mde.solve(z1)?;
            let b = mde.solve_near(z2, a.m)?;
            Ok((a.m, b.m))
        }
    }
}

/// Adaptive bisection of `[a, b]`; pushes every point right of `a`.
fn refine(
    mde: &Mde,
    left: (f64, f64, c64, c64),
    right: (f64, f64),
    grid: &mut Vec<f64>,
    rho: &mut Vec<f64>,
) -> Result<()> {
    let (ea, ra, ma, mb) = left;
    let (eb, rb) = right;
    let width = eb - ea;
    if width > MIN_CELL && (ra > 0.0 || rb > 0.0) {
        let em = 0.5 * (ea + eb);
        let (mma, mmb) = eval_pair(mde, em, Some((ma, mb)))?;
        let rm = richardson(mma.im, mmb.im);
        let defect = (rm - 0.5 * (ra + rb)).abs() * width;
        if defect > CELL_TOLERANCE {
            refine(mde, (ea, ra, ma, mb), (em, rm), grid, rho)?;
            refine(mde, (em, rm, mma, mmb), (eb, rb), grid, rho)?;
            return Ok(());
        }
    }
    grid.push(eb);
    rho.push(rb);
    Ok(())
}

impl DensityModel {
    pub fn mde(&self) -> &Mde {
        &self.mde
    }

    /// Total mass `int rho`.
    pub fn total_mass(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    /// Smallest grid spacing.
    pub fn resolution(&self) -> f64 {
        self.grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    fn cell(&self, e: f64) -> Option<usize> {
        if e < self.grid[0] || e > *self.grid.last().unwrap() {
            return None;
        }
        let k = self.grid.partition_point(|&x| x <= e);
        Some(k.saturating_sub(1).min(self.grid.len() - 2))
    }

    /// Piecewise-linear interpolant of the tabulated density.
    pub fn rho_at(&self, e: f64) -> f64 {
        match self.cell(e) {
            None => 0.0,
            Some(k) => {
                let t = (e - self.grid[k]) / (self.grid[k + 1] - self.grid[k]);
                self.rho[k] + t * (self.rho[k + 1] - self.rho[k])
            }
        }
    }

    /// Exact integral of the interpolant up to `e`.
    pub fn cumulative_at(&self, e: f64) -> f64 {
        if e < self.grid[0] {
            return 0.0;
        }
        match self.cell(e) {
            None => self.total_mass(),
            Some(k) => {
                let h = e - self.grid[k];
                let slope = (self.rho[k + 1] - self.rho[k]) / (self.grid[k + 1] - self.grid[k]);
                self.cumulative[k] + self.rho[k] * h + 0.5 * slope * h * h
            }
        }
    }

    /// `int rho(x)/(x - z) dx` of the interpolant, integrated exactly per cell.
    pub fn stieltjes(&self, z: c64) -> c64 {
        let mut acc = c64::new(0.0, 0.0);
        for k in 0..self.grid.len() - 1 {
            let (a, b) = (self.grid[k], self.grid[k + 1]);
            let slope = (self.rho[k + 1] - self.rho[k]) / (b - a);
            let log = ((c64::new(b, 0.0) - z) / (c64::new(a, 0.0) - z)).ln();
            acc += (self.rho[k] + slope * (z - a)) * log + slope * (b - a);
        }
        acc
    }

    /// Invert the cumulative interpolant.
    pub fn inverse_cumulative(&self, target: f64) -> f64 {
        let k = self.cumulative.partition_point(|&c| c < target);
        if k == 0 {
            return self.grid[0];
        }
        if k >= self.grid.len() {
            return *self.grid.last().unwrap();
        }
        let k = k - 1;
        let (x0, x1) = (self.grid[k], self.grid[k + 1]);
        let r0 = self.rho[k];
        let slope = (self.rho[k + 1] - r0) / (x1 - x0);
        let need = target - self.cumulative[k];
        // r0 h + slope h^2 / 2 = need
        let h = if slope.abs() < 1e-300 {
            if r0 > 0.0 { need / r0 } else { 0.0 }
        } else {
            let disc = (r0 * r0 + 2.0 * slope * need).max(0.0);
            2.0 * need / (r0 + disc.sqrt())
        };
        (x0 + h).clamp(x0, x1)
    }
}

/// `{e : rho(e) >= kappa^{1/3}}` as disjoint closed intervals.
#[derive(Clone, Debug, Serialize)]
pub struct BulkRegion {
    pub kappa: f64,
    pub intervals: Vec<(f64, f64)>,
}

impl BulkRegion {
    pub fn threshold(&self) -> f64 {
        self.kappa.cbrt()
    }

    pub fn contains(&self, e: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= e && e <= b)
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Length of the longest interval.
    pub fn longest(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).fold(0.0, f64::max)
    }
}

pub fn bulk_region(density: &DensityModel, kappa: f64) -> Result<BulkRegion> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(LabError::Domain(format!("kappa must lie in (0, 1], got {kappa}")));
    }
    let tau = kappa.cbrt();
    let g = &density.grid;
    let r = &density.rho;
    let mut intervals = Vec::new();
    let mut start: Option<f64> = None;
    for i in 0..g.len() {
        let inside = r[i] >= tau;
        match (inside, start) {
            (true, None) => {
                let a = if i == 0 { g[0] } else { crossing(density, g[i - 1], g[i], tau)? };
                start = Some(a);
            }
            (false, Some(a)) => {
                let b = crossing(density, g[i - 1], g[i], tau)?;
                if b > a {
                    intervals.push((a, b));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        intervals.push((a, *g.last().unwrap()));
    }
    Ok(BulkRegion { kappa, intervals })
}

/// Bisection for `rho(e) = tau` between grid points straddling the level.
fn crossing(density: &DensityModel, a: f64, b: f64, tau: f64) -> Result<f64> {
    let mde = density.mde();
    let fa = mde.density_at(a)? - tau;
    let (mut lo, mut hi) = (a, b);
    let lo_sign = fa >= 0.0;
    for _ in 0..60 {
        if hi - lo < 1e-13 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let above = mde.density_at(mid)? - tau >= 0.0;
        if above == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Quantiles `gamma_i` with `int_{-inf}^{gamma_i} rho = (i - 1/2)/N`, `i = 1..N`.
#[derive(Clone, Debug, Serialize)]
pub struct QuantileTable {
    pub gamma: Vec<f64>,
}

impl QuantileTable {
    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    /// Target mass of the 0-based index `i`.
    pub fn target(i: usize, n: usize) -> f64 {
        (i as f64 + 0.5) / n as f64
    }
}

pub fn quantiles(density: &DensityModel, n: usize) -> Result<QuantileTable> {
    if n == 0 {
        return Err(LabError::Domain("quantile count must be positive".into()));
    }
    let mass = density.total_mass();
    if (mass - 1.0).abs() > 1e-3 {
        return Err(LabError::Numerical(format!("density integrates to {mass}, not 1")));
    }
    let gamma = (0..n)
        .map(|i| density.inverse_cumulative(QuantileTable::target(i, n)))
        .collect();
    Ok(QuantileTable { gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn semicircle_at_i() {
        let s = solve_mde(&[0.0; 8], c64::new(0.0, 1.0)).unwrap();
        assert!((s.m - c64::new(0.0, (5f64.sqrt() - 1.0) / 2.0)).norm() < 1e-12);
        assert!(s.residual <= TOLERANCE);
    }

    #[test]
    fn semicircle_density_at_origin() {
        let s = solve_mde(&[0.0; 4], c64::new(0.0, 1e-7)).unwrap();
        assert!((s.m.im / PI - std::f64::consts::FRAC_1_PI).abs() < 1e-5);
    }

    #[test]
    fn real_axis_is_rejected() {
        assert!(matches!(solve_mde(&[0.0], c64::new(0.3, 0.0)), Err(LabError::Domain(_))));
    }

    #[test]
    fn lower_half_plane_is_the_conjugate() {
        let d = [-1.0, -0.2, 0.4, 1.3];
        let up = solve_mde(&d, c64::new(0.3, 0.05)).unwrap();
        let down = solve_mde(&d, c64::new(0.3, -0.05)).unwrap();
        assert_eq!(up.m, down.m.conj());
        assert!(down.m.im < 0.0);
        for (a, b) in up.m_diag.iter().zip(&down.m_diag) {
            assert_eq!(*a, b.conj());
        }
    }

    #[test]
    fn m_diag_is_consistent_with_m() {
        let d = [-0.8, -0.1, 0.5, 0.9, 1.1];
        let s = solve_mde(&d, c64::new(-0.2, 0.01)).unwrap();
        let mean: c64 = s.m_diag.iter().sum::<c64>() / d.len() as f64;
        assert!((mean - s.m).norm() <= 2.0 * TOLERANCE);
        for (i, &di) in d.iter().enumerate() {
            assert_eq!(s.m_diag[i], (c64::new(di, 0.0) - (s.z + s.m * s.variance)).inv());
        }
    }

    #[test]
    fn sum_with_tiny_second_weight_is_a_semicircle() {
        // p = (1, 0) is not a valid weight vector; with p2 tiny the deformation vanishes.
        let p = WeightVector::new(vec![1.0, 1e-12]).unwrap();
        let eigs: Vec<f64> = (0..16).map(|i| i as f64 / 8.0 - 1.0).collect();
        let z = c64::new(0.4, 0.2);
        let s = solve_mde_of_sum(&eigs, &p, z).unwrap();
        assert!((s.m - semicircle_stieltjes(z)).norm() < 1e-10);
    }

    #[test]
    fn density_of_semicircle() {
        let dm = build_density(&[0.0; 4]).unwrap();
        assert!((dm.total_mass() - 1.0).abs() < 1e-3);
        for (&e, &r) in dm.grid.iter().zip(&dm.rho) {
            if e.abs() <= 1.9 {
                assert!((r - semicircle_density(e)).abs() < 1e-4, "e={e} rho={r}");
            }
        }
        assert!(dm.rho_at(3.0) < 1e-3 && dm.rho_at(-3.0) < 1e-3);
        assert!(dm.cumulative.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn semicircle_quantiles_straddle_zero() {
        let dm = build_density(&[0.0; 2]).unwrap();
        let q = quantiles(&dm, 64).unwrap();
        assert!(q.gamma.windows(2).all(|w| w[0] <= w[1]));
        assert!((q.gamma[31] + q.gamma[32]).abs() / 2.0 < 1e-8);
        for (i, g) in q.gamma.iter().enumerate() {
            assert!((dm.cumulative_at(*g) - QuantileTable::target(i, 64)).abs() < 1e-8);
        }
    }

    #[test]
    fn kappa_outside_range_is_rejected() {
        let dm = build_density(&[0.0; 2]).unwrap();
        assert!(bulk_region(&dm, 0.0).is_err());
        assert!(bulk_region(&dm, 1.5).is_err());
    }

    #[test]
    fn bulk_is_empty_above_the_maximum_density() {
        let dm = build_density(&[0.0; 2]).unwrap();
        // max rho = 1/pi ≈ 0.3183; kappa^{1/3} = 0.33 exceeds it.
        let b = bulk_region(&dm, 0.33f64.powi(3)).unwrap();
        assert!(b.is_empty());
    }
}
