//! Monte Carlo experiments and their theory predictions.
//!
//! Every runner takes a resolved [`ExperimentConfig`] and an [`Execution`]
//! mode, draws sample `s` at dimension `N` from a seed derived from
//! `(seed, experiment tag, N, s)`, and reduces in sample order. Reports carry
//! the rows written to CSV by the CLI plus a list of [`Verdict`]s.

mod config;
mod clt;
mod dbm;
mod equipartition;
mod eth;
mod locallaw;
mod mde_run;
mod variance;

use serde::Serialize;

pub use clt::{run_clt, CltReport, CltRow};
pub use config::{
    CltSection, DbmSection, EquipartitionSection, EthSection, ExperimentConfig, LocalLawSection, ObservableSpec,
    CONFIG_VERSION,
};
pub use dbm::{cayley_step, integrate, run_dbm, DbmReport, DbmRow, DbmTrajectory, FlowState};
pub use equipartition::{
    equipartition_prediction, run_equipartition, CovarianceRow, EquipartitionPredictor, EquipartitionReport,
    EquipartitionRow, Prediction,
};
pub use eth::{eth_statistic, run_eth, EthReport, EthRow};
pub use locallaw::{eta_grid, run_local_law, ErrorScalingRecord, LocalLawReport};
pub use mde_run::{run_mde, DensityRow, MdeReport, QuantileRow};
pub use variance::{centred_second_moment, variance_formula, VARIANCE_GUARD};

use crate::ensembles::{Deformation, DeformationSpec};
use crate::error::{LabError, Result};
use crate::mde::{build_density_for, bulk_region, quantiles, BulkRegion, DensityModel, Mde, QuantileTable};
use crate::rng::derive_seed;

/// One acceptance check. For one-sided bounds `expected` is the bound and
/// `tolerance` is zero.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub criterion: String,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Verdict {
    /// `|observed - expected| <= tolerance`.
    pub fn within(criterion: impl Into<String>, observed: f64, expected: f64, tolerance: f64) -> Self {
        let pass = (observed - expected).abs() <= tolerance;
        Self { criterion: criterion.into(), observed, expected, tolerance, pass }
    }

    /// `observed < bound`.
    pub fn below(criterion: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self { criterion: criterion.into(), observed, expected: bound, tolerance: 0.0, pass: observed < bound }
    }

    /// `lo <= observed <= hi`, stored as midpoint and half-width.
    pub fn in_range(criterion: impl Into<String>, observed: f64, lo: f64, hi: f64) -> Self {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        Self { criterion: criterion.into(), observed, expected: mid, tolerance: half, pass: lo <= observed && observed <= hi }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: observed {:.6} expected {:.6} tolerance {:.6}",
            if self.pass { "PASS" } else { "FAIL" },
            self.criterion,
            self.observed,
            self.expected,
            self.tolerance
        )
    }
}

/// Seed tags separating the random streams of different experiments.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub(crate) enum Tag {
    Eth = 1,
    Clt = 2,
    Equipartition = 3,
    LocalLaw = 4,
    Dbm = 5,
    DbmOracle = 6,
}

pub(crate) fn sample_seed(seed: u64, tag: Tag, n: usize, counters: &[u64]) -> u64 {
    let mut all = vec![tag as u64, n as u64];
    all.extend_from_slice(counters);
    derive_seed(seed, &all)
}

/// Deterministic side of an experiment at one dimension.
pub struct Setup {
    pub deformation: Deformation,
    pub density: DensityModel,
    pub bulk: BulkRegion,
    pub quantiles: QuantileTable,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig, spec: &DeformationSpec, n: usize) -> Result<Self> {
        let deformation = spec.build(n, cfg.beta)?;
        let density = build_density_for(&Mde::for_deformation(&deformation))?;
        let bulk = bulk_region(&density, cfg.kappa)?;
        if bulk.is_empty() {
            return Err(LabError::Domain(format!("no bulk at kappa = {}", cfg.kappa)));
        }
        let quantiles = quantiles(&density, n)?;
        Ok(Self { deformation, density, bulk, quantiles })
    }

    pub fn mde(&self) -> &Mde {
        self.density.mde()
    }

    pub fn n(&self) -> usize {
        self.quantiles.n()
    }

    /// Indices whose quantile lies in the bulk.
    pub fn bulk_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.bulk.contains(self.quantiles.gamma[i])).collect()
    }

    /// Bulk indices inside the central `window` fraction.
    pub fn window_indices(&self, window: f64) -> Vec<usize> {
        central_window(self.n(), window).filter(|&i| self.bulk.contains(self.quantiles.gamma[i])).collect()
    }

    /// Configured cut-off width, else a tenth of the longest bulk interval.
    pub fn delta(&self, cfg: &ExperimentConfig) -> f64 {
        cfg.delta.unwrap_or(0.1 * self.bulk.longest())
    }
}

/// Central `window` fraction of `0..n`.
pub fn central_window(n: usize, window: f64) -> std::ops::Range<usize> {
    let width = ((n as f64) * window).round() as usize;
    let width = width.clamp(1, n);
    let start = (n - width) / 2;
    start..start + width
}

/// Largest dimension of the sweep; pooled verdicts are issued there.
pub(crate) fn largest(n_list: &[usize]) -> usize {
    n_list.iter().copied().max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_window_is_centred() {
        assert_eq!(central_window(512, 0.5), 128..384);
        assert_eq!(central_window(10, 0.01), 4..5);
    }

    #[test]
    fn verdict_kinds() {
        assert!(Verdict::within("a", 1.04, 1.0, 0.05).pass);
        assert!(!Verdict::below("b", 6.0, 6.0).pass);
        let v = Verdict::in_range("c", -0.5, -0.7, -0.3);
        assert!(v.pass && (v.expected + 0.5).abs() < 1e-15 && (v.tolerance - 0.2).abs() < 1e-15);
    }
}
