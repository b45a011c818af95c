use serde::Serialize;

use super::{largest, ExperimentConfig, Setup, Verdict};
use crate::error::Result;
use crate::mde::semicircle_density;

#[derive(Clone, Debug, Serialize)]
pub struct DensityRow {
    pub e: f64,
    pub rho: f64,
    pub cumulative: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuantileRow {
    /// 1-based index.
    pub i: usize,
    pub gamma: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MdeReport {
    pub n: usize,
    pub bulk: Vec<(f64, f64)>,
    pub density: Vec<DensityRow>,
    pub quantiles: Vec<QuantileRow>,
    pub verdicts: Vec<Verdict>,
}

/// Tabulate the density, its cumulative and the quantiles at the largest `N`.
pub fn run_mde(cfg: &ExperimentConfig) -> Result<MdeReport> {
    cfg.validate()?;
    let n = largest(&cfg.n_list);
    let setup = Setup::new(cfg, &cfg.deformation, n)?;
    let dm = &setup.density;
    let density = dm
        .grid
        .iter()
        .zip(&dm.rho)
        .zip(&dm.cumulative)
        .map(|((&e, &rho), &cumulative)| DensityRow { e, rho, cumulative })
        .collect();
    let quantiles = setup
        .quantiles
        .gamma
        .iter()
        .enumerate()
        .map(|(i, &gamma)| QuantileRow { i: i + 1, gamma })
        .collect();
    let mut verdicts = vec![Verdict::within("mde.total_mass", dm.total_mass(), 1.0, 1e-3)];
    if setup.deformation.is_zero() {
        verdicts.push(Verdict::within("mde.semicircle_rho0", dm.rho_at(0.0), semicircle_density(0.0), 1e-4));
    }
    Ok(MdeReport { n, bulk: setup.bulk.intervals.clone(), density, quantiles, verdicts })
}
