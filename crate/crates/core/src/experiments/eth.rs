use num_complex::Complex64 as c64;
use serde::Serialize;

use super::{sample_seed, ExperimentConfig, Setup, Tag, Verdict};
use crate::ensembles::sample_wigner;
use crate::error::Result;
use crate::exec::{try_map_samples, Execution};
use crate::observables::one_point_correction;
use crate::spectral::{eigen, overlaps, OverlapTable};
use crate::stats::{loglog_fit, median, LinearFit};

#[derive(Clone, Debug, Serialize)]
pub struct EthRow {
    pub sample: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub max_stat: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EthReport {
    pub rows: Vec<EthRow>,
    /// `(N, median S)`.
    pub medians: Vec<(usize, f64)>,
    pub exponent: Option<LinearFit>,
    pub verdicts: Vec<Verdict>,
}

/// `max_{i,j in idx} sqrt(N) |<u_i, Å^{gamma_i} u_j>|`.
pub fn eth_statistic(table: &OverlapTable, idx: &[usize]) -> Result<f64> {
    let sqrt_n = (table.centers.len() as f64).sqrt();
    let mut worst: f64 = 0.0;
    for &i in idx {
        for &j in idx {
            worst = worst.max(table.regular(i, j)?.norm());
        }
    }
    Ok(worst * sqrt_n)
}

pub fn run_eth(cfg: &ExperimentConfig, exec: Execution) -> Result<EthReport> {
    cfg.validate()?;
    let spec = cfg.eth.deformation.as_ref().unwrap_or(&cfg.deformation);
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for &n in &cfg.n_list {
        let setup = Setup::new(cfg, spec, n)?;
        let a = cfg.eth.observable.build(n)?;
        let a_diag = setup.deformation.diagonal_in_eigenbasis(&a);
        let idx = setup.bulk_indices();
        let mut centers = vec![c64::new(0.0, 0.0); n];
        for &i in &idx {
            let sol = setup.mde().at_energy(setup.quantiles.gamma[i])?;
            centers[i] = one_point_correction(&a_diag, &sol)?;
        }
        let stats = try_map_samples(exec, cfg.samples, |s| {
            let seed = sample_seed(cfg.seed, Tag::Eth, n, &[s as u64]);
            let w = sample_wigner(&cfg.ensemble(n, seed))?;
            let sd = eigen(&setup.deformation.deform(&w))?;
            eth_statistic(&overlaps(&sd, &a, centers.clone())?, &idx)
        })?;
        medians.push((n, median(&stats)));
        rows.extend(stats.into_iter().enumerate().map(|(sample, max_stat)| EthRow { sample, n, max_stat }));
    }
    let mut verdicts = Vec::new();
    if let Some(&(_, m)) = medians.iter().find(|(n, _)| *n == 256) {
        verdicts.push(Verdict::below("eth.median_max_stat_N256", m, 6.0));
    }
    let exponent = (medians.len() >= 2).then(|| {
        let ns: Vec<f64> = medians.iter().map(|(n, _)| *n as f64).collect();
        let ms: Vec<f64> = medians.iter().map(|(_, m)| *m).collect();
        loglog_fit(&ns, &ms)
    });
    if let Some(fit) = &exponent {
        verdicts.push(Verdict::in_range("eth.growth_exponent", fit.slope, -0.1, 0.15));
    }
    Ok(EthReport { rows, medians, exponent, verdicts })
}
