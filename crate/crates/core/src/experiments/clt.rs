use serde::Serialize;

use super::{largest, sample_seed, variance_formula, ExperimentConfig, Setup, Tag, Verdict};
use crate::ensembles::sample_wigner;
use crate::error::{LabError, Result};
use crate::exec::{try_map_samples, Execution};
use crate::observables::one_point_correction;
use crate::spectral::eigen;
use crate::stats::StatSummary;

#[derive(Clone, Debug, Serialize)]
pub struct CltRow {
    pub sample: usize,
    pub index: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub x_standardized: f64,
    /// `<u_i, A u_i> - <A Im M>/<Im M>` before scaling.
    pub x_raw: f64,
    pub var_theory: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CltReport {
    pub rows: Vec<CltRow>,
    /// Pooled standardized statistic per `N`.
    pub pooled: Vec<(usize, StatSummary)>,
    /// Pooled `sqrt(beta N / 2) x_raw`, without the theory variance.
    pub unstandardized: Vec<(usize, StatSummary)>,
    /// Standardized statistic at the single index `N/2`.
    pub single_index: Vec<(usize, StatSummary)>,
    pub verdicts: Vec<Verdict>,
}

pub fn run_clt(cfg: &ExperimentConfig, exec: Execution) -> Result<CltReport> {
    cfg.validate()?;
    let spec = cfg.clt.deformation.as_ref().unwrap_or(&cfg.deformation);
    let beta = cfg.beta.value();
    let mut report =
        CltReport { rows: Vec::new(), pooled: Vec::new(), unstandardized: Vec::new(), single_index: Vec::new(), verdicts: Vec::new() };
    for &n in &cfg.n_list {
        let a_values = cfg.clt.observable.diagonal(n)?;
        let setup = Setup::new(cfg, spec, n)?;
        let a = crate::linalg::real_diag(&a_values);
        let moment = super::centred_second_moment(&a);
        if moment < cfg.sigma {
            return Err(LabError::Config(format!(
                "observable has <(A - <A>)^2> = {moment:e} below sigma = {}",
                cfg.sigma
            )));
        }
        let a_eig = setup.deformation.to_eigenbasis(&a);
        let a_diag: Vec<_> = (0..n).map(|i| a_eig[(i, i)]).collect();
        let mut idx = setup.window_indices(cfg.bulk_index_window);
        let mid = n / 2;
        if cfg.clt.single_index && !idx.contains(&mid) {
            idx.push(mid);
            idx.sort_unstable();
        }
        let mut centers = Vec::with_capacity(idx.len());
        let mut variances = Vec::with_capacity(idx.len());
        for &i in &idx {
            let sol = setup.mde().at_energy(setup.quantiles.gamma[i])?;
            centers.push(one_point_correction(&a_diag, &sol)?.re);
            let v = variance_formula(&a_eig, &sol)?;
            if !(v > 0.0) {
                return Err(LabError::Numerical(format!("non-positive theory variance {v:e} at index {i}")));
            }
            variances.push(v);
        }
        let per_sample = try_map_samples(exec, cfg.samples, |s| {
            let seed = sample_seed(cfg.seed, Tag::Clt, n, &[s as u64]);
            let w = sample_wigner(&cfg.ensemble(n, seed))?;
            let sd = eigen(&setup.deformation.deform(&w))?;
            Ok::<_, LabError>(
                idx.iter()
                    .map(|&i| (0..n).map(|k| a_values[k] * sd.u[(k, i)].norm_sqr()).sum::<f64>())
                    .collect::<Vec<f64>>(),
            )
        })?;
        let mut pooled = Vec::new();
        let mut unstd = Vec::new();
        let mut single = Vec::new();
        for (s, diag) in per_sample.iter().enumerate() {
            for (k, &i) in idx.iter().enumerate() {
                let x_raw = diag[k] - centers[k];
                let scaled = (beta * n as f64 / 2.0).sqrt() * x_raw;
                let x_standardized = scaled / variances[k].sqrt();
                if i == mid && cfg.clt.single_index {
                    single.push(x_standardized);
                }
                if setup.bulk.contains(setup.quantiles.gamma[i])
                    && super::central_window(n, cfg.bulk_index_window).contains(&i)
                {
                    pooled.push(x_standardized);
                    unstd.push(scaled);
                }
                report.rows.push(CltRow { sample: s, index: i, n, x_standardized, x_raw, var_theory: variances[k] });
            }
        }
        report.pooled.push((n, StatSummary::from_sample(&pooled)));
        report.unstandardized.push((n, StatSummary::from_sample(&unstd)));
        if !single.is_empty() {
            report.single_index.push((n, StatSummary::from_sample(&single)));
        }
    }
    let top = largest(&cfg.n_list);
    if let Some((_, s)) = report.pooled.iter().find(|(n, _)| *n == top) {
        report.verdicts.push(Verdict::within("clt.mean", s.mean, 0.0, 0.05));
        report.verdicts.push(Verdict::within("clt.variance", s.variance, 1.0, 0.1));
        report.verdicts.push(Verdict::within("clt.fourth_moment", s.fourth_moment(), 3.0, 0.45));
        report.verdicts.push(Verdict::below("clt.ks_distance", s.ks_distance_to_std_normal, 0.05));
    }
    Ok(report)
}
