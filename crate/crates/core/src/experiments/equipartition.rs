use serde::Serialize;

use super::{central_window, largest, sample_seed, variance_formula, ExperimentConfig, Tag, Verdict};
use crate::ensembles::{sample_linear_combination, sample_wigner, WeightVector};
use crate::error::{LabError, Result};
use crate::exec::{try_map_samples, Execution};
use crate::linalg::{self, CMat};
use crate::mde::{build_density_for, quantiles, Mde, QuantileTable};
use crate::observables::one_point_correction;
use crate::spectral::eigen;
use crate::stats::{self, StatSummary};

#[derive(Clone, Debug, Serialize)]
pub struct EquipartitionRow {
    pub sample: usize,
    pub index: usize,
    /// 1-based component.
    pub l: usize,
    pub x_l: f64,
    pub lambda_i: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CovarianceRow {
    pub l: usize,
    pub m: usize,
    pub empirical: f64,
    pub predicted: f64,
}

/// Conditional mean and variance of `X_k`, two ways.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Prediction {
    /// `p_k <W_k Im M_k>/<Im M_k>` at the conditioned quantile.
    pub mean_general: f64,
    /// `p_k^2 Var_gamma(W_k)` from the variance formula.
    pub var_general: f64,
    /// `p_k^2 gamma_i / ||p||^2`.
    pub mean_closed: f64,
    /// `p_k^2 (||p||^2 - p_k^2) / ||p||^2`.
    pub var_closed: f64,
}

/// Predictions conditioned on the eigenvalues of the last component `W_k`.
pub struct EquipartitionPredictor {
    p: WeightVector,
    eigs: Vec<f64>,
    mde: Mde,
    conditioned: QuantileTable,
}

impl EquipartitionPredictor {
    pub fn new(p: &WeightVector, w_eigenvalues: &[f64]) -> Result<Self> {
        if p.len() < 2 {
            return Err(LabError::Config("equipartition needs at least two weights".into()));
        }
        let pk = *p.weights().last().unwrap();
        let d: Vec<f64> = w_eigenvalues.iter().map(|x| pk * x).collect();
        let mde = Mde::with_variance(&d, p.norm_sq() - pk * pk)?;
        let density = build_density_for(&mde)?;
        let conditioned = quantiles(&density, w_eigenvalues.len())?;
        Ok(Self { p: p.clone(), eigs: w_eigenvalues.to_vec(), mde, conditioned })
    }

    pub fn predict(&self, i: usize) -> Result<Prediction> {
        let n = self.eigs.len();
        if i >= n {
            return Err(LabError::Domain(format!("index {i} outside 0..{n}")));
        }
        let pk = *self.p.weights().last().unwrap();
        let norm_sq = self.p.norm_sq();
        let sol = self.mde.at_energy(self.conditioned.gamma[i])?;
        let a = linalg::real_diag(&self.eigs);
        let diag: Vec<_> = (0..n).map(|j| a[(j, j)]).collect();
        let mean_general = pk * one_point_correction(&diag, &sol)?.re;
        let var_general = pk * pk * variance_formula(&a, &sol)?;
        let gamma = norm_sq.sqrt() * semicircle_quantile(QuantileTable::target(i, n));
        Ok(Prediction {
            mean_general,
            var_general,
            mean_closed: pk * pk * gamma / norm_sq,
            var_closed: pk * pk * (norm_sq - pk * pk) / norm_sq,
        })
    }
}

/// Prediction for index `i` given the eigenvalues of the last component.
pub fn equipartition_prediction(p: &WeightVector, w_eigenvalues: &[f64], i: usize) -> Result<Prediction> {
    EquipartitionPredictor::new(p, w_eigenvalues)?.predict(i)
}

/// Inverse of the standard semicircle distribution function.
fn semicircle_quantile(q: f64) -> f64 {
    let (mut lo, mut hi) = (-2.0, 2.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if stats::semicircle_cdf(mid, 1.0) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Debug, Serialize)]
pub struct EquipartitionReport {
    /// Rows at the largest `N`.
    pub rows: Vec<EquipartitionRow>,
    /// Covariance at the largest `N`.
    pub covariance: Vec<CovarianceRow>,
    /// Standardized statistic per `(N, l)`.
    pub standardized: Vec<(usize, usize, StatSummary)>,
    /// Raw `X_l` per `(N, l)`.
    pub raw: Vec<(usize, usize, StatSummary)>,
    /// Largest `|sum_l X_l|` over all samples and indices.
    pub constraint_defect: f64,
    /// Largest route difference over the window at the largest `N` (mean, variance).
    pub route_gap: (f64, f64),
    pub verdicts: Vec<Verdict>,
}

struct SampleOut {
    lambda: Vec<f64>,
    /// `x[l][k]` for the k-th window index.
    x: Vec<Vec<f64>>,
}

pub fn run_equipartition(cfg: &ExperimentConfig, exec: Execution) -> Result<EquipartitionReport> {
    cfg.validate()?;
    let p = cfg.weights()?;
    if p.len() < 2 {
        return Err(LabError::Config("equipartition needs at least two weights in p".into()));
    }
    let k = p.len();
    let norm_sq = p.norm_sq();
    let scale = |n: usize| (cfg.beta.value() * n as f64 / 2.0).sqrt();
    let top = largest(&cfg.n_list);
    let mut report = EquipartitionReport {
        rows: Vec::new(),
        covariance: Vec::new(),
        standardized: Vec::new(),
        raw: Vec::new(),
        constraint_defect: 0.0,
        route_gap: (0.0, 0.0),
        verdicts: Vec::new(),
    };
    for &n in &cfg.n_list {
        let window = central_window(n, cfg.bulk_index_window);
        let batches = cfg.equipartition.batches.min(cfg.samples);
        let batch_of = |s: usize| s * batches / cfg.samples;
        let seeds = |s: usize| -> Vec<u64> {
            (0..k)
                .map(|l| {
                    if l + 1 == k {
                        sample_seed(cfg.seed, Tag::Equipartition, n, &[u64::MAX, batch_of(s) as u64])
                    } else {
                        sample_seed(cfg.seed, Tag::Equipartition, n, &[s as u64, l as u64])
                    }
                })
                .collect()
        };
        let outs = try_map_samples(exec, cfg.samples, |s| {
            let specs: Vec<_> = seeds(s).into_iter().map(|seed| cfg.ensemble(n, seed)).collect();
            let (h, comps) = sample_linear_combination(&specs, &p)?;
            let sd = eigen(&h)?;
            let u_win: CMat = sd.u.subcols(window.start, window.len()).to_owned();
            let lambda: Vec<f64> = window.clone().map(|i| sd.lambda[i]).collect();
            let x = comps
                .iter()
                .zip(p.weights())
                .map(|(c, &pl)| {
                    let y = c * &u_win;
                    (0..window.len())
                        .map(|col| {
                            let d: f64 = (0..n).map(|r| (u_win[(r, col)].conj() * y[(r, col)]).re).sum();
                            scale(n) * (d - pl * pl * lambda[col] / norm_sq)
                        })
                        .collect()
                })
                .collect();
            Ok::<_, LabError>(SampleOut { lambda, x })
        })?;

        let mut pooled: Vec<Vec<f64>> = vec![Vec::new(); k];
        for (s, out) in outs.iter().enumerate() {
            for (col, i) in window.clone().enumerate() {
                let sum: f64 = (0..k).map(|l| out.x[l][col]).sum();
                report.constraint_defect = report.constraint_defect.max(sum.abs());
                for (l, pool) in pooled.iter_mut().enumerate() {
                    pool.push(out.x[l][col]);
                    if n == top {
                        report.rows.push(EquipartitionRow {
                            sample: s,
                            index: i,
                            l: l + 1,
                            x_l: out.x[l][col],
                            lambda_i: out.lambda[col],
                        });
                    }
                }
            }
        }
        for (l, &pl) in p.weights().iter().enumerate() {
            let factor = (norm_sq / (pl * pl * (norm_sq - pl * pl))).sqrt();
            let z: Vec<f64> = pooled[l].iter().map(|x| x * factor).collect();
            report.standardized.push((n, l + 1, StatSummary::from_sample(&z)));
            report.raw.push((n, l + 1, StatSummary::from_sample(&pooled[l])));
        }
        if n == top {
            for l in 0..k {
                for m in 0..k {
                    let (pl, pm) = (p.weights()[l], p.weights()[m]);
                    let delta = if l == m { norm_sq } else { 0.0 };
                    report.covariance.push(CovarianceRow {
                        l: l + 1,
                        m: m + 1,
                        empirical: stats::covariance(&pooled[l], &pooled[m]),
                        predicted: pl * pl * (delta - pm * pm) / norm_sq,
                    });
                }
            }
            let last_seed = seeds(0)[k - 1];
            let w_last = sample_wigner(&cfg.ensemble(n, last_seed))?;
            let predictor = EquipartitionPredictor::new(&p, &linalg::eigvalsh(&w_last)?)?;
            for i in window.clone() {
                let pr = predictor.predict(i)?;
                report.route_gap.0 = report.route_gap.0.max((pr.mean_general - pr.mean_closed).abs());
                report.route_gap.1 = report.route_gap.1.max((pr.var_general - pr.var_closed).abs());
            }
        }
    }

    let v = &mut report.verdicts;
    for (n, l, s) in &report.standardized {
        if *n == top {
            v.push(Verdict::within(format!("equipartition.mean_l{l}"), s.mean, 0.0, 0.05));
            v.push(Verdict::below(format!("equipartition.ks_l{l}"), s.ks_distance_to_std_normal, 0.05));
        }
    }
    for (n, l, s) in &report.raw {
        if *n == top {
            let pl = p.weights()[l - 1];
            let pred = pl * pl * (norm_sq - pl * pl) / norm_sq;
            v.push(Verdict::within(format!("equipartition.variance_l{l}"), s.variance, pred, 0.1 * pred));
        }
    }
    for row in report.covariance.iter().filter(|r| r.l < r.m) {
        v.push(Verdict::within(format!("equipartition.cov_l{}_m{}", row.l, row.m), row.empirical, row.predicted, 0.08));
    }
    v.push(Verdict::below("equipartition.sum_constraint", report.constraint_defect, 1e-10));
    v.push(Verdict::below("equipartition.route_variance_gap", report.route_gap.1, 20.0 / (top as f64).sqrt()));
    Ok(report)
}
