use num_complex::Complex64 as c64;
use serde::Serialize;

use super::{sample_seed, ExperimentConfig, Setup, Tag, Verdict};
use crate::detchains::{det_chain_eig, two_chain_closed_form};
use crate::ensembles::{sample_wigner, Basis, Deformation};
use crate::error::{LabError, Result};
use crate::exec::{try_map_samples, Execution};
use crate::linalg::{self, CMat};
use crate::observables::regularize_two_point;
use crate::spectral::{chain_average_rotated, chain_entry_rotated, eigen, Factor};
use crate::stats::{least_squares, LinearFit};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorScalingRecord {
    pub k: usize,
    /// `averaged`, `isotropic` or `far`.
    pub kind: &'static str,
    #[serde(rename = "N")]
    pub n: usize,
    pub eta: f64,
    pub observed: f64,
    pub predicted: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalLawReport {
    pub records: Vec<ErrorScalingRecord>,
    /// Pooled fit of `log(observed / N^{k/2-1})` against `log(N eta)`, `k = 1, 2`.
    pub slopes: Vec<(usize, LinearFit)>,
    pub verdicts: Vec<Verdict>,
}

/// Geometric grid from `N^{-1+a}` to `N^{max_exponent}`.
pub fn eta_grid(n: usize, a: f64, max_exponent: f64, points: usize) -> Vec<f64> {
    let nf = n as f64;
    let (lo, hi) = ((a - 1.0) * nf.ln(), max_exponent * nf.ln());
    (0..points)
        .map(|j| (lo + (hi - lo) * j as f64 / (points - 1) as f64).exp())
        .collect()
}

fn averaged_scale(n: usize, k: usize, eta: f64) -> f64 {
    let nf = n as f64;
    nf.powf(k as f64 / 2.0 - 1.0) / (nf * eta).sqrt()
}

fn isotropic_scale(n: usize, k: usize, eta: f64) -> f64 {
    let nf = n as f64;
    nf.powf((k as f64 - 1.0) / 2.0) / (nf * eta * eta).sqrt()
}

fn shift(a: &CMat, c: c64) -> CMat {
    let mut out = a.clone();
    for i in 0..out.nrows() {
        out[(i, i)] -= c;
    }
    out
}

fn vector_to_eigenbasis(def: &Deformation, x: &[c64]) -> Vec<c64> {
    match def.basis() {
        Basis::Identity => x.to_vec(),
        Basis::Explicit(v) => (0..x.len()).map(|i| (0..x.len()).map(|k| v[(k, i)].conj() * x[k]).sum()).collect(),
    }
}

/// Deterministic targets at one η.
struct Point {
    eta: f64,
    z1: c64,
    z2: c64,
    /// Corrections for `(z1, z1)`, `(z1, z2)` and `(z2, z1)`.
    c11: c64,
    c12: c64,
    c21: c64,
    av: [c64; 2],
    iso: [c64; 2],
}

pub fn run_local_law(cfg: &ExperimentConfig, exec: Execution) -> Result<LocalLawReport> {
    cfg.validate()?;
    let ll = &cfg.locallaw;
    let spec = ll.deformation.as_ref().unwrap_or(&cfg.deformation);
    let mut records = Vec::new();
    let mut far_max: f64 = 0.0;
    for &n in &cfg.n_list {
        let setup = Setup::new(cfg, spec, n)?;
        if !setup.bulk.contains(ll.energy) {
            return Err(LabError::Domain(format!("locallaw.energy = {} is outside the bulk", ll.energy)));
        }
        let def = &setup.deformation;
        let mde = setup.mde();
        let delta = setup.delta(cfg);
        let a = ll.observable.build(n)?;
        let a_eig = def.to_eigenbasis(&a);
        let mut x = vec![c64::new(0.0, 0.0); n];
        x[0] = c64::new(1.0, 0.0);
        let x_eig = vector_to_eigenbasis(def, &x);

        let etas = eta_grid(n, cfg.eta_rule, ll.eta_max_exponent, ll.eta_points);
        let mut points = Vec::with_capacity(etas.len());
        for &eta in &etas {
            let z1 = c64::new(ll.energy, eta);
            let z2 = z1.conj();
            let c11 = regularize_two_point(&a, def, mde, z1, z1, delta)?.correction;
            let c12 = regularize_two_point(&a, def, mde, z1, z2, delta)?.correction;
            let c21 = regularize_two_point(&a, def, mde, z2, z1, delta)?.correction;
            let (m1, m2) = (mde.solve(z1)?, mde.solve(z2)?);
            let a11 = shift(&a_eig, c11);
            let a12 = shift(&a_eig, c12);
            let a21 = shift(&a_eig, c21);
            let av1 = (0..n).map(|i| m1.m_diag[i] * a11[(i, i)]).sum::<c64>() / n as f64;
            let av2 = two_chain_closed_form(&m1, &m2, &a12, &a21);
            let entry = |m: &CMat| -> c64 {
                (0..n).map(|i| x_eig[i].conj() * (0..n).map(|j| m[(i, j)] * x_eig[j]).sum::<c64>()).sum()
            };
            let iso1 = entry(&det_chain_eig(&[m1.clone(), m2.clone()], std::slice::from_ref(&a12))?);
            let iso2 = entry(&det_chain_eig(&[m1.clone(), m2.clone(), m1.clone()], &[a12, a21])?);
            points.push(Point { eta, z1, z2, c11, c12, c21, av: [av1, av2], iso: [iso1, iso2] });
        }
        let eta_far = (n as f64).powf(-0.9);
        let far_z = [c64::new(ll.far_apart[0], eta_far), c64::new(ll.far_apart[1], eta_far)];

        let per_sample = try_map_samples(exec, cfg.samples, |s| {
            let seed = sample_seed(cfg.seed, Tag::LocalLaw, n, &[s as u64]);
            let w = sample_wigner(&cfg.ensemble(n, seed))?;
            let sd = eigen(&def.deform(&w))?;
            let a_rot = sd.rotate(&a);
            let x_rot = sd.rotate_vector(&x);
            let mut errs = Vec::with_capacity(points.len());
            for p in &points {
                let g1 = sd.resolvent_diag(p.z1, Factor::G);
                let av1 = (0..n).map(|i| g1[i] * (a_rot[(i, i)] - p.c11)).sum::<c64>() / n as f64;
                let r12 = shift(&a_rot, p.c12);
                let r21 = shift(&a_rot, p.c21);
                let av2 = chain_average_rotated(&sd, &[p.z1, p.z2], &[Factor::G; 2], &[r12.clone(), r21.clone()])?;
                let iso1 = chain_entry_rotated(&sd, &[p.z1, p.z2], std::slice::from_ref(&r12), &x_rot, &x_rot)?;
                let iso2 = chain_entry_rotated(&sd, &[p.z1, p.z2, p.z1], &[r12, r21], &x_rot, &x_rot)?;
                errs.push([
                    (av1 - p.av[0]).norm(),
                    (av2 - p.av[1]).norm(),
                    (iso1 - p.iso[0]).norm(),
                    (iso2 - p.iso[1]).norm(),
                ]);
            }
            let id = linalg::identity(n);
            let far_id = chain_average_rotated(&sd, &far_z, &[Factor::G; 2], &[id.clone(), id])?.norm();
            let far_a = chain_average_rotated(&sd, &far_z, &[Factor::G; 2], &[a_rot.clone(), a_rot])?.norm();
            Ok::<_, LabError>((errs, far_id.max(far_a)))
        })?;

        let samples = per_sample.len() as f64;
        for (j, p) in points.iter().enumerate() {
            for k in 1..=2 {
                let av = per_sample.iter().map(|(e, _)| e[j][k - 1]).sum::<f64>() / samples;
                let pred = averaged_scale(n, k, p.eta);
                records.push(ErrorScalingRecord { k, kind: "averaged", n, eta: p.eta, observed: av, predicted: pred, ratio: av / pred });
                let iso = per_sample.iter().map(|(e, _)| e[j][k + 1]).sum::<f64>() / samples;
                let pred = isotropic_scale(n, k, p.eta);
                records.push(ErrorScalingRecord { k, kind: "isotropic", n, eta: p.eta, observed: iso, predicted: pred, ratio: iso / pred });
            }
        }
        let far = per_sample.iter().map(|(_, f)| *f).fold(0.0, f64::max);
        far_max = far_max.max(far);
        records.push(ErrorScalingRecord { k: 2, kind: "far", n, eta: eta_far, observed: far, predicted: 1.0, ratio: far });
    }

    let mut slopes = Vec::new();
    for k in 1..=2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = records
            .iter()
            .filter(|r| r.kind == "averaged" && r.k == k)
            .map(|r| {
                let nf = r.n as f64;
                ((nf * r.eta).ln(), (r.observed / nf.powf(k as f64 / 2.0 - 1.0)).ln())
            })
            .unzip();
        slopes.push((k, least_squares(&xs, &ys)));
    }
    let k2_ratio = records
        .iter()
        .filter(|r| r.kind == "averaged" && r.k == 2)
        .map(|r| r.ratio)
        .fold(0.0, f64::max);
    let verdicts = vec![
        Verdict::in_range("locallaw.k1_slope", slopes[0].1.slope, -0.7, -0.3),
        Verdict::below("locallaw.k2_ratio_max", k2_ratio, 10.0),
        Verdict::below("locallaw.far_apart_max", far_max, 10.0),
    ];
    Ok(LocalLawReport { records, slopes, verdicts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        let g = eta_grid(512, 0.1, -0.2, 6);
        assert_eq!(g.len(), 6);
        assert!((g[0] - 512f64.powf(-0.9)).abs() < 1e-15);
        assert!((g[5] - 512f64.powf(-0.2)).abs() < 1e-12);
    }
}
