//! Wigner, deformed Wigner and linear-combination ensembles.
//!
//! Entries are drawn from counter-addressed ChaCha streams (see [`crate::rng`]),
//! so a matrix depends only on its [`EnsembleSpec`] and never on which thread
//! sampled it.

use std::fmt;
use std::str::FromStr;

use faer::Mat;
use num_complex::Complex64 as c64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{self, CMat, ZERO};
use crate::rng;

/// Symmetry class: 1 = real symmetric, 2 = complex Hermitian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Beta {
    Real,
    Complex,
}

impl Beta {
    pub fn value(self) -> f64 {
        match self {
            Beta::Real => 1.0,
            Beta::Complex => 2.0,
        }
    }
}

impl TryFrom<u8> for Beta {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Beta::Real),
            2 => Ok(Beta::Complex),
            other => Err(format!("beta must be 1 or 2, got {other}")),
        }
    }
}

impl From<Beta> for u8 {
    fn from(b: Beta) -> u8 {
        match b {
            Beta::Real => 1,
            Beta::Complex => 2,
        }
    }
}

/// Centred, unit-variance entry distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryLaw {
    Gaussian,
    /// ±1 with equal probability.
    Rademacher,
    /// `sqrt(3) * U[-1, 1]`.
    Uniform,
}

impl EntryLaw {
    fn draw<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            EntryLaw::Gaussian => rng.sample(StandardNormal),
            EntryLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryLaw::Uniform => 3f64.sqrt() * rng.random_range(-1.0..1.0),
        }
    }
}

impl FromStr for EntryLaw {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(EntryLaw::Gaussian),
            "rademacher" => Ok(EntryLaw::Rademacher),
            "uniform" => Ok(EntryLaw::Uniform),
            other => Err(LabError::Config(format!(
                "unknown entry law '{other}' (expected gaussian, rademacher or uniform)"
            ))),
        }
    }
}

impl fmt::Display for EntryLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EntryLaw::Gaussian => "gaussian",
            EntryLaw::Rademacher => "rademacher",
            EntryLaw::Uniform => "uniform",
        };
        f.write_str(s)
    }
}

/// A sampled random matrix model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub beta: Beta,
    pub offdiag_law: EntryLaw,
    pub diag_law: EntryLaw,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn gaussian(n: usize, beta: Beta, seed: u64) -> Self {
        Self { n, beta, offdiag_law: EntryLaw::Gaussian, diag_law: EntryLaw::Gaussian, seed }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    /// Diagonal variance: `2/beta` for the gaussian tag (GOE/GUE), 1 otherwise.
    pub fn diag_std(&self) -> f64 {
        match self.diag_law {
            EntryLaw::Gaussian => (2.0 / self.beta.value()).sqrt(),
            _ => 1.0,
        }
    }
}

/// Sample `W` with `w_ab = N^{-1/2} chi_ab`, exactly self-adjoint.
pub fn sample_wigner(spec: &EnsembleSpec) -> Result<CMat> {
    let n = spec.n;
    if n < 2 {
        return Err(LabError::Config(format!("matrix dimension must be at least 2, got {n}")));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let diag_std = spec.diag_std();
    let mut w = Mat::<c64>::zeros(n, n);
    for i in 0..n {
        let mut rng = rng::row_stream(spec.seed, i);
        w[(i, i)] = c64::new(scale * diag_std * spec.diag_law.draw(&mut rng), 0.0);
        for j in (i + 1)..n {
            let x = match spec.beta {
                Beta::Real => c64::new(spec.offdiag_law.draw(&mut rng), 0.0),
                Beta::Complex => {
                    let a = spec.offdiag_law.draw(&mut rng);
                    let b = spec.offdiag_law.draw(&mut rng);
                    c64::new(a, b) / 2f64.sqrt()
                }
            } * scale;
            w[(i, j)] = x;
            w[(j, i)] = x.conj();
        }
    }
    Ok(w)
}

/// Weights `p = (p_1, ..., p_k)` of a linear combination, all nonzero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector {
    p: Vec<f64>,
    norm_sq: f64,
}

impl WeightVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(LabError::Config("weight vector must not be empty".into()));
        }
        if let Some(pos) = p.iter().position(|&x| x == 0.0 || !x.is_finite()) {
            return Err(LabError::Config(format!("weight p_{} must be finite and nonzero", pos + 1)));
        }
        let norm_sq = p.iter().map(|x| x * x).sum();
        Ok(Self { p, norm_sq })
    }

    pub fn weights(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// `||p||^2`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = String;
    fn try_from(p: Vec<f64>) -> std::result::Result<Self, String> {
        WeightVector::new(p).map_err(|e| e.to_string())
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Vec<f64> {
        w.p
    }
}

/// `H = sum_l p_l W_l` with independent `W_l`; also returns the summands `p_l W_l`.
pub fn sample_linear_combination(specs: &[EnsembleSpec], p: &WeightVector) -> Result<(CMat, Vec<CMat>)> {
    if specs.len() != p.len() {
        return Err(LabError::Config(format!(
            "{} ensembles given for {} weights",
            specs.len(),
            p.len()
        )));
    }
    let first = &specs[0];
    if let Some(bad) = specs.iter().find(|s| s.n != first.n || s.beta != first.beta) {
        return Err(LabError::Config(format!(
            "all components must share N and beta (got N={}, beta={:?} vs N={}, beta={:?})",
            bad.n, bad.beta, first.n, first.beta
        )));
    }
    let n = first.n;
    let mut h = Mat::<c64>::zeros(n, n);
    let mut components = Vec::with_capacity(specs.len());
    for (spec, &pl) in specs.iter().zip(p.weights()) {
        let mut w = sample_wigner(spec)?;
        for j in 0..n {
            for i in 0..n {
                w[(i, j)] *= pl;
                h[(i, j)] += w[(i, j)];
            }
        }
        components.push(w);
    }
    Ok((h, components))
}

/// `W0 + sqrt(t) U` with `U` from the Gaussian ensemble of class `beta`.
pub fn add_gaussian_component(w0: &CMat, t: f64, beta: Beta, seed: u64) -> Result<CMat> {
    if !(t >= 0.0) {
        return Err(LabError::Domain(format!("time must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(w0.clone());
    }
    let u = sample_wigner(&EnsembleSpec::gaussian(w0.nrows(), beta, seed))?;
    let st = t.sqrt();
    Ok(Mat::from_fn(w0.nrows(), w0.ncols(), |i, j| w0[(i, j)] + u[(i, j)] * st))
}

/// Orthonormal basis of a deformation.
#[derive(Clone, Debug)]
pub enum Basis {
    Identity,
    Explicit(CMat),
}

/// Deterministic self-adjoint `D = V diag(d) V*`.
#[derive(Clone, Debug)]
pub struct Deformation {
    eigenvalues: Vec<f64>,
    basis: Basis,
    norm_bound: f64,
}

impl Deformation {
    pub fn zero(n: usize) -> Self {
        Self::diagonal(&vec![0.0; n]).expect("zero deformation is valid")
    }

    /// `D = diag(values)`. Unsorted input gets a permutation basis.
    pub fn diagonal(values: &[f64]) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(LabError::Config("deformation eigenvalues must be finite".into()));
        }
        let sorted = values.windows(2).all(|w| w[0] <= w[1]);
        if sorted {
            return Ok(Self::from_parts(values.to_vec(), Basis::Identity));
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let n = values.len();
        let perm = Mat::from_fn(n, n, |i, j| if order[j] == i { linalg::ONE } else { ZERO });
        let eigenvalues = order.iter().map(|&k| values[k]).collect();
        Ok(Self::from_parts(eigenvalues, Basis::Explicit(perm)))
    }

    /// Diagonalise an arbitrary self-adjoint matrix.
    pub fn from_matrix(d: &CMat) -> Result<Self> {
        if linalg::self_adjoint_defect(d) > 1e-12 * (1.0 + linalg::max_abs(d)) {
            return Err(LabError::Domain("deformation must be self-adjoint".into()));
        }
        let (eigenvalues, v) = linalg::eigh(d)?;
        Ok(Self::from_parts(eigenvalues, Basis::Explicit(v)))
    }

    /// Eigenvalues with an explicit basis; the basis must be orthonormal.
    pub fn with_basis(eigenvalues: Vec<f64>, basis: CMat) -> Result<Self> {
        if basis.nrows() != eigenvalues.len() || basis.ncols() != eigenvalues.len() {
            return Err(LabError::Config("basis shape does not match the eigenvalue count".into()));
        }
        if !eigenvalues.windows(2).all(|w| w[0] <= w[1]) {
            return Err(LabError::Config("deformation eigenvalues must be ascending".into()));
        }
        let defect = linalg::orthonormality_defect(&basis);
        if defect > 1e-12 {
            return Err(LabError::Config(format!("deformation basis is not orthonormal (defect {defect:e})")));
        }
        Ok(Self::from_parts(eigenvalues, Basis::Explicit(basis)))
    }

    fn from_parts(eigenvalues: Vec<f64>, basis: Basis) -> Self {
        let norm_bound = eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        Self { eigenvalues, basis, norm_bound }
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// `max_i |d_i|`.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn is_zero(&self) -> bool {
        self.norm_bound == 0.0
    }

    pub fn matrix(&self) -> CMat {
        let d = linalg::real_diag(&self.eigenvalues);
        match &self.basis {
            Basis::Identity => d,
            Basis::Explicit(v) => linalg::rotate_out_of(v, &d),
        }
    }

    /// `V* A V`.
    pub fn to_eigenbasis(&self, a: &CMat) -> CMat {
        match &self.basis {
            Basis::Identity => a.clone(),
            Basis::Explicit(v) => linalg::rotate_into(v, a),
        }
    }

    /// Diagonal of `V* A V`.
    pub fn diagonal_in_eigenbasis(&self, a: &CMat) -> Vec<c64> {
        match &self.basis {
            Basis::Identity => (0..a.nrows()).map(|i| a[(i, i)]).collect(),
            Basis::Explicit(v) => {
                let av = a * v;
                (0..v.ncols())
                    .map(|i| (0..v.nrows()).map(|k| v[(k, i)].conj() * av[(k, i)]).sum())
                    .collect()
            }
        }
    }

    /// `W + D`.
    pub fn deform(&self, w: &CMat) -> CMat {
        match &self.basis {
            Basis::Identity => {
                let mut h = w.clone();
                for (i, &d) in self.eigenvalues.iter().enumerate() {
                    h[(i, i)] += d;
                }
                h
            }
            Basis::Explicit(_) => {
                let d = self.matrix();
                Mat::from_fn(w.nrows(), w.ncols(), |i, j| w[(i, j)] + d[(i, j)])
            }
        }
    }
}

/// N-independent recipe for a deformation, as used in experiment configs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeformationSpec {
    #[default]
    Zero,
    /// First half `-a`, second half `+a`.
    Bimodal { a: f64 },
    /// `d_i = a (2 (i + 1/2)/N - 1)`, equally spaced in `[-a, a]`.
    Linear { a: f64 },
    /// Fixed eigenvalue list; only valid for matching N.
    Explicit { values: Vec<f64> },
    /// A sampled Wigner matrix, frozen and used as `scale * W`.
    Wigner { scale: f64, seed: u64 },
}

impl DeformationSpec {
    pub fn build(&self, n: usize, beta: Beta) -> Result<Deformation> {
        match self {
            DeformationSpec::Zero => Ok(Deformation::zero(n)),
            DeformationSpec::Bimodal { a } => {
                let d: Vec<f64> = (0..n).map(|i| if i < n / 2 { -a } else { *a }).collect();
                Deformation::diagonal(&d)
            }
            DeformationSpec::Linear { a } => {
                let d: Vec<f64> =
                    (0..n).map(|i| a * (2.0 * (i as f64 + 0.5) / n as f64 - 1.0)).collect();
                Deformation::diagonal(&d)
            }
            DeformationSpec::Explicit { values } => {
                if values.len() != n {
                    return Err(LabError::Config(format!(
                        "explicit deformation has {} values but N = {n}",
                        values.len()
                    )));
                }
                Deformation::diagonal(values)
            }
            DeformationSpec::Wigner { scale, seed } => {
                let w = sample_wigner(&EnsembleSpec::gaussian(n, beta, *seed))?;
                let (d, v) = linalg::eigh(&w)?;
                let d = d.into_iter().map(|x| x * scale).collect::<Vec<_>>();
                if *scale >= 0.0 {
                    Deformation::with_basis(d, v)
                } else {
                    let n = d.len();
                    let rev: Vec<f64> = d.iter().rev().copied().collect();
                    let vr = Mat::from_fn(n, n, |i, j| v[(i, n - 1 - j)]);
                    Deformation::with_basis(rev, vr)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_sampling_is_bitwise_reproducible() {
        let spec = EnsembleSpec::gaussian(2, Beta::Real, 7);
        let a = sample_wigner(&spec).unwrap();
        let b = sample_wigner(&spec).unwrap();
        assert_eq!(linalg::max_abs_diff(&a, &b), 0.0);
    }

    #[test]
    fn dimension_one_is_rejected() {
        let spec = EnsembleSpec::gaussian(1, Beta::Real, 0);
        assert!(matches!(sample_wigner(&spec), Err(LabError::Config(_))));
    }

    #[test]
    fn unknown_law_tag_is_a_config_error() {
        assert!(matches!("cauchy".parse::<EntryLaw>(), Err(LabError::Config(_))));
        assert_eq!("uniform".parse::<EntryLaw>().unwrap(), EntryLaw::Uniform);
    }

    #[test]
    fn offdiagonal_variance_is_one_over_n() {
        let n = 512;
        let w = sample_wigner(&EnsembleSpec::gaussian(n, Beta::Real, 3)).unwrap();
        let mut s = 0.0;
        let mut cnt = 0.0;
        for j in 0..n {
            for i in 0..j {
                s += w[(i, j)].norm_sqr();
                cnt += 1.0;
            }
        }
        let var = s / cnt;
        assert!(var > 0.9 / n as f64 && var < 1.1 / n as f64, "var = {var}");
    }

    #[test]
    fn complex_ensemble_has_real_diagonal_and_vanishing_second_moment() {
        let n = 512;
        let w = sample_wigner(&EnsembleSpec::gaussian(n, Beta::Complex, 5)).unwrap();
        let max_im = (0..n).map(|i| w[(i, i)].im.abs()).fold(0.0, f64::max);
        assert_eq!(max_im, 0.0);
        assert_eq!(linalg::self_adjoint_defect(&w), 0.0);
        let mut m2 = c64::new(0.0, 0.0);
        let mut cnt = 0.0;
        for j in 0..n {
            for i in 0..j {
                let chi = w[(i, j)] * (n as f64).sqrt();
                m2 += chi * chi;
                cnt += 1.0;
            }
        }
        assert!((m2 / cnt).norm() < 5.0 / f64::sqrt(cnt));
    }

    #[test]
    fn every_law_is_centred_with_unit_variance() {
        for law in [EntryLaw::Gaussian, EntryLaw::Rademacher, EntryLaw::Uniform] {
            let spec = EnsembleSpec { n: 400, beta: Beta::Real, offdiag_law: law, diag_law: law, seed: 9 };
            let w = sample_wigner(&spec).unwrap();
            let n = spec.n as f64;
            let (mut s1, mut s2, mut cnt) = (0.0, 0.0, 0.0);
            for j in 0..spec.n {
                for i in 0..j {
                    let x = w[(i, j)].re * n.sqrt();
                    s1 += x;
                    s2 += x * x;
                    cnt += 1.0;
                }
            }
            assert!((s1 / cnt).abs() < 5.0 / cnt.sqrt(), "{law}: mean {}", s1 / cnt);
            assert!((s2 / cnt - 1.0).abs() < 0.03, "{law}: var {}", s2 / cnt);
        }
    }

    #[test]
    fn linear_combination_single_component_is_the_wigner_matrix() {
        let spec = EnsembleSpec::gaussian(16, Beta::Real, 21);
        let p = WeightVector::new(vec![1.0]).unwrap();
        let (h, comps) = sample_linear_combination(std::slice::from_ref(&spec), &p).unwrap();
        let w = sample_wigner(&spec).unwrap();
        assert_eq!(linalg::max_abs_diff(&h, &w), 0.0);
        assert_eq!(comps.len(), 1);
    }

    #[test]
    fn components_sum_to_h_exactly() {
        let specs = [EnsembleSpec::gaussian(32, Beta::Complex, 1), EnsembleSpec::gaussian(32, Beta::Complex, 2)];
        let p = WeightVector::new(vec![0.5, -1.5]).unwrap();
        let (h, comps) = sample_linear_combination(&specs, &p).unwrap();
        let sum = Mat::from_fn(32, 32, |i, j| comps[0][(i, j)] + comps[1][(i, j)]);
        assert_eq!(linalg::max_abs_diff(&h, &sum), 0.0);
    }

    #[test]
    fn mismatched_components_are_rejected() {
        let specs = [EnsembleSpec::gaussian(8, Beta::Real, 1), EnsembleSpec::gaussian(9, Beta::Real, 2)];
        let p = WeightVector::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(sample_linear_combination(&specs, &p), Err(LabError::Config(_))));
        let specs = [EnsembleSpec::gaussian(8, Beta::Real, 1), EnsembleSpec::gaussian(8, Beta::Complex, 2)];
        assert!(matches!(sample_linear_combination(&specs, &p), Err(LabError::Config(_))));
    }

    #[test]
    fn weights_must_be_nonzero() {
        assert!(WeightVector::new(vec![1.0, 0.0]).is_err());
        let p = WeightVector::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(p.norm_sq(), 5.0);
    }

    #[test]
    fn gaussian_component_at_zero_time_is_identity_map() {
        let w0 = sample_wigner(&EnsembleSpec::gaussian(8, Beta::Real, 4)).unwrap();
        let w = add_gaussian_component(&w0, 0.0, Beta::Real, 99).unwrap();
        assert_eq!(linalg::max_abs_diff(&w0, &w), 0.0);
        assert!(matches!(add_gaussian_component(&w0, -1.0, Beta::Real, 1), Err(LabError::Domain(_))));
    }

    #[test]
    fn gaussian_components_with_different_seeds_are_uncorrelated() {
        let n = 128;
        let zero = Mat::<c64>::zeros(n, n);
        let a = add_gaussian_component(&zero, 1.0, Beta::Real, 1).unwrap();
        let b = add_gaussian_component(&zero, 1.0, Beta::Real, 2).unwrap();
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for j in 0..n {
            for i in 0..=j {
                sab += a[(i, j)].re * b[(i, j)].re;
                saa += a[(i, j)].re.powi(2);
                sbb += b[(i, j)].re.powi(2);
            }
        }
        assert!((sab / (saa * sbb).sqrt()).abs() < 0.1);
    }

    #[test]
    fn unsorted_diagonal_deformation_gets_permutation_basis() {
        let d = Deformation::diagonal(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(d.eigenvalues(), &[-2.0, 0.5, 1.0]);
        assert_eq!(d.norm_bound(), 2.0);
        let m = d.matrix();
        assert_eq!(m[(0, 0)].re, 1.0);
        assert_eq!(m[(1, 1)].re, -2.0);
        assert_eq!(m[(2, 2)].re, 0.5);
    }

    #[test]
    fn wigner_deformation_basis_is_orthonormal() {
        let d = DeformationSpec::Wigner { scale: 0.7, seed: 3 }.build(24, Beta::Real).unwrap();
        match d.basis() {
            Basis::Explicit(v) => assert!(linalg::orthonormality_defect(v) < 1e-12),
            Basis::Identity => panic!("expected explicit basis"),
        }
        let rebuilt = Deformation::from_matrix(&d.matrix()).unwrap();
        for (a, b) in rebuilt.eigenvalues().iter().zip(d.eigenvalues()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
