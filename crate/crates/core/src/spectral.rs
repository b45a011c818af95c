//! Exact resolvent chains of a sampled matrix via its eigendecomposition.
//!
//! Observables are rotated into the eigenbasis once; every resolvent is then
//! a diagonal `diag(1/(lambda_i - z))` (or its modulus for `|G|`).

use num_complex::Complex64 as c64;

use crate::error::{LabError, Result};
use crate::linalg::{self, CMat};

#[derive(Clone, Debug)]
pub struct SpectralData {
    /// Eigenvalues, ascending.
    pub lambda: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub u: CMat,
    pub n: usize,
    pub source_seed: Option<u64>,
}

pub fn eigen(h: &CMat) -> Result<SpectralData> {
    let (lambda, u) = linalg::eigh(h)?;
    if lambda.iter().any(|x| !x.is_finite()) {
        return Err(LabError::Numerical("non-finite eigenvalue".into()));
    }
    Ok(SpectralData { n: lambda.len(), lambda, u, source_seed: None })
}

/// Which resolvent factor to use at a chain position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Factor {
    #[default]
    G,
    /// `|G(z)| = U diag(1/|lambda_i - z|) U*`.
    AbsG,
}

impl SpectralData {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.source_seed = Some(seed);
        self
    }

    /// `max |H U - U diag(lambda)|`.
    pub fn residual(&self, h: &CMat) -> f64 {
        let hu = h * &self.u;
        let n = self.n;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max((hu[(i, j)] - self.u[(i, j)] * self.lambda[j]).norm());
            }
        }
        worst
    }

    /// `U* B U`.
    pub fn rotate(&self, b: &CMat) -> CMat {
        linalg::rotate_into(&self.u, b)
    }

    /// `U* x`.
    pub fn rotate_vector(&self, x: &[c64]) -> Vec<c64> {
        (0..self.n).map(|i| (0..self.n).map(|k| self.u[(k, i)].conj() * x[k]).sum()).collect()
    }

    /// Diagonal of a resolvent factor in the eigenbasis.
    pub fn resolvent_diag(&self, z: c64, factor: Factor) -> Vec<c64> {
        self.lambda
            .iter()
            .map(|&l| {
                let g = (c64::new(l, 0.0) - z).inv();
                match factor {
                    Factor::G => g,
                    Factor::AbsG => c64::new(g.norm(), 0.0),
                }
            })
            .collect()
    }

    /// `<x, u_i>` for all i.
    pub fn overlaps_with(&self, x: &[c64]) -> Vec<c64> {
        self.rotate_vector(x).into_iter().map(|v| v.conj()).collect()
    }
}

fn check_params(zs: &[c64]) -> Result<()> {
    if zs.is_empty() || zs.len() > crate::detchains::MAX_CHAIN {
        return Err(LabError::Domain(format!("chain length must be in 1..=5, got {}", zs.len())));
    }
    if let Some(z) = zs.iter().find(|z| z.im == 0.0) {
        return Err(LabError::Domain(format!("spectral parameter {z} lies on the real axis")));
    }
    Ok(())
}

/// `<F_1 B_1 ... F_k B_k>` with `B_j` already rotated into the eigenbasis.
pub fn chain_average_rotated(sd: &SpectralData, zs: &[c64], factors: &[Factor], bs_rot: &[CMat]) -> Result<c64> {
    check_params(zs)?;
    let k = zs.len();
    if bs_rot.len() != k || factors.len() != k {
        return Err(LabError::Config("averaged chain needs one matrix and one factor per parameter".into()));
    }
    let n = sd.n;
    let g: Vec<Vec<c64>> = zs.iter().zip(factors).map(|(&z, &f)| sd.resolvent_diag(z, f)).collect();
    let total = match k {
        1 => (0..n).map(|i| g[0][i] * bs_rot[0][(i, i)]).sum::<c64>(),
        2 => {
            let mut acc = c64::new(0.0, 0.0);
            for j in 0..n {
                for i in 0..n {
                    acc += g[0][i] * bs_rot[0][(i, j)] * g[1][j] * bs_rot[1][(j, i)];
                }
            }
            acc
        }
        _ => {
            let mut p = scale_rows(&g[0], &bs_rot[0]);
            for j in 1..k {
                p = &p * &scale_rows(&g[j], &bs_rot[j]);
            }
            (0..n).map(|i| p[(i, i)]).sum::<c64>()
        }
    };
    Ok(total / n as f64)
}

fn scale_rows(d: &[c64], a: &CMat) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| d[i] * a[(i, j)])
}

/// `<G(z_1) B_1 ... G(z_k) B_k>`.
pub fn resolvent_chain_average(sd: &SpectralData, zs: &[c64], bs: &[CMat]) -> Result<c64> {
    let rot: Vec<CMat> = bs.iter().map(|b| sd.rotate(b)).collect();
    chain_average_rotated(sd, zs, &vec![Factor::G; zs.len()], &rot)
}

/// Averaged chain with `|G|` at the flagged positions.
pub fn abs_resolvent_chain(sd: &SpectralData, zs: &[c64], factors: &[Factor], bs: &[CMat]) -> Result<c64> {
    let rot: Vec<CMat> = bs.iter().map(|b| sd.rotate(b)).collect();
    chain_average_rotated(sd, zs, factors, &rot)
}

/// `<x, G_1 B_1 ... B_{k-1} G_k y>` with rotated matrices and vectors.
pub fn chain_entry_rotated(sd: &SpectralData, zs: &[c64], bs_rot: &[CMat], x_rot: &[c64], y_rot: &[c64]) -> Result<c64> {
    check_params(zs)?;
    let k = zs.len();
    if bs_rot.len() + 1 != k {
        return Err(LabError::Config("isotropic chain needs k - 1 matrices".into()));
    }
    let n = sd.n;
    let mut v: Vec<c64> = y_rot.to_vec();
    for j in (0..k).rev() {
        let g = sd.resolvent_diag(zs[j], Factor::G);
        v.iter_mut().zip(&g).for_each(|(a, b)| *a *= b);
        if j > 0 {
            let b = &bs_rot[j - 1];
            v = (0..n).map(|r| (0..n).map(|c| b[(r, c)] * v[c]).sum()).collect();
        }
    }
    Ok(x_rot.iter().zip(&v).map(|(a, b)| a.conj() * b).sum())
}

pub fn resolvent_chain_entry(sd: &SpectralData, zs: &[c64], bs: &[CMat], x: &[c64], y: &[c64]) -> Result<c64> {
    if x.len() != sd.n || y.len() != sd.n {
        return Err(LabError::Config("vector length does not match the matrix dimension".into()));
    }
    let rot: Vec<CMat> = bs.iter().map(|b| sd.rotate(b)).collect();
    chain_entry_rotated(sd, zs, &rot, &sd.rotate_vector(x), &sd.rotate_vector(y))
}

/// `<u_i, A u_j>` with per-index centering `c_i` on the diagonal.
#[derive(Clone, Debug)]
pub struct OverlapTable {
    /// `U* A U`.
    pub matrix: CMat,
    /// `<A Im M(gamma_i)>/<Im M(gamma_i)>`.
    pub centers: Vec<c64>,
}

impl OverlapTable {
    fn check(&self, i: usize) -> Result<()> {
        if i >= self.centers.len() {
            return Err(LabError::Domain(format!("index {i} outside 0..{}", self.centers.len())));
        }
        Ok(())
    }

    /// `<u_i, A^{gamma_i} u_j>`.
    pub fn regular(&self, i: usize, j: usize) -> Result<c64> {
        self.check(i)?;
        self.check(j)?;
        let raw = self.matrix[(i, j)];
        Ok(if i == j { raw - self.centers[i] } else { raw })
    }

    /// `<u_i, A u_i>`.
    pub fn raw_diagonal(&self, i: usize) -> Result<c64> {
        self.check(i)?;
        Ok(self.matrix[(i, i)])
    }

    pub fn centering(&self, i: usize) -> Result<c64> {
        self.check(i)?;
        Ok(self.centers[i])
    }
}

pub fn overlaps(sd: &SpectralData, a: &CMat, centers: Vec<c64>) -> Result<OverlapTable> {
    if centers.len() != sd.n || a.nrows() != sd.n {
        return Err(LabError::Config("one centering per eigenvector required".into()));
    }
    Ok(OverlapTable { matrix: sd.rotate(a), centers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, real_diag};

    #[test]
    fn diagonal_input_gives_sorted_permutation() {
        let sd = eigen(&real_diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(sd.lambda, vec![1.0, 2.0, 3.0]);
        for j in 0..3 {
            let nonzero = (0..3).filter(|&i| sd.u[(i, j)].norm() > 0.5).count();
            assert_eq!(nonzero, 1);
        }
    }

    #[test]
    fn zero_matrix() {
        let sd = eigen(&CMat::zeros(4, 4)).unwrap();
        assert!(sd.lambda.iter().all(|&l| l == 0.0));
        assert!(linalg::orthonormality_defect(&sd.u) < 1e-14);
    }

    #[test]
    fn eigenvector_resolvent_entry() {
        let sd = eigen(&real_diag(&[-1.0, 0.5, 2.0])).unwrap();
        let z = c64::new(0.1, 0.2);
        let u1: Vec<c64> = (0..3).map(|i| sd.u[(i, 1)]).collect();
        let v = resolvent_chain_entry(&sd, &[z], &[], &u1, &u1).unwrap();
        assert!((v - (c64::new(0.5, 0.0) - z).inv()).norm() < 1e-15);
    }

    #[test]
    fn abs_resolvent_of_zero_matrix() {
        let sd = eigen(&CMat::zeros(3, 3)).unwrap();
        let z = c64::new(0.3, -0.4);
        let v = abs_resolvent_chain(&sd, &[z], &[Factor::AbsG], &[identity(3)]).unwrap();
        assert!((v - c64::new(1.0 / z.norm(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn overlap_index_is_checked() {
        let sd = eigen(&identity(2)).unwrap();
        let t = overlaps(&sd, &identity(2), vec![c64::new(0.0, 0.0); 2]).unwrap();
        assert!(t.regular(2, 0).is_err());
        assert!((t.regular(0, 0).unwrap() - c64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(t.regular(0, 1).unwrap().norm() < 1e-15);
    }
}
