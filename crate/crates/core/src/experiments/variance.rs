use num_complex::Complex64 as c64;

use crate::error::{LabError, Result};
use crate::linalg::CMat;
use crate::mde::MdeSolution;
use crate::observables::one_point_correction;

/// `|1 - s<M^2>|` below this is singular.
pub const VARIANCE_GUARD: f64 = 1e-10;

/// `Var_gamma(A) = (<(Å Im M)^2> - (s/2) Re[<M^2 Å>^2 / (1 - s<M^2>)]) / <Im M>^2`
/// with `A` given in the eigenbasis of `D` and `M` at the real energy `gamma`.
pub fn variance_formula(a_eig: &CMat, sol: &MdeSolution) -> Result<f64> {
    let n = sol.n();
    if a_eig.nrows() != n || a_eig.ncols() != n {
        return Err(LabError::Config("observable and MDE solution differ in dimension".into()));
    }
    let diag: Vec<c64> = (0..n).map(|i| a_eig[(i, i)]).collect();
    let c = one_point_correction(&diag, sol)?;
    let w = sol.im_diag();
    let nf = n as f64;
    let mut first = c64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            let aij = if i == j { a_eig[(i, i)] - c } else { a_eig[(i, j)] };
            let aji = if i == j { aij } else { a_eig[(j, i)] };
            first += aij * w[j] * aji * w[i];
        }
    }
    first /= nf;
    let s = sol.variance;
    let m2_a: c64 = (0..n).map(|i| sol.m_diag[i] * sol.m_diag[i] * (diag[i] - c)).sum::<c64>() / nf;
    let m2: c64 = sol.m_diag.iter().map(|m| m * m).sum::<c64>() / nf;
    let den = c64::new(1.0, 0.0) - m2 * s;
    if den.norm() < VARIANCE_GUARD {
        return Err(LabError::SingularVariance(den.norm()));
    }
    let im_mean: f64 = w.iter().sum::<f64>() / nf;
    Ok((first.re - 0.5 * s * (m2_a * m2_a / den).re) / (im_mean * im_mean))
}

/// `<(A - <A>)^2>`.
pub fn centred_second_moment(a: &CMat) -> f64 {
    let n = a.nrows();
    let tr: c64 = (0..n).map(|i| a[(i, i)]).sum::<c64>() / n as f64;
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            let v = if i == j { a[(i, i)] - tr } else { a[(i, j)] };
            acc += v.norm_sqr();
        }
    }
    acc / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, real_diag};
    use crate::mde::Mde;

    #[test]
    fn scalar_m_gives_the_centred_moment() {
        let a = real_diag(&[1.0, 3.0, -2.0, 0.5]);
        let sol = Mde::new(&[0.0; 4]).at_energy(0.7).unwrap();
        let v = variance_formula(&a, &sol).unwrap();
        assert!((v - centred_second_moment(&a)).abs() < 1e-10);
    }

    #[test]
    fn multiples_of_identity_have_zero_variance() {
        let sol = Mde::new(&[-0.5, 0.0, 0.5]).at_energy(0.1).unwrap();
        let v = variance_formula(&identity(3), &sol).unwrap();
        assert!(v.abs() < 1e-12);
    }
}
