//! Small dense-matrix helpers on top of faer.

use faer::{Mat, Side};
use num_complex::Complex64 as c64;

use crate::error::{LabError, Result};

/// Dense complex matrix; real symmetric matrices simply carry zero imaginary parts.
pub type CMat = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };

/// Normalised trace `<A> = tr(A)/N`.
pub fn ntrace(a: &CMat) -> c64 {
    let n = a.nrows();
    let mut s = ZERO;
    for i in 0..n {
        s += a[(i, i)];
    }
    s / n as f64
}

/// `<A B>` without forming the product.
pub fn ntrace_prod(a: &CMat, b: &CMat) -> c64 {
    let n = a.nrows();
    let mut s = ZERO;
    for j in 0..n {
        for i in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s / n as f64
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn diag(values: &[c64]) -> CMat {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { values[i] } else { ZERO })
}

pub fn real_diag(values: &[f64]) -> CMat {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(values[i], 0.0) } else { ZERO })
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

/// Max-entry modulus.
pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

/// Largest deviation from `A = A*`.
pub fn self_adjoint_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut m = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

pub fn is_real(a: &CMat) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].im == 0.0))
}

/// Operator norm (largest singular value).
pub fn op_norm(a: &CMat) -> Result<f64> {
    let sv = a
        .singular_values()
        .map_err(|e| LabError::Numerical(format!("singular values failed: {e:?}")))?;
    Ok(sv.into_iter().fold(0.0, f64::max))
}

/// `V* A V`.
pub fn rotate_into(basis: &CMat, a: &CMat) -> CMat {
    basis.adjoint() * (a * basis)
}

/// `V A V*`.
pub fn rotate_out_of(basis: &CMat, a: &CMat) -> CMat {
    basis * (a * basis.adjoint())
}

/// `max_{j,k} |<v_j, v_k> - δ_jk|`.
pub fn orthonormality_defect(v: &CMat) -> f64 {
    let g = v.adjoint() * v;
    max_abs_diff(&g, &identity(v.ncols()))
}

/// Eigendecomposition of a self-adjoint matrix, eigenvalues ascending.
///
/// Uses the real solver whenever the input has no imaginary part.
pub fn eigh(h: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(LabError::Domain("eigendecomposition needs a square matrix".into()));
    }
    if is_real(h) {
        let re = Mat::<f64>::from_fn(n, n, |i, j| h[(i, j)].re);
        let evd = re
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| LabError::Numerical(format!("eigendecomposition failed: {e:?}")))?;
        let s = evd.S().column_vector();
        let lambda: Vec<f64> = (0..n).map(|i| s[i]).collect();
        let u = evd.U();
        let vectors = Mat::from_fn(n, n, |i, j| c64::new(u[(i, j)], 0.0));
        Ok((lambda, vectors))
    } else {
        let evd = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| LabError::Numerical(format!("eigendecomposition failed: {e:?}")))?;
        let s = evd.S().column_vector();
        let lambda: Vec<f64> = (0..n).map(|i| s[i].re).collect();
        Ok((lambda, evd.U().to_owned()))
    }
}

/// Eigenvalues only.
pub fn eigvalsh(h: &CMat) -> Result<Vec<f64>> {
    let n = h.nrows();
    if is_real(h) {
        let re = Mat::<f64>::from_fn(n, n, |i, j| h[(i, j)].re);
        re.self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| LabError::Numerical(format!("eigenvalues failed: {e:?}")))
    } else {
        h.self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| LabError::Numerical(format!("eigenvalues failed: {e:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_of_product_matches_matmul() {
        let a = Mat::from_fn(5, 5, |i, j| c64::new(i as f64 - j as f64, (i * j) as f64 * 0.1));
        let b = Mat::from_fn(5, 5, |i, j| c64::new((i + 2 * j) as f64, -(j as f64)));
        let direct = ntrace(&(&a * &b));
        assert!((direct - ntrace_prod(&a, &b)).norm() < 1e-12);
    }

    #[test]
    fn eigh_complex_hermitian() {
        let h = Mat::from_fn(3, 3, |i, j| {
            if i == j {
                c64::new(i as f64, 0.0)
            } else if i < j {
                c64::new(0.3, 0.2)
            } else {
                c64::new(0.3, -0.2)
            }
        });
        let (lambda, u) = eigh(&h).unwrap();
        assert!(lambda.windows(2).all(|w| w[0] <= w[1]));
        assert!(orthonormality_defect(&u) < 1e-12);
        let recon = rotate_out_of(&u, &real_diag(&lambda));
        assert!(max_abs_diff(&recon, &h) < 1e-12);
    }
}
