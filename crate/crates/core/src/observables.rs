//! Regular observables.
//!
//! Both regularisations subtract a multiple of the identity, so only the
//! diagonal of `A` in the eigenbasis of `D` enters the correction scalar.

use num_complex::Complex64 as c64;

use crate::ensembles::Deformation;
use crate::error::{LabError, Result};
use crate::linalg::{self, CMat};
use crate::mde::{Mde, MdeSolution};

/// `<Im M>` below this is treated as outside the bulk.
pub const BULK_GUARD: f64 = 1e-6;
/// `|<M(z1) M(z2'')>|` below this is treated as singular.
pub const DENOMINATOR_GUARD: f64 = 1e-8;

/// Symmetric cut-off: 1 on `|x| <= delta/2`, 0 on `|x| >= delta`, quintic
/// smoothstep in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpFunction {
    delta: f64,
}

impl BumpFunction {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(LabError::Domain(format!("bump width must be positive, got {delta}")));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        let half = 0.5 * self.delta;
        if x <= half {
            1.0
        } else if x >= self.delta {
            0.0
        } else {
            let t = (x - half) / half;
            1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
        }
    }

    /// `1_delta(z1, z2) = phi(Re z1 - Re z2) phi(Im z1) phi(Im z2)`.
    pub fn cutoff(&self, z1: c64, z2: c64) -> f64 {
        self.eval(z1.re - z2.re) * self.eval(z1.im) * self.eval(z2.im)
    }
}

/// Where a regularisation was taken.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegularizationContext {
    OnePoint { e: f64 },
    TwoPoint { z1: c64, z2: c64, delta: f64 },
}

/// `A - correction * I` together with its context.
#[derive(Clone, Debug)]
pub struct RegularObservable {
    /// The regularised matrix in the original basis.
    pub a: CMat,
    pub context: RegularizationContext,
    /// The scalar subtracted from the diagonal (cut-off included).
    pub correction: c64,
}

/// Sign-adjusted second parameter: always in the opposite half-plane from `z1`.
pub fn partner_parameter(z1: c64, z2: c64) -> c64 {
    let s = -(z1.im * z2.im).signum();
    c64::new(z2.re, s * z2.im)
}

/// `<Im M A> / <Im M>` from the diagonal of `A` in the eigenbasis of `D`.
pub fn one_point_correction(a_diag: &[c64], sol: &MdeSolution) -> Result<c64> {
    check_len(a_diag.len(), sol.n())?;
    let im = sol.im_diag();
    let den: f64 = im.iter().sum::<f64>() / im.len() as f64;
    if !(den > BULK_GUARD) {
        return Err(LabError::Domain(format!(
            "<Im M> = {den:e} at Re z = {}: energy is outside the bulk",
            sol.z.re
        )));
    }
    let num: c64 = a_diag.iter().zip(&im).map(|(a, w)| a * w).sum::<c64>() / im.len() as f64;
    Ok(num / den)
}

/// `1_delta <M1 A M2> / <M1 M2>` with `m2` already at the sign-adjusted parameter.
pub fn two_point_correction(a_diag: &[c64], m1: &MdeSolution, m2: &MdeSolution, cutoff: f64) -> Result<c64> {
    check_len(a_diag.len(), m1.n())?;
    check_len(a_diag.len(), m2.n())?;
    if cutoff == 0.0 {
        return Ok(c64::new(0.0, 0.0));
    }
    let n = a_diag.len() as f64;
    let mut num = c64::new(0.0, 0.0);
    let mut den = c64::new(0.0, 0.0);
    for ((a, x), y) in a_diag.iter().zip(&m1.m_diag).zip(&m2.m_diag) {
        let p = x * y;
        num += p * a;
        den += p;
    }
    let (num, den) = (num / n, den / n);
    if den.norm() < DENOMINATOR_GUARD {
        return Err(LabError::Instability(format!(
            "|<M(z1) M(z2)>| = {:e} below guard at z1 = {}, z2 = {}",
            den.norm(),
            m1.z,
            m2.z
        )));
    }
    Ok(num / den * cutoff)
}

fn check_len(a: usize, n: usize) -> Result<()> {
    if a != n {
        return Err(LabError::Config(format!("observable has dimension {a}, MDE solution {n}")));
    }
    Ok(())
}

fn subtract_identity(a: &CMat, c: c64) -> CMat {
    let mut out = a.clone();
    for i in 0..out.nrows() {
        out[(i, i)] -= c;
    }
    out
}

/// One-point regularisation `A - <Im M(e) A>/<Im M(e)>` w.r.t. `Re sol.z`.
pub fn regularize_one_point(a: &CMat, def: &Deformation, sol: &MdeSolution) -> Result<RegularObservable> {
    let c = one_point_correction(&def.diagonal_in_eigenbasis(a), sol)?;
    Ok(RegularObservable {
        a: subtract_identity(a, c),
        context: RegularizationContext::OnePoint { e: sol.z.re },
        correction: c,
    })
}

/// Two-point regularisation of `A` w.r.t. `(z1, z2)`.
pub fn regularize_two_point(
    a: &CMat,
    def: &Deformation,
    mde: &Mde,
    z1: c64,
    z2: c64,
    delta: f64,
) -> Result<RegularObservable> {
    let c = two_point_scalar(&def.diagonal_in_eigenbasis(a), mde, z1, z2, delta)?;
    Ok(RegularObservable {
        a: subtract_identity(a, c),
        context: RegularizationContext::TwoPoint { z1, z2, delta },
        correction: c,
    })
}

fn two_point_scalar(a_diag: &[c64], mde: &Mde, z1: c64, z2: c64, delta: f64) -> Result<c64> {
    let cutoff = BumpFunction::new(delta)?.cutoff(z1, z2);
    if cutoff == 0.0 {
        return Ok(c64::new(0.0, 0.0));
    }
    let m1 = mde.solve(z1)?;
    let m2 = mde.solve(partner_parameter(z1, z2))?;
    two_point_correction(a_diag, &m1, &m2, cutoff)
}

/// `||A^{z1,z2} - A^{w1,w2}||`; the difference is `(c_w - c_z) I` by construction.
#[allow(clippy::too_many_arguments)]
pub fn lipschitz_defect(
    a: &CMat,
    def: &Deformation,
    mde: &Mde,
    (z1, z2): (c64, c64),
    (w1, w2): (c64, c64),
    delta: f64,
) -> Result<f64> {
    if !(z1.im * w1.im > 0.0 && z2.im * w2.im > 0.0) {
        return Err(LabError::Domain("Lipschitz comparison needs Im z_i Im w_i > 0".into()));
    }
    let az = regularize_two_point(a, def, mde, z1, z2, delta)?;
    let aw = regularize_two_point(a, def, mde, w1, w2, delta)?;
    let shift = aw.correction - az.correction;
    let n = a.nrows();
    let mut off_scalar: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let expected = if i == j { shift } else { c64::new(0.0, 0.0) };
            off_scalar = off_scalar.max((az.a[(i, j)] - aw.a[(i, j)] - expected).norm());
        }
    }
    let scale = 1.0 + linalg::max_abs(a) + az.correction.norm() + aw.correction.norm();
    if off_scalar > 1e-12 * scale {
        return Err(LabError::Numerical(format!("regularisation difference is not scalar: {off_scalar:e}")));
    }
    Ok(shift.norm())
}
