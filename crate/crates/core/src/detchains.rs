//! Deterministic approximations `M(z_1, B_1, ..., B_{k-1}, z_k)` of resolvent chains.
//!
//! All algebra happens in the eigenbasis of `D`, where every `M(z)` is
//! diagonal. Matrices passed to [`StabilityOp`] and [`det_chain_eig`] are
//! expected in that basis; [`det_chain`] rotates on entry and exit.

use std::collections::HashMap;

use num_complex::Complex64 as c64;
use serde::Serialize;

use crate::ensembles::Deformation;
use crate::error::{LabError, Result};
use crate::linalg::{self, CMat};
use crate::mde::{Mde, MdeSolution};
use crate::observables::{partner_parameter, two_point_correction, BumpFunction};
use crate::stats;

/// `|beta|` below this makes the stability operator singular.
pub const BETA_GUARD: f64 = 1e-10;
/// Longest chain the recursion accepts.
pub const MAX_CHAIN: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainShape {
    /// `<G_1 B_1 ... G_k B_k>`: `k` matrices, the last one closes the trace.
    Averaged,
    /// `(G_1 B_1 ... B_{k-1} G_k)_{xy}`: `k - 1` matrices.
    Isotropic,
}

#[derive(Clone, Debug)]
pub struct ChainSpec {
    pub zs: Vec<c64>,
    pub bs: Vec<CMat>,
    pub regular_flags: Vec<bool>,
    pub shape: ChainShape,
}

impl ChainSpec {
    pub fn new(zs: Vec<c64>, bs: Vec<CMat>, shape: ChainShape) -> Result<Self> {
        let k = zs.len();
        if k == 0 || k > MAX_CHAIN {
            return Err(LabError::Domain(format!("chain length must be in 1..={MAX_CHAIN}, got {k}")));
        }
        let expected = match shape {
            ChainShape::Averaged => k,
            ChainShape::Isotropic => k - 1,
        };
        if bs.len() != expected {
            return Err(LabError::Config(format!(
                "{shape:?} chain with {k} spectral parameters needs {expected} matrices, got {}",
                bs.len()
            )));
        }
        if let Some(z) = zs.iter().find(|z| z.im == 0.0) {
            return Err(LabError::Domain(format!("spectral parameter {z} lies on the real axis")));
        }
        let n = bs.first().map(|b| b.nrows());
        if bs.iter().any(|b| Some(b.nrows()) != n || b.nrows() != b.ncols()) {
            return Err(LabError::Config("chain matrices must be square of equal size".into()));
        }
        let regular_flags = vec![false; bs.len()];
        Ok(Self { zs, bs, regular_flags, shape })
    }

    pub fn with_regular_flags(mut self, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != self.bs.len() {
            return Err(LabError::Config("one regularity flag per matrix".into()));
        }
        self.regular_flags = flags;
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.zs.len()
    }

    /// `min_j |Im z_j|`.
    pub fn eta(&self) -> f64 {
        self.zs.iter().map(|z| z.im.abs()).fold(f64::INFINITY, f64::min)
    }
}

/// `B_{12}[R] = R - s M_1 <R> M_2` in the eigenbasis of `D`.
#[derive(Clone, Debug)]
pub struct StabilityOp {
    pub m1_diag: Vec<c64>,
    pub m2_diag: Vec<c64>,
    /// `1 - s <M_1 M_2>`.
    pub beta: c64,
    pub variance: f64,
}

impl StabilityOp {
    pub fn new(m1: &MdeSolution, m2: &MdeSolution) -> Self {
        let n = m1.n() as f64;
        let tr: c64 = m1.m_diag.iter().zip(&m2.m_diag).map(|(a, b)| a * b).sum::<c64>() / n;
        Self {
            m1_diag: m1.m_diag.clone(),
            m2_diag: m2.m_diag.clone(),
            beta: c64::new(1.0, 0.0) - tr * m1.variance,
            variance: m1.variance,
        }
    }

    fn add_scaled_product(&self, r: &CMat, scale: c64) -> CMat {
        let mut out = r.clone();
        for i in 0..out.nrows() {
            out[(i, i)] += scale * self.m1_diag[i] * self.m2_diag[i];
        }
        out
    }
}

pub fn stability_apply(op: &StabilityOp, r: &CMat) -> CMat {
    op.add_scaled_product(r, -linalg::ntrace(r) * op.variance)
}

/// `R + s <R>/beta M_1 M_2`.
pub fn stability_inverse(op: &StabilityOp, r: &CMat) -> Result<CMat> {
    if op.beta.norm() < BETA_GUARD {
        return Err(LabError::SingularStability { beta_abs: op.beta.norm() });
    }
    Ok(op.add_scaled_product(r, linalg::ntrace(r) * op.variance / op.beta))
}

/// MDE solutions for each parameter of a chain.
pub fn solve_chain(mde: &Mde, zs: &[c64]) -> Result<Vec<MdeSolution>> {
    zs.iter().map(|&z| mde.solve(z)).collect()
}

/// Recursive evaluation; `bs[j]` sits between `z_j` and `z_{j+1}`.
struct Recursion<'a> {
    sols: &'a [MdeSolution],
    bs: &'a [CMat],
    memo: HashMap<(usize, usize), CMat>,
}

impl Recursion<'_> {
    fn chain(&mut self, l: usize, r: usize) -> Result<CMat> {
        if let Some(m) = self.memo.get(&(l, r)) {
            return Ok(m.clone());
        }
        let out = if l == r {
            linalg::diag(&self.sols[l].m_diag)
        } else {
            let ml = &self.sols[l].m_diag;
            let s = self.sols[l].variance;
            let tail = self.chain(l + 1, r)?;
            let mb = scale_rows(ml, &self.bs[l]);
            let mut acc = &mb * &tail;
            for j in l + 1..r {
                let head = linalg::ntrace(&self.chain(l, j)?) * s;
                let rest = self.chain(j, r)?;
                let n = acc.nrows();
                for col in 0..n {
                    for row in 0..n {
                        acc[(row, col)] += head * ml[row] * rest[(row, col)];
                    }
                }
            }
            stability_inverse(&StabilityOp::new(&self.sols[l], &self.sols[r]), &acc)?
        };
        self.memo.insert((l, r), out.clone());
        Ok(out)
    }
}

fn scale_rows(d: &[c64], a: &CMat) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| d[i] * a[(i, j)])
}

/// `M(z_1, B_1, ..., B_{k-1}, z_k)` with `sols.len() = k` and at least `k - 1`
/// matrices, all in the eigenbasis of `D`.
pub fn det_chain_eig(sols: &[MdeSolution], bs_eig: &[CMat]) -> Result<CMat> {
    let k = sols.len();
    if k == 0 || k > MAX_CHAIN || bs_eig.len() + 1 < k {
        return Err(LabError::Config(format!("invalid chain: {k} parameters, {} matrices", bs_eig.len())));
    }
    Recursion { sols, bs: bs_eig, memo: HashMap::new() }.chain(0, k - 1)
}

/// `M(z_1, B_1, ..., z_k)` in the original basis.
pub fn det_chain(spec: &ChainSpec, def: &Deformation, mde: &Mde) -> Result<CMat> {
    let sols = solve_chain(mde, &spec.zs)?;
    let bs: Vec<CMat> = spec.bs.iter().take(spec.k() - 1).map(|b| def.to_eigenbasis(b)).collect();
    let m = det_chain_eig(&sols, &bs)?;
    Ok(match def.basis() {
        crate::ensembles::Basis::Identity => m,
        crate::ensembles::Basis::Explicit(v) => linalg::rotate_out_of(v, &m),
    })
}

/// `<M(z_1, B_1, ..., z_k) B_k>` for an averaged chain.
pub fn det_chain_average(spec: &ChainSpec, def: &Deformation, mde: &Mde) -> Result<c64> {
    if spec.shape != ChainShape::Averaged {
        return Err(LabError::Config("trace form needs an averaged chain".into()));
    }
    let sols = solve_chain(mde, &spec.zs)?;
    let bs: Vec<CMat> = spec.bs.iter().map(|b| def.to_eigenbasis(b)).collect();
    let m = det_chain_eig(&sols, &bs[..spec.k() - 1])?;
    Ok(linalg::ntrace_prod(&m, &bs[spec.k() - 1]))
}

/// `<M_1 A_1 M_2 A_2> + s <M_1 A_1 M_2><M_2 A_2 M_1>/(1 - s<M_1 M_2>)` (eigenbasis).
pub fn two_chain_closed_form(m1: &MdeSolution, m2: &MdeSolution, a1: &CMat, a2: &CMat) -> c64 {
    let n = m1.n();
    let s = m1.variance;
    let d1 = &m1.m_diag;
    let d2 = &m2.m_diag;
    let mut first = c64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            first += d1[i] * a1[(i, j)] * d2[j] * a2[(j, i)];
        }
    }
    let nf = n as f64;
    let t1: c64 = (0..n).map(|i| d1[i] * a1[(i, i)] * d2[i]).sum::<c64>() / nf;
    let t2: c64 = (0..n).map(|i| d2[i] * a2[(i, i)] * d1[i]).sum::<c64>() / nf;
    let tr12: c64 = (0..n).map(|i| d1[i] * d2[i]).sum::<c64>() / nf;
    first / nf + t1 * t2 * s / (c64::new(1.0, 0.0) - tr12 * s)
}

/// One row of an M-bound sweep.
#[derive(Clone, Debug, Serialize)]
pub struct BoundRow {
    pub k: usize,
    pub eta: f64,
    pub norm: f64,
    pub trace_abs: f64,
}

/// Fitted η-exponents of `||M(z_1, A_1, ..., A_k, z_{k+1})||` and
/// `|<M(z_1, A_1, ..., z_k) A_k>|` against the predicted powers.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub k: usize,
    pub rows: Vec<BoundRow>,
    pub norm_exponent: f64,
    pub trace_exponent: f64,
    pub predicted_norm_exponent: f64,
    pub predicted_trace_exponent: f64,
}

/// Sweep parameters for [`check_m_bounds`].
#[derive(Clone, Debug)]
pub struct BoundSweep {
    /// Common real part of all spectral parameters.
    pub energy: f64,
    /// Signs of `Im z_1, ..., Im z_{k+1}`.
    pub signs: Vec<f64>,
    pub etas: Vec<f64>,
    /// Raw observables `A_1, ..., A_k` in the eigenbasis of `D`.
    pub observables: Vec<CMat>,
    /// Regularise the observables two-point (else use them as given).
    pub regularize: bool,
    pub delta: f64,
}

/// Regularise `a` (eigenbasis) w.r.t. `(z1, z2)` given the solutions there.
fn regularize_eig(a: &CMat, mde: &Mde, z1: c64, z2: c64, delta: f64) -> Result<CMat> {
    let cutoff = BumpFunction::new(delta)?.cutoff(z1, z2);
    let m1 = mde.solve(z1)?;
    let m2 = mde.solve(partner_parameter(z1, z2))?;
    let diag: Vec<c64> = (0..a.nrows()).map(|i| a[(i, i)]).collect();
    let c = two_point_correction(&diag, &m1, &m2, cutoff)?;
    let mut out = a.clone();
    for i in 0..out.nrows() {
        out[(i, i)] -= c;
    }
    Ok(out)
}

/// Sizes of regular chains over an η-grid with log-log exponent fits.
pub fn check_m_bounds(sweep: &BoundSweep, mde: &Mde) -> Result<BoundReport> {
    let k = sweep.observables.len();
    if k == 0 || k > 4 || sweep.signs.len() != k + 1 {
        return Err(LabError::Config(format!(
            "bound check needs 1..=4 observables and k+1 signs, got {k} and {}",
            sweep.signs.len()
        )));
    }
    if sweep.etas.len() < 4 {
        return Err(LabError::Config("bound check needs at least four η values".into()));
    }
    let mut rows = Vec::with_capacity(sweep.etas.len());
    for &eta in &sweep.etas {
        let zs: Vec<c64> = sweep.signs.iter().map(|s| c64::new(sweep.energy, s * eta)).collect();
        let sols = solve_chain(mde, &zs)?;
        // Norm form: A_j between z_j and z_{j+1}.
        let mut linear = Vec::with_capacity(k);
        for j in 0..k {
            let a = &sweep.observables[j];
            linear.push(if sweep.regularize { regularize_eig(a, mde, zs[j], zs[j + 1], sweep.delta)? } else { a.clone() });
        }
        let full = det_chain_eig(&sols, &linear)?;
        let norm = linalg::op_norm(&full)?;
        // Trace form: z_1..z_k with A_k closing cyclically onto z_1.
        let mut cyclic = linear[..k - 1].to_vec();
        let last = &sweep.observables[k - 1];
        cyclic.push(if sweep.regularize { regularize_eig(last, mde, zs[k - 1], zs[0], sweep.delta)? } else { last.clone() });
        let head = det_chain_eig(&sols[..k], &cyclic[..k - 1])?;
        let trace_abs = linalg::ntrace_prod(&head, &cyclic[k - 1]).norm();
        rows.push(BoundRow { k, eta, norm, trace_abs });
    }
    let etas: Vec<f64> = rows.iter().map(|r| r.eta).collect();
    let norms: Vec<f64> = rows.iter().map(|r| r.norm).collect();
    let traces: Vec<f64> = rows.iter().map(|r| r.trace_abs.max(f64::MIN_POSITIVE)).collect();
    let half = (k / 2) as f64;
    Ok(BoundReport {
        k,
        norm_exponent: stats::loglog_fit(&etas, &norms).slope,
        trace_exponent: stats::loglog_fit(&etas, &traces).slope,
        predicted_norm_exponent: -half,
        predicted_trace_exponent: -(half - 1.0).max(0.0),
        rows,
    })
}
