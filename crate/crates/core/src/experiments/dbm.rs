//! Dyson Brownian motion for `N <= 64`, real symmetric class.
//!
//! Eigenvectors are advanced with a Cayley transform of the antisymmetric
//! increment `X_ji = dB_ij / (sqrt(N) (lambda_i - lambda_j))`, whose second-order
//! term reproduces the `-1/2 sum dt/(N (lambda_i - lambda_j)^2)` drift.

use faer::linalg::solvers::Solve;
use faer::Mat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{central_window, sample_seed, ExperimentConfig, Tag, Verdict};
use crate::ensembles::{add_gaussian_component, sample_wigner, Beta};
use crate::error::{LabError, Result};
use crate::exec::{try_map_samples, Execution};
use crate::linalg;
use crate::rng;
use crate::stats::ks_two_sample;

/// Eigenvalues (ascending) and real orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub lambda: Vec<f64>,
    pub u: Mat<f64>,
    pub t: f64,
}

impl FlowState {
    pub fn from_matrix(h: &linalg::CMat) -> Result<Self> {
        if !linalg::is_real(h) {
            return Err(LabError::Config("the flow is implemented for real symmetric matrices".into()));
        }
        let (lambda, u) = linalg::eigh(h)?;
        let n = lambda.len();
        Ok(Self { lambda, u: Mat::from_fn(n, n, |i, j| u[(i, j)].re), t: 0.0 })
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn min_gap(&self) -> f64 {
        self.lambda.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// `sqrt(N) <u_i, diag(a) u_i>`.
    pub fn overlap_stat(&self, a: &[f64], i: usize) -> f64 {
        let n = self.n();
        (n as f64).sqrt() * (0..n).map(|k| a[k] * self.u[(k, i)] * self.u[(k, i)]).sum::<f64>()
    }
}

fn max_orthonormality_defect(u: &Mat<f64>) -> f64 {
    let g = u.transpose() * u;
    let mut worst: f64 = 0.0;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

fn gram_schmidt(u: &mut Mat<f64>) {
    let n = u.nrows();
    for j in 0..u.ncols() {
        for k in 0..j {
            let d: f64 = (0..n).map(|r| u[(r, k)] * u[(r, j)]).sum();
            for r in 0..n {
                u[(r, j)] -= d * u[(r, k)];
            }
        }
        let norm = (0..n).map(|r| u[(r, j)] * u[(r, j)]).sum::<f64>().sqrt();
        for r in 0..n {
            u[(r, j)] /= norm;
        }
    }
}

/// One step driven by the symmetric increment `db` (variance `dt` off the
/// diagonal, `2 dt` on it). Returns the new state and its orthonormality
/// defect before re-orthonormalisation.
pub fn cayley_step(state: &FlowState, db: &Mat<f64>, dt: f64) -> Result<(FlowState, f64)> {
    let n = state.n();
    let nf = n as f64;
    let sqrt_n = nf.sqrt();
    let l = &state.lambda;
    let mut lambda = l.clone();
    for i in 0..n {
        let repulsion: f64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (l[i] - l[j])).sum();
        lambda[i] += db[(i, i)] / sqrt_n + dt * repulsion / nf;
    }
    let half = Mat::<f64>::from_fn(n, n, |j, i| if i == j { 0.0 } else { 0.5 * db[(i, j)] / (sqrt_n * (l[i] - l[j])) });
    let lhs = Mat::<f64>::from_fn(n, n, |r, c| if r == c { 1.0 } else { -half[(r, c)] });
    let rhs = Mat::<f64>::from_fn(n, n, |r, c| if r == c { 1.0 } else { half[(r, c)] });
    let q = lhs.partial_piv_lu().solve(&rhs);
    let mut u = &state.u * &q;
    let drift = max_orthonormality_defect(&u);
    gram_schmidt(&mut u);
    if lambda.iter().any(|x| !x.is_finite()) {
        return Err(LabError::Numerical("non-finite eigenvalue in the flow".into()));
    }
    Ok((FlowState { lambda, u, t: state.t + dt }, drift))
}

/// Symmetric Gaussian increment: variance `dt` off the diagonal, `2 dt` on it.
fn increment(rng: &mut ChaCha8Rng, n: usize, dt: f64) -> Mat<f64> {
    let sd = dt.sqrt();
    let mut db = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        db[(i, i)] = std::f64::consts::SQRT_2 * sd * rng.sample::<f64, _>(StandardNormal);
        for j in (i + 1)..n {
            let x = sd * rng.sample::<f64, _>(StandardNormal);
            db[(i, j)] = x;
            db[(j, i)] = x;
        }
    }
    db
}

/// One simulated path with snapshots.
#[derive(Clone, Debug, Serialize)]
pub struct DbmTrajectory {
    /// Snapshot times, starting at 0.
    pub times: Vec<f64>,
    /// `stats[c][k]`: statistic of the k-th window index at snapshot `c`.
    pub stats: Vec<Vec<f64>>,
    pub steps: usize,
    pub rejected: usize,
    /// Rejected proposals whose eigenvalues crossed.
    pub crossing_proposals: usize,
    pub max_drift: f64,
    pub smallest_dt: f64,
    /// Ordering of the accepted path.
    pub order_preserved: bool,
    #[serde(skip)]
    pub final_state: Option<FlowState>,
}

/// Integrate through `times`, recording a snapshot at each. A proposal that
/// closes a gap below `10 dt` is discarded and redrawn with half the step.
pub fn integrate(
    mut state: FlowState,
    times: &[f64],
    a: &[f64],
    idx: &[usize],
    dt_factor: f64,
    dt_min: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DbmTrajectory> {
    let n = state.n();
    let snapshot = |s: &FlowState| idx.iter().map(|&i| s.overlap_stat(a, i)).collect::<Vec<_>>();
    let mut traj = DbmTrajectory {
        times: times.to_vec(),
        stats: Vec::with_capacity(times.len()),
        steps: 0,
        rejected: 0,
        crossing_proposals: 0,
        max_drift: 0.0,
        smallest_dt: f64::INFINITY,
        order_preserved: true,
        final_state: None,
    };
    for &target in times {
        while target - state.t > 1e-14 * target.max(1.0) {
            let mut dt = (dt_factor * state.min_gap()).min(target - state.t);
            loop {
                if dt < dt_min {
                    return Err(LabError::Numerical(format!(
                        "flow step fell below dt_min = {dt_min:e} at t = {}",
                        state.t
                    )));
                }
                let db = increment(rng, n, dt);
                let (next, drift) = cayley_step(&state, &db, dt)?;
                let ordered = next.lambda.windows(2).all(|w| w[1] > w[0]);
                if ordered && next.min_gap() >= 10.0 * dt {
                    traj.max_drift = traj.max_drift.max(drift);
                    traj.smallest_dt = traj.smallest_dt.min(dt);
                    traj.steps += 1;
                    state = next;
                    break;
                }
                if !ordered {
                    traj.crossing_proposals += 1;
                }
                traj.rejected += 1;
                dt *= 0.5;
            }
            if !state.lambda.windows(2).all(|w| w[1] > w[0]) {
                traj.order_preserved = false;
            }
        }
        state.t = target;
        traj.stats.push(snapshot(&state));
    }
    traj.final_state = Some(state);
    Ok(traj)
}

#[derive(Clone, Debug, Serialize)]
pub struct DbmRow {
    /// Flow runs are `0..runs`; direct-diagonalisation samples are `-1, -2, ...`.
    pub run: i64,
    pub t: f64,
    pub stat: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DbmReport {
    pub rows: Vec<DbmRow>,
    pub ks_distance: f64,
    pub max_drift: f64,
    pub smallest_dt: f64,
    pub steps: usize,
    pub rejected: usize,
    pub crossing_proposals: usize,
    pub order_violations: usize,
    pub verdicts: Vec<Verdict>,
}

pub fn run_dbm(cfg: &ExperimentConfig, exec: Execution) -> Result<DbmReport> {
    cfg.validate()?;
    let d = &cfg.dbm;
    if cfg.beta != Beta::Real {
        return Err(LabError::Config("dbm supports beta = 1 only".into()));
    }
    let n = d.n;
    let a = d.observable.diagonal(n)?;
    let idx: Vec<usize> = central_window(n, cfg.bulk_index_window).collect();
    let w0 = sample_wigner(&cfg.ensemble(n, d.w0_seed))?;
    let initial = FlowState::from_matrix(&w0)?;
    let times: Vec<f64> = (0..=d.checkpoints).map(|c| d.t * c as f64 / d.checkpoints as f64).collect();

    let runs = try_map_samples(exec, d.runs, |r| {
        let mut rng = rng::stream(sample_seed(cfg.seed, Tag::Dbm, n, &[r as u64]));
        integrate(initial.clone(), &times, &a, &idx, d.dt_factor, d.dt_min, &mut rng)
    })?;
    let oracle = try_map_samples(exec, d.runs, |r| {
        let h = add_gaussian_component(&w0, d.t, Beta::Real, sample_seed(cfg.seed, Tag::DbmOracle, n, &[r as u64]))?;
        let s = FlowState::from_matrix(&h)?;
        Ok::<_, LabError>(idx.iter().map(|&i| s.overlap_stat(&a, i)).collect::<Vec<_>>())
    })?;

    let mut rows = Vec::new();
    let mut flow_end = Vec::new();
    for (r, traj) in runs.iter().enumerate() {
        for (c, &t) in traj.times.iter().enumerate() {
            for &stat in &traj.stats[c] {
                rows.push(DbmRow { run: r as i64, t, stat });
            }
        }
        flow_end.extend_from_slice(traj.stats.last().unwrap());
    }
    let oracle_end: Vec<f64> = oracle.iter().flatten().copied().collect();
    for (r, stats) in oracle.iter().enumerate() {
        for &stat in stats {
            rows.push(DbmRow { run: -(r as i64) - 1, t: d.t, stat });
        }
    }
    let ks_distance = ks_two_sample(&flow_end, &oracle_end);
    let max_drift = runs.iter().map(|t| t.max_drift).fold(0.0, f64::max);
    let order_violations = runs.iter().filter(|t| !t.order_preserved).count();
    let verdicts = vec![
        Verdict::below("dbm.ks_distance", ks_distance, 0.1),
        Verdict::below("dbm.orthonormality_drift", max_drift, 1e-6),
        Verdict::within("dbm.order_violations", order_violations as f64, 0.0, 0.0),
    ];
    Ok(DbmReport {
        rows,
        ks_distance,
        max_drift,
        smallest_dt: runs.iter().map(|t| t.smallest_dt).fold(f64::INFINITY, f64::min),
        steps: runs.iter().map(|t| t.steps).sum(),
        rejected: runs.iter().map(|t| t.rejected).sum(),
        crossing_proposals: runs.iter().map(|t| t.crossing_proposals).sum(),
        order_violations,
        verdicts,
    })
}
