use num_complex::Complex64 as c64;
use rmt_eth_lab::ensembles::{sample_wigner, Beta, EnsembleSpec, WeightVector};
use rmt_eth_lab::linalg::eigvalsh;
use rmt_eth_lab::mde::*;

fn bimodal(n: usize) -> Vec<f64> {
    (0..n).map(|i| if i < n / 2 { -1.0 } else { 1.0 }).collect()
}

/// Roots of a monic complex polynomial by Durand-Kerner iteration.
fn poly_roots(coeffs: &[c64]) -> Vec<c64> {
    let deg = coeffs.len();
    let eval = |x: c64| coeffs.iter().fold(c64::new(1.0, 0.0), |acc, &c| acc * x + c);
    let seed = c64::new(0.4, 0.9);
    let mut roots: Vec<c64> = (0..deg).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..5000 {
        let prev = roots.clone();
        for i in 0..deg {
            let mut denom = c64::new(1.0, 0.0);
            for j in 0..deg {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            let r = roots[i];
            roots[i] = r - eval(r) / denom;
        }
        if roots.iter().zip(&prev).all(|(a, b)| (a - b).norm() < 1e-15) {
            break;
        }
    }
    roots
}

#[test]
fn bimodal_matches_cubic_root_oracle() {
    // m ((z+m)^2 - 1) + z + m = 0  <=>  m^3 + 2z m^2 + z^2 m + z = 0 for d = ±1 halves.
    for &z in &[c64::new(0.0, 1e-6), c64::new(0.7, 1e-6), c64::new(-1.2, 0.3), c64::new(2.5, 1e-6)] {
        let s = solve_mde(&bimodal(64), z).unwrap();
        let roots = poly_roots(&[2.0 * z, z * z, z]);
        let upper: Vec<c64> = roots.into_iter().filter(|r| r.im > 0.0).collect();
        let closest = upper.iter().map(|r| (r - s.m).norm()).fold(f64::INFINITY, f64::min);
        assert!(closest < 1e-9, "z={z}: m={} roots={upper:?}", s.m);
        assert!(s.m.im * z.im > 0.0);
    }
}

#[test]
fn semicircle_closed_form_on_bulk_grid() {
    for k in 0..20 {
        let e = -1.5 + 3.0 * k as f64 / 19.0;
        for &eta in &[1.0, 1e-2, 1e-4, 1e-6] {
            let z = c64::new(e, eta);
            let s = solve_mde(&[0.0; 3], z).unwrap();
            assert!((s.m - semicircle_stieltjes(z)).norm() < 1e-10, "z={z}");
        }
    }
}

#[test]
fn continuation_path_is_continuous() {
    let mde = Mde::new(&bimodal(8));
    let mut eta: f64 = 1.0;
    let mut prev = mde.solve(c64::new(0.4, eta)).unwrap().m;
    while eta > 1e-6 {
        let next_eta = eta / 2.0;
        let m = mde.solve(c64::new(0.4, next_eta)).unwrap().m;
        assert!((m - prev).norm() < 10.0 * (eta - next_eta));
        prev = m;
        eta = next_eta;
    }
}

#[test]
fn m_is_bounded_in_the_bulk() {
    let d = bimodal(16);
    let dm = build_density(&d).unwrap();
    let bulk = bulk_region(&dm, 1e-3).unwrap();
    let mde = Mde::new(&d);
    for &(a, b) in &bulk.intervals {
        for k in 0..=10 {
            let e = a + (b - a) * k as f64 / 10.0;
            assert!(mde.at_energy(e).unwrap().norm() <= 10.0);
        }
    }
}

#[test]
fn bimodal_density_is_symmetric() {
    let dm = build_density(&bimodal(2)).unwrap();
    assert!((dm.total_mass() - 1.0).abs() < 1e-3);
    let mut worst: f64 = 0.0;
    for k in 0..=3000 {
        let e = k as f64 * 1e-3;
        let direct = dm.mde().density_at(e).unwrap();
        let mirror = dm.mde().density_at(-e).unwrap();
        worst = worst.max((direct - mirror).abs());
    }
    for (&e, &r) in dm.grid.iter().zip(&dm.rho) {
        let mirror = dm.mde().density_at(-e).unwrap();
        worst = worst.max((r - mirror).abs());
    }
    assert!(worst < 1e-6, "asymmetry {worst}");
}

#[test]
fn stieltjes_transform_of_density_recovers_m() {
    for d in [vec![0.0; 2], bimodal(2), vec![-0.7, 0.1, 0.2, 1.4]] {
        let dm = build_density(&d).unwrap();
        for &z in &[c64::new(0.0, 1e-2), c64::new(0.8, 0.05), c64::new(-1.9, 1.0), c64::new(3.0, 1e-2)] {
            let m = solve_mde(&d, z).unwrap().m;
            assert!((dm.stieltjes(z) - m).norm() < 1e-4, "d={d:?} z={z}");
        }
    }
}

#[test]
fn semicircle_bulk_matches_analytic_inversion() {
    // sqrt(4 - e^2)/(2 pi) = 0.3  <=>  |e| = sqrt(4 - (0.6 pi)^2).
    let edge = (4.0 - (0.6 * std::f64::consts::PI).powi(2)).sqrt();
    let dm = build_density(&[0.0; 2]).unwrap();
    let bulk = bulk_region(&dm, 0.027).unwrap();
    assert_eq!(bulk.intervals.len(), 1);
    let (a, b) = bulk.intervals[0];
    assert!((a + edge).abs() < 1e-6 && (b - edge).abs() < 1e-6, "{a} {b} vs ±{edge}");
    for e in [a, b] {
        assert!((dm.mde().density_at(e).unwrap() - 0.3).abs() < 2.0 * dm.resolution().max(1e-9));
    }
}

#[test]
fn bimodal_bulk_matches_grid_scan() {
    let dm = build_density(&bimodal(2)).unwrap();
    for &kappa in &[1e-6, 1e-3, 0.01] {
        let tau = f64::cbrt(kappa);
        let bulk = bulk_region(&dm, kappa).unwrap();
        assert!((1..=2).contains(&bulk.intervals.len()));
        // Independent scan on a uniform grid with fresh solves.
        let step = 1e-3;
        let mut scanned = Vec::new();
        let mut open: Option<f64> = None;
        let mut e = -3.5;
        while e <= 3.5 {
            let inside = dm.mde().density_at(e).unwrap() >= tau;
            match (inside, open) {
                (true, None) => open = Some(e),
                (false, Some(a)) => {
                    scanned.push((a, e - step));
                    open = None;
                }
                _ => {}
            }
            e += step;
        }
        assert_eq!(scanned.len(), bulk.intervals.len(), "kappa={kappa}");
        for (s, b) in scanned.iter().zip(&bulk.intervals) {
            assert!((s.0 - b.0).abs() <= 2.0 * step && (s.1 - b.1).abs() <= 2.0 * step);
        }
        for w in bulk.intervals.windows(2) {
            assert!(w[0].1 < w[1].0);
        }
    }
}

#[test]
fn bimodal_quantiles_match_dense_inversion() {
    let d = bimodal(2);
    let dm = build_density(&d).unwrap();
    let n = 200;
    let q = quantiles(&dm, n).unwrap();
    for (i, g) in q.gamma.iter().enumerate() {
        assert!((dm.cumulative_at(*g) - QuantileTable::target(i, n)).abs() < 1e-8);
    }

    // Brute force: 10^6-point uniform grid, trapezoid cumulative, linear inversion.
    let mde = Mde::new(&d);
    let (lo, hi) = (-3.5, 3.5);
    let points = 1_000_000;
    let h = (hi - lo) / (points - 1) as f64;
    let mut rho = Vec::with_capacity(points);
    let mut guess = mde.solve(c64::new(lo, 1e-10)).unwrap().m;
    for k in 0..points {
        let s = mde.solve_near(c64::new(lo + k as f64 * h, 1e-10), guess).unwrap();
        guess = s.m;
        rho.push(s.m.im / std::f64::consts::PI);
    }
    let mut cum = vec![0.0; points];
    for k in 1..points {
        cum[k] = cum[k - 1] + 0.5 * (rho[k] + rho[k - 1]) * h;
    }
    let total = cum[points - 1];
    assert!((total - 1.0).abs() < 1e-6);
    let mut worst: f64 = 0.0;
    for (i, g) in q.gamma.iter().enumerate() {
        let target = QuantileTable::target(i, n);
        let k = cum.partition_point(|&c| c < target).max(1);
        let t = (target - cum[k - 1]) / (cum[k] - cum[k - 1]);
        let oracle = lo + (k - 1) as f64 * h + t * h;
        worst = worst.max((oracle - g).abs());
    }
    assert!(worst < 1e-6, "max quantile deviation {worst}");
}

#[test]
fn semicircle_quantiles_track_goe_eigenvalues() {
    let n = 1024;
    let q = quantiles(&build_density(&[0.0; 2]).unwrap(), n).unwrap();
    let lo = n / 20;
    let hi = n - n / 20;
    let mut mean_dev = 0.0;
    let samples = 20;
    for s in 0..samples {
        let w = sample_wigner(&EnsembleSpec::gaussian(n, Beta::Real, 100 + s)).unwrap();
        let lambda = eigvalsh(&w).unwrap();
        mean_dev += (lo..hi).map(|i| (q.gamma[i] - lambda[i]).abs()).fold(0.0, f64::max);
    }
    mean_dev /= samples as f64;
    assert!(mean_dev < 20.0 / n as f64, "{mean_dev}");
}

#[test]
fn conditioned_mde_follows_rescaled_semicircle() {
    let n = 512;
    let p = WeightVector::new(vec![1.0, 1.0]).unwrap();
    let norm = p.norm_sq().sqrt();
    let w2 = sample_wigner(&EnsembleSpec::gaussian(n, Beta::Real, 5)).unwrap();
    let eigs = eigvalsh(&w2).unwrap();
    for &e in &[-1.5, -0.4, 0.0, 0.9, 1.6] {
        let z = c64::new(e, 1e-3);
        let s = solve_mde_of_sum(&eigs, &p, z).unwrap();
        let dev = (s.m * norm - semicircle_stieltjes(z / norm)).norm();
        assert!(dev < 10.0 / n as f64, "e={e}: {dev}");
    }
}
