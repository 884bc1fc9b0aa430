use nalgebra::DMatrix;
use proptest::prelude::*;
use spillover_core::connectedness::{
    connectedness_report, fit_qvar_at, gfevd, quantile_sweep, qvar_connectedness, rolling_connectedness,
    structural_quantile_irf, validate_theta_grid, GfevdTable,
};
use spillover_core::linalg::spectral_radius;
use spillover_core::regression::quantile_fit;
use spillover_core::synth::{simulate, NormalRng, ProcessKind, ProcessSpec};
use spillover_core::var::{fit_var, irf, ma_coefficients, structural_responses, Deterministic, IrfKind, VarDynamics, VarForm};

fn names(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("y{i}")).collect()
}

fn stable(k: usize, seed: u64) -> VarDynamics {
    let mut rng = NormalRng::new(seed);
    let a = DMatrix::from_fn(k, k, |_, _| 0.4 * rng.standard_normal());
    let rho = spectral_radius(&a);
    let a = if rho >= 0.9 { a * (0.9 / rho) } else { a };
    let m = DMatrix::from_fn(k, k, |_, _| rng.standard_normal());
    VarDynamics { lags: vec![a], sigma: &m * m.transpose() + DMatrix::identity(k, k) * 0.1 }
}

const TRUE_A: [[f64; 3]; 3] = [[0.5, 0.2, 0.0], [0.1, 0.4, 0.2], [0.2, 0.0, 0.3]];

fn gaussian_var(t: usize, seed: u64) -> DMatrix<f64> {
    let spec = ProcessSpec::new(
        ProcessKind::Var {
            lags: vec![TRUE_A.iter().map(|r| r.to_vec()).collect()],
            intercept: vec![0.0; 3],
            sigma: vec![vec![1.0, 0.3, 0.2], vec![0.3, 1.0, 0.3], vec![0.2, 0.3, 1.0]],
        },
        t,
        seed,
    );
    let sim = simulate(&spec).unwrap();
    sim.panel.slice("sim", sim.panel.variables()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn shares_are_nonnegative_rows_of_100(k in 1usize..7, seed in any::<u64>(), h in 1usize..15) {
        let t = gfevd(&stable(k, seed), h).unwrap();
        for row in &t.shares {
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 100.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn shares_follow_variable_permutations(k in 2usize..6, seed in any::<u64>(), shuffle in any::<u64>()) {
        let d = stable(k, seed);
        let mut perm: Vec<usize> = (0..k).collect();
        let mut rng = NormalRng::new(shuffle);
        for i in (1..k).rev() {
            let j = (rng.uniform() * (i + 1) as f64) as usize;
            perm.swap(i, j.min(i));
        }
        let p = DMatrix::from_fn(k, k, |i, j| if perm[i] == j { 1.0 } else { 0.0 });
        let permuted = VarDynamics {
            lags: d.lags.iter().map(|a| &p * a * p.transpose()).collect(),
            sigma: &p * &d.sigma * p.transpose(),
        };
        let a = gfevd(&d, 10).unwrap();
        let b = gfevd(&permuted, 10).unwrap();
        for i in 0..k {
            for j in 0..k {
                prop_assert!((b.shares[i][j] - a.shares[perm[i]][perm[j]]).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn unit_lower_triangular_impact(k in 1usize..6, seed in any::<u64>()) {
        let mut rng = NormalRng::new(seed);
        let a0 = DMatrix::from_fn(k, k, |i, j| if i > j { rng.standard_normal() } else { 0.0 });
        let impact = structural_responses(&[], &a0, 0).unwrap().remove(0);
        let check = (DMatrix::identity(k, k) - &a0) * &impact;
        prop_assert!((check - DMatrix::identity(k, k)).amax() <= 1e-10);
        for i in 0..k {
            prop_assert!((impact[(i, i)] - 1.0).abs() <= 1e-12);
            for j in i + 1..k {
                prop_assert!(impact[(i, j)].abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn identity_shares_have_no_connectedness() {
    let shares = (0..4).map(|i| (0..4).map(|j| if i == j { 100.0 } else { 0.0 }).collect()).collect();
    let r = connectedness_report(&GfevdTable { shares, horizon: 10, explosive: false }, &names(4)).unwrap();
    assert_eq!(r.tci, 0.0);
    assert!(r.net.iter().all(|&v| v == 0.0));
    assert!(r.npdc_degree.iter().all(|&d| d == 0));
}

#[test]
fn unordered_theta_grid_is_rejected() {
    assert!(validate_theta_grid(&[0.5, 0.25]).is_err());
    assert!(validate_theta_grid(&[0.0, 0.5]).is_err());
    assert!(validate_theta_grid(&[0.25, 0.5]).is_ok());
}

#[test]
fn scalar_qvar_is_quantile_autoregression() {
    let mut rng = NormalRng::new(12);
    let y = DMatrix::from_fn(500, 1, |_, _| rng.standard_normal());
    let entry = fit_qvar_at(&y, 1, 0.5, false, None).unwrap();
    let x = DMatrix::from_fn(499, 1, |i, _| y[(i, 0)]);
    let target: Vec<f64> = (1..500).map(|i| y[(i, 0)]).collect();
    let q = quantile_fit(&x, &target, 0.5).unwrap();
    assert!((entry.intercept[0] - q.coefficients[0]).abs() < 1e-12);
    assert!((entry.lags[0][(0, 0)] - q.coefficients[1]).abs() < 1e-12);
    assert!(entry.intercept[0].abs() < 3.0 * 1.2533 / 500f64.sqrt(), "{}", entry.intercept[0]);
}

#[test]
fn median_qvar_recovers_mean_var() {
    let data = gaussian_var(500, 21);
    let q = fit_qvar_at(&data, 1, 0.5, false, None).unwrap();
    let ols = fit_var(&data, 1, VarForm::Levels, Deterministic::Const).unwrap();
    for eq in 0..3 {
        for j in 0..3 {
            // asymptotic median-regression SE under Gaussian noise is sqrt(pi/2) times the OLS one
            let se = (std::f64::consts::PI / 2.0).sqrt() * ols.std_errors[(1 + j, eq)];
            let err = (q.lags[0][(eq, j)] - TRUE_A[eq][j]).abs();
            assert!(err <= 3.0 * se, "A[{eq},{j}] off by {err}, se {se}");
        }
    }
}

#[test]
fn neighbouring_quantiles_have_close_tci() {
    let data = gaussian_var(500, 22);
    let sweep = quantile_sweep(&data, &names(3), 1, 10, &[0.45, 0.55]).unwrap();
    assert!(sweep.failures.is_empty());
    let gap = (sweep.rows[0].tci - sweep.rows[1].tci).abs();
    assert!(gap < 5.0, "gap {gap}");
}

#[test]
fn single_point_sweep_is_a_report() {
    let data = gaussian_var(120, 23);
    let sweep = quantile_sweep(&data, &names(3), 1, 10, &[0.25]).unwrap();
    let report = qvar_connectedness(&data, &names(3), 1, 10, 0.25).unwrap();
    let row = &sweep.rows[0];
    assert_eq!(row.from_others, report.from_others);
    assert_eq!(row.to_others, report.to_others);
    assert_eq!(row.tci, report.tci);
}

#[test]
fn structural_with_zero_a0_is_plain_recursion() {
    let d = stable(3, 5);
    let zero = DMatrix::zeros(3, 3);
    let psi = ma_coefficients(&d.lags, 3, 8);
    let structural = structural_responses(&d.lags, &zero, 8).unwrap();
    let diagonal = VarDynamics { lags: d.lags.clone(), sigma: DMatrix::from_diagonal_element(3, 3, 2.0) };
    let recursive = irf(&diagonal, 8, IrfKind::RecursiveStructural).unwrap();
    for h in 0..=8 {
        assert!((&structural[h] - &psi[h]).amax() <= 1e-12);
        assert!((&recursive.responses[h] - &psi[h]).amax() <= 1e-12);
    }
}

#[test]
fn structural_qvar_entry() {
    let data = gaussian_var(200, 24);
    let entry = fit_qvar_at(&data, 1, 0.5, true, Some(&[2, 0, 1])).unwrap();
    let a0 = entry.contemporaneous.clone().unwrap();
    for i in 0..3 {
        for j in i..3 {
            assert_eq!(a0[(i, j)], 0.0);
        }
    }
    let responses = structural_quantile_irf(&entry, 5).unwrap();
    let b = (DMatrix::identity(3, 3) - &a0).try_inverse().unwrap();
    assert!((&responses[0] - &b).amax() < 1e-12);
    assert!(fit_qvar_at(&data, 1, 0.5, true, None).is_err());
}

#[test]
fn rolling_reports_cover_every_window() {
    let data = gaussian_var(40, 25);
    let windows = rolling_connectedness(&data, &names(3), 1, 10, 0.5, 30).unwrap();
    assert_eq!(windows.len(), 11);
    assert!(windows.iter().all(|w| w.report.is_some()));
    assert!(rolling_connectedness(&data, &names(3), 1, 10, 0.5, 41).is_err());
}
