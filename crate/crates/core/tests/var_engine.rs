use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use spillover_core::linalg::spectral_radius;
use spillover_core::panel::{load_csv, CsvSchema, VariableRole};
use spillover_core::regression::ols_fit;
use spillover_core::report::Significance;
use spillover_core::synth::{simulate, NormalRng, ProcessKind, ProcessSpec};
use spillover_core::var::{
    fit_var, granger_test, irf, jarque_bera, jarque_bera_multi, model_rms, rms, select_lag, Deterministic, IrfKind,
    LagRule, VarDynamics, VarForm,
};
use std::path::Path;

fn simulated(lags: Vec<Vec<Vec<f64>>>, sigma: Vec<Vec<f64>>, t: usize, seed: u64) -> DMatrix<f64> {
    let k = sigma.len();
    let spec = ProcessSpec::new(ProcessKind::Var { lags, intercept: vec![0.0; k], sigma }, t, seed);
    let sim = simulate(&spec).unwrap();
    sim.panel.slice("sim", sim.panel.variables()).unwrap()
}

fn noise(k: usize, t: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = NormalRng::new(seed);
    DMatrix::from_fn(t, k, |_, _| rng.standard_normal())
}

fn stable(k: usize, seed: u64, cap: f64) -> VarDynamics {
    let mut rng = NormalRng::new(seed);
    let a = DMatrix::from_fn(k, k, |_, _| 0.4 * rng.standard_normal());
    let rho = spectral_radius(&a);
    let a = if rho >= cap { a * (cap / rho) } else { a };
    let m = DMatrix::from_fn(k, k, |_, _| rng.standard_normal());
    VarDynamics { lags: vec![a], sigma: &m * m.transpose() + DMatrix::identity(k, k) * 0.1 }
}

#[test]
fn var1_coefficients_within_three_standard_errors() {
    let truth = [[0.5, 0.2], [-0.1, 0.4]];
    let lags = vec![truth.iter().map(|r| r.to_vec()).collect()];
    let data = simulated(lags, vec![vec![1.0, 0.3], vec![0.3, 1.0]], 500, 8);
    let fit = fit_var(&data, 1, VarForm::Levels, Deterministic::Const).unwrap();
    let d = Deterministic::Const.count();
    for eq in 0..2 {
        for j in 0..2 {
            let err = (fit.lags[0][(eq, j)] - truth[eq][j]).abs();
            let se = fit.std_errors[(d + j, eq)];
            assert!(err <= 3.0 * se, "A[{eq},{j}] off by {err} with se {se}");
        }
    }
}

#[test]
fn scalar_var_is_ar_ols() {
    let data = simulated(vec![vec![vec![0.6]]], vec![vec![1.0]], 80, 2);
    let fit = fit_var(&data, 1, VarForm::Levels, Deterministic::Const).unwrap();
    let x = DMatrix::from_fn(79, 1, |i, _| data[(i, 0)]);
    let y: Vec<f64> = (1..80).map(|i| data[(i, 0)]).collect();
    let ols = ols_fit(&x, &y).unwrap();
    assert!((fit.intercept[0] - ols.coefficients[0]).abs() < 1e-12);
    assert!((fit.lags[0][(0, 0)] - ols.coefficients[1]).abs() < 1e-12);
}

#[test]
fn five_variable_system_on_sample() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample_panel.csv");
    let panel = load_csv(path, &CsvSchema::offshoring_default()).unwrap();
    let logged = panel.log_transform(&VariableRole::SYSTEM).unwrap();
    let data = logged.slice("China", &VariableRole::SYSTEM).unwrap();
    let fit = fit_var(&data, 1, VarForm::Differences, Deterministic::Const).unwrap();
    assert_eq!(fit.k(), 5);
    assert_eq!(fit.lags[0].shape(), (5, 5));
    assert_eq!(fit.companion.shape(), (5, 5));
    assert_eq!(fit.sample_len, 20);
}

#[test]
fn white_noise_selects_one_lag() {
    let hits = (0..100).filter(|&s| select_lag(&noise(2, 300, 1000 + s), 4, Deterministic::Const).unwrap().chosen == 1).count();
    assert!(hits >= 80, "{hits}/100");
}

#[test]
fn strong_var2_selects_two_lags() {
    let lags = vec![
        vec![vec![0.3, 0.0], vec![0.0, 0.3]],
        vec![vec![0.5, 0.1], vec![0.0, 0.5]],
    ];
    let sigma = vec![vec![1.0, 0.2], vec![0.2, 1.0]];
    let hits = (0..100)
        .filter(|&s| select_lag(&simulated(lags.clone(), sigma.clone(), 300, 2000 + s), 4, Deterministic::Const).unwrap().chosen == 2)
        .count();
    assert!(hits >= 80, "{hits}/100");
}

#[test]
fn lag_rule_reflects_agreement() {
    let mut unanimous = 0;
    for s in 0..50 {
        let sel = select_lag(&noise(2, 200, 3000 + s), 3, Deterministic::Const).unwrap();
        let agree = [sel.aic_choice, sel.hq_choice, sel.fpe_choice].iter().all(|&c| c == sel.sc_choice);
        assert_eq!(sel.rule == LagRule::Unanimous, agree);
        assert_eq!(sel.chosen, sel.sc_choice);
        unanimous += agree as usize;
    }
    assert!(unanimous > 0);
}

#[test]
fn schwarz_penalty_grows_on_white_noise() {
    for lag in 0..3 {
        let rises = (0..100)
            .filter(|&s| {
                let c = select_lag(&noise(2, 200, 4000 + s), 4, Deterministic::Const).unwrap().criteria;
                c[lag + 1].sc > c[lag].sc
            })
            .count();
        assert!(rises > 50, "lag {}: {rises}/100", lag + 1);
    }
}

#[test]
fn lagged_driver_granger_causes() {
    let mut rng = NormalRng::new(5);
    let t = 200;
    let x: Vec<f64> = (0..t).map(|_| rng.standard_normal()).collect();
    let mut data = DMatrix::zeros(t, 2);
    for i in 0..t {
        data[(i, 1)] = x[i];
        data[(i, 0)] = if i > 0 { 0.6 * x[i - 1] } else { 0.0 } + rng.standard_normal();
    }
    let r = granger_test(&data, 1, 0, 1, Deterministic::Const, Significance::One).unwrap();
    assert!(r.verdict.rejected(), "p {}", r.p_value.best());
}

#[test]
fn jarque_bera_normal_and_exponential() {
    let mut rng = NormalRng::new(6);
    let normal: Vec<f64> = (0..100_000).map(|_| rng.standard_normal()).collect();
    assert!(!jarque_bera(&normal, Significance::Five).unwrap().verdict.rejected());
    let expo: Vec<f64> = (0..1000).map(|_| -(1.0 - rng.uniform()).ln()).collect();
    assert!(jarque_bera(&expo, Significance::One).unwrap().verdict.rejected());
    let m = DMatrix::from_fn(500, 3, |_, _| rng.standard_normal());
    let multi = jarque_bera_multi(&m, Significance::Five).unwrap();
    let total: f64 = multi.per_series.iter().map(|r| r.statistic).sum();
    assert_eq!(multi.per_series.len(), 3);
    assert!((multi.combined.statistic - total).abs() < 1e-12);
}

#[test]
fn rms_oracles() {
    let obs = [1.0, 2.0, 3.0];
    assert_eq!(rms(&obs, &obs, 4, 1).unwrap().rms, 0.0);
    assert!(rms(&obs, &obs, 3, 3).is_err());
    let data = noise(3, 60, 7);
    let fit = fit_var(&data, 2, VarForm::Levels, Deterministic::Const).unwrap();
    for (eq, r) in model_rms(&fit).unwrap().iter().enumerate() {
        let ss: f64 = fit.residuals.column(eq).iter().map(|u| u * u).sum();
        let want = (ss / (60 - 2) as f64).sqrt();
        assert!((r.rms - want).abs() < 1e-12);
    }
}

#[test]
fn generalized_irf_matches_shock_propagation() {
    let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.1, 0.4]);
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
    let dynamics = VarDynamics { lags: vec![a.clone()], sigma: sigma.clone() };
    let out = irf(&dynamics, 12, IrfKind::Generalized).unwrap();
    for j in 0..2 {
        let mut y: DVector<f64> = sigma.column(j) / sigma[(j, j)].sqrt();
        for h in 0..=12 {
            for i in 0..2 {
                assert!((out.responses[h][(i, j)] - y[i]).abs() < 1e-10);
            }
            y = &a * y;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn fitted_var_invariants(seed in any::<u64>(), k in 1usize..4, p in 1usize..4, trend in any::<bool>()) {
        let det = if trend { Deterministic::ConstTrend } else { Deterministic::Const };
        let t = 40 + 5 * k * p;
        let data = noise(k, t, seed);
        let fit = fit_var(&data, p, VarForm::Levels, det).unwrap();
        let s = &fit.sigma;
        prop_assert!((s - s.transpose()).amax() <= 1e-10);
        prop_assert!(s.clone().symmetric_eigenvalues().iter().all(|&e| e >= -1e-10));
        for l in 0..p {
            prop_assert_eq!(fit.companion.view((0, l * k), (k, k)).into_owned(), fit.lags[l].clone());
        }
        for r in k..k * p {
            for c in 0..k * p {
                prop_assert_eq!(fit.companion[(r, c)], if c + k == r { 1.0 } else { 0.0 });
            }
        }
        // residuals orthogonal to every regressor
        let n = t - p;
        let scale = data.amax().max(1.0) * n as f64;
        for eq in 0..k {
            let u = fit.residuals.column(eq);
            prop_assert!(u.sum().abs() <= 1e-8 * scale);
            if trend {
                let tr: f64 = (0..n).map(|i| u[i] * (i + p + 1) as f64).sum();
                prop_assert!(tr.abs() <= 1e-8 * scale * t as f64);
            }
            for l in 1..=p {
                for j in 0..k {
                    let dot: f64 = (0..n).map(|i| u[i] * data[(i + p - l, j)]).sum();
                    prop_assert!(dot.abs() <= 1e-8 * scale);
                }
            }
        }
    }

    #[test]
    fn zero_dynamics_vanish_after_impact(k in 1usize..5, p in 1usize..4, h in 1usize..8) {
        let d = VarDynamics { lags: vec![DMatrix::zeros(k, k); p], sigma: DMatrix::identity(k, k) };
        for kind in [IrfKind::Generalized, IrfKind::RecursiveStructural] {
            let out = irf(&d, h, kind).unwrap();
            prop_assert_eq!(out.responses[0].clone(), DMatrix::identity(k, k));
            prop_assert!(out.responses[1..].iter().all(|m| m.amax() == 0.0));
        }
    }

    #[test]
    fn stable_responses_decay(seed in any::<u64>(), k in 1usize..5) {
        let d = stable(k, seed, 0.8);
        let rho = spectral_radius(&d.companion());
        let out = irf(&d, 100, IrfKind::Generalized).unwrap();
        prop_assert!(!out.explosive);
        let last = out.responses[100].norm();
        prop_assert!(last < out.responses[0].norm());
        prop_assert!(last.powf(1.0 / 100.0) <= rho + 0.05, "rate {} vs rho {}", last.powf(0.01), rho);
    }
}
