use proptest::prelude::*;
use spillover_core::connectedness::gfevd;
use spillover_core::synth::{simulate, true_gfevd, Manifest, ProcessKind, ProcessSpec, GENERATOR};
use spillover_core::var::{fit_var, Deterministic, VarForm};

fn var_kind(a: [[f64; 2]; 2]) -> ProcessKind {
    ProcessKind::Var {
        lags: vec![a.iter().map(|r| r.to_vec()).collect()],
        intercept: vec![0.0, 0.0],
        sigma: vec![vec![1.0, 0.4], vec![0.4, 2.0]],
    }
}

const A: [[f64; 2]; 2] = [[0.5, 0.2], [-0.1, 0.4]];

fn kinds() -> Vec<ProcessKind> {
    vec![
        ProcessKind::WhiteNoise { k: 2, sd: 1.5 },
        ProcessKind::Ar { phi: vec![0.5, 0.2], intercept: 1.0, sd: 1.0 },
        var_kind(A),
        ProcessKind::RandomWalk { k: 2, sd: 1.0, drift: 0.1 },
        ProcessKind::CointegratedPair { beta: 2.0, walk_sd: 1.0, noise_sd: 0.5, noise_ar: 0.3 },
        ProcessKind::TimeVaryingSlopePanel { entities: 2, intercept: 0.0, slope_start: 1.0, slope_end: -1.0, noise_sd: 1.0 },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn simulation_is_a_function_of_spec_and_seed(which in 0usize..6, seed in any::<u64>(), t in 5usize..80) {
        let spec = ProcessSpec::new(kinds()[which].clone(), t, seed);
        let a = simulate(&spec).unwrap();
        let b = simulate(&spec).unwrap();
        prop_assert_eq!(&a.panel, &b.panel);
        prop_assert_eq!(&a.manifest, &b.manifest);
        prop_assert_eq!(a.manifest.generator.as_str(), GENERATOR);
        let other = simulate(&ProcessSpec::new(kinds()[which].clone(), t, seed.wrapping_add(1))).unwrap();
        prop_assert_ne!(&a.panel, &other.panel);
    }
}

#[test]
fn stable_kinds_report_radius_below_one() {
    for kind in kinds().into_iter().take(3) {
        let sim = simulate(&ProcessSpec::new(kind, 50, 1)).unwrap();
        let rho = sim.manifest.spectral_radius.unwrap();
        assert!(rho < 1.0, "{rho}");
    }
}

#[test]
fn zero_var_is_white_noise() {
    let t = 2000;
    let sim = simulate(&ProcessSpec::new(var_kind([[0.0; 2]; 2]), t, 3)).unwrap();
    let data = sim.panel.slice("sim", sim.panel.variables()).unwrap();
    for j in 0..2 {
        let x = data.column(j);
        let mean = x.mean();
        let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let c1: f64 = (1..t).map(|i| (x[i] - mean) * (x[i - 1] - mean)).sum();
        assert!((c1 / c0).abs() < 3.0 / (t as f64).sqrt(), "column {j}: {}", c1 / c0);
    }
}

#[test]
fn manifest_gfevd_is_the_analytic_one() {
    let spec = ProcessSpec::new(var_kind(A), 50, 4);
    let sim = simulate(&spec).unwrap();
    let recorded = sim.manifest.true_gfevd.clone().unwrap();
    let direct = gfevd(&spec.dynamics().unwrap(), spec.horizon).unwrap();
    for (r, d) in recorded.shares.iter().zip(&direct.shares) {
        for (a, b) in r.iter().zip(d) {
            assert!((a - b).abs() <= 1e-10);
        }
    }
    let other_seed = true_gfevd(&ProcessSpec::new(var_kind(A), 50, 999), spec.horizon).unwrap();
    assert_eq!(other_seed.shares, recorded.shares);
    let json = serde_json::to_string(&sim.manifest).unwrap();
    let back: Manifest = serde_json::from_str(&json).unwrap();
    assert_eq!(back, sim.manifest);
}

#[test]
fn var_estimates_converge_with_sample_size() {
    let median_error = |t: usize| {
        let mut errs: Vec<f64> = (0..50)
            .map(|s| {
                let sim = simulate(&ProcessSpec::new(var_kind(A), t, 7_000 + s)).unwrap();
                let data = sim.panel.slice("sim", sim.panel.variables()).unwrap();
                let fit = fit_var(&data, 1, VarForm::Levels, Deterministic::Const).unwrap();
                (0..2)
                    .flat_map(|i| (0..2).map(move |j| (i, j)))
                    .map(|(i, j)| (fit.lags[0][(i, j)] - A[i][j]).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        (errs[24] + errs[25]) / 2.0
    };
    let e: Vec<f64> = [100, 400, 1600].iter().map(|&t| median_error(t)).collect();
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
}
