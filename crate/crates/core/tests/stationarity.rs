use proptest::prelude::*;
use spillover_core::report::{RegressionForm, Significance, TestReport};
use spillover_core::stationarity::{adf_test, kpss_test, AdfLag, Bandwidth, StationaritySettings};
use spillover_core::synth::{simulate, NormalRng, ProcessKind, ProcessSpec};

fn draw(kind: ProcessKind, t: usize, seed: u64) -> Vec<f64> {
    let sim = simulate(&ProcessSpec::new(kind, t, seed)).unwrap();
    sim.panel.slice("sim", sim.panel.variables()).unwrap().column(0).iter().copied().collect()
}

fn walk() -> ProcessKind {
    ProcessKind::RandomWalk { k: 1, sd: 1.0, drift: 0.0 }
}

fn share(seeds: std::ops::Range<u64>, f: impl Fn(u64) -> bool) -> f64 {
    let n = seeds.end - seeds.start;
    seeds.filter(|&s| f(s)).count() as f64 / n as f64
}

fn adf(x: &[f64], level: Significance) -> TestReport {
    adf_test(x, AdfLag::schwert(x.len()), RegressionForm::Constant, level).unwrap()
}

fn kpss(x: &[f64]) -> TestReport {
    let bw = StationaritySettings::default().bandwidth;
    kpss_test(x, RegressionForm::Constant, bw, Significance::Five).unwrap()
}

#[test]
fn adf_keeps_unit_root_of_random_walks() {
    let rate = share(100..300, |s| !adf(&draw(walk(), 200, s), Significance::Ten).verdict.rejected());
    assert!(rate >= 0.85, "fail-to-reject rate {rate}");
}

#[test]
fn adf_rejects_stationary_ar() {
    let ar = || ProcessKind::Ar { phi: vec![0.5], intercept: 0.0, sd: 1.0 };
    let rate = share(300..500, |s| adf(&draw(ar(), 200, s), Significance::Five).verdict.rejected());
    assert!(rate >= 0.85, "rejection rate {rate}");
}

#[test]
fn kpss_size_and_power() {
    let noise = || ProcessKind::WhiteNoise { k: 1, sd: 1.0 };
    let keep = share(500..700, |s| !kpss(&draw(noise(), 500, s)).verdict.rejected());
    let reject = share(700..900, |s| kpss(&draw(walk(), 500, s)).verdict.rejected());
    assert!(keep >= 0.85, "white noise kept {keep}");
    assert!(reject >= 0.85, "random walk rejected {reject}");
}

fn series(seed: u64, n: usize, walk: bool) -> Vec<f64> {
    let mut rng = NormalRng::new(seed);
    let mut level = 0.0;
    (0..n)
        .map(|_| {
            let e = rng.standard_normal();
            if walk {
                level += e;
                level
            } else {
                e
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn kpss_ignores_constant_shift(seed in any::<u64>(), n in 20usize..200, shift in -1e3f64..1e3, w in any::<bool>()) {
        let x = series(seed, n, w);
        let y: Vec<f64> = x.iter().map(|v| v + shift).collect();
        for bw in [Bandwidth::Short, Bandwidth::Auto, Bandwidth::Fixed(3)] {
            let a = kpss_test(&x, RegressionForm::Constant, bw, Significance::Five).unwrap().statistic;
            let b = kpss_test(&y, RegressionForm::Constant, bw, Significance::Five).unwrap().statistic;
            prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{} vs {}", a, b);
        }
    }

    #[test]
    fn adf_ignores_positive_scaling(seed in any::<u64>(), n in 30usize..200, scale in 1e-3f64..1e3, w in any::<bool>()) {
        let x = series(seed, n, w);
        let y: Vec<f64> = x.iter().map(|v| v * scale).collect();
        for form in [RegressionForm::Constant, RegressionForm::ConstantTrend] {
            let a = adf_test(&x, AdfLag::Fixed(2), form, Significance::Five).unwrap().statistic;
            let b = adf_test(&y, AdfLag::Fixed(2), form, Significance::Five).unwrap().statistic;
            prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{} vs {}", a, b);
        }
    }

    #[test]
    fn verdicts_follow_critical_values(seed in any::<u64>(), n in 30usize..150, w in any::<bool>(), lvl in 0usize..3) {
        let level = [Significance::One, Significance::Five, Significance::Ten][lvl];
        let x = series(seed, n, w);
        let a = adf_test(&x, AdfLag::schwert(n), RegressionForm::Constant, level).unwrap();
        let k = kpss_test(&x, RegressionForm::Constant, Bandwidth::Auto, level).unwrap();
        prop_assert_eq!(a.verdict.rejected(), a.statistic <= a.critical_value(level).unwrap());
        prop_assert_eq!(k.verdict.rejected(), k.statistic > k.critical_value(level).unwrap());
        // ADF values fall (more negative) and KPSS values rise as the level tightens
        let av: Vec<f64> = a.critical_values.iter().map(|c| c.value).collect();
        let kv: Vec<f64> = k.critical_values.iter().map(|c| c.value).collect();
        prop_assert!(av.windows(2).all(|w| w[1] < w[0]));
        prop_assert!(kv.windows(2).all(|w| w[1] > w[0]));
    }
}
