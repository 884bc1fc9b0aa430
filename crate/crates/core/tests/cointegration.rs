use nalgebra::DMatrix;
use proptest::prelude::*;
use spillover_core::johansen::{johansen_trace, pairwise_grid, trace_critical_values, JohansenDeterministic};
use spillover_core::panel::{Panel, VariableRole};
use spillover_core::report::{Significance, StarLevel};
use spillover_core::synth::NormalRng;

const DETS: [JohansenDeterministic; 3] = [
    JohansenDeterministic::None,
    JohansenDeterministic::RestrictedConstant,
    JohansenDeterministic::RestrictedTrend,
];

fn walks(seed: u64, t: usize, k: usize, tie: bool) -> DMatrix<f64> {
    let mut rng = NormalRng::new(seed);
    let mut m = DMatrix::zeros(t, k);
    for j in 0..k {
        let mut level = 0.0;
        for i in 0..t {
            level += rng.standard_normal();
            m[(i, j)] = level;
        }
    }
    if tie {
        for i in 0..t {
            m[(i, k - 1)] = 2.0 * m[(i, 0)] + rng.standard_normal();
        }
    }
    m
}

fn panel_of(data: &DMatrix<f64>) -> (Panel, Vec<VariableRole>) {
    let vars: Vec<VariableRole> = (0..data.ncols()).map(|j| VariableRole::Other(format!("v{j}"))).collect();
    let series = (0..data.ncols()).map(|j| data.column(j).iter().map(|&v| Some(v)).collect()).collect();
    (Panel::new(vec!["e".into()], vars.clone(), 2000, vec![series]).unwrap(), vars)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn trace_identities(seed in any::<u64>(), t in 40usize..160, k in 2usize..5, p in 1usize..3, d in 0usize..3, tie in any::<bool>()) {
        let r = johansen_trace(&walks(seed, t, k, tie), p, DETS[d], Significance::Five).unwrap();
        prop_assert_eq!(r.eigenvalues.len(), k);
        prop_assert!(r.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(r.eigenvalues.iter().all(|&l| (0.0..1.0).contains(&l)));
        prop_assert!(r.trace.windows(2).all(|w| w[0] > w[1]));
        for rank in 0..k {
            let want = r.recomputed_trace(rank);
            prop_assert!((r.trace[rank] - want).abs() <= 1e-9 * want.abs().max(1.0));
            let cv = trace_critical_values(DETS[d], k - rank).unwrap();
            prop_assert_eq!(r.verdicts[rank].unwrap().rejected(), r.trace[rank] > cv.at(Significance::Five));
        }
    }

    #[test]
    fn trace_ignores_rescaling(seed in any::<u64>(), t in 40usize..160, p in 1usize..3, d in 0usize..3, a in 0.01f64..100.0, b in 0.01f64..100.0) {
        let data = walks(seed, t, 2, true);
        let mut scaled = data.clone();
        scaled.column_mut(0).scale_mut(a);
        scaled.column_mut(1).scale_mut(b);
        let x = johansen_trace(&data, p, DETS[d], Significance::Five).unwrap();
        let y = johansen_trace(&scaled, p, DETS[d], Significance::Five).unwrap();
        for (u, v) in x.trace.iter().zip(&y.trace) {
            prop_assert!((u - v).abs() <= 1e-6 * u.abs().max(1.0), "{} vs {}", u, v);
        }
    }

    #[test]
    fn grid_stars_follow_critical_values(seed in any::<u64>(), t in 25usize..60, d in 0usize..3) {
        let (panel, vars) = panel_of(&walks(seed, t, 3, true));
        let grid = pairwise_grid(&panel, "e", &vars, None, 2, DETS[d]).unwrap();
        prop_assert_eq!(grid.cells.len(), 3);
        let cv = trace_critical_values(DETS[d], 2).unwrap();
        for cell in &grid.cells {
            let stat = cell.statistic.unwrap();
            prop_assert_eq!(cell.stars, cv.stars(stat));
            let text = cell.text();
            if cell.stars == StarLevel::None {
                prop_assert_eq!(text, "-");
            } else {
                prop_assert_eq!(text, format!("{stat:.2}{}", cell.stars.as_str()));
            }
        }
    }
}

#[test]
fn identical_pair_is_degenerate() {
    let base = walks(4, 40, 2, false);
    let data = DMatrix::from_fn(40, 3, |i, j| base[(i, j.min(1))]);
    let (panel, vars) = panel_of(&data);
    let grid = pairwise_grid(&panel, "e", &vars, Some(1), 2, JohansenDeterministic::RestrictedConstant).unwrap();
    let twin = grid.cell(2, 1).unwrap();
    assert!(twin.degenerate);
    assert_eq!(twin.text(), "-");
    assert!(!grid.cell(1, 0).unwrap().degenerate);
}
