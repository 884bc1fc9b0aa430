use spillover_core::fixture::{
    parse_connectedness_table, parse_sweep_table, validate_connectedness, validate_fixture_text, validate_sweep,
    TableKind, Tolerances,
};
use spillover_core::connectedness::sample_stdev;
use std::path::Path;

fn read(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)).unwrap()
}

const CONNECTEDNESS: [&str; 6] = [
    "table5_iep_q010.csv",
    "table6_iep_q025.csv",
    "table7_iep_q050.csv",
    "table8_fdi_q010.csv",
    "table9_fdi_q025.csv",
    "table10_fdi_q050.csv",
];
const SWEEPS: [&str; 4] = ["tableA2_iep_from.csv", "tableA3_iep_to.csv", "tableA4_fdi_from.csv", "tableA5_fdi_to.csv"];

#[test]
fn published_tables_are_internally_consistent() {
    for name in CONNECTEDNESS {
        let r = validate_fixture_text(&read(name), TableKind::Connectedness, &Tolerances::default()).unwrap();
        assert!(r.passed, "{name}: {:?}", r.failing_rows);
    }
    for name in SWEEPS {
        let r = validate_fixture_text(&read(name), TableKind::Sweep, &Tolerances::default()).unwrap();
        assert!(r.passed, "{name}: {:?}", r.failing_rows);
    }
}

#[test]
fn china_row_of_lowest_quantile_iep_table() {
    let t = parse_connectedness_table(&read("table5_iep_q010.csv")).unwrap();
    assert_eq!(t.names[0], "China");
    let row_sum: f64 = t.shares[0].iter().sum();
    assert!((row_sum - 100.0).abs() <= 0.05, "{row_sum}");
    assert!((t.shares[0][0] + t.from[0] - 100.0).abs() < 1e-9);
    assert!((t.to[0] - t.from[0] - t.net[0]).abs() < 1e-9);
    assert!((t.inc_own[0] - 100.0 - t.net[0]).abs() < 1e-9);
    assert_eq!(t.npdc_degree[0], 6);
    let r = validate_connectedness(&t, &Tolerances::default());
    assert!(r.find("NPDC-degree", "China").map_or(true, |c| c.pass));
}

#[test]
fn philippines_from_residual_is_logged() {
    let t = parse_connectedness_table(&read("table7_iep_q050.csv")).unwrap();
    let r = validate_connectedness(&t, &Tolerances::default());
    let c = r.find("FROM=row-sum", "The Philippines").unwrap();
    assert_eq!(c.printed, 90.89);
    assert!((c.derived - 90.87).abs() < 1e-9);
    assert!((c.residual.abs() - 0.02).abs() < 1e-9);
    assert!(c.pass);
    let own = r.find("own+FROM", "The Philippines").unwrap();
    assert!(own.residual.abs() < 1e-9);
}

#[test]
fn corrupted_cell_is_localized() {
    let text = read("table6_iep_q025.csv");
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut cells: Vec<String> = lines[3].split(',').map(str::to_string).collect();
    let row_name = cells[0].clone();
    let v: f64 = cells[2].parse().unwrap();
    cells[2] = format!("{:.2}", v + 1.0);
    lines[3] = cells.join(",");
    let r = validate_fixture_text(&lines.join("\n"), TableKind::Connectedness, &Tolerances::default()).unwrap();
    assert!(!r.passed);
    assert_eq!(r.failing_rows.first(), Some(&row_name));
    assert!(!r.find("FROM=row-sum", &row_name).unwrap().pass);
}

#[test]
fn lowest_sweep_row_arithmetic() {
    let t = parse_sweep_table(&read("tableA2_iep_from.csv")).unwrap();
    let row = &t.rows[0];
    assert_eq!((row.theta, row.total, row.stdev), (0.05, 607.93, 6.13));
    assert!((sample_stdev(&row.values) - 6.13).abs() <= 0.02);
    assert!((row.values.iter().sum::<f64>() - 607.93).abs() <= 0.05);
    assert!(validate_sweep(&t, &Tolerances::default()).passed);
}

#[test]
fn wrong_layout_is_rejected() {
    let err = validate_fixture_text(&read("tableA2_iep_from.csv"), TableKind::Connectedness, &Tolerances::default());
    assert!(err.is_err());
    assert!(validate_fixture_text("quantile,a\n0.5,x\n", TableKind::Sweep, &Tolerances::default()).is_err());
}
