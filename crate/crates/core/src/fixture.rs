//! Arithmetic consistency checks for published connectedness tables.
//!
//! Two layouts are understood. A connectedness table has a `label` column,
//! one column per entity and a trailing `FROM` column; entity rows are
//! followed by `TO` (grand total in the last column), `INC_OWN`, `NET` and
//! `NPDC`. A sweep table has `quantile`, one column per entity, `Total`
//! and `STDEV`.

use crate::connectedness::sample_stdev;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Read;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    Connectedness,
    Sweep,
}

impl FromStr for TableKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "connectedness" => Ok(TableKind::Connectedness),
            "sweep" => Ok(TableKind::Sweep),
            other => Err(Error::InvalidArgument(format!(
                "unknown table kind `{other}` (expected connectedness or sweep)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectednessTable {
    pub names: Vec<String>,
    pub shares: Vec<Vec<f64>>,
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub grand_total: f64,
    pub inc_own: Vec<f64>,
    pub net: Vec<f64>,
    pub npdc_degree: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTableRow {
    pub theta: f64,
    pub values: Vec<f64>,
    pub total: f64,
    pub stdev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub names: Vec<String>,
    pub rows: Vec<SweepTableRow>,
}

fn records(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let header = reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(|s| s.trim().to_string()).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok((header, rows))
}

fn number(cell: Option<&String>, what: &str) -> Result<f64> {
    cell.and_then(|c| c.parse::<f64>().ok())
        .ok_or_else(|| Error::SchemaMismatch(format!("{what}: expected a number, found {:?}", cell.map(String::as_str).unwrap_or(""))))
}

pub fn parse_connectedness_table(text: &str) -> Result<ConnectednessTable> {
    let (header, rows) = records(text)?;
    if header.len() < 4 || header[0] != "label" || header.last().map(String::as_str) != Some("FROM") {
        return Err(Error::SchemaMismatch(
            "connectedness table header must be `label,<entities…>,FROM`".into(),
        ));
    }
    let names: Vec<String> = header[1..header.len() - 1].to_vec();
    let k = names.len();
    if rows.len() != k + 4 {
        return Err(Error::SchemaMismatch(format!(
            "expected {} entity rows plus TO, INC_OWN, NET, NPDC; found {} rows",
            k,
            rows.len()
        )));
    }
    for (r, label) in rows[k..].iter().zip(["TO", "INC_OWN", "NET", "NPDC"]) {
        if r.first().map(String::as_str) != Some(label) {
            return Err(Error::SchemaMismatch(format!("expected a `{label}` row, found {:?}", r.first())));
        }
    }
    let mut shares = Vec::with_capacity(k);
    let mut from = Vec::with_capacity(k);
    for (i, r) in rows[..k].iter().enumerate() {
        if r[0] != names[i] {
            return Err(Error::SchemaMismatch(format!("row {} is `{}`, expected `{}`", i + 1, r[0], names[i])));
        }
        shares.push(
            (1..=k)
                .map(|c| number(r.get(c), &format!("{}/{}", names[i], names[c - 1])))
                .collect::<Result<Vec<_>>>()?,
        );
        from.push(number(r.get(k + 1), &format!("{}/FROM", names[i]))?);
    }
    let summary = |row: &Vec<String>, label: &str| -> Result<Vec<f64>> {
        (1..=k).map(|c| number(row.get(c), &format!("{label}/{}", names[c - 1]))).collect()
    };
    let to = summary(&rows[k], "TO")?;
    let grand_total = number(rows[k].get(k + 1), "TO/total")?;
    let inc_own = summary(&rows[k + 1], "INC_OWN")?;
    let net = summary(&rows[k + 2], "NET")?;
    let npdc_degree = summary(&rows[k + 3], "NPDC")?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::SchemaMismatch(format!("NPDC count {v} is not a non-negative integer")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConnectednessTable {
        names,
        shares,
        from,
        to,
        grand_total,
        inc_own,
        net,
        npdc_degree,
    })
}

pub fn parse_sweep_table(text: &str) -> Result<SweepTable> {
    let (header, rows) = records(text)?;
    let n = header.len();
    if n < 4 || header[0] != "quantile" || header[n - 2] != "Total" || header[n - 1] != "STDEV" {
        return Err(Error::SchemaMismatch(
            "sweep table header must be `quantile,<entities…>,Total,STDEV`".into(),
        ));
    }
    let names: Vec<String> = header[1..n - 2].to_vec();
    let k = names.len();
    let rows = rows
        .iter()
        .map(|r| {
            if r.len() != n {
                return Err(Error::SchemaMismatch(format!("row {:?} has {} cells, expected {n}", r.first(), r.len())));
            }
            Ok(SweepTableRow {
                theta: number(r.first(), "quantile")?,
                values: (1..=k).map(|c| number(r.get(c), &names[c - 1])).collect::<Result<_>>()?,
                total: number(r.get(k + 1), "Total")?,
                stdev: number(r.get(k + 2), "STDEV")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::SchemaMismatch("sweep table has no rows".into()));
    }
    Ok(SweepTable { names, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub own_plus_from: f64,
    pub from_row_sum: f64,
    pub to_column_sum: f64,
    pub net: f64,
    pub inc_own: f64,
    pub grand_total: f64,
    pub net_balance: f64,
    pub sweep_total: f64,
    pub sweep_stdev: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            own_plus_from: 0.05,
            from_row_sum: 0.05,
            to_column_sum: 0.05,
            net: 0.02,
            inc_own: 0.02,
            grand_total: 0.1,
            net_balance: 0.1,
            sweep_total: 0.05,
            sweep_stdev: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub identity: String,
    /// Entity row, or the summary row (`TO`, `INC_OWN`, `NET`, `NPDC`,
    /// quantile) the check belongs to.
    pub row: String,
    pub column: Option<String>,
    pub printed: f64,
    pub derived: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub kind: TableKind,
    pub checks: Vec<Check>,
    pub passed: bool,
    /// Rows with at least one failing check, in table order.
    pub failing_rows: Vec<String>,
    pub max_residual: f64,
}

impl ConsistencyReport {
    fn new(kind: TableKind, checks: Vec<Check>) -> Self {
        let mut failing_rows: Vec<String> = Vec::new();
        for c in checks.iter().filter(|c| !c.pass) {
            if !failing_rows.contains(&c.row) {
                failing_rows.push(c.row.clone());
            }
        }
        ConsistencyReport {
            kind,
            passed: failing_rows.is_empty(),
            max_residual: checks.iter().map(|c| c.residual.abs()).fold(0.0, f64::max),
            checks,
            failing_rows,
        }
    }

    pub fn find(&self, identity: &str, row: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.identity == identity && c.row == row)
    }
}

fn check(identity: &str, row: &str, column: Option<&str>, printed: f64, derived: f64, tolerance: f64) -> Check {
    // rounding noise in the table shows up as 0.019999… residuals
    let residual = ((printed - derived) * 1e9).round() / 1e9;
    Check {
        identity: identity.to_string(),
        row: row.to_string(),
        column: column.map(str::to_string),
        printed,
        derived,
        residual,
        tolerance,
        pass: residual.abs() <= tolerance,
    }
}

pub fn validate_connectedness(t: &ConnectednessTable, tol: &Tolerances) -> ConsistencyReport {
    let k = t.names.len();
    let s = &t.shares;
    let mut checks = Vec::new();
    for i in 0..k {
        let name = &t.names[i];
        checks.push(check("own+FROM", name, None, 100.0, s[i][i] + t.from[i], tol.own_plus_from));
        let row_sum: f64 = (0..k).filter(|&j| j != i).map(|j| s[i][j]).sum();
        checks.push(check("FROM=row-sum", name, Some("FROM"), t.from[i], row_sum, tol.from_row_sum));
    }
    for j in 0..k {
        let name = t.names[j].as_str();
        let col_sum: f64 = (0..k).filter(|&i| i != j).map(|i| s[i][j]).sum();
        checks.push(check("TO=column-sum", "TO", Some(name), t.to[j], col_sum, tol.to_column_sum));
        checks.push(check("INC_OWN=TO+own", "INC_OWN", Some(name), t.inc_own[j], t.to[j] + s[j][j], tol.inc_own));
        checks.push(check("NET=TO-FROM", "NET", Some(name), t.net[j], t.to[j] - t.from[j], tol.net));
        let degree = (0..k).filter(|&i| i != j && s[i][j] - s[j][i] > 0.0).count();
        checks.push(check("NPDC-degree", "NPDC", Some(name), t.npdc_degree[j] as f64, degree as f64, 0.0));
    }
    checks.push(check("grand-total", "TO", Some("total"), t.grand_total, t.to.iter().sum(), tol.grand_total));
    checks.push(check("sum-NET=0", "NET", Some("total"), 0.0, t.net.iter().sum(), tol.net_balance));
    ConsistencyReport::new(TableKind::Connectedness, checks)
}

pub fn validate_sweep(t: &SweepTable, tol: &Tolerances) -> ConsistencyReport {
    let mut checks = Vec::new();
    for r in &t.rows {
        let label = format!("{:.2}", r.theta);
        checks.push(check("Total=sum", &label, Some("Total"), r.total, r.values.iter().sum(), tol.sweep_total));
        checks.push(check("STDEV=sample-sd", &label, Some("STDEV"), r.stdev, sample_stdev(&r.values), tol.sweep_stdev));
    }
    for w in t.rows.windows(2) {
        if w[0].theta >= w[1].theta {
            checks.push(check("quantile-order", &format!("{:.2}", w[1].theta), None, w[1].theta, w[0].theta, -1.0));
        }
    }
    ConsistencyReport::new(TableKind::Sweep, checks)
}

pub fn validate_fixture_text(text: &str, kind: TableKind, tol: &Tolerances) -> Result<ConsistencyReport> {
    match kind {
        TableKind::Connectedness => Ok(validate_connectedness(&parse_connectedness_table(text)?, tol)),
        TableKind::Sweep => Ok(validate_sweep(&parse_sweep_table(text)?, tol)),
    }
}

pub fn validate_fixture<R: Read>(mut reader: R, kind: TableKind) -> Result<ConsistencyReport> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    validate_fixture_text(&text, kind, &Tolerances::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "label,A,B,FROM\nA,60,40,40\nB,10,90,10\nTO,10,40,50\nINC_OWN,70,130,\nNET,-30,30,\nNPDC,0,1,\n";

    #[test]
    fn small_table_passes() {
        let r = validate_fixture_text(SMALL, TableKind::Connectedness, &Tolerances::default()).unwrap();
        assert!(r.passed, "{:?}", r.failing_rows);
    }

    #[test]
    fn wrong_kind_is_schema_mismatch() {
        assert!(matches!(
            validate_fixture_text(SMALL, TableKind::Sweep, &Tolerances::default()),
            Err(Error::SchemaMismatch(_))
        ));
        assert!(matches!(
            validate_fixture_text("quantile,A,B,Total,STDEV\n0.1,1,2,3,0.7071\n", TableKind::Connectedness, &Tolerances::default()),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn sweep_arithmetic() {
        let r = validate_fixture_text("quantile,A,B,Total,STDEV\n0.1,1,2,3,0.71\n", TableKind::Sweep, &Tolerances::default()).unwrap();
        assert!(r.passed);
    }
}
