//! Johansen trace test for cointegration rank.

use crate::error::{Error, Result};
use crate::linalg::partial_out;
use crate::panel::{Panel, VariableRole};
use crate::report::{Significance, StarLevel, Verdict};
use crate::var::{select_lag, Deterministic};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JohansenDeterministic {
    /// No restricted term; an unrestricted constant in the short-run block.
    None,
    /// Constant inside the cointegrating relation.
    RestrictedConstant,
    /// Trend inside the cointegrating relation, unrestricted constant.
    RestrictedTrend,
}

// Osterwald-Lenum (1992) trace quantiles, 90/95/99%, indexed by k - r = 1..5.
// Verification notes in CRITICAL_VALUES.md.
const TRACE_NONE: [[f64; 3]; 5] = [
    [6.50, 8.18, 11.65],
    [15.66, 17.95, 23.52],
    [28.71, 31.52, 37.22],
    [45.23, 48.28, 55.43],
    [66.49, 70.60, 78.87],
];
const TRACE_CONST: [[f64; 3]; 5] = [
    [7.52, 9.24, 12.97],
    [17.85, 19.96, 24.60],
    [32.00, 34.91, 41.07],
    [49.65, 53.12, 60.16],
    [71.86, 76.07, 84.45],
];
const TRACE_TREND: [[f64; 3]; 5] = [
    [10.49, 12.25, 16.26],
    [22.76, 25.32, 30.45],
    [39.06, 42.44, 48.45],
    [59.14, 62.99, 70.05],
    [83.20, 87.31, 96.58],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceCritical {
    #[serde(rename = "90%")]
    pub p90: f64,
    #[serde(rename = "95%")]
    pub p95: f64,
    #[serde(rename = "99%")]
    pub p99: f64,
}

impl TraceCritical {
    pub fn at(&self, level: Significance) -> f64 {
        match level {
            Significance::Ten => self.p90,
            Significance::Five => self.p95,
            Significance::One => self.p99,
        }
    }

    /// `*` beyond 90%, `**` beyond 95%, `***` beyond 99%.
    pub fn stars(&self, statistic: f64) -> StarLevel {
        if statistic > self.p99 {
            StarLevel::Three
        } else if statistic > self.p95 {
            StarLevel::Two
        } else if statistic > self.p90 {
            StarLevel::One
        } else {
            StarLevel::None
        }
    }
}

/// Tabulated trace critical values for `k - r` common stochastic trends.
pub fn trace_critical_values(det: JohansenDeterministic, k_minus_r: usize) -> Option<TraceCritical> {
    let table = match det {
        JohansenDeterministic::None => &TRACE_NONE,
        JohansenDeterministic::RestrictedConstant => &TRACE_CONST,
        JohansenDeterministic::RestrictedTrend => &TRACE_TREND,
    };
    let row = table.get(k_minus_r.checked_sub(1)?)?;
    Some(TraceCritical {
        p90: row[0],
        p95: row[1],
        p99: row[2],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JohansenResult {
    pub deterministic: JohansenDeterministic,
    /// VAR lag order in levels.
    pub p: usize,
    /// Effective sample `T - p`.
    pub nobs: usize,
    pub ranks: Vec<usize>,
    /// Descending, in `[0, 1)`.
    pub eigenvalues: Vec<f64>,
    pub trace: Vec<f64>,
    /// `None` beyond the tabulated `k - r ≤ 5`.
    pub critical_values: Vec<Option<TraceCritical>>,
    pub significance: Significance,
    pub verdicts: Vec<Option<Verdict>>,
    /// Largest eigenvalue numerically at 1: the series are (nearly) collinear.
    pub degenerate: bool,
}

impl JohansenResult {
    pub fn recomputed_trace(&self, r: usize) -> f64 {
        -(self.nobs as f64) * self.eigenvalues[r..].iter().map(|l| (1.0 - l).ln()).sum::<f64>()
    }

    /// Cointegrating rank by sequential testing: the first `r` not rejected.
    pub fn rank(&self) -> usize {
        self.verdicts
            .iter()
            .position(|v| !matches!(v, Some(Verdict::Reject)))
            .unwrap_or(self.ranks.len())
    }
}

const DEGENERATE_TOL: f64 = 1e-8;

/// Trace statistics for `r = 0..k-1` on the columns of `data` (levels,
/// `T × k`) with a VAR(p) in levels.
pub fn johansen_trace(
    data: &DMatrix<f64>,
    p: usize,
    det: JohansenDeterministic,
    significance: Significance,
) -> Result<JohansenResult> {
    let (t_len, k) = data.shape();
    if k < 2 {
        return Err(Error::InvalidArgument("Johansen test needs at least two series".into()));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("Johansen lag order must be at least 1".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("data has missing or non-finite values".into()));
    }
    let z1_extra = usize::from(det != JohansenDeterministic::None);
    let z2_const = usize::from(det != JohansenDeterministic::RestrictedConstant);
    let z2_cols = k * (p - 1) + z2_const;
    let needed = p + k + z1_extra + z2_cols + 1;
    if t_len < needed {
        return Err(Error::TooFewObservations(format!(
            "Johansen test with p = {p} on {k} series needs at least {needed} observations, have {t_len}"
        )));
    }
    let n = t_len - p;
    let dx = |t: usize, j: usize| data[(t, j)] - data[(t - 1, j)];
    let z0 = DMatrix::from_fn(n, k, |r, j| dx(r + p, j));
    let z1 = DMatrix::from_fn(n, k + z1_extra, |r, j| {
        let t = r + p;
        if j < k {
            data[(t - 1, j)]
        } else if det == JohansenDeterministic::RestrictedConstant {
            1.0
        } else {
            t as f64
        }
    });
    let (r0, r1) = if z2_cols > 0 {
        let z2 = DMatrix::from_fn(n, z2_cols, |r, c| {
            let t = r + p;
            if c < k * (p - 1) {
                let lag = c / k + 1;
                dx(t - lag, c % k)
            } else {
                1.0
            }
        });
        (partial_out(&z0, &z2)?, partial_out(&z1, &z2)?)
    } else {
        (z0, z1)
    };
    let nf = n as f64;
    let s00 = r0.transpose() * &r0 / nf;
    let s01 = r0.transpose() * &r1 / nf;
    let s11 = r1.transpose() * &r1 / nf;
    let s00_inv = s00.clone().cholesky().ok_or(Error::SingularMomentMatrix)?.inverse();
    let l11 = s11.clone().cholesky().ok_or(Error::SingularMomentMatrix)?.l();
    let l_inv = l11.try_inverse().ok_or(Error::SingularMomentMatrix)?;
    let m = &l_inv * s01.transpose() * s00_inv * &s01 * l_inv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig.truncate(k);
    let degenerate = eig[0] >= 1.0 - DEGENERATE_TOL;
    let eigenvalues: Vec<f64> = eig
        .into_iter()
        .map(|l| l.clamp(0.0, 1.0 - DEGENERATE_TOL))
        .collect();
    let trace: Vec<f64> = (0..k)
        .map(|r| -nf * eigenvalues[r..].iter().map(|l| (1.0 - l).ln()).sum::<f64>())
        .collect();
    let critical_values: Vec<Option<TraceCritical>> =
        (0..k).map(|r| trace_critical_values(det, k - r)).collect();
    let verdicts = trace
        .iter()
        .zip(&critical_values)
        .map(|(s, cv)| {
            cv.map(|cv| if *s > cv.at(significance) { Verdict::Reject } else { Verdict::FailToReject })
        })
        .collect();
    Ok(JohansenResult {
        deterministic: det,
        p,
        nobs: n,
        ranks: (0..k).collect(),
        eigenvalues,
        trace,
        critical_values,
        significance,
        verdicts,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCell {
    pub row: VariableRole,
    pub column: VariableRole,
    pub lag: usize,
    /// `None` when the test could not be computed (see `error`).
    pub statistic: Option<f64>,
    pub stars: StarLevel,
    pub degenerate: bool,
    pub error: Option<String>,
}

impl PairCell {
    /// `18.85*` style text; `-` when not significant or not computed.
    pub fn text(&self) -> String {
        match self.statistic {
            Some(s) if self.stars != StarLevel::None && !self.degenerate => {
                format!("{s:.2}{}", self.stars.as_str())
            }
            _ => "-".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseGrid {
    pub entity: String,
    pub variables: Vec<VariableRole>,
    pub deterministic: JohansenDeterministic,
    /// Lower triangle, row-major: `(i, j)` with `j < i`.
    pub cells: Vec<PairCell>,
}

impl PairwiseGrid {
    pub fn cell(&self, row: usize, column: usize) -> Option<&PairCell> {
        let (i, j) = if row > column { (row, column) } else { (column, row) };
        if i == j {
            return None;
        }
        self.cells.get(i * (i - 1) / 2 + j)
    }
}

/// r = 0 trace statistic for every unordered variable pair of one entity.
/// With `p = None` the lag comes from `select_lag` (up to `p_max`) on the
/// pair's VAR in levels.
pub fn pairwise_grid(
    panel: &Panel,
    entity: &str,
    variables: &[VariableRole],
    p: Option<usize>,
    p_max: usize,
    det: JohansenDeterministic,
) -> Result<PairwiseGrid> {
    if variables.len() < 2 {
        return Err(Error::InvalidArgument("pairwise grid needs at least two variables".into()));
    }
    let data = panel.slice(entity, variables)?;
    let mut cells = Vec::new();
    for i in 1..variables.len() {
        for j in 0..i {
            let pair = data.select_columns(&[i, j]);
            let lag = match p {
                Some(p) => Ok(p),
                None => select_lag(&pair, p_max, Deterministic::Const).map(|s| s.chosen),
            };
            let outcome = lag.and_then(|lag| {
                johansen_trace(&pair, lag, det, Significance::Five).map(|r| (lag, r))
            });
            let cell = match outcome {
                Ok((lag, r)) => {
                    let stat = r.trace[0];
                    let stars = r.critical_values[0].map_or(StarLevel::None, |cv| cv.stars(stat));
                    PairCell {
                        row: variables[i].clone(),
                        column: variables[j].clone(),
                        lag,
                        statistic: Some(stat),
                        stars,
                        degenerate: r.degenerate,
                        error: None,
                    }
                }
                Err(e) => PairCell {
                    row: variables[i].clone(),
                    column: variables[j].clone(),
                    lag: p.unwrap_or(0),
                    statistic: None,
                    stars: StarLevel::None,
                    degenerate: matches!(e, Error::SingularMomentMatrix),
                    error: Some(e.to_string()),
                },
            };
            cells.push(cell);
        }
    }
    Ok(PairwiseGrid {
        entity: entity.to_string(),
        variables: variables.to_vec(),
        deterministic: det,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walk(n: usize, seed: u64) -> Vec<f64> {
        // small LCG, enough for a deterministic non-degenerate path
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                x += ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
                x
            })
            .collect()
    }

    #[test]
    fn anchor_value() {
        let cv = trace_critical_values(JohansenDeterministic::RestrictedConstant, 2).unwrap();
        assert_eq!(cv.p90, 17.85);
        assert!(trace_critical_values(JohansenDeterministic::RestrictedConstant, 6).is_none());
    }

    #[test]
    fn star_cells() {
        let cv = trace_critical_values(JohansenDeterministic::RestrictedConstant, 2).unwrap();
        let mk = |s: f64| PairCell {
            row: VariableRole::Trd,
            column: VariableRole::Fdi,
            lag: 1,
            statistic: Some(s),
            stars: cv.stars(s),
            degenerate: false,
            error: None,
        };
        assert_eq!(mk(18.85).text(), "18.85*");
        assert_eq!(mk(28.48).text(), "28.48***");
        assert_eq!(mk(20.0).text(), "20.00**");
        assert_eq!(mk(10.0).text(), "-");
    }

    #[test]
    fn identity_and_order() {
        let a = walk(120, 1);
        let b = walk(120, 2);
        let data = DMatrix::from_fn(120, 2, |t, j| if j == 0 { a[t] } else { b[t] });
        for det in [
            JohansenDeterministic::None,
            JohansenDeterministic::RestrictedConstant,
            JohansenDeterministic::RestrictedTrend,
        ] {
            let r = johansen_trace(&data, 2, det, Significance::Five).unwrap();
            assert!(r.eigenvalues[0] >= r.eigenvalues[1]);
            assert!(r.trace[0] > r.trace[1]);
            for k in 0..2 {
                assert!((r.trace[k] - r.recomputed_trace(k)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn identical_series_are_singular() {
        let a = walk(60, 3);
        let data = DMatrix::from_fn(60, 2, |t, _| a[t]);
        assert!(matches!(
            johansen_trace(&data, 1, JohansenDeterministic::RestrictedConstant, Significance::Five),
            Err(Error::SingularMomentMatrix)
        ));
    }

    #[test]
    fn too_short() {
        let data = DMatrix::from_element(4, 2, 1.0);
        assert!(matches!(
            johansen_trace(&data, 2, JohansenDeterministic::RestrictedConstant, Significance::Five),
            Err(Error::TooFewObservations(_))
        ));
    }
}
