//! Quantile VARs, generalized variance decompositions and spillover
//! connectedness reports.

use crate::error::{Error, Result};
use crate::regression::quantile_fit;
use crate::var::{ma_coefficients, structural_responses, VarDynamics};
use crate::linalg::spectral_radius;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const DEFAULT_HORIZON: usize = 10;
pub const DEFAULT_QVAR_LAG: usize = 1;

/// `0.05, 0.10, …, 0.95`.
pub fn default_theta_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

/// Quantile grids must be strictly increasing inside `(0, 1)`.
pub fn validate_theta_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty quantile grid".into()));
    }
    for &t in grid {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidArgument(format!("quantile {t} outside (0, 1)")));
        }
    }
    if let Some(w) = grid.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "quantile grid must be strictly increasing, found {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// One quantile's VAR. With a contemporaneous matrix the equations are in
/// the recursive order the fit was given, and `lags` are the structural
/// coefficients of `(I − Ã₀) Y_t = ω + Σ Ã_l Y_{t-l} + ε_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct QvarEntry {
    pub theta: f64,
    pub intercept: Vec<f64>,
    pub lags: Vec<DMatrix<f64>>,
    /// Strictly lower triangular.
    pub contemporaneous: Option<DMatrix<f64>>,
    /// Cross-products of the quantile residuals over `T - p - (k p + 1)`.
    pub pseudo_sigma: DMatrix<f64>,
    pub residuals: DMatrix<f64>,
    pub iterations: usize,
}

impl QvarEntry {
    pub fn k(&self) -> usize {
        self.intercept.len()
    }

    /// Reduced-form lags and innovation covariance.
    pub fn dynamics(&self) -> Result<VarDynamics> {
        match &self.contemporaneous {
            None => Ok(VarDynamics {
                lags: self.lags.clone(),
                sigma: self.pseudo_sigma.clone(),
            }),
            Some(a0) => {
                let k = self.k();
                let b = (DMatrix::identity(k, k) - a0)
                    .try_inverse()
                    .ok_or(Error::SingularContemporaneousMatrix)?;
                Ok(VarDynamics {
                    lags: self.lags.iter().map(|a| &b * a).collect(),
                    sigma: &b * &self.pseudo_sigma * b.transpose(),
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QvarFit {
    pub p: usize,
    pub thetas: Vec<f64>,
    pub entries: Vec<QvarEntry>,
    /// Column order used for the recursive structure (indices into the input).
    pub ordering: Option<Vec<usize>>,
}

impl QvarFit {
    pub fn at(&self, theta: f64) -> Option<&QvarEntry> {
        self.entries.iter().find(|e| e.theta == theta)
    }
}

/// Fits every quantile of `grid` independently.
pub fn fit_qvar(
    data: &DMatrix<f64>,
    p: usize,
    grid: &[f64],
    structural: bool,
    ordering: Option<&[usize]>,
) -> Result<QvarFit> {
    validate_theta_grid(grid)?;
    let entries = grid
        .iter()
        .map(|&t| fit_qvar_at(data, p, t, structural, ordering))
        .collect::<Result<Vec<_>>>()?;
    Ok(QvarFit {
        p,
        thetas: grid.to_vec(),
        entries,
        ordering: if structural { ordering.map(<[usize]>::to_vec) } else { None },
    })
}

/// QVAR at one quantile. Structural fits regress each equation on the
/// current values of the variables before it in `ordering`, after which the
/// entry refers to the reordered system.
pub fn fit_qvar_at(
    data: &DMatrix<f64>,
    p: usize,
    theta: f64,
    structural: bool,
    ordering: Option<&[usize]>,
) -> Result<QvarEntry> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("quantile {theta} outside (0, 1)")));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("QVAR lag order must be at least 1".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("data has missing or non-finite values".into()));
    }
    let (t_len, k) = data.shape();
    let data = if structural {
        let order = ordering.ok_or(Error::OrderingRequired)?;
        let mut seen = vec![false; k];
        if order.len() != k || order.iter().any(|&i| i >= k || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidArgument("ordering must be a permutation of the series".into()));
        }
        data.select_columns(order)
    } else {
        data.clone()
    };
    if t_len <= p || t_len - p <= k * p + 1 {
        return Err(Error::TooFewObservations(format!(
            "QVAR({p}) on {k} series needs T - p > {}, have T = {t_len}",
            k * p + 1
        )));
    }
    let n = t_len - p;
    let lagged = DMatrix::from_fn(n, k * p, |r, c| data[(r + p - 1 - c / k, c % k)]);
    let mut intercept = vec![0.0; k];
    let mut lags = vec![DMatrix::zeros(k, k); p];
    let mut a0 = DMatrix::zeros(k, k);
    let mut residuals = DMatrix::zeros(n, k);
    let mut iterations = 0;
    for eq in 0..k {
        let contemporaneous = if structural { eq } else { 0 };
        let x = DMatrix::from_fn(n, contemporaneous + k * p, |r, c| {
            if c < contemporaneous {
                data[(r + p, c)]
            } else {
                lagged[(r, c - contemporaneous)]
            }
        });
        let y: Vec<f64> = (0..n).map(|r| data[(r + p, eq)]).collect();
        let fit = quantile_fit(&x, &y, theta)?;
        iterations += fit.iterations;
        intercept[eq] = fit.coefficients[0];
        for c in 0..contemporaneous {
            a0[(eq, c)] = fit.coefficients[1 + c];
        }
        for c in 0..k * p {
            lags[c / k][(eq, c % k)] = fit.coefficients[1 + contemporaneous + c];
        }
        residuals.column_mut(eq).copy_from_slice(&fit.residuals);
    }
    let dof = (n - (k * p + 1)) as f64;
    let s = residuals.transpose() * &residuals / dof;
    Ok(QvarEntry {
        theta,
        intercept,
        lags,
        contemporaneous: structural.then_some(a0),
        pseudo_sigma: (&s + s.transpose()) * 0.5,
        residuals,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfevdTable {
    /// Row `i`: percentage of `i`'s forecast-error variance due to shocks in
    /// each `j`. Rows sum to 100.
    pub shares: Vec<Vec<f64>>,
    pub horizon: usize,
    /// The underlying VAR has a companion root outside the unit circle.
    pub explosive: bool,
}

impl GfevdTable {
    pub fn k(&self) -> usize {
        self.shares.len()
    }

    pub fn own(&self) -> Vec<f64> {
        (0..self.k()).map(|i| self.shares[i][i]).collect()
    }
}

/// Generalized forecast-error variance decomposition over `h = 0..H-1`,
/// rows normalized to 100.
pub fn gfevd(dynamics: &VarDynamics, horizon: usize) -> Result<GfevdTable> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let k = dynamics.dim();
    let sigma = &dynamics.sigma;
    if (0..k).any(|j| !(sigma[(j, j)] > 0.0)) {
        return Err(Error::InvalidArgument("innovation variances must be positive".into()));
    }
    let psi = ma_coefficients(&dynamics.lags, k, horizon - 1);
    let mut num = DMatrix::<f64>::zeros(k, k);
    let mut den = vec![0.0; k];
    for m in &psi {
        let ms = m * sigma;
        let mv = &ms * m.transpose();
        for i in 0..k {
            den[i] += mv[(i, i)];
            for j in 0..k {
                num[(i, j)] += ms[(i, j)] * ms[(i, j)];
            }
        }
    }
    let mut shares = vec![vec![0.0; k]; k];
    for i in 0..k {
        let raw: Vec<f64> = (0..k).map(|j| num[(i, j)] / sigma[(j, j)] / den[i]).collect();
        let total: f64 = raw.iter().sum();
        for j in 0..k {
            shares[i][j] = 100.0 * raw[j] / total;
        }
    }
    Ok(GfevdTable {
        shares,
        horizon,
        explosive: spectral_radius(&dynamics.companion()) > 1.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectednessReport {
    pub names: Vec<String>,
    pub table: GfevdTable,
    pub from_others: Vec<f64>,
    pub to_others: Vec<f64>,
    pub total_incl_own: Vec<f64>,
    pub net: Vec<f64>,
    /// `npdc[i][j] > 0`: `i` dominates `j`.
    pub npdc: Vec<Vec<f64>>,
    pub npdc_degree: Vec<usize>,
    pub tci: f64,
}

pub fn connectedness_report(table: &GfevdTable, names: &[String]) -> Result<ConnectednessReport> {
    let k = table.k();
    if names.len() != k {
        return Err(Error::InvalidArgument(format!("{} names for {k} variables", names.len())));
    }
    let s = &table.shares;
    let from_others: Vec<f64> = (0..k)
        .map(|i| (0..k).filter(|&j| j != i).map(|j| s[i][j]).sum())
        .collect();
    let to_others: Vec<f64> = (0..k)
        .map(|j| (0..k).filter(|&i| i != j).map(|i| s[i][j]).sum())
        .collect();
    let total_incl_own = (0..k).map(|i| to_others[i] + s[i][i]).collect();
    let net = (0..k).map(|i| to_others[i] - from_others[i]).collect();
    let npdc: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| s[j][i] - s[i][j]).collect())
        .collect();
    let npdc_degree = npdc
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().filter(|&(j, v)| j != i && *v > 0.0).count())
        .collect();
    let tci = from_others.iter().sum::<f64>() / k as f64;
    Ok(ConnectednessReport {
        names: names.to_vec(),
        table: table.clone(),
        from_others,
        to_others,
        total_incl_own,
        net,
        npdc,
        npdc_degree,
        tci,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    pub from_others: Vec<f64>,
    pub to_others: Vec<f64>,
    pub from_total: f64,
    pub to_total: f64,
    /// Sample (n − 1) standard deviation across entities.
    pub from_stdev: f64,
    pub to_stdev: f64,
    pub tci: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub theta: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileSweep {
    pub names: Vec<String>,
    pub p: usize,
    pub horizon: usize,
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

pub fn sample_stdev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

impl SweepRow {
    pub fn from_report(theta: f64, report: &ConnectednessReport) -> Self {
        SweepRow {
            theta,
            from_others: report.from_others.clone(),
            to_others: report.to_others.clone(),
            from_total: report.from_others.iter().sum(),
            to_total: report.to_others.iter().sum(),
            from_stdev: sample_stdev(&report.from_others),
            to_stdev: sample_stdev(&report.to_others),
            tci: report.tci,
        }
    }
}

/// Connectedness of the QVAR at `θ`, full sample.
pub fn qvar_connectedness(
    data: &DMatrix<f64>,
    names: &[String],
    p: usize,
    horizon: usize,
    theta: f64,
) -> Result<ConnectednessReport> {
    let entry = fit_qvar_at(data, p, theta, false, None)?;
    connectedness_report(&gfevd(&entry.dynamics()?, horizon)?, names)
}

/// One row per quantile; a failing quantile is recorded and the sweep
/// carries on.
pub fn quantile_sweep(
    data: &DMatrix<f64>,
    names: &[String],
    p: usize,
    horizon: usize,
    grid: &[f64],
) -> Result<QuantileSweep> {
    validate_theta_grid(grid)?;
    if names.len() != data.ncols() {
        return Err(Error::InvalidArgument(format!("{} names for {} series", names.len(), data.ncols())));
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &theta in grid {
        match qvar_connectedness(data, names, p, horizon, theta) {
            Ok(r) => rows.push(SweepRow::from_report(theta, &r)),
            Err(e) => failures.push(SweepFailure {
                theta,
                error: e.to_string(),
            }),
        }
    }
    Ok(QuantileSweep {
        names: names.to_vec(),
        p,
        horizon,
        rows,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    /// Index of the first observation in the window.
    pub start: usize,
    pub report: Option<ConnectednessReport>,
    pub error: Option<String>,
}

/// Connectedness on every contiguous window of `window` observations.
pub fn rolling_connectedness(
    data: &DMatrix<f64>,
    names: &[String],
    p: usize,
    horizon: usize,
    theta: f64,
    window: usize,
) -> Result<Vec<WindowReport>> {
    let t_len = data.nrows();
    if window > t_len {
        return Err(Error::WindowExceedsSample { window, sample: t_len });
    }
    Ok((0..=t_len - window)
        .map(|start| {
            let slice = data.rows(start, window).into_owned();
            match qvar_connectedness(&slice, names, p, horizon, theta) {
                Ok(r) => WindowReport { start, report: Some(r), error: None },
                Err(e) => WindowReport { start, report: None, error: Some(e.to_string()) },
            }
        })
        .collect())
}

/// Responses `(I − Ã₀)^{-1}`-propagated through the structural recursion:
/// `[h][(i, j)]` is variable `i` at horizon `h` after a unit `ε_j`.
pub fn structural_quantile_irf(entry: &QvarEntry, horizon: usize) -> Result<Vec<DMatrix<f64>>> {
    let a0 = entry.contemporaneous.as_ref().ok_or(Error::OrderingRequired)?;
    let reduced = entry.dynamics()?;
    structural_responses(&reduced.lags, a0, horizon)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpdcNode {
    pub id: String,
    pub net: f64,
    /// `"transmitter"` when NET > 0, otherwise `"receiver"`.
    pub role: String,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpdcEdge {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

/// Node-link form of the dominance network: an edge `i → j` for every
/// positive `npdc[i][j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpdcGraph {
    pub directed: bool,
    pub nodes: Vec<NpdcNode>,
    pub links: Vec<NpdcEdge>,
}

pub fn npdc_graph(report: &ConnectednessReport) -> NpdcGraph {
    let k = report.names.len();
    let nodes = (0..k)
        .map(|i| NpdcNode {
            id: report.names[i].clone(),
            net: report.net[i],
            role: if report.net[i] > 0.0 { "transmitter" } else { "receiver" }.to_string(),
            degree: report.npdc_degree[i],
        })
        .collect();
    let mut links = Vec::new();
    for i in 0..k {
        for j in 0..k {
            if i != j && report.npdc[i][j] > 0.0 {
                links.push(NpdcEdge {
                    source: report.names[i].clone(),
                    target: report.names[j].clone(),
                    weight: report.npdc[i][j],
                });
            }
        }
    }
    NpdcGraph { directed: true, nodes, links }
}

pub fn npdc_dot(report: &ConnectednessReport) -> String {
    let g = npdc_graph(report);
    let mut out = String::from("digraph npdc {\n");
    for n in &g.nodes {
        let colour = if n.net > 0.0 { "steelblue" } else { "goldenrod" };
        let _ = writeln!(
            out,
            "  \"{}\" [net={:.4}, role={}, color={colour}];",
            n.id, n.net, n.role
        );
    }
    for e in &g.links {
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [weight={:.4}, label=\"{:.2}\"];",
            e.source, e.target, e.weight, e.weight
        );
    }
    out.push_str("}\n");
    out
}
