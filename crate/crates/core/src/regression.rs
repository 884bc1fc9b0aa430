//! Ordinary least squares, rolling OLS and pinball-loss quantile regression.

use crate::error::{Error, Result};
use crate::linalg::LeastSquares;
use crate::panel::{Panel, VariableRole};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    /// Intercept first when `has_intercept`.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// Centered total sum of squares.
    pub tss: f64,
    pub r_squared: f64,
    /// F-test of all slopes zero; `None` for intercept-only models.
    pub f_statistic: Option<f64>,
    pub f_p_value: Option<f64>,
    pub n_obs: usize,
    pub n_params: usize,
    pub has_intercept: bool,
}

impl OlsFit {
    pub fn residual_dof(&self) -> usize {
        self.n_obs - self.n_params
    }

    pub fn t_statistic(&self, j: usize) -> f64 {
        self.coefficients[j] / self.std_errors[j]
    }
}

fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().insert_column(0, 1.0)
}

/// OLS of `y` on an intercept plus the columns of `x`.
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64]) -> Result<OlsFit> {
    fit_design(&with_intercept(x), y, true)
}

/// OLS on `x` exactly as given; `has_intercept` says whether one of the
/// columns is a constant, which decides the form of the F-test.
pub fn least_squares(x: &DMatrix<f64>, y: &[f64], has_intercept: bool) -> Result<OlsFit> {
    fit_design(x, y, has_intercept)
}

fn fit_design(x: &DMatrix<f64>, y: &[f64], has_intercept: bool) -> Result<OlsFit> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidArgument(format!("{} responses for {n} design rows", y.len())));
    }
    if n <= k {
        return Err(Error::TooFewRows { rows: n, cols: k });
    }
    let ls = LeastSquares::fit_vector(x, y)?;
    let residuals: Vec<f64> = ls.residuals.column(0).iter().copied().collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };
    let dof = (n - k) as f64;
    let sigma2 = rss / dof;
    let std_errors = (0..k).map(|j| (sigma2 * ls.xtx_inv[(j, j)]).sqrt()).collect();
    let slopes = if has_intercept { k - 1 } else { k };
    let (f_statistic, f_p_value) = if slopes == 0 {
        (None, None)
    } else {
        let explained = if has_intercept { tss - rss } else { tss + n as f64 * mean * mean - rss };
        let f = (explained / slopes as f64) / (rss / dof);
        let p = if rss == 0.0 {
            0.0
        } else {
            FisherSnedecor::new(slopes as f64, dof)
                .map(|d| d.sf(f))
                .unwrap_or(f64::NAN)
        };
        (Some(f), Some(p))
    };
    Ok(OlsFit {
        coefficients: ls.coefficients.column(0).iter().copied().collect(),
        std_errors,
        residuals,
        rss,
        tss,
        r_squared,
        f_statistic,
        f_p_value,
        n_obs: n,
        n_params: k,
        has_intercept,
    })
}

/// The three rolling models relating offshoring factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RollingModel {
    /// fdi ~ trd + ifr
    Rq1,
    /// inv ~ trd + ifr
    Rq2,
    /// iep ~ fdi
    Rq3,
}

impl RollingModel {
    pub const ALL: [RollingModel; 3] = [RollingModel::Rq1, RollingModel::Rq2, RollingModel::Rq3];

    pub fn dependent(self) -> VariableRole {
        match self {
            RollingModel::Rq1 => VariableRole::Fdi,
            RollingModel::Rq2 => VariableRole::Inv,
            RollingModel::Rq3 => VariableRole::Iep,
        }
    }

    pub fn regressors(self) -> Vec<VariableRole> {
        match self {
            RollingModel::Rq1 | RollingModel::Rq2 => vec![VariableRole::Trd, VariableRole::Ifr],
            RollingModel::Rq3 => vec![VariableRole::Fdi],
        }
    }

    /// Dependent plus regressors.
    pub fn n_variables(self) -> usize {
        1 + self.regressors().len()
    }

    /// Legal windows for the annual 2000–2020 setup: five windows starting
    /// just above the variable count.
    pub fn default_windows(self) -> Vec<usize> {
        let first = self.n_variables() + 1;
        (first..first + 5).collect()
    }

    pub fn label(self) -> &'static str {
        match self {
            RollingModel::Rq1 => "RQ1",
            RollingModel::Rq2 => "RQ2",
            RollingModel::Rq3 => "RQ3",
        }
    }
}

/// Cell-level marker: bold at 10%, `*` at 5%, `**` at 1%.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RollingFlag {
    Plain,
    Bold,
    Star,
    DoubleStar,
}

impl RollingFlag {
    pub fn from_p(p: f64) -> Self {
        if p <= 0.01 {
            RollingFlag::DoubleStar
        } else if p <= 0.05 {
            RollingFlag::Star
        } else if p <= 0.1 {
            RollingFlag::Bold
        } else {
            RollingFlag::Plain
        }
    }

    pub fn marker(self) -> &'static str {
        match self {
            RollingFlag::Plain => "",
            RollingFlag::Bold => "bold",
            RollingFlag::Star => "*",
            RollingFlag::DoubleStar => "**",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    ZeroVarianceRegressor,
    RankDeficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowOutcome {
    Fitted(OlsFit),
    Skipped(SkipReason),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    /// Index of the first observation in the window.
    pub start: usize,
    pub outcome: WindowOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingResult {
    pub window: usize,
    pub windows: Vec<WindowFit>,
    /// Mean R² over fitted windows (`NaN` if none).
    pub mean_r_squared: f64,
    /// Median per-window F-test p-value over fitted windows.
    pub median_f_p_value: Option<f64>,
    pub flag: RollingFlag,
}

impl RollingResult {
    pub fn fits(&self) -> impl Iterator<Item = &OlsFit> {
        self.windows.iter().filter_map(|w| match &w.outcome {
            WindowOutcome::Fitted(f) => Some(f),
            WindowOutcome::Skipped(_) => None,
        })
    }

    pub fn skipped(&self) -> usize {
        self.windows
            .iter()
            .filter(|w| matches!(w.outcome, WindowOutcome::Skipped(_)))
            .count()
    }
}

/// Rolling OLS of `y` on an intercept and `x` over every contiguous window.
pub fn rolling_ols_arrays(x: &DMatrix<f64>, y: &[f64], window: usize) -> Result<RollingResult> {
    let variables = 1 + x.ncols();
    if window <= variables {
        return Err(Error::WindowTooSmall { window, variables });
    }
    let t = y.len();
    if window > t {
        return Err(Error::WindowExceedsSample { window, sample: t });
    }
    let mut windows = Vec::with_capacity(t - window + 1);
    for start in 0..=t - window {
        let xs = x.rows(start, window).into_owned();
        let ys = &y[start..start + window];
        let zero_var = (0..xs.ncols()).any(|j| {
            let c = xs.column(j);
            let first = c[0];
            c.iter().all(|&v| v == first)
        });
        let outcome = if zero_var {
            WindowOutcome::Skipped(SkipReason::ZeroVarianceRegressor)
        } else {
            match ols_fit(&xs, ys) {
                Ok(fit) => WindowOutcome::Fitted(fit),
                Err(Error::RankDeficient) => WindowOutcome::Skipped(SkipReason::RankDeficient),
                Err(e) => return Err(e),
            }
        };
        windows.push(WindowFit { start, outcome });
    }
    let mut result = RollingResult {
        window,
        windows,
        mean_r_squared: f64::NAN,
        median_f_p_value: None,
        flag: RollingFlag::Plain,
    };
    let r2: Vec<f64> = result.fits().map(|f| f.r_squared).collect();
    if !r2.is_empty() {
        result.mean_r_squared = r2.iter().sum::<f64>() / r2.len() as f64;
    }
    let mut ps: Vec<f64> = result.fits().filter_map(|f| f.f_p_value).collect();
    if !ps.is_empty() {
        ps.sort_by(f64::total_cmp);
        let m = ps.len();
        let median = if m % 2 == 1 { ps[m / 2] } else { 0.5 * (ps[m / 2 - 1] + ps[m / 2]) };
        result.median_f_p_value = Some(median);
        result.flag = RollingFlag::from_p(median);
    }
    Ok(result)
}

/// Rolling regression of one of the RQ models for one entity.
pub fn rolling_ols(panel: &Panel, entity: &str, model: RollingModel, window: usize) -> Result<RollingResult> {
    let variables = model.n_variables();
    if window <= variables {
        return Err(Error::WindowTooSmall { window, variables });
    }
    let y = panel.slice(entity, &[model.dependent()])?;
    let x = panel.slice(entity, &model.regressors())?;
    rolling_ols_arrays(&x, y.as_slice(), window)
}

/// Pinball (check) loss `ρ_θ(u) = u (θ − 1[u < 0])`.
pub fn pinball(u: f64, theta: f64) -> f64 {
    if u < 0.0 {
        u * (theta - 1.0)
    } else {
        u * theta
    }
}

pub fn pinball_loss(residuals: impl IntoIterator<Item = f64>, theta: f64) -> f64 {
    residuals.into_iter().map(|u| pinball(u, theta)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileFit {
    pub theta: f64,
    /// Intercept first when fitted through [`quantile_fit`].
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub pinball_loss: f64,
    /// Share of observations strictly below the fitted quantile plane.
    pub below_fraction: f64,
    pub iterations: usize,
}

/// Quantile regression of `y` on an intercept plus the columns of `x`.
/// A zero-column `x` gives the intercept-only model.
pub fn quantile_fit(x: &DMatrix<f64>, y: &[f64], theta: f64) -> Result<QuantileFit> {
    quantile_regression(&with_intercept(x), y, theta)
}

/// Minimises `Σ ρ_θ(y_i − x_iᵀ b)` over `b` for the design exactly as given.
///
/// An IRLS pass supplies a warm start; the exact optimum is then reached by
/// descending along the edges of the LP polytope: at a vertex `k` observations
/// are interpolated, each basis observation may be released in either
/// direction, and the convex piecewise-linear loss along the chosen edge is
/// minimised exactly by a weighted-median search over its breakpoints.
pub fn quantile_regression(x: &DMatrix<f64>, y: &[f64], theta: f64) -> Result<QuantileFit> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("quantile {theta} outside (0, 1)")));
    }
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::InvalidArgument(format!("{} responses for {n} design rows", y.len())));
    }
    if n < k {
        return Err(Error::TooFewRows { rows: n, cols: k });
    }
    let yv = DVector::from_column_slice(y);
    if n == k {
        // a square design interpolates every observation
        let b = x.clone().lu().solve(&yv).ok_or(Error::RankDeficient)?;
        return Ok(QuantileFit {
            theta,
            coefficients: b.iter().copied().collect(),
            residuals: vec![0.0; n],
            pinball_loss: 0.0,
            below_fraction: 0.0,
            iterations: 0,
        });
    }
    let scale = y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let zero_tol = 1e-11 * scale;

    let start = irls_warm_start(x, &yv, theta)?;
    let mut basis = initial_basis(x, &(&yv - x * &start))?;
    let max_iter = 200 + 50 * n;

    for iter in 0..max_iter {
        let xb = basis_matrix(x, &basis);
        let lu = xb.clone().lu();
        let xb_inv = lu.try_inverse().ok_or(Error::RankDeficient)?;
        let yb = DVector::from_iterator(k, basis.iter().map(|&i| y[i]));
        let b = &xb_inv * yb;
        let r = &yv - x * &b;

        // Steepest feasible edge out of the current vertex.
        let mut best: Option<(f64, usize, DVector<f64>)> = None;
        for j in 0..k {
            for sign in [1.0, -1.0] {
                let d = xb_inv.column(j) * sign;
                let a = x * &d;
                let mut slope = 0.0;
                let mut mass = 0.0;
                for i in 0..n {
                    let ai = a[i];
                    mass += ai.abs();
                    slope += if r[i] > zero_tol {
                        -theta * ai
                    } else if r[i] < -zero_tol {
                        (1.0 - theta) * ai
                    } else if ai > 0.0 {
                        (1.0 - theta) * ai
                    } else {
                        -theta * ai
                    };
                }
                if slope < -1e-12 * mass.max(1.0) && best.as_ref().map_or(true, |bst| slope < bst.0) {
                    best = Some((slope, j, a));
                }
            }
        }
        let Some((_, leave, a)) = best else {
            let residuals: Vec<f64> = r.iter().copied().collect();
            let below = residuals.iter().filter(|&&u| u < -zero_tol).count();
            return Ok(QuantileFit {
                theta,
                coefficients: b.iter().copied().collect(),
                pinball_loss: pinball_loss(residuals.iter().copied(), theta),
                below_fraction: below as f64 / n as f64,
                residuals,
                iterations: iter,
            });
        };

        // Exact line search: f(t) = Σ ρ_θ(r_i − t a_i) is convex piecewise
        // linear with kinks at r_i / a_i where the slope rises by |a_i|.
        let amax = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut kinks: Vec<(f64, f64, usize)> = (0..n)
            .filter(|&i| a[i].abs() > 1e-13 * amax)
            .map(|i| (r[i] / a[i], a[i].abs(), i))
            .collect();
        kinks.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut slope: f64 = (0..n)
            .map(|i| if a[i] > 0.0 { -theta * a[i] } else { (1.0 - theta) * a[i] })
            .sum();
        let mut enter = None;
        for &(t, w, i) in &kinks {
            slope += w;
            if slope >= 0.0 && t > 0.0 && !basis.contains(&i) {
                enter = Some((t, i));
                break;
            }
        }
        let Some((_t, entering)) = enter else {
            return Err(Error::SolverDiverged(iter));
        };
        basis[leave] = entering;
    }
    Err(Error::SolverDiverged(max_iter))
}

fn basis_matrix(x: &DMatrix<f64>, basis: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(basis.len(), x.ncols(), |r, c| x[(basis[r], c)])
}

fn irls_warm_start(x: &DMatrix<f64>, y: &DVector<f64>, theta: f64) -> Result<DVector<f64>> {
    let (n, k) = x.shape();
    let ls = LeastSquares::fit(x, &DMatrix::from_column_slice(n, 1, y.as_slice()))?;
    let mut b: DVector<f64> = ls.coefficients.column(0).into_owned();
    let scale = y.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut eps = 1e-2 * scale;
    for _ in 0..40 {
        let r = y - x * &b;
        let mut xw = x.clone();
        let mut yw = y.clone();
        for i in 0..n {
            let w = (if r[i] < 0.0 { 1.0 - theta } else { theta }) / r[i].abs().max(eps);
            let sw = w.sqrt();
            xw.row_mut(i).scale_mut(sw);
            yw[i] *= sw;
        }
        match LeastSquares::fit(&xw, &DMatrix::from_column_slice(n, 1, yw.as_slice())) {
            Ok(fit) => b = fit.coefficients.column(0).into_owned(),
            Err(_) => break,
        }
        eps = (eps * 0.5).max(1e-8 * scale);
    }
    debug_assert_eq!(b.len(), k);
    Ok(b)
}

/// Chooses `k` observations with the smallest residuals whose design rows are
/// linearly independent.
fn initial_basis(x: &DMatrix<f64>, r: &DVector<f64>) -> Result<Vec<usize>> {
    let (n, k) = x.shape();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| r[i].abs().total_cmp(&r[j].abs()));
    let mut basis = Vec::with_capacity(k);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(k);
    for &i in &order {
        if basis.len() == k {
            break;
        }
        let row: DVector<f64> = x.row(i).transpose();
        let norm0 = row.norm();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = row;
        for q in &ortho {
            let c = q.dot(&v);
            v -= q * c;
        }
        let nv = v.norm();
        if nv > 1e-9 * norm0 {
            ortho.push(v / nv);
            basis.push(i);
        }
    }
    if basis.len() < k {
        return Err(Error::RankDeficient);
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..6).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let fit = ols_fit(&col(&x), &y).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_regressor_has_zero_slope() {
        let x = [-1.0, 1.0, -1.0, 1.0];
        let y = [1.0, 1.0, -1.0, -1.0];
        let fit = ols_fit(&col(&x), &y).unwrap();
        assert!(fit.coefficients[1].abs() < 1e-12);
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(ols_fit(&col(&[1.0, 2.0]), &[1.0, 2.0]), Err(Error::TooFewRows { .. })));
    }

    #[test]
    fn window_rules() {
        let x = DMatrix::from_fn(21, 2, |i, j| ((i * (j + 2)) as f64).sin());
        let y: Vec<f64> = (0..21).map(|i| i as f64).collect();
        assert!(matches!(rolling_ols_arrays(&x, &y, 3), Err(Error::WindowTooSmall { window: 3, variables: 3 })));
        assert!(matches!(rolling_ols_arrays(&x, &y, 22), Err(Error::WindowExceedsSample { .. })));
        let r = rolling_ols_arrays(&x, &y, 4).unwrap();
        assert_eq!(r.windows.len(), 21 - 4 + 1);
    }

    #[test]
    fn paper_window_ranges() {
        assert_eq!(RollingModel::Rq1.default_windows(), vec![4, 5, 6, 7, 8]);
        assert_eq!(RollingModel::Rq2.default_windows(), vec![4, 5, 6, 7, 8]);
        assert_eq!(RollingModel::Rq3.default_windows(), vec![3, 4, 5, 6, 7]);
    }

    #[test]
    fn degenerate_window_is_skipped() {
        let x = [1.0, 1.0, 1.0, 2.0, 3.0, 5.0];
        let y = [0.5, 1.5, 0.7, 2.0, 3.1, 4.0];
        let r = rolling_ols_arrays(&col(&x), &y, 3).unwrap();
        assert_eq!(r.skipped(), 1);
        assert_eq!(r.fits().count(), 3);
    }

    #[test]
    fn median_identity() {
        let y = [7.0, 1.0, 4.0, 9.0, 3.0];
        let fit = quantile_fit(&DMatrix::zeros(5, 0), &y, 0.5).unwrap();
        assert_eq!(fit.coefficients[0], 4.0);
    }

    #[test]
    fn upper_quantile_matches_order_statistic_scan() {
        let y: Vec<f64> = (1..=10).map(f64::from).collect();
        let fit = quantile_fit(&DMatrix::zeros(10, 0), &y, 0.9).unwrap();
        let best = y
            .iter()
            .map(|&c| pinball_loss(y.iter().map(|v| v - c), 0.9))
            .fold(f64::INFINITY, f64::min);
        assert!((fit.pinball_loss - best).abs() < 1e-12);
    }

    #[test]
    fn bad_theta() {
        assert!(quantile_fit(&DMatrix::zeros(3, 0), &[1.0, 2.0, 3.0], 1.0).is_err());
    }
}
