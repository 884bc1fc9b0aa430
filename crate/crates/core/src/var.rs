//! Vector autoregressions: estimation, lag selection, Granger causality,
//! residual diagnostics, fit RMS and impulse responses.

use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, LeastSquares};
use crate::report::{PValue, Significance, TestKind, TestReport, Verdict};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarForm {
    Levels,
    Differences,
}

/// Deterministic regressors of each VAR equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Deterministic {
    Const,
    ConstTrend,
}

impl Deterministic {
    pub fn count(self) -> usize {
        match self {
            Deterministic::Const => 1,
            Deterministic::ConstTrend => 2,
        }
    }
}

/// Regressor matrix `[1, (t), y_{t-1}', …, y_{t-p}']` and targets `y_t` for
/// rows `start..T`.
fn var_design(data: &DMatrix<f64>, p: usize, det: Deterministic, start: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (t_len, k) = data.shape();
    let d = det.count();
    let n = t_len - start;
    let mut x = DMatrix::zeros(n, d + k * p);
    for r in 0..n {
        let t = start + r;
        x[(r, 0)] = 1.0;
        if d == 2 {
            x[(r, 1)] = (t + 1) as f64;
        }
        for l in 1..=p {
            for j in 0..k {
                x[(r, d + (l - 1) * k + j)] = data[(t - l, j)];
            }
        }
    }
    let y = data.rows(start, n).into_owned();
    (x, y)
}

fn difference_rows(data: &DMatrix<f64>) -> DMatrix<f64> {
    let (t, k) = data.shape();
    DMatrix::from_fn(t.saturating_sub(1), k, |i, j| data[(i + 1, j)] - data[(i, j)])
}

/// Lag matrices and innovation covariance: all that impulse responses and
/// variance decompositions need.
#[derive(Debug, Clone, PartialEq)]
pub struct VarDynamics {
    pub lags: Vec<DMatrix<f64>>,
    pub sigma: DMatrix<f64>,
}

impl VarDynamics {
    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn companion(&self) -> DMatrix<f64> {
        companion_matrix(&self.lags, self.dim())
    }
}

pub fn companion_matrix(lags: &[DMatrix<f64>], k: usize) -> DMatrix<f64> {
    let p = lags.len();
    let mut c = DMatrix::zeros(k * p, k * p);
    for (l, a) in lags.iter().enumerate() {
        c.view_mut((0, l * k), (k, k)).copy_from(a);
    }
    for i in k..k * p {
        c[(i, i - k)] = 1.0;
    }
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarFit {
    pub p: usize,
    pub form: VarForm,
    pub deterministic: Deterministic,
    /// Constant term per equation.
    pub intercept: Vec<f64>,
    /// `A_1 … A_p`, each `k × k` with rows = equations.
    pub lags: Vec<DMatrix<f64>>,
    /// Coefficients of the non-constant deterministic terms (`k × (d-1)`).
    pub deterministic_coefficients: DMatrix<f64>,
    /// Full coefficient matrix, regressors × equations.
    pub coefficients: DMatrix<f64>,
    pub std_errors: DMatrix<f64>,
    /// `(T - p) × k`.
    pub residuals: DMatrix<f64>,
    /// Degrees-of-freedom adjusted: `U'U / (T - p - (k p + d))`.
    pub sigma: DMatrix<f64>,
    pub companion: DMatrix<f64>,
    /// Length of the (possibly differenced) series the model was fitted to.
    pub sample_len: usize,
}

impl VarFit {
    pub fn k(&self) -> usize {
        self.intercept.len()
    }

    pub fn nobs(&self) -> usize {
        self.residuals.nrows()
    }

    pub fn dynamics(&self) -> VarDynamics {
        VarDynamics {
            lags: self.lags.clone(),
            sigma: self.sigma.clone(),
        }
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.companion)
    }
}

/// Equation-by-equation OLS of a VAR(p) on the columns of `data` (`T × k`).
pub fn fit_var(data: &DMatrix<f64>, p: usize, form: VarForm, det: Deterministic) -> Result<VarFit> {
    if p == 0 {
        return Err(Error::InvalidArgument("VAR lag order must be at least 1".into()));
    }
    check_finite(data)?;
    let data = match form {
        VarForm::Levels => data.clone(),
        VarForm::Differences => difference_rows(data),
    };
    let (t_len, k) = data.shape();
    let d = det.count();
    let m = d + k * p;
    if t_len <= p || t_len - p <= m {
        return Err(Error::TooFewObservations(format!(
            "VAR({p}) with {k} variables needs more than {} observations, have {t_len}",
            p + m
        )));
    }
    let (x, y) = var_design(&data, p, det, p);
    let ls = LeastSquares::fit(&x, &y)?;
    let n = x.nrows();
    let dof = (n - m) as f64;
    let sigma = {
        let s = ls.residuals.transpose() * &ls.residuals / dof;
        (&s + s.transpose()) * 0.5
    };
    let mut std_errors = DMatrix::zeros(m, k);
    for eq in 0..k {
        for r in 0..m {
            std_errors[(r, eq)] = (ls.xtx_inv[(r, r)] * sigma[(eq, eq)]).sqrt();
        }
    }
    let b = &ls.coefficients;
    let lags: Vec<DMatrix<f64>> = (0..p)
        .map(|l| b.rows(d + l * k, k).transpose())
        .collect();
    let intercept = b.row(0).iter().copied().collect();
    let deterministic_coefficients = b.rows(1, d - 1).transpose();
    let companion = companion_matrix(&lags, k);
    Ok(VarFit {
        p,
        form,
        deterministic: det,
        intercept,
        lags,
        deterministic_coefficients,
        coefficients: ls.coefficients.clone(),
        std_errors,
        residuals: ls.residuals,
        sigma,
        companion,
        sample_len: t_len,
    })
}

fn check_finite(data: &DMatrix<f64>) -> Result<()> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("data has missing or non-finite values".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagCriteria {
    pub lag: usize,
    pub aic: f64,
    pub hq: f64,
    pub sc: f64,
    pub fpe: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagRule {
    /// All four criteria pick the same lag.
    Unanimous,
    /// Criteria disagree; the Schwarz choice is taken.
    ScTiebreak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagSelection {
    pub criteria: Vec<LagCriteria>,
    pub chosen: usize,
    pub rule: LagRule,
    pub aic_choice: usize,
    pub hq_choice: usize,
    pub sc_choice: usize,
    pub fpe_choice: usize,
}

/// AIC, HQ, SC and FPE for lags `1..=p_max` on the common sample that drops
/// the first `p_max` observations.
pub fn select_lag(data: &DMatrix<f64>, p_max: usize, det: Deterministic) -> Result<LagSelection> {
    if p_max == 0 {
        return Err(Error::InvalidArgument("p_max must be at least 1".into()));
    }
    check_finite(data)?;
    let (t_len, k) = data.shape();
    let d = det.count();
    if t_len <= p_max || t_len - p_max <= k * p_max + d {
        return Err(Error::TooFewObservations(format!(
            "lag selection up to {p_max} with {k} variables needs more than {} observations, have {t_len}",
            p_max + k * p_max + d
        )));
    }
    let n = (t_len - p_max) as f64;
    let kf = k as f64;
    let mut criteria = Vec::with_capacity(p_max);
    for p in 1..=p_max {
        let (x, y) = var_design(data, p, det, p_max);
        let ls = LeastSquares::fit(&x, &y)?;
        let sigma = ls.residuals.transpose() * &ls.residuals / n;
        let ln_det = sigma.determinant().ln();
        let params = (p * k * k + k * d) as f64;
        let n_star = (k * p + d) as f64;
        criteria.push(LagCriteria {
            lag: p,
            aic: ln_det + 2.0 * params / n,
            hq: ln_det + 2.0 * n.ln().ln() * params / n,
            sc: ln_det + n.ln() * params / n,
            fpe: ((n + n_star) / (n - n_star)).powf(kf) * sigma.determinant(),
        });
    }
    let argmin = |f: &dyn Fn(&LagCriteria) -> f64| {
        criteria
            .iter()
            .min_by(|a, b| f(a).total_cmp(&f(b)))
            .map(|c| c.lag)
            .unwrap()
    };
    let aic_choice = argmin(&|c| c.aic);
    let hq_choice = argmin(&|c| c.hq);
    let sc_choice = argmin(&|c| c.sc);
    let fpe_choice = argmin(&|c| c.fpe);
    let rule = if aic_choice == sc_choice && hq_choice == sc_choice && fpe_choice == sc_choice {
        LagRule::Unanimous
    } else {
        LagRule::ScTiebreak
    };
    Ok(LagSelection {
        criteria,
        chosen: sc_choice,
        rule,
        aic_choice,
        hq_choice,
        sc_choice,
        fpe_choice,
    })
}

/// Residual sums of squares behind a Granger F-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrangerParts {
    pub rss_restricted: f64,
    pub rss_unrestricted: f64,
    pub restrictions: usize,
    pub dof: usize,
}

/// Block-exclusion F-test: do the `p` lags of `cause` help predict `effect`
/// in the full VAR(p) on `data`?
pub fn granger_test(
    data: &DMatrix<f64>,
    cause: usize,
    effect: usize,
    p: usize,
    det: Deterministic,
    significance: Significance,
) -> Result<TestReport> {
    let parts = granger_parts(data, cause, effect, p, det)?;
    let q = parts.restrictions as f64;
    let dof = parts.dof as f64;
    let f = ((parts.rss_restricted - parts.rss_unrestricted) / q) / (parts.rss_unrestricted / dof);
    let pval = FisherSnedecor::new(q, dof)
        .map(|d| d.sf(f))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(TestReport {
        test: TestKind::GrangerF,
        statistic: f,
        lag_order: Some(p),
        regression: None,
        distribution: format!("F({}, {})", parts.restrictions, parts.dof),
        p_value: PValue::exact(pval),
        critical_values: Vec::new(),
        significance,
        verdict: if pval <= significance.alpha() { Verdict::Reject } else { Verdict::FailToReject },
    })
}

pub fn granger_parts(
    data: &DMatrix<f64>,
    cause: usize,
    effect: usize,
    p: usize,
    det: Deterministic,
) -> Result<GrangerParts> {
    let (t_len, k) = data.shape();
    if cause >= k || effect >= k {
        return Err(Error::InvalidArgument(format!("variable index out of range for {k} series")));
    }
    if cause == effect {
        return Err(Error::InvalidArgument("cause and effect must differ".into()));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("lag order must be at least 1".into()));
    }
    check_finite(data)?;
    let d = det.count();
    let m = d + k * p;
    if t_len <= p || t_len - p <= m {
        return Err(Error::TooFewObservations(format!(
            "Granger test with VAR({p}) on {k} variables needs more than {} observations, have {t_len}",
            p + m
        )));
    }
    let (x, y) = var_design(data, p, det, p);
    let target = y.column(effect).into_owned();
    let unrestricted = LeastSquares::fit_vector(&x, target.as_slice())?;
    let keep: Vec<usize> = (0..m)
        .filter(|&c| c < d || (c - d) % k != cause)
        .collect();
    let xr = x.select_columns(&keep);
    let restricted = LeastSquares::fit_vector(&xr, target.as_slice())?;
    Ok(GrangerParts {
        rss_restricted: restricted.residuals.norm_squared(),
        rss_unrestricted: unrestricted.residuals.norm_squared(),
        restrictions: p,
        dof: x.nrows() - m,
    })
}

/// Cause × effect grid of Granger tests; the diagonal is `None`.
pub fn granger_grid(
    data: &DMatrix<f64>,
    p: usize,
    det: Deterministic,
    significance: Significance,
) -> Result<Vec<Vec<Option<TestReport>>>> {
    let k = data.ncols();
    (0..k)
        .map(|cause| {
            (0..k)
                .map(|effect| {
                    if cause == effect {
                        Ok(None)
                    } else {
                        granger_test(data, cause, effect, p, det, significance).map(Some)
                    }
                })
                .collect()
        })
        .collect()
}

/// Jarque–Bera normality test: `n/6 (S² + K²/4)` with excess kurtosis `K`.
pub fn jarque_bera(residuals: &[f64], significance: Significance) -> Result<TestReport> {
    let n = residuals.len();
    if n < 8 {
        return Err(Error::InsufficientData(format!("Jarque-Bera needs at least 8 observations, have {n}")));
    }
    let nf = n as f64;
    let mean = residuals.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &r in residuals {
        let d = r - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 == 0.0 {
        return Err(Error::InsufficientData("Jarque-Bera on a constant series".into()));
    }
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2) - 3.0;
    let statistic = nf / 6.0 * (skew * skew + kurt * kurt / 4.0);
    Ok(chi_square_report(TestKind::JarqueBera, statistic, 2, significance))
}

fn chi_square_report(test: TestKind, statistic: f64, df: usize, significance: Significance) -> TestReport {
    let p = ChiSquared::new(df as f64).map(|d| d.sf(statistic)).unwrap_or(f64::NAN);
    TestReport {
        test,
        statistic,
        lag_order: None,
        regression: None,
        distribution: format!("chi-square({df})"),
        p_value: PValue::exact(p),
        critical_values: Vec::new(),
        significance,
        verdict: if p <= significance.alpha() { Verdict::Reject } else { Verdict::FailToReject },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiJarqueBera {
    pub per_series: Vec<TestReport>,
    /// Sum of the per-series statistics against chi-square(2k); exact when
    /// the residual series are independent.
    pub combined: TestReport,
}

/// Jarque–Bera on every column of a residual matrix.
pub fn jarque_bera_multi(residuals: &DMatrix<f64>, significance: Significance) -> Result<MultiJarqueBera> {
    let per_series = (0..residuals.ncols())
        .map(|j| jarque_bera(residuals.column(j).as_slice(), significance))
        .collect::<Result<Vec<_>>>()?;
    let total = per_series.iter().map(|r| r.statistic).sum();
    let combined = chi_square_report(TestKind::JarqueBera, total, 2 * per_series.len(), significance);
    Ok(MultiJarqueBera { per_series, combined })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmsReport {
    pub rms: f64,
    /// Series length `N`.
    pub n: usize,
    /// Model order `L`.
    pub order: usize,
}

/// `sqrt(Σ (x̌_i − x'_i)² / (N − L))` over the `N − L` fitted points.
pub fn rms(observed: &[f64], predicted: &[f64], n: usize, order: usize) -> Result<RmsReport> {
    let denom = n as i64 - order as i64;
    if denom <= 0 {
        return Err(Error::DegenerateDenominator(denom));
    }
    if observed.len() != predicted.len() || observed.len() != denom as usize {
        return Err(Error::InvalidArgument(format!(
            "expected {denom} fitted points, got {} observed and {} predicted",
            observed.len(),
            predicted.len()
        )));
    }
    let ss: f64 = observed.iter().zip(predicted).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(RmsReport {
        rms: (ss / denom as f64).sqrt(),
        n,
        order,
    })
}

/// Per-equation RMS of a fitted VAR: the last `N − p` observations against
/// their one-step in-sample predictions.
pub fn model_rms(fit: &VarFit) -> Result<Vec<RmsReport>> {
    let n = fit.sample_len;
    (0..fit.k())
        .map(|eq| {
            let resid = fit.residuals.column(eq);
            let zeros = vec![0.0; resid.len()];
            rms(resid.as_slice(), &zeros, n, fit.p)
        })
        .collect()
}

/// Moving-average coefficients `Ψ_0 = I`, `Ψ_h = Σ_l A_l Ψ_{h-l}`.
pub fn ma_coefficients(lags: &[DMatrix<f64>], k: usize, horizon: usize) -> Vec<DMatrix<f64>> {
    let mut psi: Vec<DMatrix<f64>> = Vec::with_capacity(horizon + 1);
    psi.push(DMatrix::identity(k, k));
    for h in 1..=horizon {
        let mut acc = DMatrix::zeros(k, k);
        for (l, a) in lags.iter().enumerate() {
            if h > l {
                acc += a * &psi[h - l - 1];
            }
        }
        psi.push(acc);
    }
    psi
}

/// `Ψ_h (I − A_0)^{-1}` for a strictly lower-triangular contemporaneous
/// matrix `A_0`: responses to unit structural shocks.
pub fn structural_responses(
    lags: &[DMatrix<f64>],
    contemporaneous: &DMatrix<f64>,
    horizon: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let k = contemporaneous.nrows();
    let impact = (DMatrix::identity(k, k) - contemporaneous)
        .try_inverse()
        .ok_or(Error::SingularContemporaneousMatrix)?;
    Ok(ma_coefficients(lags, k, horizon).into_iter().map(|psi| psi * &impact).collect())
}

/// Strictly lower-triangular `A_0` with `(I − A_0)^{-1}` the unit lower
/// triangular factor of `Σ = L D L'`.
pub fn recursive_contemporaneous(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = sigma.nrows();
    let chol = sigma.clone().cholesky().ok_or_else(|| {
        Error::InvalidArgument("innovation covariance is not positive definite".into())
    })?;
    let p = chol.l();
    let unit = DMatrix::from_fn(k, k, |i, j| p[(i, j)] / p[(j, j)]);
    let inv = unit.try_inverse().ok_or(Error::SingularContemporaneousMatrix)?;
    Ok(DMatrix::identity(k, k) - inv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IrfKind {
    /// `Ψ_h Σ e_j / sqrt(σ_jj)`, order invariant.
    Generalized,
    /// `Ψ_h (I − A_0)^{-1}` with `A_0` from the recursive factor of `Σ`.
    RecursiveStructural,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponses {
    /// `responses[h][(i, j)]`: response of variable `i` at horizon `h` to a
    /// shock in `j`.
    pub responses: Vec<DMatrix<f64>>,
    pub spectral_radius: f64,
    /// Set when the companion matrix has an eigenvalue outside the unit
    /// circle; responses are still computed.
    pub explosive: bool,
}

pub fn irf(dynamics: &VarDynamics, horizon: usize, kind: IrfKind) -> Result<ImpulseResponses> {
    let k = dynamics.dim();
    let responses = match kind {
        IrfKind::Generalized => {
            let psi = ma_coefficients(&dynamics.lags, k, horizon);
            let mut scaled = dynamics.sigma.clone();
            for j in 0..k {
                let s = dynamics.sigma[(j, j)].sqrt();
                scaled.column_mut(j).scale_mut(1.0 / s);
            }
            psi.into_iter().map(|m| m * &scaled).collect()
        }
        IrfKind::RecursiveStructural => {
            let a0 = recursive_contemporaneous(&dynamics.sigma)?;
            structural_responses(&dynamics.lags, &a0, horizon)?
        }
    };
    let rho = spectral_radius(&dynamics.companion());
    Ok(ImpulseResponses {
        responses,
        spectral_radius: rho,
        explosive: rho > 1.0,
    })
}
