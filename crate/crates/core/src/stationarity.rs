//! Augmented Dickey–Fuller and KPSS tests, and the combined N/S verdict.

use crate::error::{Error, Result};
use crate::linalg::LeastSquares;
use crate::report::{
    CriticalValue, PValue, RegressionForm, Significance, StarLevel, TestKind, TestReport, Verdict,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// How the number of lagged differences in the ADF regression is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdfLag {
    /// Minimum AIC over `0..=max` on a common sample.
    Aic { max: usize },
    Fixed(usize),
}

impl AdfLag {
    /// Schwert's rule `floor(12 (T/100)^(1/4))` as an AIC search bound.
    pub fn schwert(len: usize) -> Self {
        AdfLag::Aic {
            max: (12.0 * (len as f64 / 100.0).powf(0.25)).floor() as usize,
        }
    }

    fn max(self) -> usize {
        match self {
            AdfLag::Aic { max } | AdfLag::Fixed(max) => max,
        }
    }
}

/// Long-run variance bandwidth for KPSS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    /// `⌊4 (T/100)^{1/4}⌋`.
    Short,
    /// `⌊12 (T/100)^{1/4}⌋`.
    Long,
    /// Data-dependent Newey–West style selection (Hobijn, Franses and Ooms).
    Auto,
    Fixed(usize),
}

// MacKinnon (2010) response surfaces, one regressor: cv = b0 + b1/T + b2/T² + b3/T³.
const ADF_CV_C: [(Significance, [f64; 4]); 3] = [
    (Significance::Ten, [-2.56677, -1.5384, -2.809, 0.0]),
    (Significance::Five, [-2.86154, -2.8903, -4.234, -40.040]),
    (Significance::One, [-3.43035, -6.5393, -16.786, -79.433]),
];
const ADF_CV_CT: [(Significance, [f64; 4]); 3] = [
    (Significance::Ten, [-3.12705, -2.5856, -3.925, -22.380]),
    (Significance::Five, [-3.41049, -4.3904, -9.036, -45.374]),
    (Significance::One, [-3.95877, -9.0531, -28.428, -134.155]),
];

// MacKinnon (1994) p-value approximation for one regressor:
// p = Φ(Σ c_i τ^i), with separate polynomials below/above τ*.
struct AdfPSurface {
    tau_star: f64,
    tau_min: f64,
    tau_max: f64,
    small: [f64; 3],
    large: [f64; 4],
}

const ADF_P_C: AdfPSurface = AdfPSurface {
    tau_star: -1.61,
    tau_min: -18.83,
    tau_max: 2.74,
    small: [2.1659, 1.4412, 0.038269],
    large: [1.7339, 0.93202, -0.12745, -0.010368],
};
const ADF_P_CT: AdfPSurface = AdfPSurface {
    tau_star: -2.89,
    tau_min: -16.18,
    tau_max: 0.7,
    small: [3.2512, 1.6047, 0.049588],
    large: [2.5261, 0.61654, -0.37956, -0.060285],
};

// KPSS asymptotic critical values (level, trend) at 10%, 5%, 2.5%, 1%.
const KPSS_LEVEL: [(f64, f64); 4] = [(0.10, 0.347), (0.05, 0.463), (0.025, 0.574), (0.01, 0.739)];
const KPSS_TREND: [(f64, f64); 4] = [(0.10, 0.119), (0.05, 0.146), (0.025, 0.176), (0.01, 0.216)];

fn significance_of(p: f64) -> Option<Significance> {
    Significance::ALL.into_iter().find(|s| (s.alpha() - p).abs() < 1e-12)
}

/// ADF critical values for `nobs` regression observations.
pub fn adf_critical_values(form: RegressionForm, nobs: usize) -> Vec<CriticalValue> {
    let table = match form {
        RegressionForm::Constant => &ADF_CV_C,
        RegressionForm::ConstantTrend => &ADF_CV_CT,
    };
    let t = nobs as f64;
    table
        .iter()
        .map(|(level, b)| CriticalValue {
            level: *level,
            value: b[0] + b[1] / t + b[2] / (t * t) + b[3] / (t * t * t),
        })
        .collect()
}

/// Approximate asymptotic ADF p-value from the response surface.
pub fn adf_p_value(statistic: f64, form: RegressionForm) -> f64 {
    let s = match form {
        RegressionForm::Constant => &ADF_P_C,
        RegressionForm::ConstantTrend => &ADF_P_CT,
    };
    if statistic > s.tau_max {
        return 1.0;
    }
    if statistic < s.tau_min {
        return 0.0;
    }
    let poly = |c: &[f64]| c.iter().rev().fold(0.0, |acc, &ci| acc * statistic + ci);
    let z = if statistic <= s.tau_star { poly(&s.small) } else { poly(&s.large) };
    Normal::standard().cdf(z)
}

pub fn kpss_critical_values(form: RegressionForm) -> Vec<CriticalValue> {
    kpss_table(form)
        .iter()
        .filter_map(|&(p, v)| significance_of(p).map(|level| CriticalValue { level, value: v }))
        .collect()
}

fn kpss_table(form: RegressionForm) -> &'static [(f64, f64); 4] {
    match form {
        RegressionForm::Constant => &KPSS_LEVEL,
        RegressionForm::ConstantTrend => &KPSS_TREND,
    }
}

fn check_finite(series: &[f64]) -> Result<()> {
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("series has missing or non-finite values".into()));
    }
    Ok(())
}

/// Builds the ADF regression `Δy_t = γ y_{t-1} + Σ δ_i Δy_{t-i} + det` for
/// target rows `first..` of the differenced series.
fn adf_design(y: &[f64], lags: usize, first: usize, form: RegressionForm) -> (DMatrix<f64>, Vec<f64>) {
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let rows: Vec<usize> = (first..dy.len()).collect();
    let det = match form {
        RegressionForm::Constant => 1,
        RegressionForm::ConstantTrend => 2,
    };
    let cols = 1 + lags + det;
    let mut x = DMatrix::zeros(rows.len(), cols);
    let mut target = Vec::with_capacity(rows.len());
    for (r, &t) in rows.iter().enumerate() {
        x[(r, 0)] = y[t];
        for i in 1..=lags {
            x[(r, i)] = dy[t - i];
        }
        x[(r, 1 + lags)] = 1.0;
        if det == 2 {
            x[(r, 2 + lags)] = (t + 1) as f64;
        }
        target.push(dy[t]);
    }
    (x, target)
}

/// Augmented Dickey–Fuller test of a unit root.
pub fn adf_test(
    series: &[f64],
    lag: AdfLag,
    form: RegressionForm,
    significance: Significance,
) -> Result<TestReport> {
    check_finite(series)?;
    let max_lag = lag.max();
    let needed = max_lag + 10;
    if series.len() < needed {
        return Err(Error::SeriesTooShort {
            needed,
            available: series.len(),
        });
    }
    let chosen = match lag {
        AdfLag::Fixed(l) => l,
        AdfLag::Aic { max } => {
            let mut best = (f64::INFINITY, 0);
            for l in 0..=max {
                let (x, target) = adf_design(series, l, max, form);
                let n = target.len() as f64;
                let ls = LeastSquares::fit_vector(&x, &target).map_err(|_| Error::SingularRegression)?;
                let rss = ls.residuals.norm_squared();
                let aic = n * (rss / n).ln() + 2.0 * x.ncols() as f64;
                if aic < best.0 {
                    best = (aic, l);
                }
            }
            best.1
        }
    };
    let (x, target) = adf_design(series, chosen, chosen, form);
    let fit = crate::regression::least_squares(&x, &target, true).map_err(|e| match e {
        Error::RankDeficient => Error::SingularRegression,
        other => other,
    })?;
    let statistic = fit.t_statistic(0);
    let nobs = fit.n_obs;
    let critical_values = adf_critical_values(form, nobs);
    let cv = |s: Significance| critical_values.iter().find(|c| c.level == s).unwrap().value;
    // Lower statistic = stronger rejection.
    let bracket = if statistic <= cv(Significance::One) {
        PValue::bracket(0.0, 0.01)
    } else if statistic <= cv(Significance::Five) {
        PValue::bracket(0.01, 0.05)
    } else if statistic <= cv(Significance::Ten) {
        PValue::bracket(0.05, 0.10)
    } else {
        PValue::bracket(0.10, 1.0)
    };
    let verdict = if statistic <= cv(significance) { Verdict::Reject } else { Verdict::FailToReject };
    Ok(TestReport {
        test: TestKind::Adf,
        statistic,
        lag_order: Some(chosen),
        regression: Some(form),
        distribution: format!("Dickey-Fuller ({nobs} obs, MacKinnon response surface)"),
        p_value: bracket.with_estimate(adf_p_value(statistic, form)),
        critical_values,
        significance,
        verdict,
    })
}

fn kpss_auto_bandwidth(resid: &[f64]) -> usize {
    let n = resid.len();
    let nf = n as f64;
    let cov_lags = nf.powf(2.0 / 9.0) as usize;
    let mut s0 = resid.iter().map(|e| e * e).sum::<f64>() / nf;
    let mut s1 = 0.0;
    for i in 1..=cov_lags.min(n - 1) {
        let prod: f64 = resid[i..].iter().zip(&resid[..n - i]).map(|(a, b)| a * b).sum::<f64>() / (nf / 2.0);
        s0 += prod;
        s1 += i as f64 * prod;
    }
    let s_hat = s1 / s0;
    let gamma = 1.1447 * (s_hat * s_hat).powf(1.0 / 3.0);
    let lags = (gamma * nf.powf(1.0 / 3.0)) as usize;
    lags.min(n - 1)
}

/// KPSS test of (level or trend) stationarity; rejection means non-stationary.
pub fn kpss_test(
    series: &[f64],
    form: RegressionForm,
    bandwidth: Bandwidth,
    significance: Significance,
) -> Result<TestReport> {
    check_finite(series)?;
    let n = series.len();
    if n < 10 {
        return Err(Error::SeriesTooShort { needed: 10, available: n });
    }
    let resid: Vec<f64> = match form {
        RegressionForm::Constant => {
            let mean = series.iter().sum::<f64>() / n as f64;
            series.iter().map(|v| v - mean).collect()
        }
        RegressionForm::ConstantTrend => {
            let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { (i + 1) as f64 });
            LeastSquares::fit_vector(&x, series)?.residuals.column(0).iter().copied().collect()
        }
    };
    let lags = match bandwidth {
        Bandwidth::Short => ((4.0 * (n as f64 / 100.0).powf(0.25)) as usize).min(n - 1),
        Bandwidth::Long => ((12.0 * (n as f64 / 100.0).powf(0.25)) as usize).min(n - 1),
        Bandwidth::Auto => kpss_auto_bandwidth(&resid),
        Bandwidth::Fixed(l) => l.min(n - 1),
    };
    let nf = n as f64;
    let mut lrv = resid.iter().map(|e| e * e).sum::<f64>() / nf;
    for j in 1..=lags {
        let gamma: f64 = resid[j..].iter().zip(&resid[..n - j]).map(|(a, b)| a * b).sum::<f64>() / nf;
        lrv += 2.0 * (1.0 - j as f64 / (lags as f64 + 1.0)) * gamma;
    }
    let mut partial = 0.0;
    let mut eta = 0.0;
    for e in &resid {
        partial += e;
        eta += partial * partial;
    }
    let statistic = eta / (nf * nf * lrv);

    let table = kpss_table(form);
    let (p_value, estimate) = if statistic >= table[3].1 {
        (PValue::bracket(0.0, 0.01), None)
    } else if statistic < table[0].1 {
        (PValue::bracket(0.10, 1.0), None)
    } else {
        let i = (0..3).find(|&i| statistic < table[i + 1].1).unwrap();
        let (p_hi, c_lo) = table[i];
        let (p_lo, c_hi) = table[i + 1];
        let w = (statistic - c_lo) / (c_hi - c_lo);
        (PValue::bracket(p_lo, p_hi), Some(p_hi + w * (p_lo - p_hi)))
    };
    let p_value = match estimate {
        Some(p) => p_value.with_estimate(p),
        None => p_value,
    };
    let critical_values = kpss_critical_values(form);
    let cv = critical_values.iter().find(|c| c.level == significance).unwrap().value;
    let verdict = if statistic > cv { Verdict::Reject } else { Verdict::FailToReject };
    Ok(TestReport {
        test: TestKind::Kpss,
        statistic,
        lag_order: Some(lags),
        regression: Some(form),
        distribution: match form {
            RegressionForm::Constant => "KPSS level table".into(),
            RegressionForm::ConstantTrend => "KPSS trend table".into(),
        },
        p_value,
        critical_values,
        significance,
        verdict,
    })
}

/// Combined stationarity call in table notation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Combined {
    /// Stationarity not supported.
    N,
    /// Stationarity supported.
    S,
    /// The two tests disagree.
    TrendStationary,
}

impl Combined {
    pub fn code(self) -> &'static str {
        match self {
            Combined::N => "N",
            Combined::S => "S",
            Combined::TrendStationary => "TS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityVerdict {
    pub adf: TestReport,
    pub kpss: TestReport,
    pub combined: Combined,
    pub stars: StarLevel,
}

impl StationarityVerdict {
    /// Cell text such as `N*`.
    pub fn cell(&self) -> String {
        format!("{}{}", self.combined.code(), self.stars)
    }
}

/// Combines an ADF and a KPSS report on the same series.
///
/// Both non-stationary → `N`; both stationary → `S`; any disagreement →
/// trend-stationary. The star level comes from the smaller of the two p
/// estimates (stationarity scale: · 0.1, * 0.05, ** 0.01, *** 0.005).
pub fn classify(adf: TestReport, kpss: TestReport) -> StationarityVerdict {
    let adf_stationary = adf.verdict.rejected();
    let kpss_stationary = !kpss.verdict.rejected();
    let combined = match (adf_stationary, kpss_stationary) {
        (false, false) => Combined::N,
        (true, true) => Combined::S,
        _ => Combined::TrendStationary,
    };
    let p = adf.p_value.best().min(kpss.p_value.best());
    StationarityVerdict {
        stars: StarLevel::stationarity(p),
        adf,
        kpss,
        combined,
    }
}

/// Settings for [`assess`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaritySettings {
    pub form: RegressionForm,
    /// `None` selects Schwert's bound with AIC.
    pub adf_lag: Option<AdfLag>,
    pub bandwidth: Bandwidth,
    pub significance: Significance,
}

impl Default for StationaritySettings {
    fn default() -> Self {
        StationaritySettings {
            form: RegressionForm::Constant,
            adf_lag: None,
            bandwidth: Bandwidth::Short,
            significance: Significance::Five,
        }
    }
}

/// Runs both tests and classifies the series.
pub fn assess(series: &[f64], settings: &StationaritySettings) -> Result<StationarityVerdict> {
    let lag = settings.adf_lag.unwrap_or_else(|| {
        let AdfLag::Aic { max } = AdfLag::schwert(series.len()) else { unreachable!() };
        // Short annual series cannot afford Schwert's bound.
        AdfLag::Aic { max: max.min(series.len().saturating_sub(10)) }
    });
    let adf = adf_test(series, lag, settings.form, settings.significance)?;
    let kpss = kpss_test(series, settings.form, settings.bandwidth, settings.significance)?;
    Ok(classify(adf, kpss))
}
