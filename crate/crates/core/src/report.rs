//! Generic hypothesis-test results shared by every test in the crate.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Adf,
    Kpss,
    GrangerF,
    JarqueBera,
    JohansenTrace,
}

/// Deterministic terms of a unit-root or stationarity regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressionForm {
    Constant,
    ConstantTrend,
}

/// Nominal significance level at which a verdict is issued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Significance {
    #[serde(rename = "10%")]
    Ten,
    #[serde(rename = "5%")]
    Five,
    #[serde(rename = "1%")]
    One,
}

impl Significance {
    pub const ALL: [Significance; 3] = [Significance::Ten, Significance::Five, Significance::One];

    pub fn alpha(self) -> f64 {
        match self {
            Significance::Ten => 0.10,
            Significance::Five => 0.05,
            Significance::One => 0.01,
        }
    }
}

impl fmt::Display for Significance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Significance::Ten => f.write_str("10%"),
            Significance::Five => f.write_str("5%"),
            Significance::One => f.write_str("1%"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Reject,
    FailToReject,
}

impl Verdict {
    pub fn rejected(self) -> bool {
        self == Verdict::Reject
    }
}

/// A p-value known exactly, or only up to the bracket between two tabulated
/// critical values. `estimate` is an interpolated value when one is available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValue {
    pub lower: f64,
    pub upper: f64,
    pub estimate: Option<f64>,
}

impl PValue {
    pub fn exact(p: f64) -> Self {
        let p = p.clamp(0.0, 1.0);
        PValue {
            lower: p,
            upper: p,
            estimate: Some(p),
        }
    }

    pub fn bracket(lower: f64, upper: f64) -> Self {
        PValue {
            lower,
            upper,
            estimate: None,
        }
    }

    pub fn with_estimate(mut self, p: f64) -> Self {
        self.estimate = Some(p.clamp(0.0, 1.0));
        self
    }

    /// Best available point value: the estimate, else the bracket's upper end.
    pub fn best(&self) -> f64 {
        self.estimate.unwrap_or(self.upper)
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

impl fmt::Display for PValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_exact() {
            write!(f, "{:.5}", self.lower)
        } else if self.lower <= 0.0 {
            write!(f, "<{}", self.upper)
        } else if self.upper >= 1.0 {
            write!(f, ">{}", self.lower)
        } else {
            write!(f, "[{}, {}]", self.lower, self.upper)
        }
    }
}

/// One tabulated critical value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub level: Significance,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: TestKind,
    pub statistic: f64,
    pub lag_order: Option<usize>,
    pub regression: Option<RegressionForm>,
    /// Reference distribution, e.g. `F(2, 15)` or `KPSS level table`.
    pub distribution: String,
    pub p_value: PValue,
    /// Ordered from 10% to 1%.
    pub critical_values: Vec<CriticalValue>,
    pub significance: Significance,
    pub verdict: Verdict,
}

impl TestReport {
    pub fn critical_value(&self, level: Significance) -> Option<f64> {
        self.critical_values
            .iter()
            .find(|c| c.level == level)
            .map(|c| c.value)
    }

    pub fn rejects_at(&self, level: Significance) -> bool {
        self.p_value.best() <= level.alpha()
    }
}

/// Significance markers used in the rendered tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StarLevel {
    None,
    Dot,
    One,
    Two,
    Three,
}

impl StarLevel {
    /// Stationarity-table scale: · ≤ 0.1, * ≤ 0.05, ** ≤ 0.01, *** ≤ 0.005.
    pub fn stationarity(p: f64) -> Self {
        if p <= 0.005 {
            StarLevel::Three
        } else if p <= 0.01 {
            StarLevel::Two
        } else if p <= 0.05 {
            StarLevel::One
        } else if p <= 0.1 {
            StarLevel::Dot
        } else {
            StarLevel::None
        }
    }

    /// Conventional scale: * ≤ 0.1, ** ≤ 0.05, *** ≤ 0.01.
    pub fn conventional(p: f64) -> Self {
        if p <= 0.01 {
            StarLevel::Three
        } else if p <= 0.05 {
            StarLevel::Two
        } else if p <= 0.1 {
            StarLevel::One
        } else {
            StarLevel::None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StarLevel::None => "",
            StarLevel::Dot => "·",
            StarLevel::One => "*",
            StarLevel::Two => "**",
            StarLevel::Three => "***",
        }
    }
}

impl fmt::Display for StarLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
