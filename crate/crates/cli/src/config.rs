//! Analysis configuration: file format, defaults and flag overrides.

use serde::{Deserialize, Serialize};
use spillover_core::connectedness::{default_theta_grid, DEFAULT_HORIZON, DEFAULT_QVAR_LAG};
use spillover_core::johansen::JohansenDeterministic;
use spillover_core::panel::{CsvSchema, Transform, VariableRole};
use spillover_core::regression::RollingModel;
use spillover_core::report::Significance;
use spillover_core::stationarity::StationaritySettings;
use spillover_core::var::{Deterministic, VarForm};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub input: InputConfig,
    /// Applied in order to the raw panel before any stage runs.
    pub transforms: Vec<Transform>,
    pub stationarity: StationaritySettings,
    pub rolling: RollingConfig,
    pub var: VarConfig,
    pub johansen: JohansenConfig,
    pub connectedness: ConnectednessConfig,
    pub output: OutputConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            input: InputConfig::default(),
            transforms: vec![Transform::Log {
                variables: VariableRole::SYSTEM.to_vec(),
            }],
            stationarity: StationaritySettings::default(),
            rolling: RollingConfig::default(),
            var: VarConfig::default(),
            johansen: JohansenConfig::default(),
            connectedness: ConnectednessConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub path: Option<PathBuf>,
    pub schema: CsvSchema,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            path: None,
            schema: CsvSchema::offshoring_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RollingSpec {
    pub model: RollingModel,
    pub windows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RollingConfig {
    pub models: Vec<RollingSpec>,
}

impl Default for RollingConfig {
    fn default() -> Self {
        RollingConfig {
            models: RollingModel::ALL
                .iter()
                .map(|&model| RollingSpec {
                    model,
                    windows: model.default_windows(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarConfig {
    pub form: VarForm,
    pub p_max: usize,
    /// Fixed lag; `None` selects by information criteria up to `p_max`.
    pub p: Option<usize>,
    pub deterministic: Deterministic,
    pub significance: Significance,
    pub horizon: usize,
    pub variables: Vec<VariableRole>,
}

impl Default for VarConfig {
    fn default() -> Self {
        VarConfig {
            form: VarForm::Differences,
            p_max: 2,
            p: None,
            deterministic: Deterministic::Const,
            significance: Significance::Five,
            horizon: DEFAULT_HORIZON,
            variables: VariableRole::SYSTEM.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JohansenConfig {
    pub deterministic: JohansenDeterministic,
    pub p: Option<usize>,
    pub p_max: usize,
    pub variables: Vec<VariableRole>,
}

impl Default for JohansenConfig {
    fn default() -> Self {
        JohansenConfig {
            deterministic: JohansenDeterministic::RestrictedConstant,
            p: None,
            p_max: 2,
            variables: VariableRole::SYSTEM.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConnectednessConfig {
    /// One set of tables per variable, across all entities.
    pub variables: Vec<VariableRole>,
    /// Quantiles of the full connectedness tables.
    pub quantiles: Vec<f64>,
    /// Quantile grid of the sweep tables.
    pub grid: Vec<f64>,
    pub horizon: usize,
    pub p: usize,
    /// First-difference the (transformed) series before fitting.
    pub difference: bool,
    /// Rolling window for per-window NPDC reports; `None` skips them.
    pub window: Option<usize>,
}

impl Default for ConnectednessConfig {
    fn default() -> Self {
        ConnectednessConfig {
            variables: vec![VariableRole::Iep, VariableRole::Fdi],
            quantiles: vec![0.1, 0.25, 0.5],
            grid: default_theta_grid(),
            horizon: DEFAULT_HORIZON,
            p: DEFAULT_QVAR_LAG,
            difference: true,
            window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Dot,
    Txt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("spillover-out"),
            formats: vec![Format::Csv, Format::Json, Format::Dot, Format::Txt],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

impl AnalysisConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut c = AnalysisConfig::default();
        c.connectedness.window = Some(8);
        c.var.p = Some(1);
        c.input.path = Some("data/x.csv".into());
        let back: AnalysisConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c: AnalysisConfig = serde_json::from_str(r#"{"var": {"p_max": 3}}"#).unwrap();
        assert_eq!(c.var.p_max, 3);
        assert_eq!(c.connectedness, ConnectednessConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<AnalysisConfig>(r#"{"colour": 1}"#).is_err());
    }
}
