//! Multi-country annual panels: ingestion, alignment, transforms and
//! descriptive statistics.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

/// Role of a variable in the offshoring system.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VariableRole {
    /// Net FDI inflows.
    Fdi,
    /// Technology readiness (ICT share of intermediate imports).
    Trd,
    /// Innovation (patent applications).
    Inv,
    /// Infrastructure (industry value added).
    Ifr,
    /// Intermediate imports.
    Iep,
    Other(String),
}

impl VariableRole {
    /// The five roles of the offshoring system, in equation order.
    pub const SYSTEM: [VariableRole; 5] = [
        VariableRole::Fdi,
        VariableRole::Trd,
        VariableRole::Inv,
        VariableRole::Ifr,
        VariableRole::Iep,
    ];

    pub fn tag(&self) -> &str {
        match self {
            VariableRole::Fdi => "fdi",
            VariableRole::Trd => "trd",
            VariableRole::Inv => "inv",
            VariableRole::Ifr => "ifr",
            VariableRole::Iep => "iep",
            VariableRole::Other(name) => name,
        }
    }

    /// Human-readable label used in table headers.
    pub fn label(&self) -> &str {
        match self {
            VariableRole::Fdi => "FDI",
            VariableRole::Trd => "Technology",
            VariableRole::Inv => "Innovation",
            VariableRole::Ifr => "Infrastructure",
            VariableRole::Iep => "Intermediate imports",
            VariableRole::Other(name) => name,
        }
    }
}

impl FromStr for VariableRole {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "fdi" => VariableRole::Fdi,
            "trd" => VariableRole::Trd,
            "inv" => VariableRole::Inv,
            "ifr" => VariableRole::Ifr,
            "iep" => VariableRole::Iep,
            _ => VariableRole::Other(s.trim().to_string()),
        })
    }
}

impl fmt::Display for VariableRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl Serialize for VariableRole {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for VariableRole {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse().expect("infallible"))
    }
}

/// One annual series. Missing entries hold `NaN` and are flagged in the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    years: Vec<i32>,
    values: Vec<f64>,
    missing: Vec<bool>,
}

impl Series {
    pub fn new(start_year: i32, values: Vec<Option<f64>>) -> Self {
        let years = (0..values.len() as i32).map(|i| start_year + i).collect();
        let missing: Vec<bool> = values
            .iter()
            .map(|v| !matches!(v, Some(x) if x.is_finite()))
            .collect();
        let values = values
            .into_iter()
            .map(|v| v.filter(|x| x.is_finite()).unwrap_or(f64::NAN))
            .collect();
        Series {
            years,
            values,
            missing,
        }
    }

    pub fn complete(start_year: i32, values: &[f64]) -> Self {
        Self::new(start_year, values.iter().map(|&v| Some(v)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing_mask(&self) -> &[bool] {
        &self.missing
    }

    pub fn is_complete(&self) -> bool {
        !self.missing.iter().any(|&m| m)
    }

    pub fn observed(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.missing)
            .filter(|(_, &m)| !m)
            .map(|(&v, _)| v)
    }
}

/// A recorded transform; replaying the log on the raw panel reproduces the
/// transformed one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Transform {
    Log { variables: Vec<VariableRole> },
    /// `ln(x + offset)`; an explicit opt-in for series with non-positive values.
    OffsetLog {
        variables: Vec<VariableRole>,
        offset: f64,
    },
    Difference { order: usize },
}

/// Aligned panel: every series shares the same year index.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    entities: Vec<String>,
    variables: Vec<VariableRole>,
    years: Vec<i32>,
    // entity-major: series[e * variables.len() + v]
    series: Vec<Series>,
    transforms: Vec<Transform>,
}

impl Panel {
    /// Builds a panel from `data[entity][variable][t]`; `None`/non-finite
    /// entries are missing.
    pub fn new(
        entities: Vec<String>,
        variables: Vec<VariableRole>,
        start_year: i32,
        data: Vec<Vec<Vec<Option<f64>>>>,
    ) -> Result<Self> {
        if entities.is_empty() || variables.is_empty() {
            return Err(Error::EmptyPanel);
        }
        if data.len() != entities.len() || data.iter().any(|d| d.len() != variables.len()) {
            return Err(Error::InvalidArgument("data shape does not match entities × variables".into()));
        }
        let t = data[0][0].len();
        if t == 0 {
            return Err(Error::EmptyPanel);
        }
        if data.iter().flatten().any(|s| s.len() != t) {
            return Err(Error::InvalidArgument("series lengths differ".into()));
        }
        let series = data
            .into_iter()
            .flatten()
            .map(|s| Series::new(start_year, s))
            .collect();
        Ok(Panel {
            entities,
            variables,
            years: (0..t as i32).map(|i| start_year + i).collect(),
            series,
            transforms: Vec::new(),
        })
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn variables(&self) -> &[VariableRole] {
        &self.variables
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn entity_index(&self, entity: &str) -> Result<usize> {
        self.entities
            .iter()
            .position(|e| e == entity)
            .ok_or_else(|| Error::UnknownEntity(entity.to_string()))
    }

    pub fn variable_index(&self, variable: &VariableRole) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == variable)
            .ok_or_else(|| Error::UnknownVariable(variable.to_string()))
    }

    pub fn series(&self, entity: &str, variable: &VariableRole) -> Result<&Series> {
        let e = self.entity_index(entity)?;
        let v = self.variable_index(variable)?;
        Ok(&self.series[e * self.variables.len() + v])
    }

    fn complete_values(&self, e: usize, v: usize) -> Result<&[f64]> {
        let s = &self.series[e * self.variables.len() + v];
        if !s.is_complete() {
            return Err(Error::IncompleteSeries {
                entity: self.entities[e].clone(),
                variable: self.variables[v].to_string(),
            });
        }
        Ok(s.values())
    }

    /// `T × k` matrix of one entity's variables, in the requested order.
    /// Errors if any selected series has a missing entry.
    pub fn slice(&self, entity: &str, variables: &[VariableRole]) -> Result<DMatrix<f64>> {
        let e = self.entity_index(entity)?;
        let mut out = DMatrix::zeros(self.len(), variables.len());
        for (j, var) in variables.iter().enumerate() {
            let v = self.variable_index(var)?;
            out.column_mut(j).copy_from_slice(self.complete_values(e, v)?);
        }
        Ok(out)
    }

    /// `T × n` matrix of one variable across entities (columns follow
    /// `entities`).
    pub fn cross_section(&self, variable: &VariableRole, entities: &[String]) -> Result<DMatrix<f64>> {
        let v = self.variable_index(variable)?;
        let mut out = DMatrix::zeros(self.len(), entities.len());
        for (j, name) in entities.iter().enumerate() {
            let e = self.entity_index(name)?;
            out.column_mut(j).copy_from_slice(self.complete_values(e, v)?);
        }
        Ok(out)
    }

    fn map_series<F>(&self, variables: &[VariableRole], mut f: F) -> Result<Vec<Series>>
    where
        F: FnMut(&str, &VariableRole, i32, f64) -> Result<f64>,
    {
        for var in variables {
            self.variable_index(var)?;
        }
        let nv = self.variables.len();
        let mut out = self.series.clone();
        for (idx, s) in out.iter_mut().enumerate() {
            let var = &self.variables[idx % nv];
            if !variables.contains(var) {
                continue;
            }
            let entity = &self.entities[idx / nv];
            for i in 0..s.values.len() {
                if !s.missing[i] {
                    s.values[i] = f(entity, var, s.years[i], s.values[i])?;
                }
            }
        }
        Ok(out)
    }

    /// Natural log of the selected variables. Refuses non-positive values.
    pub fn log_transform(&self, variables: &[VariableRole]) -> Result<Panel> {
        let series = self.map_series(variables, |entity, var, year, x| {
            if x <= 0.0 {
                Err(Error::NonPositiveValue {
                    entity: entity.to_string(),
                    variable: var.to_string(),
                    year,
                    value: x,
                })
            } else {
                Ok(x.ln())
            }
        })?;
        Ok(self.with(series, Transform::Log { variables: variables.to_vec() }))
    }

    /// `ln(x + offset)` on the selected variables; `x + offset` must be positive.
    pub fn offset_log_transform(&self, variables: &[VariableRole], offset: f64) -> Result<Panel> {
        let series = self.map_series(variables, |entity, var, year, x| {
            if x + offset <= 0.0 {
                Err(Error::NonPositiveValue {
                    entity: entity.to_string(),
                    variable: var.to_string(),
                    year,
                    value: x + offset,
                })
            } else {
                Ok((x + offset).ln())
            }
        })?;
        Ok(self.with(
            series,
            Transform::OffsetLog {
                variables: variables.to_vec(),
                offset,
            },
        ))
    }

    /// `order`-th difference of every series; the year index loses its first
    /// `order` years.
    pub fn difference(&self, order: usize) -> Result<Panel> {
        if order == 0 {
            return Err(Error::InvalidArgument("difference order must be at least 1".into()));
        }
        if self.len() <= order {
            return Err(Error::SeriesTooShort {
                needed: order + 1,
                available: self.len(),
            });
        }
        let series = self
            .series
            .iter()
            .map(|s| {
                let mut values: Vec<Option<f64>> = s
                    .values
                    .iter()
                    .zip(&s.missing)
                    .map(|(&v, &m)| (!m).then_some(v))
                    .collect();
                for _ in 0..order {
                    values = values
                        .windows(2)
                        .map(|w| match (w[0], w[1]) {
                            (Some(a), Some(b)) => Some(b - a),
                            _ => None,
                        })
                        .collect();
                }
                Series::new(s.years[order], values)
            })
            .collect();
        let mut out = self.with(series, Transform::Difference { order });
        out.years = self.years[order..].to_vec();
        Ok(out)
    }

    fn with(&self, series: Vec<Series>, transform: Transform) -> Panel {
        let mut transforms = self.transforms.clone();
        transforms.push(transform);
        Panel {
            entities: self.entities.clone(),
            variables: self.variables.clone(),
            years: self.years.clone(),
            series,
            transforms,
        }
    }

    /// Applies a transform log to this panel.
    pub fn apply(&self, transforms: &[Transform]) -> Result<Panel> {
        transforms.iter().try_fold(self.clone(), |p, t| match t {
            Transform::Log { variables } => p.log_transform(variables),
            Transform::OffsetLog { variables, offset } => p.offset_log_transform(variables, *offset),
            Transform::Difference { order } => p.difference(*order),
        })
    }

    /// Reproduces this panel from its raw input by replaying the transform log.
    pub fn replay_from(&self, raw: &Panel) -> Result<Panel> {
        raw.apply(&self.transforms)
    }

    /// Restricts the panel to the given entities (in that order).
    pub fn select_entities(&self, entities: &[String]) -> Result<Panel> {
        let nv = self.variables.len();
        let mut series = Vec::with_capacity(entities.len() * nv);
        for name in entities {
            let e = self.entity_index(name)?;
            series.extend_from_slice(&self.series[e * nv..(e + 1) * nv]);
        }
        Ok(Panel {
            entities: entities.to_vec(),
            variables: self.variables.clone(),
            years: self.years.clone(),
            series,
            transforms: self.transforms.clone(),
        })
    }

    /// Writes the panel as CSV: `entity,year,<variable tags...>`; missing cells
    /// are blank.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["entity".to_string(), "year".to_string()];
        header.extend(self.variables.iter().map(|v| v.tag().to_string()));
        w.write_record(&header)?;
        let nv = self.variables.len();
        for (e, name) in self.entities.iter().enumerate() {
            for (t, year) in self.years.iter().enumerate() {
                let mut row = vec![name.clone(), year.to_string()];
                for v in 0..nv {
                    let s = &self.series[e * nv + v];
                    row.push(if s.missing[t] {
                        String::new()
                    } else {
                        format!("{:?}", s.values[t])
                    });
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// How variables are laid out in an input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CsvLayout {
    /// One row per entity-year, one column per variable.
    Columns,
    /// One row per entity-year-variable.
    Stacked {
        variable_column: String,
        value_column: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableColumn {
    /// Column name (`Columns` layout) or variable label (`Stacked` layout).
    pub column: String,
    pub role: VariableRole,
}

/// Column mapping for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub entity_column: String,
    pub year_column: String,
    pub layout: CsvLayout,
    pub variables: Vec<VariableColumn>,
}

impl CsvSchema {
    /// `entity,year,fdi,trd,inv,ifr,iep` with one row per entity-year.
    pub fn offshoring_default() -> Self {
        CsvSchema {
            entity_column: "entity".into(),
            year_column: "year".into(),
            layout: CsvLayout::Columns,
            variables: VariableRole::SYSTEM
                .iter()
                .map(|r| VariableColumn {
                    column: r.tag().to_string(),
                    role: r.clone(),
                })
                .collect(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Panel> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Panel> {
    if schema.variables.is_empty() {
        return Err(Error::InvalidArgument("schema names no variable columns".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let entity_col = col(&schema.entity_column)?;
    let year_col = col(&schema.year_column)?;

    let mut entities: Vec<String> = Vec::new();
    let mut cells: HashMap<(usize, i32, usize), Option<f64>> = HashMap::new();
    let entity_slot = |entities: &mut Vec<String>, name: &str| match entities.iter().position(|e| e == name) {
        Some(i) => i,
        None => {
            entities.push(name.to_string());
            entities.len() - 1
        }
    };
    let parse_num = |s: &str| s.parse::<f64>().ok().filter(|x| x.is_finite());

    match &schema.layout {
        CsvLayout::Columns => {
            let var_cols = schema
                .variables
                .iter()
                .map(|v| col(&v.column))
                .collect::<Result<Vec<_>>>()?;
            for record in rdr.records() {
                let record = record?;
                let entity = record.get(entity_col).unwrap_or("").to_string();
                let year: i32 = record
                    .get(year_col)
                    .and_then(|y| y.parse().ok())
                    .ok_or_else(|| Error::SchemaMismatch(format!("unparseable year in row {:?}", record)))?;
                let e = entity_slot(&mut entities, &entity);
                for (v, &c) in var_cols.iter().enumerate() {
                    let value = record.get(c).and_then(parse_num);
                    if cells.insert((e, year, v), value).is_some() {
                        return Err(Error::DuplicateEntityYear { entity, year });
                    }
                }
            }
        }
        CsvLayout::Stacked {
            variable_column,
            value_column,
        } => {
            let var_col = col(variable_column)?;
            let val_col = col(value_column)?;
            for record in rdr.records() {
                let record = record?;
                let label = record.get(var_col).unwrap_or("");
                let Some(v) = schema.variables.iter().position(|m| m.column == label) else {
                    continue;
                };
                let entity = record.get(entity_col).unwrap_or("").to_string();
                let year: i32 = record
                    .get(year_col)
                    .and_then(|y| y.parse().ok())
                    .ok_or_else(|| Error::SchemaMismatch(format!("unparseable year in row {:?}", record)))?;
                let e = entity_slot(&mut entities, &entity);
                let value = record.get(val_col).and_then(parse_num);
                if cells.insert((e, year, v), value).is_some() {
                    return Err(Error::DuplicateEntityYear { entity, year });
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::EmptyPanel);
    }
    let first = cells.keys().map(|k| k.1).min().unwrap();
    let last = cells.keys().map(|k| k.1).max().unwrap();
    let nv = schema.variables.len();
    let data = (0..entities.len())
        .map(|e| {
            (0..nv)
                .map(|v| (first..=last).map(|y| cells.get(&(e, y, v)).copied().flatten()).collect())
                .collect()
        })
        .collect();
    Panel::new(
        entities,
        schema.variables.iter().map(|v| v.role.clone()).collect(),
        first,
        data,
    )
}

/// Moment-based summary of one series. Skewness is `m3 / m2^1.5` and excess
/// kurtosis `m4 / m2^2 - 3` with population central moments; both are `None`
/// for a constant series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (divisor n - 1).
    pub std_dev: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub range: f64,
    pub skew: Option<f64>,
    pub excess_kurtosis: Option<f64>,
}

impl DescriptiveStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "descriptive statistics need at least 2 observations, have {n}"
            )));
        }
        let nf = n as f64;
        let mean = values.iter().sum::<f64>() / nf;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &x in values {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        let std_dev = (m2 / (nf - 1.0)).sqrt();
        m2 /= nf;
        m3 /= nf;
        m4 /= nf;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let (min, max) = (sorted[0], sorted[n - 1]);
        let scale = min.abs().max(max.abs());
        let (skew, excess_kurtosis) = if m2.sqrt() <= 1e-13 * scale || m2 == 0.0 {
            (None, None)
        } else {
            (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0))
        };
        Ok(DescriptiveStats {
            n,
            mean,
            std_dev,
            median,
            min,
            max,
            range: max - min,
            skew,
            excess_kurtosis,
        })
    }
}

/// Output of [`describe`], keyed by entity and variable tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub conventions: String,
    pub cells: BTreeMap<String, BTreeMap<String, DescriptiveStats>>,
    /// Statistics of each variable pooled over all entities.
    pub pooled: BTreeMap<String, DescriptiveStats>,
}

pub const MOMENT_CONVENTIONS: &str =
    "std_dev: sample (n-1); skew: m3/m2^1.5; excess_kurtosis: m4/m2^2 - 3 (population moments); \
     missing entries ignored";

pub fn describe(panel: &Panel) -> Result<Description> {
    let nv = panel.variables.len();
    let mut cells = BTreeMap::new();
    let mut pooled_values: Vec<Vec<f64>> = vec![Vec::new(); nv];
    for (e, entity) in panel.entities.iter().enumerate() {
        let mut row = BTreeMap::new();
        for (v, var) in panel.variables.iter().enumerate() {
            let values: Vec<f64> = panel.series[e * nv + v].observed().collect();
            pooled_values[v].extend_from_slice(&values);
            row.insert(var.tag().to_string(), DescriptiveStats::from_values(&values)?);
        }
        cells.insert(entity.clone(), row);
    }
    let pooled = panel
        .variables
        .iter()
        .zip(&pooled_values)
        .map(|(var, values)| Ok((var.tag().to_string(), DescriptiveStats::from_values(values)?)))
        .collect::<Result<_>>()?;
    Ok(Description {
        conventions: MOMENT_CONVENTIONS.to_string(),
        cells,
        pooled,
    })
}
