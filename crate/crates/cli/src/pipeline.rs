//! Workflow stages and their paper-shaped outputs.

use crate::config::{AnalysisConfig, Format};
use crate::output::{sha256_hex, FileRecord, RunDir, TOOL, VERSION};
use anyhow::Context;
use nalgebra::DMatrix;
use serde::Serialize;
use spillover_core::connectedness::{
    npdc_dot, npdc_graph, qvar_connectedness, quantile_sweep, rolling_connectedness, ConnectednessReport,
    QuantileSweep,
};
use spillover_core::johansen::{pairwise_grid, PairwiseGrid};
use spillover_core::panel::{describe, load_csv, Panel, VariableRole};
use spillover_core::regression::{rolling_ols, RollingResult};
use spillover_core::report::{StarLevel, TestReport};
use spillover_core::stationarity::{assess, StationarityVerdict};
use spillover_core::var::{
    fit_var, granger_grid, irf, jarque_bera_multi, model_rms, select_lag, IrfKind, LagSelection, MultiJarqueBera,
    RmsReport, VarFit, VarForm,
};
use spillover_core::Error as CoreError;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Describe,
    Stationarity,
    Rolling,
    Var,
    Granger,
    Johansen,
    Connectedness,
    Sweep,
}

impl Stage {
    pub const PIPELINE: [Stage; 8] = [
        Stage::Describe,
        Stage::Stationarity,
        Stage::Rolling,
        Stage::Var,
        Stage::Granger,
        Stage::Johansen,
        Stage::Connectedness,
        Stage::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Describe => "describe",
            Stage::Stationarity => "stationarity",
            Stage::Rolling => "rolling",
            Stage::Var => "var",
            Stage::Granger => "granger",
            Stage::Johansen => "johansen",
            Stage::Connectedness => "connectedness",
            Stage::Sweep => "sweep",
        }
    }
}

/// Exit codes: 0 success, 3 data, 4 configuration, 5 numerical, 6 I/O,
/// 7 schema mismatch, 8 fixture identity failure.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<CoreError>() {
        Some(e) => match e {
            CoreError::MissingColumn(_)
            | CoreError::DuplicateEntityYear { .. }
            | CoreError::EmptyPanel
            | CoreError::NonPositiveValue { .. }
            | CoreError::SeriesTooShort { .. }
            | CoreError::InsufficientData(_)
            | CoreError::IncompleteSeries { .. } => 3,
            CoreError::UnknownEntity(_)
            | CoreError::UnknownVariable(_)
            | CoreError::WindowTooSmall { .. }
            | CoreError::WindowExceedsSample { .. }
            | CoreError::OrderingRequired
            | CoreError::InvalidArgument(_) => 4,
            CoreError::RankDeficient
            | CoreError::SingularRegression
            | CoreError::TooFewRows { .. }
            | CoreError::TooFewObservations(_)
            | CoreError::SolverDiverged(_)
            | CoreError::DegenerateDenominator(_)
            | CoreError::SingularMomentMatrix
            | CoreError::SingularContemporaneousMatrix
            | CoreError::UnstableSpec(_) => 5,
            CoreError::Io(_) => 6,
            CoreError::Csv(_) | CoreError::Json(_) | CoreError::SchemaMismatch(_) => 7,
        },
        None if err.downcast_ref::<std::io::Error>().is_some() => 6,
        None if err.downcast_ref::<serde_json::Error>().is_some() => 4,
        None => 1,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: &'static str,
    pub error: Option<String>,
    pub exit_code: i32,
    /// Non-fatal problems: skipped cells, failed quantiles.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub input: Option<String>,
    pub input_sha256: Option<String>,
    pub stages: Vec<StageRecord>,
    /// First hard failure, in stage order.
    pub exit_code: i32,
    pub files: Vec<FileRecord>,
}

fn f2(v: f64) -> String {
    format!("{v:.2}")
}

fn f4(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        String::new()
    }
}

fn strings<const N: usize>(items: [&str; N]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

struct Context_<'a> {
    config: &'a AnalysisConfig,
    raw: &'a Panel,
    panel: &'a Panel,
    warnings: Vec<String>,
}

/// Loads the input, runs the requested stages in workflow order and writes
/// the resolved config and run report. Returns the exit code.
pub fn run(config: &AnalysisConfig, stages: &[Stage]) -> anyhow::Result<i32> {
    let config_json = config.to_json();
    let config_hash = sha256_hex(config_json.as_bytes());
    let mut dir = RunDir::create(&config.output.directory, config_hash.clone())?;
    dir.write("config", "config.resolved.json", config_json.as_bytes())?;

    let input = config
        .input
        .path
        .as_ref()
        .context("no input file given (set input.path or pass --input)")?;
    let input_bytes = std::fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let mut report = RunReport {
        tool: TOOL,
        version: VERSION,
        config_sha256: config_hash,
        input: Some(input.display().to_string()),
        input_sha256: Some(sha256_hex(&input_bytes)),
        stages: Vec::new(),
        exit_code: 0,
        files: Vec::new(),
    };

    let loaded = load_csv(input, &config.input.schema)
        .map_err(anyhow::Error::from)
        .and_then(|raw| {
            let panel = raw.apply(&config.transforms)?;
            Ok((raw, panel))
        });
    match loaded {
        Err(e) => {
            report.exit_code = exit_code(&e);
            report.stages.push(StageRecord {
                stage: stages.first().copied().unwrap_or(Stage::Describe),
                status: "error",
                error: Some(format!("loading input: {e:#}")),
                exit_code: report.exit_code,
                warnings: Vec::new(),
            });
        }
        Ok((raw, panel)) => {
            let mut ordered = stages.to_vec();
            ordered.sort();
            ordered.dedup();
            for stage in ordered {
                let mut ctx = Context_ {
                    config,
                    raw: &raw,
                    panel: &panel,
                    warnings: Vec::new(),
                };
                let outcome = run_stage(stage, &mut ctx, &mut dir);
                let (status, error, code) = match outcome {
                    Ok(()) => ("ok", None, 0),
                    Err(e) => ("error", Some(format!("{e:#}")), exit_code(&e)),
                };
                if code != 0 && report.exit_code == 0 {
                    report.exit_code = code;
                }
                report.stages.push(StageRecord {
                    stage,
                    status,
                    error,
                    exit_code: code,
                    warnings: ctx.warnings,
                });
            }
        }
    }
    report.files = dir.files.clone();
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(config.output.directory.join("run_report.json"), text)?;
    for s in report.stages.iter().filter(|s| s.status == "error") {
        eprintln!("stage {}: {}", s.stage.name(), s.error.as_deref().unwrap_or(""));
    }
    Ok(report.exit_code)
}

fn run_stage(stage: Stage, ctx: &mut Context_, dir: &mut RunDir) -> anyhow::Result<()> {
    match stage {
        Stage::Describe => stage_describe(ctx, dir),
        Stage::Stationarity => stage_stationarity(ctx, dir),
        Stage::Rolling => stage_rolling(ctx, dir),
        Stage::Var => stage_var(ctx, dir),
        Stage::Granger => stage_granger(ctx, dir),
        Stage::Johansen => stage_johansen(ctx, dir),
        Stage::Connectedness => stage_connectedness(ctx, dir),
        Stage::Sweep => stage_sweep(ctx, dir),
    }
}

fn stage_describe(ctx: &mut Context_, dir: &mut RunDir) -> anyhow::Result<()> {
    let d = describe(ctx.raw)?;
    let out = &ctx.config.output;
    if out.wants(Format::Csv) {
        let header = strings([
            "entity", "variable", "n", "mean", "std_dev", "median", "min", "max", "range", "skew", "excess_kurtosis",
        ]);
        let mut rows = Vec::new();
        for (entity, cells) in d.cells.iter().chain(std::iter::once((&"pooled".to_string(), &d.pooled))) {
            for (var, s) in cells {
                rows.push(vec![
                    entity.clone(),
                    var.clone(),
                    s.n.to_string(),
                    f4(s.mean),
                    f4(s.std_dev),
                    f4(s.median),
                    f4(s.min),
                    f4(s.max),
                    f4(s.range),
                    s.skew.map(f4).unwrap_or_default(),
                    s.excess_kurtosis.map(f4).unwrap_or_default(),
                ]);
            }
        }
        dir.write_csv("describe", "tableTA1_descriptive.csv", &header, &rows)?;
    }
    if out.wants(Format::Json) {
        dir.write_json("describe", "describe.json", &d)?;
    }
    Ok(())
}

fn stage_stationarity(ctx: &mut Context_, dir: &mut RunDir) -> anyhow::Result<()> {
    let panel = ctx.panel;
    let mut results: BTreeMap<String, BTreeMap<String, StationarityVerdict>> = BTreeMap::new();
    let header = strings([
        "entity", "variable", "verdict", "stars", "adf_statistic", "adf_lag", "adf_p_lower", "adf_p_upper",
        "adf_p_estimate", "kpss_statistic", "kpss_lag", "kpss_p_lower", "kpss_p_upper", "kpss_p_estimate", "note",
    ]);
    let mut rows = Vec::new();
    let mut grid = Vec::new();
    for entity in panel.entities() {
        let mut cells = Vec::new();
        for var in panel.variables() {
            let series = panel.series(entity, var)?;
            let values: Vec<f64> = series.observed().collect();
            match assess(&values, &ctx.config.stationarity) {
                Ok(v) => {
                    let test_cols = |t: &TestReport| {
                        vec![
                            f4(t.statistic),
                            t.lag_order.map(|l| l.to_string()).unwrap_or_default(),
                            f4(t.p_value.lower),
                            f4(t.p_value.upper),
                            t.p_value.estimate.map(f4).unwrap_or_default(),
                        ]
                    };
                    let mut row = vec![entity.clone(), var.tag().to_string(), v.combined.code().to_string(), v.stars.as_str().to_string()];
                    row.extend(test_cols(&v.adf));
                    row.extend(test_cols(&v.kpss));
                    row.push(if series.is_complete() { String::new() } else { "missing values dropped".into() });
                    rows.push(row);
                    cells.push(v.cell());
                    results.entry(entity.clone()).or_default().insert(var.tag().to_string(), v);
                }
                Err(e) => {
                    ctx.warnings.push(format!("{entity}/{var}: {e}"));
                    let mut row = vec![entity.clone(), var.tag().to_string(), String::new(), String::new()];
                    row.extend(std::iter::repeat_n(String::new(), 10));
                    row.push(e.to_string());
                    rows.push(row);
                    cells.push("-".into());
                }
            }
        }
        grid.push((entity.clone(), cells));
    }
    let out = &ctx.config.output;
    if out.wants(Format::Csv) {
        dir.write_csv("stationarity", "table1_stationarity.csv", &header, &rows)?;
    }
    if out.wants(Format::Txt) {
        let labels: Vec<String> = panel.variables().iter().map(|v| v.label().to_string()).collect();
        dir.write("stationarity", "table1_stationarity.txt", text_grid("Country", &labels, &grid).as_bytes())?;
    }
    if out.wants(Format::Json) {
        dir.write_json("stationarity", "stationarity.json", &Wrap { results: &results })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Wrap<'a, T: Serialize> {
    results: &'a T,
}

fn text_grid(corner: &str, columns: &[String], rows: &[(String, Vec<String>)]) -> String {
    let mut widths: Vec<usize> = std::iter::once(corner.chars().count())
        .chain(columns.iter().map(|c| c.chars().count()))
        .collect();
    for (label, cells) in rows {
        widths[0] = widths[0].max(label.chars().count());
        for (i, c) in cells.iter().enumerate() {
            widths[i + 1] = widths[i + 1].max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            let pad = widths[i] - c.chars().count();
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(c);
            s.extend(std::iter::repeat_n(' ', pad));
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(std::iter::once(corner).chain(columns.iter().map(String::as_str)).collect());
    for (label, cells) in rows {
        out.push_str(&line(std::iter::once(label.as_str()).chain(cells.iter().map(String::as_str)).collect()));
    }
    out
}

fn stage_rolling(ctx: &mut Context_, dir: &mut RunDir) -> anyhow::Result<()> {
    let panel = ctx.panel;
    let header = strings([
        "entity", "window", "windows_fitted", "windows_skipped", "mean_r_squared", "median_f_p_value", "flag",
    ]);
    let mut all: BTreeMap<String, BTreeMap<String, Vec<RollingResult>>> = BTreeMap::new();
    for (spec, letter) in ctx.config.rolling.models.iter().zip(['a', 'b', 'c', 'd', 'e', 'f']) {
        // configuration errors surface before any fitting
        for &w in &spec.windows {
            if w <= spec.model.n_variables() {
                return Err(CoreError::WindowTooSmall {
                    window: w,
                    variables: spec.model.n_variables(),
                }
                .into());
            }
        }
        let mut rows = Vec::new();
        for entity in panel.entities() {
            for &w in &spec.windows {
                match rolling_ols(panel, entity, spec.model, w) {
                    Ok(r) => {
                        rows.push(vec![
                            entity.clone(),
                            w.to_string(),
                            r.fits().count().to_string(),
                            r.skipped().to_string(),
                            f4(r.mean_r_squared),
                            r.median_f_p_value.map(f4).unwrap_or_default(),
                            r.flag.marker().to_string(),
                        ]);
                        all.entry(spec.model.label().to_string())
                            .or_default()
                            .entry(entity.clone())
                            .or_default()
                            .push(r);
                    }
                    Err(e @ (CoreError::WindowTooSmall { .. } | CoreError::WindowExceedsSample { .. })) => {
                        return Err(e.into())
                    }
                    Err(e) => {
                        ctx.warnings.push(format!("{} {entity} window {w}: {e}", spec.model.label()));
                        rows.push(vec![entity.clone(), w.to_string(), "0".into(), String::new(), String::new(), String::new(), e.to_string()]);
                    }
                }
            }
        }
        if ctx.config.output.wants(Format::Csv) {
            let name = format!("table2{letter}_rolling_{}.csv", spec.model.label().to_lowercase());
            dir.write_csv("rolling", &name, &header, &rows)?;
        }
    }
    if ctx.config.output.wants(Format::Json) {
        dir.write_json("rolling", "rolling.json", &Wrap { results: &all })?;
    }
    Ok(())
}

fn var_data(panel: &Panel, entity: &str, vars: &[VariableRole]) -> anyhow::Result<DMatrix<f64>> {
    Ok(panel.slice(entity, vars)?)
}

fn differenced(data: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(data.nrows() - 1, data.ncols(), |i, j| data[(i + 1, j)] - data[(i, j)])
}

/// Lag order for the VAR stage: fixed, or chosen by information criteria
/// on the data in the configured form.
fn var_lag(ctx: &Context_, data: &DMatrix<f64>) -> anyhow::Result<(usize, Option<LagSelection>)> {
    let cfg = &ctx.config.var;
    if let Some(p) = cfg.p {
        return Ok((p, None));
    }
    let d = match cfg.form {
        VarForm::Levels => data.clone(),
        VarForm::Differences => differenced(data),
    };
    let sel = select_lag(&d, cfg.p_max, cfg.deterministic)?;
    Ok((sel.chosen, Some(sel)))
}

#[derive(Serialize)]
struct VarSummary {
    variables: Vec<VariableRole>,
    lag_selection: Option<LagSelection>,
    p: usize,
    form: VarForm,
    intercept: Vec<f64>,
    /// `lags[l][i][j]`: equation `i`, variable `j`, lag `l + 1`.
    lags: Vec<Vec<Vec<f64>>>,
    sigma: Vec<Vec<f64>>,
    spectral_radius: f64,
    explosive: bool,
    rms: Vec<RmsReport>,
    jarque_bera: MultiJarqueBera,
    /// Generalized impulse responses `[h][response][shock]`.
    generalized_irf: Vec<Vec<Vec<f64>>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn summarize(fit: &VarFit, vars: &[VariableRole], sel: Option<LagSelection>, ctx: &Context_) -> anyhow::Result<VarSummary> {
    let resp = irf(&fit.dynamics(), ctx.config.var.horizon, IrfKind::Generalized)?;
    Ok(VarSummary {
        variables: vars.to_vec(),
        lag_selection: sel,
        p: fit.p,
        form: fit.form,
        intercept: fit.intercept.clone(),
        lags: fit.lags.iter().map(rows).collect(),
        sigma: rows(&fit.sigma),
        spectral_radius: resp.spectral_radius,
        explosive: resp.explosive,
        rms: model_rms(fit)?,
        jarque_bera: jarque_bera_multi(&fit.residuals, ctx.config.var.significance)?,
        generalized_irf: resp.responses.iter().map(rows).collect(),
    })
}

fn stage_var(ctx: &mut Context_, dir: &mut RunDir) -> anyhow::Result<()> {
    let vars = ctx.config.var.variables.clone();
    let mut models: BTreeMap<String, VarSummary> = BTreeMap::new();
    let mut failures = Vec::new();
    let header = strings(["entity", "p", "aic_choice", "hq_choice", "sc_choice", "fpe_choice", "rule", "spectral_radius", "explosive"]);
    let mut rows_out = Vec::new();
    for entity in ctx.panel.entities() {
        let result = var_data(ctx.panel, entity, &vars).and_then(|data| {
            let (p, sel) = var_lag(ctx, &data)?;
            let fit = fit_var(&data, p, ctx.config.var.form, ctx.config.var.deterministic)?;
            summarize(&fit, &vars, sel, ctx)
        });
        match result {
            Ok(s) => {
                let sel = s.lag_selection.as_ref();
                let choice = |f: fn(&LagSelection) -> usize| sel.map(|s| f(s).to_string()).unwrap_or_default();
                rows_out.push(vec![
                    entity.clone(),
                    s.p.to_string(),
                    choice(|s| s.aic_choice),
                    choice(|s| s.hq_choice),
                    choice(|s| s.sc_choice),
                    choice(|s| s.fpe_choice),
                    sel.map(|s| serde_json::to_value(s.rule).unwrap().as_str().unwrap_or("").to_string()).unwrap_or_else(|| "fixed".into()),
                    f4(s.spectral_radius),
                    s.explosive.to_string(),
                ]);
                if s.explosive {
                    ctx.warnings.push(format!("{entity}: explosive VAR (spectral radius {:.4})", s.spectral_radius));
                }
                models.insert(entity.clone(), s);
            }
            Err(e) => failures.push((entity.clone(), e)),
        }
    }
    if ctx.config.output.wants(Format::Csv) {
        dir.write_csv("var", "var_lag_selection.csv", &header, &rows_out)?;
    }
    if ctx.config.output.wants(Format::Json) {
        dir.write_json("var", "var_models.json", &Wrap { results: &models })?;
    }
    first_failure(failures)
}

fn first_failure(failures: Vec<(String, anyhow::Error)>) -> anyhow::Result<()> {
    match failures.into_iter().next() {
        Some((entity, e)) => Err(e.context(format!("entity {entity}"))),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct GrangerCell {
    cause: VariableRole,
    effect: VariableRole,
    p: usize,
    report: TestReport,
    stars: StarLevel,
}

fn stage_granger(ctx: &mut Context_, dir: &mut RunDir) -> anyhow::Result<()> {
    let vars = ctx.config.var.variables.clone();
    let header = strings(["entity", "cause", "effect", "lag", "f_statistic", "df1", "df2", "p_value", "stars"]);
    let mut rows_out = Vec::new();
    let mut all: BTreeMap<String, Vec<GrangerCell>> = BTreeMap::new();
    let mut grid_text = String::new();
    let mut failures = Vec::new();
    for entity in ctx.panel.entities() {
        let result = var_data(ctx.panel, entity, &vars).and_then(|data| {
            let (p, _) = var_lag(ctx, &data)?;
            let d = match ctx.config.var.form {
                VarForm::Levels => data,
                VarForm::Differences => differenced(&data),
            };
            Ok((p, granger_grid(&d, p, ctx.config.var.deterministic, ctx.config.var.significance)?))
        });
        let (p, grid) = match result {
            Ok(v) => v,
            Err(e) => {
                failures.push((entity.clone(), e));
                continue;
            }
        };
        let mut text_rows = Vec::new();
        for (ci, row) in grid.iter().enumerate() {
            let mut cells = Vec::new();
            for (ei, cell) in row.iter().enumerate() {
                let Some(r) = cell else {
                    cells.push("-".to_string());
                    continue;
                };
                let pval = r.p_value.best();
                let stars = StarLevel::conventional(pval);
                let (df1, df2) = parse_f_dof(&r.distribution);
                rows_out.push(vec![
                    entity.clone(),
                    vars[ci].tag().to_string(),
                    vars[ei].tag().to_string(),
                    p.to_string(),
                    f4(r.statistic),
                    df1,
                    df2,
                    f4(pval),
                    stars.as_str().to_string(),
                ]);
                cells.push(format!("{:.2}{}", r.statistic, stars));
                all.entry(entity.clone()).or_default().push(GrangerCell {
                    cause: vars[ci].clone(),
                    effect: vars[ei].clone(),
                    p,
                    report: r.clone(),
                    stars,
                });
            }
            text_rows.push((vars[ci].label().to_string(), cells));
        }
        let labels: Vec<String> = vars.iter().map(|v| v.label().to_string()).collect();
        grid_text.push_str(&format!("{entity} (rows cause, columns effect, lag {p})\n"));
        grid_text.push_str(&text_grid("", &labels, &text_rows));
        grid_text.push('\n');
    }
    let out = &ctx.config.output;
    if out.wants(Format::Csv) {
        dir.write_csv("granger", "table3_granger.csv", &header, &rows_out)?;
    }
    if out.wants(Format::Txt) {
        dir.write("granger", "table3_granger.txt", grid_text.as_bytes())?;
    }
    if out.wants(Format::Json) {
        dir.write_json("granger", "granger.json", &Wrap { results: &all })?;
    }
    first_failure(failures)
}

fn parse_f_dof(distribution: &str) -> (String, String) {
    let inner = distribution.trim_start_matches("F(").trim_end_matches(')');
    let mut it = inner.split(',').map(|s| s.trim().to_string());
    (it.next().unwrap_or_default(), it.next().unwrap_or_default())
}

fn stage_johansen(ctx: &mut Context_, dir: &mut RunDir) -> anyhow::Result<()> {
    let cfg = &ctx.config.johansen;
    let header = strings(["entity", "row", "column", "lag", "trace_statistic", "stars", "cell", "degenerate", "note"]);
    let mut rows_out = Vec::new();
    let mut grids: BTreeMap<String, PairwiseGrid> = BTreeMap::new();
    let mut text = String::new();
    let mut failures = Vec::new();
    for entity in ctx.panel.entities() {
        let grid = match pairwise_grid(ctx.panel, entity, &cfg.variables, cfg.p, cfg.p_max, cfg.deterministic) {
            Ok(g) => g,
            Err(e) => {
                failures.push((entity.clone(), anyhow::Error::from(e)));
                continue;
            }
        };
        for c in &grid.cells {
            if let Some(err) = &c.error {
                ctx.warnings.push(format!("{entity} {}/{}: {err}", c.row, c.column));
            }
            rows_out.push(vec![
                entity.clone(),
                c.row.tag().to_string(),
                c.column.tag().to_string(),
                c.lag.to_string(),
                c.statistic.map(f4).unwrap_or_default(),
                c.stars.as_str().to_string(),
                c.text(),
                c.degenerate.to_string(),
                c.error.clone().unwrap_or_default(),
            ]);
        }
        let labels: Vec<String> = cfg.variables.iter().map(|v| v.label().to_string()).collect();
        let text_rows: Vec<(String, Vec<String>)> = (0..cfg.variables.len())
            .map(|i| {
                let cells = (0..cfg.variables.len())
                    .map(|j| if j < i { grid.cell(i, j).map(|c| c.text()).unwrap_or_default() } else { String::new() })
                    .collect();
                (labels[i].clone(), cells)
            })
            .collect();
        text.push_str(&format!("{entity}\n"));
        text.push_str(&text_grid("", &labels, &text_rows));
        text.push('\n');
        grids.insert(entity.clone(), grid);
    }
    let out = &ctx.config.output;
    if out.wants(Format::Csv) {
        dir.write_csv("johansen", "table4_johansen.csv", &header, &rows_out)?;
    }
    if out.wants(Format::Txt) {
        dir.write("johansen", "table4_johansen.txt", text.as_bytes())?;
    }
    if out.wants(Format::Json) {
        dir.write_json("johansen", "johansen.json", &Wrap { results: &grids })?;
    }
    first_failure(failures)
}

fn connectedness_data(ctx: &Context_, var: &VariableRole) -> anyhow::Result<DMatrix<f64>> {
    let data = ctx.panel.cross_section(var, ctx.panel.entities())?;
    Ok(if ctx.config.connectedness.difference { differenced(&data) } else { data })
}

fn quantile_tag(theta: f64) -> String {
    format!("q{:03}", (theta * 100.0).round() as i64)
}

/// Entities × entities shares with the FROM column and the four summary rows.
fn connectedness_rows(r: &ConnectednessReport) -> (Vec<String>, Vec<Vec<String>>) {
    let k = r.names.len();
    let mut header = vec!["label".to_string()];
    header.extend(r.names.iter().cloned());
    header.push("FROM".into());
    let mut out = Vec::new();
    for i in 0..k {
        let mut row = vec![r.names[i].clone()];
        row.extend(r.table.shares[i].iter().map(|v| f2(*v)));
        row.push(f2(r.from_others[i]));
        out.push(row);
    }
    let summary = |label: &str, values: Vec<String>, last: String| {
        let mut row = vec![label.to_string()];
        row.extend(values);
        row.push(last);
        row
    };
    out.push(summary("TO", r.to_others.iter().map(|v| f2(*v)).collect(), f2(r.to_others.iter().sum())));
    out.push(summary("INC_OWN", r.total_incl_own.iter().map(|v| f2(*v)).collect(), String::new()));
    out.push(summary("NET", r.net.iter().map(|v| f2(*v)).collect(), String::new()));
    out.push(summary("NPDC", r.npdc_degree.iter().map(|v| v.to_string()).collect(), String::new()));
    (header, out)
}

fn stage_connectedness(ctx: &mut Context_, dir: &mut RunDir) -> anyhow::Result<()> {
    let cfg = ctx.config.connectedness.clone();
    let names = ctx.panel.entities().to_vec();
    let mut table_no = 5;
    let mut failures = Vec::new();
    for var in &cfg.variables {
        let data = match connectedness_data(ctx, var) {
            Ok(d) => d,
            Err(e) => {
                failures.push((var.tag().to_string(), e));
                table_no += cfg.quantiles.len();
                continue;
            }
        };
        for &theta in &cfg.quantiles {
            let stem = format!("{}_{}", var.tag(), quantile_tag(theta));
            let n = table_no;
            table_no += 1;
            let report = match qvar_connectedness(&data, &names, cfg.p, cfg.horizon, theta) {
                Ok(r) => r,
                Err(e) => {
                    failures.push((format!("{} θ={theta}", var.tag()), e.into()));
                    continue;
                }
            };
            if report.table.explosive {
                ctx.warnings.push(format!("{stem}: explosive QVAR, shares still reported"));
            }
            let out = &ctx.config.output;
            if out.wants(Format::Csv) {
                let (header, rows_out) = connectedness_rows(&report);
                dir.write_csv("connectedness", &format!("table{n}_{stem}.csv"), &header, &rows_out)?;
            }
            if out.wants(Format::Json) {
                dir.write_json("connectedness", &format!("connectedness_{stem}.json"), &report)?;
                dir.write_json("connectedness", &format!("npdc_{stem}.json"), &npdc_graph(&report))?;
            }
            if out.wants(Format::Dot) {
                dir.write("connectedness", &format!("npdc_{stem}.dot"), npdc_dot(&report).as_bytes())?;
            }
            if let Some(w) = cfg.window {
                let windows = rolling_connectedness(&data, &names, cfg.p, cfg.horizon, theta, w)?;
                for wr in &windows {
                    if let Some(e) = &wr.error {
                        ctx.warnings.push(format!("{stem} window at {}: {e}", wr.start));
                    }
                }
                if out.wants(Format::Json) {
                    dir.write_json("connectedness", &format!("npdc_{stem}_rolling.json"), &Wrap { results: &windows })?;
                }
            }
        }
    }
    first_failure(failures)
}

fn stage_sweep(ctx: &mut Context_, dir: &mut RunDir) -> anyhow::Result<()> {
    let cfg = ctx.config.connectedness.clone();
    let names = ctx.panel.entities().to_vec();
    let mut failures = Vec::new();
    for (vi, var) in cfg.variables.iter().enumerate() {
        let sweep = match connectedness_data(ctx, var)
            .and_then(|d| Ok(quantile_sweep(&d, &names, cfg.p, cfg.horizon, &cfg.grid)?))
        {
            Ok(s) => s,
            Err(e) => {
                failures.push((var.tag().to_string(), e));
                continue;
            }
        };
        for f in &sweep.failures {
            ctx.warnings.push(format!("{} θ={}: {}", var.tag(), f.theta, f.error));
        }
        let out = &ctx.config.output;
        if out.wants(Format::Csv) {
            for (offset, side) in [(0, "from"), (1, "to")] {
                let (header, rows_out) = sweep_rows(&sweep, side == "from");
                let name = format!("tableA{}_{}_{side}.csv", 2 + 2 * vi + offset, var.tag());
                dir.write_csv("sweep", &name, &header, &rows_out)?;
            }
        }
        if out.wants(Format::Json) {
            dir.write_json("sweep", &format!("sweep_{}.json", var.tag()), &sweep)?;
        }
    }
    first_failure(failures)
}

fn sweep_rows(sweep: &QuantileSweep, from: bool) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["quantile".to_string()];
    header.extend(sweep.names.iter().cloned());
    header.push("Total".into());
    header.push("STDEV".into());
    let rows_out = sweep
        .rows
        .iter()
        .map(|r| {
            let (values, total, sd) = if from {
                (&r.from_others, r.from_total, r.from_stdev)
            } else {
                (&r.to_others, r.to_total, r.to_stdev)
            };
            let mut row = vec![format!("{:.2}", r.theta)];
            row.extend(values.iter().map(|v| f2(*v)));
            row.push(f2(total));
            row.push(f2(sd));
            row
        })
        .collect();
    (header, rows_out)
}
