//! `spillover`: batch front end for the cointegration, Granger and
//! quantile-VAR connectedness workflow.

mod config;
mod output;
mod pipeline;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use config::{AnalysisConfig, Format, RollingSpec};
use pipeline::{exit_code, Stage};
use serde::de::DeserializeOwned;
use spillover_core::fixture::{validate_fixture, TableKind};
use spillover_core::johansen::JohansenDeterministic;
use spillover_core::panel::VariableRole;
use spillover_core::regression::RollingModel;
use spillover_core::report::{RegressionForm, Significance};
use spillover_core::stationarity::Bandwidth;
use spillover_core::synth::{bundled_sample, simulate, ProcessSpec};
use spillover_core::var::VarForm;
use std::path::PathBuf;
use std::process::ExitCode;

/// Parses a value through its serde string form, so flags accept exactly
/// the spellings the config file uses.
fn serde_value<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn bandwidth(s: &str) -> Result<Bandwidth, String> {
    match s {
        "short" => Ok(Bandwidth::Short),
        "long" => Ok(Bandwidth::Long),
        "auto" => Ok(Bandwidth::Auto),
        n => n
            .parse()
            .map(Bandwidth::Fixed)
            .map_err(|_| format!("bandwidth must be short, long, auto or a lag count, got `{n}`")),
    }
}

#[derive(Parser)]
#[command(name = "spillover", version, about = "Cointegration, Granger causality and quantile-VAR connectedness for annual panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Descriptive statistics of the raw panel.
    Describe(Overrides),
    /// ADF + KPSS verdict per entity and variable.
    Stationarity(Overrides),
    /// Rolling-window OLS for the three offshoring models.
    Rolling(Overrides),
    /// VAR estimation, lag selection, diagnostics and impulse responses.
    Var(Overrides),
    /// Pairwise Granger causality F-tests.
    Granger(Overrides),
    /// Pairwise Johansen trace tests.
    Johansen(Overrides),
    /// QVAR connectedness tables and NPDC networks.
    Connectedness(Overrides),
    /// Connectedness across a grid of quantiles.
    Sweep(Overrides),
    /// Full workflow: every stage in order.
    Run(Overrides),
    /// Generate a seeded synthetic panel and its ground-truth manifest.
    Simulate(SimulateArgs),
    /// Check the arithmetic identities of a published connectedness table.
    ValidateFixture(FixtureArgs),
}

#[derive(Args, Default)]
struct Overrides {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output formats (csv, json, dot, txt); repeatable.
    #[arg(long = "format", value_parser = serde_value::<Format>)]
    formats: Vec<Format>,
    /// Stationarity regression: constant or constant-trend.
    #[arg(long, value_parser = serde_value::<RegressionForm>)]
    form: Option<RegressionForm>,
    /// KPSS bandwidth: short, long, auto or a lag count.
    #[arg(long, value_parser = bandwidth)]
    bandwidth: Option<Bandwidth>,
    /// Test level: 10%, 5% or 1%.
    #[arg(long, value_parser = serde_value::<Significance>)]
    significance: Option<Significance>,
    /// Rolling model(s) to run: rq1, rq2, rq3.
    #[arg(long = "model", value_parser = serde_value::<RollingModel>)]
    models: Vec<RollingModel>,
    /// Rolling window length(s), applied to every selected model.
    #[arg(long = "window")]
    windows: Vec<usize>,
    /// VAR in levels or differences.
    #[arg(long, value_parser = serde_value::<VarForm>)]
    var_form: Option<VarForm>,
    #[arg(long)]
    p_max: Option<usize>,
    /// Fixed VAR lag order.
    #[arg(long)]
    var_p: Option<usize>,
    /// Johansen deterministic case: none, restricted-constant, restricted-trend.
    #[arg(long, value_parser = serde_value::<JohansenDeterministic>)]
    johansen_det: Option<JohansenDeterministic>,
    /// Fixed Johansen lag order.
    #[arg(long)]
    johansen_p: Option<usize>,
    /// Connectedness variable(s): iep, fdi, …
    #[arg(long = "variable")]
    variables: Vec<VariableRole>,
    /// Quantile(s) for the connectedness tables.
    #[arg(long = "quantile")]
    quantiles: Vec<f64>,
    /// Comma-separated sweep grid.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    /// Forecast horizon H.
    #[arg(long)]
    horizon: Option<usize>,
    /// QVAR lag order.
    #[arg(long)]
    qvar_p: Option<usize>,
    /// Rolling window for per-window NPDC reports.
    #[arg(long)]
    npdc_window: Option<usize>,
    /// Fit connectedness on levels instead of first differences.
    #[arg(long)]
    no_difference: bool,
}

impl Overrides {
    fn resolve(&self) -> anyhow::Result<AnalysisConfig> {
        let mut c = match &self.config {
            Some(p) => AnalysisConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
            None => AnalysisConfig::default(),
        };
        if let Some(p) = &self.input {
            c.input.path = Some(p.clone());
        }
        if let Some(p) = &self.output {
            c.output.directory = p.clone();
        }
        if !self.formats.is_empty() {
            c.output.formats = self.formats.clone();
        }
        if let Some(f) = self.form {
            c.stationarity.form = f;
        }
        if let Some(b) = self.bandwidth {
            c.stationarity.bandwidth = b;
        }
        if let Some(s) = self.significance {
            c.stationarity.significance = s;
            c.var.significance = s;
        }
        if !self.models.is_empty() {
            c.rolling.models.retain(|m| self.models.contains(&m.model));
            for &m in &self.models {
                if !c.rolling.models.iter().any(|s| s.model == m) {
                    c.rolling.models.push(RollingSpec { model: m, windows: m.default_windows() });
                }
            }
        }
        if !self.windows.is_empty() {
            for spec in &mut c.rolling.models {
                spec.windows = self.windows.clone();
            }
        }
        if let Some(f) = self.var_form {
            c.var.form = f;
        }
        if let Some(p) = self.p_max {
            c.var.p_max = p;
            c.johansen.p_max = p;
        }
        if self.var_p.is_some() {
            c.var.p = self.var_p;
        }
        if let Some(d) = self.johansen_det {
            c.johansen.deterministic = d;
        }
        if self.johansen_p.is_some() {
            c.johansen.p = self.johansen_p;
        }
        if !self.variables.is_empty() {
            c.connectedness.variables = self.variables.clone();
        }
        if !self.quantiles.is_empty() {
            c.connectedness.quantiles = self.quantiles.clone();
        }
        if !self.grid.is_empty() {
            c.connectedness.grid = self.grid.clone();
        }
        if let Some(h) = self.horizon {
            c.connectedness.horizon = h;
            c.var.horizon = h;
        }
        if let Some(p) = self.qvar_p {
            c.connectedness.p = p;
        }
        if self.npdc_window.is_some() {
            c.connectedness.window = self.npdc_window;
        }
        if self.no_difference {
            c.connectedness.difference = false;
        }
        Ok(c)
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Process spec as JSON (see README); omit with --sample.
    #[arg(long, conflicts_with = "sample")]
    spec: Option<PathBuf>,
    /// Generate the bundled seven-entity offshoring sample instead.
    #[arg(long)]
    sample: bool,
    /// Overrides the seed in the spec.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "simulated")]
    output: PathBuf,
    /// File stem of the panel CSV and manifest.
    #[arg(long, default_value = "panel")]
    name: String,
}

#[derive(Args)]
struct FixtureArgs {
    table: PathBuf,
    /// connectedness (Tables 5-10 layout) or sweep (Tables A2-A5 layout).
    #[arg(long, value_parser = serde_value::<TableKind>)]
    kind: TableKind,
}

fn simulate_cmd(args: &SimulateArgs) -> anyhow::Result<i32> {
    std::fs::create_dir_all(&args.output)?;
    let csv_path = args.output.join(format!("{}.csv", args.name));
    let manifest_path = args.output.join(format!("{}.manifest.json", args.name));
    let mut csv = Vec::new();
    let manifest = if args.sample {
        let (panel, manifest) = bundled_sample(args.seed.unwrap_or(2024))?;
        panel.write_csv(&mut csv)?;
        serde_json::to_string_pretty(&manifest)?
    } else {
        let path = args.spec.as_ref().context("pass --spec <file> or --sample")?;
        let mut spec: ProcessSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if let Some(s) = args.seed {
            spec.seed = s;
        }
        let sim = simulate(&spec)?;
        sim.panel.write_csv(&mut csv)?;
        serde_json::to_string_pretty(&sim.manifest)?
    };
    std::fs::write(&csv_path, csv)?;
    std::fs::write(&manifest_path, manifest + "\n")?;
    println!("{}\n{}", csv_path.display(), manifest_path.display());
    Ok(0)
}

fn fixture_cmd(args: &FixtureArgs) -> anyhow::Result<i32> {
    let file = std::fs::File::open(&args.table).with_context(|| format!("opening {}", args.table.display()))?;
    let report = validate_fixture(file, args.kind)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.passed {
        Ok(0)
    } else {
        eprintln!("identity failures in rows: {}", report.failing_rows.join(", "));
        Ok(8)
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    let (overrides, stages): (&Overrides, Vec<Stage>) = match &cli.command {
        Command::Describe(o) => (o, vec![Stage::Describe]),
        Command::Stationarity(o) => (o, vec![Stage::Stationarity]),
        Command::Rolling(o) => (o, vec![Stage::Rolling]),
        Command::Var(o) => (o, vec![Stage::Var]),
        Command::Granger(o) => (o, vec![Stage::Granger]),
        Command::Johansen(o) => (o, vec![Stage::Johansen]),
        Command::Connectedness(o) => (o, vec![Stage::Connectedness]),
        Command::Sweep(o) => (o, vec![Stage::Sweep]),
        Command::Run(o) => (o, Stage::PIPELINE.to_vec()),
        Command::Simulate(a) => return simulate_cmd(a),
        Command::ValidateFixture(a) => return fixture_cmd(a),
    };
    let config = overrides.resolve()?;
    pipeline::run(&config, &stages)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
