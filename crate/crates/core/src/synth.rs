//! Seeded synthetic processes with known ground truth.

use crate::connectedness::{gfevd, GfevdTable};
use crate::error::{Error, Result};
use crate::linalg::spectral_radius;
use crate::panel::{describe, Description, Panel, VariableRole};
use crate::var::{companion_matrix, VarDynamics};
use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Name and version of the normal generator: ChaCha20 uniforms fed through
/// the Box–Muller transform, both deviates used.
pub const GENERATOR: &str = "chacha20-boxmuller-v1";

#[derive(Debug, Clone)]
pub struct NormalRng {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NormalRng {
    pub fn new(seed: u64) -> Self {
        NormalRng {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let a = std::f64::consts::TAU * u2;
        self.spare = Some(r * a.sin());
        r * a.cos()
    }

    pub fn normal_vec(&mut self, k: usize) -> DVector<f64> {
        DVector::from_fn(k, |_, _| self.standard_normal())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProcessKind {
    WhiteNoise {
        k: usize,
        sd: f64,
    },
    /// `y_t = c + Σ φ_l y_{t-l} + sd ε_t`
    Ar {
        phi: Vec<f64>,
        #[serde(default)]
        intercept: f64,
        sd: f64,
    },
    /// `lags[l][i][j]`, row = equation; innovations `N(0, Σ)`.
    Var {
        lags: Vec<Vec<Vec<f64>>>,
        intercept: Vec<f64>,
        sigma: Vec<Vec<f64>>,
    },
    RandomWalk {
        k: usize,
        sd: f64,
        #[serde(default)]
        drift: f64,
    },
    /// Columns `(y, x)`: `x` a random walk, `y = β x + s`, `s` AR(ρ).
    CointegratedPair {
        beta: f64,
        walk_sd: f64,
        noise_sd: f64,
        #[serde(default)]
        noise_ar: f64,
    },
    /// `y = α + b_t x + e` per entity with `b_t` moving linearly from
    /// `slope_start` to `slope_end`; `x` a random walk.
    TimeVaryingSlopePanel {
        entities: usize,
        intercept: f64,
        slope_start: f64,
        slope_end: f64,
        noise_sd: f64,
    },
}

impl ProcessKind {
    fn stationary(&self) -> bool {
        matches!(self, ProcessKind::WhiteNoise { .. } | ProcessKind::Ar { .. } | ProcessKind::Var { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    #[serde(flatten)]
    pub kind: ProcessKind,
    pub t: usize,
    pub seed: u64,
    /// Defaults to 100 for stationary kinds, 0 otherwise.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "default_start_year")]
    pub start_year: i32,
    /// Horizon of the true GFEVD recorded in the manifest.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
}

fn default_start_year() -> i32 {
    2000
}

fn default_horizon() -> usize {
    crate::connectedness::DEFAULT_HORIZON
}

impl ProcessSpec {
    pub fn new(kind: ProcessKind, t: usize, seed: u64) -> Self {
        ProcessSpec {
            kind,
            t,
            seed,
            burn_in: None,
            start_year: default_start_year(),
            horizon: default_horizon(),
        }
    }

    pub fn effective_burn_in(&self) -> usize {
        self.burn_in.unwrap_or(if self.kind.stationary() { 100 } else { 0 })
    }

    /// True lag matrices and innovation covariance of VAR-type kinds.
    pub fn dynamics(&self) -> Option<VarDynamics> {
        match &self.kind {
            ProcessKind::WhiteNoise { k, sd } => Some(VarDynamics {
                lags: vec![DMatrix::zeros(*k, *k)],
                sigma: DMatrix::identity(*k, *k) * (sd * sd),
            }),
            ProcessKind::Ar { phi, sd, .. } => Some(VarDynamics {
                lags: phi.iter().map(|&a| DMatrix::from_element(1, 1, a)).collect(),
                sigma: DMatrix::from_element(1, 1, sd * sd),
            }),
            ProcessKind::Var { lags, sigma, .. } => {
                let k = sigma.len();
                Some(VarDynamics {
                    lags: lags.iter().map(|a| rows_to_matrix(a, k)).collect(),
                    sigma: rows_to_matrix(sigma, k),
                })
            }
            _ => None,
        }
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| rows.get(i).and_then(|r| r.get(j)).copied().unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator: String,
    pub spec: ProcessSpec,
    pub burn_in: usize,
    pub spectral_radius: Option<f64>,
    pub cointegration_rank: Option<usize>,
    pub cointegrating_vector: Option<Vec<f64>>,
    /// Slope path of the time-varying panel.
    pub slopes: Option<Vec<f64>>,
    pub true_gfevd: Option<GfevdTable>,
    pub description: Description,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub panel: Panel,
    pub manifest: Manifest,
}

fn check_dynamics(d: &VarDynamics) -> Result<f64> {
    let k = d.dim();
    if d.sigma.iter().any(|v| !v.is_finite()) || d.lags.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("VAR matrices must be {k} × {k}")));
    }
    if d.lags.is_empty() {
        return Err(Error::InvalidArgument("VAR needs at least one lag matrix".into()));
    }
    let rho = spectral_radius(&companion_matrix(&d.lags, k));
    if rho >= 1.0 {
        return Err(Error::UnstableSpec(rho));
    }
    Ok(rho)
}

/// Generalized variance shares implied by the specified coefficients.
pub fn true_gfevd(spec: &ProcessSpec, horizon: usize) -> Result<GfevdTable> {
    let d = spec
        .dynamics()
        .ok_or_else(|| Error::InvalidArgument("true GFEVD needs a VAR-type process".into()))?;
    check_dynamics(&d)?;
    gfevd(&d, horizon)
}

/// Simulates `T` draws of a VAR after `burn_in` discarded steps from a zero
/// state.
pub fn simulate_var(
    d: &VarDynamics,
    intercept: &[f64],
    t: usize,
    burn_in: usize,
    rng: &mut NormalRng,
) -> Result<DMatrix<f64>> {
    let k = d.dim();
    let chol = d
        .sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("innovation covariance is not positive definite".into()))?
        .l();
    let c = DVector::from_column_slice(intercept);
    let p = d.lags.len();
    let total = t + burn_in;
    let mut path: Vec<DVector<f64>> = Vec::with_capacity(total);
    for s in 0..total {
        let mut y = &c + &chol * rng.normal_vec(k);
        for l in 1..=p.min(s) {
            y += &d.lags[l - 1] * &path[s - l];
        }
        path.push(y);
    }
    Ok(DMatrix::from_fn(t, k, |r, j| path[burn_in + r][j]))
}

fn random_walk(t: usize, burn_in: usize, sd: f64, drift: f64, rng: &mut NormalRng) -> Vec<f64> {
    let mut x = 0.0;
    let mut out = Vec::with_capacity(t);
    for s in 0..t + burn_in {
        x += drift + sd * rng.standard_normal();
        if s >= burn_in {
            out.push(x);
        }
    }
    out
}

fn single_entity(matrix: &DMatrix<f64>, names: &[&str], start_year: i32) -> Result<Panel> {
    let vars = names.iter().map(|n| VariableRole::Other(n.to_string())).collect();
    let data = vec![(0..matrix.ncols())
        .map(|j| matrix.column(j).iter().map(|&v| Some(v)).collect())
        .collect()];
    Panel::new(vec!["sim".to_string()], vars, start_year, data)
}

fn numbered(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}{i}")).collect()
}

/// Generates the process described by `spec`; a pure function of the spec.
pub fn simulate(spec: &ProcessSpec) -> Result<Simulation> {
    if spec.t == 0 {
        return Err(Error::InvalidArgument("T must be positive".into()));
    }
    let burn = spec.effective_burn_in();
    let mut rng = NormalRng::new(spec.seed);
    let mut spectral = None;
    let mut rank = None;
    let mut vector = None;
    let mut slopes = None;
    let mut gfevd_table = None;
    let panel = match &spec.kind {
        ProcessKind::RandomWalk { k, sd, drift } => {
            let cols: Vec<Vec<f64>> = (0..*k).map(|_| random_walk(spec.t, burn, *sd, *drift, &mut rng)).collect();
            let m = DMatrix::from_fn(spec.t, *k, |r, j| cols[j][r]);
            rank = Some(0);
            let names = numbered("y", *k);
            single_entity(&m, &names.iter().map(String::as_str).collect::<Vec<_>>(), spec.start_year)?
        }
        ProcessKind::CointegratedPair { beta, walk_sd, noise_sd, noise_ar } => {
            if noise_ar.abs() >= 1.0 {
                return Err(Error::UnstableSpec(noise_ar.abs()));
            }
            let x = random_walk(spec.t, burn, *walk_sd, 0.0, &mut rng);
            let mut s = 0.0;
            let mut y = Vec::with_capacity(spec.t);
            for xi in &x {
                s = noise_ar * s + noise_sd * rng.standard_normal();
                y.push(beta * xi + s);
            }
            let m = DMatrix::from_fn(spec.t, 2, |r, j| if j == 0 { y[r] } else { x[r] });
            rank = Some(1);
            vector = Some(vec![1.0, -beta]);
            single_entity(&m, &["y", "x"], spec.start_year)?
        }
        ProcessKind::TimeVaryingSlopePanel { entities, intercept, slope_start, slope_end, noise_sd } => {
            if *entities == 0 {
                return Err(Error::EmptyPanel);
            }
            let path: Vec<f64> = (0..spec.t)
                .map(|i| {
                    let w = if spec.t > 1 { i as f64 / (spec.t - 1) as f64 } else { 0.0 };
                    slope_start + w * (slope_end - slope_start)
                })
                .collect();
            let mut data = Vec::with_capacity(*entities);
            for _ in 0..*entities {
                let x = random_walk(spec.t, burn, 1.0, 0.0, &mut rng);
                let y: Vec<Option<f64>> = x
                    .iter()
                    .zip(&path)
                    .map(|(xi, b)| Some(intercept + b * xi + noise_sd * rng.standard_normal()))
                    .collect();
                data.push(vec![y, x.into_iter().map(Some).collect()]);
            }
            slopes = Some(path);
            Panel::new(
                numbered("e", *entities),
                vec![VariableRole::Other("y".into()), VariableRole::Other("x".into())],
                spec.start_year,
                data,
            )?
        }
        kind => {
            let d = spec.dynamics().expect("VAR-type kind");
            let k = d.dim();
            let intercept = match kind {
                ProcessKind::Ar { intercept, .. } => vec![*intercept],
                ProcessKind::Var { intercept, .. } => {
                    if intercept.len() != k || spec_var_shape_bad(kind, k) {
                        return Err(Error::InvalidArgument(format!("VAR matrices must be {k} × {k}")));
                    }
                    intercept.clone()
                }
                _ => vec![0.0; k],
            };
            let rho = check_dynamics(&d)?;
            spectral = Some(rho);
            gfevd_table = Some(gfevd(&d, spec.horizon)?);
            let m = simulate_var(&d, &intercept, spec.t, burn, &mut rng)?;
            let names = numbered("y", k);
            single_entity(&m, &names.iter().map(String::as_str).collect::<Vec<_>>(), spec.start_year)?
        }
    };
    let description = describe(&panel)?;
    Ok(Simulation {
        panel,
        manifest: Manifest {
            generator: GENERATOR.to_string(),
            spec: spec.clone(),
            burn_in: burn,
            spectral_radius: spectral,
            cointegration_rank: rank,
            cointegrating_vector: vector,
            slopes,
            true_gfevd: gfevd_table,
            description,
        },
    })
}

fn spec_var_shape_bad(kind: &ProcessKind, k: usize) -> bool {
    match kind {
        ProcessKind::Var { lags, sigma, .. } => {
            sigma.iter().any(|r| r.len() != k)
                || lags.iter().any(|a| a.len() != k || a.iter().any(|r| r.len() != k))
        }
        _ => false,
    }
}

pub const SAMPLE_ENTITIES: [&str; 7] = [
    "China",
    "Indonesia",
    "Malaysia",
    "The Philippines",
    "Singapore",
    "Thailand",
    "Vietnam",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub generator: String,
    pub seed: u64,
    pub years: usize,
    pub start_year: i32,
    pub entities: Vec<String>,
    /// Cross-country VAR(1) driving the growth of iep and fdi.
    pub growth_lags: Vec<Vec<f64>>,
    pub growth_sigma: Vec<Vec<f64>>,
    pub description: Description,
}

/// Seven-entity annual panel, 21 years, positive levels of the five
/// offshoring variables. Growth rates of iep and fdi follow a cross-country
/// VAR(1) in which the first entity leads; trd, inv and ifr are tied to them
/// in logs.
pub fn bundled_sample(seed: u64) -> Result<(Panel, SampleManifest)> {
    const YEARS: usize = 21;
    const START: i32 = 2000;
    let k = SAMPLE_ENTITIES.len();
    let a = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            0.3
        } else if j == 0 {
            0.25
        } else if j == (i + 1) % k {
            0.08
        } else {
            0.0
        }
    });
    let sigma = DMatrix::from_fn(k, k, |i, j| if i == j { 0.0016 } else { 0.0004 });
    let growth = VarDynamics {
        lags: vec![a.clone()],
        sigma: sigma.clone(),
    };
    check_dynamics(&growth)?;
    let mut rng = NormalRng::new(seed);
    let iep_growth = simulate_var(&growth, &vec![0.03; k], YEARS, 100, &mut rng)?;
    let fdi_growth = simulate_var(&growth, &vec![0.02; k], YEARS, 100, &mut rng)?;
    let mut data = Vec::with_capacity(k);
    for e in 0..k {
        let base = 1.0 + 0.5 * e as f64;
        let ifr = random_walk(YEARS, 0, 0.03, 0.04, &mut rng);
        let mut trd = Vec::with_capacity(YEARS);
        let mut s = 0.0;
        for &f in &ifr {
            s = 0.5 * s + 0.05 * rng.standard_normal();
            trd.push(0.6 * f + s);
        }
        let mut iep = Vec::with_capacity(YEARS);
        let mut fdi = Vec::with_capacity(YEARS);
        let (mut gi, mut gf) = (0.0, 0.0);
        for t in 0..YEARS {
            gi += iep_growth[(t, e)];
            gf += fdi_growth[(t, e)];
            fdi.push(gf + 0.5 * trd[t] + 0.4 * ifr[t] + 0.04 * rng.standard_normal());
            iep.push(gi + 0.3 * fdi[t]);
        }
        let inv: Vec<f64> = (0..YEARS)
            .map(|t| 0.5 * trd[t] + 0.7 * ifr[t] + 0.06 * rng.standard_normal())
            .collect();
        let level = |offset: f64, logs: &[f64]| -> Vec<Option<f64>> {
            logs.iter().map(|v| Some((base + offset + v).exp())).collect()
        };
        data.push(vec![
            level(2.0, &fdi),
            level(0.5, &trd),
            level(3.0, &inv),
            level(4.0, &ifr),
            level(5.0, &iep),
        ]);
    }
    let panel = Panel::new(
        SAMPLE_ENTITIES.iter().map(|s| s.to_string()).collect(),
        VariableRole::SYSTEM.to_vec(),
        START,
        data,
    )?;
    let to_rows = |m: &DMatrix<f64>| (0..k).map(|i| m.row(i).iter().copied().collect()).collect();
    let manifest = SampleManifest {
        generator: GENERATOR.to_string(),
        seed,
        years: YEARS,
        start_year: START,
        entities: panel.entities().to_vec(),
        growth_lags: to_rows(&a),
        growth_sigma: to_rows(&sigma),
        description: describe(&panel)?,
    };
    Ok((panel, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_moments() {
        let mut rng = NormalRng::new(7);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.01);
    }

    #[test]
    fn unstable_rejected() {
        let spec = ProcessSpec::new(ProcessKind::Ar { phi: vec![1.01], intercept: 0.0, sd: 1.0 }, 50, 1);
        assert!(matches!(simulate(&spec), Err(Error::UnstableSpec(_))));
        assert!(matches!(true_gfevd(&spec, 10), Err(Error::UnstableSpec(_))));
    }

    #[test]
    fn burn_in_defaults() {
        let ar = ProcessSpec::new(ProcessKind::Ar { phi: vec![0.5], intercept: 0.0, sd: 1.0 }, 10, 1);
        let rw = ProcessSpec::new(ProcessKind::RandomWalk { k: 1, sd: 1.0, drift: 0.0 }, 10, 1);
        assert_eq!(ar.effective_burn_in(), 100);
        assert_eq!(rw.effective_burn_in(), 0);
    }

    #[test]
    fn cointegrated_pair_manifest() {
        let spec = ProcessSpec::new(
            ProcessKind::CointegratedPair { beta: 2.0, walk_sd: 1.0, noise_sd: 1.0, noise_ar: 0.0 },
            100,
            3,
        );
        let sim = simulate(&spec).unwrap();
        assert_eq!(sim.manifest.cointegration_rank, Some(1));
        assert_eq!(sim.manifest.cointegrating_vector, Some(vec![1.0, -2.0]));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = ProcessSpec::new(
            ProcessKind::Var {
                lags: vec![vec![vec![0.5, 0.1], vec![0.0, 0.3]]],
                intercept: vec![0.0, 1.0],
                sigma: vec![vec![1.0, 0.2], vec![0.2, 1.0]],
            },
            100,
            42,
        );
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"var\""));
        let back: ProcessSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn sample_shape() {
        let (panel, manifest) = bundled_sample(2024).unwrap();
        assert_eq!(panel.entities().len(), 7);
        assert_eq!(panel.len(), 21);
        assert_eq!(panel.variables().len(), 5);
        assert_eq!(manifest.description, describe(&panel).unwrap());
    }
}
