//! Run configurations. Unknown fields are rejected and relative paths are
//! resolved against the directory of the config file.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qpe_core::gluing::{EmbeddingSpec, GluingConfig};
use qpe_core::verify::FrequencyOptions;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Parsed config plus the raw document echoed into the manifest.
pub struct Loaded<T> {
    pub config: T,
    pub raw: serde_json::Value,
    pub base: PathBuf,
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("config {} is not valid JSON", path.display()))?;
    let config = serde_json::from_value(raw.clone()).with_context(|| format!("invalid config {}", path.display()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, raw, base })
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct State {
    #[serde(default)]
    pub theta: Vec<f64>,
    #[serde(default)]
    pub t: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructConfig {
    pub gluing: GluingConfig,
    /// Defaults to one torus angle per tube coordinate with the tube speeds
    /// as frequency; absent and all speeds zero means a stationary bundle.
    #[serde(default)]
    pub embedding: Option<EmbeddingSpec>,
    /// `(θ, t)` pairs to sample `U(θ + νt)` at; defaults to `θ = 0, t = 0`.
    #[serde(default)]
    pub states: Vec<State>,
    #[serde(default)]
    pub resolution: Option<usize>,
    #[serde(default)]
    pub symmetry_resolution: Option<usize>,
}

/// `q` as a number or the string `"inf"`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Finite(f64),
    Named(Infinity),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Infinity {
    Inf,
}

impl Exponent {
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(q) => q,
            Exponent::Named(Infinity::Inf) => f64::INFINITY,
        }
    }
}

/// A built-in stream function id or a QPF1 scalar file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Psi0 {
    Builtin(String),
    File { file: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproximateConfig {
    pub psi0: Psi0,
    pub q: Exponent,
    pub ns: Vec<usize>,
    /// Number of vertical lines.
    #[serde(rename = "N", default = "two")]
    pub lines: usize,
    /// Strip speeds; all ones when absent.
    #[serde(default)]
    pub nu: Option<Vec<f64>>,
    #[serde(default = "res_256")]
    pub resolution: usize,
    /// Test functions for the pairing table when `q = inf`.
    #[serde(default = "default_tests")]
    pub tests: Vec<String>,
    #[serde(default = "yes")]
    pub samples: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualCheck {
    #[serde(default = "tol_residual")]
    pub tolerance: f64,
}

impl Default for ResidualCheck {
    fn default() -> Self {
        Self { tolerance: tol_residual() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverCheck {
    #[serde(default = "res_256")]
    pub resolution: usize,
    #[serde(default = "solver_dt")]
    pub dt: f64,
    #[serde(default = "solver_horizon")]
    pub horizon: f64,
    /// Bound on the sup velocity error at the horizon.
    #[serde(default = "solver_tol")]
    pub tolerance: f64,
}

impl Default for SolverCheck {
    fn default() -> Self {
        Self { resolution: 256, dt: solver_dt(), horizon: solver_horizon(), tolerance: solver_tol() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Probe {
    /// `Re ⨍ u_c e^{-ik·x}`; defaults to the first moving axis.
    Mode {
        #[serde(default)]
        k: Option<Vec<i64>>,
        #[serde(default)]
        component: usize,
        #[serde(default)]
        resolution: Option<usize>,
    },
    /// `u(t, x)·e`; without `x` the point is drawn inside the first tube
    /// from the run seed.
    Point {
        #[serde(default)]
        x: Option<Vec<f64>>,
        #[serde(default)]
        e: Option<Vec<f64>>,
    },
}

impl Default for Probe {
    fn default() -> Self {
        Probe::Mode { k: None, component: 0, resolution: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyCheck {
    #[serde(default)]
    pub probe: Probe,
    #[serde(default = "freq_dt")]
    pub dt: f64,
    #[serde(default = "freq_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub options: FrequencyOptions,
}

impl Default for FrequencyCheck {
    fn default() -> Self {
        Self { probe: Probe::default(), dt: freq_dt(), horizon: freq_horizon(), options: FrequencyOptions::default() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitCheck {
    #[serde(default = "orbit_delta")]
    pub delta: f64,
    #[serde(default = "orbit_horizon")]
    pub horizon: f64,
    #[serde(default = "orbit_threshold")]
    pub threshold: f64,
}

impl Default for OrbitCheck {
    fn default() -> Self {
        Self { delta: orbit_delta(), horizon: orbit_horizon(), threshold: orbit_threshold() }
    }
}

/// Every check runs with defaults unless set to `null`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub bundle: PathBuf,
    #[serde(default = "some_default")]
    pub residual: Option<ResidualCheck>,
    #[serde(default = "some_default")]
    pub solver: Option<SolverCheck>,
    #[serde(default = "some_default")]
    pub frequency: Option<FrequencyCheck>,
    #[serde(default = "some_default")]
    pub orbit: Option<OrbitCheck>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initial {
    Random {
        #[serde(default = "res_256")]
        resolution: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "kmax")]
        kmax: i64,
    },
    /// A planar scalar vorticity in QPF1.
    File { path: PathBuf },
    /// The vorticity of a planar construct bundle at one of its states.
    Bundle {
        path: PathBuf,
        #[serde(default)]
        state: usize,
        #[serde(default = "res_256")]
        resolution: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub initial: Initial,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub snapshots: Option<Vec<f64>>,
    #[serde(default)]
    pub mean_velocity: Option<[f64; 2]>,
    /// Bound on the relative energy and enstrophy drift; reported only when absent.
    #[serde(default)]
    pub drift_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Signal {
    /// A probe of the solution in a construct bundle.
    Bundle {
        path: PathBuf,
        #[serde(default)]
        state: usize,
        #[serde(default)]
        probe: Probe,
        #[serde(default = "freq_dt")]
        dt: f64,
        #[serde(default = "freq_horizon")]
        horizon: f64,
    },
    /// One column of a CSV file with uniform sampling `dt`.
    Csv { path: PathBuf, column: String, dt: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub signal: Signal,
    /// Frequency vector; taken from the bundle when absent.
    #[serde(default)]
    pub nu: Option<Vec<f64>>,
    #[serde(default)]
    pub options: FrequencyOptions,
    #[serde(default)]
    pub seed: Option<u64>,
}

pub fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("{name} must be positive and finite, got {v}");
    }
    Ok(())
}

fn two() -> usize {
    2
}
fn yes() -> bool {
    true
}
fn res_256() -> usize {
    256
}
fn kmax() -> i64 {
    8
}
fn default_tests() -> Vec<String> {
    ["one", "cos_x1", "cos_x2"].map(String::from).to_vec()
}
fn tol_residual() -> f64 {
    1e-6
}
fn solver_dt() -> f64 {
    0.005
}
fn solver_horizon() -> f64 {
    0.5
}
fn solver_tol() -> f64 {
    1e-3
}
fn freq_dt() -> f64 {
    0.25
}
fn freq_horizon() -> f64 {
    200.0 * PI
}
fn orbit_delta() -> f64 {
    0.2
}
fn orbit_horizon() -> f64 {
    2000.0
}
fn orbit_threshold() -> f64 {
    0.99
}
fn some_default<T: Default>() -> Option<T> {
    Some(T::default())
}
