//! Traveling tubes glued on the torus.
//!
//! Split `x = (x', x'')` with `x' ∈ T^m`. Each tube `j` carries a copy of a
//! steady flow centered at `y^j` in `x'`, translating in `x''` with speed
//! `ν̄^j`, on top of the shear `w(x) = (0, Σ_j ν̄^j χ(ρ(x', y^j)))`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, SampledField};
use crate::profile::{CutoffChi, DEFAULT_SHARPNESS};
use crate::spectral::SpectralWorkspace;
use crate::stationary::{ExternalSteadyState, StationaryFlow, SteadyState};
use crate::torus::{dist_raw, reduce, wrap, FrequencyVector};
use crate::{TimeField, VectorField};

/// Base flow description inside a [`GluingConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseFlowSpec {
    /// The even-dimensional rotation flow with the given profile sharpness.
    ClosedForm {
        #[serde(default = "default_sharpness")]
        sharpness: f64,
    },
    /// A named 3D closed form, see [`ExternalSteadyState::from_closed_form`].
    External { id: String },
}

fn default_sharpness() -> f64 {
    DEFAULT_SHARPNESS
}

impl Default for BaseFlowSpec {
    fn default() -> Self {
        Self::ClosedForm { sharpness: DEFAULT_SHARPNESS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluingConfig {
    pub d: usize,
    pub m: usize,
    #[serde(rename = "J")]
    pub j: usize,
    pub eps: f64,
    pub centers: Vec<Vec<f64>>,
    pub speeds: Vec<Vec<f64>>,
    #[serde(default)]
    pub base_flow: BaseFlowSpec,
    pub cutoff: CutoffChi,
}

impl GluingConfig {
    /// Config with centers equally spaced along the first axis of `T^m`.
    pub fn with_default_centers(d: usize, m: usize, eps: f64, speeds: Vec<Vec<f64>>) -> Self {
        let j = speeds.len();
        Self {
            d,
            m,
            j,
            eps,
            centers: default_centers(j, m),
            speeds,
            base_flow: BaseFlowSpec::default(),
            cutoff: CutoffChi { eps },
        }
    }
}

pub fn default_centers(j: usize, m: usize) -> Vec<Vec<f64>> {
    (0..j)
        .map(|k| {
            let mut c = vec![0.0; m];
            if m > 0 {
                c[0] = TAU * k as f64 / j as f64;
            }
            c
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    SplitIndex { d: usize, m: usize },
    TubeCount { declared: usize, centers: usize, speeds: usize },
    CenterDim { tube: usize, expected: usize, got: usize },
    SpeedDim { tube: usize, expected: usize, got: usize },
    NonFinite { what: String },
    EpsNotPositive { eps: f64 },
    Separation { j: usize, k: usize, distance: f64, required: f64 },
    SupportTooLarge { eps: f64 },
    CutoffMismatch { cutoff_eps: f64, eps: f64 },
    BaseFlow { reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SplitIndex { d, m } => write!(f, "split index m={m} must satisfy 1 ≤ m ≤ d-1 with d={d}"),
            Self::TubeCount { declared, centers, speeds } => {
                write!(f, "J={declared} but {centers} centers and {speeds} speeds were given")
            }
            Self::CenterDim { tube, expected, got } => {
                write!(f, "center of tube {tube} has {got} coordinates, expected {expected}")
            }
            Self::SpeedDim { tube, expected, got } => {
                write!(f, "speed of tube {tube} has {got} entries, expected {expected}")
            }
            Self::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Self::EpsNotPositive { eps } => write!(f, "eps must be positive, got {eps}"),
            Self::Separation { j, k, distance, required } => {
                write!(f, "tube separation violated: ρ(y{j}, y{k}) = {distance:.6} must exceed 4ε = {required:.6}")
            }
            Self::SupportTooLarge { eps } => write!(f, "eps = {eps} too large: the cutoff radius 2ε must stay below π"),
            Self::CutoffMismatch { cutoff_eps, eps } => {
                write!(f, "cutoff eps {cutoff_eps} differs from tube eps {eps}")
            }
            Self::BaseFlow { reason } => write!(f, "base flow: {reason}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Advisory notes that do not invalidate the config.
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn message(&self) -> String {
        self.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
    }
}

/// Checks the geometric requirements of a config. Never panics.
pub fn validate_config(c: &GluingConfig) -> ValidationReport {
    let mut r = ValidationReport::default();
    let v = &mut r.violations;
    if c.m == 0 || c.m >= c.d {
        v.push(Violation::SplitIndex { d: c.d, m: c.m });
        return r;
    }
    if c.centers.len() != c.j || c.speeds.len() != c.j {
        v.push(Violation::TubeCount { declared: c.j, centers: c.centers.len(), speeds: c.speeds.len() });
        return r;
    }
    for (t, y) in c.centers.iter().enumerate() {
        if y.len() != c.m {
            v.push(Violation::CenterDim { tube: t, expected: c.m, got: y.len() });
        }
        if y.iter().any(|a| !a.is_finite()) {
            v.push(Violation::NonFinite { what: format!("center {t}") });
        }
    }
    for (t, s) in c.speeds.iter().enumerate() {
        if s.len() != c.d - c.m {
            v.push(Violation::SpeedDim { tube: t, expected: c.d - c.m, got: s.len() });
        }
        if s.iter().any(|a| !a.is_finite()) {
            v.push(Violation::NonFinite { what: format!("speed {t}") });
        }
    }
    if !(c.eps > 0.0 && c.eps.is_finite()) {
        v.push(Violation::EpsNotPositive { eps: c.eps });
        return r;
    }
    if !v.is_empty() {
        return r;
    }
    for a in 0..c.j {
        for b in a + 1..c.j {
            let dist = dist_raw(&c.centers[a], &c.centers[b]);
            if dist <= 4.0 * c.eps {
                v.push(Violation::Separation { j: a + 1, k: b + 1, distance: dist, required: 4.0 * c.eps });
            }
        }
    }
    if 2.0 * c.eps >= PI {
        v.push(Violation::SupportTooLarge { eps: c.eps });
    }
    if c.cutoff.eps != c.eps {
        v.push(Violation::CutoffMismatch { cutoff_eps: c.cutoff.eps, eps: c.eps });
    }
    match &c.base_flow {
        BaseFlowSpec::ClosedForm { sharpness } => {
            if !c.d.is_multiple_of(2) {
                v.push(Violation::BaseFlow { reason: format!("closed form needs even d, got {}", c.d) });
            }
            if !(*sharpness > 0.0) {
                v.push(Violation::BaseFlow { reason: "sharpness must be positive".into() });
            }
        }
        BaseFlowSpec::External { id } => {
            if c.d != 3 {
                v.push(Violation::BaseFlow { reason: format!("external flows are three-dimensional, d={}", c.d) });
            }
            if !crate::stationary::CLOSED_FORMS.contains(&id.as_str()) {
                v.push(Violation::BaseFlow { reason: format!("unknown closed form {id:?}") });
            }
        }
    }
    if c.j > 0 && c.eps > TAU / (10.0 * c.j as f64) {
        r.warnings.push(format!(
            "eps = {} exceeds the conservative spacing heuristic 2π/(10J) = {}",
            c.eps,
            TAU / (10.0 * c.j as f64)
        ));
    }
    r
}

/// Base flow of a glued solution.
#[derive(Debug, Clone)]
pub enum BaseFlow {
    Closed(StationaryFlow),
    External(ExternalSteadyState),
}

impl SteadyState for BaseFlow {
    fn dim(&self) -> usize {
        match self {
            Self::Closed(f) => f.dim(),
            Self::External(f) => f.dim(),
        }
    }
    fn support_radius(&self) -> f64 {
        match self {
            Self::Closed(f) => f.support_radius(),
            Self::External(f) => f.support_radius(),
        }
    }
    fn velocity(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Closed(f) => f.velocity(x, out),
            Self::External(f) => f.velocity(x, out),
        }
    }
    fn pressure(&self, x: &[f64]) -> Option<f64> {
        match self {
            Self::Closed(f) => f.pressure(x),
            Self::External(f) => f.pressure(x),
        }
    }
    fn has_pressure(&self) -> bool {
        match self {
            Self::Closed(f) => f.has_pressure(),
            Self::External(f) => f.has_pressure(),
        }
    }
}

/// The glued time-dependent solution.
#[derive(Debug, Clone)]
pub struct GluedSolution {
    config: GluingConfig,
    base: BaseFlow,
    phases: Vec<Vec<f64>>,
}

impl GluedSolution {
    pub fn new(config: GluingConfig) -> Result<Self> {
        let rep = validate_config(&config);
        if !rep.is_valid() {
            return Err(Error::InvalidParameter(rep.message()));
        }
        let base = match &config.base_flow {
            BaseFlowSpec::ClosedForm { sharpness } => {
                BaseFlow::Closed(StationaryFlow::with_radius(config.d, config.eps, *sharpness)?)
            }
            BaseFlowSpec::External { id } => BaseFlow::External(ExternalSteadyState::from_closed_form(id, config.eps)?),
        };
        Self::with_base(config, base)
    }

    /// Uses a caller-provided base flow (for example one read from a file).
    pub fn with_base(config: GluingConfig, base: BaseFlow) -> Result<Self> {
        let mut rep = validate_config(&config);
        rep.violations.retain(|v| !matches!(v, Violation::BaseFlow { .. }));
        if !rep.is_valid() {
            return Err(Error::InvalidParameter(rep.message()));
        }
        if base.dim() != config.d {
            return Err(Error::DimensionMismatch { expected: config.d, got: base.dim() });
        }
        if (base.support_radius() - config.eps).abs() > 1e-12 * config.eps {
            return Err(Error::InvalidParameter(format!(
                "base flow support radius {} differs from eps {}",
                base.support_radius(),
                config.eps
            )));
        }
        let phases = vec![vec![0.0; config.d - config.m]; config.j];
        Ok(Self { config, base, phases })
    }

    pub fn config(&self) -> &GluingConfig {
        &self.config
    }

    pub fn base(&self) -> &BaseFlow {
        &self.base
    }

    /// Replaces per-tube speeds and phase offsets.
    pub fn with_motion(mut self, speeds: Vec<Vec<f64>>, phases: Vec<Vec<f64>>) -> Result<Self> {
        let k = self.config.d - self.config.m;
        if speeds.len() != self.config.j
            || phases.len() != self.config.j
            || speeds.iter().chain(&phases).any(|v| v.len() != k)
        {
            return Err(Error::InvalidParameter("speed/phase blocks do not match the tubes".into()));
        }
        self.config.speeds = speeds;
        self.phases = phases;
        Ok(self)
    }

    pub fn phases(&self) -> &[Vec<f64>] {
        &self.phases
    }

    fn chi(&self) -> &CutoffChi {
        &self.config.cutoff
    }

    /// Shear background `w(x) = (0, F(x'))`.
    pub fn eval_w(&self, x: &[f64], out: &mut [f64]) {
        let c = &self.config;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (y, s) in c.centers.iter().zip(&c.speeds) {
            let rho = dist_raw(&x[..c.m], y);
            if rho >= 2.0 * c.eps {
                continue;
            }
            let k = self.chi().eval(rho);
            for (o, sv) in out[c.m..].iter_mut().zip(s) {
                *o += sv * k;
            }
        }
    }

    /// Local coordinates of `x` in tube `j` at time `t`, if inside `B'(y^j; ε)`.
    fn local(&self, j: usize, t: f64, x: &[f64], z: &mut [f64]) -> bool {
        let c = &self.config;
        let mut r2 = 0.0;
        for i in 0..c.m {
            z[i] = wrap(x[i] - c.centers[j][i]);
            r2 += z[i] * z[i];
        }
        if r2 >= c.eps * c.eps {
            return false;
        }
        for i in 0..c.d - c.m {
            z[c.m + i] = wrap(x[c.m + i] - self.phases[j][i] - c.speeds[j][i] * t);
        }
        true
    }

    pub fn eval_solution(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.config.d];
        self.eval_at(t, x, &mut out);
        out
    }

    pub fn eval_pressure(&self, t: f64, x: &[f64]) -> Result<f64> {
        if !self.base.has_pressure() {
            return Err(Error::MissingPressure(
                "the base flow has no pressure; use the Leray-projected residual".into(),
            ));
        }
        let mut z = vec![0.0; self.config.d];
        let mut p = 0.0;
        for j in 0..self.config.j {
            if self.local(j, t, x, &mut z) {
                p += self.base.pressure(&z).unwrap_or(0.0);
            }
        }
        Ok(p)
    }

    /// `Δψ` of the planar closed-form solution, with `u = (∂₂ψ, -∂₁ψ)`.
    pub fn vorticity_2d(&self, t: f64, x: &[f64]) -> Result<f64> {
        let BaseFlow::Closed(flow) = &self.base else {
            return Err(Error::InvalidParameter("planar vorticity needs the closed-form base".into()));
        };
        if self.config.d != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: self.config.d });
        }
        let c = &self.config;
        let mut z = [0.0; 2];
        let mut w = 0.0;
        for j in 0..c.j {
            if self.local(j, t, x, &mut z) {
                w += flow.laplacian_stream_2d(&z);
            }
            let a = wrap(x[0] - c.centers[j][0]);
            w -= c.speeds[j][0] * self.chi().derivative(a);
        }
        Ok(w)
    }

    /// Spatial mean of the velocity; only the shear contributes.
    pub fn mean_velocity(&self) -> Vec<f64> {
        let c = &self.config;
        // the shear depends on x' only: integrate over T^m by a uniform rule
        let n = 256usize;
        let total = n.pow(c.m as u32);
        let mut acc = vec![0.0; c.d];
        let mut x = vec![0.0; c.d];
        let mut w = vec![0.0; c.d];
        for idx in 0..total {
            let mut r = idx;
            for xi in x.iter_mut().take(c.m) {
                *xi = TAU * (r % n) as f64 / n as f64;
                r /= n;
            }
            self.eval_w(&x, &mut w);
            acc.iter_mut().zip(&w).for_each(|(a, b)| *a += b);
        }
        acc.iter().map(|a| a / total as f64).collect()
    }
}

impl TimeField for GluedSolution {
    fn dim(&self) -> usize {
        self.config.d
    }
    fn eval_at(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.eval_w(x, out);
        let mut z = vec![0.0; self.config.d];
        let mut v = vec![0.0; self.config.d];
        for j in 0..self.config.j {
            if self.local(j, t, x, &mut z) {
                self.base.velocity(&z, &mut v);
                out.iter_mut().zip(&v).for_each(|(o, a)| *o += a);
            }
        }
    }
}

impl crate::TimeScalar for GluedSolution {
    fn value_at(&self, t: f64, x: &[f64]) -> f64 {
        self.eval_pressure(t, x).unwrap_or(0.0)
    }
}

/// Linear torus embedding `θ ↦ Aθ mod 2π` with frequency `ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub matrix: Vec<Vec<i64>>,
    pub frequency: FrequencyVector,
}

impl EmbeddingSpec {
    /// The identity embedding, one torus angle per tube coordinate.
    pub fn identity(frequency: FrequencyVector) -> Self {
        let n = frequency.dim();
        let matrix = (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect();
        Self { n, matrix, frequency }
    }

    pub fn validate(&self, config: &GluingConfig) -> Result<()> {
        let rows = config.j * (config.d - config.m);
        if self.matrix.len() != rows {
            return Err(Error::InvalidParameter(format!(
                "embedding matrix has {} rows, expected J(d-m) = {rows}",
                self.matrix.len()
            )));
        }
        if self.frequency.dim() != self.n || self.matrix.iter().any(|r| r.len() != self.n) {
            return Err(Error::InvalidParameter(format!(
                "embedding matrix and frequency must have N = {} columns",
                self.n
            )));
        }
        for col in 0..self.n {
            let unit = self.matrix.iter().any(|r| r.iter().enumerate().all(|(k, &a)| a == i64::from(k == col)));
            if !unit {
                return Err(Error::InvalidParameter(format!(
                    "embedding not certified injective: no row equals unit vector e{}",
                    col + 1
                )));
            }
        }
        Ok(())
    }

    fn blocks(&self, v: &[f64], k: usize, reduce_mod: bool) -> Vec<Vec<f64>> {
        self.matrix
            .chunks(k)
            .map(|block| {
                block
                    .iter()
                    .map(|row| {
                        let s: f64 = row.iter().zip(v).map(|(&a, b)| a as f64 * b).sum();
                        if reduce_mod {
                            reduce(s)
                        } else {
                            s
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Per-tube speeds `Aν`.
    pub fn tube_speeds(&self, k: usize) -> Vec<Vec<f64>> {
        self.blocks(self.frequency.entries(), k, false)
    }

    /// Per-tube phases `Aθ mod 2π`.
    pub fn tube_phases(&self, theta: &[f64], k: usize) -> Vec<Vec<f64>> {
        self.blocks(theta, k, true)
    }
}

/// `U(θ + νt)` frozen as a vector field on `T^d`.
pub struct EmbeddedField {
    pub solution: GluedSolution,
    pub t: f64,
}

impl VectorField for EmbeddedField {
    fn dim(&self) -> usize {
        self.solution.config.d
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        self.solution.eval_at(self.t, x, out)
    }
}

/// The glued solution driven by an embedding, with phases `Aθ` and speeds `Aν`.
pub fn embedded_solution(theta: &[f64], config: &GluingConfig, spec: &EmbeddingSpec) -> Result<GluedSolution> {
    spec.validate(config)?;
    if theta.len() != spec.n {
        return Err(Error::DimensionMismatch { expected: spec.n, got: theta.len() });
    }
    let k = config.d - config.m;
    let speeds = spec.tube_speeds(k);
    let phases = spec.tube_phases(theta, k);
    let mut cfg = config.clone();
    cfg.speeds = speeds.clone();
    GluedSolution::new(cfg)?.with_motion(speeds, phases)
}

/// Evaluator of `U(θ + νt)`; at `t = 0` this is the initial datum `u_θ`.
pub fn embed_u(theta: &[f64], t: f64, config: &GluingConfig, spec: &EmbeddingSpec) -> Result<EmbeddedField> {
    Ok(EmbeddedField { solution: embedded_solution(theta, config, spec)?, t })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonSymmetryReport {
    pub dim: usize,
    pub resolution: usize,
    pub rank: usize,
    pub active_modes: usize,
    pub threshold: f64,
    pub non_symmetric: bool,
}

/// Rank of the integer span of the active Fourier wavevectors of `field`.
pub fn non_symmetry_check(field: &(impl VectorField + ?Sized), n: usize) -> Result<NonSymmetryReport> {
    let d = field.dim();
    if n < 16 {
        return Err(Error::Resolution(format!("non-symmetry check needs ≥ 16 points per axis, got {n}")));
    }
    let grid = Grid::cube(d, n);
    let ws = SpectralWorkspace::new(&grid)?;
    let u = SampledField::sample_vector(grid.clone(), field);
    let spectra: Vec<Vec<f64>> =
        (0..u.components).map(|c| ws.forward_real(u.component(c)).iter().map(|z| z.norm()).collect()).collect();
    let max = spectra.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let threshold = 1e-8 * max;
    let mut basis = IntBasis::new(d);
    let mut active = 0;
    if max > 0.0 {
        for i in 0..grid.len() {
            if spectra.iter().any(|s| s[i] > threshold) {
                active += 1;
                if basis.rank() < d {
                    let k: Vec<i128> = (0..d).map(|a| ws.int_freq(i, a) as i128).collect();
                    basis.insert(k);
                }
            }
        }
    }
    let rank = basis.rank();
    Ok(NonSymmetryReport { dim: d, resolution: n, rank, active_modes: active, threshold, non_symmetric: rank == d })
}

/// Fraction-free row echelon basis over the integers.
struct IntBasis {
    rows: Vec<(usize, Vec<i128>)>,
}

impl IntBasis {
    fn new(_d: usize) -> Self {
        Self { rows: Vec::new() }
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }

    fn insert(&mut self, mut v: Vec<i128>) {
        for (p, b) in &self.rows {
            if v[*p] != 0 {
                let (a, c) = (b[*p], v[*p]);
                v.iter_mut().zip(b).for_each(|(x, y)| *x = *x * a - *y * c);
                let g = v.iter().fold(0i128, |g, &x| gcd(g, x.abs()));
                if g > 1 {
                    v.iter_mut().for_each(|x| *x /= g);
                }
            }
        }
        if let Some(p) = v.iter().position(|&x| x != 0) {
            self.rows.push((p, v));
        }
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Fraction of cells of side `≤ δ` in `T^N` visited by `θ₀ + νt`, `t ∈ [0, T]`.
pub fn orbit_density_diagnostic(frequency: &[f64], theta0: &[f64], horizon: f64, delta: f64) -> Result<f64> {
    Ok(orbit_coverage_curve(frequency, theta0, &[horizon], delta)?[0])
}

/// Coverage at each horizon (horizons must be nondecreasing).
pub fn orbit_coverage_curve(frequency: &[f64], theta0: &[f64], horizons: &[f64], delta: f64) -> Result<Vec<f64>> {
    let n = frequency.len();
    if n == 0 || n > 3 {
        return Err(Error::InvalidParameter(format!("orbit diagnostic supports 1 ≤ N ≤ 3, got {n}")));
    }
    if theta0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: theta0.len() });
    }
    if !(delta > 0.0) || horizons.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("need δ > 0 and nondecreasing horizons".into()));
    }
    let speed = frequency.iter().map(|v| v * v).sum::<f64>().sqrt();
    if speed == 0.0 {
        return Err(Error::InvalidParameter("zero frequency".into()));
    }
    let cells = (TAU / delta).ceil() as usize;
    let total = cells.pow(n as u32);
    let mut seen = vec![false; total];
    let mut count = 0usize;
    let step = delta / (2.0 * speed);
    let mut out = Vec::with_capacity(horizons.len());
    let mut i = 0u64;
    let visit = |t: f64, seen: &mut Vec<bool>, count: &mut usize| {
        let mut idx = 0;
        for a in 0..n {
            let c = ((reduce(theta0[a] + frequency[a] * t) / TAU) * cells as f64) as usize;
            idx = idx * cells + c.min(cells - 1);
        }
        if !seen[idx] {
            seen[idx] = true;
            *count += 1;
        }
    };
    for &h in horizons {
        loop {
            let t = i as f64 * step;
            if t > h {
                break;
            }
            visit(t, &mut seen, &mut count);
            i += 1;
        }
        visit(h, &mut seen, &mut count);
        out.push(count as f64 / total as f64);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::AtTime;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_tubes(eps: f64) -> GluingConfig {
        GluingConfig {
            d: 2,
            m: 1,
            j: 2,
            eps,
            centers: vec![vec![0.0], vec![PI]],
            speeds: vec![vec![1.0], vec![2f64.sqrt()]],
            base_flow: BaseFlowSpec::default(),
            cutoff: CutoffChi { eps },
        }
    }

    #[test]
    fn validation_examples() {
        assert!(validate_config(&two_tubes(0.1)).is_valid());
        let mut c = two_tubes(0.1);
        c.centers[1] = vec![0.3];
        let r = validate_config(&c);
        assert!(!r.is_valid());
        match &r.violations[0] {
            Violation::Separation { distance, required, .. } => {
                assert_abs_diff_eq!(*distance, 0.3, epsilon = 1e-15);
                assert_abs_diff_eq!(*required, 0.4, epsilon = 1e-15);
            }
            v => panic!("unexpected {v:?}"),
        }
        assert!(r.message().contains("0.300000"), "{}", r.message());
        let mut bad = two_tubes(0.1);
        bad.m = 2;
        assert!(!validate_config(&bad).is_valid());
        bad = two_tubes(0.1);
        bad.speeds.pop();
        assert!(!validate_config(&bad).is_valid());
        bad = two_tubes(0.1);
        bad.cutoff.eps = 0.2;
        assert!(!validate_config(&bad).is_valid());
        // large but separated tubes are allowed with an advisory note
        let wide = validate_config(&two_tubes(0.15 * PI));
        assert!(wide.is_valid());
        assert_eq!(wide.warnings.len(), 1);
    }

    #[test]
    fn json_field_names() {
        let v = serde_json::to_value(two_tubes(0.1)).unwrap();
        for k in ["d", "m", "J", "eps", "centers", "speeds", "base_flow", "cutoff"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        let back: GluingConfig = serde_json::from_value(v).unwrap();
        assert_eq!(back, two_tubes(0.1));
    }

    #[test]
    fn shear_examples() {
        let mut c = two_tubes(0.2);
        c.j = 1;
        c.centers.truncate(1);
        c.speeds.truncate(1);
        let s = GluedSolution::new(c).unwrap();
        let mut w = [0.0; 2];
        s.eval_w(&[1.0, 0.3], &mut w);
        assert_eq!(w, [0.0, 0.0]);
        s.eval_w(&[0.3, 0.3], &mut w);
        assert_eq!(w[0], 0.0);
        assert!(w[1] > 0.0 && w[1] < 1.0);
        assert_abs_diff_eq!(w[1], CutoffChi { eps: 0.2 }.eval(0.3), epsilon = 1e-13);
    }

    #[test]
    fn solution_examples() {
        let s = GluedSolution::new(two_tubes(0.3)).unwrap();
        assert_eq!(s.eval_solution(0.7, &[1.5, 2.0]), vec![0.0, 0.0]);
        let flow = StationaryFlow::with_radius(2, 0.3, DEFAULT_SHARPNESS).unwrap();
        let x = [0.1, 6.2];
        let v = flow.velocity_at(&[0.1, wrap(6.2)]);
        let u = s.eval_solution(0.0, &x);
        assert_abs_diff_eq!(u[0], v[0], epsilon = 1e-15);
        assert_abs_diff_eq!(u[1], v[1] + 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.eval_pressure(0.0, &x).unwrap(), flow.pressure_at(&[0.1, wrap(6.2)]), epsilon = 1e-15);
        assert_eq!(s.eval_pressure(0.3, &[1.5, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn external_base_has_no_pressure() {
        let c = GluingConfig {
            d: 3,
            m: 1,
            j: 1,
            eps: 0.4,
            centers: vec![vec![1.0]],
            speeds: vec![vec![0.5, 0.0]],
            base_flow: BaseFlowSpec::External { id: "axisymmetric-swirl".into() },
            cutoff: CutoffChi { eps: 0.4 },
        };
        let s = GluedSolution::new(c).unwrap();
        assert!(matches!(s.eval_pressure(0.0, &[1.0, 0.0, 0.0]), Err(Error::MissingPressure(_))));
    }

    #[test]
    fn identity_embedding_matches_tube_family() {
        let c = two_tubes(0.3);
        let nu = FrequencyVector::new(vec![1.0, 2f64.sqrt()]).unwrap();
        let spec = EmbeddingSpec::identity(nu);
        let theta = [0.4, 2.5];
        let u = embed_u(&theta, 0.8, &c, &spec).unwrap();
        let s = GluedSolution::new(c.clone()).unwrap();
        let mut a = [0.0; 2];
        for &x in &[[0.1, 0.4 + 0.8], [PI + 0.2, 2.5 + 2f64.sqrt() * 0.8 + 0.1], [0.05, 1.0]] {
            u.eval(&x, &mut a);
            // by hand: shift each tube's vertical coordinate by θ^j
            let mut b = vec![0.0; 2];
            s.eval_w(&x, &mut b);
            for j in 0..2 {
                let z0 = wrap(x[0] - c.centers[j][0]);
                if z0.abs() < 0.3 {
                    let z1 = wrap(x[1] - theta[j] - c.speeds[j][0] * 0.8);
                    let v = s.base().clone();
                    let mut o = [0.0; 2];
                    v.velocity(&[z0, z1], &mut o);
                    b[0] += o[0];
                    b[1] += o[1];
                }
            }
            assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-15);
            assert_abs_diff_eq!(a[1], b[1], epsilon = 1e-15);
        }
    }

    #[test]
    fn embedding_validation() {
        let c = two_tubes(0.3);
        let nu = FrequencyVector::new(vec![1.0, 2.0]).unwrap();
        let bad = EmbeddingSpec { n: 2, matrix: vec![vec![1, 1], vec![1, -1]], frequency: nu.clone() };
        assert!(bad.validate(&c).is_err());
        let short = EmbeddingSpec { n: 2, matrix: vec![vec![1, 0]], frequency: nu.clone() };
        assert!(short.validate(&c).is_err());
        let one = FrequencyVector::new(vec![1.0]).unwrap();
        let good = EmbeddingSpec { n: 1, matrix: vec![vec![1], vec![2]], frequency: one };
        assert!(good.validate(&c).is_ok());
        assert_eq!(good.tube_speeds(1), vec![vec![1.0], vec![2.0]]);
    }

    #[test]
    fn distinct_angles_give_distinct_fields() {
        let c = two_tubes(0.3);
        let spec = EmbeddingSpec::identity(FrequencyVector::new(vec![1.0, 2f64.sqrt()]).unwrap());
        let a = embed_u(&[0.0, 0.0], 0.0, &c, &spec).unwrap();
        let b = embed_u(&[0.5, 0.0], 0.0, &c, &spec).unwrap();
        let g = Grid::cube(2, 64);
        let fa = SampledField::sample_vector(g.clone(), &a);
        let fb = SampledField::sample_vector(g, &b);
        let diff = fa.values.iter().zip(&fb.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff > 1e-3);
    }

    #[test]
    fn non_symmetry_examples() {
        let shear = crate::FnField {
            dim: 2,
            components: 2,
            f: |x: &[f64], o: &mut [f64]| {
                o[0] = 0.0;
                o[1] = x[0].sin() + (2.0 * x[0]).cos();
            },
        };
        let r = non_symmetry_check(&shear, 32).unwrap();
        assert_eq!(r.rank, 1);
        assert!(!r.non_symmetric);
        let zero = crate::FnField { dim: 2, components: 2, f: |_: &[f64], o: &mut [f64]| o.fill(0.0) };
        assert_eq!(non_symmetry_check(&zero, 32).unwrap().rank, 0);
        assert!(non_symmetry_check(&zero, 8).is_err());
        let mut c = two_tubes(0.3);
        c.j = 1;
        c.centers.truncate(1);
        c.speeds.truncate(1);
        let s = GluedSolution::new(c).unwrap();
        let r = non_symmetry_check(&AtTime { field: &s, t: 0.0 }, 256).unwrap();
        assert_eq!(r.rank, 2);
        assert!(r.non_symmetric);
    }

    #[test]
    fn integer_rank() {
        let mut b = IntBasis::new(3);
        b.insert(vec![2, 4, 0]);
        b.insert(vec![1, 2, 0]);
        assert_eq!(b.rank(), 1);
        b.insert(vec![3, 1, 0]);
        assert_eq!(b.rank(), 2);
        b.insert(vec![5, 5, 0]);
        assert_eq!(b.rank(), 2);
        b.insert(vec![0, 0, 7]);
        assert_eq!(b.rank(), 3);
    }

    #[test]
    fn orbit_examples() {
        assert_eq!(orbit_density_diagnostic(&[1.0], &[0.0], TAU, 0.1).unwrap(), 1.0);
        let rational = orbit_density_diagnostic(&[1.0, 1.0], &[0.0, 0.0], 100.0, 0.2).unwrap();
        assert!(rational < 0.2, "{rational}");
        let curve = orbit_coverage_curve(&[1.0, 2f64.sqrt()], &[0.0, 0.0], &[50.0, 100.0, 200.0, 400.0], 0.2).unwrap();
        assert!(curve.windows(2).all(|w| w[1] >= w[0]));
        assert!(curve[3] > curve[0]);
        assert!(orbit_density_diagnostic(&[1.0; 4], &[0.0; 4], 1.0, 0.2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn traveling_structure(t in -5.0f64..5.0, a in -0.3f64..0.3, b in 0.0f64..std::f64::consts::TAU) {
            let s = GluedSolution::new(two_tubes(0.35)).unwrap();
            for (j, y) in [0.0, PI].iter().enumerate() {
                let nu = s.config().speeds[j][0];
                let x0 = [y + a, b];
                let xt = [y + a, b + nu * t];
                let u0 = s.eval_solution(0.0, &x0);
                let ut = s.eval_solution(t, &xt);
                prop_assert!((u0[0] - ut[0]).abs() < 1e-12 && (u0[1] - ut[1]).abs() < 1e-12);
                let p0 = s.eval_pressure(0.0, &x0).unwrap();
                let pt = s.eval_pressure(t, &xt).unwrap();
                prop_assert!((p0 - pt).abs() < 1e-12);
            }
        }

        #[test]
        fn quasi_periodicity_identity(t in 0.0f64..10.0, th in proptest::collection::vec(0.0f64..std::f64::consts::TAU, 2), x in proptest::collection::vec(0.0f64..std::f64::consts::TAU, 2)) {
            let c = two_tubes(0.3);
            let spec = EmbeddingSpec::identity(FrequencyVector::new(vec![1.0, 2f64.sqrt()]).unwrap());
            let moving = embed_u(&th, t, &c, &spec).unwrap();
            let nu = spec.frequency.entries();
            let advanced: Vec<f64> = th.iter().zip(nu).map(|(a, v)| a + v * t).collect();
            let frozen = embed_u(&advanced, 0.0, &c, &spec).unwrap();
            let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
            moving.eval(&x, &mut a);
            frozen.eval(&x, &mut b);
            prop_assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }

        #[test]
        fn supports_disjoint(x in 0.0f64..std::f64::consts::TAU) {
            let c = two_tubes(0.3);
            let near: usize = c.centers.iter().filter(|y| dist_raw(&[x], y) < c.eps).count();
            prop_assert!(near <= 1);
        }
    }
}
