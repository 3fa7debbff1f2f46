//! Run configuration: one JSON document, `--set` overrides, unit handling
//! and the resolved-config hash.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use pmgate_core::array::{optimal_spacing, ArrayScene, BeamProfile, CloudModel, Position, Site};
use pmgate_core::dynamics::{Model, PropagationOptions};
use pmgate_core::sequence::{build_x_gate_hybrid, build_x_gate_pm, build_z_gate, default_k, GateProgram};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrequencyUnit {
    MHz,
    #[serde(rename = "rad_per_us")]
    RadPerUs,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub frequencies_in: FrequencyUnit,
}

impl Units {
    /// Convert a configured frequency to rad/μs.
    pub fn freq(&self, x: f64) -> f64 {
        match self.frequencies_in {
            FrequencyUnit::MHz => TAU * x,
            FrequencyUnit::RadPerUs => x,
        }
    }
}

fn default_angle() -> f64 {
    PI
}

fn default_model() -> Model {
    Model::FirstFrame
}

fn default_one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Design {
    #[serde(rename = "Z")]
    Z,
    #[serde(rename = "X_PM")]
    XPm,
    #[serde(rename = "X_HYBRID")]
    XHybrid,
}

impl Design {
    pub fn build(self, angle: f64, omega_m: f64, k: u32, order: u32) -> pmgate_core::Result<GateProgram> {
        match self {
            Design::Z => build_z_gate(angle, omega_m, k, order),
            Design::XPm => build_x_gate_pm(angle, omega_m, k, order),
            Design::XHybrid => build_x_gate_hybrid(angle, omega_m, k, order),
        }
    }
}

/// A gate design. `eps_m` and `k` are alternatives: `k = angle·ωm/(2π·εm)`
/// must come out integral.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    pub design: Design,
    #[serde(default = "default_angle")]
    pub angle: f64,
    #[serde(default)]
    pub omega_m: Option<f64>,
    #[serde(default)]
    pub eps_m: Option<f64>,
    #[serde(default)]
    pub k: Option<u32>,
    #[serde(default)]
    pub order: Option<u32>,
}

impl GateConfig {
    /// Modulation periods for `omega_m` (rad/μs).
    pub fn resolve_k(&self, units: &Units, omega_m: f64) -> Result<u32, CliError> {
        let from_eps = match self.eps_m {
            Some(e) => {
                let e = units.freq(e);
                if !(e > 0.0 && e.is_finite()) {
                    return Err(CliError::Config(format!("eps_m must be positive, got {e}")));
                }
                let k = self.angle * omega_m / (TAU * e);
                if (k - k.round()).abs() > 1e-9 * k.max(1.0) || k.round() < 1.0 {
                    return Err(CliError::Config(format!(
                        "eps_m does not give a whole number of modulation periods (k = {k})"
                    )));
                }
                Some(k.round() as u32)
            }
            None => None,
        };
        match (from_eps, self.k) {
            (Some(a), Some(b)) if a != b => Err(CliError::Config(format!("eps_m implies k = {a} but k = {b} was given"))),
            (Some(a), _) => Ok(a),
            (None, Some(b)) => Ok(b),
            (None, None) => Ok(default_k(self.angle)),
        }
    }

    pub fn omega_m(&self, units: &Units) -> Option<f64> {
        self.omega_m.map(|w| units.freq(w))
    }

    pub fn program(&self, units: &Units, omega_m: f64, order: u32) -> Result<GateProgram, CliError> {
        let k = self.resolve_k(units, omega_m)?;
        Ok(self.design.build(self.angle, omega_m, k, order)?)
    }
}

/// Evenly spaced grid on `[start, stop]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        if self.points == 0 || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(CliError::Config("grid needs finite bounds and at least one point".into()));
        }
        if self.points == 1 {
            return Ok(vec![self.start]);
        }
        if self.stop <= self.start {
            return Err(CliError::Config(format!("grid stop {} must exceed start {}", self.stop, self.start)));
        }
        let n = self.points - 1;
        Ok((0..=n).map(|i| self.start + (self.stop - self.start) * i as f64 / n as f64).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSweepConfig {
    pub gate: GateConfig,
    #[serde(default = "default_model")]
    pub model: Model,
    pub ratio: Grid,
    /// Two-photon detuning grid, in frequency units.
    #[serde(default)]
    pub detuning: Option<Grid>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcatMode {
    FixedEps,
    /// εm halves with each extra order so the passband width stays put.
    FixedBandwidth,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcatCompareConfig {
    pub gate: GateConfig,
    pub orders: Vec<u32>,
    pub mode: ConcatMode,
    #[serde(default = "default_model")]
    pub model: Model,
    pub ratio: Grid,
    #[serde(default)]
    pub detuning: Option<Grid>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    pub omega0: f64,
    pub r0: f64,
    #[serde(default)]
    pub center: Position,
}

/// Lattice spacing in μm, or `"optimal"` for `r0·√ln2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Spacing {
    Value(f64),
    Named(String),
}

impl Spacing {
    fn resolve(&self, r0: f64) -> Result<f64, CliError> {
        match self {
            Spacing::Value(a) => Ok(*a),
            Spacing::Named(s) if s == "optimal" => Ok(optimal_spacing(r0)?),
            Spacing::Named(s) => Err(CliError::Config(format!("unknown spacing '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Layout {
    Square { spacing: Spacing, n: usize },
    Stack { spacing: Spacing, n: usize, layers: usize, layer_spacing: f64 },
    Sites { sites: Vec<Site> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub beam: BeamConfig,
    pub layout: Layout,
    /// Required for explicit site lists; lattices default to the central site.
    #[serde(default)]
    pub target: Option<String>,
}

impl SceneConfig {
    pub fn build(&self, units: &Units) -> Result<ArrayScene, CliError> {
        let beam = BeamProfile::new(units.freq(self.beam.omega0), self.beam.r0, self.beam.center)?;
        let scene = match &self.layout {
            Layout::Square { spacing, n } => ArrayScene::square_lattice(beam, spacing.resolve(beam.r0)?, *n)?,
            Layout::Stack { spacing, n, layers, layer_spacing } => {
                ArrayScene::stack(beam, spacing.resolve(beam.r0)?, *n, *layers, *layer_spacing)?
            }
            Layout::Sites { sites } => {
                let target = self
                    .target
                    .clone()
                    .ok_or_else(|| CliError::Config("an explicit site list needs a target label".into()))?;
                ArrayScene::new(beam, sites.clone(), target)?
            }
        };
        let scene = match &self.target {
            Some(t) if *t != scene.target => ArrayScene::new(scene.beam, scene.sites, t.clone())?,
            _ => scene,
        };
        Ok(scene)
    }

    pub fn spacing(&self) -> Result<Option<f64>, CliError> {
        match &self.layout {
            Layout::Square { spacing, .. } | Layout::Stack { spacing, .. } => Ok(Some(spacing.resolve(self.beam.r0)?)),
            Layout::Sites { .. } => Ok(None),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeMapConfig {
    pub scene: SceneConfig,
    /// `omega_m` defaults to the target's Rabi rate.
    pub gate: GateConfig,
    #[serde(default = "default_model")]
    pub model: Model,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub site: String,
    #[serde(default = "default_angle")]
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CenterSearchConfig {
    /// Half-width of the square of candidate centers, μm.
    pub extent: f64,
    pub points: usize,
}

fn default_factor() -> f64 {
    pmgate_core::parallel::DEFAULT_DISTINGUISH_FACTOR
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParallelSimConfig {
    pub scene: SceneConfig,
    pub targets: Vec<TargetConfig>,
    pub eps_m: f64,
    #[serde(default = "default_one")]
    pub order: u32,
    #[serde(default = "default_factor")]
    pub distinguish_factor: f64,
    #[serde(default)]
    pub center_search: Option<CenterSearchConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightshiftMode {
    Analytic,
    Simulate,
    Scan,
}

/// Four-level parameters in frequency units. Give `delta_c` or `xi`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourLevelConfig {
    pub omega1: f64,
    pub omega2: f64,
    pub omega_c: f64,
    pub delta_big: f64,
    #[serde(default)]
    pub delta_c: Option<f64>,
    #[serde(default)]
    pub xi: Option<f64>,
    #[serde(default)]
    pub delta_small: f64,
    #[serde(default)]
    pub delta_shift: f64,
}

fn default_periods() -> f64 {
    10.0
}

fn default_samples() -> usize {
    8192
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "default_periods")]
    pub periods: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { periods: default_periods(), samples: default_samples() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    /// Addressing shift range, frequency units.
    pub range: [f64; 2],
    pub points: usize,
    /// `omega_m` defaults to the unshifted effective Rabi rate.
    pub gate: GateConfig,
    #[serde(default)]
    pub extract: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightshiftConfig {
    pub params: FourLevelConfig,
    pub mode: LightshiftMode,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
}

fn default_orders() -> Vec<u32> {
    vec![1, 2, 4]
}

fn default_design() -> Design {
    Design::XPm
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub r0: f64,
    pub omega0: f64,
    /// Defaults to omega0/16.
    #[serde(default)]
    pub eps_m: Option<f64>,
    #[serde(default = "default_design")]
    pub design: Design,
    #[serde(default = "default_angle")]
    pub angle: f64,
    pub cloud: CloudModel,
    #[serde(default)]
    pub lattice_n: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelityReportConfig {
    pub scenario: ScenarioConfig,
    #[serde(default = "default_orders")]
    pub orders: Vec<u32>,
    #[serde(default = "default_model")]
    pub model: Model,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub units: Units,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Recorded in the hash; cloud grids are evenly spaced, so no command
    /// draws random numbers.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub options: PropagationOptions,
    #[serde(default)]
    pub gate_sweep: Option<GateSweepConfig>,
    #[serde(default)]
    pub concat_compare: Option<ConcatCompareConfig>,
    #[serde(default)]
    pub lattice_map: Option<LatticeMapConfig>,
    #[serde(default)]
    pub parallel_sim: Option<ParallelSimConfig>,
    #[serde(default)]
    pub lightshift: Option<LightshiftConfig>,
    #[serde(default)]
    pub fidelity_report: Option<FidelityReportConfig>,
}

/// Loaded config plus the hash of its resolved form.
pub struct Loaded {
    pub config: RunConfig,
    pub hash: String,
}

/// Apply `key.path=value`; the value is parsed as JSON, falling back to a
/// plain string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got '{assignment}'")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad --set path '{path}'")));
    }
    let mut node = doc;
    for (i, key) in keys.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("--set path '{path}' crosses a non-object")))?;
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("path has at least one key")
}

pub fn load(path: &Path, overrides: &[String]) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut doc: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let config: RunConfig = serde_json::from_value(doc).map_err(|e| CliError::Config(format!("config: {e}")))?;
    let resolved = serde_json::to_string(&config).map_err(|e| CliError::Config(e.to_string()))?;
    let hash = hex::encode(Sha256::digest(resolved.as_bytes()));
    Ok(Loaded { config, hash })
}

/// Lattice scene for the cloud-bound report.
pub fn scenario_scene(s: &ScenarioConfig, units: &Units) -> Result<ArrayScene, CliError> {
    let beam = BeamProfile::new(units.freq(s.omega0), s.r0, Position::default())?;
    Ok(ArrayScene::square_lattice(beam, optimal_spacing(s.r0)?, s.lattice_n.unwrap_or(3))?)
}
