//! Beam profiles, site geometries and per-site gate evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate, Model, PropagationOptions, PropagationRequest};
use crate::error::{Error, Result};
use crate::qcore::{gate_fidelity, GateTarget, Unitary2};
use crate::sequence::GateProgram;

/// Default number of Ω samples across a worst-case cloud interval.
pub const DEFAULT_CLOUD_SAMPLES: usize = 33;
/// Relative tolerance on tone/target resonance.
pub const RESONANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance_sq(&self, other: &Position) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        dx * dx + dy * dy + dz * dz
    }

    pub fn distance(&self, other: &Position) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Gaussian amplitude profile `Ω(r) = Ω0 exp(−r²/r0²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamProfile {
    pub omega0: f64,
    pub r0: f64,
    #[serde(default)]
    pub center: Position,
}

impl BeamProfile {
    pub fn new(omega0: f64, r0: f64, center: Position) -> Result<Self> {
        let b = Self { omega0, r0, center };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::Parameter(format!("omega0 must be positive, got {}", self.omega0)));
        }
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(Error::Parameter(format!("r0 must be positive, got {}", self.r0)));
        }
        if !self.center.is_finite() {
            return Err(Error::Parameter("beam center must be finite".into()));
        }
        Ok(())
    }

    /// Ω at a radial distance `r` from the center.
    pub fn rabi_at_radius(&self, r: f64) -> f64 {
        self.omega0 * (-(r * r) / (self.r0 * self.r0)).exp()
    }
}

/// Local Rabi amplitude at `position`.
pub fn rabi_at(beam: &BeamProfile, position: &Position) -> f64 {
    beam.omega0 * (-position.distance_sq(&beam.center) / (beam.r0 * beam.r0)).exp()
}

/// Lattice constant `r0·√ln2` that puts nearest neighbors at Ω0/2.
pub fn optimal_spacing(r0: f64) -> Result<f64> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::Parameter(format!("r0 must be positive, got {r0}")));
    }
    Ok(r0 * std::f64::consts::LN_2.sqrt())
}

/// Fractional Ω drop `1 − exp(−d²/r0²)` for a displacement `d` from the center.
pub fn fractional_variation(r0: f64, d: f64) -> f64 {
    -(-(d * d) / (r0 * r0)).exp_m1()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Site {
    pub label: String,
    pub position: Position,
}

/// A beam plus labeled atom sites, one of which is the gate target.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayScene {
    pub beam: BeamProfile,
    pub sites: Vec<Site>,
    pub target: String,
}

fn lattice_indices(n: usize) -> impl Iterator<Item = i64> + Clone {
    let half = (n as i64 - 1) / 2;
    (0..n as i64).map(move |i| i - half)
}

impl ArrayScene {
    pub fn new(beam: BeamProfile, sites: Vec<Site>, target: impl Into<String>) -> Result<Self> {
        let s = Self { beam, sites, target: target.into() };
        s.validate()?;
        Ok(s)
    }

    /// `n×n` square lattice with spacing `a`, site `s0:0` on the beam center
    /// and labels `s{i}:{j}`. The target is `s0:0`.
    pub fn square_lattice(beam: BeamProfile, a: f64, n: usize) -> Result<Self> {
        Self::stack(beam, a, n, 1, 0.0)
    }

    /// `layers` stacked `n×n` lattices separated by `layer_spacing` along z.
    /// Single-layer stacks use two-index labels.
    pub fn stack(beam: BeamProfile, a: f64, n: usize, layers: usize, layer_spacing: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || n == 0 || layers == 0 {
            return Err(Error::Configuration("lattice needs a > 0, n >= 1 and at least one layer".into()));
        }
        if layers > 1 && !(layer_spacing > 0.0 && layer_spacing.is_finite()) {
            return Err(Error::Configuration("layer spacing must be positive".into()));
        }
        let c = beam.center;
        let mut sites = Vec::with_capacity(n * n * layers);
        for l in lattice_indices(layers) {
            for i in lattice_indices(n) {
                for j in lattice_indices(n) {
                    let label = if layers == 1 { format!("s{i}:{j}") } else { format!("s{i}:{j}:{l}") };
                    let position = Position::new(
                        c.x + i as f64 * a,
                        c.y + j as f64 * a,
                        c.z + l as f64 * layer_spacing,
                    );
                    sites.push(Site { label, position });
                }
            }
        }
        let target = if layers == 1 { "s0:0".to_string() } else { "s0:0:0".to_string() };
        Self::new(beam, sites, target)
    }

    pub fn validate(&self) -> Result<()> {
        self.beam.validate()?;
        if self.sites.is_empty() {
            return Err(Error::Configuration("scene has no sites".into()));
        }
        let mut labels: Vec<&str> = self.sites.iter().map(|s| s.label.as_str()).collect();
        labels.sort_unstable();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Configuration(format!("duplicate site label '{}'", w[0])));
        }
        if let Some(s) = self.sites.iter().find(|s| !s.position.is_finite()) {
            return Err(Error::Configuration(format!("site '{}' has a non-finite position", s.label)));
        }
        if self.site(&self.target).is_none() {
            return Err(Error::Configuration(format!("target site '{}' is not in the scene", self.target)));
        }
        Ok(())
    }

    pub fn site(&self, label: &str) -> Option<&Site> {
        self.sites.iter().find(|s| s.label == label)
    }

    pub fn rabi(&self, label: &str) -> Option<f64> {
        self.site(label).map(|s| rabi_at(&self.beam, &s.position))
    }

    pub fn target_rabi(&self) -> f64 {
        self.rabi(&self.target).unwrap_or(f64::NAN)
    }

    /// Same sites under a beam moved to `center`.
    pub fn with_center(&self, center: Position) -> Self {
        Self { beam: BeamProfile { center, ..self.beam }, ..self.clone() }
    }
}

/// Result for one site of a scene.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteRecord {
    pub label: String,
    pub position: Position,
    pub omega: f64,
    pub omega_over_omega0: f64,
    pub probabilities: [f64; 4],
    /// Fidelity against the program's intended gate.
    pub fidelity_target: f64,
    pub fidelity_identity: f64,
    /// `1 − fidelity_identity` for spectators, `None` for the target.
    pub crosstalk: Option<f64>,
    pub is_target: bool,
}

fn require_resonance(scene: &ArrayScene, program: &GateProgram) -> Result<()> {
    let tones = program.distinct_tones();
    let [tone] = tones.as_slice() else {
        return Err(Error::Configuration(format!(
            "crosstalk map needs a single-tone program, found {} tones",
            tones.len()
        )));
    };
    let omega_t = scene.target_rabi();
    if (tone.omega_m - omega_t).abs() > RESONANCE_TOL * omega_t.max(tone.omega_m) {
        return Err(Error::Configuration(format!(
            "tone omega_m = {} does not match the target Rabi rate {} at site '{}'",
            tone.omega_m, omega_t, scene.target
        )));
    }
    Ok(())
}

fn gate_target_of(program: &GateProgram) -> Result<GateTarget> {
    program
        .target
        .gate_target()
        .ok_or_else(|| Error::Configuration("program has no single-gate target".into()))
}

/// Propagate a program at every site of a scene.
///
/// The program's tone must be resonant with the target site. Records are
/// sorted by site label.
pub fn crosstalk_map(
    scene: &ArrayScene,
    program: &GateProgram,
    model: Model,
    options: PropagationOptions,
) -> Result<Vec<SiteRecord>> {
    scene.validate()?;
    program.validate()?;
    require_resonance(scene, program)?;
    let target = gate_target_of(program)?;
    let mut records = scene
        .sites
        .par_iter()
        .map(|site| {
            let omega = rabi_at(&scene.beam, &site.position);
            let req = PropagationRequest::new(program, omega, model).with_options(options);
            let u = propagate(&req)?.unitary;
            let is_target = site.label == scene.target;
            let fidelity_identity = gate_fidelity(&u, &GateTarget::I);
            Ok(SiteRecord {
                label: site.label.clone(),
                position: site.position,
                omega,
                omega_over_omega0: omega / scene.beam.omega0,
                probabilities: u.coefficients().probabilities(),
                fidelity_target: gate_fidelity(&u, &target),
                fidelity_identity,
                crosstalk: (!is_target).then_some(1.0 - fidelity_identity),
                is_target,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudSampling {
    /// Radial outward/inward extremes plus an even sweep between them.
    WorstCase,
    /// `n` displacements spread evenly across ±(radius + travel).
    Grid(usize),
}

/// Atom position spread around each nominal site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudModel {
    pub radius: f64,
    #[serde(default)]
    pub thermal_displacement: f64,
    pub sampling: CloudSampling,
}

impl CloudModel {
    pub fn new(radius: f64, thermal_displacement: f64, sampling: CloudSampling) -> Result<Self> {
        let c = Self { radius, thermal_displacement, sampling };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius >= 0.0 && self.radius.is_finite())
            || !(self.thermal_displacement >= 0.0 && self.thermal_displacement.is_finite())
        {
            return Err(Error::Parameter("cloud radius and displacement must be non-negative".into()));
        }
        if let CloudSampling::Grid(n) = self.sampling {
            if n < 2 {
                return Err(Error::Parameter("grid sampling needs at least 2 points".into()));
            }
        }
        Ok(())
    }

    pub fn spread(&self) -> f64 {
        self.radius + self.thermal_displacement
    }

    /// Radial distances sampled around a nominal distance `r`.
    fn radii(&self, r: f64) -> Vec<f64> {
        let d = self.spread();
        if d == 0.0 {
            return vec![r];
        }
        let n = match self.sampling {
            CloudSampling::WorstCase => DEFAULT_CLOUD_SAMPLES,
            CloudSampling::Grid(n) => n,
        };
        let lo = (r - d).max(0.0);
        let hi = r + d;
        // Displacing inward past the beam center clamps at r = 0, where Ω peaks.
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }
}

/// Worst-case figures over a cloud.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloudBound {
    /// Fractional Ω drop `1 − exp(−spread²/r0²)` at the beam center.
    pub fractional_variation: f64,
    pub target_omega_range: (f64, f64),
    pub max_infidelity_target: f64,
    /// Largest crosstalk per spectator, sorted by label.
    pub max_crosstalk_per_site: Vec<(String, f64)>,
}

/// Largest `1 − F` of a program over local Rabi rates `omegas`.
pub fn max_infidelity_at(
    program: &GateProgram,
    omegas: &[f64],
    target: &GateTarget,
    model: Model,
    options: PropagationOptions,
) -> Result<f64> {
    let inf = omegas
        .par_iter()
        .map(|&w| {
            let req = PropagationRequest::new(program, w, model).with_options(options);
            Ok(1.0 - gate_fidelity(&propagate(&req)?.unitary, target))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(inf.into_iter().fold(0.0, f64::max))
}

/// Largest target infidelity for Ω/ωm evenly sampled on `[lo, hi]`.
pub fn max_infidelity_over_ratios(
    program: &GateProgram,
    omega_m: f64,
    ratio_range: (f64, f64),
    samples: usize,
    model: Model,
    options: PropagationOptions,
) -> Result<f64> {
    let (lo, hi) = ratio_range;
    if !(lo >= 0.0 && hi >= lo && hi.is_finite()) || samples == 0 {
        return Err(Error::Parameter(format!("invalid ratio range [{lo}, {hi}] or sample count")));
    }
    let omegas: Vec<f64> = if samples == 1 || hi == lo {
        vec![lo * omega_m]
    } else {
        (0..samples).map(|i| omega_m * (lo + (hi - lo) * i as f64 / (samples - 1) as f64)).collect()
    };
    max_infidelity_at(program, &omegas, &gate_target_of(program)?, model, options)
}

/// Evaluate a scene under position spread: every site is displaced radially
/// by up to `radius + thermal_displacement` and the worst target infidelity
/// and per-spectator crosstalk are reported.
pub fn cloud_fidelity_bound(
    scene: &ArrayScene,
    program: &GateProgram,
    cloud: &CloudModel,
    model: Model,
    options: PropagationOptions,
) -> Result<CloudBound> {
    scene.validate()?;
    cloud.validate()?;
    require_resonance(scene, program)?;
    let target = gate_target_of(program)?;
    let beam = scene.beam;
    let omegas_for = |site: &Site| -> Vec<f64> {
        let r = site.position.distance(&beam.center);
        cloud.radii(r).into_iter().map(|q| beam.rabi_at_radius(q)).collect()
    };
    let target_site = scene.site(&scene.target).expect("validated");
    let target_omegas = omegas_for(target_site);
    let max_infidelity_target = max_infidelity_at(program, &target_omegas, &target, model, options)?;
    let lo = target_omegas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = target_omegas.iter().cloned().fold(0.0, f64::max);

    let mut spectators: Vec<&Site> = scene.sites.iter().filter(|s| s.label != scene.target).collect();
    spectators.sort_by(|a, b| a.label.cmp(&b.label));
    let mut max_crosstalk_per_site = Vec::with_capacity(spectators.len());
    for s in spectators {
        let worst = max_infidelity_at(program, &omegas_for(s), &GateTarget::I, model, options)?;
        max_crosstalk_per_site.push((s.label.clone(), worst));
    }
    Ok(CloudBound {
        fractional_variation: fractional_variation(beam.r0, cloud.spread()),
        target_omega_range: (lo, hi),
        max_infidelity_target,
        max_crosstalk_per_site,
    })
}

/// Identity fidelity `|c0|²` convenience for spectator checks.
pub fn identity_fidelity(u: &Unitary2) -> f64 {
    gate_fidelity(u, &GateTarget::I)
}
