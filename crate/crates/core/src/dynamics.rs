//! Propagation of gate programs.
//!
//! Three two-level models are offered: the numeric first rotating frame
//! (carrier removed, modulation kept), the analytic second-frame RWA, and a
//! numeric lab frame with a synthetic carrier. The closed-form concatenation
//! unitary lives here as well.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{gate_fidelity, GateTarget, PauliCoefficients, PauliVector, Unitary2};
use crate::sequence::{validate_quantization, DriveSegment, GateProgram, ModulationTone};

pub const MIN_STEPS_FIRST_FRAME: usize = 16;
pub const MIN_STEPS_LAB_FRAME: usize = 64;
pub const MIN_CARRIER_RATIO: f64 = 10.0;

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // sqrt(3)/6
const MAGNUS_COMMUTATOR: f64 = 0.288_675_134_594_812_9; // sqrt(3)/6

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    FirstFrame,
    SecondFrameRwa,
    LabFrame,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::FirstFrame => "first_frame",
            Model::SecondFrameRwa => "second_frame_rwa",
            Model::LabFrame => "lab_frame",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first_frame" => Ok(Model::FirstFrame),
            "second_frame_rwa" => Ok(Model::SecondFrameRwa),
            "lab_frame" => Ok(Model::LabFrame),
            other => Err(Error::Parameter(format!("unknown model '{other}'"))),
        }
    }
}

/// Step control shared by the numeric models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationOptions {
    /// Samples per period of the fastest frequency in the problem.
    pub step_policy: usize,
    /// Carrier ω0/Ω, lab frame only.
    pub carrier_ratio: f64,
    /// Acceptance threshold on the largest Pauli-coefficient change between
    /// a run and the run with twice the samples.
    pub tolerance: f64,
    pub max_doublings: u32,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self { step_policy: 64, carrier_ratio: 50.0, tolerance: 1e-8, max_doublings: 8 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PropagationRequest<'a> {
    pub program: &'a GateProgram,
    /// Local Rabi amplitude Ω.
    pub omega: f64,
    /// δ = ω0 − ω.
    pub detuning: f64,
    pub model: Model,
    pub options: PropagationOptions,
}

impl<'a> PropagationRequest<'a> {
    pub fn new(program: &'a GateProgram, omega: f64, model: Model) -> Self {
        Self { program, omega, detuning: 0.0, model, options: PropagationOptions::default() }
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn with_options(mut self, options: PropagationOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_step_policy(mut self, step_policy: usize) -> Self {
        self.options.step_policy = step_policy;
        self
    }

    pub fn with_carrier_ratio(mut self, carrier_ratio: f64) -> Self {
        self.options.carrier_ratio = carrier_ratio;
        self
    }

    fn check(&self, expected: Model) -> Result<()> {
        if self.model != expected {
            return Err(Error::Parameter(format!(
                "request names model {} but {} was invoked",
                self.model.name(),
                expected.name()
            )));
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::Parameter(format!("omega must be non-negative, got {}", self.omega)));
        }
        if !self.detuning.is_finite() {
            return Err(Error::Parameter("detuning must be finite".into()));
        }
        let o = &self.options;
        if !(o.tolerance > 0.0) {
            return Err(Error::Parameter("convergence tolerance must be positive".into()));
        }
        self.program.validate()
    }
}

/// Result of one propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub unitary: Unitary2,
    /// Samples per period used by the accepted run (0 for analytic models).
    pub samples_per_period: usize,
    /// Coefficient change against the half-resolution run.
    pub residual: f64,
    pub warnings: Vec<String>,
}

impl Propagation {
    pub fn coefficients(&self) -> PauliCoefficients {
        self.unitary.coefficients()
    }
}

/// Dispatch on `req.model`.
pub fn propagate(req: &PropagationRequest) -> Result<Propagation> {
    match req.model {
        Model::FirstFrame => propagate_first_frame(req),
        Model::SecondFrameRwa => propagate_second_frame_rwa(req),
        Model::LabFrame => propagate_lab_frame(req),
    }
}

fn tone_warnings(program: &GateProgram) -> Vec<String> {
    program
        .distinct_tones()
        .iter()
        .filter(|t| t.rwa_advisory())
        .map(|t| format!("eps_m/omega_m = {:.4} exceeds 1/8; second-frame RWA is loose", t.eps_m / t.omega_m))
        .collect()
}

fn fastest_rate(program: &GateProgram, extra: &[f64]) -> f64 {
    let mut f = extra.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    for seg in &program.segments {
        if let DriveSegment::Pm { tones, .. } = seg {
            for t in tones {
                f = f.max(t.omega_m).max(t.eps_m);
            }
        }
    }
    f
}

/// Ideal or finite bare rotation in the first rotating frame.
fn bare_unitary(axis: PauliVector, angle: f64, duration: f64, omega: f64, detuning: f64) -> Unitary2 {
    if duration == 0.0 {
        return Unitary2::exp_pauli(axis * (0.5 * angle));
    }
    let drive = axis * (0.5 * omega * angle.signum());
    Unitary2::exp_pauli((drive + PauliVector::Z * (0.5 * detuning)) * duration)
}

/// One fourth-order Magnus step for `H(t) = f(t)·σ` from the fields at the
/// two Gauss points.
#[inline]
fn magnus_step(fa: PauliVector, fb: PauliVector, h: f64) -> Unitary2 {
    let v = (fa + fb) * (0.5 * h) + fb.cross(&fa) * (MAGNUS_COMMUTATOR * h * h);
    Unitary2::exp_pauli(v)
}

fn steps_for(duration: f64, dt: f64) -> usize {
    ((duration / dt) - 1e-9).ceil().max(1.0) as usize
}

fn modulation(tones: &[ModulationTone], t: f64) -> f64 {
    tones.iter().map(|m| m.eps_m * (m.omega_m * t + m.phi_m).cos()).sum()
}

fn first_frame_pass(req: &PropagationRequest, spp: usize) -> Unitary2 {
    let rate = fastest_rate(req.program, &[req.omega, req.detuning]);
    let dt = TAU / rate / spp as f64;
    let half_delta = 0.5 * req.detuning;
    let mut u = Unitary2::identity();
    let mut clock = 0.0;
    for seg in &req.program.segments {
        match seg {
            DriveSegment::Bare { axis, angle, duration } => {
                u = bare_unitary(*axis, *angle, *duration, req.omega, req.detuning) * u;
            }
            DriveSegment::Pm { phi, tones, duration } => {
                let n = steps_for(*duration, dt);
                let h = duration / n as f64;
                let (sx, cx) = phi.sin_cos();
                let fx = 0.5 * req.omega * cx;
                let fy = 0.5 * req.omega * sx;
                for j in 0..n {
                    let mid = clock + (j as f64 + 0.5) * h;
                    let ta = mid - GAUSS_OFFSET * h;
                    let tb = mid + GAUSS_OFFSET * h;
                    let fa = PauliVector::new(fx, fy, modulation(tones, ta) + half_delta);
                    let fb = PauliVector::new(fx, fy, modulation(tones, tb) + half_delta);
                    u = magnus_step(fa, fb, h) * u;
                }
                clock += duration;
            }
        }
    }
    u
}

/// Modulated carrier phase θ(t) = ωt − Σ 2εm/ωm sin(ωm t + φm).
fn carrier_phase(tones: &[ModulationTone], omega_carrier: f64, t: f64) -> f64 {
    omega_carrier * t
        - tones
            .iter()
            .map(|m| 2.0 * m.eps_m / m.omega_m * (m.omega_m * t + m.phi_m).sin())
            .sum::<f64>()
}

fn lab_frame_pass(req: &PropagationRequest, spp: usize) -> Unitary2 {
    let w0 = req.options.carrier_ratio * req.omega;
    let w = w0 - req.detuning;
    let rate = fastest_rate(req.program, &[w0, req.omega, req.detuning]);
    let dt = TAU / rate / spp as f64;
    let frame = |tones: &[ModulationTone], t: f64| {
        Unitary2::exp_pauli(PauliVector::Z * (0.5 * carrier_phase(tones, w, t)))
    };
    let mut u = Unitary2::identity();
    let mut clock = 0.0;
    for seg in &req.program.segments {
        match seg {
            DriveSegment::Bare { axis, angle, duration } => {
                u = bare_unitary(*axis, *angle, *duration, req.omega, req.detuning) * u;
            }
            DriveSegment::Pm { phi, tones, duration } => {
                let n = steps_for(*duration, dt);
                let h = duration / n as f64;
                let field = |t: f64| {
                    PauliVector::new(req.omega * (carrier_phase(tones, w, t) + phi).cos(), 0.0, 0.5 * w0)
                };
                let mut lab = Unitary2::identity();
                for j in 0..n {
                    let mid = clock + (j as f64 + 0.5) * h;
                    let fa = field(mid - GAUSS_OFFSET * h);
                    let fb = field(mid + GAUSS_OFFSET * h);
                    lab = magnus_step(fa, fb, h) * lab;
                }
                let end = clock + duration;
                u = frame(tones, end).adjoint() * lab * frame(tones, clock) * u;
                clock = end;
            }
        }
    }
    u
}

fn converge(
    req: &PropagationRequest,
    min_spp: usize,
    pass: fn(&PropagationRequest, usize) -> Unitary2,
) -> Result<Propagation> {
    let mut spp = req.options.step_policy.max(min_spp);
    let mut coarse = pass(req, spp);
    let mut residual = f64::INFINITY;
    for _ in 0..=req.options.max_doublings {
        spp *= 2;
        let fine = pass(req, spp);
        residual = fine.coefficients().max_distance(&coarse.coefficients());
        if residual < req.options.tolerance {
            return Ok(Propagation {
                unitary: fine,
                samples_per_period: spp,
                residual,
                warnings: tone_warnings(req.program),
            });
        }
        coarse = fine;
    }
    Err(Error::NonConvergence { residual, samples_per_period: spp })
}

/// Numeric first-frame propagation of
/// `H = Ω/2 σx′ + Σ εm cos(ωm t + φm) σz + δ/2 σz`.
///
/// Steps are fourth-order Magnus with one closed-form exponential each, so
/// every step is exactly unitary. The modulation clock runs only over PM
/// segments. The step count doubles until successive runs agree to
/// `options.tolerance` on every Pauli coefficient.
pub fn propagate_first_frame(req: &PropagationRequest) -> Result<Propagation> {
    req.check(Model::FirstFrame)?;
    if req.options.step_policy < MIN_STEPS_FIRST_FRAME {
        return Err(Error::Parameter(format!(
            "step_policy must be at least {MIN_STEPS_FIRST_FRAME} for the first frame"
        )));
    }
    converge(req, MIN_STEPS_FIRST_FRAME, first_frame_pass)
}

/// Numeric lab-frame propagation of
/// `H = ω0/2 σz + Ω cos(θ(t) + φ) σx`, counter-rotating terms included,
/// mapped back into the first rotating frame segment by segment.
pub fn propagate_lab_frame(req: &PropagationRequest) -> Result<Propagation> {
    req.check(Model::LabFrame)?;
    if req.options.step_policy < MIN_STEPS_LAB_FRAME {
        return Err(Error::Parameter(format!(
            "step_policy must be at least {MIN_STEPS_LAB_FRAME} for the lab frame"
        )));
    }
    if !(req.options.carrier_ratio >= MIN_CARRIER_RATIO && req.options.carrier_ratio.is_finite()) {
        return Err(Error::Parameter(format!(
            "carrier_ratio must be at least {MIN_CARRIER_RATIO}, got {}",
            req.options.carrier_ratio
        )));
    }
    converge(req, MIN_STEPS_LAB_FRAME, lab_frame_pass)
}

/// Analytic second-frame propagation with
/// `H2 = (Ω − ωm)/2 σx′ + εm/2 σz′` per segment.
///
/// Returns the plain product of segment rotations. When the modulation spans
/// an integer number of periods the frame change back is ±I, so the result
/// matches the first frame up to global phase; otherwise a warning is
/// attached.
pub fn propagate_second_frame_rwa(req: &PropagationRequest) -> Result<Propagation> {
    req.check(Model::SecondFrameRwa)?;
    if !req.program.is_single_tone() {
        return Err(Error::UnsupportedModel {
            model: "second_frame_rwa",
            what: "multi-tone segments".into(),
        });
    }
    if req.detuning != 0.0 {
        return Err(Error::UnsupportedModel {
            model: "second_frame_rwa",
            what: "nonzero detuning".into(),
        });
    }
    let mut warnings = tone_warnings(req.program);
    let report = validate_quantization(req.program);
    if report.tones.iter().any(|t| !t.passed) {
        warnings.push("modulation does not span an integer number of periods; frame change is not the identity".into());
    }
    let mut u = Unitary2::identity();
    for seg in &req.program.segments {
        u = match seg {
            DriveSegment::Bare { axis, angle, duration } => {
                bare_unitary(*axis, *angle, *duration, req.omega, 0.0) * u
            }
            DriveSegment::Pm { phi, tones, duration } => {
                let t = tones[0];
                let h = PauliVector::drive_axis(*phi) * (0.5 * (req.omega - t.omega_m))
                    + PauliVector::modulation_axis(*phi, t.phi_m) * (0.5 * t.eps_m);
                Unitary2::exp_pauli(h * *duration) * u
            }
        };
    }
    Ok(Propagation { unitary: u, samples_per_period: 0, residual: 0.0, warnings })
}

/// Block rotation axes for carrier phase 0 (bit 0) and π (bit 1).
fn block_axes(omega: f64, omega_m: f64, eps_m: f64) -> Option<(PauliVector, PauliVector, f64)> {
    let d = omega - omega_m;
    let eps_r = d.hypot(eps_m);
    if eps_r == 0.0 {
        return None;
    }
    let s0 = PauliVector::new(-d / eps_r, 0.0, -eps_m / eps_r);
    let s1 = PauliVector::new(d / eps_r, 0.0, -eps_m / eps_r);
    Some((s0, s1, eps_r))
}

/// Closed form of `exp(iθ/2 b·σ)·exp(iθ/2 a·σ)`: block `a` then block `b`.
fn block_pair(a: PauliVector, b: PauliVector, theta: f64) -> Unitary2 {
    let (s, c) = (0.5 * theta).sin_cos();
    let s2 = s * s;
    let c0 = c * c - s2 * b.dot(&a);
    let v = a.cross(&b) * s2 + (a + b) * (0.5 * theta.sin());
    // U = c0 I + i v·σ
    Unitary2::from_raw([
        [
            num_complex::Complex64::new(c0, v.z),
            num_complex::Complex64::new(v.y, v.x),
        ],
        [
            num_complex::Complex64::new(-v.y, v.x),
            num_complex::Complex64::new(c0, -v.z),
        ],
    ])
}

fn single_block(a: PauliVector, theta: f64) -> Unitary2 {
    Unitary2::exp_pauli(a * (-0.5 * theta))
}

fn check_concat_args(omega: f64, omega_m: f64, eps_m: f64, total_t: f64) -> Result<()> {
    for (name, v) in [("omega", omega), ("omega_m", omega_m), ("eps_m", eps_m), ("total_T", total_t)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Parameter(format!("{name} must be finite and non-negative, got {v}")));
        }
    }
    Ok(())
}

/// Exact second-frame unitary of equal-duration blocks with carrier phases
/// `π·pattern[j]`.
///
/// Each block is a rotation by `θ = εR·T/N` (εR = √((Ω−ωm)² + εm²)) about
/// `σ0,1 = (∓(Ω−ωm) x̂ − εm ẑ)/εR`; consecutive pairs are composed with the
/// closed-form two-rotation product.
pub fn concat_unitary_analytic(
    omega: f64,
    omega_m: f64,
    eps_m: f64,
    pattern: &[u8],
    total_t: f64,
) -> Result<Unitary2> {
    check_concat_args(omega, omega_m, eps_m, total_t)?;
    let n = pattern.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Parameter(format!("pattern length must be a power of two, got {n}")));
    }
    if pattern.iter().any(|&b| b > 1) {
        return Err(Error::Parameter("pattern entries must be 0 or 1".into()));
    }
    let Some((s0, s1, eps_r)) = block_axes(omega, omega_m, eps_m) else {
        return Ok(Unitary2::identity());
    };
    let theta = eps_r * total_t / n as f64;
    let axis = |b: u8| if b == 0 { s0 } else { s1 };
    if n == 1 {
        return Ok(single_block(axis(pattern[0]), theta));
    }
    let mut u = Unitary2::identity();
    for pair in pattern.chunks(2) {
        u = block_pair(axis(pair[0]), axis(pair[1]), theta) * u;
    }
    Ok(u)
}

/// Thue–Morse concatenation by the recursion `U(n+1) = Ū(n)U(n)`,
/// `Ū(n+1) = U(n)Ū(n)`, starting from the two order-1 block pairs.
pub fn concat_unitary_thue_morse(
    omega: f64,
    omega_m: f64,
    eps_m: f64,
    order: u32,
    total_t: f64,
) -> Result<Unitary2> {
    check_concat_args(omega, omega_m, eps_m, total_t)?;
    if order < 1 || order > crate::sequence::MAX_ORDER {
        return Err(Error::Parameter(format!("order must be in 1..=24, got {order}")));
    }
    let Some((s0, s1, eps_r)) = block_axes(omega, omega_m, eps_m) else {
        return Ok(Unitary2::identity());
    };
    let theta = eps_r * total_t / (1u64 << order) as f64;
    let mut u = block_pair(s0, s1, theta);
    let mut ubar = block_pair(s1, s0, theta);
    for _ in 1..order {
        let next = ubar * u;
        ubar = u * ubar;
        u = next;
    }
    Ok(u)
}

/// Largest Pauli-coefficient difference after global-phase alignment.
pub fn coefficient_discrepancy(a: &Unitary2, b: &Unitary2) -> f64 {
    a.coefficients().aligned_distance(&b.coefficients())
}

/// One row of a gate-component sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub omega_over_omega_m: f64,
    pub detuning: f64,
    /// `|c0|², |cx|², |cy|², |cz|²`; NaN when the point failed.
    pub probabilities: [f64; 4],
    /// Fidelity against the program target, NaN when not defined.
    pub fidelity: f64,
    /// Error tag when propagation failed at this point.
    pub flag: Option<String>,
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Parameter(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter(format!("{name} grid must be finite and strictly increasing")));
    }
    Ok(())
}

/// Evaluate a program on an Ω/ωm × δ grid.
///
/// Rows come out ratio-major in grid order regardless of how the points are
/// scheduled; a failing point yields a flagged row and the sweep continues.
pub fn sweep_gate_components(
    program: &GateProgram,
    omega_m: f64,
    ratio_grid: &[f64],
    detuning_grid: &[f64],
    model: Model,
    options: PropagationOptions,
) -> Result<Vec<SweepRow>> {
    if !(omega_m > 0.0 && omega_m.is_finite()) {
        return Err(Error::Parameter(format!("omega_m must be positive, got {omega_m}")));
    }
    check_grid("ratio", ratio_grid)?;
    check_grid("detuning", detuning_grid)?;
    program.validate()?;
    let target = program.target.gate_target();
    let points: Vec<(f64, f64)> = ratio_grid
        .iter()
        .flat_map(|&r| detuning_grid.iter().map(move |&d| (r, d)))
        .collect();
    Ok(points
        .par_iter()
        .map(|&(ratio, detuning)| {
            let req = PropagationRequest::new(program, ratio * omega_m, model)
                .with_detuning(detuning)
                .with_options(options);
            match propagate(&req) {
                Ok(p) => SweepRow {
                    omega_over_omega_m: ratio,
                    detuning,
                    probabilities: p.coefficients().probabilities(),
                    fidelity: target.map_or(f64::NAN, |t| gate_fidelity(&p.unitary, &t)),
                    flag: None,
                },
                Err(e) => SweepRow {
                    omega_over_omega_m: ratio,
                    detuning,
                    probabilities: [f64::NAN; 4],
                    fidelity: f64::NAN,
                    flag: Some(e.kind().to_string()),
                },
            }
        })
        .collect())
}

/// Fidelity of `u` against a target label, identity when the label has none.
pub fn fidelity_or_identity(u: &Unitary2, target: Option<GateTarget>) -> f64 {
    gate_fidelity(u, &target.unwrap_or(GateTarget::I))
}
