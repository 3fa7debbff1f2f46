//! Multi-tone phase modulation: one tone per target site, all sharing the
//! beam and a common gate duration.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::Serialize;

use crate::array::{rabi_at, ArrayScene, Position};
use crate::dynamics::{propagate_first_frame, Model, PropagationOptions, PropagationRequest};
use crate::error::{Error, Result};
use crate::qcore::{gate_fidelity, su2_exp, GateTarget, PauliVector, Unitary2};
use crate::sequence::{
    thue_morse_phases, DriveSegment, GateLabel, GateProgram, ModulationTone, QUANTIZATION_TOL,
};

/// Default factor in the distinguishability bound `|Ωi − Ωj| ≥ factor·εm`.
pub const DEFAULT_DISTINGUISH_FACTOR: f64 = 4.0;
/// Candidate durations scanned when suggesting a feasible εm.
const SUGGESTION_SCAN: u64 = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelPlan {
    /// One tone per target, in target order.
    pub tones: Vec<ModulationTone>,
    /// Target label for each tone.
    pub site_assignments: Vec<String>,
    pub angles: Vec<f64>,
    /// Modulation periods per tone over `total_t`.
    pub ks: Vec<u64>,
    /// Requested εm; the tone with the largest angle uses it exactly.
    pub eps_common: f64,
    pub total_t: f64,
}

impl ParallelPlan {
    pub fn tone_for(&self, label: &str) -> Option<usize> {
        self.site_assignments.iter().position(|s| s == label)
    }

    /// Concatenated program with Thue–Morse carrier phases {0, π} over the
    /// common duration; every block carries all tones.
    pub fn to_program(&self, order: u32) -> Result<GateProgram> {
        let pattern = thue_morse_phases(order)?;
        let block = self.total_t / pattern.len() as f64;
        let segments = pattern
            .into_iter()
            .map(|b| DriveSegment::Pm { phi: PI * b as f64, tones: self.tones.clone(), duration: block })
            .collect();
        GateProgram::new(segments, GateLabel::Parallel)
    }

    /// Plan with tone `i` silenced; its site becomes a spectator.
    pub fn switch_off(&self, i: usize) -> Result<ParallelPlan> {
        if i >= self.tones.len() {
            return Err(Error::Parameter(format!("no tone {i} in a plan of {}", self.tones.len())));
        }
        let mut p = self.clone();
        p.tones[i].eps_m = 0.0;
        p.site_assignments[i] = String::new();
        Ok(p)
    }

    /// Plan with tones (and their assignments) reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Result<ParallelPlan> {
        let mut seen = vec![false; self.tones.len()];
        if perm.len() != self.tones.len() || perm.iter().any(|&i| i >= seen.len() || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::Parameter("not a permutation of the tone indices".into()));
        }
        Ok(ParallelPlan {
            tones: perm.iter().map(|&i| self.tones[i]).collect(),
            site_assignments: perm.iter().map(|&i| self.site_assignments[i].clone()).collect(),
            angles: perm.iter().map(|&i| self.angles[i]).collect(),
            ks: perm.iter().map(|&i| self.ks[i]).collect(),
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanOptions {
    pub distinguish_factor: f64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self { distinguish_factor: DEFAULT_DISTINGUISH_FACTOR }
    }
}

fn cycle_residual(omegas: &[f64], t: f64) -> f64 {
    omegas
        .iter()
        .map(|w| {
            let c = w * t / TAU;
            (c - c.round()).abs() / c.max(1.0)
        })
        .fold(0.0, f64::max)
}

/// Nearest εm for which all tones complete whole periods, scanning the
/// period count of the fastest tone outward from the requested value.
fn suggest_eps(omegas: &[f64], phi_max: f64, eps_m: f64) -> Option<f64> {
    let w_max = omegas.iter().cloned().fold(0.0, f64::max);
    let k_real = w_max * (phi_max / eps_m) / TAU;
    let k_lo = k_real.floor() as i64;
    let mut best: Option<(f64, f64)> = None;
    for step in 0..SUGGESTION_SCAN as i64 {
        for k in [k_lo - step, k_lo + 1 + step] {
            if k < 1 {
                continue;
            }
            let t = TAU * k as f64 / w_max;
            let res = cycle_residual(omegas, t);
            if res <= QUANTIZATION_TOL {
                return Some(phi_max / t);
            }
            if best.map_or(true, |(r, _)| res < r) {
                best = Some((res, phi_max / t));
            }
        }
    }
    best.map(|(_, e)| e)
}

/// Assign a resonant tone to each target and fix the common duration.
///
/// Tone `i` has `ωm(i) = Ω(site i)` and `εm(i) = φ(i)/T` with
/// `T = max φ(i)/εm`, so every target accumulates its own angle in the same
/// time. Every `ωm(i)·T/2π` must be an integer.
pub fn plan_parallel(
    scene: &ArrayScene,
    targets: &[(String, f64)],
    eps_m: f64,
    options: PlanOptions,
) -> Result<ParallelPlan> {
    if targets.is_empty() {
        return Err(Error::Configuration("parallel plan needs at least one target".into()));
    }
    if !(eps_m > 0.0 && eps_m.is_finite()) {
        return Err(Error::Parameter(format!("eps_m must be positive, got {eps_m}")));
    }
    if !(options.distinguish_factor >= 0.0 && options.distinguish_factor.is_finite()) {
        return Err(Error::Parameter("distinguishability factor must be non-negative".into()));
    }
    let mut omegas = Vec::with_capacity(targets.len());
    for (i, (label, angle)) in targets.iter().enumerate() {
        if targets[..i].iter().any(|(l, _)| l == label) {
            return Err(Error::Configuration(format!("site '{label}' is targeted twice")));
        }
        if !(*angle > 0.0 && *angle <= TAU) {
            return Err(Error::Parameter(format!("angle for '{label}' must lie in (0, 2pi], got {angle}")));
        }
        let site = scene
            .site(label)
            .ok_or_else(|| Error::Configuration(format!("target site '{label}' is not in the scene")))?;
        omegas.push(rabi_at(&scene.beam, &site.position));
    }
    let threshold = options.distinguish_factor * eps_m;
    for i in 0..omegas.len() {
        for j in (i + 1)..omegas.len() {
            let gap = (omegas[i] - omegas[j]).abs();
            if gap < threshold || gap == 0.0 {
                return Err(Error::Distinguishability {
                    first: targets[i].0.clone(),
                    second: targets[j].0.clone(),
                    gap,
                    threshold,
                });
            }
        }
    }
    let phi_max = targets.iter().map(|t| t.1).fold(0.0, f64::max);
    let total_t = phi_max / eps_m;
    let mut ks = Vec::with_capacity(omegas.len());
    for (w, (label, _)) in omegas.iter().zip(targets) {
        let cycles = w * total_t / TAU;
        if (cycles - cycles.round()).abs() > QUANTIZATION_TOL * cycles.max(1.0) || cycles.round() < 1.0 {
            return Err(Error::Constraint {
                reason: format!(
                    "tone for '{label}' (omega_m = {w}) completes {cycles:.9} periods in T = {total_t}, not an integer"
                ),
                suggested_eps_m: suggest_eps(&omegas, phi_max, eps_m),
            });
        }
        ks.push(cycles.round() as u64);
    }
    let tones = omegas
        .iter()
        .zip(targets)
        .map(|(&w, (_, angle))| ModulationTone { eps_m: angle / total_t, omega_m: w, phi_m: 0.0 })
        .collect();
    Ok(ParallelPlan {
        tones,
        site_assignments: targets.iter().map(|t| t.0.clone()).collect(),
        angles: targets.iter().map(|t| t.1).collect(),
        ks,
        eps_common: eps_m,
        total_t,
    })
}

/// Per-site result of a parallel gate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelSiteRecord {
    pub label: String,
    pub position: Position,
    pub omega: f64,
    pub omega_over_omega0: f64,
    pub tone_index: Option<usize>,
    /// `min_i |Ω − ωm(i)|` over active tones.
    pub nearest_tone_gap: f64,
    #[serde(skip)]
    pub unitary: Unitary2,
    pub probabilities: [f64; 4],
    /// Fidelity against the site's rotation, or the identity for spectators.
    pub fidelity_target: f64,
    pub fidelity_identity: f64,
    pub crosstalk: Option<f64>,
}

/// Propagate the plan's concatenated multi-tone program at every site.
pub fn propagate_parallel(
    scene: &ArrayScene,
    plan: &ParallelPlan,
    order: u32,
    options: PropagationOptions,
) -> Result<Vec<ParallelSiteRecord>> {
    scene.validate()?;
    let program = plan.to_program(order)?;
    let mut out = scene
        .sites
        .par_iter()
        .map(|site| {
            let omega = rabi_at(&scene.beam, &site.position);
            let req = PropagationRequest::new(&program, omega, Model::FirstFrame).with_options(options);
            let u = propagate_first_frame(&req)?.unitary;
            let tone_index = plan.tone_for(&site.label);
            let target = match tone_index {
                Some(i) => GateTarget::Unitary(su2_exp(PauliVector::Z, plan.angles[i])?),
                None => GateTarget::I,
            };
            let fidelity_identity = gate_fidelity(&u, &GateTarget::I);
            let nearest_tone_gap = plan
                .tones
                .iter()
                .filter(|t| t.eps_m > 0.0)
                .map(|t| (omega - t.omega_m).abs())
                .fold(f64::INFINITY, f64::min);
            Ok(ParallelSiteRecord {
                label: site.label.clone(),
                position: site.position,
                omega,
                omega_over_omega0: omega / scene.beam.omega0,
                tone_index,
                nearest_tone_gap,
                unitary: u,
                probabilities: u.coefficients().probabilities(),
                fidelity_target: gate_fidelity(&u, &target),
                fidelity_identity,
                crosstalk: tone_index.is_none().then_some(1.0 - fidelity_identity),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenterRanking {
    pub center: Position,
    /// Smallest pairwise |Ωi − Ωj| over all sites (infinite for one site).
    pub min_gap: f64,
    /// `min_gap / (factor·εm)`; at least 1 means every pair is distinguishable.
    pub margin: f64,
}

/// Rank beam centers by the smallest pairwise Ω gap over all scene sites.
pub fn center_offset_search(
    scene: &ArrayScene,
    candidates: &[Position],
    eps_m: f64,
    options: PlanOptions,
) -> Result<Vec<CenterRanking>> {
    if candidates.is_empty() {
        return Err(Error::Parameter("no candidate centers".into()));
    }
    let scale = options.distinguish_factor * eps_m;
    let mut ranked: Vec<CenterRanking> = candidates
        .iter()
        .map(|&center| {
            let moved = scene.with_center(center);
            let mut omegas: Vec<f64> = moved.sites.iter().map(|s| rabi_at(&moved.beam, &s.position)).collect();
            omegas.sort_by(|a, b| a.total_cmp(b));
            let min_gap = omegas.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
            CenterRanking { center, min_gap, margin: if scale > 0.0 { min_gap / scale } else { f64::INFINITY } }
        })
        .collect();
    ranked.sort_by(|a, b| b.min_gap.total_cmp(&a.min_gap));
    Ok(ranked)
}

/// `n²` offsets within `±extent` of `center` in the xy plane, taken from the
/// R2 low-discrepancy sequence. A regular grid sits on lattice-commensurate
/// points where pairs of sites are always equidistant from the beam.
pub fn candidate_centers(center: Position, extent: f64, n: usize) -> Vec<Position> {
    // Plastic number: g³ = g + 1.
    let g = 1.324_717_957_244_746_f64;
    let (a1, a2) = (1.0 / g, 1.0 / (g * g));
    (1..=n.max(1) * n.max(1))
        .map(|i| {
            let u = (0.5 + a1 * i as f64).fract();
            let v = (0.5 + a2 * i as f64).fract();
            Position::new(center.x + extent * (2.0 * u - 1.0), center.y + extent * (2.0 * v - 1.0), center.z)
        })
        .collect()
}
