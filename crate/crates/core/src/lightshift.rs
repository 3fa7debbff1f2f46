//! Four-level light-shift addressing.
//!
//! Qubit states ↑ and ↓ are coupled through an excited level e by two Raman
//! beams (Ω1, Ω2, one-photon detuning Δ); an addressing beam Ωc dresses e
//! with an auxiliary level s at detuning Δc, which rescales the two-photon
//! Rabi rate by a factor ξ.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::array::max_infidelity_at;
use crate::dynamics::{Model, PropagationOptions};
use crate::error::{Error, Result};
use crate::qcore::{HermitianEigen4, Matrix4c};
use crate::sequence::GateProgram;

/// Relative closeness to zero at which the effective-rate denominator is
/// treated as singular.
pub const SINGULAR_TOL: f64 = 1e-6;
/// Relative tolerance for a (params, ξ) pair to count as consistent.
pub const CONSISTENCY_TOL: f64 = 1e-8;
/// A secondary spectral peak at this fraction of the main one makes the
/// frequency estimate ambiguous.
pub const AMBIGUITY_RATIO: f64 = 0.5;

/// Parameters of the four-level scheme, all in rad/μs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourLevelParams {
    pub omega1: f64,
    pub omega2: f64,
    pub omega_c: f64,
    pub delta_big: f64,
    pub delta_c: f64,
    #[serde(default)]
    pub delta_small: f64,
    /// Addressing-frequency shift added to `delta_c`.
    #[serde(default)]
    pub delta_shift: f64,
}

impl FourLevelParams {
    pub fn new(omega1: f64, omega2: f64, omega_c: f64, delta_big: f64, delta_c: f64) -> Self {
        Self { omega1, omega2, omega_c, delta_big, delta_c, delta_small: 0.0, delta_shift: 0.0 }
    }

    pub fn with_shift(self, delta_shift: f64) -> Self {
        Self { delta_shift, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.omega1,
            self.omega2,
            self.omega_c,
            self.delta_big,
            self.delta_c,
            self.delta_small,
            self.delta_shift,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("four-level parameters must be finite".into()));
        }
        if self.delta_big == 0.0 {
            return Err(Error::Parameter("one-photon detuning delta must be nonzero".into()));
        }
        Ok(())
    }

    /// Addressing detuning including the frequency shift.
    pub fn delta_c_total(&self) -> f64 {
        self.delta_c + self.delta_shift
    }

    /// Set when |Δ| < 5·max(Ω1, Ω2), outside the adiabatic-elimination regime.
    pub fn perturbative_advisory(&self) -> bool {
        self.delta_big.abs() < 5.0 * self.omega1.abs().max(self.omega2.abs())
    }

    /// Two-photon rate without the addressing beam, `Ω1Ω2/(2Δ)`.
    pub fn bare_rabi(&self) -> f64 {
        self.omega1 * self.omega2 / (2.0 * self.delta_big)
    }

    /// Rotating-frame Hamiltonian in the basis (↑, e, s, ↓).
    pub fn hamiltonian(&self) -> Matrix4c {
        let d = self.delta_big;
        let r = |x: f64| C64::new(x, 0.0);
        let mut h = Matrix4c::zeros();
        h[(1, 1)] = r(-d);
        h[(2, 2)] = r(-d - self.delta_c_total());
        h[(3, 3)] = r(self.delta_small);
        h[(0, 1)] = r(0.5 * self.omega1);
        h[(1, 0)] = r(0.5 * self.omega1);
        h[(1, 2)] = r(0.5 * self.omega_c);
        h[(2, 1)] = r(0.5 * self.omega_c);
        h[(1, 3)] = r(0.5 * self.omega2);
        h[(3, 1)] = r(0.5 * self.omega2);
        h
    }
}

/// Addressing detuning at which the effective-rate denominator vanishes.
pub fn critical_delta_c(params: &FourLevelParams) -> f64 {
    params.omega_c * params.omega_c / (4.0 * params.delta_big) - params.delta_big - params.delta_shift
}

/// `Ω_eff = Ω1Ω2 / (2Δ − Ωc²/(2(Δ + Δc + δc)))`.
pub fn effective_rabi(params: &FourLevelParams) -> Result<f64> {
    params.validate()?;
    let d = params.delta_big;
    let u = d + params.delta_c_total();
    let dressing = if params.omega_c == 0.0 { 0.0 } else { params.omega_c * params.omega_c / (2.0 * u) };
    let denom = 2.0 * d - dressing;
    if denom.abs() <= SINGULAR_TOL * 2.0 * d.abs() {
        return Err(Error::Resonance { critical_delta_c: critical_delta_c(params) });
    }
    Ok(params.omega1 * params.omega2 / denom)
}

/// Modification factor `Ω_eff / (Ω1Ω2/2Δ)`.
pub fn rabi_factor(params: &FourLevelParams) -> Result<f64> {
    Ok(effective_rabi(params)? / params.bare_rabi())
}

/// Addressing detuning giving modification factor `xi`:
/// `Δc = −Δ + ξΩc²/(4Δ(ξ − 1))`.
pub fn solve_detuning_for_factor(xi: f64, delta_big: f64, omega_c: f64) -> Result<f64> {
    if !xi.is_finite() || !delta_big.is_finite() || !omega_c.is_finite() {
        return Err(Error::Parameter("inputs must be finite".into()));
    }
    if xi == 1.0 {
        return Err(Error::Parameter("factor 1 needs no dressing; the detuning is undefined".into()));
    }
    if delta_big == 0.0 {
        return Err(Error::Parameter("one-photon detuning delta must be nonzero".into()));
    }
    if omega_c == 0.0 {
        return Err(Error::Parameter("an undressed system cannot reach a factor other than 1".into()));
    }
    Ok(-delta_big + xi * omega_c * omega_c / (4.0 * delta_big * (xi - 1.0)))
}

/// The e–s dressed pair seen by the Raman beams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DressedBasis {
    pub delta_plus: f64,
    pub delta_minus: f64,
    /// Overlap magnitudes |⟨±|e⟩|.
    pub ratio_plus: f64,
    pub ratio_minus: f64,
}

impl DressedBasis {
    /// Sum over both dressed paths, `Ω1Ω2/2·(r₊²/Δ₊ + r₋²/Δ₋)`.
    pub fn path_sum_rabi(&self, omega1: f64, omega2: f64) -> f64 {
        let rp = self.ratio_plus * self.ratio_plus;
        let rm = self.ratio_minus * self.ratio_minus;
        let mut s = 0.0;
        if rp > 0.0 {
            s += rp / self.delta_plus;
        }
        if rm > 0.0 {
            s += rm / self.delta_minus;
        }
        0.5 * omega1 * omega2 * s
    }
}

/// `Δ± = Δ + (Δc ± √(Ωc² + Δc²))/2` and the matching overlaps, evaluated in
/// cancellation-free form.
pub fn dressed_basis(params: &FourLevelParams) -> Result<DressedBasis> {
    params.validate()?;
    let d = params.delta_big;
    let dc = params.delta_c_total();
    let oc2 = params.omega_c * params.omega_c;
    let root = dc.hypot(params.omega_c);
    if root == 0.0 {
        return Ok(DressedBasis { delta_plus: d, delta_minus: d, ratio_plus: 0.0, ratio_minus: 1.0 });
    }
    // (Δc + R) and (Δc − R); whichever suffers cancellation comes from Ωc².
    let (sum, diff) = if dc >= 0.0 {
        let s = dc + root;
        (s, -oc2 / s)
    } else {
        let df = dc - root;
        (-oc2 / df, df)
    };
    let (rp2, rm2) = if dc >= 0.0 {
        (oc2 / (2.0 * root * (root + dc)), (root + dc) / (2.0 * root))
    } else {
        ((root - dc) / (2.0 * root), oc2 / (2.0 * root * (root - dc)))
    };
    Ok(DressedBasis {
        delta_plus: d + 0.5 * sum,
        delta_minus: d + 0.5 * diff,
        ratio_plus: rp2.sqrt(),
        ratio_minus: rm2.sqrt(),
    })
}

fn check_consistent(params: &FourLevelParams, xi: f64) -> Result<()> {
    let actual = if params.omega_c == 0.0 { 1.0 } else { rabi_factor(params)? };
    if (actual - xi).abs() > CONSISTENCY_TOL * xi.abs().max(1.0) {
        return Err(Error::Validation(format!(
            "parameters give factor {actual:.12}, not the stated {xi}"
        )));
    }
    Ok(())
}

/// `dξ/dδc = −4Δ(1 − ξ)²/Ωc²`, per rad/μs of addressing shift.
pub fn sensitivity_to_shift(params: &FourLevelParams, xi: f64) -> Result<f64> {
    params.validate()?;
    check_consistent(params, xi)?;
    if xi == 1.0 {
        return Ok(0.0);
    }
    Ok(-4.0 * params.delta_big * (1.0 - xi).powi(2) / (params.omega_c * params.omega_c))
}

/// Population traces of a four-level evolution from ↑.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RabiTrace {
    pub times: Vec<f64>,
    pub p_up: Vec<f64>,
    pub p_down: Vec<f64>,
    pub p_e: Vec<f64>,
    pub p_s: Vec<f64>,
    pub omega_eff_analytic: f64,
    /// Angular frequency of the ↓ population oscillation.
    pub omega_eff_extracted: f64,
}

/// Evolve the four-level Hamiltonian from ↑ and extract the two-photon Rabi
/// rate from the ↓ population.
pub fn simulate_rabi_oscillation(params: &FourLevelParams, duration: f64, samples: usize) -> Result<RabiTrace> {
    let analytic = effective_rabi(params)?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::Parameter(format!("duration must be positive, got {duration}")));
    }
    if samples < 64 {
        return Err(Error::Parameter("at least 64 samples are required".into()));
    }
    let period = TAU / analytic.abs();
    if duration < 2.0 * period {
        return Err(Error::Parameter(format!(
            "duration {duration} covers fewer than two effective Rabi periods ({period} each)"
        )));
    }
    let eig = HermitianEigen4::new(&params.hamiltonian())?;
    let v = &eig.vectors;
    // Initial state ↑ expressed in the eigenbasis.
    let c: Vec<C64> = (0..4).map(|k| v[(0, k)].conj()).collect();
    let dt = duration / samples as f64;
    let rows: Vec<(f64, [f64; 4])> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 * dt;
            let phased: Vec<C64> = (0..4).map(|k| c[k] * C64::from_polar(1.0, -eig.values[k] * t)).collect();
            let mut p = [0.0; 4];
            for (level, slot) in p.iter_mut().enumerate() {
                let amp: C64 = (0..4).map(|k| v[(level, k)] * phased[k]).sum();
                *slot = amp.norm_sqr();
            }
            (t, p)
        })
        .collect();
    let times = rows.iter().map(|r| r.0).collect();
    let p_up = rows.iter().map(|r| r.1[0]).collect();
    let p_e = rows.iter().map(|r| r.1[1]).collect();
    let p_s = rows.iter().map(|r| r.1[2]).collect();
    let p_down: Vec<f64> = rows.iter().map(|r| r.1[3]).collect();
    let extracted = extract_oscillation_frequency(&p_down, dt)?;
    Ok(RabiTrace { times, p_up, p_down, p_e, p_s, omega_eff_analytic: analytic, omega_eff_extracted: extracted })
}

/// Dominant angular frequency of a uniformly sampled real signal.
///
/// The mean is removed, a Hann window applied, and the FFT magnitude peak
/// refined by a parabola through the log-magnitudes of the peak bin and its
/// neighbors.
pub fn extract_oscillation_frequency(signal: &[f64], dt: f64) -> Result<f64> {
    let n = signal.len();
    if n < 8 || !(dt > 0.0) {
        return Err(Error::Analysis("signal too short for spectral analysis".into()));
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<C64> = signal
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let w = 0.5 - 0.5 * (TAU * i as f64 / (n - 1) as f64).cos();
            C64::new((x - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let mag: Vec<f64> = buf[..n / 2 + 1].iter().map(|z| z.norm()).collect();
    let (j, &peak) = mag
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Analysis("empty spectrum".into()))?;
    if !(peak > 1e-12 * n as f64) {
        return Err(Error::Analysis("signal has no oscillating component".into()));
    }
    let rival = mag
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(i, _)| i.abs_diff(j) > 3)
        .map(|(_, &m)| m)
        .fold(0.0, f64::max);
    if rival >= AMBIGUITY_RATIO * peak {
        return Err(Error::Analysis(format!(
            "no dominant spectral peak (secondary/primary = {:.3})",
            rival / peak
        )));
    }
    if j + 1 >= mag.len() {
        return Err(Error::Analysis("spectral peak sits at the Nyquist edge".into()));
    }
    let (a, b, c) = (mag[j - 1].max(1e-300).ln(), peak.ln(), mag[j + 1].max(1e-300).ln());
    let curv = a - 2.0 * b + c;
    let offset = if curv < 0.0 { 0.5 * (a - c) / curv } else { 0.0 };
    Ok(TAU * (j as f64 + offset) / (n as f64 * dt))
}

/// One point of an addressing-shift scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub delta_c_shift: f64,
    pub omega_eff_analytic: f64,
    pub omega_eff_extracted: Option<f64>,
    pub infidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    pub worst_infidelity: f64,
}

/// Time-domain extraction settings for a scan, in effective Rabi periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionSettings {
    pub periods: f64,
    pub samples: usize,
}

impl Default for ExtractionSettings {
    fn default() -> Self {
        Self { periods: 10.0, samples: 8192 }
    }
}

/// Map each addressing shift in `[lo, hi]` to its effective Rabi rate and
/// evaluate `gate` at the correspondingly scaled drive.
///
/// The gate is taken as designed for the unshifted rate: at shift δc it runs
/// at `Ω = ωm·Ω_eff(δc)/Ω_eff(0)`, with ωm the program's tone frequency.
#[allow(clippy::too_many_arguments)]
pub fn addressing_infidelity_scan(
    params: &FourLevelParams,
    xi: f64,
    shift_range: (f64, f64),
    points: usize,
    gate: &GateProgram,
    extraction: Option<ExtractionSettings>,
    options: PropagationOptions,
) -> Result<ScanResult> {
    let (lo, hi) = shift_range;
    if !(lo.is_finite() && hi.is_finite() && hi >= lo) || points == 0 {
        return Err(Error::Parameter(format!("invalid shift range [{lo}, {hi}] or point count")));
    }
    let base = FourLevelParams { delta_shift: 0.0, ..*params };
    check_consistent(&base, xi)?;
    let nominal = effective_rabi(&base)?;
    let tones = gate.distinct_tones();
    let [tone] = tones.as_slice() else {
        return Err(Error::Configuration("scan needs a single-tone gate program".into()));
    };
    let target = gate
        .target
        .gate_target()
        .ok_or_else(|| Error::Configuration("gate program has no single-gate target".into()))?;
    let shifts: Vec<f64> = if points == 1 || hi == lo {
        vec![lo]
    } else {
        (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
    };
    let rows = shifts
        .iter()
        .map(|&s| {
            let p = base.with_shift(s);
            let w = effective_rabi(&p)?;
            let omega = tone.omega_m * w / nominal;
            let infidelity = max_infidelity_at(gate, &[omega.abs()], &target, Model::FirstFrame, options)?;
            let omega_eff_extracted = match extraction {
                Some(ex) => {
                    let dur = ex.periods * TAU / w.abs();
                    Some(simulate_rabi_oscillation(&p, dur, ex.samples)?.omega_eff_extracted)
                }
                None => None,
            };
            Ok(ScanRow { delta_c_shift: s, omega_eff_analytic: w, omega_eff_extracted, infidelity })
        })
        .collect::<Result<Vec<_>>>()?;
    let worst_infidelity = rows.iter().map(|r| r.infidelity).fold(0.0, f64::max);
    Ok(ScanResult { rows, worst_infidelity })
}

/// Infidelity of a plain resonant π pulse detuned in amplitude by `ratio`.
pub fn bare_pulse_infidelity(ratio: f64) -> f64 {
    (0.5 * PI * ratio).cos().powi(2)
}
