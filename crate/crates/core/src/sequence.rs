//! Gate programs: phase-modulated Z and X gates, the hybrid X design and
//! Thue–Morse carrier-phase concatenation.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{su2_exp, GateTarget, PauliVector};

/// Highest supported concatenation order (2^24 blocks).
pub const MAX_ORDER: u32 = 24;
/// Current version of the program JSON schema.
pub const SCHEMA_VERSION: u32 = 1;
/// Relative tolerance used by [`validate_quantization`].
pub const QUANTIZATION_TOL: f64 = 1e-9;

/// One modulation tone `εm cos(ωm t + φm)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationTone {
    pub eps_m: f64,
    pub omega_m: f64,
    pub phi_m: f64,
}

impl ModulationTone {
    pub fn new(eps_m: f64, omega_m: f64, phi_m: f64) -> Result<Self> {
        if !(eps_m > 0.0 && eps_m.is_finite()) {
            return Err(Error::Parameter(format!("eps_m must be positive, got {eps_m}")));
        }
        if !(omega_m > 0.0 && omega_m.is_finite()) {
            return Err(Error::Parameter(format!("omega_m must be positive, got {omega_m}")));
        }
        if !phi_m.is_finite() {
            return Err(Error::Parameter(format!("phi_m must be finite, got {phi_m}")));
        }
        Ok(Self { eps_m, omega_m, phi_m })
    }

    /// Set when `εm/ωm > 1/8`, where the second-frame RWA gets loose.
    pub fn rwa_advisory(&self) -> bool {
        self.eps_m / self.omega_m > 0.125
    }
}

/// One block of a gate program.
#[derive(Debug, Clone, PartialEq)]
pub enum DriveSegment {
    /// Constant-amplitude drive with carrier phase `phi` and phase-modulation tones.
    Pm {
        phi: f64,
        tones: Vec<ModulationTone>,
        duration: f64,
    },
    /// Rotation by `angle` about `axis`. Zero duration means an ideal
    /// instantaneous unitary; a positive duration drives it resonantly at the
    /// local Rabi rate, so off-target sites see a scaled angle.
    Bare {
        axis: PauliVector,
        angle: f64,
        duration: f64,
    },
}

impl DriveSegment {
    pub fn duration(&self) -> f64 {
        match self {
            DriveSegment::Pm { duration, .. } | DriveSegment::Bare { duration, .. } => *duration,
        }
    }

    pub fn is_pm(&self) -> bool {
        matches!(self, DriveSegment::Pm { .. })
    }
}

/// Intended operation of a program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateLabel {
    Z(f64),
    X(f64),
    Identity,
    /// Multi-target program; the per-site targets live in the parallel plan.
    Parallel,
}

impl GateLabel {
    /// The rotation this label names, or `None` for [`GateLabel::Parallel`].
    pub fn gate_target(&self) -> Option<GateTarget> {
        match *self {
            GateLabel::Z(a) => su2_exp(PauliVector::Z, a).ok().map(GateTarget::Unitary),
            GateLabel::X(a) => su2_exp(PauliVector::X, a).ok().map(GateTarget::Unitary),
            GateLabel::Identity => Some(GateTarget::I),
            GateLabel::Parallel => None,
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            GateLabel::Z(a) | GateLabel::X(a) => Some(a),
            GateLabel::Identity => Some(0.0),
            GateLabel::Parallel => None,
        }
    }

    fn inverse(&self) -> Self {
        match *self {
            GateLabel::Z(a) => GateLabel::Z(-a),
            GateLabel::X(a) => GateLabel::X(-a),
            other => other,
        }
    }
}

/// An ordered list of drive segments with its intended gate.
#[derive(Debug, Clone, PartialEq)]
pub struct GateProgram {
    pub segments: Vec<DriveSegment>,
    pub target: GateLabel,
}

impl GateProgram {
    /// Build and validate.
    pub fn new(segments: Vec<DriveSegment>, target: GateLabel) -> Result<Self> {
        let p = Self { segments, target };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::Validation("program has no segments".into()));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            match seg {
                DriveSegment::Pm { phi, tones, duration } => {
                    if !(*duration > 0.0 && duration.is_finite()) {
                        return Err(Error::Validation(format!(
                            "segment {i}: PM duration must be positive, got {duration}"
                        )));
                    }
                    if !phi.is_finite() {
                        return Err(Error::Validation(format!("segment {i}: phi is not finite")));
                    }
                    if tones.is_empty() {
                        return Err(Error::Validation(format!("segment {i}: PM segment has no tones")));
                    }
                    for t in tones {
                        // eps_m = 0 is allowed here: a switched-off tone.
                        let ok = t.eps_m >= 0.0
                            && t.eps_m.is_finite()
                            && t.omega_m > 0.0
                            && t.omega_m.is_finite()
                            && t.phi_m.is_finite();
                        if !ok {
                            return Err(Error::Validation(format!("segment {i}: invalid tone {t:?}")));
                        }
                    }
                }
                DriveSegment::Bare { axis, angle, duration } => {
                    if (axis.norm() - 1.0).abs() > 1e-9 || !axis.is_finite() {
                        return Err(Error::Validation(format!("segment {i}: bare axis is not a unit vector")));
                    }
                    if !angle.is_finite() || !(*duration >= 0.0 && duration.is_finite()) {
                        return Err(Error::Validation(format!("segment {i}: invalid bare rotation")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(DriveSegment::duration).sum()
    }

    /// Summed duration of the PM segments; this is the modulation clock span.
    pub fn pm_duration(&self) -> f64 {
        self.segments.iter().filter(|s| s.is_pm()).map(DriveSegment::duration).sum()
    }

    pub fn pm_segment_count(&self) -> usize {
        self.segments.iter().filter(|s| s.is_pm()).count()
    }

    /// Distinct (εm, ωm) pairs across all PM segments, in first-seen order.
    pub fn distinct_tones(&self) -> Vec<ModulationTone> {
        let mut out: Vec<ModulationTone> = Vec::new();
        for seg in &self.segments {
            if let DriveSegment::Pm { tones, .. } = seg {
                for t in tones {
                    if !out.iter().any(|o| o.eps_m == t.eps_m && o.omega_m == t.omega_m) {
                        out.push(*t);
                    }
                }
            }
        }
        out
    }

    pub fn is_single_tone(&self) -> bool {
        self.segments.iter().all(|s| match s {
            DriveSegment::Pm { tones, .. } => tones.len() == 1,
            DriveSegment::Bare { .. } => true,
        })
    }

    /// The time-reversed inverse program.
    ///
    /// Segments run in reverse order; carrier phases gain π, each tone phase
    /// becomes `π − φm − ωm·T` (T the PM span) so the modulation is mirrored in
    /// time, and bare angles are negated. Running a program followed by its
    /// adjoint returns the identity at zero detuning.
    pub fn adjoint(&self) -> GateProgram {
        let span = self.pm_duration();
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|seg| match seg {
                DriveSegment::Pm { phi, tones, duration } => DriveSegment::Pm {
                    phi: phi + PI,
                    tones: tones
                        .iter()
                        .map(|t| ModulationTone {
                            phi_m: (PI - t.phi_m - t.omega_m * span).rem_euclid(TAU),
                            ..*t
                        })
                        .collect(),
                    duration: *duration,
                },
                DriveSegment::Bare { axis, angle, duration } => DriveSegment::Bare {
                    axis: *axis,
                    angle: -angle,
                    duration: *duration,
                },
            })
            .collect();
        GateProgram { segments, target: self.target.inverse() }
    }

    /// Replace ideal bare rotations with resonant pulses at Rabi rate `omega`.
    pub fn with_finite_bare(&self, omega: f64) -> Result<GateProgram> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Parameter(format!("bare-pulse Rabi rate must be positive, got {omega}")));
        }
        let segments = self
            .segments
            .iter()
            .map(|seg| match seg {
                DriveSegment::Bare { axis, angle, .. } => DriveSegment::Bare {
                    axis: *axis,
                    angle: *angle,
                    duration: angle.abs() / omega,
                },
                other => other.clone(),
            })
            .collect();
        Ok(GateProgram { segments, target: self.target })
    }
}

/// Thue–Morse bit `j`: parity of the number of set bits.
pub fn thue_morse_bit(j: usize) -> u8 {
    (j.count_ones() & 1) as u8
}

/// The first `2^order` Thue–Morse bits.
pub fn thue_morse_phases(order: u32) -> Result<Vec<u8>> {
    if order < 1 || order > MAX_ORDER {
        return Err(Error::Parameter(format!(
            "concatenation order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    Ok((0..1usize << order).map(thue_morse_bit).collect())
}

/// Default k putting εm near ωm/16 for the requested angle.
pub fn default_k(angle: f64) -> u32 {
    ((8.0 * angle / PI) - 1e-9).ceil().max(1.0) as u32
}

fn check_gate_args(angle: f64, omega_m: f64, k: u32, order: u32) -> Result<()> {
    if !(angle > 0.0 && angle <= TAU) {
        return Err(Error::Parameter(format!("rotation angle must lie in (0, 2pi], got {angle}")));
    }
    if !(omega_m > 0.0 && omega_m.is_finite()) {
        return Err(Error::Parameter(format!("omega_m must be positive, got {omega_m}")));
    }
    if k < 1 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    if order < 1 || order > MAX_ORDER {
        return Err(Error::Parameter(format!(
            "concatenation order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    Ok(())
}

/// PM blocks with carrier phases `phi0 + π·b` and tone phases `phim0 + π·b`
/// (or fixed `phim0` when `tone_follows` is false).
fn pm_blocks(
    angle: f64,
    omega_m: f64,
    k: u32,
    order: u32,
    phi0: f64,
    phim0: f64,
    tone_follows: bool,
) -> Result<Vec<DriveSegment>> {
    check_gate_args(angle, omega_m, k, order)?;
    let eps_m = omega_m * angle / (TAU * k as f64);
    let total = angle / eps_m;
    let pattern = thue_morse_phases(order)?;
    let block = total / pattern.len() as f64;
    Ok(pattern
        .into_iter()
        .map(|b| {
            let shift = PI * b as f64;
            let phi_m = if tone_follows { phim0 + shift } else { phim0 };
            DriveSegment::Pm {
                phi: phi0 + shift,
                tones: vec![ModulationTone { eps_m, omega_m, phi_m }],
                duration: block,
            }
        })
        .collect())
}

/// Phase-modulated rotation by `angle` about z.
///
/// `εm = ωm·angle/(2πk)`, `T = angle/εm`, split into `2^order` equal blocks
/// whose carrier phases follow the Thue–Morse pattern mapped to {0, π}.
pub fn build_z_gate(angle: f64, omega_m: f64, k: u32, order: u32) -> Result<GateProgram> {
    let segments = pm_blocks(angle, omega_m, k, order, 0.0, 0.0, false)?;
    Ok(GateProgram { segments, target: GateLabel::Z(angle) })
}

/// Phase-modulated rotation about x: carrier and tone phases both follow the
/// Thue–Morse pattern mapped to {π/2, 3π/2}.
pub fn build_x_gate_pm(angle: f64, omega_m: f64, k: u32, order: u32) -> Result<GateProgram> {
    let segments = pm_blocks(angle, omega_m, k, order, FRAC_PI_2, FRAC_PI_2, true)?;
    Ok(GateProgram { segments, target: GateLabel::X(angle) })
}

/// Hybrid X gate: ideal Y(π/2), the PM Z rotation, then Y(−π/2).
///
/// In this time order the composite is `exp(+i·angle/2·σx)`, a rotation about
/// −x, so the label carries `X(−angle)`. For `angle = π` it is the X gate up
/// to global phase.
pub fn build_x_gate_hybrid(angle: f64, omega_m: f64, k: u32, order: u32) -> Result<GateProgram> {
    let mut segments = Vec::with_capacity((1usize << order.min(MAX_ORDER)) + 2);
    let inner = pm_blocks(angle, omega_m, k, order, 0.0, 0.0, false)?;
    segments.push(DriveSegment::Bare { axis: PauliVector::Y, angle: FRAC_PI_2, duration: 0.0 });
    segments.extend(inner);
    segments.push(DriveSegment::Bare { axis: PauliVector::Y, angle: -FRAC_PI_2, duration: 0.0 });
    Ok(GateProgram { segments, target: GateLabel::X(-angle) })
}

/// Per-tone modulation-period check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToneQuantization {
    pub eps_m: f64,
    pub omega_m: f64,
    /// `ωm·T/2π`.
    pub cycles: f64,
    /// Distance of `cycles` from the nearest integer, in cycles.
    pub residual: f64,
    pub passed: bool,
}

/// Intended vs achieved rotation angle `εm·T`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleCheck {
    pub intended: f64,
    pub achieved: f64,
    /// `intended − achieved`.
    pub residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizationReport {
    pub pm_duration: f64,
    pub tones: Vec<ToneQuantization>,
    pub angle: Option<AngleCheck>,
    pub passed: bool,
}

/// Check that every tone completes an integer number of periods over the PM
/// span and, for single-tone programs, that `εm·T` equals the target angle.
pub fn validate_quantization(program: &GateProgram) -> QuantizationReport {
    let span = program.pm_duration();
    let tones: Vec<ToneQuantization> = program
        .distinct_tones()
        .into_iter()
        .map(|t| {
            let cycles = t.omega_m * span / TAU;
            let residual = cycles - cycles.round();
            ToneQuantization {
                eps_m: t.eps_m,
                omega_m: t.omega_m,
                cycles,
                residual,
                passed: residual.abs() <= QUANTIZATION_TOL * cycles.abs().max(1.0),
            }
        })
        .collect();

    let angle = match (program.target.angle(), tones.as_slice()) {
        (Some(intended), [tone]) if program.target != GateLabel::Identity => {
            let intended = intended.abs();
            let achieved = tone.eps_m * span;
            let residual = intended - achieved;
            Some(AngleCheck {
                intended,
                achieved,
                residual,
                passed: residual.abs() <= QUANTIZATION_TOL * intended.max(1.0),
            })
        }
        _ => None,
    };
    let passed = !tones.is_empty()
        && tones.iter().all(|t| t.passed)
        && angle.as_ref().map_or(true, |a| a.passed);
    QuantizationReport { pm_duration: span, tones, angle, passed }
}

// ---------------------------------------------------------------------------
// JSON wire format

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetDoc {
    pub gate: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentDoc {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tones: Vec<ModulationTone>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bare_axis: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bare_angle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramDoc {
    pub schema_version: u32,
    pub target: TargetDoc,
    pub segments: Vec<SegmentDoc>,
}

impl From<&GateProgram> for ProgramDoc {
    fn from(p: &GateProgram) -> Self {
        let target = match p.target {
            GateLabel::Z(a) => TargetDoc { gate: "Z".into(), angle: Some(a) },
            GateLabel::X(a) => TargetDoc { gate: "X".into(), angle: Some(a) },
            GateLabel::Identity => TargetDoc { gate: "I".into(), angle: None },
            GateLabel::Parallel => TargetDoc { gate: "PARALLEL".into(), angle: None },
        };
        let segments = p
            .segments
            .iter()
            .map(|s| match s {
                DriveSegment::Pm { phi, tones, duration } => SegmentDoc {
                    kind: "PM".into(),
                    phi: Some(*phi),
                    duration: *duration,
                    tones: tones.clone(),
                    bare_axis: None,
                    bare_angle: None,
                },
                DriveSegment::Bare { axis, angle, duration } => SegmentDoc {
                    kind: "BARE".into(),
                    phi: None,
                    duration: *duration,
                    tones: Vec::new(),
                    bare_axis: Some(axis.as_array()),
                    bare_angle: Some(*angle),
                },
            })
            .collect();
        ProgramDoc { schema_version: SCHEMA_VERSION, target, segments }
    }
}

impl TryFrom<ProgramDoc> for GateProgram {
    type Error = Error;

    fn try_from(doc: ProgramDoc) -> Result<Self> {
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                doc.schema_version
            )));
        }
        let need_angle = |g: &str| {
            doc.target
                .angle
                .ok_or_else(|| Error::Validation(format!("target {g} requires an angle")))
        };
        let target = match doc.target.gate.as_str() {
            "Z" => GateLabel::Z(need_angle("Z")?),
            "X" => GateLabel::X(need_angle("X")?),
            "I" => GateLabel::Identity,
            "PARALLEL" => GateLabel::Parallel,
            other => return Err(Error::Validation(format!("unknown target gate '{other}'"))),
        };
        let mut segments = Vec::with_capacity(doc.segments.len());
        for (i, s) in doc.segments.into_iter().enumerate() {
            let seg = match s.kind.as_str() {
                "PM" => {
                    if s.bare_axis.is_some() || s.bare_angle.is_some() {
                        return Err(Error::Validation(format!("segment {i}: PM segment has bare fields")));
                    }
                    DriveSegment::Pm {
                        phi: s.phi.ok_or_else(|| Error::Validation(format!("segment {i}: missing phi")))?,
                        tones: s.tones,
                        duration: s.duration,
                    }
                }
                "BARE" => {
                    if !s.tones.is_empty() || s.phi.is_some() {
                        return Err(Error::Validation(format!("segment {i}: BARE segment has PM fields")));
                    }
                    let [x, y, z] = s
                        .bare_axis
                        .ok_or_else(|| Error::Validation(format!("segment {i}: missing bare_axis")))?;
                    DriveSegment::Bare {
                        axis: PauliVector::new(x, y, z),
                        angle: s
                            .bare_angle
                            .ok_or_else(|| Error::Validation(format!("segment {i}: missing bare_angle")))?,
                        duration: s.duration,
                    }
                }
                other => return Err(Error::Validation(format!("segment {i}: unknown kind '{other}'"))),
            };
            segments.push(seg);
        }
        GateProgram::new(segments, target)
    }
}

impl GateProgram {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ProgramDoc::from(self)).expect("program serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProgramDoc =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("program JSON: {e}")))?;
        GateProgram::try_from(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn phases(p: &GateProgram) -> Vec<f64> {
        p.segments
            .iter()
            .filter_map(|s| match s {
                DriveSegment::Pm { phi, .. } => Some(*phi),
                _ => None,
            })
            .collect()
    }

    fn tone(p: &GateProgram) -> ModulationTone {
        p.distinct_tones()[0]
    }

    #[test]
    fn z_gate_examples() {
        let wm = 2.0;
        let p = build_z_gate(PI, wm, 8, 1).unwrap();
        assert!((tone(&p).eps_m - wm / 16.0).abs() < 1e-15);
        assert!((p.total_duration() - 16.0 * PI / wm).abs() < 1e-12);
        assert_eq!(phases(&p), vec![0.0, PI]);

        let p = build_z_gate(PI, wm, 8, 2).unwrap();
        assert_eq!(phases(&p), vec![0.0, PI, PI, 0.0]);

        let p = build_z_gate(FRAC_PI_2, wm, 4, 1).unwrap();
        assert!((tone(&p).eps_m - wm / 16.0).abs() < 1e-15);
        assert!((p.total_duration() - 8.0 * PI / wm).abs() < 1e-12);
    }

    #[test]
    fn z_gate_parameter_errors() {
        assert!(matches!(build_z_gate(0.0, 1.0, 8, 1), Err(Error::Parameter(_))));
        assert!(matches!(build_z_gate(-1.0, 1.0, 8, 1), Err(Error::Parameter(_))));
        assert!(matches!(build_z_gate(PI, 1.0, 0, 1), Err(Error::Parameter(_))));
        assert!(matches!(build_z_gate(PI, 1.0, 8, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn x_pm_patterns() {
        let a = FRAC_PI_2;
        let b = 3.0 * FRAC_PI_2;
        let p = build_x_gate_pm(PI, 1.0, 8, 1).unwrap();
        let pairs: Vec<(f64, f64)> = p
            .segments
            .iter()
            .map(|s| match s {
                DriveSegment::Pm { phi, tones, .. } => (*phi, tones[0].phi_m),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(pairs, vec![(a, a), (b, b)]);

        let p = build_x_gate_pm(PI, 1.0, 8, 3).unwrap();
        assert_eq!(phases(&p), vec![a, b, b, a, b, a, a, b]);
        assert_eq!(build_x_gate_pm(PI, 1.0, 8, 4).unwrap().segments.len(), 16);
    }

    #[test]
    fn hybrid_structure() {
        let p = build_x_gate_hybrid(PI, 1.0, 8, 4).unwrap();
        assert_eq!(p.segments.len(), 18);
        assert!(matches!(p.segments[0], DriveSegment::Bare { angle, .. } if angle == FRAC_PI_2));
        assert!(matches!(p.segments[17], DriveSegment::Bare { angle, .. } if angle == -FRAC_PI_2));
        let bits: Vec<u8> = phases(&p).iter().map(|f| (f / PI).round() as u8).collect();
        assert_eq!(bits, vec![0, 1, 1, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0]);
        let p2 = build_x_gate_hybrid(PI, 1.0, 8, 2).unwrap();
        assert_eq!(phases(&p2), vec![0.0, PI, PI, 0.0]);
    }

    #[test]
    fn thue_morse_examples() {
        assert_eq!(thue_morse_phases(1).unwrap(), vec![0, 1]);
        assert_eq!(thue_morse_phases(2).unwrap(), vec![0, 1, 1, 0]);
        assert_eq!(
            thue_morse_phases(4).unwrap(),
            vec![0, 1, 1, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0]
        );
        assert!(thue_morse_phases(0).is_err());
    }

    #[test]
    fn thue_morse_recursion() {
        for order in 1..8 {
            let a = thue_morse_phases(order).unwrap();
            let b = thue_morse_phases(order + 1).unwrap();
            let mut expect = a.clone();
            expect.extend(a.iter().map(|x| 1 - x));
            assert_eq!(b, expect);
        }
    }

    #[test]
    fn default_k_values() {
        assert_eq!(default_k(PI), 8);
        assert_eq!(default_k(FRAC_PI_2), 4);
        assert_eq!(default_k(TAU), 16);
        assert_eq!(default_k(1e-3), 1);
    }

    #[test]
    fn quantization_examples() {
        let wm = 1.3;
        let r = validate_quantization(&build_z_gate(PI, wm, 8, 1).unwrap());
        assert!(r.passed);
        assert!((r.tones[0].cycles * TAU - 16.0 * PI).abs() < 1e-9);

        let t = ModulationTone::new(wm / 16.0, wm, 0.0).unwrap();
        let dur = 0.9 * PI / t.eps_m;
        let bad = GateProgram::new(
            vec![DriveSegment::Pm { phi: 0.0, tones: vec![t], duration: dur }],
            GateLabel::Z(PI),
        )
        .unwrap();
        let r = validate_quantization(&bad);
        assert!(!r.passed);
        let a = r.angle.unwrap();
        assert!((a.residual - 0.1 * PI).abs() < 1e-12);
    }

    #[test]
    fn x_pm_quantization_ignores_tone_phase() {
        let r = validate_quantization(&build_x_gate_pm(PI, 1.0, 8, 3).unwrap());
        assert_eq!(r.tones.len(), 1);
        assert!(r.passed);
    }

    #[test]
    fn rwa_advisory_flag() {
        assert!(!ModulationTone::new(1.0 / 16.0, 1.0, 0.0).unwrap().rwa_advisory());
        assert!(ModulationTone::new(0.2, 1.0, 0.0).unwrap().rwa_advisory());
        assert!(ModulationTone::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        for p in [
            build_z_gate(PI, 1.0, 8, 2).unwrap(),
            build_x_gate_pm(PI, 1.0, 8, 1).unwrap(),
            build_x_gate_hybrid(FRAC_PI_2, 2.0, 4, 3).unwrap(),
        ] {
            let back = GateProgram::from_json(&p.to_json()).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn json_rejects_unknown_and_bad_version() {
        let p = build_z_gate(PI, 1.0, 8, 1).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(GateProgram::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        v["schema_version"] = serde_json::json!(7);
        assert!(GateProgram::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        v["segments"][0]["duration"] = serde_json::json!(-1.0);
        assert!(GateProgram::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn adjoint_structure() {
        let p = build_x_gate_hybrid(PI, 1.0, 8, 1).unwrap();
        let a = p.adjoint();
        assert_eq!(a.segments.len(), p.segments.len());
        assert!(matches!(a.segments[0], DriveSegment::Bare { angle, .. } if angle == FRAC_PI_2));
        assert_eq!(a.adjoint().segments.len(), p.segments.len());
        assert!((a.total_duration() - p.total_duration()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn equal_blocks_and_order_independent_span(
            angle in 0.05f64..TAU, wm in 0.1f64..50.0, k in 1u32..40, order in 1u32..7,
        ) {
            let lo = build_z_gate(angle, wm, k, order).unwrap();
            let hi = build_z_gate(angle, wm, k, order + 1).unwrap();
            let eps = tone(&lo).eps_m;
            prop_assert!((lo.pm_duration() - angle / eps).abs() <= 1e-12 * lo.pm_duration());
            prop_assert_eq!(tone(&hi).eps_m, eps);
            prop_assert!((hi.pm_duration() - lo.pm_duration()).abs() <= 1e-12 * lo.pm_duration());
            let d0 = lo.segments[0].duration();
            prop_assert!(lo.segments.iter().all(|s| s.duration() == d0));
            prop_assert!(validate_quantization(&hi).passed);
        }
    }
}
