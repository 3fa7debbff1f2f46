//! Small-matrix quantum kernel.
//!
//! SU(2) algebra in the Pauli basis, closed-form 2x2 exponentials, Pauli
//! decomposition, trace fidelities and the 4x4 Hermitian propagator used by
//! the light-shift model. Everything here is a pure function on values.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Matrix4;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Unitarity tolerance applied by [`Unitary2::new`].
pub const UNITARITY_TOL: f64 = 1e-12;
/// Tolerance on |axis| accepted by [`su2_exp`].
pub const AXIS_NORM_TOL: f64 = 1e-9;
/// Hermiticity tolerance accepted by [`herm_exp_4`].
pub const HERMITIAN_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// A real three-vector in the Pauli basis, `n·σ = nx σx + ny σy + nz σz`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PauliVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PauliVector {
    pub const X: PauliVector = PauliVector::new(1.0, 0.0, 0.0);
    pub const Y: PauliVector = PauliVector::new(0.0, 1.0, 0.0);
    pub const Z: PauliVector = PauliVector::new(0.0, 0.0, 1.0);
    pub const ZERO: PauliVector = PauliVector::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// In-plane drive direction `σx' = cos φ σx + sin φ σy`.
    pub fn drive_axis(phi: f64) -> Self {
        Self::new(phi.cos(), phi.sin(), 0.0)
    }

    /// `σy' = ẑ × σx'`, the in-plane direction orthogonal to the drive.
    pub fn drive_normal(phi: f64) -> Self {
        Self::new(-phi.sin(), phi.cos(), 0.0)
    }

    /// Second-frame longitudinal axis `σz' = cos φm σz − sin φm σy'`.
    pub fn modulation_axis(phi: f64, phi_m: f64) -> Self {
        Self::Z * phi_m.cos() - Self::drive_normal(phi) * phi_m.sin()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    /// Unit vector along `self`, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| *self * (1.0 / n))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for PauliVector {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for PauliVector {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Neg for PauliVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for PauliVector {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Coefficients of `U = c0 I + cx σx + cy σy + cz σz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliCoefficients {
    pub c0: C64,
    pub cx: C64,
    pub cy: C64,
    pub cz: C64,
}

impl PauliCoefficients {
    pub fn as_array(&self) -> [C64; 4] {
        [self.c0, self.cx, self.cy, self.cz]
    }

    /// `(|c0|², |cx|², |cy|², |cz|²)`.
    pub fn probabilities(&self) -> [f64; 4] {
        self.as_array().map(|c| c.norm_sqr())
    }

    /// Rebuild the 2x2 matrix `Σ c_P P`.
    pub fn reconstruct(&self) -> [[C64; 2]; 2] {
        [
            [self.c0 + self.cz, self.cx - I * self.cy],
            [self.cx + I * self.cy, self.c0 - self.cz],
        ]
    }

    /// Largest coefficient difference after removing the best global phase.
    pub fn aligned_distance(&self, other: &Self) -> f64 {
        let a = self.as_array();
        let b = other.as_array();
        let overlap: C64 = a.iter().zip(&b).map(|(x, y)| y.conj() * x).sum();
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            ONE
        };
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - phase * y).norm())
            .fold(0.0, f64::max)
    }

    /// Largest coefficient difference, no phase alignment.
    pub fn max_distance(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array().iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }
}

/// A 2x2 unitary stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2 {
    m: [[C64; 2]; 2],
}

impl Unitary2 {
    /// Validating constructor: rejects matrices with `‖U†U − I‖_F > 1e-12`.
    pub fn new(m: [[C64; 2]; 2]) -> Result<Self> {
        let u = Self { m };
        let err = u.unitarity_error();
        if !(err <= UNITARITY_TOL) {
            return Err(Error::Validation(format!(
                "matrix is not unitary: |U^dag U - I|_F = {err:.3e}"
            )));
        }
        Ok(u)
    }

    /// Build from Pauli coefficients, validated like [`Unitary2::new`].
    pub fn from_pauli(c: PauliCoefficients) -> Result<Self> {
        Self::new(c.reconstruct())
    }

    pub(crate) fn from_raw(m: [[C64; 2]; 2]) -> Self {
        Self { m }
    }

    pub fn identity() -> Self {
        Self::from_raw([[ONE, ZERO], [ZERO, ONE]])
    }

    pub fn pauli_x() -> Self {
        Self::from_raw([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn pauli_y() -> Self {
        Self::from_raw([[ZERO, -I], [I, ZERO]])
    }

    pub fn pauli_z() -> Self {
        Self::from_raw([[ONE, ZERO], [ZERO, -ONE]])
    }

    /// `exp(−i v·σ)` for an arbitrary real vector `v`.
    pub fn exp_pauli(v: PauliVector) -> Self {
        let angle = v.norm();
        if angle == 0.0 {
            return Self::identity();
        }
        let (s, c) = angle.sin_cos();
        let k = s / angle;
        let (x, y, z) = (v.x * k, v.y * k, v.z * k);
        Self::from_raw([
            [C64::new(c, -z), C64::new(-y, -x)],
            [C64::new(y, -x), C64::new(c, z)],
        ])
    }

    pub fn matrix(&self) -> [[C64; 2]; 2] {
        self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.m[row][col]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.m;
        Self::from_raw([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn trace(&self) -> C64 {
        self.m[0][0] + self.m[1][1]
    }

    /// Multiply by the global phase `e^{iγ}`.
    pub fn with_global_phase(&self, gamma: f64) -> Self {
        let p = C64::from_polar(1.0, gamma);
        Self::from_raw(self.m.map(|row| row.map(|e| e * p)))
    }

    pub fn coefficients(&self) -> PauliCoefficients {
        pauli_decompose(self)
    }

    /// `‖U†U − I‖_F`.
    pub fn unitarity_error(&self) -> f64 {
        let p = self.adjoint() * *self;
        let mut acc = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let target = if r == c { ONE } else { ZERO };
                acc += (p.m[r][c] - target).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Frobenius distance to another matrix.
    pub fn distance(&self, other: &Self) -> f64 {
        let mut acc = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                acc += (self.m[r][c] - other.m[r][c]).norm_sqr();
            }
        }
        acc.sqrt()
    }
}

impl Mul for Unitary2 {
    type Output = Unitary2;
    fn mul(self, rhs: Unitary2) -> Unitary2 {
        let a = &self.m;
        let b = &rhs.m;
        Unitary2::from_raw([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

/// `exp(−i·angle/2·n̂·σ)`, a rotation by `angle` about the unit axis `n̂`.
pub fn su2_exp(axis: PauliVector, angle: f64) -> Result<Unitary2> {
    let n = axis.norm();
    if !axis.is_finite() || (n - 1.0).abs() > AXIS_NORM_TOL {
        return Err(Error::Validation(format!(
            "rotation axis must be a unit vector, got |n| = {n}"
        )));
    }
    if !angle.is_finite() {
        return Err(Error::Validation(format!("rotation angle must be finite, got {angle}")));
    }
    Ok(Unitary2::exp_pauli(axis * (0.5 * angle)))
}

/// `c0 = Tr(U)/2`, `c_k = Tr(σ_k U)/2`.
pub fn pauli_decompose(u: &Unitary2) -> PauliCoefficients {
    let m = &u.m;
    PauliCoefficients {
        c0: (m[0][0] + m[1][1]) * 0.5,
        cx: (m[1][0] + m[0][1]) * 0.5,
        cy: (m[1][0] - m[0][1]) * (-I * 0.5),
        cz: (m[0][0] - m[1][1]) * 0.5,
    }
}

/// Fidelity target for [`gate_fidelity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateTarget {
    I,
    X,
    Y,
    Z,
    Unitary(Unitary2),
}

impl GateTarget {
    pub fn unitary(&self) -> Unitary2 {
        match self {
            GateTarget::I => Unitary2::identity(),
            GateTarget::X => Unitary2::pauli_x(),
            GateTarget::Y => Unitary2::pauli_y(),
            GateTarget::Z => Unitary2::pauli_z(),
            GateTarget::Unitary(u) => *u,
        }
    }
}

/// `|Tr(target† U)/2|²`; for a Pauli target this is the squared coefficient.
pub fn gate_fidelity(u: &Unitary2, target: &GateTarget) -> f64 {
    let c = u.coefficients();
    match target {
        GateTarget::I => c.c0.norm_sqr(),
        GateTarget::X => c.cx.norm_sqr(),
        GateTarget::Y => c.cy.norm_sqr(),
        GateTarget::Z => c.cz.norm_sqr(),
        GateTarget::Unitary(t) => ((t.adjoint() * *u).trace() * 0.5).norm_sqr(),
    }
}

pub type Matrix4c = Matrix4<C64>;

/// Eigendecomposition `H = V diag(λ) V†` of a 4x4 Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen4 {
    pub values: [f64; 4],
    pub vectors: Matrix4c,
}

impl HermitianEigen4 {
    pub fn new(h: &Matrix4c) -> Result<Self> {
        let skew = (h - h.adjoint()).norm();
        if !(skew <= HERMITIAN_TOL) {
            return Err(Error::Validation(format!(
                "matrix is not Hermitian: |H - H^dag| = {skew:.3e}"
            )));
        }
        let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
        let eig = sym.symmetric_eigen();
        let values = [
            eig.eigenvalues[0],
            eig.eigenvalues[1],
            eig.eigenvalues[2],
            eig.eigenvalues[3],
        ];
        Ok(Self { values, vectors: eig.eigenvectors })
    }

    /// `exp(−iHt)`.
    pub fn propagator(&self, t: f64) -> Matrix4c {
        let phases = Matrix4c::from_diagonal(&nalgebra::Vector4::from_iterator(
            self.values.iter().map(|&l| C64::from_polar(1.0, -l * t)),
        ));
        self.vectors * phases * self.vectors.adjoint()
    }
}

/// `exp(−iHt)` for a 4x4 Hermitian `H`.
pub fn herm_exp_4(h: &Matrix4c, t: f64) -> Result<Matrix4c> {
    Ok(HermitianEigen4::new(h)?.propagator(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn su2_exp_examples() {
        let u = su2_exp(PauliVector::Z, 0.0).unwrap();
        assert!(u.distance(&Unitary2::identity()) < 1e-15);

        let c = su2_exp(PauliVector::Z, PI).unwrap().coefficients();
        assert!(close(c.c0, ZERO, 1e-15));
        assert!(close(c.cz, -I, 1e-15));

        let c = su2_exp(PauliVector::X, FRAC_PI_2).unwrap().coefficients();
        assert!(close(c.c0, C64::new(FRAC_1_SQRT_2, 0.0), 1e-15));
        assert!(close(c.cx, C64::new(0.0, -FRAC_1_SQRT_2), 1e-15));
    }

    #[test]
    fn su2_exp_rejects_non_unit_axis() {
        let err = su2_exp(PauliVector::new(1.0, 1.0, 0.0), 1.0).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(su2_exp(PauliVector::ZERO, 1.0).is_err());
    }

    #[test]
    fn decompose_examples() {
        let c = pauli_decompose(&Unitary2::identity());
        assert_eq!(c.as_array(), [ONE, ZERO, ZERO, ZERO]);

        let h = FRAC_1_SQRT_2;
        let hadamard =
            Unitary2::new([[C64::new(h, 0.0), C64::new(h, 0.0)], [C64::new(h, 0.0), C64::new(-h, 0.0)]])
                .unwrap();
        let c = hadamard.coefficients();
        assert!(close(c.c0, ZERO, 1e-15));
        assert!(close(c.cx, C64::new(h, 0.0), 1e-15));
        assert!(close(c.cy, ZERO, 1e-15));
        assert!(close(c.cz, C64::new(h, 0.0), 1e-15));

        let c = su2_exp(PauliVector::Z, PI).unwrap().coefficients();
        assert!(close(c.cz, -I, 1e-15));
    }

    #[test]
    fn pauli_y_coefficient_sign() {
        let c = Unitary2::pauli_y().coefficients();
        assert!(close(c.cy, ONE, 1e-15));
    }

    #[test]
    fn constructor_rejects_non_unitary() {
        let m = [[ONE, ONE], [ZERO, ONE]];
        assert!(Unitary2::new(m).is_err());
    }

    #[test]
    fn fidelity_examples() {
        let minus_i_z = su2_exp(PauliVector::Z, PI).unwrap();
        assert!((gate_fidelity(&minus_i_z, &GateTarget::Z) - 1.0).abs() < 1e-15);
        assert!(gate_fidelity(&Unitary2::identity(), &GateTarget::Z).abs() < 1e-15);
        let half = su2_exp(PauliVector::Z, FRAC_PI_2).unwrap();
        assert!((gate_fidelity(&half, &GateTarget::Z) - 0.5).abs() < 1e-15);
        assert!(
            (gate_fidelity(&half, &GateTarget::Unitary(half)) - 1.0).abs() < 1e-15,
            "a unitary is perfectly faithful to itself"
        );
    }

    #[test]
    fn herm_exp_trivial_cases() {
        let zero = Matrix4c::zeros();
        let u = herm_exp_4(&zero, 3.7).unwrap();
        assert!((u - Matrix4c::identity()).norm() < 1e-14);

        let d = [0.3, -1.2, 2.5, 7.0];
        let h = Matrix4c::from_diagonal(&nalgebra::Vector4::from_iterator(
            d.iter().map(|&x| C64::new(x, 0.0)),
        ));
        let t = 0.83;
        let u = herm_exp_4(&h, t).unwrap();
        for (k, &x) in d.iter().enumerate() {
            assert!((u[(k, k)] - C64::from_polar(1.0, -x * t)).norm() < 1e-13);
        }
    }

    #[test]
    fn herm_exp_rejects_non_hermitian() {
        let mut h = Matrix4c::zeros();
        h[(0, 1)] = ONE;
        assert!(matches!(herm_exp_4(&h, 1.0), Err(Error::Validation(_))));
    }

    /// Independent oracle: Taylor series with scaling and squaring.
    fn taylor_expm(h: &Matrix4c, t: f64) -> Matrix4c {
        let a = h * C64::new(0.0, -t);
        let norm = a.norm();
        let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
        let scaled = a / C64::new(2f64.powi(squarings as i32), 0.0);
        let mut term = Matrix4c::identity();
        let mut sum = Matrix4c::identity();
        for k in 1..=30 {
            term = term * scaled / C64::new(k as f64, 0.0);
            sum += term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    fn hermitian_from(entries: &[f64]) -> Matrix4c {
        let mut h = Matrix4c::zeros();
        let mut k = 0;
        for r in 0..4 {
            h[(r, r)] = C64::new(entries[k], 0.0);
            k += 1;
            for c in (r + 1)..4 {
                let z = C64::new(entries[k], entries[k + 1]);
                k += 2;
                h[(r, c)] = z;
                h[(c, r)] = z.conj();
            }
        }
        h
    }

    proptest! {
        #[test]
        fn herm_exp_matches_series_oracle(
            entries in proptest::collection::vec(-3.0f64..3.0, 16),
            t in -2.0f64..2.0,
        ) {
            let h = hermitian_from(&entries);
            let u = herm_exp_4(&h, t).unwrap();
            let oracle = taylor_expm(&h, t);
            prop_assert!((u - oracle).norm() < 1e-9);
            prop_assert!((u.adjoint() * u - Matrix4c::identity()).norm() < 1e-10);
        }

        #[test]
        fn decomposition_round_trip(
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
            angle in -10.0f64..10.0, gamma in -PI..PI,
        ) {
            let v = PauliVector::new(ax, ay, az);
            prop_assume!(v.norm() > 1e-3);
            let u = su2_exp(v.normalized().unwrap(), angle).unwrap().with_global_phase(gamma);
            let c = pauli_decompose(&u);
            let p: f64 = c.probabilities().iter().sum();
            prop_assert!((p - 1.0).abs() < 1e-12);
            let back = Unitary2::from_pauli(c).unwrap();
            prop_assert!(back.distance(&u) < 1e-12);
        }

        #[test]
        fn same_axis_composition(
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
            a in -7.0f64..7.0, b in -7.0f64..7.0,
        ) {
            let v = PauliVector::new(ax, ay, az);
            prop_assume!(v.norm() > 1e-3);
            let n = v.normalized().unwrap();
            let lhs = su2_exp(n, a).unwrap() * su2_exp(n, b).unwrap();
            let rhs = su2_exp(n, a + b).unwrap();
            prop_assert!(lhs.distance(&rhs) < 1e-12);
        }

        #[test]
        fn fidelity_is_phase_insensitive(
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
            angle in -7.0f64..7.0, gamma in -PI..PI,
        ) {
            let v = PauliVector::new(ax, ay, az);
            prop_assume!(v.norm() > 1e-3);
            let u = su2_exp(v.normalized().unwrap(), angle).unwrap();
            let shifted = u.with_global_phase(gamma);
            let other = GateTarget::Unitary(su2_exp(PauliVector::Y, 0.4).unwrap());
            for target in [GateTarget::I, GateTarget::X, GateTarget::Y, GateTarget::Z, other] {
                prop_assert!((gate_fidelity(&u, &target) - gate_fidelity(&shifted, &target)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn modulation_axis_conventions() {
        // phi = phi_m = pi/2 puts the second-frame z axis on +x.
        let a = PauliVector::modulation_axis(FRAC_PI_2, FRAC_PI_2);
        assert!((a - PauliVector::X).norm() < 1e-15);
        let b = PauliVector::modulation_axis(3.0 * FRAC_PI_2, 3.0 * FRAC_PI_2);
        assert!((b - PauliVector::X).norm() < 1e-15);
        let z = PauliVector::modulation_axis(PI, 0.0);
        assert!((z - PauliVector::Z).norm() < 1e-15);
    }
}
