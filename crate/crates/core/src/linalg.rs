//! Dense complex kernels on the two-qubit Hilbert space.
//!
//! Every object lives in the fixed basis `{|g,g>, |g,e>, |e,g>, |e,e>}` with
//! qubit 1 as the left tensor factor, so index `2*q1 + q2` where `g = 0`,
//! `e = 1`.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const DIM: usize = 4;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Basis index of a computational state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    GG = 0,
    GE = 1,
    EG = 2,
    EE = 3,
}

/// A 2x2 single-qubit operator in the basis `{|g>, |e>}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const fn new(m: [[C64; 2]; 2]) -> Self {
        Mat2(m)
    }

    pub fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    /// `|g><e|`, the lowering operator.
    pub fn sigma_minus() -> Self {
        Mat2([[ZERO, ONE], [ZERO, ZERO]])
    }

    pub fn sigma_plus() -> Self {
        Mat2([[ZERO, ZERO], [ONE, ZERO]])
    }

    /// `|e><e| - |g><g|`.
    pub fn sigma_z() -> Self {
        Mat2([[-ONE, ZERO], [ZERO, ONE]])
    }

    pub fn matmul(&self, other: &Mat2) -> Mat2 {
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[i][0] * other.0[0][j] + self.0[i][1] * other.0[1][j];
            }
        }
        Mat2(out)
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// `i Im(m00) - i Im(m11)`: difference of the anti-Hermitian parts of the
    /// two diagonal entries.
    pub fn diagonal_anti_hermitian_difference(&self) -> C64 {
        C64::new(0.0, self.0[0][0].im - self.0[1][1].im)
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                m = m.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        m
    }
}

/// Kronecker product `a ⊗ b` with `a` acting on qubit 1.
pub fn tensor_product(a: &Mat2, b: &Mat2) -> Operator {
    let mut out = Operator::zero();
    for i1 in 0..2 {
        for j1 in 0..2 {
            for i2 in 0..2 {
                for j2 in 0..2 {
                    out.0[2 * i1 + i2][2 * j1 + j2] = a.0[i1][j1] * b.0[i2][j2];
                }
            }
        }
    }
    out
}

/// Amplitudes of a (possibly unnormalized) two-qubit pure state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub [C64; DIM]);

impl StateVector {
    pub fn zero() -> Self {
        StateVector([ZERO; DIM])
    }

    pub fn basis(b: Basis) -> Self {
        let mut v = Self::zero();
        v.0[b as usize] = ONE;
        v
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn normalized(&self) -> Result<StateVector> {
        let n2 = self.norm_sqr();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::DegenerateState);
        }
        Ok(self.scale(C64::new(1.0 / n2.sqrt(), 0.0)))
    }

    pub fn scale(&self, s: C64) -> StateVector {
        StateVector(self.0.map(|a| a * s))
    }

    /// Squared overlap `|<other|self>|^2 / (<self|self><other|other>)`.
    pub fn fidelity_with(&self, other: &StateVector) -> Result<f64> {
        let n = self.norm_sqr() * other.norm_sqr();
        if !(n > 0.0) {
            return Err(Error::DegenerateState);
        }
        Ok(other.inner(self).norm_sqr() / n)
    }

    /// `|self><self|`, unnormalized.
    pub fn projector(&self) -> Operator {
        let mut out = Operator::zero();
        for i in 0..DIM {
            for j in 0..DIM {
                out.0[i][j] = self.0[i] * self.0[j].conj();
            }
        }
        out
    }

    /// Populations `(n1, n2)` of the normalized state.
    pub fn populations(&self) -> Result<(f64, f64)> {
        let n2 = self.norm_sqr();
        if !(n2 > 0.0) {
            return Err(Error::DegenerateState);
        }
        let p = self.0.map(|a| a.norm_sqr() / n2);
        Ok((p[2] + p[3], p[1] + p[3]))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

impl Add for StateVector {
    type Output = StateVector;
    fn add(self, rhs: StateVector) -> StateVector {
        let mut out = self;
        for (a, b) in out.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
        out
    }
}

impl Sub for StateVector {
    type Output = StateVector;
    fn sub(self, rhs: StateVector) -> StateVector {
        let mut out = self;
        for (a, b) in out.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
        out
    }
}

/// `(|Ψ+>, |Ψ->) = ((|e,g> + |g,e>)/√2, (|e,g> - |g,e>)/√2)`.
pub fn bell_states() -> (StateVector, StateVector) {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut plus = StateVector::zero();
    let mut minus = StateVector::zero();
    plus.0[Basis::EG as usize] = s;
    plus.0[Basis::GE as usize] = s;
    minus.0[Basis::EG as usize] = s;
    minus.0[Basis::GE as usize] = -s;
    (plus, minus)
}

/// A dense 4x4 complex matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Operator(pub [[C64; DIM]; DIM]);

impl Operator {
    pub fn zero() -> Self {
        Operator([[ZERO; DIM]; DIM])
    }

    pub fn identity() -> Self {
        let mut out = Self::zero();
        for i in 0..DIM {
            out.0[i][i] = ONE;
        }
        out
    }

    pub fn diagonal(d: [C64; DIM]) -> Self {
        let mut out = Self::zero();
        for i in 0..DIM {
            out.0[i][i] = d[i];
        }
        out
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        let mut out = [ZERO; DIM];
        for (o, row) in out.iter_mut().zip(self.0.iter()) {
            *o = row[0] * psi.0[0] + row[1] * psi.0[1] + row[2] * psi.0[2] + row[3] * psi.0[3];
        }
        StateVector(out)
    }

    pub fn adjoint(&self) -> Operator {
        let mut out = Self::zero();
        for i in 0..DIM {
            for j in 0..DIM {
                out.0[i][j] = self.0[j][i].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &Operator) -> Operator {
        let mut out = Self::zero();
        for i in 0..DIM {
            for k in 0..DIM {
                let a = self.0[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..DIM {
                    out.0[i][j] += a * other.0[k][j];
                }
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Operator {
        Operator(self.0.map(|row| row.map(|a| a * s)))
    }

    pub fn scale_re(&self, s: f64) -> Operator {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..DIM).map(|i| self.0[i][i]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flat_map(|r| r.iter()).fold(0.0, |m, a| m.max(a.norm()))
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        (*self - *other).max_abs()
    }

    /// Largest `|M - M^†|` entry.
    pub fn hermiticity_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn ensure_hermitian(&self, tol: f64) -> Result<()> {
        let deviation = self.hermiticity_deviation();
        if deviation > tol {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(())
    }

    /// Maximum absolute row sum, an upper bound on the spectral radius.
    pub fn inf_norm(&self) -> f64 {
        self.0
            .iter()
            .map(|r| r.iter().map(|a| a.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `(M - M^†) / 2`.
    pub fn anti_hermitian_part(&self) -> Operator {
        (*self - self.adjoint()).scale_re(0.5)
    }

    /// `(M + M^†) / 2`.
    pub fn hermitian_part(&self) -> Operator {
        (*self + self.adjoint()).scale_re(0.5)
    }

    /// Restriction to `span{|e,g>, |g,e>}`, ordered `(|e,g>, |g,e>)`.
    pub fn one_excitation_block(&self) -> Mat2 {
        let eg = Basis::EG as usize;
        let ge = Basis::GE as usize;
        Mat2([[self.0[eg][eg], self.0[eg][ge]], [self.0[ge][eg], self.0[ge][ge]]])
    }

    pub fn is_finite(&self) -> bool {
        self.0
            .iter()
            .flat_map(|r| r.iter())
            .all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

impl Index<(usize, usize)> for Operator {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Operator {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.0[i][j]
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        let mut out = self;
        for i in 0..DIM {
            for j in 0..DIM {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        let mut out = self;
        for i in 0..DIM {
            for j in 0..DIM {
                out.0[i][j] -= rhs.0[i][j];
            }
        }
        out
    }
}

impl Neg for Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale_re(-1.0)
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        self.matmul(&rhs)
    }
}

/// `<ψ|op|ψ> / <ψ|ψ>`.
pub fn expectation(op: &Operator, psi: &StateVector) -> Result<C64> {
    let n2 = psi.norm_sqr();
    if !(n2 > 0.0) {
        return Err(Error::DegenerateState);
    }
    Ok(psi.inner(&op.apply(psi)) / n2)
}

/// Single-qubit operator embedded on qubit `which` (1 or 2).
pub fn on_qubit(which: u8, op: &Mat2) -> Operator {
    match which {
        1 => tensor_product(op, &Mat2::identity()),
        2 => tensor_product(&Mat2::identity(), op),
        _ => panic!("qubit index must be 1 or 2, got {which}"),
    }
}

/// Number operator `σ+σ-` of qubit `which`.
pub fn number_op(which: u8) -> Operator {
    on_qubit(which, &Mat2::sigma_plus().matmul(&Mat2::sigma_minus()))
}

/// A two-qubit density matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    /// Wraps a matrix after checking Hermiticity; trace is not renormalized.
    pub fn new(m: Operator, hermitian_tol: f64) -> Result<Self> {
        m.ensure_hermitian(hermitian_tol)?;
        if m.trace().norm() == 0.0 {
            return Err(Error::ZeroTrace);
        }
        Ok(DensityMatrix(m))
    }

    pub(crate) fn from_raw(m: Operator) -> Self {
        DensityMatrix(m)
    }

    pub fn pure(psi: &StateVector) -> Result<Self> {
        let n = psi.normalized()?;
        Ok(DensityMatrix(n.projector()))
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(Operator::identity().scale_re(1.0 / DIM as f64))
    }

    pub fn as_operator(&self) -> &Operator {
        &self.0
    }

    pub fn into_operator(self) -> Operator {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re / (self.trace() * self.trace())
    }

    pub fn population(&self, b: Basis) -> f64 {
        self.0 .0[b as usize][b as usize].re
    }

    /// `(n1, n2)` normalized by the trace.
    pub fn populations(&self) -> (f64, f64) {
        let tr = self.trace();
        let d = |b: Basis| self.population(b) / tr;
        (d(Basis::EG) + d(Basis::EE), d(Basis::GE) + d(Basis::EE))
    }

    /// Smallest eigenvalue of the Hermitian part, via a cyclic Jacobi sweep.
    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.0.hermitian_part())
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

/// `Tr[op ρ] / Tr[ρ]`.
pub fn dm_expectation(op: &Operator, rho: &DensityMatrix) -> Result<C64> {
    let tr = rho.0.trace();
    if tr.norm() == 0.0 {
        return Err(Error::ZeroTrace);
    }
    Ok((*op * rho.0).trace() / tr)
}

/// Eigenvalues of a Hermitian 4x4 matrix.
///
/// The matrix is embedded as the real symmetric 8x8 block `[[Re, -Im], [Im, Re]]`,
/// whose spectrum is that of `m` with every eigenvalue doubled, and diagonalized
/// with cyclic Jacobi rotations.
pub fn hermitian_eigenvalues(m: &Operator) -> [f64; DIM] {
    const N: usize = 2 * DIM;
    let mut a = [[0.0f64; N]; N];
    for i in 0..DIM {
        for j in 0..DIM {
            let z = m.0[i][j];
            a[i][j] = z.re;
            a[i + DIM][j + DIM] = z.re;
            a[i][j + DIM] = -z.im;
            a[i + DIM][j] = z.im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..N)
            .flat_map(|i| (0..N).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-32 {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut diag: Vec<f64> = (0..N).map(|i| a[i][i]).collect();
    diag.sort_by(|x, y| x.total_cmp(y));
    [diag[0], diag[2], diag[4], diag[6]]
}
