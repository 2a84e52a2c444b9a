//! Dense complex linear algebra for n-qubit polarization states.
//!
//! Conventions, fixed once for the whole crate:
//! - qubit 0 is the most significant bit of a computational-basis index,
//!   so an n-qubit basis index reads as the bitstring of qubits 0..n-1;
//! - |H⟩ = |0⟩, |V⟩ = |1⟩, |±⟩ = (|0⟩ ± |1⟩)/√2;
//! - |R⟩ = (|0⟩ + i|1⟩)/√2 and |L⟩ = (|0⟩ − i|1⟩)/√2 are the Y eigenstates.
//!
//! All values are immutable after construction and every operation is a
//! pure function, so everything here is safe to share across threads.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on the register size; every state of interest here has n ≤ 4,
/// and dense storage past 10 qubits stops being sensible.
pub const MAX_QUBITS: usize = 10;

/// Norm tolerance for state vectors.
pub const NORM_TOL: f64 = 1e-12;
/// Hermiticity / trace tolerance for density matrices and observables.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted as "positive semidefinite" — absorbs
/// floating-point noise from reconstruction.
pub const PSD_TOL: f64 = -1e-8;
/// Probabilities below this are treated as an incompatible projection.
pub const PROB_FLOOR: f64 = 1e-14;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn check_qubit_count(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::QubitCountOutOfRange {
            requested: n,
            min: 1,
            max: MAX_QUBITS,
        });
    }
    Ok(())
}

/// Bit of `qubit` in basis index `index` for an `n`-qubit register
/// (qubit 0 = most significant).
#[inline]
pub fn bit_of(index: usize, qubit: usize, n_qubits: usize) -> usize {
    (index >> (n_qubits - 1 - qubit)) & 1
}

// ---------------------------------------------------------------------------
// StateVector
// ---------------------------------------------------------------------------

/// Pure n-qubit state: a normalized complex amplitude vector of length 2^n.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: DVector<Complex64>,
}

impl StateVector {
    /// Builds a state from raw amplitudes, normalizing them.
    /// Errors if the length is not 2^n or the norm is (near-)zero.
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if amps.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: amps.len(),
            });
        }
        let v = DVector::from_vec(amps);
        let norm = v.norm();
        if norm < 1e-14 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            n_qubits,
            amps: v / Complex64::new(norm, 0.0),
        })
    }

    /// Computational basis state |index⟩.
    pub fn basis_state(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: index,
            });
        }
        let mut amps = DVector::from_element(dim, ZERO);
        amps[index] = ONE;
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    /// Rescales to unit norm.
    pub fn normalized(mut self) -> Self {
        let n = self.amps.norm();
        if n > 0.0 {
            self.amps /= Complex64::new(n, 0.0);
        }
        self
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self.amps.dotc(&other.amps))
    }

    /// |self⟩ ⊗ |other⟩ (self's qubits are the more significant ones).
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        check_qubit_count(self.n_qubits + other.n_qubits)?;
        Ok(Self {
            n_qubits: self.n_qubits + other.n_qubits,
            amps: self.amps.kronecker(&other.amps),
        })
    }

    /// ρ = |ψ⟩⟨ψ|.
    pub fn to_density_matrix(&self) -> DensityMatrix {
        let mat = &self.amps * self.amps.adjoint();
        DensityMatrix {
            n_qubits: self.n_qubits,
            mat,
        }
    }

    /// Applies a single-qubit operator to one qubit of the register.
    pub fn apply_single_qubit(&self, op: &Operator, qubit: usize) -> Result<Self> {
        if op.n_qubits() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: op.dim(),
            });
        }
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                qubit,
                n_qubits: self.n_qubits,
            });
        }
        let m = op.matrix();
        let mask = 1usize << (self.n_qubits - 1 - qubit);
        let mut amps = self.amps.clone();
        for i in 0..self.dim() {
            if i & mask == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | mask];
                amps[i] = m[(0, 0)] * a0 + m[(0, 1)] * a1;
                amps[i | mask] = m[(1, 0)] * a0 + m[(1, 1)] * a1;
            }
        }
        Ok(Self {
            n_qubits: self.n_qubits,
            amps,
        })
    }

    /// Haar-ish random pure state (normalized complex Gaussian vector).
    pub fn random<R: Rng>(n_qubits: usize, rng: &mut R) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        let amps: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(gaussian(rng), gaussian(rng)))
            .collect();
        Self::from_amplitudes(n_qubits, amps)
    }
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; good enough for Ginibre sampling.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Tensor product of a list of states, in order (first factor most significant).
pub fn tensor_states(factors: &[&StateVector]) -> Result<StateVector> {
    let (first, rest) = factors.split_first().ok_or(Error::MalformedInput {
        context: "tensor of an empty factor list".into(),
    })?;
    let mut acc = (*first).clone();
    for f in rest {
        acc = acc.tensor(f)?;
    }
    Ok(acc)
}

/// Tensor product of a list of operators, in order.
pub fn tensor_operators(factors: &[&Operator]) -> Result<Operator> {
    let (first, rest) = factors.split_first().ok_or(Error::MalformedInput {
        context: "tensor of an empty factor list".into(),
    })?;
    let mut acc = (*first).clone();
    for f in rest {
        acc = acc.tensor(f)?;
    }
    Ok(acc)
}

/// |GHZ_n⟩ = (|0…0⟩ + |1…1⟩)/√2, n ≥ 2.
pub fn ghz_state(n_qubits: usize) -> Result<StateVector> {
    ghz_state_with_phase(n_qubits, 0.0)
}

/// GHZ state with a tunable relative phase between the two branches:
/// (|0…0⟩ + e^{iφ}|1…1⟩)/√2.
pub fn ghz_state_with_phase(n_qubits: usize, phase: f64) -> Result<StateVector> {
    if n_qubits < 2 {
        return Err(Error::QubitCountOutOfRange {
            requested: n_qubits,
            min: 2,
            max: MAX_QUBITS,
        });
    }
    check_qubit_count(n_qubits)?;
    let dim = 1usize << n_qubits;
    let mut amps = vec![ZERO; dim];
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    amps[0] = Complex64::new(inv_sqrt2, 0.0);
    amps[dim - 1] = Complex64::from_polar(inv_sqrt2, phase);
    StateVector::from_amplitudes(n_qubits, amps)
}

/// The four two-qubit Bell states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BellKind {
    /// (|00⟩ + |11⟩)/√2
    PhiPlus,
    /// (|00⟩ − |11⟩)/√2
    PhiMinus,
    /// (|01⟩ + |10⟩)/√2
    PsiPlus,
    /// (|01⟩ − |10⟩)/√2
    PsiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PhiPlus,
        BellKind::PhiMinus,
        BellKind::PsiPlus,
        BellKind::PsiMinus,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BellKind::PhiPlus => "phi+",
            BellKind::PhiMinus => "phi-",
            BellKind::PsiPlus => "psi+",
            BellKind::PsiMinus => "psi-",
        }
    }
}

impl std::str::FromStr for BellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi+" | "phi_plus" => Ok(BellKind::PhiPlus),
            "phi-" | "phi_minus" => Ok(BellKind::PhiMinus),
            "psi+" | "psi_plus" => Ok(BellKind::PsiPlus),
            "psi-" | "psi_minus" => Ok(BellKind::PsiMinus),
            other => Err(Error::MalformedInput {
                context: format!("unknown Bell state '{other}'"),
            }),
        }
    }
}

pub fn bell_state(kind: BellKind) -> StateVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (i0, i1, sign) = match kind {
        BellKind::PhiPlus => (0, 3, 1.0),
        BellKind::PhiMinus => (0, 3, -1.0),
        BellKind::PsiPlus => (1, 2, 1.0),
        BellKind::PsiMinus => (1, 2, -1.0),
    };
    let mut amps = vec![ZERO; 4];
    amps[i0] = Complex64::new(s, 0.0);
    amps[i1] = Complex64::new(sign * s, 0.0);
    StateVector::from_amplitudes(2, amps).expect("valid by construction")
}

// ---------------------------------------------------------------------------
// Operator
// ---------------------------------------------------------------------------

/// General (not necessarily positive) operator on n qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    n_qubits: usize,
    mat: DMatrix<Complex64>,
}

impl Operator {
    pub fn from_matrix(n_qubits: usize, mat: DMatrix<Complex64>) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: mat.nrows().max(mat.ncols()),
            });
        }
        Ok(Self { n_qubits, mat })
    }

    pub fn identity(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self {
            n_qubits,
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self {
            n_qubits,
            mat: DMatrix::from_element(dim, dim, ZERO),
        }
    }

    pub fn pauli_x() -> Self {
        Self {
            n_qubits: 1,
            mat: DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        }
    }

    pub fn pauli_y() -> Self {
        let i = Complex64::new(0.0, 1.0);
        Self {
            n_qubits: 1,
            mat: DMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
        }
    }

    pub fn pauli_z() -> Self {
        Self {
            n_qubits: 1,
            mat: DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn adjoint(&self) -> Self {
        Self {
            n_qubits: self.n_qubits,
            mat: self.mat.adjoint(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            n_qubits: self.n_qubits,
            mat: &self.mat * c,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self {
            n_qubits: self.n_qubits,
            mat: &self.mat + &other.mat,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-ONE))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self {
            n_qubits: self.n_qubits,
            mat: &self.mat * &other.mat,
        })
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        check_qubit_count(self.n_qubits + other.n_qubits)?;
        Ok(Self {
            n_qubits: self.n_qubits + other.n_qubits,
            mat: self.mat.kronecker(&other.mat),
        })
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if self.dim() != state.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: state.dim(),
            });
        }
        Ok(StateVector {
            n_qubits: state.n_qubits,
            amps: &self.mat * &state.amps,
        })
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    /// Largest entrywise deviation from the adjoint.
    pub fn hermitian_deviation(&self) -> f64 {
        let adj = self.mat.adjoint();
        (&self.mat - adj)
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// Largest entrywise |P² − P|.
    pub fn projector_deviation(&self) -> f64 {
        let sq = &self.mat * &self.mat;
        (sq - &self.mat)
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Embeds an operator acting on `qubits` (in the order given) into an
    /// `n_total`-qubit identity elsewhere.
    pub fn embed(&self, qubits: &[usize], n_total: usize) -> Result<Operator> {
        check_qubit_count(n_total)?;
        if qubits.len() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                got: qubits.len(),
            });
        }
        for (i, &q) in qubits.iter().enumerate() {
            if q >= n_total {
                return Err(Error::QubitOutOfRange {
                    qubit: q,
                    n_qubits: n_total,
                });
            }
            if qubits[..i].contains(&q) {
                return Err(Error::DuplicateQubit { qubit: q });
            }
        }
        let dim = 1usize << n_total;
        let sub_dim = self.dim();
        let rest: Vec<usize> = (0..n_total).filter(|q| !qubits.contains(q)).collect();
        let mut mat = DMatrix::from_element(dim, dim, ZERO);
        // compose a full index from a subspace index and a rest index
        let compose = |sub: usize, rst: usize| -> usize {
            let mut idx = 0usize;
            for (j, &q) in qubits.iter().enumerate() {
                idx |= bit_of(sub, j, qubits.len()) << (n_total - 1 - q);
            }
            for (j, &q) in rest.iter().enumerate() {
                idx |= bit_of(rst, j, rest.len().max(1)) << (n_total - 1 - q);
            }
            idx
        };
        for r in 0..(1usize << rest.len()) {
            for si in 0..sub_dim {
                let i = compose(si, r);
                for sj in 0..sub_dim {
                    mat[(i, compose(sj, r))] = self.mat[(si, sj)];
                }
            }
        }
        Ok(Operator {
            n_qubits: n_total,
            mat,
        })
    }
}

// ---------------------------------------------------------------------------
// DensityMatrix
// ---------------------------------------------------------------------------

/// Mixed n-qubit state: Hermitian, unit-trace, positive-semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validating constructor: Hermitian within 1e-10, trace 1 within 1e-10,
    /// minimum eigenvalue ≥ −1e-8.
    pub fn from_matrix(n_qubits: usize, mat: DMatrix<Complex64>) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: mat.nrows().max(mat.ncols()),
            });
        }
        let herm_dev = {
            let adj = mat.adjoint();
            (&mat - adj).iter().map(|c| c.norm()).fold(0.0, f64::max)
        };
        if herm_dev > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix {
                reason: format!("not Hermitian (deviation {herm_dev:.3e})"),
            });
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > HERMITIAN_TOL || tr.im.abs() > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix {
                reason: format!("trace {tr} != 1"),
            });
        }
        let dm = Self { n_qubits, mat };
        let min_eig = dm.min_eigenvalue();
        if min_eig < PSD_TOL {
            return Err(Error::InvalidDensityMatrix {
                reason: format!("minimum eigenvalue {min_eig:.3e} below {PSD_TOL:.0e}"),
            });
        }
        Ok(dm)
    }

    /// Constructor for matrices that are valid by construction
    /// (convex mixtures, conjugations by operators, ...). The public
    /// invariants are still covered by tests on every operation output.
    pub(crate) fn from_matrix_unchecked(n_qubits: usize, mat: DMatrix<Complex64>) -> Self {
        Self { n_qubits, mat }
    }

    pub fn from_pure(state: &StateVector) -> Self {
        state.to_density_matrix()
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self {
            n_qubits,
            mat: DMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0),
        }
    }

    /// Ginibre-ensemble random full-rank state, for property tests and
    /// reference checks.
    pub fn random<R: Rng>(n_qubits: usize, rng: &mut R) -> Self {
        let dim = 1usize << n_qubits;
        let g = DMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(gaussian(rng), gaussian(rng))
        });
        let mut m = &g * g.adjoint();
        let tr = m.trace().re;
        m /= Complex64::new(tr, 0.0);
        Self { n_qubits, mat: m }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.mat[(i, j)]
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Real eigenvalues of the (Hermitian) matrix.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.mat
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect()
    }

    /// F = ⟨target|ρ|target⟩ ∈ [0, 1].
    pub fn fidelity(&self, target: &StateVector) -> Result<f64> {
        if self.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: target.dim(),
            });
        }
        let w = &self.mat * target.amplitudes();
        let f = target.amplitudes().dotc(&w);
        debug_assert!(f.im.abs() < 1e-9, "fidelity should be real, got {f}");
        Ok(f.re.clamp(0.0, 1.0))
    }

    /// tr(Oρ) for a Hermitian observable O.
    pub fn expectation(&self, obs: &Operator) -> Result<f64> {
        if self.dim() != obs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: obs.dim(),
            });
        }
        let dev = obs.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        // tr(Oρ) = Σ_ij O_ij ρ_ji
        let mut acc = ZERO;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += obs.matrix()[(i, j)] * self.mat[(j, i)];
            }
        }
        debug_assert!(acc.im.abs() < 1e-9);
        Ok(acc.re)
    }

    fn validated_projection(
        &self,
        proj: &Operator,
        qubits: &[usize],
    ) -> Result<(DMatrix<Complex64>, f64)> {
        if proj.n_qubits() != qubits.len() {
            return Err(Error::DimensionMismatch {
                expected: qubits.len(),
                got: proj.n_qubits(),
            });
        }
        let dev = proj.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let pdev = proj.projector_deviation();
        if pdev > HERMITIAN_TOL {
            return Err(Error::NotAProjector { deviation: pdev });
        }
        let embedded = proj.embed(qubits, self.n_qubits)?;
        let sigma = embedded.matrix() * &self.mat * embedded.matrix().adjoint();
        let prob = sigma.trace().re;
        if prob < PROB_FLOOR {
            return Err(Error::IncompatibleProjection { probability: prob });
        }
        Ok((sigma / Complex64::new(prob, 0.0), prob))
    }

    /// Projects onto `proj` acting on `qubits` and renormalizes, keeping the
    /// full register: (ΠρΠ/p, p) with p = tr(ΠρΠ).
    pub fn project(&self, proj: &Operator, qubits: &[usize]) -> Result<(DensityMatrix, f64)> {
        let (mat, prob) = self.validated_projection(proj, qubits)?;
        Ok((
            DensityMatrix::from_matrix_unchecked(self.n_qubits, mat),
            prob,
        ))
    }

    /// Same as [`project`](Self::project) but traces out the measured qubits,
    /// returning the conditional state of the remaining register.
    pub fn project_traced(
        &self,
        proj: &Operator,
        qubits: &[usize],
    ) -> Result<(DensityMatrix, f64)> {
        let (mat, prob) = self.validated_projection(proj, qubits)?;
        let full = DensityMatrix::from_matrix_unchecked(self.n_qubits, mat);
        Ok((full.partial_trace(qubits)?, prob))
    }

    /// Traces out the listed qubits; remaining qubits keep their relative order.
    pub fn partial_trace(&self, traced: &[usize]) -> Result<DensityMatrix> {
        for (i, &q) in traced.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(Error::QubitOutOfRange {
                    qubit: q,
                    n_qubits: self.n_qubits,
                });
            }
            if traced[..i].contains(&q) {
                return Err(Error::DuplicateQubit { qubit: q });
            }
        }
        let kept: Vec<usize> = (0..self.n_qubits).filter(|q| !traced.contains(q)).collect();
        if kept.is_empty() {
            return Err(Error::MalformedInput {
                context: "cannot trace out every qubit".into(),
            });
        }
        let n_keep = kept.len();
        let keep_dim = 1usize << n_keep;
        let trace_dim = 1usize << traced.len();
        let compose = |k: usize, t: usize| -> usize {
            let mut idx = 0usize;
            for (j, &q) in kept.iter().enumerate() {
                idx |= bit_of(k, j, n_keep) << (self.n_qubits - 1 - q);
            }
            for (j, &q) in traced.iter().enumerate() {
                idx |= bit_of(t, j, traced.len()) << (self.n_qubits - 1 - q);
            }
            idx
        };
        let mut out = DMatrix::from_element(keep_dim, keep_dim, ZERO);
        for ik in 0..keep_dim {
            for jk in 0..keep_dim {
                let mut acc = ZERO;
                for t in 0..trace_dim {
                    acc += self.mat[(compose(ik, t), compose(jk, t))];
                }
                out[(ik, jk)] = acc;
            }
        }
        Ok(DensityMatrix::from_matrix_unchecked(n_keep, out))
    }
}

// ---------------------------------------------------------------------------
// Measurement projectors
// ---------------------------------------------------------------------------

/// Single-qubit measurement axis: one of the Pauli bases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    pub fn as_char(self) -> char {
        match self {
            PauliAxis::X => 'X',
            PauliAxis::Y => 'Y',
            PauliAxis::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c {
            'X' => Ok(PauliAxis::X),
            'Y' => Ok(PauliAxis::Y),
            'Z' => Ok(PauliAxis::Z),
            other => Err(Error::MalformedInput {
                context: format!("unknown basis tag '{other}'"),
            }),
        }
    }

    /// The two eigenvectors, first (+1) then (−1) eigenstate:
    /// X → |±⟩, Y → |R⟩,|L⟩, Z → |H⟩,|V⟩.
    pub fn eigenvector(self, sign: EigenSign) -> StateVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let amps = match (self, sign) {
            (PauliAxis::X, EigenSign::Plus) => vec![Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
            (PauliAxis::X, EigenSign::Minus) => {
                vec![Complex64::new(s, 0.0), Complex64::new(-s, 0.0)]
            }
            (PauliAxis::Y, EigenSign::Plus) => vec![Complex64::new(s, 0.0), Complex64::new(0.0, s)],
            (PauliAxis::Y, EigenSign::Minus) => {
                vec![Complex64::new(s, 0.0), Complex64::new(0.0, -s)]
            }
            (PauliAxis::Z, EigenSign::Plus) => vec![ONE, ZERO],
            (PauliAxis::Z, EigenSign::Minus) => vec![ZERO, ONE],
        };
        StateVector::from_amplitudes(1, amps).expect("valid by construction")
    }
}

/// Eigenvalue sign of a Pauli measurement outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EigenSign {
    Plus,
    Minus,
}

impl EigenSign {
    pub fn flipped(self) -> Self {
        match self {
            EigenSign::Plus => EigenSign::Minus,
            EigenSign::Minus => EigenSign::Plus,
        }
    }
}

/// Rank-1 single-qubit projector: either |θ⟩⟨θ| with
/// |θ⟩ = cos θ|0⟩ + sin θ|1⟩ in the X–Z plane, or a Pauli eigenprojector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeasurementProjector {
    XzAngle(f64),
    PauliEigen(PauliAxis, EigenSign),
}

impl MeasurementProjector {
    /// Defining unit vector of the rank-1 projector.
    pub fn vector(&self) -> StateVector {
        match *self {
            MeasurementProjector::XzAngle(theta) => StateVector::from_amplitudes(
                1,
                vec![
                    Complex64::new(theta.cos(), 0.0),
                    Complex64::new(theta.sin(), 0.0),
                ],
            )
            .expect("valid by construction"),
            MeasurementProjector::PauliEigen(axis, sign) => axis.eigenvector(sign),
        }
    }

    /// The 2×2 projector |v⟩⟨v|.
    pub fn operator(&self) -> Operator {
        let v = self.vector();
        let mat = v.amplitudes() * v.amplitudes().adjoint();
        Operator { n_qubits: 1, mat }
    }

    /// Projector onto the orthogonal direction; the two sum to the identity.
    pub fn orthocomplement(&self) -> Self {
        match *self {
            MeasurementProjector::XzAngle(theta) => {
                MeasurementProjector::XzAngle(theta + std::f64::consts::FRAC_PI_2)
            }
            MeasurementProjector::PauliEigen(axis, sign) => {
                MeasurementProjector::PauliEigen(axis, sign.flipped())
            }
        }
    }
}

/// Projector onto cos θ|0⟩ + sin θ|1⟩; π-periodic in θ.
pub fn projector_xz(theta: f64) -> MeasurementProjector {
    MeasurementProjector::XzAngle(theta)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct StateVectorJson {
    n_qubits: usize,
    amps_re: Vec<f64>,
    amps_im: Vec<f64>,
}

impl Serialize for StateVector {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        StateVectorJson {
            n_qubits: self.n_qubits,
            amps_re: self.amps.iter().map(|c| c.re).collect(),
            amps_im: self.amps.iter().map(|c| c.im).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let raw = StateVectorJson::deserialize(deserializer)?;
        if raw.amps_re.len() != raw.amps_im.len() {
            return Err(serde::de::Error::custom("amps_re/amps_im length mismatch"));
        }
        let amps = raw
            .amps_re
            .iter()
            .zip(&raw.amps_im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        StateVector::from_amplitudes(raw.n_qubits, amps).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct DensityMatrixJson {
    n_qubits: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let dim = self.dim();
        let row = |i: usize, f: fn(&Complex64) -> f64| -> Vec<f64> {
            (0..dim).map(|j| f(&self.mat[(i, j)])).collect()
        };
        DensityMatrixJson {
            n_qubits: self.n_qubits,
            re: (0..dim).map(|i| row(i, |c| c.re)).collect(),
            im: (0..dim).map(|i| row(i, |c| c.im)).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let raw = DensityMatrixJson::deserialize(deserializer)?;
        let dim = 1usize << raw.n_qubits;
        if raw.re.len() != dim || raw.im.len() != dim {
            return Err(serde::de::Error::custom("matrix row count != 2^n_qubits"));
        }
        let mut mat = DMatrix::from_element(dim, dim, ZERO);
        for i in 0..dim {
            if raw.re[i].len() != dim || raw.im[i].len() != dim {
                return Err(serde::de::Error::custom(
                    "matrix column count != 2^n_qubits",
                ));
            }
            for j in 0..dim {
                mat[(i, j)] = Complex64::new(raw.re[i][j], raw.im[i][j]);
            }
        }
        DensityMatrix::from_matrix(raw.n_qubits, mat).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn basis_tensor_products() {
        let zero = StateVector::basis_state(1, 0).unwrap();
        let t = zero.tensor(&zero).unwrap();
        assert_eq!(t.dim(), 4);
        assert_abs_diff_eq!(t.amplitude(0).re, 1.0, epsilon = 1e-15);
        for i in 1..4 {
            assert_eq!(t.amplitude(i), Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn sigma_x_tensor_flips_bits() {
        let xx = Operator::pauli_x().tensor(&Operator::pauli_x()).unwrap();
        let s00 = StateVector::basis_state(2, 0).unwrap();
        let s11 = xx.apply(&s00).unwrap();
        assert_abs_diff_eq!(s11.amplitude(3).re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s11.amplitude(0).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn two_epr_pairs_tensor_expansion() {
        // (|00⟩+|11⟩)/√2 ⊗ (|00⟩+|11⟩)/√2 has amplitude 1/2 on 0, 3, 12, 15
        let epr = bell_state(BellKind::PhiPlus);
        let four = epr.tensor(&epr).unwrap();
        for i in 0..16 {
            let expected = if [0, 3, 12, 15].contains(&i) {
                0.5
            } else {
                0.0
            };
            assert_abs_diff_eq!(four.amplitude(i).re, expected, epsilon = 1e-14);
            assert_abs_diff_eq!(four.amplitude(i).im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn ghz_amplitudes() {
        let g2 = ghz_state(2).unwrap();
        let phi_plus = bell_state(BellKind::PhiPlus);
        assert_abs_diff_eq!(g2.inner(&phi_plus).unwrap().re, 1.0, epsilon = 1e-14);

        let g4 = ghz_state(4).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(g4.amplitude(0).re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(g4.amplitude(15).re, s, epsilon = 1e-15);
        for i in 1..15 {
            assert_eq!(g4.amplitude(i), Complex64::new(0.0, 0.0));
        }
        // self-fidelity
        let rho = g4.to_density_matrix();
        assert_abs_diff_eq!(rho.fidelity(&g4).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn ghz_rejects_single_qubit() {
        assert!(ghz_state(1).is_err());
        assert!(ghz_state(0).is_err());
        assert!(ghz_state(MAX_QUBITS + 1).is_err());
    }

    #[test]
    fn bell_kind_parsing() {
        assert_eq!("psi-".parse::<BellKind>().unwrap(), BellKind::PsiMinus);
        assert_eq!("phi+".parse::<BellKind>().unwrap(), BellKind::PhiPlus);
        assert!("xyz".parse::<BellKind>().is_err());
    }

    #[test]
    fn bell_states() {
        let psi_minus = bell_state(BellKind::PsiMinus);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(psi_minus.amplitude(1).re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(psi_minus.amplitude(2).re, -s, epsilon = 1e-15);

        let phi_plus = bell_state(BellKind::PhiPlus);
        let phi_minus = bell_state(BellKind::PhiMinus);
        assert_abs_diff_eq!(
            phi_plus.inner(&phi_minus).unwrap().norm(),
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn fidelity_values() {
        let g4 = ghz_state(4).unwrap();
        let pure = g4.to_density_matrix();
        assert_abs_diff_eq!(pure.fidelity(&g4).unwrap(), 1.0, epsilon = 1e-12);

        let mixed = DensityMatrix::maximally_mixed(4);
        assert_abs_diff_eq!(mixed.fidelity(&g4).unwrap(), 1.0 / 16.0, epsilon = 1e-12);

        // 0.95 |G⟩⟨G| + 0.05 I/16 → 0.95 + 0.05/16
        let mat = pure.matrix() * c(0.95) + mixed.matrix() * c(0.05);
        let mix = DensityMatrix::from_matrix(4, mat).unwrap();
        assert_abs_diff_eq!(mix.fidelity(&g4).unwrap(), 0.953125, epsilon = 1e-12);

        let g2 = ghz_state(2).unwrap();
        assert!(pure.fidelity(&g2).is_err());
    }

    #[test]
    fn projection_on_ghz() {
        let g4 = ghz_state(4).unwrap();
        let rho = g4.to_density_matrix();
        let hh = StateVector::basis_state(2, 0).unwrap().to_density_matrix();
        let proj = Operator::from_matrix(2, hh.matrix().clone()).unwrap();
        let (cond, prob) = rho.project_traced(&proj, &[0, 1]).unwrap();
        assert_abs_diff_eq!(prob, 0.5, epsilon = 1e-12);
        assert_eq!(cond.n_qubits(), 2);
        assert_abs_diff_eq!(cond.entry(0, 0).re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_projection_errors() {
        let phi_plus = bell_state(BellKind::PhiPlus).to_density_matrix();
        let p01 = StateVector::basis_state(2, 1).unwrap().to_density_matrix();
        let proj = Operator::from_matrix(2, p01.matrix().clone()).unwrap();
        match phi_plus.project(&proj, &[0, 1]) {
            Err(Error::IncompatibleProjection { probability }) => {
                assert!(probability.abs() < 1e-14)
            }
            other => panic!("expected incompatible projection, got {other:?}"),
        }
    }

    #[test]
    fn bell_projection_of_input_state() {
        // projecting qubits 1,2 (0-based) of the two-pair input onto |φ+⟩
        // leaves |φ+⟩ on the outer qubits with probability 1/4
        let epr = bell_state(BellKind::PhiPlus);
        let input = epr.tensor(&epr).unwrap().to_density_matrix();
        let phi = bell_state(BellKind::PhiPlus);
        let proj = Operator::from_matrix(2, phi.to_density_matrix().matrix().clone()).unwrap();
        let (cond, prob) = input.project_traced(&proj, &[1, 2]).unwrap();
        assert_abs_diff_eq!(prob, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(cond.fidelity(&phi).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn expectation_values() {
        let zero = StateVector::basis_state(1, 0).unwrap().to_density_matrix();
        assert_abs_diff_eq!(
            zero.expectation(&Operator::pauli_z()).unwrap(),
            1.0,
            epsilon = 1e-12
        );

        let phi = bell_state(BellKind::PhiPlus).to_density_matrix();
        let xx = Operator::pauli_x().tensor(&Operator::pauli_x()).unwrap();
        assert_abs_diff_eq!(phi.expectation(&xx).unwrap(), 1.0, epsilon = 1e-12);

        // non-Hermitian observable is rejected
        let mut m = DMatrix::from_element(2, 2, Complex64::new(0.0, 0.0));
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        let bad = Operator::from_matrix(1, m).unwrap();
        assert!(matches!(
            zero.expectation(&bad),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn projector_xz_basics() {
        let p0 = projector_xz(0.0).operator();
        assert_abs_diff_eq!(p0.matrix()[(0, 0)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p0.matrix()[(1, 1)].re, 0.0, epsilon = 1e-15);

        let p45 = projector_xz(std::f64::consts::FRAC_PI_4).operator();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(p45.matrix()[(i, j)].re, 0.5, epsilon = 1e-14);
            }
        }

        // completeness and π-periodicity
        let theta = 0.7;
        let p = projector_xz(theta);
        let q = p.orthocomplement();
        let sum = p.operator().add(&q.operator()).unwrap();
        let dev = (sum.matrix() - DMatrix::<Complex64>::identity(2, 2))
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-12);

        let shifted = projector_xz(theta + std::f64::consts::PI).operator();
        let diff = (p.operator().matrix() - shifted.matrix())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn projector_invariants() {
        for proj in [
            projector_xz(0.3),
            MeasurementProjector::PauliEigen(PauliAxis::Y, EigenSign::Minus),
        ] {
            let op = proj.operator();
            assert!(op.hermitian_deviation() < 1e-12);
            assert!(op.projector_deviation() < 1e-12);
        }
    }

    #[test]
    fn partial_trace_of_product() {
        let zero = StateVector::basis_state(1, 0).unwrap();
        let one = StateVector::basis_state(1, 1).unwrap();
        let prod = zero.tensor(&one).unwrap().to_density_matrix();
        let reduced = prod.partial_trace(&[0]).unwrap();
        assert_abs_diff_eq!(reduced.entry(1, 1).re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn embed_matches_tensor_order() {
        // X on qubit 1 of 2 == I ⊗ X
        let x = Operator::pauli_x();
        let embedded = x.embed(&[1], 2).unwrap();
        let expected = Operator::identity(1).tensor(&x).unwrap();
        let diff = (embedded.matrix() - expected.matrix())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-15);
    }

    #[test]
    fn density_matrix_validation() {
        let dm = DensityMatrix::maximally_mixed(2);
        assert!(DensityMatrix::from_matrix(2, dm.matrix().clone()).is_ok());

        let mut bad = dm.matrix().clone();
        bad[(0, 1)] = Complex64::new(0.9, 0.0); // breaks PSD badly
        assert!(DensityMatrix::from_matrix(2, bad).is_err());

        let scaled = dm.matrix() * Complex64::new(2.0, 0.0);
        assert!(DensityMatrix::from_matrix(2, scaled).is_err());
    }

    #[test]
    fn deserialization_validates_the_matrix() {
        // valid shape, but trace 2
        let bad = r#"{"n_qubits":1,"re":[[1.0,0.0],[0.0,1.0]],"im":[[0.0,0.0],[0.0,0.0]]}"#;
        assert!(serde_json::from_str::<DensityMatrix>(bad).is_err());
        // non-PSD
        let bad = r#"{"n_qubits":1,"re":[[0.5,0.9],[0.9,0.5]],"im":[[0.0,0.0],[0.0,0.0]]}"#;
        assert!(serde_json::from_str::<DensityMatrix>(bad).is_err());
        // not Hermitian
        let bad = r#"{"n_qubits":1,"re":[[0.5,0.3],[0.0,0.5]],"im":[[0.0,0.0],[0.0,0.0]]}"#;
        assert!(serde_json::from_str::<DensityMatrix>(bad).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let g4 = ghz_state(4).unwrap();
        let rho = g4.to_density_matrix();
        let json = serde_json::to_string(&rho).unwrap();
        let back: DensityMatrix = serde_json::from_str(&json).unwrap();
        let diff = (back.matrix() - rho.matrix())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);

        let sv_json = serde_json::to_string(&g4).unwrap();
        let sv: StateVector = serde_json::from_str(&sv_json).unwrap();
        assert_abs_diff_eq!(sv.inner(&g4).unwrap().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_eigen_handles_hermitian_complex() {
        // sanity check for the eigenvalue backend: σ_y has eigenvalues ±1
        let m = Operator::pauli_y();
        let rho = DensityMatrix {
            n_qubits: 1,
            mat: m.matrix().clone(),
        };
        let mut eigs = rho.eigenvalues();
        eigs.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(eigs[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eigs[1], 1.0, epsilon = 1e-12);
    }
}
