//! The optical network that turns two EPR pairs into a four-photon GHZ state.
//!
//! The polarizing beam splitter is modeled at the qubit/postselection level:
//! conditioned on one photon per output port it acts as the parity-check
//! projector |HH⟩⟨HH| + |VV⟩⟨VV| on the interfering pair. Residual
//! distinguishability of the interfering photons is compressed into the
//! coherence factor λ of [`crate::noise::dephase_ghz`]; only probabilities
//! are contract-bearing, so no photon-number modes are tracked.
//!
//! Jones conventions (fast-axis angle θ from horizontal):
//! HWP(θ) = [[cos 2θ, sin 2θ], [sin 2θ, −cos 2θ]];
//! QWP(θ) = e^{−iπ/4} [[cos²θ + i sin²θ, (1−i) sinθ cosθ],
//!                     [(1−i) sinθ cosθ, sin²θ + i cos²θ]].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise;
use crate::quantum::{bell_state, BellKind, DensityMatrix, Operator, StateVector};

/// Photon labels of the four output ports that must each carry exactly one
/// photon for the postselection to fire.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostselectionRule {
    ports: Vec<String>,
}

impl PostselectionRule {
    pub fn new(ports: Vec<String>) -> Result<Self> {
        for (i, p) in ports.iter().enumerate() {
            if ports[..i].contains(p) {
                return Err(Error::DuplicatePort(p.clone()));
            }
        }
        Ok(Self { ports })
    }

    pub fn ports(&self) -> &[String] {
        &self.ports
    }
}

impl Default for PostselectionRule {
    /// One photon in each of ports 1, 2′, 3′, 4.
    fn default() -> Self {
        Self {
            ports: ["1", "2'", "3'", "4"].map(String::from).to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WavePlateKind {
    Half,
    Quarter,
}

/// A wave plate with its fast axis at `angle` radians from horizontal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WavePlate {
    pub kind: WavePlateKind,
    pub angle: f64,
}

impl WavePlate {
    pub fn half(angle: f64) -> Self {
        Self {
            kind: WavePlateKind::Half,
            angle,
        }
    }

    pub fn quarter(angle: f64) -> Self {
        Self {
            kind: WavePlateKind::Quarter,
            angle,
        }
    }

    /// The single-qubit Jones operator (unitary).
    pub fn jones(&self) -> Operator {
        let (c, s) = ((2.0 * self.angle).cos(), (2.0 * self.angle).sin());
        let mat = match self.kind {
            WavePlateKind::Half => nalgebra::DMatrix::from_row_slice(
                2,
                2,
                &[
                    Complex64::new(c, 0.0),
                    Complex64::new(s, 0.0),
                    Complex64::new(s, 0.0),
                    Complex64::new(-c, 0.0),
                ],
            ),
            WavePlateKind::Quarter => {
                let phase = Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4);
                let (cq, sq) = (self.angle.cos(), self.angle.sin());
                let i = Complex64::new(0.0, 1.0);
                let one = Complex64::new(1.0, 0.0);
                let off = (one - i) * Complex64::new(sq * cq, 0.0);
                nalgebra::DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        phase * (Complex64::new(cq * cq, 0.0) + i * Complex64::new(sq * sq, 0.0)),
                        phase * off,
                        phase * off,
                        phase * (Complex64::new(sq * sq, 0.0) + i * Complex64::new(cq * cq, 0.0)),
                    ],
                )
            }
        };
        Operator::from_matrix(1, mat).expect("2x2 by construction")
    }
}

/// Output of one EPR source: |φ+⟩ = (|HH⟩ + |VV⟩)/√2.
pub fn epr_pair() -> StateVector {
    bell_state(BellKind::PhiPlus)
}

/// Raw output of the sandwichlike source before alignment:
/// (|HV⟩ − |VH⟩)/√2 = |ψ−⟩.
pub fn sandwich_source_raw() -> StateVector {
    bell_state(BellKind::PsiMinus)
}

/// Applies a wave plate to one qubit of the register.
pub fn apply_waveplate(state: &StateVector, plate: WavePlate, qubit: usize) -> Result<StateVector> {
    state.apply_single_qubit(&plate.jones(), qubit)
}

/// Postselected PBS parity check on the interfering pair: keeps only the
/// components where the two qubits agree, returning the renormalized state
/// and the success probability.
pub fn pbs_parity_check(state: &StateVector, pair: (usize, usize)) -> Result<(StateVector, f64)> {
    let n = state.n_qubits();
    for q in [pair.0, pair.1] {
        if q >= n {
            return Err(Error::QubitOutOfRange {
                qubit: q,
                n_qubits: n,
            });
        }
    }
    if pair.0 == pair.1 {
        return Err(Error::DuplicateQubit { qubit: pair.0 });
    }
    let mask0 = 1usize << (n - 1 - pair.0);
    let mask1 = 1usize << (n - 1 - pair.1);
    let mut amps = Vec::with_capacity(state.dim());
    let mut prob = 0.0;
    for i in 0..state.dim() {
        let even = (i & mask0 != 0) == (i & mask1 != 0);
        let a = if even {
            state.amplitude(i)
        } else {
            Complex64::new(0.0, 0.0)
        };
        prob += a.norm_sqr();
        amps.push(a);
    }
    if prob < crate::quantum::PROB_FLOOR {
        return Err(Error::PostselectionFailed { probability: prob });
    }
    let out = StateVector::from_amplitudes(n, amps)?;
    Ok((out, prob))
}

/// Full generation pipeline: two EPR pairs, PBS parity check on the inner
/// photons, relative-phase trim, and coherence damping by λ.
///
/// λ = 1, φ = 0 reproduces the ideal GHZ state; λ < 1 multiplies the two
/// extremal GHZ coherences by λ (fidelity (1 + λ)/2).
pub fn generate_ghz_pipeline(lambda: f64, phase: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::ParameterOutOfRange {
            name: "lambda",
            value: lambda,
            min: 0.0,
            max: 1.0,
        });
    }
    let pair = epr_pair();
    let input = pair.tensor(&pair)?;
    let (projected, _prob) = pbs_parity_check(&input, (1, 2))?;
    // tiltable QWP after the PBS trims the relative phase of the two branches
    let phase_trim = Operator::from_matrix(
        1,
        nalgebra::DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::from_polar(1.0, phase),
            ],
        ),
    )?;
    let tuned = projected.apply_single_qubit(&phase_trim, 1)?;
    noise::dephase_ghz(&tuned.to_density_matrix(), lambda)
}
