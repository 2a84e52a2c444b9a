//! Phenomenological noise channels for the generated four-photon state.
//!
//! Three knobs cover the imperfections that matter at the postselected
//! level: higher-order emission shows up as population in incorrect H/V
//! terms (ε), photon distinguishability damps the GHZ coherences (λ),
//! and isotropic white noise (p) models everything structureless.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::DensityMatrix;

/// The three noise parameters, each in [0, 1].
///
/// `epsilon_pop`: weight of incorrect computational-basis terms.
/// `lambda_coh`: surviving fraction of the extremal GHZ coherences.
/// `p_white`: survival probability under white-noise admixture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub epsilon_pop: f64,
    pub lambda_coh: f64,
    pub p_white: f64,
}

impl NoiseParams {
    pub fn ideal() -> Self {
        Self {
            epsilon_pop: 0.0,
            lambda_coh: 1.0,
            p_white: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("epsilon_pop", self.epsilon_pop),
            ("lambda_coh", self.lambda_coh),
            ("p_white", self.p_white),
        ] {
            check_unit_interval(name, value)?;
        }
        Ok(())
    }
}

fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::ParameterOutOfRange {
            name,
            value,
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(())
}

/// ρ → p ρ + (1 − p) I/d.
pub fn white_noise(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    check_unit_interval("p_white", p)?;
    let mixed = DensityMatrix::maximally_mixed(rho.n_qubits());
    let mat = rho.matrix() * Complex64::new(p, 0.0) + mixed.matrix() * Complex64::new(1.0 - p, 0.0);
    Ok(DensityMatrix::from_matrix_unchecked(rho.n_qubits(), mat))
}

/// Damps the coherences between the |V⟩^⊗n branch and the rest by λ,
/// leaving the diagonal untouched. Realized as the completely positive
/// mixture ρ → ((1+λ)/2) ρ + ((1−λ)/2) F ρ F with F the phase flip on
/// |1…1⟩, so positivity holds for arbitrary inputs; on GHZ-manifold states
/// this is exactly a multiplication of the two extremal coherences by λ.
pub fn dephase_ghz(rho: &DensityMatrix, lambda: f64) -> Result<DensityMatrix> {
    check_unit_interval("lambda_coh", lambda)?;
    let dim = rho.dim();
    let last = dim - 1;
    let mut mat = rho.matrix().clone();
    let scale = Complex64::new(lambda, 0.0);
    for k in 0..last {
        mat[(k, last)] *= scale;
        mat[(last, k)] *= scale;
    }
    Ok(DensityMatrix::from_matrix_unchecked(rho.n_qubits(), mat))
}

/// ρ → (1 − ε) ρ + ε D with D the uniform mixture over the 2^n − 2
/// computational-basis states other than |H⟩^⊗n and |V⟩^⊗n.
pub fn population_noise(rho: &DensityMatrix, epsilon: f64) -> Result<DensityMatrix> {
    check_unit_interval("epsilon_pop", epsilon)?;
    let dim = rho.dim();
    let mut mat = rho.matrix() * Complex64::new(1.0 - epsilon, 0.0);
    let weight = epsilon / (dim - 2) as f64;
    for k in 1..dim - 1 {
        mat[(k, k)] += Complex64::new(weight, 0.0);
    }
    Ok(DensityMatrix::from_matrix_unchecked(rho.n_qubits(), mat))
}

/// Applies the channels in the documented order:
/// coherence damping, then population noise, then white noise.
pub fn apply_noise(rho: &DensityMatrix, params: &NoiseParams) -> Result<DensityMatrix> {
    params.validate()?;
    let dephased = dephase_ghz(rho, params.lambda_coh)?;
    let populated = population_noise(&dephased, params.epsilon_pop)?;
    white_noise(&populated, params.p_white)
}

/// Result of inverting the two witness observables to noise parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Calibration {
    pub params: NoiseParams,
    /// Set when m̄ > ⟨A⟩ forced λ to be clamped to 1; counting noise can
    /// push the measured coherence average above the population term.
    pub lambda_clamped: bool,
}

/// Inverts ⟨A⟩ and M̄ to (ε, λ): ε = 1 − ⟨A⟩, λ = M̄/⟨A⟩ clamped to [0, 1].
///
/// The forward model `population_noise(dephase_ghz(|GHZ⟩⟨GHZ|, λ), ε)`
/// reproduces the inputs exactly when no clamping occurs.
pub fn calibrate_from_witness(a_expect: f64, m_bar: f64) -> Result<Calibration> {
    check_unit_interval("a_expect", a_expect)?;
    check_unit_interval("m_bar", m_bar)?;
    let epsilon = 1.0 - a_expect;
    let raw_lambda = if a_expect > 0.0 {
        m_bar / a_expect
    } else {
        1.0
    };
    let lambda_clamped = raw_lambda > 1.0;
    Ok(Calibration {
        params: NoiseParams {
            epsilon_pop: epsilon,
            lambda_coh: raw_lambda.clamp(0.0, 1.0),
            p_white: 1.0,
        },
        lambda_clamped,
    })
}
