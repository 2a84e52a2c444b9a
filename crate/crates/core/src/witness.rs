//! The four-photon GHZ entanglement witness W = I/2 − |G₄⟩⟨G₄| and the
//! counting experiment that measures it with five local settings.
//!
//! The local decomposition used for measurement is
//!
//!   |G₄⟩⟨G₄| = A/2 + (1/8) Σ_{k=0}^{3} (−1)^k M_k,
//!   A   = |H⟩⟨H|^⊗4 + |V⟩⟨V|^⊗4,
//!   M_k = [cos(kπ/4) σ_x + sin(kπ/4) σ_y]^⊗4,
//!
//! so with M̄ = (1/4) Σ (−1)^k ⟨M_k⟩ the fidelity is F = ⟨A⟩/2 + M̄/2 and
//! ⟨W⟩ = 1/2 − F. (Note the 1/8: the four M_k settings enter the projector
//! with half the weight of the per-setting average M̄.)

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{ghz_state, tensor_states, DensityMatrix, Operator, StateVector};
use crate::stats;

const N_QUBITS: usize = 4;
const N_OUTCOMES: usize = 16;

/// Default number of bootstrap resamples for simulated uncertainties.
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 1000;

/// A = |H⟩⟨H|^⊗4 + |V⟩⟨V|^⊗4, the population observable measured in the
/// H/V basis.
pub fn a_operator() -> Operator {
    let mut mat = Operator::zeros(N_QUBITS).matrix().clone();
    mat[(0, 0)] = Complex64::new(1.0, 0.0);
    mat[(N_OUTCOMES - 1, N_OUTCOMES - 1)] = Complex64::new(1.0, 0.0);
    Operator::from_matrix(N_QUBITS, mat).expect("16x16 by construction")
}

/// M_k = [cos(kπ/4) σ_x + sin(kπ/4) σ_y]^⊗4 for k = 0..=3.
pub fn m_k_operator(k: usize) -> Result<Operator> {
    if k > 3 {
        return Err(Error::ParameterOutOfRange {
            name: "k",
            value: k as f64,
            min: 0.0,
            max: 3.0,
        });
    }
    let theta = k as f64 * std::f64::consts::FRAC_PI_4;
    let single = Operator::pauli_x()
        .scale(Complex64::new(theta.cos(), 0.0))
        .add(&Operator::pauli_y().scale(Complex64::new(theta.sin(), 0.0)))?;
    crate::quantum::tensor_operators(&[&single, &single, &single, &single])
}

/// |G₄⟩⟨G₄| as an operator.
pub fn ghz_projector() -> Operator {
    let g = ghz_state(N_QUBITS).expect("n=4 valid");
    Operator::from_matrix(N_QUBITS, g.to_density_matrix().matrix().clone())
        .expect("16x16 by construction")
}

/// W = I/2 − |G₄⟩⟨G₄|.
pub fn witness_operator() -> Operator {
    Operator::identity(N_QUBITS)
        .scale(Complex64::new(0.5, 0.0))
        .sub(&ghz_projector())
        .expect("same dimension")
}

/// W written through the five local measurement settings:
/// I/2 − A/2 − (1/8) Σ (−1)^k M_k. Agrees entrywise with
/// [`witness_operator`].
pub fn witness_operator_decomposed() -> Operator {
    let mut acc = Operator::identity(N_QUBITS)
        .scale(Complex64::new(0.5, 0.0))
        .sub(&a_operator().scale(Complex64::new(0.5, 0.0)))
        .expect("same dimension");
    for k in 0..4 {
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        acc = acc
            .add(
                &m_k_operator(k)
                    .unwrap()
                    .scale(Complex64::new(sign / 8.0, 0.0)),
            )
            .expect("same dimension");
    }
    acc
}

/// Exact or estimated witness quantities for one four-qubit state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessReport {
    /// ⟨A⟩: population in the two correct H/V terms.
    pub a_expect: f64,
    /// ⟨M_k⟩ for k = 0..=3.
    pub m_values: [f64; 4],
    /// M̄ = (1/4) Σ (−1)^k ⟨M_k⟩.
    pub m_bar: f64,
    /// ⟨W⟩ = 1/2 − F.
    pub w_expect: f64,
    /// F = ⟨A⟩/2 + M̄/2.
    pub fidelity: f64,
    /// Bootstrap standard errors, present when derived from counts.
    pub uncertainties: Option<WitnessUncertainties>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessUncertainties {
    pub a_expect: f64,
    pub m_values: [f64; 4],
    pub m_bar: f64,
    pub w_expect: f64,
    pub fidelity: f64,
    pub n_resamples: usize,
}

/// Evaluates the witness exactly on a density matrix.
pub fn evaluate_witness(rho: &DensityMatrix) -> Result<WitnessReport> {
    if rho.n_qubits() != N_QUBITS {
        return Err(Error::DimensionMismatch {
            expected: N_OUTCOMES,
            got: rho.dim(),
        });
    }
    let a_expect = rho.expectation(&a_operator())?;
    let mut m_values = [0.0; 4];
    for (k, slot) in m_values.iter_mut().enumerate() {
        *slot = rho.expectation(&m_k_operator(k)?)?;
    }
    let m_bar = m_values
        .iter()
        .enumerate()
        .map(|(k, &m)| if k % 2 == 0 { m } else { -m })
        .sum::<f64>()
        / 4.0;
    let fidelity = rho.fidelity(&ghz_state(N_QUBITS)?)?;
    let w_expect = rho.expectation(&witness_operator())?;
    Ok(WitnessReport {
        a_expect,
        m_values,
        m_bar,
        w_expect,
        fidelity,
        uncertainties: None,
    })
}

/// Raw fourfold coincidences for one measurement setting.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SettingCounts {
    /// "ZZZZ" for the H/V setting, "M0".."M3" for the coherence settings.
    pub label: String,
    pub time_s: f64,
    /// 16 outcomes indexed by bitstring; bit 0 means the +1 eigenvector
    /// (|H⟩ in the Z basis, (|0⟩ + e^{ikπ/4}|1⟩)/√2 for M_k).
    pub counts: Vec<f64>,
}

/// Simulated witness experiment: estimates plus the counts they came from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessSimulation {
    pub report: WitnessReport,
    pub counts: Vec<SettingCounts>,
}

/// Per-qubit eigenvector of M_k for one outcome bit:
/// (|0⟩ ± e^{ikπ/4}|1⟩)/√2.
fn m_k_eigvec(k: usize, bit: usize) -> StateVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let sign = if bit == 0 { 1.0 } else { -1.0 };
    let phase = Complex64::from_polar(sign * s, k as f64 * std::f64::consts::FRAC_PI_4);
    StateVector::from_amplitudes(1, vec![Complex64::new(s, 0.0), phase])
        .expect("valid by construction")
}

fn m_k_outcome_probabilities(rho: &DensityMatrix, k: usize) -> Result<Vec<f64>> {
    let mut probs = Vec::with_capacity(N_OUTCOMES);
    for o in 0..N_OUTCOMES {
        let singles: Vec<StateVector> = (0..N_QUBITS)
            .map(|q| m_k_eigvec(k, crate::quantum::bit_of(o, q, N_QUBITS)))
            .collect();
        let refs: Vec<&StateVector> = singles.iter().collect();
        let v = tensor_states(&refs)?;
        probs.push(rho.fidelity(&v)?);
    }
    Ok(probs)
}

fn hv_outcome_probabilities(rho: &DensityMatrix) -> Vec<f64> {
    (0..N_OUTCOMES)
        .map(|o| rho.entry(o, o).re.max(0.0))
        .collect()
}

/// Estimators from the five count groups, in the order
/// [⟨A⟩, ⟨M₀⟩..⟨M₃⟩, M̄, F, ⟨W⟩].
fn estimates_from_counts(groups: &[Vec<f64>]) -> Result<Vec<f64>> {
    let hv = &groups[0];
    let hv_total: f64 = hv.iter().sum();
    if hv_total <= 0.0 {
        return Err(Error::LowStatistics {
            context: "no events in the H/V setting".into(),
        });
    }
    let a = (hv[0] + hv[N_OUTCOMES - 1]) / hv_total;
    let mut m = [0.0; 4];
    for k in 0..4 {
        let counts = &groups[k + 1];
        let total: f64 = counts.iter().sum();
        if total <= 0.0 {
            return Err(Error::LowStatistics {
                context: format!("no events in the M{k} setting"),
            });
        }
        // ±1-valued parity estimator over the 16 outcomes
        let signed: f64 = counts
            .iter()
            .enumerate()
            .map(|(o, &c)| if (o.count_ones() % 2) == 0 { c } else { -c })
            .sum();
        m[k] = signed / total;
    }
    let m_bar = (m[0] - m[1] + m[2] - m[3]) / 4.0;
    let fidelity = a / 2.0 + m_bar / 2.0;
    let w = 0.5 - fidelity;
    Ok(vec![a, m[0], m[1], m[2], m[3], m_bar, fidelity, w])
}

/// Simulates the five-setting witness measurement with Poissonian counting
/// statistics and reports bootstrap standard errors.
///
/// `rate_per_s` is the fourfold coincidence rate, `t_hv_s` the H/V
/// acquisition time and `t_mk_s` the time per M_k setting.
pub fn simulate_witness_counts(
    rho: &DensityMatrix,
    rate_per_s: f64,
    t_hv_s: f64,
    t_mk_s: f64,
    n_resamples: usize,
    seed: u64,
) -> Result<WitnessSimulation> {
    for (name, value) in [
        ("rate_per_s", rate_per_s),
        ("t_hv_s", t_hv_s),
        ("t_mk_s", t_mk_s),
    ] {
        if value <= 0.0 {
            return Err(Error::NonPositive { name, value });
        }
    }
    if rho.n_qubits() != N_QUBITS {
        return Err(Error::DimensionMismatch {
            expected: N_OUTCOMES,
            got: rho.dim(),
        });
    }

    let mut rng = stats::seeded_rng(seed);
    let mut groups: Vec<Vec<f64>> = Vec::with_capacity(5);
    let mut counts_out = Vec::with_capacity(5);

    let hv_probs = hv_outcome_probabilities(rho);
    let hv_counts: Vec<f64> = hv_probs
        .iter()
        .map(|&p| stats::sample_poisson(&mut rng, rate_per_s * t_hv_s * p))
        .collect();
    counts_out.push(SettingCounts {
        label: "ZZZZ".into(),
        time_s: t_hv_s,
        counts: hv_counts.clone(),
    });
    groups.push(hv_counts);

    for k in 0..4 {
        let probs = m_k_outcome_probabilities(rho, k)?;
        let counts: Vec<f64> = probs
            .iter()
            .map(|&p| stats::sample_poisson(&mut rng, rate_per_s * t_mk_s * p))
            .collect();
        counts_out.push(SettingCounts {
            label: format!("M{k}"),
            time_s: t_mk_s,
            counts: counts.clone(),
        });
        groups.push(counts);
    }

    let point = estimates_from_counts(&groups)?;
    let boot = stats::poisson_bootstrap_multi(
        &groups,
        estimates_from_counts,
        n_resamples,
        stats::derive_seed(seed, 0xB007),
    )?;

    let report = WitnessReport {
        a_expect: point[0],
        m_values: [point[1], point[2], point[3], point[4]],
        m_bar: point[5],
        fidelity: point[6],
        w_expect: point[7],
        uncertainties: Some(WitnessUncertainties {
            a_expect: boot[0].1,
            m_values: [boot[1].1, boot[2].1, boot[3].1, boot[4].1],
            m_bar: boot[5].1,
            fidelity: boot[6].1,
            w_expect: boot[7].1,
            n_resamples,
        }),
    };
    Ok(WitnessSimulation {
        report,
        counts: counts_out,
    })
}

/// Writes witness counts in the tomography counts-file layout
/// (`setting_index,bases,outcome,count,time_s`).
pub fn write_witness_counts_csv<W: std::io::Write>(
    sim: &WitnessSimulation,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["setting_index", "bases", "outcome", "count", "time_s"])?;
    for (idx, setting) in sim.counts.iter().enumerate() {
        for (o, &c) in setting.counts.iter().enumerate() {
            w.write_record(&[
                idx.to_string(),
                setting.label.clone(),
                format!("{o:04b}"),
                format!("{c}"),
                format!("{}", setting.time_s),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
