//! Entanglement-swapping analysis: Bell-state measurement on the inner
//! photon pair and the conditional states of the outer pair.
//!
//! A PBS with both analyzers in the ± basis discriminates two of the four
//! Bell states; which two depends on whether a 45° HWP sits in one input
//! port. The analysis projects photons 2, 3 onto the discriminated Bell
//! states directly and reports the conditional state of photons 1, 4.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{bell_state, BellKind, DensityMatrix, EigenSign, Operator, PauliAxis};
use crate::tomography::{
    efficiency_correct, mle_reconstruct, MleOptions, SettingRecord, TomographyDataset,
    TomographySetting,
};

/// Which Bell pair the measurement discriminates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BsmConfig {
    /// Bare PBS: {++, −−} ↦ φ⁺ and {+−, −+} ↦ φ⁻.
    PhiPair,
    /// 45° HWP in one input port: the same detector patterns herald ψ±.
    PsiPair,
}

impl BsmConfig {
    pub fn discriminated(self) -> [BellKind; 2] {
        match self {
            BsmConfig::PhiPair => [BellKind::PhiPlus, BellKind::PhiMinus],
            BsmConfig::PsiPair => [BellKind::PsiPlus, BellKind::PsiMinus],
        }
    }
}

/// Detector-pattern to Bell-state map of the measurement.
pub fn bsm_outcome_map(config: BsmConfig) -> Vec<((EigenSign, EigenSign), BellKind)> {
    let [even, odd] = config.discriminated();
    vec![
        ((EigenSign::Plus, EigenSign::Plus), even),
        ((EigenSign::Minus, EigenSign::Minus), even),
        ((EigenSign::Plus, EigenSign::Minus), odd),
        ((EigenSign::Minus, EigenSign::Plus), odd),
    ]
}

/// One discriminated Bell outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BellOutcomeReport {
    pub bell: BellKind,
    pub probability: f64,
    /// Conditional state of photons 1, 4.
    pub conditional: DensityMatrix,
    /// Fidelity of the conditional state to the nominal Bell state.
    pub fidelity: f64,
    /// Set when the partition carried fewer counts than requested.
    pub low_statistics: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SwapReport {
    pub config: BsmConfig,
    pub outcomes: Vec<BellOutcomeReport>,
    /// Unweighted mean fidelity over the discriminated outcomes present.
    pub average_fidelity: Option<f64>,
}

fn finish_report(config: BsmConfig, outcomes: Vec<BellOutcomeReport>) -> SwapReport {
    let average_fidelity = if outcomes.is_empty() {
        None
    } else {
        Some(outcomes.iter().map(|o| o.fidelity).sum::<f64>() / outcomes.len() as f64)
    };
    SwapReport {
        config,
        outcomes,
        average_fidelity,
    }
}

/// Projects photons 2, 3 of a four-photon state onto the discriminated Bell
/// states and reports the conditional states of photons 1, 4. Outcomes whose
/// probability falls below threshold are reported absent.
pub fn swap_analyze(rho4: &DensityMatrix, config: BsmConfig) -> Result<SwapReport> {
    if rho4.n_qubits() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 16,
            got: rho4.dim(),
        });
    }
    let mut outcomes = Vec::new();
    for bell in config.discriminated() {
        let target = bell_state(bell);
        let proj = Operator::from_matrix(2, target.to_density_matrix().matrix().clone())?;
        match rho4.project_traced(&proj, &[1, 2]) {
            Ok((conditional, probability)) => {
                let fidelity = conditional.fidelity(&target)?;
                outcomes.push(BellOutcomeReport {
                    bell,
                    probability,
                    conditional,
                    fidelity,
                    low_statistics: false,
                });
            }
            Err(Error::IncompatibleProjection { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(finish_report(config, outcomes))
}

#[derive(Clone, Copy, Debug)]
pub struct SwapTomographyOptions {
    /// Partitions with fewer counts than this are flagged low-statistics.
    pub min_counts: f64,
    pub mle: MleOptions,
}

impl Default for SwapTomographyOptions {
    fn default() -> Self {
        Self {
            min_counts: 50.0,
            mle: MleOptions::default(),
        }
    }
}

/// Entanglement swapping from recorded tomography data of the four-photon
/// state: picks the settings where photons 2 and 3 were measured in the ±
/// basis, partitions events by their detector pattern ({++,−−} ↦ φ⁺,
/// {+−,−+} ↦ φ⁻), and reconstructs the conditional state of photons 1, 4
/// per partition by two-qubit MLE.
pub fn swap_from_tomography(
    dataset: &TomographyDataset,
    opts: &SwapTomographyOptions,
) -> Result<SwapReport> {
    if dataset.n_qubits != 4 {
        return Err(Error::DimensionMismatch {
            expected: 16,
            got: 1usize << dataset.n_qubits,
        });
    }
    let corrected;
    let data = if dataset.efficiencies.is_some() && !dataset.corrected {
        corrected = efficiency_correct(dataset)?;
        &corrected
    } else {
        dataset
    };

    let inner_x: Vec<&SettingRecord> = data
        .records
        .iter()
        .filter(|r| r.setting.bases()[1] == PauliAxis::X && r.setting.bases()[2] == PauliAxis::X)
        .collect();
    if inner_x.is_empty() {
        return Err(Error::MissingData {
            context: "no settings with photons 2 and 3 measured in the ± basis".into(),
        });
    }

    // middle-bit patterns per Bell outcome: bit 0 is "+"
    let partitions: [(BellKind, [(usize, usize); 2]); 2] = [
        (BellKind::PhiPlus, [(0, 0), (1, 1)]),
        (BellKind::PhiMinus, [(0, 1), (1, 0)]),
    ];

    let mut partition_totals = [0.0f64; 2];
    let mut partition_records: Vec<Vec<SettingRecord>> = vec![Vec::new(), Vec::new()];
    for record in &inner_x {
        let outer =
            TomographySetting::new(vec![record.setting.bases()[0], record.setting.bases()[3]]);
        for (slot, (_bell, patterns)) in partitions.iter().enumerate() {
            let mut counts = vec![0.0; 4];
            for o1 in 0..2 {
                for o4 in 0..2 {
                    for &(m2, m3) in patterns {
                        let full = (o1 << 3) | (m2 << 2) | (m3 << 1) | o4;
                        counts[(o1 << 1) | o4] += record.counts[full];
                    }
                }
            }
            partition_totals[slot] += counts.iter().sum::<f64>();
            partition_records[slot].push(SettingRecord {
                setting: outer.clone(),
                counts,
                time_s: record.time_s,
            });
        }
    }
    let grand_total: f64 = partition_totals.iter().sum();
    if grand_total <= 0.0 {
        return Err(Error::LowStatistics {
            context: "no events in the ±± settings".into(),
        });
    }

    let mut outcomes = Vec::new();
    for (slot, (bell, _)) in partitions.iter().enumerate() {
        let total = partition_totals[slot];
        if total <= 0.0 {
            return Err(Error::LowStatistics {
                context: format!("no events in the {} partition", bell.label()),
            });
        }
        let sub = TomographyDataset {
            n_qubits: 2,
            records: partition_records[slot].clone(),
            efficiencies: None,
            rate_per_s: data.rate_per_s,
            corrected: data.corrected,
        };
        let reconstruction = mle_reconstruct(&sub, &opts.mle)?;
        let target = bell_state(*bell);
        let fidelity = reconstruction.rho.fidelity(&target)?;
        outcomes.push(BellOutcomeReport {
            bell: *bell,
            probability: total / grand_total,
            conditional: reconstruction.rho,
            fidelity,
            low_statistics: total < opts.min_counts,
        });
    }
    Ok(finish_report(BsmConfig::PhiPair, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise;
    use crate::optics::epr_pair;
    use crate::quantum::{ghz_state, StateVector};
    use crate::tomography::{generate_settings, simulate_counts};
    use approx::assert_abs_diff_eq;

    fn psi_in() -> DensityMatrix {
        let pair = epr_pair();
        pair.tensor(&pair).unwrap().to_density_matrix()
    }

    #[test]
    fn outcome_map_patterns() {
        let map = bsm_outcome_map(BsmConfig::PhiPair);
        assert_eq!(
            map[0],
            ((EigenSign::Plus, EigenSign::Plus), BellKind::PhiPlus)
        );
        assert_eq!(
            map[1],
            ((EigenSign::Minus, EigenSign::Minus), BellKind::PhiPlus)
        );
        assert_eq!(
            map[2],
            ((EigenSign::Plus, EigenSign::Minus), BellKind::PhiMinus)
        );
        assert_eq!(
            map[3],
            ((EigenSign::Minus, EigenSign::Plus), BellKind::PhiMinus)
        );

        let map = bsm_outcome_map(BsmConfig::PsiPair);
        assert_eq!(map[0].1, BellKind::PsiPlus);
        assert_eq!(map[2].1, BellKind::PsiMinus);
    }

    #[test]
    fn pbs_plus_plus_projection_equals_bell_projection() {
        // ⟨++| after the parity check is ⟨φ+| up to normalization: the
        // conditional outer-pair states coincide
        let input = epr_pair().tensor(&epr_pair()).unwrap();
        let (after_pbs, p_pbs) = crate::optics::pbs_parity_check(&input, (1, 2)).unwrap();
        let plus = PauliAxis::X.eigenvector(EigenSign::Plus);
        let pp = plus.tensor(&plus).unwrap();
        let proj_pp = Operator::from_matrix(2, pp.to_density_matrix().matrix().clone()).unwrap();
        let (cond_pbs, p_pp) = after_pbs
            .to_density_matrix()
            .project_traced(&proj_pp, &[1, 2])
            .unwrap();

        let phi = bell_state(BellKind::PhiPlus);
        let proj_bell = Operator::from_matrix(2, phi.to_density_matrix().matrix().clone()).unwrap();
        let (cond_bell, p_bell) = psi_in().project_traced(&proj_bell, &[1, 2]).unwrap();

        let diff = (cond_pbs.matrix() - cond_bell.matrix())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
        // path probabilities: P(parity)·P(++|parity) = P(φ+)/2 (one of two patterns)
        assert_abs_diff_eq!(p_pbs * p_pp, p_bell / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ideal_input_swaps_perfectly() {
        for config in [BsmConfig::PhiPair, BsmConfig::PsiPair] {
            let report = swap_analyze(&psi_in(), config).unwrap();
            assert_eq!(report.outcomes.len(), 2);
            for outcome in &report.outcomes {
                assert_abs_diff_eq!(outcome.probability, 0.25, epsilon = 1e-12);
                assert_abs_diff_eq!(outcome.fidelity, 1.0, epsilon = 1e-12);
            }
            assert_abs_diff_eq!(report.average_fidelity.unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bell_pair_sum_reconstructs_the_input_state() {
        // (1/2) Σ_B |B⟩₁₄|B⟩₂₃ equals the two-pair input state entrywise
        let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); 16];
        for bell in BellKind::ALL {
            let b = bell_state(bell);
            for outer in 0..4usize {
                for inner in 0..4usize {
                    let (q1, q4) = (outer >> 1, outer & 1);
                    let (q2, q3) = (inner >> 1, inner & 1);
                    let idx = (q1 << 3) | (q2 << 2) | (q3 << 1) | q4;
                    amps[idx] += b.amplitude(outer) * b.amplitude(inner) * 0.5;
                }
            }
        }
        let input = epr_pair().tensor(&epr_pair()).unwrap();
        for (i, &a) in amps.iter().enumerate() {
            assert!(
                (a - input.amplitude(i)).norm() < 1e-12,
                "amplitude {i} differs"
            );
        }
    }

    #[test]
    fn all_four_bell_probabilities_sum_to_one() {
        let rho = psi_in();
        let mut total = 0.0;
        for config in [BsmConfig::PhiPair, BsmConfig::PsiPair] {
            for outcome in swap_analyze(&rho, config).unwrap().outcomes {
                total += outcome.probability;
            }
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn product_state_input() {
        let hhhh = StateVector::basis_state(4, 0).unwrap().to_density_matrix();
        let report = swap_analyze(&hhhh, BsmConfig::PhiPair).unwrap();
        // both φ outcomes fire with probability 1/2 and fidelity 1/2
        for outcome in &report.outcomes {
            assert_abs_diff_eq!(outcome.probability, 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(outcome.fidelity, 0.5, epsilon = 1e-12);
        }
        // ψ outcomes are orthogonal to |HH⟩ and reported absent
        let psi_report = swap_analyze(&hhhh, BsmConfig::PsiPair).unwrap();
        assert!(psi_report.outcomes.is_empty());
        assert!(psi_report.average_fidelity.is_none());
    }

    #[test]
    fn noisy_input_average_matches_direct_projection() {
        let rho = noise::white_noise(&psi_in(), 0.9).unwrap();
        let report = swap_analyze(&rho, BsmConfig::PhiPair).unwrap();
        let mut expected = 0.0;
        for bell in [BellKind::PhiPlus, BellKind::PhiMinus] {
            let target = bell_state(bell);
            let proj =
                Operator::from_matrix(2, target.to_density_matrix().matrix().clone()).unwrap();
            let (cond, _p) = rho.project_traced(&proj, &[1, 2]).unwrap();
            expected += cond.fidelity(&target).unwrap() / 2.0;
        }
        assert_abs_diff_eq!(report.average_fidelity.unwrap(), expected, epsilon = 1e-10);
    }

    #[test]
    fn tomography_swap_on_clean_data() {
        // high-statistics dataset of the postselected four-photon state
        let ghz = ghz_state(4).unwrap().to_density_matrix();
        let settings = generate_settings(4);
        let ds = simulate_counts(&ghz, &settings, 50.0, 100.0, None, 31).unwrap();
        let report = swap_from_tomography(&ds, &SwapTomographyOptions::default()).unwrap();
        assert_eq!(report.outcomes.len(), 2);
        for outcome in &report.outcomes {
            assert!(outcome.fidelity >= 0.99, "fidelity {}", outcome.fidelity);
            assert!(!outcome.low_statistics);
            assert_abs_diff_eq!(outcome.probability, 0.5, epsilon = 0.05);
        }
        assert!(report.average_fidelity.unwrap() >= 0.99);
    }

    #[test]
    fn tomography_swap_requires_inner_x_settings() {
        let ghz = ghz_state(4).unwrap().to_density_matrix();
        let no_xx: Vec<_> = generate_settings(4)
            .into_iter()
            .filter(|s| !(s.bases()[1] == PauliAxis::X && s.bases()[2] == PauliAxis::X))
            .collect();
        let ds = simulate_counts(&ghz, &no_xx, 1.0, 10.0, None, 1).unwrap();
        assert!(matches!(
            swap_from_tomography(&ds, &SwapTomographyOptions::default()),
            Err(Error::MissingData { .. })
        ));
    }

    #[test]
    fn tomography_swap_flags_low_statistics() {
        let ghz = ghz_state(4).unwrap().to_density_matrix();
        let settings = generate_settings(4);
        let ds = simulate_counts(&ghz, &settings, 0.5, 10.0, None, 77).unwrap();
        let report = swap_from_tomography(&ds, &SwapTomographyOptions::default()).unwrap();
        for outcome in &report.outcomes {
            assert!(outcome.low_statistics);
        }
    }
}
