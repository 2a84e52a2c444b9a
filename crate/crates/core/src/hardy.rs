//! The 2n-setting Hardy-type test of genuine multipartite nonlocality for
//! n = 4, with X–Z-plane projective measurements.
//!
//! Party 1 measures the binary observables a₁ = |α₁⟩⟨α₁| or b₁ = |β₁⟩⟨β₁|;
//! parties 2–4 share a and b, and b̄ = 1 − b is the orthocomplement
//! projector (angle + 90°). Every term is the joint probability that all
//! four outcomes equal 1, and
//!
//!   I = ⟨a₁aaa⟩ − ⟨b₁aaa⟩ − ⟨a₁baa⟩ − ⟨a₁aba⟩ − ⟨a₁aab⟩
//!       − ⟨b̄₁b̄aa⟩ − ⟨b̄₁ab̄a⟩ − ⟨b̄₁aab̄⟩ ≤ 0
//!
//! for every bipartition-local nonsignaling model; I > 0 certifies genuine
//! four-partite nonlocality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::white_noise;
use crate::optim::{minimize_simplex, NelderMeadOptions};
use crate::quantum::{
    bit_of, ghz_state, projector_xz, DensityMatrix, MeasurementProjector, StateVector,
};
use crate::stats;
use crate::tomography::DetectorEfficiencies;
use rand::Rng;
use rayon::prelude::*;

const N_QUBITS: usize = 4;
const DIM: usize = 16;
const N_TERMS: usize = 8;

pub const TERM_LABELS: [&str; N_TERMS] = [
    "a1 a a a",
    "b1 a a a",
    "a1 b a a",
    "a1 a b a",
    "a1 a a b",
    "b1~ b~ a a",
    "b1~ a b~ a",
    "b1~ a a b~",
];

/// The four measurement angles (radians): party 1 uses α₁/β₁, parties 2–4
/// share α/β. Projectors are π-periodic in their angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HardySettings {
    pub alpha1: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta: f64,
}

impl HardySettings {
    pub fn new(alpha1: f64, alpha: f64, beta1: f64, beta: f64) -> Result<Self> {
        for (name, v) in [
            ("alpha1", alpha1),
            ("alpha", alpha),
            ("beta1", beta1),
            ("beta", beta),
        ] {
            if !v.is_finite() {
                return Err(Error::ParameterOutOfRange {
                    name,
                    value: v,
                    min: f64::NEG_INFINITY,
                    max: f64::INFINITY,
                });
            }
        }
        Ok(Self {
            alpha1,
            alpha,
            beta1,
            beta,
        })
    }

    pub fn from_degrees(alpha1: f64, alpha: f64, beta1: f64, beta: f64) -> Result<Self> {
        Self::new(
            alpha1.to_radians(),
            alpha.to_radians(),
            beta1.to_radians(),
            beta.to_radians(),
        )
    }

    pub fn to_degrees(&self) -> [f64; 4] {
        [
            self.alpha1.to_degrees(),
            self.alpha.to_degrees(),
            self.beta1.to_degrees(),
            self.beta.to_degrees(),
        ]
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.alpha1, self.alpha, self.beta1, self.beta]
    }

    pub fn from_array(x: [f64; 4]) -> Self {
        Self {
            alpha1: x[0],
            alpha: x[1],
            beta1: x[2],
            beta: x[3],
        }
    }

    /// Angles reduced mod π into [0, π); the projectors are unchanged.
    pub fn reduced(&self) -> Self {
        let m = |t: f64| t.rem_euclid(std::f64::consts::PI);
        Self {
            alpha1: m(self.alpha1),
            alpha: m(self.alpha),
            beta1: m(self.beta1),
            beta: m(self.beta),
        }
    }

    /// The per-qubit projectors of one of the eight terms.
    pub fn term_projectors(&self, term: usize) -> [MeasurementProjector; 4] {
        let a1 = projector_xz(self.alpha1);
        let a = projector_xz(self.alpha);
        let b1 = projector_xz(self.beta1);
        let b = projector_xz(self.beta);
        let nb1 = b1.orthocomplement();
        let nb = b.orthocomplement();
        match term {
            0 => [a1, a, a, a],
            1 => [b1, a, a, a],
            2 => [a1, b, a, a],
            3 => [a1, a, b, a],
            4 => [a1, a, a, b],
            5 => [nb1, nb, a, a],
            6 => [nb1, a, nb, a],
            7 => [nb1, a, a, nb],
            _ => panic!("term index {term} out of range"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct HardySettingsJson {
    alpha1_deg: f64,
    alpha_deg: f64,
    beta1_deg: f64,
    beta_deg: f64,
}

impl Serialize for HardySettings {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let [alpha1_deg, alpha_deg, beta1_deg, beta_deg] = self.to_degrees();
        HardySettingsJson {
            alpha1_deg,
            alpha_deg,
            beta1_deg,
            beta_deg,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HardySettings {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = HardySettingsJson::deserialize(d)?;
        HardySettings::from_degrees(raw.alpha1_deg, raw.alpha_deg, raw.beta1_deg, raw.beta_deg)
            .map_err(serde::de::Error::custom)
    }
}

/// Joint probability that every qubit's binary outcome equals 1:
/// tr(ρ · Π₁ ⊗ Π₂ ⊗ Π₃ ⊗ Π₄).
pub fn joint_probability(rho: &DensityMatrix, projectors: &[MeasurementProjector]) -> Result<f64> {
    if projectors.len() != rho.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: rho.n_qubits(),
            got: projectors.len(),
        });
    }
    let singles: Vec<StateVector> = projectors.iter().map(|p| p.vector()).collect();
    let refs: Vec<&StateVector> = singles.iter().collect();
    let v = crate::quantum::tensor_states(&refs)?;
    rho.fidelity(&v)
}

/// The eight term expectations plus I.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HardyResult {
    pub terms: [f64; N_TERMS],
    pub i_value: f64,
    pub uncertainties: Option<HardyUncertainties>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HardyUncertainties {
    pub term_sigmas: [f64; N_TERMS],
    pub i_sigma: f64,
    /// I / σ_I.
    pub significance: f64,
    pub n_resamples: usize,
}

/// Evaluates all eight terms and I on a density matrix.
pub fn hardy_evaluate(rho: &DensityMatrix, settings: &HardySettings) -> Result<HardyResult> {
    let mut terms = [0.0; N_TERMS];
    for (t, slot) in terms.iter_mut().enumerate() {
        *slot = joint_probability(rho, &settings.term_projectors(t))?;
    }
    let i_value = terms[0] - terms[1..].iter().sum::<f64>();
    Ok(HardyResult {
        terms,
        i_value,
        uncertainties: None,
    })
}

// ---------------------------------------------------------------------------
// Fast evaluation path for the settings search
// ---------------------------------------------------------------------------

/// X–Z-plane projector vectors are real, so tr(ρ v v†) only sees Re ρ;
/// the search loops run on a flat real copy of the state.
struct FastEval {
    re_rho: Vec<f64>,
}

impl FastEval {
    fn new(rho: &DensityMatrix) -> Self {
        let mut re_rho = vec![0.0; DIM * DIM];
        for i in 0..DIM {
            for j in 0..DIM {
                re_rho[i * DIM + j] = rho.entry(i, j).re;
            }
        }
        Self { re_rho }
    }

    /// vᵀ (Re ρ) v for the product vector of four (cos, sin) pairs.
    fn joint(&self, q: &[(f64, f64); 4]) -> f64 {
        let mut v = [0.0f64; DIM];
        for (i, slot) in v.iter_mut().enumerate() {
            let pick = |qq: (f64, f64), bit: usize| if bit == 0 { qq.0 } else { qq.1 };
            *slot = pick(q[0], (i >> 3) & 1)
                * pick(q[1], (i >> 2) & 1)
                * pick(q[2], (i >> 1) & 1)
                * pick(q[3], i & 1);
        }
        let mut p = 0.0;
        for i in 0..DIM {
            let row = &self.re_rho[i * DIM..(i + 1) * DIM];
            let mut w = 0.0;
            for j in 0..DIM {
                w += row[j] * v[j];
            }
            p += v[i] * w;
        }
        p
    }

    fn i_value(&self, x: &[f64; 4]) -> f64 {
        let cs = |t: f64| (t.cos(), t.sin());
        let orth = |t: f64| (-t.sin(), t.cos());
        let a1 = cs(x[0]);
        let a = cs(x[1]);
        let b1 = cs(x[2]);
        let b = cs(x[3]);
        let nb1 = orth(x[2]);
        let nb = orth(x[3]);
        self.joint(&[a1, a, a, a])
            - self.joint(&[b1, a, a, a])
            - self.joint(&[a1, b, a, a])
            - self.joint(&[a1, a, b, a])
            - self.joint(&[a1, a, a, b])
            - self.joint(&[nb1, nb, a, a])
            - self.joint(&[nb1, a, nb, a])
            - self.joint(&[nb1, a, a, nb])
    }
}

fn lex_less(a: &[f64; 4], b: &[f64; 4]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// The symmetry images of a settings tuple under which the functional on
/// the GHZ state is invariant (checked numerically against the actual input
/// state by the search before use): per-angle π-periodicity, global θ → −θ,
/// global θ → π/2 − θ, and the exchange (α₁, α, β₁, β) → (β₁, α + π/2, α₁, β).
pub fn symmetry_orbit(settings: &HardySettings) -> Vec<HardySettings> {
    let s = settings.as_array();
    let neg = |x: [f64; 4]| x.map(|t| -t);
    let flip = |x: [f64; 4]| x.map(|t| std::f64::consts::FRAC_PI_2 - t);
    let exch = |x: [f64; 4]| [x[2], x[1] + std::f64::consts::FRAC_PI_2, x[0], x[3]];
    let base = [s, neg(s), flip(s), neg(flip(s))];
    let mut out = Vec::with_capacity(8);
    for img in base {
        out.push(HardySettings::from_array(img).reduced());
        out.push(HardySettings::from_array(exch(img)).reduced());
    }
    out
}

/// Maximizes I over (α₁, α, β₁, β) with parties 2–4 symmetric: a coarse 5°
/// grid pass picks the `restarts` best starting points, each refined by
/// Nelder-Mead to 1e-6 angle tolerance. Deterministic for a fixed seed.
/// Degenerate maxima are canonicalized to the lexicographically smallest
/// symmetry image (verified against the input state) with angles in [0, π).
pub fn search_settings(
    rho: &DensityMatrix,
    restarts: usize,
    seed: u64,
) -> Result<(HardySettings, f64)> {
    if rho.n_qubits() != N_QUBITS {
        return Err(Error::DimensionMismatch {
            expected: DIM,
            got: rho.dim(),
        });
    }
    if restarts == 0 {
        return Err(Error::ParameterOutOfRange {
            name: "restarts",
            value: 0.0,
            min: 1.0,
            max: f64::INFINITY,
        });
    }
    let fast = FastEval::new(rho);
    let k_keep = restarts.min(64);

    // stage 1: full scan of the 5° grid, keeping the best k starting points
    const GRID_N: usize = 36;
    let grid: Vec<f64> = (0..GRID_N)
        .map(|k| (k as f64) * 5.0_f64.to_radians())
        .collect();
    let mut candidates: Vec<(f64, [f64; 4])> = (0..GRID_N)
        .into_par_iter()
        .map(|i0| {
            let mut top: Vec<(f64, [f64; 4])> = Vec::with_capacity(k_keep + 1);
            for &a in &grid {
                for &b1 in &grid {
                    for &b in &grid {
                        let x = [grid[i0], a, b1, b];
                        let i_val = fast.i_value(&x);
                        let pos = top.partition_point(|&(v, ref t)| {
                            v > i_val || (v == i_val && lex_less(t, &x))
                        });
                        if pos < k_keep {
                            top.insert(pos, (i_val, x));
                            top.truncate(k_keep);
                        }
                    }
                }
            }
            top
        })
        .flatten()
        .collect();
    candidates.sort_by(|a, b| {
        b.0.total_cmp(&a.0).then_with(|| {
            a.1.iter()
                .zip(&b.1)
                .fold(std::cmp::Ordering::Equal, |o, (x, y)| {
                    o.then(x.total_cmp(y))
                })
        })
    });
    candidates.truncate(k_keep);

    // stage 2: simplex refinement with a small seeded jitter per restart
    let mut rng = stats::seeded_rng(seed);
    let nm_opts = NelderMeadOptions {
        max_iter: 4000,
        x_tol: 1e-7,
        f_tol: 1e-15,
        initial_step: 2.0_f64.to_radians(),
    };
    let mut best: Option<(f64, [f64; 4])> = None;
    for &(_, start) in &candidates {
        let jitter: Vec<f64> = (0..4)
            .map(|_| rng.gen_range(-0.1_f64..0.1_f64).to_radians())
            .collect();
        let mut simplex = Vec::with_capacity(5);
        let x0: Vec<f64> = start.iter().zip(&jitter).map(|(s, j)| s + j).collect();
        simplex.push(x0.clone());
        for d in 0..4 {
            let mut v = x0.clone();
            v[d] += nm_opts.initial_step;
            simplex.push(v);
        }
        let result = minimize_simplex(
            |x| -fast.i_value(&[x[0], x[1], x[2], x[3]]),
            simplex,
            &nm_opts,
        );
        let x = HardySettings::from_array([result.x[0], result.x[1], result.x[2], result.x[3]])
            .reduced()
            .as_array();
        let i_val = -result.f;
        let better = match &best {
            None => true,
            Some((bi, bx)) => {
                i_val > bi + 1e-12 || ((i_val - bi).abs() <= 1e-12 && lex_less(&x, bx))
            }
        };
        if better {
            best = Some((i_val, x));
        }
    }
    let (best_i, best_x) = best.expect("at least one restart");

    // canonicalize across the symmetry orbit, keeping only images that
    // really leave I unchanged on this state
    let found = HardySettings::from_array(best_x);
    let mut canonical = found.reduced();
    for img in symmetry_orbit(&found) {
        let img_i = fast.i_value(&img.as_array());
        if (img_i - best_i).abs() <= 1e-10 && lex_less(&img.as_array(), &canonical.as_array()) {
            canonical = img;
        }
    }
    let i_reported = hardy_evaluate(rho, &canonical)?.i_value;
    Ok((canonical, i_reported))
}

/// White-noise robustness of a violation: the p where
/// I(p·|GHZ⟩⟨GHZ| + (1−p)·I/16) crosses zero, found by bisection, and the
/// corresponding GHZ fidelity p + (1−p)/16.
pub fn white_noise_threshold(settings: &HardySettings) -> Result<(f64, f64)> {
    let ghz = ghz_state(N_QUBITS)?.to_density_matrix();
    let i_pure = hardy_evaluate(&ghz, settings)?.i_value;
    if i_pure <= 0.0 {
        return Err(Error::NoViolationThreshold { i_value: i_pure });
    }
    let i_at =
        |p: f64| -> Result<f64> { Ok(hardy_evaluate(&white_noise(&ghz, p)?, settings)?.i_value) };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if i_at(mid)? >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let p_star = 0.5 * (lo + hi);
    let fidelity_star = p_star + (1.0 - p_star) / DIM as f64;
    Ok((p_star, fidelity_star))
}

/// Counts for one of the eight measurement settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermCounts {
    pub label: String,
    pub time_s: f64,
    /// 16 outcomes; bit 1 means that party's named projector fired, so the
    /// all-ones outcome 1111 estimates the term.
    pub counts: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HardySimulation {
    pub result: HardyResult,
    pub counts: Vec<TermCounts>,
}

fn term_estimates(
    groups: &[Vec<f64>],
    efficiencies: Option<&DetectorEfficiencies>,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(N_TERMS + 1);
    for (t, counts) in groups.iter().enumerate() {
        let corrected: Vec<f64> = counts
            .iter()
            .enumerate()
            .map(|(o, &c)| c / efficiencies.map_or(1.0, |e| e.outcome_factor(o)))
            .collect();
        let total: f64 = corrected.iter().sum();
        if total <= 0.0 {
            return Err(Error::LowStatistics {
                context: format!("no events in setting '{}'", TERM_LABELS[t]),
            });
        }
        out.push(corrected[DIM - 1] / total);
    }
    let i_value = out[0] - out[1..].iter().sum::<f64>();
    out.push(i_value);
    Ok(out)
}

/// Simulates the eight-setting counting experiment with Poissonian
/// statistics; term estimates are efficiency-corrected all-ones fractions,
/// and uncertainties come from a parametric bootstrap.
pub fn simulate_hardy_counts(
    rho: &DensityMatrix,
    settings: &HardySettings,
    times_s: &[f64; N_TERMS],
    rate_per_s: f64,
    efficiencies: Option<&DetectorEfficiencies>,
    n_resamples: usize,
    seed: u64,
) -> Result<HardySimulation> {
    if rho.n_qubits() != N_QUBITS {
        return Err(Error::DimensionMismatch {
            expected: DIM,
            got: rho.dim(),
        });
    }
    if rate_per_s <= 0.0 {
        return Err(Error::NonPositive {
            name: "rate_per_s",
            value: rate_per_s,
        });
    }
    for &t in times_s {
        if t <= 0.0 {
            return Err(Error::NonPositive {
                name: "time_s",
                value: t,
            });
        }
    }
    if let Some(eff) = efficiencies {
        if eff.n_qubits() != N_QUBITS {
            return Err(Error::DimensionMismatch {
                expected: N_QUBITS,
                got: eff.n_qubits(),
            });
        }
    }

    let mut rng = stats::seeded_rng(seed);
    let mut groups: Vec<Vec<f64>> = Vec::with_capacity(N_TERMS);
    let mut counts_out = Vec::with_capacity(N_TERMS);
    for t in 0..N_TERMS {
        let projs = settings.term_projectors(t);
        let mut counts = Vec::with_capacity(DIM);
        for o in 0..DIM {
            let singles: Vec<StateVector> = (0..N_QUBITS)
                .map(|q| {
                    if bit_of(o, q, N_QUBITS) == 1 {
                        projs[q].vector()
                    } else {
                        projs[q].orthocomplement().vector()
                    }
                })
                .collect();
            let refs: Vec<&StateVector> = singles.iter().collect();
            let v = crate::quantum::tensor_states(&refs)?;
            let p = rho.fidelity(&v)?;
            let eta = efficiencies.map_or(1.0, |e| e.outcome_factor(o));
            counts.push(stats::sample_poisson(
                &mut rng,
                rate_per_s * times_s[t] * p * eta,
            ));
        }
        counts_out.push(TermCounts {
            label: TERM_LABELS[t].to_string(),
            time_s: times_s[t],
            counts: counts.clone(),
        });
        groups.push(counts);
    }

    let point = term_estimates(&groups, efficiencies)?;
    let boot = stats::poisson_bootstrap_multi(
        &groups,
        |resampled| term_estimates(resampled, efficiencies),
        n_resamples,
        stats::derive_seed(seed, 0x44A2),
    )?;

    let mut terms = [0.0; N_TERMS];
    let mut term_sigmas = [0.0; N_TERMS];
    for t in 0..N_TERMS {
        terms[t] = point[t];
        term_sigmas[t] = boot[t].1;
    }
    let i_value = point[N_TERMS];
    let i_sigma = boot[N_TERMS].1;
    let significance = i_value / i_sigma.max(f64::MIN_POSITIVE);
    Ok(HardySimulation {
        result: HardyResult {
            terms,
            i_value,
            uncertainties: Some(HardyUncertainties {
                term_sigmas,
                i_sigma,
                significance,
                n_resamples,
            }),
        },
        counts: counts_out,
    })
}
