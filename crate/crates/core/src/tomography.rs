//! Over-complete quantum state tomography: all 3^n local Pauli settings,
//! Poissonian count simulation, iterative maximum-likelihood reconstruction,
//! and parametric-bootstrap uncertainties.
//!
//! Outcome convention: outcomes are indexed by bitstrings (qubit 0 = most
//! significant bit); bit 0 selects the first eigenstate of the qubit's basis
//! tag — |H⟩ for Z, |+⟩ for X, |R⟩ = (|0⟩ + i|1⟩)/√2 for Y.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{bit_of, DensityMatrix, EigenSign, PauliAxis, StateVector};
use crate::stats;

/// Per-qubit basis tags of one joint measurement setting.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TomographySetting {
    bases: Vec<PauliAxis>,
}

impl TomographySetting {
    pub fn new(bases: Vec<PauliAxis>) -> Self {
        Self { bases }
    }

    pub fn n_qubits(&self) -> usize {
        self.bases.len()
    }

    pub fn bases(&self) -> &[PauliAxis] {
        &self.bases
    }

    /// The product eigenvector selected by an outcome bitstring.
    pub fn outcome_vector(&self, outcome: usize) -> StateVector {
        let singles: Vec<StateVector> = self
            .bases
            .iter()
            .enumerate()
            .map(|(q, axis)| {
                let sign = if bit_of(outcome, q, self.bases.len()) == 0 {
                    EigenSign::Plus
                } else {
                    EigenSign::Minus
                };
                axis.eigenvector(sign)
            })
            .collect();
        let refs: Vec<&StateVector> = singles.iter().collect();
        crate::quantum::tensor_states(&refs).expect("single-qubit factors")
    }

    fn outcome_ket_flat(&self, outcome: usize) -> Vec<Complex64> {
        let n = self.bases.len();
        let mut out = vec![Complex64::new(1.0, 0.0)];
        for (q, axis) in self.bases.iter().enumerate() {
            let sign = if bit_of(outcome, q, n) == 0 {
                EigenSign::Plus
            } else {
                EigenSign::Minus
            };
            let b = axis.eigenvector(sign);
            let mut next = Vec::with_capacity(out.len() * 2);
            for &a in &out {
                next.push(a * b.amplitude(0));
                next.push(a * b.amplitude(1));
            }
            out = next;
        }
        out
    }
}

impl std::fmt::Display for TomographySetting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for axis in &self.bases {
            write!(f, "{}", axis.as_char())?;
        }
        Ok(())
    }
}

impl std::str::FromStr for TomographySetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bases = s.chars().map(PauliAxis::from_char).collect::<Result<_>>()?;
        Ok(Self { bases })
    }
}

/// All 3^n settings in lexicographic order (X < Y < Z).
pub fn generate_settings(n_qubits: usize) -> Vec<TomographySetting> {
    let total = 3usize.pow(n_qubits as u32);
    (0..total)
        .map(|mut idx| {
            let mut bases = vec![PauliAxis::X; n_qubits];
            for q in (0..n_qubits).rev() {
                bases[q] = PauliAxis::ALL[idx % 3];
                idx /= 3;
            }
            TomographySetting { bases }
        })
        .collect()
}

/// Per-detector efficiencies: one factor per (qubit, outcome bit).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorEfficiencies {
    eta: Vec<[f64; 2]>,
}

impl DetectorEfficiencies {
    pub fn new(eta: Vec<[f64; 2]>) -> Result<Self> {
        for pair in &eta {
            for &e in pair {
                if !(e > 0.0 && e <= 1.0) {
                    return Err(Error::ParameterOutOfRange {
                        name: "efficiency",
                        value: e,
                        min: 0.0,
                        max: 1.0,
                    });
                }
            }
        }
        Ok(Self { eta })
    }

    pub fn uniform(n_qubits: usize) -> Self {
        Self {
            eta: vec![[1.0, 1.0]; n_qubits],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.eta.len()
    }

    pub fn factor(&self, qubit: usize, bit: usize) -> f64 {
        self.eta[qubit][bit]
    }

    /// Product of the per-detector factors selected by an outcome bitstring.
    pub fn outcome_factor(&self, outcome: usize) -> f64 {
        let n = self.eta.len();
        (0..n).map(|q| self.eta[q][bit_of(outcome, q, n)]).product()
    }
}

/// Counts for one setting.
#[derive(Clone, Debug, PartialEq)]
pub struct SettingRecord {
    pub setting: TomographySetting,
    /// 2^n outcome counts; integral before efficiency correction, real after.
    pub counts: Vec<f64>,
    pub time_s: f64,
}

/// A complete tomography dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct TomographyDataset {
    pub n_qubits: usize,
    pub records: Vec<SettingRecord>,
    pub efficiencies: Option<DetectorEfficiencies>,
    /// Expected fourfold rate used for simulation, when known.
    pub rate_per_s: Option<f64>,
    /// Set once counts have been divided by the detector efficiencies.
    pub corrected: bool,
}

impl TomographyDataset {
    pub fn total_counts(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.counts.iter().sum::<f64>())
            .sum()
    }
}

/// Born-rule outcome probabilities of one setting.
pub fn outcome_probabilities(rho: &DensityMatrix, setting: &TomographySetting) -> Result<Vec<f64>> {
    if setting.n_qubits() != rho.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: 1usize << setting.n_qubits(),
        });
    }
    let dim = rho.dim();
    (0..dim)
        .map(|o| rho.fidelity(&setting.outcome_vector(o)))
        .collect()
}

/// Simulates Poissonian counts for every setting: each outcome draws
/// Poisson(rate · time · probability · efficiency). Deterministic per seed.
pub fn simulate_counts(
    rho: &DensityMatrix,
    settings: &[TomographySetting],
    rate_per_s: f64,
    time_per_setting_s: f64,
    efficiencies: Option<&DetectorEfficiencies>,
    seed: u64,
) -> Result<TomographyDataset> {
    if rate_per_s <= 0.0 {
        return Err(Error::NonPositive {
            name: "rate_per_s",
            value: rate_per_s,
        });
    }
    if time_per_setting_s <= 0.0 {
        return Err(Error::NonPositive {
            name: "time_per_setting_s",
            value: time_per_setting_s,
        });
    }
    if let Some(eff) = efficiencies {
        if eff.n_qubits() != rho.n_qubits() {
            return Err(Error::DimensionMismatch {
                expected: rho.n_qubits(),
                got: eff.n_qubits(),
            });
        }
    }
    let mut rng = stats::seeded_rng(seed);
    let dim = rho.dim();
    let mut records = Vec::with_capacity(settings.len());
    for setting in settings {
        let probs = outcome_probabilities(rho, setting)?;
        let counts: Vec<f64> = (0..dim)
            .map(|o| {
                let eta = efficiencies.map_or(1.0, |e| e.outcome_factor(o));
                stats::sample_poisson(&mut rng, rate_per_s * time_per_setting_s * probs[o] * eta)
            })
            .collect();
        records.push(SettingRecord {
            setting: setting.clone(),
            counts,
            time_s: time_per_setting_s,
        });
    }
    Ok(TomographyDataset {
        n_qubits: rho.n_qubits(),
        records,
        efficiencies: efficiencies.cloned(),
        rate_per_s: Some(rate_per_s),
        corrected: false,
    })
}

/// Divides every count by its outcome's detector-efficiency product,
/// yielding real-valued corrected counts.
pub fn efficiency_correct(dataset: &TomographyDataset) -> Result<TomographyDataset> {
    let eff = dataset
        .efficiencies
        .as_ref()
        .ok_or(Error::MissingEfficiencies)?;
    if dataset.corrected {
        return Err(Error::MalformedInput {
            context: "dataset is already efficiency-corrected".into(),
        });
    }
    let mut out = dataset.clone();
    for record in &mut out.records {
        for (o, c) in record.counts.iter_mut().enumerate() {
            *c /= eff.outcome_factor(o);
        }
    }
    out.corrected = true;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Maximum-likelihood reconstruction
// ---------------------------------------------------------------------------

/// Knobs of the iterative R·ρ·R reconstruction.
#[derive(Clone, Copy, Debug)]
pub struct MleOptions {
    /// Dilution ε of the update (I + εR)ρ(I + εR).
    pub dilution: f64,
    /// Convergence threshold on the relative log-likelihood gain.
    pub tol: f64,
    pub max_iter: usize,
    /// Verify the settings span the full operator space before iterating.
    pub completeness_check: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            dilution: 0.1,
            tol: 1e-10,
            max_iter: 5000,
            completeness_check: true,
        }
    }
}

/// Output of [`mle_reconstruct`].
#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after each iterate; non-decreasing by construction.
    pub log_likelihood_trace: Vec<f64>,
}

/// Errors unless the POVM elements of all settings span the full space of
/// Hermitian operators.
pub fn check_informationally_complete(
    settings: &[TomographySetting],
    n_qubits: usize,
) -> Result<()> {
    let d = 1usize << n_qubits;
    let dim_ops = d * d;
    // Gram matrix of the real vectorizations of all projectors
    let mut gram = nalgebra::DMatrix::<f64>::zeros(dim_ops, dim_ops);
    let mut a = vec![0.0; dim_ops];
    for setting in settings {
        for o in 0..d {
            let v = setting.outcome_ket_flat(o);
            // Hermitian vectorization: diagonal, then √2·Re / √2·Im of uppers
            let mut idx = 0;
            for amp in &v {
                a[idx] = (amp * amp.conj()).re;
                idx += 1;
            }
            let sqrt2 = std::f64::consts::SQRT_2;
            for i in 0..d {
                for j in (i + 1)..d {
                    let e = v[i] * v[j].conj();
                    a[idx] = sqrt2 * e.re;
                    a[idx + 1] = sqrt2 * e.im;
                    idx += 2;
                }
            }
            for i in 0..dim_ops {
                if a[i] == 0.0 {
                    continue;
                }
                for j in 0..dim_ops {
                    gram[(i, j)] += a[i] * a[j];
                }
            }
        }
    }
    let eigs = gram.symmetric_eigenvalues();
    let max_eig = eigs.iter().fold(0.0f64, |m, &e| m.max(e));
    let rank = eigs.iter().filter(|&&e| e > 1e-9 * max_eig).count();
    if rank < dim_ops {
        return Err(Error::NotInformationallyComplete {
            rank,
            required: dim_ops,
        });
    }
    Ok(())
}

/// Reconstructs the density matrix by diluted R·ρ·R fixed-point iteration
/// of the Poissonian/multinomial likelihood, starting from I/d. Every
/// iterate is Hermitian, unit-trace and positive semidefinite by
/// construction.
pub fn mle_reconstruct(
    dataset: &TomographyDataset,
    opts: &MleOptions,
) -> Result<ReconstructionResult> {
    let n = dataset.n_qubits;
    let d = 1usize << n;
    if dataset.records.is_empty() {
        return Err(Error::MissingData {
            context: "empty tomography dataset".into(),
        });
    }
    for record in &dataset.records {
        if record.setting.n_qubits() != n || record.counts.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: record.counts.len(),
            });
        }
    }
    if opts.completeness_check {
        let settings: Vec<TomographySetting> =
            dataset.records.iter().map(|r| r.setting.clone()).collect();
        check_informationally_complete(&settings, n)?;
    }

    // flatten entries with nonzero counts; zero counts drop out of both the
    // likelihood and the R operator
    let mut kets: Vec<Complex64> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    for record in &dataset.records {
        for o in 0..d {
            let c = record.counts[o];
            if c > 0.0 {
                kets.extend(record.setting.outcome_ket_flat(o));
                counts.push(c);
            }
        }
    }
    let n_total: f64 = counts.iter().sum();
    if n_total <= 0.0 {
        return Err(Error::LowStatistics {
            context: "dataset contains no events".into(),
        });
    }
    let n_entries = counts.len();

    let zero = Complex64::new(0.0, 0.0);
    let mut rho = vec![zero; d * d];
    for i in 0..d {
        rho[i * d + i] = Complex64::new(1.0 / d as f64, 0.0);
    }

    let mut probs = vec![0.0f64; n_entries];
    let mut r_op = vec![zero; d * d];
    let mut t_op = vec![zero; d * d];
    let mut tmp = vec![zero; d * d];

    let mut trace_log = Vec::new();
    let mut prev_loglik: Option<f64> = None;
    let mut iterations = 0usize;
    let mut converged = false;
    let mut log_likelihood;

    loop {
        // p_e = ⟨v_e| ρ |v_e⟩ and the log-likelihood Σ n_e ln p_e
        log_likelihood = 0.0;
        for e in 0..n_entries {
            let v = &kets[e * d..(e + 1) * d];
            let mut p = 0.0;
            for i in 0..d {
                let mut w = zero;
                let row = &rho[i * d..(i + 1) * d];
                for j in 0..d {
                    w += row[j] * v[j];
                }
                p += (v[i].conj() * w).re;
            }
            let p = p.max(1e-12);
            probs[e] = p;
            log_likelihood += counts[e] * p.ln();
        }
        trace_log.push(log_likelihood);

        if let Some(prev) = prev_loglik {
            let gain = (log_likelihood - prev) / (1.0 + log_likelihood.abs());
            if gain.abs() < opts.tol {
                converged = true;
                break;
            }
        }
        if iterations >= opts.max_iter {
            break;
        }
        prev_loglik = Some(log_likelihood);

        // R = Σ_e (n_e / p_e) |v_e⟩⟨v_e| / N
        r_op.iter_mut().for_each(|c| *c = zero);
        for e in 0..n_entries {
            let v = &kets[e * d..(e + 1) * d];
            let coeff = counts[e] / (probs[e] * n_total);
            for i in 0..d {
                let a = v[i] * coeff;
                let row = &mut r_op[i * d..(i + 1) * d];
                for j in 0..d {
                    row[j] += a * v[j].conj();
                }
            }
        }

        // T = I + εR;  ρ ← TρT† / tr
        let eps = Complex64::new(opts.dilution, 0.0);
        for i in 0..d {
            for j in 0..d {
                t_op[i * d + j] = eps * r_op[i * d + j];
            }
            t_op[i * d + i] += Complex64::new(1.0, 0.0);
        }
        // tmp = T·ρ
        for i in 0..d {
            for j in 0..d {
                let mut acc = zero;
                for k in 0..d {
                    acc += t_op[i * d + k] * rho[k * d + j];
                }
                tmp[i * d + j] = acc;
            }
        }
        // ρ' = tmp·T†
        for i in 0..d {
            for j in 0..d {
                let mut acc = zero;
                for k in 0..d {
                    acc += tmp[i * d + k] * t_op[j * d + k].conj();
                }
                rho[i * d + j] = acc;
            }
        }
        let mut tr = 0.0;
        for i in 0..d {
            tr += rho[i * d + i].re;
        }
        let inv_tr = Complex64::new(1.0 / tr, 0.0);
        for c in rho.iter_mut() {
            *c *= inv_tr;
        }
        // symmetrize away accumulated roundoff
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = (rho[i * d + j] + rho[j * d + i].conj()) * Complex64::new(0.5, 0.0);
                rho[i * d + j] = avg;
                rho[j * d + i] = avg.conj();
            }
            rho[i * d + i] = Complex64::new(rho[i * d + i].re, 0.0);
        }

        iterations += 1;
    }

    let mat = nalgebra::DMatrix::from_fn(d, d, |i, j| rho[i * d + j]);
    Ok(ReconstructionResult {
        rho: DensityMatrix::from_matrix_unchecked(n, mat),
        log_likelihood,
        iterations,
        converged,
        log_likelihood_trace: trace_log,
    })
}

/// Parametric bootstrap of any scalar functional of the dataset: each count
/// is resampled as Poisson(count), the functional re-evaluated, and the
/// sample mean and standard deviation returned.
pub fn bootstrap<F>(
    dataset: &TomographyDataset,
    functional: F,
    n_resamples: usize,
    seed: u64,
) -> Result<(f64, f64)>
where
    F: Fn(&TomographyDataset) -> Result<f64> + Sync,
{
    let groups: Vec<Vec<f64>> = dataset.records.iter().map(|r| r.counts.clone()).collect();
    let stats = stats::poisson_bootstrap_multi(
        &groups,
        |resampled| {
            let mut ds = dataset.clone();
            for (record, counts) in ds.records.iter_mut().zip(resampled) {
                record.counts = counts.clone();
            }
            functional(&ds).map(|v| vec![v])
        },
        n_resamples,
        seed,
    )?;
    Ok(stats[0])
}

// ---------------------------------------------------------------------------
// Counts / efficiencies file formats
// ---------------------------------------------------------------------------

/// Writes the dataset as `setting_index,bases,outcome,count,time_s` rows.
pub fn write_counts_csv<W: std::io::Write>(dataset: &TomographyDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["setting_index", "bases", "outcome", "count", "time_s"])?;
    let n = dataset.n_qubits;
    for (idx, record) in dataset.records.iter().enumerate() {
        for (o, &c) in record.counts.iter().enumerate() {
            w.write_record(&[
                idx.to_string(),
                record.setting.to_string(),
                format!("{o:0width$b}", width = n),
                format!("{c}"),
                format!("{}", record.time_s),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a counts file written by [`write_counts_csv`]. Missing outcome rows
/// default to zero counts.
pub fn read_counts_csv<R: std::io::Read>(reader: R) -> Result<TomographyDataset> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut n_qubits = 0usize;
    let mut records: Vec<SettingRecord> = Vec::new();
    let mut index_of: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 5 {
            return Err(Error::MalformedInput {
                context: format!("expected 5 columns, got {}", row.len()),
            });
        }
        let setting_index: usize = row[0].parse().map_err(|_| Error::MalformedInput {
            context: format!("bad setting_index '{}'", &row[0]),
        })?;
        let setting: TomographySetting = row[1].parse()?;
        if n_qubits == 0 {
            n_qubits = setting.n_qubits();
        }
        if setting.n_qubits() != n_qubits {
            return Err(Error::MalformedInput {
                context: "inconsistent bases length".into(),
            });
        }
        let outcome = usize::from_str_radix(&row[2], 2).map_err(|_| Error::MalformedInput {
            context: format!("bad outcome bitstring '{}'", &row[2]),
        })?;
        if row[2].len() != n_qubits || outcome >= (1 << n_qubits) {
            return Err(Error::MalformedInput {
                context: format!("outcome '{}' does not match {} qubits", &row[2], n_qubits),
            });
        }
        let count: f64 = row[3].parse().map_err(|_| Error::MalformedInput {
            context: format!("bad count '{}'", &row[3]),
        })?;
        if count < 0.0 {
            return Err(Error::MalformedInput {
                context: format!("negative count {count}"),
            });
        }
        let time_s: f64 = row[4].parse().map_err(|_| Error::MalformedInput {
            context: format!("bad time_s '{}'", &row[4]),
        })?;

        let slot = *index_of.entry(setting_index).or_insert_with(|| {
            records.push(SettingRecord {
                setting: setting.clone(),
                counts: vec![0.0; 1 << n_qubits],
                time_s,
            });
            records.len() - 1
        });
        if records[slot].setting != setting {
            return Err(Error::MalformedInput {
                context: format!("setting_index {setting_index} maps to two different bases"),
            });
        }
        records[slot].counts[outcome] = count;
    }
    if records.is_empty() {
        return Err(Error::MissingData {
            context: "counts file contains no rows".into(),
        });
    }
    Ok(TomographyDataset {
        n_qubits,
        records,
        efficiencies: None,
        rate_per_s: None,
        corrected: false,
    })
}

/// Writes `qubit,outcome_bit,efficiency` rows.
pub fn write_efficiencies_csv<W: std::io::Write>(
    eff: &DetectorEfficiencies,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["qubit", "outcome_bit", "efficiency"])?;
    for q in 0..eff.n_qubits() {
        for bit in 0..2 {
            w.write_record(&[
                q.to_string(),
                bit.to_string(),
                format!("{}", eff.factor(q, bit)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_efficiencies_csv<R: std::io::Read>(reader: R) -> Result<DetectorEfficiencies> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let parse_err = |what: &str, val: &str| Error::MalformedInput {
            context: format!("bad {what} '{val}' in efficiencies file"),
        };
        let qubit: usize = row[0].parse().map_err(|_| parse_err("qubit", &row[0]))?;
        let bit: usize = row[1]
            .parse()
            .map_err(|_| parse_err("outcome_bit", &row[1]))?;
        let eta: f64 = row[2]
            .parse()
            .map_err(|_| parse_err("efficiency", &row[2]))?;
        if bit > 1 {
            return Err(Error::MalformedInput {
                context: format!("outcome_bit {bit} must be 0 or 1"),
            });
        }
        entries.push((qubit, bit, eta));
    }
    let n = entries.iter().map(|&(q, _, _)| q + 1).max().unwrap_or(0);
    let mut eta = vec![[f64::NAN; 2]; n];
    for (q, b, e) in entries {
        eta[q][b] = e;
    }
    if eta.iter().flatten().any(|e| e.is_nan()) {
        return Err(Error::MalformedInput {
            context: "efficiencies file misses a (qubit, outcome_bit) pair".into(),
        });
    }
    DetectorEfficiencies::new(eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{bell_state, ghz_state, BellKind};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn ghz_rho() -> DensityMatrix {
        ghz_state(4).unwrap().to_density_matrix()
    }

    fn exact_dataset(rho: &DensityMatrix, scale: f64) -> TomographyDataset {
        // "counts" set to exact expected values
        let settings = generate_settings(rho.n_qubits());
        let records = settings
            .iter()
            .map(|s| SettingRecord {
                setting: s.clone(),
                counts: outcome_probabilities(rho, s)
                    .unwrap()
                    .iter()
                    .map(|p| p * scale)
                    .collect(),
                time_s: 1.0,
            })
            .collect();
        TomographyDataset {
            n_qubits: rho.n_qubits(),
            records,
            efficiencies: None,
            rate_per_s: None,
            corrected: false,
        }
    }

    #[test]
    fn setting_enumeration() {
        assert_eq!(generate_settings(4).len(), 81);
        let one = generate_settings(1);
        assert_eq!(one.len(), 3);
        assert_eq!(one[0].to_string(), "X");
        assert_eq!(one[1].to_string(), "Y");
        assert_eq!(one[2].to_string(), "Z");
        let two = generate_settings(2);
        assert_eq!(two.len(), 9);
        assert_eq!(two[0].to_string(), "XX");
        assert_eq!(two[8].to_string(), "ZZ");
    }

    #[test]
    fn ghz_outcome_probabilities() {
        let rho = ghz_rho();
        let zzzz: TomographySetting = "ZZZZ".parse().unwrap();
        let p = outcome_probabilities(&rho, &zzzz).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[15], 0.5, epsilon = 1e-12);
        for &middle in &p[1..15] {
            assert_abs_diff_eq!(middle, 0.0, epsilon = 1e-12);
        }

        let xxxx: TomographySetting = "XXXX".parse().unwrap();
        let p = outcome_probabilities(&rho, &xxxx).unwrap();
        for (o, &prob) in p.iter().enumerate() {
            let expected = if o.count_ones() % 2 == 0 { 0.125 } else { 0.0 };
            assert_abs_diff_eq!(prob, expected, epsilon = 1e-12);
        }

        let mixed = DensityMatrix::maximally_mixed(4);
        for s in generate_settings(4) {
            let p = outcome_probabilities(&mixed, &s).unwrap();
            for &prob in &p {
                assert_abs_diff_eq!(prob, 1.0 / 16.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn probabilities_reject_mismatched_setting() {
        let rho = ghz_rho();
        let two_qubit: TomographySetting = "XZ".parse().unwrap();
        assert!(matches!(
            outcome_probabilities(&rho, &two_qubit),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn counts_csv_rejects_malformed_rows() {
        let cases = [
            // unknown basis tag
            "setting_index,bases,outcome,count,time_s\n0,QZ,00,5,1.0\n",
            // outcome length does not match the register
            "setting_index,bases,outcome,count,time_s\n0,XZ,000,5,1.0\n",
            // negative count
            "setting_index,bases,outcome,count,time_s\n0,XZ,00,-2,1.0\n",
            // one index bound to two different settings
            "setting_index,bases,outcome,count,time_s\n0,XZ,00,5,1.0\n0,ZZ,01,5,1.0\n",
            // empty file
            "setting_index,bases,outcome,count,time_s\n",
        ];
        for text in cases {
            assert!(
                read_counts_csv(text.as_bytes()).is_err(),
                "accepted: {text}"
            );
        }
    }

    #[test]
    fn efficiencies_csv_requires_every_detector() {
        let text = "qubit,outcome_bit,efficiency\n0,0,0.9\n0,1,0.8\n1,0,0.7\n";
        assert!(read_efficiencies_csv(text.as_bytes()).is_err());
        let bad_bit = "qubit,outcome_bit,efficiency\n0,2,0.9\n";
        assert!(read_efficiencies_csv(bad_bit.as_bytes()).is_err());
        let bad_eta = "qubit,outcome_bit,efficiency\n0,0,1.5\n0,1,0.9\n";
        assert!(read_efficiencies_csv(bad_eta.as_bytes()).is_err());
    }

    #[test]
    fn probabilities_normalize_across_all_settings() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let rho = DensityMatrix::random(4, &mut rng);
        for s in generate_settings(4) {
            let p = outcome_probabilities(&rho, &s).unwrap();
            assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn simulation_basics() {
        let rho = ghz_rho();
        let settings = generate_settings(4);
        let ds = simulate_counts(&rho, &settings, 0.42, 267.0, None, 7).unwrap();
        assert_eq!(ds.records.len(), 81);
        // ≈ 0.42·267·81 ≈ 9083 expected events
        let total = ds.total_counts();
        let expected = 0.42 * 267.0 * 81.0;
        assert!(
            (total - expected).abs() < 5.0 * expected.sqrt(),
            "total {total}"
        );

        // probability-0 outcomes never fire
        for rec in &ds.records {
            if rec.setting.to_string() == "ZZZZ" {
                for &c in &rec.counts[1..15] {
                    assert_eq!(c, 0.0);
                }
            }
        }

        // determinism
        let again = simulate_counts(&rho, &settings, 0.42, 267.0, None, 7).unwrap();
        assert_eq!(ds, again);
        let other = simulate_counts(&rho, &settings, 0.42, 267.0, None, 8).unwrap();
        assert_ne!(ds, other);

        assert!(simulate_counts(&rho, &settings, -1.0, 267.0, None, 7).is_err());
        assert!(simulate_counts(&rho, &settings, 0.42, 0.0, None, 7).is_err());
    }

    #[test]
    fn efficiency_correction() {
        let rho = bell_state(BellKind::PhiPlus).to_density_matrix();
        let settings = generate_settings(2);
        let eff = DetectorEfficiencies::new(vec![[0.5, 1.0], [1.0, 1.0]]).unwrap();
        let ds = simulate_counts(&rho, &settings, 5.0, 100.0, Some(&eff), 3).unwrap();
        let corrected = efficiency_correct(&ds).unwrap();
        assert!(corrected.corrected);
        // outcome 00 was thinned by 0.5, so correction doubles it
        for (raw, fixed) in ds.records.iter().zip(&corrected.records) {
            assert_abs_diff_eq!(fixed.counts[0], raw.counts[0] * 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(fixed.counts[3], raw.counts[3], epsilon = 1e-12);
        }
        // uniform efficiencies are the identity
        let uniform = DetectorEfficiencies::uniform(2);
        let ds2 = simulate_counts(&rho, &settings, 5.0, 100.0, Some(&uniform), 3).unwrap();
        let same = efficiency_correct(&ds2).unwrap();
        for (a, b) in ds2.records.iter().zip(&same.records) {
            assert_eq!(a.counts, b.counts);
        }

        assert!(efficiency_correct(&corrected).is_err());
        let no_eff = simulate_counts(&rho, &settings, 5.0, 100.0, None, 3).unwrap();
        assert!(matches!(
            efficiency_correct(&no_eff),
            Err(Error::MissingEfficiencies)
        ));
    }

    #[test]
    fn efficiency_correction_recovers_means() {
        // simulate(η) then correct(η) matches efficiency-1 expectations in
        // the mean over seeds
        let rho = bell_state(BellKind::PhiPlus).to_density_matrix();
        let settings = generate_settings(2);
        let eff = DetectorEfficiencies::new(vec![[0.6, 0.9], [0.8, 0.7]]).unwrap();
        let mut mean00 = 0.0;
        let n_seeds = 100;
        for seed in 0..n_seeds {
            let ds = simulate_counts(&rho, &settings, 10.0, 50.0, Some(&eff), seed).unwrap();
            let corrected = efficiency_correct(&ds).unwrap();
            mean00 += corrected.records[8].counts[0]; // ZZ setting, outcome 00
        }
        mean00 /= n_seeds as f64;
        let expected: f64 = 10.0 * 50.0 * 0.5; // p(00) = 1/2 for |φ+⟩ in ZZ
        let sigma =
            (expected / (0.6 * 0.8)).sqrt() / (n_seeds as f64).sqrt() / (0.6f64 * 0.8).sqrt();
        assert!(
            (mean00 - expected).abs() < 4.0 * sigma * (0.6 * 0.8),
            "mean {mean00} vs {expected}"
        );
    }

    #[test]
    fn mle_uniform_data_is_a_fixed_point() {
        let ds = exact_dataset(&DensityMatrix::maximally_mixed(4), 160.0);
        let result = mle_reconstruct(&ds, &MleOptions::default()).unwrap();
        assert!(result.converged);
        assert!(result.iterations <= 3);
        let target = DensityMatrix::maximally_mixed(4);
        let dev = (result.rho.matrix() - target.matrix())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-6, "max deviation {dev}");
    }

    #[test]
    fn mle_recovers_bell_state_from_exact_frequencies() {
        let rho = bell_state(BellKind::PhiPlus).to_density_matrix();
        let ds = exact_dataset(&rho, 1000.0);
        let result = mle_reconstruct(&ds, &MleOptions::default()).unwrap();
        assert!(result.converged);
        let f = result.rho.fidelity(&bell_state(BellKind::PhiPlus)).unwrap();
        assert!(f >= 0.9999, "fidelity {f}");
        // the log-likelihood never decreases along the trace
        for pair in result.log_likelihood_trace.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-9 * (1.0 + pair[0].abs()),
                "log-likelihood decreased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn mle_monotone_on_noisy_counts() {
        let rho = ghz_rho();
        let settings = generate_settings(4);
        let ds = simulate_counts(&rho, &settings, 0.42, 100.0, None, 5).unwrap();
        let result = mle_reconstruct(&ds, &MleOptions::default()).unwrap();
        assert!(result.converged);
        for pair in result.log_likelihood_trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-9 * (1.0 + pair[0].abs()));
        }
        let f = result.rho.fidelity(&ghz_state(4).unwrap()).unwrap();
        assert!(f > 0.9, "fidelity {f}");
    }

    #[test]
    fn mle_rejects_incomplete_settings() {
        let rho = bell_state(BellKind::PhiPlus).to_density_matrix();
        let zz: TomographySetting = "ZZ".parse().unwrap();
        let ds = TomographyDataset {
            n_qubits: 2,
            records: vec![SettingRecord {
                setting: zz.clone(),
                counts: outcome_probabilities(&rho, &zz)
                    .unwrap()
                    .iter()
                    .map(|p| p * 100.0)
                    .collect(),
                time_s: 1.0,
            }],
            efficiencies: None,
            rate_per_s: None,
            corrected: false,
        };
        assert!(matches!(
            mle_reconstruct(&ds, &MleOptions::default()),
            Err(Error::NotInformationallyComplete { .. })
        ));
    }

    #[test]
    fn mle_iteration_cap_reports_nonconvergence() {
        let rho = ghz_rho();
        let settings = generate_settings(4);
        let ds = simulate_counts(&rho, &settings, 0.42, 100.0, None, 5).unwrap();
        let result = mle_reconstruct(
            &ds,
            &MleOptions {
                max_iter: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!result.converged);
        assert_eq!(result.iterations, 2);
    }

    #[test]
    fn reconstruction_commutes_with_qubit_relabeling() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let rho = DensityMatrix::random(2, &mut rng);
        let ds = exact_dataset(&rho, 500.0);

        // swap the two qubits in every setting and outcome
        let swapped_records: Vec<SettingRecord> = ds
            .records
            .iter()
            .map(|rec| {
                let bases = vec![rec.setting.bases()[1], rec.setting.bases()[0]];
                let mut counts = vec![0.0; 4];
                for o in 0..4 {
                    let swapped = ((o & 1) << 1) | (o >> 1);
                    counts[swapped] = rec.counts[o];
                }
                SettingRecord {
                    setting: TomographySetting::new(bases),
                    counts,
                    time_s: rec.time_s,
                }
            })
            .collect();
        let swapped = TomographyDataset {
            records: swapped_records,
            ..ds.clone()
        };

        let r1 = mle_reconstruct(&ds, &MleOptions::default()).unwrap();
        let r2 = mle_reconstruct(&swapped, &MleOptions::default()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let pi = ((i & 1) << 1) | (i >> 1);
                let pj = ((j & 1) << 1) | (j >> 1);
                let diff = (r1.rho.entry(i, j) - r2.rho.entry(pi, pj)).norm();
                assert!(diff < 1e-8, "entry ({i},{j}) differs by {diff}");
            }
        }
    }

    #[test]
    fn xxxx_parity_matches_witness_m0() {
        let rho = ghz_rho();
        let settings = generate_settings(4);
        let ds = simulate_counts(&rho, &settings, 0.42, 267.0, None, 21).unwrap();
        let xxxx = ds
            .records
            .iter()
            .find(|r| r.setting.to_string() == "XXXX")
            .unwrap();
        let total: f64 = xxxx.counts.iter().sum();
        let signed: f64 = xxxx
            .counts
            .iter()
            .enumerate()
            .map(|(o, &c)| if o.count_ones() % 2 == 0 { c } else { -c })
            .sum();
        let m0 = signed / total;
        // ⟨M₀⟩ = 1 on the ideal state; the estimator can only fluctuate below
        assert!(m0 > 1.0 - 4.0 / total.sqrt(), "m0 {m0}");
    }

    #[test]
    fn bootstrap_fidelity_smoke() {
        let rho = bell_state(BellKind::PhiPlus).to_density_matrix();
        let settings = generate_settings(2);
        let ds = simulate_counts(&rho, &settings, 10.0, 30.0, None, 2).unwrap();
        let (mean, std) = bootstrap(
            &ds,
            |d| {
                let r = mle_reconstruct(
                    d,
                    &MleOptions {
                        completeness_check: false,
                        ..Default::default()
                    },
                )?;
                r.rho.fidelity(&bell_state(BellKind::PhiPlus))
            },
            40,
            9,
        )
        .unwrap();
        assert!(mean > 0.9 && mean <= 1.0, "mean {mean}");
        assert!(std > 0.0 && std < 0.1, "std {std}");
    }

    #[test]
    fn counts_csv_round_trip() {
        let rho = ghz_rho();
        let settings = generate_settings(4);
        let ds = simulate_counts(&rho, &settings, 0.42, 50.0, None, 13).unwrap();
        let mut buf = Vec::new();
        write_counts_csv(&ds, &mut buf).unwrap();
        let back = read_counts_csv(buf.as_slice()).unwrap();
        assert_eq!(back.n_qubits, 4);
        assert_eq!(back.records.len(), ds.records.len());
        for (a, b) in ds.records.iter().zip(&back.records) {
            assert_eq!(a.setting, b.setting);
            assert_eq!(a.counts, b.counts);
            assert_eq!(a.time_s, b.time_s);
        }
    }

    #[test]
    fn efficiencies_csv_round_trip() {
        let eff = DetectorEfficiencies::new(vec![[0.9, 0.85], [0.8, 0.95], [1.0, 0.7], [0.6, 1.0]])
            .unwrap();
        let mut buf = Vec::new();
        write_efficiencies_csv(&eff, &mut buf).unwrap();
        let back = read_efficiencies_csv(buf.as_slice()).unwrap();
        assert_eq!(eff, back);
    }
}
