//! End-to-end simulation of a postselected four-photon GHZ experiment.
//!
//! The crate models the experiment at the polarization-qubit level:
//! two EPR pairs interfere on a polarizing beam splitter acting as a
//! postselected parity-check gate, producing a four-photon GHZ state.
//! On top of that sit phenomenological noise channels, the GHZ
//! entanglement witness, over-complete quantum state tomography with
//! maximum-likelihood reconstruction, entanglement-swapping analysis, and
//! a Hardy-type test of genuine multipartite nonlocality.
//!
//! Modules map one-to-one onto the experiment's building blocks:
//!
//! - [`quantum`] — dense complex linear algebra for n-qubit states;
//! - [`optics`] — EPR sources, wave plates, the PBS parity check, and the
//!   GHZ generation pipeline;
//! - [`noise`] — population / coherence / white-noise channels and their
//!   calibration from witness data;
//! - [`witness`] — the GHZ witness, its local decomposition, and simulated
//!   counting experiments;
//! - [`tomography`] — 3^n-setting datasets, Poissonian count simulation,
//!   iterative MLE reconstruction, and bootstrap errors;
//! - [`swapping`] — Bell-state-measurement outcome maps and conditional
//!   two-photon states;
//! - [`hardy`] — the 2n-setting Hardy-type inequality, settings search, and
//!   white-noise violation threshold;
//! - [`checks`] — the built-in reference checks behind `reproduce-paper`.

pub mod checks;
pub mod error;
pub mod hardy;
pub mod noise;
pub mod optics;
pub mod optim;
pub mod quantum;
pub mod stats;
pub mod swapping;
pub mod tomography;
pub mod witness;

pub use error::{Error, Result};
pub use quantum::{
    bell_state, ghz_state, ghz_state_with_phase, projector_xz, tensor_operators, tensor_states,
    BellKind, DensityMatrix, EigenSign, MeasurementProjector, Operator, PauliAxis, StateVector,
};
