//! Dissipative dynamics and metrology bounds for the quantum Rabi model near
//! its superradiant critical point.
//!
//! The crate is organized bottom-up:
//!
//! * [`operators`]: dense complex matrices, bosonic and qubit operators,
//!   squeezing/displacement and a Hermitian eigensolver.
//! * [`model`]: the Rabi Hamiltonian, its normal/superradiant effective forms,
//!   analytic critical quantities and the labeled low-energy spectrum.
//! * [`dissipators`]: Ohmic baths, dressed jump operators, the non-secular
//!   generator and the effective Lindblad/dephasing generators.
//! * [`dynamics`]: density-matrix integration in the retained eigenbasis.
//! * [`metrology`]: dephased probes, the purification bound `C_Q`, exact QFI
//!   and the phase-precision bound.
//!
//! Energies and rates are measured in the same unit as `omega_c`, which
//! defaults to 1.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dissipators;
pub mod dynamics;
pub mod error;
pub mod metrology;
pub mod model;
pub mod operators;

pub use dissipators::{
    dephasing_generator_np, dephasing_generator_sp, dressed_jump_operators,
    generalized_liouvillian, nonsecular_generator, ohmic_rate, rwa_lindblad_np, rwa_lindblad_sp,
    sp_transition_amplitude, zero_frequency_dephasing, BathChannel, Generator, GeneratorKind,
    JumpOperator, NonsecularOptions, OhmicBath, PowerLawDensity, SpectralDensity,
};
pub use dynamics::{
    coherence_element, evolve, fit_decay_rate, stationarity_check, DecayFit, DensityMatrix,
    IntegratorConfig, Method, ObservableRequest, Trajectory,
};
pub use error::{Error, Result};
pub use metrology::{
    beta_from_dynamics, cq_bound, cq_min, cq_min_numeric, dephased_probe, number_variance,
    optimal_zeta, phase_bound, photon_number_variance, qfi_exact, BetaSource, DephasingStrength,
    MetrologyReport, ProbeState,
};
pub use model::{
    ansatz_state, build_h_np, build_h_rabi, build_h_sp, critical_point_estimate, labeled_spectrum,
    lambda_from_g, phase_quantities, Branch, LabeledSpectrum, Phase, PhaseQuantities, StateLabel,
    SystemParams,
};
pub use operators::{ComplexMatrix, HermitianEigen};

pub use num_complex::Complex64;
