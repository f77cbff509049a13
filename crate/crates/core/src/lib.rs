//! Simulation of a single-loop fluxonium under static and time-dependent
//! external flux.
//!
//! The crate compares the two ways of placing the external flux in the
//! circuit Hamiltonian (on the inductor, or on the junction) and shows how
//! the junction placement goes wrong once the flux varies in time unless the
//! `dΦ/dt` term is kept:
//!
//! * [`operators`]: oscillator basis and the `φ`, `n`, `cos φ`, `sin φ` matrices.
//! * [`hamiltonian`]: Hamiltonians, spectra, and the classical potential.
//! * [`sudden`]: overlap predictions for an instantaneous flux step.
//! * [`dynamics`]: time-domain propagation through a finite flux ramp.
//! * [`fit`]: recovery of `(E_C, E_J, E_L)` from transition frequencies.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the double-precision instantiation used by the
//! command-line tool.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod fit;
pub mod hamiltonian;
pub mod operators;
pub mod scalar;
pub mod sudden;

pub use dynamics::{
    final_populations, flux_profile, gauge_transform, propagate, propagate_detailed, FluxPulse,
    GaugeDirection, PropagationReport, Propagator, PropagatorConfig, PulseShape, StateVector,
};
pub use error::{Error, Result};
pub use fit::{fit_params, model_frequency, FitOptions, FitResult, SpectroscopyPoint};
pub use hamiltonian::{
    build_static, build_timedep, diagonalize, spectrum_vs_flux, CircuitParams, ExternalFlux,
    FluxAllocation, Frame, Spectrum, SpectrumRow,
};
pub use operators::{make_basis, BasisSpec, OperatorMatrix, OperatorSet};
pub use scalar::Real;
pub use sudden::{
    apply_confusion, mixed_probabilities, overlap_probabilities, simulate_experiment,
    ConfusionMatrix, OccupationRow, OccupationTable, PreparationModel, SuddenExperimentConfig,
};

pub type CircuitParams64 = CircuitParams<f64>;
pub type BasisSpec64 = BasisSpec<f64>;
pub type Spectrum64 = Spectrum<f64>;
pub type StateVector64 = StateVector<f64>;
pub type FluxPulse64 = FluxPulse<f64>;
pub type OccupationTable64 = OccupationTable<f64>;
pub type FitResult64 = FitResult<f64>;

pub type CircuitParams32 = CircuitParams<f32>;
pub type BasisSpec32 = BasisSpec<f32>;
pub type Spectrum32 = Spectrum<f32>;
