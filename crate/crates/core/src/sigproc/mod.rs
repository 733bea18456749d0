//! Estimation pipeline from raw position traces to rms curves, phase-space
//! clouds, spectra and squeezing.
//!
//! Processing order matters: differentiation amplifies out-of-band noise, so
//! traces are band-passed first, then centred, then differentiated
//! ([`prepare_ensemble`]).

mod envelope;
mod ensemble;
mod filter;
mod lorentz;
mod phase_space;
mod psd;

pub use envelope::{fit_variance_envelope, EnvelopeFit};
pub use ensemble::{
    ensemble_mean_trace, estimate_momentum, estimate_momentum_with, rms_trace, subtract_ensemble_mean,
    DerivativeStencil, MomentumEstimate,
};
pub use filter::{bandpass, BandPass, Filtered, DEFAULT_PROTOTYPE_ORDER, SETTLE_ATTENUATION_DB};
pub use lorentz::{initial_guess, lorentzian, lorentzian_fit, LorentzianFit, LorentzianGuess, MIN_PEAK_TO_FLOOR};
pub use phase_space::{
    cloud_covariance, compensate_decay, measure_squeezing, measured_squeezing_db, phase_space_cloud,
    prepare_ensemble, quadrature_scales, window_covariance, PhaseSpaceCloud, PreparedEnsemble, PrepareOptions,
    SqueezingMeasurement, MIN_CLOUD_POINTS,
};
pub use psd::{welch_psd, Psd};
