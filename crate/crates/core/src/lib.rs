//! Squeezing the thermal motion of a levitated nanoparticle by switching the
//! trap frequency.
//!
//! The crate is organised bottom-up:
//!
//! * [`squeeze`]: exact, noiseless pulse algebra on the quadratures of the
//!   reference trap mode.
//! * [`noise`]: analytic covariance propagation including pulse dephasing.
//! * [`sim`]: a classical Langevin ensemble simulator producing position traces.
//! * [`sigproc`]: filtering, phase-space reconstruction, spectra and
//!   Lorentzian fits.
//! * [`fit`]: least-squares fitting of the dephasing model to squeezing curves.
//! * [`config`], [`pipeline`] and [`commands`]: configuration, the analysis
//!   chain and the command-line experiment runner.

pub mod commands;
pub mod config;
pub mod error;
pub mod fit;
pub mod lm;
pub mod mat2;
pub mod noise;
pub mod pipeline;
pub mod sigproc;
pub mod sim;
pub mod squeeze;
pub mod units;

pub use error::{Error, Result};
pub use mat2::Mat2;
pub use noise::{CovarianceState, DephasingModel, ThermalParams};
pub use squeeze::{PulseSchedule, QuadratureMap, Segment, SegmentKind, TrapPair};
