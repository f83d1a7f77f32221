//! Forward-looking calibration engine for a climate-extended credit risk model.
//!
//! Log-GDP is the sum of three cumulative factors: climate-free economic
//! growth `Ỹ_E`, physical climate damage `Ỹ_P` and transition cost `Ỹ_T`.
//! Their yearly dynamics are driven by seven raw parameters ([`params`]).
//! From those the crate derives
//!
//! * closed-form covariances, macro-correlations and correlation matrices of the
//!   centered risk factors ([`analytics`]),
//! * the log-normal GDP distribution and its asymptotic rates ([`gdp_stats`]),
//! * asymptotic net-zero transition probabilities ([`netzero`]),
//! * time-dependent loading factors and conditioned migration matrices for a
//!   Gaussian-copula credit model ([`adapter`]),
//! * parameter estimates from historical series ([`calibration`]).
//!
//! [`simulator`] is a Monte Carlo implementation of the same dynamics used to
//! check every closed form independently.

pub mod adapter;
pub mod analytics;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod gdp_stats;
pub mod linalg;
pub mod netzero;
pub mod params;
pub mod simulator;

pub use error::{Error, ErrorKind, Result};
pub use params::{ModelParams, ReducedParams, StateHistory};
