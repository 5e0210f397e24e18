//! Micro-Doppler signature toolkit: simulation, spectrogram preprocessing,
//! kinematic checks, GPCA hull sifting, diversity scoring, a minimum-distance
//! classifier and STFT hyperparameter search.

pub mod classify;
pub mod config;
pub mod diversity;
pub mod eclean;
pub mod error;
pub mod gpca_sift;
pub mod hyperopt;
pub mod kinrules;
pub mod kinsim;
pub mod pipeline;
pub mod plot;
pub mod sigcore;

pub use error::{Error, Result};
