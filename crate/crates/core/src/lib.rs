//! Evolutionary symbolic regression networks for predicting the
//! longitudinal dispersion coefficient of natural rivers.
//!
//! The pipeline: clean field measurements ([`dataset`]), split them so the
//! training set spans the data ([`split`]), enumerate dimensionless candidate
//! groups ([`dimensional`]), evolve small networks of symbolic activations
//! ([`network`], [`evolution`]) and compare the resulting formula against
//! published empirical models ([`models`]) with [`metrics`].

pub mod dataset;
pub mod dimensional;
pub mod network;
pub mod split;
pub mod evolution;
pub mod metrics;
pub mod models;
