//! Risk-based predictive uncertainty measures for ensembles of categorical
//! predictions.
//!
//! A proper scoring rule `S(p, y)` induces a Bayes risk (aleatoric), an excess
//! risk (epistemic, a Bregman divergence) and their sum, the total risk.
//! Because the true label distribution is unknown, each of these is estimated
//! from an ensemble of predictions by plugging in one of three stand-ins: the
//! members themselves, their mean (central label), or the rule's central
//! prediction. See [`estimators`] for the full grid of estimates.

pub mod beta;
pub mod bregman;
pub mod central;
pub mod energy;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod io;
pub mod scoring;
pub mod simplex;

pub use bregman::{bregman_div, expected_bregman_objective, Direction};
pub use central::{central_label, central_prediction, CentralPrediction};
pub use error::{Error, Result};
pub use estimators::{Approx, MeasureSpec, Risk};
pub use scoring::ScoringRule;
pub use simplex::{softmax, EnsemblePredictions, LogitVector, ProbVector, ValueKind};
