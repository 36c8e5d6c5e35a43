//! Belief-update modelling and accuracy-risk analysis for crowd price forecasts.
//!
//! The crate is organised around the stages of the analysis pipeline:
//!
//! * [`dataset`] ingests prediction rounds and computes per-round baselines.
//! * [`beliefmodels`] holds the six belief-update models together with the
//!   rates-histogram extrapolation, the discrete numerical posterior and the
//!   dip test for unimodality.
//! * [`attribution`] turns model residuals into the social-learning score
//!   `alpha` and selects one-sided subsets from it.
//! * [`paretolab`] bootstraps subset improvement and risk and assembles the
//!   accuracy-risk frontier.
//! * [`simcrowd`] generates synthetic rounds with known agent types.
//!
//! Every stochastic routine takes an explicit seed, and per-item streams are
//! derived with [`seeds::derive`] so results never depend on evaluation order
//! or thread count.

pub mod attribution;
pub mod beliefmodels;
pub mod dataset;
pub mod paretolab;
pub mod report;
pub mod seeds;
pub mod simcrowd;
pub mod stats;

pub use attribution::{AlphaGrid, AlphaRecord};
pub use beliefmodels::{
    DipResult, ModelKind, MonteCarloConfig, PosteriorEstimate, PriceDistribution,
};
pub use dataset::{DatasetFormat, Phase, PredictionSet, PricePoint, Round, RoundSummary};
pub use paretolab::{CurvePoint, ParetoPoint};
pub use simcrowd::SimConfig;
