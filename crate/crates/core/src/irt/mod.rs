//! Bayesian two-parameter logistic calibration.

pub mod analysis;
pub mod curves;
pub mod diagnostics;
pub mod eap;
pub mod fit;
pub mod metric;
pub mod model;
pub mod sampler;

pub use analysis::{
    ability_correlates, aggregate_by_technique, aggregate_technique, posterior_predictive, AbilityCorrelates,
    PredictiveItem, TechniqueSummary,
};
pub use curves::{compute_curves, CurveSet, Grid, ItemParams};
pub use diagnostics::{diagnose, Diagnostics};
pub use eap::{eap_theta, EapEstimate, Quadrature};
pub use fit::{fit_irt, ConvergenceCriteria, IrtSummary, ItemSummary, ParamSummary, PosteriorFit, SamplerRecord};
pub use model::{Irt2plModel, Observation};
pub use sampler::{MetricAdaptation, SamplerConfig, Trajectory};
