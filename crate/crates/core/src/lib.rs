//! Fusion of noisy crowdsourced labels by variational Bayes.
//!
//! The crate implements majority voting, Dawid–Skene EM and mean-field
//! variational Bayes EM over a Dawid–Skene annotator model, plus two
//! semi-supervised variants: one that pins known labels and one that couples
//! item posteriors through must-link / cannot-link constraints (a pairwise
//! Markov random field prior on the labels).
//!
//! Around the aggregators sit the pieces needed to run experiments end to end:
//! constraint closure and violation counting, uncertainty-driven constraint
//! selection, a synthetic crowd generator, evaluation of the theoretical error
//! bounds, F-score metrics, and CSV/JSON formats.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`, which is what the CLI uses.
//!
//! Class labels are 0-based inside the library. The file formats use 1-based
//! labels and convert at the boundary.

// `!(x < y)` is how NaN gets rejected along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregators;
pub mod bounds;
pub mod constraints;
mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod selection;
pub mod synth;

pub use error::{Error, Result};
pub use numerics::Real;

/// `f64` posterior over item labels.
pub type Posterior = model::LabelPosterior<f64>;
/// `f64` Dirichlet prior configuration.
pub type Priors = model::PriorConfig<f64>;
/// `f64` Dirichlet posterior parameters.
pub type Params = model::PosteriorParams<f64>;
/// `f64` fit options.
pub type Options = aggregators::FitOptions<f64>;
/// `f64` fit result.
pub type Fit = aggregators::FitResult<f64>;
/// `f64` synthetic crowd specification.
pub type Crowd = synth::CrowdSpec<f64>;
/// `f64` bound inputs.
pub type Inputs = bounds::BoundInputs<f64>;
/// `f64` bound report.
pub type Report = bounds::BoundReport<f64>;
/// `f64` score card.
pub type Scores = metrics::ScoreCard<f64>;
