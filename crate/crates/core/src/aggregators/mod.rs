//! Label fusion: majority vote, Dawid–Skene EM and the variational Bayes family.

use serde::{Deserialize, Serialize};

use crate::model::{LabelPosterior, PosteriorParams};
use crate::numerics::Real;
use crate::{Error, Result};

mod ds;
mod engine;
mod mv;
mod vb;

pub use ds::ds_em_fit;
pub use mv::majority_vote;
pub use vb::{vb_ilc_fit, vb_lc_fit, vbem_fit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "mv")]
    MajorityVote,
    #[serde(rename = "ds")]
    DawidSkene,
    #[serde(rename = "vb")]
    Vb,
    #[serde(rename = "vb-lc")]
    VbLc,
    #[serde(rename = "vb-ilc")]
    VbIlc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::MajorityVote => "mv",
            Method::DawidSkene => "ds",
            Method::Vb => "vb",
            Method::VbLc => "vb-lc",
            Method::VbIlc => "vb-ilc",
        }
    }
}

/// Starting posterior of an iterative fit.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init<F: Real> {
    #[default]
    MajorityVote,
    Given(LabelPosterior<F>),
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions<F: Real> {
    /// Iteration cap T.
    pub max_iters: usize,
    /// Stop once max_n max_k |Δq| < tol.
    pub tol: F,
    /// Constraint weight η (VB-ILC only).
    pub eta: F,
    pub seed: u64,
    pub init: Init<F>,
}

impl<F: Real> Default for FitOptions<F> {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: F::lit(1e-6),
            eta: F::zero(),
            seed: 0,
            init: Init::MajorityVote,
        }
    }
}

impl<F: Real> FitOptions<F> {
    pub fn with_init(mut self, init: Init<F>) -> Self {
        self.init = init;
        self
    }

    pub fn with_eta(mut self, eta: F) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::precondition("max_iters must be at least 1"));
        }
        if !(self.tol >= F::zero()) {
            return Err(Error::precondition(format!("tol must be non-negative, got {}", self.tol)));
        }
        if !(self.eta >= F::zero() && self.eta.is_finite()) {
            return Err(Error::precondition(format!(
                "eta must be finite and non-negative, got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// Point estimates of Dawid–Skene EM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct PointEstimates<F: Real> {
    pub pi: Vec<F>,
    /// [m][k][k'].
    pub gamma: Vec<Vec<Vec<F>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real", tag = "kind", rename_all = "snake_case")]
pub enum ModelParams<F: Real> {
    /// Majority vote estimates no parameters.
    None,
    Point(PointEstimates<F>),
    Dirichlet(PosteriorParams<F>),
}

impl<F: Real> ModelParams<F> {
    /// Estimated π: E[π] for Dirichlet posteriors, π̂ for point estimates.
    pub fn pi(&self) -> Option<Vec<F>> {
        match self {
            ModelParams::None => None,
            ModelParams::Point(p) => Some(p.pi.clone()),
            ModelParams::Dirichlet(d) => Some(d.expected_pi()),
        }
    }

    /// Estimated confusion matrices, [m][k][k'].
    pub fn gamma(&self) -> Option<Vec<Vec<Vec<F>>>> {
        match self {
            ModelParams::None => None,
            ModelParams::Point(p) => Some(p.gamma.clone()),
            ModelParams::Dirichlet(d) => Some(d.expected_gamma()),
        }
    }

    pub fn as_dirichlet(&self) -> Option<&PosteriorParams<F>> {
        match self {
            ModelParams::Dirichlet(d) => Some(d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct FitResult<F: Real> {
    pub method: Method,
    pub posterior: LabelPosterior<F>,
    pub params: ModelParams<F>,
    /// argmax of each posterior row, ties to the smallest class.
    pub hard_labels: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// max posterior change per iteration.
    pub trace: Vec<F>,
    /// Violated constraints on the hard labels (VB-ILC only).
    pub n_violations: Option<usize>,
    /// Items with no responses and nothing else informing them.
    pub unsupported_items: Vec<usize>,
}
