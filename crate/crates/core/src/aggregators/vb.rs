use crate::constraints::{count_violations, ConstraintSet, LabelConstraints, Link};
use crate::model::{LabelPosterior, PosteriorParams, PriorConfig, ResponseMatrix};
use crate::numerics::Real;
use crate::{Error, Result};

use super::engine::{self, Coupling, LogTables};
use super::{FitOptions, FitResult, Method, ModelParams};

/// Mean-field variational Bayes EM.
///
/// M-step: α_k = Σ_n q(y_n = k) + α_{0,k} and
/// β_{k,k'}^(m) = Σ_n q(y_n = k) 1(ŷ_n^(m) = k') + β_{0,k,k'}^(m).
/// E-step: q(y_n = k) ∝ exp(E[ln π_k] + Σ_m E[ln γ_{k, ŷ_n^(m)}^(m)]).
pub fn vbem_fit<F: Real>(
    rm: &ResponseMatrix,
    priors: &PriorConfig<F>,
    opts: &FitOptions<F>,
) -> Result<FitResult<F>> {
    fit(rm, priors, opts, &[], None, Method::Vb)
}

/// VBEM with the posterior rows of labeled items pinned to their class.
pub fn vb_lc_fit<F: Real>(
    rm: &ResponseMatrix,
    priors: &PriorConfig<F>,
    labels: &LabelConstraints,
    opts: &FitOptions<F>,
) -> Result<FitResult<F>> {
    let mut pinned = vec![None; rm.n_items()];
    for (item, class) in labels.iter() {
        if item >= rm.n_items() || class >= rm.n_classes() {
            return Err(Error::domain(format!(
                "label constraint ({item}, {}) outside {} items × {} classes",
                class + 1,
                rm.n_items(),
                rm.n_classes()
            )));
        }
        pinned[item] = Some(class);
    }
    fit(rm, priors, opts, &pinned, None, Method::VbLc)
}

/// VBEM with a pairwise MRF prior from must-link / cannot-link constraints.
///
/// The E-step adds η Σ_{n'} w_{n,n'} q_t(y_{n'} = k) to the exponent of item
/// n, where q_t is the whole previous-iteration posterior and w is +1 for
/// must-link and −1 for cannot-link. `constraints` must be closed.
pub fn vb_ilc_fit<F: Real>(
    rm: &ResponseMatrix,
    priors: &PriorConfig<F>,
    constraints: &ConstraintSet,
    opts: &FitOptions<F>,
) -> Result<FitResult<F>> {
    if !constraints.is_closed() {
        return Err(Error::precondition(
            "instance-level constraints must be closed before fitting",
        ));
    }
    let neighbors = constraints.neighbors(rm.n_items())?;
    let mut out = fit(rm, priors, opts, &[], Some(&neighbors), Method::VbIlc)?;
    out.n_violations = Some(count_violations(constraints, &out.hard_labels));
    Ok(out)
}

fn fit<F: Real>(
    rm: &ResponseMatrix,
    priors: &PriorConfig<F>,
    opts: &FitOptions<F>,
    pinned: &[Option<usize>],
    neighbors: Option<&[Vec<(usize, Link)>]>,
    method: Method,
) -> Result<FitResult<F>> {
    opts.validate()?;
    priors.check_dims(rm.n_annotators(), rm.n_classes())?;
    let q0 = engine::initial_posterior(rm, &opts.init)?;
    let coupling = neighbors.map(|neighbors| Coupling {
        eta: opts.eta,
        neighbors,
    });
    let out = engine::run(rm, opts, q0, pinned, coupling.as_ref(), |q| {
        log_tables(rm, &m_step(rm, priors, q)?)
    })?;
    let params = m_step(rm, priors, &out.posterior)?;
    Ok(FitResult {
        method,
        hard_labels: out.posterior.hard_labels(),
        posterior: out.posterior,
        params: ModelParams::Dirichlet(params),
        iterations: out.iterations,
        converged: out.converged,
        trace: out.trace,
        n_violations: None,
        unsupported_items: engine::unsupported(rm, pinned, neighbors),
    })
}

pub(crate) fn m_step<F: Real>(
    rm: &ResponseMatrix,
    priors: &PriorConfig<F>,
    q: &LabelPosterior<F>,
) -> Result<PosteriorParams<F>> {
    let k = rm.n_classes();
    let m = rm.n_annotators();
    let alpha = q
        .class_mass()
        .into_iter()
        .zip(priors.alpha0())
        .map(|(c, &a0)| c + a0)
        .collect();
    let mut beta = Vec::with_capacity(m * k * k);
    for a in 0..m {
        for c in 0..k {
            beta.extend_from_slice(priors.beta0(a, c));
        }
    }
    for r in rm.responses() {
        let base = r.annotator * k * k + r.label;
        for (c, &w) in q.row(r.item).iter().enumerate() {
            beta[base + c * k] = beta[base + c * k] + w;
        }
    }
    PosteriorParams::new(alpha, beta, m)
}

fn log_tables<F: Real>(rm: &ResponseMatrix, params: &PosteriorParams<F>) -> Result<LogTables<F>> {
    let mut log_gamma = Vec::with_capacity(rm.n_annotators() * rm.n_classes() * rm.n_classes());
    for m in 0..rm.n_annotators() {
        for k in 0..rm.n_classes() {
            log_gamma.extend(params.expected_log_gamma(m, k)?);
        }
    }
    Ok(LogTables {
        log_pi: params.expected_log_pi()?,
        log_gamma,
    })
}
