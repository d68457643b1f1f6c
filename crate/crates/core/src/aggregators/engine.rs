//! E-step and outer loop shared by Dawid–Skene EM and the VB variants.

use rayon::prelude::*;

use crate::constraints::Link;
use crate::model::{LabelPosterior, ResponseMatrix};
use crate::numerics::{softmax_in_place, Real};
use crate::{Error, Result};

use super::{mv, FitOptions, Init};

/// Per-iteration log weights: ln π (length K) and ln Γ (M×K×K).
///
/// Holds point log-probabilities for EM and digamma expectations for VB.
pub(super) struct LogTables<F> {
    pub log_pi: Vec<F>,
    pub log_gamma: Vec<F>,
}

pub(super) struct Coupling<'a, F> {
    pub eta: F,
    pub neighbors: &'a [Vec<(usize, Link)>],
}

pub(super) struct LoopOutcome<F: Real> {
    pub posterior: LabelPosterior<F>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<F>,
}

pub(super) fn initial_posterior<F: Real>(
    rm: &ResponseMatrix,
    init: &Init<F>,
) -> Result<LabelPosterior<F>> {
    match init {
        Init::MajorityVote => Ok(mv::histogram(rm)),
        Init::Uniform => Ok(LabelPosterior::uniform(rm.n_items(), rm.n_classes())),
        Init::Given(q) => {
            if q.n_items() != rm.n_items() || q.n_classes() != rm.n_classes() {
                return Err(Error::precondition(format!(
                    "initial posterior is {}×{}, data is {}×{}",
                    q.n_items(),
                    q.n_classes(),
                    rm.n_items(),
                    rm.n_classes()
                )));
            }
            Ok(q.clone())
        }
    }
}

/// One Jacobi sweep: every row of the result reads only from `prev`.
pub(super) fn e_step<F: Real>(
    rm: &ResponseMatrix,
    tables: &LogTables<F>,
    prev: &LabelPosterior<F>,
    pinned: &[Option<usize>],
    coupling: Option<&Coupling<'_, F>>,
) -> Result<LabelPosterior<F>> {
    let k = rm.n_classes();
    let mut probs = vec![F::zero(); rm.n_items() * k];
    probs
        .par_chunks_mut(k)
        .enumerate()
        .try_for_each(|(n, row)| -> Result<()> {
            if let Some(class) = pinned.get(n).copied().flatten() {
                row[class] = F::one();
                return Ok(());
            }
            row.copy_from_slice(&tables.log_pi);
            for r in rm.item_responses(n) {
                let base = r.annotator * k * k + r.label;
                for (c, v) in row.iter_mut().enumerate() {
                    *v = *v + tables.log_gamma[base + c * k];
                }
            }
            if let Some(cp) = coupling {
                if cp.eta != F::zero() {
                    for &(j, link) in &cp.neighbors[n] {
                        let w = cp.eta * link.weight::<F>();
                        for (v, &q) in row.iter_mut().zip(prev.row(j)) {
                            *v = *v + w * q;
                        }
                    }
                }
            }
            softmax_in_place(row)?;
            let total: F = row.iter().copied().sum();
            if (total - F::one()).abs() > F::prob_tol() {
                return Err(Error::Numeric(format!("posterior row {n} sums to {total}")));
            }
            Ok(())
        })?;
    Ok(LabelPosterior::from_flat(probs, k))
}

/// Alternates `m_step` and the E-step until the posterior stops moving.
pub(super) fn run<F, M>(
    rm: &ResponseMatrix,
    opts: &FitOptions<F>,
    mut posterior: LabelPosterior<F>,
    pinned: &[Option<usize>],
    coupling: Option<&Coupling<'_, F>>,
    mut m_step: M,
) -> Result<LoopOutcome<F>>
where
    F: Real,
    M: FnMut(&LabelPosterior<F>) -> Result<LogTables<F>>,
{
    for (n, class) in pinned.iter().enumerate() {
        if let Some(c) = *class {
            let row = posterior.row_mut(n);
            row.fill(F::zero());
            row[c] = F::one();
        }
    }
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iters {
        let tables = m_step(&posterior)?;
        let next = e_step(rm, &tables, &posterior, pinned, coupling)?;
        let delta = next.max_abs_diff(&posterior);
        trace.push(delta);
        posterior = next;
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(LoopOutcome {
        posterior,
        iterations: trace.len(),
        converged,
        trace,
    })
}

/// Items with no responses and no other source of information.
pub(super) fn unsupported(
    rm: &ResponseMatrix,
    pinned: &[Option<usize>],
    neighbors: Option<&[Vec<(usize, Link)>]>,
) -> Vec<usize> {
    (0..rm.n_items())
        .filter(|&n| {
            rm.item_responses(n).is_empty()
                && pinned.get(n).copied().flatten().is_none()
                && neighbors.is_none_or(|adj| adj[n].is_empty())
        })
        .collect()
}
