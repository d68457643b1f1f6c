use crate::model::{LabelPosterior, ResponseMatrix};
use crate::numerics::Real;

use super::{FitResult, Method, ModelParams};

/// Per-item histogram of responses; items nobody answered get a uniform row.
pub fn majority_vote<F: Real>(rm: &ResponseMatrix) -> FitResult<F> {
    let posterior = histogram(rm);
    let hard_labels = posterior.hard_labels();
    let unsupported_items = (0..rm.n_items())
        .filter(|&n| rm.item_responses(n).is_empty())
        .collect();
    FitResult {
        method: Method::MajorityVote,
        posterior,
        params: ModelParams::None,
        hard_labels,
        iterations: 0,
        converged: true,
        trace: Vec::new(),
        n_violations: None,
        unsupported_items,
    }
}

pub(crate) fn histogram<F: Real>(rm: &ResponseMatrix) -> LabelPosterior<F> {
    let k = rm.n_classes();
    let mut probs = vec![F::zero(); rm.n_items() * k];
    for (n, row) in probs.chunks_exact_mut(k).enumerate() {
        let responses = rm.item_responses(n);
        if responses.is_empty() {
            row.fill(F::one() / F::of_usize(k));
            continue;
        }
        for r in responses {
            row[r.label] = row[r.label] + F::one();
        }
        let total = F::of_usize(responses.len());
        for p in row.iter_mut() {
            *p = *p / total;
        }
    }
    LabelPosterior::from_flat(probs, k)
}
