//! Choosing which item pairs to ask about, by best-versus-second-best margin.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintSet;
use crate::model::{GroundTruth, LabelPosterior};
use crate::numerics::Real;
use crate::{Error, Result};

/// Gap between the largest and second-largest entries of a posterior row.
///
/// Near 1 the crowd agrees on the item; near 0 it is torn.
pub fn bvsb<F: Real>(row: &[F]) -> Result<F> {
    if row.len() < 2 {
        return Err(Error::domain("best-versus-second-best needs at least 2 classes"));
    }
    let (mut best, mut second) = (F::neg_infinity(), F::neg_infinity());
    for &p in row {
        if p > best {
            second = best;
            best = p;
        } else if p > second {
            second = p;
        }
    }
    Ok(best - second)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPlan {
    /// Uncertain items, in draw order.
    pub uncertain: Vec<usize>,
    /// K confident partners per uncertain item (same order as `uncertain`).
    pub partners: Vec<Vec<usize>>,
    /// (uncertain, partner) pairs to ask about.
    pub queries: Vec<(usize, usize)>,
    /// Some draw had all-zero weights and fell back to uniform sampling.
    pub uniform_fallback: bool,
}

impl QueryPlan {
    pub fn empty() -> Self {
        Self {
            uncertain: Vec::new(),
            partners: Vec::new(),
            queries: Vec::new(),
            uniform_fallback: false,
        }
    }
}

/// Samples ⌊N_C / K⌋ uncertain items with probability ∝ 1 − H and, for
/// each, K partners from the remaining items with probability ∝ H.
///
/// Both stages draw one item at a time, remove it and renormalize.
pub fn plan_queries<F: Real>(
    posterior: &LabelPosterior<F>,
    n_constraints: usize,
    seed: u64,
) -> Result<QueryPlan> {
    let k = posterior.n_classes();
    let n = posterior.n_items();
    if n_constraints < k {
        return Err(Error::precondition(format!(
            "need at least K = {k} constraints, asked for {n_constraints}"
        )));
    }
    let n_uncertain = n_constraints / k;
    if n < n_uncertain + k {
        return Err(Error::precondition(format!(
            "{n} items cannot host {n_uncertain} uncertain items with {k} partners each"
        )));
    }
    let margin: Vec<f64> = posterior
        .rows()
        .map(|row| Ok(bvsb(row)?.to_f64().unwrap_or(0.0).clamp(0.0, 1.0)))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let all: Vec<usize> = (0..n).collect();
    let doubt: Vec<f64> = margin.iter().map(|h| 1.0 - h).collect();
    let (uncertain, mut fallback) = sample_sequential(&mut rng, &all, &doubt, n_uncertain);

    let mut is_uncertain = vec![false; n];
    for &u in &uncertain {
        is_uncertain[u] = true;
    }
    let pool: Vec<usize> = (0..n).filter(|&i| !is_uncertain[i]).collect();
    let mut partners = Vec::with_capacity(uncertain.len());
    let mut queries = Vec::with_capacity(uncertain.len() * k);
    for &u in &uncertain {
        let (chosen, fb) = sample_sequential(&mut rng, &pool, &margin, k);
        fallback |= fb;
        queries.extend(chosen.iter().map(|&p| (u, p)));
        partners.push(chosen);
    }
    Ok(QueryPlan {
        uncertain,
        partners,
        queries,
        uniform_fallback: fallback,
    })
}

/// Draws `count` distinct items from `pool` with probability ∝ `weight[item]`.
fn sample_sequential(
    rng: &mut ChaCha8Rng,
    pool: &[usize],
    weight: &[f64],
    count: usize,
) -> (Vec<usize>, bool) {
    let mut remaining = pool.to_vec();
    let mut chosen = Vec::with_capacity(count);
    let mut fallback = false;
    for _ in 0..count {
        let total: f64 = remaining.iter().map(|&i| weight[i]).sum();
        let pos = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            remaining
                .iter()
                .position(|&i| {
                    acc += weight[i];
                    target < acc
                })
                .unwrap_or_else(|| {
                    remaining
                        .iter()
                        .rposition(|&i| weight[i] > 0.0)
                        .expect("positive total")
                })
        } else {
            fallback = true;
            rng.gen_range(0..remaining.len())
        };
        chosen.push(remaining.remove(pos));
    }
    (chosen, fallback)
}

/// Answers every query from the ground truth and closes the result.
pub fn answer_queries(plan: &QueryPlan, truth: &GroundTruth) -> Result<ConstraintSet> {
    let mut unknown: Vec<usize> = plan
        .queries
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .filter(|&i| truth.get(i).is_none())
        .collect();
    unknown.sort_unstable();
    unknown.dedup();
    if !unknown.is_empty() {
        return Err(Error::precondition(format!(
            "no ground truth for queried items {unknown:?}"
        )));
    }
    let mut cs = ConstraintSet::new();
    for &(a, b) in &plan.queries {
        if truth.get(a) == truth.get(b) {
            cs.add_must_link(a, b)?;
        } else {
            cs.add_cannot_link(a, b)?;
        }
    }
    cs.close()
}
