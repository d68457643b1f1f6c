use crate::model::{LabelPosterior, ResponseMatrix};
use crate::numerics::Real;
use crate::Result;

use super::engine::{self, LogTables};
use super::{FitOptions, FitResult, Method, ModelParams, PointEstimates};

/// Added to every count before normalizing so no estimate is exactly zero.
const SMOOTHING: f64 = 1e-10;

/// Dawid–Skene maximum-likelihood EM.
///
/// M-step: π̂_k ∝ N_k, γ̂_{k,k'}^(m) ∝ N_{k,k'}^(m) (both smoothed).
/// E-step: ln q(y_n = k) ∝ ln π̂_k + Σ_m ln γ̂_{k, ŷ_n^(m)}^(m).
pub fn ds_em_fit<F: Real>(rm: &ResponseMatrix, opts: &FitOptions<F>) -> Result<FitResult<F>> {
    opts.validate()?;
    let q0 = engine::initial_posterior(rm, &opts.init)?;
    let out = engine::run(rm, opts, q0, &[], None, |q| {
        let (pi, gamma) = point_estimates(rm, q);
        Ok(LogTables {
            log_pi: pi.iter().map(|p| p.ln()).collect(),
            log_gamma: gamma.iter().map(|g| g.ln()).collect(),
        })
    })?;
    let (pi, gamma) = point_estimates(rm, &out.posterior);
    let k = rm.n_classes();
    let gamma = gamma
        .chunks_exact(k * k)
        .map(|mat| mat.chunks_exact(k).map(<[F]>::to_vec).collect())
        .collect();
    Ok(FitResult {
        method: Method::DawidSkene,
        hard_labels: out.posterior.hard_labels(),
        posterior: out.posterior,
        params: ModelParams::Point(PointEstimates { pi, gamma }),
        iterations: out.iterations,
        converged: out.converged,
        trace: out.trace,
        n_violations: None,
        unsupported_items: engine::unsupported(rm, &[], None),
    })
}

fn point_estimates<F: Real>(rm: &ResponseMatrix, q: &LabelPosterior<F>) -> (Vec<F>, Vec<F>) {
    let k = rm.n_classes();
    let s = F::lit(SMOOTHING);
    let mut pi: Vec<F> = q.class_mass().into_iter().map(|c| c + s).collect();
    let total: F = pi.iter().copied().sum();
    for p in &mut pi {
        *p = *p / total;
    }
    let mut gamma = vec![s; rm.n_annotators() * k * k];
    for r in rm.responses() {
        let qn = q.row(r.item);
        let base = r.annotator * k * k + r.label;
        for (c, &w) in qn.iter().enumerate() {
            gamma[base + c * k] = gamma[base + c * k] + w;
        }
    }
    for row in gamma.chunks_exact_mut(k) {
        let total: F = row.iter().copied().sum();
        for g in row.iter_mut() {
            *g = *g / total;
        }
    }
    (pi, gamma)
}
