//! Synthetic crowds drawn from the Dawid–Skene model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{GroundTruth, Response, ResponseMatrix};
use crate::numerics::{ProbVector, Real};
use crate::{Error, Result};

/// Ground-truth parameters of a simulated crowd.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct CrowdSpec<F: Real> {
    pub n_items: usize,
    pub n_annotators: usize,
    pub n_classes: usize,
    pub pi_star: ProbVector<F>,
    /// Confusion rows, [m][k] is the answer distribution of m on class k.
    pub gamma_star: Vec<Vec<ProbVector<F>>>,
    /// Response probability per annotator.
    pub mu: Vec<F>,
    pub seed: u64,
}

impl<F: Real> CrowdSpec<F> {
    pub fn validate(&self) -> Result<()> {
        let k = self.n_classes;
        if self.pi_star.len() != k {
            return Err(Error::domain("pi_star length differs from n_classes"));
        }
        if self.gamma_star.len() != self.n_annotators || self.mu.len() != self.n_annotators {
            return Err(Error::domain("gamma_star / mu length differs from n_annotators"));
        }
        for (m, mat) in self.gamma_star.iter().enumerate() {
            if mat.len() != k || mat.iter().any(|row| row.len() != k) {
                return Err(Error::domain(format!("confusion matrix {m} is not {k}×{k}")));
            }
        }
        if let Some(mu) = self.mu.iter().find(|&&mu| !(mu > F::zero() && mu <= F::one())) {
            return Err(Error::domain(format!("response probability {mu} outside (0, 1]")));
        }
        Ok(())
    }

    /// ρ_π = min_k π*_k.
    pub fn rho_pi(&self) -> F {
        self.pi_star.min()
    }

    /// ρ_γ = min over every confusion entry.
    pub fn rho_gamma(&self) -> F {
        self.gamma_star
            .iter()
            .flatten()
            .map(ProbVector::min)
            .fold(F::infinity(), F::min)
    }

    pub fn gamma(&self, m: usize, k: usize, k2: usize) -> F {
        self.gamma_star[m][k][k2]
    }
}

/// Every annotator answers every item with probability `diag` of being right
/// and spreads the rest evenly; classes are equiprobable.
pub fn diag_dominant_spec<F: Real>(
    n_items: usize,
    n_annotators: usize,
    n_classes: usize,
    diag: F,
    seed: u64,
) -> Result<CrowdSpec<F>> {
    if n_classes < 2 {
        return Err(Error::domain("need at least 2 classes"));
    }
    let k = F::of_usize(n_classes);
    if !(diag > k.recip() && diag <= F::one()) {
        return Err(Error::domain(format!(
            "diagonal {diag} must lie in (1/{n_classes}, 1]"
        )));
    }
    let off = (F::one() - diag) / (k - F::one());
    let mat: Vec<ProbVector<F>> = (0..n_classes)
        .map(|r| {
            let mut row = vec![off; n_classes];
            row[r] = diag;
            ProbVector::new(row)
        })
        .collect::<Result<_>>()?;
    let spec = CrowdSpec {
        n_items,
        n_annotators,
        n_classes,
        pi_star: ProbVector::uniform(n_classes)?,
        gamma_star: vec![mat; n_annotators],
        mu: vec![F::one(); n_annotators],
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

const TRUTH_STREAM: u64 = 0;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn draw<F: Real>(rng: &mut ChaCha8Rng, probs: &[F]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p.to_f64().unwrap_or(0.0);
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the last cumulative sum
    probs
        .iter()
        .rposition(|p| *p > F::zero())
        .unwrap_or(probs.len() - 1)
}

/// Samples true labels and responses.
///
/// The root seed is split into independent streams: one for the truth and,
/// per annotator, one for the response mask and one for the answers. Items
/// are drawn in order, so growing N extends rather than reshuffles a crowd.
pub fn generate<F: Real>(spec: &CrowdSpec<F>) -> Result<(ResponseMatrix, GroundTruth)> {
    spec.validate()?;
    let mut truth_rng = stream(spec.seed, TRUTH_STREAM);
    let truth: Vec<usize> = (0..spec.n_items)
        .map(|_| draw(&mut truth_rng, &spec.pi_star))
        .collect();
    let mut responses = Vec::new();
    for m in 0..spec.n_annotators {
        let mut mask_rng = stream(spec.seed, 1 + 2 * m as u64);
        let mut label_rng = stream(spec.seed, 2 + 2 * m as u64);
        let mu = spec.mu[m].to_f64().unwrap_or(1.0);
        for (n, &y) in truth.iter().enumerate() {
            let respond = mask_rng.gen::<f64>() < mu;
            let label = draw(&mut label_rng, &spec.gamma_star[m][y]);
            if respond {
                responses.push(Response {
                    item: n,
                    annotator: m,
                    label,
                });
            }
        }
    }
    let rm = ResponseMatrix::new(spec.n_items, spec.n_annotators, spec.n_classes, responses)?;
    Ok((rm, GroundTruth::complete(truth, spec.n_classes)?))
}
