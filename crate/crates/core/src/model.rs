//! Response matrix, label posteriors, priors and Dirichlet posteriors.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::numerics::{argmax, check_simplex, digamma, Real};
use crate::{Error, Result};

/// One annotator's answer on one item. `label` is a 0-based class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Response {
    pub item: usize,
    pub annotator: usize,
    pub label: usize,
}

/// Sparse M×N matrix of annotator responses.
///
/// A missing (item, annotator) entry means the annotator did not respond.
/// Entries are kept sorted by item, then annotator.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    n_items: usize,
    n_annotators: usize,
    n_classes: usize,
    responses: Vec<Response>,
    item_offsets: Vec<usize>,
}

impl ResponseMatrix {
    pub fn new(
        n_items: usize,
        n_annotators: usize,
        n_classes: usize,
        responses: impl IntoIterator<Item = Response>,
    ) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::domain(format!("need at least 2 classes, got {n_classes}")));
        }
        let mut responses: Vec<Response> = responses.into_iter().collect();
        for r in &responses {
            if r.item >= n_items || r.annotator >= n_annotators {
                return Err(Error::domain(format!(
                    "response ({}, {}) outside {n_items} items × {n_annotators} annotators",
                    r.item, r.annotator
                )));
            }
            if r.label >= n_classes {
                return Err(Error::domain(format!(
                    "label {} outside {n_classes} classes",
                    r.label + 1
                )));
            }
        }
        responses.sort_unstable();
        if let Some(w) = responses
            .windows(2)
            .find(|w| w[0].item == w[1].item && w[0].annotator == w[1].annotator)
        {
            return Err(Error::domain(format!(
                "annotator {} answered item {} twice",
                w[0].annotator, w[0].item
            )));
        }
        let mut item_offsets = vec![0; n_items + 1];
        for r in &responses {
            item_offsets[r.item + 1] += 1;
        }
        for n in 0..n_items {
            item_offsets[n + 1] += item_offsets[n];
        }
        Ok(Self {
            n_items,
            n_annotators,
            n_classes,
            responses,
            item_offsets,
        })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_annotators(&self) -> usize {
        self.n_annotators
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// All responses, sorted by (item, annotator).
    pub fn responses(&self) -> &[Response] {
        &self.responses
    }

    pub fn item_responses(&self, item: usize) -> &[Response] {
        &self.responses[self.item_offsets[item]..self.item_offsets[item + 1]]
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// Returns the same responses with items renumbered by `perm[old] = new`.
    pub fn permute_items(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_items {
            return Err(Error::domain("permutation length does not match item count"));
        }
        Self::new(
            self.n_items,
            self.n_annotators,
            self.n_classes,
            self.responses.iter().map(|r| Response {
                item: perm[r.item],
                ..*r
            }),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_items: usize,
    pub n_annotators: usize,
    pub n_classes: usize,
    /// Average number of responses per annotator.
    pub mean_responses_per_annotator: f64,
    /// Fraction of items each annotator answered.
    pub response_rate: Vec<f64>,
}

pub fn dataset_stats(rm: &ResponseMatrix) -> DatasetStats {
    let mut per_annotator = vec![0usize; rm.n_annotators];
    for r in &rm.responses {
        per_annotator[r.annotator] += 1;
    }
    let mean = if rm.n_annotators == 0 {
        0.0
    } else {
        rm.len() as f64 / rm.n_annotators as f64
    };
    let response_rate = per_annotator
        .iter()
        .map(|&c| {
            if rm.n_items == 0 {
                0.0
            } else {
                c as f64 / rm.n_items as f64
            }
        })
        .collect();
    DatasetStats {
        n_items: rm.n_items,
        n_annotators: rm.n_annotators,
        n_classes: rm.n_classes,
        mean_responses_per_annotator: mean,
        response_rate,
    }
}

/// Row-stochastic N×K matrix of q(y_n = k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<F>>", into = "Vec<Vec<F>>", bound = "F: Real")]
pub struct LabelPosterior<F: Real> {
    n_classes: usize,
    probs: Vec<F>,
}

impl<F: Real> LabelPosterior<F> {
    pub fn from_rows(rows: Vec<Vec<F>>, n_classes: usize) -> Result<Self> {
        let mut probs = Vec::with_capacity(rows.len() * n_classes);
        for (n, row) in rows.iter().enumerate() {
            if row.len() != n_classes {
                return Err(Error::domain(format!(
                    "posterior row {n} has {} entries, expected {n_classes}",
                    row.len()
                )));
            }
            check_simplex(row).map_err(|e| Error::domain(format!("posterior row {n}: {e}")))?;
            probs.extend_from_slice(row);
        }
        Ok(Self { n_classes, probs })
    }

    pub fn uniform(n_items: usize, n_classes: usize) -> Self {
        Self {
            n_classes,
            probs: vec![F::one() / F::of_usize(n_classes); n_items * n_classes],
        }
    }

    /// Indicator rows e_{labels[n]}.
    pub fn point_mass(labels: &[usize], n_classes: usize) -> Result<Self> {
        let mut probs = vec![F::zero(); labels.len() * n_classes];
        for (n, &k) in labels.iter().enumerate() {
            if k >= n_classes {
                return Err(Error::domain(format!("label {} outside {n_classes} classes", k + 1)));
            }
            probs[n * n_classes + k] = F::one();
        }
        Ok(Self { n_classes, probs })
    }

    pub(crate) fn from_flat(probs: Vec<F>, n_classes: usize) -> Self {
        debug_assert_eq!(probs.len() % n_classes, 0);
        Self { n_classes, probs }
    }

    pub fn n_items(&self) -> usize {
        self.probs.len() / self.n_classes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, item: usize) -> &[F] {
        &self.probs[item * self.n_classes..(item + 1) * self.n_classes]
    }

    pub(crate) fn row_mut(&mut self, item: usize) -> &mut [F] {
        &mut self.probs[item * self.n_classes..(item + 1) * self.n_classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[F]> {
        self.probs.chunks_exact(self.n_classes)
    }

    pub fn hard_labels(&self) -> Vec<usize> {
        self.rows().map(argmax).collect()
    }

    /// max_n max_k |self − other|.
    pub fn max_abs_diff(&self, other: &Self) -> F {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (*a - *b).abs())
            .fold(F::zero(), F::max)
    }

    /// Sum of q(y_n = k) over items, per class.
    pub fn class_mass(&self) -> Vec<F> {
        let mut mass = vec![F::zero(); self.n_classes];
        for row in self.rows() {
            for (m, &p) in mass.iter_mut().zip(row) {
                *m = *m + p;
            }
        }
        mass
    }

    pub fn permute_items(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for (old, &new) in perm.iter().enumerate() {
            out.row_mut(new).copy_from_slice(self.row(old));
        }
        out
    }
}

impl<F: Real> TryFrom<Vec<Vec<F>>> for LabelPosterior<F> {
    type Error = Error;

    fn try_from(rows: Vec<Vec<F>>) -> Result<Self> {
        let k = rows.first().map_or(2, Vec::len);
        Self::from_rows(rows, k)
    }
}

impl<F: Real> From<LabelPosterior<F>> for Vec<Vec<F>> {
    fn from(p: LabelPosterior<F>) -> Self {
        p.rows().map(<[F]>::to_vec).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
enum Beta0<F: Real> {
    /// One K×K template for every annotator.
    Shared(Vec<F>),
    /// M×K×K, annotator-major.
    PerAnnotator(Vec<F>),
}

/// Dirichlet hyperparameters α₀ (class priors) and β₀ (confusion rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct PriorConfig<F: Real> {
    n_classes: usize,
    alpha0: Vec<F>,
    beta0: Beta0<F>,
}

impl<F: Real> PriorConfig<F> {
    /// α₀ = 1; β₀ row k has K at position k and ones elsewhere.
    pub fn diag_weighted(n_classes: usize) -> Result<Self> {
        let k = n_classes;
        let mut template = vec![F::one(); k * k];
        for i in 0..k {
            template[i * k + i] = F::of_usize(k);
        }
        Self::shared(vec![F::one(); k], template)
    }

    /// All-ones α₀ and β₀.
    pub fn uniform(n_classes: usize) -> Result<Self> {
        Self::shared(vec![F::one(); n_classes], vec![F::one(); n_classes * n_classes])
    }

    /// `template` is K×K row-major and applies to every annotator.
    pub fn shared(alpha0: Vec<F>, template: Vec<F>) -> Result<Self> {
        let k = alpha0.len();
        if template.len() != k * k {
            return Err(Error::domain(format!(
                "beta0 template has {} entries, expected {}",
                template.len(),
                k * k
            )));
        }
        let cfg = Self {
            n_classes: k,
            alpha0,
            beta0: Beta0::Shared(template),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `beta0` is M×K×K, annotator-major then row-major.
    pub fn per_annotator(alpha0: Vec<F>, beta0: Vec<F>, n_annotators: usize) -> Result<Self> {
        let k = alpha0.len();
        if beta0.len() != n_annotators * k * k {
            return Err(Error::domain(format!(
                "beta0 has {} entries, expected {}",
                beta0.len(),
                n_annotators * k * k
            )));
        }
        let cfg = Self {
            n_classes: k,
            alpha0,
            beta0: Beta0::PerAnnotator(beta0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::domain("priors need at least 2 classes"));
        }
        let beta = match &self.beta0 {
            Beta0::Shared(v) | Beta0::PerAnnotator(v) => v,
        };
        if let Some(x) = self.alpha0.iter().chain(beta).find(|x| !(**x > F::zero() && x.is_finite())) {
            return Err(Error::domain(format!("prior entries must be positive, got {x}")));
        }
        let half = F::lit(0.5);
        if let Some(x) = self.alpha0.iter().find(|x| **x < half) {
            return Err(Error::domain(format!("alpha0 entries must be at least 1/2, got {x}")));
        }
        if self.alpha0.iter().any(|x| *x < F::one()) {
            log::warn!("alpha0 has entries below 1; bound lemmas assume alpha0 >= 1/2");
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn alpha0(&self) -> &[F] {
        &self.alpha0
    }

    pub fn shared_beta0(&self) -> bool {
        matches!(self.beta0, Beta0::Shared(_))
    }

    /// Row k of annotator m's β₀.
    pub fn beta0(&self, m: usize, k: usize) -> &[F] {
        let kk = self.n_classes;
        match &self.beta0 {
            Beta0::Shared(t) => &t[k * kk..(k + 1) * kk],
            Beta0::PerAnnotator(b) => &b[(m * kk + k) * kk..(m * kk + k + 1) * kk],
        }
    }

    /// Checks the priors fit a dataset with `n_annotators` and `n_classes`.
    pub fn check_dims(&self, n_annotators: usize, n_classes: usize) -> Result<()> {
        if self.n_classes != n_classes {
            return Err(Error::domain(format!(
                "priors are for {} classes, data has {n_classes}",
                self.n_classes
            )));
        }
        if let Beta0::PerAnnotator(b) = &self.beta0 {
            let m = b.len() / (n_classes * n_classes);
            if m != n_annotators {
                return Err(Error::domain(format!(
                    "priors are for {m} annotators, data has {n_annotators}"
                )));
            }
        }
        Ok(())
    }
}

/// Dirichlet posterior parameters α (length K) and β (M×K×K).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Real")]
pub struct PosteriorParams<F: Real> {
    n_annotators: usize,
    n_classes: usize,
    alpha: Vec<F>,
    beta: Vec<F>,
}

impl<F: Real> PosteriorParams<F> {
    pub fn new(alpha: Vec<F>, beta: Vec<F>, n_annotators: usize) -> Result<Self> {
        let k = alpha.len();
        if beta.len() != n_annotators * k * k {
            return Err(Error::domain("beta has the wrong shape"));
        }
        if alpha.iter().chain(&beta).any(|x| !(*x > F::zero())) {
            return Err(Error::domain("Dirichlet parameters must be positive"));
        }
        Ok(Self {
            n_annotators,
            n_classes: k,
            alpha,
            beta,
        })
    }

    pub fn n_annotators(&self) -> usize {
        self.n_annotators
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn alpha(&self) -> &[F] {
        &self.alpha
    }

    /// Row k of annotator m's β.
    pub fn beta_row(&self, m: usize, k: usize) -> &[F] {
        let kk = self.n_classes;
        &self.beta[(m * kk + k) * kk..(m * kk + k + 1) * kk]
    }

    /// E[π] = α / Σα.
    pub fn expected_pi(&self) -> Vec<F> {
        normalized(&self.alpha)
    }

    /// E[γ_k^(m)] = β_k^(m) / Σ β_k^(m).
    pub fn expected_gamma_row(&self, m: usize, k: usize) -> Vec<F> {
        normalized(self.beta_row(m, k))
    }

    /// E[Γ^(m)] for every annotator, nested [m][k][k'].
    pub fn expected_gamma(&self) -> Vec<Vec<Vec<F>>> {
        (0..self.n_annotators)
            .map(|m| (0..self.n_classes).map(|k| self.expected_gamma_row(m, k)).collect())
            .collect()
    }

    /// E[ln π_k] = ψ(α_k) − ψ(Σ α).
    pub fn expected_log_pi(&self) -> Result<Vec<F>> {
        expected_log_dirichlet(&self.alpha)
    }

    /// E[ln γ_{k,k'}^(m)] = ψ(β_{k,k'}) − ψ(Σ_ℓ β_{k,ℓ}).
    pub fn expected_log_gamma(&self, m: usize, k: usize) -> Result<Vec<F>> {
        if m >= self.n_annotators || k >= self.n_classes {
            return Err(Error::domain(format!(
                "confusion row ({m}, {k}) outside {} annotators × {} classes",
                self.n_annotators, self.n_classes
            )));
        }
        expected_log_dirichlet(self.beta_row(m, k))
    }
}

fn normalized<F: Real>(v: &[F]) -> Vec<F> {
    let total: F = v.iter().copied().sum();
    v.iter().map(|&x| x / total).collect()
}

/// E[ln x_i] under Dir(params).
pub fn expected_log_dirichlet<F: Real>(params: &[F]) -> Result<Vec<F>> {
    let total: F = params.iter().copied().sum();
    let psi_total = digamma(total)?;
    params.iter().map(|&a| Ok(digamma(a)? - psi_total)).collect()
}

/// True labels; `None` where unknown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    labels: Vec<Option<usize>>,
}

impl GroundTruth {
    pub fn new(labels: Vec<Option<usize>>, n_classes: usize) -> Result<Self> {
        if let Some(k) = labels.iter().flatten().find(|&&k| k >= n_classes) {
            return Err(Error::domain(format!("truth label {} outside {n_classes} classes", k + 1)));
        }
        Ok(Self { labels })
    }

    pub fn complete(labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        Self::new(labels.into_iter().map(Some).collect(), n_classes)
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn get(&self, item: usize) -> Option<usize> {
        self.labels.get(item).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_known(&self) -> usize {
        self.labels.iter().flatten().count()
    }
}

/// Bidirectional map between external string identifiers and dense indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct IdIndex {
    ids: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl IdIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index of `id`, registering it if new.
    pub fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.lookup.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_owned());
        self.lookup.insert(id.to_owned(), i);
        i
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

impl From<Vec<String>> for IdIndex {
    fn from(ids: Vec<String>) -> Self {
        let mut idx = Self::new();
        for id in &ids {
            idx.intern(id);
        }
        idx
    }
}

impl From<IdIndex> for Vec<String> {
    fn from(idx: IdIndex) -> Self {
        idx.ids
    }
}
