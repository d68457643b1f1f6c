//! JSON documents written by the subcommands.

use std::io::Write;
use std::path::Path;

use crowdfuse::aggregators::{FitResult, Method, ModelParams, PointEstimates};
use crowdfuse::model::IdIndex;
use crowdfuse::Scores;
use serde::{Deserialize, Serialize};

/// Fitted parameters: E[π], E[Γ] (or point estimates) plus Dirichlet α, β.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDoc {
    /// `none`, `point` or `dirichlet`.
    pub kind: String,
    pub pi: Option<Vec<f64>>,
    /// [annotator][true class][answered class].
    pub gamma: Option<Vec<Vec<Vec<f64>>>>,
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<Vec<Vec<f64>>>>,
}

impl ParamsDoc {
    pub fn new(params: &ModelParams<f64>) -> Self {
        let (kind, alpha, beta) = match params {
            ModelParams::None => ("none", None, None),
            ModelParams::Point(_) => ("point", None, None),
            ModelParams::Dirichlet(d) => {
                let (m, k) = (d.n_annotators(), d.n_classes());
                let beta = (0..m)
                    .map(|a| (0..k).map(|c| d.beta_row(a, c).to_vec()).collect())
                    .collect();
                ("dirichlet", Some(d.alpha().to_vec()), Some(beta))
            }
        };
        Self {
            kind: kind.to_owned(),
            pi: params.pi(),
            gamma: params.gamma(),
            alpha,
            beta,
        }
    }

    /// The estimates as point parameters (for comparing against a spec).
    pub fn as_point(&self) -> ModelParams<f64> {
        match (&self.pi, &self.gamma) {
            (Some(pi), Some(gamma)) => ModelParams::Point(PointEstimates {
                pi: pi.clone(),
                gamma: gamma.clone(),
            }),
            _ => ModelParams::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMaps {
    /// Item id per index.
    pub items: Vec<String>,
    /// Annotator id per index.
    pub annotators: Vec<String>,
}

impl IndexMaps {
    pub fn new(items: &IdIndex, annotators: &IdIndex) -> Self {
        Self {
            items: items.ids().to_vec(),
            annotators: annotators.ids().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaRow {
    pub eta: f64,
    pub n_v: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaTable {
    pub best_eta: f64,
    pub table: Vec<EtaRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSummary {
    pub must_link: usize,
    pub cannot_link: usize,
    pub labels: usize,
    /// Which set `n_v` counts over: `given` or `closed`.
    pub violations_on: String,
    /// Pairs sent for answering by uncertainty sampling, as item ids.
    pub queries: Vec<(String, String)>,
}

/// Result of `crowdfuse aggregate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDoc {
    pub method: Method,
    /// 1-based hard labels in item index order.
    pub labels: Vec<usize>,
    pub posterior: Vec<Vec<f64>>,
    pub params: ParamsDoc,
    /// Violated constraints, when constraints were given.
    pub n_v: Option<usize>,
    pub scores: Option<Scores>,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
    pub index_maps: IndexMaps,
    pub n_classes: usize,
    pub eta: Option<f64>,
    pub eta_search: Option<EtaTable>,
    pub constraints: Option<ConstraintSummary>,
    /// Ids of items that nothing informed (uniform posterior).
    pub unsupported_items: Vec<String>,
    pub warnings: Vec<String>,
}

impl ResultDoc {
    pub fn from_fit(fit: &FitResult<f64>, seed: u64, maps: IndexMaps, n_classes: usize) -> Self {
        Self {
            method: fit.method,
            labels: fit.hard_labels.iter().map(|c| c + 1).collect(),
            posterior: fit.posterior.rows().map(<[f64]>::to_vec).collect(),
            params: ParamsDoc::new(&fit.params),
            n_v: fit.n_violations,
            scores: None,
            iterations: fit.iterations,
            converged: fit.converged,
            seed,
            unsupported_items: fit
                .unsupported_items
                .iter()
                .map(|&n| maps.items[n].clone())
                .collect(),
            index_maps: maps,
            n_classes,
            eta: None,
            eta_search: None,
            constraints: None,
            warnings: Vec::new(),
        }
    }
}

/// Pretty JSON with a trailing newline, to `path` or stdout.
pub fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
