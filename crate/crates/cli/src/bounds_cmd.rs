//! `crowdfuse bounds`: evaluate the error bounds against a finished run.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use crowdfuse::aggregators::FitResult;
use crowdfuse::bounds::{
    bound_report, empirical_vs_bound, item_constraint_counts, label_errors, parameter_errors, BoundInputs,
    ExponentForm,
};
use crowdfuse::constraints::derive_from_labels;
use crowdfuse::io;
use crowdfuse::model::{GroundTruth, IdIndex, LabelPosterior};
use crowdfuse::{Crowd, Error, Inputs, Report};

use crate::output::ResultDoc;
use crate::{usage, PriorSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum FormArg {
    #[default]
    Theorem,
    Lemma,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    /// Crowd spec JSON (as written by `synth`).
    #[arg(long)]
    pub spec: PathBuf,
    /// Result JSON of `aggregate` on that crowd.
    #[arg(long)]
    pub result: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Constraints the run used, for the per-item bounds.
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    /// Priors the run used.
    #[arg(long, default_value = "default")]
    pub priors: PriorSource,
    #[arg(long, value_enum, default_value_t)]
    pub form: FormArg,
    /// Parameter errors entering the bound; default to the run's actual errors.
    #[arg(long)]
    pub eps_pi: Option<f64>,
    #[arg(long)]
    pub eps_gamma: Option<f64>,
    /// Label error entering W_n; defaults to the run's actual max label error.
    #[arg(long)]
    pub eps_q: Option<f64>,
    /// Constraint weight; defaults to the run's η (0 if none).
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub g_pi: f64,
    #[arg(long, default_value_t = 0.0)]
    pub g_gamma: f64,
    /// Evaluate ν with t = this fraction of μ π* γ* and r = --r-frac of π*.
    #[arg(long, requires = "r_frac")]
    pub t_frac: Option<f64>,
    #[arg(long, requires = "t_frac")]
    pub r_frac: Option<f64>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn dims(msg: String) -> anyhow::Error {
    Error::Domain(msg).into()
}

pub fn run(args: &BoundsArgs) -> anyhow::Result<Report> {
    let spec: Crowd = serde_json::from_reader(BufReader::new(File::open(&args.spec)?))?;
    spec.validate()?;
    let doc: ResultDoc = serde_json::from_reader(BufReader::new(File::open(&args.result)?))?;
    let (n, m, k) = (spec.n_items, spec.n_annotators, spec.n_classes);
    if doc.n_classes != k || doc.index_maps.items.len() != n || doc.index_maps.annotators.len() != m {
        return Err(dims(format!(
            "result has {} items, {} annotators, {} classes; spec has {n}, {m}, {k}",
            doc.index_maps.items.len(),
            doc.index_maps.annotators.len(),
            doc.n_classes
        )));
    }

    // spec.json numbers annotators 1..M; reorder the fitted confusion to match
    let mut params = doc.params.as_point();
    if let crowdfuse::aggregators::ModelParams::Point(p) = &mut params {
        let mut gamma = vec![Vec::new(); m];
        for (idx, id) in doc.index_maps.annotators.iter().enumerate() {
            let j = id
                .parse::<usize>()
                .ok()
                .filter(|j| (1..=m).contains(j))
                .ok_or_else(|| dims(format!("annotator id `{id}` is not one of 1..{m}")))?;
            gamma[j - 1] = p.gamma[idx].clone();
        }
        p.gamma = gamma;
    }

    let mut items = IdIndex::from(doc.index_maps.items.clone());
    let pairs = io::parse_truth(File::open(&args.truth)?, &args.truth.display().to_string(), &mut items, Some(k))?;
    let cons = args
        .constraints
        .as_ref()
        .map(|p| io::parse_constraints(File::open(p)?, &p.display().to_string(), &mut items, Some(k)))
        .transpose()?;
    if items.len() != n {
        return Err(dims(format!("truth or constraints mention {} items beyond the result", items.len() - n)));
    }
    let mut labels = vec![None; n];
    for (i, c) in pairs {
        labels[i] = Some(c);
    }
    let truth = GroundTruth::new(labels, k)?;

    let fit = FitResult {
        method: doc.method,
        posterior: LabelPosterior::from_rows(doc.posterior.clone(), k)?,
        params,
        hard_labels: doc.labels.iter().map(|l| l - 1).collect(),
        iterations: doc.iterations,
        converged: doc.converged,
        trace: Vec::new(),
        n_violations: doc.n_v,
        unsupported_items: Vec::new(),
    };

    let mut inputs: Inputs = BoundInputs::new(spec.clone(), args.priors.load(k)?);
    let actual = parameter_errors(&fit.params, &spec)?;
    (inputs.eps_pi, inputs.eps_gamma) = match (args.eps_pi, args.eps_gamma, actual) {
        (Some(a), Some(b), _) => (a, b),
        (a, b, Some((pe, ge))) => (a.unwrap_or(pe), b.unwrap_or(ge)),
        _ => usage!("the run has no parameter estimates; pass --eps-pi and --eps-gamma"),
    };
    inputs.eps_q = match args.eps_q {
        Some(e) => e,
        None => label_errors(&fit, &truth)?.into_iter().flatten().fold(0.0, f64::max),
    };
    inputs.eta = args.eta.or(doc.eta).unwrap_or(0.0);
    inputs.form = match args.form {
        FormArg::Theorem => ExponentForm::Theorem,
        FormArg::Lemma => ExponentForm::Lemma,
    };
    if let Some(c) = &cons {
        let mut cs = c.constraint_set()?;
        for (p, link) in derive_from_labels(&c.label_constraints()?).pairs() {
            match link {
                crowdfuse::constraints::Link::Must => cs.add_must_link(p.first(), p.second())?,
                crowdfuse::constraints::Link::Cannot => cs.add_cannot_link(p.first(), p.second())?,
            }
        }
        inputs.constraint_counts = item_constraint_counts(&cs.close()?, &truth, k)?;
    }

    let nu_args = match (args.t_frac, args.r_frac) {
        (Some(tf), Some(rf)) => {
            let t = (0..m)
                .map(|a| {
                    (0..k)
                        .map(|c| (0..k).map(|l| tf * spec.mu[a] * spec.pi_star[c] * spec.gamma(a, c, l)).collect())
                        .collect()
                })
                .collect();
            Some((t, spec.pi_star.iter().map(|p| rf * p).collect()))
        }
        _ => None,
    };
    let report = bound_report(&inputs, args.g_pi, args.g_gamma, nu_args.as_ref())?;
    Ok(empirical_vs_bound(&fit, &truth, &spec, &report)?)
}
