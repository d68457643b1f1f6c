//! `crowdfuse aggregate`: one fit of one method on one dataset.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use crowdfuse::aggregators::{ds_em_fit, majority_vote, vb_ilc_fit, vb_lc_fit, vbem_fit, Init, Method};
use crowdfuse::constraints::{
    count_violations, derive_from_labels, eta_search, CloseOptions, ConstraintSet, LabelConstraints, Link,
};
use crowdfuse::io::{self, Dataset};
use crowdfuse::metrics::score;
use crowdfuse::selection::{answer_queries, plan_queries, QueryPlan};
use crowdfuse::{Fit, Options, Priors};

use crate::output::{ConstraintSummary, EtaRow, EtaTable, IndexMaps, ResultDoc};
use crate::{parse_eta_grid, usage, PosteriorSource, PriorSource, ViolationsOn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Mv,
    Ds,
    Vb,
    VbLc,
    VbIlc,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mv => Method::MajorityVote,
            MethodArg::Ds => Method::DawidSkene,
            MethodArg::Vb => Method::Vb,
            MethodArg::VbLc => Method::VbLc,
            MethodArg::VbIlc => Method::VbIlc,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AggregateArgs {
    /// Responses CSV (`item,annotator,label`).
    #[arg(long)]
    pub responses: PathBuf,
    /// Truth CSV (`item,label`); enables scores and query answering.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Constraints CSV (`kind,a,b`).
    #[arg(long)]
    pub constraints: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Number of classes; defaults to the largest label seen.
    #[arg(long)]
    pub classes: Option<usize>,
    /// `default` (diagonal-weighted), `uniform` or a priors JSON file.
    #[arg(long, default_value = "default")]
    pub priors: PriorSource,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Fixed constraint weight for vb-ilc.
    #[arg(long, conflicts_with = "eta_grid")]
    pub eta: Option<f64>,
    /// Candidate weights for vb-ilc (`default` or a comma list); used when --eta is absent.
    #[arg(long)]
    pub eta_grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Query this many constraints by uncertainty sampling, answered from --truth.
    #[arg(long)]
    pub select: Option<usize>,
    #[arg(long, value_enum, default_value_t)]
    pub posterior_source: PosteriorSource,
    /// Write the query plan as a QUERY constraints CSV.
    #[arg(long)]
    pub plan_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub violations_on: ViolationsOn,
    /// Also infer ML from two CLs against a common item (binary classes only).
    #[arg(long)]
    pub binary_cl_rule: bool,
    /// Output JSON path (stdout if absent).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

impl AggregateArgs {
    pub fn new(responses: PathBuf, method: MethodArg) -> Self {
        Self {
            responses,
            truth: None,
            constraints: None,
            method,
            classes: None,
            priors: PriorSource::DiagWeighted,
            max_iters: 100,
            tol: 1e-6,
            eta: None,
            eta_grid: None,
            seed: 0,
            select: None,
            posterior_source: PosteriorSource::Vb,
            plan_out: None,
            violations_on: ViolationsOn::Closed,
            binary_cl_rule: false,
            out: None,
        }
    }
}

pub fn run(args: &AggregateArgs) -> anyhow::Result<ResultDoc> {
    let data = io::load_dataset(
        &args.responses,
        args.truth.as_deref(),
        args.constraints.as_deref(),
        args.classes,
    )?;
    let k = data.n_classes;
    let rm = &data.responses;
    let priors: Priors = args.priors.load(k)?;
    priors.check_dims(rm.n_annotators(), k)?;
    let opts = Options {
        max_iters: args.max_iters,
        tol: args.tol,
        seed: args.seed,
        ..Default::default()
    };
    opts.validate()?;
    let mut warnings = Vec::new();
    if data.k_mismatch() {
        warnings.push(format!(
            "configured K = {k} but the largest label seen is {}",
            data.max_observed_label
        ));
    }

    let records = data.constraints.clone().unwrap_or_default();
    if !records.queries.is_empty() {
        warnings.push(format!("{} unanswered QUERY rows ignored", records.queries.len()));
    }
    let labels: LabelConstraints = records.label_constraints()?;
    let mut given: ConstraintSet = records.constraint_set()?;
    merge(&mut given, &derive_from_labels(&labels))?;

    let method = Method::from(args.method);
    let needs_vb = matches!(method, Method::Vb | Method::VbLc | Method::VbIlc)
        || (args.select.is_some() && args.posterior_source == PosteriorSource::Vb);
    let vb = needs_vb.then(|| vbem_fit(rm, &priors, &opts)).transpose()?;

    let mut plan = QueryPlan::empty();
    if let Some(n_c) = args.select {
        let Some(truth) = &data.truth else {
            usage!("--select needs --truth to answer the queries");
        };
        let source = match (&vb, args.posterior_source) {
            (Some(fit), PosteriorSource::Vb) => fit.posterior.clone(),
            _ => majority_vote::<f64>(rm).posterior,
        };
        plan = plan_queries(&source, n_c, args.seed)?;
        if plan.uniform_fallback {
            warnings.push("all selection weights were zero somewhere; sampled uniformly".into());
        }
        merge(&mut given, &answer_queries(&plan, truth)?)?;
        if let Some(path) = &args.plan_out {
            io::write_query_plan(std::fs::File::create(path)?, &plan, &data.items)?;
        }
    }
    let closed = given.close_with(CloseOptions {
        binary_cl_rule: args.binary_cl_rule,
    })?;

    let from_vb = |vb: &Option<Fit>| -> Options {
        let init = vb.as_ref().map_or(Init::MajorityVote, |f| Init::Given(f.posterior.clone()));
        opts.clone().with_init(init)
    };
    let mut eta = None;
    let mut eta_table = None;
    let fit: Fit = match method {
        Method::MajorityVote => majority_vote(rm),
        Method::DawidSkene => ds_em_fit(rm, &opts)?,
        Method::Vb => vb.clone().expect("vb fit computed"),
        Method::VbLc => vb_lc_fit(rm, &priors, &labels, &from_vb(&vb))?,
        Method::VbIlc => {
            if closed.is_empty() {
                usage!("vb-ilc needs ML/CL/LABEL constraints or --select");
            }
            let o = from_vb(&vb);
            match args.eta {
                Some(e) => {
                    eta = Some(e);
                    vb_ilc_fit(rm, &priors, &closed, &o.with_eta(e))?
                }
                None => {
                    let grid = parse_eta_grid(args.eta_grid.as_deref().unwrap_or("default"))?;
                    let search = eta_search(rm, &priors, &closed, &grid, &o)?;
                    eta = Some(search.best_eta);
                    eta_table = Some(EtaTable {
                        best_eta: search.best_eta,
                        table: search.table.iter().map(|&(eta, n_v)| EtaRow { eta, n_v }).collect(),
                    });
                    search.best_fit
                }
            }
        }
    };

    let mut doc = ResultDoc::from_fit(&fit, args.seed, IndexMaps::new(&data.items, &data.annotators), k);
    doc.eta = eta;
    doc.eta_search = eta_table;
    if !closed.is_empty() || !labels.is_empty() {
        let counted = match args.violations_on {
            ViolationsOn::Given => &given,
            ViolationsOn::Closed => &closed,
        };
        doc.n_v = Some(count_violations(counted, &fit.hard_labels));
        doc.constraints = Some(summary(&data, &closed, &labels, &plan, args.violations_on));
    }
    if let Some(truth) = &data.truth {
        if truth.n_known() > 0 {
            doc.scores = Some(score(&fit.hard_labels, truth, k)?);
        }
    }
    if !doc.unsupported_items.is_empty() {
        warnings.push(format!("{} items have no information", doc.unsupported_items.len()));
    }
    doc.warnings = warnings;
    Ok(doc)
}

fn summary(
    data: &Dataset,
    closed: &ConstraintSet,
    labels: &LabelConstraints,
    plan: &QueryPlan,
    on: ViolationsOn,
) -> ConstraintSummary {
    ConstraintSummary {
        must_link: closed.must_link().len(),
        cannot_link: closed.cannot_link().len(),
        labels: labels.len(),
        violations_on: match on {
            ViolationsOn::Given => "given",
            ViolationsOn::Closed => "closed",
        }
        .into(),
        queries: plan
            .queries
            .iter()
            .map(|&(a, b)| (data.items.id(a).to_owned(), data.items.id(b).to_owned()))
            .collect(),
    }
}

fn merge(into: &mut ConstraintSet, from: &ConstraintSet) -> crowdfuse::Result<()> {
    for (p, link) in from.pairs() {
        match link {
            Link::Must => into.add_must_link(p.first(), p.second())?,
            Link::Cannot => into.add_cannot_link(p.first(), p.second())?,
        }
    }
    Ok(())
}
