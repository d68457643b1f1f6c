//! `crowdfuse experiment`: constraint-protocol sweeps with repeated runs.
//!
//! Every (protocol, N_C, repeat) cell builds its own constraints, fits
//! VB-ILC (and VB-LC for label-derived constraints) next to the MV / DS / VB
//! baselines of that repeat, and emits one row per method. Cells are
//! independent and run in parallel; rows come out sorted by
//! (protocol, N_C, repeat, method) whatever the thread count.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use crowdfuse::aggregators::{ds_em_fit, majority_vote, vb_lc_fit, vbem_fit, Init, Method};
use crowdfuse::constraints::{count_violations, derive_from_labels, eta_search, ConstraintSet, LabelConstraints};
use crowdfuse::metrics::score;
use crowdfuse::model::{GroundTruth, ResponseMatrix};
use crowdfuse::selection::plan_queries;
use crowdfuse::synth::{diag_dominant_spec, generate};
use crowdfuse::{io, Fit, Options, Priors};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::{parse_eta_grid, usage, PosteriorSource, PriorSource, ViolationsOn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Uniformly random item pairs, answered from the truth.
    RandomConstraints,
    /// Pairs chosen by best-versus-second-best uncertainty sampling.
    BvsbConstraints,
    /// Known labels of random items, and the pairwise constraints they imply.
    LabelDerived,
}

impl Protocol {
    fn id(self) -> u64 {
        match self {
            Protocol::RandomConstraints => 0,
            Protocol::BvsbConstraints => 1,
            Protocol::LabelDerived => 2,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Protocol::RandomConstraints, Protocol::BvsbConstraints, Protocol::LabelDerived])]
    pub protocol: Vec<Protocol>,
    /// Constraint budgets to sweep.
    #[arg(long = "n-c", value_delimiter = ',', default_values_t = [0usize, 50, 100, 150])]
    pub n_c: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Responses CSV; without it a synthetic crowd is drawn per repeat.
    #[arg(long, requires = "truth")]
    pub responses: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub items: usize,
    #[arg(long, default_value_t = 10)]
    pub annotators: usize,
    #[arg(long = "synth-classes", default_value_t = 3)]
    pub synth_classes: usize,
    #[arg(long, default_value_t = 0.65)]
    pub diag: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value = "default")]
    pub priors: PriorSource,
    #[arg(long, default_value = "default")]
    pub eta_grid: String,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t)]
    pub posterior_source: PosteriorSource,
    #[arg(long, value_enum, default_value_t)]
    pub violations_on: ViolationsOn,
    /// Output CSV path (stdout if absent).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

impl ExperimentArgs {
    /// Synthetic sweep with the default crowd shape.
    pub fn synthetic(protocol: Vec<Protocol>, n_c: Vec<usize>, repeats: usize, seed: u64) -> Self {
        Self {
            protocol,
            n_c,
            repeats,
            seed,
            responses: None,
            truth: None,
            classes: None,
            items: 500,
            annotators: 10,
            synth_classes: 3,
            diag: 0.65,
            mu: 1.0,
            priors: PriorSource::DiagWeighted,
            eta_grid: "default".into(),
            max_iters: 100,
            tol: 1e-6,
            posterior_source: PosteriorSource::Vb,
            violations_on: ViolationsOn::Closed,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub protocol: Protocol,
    pub n_c: usize,
    pub repeat: usize,
    pub seed: u64,
    pub method: Method,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub accuracy: f64,
    pub n_v: usize,
    pub eta: Option<f64>,
    pub must_link: usize,
    pub cannot_link: usize,
    pub labels: usize,
}

struct Repeat {
    rm: ResponseMatrix,
    truth: GroundTruth,
    seed: u64,
    baselines: Vec<Fit>,
}

impl Repeat {
    fn vb(&self) -> &Fit {
        &self.baselines[2]
    }
}

struct Built {
    given: ConstraintSet,
    closed: ConstraintSet,
    labels: LabelConstraints,
}

pub fn run(args: &ExperimentArgs) -> anyhow::Result<Vec<ExperimentRow>> {
    if args.repeats == 0 {
        usage!("--repeats must be at least 1");
    }
    let grid = parse_eta_grid(&args.eta_grid)?;
    let opts = Options {
        max_iters: args.max_iters,
        tol: args.tol,
        ..Default::default()
    };
    opts.validate()?;

    let file_data = match (&args.responses, &args.truth) {
        (Some(r), Some(t)) => {
            let d = io::load_dataset(r, Some(t), None, args.classes)?;
            Some((d.responses, d.truth.expect("truth file given"), d.n_classes))
        }
        _ => None,
    };
    let k = file_data.as_ref().map_or(args.synth_classes, |d| d.2);
    let priors: Priors = args.priors.load(k)?;

    let repeats: Vec<Repeat> = (0..args.repeats)
        .into_par_iter()
        .map(|r| -> anyhow::Result<Repeat> {
            let seed = args.seed.wrapping_add(r as u64);
            let (rm, truth) = match &file_data {
                Some((rm, truth, _)) => (rm.clone(), truth.clone()),
                None => {
                    let mut spec = diag_dominant_spec(args.items, args.annotators, k, args.diag, seed)?;
                    spec.mu = vec![args.mu; args.annotators];
                    generate(&spec)?
                }
            };
            priors.check_dims(rm.n_annotators(), k)?;
            let baselines = vec![
                majority_vote(&rm),
                ds_em_fit(&rm, &opts)?,
                vbem_fit(&rm, &priors, &opts)?,
            ];
            Ok(Repeat {
                rm,
                truth,
                seed,
                baselines,
            })
        })
        .collect::<anyhow::Result<_>>()?;

    let mut cells = Vec::new();
    for &p in &args.protocol {
        for &n_c in &args.n_c {
            for r in 0..args.repeats {
                cells.push((p, n_c, r));
            }
        }
    }
    cells.sort();
    cells.dedup();

    let rows: Vec<Vec<ExperimentRow>> = cells
        .par_iter()
        .map(|&(protocol, n_c, r)| {
            run_cell(args, &repeats[r], protocol, n_c, r, k, &priors, &opts, &grid)
                .with_context(|| format!("{protocol:?}, N_C = {n_c}, repeat {r}"))
        })
        .collect::<anyhow::Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    args: &ExperimentArgs,
    rep: &Repeat,
    protocol: Protocol,
    n_c: usize,
    r: usize,
    k: usize,
    priors: &Priors,
    opts: &Options,
    grid: &[f64],
) -> anyhow::Result<Vec<ExperimentRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rep.seed);
    rng.set_stream(1 + ((n_c as u64) << 2 | protocol.id()));
    let built = build_constraints(args, rep, protocol, n_c, &mut rng)?;
    let counted = match args.violations_on {
        ViolationsOn::Given => &built.given,
        ViolationsOn::Closed => &built.closed,
    };

    let from_vb = opts.clone().with_init(Init::Given(rep.vb().posterior.clone()));
    let search = eta_search(&rep.rm, priors, &built.closed, grid, &from_vb)?;
    let mut fits: Vec<(&Fit, Option<f64>)> = rep.baselines.iter().map(|f| (f, None)).collect();
    let lc;
    if protocol == Protocol::LabelDerived {
        lc = vb_lc_fit(&rep.rm, priors, &built.labels, &from_vb)?;
        fits.push((&lc, None));
    }
    fits.push((&search.best_fit, Some(search.best_eta)));

    fits.into_iter()
        .map(|(fit, eta)| {
            let s = score::<f64>(&fit.hard_labels, &rep.truth, k)?;
            Ok(ExperimentRow {
                protocol,
                n_c,
                repeat: r,
                seed: rep.seed,
                method: fit.method,
                macro_f1: s.macro_f1,
                micro_f1: s.micro_f1,
                accuracy: s.accuracy,
                n_v: count_violations(counted, &fit.hard_labels),
                eta,
                must_link: built.closed.must_link().len(),
                cannot_link: built.closed.cannot_link().len(),
                labels: built.labels.len(),
            })
        })
        .collect()
}

fn build_constraints(
    args: &ExperimentArgs,
    rep: &Repeat,
    protocol: Protocol,
    n_c: usize,
    rng: &mut ChaCha8Rng,
) -> anyhow::Result<Built> {
    let known: Vec<usize> = (0..rep.truth.len()).filter(|&n| rep.truth.get(n).is_some()).collect();
    let mut labels = LabelConstraints::new();
    let given = if n_c == 0 {
        ConstraintSet::new()
    } else {
        match protocol {
            Protocol::RandomConstraints => {
                let pairs = known.len() * known.len().saturating_sub(1) / 2;
                if pairs < n_c {
                    usage!("{} items with known truth give only {pairs} pairs, N_C = {n_c}", known.len());
                }
                let mut drawn = std::collections::BTreeSet::new();
                while drawn.len() < n_c {
                    let a = known[rng.gen_range(0..known.len())];
                    let b = known[rng.gen_range(0..known.len())];
                    if a != b {
                        drawn.insert((a.min(b), a.max(b)));
                    }
                }
                answer(&rep.truth, drawn)?
            }
            Protocol::BvsbConstraints => {
                let source = match args.posterior_source {
                    PosteriorSource::Vb => &rep.vb().posterior,
                    PosteriorSource::Mv => &rep.baselines[0].posterior,
                };
                let plan = plan_queries(source, n_c, rng.gen())?;
                answer(&rep.truth, plan.queries)?
            }
            Protocol::LabelDerived => {
                if known.len() < n_c {
                    usage!("only {} items with known truth, N_C = {n_c}", known.len());
                }
                let chosen: Vec<usize> = known.choose_multiple(rng, n_c).copied().collect();
                for n in chosen {
                    labels.insert(n, rep.truth.get(n).expect("known"))?;
                }
                derive_from_labels(&labels)
            }
        }
    };
    let closed = given.close()?;
    Ok(Built { given, closed, labels })
}

/// Queried pairs as ML / CL by the truth, unclosed.
fn answer(truth: &GroundTruth, pairs: impl IntoIterator<Item = (usize, usize)>) -> anyhow::Result<ConstraintSet> {
    let mut cs = ConstraintSet::new();
    for (a, b) in pairs {
        match (truth.get(a), truth.get(b)) {
            (Some(x), Some(y)) if x == y => cs.add_must_link(a, b)?,
            (Some(_), Some(_)) => cs.add_cannot_link(a, b)?,
            _ => usage!("no truth for queried pair ({a}, {b})"),
        }
    }
    Ok(cs)
}

pub fn write_csv(rows: &[ExperimentRow], out: Option<&std::path::Path>) -> anyhow::Result<()> {
    let sink: Box<dyn std::io::Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
