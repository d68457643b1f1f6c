//! `crowdfuse synth`: sample a crowd and write it in the input formats.

use std::fs::File;
use std::path::{Path, PathBuf};

use clap::Args;
use crowdfuse::io;
use crowdfuse::model::IdIndex;
use crowdfuse::numerics::ProbVector;
use crowdfuse::synth::{diag_dominant_spec, generate};
use crowdfuse::Crowd;

use crate::output::write_json;
use crate::usage;

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Full crowd spec as JSON; replaces the shape flags below.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    pub items: usize,
    #[arg(long, default_value_t = 10)]
    pub annotators: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Probability of a correct answer; errors are spread evenly.
    #[arg(long, default_value_t = 0.65)]
    pub diag: f64,
    /// Response probability: one value or one per annotator (comma list).
    #[arg(long, default_value = "1")]
    pub mu: String,
    /// Class priors as a comma list (uniform if absent).
    #[arg(long)]
    pub pi: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for responses.csv, truth.csv and spec.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn floats(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|x| Ok(x.trim().parse::<f64>()?))
        .collect()
}

pub fn build_spec(args: &SynthArgs) -> anyhow::Result<Crowd> {
    if let Some(path) = &args.spec {
        let spec: Crowd = serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?;
        spec.validate()?;
        return Ok(spec);
    }
    let mut spec = diag_dominant_spec(args.items, args.annotators, args.classes, args.diag, args.seed)?;
    let mu = floats(&args.mu)?;
    spec.mu = match mu.len() {
        1 => vec![mu[0]; args.annotators],
        n if n == args.annotators => mu,
        n => usage!("--mu has {n} values for {} annotators", args.annotators),
    };
    if let Some(pi) = &args.pi {
        spec.pi_star = ProbVector::new(floats(pi)?)?;
    }
    spec.validate()?;
    Ok(spec)
}

/// 1-based numeric ids, as written by `synth`.
pub fn numbered(n: usize) -> IdIndex {
    IdIndex::from((1..=n).map(|i| i.to_string()).collect::<Vec<_>>())
}

pub fn run(args: &SynthArgs) -> anyhow::Result<()> {
    let spec = build_spec(args)?;
    write_crowd(&spec, &args.out_dir)
}

pub fn write_crowd(spec: &Crowd, dir: &Path) -> anyhow::Result<()> {
    let (rm, truth) = generate(spec)?;
    std::fs::create_dir_all(dir)?;
    let items = numbered(spec.n_items);
    let annotators = numbered(spec.n_annotators);
    io::write_responses(File::create(dir.join("responses.csv"))?, &rm, &items, &annotators)?;
    io::write_truth(File::create(dir.join("truth.csv"))?, &truth, &items)?;
    write_json(spec, Some(&dir.join("spec.json")))
}
