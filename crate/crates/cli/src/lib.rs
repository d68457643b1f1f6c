//! Command-line driver for `crowdfuse`: aggregation runs, experiment sweeps,
//! synthetic crowds and bound reports.
//!
//! The subcommands live here as plain functions over clap argument structs so
//! tests can call them without spawning the binary.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::ValueEnum;
use crowdfuse::constraints::DEFAULT_ETA_GRID;
use crowdfuse::{io, Priors};

pub mod aggregate;
pub mod bounds_cmd;
pub mod experiment;
pub mod exit;
pub mod output;
pub mod synth_cmd;

/// Reads `CROWDFUSE_THREADS` and sizes the global worker pool (1 when unset).
pub fn init_threads() -> anyhow::Result<usize> {
    let n = match std::env::var("CROWDFUSE_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("CROWDFUSE_THREADS must be a positive integer, got `{v}`"))?,
        Err(_) => 1,
    };
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(n)
}

/// Where Dirichlet priors come from.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSource {
    /// α₀ = 1, β₀ with K on the diagonal.
    DiagWeighted,
    /// All ones.
    Uniform,
    File(PathBuf),
}

impl FromStr for PriorSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "default" | "paper-default" => PriorSource::DiagWeighted,
            "uniform" => PriorSource::Uniform,
            path => PriorSource::File(PathBuf::from(path)),
        })
    }
}

impl PriorSource {
    pub fn load(&self, n_classes: usize) -> anyhow::Result<Priors> {
        Ok(match self {
            PriorSource::DiagWeighted => Priors::diag_weighted(n_classes)?,
            PriorSource::Uniform => Priors::uniform(n_classes)?,
            PriorSource::File(p) => io::read_priors(p)?,
        })
    }
}

/// `default` for the built-in grid, or a comma-separated list.
pub fn parse_eta_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    if s == "default" {
        return Ok(DEFAULT_ETA_GRID.to_vec());
    }
    let grid = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad eta value `{x}`")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if grid.is_empty() || grid.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        bail!("eta grid needs finite non-negative values");
    }
    Ok(grid)
}

/// Which posterior ranks items for uncertainty sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum PosteriorSource {
    #[default]
    Vb,
    Mv,
}

/// Which constraint set N_V counts over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ViolationsOn {
    /// The constraints as given (or as queried), before closure.
    Given,
    /// Their closure, which is what the fit sees.
    #[default]
    Closed,
}
