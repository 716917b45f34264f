use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use unmix_core::solver::{DEFAULT_MAX_ITER, DEFAULT_REL_TOL};
use unmix_core::subspace::DEFAULT_THRESHOLD;

use crate::failure::{CmdResult, Failure};

/// Hyperspectral unmixing with graph-regularized and plain NMF.
#[derive(Debug, Parser)]
#[command(name = "unmix", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene directory from a JSON config.
    Simulate(SimulateArgs),
    /// Estimate the number of endmembers by PCA.
    EstimateP(EstimateArgs),
    /// Factorize a scene with NMF or GNMF.
    Unmix(UnmixArgs),
    /// Score run directories against the scene ground truth.
    Evaluate(EvaluateArgs),
    /// simulate -> nmf -> gnmf -> evaluate for every seed, then aggregate.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scene config (JSON).
    pub config: PathBuf,
    /// Output scene directory.
    pub out: PathBuf,
    /// Spectral library CSV [default: library.csv next to the config].
    #[arg(long)]
    pub library: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Scene directory.
    pub scene: PathBuf,
    /// Cumulative explained-variance threshold in (0, 1].
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Mean-center the pixels before PCA.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub centered: bool,
    /// Directory for estimate_p.json and the manifest.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Nmf,
    Gnmf,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Nmf => "nmf",
            Method::Gnmf => "gnmf",
        }
    }

    /// Column heading in evaluation tables.
    pub fn label(self) -> &'static str {
        match self {
            Method::Nmf => "NMF",
            Method::Gnmf => "GNMF",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "nmf" => Some(Method::Nmf),
            "gnmf" => Some(Method::Gnmf),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphKind {
    Spatial4,
    Spatial8,
    Knn,
}

impl GraphKind {
    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Spatial4 => "spatial4",
            GraphKind::Spatial8 => "spatial8",
            GraphKind::Knn => "knn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingKind {
    Binary,
    Heat,
    Dot,
}

impl WeightingKind {
    pub fn name(self) -> &'static str {
        match self {
            WeightingKind::Binary => "binary",
            WeightingKind::Heat => "heat",
            WeightingKind::Dot => "dot",
        }
    }
}

/// Solver and graph flags shared by `unmix` and `pipeline`.
#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    /// Graph regularization weight (gnmf only) [default: 100].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Pixel graph (gnmf only) [default: knn].
    #[arg(long, value_enum)]
    pub graph: Option<GraphKind>,
    /// Neighbours per pixel for the knn graph [default: 5].
    #[arg(long)]
    pub knn_p: Option<usize>,
    /// Edge weighting for the knn graph [default: binary].
    #[arg(long, value_enum)]
    pub weighting: Option<WeightingKind>,
    /// Heat-kernel bandwidth [default: mean squared edge length].
    #[arg(long)]
    pub sigma_h: Option<f64>,
    /// Number of endmembers [default: number of scene materials].
    #[arg(long)]
    pub endmembers: Option<usize>,
    /// Initialization seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Relative objective-change stopping tolerance.
    #[arg(long, default_value_t = DEFAULT_REL_TOL)]
    pub tol: f64,
    /// Skip the per-iteration abundance sum-to-one rescaling.
    #[arg(long)]
    pub no_asc: bool,
}

impl SolverFlags {
    /// Drops every graph-related setting, leaving the plain NMF options.
    pub fn strip_graph(&mut self) {
        self.lambda = None;
        self.graph = None;
        self.knn_p = None;
        self.weighting = None;
        self.sigma_h = None;
    }
}

#[derive(Debug, Args)]
pub struct UnmixArgs {
    /// Scene directory.
    pub scene: PathBuf,
    /// Output run directory.
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    #[command(flatten)]
    pub flags: SolverFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Scene directory holding the ground truth.
    pub scene: PathBuf,
    /// One or more run directories.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Directory for the eval JSON files, table and manifest.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Scene config (JSON); its seed is replaced by each sweep seed.
    pub config: PathBuf,
    /// Output directory.
    pub out: PathBuf,
    /// Seeds as a comma list and/or inclusive ranges, e.g. `1..10` or `1,4,7..9`.
    #[arg(long)]
    pub seeds: String,
    /// Spectral library CSV [default: library.csv next to the config].
    #[arg(long)]
    pub library: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverFlags,
}

/// Parses `1..10`, `3`, `1,2,5..7`. Duplicates are rejected; an empty list is an error.
pub fn parse_seeds(text: &str) -> CmdResult<Vec<u64>> {
    let bad = |part: &str| Failure::usage(format!("--seeds: cannot parse {part:?}"));
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad(part))?;
            let b: u64 = b.trim().parse().map_err(|_| bad(part))?;
            if a > b {
                return Err(bad(part));
            }
            seeds.extend(a..=b);
        } else {
            seeds.push(part.parse().map_err(|_| bad(part))?);
        }
    }
    if seeds.is_empty() {
        return Err(Failure::usage("--seeds: the seed list is empty"));
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Failure::usage("--seeds: duplicate seed"));
    }
    Ok(seeds)
}
