//! Command-line flags and the JSON config file that mirrors them.
//!
//! Every flag may also be given as a key of the `--config` file (same name,
//! underscores instead of dashes). Flags win over the file.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gnn_certify::{
    ActivationKind, ActivationSpec, Architecture, Error, GrowthEnvelope, Network, QuadratureScheme, Result,
    SimulationSettings,
};
use serde::Deserialize;

pub const THREADS_ENV: &str = "GNN_CERTIFY_THREADS";

#[derive(Debug, Parser)]
#[command(name = "gnn-certify", version, about = "Certified Gaussian-approximation bounds for random Gaussian neural networks")]
pub struct Cli {
    /// JSON file with default values for any flag
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output format (default: csv for `table`, json otherwise)
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Starting number of Gauss-Legendre nodes per half-line
    #[arg(long, global = true)]
    pub quad_nodes: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundKind {
    /// One hidden layer, univariate output: Kolmogorov, TV and W1 bounds
    Shallow,
    /// Any depth: convex-distance and W1 bounds
    Deep,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certified distance bounds
    Bound {
        #[arg(value_enum)]
        kind: BoundKind,
        #[command(flatten)]
        net: NetworkArgs,
        /// Restrict the output to one metric (kolmogorov, total_variation, wasserstein1, convex)
        #[arg(long)]
        metric: Option<String>,
    },
    /// Certified interval for the probability that the output lies in a box
    Localize {
        #[command(flatten)]
        net: NetworkArgs,
        /// Box as lo:hi,lo:hi,... with inf/-inf allowed
        #[arg(long, allow_hyphen_values = true)]
        rect: Option<String>,
        /// tv_shallow or convex_deep (default: chosen from the architecture)
        #[arg(long)]
        mode: Option<String>,
    },
    /// Monte-Carlo draws of the network output or of a collective observable
    Simulate {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Sample the collective observable of this hidden layer instead of the output
        #[arg(long)]
        layer: Option<usize>,
        /// Write the draws here (.csv for CSV, anything else for the binary format)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the certified bounds against simulation on a preset network
    Validate {
        /// shallow-relu, collective or deep-relu
        #[arg(long)]
        preset: Option<String>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Recompute a published table
    Table {
        /// Table number, 1 to 4
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        id: Option<u8>,
        /// Divide Table 2 by sqrt(C_b + C_W O0), which reproduces the printed grid
        #[arg(long)]
        table2_normalized: bool,
    },
    /// Shallow bounds from the growth-envelope and the variance formulas side by side
    Compare {
        #[command(flatten)]
        net: NetworkArgs,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct NetworkArgs {
    /// relu, perceptron, sigmoid, tanh, sine, softplus, swish, sqrt_relu, monomial:k, constant:c, custom:<base>
    #[arg(long)]
    pub activation: Option<String>,
    /// Bias variance C_b
    #[arg(long)]
    pub cb: Option<f64>,
    /// Weight variance scale C_W
    #[arg(long)]
    pub cw: Option<f64>,
    /// Input point, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub input: Option<Vec<f64>>,
    /// File with the input point (numbers separated by commas or whitespace)
    #[arg(long)]
    pub input_file: Option<PathBuf>,
    /// Hidden widths n_1,...,n_L
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    /// Output dimension
    #[arg(long)]
    pub nout: Option<usize>,
    /// Lipschitz constant of the activation (overrides the catalog value)
    #[arg(long)]
    pub lip: Option<f64>,
    /// Lipschitz constant of the squared activation
    #[arg(long)]
    pub lip_sq: Option<f64>,
    /// Growth envelope r1,r2,gamma
    #[arg(long, value_delimiter = ',')]
    pub growth: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    /// Master seed (default 0)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of Monte-Carlo replicates
    #[arg(long)]
    pub samples: Option<usize>,
    /// Worker threads (capped by GNN_CERTIFY_THREADS)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Budget on multiply-adds
    #[arg(long)]
    pub max_work: Option<f64>,
    /// Budget on stored values
    #[arg(long)]
    pub max_stored: Option<usize>,
}

/// Everything the config file may set.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub format: Option<Format>,
    pub quad_nodes: Option<usize>,
    pub activation: Option<String>,
    pub cb: Option<f64>,
    pub cw: Option<f64>,
    pub input: Option<Vec<f64>>,
    pub input_file: Option<PathBuf>,
    pub widths: Option<Vec<usize>>,
    pub nout: Option<usize>,
    pub lip: Option<f64>,
    pub lip_sq: Option<f64>,
    pub growth: Option<Vec<f64>>,
    pub metric: Option<String>,
    pub rect: Option<String>,
    pub mode: Option<String>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub workers: Option<usize>,
    pub max_work: Option<f64>,
    pub max_stored: Option<usize>,
    pub layer: Option<usize>,
    pub out: Option<PathBuf>,
    pub preset: Option<String>,
    pub id: Option<u8>,
    pub table2_normalized: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("config {}: {e}", path.display())))
    }

    pub fn network(&self) -> NetworkArgs {
        NetworkArgs {
            activation: self.activation.clone(),
            cb: self.cb,
            cw: self.cw,
            input: self.input.clone(),
            input_file: self.input_file.clone(),
            widths: self.widths.clone(),
            nout: self.nout,
            lip: self.lip,
            lip_sq: self.lip_sq,
            growth: self.growth.clone(),
        }
    }

    pub fn simulation(&self) -> SimArgs {
        SimArgs {
            seed: self.seed,
            samples: self.samples,
            workers: self.workers,
            max_work: self.max_work,
            max_stored: self.max_stored,
        }
    }
}

impl NetworkArgs {
    /// Flags first, then the config file.
    pub fn or(self, file: NetworkArgs) -> NetworkArgs {
        NetworkArgs {
            activation: self.activation.or(file.activation),
            cb: self.cb.or(file.cb),
            cw: self.cw.or(file.cw),
            input: self.input.or(file.input),
            input_file: self.input_file.or(file.input_file),
            widths: self.widths.or(file.widths),
            nout: self.nout.or(file.nout),
            lip: self.lip.or(file.lip),
            lip_sq: self.lip_sq.or(file.lip_sq),
            growth: self.growth.or(file.growth),
        }
    }

    fn activation(&self) -> Result<ActivationSpec> {
        let name = self
            .activation
            .as_deref()
            .ok_or_else(|| Error::Parse("--activation is required".into()))?;
        let kind: ActivationKind = name.parse()?;
        let growth = match &self.growth {
            None => None,
            Some(g) if g.len() == 3 => Some(GrowthEnvelope::new(g[0], g[1], g[2])?),
            Some(g) => {
                return Err(Error::Parse(format!("--growth takes r1,r2,gamma, got {} values", g.len())));
            }
        };
        let overridden = self.lip.is_some() || self.lip_sq.is_some() || growth.is_some();
        match kind {
            ActivationKind::Custom(base) => ActivationSpec::custom(*base, self.lip, self.lip_sq, growth),
            kind if overridden => {
                let catalog = ActivationSpec::new(kind.clone())?;
                ActivationSpec::custom(
                    kind,
                    self.lip.or(catalog.lip),
                    self.lip_sq.or(catalog.lip_sq),
                    growth.or(catalog.growth),
                )
            }
            kind => ActivationSpec::new(kind),
        }
    }

    fn input(&self) -> Result<Vec<f64>> {
        match (&self.input, &self.input_file) {
            (Some(x), _) => Ok(x.clone()),
            (None, Some(path)) => {
                let text = fs::read_to_string(path)?;
                text.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| Error::Parse(format!("{}: bad number {t:?}", path.display())))
                    })
                    .collect()
            }
            (None, None) => Err(Error::Parse("--input or --input-file is required".into())),
        }
    }

    pub fn network(&self, quad_nodes: Option<usize>) -> Result<Network> {
        let activation = self.activation()?;
        let input = self.input()?;
        let widths = self
            .widths
            .clone()
            .ok_or_else(|| Error::Parse("--widths is required".into()))?;
        let arch = Architecture::new(
            input.len(),
            widths,
            self.nout.unwrap_or(1),
            self.cb.unwrap_or(1.0),
            self.cw.unwrap_or(1.0),
        )?;
        let net = Network::new(activation, arch, input)?;
        match quad_nodes {
            Some(n) => net.with_quadrature(QuadratureScheme::with_nodes(n)?),
            None => Ok(net),
        }
    }
}

impl SimArgs {
    pub fn or(self, file: SimArgs) -> SimArgs {
        SimArgs {
            seed: self.seed.or(file.seed),
            samples: self.samples.or(file.samples),
            workers: self.workers.or(file.workers),
            max_work: self.max_work.or(file.max_work),
            max_stored: self.max_stored.or(file.max_stored),
        }
    }

    pub fn settings(&self, default_samples: usize) -> Result<SimulationSettings> {
        let mut s = SimulationSettings::new(self.seed.unwrap_or(0), self.samples.unwrap_or(default_samples));
        s.workers = capped_workers(self.workers.unwrap_or(0), thread_cap()?);
        if let Some(w) = self.max_work {
            s.max_work = w;
        }
        if let Some(w) = self.max_stored {
            s.max_stored = w;
        }
        Ok(s)
    }
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| Error::Parse(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
    }
}

/// `0` means "all available"; the environment cap applies either way.
fn capped_workers(requested: usize, cap: Option<usize>) -> usize {
    match (requested, cap) {
        (0, Some(c)) => c,
        (r, Some(c)) => r.min(c),
        (r, None) => r,
    }
}
