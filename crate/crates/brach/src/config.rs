//! Run configuration: TOML file, environment and command-line flags, in
//! increasing precedence.

use std::fs;
use std::path::{Path, PathBuf};

use brach_core::lattice::{LatticeSpec, Mask, WeightProfile};
use brach_core::ode::OdeConfig;
use brach_core::shooting::ShootingConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Environment variable overriding the store location.
pub const STORE_ENV: &str = "BRACH_STORE";
pub const DEFAULT_STORE: &str = "brach-store";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    pub n: Option<usize>,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub weights: String,
    pub mask: String,
    pub j0: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { n: None, n_min: None, n_max: None, weights: String::from("power:2"), mask: String::from("all"), j0: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub ode_tol: f64,
    pub nodes: usize,
    pub jitter_retries: usize,
    pub seed: u64,
    pub fidelity_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = ShootingConfig::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            ode_tol: d.ode.abs_tol,
            nodes: d.nodes,
            jitter_retries: d.jitter_retries,
            seed: d.seed,
            fidelity_tol: d.fidelity_tol,
        }
    }
}

impl SolverConfig {
    pub fn shooting(&self) -> Result<ShootingConfig> {
        let cfg = ShootingConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            nodes: self.nodes,
            jitter_retries: self.jitter_retries,
            seed: self.seed,
            fidelity_tol: self.fidelity_tol,
            ode: OdeConfig::with_tolerance(self.ode_tol),
            ..ShootingConfig::default()
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub store: Option<PathBuf>,
    pub lattice: LatticeConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

/// Flag values; `None` leaves the file value in place.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct LatticeFlags {
    /// Number of sites.
    #[arg(long)]
    pub n: Option<usize>,
    /// Weight profile: power:K | list:g1,g2,... | matrix:FILE | quadratic | unpenalized.
    #[arg(long)]
    pub weights: Option<String>,
    /// Coupling mask: all | nn | pairs:1-2,2-3,... (1-based sites).
    #[arg(long)]
    pub mask: Option<String>,
    /// Coupling resource J0.
    #[arg(long)]
    pub j0: Option<f64>,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct SolverFlags {
    /// Newton residual tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Integrator absolute and relative tolerance.
    #[arg(long)]
    pub ode_tol: Option<f64>,
    /// Output nodes per protocol.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub jitter_retries: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct OutputFlags {
    /// Directory for written artifacts.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|source| CliError::Toml { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn apply_lattice(&mut self, f: &LatticeFlags) {
        if let Some(n) = f.n {
            self.lattice.n = Some(n);
        }
        if let Some(w) = &f.weights {
            self.lattice.weights = w.clone();
        }
        if let Some(m) = &f.mask {
            self.lattice.mask = m.clone();
        }
        if let Some(j0) = f.j0 {
            self.lattice.j0 = j0;
        }
    }

    pub fn apply_solver(&mut self, f: &SolverFlags) {
        let s = &mut self.solver;
        s.tol = f.tol.unwrap_or(s.tol);
        s.max_iter = f.max_iter.unwrap_or(s.max_iter);
        s.ode_tol = f.ode_tol.unwrap_or(s.ode_tol);
        s.nodes = f.nodes.unwrap_or(s.nodes);
        s.jitter_retries = f.jitter_retries.unwrap_or(s.jitter_retries);
        s.seed = f.seed.unwrap_or(s.seed);
    }

    pub fn apply_output(&mut self, f: &OutputFlags) {
        if let Some(d) = &f.out_dir {
            self.output.dir = Some(d.clone());
        }
        if let Some(fmt) = f.format {
            self.output.format = fmt;
        }
    }

    /// Flag, then environment, then file, then the default location.
    pub fn resolve_store(&mut self, flag: Option<&Path>, env: Option<&str>) {
        if let Some(p) = flag {
            self.store = Some(p.to_path_buf());
        } else if let Some(e) = env.filter(|e| !e.is_empty()) {
            self.store = Some(PathBuf::from(e));
        } else if self.store.is_none() {
            self.store = Some(PathBuf::from(DEFAULT_STORE));
        }
    }

    pub fn weights(&self) -> Result<WeightProfile> {
        parse_weights(&self.lattice.weights)
    }

    pub fn mask(&self) -> Result<Mask> {
        parse_mask(&self.lattice.mask)
    }

    /// Instance of `n` sites from the configured profile, mask and resource.
    pub fn spec(&self, n: usize) -> Result<LatticeSpec> {
        Ok(LatticeSpec::new(n, self.weights()?, self.mask()?, self.lattice.j0)?)
    }

    pub fn require_n(&self) -> Result<usize> {
        self.lattice.n.ok_or_else(|| CliError::Config(String::from("lattice size not given (--n or lattice.n)")))
    }
}

fn parse_floats(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| CliError::Config(format!("not a number: {:?}", s))))
        .collect()
}

pub fn parse_weights(text: &str) -> Result<WeightProfile> {
    let text = text.trim();
    match text {
        "quadratic" => return Ok(WeightProfile::quadratic()),
        "unpenalized" => return Ok(WeightProfile::unpenalized()),
        _ => {}
    }
    let (kind, rest) = text
        .split_once(':')
        .ok_or_else(|| CliError::Config(format!("weights must look like power:K, list:... or matrix:FILE, got {:?}", text)))?;
    let profile = match kind {
        "power" => WeightProfile::power(
            rest.trim().parse().map_err(|_| CliError::Config(format!("bad power exponent {:?}", rest)))?,
        ),
        "list" => WeightProfile::PerDistance { values: parse_floats(rest)? },
        "matrix" => {
            let path = Path::new(rest.trim());
            let values = parse_floats(&fs::read_to_string(path).map_err(|e| CliError::io(path, e))?)?;
            let n = (values.len() as f64).sqrt().round() as usize;
            if n * n != values.len() {
                return Err(CliError::Config(format!("{} holds {} numbers, not a square matrix", path.display(), values.len())));
            }
            WeightProfile::Matrix { n, values }
        }
        _ => return Err(CliError::Config(format!("unknown weight profile kind {:?}", kind))),
    };
    let bad = match &profile {
        WeightProfile::Power { exponent } => !exponent.is_finite(),
        WeightProfile::PerDistance { values } => values.is_empty() || values.iter().any(|v| !(*v > 0.0 && v.is_finite())),
        WeightProfile::Matrix { .. } => false,
    };
    if bad {
        return Err(CliError::Config(format!("invalid weights {:?}", text)));
    }
    Ok(profile)
}

pub fn parse_mask(text: &str) -> Result<Mask> {
    let text = text.trim();
    match text {
        "all" | "all-to-all" => Ok(Mask::AllToAll),
        "nn" | "chain" => Ok(Mask::NearestNeighbor),
        _ => {
            let rest = text
                .strip_prefix("pairs:")
                .ok_or_else(|| CliError::Config(format!("mask must be all, nn or pairs:..., got {:?}", text)))?;
            let pairs = rest
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|p| {
                    let (a, b) = p
                        .trim()
                        .split_once('-')
                        .ok_or_else(|| CliError::Config(format!("pair must look like 1-2, got {:?}", p)))?;
                    let a: usize = a.parse().map_err(|_| CliError::Config(format!("bad site {:?}", a)))?;
                    let b: usize = b.parse().map_err(|_| CliError::Config(format!("bad site {:?}", b)))?;
                    if a == 0 || b == 0 {
                        return Err(CliError::Config(String::from("sites are numbered from 1")));
                    }
                    Ok((a - 1, b - 1))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Mask::Pairs { pairs })
        }
    }
}
