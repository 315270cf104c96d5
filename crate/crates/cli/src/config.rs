//! Run configuration files and their resolution into model inputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use conformity::graph::read_edge_list;
use conformity::prelude::*;
use conformity::sampling::{regular_degree, AGENT_STREAM};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Where the influence network comes from. Exactly one source is allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSource {
    /// JSON network file.
    File(PathBuf),
    EdgeList {
        path: PathBuf,
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        m_mode: EdgeListM,
    },
    KRegular {
        n: usize,
        /// Defaults to the largest feasible degree up to 3.
        #[serde(default)]
        k: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeListM {
    #[default]
    Uniform,
    Mirror,
}

/// Where initial opinions and agent parameters come from. Exactly one
/// source is allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ParameterSource {
    File(PathBuf),
    BetaPreset(BetaPreset),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaPreset {
    #[serde(default)]
    pub shapes: Option<BetaPresets>,
    /// Replaces every sampled susceptibility.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Threshold for every agent in the threshold model.
    #[serde(default)]
    pub tau: Option<f64>,
}

/// On-disk agent file `{"y0": [...], "lambda": [...], "phi": [...], "tau": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentFile {
    pub y0: Vec<f64>,
    pub lambda: Vec<f64>,
    pub phi: Vec<f64>,
    #[serde(default)]
    pub tau: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub mode: PublicOpinion,
    #[serde(default = "continuous")]
    pub model: Model,
    #[serde(default)]
    pub stop: StopCriteria,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub format: Format,
    /// Not part of the recorded configuration or its hash.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    pub network: NetworkSource,
    pub parameters: ParameterSource,
}

fn continuous() -> Model {
    Model::Continuous
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub mode: PublicOpinion,
    #[serde(default)]
    pub seed: u64,
    /// Not part of the recorded configuration or its hash.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    pub instances: usize,
    #[serde(default = "two")]
    pub n_min: usize,
    #[serde(default = "thirty")]
    pub n_max: usize,
    #[serde(default)]
    pub shapes: Option<BetaPresets>,
}

fn two() -> usize {
    2
}

fn thirty() -> usize {
    30
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mode: Option<PublicOpinion>,
    pub format: Option<Format>,
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn check_version(found: u32) -> Result<()> {
    if found != SCHEMA_VERSION {
        bail!("unsupported schema_version {found}, expected {SCHEMA_VERSION}");
    }
    Ok(())
}

/// Relative paths inside a config are resolved against the config's
/// directory.
fn rebase(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn load(path: &Path, ov: &Overrides) -> Result<Self> {
        let text = read_text(path)?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing run config {}", path.display()))?;
        check_version(cfg.schema_version)?;
        let base = path.parent().unwrap_or(Path::new("."));
        match &mut cfg.network {
            NetworkSource::File(p) | NetworkSource::EdgeList { path: p, .. } => *p = rebase(base, p),
            NetworkSource::KRegular { .. } => {}
        }
        if let ParameterSource::File(p) = &mut cfg.parameters {
            *p = rebase(base, p);
        }
        if let Some(s) = ov.seed {
            cfg.seed = s;
        }
        if let Some(m) = ov.mode {
            cfg.mode = m;
        }
        if let Some(f) = ov.format {
            cfg.format = f;
        }
        if let Some(o) = &ov.out {
            cfg.out = Some(o.clone());
        }
        Ok(cfg)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

impl SweepConfig {
    pub fn load(path: &Path, ov: &Overrides) -> Result<Self> {
        let text = read_text(path)?;
        let mut cfg: SweepConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing sweep config {}", path.display()))?;
        check_version(cfg.schema_version)?;
        if cfg.instances == 0 {
            bail!("instances must be positive");
        }
        if cfg.n_min < 2 || cfg.n_min > cfg.n_max {
            bail!("need 2 <= n_min <= n_max, got {}..{}", cfg.n_min, cfg.n_max);
        }
        if let Some(s) = ov.seed {
            cfg.seed = s;
        }
        if let Some(m) = ov.mode {
            cfg.mode = m;
        }
        if let Some(o) = &ov.out {
            cfg.out = Some(o.clone());
        }
        Ok(cfg)
    }
}

/// Hex SHA-256 of the resolved configuration as canonical JSON.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Network, agent parameters and initial opinions of one run.
pub struct Resolved {
    pub net: InfluenceNetwork,
    pub params: AgentParameters,
    pub y0: DVector<f64>,
}

pub fn resolve(cfg: &RunConfig) -> Result<Resolved> {
    let net = match &cfg.network {
        NetworkSource::File(p) => NetworkFile::from_json(&read_text(p)?)
            .and_then(|f| f.build())
            .with_context(|| format!("network file {}", p.display()))?,
        NetworkSource::EdgeList { path, n, m_mode } => {
            let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
            let mode = match m_mode {
                EdgeListM::Uniform => ConformityMode::Uniform,
                EdgeListM::Mirror => ConformityMode::Mirror,
            };
            read_edge_list(file, *n, mode).with_context(|| format!("edge list {}", path.display()))?
        }
        NetworkSource::KRegular { n, k } => generate_k_regular(*n, k.unwrap_or_else(|| regular_degree(*n)), cfg.seed)?,
    };
    let n = net.n();
    let (y0, params) = match &cfg.parameters {
        ParameterSource::File(p) => {
            let f: AgentFile =
                serde_json::from_str(&read_text(p)?).with_context(|| format!("parsing agent file {}", p.display()))?;
            for (what, len) in [("y0", f.y0.len()), ("lambda", f.lambda.len()), ("phi", f.phi.len())] {
                if len != n {
                    bail!(
                        "agent file {}: {what} has {len} entries, network has {n} agents",
                        p.display()
                    );
                }
            }
            let mut params = AgentParameters::new(DVector::from_vec(f.lambda), DVector::from_vec(f.phi))?;
            if let Some(tau) = f.tau {
                if tau.len() != n {
                    bail!(
                        "agent file {}: tau has {} entries, network has {n} agents",
                        p.display(),
                        tau.len()
                    );
                }
                params = params.with_thresholds(DVector::from_vec(tau))?;
            }
            (DVector::from_vec(f.y0), params)
        }
        ParameterSource::BetaPreset(b) => {
            let agents = b.shapes.unwrap_or_default().sample_seeded(n, cfg.seed ^ AGENT_STREAM)?;
            let mut params = agents.params;
            if let Some(l) = b.lambda {
                params = params.with_lambda(DVector::from_element(n, l))?;
            }
            if let Some(t) = b.tau {
                params = params.with_thresholds(DVector::from_element(n, t))?;
            }
            (agents.y0, params)
        }
    };
    if cfg.model == Model::Threshold && params.threshold().is_none() {
        bail!("the threshold model needs thresholds: set \"tau\" in the agent file or the beta preset");
    }
    Ok(Resolved { net, params, y0 })
}
