//! Versioned JSON run configuration with dotted-path overrides.
//!
//! Every section carries complete defaults, so a bare `{}` (or no config
//! file at all) is a valid starting point and `--set` overrides can build a
//! whole run from the command line. Unknown keys are rejected.

use poisson_posterior::harness::{BenchConfig, MlpSettings, Precision, ToyConfig};
use poisson_posterior::reconstruct::ReconstructionConfig;
use poisson_posterior::nn::{Activation, ArchSpec, TargetDomain};
use poisson_posterior::prior::{PriorSpec, SignalConfig};
use poisson_posterior::Domain;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum ConfigError {
    Parse(String),
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse(m) => write!(f, "config parse error: {m}"),
            ConfigError::Invalid(m) => write!(f, "invalid config: {m}"),
        }
    }
}

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ToyPosterior,
    DenoiseBench,
    Train,
    Eval,
    OracleDump,
}

impl Experiment {
    pub fn section(&self) -> &'static str {
        match self {
            Experiment::ToyPosterior => "toy",
            Experiment::DenoiseBench => "bench",
            Experiment::Train => "train",
            Experiment::Eval => "eval",
            Experiment::OracleDump => "oracle",
        }
    }
}

/// Flat prior description: one `kind` plus per-kind parameter fields with
/// usable defaults, so switching `kind` alone yields a valid prior.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct PriorConfig {
    pub kind: PriorKindName,
    // log-normal mixture
    pub weights: Vec<f64>,
    pub locations: Vec<f64>,
    pub scales: Vec<f64>,
    // gamma
    pub shape: f64,
    pub rate: f64,
    // point mass
    pub location: f64,
    // tabulated
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Truncation interval; per-kind default when omitted.
    pub support: Option<(f64, f64)>,
    pub grid_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorKindName {
    LogNormalMixture,
    Gamma,
    PointMass,
    Tabulated,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            kind: PriorKindName::LogNormalMixture,
            weights: vec![0.5, 0.5],
            locations: vec![0.0, 2.0],
            scales: vec![0.35, 0.30],
            shape: 2.0,
            rate: 1.0,
            location: 2.0,
            grid: Vec::new(),
            values: Vec::new(),
            support: None,
            grid_points: None,
        }
    }
}

impl PriorConfig {
    pub fn build(&self) -> Result<PriorSpec<f64>, ConfigError> {
        let err = |e: poisson_posterior::prior::PriorError| ConfigError::Invalid(e.to_string());
        let mut spec = match self.kind {
            PriorKindName::LogNormalMixture => {
                let support = self.support.unwrap_or((0.01, 20.0));
                PriorSpec::log_normal_mixture(
                    self.weights.clone(),
                    self.locations.clone(),
                    self.scales.clone(),
                    support,
                )
                .map_err(err)?
            }
            PriorKindName::Gamma => {
                let mut p = PriorSpec::gamma(self.shape, self.rate).map_err(err)?;
                if let Some((lo, hi)) = self.support {
                    p = p.with_support(lo, hi).map_err(err)?;
                }
                p
            }
            PriorKindName::PointMass => {
                let mut p = PriorSpec::point_mass(self.location).map_err(err)?;
                if let Some((lo, hi)) = self.support {
                    p = p.with_support(lo, hi).map_err(err)?;
                }
                p
            }
            PriorKindName::Tabulated => {
                PriorSpec::tabulated(self.grid.clone(), self.values.clone()).map_err(err)?
            }
        };
        if let Some(n) = self.grid_points {
            spec = spec.with_grid_points(n);
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ToySection {
    pub prior: PriorConfig,
    pub y: f64,
    pub order: usize,
    pub recon: ReconstructionConfig,
    pub mlp: MlpSettings,
    pub train_steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub val_every: usize,
    pub patience: usize,
    pub val_size: usize,
    pub fd_step_oracle: f64,
    pub fd_step_net: f64,
    pub seed: u64,
}

impl Default for ToySection {
    fn default() -> Self {
        let t = ToyConfig::default();
        Self {
            prior: PriorConfig::default(),
            y: t.y,
            order: t.order,
            recon: t.recon,
            mlp: t.mlp,
            train_steps: t.train_steps,
            batch_size: t.batch_size,
            lr: t.lr,
            val_every: t.val_every,
            patience: t.patience,
            val_size: t.val_size,
            fd_step_oracle: t.fd_step_oracle,
            fd_step_net: t.fd_step_net,
            seed: t.seed,
        }
    }
}

impl ToySection {
    pub fn to_harness(&self, seed_override: Option<u64>) -> Result<ToyConfig, ConfigError> {
        Ok(ToyConfig {
            prior: self.prior.build()?,
            y: self.y,
            order: self.order,
            recon: self.recon.clone(),
            mlp: self.mlp.clone(),
            train_steps: self.train_steps,
            batch_size: self.batch_size,
            lr: self.lr,
            val_every: self.val_every,
            patience: self.patience,
            val_size: self.val_size,
            fd_step_oracle: self.fd_step_oracle,
            fd_step_net: self.fd_step_net,
            seed: seed_override.unwrap_or(self.seed),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskName {
    Denoise,
    Toy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct TrainSection {
    pub task: TaskName,
    pub signal: SignalConfig,
    pub gain: f64,
    pub prior: PriorConfig,
    pub arch: ArchSpec,
    pub target_domain: TargetDomain,
    pub lr: f64,
    pub batch_size: usize,
    pub max_steps: usize,
    pub val_every: usize,
    pub patience: usize,
    pub val_size: usize,
    pub seed: u64,
    pub precision: Precision,
    pub model_file: String,
    pub history_file: String,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            task: TaskName::Denoise,
            signal: SignalConfig::default(),
            gain: 64.0,
            prior: PriorConfig::default(),
            arch: ArchSpec::Conv1d {
                layers: 5,
                kernel: 7,
                channels: 24,
                activation: Activation::Relu,
            },
            target_domain: TargetDomain::LogX,
            lr: 1e-3,
            batch_size: 64,
            max_steps: 600,
            val_every: 50,
            patience: 12,
            val_size: 32,
            seed: 1,
            precision: Precision::F32,
            model_file: "model.bin".into(),
            history_file: "history.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct EvalSection {
    pub model_file: String,
    pub signal: SignalConfig,
    pub gain: f64,
    pub test_signals: usize,
    pub test_seed: u64,
    pub report_file: String,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            model_file: "model.bin".into(),
            signal: SignalConfig::default(),
            gain: 64.0,
            test_signals: 256,
            test_seed: 0xBEEF,
            report_file: "eval.json".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct OracleSection {
    pub prior: PriorConfig,
    pub y: f64,
    pub order: usize,
    pub domain: Domain,
    pub fd_step: f64,
    /// When nonzero, also dump the posterior density on this many points.
    pub density_grid: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            prior: PriorConfig::default(),
            y: 3.0,
            order: 4,
            domain: Domain::Eta,
            fd_step: 1e-3,
            density_grid: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub version: u32,
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub toy: ToySection,
    pub bench: BenchConfig,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub oracle: OracleSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            experiment: None,
            seed: None,
            out: None,
            toy: ToySection::default(),
            bench: BenchConfig::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            oracle: OracleSection::default(),
        }
    }
}

/// Applies one `key=value` override onto the raw JSON tree. Paths are
/// dotted and resolve against the active experiment's section first
/// (`y=3` with oracle-dump means `oracle.y=3`, `train.max-steps` inside
/// denoise-bench means `bench.train.max-steps`), falling back to the
/// config root.
pub fn apply_override(
    root: &mut serde_json::Value,
    section: &str,
    spec: &str,
) -> Result<(), ConfigError> {
    let (path, raw_value) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Invalid(format!("override '{spec}' is not key=value")))?;
    let value: serde_json::Value = match serde_json::from_str(raw_value) {
        Ok(v) => v,
        Err(_) => serde_json::Value::String(raw_value.to_string()),
    };
    let mut segments: Vec<&str> = path.split('.').collect();
    if segments.is_empty() || segments.iter().any(|s| s.is_empty()) {
        return Err(ConfigError::Invalid(format!("override path '{path}' is malformed")));
    }
    const ROOT_KEYS: [&str; 9] = [
        "version", "experiment", "seed", "out", "toy", "bench", "train", "eval", "oracle",
    ];
    let section_has_key = root
        .get(section)
        .and_then(|s| s.get(segments[0]))
        .is_some();
    if section_has_key || !ROOT_KEYS.contains(&segments[0]) {
        segments.insert(0, section);
    }
    let mut node = root;
    for seg in &segments[..segments.len() - 1] {
        if !node.is_object() {
            return Err(ConfigError::Invalid(format!(
                "override path '{path}' walks through a non-object"
            )));
        }
        node = node
            .as_object_mut()
            .unwrap()
            .entry(seg.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    match node {
        serde_json::Value::Object(map) => {
            map.insert(segments.last().unwrap().to_string(), value);
            Ok(())
        }
        _ => Err(ConfigError::Invalid(format!(
            "override path '{path}' walks through a non-object"
        ))),
    }
}

/// Parses the raw JSON tree into a validated [`RunConfig`], reporting the
/// offending field path on error.
pub fn parse_config(root: serde_json::Value) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = serde_path_to_error::deserialize(root)
        .map_err(|e| ConfigError::Parse(format!("{} (at {})", e.inner(), e.path())))?;
    if cfg.version != CONFIG_VERSION {
        return Err(ConfigError::Invalid(format!(
            "config version {} unsupported, expected {CONFIG_VERSION}",
            cfg.version
        )));
    }
    Ok(cfg)
}
