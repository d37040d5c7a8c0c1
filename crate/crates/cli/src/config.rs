//! Experiment configuration: structured-text schema, validation, and the
//! command dispatch enum.

use std::path::PathBuf;

use serde::Deserialize;

use crate::CliError;

/// Top-level experiment file. Exactly one command block must be present.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Schema version; must be 1.
    pub format_version: u32,
    /// Master seed for every random draw in the run.
    pub seed: Option<u64>,
    /// Directory the artifacts are written into (created if missing).
    pub output_dir: Option<PathBuf>,

    pub ingest: Option<IngestBlock>,
    pub calibrate: Option<CalibrateBlock>,
    pub trajectory: Option<TrajectoryBlock>,
    pub continuous: Option<ContinuousBlock>,
    pub discrete: Option<DiscreteBlock>,
    pub diffusivity: Option<DiffusivityBlock>,
    pub sweep: Option<SweepBlock>,
}

/// The single command block of a validated config.
pub enum Command {
    Ingest(IngestBlock),
    Calibrate(CalibrateBlock),
    Trajectory(TrajectoryBlock),
    Continuous(ContinuousBlock),
    Discrete(DiscreteBlock),
    Diffusivity(DiffusivityBlock),
    Sweep(SweepBlock),
}

impl ExperimentConfig {
    /// Checks the version tag and extracts the one command block.
    pub fn into_command(self) -> Result<(Command, Option<u64>, Option<PathBuf>), CliError> {
        if self.format_version != 1 {
            return Err(CliError::Config(format!(
                "format_version: expected 1, got {}",
                self.format_version
            )));
        }
        let mut present: Vec<&'static str> = Vec::new();
        let mut command = None;
        macro_rules! take {
            ($field:ident, $variant:ident, $name:literal) => {
                if let Some(block) = self.$field {
                    present.push($name);
                    command = Some(Command::$variant(block));
                }
            };
        }
        take!(ingest, Ingest, "ingest");
        take!(calibrate, Calibrate, "calibrate");
        take!(trajectory, Trajectory, "trajectory");
        take!(continuous, Continuous, "continuous");
        take!(discrete, Discrete, "discrete");
        take!(diffusivity, Diffusivity, "diffusivity");
        take!(sweep, Sweep, "sweep");
        match present.len() {
            1 => Ok((command.unwrap(), self.seed, self.output_dir)),
            0 => Err(CliError::Config(
                "config must contain exactly one command block \
                 (ingest, calibrate, trajectory, continuous, discrete, diffusivity, or sweep); found none"
                    .into(),
            )),
            _ => Err(CliError::Config(format!(
                "config must contain exactly one command block; found {}",
                present.join(", ")
            ))),
        }
    }
}

/// Parses and validates a config file's contents.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))
}

// ---------------------------------------------------------------------------
// ingest

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestBlock {
    pub asset_id: String,
    /// Message-file path (one event per line).
    pub messages: PathBuf,
    /// Quote-snapshot file path, line-aligned with the messages.
    pub orderbook: PathBuf,
    /// Keep hidden-liquidity executions (default true).
    #[serde(default = "default_true")]
    pub include_hidden: bool,
    /// Collapse same-timestamp same-direction executions (default true).
    #[serde(default = "default_true")]
    pub merge_same_timestamp: bool,
    /// Seconds clipped from the session open (default 1800).
    #[serde(default = "default_clip_secs")]
    pub clip_head_secs: f64,
    /// Seconds clipped from the session close (default 1800).
    #[serde(default = "default_clip_secs")]
    pub clip_tail_secs: f64,
    /// Timing convention for the regression samples (default post-trade).
    #[serde(default)]
    pub convention: Convention,
}

fn default_true() -> bool {
    true
}

fn default_clip_secs() -> f64 {
    1800.0
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    #[default]
    PostTrade,
    PreTrade,
}

// ---------------------------------------------------------------------------
// calibrate

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateBlock {
    pub kind: ModelKindTag,
    /// Lag order of the fit.
    pub p: usize,
    /// Two-column `dp,v` CSV (as written by the ingest command). Exactly one
    /// of `data_file` and `synthetic` must be given.
    pub data_file: Option<PathBuf>,
    /// Alternatively, simulate the calibration data from a known model.
    pub synthetic: Option<SyntheticData>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKindTag {
    Tim,
    Hasbrouck,
}

/// Ground-truth generator: a volume-only model with power-law flow lags
/// summing to `flow_sum` and a lagged price response following
/// `impact_scale·(1+ℓ)^{-impact_exponent}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    pub p: usize,
    pub flow_sum: f64,
    pub flow_exponent: f64,
    pub impact_scale: f64,
    pub impact_exponent: f64,
    /// Samples kept after the burn-in.
    pub n: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Structural shock standard deviations `(price, flow)`.
    pub noise: (f64, f64),
}

fn default_burn_in() -> usize {
    2_000
}

// ---------------------------------------------------------------------------
// trajectory

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryBlock {
    /// Active trade steps of each metaorder.
    pub duration: usize,
    /// Last evaluated trade step.
    pub horizon: usize,
    #[serde(rename = "case")]
    pub cases: Vec<TrajectoryCase>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryCase {
    /// Label used in output filenames and the metrics table.
    pub label: String,
    /// Signed child volume per step.
    pub child_size: f64,
    /// Flow modes to evaluate ("volume-coupled" and/or "price-only").
    pub kappas: Vec<KappaTag>,
    /// Coefficient CSV written by the calibrate command. Exactly one of
    /// `model_file` and `synthetic` must be given; a synthetic block is
    /// simulated and calibrated in place.
    pub model_file: Option<PathBuf>,
    pub synthetic: Option<SyntheticData>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum KappaTag {
    #[serde(rename = "volume-coupled")]
    VolumeCoupled,
    #[serde(rename = "price-only")]
    PriceOnly,
}

// ---------------------------------------------------------------------------
// continuous

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousBlock {
    pub lam: f64,
    pub beta: f64,
    pub rho: f64,
    pub v_rate: f64,
    pub duration: f64,
    /// Routing fractions to evaluate, one output file each.
    pub alphas: Vec<f64>,
    pub t_max: f64,
    pub dt: f64,
}

// ---------------------------------------------------------------------------
// discrete

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteBlock {
    pub flow_kernel: KernelTag,
    pub impact_kernel: KernelTag,
    pub lam: f64,
    pub alpha: f64,
    pub v_rate: f64,
    pub duration: usize,
    pub horizon: usize,
    /// Observation noise `(flow, price)`; `(0, 0)` gives the deterministic
    /// skeleton.
    pub noise: (f64, f64),
    /// Paths averaged into an ensemble file (1 = single path, no ensemble).
    #[serde(default = "default_one")]
    pub n_paths: usize,
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelTag {
    Exponential { rate: f64 },
    PowerLaw { exponent: f64 },
}

// ---------------------------------------------------------------------------
// diffusivity

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusivityBlock {
    pub source: SourceTag,
    #[serde(default)]
    pub ar_coefficients: Vec<f64>,
    pub length: usize,
    /// Impact-kernel exponent of the level-form price built on the flow.
    pub delta: f64,
    /// Lag window `(lo, hi)` of the memory-exponent fit.
    pub acf_range: (usize, usize),
    pub windows: WindowSpec,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceTag {
    Iid,
    LongMemory { tail_exponent: f64, n_metaorders: usize },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub lo: usize,
    pub hi: usize,
    pub count: usize,
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// Which pipeline each cell runs.
    pub target: SweepTarget,
    /// Refusal threshold on the grid size (default 100000).
    #[serde(default = "default_max_cells")]
    pub max_cells: usize,
    #[serde(rename = "axis")]
    pub axes: Vec<SweepAxis>,
    pub base: toml::Value,
}

fn default_max_cells() -> usize {
    100_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepTarget {
    Continuous,
    Discrete,
    Diffusivity,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Field of the base block this axis overrides.
    pub name: String,
    /// Values in sweep order (the first axis varies slowest).
    pub values: Vec<toml::Value>,
}
