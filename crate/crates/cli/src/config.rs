//! Run configuration: a JSON document whose keys all default, overlaid by
//! command-line flags.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pdpclust::fit::FitConfig;
use pdpclust::kmeans::DEFAULT_DELAY_SCALE;
use pdpclust::transform::{WindowKind, DEFAULT_TAIL_FRACTION, DEFAULT_TRUNCATE_MARGIN_DB};
use pdpclust::{FeatureConfig, Scenario, SparseConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult, Stage};

/// Where the sweeps come from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "InputRepr", into = "InputRepr")]
pub enum InputSource {
    /// Realizations of [`RunConfig::scenario`].
    #[default]
    Synthetic,
    /// Sweep files, or directories of them.
    Paths(Vec<PathBuf>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum InputRepr {
    One(String),
    Many(Vec<PathBuf>),
}

impl From<InputRepr> for InputSource {
    fn from(r: InputRepr) -> Self {
        match r {
            InputRepr::One(s) if s == "synthetic" => InputSource::Synthetic,
            InputRepr::One(s) => InputSource::Paths(vec![s.into()]),
            InputRepr::Many(v) if v.is_empty() => InputSource::Synthetic,
            InputRepr::Many(v) => InputSource::Paths(v),
        }
    }
}

impl From<InputSource> for InputRepr {
    fn from(s: InputSource) -> Self {
        match s {
            InputSource::Synthetic => InputRepr::One("synthetic".into()),
            InputSource::Paths(v) => InputRepr::Many(v),
        }
    }
}

/// Artifact groups a run can write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Pdp,
    Reconstruction,
    Phi,
    Partitions,
    Fit,
    Metrics,
}

impl Emit {
    pub const ALL: [Emit; 6] = [
        Emit::Pdp,
        Emit::Reconstruction,
        Emit::Phi,
        Emit::Partitions,
        Emit::Fit,
        Emit::Metrics,
    ];
}

impl fmt::Display for Emit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Emit::Pdp => "pdp",
            Emit::Reconstruction => "reconstruction",
            Emit::Phi => "phi",
            Emit::Partitions => "partitions",
            Emit::Fit => "fit",
            Emit::Metrics => "metrics",
        })
    }
}

impl FromStr for Emit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Emit::ALL
            .into_iter()
            .find(|e| e.to_string() == s)
            .ok_or_else(|| format!("unknown artifact `{s}` (expected pdp, reconstruction, phi, partitions, fit or metrics)"))
    }
}

/// Noise-floor estimation and truncation before clustering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareOptions {
    /// Share of trailing bins used for the noise floor.
    pub tail_fraction: f64,
    /// Bins must exceed the noise floor by this much, dB.
    pub margin_db: f64,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            tail_fraction: DEFAULT_TAIL_FRACTION,
            margin_db: DEFAULT_TRUNCATE_MARGIN_DB,
        }
    }
}

/// k-means settings; `k` falls back to the ground-truth cluster count when
/// one is available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KmeansOptions {
    pub k: Option<usize>,
    pub restarts: usize,
    pub delay_scale: f64,
    pub power_scale: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for KmeansOptions {
    fn default() -> Self {
        let base = FeatureConfig::with_k(1);
        Self {
            k: None,
            restarts: base.restarts,
            delay_scale: DEFAULT_DELAY_SCALE,
            power_scale: base.power_scale,
            max_iters: base.max_iters,
            tol: base.tol,
        }
    }
}

impl KmeansOptions {
    pub fn features(&self, k: usize) -> FeatureConfig {
        FeatureConfig {
            delay_scale: self.delay_scale,
            power_scale: self.power_scale,
            k,
            restarts: self.restarts,
            max_iters: self.max_iters,
            tol: self.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSource,
    /// Ground-truth labels for measured input (`bin_index,cluster_id`).
    pub truth: Option<PathBuf>,
    pub scenario: Scenario,
    pub window: WindowKind,
    pub prepare: PrepareOptions,
    pub kmeans: KmeansOptions,
    pub sparse: SparseConfig,
    pub fit: FitConfig,
    /// Onset matching tolerance for evaluation, bins.
    pub slack: usize,
    pub emit: BTreeSet<Emit>,
    pub seed: u64,
    /// Output directory. Not part of the configuration hash.
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: InputSource::Synthetic,
            truth: None,
            scenario: Scenario::default(),
            window: WindowKind::Blackman,
            prepare: PrepareOptions::default(),
            kmeans: KmeansOptions::default(),
            sparse: SparseConfig::default(),
            fit: FitConfig::default(),
            slack: 2,
            emit: Emit::ALL.into_iter().collect(),
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                CliError::input(Stage::Config, format!("config file {} does not exist", path.display()))
            }
            _ => CliError::io(Stage::Config, path, e),
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::input(Stage::Config, format!("{}: {e}", path.display())))
    }

    /// Checks parameters and that every referenced path exists.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |e| CliError::core(Stage::Config, e);
        self.sparse.validate().map_err(bad)?;
        if let InputSource::Synthetic = self.input {
            self.scenario.validate().map_err(bad)?;
        }
        if self.emit.is_empty() {
            return Err(CliError::input(Stage::Config, "nothing to emit"));
        }
        if !(self.prepare.tail_fraction > 0.0 && self.prepare.tail_fraction < 1.0) {
            return Err(CliError::input(Stage::Config, "prepare.tail_fraction must lie in (0, 1)"));
        }
        if !self.prepare.margin_db.is_finite() {
            return Err(CliError::input(Stage::Config, "prepare.margin_db must be finite"));
        }
        if let Some(k) = self.kmeans.k {
            self.kmeans.features(k).validate().map_err(bad)?;
        }
        let mut paths: Vec<&Path> = self.truth.iter().map(PathBuf::as_path).collect();
        if let InputSource::Paths(p) = &self.input {
            if p.is_empty() {
                return Err(CliError::input(Stage::Config, "no input paths given"));
            }
            paths.extend(p.iter().map(PathBuf::as_path));
        }
        require_existing(&paths)
    }

    /// SHA-256 of the canonical JSON form, without the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("configuration serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

pub fn require_existing(paths: &[&Path]) -> CliResult<()> {
    for p in paths {
        if !p.exists() {
            return Err(CliError::input(Stage::Config, format!("{} does not exist", p.display())));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"sparse": {"l_max": 20.0}, "scenario": {"gamma_ray": 4.0}, "emit": ["phi"]}"#).unwrap();
        assert_eq!(cfg.sparse.l_max, 20.0);
        assert_eq!(cfg.sparse.epsilon, 1e-9);
        assert_eq!(cfg.scenario.params.gamma_ray, 4.0);
        assert_eq!(cfg.scenario.params.gamma_cluster, 20.0);
        assert_eq!(cfg.emit.len(), 1);
    }

    #[test]
    fn input_forms() {
        let a: RunConfig = serde_json::from_str(r#"{"input": "synthetic"}"#).unwrap();
        assert_eq!(a.input, InputSource::Synthetic);
        let b: RunConfig = serde_json::from_str(r#"{"input": "sweeps"}"#).unwrap();
        assert_eq!(b.input, InputSource::Paths(vec!["sweeps".into()]));
        let c: RunConfig = serde_json::from_str(r#"{"input": ["a.csv", "b.csv"]}"#).unwrap();
        assert_eq!(c.input, InputSource::Paths(vec!["a.csv".into(), "b.csv".into()]));
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"lmax": 3}"#).is_err());
    }

    #[test]
    fn hash_ignores_output_directory_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        let mut cfg = RunConfig::default();
        cfg.emit.clear();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        let mut cfg = RunConfig::default();
        cfg.input = InputSource::Paths(vec!["/no/such/sweep.csv".into()]);
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        let mut cfg = RunConfig::default();
        cfg.sparse.l_max = -1.0;
        assert!(cfg.validate().is_err());
    }
}
