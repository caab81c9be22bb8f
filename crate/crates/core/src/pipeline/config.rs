use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{Algorithm, ClusterSpec, MclParams, Weighting, DEFAULT_MAX_CLIQUES};
use crate::corpus::{JavaScriptAdapter, ParserAdapter, DEFAULT_EXTENSIONS, DEFAULT_MAX_FILE_BYTES};
use crate::fingerprint::DEFAULT_MIN_NODE_COUNT;
use crate::scanner::{ScanOptions, DEFAULT_PACKAGE_TIMEOUT};
use crate::similarity::{DistanceOptions, DEFAULT_MAX_PAIR_CELLS, DEFAULT_SIZE_RATIO_GUARD};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

/// Settings for every pipeline stage. Missing keys take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Corpus of packages to cluster.
    pub corpus: Option<PathBuf>,
    /// Corpus of benign packages whose fingerprints never enter a signature.
    pub benign: Option<PathBuf>,
    /// Reference clustering (`clusters.json` layout) for evaluation.
    pub reference: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub parser: String,
    pub extensions: Vec<String>,
    pub min_node_count: usize,
    pub max_file_bytes: u64,
    /// Worker threads; all cores when unset.
    pub jobs: Option<usize>,
    pub distance: DistanceConfig,
    pub cluster: ClusterConfig,
    pub scan: ScanConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            benign: None,
            reference: None,
            output_dir: PathBuf::from("clonesig-out"),
            parser: "javascript".into(),
            extensions: DEFAULT_EXTENSIONS.iter().map(|s| s.to_string()).collect(),
            min_node_count: DEFAULT_MIN_NODE_COUNT,
            max_file_bytes: DEFAULT_MAX_FILE_BYTES,
            jobs: None,
            distance: DistanceConfig::default(),
            cluster: ClusterConfig::default(),
            scan: ScanConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceConfig {
    /// 0 disables the guard.
    pub size_ratio_guard: f64,
    /// 0 disables the guard.
    pub max_pair_cells: u64,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        Self {
            size_ratio_guard: DEFAULT_SIZE_RATIO_GUARD,
            max_pair_cells: DEFAULT_MAX_PAIR_CELLS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub algorithm: Algorithm,
    /// Largest distance that still links two packages.
    pub tau: u32,
    pub weighting: Weighting,
    pub expansion: u32,
    pub inflation: f64,
    pub prune_threshold: f64,
    pub max_iterations: usize,
    pub convergence_epsilon: f64,
    pub eps: u32,
    pub min_pts: usize,
    pub max_cliques: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        let mcl = MclParams::default();
        Self {
            algorithm: Algorithm::Mcl,
            tau: 1,
            weighting: Weighting::Binary,
            expansion: mcl.expansion,
            inflation: mcl.inflation,
            prune_threshold: mcl.prune_threshold,
            max_iterations: mcl.max_iterations,
            convergence_epsilon: mcl.convergence_epsilon,
            eps: 1,
            min_pts: 2,
            max_cliques: DEFAULT_MAX_CLIQUES,
        }
    }
}

impl ClusterConfig {
    pub fn spec(&self) -> ClusterSpec {
        self.spec_for(self.algorithm)
    }

    /// Clustering settings for `algorithm` using this config's parameters.
    pub fn spec_for(&self, algorithm: Algorithm) -> ClusterSpec {
        match algorithm {
            Algorithm::Mcl => ClusterSpec::Mcl {
                tau: self.tau,
                weighting: self.weighting,
                params: MclParams {
                    expansion: self.expansion,
                    inflation: self.inflation,
                    prune_threshold: self.prune_threshold,
                    max_iterations: self.max_iterations,
                    convergence_epsilon: self.convergence_epsilon,
                },
            },
            Algorithm::Ccomp => ClusterSpec::Ccomp { tau: self.tau },
            Algorithm::Clique => ClusterSpec::Clique {
                tau: self.tau,
                max_cliques: self.max_cliques,
            },
            Algorithm::Dbscan => ClusterSpec::Dbscan {
                eps: self.eps,
                min_pts: self.min_pts,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub package_timeout_secs: u64,
    pub chunk_size: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            package_timeout_secs: DEFAULT_PACKAGE_TIMEOUT.as_secs(),
            chunk_size: 64,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(source),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// Checks every parameter without touching the file system.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.parser != "javascript" {
            return Err(invalid("parser", format!("unknown parser {:?}; only \"javascript\" is available", self.parser)));
        }
        if self.extensions.is_empty() || self.extensions.iter().any(|e| e.is_empty() || e.starts_with('.')) {
            return Err(invalid("extensions", "must be a non-empty list of extensions without a leading dot"));
        }
        if self.min_node_count == 0 {
            return Err(invalid("min_node_count", "must be at least 1"));
        }
        if self.max_file_bytes == 0 {
            return Err(invalid("max_file_bytes", "must be positive"));
        }
        if self.jobs == Some(0) {
            return Err(invalid("jobs", "must be at least 1"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(invalid("output_dir", "must not be empty"));
        }
        let d = &self.distance;
        if !(d.size_ratio_guard == 0.0 || d.size_ratio_guard >= 1.0) {
            return Err(invalid("distance.size_ratio_guard", "must be 0 (off) or at least 1"));
        }
        let c = &self.cluster;
        self.cluster_params_valid()?;
        if c.min_pts == 0 {
            return Err(invalid("cluster.min_pts", "must be at least 1"));
        }
        if c.max_cliques == 0 {
            return Err(invalid("cluster.max_cliques", "must be positive"));
        }
        if self.scan.chunk_size == 0 {
            return Err(invalid("scan.chunk_size", "must be positive"));
        }
        Ok(())
    }

    fn cluster_params_valid(&self) -> Result<(), ConfigError> {
        let c = &self.cluster;
        if c.expansion < 2 {
            return Err(invalid("cluster.expansion", "must be at least 2"));
        }
        if !(c.inflation > 1.0 && c.inflation.is_finite()) {
            return Err(invalid("cluster.inflation", "must be a finite number greater than 1"));
        }
        if !(0.0..1.0).contains(&c.prune_threshold) {
            return Err(invalid("cluster.prune_threshold", "must be in [0, 1)"));
        }
        if c.max_iterations == 0 {
            return Err(invalid("cluster.max_iterations", "must be positive"));
        }
        if !(c.convergence_epsilon > 0.0) {
            return Err(invalid("cluster.convergence_epsilon", "must be positive"));
        }
        Ok(())
    }

    pub fn adapter(&self) -> JavaScriptAdapter {
        JavaScriptAdapter::with_extensions(&self.extensions)
    }

    pub fn adapter_boxed(&self) -> Box<dyn ParserAdapter> {
        Box::new(self.adapter())
    }

    pub fn distance_options(&self) -> DistanceOptions {
        DistanceOptions {
            size_ratio_guard: (self.distance.size_ratio_guard > 0.0).then_some(self.distance.size_ratio_guard),
            max_pair_cells: (self.distance.max_pair_cells > 0).then_some(self.distance.max_pair_cells),
        }
    }

    pub fn scan_options(&self) -> ScanOptions {
        ScanOptions {
            min_node_count: self.min_node_count,
            max_file_bytes: self.max_file_bytes,
            package_timeout: Duration::from_secs(self.scan.package_timeout_secs),
            chunk_size: self.scan.chunk_size,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = PipelineConfig::from_toml("", Path::new("c.toml")).unwrap();
        assert_eq!(c, PipelineConfig::default());
        c.validate().unwrap();
        assert_eq!(
            c.cluster.spec(),
            ClusterSpec::Mcl {
                tau: 1,
                weighting: Weighting::Binary,
                params: MclParams::default()
            }
        );
    }

    #[test]
    fn sections_override_defaults() {
        let text = r#"
            corpus = "pkgs"
            min_node_count = 3
            [cluster]
            algorithm = "dbscan"
            eps = 2
            [distance]
            size_ratio_guard = 0
        "#;
        let c = PipelineConfig::from_toml(text, Path::new("c.toml")).unwrap();
        assert_eq!(c.corpus.as_deref(), Some(Path::new("pkgs")));
        assert_eq!(c.cluster.spec(), ClusterSpec::Dbscan { eps: 2, min_pts: 2 });
        assert_eq!(c.distance_options().size_ratio_guard, None);
        assert_eq!(c.distance_options().max_pair_cells, Some(DEFAULT_MAX_PAIR_CELLS));
    }

    #[test]
    fn unknown_keys_fail() {
        let err = PipelineConfig::from_toml("[cluster]\ninflaton = 2.0\n", Path::new("c.toml")).unwrap_err();
        assert!(err.to_string().contains("inflaton"), "{err}");
    }

    #[test]
    fn invalid_values_name_the_field() {
        let mut c = PipelineConfig::default();
        c.cluster.inflation = 1.0;
        assert!(c.validate().unwrap_err().to_string().contains("cluster.inflation"));
        let mut c = PipelineConfig::default();
        c.min_node_count = 0;
        assert!(c.validate().unwrap_err().to_string().contains("min_node_count"));
        let mut c = PipelineConfig::default();
        c.parser = "python".into();
        assert!(c.validate().unwrap_err().to_string().contains("parser"));
    }

    #[test]
    fn example_config_parses() {
        let text = include_str!("../../../../clonesig.example.toml");
        let c = PipelineConfig::from_toml(text, Path::new("clonesig.example.toml")).unwrap();
        c.validate().unwrap();
        assert_eq!(c.cluster.algorithm, Algorithm::Mcl);
    }
}
