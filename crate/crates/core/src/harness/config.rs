use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::calib::CompositeWeights;
use crate::data::{BlobSpec, PartitionMode};
use crate::fed::{FederationSettings, QrailParams, StrategyRegistry};
use crate::train::SpsaConfig;
use crate::vqc::{CircuitSpec, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    /// Deterministic Gaussian clusters, no files needed.
    Blobs,
    Mnist,
    Fmnist,
    /// JSON-header array container (see `data::load_container`).
    Container,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    #[default]
    Iid,
    Dirichlet,
}

fn default_classes() -> [usize; 3] {
    [0, 1, 2]
}

fn default_alpha() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: DatasetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_images: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_labels: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_images: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_labels: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_path: Option<String>,
    #[serde(default = "default_classes")]
    pub classes: [usize; 3],
    pub train_size: usize,
    pub test_size: usize,
    #[serde(default)]
    pub partition: PartitionKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default)]
    pub blobs: BlobSpec,
}

impl DatasetConfig {
    pub fn partition_mode(&self) -> PartitionMode {
        match self.partition {
            PartitionKind::Iid => PartitionMode::Iid,
            PartitionKind::Dirichlet => PartitionMode::Dirichlet { alpha: self.alpha },
        }
    }

    /// Paths this dataset reads, as written in the config.
    pub fn files(&self) -> Vec<&str> {
        let candidates: &[&Option<String>] = match self.name {
            DatasetKind::Blobs => &[],
            DatasetKind::Mnist | DatasetKind::Fmnist => {
                &[&self.train_images, &self.train_labels, &self.test_images, &self.test_labels]
            }
            DatasetKind::Container => &[&self.train_path, &self.test_path],
        };
        candidates.iter().filter_map(|p| p.as_deref()).collect()
    }
}

fn default_init_scale() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub qubits: usize,
    pub layers: usize,
    #[serde(default = "default_topology")]
    pub topology: Topology,
    #[serde(default = "default_fold")]
    pub fold: usize,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

fn default_topology() -> Topology {
    Topology::Linear
}

fn default_fold() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    pub fn to_vec(&self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederationSection {
    pub clients: usize,
    pub rho: f64,
    pub rounds: usize,
    /// One method name or a list; every listed method runs on every seed.
    pub method: OneOrMany,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_w_min")]
    pub w_min: f64,
    #[serde(default)]
    pub idle_noise: bool,
}

fn default_tau() -> f64 {
    QrailParams::default().tau
}

fn default_beta() -> f64 {
    QrailParams::default().beta
}

fn default_w_min() -> f64 {
    QrailParams::default().w_min
}

fn default_weights() -> String {
    "1,5,2,1,1".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub profiles: String,
    /// Composite weights in `1q,2q,readout,T1,T2` order.
    #[serde(default = "default_weights")]
    pub weights: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool_size: Option<usize>,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_output() -> String {
    "runs".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederationConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_dir: String,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub federation: FederationSection,
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub optimizer: SpsaConfig,
    /// Directory relative paths resolve against; set on load.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl FederationConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        let mut cfg: FederationConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn methods(&self) -> Vec<String> {
        self.federation.method.to_vec()
    }

    pub fn lambda(&self) -> Result<CompositeWeights, HarnessError> {
        self.calibration.weights.parse().map_err(|e: crate::calib::CalibError| HarnessError::Config(e.to_string()))
    }

    pub fn qrail(&self) -> QrailParams {
        QrailParams { tau: self.federation.tau, beta: self.federation.beta, w_min: self.federation.w_min }
    }

    pub fn circuit_spec(&self) -> Result<CircuitSpec, HarnessError> {
        let m = &self.model;
        CircuitSpec::new(m.qubits, m.layers, m.topology, m.fold).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Settings for one method.
    pub fn settings(&self, method: &str) -> Result<FederationSettings, HarnessError> {
        Ok(FederationSettings {
            spec: self.circuit_spec()?,
            clients: self.federation.clients,
            rho: self.federation.rho,
            rounds: self.federation.rounds,
            method: method.to_string(),
            qrail: self.qrail(),
            idle_noise: self.federation.idle_noise,
            lambda: self.lambda()?,
            pool_size: self.calibration.pool_size,
            spsa: self.optimizer,
            partition: self.dataset.partition_mode(),
            init_scale: self.model.init_scale,
        })
    }

    /// Check every setting and referenced file without running anything.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        let f = &self.federation;
        if !(0.0..=1.0).contains(&f.rho) {
            return bad("rho out of [0,1]".into());
        }
        if f.clients == 0 {
            return bad("federation.clients must be at least 1".into());
        }
        let registry = StrategyRegistry::default();
        let methods = self.methods();
        if methods.is_empty() {
            return bad("federation.method lists no methods".into());
        }
        for m in &methods {
            if !registry.contains(m) {
                return bad(format!("unknown method '{m}' (known: {})", registry.names().join(", ")));
            }
        }
        self.qrail().validate(f.clients).map_err(|e| HarnessError::Config(e.to_string()))?;
        self.optimizer.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.circuit_spec()?;
        self.lambda()?;
        if !(self.model.init_scale >= 0.0 && self.model.init_scale.is_finite()) {
            return bad("model.init_scale must be non-negative".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must list at least one seed".into());
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }

        let d = &self.dataset;
        if d.train_size < f.clients {
            return bad(format!("dataset.train_size {} is below the client count {}", d.train_size, f.clients));
        }
        if d.test_size == 0 {
            return bad("dataset.test_size must be positive".into());
        }
        if d.partition == PartitionKind::Dirichlet && !(d.alpha > 0.0 && d.alpha.is_finite()) {
            return bad("dataset.alpha must be positive".into());
        }
        let required = match d.name {
            DatasetKind::Blobs => 0,
            DatasetKind::Mnist | DatasetKind::Fmnist => 4,
            DatasetKind::Container => 2,
        };
        if d.files().len() != required {
            return bad(format!("dataset '{:?}' needs {required} file paths", d.name).to_lowercase());
        }
        for file in d.files() {
            let p = self.resolve(file);
            if !p.is_file() {
                return bad(format!("dataset file {} does not exist", p.display()));
            }
        }
        let profiles = self.resolve(&self.calibration.profiles);
        if !profiles.is_dir() {
            return bad(format!("profile directory {} does not exist", profiles.display()));
        }
        Ok(())
    }
}
