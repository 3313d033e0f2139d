//! Pipeline configuration, loaded from TOML. Every field has a default, so an
//! empty file is a valid config.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use amodal_core::assoc::AssocParams;
use amodal_core::costfn::{AnchorRange, CostWeights};
use amodal_core::filters::FilterThresholds;
use amodal_core::optimizer::SwarmConfig;
use amodal_core::sceneprep::GroundParams;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root of all randomness; per-search seeds are derived from it.
    pub seed: u64,
    /// BEV IoU above which the higher-cost target is suppressed.
    pub nms_threshold: f64,
    pub weights: WeightsConfig,
    pub swarm: SwarmConfig,
    pub anchors: Vec<AnchorConfig>,
    pub filters: FilterThresholds,
    pub association: AssocParams,
    pub clustering: ClusterConfig,
    pub ground: GroundParams,
    pub input: InputConfig,
    pub output: OutputConfig,
    pub bench: BenchConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            nms_threshold: 0.5,
            weights: WeightsConfig::default(),
            swarm: SwarmConfig::default(),
            anchors: default_anchors(),
            filters: FilterThresholds::default(),
            association: AssocParams::default(),
            clustering: ClusterConfig::default(),
            ground: GroundParams::default(),
            input: InputConfig::default(),
            output: OutputConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub gamma: f64,
    /// Fixed surface clip in meters. When absent it is computed per search
    /// from the cluster centroid and the class anchor.
    pub c_surface: Option<f64>,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        let w = CostWeights::<f64>::standard(1.0);
        Self { lambda1: w.lambda1, lambda2: w.lambda2, lambda3: w.lambda3, gamma: w.gamma, c_surface: None }
    }
}

impl WeightsConfig {
    pub fn resolve(&self, c_surface: f64) -> CostWeights<f64> {
        CostWeights {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            lambda3: self.lambda3,
            gamma: self.gamma,
            c_surface: self.c_surface.unwrap_or(c_surface),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorConfig {
    pub class: String,
    /// `[l, w, h]` lower bounds, meters.
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl AnchorConfig {
    pub fn to_anchor(&self) -> AnchorRange<f64> {
        AnchorRange::new(self.class.clone(), self.min, self.max)
    }
}

pub fn default_anchors() -> Vec<AnchorConfig> {
    let table: [(&str, [f64; 3], [f64; 3]); 9] = [
        ("car", [3.9, 1.6, 1.4], [5.3, 2.1, 1.9]),
        ("truck", [5.5, 2.2, 2.4], [10.0, 2.9, 3.8]),
        ("bus", [9.0, 2.5, 2.9], [13.0, 3.0, 4.0]),
        ("construction_vehicle", [4.5, 2.2, 2.4], [8.5, 3.2, 3.8]),
        ("pedestrian", [0.5, 0.5, 1.5], [1.0, 0.9, 2.0]),
        ("bicycle", [1.5, 0.5, 1.0], [2.0, 0.8, 1.5]),
        ("motorcycle", [1.8, 0.7, 1.2], [2.5, 1.0, 1.7]),
        ("traffic_cone", [0.3, 0.3, 0.6], [0.6, 0.6, 1.2]),
        ("barrier", [1.5, 0.3, 0.8], [3.0, 0.6, 1.2]),
    ];
    table.iter().map(|&(c, min, max)| AnchorConfig { class: c.to_string(), min, max }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// Neighborhood radius, meters.
    pub eps: f64,
    pub min_pts: usize,
    /// Clusters with fewer points are dropped before association.
    pub min_cluster_size: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self { eps: 0.5, min_pts: 5, min_cluster_size: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Directory scanned for `*.frame.json` manifests.
    pub frames_dir: PathBuf,
    /// Embedding length every proposal must match; unchecked when absent.
    pub embedding_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub bank: PathBuf,
    pub report: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { bank: PathBuf::from("bank.jsonl"), report: PathBuf::from("report.json") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub instances: usize,
    pub budgets: Vec<usize>,
    pub class: String,
    /// Ego distance range of generated instances, meters.
    pub range: [f64; 2],
    pub csv: PathBuf,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            instances: 50,
            budgets: vec![37_500, 75_000, 150_000],
            class: "car".into(),
            range: [5.0, 40.0],
            csv: PathBuf::from("bench.csv"),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| PipelineError::parse(path, e))?;
        cfg.rebase(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    /// Resolves relative paths against the config file's directory.
    fn rebase(&mut self, base: &Path) {
        for p in [&mut self.input.frames_dir, &mut self.output.bank, &mut self.output.report, &mut self.bench.csv] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        if !(self.nms_threshold > 0.0 && self.nms_threshold < 1.0) {
            return bad(format!("nms_threshold = {} not in (0, 1)", self.nms_threshold));
        }
        self.weights.resolve(1.0).validate()?;
        if let Some(c) = self.weights.c_surface {
            if !(c > 0.0 && c.is_finite()) {
                return bad(format!("weights.c_surface = {c} must be > 0"));
            }
        }
        self.swarm.validate()?;
        self.filters.validate()?;
        let mut seen = BTreeSet::new();
        for a in &self.anchors {
            a.to_anchor().validate()?;
            if !seen.insert(a.class.as_str()) {
                return bad(format!("duplicate anchor for class '{}'", a.class));
            }
            if !self.filters.tau_occ.contains_key(&a.class) {
                return bad(format!("class '{}' has an anchor but no tau_occ", a.class));
            }
        }
        let p = &self.association;
        if !(p.tau_match > 0.0 && p.tau_match.is_finite()) {
            return bad(format!("association.tau_match = {} must be > 0", p.tau_match));
        }
        if !(p.d_min >= 0.0 && p.d_min < p.d_max && p.d_max.is_finite()) {
            return bad(format!("association depth window ({}, {}) is empty", p.d_min, p.d_max));
        }
        let eps_ok = self.clustering.eps > 0.0;
        if !eps_ok || self.clustering.min_pts == 0 {
            return bad("clustering needs eps > 0 and min_pts >= 1".into());
        }
        let g = &self.ground;
        if !(g.cell_size > 0.0 && g.height_threshold > 0.0 && g.seed_quantile > 0.0 && g.seed_quantile <= 1.0) {
            return bad("ground parameters must be positive, seed_quantile in (0, 1]".into());
        }
        if self.bench.budgets.contains(&0) {
            return bad("bench budgets must be positive".into());
        }
        if !(self.bench.range[0] > 0.0 && self.bench.range[0] < self.bench.range[1]) {
            return bad(format!("bench.range {:?} is empty", self.bench.range));
        }
        Ok(())
    }

    pub fn anchor(&self, class: &str) -> Option<AnchorRange<f64>> {
        self.anchors.iter().find(|a| a.class == class).map(AnchorConfig::to_anchor)
    }

    /// Swarm settings for one search; the seed mixes the run seed with the
    /// search's stable identity so results do not depend on scheduling.
    pub fn swarm_for(&self, frame_id: &str, proposal_index: usize, cluster_key: usize) -> SwarmConfig {
        SwarmConfig { seed: derive_seed(self.seed, frame_id, proposal_index, cluster_key), ..self.swarm.clone() }
    }

    /// Short stable hash of the serialized config, stored in reports.
    pub fn fingerprint(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a(text.as_bytes()))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn derive_seed(seed: u64, frame_id: &str, a: usize, b: usize) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(frame_id.as_bytes());
    bytes.extend_from_slice(&(a as u64).to_le_bytes());
    bytes.extend_from_slice(&(b as u64).to_le_bytes());
    fnv1a(&bytes)
}
