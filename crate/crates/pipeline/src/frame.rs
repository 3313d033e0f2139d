//! On-disk frame layout.
//!
//! A frame is a JSON manifest (`<id>.frame.json`) naming a point-cloud file, a
//! proposal file and the camera rig. Relative paths resolve against the
//! manifest's directory.

use std::path::{Path, PathBuf};

use amodal_core::assoc::{MaskStats, Proposal2D};
use amodal_core::geom::{Box2D, CameraCalib, Point3};
use amodal_core::sceneprep::{
    load_cloud, read_cluster_labels, read_ground_mask, CloudFormat, Cluster, GroundSplit, Scene,
};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

pub const MANIFEST_SUFFIX: &str = ".frame.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameManifest {
    pub frame_id: String,
    #[serde(default)]
    pub ego: [f64; 3],
    pub cloud: PathBuf,
    #[serde(default = "default_format")]
    pub cloud_format: String,
    pub proposals: PathBuf,
    pub cameras: Vec<CameraCalib<f64>>,
    /// Optional precomputed ground mask (one 0/1 per point).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_mask: Option<PathBuf>,
    /// Optional precomputed cluster labels (one integer per point).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_labels: Option<PathBuf>,
}

fn default_format() -> String {
    "bin4".into()
}

/// One line of the proposal file, which is a JSON array of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalRecord {
    pub camera_id: String,
    /// `[u_min, v_min, u_max, v_max]` in pixels.
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub class: String,
    #[serde(default = "one")]
    pub score: f64,
    pub mask_pixel_count: u64,
    pub crop_w: u32,
    pub crop_h: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

impl ProposalRecord {
    pub fn to_proposal(&self) -> Proposal2D<f64> {
        let [u0, v0, u1, v1] = self.bbox;
        Proposal2D {
            bbox: Box2D::new(u0, v0, u1, v1),
            camera_id: self.camera_id.clone(),
            class_id: self.class.clone(),
            score: self.score,
            mask: MaskStats { instance_pixel_count: self.mask_pixel_count, crop_w: self.crop_w, crop_h: self.crop_h },
            embedding: self.embedding.clone(),
        }
    }
}

/// Everything read for one frame.
#[derive(Debug, Clone)]
pub struct LoadedFrame {
    pub scene: Scene<f64>,
    pub proposals: Vec<Proposal2D<f64>>,
    pub ground: Option<GroundSplit>,
    pub clusters: Option<Vec<Cluster<f64>>>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::parse(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<FrameManifest> {
    read_json(path.as_ref())
}

pub fn read_proposals(path: impl AsRef<Path>) -> Result<Vec<ProposalRecord>> {
    let path = path.as_ref();
    let records: Vec<ProposalRecord> = read_json(path)?;
    for (i, r) in records.iter().enumerate() {
        let [u0, v0, u1, v1] = r.bbox;
        if !(u0 < u1 && v0 < v1) || r.bbox.iter().any(|v| !v.is_finite()) {
            return Err(PipelineError::parse(path, format!("proposal {i}: box {:?} is not ordered", r.bbox)));
        }
    }
    Ok(records)
}

pub fn load_frame(manifest_path: impl AsRef<Path>) -> Result<LoadedFrame> {
    let manifest_path = manifest_path.as_ref();
    let m = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let format: CloudFormat = m.cloud_format.parse().map_err(|e: String| PipelineError::parse(manifest_path, e))?;
    let cloud = load_cloud(base.join(&m.cloud), format)?;
    let proposals = read_proposals(base.join(&m.proposals))?.iter().map(ProposalRecord::to_proposal).collect();
    let ground = m.ground_mask.as_ref().map(|p| read_ground_mask(base.join(p), cloud.len())).transpose()?;
    let clusters = m.cluster_labels.as_ref().map(|p| read_cluster_labels(base.join(p), &cloud)).transpose()?;
    let [ex, ey, ez] = m.ego;
    let scene = Scene { frame_id: m.frame_id, cloud, ego: Point3::new(ex, ey, ez), cameras: m.cameras };
    scene.validate()?;
    Ok(LoadedFrame { scene, proposals, ground, clusters })
}

/// Manifests under `dir`, sorted by file name.
pub fn list_manifests(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|e| PipelineError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| PipelineError::io(dir, e))?;
        let name = entry.file_name();
        if name.to_string_lossy().ends_with(MANIFEST_SUFFIX) {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::parse(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}
