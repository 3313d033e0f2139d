//! Scene ingestion and object-cluster extraction: point-cloud files, regional
//! ground-plane removal, and density clustering of what remains.

mod cluster;
mod ground;
mod io;

pub use cluster::{cluster_objects, Cluster};
pub use ground::{fit_plane, remove_ground, GroundParams, GroundSplit, Plane};
pub use io::{load_cloud, parse_binary_cloud, read_cluster_labels, read_ground_mask, write_cloud, CloudFormat};

use thiserror::Error;

use crate::geom::{CameraCalib, EgoPose, GeomError, PointCloud};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed point record at byte offset {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("scene {frame_id} has no cameras")]
    NoCameras { frame_id: String },
    #[error("camera {camera_id}: {source}")]
    Camera {
        camera_id: String,
        #[source]
        source: GeomError,
    },
}

/// One LiDAR sweep with its camera rig. Images themselves are never loaded.
#[derive(Debug, Clone)]
pub struct Scene<T> {
    pub frame_id: String,
    pub cloud: PointCloud<T>,
    pub ego: EgoPose<T>,
    pub cameras: Vec<CameraCalib<T>>,
}

impl<T: Scalar> Scene<T> {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.cameras.is_empty() {
            return Err(SceneError::NoCameras { frame_id: self.frame_id.clone() });
        }
        for cam in &self.cameras {
            cam.validate().map_err(|source| SceneError::Camera { camera_id: cam.camera_id.clone(), source })?;
        }
        if let Some(index) = self.cloud.points.iter().position(|p| !p.is_finite()) {
            return Err(SceneError::NonFinite { index });
        }
        Ok(())
    }

    pub fn camera(&self, camera_id: &str) -> Option<(usize, &CameraCalib<T>)> {
        self.cameras.iter().enumerate().find(|(_, c)| c.camera_id == camera_id)
    }
}
