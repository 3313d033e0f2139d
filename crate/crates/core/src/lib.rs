//! Amodal 3D box annotation from image proposals and LiDAR clusters.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root pin the common `f64` instantiations used by the pipeline.
//!
//! * [`geom`]: rotated boxes, pinhole projection, 2D and BEV IoU.
//! * [`costfn`]: the box-fitting objective and its constraints.
//! * [`optimizer`]: particle-swarm search and the grid baseline.
//! * [`sceneprep`]: point-cloud loading, ground removal, clustering.
//! * [`assoc`]: frustum lifting and proposal-cluster pairing.
//! * [`filters`]: selective-alignment filters.

pub mod assoc;
pub mod costfn;
pub mod filters;
pub mod geom;
pub mod optimizer;
pub mod scalar;
pub mod sceneprep;

pub use scalar::Scalar;

pub type Point3d = geom::Point3<f64>;
pub type PointCloudF64 = geom::PointCloud<f64>;
pub type BoxParamsF64 = geom::BoxParams<f64>;
pub type Box2DF64 = geom::Box2D<f64>;
pub type CameraCalibF64 = geom::CameraCalib<f64>;
pub type RayF64 = geom::Ray<f64>;
pub type CostWeightsF64 = costfn::CostWeights<f64>;
pub type AnchorRangeF64 = costfn::AnchorRange<f64>;
pub type CostBreakdownF64 = costfn::CostBreakdown<f64>;
pub type SearchResultF64 = optimizer::SearchResult<f64>;
pub type SceneF64 = sceneprep::Scene<f64>;
pub type ClusterF64 = sceneprep::Cluster<f64>;
pub type Proposal2DF64 = assoc::Proposal2D<f64>;
pub type CrossModalProposalF64 = assoc::CrossModalProposal<f64>;

pub type Point3f = geom::Point3<f32>;
pub type BoxParamsF32 = geom::BoxParams<f32>;
pub type CostBreakdownF32 = costfn::CostBreakdown<f32>;
