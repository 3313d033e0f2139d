//! Per-frame target preparation: box search for every cross-modal pair,
//! alignment verdicts, one-to-many conflict resolution, then rotated NMS.

use amodal_core::assoc::CrossModalProposal;
use amodal_core::costfn::default_c_surface;
use amodal_core::filters::{verdict, AlignmentContext, FilterStats};
use amodal_core::geom::iou_bev;
use amodal_core::optimizer::{centroid, pso_search};
use amodal_core::sceneprep::Scene;
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bank::{NovelObjectTarget, Provenance};
use crate::config::PipelineConfig;

/// Counters for one frame's preparation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PrepareStats {
    pub pairs: usize,
    pub search_failures: usize,
    /// Pairs dropped because another pair of the same proposal cost less.
    pub conflicts_resolved: usize,
    pub nms_suppressed: usize,
    pub filters: FilterStats,
}

impl PrepareStats {
    pub fn merge(&mut self, o: &PrepareStats) {
        self.pairs += o.pairs;
        self.search_failures += o.search_failures;
        self.conflicts_resolved += o.conflicts_resolved;
        self.nms_suppressed += o.nms_suppressed;
        self.filters.merge(&o.filters);
    }
}

/// Searches every pair (in parallel), keeps the cheapest pair per proposal,
/// and suppresses duplicates. Failed searches are logged and skipped.
/// Output order is ascending cost, ties in pair order.
pub fn prepare_targets(
    scene: &Scene<f64>,
    pairs: &[CrossModalProposal<f64>],
    cfg: &PipelineConfig,
) -> (Vec<NovelObjectTarget>, PrepareStats) {
    let mut stats = PrepareStats { pairs: pairs.len(), ..Default::default() };
    let searched: Vec<Option<NovelObjectTarget>> = pairs.par_iter().map(|pair| fit_pair(scene, pair, cfg)).collect();
    stats.search_failures = searched.iter().filter(|t| t.is_none()).count();

    // Cheapest pair per proposal; the earlier pair wins ties.
    let mut best: Vec<NovelObjectTarget> = Vec::new();
    for t in searched.into_iter().flatten() {
        let slot = best.iter_mut().find(|b| b.provenance.proposal_index == t.provenance.proposal_index);
        match slot {
            Some(b) => {
                stats.conflicts_resolved += 1;
                if t.cost.total < b.cost.total {
                    *b = t;
                }
            }
            None => best.push(t),
        }
    }

    let before = best.len();
    let kept = nms(best, cfg.nms_threshold);
    stats.nms_suppressed = before - kept.len();
    for t in &kept {
        if let Some(v) = &t.verdict {
            stats.filters.record(v, t.embedding.is_some());
        }
    }
    (kept, stats)
}

fn fit_pair(scene: &Scene<f64>, pair: &CrossModalProposal<f64>, cfg: &PipelineConfig) -> Option<NovelObjectTarget> {
    let prop = &pair.proposal;
    let tag = format!("{} proposal {}", scene.frame_id, pair.proposal_index);
    let Some(anchor) = cfg.anchor(&prop.class_id) else {
        warn!("{tag}: no anchor for class '{}'", prop.class_id);
        return None;
    };
    let points = pair.object_points(scene);
    let c = centroid(&points)?;
    let weights = cfg.weights.resolve(default_c_surface(&scene.ego, &c, &anchor));
    let cluster_key = pair.cluster.point_indices.first().copied().unwrap_or(0);
    let swarm = cfg.swarm_for(&scene.frame_id, pair.proposal_index, cluster_key);
    let result = match pso_search(&pair.search_problem(scene, &points), &anchor, &weights, &swarm) {
        Ok(r) => r,
        Err(e) => {
            warn!("{tag}: search failed: {e}");
            return None;
        }
    };
    let calib = &scene.cameras[pair.camera_index];
    let ctx = AlignmentContext { fitted_box: &result.best_box, proposal: prop, calib };
    let v = match verdict(&ctx, &cfg.filters) {
        Ok(v) => v,
        Err(e) => {
            warn!("{tag}: {e}");
            return None;
        }
    };
    Some(NovelObjectTarget {
        frame: scene.frame_id.clone(),
        bbox: result.best_box,
        class: prop.class_id.clone(),
        cost: result.best_cost,
        fit_for_alignment: v.fit_for_alignment && prop.embedding.is_some(),
        embedding: prop.embedding.clone(),
        provenance: Provenance {
            frame_id: scene.frame_id.clone(),
            camera_id: prop.camera_id.clone(),
            proposal_index: pair.proposal_index,
        },
        velocity: None,
        verdict: Some(v),
    })
}

/// Greedy BEV suppression in ascending total-cost order: a target survives
/// unless it overlaps an already kept one with IoU above `iou_threshold`.
pub fn nms(mut targets: Vec<NovelObjectTarget>, iou_threshold: f64) -> Vec<NovelObjectTarget> {
    targets.sort_by(|a, b| a.cost.total.total_cmp(&b.cost.total));
    let mut kept: Vec<NovelObjectTarget> = Vec::with_capacity(targets.len());
    for t in targets {
        if kept.iter().all(|k| iou_bev(&k.bbox, &t.bbox) <= iou_threshold) {
            kept.push(t);
        }
    }
    kept
}
