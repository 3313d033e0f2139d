//! End-to-end annotation over a directory of frames.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use amodal_core::assoc::{associate, AssocStats};
use amodal_core::filters::FilterStats;
use amodal_core::sceneprep::{cluster_objects, remove_ground};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bank::{write_bank, ClassCount, NovelObjectBank, NovelObjectTarget};
use crate::config::PipelineConfig;
use crate::error::{PipelineError, Result};
use crate::frame::{list_manifests, load_frame, write_json, LoadedFrame};
use crate::prepare::{prepare_targets, PrepareStats};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFrame {
    pub manifest: String,
    pub reason: String,
}

/// Shares of all written targets, each target counted once: either usable
/// for alignment or rejected by its first failing filter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AlignmentShares {
    pub used_for_alignment: f64,
    pub occlusion: f64,
    pub resolution: f64,
    pub multiview: f64,
    pub missing_embedding: f64,
}

impl AlignmentShares {
    pub fn from_stats(s: &FilterStats) -> Self {
        Self {
            used_for_alignment: s.fraction(s.fit),
            occlusion: s.fraction(s.rejected_occlusion),
            resolution: s.fraction(s.rejected_resolution),
            multiview: s.fraction(s.rejected_multiview),
            missing_embedding: s.fraction(s.missing_embedding),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_fingerprint: String,
    pub frames_total: usize,
    pub frames_processed: usize,
    pub frames_skipped: Vec<SkippedFrame>,
    pub association: AssocStats,
    pub preparation: PrepareStats,
    pub targets: usize,
    pub per_class: BTreeMap<String, ClassCount>,
    pub shares: AlignmentShares,
}

impl RunReport {
    /// Human-readable summary.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let f = &self.preparation.filters;
        let pct = |n: usize| 100.0 * f.fraction(n);
        let _ = writeln!(s, "frames: {} processed, {} skipped", self.frames_processed, self.frames_skipped.len());
        let _ = writeln!(
            s,
            "proposals: {} ({} matched), pairs: {}, search failures: {}",
            self.association.proposals,
            self.association.matched_proposals,
            self.preparation.pairs,
            self.preparation.search_failures
        );
        let _ = writeln!(
            s,
            "targets: {} after conflict resolution ({} dropped) and NMS ({} suppressed)",
            self.targets, self.preparation.conflicts_resolved, self.preparation.nms_suppressed
        );
        for (class, c) in &self.per_class {
            let _ = writeln!(s, "  {class:<22} {:>7} targets {:>7} fit for alignment", c.targets, c.fit_for_alignment);
        }
        let _ = writeln!(
            s,
            "{} of {} targets ({:.0}%) used for alignment; excluded for occlusion ({:.0}%), insufficient resolution ({:.0}%), multi-view misalignment ({:.0}%), missing embedding ({:.0}%)",
            f.fit,
            f.total,
            pct(f.fit),
            pct(f.rejected_occlusion),
            pct(f.rejected_resolution),
            pct(f.rejected_multiview),
            pct(f.missing_embedding)
        );
        s
    }
}

fn merge_assoc(a: &mut AssocStats, b: &AssocStats) {
    a.proposals += b.proposals;
    a.matched_proposals += b.matched_proposals;
    a.unmatched_proposals += b.unmatched_proposals;
    a.unknown_camera += b.unknown_camera;
    a.pairs += b.pairs;
}

/// Result of one frame.
#[derive(Debug, Clone)]
pub struct FrameOutcome {
    pub targets: Vec<NovelObjectTarget>,
    pub association: AssocStats,
    pub preparation: PrepareStats,
}

/// Fails when a proposal names a class the config cannot handle or carries
/// an embedding of the wrong length.
pub fn check_frame(frame: &LoadedFrame, cfg: &PipelineConfig) -> Result<()> {
    for (i, p) in frame.proposals.iter().enumerate() {
        let tag = || format!("frame {} proposal {i}", frame.scene.frame_id);
        if cfg.anchor(&p.class_id).is_none() || !cfg.filters.tau_occ.contains_key(&p.class_id) {
            return Err(PipelineError::Config(format!(
                "{}: class '{}' needs an anchor and a tau_occ",
                tag(),
                p.class_id
            )));
        }
        if p.mask.crop_w == 0 || p.mask.crop_h == 0 {
            return Err(PipelineError::Config(format!("{}: empty crop", tag())));
        }
        if let (Some(dim), Some(e)) = (cfg.input.embedding_dim, &p.embedding) {
            if e.len() != dim {
                return Err(PipelineError::Config(format!(
                    "{}: embedding has {} values, expected {dim}",
                    tag(),
                    e.len()
                )));
            }
        }
    }
    Ok(())
}

pub fn process_frame(frame: &LoadedFrame, cfg: &PipelineConfig) -> Result<FrameOutcome> {
    check_frame(frame, cfg)?;
    let scene = &frame.scene;
    let split = match &frame.ground {
        Some(g) => g.clone(),
        None => remove_ground(&scene.cloud, &cfg.ground)?,
    };
    let clusters = match &frame.clusters {
        Some(c) => c.clone(),
        None => cluster_objects(&scene.cloud, &split.non_ground, cfg.clustering.eps, cfg.clustering.min_pts),
    };
    let clusters: Vec<_> = clusters.into_iter().filter(|c| c.len() >= cfg.clustering.min_cluster_size).collect();
    let (pairs, association) = associate(scene, &frame.proposals, &clusters, &cfg.association);
    let (targets, preparation) = prepare_targets(scene, &pairs, cfg);
    info!("{}: {} clusters, {} pairs, {} targets", scene.frame_id, clusters.len(), pairs.len(), targets.len());
    Ok(FrameOutcome { targets, association, preparation })
}

/// Annotates every manifest in `cfg.input.frames_dir`, writes the bank and
/// the report, and returns the report. Unreadable frames are skipped with a
/// warning; configuration problems abort the run.
pub fn run_annotate(cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let manifests = list_manifests(&cfg.input.frames_dir)?;
    let outcomes: Vec<Result<FrameOutcome>> =
        manifests.par_iter().map(|m| load_frame(m).and_then(|f| process_frame(&f, cfg))).collect();

    let mut report = RunReport {
        config_fingerprint: cfg.fingerprint(),
        frames_total: manifests.len(),
        frames_processed: 0,
        frames_skipped: Vec::new(),
        association: AssocStats::default(),
        preparation: PrepareStats::default(),
        targets: 0,
        per_class: BTreeMap::new(),
        shares: AlignmentShares::default(),
    };
    let mut targets = Vec::new();
    for (m, outcome) in manifests.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                report.frames_processed += 1;
                merge_assoc(&mut report.association, &o.association);
                report.preparation.merge(&o.preparation);
                targets.extend(o.targets);
            }
            Err(e @ PipelineError::Config(_)) => return Err(e),
            Err(e) => {
                warn!("skipping {}: {e}", m.display());
                report.frames_skipped.push(SkippedFrame { manifest: file_name(m), reason: e.to_string() });
            }
        }
    }
    let bank = NovelObjectBank::new(targets);
    report.targets = bank.len();
    report.per_class = bank.class_counts();
    report.shares = AlignmentShares::from_stats(&report.preparation.filters);

    write_bank(&cfg.output.bank, &bank)?;
    write_json(&cfg.output.report, &report)?;
    Ok(report)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
}
