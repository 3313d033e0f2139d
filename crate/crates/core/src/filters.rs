//! Selective alignment: decides whether an annotation's image embedding is
//! trustworthy enough to supervise 3D-2D feature alignment.
//!
//! A failed filter only clears the alignment flag; the box itself is always
//! kept as a training target.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assoc::{MaskStats, Proposal2D};
use crate::geom::{iou_2d, project_box_to_2d, Box2D, BoxParams, CameraCalib};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("no occlusion threshold configured for class '{0}'")]
    UnknownClass(String),
    #[error("crop dimensions must be >= 1, got {w}x{h}")]
    EmptyCrop { w: u32, h: u32 },
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterThresholds {
    /// Minimum instance-pixel ratio per class (a ratio equal to the
    /// threshold fails).
    pub tau_occ: BTreeMap<String, f64>,
    /// Minimum crop area in pixels (an area equal to the threshold fails).
    pub tau_res: f64,
    /// Minimum IoU between the projected box and the proposal.
    pub tau_mv: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        let tau_occ = [
            ("car", 0.5),
            ("truck", 0.5),
            ("pedestrian", 0.25),
            ("bicycle", 0.4),
            ("motorcycle", 0.4),
            ("bus", 0.5),
            ("traffic_cone", 0.25),
            ("barrier", 0.35),
            ("construction_vehicle", 0.5),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self { tau_occ, tau_res: 4000.0, tau_mv: 0.5 }
    }
}

impl FilterThresholds {
    pub fn validate(&self) -> Result<(), FilterError> {
        for (class, &t) in &self.tau_occ {
            if !(t > 0.0 && t < 1.0) {
                return Err(FilterError::InvalidThreshold(format!("tau_occ[{class}] = {t} not in (0, 1)")));
            }
        }
        if !(self.tau_res > 0.0 && self.tau_res.is_finite()) {
            return Err(FilterError::InvalidThreshold(format!("tau_res = {} must be > 0", self.tau_res)));
        }
        if !(self.tau_mv > 0.0 && self.tau_mv < 1.0) {
            return Err(FilterError::InvalidThreshold(format!("tau_mv = {} not in (0, 1)", self.tau_mv)));
        }
        Ok(())
    }
}

/// Passes when the instance mask covers more than `tau_occ[class]` of the crop.
pub fn occlusion_filter(
    mask_pixel_count: u64,
    crop_w: u32,
    crop_h: u32,
    class_id: &str,
    thresholds: &FilterThresholds,
) -> Result<bool, FilterError> {
    if crop_w == 0 || crop_h == 0 {
        return Err(FilterError::EmptyCrop { w: crop_w, h: crop_h });
    }
    let tau = *thresholds.tau_occ.get(class_id).ok_or_else(|| FilterError::UnknownClass(class_id.to_string()))?;
    let ratio = mask_pixel_count as f64 / (crop_w as f64 * crop_h as f64);
    Ok(ratio > tau)
}

/// Passes when the crop has more than `tau_res` pixels.
pub fn resolution_filter(crop_w: u32, crop_h: u32, thresholds: &FilterThresholds) -> bool {
    (crop_w as f64 * crop_h as f64) > thresholds.tau_res
}

/// Passes when the projected box overlaps the proposal with IoU >= `tau_mv`.
pub fn multiview_filter<T: Scalar>(
    b: &BoxParams<T>,
    proposal: &Box2D<T>,
    calib: &CameraCalib<T>,
    thresholds: &FilterThresholds,
) -> bool {
    let iou = project_box_to_2d(b, calib).map_or(0.0, |hull| iou_2d(&hull, proposal).to_f64_lossy());
    iou >= thresholds.tau_mv
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AlignmentVerdict {
    pub not_occluded: bool,
    pub high_res: bool,
    pub mv_aligned: bool,
    pub fit_for_alignment: bool,
}

impl AlignmentVerdict {
    pub fn new(not_occluded: bool, high_res: bool, mv_aligned: bool) -> Self {
        Self { not_occluded, high_res, mv_aligned, fit_for_alignment: not_occluded && high_res && mv_aligned }
    }

    /// First failing check in the order occlusion, resolution, multi-view.
    pub fn primary_rejection(&self) -> Option<RejectionReason> {
        if !self.not_occluded {
            Some(RejectionReason::Occlusion)
        } else if !self.high_res {
            Some(RejectionReason::Resolution)
        } else if !self.mv_aligned {
            Some(RejectionReason::MultiView)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    Occlusion,
    Resolution,
    MultiView,
}

/// Inputs for one verdict.
#[derive(Debug, Clone, Copy)]
pub struct AlignmentContext<'a, T> {
    pub fitted_box: &'a BoxParams<T>,
    pub proposal: &'a Proposal2D<T>,
    pub calib: &'a CameraCalib<T>,
}

pub fn verdict<T: Scalar>(
    ctx: &AlignmentContext<'_, T>,
    thresholds: &FilterThresholds,
) -> Result<AlignmentVerdict, FilterError> {
    let MaskStats { instance_pixel_count, crop_w, crop_h } = ctx.proposal.mask;
    let not_occluded = occlusion_filter(instance_pixel_count, crop_w, crop_h, &ctx.proposal.class_id, thresholds)?;
    let high_res = resolution_filter(crop_w, crop_h, thresholds);
    let mv_aligned = multiview_filter(ctx.fitted_box, &ctx.proposal.bbox, ctx.calib, thresholds);
    Ok(AlignmentVerdict::new(not_occluded, high_res, mv_aligned))
}

/// Verdict counts for run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterStats {
    pub total: usize,
    pub fit: usize,
    /// Each annotation counted once, under its first failing check.
    pub rejected_occlusion: usize,
    pub rejected_resolution: usize,
    pub rejected_multiview: usize,
    /// Passed every filter but carried no embedding.
    pub missing_embedding: usize,
}

impl FilterStats {
    pub fn record(&mut self, v: &AlignmentVerdict, has_embedding: bool) {
        self.total += 1;
        match v.primary_rejection() {
            Some(RejectionReason::Occlusion) => self.rejected_occlusion += 1,
            Some(RejectionReason::Resolution) => self.rejected_resolution += 1,
            Some(RejectionReason::MultiView) => self.rejected_multiview += 1,
            None if has_embedding => self.fit += 1,
            None => self.missing_embedding += 1,
        }
    }

    pub fn merge(&mut self, other: &FilterStats) {
        self.total += other.total;
        self.fit += other.fit;
        self.rejected_occlusion += other.rejected_occlusion;
        self.rejected_resolution += other.rejected_resolution;
        self.rejected_multiview += other.rejected_multiview;
        self.missing_embedding += other.missing_embedding;
    }

    pub fn fraction(&self, count: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            count as f64 / self.total as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occlusion_cases() {
        let t = FilterThresholds::default();
        assert!(!occlusion_filter(4000, 100, 100, "car", &t).unwrap());
        assert!(!occlusion_filter(5000, 100, 100, "car", &t).unwrap(), "ratio equal to threshold is filtered");
        assert!(occlusion_filter(5001, 100, 100, "car", &t).unwrap());
        assert!(occlusion_filter(3000, 100, 100, "pedestrian", &t).unwrap());
        for class in t.tau_occ.keys() {
            assert!(occlusion_filter(64 * 48, 64, 48, class, &t).unwrap());
        }
        assert_eq!(occlusion_filter(1, 1, 1, "unicorn", &t), Err(FilterError::UnknownClass("unicorn".into())));
        assert_eq!(occlusion_filter(1, 0, 1, "car", &t), Err(FilterError::EmptyCrop { w: 0, h: 1 }));
    }

    #[test]
    fn resolution_cases() {
        let t = FilterThresholds::default();
        assert!(!resolution_filter(50, 50, &t));
        assert!(resolution_filter(100, 100, &t));
        assert!(!resolution_filter(80, 50, &t));
        assert!(resolution_filter(4001, 1, &t));
    }

    #[test]
    fn verdict_is_conjunction() {
        assert!(AlignmentVerdict::new(true, true, true).fit_for_alignment);
        for mask in 0..7u8 {
            let v = AlignmentVerdict::new(mask & 1 != 0, mask & 2 != 0, mask & 4 != 0);
            assert!(!v.fit_for_alignment);
            assert!(v.primary_rejection().is_some());
        }
    }

    #[test]
    fn threshold_validation() {
        assert!(FilterThresholds::default().validate().is_ok());
        let mut t = FilterThresholds::default();
        t.tau_occ.insert("odd".into(), 1.0);
        assert!(t.validate().is_err());
        assert!(FilterThresholds { tau_mv: 0.0, ..Default::default() }.validate().is_err());
    }
}
