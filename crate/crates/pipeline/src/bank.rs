//! The novel-object bank: fitted boxes persisted as JSON lines, one target
//! per line, grouped by frame in processing order.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use amodal_core::costfn::CostBreakdown;
use amodal_core::filters::AlignmentVerdict;
use amodal_core::geom::BoxParams;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub frame_id: String,
    pub camera_id: String,
    pub proposal_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NovelObjectTarget {
    pub frame: String,
    #[serde(rename = "box")]
    pub bbox: BoxParams<f64>,
    pub class: String,
    pub cost: CostBreakdown<f64>,
    pub fit_for_alignment: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    pub provenance: Provenance,
    /// Reserved for tracking output; never written by this crate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<AlignmentVerdict>,
}

impl NovelObjectTarget {
    fn check(&self) -> std::result::Result<(), String> {
        let b = &self.bbox;
        if !b.to_array().iter().all(|v| v.is_finite()) || !(b.l > 0.0 && b.w > 0.0 && b.h > 0.0) {
            return Err("box must be finite with positive dimensions".into());
        }
        if self.fit_for_alignment && self.embedding.is_none() {
            return Err("fit_for_alignment target has no embedding".into());
        }
        if self.frame != self.provenance.frame_id {
            return Err(format!("frame '{}' disagrees with provenance '{}'", self.frame, self.provenance.frame_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NovelObjectBank {
    pub targets: Vec<NovelObjectTarget>,
}

/// Per-class totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCount {
    pub targets: usize,
    pub fit_for_alignment: usize,
}

impl NovelObjectBank {
    pub fn new(targets: Vec<NovelObjectTarget>) -> Self {
        Self { targets }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn by_frame(&self) -> BTreeMap<&str, Vec<&NovelObjectTarget>> {
        let mut out: BTreeMap<&str, Vec<&NovelObjectTarget>> = BTreeMap::new();
        for t in &self.targets {
            out.entry(t.frame.as_str()).or_default().push(t);
        }
        out
    }

    pub fn class_counts(&self) -> BTreeMap<String, ClassCount> {
        let mut out: BTreeMap<String, ClassCount> = BTreeMap::new();
        for t in &self.targets {
            let c = out.entry(t.class.clone()).or_default();
            c.targets += 1;
            c.fit_for_alignment += t.fit_for_alignment as usize;
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for t in &self.targets {
            s.push_str(&serde_json::to_string(t).expect("target serializes"));
            s.push('\n');
        }
        s
    }

    /// Parses JSON lines; blank lines are ignored.
    pub fn from_jsonl(text: &str, path: &Path) -> Result<Self> {
        let mut targets = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let schema = |reason: String| PipelineError::Schema { path: path.to_path_buf(), line: i + 1, reason };
            let t: NovelObjectTarget = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
            t.check().map_err(schema)?;
            targets.push(t);
        }
        Ok(Self { targets })
    }
}

pub fn write_bank(path: impl AsRef<Path>, bank: &NovelObjectBank) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| PipelineError::io(path, e))?;
    f.write_all(bank.to_jsonl().as_bytes()).map_err(|e| PipelineError::io(path, e))
}

pub fn read_bank(path: impl AsRef<Path>) -> Result<NovelObjectBank> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    NovelObjectBank::from_jsonl(&text, path)
}
