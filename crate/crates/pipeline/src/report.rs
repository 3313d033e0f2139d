//! Summary of an existing bank file.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use amodal_core::filters::FilterStats;
use serde::{Deserialize, Serialize};

use crate::annotate::AlignmentShares;
use crate::bank::{ClassCount, NovelObjectBank};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankReport {
    pub frames: usize,
    pub targets: usize,
    pub per_class: BTreeMap<String, ClassCount>,
    /// Targets carrying a stored verdict.
    pub with_verdict: usize,
    pub filters: FilterStats,
    pub shares: AlignmentShares,
    pub mean_cost: Option<f64>,
}

pub fn bank_report(bank: &NovelObjectBank) -> BankReport {
    let mut filters = FilterStats::default();
    let mut with_verdict = 0;
    for t in &bank.targets {
        if let Some(v) = &t.verdict {
            with_verdict += 1;
            filters.record(v, t.embedding.is_some());
        }
    }
    let mean_cost =
        (!bank.is_empty()).then(|| bank.targets.iter().map(|t| t.cost.total).sum::<f64>() / bank.len() as f64);
    BankReport {
        frames: bank.by_frame().len(),
        targets: bank.len(),
        per_class: bank.class_counts(),
        with_verdict,
        filters,
        shares: AlignmentShares::from_stats(&filters),
        mean_cost,
    }
}

impl BankReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} targets in {} frames", self.targets, self.frames);
        for (class, c) in &self.per_class {
            let _ = writeln!(s, "  {class:<22} {:>7} targets {:>7} fit for alignment", c.targets, c.fit_for_alignment);
        }
        if let Some(m) = self.mean_cost {
            let _ = writeln!(s, "mean search cost: {m:.4}");
        }
        if self.with_verdict > 0 {
            let f = &self.filters;
            let pct = |n: usize| 100.0 * f.fraction(n);
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
        }
        s
    }
}
