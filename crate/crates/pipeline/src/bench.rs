//! Swarm search vs grid baseline on synthetic instances at equal budgets.

use std::path::Path;
use std::time::Instant;

use amodal_core::costfn::default_c_surface;
use amodal_core::geom::iou_bev;
use amodal_core::optimizer::{centroid, greedy_search, pso_search, SearchResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{derive_seed, PipelineConfig};
use crate::error::{PipelineError, Result};
use crate::synth::{synth_instances, SynthInstance, SynthSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Greedy,
    Adaptive,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Greedy => "greedy",
            Method::Adaptive => "adaptive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance_id: usize,
    pub method: Method,
    pub budget: usize,
    pub final_cost: f64,
    pub bev_iou: f64,
    pub wall_time: f64,
}

/// Runs one method at one budget on one instance.
pub fn bench_one(inst: &SynthInstance, cfg: &PipelineConfig, method: Method, budget: usize) -> Result<BenchRow> {
    let anchor = cfg
        .anchor(&inst.class)
        .ok_or_else(|| PipelineError::Config(format!("class '{}' has no anchor", inst.class)))?;
    let c =
        centroid(&inst.points).ok_or_else(|| PipelineError::Synth(format!("instance {} has no points", inst.id)))?;
    let weights = cfg.weights.resolve(default_c_surface(&inst.ego, &c, &anchor));
    let start = Instant::now();
    let result: SearchResult<f64> = match method {
        Method::Greedy => greedy_search(&inst.problem(), &anchor, &weights, budget)?,
        Method::Adaptive => {
            let mut swarm = cfg.swarm.with_budget(budget);
            swarm.seed = derive_seed(cfg.seed, "bench", inst.id, 0);
            pso_search(&inst.problem(), &anchor, &weights, &swarm)?
        }
    };
    Ok(BenchRow {
        instance_id: inst.id,
        method,
        budget,
        final_cost: result.best_cost.total,
        bev_iou: iou_bev(&result.best_box, &inst.gt),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

pub fn bench_instances(cfg: &PipelineConfig) -> Result<Vec<SynthInstance>> {
    let spec = SynthSpec { seed: cfg.seed, range: cfg.bench.range, ..Default::default() };
    synth_instances(&spec, &cfg.bench.class, cfg.bench.instances)
}

/// Every instance × method × budget, ordered by instance, then budget,
/// greedy before adaptive.
pub fn run_bench(cfg: &PipelineConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let instances = bench_instances(cfg)?;
    let jobs: Vec<(&SynthInstance, usize, Method)> = instances
        .iter()
        .flat_map(|i| cfg.bench.budgets.iter().flat_map(move |&b| [(i, b, Method::Greedy), (i, b, Method::Adaptive)]))
        .collect();
    jobs.par_iter().map(|&(i, b, m)| bench_one(i, cfg, m, b)).collect()
}

pub fn write_bench_csv(path: impl AsRef<Path>, rows: &[BenchRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| PipelineError::parse(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| PipelineError::parse(path, e))?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}

/// Median final cost and BEV IoU for one method and budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub method: Method,
    pub budget: usize,
    pub instances: usize,
    pub median_cost: f64,
    pub median_iou: f64,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

pub fn summarize(rows: &[BenchRow]) -> Vec<BenchSummary> {
    let mut keys: Vec<(Method, usize)> = rows.iter().map(|r| (r.method, r.budget)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(method, budget)| {
            let sel: Vec<&BenchRow> = rows.iter().filter(|r| r.method == method && r.budget == budget).collect();
            let mut cost: Vec<f64> = sel.iter().map(|r| r.final_cost).collect();
            let mut iou: Vec<f64> = sel.iter().map(|r| r.bev_iou).collect();
            BenchSummary {
                method,
                budget,
                instances: sel.len(),
                median_cost: median(&mut cost).unwrap_or(f64::NAN),
                median_iou: median(&mut iou).unwrap_or(f64::NAN),
            }
        })
        .collect()
}
