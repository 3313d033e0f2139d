//! Constrained box search: a global-best particle swarm with cosine-annealed
//! inertia, and an exhaustive grid baseline at a fixed evaluation budget.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costfn::{
    clamp_to_constraints, wrap_yaw, AnchorRange, BoxObjective, CostBreakdown, CostError, CostWeights, Objective,
};
use crate::geom::{Box2D, BoxParams, CameraCalib, EgoPose, Point3, Ray};
use crate::scalar::Scalar;

const DIM: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("object cluster is empty")]
    EmptyCluster,
    #[error("invalid swarm configuration: {0}")]
    InvalidConfig(String),
    #[error("iteration {iter} outside schedule of length {n_iter}")]
    IterOutOfRange { iter: usize, n_iter: usize },
    #[error("evaluation budget must be at least 1")]
    ZeroBudget,
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmConfig {
    pub n_swarm: usize,
    /// Iterations per particle; the initial population counts as iteration 0.
    pub n_iter: usize,
    pub w_init: f64,
    pub w_end: f64,
    pub c1: f64,
    pub c2: f64,
    pub c_noise: f64,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self { n_swarm: 50, n_iter: 3000, w_init: 10.0, w_end: 0.1, c1: 1.0, c2: 1.0, c_noise: 0.1, seed: 0 }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<(), OptimError> {
        let bad = |m: String| Err(OptimError::InvalidConfig(m));
        if self.n_swarm < 2 {
            return bad(format!("n_swarm must be >= 2, got {}", self.n_swarm));
        }
        if self.n_iter < 1 {
            return bad("n_iter must be >= 1".into());
        }
        if !(self.w_end > 0.0 && self.w_init >= self.w_end && self.w_init.is_finite()) {
            return bad(format!("need w_init >= w_end > 0, got ({}, {})", self.w_init, self.w_end));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0 && self.c1.is_finite() && self.c2.is_finite()) {
            return bad(format!("c1, c2 must be >= 0, got ({}, {})", self.c1, self.c2));
        }
        if !(self.c_noise >= 0.0 && self.c_noise.is_finite()) {
            return bad(format!("c_noise must be >= 0, got {}", self.c_noise));
        }
        Ok(())
    }

    /// Cost evaluations performed by one search.
    pub fn evaluations(&self) -> usize {
        self.n_swarm * self.n_iter
    }

    /// Same swarm with `n_iter` chosen so that the search spends `budget`
    /// evaluations (rounded down, at least one iteration).
    pub fn with_budget(&self, budget: usize) -> Self {
        Self { n_iter: (budget / self.n_swarm).max(1), ..self.clone() }
    }
}

/// Cosine-annealed inertia: `w_end + (w_init - w_end)(1 + cos(π t / (n_iter - 1))) / 2`.
pub fn inertia_at(iter: usize, cfg: &SwarmConfig) -> Result<f64, OptimError> {
    if iter >= cfg.n_iter {
        return Err(OptimError::IterOutOfRange { iter, n_iter: cfg.n_iter });
    }
    if cfg.n_iter == 1 {
        return Ok(cfg.w_init);
    }
    let phase = std::f64::consts::PI * iter as f64 / (cfg.n_iter - 1) as f64;
    Ok(cfg.w_end + 0.5 * (cfg.w_init - cfg.w_end) * (1.0 + phase.cos()))
}

/// Everything one box search needs, borrowed from the scene.
#[derive(Debug, Clone, Copy)]
pub struct SearchProblem<'a, T> {
    pub points: &'a [Point3<T>],
    pub ego: EgoPose<T>,
    pub proposal: Box2D<T>,
    pub calib: &'a CameraCalib<T>,
    pub center_ray: Ray<T>,
}

/// Feasible region: a position box plus the anchor's dimension bounds and
/// yaw in `[0, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace<T> {
    pub pos_min: [T; 3],
    pub pos_max: [T; 3],
    pub anchor: AnchorRange<T>,
}

impl<T: Scalar> SearchSpace<T> {
    /// Axis-aligned bounds of `points`, dilated on every side by half the
    /// anchor's largest space diagonal.
    pub fn around_cluster(points: &[Point3<T>], anchor: &AnchorRange<T>) -> Result<Self, OptimError> {
        if points.is_empty() {
            return Err(OptimError::EmptyCluster);
        }
        let mut lo = [T::infinity(); 3];
        let mut hi = [T::neg_infinity(); 3];
        for p in points {
            for (k, v) in [p.x, p.y, p.z].into_iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        let pad = anchor.max_diagonal() * T::lit(0.5);
        Ok(Self { pos_min: lo.map(|v| v - pad), pos_max: hi.map(|v| v + pad), anchor: anchor.clone() })
    }

    pub fn lower(&self) -> [T; DIM] {
        let [x, y, z] = self.pos_min;
        let [l, w, h] = self.anchor.dims_min;
        [x, y, z, l, w, h, T::zero()]
    }

    pub fn upper(&self) -> [T; DIM] {
        let [x, y, z] = self.pos_max;
        let [l, w, h] = self.anchor.dims_max;
        [x, y, z, l, w, h, T::PI()]
    }

    /// Projects a raw parameter vector onto the feasible region.
    pub fn project(&self, raw: &BoxParams<T>) -> BoxParams<T> {
        let mut b = clamp_to_constraints(raw, &self.anchor);
        b.x = b.x.max(self.pos_min[0]).min(self.pos_max[0]);
        b.y = b.y.max(self.pos_min[1]).min(self.pos_max[1]);
        b.z = b.z.max(self.pos_min[2]).min(self.pos_max[2]);
        b
    }

    pub fn contains(&self, b: &BoxParams<T>) -> bool {
        let (lo, hi) = (self.lower(), self.upper());
        let v = b.to_array();
        (0..6).all(|k| v[k] >= lo[k] && v[k] <= hi[k]) && v[6] >= T::zero() && v[6] < T::PI()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle<T> {
    pub position: BoxParams<T>,
    pub velocity: [T; DIM],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult<T> {
    pub best_box: BoxParams<T>,
    pub best_cost: CostBreakdown<T>,
    pub evaluations: usize,
    /// Best-so-far total after each iteration (swarm search only).
    pub trace: Option<Vec<T>>,
}

/// Index of the point nearest to `ray` (first on ties).
pub fn closest_point_to_ray<T: Scalar>(points: &[Point3<T>], ray: &Ray<T>) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, p) in points.iter().enumerate() {
        let d = point_to_ray_distance(p, ray);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Perpendicular distance to the ray; points behind the origin measure to
/// the origin.
pub fn point_to_ray_distance<T: Scalar>(p: &Point3<T>, ray: &Ray<T>) -> T {
    let rel = *p - ray.origin;
    let t = rel.dot(&ray.direction);
    if t <= T::zero() {
        return rel.norm();
    }
    (rel - ray.direction.scale(t)).norm()
}

pub fn centroid<T: Scalar>(points: &[Point3<T>]) -> Option<Point3<T>> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Point3::origin(), |acc, p| acc + *p);
    Some(sum.scale(T::one() / T::from_count(points.len())))
}

/// Initial swarm. The first `ceil(n/2)` particles start at the cluster point
/// closest to the frustum center ray, the rest at the cluster centroid; both
/// get Gaussian position noise with per-axis standard deviation
/// `c_noise · (A_min + A_max) / 2`. Dimensions and yaw are uniform over the
/// constraint bounds.
pub fn init_particles<T: Scalar>(
    cluster: &[Point3<T>],
    ray: &Ray<T>,
    anchor: &AnchorRange<T>,
    cfg: &SwarmConfig,
) -> Result<Vec<Particle<T>>, OptimError> {
    cfg.validate()?;
    anchor.validate()?;
    let nearest = closest_point_to_ray(cluster, ray).ok_or(OptimError::EmptyCluster)?;
    let sites = [cluster[nearest], centroid(cluster).ok_or(OptimError::EmptyCluster)?];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mean = anchor.mean_dims();
    let noise: Vec<Normal<f64>> =
        mean.iter().map(|m| Normal::new(0.0, cfg.c_noise * m.to_f64_lossy()).expect("non-negative std")).collect();
    let first_half = cfg.n_swarm.div_ceil(2);

    let particles = (0..cfg.n_swarm)
        .map(|i| {
            let site = if i < first_half { sites[0] } else { sites[1] };
            let mut jitter = [0.0f64; 3];
            for (j, dist) in jitter.iter_mut().zip(&noise) {
                *j = dist.sample(&mut rng);
            }
            let mut uniform = |lo: T, hi: T| lo + (hi - lo) * T::lit(rng.random::<f64>());
            let l = uniform(anchor.dims_min[0], anchor.dims_max[0]);
            let w = uniform(anchor.dims_min[1], anchor.dims_max[1]);
            let h = uniform(anchor.dims_min[2], anchor.dims_max[2]);
            let ry = wrap_yaw(uniform(T::zero(), T::PI()));
            Particle {
                position: BoxParams::new(
                    site.x + T::lit(jitter[0]),
                    site.y + T::lit(jitter[1]),
                    site.z + T::lit(jitter[2]),
                    l,
                    w,
                    h,
                    ry,
                ),
                velocity: [T::zero(); DIM],
            }
        })
        .collect();
    Ok(particles)
}

/// Global-best particle swarm over `space`, starting from `particles`.
///
/// Each iteration updates every particle with the inertia from
/// [`inertia_at`], clamps the step to half the per-dimension range, projects
/// onto the feasible region (reversing and damping velocity along clipped
/// axes), and only then evaluates. The global best is
/// refreshed once per sweep.
pub fn pso_minimize<T: Scalar, O: Objective<T>>(
    objective: &O,
    space: &SearchSpace<T>,
    mut particles: Vec<Particle<T>>,
    cfg: &SwarmConfig,
) -> Result<SearchResult<T>, OptimError> {
    cfg.validate()?;
    if particles.is_empty() {
        return Err(OptimError::InvalidConfig("empty swarm".into()));
    }
    let (lo, hi) = (space.lower(), space.upper());
    let vmax: [T; DIM] = std::array::from_fn(|k| (hi[k] - lo[k]) * T::lit(0.5));
    let (c1, c2) = (T::lit(cfg.c1), T::lit(cfg.c2));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut evaluations = 0usize;
    let mut pbest: Vec<(BoxParams<T>, CostBreakdown<T>)> = Vec::with_capacity(particles.len());
    for p in particles.iter_mut() {
        p.position = space.project(&p.position);
        let cost = objective.evaluate(&p.position);
        evaluations += 1;
        pbest.push((p.position, cost));
    }
    let mut gbest = best_of(&pbest);
    let mut trace = Vec::with_capacity(cfg.n_iter);
    trace.push(gbest.1.total);

    for t in 1..cfg.n_iter {
        let w = T::lit(inertia_at(t, cfg)?);
        let g = gbest.0.to_array();
        for (p, best) in particles.iter_mut().zip(pbest.iter_mut()) {
            let x = p.position.to_array();
            let pb = best.0.to_array();
            let mut next = [T::zero(); DIM];
            for k in 0..DIM {
                let r1 = T::lit(rng.random::<f64>());
                let r2 = T::lit(rng.random::<f64>());
                let v = w * p.velocity[k] + c1 * r1 * (pb[k] - x[k]) + c2 * r2 * (g[k] - x[k]);
                let v = v.max(-vmax[k]).min(vmax[k]);
                p.velocity[k] = v;
                next[k] = x[k] + v;
            }
            p.position = space.project(&BoxParams::from_array(next));
            // A component stopped by a bound bounces back with a random
            // fraction of its speed. Keeping the velocity pins particles to
            // the faces under large inertia; zeroing it lets the swarm
            // collapse onto them.
            let landed = p.position.to_array();
            for k in 0..DIM - 1 {
                if landed[k] != next[k] {
                    p.velocity[k] = -p.velocity[k] * T::lit(rng.random::<f64>());
                }
            }
            let cost = objective.evaluate(&p.position);
            evaluations += 1;
            if cost.total < best.1.total {
                *best = (p.position, cost);
            }
        }
        let sweep_best = best_of(&pbest);
        if sweep_best.1.total < gbest.1.total {
            gbest = sweep_best;
        }
        trace.push(gbest.1.total);
    }

    Ok(SearchResult { best_box: gbest.0, best_cost: gbest.1, evaluations, trace: Some(trace) })
}

fn best_of<T: Scalar>(pool: &[(BoxParams<T>, CostBreakdown<T>)]) -> (BoxParams<T>, CostBreakdown<T>) {
    let mut best = pool[0];
    for cand in &pool[1..] {
        if cand.1.total < best.1.total {
            best = *cand;
        }
    }
    best
}

/// Particle-swarm box search for one cross-modal proposal.
pub fn pso_search<T: Scalar>(
    problem: &SearchProblem<'_, T>,
    anchor: &AnchorRange<T>,
    weights: &CostWeights<T>,
    cfg: &SwarmConfig,
) -> Result<SearchResult<T>, OptimError> {
    weights.validate()?;
    let objective = BoxObjective::new(problem.points, problem.ego, problem.proposal, problem.calib, *weights)?;
    let space = SearchSpace::around_cluster(problem.points, anchor)?;
    let particles = init_particles(problem.points, &problem.center_ray, anchor, cfg)?;
    pso_minimize(&objective, &space, particles, cfg)
}

/// Grid resolution per parameter `(x, y, z, l, w, h, ry)` whose product does
/// not exceed `budget`. Resolution grows round-robin; dimension axes stop at
/// five levels (the anchor-range quartiles).
pub fn grid_shape(budget: usize) -> [usize; DIM] {
    const ORDER: [usize; DIM] = [0, 1, 6, 3, 4, 2, 5];
    const CAP: [usize; DIM] = [usize::MAX, usize::MAX, usize::MAX, 5, 5, 5, usize::MAX];
    let mut counts = [1usize; DIM];
    let mut total = 1usize;
    loop {
        let mut grew = false;
        for &k in &ORDER {
            if counts[k] >= CAP[k] {
                continue;
            }
            let next = total / counts[k] * (counts[k] + 1);
            if next <= budget {
                total = next;
                counts[k] += 1;
                grew = true;
            }
        }
        if !grew {
            return counts;
        }
    }
}

fn grid_levels<T: Scalar>(k: usize, n: usize, lo: T, hi: T) -> Vec<T> {
    let is_dim = (3..6).contains(&k);
    (0..n)
        .map(|i| {
            if is_dim {
                // Inclusive spacing: five levels are exactly the quartiles.
                if n == 1 {
                    (lo + hi) * T::lit(0.5)
                } else {
                    lo + (hi - lo) * T::from_count(i) / T::from_count(n - 1)
                }
            } else {
                // Cell centers; yaw stays inside [0, π).
                lo + (hi - lo) * (T::from_count(i) + T::lit(0.5)) / T::from_count(n)
            }
        })
        .collect()
}

/// Exhaustive evaluation of the grid from [`grid_shape`]; ties keep the first
/// candidate in lexicographic grid order.
pub fn greedy_minimize<T: Scalar, O: Objective<T>>(
    objective: &O,
    space: &SearchSpace<T>,
    budget: usize,
) -> Result<SearchResult<T>, OptimError> {
    if budget == 0 {
        return Err(OptimError::ZeroBudget);
    }
    let shape = grid_shape(budget);
    let (lo, hi) = (space.lower(), space.upper());
    let levels: Vec<Vec<T>> = (0..DIM).map(|k| grid_levels(k, shape[k], lo[k], hi[k])).collect();
    let total: usize = shape.iter().product();

    let mut best: Option<(BoxParams<T>, CostBreakdown<T>)> = None;
    let mut idx = [0usize; DIM];
    for _ in 0..total {
        let cand = BoxParams::from_array(std::array::from_fn(|k| levels[k][idx[k]]));
        let cost = objective.evaluate(&cand);
        if best.is_none_or(|(_, c)| cost.total < c.total) {
            best = Some((cand, cost));
        }
        for k in (0..DIM).rev() {
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    let (best_box, best_cost) = best.expect("grid has at least one cell");
    Ok(SearchResult { best_box, best_cost, evaluations: total, trace: None })
}

/// Grid-search baseline over the same feasible region as [`pso_search`].
pub fn greedy_search<T: Scalar>(
    problem: &SearchProblem<'_, T>,
    anchor: &AnchorRange<T>,
    weights: &CostWeights<T>,
    budget: usize,
) -> Result<SearchResult<T>, OptimError> {
    weights.validate()?;
    anchor.validate()?;
    let objective = BoxObjective::new(problem.points, problem.ego, problem.proposal, problem.calib, *weights)?;
    let space = SearchSpace::around_cluster(problem.points, anchor)?;
    greedy_minimize(&objective, &space, budget)
}
