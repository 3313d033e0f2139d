//! Synthetic scenes with exact ground truth.
//!
//! Objects are boxes standing on a flat ground plane. Only the surfaces a
//! LiDAR at the ego origin would see are sampled: side faces whose outward
//! normal points toward the ego, plus (optionally) the roof. Samples are
//! Poisson-disk distributed with a spacing that grows with range. Each object
//! gets one 2D proposal: the clipped projection of its box in the camera that
//! sees it best.

use std::path::{Path, PathBuf};

use amodal_core::assoc::{center_ray, frustum_from_box};
use amodal_core::geom::{
    box_corners, project_box_to_2d, project_point, Box2D, BoxParams, CameraCalib, Point3, PointCloud, Ray,
};
use amodal_core::optimizer::SearchProblem;
use amodal_core::sceneprep::{write_cloud, CloudFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{default_anchors, derive_seed, AnchorConfig};
use crate::error::{PipelineError, Result};
use crate::frame::{write_json, FrameManifest, ProposalRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub frames: usize,
    /// Randomly placed objects per frame.
    pub objects_per_frame: usize,
    pub classes: Vec<ClassWeight>,
    /// Ego distance of object centers, meters.
    pub range: [f64; 2],
    /// Sample spacing is `spacing_at_10m · r / 10`, clamped to `spacing_limits`.
    pub spacing_at_10m: f64,
    pub spacing_limits: [f64; 2],
    pub noise_std: f64,
    pub sample_top: bool,
    /// Side faces are sampled from this height above the ground upward.
    pub ground_clearance: f64,
    pub ground_z: f64,
    /// Jittered-grid ground spacing; 0 disables ground points.
    pub ground_spacing: f64,
    /// Instance-pixel ratio range for unoccluded objects.
    pub mask_ratio: [f64; 2],
    /// Probability that an object is heavily occluded.
    pub occluded_fraction: f64,
    pub occluded_ratio: [f64; 2],
    /// Crop size relative to the proposal box; below 1 simulates low resolution.
    pub crop_scale: f64,
    pub embedding_dim: usize,
    pub missing_embedding_fraction: f64,
    pub anchors: Vec<AnchorConfig>,
    pub rig: RigSpec,
    /// Objects placed exactly; added to the frame they name.
    pub instances: Vec<InstanceSpec>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            frames: 1,
            objects_per_frame: 4,
            classes: vec![ClassWeight { class: "car".into(), weight: 1.0 }],
            range: [5.0, 40.0],
            spacing_at_10m: 0.15,
            spacing_limits: [0.15, 0.25],
            noise_std: 0.02,
            sample_top: true,
            ground_clearance: 0.3,
            ground_z: -1.8,
            ground_spacing: 0.6,
            mask_ratio: [0.6, 0.95],
            occluded_fraction: 0.0,
            occluded_ratio: [0.05, 0.3],
            crop_scale: 1.0,
            embedding_dim: 8,
            missing_embedding_fraction: 0.0,
            anchors: default_anchors(),
            rig: RigSpec::default(),
            instances: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassWeight {
    pub class: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    #[serde(default)]
    pub frame: usize,
    pub class: String,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub ry: f64,
    /// `[l, w, h]`; the anchor mean when absent.
    #[serde(default)]
    pub dims: Option<[f64; 3]>,
}

/// Ring of identical pinhole cameras around the ego, looking outward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigSpec {
    pub count: usize,
    pub width: f64,
    pub height: f64,
    pub focal: f64,
    /// Camera height relative to the ego origin, meters.
    pub mount_z: f64,
    /// Horizontal offset of each camera from the ego origin along its axis.
    pub mount_radius: f64,
}

impl Default for RigSpec {
    fn default() -> Self {
        Self { count: 6, width: 1600.0, height: 900.0, focal: 1266.0, mount_z: -0.2, mount_radius: 0.5 }
    }
}

impl SynthSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let spec: Self = toml::from_str(&text).map_err(|e| PipelineError::parse(path, e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Synth(m));
        if !(self.range[0] > 0.0 && self.range[0] < self.range[1]) {
            return bad(format!("range {:?} is empty", self.range));
        }
        let [s0, s1] = self.spacing_limits;
        if !(s0 > 0.0 && s0 <= s1 && self.spacing_at_10m > 0.0) {
            return bad("spacing must be positive with limits ordered".into());
        }
        for (name, [a, b]) in [("mask_ratio", self.mask_ratio), ("occluded_ratio", self.occluded_ratio)] {
            if !(0.0 < a && a <= b && b <= 1.0) {
                return bad(format!("{name} {:?} must be ordered within (0, 1]", [a, b]));
            }
        }
        if !(0.0..=1.0).contains(&self.occluded_fraction) || !(0.0..=1.0).contains(&self.missing_embedding_fraction) {
            return bad("fractions must lie in [0, 1]".into());
        }
        let scale_ok = self.crop_scale > 0.0;
        if !scale_ok || self.noise_std < 0.0 || self.ground_spacing < 0.0 {
            return bad("crop_scale must be > 0, noise_std and ground_spacing >= 0".into());
        }
        if self.rig.count == 0 || !(self.rig.focal > 0.0 && self.rig.width > 0.0 && self.rig.height > 0.0) {
            return bad("rig needs at least one camera with positive focal length and extent".into());
        }
        if self.objects_per_frame > 0 && self.classes.iter().all(|c| c.weight <= 0.0) {
            return bad("class mix has no positive weight".into());
        }
        for c in self.classes.iter().map(|c| &c.class).chain(self.instances.iter().map(|i| &i.class)) {
            if self.anchor(c).is_none() {
                return bad(format!("class '{c}' has no anchor"));
            }
        }
        for (i, inst) in self.instances.iter().enumerate() {
            if inst.frame >= self.frames {
                return bad(format!("instance {i} names frame {} of {}", inst.frame, self.frames));
            }
        }
        Ok(())
    }

    fn anchor(&self, class: &str) -> Option<&AnchorConfig> {
        self.anchors.iter().find(|a| a.class == class)
    }

    fn spacing(&self, range: f64) -> f64 {
        (self.spacing_at_10m * range / 10.0).clamp(self.spacing_limits[0], self.spacing_limits[1])
    }
}

/// Cameras evenly spaced in yaw, the first looking along +x.
pub fn camera_ring(rig: &RigSpec) -> Vec<CameraCalib<f64>> {
    (0..rig.count)
        .map(|k| {
            let psi = std::f64::consts::TAU * k as f64 / rig.count as f64;
            let (s, c) = psi.sin_cos();
            // Rows: camera x (right), y (down), z (forward) in ego coordinates.
            let r = [[s, -c, 0.0], [0.0, 0.0, -1.0], [c, s, 0.0]];
            let center = [rig.mount_radius * c, rig.mount_radius * s, rig.mount_z];
            let mut e = [[0.0; 4]; 4];
            for i in 0..3 {
                e[i][..3].copy_from_slice(&r[i]);
                e[i][3] = -(r[i][0] * center[0] + r[i][1] * center[1] + r[i][2] * center[2]);
            }
            e[3][3] = 1.0;
            CameraCalib {
                camera_id: format!("cam{k}"),
                extrinsic: e,
                intrinsic: [[rig.focal, 0.0, rig.width / 2.0], [0.0, rig.focal, rig.height / 2.0], [0.0, 0.0, 1.0]],
                image_width: rig.width,
                image_height: rig.height,
            }
        })
        .collect()
}

/// A planar rectangle `origin + s·u + t·v`, `s, t ∈ [0, 1]`.
#[derive(Debug, Clone, Copy)]
struct Face {
    origin: Point3<f64>,
    u: Point3<f64>,
    v: Point3<f64>,
}

/// Side faces facing `ego` and optionally the roof. Side faces start
/// `clearance` above the box bottom.
fn visible_faces(b: &BoxParams<f64>, ego: &Point3<f64>, top: bool, clearance: f64) -> Vec<Face> {
    let c = box_corners(b);
    let lift = Point3::new(0.0, 0.0, clearance.min(b.h));
    let mut faces = Vec::new();
    for i in 0..4 {
        let (a, bb) = (c[i], c[(i + 1) % 4]);
        let mid = (a + bb).scale(0.5);
        // Bottom corners run counter-clockwise, so the outward normal is the
        // edge direction turned clockwise.
        let e = bb - a;
        let normal = Point3::new(e.y, -e.x, 0.0);
        let to_ego = Point3::new(ego.x - mid.x, ego.y - mid.y, 0.0);
        if normal.dot(&to_ego) > 0.0 {
            faces.push(Face { origin: a + lift, u: e, v: Point3::new(0.0, 0.0, b.h - lift.z) });
        }
    }
    if top {
        faces.push(Face { origin: c[4], u: c[5] - c[4], v: c[7] - c[4] });
    }
    faces
}

/// Dart-throwing Poisson-disk samples on a `w × h` rectangle.
fn poisson_disk(w: f64, h: f64, r: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    if w <= 0.0 || h <= 0.0 {
        return Vec::new();
    }
    let cell = r / std::f64::consts::SQRT_2;
    let (nx, ny) = ((w / cell).ceil() as usize + 1, (h / cell).ceil() as usize + 1);
    let mut grid: Vec<Option<usize>> = vec![None; nx * ny];
    let mut out: Vec<[f64; 2]> = Vec::new();
    let attempts = (30.0 * w * h / (r * r)).ceil() as usize + 10;
    for _ in 0..attempts {
        let p = [rng.random::<f64>() * w, rng.random::<f64>() * h];
        let (gx, gy) = ((p[0] / cell) as usize, (p[1] / cell) as usize);
        let mut ok = true;
        'scan: for yy in gy.saturating_sub(2)..(gy + 3).min(ny) {
            for xx in gx.saturating_sub(2)..(gx + 3).min(nx) {
                if let Some(j) = grid[yy * nx + xx] {
                    let q = out[j];
                    if (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) < r * r {
                        ok = false;
                        break 'scan;
                    }
                }
            }
        }
        if ok {
            grid[gy * nx + gx] = Some(out.len());
            out.push(p);
        }
    }
    out
}

/// Enclosing margin: a box annotation encloses every return of its object,
/// so noisy samples are pulled back this far inside the faces.
const INSIDE_MARGIN: f64 = 0.01;

fn keep_inside(b: &BoxParams<f64>, p: &Point3<f64>) -> Point3<f64> {
    let l = b.to_local(p);
    let lim = |v: f64, half: f64| {
        let m = INSIDE_MARGIN.min(half / 2.0);
        v.clamp(-half + m, half - m)
    };
    b.to_world(&Point3::new(lim(l.x, b.l / 2.0), lim(l.y, b.w / 2.0), lim(l.z, b.h / 2.0)))
}

/// Surface samples of `b` as seen from `ego`, kept within the box.
pub fn sample_visible_surface(
    b: &BoxParams<f64>,
    ego: &Point3<f64>,
    spacing: f64,
    top: bool,
    clearance: f64,
    noise_std: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Point3<f64>> {
    let noise = Normal::new(0.0, noise_std).expect("non-negative std");
    let mut pts = Vec::new();
    for f in visible_faces(b, ego, top, clearance) {
        let (lu, lv) = (f.u.norm(), f.v.norm());
        for [s, t] in poisson_disk(lu, lv, spacing, rng) {
            let p = f.origin + f.u.scale(s / lu) + f.v.scale(t / lv);
            let j = Point3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng));
            pts.push(keep_inside(b, &(p + j)));
        }
    }
    pts
}

/// Camera whose clipped projection of `b` is largest, among cameras that see
/// the box center.
pub fn best_camera(b: &BoxParams<f64>, cameras: &[CameraCalib<f64>]) -> Option<(usize, Box2D<f64>)> {
    let mut best: Option<(usize, Box2D<f64>)> = None;
    for (i, cam) in cameras.iter().enumerate() {
        let Some(ip) = project_point(&b.center(), cam) else { continue };
        if !cam.image_box().contains(ip.u, ip.v) {
            continue;
        }
        let Some(hull) = project_box_to_2d(b, cam) else { continue };
        if best.is_none_or(|(_, h)| hull.area() > h.area()) {
            best = Some((i, hull));
        }
    }
    best
}

/// One object with everything a single box search needs.
#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub id: usize,
    pub class: String,
    pub gt: BoxParams<f64>,
    pub points: Vec<Point3<f64>>,
    pub ego: Point3<f64>,
    pub calib: CameraCalib<f64>,
    pub proposal: Box2D<f64>,
    pub center_ray: Ray<f64>,
}

impl SynthInstance {
    pub fn problem(&self) -> SearchProblem<'_, f64> {
        SearchProblem {
            points: &self.points,
            ego: self.ego,
            proposal: self.proposal,
            calib: &self.calib,
            center_ray: self.center_ray,
        }
    }
}

fn sample_box(anchor: &AnchorConfig, range: [f64; 2], ground_z: f64, rng: &mut ChaCha8Rng) -> BoxParams<f64> {
    let r = rng.random_range(range[0]..range[1]);
    let az = rng.random_range(0.0..std::f64::consts::TAU);
    let dims: [f64; 3] = std::array::from_fn(|k| rng.random_range(anchor.min[k]..=anchor.max[k]));
    let ry = rng.random_range(0.0..std::f64::consts::PI);
    BoxParams::new(r * az.cos(), r * az.sin(), ground_z + dims[2] / 2.0, dims[0], dims[1], dims[2], ry)
}

fn ray_for(proposal: &Box2D<f64>, calib: &CameraCalib<f64>) -> Option<Ray<f64>> {
    frustum_from_box(proposal, calib, 0.5, 60.0).ok().map(|f| center_ray(&f))
}

/// `n` independent single-object instances of `class`, each with its own
/// draw from the seed. Draws whose box no camera sees are replaced.
pub fn synth_instances(spec: &SynthSpec, class: &str, n: usize) -> Result<Vec<SynthInstance>> {
    spec.validate()?;
    let anchor = spec.anchor(class).ok_or_else(|| PipelineError::Synth(format!("class '{class}' has no anchor")))?;
    let cameras = camera_ring(&spec.rig);
    let ego = Point3::origin();
    let mut out = Vec::with_capacity(n);
    for id in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "instance", id, 0));
        for _attempt in 0..100 {
            let gt = sample_box(anchor, spec.range, spec.ground_z, &mut rng);
            let Some((ci, proposal)) = best_camera(&gt, &cameras) else { continue };
            let Some(center_ray) = ray_for(&proposal, &cameras[ci]) else { continue };
            let spacing = spec.spacing(gt.center().norm());
            let points = sample_visible_surface(
                &gt,
                &ego,
                spacing,
                spec.sample_top,
                spec.ground_clearance,
                spec.noise_std,
                &mut rng,
            );
            if points.len() < 10 {
                continue;
            }
            out.push(SynthInstance {
                id,
                class: class.to_string(),
                gt,
                points,
                ego,
                calib: cameras[ci].clone(),
                proposal,
                center_ray,
            });
            break;
        }
        if out.len() != id + 1 {
            return Err(PipelineError::Synth(format!("instance {id}: no visible placement found")));
        }
    }
    Ok(out)
}

/// Ground-truth record for one generated object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtObject {
    pub instance: usize,
    pub class: String,
    #[serde(rename = "box")]
    pub bbox: BoxParams<f64>,
    pub camera_id: String,
    pub proposal_index: usize,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub frame_id: String,
    pub objects: Vec<GtObject>,
    /// Per point: `-1` ground, otherwise the object's `instance`.
    pub point_labels: Vec<i64>,
}

/// One generated frame, before it is written.
#[derive(Debug, Clone)]
pub struct SynthFrame {
    pub frame_id: String,
    pub cloud: PointCloud<f64>,
    pub cameras: Vec<CameraCalib<f64>>,
    pub proposals: Vec<ProposalRecord>,
    pub truth: FrameTruth,
}

fn pick_class<'a>(classes: &'a [ClassWeight], rng: &mut ChaCha8Rng) -> &'a str {
    let total: f64 = classes.iter().map(|c| c.weight.max(0.0)).sum();
    let mut u = rng.random::<f64>() * total;
    for c in classes {
        u -= c.weight.max(0.0);
        if u < 0.0 {
            return &c.class;
        }
    }
    &classes.iter().rev().find(|c| c.weight > 0.0).expect("validated").class
}

fn clear_of(b: &BoxParams<f64>, placed: &[BoxParams<f64>]) -> bool {
    let diag = |b: &BoxParams<f64>| 0.5 * b.l.hypot(b.w);
    placed.iter().all(|o| (b.x - o.x).hypot(b.y - o.y) > diag(b) + diag(o) + 1.0)
}

fn ground_points(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<Point3<f64>> {
    let s = spec.ground_spacing;
    if s <= 0.0 {
        return Vec::new();
    }
    let extent = spec.range[1] + 5.0;
    let n = (extent / s).ceil() as i64;
    let noise = Normal::new(0.0, spec.noise_std).expect("non-negative std");
    let mut out = Vec::new();
    for iy in -n..=n {
        for ix in -n..=n {
            let x = (ix as f64 + rng.random::<f64>() - 0.5) * s;
            let y = (iy as f64 + rng.random::<f64>() - 0.5) * s;
            let r = x.hypot(y);
            if r < 2.5 || r > extent {
                continue;
            }
            out.push(Point3::new(x, y, spec.ground_z + noise.sample(rng)));
        }
    }
    out
}

/// Generates frame `index` of `spec`.
pub fn synth_frame(spec: &SynthSpec, index: usize) -> Result<SynthFrame> {
    let frame_id = format!("frame_{index:04}");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "frame", index, 0));
    let cameras = camera_ring(&spec.rig);
    let ego = Point3::origin();

    // Explicit instances first, in spec order, then random fill.
    let mut boxes: Vec<(String, BoxParams<f64>, usize, Box2D<f64>)> = Vec::new();
    for (i, inst) in spec.instances.iter().enumerate().filter(|(_, s)| s.frame == index) {
        let a = spec.anchor(&inst.class).expect("validated");
        let dims = inst.dims.unwrap_or(std::array::from_fn(|k| 0.5 * (a.min[k] + a.max[k])));
        let b = BoxParams::new(inst.x, inst.y, spec.ground_z + dims[2] / 2.0, dims[0], dims[1], dims[2], inst.ry);
        let (ci, hull) = best_camera(&b, &cameras).ok_or_else(|| {
            PipelineError::Synth(format!("instance {i} ({}) is outside every camera view", inst.class))
        })?;
        boxes.push((inst.class.clone(), b, ci, hull));
    }
    let mut tries = 0;
    let mut placed = 0;
    while placed < spec.objects_per_frame {
        tries += 1;
        if tries > 1000 * (spec.objects_per_frame + 1) {
            return Err(PipelineError::Synth(format!(
                "{frame_id}: cannot place {} non-overlapping objects",
                spec.objects_per_frame
            )));
        }
        let class = pick_class(&spec.classes, &mut rng).to_string();
        let b = sample_box(spec.anchor(&class).expect("validated"), spec.range, spec.ground_z, &mut rng);
        let taken: Vec<BoxParams<f64>> = boxes.iter().map(|x| x.1).collect();
        if !clear_of(&b, &taken) {
            continue;
        }
        let Some((ci, hull)) = best_camera(&b, &cameras) else { continue };
        boxes.push((class, b, ci, hull));
        placed += 1;
    }

    let mut points = ground_points(spec, &mut rng);
    let mut labels = vec![-1i64; points.len()];
    let mut proposals = Vec::new();
    let mut objects = Vec::new();
    for (k, (class, b, ci, hull)) in boxes.into_iter().enumerate() {
        let spacing = spec.spacing(b.center().norm());
        let pts =
            sample_visible_surface(&b, &ego, spacing, spec.sample_top, spec.ground_clearance, spec.noise_std, &mut rng);
        labels.extend(std::iter::repeat_n(k as i64, pts.len()));
        let n_points = pts.len();
        points.extend(pts);

        let crop_w = ((hull.width() * spec.crop_scale).round() as u32).max(1);
        let crop_h = ((hull.height() * spec.crop_scale).round() as u32).max(1);
        let occluded = rng.random::<f64>() < spec.occluded_fraction;
        let [lo, hi] = if occluded { spec.occluded_ratio } else { spec.mask_ratio };
        let ratio = rng.random_range(lo..=hi);
        let mask_pixel_count = (ratio * crop_w as f64 * crop_h as f64).round() as u64;
        let has_embedding = rng.random::<f64>() >= spec.missing_embedding_fraction;
        let embedding = has_embedding.then(|| {
            let n = Normal::new(0.0, 1.0).expect("unit normal");
            (0..spec.embedding_dim).map(|_| n.sample(&mut rng)).collect()
        });
        objects.push(GtObject {
            instance: k,
            class: class.clone(),
            bbox: b,
            camera_id: cameras[ci].camera_id.clone(),
            proposal_index: proposals.len(),
            n_points,
        });
        proposals.push(ProposalRecord {
            camera_id: cameras[ci].camera_id.clone(),
            bbox: [hull.u_min, hull.v_min, hull.u_max, hull.v_max],
            class,
            score: 1.0,
            mask_pixel_count,
            crop_w,
            crop_h,
            embedding,
        });
    }
    Ok(SynthFrame {
        frame_id: frame_id.clone(),
        cloud: PointCloud::new(points),
        cameras,
        proposals,
        truth: FrameTruth { frame_id, objects, point_labels: labels },
    })
}

/// Writes every frame of `spec` into `out`; returns the manifest paths.
pub fn synth_scenes(spec: &SynthSpec, out: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    spec.validate()?;
    let out = out.as_ref();
    std::fs::create_dir_all(out).map_err(|e| PipelineError::io(out, e))?;
    let mut manifests = Vec::with_capacity(spec.frames);
    for i in 0..spec.frames {
        let f = synth_frame(spec, i)?;
        let id = &f.frame_id;
        write_cloud(out.join(format!("{id}.bin")), &f.cloud, CloudFormat::BinXyz)?;
        write_json(out.join(format!("{id}.proposals.json")), &f.proposals)?;
        write_json(out.join(format!("{id}.gt.json")), &f.truth)?;
        let manifest = FrameManifest {
            frame_id: id.clone(),
            ego: [0.0; 3],
            cloud: PathBuf::from(format!("{id}.bin")),
            cloud_format: "bin3".into(),
            proposals: PathBuf::from(format!("{id}.proposals.json")),
            cameras: f.cameras,
            ground_mask: None,
            cluster_labels: None,
        };
        let path = out.join(format!("{id}.frame.json"));
        write_json(&path, &manifest)?;
        manifests.push(path);
    }
    Ok(manifests)
}
