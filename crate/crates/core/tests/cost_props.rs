use amodal_core::costfn::{
    clamp_to_constraints, cost_density, cost_iou2d, cost_lshape, cost_surface, AnchorRange, BoxObjective,
    CostBreakdown, CostWeights, Objective,
};
use amodal_core::geom::{box_corners, point_in_box, point_segment_distance_2d, Box2D, BoxParams, CameraCalib, Point3};
use proptest::prelude::*;
use std::f64::consts::PI;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 1000, ..ProptestConfig::default() }
}

fn front_camera() -> CameraCalib<f64> {
    CameraCalib {
        camera_id: "front".into(),
        extrinsic: [[0.0, -1.0, 0.0, 0.0], [0.0, 0.0, -1.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]],
        intrinsic: [[1000.0, 0.0, 800.0], [0.0, 1000.0, 450.0], [0.0, 0.0, 1.0]],
        image_width: 1600.0,
        image_height: 900.0,
    }
}

fn scene() -> impl Strategy<Value = (BoxParams<f64>, Vec<Point3<f64>>, Point3<f64>)> {
    (
        (4.0..40.0f64, -15.0..15.0f64, -1.5..1.0f64, 1.0..6.0f64, 0.8..2.5f64, 0.8..2.5f64, 0.0..PI),
        prop::collection::vec((-4.0..4.0f64, -2.0..2.0f64, -1.5..1.5f64), 1..60),
        (-3.0..3.0f64, -3.0..3.0f64),
    )
        .prop_map(|((x, y, z, l, w, h, ry), pts, ego)| {
            let b = BoxParams::new(x, y, z, l, w, h, ry);
            let pts = pts.into_iter().map(|(a, c, d)| b.to_world(&Point3::new(a, c, d))).collect();
            (b, pts, Point3::new(ego.0, ego.1, 0.0))
        })
}

/// Points on the two ego-facing side faces, just inside the box.
fn two_face_samples(b: &BoxParams<f64>, ego: &Point3<f64>) -> Vec<Point3<f64>> {
    let l = b.to_local(ego);
    let sx = if l.x >= 0.0 { 1.0 } else { -1.0 };
    let sy = if l.y >= 0.0 { 1.0 } else { -1.0 };
    let (hl, hw) = (b.l / 2.0 - 1e-6, b.w / 2.0 - 1e-6);
    let mut out = Vec::new();
    for i in 0..=10 {
        let f = -1.0 + 0.2 * i as f64;
        for z in [-0.25, 0.0, 0.25] {
            out.push(b.to_world(&Point3::new(sx * hl, f * hw, z * b.h)));
            out.push(b.to_world(&Point3::new(f * hl, sy * hw, z * b.h)));
        }
    }
    out
}

/// Independent L-shape oracle: rank top edges by midpoint distance, take
/// the nearest and the nearer of its two neighbors.
fn lshape_oracle(b: &BoxParams<f64>, pts: &[Point3<f64>], ego: &Point3<f64>) -> f64 {
    let c = box_corners(b);
    let edges: Vec<([f64; 2], [f64; 2])> =
        (0..4).map(|i| ([c[4 + i].x, c[4 + i].y], [c[4 + (i + 1) % 4].x, c[4 + (i + 1) % 4].y])).collect();
    let md = |e: &([f64; 2], [f64; 2])| ((e.0[0] + e.1[0]) / 2.0 - ego.x).hypot((e.0[1] + e.1[1]) / 2.0 - ego.y);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| md(&edges[i]).total_cmp(&md(&edges[j])));
    let first = order[0];
    let second = order[1..].iter().copied().find(|&k| k != (first + 2) % 4).unwrap();
    let inside: Vec<&Point3<f64>> = pts.iter().filter(|p| point_in_box(p, b)).collect();
    if inside.is_empty() {
        return 0.0;
    }
    let d = |p: &Point3<f64>, e: &([f64; 2], [f64; 2])| point_segment_distance_2d([p.x, p.y], e.0, e.1);
    inside.iter().map(|p| d(p, &edges[first]).min(d(p, &edges[second]))).sum::<f64>() / inside.len() as f64
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn density_matches_brute_force((b, pts, _) in scene()) {
        let inside = pts.iter().filter(|p| point_in_box(p, &b)).count();
        let expect = -(inside as f64) / pts.len() as f64;
        prop_assert_eq!(cost_density(&b, &pts).unwrap(), expect);
        prop_assert!((-1.0..=0.0).contains(&expect));
    }

    #[test]
    fn lshape_matches_oracle((b, pts, ego) in scene()) {
        let got = cost_lshape(&b, &pts, &ego).unwrap();
        prop_assert!(got >= 0.0);
        prop_assert!((got - lshape_oracle(&b, &pts, &ego)).abs() < 1e-9);
    }

    #[test]
    fn fused_objective_matches_components((b, pts, ego) in scene(), probe in (-1.0..1.0f64, -1.0..1.0f64, 0.5..1.5f64, 0.0..PI)) {
        let cam = front_camera();
        let proposal = Box2D::new(600.0, 300.0, 1000.0, 600.0);
        let w = CostWeights::standard(25.0);
        let obj = BoxObjective::new(&pts, ego, proposal, &cam, w).unwrap();
        let cand = BoxParams::new(b.x + probe.0, b.y + probe.1, b.z, b.l * probe.2, b.w, b.h, probe.3);
        let fused = obj.evaluate(&cand);
        let split = CostBreakdown::compose(
            cost_density(&cand, &pts).unwrap(),
            cost_lshape(&cand, &pts, &ego).unwrap(),
            cost_surface(&cand, &ego, &w),
            cost_iou2d(&cand, &proposal, &cam, &w),
            &w,
        );
        for (a, e) in [(fused.density, split.density), (fused.lshape, split.lshape), (fused.surface, split.surface), (fused.iou2d, split.iou2d), (fused.total, split.total)] {
            prop_assert!((a - e).abs() < 1e-9, "{:?} vs {:?}", fused, split);
        }
    }

    #[test]
    fn translation_covariance((b, pts, ego) in scene(), t in (-50.0..50.0f64, -50.0..50.0f64, -2.0..2.0f64)) {
        let shift = Point3::new(t.0, t.1, t.2);
        let b2 = BoxParams { x: b.x + t.0, y: b.y + t.1, z: b.z + t.2, ..b };
        let pts2: Vec<_> = pts.iter().map(|p| *p + shift).collect();
        let ego2 = ego + shift;
        let w = CostWeights::standard(20.0);
        prop_assert_eq!(cost_density(&b, &pts).unwrap(), cost_density(&b2, &pts2).unwrap());
        prop_assert!((cost_lshape(&b, &pts, &ego).unwrap() - cost_lshape(&b2, &pts2, &ego2).unwrap()).abs() < 1e-6);
        prop_assert!((cost_surface(&b, &ego, &w) - cost_surface(&b2, &ego2, &w)).abs() < 1e-9);
    }

    #[test]
    fn surface_clip_monotone(dir in 0.0..(2.0 * PI), d1 in 0.0..60.0f64, d2 in 0.0..60.0f64, c in 0.5..50.0f64) {
        let w = CostWeights::standard(c);
        let ego = Point3::new(0.0, 0.0, 0.0);
        let at = |d: f64| BoxParams::new(d * dir.cos(), d * dir.sin(), 0.0, 1.0, 1.0, 1.0, 0.0);
        let (near, far) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let (sn, sf) = (cost_surface(&at(near), &ego, &w), cost_surface(&at(far), &ego, &w));
        prop_assert!(sf <= sn + 1e-12);
        prop_assert!(sf >= -c - 1e-12);
        if near >= c {
            prop_assert!((sn - sf).abs() < 1e-12);
        }
    }

    #[test]
    fn clamp_lands_in_constraints(b in (-10.0..10.0f64, 0.01..20.0f64, 0.01..5.0f64, 0.01..5.0f64, -20.0..20.0f64)) {
        let anchor = AnchorRange::new("car", [3.9, 1.6, 1.4], [5.3, 2.1, 1.9]);
        let raw = BoxParams::new(b.0, 0.0, 0.0, b.1, b.2, b.3, b.4);
        let c = clamp_to_constraints(&raw, &anchor);
        prop_assert!(anchor.contains_dims(&c));
        prop_assert!((0.0..PI).contains(&c.ry));
        prop_assert_eq!(c.x, raw.x);
        prop_assert_eq!(clamp_to_constraints(&c, &anchor), c);
        // Same footprint orientation: yaw moved by a multiple of π.
        let k = (raw.ry - c.ry) / PI;
        prop_assert!((k - k.round()).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn lshape_ground_truth_beats_lateral_shifts(
        x in 5.0..40.0f64, y in -20.0..20.0f64, ry in 0.0..PI,
        l in 3.5..5.5f64, w in 1.5..2.2f64,
        shifts in prop::collection::vec((-0.3..0.3f64, -0.3..0.3f64), 100),
    ) {
        let ego = Point3::new(0.0, 0.0, 0.0);
        let gt = BoxParams::new(x, y, 0.0, l, w, 1.6, ry);
        // Two faces are only visible from an oblique view.
        let e = gt.to_local(&ego);
        prop_assume!(e.x.abs() > l / 2.0 + 0.5 && e.y.abs() > w / 2.0 + 0.5);
        let pts = two_face_samples(&gt, &ego);
        let at_gt = cost_lshape(&gt, &pts, &ego).unwrap();
        for (dx, dy) in shifts {
            let moved = BoxParams { x: gt.x + dx, y: gt.y + dy, ..gt };
            // An empty box scores 0 by convention; density handles that case.
            if !pts.iter().any(|p| point_in_box(p, &moved)) {
                continue;
            }
            let m = cost_lshape(&moved, &pts, &ego).unwrap();
            prop_assert!(at_gt <= m + 1e-9, "gt {} moved {} by ({}, {})", at_gt, m, dx, dy);
        }
    }
}
