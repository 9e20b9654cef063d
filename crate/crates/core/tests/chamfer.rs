mod common;

use claysculpt_core::chamfer::IncrementalChamfer;
use claysculpt_core::{chamfer_distance, chamfer_mean, nearest_neighbor, Point3, PointCloud, RigidTransform};
use common::{arb_cloud, brute_chamfer, cloud, random_cloud};
use proptest::prelude::*;

#[test]
fn worked_examples() {
    let a = cloud(&[[0.0, 0.0, 0.0]]);
    let b = cloud(&[[1.0, 0.0, 0.0]]);
    assert_eq!(chamfer_distance(&a, &b).unwrap(), 2.0);
    let a = cloud(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
    assert_eq!(chamfer_distance(&a, &b).unwrap(), 3.0);
    assert_eq!(chamfer_distance(&a, &b).unwrap(), brute_chamfer(&a, &b));
    assert_eq!(chamfer_mean(&a, &b).unwrap(), 2.0 / 2.0 + 1.0);
}

#[test]
fn empty_or_mismatched_frames_are_rejected() {
    let a = cloud(&[[0.0, 0.0, 0.0]]);
    let empty = PointCloud::new(vec![]);
    assert!(chamfer_distance(&a, &empty).unwrap_err().is_invalid_input());
    assert!(chamfer_distance(&empty, &a).unwrap_err().is_invalid_input());
    let other = PointCloud::with_frame(a.points.clone(), "camera0");
    assert!(chamfer_distance(&a, &other).unwrap_err().is_invalid_input());
}

#[test]
fn nearest_neighbor_matches_linear_scan_and_breaks_ties_low() {
    let c = random_cloud(1000, 1.0, 3);
    let queries = random_cloud(100, 1.2, 4);
    for q in &queries.points {
        let mut best = (0, f64::INFINITY);
        for (i, p) in c.points.iter().enumerate() {
            let d = q.distance_squared(p);
            if d < best.1 {
                best = (i, d);
            }
        }
        assert_eq!(nearest_neighbor(q, &c).unwrap(), best);
        let tree = claysculpt_core::kdtree::KdTree::build(&c.points);
        assert_eq!(tree.nearest(q), Some(best));
    }
    let tie = cloud(&[
        [5.0, 5.0, 5.0],
        [4.0, 4.0, 4.0],
        [1.0, 0.0, 0.0],
        [3.0, 3.0, 3.0],
        [9.0, 9.0, 9.0],
        [-1.0, 0.0, 0.0],
    ]);
    assert_eq!(nearest_neighbor(&Point3::ORIGIN, &tie).unwrap(), (2, 1.0));
    let tree = claysculpt_core::kdtree::KdTree::build(&tie.points);
    assert_eq!(tree.nearest(&Point3::ORIGIN), Some((2, 1.0)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn equals_brute_force(a in arb_cloud(200), b in arb_cloud(200)) {
        prop_assert_eq!(chamfer_distance(&a, &b).unwrap(), brute_chamfer(&a, &b));
    }

    #[test]
    fn symmetric_and_zero_on_self(a in arb_cloud(100), b in arb_cloud(100)) {
        prop_assert_eq!(chamfer_distance(&a, &b).unwrap(), chamfer_distance(&b, &a).unwrap());
        prop_assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
        prop_assert!(chamfer_distance(&a, &b).unwrap() >= 0.0);
    }

    #[test]
    fn shared_rigid_motion_leaves_it_unchanged(
        a in arb_cloud(100),
        b in arb_cloud(100),
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in -3.1f64..3.1,
        t in prop::array::uniform3(-2.0f64..2.0),
    ) {
        prop_assume!(Point3::from(axis).norm() > 0.1);
        let m = RigidTransform::from_axis_angle(Point3::from(axis), angle, Point3::from(t)).unwrap();
        let before = chamfer_distance(&a, &b).unwrap();
        let after = chamfer_distance(&m.apply_cloud(&a, "world"), &m.apply_cloud(&b, "world")).unwrap();
        prop_assert!((after - before).abs() <= 1e-9 * before.max(1e-12), "{before} vs {after}");
    }

    #[test]
    fn incremental_scores_match_full_recompute(
        state in arb_cloud(150),
        target in arb_cloud(150),
        moves in prop::collection::vec((0usize..150, prop::array::uniform3(-1.0f64..1.0)), 0..10),
    ) {
        let scorer = IncrementalChamfer::new(&state, &target).unwrap();
        prop_assert_eq!(scorer.base(), chamfer_distance(&state, &target).unwrap());
        let mut cand = state.clone();
        for (i, p) in moves {
            let n = cand.len();
            cand.points[i % n] = Point3::from(p);
        }
        prop_assert_eq!(scorer.evaluate(&cand).unwrap(), chamfer_distance(&cand, &target).unwrap());
    }
}
