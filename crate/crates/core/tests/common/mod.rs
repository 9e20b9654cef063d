#![allow(dead_code)]

use claysculpt_core::{Point3, PointCloud};
use proptest::prelude::*;
use rand::Rng;

pub fn cloud(pts: &[[f64; 3]]) -> PointCloud {
    pts.iter().map(|&p| Point3::from(p)).collect()
}

pub fn random_cloud(n: usize, half: f64, seed: u64) -> PointCloud {
    let mut rng = claysculpt_core::seed::rng(seed);
    (0..n)
        .map(|_| {
            Point3::new(
                rng.random_range(-half..half),
                rng.random_range(-half..half),
                rng.random_range(-half..half),
            )
        })
        .collect()
}

pub fn arb_cloud(max: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..=max).prop_map(|v| cloud(&v))
}

pub fn brute_chamfer(a: &PointCloud, b: &PointCloud) -> f64 {
    let directed = |from: &PointCloud, to: &PointCloud| {
        let mut sum = 0.0;
        for p in &from.points {
            let mut best = f64::INFINITY;
            for q in &to.points {
                let d = p.distance_squared(q);
                if d < best {
                    best = d;
                }
            }
            sum += best;
        }
        sum
    };
    directed(a, b) + directed(b, a)
}

/// A world-frame multi-view scan of `object` on the stage, with table and
/// stage points, plus `fliers` clay-labeled strays 2 to 4 cm off the clay.
pub fn scene(object: &PointCloud, noise: f64, fliers: usize, seed: u64) -> (claysculpt_core::RawScan, Vec<Point3>) {
    use claysculpt_core::sim::{camera_ring, ScanOptions};
    use claysculpt_core::{synth_scan, Label, RawScan};
    let c = object.centroid().unwrap();
    let cams = camera_ring(4, 0.5, c).unwrap();
    let scans = synth_scan(object, &cams, noise, seed, &ScanOptions::default()).unwrap();
    let mut world = RawScan::default();
    for (scan, cam) in scans.iter().zip(&cams) {
        world.points.extend(scan.points.iter().map(|p| cam.apply(p)));
        world.labels.extend(&scan.labels);
    }
    let mut rng = claysculpt_core::seed::rng(seed ^ 0x5eed);
    let b = object.bounds().unwrap();
    let mut strays = Vec::new();
    while strays.len() < fliers {
        let p = Point3::new(
            rng.random_range(-0.075..0.075),
            rng.random_range(-0.075..0.075),
            rng.random_range(0.005..0.075),
        );
        let gap = object.points.iter().map(|q| q.distance(&p)).fold(f64::INFINITY, f64::min);
        if (0.02..0.04).contains(&gap) || (gap >= 0.02 && !b.contains(&p)) {
            strays.push(p);
        }
    }
    world.extend(strays.iter().copied(), Label::Clay);
    (world, strays)
}
