//! Raw scene scan → clean, closed, fixed-size clay shell.
//!
//! Stages: workspace crop, clay isolation by label, statistical outlier removal,
//! base-plane completion at stage height, random downsampling.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3, PointCloud};
use crate::kdtree::KdTree;
use crate::sampling::downsample_random;

/// Per-point scene class. Stands in for color-space classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Label {
    Clay,
    Table,
    Stage,
    Other,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Clay => "clay",
            Label::Table => "table",
            Label::Stage => "stage",
            Label::Other => "other",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "clay" => Ok(Label::Clay),
            "table" => Ok(Label::Table),
            "stage" => Ok(Label::Stage),
            "other" => Ok(Label::Other),
            other => Err(Error::invalid(alloc::format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawScan {
    pub points: Vec<Point3>,
    pub labels: Vec<Label>,
}

impl RawScan {
    pub fn new(points: Vec<Point3>, labels: Vec<Label>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::invalid(alloc::format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        Ok(RawScan { points, labels })
    }

    /// Every point labeled clay.
    pub fn all_clay(points: Vec<Point3>) -> Self {
        let labels = alloc::vec![Label::Clay; points.len()];
        RawScan { points, labels }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn extend(&mut self, points: impl IntoIterator<Item = Point3>, label: Label) {
        for p in points {
            self.points.push(p);
            self.labels.push(label);
        }
    }
}

/// Keeps the points inside the closed box.
pub fn crop_workspace(scan: &RawScan, bounds: &Aabb) -> Result<RawScan> {
    bounds.validate()?;
    let (points, labels) = scan
        .points
        .iter()
        .zip(&scan.labels)
        .filter(|(p, _)| bounds.contains(p))
        .map(|(p, l)| (*p, *l))
        .unzip();
    Ok(RawScan { points, labels })
}

pub fn isolate_clay(scan: &RawScan) -> Result<PointCloud> {
    let pts: Vec<Point3> = scan
        .points
        .iter()
        .zip(&scan.labels)
        .filter(|(_, l)| **l == Label::Clay)
        .map(|(p, _)| *p)
        .collect();
    if pts.is_empty() {
        return Err(Error::EmptyClay);
    }
    Ok(PointCloud::new(pts))
}

/// Mean distance from every point to its `k` nearest other points.
pub fn mean_neighbor_distances(cloud: &PointCloud, k: usize) -> Result<Vec<f64>> {
    if k == 0 || cloud.len() <= k {
        return Err(Error::invalid(alloc::format!(
            "outlier filter needs more than k = {k} points, got {}",
            cloud.len()
        )));
    }
    let tree = KdTree::build(&cloud.points);
    Ok(cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let nn = tree.k_nearest_filtered(p, k, |j| j != i);
            nn.iter().map(|(_, d2)| d2.sqrt()).sum::<f64>() / k as f64
        })
        .collect())
}

/// Statistical outlier removal: drops points whose mean k-NN distance exceeds
/// `mean + std_ratio · std` over the cloud.
pub fn remove_outliers(cloud: &PointCloud, k_neighbors: usize, std_ratio: f64) -> Result<PointCloud> {
    if !std_ratio.is_finite() {
        return Err(Error::invalid("std_ratio must be finite"));
    }
    let d = mean_neighbor_distances(cloud, k_neighbors)?;
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let limit = mean + std_ratio * var.sqrt();
    Ok(PointCloud::with_frame(
        cloud
            .points
            .iter()
            .zip(&d)
            .filter(|(_, &di)| di <= limit)
            .map(|(p, _)| *p)
            .collect(),
        cloud.frame.clone(),
    ))
}

fn cross2(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull (Andrew's monotone chain), collinear points dropped.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: &mut dyn Iterator<Item = &[f64; 2]> = if pass == 0 {
            &mut pts.iter()
        } else {
            &mut pts.iter().rev()
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross2(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn in_convex(p: [f64; 2], hull: &[[f64; 2]]) -> bool {
    let n = hull.len();
    (0..n).all(|i| cross2(hull[i], hull[(i + 1) % n], p) >= 0.0)
}

/// Closes the shell with a flat base at the lowest point of `cloud`.
pub fn complete_base(cloud: &PointCloud, base_band: f64, grid_step: f64) -> Result<PointCloud> {
    cloud.require_non_empty("clay")?;
    let min_z = cloud.points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    complete_base_at(cloud, min_z, base_band, grid_step)
}

/// Appends a base plane at height `base_z`: the convex outline (x–y) of the points
/// with `z < base_z + base_band`, filled with a `grid_step` lattice and traced
/// along its edges at the same spacing.
pub fn complete_base_at(cloud: &PointCloud, base_z: f64, base_band: f64, grid_step: f64) -> Result<PointCloud> {
    cloud.require_non_empty("clay")?;
    if !(base_band > 0.0 && grid_step > 0.0) || !base_z.is_finite() {
        return Err(Error::invalid("base band and grid step must be positive"));
    }
    let band: Vec<[f64; 2]> = cloud
        .points
        .iter()
        .filter(|p| p.z < base_z + base_band)
        .map(|p| [p.x, p.y])
        .collect();
    if band.len() < 3 {
        return Err(Error::NoBase { found: band.len() });
    }
    let hull = convex_hull_2d(&band);
    if hull.len() < 3 {
        return Err(Error::NoBase { found: band.len() });
    }

    let mut out = cloud.points.clone();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for v in &hull {
        for a in 0..2 {
            lo[a] = lo[a].min(v[a]);
            hi[a] = hi[a].max(v[a]);
        }
    }
    // Lattice anchored to multiples of the step, so it does not depend on the hull.
    let i0 = (lo[0] / grid_step).ceil() as i64;
    let i1 = (hi[0] / grid_step).floor() as i64;
    let j0 = (lo[1] / grid_step).ceil() as i64;
    let j1 = (hi[1] / grid_step).floor() as i64;
    for i in i0..=i1 {
        for j in j0..=j1 {
            let p = [i as f64 * grid_step, j as f64 * grid_step];
            if in_convex(p, &hull) {
                out.push(Point3::new(p[0], p[1], base_z));
            }
        }
    }
    for e in 0..hull.len() {
        let a = hull[e];
        let b = hull[(e + 1) % hull.len()];
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let steps = (len / grid_step).ceil().max(1.0) as usize;
        for s in 0..steps {
            let t = s as f64 / steps as f64;
            out.push(Point3::new(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), base_z));
        }
    }
    Ok(PointCloud::with_frame(out, cloud.frame.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PreprocessConfig {
    pub bounds: Aabb,
    pub n: usize,
    pub base_band: f64,
    pub grid_step: f64,
    pub k_neighbors: usize,
    pub std_ratio: f64,
    pub seed: u64,
    /// Height of the stage top. Defaults to the bottom of `bounds`.
    pub stage_z: Option<f64>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            bounds: Aabb {
                min: Point3::new(-0.08, -0.08, 0.0),
                max: Point3::new(0.08, 0.08, 0.08),
            },
            n: 2048,
            base_band: 0.003,
            grid_step: 0.002,
            k_neighbors: 20,
            std_ratio: 2.0,
            seed: 0,
            stage_z: None,
        }
    }
}

impl PreprocessConfig {
    pub fn stage_z(&self) -> f64 {
        self.stage_z.unwrap_or(self.bounds.min.z)
    }
}

/// A closed clay cloud of fixed size whose base lies on the stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ClayShell {
    pub cloud: PointCloud,
    pub base_z: f64,
}

pub fn preprocess_pipeline(scan: &RawScan, cfg: &PreprocessConfig) -> Result<ClayShell> {
    if scan.points.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("scan has non-finite points").in_stage("input"));
    }
    let stage_z = cfg.stage_z();
    let cropped = crop_workspace(scan, &cfg.bounds).map_err(|e| e.in_stage("crop"))?;
    let mut clay = isolate_clay(&cropped).map_err(|e| e.in_stage("isolate"))?;
    // The clay rests on the stage: nothing of it lies below.
    for p in &mut clay.points {
        if p.z < stage_z {
            p.z = stage_z;
        }
    }
    let clean = remove_outliers(&clay, cfg.k_neighbors, cfg.std_ratio).map_err(|e| e.in_stage("outliers"))?;
    let closed = complete_base_at(&clean, stage_z, cfg.base_band, cfg.grid_step).map_err(|e| e.in_stage("base"))?;
    let cloud = downsample_random(&closed, cfg.n, cfg.seed).map_err(|e| e.in_stage("downsample"))?;
    Ok(ClayShell {
        cloud,
        base_z: stage_z,
    })
}
