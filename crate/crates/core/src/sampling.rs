//! Subset selection and local grouping: farthest-point sampling, kNN patches,
//! seeded random downsampling.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};
use crate::kdtree::KdTree;
use crate::seed;

/// Greedy farthest-point sampling with a seeded start index.
///
/// Returns indices in selection order.
pub fn farthest_point_sample(cloud: &PointCloud, k: usize, seed: u64) -> Result<Vec<usize>> {
    if cloud.is_empty() {
        return Err(Error::invalid("cannot sample from an empty cloud"));
    }
    let start = seed::rng(seed).random_range(0..cloud.len());
    farthest_point_sample_from(cloud, k, start)
}

/// Farthest-point sampling from a fixed start index. Each further pick maximizes
/// the distance to the already chosen set; ties go to the lowest index.
pub fn farthest_point_sample_from(cloud: &PointCloud, k: usize, start: usize) -> Result<Vec<usize>> {
    let n = cloud.len();
    if k == 0 || k > n {
        return Err(Error::invalid(alloc::format!(
            "farthest-point sample size {k} outside 1..={n}"
        )));
    }
    if start >= n {
        return Err(Error::invalid("start index out of range"));
    }
    let pts = &cloud.points;
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut current = start;
    loop {
        chosen.push(current);
        taken[current] = true;
        if chosen.len() == k {
            break;
        }
        let c = pts[current];
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            let d2 = pts[i].distance_squared(&c);
            if d2 < min_d2[i] {
                min_d2[i] = d2;
            }
            if best.is_none_or(|(_, b)| min_d2[i] > b) {
                best = Some((i, min_d2[i]));
            }
        }
        current = best.map(|(i, _)| i).expect("k <= n leaves a candidate");
    }
    Ok(chosen)
}

/// One kNN patch: the member indices and their positions relative to the centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct PointGroup {
    pub centroid: Point3,
    pub indices: Vec<usize>,
    pub local: Vec<Point3>,
}

/// For every centroid, the `group_size` nearest cloud points (ties by index),
/// re-expressed relative to that centroid. Groups may overlap.
pub fn knn_group(cloud: &PointCloud, centroids: &[Point3], group_size: usize) -> Result<Vec<PointGroup>> {
    if centroids.is_empty() {
        return Err(Error::invalid("no centroids to group around"));
    }
    if group_size == 0 || group_size > cloud.len() {
        return Err(Error::invalid(alloc::format!(
            "group size {group_size} outside 1..={}",
            cloud.len()
        )));
    }
    let tree = KdTree::build(&cloud.points);
    Ok(centroids
        .iter()
        .map(|c| {
            let nn = tree.k_nearest(c, group_size);
            PointGroup {
                centroid: *c,
                local: nn.iter().map(|&(i, _)| cloud.points[i] - *c).collect(),
                indices: nn.into_iter().map(|(i, _)| i).collect(),
            }
        })
        .collect())
}

/// FPS centroids followed by kNN grouping.
pub fn fps_groups(
    cloud: &PointCloud,
    n_groups: usize,
    group_size: usize,
    seed: u64,
) -> Result<Vec<PointGroup>> {
    let idx = farthest_point_sample(cloud, n_groups, seed)?;
    let centroids: Vec<Point3> = idx.iter().map(|&i| cloud.points[i]).collect();
    knn_group(cloud, &centroids, group_size)
}

/// Uniform sample of `n` points without replacement.
pub fn downsample_random(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    if n > cloud.len() {
        return Err(Error::invalid(alloc::format!(
            "cannot draw {n} points from a cloud of {}",
            cloud.len()
        )));
    }
    let mut rng = seed::rng(seed);
    let idx = rand::seq::index::sample(&mut rng, cloud.len(), n);
    Ok(PointCloud::with_frame(
        idx.iter().map(|i| cloud.points[i]).collect(),
        cloud.frame.clone(),
    ))
}
