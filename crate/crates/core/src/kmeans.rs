//! Lloyd's k-means with farthest-point initialization.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};
use crate::sampling::farthest_point_sample;

/// Centroids plus the centroid index of every input point.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub centroids: Vec<Point3>,
    pub assignment: Vec<usize>,
    /// Lloyd iterations performed.
    pub iterations: usize,
    /// Sum of squared point-to-centroid distances after each update.
    pub objective_history: Vec<f64>,
}

impl ClusterSet {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.centroids.len()];
        for &a in &self.assignment {
            s[a] += 1;
        }
        s
    }

    pub fn objective(&self, cloud: &PointCloud) -> f64 {
        objective(&cloud.points, &self.centroids, &self.assignment)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KMeansParams {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            max_iters: 100,
            tol: 1e-9,
        }
    }
}

fn objective(points: &[Point3], centroids: &[Point3], assignment: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .fold(0.0, |acc, (p, &a)| acc + p.distance_squared(&centroids[a]))
}

pub fn distinct_count(points: &[Point3]) -> usize {
    let mut keys: Vec<[u64; 3]> = points
        .iter()
        .map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

fn nearest_centroid(p: &Point3, centroids: &[Point3]) -> usize {
    let mut best = (0, p.distance_squared(&centroids[0]));
    for (i, c) in centroids.iter().enumerate().skip(1) {
        let d = p.distance_squared(c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Moves the farthest member of the largest cluster into each empty cluster.
fn repair_empty(points: &[Point3], centroids: &[Point3], assignment: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignment.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        // First index among the largest clusters.
        let largest = (0..k).fold(0, |best, i| if sizes[i] > sizes[best] { i } else { best });
        let mut far = (usize::MAX, -1.0);
        for (i, p) in points.iter().enumerate() {
            if assignment[i] == largest {
                let d = p.distance_squared(&centroids[largest]);
                if d > far.1 {
                    far = (i, d);
                }
            }
        }
        assignment[far.0] = empty;
    }
}

/// k-means over `cloud`. Requires `1 <= k <= distinct points`.
pub fn kmeans(cloud: &PointCloud, k: usize, seed: u64, max_iters: usize, tol: f64) -> Result<ClusterSet> {
    let pts = &cloud.points;
    if k == 0 {
        return Err(Error::invalid("k-means needs k >= 1"));
    }
    let distinct = distinct_count(pts);
    if k > distinct {
        return Err(Error::invalid(alloc::format!(
            "k = {k} exceeds the {distinct} distinct points"
        )));
    }
    let mut centroids: Vec<Point3> = farthest_point_sample(cloud, k, seed)?
        .into_iter()
        .map(|i| pts[i])
        .collect();
    let mut assignment = vec![0usize; pts.len()];
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < max_iters.max(1) {
        iterations += 1;
        for (a, p) in assignment.iter_mut().zip(pts) {
            *a = nearest_centroid(p, &centroids);
        }
        repair_empty(pts, &centroids, &mut assignment);

        let mut sums = vec![Point3::ORIGIN; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in pts.iter().zip(&assignment) {
            sums[a] += *p;
            counts[a] += 1;
        }
        let mut movement: f64 = 0.0;
        for c in 0..k {
            let next = sums[c] * (1.0 / counts[c] as f64);
            movement = movement.max(next.distance(&centroids[c]));
            centroids[c] = next;
        }
        history.push(objective(pts, &centroids, &assignment));
        if movement < tol {
            break;
        }
    }

    Ok(ClusterSet {
        centroids,
        assignment,
        iterations,
        objective_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cluster_is_the_mean() {
        let c: PointCloud = (0..10).map(|i| Point3::new(i as f64, 2.0 * i as f64, 1.0)).collect();
        let cs = kmeans(&c, 1, 3, 50, 1e-12).unwrap();
        assert_eq!(cs.centroids.len(), 1);
        let mean = c.centroid().unwrap();
        assert!(cs.centroids[0].distance(&mean) < 1e-12);
    }

    #[test]
    fn every_point_its_own_cluster() {
        let c: PointCloud = (0..12).map(|i| Point3::new((i * i) as f64, i as f64, 0.0)).collect();
        let cs = kmeans(&c, 12, 1, 50, 1e-12).unwrap();
        let mut seen = cs.assignment.clone();
        seen.sort();
        assert_eq!(seen, (0..12).collect::<Vec<_>>());
        for (i, p) in c.iter().enumerate() {
            assert_eq!(cs.centroids[cs.assignment[i]], *p);
        }
    }

    #[test]
    fn too_many_clusters_for_duplicates() {
        let c: PointCloud = [Point3::ORIGIN, Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0)]
            .into_iter()
            .collect();
        assert!(kmeans(&c, 3, 0, 10, 1e-9).is_err());
        assert!(kmeans(&c, 0, 0, 10, 1e-9).is_err());
        assert_eq!(kmeans(&c, 2, 0, 10, 1e-9).unwrap().sizes().iter().sum::<usize>(), 3);
    }

    #[test]
    fn repair_fills_empty_cluster() {
        let pts = [Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0), Point3::new(3.0, 0.0, 0.0)];
        let centroids = [Point3::new(1.0, 0.0, 0.0), Point3::new(100.0, 0.0, 0.0)];
        let mut a = [0, 0, 0];
        repair_empty(&pts, &centroids, &mut a);
        assert_eq!(a, [0, 0, 1]);
    }
}
