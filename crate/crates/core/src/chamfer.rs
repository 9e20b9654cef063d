//! Nearest-neighbor queries and the Chamfer distance.
//!
//! `chamfer_distance(X, Y) = Σ_{x∈X} min_{y∈Y} ‖x−y‖² + Σ_{y∈Y} min_{x∈X} ‖x−y‖²`,
//! a sum, not a mean. [`chamfer_mean`] is the size-normalized reporting variant.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};
use crate::kdtree::KdTree;

/// Closest point of `cloud` to `query`: (index, squared distance), lowest index on ties.
pub fn nearest_neighbor(query: &Point3, cloud: &PointCloud) -> Result<(usize, f64)> {
    cloud.require_non_empty("search")?;
    // A tree only pays off for repeated queries; one query is a scan.
    let mut best = (0, query.distance_squared(&cloud.points[0]));
    for (i, p) in cloud.points.iter().enumerate().skip(1) {
        let d2 = query.distance_squared(p);
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    Ok(best)
}

fn check_pair(a: &PointCloud, b: &PointCloud) -> Result<()> {
    a.require_non_empty("first")?;
    b.require_non_empty("second")?;
    if a.frame != b.frame {
        return Err(Error::invalid(alloc::format!(
            "clouds are in different frames ({} vs {})",
            a.frame, b.frame
        )));
    }
    Ok(())
}

/// `Σ_{a∈from} min_{b∈to} ‖a−b‖²`, accumulated in `from` order.
fn directed_sum(from: &[Point3], to_tree: &KdTree) -> f64 {
    from.iter()
        .map(|p| to_tree.nearest(p).map_or(0.0, |(_, d2)| d2))
        .fold(0.0, |acc, d| acc + d)
}

pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check_pair(a, b)?;
    let ta = KdTree::build(&a.points);
    let tb = KdTree::build(&b.points);
    Ok(directed_sum(&a.points, &tb) + directed_sum(&b.points, &ta))
}

/// Each directed sum divided by the size of the cloud it runs over.
pub fn chamfer_mean(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check_pair(a, b)?;
    let ta = KdTree::build(&a.points);
    let tb = KdTree::build(&b.points);
    Ok(directed_sum(&a.points, &tb) / a.len() as f64
        + directed_sum(&b.points, &ta) / b.len() as f64)
}

/// Chamfer distance to a fixed target from clouds that differ from a fixed
/// reference state in only a few points.
///
/// Scores are bitwise equal to [`chamfer_distance`]: per-point minima are the
/// same values, summed in the same order.
#[derive(Debug, Clone)]
pub struct IncrementalChamfer {
    target: Vec<Point3>,
    target_tree: KdTree,
    state: Vec<Point3>,
    state_tree: KdTree,
    /// Per state point: squared distance to the nearest target point.
    forward: Vec<f64>,
    /// Per target point: nearest state point and squared distance.
    backward: Vec<(usize, f64)>,
    base: f64,
}

impl IncrementalChamfer {
    pub fn new(state: &PointCloud, target: &PointCloud) -> Result<Self> {
        check_pair(state, target)?;
        let target_tree = KdTree::build(&target.points);
        let state_tree = KdTree::build(&state.points);
        let forward: Vec<f64> = state
            .points
            .iter()
            .map(|p| target_tree.nearest(p).map_or(0.0, |(_, d)| d))
            .collect();
        let backward: Vec<(usize, f64)> = target
            .points
            .iter()
            .map(|p| state_tree.nearest(p).unwrap_or((0, 0.0)))
            .collect();
        let base = forward.iter().fold(0.0, |acc, d| acc + d)
            + backward.iter().fold(0.0, |acc, (_, d)| acc + d);
        Ok(IncrementalChamfer {
            target: target.points.clone(),
            target_tree,
            state: state.points.clone(),
            state_tree,
            forward,
            backward,
            base,
        })
    }

    /// Chamfer distance of the reference state itself.
    pub fn base(&self) -> f64 {
        self.base
    }

    /// Chamfer distance from `candidate` (same length as the state) to the target.
    pub fn evaluate(&self, candidate: &PointCloud) -> Result<f64> {
        if candidate.len() != self.state.len() {
            return Err(Error::invalid("candidate size differs from the reference state"));
        }
        let changed: Vec<bool> = candidate
            .points
            .iter()
            .zip(&self.state)
            .map(|(c, s)| c != s)
            .collect();
        let moved: Vec<Point3> = candidate
            .points
            .iter()
            .zip(&changed)
            .filter_map(|(p, &c)| c.then_some(*p))
            .collect();
        if moved.is_empty() {
            return Ok(self.base);
        }

        let forward = candidate
            .points
            .iter()
            .zip(&changed)
            .zip(&self.forward)
            .map(|((p, &c), &cached)| {
                if c {
                    self.target_tree.nearest(p).map_or(0.0, |(_, d)| d)
                } else {
                    cached
                }
            })
            .fold(0.0, |acc, d| acc + d);

        let moved_tree = KdTree::build(&moved);
        let backward = self
            .target
            .iter()
            .zip(&self.backward)
            .map(|(t, &(idx, cached))| {
                let to_moved = moved_tree.nearest(t).map_or(f64::INFINITY, |(_, d)| d);
                let to_kept = if changed[idx] {
                    self.state_tree
                        .nearest_filtered(t, |j| !changed[j])
                        .map_or(f64::INFINITY, |(_, d)| d)
                } else {
                    cached
                };
                to_moved.min(to_kept)
            })
            .fold(0.0, |acc, d| acc + d);

        Ok(forward + backward)
    }
}

/// Per-target nearest state distance, used by tests and diagnostics.
pub fn directed_distances(from: &PointCloud, to: &PointCloud) -> Result<Vec<f64>> {
    to.require_non_empty("search")?;
    let tree = KdTree::build(&to.points);
    let mut out = vec![0.0; from.len()];
    for (o, p) in out.iter_mut().zip(&from.points) {
        *o = tree.nearest(p).map_or(0.0, |(_, d)| d);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud {
        pts.iter().map(|&p| Point3::from(p)).collect()
    }

    #[test]
    fn identical_clouds_have_zero_distance() {
        let a = cloud(&[[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]);
        assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn single_points() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = cloud(&[[1.0, 0.0, 0.0]]);
        assert_eq!(chamfer_distance(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn sum_not_mean() {
        // forward: 1 + 1, backward: 1.
        let a = cloud(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        let b = cloud(&[[1.0, 0.0, 0.0]]);
        assert_eq!(chamfer_distance(&a, &b).unwrap(), 3.0);
        assert_eq!(chamfer_mean(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn empty_cloud_is_rejected() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let e = PointCloud::new(vec![]);
        assert!(matches!(chamfer_distance(&a, &e), Err(Error::InvalidInput(_))));
        assert!(matches!(chamfer_distance(&e, &a), Err(Error::InvalidInput(_))));
        assert!(nearest_neighbor(&Point3::ORIGIN, &e).is_err());
    }

    #[test]
    fn frames_must_match() {
        let a = cloud(&[[0.0, 0.0, 0.0]]);
        let b = PointCloud::with_frame(vec![Point3::ORIGIN], "cam0");
        assert!(chamfer_distance(&a, &b).is_err());
    }

    #[test]
    fn nearest_neighbor_breaks_ties_low() {
        let c = cloud(&[
            [5.0, 5.0, 5.0],
            [9.0, 9.0, 9.0],
            [1.0, 0.0, 0.0],
            [7.0, 7.0, 7.0],
            [8.0, 8.0, 8.0],
            [-1.0, 0.0, 0.0],
        ]);
        assert_eq!(nearest_neighbor(&Point3::ORIGIN, &c).unwrap(), (2, 1.0));
        assert_eq!(nearest_neighbor(&Point3::new(7.0, 7.0, 7.0), &c).unwrap(), (3, 0.0));
    }

    #[test]
    fn incremental_matches_full_recompute() {
        let state: PointCloud = (0..200)
            .map(|i| {
                let t = i as f64 * 0.37;
                Point3::new(t.sin(), t.cos(), (t * 0.3).sin())
            })
            .collect();
        let target: PointCloud = (0..150)
            .map(|i| {
                let t = i as f64 * 0.51;
                Point3::new(1.1 * t.cos(), 0.9 * t.sin(), 0.2)
            })
            .collect();
        let inc = IncrementalChamfer::new(&state, &target).unwrap();
        assert_eq!(inc.base(), chamfer_distance(&state, &target).unwrap());
        let mut cand = state.clone();
        for i in (0..200).step_by(7) {
            cand.points[i] = cand.points[i] * 0.5 + Point3::new(0.1, 0.0, 0.0);
        }
        assert_eq!(
            inc.evaluate(&cand).unwrap(),
            chamfer_distance(&cand, &target).unwrap()
        );
        assert_eq!(inc.evaluate(&state).unwrap(), inc.base());
    }
}
