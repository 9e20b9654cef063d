//! Candidate grasp generation: the geometric sampler and uniform random shooting.
//!
//! The geometric sampler clusters the state and the target, pairs clusters
//! greedily by proximity, draws pairs with probability proportional to their
//! separation, and turns each drawn pair into a grasp that pushes the state
//! cluster toward its target cluster.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::dynamics::{normalize_angle, GraspAction, GripperModel};
use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3, PointCloud};
use crate::kmeans::{kmeans, KMeansParams};
use crate::seed;

/// Total pair separation (m) below which state and target count as matched.
pub const CONVERGED_SEPARATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplerConfig {
    pub n_clusters: usize,
    pub n_samples: usize,
    /// Grasp centers are clamped into this box.
    pub bounds: Aabb,
    pub seed: u64,
    pub gripper: GripperModel,
    pub kmeans: KMeansParams,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_clusters: 10,
            n_samples: 35,
            bounds: default_workspace(),
            seed: 0,
            gripper: GripperModel::default(),
            kmeans: KMeansParams::default(),
        }
    }
}

/// Grasp-center box around the stage origin.
pub fn default_workspace() -> Aabb {
    Aabb {
        min: Point3::new(-0.07, -0.07, 0.005),
        max: Point3::new(0.07, 0.07, 0.03),
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 {
            return Err(Error::invalid("n_clusters must be at least 1"));
        }
        self.bounds.validate()?;
        self.gripper.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterPair {
    pub state: Point3,
    pub target: Point3,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedClusters {
    pub pairs: Vec<ClusterPair>,
    /// `distance / Σ distance`; all zero when `degenerate`.
    pub probabilities: Vec<f64>,
    /// Every pair coincides: there is nothing left to push.
    pub degenerate: bool,
}

/// Greedy bipartite matching by ascending distance (ties by `(i, j)`).
/// Returns `(i, j, distance)` ordered by `i`.
pub fn greedy_match(a: &[Point3], b: &[Point3]) -> Vec<(usize, usize, f64)> {
    let mut all: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            all.push((p.distance(q), i, j));
        }
    }
    all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = alloc::vec![false; a.len()];
    let mut used_b = alloc::vec![false; b.len()];
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    for (d, i, j) in all {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j, d));
        }
    }
    out.sort_by_key(|&(i, _, _)| i);
    out
}

/// Pairs given centroid sets and attaches selection probabilities.
pub fn pair_centroids(state: &[Point3], target: &[Point3]) -> PairedClusters {
    let pairs: Vec<ClusterPair> = greedy_match(state, target)
        .into_iter()
        .map(|(i, j, d)| ClusterPair {
            state: state[i],
            target: target[j],
            distance: d,
        })
        .collect();
    let total: f64 = pairs.iter().map(|p| p.distance).sum();
    let degenerate = !(total > CONVERGED_SEPARATION);
    let probabilities = pairs
        .iter()
        .map(|p| if degenerate { 0.0 } else { p.distance / total })
        .collect();
    PairedClusters {
        pairs,
        probabilities,
        degenerate,
    }
}

/// k-means on both clouds with the same seed, then greedy pairing.
pub fn pair_clusters(
    state: &PointCloud,
    target: &PointCloud,
    k: usize,
    seed: u64,
    params: &KMeansParams,
) -> Result<PairedClusters> {
    let s = kmeans(state, k, seed, params.max_iters, params.tol)?;
    let t = kmeans(target, k, seed, params.max_iters, params.tol)?;
    Ok(pair_centroids(&s.centroids, &t.centroids))
}

/// Draws `n` pair indices, with replacement, proportional to pair separation.
pub fn sample_pair_indices<R: Rng>(paired: &PairedClusters, n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if paired.degenerate {
        return Ok(Vec::new());
    }
    let dist = WeightedIndex::new(&paired.probabilities)
        .map_err(|e| Error::invalid(alloc::format!("bad pair weights: {e}")))?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

/// The grasp that pushes `pair.state` toward `pair.target`.
///
/// With `δ̂` the unit direction from state to target centroid: center
/// `μ_state + ½ δ̂ · EE_width`, yaw `atan2(δ_y, δ_x)`, separation
/// `½ ‖μ_target − center‖` clamped to the gripper range. The center is clamped
/// into `bounds`.
pub fn action_for_pair(pair: &ClusterPair, gripper: &GripperModel, bounds: &Aabb) -> Option<GraspAction> {
    let delta = pair.target - pair.state;
    let dir = delta.normalized()?;
    let center = pair.state + dir * (0.5 * gripper.max_opening);
    let rot_z = delta.y.atan2(delta.x);
    let d = (0.5 * pair.target.distance(&center)).clamp(gripper.min_closing, gripper.max_opening);
    Some(GraspAction::new(bounds.clamp(&center), rot_z, d))
}

/// Geometric candidates. An empty list means state and target already coincide.
pub fn geometric_sample(state: &PointCloud, target: &PointCloud, cfg: &SamplerConfig) -> Result<Vec<GraspAction>> {
    cfg.validate()?;
    if cfg.n_samples == 0 {
        return Err(Error::invalid("geometric sampler needs n_samples >= 1"));
    }
    let paired = pair_clusters(
        state,
        target,
        cfg.n_clusters,
        seed::derive(cfg.seed, "kmeans"),
        &cfg.kmeans,
    )?;
    let mut rng = seed::rng(seed::derive(cfg.seed, "pairs"));
    let picks = sample_pair_indices(&paired, cfg.n_samples, &mut rng)?;
    Ok(picks
        .into_iter()
        .filter_map(|i| action_for_pair(&paired.pairs[i], &cfg.gripper, &cfg.bounds))
        .collect())
}

/// Uniform draws over bounds × [−π, π) × [d_min, d_max].
pub fn random_sample(cfg: &SamplerConfig) -> Result<Vec<GraspAction>> {
    cfg.validate()?;
    let b = &cfg.bounds;
    let g = &cfg.gripper;
    let mut rng = seed::rng(seed::derive(cfg.seed, "random"));
    Ok((0..cfg.n_samples)
        .map(|_| {
            let center = Point3::new(
                rng.random_range(b.min.x..=b.max.x),
                rng.random_range(b.min.y..=b.max.y),
                rng.random_range(b.min.z..=b.max.z),
            );
            let rot = normalize_angle(rng.random_range(-PI..PI));
            let d = rng.random_range(g.min_closing..=g.max_opening);
            GraspAction::new(center, rot, d)
        })
        .collect())
}
