//! Rigid registration: least-squares fit, RANSAC coarse alignment, point-to-point
//! ICP refinement, and fusion of registered views.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use rand::seq::index;

use crate::error::{Error, Result};
use crate::geom::{centroid, Point3, PointCloud, WORLD_FRAME};
use crate::kdtree::KdTree;
use crate::seed;
use crate::transform::{to_vector, RigidTransform};

/// Triangles smaller than this (m²) make a minimal sample degenerate.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub source_index: usize,
    pub target_index: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    /// Maps source coordinates into the target frame.
    pub transform: RigidTransform,
    pub inlier_count: usize,
    pub rms_error: f64,
    pub iterations: usize,
    /// ICP: RMS at every correspondence round. RANSAC: RMS after each inlier refit.
    pub rms_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RansacParams {
    pub iterations: usize,
    pub inlier_threshold: f64,
    pub seed: u64,
    /// Cap on inlier re-fit rounds applied to the winning hypothesis.
    pub refit_rounds: usize,
    /// Hypotheses are scored on at most this many source points (a fixed random subset).
    pub score_points: usize,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            iterations: 2000,
            inlier_threshold: 0.004,
            seed: 0,
            refit_rounds: 50,
            score_points: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IcpParams {
    pub max_iters: usize,
    pub convergence_tol: f64,
    pub max_correspondence_dist: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        IcpParams {
            max_iters: 100,
            convergence_tol: 1e-12,
            max_correspondence_dist: 0.01,
        }
    }
}

pub fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    0.5 * (*b - *a).cross(&(*c - *a)).norm()
}

/// Least-squares rigid transform taking `source[i]` onto `target[i]` (Kabsch).
///
/// `None` when fewer than three pairs are given or the source points are collinear.
pub fn fit_rigid(source: &[Point3], target: &[Point3]) -> Option<RigidTransform> {
    if source.len() != target.len() || source.len() < 3 {
        return None;
    }
    let cs = centroid(source)?;
    let ct = centroid(target)?;
    let mut h = Matrix3::<f64>::zeros();
    let mut spread = Matrix3::<f64>::zeros();
    for (s, t) in source.iter().zip(target) {
        let a: Vector3<f64> = to_vector(&(*s - cs));
        let b: Vector3<f64> = to_vector(&(*t - ct));
        h += a * b.transpose();
        spread += a * a.transpose();
    }
    // Rank check: collinear sources leave the rotation about their line undetermined.
    let eig = spread.symmetric_eigenvalues();
    let mut ev = [eig[0], eig[1], eig[2]];
    ev.sort_by(|a, b| a.total_cmp(b));
    if !(ev[1] > 1e-12 * ev[2].max(f64::MIN_POSITIVE)) {
        return None;
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let v = v_t.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rotation = v * d * u.transpose();
    let rot_cs = RigidTransform {
        rotation,
        translation: Point3::ORIGIN,
    }
    .apply_vector(&cs);
    Some(RigidTransform {
        rotation,
        translation: ct - rot_cs,
    })
}

fn match_within(
    source: &[Point3],
    transform: &RigidTransform,
    target_tree: &KdTree,
    max_d2: f64,
) -> Vec<Correspondence> {
    source
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let (j, d2) = target_tree.nearest(&transform.apply(p))?;
            (d2 <= max_d2).then(|| Correspondence {
                source_index: i,
                target_index: j,
                residual: d2.sqrt(),
            })
        })
        .collect()
}

fn rms(matches: &[Correspondence]) -> f64 {
    if matches.is_empty() {
        return 0.0;
    }
    let s = matches.iter().fold(0.0, |acc, c| acc + c.residual * c.residual);
    (s / matches.len() as f64).sqrt()
}

fn refit(source: &[Point3], target: &[Point3], matches: &[Correspondence]) -> Option<RigidTransform> {
    let (s, t): (Vec<Point3>, Vec<Point3>) = matches
        .iter()
        .map(|c| (source[c.source_index], target[c.target_index]))
        .unzip();
    fit_rigid(&s, &t)
}

/// RANSAC over nearest-neighbor putative matches.
///
/// Putative partner of each source point: its nearest target point once the two
/// centroids are made to coincide. Each hypothesis fits three such pairs and is
/// scored by how many source points then land within `inlier_threshold` of the
/// target. The winner (most inliers, earliest on ties) is re-fit on its inliers
/// until the inlier set stops changing.
pub fn ransac_align(source: &PointCloud, target: &PointCloud, params: &RansacParams) -> Result<RegistrationResult> {
    if source.len() < 3 || target.len() < 3 {
        return Err(Error::invalid("RANSAC needs at least 3 points in each cloud"));
    }
    source.validate()?;
    target.validate()?;
    if !(params.inlier_threshold > 0.0) {
        return Err(Error::invalid("inlier threshold must be positive"));
    }
    let src = &source.points;
    let tgt = &target.points;
    let tree = KdTree::build(tgt);
    let shift = centroid(tgt).unwrap() - centroid(src).unwrap();
    let putative: Vec<usize> = src
        .iter()
        .map(|p| tree.nearest(&(*p + shift)).map_or(0, |(j, _)| j))
        .collect();
    let max_d2 = params.inlier_threshold * params.inlier_threshold;
    let mut rng = seed::rng(params.seed);
    let scored: Vec<Point3> = if src.len() > params.score_points && params.score_points > 0 {
        let mut idx = index::sample(&mut rng, src.len(), params.score_points).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| src[i]).collect()
    } else {
        src.clone()
    };
    let count_inliers = |t: &RigidTransform| {
        scored
            .iter()
            .filter(|p| tree.nearest(&t.apply(p)).is_some_and(|(_, d2)| d2 <= max_d2))
            .count()
    };

    let mut best: Option<(usize, RigidTransform)> = None;
    for _ in 0..params.iterations {
        let pick = index::sample(&mut rng, src.len(), 3);
        let (a, b, c) = (pick.index(0), pick.index(1), pick.index(2));
        let s = [src[a], src[b], src[c]];
        let t = [tgt[putative[a]], tgt[putative[b]], tgt[putative[c]]];
        if triangle_area(&s[0], &s[1], &s[2]) < DEGENERATE_AREA
            || triangle_area(&t[0], &t[1], &t[2]) < DEGENERATE_AREA
        {
            continue;
        }
        let Some(hyp) = fit_rigid(&s, &t) else {
            continue;
        };
        let score = count_inliers(&hyp);
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, hyp));
        }
    }
    let (_, mut transform) = best.ok_or(Error::NoSolution)?;

    let mut matches = match_within(src, &transform, &tree, max_d2);
    let mut history = Vec::new();
    history.push(rms(&matches));
    for _ in 0..params.refit_rounds {
        let Some(next) = refit(src, tgt, &matches) else {
            break;
        };
        let next_matches = match_within(src, &next, &tree, max_d2);
        if next_matches.len() < matches.len() {
            break;
        }
        let same_set = next_matches.len() == matches.len()
            && next_matches
                .iter()
                .zip(&matches)
                .all(|(a, b)| a.source_index == b.source_index && a.target_index == b.target_index);
        transform = next;
        matches = next_matches;
        history.push(rms(&matches));
        if same_set {
            break;
        }
    }

    Ok(RegistrationResult {
        transform,
        inlier_count: matches.len(),
        rms_error: rms(&matches),
        iterations: params.iterations,
        rms_history: history,
    })
}

/// Point-to-point ICP starting from `init`.
///
/// Every round matches each transformed source point to its nearest target point
/// within `max_correspondence_dist` and re-fits. The error is the capped RMS: an
/// unmatched source point counts as sitting exactly at the cap. A re-fit cannot
/// raise it (the fit lowers the matched sum and re-matching can only lower each
/// capped term), and a round that would, through rounding, is rejected.
pub fn icp_refine(
    source: &PointCloud,
    target: &PointCloud,
    init: &RigidTransform,
    params: &IcpParams,
) -> Result<RegistrationResult> {
    source.require_non_empty("source")?;
    target.require_non_empty("target")?;
    if !init.is_orthonormal(1e-6) {
        return Err(Error::invalid("initial transform is not rigid"));
    }
    if !(params.max_correspondence_dist > 0.0) {
        return Err(Error::invalid("max_correspondence_dist must be positive"));
    }
    let src = &source.points;
    let tgt = &target.points;
    let tree = KdTree::build(tgt);
    let max_d2 = params.max_correspondence_dist * params.max_correspondence_dist;
    let error = |m: &[Correspondence]| capped_rms(src.len(), m, max_d2);

    let mut transform = *init;
    let mut matches = match_within(src, &transform, &tree, max_d2);
    if matches.is_empty() {
        return Err(Error::Stall {
            transform,
            iterations: 0,
        });
    }
    let mut current = error(&matches);
    let mut history = alloc::vec![current];
    let mut iterations = 0;

    while iterations < params.max_iters && current > 0.0 {
        let Some(next) = refit(src, tgt, &matches) else {
            break;
        };
        iterations += 1;
        let next_matches = match_within(src, &next, &tree, max_d2);
        if next_matches.is_empty() {
            return Err(Error::Stall {
                transform,
                iterations,
            });
        }
        let next_rms = error(&next_matches);
        if next_rms > current {
            break;
        }
        let improvement = current - next_rms;
        transform = next;
        matches = next_matches;
        current = next_rms;
        history.push(current);
        if improvement < params.convergence_tol {
            break;
        }
    }

    Ok(RegistrationResult {
        transform,
        inlier_count: matches.len(),
        rms_error: current,
        iterations,
        rms_history: history,
    })
}

fn capped_rms(n: usize, matches: &[Correspondence], max_d2: f64) -> f64 {
    let matched = matches.iter().fold(0.0, |acc, c| acc + c.residual * c.residual);
    ((matched + (n - matches.len()) as f64 * max_d2) / n as f64).sqrt()
}

/// Maps every scan into the world frame and concatenates them.
pub fn fuse_views(scans: &[(PointCloud, RigidTransform)]) -> Result<PointCloud> {
    if scans.is_empty() {
        return Err(Error::invalid("no views to fuse"));
    }
    let total = scans.iter().map(|(c, _)| c.len()).sum();
    let mut points = Vec::with_capacity(total);
    for (cloud, t) in scans {
        points.extend(cloud.points.iter().map(|p| t.apply(p)));
    }
    Ok(PointCloud::with_frame(points, WORLD_FRAME))
}

/// Correspondence radii of the ICP schedule, as multiples of `max_correspondence_dist`.
pub const ICP_SCHEDULE: [f64; 3] = [5.0, 2.0, 1.0];

/// The part of `reference` facing a camera at `eye`: points whose offset from the
/// reference centroid points toward the camera.
pub fn facing_half(reference: &PointCloud, eye: &Point3) -> PointCloud {
    let Some(c) = reference.centroid() else {
        return reference.clone();
    };
    let view = *eye - c;
    let points: Vec<Point3> = reference
        .points
        .iter()
        .copied()
        .filter(|p| (*p - c).dot(&view) > 0.0)
        .collect();
    PointCloud::with_frame(points, reference.frame.clone())
}

/// Recovers one camera's extrinsics against a reference cloud already in the world
/// frame. The returned transform maps camera coordinates to world coordinates.
///
/// A single view sees only the near side of the object, so the coarse stages
/// register against the half of the reference that faces the camera position
/// implied by `initial`. RANSAC proposes a start; ICP runs a shrinking-radius
/// schedule from both that start and the initial guess, and the lower-RMS result
/// is polished against the whole reference.
pub fn register_view(
    scan: &PointCloud,
    reference: &PointCloud,
    initial: &RigidTransform,
    ransac: &RansacParams,
    icp: &IcpParams,
) -> Result<RegistrationResult> {
    let guessed = initial.apply_cloud(scan, &reference.frame);
    let mut near = facing_half(reference, &initial.translation);
    if near.len() < 3 {
        near = reference.clone();
    }
    let coarse = ransac_align(&guessed, &near, ransac)?;
    let mut best: Option<RegistrationResult> = None;
    for start in [RigidTransform::identity(), coarse.transform] {
        let mut t = start;
        let mut stage = None;
        for scale in ICP_SCHEDULE {
            let params = IcpParams {
                max_correspondence_dist: icp.max_correspondence_dist * scale,
                ..*icp
            };
            let r = icp_refine(&guessed, &near, &t, &params)?;
            t = r.transform;
            stage = Some(r);
        }
        let r = stage.expect("schedule is not empty");
        if best.as_ref().is_none_or(|b| r.rms_error < b.rms_error) {
            best = Some(r);
        }
    }
    let rough = best.expect("two starts");
    let fine = icp_refine(&guessed, reference, &rough.transform, icp)?;
    Ok(RegistrationResult {
        transform: fine.transform.compose(initial),
        ..fine
    })
}
