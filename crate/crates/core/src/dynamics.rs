//! Analytic grasp deformation.
//!
//! A grasp closes two fingers along the closing axis `(cos rot_z, sin rot_z, 0)`
//! from full opening `d_max` to separation `d`. Points inside the volume a finger's
//! inner face sweeps are carried along the closing axis onto that face. The material
//! around the sweep is then relaxed so no neighbor pair stretches beyond its rest
//! length by more than `max_stretch`: first each moved point hands its displacement beyond
//! `max_stretch` to its nearest free neighbors as a sideways push, then distance
//! constraints on the k-nearest-neighbor graph are projected Gauss–Seidel style with
//! the moved points pinned to the fingers.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::{median_spacing, Point3, PointCloud};
use crate::kdtree::KdTree;

/// 5-DoF parallel-gripper grasp: center (m), yaw (rad), final fingertip separation (m).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GraspAction {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub rot_z: f64,
    pub d: f64,
}

/// Wraps an angle into `[-π, π)`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r >= PI {
        -PI
    } else {
        r
    }
}

impl GraspAction {
    pub fn new(center: Point3, rot_z: f64, d: f64) -> Self {
        GraspAction {
            x: center.x,
            y: center.y,
            z: center.z,
            rot_z: normalize_angle(rot_z),
            d,
        }
    }

    /// A grasp that never closes: the identity under every dynamics model.
    pub fn noop(center: Point3, gripper: &GripperModel) -> Self {
        GraspAction::new(center, 0.0, gripper.max_opening)
    }

    pub fn center(&self) -> Point3 {
        Point3::new(self.x, self.y, self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.center().is_finite() && self.rot_z.is_finite() && self.d.is_finite()
    }

    /// Unit vector along which the fingers close.
    pub fn closing_axis(&self) -> Point3 {
        let (s, c) = self.rot_z.sin_cos();
        Point3::new(c, s, 0.0)
    }

    /// Horizontal unit vector along the finger width.
    pub fn lateral_axis(&self) -> Point3 {
        let (s, c) = self.rot_z.sin_cos();
        Point3::new(-s, c, 0.0)
    }

    /// The same grasp after rotating the world by `angle` about the vertical line through `pivot`.
    pub fn rotated_z(&self, angle: f64, pivot: Point3) -> GraspAction {
        let t = crate::transform::RigidTransform::rotation_z_about(angle, pivot);
        GraspAction::new(t.apply(&self.center()), self.rot_z + angle, self.d)
    }

    pub fn validate(&self, gripper: &GripperModel) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::invalid("grasp action has non-finite fields"));
        }
        if self.d < gripper.min_closing || self.d > gripper.max_opening {
            return Err(Error::invalid(alloc::format!(
                "fingertip separation {} outside [{}, {}]",
                self.d, gripper.min_closing, gripper.max_opening
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GripperModel {
    pub finger_width: f64,
    pub finger_height: f64,
    pub finger_thickness: f64,
    pub max_opening: f64,
    pub min_closing: f64,
}

impl Default for GripperModel {
    fn default() -> Self {
        GripperModel {
            finger_width: 0.02,
            finger_height: 0.03,
            finger_thickness: 0.01,
            max_opening: 0.08,
            min_closing: 0.006,
        }
    }
}

impl GripperModel {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.finger_width,
            self.finger_height,
            self.finger_thickness,
            self.max_opening,
            self.min_closing,
        ];
        if dims.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("gripper dimensions must be positive"));
        }
        if self.min_closing >= self.max_opening {
            return Err(Error::invalid("gripper needs min closing < max opening"));
        }
        Ok(())
    }
}

/// Box in a local frame `(closing, lateral, up)` around `center`. Coordinates along
/// the closing axis span `[u_min, u_max]`; the other two are symmetric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Point3,
    pub closing: Point3,
    pub lateral: Point3,
    pub u_min: f64,
    pub u_max: f64,
    pub half_width: f64,
    pub half_height: f64,
}

impl OrientedBox {
    #[inline]
    fn local(&self, p: &Point3) -> (f64, f64, f64) {
        let r = *p - self.center;
        (r.dot(&self.closing), r.dot(&self.lateral), r.z)
    }

    pub fn depth(&self) -> f64 {
        self.u_max - self.u_min
    }

    /// Closed containment: boundary points are inside.
    pub fn contains(&self, p: &Point3) -> bool {
        let (u, v, w) = self.local(p);
        u >= self.u_min
            && u <= self.u_max
            && v.abs() <= self.half_width
            && w.abs() <= self.half_height
    }

    /// Open containment shrunk by `tol`.
    pub fn contains_strictly(&self, p: &Point3, tol: f64) -> bool {
        let (u, v, w) = self.local(p);
        u > self.u_min + tol
            && u < self.u_max - tol
            && v.abs() < self.half_width - tol
            && w.abs() < self.half_height - tol
    }

    /// Euclidean distance from `p` to the box (0 inside).
    pub fn distance(&self, p: &Point3) -> f64 {
        let (u, v, w) = self.local(p);
        let du = (self.u_min - u).max(u - self.u_max).max(0.0);
        let dv = (v.abs() - self.half_width).max(0.0);
        let dw = (w.abs() - self.half_height).max(0.0);
        (du * du + dv * dv + dw * dw).sqrt()
    }
}

/// Volumes swept by the two finger faces while closing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweptRegion {
    /// Index 0 is the finger on the `+closing` side.
    pub fingers: [OrientedBox; 2],
    /// Half the final separation: the inner faces end at `±inner`.
    pub inner: f64,
    pub outer: f64,
}

pub fn swept_region(action: &GraspAction, gripper: &GripperModel) -> SweptRegion {
    let center = action.center();
    let closing = action.closing_axis();
    let lateral = action.lateral_axis();
    let inner = 0.5 * action.d;
    let outer = 0.5 * gripper.max_opening;
    let make = |u_min, u_max| OrientedBox {
        center,
        closing,
        lateral,
        u_min,
        u_max,
        half_width: 0.5 * gripper.finger_width,
        half_height: 0.5 * gripper.finger_height,
    };
    SweptRegion {
        fingers: [make(inner, outer), make(-outer, -inner)],
        inner,
        outer,
    }
}

impl SweptRegion {
    pub fn is_empty(&self) -> bool {
        self.outer <= self.inner
    }

    pub fn center(&self) -> Point3 {
        self.fingers[0].center
    }

    pub fn closing_axis(&self) -> Point3 {
        self.fingers[0].closing
    }

    fn face_position(&self, finger: usize, p: &Point3) -> Point3 {
        let b = &self.fingers[finger];
        let (u, _, _) = b.local(p);
        let face = if finger == 0 { self.inner } else { -self.inner };
        *p + b.closing * (face - u)
    }

    /// Where a point inside a swept box ends up: on that finger's final inner face.
    pub fn project(&self, p: &Point3) -> Option<Point3> {
        if self.is_empty() {
            return None;
        }
        (0..2)
            .find(|&f| self.fingers[f].contains(p))
            .map(|f| self.face_position(f, p))
    }

    /// Like [`project`](Self::project) but only for points strictly inside a box.
    pub fn project_interior(&self, p: &Point3, tol: f64) -> Option<Point3> {
        if self.is_empty() {
            return None;
        }
        (0..2)
            .find(|&f| self.fingers[f].contains_strictly(p, tol))
            .map(|f| self.face_position(f, p))
    }

    pub fn is_strictly_inside(&self, p: &Point3, tol: f64) -> bool {
        !self.is_empty() && self.fingers.iter().any(|b| b.contains_strictly(p, tol))
    }

    /// Distance to the union of the two boxes. Infinite when nothing is swept.
    pub fn distance(&self, p: &Point3) -> f64 {
        if self.is_empty() {
            return f64::INFINITY;
        }
        self.fingers[0].distance(p).min(self.fingers[1].distance(p))
    }

    /// Horizontal direction, along the finger width, pointing away from the grasp center.
    fn outward_tangent(&self, p: &Point3) -> Point3 {
        let b = &self.fingers[0];
        let (_, v, _) = b.local(p);
        if v < 0.0 {
            -b.lateral
        } else {
            b.lateral
        }
    }
}

/// Limits of the material relaxation that follows the finger sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Constraints {
    /// Largest allowed change (m) of a neighbor-pair distance.
    pub max_stretch: f64,
    /// Neighbors per point in the constraint graph, and receivers of pushed excess.
    pub neighbors: usize,
    pub max_iterations: usize,
    /// Only points within this distance (m) of the swept boxes may be redistributed.
    pub radius: f64,
}

/// Default ratio of `max_stretch` to the median nearest-neighbor spacing.
pub const STRETCH_PER_SPACING: f64 = 1.2;

impl Constraints {
    pub fn with_max_stretch(max_stretch: f64) -> Self {
        Constraints {
            max_stretch,
            neighbors: 8,
            max_iterations: 50,
            radius: 0.01,
        }
    }

    /// `max_stretch` = 1.2 × median nearest-neighbor spacing of `cloud`.
    pub fn for_cloud(cloud: &PointCloud) -> Result<Self> {
        Ok(Self::with_max_stretch(STRETCH_PER_SPACING * median_spacing(cloud)?))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_stretch.is_finite() && self.max_stretch > 0.0) {
            return Err(Error::invalid("max_stretch must be positive"));
        }
        if self.neighbors == 0 {
            return Err(Error::invalid("constraint graph needs at least one neighbor"));
        }
        if !(self.radius.is_finite() && self.radius >= 0.0) {
            return Err(Error::invalid("redistribution radius must be non-negative"));
        }
        Ok(())
    }
}

/// Points closer than this to a box boundary do not count as penetrating it.
pub const PENETRATION_TOL: f64 = 1e-12;

/// Deforms `cloud` by one grasp. Output has the same size and order as the input.
pub fn apply_grasp(
    cloud: &PointCloud,
    action: &GraspAction,
    gripper: &GripperModel,
    constraints: &Constraints,
) -> Result<PointCloud> {
    cloud.require_non_empty("clay")?;
    gripper.validate()?;
    action.validate(gripper)?;
    constraints.validate()?;

    let region = swept_region(action, gripper);
    let mut out = cloud.clone();
    if region.is_empty() {
        return Ok(out);
    }
    let mut moved = vec![false; cloud.len()];
    for (i, p) in cloud.points.iter().enumerate() {
        if let Some(q) = region.project(p) {
            out.points[i] = q;
            moved[i] = true;
        }
    }
    if moved.iter().any(|&m| m) {
        redistribute(&cloud.points, &mut out.points, &moved, &region, constraints);
    }
    Ok(out)
}

fn redistribute(
    orig: &[Point3],
    out: &mut [Point3],
    moved: &[bool],
    region: &SweptRegion,
    c: &Constraints,
) {
    let n = orig.len();
    let dist: Vec<f64> = orig.iter().map(|p| region.distance(p)).collect();
    let free: Vec<bool> = (0..n).map(|i| !moved[i] && dist[i] <= c.radius).collect();

    // Constraint graph lives on the moved points, the free shell, and one more shell
    // of pinned points that anchors it.
    let support: Vec<usize> = (0..n)
        .filter(|&i| moved[i] || dist[i] <= 2.0 * c.radius)
        .collect();
    let support_pts: Vec<Point3> = support.iter().map(|&i| orig[i]).collect();
    let tree = KdTree::build(&support_pts);

    for m in (0..n).filter(|&i| moved[i]) {
        let excess = out[m].distance(&orig[m]) - c.max_stretch;
        if excess <= 0.0 {
            continue;
        }
        let receivers = tree.k_nearest_filtered(&orig[m], c.neighbors, |s| free[support[s]]);
        if receivers.is_empty() {
            continue;
        }
        let share = excess / receivers.len() as f64;
        for (s, _) in receivers {
            let j = support[s];
            let dir = region.outward_tangent(&out[j]);
            out[j] += dir * share;
        }
    }

    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (s, &i) in support.iter().enumerate() {
        if !(moved[i] || free[i]) {
            continue;
        }
        for (t, _) in tree.k_nearest_filtered(&orig[i], c.neighbors, |t| t != s) {
            let j = support[t];
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            edges.push((a, b, orig[a].distance(&orig[b])));
        }
    }
    edges.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.cmp(&y.1)));
    edges.dedup_by(|x, y| x.0 == y.0 && x.1 == y.1);

    let weight = |i: usize| if free[i] { 1.0 } else { 0.0 };
    for _ in 0..c.max_iterations {
        let mut violated = false;
        for &(i, j, rest) in &edges {
            let (wi, wj) = (weight(i), weight(j));
            if wi + wj == 0.0 {
                continue;
            }
            let delta = out[j] - out[i];
            let len = delta.norm();
            // Stretch only. Also bounding compression makes the sweep sensitive to
            // rounding, and the result stops commuting with rotations.
            if len - rest <= c.max_stretch || len < 1e-15 {
                continue;
            }
            violated = true;
            let goal = rest + c.max_stretch;
            let corr = delta * ((len - goal) / len);
            out[i] += corr * (wi / (wi + wj));
            out[j] -= corr * (wj / (wi + wj));
        }
        for i in (0..n).filter(|&i| free[i]) {
            if let Some(q) = region.project_interior(&out[i], PENETRATION_TOL) {
                out[i] = q;
            }
        }
        if !violated {
            break;
        }
    }
}

/// The sweep rule alone, applied to a sparse centroid cloud.
pub fn propagate_centroids(centroids: &[Point3], action: &GraspAction, gripper: &GripperModel) -> Result<Vec<Point3>> {
    if centroids.is_empty() {
        return Err(Error::invalid("no centroids to propagate"));
    }
    gripper.validate()?;
    action.validate(gripper)?;
    let region = swept_region(action, gripper);
    Ok(centroids
        .iter()
        .map(|p| region.project(p).unwrap_or(*p))
        .collect())
}

/// Predicts the clay state after a grasp.
pub trait Dynamics {
    fn predict(&self, cloud: &PointCloud, action: &GraspAction) -> Result<PointCloud>;
}

impl<D: Dynamics + ?Sized> Dynamics for &D {
    fn predict(&self, cloud: &PointCloud, action: &GraspAction) -> Result<PointCloud> {
        (**self).predict(cloud, action)
    }
}

/// [`apply_grasp`] with fixed gripper and constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticDynamics {
    pub gripper: GripperModel,
    pub constraints: Constraints,
}

impl AnalyticDynamics {
    /// Constraints sized from the spacing of `initial`.
    pub fn for_initial(gripper: GripperModel, initial: &PointCloud) -> Result<Self> {
        Ok(AnalyticDynamics {
            gripper,
            constraints: Constraints::for_cloud(initial)?,
        })
    }
}

impl Dynamics for AnalyticDynamics {
    fn predict(&self, cloud: &PointCloud, action: &GraspAction) -> Result<PointCloud> {
        apply_grasp(cloud, action, &self.gripper, &self.constraints)
    }
}
