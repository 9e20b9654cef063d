//! Points, clouds and boxes.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};


use crate::error::{Error, Result};

/// A point (or vector) in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3::new(0.0, 0.0, 0.0);

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    #[inline]
    pub fn cross(&self, other: &Point3) -> Point3 {
        Point3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    #[inline]
    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Squared Euclidean distance. Every nearest-neighbor routine uses this exact expression.
    #[inline]
    pub fn distance_squared(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn distance(&self, other: &Point3) -> f64 {
        self.distance_squared(other).sqrt()
    }

    /// Unit vector in the same direction, or `None` for a (near) zero vector.
    pub fn normalized(&self) -> Option<Point3> {
        let n = self.norm();
        if n > 1e-300 && n.is_finite() {
            Some(*self * (1.0 / n))
        } else {
            None
        }
    }

    #[inline]
    pub fn axis(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl Add for Point3 {
    type Output = Point3;
    #[inline]
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Point3 {
    #[inline]
    fn add_assign(&mut self, o: Point3) {
        *self = *self + o;
    }
}

impl Sub for Point3 {
    type Output = Point3;
    #[inline]
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Point3 {
    #[inline]
    fn sub_assign(&mut self, o: Point3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    #[inline]
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    #[inline]
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Frame label used when a cloud has not been tagged otherwise.
pub const WORLD_FRAME: &str = "world";

/// An ordered set of points tagged with the frame they are expressed in.
///
/// Order carries no meaning for the metrics; it only matters for seeded sampling,
/// where the seed picks indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub frame: String,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self::with_frame(points, WORLD_FRAME)
    }

    pub fn with_frame(points: Vec<Point3>, frame: impl Into<String>) -> Self {
        PointCloud {
            points,
            frame: frame.into(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Point3> {
        self.points.iter()
    }

    /// Same frame, new points.
    pub fn map_points(&self, f: impl FnMut(&Point3) -> Point3) -> PointCloud {
        PointCloud::with_frame(self.points.iter().map(f).collect(), self.frame.clone())
    }

    /// Checks that every point is finite.
    pub fn validate(&self) -> Result<()> {
        match self.points.iter().position(|p| !p.is_finite()) {
            Some(i) => Err(Error::invalid(alloc::format!("point {i} is not finite"))),
            None => Ok(()),
        }
    }

    pub(crate) fn require_non_empty(&self, what: &str) -> Result<()> {
        if self.points.is_empty() {
            Err(Error::invalid(alloc::format!("{what} cloud is empty")))
        } else {
            Ok(())
        }
    }

    pub fn centroid(&self) -> Option<Point3> {
        centroid(&self.points)
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::enclosing(&self.points)
    }
}

impl FromIterator<Point3> for PointCloud {
    fn from_iter<I: IntoIterator<Item = Point3>>(iter: I) -> Self {
        PointCloud::new(iter.into_iter().collect())
    }
}

pub fn centroid(points: &[Point3]) -> Option<Point3> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Point3::ORIGIN, |acc, p| acc + *p);
    Some(sum * (1.0 / points.len() as f64))
}

/// Closed axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    /// Fails unless `min < max` on every axis.
    pub fn new(min: Point3, max: Point3) -> Result<Self> {
        let b = Aabb { min, max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::invalid("box corners must be finite"));
        }
        if self.min.x < self.max.x && self.min.y < self.max.y && self.min.z < self.max.z {
            Ok(())
        } else {
            Err(Error::invalid("box needs min < max on every axis"))
        }
    }

    pub fn enclosing(points: &[Point3]) -> Option<Aabb> {
        let first = *points.first()?;
        let mut b = Aabb {
            min: first,
            max: first,
        };
        for p in &points[1..] {
            b.min = Point3::new(b.min.x.min(p.x), b.min.y.min(p.y), b.min.z.min(p.z));
            b.max = Point3::new(b.max.x.max(p.x), b.max.y.max(p.y), b.max.z.max(p.z));
        }
        Some(b)
    }

    #[inline]
    pub fn contains(&self, p: &Point3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn clamp(&self, p: &Point3) -> Point3 {
        Point3::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
            p.z.clamp(self.min.z, self.max.z),
        )
    }

    pub fn center(&self) -> Point3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Point3 {
        self.max - self.min
    }
}

/// Median distance from each point to its nearest other point.
pub fn median_spacing(cloud: &PointCloud) -> Result<f64> {
    if cloud.len() < 2 {
        return Err(Error::invalid("median spacing needs at least two points"));
    }
    let tree = crate::kdtree::KdTree::build(&cloud.points);
    let mut d: Vec<f64> = cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            tree.nearest_filtered(p, |j| j != i)
                .map(|(_, d2)| d2.sqrt())
                .unwrap_or(0.0)
        })
        .collect();
    d.sort_by(|a, b| a.total_cmp(b));
    let n = d.len();
    Ok(if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_is_closed() {
        let b = Aabb::new(Point3::ORIGIN, Point3::new(1.0, 1.0, 1.0)).unwrap();
        assert!(b.contains(&Point3::new(1.0, 0.0, 0.5)));
        assert!(!b.contains(&Point3::new(1.0 + 1e-12, 0.0, 0.5)));
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(Aabb::new(Point3::ORIGIN, Point3::new(1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn non_finite_point_rejected() {
        let c = PointCloud::new(alloc::vec![Point3::ORIGIN, Point3::new(f64::NAN, 0.0, 0.0)]);
        assert!(c.validate().is_err());
    }

    #[test]
    fn spacing_of_a_grid() {
        let pts = (0..10).map(|i| Point3::new(i as f64 * 0.5, 0.0, 0.0)).collect();
        assert_eq!(median_spacing(&PointCloud::new(pts)).unwrap(), 0.5);
    }
}
