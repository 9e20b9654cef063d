//! Desk-scale stand-in for the robot and the clay: the initial cylinder, the
//! target library, an environment stepper with jitter, and a synthetic scanner.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_4, PI};
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dynamics::{AnalyticDynamics, Dynamics, GraspAction};
use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, WORLD_FRAME};
use crate::planner::Environment;
use crate::preprocess::{complete_base_at, Label, RawScan};
use crate::sampling::downsample_random;
use crate::seed;
use crate::shapes::{rectangle, Solid};
use crate::transform::RigidTransform;

/// Height of the stage surface the clay rests on.
pub const STAGE_Z: f64 = 0.0;
pub const CLAY_RADIUS: f64 = 0.03;
pub const CLAY_HEIGHT: f64 = 0.025;
pub const MIN_CLAY_POINTS: usize = 100;

pub fn initial_clay_solid() -> Solid {
    Solid::Cylinder {
        radius: CLAY_RADIUS,
        height: CLAY_HEIGHT,
    }
}

fn sample_solid(solid: &Solid, n: usize, seed: u64) -> Result<PointCloud> {
    if n < MIN_CLAY_POINTS {
        return Err(Error::invalid(alloc::format!(
            "need at least {MIN_CLAY_POINTS} surface points, got {n}"
        )));
    }
    let mut rng = seed::rng(seed::derive(seed, "surface"));
    Ok(PointCloud::new(solid.sample_surface(n, &mut rng)))
}

/// Surface samples of the starting clay cylinder, base on the stage.
pub fn make_initial_clay(n: usize, seed: u64) -> Result<PointCloud> {
    sample_solid(&initial_clay_solid(), n, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    X,
    T,
    Square,
    Line,
    Cylinder,
    Triangle,
    Cone,
    Pyramid,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 8] = [
        ShapeKind::X,
        ShapeKind::T,
        ShapeKind::Square,
        ShapeKind::Line,
        ShapeKind::Cylinder,
        ShapeKind::Triangle,
        ShapeKind::Cone,
        ShapeKind::Pyramid,
    ];

    /// The six targets used in the planning benchmarks.
    pub const BENCHMARK: [ShapeKind; 6] = [
        ShapeKind::X,
        ShapeKind::T,
        ShapeKind::Square,
        ShapeKind::Line,
        ShapeKind::Cylinder,
        ShapeKind::Triangle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::X => "X",
            ShapeKind::T => "T",
            ShapeKind::Square => "square",
            ShapeKind::Line => "line",
            ShapeKind::Cylinder => "cylinder",
            ShapeKind::Triangle => "triangle",
            ShapeKind::Cone => "cone",
            ShapeKind::Pyramid => "pyramid",
        }
    }

    /// Geometry of the shape; every solid is centered on the origin in x–y
    /// and has roughly the volume of the initial clay.
    pub fn solid(&self) -> Solid {
        match self {
            ShapeKind::X => {
                let (l, w) = (0.04, 0.01);
                let plus = [
                    [l, -w],
                    [l, w],
                    [w, w],
                    [w, l],
                    [-w, l],
                    [-w, w],
                    [-l, w],
                    [-l, -w],
                    [-w, -w],
                    [-w, -l],
                    [w, -l],
                    [w, -w],
                ];
                let (s, c) = FRAC_PI_4.sin_cos();
                Solid::Prism {
                    outline: plus.iter().map(|&[x, y]| [c * x - s * y, s * x + c * y]).collect(),
                    height: 0.025,
                }
            }
            ShapeKind::T => {
                // Stem 0.02 × 0.06 under a 0.08 × 0.02 bar, area centroid at the origin.
                let y0 = -0.148 / 2.8;
                Solid::Prism {
                    outline: alloc::vec![
                        [-0.01, y0],
                        [0.01, y0],
                        [0.01, y0 + 0.06],
                        [0.04, y0 + 0.06],
                        [0.04, y0 + 0.08],
                        [-0.04, y0 + 0.08],
                        [-0.04, y0 + 0.06],
                        [-0.01, y0 + 0.06],
                    ],
                    height: 0.025,
                }
            }
            ShapeKind::Square => Solid::Prism {
                outline: rectangle(0.0, 0.0, 0.06, 0.06),
                height: 0.02,
            },
            ShapeKind::Line => Solid::Prism {
                outline: rectangle(0.0, 0.0, 0.108, 0.024),
                height: 0.0273,
            },
            ShapeKind::Cylinder => initial_clay_solid(),
            ShapeKind::Triangle => {
                let r = 0.08 / 3f64.sqrt();
                Solid::Prism {
                    outline: (0..3)
                        .map(|i| {
                            let a = PI / 2.0 + i as f64 * 2.0 * PI / 3.0;
                            [r * a.cos(), r * a.sin()]
                        })
                        .collect(),
                    height: 0.025,
                }
            }
            ShapeKind::Cone => Solid::Cone {
                radius: 0.035,
                height: 0.055,
            },
            ShapeKind::Pyramid => Solid::Pyramid {
                side: 0.06,
                height: 0.059,
            },
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(alloc::format!("unknown target shape {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetShape {
    pub kind: ShapeKind,
    pub solid: Solid,
    pub cloud: PointCloud,
}

impl TargetShape {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }
}

pub fn make_target(name: &str, n: usize, seed: u64) -> Result<TargetShape> {
    let kind: ShapeKind = name.parse()?;
    let solid = kind.solid();
    let cloud = sample_solid(&solid, n, seed)?;
    Ok(TargetShape { kind, solid, cloud })
}

/// An L-shaped block with unequal arms; it has no rotational symmetry, so
/// registration against it is well posed.
pub fn calibration_solid() -> Solid {
    let outline = [
        [0.0, 0.0],
        [0.08, 0.0],
        [0.08, 0.02],
        [0.025, 0.02],
        [0.025, 0.05],
        [0.0, 0.05],
    ];
    // Shift so the outline's area centroid sits on the origin.
    let (a1, c1) = (0.08 * 0.02, [0.04, 0.01]);
    let (a2, c2) = (0.025 * 0.03, [0.0125, 0.035]);
    let cx = (a1 * c1[0] + a2 * c2[0]) / (a1 + a2);
    let cy = (a1 * c1[1] + a2 * c2[1]) / (a1 + a2);
    Solid::Prism {
        outline: outline.iter().map(|&[x, y]| [x - cx, y - cy]).collect(),
        height: 0.03,
    }
}

pub fn make_calibration_object(n: usize, seed: u64) -> Result<PointCloud> {
    sample_solid(&calibration_solid(), n, seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvConfig {
    /// Per-axis Gaussian jitter (m) added after each grasp.
    pub noise_sigma: f64,
    /// Clamp to the stage, rebuild the base plane, and resample to the input size.
    pub reshell: bool,
    pub seed: u64,
    pub base_band: f64,
    pub grid_step: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            noise_sigma: 0.0,
            reshell: false,
            seed: 0,
            base_band: 0.003,
            grid_step: 0.002,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma must be finite and non-negative"));
        }
        Ok(())
    }
}

fn jitter<R: Rng>(p: &Point3, noise: &Normal<f64>, rng: &mut R) -> Point3 {
    Point3::new(
        p.x + noise.sample(rng),
        p.y + noise.sample(rng),
        p.z + noise.sample(rng),
    )
}

fn normal(sigma: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| Error::invalid(alloc::format!("bad noise scale: {e}")))
}

/// One simulated grasp: the analytic dynamics, then jitter, then optional re-shelling.
pub fn env_step(
    cloud: &PointCloud,
    action: &GraspAction,
    dynamics: &AnalyticDynamics,
    cfg: &EnvConfig,
) -> Result<PointCloud> {
    cfg.validate()?;
    let mut out = dynamics.predict(cloud, action)?;
    if cfg.noise_sigma > 0.0 {
        let noise = normal(cfg.noise_sigma)?;
        let mut rng = seed::rng(seed::derive(cfg.seed, "jitter"));
        for p in &mut out.points {
            *p = jitter(p, &noise, &mut rng);
        }
    }
    if cfg.reshell {
        let n = out.len();
        for p in &mut out.points {
            p.z = p.z.max(STAGE_Z);
        }
        let closed = complete_base_at(&out, STAGE_Z, cfg.base_band, cfg.grid_step)?;
        out = downsample_random(&closed, n, seed::derive(cfg.seed, "reshell"))?;
    }
    Ok(out)
}

/// Simulated robot. Each call draws fresh noise from a per-call seed.
#[derive(Debug, Clone)]
pub struct SimEnv {
    pub dynamics: AnalyticDynamics,
    pub cfg: EnvConfig,
    calls: u64,
}

impl SimEnv {
    pub fn new(dynamics: AnalyticDynamics, cfg: EnvConfig) -> Self {
        SimEnv { dynamics, cfg, calls: 0 }
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }
}

impl Environment for SimEnv {
    fn step(&mut self, cloud: &PointCloud, action: &GraspAction) -> Result<PointCloud> {
        let cfg = EnvConfig {
            seed: seed::derive_indexed(self.cfg.seed, "env", self.calls),
            ..self.cfg
        };
        self.calls += 1;
        env_step(cloud, action, &self.dynamics, &cfg)
    }
}

/// Camera-to-world transform for a camera at `eye` looking at `target`,
/// with its optical axis as local +z and the world +z as "up".
pub fn look_at(eye: Point3, target: Point3) -> Result<RigidTransform> {
    let forward = (target - eye)
        .normalized()
        .ok_or_else(|| Error::invalid("camera eye coincides with its target"))?;
    let up = Point3::new(0.0, 0.0, 1.0);
    let right = forward
        .cross(&up)
        .normalized()
        .or_else(|| forward.cross(&Point3::new(1.0, 0.0, 0.0)).normalized())
        .ok_or_else(|| Error::invalid("degenerate camera orientation"))?;
    let down = forward.cross(&right);
    let rotation = nalgebra::Matrix3::new(
        right.x, down.x, forward.x,
        right.y, down.y, forward.y,
        right.z, down.z, forward.z,
    );
    RigidTransform::new(rotation, eye)
}

/// `count` cameras evenly spaced on a horizontal circle around `center`, all facing it.
pub fn camera_ring(count: usize, radius: f64, center: Point3) -> Result<Vec<RigidTransform>> {
    if count == 0 {
        return Err(Error::invalid("need at least one camera"));
    }
    (0..count)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / count as f64;
            look_at(center + Point3::new(radius * a.cos(), radius * a.sin(), 0.0), center)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Drop points facing away from the camera.
    pub cull_hidden: bool,
    /// Stage-disk points per scan, labeled `stage`.
    pub stage_points: usize,
    /// Table-plane points per scan, labeled `table`.
    pub table_points: usize,
    pub stage_radius: f64,
    pub table_z: f64,
    pub table_half_extent: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            cull_hidden: true,
            stage_points: 300,
            table_points: 300,
            stage_radius: 0.06,
            table_z: -0.05,
            table_half_extent: 0.25,
        }
    }
}

impl ScanOptions {
    /// Object points only, no culling.
    pub fn object_only() -> Self {
        ScanOptions {
            cull_hidden: false,
            stage_points: 0,
            table_points: 0,
            ..Default::default()
        }
    }

    /// Object points only, culled.
    pub fn object_only_culled() -> Self {
        ScanOptions {
            cull_hidden: true,
            ..ScanOptions::object_only()
        }
    }
}

/// The frame name used for scans from camera `index`.
pub fn camera_frame(index: usize) -> String {
    alloc::format!("camera{index}")
}

/// Scans of a world-frame `object`, one per camera-to-world transform, each
/// expressed in its camera frame. Object points are labeled `clay`.
pub fn synth_scan(
    object: &PointCloud,
    cameras: &[RigidTransform],
    sensor_noise: f64,
    seed: u64,
    opts: &ScanOptions,
) -> Result<Vec<RawScan>> {
    if cameras.is_empty() {
        return Err(Error::invalid("need at least one camera"));
    }
    object.require_non_empty("object")?;
    let center = object.centroid().unwrap_or_default();
    let noise = if sensor_noise > 0.0 { Some(normal(sensor_noise)?) } else { None };
    let mut scans = Vec::with_capacity(cameras.len());
    for (i, cam) in cameras.iter().enumerate() {
        let mut rng = seed::rng(seed::derive_indexed(seed, "scan", i as u64));
        let to_camera = cam.inverse();
        let view = cam.translation - center;
        let mut scan = RawScan::default();
        let visible = object
            .points
            .iter()
            .filter(|p| !opts.cull_hidden || (**p - center).dot(&view) > 0.0);
        scan.extend(visible.map(|p| to_camera.apply(p)), Label::Clay);
        let stage: Vec<Point3> = (0..opts.stage_points)
            .map(|_| {
                let r = opts.stage_radius * rng.random::<f64>().sqrt();
                let a = rng.random_range(0.0..2.0 * PI);
                to_camera.apply(&Point3::new(r * a.cos(), r * a.sin(), STAGE_Z))
            })
            .collect();
        scan.extend(stage, Label::Stage);
        let h = opts.table_half_extent;
        let table: Vec<Point3> = (0..opts.table_points)
            .map(|_| {
                let p = Point3::new(rng.random_range(-h..h), rng.random_range(-h..h), opts.table_z);
                to_camera.apply(&p)
            })
            .collect();
        scan.extend(table, Label::Table);
        if let Some(noise) = &noise {
            for p in &mut scan.points {
                *p = jitter(p, noise, &mut rng);
            }
        }
        scans.push(scan);
    }
    Ok(scans)
}

/// The clay points of a scan as a cloud in camera frame `index`.
pub fn scan_clay(scan: &RawScan, index: usize) -> PointCloud {
    PointCloud::with_frame(
        scan.points
            .iter()
            .zip(&scan.labels)
            .filter(|(_, l)| **l == Label::Clay)
            .map(|(p, _)| *p)
            .collect(),
        camera_frame(index),
    )
}

/// Places a world-frame cloud's frame label explicitly.
pub fn in_world(points: Vec<Point3>) -> PointCloud {
    PointCloud::with_frame(points, WORLD_FRAME)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chamfer::chamfer_distance;

    #[test]
    fn clay_has_stated_size() {
        let c = make_initial_clay(2048, 1).unwrap();
        assert_eq!(c.len(), 2048);
        let b = c.bounds().unwrap();
        assert_eq!(b.min.z, STAGE_Z);
        assert!((b.max.z - CLAY_HEIGHT).abs() < 1e-12);
        let r = c.iter().map(|p| (p.x * p.x + p.y * p.y).sqrt()).fold(0.0, f64::max);
        assert!(r <= CLAY_RADIUS + 1e-12 && r > CLAY_RADIUS - 1e-3);
        assert!(make_initial_clay(99, 1).unwrap_err().is_invalid_input());
    }

    #[test]
    fn names_round_trip() {
        for k in ShapeKind::ALL {
            assert_eq!(k.name().parse::<ShapeKind>().unwrap(), k);
        }
        assert!(make_target("blob", 200, 0).unwrap_err().is_invalid_input());
    }

    #[test]
    fn cylinder_target_is_the_clay() {
        let t = make_target("cylinder", 500, 4).unwrap();
        assert_eq!(chamfer_distance(&t.cloud, &make_initial_clay(500, 4).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn calibration_object_is_centered() {
        let Solid::Prism { outline, .. } = calibration_solid() else { unreachable!() };
        let (mut ax, mut ay, mut a) = (0.0, 0.0, 0.0);
        for i in 0..outline.len() {
            let p = outline[i];
            let q = outline[(i + 1) % outline.len()];
            let cr = p[0] * q[1] - q[0] * p[1];
            a += cr;
            ax += (p[0] + q[0]) * cr;
            ay += (p[1] + q[1]) * cr;
        }
        assert!((ax / (3.0 * a)).abs() < 1e-12 && (ay / (3.0 * a)).abs() < 1e-12);
    }

    #[test]
    fn look_at_points_optical_axis() {
        let cam = look_at(Point3::new(0.5, 0.0, 0.01), Point3::new(0.0, 0.0, 0.01)).unwrap();
        assert!(cam.is_orthonormal(1e-12));
        let ahead = cam.apply(&Point3::new(0.0, 0.0, 0.5));
        assert!(ahead.distance(&Point3::new(0.0, 0.0, 0.01)) < 1e-12);
    }
}
