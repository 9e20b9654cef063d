//! Flat `key = value` run configuration (TOML syntax). Unknown keys are rejected;
//! every key has a default, and the fully resolved set is echoed next to outputs.

use std::path::{Path, PathBuf};

use claysculpt_core::dynamics::{Constraints, STRETCH_PER_SPACING};
use claysculpt_core::geom::median_spacing;
use claysculpt_core::kmeans::KMeansParams;
use claysculpt_core::planner::{PlannerConfig, SamplerKind, StopRule};
use claysculpt_core::registration::{IcpParams, RansacParams};
use claysculpt_core::sampler::SamplerConfig;
use claysculpt_core::{seed, Aabb, AnalyticDynamics, EnvConfig, GripperModel, Point3, PointCloud, PreprocessConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// error | warn | info | debug | trace
    pub verbosity: String,
    /// Points per generated cloud and per preprocessed shell.
    pub points: usize,

    pub finger_width: f64,
    pub finger_height: f64,
    pub finger_thickness: f64,
    pub max_opening: f64,
    pub min_closing: f64,

    /// 0 derives it from the initial cloud's median spacing.
    pub max_stretch: f64,
    pub redistribution_neighbors: usize,
    pub redistribution_iterations: usize,
    pub redistribution_radius: f64,

    /// geometric | random
    pub sampler: String,
    /// 0 picks the sampler's default (35 geometric, 2500 random).
    pub samples: usize,
    pub n_clusters: usize,
    pub kmeans_max_iters: usize,
    pub kmeans_tol: f64,
    pub max_grasps: usize,
    /// Stop once cd < stop_fraction × initial cd ...
    pub stop_fraction: f64,
    /// ... or, when positive, once cd < stop_absolute.
    pub stop_absolute: f64,
    pub include_noop: bool,
    pub workspace_half_xy: f64,
    pub workspace_z_min: f64,
    pub workspace_z_max: f64,
    /// Candidate-evaluation threads; 0 lets the pool decide.
    pub threads: usize,

    pub noise_sigma: f64,
    pub reshell: bool,

    pub crop_half_xy: f64,
    pub crop_z_min: f64,
    pub crop_z_max: f64,
    pub stage_z: f64,
    pub base_band: f64,
    pub grid_step: f64,
    pub outlier_neighbors: usize,
    pub outlier_std_ratio: f64,

    pub ransac_iterations: usize,
    pub inlier_threshold: f64,
    pub ransac_score_points: usize,
    pub icp_max_iters: usize,
    pub icp_max_dist: f64,
    pub icp_tol: f64,
    /// Camera names for `calibrate`, in scan order; empty uses each scan's frame.
    pub cameras: Vec<String>,

    pub scan_cameras: usize,
    pub camera_radius: f64,
    pub sensor_noise: f64,
    pub perturb_deg: f64,
    pub perturb_m: f64,
    pub calibration_points: usize,
    pub scene_points: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let g = GripperModel::default();
        let c = Constraints::with_max_stretch(1.0);
        let k = KMeansParams::default();
        let ws = claysculpt_core::sampler::default_workspace();
        let pre = PreprocessConfig::default();
        let ransac = RansacParams::default();
        let icp = IcpParams::default();
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            verbosity: "warn".into(),
            points: 2048,
            finger_width: g.finger_width,
            finger_height: g.finger_height,
            finger_thickness: g.finger_thickness,
            max_opening: g.max_opening,
            min_closing: g.min_closing,
            max_stretch: 0.0,
            redistribution_neighbors: c.neighbors,
            redistribution_iterations: c.max_iterations,
            redistribution_radius: c.radius,
            sampler: "geometric".into(),
            samples: 0,
            n_clusters: 10,
            kmeans_max_iters: k.max_iters,
            kmeans_tol: k.tol,
            max_grasps: 10,
            stop_fraction: 0.02,
            stop_absolute: 0.0,
            include_noop: true,
            workspace_half_xy: ws.max.x,
            workspace_z_min: ws.min.z,
            workspace_z_max: ws.max.z,
            threads: 0,
            noise_sigma: 0.0,
            reshell: false,
            crop_half_xy: pre.bounds.max.x,
            crop_z_min: pre.bounds.min.z,
            crop_z_max: pre.bounds.max.z,
            stage_z: 0.0,
            base_band: pre.base_band,
            grid_step: pre.grid_step,
            outlier_neighbors: pre.k_neighbors,
            outlier_std_ratio: pre.std_ratio,
            ransac_iterations: ransac.iterations,
            inlier_threshold: ransac.inlier_threshold,
            ransac_score_points: ransac.score_points,
            icp_max_iters: icp.max_iters,
            icp_max_dist: icp.max_correspondence_dist,
            icp_tol: icp.convergence_tol,
            cameras: Vec::new(),
            scan_cameras: 4,
            camera_radius: 0.5,
            sensor_noise: 0.001,
            perturb_deg: 10.0,
            perturb_m: 0.03,
            calibration_points: 4000,
            scene_points: 300,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text.as_bytes()[..s.start.min(text.len())].iter().filter(|&&b| b == b'\n').count() + 1);
            Error::parse(path, line, e.message().to_owned())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&io::read_text(path)?, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Writes the resolved configuration into `dir`.
    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        io::write_text(&dir.join(RESOLVED_CONFIG), &self.to_toml())
    }

    /// Seed for one named stage of this run.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        seed::derive(self.seed, stage)
    }

    pub fn sampler_kind(&self) -> Result<SamplerKind> {
        self.sampler.parse().map_err(|_| {
            Error::usage(format!("sampler must be geometric or random, got {:?}", self.sampler))
        })
    }

    /// Fills in defaults that depend on other keys.
    pub fn resolve(mut self) -> Result<Self> {
        let kind = self.sampler_kind()?;
        if self.samples == 0 {
            self.samples = kind.default_samples();
        }
        self.gripper().validate()?;
        self.env().validate()?;
        Ok(self)
    }

    pub fn gripper(&self) -> GripperModel {
        GripperModel {
            finger_width: self.finger_width,
            finger_height: self.finger_height,
            finger_thickness: self.finger_thickness,
            max_opening: self.max_opening,
            min_closing: self.min_closing,
        }
    }

    /// Dynamics for a run starting from `initial`.
    pub fn dynamics(&self, initial: &PointCloud) -> Result<AnalyticDynamics> {
        let max_stretch = if self.max_stretch > 0.0 {
            self.max_stretch
        } else {
            STRETCH_PER_SPACING * median_spacing(initial)?
        };
        let constraints = Constraints {
            max_stretch,
            neighbors: self.redistribution_neighbors,
            max_iterations: self.redistribution_iterations,
            radius: self.redistribution_radius,
        };
        constraints.validate()?;
        Ok(AnalyticDynamics {
            gripper: self.gripper(),
            constraints,
        })
    }

    pub fn workspace(&self) -> Result<Aabb> {
        let h = self.workspace_half_xy;
        Ok(Aabb::new(
            Point3::new(-h, -h, self.workspace_z_min),
            Point3::new(h, h, self.workspace_z_max),
        )?)
    }

    pub fn planner(&self) -> Result<PlannerConfig> {
        let kind = self.sampler_kind()?;
        let cfg = PlannerConfig {
            sampler: kind,
            sampler_cfg: SamplerConfig {
                n_clusters: self.n_clusters,
                n_samples: if self.samples == 0 { kind.default_samples() } else { self.samples },
                bounds: self.workspace()?,
                seed: 0,
                gripper: self.gripper(),
                kmeans: KMeansParams {
                    max_iters: self.kmeans_max_iters,
                    tol: self.kmeans_tol,
                },
            },
            max_grasps: self.max_grasps,
            stop: if self.stop_absolute > 0.0 {
                StopRule::Absolute(self.stop_absolute)
            } else {
                StopRule::FractionOfInitial(self.stop_fraction)
            },
            include_noop: self.include_noop,
            seed: self.stage_seed("planner"),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn env(&self) -> EnvConfig {
        EnvConfig {
            noise_sigma: self.noise_sigma,
            reshell: self.reshell,
            seed: self.stage_seed("env"),
            base_band: self.base_band,
            grid_step: self.grid_step,
        }
    }

    pub fn preprocess(&self) -> Result<PreprocessConfig> {
        let h = self.crop_half_xy;
        Ok(PreprocessConfig {
            bounds: Aabb::new(Point3::new(-h, -h, self.crop_z_min), Point3::new(h, h, self.crop_z_max))?,
            n: self.points,
            base_band: self.base_band,
            grid_step: self.grid_step,
            k_neighbors: self.outlier_neighbors,
            std_ratio: self.outlier_std_ratio,
            seed: self.stage_seed("preprocess"),
            stage_z: Some(self.stage_z),
        })
    }

    pub fn ransac(&self) -> RansacParams {
        RansacParams {
            iterations: self.ransac_iterations,
            inlier_threshold: self.inlier_threshold,
            seed: self.stage_seed("ransac"),
            refit_rounds: RansacParams::default().refit_rounds,
            score_points: self.ransac_score_points,
        }
    }

    pub fn icp(&self) -> IcpParams {
        IcpParams {
            max_iters: self.icp_max_iters,
            convergence_tol: self.icp_tol,
            max_correspondence_dist: self.icp_max_dist,
        }
    }
}
