//! The `claysculpt` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use claysculpt_core::planner::{run_sculpt_loop_with, Clock, SculptRun};
use claysculpt_core::registration::register_view;
use claysculpt_core::sim::{camera_frame, camera_ring, make_calibration_object, scan_clay, ScanOptions, SimEnv};
use claysculpt_core::{
    chamfer_distance, chamfer_mean, fuse_views, make_initial_clay, Label, make_target, preprocess_pipeline,
    synth_scan, Point3, PointCloud, RawScan, RigidTransform, ShapeKind,
};
use log::info;
use rand::Rng;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io;
use crate::parallel::Parallel;
use crate::report::{self, RunSummary, StepRecord};

const BUILTIN: &str = "builtin:";

#[derive(Debug, Parser)]
#[command(name = "claysculpt", version, about = "Plan parallel-gripper grasps that sculpt point-cloud clay")]
pub struct Cli {
    /// Flat key = value config file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true)]
    pub verbosity: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recover camera extrinsics from scans of the calibration object.
    Calibrate(CalibrateArgs),
    /// Turn raw labeled scans into a closed, fixed-size clay shell.
    Preprocess(PreprocessArgs),
    /// Apply grasp actions to a cloud with the simulated environment.
    Step(StepArgs),
    /// Run closed-loop planning toward a target shape.
    Sculpt(SculptArgs),
    /// Chamfer distance between two clouds, or a report over run directories.
    Eval(EvalArgs),
    /// Write the target-shape library as PLY files.
    GenTargets(GenTargetsArgs),
    /// Write synthetic multi-camera scans for the calibration demo.
    Scan(ScanArgs),
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Camera-frame scan PLYs, one per camera.
    #[arg(long, num_args = 1.., required = true)]
    pub scans: Vec<PathBuf>,
    /// Label CSVs, one per scan; only clay-labeled points are registered.
    #[arg(long, num_args = 1..)]
    pub labels: Vec<PathBuf>,
    /// Initial camera-to-world guesses, by camera name.
    #[arg(long)]
    pub initial: PathBuf,
    /// World-frame model of the calibration object.
    #[arg(long, default_value = "builtin:calibration")]
    pub reference: String,
    /// Extrinsics file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the fused world-frame cloud here.
    #[arg(long)]
    pub fused: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Raw scan PLYs.
    #[arg(long, num_args = 1.., required = true)]
    pub scan: Vec<PathBuf>,
    /// Label CSVs, one per scan, in the same order.
    #[arg(long, num_args = 1..)]
    pub labels: Vec<PathBuf>,
    /// Camera-to-world transforms named by each scan's frame; without it scans are taken as world-frame.
    #[arg(long)]
    pub extrinsics: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StepArgs {
    #[arg(long)]
    pub state: PathBuf,
    /// One JSON action object.
    #[arg(long, conflicts_with = "actions", required_unless_present = "actions")]
    pub action: Option<String>,
    /// JSON-lines action file, applied in order.
    #[arg(long)]
    pub actions: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SculptArgs {
    /// Target PLY or builtin:<shape>.
    #[arg(long)]
    pub target: String,
    /// Initial clay PLY or builtin:cylinder.
    #[arg(long, default_value = "builtin:cylinder")]
    pub init: String,
    #[arg(long)]
    pub sampler: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub max_grasps: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, requires = "b", conflicts_with = "runs")]
    pub a: Option<PathBuf>,
    #[arg(long, requires = "a")]
    pub b: Option<PathBuf>,
    /// Run directories written by `sculpt`.
    #[arg(long, num_args = 1.., required_unless_present = "a")]
    pub runs: Vec<PathBuf>,
    /// Directory for the report CSVs.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenTargetsArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// World-frame object PLY or builtin:calibration.
    #[arg(long, default_value = "builtin:calibration")]
    pub object: String,
    #[arg(long)]
    pub cameras: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
}

/// Parses `argv` and runs the command; returns the process exit code.
pub fn execute<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(level: &str) {
    let _ = env_logger::Builder::new()
        .parse_filters(level)
        .format_timestamp(None)
        .try_init();
}

fn base_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(v) = &cli.verbosity {
        cfg.verbosity = v.clone();
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = base_config(&cli)?;
    init_logging(&cfg.verbosity);
    match cli.command {
        Command::Calibrate(a) => calibrate(&cfg.resolve()?, &a),
        Command::Preprocess(a) => preprocess(&cfg.resolve()?, &a),
        Command::Step(a) => step(&cfg.resolve()?, &a),
        Command::Sculpt(a) => {
            if let Some(s) = &a.sampler {
                cfg.sampler = s.clone();
                cfg.samples = 0;
            }
            if let Some(n) = a.samples {
                cfg.samples = n;
            }
            if let Some(n) = a.max_grasps {
                cfg.max_grasps = n;
            }
            if let Some(o) = &a.out {
                cfg.out = o.clone();
            }
            sculpt(&cfg.resolve()?, &a.target, &a.init).map(|_| ())
        }
        Command::Eval(a) => eval(&cfg.resolve()?, &a),
        Command::GenTargets(a) => {
            if let Some(o) = &a.out {
                cfg.out = o.clone();
            }
            if let Some(n) = a.points {
                cfg.points = n;
            }
            gen_targets(&cfg.resolve()?)
        }
        Command::Scan(a) => {
            if let Some(o) = &a.out {
                cfg.out = o.clone();
            }
            if let Some(n) = a.cameras {
                cfg.scan_cameras = n;
            }
            if let Some(n) = a.noise {
                cfg.sensor_noise = n;
            }
            scan(&cfg.resolve()?, &a.object)
        }
    }
}

/// Echo path for commands whose output is a single file.
fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".resolved_config.toml");
    out.with_file_name(name)
}

fn write_sidecar(cfg: &RunConfig, out: &Path) -> Result<()> {
    io::write_text(&sidecar(out), &cfg.to_toml())
}

/// A cloud from a file, or a generated one named `builtin:<name>`.
pub fn load_cloud_arg(arg: &str, cfg: &RunConfig, role: &str) -> Result<PointCloud> {
    let Some(name) = arg.strip_prefix(BUILTIN) else {
        return io::read_cloud(Path::new(arg));
    };
    if name == "calibration" {
        return Ok(make_calibration_object(cfg.calibration_points, cfg.stage_seed("calibration"))?);
    }
    if role == "init" && name == "cylinder" {
        return Ok(make_initial_clay(cfg.points, cfg.stage_seed("init"))?);
    }
    Ok(make_target(name, cfg.points, cfg.stage_seed(role))?.cloud)
}

fn calibrate(cfg: &RunConfig, a: &CalibrateArgs) -> Result<()> {
    let reference = load_cloud_arg(&a.reference, cfg, "reference")?;
    let initial = io::read_extrinsics(&a.initial)?;
    if !cfg.cameras.is_empty() && cfg.cameras.len() != a.scans.len() {
        return Err(Error::usage(format!(
            "config lists {} cameras but {} scans were given",
            cfg.cameras.len(),
            a.scans.len()
        )));
    }
    if !a.labels.is_empty() && a.labels.len() != a.scans.len() {
        return Err(Error::usage("give one label file per scan, or none"));
    }
    let mut recovered = Vec::new();
    let mut views = Vec::new();
    for (i, path) in a.scans.iter().enumerate() {
        let mut scan = io::read_ply(path)?;
        if let Some(l) = a.labels.get(i) {
            let labels = io::read_labels(l)?;
            let raw = RawScan::new(scan.points, labels).map_err(|e| Error::parse(l, 0, e.to_string()))?;
            scan.points = raw
                .points
                .iter()
                .zip(&raw.labels)
                .filter(|(_, l)| **l == Label::Clay)
                .map(|(p, _)| *p)
                .collect();
        }
        let name = cfg.cameras.get(i).cloned().unwrap_or_else(|| scan.frame.clone());
        let guess = initial
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| Error::usage(format!("no initial extrinsics for camera {name:?}")))?;
        let r = register_view(&scan, &reference, &guess, &cfg.ransac(), &cfg.icp())?;
        info!("{name}: rms {:.3e} m, {} inliers", r.rms_error, r.inlier_count);
        recovered.push((name, r.transform));
        views.push((scan, r.transform));
    }
    io::write_extrinsics(&a.out, &recovered)?;
    if let Some(f) = &a.fused {
        io::write_ply(f, &fuse_views(&views)?)?;
    }
    write_sidecar(cfg, &a.out)
}

fn preprocess(cfg: &RunConfig, a: &PreprocessArgs) -> Result<()> {
    if !a.labels.is_empty() && a.labels.len() != a.scan.len() {
        return Err(Error::usage("give one label file per scan, or none"));
    }
    let extrinsics = a.extrinsics.as_deref().map(io::read_extrinsics).transpose()?;
    let mut raw = RawScan::default();
    for (i, path) in a.scan.iter().enumerate() {
        let cloud = io::read_ply(path)?;
        let labels = match a.labels.get(i) {
            Some(l) => io::read_labels(l)?,
            None => vec![Label::Clay; cloud.len()],
        };
        let part = RawScan::new(cloud.points.clone(), labels).map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let to_world = match &extrinsics {
            Some(ex) => ex
                .iter()
                .find(|(n, _)| *n == cloud.frame)
                .map(|(_, t)| *t)
                .ok_or_else(|| Error::usage(format!("no extrinsics for frame {:?}", cloud.frame)))?,
            None => RigidTransform::identity(),
        };
        raw.points.extend(part.points.iter().map(|p| to_world.apply(p)));
        raw.labels.extend(part.labels);
    }
    let shell = preprocess_pipeline(&raw, &cfg.preprocess()?)?;
    io::write_ply(&a.out, &shell.cloud)?;
    write_sidecar(cfg, &a.out)
}

fn step(cfg: &RunConfig, a: &StepArgs) -> Result<()> {
    let state = io::read_cloud(&a.state)?;
    let actions = match (&a.action, &a.actions) {
        (Some(text), _) => vec![io::parse_action(text).map_err(|m| Error::usage(format!("bad --action: {m}")))?],
        (None, Some(path)) => io::read_actions(path)?,
        (None, None) => return Err(Error::usage("give --action or --actions")),
    };
    let dynamics = cfg.dynamics(&state)?;
    let mut env = SimEnv::new(dynamics, cfg.env());
    let mut cloud = state;
    for action in &actions {
        action.validate(&dynamics.gripper)?;
        cloud = claysculpt_core::Environment::step(&mut env, &cloud, action)?;
    }
    io::write_ply(&a.out, &cloud)?;
    write_sidecar(cfg, &a.out)
}

struct WallClock(Instant);

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

fn step_file(step: usize, kind: &str) -> String {
    format!("step_{:02}_{kind}.ply", step + 1)
}

/// Runs one closed-loop experiment and writes its run directory.
pub fn sculpt(cfg: &RunConfig, target_arg: &str, init_arg: &str) -> Result<RunSummary> {
    let out = &cfg.out;
    let target = load_cloud_arg(target_arg, cfg, "target")?;
    let initial = load_cloud_arg(init_arg, cfg, "init")?;
    let planner = cfg.planner()?;
    let dynamics = cfg.dynamics(&initial)?;
    let mut env = SimEnv::new(dynamics, cfg.env());
    if cfg.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    cfg.write_resolved(out)?;
    io::write_ply(&out.join("initial.ply"), &initial)?;
    io::write_ply(&out.join("target.ply"), &target)?;

    let clock = WallClock(Instant::now());
    let (run, failure) = match run_sculpt_loop_with(&initial, &target, &planner, &dynamics, &mut env, &Parallel, &clock)
    {
        Ok(run) => (run, None),
        Err(abort) => (abort.partial, Some(abort.error)),
    };

    let mut log = String::new();
    let mut timing = String::from("step,wall_time_s\n");
    for s in &run.steps {
        let predicted_ply = step_file(s.step, "predicted");
        let realized_ply = step_file(s.step, "realized");
        io::write_ply(&out.join(&predicted_ply), &s.predicted)?;
        if let Some(r) = &s.realized {
            io::write_ply(&out.join(&realized_ply), r)?;
        }
        let rec = StepRecord {
            step: s.step,
            action: s.action,
            noop: s.noop,
            converged: s.converged,
            predicted_cd: s.predicted_cd,
            realized_cd: s.realized_cd.unwrap_or(s.predicted_cd),
            candidates_evaluated: s.candidates_evaluated,
            predicted_ply,
            realized_ply,
        };
        log.push_str(&serde_json::to_string(&rec).expect("step record serializes"));
        log.push('\n');
        timing.push_str(&format!("{},{:.6}\n", s.step, s.wall_time));
    }
    io::write_text(&out.join(report::STEPS_FILE), &log)?;
    io::write_text(&out.join(report::TIMING_FILE), &timing)?;
    let final_cloud = run.final_cloud(&initial);
    io::write_ply(&out.join("final.ply"), final_cloud)?;

    let summary = summarize(cfg, target_arg, init_arg, &run, final_cloud, &target, failure.as_ref())?;
    io::write_text(
        &out.join(report::SUMMARY_FILE),
        &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    )?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(summary),
    }
}

fn summarize(
    cfg: &RunConfig,
    target_arg: &str,
    init_arg: &str,
    run: &SculptRun,
    final_cloud: &PointCloud,
    target: &PointCloud,
    failure: Option<&claysculpt_core::Error>,
) -> Result<RunSummary> {
    Ok(RunSummary {
        target: target_arg.strip_prefix(BUILTIN).unwrap_or(target_arg).to_owned(),
        init: init_arg.to_owned(),
        sampler: cfg.sampler.clone(),
        samples: cfg.samples,
        seed: cfg.seed,
        max_grasps: cfg.max_grasps,
        points: final_cloud.len(),
        initial_cd: run.initial_cd,
        stop_threshold: run.stop_threshold,
        final_cd: run.final_cd(),
        final_cd_mean: chamfer_mean(final_cloud, target)?,
        grasp_count: run.grasp_count(),
        steps: run.steps.len(),
        wall_time_s: run.total_wall_time(),
        error: failure.map(|e| e.to_string()),
    })
}

fn eval(cfg: &RunConfig, a: &EvalArgs) -> Result<()> {
    if let (Some(pa), Some(pb)) = (&a.a, &a.b) {
        let ca = io::read_cloud(pa)?;
        let cb = io::read_cloud(pb)?;
        println!("chamfer_distance {:e}", chamfer_distance(&ca, &cb)?);
        println!("chamfer_mean {:e}", chamfer_mean(&ca, &cb)?);
        return Ok(());
    }
    let runs: Vec<_> = a.runs.iter().map(|d| report::load_run(d)).collect::<Result<_>>()?;
    let rows = report::group_runs(&runs);
    print!("{}", report::format_table(&rows));
    if let Some(dir) = &a.out {
        io::write_text(&dir.join("runs.csv"), &report::runs_csv(&runs))?;
        io::write_text(&dir.join("summary.csv"), &report::groups_csv(&rows))?;
        cfg.write_resolved(dir)?;
    }
    Ok(())
}

fn gen_targets(cfg: &RunConfig) -> Result<()> {
    for kind in ShapeKind::ALL {
        let t = make_target(kind.name(), cfg.points, cfg.stage_seed("target"))?;
        io::write_ply(&cfg.out.join(format!("{}.ply", kind.name())), &t.cloud)?;
    }
    io::write_ply(
        &cfg.out.join("initial_clay.ply"),
        &make_initial_clay(cfg.points, cfg.stage_seed("init"))?,
    )?;
    cfg.write_resolved(&cfg.out)
}

/// A random rigid perturbation: rotation up to `max_deg` about a random axis
/// through `pivot`, and a translation of length up to `max_m`.
pub fn perturbation<R: Rng>(rng: &mut R, max_deg: f64, max_m: f64, pivot: Point3) -> Result<RigidTransform> {
    let mut unit = || loop {
        let v = Point3::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v * (1.0 / n);
        }
    };
    let axis = unit();
    let dir = unit();
    let angle = rng.random_range(-max_deg..=max_deg).to_radians();
    let shift = dir * rng.random_range(0.0..=max_m);
    let spin = RigidTransform::from_axis_angle(axis, angle, Point3::ORIGIN)?;
    let about_pivot = RigidTransform::from_translation(pivot)
        .compose(&spin)
        .compose(&RigidTransform::from_translation(pivot * -1.0));
    Ok(RigidTransform::from_translation(shift).compose(&about_pivot))
}

fn scan(cfg: &RunConfig, object_arg: &str) -> Result<()> {
    let object = load_cloud_arg(object_arg, cfg, "object")?;
    let center = object.centroid().ok_or_else(|| Error::usage("object cloud is empty"))?;
    let cameras = camera_ring(cfg.scan_cameras, cfg.camera_radius, center)?;
    let opts = ScanOptions {
        stage_points: cfg.scene_points,
        table_points: cfg.scene_points,
        ..ScanOptions::default()
    };
    let scans = synth_scan(&object, &cameras, cfg.sensor_noise, cfg.stage_seed("scan"), &opts)?;
    let mut rng = claysculpt_core::seed::rng(cfg.stage_seed("perturb"));
    let mut truth = Vec::new();
    let mut guesses = Vec::new();
    for (i, (cam, raw)) in cameras.iter().zip(&scans).enumerate() {
        let name = camera_frame(i);
        io::write_ply(
            &cfg.out.join(format!("{name}.ply")),
            &PointCloud::with_frame(raw.points.clone(), name.clone()),
        )?;
        io::write_ply(&cfg.out.join(format!("{name}_clay.ply")), &scan_clay(raw, i))?;
        io::write_labels(&cfg.out.join(format!("{name}_labels.csv")), &raw.labels)?;
        truth.push((name.clone(), *cam));
        let p = perturbation(&mut rng, cfg.perturb_deg, cfg.perturb_m, center)?;
        guesses.push((name, p.compose(cam)));
    }
    io::write_extrinsics(&cfg.out.join("extrinsics_true.txt"), &truth)?;
    io::write_extrinsics(&cfg.out.join("extrinsics_initial.txt"), &guesses)?;
    io::write_ply(&cfg.out.join("object.ply"), &object)?;
    cfg.write_resolved(&cfg.out)
}

