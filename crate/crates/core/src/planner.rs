//! One-step model-predictive control: score candidate grasps by predicted
//! Chamfer distance and execute the best one against an environment.

use alloc::vec::Vec;
use core::fmt;

use crate::chamfer::{chamfer_distance, IncrementalChamfer};
use crate::dynamics::{Dynamics, GraspAction};
use crate::error::{Error, Result};
use crate::geom::PointCloud;
use crate::sampler::{geometric_sample, random_sample, SamplerConfig};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SamplerKind {
    Geometric,
    Random,
}

impl SamplerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplerKind::Geometric => "geometric",
            SamplerKind::Random => "random",
        }
    }

    /// Candidate count used when none is configured.
    pub fn default_samples(&self) -> usize {
        match self {
            SamplerKind::Geometric => 35,
            SamplerKind::Random => 2500,
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(SamplerKind::Geometric),
            "random" => Ok(SamplerKind::Random),
            other => Err(Error::invalid(alloc::format!("unknown sampler {other:?}"))),
        }
    }
}

/// When to stop the closed loop early.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop once realized cd < this value.
    Absolute(f64),
    /// Stop once realized cd < fraction × initial cd.
    FractionOfInitial(f64),
}

impl StopRule {
    pub fn threshold(&self, initial_cd: f64) -> f64 {
        match *self {
            StopRule::Absolute(t) => t,
            StopRule::FractionOfInitial(f) => f * initial_cd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub sampler: SamplerKind,
    /// `seed` here is overridden per step from [`PlannerConfig::seed`].
    pub sampler_cfg: SamplerConfig,
    pub max_grasps: usize,
    pub stop: StopRule,
    pub include_noop: bool,
    pub seed: u64,
}

impl PlannerConfig {
    pub fn new(sampler: SamplerKind) -> Self {
        PlannerConfig {
            sampler,
            sampler_cfg: SamplerConfig {
                n_samples: sampler.default_samples(),
                ..SamplerConfig::default()
            },
            max_grasps: 10,
            stop: StopRule::FractionOfInitial(0.02),
            include_noop: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_grasps == 0 {
            return Err(Error::invalid("max_grasps must be at least 1"));
        }
        let t = match self.stop {
            StopRule::Absolute(t) | StopRule::FractionOfInitial(t) => t,
        };
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::invalid("stop threshold must be finite and non-negative"));
        }
        self.sampler_cfg.validate()
    }

    /// Sampler settings for one step, with a per-step seed.
    pub fn sampler_for_step(&self, step: usize) -> SamplerConfig {
        SamplerConfig {
            seed: seed::derive_indexed(self.seed, "sampler", step as u64),
            ..self.sampler_cfg
        }
    }
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig::new(SamplerKind::Geometric)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub index: usize,
    pub action: GraspAction,
    pub predicted: PointCloud,
    pub cd: f64,
}

/// Strategy for scoring a candidate list. Implementations must return the
/// lowest-cd candidate, breaking ties by lowest index.
pub trait CandidateEvaluator {
    fn evaluate<D: Dynamics + Sync>(
        &self,
        scorer: &IncrementalChamfer,
        state: &PointCloud,
        actions: &[GraspAction],
        dynamics: &D,
    ) -> Result<Evaluation>;
}

/// Evaluates candidates one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl CandidateEvaluator for Sequential {
    fn evaluate<D: Dynamics + Sync>(
        &self,
        scorer: &IncrementalChamfer,
        state: &PointCloud,
        actions: &[GraspAction],
        dynamics: &D,
    ) -> Result<Evaluation> {
        let mut best: Option<Evaluation> = None;
        for (index, action) in actions.iter().enumerate() {
            let predicted = dynamics.predict(state, action)?;
            let cd = scorer.evaluate(&predicted)?;
            if best.as_ref().is_none_or(|b| cd < b.cd) {
                best = Some(Evaluation {
                    index,
                    action: *action,
                    predicted,
                    cd,
                });
            }
        }
        best.ok_or_else(|| Error::invalid("no candidate actions"))
    }
}

/// Rolls `dynamics` for each action and returns the Chamfer argmin.
pub fn evaluate_candidates<D: Dynamics + Sync>(
    state: &PointCloud,
    target: &PointCloud,
    actions: &[GraspAction],
    dynamics: &D,
) -> Result<Evaluation> {
    if actions.is_empty() {
        return Err(Error::invalid("no candidate actions"));
    }
    let scorer = IncrementalChamfer::new(state, target)?;
    Sequential.evaluate(&scorer, state, actions, dynamics)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    pub step: usize,
    pub action: GraspAction,
    /// The chosen action was the appended no-op.
    pub noop: bool,
    /// The geometric sampler found state and target already matched.
    pub converged: bool,
    pub predicted: PointCloud,
    pub predicted_cd: f64,
    pub realized: Option<PointCloud>,
    pub realized_cd: Option<f64>,
    pub candidates_evaluated: usize,
    /// Seconds; zero unless a clock was supplied.
    pub wall_time: f64,
}

impl PlanStep {
    /// True when the environment was asked to execute this step.
    pub fn is_grasp(&self) -> bool {
        !self.noop && !self.converged
    }
}

/// Candidate list for one step, without the no-op.
pub fn sample_candidates(
    state: &PointCloud,
    target: &PointCloud,
    cfg: &PlannerConfig,
    step: usize,
) -> Result<Vec<GraspAction>> {
    let sampler = cfg.sampler_for_step(step);
    match cfg.sampler {
        SamplerKind::Geometric => geometric_sample(state, target, &sampler),
        SamplerKind::Random => random_sample(&sampler),
    }
}

pub fn plan_step<D: Dynamics + Sync>(
    state: &PointCloud,
    target: &PointCloud,
    cfg: &PlannerConfig,
    dynamics: &D,
    step: usize,
) -> Result<PlanStep> {
    plan_step_with(state, target, cfg, dynamics, step, &Sequential)
}

pub fn plan_step_with<D: Dynamics + Sync, E: CandidateEvaluator>(
    state: &PointCloud,
    target: &PointCloud,
    cfg: &PlannerConfig,
    dynamics: &D,
    step: usize,
    evaluator: &E,
) -> Result<PlanStep> {
    cfg.validate()?;
    let scorer = IncrementalChamfer::new(state, target)?;
    let mut actions = sample_candidates(state, target, cfg, step)?;
    let noop = GraspAction::noop(state.centroid().unwrap_or_default(), &cfg.sampler_cfg.gripper);
    let converged = cfg.sampler == SamplerKind::Geometric && actions.is_empty();
    if converged {
        return Ok(PlanStep {
            step,
            action: noop,
            noop: true,
            converged: true,
            predicted: state.clone(),
            predicted_cd: scorer.base(),
            realized: None,
            realized_cd: None,
            candidates_evaluated: 0,
            wall_time: 0.0,
        });
    }
    let sampled = actions.len();
    if cfg.include_noop {
        actions.push(noop);
    }
    let best = evaluator.evaluate(&scorer, state, &actions, dynamics)?;
    Ok(PlanStep {
        step,
        action: best.action,
        noop: cfg.include_noop && best.index == sampled,
        converged: false,
        predicted: best.predicted,
        predicted_cd: best.cd,
        realized: None,
        realized_cd: None,
        candidates_evaluated: actions.len(),
        wall_time: 0.0,
    })
}

/// The thing that actually executes grasps: the simulator, or a robot.
pub trait Environment {
    fn step(&mut self, cloud: &PointCloud, action: &GraspAction) -> Result<PointCloud>;
}

impl<E: Environment + ?Sized> Environment for &mut E {
    fn step(&mut self, cloud: &PointCloud, action: &GraspAction) -> Result<PointCloud> {
        (**self).step(cloud, action)
    }
}

/// Monotonic seconds, for step timing.
pub trait Clock {
    fn now(&self) -> f64;
}

/// A clock that never advances; keeps logs free of timing noise.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SculptRun {
    pub initial_cd: f64,
    pub stop_threshold: f64,
    pub steps: Vec<PlanStep>,
}

impl SculptRun {
    /// Environment calls made.
    pub fn grasp_count(&self) -> usize {
        self.steps.iter().filter(|s| s.is_grasp()).count()
    }

    /// Realized cd after the last step, or the initial cd for an empty run.
    pub fn final_cd(&self) -> f64 {
        self.steps
            .iter()
            .rev()
            .find_map(|s| s.realized_cd)
            .unwrap_or(self.initial_cd)
    }

    pub fn final_cloud<'a>(&'a self, initial: &'a PointCloud) -> &'a PointCloud {
        self.steps
            .iter()
            .rev()
            .find_map(|s| s.realized.as_ref())
            .unwrap_or(initial)
    }

    pub fn total_wall_time(&self) -> f64 {
        self.steps.iter().map(|s| s.wall_time).sum()
    }
}

/// A loop that stopped on an error, with everything logged before it.
#[derive(Debug)]
pub struct LoopAbort {
    pub partial: SculptRun,
    pub error: Error,
}

impl fmt::Display for LoopAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sculpt loop aborted after {} steps: {}", self.partial.steps.len(), self.error)
    }
}

impl core::error::Error for LoopAbort {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        Some(&self.error)
    }
}

pub fn run_sculpt_loop<D: Dynamics + Sync, V: Environment>(
    initial: &PointCloud,
    target: &PointCloud,
    cfg: &PlannerConfig,
    dynamics: &D,
    env: &mut V,
) -> Result<SculptRun, LoopAbort> {
    run_sculpt_loop_with(initial, target, cfg, dynamics, env, &Sequential, &NoClock)
}

/// Plan, execute, repeat until the stop threshold, convergence, or `max_grasps` steps.
pub fn run_sculpt_loop_with<D, V, E, C>(
    initial: &PointCloud,
    target: &PointCloud,
    cfg: &PlannerConfig,
    dynamics: &D,
    env: &mut V,
    evaluator: &E,
    clock: &C,
) -> Result<SculptRun, LoopAbort>
where
    D: Dynamics + Sync,
    V: Environment,
    E: CandidateEvaluator,
    C: Clock,
{
    let mut run = SculptRun {
        initial_cd: 0.0,
        stop_threshold: 0.0,
        steps: Vec::new(),
    };
    let setup = cfg.validate().and_then(|_| chamfer_distance(initial, target));
    let initial_cd = match setup {
        Ok(cd) => cd,
        Err(error) => return Err(LoopAbort { partial: run, error }),
    };
    run.initial_cd = initial_cd;
    run.stop_threshold = cfg.stop.threshold(initial_cd);
    if initial_cd == 0.0 {
        return Ok(run);
    }
    let mut state = initial.clone();
    for step in 0..cfg.max_grasps {
        let started = clock.now();
        let mut planned = match plan_step_with(&state, target, cfg, dynamics, step, evaluator) {
            Ok(p) => p,
            Err(error) => return Err(LoopAbort { partial: run, error }),
        };
        if planned.converged {
            planned.realized_cd = Some(planned.predicted_cd);
            planned.realized = Some(state);
            planned.wall_time = clock.now() - started;
            run.steps.push(planned);
            return Ok(run);
        }
        let realized = if planned.noop {
            Ok(state.clone())
        } else {
            env.step(&state, &planned.action)
        };
        let realized = match realized.and_then(|r| chamfer_distance(&r, target).map(|cd| (r, cd))) {
            Ok(r) => r,
            Err(error) => return Err(LoopAbort { partial: run, error }),
        };
        planned.realized_cd = Some(realized.1);
        planned.realized = Some(realized.0.clone());
        planned.wall_time = clock.now() - started;
        run.steps.push(planned);
        state = realized.0;
        if realized.1 < run.stop_threshold {
            break;
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{AnalyticDynamics, Constraints, GripperModel};
    use crate::geom::Point3;

    fn grid(n: usize, step: f64, z: f64) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let c = (n as f64 - 1.0) / 2.0;
                pts.push(Point3::new((i as f64 - c) * step, (j as f64 - c) * step, z));
            }
        }
        PointCloud::new(pts)
    }

    fn dynamics() -> AnalyticDynamics {
        AnalyticDynamics {
            gripper: GripperModel::default(),
            constraints: Constraints::with_max_stretch(0.006),
        }
    }

    struct Perfect(AnalyticDynamics);

    impl Environment for Perfect {
        fn step(&mut self, cloud: &PointCloud, action: &GraspAction) -> Result<PointCloud> {
            self.0.predict(cloud, action)
        }
    }

    #[test]
    fn single_candidate_wins() {
        let s = grid(6, 0.005, 0.01);
        let a = GraspAction::new(Point3::new(0.0, 0.0, 0.01), 0.3, 0.01);
        let e = evaluate_candidates(&s, &grid(4, 0.005, 0.01), &[a], &dynamics()).unwrap();
        assert_eq!(e.index, 0);
        assert_eq!(e.action, a);
    }

    #[test]
    fn empty_candidates_rejected() {
        let s = grid(3, 0.01, 0.0);
        assert!(evaluate_candidates(&s, &s, &[], &dynamics()).unwrap_err().is_invalid_input());
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let s = grid(5, 0.005, 0.01);
        let far = GraspAction::new(Point3::new(0.5, 0.5, 0.01), 0.0, 0.01);
        let e = evaluate_candidates(&s, &grid(3, 0.005, 0.01), &[far, far, far], &dynamics()).unwrap();
        assert_eq!(e.index, 0);
    }

    #[test]
    fn identical_state_converges_immediately() {
        let s = grid(6, 0.006, 0.01);
        let run = run_sculpt_loop(&s, &s, &PlannerConfig::default(), &dynamics(), &mut Perfect(dynamics())).unwrap();
        assert!(run.steps.len() <= 1);
        assert_eq!(run.grasp_count(), 0);
    }

    #[test]
    fn step_counts_include_noop() {
        let s = grid(8, 0.005, 0.01);
        let t = grid(8, 0.004, 0.012);
        for kind in [SamplerKind::Geometric, SamplerKind::Random] {
            let mut cfg = PlannerConfig::new(kind);
            cfg.sampler_cfg.n_clusters = 4;
            if kind == SamplerKind::Random {
                cfg.sampler_cfg.n_samples = 40;
            }
            let p = plan_step(&s, &t, &cfg, &dynamics(), 0).unwrap();
            assert_eq!(p.candidates_evaluated, cfg.sampler_cfg.n_samples + 1);
            assert!(p.predicted_cd <= chamfer_distance(&s, &t).unwrap());
        }
    }

    #[test]
    fn loop_respects_budget() {
        let s = grid(8, 0.005, 0.01);
        let t = grid(8, 0.0035, 0.01);
        let mut cfg = PlannerConfig::new(SamplerKind::Geometric);
        cfg.sampler_cfg.n_clusters = 4;
        cfg.max_grasps = 3;
        let run = run_sculpt_loop(&s, &t, &cfg, &dynamics(), &mut Perfect(dynamics())).unwrap();
        assert!(run.steps.len() <= 3);
        let mut last = run.initial_cd;
        for st in &run.steps {
            let cd = st.realized_cd.unwrap();
            assert!(cd <= last);
            last = cd;
        }
    }

    struct Failing;

    impl Environment for Failing {
        fn step(&mut self, _: &PointCloud, _: &GraspAction) -> Result<PointCloud> {
            Err(Error::Environment("gripper offline".into()))
        }
    }

    #[test]
    fn environment_failure_keeps_partial_log() {
        let s = grid(8, 0.005, 0.01);
        let t = grid(8, 0.0035, 0.01);
        let mut cfg = PlannerConfig::new(SamplerKind::Geometric);
        cfg.sampler_cfg.n_clusters = 4;
        cfg.include_noop = false;
        let abort = run_sculpt_loop(&s, &t, &cfg, &dynamics(), &mut Failing).unwrap_err();
        assert!(abort.partial.steps.is_empty());
        assert!(matches!(abort.error, Error::Environment(_)));
    }
}
