use claysculpt_core::planner::{run_sculpt_loop, SamplerKind};
use claysculpt_core::{
    apply_grasp, chamfer_distance, evaluate_candidates, make_initial_clay, make_target, plan_step, AnalyticDynamics,
    Dynamics, Environment, GraspAction, GripperModel, Point3, PointCloud, PlannerConfig, Result,
};
use proptest::prelude::*;

fn dynamics(c: &PointCloud) -> AnalyticDynamics {
    AnalyticDynamics::for_initial(GripperModel::default(), c).unwrap()
}

/// The predictive model itself, counting calls.
struct Perfect {
    model: AnalyticDynamics,
    calls: usize,
}

impl Environment for Perfect {
    fn step(&mut self, cloud: &PointCloud, action: &GraspAction) -> Result<PointCloud> {
        self.calls += 1;
        self.model.predict(cloud, action)
    }
}

#[test]
fn hand_built_candidates_match_sequential_oracle() {
    let state = make_initial_clay(400, 1).unwrap();
    let target = make_target("line", 400, 2).unwrap().cloud;
    let d = dynamics(&state);
    let acts = [
        GraspAction::new(Point3::new(0.0, 0.0, 0.01), 0.0, 0.02),
        GraspAction::new(Point3::new(0.0, 0.0, 0.01), 1.5707963267948966, 0.02),
        GraspAction::new(Point3::new(0.01, 0.01, 0.01), 0.7, 0.04),
    ];
    let mut oracle = (usize::MAX, f64::INFINITY);
    for (i, a) in acts.iter().enumerate() {
        let cd = chamfer_distance(&apply_grasp(&state, a, &d.gripper, &d.constraints).unwrap(), &target).unwrap();
        if cd < oracle.1 {
            oracle = (i, cd);
        }
    }
    let best = evaluate_candidates(&state, &target, &acts, &d).unwrap();
    assert_eq!((best.index, best.cd), oracle);
    assert_eq!(chamfer_distance(&best.predicted, &target).unwrap(), best.cd);
    assert!(evaluate_candidates(&state, &target, &[], &d).unwrap_err().is_invalid_input());
}

#[test]
fn default_candidate_counts() {
    let state = make_initial_clay(300, 1).unwrap();
    let target = make_target("X", 300, 2).unwrap().cloud;
    let d = dynamics(&state);
    let geo = plan_step(&state, &target, &PlannerConfig::new(SamplerKind::Geometric), &d, 0).unwrap();
    assert_eq!(geo.candidates_evaluated, 36);
    let rnd = plan_step(&state, &target, &PlannerConfig::new(SamplerKind::Random), &d, 0).unwrap();
    assert_eq!(rnd.candidates_evaluated, 2501);
    for s in [&geo, &rnd] {
        assert!(s.predicted_cd <= chamfer_distance(&state, &target).unwrap());
        assert_eq!(s.predicted_cd, chamfer_distance(&s.predicted, &target).unwrap());
    }
}

#[test]
fn reaching_the_target_is_a_converged_step() {
    let state = make_initial_clay(300, 1).unwrap();
    let d = dynamics(&state);
    let step = plan_step(&state, &state, &PlannerConfig::default(), &d, 0).unwrap();
    assert!(step.converged && step.noop);
    assert_eq!(step.candidates_evaluated, 0);
    let mut env = Perfect { model: d, calls: 0 };
    let run = run_sculpt_loop(&state, &state, &PlannerConfig::default(), &d, &mut env).unwrap();
    assert!(run.steps.len() <= 1);
    assert_eq!(run.grasp_count(), 0);
    assert_eq!(env.calls, 0);
}

#[test]
fn cylinder_to_line_halves_the_distance() {
    let initial = make_initial_clay(2048, 0).unwrap();
    let target = make_target("line", 2048, 0).unwrap().cloud;
    let d = dynamics(&initial);
    let mut env = Perfect { model: d, calls: 0 };
    let run = run_sculpt_loop(&initial, &target, &PlannerConfig::default(), &d, &mut env).unwrap();
    assert!(run.final_cd() <= 0.5 * run.initial_cd, "{} vs {}", run.final_cd(), run.initial_cd);
    assert!(run.grasp_count() <= 10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn perfect_model_loop_never_worsens(shape in 0usize..6, seed in any::<u64>(), max_grasps in 1usize..6) {
        let kind = claysculpt_core::ShapeKind::BENCHMARK[shape];
        let initial = make_initial_clay(600, seed).unwrap();
        let target = make_target(kind.name(), 600, seed ^ 1).unwrap().cloud;
        let d = dynamics(&initial);
        let cfg = PlannerConfig { max_grasps, seed, ..PlannerConfig::default() };
        let mut env = Perfect { model: d, calls: 0 };
        let run = run_sculpt_loop(&initial, &target, &cfg, &d, &mut env).unwrap();
        let mut prev = run.initial_cd;
        for s in &run.steps {
            let cd = s.realized_cd.unwrap();
            prop_assert!(cd <= prev, "{} rose to {}", prev, cd);
            prop_assert_eq!(cd, s.predicted_cd);
            prop_assert_eq!(s.predicted_cd, chamfer_distance(&s.predicted, &target).unwrap());
            prev = cd;
        }
        prop_assert!(run.steps.len() <= max_grasps);
        prop_assert!(env.calls <= max_grasps);
        prop_assert_eq!(env.calls, run.grasp_count());

        let mut again = Perfect { model: d, calls: 0 };
        let rerun = run_sculpt_loop(&initial, &target, &cfg, &d, &mut again).unwrap();
        prop_assert_eq!(rerun, run);
    }
}
