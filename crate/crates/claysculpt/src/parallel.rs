//! Candidate rollouts spread over the rayon pool.

use claysculpt_core::planner::{CandidateEvaluator, Evaluation};
use claysculpt_core::{Dynamics, Error, GraspAction, IncrementalChamfer, PointCloud, Result};
use rayon::prelude::*;

/// Same argmin as [`claysculpt_core::planner::Sequential`]: lowest cd, then lowest index.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

fn better(a: Evaluation, b: Evaluation) -> Evaluation {
    if b.cd < a.cd || (b.cd == a.cd && b.index < a.index) {
        b
    } else {
        a
    }
}

impl CandidateEvaluator for Parallel {
    fn evaluate<D: Dynamics + Sync>(
        &self,
        scorer: &IncrementalChamfer,
        state: &PointCloud,
        actions: &[GraspAction],
        dynamics: &D,
    ) -> Result<Evaluation> {
        actions
            .par_iter()
            .enumerate()
            .map(|(index, action)| {
                let predicted = dynamics.predict(state, action)?;
                let cd = scorer.evaluate(&predicted)?;
                Ok(Evaluation {
                    index,
                    action: *action,
                    predicted,
                    cd,
                })
            })
            .try_reduce_with(|a, b| Ok(better(a, b)))
            .unwrap_or_else(|| Err(Error::InvalidInput("no candidate actions".into())))
    }
}
