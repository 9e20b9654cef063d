//! Run directories written by `sculpt`, and their aggregation into tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use claysculpt_core::GraspAction;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub const STEPS_FILE: &str = "steps.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMING_FILE: &str = "timing.csv";

/// One line of `steps.jsonl`. Timing lives in `timing.csv` so that reruns
/// produce identical step logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub step: usize,
    pub action: GraspAction,
    pub noop: bool,
    pub converged: bool,
    pub predicted_cd: f64,
    pub realized_cd: f64,
    pub candidates_evaluated: usize,
    pub predicted_ply: String,
    pub realized_ply: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub target: String,
    pub init: String,
    pub sampler: String,
    pub samples: usize,
    pub seed: u64,
    pub max_grasps: usize,
    pub points: usize,
    pub initial_cd: f64,
    pub stop_threshold: f64,
    pub final_cd: f64,
    pub final_cd_mean: f64,
    pub grasp_count: usize,
    pub steps: usize,
    pub wall_time_s: f64,
    /// Set when the loop stopped on an error; the log holds the steps before it.
    pub error: Option<String>,
}

/// What `eval` reads back from one run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub dir: PathBuf,
    pub summary: RunSummary,
    pub cd_series: Vec<f64>,
}

impl RunReport {
    pub fn grasp_count(&self) -> usize {
        self.summary.grasp_count
    }

    /// Last realized cd, or the initial cd when no step ran.
    pub fn final_cd(&self) -> f64 {
        self.cd_series.last().copied().unwrap_or(self.summary.initial_cd)
    }
}

fn malformed(path: &Path, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_owned(),
        message: message.into(),
    }
}

pub fn read_steps(path: &Path) -> Result<Vec<StepRecord>> {
    let text = io::read_text(path).map_err(|e| malformed(path, e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: StepRecord =
            serde_json::from_str(line).map_err(|e| malformed(path, format!("line {}: {e}", i + 1)))?;
        if rec.step != out.len() {
            return Err(malformed(path, format!("line {}: expected step {}", i + 1, out.len())));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_run(dir: &Path) -> Result<RunReport> {
    let summary_path = dir.join(SUMMARY_FILE);
    let text = io::read_text(&summary_path).map_err(|e| malformed(&summary_path, e.to_string()))?;
    let summary: RunSummary = serde_json::from_str(&text).map_err(|e| malformed(&summary_path, e.to_string()))?;
    let steps = read_steps(&dir.join(STEPS_FILE))?;
    let grasps = steps.iter().filter(|s| !s.noop && !s.converged).count();
    if grasps != summary.grasp_count {
        return Err(malformed(dir, "grasp count in summary disagrees with the step log"));
    }
    Ok(RunReport {
        dir: dir.to_owned(),
        summary,
        cd_series: steps.iter().map(|s| s.realized_cd).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupRow {
    pub target: String,
    pub sampler: String,
    pub runs: usize,
    pub grasps: MeanStd,
    pub cd: MeanStd,
    pub wall_time_s: MeanStd,
}

/// One row per (target, sampler), sorted.
pub fn group_runs(runs: &[RunReport]) -> Vec<GroupRow> {
    let mut groups: BTreeMap<(String, String), Vec<&RunReport>> = BTreeMap::new();
    for r in runs {
        groups
            .entry((r.summary.target.clone(), r.summary.sampler.clone()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((target, sampler), rs)| {
            let col = |f: &dyn Fn(&RunReport) -> f64| MeanStd::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            GroupRow {
                target,
                sampler,
                runs: rs.len(),
                grasps: col(&|r| r.grasp_count() as f64),
                cd: col(&|r| r.final_cd()),
                wall_time_s: col(&|r| r.summary.wall_time_s),
            }
        })
        .collect()
}

/// Per-run CSV: identity, grasp count, final cd, wall time, and the cd series.
pub fn runs_csv(runs: &[RunReport]) -> String {
    let mut s = String::from("run,target,sampler,seed,grasps,initial_cd,final_cd,wall_time_s,cd_series\n");
    for r in runs {
        let series: Vec<String> = r.cd_series.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:e},{:e},{:.3},\"{}\"",
            r.dir.display(),
            r.summary.target,
            r.summary.sampler,
            r.summary.seed,
            r.grasp_count(),
            r.summary.initial_cd,
            r.final_cd(),
            r.summary.wall_time_s,
            series.join(" ")
        );
    }
    s
}

pub fn groups_csv(rows: &[GroupRow]) -> String {
    let mut s = String::from("target,sampler,runs,grasps_mean,grasps_std,cd_mean,cd_std,wall_time_mean_s\n");
    for g in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:e},{:e},{:.3}",
            g.target, g.sampler, g.runs, g.grasps.mean, g.grasps.std, g.cd.mean, g.cd.std, g.wall_time_s.mean
        );
    }
    s
}

/// A plain-text table with `mean ± std` cells.
pub fn format_table(rows: &[GroupRow]) -> String {
    let header = ["Target", "Sampler", "Runs", "# Grasps", "CD"];
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|g| {
            [
                g.target.clone(),
                g.sampler.clone(),
                g.runs.to_string(),
                format!("{:.1} ± {:.1}", g.grasps.mean, g.grasps.std),
                format!("{:.4} ± {:.4}", g.cd.mean, g.cd.std),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let padded: Vec<String> = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = line(&header.map(String::from));
    out.push_str(&format!(
        "|{}|\n",
        widths.iter().map(|w| "-".repeat(w + 2)).collect::<Vec<_>>().join("|")
    ));
    for row in &body {
        out.push_str(&line(row));
    }
    out
}
