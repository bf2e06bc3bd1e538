//! Aggregation and CSV / JSON / text output of experiment results.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::{Controller, Outcome, PbsConfig, ServoError, TrialResult};
use crate::control::SlackWeight;
use crate::model::RobotModel;

pub const CSV_HEADER: [&str; 9] =
    ["trial", "controller", "outcome", "mean_m", "final_m", "max_dev", "mean_dev", "steps", "ms_per_step"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    pub controller: Controller,
    pub result: TrialResult,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct OutcomeCounts {
    pub success: usize,
    pub timeout: usize,
    pub joint_limit_violation: usize,
    pub qp_infeasible: usize,
    pub singular_abort: usize,
}

impl OutcomeCounts {
    fn add(&mut self, o: Outcome) {
        match o {
            Outcome::Success => self.success += 1,
            Outcome::Timeout => self.timeout += 1,
            Outcome::JointLimitViolation => self.joint_limit_violation += 1,
            Outcome::QpInfeasible => self.qp_infeasible += 1,
            Outcome::SingularAbort => self.singular_abort += 1,
        }
    }
}

/// Aggregates for one controller. Means run over successful trials only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerSummary {
    pub controller: Controller,
    pub trials: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub outcomes: OutcomeCounts,
    pub mean_m: Option<f64>,
    pub mean_final_m: Option<f64>,
    pub mean_max_deviation: Option<f64>,
    pub mean_deviation: Option<f64>,
    pub mean_steps: Option<f64>,
    /// `(mean_m − mean_m_rrmc) / mean_m_rrmc`; absent without an RRMC baseline.
    pub uplift_mean_m: Option<f64>,
    pub uplift_final_m: Option<f64>,
    /// Median over trials of the per-trial mean step time, ms.
    pub median_ms_per_step: Option<f64>,
    pub max_task_residual: f64,
    pub mean_slack_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentMetadata {
    pub model: String,
    pub joints: usize,
    pub trials: usize,
    pub seed: u64,
    pub controllers: Vec<Controller>,
    pub k: f64,
    pub dt: f64,
    pub t_max: f64,
    pub arrival_translation: f64,
    pub arrival_rotation: f64,
    pub max_linear_speed: f64,
    pub max_angular_speed: f64,
    pub lambda_q: f64,
    pub lambda_delta: String,
    pub eta: f64,
    pub rho_i: f64,
    pub rho_s: f64,
    pub park_gain: f64,
    pub axes: String,
    pub averaging: &'static str,
    pub velocity_clamping: &'static str,
    pub timing_recorded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub metadata: ExperimentMetadata,
    pub summary: Vec<ControllerSummary>,
    #[serde(skip)]
    pub rows: Vec<TrialRow>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[mid] } else { 0.5 * (values[mid - 1] + values[mid]) })
}

fn uplift(value: Option<f64>, baseline: Option<f64>) -> Option<f64> {
    match (value, baseline) {
        (Some(v), Some(b)) if b != 0.0 => Some((v - b) / b),
        _ => None,
    }
}

impl ExperimentReport {
    pub fn new(
        model: &RobotModel,
        trials: usize,
        controllers: &[Controller],
        pbs: &PbsConfig,
        rows: Vec<TrialRow>,
    ) -> Self {
        let mut summary: Vec<ControllerSummary> = controllers
            .iter()
            .map(|&c| {
                let mine: Vec<&TrialResult> = rows.iter().filter(|r| r.controller == c).map(|r| &r.result).collect();
                let ok: Vec<&TrialResult> = mine.iter().copied().filter(|r| r.outcome == Outcome::Success).collect();
                let mut outcomes = OutcomeCounts::default();
                mine.iter().for_each(|r| outcomes.add(r.outcome));
                let failures = mine.len() - ok.len();
                ControllerSummary {
                    controller: c,
                    trials: mine.len(),
                    failures,
                    failure_rate: if mine.is_empty() { 0.0 } else { failures as f64 / mine.len() as f64 },
                    outcomes,
                    mean_m: mean(ok.iter().map(|r| r.mean_m)),
                    mean_final_m: mean(ok.iter().map(|r| r.final_m)),
                    mean_max_deviation: mean(ok.iter().map(|r| r.max_deviation)),
                    mean_deviation: mean(ok.iter().map(|r| r.mean_deviation)),
                    mean_steps: mean(ok.iter().map(|r| r.steps as f64)),
                    uplift_mean_m: None,
                    uplift_final_m: None,
                    median_ms_per_step: median(
                        mine.iter().filter_map(|r| r.wall_time_per_step).map(|s| s * 1e3).collect(),
                    ),
                    max_task_residual: mine.iter().map(|r| r.max_task_residual).fold(0.0, f64::max),
                    mean_slack_norm: mean(ok.iter().map(|r| r.mean_slack_norm)),
                }
            })
            .collect();
        if let Some(base) = summary.iter().find(|s| s.controller == Controller::Rrmc).cloned() {
            for s in &mut summary {
                s.uplift_mean_m = uplift(s.mean_m, base.mean_m);
                s.uplift_final_m = uplift(s.mean_final_m, base.mean_final_m);
            }
        }
        let lambda_delta = match pbs.cfg.lambda_delta {
            SlackWeight::Fixed(v) => format!("fixed({v})"),
            SlackWeight::InverseError { max_cap } => format!("inverse_error(cap={max_cap})"),
        };
        let metadata = ExperimentMetadata {
            model: model.name().to_string(),
            joints: model.n(),
            trials,
            seed: pbs.seed,
            controllers: controllers.to_vec(),
            k: pbs.k,
            dt: pbs.dt,
            t_max: pbs.t_max,
            arrival_translation: pbs.arrival_translation,
            arrival_rotation: pbs.arrival_rotation,
            max_linear_speed: pbs.max_linear_speed,
            max_angular_speed: pbs.max_angular_speed,
            lambda_q: pbs.cfg.lambda_q,
            lambda_delta,
            eta: pbs.cfg.eta,
            rho_i: pbs.cfg.rho_i,
            rho_s: pbs.cfg.rho_s,
            park_gain: pbs.cfg.park_gain,
            axes: pbs.cfg.axes.to_string(),
            averaging: "means over successful trials only; failed trials count toward failure_rate",
            velocity_clamping: "rrmc, park and baur outputs are clamped to the joint velocity limits after each step \
                                (null-space part scaled first); mmc enforces the limits inside its QP",
            timing_recorded: pbs.record_timing,
        };
        Self { metadata, summary, rows }
    }

    pub fn summary_for(&self, c: Controller) -> Option<&ControllerSummary> {
        self.summary.iter().find(|s| s.controller == c)
    }

    /// Per-trial rows, trial-major, full precision.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ServoError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for row in &self.rows {
            let r = &row.result;
            w.write_record([
                row.trial.to_string(),
                row.controller.to_string(),
                r.outcome.to_string(),
                r.mean_m.to_string(),
                r.final_m.to_string(),
                r.max_deviation.to_string(),
                r.mean_deviation.to_string(),
                r.steps.to_string(),
                r.wall_time_per_step.map(|s| (s * 1e3).to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> Result<String, ServoError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<(), ServoError> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Human-readable summary laid out like a results table, one column per controller.
    pub fn table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        let pct = |v: Option<f64>| v.map_or(String::new(), |v| format!(", {:+.1}%", v * 100.0));
        let mut lines: Vec<(String, Vec<String>)> = vec![
            ("Controller".into(), self.summary.iter().map(|s| s.controller.to_string()).collect()),
            (
                "Mean Manipulability".into(),
                self.summary.iter().map(|s| opt(s.mean_m) + &pct(s.uplift_mean_m)).collect(),
            ),
            (
                "Mean Final Manipulability".into(),
                self.summary.iter().map(|s| opt(s.mean_final_m) + &pct(s.uplift_final_m)).collect(),
            ),
            ("Failures".into(), self.summary.iter().map(|s| format!("{:.1}%", s.failure_rate * 100.0)).collect()),
            ("Mean Max Deviation (m)".into(), self.summary.iter().map(|s| opt(s.mean_max_deviation)).collect()),
            ("Mean Deviation (m)".into(), self.summary.iter().map(|s| opt(s.mean_deviation)).collect()),
            (
                "Limit Violations".into(),
                self.summary.iter().map(|s| s.outcomes.joint_limit_violation.to_string()).collect(),
            ),
        ];
        if self.metadata.timing_recorded {
            lines.push(("Median Step (ms)".into(), self.summary.iter().map(|s| opt(s.median_ms_per_step)).collect()));
        }
        let label_w = lines.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        let col_w = lines.iter().flat_map(|(_, c)| c.iter().map(String::len)).max().unwrap_or(0);
        let mut out = format!(
            "{} ({} joints), {} trials, seed {}\n",
            self.metadata.model, self.metadata.joints, self.metadata.trials, self.metadata.seed
        );
        for (label, cells) in &lines {
            let _ = write!(out, "{label:<label_w$}");
            for c in cells {
                let _ = write!(out, "  {c:>col_w$}");
            }
            out.push('\n');
        }
        out
    }
}
