//! Position-based servoing trials and the multi-controller experiment harness.

mod collision;
mod report;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DVector, Point3, UnitQuaternion, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::control::{
    baur_step, mmc_step, park_step, rrmc_step, ControlError, ControlStep, ControllerConfig, SpatialVelocity, StepStatus,
};
use crate::kinematics::{forward_kinematics, jacobian, manipulability, KinematicsError};
use crate::model::{JointType, Pose, RobotModel};

pub use collision::{segment_distance, self_collides, DEFAULT_CAPSULE_RADIUS};
pub use report::{ControllerSummary, ExperimentMetadata, ExperimentReport, OutcomeCounts, TrialRow, CSV_HEADER};

/// Joint-space margin removed from each side of a revolute joint's range when sampling.
pub const SAMPLING_MARGIN: f64 = 50.0 * std::f64::consts::PI / 180.0;

/// Attempts before collision-proxy rejection sampling gives up.
pub const MAX_SAMPLING_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum ServoError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("joint {joint} has an empty sampling interval after removing 50° from each side")]
    EmptyInterval { joint: String },
    #[error("no collision-free configuration found in {attempts} attempts")]
    SamplingExhausted { attempts: usize },
    #[error("invalid servo configuration: {0}")]
    InvalidConfig(String),
    #[error("start configuration has {got} entries, model has {expected} joints")]
    StartLength { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Controller {
    Rrmc,
    Park,
    Baur,
    Mmc,
}

impl Controller {
    pub const ALL: [Controller; 4] = [Controller::Rrmc, Controller::Park, Controller::Baur, Controller::Mmc];

    pub fn name(self) -> &'static str {
        match self {
            Controller::Rrmc => "rrmc",
            Controller::Park => "park",
            Controller::Baur => "baur",
            Controller::Mmc => "mmc",
        }
    }

    /// Controllers whose output is clamped to the velocity limits after the step.
    pub fn is_clamped(self) -> bool {
        self != Controller::Mmc
    }

    pub fn step(
        self,
        model: &RobotModel,
        q: &[f64],
        nu: &SpatialVelocity,
        pose_error_norm: f64,
        cfg: &ControllerConfig,
    ) -> Result<ControlStep, ControlError> {
        match self {
            Controller::Rrmc => rrmc_step(model, q, nu),
            Controller::Park => park_step(model, q, nu, cfg),
            Controller::Baur => baur_step(model, q, nu, cfg),
            Controller::Mmc => mmc_step(model, q, nu, pose_error_norm, cfg),
        }
    }
}

impl fmt::Display for Controller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Controller {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rrmc" => Ok(Controller::Rrmc),
            "park" => Ok(Controller::Park),
            "baur" => Ok(Controller::Baur),
            "mmc" => Ok(Controller::Mmc),
            other => Err(format!("unknown controller '{other}' (expected rrmc, park, baur or mmc)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PbsConfig {
    pub k: f64,
    pub dt: f64,
    /// Arrival tolerance on translation, m.
    pub arrival_translation: f64,
    /// Arrival tolerance on rotation, rad.
    pub arrival_rotation: f64,
    pub t_max: f64,
    /// Cap on the commanded linear speed, m/s.
    pub max_linear_speed: f64,
    /// Cap on the commanded angular speed, rad/s.
    pub max_angular_speed: f64,
    pub controller: Controller,
    pub cfg: ControllerConfig,
    pub seed: u64,
    /// Measure wall time per controller step. Off by default so that output is reproducible.
    pub record_timing: bool,
}

impl Default for PbsConfig {
    fn default() -> Self {
        Self {
            k: 1.0,
            dt: 0.02,
            arrival_translation: 1e-3,
            arrival_rotation: 0.5f64.to_radians(),
            t_max: 30.0,
            max_linear_speed: 0.5,
            max_angular_speed: 1.0,
            controller: Controller::Mmc,
            cfg: ControllerConfig::default(),
            seed: 0,
            record_timing: false,
        }
    }
}

impl PbsConfig {
    pub fn validate(&self) -> Result<(), ServoError> {
        let positive = [
            ("k", self.k),
            ("dt", self.dt),
            ("arrival_translation", self.arrival_translation),
            ("arrival_rotation", self.arrival_rotation),
            ("t_max", self.t_max),
            ("max_linear_speed", self.max_linear_speed),
            ("max_angular_speed", self.max_angular_speed),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ServoError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        self.cfg.validate()?;
        Ok(())
    }
}

/// Error twist `(p* − p, angle-axis(R* Rᵀ))` in the base frame.
pub fn pose_error(current: &Pose, goal: &Pose) -> SpatialVelocity {
    let dp = goal.translation.vector - current.translation.vector;
    let dr = goal.rotation * current.rotation.inverse();
    let w = UnitQuaternion::from_rotation_matrix(&dr).scaled_axis();
    Vector6::new(dp.x, dp.y, dp.z, w.x, w.y, w.z)
}

/// Servo law `ν = k · pose_error(current, goal)`.
pub fn pbs_velocity(current: &Pose, goal: &Pose, k: f64) -> SpatialVelocity {
    pose_error(current, goal) * k
}

/// Scale the linear and angular parts of `nu` independently so neither exceeds its cap.
pub fn cap_twist(nu: &SpatialVelocity, max_linear: f64, max_angular: f64) -> SpatialVelocity {
    let mut out = *nu;
    let v = nu.fixed_rows::<3>(0).norm();
    if v > max_linear {
        out.fixed_rows_mut::<3>(0).scale_mut(max_linear / v);
    }
    let w = nu.fixed_rows::<3>(3).norm();
    if w > max_angular {
        out.fixed_rows_mut::<3>(3).scale_mut(max_angular / w);
    }
    out
}

/// Per-joint sampling interval: revolute joints lose 50° at each end.
pub fn sampling_bounds(model: &RobotModel) -> Result<Vec<(f64, f64)>, ServoError> {
    let lim = model.limits();
    (0..model.n())
        .map(|i| {
            let margin = match model.joint_types()[i] {
                JointType::Revolute => SAMPLING_MARGIN,
                JointType::Prismatic => 0.0,
            };
            let (lo, hi) = (lim.position_min[i] + margin, lim.position_max[i] - margin);
            if lo > hi {
                Err(ServoError::EmptyInterval { joint: model.joint_names()[i].clone() })
            } else {
                Ok((lo, hi))
            }
        })
        .collect()
}

/// Uniform sample inside the shrunken joint ranges, rejecting configurations that fail the
/// capsule self-collision proxy.
pub fn sample_start_config(model: &RobotModel, seed: u64) -> Result<Vec<f64>, ServoError> {
    let bounds = sampling_bounds(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_SAMPLING_ATTEMPTS {
        let q: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
        if !self_collides(model, &q, DEFAULT_CAPSULE_RADIUS) {
            return Ok(q);
        }
    }
    Err(ServoError::SamplingExhausted { attempts: MAX_SAMPLING_ATTEMPTS })
}

/// Forward kinematics of a configuration drawn by [`sample_start_config`].
pub fn sample_goal_pose(model: &RobotModel, seed: u64) -> Result<Pose, ServoError> {
    let q = sample_start_config(model, seed)?;
    Ok(forward_kinematics(model, &q)?)
}

/// Start and goal seeds of trial `trial` in an experiment seeded with `seed`.
pub fn trial_seeds(seed: u64, trial: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    (rng.gen(), rng.gen())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    pub model: String,
    pub q_start: Vec<f64>,
    pub goal: Pose,
    pub seed: u64,
}

/// The `n` seeded (start, goal) pairs of an experiment.
pub fn generate_trials(model: &RobotModel, n: usize, seed: u64) -> Result<Vec<TrialSpec>, ServoError> {
    (0..n)
        .map(|i| {
            let (s_start, s_goal) = trial_seeds(seed, i);
            Ok(TrialSpec {
                model: model.name().to_string(),
                q_start: sample_start_config(model, s_start)?,
                goal: sample_goal_pose(model, s_goal)?,
                seed: s_start,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Timeout,
    JointLimitViolation,
    QpInfeasible,
    SingularAbort,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::Success,
        Outcome::Timeout,
        Outcome::JointLimitViolation,
        Outcome::QpInfeasible,
        Outcome::SingularAbort,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Timeout => "timeout",
            Outcome::JointLimitViolation => "joint_limit_violation",
            Outcome::QpInfeasible => "qp_infeasible",
            Outcome::SingularAbort => "singular_abort",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub outcome: Outcome,
    /// Manipulability averaged over every visited configuration, start and end included.
    pub mean_m: f64,
    pub final_m: f64,
    pub max_deviation: f64,
    pub mean_deviation: f64,
    pub steps: usize,
    /// Translation and rotation error of the last visited pose, m and rad.
    pub final_translation_error: f64,
    pub final_rotation_error: f64,
    /// Mean controller wall time per step, s. Present only when timing is recorded.
    pub wall_time_per_step: Option<f64>,
    /// Largest `‖J q̇ + δ − ν‖∞` over the steps the controller reported as ok.
    pub max_task_residual: f64,
    pub mean_slack_norm: f64,
}

/// Distance from `p` to the segment `a`–`b`.
pub fn point_segment_distance(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab: Vector3<f64> = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

/// Scale the null-space part of `step` first, then the whole vector, to fit `[vmin, vmax]`.
pub fn clamp_velocity(step: &ControlStep, vmin: &DVector<f64>, vmax: &DVector<f64>) -> DVector<f64> {
    let task = &step.qdot - &step.null_space;
    let fits = |v: &DVector<f64>| (0..v.len()).all(|i| v[i] >= vmin[i] && v[i] <= vmax[i]);
    if fits(&step.qdot) {
        return step.qdot.clone();
    }
    // largest scale s in [0, 1] with lo <= base + s·dir <= hi for every joint
    let max_scale = |base: &DVector<f64>, dir: &DVector<f64>| {
        (0..dir.len()).fold(1.0f64, |s, i| {
            let limit = if dir[i] > 0.0 {
                (vmax[i] - base[i]) / dir[i]
            } else if dir[i] < 0.0 {
                (vmin[i] - base[i]) / dir[i]
            } else {
                f64::INFINITY
            };
            s.min(limit.max(0.0))
        })
    };
    if fits(&task) {
        let s = max_scale(&task, &step.null_space);
        return &task + &step.null_space * s;
    }
    let s = max_scale(&DVector::zeros(task.len()), &task);
    task * s
}

/// Run one servo trial from `spec.q_start` to `spec.goal`.
pub fn run_trial(model: &RobotModel, spec: &TrialSpec, pbs: &PbsConfig) -> Result<TrialResult, ServoError> {
    pbs.validate()?;
    let n = model.n();
    if spec.q_start.len() != n {
        return Err(ServoError::StartLength { expected: n, got: spec.q_start.len() });
    }
    let (vmin, vmax) = pbs.cfg.velocity_bounds(model)?;
    let limits = model.limits();
    let axes = pbs.cfg.axes;

    let mut q = DVector::from_column_slice(&spec.q_start);
    let p_start = Point3::from(forward_kinematics(model, &spec.q_start)?.translation.vector);
    let p_goal = Point3::from(spec.goal.translation.vector);
    let max_steps = (pbs.t_max / pbs.dt).round() as usize;

    let mut m_sum = 0.0;
    let mut m_last;
    let mut final_err;
    let mut dev_sum = 0.0;
    let mut dev_max = 0.0f64;
    let mut samples = 0usize;
    let mut steps = 0usize;
    let mut step_time = 0.0;
    let mut max_task_residual = 0.0f64;
    let mut slack_sum = 0.0;

    let outcome = loop {
        let qs = q.as_slice();
        let pose = forward_kinematics(model, qs)?;
        let jac = jacobian(model, qs)?;
        m_last = manipulability(&jac, axes);
        let dev = point_segment_distance(&Point3::from(pose.translation.vector), &p_start, &p_goal);
        m_sum += m_last;
        dev_sum += dev;
        dev_max = dev_max.max(dev);
        samples += 1;

        let err = pose_error(&pose, &spec.goal);
        let trans_err = err.fixed_rows::<3>(0).norm();
        let rot_err = err.fixed_rows::<3>(3).norm();
        final_err = (trans_err, rot_err);
        if !limits.contains(qs) {
            break Outcome::JointLimitViolation;
        }
        if trans_err <= pbs.arrival_translation && rot_err <= pbs.arrival_rotation {
            break Outcome::Success;
        }
        if steps >= max_steps {
            break Outcome::Timeout;
        }
        let nu = cap_twist(&(err * pbs.k), pbs.max_linear_speed, pbs.max_angular_speed);

        let started = pbs.record_timing.then(Instant::now);
        let step = pbs.controller.step(model, qs, &nu, err.norm(), &pbs.cfg)?;
        if let Some(t0) = started {
            step_time += t0.elapsed().as_secs_f64();
        }
        match step.status {
            StepStatus::Singular => break Outcome::SingularAbort,
            StepStatus::Infeasible => break Outcome::QpInfeasible,
            StepStatus::Ok => {}
        }
        max_task_residual = max_task_residual.max(step.task_residual(&jac, &nu));
        slack_sum += step.slack.norm();

        let qdot = if pbs.controller.is_clamped() { clamp_velocity(&step, &vmin, &vmax) } else { step.qdot };
        q.axpy(pbs.dt, &qdot, 1.0);
        steps += 1;
    };

    Ok(TrialResult {
        outcome,
        mean_m: m_sum / samples as f64,
        final_m: m_last,
        max_deviation: dev_max,
        mean_deviation: dev_sum / samples as f64,
        steps,
        final_translation_error: final_err.0,
        final_rotation_error: final_err.1,
        wall_time_per_step: (pbs.record_timing && steps > 0).then(|| step_time / steps as f64),
        max_task_residual,
        mean_slack_norm: if steps > 0 { slack_sum / steps as f64 } else { 0.0 },
    })
}

/// Run every controller on `n` seeded trials of `model`.
///
/// `pbs.controller` is ignored; `jobs` worker threads share the trials. Results are ordered
/// by trial, then by the order of `controllers`.
pub fn run_experiment(
    model: &RobotModel,
    n: usize,
    controllers: &[Controller],
    pbs: &PbsConfig,
    jobs: usize,
) -> Result<ExperimentReport, ServoError> {
    if n == 0 {
        return Err(ServoError::InvalidConfig("trial count must be at least 1".into()));
    }
    let specs = generate_trials(model, n, pbs.seed)?;
    run_experiment_on(model, &specs, controllers, pbs, jobs)
}

/// Like [`run_experiment`] on caller-supplied trials.
pub fn run_experiment_on(
    model: &RobotModel,
    specs: &[TrialSpec],
    controllers: &[Controller],
    pbs: &PbsConfig,
    jobs: usize,
) -> Result<ExperimentReport, ServoError> {
    pbs.validate()?;
    if controllers.is_empty() {
        return Err(ServoError::InvalidConfig("no controllers selected".into()));
    }
    let work: Vec<(usize, Controller)> =
        (0..specs.len()).flat_map(|t| controllers.iter().map(move |&c| (t, c))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ServoError::InvalidConfig(e.to_string()))?;
    let results: Result<Vec<TrialRow>, ServoError> = pool.install(|| {
        work.par_iter()
            .map(|&(trial, controller)| {
                let cfg = PbsConfig { controller, ..pbs.clone() };
                let result = run_trial(model, &specs[trial], &cfg)?;
                Ok(TrialRow { trial, controller, result })
            })
            .collect()
    });
    let rows = results?;
    Ok(ExperimentReport::new(model, specs.len(), controllers, pbs, rows))
}
