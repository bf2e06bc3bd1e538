use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmc_core::kinematics::AxisSelection;
use mmc_core::servo::Controller;

/// Differential kinematics, manipulability-maximising control and servoing experiments.
///
/// Every flag can also be set through an `MMC_`-prefixed environment variable
/// (`--lambda-q` is `MMC_LAMBDA_Q`) or through a `key = value` line in a `--config` file.
/// Command-line flags take precedence over the environment, which takes precedence over the file.
#[derive(Debug, Parser)]
#[command(name = "mmc", version)]
pub struct Cli {
    /// Key-value file providing defaults for any flag.
    #[arg(long, global = true, env = "MMC_CONFIG", value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print joint count, joint types, limits and transform count.
    ModelInfo(ModelArgs),
    /// Evaluate one kinematic quantity at a configuration.
    Eval(EvalArgs),
    /// Run one servoing trial with one controller.
    Servo(ServoArgs),
    /// Run seeded servoing trials for several controllers and write CSV and JSON results.
    Experiment(ExperimentArgs),
}

/// Exactly one model source is required.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Bundled model: panda, ur5 or planar2r.
    #[arg(long, env = "MMC_BUILTIN")]
    pub builtin: Option<String>,
    /// URDF file describing a serial chain.
    #[arg(long, env = "MMC_URDF", value_name = "PATH")]
    pub urdf: Option<PathBuf>,
    /// End-effector link of the URDF chain; defaults to the single leaf.
    #[arg(long, env = "MMC_TIP", requires = "urdf")]
    pub tip: Option<String>,
    /// Standard DH table.
    #[arg(long, env = "MMC_DH", value_name = "PATH")]
    pub dh: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    /// End-effector pose as a homogeneous matrix.
    Fk,
    /// 6×n base-frame Jacobian.
    Jacobian,
    /// Manipulability.
    Manip,
    /// Manipulability Jacobian.
    Jm,
    /// Velocity ellipsoid radii and axes.
    Ellipsoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EllipsoidArg {
    Trans,
    Rot,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    pub what: Quantity,
    /// Joint configuration, comma separated.
    #[arg(long, env = "MMC_Q", value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub q: Vec<f64>,
    /// Jacobian rows entering manipulability: all, trans, rot, trans-xy or a list such as 0,1,5.
    #[arg(long, env = "MMC_AXES", default_value = "all")]
    pub axes: AxisSelection,
    #[arg(long, env = "MMC_ELLIPSOID", value_enum, default_value_t = EllipsoidArg::Trans)]
    pub ellipsoid: EllipsoidArg,
    /// Print shortest round-trip values instead of 6 significant digits.
    #[arg(long, env = "MMC_FULL")]
    pub full: bool,
}

/// Controller and servo knobs; unset values keep the library defaults.
#[derive(Debug, Args)]
pub struct TuningArgs {
    /// Joint-velocity weight in the QP.
    #[arg(long, env = "MMC_LAMBDA_Q")]
    pub lambda_q: Option<f64>,
    /// Fixed slack weight, replacing the default of one over the pose error.
    #[arg(long, env = "MMC_LAMBDA_DELTA")]
    pub lambda_delta: Option<f64>,
    /// Cap on the error-dependent slack weight.
    #[arg(long, env = "MMC_LAMBDA_DELTA_CAP", conflicts_with = "lambda_delta")]
    pub lambda_delta_cap: Option<f64>,
    /// Velocity damper gain.
    #[arg(long, env = "MMC_ETA")]
    pub eta: Option<f64>,
    /// Damper influence distance, degrees.
    #[arg(long, env = "MMC_RHO_I_DEG")]
    pub rho_i_deg: Option<f64>,
    /// Damper stopping distance, degrees.
    #[arg(long, env = "MMC_RHO_S_DEG")]
    pub rho_s_deg: Option<f64>,
    /// Symmetric bound on every slack component.
    #[arg(long, env = "MMC_SLACK_BOUND")]
    pub slack_bound: Option<f64>,
    /// Null-space gain of the gradient-projection controllers.
    #[arg(long, env = "MMC_PARK_GAIN")]
    pub park_gain: Option<f64>,
    /// Weight of the manipulability term in the QP objective.
    #[arg(long, env = "MMC_MANIPULABILITY_GAIN")]
    pub manipulability_gain: Option<f64>,
    /// Manipulability below which a configuration counts as singular.
    #[arg(long, env = "MMC_EPS_SINGULAR")]
    pub eps_singular: Option<f64>,
    /// Jacobian rows entering manipulability.
    #[arg(long, env = "MMC_AXES")]
    pub axes: Option<AxisSelection>,
    /// Servo gain.
    #[arg(long, env = "MMC_GAIN")]
    pub gain: Option<f64>,
    /// Control period, s.
    #[arg(long, env = "MMC_DT")]
    pub dt: Option<f64>,
    /// Time budget per trial, s.
    #[arg(long, env = "MMC_T_MAX")]
    pub t_max: Option<f64>,
    /// Commanded linear speed cap, m/s.
    #[arg(long, env = "MMC_MAX_LINEAR_SPEED")]
    pub max_linear_speed: Option<f64>,
    /// Commanded angular speed cap, rad/s.
    #[arg(long, env = "MMC_MAX_ANGULAR_SPEED")]
    pub max_angular_speed: Option<f64>,
    /// Arrival tolerance on translation, m.
    #[arg(long, env = "MMC_ARRIVAL_TRANSLATION")]
    pub arrival_translation: Option<f64>,
    /// Arrival tolerance on rotation, degrees.
    #[arg(long, env = "MMC_ARRIVAL_ROTATION_DEG")]
    pub arrival_rotation_deg: Option<f64>,
    /// Measure wall time per controller step (makes output non-reproducible).
    #[arg(long, env = "MMC_RECORD_TIMING")]
    pub record_timing: bool,
}

#[derive(Debug, Args)]
pub struct ServoArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, env = "MMC_CONTROLLER", default_value = "mmc")]
    pub controller: Controller,
    /// Experiment seed the trial is drawn from.
    #[arg(long, env = "MMC_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Index of the trial within the seeded sequence.
    #[arg(long, env = "MMC_TRIAL", default_value_t = 0)]
    pub trial: usize,
    /// Explicit start configuration instead of a seeded one.
    #[arg(long, env = "MMC_Q_START", value_delimiter = ',', allow_hyphen_values = true, requires = "goal_q")]
    pub q_start: Option<Vec<f64>>,
    /// Goal given as the pose reached at this configuration.
    #[arg(long, env = "MMC_GOAL_Q", value_delimiter = ',', allow_hyphen_values = true, requires = "q_start")]
    pub goal_q: Option<Vec<f64>>,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Controllers to compare, comma separated.
    #[arg(long, env = "MMC_CONTROLLERS", value_delimiter = ',', default_value = "rrmc,park,baur,mmc")]
    pub controllers: Vec<Controller>,
    /// Number of trials.
    #[arg(long, env = "MMC_N", default_value_t = 100, value_parser = positive)]
    pub n: usize,
    #[arg(long, env = "MMC_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "MMC_JOBS", default_value_t = 1, value_parser = positive)]
    pub jobs: usize,
    /// Per-trial CSV output; `-` writes to stdout in place of the summary table.
    #[arg(long, env = "MMC_CSV", value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// JSON summary output.
    #[arg(long, env = "MMC_JSON", value_name = "PATH")]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}
