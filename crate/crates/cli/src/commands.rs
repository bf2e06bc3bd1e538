use std::fmt::Write as _;
use std::path::Path;

use clap::parser::ValueSource;
use clap::ArgMatches;
use mmc_core::control::SlackWeight;
use mmc_core::kinematics::{
    forward_kinematics, jacobian, manipulability, manipulability_jacobian, velocity_ellipsoid, EllipsoidKind,
};
use mmc_core::model::{builtin_model, parse_dh_table, parse_urdf, ModelError, RobotModel};
use mmc_core::servo::{generate_trials, run_experiment, run_trial, ExperimentReport, PbsConfig, TrialSpec};
use nalgebra::Vector6;

use crate::args::{Command, EllipsoidArg, EvalArgs, ExperimentArgs, ModelArgs, Quantity, ServoArgs, TuningArgs};
use crate::format::{number, row, sig6};
use crate::CliError;

/// `writeln!` into a `String`, which cannot fail.
macro_rules! push_line {
    ($out:expr, $($arg:tt)*) => {{
        let _ = writeln!($out, $($arg)*);
    }};
}

pub fn dispatch(command: Command, matches: &ArgMatches) -> Result<String, CliError> {
    match command {
        Command::ModelInfo(a) => model_info(&load_model(&a, matches)?),
        Command::Eval(a) => eval(&a, matches),
        Command::Servo(a) => servo(&a, matches),
        Command::Experiment(a) => experiment(&a, matches),
    }
}

fn read(path: &Path) -> Result<String, ModelError> {
    std::fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.display().to_string(), source })
}

/// Resolve the model source. A flag given on the command line wins over one coming from the
/// environment or a config file; two sources at the same level are ambiguous.
fn load_model(a: &ModelArgs, matches: &ArgMatches) -> Result<RobotModel, CliError> {
    let given: Vec<&str> =
        ["builtin", "urdf", "dh"].into_iter().filter(|id| matches.value_source(id).is_some()).collect();
    let explicit: Vec<&str> =
        given.iter().copied().filter(|id| matches.value_source(id) == Some(ValueSource::CommandLine)).collect();
    let chosen = if explicit.is_empty() { &given } else { &explicit };
    let source = match chosen.as_slice() {
        [one] => *one,
        [] => return Err(CliError::Usage("a model source is required: --builtin, --urdf or --dh".into())),
        many => return Err(CliError::Usage(format!("conflicting model sources: --{}", many.join(", --")))),
    };
    let model = match source {
        "builtin" => builtin_model(a.builtin.as_deref().expect("present"))?,
        "urdf" => parse_urdf(&read(a.urdf.as_deref().expect("present"))?, a.tip.as_deref())?,
        _ => {
            let path = a.dh.as_deref().expect("present");
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("robot");
            parse_dh_table(name, &read(path)?)?
        }
    };
    Ok(model)
}

fn model_info(model: &RobotModel) -> Result<String, CliError> {
    let mut out = String::new();
    let lim = model.limits();
    push_line!(out, "name: {}", model.name());
    push_line!(out, "joints: {}", model.n());
    push_line!(out, "ets length: {}", model.ets().len());
    let width = model.joint_names().iter().map(|s| s.len()).max().unwrap_or(4).max(4);
    push_line!(
        out,
        "{:>5}  {:<width$}  {:<9}  {:>10}  {:>10}  {:>10}",
        "index",
        "name",
        "type",
        "min",
        "max",
        "max vel"
    );
    for i in 0..model.n() {
        push_line!(
            out,
            "{:>5}  {:<width$}  {:<9}  {:>10}  {:>10}  {:>10}",
            i,
            model.joint_names()[i],
            model.joint_types()[i].to_string(),
            sig6(lim.position_min[i]),
            sig6(lim.position_max[i]),
            sig6(lim.velocity_max[i]),
        );
    }
    Ok(out)
}

fn eval(a: &EvalArgs, matches: &ArgMatches) -> Result<String, CliError> {
    let mut out = String::new();
    let model = load_model(&a.model, matches)?;
    let q = &a.q;
    let full = a.full;
    match a.what {
        Quantity::Fk => {
            let t = forward_kinematics(&model, q)?.to_homogeneous();
            for r in t.row_iter() {
                push_line!(out, "{}", row(r.iter(), full));
            }
        }
        Quantity::Jacobian => {
            for r in jacobian(&model, q)?.row_iter() {
                push_line!(out, "{}", row(r.iter(), full));
            }
        }
        Quantity::Manip => push_line!(out, "{}", number(manipulability(&jacobian(&model, q)?, a.axes), full)),
        Quantity::Jm => push_line!(out, "{}", row(manipulability_jacobian(&model, q, a.axes)?.iter(), full)),
        Quantity::Ellipsoid => {
            let kind = match a.ellipsoid {
                EllipsoidArg::Trans => EllipsoidKind::Translational,
                EllipsoidArg::Rot => EllipsoidKind::Rotational,
            };
            let e = velocity_ellipsoid(&jacobian(&model, q)?, kind);
            push_line!(out, "radii: {}", row(e.radii.iter(), full));
            push_line!(out, "axes (columns):");
            for r in e.axes.row_iter() {
                push_line!(out, "{}", row(r.iter(), full));
            }
        }
    }
    Ok(out)
}

fn apply_tuning(t: &TuningArgs, pbs: &mut PbsConfig) {
    let cfg = &mut pbs.cfg;
    if let Some(v) = t.lambda_q {
        cfg.lambda_q = v;
    }
    if let Some(v) = t.lambda_delta {
        cfg.lambda_delta = SlackWeight::Fixed(v);
    }
    if let Some(v) = t.lambda_delta_cap {
        cfg.lambda_delta = SlackWeight::InverseError { max_cap: v };
    }
    if let Some(v) = t.eta {
        cfg.eta = v;
    }
    if let Some(v) = t.rho_i_deg {
        cfg.rho_i = v.to_radians();
    }
    if let Some(v) = t.rho_s_deg {
        cfg.rho_s = v.to_radians();
    }
    if let Some(v) = t.slack_bound {
        cfg.slack_lower = Vector6::repeat(-v);
        cfg.slack_upper = Vector6::repeat(v);
    }
    if let Some(v) = t.park_gain {
        cfg.park_gain = v;
    }
    if let Some(v) = t.manipulability_gain {
        cfg.manipulability_gain = v;
    }
    if let Some(v) = t.eps_singular {
        cfg.eps_singular = v;
    }
    if let Some(v) = t.axes {
        cfg.axes = v;
    }
    if let Some(v) = t.gain {
        pbs.k = v;
    }
    if let Some(v) = t.dt {
        pbs.dt = v;
    }
    if let Some(v) = t.t_max {
        pbs.t_max = v;
    }
    if let Some(v) = t.max_linear_speed {
        pbs.max_linear_speed = v;
    }
    if let Some(v) = t.max_angular_speed {
        pbs.max_angular_speed = v;
    }
    if let Some(v) = t.arrival_translation {
        pbs.arrival_translation = v;
    }
    if let Some(v) = t.arrival_rotation_deg {
        pbs.arrival_rotation = v.to_radians();
    }
    pbs.record_timing = t.record_timing;
}

fn servo(a: &ServoArgs, matches: &ArgMatches) -> Result<String, CliError> {
    let mut out = String::new();
    let model = load_model(&a.model, matches)?;
    let mut pbs = PbsConfig { controller: a.controller, seed: a.seed, ..Default::default() };
    apply_tuning(&a.tuning, &mut pbs);
    let spec = match (&a.q_start, &a.goal_q) {
        (Some(start), Some(goal)) => TrialSpec {
            model: model.name().to_string(),
            goal: forward_kinematics(&model, goal)?,
            q_start: start.clone(),
            seed: a.seed,
        },
        _ => generate_trials(&model, a.trial + 1, a.seed)?.swap_remove(a.trial),
    };
    let r = run_trial(&model, &spec, &pbs)?;
    push_line!(out, "controller: {}", a.controller);
    push_line!(out, "outcome: {}", r.outcome.name());
    push_line!(out, "steps: {}", r.steps);
    push_line!(out, "mean manipulability: {}", sig6(r.mean_m));
    push_line!(out, "final manipulability: {}", sig6(r.final_m));
    push_line!(out, "max deviation (m): {}", sig6(r.max_deviation));
    push_line!(out, "mean deviation (m): {}", sig6(r.mean_deviation));
    push_line!(out, "final translation error (m): {}", sig6(r.final_translation_error));
    push_line!(out, "final rotation error (rad): {}", sig6(r.final_rotation_error));
    push_line!(out, "max task residual: {}", sig6(r.max_task_residual));
    push_line!(out, "mean slack norm: {}", sig6(r.mean_slack_norm));
    if let Some(t) = r.wall_time_per_step {
        push_line!(out, "ms per step: {}", sig6(t * 1e3));
    }
    Ok(out)
}

/// Write `text` to `path`, or append it to `out` when the path is `-`.
fn emit(path: &Path, text: &str, out: &mut String) -> Result<(), CliError> {
    if path == Path::new("-") {
        out.push_str(text);
        return Ok(());
    }
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn experiment(a: &ExperimentArgs, matches: &ArgMatches) -> Result<String, CliError> {
    let mut out = String::new();
    let model = load_model(&a.model, matches)?;
    for (i, c) in a.controllers.iter().enumerate() {
        if a.controllers[..i].contains(c) {
            return Err(CliError::Usage(format!("controller '{c}' listed twice")));
        }
    }
    let mut pbs = PbsConfig { seed: a.seed, ..Default::default() };
    apply_tuning(&a.tuning, &mut pbs);
    let report: ExperimentReport = run_experiment(&model, a.n, &a.controllers, &pbs, a.jobs)?;

    if let Some(path) = &a.csv {
        emit(path, &report.csv_string()?, &mut out)?;
    }
    if let Some(path) = &a.json {
        let mut json = Vec::new();
        report.write_json(&mut json)?;
        json.push(b'\n');
        emit(path, &String::from_utf8(json).expect("JSON is UTF-8"), &mut out)?;
    }
    if a.csv.as_deref() != Some(Path::new("-")) {
        out.push_str(&report.table());
    }
    Ok(out)
}
