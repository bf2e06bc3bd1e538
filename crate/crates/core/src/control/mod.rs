//! One velocity-control step for each controller.
//!
//! All controllers share the same pseudoinverse: the Jacobian is padded with zero rows to a
//! square `max(6, n) × n` matrix before the SVD so that the full right singular basis is
//! available. The null-space projector is then built from the singular vectors whose
//! singular values vanish, which makes it exactly zero for a square nonsingular Jacobian.

use nalgebra::{DMatrix, DVector, Vector6};
use thiserror::Error;

use crate::kinematics::{
    jacobian_and_hessian, manipulability, manipulability_jacobian_from, AxisSelection, Jacobian, KinematicsError,
};
use crate::model::RobotModel;
use crate::qp::{self, QpError, QpStatus, QuadraticProgram};

/// Spatial velocity `(v, ω)` in the base frame.
pub type SpatialVelocity = Vector6<f64>;

/// Singular value below which the task Jacobian is reported as singular.
pub const SINGULAR_VALUE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("invalid controller configuration: {0}")]
    InvalidConfig(String),
    #[error("velocity limits have {got} entries, model has {expected} joints")]
    VelocityLimitLength { expected: usize, got: usize },
}

/// How the slack weight `λ_δ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlackWeight {
    Fixed(f64),
    /// `λ_δ = min(1 / e, max_cap)` with `e` the norm of the pose error twist.
    InverseError {
        max_cap: f64,
    },
}

impl SlackWeight {
    pub fn value(&self, pose_error_norm: f64) -> f64 {
        match *self {
            SlackWeight::Fixed(v) => v,
            SlackWeight::InverseError { max_cap } => {
                if pose_error_norm > 0.0 {
                    (1.0 / pose_error_norm).min(max_cap)
                } else {
                    max_cap
                }
            }
        }
    }
}

/// Source of the joint velocity bounds used by the QP and by post-hoc clamping.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum VelocityLimits {
    #[default]
    Model,
    Custom {
        min: DVector<f64>,
        max: DVector<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub lambda_q: f64,
    pub lambda_delta: SlackWeight,
    /// Velocity damper gain, rad/s.
    pub eta: f64,
    /// Influence distance, rad.
    pub rho_i: f64,
    /// Stopping distance, rad.
    pub rho_s: f64,
    pub velocity_limits: VelocityLimits,
    pub slack_lower: Vector6<f64>,
    pub slack_upper: Vector6<f64>,
    pub park_gain: f64,
    pub eps_singular: f64,
    /// Rows of the Jacobian that enter the manipulability measure.
    pub axes: AxisSelection,
    /// Multiplies `J_m` in the MMC objective; zero turns the QP into a minimum-norm solve.
    pub manipulability_gain: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            lambda_q: 0.01,
            lambda_delta: SlackWeight::InverseError { max_cap: 1e6 },
            eta: 1.0,
            rho_i: 50f64.to_radians(),
            rho_s: 2f64.to_radians(),
            velocity_limits: VelocityLimits::Model,
            slack_lower: Vector6::repeat(-10.0),
            slack_upper: Vector6::repeat(10.0),
            park_gain: 100.0,
            eps_singular: 1e-8,
            axes: AxisSelection::All,
            manipulability_gain: 1.0,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let positive = [
            ("lambda_q", self.lambda_q),
            ("eta", self.eta),
            ("park_gain", self.park_gain),
            ("eps_singular", self.eps_singular),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ControlError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        match self.lambda_delta {
            SlackWeight::Fixed(v) | SlackWeight::InverseError { max_cap: v } if !(v > 0.0 && v.is_finite()) => {
                return Err(ControlError::InvalidConfig(format!("slack weight must be positive, got {v}")));
            }
            _ => {}
        }
        if !(0.0 <= self.rho_s && self.rho_s < self.rho_i && self.rho_i.is_finite()) {
            return Err(ControlError::InvalidConfig(format!(
                "need 0 <= rho_s < rho_i, got rho_s={} rho_i={}",
                self.rho_s, self.rho_i
            )));
        }
        if !(self.manipulability_gain >= 0.0 && self.manipulability_gain.is_finite()) {
            return Err(ControlError::InvalidConfig("manipulability_gain must be non-negative".into()));
        }
        if (0..6).any(|i| !(self.slack_lower[i] <= self.slack_upper[i])) {
            return Err(ControlError::InvalidConfig("slack bounds are inverted".into()));
        }
        Ok(())
    }

    /// Velocity bounds `(min, max)` for `model`.
    pub fn velocity_bounds(&self, model: &RobotModel) -> Result<(DVector<f64>, DVector<f64>), ControlError> {
        let n = model.n();
        match &self.velocity_limits {
            VelocityLimits::Model => Ok((model.limits().velocity_min.clone(), model.limits().velocity_max.clone())),
            VelocityLimits::Custom { min, max } => {
                if min.len() != n || max.len() != n {
                    return Err(ControlError::VelocityLimitLength { expected: n, got: min.len().min(max.len()) });
                }
                Ok((min.clone(), max.clone()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Ok,
    Singular,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlStep {
    pub qdot: DVector<f64>,
    pub slack: Vector6<f64>,
    pub status: StepStatus,
    /// Manipulability at `q`.
    pub m: f64,
    /// `J_mᵀ q̇`, zero when `J_m` is unavailable.
    pub mdot_predicted: f64,
    /// The part of `qdot` added through the null-space projector.
    pub null_space: DVector<f64>,
}

impl ControlStep {
    /// `‖J q̇ + δ − ν‖∞`.
    pub fn task_residual(&self, jac: &Jacobian, nu: &SpatialVelocity) -> f64 {
        (jac * &self.qdot + self.slack - nu).amax()
    }
}

/// Pseudoinverse of a Jacobian together with its null-space projector.
#[derive(Debug, Clone)]
pub struct Pseudoinverse {
    pub pinv: DMatrix<f64>,
    pub null_projector: DMatrix<f64>,
    /// Smallest of the `min(rows, n)` task singular values.
    pub sigma_min: f64,
}

pub fn pseudoinverse(jac: &DMatrix<f64>) -> Pseudoinverse {
    let (rows, n) = jac.shape();
    let p = rows.max(n);
    let mut padded = DMatrix::zeros(p, n);
    padded.rows_mut(0, rows).copy_from(jac);
    let svd = padded.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.max();
    let cutoff = p as f64 * f64::EPSILON * sigma_max;

    let mut pinv = DMatrix::zeros(n, rows);
    let mut null_projector = DMatrix::zeros(n, n);
    for k in 0..n {
        let v = v_t.row(k).transpose();
        if sigma[k] > cutoff {
            let uk = u.column(k).rows(0, rows).transpose();
            pinv += (&v / sigma[k]) * uk;
        } else {
            null_projector += &v * v.transpose();
        }
    }
    let mut task: Vec<f64> = sigma.iter().copied().collect();
    task.sort_by(|a, b| b.total_cmp(a));
    let sigma_min = task[rows.min(n) - 1];
    Pseudoinverse { pinv, null_projector, sigma_min }
}

fn to_dmatrix(jac: &Jacobian) -> DMatrix<f64> {
    DMatrix::from_column_slice(6, jac.ncols(), jac.as_slice())
}

fn check_nu(nu: &SpatialVelocity) -> Result<(), ControlError> {
    if let Some(i) = nu.iter().position(|v| !v.is_finite()) {
        return Err(KinematicsError::NonFinite(i).into());
    }
    Ok(())
}

/// Resolved-rate step from a precomputed Jacobian.
pub fn rrmc_from_jacobian(jac: &DMatrix<f64>, nu: &DVector<f64>) -> (DVector<f64>, f64) {
    let ps = pseudoinverse(jac);
    (&ps.pinv * nu, ps.sigma_min)
}

/// Resolved-rate motion control: `q̇ = J⁺ν`.
pub fn rrmc_step(model: &RobotModel, q: &[f64], nu: &SpatialVelocity) -> Result<ControlStep, ControlError> {
    check_nu(nu)?;
    let (jac, _) = jacobian_and_hessian(model, q)?;
    let ps = pseudoinverse(&to_dmatrix(&jac));
    let qdot = &ps.pinv * nu;
    let status = if ps.sigma_min < SINGULAR_VALUE_TOL { StepStatus::Singular } else { StepStatus::Ok };
    let m = manipulability(&jac, AxisSelection::All);
    Ok(ControlStep {
        null_space: DVector::zeros(qdot.len()),
        qdot,
        slack: Vector6::zeros(),
        status,
        m,
        mdot_predicted: 0.0,
    })
}

/// Joint-limit repulsion vector used by [`baur_step`].
///
/// Joint `i` within `ρ_i` of its nearest limit is pushed away from it with magnitude
/// `η (ρ_i − ρ) / (ρ_i − ρ_s)`.
pub fn joint_limit_repulsion(model: &RobotModel, q: &[f64], cfg: &ControllerConfig) -> DVector<f64> {
    let lim = model.limits();
    DVector::from_fn(model.n(), |i, _| match nearest_limit(lim.position_min[i], lim.position_max[i], q[i]) {
        (rho, side) if rho < cfg.rho_i => {
            let mag = cfg.eta * (cfg.rho_i - rho) / (cfg.rho_i - cfg.rho_s);
            match side {
                LimitSide::Upper => -mag,
                LimitSide::Lower => mag,
            }
        }
        _ => 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LimitSide {
    Lower,
    Upper,
}

fn nearest_limit(lo: f64, hi: f64, q: f64) -> (f64, LimitSide) {
    let up = hi - q;
    let down = q - lo;
    if up <= down {
        (up, LimitSide::Upper)
    } else {
        (down, LimitSide::Lower)
    }
}

fn gradient_projection_step(
    model: &RobotModel,
    q: &[f64],
    nu: &SpatialVelocity,
    cfg: &ControllerConfig,
    with_limits: bool,
) -> Result<ControlStep, ControlError> {
    cfg.validate()?;
    check_nu(nu)?;
    let (jac, hess) = jacobian_and_hessian(model, q)?;
    let ps = pseudoinverse(&to_dmatrix(&jac));
    let task = &ps.pinv * nu;
    let m = manipulability(&jac, cfg.axes);
    let n = model.n();

    // With an empty null space the gradient term cannot contribute, so it is not formed.
    let has_null_space = ps.null_projector.iter().any(|&v| v != 0.0);
    let gradient = if has_null_space {
        manipulability_jacobian_from(&jac, &hess, cfg.axes, cfg.eps_singular).map(Some)
    } else {
        Ok(None)
    };
    let (null_space, jm, mut status) = match gradient {
        Ok(None) => (DVector::zeros(n), None, StepStatus::Ok),
        Ok(Some(jm)) => {
            let mut w = &jm * cfg.manipulability_gain;
            if with_limits {
                w += joint_limit_repulsion(model, q, cfg);
            }
            ((&ps.null_projector * w) * cfg.park_gain, Some(jm), StepStatus::Ok)
        }
        Err(KinematicsError::Singular { .. }) => (DVector::zeros(n), None, StepStatus::Singular),
        Err(e) => return Err(e.into()),
    };
    if ps.sigma_min < SINGULAR_VALUE_TOL {
        status = StepStatus::Singular;
    }
    let qdot = &task + &null_space;
    let mdot_predicted = jm.map_or(0.0, |jm| jm.dot(&qdot));
    Ok(ControlStep { qdot, slack: Vector6::zeros(), status, m, mdot_predicted, null_space })
}

/// Gradient projection: `q̇ = J⁺ν + k (I − J⁺J) J_m`.
pub fn park_step(
    model: &RobotModel,
    q: &[f64],
    nu: &SpatialVelocity,
    cfg: &ControllerConfig,
) -> Result<ControlStep, ControlError> {
    gradient_projection_step(model, q, nu, cfg, false)
}

/// Gradient projection with joint-limit repulsion: `q̇ = J⁺ν + k (I − J⁺J)(J_m + w_jl)`.
pub fn baur_step(
    model: &RobotModel,
    q: &[f64],
    nu: &SpatialVelocity,
    cfg: &ControllerConfig,
) -> Result<ControlStep, ControlError> {
    gradient_projection_step(model, q, nu, cfg, true)
}

/// Velocity damper upper bound `η (ρ − ρ_s) / (ρ_i − ρ_s)`, active only inside `ρ_i`.
pub fn velocity_damper(rho: f64, cfg: &ControllerConfig) -> Option<f64> {
    (rho < cfg.rho_i).then(|| cfg.eta * (rho - cfg.rho_s) / (cfg.rho_i - cfg.rho_s))
}

/// Damper rows `A q̇ ≤ b` for the joints inside their influence distance, padded with zero
/// columns for `extra_columns` trailing decision variables.
pub fn damper_constraints(
    model: &RobotModel,
    q: &[f64],
    cfg: &ControllerConfig,
    extra_columns: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let lim = model.limits();
    let n = model.n();
    let mut rows = Vec::new();
    for (i, &qi) in q.iter().enumerate().take(n) {
        let (rho, side) = nearest_limit(lim.position_min[i], lim.position_max[i], qi);
        if let Some(bound) = velocity_damper(rho, cfg) {
            let sign = match side {
                LimitSide::Upper => 1.0,
                LimitSide::Lower => -1.0,
            };
            rows.push((i, sign, bound));
        }
    }
    let mut a = DMatrix::zeros(rows.len(), n + extra_columns);
    let mut b = DVector::zeros(rows.len());
    for (r, &(i, sign, bound)) in rows.iter().enumerate() {
        a[(r, i)] = sign;
        b[r] = bound;
    }
    (a, b)
}

/// Manipulability-maximising QP step with slack.
///
/// Decision vector `x = (q̇, δ)`, objective `½ xᵀ blockdiag(λ_q I, λ_δ I) x − (k J_m, 0)ᵀ x`,
/// equality `J q̇ + δ = ν`, damper rows on `q̇` and box bounds on both blocks.
pub fn mmc_step(
    model: &RobotModel,
    q: &[f64],
    nu: &SpatialVelocity,
    pose_error_norm: f64,
    cfg: &ControllerConfig,
) -> Result<ControlStep, ControlError> {
    cfg.validate()?;
    check_nu(nu)?;
    let n = model.n();
    let (jac, hess) = jacobian_and_hessian(model, q)?;
    let (vmin, vmax) = cfg.velocity_bounds(model)?;
    let m = manipulability(&jac, cfg.axes);
    let (jm, mut status) = match manipulability_jacobian_from(&jac, &hess, cfg.axes, cfg.eps_singular) {
        Ok(jm) => (jm, StepStatus::Ok),
        Err(KinematicsError::Singular { .. }) => (DVector::zeros(n), StepStatus::Singular),
        Err(e) => return Err(e.into()),
    };

    let k = n + 6;
    let lambda_delta = cfg.lambda_delta.value(pose_error_norm);
    let mut qm = DMatrix::zeros(k, k);
    for i in 0..k {
        qm[(i, i)] = if i < n { cfg.lambda_q } else { lambda_delta };
    }
    let mut c = DVector::zeros(k);
    c.rows_mut(0, n).copy_from(&(-cfg.manipulability_gain * &jm));

    let mut a_eq = DMatrix::zeros(6, k);
    a_eq.columns_mut(0, n).copy_from(&jac);
    a_eq.columns_mut(n, 6).fill_with_identity();
    let b_eq = DVector::from_column_slice(nu.as_slice());

    let (a_in, b_in) = damper_constraints(model, q, cfg, 6);
    let mut lower = DVector::zeros(k);
    let mut upper = DVector::zeros(k);
    lower.rows_mut(0, n).copy_from(&vmin);
    upper.rows_mut(0, n).copy_from(&vmax);
    lower.rows_mut(n, 6).copy_from(&cfg.slack_lower);
    upper.rows_mut(n, 6).copy_from(&cfg.slack_upper);

    let problem =
        QuadraticProgram::new(qm, c).with_equality(a_eq, b_eq).with_inequality(a_in, b_in).with_bounds(lower, upper);
    let sol = qp::solve(&problem)?;
    if sol.status != QpStatus::Optimal {
        return Ok(ControlStep {
            qdot: DVector::zeros(n),
            slack: Vector6::zeros(),
            status: StepStatus::Infeasible,
            m,
            mdot_predicted: 0.0,
            null_space: DVector::zeros(n),
        });
    }
    let qdot = sol.x.rows(0, n).into_owned();
    let slack = Vector6::from_iterator(sol.x.rows(n, 6).iter().copied());
    if status == StepStatus::Ok && (&jac * &qdot + slack - nu).amax() >= 1e-6 {
        status = StepStatus::Infeasible;
    }
    Ok(ControlStep { mdot_predicted: jm.dot(&qdot), qdot, slack, status, m, null_space: DVector::zeros(n) })
}
