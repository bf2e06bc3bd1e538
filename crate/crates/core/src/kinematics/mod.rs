//! Forward kinematics, the base-frame geometric Jacobian and the manipulator Hessian.

mod manipulability;

pub use manipulability::{
    manipulability, manipulability_jacobian, manipulability_jacobian_from, vec_colwise, velocity_ellipsoid,
    EllipsoidKind, VelocityEllipsoid, DEFAULT_SINGULAR_EPS,
};

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix6xX, Vector3};
use thiserror::Error;

use crate::model::{JointType, Pose, RobotModel, TransformKind};

/// 6×n Jacobian, translational rows on top, expressed in the base frame.
pub type Jacobian = Matrix6xX<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("joint vector has {got} entries, model has {expected} joints")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("joint vector contains a non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("configuration is singular: manipulability {m:e} <= {eps:e}")]
    Singular { m: f64, eps: f64 },
}

pub(crate) fn check_config(model: &RobotModel, q: &[f64]) -> Result<(), KinematicsError> {
    if q.len() != model.n() {
        return Err(KinematicsError::DimensionMismatch { expected: model.n(), got: q.len() });
    }
    if let Some(i) = q.iter().position(|v| !v.is_finite()) {
        return Err(KinematicsError::NonFinite(i));
    }
    Ok(())
}

/// Which rows of the Jacobian enter a manipulability computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AxisSelection {
    #[default]
    All,
    Translational,
    Rotational,
    /// Arbitrary subset of the six rows, in row order.
    Rows([bool; 6]),
}

impl AxisSelection {
    /// Translational `x` and `y` rows only, the natural choice for planar arms.
    pub const TRANSLATIONAL_XY: Self = Self::Rows([true, true, false, false, false, false]);

    pub fn rows(&self) -> Vec<usize> {
        match self {
            Self::All => (0..6).collect(),
            Self::Translational => vec![0, 1, 2],
            Self::Rotational => vec![3, 4, 5],
            Self::Rows(mask) => (0..6).filter(|&r| mask[r]).collect(),
        }
    }
}

impl FromStr for AxisSelection {
    type Err = String;

    /// Accepts `all`, `trans`, `rot`, `trans-xy`, or a comma list of row indices such as `0,1,5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(Self::All),
            "trans" | "translational" => Ok(Self::Translational),
            "rot" | "rotational" => Ok(Self::Rotational),
            "trans-xy" => Ok(Self::TRANSLATIONAL_XY),
            other => {
                let mut mask = [false; 6];
                for tok in other.split(',') {
                    let r: usize = tok.trim().parse().map_err(|_| format!("unknown axis selection '{s}'"))?;
                    if r > 5 {
                        return Err(format!("row index {r} out of range 0..=5"));
                    }
                    mask[r] = true;
                }
                Ok(Self::Rows(mask))
            }
        }
    }
}

impl fmt::Display for AxisSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::All => f.write_str("all"),
            Self::Translational => f.write_str("trans"),
            Self::Rotational => f.write_str("rot"),
            Self::Rows(_) if *self == Self::TRANSLATIONAL_XY => f.write_str("trans-xy"),
            Self::Rows(_) => {
                let rows: Vec<String> = self.rows().iter().map(ToString::to_string).collect();
                f.write_str(&rows.join(","))
            }
        }
    }
}

/// World-frame placement of one joint at a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointFrame {
    pub joint_type: JointType,
    /// Unit axis of rotation or translation.
    pub axis: Vector3<f64>,
    /// A point on the joint axis.
    pub origin: Vector3<f64>,
}

/// World frames of every joint, in joint-index order, and the end-effector pose.
pub fn joint_frames(model: &RobotModel, q: &[f64]) -> Result<(Vec<JointFrame>, Pose), KinematicsError> {
    check_config(model, q)?;
    let mut frames: Vec<Option<JointFrame>> = vec![None; model.n()];
    let mut t = Pose::identity();
    for et in model.ets() {
        if let Some(j) = et.joint() {
            frames[j] = Some(JointFrame {
                joint_type: match et.kind {
                    TransformKind::Rotation => JointType::Revolute,
                    TransformKind::Translation => JointType::Prismatic,
                },
                axis: t.rotation * et.axis.unit(),
                origin: t.translation.vector,
            });
        }
        t *= et.eval(q);
    }
    // RobotModel guarantees every index in 0..n is driven by exactly one transform.
    Ok((frames.into_iter().map(Option::unwrap).collect(), t))
}

/// End-effector pose in the base frame.
pub fn forward_kinematics(model: &RobotModel, q: &[f64]) -> Result<Pose, KinematicsError> {
    check_config(model, q)?;
    Ok(model.ets().iter().fold(Pose::identity(), |t, et| t * et.eval(q)))
}

fn jacobian_from_frames(frames: &[JointFrame], tip: &Vector3<f64>) -> Jacobian {
    let mut jac = Jacobian::zeros(frames.len());
    for (i, f) in frames.iter().enumerate() {
        match f.joint_type {
            JointType::Revolute => {
                let v = f.axis.cross(&(tip - f.origin));
                jac.fixed_view_mut::<3, 1>(0, i).copy_from(&v);
                jac.fixed_view_mut::<3, 1>(3, i).copy_from(&f.axis);
            }
            JointType::Prismatic => jac.fixed_view_mut::<3, 1>(0, i).copy_from(&f.axis),
        }
    }
    jac
}

/// Geometric Jacobian in the base frame.
///
/// Revolute column: `[z × (p_e − p); z]`; prismatic column: `[z; 0]`.
pub fn jacobian(model: &RobotModel, q: &[f64]) -> Result<Jacobian, KinematicsError> {
    let (frames, tip) = joint_frames(model, q)?;
    Ok(jacobian_from_frames(&frames, &tip.translation.vector))
}

/// Second-order differential kinematics: `slice(i)` is `∂J/∂q_i`, a 6×n matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Hessian {
    slices: Vec<Matrix6xX<f64>>,
}

impl Hessian {
    pub fn n(&self) -> usize {
        self.slices.len()
    }

    /// `∂J/∂q_i`.
    pub fn slice(&self, i: usize) -> &Matrix6xX<f64> {
        &self.slices[i]
    }

    /// `∂J[row, column] / ∂q_i`.
    pub fn get(&self, row: usize, column: usize, i: usize) -> f64 {
        self.slices[i][(row, column)]
    }

    pub fn slices(&self) -> &[Matrix6xX<f64>] {
        &self.slices
    }
}

/// Assemble the Hessian from the Jacobian and joint types.
///
/// With `a = min(i, j)` and `b = max(i, j)`:
/// translational part of `∂J_j/∂q_i` is `ω_a × Jv_b` when joint `a` is revolute, else zero;
/// rotational part is `ω_i × Jω_j` when `i < j` and joint `i` is revolute, else zero.
pub fn hessian_from_jacobian(jac: &Jacobian, joint_types: &[JointType]) -> Hessian {
    let n = jac.ncols();
    let omega = |k: usize| jac.fixed_view::<3, 1>(3, k).into_owned();
    let jv = |k: usize| jac.fixed_view::<3, 1>(0, k).into_owned();
    let slices = (0..n)
        .map(|i| {
            let mut h = Matrix6xX::zeros(n);
            for j in 0..n {
                let (a, b) = (i.min(j), i.max(j));
                if joint_types[a] == JointType::Revolute {
                    h.fixed_view_mut::<3, 1>(0, j).copy_from(&omega(a).cross(&jv(b)));
                }
                if i < j && joint_types[i] == JointType::Revolute {
                    h.fixed_view_mut::<3, 1>(3, j).copy_from(&omega(i).cross(&omega(j)));
                }
            }
            h
        })
        .collect();
    Hessian { slices }
}

pub fn hessian(model: &RobotModel, q: &[f64]) -> Result<Hessian, KinematicsError> {
    let jac = jacobian(model, q)?;
    Ok(hessian_from_jacobian(&jac, model.joint_types()))
}

/// Jacobian and Hessian from a single traversal of the chain.
pub fn jacobian_and_hessian(model: &RobotModel, q: &[f64]) -> Result<(Jacobian, Hessian), KinematicsError> {
    let jac = jacobian(model, q)?;
    let h = hessian_from_jacobian(&jac, model.joint_types());
    Ok((jac, h))
}
