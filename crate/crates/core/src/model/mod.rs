//! Serial-link manipulator models.
//!
//! Every loader (DH table, URDF, built-in) produces a [`RobotModel`]: an
//! elementary transform sequence (ETS) whose variable transforms are driven by
//! joint coordinates, plus per-joint position and velocity limits.

mod builtin;
mod dh;
mod urdf;

pub use builtin::{builtin_model, bundled_panda_urdf, bundled_ur5_dh, BuiltinRobot};
pub use dh::{dh_to_ets, dh_to_ets_with_limits, parse_dh_table, DhRow};
pub use urdf::parse_urdf;

use std::fmt;
use std::path::Path;

use nalgebra::{DVector, IsometryMatrix3, Rotation3, Translation3, Vector3};
use thiserror::Error;

/// Rigid transform used throughout the crate: a rotation matrix and a translation.
pub type Pose = IsometryMatrix3<f64>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("DH table has no rows")]
    EmptyDhTable,
    #[error("DH table line {line}: {message}")]
    DhSyntax { line: usize, message: String },
    #[error("DH row {row}: {message}")]
    DhParameter { row: usize, message: String },
    #[error("malformed XML: {0}")]
    Xml(#[from] roxmltree::Error),
    #[error("invalid URDF: {0}")]
    Urdf(String),
    #[error("kinematic tree branches at link '{link}' (children via joints: {})", .joints.join(", "))]
    BranchingChain { link: String, joints: Vec<String> },
    #[error("joint '{joint}' has unsupported type '{kind}'")]
    UnsupportedJoint { joint: String, kind: String },
    #[error("joint '{joint}' is missing its <limit> element or a required limit attribute ({attribute})")]
    MissingLimit { joint: String, attribute: &'static str },
    #[error("unknown built-in model '{0}' (expected one of: panda, ur5, planar2r)")]
    UnknownModel(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn unit(self) -> Vector3<f64> {
        match self {
            Axis::X => Vector3::x(),
            Axis::Y => Vector3::y(),
            Axis::Z => Vector3::z(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransformKind {
    Translation,
    Rotation,
}

/// Value of an elementary transform: a constant, or the coordinate of a joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtParam {
    Fixed(f64),
    Joint(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointType {
    Revolute,
    Prismatic,
}

impl fmt::Display for JointType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JointType::Revolute => f.write_str("revolute"),
            JointType::Prismatic => f.write_str("prismatic"),
        }
    }
}

/// A single-axis rotation or translation, either constant or joint-driven.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementaryTransform {
    pub kind: TransformKind,
    pub axis: Axis,
    pub param: EtParam,
}

impl ElementaryTransform {
    pub fn rotation(axis: Axis, angle: f64) -> Self {
        Self { kind: TransformKind::Rotation, axis, param: EtParam::Fixed(angle) }
    }

    pub fn translation(axis: Axis, distance: f64) -> Self {
        Self { kind: TransformKind::Translation, axis, param: EtParam::Fixed(distance) }
    }

    pub fn revolute(axis: Axis, joint: usize) -> Self {
        Self { kind: TransformKind::Rotation, axis, param: EtParam::Joint(joint) }
    }

    pub fn prismatic(axis: Axis, joint: usize) -> Self {
        Self { kind: TransformKind::Translation, axis, param: EtParam::Joint(joint) }
    }

    pub fn joint(&self) -> Option<usize> {
        match self.param {
            EtParam::Joint(j) => Some(j),
            EtParam::Fixed(_) => None,
        }
    }

    /// Evaluate the transform; `q` is only read for joint-driven transforms.
    pub fn eval(&self, q: &[f64]) -> Pose {
        let value = match self.param {
            EtParam::Fixed(v) => v,
            EtParam::Joint(j) => q[j],
        };
        Self::make(self.kind, self.axis, value)
    }

    fn make(kind: TransformKind, axis: Axis, value: f64) -> Pose {
        match kind {
            TransformKind::Translation => {
                Pose::from_parts(Translation3::from(axis.unit() * value), Rotation3::identity())
            }
            TransformKind::Rotation => {
                let (s, c) = value.sin_cos();
                let m = match axis {
                    Axis::X => nalgebra::Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
                    Axis::Y => nalgebra::Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
                    Axis::Z => nalgebra::Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
                };
                Pose::from_parts(Translation3::identity(), Rotation3::from_matrix_unchecked(m))
            }
        }
    }
}

impl fmt::Display for ElementaryTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            TransformKind::Translation => 'T',
            TransformKind::Rotation => 'R',
        };
        let a = match self.axis {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        };
        match self.param {
            EtParam::Fixed(v) => write!(f, "{k}{a}({v})"),
            EtParam::Joint(j) => write!(f, "{k}{a}(q{j})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointLimits {
    pub position_min: DVector<f64>,
    pub position_max: DVector<f64>,
    pub velocity_min: DVector<f64>,
    pub velocity_max: DVector<f64>,
}

impl JointLimits {
    /// Symmetric velocity limits `[-v, v]` around the given position ranges.
    pub fn new(position_min: Vec<f64>, position_max: Vec<f64>, velocity_max: Vec<f64>) -> Self {
        let vmax = DVector::from_vec(velocity_max);
        Self {
            position_min: DVector::from_vec(position_min),
            position_max: DVector::from_vec(position_max),
            velocity_min: -vmax.clone(),
            velocity_max: vmax,
        }
    }

    pub fn len(&self) -> usize {
        self.position_min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self, n: usize) -> Result<(), ModelError> {
        for (what, v) in [
            ("position_min", &self.position_min),
            ("position_max", &self.position_max),
            ("velocity_min", &self.velocity_min),
            ("velocity_max", &self.velocity_max),
        ] {
            if v.len() != n {
                return Err(ModelError::Invalid(format!("{what} has {} entries, expected {n}", v.len())));
            }
        }
        for i in 0..n {
            if !(self.position_min[i] < self.position_max[i]) {
                return Err(ModelError::Invalid(format!(
                    "joint {i}: position_min {} must be below position_max {}",
                    self.position_min[i], self.position_max[i]
                )));
            }
            if !(self.velocity_min[i] < 0.0 && 0.0 < self.velocity_max[i]) {
                return Err(ModelError::Invalid(format!(
                    "joint {i}: velocity limits [{}, {}] must straddle zero",
                    self.velocity_min[i], self.velocity_max[i]
                )));
            }
        }
        Ok(())
    }

    /// True when every coordinate lies inside the closed position range.
    pub fn contains(&self, q: &[f64]) -> bool {
        q.iter().enumerate().all(|(i, &v)| v >= self.position_min[i] && v <= self.position_max[i])
    }
}

/// An immutable serial-link kinematic chain.
#[derive(Debug, Clone)]
pub struct RobotModel {
    name: String,
    ets: Vec<ElementaryTransform>,
    joint_types: Vec<JointType>,
    joint_names: Vec<String>,
    limits: JointLimits,
}

impl RobotModel {
    /// Build and validate a model. Joint names default to `q0..q{n-1}` when `joint_names` is empty.
    pub fn new(
        name: impl Into<String>,
        ets: Vec<ElementaryTransform>,
        limits: JointLimits,
        joint_names: Vec<String>,
    ) -> Result<Self, ModelError> {
        let mut owner: Vec<Option<TransformKind>> = Vec::new();
        for et in &ets {
            if let EtParam::Fixed(v) = et.param {
                if !v.is_finite() {
                    return Err(ModelError::Invalid(format!("non-finite constant in {et}")));
                }
            }
            if let Some(j) = et.joint() {
                if j >= owner.len() {
                    owner.resize(j + 1, None);
                }
                if owner[j].is_some() {
                    return Err(ModelError::Invalid(format!("joint index {j} drives more than one transform")));
                }
                owner[j] = Some(et.kind);
            }
        }
        let n = owner.len();
        if n == 0 {
            return Err(ModelError::Invalid("model has no joints".into()));
        }
        let joint_types = owner
            .iter()
            .enumerate()
            .map(|(j, k)| match k {
                Some(TransformKind::Rotation) => Ok(JointType::Revolute),
                Some(TransformKind::Translation) => Ok(JointType::Prismatic),
                None => Err(ModelError::Invalid(format!("joint indices are not contiguous: {j} is unused"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        limits.validate(n)?;
        let joint_names = if joint_names.is_empty() {
            (0..n).map(|j| format!("q{j}")).collect()
        } else if joint_names.len() == n {
            joint_names
        } else {
            return Err(ModelError::Invalid(format!("{} joint names for {n} joints", joint_names.len())));
        };
        Ok(Self { name: name.into(), ets, joint_types, joint_names, limits })
    }

    /// Load a model from a file, choosing the parser by extension (`.urdf`/`.xml` or `.dh`).
    pub fn from_path(path: &Path, tip: Option<&str>) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("robot");
        match path.extension().and_then(|e| e.to_str()) {
            Some("dh") | Some("txt") => parse_dh_table(stem, &text),
            _ => parse_urdf(&text, tip),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of joints.
    pub fn n(&self) -> usize {
        self.joint_types.len()
    }

    pub fn ets(&self) -> &[ElementaryTransform] {
        &self.ets
    }

    pub fn joint_types(&self) -> &[JointType] {
        &self.joint_types
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn limits(&self) -> &JointLimits {
        &self.limits
    }
}

impl fmt::Display for RobotModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.ets.iter().map(ToString::to_string).collect();
        write!(f, "{}: {}", self.name, parts.join(" "))
    }
}
