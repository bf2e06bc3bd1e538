use std::f64::consts::PI;
use std::str::FromStr;

use super::{parse_dh_table, parse_urdf, Axis, ElementaryTransform, JointLimits, ModelError, RobotModel};

const PANDA_URDF: &str = include_str!("../../data/panda.urdf");
const UR5_DH: &str = include_str!("../../data/ur5.dh");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinRobot {
    /// Franka Emika Panda, 7 revolute joints.
    Panda,
    /// Universal Robots UR5, 6 revolute joints.
    Ur5,
    /// Two revolute `z` joints with unit links along `x`.
    Planar2r,
}

impl FromStr for BuiltinRobot {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "panda" => Ok(Self::Panda),
            "ur5" => Ok(Self::Ur5),
            "planar2r" => Ok(Self::Planar2r),
            _ => Err(ModelError::UnknownModel(s.to_string())),
        }
    }
}

impl BuiltinRobot {
    pub fn load(self) -> Result<RobotModel, ModelError> {
        match self {
            Self::Panda => parse_urdf(PANDA_URDF, Some("panda_hand_tcp")),
            Self::Ur5 => parse_dh_table("ur5", UR5_DH),
            Self::Planar2r => RobotModel::new(
                "planar2r",
                vec![
                    ElementaryTransform::revolute(Axis::Z, 0),
                    ElementaryTransform::translation(Axis::X, 1.0),
                    ElementaryTransform::revolute(Axis::Z, 1),
                    ElementaryTransform::translation(Axis::X, 1.0),
                ],
                JointLimits::new(vec![-PI; 2], vec![PI; 2], vec![PI; 2]),
                vec![],
            ),
        }
    }
}

/// Load one of the bundled models by name: `panda`, `ur5` or `planar2r`.
pub fn builtin_model(name: &str) -> Result<RobotModel, ModelError> {
    name.parse::<BuiltinRobot>()?.load()
}

/// Raw bundled description text, for tools that want to inspect it.
pub fn bundled_panda_urdf() -> &'static str {
    PANDA_URDF
}

pub fn bundled_ur5_dh() -> &'static str {
    UR5_DH
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JointType;

    #[test]
    fn joint_counts() {
        assert_eq!(builtin_model("panda").unwrap().n(), 7);
        assert_eq!(builtin_model("ur5").unwrap().n(), 6);
        assert_eq!(builtin_model("planar2r").unwrap().n(), 2);
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(builtin_model("kuka"), Err(ModelError::UnknownModel(_))));
    }

    #[test]
    fn panda_limits_match_vendor_table() {
        let m = builtin_model("panda").unwrap();
        let lo = [-2.8973, -1.7628, -2.8973, -3.0718, -2.8973, -0.0175, -2.8973];
        let hi = [2.8973, 1.7628, 2.8973, -0.0698, 2.8973, 3.7525, 2.8973];
        let vel = [2.175, 2.175, 2.175, 2.175, 2.61, 2.61, 2.61];
        for i in 0..7 {
            assert_eq!(m.limits().position_min[i], lo[i]);
            assert_eq!(m.limits().position_max[i], hi[i]);
            assert_eq!(m.limits().velocity_max[i], vel[i]);
            assert_eq!(m.limits().velocity_min[i], -vel[i]);
        }
        assert!(m.joint_types().iter().all(|t| *t == JointType::Revolute));
        assert_eq!(m.joint_names()[0], "panda_joint1");
    }
}
