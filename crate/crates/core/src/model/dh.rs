use std::f64::consts::PI;

use super::{Axis, ElementaryTransform, JointLimits, JointType, ModelError, RobotModel};

/// One row of a classic (distal) Denavit-Hartenberg table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhRow {
    pub theta_offset: f64,
    pub d: f64,
    pub a: f64,
    pub alpha: f64,
    pub joint_type: JointType,
}

impl DhRow {
    pub fn revolute(d: f64, a: f64, alpha: f64) -> Self {
        Self { theta_offset: 0.0, d, a, alpha, joint_type: JointType::Revolute }
    }
}

const DEFAULT_REVOLUTE: (f64, f64, f64) = (-PI, PI, PI);
const DEFAULT_PRISMATIC: (f64, f64, f64) = (-1.0, 1.0, 1.0);

fn default_limits(rows: &[DhRow]) -> JointLimits {
    let (lo, hi, v): (Vec<_>, Vec<_>, Vec<_>) = rows
        .iter()
        .map(|r| match r.joint_type {
            JointType::Revolute => DEFAULT_REVOLUTE,
            JointType::Prismatic => DEFAULT_PRISMATIC,
        })
        .fold((vec![], vec![], vec![]), |(mut a, mut b, mut c), (x, y, z)| {
            a.push(x);
            b.push(y);
            c.push(z);
            (a, b, c)
        });
    JointLimits::new(lo, hi, v)
}

/// Convert a DH table to an ETS model with default limits (±π rad, ±π rad/s for revolute
/// joints; ±1 m, ±1 m/s for prismatic joints).
pub fn dh_to_ets(name: &str, rows: &[DhRow]) -> Result<RobotModel, ModelError> {
    dh_to_ets_with_limits(name, rows, default_limits(rows))
}

/// Convert a DH table to an ETS model. Each row becomes `Rz(θ) Tz(d) Tx(a) Rx(α)` with the
/// joint coordinate added to `θ` (revolute) or `d` (prismatic). Zero constants are omitted.
pub fn dh_to_ets_with_limits(name: &str, rows: &[DhRow], limits: JointLimits) -> Result<RobotModel, ModelError> {
    if rows.is_empty() {
        return Err(ModelError::EmptyDhTable);
    }
    let mut ets = Vec::with_capacity(rows.len() * 5);
    for (j, row) in rows.iter().enumerate() {
        for (label, v) in [("theta_offset", row.theta_offset), ("alpha", row.alpha)] {
            if !(-PI..=PI).contains(&v) {
                return Err(ModelError::DhParameter { row: j, message: format!("{label} = {v} outside [-pi, pi]") });
            }
        }
        if !(row.d.is_finite() && row.a.is_finite()) {
            return Err(ModelError::DhParameter { row: j, message: "non-finite d or a".into() });
        }
        if row.theta_offset != 0.0 {
            ets.push(ElementaryTransform::rotation(Axis::Z, row.theta_offset));
        }
        match row.joint_type {
            JointType::Revolute => {
                ets.push(ElementaryTransform::revolute(Axis::Z, j));
                if row.d != 0.0 {
                    ets.push(ElementaryTransform::translation(Axis::Z, row.d));
                }
            }
            JointType::Prismatic => {
                if row.d != 0.0 {
                    ets.push(ElementaryTransform::translation(Axis::Z, row.d));
                }
                ets.push(ElementaryTransform::prismatic(Axis::Z, j));
            }
        }
        if row.a != 0.0 {
            ets.push(ElementaryTransform::translation(Axis::X, row.a));
        }
        if row.alpha != 0.0 {
            ets.push(ElementaryTransform::rotation(Axis::X, row.alpha));
        }
    }
    RobotModel::new(name, ets, limits, vec![])
}

/// Parse the plain-text DH format:
///
/// ```text
/// # joint_type theta_offset d a alpha [pos_min pos_max vel_max]
/// R 0 0.089159 0 1.5707963267948966 -3.14159 3.14159 3.14159
/// ```
///
/// `joint_type` is `R`/`revolute` or `P`/`prismatic`. Rows without the three limit columns
/// receive the defaults of [`dh_to_ets`].
pub fn parse_dh_table(name: &str, text: &str) -> Result<RobotModel, ModelError> {
    let mut rows = Vec::new();
    let mut lims: Vec<(f64, f64, f64)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: String| ModelError::DhSyntax { line: lineno + 1, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 && fields.len() != 8 {
            return Err(syntax(format!("expected 5 or 8 columns, found {}", fields.len())));
        }
        let joint_type = match fields[0].to_ascii_lowercase().as_str() {
            "r" | "revolute" => JointType::Revolute,
            "p" | "prismatic" => JointType::Prismatic,
            other => return Err(syntax(format!("unknown joint type '{other}'"))),
        };
        let nums = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| syntax(format!("'{f}': {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(DhRow { theta_offset: nums[0], d: nums[1], a: nums[2], alpha: nums[3], joint_type });
        lims.push(if nums.len() == 7 {
            (nums[4], nums[5], nums[6])
        } else if joint_type == JointType::Revolute {
            DEFAULT_REVOLUTE
        } else {
            DEFAULT_PRISMATIC
        });
    }
    let limits = JointLimits::new(
        lims.iter().map(|l| l.0).collect(),
        lims.iter().map(|l| l.1).collect(),
        lims.iter().map(|l| l.2).collect(),
    );
    dh_to_ets_with_limits(name, &rows, limits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::forward_kinematics;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn single_row_at_zero() {
        let m = dh_to_ets("one", &[DhRow::revolute(0.0, 1.0, 0.0)]).unwrap();
        let t = forward_kinematics(&m, &[0.0]).unwrap();
        assert!((t.translation.vector - nalgebra::Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        assert!((t.rotation.matrix() - nalgebra::Matrix3::identity()).norm() < 1e-15);
    }

    #[test]
    fn single_row_quarter_turn() {
        let m = dh_to_ets("one", &[DhRow::revolute(0.0, 1.0, 0.0)]).unwrap();
        let t = forward_kinematics(&m, &[FRAC_PI_2]).unwrap();
        assert!((t.translation.vector - nalgebra::Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
        let expected = nalgebra::Rotation3::from_axis_angle(&nalgebra::Vector3::z_axis(), FRAC_PI_2);
        assert!((t.rotation.matrix() - expected.matrix()).norm() < 1e-15);
    }

    #[test]
    fn empty_table_is_an_error() {
        assert!(matches!(dh_to_ets("none", &[]), Err(ModelError::EmptyDhTable)));
        assert!(matches!(parse_dh_table("none", "# nothing\n\n"), Err(ModelError::EmptyDhTable)));
    }

    #[test]
    fn alpha_out_of_range() {
        let row = DhRow::revolute(0.0, 0.0, 4.0);
        assert!(matches!(dh_to_ets("x", &[row]), Err(ModelError::DhParameter { row: 0, .. })));
    }

    #[test]
    fn parses_limits_and_comments() {
        let text = "# a table\nR 0 0.1 0 0 -1 1 2 # trailing\nP 0 0 0.5 0\n";
        let m = parse_dh_table("t", text).unwrap();
        assert_eq!(m.n(), 2);
        assert_eq!(m.joint_types(), &[JointType::Revolute, JointType::Prismatic]);
        assert_eq!(m.limits().position_max[0], 1.0);
        assert_eq!(m.limits().velocity_min[0], -2.0);
        assert_eq!(m.limits().position_max[1], DEFAULT_PRISMATIC.1);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_dh_table("t", "R 0 0 0 0\nX 0 0 0 0\n").unwrap_err();
        assert!(matches!(err, ModelError::DhSyntax { line: 2, .. }), "{err}");
        let err = parse_dh_table("t", "R 0 0 0\n").unwrap_err();
        assert!(matches!(err, ModelError::DhSyntax { line: 1, .. }), "{err}");
    }
}
