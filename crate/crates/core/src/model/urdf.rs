use std::collections::HashMap;
use std::f64::consts::PI;

use roxmltree::{Document, Node};

use super::{Axis, ElementaryTransform, JointLimits, ModelError, RobotModel};

const ALIGN_TOL: f64 = 1e-12;

#[derive(Debug)]
struct UrdfJoint<'a> {
    name: &'a str,
    kind: &'a str,
    parent: &'a str,
    child: &'a str,
    xyz: [f64; 3],
    rpy: [f64; 3],
    axis: [f64; 3],
    node: Node<'a, 'a>,
}

fn parse_triple(node: Option<Node>, attr: &str, default: [f64; 3], joint: &str) -> Result<[f64; 3], ModelError> {
    let Some(text) = node.and_then(|n| n.attribute(attr)) else {
        return Ok(default);
    };
    let vals = text
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ModelError::Urdf(format!("joint '{joint}': bad {attr}=\"{text}\": {e}")))?;
    <[f64; 3]>::try_from(vals)
        .map_err(|_| ModelError::Urdf(format!("joint '{joint}': {attr}=\"{text}\" needs three numbers")))
}

fn child<'a>(node: Node<'a, 'a>, tag: &str) -> Option<Node<'a, 'a>> {
    node.children().find(|c| c.has_tag_name(tag))
}

fn link_ref<'a>(node: Node<'a, 'a>, tag: &str, joint: &str) -> Result<&'a str, ModelError> {
    child(node, tag)
        .and_then(|c| c.attribute("link"))
        .ok_or_else(|| ModelError::Urdf(format!("joint '{joint}' has no <{tag} link=...>")))
}

fn limit_attr(joint: &UrdfJoint, attribute: &'static str) -> Result<f64, ModelError> {
    let missing = || ModelError::MissingLimit { joint: joint.name.to_string(), attribute };
    let text = child(joint.node, "limit").and_then(|l| l.attribute(attribute)).ok_or_else(missing)?;
    text.trim()
        .parse::<f64>()
        .map_err(|e| ModelError::Urdf(format!("joint '{}': bad limit {attribute}=\"{text}\": {e}", joint.name)))
}

/// Parse a URDF document into a serial-chain model.
///
/// The chain runs from the unique root link to `tip` (or, when `tip` is `None`, to the single
/// leaf reachable without branching). Fixed joints contribute constant transforms; revolute,
/// continuous and prismatic joints contribute their origin followed by a joint-driven transform
/// about/along the joint axis. Joint axes that are not `+x`, `+y` or `+z` are expressed by
/// conjugating a `z` transform with the constant rotation that maps `z` onto the axis.
pub fn parse_urdf(document: &str, tip: Option<&str>) -> Result<RobotModel, ModelError> {
    let doc = Document::parse(document)?;
    let robot = doc.root_element();
    if !robot.has_tag_name("robot") {
        return Err(ModelError::Urdf(format!("root element is <{}>, expected <robot>", robot.tag_name().name())));
    }
    let name = robot.attribute("name").unwrap_or("robot");
    let links: Vec<&str> = robot
        .children()
        .filter(|c| c.has_tag_name("link"))
        .map(|l| l.attribute("name").ok_or_else(|| ModelError::Urdf("<link> without a name".into())))
        .collect::<Result<_, _>>()?;
    if links.is_empty() {
        return Err(ModelError::Urdf("document has no <link> elements".into()));
    }

    let mut joints = Vec::new();
    for node in robot.children().filter(|c| c.has_tag_name("joint")) {
        let jname = node.attribute("name").ok_or_else(|| ModelError::Urdf("<joint> without a name".into()))?;
        let kind = node.attribute("type").ok_or_else(|| ModelError::Urdf(format!("joint '{jname}' has no type")))?;
        let origin = child(node, "origin");
        joints.push(UrdfJoint {
            name: jname,
            kind,
            parent: link_ref(node, "parent", jname)?,
            child: link_ref(node, "child", jname)?,
            xyz: parse_triple(origin, "xyz", [0.0; 3], jname)?,
            rpy: parse_triple(origin, "rpy", [0.0; 3], jname)?,
            axis: parse_triple(child(node, "axis"), "xyz", [1.0, 0.0, 0.0], jname)?,
            node,
        });
    }

    let mut parent_joint: HashMap<&str, usize> = HashMap::new();
    let mut children: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, j) in joints.iter().enumerate() {
        for l in [j.parent, j.child] {
            if !links.contains(&l) {
                return Err(ModelError::Urdf(format!("joint '{}' references unknown link '{l}'", j.name)));
            }
        }
        if parent_joint.insert(j.child, i).is_some() {
            return Err(ModelError::Urdf(format!("link '{}' has more than one parent joint", j.child)));
        }
        children.entry(j.parent).or_default().push(i);
    }
    let roots: Vec<&str> = links.iter().copied().filter(|l| !parent_joint.contains_key(l)).collect();
    let [root] = roots[..] else {
        return Err(ModelError::Urdf(format!("expected exactly one root link, found {roots:?}")));
    };

    let branch_error = |link: &str| ModelError::BranchingChain {
        link: link.to_string(),
        joints: children[link].iter().map(|&i| joints[i].name.to_string()).collect(),
    };

    // Joint indices in root-to-tip order.
    let path: Vec<usize> = match tip {
        Some(tip) => {
            if !links.contains(&tip) {
                return Err(ModelError::Urdf(format!("tip link '{tip}' does not exist")));
            }
            let mut path = Vec::new();
            let mut link = tip;
            while let Some(&j) = parent_joint.get(link) {
                path.push(j);
                link = joints[j].parent;
            }
            path.reverse();
            for &j in &path {
                if children[joints[j].parent].len() > 1 {
                    return Err(branch_error(joints[j].parent));
                }
            }
            path
        }
        None => {
            let mut path = Vec::new();
            let mut link = root;
            while let Some(kids) = children.get(link) {
                if kids.len() > 1 {
                    return Err(branch_error(link));
                }
                path.push(kids[0]);
                link = joints[kids[0]].child;
            }
            path
        }
    };

    let mut ets = Vec::new();
    let (mut lo, mut hi, mut vel, mut names) = (vec![], vec![], vec![], vec![]);
    for &ji in &path {
        let j = &joints[ji];
        push_origin(&mut ets, j.xyz, j.rpy);
        let index = names.len();
        match j.kind {
            "fixed" => continue,
            "revolute" | "prismatic" => {
                lo.push(limit_attr(j, "lower")?);
                hi.push(limit_attr(j, "upper")?);
            }
            "continuous" => {
                lo.push(-2.0 * PI);
                hi.push(2.0 * PI);
            }
            other => return Err(ModelError::UnsupportedJoint { joint: j.name.to_string(), kind: other.to_string() }),
        }
        vel.push(limit_attr(j, "velocity")?);
        names.push(j.name.to_string());
        push_joint(&mut ets, j, index)?;
    }
    if names.is_empty() {
        return Err(ModelError::Urdf("chain contains no movable joints".into()));
    }
    RobotModel::new(name, ets, JointLimits::new(lo, hi, vel), names)
}

fn push_origin(ets: &mut Vec<ElementaryTransform>, xyz: [f64; 3], rpy: [f64; 3]) {
    for (axis, v) in [Axis::X, Axis::Y, Axis::Z].into_iter().zip(xyz) {
        if v != 0.0 {
            ets.push(ElementaryTransform::translation(axis, v));
        }
    }
    // URDF fixed-axis roll/pitch/yaw: R = Rz(yaw) Ry(pitch) Rx(roll).
    for (axis, v) in [(Axis::Z, rpy[2]), (Axis::Y, rpy[1]), (Axis::X, rpy[0])] {
        if v != 0.0 {
            ets.push(ElementaryTransform::rotation(axis, v));
        }
    }
}

fn push_joint(ets: &mut Vec<ElementaryTransform>, j: &UrdfJoint, index: usize) -> Result<(), ModelError> {
    let [x, y, z] = j.axis;
    let norm = (x * x + y * y + z * z).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(ModelError::Urdf(format!("joint '{}' has a degenerate axis", j.name)));
    }
    let (x, y, z) = (x / norm, y / norm, z / norm);
    let variable = |axis| {
        if j.kind == "prismatic" {
            ElementaryTransform::prismatic(axis, index)
        } else {
            ElementaryTransform::revolute(axis, index)
        }
    };
    for (axis, component) in [(Axis::X, x), (Axis::Y, y), (Axis::Z, z)] {
        if (component - 1.0).abs() < ALIGN_TOL {
            ets.push(variable(axis));
            return Ok(());
        }
    }
    // axis = Rz(phi) Ry(theta) z
    let theta = z.clamp(-1.0, 1.0).acos();
    let phi = y.atan2(x);
    let pre = [(Axis::Z, phi), (Axis::Y, theta)];
    for (a, v) in pre {
        if v != 0.0 {
            ets.push(ElementaryTransform::rotation(a, v));
        }
    }
    ets.push(variable(Axis::Z));
    for (a, v) in pre.into_iter().rev() {
        if v != 0.0 {
            ets.push(ElementaryTransform::rotation(a, -v));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{forward_kinematics, jacobian};
    use crate::model::{EtParam, TransformKind};

    const ONE_JOINT: &str = r#"<robot name="one">
      <link name="base"/><link name="arm"/>
      <joint name="j0" type="revolute">
        <parent link="base"/><child link="arm"/>
        <origin xyz="0 0 0.3"/><axis xyz="0 0 1"/>
        <limit lower="-1" upper="1" velocity="2"/>
      </joint>
    </robot>"#;

    #[test]
    fn single_revolute_joint() {
        let m = parse_urdf(ONE_JOINT, None).unwrap();
        assert_eq!(m.name(), "one");
        assert_eq!(m.n(), 1);
        assert_eq!(
            m.ets(),
            &[ElementaryTransform::translation(Axis::Z, 0.3), ElementaryTransform::revolute(Axis::Z, 0)]
        );
        assert_eq!(m.limits().position_min[0], -1.0);
        assert_eq!(m.limits().velocity_max[0], 2.0);
        assert_eq!(m.joint_names(), &["j0".to_string()]);
    }

    #[test]
    fn floating_joint_is_rejected_by_name() {
        let doc = ONE_JOINT.replace(r#"type="revolute""#, r#"type="floating""#);
        match parse_urdf(&doc, None) {
            Err(ModelError::UnsupportedJoint { joint, kind }) => {
                assert_eq!(joint, "j0");
                assert_eq!(kind, "floating");
            }
            other => panic!("unexpected {other:?}"),
        }
        let doc = ONE_JOINT.replace(r#"type="revolute""#, r#"type="planar""#);
        assert!(matches!(parse_urdf(&doc, None), Err(ModelError::UnsupportedJoint { .. })));
    }

    #[test]
    fn missing_limit_names_the_joint() {
        let doc = ONE_JOINT.replace(r#"<limit lower="-1" upper="1" velocity="2"/>"#, "");
        match parse_urdf(&doc, None) {
            Err(ModelError::MissingLimit { joint, .. }) => assert_eq!(joint, "j0"),
            other => panic!("unexpected {other:?}"),
        }
        let doc = ONE_JOINT.replace(r#" velocity="2""#, "");
        assert!(matches!(parse_urdf(&doc, None), Err(ModelError::MissingLimit { attribute: "velocity", .. })));
    }

    #[test]
    fn malformed_xml() {
        assert!(matches!(parse_urdf("<robot><link name='a'></robot>", None), Err(ModelError::Xml(_))));
    }

    #[test]
    fn branching_is_rejected() {
        let doc = r#"<robot name="y">
          <link name="base"/><link name="a"/><link name="b"/>
          <joint name="ja" type="revolute"><parent link="base"/><child link="a"/>
            <limit lower="-1" upper="1" velocity="1"/></joint>
          <joint name="jb" type="revolute"><parent link="base"/><child link="b"/>
            <limit lower="-1" upper="1" velocity="1"/></joint>
        </robot>"#;
        for tip in [None, Some("a")] {
            match parse_urdf(doc, tip) {
                Err(ModelError::BranchingChain { link, joints }) => {
                    assert_eq!(link, "base");
                    assert_eq!(joints, vec!["ja".to_string(), "jb".to_string()]);
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn tip_selects_a_prefix_of_the_chain() {
        let doc = r#"<robot name="two">
          <link name="l0"/><link name="l1"/><link name="l2"/>
          <joint name="j1" type="revolute"><parent link="l0"/><child link="l1"/>
            <axis xyz="0 0 1"/><limit lower="-1" upper="1" velocity="1"/></joint>
          <joint name="j2" type="prismatic"><parent link="l1"/><child link="l2"/>
            <origin xyz="1 0 0"/><axis xyz="1 0 0"/><limit lower="0" upper="0.5" velocity="1"/></joint>
        </robot>"#;
        assert_eq!(parse_urdf(doc, Some("l1")).unwrap().n(), 1);
        let full = parse_urdf(doc, None).unwrap();
        assert_eq!(full.n(), 2);
        assert_eq!(full.ets().last().unwrap().kind, TransformKind::Translation);
        assert!(parse_urdf(doc, Some("nope")).is_err());
    }

    #[test]
    fn rpy_and_arbitrary_axes_match_direct_construction() {
        let doc = r#"<robot name="tilted">
          <link name="l0"/><link name="l1"/><link name="l2"/>
          <joint name="j1" type="revolute"><parent link="l0"/><child link="l1"/>
            <origin xyz="0.1 -0.2 0.3" rpy="0.3 -0.4 0.5"/><axis xyz="0 -1 0"/>
            <limit lower="-1" upper="1" velocity="1"/></joint>
          <joint name="j2" type="fixed"><parent link="l1"/><child link="l2"/>
            <origin xyz="0 0 1"/></joint>
        </robot>"#;
        let m = parse_urdf(doc, None).unwrap();
        let q = 0.7;
        let t = forward_kinematics(&m, &[q]).unwrap();
        let origin = nalgebra::IsometryMatrix3::from_parts(
            nalgebra::Translation3::new(0.1, -0.2, 0.3),
            nalgebra::Rotation3::from_euler_angles(0.3, -0.4, 0.5),
        );
        let joint = nalgebra::IsometryMatrix3::from_parts(
            nalgebra::Translation3::identity(),
            nalgebra::Rotation3::from_axis_angle(&-nalgebra::Vector3::y_axis(), q),
        );
        let tool = nalgebra::IsometryMatrix3::translation(0.0, 0.0, 1.0);
        let expected = origin * joint * tool;
        assert!((t.to_homogeneous() - expected.to_homogeneous()).abs().max() < 1e-14);
        // the joint's world axis appears in the rotational rows of the Jacobian
        let jac = jacobian(&m, &[q]).unwrap();
        let axis = origin.rotation * -nalgebra::Vector3::y();
        assert!((jac.fixed_view::<3, 1>(3, 0) - axis).norm() < 1e-14);
        assert!(m.ets().iter().any(|e| e.param == EtParam::Joint(0)));
    }
}
