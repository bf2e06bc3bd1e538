//! Differential kinematics and reactive velocity control for serial-link manipulators.
//!
//! - [`model`]: elementary transform sequence models loaded from DH tables, URDF or bundled data.
//! - [`kinematics`]: forward kinematics, Jacobian, Hessian, manipulability and its gradient.
//! - [`qp`]: a dense dual active-set solver for strictly convex quadratic programs.
//! - [`control`]: resolved-rate, gradient-projection and manipulability-maximising QP controllers.
//! - [`servo`]: position-based servoing trials and the multi-controller experiment harness.

// Negated comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod kinematics;
pub mod model;
pub mod qp;
pub mod servo;
