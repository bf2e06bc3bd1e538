use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};

use super::{jacobian_and_hessian, AxisSelection, Hessian, Jacobian, KinematicsError};
use crate::model::RobotModel;

/// Guard on `m` before `(J Jᵀ)⁻¹` is formed.
pub const DEFAULT_SINGULAR_EPS: f64 = 1e-8;

fn select_rows(m: &Jacobian, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

/// Stack the columns of `m` into one vector, first column on top.
pub fn vec_colwise(m: &DMatrix<f64>) -> DVector<f64> {
    let (rows, cols) = m.shape();
    let mut v = DVector::zeros(rows * cols);
    for c in 0..cols {
        for r in 0..rows {
            v[c * rows + r] = m[(r, c)];
        }
    }
    v
}

/// Yoshikawa manipulability `sqrt(det(J_s J_sᵀ))` of the selected rows.
///
/// Returns zero when more rows are selected than there are joints, and clamps the
/// small negative determinants that rounding produces at singular configurations.
pub fn manipulability(jac: &Jacobian, sel: AxisSelection) -> f64 {
    let rows = sel.rows();
    if rows.is_empty() || rows.len() > jac.ncols() {
        return 0.0;
    }
    let js = select_rows(jac, &rows);
    let det = (&js * js.transpose()).determinant();
    if det <= 0.0 {
        0.0
    } else {
        det.sqrt()
    }
}

/// Manipulability Jacobian from precomputed `J` and `H`: the n-vector `J_m` with `ṁ = J_mᵀ q̇`.
///
/// `J_m[i] = m · vec(J Hᵢᵀ)ᵀ vec((J Jᵀ)⁻¹)` over the selected rows.
pub fn manipulability_jacobian_from(
    jac: &Jacobian,
    hess: &Hessian,
    sel: AxisSelection,
    eps: f64,
) -> Result<DVector<f64>, KinematicsError> {
    let m = manipulability(jac, sel);
    if !(m > eps) {
        return Err(KinematicsError::Singular { m, eps });
    }
    let rows = sel.rows();
    let js = select_rows(jac, &rows);
    let a = &js * js.transpose();
    let a_inv = a.cholesky().map(|c| c.inverse()).ok_or(KinematicsError::Singular { m, eps })?;
    let vec_a_inv = vec_colwise(&a_inv);
    let n = jac.ncols();
    Ok(DVector::from_fn(n, |i, _| {
        let hs = select_rows(hess.slice(i), &rows);
        m * vec_colwise(&(&js * hs.transpose())).dot(&vec_a_inv)
    }))
}

pub fn manipulability_jacobian(
    model: &RobotModel,
    q: &[f64],
    sel: AxisSelection,
) -> Result<DVector<f64>, KinematicsError> {
    let (jac, hess) = jacobian_and_hessian(model, q)?;
    manipulability_jacobian_from(&jac, &hess, sel, DEFAULT_SINGULAR_EPS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EllipsoidKind {
    Translational,
    Rotational,
}

/// Principal radii (descending) and matching unit axes (columns of `axes`).
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityEllipsoid {
    pub radii: Vector3<f64>,
    pub axes: Matrix3<f64>,
}

pub fn velocity_ellipsoid(jac: &Jacobian, kind: EllipsoidKind) -> VelocityEllipsoid {
    let start = match kind {
        EllipsoidKind::Translational => 0,
        EllipsoidKind::Rotational => 3,
    };
    let block = jac.fixed_rows::<3>(start);
    let a: Matrix3<f64> = block * block.transpose();
    let eig = SymmetricEigen::new(a);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut radii = Vector3::zeros();
    let mut axes = Matrix3::zeros();
    for (k, &i) in order.iter().enumerate() {
        radii[k] = eig.eigenvalues[i].max(0.0).sqrt();
        axes.set_column(k, &eig.eigenvectors.column(i));
    }
    VelocityEllipsoid { radii, axes }
}
