#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mmc_core::kinematics::{forward_kinematics, jacobian, manipulability, AxisSelection};
use mmc_core::model::RobotModel;
use mmc_core::qp::QuadraticProgram;

pub const FD_STEP: f64 = 1e-6;

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn homogeneous(r: Matrix3<f64>, p: Vector3<f64>) -> Matrix4<f64> {
    let mut t = Matrix4::identity();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    t.fixed_view_mut::<3, 1>(0, 3).copy_from(&p);
    t
}

/// URDF joint origin: translate, then roll-pitch-yaw as `Rz(y) Ry(p) Rx(r)`.
fn origin(xyz: [f64; 3], rpy: [f64; 3]) -> Matrix4<f64> {
    homogeneous(rot_z(rpy[2]) * rot_y(rpy[1]) * rot_x(rpy[0]), Vector3::from(xyz))
}

/// Panda flange-to-TCP chain from the vendor description, multiplied as 4×4 matrices.
pub fn panda_fk_oracle(q: &[f64]) -> Matrix4<f64> {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
    let joints = [
        ([0.0, 0.0, 0.333], [0.0, 0.0, 0.0]),
        ([0.0, 0.0, 0.0], [-FRAC_PI_2, 0.0, 0.0]),
        ([0.0, -0.316, 0.0], [FRAC_PI_2, 0.0, 0.0]),
        ([0.0825, 0.0, 0.0], [FRAC_PI_2, 0.0, 0.0]),
        ([-0.0825, 0.384, 0.0], [-FRAC_PI_2, 0.0, 0.0]),
        ([0.0, 0.0, 0.0], [FRAC_PI_2, 0.0, 0.0]),
        ([0.088, 0.0, 0.0], [FRAC_PI_2, 0.0, 0.0]),
    ];
    let mut t = Matrix4::<f64>::identity();
    for (i, (xyz, rpy)) in joints.iter().enumerate() {
        t = t * origin(*xyz, *rpy) * homogeneous(rot_z(q[i]), Vector3::zeros());
    }
    t * origin([0.0, 0.0, 0.107], [0.0, 0.0, 0.0])
        * origin([0.0, 0.0, 0.0], [0.0, 0.0, -FRAC_PI_4])
        * origin([0.0, 0.0, 0.1034], [0.0, 0.0, 0.0])
}

/// Classic DH link matrix.
pub fn dh_matrix(theta: f64, d: f64, a: f64, alpha: f64) -> Matrix4<f64> {
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    Matrix4::new(ct, -st * ca, st * sa, a * ct, st, ct * ca, -ct * sa, a * st, 0.0, sa, ca, d, 0.0, 0.0, 0.0, 1.0)
}

pub fn ur5_fk_oracle(q: &[f64]) -> Matrix4<f64> {
    use std::f64::consts::FRAC_PI_2;
    let d = [0.089159, 0.0, 0.0, 0.10915, 0.09465, 0.0823];
    let a = [0.0, -0.425, -0.39225, 0.0, 0.0, 0.0];
    let alpha = [FRAC_PI_2, 0.0, 0.0, FRAC_PI_2, -FRAC_PI_2, 0.0];
    (0..6).fold(Matrix4::identity(), |t, i| t * dh_matrix(q[i], d[i], a[i], alpha[i]))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform configurations inside the position limits whose manipulability exceeds `min_m`.
pub fn random_configs(model: &RobotModel, sel: AxisSelection, count: usize, min_m: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let lim = model.limits();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let q: Vec<f64> = (0..model.n()).map(|i| r.gen_range(lim.position_min[i]..lim.position_max[i])).collect();
        if manipulability(&jacobian(model, &q).unwrap(), sel) > min_m {
            out.push(q);
        }
    }
    out
}

fn shifted(q: &[f64], i: usize, h: f64) -> Vec<f64> {
    let mut v = q.to_vec();
    v[i] += h;
    v
}

fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let angle = cos.acos();
    let v = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    if angle < 1e-12 {
        v / 2.0
    } else {
        v * (angle / (2.0 * angle.sin()))
    }
}

/// Central-difference Jacobian of the forward kinematics.
pub fn fd_jacobian(model: &RobotModel, q: &[f64]) -> DMatrix<f64> {
    let n = model.n();
    let mut j = DMatrix::zeros(6, n);
    for i in 0..n {
        let plus = forward_kinematics(model, &shifted(q, i, FD_STEP)).unwrap();
        let minus = forward_kinematics(model, &shifted(q, i, -FD_STEP)).unwrap();
        let v = (plus.translation.vector - minus.translation.vector) / (2.0 * FD_STEP);
        let w = rotation_log(&(plus.rotation.matrix() * minus.rotation.matrix().transpose())) / (2.0 * FD_STEP);
        for k in 0..3 {
            j[(k, i)] = v[k];
            j[(k + 3, i)] = w[k];
        }
    }
    j
}

/// Central difference of the analytic Jacobian along joint `i`.
pub fn fd_hessian_slice(model: &RobotModel, q: &[f64], i: usize) -> DMatrix<f64> {
    let plus = jacobian(model, &shifted(q, i, FD_STEP)).unwrap();
    let minus = jacobian(model, &shifted(q, i, -FD_STEP)).unwrap();
    let d = (plus - minus) / (2.0 * FD_STEP);
    DMatrix::from_column_slice(6, d.ncols(), d.as_slice())
}

/// Manipulability as the product of the singular values of the selected rows.
pub fn manipulability_svd(model: &RobotModel, q: &[f64], sel: AxisSelection) -> f64 {
    let j = jacobian(model, q).unwrap();
    let rows = sel.rows();
    if rows.len() > model.n() {
        return 0.0;
    }
    let js = DMatrix::from_fn(rows.len(), model.n(), |r, c| j[(rows[r], c)]);
    js.singular_values().iter().product()
}

/// Fourth-order central-difference gradient of the manipulability measure.
pub fn fd_manipulability_gradient(model: &RobotModel, q: &[f64], sel: AxisSelection) -> DVector<f64> {
    let h = 1e-4;
    let f = |i: usize, k: f64| manipulability_svd(model, &shifted(q, i, k * h), sel);
    DVector::from_fn(model.n(), |i, _| (-f(i, 2.0) + 8.0 * f(i, 1.0) - 8.0 * f(i, -1.0) + f(i, -2.0)) / (12.0 * h))
}

/// Componentwise agreement: relative `rel`, or absolute `abs` where the reference vanishes.
pub fn gradient_matches(got: &DVector<f64>, reference: &DVector<f64>, rel: f64, abs: f64) -> bool {
    got.iter().zip(reference.iter()).all(|(a, b)| {
        let e = (a - b).abs();
        e < abs || e < rel * b.abs()
    })
}

/// A random strictly convex QP with a known feasible point.
pub fn random_qp(r: &mut ChaCha8Rng) -> QuadraticProgram {
    let k = r.gen_range(2..=15usize);
    let m = DMatrix::from_fn(k, k, |_, _| r.gen_range(-1.0..1.0));
    let q = m.transpose() * &m + DMatrix::identity(k, k) * 0.1;
    let c = DVector::from_fn(k, |_, _| r.gen_range(-5.0..5.0));
    let x0 = DVector::from_fn(k, |_, _| r.gen_range(-1.0..1.0));

    let n_eq = r.gen_range(0..=2usize.min(k - 1));
    let a_eq = DMatrix::from_fn(n_eq, k, |_, _| r.gen_range(-1.0..1.0));
    let b_eq = &a_eq * &x0;

    let n_in = r.gen_range(0..=6usize);
    let a_in = DMatrix::from_fn(n_in, k, |_, _| r.gen_range(-1.0..1.0));
    let b_in = &a_in * &x0 + DVector::from_fn(n_in, |_, _| r.gen_range(0.0..0.5));

    let mut lower = DVector::from_element(k, f64::NEG_INFINITY);
    let mut upper = DVector::from_element(k, f64::INFINITY);
    for _ in 0..r.gen_range(0..=3usize) {
        let j = r.gen_range(0..k);
        lower[j] = x0[j] - r.gen_range(0.0..0.3);
    }
    for _ in 0..r.gen_range(0..=3usize) {
        let j = r.gen_range(0..k);
        upper[j] = x0[j] + r.gen_range(0.0..0.3);
    }
    QuadraticProgram::new(q, c).with_equality(a_eq, b_eq).with_inequality(a_in, b_in).with_bounds(lower, upper)
}

/// Every inequality as a row `g x ≤ h`: general rows, then finite lower and upper bounds.
fn inequality_rows(p: &QuadraticProgram) -> Vec<(DVector<f64>, f64)> {
    let k = p.q.nrows();
    let mut rows: Vec<(DVector<f64>, f64)> =
        (0..p.a_in.nrows()).map(|i| (p.a_in.row(i).transpose(), p.b_in[i])).collect();
    for j in 0..k {
        if p.lower[j].is_finite() {
            rows.push((-DVector::from_fn(k, |i, _| if i == j { 1.0 } else { 0.0 }), -p.lower[j]));
        }
        if p.upper[j].is_finite() {
            rows.push((DVector::from_fn(k, |i, _| if i == j { 1.0 } else { 0.0 }), p.upper[j]));
        }
    }
    rows
}

/// Minimiser found by trying every subset of inequalities as the active set.
pub fn brute_force_qp(p: &QuadraticProgram) -> Option<DVector<f64>> {
    let k = p.q.nrows();
    let ineq = inequality_rows(p);
    let n_eq = p.a_eq.nrows();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << ineq.len()) {
        let active: Vec<usize> = (0..ineq.len()).filter(|i| mask & (1 << i) != 0).collect();
        let m = n_eq + active.len();
        if m > k {
            continue;
        }
        let mut kkt = DMatrix::zeros(k + m, k + m);
        let mut rhs = DVector::zeros(k + m);
        kkt.view_mut((0, 0), (k, k)).copy_from(&p.q);
        rhs.rows_mut(0, k).copy_from(&-&p.c);
        for r in 0..n_eq {
            for j in 0..k {
                kkt[(k + r, j)] = p.a_eq[(r, j)];
                kkt[(j, k + r)] = p.a_eq[(r, j)];
            }
            rhs[k + r] = p.b_eq[r];
        }
        for (slot, &a) in active.iter().enumerate() {
            let r = n_eq + slot;
            for j in 0..k {
                kkt[(k + r, j)] = ineq[a].0[j];
                kkt[(j, k + r)] = ineq[a].0[j];
            }
            rhs[k + r] = ineq[a].1;
        }
        let lu = kkt.clone().lu();
        let Some(sol) = lu.solve(&rhs) else { continue };
        if (&kkt * &sol - &rhs).amax() > 1e-9 {
            continue;
        }
        let x = sol.rows(0, k).into_owned();
        let primal = ineq.iter().all(|(g, h)| g.dot(&x) <= h + 1e-9);
        let dual = (0..active.len()).all(|s| sol[k + n_eq + s] >= -1e-9);
        if primal && dual {
            let f = 0.5 * x.dot(&(&p.q * &x)) + p.c.dot(&x);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, x));
            }
        }
    }
    best.map(|(_, x)| x)
}

/// Independent KKT check of a reported primal-dual pair, relative to the data scale.
pub fn kkt_violation(
    p: &QuadraticProgram,
    x: &DVector<f64>,
    y_eq: &DVector<f64>,
    mu_in: &DVector<f64>,
    mu_lower: &DVector<f64>,
    mu_upper: &DVector<f64>,
) -> f64 {
    let grad = &p.q * x + &p.c;
    let stat = &grad + p.a_eq.transpose() * y_eq + p.a_in.transpose() * mu_in - mu_lower + mu_upper;
    let scale = 1.0 + grad.amax().max((p.a_in.transpose() * mu_in).amax()).max((p.a_eq.transpose() * y_eq).amax());
    let mut worst = stat.amax() / scale;
    if p.a_eq.nrows() > 0 {
        worst = worst.max((&p.a_eq * x - &p.b_eq).amax());
    }
    for i in 0..p.a_in.nrows() {
        let slack = p.b_in[i] - p.a_in.row(i).dot(&x.transpose());
        worst = worst.max((-slack).max(0.0)).max(-mu_in[i]).max((mu_in[i] * slack).abs());
    }
    for j in 0..x.len() {
        let (lo, hi) = (x[j] - p.lower[j], p.upper[j] - x[j]);
        worst = worst.max((-lo).max(0.0)).max((-hi).max(0.0)).max(-mu_lower[j]).max(-mu_upper[j]);
        if p.lower[j].is_finite() {
            worst = worst.max((mu_lower[j] * lo).abs());
        } else {
            worst = worst.max(mu_lower[j].abs());
        }
        if p.upper[j].is_finite() {
            worst = worst.max((mu_upper[j] * hi).abs());
        } else {
            worst = worst.max(mu_upper[j].abs());
        }
    }
    worst
}
