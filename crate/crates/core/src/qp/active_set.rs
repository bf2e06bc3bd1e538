//! Goldfarb–Idnani dual active-set iteration.
//!
//! Constraints are kept in the form `nᵀx = b` / `nᵀx >= b`. The factorisation state is
//! `J = L⁻ᵀ Q_r` (with `G = L Lᵀ`) and the upper-triangular `R` such that the active normals
//! satisfy `J₁ᵀ N = R`; both are updated with Givens rotations as constraints enter and leave.

use nalgebra::{DMatrix, DVector};

use super::{residuals, QpError, QpSolution, QpStatus, QuadraticProgram};

#[derive(Debug, Clone, Copy)]
enum Origin {
    Eq(usize),
    In(usize),
    Lower(usize),
    Upper(usize),
}

struct Constraint {
    normal: DVector<f64>,
    rhs: f64,
    origin: Origin,
}

impl Constraint {
    fn is_equality(&self) -> bool {
        matches!(self.origin, Origin::Eq(_))
    }

    fn slack(&self, x: &DVector<f64>) -> f64 {
        self.normal.dot(x) - self.rhs
    }
}

fn collect_constraints(p: &QuadraticProgram) -> Vec<Constraint> {
    let k = p.dim();
    let mut out = Vec::new();
    for i in 0..p.a_eq.nrows() {
        out.push(Constraint { normal: p.a_eq.row(i).transpose(), rhs: p.b_eq[i], origin: Origin::Eq(i) });
    }
    for i in 0..p.a_in.nrows() {
        out.push(Constraint { normal: -p.a_in.row(i).transpose(), rhs: -p.b_in[i], origin: Origin::In(i) });
    }
    for i in 0..k {
        if p.lower[i].is_finite() {
            let mut n = DVector::zeros(k);
            n[i] = 1.0;
            out.push(Constraint { normal: n, rhs: p.lower[i], origin: Origin::Lower(i) });
        }
        if p.upper[i].is_finite() {
            let mut n = DVector::zeros(k);
            n[i] = -1.0;
            out.push(Constraint { normal: n, rhs: -p.upper[i], origin: Origin::Upper(i) });
        }
    }
    out
}

fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = a.hypot(b);
    (a / h, b / h, h)
}

fn rotate_columns(m: &mut DMatrix<f64>, i: usize, j: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let (a, b) = (m[(r, i)], m[(r, j)]);
        m[(r, i)] = c * a + s * b;
        m[(r, j)] = -s * a + c * b;
    }
}

struct Factor {
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    /// Number of active constraints.
    q: usize,
}

impl Factor {
    fn k(&self) -> usize {
        self.j.nrows()
    }

    /// `(d, z, r)`: `d = Jᵀn`, primal direction `z = J₂ d₂`, dual direction `r = R⁻¹ d₁`.
    fn directions(&self, normal: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let k = self.k();
        let q = self.q;
        let d = self.j.tr_mul(normal);
        let z = self.j.columns(q, k - q) * d.rows(q, k - q);
        let mut r = d.rows(0, q).into_owned();
        for i in (0..q).rev() {
            let mut v = r[i];
            for c in i + 1..q {
                v -= self.r[(i, c)] * r[c];
            }
            r[i] = v / self.r[(i, i)];
        }
        (d, z, r)
    }

    fn add(&mut self, mut d: DVector<f64>) {
        let k = self.k();
        let q = self.q;
        for i in (q + 1..k).rev() {
            if d[i] == 0.0 {
                continue;
            }
            let (c, s, h) = givens(d[i - 1], d[i]);
            d[i - 1] = h;
            d[i] = 0.0;
            rotate_columns(&mut self.j, i - 1, i, c, s);
        }
        for row in 0..=q {
            self.r[(row, q)] = d[row];
        }
        self.q += 1;
    }

    fn drop(&mut self, l: usize) {
        let q = self.q;
        for col in l..q - 1 {
            for row in 0..q {
                self.r[(row, col)] = self.r[(row, col + 1)];
            }
        }
        for row in 0..q {
            self.r[(row, q - 1)] = 0.0;
        }
        for col in l..q - 1 {
            let (a, b) = (self.r[(col, col)], self.r[(col + 1, col)]);
            if b == 0.0 {
                continue;
            }
            let (c, s, h) = givens(a, b);
            self.r[(col, col)] = h;
            self.r[(col + 1, col)] = 0.0;
            for m in col + 1..q - 1 {
                let (x, y) = (self.r[(col, m)], self.r[(col + 1, m)]);
                self.r[(col, m)] = c * x + s * y;
                self.r[(col + 1, m)] = -s * x + c * y;
            }
            rotate_columns(&mut self.j, col, col + 1, c, s);
        }
        self.q -= 1;
    }
}

/// `‖d₂‖²` below this fraction of `‖d‖²` means the normal lies in the span of the active set.
const DEPENDENCE_TOL: f64 = 1e-20;

pub(super) fn solve(p: &QuadraticProgram, tol: f64, max_iter: usize) -> Result<QpSolution, QpError> {
    let k = p.dim();
    let chol = p.q.clone().cholesky().ok_or(QpError::NotPositiveDefinite)?;
    let l_inv = chol.l().solve_lower_triangular(&DMatrix::identity(k, k)).ok_or(QpError::NotPositiveDefinite)?;
    let mut f = Factor { j: l_inv.transpose(), r: DMatrix::zeros(k, k), q: 0 };
    let mut x = -chol.solve(&p.c);

    let cons = collect_constraints(p);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut iterations = 0;

    let finish = |x: DVector<f64>, active: &[usize], u: &[f64], status: QpStatus, iterations: usize| {
        build_solution(p, &cons, x, active, u, status, iterations, tol)
    };

    for (idx, con) in cons.iter().enumerate().filter(|(_, c)| c.is_equality()) {
        let (d, z, r) = f.directions(&con.normal);
        let d2 = d.rows(f.q, k - f.q).norm_squared();
        let s = con.slack(&x);
        if d2 <= DEPENDENCE_TOL * d.norm_squared().max(f64::MIN_POSITIVE) {
            if s.abs() <= tol * (1.0 + con.rhs.abs()) {
                continue;
            }
            return Ok(finish(x, &active, &u, QpStatus::Infeasible, iterations));
        }
        let t = -s / d2;
        x.axpy(t, &z, 1.0);
        for (uj, rj) in u.iter_mut().zip(r.iter()) {
            *uj -= t * rj;
        }
        u.push(t);
        active.push(idx);
        f.add(d);
        iterations += 1;
    }

    loop {
        // most violated inactive inequality
        let mut chosen: Option<(usize, f64)> = None;
        for (idx, con) in cons.iter().enumerate() {
            if con.is_equality() || active.contains(&idx) {
                continue;
            }
            let s = con.slack(&x);
            if s < -tol && chosen.is_none_or(|(_, best)| s < best) {
                chosen = Some((idx, s));
            }
        }
        let Some((p_idx, _)) = chosen else {
            return Ok(finish(x, &active, &u, QpStatus::Optimal, iterations));
        };
        let con = &cons[p_idx];
        let mut u_p = 0.0;

        loop {
            if iterations >= max_iter {
                return Ok(finish(x, &active, &u, QpStatus::MaxIterations, iterations));
            }
            iterations += 1;
            let (d, z, r) = f.directions(&con.normal);

            // dual step length limited by active inequality multipliers
            let mut t1 = f64::INFINITY;
            let mut blocking = None;
            for (pos, &ci) in active.iter().enumerate() {
                if cons[ci].is_equality() || r[pos] <= 0.0 {
                    continue;
                }
                let ratio = u[pos].max(0.0) / r[pos];
                if ratio < t1 {
                    t1 = ratio;
                    blocking = Some(pos);
                }
            }
            let d2 = d.rows(f.q, k - f.q).norm_squared();
            let t2 = if d2 <= DEPENDENCE_TOL * d.norm_squared().max(f64::MIN_POSITIVE) {
                f64::INFINITY
            } else {
                -con.slack(&x) / d2
            };

            if t1.is_infinite() && t2.is_infinite() {
                return Ok(finish(x, &active, &u, QpStatus::Infeasible, iterations));
            }
            if t2.is_infinite() {
                // dual-only step: shift weight onto p and release the blocking constraint
                for (uj, rj) in u.iter_mut().zip(r.iter()) {
                    *uj -= t1 * rj;
                }
                u_p += t1;
                let l = blocking.expect("finite t1 has a blocking constraint");
                active.remove(l);
                u.remove(l);
                f.drop(l);
                continue;
            }
            let t = t1.min(t2);
            x.axpy(t, &z, 1.0);
            for (uj, rj) in u.iter_mut().zip(r.iter()) {
                *uj -= t * rj;
            }
            u_p += t;
            if t2 <= t1 {
                u.push(u_p);
                active.push(p_idx);
                f.add(d);
                break;
            }
            let l = blocking.expect("finite t1 has a blocking constraint");
            active.remove(l);
            u.remove(l);
            f.drop(l);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_solution(
    p: &QuadraticProgram,
    cons: &[Constraint],
    x: DVector<f64>,
    active: &[usize],
    u: &[f64],
    mut status: QpStatus,
    iterations: usize,
    tol: f64,
) -> QpSolution {
    let k = p.dim();
    let mut y_eq = DVector::zeros(p.a_eq.nrows());
    let mut mu_in = DVector::zeros(p.a_in.nrows());
    let mut mu_lower = DVector::zeros(k);
    let mut mu_upper = DVector::zeros(k);
    // G x + c = Σ uᵢ nᵢ, translated to the sign convention of `residuals`.
    for (&ci, &ui) in active.iter().zip(u) {
        match cons[ci].origin {
            Origin::Eq(i) => y_eq[i] = -ui,
            Origin::In(i) => mu_in[i] = ui,
            Origin::Lower(i) => mu_lower[i] = ui,
            Origin::Upper(i) => mu_upper[i] = ui,
        }
    }
    let mut sol = QpSolution {
        objective: p.objective(&x),
        x,
        status,
        iterations,
        kkt_residuals: Default::default(),
        y_eq,
        mu_in,
        mu_lower,
        mu_upper,
    };
    sol.kkt_residuals = residuals(p, &sol);
    // An iteration that terminates without a certificate is reported as not converged.
    if status == QpStatus::Optimal && !(sol.kkt_residuals.max() < tol) {
        status = QpStatus::MaxIterations;
    }
    sol.status = status;
    sol
}
