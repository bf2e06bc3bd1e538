//! Dense strictly convex quadratic programming.
//!
//! ```text
//!     minimize     ½ xᵀ Q x + cᵀ x
//!     subject to   A_eq x  = b_eq
//!                  A_in x <= b_in
//!                  lower <= x <= upper
//! ```
//!
//! Solved with the Goldfarb–Idnani dual active-set method: start from the unconstrained
//! minimiser and add violated constraints one at a time, dropping constraints whose
//! multipliers would turn negative. Bounds are folded into the inequality list.

mod active_set;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Q is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("Q is not positive definite")]
    NotPositiveDefinite,
    #[error("lower bound exceeds upper bound for variable {0}")]
    InvalidBounds(usize),
    #[error("problem data contains NaN or infinite values ({0})")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl QuadraticProgram {
    /// Unconstrained problem; add constraints with the `with_*` builders.
    pub fn new(q: DMatrix<f64>, c: DVector<f64>) -> Self {
        let k = c.len();
        Self {
            q,
            c,
            a_eq: DMatrix::zeros(0, k),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, k),
            b_in: DVector::zeros(0),
            lower: DVector::from_element(k, f64::NEG_INFINITY),
            upper: DVector::from_element(k, f64::INFINITY),
        }
    }

    pub fn with_equality(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_inequality(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_in = a;
        self.b_in = b;
        self
    }

    pub fn with_bounds(mut self, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }

    fn validate(&self) -> Result<(), QpError> {
        let k = self.dim();
        if k == 0 {
            return Err(QpError::Dimension("problem has no variables".into()));
        }
        let dims = [
            ("Q", self.q.nrows() == k && self.q.ncols() == k),
            ("A_eq", self.a_eq.ncols() == k && self.a_eq.nrows() == self.b_eq.len()),
            ("A_in", self.a_in.ncols() == k && self.a_in.nrows() == self.b_in.len()),
            ("bounds", self.lower.len() == k && self.upper.len() == k),
        ];
        if let Some((what, _)) = dims.iter().find(|(_, ok)| !ok) {
            return Err(QpError::Dimension(format!("{what} does not match {k} variables")));
        }
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        for (what, ok) in [
            ("Q", finite(&self.q)),
            ("c", self.c.iter().all(|v| v.is_finite())),
            ("A_eq", finite(&self.a_eq)),
            ("b_eq", self.b_eq.iter().all(|v| v.is_finite())),
            ("A_in", finite(&self.a_in)),
            ("b_in", self.b_in.iter().all(|v| v.is_finite())),
        ] {
            if !ok {
                return Err(QpError::NonFinite(what));
            }
        }
        if self.lower.iter().chain(self.upper.iter()).any(|v| v.is_nan()) {
            return Err(QpError::NonFinite("bounds"));
        }
        let asym = (&self.q - self.q.transpose()).abs().max();
        if asym > 1e-10 * (1.0 + self.q.abs().max()) {
            return Err(QpError::NotSymmetric(asym));
        }
        if let Some(i) = (0..k).find(|&i| self.lower[i] > self.upper[i]) {
            return Err(QpError::InvalidBounds(i));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Scaled KKT residuals of a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    /// `‖Qx + c + A_eqᵀy + A_inᵀμ − μ_lower + μ_upper‖∞`, divided by one plus the largest term.
    pub stationarity: f64,
    /// `‖A_eq x − b_eq‖∞`.
    pub equality: f64,
    /// Largest violation of an inequality or bound, or of complementary slackness `|μ s| / (1 + |μ|)`.
    pub inequality: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.equality).max(self.inequality)
    }
}

/// Solver output. Multipliers follow the sign convention of [`KktResiduals::stationarity`];
/// inequality and bound multipliers are nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub status: QpStatus,
    pub iterations: usize,
    pub kkt_residuals: KktResiduals,
    pub y_eq: DVector<f64>,
    pub mu_in: DVector<f64>,
    pub mu_lower: DVector<f64>,
    pub mu_upper: DVector<f64>,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

/// Solve with [`DEFAULT_TOL`] and [`DEFAULT_MAX_ITER`].
pub fn solve(problem: &QuadraticProgram) -> Result<QpSolution, QpError> {
    solve_with(problem, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

pub fn solve_with(problem: &QuadraticProgram, tol: f64, max_iter: usize) -> Result<QpSolution, QpError> {
    problem.validate()?;
    active_set::solve(problem, tol, max_iter)
}

fn residuals(p: &QuadraticProgram, s: &QpSolution) -> KktResiduals {
    let x = &s.x;
    let qx = &p.q * x;
    let eq_term = p.a_eq.transpose() * &s.y_eq;
    let in_term = p.a_in.transpose() * &s.mu_in;
    let grad = &qx + &p.c + &eq_term + &in_term - &s.mu_lower + &s.mu_upper;
    let scale = [&qx, &p.c, &eq_term, &in_term, &s.mu_lower, &s.mu_upper].iter().map(|v| v.amax()).fold(0.0, f64::max);
    let stationarity = grad.amax() / (1.0 + scale);

    let equality = if p.b_eq.is_empty() { 0.0 } else { (&p.a_eq * x - &p.b_eq).amax() };

    let comp = |mu: f64, s: f64| (mu * s).abs() / (1.0 + mu.abs());
    let mut inequality: f64 = 0.0;
    let slack_in = &p.b_in - &p.a_in * x;
    for i in 0..slack_in.len() {
        inequality = inequality.max(-slack_in[i]).max(comp(s.mu_in[i], slack_in[i])).max(-s.mu_in[i]);
    }
    for i in 0..x.len() {
        if p.lower[i].is_finite() {
            let sl = x[i] - p.lower[i];
            inequality = inequality.max(-sl).max(comp(s.mu_lower[i], sl));
        }
        if p.upper[i].is_finite() {
            let su = p.upper[i] - x[i];
            inequality = inequality.max(-su).max(comp(s.mu_upper[i], su));
        }
        inequality = inequality.max(-s.mu_lower[i]).max(-s.mu_upper[i]);
    }
    KktResiduals { stationarity, equality, inequality }
}
