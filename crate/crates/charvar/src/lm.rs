//! Damped Gauss-Newton refinement over a product manifold.
//!
//! Problems expose a residual, an analytic Jacobian in tangent coordinates,
//! and a retraction that turns a tangent step into a new point.  The solver
//! is the standard Levenberg-Marquardt loop: solve
//! `(J^T J + lambda I) step = -J^T r`, accept the step when the residual
//! norm drops, otherwise raise the damping and retry.

use nalgebra::{DMatrix, DVector};

pub trait ManifoldProblem {
    type Point: Clone;

    fn residual_dim(&self) -> usize;
    fn tangent_dim(&self) -> usize;
    fn residual(&self, p: &Self::Point, out: &mut DVector<f64>);
    /// Analytic Jacobian of the residual in the tangent coordinates used by
    /// [`ManifoldProblem::apply_step`].
    fn jacobian(&self, p: &Self::Point, out: &mut DMatrix<f64>);
    fn apply_step(&self, p: &Self::Point, step: &DVector<f64>) -> Self::Point;
}

#[derive(Debug, Clone)]
pub struct RefineOutcome<P> {
    pub point: P,
    /// Euclidean norm of the residual vector at the returned point.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn residual_norm<P: ManifoldProblem>(prob: &P, p: &P::Point) -> f64 {
    let mut r = DVector::zeros(prob.residual_dim());
    prob.residual(p, &mut r);
    r.norm()
}

/// Refines `start` until the residual norm drops below `tol` or progress
/// stalls.  Positive-dimensional solution sets keep the normal equations
/// singular the whole way down, which the damping absorbs.
pub fn refine<P: ManifoldProblem>(
    prob: &P,
    start: P::Point,
    tol: f64,
    max_iterations: usize,
) -> RefineOutcome<P::Point> {
    let n = prob.tangent_dim();
    let m = prob.residual_dim();
    if n == 0 {
        let mut r = DVector::zeros(m);
        prob.residual(&start, &mut r);
        let residual = r.norm();
        return RefineOutcome { point: start, residual, iterations: 0, converged: residual <= tol };
    }

    let mut point = start;
    let mut r = DVector::zeros(m);
    prob.residual(&point, &mut r);
    let mut cost = r.norm();
    let mut jac = DMatrix::zeros(m, n);
    let mut lambda = 1e-3;
    let mut iterations = 0;

    while cost > tol && iterations < max_iterations {
        iterations += 1;
        prob.jacobian(&point, &mut jac);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;

        let mut accepted = false;
        for _ in 0..24 {
            let mut damped = jtj.clone();
            for d in 0..n {
                damped[(d, d)] += lambda;
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&jtr));
            if step.norm() < 1e-15 {
                // The gradient is numerically zero; nothing left to gain.
                return RefineOutcome { point, residual: cost, iterations, converged: cost <= tol };
            }
            let candidate = prob.apply_step(&point, &step);
            let mut cr = DVector::zeros(m);
            prob.residual(&candidate, &mut cr);
            let ccost = cr.norm();
            if ccost < cost {
                point = candidate;
                r = cr;
                cost = ccost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 10.0;
            if lambda > 1e14 {
                break;
            }
        }
        if !accepted {
            break;
        }
    }

    RefineOutcome { point, residual: cost, iterations, converged: cost <= tol }
}

/// Central-difference Jacobian in the same tangent coordinates as
/// [`ManifoldProblem::jacobian`].
pub fn numeric_jacobian<P: ManifoldProblem>(prob: &P, p: &P::Point, h: f64) -> DMatrix<f64> {
    let n = prob.tangent_dim();
    let m = prob.residual_dim();
    let mut out = DMatrix::zeros(m, n);
    let mut plus = DVector::zeros(m);
    let mut minus = DVector::zeros(m);
    let mut step = DVector::zeros(n);
    for c in 0..n {
        step[c] = h;
        prob.residual(&prob.apply_step(p, &step), &mut plus);
        step[c] = -h;
        prob.residual(&prob.apply_step(p, &step), &mut minus);
        step[c] = 0.0;
        for row in 0..m {
            out[(row, c)] = (plus[row] - minus[row]) / (2.0 * h);
        }
    }
    out
}

/// Dimension of the numerical kernel: tangent dimension minus the count of
/// singular values above `rel_tol` times the largest.
pub fn kernel_dimension(jacobian: &DMatrix<f64>, rel_tol: f64) -> usize {
    let n = jacobian.ncols();
    let svd = jacobian.clone().svd(false, false);
    let max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return n;
    }
    let rank = svd.singular_values.iter().filter(|s| **s > rel_tol * max).count();
    n - rank
}
