//! Damped Gauss–Newton (Levenberg–Marquardt) over the window, with landmarks
//! eliminated through the Schur complement.

use log::debug;
use nalgebra::{DMatrix, DVector, Vector3};

use super::problem::{NormalEquations, Problem};
use super::window::SlidingWindow;
use super::EstimatorConfig;

/// Floor for the damping diagonal so unconstrained directions stay regular.
const MIN_DIAGONAL: f64 = 1e-6;
const MAX_LAMBDA: f64 = 1e16;
/// Cost below which the problem is treated as solved without stepping.
const NEGLIGIBLE_COST: f64 = 1e-18;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub accepted_steps: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub converged: bool,
    pub diverged: bool,
}

/// Solves the damped system, returning the full step or `None` when the
/// damped matrix is not positive definite.
fn damped_step(ne: &NormalEquations, lambda: f64, dim: usize, frame_dim: usize) -> Option<DVector<f64>> {
    let mut s = ne.hff.clone();
    for i in 0..frame_dim {
        s[(i, i)] += lambda * s[(i, i)].max(MIN_DIAGONAL);
    }
    let mut rhs = ne.bf.clone();
    let mut inv_blocks = Vec::with_capacity(ne.landmarks.len());
    for lb in &ne.landmarks {
        let mut hll = lb.hll;
        for i in 0..3 {
            hll[(i, i)] += lambda * hll[(i, i)].max(MIN_DIAGONAL);
        }
        let inv = hll.try_inverse()?;
        // Only the pose columns of observing frames couple to a landmark.
        let rows: Vec<usize> = (0..frame_dim)
            .filter(|&r| lb.hfl.row(r).iter().any(|v| *v != 0.0))
            .collect();
        let compact: Vec<Vector3<f64>> = rows
            .iter()
            .map(|&r| Vector3::new(lb.hfl[(r, 0)], lb.hfl[(r, 1)], lb.hfl[(r, 2)]))
            .collect();
        for (a, &ra) in rows.iter().enumerate() {
            let ca = inv * compact[a]; // inv is symmetric
            rhs[ra] -= ca.dot(&lb.bl);
            for (b, &rb) in rows.iter().enumerate() {
                s[(ra, rb)] -= ca.dot(&compact[b]);
            }
        }
        inv_blocks.push(inv);
    }
    let s = 0.5 * (&s + s.transpose());
    let dx_f = s.cholesky()?.solve(&rhs);

    let mut dx = DVector::zeros(dim);
    dx.rows_mut(0, frame_dim).copy_from(&dx_f);
    let mut off = frame_dim;
    for (lb, inv) in ne.landmarks.iter().zip(&inv_blocks) {
        let dl: Vector3<f64> = inv * (lb.bl - lb.hfl.transpose() * &dx_f);
        dx.fixed_rows_mut::<3>(off).copy_from(&dl);
        off += 3;
    }
    Some(dx)
}

/// Minimizes the problem cost over the window's free parameters. Accepted
/// steps never increase the cost; a non-finite cost restores the window to
/// its state before the call and reports divergence.
pub fn solve(problem: &Problem, window: &mut SlidingWindow, cfg: &EstimatorConfig) -> SolveReport {
    let backup = window.clone();
    let mut cost = problem.cost(window);
    let mut report = SolveReport {
        initial_cost: cost,
        final_cost: cost,
        ..Default::default()
    };
    if !cost.is_finite() {
        *window = backup;
        report.diverged = true;
        return report;
    }
    if cost <= NEGLIGIBLE_COST || problem.dim == 0 {
        report.converged = true;
        return report;
    }

    let mut lambda = cfg.lm_lambda_init;
    let mut ne = problem.linearize(window);
    while report.iterations < cfg.max_iters {
        report.iterations += 1;
        let Some(dx) = damped_step(&ne, lambda, problem.dim, problem.frame_dim) else {
            lambda *= 10.0;
            if lambda > MAX_LAMBDA {
                break;
            }
            continue;
        };
        let mut trial = window.clone();
        problem.apply_step(&mut trial, &dx);
        let new_cost = problem.cost(&trial);
        if !new_cost.is_finite() {
            *window = backup;
            report.diverged = true;
            report.final_cost = new_cost;
            return report;
        }
        if new_cost < cost {
            let rel = (cost - new_cost) / cost;
            *window = trial;
            cost = new_cost;
            report.accepted_steps += 1;
            lambda = (lambda / 10.0).max(1e-12);
            if rel < cfg.rel_tol || cost <= NEGLIGIBLE_COST || dx.amax() < 1e-12 {
                report.converged = true;
                break;
            }
            ne = problem.linearize(window);
        } else {
            lambda *= 10.0;
            if lambda > MAX_LAMBDA {
                report.converged = true;
                break;
            }
        }
    }
    report.final_cost = cost;
    debug!(
        "solve: {} iterations, cost {:.3e} -> {:.3e}",
        report.iterations, report.initial_cost, report.final_cost
    );
    report
}

/// Full Gauss–Newton matrix with the landmark blocks filled in, for tests.
pub fn dense_hessian(problem: &Problem, window: &SlidingWindow) -> DMatrix<f64> {
    let ne = problem.linearize(window);
    let mut h = DMatrix::zeros(problem.dim, problem.dim);
    h.view_mut((0, 0), (problem.frame_dim, problem.frame_dim))
        .copy_from(&ne.hff);
    let mut off = problem.frame_dim;
    for lb in &ne.landmarks {
        h.view_mut((off, off), (3, 3)).copy_from(&lb.hll);
        h.view_mut((0, off), (problem.frame_dim, 3)).copy_from(&lb.hfl);
        h.view_mut((off, 0), (3, problem.frame_dim))
            .copy_from(&lb.hfl.transpose());
        off += 3;
    }
    h
}
