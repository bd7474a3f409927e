use nalgebra::DVector;

use super::{kkt_violation, soft_threshold, CovarianceForm, LassoProblem, LassoSolution, SolverOptions};
use crate::error::{Error, Result};
use crate::util::l1_norm;

/// Active-set sweeps allowed between two full sweeps.
const MAX_ACTIVE_SWEEPS: usize = 200;

pub(super) fn loss(problem: &LassoProblem, scores: &DVector<f64>) -> f64 {
    let link = problem.link();
    let n = problem.n() as f64;
    scores
        .iter()
        .zip(problem.y().iter())
        .map(|(&z, &y)| link.cumulant(z) - y * z)
        .sum::<f64>()
        / n
}

pub(super) fn loss_gradient(problem: &LassoProblem, scores: &DVector<f64>) -> DVector<f64> {
    let link = problem.link();
    let n = problem.n() as f64;
    let resid = DVector::from_iterator(
        scores.len(),
        scores.iter().zip(problem.y().iter()).map(|(&z, &y)| link.mu(z) - y),
    );
    problem.x().tr_mul(&resid) / n
}

fn first_non_finite(v: &DVector<f64>) -> Option<usize> {
    v.iter().position(|x| !x.is_finite())
}

/// Cyclic coordinate descent with covariance updates.
///
/// `gb` caches `Gβ`; it is refreshed from scratch before every KKT check so
/// that incremental drift never reaches the convergence decision.
pub(super) fn coordinate_descent(
    form: &CovarianceForm,
    lambda: f64,
    mut beta: DVector<f64>,
    opts: &SolverOptions,
) -> Result<LassoSolution> {
    let gram = &form.gram;
    let xty = &form.xty;
    let d = form.d();
    let mut gb = gram * &beta;
    let mut trace = Vec::new();
    let objective =
        |beta: &DVector<f64>, gb: &DVector<f64>| 0.5 * beta.dot(gb) - xty.dot(beta) + lambda * l1_norm(beta);

    // One pass over `coords`; returns the largest curvature-weighted change.
    let sweep = |beta: &mut DVector<f64>, gb: &mut DVector<f64>, coords: &mut dyn Iterator<Item = usize>| -> Result<f64> {
        let mut max_change: f64 = 0.0;
        for j in coords {
            let gjj = gram[(j, j)];
            let old = beta[j];
            let new = if gjj > 0.0 {
                let rho = xty[j] - (gb[j] - gjj * old);
                soft_threshold(rho, lambda) / gjj
            } else {
                0.0
            };
            if !new.is_finite() {
                return Err(Error::NonFinite { coordinate: j });
            }
            let delta = new - old;
            if delta != 0.0 {
                beta[j] = new;
                gb.axpy(delta, &gram.column(j), 1.0);
                max_change = max_change.max(delta.abs() * gjj);
            }
        }
        Ok(max_change)
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut kkt;
    loop {
        sweep(&mut beta, &mut gb, &mut (0..d))?;
        iterations += 1;
        gb = gram * &beta;
        if let Some(j) = first_non_finite(&gb) {
            return Err(Error::NonFinite { coordinate: j });
        }
        if opts.record_trace {
            trace.push(objective(&beta, &gb));
        }
        kkt = kkt_violation(&(&gb - xty), &beta, lambda);
        if kkt <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }

        let active: Vec<usize> = (0..d).filter(|&j| beta[j] != 0.0).collect();
        if active.is_empty() {
            continue;
        }
        for _ in 0..MAX_ACTIVE_SWEEPS {
            let change = sweep(&mut beta, &mut gb, &mut active.iter().copied())?;
            iterations += 1;
            if opts.record_trace {
                trace.push(objective(&beta, &gb));
            }
            if change <= 0.1 * opts.tol || iterations >= opts.max_iter {
                break;
            }
        }
        if iterations >= opts.max_iter {
            gb = gram * &beta;
            kkt = kkt_violation(&(&gb - xty), &beta, lambda);
            converged = kkt <= opts.tol;
            break;
        }
    }

    let mut solution = LassoSolution {
        objective: objective(&beta, &gb),
        beta,
        iterations,
        converged,
        kkt_violation: kkt,
        trace,
    };
    // The zero vector has objective 0 under the covariance form.
    if solution.objective > 0.0 {
        let zero = DVector::zeros(d);
        let kkt0 = kkt_violation(&(-xty), &zero, lambda);
        solution.beta = zero;
        solution.objective = 0.0;
        solution.kkt_violation = kkt0;
        solution.converged = kkt0 <= opts.tol;
    }
    Ok(solution)
}

/// Proximal gradient with a Barzilai–Borwein trial step and backtracking.
///
/// A step `s` is accepted once `f(β⁺) ≤ f(β) + ∇f(β)ᵀ(β⁺ − β) + ‖β⁺ − β‖²/(2s)`,
/// which makes the penalized objective non-increasing.
pub(super) fn proximal_gradient(
    problem: &LassoProblem,
    mut beta: DVector<f64>,
    opts: &SolverOptions,
) -> Result<LassoSolution> {
    let lambda = problem.lambda();
    let x = problem.x();
    let n = problem.n() as f64;

    let scores = x * &beta;
    let mut f = loss(problem, &scores);
    let mut grad = loss_gradient(problem, &scores);
    if let Some(j) = first_non_finite(&grad) {
        return Err(Error::NonFinite { coordinate: j });
    }

    // 1/L for the worst-case curvature bound ‖X‖_F² / n (linear) or / 4n (logistic).
    let curvature = problem.link().mu_dot(0.0) * x.norm_squared() / n;
    let safe_step = if curvature > 0.0 { 1.0 / curvature } else { 1.0 };
    let mut step = safe_step;

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut kkt = kkt_violation(&grad, &beta, lambda);
    if opts.record_trace {
        trace.push(f + lambda * l1_norm(&beta));
    }

    while kkt > opts.tol && iterations < opts.max_iter {
        let mut accepted = None;
        while step > 1e-20 * safe_step {
            let cand = (&beta - step * &grad).map(|v| soft_threshold(v, step * lambda));
            if let Some(j) = first_non_finite(&cand) {
                return Err(Error::NonFinite { coordinate: j });
            }
            let delta = &cand - &beta;
            let cand_scores = x * &cand;
            let fc = loss(problem, &cand_scores);
            let model = f + grad.dot(&delta) + delta.norm_squared() / (2.0 * step);
            if fc <= model + 1e-15 * f.abs().max(1.0) {
                accepted = Some((cand, cand_scores, fc, delta));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cand_scores, fc, delta)) = accepted else {
            break;
        };
        let cand_grad = loss_gradient(problem, &cand_scores);
        if let Some(j) = first_non_finite(&cand_grad) {
            return Err(Error::NonFinite { coordinate: j });
        }
        let sy = delta.dot(&(&cand_grad - &grad));
        let ss = delta.norm_squared();
        step = if sy > 0.0 && ss > 0.0 {
            (ss / sy).clamp(1e-3 * safe_step, 1e6 * safe_step)
        } else {
            2.0 * step
        };

        beta = cand;
        f = fc;
        grad = cand_grad;
        iterations += 1;
        kkt = kkt_violation(&grad, &beta, lambda);
        if opts.record_trace {
            trace.push(f + lambda * l1_norm(&beta));
        }
    }
    if kkt <= opts.tol {
        converged = true;
    }

    let mut solution = LassoSolution {
        objective: f + lambda * l1_norm(&beta),
        beta,
        iterations,
        converged,
        kkt_violation: kkt,
        trace,
    };
    let zero = DVector::zeros(problem.d());
    let zero_scores = DVector::zeros(problem.n());
    let f0 = loss(problem, &zero_scores);
    if solution.objective > f0 {
        let kkt0 = kkt_violation(&loss_gradient(problem, &zero_scores), &zero, lambda);
        solution.beta = zero;
        solution.objective = f0;
        solution.kkt_violation = kkt0;
        solution.converged = kkt0 <= opts.tol;
    }
    Ok(solution)
}
