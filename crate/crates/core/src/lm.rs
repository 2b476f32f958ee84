//! Levenberg–Marquardt minimizer over manifold-valued states.
//!
//! Problems supply residuals and a retraction `state ⊕ delta`; the Jacobian
//! defaults to central differences through that retraction. Only steps that
//! strictly decrease the cost are accepted, so the final cost never exceeds
//! the initial one.

use nalgebra::{DMatrix, DVector};

use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, Copy)]
pub struct LmConfig<T: Scalar> {
    pub max_iterations: usize,
    /// Stop when the accepted step norm falls below this.
    pub step_tol: T,
    /// Stop when the accepted cost decrease falls below this.
    pub cost_change_tol: T,
    pub initial_lambda: T,
}

impl<T: Scalar> Default for LmConfig<T> {
    fn default() -> Self {
        Self { max_iterations: 30, step_tol: lit(1e-10), cost_change_tol: lit(1e-12), initial_lambda: lit(1e-3) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmReport<T: Scalar> {
    /// Sum of squared residuals before refinement.
    pub initial_cost: T,
    pub final_cost: T,
    pub iterations: usize,
    pub converged: bool,
}

pub trait LeastSquaresProblem<T: Scalar> {
    type State: Clone;

    /// Number of local degrees of freedom of the state.
    fn dof(&self) -> usize;

    /// Residual vector, or `None` if the state is infeasible.
    fn residuals(&self, state: &Self::State) -> Option<DVector<T>>;

    fn retract(&self, state: &Self::State, delta: &DVector<T>) -> Self::State;

    /// Finite-difference step for local coordinate `k`.
    fn diff_step(&self, _state: &Self::State, _k: usize) -> T {
        lit(1e-6)
    }

    fn jacobian(&self, state: &Self::State) -> Option<DMatrix<T>> {
        let r0 = self.residuals(state)?;
        let n = self.dof();
        let mut jac = DMatrix::zeros(r0.len(), n);
        let mut delta = DVector::zeros(n);
        for k in 0..n {
            let h = self.diff_step(state, k);
            delta[k] = h;
            let plus = self.residuals(&self.retract(state, &delta))?;
            delta[k] = -h;
            let minus = self.residuals(&self.retract(state, &delta))?;
            delta[k] = T::zero();
            let col = (plus - minus) / (h + h);
            jac.set_column(k, &col);
        }
        Some(jac)
    }
}

/// Runs LM from `init`. Returns `None` only if the initial state is infeasible.
pub fn minimize<T, P>(problem: &P, init: P::State, cfg: &LmConfig<T>) -> Option<(P::State, LmReport<T>)>
where
    T: Scalar,
    P: LeastSquaresProblem<T>,
{
    let mut state = init;
    let mut r = problem.residuals(&state)?;
    let mut cost = r.norm_squared();
    let initial_cost = cost;
    let mut lambda = cfg.initial_lambda;
    let max_lambda: T = lit(1e16);
    let mut iterations = 0;
    let mut converged = false;

    'outer: while iterations < cfg.max_iterations {
        iterations += 1;
        let Some(jac) = problem.jacobian(&state) else { break };
        let jt = jac.transpose();
        let hess = &jt * &jac;
        let grad = &jt * &r;
        loop {
            let mut damped = hess.clone();
            for k in 0..damped.nrows() {
                let d = hess[(k, k)].max(lit(1e-12));
                damped[(k, k)] += lambda * d;
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= lit(10.0);
                if lambda > max_lambda {
                    break 'outer;
                }
                continue;
            };
            let delta = -chol.solve(&grad);
            if delta.norm() < cfg.step_tol {
                converged = true;
                break 'outer;
            }
            let candidate = problem.retract(&state, &delta);
            let new_r = problem.residuals(&candidate);
            match new_r {
                Some(new_r) if new_r.norm_squared() < cost => {
                    let new_cost = new_r.norm_squared();
                    let decrease = cost - new_cost;
                    state = candidate;
                    r = new_r;
                    cost = new_cost;
                    lambda = (lambda / lit(10.0)).max(lit(1e-12));
                    if decrease < cfg.cost_change_tol {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
                _ => {
                    lambda *= lit(10.0);
                    if lambda > max_lambda {
                        // No descent direction left at working precision.
                        converged = true;
                        break 'outer;
                    }
                }
            }
        }
    }

    Some((state, LmReport { initial_cost, final_cost: cost, iterations, converged }))
}
