//! Per-sample loss oracles, DANE local subproblems and the exact quadratic subproblem solver.

use nalgebra::DMatrix;

use crate::cost::MachineCost;
use crate::data::{Example, View};
use crate::error::{Error, Result};
use crate::linalg::{self, SpdSolver};

/// A per-sample loss `f(w, z)`.
///
/// Only [`RidgeLoss`] is provided. Losses that are not quadratic return `None` from
/// [`Loss::hessian`] and can then be used with the stochastic solvers only.
pub trait Loss: Send + Sync {
    fn value(&self, w: &[f64], z: Example<'_>) -> f64;

    /// Writes `∇_w f(w, z)` into `out`.
    fn grad_into(&self, w: &[f64], z: Example<'_>, out: &mut [f64]);

    /// Hessian of the mean loss over `view`, if the loss is quadratic in `w`.
    fn hessian(&self, _view: View<'_>) -> Option<DMatrix<f64>> {
        None
    }
}

/// Squared error with the ridge penalty folded into every sample:
/// `f(w, z) = (<x, w> - y)^2 + reg * ||w||^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeLoss {
    pub reg: f64,
}

impl RidgeLoss {
    pub const DEFAULT_REG: f64 = 0.005;

    pub fn new(reg: f64) -> Result<Self> {
        if !(reg >= 0.0 && reg.is_finite()) {
            return Err(Error::config("reg", format!("must be finite and >= 0, got {reg}")));
        }
        Ok(RidgeLoss { reg })
    }
}

impl Default for RidgeLoss {
    fn default() -> Self {
        RidgeLoss { reg: Self::DEFAULT_REG }
    }
}

impl Loss for RidgeLoss {
    fn value(&self, w: &[f64], z: Example<'_>) -> f64 {
        let r = linalg::dot(z.x, w) - z.y;
        r * r + self.reg * linalg::dot(w, w)
    }

    fn grad_into(&self, w: &[f64], z: Example<'_>, out: &mut [f64]) {
        let r = linalg::dot(z.x, w) - z.y;
        for ((o, xj), wj) in out.iter_mut().zip(z.x).zip(w) {
            *o = 2.0 * r * xj + 2.0 * self.reg * wj;
        }
    }

    fn hessian(&self, view: View<'_>) -> Option<DMatrix<f64>> {
        let (n, d) = (view.len(), view.dim());
        let mut x = DMatrix::zeros(n, d);
        for (k, z) in view.iter().enumerate() {
            for (j, &v) in z.x.iter().enumerate() {
                x[(k, j)] = v;
            }
        }
        let mut h = x.transpose() * &x * (2.0 / n as f64);
        for j in 0..d {
            h[(j, j)] += 2.0 * self.reg;
        }
        Some(h)
    }
}

fn check_dims(w: &[f64], z: &Example<'_>) {
    assert_eq!(w.len(), z.x.len(), "dimension mismatch: w has {} entries, x has {}", w.len(), z.x.len());
}

pub fn loss_sample(loss: &dyn Loss, w: &[f64], z: Example<'_>) -> f64 {
    check_dims(w, &z);
    loss.value(w, z)
}

pub fn grad_sample(loss: &dyn Loss, w: &[f64], z: Example<'_>) -> Vec<f64> {
    check_dims(w, &z);
    let mut g = vec![0.0; w.len()];
    loss.grad_into(w, z, &mut g);
    g
}

/// Mean of the per-sample gradients over `view`. Not charged to any ledger.
pub fn mean_grad(loss: &dyn Loss, w: &[f64], view: View<'_>) -> Vec<f64> {
    assert!(!view.is_empty(), "gradient over an empty view");
    assert_eq!(w.len(), view.dim(), "dimension mismatch");
    let mut acc = vec![0.0; w.len()];
    let mut g = vec![0.0; w.len()];
    for z in view.iter() {
        loss.grad_into(w, z, &mut g);
        for (a, gi) in acc.iter_mut().zip(&g) {
            *a += gi;
        }
    }
    let n = view.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    acc
}

/// Mean gradient over `view`, charging `|view|` gradient evaluations to `cost`.
pub fn full_grad(loss: &dyn Loss, w: &[f64], view: View<'_>, cost: &mut MachineCost) -> Vec<f64> {
    let g = mean_grad(loss, w, view);
    cost.grads += view.len() as u64;
    g
}

/// Empirical risk: the mean loss over `view`.
pub fn empirical_risk(loss: &dyn Loss, w: &[f64], view: View<'_>) -> f64 {
    assert!(!view.is_empty(), "risk over an empty view");
    view.iter().map(|z| loss.value(w, z)).sum::<f64>() / view.len() as f64
}

/// Extreme eigenvalues `(largest, smallest)` of the empirical Hessian, for quadratic losses.
pub fn hessian_extremes(loss: &dyn Loss, view: View<'_>) -> Option<(f64, f64)> {
    let h = loss.hessian(view)?;
    let eig = h.symmetric_eigenvalues();
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    Some((max, min))
}

/// The local DANE objective around `anchor`:
///
/// `h_i(w) = φ_i(w) - (G_i - η G)ᵀ w + (μ/2) ||w - anchor||²`
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSpec {
    pub anchor: Vec<f64>,
    /// Local gradient `G_i = ∇φ_i(anchor)`.
    pub local_grad: Vec<f64>,
    /// Global gradient `G = ∇φ(anchor)`.
    pub global_grad: Vec<f64>,
    pub eta: f64,
    pub mu: f64,
}

pub fn build_subproblem(
    anchor: Vec<f64>,
    local_grad: Vec<f64>,
    global_grad: Vec<f64>,
    eta: f64,
    mu: f64,
) -> Result<SubproblemSpec> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::config("eta", format!("must be positive, got {eta}")));
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::config("mu", format!("must be >= 0, got {mu}")));
    }
    let d = anchor.len();
    if local_grad.len() != d || global_grad.len() != d {
        return Err(Error::config(
            "anchor",
            format!(
                "dimension mismatch: anchor {d}, local gradient {}, global gradient {}",
                local_grad.len(),
                global_grad.len()
            ),
        ));
    }
    Ok(SubproblemSpec {
        anchor,
        local_grad,
        global_grad,
        eta,
        mu,
    })
}

/// Checks that `global` is the mean of `locals` (to a relative tolerance).
pub fn check_global_gradient(locals: &[Vec<f64>], global: &[f64], rel_tol: f64) -> Result<()> {
    let mean = linalg::tree_mean(locals);
    let scale = linalg::norm(global).max(1.0);
    let err = linalg::norm(&linalg::sub(&mean, global));
    if err > rel_tol * scale {
        return Err(Error::config(
            "global_grad",
            format!("differs from the mean of the local gradients by {err:e}"),
        ));
    }
    Ok(())
}

impl SubproblemSpec {
    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    /// The per-sample term `f*(w, z) = f(w, z) - (G_i - η G)ᵀ w + (μ/2) ||w - anchor||²`.
    pub fn sample_value(&self, loss: &dyn Loss, w: &[f64], z: Example<'_>) -> f64 {
        let mut linear = 0.0;
        let mut prox = 0.0;
        for j in 0..w.len() {
            linear += (self.local_grad[j] - self.eta * self.global_grad[j]) * w[j];
            let diff = w[j] - self.anchor[j];
            prox += diff * diff;
        }
        loss_sample(loss, w, z) - linear + 0.5 * self.mu * prox
    }

    /// `h_i(w)` over the local view.
    pub fn value(&self, loss: &dyn Loss, w: &[f64], view: View<'_>) -> f64 {
        let mut linear = 0.0;
        let mut prox = 0.0;
        for j in 0..w.len() {
            linear += (self.local_grad[j] - self.eta * self.global_grad[j]) * w[j];
            let diff = w[j] - self.anchor[j];
            prox += diff * diff;
        }
        empirical_risk(loss, w, view) - linear + 0.5 * self.mu * prox
    }

    /// `∇h_i(w)`, uncharged.
    pub fn grad(&self, loss: &dyn Loss, w: &[f64], view: View<'_>) -> Vec<f64> {
        let mut g = mean_grad(loss, w, view);
        self.shift_direction(w, &mut g);
        g
    }

    /// Turns `∇f` (or `∇φ_i`) at `w` into the corresponding subproblem gradient in place.
    #[inline]
    pub(crate) fn shift_direction(&self, w: &[f64], g: &mut [f64]) {
        for j in 0..g.len() {
            g[j] = g[j] - self.local_grad[j] + self.eta * self.global_grad[j] + self.mu * (w[j] - self.anchor[j]);
        }
    }
}

/// Stochastic gradient of the subproblem: `∇f(w, z) - G_i + η G + μ (w - anchor)`.
pub fn subproblem_grad_sample(sub: &SubproblemSpec, loss: &dyn Loss, w: &[f64], z: Example<'_>) -> Vec<f64> {
    assert_eq!(w.len(), sub.dim(), "dimension mismatch");
    let mut g = grad_sample(loss, w, z);
    sub.shift_direction(w, &mut g);
    g
}

/// Factorized local Hessian `H_i + μ I` for repeated exact subproblem solves.
///
/// The Hessian of a quadratic loss does not depend on the anchor, so one factorization
/// serves every round of a run.
#[derive(Debug, Clone)]
pub struct ExactLocalSolver {
    solver: SpdSolver,
    dim: usize,
}

impl ExactLocalSolver {
    pub fn prepare(loss: &dyn Loss, view: View<'_>, mu: f64) -> Result<Self> {
        assert!(!view.is_empty(), "exact solve over an empty view");
        let mut h = loss
            .hessian(view)
            .ok_or_else(|| Error::Unsupported("exact local solve requires a quadratic loss".into()))?;
        let dim = h.nrows();
        for j in 0..dim {
            h[(j, j)] += mu;
        }
        let solver = SpdSolver::new(h).ok_or_else(|| {
            Error::numerical(
                0,
                None,
                format!("local Hessian with mu = {mu} is singular or indefinite; use mu > 0"),
            )
        })?;
        Ok(ExactLocalSolver { solver, dim })
    }

    /// Minimizes `sub` over `view` with one Newton step from the anchor, which is exact
    /// for a quadratic objective. Charges `|view|` gradients and one solve to `cost`.
    pub fn solve(&self, sub: &SubproblemSpec, loss: &dyn Loss, view: View<'_>, cost: &mut MachineCost) -> Result<Vec<f64>> {
        assert_eq!(sub.dim(), self.dim, "dimension mismatch");
        let mut g = full_grad(loss, &sub.anchor, view, cost);
        sub.shift_direction(&sub.anchor, &mut g);
        let step = self
            .solver
            .solve(&g)
            .ok_or_else(|| Error::numerical(0, None, "iterative local solve did not converge"))?;
        cost.exact_solves += 1;
        Ok(sub.anchor.iter().zip(&step).map(|(a, s)| a - s).collect())
    }
}

/// Exact minimizer of the subproblem over `view` (quadratic losses only).
pub fn exact_minimize(sub: &SubproblemSpec, loss: &dyn Loss, view: View<'_>, cost: &mut MachineCost) -> Result<Vec<f64>> {
    ExactLocalSolver::prepare(loss, view, sub.mu)?.solve(sub, loss, view, cost)
}
