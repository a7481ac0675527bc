//! Stochastic solvers: plain SGD, and the SGD / single-stage SVRG local solvers that
//! approximately minimize a DANE subproblem.
//!
//! Samples are drawn uniformly with replacement from the given view. Every solver takes
//! an explicit seed and charges its per-sample gradient evaluations to a [`MachineCost`].

use rand::Rng;

use crate::cost::MachineCost;
use crate::data::View;
use crate::error::{Error, Result};
use crate::linalg;
use crate::objective::{Loss, SubproblemSpec};
use crate::rng::{self, uniform_index};
use crate::schedules::Schedule;
use crate::trace::Trace;

/// How each machine (approximately) minimizes its DANE subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalSolverKind {
    Exact,
    Sgd { steps: u64, schedule: Schedule },
    /// Single-stage SVRG with the DANE anchor and global gradient as its snapshot.
    Svrg { steps: u64, alpha: f64 },
}

impl LocalSolverKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LocalSolverKind::Exact => Ok(()),
            LocalSolverKind::Sgd { steps, schedule } => {
                if steps == 0 {
                    return Err(Error::config("T", "must be at least 1"));
                }
                schedule.validate().map_err(|e| e.within("schedule"))
            }
            LocalSolverKind::Svrg { steps, alpha } => {
                if steps == 0 {
                    return Err(Error::config("T", "must be at least 1"));
                }
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::config("svrg_alpha", format!("must be positive, got {alpha}")));
                }
                Ok(())
            }
        }
    }
}

/// Runs `steps` SGD updates `w <- w - α_k ∇f(w, z_k)` in place, with `k` continuing from `k_start`.
///
/// Used directly by distributed SGD, whose step counter runs across communication rounds.
#[allow(clippy::too_many_arguments)]
pub fn sgd_steps<R: Rng>(
    loss: &dyn Loss,
    view: View<'_>,
    schedule: &Schedule,
    w: &mut [f64],
    rng: &mut R,
    k_start: u64,
    steps: u64,
    cost: &mut MachineCost,
) {
    assert!(!view.is_empty(), "SGD over an empty view");
    assert_eq!(w.len(), view.dim(), "dimension mismatch");
    let mut g = vec![0.0; w.len()];
    for k in k_start..k_start + steps {
        let z = view.example(uniform_index(rng, view.len()));
        loss.grad_into(w, z, &mut g);
        linalg::axpy(-schedule.step_size(k, 1), &g, w);
    }
    cost.grads += steps;
}

/// Plain SGD from `w0` for `steps` updates.
pub fn sgd_run(
    loss: &dyn Loss,
    view: View<'_>,
    schedule: &Schedule,
    steps: u64,
    w0: &[f64],
    seed: u64,
    cost: &mut MachineCost,
) -> Vec<f64> {
    assert!(steps >= 1, "SGD needs at least one step");
    let mut w = w0.to_vec();
    sgd_steps(loss, view, schedule, &mut w, &mut rng::from_seed(seed), 0, steps, cost);
    w
}

/// `steps` SGD updates on the subproblem starting from its anchor:
/// `w <- w - α_k (∇f(w, z_k) - G_i + η G + μ (w - anchor))`, with `α_k = schedule(k, round)`.
#[allow(clippy::too_many_arguments)]
pub fn local_solve_sgd(
    sub: &SubproblemSpec,
    loss: &dyn Loss,
    view: View<'_>,
    steps: u64,
    schedule: &Schedule,
    seed: u64,
    round: usize,
    cost: &mut MachineCost,
) -> Vec<f64> {
    assert!(!view.is_empty(), "local solve over an empty view");
    assert_eq!(sub.dim(), view.dim(), "dimension mismatch");
    let mut rng = rng::from_seed(seed);
    let mut w = sub.anchor.clone();
    let mut g = vec![0.0; w.len()];
    for k in 0..steps {
        let z = view.example(uniform_index(&mut rng, view.len()));
        loss.grad_into(&w, z, &mut g);
        sub.shift_direction(&w, &mut g);
        linalg::axpy(-schedule.step_size(k, round), &g, &mut w);
    }
    cost.grads += steps;
    w
}

/// `steps` single-stage SVRG updates on the subproblem with snapshot `w̃ = anchor`:
/// `w <- w - α (∇f(w, z_k) - ∇f(w̃, z_k) + η G + μ (w - w̃))`.
///
/// Two per-sample gradients are charged per step.
#[allow(clippy::too_many_arguments)]
pub fn local_solve_svrg(
    sub: &SubproblemSpec,
    loss: &dyn Loss,
    view: View<'_>,
    steps: u64,
    alpha: f64,
    seed: u64,
    _round: usize,
    cost: &mut MachineCost,
) -> Vec<f64> {
    assert!(!view.is_empty(), "local solve over an empty view");
    assert_eq!(sub.dim(), view.dim(), "dimension mismatch");
    let anchor = &sub.anchor;
    let mut rng = rng::from_seed(seed);
    let mut w = anchor.clone();
    let mut g = vec![0.0; w.len()];
    let mut g_snap = vec![0.0; w.len()];
    for _ in 0..steps {
        let z = view.example(uniform_index(&mut rng, view.len()));
        loss.grad_into(&w, z, &mut g);
        loss.grad_into(anchor, z, &mut g_snap);
        for j in 0..w.len() {
            let dir = (g[j] - g_snap[j]) + sub.eta * sub.global_grad[j] + sub.mu * (w[j] - anchor[j]);
            w[j] -= alpha * dir;
        }
    }
    cost.grads += 2 * steps;
    w
}

/// The direction `local_solve_svrg` uses at `w` for sample `z`.
pub fn svrg_direction(sub: &SubproblemSpec, loss: &dyn Loss, w: &[f64], z: crate::data::Example<'_>) -> Vec<f64> {
    let mut g = vec![0.0; w.len()];
    let mut g_snap = vec![0.0; w.len()];
    loss.grad_into(w, z, &mut g);
    loss.grad_into(&sub.anchor, z, &mut g_snap);
    (0..w.len())
        .map(|j| (g[j] - g_snap[j]) + sub.eta * sub.global_grad[j] + sub.mu * (w[j] - sub.anchor[j]))
        .collect()
}

/// Relabels a single-machine SGD trace as if its gradients were spread evenly over `m`
/// machines at no extra cost.
pub fn ideal_dist_sgd(trace: &Trace, m: usize) -> Trace {
    assert!(m >= 1, "machine count must be positive");
    let mut out = trace.clone();
    for p in &mut out.points {
        p.max_grads_per_machine /= m as f64;
    }
    out
}
