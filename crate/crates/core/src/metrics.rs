//! Ground-truth optimum, suboptimality, population error and target-crossing summaries.
//!
//! The risk of a ridge model is a quadratic in `w`, so a data set enters evaluation only
//! through its second moments `(E[x xᵀ], E[y x], E[y²])`. Evaluating a trace point is then
//! `O(d²)` regardless of the number of examples, and the holdout set never has to be
//! kept in memory.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, SyntheticSpec, View};
use crate::error::{Error, Result};
use crate::linalg::{self, SpdSolver};
use crate::objective::{mean_grad, Loss, RidgeLoss};
use crate::rng::{self, Purpose};
use crate::trace::{Trace, SUBOPT_FLOOR};

/// Default number of held-out examples used for population error.
pub const DEFAULT_HOLDOUT_SIZE: usize = 100_000;

/// Target log10 suboptimality used to compare runs.
pub const DEFAULT_TARGET_LOG10: f64 = -2.5;

const CHUNK_ROWS: usize = 1024;

/// Second moments of a set of examples.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentStats {
    pub size: usize,
    /// Mean of `x xᵀ`.
    pub xx: DMatrix<f64>,
    /// Mean of `y x`.
    pub xy: DVector<f64>,
    /// Mean of `y²`.
    pub yy: f64,
}

struct MomentAccumulator {
    d: usize,
    size: usize,
    xx: DMatrix<f64>,
    xy: DVector<f64>,
    yy: f64,
    rows: Vec<f64>,
    ys: Vec<f64>,
}

impl MomentAccumulator {
    fn new(d: usize) -> Self {
        MomentAccumulator {
            d,
            size: 0,
            xx: DMatrix::zeros(d, d),
            xy: DVector::zeros(d),
            yy: 0.0,
            rows: Vec::with_capacity(CHUNK_ROWS * d),
            ys: Vec::with_capacity(CHUNK_ROWS),
        }
    }

    fn push(&mut self, x: &[f64], y: f64) {
        self.rows.extend_from_slice(x);
        self.ys.push(y);
        if self.ys.len() == CHUNK_ROWS {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.ys.is_empty() {
            return;
        }
        let x = DMatrix::from_row_slice(self.ys.len(), self.d, &self.rows);
        let y = DVector::from_column_slice(&self.ys);
        // gemm on an explicit transpose is much faster than gemm_tr
        self.xx.gemm(1.0, &x.transpose(), &x, 1.0);
        self.xy.gemv_tr(1.0, &x, &y, 1.0);
        self.yy += linalg::dot(&self.ys, &self.ys);
        self.size += self.ys.len();
        self.rows.clear();
        self.ys.clear();
    }

    fn finish(mut self) -> MomentStats {
        self.flush();
        let n = self.size as f64;
        MomentStats {
            size: self.size,
            xx: self.xx / n,
            xy: self.xy / n,
            yy: self.yy / n,
        }
    }
}

impl MomentStats {
    pub fn from_view(view: View<'_>) -> Self {
        assert!(!view.is_empty(), "moments of an empty view");
        let mut acc = MomentAccumulator::new(view.dim());
        for z in view.iter() {
            acc.push(z.x, z.y);
        }
        acc.finish()
    }

    /// Moments of `size` fresh draws from the model, using the holdout stream of `spec.seed`.
    pub fn sample_holdout(spec: &SyntheticSpec, size: usize) -> Result<Self> {
        spec.validate()?;
        if size == 0 {
            return Err(Error::config("holdout_size", "must be at least 1"));
        }
        let mut rng = rng::stream(spec.seed, Purpose::Holdout, 0, 0);
        let std = spec.feature_std();
        let mut acc = MomentAccumulator::new(spec.d);
        let mut x = vec![0.0; spec.d];
        for _ in 0..size {
            let y = spec.draw_into(&mut rng, &std, &mut x);
            acc.push(&x, y);
        }
        Ok(acc.finish())
    }

    pub fn dim(&self) -> usize {
        self.xy.len()
    }

    /// Mean ridge loss `wᵀ E[xxᵀ] w - 2 E[yx]ᵀ w + E[y²] + reg ||w||²`.
    pub fn mean_loss(&self, loss: &RidgeLoss, w: &[f64]) -> f64 {
        let wv = DVector::from_column_slice(w);
        let quad = wv.dot(&(&self.xx * &wv));
        quad - 2.0 * self.xy.dot(&wv) + self.yy + loss.reg * linalg::dot(w, w)
    }
}

/// Everything needed to score an iterate.
#[derive(Debug, Clone)]
pub struct EvalContext {
    pub loss: RidgeLoss,
    /// Empirical risk minimizer on the training data.
    pub w_opt: Vec<f64>,
    /// `φ(w_opt)`.
    pub f_opt: f64,
    pub train: MomentStats,
    pub holdout: MomentStats,
}

impl EvalContext {
    pub fn new(dataset: &Dataset, loss: RidgeLoss, holdout: MomentStats) -> Result<Self> {
        if holdout.dim() != dataset.dim() {
            return Err(Error::config("holdout", "dimension differs from the training data"));
        }
        let (w_opt, f_opt) = solve_optimum(dataset, &loss)?;
        Ok(EvalContext {
            loss,
            w_opt,
            f_opt,
            train: MomentStats::from_view(dataset.view()),
            holdout,
        })
    }

    /// Builds the context with a fresh holdout drawn from `spec`.
    pub fn for_synthetic(dataset: &Dataset, loss: RidgeLoss, spec: &SyntheticSpec, holdout_size: usize) -> Result<Self> {
        EvalContext::new(dataset, loss, MomentStats::sample_holdout(spec, holdout_size)?)
    }

    pub fn train_risk(&self, w: &[f64]) -> f64 {
        self.train.mean_loss(&self.loss, w)
    }
}

/// Solves the ridge normal equations `((2/N) XᵀX + 2 reg I) w = (2/N) Xᵀy`.
///
/// Returns `(w_opt, φ(w_opt))`.
pub fn solve_optimum(dataset: &Dataset, loss: &RidgeLoss) -> Result<(Vec<f64>, f64)> {
    let view = dataset.view();
    let h = loss.hessian(view).expect("ridge loss is quadratic");
    let rhs: Vec<f64> = mean_grad(loss, &vec![0.0; dataset.dim()], view).iter().map(|g| -g).collect();
    let singular = || Error::numerical(0, None, "normal equations are singular; increase reg");
    let solver = SpdSolver::new(h.clone()).ok_or_else(singular)?;
    let mut w = solver.solve(&rhs).ok_or_else(singular)?;
    // one round of iterative refinement
    let mut hw = vec![0.0; w.len()];
    linalg::matvec(&h, &w, &mut hw);
    let resid = linalg::sub(&rhs, &hw);
    let correction = solver.solve(&resid).ok_or_else(singular)?;
    linalg::axpy(1.0, &correction, &mut w);

    linalg::matvec(&h, &w, &mut hw);
    let rel = linalg::norm(&linalg::sub(&rhs, &hw)) / linalg::norm(&rhs).max(f64::MIN_POSITIVE);
    if rel > 1e-10 {
        return Err(Error::numerical(0, None, format!("normal-equation residual {rel:e} exceeds 1e-10")));
    }
    let f_opt = crate::objective::empirical_risk(loss, &w, view);
    Ok((w, f_opt))
}

/// `φ(w) - φ(w_opt)`, evaluated as `(w - w_opt)ᵀ (E[xxᵀ] + reg I) (w - w_opt)`, which is
/// exact for the quadratic risk and keeps full relative precision near the optimum.
pub fn suboptimality(w: &[f64], ctx: &EvalContext) -> f64 {
    let diff = DVector::from_column_slice(&linalg::sub(w, &ctx.w_opt));
    diff.dot(&(&ctx.train.xx * &diff)) + ctx.loss.reg * diff.norm_squared()
}

pub fn log10_of_subopt(subopt: f64) -> f64 {
    subopt.max(SUBOPT_FLOOR).log10()
}

pub fn log10_suboptimality(w: &[f64], ctx: &EvalContext) -> f64 {
    log10_of_subopt(suboptimality(w, ctx))
}

/// Mean per-sample loss on the holdout set.
pub fn population_error(w: &[f64], ctx: &EvalContext) -> f64 {
    ctx.holdout.mean_loss(&ctx.loss, w)
}

/// First round whose log10 suboptimality is at or below `target_log10`.
pub fn rounds_to_target(trace: &Trace, target_log10: f64) -> Option<usize> {
    assert!(!trace.points.is_empty(), "empty trace");
    trace.points.iter().find(|p| p.log10_subopt <= target_log10).map(|p| p.round)
}

/// Per-machine gradient count at the first point reaching `target_log10`.
pub fn grads_to_target(trace: &Trace, target_log10: f64) -> Option<f64> {
    trace
        .points
        .iter()
        .find(|p| p.log10_subopt <= target_log10)
        .map(|p| p.max_grads_per_machine)
}
