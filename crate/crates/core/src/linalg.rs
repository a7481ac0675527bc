//! Small dense vector kernels plus the symmetric positive-definite solvers.
//!
//! Loops are written out sequentially so that floating-point results depend only on
//! the inputs, never on vector width or thread count.

use nalgebra::{DMatrix, DVector};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Coordinate-wise mean of equally sized vectors.
///
/// Sums by a balanced binary tree over the input order and then divides, so the result
/// is fixed by the input order alone. For a power-of-two count of identical inputs the
/// mean is exactly the input.
pub fn tree_mean(vectors: &[Vec<f64>]) -> Vec<f64> {
    assert!(!vectors.is_empty(), "mean of zero vectors");
    let mut total = tree_sum(vectors);
    let m = vectors.len() as f64;
    for v in &mut total {
        *v /= m;
    }
    total
}

fn tree_sum(vectors: &[Vec<f64>]) -> Vec<f64> {
    match vectors.len() {
        1 => vectors[0].clone(),
        len => {
            let (left, right) = vectors.split_at(len / 2);
            let mut l = tree_sum(left);
            let r = tree_sum(right);
            for (a, b) in l.iter_mut().zip(&r) {
                *a += b;
            }
            l
        }
    }
}

/// Problems above this dimension use conjugate gradients instead of a Cholesky factor.
pub const DENSE_SOLVE_MAX_DIM: usize = 2000;

/// Relative residual targeted by the iterative solver.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// A prepared solver for `A x = b` with symmetric positive-definite `A`.
#[derive(Debug, Clone)]
pub enum SpdSolver {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    ConjugateGradient(DMatrix<f64>),
}

impl SpdSolver {
    /// Returns `None` when `a` is not numerically positive definite.
    pub fn new(a: DMatrix<f64>) -> Option<Self> {
        if a.nrows() <= DENSE_SOLVE_MAX_DIM {
            let chol = a.cholesky()?;
            // a factor with a vanishing pivot is useless even if it exists
            let diag = chol.l_dirty().diagonal();
            let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if !(lo > 0.0) || lo / hi < 1e-12 {
                return None;
            }
            Some(SpdSolver::Cholesky(chol))
        } else {
            if (0..a.nrows()).any(|i| !(a[(i, i)] > 0.0)) {
                return None;
            }
            Some(SpdSolver::ConjugateGradient(a))
        }
    }

    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        match self {
            SpdSolver::Cholesky(chol) => {
                let x = chol.solve(&DVector::from_column_slice(b));
                Some(x.as_slice().to_vec())
            }
            SpdSolver::ConjugateGradient(a) => {
                conjugate_gradient(|v, out| matvec(a, v, out), b, SOLVE_TOLERANCE, 10 * b.len() + 100)
            }
        }
    }
}

pub fn matvec(a: &DMatrix<f64>, v: &[f64], out: &mut [f64]) {
    let x = DVector::from_column_slice(v);
    let y = a * x;
    out.copy_from_slice(y.as_slice());
}

/// Conjugate gradients for SPD systems given as a matrix-vector product.
///
/// Stops when `||b - A x|| <= tol * ||b||`; returns `None` on breakdown (non-positive
/// curvature) or if the iteration limit is reached.
pub fn conjugate_gradient<F>(apply: F, b: &[f64], tol: f64, max_iter: usize) -> Option<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Some(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * b_norm {
            return Some(x);
        }
        apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return None;
        }
        let step = rr / curvature;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_next;
    }
    (rr.sqrt() <= tol * b_norm).then_some(x)
}
