//! Dense matrices, direct LU solves through faer, and restarted GMRES.

use faer::linalg::solvers::Solve;
use faer::traits::ComplexField;
use faer::Mat;
use num_complex::ComplexFloat;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Scalars the solvers work with (`f64` and `Complex64`).
pub trait Scalar:
    ComplexFloat<Real = f64> + ComplexField + Copy + Send + Sync + std::fmt::Debug + std::iter::Sum + 'static
{
    fn from_f64(x: f64) -> Self;
    fn conj_(self) -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn conj_(self) -> Self {
        self
    }
}

impl Scalar for num_complex::Complex64 {
    fn from_f64(x: f64) -> Self {
        num_complex::Complex64::new(x, 0.0)
    }
    fn conj_(self) -> Self {
        self.conj()
    }
}

/// Anything that can compute `y = A x` for a square `A`.
pub trait LinearOperator<T>: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]);
}

/// Row-major dense matrix.
#[derive(Debug, Clone)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::from_f64(0.0); rows * cols],
        }
    }

    /// Fills each row with `fill(row_index, row)`, rows in parallel.
    pub fn from_rows(rows: usize, cols: usize, fill: impl Fn(usize, &mut [T]) + Sync) -> Self {
        let mut m = Self::zeros(rows, cols);
        if cols > 0 {
            m.data
                .par_chunks_mut(cols)
                .enumerate()
                .for_each(|(i, row)| fill(i, row));
        }
        m
    }

    /// Fills `block` consecutive rows at a time with `fill(block_index, rows)`.
    pub fn from_row_blocks(rows: usize, cols: usize, block: usize, fill: impl Fn(usize, &mut [T]) + Sync) -> Self {
        let mut m = Self::zeros(rows, cols);
        if cols > 0 && block > 0 {
            m.data
                .par_chunks_mut(block * cols)
                .enumerate()
                .for_each(|(i, rows)| fill(i, rows));
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::from_f64(0.0); self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.cols);
        assert_eq!(y.len(), self.rows);
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            *yi = self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum();
        });
    }

    fn to_faer(&self) -> Mat<T> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }
}

impl<T: Scalar> LinearOperator<T> for DenseMatrix<T> {
    fn dim(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.matvec_into(x, y)
    }
}

/// Which method produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    DenseLu,
    Gmres,
    Trivial,
}

/// Diagnostics of a linear solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub method: SolverKind,
    pub iterations: usize,
    pub relative_residual: f64,
    pub residual_history: Vec<f64>,
}

impl SolveReport {
    pub fn trivial() -> Self {
        Self {
            method: SolverKind::Trivial,
            iterations: 0,
            relative_residual: 0.0,
            residual_history: Vec::new(),
        }
    }
}

/// Iteration controls for [`gmres`].
#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    pub tolerance: f64,
    pub restart: usize,
    pub max_iterations: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            restart: 60,
            max_iterations: 2000,
        }
    }
}

pub fn norm<T: Scalar>(x: &[T]) -> f64 {
    x.iter().map(|v| v.abs().powi(2)).sum::<f64>().sqrt()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    // conjugate-linear in the first argument
    a.iter().zip(b).map(|(&x, &y)| x.conj_() * y).sum()
}

/// `‖A x − b‖ / ‖b‖` (or the absolute residual when `b = 0`).
pub fn relative_residual<T: Scalar>(op: &dyn LinearOperator<T>, x: &[T], b: &[T]) -> f64 {
    let mut ax = vec![T::from_f64(0.0); b.len()];
    op.apply(x, &mut ax);
    let r: Vec<T> = ax.iter().zip(b).map(|(&p, &q)| p - q).collect();
    let nb = norm(b);
    if nb > 0.0 {
        norm(&r) / nb
    } else {
        norm(&r)
    }
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn lu_solve<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<(Vec<T>, SolveReport)> {
    let n = a.rows();
    if n != a.cols() || n != b.len() {
        return Err(Error::invalid("lu_solve needs a square system"));
    }
    if n == 0 {
        return Ok((Vec::new(), SolveReport::trivial()));
    }
    let lu = a.to_faer().partial_piv_lu();
    let rhs = Mat::from_fn(n, 1, |i, _| b[i]);
    let sol = lu.solve(&rhs);
    let x: Vec<T> = (0..n).map(|i| sol[(i, 0)]).collect();
    if x.iter().any(|v| !v.abs().is_finite()) {
        return Err(Error::SingularSystem("LU produced non-finite values".into()));
    }
    let res = relative_residual(a, &x, b);
    if !(res < 1e-6) {
        return Err(Error::SingularSystem(format!(
            "LU residual {res:.3e} indicates a (near-)singular matrix"
        )));
    }
    Ok((
        x,
        SolveReport {
            method: SolverKind::DenseLu,
            iterations: 1,
            relative_residual: res,
            residual_history: vec![res],
        },
    ))
}

/// Restarted GMRES with modified Gram–Schmidt and Givens rotations.
///
/// Converges when the true relative residual drops below `opts.tolerance`.
pub fn gmres<T: Scalar>(
    op: &dyn LinearOperator<T>,
    b: &[T],
    x0: Option<&[T]>,
    opts: &GmresOptions,
) -> Result<(Vec<T>, SolveReport)> {
    let n = op.dim();
    let zero = T::from_f64(0.0);
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![zero; n]);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((vec![zero; n], SolveReport::trivial()));
    }
    let mut history = Vec::new();
    let mut total = 0;
    let mut ax = vec![zero; n];
    loop {
        op.apply(&x, &mut ax);
        let r: Vec<T> = b.iter().zip(&ax).map(|(&p, &q)| p - q).collect();
        let beta = norm(&r);
        let rel = beta / bnorm;
        history.push(rel);
        if rel < opts.tolerance {
            return Ok((
                x,
                SolveReport {
                    method: SolverKind::Gmres,
                    iterations: total,
                    relative_residual: rel,
                    residual_history: history,
                },
            ));
        }
        if total >= opts.max_iterations || !rel.is_finite() {
            return Err(Error::NotConverged {
                iterations: total,
                residual: rel,
                history,
            });
        }

        let m = opts.restart.min(opts.max_iterations - total).max(1);
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|&v| v * T::from_f64(1.0 / beta)).collect());
        // Hessenberg columns, rotated in place
        let mut h: Vec<Vec<T>> = Vec::with_capacity(m);
        let mut cs: Vec<T> = Vec::with_capacity(m);
        let mut sn: Vec<T> = Vec::with_capacity(m);
        let mut g = vec![zero; m + 1];
        g[0] = T::from_f64(beta);
        let mut steps = 0;
        for j in 0..m {
            let mut w = vec![zero; n];
            op.apply(&basis[j], &mut w);
            let mut col = vec![zero; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(v, &w);
                col[i] = hij;
                for (wk, &vk) in w.iter_mut().zip(v) {
                    *wk = *wk - hij * vk;
                }
            }
            let wnorm = norm(&w);
            col[j + 1] = T::from_f64(wnorm);
            for i in 0..j {
                let t = cs[i].conj_() * col[i] + sn[i].conj_() * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let (c, s) = givens(col[j], col[j + 1]);
            col[j] = c.conj_() * col[j] + s.conj_() * col[j + 1];
            col[j + 1] = zero;
            g[j + 1] = -s * g[j];
            g[j] = c.conj_() * g[j];
            cs.push(c);
            sn.push(s);
            h.push(col);
            steps = j + 1;
            total += 1;
            let est = g[j + 1].abs() / bnorm;
            if est < 0.5 * opts.tolerance || wnorm == 0.0 {
                break;
            }
            basis.push(w.iter().map(|&v| v * T::from_f64(1.0 / wnorm)).collect());
        }
        // back substitution
        let mut y = vec![zero; steps];
        for i in (0..steps).rev() {
            let mut acc = g[i];
            for k in i + 1..steps {
                acc = acc - h[k][i] * y[k];
            }
            y[i] = acc / h[i][i];
        }
        for (k, yk) in y.iter().enumerate() {
            for (xi, &vi) in x.iter_mut().zip(&basis[k]) {
                *xi = *xi + *yk * vi;
            }
        }
    }
}

/// Rotation with `[c s; -s c]^H`-style action zeroing `b` against `a`.
fn givens<T: Scalar>(a: T, b: T) -> (T, T) {
    let na = a.abs();
    let nb = b.abs();
    if nb == 0.0 {
        return (T::from_f64(1.0), T::from_f64(0.0));
    }
    if na == 0.0 {
        return (T::from_f64(0.0), T::from_f64(1.0));
    }
    let r = (na * na + nb * nb).sqrt();
    // c = a/r, s = b/r so that conj(c) a + conj(s) b = r
    (a * T::from_f64(1.0 / r), b * T::from_f64(1.0 / r))
}

/// Dense LU when `n <= dense_limit`, otherwise GMRES on the same matrix.
pub fn solve_dense<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &[T],
    dense_limit: usize,
    opts: &GmresOptions,
) -> Result<(Vec<T>, SolveReport)> {
    if a.rows() <= dense_limit {
        lu_solve(a, b)
    } else {
        gmres(a, b, None, opts)
    }
}
