//! Symmetric eigendecomposition and the small matrix kernels the spectral
//! estimators are built on.

use crate::error::{arg_err, dim_err, Error, Result};
use crate::matrix::Matrix;

/// Sweep cap for the cyclic Jacobi solver.
pub const MAX_JACOBI_SWEEPS: usize = 100;
/// Relative off-diagonal Frobenius mass at which Jacobi stops.
pub const JACOBI_TOL: f64 = 1e-12;

/// Eigenpairs of a symmetric matrix, ordered by descending `|eigenvalue|`.
///
/// Column `j` of `vectors` pairs with `values[j]`. Each column is signed so
/// that its largest-magnitude entry is positive (first such entry on ties).
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEig {
    pub fn rank(&self) -> usize {
        self.values.len()
    }

    /// `U diag(values) Uᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.vectors.rows();
        let mut out = Matrix::zeros(n, n);
        for (j, &lam) in self.values.iter().enumerate() {
            for i in 0..n {
                let ui = self.vectors.get(i, j) * lam;
                if ui == 0.0 {
                    continue;
                }
                let row = out.row_mut(i);
                for (k, o) in row.iter_mut().enumerate() {
                    *o += ui * self.vectors.get(k, j);
                }
            }
        }
        out
    }

    /// Diagonal of `U diag(values) Uᵀ` without forming the full product.
    pub fn reconstruct_diagonal(&self) -> Vec<f64> {
        let n = self.vectors.rows();
        (0..n)
            .map(|i| {
                self.vectors
                    .row(i)
                    .iter()
                    .zip(&self.values)
                    .map(|(u, lam)| u * u * lam)
                    .sum()
            })
            .collect()
    }
}

/// `Y Yᵀ`, symmetrized by averaging with its transpose.
pub fn gram(y: &Matrix) -> Matrix {
    let n = y.rows();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        let yi = y.row(i);
        for j in i..n {
            let v: f64 = yi.iter().zip(y.row(j)).map(|(a, b)| a * b).sum();
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    g
}

pub fn p_diag(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return dim_err(format!("diagonal projection of {}x{} matrix", m.rows(), m.cols()));
    }
    let n = m.rows();
    Ok(Matrix::from_fn(n, n, |i, j| if i == j { m.get(i, i) } else { 0.0 }))
}

pub fn p_offdiag(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return dim_err(format!(
            "off-diagonal projection of {}x{} matrix",
            m.rows(),
            m.cols()
        ));
    }
    let mut out = m.clone();
    for i in 0..m.rows() {
        out.set(i, i, 0.0);
    }
    Ok(out)
}

fn symmetrized(g: &Matrix) -> Result<Matrix> {
    if !g.is_square() {
        return dim_err(format!("eigendecomposition of {}x{} matrix", g.rows(), g.cols()));
    }
    let n = g.rows();
    let scale = 1.0 + g.max_abs();
    let mut out = g.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (g.get(i, j), g.get(j, i));
            if (a - b).abs() > 1e-8 * scale {
                return arg_err(format!("matrix is not symmetric at ({i}, {j}): {a} vs {b}"));
            }
            let avg = 0.5 * (a + b);
            out.set(i, j, avg);
            out.set(j, i, avg);
        }
    }
    Ok(out)
}

/// Cyclic Jacobi on a symmetric matrix. Returns unsorted eigenvalues and the
/// accumulated rotation matrix.
fn jacobi(a: Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    let total = a.frobenius_norm();
    let mut a = a.into_vec();
    // Rows of `vt` are the eigenvectors, so every update touches contiguous memory.
    let mut vt = Matrix::identity(n).into_vec();
    if total == 0.0 || n == 1 {
        return Ok(((0..n).map(|i| a[i * n + i]).collect(), Matrix::identity(n)));
    }
    let target = JACOBI_TOL * total;
    let off_norm = |a: &[f64]| -> f64 {
        let mut off = 0.0;
        for p in 0..n {
            for &x in &a[p * n + p + 1..(p + 1) * n] {
                off += 2.0 * x * x;
            }
        }
        off.sqrt()
    };
    let mut converged = false;
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        if off_norm(&a) < target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, n, p, q, c, s);
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                rotate_rows(&mut vt, n, p, q, c, s);
            }
        }
    }
    if !converged {
        let off = off_norm(&a);
        if off >= target {
            return Err(Error::Numeric(format!(
                "Jacobi did not converge in {MAX_JACOBI_SWEEPS} sweeps (off-diagonal mass {off})"
            )));
        }
    }
    let values = (0..n).map(|i| a[i * n + i]).collect();
    let vt = Matrix::from_vec(n, n, vt)?;
    Ok((values, vt.transpose()))
}

/// Two-sided rotation of the symmetric matrix `a` in the (p, q) plane. The
/// entries at (p, p), (q, q), (p, q) and (q, p) are left stale for the caller.
#[inline]
fn rotate(a: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = a.split_at_mut(q * n);
    let row_p = &mut lo[p * n..(p + 1) * n];
    let row_q = &mut hi[..n];
    for (x, y) in row_p.iter_mut().zip(row_q.iter_mut()) {
        let (apk, aqk) = (*x, *y);
        *x = c * apk - s * aqk;
        *y = s * apk + c * aqk;
    }
    for k in 0..n {
        a[k * n + p] = a[p * n + k];
        a[k * n + q] = a[q * n + k];
    }
}

#[inline]
fn rotate_rows(vt: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = vt.split_at_mut(q * n);
    let row_p = &mut lo[p * n..(p + 1) * n];
    let row_q = &mut hi[..n];
    for (vp, vq) in row_p.iter_mut().zip(row_q.iter_mut()) {
        let (x, y) = (*vp, *vq);
        *vp = c * x - s * y;
        *vq = s * x + c * y;
    }
}

fn fix_sign(vectors: &mut Matrix, col: usize) {
    let n = vectors.rows();
    let mut best = 0;
    let mut best_abs = -1.0;
    for i in 0..n {
        let a = vectors.get(i, col).abs();
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    if vectors.get(best, col) < 0.0 {
        for i in 0..n {
            vectors.set(i, col, -vectors.get(i, col));
        }
    }
}

/// Full eigendecomposition, sorted by descending `|eigenvalue|`.
pub fn sym_eig(g: &Matrix) -> Result<SymEig> {
    if g.rows() == 0 {
        return Ok(SymEig {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }
    sym_eig_top(g, g.rows())
}

/// Leading `r` eigenpairs by `|eigenvalue|` (ties: larger signed value first).
pub fn sym_eig_top(g: &Matrix, r: usize) -> Result<SymEig> {
    check_rank(g, r)?;
    let (vals, vecs) = jacobi(symmetrized(g)?)?;
    Ok(top_pairs(&vals, &vecs, r))
}

/// [`sym_eig_top`] with Jacobi started from the orthogonal matrix `start`,
/// i.e. run on `startᵀ G start`. Cheap when `start` nearly diagonalizes `g`.
/// Also returns the full unsorted rotation so it can seed the next call.
pub(crate) fn sym_eig_top_warm(g: &Matrix, r: usize, start: &Matrix) -> Result<(SymEig, Matrix)> {
    check_rank(g, r)?;
    let a = symmetrized(g)?;
    let rotated = start.t_matmul(&a.matmul(start)?)?;
    let (vals, w) = jacobi(symmetrized_unchecked(&rotated))?;
    let vecs = start.matmul(&w)?;
    Ok((top_pairs(&vals, &vecs, r), vecs))
}

/// Cold-start variant of [`sym_eig_top_warm`].
pub(crate) fn sym_eig_top_full(g: &Matrix, r: usize) -> Result<(SymEig, Matrix)> {
    check_rank(g, r)?;
    let (vals, vecs) = jacobi(symmetrized(g)?)?;
    Ok((top_pairs(&vals, &vecs, r), vecs))
}

fn check_rank(g: &Matrix, r: usize) -> Result<()> {
    let n = g.rows();
    if r == 0 || r > n {
        return arg_err(format!("requested {r} eigenpairs of a {n}x{n} matrix"));
    }
    Ok(())
}

fn symmetrized_unchecked(a: &Matrix) -> Matrix {
    let n = a.rows();
    Matrix::from_fn(n, n, |i, j| 0.5 * (a.get(i, j) + a.get(j, i)))
}

fn top_pairs(vals: &[f64], vecs: &Matrix, r: usize) -> SymEig {
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        vals[j]
            .abs()
            .total_cmp(&vals[i].abs())
            .then(vals[j].total_cmp(&vals[i]))
            .then(i.cmp(&j))
    });
    order.truncate(r);
    let values = order.iter().map(|&i| vals[i]).collect();
    let mut vectors = Matrix::from_fn(n, r, |i, j| vecs.get(i, order[j]));
    for col in 0..r {
        fix_sign(&mut vectors, col);
    }
    SymEig { values, vectors }
}

/// `|eigenvalues|` of a symmetric matrix in descending order. These are the
/// singular values of `g`.
pub fn abs_spectrum(g: &Matrix) -> Result<Vec<f64>> {
    Ok(sym_eig(g)?.values.iter().map(|v| v.abs()).collect())
}

/// Singular values of `y`, descending, computed as square roots of the
/// eigenvalues of the smaller Gram matrix.
pub fn singular_values(y: &Matrix) -> Result<Vec<f64>> {
    let g = if y.rows() <= y.cols() {
        gram(y)
    } else {
        gram(&y.transpose())
    };
    if g.rows() == 0 {
        return Ok(Vec::new());
    }
    let eig = sym_eig(&g)?;
    let mut sv: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Left projection `U (Uᵀ A)`.
pub fn project(u: &Matrix, a: &Matrix) -> Result<Matrix> {
    if u.rows() != a.rows() {
        return dim_err(format!(
            "cannot project {}x{} onto a basis with {} rows",
            a.rows(),
            a.cols(),
            u.rows()
        ));
    }
    u.matmul(&u.t_matmul(a)?)
}

/// Orthonormality defect `max |UᵀU − I|`.
pub fn orthonormality_error(u: &Matrix) -> f64 {
    let utu = u.t_matmul(u).expect("square by construction");
    utu.sub(&Matrix::identity(u.cols()))
        .expect("same shape")
        .max_abs()
}

/// Sine of the largest principal angle between the column spans of two
/// orthonormal bases, `‖U Uᵀ − V Vᵀ‖_2` evaluated via the projector gap.
pub fn subspace_distance(u: &Matrix, v: &Matrix) -> Result<f64> {
    let pu = u.matmul(&u.transpose())?;
    let pv = v.matmul(&v.transpose())?;
    let diff = pu.sub(&pv)?;
    Ok(abs_spectrum(&diff)?.first().copied().unwrap_or(0.0))
}
