//! Dense complex vectors and matrices, and the restricted least-squares
//! solve every recovery algorithm is built on.
//!
//! Conventions used throughout the crate:
//!
//! * matrices are stored column-major, so a dictionary column `a_j` is a
//!   contiguous slice;
//! * the inner product is conjugate-linear in its first argument,
//!   `<u, v> = sum_i conj(u_i) v_i`, so `<a_j, r>` is the `j`-th entry of
//!   `A* r`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// A dense complex vector.
pub type CVector = Vec<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);

/// `<u, v> = sum_i conj(u_i) v_i`.
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    debug_assert_eq!(u.len(), v.len());
    // four independent accumulators keep the reduction off one dependency chain
    let mut re = [0.0; 4];
    let mut im = [0.0; 4];
    let (uc, ur) = (u.chunks_exact(4), u.chunks_exact(4).remainder());
    let (vc, vr) = (v.chunks_exact(4), v.chunks_exact(4).remainder());
    for (a4, b4) in uc.zip(vc) {
        for k in 0..4 {
            re[k] += a4[k].re * b4[k].re + a4[k].im * b4[k].im;
            im[k] += a4[k].re * b4[k].im - a4[k].im * b4[k].re;
        }
    }
    for (a, b) in ur.iter().zip(vr) {
        re[0] += a.re * b.re + a.im * b.im;
        im[0] += a.re * b.im - a.im * b.re;
    }
    C64::new((re[0] + re[1]) + (re[2] + re[3]), (im[0] + im[1]) + (im[2] + im[3]))
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    norm_sqr(v).sqrt()
}

pub fn sub(a: &[C64], b: &[C64]) -> CVector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(v: &mut [C64], s: f64) {
    for z in v {
        *z *= s;
    }
}

/// Complex `N x M` matrix in column-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { C64::new(1.0, 0.0) } else { ZERO })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from column-major storage.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "from_col_major",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_columns(rows: usize, columns: &[CVector]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    op: "from_columns",
                    expected: rows,
                    found: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Ok(Self {
            rows,
            cols: columns.len(),
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_norm(&self, j: usize) -> f64 {
        norm(self.col(j))
    }

    /// `A x`.
    pub fn matvec(&self, x: &[C64]) -> Result<CVector> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "matvec",
                expected: self.cols,
                found: x.len(),
            });
        }
        let mut y = vec![ZERO; self.rows];
        let nz: Vec<usize> = (0..self.cols).filter(|&j| x[j] != ZERO).collect();
        let quads = nz.chunks_exact(4);
        for &j in quads.remainder() {
            axpy(x[j], self.col(j), &mut y);
        }
        for q in quads {
            let (c0, c1, c2, c3) = (self.col(q[0]), self.col(q[1]), self.col(q[2]), self.col(q[3]));
            let (x0, x1, x2, x3) = (x[q[0]], x[q[1]], x[q[2]], x[q[3]]);
            for i in 0..self.rows {
                y[i] += (x0 * c0[i] + x1 * c1[i]) + (x2 * c2[i] + x3 * c3[i]);
            }
        }
        Ok(y)
    }

    /// `A_S c` for coefficients `c` on the columns listed in `support`.
    pub fn combine(&self, support: &[usize], coeffs: &[C64]) -> CVector {
        let mut y = vec![ZERO; self.rows];
        for (&j, &c) in support.iter().zip(coeffs) {
            axpy(c, self.col(j), &mut y);
        }
        y
    }

    /// `A* r`: entry `j` is `<a_j, r>`.
    pub fn adjoint_apply(&self, r: &[C64]) -> Result<CVector> {
        if r.len() != self.rows {
            return Err(Error::DimensionMismatch {
                op: "adjoint_apply",
                expected: self.rows,
                found: r.len(),
            });
        }
        Ok((0..self.cols).map(|j| inner(self.col(j), r)).collect())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if other.rows != self.cols {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, b) in other.col(j).iter().enumerate() {
                if *b != ZERO {
                    axpy(*b, self.col(k), dst);
                }
            }
        }
        Ok(out)
    }

    /// `A A*` as an `N x N` matrix.
    pub fn gram_rows(&self) -> CMatrix {
        let n = self.rows;
        let mut g = CMatrix::zeros(n, n);
        for j in 0..self.cols {
            let c = self.col(j);
            for q in 0..n {
                let cq = c[q].conj();
                if cq == ZERO {
                    continue;
                }
                let dst = &mut g.data[q * n..(q + 1) * n];
                for (d, cp) in dst.iter_mut().zip(c) {
                    *d += cp * cq;
                }
            }
        }
        g
    }

    pub fn select_columns(&self, idx: &[usize]) -> CMatrix {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        CMatrix {
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_column_slice(self.rows, self.cols, &self.data)
    }
}

/// Output of [`restricted_least_squares`]. `coefficients[i]` belongs to
/// column `support[i]` of the input support.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: CVector,
    pub residual: CVector,
    pub residual_norm: f64,
    pub rank: usize,
}

/// Minimizes `||A z - b||_2` over `z` supported on `support`.
///
/// Householder QR with column pivoting; columns whose remaining norm falls
/// below `max(rows, k) * eps * max_col_norm` are treated as dependent, and
/// the minimum-norm minimizer is returned in that case. An empty support
/// yields `z = 0` and `residual = b`.
pub fn restricted_least_squares(a: &CMatrix, b: &[C64], support: &[usize]) -> Result<LeastSquares> {
    let n = a.rows();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            op: "restricted_least_squares",
            expected: n,
            found: b.len(),
        });
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= a.cols()) {
        return Err(Error::param("support", format!("index {bad} out of range for {} columns", a.cols())));
    }
    let k = support.len();
    if k == 0 {
        return Ok(LeastSquares {
            coefficients: Vec::new(),
            residual: b.to_vec(),
            residual_norm: norm(b),
            rank: 0,
        });
    }

    let mut w: Vec<CVector> = support.iter().map(|&j| a.col(j).to_vec()).collect();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut qtb = b.to_vec();
    let max_col = w.iter().map(|c| norm(c)).fold(0.0, f64::max);
    let tol = n.max(k) as f64 * f64::EPSILON * max_col;

    let mut rank = 0;
    for step in 0..n.min(k) {
        let (p, pnorm) = (step..k)
            .map(|c| (c, norm(&w[c][step..])))
            .fold((step, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pnorm <= tol {
            break;
        }
        w.swap(step, p);
        perm.swap(step, p);

        let x0 = w[step][step];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { C64::new(1.0, 0.0) };
        let alpha = -phase * pnorm;
        let mut v: CVector = w[step][step..].to_vec();
        v[0] -= alpha;
        let vv = norm_sqr(&v);
        if vv > 0.0 {
            let reflect = |y: &mut [C64]| {
                let f = inner(&v, y) * (2.0 / vv);
                axpy(-f, &v, y);
            };
            for col in w.iter_mut().skip(step + 1) {
                reflect(&mut col[step..]);
            }
            reflect(&mut qtb[step..]);
        }
        w[step][step] = alpha;
        for z in &mut w[step][step + 1..] {
            *z = ZERO;
        }
        rank += 1;
    }

    // R[i][c] = w[c][i] for i <= c < k.
    let mut y = vec![ZERO; k];
    if rank == k {
        for i in (0..k).rev() {
            let mut acc = qtb[i];
            for c in i + 1..k {
                acc -= w[c][i] * y[c];
            }
            y[i] = acc / w[i][i];
        }
    } else if rank > 0 {
        // Minimum-norm solution of the full-row-rank system T y = c with
        // T = [R11 R12]: y = T* (T T*)^{-1} c.
        let t = DMatrix::<C64>::from_fn(rank, k, |i, c| if i <= c { w[c][i] } else { ZERO });
        let gram = &t * t.adjoint();
        let rhs = DVector::from_column_slice(&qtb[..rank]);
        let g = gram
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&rhs))
            .or_else(|| gram.lu().solve(&rhs))
            .ok_or_else(|| Error::Infeasible("singular reduced system in least squares".into()))?;
        let sol = t.adjoint() * g;
        y.copy_from_slice(sol.as_slice());
    }

    let mut coefficients = vec![ZERO; k];
    for (c, &orig) in perm.iter().enumerate() {
        coefficients[orig] = y[c];
    }
    let fit = a.combine(support, &coefficients);
    let residual = sub(b, &fit);
    let residual_norm = norm(&residual);
    Ok(LeastSquares {
        coefficients,
        residual,
        residual_norm,
        rank,
    })
}

/// Orthonormal basis of the span of a set of columns, used to score
/// single-column extensions of a fixed support without refactoring.
#[derive(Debug, Clone)]
pub struct Projector {
    basis: Vec<CVector>,
}

impl Projector {
    /// Gram-Schmidt with one reorthogonalization pass. Columns numerically
    /// inside the span of earlier ones are dropped.
    pub fn new<'a>(columns: impl IntoIterator<Item = &'a [C64]>) -> Self {
        let mut p = Projector { basis: Vec::new() };
        for c in columns {
            let cn = norm(c);
            let q = p.project_out(c);
            let qn = norm(&q);
            if qn > 1e-12 * cn.max(f64::MIN_POSITIVE) {
                p.basis.push(q.into_iter().map(|z| z / qn).collect());
            }
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `v - Q Q* v`, applied twice.
    pub fn project_out(&self, v: &[C64]) -> CVector {
        let mut r = v.to_vec();
        for _ in 0..2 {
            for q in &self.basis {
                let c = inner(q, &r);
                axpy(-c, q, &mut r);
            }
        }
        r
    }
}
