//! Small dense row-major matrices and the factored solves the decomposition
//! needs: Householder QR with column pivoting, least squares, LU, and
//! one-sided Jacobi row orthogonalization.
//!
//! Everything here targets the panel sizes this crate works with (hundreds of
//! periods, tens of securities), so the implementations favor clarity and
//! numerical robustness over blocking or parallelism.

use crate::Error;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    /// Builds a matrix from row vectors. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "matrix needs at least one row");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Mat {
            data,
            rows: rows.len(),
            cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self * p` for a column vector `p`.
    pub fn matvec(&self, p: &[f64]) -> Vec<f64> {
        assert_eq!(p.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), p)).collect()
    }

    /// Gram matrix `selfᵀ · self` (cols × cols).
    pub fn gram(&self) -> Mat {
        let n = self.cols;
        let mut g = Mat::zeros(n, n);
        for i in 0..self.rows {
            let r = self.row(i);
            for j in 0..n {
                for k in j..n {
                    let v = g.get(j, k) + r[j] * r[k];
                    g.set(j, k, v);
                }
            }
        }
        for j in 0..n {
            for k in 0..j {
                g.set(j, k, g.get(k, j));
            }
        }
        g
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn truncate_rows(&mut self, new_rows: usize) {
        assert!(new_rows <= self.rows);
        self.data.truncate(new_rows * self.cols);
        self.rows = new_rows;
    }

    /// Reorders columns so that column `j` of the result is column
    /// `perm[j]` of `self`.
    pub fn select_cols(&self, perm: &[usize]) -> Mat {
        let mut out = Mat::zeros(self.rows, perm.len());
        for i in 0..self.rows {
            for (jj, &j) in perm.iter().enumerate() {
                out.set(i, jj, self.get(i, j));
            }
        }
        out
    }

    pub fn select_rows(&self, idx: &[usize]) -> Mat {
        let mut out = Mat::zeros(idx.len(), self.cols);
        for (ii, &i) in idx.iter().enumerate() {
            out.row_mut(ii).copy_from_slice(self.row(i));
        }
        out
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Result of a column-pivoted QR factorization: `A(:, perm) = Q · r`.
/// Only the upper-triangular factor and the permutation are kept.
pub struct PivotedQr {
    /// min(rows, cols) × cols upper triangular factor.
    pub r: Mat,
    /// `perm[k]` is the original index of pivot column `k`.
    pub perm: Vec<usize>,
}

/// Householder QR with column pivoting. The pivot at each step is the
/// remaining column of largest norm; ties go to the lowest index.
pub fn qr_pivot(a: &Mat) -> PivotedQr {
    let m = a.rows();
    let n = a.cols();
    let steps = m.min(n);
    let mut w = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..steps {
        // Recompute trailing column norms each step; cheap at our sizes and
        // immune to the cancellation that norm downdating suffers.
        let mut best = k;
        let mut best_norm = trailing_norm_sq(&w, k, k);
        for j in k + 1..n {
            let nj = trailing_norm_sq(&w, k, j);
            if nj > best_norm {
                best = j;
                best_norm = nj;
            }
        }
        if best != k {
            swap_cols(&mut w, k, best);
            perm.swap(k, best);
        }

        // Householder vector for column k below the diagonal.
        let x0 = w.get(k, k);
        let sigma = best_norm.sqrt();
        if sigma == 0.0 {
            continue;
        }
        let alpha = if x0 >= 0.0 { -sigma } else { sigma };
        let mut v: Vec<f64> = (k..m).map(|i| w.get(i, k)).collect();
        v[0] -= alpha;
        let vtv = dot(&v, &v);
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        for j in k..n {
            let mut s = 0.0;
            for (ii, i) in (k..m).enumerate() {
                s += v[ii] * w.get(i, j);
            }
            s *= beta;
            for (ii, i) in (k..m).enumerate() {
                let val = w.get(i, j) - s * v[ii];
                w.set(i, j, val);
            }
        }
        w.set(k, k, alpha);
        for i in k + 1..m {
            w.set(i, k, 0.0);
        }
    }

    let mut r = Mat::zeros(steps, n);
    for i in 0..steps {
        for j in 0..n {
            r.set(i, j, if i <= j { w.get(i, j) } else { 0.0 });
        }
    }
    PivotedQr { r, perm }
}

fn trailing_norm_sq(w: &Mat, from_row: usize, j: usize) -> f64 {
    (from_row..w.rows()).map(|i| w.get(i, j).powi(2)).sum()
}

fn swap_cols(w: &mut Mat, a: usize, b: usize) {
    for i in 0..w.rows() {
        let t = w.get(i, a);
        w.set(i, a, w.get(i, b));
        w.set(i, b, t);
    }
}

/// Least-squares solution of `A x ≈ b` for a tall full-column-rank `A`
/// via Householder QR. Returns the solution together with the residual
/// norm `‖A x − b‖`.
pub fn lstsq(a: &Mat, b: &[f64]) -> Result<(Vec<f64>, f64), Error> {
    let m = a.rows();
    let n = a.cols();
    assert_eq!(b.len(), m);
    assert!(m >= n, "lstsq expects a tall system");
    let mut w = a.clone();
    let mut rhs = b.to_vec();

    for k in 0..n {
        let sigma = trailing_norm_sq(&w, k, k).sqrt();
        if sigma == 0.0 {
            return Err(Error::Numerical(
                "rank-deficient least-squares system".into(),
            ));
        }
        let x0 = w.get(k, k);
        let alpha = if x0 >= 0.0 { -sigma } else { sigma };
        let mut v: Vec<f64> = (k..m).map(|i| w.get(i, k)).collect();
        v[0] -= alpha;
        let vtv = dot(&v, &v);
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        for j in k..n {
            let mut s = 0.0;
            for (ii, i) in (k..m).enumerate() {
                s += v[ii] * w.get(i, j);
            }
            s *= beta;
            for (ii, i) in (k..m).enumerate() {
                let val = w.get(i, j) - s * v[ii];
                w.set(i, j, val);
            }
        }
        w.set(k, k, alpha);
        let mut s = 0.0;
        for (ii, i) in (k..m).enumerate() {
            s += v[ii] * rhs[i];
        }
        s *= beta;
        for (ii, i) in (k..m).enumerate() {
            rhs[i] -= s * v[ii];
        }
    }

    // Back substitution on the leading n×n triangle.
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in k + 1..n {
            s -= w.get(k, j) * x[j];
        }
        let d = w.get(k, k);
        if d == 0.0 {
            return Err(Error::Numerical(
                "zero pivot in least-squares back substitution".into(),
            ));
        }
        x[k] = s / d;
    }
    let resid = (n..m).map(|i| rhs[i] * rhs[i]).sum::<f64>().sqrt();
    Ok((x, resid))
}

/// Solves the square system `A x = b` by LU with partial pivoting.
/// Fails on a pivot smaller than `pivot_tol` times the matrix scale.
pub fn lu_solve(a: &Mat, b: &[f64], pivot_tol: f64) -> Result<Vec<f64>, Error> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    assert_eq!(b.len(), n);
    let mut w = a.clone();
    let mut x = b.to_vec();
    let scale = w.frobenius().max(f64::MIN_POSITIVE);

    for k in 0..n {
        let mut piv = k;
        let mut piv_abs = w.get(k, k).abs();
        for i in k + 1..n {
            let v = w.get(i, k).abs();
            if v > piv_abs {
                piv = i;
                piv_abs = v;
            }
        }
        if piv_abs <= pivot_tol * scale {
            return Err(Error::Numerical("singular linear system".into()));
        }
        if piv != k {
            for j in 0..n {
                let t = w.get(k, j);
                w.set(k, j, w.get(piv, j));
                w.set(piv, j, t);
            }
            x.swap(k, piv);
        }
        let d = w.get(k, k);
        for i in k + 1..n {
            let f = w.get(i, k) / d;
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                let v = w.get(i, j) - f * w.get(k, j);
                w.set(i, j, v);
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in k + 1..n {
            s -= w.get(k, j) * x[j];
        }
        x[k] = s / w.get(k, k);
    }
    Ok(x)
}

/// One-sided Jacobi orthogonalization of the rows of `a[row_from..]`.
///
/// On return the selected rows are pairwise orthogonal and sorted by
/// non-increasing norm; the transformation is a pure left rotation, so the
/// column Gram matrix of the block is unchanged. This replaces the block
/// with `Σ Vᵀ` of its singular value decomposition (rows determined up to
/// sign, as principal directions are).
pub fn orthogonalize_rows(a: &mut Mat, row_from: usize) {
    let m = a.rows();
    let n = a.cols();
    if m - row_from < 2 {
        return;
    }
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in row_from..m {
            for q in p + 1..m {
                let (mut app, mut aqq, mut apq) = (0.0, 0.0, 0.0);
                for j in 0..n {
                    let x = a.get(p, j);
                    let y = a.get(q, j);
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= 1e-30 || apq.abs() <= 1e-16 * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for j in 0..n {
                    let x = a.get(p, j);
                    let y = a.get(q, j);
                    a.set(p, j, c * x - s * y);
                    a.set(q, j, s * x + c * y);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // Sort rows by descending norm (stable, so exact ties keep their order).
    let mut order: Vec<usize> = (row_from..m).collect();
    let norms: Vec<f64> = order.iter().map(|&i| norm(a.row(i))).collect();
    order.sort_by(|&x, &y| {
        norms[y - row_from]
            .partial_cmp(&norms[x - row_from])
            .unwrap()
    });
    let block: Vec<Vec<f64>> = order.iter().map(|&i| a.row(i).to_vec()).collect();
    for (ii, r) in block.into_iter().enumerate() {
        a.row_mut(row_from + ii).copy_from_slice(&r);
    }
}
