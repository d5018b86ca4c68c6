//! Dense row-major matrix primitives with an explicit numerical-tolerance
//! policy. All accumulation is in `f64`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Sweep cap for the Jacobi SVD; exceeding it is reported as a numerical
/// failure rather than silently looping.
const SVD_MAX_SWEEPS: usize = 64;

/// Numerical tolerances shared across the crate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ToleranceConfig {
    /// Relative singular-value / residual-norm cutoff for rank decisions.
    pub rank_tol: f64,
    /// Max allowed entry of |BᵀB − I| for a basis to count as orthonormal.
    pub orthonorm_tol: f64,
    /// Slack (radians near 0, cosine units near 1) in angle comparisons.
    pub angle_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            rank_tol: 1e-10,
            orthonorm_tol: 1e-8,
            angle_tol: 1e-9,
        }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank_tol <= 0.0 || self.orthonorm_tol <= 0.0 || self.angle_tol <= 0.0 {
            return Err(Error::InvalidInput(
                "tolerances must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Dense `f64` matrix, row-major storage (`data[i * cols + j]`).
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl std::fmt::Debug for Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                write!(f, "{:>12.5e} ", self.get(i, j))?;
            }
            writeln!(f, "{}", if self.cols > 8 { "..." } else { "" })?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build from a row-major buffer; length must equal `rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "buffer of length {} cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    /// Matrix whose `j`-th column is `cols[j]`; `rows` fixes the height even
    /// when no columns are given.
    pub fn from_columns(rows: usize, cols: &[Vec<f64>]) -> Result<Self> {
        if cols.iter().any(|c| c.len() != rows) {
            return Err(Error::ShapeMismatch("column length mismatch".into()));
        }
        let mut m = Matrix::zeros(rows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
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

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `self * other`, cache-friendly ikj loop.
    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "mul: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = out.row_mut(i);
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ * other` without materializing the transpose.
    pub fn mul_at_b(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.rows, other.rows,
            "mul_at_b: {}x{} vs {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = out.row_mut(i);
                for (o, &b) in out_row.iter_mut().zip(b_row.iter()) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * otherᵀ` as row-by-row dot products.
    pub fn mul_abt(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.cols,
            "mul_abt: {}x{} vs {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                out.set(i, j, dot(a_row, other.row(j)));
            }
        }
        out
    }

    /// Matrix-vector product `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ * v`.
    pub fn mul_tvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = self.row(i);
            let s = v[i];
            if s == 0.0 {
                continue;
            }
            for (o, &r) in out.iter_mut().zip(row.iter()) {
                *o += s * r;
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self += s * other`, in place.
    pub fn add_scaled(&mut self, s: f64, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += s * b;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn col_norm(&self, j: usize) -> f64 {
        (0..self.rows)
            .map(|i| self.get(i, j) * self.get(i, j))
            .sum::<f64>()
            .sqrt()
    }

    /// Keep the leading `k` columns.
    pub fn take_cols(&self, k: usize) -> Matrix {
        assert!(k <= self.cols);
        let mut m = Matrix::zeros(self.rows, k);
        for i in 0..self.rows {
            m.row_mut(i).copy_from_slice(&self.row(i)[..k]);
        }
        m
    }

    /// Columns selected by index, in the given order.
    pub fn select_cols(&self, idx: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(self.rows, idx.len());
        for (jj, &j) in idx.iter().enumerate() {
            for i in 0..self.rows {
                m.set(i, jj, self.get(i, j));
            }
        }
        m
    }

    /// Append a column on the right.
    pub fn push_col(&self, col: &[f64]) -> Matrix {
        assert_eq!(col.len(), self.rows);
        let mut m = Matrix::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            m.row_mut(i)[..self.cols].copy_from_slice(self.row(i));
            m.set(i, self.cols, col[i]);
        }
        m
    }

    fn ensure_finite(&self, what: &str) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::InvalidInput(format!(
                "{what}: non-finite entries in {}x{} matrix",
                self.rows, self.cols
            )));
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += s * x`.
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x.iter()) {
        *yi += s * xi;
    }
}

pub fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Orthonormal basis for the column space of `m`.
///
/// Modified Gram–Schmidt with one re-orthogonalization pass; columns whose
/// residual drops below `rank_tol` times the largest input column norm are
/// treated as dependent and dropped.
pub fn orthonormalize(m: &Matrix, tol: &ToleranceConfig) -> Result<Matrix> {
    tol.validate()?;
    m.ensure_finite("orthonormalize")?;
    let max_col_norm = (0..m.cols()).map(|j| m.col_norm(j)).fold(0.0f64, f64::max);
    if max_col_norm == 0.0 {
        return Ok(Matrix::zeros(m.rows(), 0));
    }
    let threshold = tol.rank_tol * max_col_norm;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for j in 0..m.cols() {
        let mut v = m.col(j);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        let n = norm(&v);
        if n > threshold {
            for x in v.iter_mut() {
                *x /= n;
            }
            basis.push(v);
        }
    }
    Matrix::from_columns(m.rows(), &basis)
}

/// Thin singular value decomposition `m = u · diag(singular) · vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Left singular vectors as columns, `rows × k`.
    pub u: Matrix,
    /// Singular values, non-negative and non-increasing.
    pub singular: Vec<f64>,
    /// Right singular vectors as columns, `cols × k`.
    pub v: Matrix,
}

/// Deterministic thin SVD with a fixed sign convention: the largest-magnitude
/// entry of each right singular vector is forced non-negative (ties broken by
/// lowest index), and singular values are sorted in descending order.
///
/// One-sided Jacobi on the (square) core, with a Householder QR reduction for
/// tall inputs and a transpose for wide ones. Jacobi keeps full accuracy on
/// clustered and exactly-degenerate spectra, which arise structurally when
/// one subspace contains another.
pub fn svd(m: &Matrix) -> Result<Svd> {
    m.ensure_finite("svd")?;
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(Svd {
            u: Matrix::zeros(m.rows(), 0),
            singular: vec![],
            v: Matrix::zeros(m.cols(), 0),
        });
    }
    let mut out = if m.rows() < m.cols() {
        let t = svd_tall(&m.transpose())?;
        Svd {
            u: t.v,
            singular: t.singular,
            v: t.u,
        }
    } else {
        svd_tall(m)?
    };
    // Sign convention keyed on the right singular vectors.
    for j in 0..out.v.cols() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for i in 0..out.v.rows() {
            let a = out.v.get(i, j).abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if out.v.get(best, j) < 0.0 {
            for i in 0..out.v.rows() {
                out.v.set(i, j, -out.v.get(i, j));
            }
            for i in 0..out.u.rows() {
                out.u.set(i, j, -out.u.get(i, j));
            }
        }
    }
    Ok(out)
}

/// SVD of an `m × n` matrix with `m ≥ n`.
fn svd_tall(m: &Matrix) -> Result<Svd> {
    debug_assert!(m.rows() >= m.cols());
    if m.rows() > m.cols() {
        let (q, r) = householder_qr(m);
        let core = jacobi_svd_square(&r)?;
        Ok(Svd {
            u: q.mul(&core.u),
            singular: core.singular,
            v: core.v,
        })
    } else {
        jacobi_svd_square(m)
    }
}

/// Thin Householder QR of a tall matrix: `m = q · r` with `q` of shape
/// `rows × cols` (orthonormal columns) and `r` upper-triangular `cols × cols`.
fn householder_qr(m: &Matrix) -> (Matrix, Matrix) {
    let (rows, cols) = (m.rows(), m.cols());
    let mut r = m.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for k in 0..cols {
        let mut v: Vec<f64> = (k..rows).map(|i| r.get(i, k)).collect();
        let alpha = norm(&v);
        if alpha > 0.0 {
            let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
            v[0] += sign * alpha;
            let vnorm = norm(&v);
            if vnorm > 0.0 {
                for x in v.iter_mut() {
                    *x /= vnorm;
                }
                for j in k..cols {
                    let mut c = 0.0;
                    for (t, vi) in v.iter().enumerate() {
                        c += vi * r.get(k + t, j);
                    }
                    c *= 2.0;
                    for (t, vi) in v.iter().enumerate() {
                        r.set(k + t, j, r.get(k + t, j) - c * vi);
                    }
                }
            } else {
                v = vec![0.0; rows - k];
            }
        } else {
            v = vec![0.0; rows - k];
        }
        reflectors.push(v);
    }
    // Accumulate the thin Q by applying the reflectors to the identity block.
    let mut q = Matrix::zeros(rows, cols);
    for j in 0..cols {
        q.set(j, j, 1.0);
    }
    for k in (0..cols).rev() {
        let v = &reflectors[k];
        if v.iter().all(|&x| x == 0.0) {
            continue;
        }
        for j in 0..cols {
            let mut c = 0.0;
            for (t, vi) in v.iter().enumerate() {
                c += vi * q.get(k + t, j);
            }
            c *= 2.0;
            for (t, vi) in v.iter().enumerate() {
                q.set(k + t, j, q.get(k + t, j) - c * vi);
            }
        }
    }
    let mut r_sq = Matrix::zeros(cols, cols);
    for i in 0..cols {
        for j in i..cols {
            r_sq.set(i, j, r.get(i, j));
        }
    }
    (q, r_sq)
}

/// One-sided Jacobi SVD of a square (or tall-square) matrix: rotates column
/// pairs until all are mutually orthogonal. Works on the transposed copy so
/// each column rotation is a contiguous row operation.
fn jacobi_svd_square(m: &Matrix) -> Result<Svd> {
    let (rows, cols) = (m.rows(), m.cols());
    debug_assert!(rows >= cols);
    let mut w = m.transpose(); // row j ↔ column j of the working matrix
    let mut vt = Matrix::identity(cols); // row j ↔ right singular vector j
    let eps = f64::EPSILON;

    let mut converged = false;
    let mut sweeps = 0usize;
    while !converged && sweeps < SVD_MAX_SWEEPS {
        converged = true;
        sweeps += 1;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (alpha, beta, gamma) = {
                    let rp = w.row(p);
                    let rq = w.row(q);
                    (dot(rp, rp), dot(rq, rq), dot(rp, rq))
                };
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut w, p, q, c, s);
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
    }
    if !converged {
        return Err(Error::Numerical {
            what: "svd".into(),
            iterations: SVD_MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = (0..cols).map(|j| norm(w.row(j))).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap().then(a.cmp(&b)));

    let mut u = Matrix::zeros(rows, cols);
    let mut v = Matrix::zeros(cols, cols);
    let mut singular = Vec::with_capacity(cols);
    let mut zero_cols: Vec<usize> = Vec::new();
    for (out_idx, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        singular.push(sigma);
        if sigma > 0.0 {
            for i in 0..rows {
                u.set(i, out_idx, w.get(src, i) / sigma);
            }
        } else {
            zero_cols.push(out_idx);
        }
        for i in 0..cols {
            v.set(i, out_idx, vt.get(src, i));
        }
    }
    // Vanished columns still need orthonormal left vectors: complete the
    // basis deterministically from standard basis vectors.
    for &j in &zero_cols {
        let mut filled = false;
        for cand in 0..rows {
            let mut e = vec![0.0; rows];
            e[cand] = 1.0;
            for k in 0..cols {
                if k == j || (singular[k] == 0.0 && k > j) {
                    continue;
                }
                let c = dot(&u.col(k), &e);
                for (i, ei) in e.iter_mut().enumerate() {
                    *ei -= c * u.get(i, k);
                }
            }
            let n = norm(&e);
            if n > 0.5 {
                for i in 0..rows {
                    u.set(i, j, e[i] / n);
                }
                filled = true;
                break;
            }
        }
        debug_assert!(filled, "failed to complete an orthonormal basis");
    }
    Ok(Svd { u, singular, v })
}

#[inline]
fn rotate_rows(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    debug_assert!(p < q);
    let cols = m.cols();
    let (head, tail) = m.data.split_at_mut(q * cols);
    let rp = &mut head[p * cols..(p + 1) * cols];
    let rq = &mut tail[..cols];
    for (a, b) in rp.iter_mut().zip(rq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Smallest `k` whose leading squared singular values capture an `epsilon`
/// fraction of the total squared spectrum.
pub fn energy_rank(singular: &[f64], epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    if singular.is_empty() || singular.iter().all(|&s| s == 0.0) {
        return Err(Error::InvalidInput("all-zero spectrum".into()));
    }
    if singular.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::InvalidInput(
            "singular values must be finite and non-negative".into(),
        ));
    }
    if singular.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidInput(
            "singular values must be sorted in descending order".into(),
        ));
    }
    let total: f64 = singular.iter().map(|s| s * s).sum();
    let target = epsilon * total;
    let mut cum = 0.0;
    for (i, s) in singular.iter().enumerate() {
        cum += s * s;
        if cum >= target {
            return Ok(i + 1);
        }
    }
    Ok(singular.len())
}

/// Drop trailing singular values below `rank_tol` times the largest one;
/// returns the numerical rank.
pub fn numerical_rank(singular: &[f64], tol: &ToleranceConfig) -> usize {
    let largest = singular.first().copied().unwrap_or(0.0);
    if largest == 0.0 {
        return 0;
    }
    singular
        .iter()
        .take_while(|&&s| s > tol.rank_tol * largest)
        .count()
}
