//! Compressed sparse rows and (modified) incomplete Cholesky factorization.

use crate::error::{Error, Result};

/// Row-compressed sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// columns within a row come out sorted.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut count = vec![0usize; n_rows + 1];
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::invalid(
                    "triplets",
                    format!("entry ({r}, {c}) outside {n_rows}x{n_cols}"),
                ));
            }
            count[r + 1] += 1;
        }
        for i in 0..n_rows {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut order: Vec<usize> = Vec::new();
        for r in 0..n_rows {
            order.clear();
            order.extend(count[r]..count[r + 1]);
            order.sort_by_key(|&k| cols[k]);
            for &k in &order {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == cols[k] {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    col_idx.push(cols[k]);
                    values.push(vals[k]);
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds from rows already in compressed form with sorted, unique
    /// columns.
    pub(crate) fn from_raw(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(row_ptr.len(), n_rows + 1);
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.n_rows) {
            let (cols, vals) = self.row(r);
            *yr = cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum();
        }
    }

    /// `y = A^T x`.
    pub fn mul_transpose_vec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (r, &xr) in x.iter().enumerate().take(self.n_rows) {
            if xr == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&c, v) in cols.iter().zip(vals) {
                y[c] += v * xr;
            }
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                triplets.push((c, r, v));
            }
        }
        // rows are visited in order, so every column list comes out sorted
        let mut count = vec![0usize; self.n_cols + 1];
        for &(c, _, _) in &triplets {
            count[c + 1] += 1;
        }
        for i in 0..self.n_cols {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        let mut col_idx = vec![0usize; triplets.len()];
        let mut values = vec![0.0; triplets.len()];
        for (c, r, v) in triplets {
            col_idx[next[c]] = r;
            values[next[c]] = v;
            next[c] += 1;
        }
        CsrMatrix::from_raw(self.n_cols, self.n_rows, count, col_idx, values)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }
}

/// Options for [`IncompleteCholesky::factor`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorOptions {
    /// Entries of a column below `drop_tol` times the 1-norm of the
    /// corresponding lower column of `A` are discarded. Zero keeps all fill.
    pub drop_tol: f64,
    /// Add every dropped entry to both affected diagonals, which keeps the
    /// row sums of `L L^T` equal to those of `A`.
    pub modified: bool,
    /// Added to every diagonal entry before factorization.
    pub shift: f64,
}

impl FactorOptions {
    pub fn mic(drop_tol: f64) -> Self {
        Self {
            drop_tol,
            modified: true,
            shift: 0.0,
        }
    }

    pub fn exact() -> Self {
        Self {
            drop_tol: 0.0,
            modified: false,
            shift: 0.0,
        }
    }
}

/// Lower-triangular factor `L` with `A ≈ L L^T`, stored by columns with the
/// diagonal first.
#[derive(Debug, Clone)]
pub struct IncompleteCholesky {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl IncompleteCholesky {
    /// Left-looking column factorization of a symmetric matrix given in full
    /// (both triangles) CSR storage.
    pub fn factor(a: &CsrMatrix, opts: FactorOptions) -> Result<Self> {
        let n = a.n_rows();
        if a.n_cols() != n {
            return Err(Error::invalid("matrix", "factorization needs a square matrix"));
        }
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx: Vec<usize> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        // per finished column: position of the next entry not yet consumed
        let mut next_pos = vec![0usize; n];
        // linked lists of columns whose next pending row is j
        let mut head = vec![usize::MAX; n];
        let mut link = vec![usize::MAX; n];
        let mut work = vec![0.0; n];
        let mut in_work = vec![false; n];
        let mut pattern: Vec<usize> = Vec::new();
        let mut diag_extra = vec![0.0; n];

        for j in 0..n {
            pattern.clear();
            let (cols, vals) = a.row(j);
            let mut norm1 = 0.0;
            for (&i, &v) in cols.iter().zip(vals) {
                if i >= j {
                    work[i] = v;
                    in_work[i] = true;
                    pattern.push(i);
                    norm1 += v.abs();
                }
            }
            if !in_work[j] {
                work[j] = 0.0;
                in_work[j] = true;
                pattern.push(j);
            }
            work[j] += opts.shift + diag_extra[j];

            // subtract contributions of earlier columns k with L(j, k) != 0
            let mut k = head[j];
            while k != usize::MAX {
                let next_k = link[k];
                let pos = next_pos[k];
                let ljk = values[pos];
                for p in pos..col_ptr[k + 1] {
                    let i = row_idx[p];
                    if !in_work[i] {
                        work[i] = 0.0;
                        in_work[i] = true;
                        pattern.push(i);
                    }
                    work[i] -= values[p] * ljk;
                }
                // move column k on to its next row
                let pos = pos + 1;
                next_pos[k] = pos;
                if pos < col_ptr[k + 1] {
                    let r = row_idx[pos];
                    link[k] = head[r];
                    head[r] = k;
                }
                k = next_k;
            }

            pattern.sort_unstable();
            let threshold = opts.drop_tol * norm1;
            let mut pivot = work[j];
            let start = values.len();
            row_idx.push(j);
            values.push(0.0);
            for &i in &pattern {
                if i == j {
                    continue;
                }
                let w = work[i];
                if w != 0.0 && w.abs() >= threshold {
                    row_idx.push(i);
                    values.push(w);
                } else if opts.modified {
                    pivot += w;
                    diag_extra[i] += w;
                }
            }
            for &i in &pattern {
                in_work[i] = false;
            }
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::FactorizationBreakdown { row: j, pivot });
            }
            let d = pivot.sqrt();
            values[start] = d;
            for v in &mut values[start + 1..] {
                *v /= d;
            }
            col_ptr[j + 1] = values.len();
            // column j becomes pending at its first off-diagonal row
            next_pos[j] = start + 1;
            if start + 1 < values.len() {
                let r = row_idx[start + 1];
                link[j] = head[r];
                head[r] = j;
            }
        }
        Ok(Self {
            n,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Modified incomplete Cholesky; on breakdown retries once with the
    /// diagonal shifted by `1e-8` times its largest entry.
    pub fn mic_with_retry(a: &CsrMatrix, drop_tol: f64) -> Result<Self> {
        match Self::factor(a, FactorOptions::mic(drop_tol)) {
            Ok(f) => Ok(f),
            Err(Error::FactorizationBreakdown { .. }) => {
                let max_diag = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                Self::factor(
                    a,
                    FactorOptions {
                        shift: 1e-8 * max_diag,
                        ..FactorOptions::mic(drop_tol)
                    },
                )
            }
            Err(e) => Err(e),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Solves `L L^T x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        // L y = b, column oriented
        for j in 0..self.n {
            let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
            x[j] /= self.values[a];
            let xj = x[j];
            for p in a + 1..b {
                x[self.row_idx[p]] -= self.values[p] * xj;
            }
        }
        // L^T x = y
        for j in (0..self.n).rev() {
            let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
            let mut s = x[j];
            for p in a + 1..b {
                s -= self.values[p] * x[self.row_idx[p]];
            }
            x[j] = s / self.values[a];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// `L L^T x`, for testing factor quality.
    pub fn product(&self, x: &[f64]) -> Vec<f64> {
        // y = L^T x
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
            y[j] = (a..b).map(|p| self.values[p] * x[self.row_idx[p]]).sum();
        }
        let mut z = vec![0.0; self.n];
        for j in 0..self.n {
            let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
            for p in a..b {
                z[self.row_idx[p]] += self.values[p] * y[j];
            }
        }
        z
    }
}

/// True when the complete Cholesky factorization of the symmetric matrix
/// `a` runs to the end with every pivot above `rel_tol` times the original
/// diagonal entry.
pub fn cholesky_is_definite(a: &CsrMatrix, rel_tol: f64) -> bool {
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return false;
    }
    match IncompleteCholesky::factor(a, FactorOptions::exact()) {
        Ok(f) => (0..f.n).all(|j| {
            let l = f.values[f.col_ptr[j]];
            l * l > rel_tol * diag[j]
        }),
        Err(_) => false,
    }
}
