//! Compressed sparse row matrices with the handful of operations the
//! propagation operators need.

use std::fmt::Write as _;

/// Row-major CSR matrix. Column indices are sorted and unique within a row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// and explicit zeros are kept out of the structure.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|t| (t.0, t.1));

        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) outside {rows}x{cols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
        .without_zeros()
    }

    /// Assembles a matrix from per-row `(col, value)` lists, each sorted by column.
    pub fn from_sorted_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for row in &rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            for &(c, v) in row {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            rows: rows.len(),
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        let rows_vec = (0..rows)
            .map(|r| {
                (0..cols)
                    .filter_map(|c| {
                        let v = data[r * cols + c];
                        (v != 0.0).then_some((c, v))
                    })
                    .collect()
            })
            .collect();
        Self::from_sorted_rows(cols, rows_vec)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (idx, vals) = self.row(r);
        match idx.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (idx, vals) = self.row(r);
            idx.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for (r, c, v) in self.iter() {
            out[r * self.cols + c] = v;
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.cols];
        for (r, c, v) in self.iter() {
            rows[c].push((r, v));
        }
        CsrMatrix::from_sorted_rows(self.rows, rows)
    }

    pub fn scale(&self, factor: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out.without_zeros()
    }

    /// Row/column scaling `diag(left) · self · diag(right)`.
    pub fn scale_rows_cols(&self, left: &[f64], right: &[f64]) -> CsrMatrix {
        assert_eq!(left.len(), self.rows);
        assert_eq!(right.len(), self.cols);
        let mut out = self.clone();
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                out.values[k] *= left[r] * right[self.indices[k]];
            }
        }
        out.without_zeros()
    }

    /// Sparse product `self · other` (Gustavson's row-by-row algorithm).
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matmul");
        let mut acc = vec![0.0; other.cols];
        let mut touched = vec![false; other.cols];
        let mut pattern: Vec<usize> = Vec::new();
        let mut rows = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            for (&k, &a) in idx.iter().zip(vals) {
                let (oidx, ovals) = other.row(k);
                for (&c, &b) in oidx.iter().zip(ovals) {
                    if !touched[c] {
                        touched[c] = true;
                        pattern.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            pattern.sort_unstable();
            let row: Vec<(usize, f64)> = pattern
                .iter()
                .filter_map(|&c| {
                    let v = acc[c];
                    acc[c] = 0.0;
                    touched[c] = false;
                    (v != 0.0).then_some((c, v))
                })
                .collect();
            pattern.clear();
            rows.push(row);
        }
        CsrMatrix::from_sorted_rows(other.cols, rows)
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut triplets: Vec<(usize, usize, f64)> =
            self.iter().map(|(r, c, v)| (r, c, a * v)).collect();
        triplets.extend(other.iter().map(|(r, c, v)| (r, c, b * v)));
        CsrMatrix::from_triplets(self.rows, self.cols, &triplets)
    }

    /// Sum of every stored entry.
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Dense product `self · dense` where `dense` is row-major `cols × width`.
    pub fn mul_dense(&self, dense: &[f64], width: usize) -> Vec<f64> {
        assert_eq!(dense.len(), self.cols * width);
        let mut out = vec![0.0; self.rows * width];
        for r in 0..self.rows {
            let target = &mut out[r * width..(r + 1) * width];
            let (idx, vals) = self.row(r);
            for (&k, &a) in idx.iter().zip(vals) {
                let src = &dense[k * width..(k + 1) * width];
                for (t, s) in target.iter_mut().zip(src) {
                    *t += a * s;
                }
            }
        }
        out
    }

    /// Drops entries with magnitude below `eps`.
    pub fn prune(&self, eps: f64) -> CsrMatrix {
        let rows = (0..self.rows)
            .map(|r| {
                let (idx, vals) = self.row(r);
                idx.iter()
                    .zip(vals)
                    .filter(|(_, v)| v.abs() >= eps)
                    .map(|(&c, &v)| (c, v))
                    .collect()
            })
            .collect();
        CsrMatrix::from_sorted_rows(self.cols, rows)
    }

    /// Keeps the `k` largest-magnitude entries of every row.
    pub fn top_k_per_row(&self, k: usize) -> CsrMatrix {
        let rows = (0..self.rows)
            .map(|r| {
                let (idx, vals) = self.row(r);
                let mut row: Vec<(usize, f64)> =
                    idx.iter().copied().zip(vals.iter().copied()).collect();
                if row.len() > k {
                    // ties broken by column so the result is deterministic
                    row.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
                    row.truncate(k);
                    row.sort_by_key(|e| e.0);
                }
                row
            })
            .collect();
        CsrMatrix::from_sorted_rows(self.cols, rows)
    }

    fn without_zeros(self) -> CsrMatrix {
        if self.values.iter().all(|&v| v != 0.0) {
            return self;
        }
        let rows = (0..self.rows)
            .map(|r| {
                let (idx, vals) = self.row(r);
                idx.iter()
                    .zip(vals)
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(&c, &v)| (c, v))
                    .collect()
            })
            .collect();
        CsrMatrix::from_sorted_rows(self.cols, rows)
    }

    /// Matrix Market `coordinate real general` text, 1-based indices.
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::new();
        out.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(out, "{} {} {}", self.rows, self.cols, self.nnz());
        for (r, c, v) in self.iter() {
            let _ = writeln!(out, "{} {} {:.17e}", r + 1, c + 1, v);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[i * m + j] = (0..k).map(|t| a[i * k + t] * b[t * m + j]).sum();
            }
        }
        out
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, 0.0)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = [1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 4.0, 0.0, 5.0];
        let b = [0.0, 1.0, 1.0, 0.0, 2.0, 0.0];
        let sa = CsrMatrix::from_dense(3, 3, &a);
        let sb = CsrMatrix::from_dense(3, 2, &b);
        assert_eq!(sa.matmul(&sb).to_dense(), dense_matmul(&a, &b, 3, 3, 2));
        assert_eq!(sa.mul_dense(&b, 2), dense_matmul(&a, &b, 3, 3, 2));
    }

    #[test]
    fn transpose_and_top_k() {
        let m = CsrMatrix::from_dense(2, 3, &[0.1, -0.5, 0.3, 0.0, 0.2, 0.0]);
        let t = m.transpose();
        assert_eq!(t.get(1, 0), -0.5);
        assert_eq!(t.rows(), 3);
        let top = m.top_k_per_row(2);
        assert_eq!(top.get(0, 0), 0.0);
        assert_eq!(top.get(0, 1), -0.5);
        assert_eq!(top.get(0, 2), 0.3);
        assert_eq!(m.prune(0.25).nnz(), 2);
    }

    #[test]
    fn matrix_market_dump_lists_every_entry() {
        let text = CsrMatrix::identity(2).to_matrix_market();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 2\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
