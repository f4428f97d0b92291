use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use faer::Side;

use crate::error::FeError;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from `(row, col, value)` triplets, summing duplicates in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, trip: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, _, _) in trip {
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; trip.len()];
        let mut vals = vec![0.0; trip.len()];
        let mut next = counts.clone();
        for &(r, c, v) in trip {
            let p = next[r];
            cols[p] = c;
            vals[p] = v;
            next[r] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(trip.len());
        let mut values = Vec::with_capacity(trip.len());
        indptr.push(0);
        let mut perm: Vec<usize> = Vec::new();
        for r in 0..nrows {
            let (lo, hi) = (counts[r], counts[r + 1]);
            perm.clear();
            perm.extend(lo..hi);
            perm.sort_by_key(|&p| cols[p]);
            for &p in &perm {
                if indices.len() > indptr[r] && *indices.last().unwrap() == cols[p] {
                    *values.last_mut().unwrap() += vals[p];
                } else {
                    indices.push(cols[p]);
                    values.push(vals[p]);
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.indices[self.indptr[i]..self.indptr[i + 1]];
        match row.binary_search(&j) {
            Ok(p) => self.values[self.indptr[i] + p],
            Err(_) => 0.0,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `y[..nrows] += s * A x[..ncols]`.
    pub fn add_matvec(&self, s: f64, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let mut acc = 0.0;
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            *yi += s * acc;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - A^T|` relative to `max |A|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push((i, j, v));
            }
        }
        t
    }

    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for (i, j, v) in self.triplets() {
            let _ = writeln!(s, "{} {} {:.17e}", i + 1, j + 1, v);
        }
        s
    }
}

static FACTORIZATIONS: AtomicUsize = AtomicUsize::new(0);

/// Total number of sparse factorizations performed by this process.
pub fn factorization_count() -> usize {
    FACTORIZATIONS.load(Ordering::Relaxed)
}

/// Sparse LU factorization, computed once and reused for every solve.
pub struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SparseLu({}x{})", self.n, self.n)
    }
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self, FeError> {
        let fail = |reason: String| FeError::Factorization { n: a.nrows, nnz: a.nnz(), reason };
        if a.nrows != a.ncols {
            return Err(fail("matrix is not square".into()));
        }
        let trip: Vec<Triplet<usize, usize, f64>> =
            a.triplets().into_iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows, a.ncols, &trip)
            .map_err(|e| fail(format!("{e:?}")))?;
        let lu = m.sp_lu().map_err(|e| fail(format!("{e:?}")))?;
        FACTORIZATIONS.fetch_add(1, Ordering::Relaxed);
        let this = Self { lu, n: a.nrows };
        // a singular matrix factors without complaint but yields non-finite solves
        let probe = this.solve(&vec![1.0; a.nrows]);
        if probe.iter().any(|v| !v.is_finite()) {
            return Err(fail("matrix is numerically singular".into()));
        }
        Ok(this)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let mut b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        self.lu.solve_in_place(b.as_mut());
        (0..self.n).map(|i| b[(i, 0)]).collect()
    }
}

/// Solver for `[K C; C^T 0]` with `K` symmetric positive definite and at most three
/// border columns: a sparse Cholesky factor of `K` plus the dense Schur complement
/// `C^T K^-1 C`. Dense border rows would otherwise wreck the fill-reducing ordering
/// of a general LU.
pub struct BorderedCholesky {
    llt: Llt<usize, f64>,
    nd: usize,
    /// `K^-1 c_i` for every border column.
    y: Vec<Vec<f64>>,
    cols: Vec<Vec<f64>>,
    schur: nalgebra::DMatrix<f64>,
}

impl std::fmt::Debug for BorderedCholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BorderedCholesky({} + {})", self.nd, self.cols.len())
    }
}

impl BorderedCholesky {
    pub fn factor(k: &CsrMatrix, border: Option<&[[f64; 3]]>) -> Result<Self, FeError> {
        let nb = if border.is_some() { 3 } else { 0 };
        let fail = |reason: String| FeError::Factorization { n: k.nrows + nb, nnz: k.nnz(), reason };
        if k.nrows != k.ncols {
            return Err(fail("matrix is not square".into()));
        }
        let nd = k.nrows;
        let trip: Vec<Triplet<usize, usize, f64>> =
            k.triplets().into_iter().filter(|&(i, j, _)| i >= j).map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(nd, nd, &trip).map_err(|e| fail(format!("{e:?}")))?;
        let llt = m.sp_cholesky(Side::Lower).map_err(|e| fail(format!("not positive definite: {e:?}")))?;
        FACTORIZATIONS.fetch_add(1, Ordering::Relaxed);
        let solve = |rhs: &[f64]| {
            let mut b = Mat::<f64>::from_fn(nd, 1, |i, _| rhs[i]);
            llt.solve_in_place(b.as_mut());
            (0..nd).map(|i| b[(i, 0)]).collect::<Vec<f64>>()
        };
        let cols: Vec<Vec<f64>> = match border {
            Some(c) => {
                if c.len() != nd {
                    return Err(fail(format!("border has {} rows, expected {nd}", c.len())));
                }
                (0..3).map(|r| c.iter().map(|row| row[r]).collect()).collect()
            }
            None => Vec::new(),
        };
        let y: Vec<Vec<f64>> = cols.iter().map(|c| solve(c)).collect();
        let schur = nalgebra::DMatrix::from_fn(cols.len(), cols.len(), |i, j| dot(&cols[i], &y[j]));
        let this = Self { llt, nd, y, cols, schur };
        let probe = this.solve(&vec![1.0; nd + nb]);
        if probe.iter().any(|v| !v.is_finite()) {
            return Err(fail("matrix is numerically singular".into()));
        }
        Ok(this)
    }

    pub fn dim(&self) -> usize {
        self.nd + self.cols.len()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.dim());
        let nd = self.nd;
        let mut b = Mat::<f64>::from_fn(nd, 1, |i, _| rhs[i]);
        self.llt.solve_in_place(b.as_mut());
        let mut x: Vec<f64> = (0..nd).map(|i| b[(i, 0)]).collect();
        if self.cols.is_empty() {
            return x;
        }
        let g = nalgebra::DVector::from_fn(self.cols.len(), |i, _| dot(&self.cols[i], &x) - rhs[nd + i]);
        let lambda =
            self.schur.clone().lu().solve(&g).unwrap_or_else(|| nalgebra::DVector::from_element(g.len(), f64::NAN));
        for (yi, l) in self.y.iter().zip(lambda.iter()) {
            for (xv, yv) in x.iter_mut().zip(yi) {
                *xv -= l * yv;
            }
        }
        x.extend(lambda.iter());
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 0, 2.0), (0, 1, 3.0), (1, 1, 5.0)]);
        assert_eq!(a.indices, vec![0, 1, 1]);
        assert_eq!(a.values, vec![2.0, 4.0, 5.0]);
        assert_eq!(a.matvec(&[1.0, 1.0]), vec![6.0, 5.0]);
        assert!(a.asymmetry() > 0.0);
    }

    #[test]
    fn lu_solves_saddle_system() {
        // [[2, 0, 1], [0, 3, 1], [1, 1, 0]]
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 2.0), (1, 1, 3.0), (0, 2, 1.0), (2, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)],
        );
        let lu = SparseLu::factor(&a).unwrap();
        let x = lu.solve(&[1.0, 2.0, 3.0]);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-13);
        }
    }

    #[test]
    fn bordered_cholesky_matches_lu() {
        let k = CsrMatrix::from_triplets(
            4,
            4,
            &[(0, 0, 4.0), (1, 1, 3.0), (2, 2, 5.0), (3, 3, 2.0), (0, 1, 1.0), (1, 0, 1.0), (2, 3, -0.5), (3, 2, -0.5)],
        );
        let c = [[1.0, 0.0, 0.3], [1.0, 0.5, -0.2], [0.0, 1.0, 0.7], [0.2, 1.0, 0.1]];
        let mut trip = k.triplets();
        for (j, row) in c.iter().enumerate() {
            for (r, v) in row.iter().enumerate() {
                trip.push((j, 4 + r, *v));
                trip.push((4 + r, j, *v));
            }
        }
        let full = CsrMatrix::from_triplets(7, 7, &trip);
        let rhs = [1.0, -2.0, 0.5, 3.0, 0.1, -0.4, 0.9];
        let a = SparseLu::factor(&full).unwrap().solve(&rhs);
        let b = BorderedCholesky::factor(&k, Some(&c)).unwrap().solve(&rhs);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12, "{a:?} {b:?}");
        }
        let plain = BorderedCholesky::factor(&k, None).unwrap();
        assert_eq!(plain.dim(), 4);
        let r = k.matvec(&plain.solve(&rhs[..4]));
        assert!(r.iter().zip(&rhs).all(|(p, q)| (p - q).abs() < 1e-13));
    }

    #[test]
    fn indefinite_block_rejected() {
        let k = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(matches!(BorderedCholesky::factor(&k, None), Err(FeError::Factorization { .. })));
    }

    #[test]
    fn singular_reported() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(SparseLu::factor(&a), Err(FeError::Factorization { .. })));
    }

    #[test]
    fn matrix_market_header() {
        let a = CsrMatrix::from_triplets(2, 3, &[(1, 2, 0.5)]);
        let s = a.to_matrix_market();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real general\n2 3 1\n2 3 "));
    }
}
