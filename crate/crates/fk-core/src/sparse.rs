//! Compressed sparse row matrices, just enough for the solver stack: build
//! from triplets, multiply, read the diagonal. Assembly produces symmetric
//! matrices; symmetry is the caller's responsibility and is checked in tests
//! rather than enforced here.

use crate::scalar::Scalar;

/// Square CSR matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Builds an n x n matrix from (row, col, value) triplets. Duplicate
    /// entries are summed; explicit zeros are kept so patterns stay stable
    /// across parameter changes.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        // row_ptr[r+1] tracks the running end of row r; rows arrive in order
        // because the triplets are sorted, so duplicates sit adjacent.
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < n && c < n, "triplet ({r}, {c}) out of bounds for n = {n}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] = col_idx.len();
            last = Some((r, c));
        }
        // Turn per-row ends into prefix offsets (empty rows inherit the
        // previous end).
        for r in 1..=n {
            if row_ptr[r] < row_ptr[r - 1] {
                row_ptr[r] = row_ptr[r - 1];
            }
        }
        Self { n, row_ptr, col_idx, values }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row r as (col, value) pairs.
    #[inline]
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// y = A x.
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for r in 0..self.n {
            let mut acc = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    /// A x as a fresh vector.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.matvec(x, &mut y);
        y
    }

    /// x^T A y.
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        let mut acc = T::zero();
        for r in 0..self.n {
            let mut row = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.values[k] * y[self.col_idx[k]];
            }
            acc += x[r] * row;
        }
        acc
    }

    /// x^T A x.
    #[inline]
    pub fn quadratic_form(&self, x: &[T]) -> T {
        self.bilinear(x, x)
    }

    /// Main diagonal, zeros where the pattern has no entry.
    pub fn diagonal(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] == r {
                    d[r] += self.values[k];
                }
            }
        }
        d
    }

    /// Largest absolute asymmetry max |a_ij - a_ji|; tests use this to pin
    /// exact symmetry of assembled operators.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let mirror = self
                    .row(c)
                    .find(|(cc, _)| *cc == r)
                    .map(|(_, v)| v)
                    .unwrap_or_else(T::zero);
                let gap = (self.values[k] - mirror).abs();
                if gap > worst {
                    worst = gap;
                }
            }
        }
        worst
    }
}

/// Diagonal matrix stored as its diagonal; the lumped mass matrix.
#[derive(Debug, Clone)]
pub struct DiagMatrix<T> {
    pub diag: Vec<T>,
}

impl<T: Scalar> DiagMatrix<T> {
    pub fn new(diag: Vec<T>) -> Self {
        Self { diag }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// x^T M y.
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        self.diag
            .iter()
            .zip(x.iter().zip(y.iter()))
            .map(|(m, (a, b))| *m * *a * *b)
            .sum()
    }

    /// x^T M x.
    #[inline]
    pub fn quadratic_form(&self, x: &[T]) -> T {
        self.bilinear(x, x)
    }

    /// Sum of the diagonal; the total volume when M is the mass matrix.
    pub fn trace(&self) -> T {
        self.diag.iter().copied().sum()
    }
}
