//! Sparse Hermitian operators on the `2^L` computational basis of a spin chain.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Compressed-row sparse matrix with complex entries.
///
/// Rows keep their column indices sorted; duplicate triplets are summed on
/// construction. The only hot-path primitive is [`SparseOperator::apply_into`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Complex64>,
    /// All imaginary parts are zero.
    real: bool,
}

impl SparseOperator {
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            cols.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let real = values.iter().all(|v| v.im == 0.0);
        SparseOperator {
            dim,
            row_ptr,
            cols,
            values,
            real,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        SparseOperator {
            dim,
            row_ptr: (0..=dim).collect(),
            cols: (0..dim).collect(),
            values: diag.iter().map(|&d| Complex64::new(d, 0.0)).collect(),
            real: true,
        }
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let mut triplets = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != Complex64::new(0.0, 0.0) {
                    triplets.push((r, c, m[(r, c)]));
                }
            }
        }
        SparseOperator::from_triplets(m.nrows(), triplets)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `y = A x`.
    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        if self.real {
            for (out, span) in y.iter_mut().zip(self.row_ptr.windows(2)) {
                let (lo, hi) = (span[0], span[1]);
                let (mut re, mut im) = (0.0, 0.0);
                for (&c, v) in self.cols[lo..hi].iter().zip(&self.values[lo..hi]) {
                    re += v.re * x[c].re;
                    im += v.re * x[c].im;
                }
                *out = Complex64::new(re, im);
            }
            return;
        }
        for (out, span) in y.iter_mut().zip(self.row_ptr.windows(2)) {
            let (lo, hi) = (span[0], span[1]);
            *out = self.cols[lo..hi]
                .iter()
                .zip(&self.values[lo..hi])
                .map(|(&c, v)| v * x[c])
                .sum();
        }
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.apply_into(x, &mut y);
        y
    }

    /// `⟨x|A|x⟩` (real part; exact for Hermitian `A`).
    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        let ax = self.apply(x);
        x.iter().zip(&ax).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Largest `|A_ij − conj(A_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    /// Maximum absolute row sum, an upper bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|r| self.get(r, r).re).collect()
    }
}

/// A family `H(c) = Σ_k c_k A_k` of operators sharing one union sparsity
/// pattern, so that evaluating `H` at new coefficients is a single pass over
/// the nonzeros.
#[derive(Debug, Clone)]
pub struct AffineOperator {
    pattern: SparseOperator,
    term_values: Vec<Vec<Complex64>>,
}

impl AffineOperator {
    pub fn new(terms: &[SparseOperator]) -> Self {
        assert!(!terms.is_empty(), "affine operator needs at least one term");
        let dim = terms[0].dim();
        assert!(terms.iter().all(|t| t.dim() == dim), "term dimensions differ");
        let mut triplets = Vec::new();
        for t in terms {
            for r in 0..dim {
                for (c, _) in t.row(r) {
                    triplets.push((r, c, Complex64::new(0.0, 0.0)));
                }
            }
        }
        let pattern = SparseOperator::from_triplets(dim, triplets);
        let term_values = terms
            .iter()
            .map(|t| {
                let mut vals = vec![Complex64::new(0.0, 0.0); pattern.nnz()];
                for r in 0..dim {
                    for k in pattern.row_ptr[r]..pattern.row_ptr[r + 1] {
                        vals[k] = t.get(r, pattern.cols[k]);
                    }
                }
                vals
            })
            .collect();
        AffineOperator {
            pattern,
            term_values,
        }
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim
    }

    pub fn num_terms(&self) -> usize {
        self.term_values.len()
    }

    pub fn combine(&self, coeffs: &[f64]) -> SparseOperator {
        let mut out = self.pattern.clone();
        self.combine_into(coeffs, &mut out);
        out
    }

    /// Overwrites the values of `out`, which must come from [`AffineOperator::combine`].
    pub fn combine_into(&self, coeffs: &[f64], out: &mut SparseOperator) {
        assert_eq!(coeffs.len(), self.term_values.len());
        debug_assert_eq!(out.nnz(), self.pattern.nnz());
        out.values.fill(Complex64::new(0.0, 0.0));
        for (c, vals) in coeffs.iter().zip(&self.term_values) {
            if *c == 0.0 {
                continue;
            }
            for (o, v) in out.values.iter_mut().zip(vals) {
                *o += v * c;
            }
        }
        out.real = out.values.iter().all(|v| v.im == 0.0);
    }

    pub fn term(&self, k: usize) -> SparseOperator {
        let mut out = self.pattern.clone();
        out.values.clone_from(&self.term_values[k]);
        out.real = out.values.iter().all(|v| v.im == 0.0);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let op = SparseOperator::from_triplets(
            3,
            vec![(1, 2, c(1.0, 0.0)), (1, 0, c(2.0, 0.0)), (1, 2, c(0.5, 1.0))],
        );
        assert_eq!(op.nnz(), 2);
        assert_eq!(op.get(1, 2), c(1.5, 1.0));
        assert_eq!(op.get(1, 0), c(2.0, 0.0));
        assert_eq!(op.get(0, 0), c(0.0, 0.0));
    }

    #[test]
    fn apply_matches_dense() {
        let op = SparseOperator::from_triplets(
            3,
            vec![
                (0, 0, c(1.0, 0.0)),
                (0, 2, c(0.0, 1.0)),
                (2, 0, c(0.0, -1.0)),
                (1, 1, c(-2.0, 0.0)),
            ],
        );
        let x = vec![c(1.0, 2.0), c(-1.0, 0.5), c(0.3, 0.0)];
        let dense = op.to_dense() * nalgebra::DVector::from_vec(x.clone());
        let y = op.apply(&x);
        for i in 0..3 {
            assert!((y[i] - dense[i]).norm() < 1e-15);
        }
        assert_eq!(op.hermiticity_error(), 0.0);
        assert!(!op.is_real());
    }

    #[test]
    fn affine_combination() {
        let a = SparseOperator::from_diagonal(&[1.0, 2.0]);
        let b = SparseOperator::from_triplets(2, vec![(0, 1, c(1.0, 0.0)), (1, 0, c(1.0, 0.0))]);
        let aff = AffineOperator::new(&[a, b]);
        let h = aff.combine(&[2.0, -3.0]);
        assert_eq!(h.get(0, 0), c(2.0, 0.0));
        assert_eq!(h.get(1, 1), c(4.0, 0.0));
        assert_eq!(h.get(0, 1), c(-3.0, 0.0));
        assert_eq!(aff.term(1).get(1, 0), c(1.0, 0.0));
        assert_eq!(aff.term(1).get(0, 0), c(0.0, 0.0));
    }
}
