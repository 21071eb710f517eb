use crate::combin::{checked_pow, multisets, tuple_index};
use crate::error::{guard, invalid, Result};

use super::dense::{DenseMatrix, DenseTensor};

/// Largest number of entries any dense product in this module will allocate.
pub const MAX_DENSE_ENTRIES: usize = 1 << 25;

fn check_entries(rows: usize, cols: usize, what: &str) -> Result<()> {
    match rows.checked_mul(cols) {
        Some(n) if n <= MAX_DENSE_ENTRIES => Ok(()),
        _ => guard(format!(
            "{what} would need {rows}x{cols} entries (cap {MAX_DENSE_ENTRIES})"
        )),
    }
}

/// Kronecker product of two matrices.
pub fn kronecker(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let (p, q, m, n) = (a.rows(), a.cols(), b.rows(), b.cols());
    let rows = p
        .checked_mul(m)
        .ok_or_else(|| crate::Error::Guard("kronecker row overflow".into()))?;
    let cols = q
        .checked_mul(n)
        .ok_or_else(|| crate::Error::Guard("kronecker column overflow".into()))?;
    check_entries(rows, cols, "kronecker product")?;
    let mut data = vec![0.0; rows * cols];
    for i in 0..p {
        for j in 0..q {
            let s = a.get(i, j);
            if s == 0.0 {
                continue;
            }
            for k in 0..m {
                let dst = (i * m + k) * cols + j * n;
                for (l, &v) in b.row(k).iter().enumerate() {
                    data[dst + l] = s * v;
                }
            }
        }
    }
    DenseMatrix::new(rows, cols, data)
}

/// Kronecker product of two vectors.
pub fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// `v ⊗ v ⊗ ... ⊗ v` with `n` factors.
pub fn kron_vec_power(v: &[f64], n: usize) -> Vec<f64> {
    (1..n).fold(v.to_vec(), |acc, _| kron_vec(&acc, v))
}

/// Column-wise Kronecker product.
pub fn khatri_rao(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.cols() {
        return invalid(format!(
            "khatri-rao needs equal column counts, got {} and {}",
            a.cols(),
            b.cols()
        ));
    }
    let (p, m, q) = (a.rows(), b.rows(), a.cols());
    let rows = p
        .checked_mul(m)
        .ok_or_else(|| crate::Error::Guard("khatri-rao row overflow".into()))?;
    check_entries(rows, q, "khatri-rao product")?;
    let mut data = vec![0.0; rows * q];
    for i in 0..p {
        for k in 0..m {
            let dst = (i * m + k) * q;
            for j in 0..q {
                data[dst + j] = a.get(i, j) * b.get(k, j);
            }
        }
    }
    DenseMatrix::new(rows, q, data)
}

/// `A^{⊙n}`: the `p^n x q` n-gram matrix.
pub fn ngram_matrix(a: &DenseMatrix, n: usize) -> Result<DenseMatrix> {
    if n == 0 {
        return invalid("n-gram arity must be at least 1");
    }
    let rows = checked_pow(a.rows(), n)
        .ok_or_else(|| crate::Error::Guard(format!("p^n overflows for p={}, n={n}", a.rows())))?;
    check_entries(rows, a.cols(), "n-gram matrix")?;
    let mut acc = a.clone();
    for _ in 1..n {
        acc = khatri_rao(&acc, a)?;
    }
    Ok(acc)
}

/// `a ⊗ a ⊗ ... ⊗ a` with `r` factors; `r = 0` gives the 1x1 identity.
pub fn kron_power(a: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    let mut acc = DenseMatrix::identity(1);
    for _ in 0..r {
        acc = kronecker(&acc, a)?;
    }
    Ok(acc)
}

/// `A^{⊙n}` with one row per sorted multiset of `[p]^n`, lexicographic.
/// Returns the matrix and the representative tuple of every row.
pub fn restricted_ngram_matrix(
    a: &DenseMatrix,
    n: usize,
) -> Result<(DenseMatrix, Vec<Vec<usize>>)> {
    if n == 0 {
        return invalid("n-gram arity must be at least 1");
    }
    let reps = multisets(a.rows(), n);
    check_entries(reps.len(), a.cols(), "restricted n-gram matrix")?;
    let m = DenseMatrix::from_fn(reps.len(), a.cols(), |r, j| {
        reps[r].iter().map(|&i| a.get(i, j)).product()
    });
    Ok((m, reps))
}

/// Row index in `A^{⊙n}` of a tuple.
pub fn ngram_row(tuple: &[usize], p: usize) -> usize {
    tuple_index(tuple, p)
}

pub fn vec_of(t: &DenseTensor) -> Vec<f64> {
    t.data().to_vec()
}

pub fn ten_of(v: &[f64], shape: &[usize]) -> Result<DenseTensor> {
    DenseTensor::new(shape.to_vec(), v.to_vec())
}
