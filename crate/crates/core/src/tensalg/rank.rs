use nalgebra::DMatrix;

use crate::combin::{binomial, checked_pow, next_combination};
use crate::error::{guard, invalid, Result};

use super::dense::{DenseMatrix, DenseTensor};

/// Relative tolerance used for every rank decision unless overridden.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Thin SVD with singular values sorted in decreasing order.
pub(crate) struct SortedSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// nalgebra's bidiagonal SVD can return wrong factors for nearly rank-one
/// matrices with tiny asymmetries, so decompositions go through faer.
pub(crate) fn sorted_svd(m: &DMatrix<f64>) -> SortedSvd {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return SortedSvd {
            u: DMatrix::zeros(m.nrows(), 0),
            s: Vec::new(),
            v: DMatrix::zeros(m.ncols(), 0),
        };
    }
    let fm = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    match fm.thin_svd() {
        Ok(svd) => {
            let (u, v, s) = (svd.U(), svd.V(), svd.S().column_vector());
            SortedSvd {
                u: DMatrix::from_fn(m.nrows(), k, |i, j| u[(i, j)]),
                s: (0..k).map(|j| s[j]).collect(),
                v: DMatrix::from_fn(m.ncols(), k, |i, j| v[(i, j)]),
            }
        }
        Err(_) => nalgebra_sorted_svd(m, k),
    }
}

fn nalgebra_sorted_svd(m: &DMatrix<f64>, k: usize) -> SortedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    SortedSvd {
        u: DMatrix::from_fn(m.nrows(), k, |i, j| u[(i, order[j])]),
        s: order.iter().map(|&j| svd.singular_values[j]).collect(),
        v: DMatrix::from_fn(m.ncols(), k, |i, j| vt[(order[j], i)]),
    }
}

fn sorted_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows().min(m.ncols()) == 0 {
        return Vec::new();
    }
    let fm = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    fm.singular_values().unwrap_or_else(|_| sorted_svd(m).s)
}

fn count_above(s: &[f64], tol: f64) -> usize {
    let top = s.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > tol * top).count()
}

/// Singular values in decreasing order.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    sorted_singular_values(&a.to_nalgebra())
}

/// Number of singular values above `tol` times the largest one.
pub fn numeric_rank(a: &DenseMatrix, tol: f64) -> usize {
    count_above(&singular_values(a), tol)
}

pub(crate) fn numeric_rank_na(m: &DMatrix<f64>, tol: f64) -> usize {
    count_above(&sorted_singular_values(m), tol)
}

/// Orthonormal basis (as columns) of the right null space.
pub(crate) fn null_space_na(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (rows, cols) = (m.nrows(), m.ncols());
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    // zero rows leave the null space unchanged and make the thin V complete
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = sorted_svd(&padded);
    let rank = count_above(&svd.s, tol);
    svd.v.columns(rank, cols - rank).into_owned()
}

/// Orthonormal basis (as columns) of the column space.
pub(crate) fn column_space_na(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let svd = sorted_svd(m);
    let rank = count_above(&svd.s, tol);
    svd.u.columns(0, rank).into_owned()
}

/// Null-space basis of `c`, one basis vector per column.
pub fn null_space(c: &DenseMatrix, tol: f64) -> DenseMatrix {
    DenseMatrix::from_nalgebra(&null_space_na(&c.to_nalgebra(), tol))
}

/// True iff every mode unfolding of `ten_of(v, [p; n])` has numeric rank 1.
pub fn is_rank_one(v: &[f64], p: usize, n: usize, tol: f64) -> Result<bool> {
    if n == 0 {
        return invalid("tensor order must be at least 1");
    }
    if checked_pow(p, n) != Some(v.len()) {
        return invalid(format!("vector of length {} is not {p}^{n}", v.len()));
    }
    if v.iter().all(|&x| x == 0.0) {
        return invalid("rank of the zero tensor is not defined here");
    }
    if n == 1 {
        return Ok(true);
    }
    let t = DenseTensor::new(vec![p; n], v.to_vec())?;
    for mode in 0..n {
        if numeric_rank(&t.unfold(mode)?, tol) != 1 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Options for Kruskal-rank enumeration.
#[derive(Clone, Copy, Debug)]
pub struct KrankOptions {
    pub tol: f64,
    /// Upper bound on the number of column subsets examined.
    pub max_subsets: u128,
}

impl Default for KrankOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_subsets: 1 << 20,
        }
    }
}

fn has_zero_column(a: &DenseMatrix) -> bool {
    (0..a.cols()).any(|j| (0..a.rows()).all(|i| a.get(i, j) == 0.0))
}

/// Scan all k-subsets; returns the first dependent one, if any.
fn first_dependent_subset(a: &DMatrix<f64>, k: usize, tol: f64) -> Option<Vec<usize>> {
    let q = a.ncols();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let sub = a.select_columns(idx.iter());
        if numeric_rank_na(&sub, tol) < k {
            return Some(idx);
        }
        if !next_combination(&mut idx, q) {
            return None;
        }
    }
}

/// Largest k such that every k columns are numerically independent.
/// A zero column gives 0.
pub fn kruskal_rank(a: &DenseMatrix, opts: KrankOptions) -> Result<usize> {
    let q = a.cols();
    if q == 0 || has_zero_column(a) {
        return Ok(0);
    }
    let na = a.to_nalgebra();
    let top = numeric_rank_na(&na, opts.tol).min(q);
    let mut budget = opts.max_subsets;
    for k in 2..=top {
        let count = binomial(q, k);
        if count > budget {
            return guard(format!(
                "kruskal rank needs C({q},{k}) = {count} more subsets (remaining cap {budget})"
            ));
        }
        budget -= count;
        if first_dependent_subset(&na, k, opts.tol).is_some() {
            return Ok(k - 1);
        }
    }
    Ok(top)
}

/// Decide `krank(a) >= k` by checking only the k-subsets (independence is hereditary).
pub fn kruskal_rank_at_least(a: &DenseMatrix, k: usize, opts: KrankOptions) -> Result<bool> {
    if k == 0 {
        return Ok(true);
    }
    if k > a.cols() || k > a.rows() || has_zero_column(a) {
        return Ok(false);
    }
    let count = binomial(a.cols(), k);
    if count > opts.max_subsets {
        return guard(format!(
            "krank >= {k} needs C({},{k}) = {count} subsets (cap {})",
            a.cols(),
            opts.max_subsets
        ));
    }
    Ok(first_dependent_subset(&a.to_nalgebra(), k, opts.tol).is_none())
}

/// True iff the null space of `c` contains no fully dense vector: either it is
/// trivial or some coordinate vanishes on the whole basis.
pub fn has_null_space_property(c: &DenseMatrix, tol: f64) -> bool {
    let basis = null_space_na(&c.to_nalgebra(), tol);
    if basis.ncols() == 0 {
        return true;
    }
    (0..basis.nrows()).any(|i| basis.row(i).iter().all(|x| x.abs() <= tol))
}
