use std::collections::BTreeMap;

use crate::combin::{checked_pow, tuple_of_index};
use crate::error::{guard, invalid, Result};
use crate::tensalg::{
    kron_power, kron_vec, kronecker, ngram_matrix, DenseMatrix, DenseTensor, MAX_DENSE_ENTRIES,
};

use super::hidden::{block_tuple, HiddenMoment, HiddenPrior};
use super::MAX_MOMENT_DIM;

/// Observed moment `M^{(n)}_{2m}(x)` as a `p^m x p^m` matrix, with
/// `m = r n + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentMatrix {
    pub n: usize,
    pub r: usize,
    pub offset: usize,
    pub p: usize,
    pub matrix: DenseMatrix,
}

impl MomentMatrix {
    /// Words per half-document, `m = r n + offset`.
    pub fn half_order(&self) -> usize {
        self.r * self.n + self.offset
    }
}

fn moment_dim(p: usize, m: usize) -> Result<usize> {
    match checked_pow(p, m) {
        Some(d) if d <= MAX_MOMENT_DIM => Ok(d),
        _ => guard(format!(
            "dense moment needs p^{m} rows for p = {p}, above the cap {MAX_MOMENT_DIM}"
        )),
    }
}

/// `B M_2r(h) B^T` with `B = (A^{⊙n})^{⊗r}`.
pub fn synth_moment(a: &DenseMatrix, mh: &HiddenMoment, n: usize, r: usize) -> Result<MomentMatrix> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    if mh.r() != r {
        return invalid(format!("hidden moment has r = {}, requested r = {r}", mh.r()));
    }
    if mh.q() != a.cols() {
        return invalid(format!("hidden moment has q = {}, matrix has {} columns", mh.q(), a.cols()));
    }
    moment_dim(a.rows(), r * n)?;
    let b = kron_power(&ngram_matrix(a, n)?, r)?;
    let matrix = b.matmul(mh.matrix())?.matmul(&b.transpose())?;
    Ok(MomentMatrix {
        n,
        r,
        offset: 0,
        p: a.rows(),
        matrix,
    })
}

/// Single-topic form `A^{⊙m} Diag(E[h]) (A^{⊙m})^T`: all `2m` words share one topic.
pub fn synth_moment_single_topic(a: &DenseMatrix, mean_h: &[f64], m: usize) -> Result<MomentMatrix> {
    if m == 0 {
        return invalid("m must be at least 1");
    }
    if mean_h.len() != a.cols() {
        return invalid("mean topic vector length differs from column count");
    }
    moment_dim(a.rows(), m)?;
    let b = ngram_matrix(a, m)?;
    let d = DenseMatrix::from_fn(a.cols(), a.cols(), |i, j| if i == j { mean_h[i] } else { 0.0 });
    let matrix = b.matmul(&d)?.matmul(&b.transpose())?;
    Ok(MomentMatrix {
        n: m,
        r: 1,
        offset: 0,
        p: a.rows(),
        matrix,
    })
}

/// Moment of order `2(r n + s)` for `1 <= s <= n / 2`. Each half-document cuts
/// through a topic block, so the left factor is `(A^{⊙n})^{⊗r} ⊗ A^{⊙s}`, the
/// right factor is `A^{⊙(n-s)} ⊗ (A^{⊙n})^{⊗(r-1)} ⊗ A^{⊙2s}`, and the hidden
/// matrix couples the shared topic: entry `((i_1..i_{r+1}), (j_1..j_{r+1}))` is
/// `E[h_{i_1} .. h_{i_{r+1}} h_{j_2} .. h_{j_{r+1}}]` when `i_{r+1} = j_1`, else 0.
pub fn synth_moment_offset(
    a: &DenseMatrix,
    prior: &HiddenPrior,
    n: usize,
    r: usize,
    s: usize,
) -> Result<MomentMatrix> {
    if s == 0 {
        return synth_moment(a, &prior.hidden_moment(r)?, n, r);
    }
    if r == 0 || n == 0 {
        return invalid("n and r must be at least 1");
    }
    if 2 * s > n {
        return invalid(format!("offset s = {s} must satisfy 1 <= s <= n/2 for n = {n}"));
    }
    let q = a.cols();
    if prior.q() != q {
        return invalid("prior dimension differs from column count");
    }
    moment_dim(a.rows(), r * n + s)?;
    let an = ngram_matrix(a, n)?;
    let left = kronecker(&kron_power(&an, r)?, &ngram_matrix(a, s)?)?;
    let right = kronecker(
        &kronecker(&ngram_matrix(a, n - s)?, &kron_power(&an, r - 1)?)?,
        &ngram_matrix(a, 2 * s)?,
    )?;
    let dim = checked_pow(q, r + 1).filter(|&d| d <= MAX_MOMENT_DIM).ok_or_else(|| {
        crate::Error::Guard(format!("q^(r+1) exceeds {MAX_MOMENT_DIM}"))
    })?;
    let mut hidden = DenseMatrix::zeros(dim, dim);
    for row in 0..dim {
        let it = tuple_of_index(row, q, r + 1);
        for col in 0..dim {
            let jt = tuple_of_index(col, q, r + 1);
            if it[r] != jt[0] {
                continue;
            }
            let idx: Vec<usize> = it.iter().chain(&jt[1..]).copied().collect();
            let v = prior.raw_moment(&idx).ok_or_else(|| {
                crate::Error::InvalidInput(format!(
                    "prior has no closed-form moment of order {}",
                    idx.len()
                ))
            })?;
            hidden.set(row, col, v);
        }
    }
    let matrix = left.matmul(&hidden)?.matmul(&right.transpose())?;
    Ok(MomentMatrix {
        n,
        r,
        offset: s,
        p: a.rows(),
        matrix,
    })
}

/// Sparse Tucker core: nonzero only on tuples whose consecutive `n`-blocks are constant.
#[derive(Clone, Debug, PartialEq)]
pub struct CoreTensor {
    pub order: usize,
    pub dim: usize,
    pub nonzeros: BTreeMap<Vec<usize>, f64>,
}

impl CoreTensor {
    pub fn is_diagonal(&self) -> bool {
        self.nonzeros.keys().all(|t| t.windows(2).all(|w| w[0] == w[1]))
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        let len = checked_pow(self.dim, self.order)
            .filter(|&l| l <= MAX_DENSE_ENTRIES)
            .ok_or_else(|| crate::Error::Guard("core tensor too large to densify".into()))?;
        let mut data = vec![0.0; len];
        for (t, &v) in &self.nonzeros {
            data[t.iter().fold(0, |acc, &i| acc * self.dim + i)] = v;
        }
        DenseTensor::new(vec![self.dim; self.order], data)
    }
}

/// `S_r` of order `2 r n`: the entry at a tuple whose blocks are
/// `(i_1)^n .. (i_r)^n (j_1)^n .. (j_r)^n` equals `M_2r(h)[(i_1..i_r), (j_1..j_r)]`.
pub fn core_tensor(mh: &HiddenMoment, n: usize, r: usize) -> Result<CoreTensor> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    if mh.r() != r {
        return invalid(format!("hidden moment has r = {}, requested r = {r}", mh.r()));
    }
    let q = mh.q();
    let dim = mh.matrix().rows();
    let mut nonzeros = BTreeMap::new();
    for row in 0..dim {
        for col in 0..dim {
            let v = mh.matrix().get(row, col);
            if v == 0.0 {
                continue;
            }
            let tuple: Vec<usize> = block_tuple(row, q, r)
                .into_iter()
                .chain(block_tuple(col, q, r))
                .flat_map(|i| std::iter::repeat_n(i, n))
                .collect();
            nonzeros.insert(tuple, v);
        }
    }
    Ok(CoreTensor {
        order: 2 * r * n,
        dim: q,
        nonzeros,
    })
}

/// Diagonal core of the single-topic form: `E[h_i]` on `(i, ..., i)`.
pub fn single_topic_core(mean_h: &[f64], order: usize) -> CoreTensor {
    let nonzeros = mean_h
        .iter()
        .enumerate()
        .filter(|(_, &w)| w != 0.0)
        .map(|(i, &w)| (vec![i; order], w))
        .collect();
    CoreTensor {
        order,
        dim: mean_h.len(),
        nonzeros,
    }
}

/// Evaluate `[[S; A, ..., A]]` as a dense tensor of shape `[p; order]`.
pub fn tucker_eval(core: &CoreTensor, a: &DenseMatrix) -> Result<DenseTensor> {
    if a.cols() != core.dim {
        return invalid("factor column count differs from core dimension");
    }
    let p = a.rows();
    let len = checked_pow(p, core.order)
        .filter(|&l| l <= MAX_DENSE_ENTRIES)
        .ok_or_else(|| crate::Error::Guard("tucker evaluation too large".into()))?;
    let cols = a.columns();
    let mut data = vec![0.0; len];
    for (t, &v) in &core.nonzeros {
        let outer = t.iter().fold(vec![v], |acc, &i| kron_vec(&acc, &cols[i]));
        for (d, o) in data.iter_mut().zip(outer) {
            *d += o;
        }
    }
    DenseTensor::new(vec![p; core.order], data)
}
