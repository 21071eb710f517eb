//! Exact-moment recovery of the topic-word matrix at desk scale.
//!
//! The columns of `A^{⊙n}` are the sparsest rank-one vectors in the column
//! space of the observed moment. Supports of such vectors are Cartesian powers
//! `s^n`, so the search runs over word subsets `s` with `|s| <= d_max`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::combin::{binomial, combination_rank, combinations, derive_seed, tuple_index, tuple_of_index};
use crate::error::{guard, invalid, Error, Result};
use crate::moments::{HiddenMoment, MomentMatrix, PopulationStructure};
use crate::tensalg::{
    column_space_na, is_rank_one, kron_power, kron_vec_power, ngram_matrix, sorted_svd, DenseMatrix,
    DenseTensor, DEFAULT_TOL,
};

#[derive(Clone, Copy, Debug)]
pub struct RecoverOptions {
    /// Relative tolerance for the column-space rank of the moment.
    pub tol: f64,
    /// Relative tolerance for rank-one and subspace-membership tests.
    pub membership_tol: f64,
    /// Cap on the number of word supports examined.
    pub max_supports: u128,
    /// Seed for the random contractions that split multi-dimensional intersections.
    pub seed: u64,
}

impl Default for RecoverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            membership_tol: 1e-7,
            max_supports: 1 << 20,
            seed: 0x6e67_7261_6d69_64,
        }
    }
}

/// A rank-one vector of `R^{p^n}` found in the moment column space.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub support: Vec<usize>,
    /// Unit norm, largest-magnitude entry positive, exactly zero off `support^n`.
    pub vector: Vec<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct SparseSearch {
    pub candidates: Vec<Candidate>,
    /// Largest support size examined.
    pub d_max_used: usize,
    /// Supports whose intersection could not be resolved, with the reason.
    pub rejected: Vec<(Vec<usize>, String)>,
    pub column_space_dim: usize,
}

/// Orthonormal basis (columns) of `Col(M)`.
pub fn column_space_basis(m: &DenseMatrix, tol: f64) -> DenseMatrix {
    DenseMatrix::from_nalgebra(&column_space_na(&m.to_nalgebra(), tol))
}

fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// Null space of `r` with an absolute singular-value threshold.
fn null_space_abs(r: &DMatrix<f64>, thresh: f64) -> DMatrix<f64> {
    let cols = r.ncols();
    if r.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    let padded = if r.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (r.nrows(), cols)).copy_from(r);
        p
    } else {
        r.clone()
    };
    let svd = sorted_svd(&padded);
    let rank = svd.s.iter().filter(|&&x| x > thresh).count();
    svd.v.columns(rank, cols - rank).into_owned()
}

enum Outcome {
    Nothing,
    Found(Vec<Vec<f64>>),
    Rejected(String),
}

struct SearchContext<'a> {
    basis: &'a DMatrix<f64>,
    p: usize,
    n: usize,
    opts: RecoverOptions,
}

impl SearchContext<'_> {
    fn examine(&self, s: &[usize]) -> Outcome {
        let (p, n) = (self.p, self.n);
        let t = s.len();
        let dim = self.basis.nrows();
        let inside: Vec<usize> = (0..t.pow(n as u32))
            .map(|k| {
                let local = tuple_of_index(k, t, n);
                tuple_index(&local.iter().map(|&i| s[i]).collect::<Vec<_>>(), p)
            })
            .collect();
        let mut is_in = vec![false; dim];
        for &i in &inside {
            is_in[i] = true;
        }
        let outside: Vec<usize> = (0..dim).filter(|&i| !is_in[i]).collect();
        let r = self.basis.select_rows(outside.iter());
        let x = null_space_abs(&r, self.opts.membership_tol);
        let z = x.ncols();
        if z == 0 {
            return Outcome::Nothing;
        }
        // W restricted to s^n, one column per basis vector of the intersection
        let w = (self.basis * &x).select_rows(inside.iter());
        let local: Vec<Vec<f64>> = if z == 1 {
            vec![w.column(0).iter().copied().collect()]
        } else if n >= 2 && z <= t {
            match self.split_intersection(&w, t, s) {
                Ok(v) => v,
                Err(reason) => return Outcome::Rejected(reason),
            }
        } else {
            return Outcome::Rejected(format!("intersection of dimension {z} on a support of size {t}"));
        };
        let mut found = Vec::new();
        for v in local {
            let full = embed(&v, s, p, n);
            if full.iter().all(|&x| x == 0.0) {
                continue;
            }
            match is_rank_one(&full, p, n, self.opts.membership_tol) {
                Ok(true) => {}
                _ => continue,
            }
            // membership in the intersection (and hence in Col(M))
            let vv = DVector::from_column_slice(&v);
            let proj = &w * (w.transpose() * &vv);
            let resid = (&vv - proj).norm() / vv.norm();
            if resid <= self.opts.membership_tol {
                found.push(full);
            }
        }
        if found.is_empty() && z > 1 {
            return Outcome::Rejected(format!("no rank-one vectors in an intersection of dimension {z}"));
        }
        Outcome::Found(found)
    }

    /// Split a `z`-dimensional span of `t^n` tensors into its rank-one members
    /// by simultaneous diagonalization of two random contractions.
    fn split_intersection(&self, w: &DMatrix<f64>, t: usize, s: &[usize]) -> std::result::Result<Vec<Vec<f64>>, String> {
        let n = self.n;
        let z = w.ncols();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            self.opts.seed,
            &[t as u64, combination_rank(s, self.p) as u64],
        ));
        let g: Vec<Vec<f64>> = (2..n).map(|_| (0..t).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let slices: Vec<DMatrix<f64>> = (0..z)
            .map(|c| {
                let col: Vec<f64> = w.column(c).iter().copied().collect();
                contract_to_matrix(&col, t, &g)
            })
            .collect();
        let combo = |rng: &mut ChaCha8Rng| {
            let coef: Vec<f64> = (0..z).map(|_| rng.random_range(-1.0..1.0)).collect();
            slices.iter().zip(&coef).fold(DMatrix::zeros(t, t), |acc, (m, &c)| acc + m * c)
        };
        let pm = combo(&mut rng);
        let qm = combo(&mut rng);
        let mut stacked = DMatrix::zeros(t, 2 * t);
        stacked.view_mut((0, 0), (t, t)).copy_from(&pm);
        stacked.view_mut((0, t), (t, t)).copy_from(&qm);
        let svd = sorted_svd(&stacked);
        if svd.s.len() < z || svd.s[z - 1] <= self.opts.membership_tol * svd.s[0] {
            return Err("contracted slices do not span the expected dimension".into());
        }
        let us = svd.u.columns(0, z).into_owned();
        let pr = us.transpose() * &pm * &us;
        let qr = us.transpose() * &qm * &us;
        let qinv = qr.try_inverse().ok_or("singular contraction")?;
        let k = &pr * qinv;
        let eig = faer::Mat::<f64>::from_fn(z, z, |i, j| k[(i, j)])
            .eigenvalues()
            .map_err(|_| "eigenvalue iteration did not converge")?;
        let scale = eig.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut lambdas = Vec::with_capacity(z);
        for c in &eig {
            if c.im.abs() > 1e-8 * scale {
                return Err("complex eigenvalues in the split".into());
            }
            lambdas.push(c.re);
        }
        lambdas.sort_by(f64::total_cmp);
        if lambdas.windows(2).any(|w| (w[1] - w[0]).abs() <= 1e-8 * scale) {
            return Err("repeated eigenvalues in the split".into());
        }
        let mut out = Vec::with_capacity(z);
        for &lam in &lambdas {
            let shifted = &k - DMatrix::identity(z, z) * lam;
            let null = sorted_svd(&shifted);
            let gv = null.v.column(z - 1).into_owned();
            let a = &us * gv;
            out.push(kron_vec_power(a.as_slice(), n));
        }
        Ok(out)
    }
}

/// Contract modes 3..n of a `t^n` tensor with `g`, giving a `t x t` matrix.
fn contract_to_matrix(v: &[f64], t: usize, g: &[Vec<f64>]) -> DMatrix<f64> {
    let mut cur = v.to_vec();
    // the last mode is fastest, so contract from the back
    for gk in g.iter().rev() {
        cur = cur.chunks(t).map(|c| c.iter().zip(gk).map(|(x, y)| x * y).sum()).collect();
    }
    let m = DMatrix::from_row_slice(t, t, &cur);
    (&m + m.transpose()) * 0.5
}

/// Place a `t^n` vector on the rows `s^n` of `R^{p^n}`.
fn embed(v: &[f64], s: &[usize], p: usize, n: usize) -> Vec<f64> {
    let t = s.len();
    let mut out = vec![0.0; p.pow(n as u32)];
    for (k, &x) in v.iter().enumerate() {
        let local = tuple_of_index(k, t, n);
        out[tuple_index(&local.iter().map(|&i| s[i]).collect::<Vec<_>>(), p)] = x;
    }
    out
}

/// Search supports `s ⊆ [p]` by increasing size (lexicographic within a size)
/// for rank-one vectors of `Col(M)` vanishing off `s^n`. With `d_max = None`
/// the size grows until the candidate count reaches `rank(M)`.
pub fn find_sparse_rank1_columns(
    m: &MomentMatrix,
    n: usize,
    p: usize,
    d_max: Option<usize>,
    opts: &RecoverOptions,
) -> Result<SparseSearch> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    if m.r != 1 || m.offset != 0 || m.n != n || m.p != p {
        return invalid(format!(
            "recovery needs the 2n-th order moment (r = 1) for n = {n}, p = {p}; got n = {}, r = {}, p = {}",
            m.n, m.r, m.p
        ));
    }
    let limit = d_max.unwrap_or(p).min(p);
    if d_max.is_some() {
        let total: u128 = (1..=limit).map(|t| binomial(p, t)).sum();
        if total > opts.max_supports {
            return guard(format!("support search needs {total} supports (cap {})", opts.max_supports));
        }
    }
    let basis = column_space_na(&m.matrix.to_nalgebra(), opts.tol);
    let ctx = SearchContext {
        basis: &basis,
        p,
        n,
        opts: *opts,
    };
    let mut out = SparseSearch {
        column_space_dim: basis.ncols(),
        ..SparseSearch::default()
    };
    let words: Vec<usize> = (0..p).collect();
    let mut examined: u128 = 0;
    for t in 1..=limit {
        if d_max.is_none() && out.candidates.len() >= out.column_space_dim {
            break;
        }
        examined += binomial(p, t);
        if examined > opts.max_supports {
            return guard(format!("support search passed the cap of {} supports", opts.max_supports));
        }
        out.d_max_used = t;
        let supports = combinations(&words, t);
        let outcomes: Vec<Outcome> = supports.par_iter().map(|s| ctx.examine(s)).collect();
        for (s, o) in supports.into_iter().zip(outcomes) {
            match o {
                Outcome::Nothing => {}
                Outcome::Rejected(reason) => out.rejected.push((s, reason)),
                Outcome::Found(vs) => {
                    for mut v in vs {
                        normalize(&mut v);
                        canonical_sign(&mut v);
                        let dup = out
                            .candidates
                            .iter()
                            .any(|c| cosine(&c.vector, &v).abs() > 1.0 - 1e-8);
                        if !dup {
                            let support = support_of(&v, p, n);
                            out.candidates.push(Candidate { support, vector: v });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Words `i` such that the diagonal entry `(i, ..., i)` is nonzero.
fn support_of(v: &[f64], p: usize, n: usize) -> Vec<usize> {
    (0..p).filter(|&i| v[tuple_index(&vec![i; n], p)] != 0.0).collect()
}

/// Column-matching between a recovered and a reference matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    /// `permutation[i]` is the recovered column matched to reference column `i`.
    pub permutation: Vec<usize>,
    pub signs: Vec<f64>,
    pub per_column_error: Vec<f64>,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug)]
pub struct RecoveryResult {
    pub recovered: PopulationStructure,
    pub candidates_found: usize,
    pub d_max_used: usize,
    pub alignment: Option<Alignment>,
}

impl RecoveryResult {
    pub fn align_to(&mut self, reference: &DenseMatrix) -> Result<&Alignment> {
        self.alignment = Some(align_columns(self.recovered.matrix(), reference)?);
        Ok(self.alignment.as_ref().expect("just set"))
    }
}

/// Recover `A` (canonical form) from an exact `2n`-th order moment.
/// Fails unless exactly `q` candidates are found.
pub fn recover_structure(
    m: &MomentMatrix,
    n: usize,
    p: usize,
    q: usize,
    d_max: Option<usize>,
    opts: &RecoverOptions,
) -> Result<RecoveryResult> {
    let search = find_sparse_rank1_columns(m, n, p, d_max, opts)?;
    if search.candidates.len() != q {
        let mut msg = format!(
            "found {} rank-one candidates with supports up to size {}, expected q = {q} (column space dimension {})",
            search.candidates.len(),
            search.d_max_used,
            search.column_space_dim
        );
        if !search.rejected.is_empty() {
            msg.push_str(&format!("; {} supports unresolved, first {:?}: {}", search.rejected.len(), search.rejected[0].0, search.rejected[0].1));
        }
        return Err(Error::RecoveryFailed(msg));
    }
    let mut columns = Vec::with_capacity(q);
    for c in &search.candidates {
        let t = DenseTensor::new(vec![p; n], c.vector.clone())?;
        let unf = t.unfold(0)?.to_nalgebra();
        let svd = sorted_svd(&unf);
        let mut a: Vec<f64> = svd.u.column(0).iter().copied().collect();
        for (i, x) in a.iter_mut().enumerate() {
            if c.support.binary_search(&i).is_err() {
                *x = 0.0;
            }
        }
        normalize(&mut a);
        canonical_sign(&mut a);
        columns.push(a);
    }
    let recovered = PopulationStructure::from_matrix(&DenseMatrix::from_columns(p, &columns)?)?;
    Ok(RecoveryResult {
        recovered,
        candidates_found: search.candidates.len(),
        d_max_used: search.d_max_used,
        alignment: None,
    })
}

/// Optimal assignment (Hungarian) minimizing `sum cost[i][perm[i]]`.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    // 1-based potentials; way[j] is the previous column on the augmenting path
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[owner[j] - 1] = j - 1;
    }
    perm
}

/// Match recovered columns to reference columns up to permutation and sign,
/// minimizing total `1 - |cos|`, and report relative errors of unit columns.
pub fn align_columns(recovered: &DenseMatrix, reference: &DenseMatrix) -> Result<Alignment> {
    if (recovered.rows(), recovered.cols()) != (reference.rows(), reference.cols()) {
        return invalid(format!(
            "shape mismatch: {}x{} vs {}x{}",
            recovered.rows(),
            recovered.cols(),
            reference.rows(),
            reference.cols()
        ));
    }
    let unit = |m: &DenseMatrix| -> Result<Vec<Vec<f64>>> {
        m.columns()
            .into_iter()
            .map(|mut c| {
                if normalize(&mut c) == 0.0 {
                    invalid("zero column cannot be aligned")
                } else {
                    Ok(c)
                }
            })
            .collect()
    };
    let rec = unit(recovered)?;
    let refc = unit(reference)?;
    let cost: Vec<Vec<f64>> = refc
        .iter()
        .map(|a| rec.iter().map(|b| 1.0 - cosine(a, b).abs()).collect())
        .collect();
    let permutation = hungarian(&cost);
    let mut signs = Vec::with_capacity(refc.len());
    let mut per_column_error = Vec::with_capacity(refc.len());
    for (i, &j) in permutation.iter().enumerate() {
        let s = if cosine(&refc[i], &rec[j]) < 0.0 { -1.0 } else { 1.0 };
        let err = refc[i]
            .iter()
            .zip(&rec[j])
            .map(|(a, b)| (a - s * b).powi(2))
            .sum::<f64>()
            .sqrt();
        signs.push(s);
        per_column_error.push(err);
    }
    let max_rel_error = per_column_error.iter().copied().fold(0.0, f64::max);
    Ok(Alignment {
        permutation,
        signs,
        per_column_error,
        max_rel_error,
    })
}

fn pinv(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let svd = sorted_svd(m);
    let top = svd.s.first().copied().unwrap_or(0.0);
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (k, &sv) in svd.s.iter().enumerate() {
        if sv > tol * top {
            out += svd.v.column(k) * svd.u.column(k).transpose() / sv;
        }
    }
    out
}

/// `M_2r(h) = B^+ M (B^T)^+` with `B = (A^{⊙n})^{⊗r}` for a recovered `A`.
pub fn recover_hidden_moment(m: &MomentMatrix, a: &DenseMatrix, tol: f64) -> Result<HiddenMoment> {
    if m.offset != 0 {
        return invalid("hidden-moment recovery needs a moment without offset");
    }
    let b = kron_power(&ngram_matrix(a, m.n)?, m.r)?;
    if b.rows() != m.matrix.rows() {
        return invalid("recovered matrix does not match the moment dimensions");
    }
    let bp = pinv(&b.to_nalgebra(), tol);
    let h = &bp * m.matrix.to_nalgebra() * bp.transpose();
    let sym = (&h + h.transpose()) * 0.5;
    HiddenMoment::new(a.cols(), m.r, DenseMatrix::from_nalgebra(&sym))
}
