use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::combin::{checked_pow, tuple_of_index};
use crate::error::{invalid, Result};
use crate::tensalg::{kron_vec_power, DenseMatrix};

const SIMPLEX_TOL: f64 = 1e-9;

fn check_simplex(w: &[f64], what: &str) -> Result<()> {
    if w.is_empty() {
        return invalid(format!("{what} is empty"));
    }
    if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return invalid(format!("{what} has a negative or non-finite entry"));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return invalid(format!("{what} sums to {s}, not 1"));
    }
    Ok(())
}

/// `M_2r(h) = E[(h^{⊗r})(h^{⊗r})^T]`, a `q^r x q^r` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenMoment {
    r: usize,
    q: usize,
    matrix: DenseMatrix,
}

impl HiddenMoment {
    pub fn new(q: usize, r: usize, matrix: DenseMatrix) -> Result<Self> {
        let dim = checked_pow(q, r);
        if r == 0 || dim != Some(matrix.rows()) || matrix.rows() != matrix.cols() {
            return invalid(format!(
                "hidden moment for q = {q}, r = {r} must be q^r square, got {}x{}",
                matrix.rows(),
                matrix.cols()
            ));
        }
        Ok(Self { r, q, matrix })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }
}

/// Distribution of the topic proportions `h` on the simplex.
#[derive(Clone, Debug, PartialEq)]
pub enum HiddenPrior {
    /// Finite mixture of simplex points.
    Discrete { atoms: Vec<Vec<f64>>, probs: Vec<f64> },
    Dirichlet { alpha: Vec<f64> },
}

impl HiddenPrior {
    pub fn discrete(atoms: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if atoms.len() != probs.len() {
            return invalid("atom and probability counts differ");
        }
        check_simplex(&probs, "atom probabilities")?;
        let q = atoms.first().map_or(0, Vec::len);
        for a in &atoms {
            if a.len() != q {
                return invalid("atoms have different lengths");
            }
            check_simplex(a, "atom")?;
        }
        Ok(HiddenPrior::Discrete { atoms, probs })
    }

    /// `h = e_i` with probability `w_i` (one topic per document).
    pub fn vertices(weights: &[f64]) -> Result<Self> {
        check_simplex(weights, "topic weights")?;
        let q = weights.len();
        let atoms = (0..q)
            .map(|i| (0..q).map(|k| if k == i { 1.0 } else { 0.0 }).collect())
            .collect();
        Ok(HiddenPrior::Discrete {
            atoms,
            probs: weights.to_vec(),
        })
    }

    pub fn uniform_vertices(q: usize) -> Result<Self> {
        Self::vertices(&vec![1.0 / q as f64; q])
    }

    pub fn point(q: usize, i: usize) -> Result<Self> {
        if i >= q {
            return invalid(format!("topic {i} outside [0, {q})"));
        }
        let mut w = vec![0.0; q];
        w[i] = 1.0;
        Self::vertices(&w)
    }

    pub fn dirichlet(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return invalid("dirichlet parameters must be positive");
        }
        Ok(HiddenPrior::Dirichlet { alpha })
    }

    /// Parse `uniform`, `discrete:w1,...`, `point:i`, `dirichlet:a` or
    /// `dirichlet:a1,...` for `q` topics.
    pub fn parse_spec(spec: &str, q: usize) -> Result<Self> {
        let spec = spec.trim();
        let floats = |v: &str| {
            crate::kv::parse_list::<f64>(v)
                .map_err(|_| crate::Error::InvalidInput(format!("bad number list {v}")))
        };
        if spec == "uniform" {
            return Self::uniform_vertices(q);
        }
        if let Some(rest) = spec.strip_prefix("discrete:") {
            let w = floats(rest)?;
            if w.len() != q {
                return invalid(format!("{} weights for q = {q}", w.len()));
            }
            return Self::vertices(&w);
        }
        if let Some(rest) = spec.strip_prefix("point:") {
            let i = rest
                .trim()
                .parse()
                .map_err(|_| crate::Error::InvalidInput(format!("bad topic index {rest}")))?;
            return Self::point(q, i);
        }
        if let Some(rest) = spec.strip_prefix("dirichlet:") {
            let a = floats(rest)?;
            return match a.len() {
                1 => Self::dirichlet(vec![a[0]; q]),
                len if len == q => Self::dirichlet(a),
                len => invalid(format!("{len} dirichlet parameters for q = {q}")),
            };
        }
        invalid(format!("unknown prior spec {spec}"))
    }

    pub fn q(&self) -> usize {
        match self {
            HiddenPrior::Discrete { atoms, .. } => atoms.first().map_or(0, Vec::len),
            HiddenPrior::Dirichlet { alpha } => alpha.len(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            HiddenPrior::Discrete { atoms, probs } => atoms[sample_index(probs, rng)].clone(),
            HiddenPrior::Dirichlet { alpha } => {
                let g: Vec<f64> = alpha
                    .iter()
                    .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
                    .collect();
                let s: f64 = g.iter().sum();
                g.into_iter().map(|x| x / s).collect()
            }
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        match self {
            HiddenPrior::Discrete { atoms, probs } => {
                let mut m = vec![0.0; self.q()];
                for (a, &w) in atoms.iter().zip(probs) {
                    for (mi, &ai) in m.iter_mut().zip(a) {
                        *mi += w * ai;
                    }
                }
                m
            }
            HiddenPrior::Dirichlet { alpha } => {
                let s: f64 = alpha.iter().sum();
                alpha.iter().map(|a| a / s).collect()
            }
        }
    }

    /// `E[h_{i_1} ... h_{i_k}]` when available in closed form: any order for
    /// discrete priors, order at most two for Dirichlet.
    pub fn raw_moment(&self, idx: &[usize]) -> Option<f64> {
        match self {
            HiddenPrior::Discrete { atoms, probs } => Some(
                atoms
                    .iter()
                    .zip(probs)
                    .map(|(a, &w)| w * idx.iter().map(|&i| a[i]).product::<f64>())
                    .sum(),
            ),
            HiddenPrior::Dirichlet { alpha } => {
                let a0: f64 = alpha.iter().sum();
                match idx {
                    [] => Some(1.0),
                    [i] => Some(alpha[*i] / a0),
                    [i, j] => {
                        let diag = if i == j { alpha[*i] } else { 0.0 };
                        Some((alpha[*i] * alpha[*j] + diag) / (a0 * (a0 + 1.0)))
                    }
                    _ => None,
                }
            }
        }
    }

    /// Exact `M_2r(h)`; errors when no closed form is available.
    pub fn hidden_moment(&self, r: usize) -> Result<HiddenMoment> {
        let q = self.q();
        match self {
            HiddenPrior::Discrete { atoms, probs } => {
                let dim = dense_dim(q, r)?;
                let mut m = vec![0.0; dim * dim];
                for (a, &w) in atoms.iter().zip(probs) {
                    let v = kron_vec_power(a, r);
                    for (i, &vi) in v.iter().enumerate() {
                        if vi == 0.0 {
                            continue;
                        }
                        for (j, &vj) in v.iter().enumerate() {
                            m[i * dim + j] += w * vi * vj;
                        }
                    }
                }
                HiddenMoment::new(q, r, DenseMatrix::new(dim, dim, m)?)
            }
            HiddenPrior::Dirichlet { .. } if r == 1 => {
                let m = DenseMatrix::from_fn(q, q, |i, j| self.raw_moment(&[i, j]).expect("order two"));
                HiddenMoment::new(q, 1, m)
            }
            HiddenPrior::Dirichlet { .. } => invalid(
                "dirichlet hidden moments with r >= 2 are only available by Monte Carlo",
            ),
        }
    }
}

fn dense_dim(q: usize, r: usize) -> Result<usize> {
    if r == 0 {
        return invalid("r must be at least 1");
    }
    match checked_pow(q, r) {
        Some(d) if d <= super::MAX_MOMENT_DIM => Ok(d),
        _ => crate::error::guard(format!("q^r exceeds {} for q = {q}, r = {r}", super::MAX_MOMENT_DIM)),
    }
}

/// Inverse-CDF draw from a probability vector.
pub(crate) fn sample_index<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &x) in w.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    // rounding left a sliver above the last cumulative sum
    w.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// `M_2r(h)` for `h = e_i` with probability `w_i`: diagonal with `w_i` at `(i, ..., i)`.
pub fn hidden_moment_discrete(weights: &[f64], r: usize) -> Result<HiddenMoment> {
    HiddenPrior::vertices(weights)?.hidden_moment(r)
}

/// Monte Carlo average of `(h^{⊗r})(h^{⊗r})^T` over `num_samples` draws.
pub fn hidden_moment_empirical(
    prior: &HiddenPrior,
    r: usize,
    num_samples: usize,
    seed: u64,
) -> Result<HiddenMoment> {
    if num_samples == 0 {
        return invalid("num_samples must be positive");
    }
    let q = prior.q();
    let dim = dense_dim(q, r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; dim * dim];
    for _ in 0..num_samples {
        let v = kron_vec_power(&prior.sample(&mut rng), r);
        for (i, &vi) in v.iter().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                acc[i * dim + j] += vi * vj;
            }
        }
    }
    let scale = 1.0 / num_samples as f64;
    acc.iter_mut().for_each(|x| *x *= scale);
    HiddenMoment::new(q, r, DenseMatrix::new(dim, dim, acc)?)
}

/// Row/column multi-index of a `q^r` position.
pub(crate) fn block_tuple(idx: usize, q: usize, r: usize) -> Vec<usize> {
    tuple_of_index(idx, q, r)
}
