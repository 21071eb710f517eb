use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::matgraph::{random_bipartite_graph_with, BipartiteGraph};
use crate::tensalg::DenseMatrix;

/// How many nonzeros each column receives.
#[derive(Clone, Debug, PartialEq)]
pub enum DegreeSpec {
    Fixed(usize),
    PerColumn(Vec<usize>),
    /// Each column draws its degree uniformly from the list.
    Choice(Vec<usize>),
}

impl DegreeSpec {
    pub fn resolve(&self, q: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
        match self {
            DegreeSpec::Fixed(d) => Ok(vec![*d; q]),
            DegreeSpec::PerColumn(ds) if ds.len() == q => Ok(ds.clone()),
            DegreeSpec::PerColumn(ds) => invalid(format!("{} degrees given for q = {q}", ds.len())),
            DegreeSpec::Choice(opts) if opts.is_empty() => invalid("empty degree choice list"),
            DegreeSpec::Choice(opts) => Ok((0..q)
                .map(|_| opts[rng.random_range(0..opts.len())])
                .collect()),
        }
    }

    /// Parse `3`, `2,3,2` (per column) or `choice:2,3`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let list = |v: &str| {
            crate::kv::parse_list::<usize>(v)
                .map_err(|_| crate::Error::InvalidInput(format!("bad degree list {v}")))
        };
        if let Some(rest) = s.strip_prefix("choice:") {
            return Ok(DegreeSpec::Choice(list(rest)?));
        }
        let ds = list(s)?;
        Ok(if ds.len() == 1 {
            DegreeSpec::Fixed(ds[0])
        } else {
            DegreeSpec::PerColumn(ds)
        })
    }
}

/// Distribution of nonzero entries before column normalization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntryLaw {
    pub low: f64,
    pub high: f64,
    pub random_sign: bool,
}

impl Default for EntryLaw {
    fn default() -> Self {
        Self {
            low: 0.5,
            high: 1.5,
            random_sign: false,
        }
    }
}

impl EntryLaw {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let v = if self.high > self.low {
            rng.random_range(self.low..self.high)
        } else {
            self.low
        };
        if self.random_sign && rng.random::<bool>() {
            -v
        } else {
            v
        }
    }
}

/// A topic-word matrix in canonical form (unit-norm columns) with its support.
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationStructure {
    matrix: DenseMatrix,
    support: BipartiteGraph,
    degrees: Vec<usize>,
}

impl PopulationStructure {
    /// Normalize every column to unit norm. Zero columns are rejected.
    pub fn from_matrix(m: &DenseMatrix) -> Result<Self> {
        let mut data = m.data().to_vec();
        let (p, q) = (m.rows(), m.cols());
        for j in 0..q {
            let norm = (0..p).map(|i| m.get(i, j).powi(2)).sum::<f64>().sqrt();
            if norm == 0.0 {
                return invalid(format!("column {j} is zero"));
            }
            for i in 0..p {
                data[i * q + j] /= norm;
            }
        }
        let matrix = DenseMatrix::new(p, q, data)?;
        let support = BipartiteGraph::from_support(&matrix);
        let degrees = support.degrees();
        Ok(Self {
            matrix,
            support,
            degrees,
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn support(&self) -> &BipartiteGraph {
        &self.support
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn d_min(&self) -> usize {
        self.degrees.iter().copied().min().unwrap_or(0)
    }

    pub fn d_max(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn p(&self) -> usize {
        self.matrix.rows()
    }

    pub fn q(&self) -> usize {
        self.matrix.cols()
    }

    /// Columns rescaled to probability vectors. Requires nonnegative entries.
    pub fn stochastic_matrix(&self) -> Result<DenseMatrix> {
        let (p, q) = (self.p(), self.q());
        if self.matrix.data().iter().any(|&v| v < 0.0) {
            return invalid("negative entries cannot be rescaled to word distributions");
        }
        let sums: Vec<f64> = (0..q)
            .map(|j| (0..p).map(|i| self.matrix.get(i, j)).sum())
            .collect();
        Ok(DenseMatrix::from_fn(p, q, |i, j| self.matrix.get(i, j) / sums[j]))
    }
}

/// Random `p x q` structure: column `j` gets `d_j` uniformly placed nonzeros
/// drawn from `law`, then the matrix is put in canonical form.
pub fn random_population_structure(
    p: usize,
    q: usize,
    degrees: &DegreeSpec,
    law: &EntryLaw,
    seed: u64,
) -> Result<PopulationStructure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_population_structure_with(p, q, degrees, law, &mut rng)
}

pub(crate) fn random_population_structure_with(
    p: usize,
    q: usize,
    degrees: &DegreeSpec,
    law: &EntryLaw,
    rng: &mut ChaCha8Rng,
) -> Result<PopulationStructure> {
    if !(law.low > 0.0 && law.high >= law.low && law.high.is_finite()) {
        return invalid(format!("entry law [{}, {}] must be positive", law.low, law.high));
    }
    let ds = degrees.resolve(q, rng)?;
    if let Some(&d) = ds.iter().find(|&&d| d == 0 || d > p) {
        return invalid(format!("degree {d} outside [1, {p}]"));
    }
    let g = random_bipartite_graph_with(p, &ds, rng)?;
    let mut m = DenseMatrix::zeros(p, q);
    for j in 0..q {
        for &i in g.neighbors(j) {
            m.set(i, j, law.draw(rng));
        }
    }
    PopulationStructure::from_matrix(&m)
}
