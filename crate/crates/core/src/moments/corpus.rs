use std::collections::HashMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::combin::{checked_pow, derive_seed, tuple_index};
use crate::error::{guard, invalid, Result};
use crate::kv::KvFile;
use crate::tensalg::DenseMatrix;

use super::hidden::{sample_index, HiddenPrior};
use super::population::{random_population_structure, DegreeSpec, EntryLaw, PopulationStructure};
use super::synth::MomentMatrix;
use super::MAX_MOMENT_DIM;

const SHARD_DOCS: usize = 4096;

/// Documents of equal length over a vocabulary of size `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub p: usize,
    pub docs: Vec<Vec<usize>>,
    /// Free-form `key=value` provenance, written as header comments.
    pub provenance: Vec<(String, String)>,
}

impl Corpus {
    pub fn new(p: usize, docs: Vec<Vec<usize>>) -> Result<Self> {
        let len = docs.first().map_or(0, Vec::len);
        for (k, d) in docs.iter().enumerate() {
            if d.len() != len {
                return invalid(format!("document {k} has length {}, expected {len}", d.len()));
            }
            if let Some(&w) = d.iter().find(|&&w| w >= p) {
                return invalid(format!("document {k} has word {w} outside [0, {p})"));
            }
        }
        Ok(Self {
            p,
            docs,
            provenance: Vec::new(),
        })
    }

    pub fn doc_len(&self) -> usize {
        self.docs.first().map_or(0, Vec::len)
    }

    /// One document per line, words separated by spaces; provenance as `# key=value`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# ngramid corpus\n# format_version=1\n");
        let _ = writeln!(out, "# p={}", self.p);
        for (k, v) in &self.provenance {
            if k != "p" && k != "format_version" {
                let _ = writeln!(out, "# {k}={v}");
            }
        }
        for d in &self.docs {
            let line: Vec<String> = d.iter().map(usize::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parse the text format. `p` falls back to the `# p=` header.
    pub fn from_text(text: &str, p: Option<usize>) -> Result<Self> {
        let mut provenance = Vec::new();
        let mut docs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if let Some((k, v)) = c.trim().split_once('=') {
                    provenance.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            let doc = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<Vec<usize>, _>>()
                .map_err(|_| crate::Error::InvalidInput(format!("line {}: bad word index", lineno + 1)))?;
            docs.push(doc);
        }
        if let Some((_, v)) = provenance.iter().find(|(k, _)| k == "format_version") {
            if v != "1" {
                return invalid(format!("unsupported corpus format_version {v}"));
            }
        }
        let header_p = provenance
            .iter()
            .find(|(k, _)| k == "p")
            .map(|(_, v)| v.parse::<usize>())
            .transpose()
            .map_err(|_| crate::Error::InvalidInput("bad p header".into()))?;
        let p = match (p, header_p) {
            (Some(a), Some(b)) if a != b => {
                return invalid(format!("p = {a} disagrees with corpus header p = {b}"))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return invalid("vocabulary size p not given"),
        };
        let mut c = Corpus::new(p, docs)?;
        c.provenance = provenance;
        Ok(c)
    }
}

fn check_stochastic(a: &DenseMatrix) -> Result<()> {
    for j in 0..a.cols() {
        let col = a.column(j);
        if col.iter().any(|&v| v < 0.0) {
            return invalid(format!("column {j} has a negative entry"));
        }
        let s: f64 = col.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return invalid(format!("column {j} sums to {s}, not 1"));
        }
    }
    Ok(())
}

/// Draw `num_docs` documents: per document draw `h`, then `2r` topics from `h`,
/// then `n` words from the column of each topic. Shards of documents use seeds
/// derived from `(seed, shard)`, so the output does not depend on thread count.
pub fn sample_corpus(
    a: &DenseMatrix,
    prior: &HiddenPrior,
    n: usize,
    r: usize,
    num_docs: usize,
    seed: u64,
) -> Result<Corpus> {
    if n == 0 || r == 0 {
        return invalid("n and r must be at least 1");
    }
    check_stochastic(a)?;
    if prior.q() != a.cols() {
        return invalid("prior dimension differs from column count");
    }
    let columns = a.columns();
    let shards = num_docs.div_ceil(SHARD_DOCS);
    let docs: Vec<Vec<usize>> = (0..shards)
        .into_par_iter()
        .flat_map_iter(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[shard as u64]));
            let count = SHARD_DOCS.min(num_docs - shard * SHARD_DOCS);
            let columns = &columns;
            (0..count)
                .map(|_| {
                    let h = prior.sample(&mut rng);
                    let mut doc = Vec::with_capacity(2 * r * n);
                    for _ in 0..2 * r {
                        let topic = sample_index(&h, &mut rng);
                        for _ in 0..n {
                            doc.push(sample_index(&columns[topic], &mut rng));
                        }
                    }
                    doc
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut c = Corpus::new(a.rows(), docs)?;
    c.provenance = vec![
        ("seed".into(), seed.to_string()),
        ("n".into(), n.to_string()),
        ("r".into(), r.to_string()),
        ("q".into(), a.cols().to_string()),
        ("docs".into(), num_docs.to_string()),
    ];
    Ok(c)
}

/// Empirical average of `(e_{x_1} ⊗ .. ⊗ e_{x_{rn}})(e_{x_{rn+1}} ⊗ .. ⊗ e_{x_{2rn}})^T`.
pub fn estimate_moment(c: &Corpus, n: usize, r: usize) -> Result<MomentMatrix> {
    if n == 0 || r == 0 {
        return invalid("n and r must be at least 1");
    }
    let m = r * n;
    if let Some(k) = c.docs.iter().position(|d| d.len() != 2 * m) {
        return invalid(format!(
            "document {k} has length {}, expected 2rn = {}",
            c.docs[k].len(),
            2 * m
        ));
    }
    if c.docs.is_empty() {
        return invalid("corpus is empty");
    }
    let dim = match checked_pow(c.p, m) {
        Some(d) if d <= MAX_MOMENT_DIM => d,
        _ => return guard(format!("p^{m} exceeds {MAX_MOMENT_DIM}")),
    };
    let mut counts: HashMap<(usize, usize), u64> = HashMap::new();
    for d in &c.docs {
        *counts
            .entry((tuple_index(&d[..m], c.p), tuple_index(&d[m..], c.p)))
            .or_default() += 1;
    }
    let total = c.docs.len() as f64;
    let mut matrix = DenseMatrix::zeros(dim, dim);
    for ((i, j), k) in counts {
        matrix.set(i, j, k as f64 / total);
    }
    Ok(MomentMatrix {
        n,
        r,
        offset: 0,
        p: c.p,
        matrix,
    })
}

/// Key-value generator description: `p`, `q`, `n`, `r`, `degrees`, `seed`,
/// `prior`, and optionally `entry_low`, `entry_high`, `docs`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub r: usize,
    pub degrees: DegreeSpec,
    pub seed: u64,
    pub prior: String,
    pub entry_law: EntryLaw,
    pub docs: usize,
}

impl GeneratorConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KvFile::parse(text)?;
        kv.reject_unknown(&[
            "p", "q", "n", "r", "degrees", "seed", "prior", "entry_low", "entry_high", "docs",
        ])?;
        let defaults = EntryLaw::default();
        let cfg = Self {
            p: kv.parse_required("p")?,
            q: kv.parse_required("q")?,
            n: kv.parse_required("n")?,
            r: kv.parse_or("r", 1)?,
            degrees: DegreeSpec::parse(kv.require("degrees")?)?,
            seed: kv.parse_or("seed", 0)?,
            prior: kv.get("prior").unwrap_or("uniform").to_string(),
            entry_law: EntryLaw {
                low: kv.parse_or("entry_low", defaults.low)?,
                high: kv.parse_or("entry_high", defaults.high)?,
                random_sign: false,
            },
            docs: kv.parse_or("docs", 1000)?,
        };
        if cfg.n == 0 || cfg.r == 0 {
            return invalid("n and r must be at least 1");
        }
        cfg.prior()?;
        Ok(cfg)
    }

    pub fn population(&self) -> Result<PopulationStructure> {
        random_population_structure(self.p, self.q, &self.degrees, &self.entry_law, self.seed)
    }

    pub fn prior(&self) -> Result<HiddenPrior> {
        HiddenPrior::parse_spec(&self.prior, self.q)
    }
}
