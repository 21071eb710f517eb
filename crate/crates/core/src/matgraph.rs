//! Bipartite topic-word graphs, classical and n-gram matchings.

use std::collections::{BTreeMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::combin::{binomial, combination_rank, combination_unrank, combinations};
use crate::error::{guard, invalid, Result};
use crate::tensalg::DenseMatrix;

/// Default cap on the number of lifted right vertices, C(p, n).
pub const DEFAULT_LIFT_CAP: u128 = 1_000_000;

/// Bipartite graph between topics (left, `q`) and words (right, `p`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct BipartiteGraph {
    left_count: usize,
    right_count: usize,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    p: usize,
    q: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphFile> for BipartiteGraph {
    type Error = crate::Error;
    fn try_from(f: GraphFile) -> Result<Self> {
        let edges: Vec<(usize, usize)> = f.edges.iter().map(|e| (e[0], e[1])).collect();
        BipartiteGraph::from_edges(f.q, f.p, &edges)
    }
}

impl From<BipartiteGraph> for GraphFile {
    fn from(g: BipartiteGraph) -> Self {
        let edges = g
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(j, nb)| nb.iter().map(move |&i| [j, i]))
            .collect();
        GraphFile {
            p: g.right_count,
            q: g.left_count,
            edges,
        }
    }
}

impl BipartiteGraph {
    /// Build from per-topic neighbor lists; lists are sorted, duplicates rejected.
    pub fn new(left_count: usize, right_count: usize, mut adjacency: Vec<Vec<usize>>) -> Result<Self> {
        if adjacency.len() != left_count {
            return invalid(format!(
                "adjacency has {} lists for {left_count} left vertices",
                adjacency.len()
            ));
        }
        for (j, nb) in adjacency.iter_mut().enumerate() {
            nb.sort_unstable();
            if let Some(&bad) = nb.iter().find(|&&i| i >= right_count) {
                return invalid(format!("vertex {j} has neighbor {bad} outside [0, {right_count})"));
            }
            if nb.windows(2).any(|w| w[0] == w[1]) {
                return invalid(format!("vertex {j} lists a neighbor twice"));
            }
        }
        Ok(Self {
            left_count,
            right_count,
            adjacency,
        })
    }

    /// Build from `(topic, word)` edge pairs.
    pub fn from_edges(left_count: usize, right_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); left_count];
        for &(j, i) in edges {
            if j >= left_count {
                return invalid(format!("edge topic {j} outside [0, {left_count})"));
            }
            adjacency[j].push(i);
        }
        Self::new(left_count, right_count, adjacency)
    }

    /// Nonzero pattern of a `p x q` matrix (columns are topics).
    pub fn from_support(a: &DenseMatrix) -> Self {
        let adjacency = (0..a.cols())
            .map(|j| (0..a.rows()).filter(|&i| a.get(i, j) != 0.0).collect())
            .collect();
        Self {
            left_count: a.cols(),
            right_count: a.rows(),
            adjacency,
        }
    }

    /// Complete bipartite graph.
    pub fn complete(left_count: usize, right_count: usize) -> Self {
        Self {
            left_count,
            right_count,
            adjacency: vec![(0..right_count).collect(); left_count],
        }
    }

    pub fn left_count(&self) -> usize {
        self.left_count
    }

    pub fn right_count(&self) -> usize {
        self.right_count
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn neighbors(&self, j: usize) -> &[usize] {
        &self.adjacency[j]
    }

    pub fn degree(&self, j: usize) -> usize {
        self.adjacency[j].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).min().unwrap_or(0)
    }
}

/// Union of the neighborhoods of the topics in `s`, sorted.
pub fn neighbors_of_set(g: &BipartiteGraph, s: &[usize]) -> Result<Vec<usize>> {
    let mut seen = vec![false; g.right_count];
    for &j in s {
        if j >= g.left_count {
            return invalid(format!("topic {j} outside [0, {})", g.left_count));
        }
        for &i in &g.adjacency[j] {
            seen[i] = true;
        }
    }
    Ok((0..g.right_count).filter(|&i| seen[i]).collect())
}

/// Maximum matching by Hopcroft-Karp. Left vertices and neighbor lists are
/// scanned in increasing order, so the result is deterministic.
/// Returns the match of every left vertex and the matching size.
pub(crate) fn hopcroft_karp(adj: &[Vec<usize>], n_right: usize) -> (Vec<Option<usize>>, usize) {
    const INF: usize = usize::MAX;
    let n_left = adj.len();
    let mut left_match: Vec<Option<usize>> = vec![None; n_left];
    let mut right_match: Vec<Option<usize>> = vec![None; n_right];
    let mut dist = vec![INF; n_left];
    let mut size = 0;

    loop {
        // BFS layering from free left vertices
        let mut queue = VecDeque::new();
        for u in 0..n_left {
            if left_match[u].is_none() {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = INF;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                match right_match[v] {
                    None => found = true,
                    Some(w) if dist[w] == INF => {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            break;
        }
        let mut next = vec![0usize; n_left];
        for u in 0..n_left {
            if left_match[u].is_none()
                && augment(u, adj, &mut dist, &mut next, &mut left_match, &mut right_match)
            {
                size += 1;
            }
        }
    }
    (left_match, size)
}

fn augment(
    u: usize,
    adj: &[Vec<usize>],
    dist: &mut [usize],
    next: &mut [usize],
    left_match: &mut [Option<usize>],
    right_match: &mut [Option<usize>],
) -> bool {
    while next[u] < adj[u].len() {
        let v = adj[u][next[u]];
        next[u] += 1;
        let ok = match right_match[v] {
            None => true,
            Some(w) => {
                dist[w] == dist[u].wrapping_add(1)
                    && augment(w, adj, dist, next, left_match, right_match)
            }
        };
        if ok {
            left_match[u] = Some(v);
            right_match[v] = Some(u);
            return true;
        }
    }
    dist[u] = usize::MAX;
    false
}

/// A Y-saturating matching (word of every topic), if one exists.
pub fn has_perfect_matching(g: &BipartiteGraph) -> Option<Vec<usize>> {
    if g.left_count > g.right_count {
        return None;
    }
    let (m, size) = hopcroft_karp(&g.adjacency, g.right_count);
    (size == g.left_count).then(|| m.into_iter().map(|x| x.expect("saturated")).collect())
}

/// An assignment of `n` words to every topic.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NGramMatching {
    pub n: usize,
    pub assignment: Vec<Vec<usize>>,
}

/// Check all n-gram matching invariants of `m` against `g`.
pub fn is_perfect_ngram_matching(g: &BipartiteGraph, m: &NGramMatching) -> Result<bool> {
    if m.assignment.len() != g.left_count {
        return invalid(format!(
            "assignment covers {} topics, graph has {}",
            m.assignment.len(),
            g.left_count
        ));
    }
    if let Some(j) = m.assignment.iter().position(|s| s.len() != m.n) {
        return invalid(format!(
            "topic {j} is assigned {} words but n = {}",
            m.assignment[j].len(),
            m.n
        ));
    }
    let mut seen = HashSet::new();
    for (j, set) in m.assignment.iter().enumerate() {
        let mut sorted = set.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Ok(false);
        }
        if sorted.iter().any(|i| g.adjacency[j].binary_search(i).is_err()) {
            return Ok(false);
        }
        if !seen.insert(sorted) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The bipartite graph between topics and the n-subsets of words.
#[derive(Clone, Debug)]
pub struct LiftedGraph {
    pub graph: BipartiteGraph,
    /// Right vertex `k` is the k-th n-subset of `[p]` in lexicographic order.
    pub subsets: Vec<Vec<usize>>,
}

fn lifted_adjacency(g: &BipartiteGraph, n: usize) -> Vec<Vec<usize>> {
    g.adjacency
        .iter()
        .map(|nb| {
            combinations(nb, n)
                .iter()
                .map(|c| combination_rank(c, g.right_count) as usize)
                .collect()
        })
        .collect()
}

fn check_lift(g: &BipartiteGraph, n: usize, cap: u128) -> Result<u128> {
    if n == 0 {
        return invalid("n-gram arity must be at least 1");
    }
    let count = binomial(g.right_count, n);
    if count > cap {
        return guard(format!(
            "lifted graph has C({}, {n}) = {count} right vertices (cap {cap})",
            g.right_count
        ));
    }
    Ok(count)
}

/// Lift `g` to (topics, n-subsets of words). Only distinct-index subsets appear.
pub fn lift_to_ngram_graph(g: &BipartiteGraph, n: usize) -> Result<LiftedGraph> {
    let count = check_lift(g, n, DEFAULT_LIFT_CAP)? as usize;
    let subsets = (0..count)
        .map(|k| combination_unrank(k as u128, g.right_count, n))
        .collect();
    let graph = BipartiteGraph {
        left_count: g.left_count,
        right_count: count,
        adjacency: lifted_adjacency(g, n),
    };
    Ok(LiftedGraph { graph, subsets })
}

/// Exact decision: a perfect n-gram matching exists iff the lifted graph has a
/// Y-saturating matching.
pub fn find_perfect_ngram_matching(g: &BipartiteGraph, n: usize) -> Result<Option<NGramMatching>> {
    find_perfect_ngram_matching_capped(g, n, DEFAULT_LIFT_CAP)
}

/// [`find_perfect_ngram_matching`] with an explicit cap on C(p, n).
pub fn find_perfect_ngram_matching_capped(
    g: &BipartiteGraph,
    n: usize,
    cap: u128,
) -> Result<Option<NGramMatching>> {
    let count = check_lift(g, n, cap)?;
    if (g.left_count as u128) > count || g.adjacency.iter().any(|nb| nb.len() < n) {
        return Ok(None);
    }
    let adj = lifted_adjacency(g, n);
    let (m, size) = hopcroft_karp(&adj, count as usize);
    if size != g.left_count {
        return Ok(None);
    }
    let assignment = m
        .into_iter()
        .map(|k| combination_unrank(k.expect("saturated") as u128, g.right_count, n))
        .collect();
    Ok(Some(NGramMatching { n, assignment }))
}

/// Split `items` into `parts` contiguous blocks whose sizes differ by at most one.
fn near_equal_blocks<T: Clone>(items: &[T], parts: usize) -> Vec<Vec<T>> {
    let base = items.len() / parts;
    let extra = items.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for k in 0..parts {
        let len = base + usize::from(k < extra);
        out.push(items[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Match `topics` into `part` using only edges of `g`; `None` if not saturating.
fn match_into_part(g: &BipartiteGraph, topics: &[usize], part: &[usize]) -> Option<Vec<usize>> {
    let local: Vec<Vec<usize>> = topics
        .iter()
        .map(|&j| {
            g.adjacency[j]
                .iter()
                .filter_map(|i| part.binary_search(i).ok())
                .collect()
        })
        .collect();
    let (m, size) = hopcroft_karp(&local, part.len());
    (size == topics.len()).then(|| m.into_iter().map(|k| part[k.expect("saturated")]).collect())
}

/// Randomized hierarchical construction of a perfect n-gram matching.
///
/// Words are split at random into `n` near-equal parts. A level-`l` set for
/// every topic is built by splitting the topics into `ceil(c p / n)` random
/// blocks, solving level `l - 1` within each block, grouping topics that share
/// a level-`l - 1` set, and matching every group into part `l`. Returns
/// `Ok(None)` when some sub-matching fails.
pub fn construct_ngram_matching_randomized(
    g: &BipartiteGraph,
    n: usize,
    c: f64,
    seed: u64,
) -> Result<Option<NGramMatching>> {
    if n == 0 {
        return invalid("n-gram arity must be at least 1");
    }
    if !(c > 0.0 && c <= 1.0) {
        return invalid(format!("size constant c = {c} must lie in (0, 1]"));
    }
    if g.left_count == 0 {
        return Ok(Some(NGramMatching {
            n,
            assignment: Vec::new(),
        }));
    }
    let p = g.right_count;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<usize> = (0..p).collect();
    words.shuffle(&mut rng);
    let mut parts = near_equal_blocks(&words, n);
    for part in &mut parts {
        part.sort_unstable();
    }
    let blocks = ((c * p as f64 / n as f64).ceil() as usize).max(1);
    let topics: Vec<usize> = (0..g.left_count).collect();
    let sets = build_level(g, &parts, blocks, &topics, n, &mut rng);
    Ok(sets.map(|mut sets| {
        let assignment = topics
            .iter()
            .map(|j| {
                let mut s = sets.remove(j).expect("every topic assigned");
                s.sort_unstable();
                s
            })
            .collect();
        NGramMatching { n, assignment }
    }))
}

fn build_level(
    g: &BipartiteGraph,
    parts: &[Vec<usize>],
    blocks: usize,
    topics: &[usize],
    level: usize,
    rng: &mut ChaCha8Rng,
) -> Option<BTreeMap<usize, Vec<usize>>> {
    if level == 1 {
        let m = match_into_part(g, topics, &parts[0])?;
        return Some(topics.iter().zip(m).map(|(&j, x)| (j, vec![x])).collect());
    }
    let mut shuffled = topics.to_vec();
    shuffled.shuffle(rng);
    let mut sets = BTreeMap::new();
    for block in near_equal_blocks(&shuffled, blocks) {
        if block.is_empty() {
            continue;
        }
        sets.extend(build_level(g, parts, blocks, &block, level - 1, rng)?);
    }
    // topics sharing a parent set must receive distinct words from this part
    let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (&j, parent) in &sets {
        groups.entry(parent.clone()).or_default().push(j);
    }
    for group in groups.values() {
        let m = match_into_part(g, group, &parts[level - 1])?;
        for (&j, x) in group.iter().zip(m) {
            sets.get_mut(&j).expect("present").push(x);
        }
    }
    Some(sets)
}

/// Random support where topic `j` connects to `degrees[j]` distinct words
/// chosen uniformly.
pub fn random_bipartite_graph(p: usize, degrees: &[usize], seed: u64) -> Result<BipartiteGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_bipartite_graph_with(p, degrees, &mut rng)
}

pub(crate) fn random_bipartite_graph_with(
    p: usize,
    degrees: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<BipartiteGraph> {
    if let Some(&d) = degrees.iter().find(|&&d| d > p) {
        return invalid(format!("degree {d} exceeds vocabulary size {p}"));
    }
    let adjacency = degrees
        .iter()
        .map(|&d| {
            let mut nb = rand::seq::index::sample(rng, p, d).into_vec();
            nb.sort_unstable();
            nb
        })
        .collect();
    BipartiteGraph::new(degrees.len(), p, adjacency)
}
