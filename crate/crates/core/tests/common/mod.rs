//! Independent reference implementations used by the integration tests.
//! None of these call into the library's algorithms.

#![allow(dead_code)]

/// Exhaustive search for a perfect n-gram matching over assignments of
/// distinct n-subsets, branching on the topic with the fewest free options.
pub fn backtrack_ngram_matching(adj: &[Vec<usize>], n: usize) -> Option<Vec<Vec<usize>>> {
    fn subsets(items: &[usize], n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for (k, &x) in items.iter().enumerate() {
            for mut rest in subsets(&items[k + 1..], n - 1) {
                rest.insert(0, x);
                out.push(rest);
            }
        }
        out
    }
    fn go(options: &[Vec<Vec<usize>>], chosen: &mut [Option<Vec<usize>>]) -> bool {
        let free = |j: usize, chosen: &[Option<Vec<usize>>]| {
            options[j]
                .iter()
                .filter(|s| !chosen.iter().any(|c| c.as_ref() == Some(*s)))
                .cloned()
                .collect::<Vec<_>>()
        };
        let Some(j) = (0..options.len())
            .filter(|&j| chosen[j].is_none())
            .min_by_key(|&j| free(j, chosen).len())
        else {
            return true;
        };
        for s in free(j, chosen) {
            chosen[j] = Some(s);
            if go(options, chosen) {
                return true;
            }
        }
        chosen[j] = None;
        false
    }
    let options: Vec<Vec<Vec<usize>>> = adj.iter().map(|nb| subsets(nb, n)).collect();
    let mut chosen = vec![None; adj.len()];
    go(&options, &mut chosen).then(|| chosen.into_iter().map(|c| c.expect("assigned")).collect())
}

/// Hall's condition on the lifted graph: every topic set sees at least as
/// many distinct n-subsets as it has members.
pub fn hall_ngram(adj: &[Vec<usize>], n: usize) -> bool {
    let q = adj.len();
    let sets: Vec<Vec<Vec<usize>>> = adj
        .iter()
        .map(|nb| {
            let mut out = Vec::new();
            let d = nb.len();
            for mask in 0u32..(1 << d) {
                if mask.count_ones() as usize == n {
                    out.push((0..d).filter(|k| mask >> k & 1 == 1).map(|k| nb[k]).collect());
                }
            }
            out
        })
        .collect();
    (1u32..(1 << q)).all(|mask| {
        let mut seen: Vec<&Vec<usize>> = Vec::new();
        for j in (0..q).filter(|j| mask >> j & 1 == 1) {
            for s in &sets[j] {
                if !seen.contains(&s) {
                    seen.push(s);
                }
            }
        }
        seen.len() >= mask.count_ones() as usize
    })
}

/// A valid perfect n-gram matching: distinct sorted n-subsets of each topic's neighbors.
pub fn valid_ngram_matching(adj: &[Vec<usize>], n: usize, assignment: &[Vec<usize>]) -> bool {
    if assignment.len() != adj.len() {
        return false;
    }
    for (j, s) in assignment.iter().enumerate() {
        if s.len() != n || s.windows(2).any(|w| w[0] >= w[1]) || !s.iter().all(|i| adj[j].contains(i)) {
            return false;
        }
    }
    for a in 0..assignment.len() {
        for b in a + 1..assignment.len() {
            if assignment[a] == assignment[b] {
                return false;
            }
        }
    }
    true
}

/// Row-major `p x q` matrix given as rows.
pub type Mat = Vec<Vec<f64>>;

fn digits(mut idx: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for k in (0..len).rev() {
        out[k] = idx % base;
        idx /= base;
    }
    out
}

/// `P(x_1..x_L)` for a document whose consecutive words are grouped into
/// blocks of the given lengths, one topic per block, with `h` drawn from
/// a discrete prior.
pub fn document_probability(a: &Mat, atoms: &[Vec<f64>], probs: &[f64], blocks: &[usize], words: &[usize]) -> f64 {
    let q = a[0].len();
    let mut total = 0.0;
    for (h, &w) in atoms.iter().zip(probs) {
        let mut prod = 1.0;
        let mut pos = 0;
        for &len in blocks {
            let mut block = 0.0;
            for y in 0..q {
                let mut t = h[y];
                for &x in &words[pos..pos + len] {
                    t *= a[x][y];
                }
                block += t;
            }
            prod *= block;
            pos += len;
        }
        total += w * prod;
    }
    total
}

/// Moment matrix of a document split into halves of `half` words each, by
/// enumerating every word sequence.
pub fn brute_moment(a: &Mat, atoms: &[Vec<f64>], probs: &[f64], blocks: &[usize], half: usize) -> Mat {
    let p = a.len();
    let dim = p.pow(half as u32);
    let mut m = vec![vec![0.0; dim]; dim];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            let mut words = digits(i, p, half);
            words.extend(digits(j, p, half));
            *e = document_probability(a, atoms, probs, blocks, &words);
        }
    }
    m
}

/// Blocks for a document of `2(r n + s)` words: full blocks of `n` and a final block of `2s`.
pub fn persistent_blocks(n: usize, r: usize, s: usize) -> Vec<usize> {
    let mut b = vec![n; 2 * r];
    if s > 0 {
        b.push(2 * s);
    }
    b
}

/// `sum_y S[y] prod_k A[x_k, y_k]` over every index tuple of the core.
pub fn brute_tucker(core: &dyn Fn(&[usize]) -> f64, a: &Mat, order: usize) -> Vec<f64> {
    let (p, q) = (a.len(), a[0].len());
    let entries = p.pow(order as u32);
    let cores = q.pow(order as u32);
    let mut out = vec![0.0; entries];
    for ys in 0..cores {
        let y = digits(ys, q, order);
        let s = core(&y);
        if s == 0.0 {
            continue;
        }
        for (xs, e) in out.iter_mut().enumerate() {
            let x = digits(xs, p, order);
            *e += s * x.iter().zip(&y).map(|(&xi, &yi)| a[xi][yi]).product::<f64>();
        }
    }
    out
}

/// Rank by Gaussian elimination with partial pivoting; pivots below
/// `tol * max|entry|` count as zero.
pub fn gauss_rank(cols: &[Vec<f64>], tol: f64) -> usize {
    if cols.is_empty() {
        return 0;
    }
    let rows = cols[0].len();
    let mut m: Vec<Vec<f64>> = (0..rows).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    let scale = m.iter().flatten().fold(0.0f64, |a, &b| a.max(b.abs()));
    if scale == 0.0 {
        return 0;
    }
    let mut rank = 0;
    for c in 0..cols.len() {
        let pivot = (rank..rows).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()));
        let Some(pr) = pivot else { break };
        if m[pr][c].abs() <= tol * scale {
            continue;
        }
        m.swap(rank, pr);
        for r in rank + 1..rows {
            let f = m[r][c] / m[rank][c];
            for k in c..cols.len() {
                m[r][k] -= f * m[rank][k];
            }
        }
        rank += 1;
    }
    rank
}

/// Kruskal rank by scanning every column subset, largest first.
pub fn brute_krank(cols: &[Vec<f64>], tol: f64) -> usize {
    let q = cols.len();
    let mut best = 0;
    'size: for k in 1..=q {
        for mask in 0u32..(1 << q) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let sub: Vec<Vec<f64>> = (0..q).filter(|j| mask >> j & 1 == 1).map(|j| cols[j].clone()).collect();
            if gauss_rank(&sub, tol) < k {
                break 'size;
            }
        }
        best = k;
    }
    best
}

/// `E[h_i h_j]` for Dirichlet(alpha).
pub fn dirichlet_second_moment(alpha: &[f64], i: usize, j: usize) -> f64 {
    let a0: f64 = alpha.iter().sum();
    let delta = if i == j { 1.0 } else { 0.0 };
    alpha[i] * (alpha[j] + delta) / (a0 * (a0 + 1.0))
}

/// Deterministic xorshift stream for generating test inputs without the library's RNG plumbing.
pub struct Stream(pub u64);

impl Stream {
    pub fn next_u64(&mut self) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniformly random `k`-subset of `0..n`, sorted.
    pub fn subset(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut all: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            all.swap(i, j);
        }
        let mut s = all[..k].to_vec();
        s.sort_unstable();
        s
    }
}
