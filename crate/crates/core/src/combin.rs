//! Small combinatorial helpers shared by the graph, algebra and check modules.

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// `base^exp` as `usize`, or `None` on overflow.
pub fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Advance `idx` to the next k-subset of `[0, n)` in lexicographic order.
/// Returns false once the last subset has been passed.
pub fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// All k-subsets of `items` in lexicographic order of positions.
pub fn combinations<T: Copy>(items: &[T], k: usize) -> Vec<Vec<T>> {
    let n = items.len();
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        if k == 0 || !next_combination(&mut idx, n) {
            break;
        }
    }
    out
}

/// All sorted multisets of size k over `[0, p)`, lexicographically.
pub fn multisets(p: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if p == 0 && k > 0 {
        return out;
    }
    let mut cur = vec![0usize; k];
    loop {
        out.push(cur.clone());
        // bump the rightmost position that can still grow, reset the tail to it
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] + 1 < p {
                let v = cur[i] + 1;
                for c in cur[i..].iter_mut() {
                    *c = v;
                }
                break;
            }
        }
    }
}

/// Lexicographic rank of a strictly increasing k-subset of `[0, p)`.
pub fn combination_rank(comb: &[usize], p: usize) -> u128 {
    let k = comb.len();
    let mut rank: u128 = 0;
    let mut start = 0;
    for (pos, &c) in comb.iter().enumerate() {
        for v in start..c {
            rank += binomial(p - 1 - v, k - 1 - pos);
        }
        start = c + 1;
    }
    rank
}

/// Inverse of [`combination_rank`].
pub fn combination_unrank(mut rank: u128, p: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut v = 0;
    for pos in 0..k {
        loop {
            let block = binomial(p - 1 - v, k - 1 - pos);
            if rank < block {
                break;
            }
            rank -= block;
            v += 1;
        }
        out.push(v);
        v += 1;
    }
    out
}

/// Row-major flat index of a tuple over `[0, p)^len` (first index slowest).
pub fn tuple_index(tuple: &[usize], p: usize) -> usize {
    tuple.iter().fold(0, |acc, &t| acc * p + t)
}

/// Inverse of [`tuple_index`].
pub fn tuple_of_index(mut idx: usize, p: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = idx % p;
        idx /= p;
    }
    out
}

/// SplitMix64 finaliser; used to derive independent seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a seed from a base seed and a path of indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(base), |acc, &x| mix64(acc ^ mix64(x)))
}
