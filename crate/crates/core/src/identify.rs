//! Identifiability conditions and the combined report.

use std::collections::HashMap;
use std::f64::consts::E;

use serde::Serialize;
use serde_json::{json, Value};

use crate::combin::{binomial, checked_pow, combinations, multisets, next_combination};
use crate::error::{invalid, Error, Result};
use crate::matgraph::{find_perfect_ngram_matching_capped, DEFAULT_LIFT_CAP};
use crate::moments::{HiddenMoment, PopulationStructure};
use crate::tensalg::{kruskal_rank, ngram_matrix, numeric_rank, KrankOptions, DEFAULT_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// A resource guard stopped the check before it could decide.
    Indeterminate,
}

/// Outcome of one condition, serialized as `{name, verdict, witness, measured}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionResult {
    pub name: String,
    pub verdict: Verdict,
    pub witness: Value,
    pub measured: Value,
}

impl ConditionResult {
    fn new(name: &str, verdict: Verdict, witness: Value, measured: Value) -> Self {
        Self {
            name: name.to_string(),
            verdict,
            witness,
            measured,
        }
    }

    fn from_guard(name: &str, err: Error) -> Result<Self> {
        match err {
            Error::Guard(msg) => Ok(Self::new(name, Verdict::Indeterminate, Value::Null, json!({ "guard": msg }))),
            other => Err(other),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Tolerance and enumeration caps shared by all checks.
#[derive(Clone, Copy, Debug)]
pub struct CheckOptions {
    pub tol: f64,
    pub krank_max_subsets: u128,
    pub expansion_max_subsets: u128,
    pub lift_cap: u128,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            krank_max_subsets: 1 << 20,
            expansion_max_subsets: 1 << 22,
            lift_cap: DEFAULT_LIFT_CAP,
        }
    }
}

impl CheckOptions {
    fn krank(&self) -> KrankOptions {
        KrankOptions {
            tol: self.tol,
            max_subsets: self.krank_max_subsets,
        }
    }
}

/// `M_2r(h)` has full rank `q^r`.
pub fn check_non_degeneracy(mh: &HiddenMoment, tol: f64) -> ConditionResult {
    let rank = numeric_rank(mh.matrix(), tol);
    let required = mh.matrix().rows();
    let verdict = if rank == required { Verdict::Pass } else { Verdict::Fail };
    ConditionResult::new(
        "non_degenerate",
        verdict,
        Value::Null,
        json!({ "rank": rank, "required": required }),
    )
}

/// Existence of a perfect n-gram matching on the support of `a`.
pub fn check_perfect_ngram_matching(a: &PopulationStructure, n: usize, opts: &CheckOptions) -> Result<ConditionResult> {
    const NAME: &str = "perfect_ngram_matching";
    match find_perfect_ngram_matching_capped(a.support(), n, opts.lift_cap) {
        Ok(Some(m)) => Ok(ConditionResult::new(NAME, Verdict::Pass, json!(m.assignment), json!({ "n": n }))),
        Ok(None) => {
            let bound = binomial(a.p(), n);
            Ok(ConditionResult::new(
                NAME,
                Verdict::Fail,
                Value::Null,
                json!({ "n": n, "q": a.q(), "size_bound": bound.min(u64::MAX as u128) as u64 }),
            ))
        }
        Err(e) => ConditionResult::from_guard(NAME, e),
    }
}

/// `krank(A) >= d_max^n`. Returns the measured Kruskal rank when it was computed.
pub fn check_krank_condition(
    a: &PopulationStructure,
    n: usize,
    opts: &CheckOptions,
) -> Result<(ConditionResult, Option<usize>)> {
    const NAME: &str = "krank_condition";
    let d_max = a.d_max();
    let required = checked_pow(d_max, n).unwrap_or(usize::MAX);
    match kruskal_rank(a.matrix(), opts.krank()) {
        Ok(k) => {
            let verdict = if k >= required { Verdict::Pass } else { Verdict::Fail };
            Ok((
                ConditionResult::new(
                    NAME,
                    verdict,
                    Value::Null,
                    json!({ "krank": k, "d_max": d_max, "required": required }),
                ),
                Some(k),
            ))
        }
        // krank <= min(p, q) decides the case where the target is out of reach
        Err(Error::Guard(_)) if required > a.p().min(a.q()) => Ok((
            ConditionResult::new(
                NAME,
                Verdict::Fail,
                Value::Null,
                json!({ "krank_upper_bound": a.p().min(a.q()), "d_max": d_max, "required": required }),
            ),
            None,
        )),
        Err(e) => Ok((ConditionResult::from_guard(NAME, e)?, None)),
    }
}

/// `A^{⊙n}` has full column rank.
pub fn check_rank_condition(a: &PopulationStructure, n: usize, tol: f64) -> Result<ConditionResult> {
    const NAME: &str = "rank_condition";
    match ngram_matrix(a.matrix(), n) {
        Ok(b) => {
            let rank = numeric_rank(&b, tol);
            let verdict = if rank == a.q() { Verdict::Pass } else { Verdict::Fail };
            Ok(ConditionResult::new(NAME, verdict, Value::Null, json!({ "rank": rank, "required": a.q() })))
        }
        Err(e) => ConditionResult::from_guard(NAME, e),
    }
}

type Bits = Vec<u64>;

fn bitset(indices: impl IntoIterator<Item = usize>, words: usize) -> Bits {
    let mut b = vec![0u64; words];
    for i in indices {
        b[i / 64] |= 1 << (i % 64);
    }
    b
}

/// Smallest set (by size, then lexicographically) among sizes `min_size..=q`
/// whose union of neighborhoods has fewer than `|S| + extra` elements.
fn first_expansion_violation(
    neighborhoods: &[Bits],
    min_size: usize,
    extra: usize,
    cap: u128,
) -> Result<Option<(Vec<usize>, usize)>> {
    let q = neighborhoods.len();
    if min_size > q {
        return Ok(None);
    }
    let total: u128 = (min_size..=q).map(|s| binomial(q, s)).sum();
    if total > cap {
        return crate::error::guard(format!("expansion check needs {total} subsets (cap {cap})"));
    }
    let words = neighborhoods.first().map_or(0, Vec::len);
    for size in min_size.max(1)..=q {
        let mut idx: Vec<usize> = (0..size).collect();
        // prefix[k] = union of neighborhoods of idx[..k]
        let mut prefix: Vec<Bits> = vec![vec![0u64; words]; size + 1];
        let mut valid_from = 0;
        loop {
            for k in valid_from..size {
                let (head, tail) = prefix.split_at_mut(k + 1);
                for ((dst, &a), &b) in tail[0].iter_mut().zip(&head[k]).zip(&neighborhoods[idx[k]]) {
                    *dst = a | b;
                }
            }
            let count: usize = prefix[size].iter().map(|w| w.count_ones() as usize).sum();
            if count < size + extra {
                return Ok(Some((idx, count)));
            }
            let before = idx.clone();
            if !next_combination(&mut idx, q) {
                break;
            }
            valid_from = before.iter().zip(&idx).position(|(x, y)| x != y).unwrap_or(size);
        }
    }
    Ok(None)
}

/// Expansion on the restricted n-gram support: every `S` with `|S| > krank(A)`
/// has `|N(S)| >= |S| + d_max^n`.
pub fn check_expansion(
    a: &PopulationStructure,
    n: usize,
    krank: usize,
    opts: &CheckOptions,
) -> Result<ConditionResult> {
    const NAME: &str = "expansion_condition";
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let rows = binomial(a.p() + n - 1, n);
    if rows > opts.lift_cap {
        return ConditionResult::from_guard(
            NAME,
            Error::Guard(format!("restricted n-gram support has {rows} rows (cap {})", opts.lift_cap)),
        );
    }
    let reps = multisets(a.p(), n);
    let index: HashMap<Vec<usize>, usize> = reps.into_iter().enumerate().map(|(k, t)| (t, k)).collect();
    let words = (rows as usize).div_ceil(64);
    let neighborhoods: Vec<Bits> = a
        .support()
        .adjacency()
        .iter()
        .map(|supp| {
            let rows = multisets(supp.len(), n)
                .into_iter()
                .map(|m| index[&m.iter().map(|&k| supp[k]).collect::<Vec<_>>()]);
            bitset(rows, words)
        })
        .collect();
    let extra = checked_pow(a.d_max(), n).unwrap_or(usize::MAX);
    let measured = json!({ "krank": krank, "d_max_ngram": extra });
    match first_expansion_violation(&neighborhoods, krank + 1, extra, opts.expansion_max_subsets) {
        Ok(None) => Ok(ConditionResult::new(NAME, Verdict::Pass, Value::Null, measured)),
        Ok(Some((set, count))) => Ok(ConditionResult::new(
            NAME,
            Verdict::Fail,
            json!({ "set": set, "neighbors": count, "required": set.len() + extra }),
            measured,
        )),
        Err(e) => ConditionResult::from_guard(NAME, e),
    }
}

/// Bag-of-words expansion: `|N(S)| >= |S| + d_max` for every `|S| >= 2`.
pub fn check_expansion_bagofwords(a: &PopulationStructure, opts: &CheckOptions) -> Result<ConditionResult> {
    const NAME: &str = "expansion_bagofwords";
    let words = a.p().div_ceil(64);
    let neighborhoods: Vec<Bits> = a
        .support()
        .adjacency()
        .iter()
        .map(|nb| bitset(nb.iter().copied(), words))
        .collect();
    let extra = a.d_max();
    let measured = json!({ "d_max": extra });
    match first_expansion_violation(&neighborhoods, 2, extra, opts.expansion_max_subsets) {
        Ok(None) => Ok(ConditionResult::new(NAME, Verdict::Pass, Value::Null, measured)),
        Ok(Some((set, count))) => Ok(ConditionResult::new(
            NAME,
            Verdict::Fail,
            json!({ "set": set, "neighbors": count, "required": set.len() + extra }),
            measured,
        )),
        Err(e) => ConditionResult::from_guard(NAME, e),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Overall {
    Identifiable,
    NotEstablished,
    Indeterminate,
}

/// Every condition verdict plus the implication chain behind `overall`.
#[derive(Clone, Debug, Serialize)]
pub struct IdentifiabilityReport {
    pub n: usize,
    pub r: usize,
    pub p: usize,
    pub q: usize,
    pub d_max: usize,
    pub krank: Option<usize>,
    pub non_degenerate: ConditionResult,
    /// Absent for `n = 1`, which uses the bag-of-words route.
    pub perfect_ngram_matching: Option<ConditionResult>,
    pub krank_condition: Option<ConditionResult>,
    pub rank_condition: ConditionResult,
    pub expansion_condition: ConditionResult,
    pub overall: Overall,
    pub chain: Vec<String>,
}

impl IdentifiabilityReport {
    pub fn conditions(&self) -> Vec<&ConditionResult> {
        let mut out = vec![&self.non_degenerate];
        out.extend(self.perfect_ngram_matching.iter());
        out.extend(self.krank_condition.iter());
        out.push(&self.rank_condition);
        out.push(&self.expansion_condition);
        out
    }

    /// JSON with one object per condition.
    pub fn to_json(&self) -> Value {
        json!({
            "format_version": 1,
            "n": self.n,
            "r": self.r,
            "p": self.p,
            "q": self.q,
            "d_max": self.d_max,
            "krank": self.krank,
            "overall": self.overall,
            "chain": self.chain,
            "conditions": self.conditions(),
        })
    }
}

/// Run every check. For `n >= 2` the model is identifiable when non-degeneracy
/// holds together with either (matching and krank) or (rank and expansion).
/// For `n = 1` the bag-of-words expansion and full column rank are used.
pub fn full_report(
    a: &PopulationStructure,
    mh: &HiddenMoment,
    n: usize,
    opts: &CheckOptions,
) -> Result<IdentifiabilityReport> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    if mh.q() != a.q() {
        return invalid(format!("hidden moment has q = {}, matrix has {} columns", mh.q(), a.q()));
    }
    let non_degenerate = check_non_degeneracy(mh, opts.tol);
    let rank_condition = check_rank_condition(a, n, opts.tol)?;
    let mut chain = Vec::new();
    let (perfect, krank_condition, krank, expansion_condition);
    if n == 1 {
        perfect = None;
        krank_condition = None;
        krank = kruskal_rank(a.matrix(), opts.krank()).ok();
        expansion_condition = check_expansion_bagofwords(a, opts)?;
    } else {
        perfect = Some(check_perfect_ngram_matching(a, n, opts)?);
        let (kc, k) = check_krank_condition(a, n, opts)?;
        krank_condition = Some(kc);
        krank = k;
        expansion_condition = match k {
            Some(k) => check_expansion(a, n, k, opts)?,
            None => ConditionResult::new(
                "expansion_condition",
                Verdict::Indeterminate,
                Value::Null,
                json!({ "reason": "kruskal rank unavailable" }),
            ),
        };
    }

    let pass = |c: &Option<ConditionResult>| c.as_ref().is_some_and(ConditionResult::passed);
    let overall = if !non_degenerate.passed() {
        chain.push("non-degeneracy of the hidden moment fails".to_string());
        Overall::NotEstablished
    } else if pass(&perfect) && pass(&krank_condition) {
        chain.push("non-degeneracy".to_string());
        chain.push("perfect n-gram matching + krank => rank + expansion".to_string());
        chain.push("rank + expansion => identifiable".to_string());
        Overall::Identifiable
    } else if rank_condition.passed() && expansion_condition.passed() {
        chain.push("non-degeneracy".to_string());
        if n == 1 {
            chain.push("full column rank + bag-of-words expansion => identifiable".to_string());
        } else {
            chain.push("rank + expansion => identifiable".to_string());
        }
        Overall::Identifiable
    } else {
        let all = [&perfect, &krank_condition, &Some(rank_condition.clone()), &Some(expansion_condition.clone())];
        if all
            .iter()
            .any(|c| c.as_ref().is_some_and(|c| c.verdict == Verdict::Indeterminate))
        {
            chain.push("a guard stopped a check before either route was decided".to_string());
            Overall::Indeterminate
        } else {
            chain.push("neither sufficient route holds".to_string());
            Overall::NotEstablished
        }
    };
    Ok(IdentifiabilityReport {
        n,
        r: mh.r(),
        p: a.p(),
        q: a.q(),
        d_max: a.d_max(),
        krank,
        non_degenerate,
        perfect_ngram_matching: perfect,
        krank_condition,
        rank_condition,
        expansion_condition,
        overall,
        chain,
    })
}

/// Parameters of the random-structure model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RandomModelParams {
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub c: f64,
    pub beta: f64,
    pub alpha: f64,
    pub delta1: f64,
    pub delta2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbabilityConstants {
    pub beta_prime: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl ProbabilityConstants {
    pub fn gamma(&self) -> f64 {
        self.gamma1 + self.gamma2
    }

    /// Success floor `1 - gamma p^{-beta'}`.
    pub fn floor(&self, p: usize) -> f64 {
        1.0 - self.gamma() * (p as f64).powf(-self.beta_prime)
    }
}

pub fn beta_prime(c: f64, beta: f64, n: usize) -> f64 {
    -beta * c.ln() - n as f64 + 1.0
}

/// Open interval `(lower, 1)` admissible for `delta1`.
pub fn delta1_lower_bound(params: &RandomModelParams) -> f64 {
    let (p, n) = (params.p as f64, params.n as f64);
    E.powi(2) * (p / n).powf(-params.beta * (1.0 / params.c).ln())
}

/// Open interval `(lower, 1)` admissible for `delta2`.
pub fn delta2_lower_bound(params: &RandomModelParams) -> f64 {
    let n = params.n as f64;
    let bp = beta_prime(params.c, params.beta, params.n);
    params.c.powf(n - 1.0) * E.powi(2) / n.powf(n) * (params.p as f64).powf(-bp)
}

/// `beta' = -beta ln c - n + 1`,
/// `gamma1 = e^{n-1} (c / n^{n-1} + e^2 / (1 - delta1) n^{beta'+1})`,
/// `gamma2 = c^{n-1} e^2 / (n^n (1 - delta2))`.
pub fn probability_constants(params: &RandomModelParams) -> Result<ProbabilityConstants> {
    let RandomModelParams { n, c, beta, delta1, delta2, .. } = *params;
    if !(c > 0.0 && c < 1.0) {
        return invalid(format!("c = {c} must lie in (0, 1)"));
    }
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let lo1 = delta1_lower_bound(params);
    if !(delta1 > lo1 && delta1 < 1.0) {
        return invalid(format!("delta1 = {delta1} outside ({lo1}, 1)"));
    }
    let lo2 = delta2_lower_bound(params);
    if !(delta2 > lo2 && delta2 < 1.0) {
        return invalid(format!("delta2 = {delta2} outside ({lo2}, 1)"));
    }
    let nf = n as f64;
    let bp = beta_prime(c, beta, n);
    let gamma1 = E.powf(nf - 1.0) * (c / nf.powf(nf - 1.0) + E.powi(2) / (1.0 - delta1) * nf.powf(bp + 1.0));
    let gamma2 = c.powf(nf - 1.0) * E.powi(2) / (nf.powf(nf) * (1.0 - delta2));
    Ok(ProbabilityConstants {
        beta_prime: bp,
        gamma1,
        gamma2,
    })
}

/// Size, degree and constant constraints of the random model.
#[derive(Clone, Debug, Serialize)]
pub struct RandomConditionsReport {
    pub size: Verdict,
    pub degree_lower: Verdict,
    pub degree_upper: Verdict,
    pub beta_constraint: Verdict,
    pub alpha_constraint: Verdict,
    pub size_bound: f64,
    pub degree_lower_bound: f64,
    pub degree_upper_bound: f64,
    pub beta_min: f64,
    pub alpha_min: f64,
    /// `1 - gamma p^{-beta'}` when both deltas are admissible.
    pub predicted_floor: Option<f64>,
    pub constants: Option<ProbabilityConstants>,
}

impl RandomConditionsReport {
    /// Size and both degree inequalities hold.
    pub fn in_window(&self) -> bool {
        [self.size, self.degree_lower, self.degree_upper]
            .iter()
            .all(|v| *v == Verdict::Pass)
    }
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// Inclusive comparison with a relative slack for bounds computed in floating point.
fn le(x: f64, bound: f64) -> bool {
    x <= bound * (1.0 + 1e-12) + 1e-12
}

/// Smallest alpha allowed (the constraint is strict).
pub fn alpha_lower_bound(c: f64, beta: f64, n: usize) -> f64 {
    let nf = n as f64;
    (2.0 * nf * nf * (beta * (1.0 / c).ln() + 1.0)).max(2.0 * beta * nf)
}

pub fn check_random_conditions(params: &RandomModelParams, degrees: &[usize]) -> RandomConditionsReport {
    let RandomModelParams { p, q, n, c, beta, alpha, .. } = *params;
    let (pf, nf) = (p as f64, n as f64);
    let size_bound = (c * pf / nf).powf(nf);
    let degree_lower_bound = (1.0 + beta * pf.ln()).max(alpha * pf.ln());
    let degree_upper_bound = (c * pf).powf(1.0 / nf);
    let beta_min = (nf - 1.0) / (1.0 / c).ln();
    let alpha_min = alpha_lower_bound(c, beta, n);
    let d_min = degrees.iter().copied().min().unwrap_or(0) as f64;
    let d_max = degrees.iter().copied().max().unwrap_or(0) as f64;
    let constants = probability_constants(params).ok();
    RandomConditionsReport {
        size: verdict(le(q as f64, size_bound)),
        degree_lower: verdict(!degrees.is_empty() && d_min >= degree_lower_bound * (1.0 - 1e-12)),
        degree_upper: verdict(le(d_max, degree_upper_bound)),
        beta_constraint: verdict(beta > beta_min),
        alpha_constraint: verdict(alpha > alpha_min),
        size_bound,
        degree_lower_bound,
        degree_upper_bound,
        beta_min,
        alpha_min,
        predicted_floor: constants.map(|k| k.floor(p)),
        constants,
    }
}

/// Every `S` with `|S| <= r` satisfies `|N(S)| >= |S|` on the support of `a`.
pub fn support_hall_up_to(a: &PopulationStructure, r: usize) -> bool {
    let words = a.p().div_ceil(64);
    let nb: Vec<Bits> = a
        .support()
        .adjacency()
        .iter()
        .map(|s| bitset(s.iter().copied(), words))
        .collect();
    (1..=r.min(a.q())).all(|size| {
        combinations(&(0..a.q()).collect::<Vec<_>>(), size).iter().all(|s| {
            let mut u = vec![0u64; words];
            for &j in s {
                for (x, y) in u.iter_mut().zip(&nb[j]) {
                    *x |= y;
                }
            }
            u.iter().map(|w| w.count_ones() as usize).sum::<usize>() >= size
        })
    })
}
