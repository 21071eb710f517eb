//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any
//! gating criterion fails. Supplementary lines are reported but do not gate.

mod common;

use std::time::{Duration, Instant};

use common::{backtrack_ngram_matching, brute_moment, brute_tucker, hall_ngram, persistent_blocks, valid_ngram_matching, Mat, Stream};
use ngramid_core::ensemble::{
    run_krank_ensemble, run_matching_ensemble, run_recovery_ensemble, DegreeRule, EnsembleConfig, ExperimentKind,
    MatchingMethod, QRule,
};
use ngramid_core::identify::{
    check_expansion, check_krank_condition, check_perfect_ngram_matching, check_rank_condition,
    probability_constants, CheckOptions, RandomModelParams, Verdict,
};
use ngramid_core::matgraph::find_perfect_ngram_matching;
use ngramid_core::moments::{
    core_tensor, estimate_moment, random_population_structure, sample_corpus, single_topic_core, synth_moment,
    synth_moment_offset, tucker_eval, DegreeSpec, EntryLaw, HiddenPrior,
};
use ngramid_core::tensalg::ten_of;
use ngramid_core::{BipartiteGraph, DenseMatrix};

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(id: &str, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let pass = out.pass && in_time;
    let limit_note = limit.map(|l| format!(", limit {}s", l.as_secs())).unwrap_or_default();
    println!(
        "criterion {id} [{name}]: {} ({}; {:.1}s{limit_note})",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64()
    );
    pass
}

fn supplementary(name: &str, f: impl FnOnce() -> Outcome) {
    let out = f();
    println!(
        "supplementary [{name}]: {} ({}; not gating)",
        if out.pass { "PASS" } else { "FAIL" },
        out.detail
    );
}

fn to_mat(a: &DenseMatrix) -> Mat {
    (0..a.rows()).map(|i| a.row(i).to_vec()).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_matrix(s: &mut Stream, p: usize, q: usize) -> DenseMatrix {
    // about one entry in five is zero so supports vary
    DenseMatrix::from_fn(p, q, |_, _| if s.below(5) == 0 { 0.0 } else { 0.1 + s.unit() })
}

fn random_prior(s: &mut Stream, q: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let atoms: Vec<Vec<f64>> = (0..2)
        .map(|_| {
            let w: Vec<f64> = (0..q).map(|_| 0.05 + s.unit()).collect();
            let t: f64 = w.iter().sum();
            w.iter().map(|x| x / t).collect()
        })
        .collect();
    let p0 = 0.2 + 0.6 * s.unit();
    (atoms, vec![p0, 1.0 - p0])
}

fn criterion_1() -> Outcome {
    let mut s = Stream(0x5eed_0001);
    let (mut agree, mut exists, mut valid) = (0, 0, true);
    for _ in 0..200 {
        let p = 2 + s.below(5);
        let q = 1 + s.below(10);
        let n = 1 + s.below(3);
        let adj: Vec<Vec<usize>> = (0..q)
            .map(|_| {
                let d = 1 + s.below(p);
                s.subset(p, d)
            })
            .collect();
        let g = BipartiteGraph::new(q, p, adj.clone()).unwrap();
        let lib = find_perfect_ngram_matching(&g, n).unwrap();
        let oracle = backtrack_ngram_matching(&adj, n);
        let hall = hall_ngram(&adj, n);
        if lib.is_some() == oracle.is_some() && oracle.is_some() == hall {
            agree += 1;
        }
        if let Some(m) = &lib {
            exists += 1;
            valid &= valid_ngram_matching(&adj, n, &m.assignment);
        }
        if let Some(m) = &oracle {
            valid &= valid_ngram_matching(&adj, n, m);
        }
    }
    Outcome {
        pass: agree == 200 && valid,
        detail: format!("{agree}/200 agree with backtracking and Hall scan, {exists} matchable, all witnesses valid: {valid}"),
    }
}

fn criterion_2() -> Outcome {
    let mut s = Stream(0x5eed_0002);
    let mut worst = 0.0f64;
    let mut count = 0;
    for k in 0..19 {
        let p = 2 + k % 2;
        let q = 2 + (k / 2) % 2;
        let n = 1 + (k / 4) % 2;
        let r = 1 + (k / 8) % 2;
        let a = random_matrix(&mut s, p, q);
        let (atoms, probs) = random_prior(&mut s, q);
        let prior = HiddenPrior::discrete(atoms.clone(), probs.clone()).unwrap();
        let m = synth_moment(&a, &prior.hidden_moment(r).unwrap(), n, r).unwrap();
        let brute = brute_moment(&to_mat(&a), &atoms, &probs, &persistent_blocks(n, r, 0), r * n);
        worst = worst.max(max_diff(m.matrix.data(), &brute.concat()));
        count += 1;
    }
    // half-documents of r n + s = 3 words: the middle topic block straddles the halves
    let a = random_matrix(&mut s, 3, 3);
    let (atoms, probs) = random_prior(&mut s, 3);
    let prior = HiddenPrior::discrete(atoms.clone(), probs.clone()).unwrap();
    let m = synth_moment_offset(&a, &prior, 2, 1, 1).unwrap();
    let brute = brute_moment(&to_mat(&a), &atoms, &probs, &persistent_blocks(2, 1, 1), 3);
    worst = worst.max(max_diff(m.matrix.data(), &brute.concat()));
    count += 1;
    Outcome {
        pass: count == 20 && worst <= 1e-12,
        detail: format!("{count} instances, max entry deviation {worst:.2e} (tol 1e-12)"),
    }
}

fn criterion_3() -> Outcome {
    let mut s = Stream(0x5eed_0003);
    let mut worst = 0.0f64;
    for k in 0..8 {
        let p = 2 + k % 2;
        let q = 2 + (k / 2) % 2;
        let n = 1 + (k / 4) % 2;
        let r = 1;
        let a = random_matrix(&mut s, p, q);
        let (atoms, probs) = random_prior(&mut s, q);
        let prior = HiddenPrior::discrete(atoms.clone(), probs.clone()).unwrap();
        let mh = prior.hidden_moment(r).unwrap();
        let m = synth_moment(&a, &mh, n, r).unwrap();
        let order = 2 * r * n;
        let t = ten_of(m.matrix.data(), &vec![p; order]).unwrap();
        let core = core_tensor(&mh, n, r).unwrap();
        let tucker = tucker_eval(&core, &a).unwrap();
        // independent core: E[prod of h over blocks] when every block is constant
        let core_fn = |y: &[usize]| {
            if y.chunks(n).any(|b| b.iter().any(|&i| i != b[0])) {
                return 0.0;
            }
            atoms
                .iter()
                .zip(&probs)
                .map(|(h, w)| w * y.chunks(n).map(|b| h[b[0]]).product::<f64>())
                .sum()
        };
        let brute = brute_tucker(&core_fn, &to_mat(&a), order);
        worst = worst.max(max_diff(t.data(), tucker.data())).max(max_diff(t.data(), &brute));
    }
    let dense_prior = HiddenPrior::discrete(vec![vec![0.3, 0.7], vec![0.6, 0.4]], vec![0.5, 0.5]).unwrap();
    let n1 = core_tensor(&dense_prior.hidden_moment(1).unwrap(), 1, 1).unwrap();
    let n1_dense = n1.nonzeros.len() == 4 && n1.nonzeros.values().all(|&v| v != 0.0);
    let n2_not_diag = !core_tensor(&dense_prior.hidden_moment(1).unwrap(), 2, 1).unwrap().is_diagonal();
    let single_diag = single_topic_core(&[0.2, 0.3, 0.5], 4).is_diagonal();
    Outcome {
        pass: worst <= 1e-12 && n1_dense && n2_not_diag && single_diag,
        detail: format!(
            "max deviation {worst:.2e} (tol 1e-12), n=1 core dense: {n1_dense}, single-topic core diagonal: {single_diag}"
        ),
    }
}

fn criterion_4() -> Outcome {
    let mut cfg = EnsembleConfig::new(ExperimentKind::Recovery, vec![8], 50);
    cfg.q_rule = QRule::Fixed(12);
    cfg.degree_rule = DegreeRule::Choice(vec![2, 3]);
    cfg.allow_out_of_window = true;
    cfg.filter_identifiable = true;
    cfg.seed = 2024;
    let filtered = run_recovery_ensemble(&cfg).unwrap();
    let r = &filtered.records[0];
    let passing = r.trials - r.skips;
    cfg.filter_identifiable = false;
    let all = run_recovery_ensemble(&cfg).unwrap();
    let u = &all.records[0];
    Outcome {
        pass: passing > 0 && r.rate >= 0.95,
        detail: format!(
            "{} of {passing} report-passing trials recovered (rate {:.3}, need >= 0.95); all 50 trials without the filter: {}/50",
            r.successes, r.rate, u.successes
        ),
    }
}

/// The criterion-4 cell has few report-passing trials at 50, so rerun it wider.
fn recovery_wide() -> Outcome {
    let mut cfg = EnsembleConfig::new(ExperimentKind::Recovery, vec![8], 1000);
    cfg.q_rule = QRule::Fixed(12);
    cfg.degree_rule = DegreeRule::Choice(vec![2, 3]);
    cfg.allow_out_of_window = true;
    cfg.filter_identifiable = true;
    cfg.seed = 2025;
    let r = &run_recovery_ensemble(&cfg).unwrap().records[0];
    let passing = r.trials - r.skips;
    Outcome {
        pass: passing > 0 && r.rate >= 0.95,
        detail: format!("{} of {passing} report-passing trials recovered over 1000 draws", r.successes),
    }
}

fn criterion_5() -> Outcome {
    let opts = CheckOptions::default();
    let shapes = [(6, 8, 2), (7, 9, 2), (8, 10, 2), (8, 12, 2), (6, 6, 3)];
    let (mut qualifying, mut implied, mut attempts) = (0, 0, 0u64);
    let mut exceptions = Vec::new();
    while qualifying < 100 && attempts < 50_000 {
        let (p, q, n) = shapes[(attempts % shapes.len() as u64) as usize];
        attempts += 1;
        let ps = random_population_structure(p, q, &DegreeSpec::Fixed(2), &EntryLaw::default(), 0xc5 + attempts).unwrap();
        let matching = check_perfect_ngram_matching(&ps, n, &opts).unwrap();
        let (krank_cond, krank) = check_krank_condition(&ps, n, &opts).unwrap();
        if !(matching.passed() && krank_cond.passed()) {
            continue;
        }
        qualifying += 1;
        let rank = check_rank_condition(&ps, n, opts.tol).unwrap();
        let expansion = check_expansion(&ps, n, krank.expect("computed"), &opts).unwrap();
        if rank.verdict == Verdict::Pass && expansion.verdict == Verdict::Pass {
            implied += 1;
        } else {
            exceptions.push(format!("p={p} q={q} n={n} attempt {attempts}: rank {:?}, expansion {:?}", rank.verdict, expansion.verdict));
        }
    }
    for e in &exceptions {
        println!("  exception: {e}");
    }
    Outcome {
        pass: qualifying == 100 && implied == 100,
        detail: format!("{implied}/{qualifying} instances passing matching and krank also pass rank and expansion ({attempts} drawn)"),
    }
}

fn criterion_6() -> Outcome {
    let mut m = EnsembleConfig::new(ExperimentKind::Matching, vec![20, 40, 80], 100);
    m.beta = vec![1.5];
    m.q_rule = QRule::SizeBound;
    m.degree_rule = DegreeRule::BetaLog;
    m.allow_out_of_window = true;
    m.seed = 6;
    let mr = run_matching_ensemble(&m).unwrap().records;
    let mut k = m.clone();
    k.kind = ExperimentKind::Krank;
    k.q_rule = QRule::CpPlus(2);
    let kr = run_krank_ensemble(&k).unwrap().records;
    let rates = |rs: &[ngramid_core::ensemble::EnsembleRecord]| rs.iter().map(|r| r.rate).collect::<Vec<_>>();
    let (mrates, krates) = (rates(&mr), rates(&kr));
    let monotone = mrates.windows(2).all(|w| w[1] >= w[0]);
    let pass = mr.len() == 3 && kr.len() == 3 && monotone && mrates[2] >= 0.9 && krates[2] >= 0.9;
    let cells = |rs: &[ngramid_core::ensemble::EnsembleRecord]| {
        rs.iter().map(|r| format!("p={} q={} d={}: {}", r.p, r.q, r.d_max, r.rate)).collect::<Vec<_>>().join(", ")
    };
    Outcome {
        pass,
        detail: format!("matching [{}]; krank >= cp [{}]", cells(&mr), cells(&kr)),
    }
}

fn criterion_7() -> Outcome {
    let mut cfg = EnsembleConfig::new(ExperimentKind::Matching, vec![4, 6, 8], 20);
    cfg.n = vec![1, 2, 3];
    cfg.q_rule = QRule::BinomPlusOne;
    cfg.degree_rule = DegreeRule::Fixed(4);
    cfg.allow_out_of_window = true;
    let recs = run_matching_ensemble(&cfg).unwrap().records;
    let total: usize = recs.iter().map(|r| r.successes).sum();
    Outcome {
        pass: recs.len() == 9 && total == 0,
        detail: format!("{} cells with q = C(p,n)+1, {total} matchings found", recs.len()),
    }
}

fn deviation(a: &DenseMatrix, prior: &HiddenPrior, docs: usize, seed: u64) -> f64 {
    let c = sample_corpus(a, prior, 2, 1, docs, seed).unwrap();
    let est = estimate_moment(&c, 2, 1).unwrap();
    let exact = synth_moment(a, &prior.hidden_moment(1).unwrap(), 2, 1).unwrap();
    est.matrix.max_abs_diff(&exact.matrix)
}

fn criterion_8() -> Outcome {
    let a = DenseMatrix::from_rows(&[vec![0.6, 0.1, 0.2], vec![0.3, 0.7, 0.2], vec![0.1, 0.2, 0.6]]).unwrap();
    let prior = HiddenPrior::discrete(vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.2, 0.7]], vec![0.4, 0.6]).unwrap();
    let big = deviation(&a, &prior, 100_000, 8);
    let small_a = DenseMatrix::from_rows(&[vec![0.7, 0.2], vec![0.3, 0.8]]).unwrap();
    let small_prior = HiddenPrior::uniform_vertices(2).unwrap();
    let mean_dev = |docs: usize| (0..8).map(|k| deviation(&small_a, &small_prior, docs, 100 + k)).sum::<f64>() / 8.0;
    let (d0, d10, d100) = (mean_dev(4_000), mean_dev(40_000), mean_dev(400_000));
    let (r10, r100) = (d0 / d10, d0 / d100);
    let s10 = 10f64.sqrt();
    let ok10 = r10 >= s10 / 2.0 && r10 <= 2.0 * s10;
    let ok100 = (5.0..=20.0).contains(&r100);
    Outcome {
        pass: big <= 0.01 && ok10 && ok100,
        detail: format!(
            "1e5 docs max deviation {big:.4} (tol 0.01); x10 docs shrink {r10:.2} (expect ~3.16), x100 docs shrink {r100:.2} (expect ~10)"
        ),
    }
}

fn criterion_9() -> Outcome {
    let e = std::f64::consts::E;
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-13 * y.abs().max(1.0);
    // each case: parameters, then hand-substituted beta', gamma1, gamma2
    let cases = [
        (
            (2usize, 0.5, 3.0, 0.5, 0.5),
            -3.0 * 0.5f64.ln() - 1.0,
            e * (0.5 / 2.0 + e * e / 0.5 * 2f64.powf(-3.0 * 0.5f64.ln() - 1.0 + 1.0)),
            0.5 * e * e / (4.0 * 0.5),
        ),
        (
            (3, 0.3, 4.0, 0.6, 0.7),
            -4.0 * 0.3f64.ln() - 2.0,
            e * e * (0.3 / 9.0 + e * e / 0.4 * 3f64.powf(-4.0 * 0.3f64.ln() - 2.0 + 1.0)),
            0.09 * e * e / (27.0 * (1.0 - 0.7)),
        ),
        (
            (2, 0.25, 2.0, 0.9, 0.9),
            -2.0 * 0.25f64.ln() - 1.0,
            e * (0.25 / 2.0 + e * e / (1.0 - 0.9) * 2f64.powf(-2.0 * 0.25f64.ln() - 1.0 + 1.0)),
            0.25 * e * e / (4.0 * (1.0 - 0.9)),
        ),
    ];
    let mut ok = 0;
    for ((n, c, beta, d1, d2), bp, g1, g2) in cases {
        let params = RandomModelParams {
            p: 1_000_000,
            q: 1,
            n,
            c,
            beta,
            alpha: 100.0,
            delta1: d1,
            delta2: d2,
        };
        let k = probability_constants(&params).unwrap();
        if close(k.beta_prime, bp) && close(k.gamma1, g1) && close(k.gamma2, g2) {
            ok += 1;
        } else {
            println!("  mismatch n={n} c={c} beta={beta}: got {k:?}, expected ({bp}, {g1}, {g2})");
        }
    }
    Outcome {
        pass: ok == 3,
        detail: format!("{ok}/3 parameter triples match to relative 1e-13"),
    }
}

fn constructor_claim() -> Outcome {
    let mut cfg = EnsembleConfig::new(ExperimentKind::Matching, vec![40], 100);
    cfg.degree_rule = DegreeRule::Log(2.0);
    cfg.q_rule = QRule::SizeBound;
    cfg.method = MatchingMethod::Constructor;
    cfg.allow_out_of_window = true;
    let r = run_matching_ensemble(&cfg).unwrap().records.remove(0);
    Outcome {
        pass: r.rate >= 0.9,
        detail: format!(
            "randomized constructor alone at p=40, q={}, d={}: {}/100 (claimed >= 90); exact matching exists in every trial of criterion 6",
            r.q, r.d_max, r.successes
        ),
    }
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        report("1", "matching equivalence", Some(secs(60)), criterion_1),
        report("2", "moment oracle equivalence", Some(secs(60)), criterion_2),
        report("3", "tucker core consistency", None, criterion_3),
        report("4", "end-to-end recovery", Some(secs(300)), criterion_4),
        report("5", "condition hierarchy", Some(secs(300)), criterion_5),
        report("6", "random-theorem trends", Some(secs(600)), criterion_6),
        report("7", "size-bound necessity", None, criterion_7),
        report("8", "statistical estimation", Some(secs(120)), criterion_8),
        report("9", "probability constants", None, criterion_9),
    ];
    supplementary("end-to-end recovery, 1000 trials", recovery_wide);
    supplementary("constructor success at p=40", constructor_claim);
    let failed = results.iter().filter(|&&p| !p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
