//! Library results checked against independent reference implementations.

mod common;

use std::collections::BTreeSet;

use common::{brute_krank, dirichlet_second_moment, valid_ngram_matching, Stream};
use ngramid_core::combin::{binomial, combinations};
use ngramid_core::identify::{
    check_expansion, check_perfect_ngram_matching, full_report, CheckOptions, Overall, Verdict,
};
use ngramid_core::matgraph::{construct_ngram_matching_randomized, find_perfect_ngram_matching, random_bipartite_graph};
use ngramid_core::moments::{
    random_population_structure, synth_moment, DegreeSpec, EntryLaw, HiddenPrior, PopulationStructure,
};
use ngramid_core::recover::{align_columns, recover_structure, RecoverOptions};
use ngramid_core::tensalg::{kruskal_rank, KrankOptions};
use ngramid_core::{BipartiteGraph, DenseMatrix};

fn random_matrix(s: &mut Stream, p: usize, q: usize) -> DenseMatrix {
    DenseMatrix::from_fn(p, q, |_, _| s.unit() * 2.0 - 1.0)
}

#[test]
fn kruskal_rank_matches_brute_force() {
    let mut s = Stream(0x9e37_79b9);
    for trial in 0..60 {
        let (p, q) = (2 + s.below(4), 2 + s.below(5));
        let mut a = random_matrix(&mut s, p, q);
        // force some dependencies
        if trial % 3 == 0 && q >= 3 {
            for i in 0..p {
                a.set(i, 2, a.get(i, 0) + 2.0 * a.get(i, 1));
            }
        }
        if trial % 5 == 0 {
            for i in 0..p {
                a.set(i, q - 1, -3.0 * a.get(i, 0));
            }
        }
        let k = kruskal_rank(&a, KrankOptions::default()).unwrap();
        assert_eq!(k, brute_krank(&a.columns(), 1e-9), "trial {trial}: {a:?}");
    }
}

#[test]
fn dirichlet_hidden_moment_matches_closed_form() {
    for alpha in [vec![1.0, 1.0, 1.0], vec![0.5, 2.0], vec![0.3, 1.7, 4.0, 0.9]] {
        let h = HiddenPrior::dirichlet(alpha.clone()).unwrap().hidden_moment(1).unwrap();
        let q = alpha.len();
        for i in 0..q {
            for j in 0..q {
                let want = dirichlet_second_moment(&alpha, i, j);
                assert!((h.matrix().get(i, j) - want).abs() < 1e-12, "alpha {alpha:?} ({i},{j})");
            }
        }
    }
}

/// Sorted n-tuples drawn from a column support, as a set of row labels.
fn ngram_neighbors(supp: &[usize], n: usize) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::new();
    let mut t = vec![0usize; n];
    loop {
        if t.windows(2).all(|w| w[0] <= w[1]) {
            out.insert(t.iter().map(|&k| supp[k]).collect());
        }
        let mut k = n;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            t[k] += 1;
            if t[k] < supp.len() {
                break;
            }
            t[k] = 0;
        }
    }
}

fn brute_expansion(adj: &[Vec<usize>], n: usize, krank: usize, extra: usize) -> bool {
    let q = adj.len();
    let nb: Vec<BTreeSet<Vec<usize>>> = adj.iter().map(|s| ngram_neighbors(s, n)).collect();
    (krank + 1..=q).all(|size| {
        combinations(&(0..q).collect::<Vec<_>>(), size).iter().all(|set| {
            let union: BTreeSet<&Vec<usize>> = set.iter().flat_map(|&j| nb[j].iter()).collect();
            union.len() >= size + extra
        })
    })
}

#[test]
fn expansion_matches_brute_force() {
    let opts = CheckOptions::default();
    let mut seen = [0usize; 2];
    for seed in 0..80u64 {
        let (p, q) = (4 + (seed as usize % 3), 3 + (seed as usize % 5));
        let d = 1 + (seed as usize % 2);
        let ps = random_population_structure(p, q, &DegreeSpec::Fixed(d), &EntryLaw::default(), seed).unwrap();
        let n = 1 + (seed as usize % 2);
        let krank = (seed as usize) % 3;
        let got = check_expansion(&ps, n, krank, &opts).unwrap().verdict == Verdict::Pass;
        let want = brute_expansion(ps.support().adjacency(), n, krank, d.pow(n as u32));
        assert_eq!(got, want, "seed {seed}");
        seen[got as usize] += 1;
    }
    assert!(seen[0] > 0 && seen[1] > 0, "{seen:?}");
}

#[test]
fn adding_edges_keeps_a_matching() {
    let mut s = Stream(77);
    let mut hits = 0;
    for _ in 0..150 {
        let (p, q) = (4 + s.below(3), 3 + s.below(6));
        let adj: Vec<Vec<usize>> = (0..q)
            .map(|_| {
                let d = 2 + s.below(p - 1);
                s.subset(p, d)
            })
            .collect();
        let n = 1 + s.below(2);
        let g = BipartiteGraph::new(q, p, adj.clone()).unwrap();
        let Some(m) = find_perfect_ngram_matching(&g, n).unwrap() else { continue };
        hits += 1;
        let mut wider = adj.clone();
        let j = s.below(q);
        wider[j] = (0..p).collect();
        let g2 = BipartiteGraph::new(q, p, wider.clone()).unwrap();
        let m2 = find_perfect_ngram_matching(&g2, n).unwrap().expect("supergraph keeps the matching");
        assert!(valid_ngram_matching(&wider, n, &m2.assignment));
        assert!(valid_ngram_matching(&wider, n, &m.assignment));
    }
    assert!(hits > 0);
}

#[test]
fn no_matching_above_the_size_bound() {
    for (p, n) in [(4, 2), (5, 2), (5, 3), (6, 2)] {
        let q = binomial(p, n) as usize + 1;
        let ps = PopulationStructure::from_matrix(&DenseMatrix::from_fn(p, q, |i, j| 1.0 + ((i + j) % 3) as f64))
            .unwrap();
        let r = check_perfect_ngram_matching(&ps, n, &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Fail, "p={p} n={n}");
    }
}

#[test]
fn constructor_output_is_a_valid_matching() {
    let mut built = 0;
    for seed in 0..40u64 {
        let degrees = vec![5; 30];
        let g = random_bipartite_graph(24, &degrees, seed).unwrap();
        if let Some(m) = construct_ngram_matching_randomized(&g, 2, 0.5, seed).unwrap() {
            built += 1;
            assert!(valid_ngram_matching(g.adjacency(), 2, &m.assignment), "seed {seed}");
        }
    }
    assert!(built > 0);
}

fn identifiable_instance(p: usize, q: usize, d: usize, from: u64) -> (PopulationStructure, u64) {
    let mh = HiddenPrior::uniform_vertices(q).unwrap().hidden_moment(1).unwrap();
    (from..from + 500)
        .find_map(|seed| {
            let ps = random_population_structure(p, q, &DegreeSpec::Fixed(d), &EntryLaw::default(), seed).unwrap();
            let rep = full_report(&ps, &mh, 2, &CheckOptions::default()).unwrap();
            (rep.overall == Overall::Identifiable).then_some((ps, seed))
        })
        .expect("an identifiable instance within 500 seeds")
}

#[test]
fn recovery_of_passing_instances() {
    let mh = HiddenPrior::uniform_vertices(8).unwrap().hidden_moment(1).unwrap();
    let mut from = 0;
    for _ in 0..5 {
        let (ps, seed) = identifiable_instance(6, 8, 2, from);
        from = seed + 1;
        let m = synth_moment(ps.matrix(), &mh, 2, 1).unwrap();
        let mut res = recover_structure(&m, 2, 6, 8, Some(2), &RecoverOptions::default()).unwrap();
        assert_eq!(res.candidates_found, 8);
        assert!(res.align_to(ps.matrix()).unwrap().max_rel_error < 1e-9, "seed {seed}");
    }
}

#[test]
fn recovery_tolerates_small_perturbations() {
    let (ps, _) = identifiable_instance(6, 8, 2, 100);
    let mh = HiddenPrior::uniform_vertices(8).unwrap().hidden_moment(1).unwrap();
    let mut m = synth_moment(ps.matrix(), &mh, 2, 1).unwrap();
    let mut s = Stream(5);
    let dim = m.matrix.rows();
    for i in 0..dim {
        for j in i..dim {
            let e = (s.unit() - 0.5) * 2e-12;
            m.matrix.set(i, j, m.matrix.get(i, j) + e);
            if i != j {
                m.matrix.set(j, i, m.matrix.get(j, i) + e);
            }
        }
    }
    let opts = RecoverOptions {
        tol: 1e-8,
        ..RecoverOptions::default()
    };
    let mut res = recover_structure(&m, 2, 6, 8, Some(2), &opts).unwrap();
    assert!(res.align_to(ps.matrix()).unwrap().max_rel_error < 1e-7);
}

#[test]
fn recovery_invariant_under_permutation_and_rescaling() {
    let (ps, _) = identifiable_instance(6, 8, 2, 200);
    let a = ps.matrix();
    let perm = [3, 0, 7, 5, 1, 6, 2, 4];
    let scale = [0.5, 2.0, 1.0, 3.5, 0.25, 1.5, 4.0, 0.8];
    let b = DenseMatrix::from_fn(6, 8, |i, j| a.get(i, perm[j]) * scale[j]);
    let mh = HiddenPrior::uniform_vertices(8).unwrap().hidden_moment(1).unwrap();
    let opts = RecoverOptions::default();
    let ra = recover_structure(&synth_moment(a, &mh, 2, 1).unwrap(), 2, 6, 8, Some(2), &opts).unwrap();
    let rb = recover_structure(&synth_moment(&b, &mh, 2, 1).unwrap(), 2, 6, 8, Some(2), &opts).unwrap();
    // the recovered columns are canonical, so the two outputs agree exactly up to order
    let al = align_columns(rb.recovered.matrix(), ra.recovered.matrix()).unwrap();
    assert!(al.max_rel_error < 1e-9);
    assert!(al.signs.iter().all(|&x| x == 1.0));
}
