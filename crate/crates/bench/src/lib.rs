//! Shared fixtures for the criterion benches.

use ngramid_core::moments::{random_population_structure, synth_moment, DegreeSpec, EntryLaw, HiddenPrior, MomentMatrix, PopulationStructure};
use ngramid_core::BipartiteGraph;

/// Random structure with every column of degree `d`.
pub fn structure(p: usize, q: usize, d: usize, seed: u64) -> PopulationStructure {
    random_population_structure(p, q, &DegreeSpec::Fixed(d), &EntryLaw::default(), seed).expect("valid shape")
}

pub fn support_graph(p: usize, q: usize, d: usize, seed: u64) -> BipartiteGraph {
    structure(p, q, d, seed).support().clone()
}

/// Exact second-order n-gram moment under the uniform vertex prior.
pub fn moment(ps: &PopulationStructure, n: usize) -> MomentMatrix {
    let mh = HiddenPrior::uniform_vertices(ps.q())
        .and_then(|h| h.hidden_moment(1))
        .expect("valid prior");
    synth_moment(ps.matrix(), &mh, n, 1).expect("moment within the dense cap")
}
