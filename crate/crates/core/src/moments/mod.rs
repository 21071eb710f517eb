//! Population structures, hidden and observed moments, corpora.

mod corpus;
mod hidden;
mod population;
mod synth;

pub use corpus::{estimate_moment, sample_corpus, Corpus, GeneratorConfig};
pub use hidden::{hidden_moment_discrete, hidden_moment_empirical, HiddenMoment, HiddenPrior};
pub use population::{
    random_population_structure, DegreeSpec, EntryLaw, PopulationStructure,
};
pub use synth::{
    core_tensor, single_topic_core, synth_moment, synth_moment_offset, synth_moment_single_topic,
    tucker_eval, CoreTensor, MomentMatrix,
};

pub(crate) use population::random_population_structure_with;

/// Largest side length of any dense moment matrix.
pub const MAX_MOMENT_DIM: usize = 4096;
