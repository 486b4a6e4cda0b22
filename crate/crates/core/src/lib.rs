//! Exact micro-level Markov chains for single-step agent-based models,
//! symmetry-induced lumping, and macro-level analysis.
//!
//! The pipeline is: parse a [`ModelSpec`], compile it with
//! [`build_micro_chain`] into a sparse rational transition matrix on the
//! Hamming graph `H(N, δ)`, pick a partition (an orbit partition from
//! [`orbits`] or one of the canonical ones in [`lumping`]), test it with
//! [`check_lumpable`], and analyze either level with [`analysis`]. The
//! [`sim`] module runs the same model as a random-map simulation.

pub mod analysis;
pub mod cli;
pub mod configspace;
pub mod error;
pub mod lumping;
pub mod microchain;
pub mod model;
pub mod partition;
pub mod rational;
pub mod sim;
pub mod sparse;
pub mod symmetry;

pub use analysis::{
    absorption_analysis, classify_states, commutation_check, commutation_profile, propagate, AbsorptionReport,
    Classification, Distribution,
};
pub use configspace::{ConfigSpace, Configuration, DEFAULT_CAP};
pub use error::{Error, LumpWitness, Result};
pub use lumping::{
    check_lumpable, check_lumpable_with, frequency_partition, half_hypercube_partition, lump, lump_with,
    moran_partition, LumpOptions, LumpVerdict, MacroChain,
};
pub use microchain::{build_micro_chain, enumerate_maps, MicroChain, RandomMap};
pub use model::{
    parse_model, serialize_model, AttributeAlphabet, ChoiceDistribution, Code, ModelSpec, RuleOption, Topology,
    UpdateRule,
};
pub use partition::Partition;
pub use rational::Rational;
pub use sparse::StochasticMatrix;
pub use symmetry::{is_chain_symmetric, orbits, GeneratorSet, SpacePermutation, SymmetryVerdict, SymmetryWitness};
