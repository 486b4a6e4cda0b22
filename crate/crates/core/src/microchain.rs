//! Exact micro-level Markov chain of a single-step model.
//!
//! The chain is assembled row by row: for a source state `x`, every joint
//! choice `(i, j, ..., k, λ)` moves the focal agent `i` to
//! `u(x_i, x_j, ..., x_k, λ)`. Weights of choices landing on the same
//! neighbor are summed, and whatever mass is left stays on the diagonal.
//! Materializing each choice as a map `Σ → Σ` is kept as a separate path
//! for inspection and cross-checking.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::configspace::{ConfigSpace, Configuration};
use crate::error::Result;
use crate::model::{fmt_tuple, Code, ModelSpec};
use crate::rational::Rational;
use crate::sparse::StochasticMatrix;

/// One deterministic map `F_z` of the random mapping representation,
/// identified by its agent tuple and rule option.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomMap {
    pub agents: Vec<usize>,
    pub option: usize,
    pub probability: Rational,
}

impl RandomMap {
    /// Image of state `x`. Only the focal agent's coordinate can change.
    pub fn apply(&self, spec: &ModelSpec, space: &ConfigSpace, x: usize) -> usize {
        let focal = self.agents[0];
        let args = self.agents.iter().map(|&a| space.code_at(x, a));
        let new = spec.rule().table()[spec.rule().table_index(args, self.option)];
        space.with_code(x, focal, new)
    }

    pub fn apply_config(&self, spec: &ModelSpec, c: &Configuration) -> Configuration {
        let args: Vec<Code> = self.agents.iter().map(|&a| c.get(a)).collect();
        let mut y = c.clone();
        y.set(self.agents[0], spec.rule().apply(&args, self.option));
        y
    }

    /// The full index table `x ↦ F_z(x)`.
    pub fn materialize(&self, spec: &ModelSpec, space: &ConfigSpace) -> Vec<usize> {
        (0..space.size()).map(|x| self.apply(spec, space, x)).collect()
    }

    /// `(1,2)` for single-option rules, `(1,2)/label` otherwise.
    pub fn label(&self, spec: &ModelSpec) -> String {
        let tuple = fmt_tuple(&self.agents);
        if spec.rule().options().len() == 1 {
            tuple
        } else {
            format!("{tuple}/{}", spec.rule().options()[self.option].label)
        }
    }
}

/// One map per joint choice with positive probability, in choice order.
pub fn enumerate_maps(spec: &ModelSpec) -> Vec<RandomMap> {
    spec.joint_choices()
        .into_iter()
        .map(|j| RandomMap {
            agents: j.agents,
            option: j.option,
            probability: j.probability,
        })
        .collect()
}

/// The micro chain `(Σ, P̂)` together with its state space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MicroChain {
    space: ConfigSpace,
    matrix: StochasticMatrix,
}

impl MicroChain {
    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn matrix(&self) -> &StochasticMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> StochasticMatrix {
        self.matrix
    }

    pub fn transition_prob(&self, x: &Configuration, y: &Configuration) -> Result<Rational> {
        let x = self.space.index_of(x)?;
        let y = self.space.index_of(y)?;
        Ok(self.matrix.get(x, y))
    }

    /// Arcs of the functional graph: all `(x, y)` reachable by some map.
    /// Every choice has positive weight, so these are exactly the nonzero
    /// entries of `P̂`.
    pub fn grammar_arcs(&self) -> Vec<(usize, usize)> {
        self.matrix.arcs()
    }
}

pub fn build_micro_chain(spec: &ModelSpec, cap: u64) -> Result<MicroChain> {
    let space = ConfigSpace::for_model(spec, cap)?;
    let joint = spec.joint_choices();

    // Put every joint weight over a common denominator so rows accumulate
    // integer numerators.
    let denom = joint
        .iter()
        .fold(BigInt::one(), |acc, j| acc.lcm(j.probability.denom()));
    let weights: Vec<BigInt> = joint
        .iter()
        .map(|j| j.probability.numer() * (&denom / j.probability.denom()))
        .collect();

    let delta = space.delta();
    let rule = spec.rule();
    let rows: Vec<Vec<(usize, Rational)>> = (0..space.size())
        .into_par_iter()
        .map(|x| {
            let mut slots: Vec<(usize, BigInt)> = Vec::new();
            for (choice, w) in joint.iter().zip(&weights) {
                let focal = choice.agents[0];
                let current = space.code_at(x, focal);
                let args = choice.agents.iter().map(|&a| space.code_at(x, a));
                let new = rule.table()[rule.table_index(args, choice.option)];
                if new != current {
                    let slot = focal * delta + new as usize;
                    match slots.iter_mut().find(|(s, _)| *s == slot) {
                        Some((_, acc)) => *acc += w,
                        None => slots.push((slot, w.clone())),
                    }
                }
            }
            let moved: BigInt = slots.iter().map(|(_, w)| w).sum();
            let mut row: Vec<(usize, Rational)> = slots
                .into_iter()
                .map(|(slot, w)| {
                    let y = space.with_code(x, slot / delta, (slot % delta) as Code);
                    (y, Rational::new(w, denom.clone()))
                })
                .collect();
            let stay = &denom - moved;
            if !stay.is_zero() {
                row.push((x, Rational::new(stay, denom.clone())));
            }
            row.sort_by_key(|&(y, _)| y);
            row
        })
        .collect();

    Ok(MicroChain {
        space,
        matrix: StochasticMatrix::from_rows_unchecked(rows),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::DEFAULT_CAP;
    use crate::model::Topology;
    use crate::rational::ratio;

    // Letter names of the eight configurations in mixed-radix order (black = 0, agent 1 least significant).
    const A: usize = 0;
    const B: usize = 4;
    const C: usize = 2;
    const D: usize = 1;
    const E: usize = 6;
    const F: usize = 5;
    const G: usize = 3;
    const H: usize = 7;

    fn complete3() -> ModelSpec {
        ModelSpec::builtin_voter(Topology::complete(3).unwrap()).unwrap()
    }

    #[test]
    fn six_maps_fix_homogeneous_states() {
        let spec = complete3();
        let space = ConfigSpace::for_model(&spec, DEFAULT_CAP).unwrap();
        let maps = enumerate_maps(&spec);
        assert_eq!(maps.len(), 6);
        for m in &maps {
            let img = m.materialize(&spec, &space);
            assert_eq!(img[A], A);
            assert_eq!(img[H], H);
        }
        let f12 = maps
            .iter()
            .find(|m| m.agents == [0, 1])
            .unwrap()
            .materialize(&spec, &space);
        assert_eq!(f12[C], G);
        for s in [A, B, G, H] {
            assert_eq!(f12[s], s);
        }
        let f23 = maps
            .iter()
            .find(|m| m.agents == [1, 2])
            .unwrap()
            .materialize(&spec, &space);
        assert_eq!(f23[D], D);
    }

    #[test]
    fn row_d_of_complete_voter() {
        let chain = build_micro_chain(&complete3(), DEFAULT_CAP).unwrap();
        let row = chain.matrix().row(D).to_vec();
        assert_eq!(
            row,
            vec![(A, ratio(1, 3)), (D, ratio(1, 3)), (G, ratio(1, 6)), (F, ratio(1, 6))]
        );
        assert_eq!(chain.matrix().get(A, A), ratio(1, 1));
        assert_eq!(chain.matrix().get(H, H), ratio(1, 1));
    }

    #[test]
    fn row_c_of_path_voter() {
        let spec = ModelSpec::builtin_voter(Topology::path(3).unwrap()).unwrap();
        let chain = build_micro_chain(&spec, DEFAULT_CAP).unwrap();
        assert_eq!(chain.matrix().get(C, A), ratio(1, 3));
        assert_eq!(chain.matrix().get(C, G), ratio(1, 3));
        assert_eq!(chain.matrix().get(C, E), ratio(1, 3));
        assert_eq!(chain.matrix().row(C).len(), 3);
    }

    #[test]
    fn transition_prob_queries() {
        let chain = build_micro_chain(&complete3(), DEFAULT_CAP).unwrap();
        let s = chain.space();
        let cfg = |i| s.config_of(i).unwrap();
        assert_eq!(chain.transition_prob(&cfg(D), &cfg(A)).unwrap(), ratio(1, 3));
        assert_eq!(chain.transition_prob(&cfg(A), &cfg(A)).unwrap(), ratio(1, 1));
        // a and h differ in three positions
        assert!(chain.transition_prob(&cfg(A), &cfg(H)).unwrap().is_zero());
        assert!(chain.transition_prob(&cfg(D), &cfg(E)).unwrap().is_zero());
    }

    #[test]
    fn grammar_of_complete_voter() {
        let chain = build_micro_chain(&complete3(), DEFAULT_CAP).unwrap();
        let arcs = chain.grammar_arcs();
        assert!(arcs.contains(&(A, A)) && arcs.contains(&(H, H)));
        assert_eq!(arcs.iter().filter(|&&(x, _)| x == A || x == H).count(), 2);
        // mixed states: loop plus three Hamming moves each
        assert_eq!(arcs.len(), 2 + 6 * 4);
        for (x, y) in arcs {
            assert!(x == y || chain.space().hamming_distance(x, y) == 1);
        }
    }

    #[test]
    fn cap_exceeded() {
        let spec = ModelSpec::builtin_voter(Topology::complete(5).unwrap()).unwrap();
        assert!(build_micro_chain(&spec, 16).is_err());
    }
}
