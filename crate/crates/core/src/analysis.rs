//! State classification, absorption, and exact distribution propagation.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_traits::{One, Signed, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};
use crate::lumping::{lump, lump_by_representative};
use crate::partition::Partition;
use crate::rational::{format_ratio, parse_rational_at, to_f64, Rational};
use crate::sparse::StochasticMatrix;

/// Exact probability vector over the states of a chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Distribution {
    probs: Vec<Rational>,
}

impl Distribution {
    pub fn new(probs: Vec<Rational>) -> Result<Self> {
        if let Some(x) = probs.iter().position(|p| p.is_negative()) {
            return Err(Error::validation(format!(
                "distribution has negative mass at state {x}"
            )));
        }
        let total: Rational = probs.iter().sum();
        if !total.is_one() {
            return Err(Error::validation(format!("distribution sums to {total} ≠ 1")));
        }
        Ok(Distribution { probs })
    }

    pub fn point_mass(n_states: usize, state: usize) -> Result<Self> {
        if state >= n_states {
            return Err(Error::dimension(format!("state {state} outside 0..{n_states}")));
        }
        let mut probs = vec![Rational::zero(); n_states];
        probs[state] = Rational::one();
        Ok(Distribution { probs })
    }

    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.probs.iter().map(to_f64).collect()
    }

    /// Mass per block.
    pub fn aggregate(&self, part: &Partition) -> Result<Distribution> {
        if part.n_states() != self.len() {
            return Err(Error::dimension(format!(
                "partition covers {} states, distribution has {}",
                part.n_states(),
                self.len()
            )));
        }
        let mut probs = vec![Rational::zero(); part.n_blocks()];
        for (x, p) in self.probs.iter().enumerate() {
            probs[part.block_of(x)] += p;
        }
        Ok(Distribution { probs })
    }

    /// `index prob` lines for the states with nonzero mass.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (x, p) in self.probs.iter().enumerate().filter(|(_, p)| !p.is_zero()) {
            let _ = writeln!(out, "{x} {}", format_ratio(p));
        }
        out
    }

    /// Reads `index prob` lines; unlisted states get zero.
    pub fn parse_text(text: &str, n_states: usize) -> Result<Self> {
        let mut probs = vec![Rational::zero(); n_states];
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(h, _)| h).trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let [x, p] = tokens.as_slice() else {
                return Err(Error::syntax(k + 1, "expected `index prob`"));
            };
            let x: usize = x
                .parse()
                .ok()
                .filter(|&x| x < n_states)
                .ok_or_else(|| Error::syntax(k + 1, format!("state `{x}` outside 0..{n_states}")))?;
            probs[x] += parse_rational_at(p, k + 1)?;
        }
        Distribution::new(probs)
    }
}

/// Absorbing states, transient states, and closed communicating classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub absorbing: Vec<usize>,
    pub transient: Vec<usize>,
    pub recurrent_classes: Vec<Vec<usize>>,
}

pub fn classify_states(matrix: &StochasticMatrix) -> Classification {
    let n = matrix.n_states();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, matrix.nnz());
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for (x, y) in matrix.arcs() {
        graph.add_edge(nodes[x], nodes[y], ());
    }
    let mut component = vec![0; n];
    let sccs = tarjan_scc(&graph);
    for (c, scc) in sccs.iter().enumerate() {
        for node in scc {
            component[node.index()] = c;
        }
    }
    let mut closed = vec![true; sccs.len()];
    for (x, y) in matrix.arcs() {
        if component[x] != component[y] {
            closed[component[x]] = false;
        }
    }
    let mut recurrent_classes: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, _)| closed[*c])
        .map(|(_, scc)| {
            let mut v: Vec<usize> = scc.iter().map(|n| n.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    recurrent_classes.sort();
    let absorbing = (0..n)
        .filter(|&x| matrix.get_ref(x, x).is_some_and(One::is_one))
        .collect();
    let transient = (0..n).filter(|&x| !closed[component[x]]).collect();
    Classification {
        absorbing,
        transient,
        recurrent_classes,
    }
}

/// Absorption probabilities and expected absorption times, solved in `f64`
/// from the exact matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionReport {
    pub absorbing_states: Vec<usize>,
    pub transient_states: Vec<usize>,
    /// `absorption_probs[t][a]`: from `transient_states[t]` into `absorbing_states[a]`.
    pub absorption_probs: Vec<Vec<f64>>,
    pub expected_steps: Vec<f64>,
    /// Largest residual of the two linear systems, scaled as in the check.
    pub residual: f64,
}

/// Residual bound for the fundamental-matrix solves.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

impl AbsorptionReport {
    /// Probability of ending in absorbing state `target` when starting at `from`.
    pub fn absorption_probability(&self, from: usize, target: usize) -> Option<f64> {
        let a = self.absorbing_states.binary_search(&target).ok()?;
        if let Ok(b) = self.absorbing_states.binary_search(&from) {
            return Some(if a == b { 1.0 } else { 0.0 });
        }
        let t = self.transient_states.binary_search(&from).ok()?;
        Some(self.absorption_probs[t][a])
    }

    pub fn expected_steps_from(&self, from: usize) -> Option<f64> {
        if self.absorbing_states.binary_search(&from).is_ok() {
            return Some(0.0);
        }
        let t = self.transient_states.binary_search(&from).ok()?;
        Some(self.expected_steps[t])
    }
}

pub fn absorption_analysis(matrix: &StochasticMatrix) -> Result<AbsorptionReport> {
    let n = matrix.n_states();
    let absorbing: Vec<usize> = (0..n)
        .filter(|&x| matrix.get_ref(x, x).is_some_and(One::is_one))
        .collect();

    // States that can reach an absorbing state, by reverse search.
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (x, y) in matrix.arcs() {
        reverse[y].push(x);
    }
    let mut reaches = vec![false; n];
    let mut stack = absorbing.clone();
    for &a in &absorbing {
        reaches[a] = true;
    }
    while let Some(y) = stack.pop() {
        for &x in &reverse[y] {
            if !reaches[x] {
                reaches[x] = true;
                stack.push(x);
            }
        }
    }
    if let Some(state) = reaches.iter().position(|r| !r) {
        return Err(Error::NoAbsorbingReachable { state });
    }

    let transient: Vec<usize> = (0..n).filter(|x| absorbing.binary_search(x).is_err()).collect();
    let t = transient.len();
    let mut pos = vec![usize::MAX; n];
    for (k, &x) in transient.iter().enumerate() {
        pos[x] = k;
    }
    let mut apos = vec![usize::MAX; n];
    for (k, &x) in absorbing.iter().enumerate() {
        apos[x] = k;
    }

    let mut i_minus_q = DMatrix::<f64>::identity(t, t);
    let mut r = DMatrix::<f64>::zeros(t, absorbing.len());
    for (k, &x) in transient.iter().enumerate() {
        for (y, p) in matrix.row(x) {
            let p = to_f64(p);
            if pos[*y] != usize::MAX {
                i_minus_q[(k, pos[*y])] -= p;
            } else {
                r[(k, apos[*y])] += p;
            }
        }
    }
    let ones = DMatrix::<f64>::from_element(t, 1, 1.0);

    let (h, steps, residual) = if t == 0 {
        (DMatrix::zeros(0, absorbing.len()), DMatrix::zeros(0, 1), 0.0)
    } else {
        let lu = i_minus_q.clone().lu();
        let h = lu
            .solve(&r)
            .ok_or_else(|| Error::Numerical("I - Q is singular".into()))?;
        let steps = lu
            .solve(&ones)
            .ok_or_else(|| Error::Numerical("I - Q is singular".into()))?;
        let res_h = (&i_minus_q * &h - &r).amax();
        let scale = steps.amax().max(1.0);
        let res_t = (&i_minus_q * &steps - &ones).amax() / scale;
        (h, steps, res_h.max(res_t))
    };
    // Written so that a NaN residual is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(residual <= RESIDUAL_TOLERANCE) {
        return Err(Error::Numerical(format!(
            "residual {residual:e} exceeds {RESIDUAL_TOLERANCE:e}"
        )));
    }
    Ok(AbsorptionReport {
        absorption_probs: (0..t).map(|k| h.row(k).iter().copied().collect()).collect(),
        expected_steps: steps.iter().copied().collect(),
        absorbing_states: absorbing,
        transient_states: transient,
        residual,
    })
}

/// `μ_t = μ_0 P^t`, exactly.
pub fn propagate(matrix: &StochasticMatrix, mu0: &Distribution, t: usize) -> Result<Distribution> {
    let mut probs = mu0.probs.clone();
    if probs.len() != matrix.n_states() {
        return Err(Error::dimension(format!(
            "distribution has {} states, chain has {}",
            probs.len(),
            matrix.n_states()
        )));
    }
    for _ in 0..t {
        probs = matrix.left_mul(&probs)?;
    }
    Ok(Distribution { probs })
}

fn max_abs_diff(a: &Distribution, b: &Distribution) -> Rational {
    a.probs
        .iter()
        .zip(&b.probs)
        .map(|(p, q)| (p - q).abs())
        .max()
        .unwrap_or_else(Rational::zero)
}

/// `‖Π(μ_0 P̂^s) − (Π μ_0) P^s‖_∞` for `s = 0..=t`, where `P` is the lumped
/// chain. With `force`, a non-lumpable partition is aggregated through each
/// block's reference row instead of being rejected.
pub fn commutation_profile(
    micro: &StochasticMatrix,
    part: &Partition,
    mu0: &Distribution,
    t: usize,
    force: bool,
) -> Result<Vec<Rational>> {
    let macro_chain = if force {
        lump_by_representative(micro, part)?
    } else {
        lump(micro, part)?
    };
    let mut micro_mu = mu0.clone();
    let mut macro_mu = mu0.aggregate(part)?;
    let mut out = Vec::with_capacity(t + 1);
    for step in 0..=t {
        if step > 0 {
            micro_mu = propagate(micro, &micro_mu, 1)?;
            macro_mu = propagate(macro_chain.matrix(), &macro_mu, 1)?;
        }
        out.push(max_abs_diff(&micro_mu.aggregate(part)?, &macro_mu));
    }
    Ok(out)
}

/// Discrepancy at time `t` only.
pub fn commutation_check(
    micro: &StochasticMatrix,
    part: &Partition,
    mu0: &Distribution,
    t: usize,
    force: bool,
) -> Result<Rational> {
    Ok(commutation_profile(micro, part, mu0, t, force)?
        .pop()
        .expect("profile has t + 1 entries"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::DEFAULT_CAP;
    use crate::lumping::{frequency_partition, moran_partition};
    use crate::microchain::{build_micro_chain, MicroChain};
    use crate::model::{ModelSpec, Topology};
    use crate::rational::ratio;

    fn voter(t: Topology) -> MicroChain {
        build_micro_chain(&ModelSpec::builtin_voter(t).unwrap(), DEFAULT_CAP).unwrap()
    }

    #[test]
    fn classify_complete_voter() {
        let chain = voter(Topology::complete(3).unwrap());
        let c = classify_states(chain.matrix());
        assert_eq!(c.absorbing, vec![0, 7]);
        assert_eq!(c.transient, vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(c.recurrent_classes, vec![vec![0], vec![7]]);
    }

    #[test]
    fn classify_uniform_chain() {
        let rows = (0..3).map(|_| (0..3).map(|y| (y, ratio(1, 3))).collect()).collect();
        let m = StochasticMatrix::from_rows(rows).unwrap();
        let c = classify_states(&m);
        assert!(c.absorbing.is_empty());
        assert!(c.transient.is_empty());
        assert_eq!(c.recurrent_classes, vec![vec![0, 1, 2]]);
        assert!(matches!(
            absorption_analysis(&m),
            Err(Error::NoAbsorbingReachable { state: 0 })
        ));
    }

    #[test]
    fn moran_chain_boundaries_absorb() {
        let chain = voter(Topology::complete(4).unwrap());
        let part = moran_partition(chain.space(), 0).unwrap();
        let m = lump(chain.matrix(), &part).unwrap();
        assert_eq!(classify_states(m.matrix()).absorbing, vec![0, 4]);
    }

    #[test]
    fn fixation_is_linear_on_complete_graph() {
        let chain = voter(Topology::complete(4).unwrap());
        let report = absorption_analysis(chain.matrix()).unwrap();
        let all_black = 0;
        for x in 0..16 {
            let k = chain.space().attribute_counts_of(x)[0];
            let p = report.absorption_probability(x, all_black).unwrap();
            assert!((p - k as f64 / 4.0).abs() < 1e-9);
        }
        assert_eq!(report.expected_steps_from(0), Some(0.0));
        assert!(report.residual <= RESIDUAL_TOLERANCE);
        for row in &report.absorption_probs {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(report.expected_steps.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn propagate_one_step_from_d() {
        let chain = voter(Topology::complete(3).unwrap());
        let mu = Distribution::point_mass(8, 1).unwrap();
        let out = propagate(chain.matrix(), &mu, 1).unwrap();
        let expected = [
            ratio(1, 3),
            ratio(1, 3),
            ratio(0, 1),
            ratio(1, 6),
            ratio(0, 1),
            ratio(1, 6),
            ratio(0, 1),
            ratio(0, 1),
        ];
        assert_eq!(out.probs(), &expected);
        assert_eq!(propagate(chain.matrix(), &mu, 0).unwrap(), mu);
        let a = Distribution::point_mass(8, 0).unwrap();
        assert_eq!(propagate(chain.matrix(), &a, 25).unwrap(), a);
    }

    #[test]
    fn commutation_zero_for_lumpable() {
        let chain = voter(Topology::complete(4).unwrap());
        let part = frequency_partition(chain.space()).unwrap();
        let mu = Distribution::point_mass(16, 5).unwrap();
        assert!(commutation_check(chain.matrix(), &part, &mu, 10, false)
            .unwrap()
            .is_zero());
    }

    #[test]
    fn commutation_rejects_or_detects_non_lumpable() {
        let chain = voter(Topology::path(3).unwrap());
        let part = frequency_partition(chain.space()).unwrap();
        let mu = Distribution::point_mass(8, 2).unwrap();
        assert!(matches!(
            commutation_check(chain.matrix(), &part, &mu, 1, false),
            Err(Error::NotLumpable(_))
        ));
        let profile = commutation_profile(chain.matrix(), &part, &mu, 5, true).unwrap();
        assert!(profile[0].is_zero());
        assert!(profile.iter().any(|d| !d.is_zero()));
    }

    #[test]
    fn distribution_text() {
        let d = Distribution::parse_text("0 1/2\n# comment\n3 1/2\n", 4).unwrap();
        assert_eq!(d.to_text(), "0 1/2\n3 1/2\n");
        assert!(Distribution::parse_text("0 1/2\n", 4).is_err());
        assert!(Distribution::parse_text("4 1/1\n", 4).is_err());
    }
}
