//! Monte Carlo execution of the random mapping representation.
//!
//! Each step draws one joint choice `(i, j, ..., k, λ)` from ω and applies
//! the update rule to the focal agent. Randomness comes from ChaCha8
//! streams: one master seed, and a separate stream per purpose (a run, or
//! one source state during matrix estimation), so results do not depend on
//! thread scheduling.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{One, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::configspace::{ConfigSpace, Configuration};
use crate::error::{Error, Result};
use crate::microchain::MicroChain;
use crate::model::{serialize_model, JointChoice, ModelSpec};
use crate::partition::Partition;
use crate::rational::{to_f64, Rational};

/// Independent generator for `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Hex SHA-256 of the canonical serialized model.
pub fn spec_hash(spec: &ModelSpec) -> String {
    format!("{:x}", Sha256::digest(serialize_model(spec).as_bytes()))
}

/// Draws joint choices by inverting a cumulative table. The table is
/// accumulated in exact rationals and converted to `f64` once.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    spec: &'a ModelSpec,
    choices: Vec<JointChoice>,
    cumulative: Vec<f64>,
    exact: bool,
}

impl<'a> Sampler<'a> {
    pub fn new(spec: &'a ModelSpec) -> Self {
        let choices = spec.joint_choices();
        let mut acc = Rational::zero();
        let mut exact = true;
        let mut cumulative = Vec::with_capacity(choices.len());
        for c in &choices {
            acc += &c.probability;
            let f = to_f64(&acc);
            exact &= is_dyadic_f64(&acc);
            cumulative.push(f);
        }
        Sampler {
            spec,
            choices,
            cumulative,
            exact,
        }
    }

    /// True when every cumulative weight is exactly representable in `f64`,
    /// so sampling reproduces ω up to the resolution of the uniform draw.
    pub fn weights_exact(&self) -> bool {
        self.exact
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &JointChoice {
        let u: f64 = rng.random();
        let k = self.cumulative.partition_point(|&c| c <= u);
        &self.choices[k.min(self.choices.len() - 1)]
    }

    /// One step on a configuration. Only the focal agent can change.
    pub fn step<R: Rng + ?Sized>(&self, c: &Configuration, rng: &mut R) -> Configuration {
        let choice = self.sample(rng);
        let args: Vec<_> = choice.agents.iter().map(|&a| c.get(a)).collect();
        let mut y = c.clone();
        y.set(choice.agents[0], self.spec.rule().apply(&args, choice.option));
        y
    }

    /// One step on a state index.
    pub fn step_index<R: Rng + ?Sized>(&self, space: &ConfigSpace, x: usize, rng: &mut R) -> usize {
        let choice = self.sample(rng);
        let rule = self.spec.rule();
        let args = choice.agents.iter().map(|&a| space.code_at(x, a));
        let new = rule.table()[rule.table_index(args, choice.option)];
        space.with_code(x, choice.agents[0], new)
    }
}

fn is_dyadic_f64(r: &Rational) -> bool {
    let d = r.denom();
    let pow2 = d
        .trailing_zeros()
        .is_some_and(|tz| d == &(num_bigint::BigInt::one() << tz));
    pow2 && r.numer().bits() <= 53
}

/// Single step from `c`. Builds a sampler per call; use [`Sampler`] for loops.
pub fn step<R: Rng + ?Sized>(spec: &ModelSpec, c: &Configuration, rng: &mut R) -> Configuration {
    Sampler::new(spec).step(c, rng)
}

/// A simulated trajectory together with its one-step transition counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimRun {
    pub seed: u64,
    pub steps: usize,
    pub spec_hash: String,
    /// Visited states, starting state first (`steps + 1` entries).
    pub trajectory: Vec<usize>,
    pub empirical_counts: BTreeMap<(usize, usize), u64>,
}

pub fn simulate(spec: &ModelSpec, space: &ConfigSpace, start: usize, steps: usize, seed: u64) -> Result<SimRun> {
    if start >= space.size() {
        return Err(Error::dimension(format!(
            "start state {start} outside 0..{}",
            space.size()
        )));
    }
    let sampler = Sampler::new(spec);
    let mut rng = stream_rng(seed, 0);
    let mut trajectory = Vec::with_capacity(steps + 1);
    let mut counts = BTreeMap::new();
    let mut x = start;
    trajectory.push(x);
    for _ in 0..steps {
        let y = sampler.step_index(space, x, &mut rng);
        *counts.entry((x, y)).or_insert(0) += 1;
        trajectory.push(y);
        x = y;
    }
    Ok(SimRun {
        seed,
        steps,
        spec_hash: spec_hash(spec),
        trajectory,
        empirical_counts: counts,
    })
}

impl SimRun {
    /// Header `# seed=<s> steps=<t> spec=<sha256>` then one configuration per line.
    pub fn to_text(&self, spec: &ModelSpec, space: &ConfigSpace) -> Result<String> {
        let mut out = self.header();
        for &x in &self.trajectory {
            let _ = writeln!(out, "{}", space.config_of(x)?.display(spec.alphabet()));
        }
        Ok(out)
    }

    /// Same header, then one block label per line.
    pub fn to_macro_text(&self, part: &Partition) -> Result<String> {
        let mut out = self.header();
        for b in project_trajectory(self, part)? {
            let _ = writeln!(out, "{}", part.label(b));
        }
        Ok(out)
    }

    fn header(&self) -> String {
        format!("# seed={} steps={} spec={}\n", self.seed, self.steps, self.spec_hash)
    }
}

/// Block index of every visited state.
pub fn project_trajectory(run: &SimRun, part: &Partition) -> Result<Vec<usize>> {
    run.trajectory
        .iter()
        .map(|&x| {
            if x < part.n_states() {
                Ok(part.block_of(x))
            } else {
                Err(Error::dimension(format!(
                    "state {x} outside the partition's 0..{}",
                    part.n_states()
                )))
            }
        })
        .collect()
}

/// `(from, to) → count` over consecutive pairs of a sequence.
pub fn transition_counts(sequence: &[usize]) -> BTreeMap<(usize, usize), u64> {
    let mut counts = BTreeMap::new();
    for w in sequence.windows(2) {
        *counts.entry((w[0], w[1])).or_insert(0) += 1;
    }
    counts
}

/// An entry whose empirical frequency falls outside its binomial bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    pub from: usize,
    pub to: usize,
    pub empirical: f64,
    pub exact: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub seed: u64,
    pub samples_per_state: u64,
    /// Number of standard deviations used for the per-entry bound.
    pub sigmas: f64,
    /// Empirical row frequencies, sparse and column-ascending.
    pub empirical: Vec<Vec<(usize, f64)>>,
    pub max_deviation: f64,
    /// Largest binomial bound `sigmas · sqrt(p(1-p)/n)` over all entries.
    pub max_bound: f64,
    pub violations: Vec<Deviation>,
}

impl EstimateReport {
    pub fn within_bounds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Empirical row, largest deviation, largest bound, violations.
type RowEstimate = (Vec<(usize, f64)>, f64, f64, Vec<Deviation>);

/// Runs `samples_per_state` independent single steps from every state and
/// compares frequencies with the exact chain. Each entry `(x, y)` is checked
/// against `sigmas · sqrt(p(1-p)/n)`; entries with `p = 0` or `p = 1` must
/// match exactly.
pub fn estimate_matrix(
    spec: &ModelSpec,
    chain: &MicroChain,
    samples_per_state: u64,
    seed: u64,
    sigmas: f64,
) -> Result<EstimateReport> {
    let space = chain.space();
    if space.n_agents() != spec.n_agents() || space.delta() != spec.delta() {
        return Err(Error::dimension("chain was not built from this model"));
    }
    if samples_per_state == 0 {
        return Err(Error::validation("need at least one sample per state"));
    }
    let sampler = Sampler::new(spec);
    let n = samples_per_state as f64;
    let rows: Vec<RowEstimate> = (0..space.size())
        .into_par_iter()
        .map(|x| {
            let mut rng = stream_rng(seed, x as u64);
            let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
            for _ in 0..samples_per_state {
                *counts.entry(sampler.step_index(space, x, &mut rng)).or_insert(0) += 1;
            }
            let empirical: Vec<(usize, f64)> = counts.iter().map(|(&y, &c)| (y, c as f64 / n)).collect();
            let mut max_dev: f64 = 0.0;
            let mut max_bound: f64 = 0.0;
            let mut violations = Vec::new();
            let mut columns: Vec<usize> = chain.matrix().row(x).iter().map(|(y, _)| *y).collect();
            columns.extend(counts.keys());
            columns.sort_unstable();
            columns.dedup();
            for y in columns {
                let exact = to_f64(&chain.matrix().get(x, y));
                let emp = counts.get(&y).map_or(0.0, |&c| c as f64 / n);
                let bound = sigmas * (exact * (1.0 - exact) / n).sqrt();
                let dev = (emp - exact).abs();
                max_dev = max_dev.max(dev);
                max_bound = max_bound.max(bound);
                if dev > bound {
                    violations.push(Deviation {
                        from: x,
                        to: y,
                        empirical: emp,
                        exact,
                        bound,
                    });
                }
            }
            (empirical, max_dev, max_bound, violations)
        })
        .collect();
    let mut report = EstimateReport {
        seed,
        samples_per_state,
        sigmas,
        empirical: Vec::with_capacity(rows.len()),
        max_deviation: 0.0,
        max_bound: 0.0,
        violations: Vec::new(),
    };
    for (emp, dev, bound, viol) in rows {
        report.empirical.push(emp);
        report.max_deviation = report.max_deviation.max(dev);
        report.max_bound = report.max_bound.max(bound);
        report.violations.extend(viol);
    }
    Ok(report)
}
