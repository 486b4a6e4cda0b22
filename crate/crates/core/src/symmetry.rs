//! Permutations of agents and attributes acting on `Σ`, their orbits, and
//! the chain-automorphism check `P̂(x, y) = P̂(σx, σy)`.
//!
//! Groups are only ever handled through generator sets. Orbits are the
//! connected components of the graph joining `x` to `g(x)` for each
//! generator `g`, and the automorphism condition is checked generator by
//! generator, which covers the whole generated group.

use std::collections::HashMap;

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;

use crate::configspace::{ConfigSpace, Configuration};
use crate::error::{Error, Result};
use crate::model::{AttributeAlphabet, Code};
use crate::partition::Partition;
use crate::rational::Rational;
use crate::sparse::StochasticMatrix;

/// Element of `S_N × S_δ`. The action is
/// `(σx)_i = attr_perm(x_{agent_perm⁻¹(i)})`: the value held by agent `j`
/// moves to agent `agent_perm(j)` and is relabelled by `attr_perm`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpacePermutation {
    agent_perm: Vec<usize>,
    attr_perm: Vec<Code>,
}

fn is_bijection(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    perm.iter()
        .all(|&p| p < perm.len() && !std::mem::replace(&mut seen[p], true))
}

impl SpacePermutation {
    pub fn new(agent_perm: Vec<usize>, attr_perm: Vec<Code>) -> Result<Self> {
        if !is_bijection(&agent_perm) {
            return Err(Error::validation("agent permutation is not a bijection"));
        }
        let attrs: Vec<usize> = attr_perm.iter().map(|&c| c as usize).collect();
        if !is_bijection(&attrs) {
            return Err(Error::validation("attribute permutation is not a bijection"));
        }
        Ok(SpacePermutation { agent_perm, attr_perm })
    }

    pub fn identity(n_agents: usize, delta: usize) -> Self {
        SpacePermutation {
            agent_perm: (0..n_agents).collect(),
            attr_perm: (0..delta as Code).collect(),
        }
    }

    pub fn agent_transposition(n_agents: usize, delta: usize, a: usize, b: usize) -> Self {
        let mut p = Self::identity(n_agents, delta);
        p.agent_perm.swap(a, b);
        p
    }

    pub fn attr_transposition(n_agents: usize, delta: usize, a: Code, b: Code) -> Self {
        let mut p = Self::identity(n_agents, delta);
        p.attr_perm.swap(a as usize, b as usize);
        p
    }

    pub fn agent_perm(&self) -> &[usize] {
        &self.agent_perm
    }

    pub fn attr_perm(&self) -> &[Code] {
        &self.attr_perm
    }

    pub fn n_agents(&self) -> usize {
        self.agent_perm.len()
    }

    pub fn delta(&self) -> usize {
        self.attr_perm.len()
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &SpacePermutation) -> Result<Self> {
        self.check_dims(other.n_agents(), other.delta())?;
        Ok(SpacePermutation {
            agent_perm: other.agent_perm.iter().map(|&j| self.agent_perm[j]).collect(),
            attr_perm: other.attr_perm.iter().map(|&c| self.attr_perm[c as usize]).collect(),
        })
    }

    pub fn inverse(&self) -> Self {
        let mut agent_perm = vec![0; self.n_agents()];
        for (j, &p) in self.agent_perm.iter().enumerate() {
            agent_perm[p] = j;
        }
        let mut attr_perm = vec![0; self.delta()];
        for (c, &p) in self.attr_perm.iter().enumerate() {
            attr_perm[p as usize] = c as Code;
        }
        SpacePermutation { agent_perm, attr_perm }
    }

    fn check_dims(&self, n_agents: usize, delta: usize) -> Result<()> {
        if n_agents != self.n_agents() || delta != self.delta() {
            return Err(Error::dimension(format!(
                "permutation acts on {} agents and {} attributes, got {n_agents} and {delta}",
                self.n_agents(),
                self.delta()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, c: &Configuration) -> Result<Configuration> {
        if c.len() != self.n_agents() {
            return Err(Error::dimension(format!(
                "configuration has {} agents, permutation acts on {}",
                c.len(),
                self.n_agents()
            )));
        }
        let mut out = vec![0 as Code; c.len()];
        for (j, &code) in c.codes().iter().enumerate() {
            let mapped = self
                .attr_perm
                .get(code as usize)
                .ok_or_else(|| Error::dimension(format!("code {code} outside 0..{}", self.delta())))?;
            out[self.agent_perm[j]] = *mapped;
        }
        Ok(Configuration::new(out))
    }

    /// Action on state indices of `space`. Dimensions must already match.
    pub fn apply_index(&self, space: &ConfigSpace, x: usize) -> usize {
        (0..space.n_agents())
            .map(|j| self.attr_perm[space.code_at(x, j) as usize] as usize * space.stride(self.agent_perm[j]))
            .sum()
    }

    /// Parses cycle notation for each component, e.g. agents `(1 2)(3 4)`
    /// (1-based) and attributes `(a c)` (labels). Empty text means identity.
    pub fn from_cycles(agents: &str, attrs: &str, n_agents: usize, alphabet: &AttributeAlphabet) -> Result<Self> {
        let agent_perm = parse_cycles(agents, n_agents, |t| {
            t.parse::<usize>()
                .ok()
                .filter(|&a| a >= 1 && a <= n_agents)
                .map(|a| a - 1)
                .ok_or_else(|| Error::validation(format!("`{t}` is not an agent in 1..{n_agents}")))
        })?;
        let attr_perm = parse_cycles(attrs, alphabet.len(), |t| {
            alphabet
                .code_of(t)
                .map(|c| c as usize)
                .ok_or_else(|| Error::validation(format!("unknown attribute `{t}`")))
        })?;
        SpacePermutation::new(agent_perm, attr_perm.into_iter().map(|c| c as Code).collect())
    }
}

fn parse_cycles(text: &str, n: usize, element: impl Fn(&str) -> Result<usize>) -> Result<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut moved = vec![false; n];
    let mut rest = text.trim();
    while !rest.is_empty() {
        let body = rest
            .strip_prefix('(')
            .and_then(|r| r.split_once(')'))
            .ok_or_else(|| Error::validation(format!("malformed cycle notation `{text}`")))?;
        let cycle = body
            .0
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(&element)
            .collect::<Result<Vec<_>>>()?;
        for (k, &a) in cycle.iter().enumerate() {
            if std::mem::replace(&mut moved[a], true) {
                return Err(Error::validation(format!("element repeated in cycles `{text}`")));
            }
            perm[a] = cycle[(k + 1) % cycle.len()];
        }
        rest = body.1.trim_start();
    }
    Ok(perm)
}

/// Named, nonempty list of generators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSet {
    name: String,
    generators: Vec<SpacePermutation>,
}

impl GeneratorSet {
    pub fn new(name: impl Into<String>, generators: Vec<SpacePermutation>) -> Result<Self> {
        let Some(first) = generators.first() else {
            return Err(Error::validation("generator set is empty"));
        };
        let (n, d) = (first.n_agents(), first.delta());
        if generators.iter().any(|g| g.n_agents() != n || g.delta() != d) {
            return Err(Error::dimension("generators act on different spaces"));
        }
        Ok(GeneratorSet {
            name: name.into(),
            generators,
        })
    }

    pub fn identity(n_agents: usize, delta: usize) -> Self {
        GeneratorSet {
            name: "identity".into(),
            generators: vec![SpacePermutation::identity(n_agents, delta)],
        }
    }

    /// `S_N` from adjacent agent transpositions.
    pub fn symmetric_agents(n_agents: usize, delta: usize) -> Self {
        let gens = (1..n_agents)
            .map(|a| SpacePermutation::agent_transposition(n_agents, delta, a - 1, a))
            .collect();
        Self::or_identity("SN", gens, n_agents, delta)
    }

    /// `S_δ` from adjacent attribute transpositions.
    pub fn symmetric_attrs(n_agents: usize, delta: usize) -> Self {
        let gens = (1..delta as Code)
            .map(|c| SpacePermutation::attr_transposition(n_agents, delta, c - 1, c))
            .collect();
        Self::or_identity("Sdelta", gens, n_agents, delta)
    }

    /// `S_{δ-1}`: all permutations of the attributes other than `fixed`.
    pub fn symmetric_attrs_fixing(n_agents: usize, delta: usize, fixed: Code) -> Self {
        let others: Vec<Code> = (0..delta as Code).filter(|&c| c != fixed).collect();
        let gens = others
            .windows(2)
            .map(|w| SpacePermutation::attr_transposition(n_agents, delta, w[0], w[1]))
            .collect();
        Self::or_identity("Sdelta-1", gens, n_agents, delta)
    }

    /// Simultaneous flip of every agent's binary state.
    pub fn flip(n_agents: usize) -> Self {
        GeneratorSet {
            name: "flip".into(),
            generators: vec![SpacePermutation::attr_transposition(n_agents, 2, 0, 1)],
        }
    }

    /// `S_N × S_δ`, the automorphism group of the Hamming graph.
    pub fn full(n_agents: usize, delta: usize) -> Self {
        let mut g = Self::symmetric_agents(n_agents, delta).union(&Self::symmetric_attrs(n_agents, delta));
        g.name = "full".into();
        g
    }

    fn or_identity(name: &str, gens: Vec<SpacePermutation>, n_agents: usize, delta: usize) -> Self {
        let generators = if gens.is_empty() {
            vec![SpacePermutation::identity(n_agents, delta)]
        } else {
            gens
        };
        GeneratorSet {
            name: name.into(),
            generators,
        }
    }

    pub fn union(&self, other: &GeneratorSet) -> Self {
        let mut generators = self.generators.clone();
        for g in &other.generators {
            if !generators.contains(g) {
                generators.push(g.clone());
            }
        }
        GeneratorSet {
            name: format!("{}+{}", self.name, other.name),
            generators,
        }
    }

    /// Resolves a preset: `SN`, `Sdelta`, `Sdelta-1` (fixing the first
    /// attribute) or `Sdelta-1:<label>`, `full`, `flip`, `identity`.
    /// Several presets may be joined with commas.
    pub fn preset(spec: &str, n_agents: usize, alphabet: &AttributeAlphabet) -> Result<Self> {
        let delta = alphabet.len();
        let mut out: Option<GeneratorSet> = None;
        for name in spec.split(',').map(str::trim) {
            let g = match name {
                "SN" => Self::symmetric_agents(n_agents, delta),
                "Sdelta" => Self::symmetric_attrs(n_agents, delta),
                "Sdelta-1" => Self::symmetric_attrs_fixing(n_agents, delta, 0),
                "full" => Self::full(n_agents, delta),
                "identity" => Self::identity(n_agents, delta),
                "flip" if delta == 2 => Self::flip(n_agents),
                "flip" => {
                    return Err(Error::validation("`flip` needs a two-symbol alphabet"));
                }
                other => match other.strip_prefix("Sdelta-1:") {
                    Some(label) => {
                        let fixed = alphabet
                            .code_of(label)
                            .ok_or_else(|| Error::validation(format!("unknown attribute `{label}`")))?;
                        Self::symmetric_attrs_fixing(n_agents, delta, fixed)
                    }
                    None => return Err(Error::validation(format!("unknown generator preset `{other}`"))),
                },
            };
            out = Some(match out {
                None => g,
                Some(prev) => prev.union(&g),
            });
        }
        out.ok_or_else(|| Error::validation("no generator preset given"))
    }

    /// Generator file: one generator per line, either a preset name or
    /// `agents: <cycles>` and/or `attrs: <cycles>` separated by `;`.
    pub fn parse_file(text: &str, n_agents: usize, alphabet: &AttributeAlphabet) -> Result<Self> {
        let mut generators = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(h, _)| h).trim();
            if line.is_empty() {
                continue;
            }
            if !line.contains(':') || line.starts_with("Sdelta-1:") {
                let preset = Self::preset(line, n_agents, alphabet).map_err(|e| Error::syntax(k + 1, e.to_string()))?;
                generators.extend(preset.generators);
                continue;
            }
            let (mut agents, mut attrs) = ("", "");
            for part in line.split(';') {
                match part.split_once(':').map(|(key, v)| (key.trim(), v)) {
                    Some(("agents", v)) => agents = v,
                    Some(("attrs", v)) => attrs = v,
                    _ => {
                        return Err(Error::syntax(
                            k + 1,
                            format!("expected `agents:` or `attrs:`, found `{part}`"),
                        ))
                    }
                }
            }
            let g = SpacePermutation::from_cycles(agents, attrs, n_agents, alphabet)
                .map_err(|e| Error::syntax(k + 1, e.to_string()))?;
            generators.push(g);
        }
        GeneratorSet::new("file", generators)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn generators(&self) -> &[SpacePermutation] {
        &self.generators
    }

    fn check_space(&self, space: &ConfigSpace) -> Result<()> {
        self.generators[0].check_dims(space.n_agents(), space.delta())
    }
}

/// Orbit partition of the group generated by `gens`. Blocks are ordered by
/// smallest member. A block whose states share one attribute-count vector
/// that no other block has is labelled `⟨k_1,...,k_δ⟩`; when several blocks
/// share it they become `⟨k_1,...,k_δ⟩@<smallest index>`. Any other block
/// is `orbit@<smallest index>`.
pub fn orbits(space: &ConfigSpace, gens: &GeneratorSet) -> Result<Partition> {
    gens.check_space(space)?;
    let mut uf = UnionFind::<usize>::new(space.size());
    for g in gens.generators() {
        for x in 0..space.size() {
            uf.union(x, g.apply_index(space, x));
        }
    }
    let roots: Vec<usize> = (0..space.size()).map(|x| uf.find(x)).collect();
    let part = Partition::from_keys(&roots, |_, block| format!("orbit@{}", block[0]))?;
    // Count labels only where they identify the orbit; several orbits with
    // the same counts (e.g. x and its attribute flip) get `⟨...⟩@min`.
    let uniform: Vec<Option<Vec<usize>>> = part
        .blocks()
        .iter()
        .map(|block| {
            let counts = space.attribute_counts_of(block[0]);
            block[1..]
                .iter()
                .all(|&x| space.attribute_counts_of(x) == counts)
                .then_some(counts)
        })
        .collect();
    let mut seen: HashMap<&[usize], usize> = HashMap::new();
    for counts in uniform.iter().flatten() {
        *seen.entry(counts).or_insert(0) += 1;
    }
    let labels = part
        .blocks()
        .iter()
        .zip(&uniform)
        .map(|(block, counts)| match counts {
            Some(c) if seen[c.as_slice()] == 1 => count_label(c),
            Some(c) => format!("{}@{}", count_label(c), block[0]),
            None => format!("orbit@{}", block[0]),
        })
        .collect();
    Partition::new(part.blocks().to_vec(), labels, space.size())
}

pub(crate) fn count_label(counts: &[usize]) -> String {
    let inner: Vec<String> = counts.iter().map(usize::to_string).collect();
    format!("⟨{}⟩", inner.join(","))
}

/// A generator `g` and an entry with `P̂(x, y) ≠ P̂(g(x), g(y))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetryWitness {
    pub generator: usize,
    pub x: usize,
    pub y: usize,
    pub p: Rational,
    pub image_x: usize,
    pub image_y: usize,
    pub image_p: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SymmetryVerdict {
    Symmetric,
    Broken(SymmetryWitness),
}

impl SymmetryVerdict {
    pub fn is_symmetric(&self) -> bool {
        matches!(self, SymmetryVerdict::Symmetric)
    }
}

/// Checks `P̂(x, y) = P̂(g(x), g(y))` for every generator and every nonzero
/// entry. Since each `g` is a bijection of the entry set, zero entries
/// follow. The reported witness is the first in (generator, row, column)
/// order regardless of scheduling.
pub fn is_chain_symmetric(
    space: &ConfigSpace,
    matrix: &StochasticMatrix,
    gens: &GeneratorSet,
) -> Result<SymmetryVerdict> {
    gens.check_space(space)?;
    if matrix.n_states() != space.size() {
        return Err(Error::dimension(format!(
            "matrix has {} states, space has {}",
            matrix.n_states(),
            space.size()
        )));
    }
    for (k, g) in gens.generators().iter().enumerate() {
        let witness = (0..space.size()).into_par_iter().find_map_first(|x| {
            let gx = g.apply_index(space, x);
            matrix.row(x).iter().find_map(|(y, p)| {
                let gy = g.apply_index(space, *y);
                match matrix.get_ref(gx, gy) {
                    Some(q) if q == p => None,
                    other => Some(SymmetryWitness {
                        generator: k,
                        x,
                        y: *y,
                        p: p.clone(),
                        image_x: gx,
                        image_y: gy,
                        image_p: other.cloned().unwrap_or_default(),
                    }),
                }
            })
        });
        if let Some(w) = witness {
            return Ok(SymmetryVerdict::Broken(w));
        }
    }
    Ok(SymmetryVerdict::Symmetric)
}
