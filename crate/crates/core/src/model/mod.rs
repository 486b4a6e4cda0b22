//! Declarative definition of a single-step agent-based model.
//!
//! A [`ModelSpec`] bundles the attribute alphabet, the agent network, the
//! deterministic update rule `u(x_i, x_j, ..., x_k, λ)` and the
//! configuration-independent choice distribution over agent tuples. Agent
//! indices are 0-based in the API and 1-based in every text format.

mod document;

use std::collections::BTreeMap;

use num_traits::One;

pub use document::{parse_model, serialize_model};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Attribute code. Codes follow declaration order in the alphabet.
pub type Code = u16;

/// Largest supported rule table (`δ^r · |Λ|` entries).
pub const MAX_RULE_TABLE: usize = 1 << 24;

pub(crate) fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && label != "->"
        && !label
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, ',' | '#' | '(' | ')' | '[' | ']' | ':' | '='))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AttributeAlphabet {
    symbols: Vec<String>,
}

impl AttributeAlphabet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.len() < 2 {
            return Err(Error::validation("attribute alphabet needs at least two symbols"));
        }
        if symbols.len() > Code::MAX as usize {
            return Err(Error::validation("attribute alphabet is too large"));
        }
        for (k, s) in symbols.iter().enumerate() {
            if !valid_label(s) {
                return Err(Error::validation(format!("invalid attribute label `{s}`")));
            }
            if symbols[..k].contains(s) {
                return Err(Error::validation(format!("duplicate attribute label `{s}`")));
            }
        }
        Ok(AttributeAlphabet { symbols })
    }

    /// The two-symbol voter alphabet: `black` is code 0, `white` is code 1.
    pub fn black_white() -> Self {
        AttributeAlphabet {
            symbols: vec!["black".into(), "white".into()],
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn label(&self, code: Code) -> &str {
        &self.symbols[code as usize]
    }

    pub fn code_of(&self, label: &str) -> Option<Code> {
        self.symbols.iter().position(|s| s == label).map(|p| p as Code)
    }
}

/// Directed, weighted agent network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    agent_count: usize,
    edges: BTreeMap<(usize, usize), Rational>,
}

impl Topology {
    /// A network of `agent_count` isolated agents.
    pub fn empty(agent_count: usize) -> Result<Self> {
        if agent_count == 0 {
            return Err(Error::validation("topology needs at least one agent"));
        }
        Ok(Topology {
            agent_count,
            edges: BTreeMap::new(),
        })
    }

    /// All `N(N-1)` ordered pairs with unit weight.
    pub fn complete(agent_count: usize) -> Result<Self> {
        let mut t = Topology::empty(agent_count)?;
        for i in 0..agent_count {
            for j in 0..agent_count {
                if i != j {
                    t.edges.insert((i, j), rational::one());
                }
            }
        }
        Ok(t)
    }

    /// Undirected path `0 - 1 - ... - (N-1)`.
    pub fn path(agent_count: usize) -> Result<Self> {
        let mut t = Topology::empty(agent_count)?;
        for i in 1..agent_count {
            t.add_undirected(i - 1, i, rational::one())?;
        }
        Ok(t)
    }

    /// Undirected star around `center`.
    pub fn star(agent_count: usize, center: usize) -> Result<Self> {
        let mut t = Topology::empty(agent_count)?;
        for i in (0..agent_count).filter(|&i| i != center) {
            t.add_undirected(center, i, rational::one())?;
        }
        Ok(t)
    }

    /// Undirected ring.
    pub fn ring(agent_count: usize) -> Result<Self> {
        let mut t = Topology::path(agent_count)?;
        if agent_count > 2 {
            t.add_undirected(agent_count - 1, 0, rational::one())?;
        }
        Ok(t)
    }

    pub fn add_edge(&mut self, from: usize, to: usize, weight: Rational) -> Result<()> {
        if from >= self.agent_count || to >= self.agent_count {
            return Err(Error::validation(format!(
                "edge ({}, {}) refers to an agent outside 1..{}",
                from + 1,
                to + 1,
                self.agent_count
            )));
        }
        if from == to {
            return Err(Error::validation(format!("self-edge at agent {}", from + 1)));
        }
        if !rational::is_positive(&weight) {
            return Err(Error::validation(format!(
                "edge ({}, {}) has non-positive weight {weight}",
                from + 1,
                to + 1
            )));
        }
        if self.edges.insert((from, to), weight).is_some() {
            return Err(Error::validation(format!("duplicate edge ({}, {})", from + 1, to + 1)));
        }
        Ok(())
    }

    pub fn add_undirected(&mut self, a: usize, b: usize, weight: Rational) -> Result<()> {
        self.add_edge(a, b, weight.clone())?;
        self.add_edge(b, a, weight)
    }

    pub fn agent_count(&self) -> usize {
        self.agent_count
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, &Rational)> {
        self.edges.iter().map(|(&(i, j), w)| (i, j, w))
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains_key(&(from, to))
    }

    pub fn out_neighbors(&self, agent: usize) -> Vec<(usize, &Rational)> {
        self.edges
            .range((agent, 0)..(agent + 1, 0))
            .map(|(&(_, j), w)| (j, w))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleOption {
    pub label: String,
    pub probability: Rational,
}

/// Deterministic update `u: S^r × Λ → S` stored as a dense lookup table.
///
/// The table is indexed by the mixed-radix number of the argument codes
/// (first argument least significant) followed by the option index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateRule {
    arity: usize,
    delta: usize,
    options: Vec<RuleOption>,
    table: Vec<Code>,
}

impl UpdateRule {
    pub fn new(arity: usize, delta: usize, options: Vec<RuleOption>, table: Vec<Code>) -> Result<Self> {
        let expected = Self::table_len(arity, delta, options.len())?;
        if table.len() != expected {
            return Err(Error::validation(format!(
                "rule table has {} entries, expected {expected}",
                table.len()
            )));
        }
        if let Some(bad) = table.iter().find(|&&c| c as usize >= delta) {
            return Err(Error::validation(format!(
                "rule output code {bad} is outside the alphabet"
            )));
        }
        validate_options(&options)?;
        Ok(UpdateRule {
            arity,
            delta,
            options,
            table,
        })
    }

    /// Builds the table by evaluating `f(args, option)` on every input.
    pub fn from_fn(
        arity: usize,
        delta: usize,
        options: Vec<RuleOption>,
        f: impl Fn(&[Code], usize) -> Code,
    ) -> Result<Self> {
        let len = Self::table_len(arity, delta, options.len())?;
        let per_option = len / options.len();
        let mut args = vec![0 as Code; arity];
        let mut table = Vec::with_capacity(len);
        for option in 0..options.len() {
            for flat in 0..per_option {
                let mut rest = flat;
                for a in args.iter_mut() {
                    *a = (rest % delta) as Code;
                    rest /= delta;
                }
                table.push(f(&args, option));
            }
        }
        UpdateRule::new(arity, delta, options, table)
    }

    /// `u(x_i, x_j) = x_j` with a single option.
    pub fn imitation(delta: usize) -> Self {
        let options = vec![RuleOption {
            label: "imitate".into(),
            probability: rational::one(),
        }];
        UpdateRule::from_fn(2, delta, options, |args, _| args[1]).expect("imitation rule is valid")
    }

    fn table_len(arity: usize, delta: usize, options: usize) -> Result<usize> {
        if arity == 0 {
            return Err(Error::validation("rule arity must be at least 1"));
        }
        if options == 0 {
            return Err(Error::validation("rule needs at least one option"));
        }
        (0..arity)
            .try_fold(options, |acc, _| acc.checked_mul(delta))
            .filter(|&n| n <= MAX_RULE_TABLE)
            .ok_or_else(|| Error::validation("rule table is too large"))
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn options(&self) -> &[RuleOption] {
        &self.options
    }

    pub fn table(&self) -> &[Code] {
        &self.table
    }

    pub(crate) fn table_index(&self, args: impl IntoIterator<Item = Code>, option: usize) -> usize {
        let mut idx = 0;
        let mut radix = 1;
        for a in args {
            idx += a as usize * radix;
            radix *= self.delta;
        }
        idx + option * radix
    }

    /// New state of the focal agent. `args[0]` is the focal agent's own code.
    pub fn apply(&self, args: &[Code], option: usize) -> Code {
        debug_assert_eq!(args.len(), self.arity);
        self.table[self.table_index(args.iter().copied(), option)]
    }
}

fn validate_options(options: &[RuleOption]) -> Result<()> {
    let mut total = rational::zero();
    for (k, o) in options.iter().enumerate() {
        if !valid_label(&o.label) {
            return Err(Error::validation(format!("invalid option label `{}`", o.label)));
        }
        if options[..k].iter().any(|p| p.label == o.label) {
            return Err(Error::validation(format!("duplicate option label `{}`", o.label)));
        }
        if !rational::is_positive(&o.probability) {
            return Err(Error::validation(format!(
                "option `{}` has non-positive probability",
                o.label
            )));
        }
        total += &o.probability;
    }
    if !total.is_one() {
        return Err(Error::validation(format!("rule options sum to {total} ≠ 1")));
    }
    Ok(())
}

/// ω over agent tuples `(i, j, ..., k)`; the focal agent comes first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceDistribution {
    entries: BTreeMap<Vec<usize>, Rational>,
}

impl ChoiceDistribution {
    pub fn new(entries: BTreeMap<Vec<usize>, Rational>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::validation("choice distribution is empty"));
        }
        let arity = entries.keys().next().map(Vec::len).unwrap_or(0);
        let mut total = rational::zero();
        for (tuple, p) in &entries {
            if tuple.len() != arity || arity == 0 {
                return Err(Error::validation("choice tuples have inconsistent lengths"));
            }
            if !rational::is_positive(p) {
                return Err(Error::validation(format!(
                    "choice {} has non-positive probability {p}",
                    fmt_tuple(tuple)
                )));
            }
            total += p;
        }
        if !total.is_one() {
            return Err(Error::validation(format!("choice distribution sums to {total} ≠ 1")));
        }
        Ok(ChoiceDistribution { entries })
    }

    /// Focal agent uniform, then `arity - 1` distinct out-neighbors drawn one
    /// after another without replacement, each proportional to edge weight.
    pub fn from_topology(topology: &Topology, arity: usize) -> Result<Self> {
        if arity == 0 {
            return Err(Error::validation("rule arity must be at least 1"));
        }
        let n = topology.agent_count();
        let focal_p = rational::ratio(1, n as i64);
        let mut entries = BTreeMap::new();
        for i in 0..n {
            let neighbors: Vec<(usize, Rational)> = topology
                .out_neighbors(i)
                .into_iter()
                .map(|(j, w)| (j, w.clone()))
                .collect();
            if neighbors.len() < arity - 1 {
                return Err(Error::validation(format!(
                    "agent {} has {} out-neighbors but the rule needs {}",
                    i + 1,
                    neighbors.len(),
                    arity - 1
                )));
            }
            let mut prefix = vec![i];
            extend_without_replacement(&neighbors, arity - 1, &mut prefix, focal_p.clone(), &mut entries);
        }
        ChoiceDistribution::new(entries)
    }

    pub fn arity(&self) -> usize {
        self.entries.keys().next().map(Vec::len).unwrap_or(0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[usize], &Rational)> {
        self.entries.iter().map(|(t, p)| (t.as_slice(), p))
    }

    pub fn get(&self, tuple: &[usize]) -> Option<&Rational> {
        self.entries.get(tuple)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn extend_without_replacement(
    neighbors: &[(usize, Rational)],
    remaining: usize,
    prefix: &mut Vec<usize>,
    p: Rational,
    out: &mut BTreeMap<Vec<usize>, Rational>,
) {
    if remaining == 0 {
        out.insert(prefix.clone(), p);
        return;
    }
    let available: Vec<&(usize, Rational)> = neighbors.iter().filter(|(j, _)| !prefix[1..].contains(j)).collect();
    let total: Rational = available.iter().map(|(_, w)| w.clone()).sum();
    for (j, w) in available {
        prefix.push(*j);
        extend_without_replacement(neighbors, remaining - 1, prefix, &p * w / &total, out);
        prefix.pop();
    }
}

pub(crate) fn fmt_tuple(tuple: &[usize]) -> String {
    let inner: Vec<String> = tuple.iter().map(|a| (a + 1).to_string()).collect();
    format!("({})", inner.join(","))
}

/// One `(agent tuple, option)` pair with its joint probability
/// `ω(tuple) · p(option)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointChoice {
    pub agents: Vec<usize>,
    pub option: usize,
    pub probability: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    name: String,
    alphabet: AttributeAlphabet,
    topology: Topology,
    rule: UpdateRule,
    choice: ChoiceDistribution,
}

impl ModelSpec {
    pub fn new(
        name: impl Into<String>,
        alphabet: AttributeAlphabet,
        topology: Topology,
        rule: UpdateRule,
        choice: ChoiceDistribution,
    ) -> Result<Self> {
        let name = name.into().trim().to_string();
        if name.contains(['#', '\n', '\r']) {
            return Err(Error::validation("model name must be a single line without `#`"));
        }
        if rule.delta() != alphabet.len() {
            return Err(Error::validation(format!(
                "rule is defined over {} attributes but the alphabet has {}",
                rule.delta(),
                alphabet.len()
            )));
        }
        if choice.arity() != rule.arity() {
            return Err(Error::validation(format!(
                "rule arity {} does not match choice tuple length {}",
                rule.arity(),
                choice.arity()
            )));
        }
        let n = topology.agent_count();
        for (tuple, _) in choice.entries() {
            if let Some(bad) = tuple.iter().find(|&&a| a >= n) {
                return Err(Error::validation(format!(
                    "choice {} refers to agent {} outside 1..{n}",
                    fmt_tuple(tuple),
                    bad + 1
                )));
            }
            let focal = tuple[0];
            if let Some(other) = tuple[1..].iter().find(|&&j| !topology.has_edge(focal, j)) {
                return Err(Error::validation(format!(
                    "choice {}: agent {} is not an out-neighbor of agent {}",
                    fmt_tuple(tuple),
                    other + 1,
                    focal + 1
                )));
            }
        }
        Ok(ModelSpec {
            name,
            alphabet,
            topology,
            rule,
            choice,
        })
    }

    /// Binary voter model (`black`/`white`) on `topology`.
    pub fn builtin_voter(topology: Topology) -> Result<Self> {
        Self::voter_with_alphabet(topology, AttributeAlphabet::black_white())
    }

    /// Imitation dynamics over an arbitrary alphabet: the focal agent copies
    /// the state of a neighbor chosen proportional to edge weight.
    pub fn voter_with_alphabet(topology: Topology, alphabet: AttributeAlphabet) -> Result<Self> {
        let rule = UpdateRule::imitation(alphabet.len());
        let choice = ChoiceDistribution::from_topology(&topology, 2)?;
        let name = format!("voter N={} delta={}", topology.agent_count(), alphabet.len());
        ModelSpec::new(name, alphabet, topology, rule, choice)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alphabet(&self) -> &AttributeAlphabet {
        &self.alphabet
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn rule(&self) -> &UpdateRule {
        &self.rule
    }

    pub fn choice(&self) -> &ChoiceDistribution {
        &self.choice
    }

    pub fn n_agents(&self) -> usize {
        self.topology.agent_count()
    }

    pub fn delta(&self) -> usize {
        self.alphabet.len()
    }

    /// Joint distribution over `(tuple, option)`, in tuple order then option
    /// order. Only entries with positive probability exist.
    pub fn joint_choices(&self) -> Vec<JointChoice> {
        let mut out = Vec::with_capacity(self.choice.len() * self.rule.options().len());
        for (tuple, p) in self.choice.entries() {
            for (option, o) in self.rule.options().iter().enumerate() {
                out.push(JointChoice {
                    agents: tuple.to_vec(),
                    option,
                    probability: p * &o.probability,
                });
            }
        }
        out
    }
}
