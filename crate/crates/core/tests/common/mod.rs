//! Test-side oracles that do not go through the library's chain builder.
#![allow(dead_code)]

use std::collections::BTreeMap;

use abmlump::{
    AttributeAlphabet, ChoiceDistribution, Code, ModelSpec, Rational, RuleOption, StochasticMatrix, Topology,
    UpdateRule,
};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn q(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Configuration letters of the three-agent table, in index order under
/// agent 1 least significant and black = 0.
pub const LETTER_OF_INDEX: [char; 8] = ['a', 'd', 'c', 'g', 'b', 'f', 'e', 'h'];

pub fn index_of_letter(c: char) -> usize {
    LETTER_OF_INDEX.iter().position(|&l| l == c).expect("letter a..h")
}

/// Reference map table for the three-agent complete voter: choice
/// `(i, j)` and the images of configurations a..h.
pub const MAP_TABLE: [((usize, usize), &str); 6] = [
    ((1, 2), "abgahbgh"),
    ((1, 3), "afcahfch"),
    ((2, 1), "abagbhgh"),
    ((3, 1), "aacfcfhh"),
    ((2, 3), "aeadehdh"),
    ((3, 2), "aaededhh"),
];

/// Column glyphs of the reference table: ■ black, □ white, agent 1 first.
pub const MAP_COLUMNS: [(char, &str); 8] = [
    ('a', "■■■"),
    ('b', "■■□"),
    ('c', "■□■"),
    ('d', "□■■"),
    ('e', "■□□"),
    ('f', "□■□"),
    ('g', "□□■"),
    ('h', "□□□"),
];

pub fn decode(x: usize, n: usize, delta: usize) -> Vec<Code> {
    let mut rest = x;
    (0..n)
        .map(|_| {
            let c = (rest % delta) as Code;
            rest /= delta;
            c
        })
        .collect()
}

pub fn encode(codes: &[Code], delta: usize) -> usize {
    codes.iter().rev().fold(0, |acc, &c| acc * delta + c as usize)
}

/// Inputs of a single-step model, kept on the test side.
#[derive(Clone, Debug)]
pub struct OracleModel {
    pub n: usize,
    pub delta: usize,
    /// `(agent tuple (0-based, focal first), ω)`.
    pub choices: Vec<(Vec<usize>, Rational)>,
    pub options: Vec<Rational>,
    /// Flat rule table: first argument least significant, then option.
    pub table: Vec<Code>,
    pub arity: usize,
}

impl OracleModel {
    pub fn rule(&self, args: &[Code], option: usize) -> Code {
        let mut flat = 0;
        let mut scale = 1;
        for &a in args {
            flat += a as usize * scale;
            scale *= self.delta;
        }
        self.table[flat + option * scale]
    }

    /// Sparse transition rows by direct summation over joint choices. Sums
    /// are taken over integer numerators on the common denominator of all
    /// joint weights and reduced once per entry.
    pub fn chain(&self) -> Vec<BTreeMap<usize, Rational>> {
        use num_integer::Integer;
        use num_traits::ToPrimitive;
        let joint: Vec<(&[usize], usize, Rational)> = self
            .choices
            .iter()
            .flat_map(|(t, w)| {
                self.options
                    .iter()
                    .enumerate()
                    .map(move |(o, p)| (t.as_slice(), o, w * p))
            })
            .collect();
        let denom = joint.iter().fold(BigInt::one(), |acc, (_, _, p)| acc.lcm(p.denom()));
        let joint: Vec<(&[usize], usize, i128)> = joint
            .into_iter()
            .map(|(t, o, p)| {
                let num = p.numer() * (&denom / p.denom());
                (t, o, num.to_i128().expect("numerator fits i128"))
            })
            .collect();
        let size = self.delta.pow(self.n as u32);
        (0..size)
            .map(|x| {
                let codes = decode(x, self.n, self.delta);
                let mut acc: BTreeMap<usize, i128> = BTreeMap::new();
                let mut args = Vec::with_capacity(self.arity);
                let mut y = codes.clone();
                for &(tuple, opt, w) in &joint {
                    args.clear();
                    args.extend(tuple.iter().map(|&a| codes[a]));
                    y[tuple[0]] = self.rule(&args, opt);
                    *acc.entry(encode(&y, self.delta)).or_insert(0) += w;
                    y[tuple[0]] = codes[tuple[0]];
                }
                acc.into_iter()
                    .filter(|(_, w)| *w != 0)
                    .map(|(y, w)| (y, Rational::new(BigInt::from(w), denom.clone())))
                    .collect()
            })
            .collect()
    }

    pub fn spec(&self) -> ModelSpec {
        let labels: Vec<String> = (0..self.delta).map(|k| format!("s{k}")).collect();
        let alphabet = AttributeAlphabet::new(labels).unwrap();
        let mut topology = Topology::empty(self.n).unwrap();
        for (tuple, _) in &self.choices {
            for &j in &tuple[1..] {
                if !topology.has_edge(tuple[0], j) {
                    topology.add_edge(tuple[0], j, Rational::one()).unwrap();
                }
            }
        }
        let options = self
            .options
            .iter()
            .enumerate()
            .map(|(k, p)| RuleOption {
                label: format!("o{k}"),
                probability: p.clone(),
            })
            .collect();
        let rule = UpdateRule::new(self.arity, self.delta, options, self.table.clone()).unwrap();
        let choice = ChoiceDistribution::new(self.choices.iter().cloned().collect()).unwrap();
        ModelSpec::new("oracle", alphabet, topology, rule, choice).unwrap()
    }
}

/// Uniform ω over ordered pairs of a complete graph.
pub fn complete_pairs(n: usize) -> Vec<(Vec<usize>, Rational)> {
    let w = q(1, (n * (n - 1)) as i64);
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out.push((vec![i, j], w.clone()));
            }
        }
    }
    out
}

/// Imitation rule on a complete graph, built without library helpers.
pub fn voter_oracle(n: usize, delta: usize) -> OracleModel {
    let mut table = Vec::with_capacity(delta * delta);
    for flat in 0..delta * delta {
        table.push((flat / delta) as Code);
    }
    OracleModel {
        n,
        delta,
        choices: complete_pairs(n),
        options: vec![Rational::one()],
        table,
        arity: 2,
    }
}

fn random_simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<Rational> {
    let weights: Vec<i64> = (0..k).map(|_| rng.random_range(1..=6)).collect();
    let total: i64 = weights.iter().sum();
    weights.into_iter().map(|w| q(w, total)).collect()
}

/// Random single-step model: random rule table over one or two options and
/// random positive ω on a random subset of ordered tuples.
pub fn random_oracle<R: Rng>(rng: &mut R, n: usize, delta: usize, arity: usize) -> OracleModel {
    let n_options = rng.random_range(1..=2);
    let options = random_simplex(rng, n_options);
    let table_len = delta.pow(arity as u32) * n_options;
    let table = (0..table_len).map(|_| rng.random_range(0..delta) as Code).collect();
    let mut tuples: Vec<Vec<usize>> = Vec::new();
    for focal in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != focal).collect();
        others.shuffle(rng);
        let mut t = vec![focal];
        t.extend(others.into_iter().take(arity - 1));
        if t.len() == arity {
            tuples.push(t);
        }
        if rng.random_bool(0.5) && n > 2 {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != focal).collect();
            others.shuffle(rng);
            let mut t = vec![focal];
            t.extend(others.into_iter().take(arity - 1));
            if t.len() == arity && !tuples.contains(&t) {
                tuples.push(t);
            }
        }
    }
    let weights = random_simplex(rng, tuples.len());
    OracleModel {
        n,
        delta,
        choices: tuples.into_iter().zip(weights).collect(),
        options,
        table,
        arity,
    }
}

/// Random directed topology in which every agent has an out-neighbor.
pub fn random_topology<R: Rng>(rng: &mut R, n: usize) -> Topology {
    let mut t = Topology::empty(n).unwrap();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(0.4) {
                t.add_edge(i, j, q(rng.random_range(1..=4), 1)).unwrap();
            }
        }
        if t.out_neighbors(i).is_empty() {
            t.add_edge(i, (i + 1) % n, Rational::one()).unwrap();
        }
    }
    t
}

pub fn matrix_rows(m: &StochasticMatrix) -> Vec<BTreeMap<usize, Rational>> {
    m.rows().map(|r| r.iter().cloned().collect()).collect()
}

/// Exact `μ P` on sparse rows.
pub fn step(rows: &[BTreeMap<usize, Rational>], mu: &[Rational]) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); mu.len()];
    for (x, p) in mu.iter().enumerate().filter(|(_, p)| !p.is_zero()) {
        for (y, w) in &rows[x] {
            out[*y] += p * w;
        }
    }
    out
}

pub fn aggregate(mu: &[Rational], blocks: &[Vec<usize>]) -> Vec<Rational> {
    blocks
        .iter()
        .map(|b| b.iter().fold(Rational::zero(), |acc, &x| acc + &mu[x]))
        .collect()
}

/// `P = A / D` with `D` the lcm of all denominators and `A` integral.
pub struct IntegerChain {
    pub scale: i128,
    pub rows: Vec<Vec<(usize, i128)>>,
}

impl IntegerChain {
    pub fn new(m: &StochasticMatrix) -> Self {
        Self::with_scale(m, None)
    }

    /// Uses `scale` when given; it must be a multiple of every denominator.
    pub fn with_scale(m: &StochasticMatrix, scale: Option<i128>) -> Self {
        use num_integer::Integer;
        use num_traits::ToPrimitive;
        let d = scale.map(BigInt::from).unwrap_or_else(|| {
            m.rows()
                .flat_map(|r| r.iter().map(|(_, p)| p.denom().clone()))
                .fold(BigInt::one(), |acc, d| acc.lcm(&d))
        });
        let rows = m
            .rows()
            .map(|r| {
                r.iter()
                    .map(|(y, p)| {
                        let a = p * Rational::from_integer(d.clone());
                        assert!(a.is_integer(), "scale is not a common denominator");
                        (*y, a.to_integer().to_i128().expect("entry fits i128"))
                    })
                    .collect()
            })
            .collect();
        IntegerChain {
            scale: d.to_i128().expect("scale fits i128"),
            rows,
        }
    }

    /// `v A`, failing on overflow.
    pub fn step(&self, v: &[i128]) -> Vec<i128> {
        let mut out = vec![0i128; v.len()];
        for (x, &p) in v.iter().enumerate().filter(|(_, p)| **p != 0) {
            for &(y, a) in &self.rows[x] {
                out[y] = out[y]
                    .checked_add(p.checked_mul(a).expect("overflow"))
                    .expect("overflow");
            }
        }
        out
    }
}

pub fn aggregate_int(v: &[i128], blocks: &[Vec<usize>]) -> Vec<i128> {
    blocks.iter().map(|b| b.iter().map(|&x| v[x]).sum()).collect()
}
