//! The configuration space `Σ = S^N` and its Hamming graph `H(N, δ)`.
//!
//! States are indexed in mixed radix with agent 1 least significant:
//! `index = Σ code(x_i) · δ^(i-1)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{AttributeAlphabet, Code, ModelSpec};

/// Default upper bound on `δ^N` for full enumeration.
pub const DEFAULT_CAP: u64 = 1 << 24;

/// One assignment of attribute codes to agents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    codes: Vec<Code>,
}

impl Configuration {
    pub fn new(codes: Vec<Code>) -> Self {
        Configuration { codes }
    }

    pub fn codes(&self) -> &[Code] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn get(&self, agent: usize) -> Code {
        self.codes[agent]
    }

    pub fn set(&mut self, agent: usize, code: Code) {
        self.codes[agent] = code;
    }

    /// Renders as `(white,black,black)`.
    pub fn display<'a>(&'a self, alphabet: &'a AttributeAlphabet) -> impl fmt::Display + 'a {
        DisplayConfig { config: self, alphabet }
    }

    /// Parses `(white,black,black)` (parentheses optional).
    pub fn parse(text: &str, alphabet: &AttributeAlphabet) -> Result<Self> {
        let inner = text.trim().trim_start_matches('(').trim_end_matches(')');
        let codes = inner
            .split(',')
            .map(|label| {
                alphabet
                    .code_of(label.trim())
                    .ok_or_else(|| Error::validation(format!("unknown attribute `{}`", label.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Configuration { codes })
    }
}

struct DisplayConfig<'a> {
    config: &'a Configuration,
    alphabet: &'a AttributeAlphabet,
}

impl fmt::Display for DisplayConfig<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, &c) in self.config.codes.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            f.write_str(self.alphabet.label(c))?;
        }
        f.write_str(")")
    }
}

/// Fully enumerated configuration space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigSpace {
    n_agents: usize,
    delta: usize,
    size: usize,
    powers: Vec<usize>,
}

impl ConfigSpace {
    pub fn new(n_agents: usize, delta: usize) -> Result<Self> {
        Self::with_cap(n_agents, delta, DEFAULT_CAP)
    }

    pub fn with_cap(n_agents: usize, delta: usize, cap: u64) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::validation("configuration space needs at least one agent"));
        }
        if delta < 2 || delta > Code::MAX as usize {
            return Err(Error::validation(format!("unsupported alphabet size {delta}")));
        }
        let mut powers = Vec::with_capacity(n_agents + 1);
        let mut size: u64 = 1;
        powers.push(1usize);
        for _ in 0..n_agents {
            size = match size.checked_mul(delta as u64) {
                Some(s) if s <= cap => s,
                _ => {
                    return Err(Error::CapExceeded {
                        size: format!("{delta}^{n_agents}"),
                        cap,
                    })
                }
            };
            powers.push(size as usize);
        }
        Ok(ConfigSpace {
            n_agents,
            delta,
            size: size as usize,
            powers,
        })
    }

    pub fn for_model(spec: &ModelSpec, cap: u64) -> Result<Self> {
        Self::with_cap(spec.n_agents(), spec.delta(), cap)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `δ^agent`, the index stride of one agent.
    pub fn stride(&self, agent: usize) -> usize {
        self.powers[agent]
    }

    pub fn check(&self, c: &Configuration) -> Result<()> {
        if c.len() != self.n_agents {
            return Err(Error::dimension(format!(
                "configuration has {} agents, space has {}",
                c.len(),
                self.n_agents
            )));
        }
        if let Some(bad) = c.codes.iter().find(|&&x| x as usize >= self.delta) {
            return Err(Error::dimension(format!("code {bad} outside 0..{}", self.delta)));
        }
        Ok(())
    }

    pub fn index_of(&self, c: &Configuration) -> Result<usize> {
        self.check(c)?;
        Ok(c.codes.iter().zip(&self.powers).map(|(&x, &p)| x as usize * p).sum())
    }

    pub fn config_of(&self, index: usize) -> Result<Configuration> {
        if index >= self.size {
            return Err(Error::dimension(format!("index {index} outside 0..{}", self.size)));
        }
        Ok(Configuration {
            codes: (0..self.n_agents).map(|i| self.code_at(index, i)).collect(),
        })
    }

    /// Code of `agent` in the configuration with index `index`.
    #[inline]
    pub fn code_at(&self, index: usize, agent: usize) -> Code {
        ((index / self.powers[agent]) % self.delta) as Code
    }

    /// Index of the configuration obtained from `index` by setting `agent` to `code`.
    #[inline]
    pub fn with_code(&self, index: usize, agent: usize, code: Code) -> usize {
        let old = self.code_at(index, agent) as usize;
        index - old * self.powers[agent] + code as usize * self.powers[agent]
    }

    pub fn hamming_neighbors(&self, c: &Configuration) -> Result<Vec<(usize, Configuration)>> {
        self.check(c)?;
        let mut out = Vec::with_capacity((self.delta - 1) * self.n_agents);
        for i in 0..self.n_agents {
            for code in 0..self.delta as Code {
                if code != c.codes[i] {
                    let mut y = c.clone();
                    y.codes[i] = code;
                    out.push((i, y));
                }
            }
        }
        Ok(out)
    }

    /// Neighbor indices of `index`, same order as [`ConfigSpace::hamming_neighbors`].
    pub fn neighbor_indices(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_agents).flat_map(move |i| {
            let current = self.code_at(index, i);
            (0..self.delta as Code)
                .filter(move |&c| c != current)
                .map(move |c| self.with_code(index, i, c))
        })
    }

    /// Number of coordinates in which two states differ.
    pub fn hamming_distance(&self, a: usize, b: usize) -> usize {
        (0..self.n_agents)
            .filter(|&i| self.code_at(a, i) != self.code_at(b, i))
            .count()
    }

    pub fn attribute_counts(&self, c: &Configuration) -> Result<Vec<usize>> {
        self.check(c)?;
        let mut counts = vec![0; self.delta];
        for &x in &c.codes {
            counts[x as usize] += 1;
        }
        Ok(counts)
    }

    pub fn attribute_counts_of(&self, index: usize) -> Vec<usize> {
        let mut counts = vec![0; self.delta];
        for i in 0..self.n_agents {
            counts[self.code_at(index, i) as usize] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(codes: &[Code]) -> Configuration {
        Configuration::new(codes.to_vec())
    }

    #[test]
    fn index_examples() {
        let s = ConfigSpace::new(3, 3).unwrap();
        assert_eq!(s.index_of(&cfg(&[0, 0, 0])).unwrap(), 0);
        assert_eq!(s.index_of(&cfg(&[1, 0, 2])).unwrap(), 19);
        assert_eq!(s.config_of(19).unwrap(), cfg(&[1, 0, 2]));
    }

    #[test]
    fn binary_three_agents_bijective() {
        let s = ConfigSpace::new(3, 2).unwrap();
        let mut seen = [false; 8];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let idx = s.index_of(&cfg(&[a, b, c])).unwrap();
                    assert!(!seen[idx]);
                    seen[idx] = true;
                }
            }
        }
        assert!(seen.iter().all(|&x| x));
    }

    #[test]
    fn invalid_configurations() {
        let s = ConfigSpace::new(3, 2).unwrap();
        assert!(matches!(s.index_of(&cfg(&[0, 0])), Err(Error::Dimension(_))));
        assert!(matches!(s.index_of(&cfg(&[0, 2, 0])), Err(Error::Dimension(_))));
        assert!(s.config_of(8).is_err());
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            ConfigSpace::with_cap(10, 2, 1000),
            Err(Error::CapExceeded { .. })
        ));
        assert!(ConfigSpace::with_cap(10, 2, 1024).is_ok());
        assert!(matches!(ConfigSpace::new(64, 3), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn neighbors_of_white_black_black() {
        // black = 0, white = 1
        let s = ConfigSpace::new(3, 2).unwrap();
        let n = s.hamming_neighbors(&cfg(&[1, 0, 0])).unwrap();
        let ys: Vec<_> = n.into_iter().map(|(i, y)| (i, y.codes().to_vec())).collect();
        assert_eq!(ys, vec![(0, vec![0, 0, 0]), (1, vec![1, 1, 0]), (2, vec![1, 0, 1])]);
    }

    #[test]
    fn neighbor_counts_and_symmetry() {
        let s = ConfigSpace::new(2, 3).unwrap();
        for x in 0..s.size() {
            let nx: Vec<usize> = s.neighbor_indices(x).collect();
            assert_eq!(nx.len(), 4);
            for &y in &nx {
                assert!(s.neighbor_indices(y).any(|z| z == x));
                assert_eq!(s.hamming_distance(x, y), 1);
            }
            let listed: Vec<usize> = s
                .hamming_neighbors(&s.config_of(x).unwrap())
                .unwrap()
                .iter()
                .map(|(_, y)| s.index_of(y).unwrap())
                .collect();
            assert_eq!(listed, nx);
        }
    }

    #[test]
    fn counts() {
        let s = ConfigSpace::new(3, 2).unwrap();
        assert_eq!(s.attribute_counts(&cfg(&[0, 1, 0])).unwrap(), vec![2, 1]);
        assert_eq!(s.attribute_counts(&cfg(&[1, 1, 1])).unwrap(), vec![0, 3]);
        for x in 0..8 {
            assert_eq!(s.attribute_counts_of(x).iter().sum::<usize>(), 3);
        }
    }

    #[test]
    fn display_and_parse() {
        let a = AttributeAlphabet::black_white();
        let c = cfg(&[1, 0, 0]);
        assert_eq!(c.display(&a).to_string(), "(white,black,black)");
        assert_eq!(Configuration::parse("(white,black,black)", &a).unwrap(), c);
    }
}
