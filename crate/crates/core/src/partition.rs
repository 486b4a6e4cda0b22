//! Partitions of a chain's state set into macro states.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Disjoint, covering, nonempty blocks with one label each. Block members
/// are kept sorted; block order is whatever the constructor chose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
    labels: Vec<String>,
    block_of: Vec<usize>,
}

fn valid_block_label(label: &str) -> bool {
    !label.is_empty() && !label.contains([':', '\n', '\r', '#']) && label.trim() == label
}

impl Partition {
    pub fn new(mut blocks: Vec<Vec<usize>>, labels: Vec<String>, n_states: usize) -> Result<Self> {
        if blocks.len() != labels.len() {
            return Err(Error::validation("partition needs exactly one label per block"));
        }
        let mut block_of = vec![usize::MAX; n_states];
        for (k, block) in blocks.iter_mut().enumerate() {
            if block.is_empty() {
                return Err(Error::validation(format!("block `{}` is empty", labels[k])));
            }
            block.sort_unstable();
            for &x in block.iter() {
                let slot = block_of
                    .get_mut(x)
                    .ok_or_else(|| Error::dimension(format!("state {x} outside 0..{n_states}")))?;
                if *slot != usize::MAX {
                    return Err(Error::validation(format!("state {x} appears in more than one block")));
                }
                *slot = k;
            }
        }
        if let Some(x) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(Error::validation(format!("state {x} is not covered by any block")));
        }
        for (k, label) in labels.iter().enumerate() {
            if !valid_block_label(label) {
                return Err(Error::validation(format!("invalid block label `{label}`")));
            }
            if labels[..k].contains(label) {
                return Err(Error::validation(format!("duplicate block label `{label}`")));
            }
        }
        Ok(Partition {
            blocks,
            labels,
            block_of,
        })
    }

    /// Builds blocks from a state → key map; blocks are ordered by their
    /// smallest member.
    pub fn from_keys<K: Eq + std::hash::Hash + Clone>(
        keys: &[K],
        label: impl Fn(&K, &[usize]) -> String,
    ) -> Result<Self> {
        let mut ids: std::collections::HashMap<K, usize> = std::collections::HashMap::new();
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut block_keys = Vec::new();
        for (x, key) in keys.iter().enumerate() {
            let id = *ids.entry(key.clone()).or_insert_with(|| {
                blocks.push(Vec::new());
                block_keys.push(key.clone());
                blocks.len() - 1
            });
            blocks[id].push(x);
        }
        let labels = block_keys.iter().zip(&blocks).map(|(k, b)| label(k, b)).collect();
        Partition::new(blocks, labels, keys.len())
    }

    /// Every state in its own block, labelled by its index.
    pub fn singletons(n_states: usize) -> Self {
        Partition {
            blocks: (0..n_states).map(|x| vec![x]).collect(),
            labels: (0..n_states).map(|x| x.to_string()).collect(),
            block_of: (0..n_states).collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.block_of.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &[usize] {
        &self.blocks[k]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, k: usize) -> &str {
        &self.labels[k]
    }

    pub fn block_of(&self, x: usize) -> usize {
        self.block_of[x]
    }

    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Same set partition, ignoring labels and block order.
    pub fn same_blocks(&self, other: &Partition) -> bool {
        if self.n_states() != other.n_states() || self.n_blocks() != other.n_blocks() {
            return false;
        }
        self.blocks.iter().all(|b| other.blocks[other.block_of[b[0]]] == *b)
    }

    /// True when every block of `self` lies inside one block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.n_states() == coarser.n_states()
            && self.blocks.iter().all(|b| {
                let target = coarser.block_of[b[0]];
                b.iter().all(|&x| coarser.block_of[x] == target)
            })
    }

    /// Expresses `coarser` as a partition of this partition's blocks, so a
    /// chain already lumped by `self` can be lumped further.
    pub fn quotient(&self, coarser: &Partition) -> Result<Partition> {
        if !self.refines(coarser) {
            return Err(Error::validation("partition does not refine the coarser partition"));
        }
        let blocks = coarser
            .blocks
            .iter()
            .map(|cb| {
                let mut fine: Vec<usize> = cb.iter().map(|&x| self.block_of[x]).collect();
                fine.sort_unstable();
                fine.dedup();
                fine
            })
            .collect();
        Partition::new(blocks, coarser.labels.clone(), self.n_blocks())
    }

    /// One line per block: `label: idx idx ...`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (label, block) in self.labels.iter().zip(&self.blocks) {
            let _ = write!(out, "{label}:");
            for x in block {
                let _ = write!(out, " {x}");
            }
            out.push('\n');
        }
        out
    }

    /// Reads the block-per-line format. `n_states` defaults to the number of
    /// indices listed.
    pub fn parse_text(text: &str, n_states: Option<usize>) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut labels = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(h, _)| h).trim();
            if line.is_empty() {
                continue;
            }
            let (label, members) = line
                .rsplit_once(':')
                .ok_or_else(|| Error::syntax(k + 1, "expected `label: idx idx ...`"))?;
            let members = members
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>()
                        .map_err(|_| Error::syntax(k + 1, format!("expected a state index, found `{t}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            labels.push(label.trim().to_string());
            blocks.push(members);
        }
        let n = n_states.unwrap_or_else(|| blocks.iter().map(Vec::len).sum());
        Partition::new(blocks, labels, n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|k| format!("B{k}")).collect()
    }

    #[test]
    fn validation() {
        assert!(Partition::new(vec![vec![0, 1], vec![2]], labels(2), 3).is_ok());
        assert!(Partition::new(vec![vec![0, 1], vec![1, 2]], labels(2), 3).is_err());
        assert!(Partition::new(vec![vec![0], vec![2]], labels(2), 3).is_err());
        assert!(Partition::new(vec![vec![0, 1, 2], vec![]], labels(2), 3).is_err());
        assert!(Partition::new(vec![vec![0, 3]], labels(1), 3).is_err());
        assert!(Partition::new(vec![vec![0], vec![1]], vec!["x".into(), "x".into()], 2).is_err());
        assert!(Partition::new(vec![vec![0, 1]], vec!["a:b".into()], 2).is_err());
    }

    #[test]
    fn text_round_trip() {
        let p = Partition::new(vec![vec![0], vec![3, 1, 2]], vec!["⟨3,0⟩".into(), "⟨2,1⟩".into()], 4).unwrap();
        let text = p.to_text();
        assert_eq!(text, "⟨3,0⟩: 0\n⟨2,1⟩: 1 2 3\n");
        assert_eq!(Partition::parse_text(&text, Some(4)).unwrap(), p);
        assert!(Partition::parse_text(&text, Some(5)).is_err());
    }

    #[test]
    fn refinement_and_quotient() {
        let fine = Partition::new(vec![vec![0], vec![1, 2], vec![3]], labels(3), 4).unwrap();
        let coarse = Partition::new(vec![vec![0, 3], vec![1, 2]], vec!["Y0".into(), "Y1".into()], 4).unwrap();
        assert!(fine.refines(&coarse));
        assert!(!coarse.refines(&fine));
        let q = fine.quotient(&coarse).unwrap();
        assert_eq!(q.blocks(), &[vec![0, 2], vec![1]]);
        assert!(coarse.quotient(&fine).is_err());
    }

    #[test]
    fn same_blocks_ignores_order_and_labels() {
        let a = Partition::new(vec![vec![0], vec![1, 2]], labels(2), 3).unwrap();
        let b = Partition::new(vec![vec![2, 1], vec![0]], vec!["x".into(), "y".into()], 3).unwrap();
        assert!(a.same_blocks(&b));
        assert!(!a.same_blocks(&Partition::singletons(3)));
    }
}
