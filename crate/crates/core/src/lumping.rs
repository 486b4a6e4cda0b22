//! Strong lumpability (Kemeny–Snell) and construction of the lumped chain.
//!
//! A partition is lumpable iff, for every pair of blocks `X_k`, `X_l`, the
//! mass `Σ_{y ∈ X_l} P̂(x, y)` is the same for all `x ∈ X_k`. Because rows sum
//! to one, only targets `l ≠ k` need comparing; the mass kept inside `X_k`
//! then agrees as well.

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::configspace::ConfigSpace;
use crate::error::{Error, LumpWitness, Result};
use crate::model::Code;
use crate::partition::Partition;
use crate::rational::{to_f64, Rational};
use crate::sparse::StochasticMatrix;
use crate::symmetry::count_label;

#[derive(Debug, Clone, Copy, Default)]
pub struct LumpOptions {
    /// Compare block sums up to an absolute tolerance instead of exactly.
    /// Only meant for chains imported from floating-point sources.
    pub tolerance: Option<f64>,
    /// Report every violating `(state, target block)` instead of stopping at
    /// the first.
    pub exhaustive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LumpVerdict {
    Lumpable,
    NotLumpable(Vec<LumpWitness>),
}

impl LumpVerdict {
    pub fn is_lumpable(&self) -> bool {
        matches!(self, LumpVerdict::Lumpable)
    }

    pub fn first_witness(&self) -> Option<&LumpWitness> {
        match self {
            LumpVerdict::Lumpable => None,
            LumpVerdict::NotLumpable(w) => w.first(),
        }
    }
}

/// Per-block mass of one row, as sparse `(block, sum)` sorted by block.
fn block_sums(matrix: &StochasticMatrix, part: &Partition, x: usize) -> Vec<(usize, Rational)> {
    let mut sums: Vec<(usize, Rational)> = Vec::new();
    for (y, p) in matrix.row(x) {
        let b = part.block_of(*y);
        match sums.iter_mut().find(|(k, _)| *k == b) {
            Some((_, s)) => *s += p,
            None => sums.push((b, p.clone())),
        }
    }
    sums.sort_by_key(|&(b, _)| b);
    sums
}

fn lookup(sums: &[(usize, Rational)], block: usize) -> Rational {
    sums.iter()
        .find(|(b, _)| *b == block)
        .map(|(_, s)| s.clone())
        .unwrap_or_else(Rational::zero)
}

fn check_covers(matrix: &StochasticMatrix, part: &Partition) -> Result<()> {
    if part.n_states() != matrix.n_states() {
        return Err(Error::dimension(format!(
            "partition covers {} states, chain has {}",
            part.n_states(),
            matrix.n_states()
        )));
    }
    Ok(())
}

/// Reference state of a block: its largest member. Every other member is
/// compared against it.
fn reference(block: &[usize]) -> usize {
    *block.last().expect("blocks are nonempty")
}

pub fn check_lumpable(matrix: &StochasticMatrix, part: &Partition) -> Result<LumpVerdict> {
    check_lumpable_with(matrix, part, LumpOptions::default())
}

pub fn check_lumpable_with(matrix: &StochasticMatrix, part: &Partition, opts: LumpOptions) -> Result<LumpVerdict> {
    check_covers(matrix, part)?;
    let sums: Vec<Vec<(usize, Rational)>> = (0..matrix.n_states())
        .into_par_iter()
        .map(|x| block_sums(matrix, part, x))
        .collect();
    let equal = |a: &Rational, b: &Rational| match opts.tolerance {
        None => a == b,
        Some(eps) => (to_f64(a) - to_f64(b)).abs() <= eps,
    };
    let mut witnesses = Vec::new();
    for (k, block) in part.blocks().iter().enumerate() {
        let r = reference(block);
        for &x in block.iter().filter(|&&x| x != r) {
            for l in (0..part.n_blocks()).filter(|&l| l != k) {
                let (sr, sx) = (lookup(&sums[r], l), lookup(&sums[x], l));
                if !equal(&sr, &sx) {
                    witnesses.push(LumpWitness {
                        source_block: k,
                        target_block: l,
                        state: r,
                        other_state: x,
                        state_sum: sr,
                        other_sum: sx,
                    });
                    if !opts.exhaustive {
                        return Ok(LumpVerdict::NotLumpable(witnesses));
                    }
                }
            }
        }
    }
    Ok(if witnesses.is_empty() {
        LumpVerdict::Lumpable
    } else {
        LumpVerdict::NotLumpable(witnesses)
    })
}

/// The lumped chain `(X, P)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroChain {
    partition: Partition,
    matrix: StochasticMatrix,
}

impl MacroChain {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn matrix(&self) -> &StochasticMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> StochasticMatrix {
        self.matrix
    }

    /// Number of micro states the chain was lumped from.
    pub fn origin_states(&self) -> usize {
        self.partition.n_states()
    }

    /// Transition probability between blocks named by label.
    pub fn prob(&self, from: &str, to: &str) -> Option<Rational> {
        let k = self.partition.block_index(from)?;
        let l = self.partition.block_index(to)?;
        Some(self.matrix.get(k, l))
    }
}

pub fn lump(matrix: &StochasticMatrix, part: &Partition) -> Result<MacroChain> {
    lump_with(matrix, part, LumpOptions::default())
}

pub fn lump_with(matrix: &StochasticMatrix, part: &Partition, opts: LumpOptions) -> Result<MacroChain> {
    let verdict = check_lumpable_with(
        matrix,
        part,
        LumpOptions {
            exhaustive: false,
            ..opts
        },
    )?;
    if let LumpVerdict::NotLumpable(mut w) = verdict {
        return Err(Error::NotLumpable(Box::new(w.swap_remove(0))));
    }
    let rows = representative_rows(matrix, part);
    let matrix = match opts.tolerance {
        None => StochasticMatrix::from_rows(rows)?,
        Some(eps) => StochasticMatrix::from_rows_with_tolerance(rows, Some(eps))?,
    };
    Ok(MacroChain {
        partition: part.clone(),
        matrix,
    })
}

/// Macro rows read off each block's reference state, without checking
/// lumpability. For a non-lumpable partition this is just one of many
/// possible aggregations.
pub fn lump_by_representative(matrix: &StochasticMatrix, part: &Partition) -> Result<MacroChain> {
    check_covers(matrix, part)?;
    let rows = representative_rows(matrix, part);
    Ok(MacroChain {
        partition: part.clone(),
        matrix: StochasticMatrix::from_rows(rows)?,
    })
}

fn representative_rows(matrix: &StochasticMatrix, part: &Partition) -> Vec<Vec<(usize, Rational)>> {
    part.blocks()
        .iter()
        .map(|b| block_sums(matrix, part, reference(b)))
        .collect()
}

/// Blocks of equal attribute-count vectors, labelled `⟨k_1,...,k_δ⟩` and
/// ordered by smallest member.
pub fn frequency_partition(space: &ConfigSpace) -> Result<Partition> {
    let keys: Vec<Vec<usize>> = (0..space.size()).map(|x| space.attribute_counts_of(x)).collect();
    Partition::from_keys(&keys, |counts, _| count_label(counts))
}

/// `X_k = {x : k agents hold the distinguished attribute}`, `k = 0..N`.
pub fn moran_partition(space: &ConfigSpace, distinguished: Code) -> Result<Partition> {
    if distinguished as usize >= space.delta() {
        return Err(Error::validation(format!(
            "attribute code {distinguished} outside 0..{}",
            space.delta()
        )));
    }
    let n = space.n_agents();
    let mut blocks = vec![Vec::new(); n + 1];
    for x in 0..space.size() {
        blocks[space.attribute_counts_of(x)[distinguished as usize]].push(x);
    }
    let labels = (0..=n).map(|k| format!("X_{k}")).collect();
    Partition::new(blocks, labels, space.size())
}

/// `Y_k = X_k ∪ X_{N-k}`, `k = 0..⌊N/2⌋`, for binary alphabets.
pub fn half_hypercube_partition(space: &ConfigSpace) -> Result<Partition> {
    if space.delta() != 2 {
        return Err(Error::validation(format!(
            "half-hypercube partition needs δ = 2, got {}",
            space.delta()
        )));
    }
    let n = space.n_agents();
    let mut blocks = vec![Vec::new(); n / 2 + 1];
    for x in 0..space.size() {
        let k = space.attribute_counts_of(x)[1];
        blocks[k.min(n - k)].push(x);
    }
    let labels = (0..=n / 2).map(|k| format!("Y_{k}")).collect();
    Partition::new(blocks, labels, space.size())
}

/// Pairs `{X_k, X_{N-k}}` on a line of `n + 1` macro states `X_0..X_N`.
pub fn line_pairing(n: usize) -> Result<Partition> {
    let blocks = (0..=n / 2)
        .map(|k| if k == n - k { vec![k] } else { vec![k, n - k] })
        .collect();
    let labels = (0..=n / 2).map(|k| format!("Y_{k}")).collect();
    Partition::new(blocks, labels, n + 1)
}

/// Exact macro row sums; `true` when every row of the lumped chain sums to 1.
pub fn macro_is_stochastic(chain: &MacroChain) -> bool {
    chain
        .matrix()
        .rows()
        .all(|row| row.iter().map(|(_, p)| p).sum::<Rational>().is_one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::DEFAULT_CAP;
    use crate::microchain::{build_micro_chain, MicroChain};
    use crate::model::{ModelSpec, Topology};
    use crate::rational::ratio;

    const B: usize = 4;
    const C: usize = 2;

    fn voter(t: Topology) -> MicroChain {
        build_micro_chain(&ModelSpec::builtin_voter(t).unwrap(), DEFAULT_CAP).unwrap()
    }

    #[test]
    fn complete_voter_is_frequency_lumpable() {
        let chain = voter(Topology::complete(3).unwrap());
        let part = frequency_partition(chain.space()).unwrap();
        assert!(check_lumpable(chain.matrix(), &part).unwrap().is_lumpable());
        let m = lump(chain.matrix(), &part).unwrap();
        assert_eq!(m.prob("⟨2,1⟩", "⟨3,0⟩"), Some(ratio(1, 3)));
        assert_eq!(m.prob("⟨2,1⟩", "⟨2,1⟩"), Some(ratio(1, 3)));
        assert_eq!(m.prob("⟨2,1⟩", "⟨1,2⟩"), Some(ratio(1, 3)));
        assert_eq!(m.prob("⟨3,0⟩", "⟨3,0⟩"), Some(ratio(1, 1)));
        assert!(macro_is_stochastic(&m));
        assert_eq!(m.origin_states(), 8);
    }

    #[test]
    fn path_voter_rejects_frequency_partition() {
        let chain = voter(Topology::path(3).unwrap());
        let part = frequency_partition(chain.space()).unwrap();
        let verdict = check_lumpable(chain.matrix(), &part).unwrap();
        let w = verdict.first_witness().unwrap();
        assert_eq!((w.state, w.other_state), (B, C));
        assert_eq!(part.label(w.target_block), "⟨1,2⟩");
        assert_eq!((w.state_sum.clone(), w.other_sum.clone()), (ratio(1, 6), ratio(2, 3)));
        let err = lump(chain.matrix(), &part).unwrap_err();
        assert!(matches!(err, Error::NotLumpable(_)));
    }

    #[test]
    fn exhaustive_mode_reports_more() {
        let chain = voter(Topology::path(3).unwrap());
        let part = frequency_partition(chain.space()).unwrap();
        let opts = LumpOptions {
            exhaustive: true,
            ..Default::default()
        };
        match check_lumpable_with(chain.matrix(), &part, opts).unwrap() {
            LumpVerdict::NotLumpable(w) => assert!(w.len() > 1),
            LumpVerdict::Lumpable => panic!(),
        }
    }

    #[test]
    fn singletons_always_lumpable() {
        let chain = voter(Topology::path(4).unwrap());
        let part = Partition::singletons(chain.space().size());
        assert!(check_lumpable(chain.matrix(), &part).unwrap().is_lumpable());
        assert_eq!(lump(chain.matrix(), &part).unwrap().matrix(), chain.matrix());
    }

    #[test]
    fn canonical_partition_sizes() {
        let s = ConfigSpace::new(8, 3).unwrap();
        assert_eq!(frequency_partition(&s).unwrap().n_blocks(), 45);
        let s = ConfigSpace::new(5, 2).unwrap();
        assert_eq!(frequency_partition(&s).unwrap().n_blocks(), 6);
        assert!(moran_partition(&s, 0)
            .unwrap()
            .same_blocks(&frequency_partition(&s).unwrap()));
        let s = ConfigSpace::new(2, 3).unwrap();
        let m = moran_partition(&s, 1).unwrap();
        let sizes: Vec<usize> = m.blocks().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 4, 1]);
        assert!(moran_partition(&s, 3).is_err());
    }

    #[test]
    fn half_hypercube() {
        let s3 = ConfigSpace::new(3, 2).unwrap();
        let h = half_hypercube_partition(&s3).unwrap();
        assert_eq!(h.blocks(), &[vec![0, 7], vec![1, 2, 3, 4, 5, 6]]);
        assert_eq!(
            half_hypercube_partition(&ConfigSpace::new(4, 2).unwrap())
                .unwrap()
                .n_blocks(),
            3
        );
        assert!(half_hypercube_partition(&ConfigSpace::new(3, 3).unwrap()).is_err());

        let chain = voter(Topology::complete(3).unwrap());
        let m = lump(chain.matrix(), &h).unwrap();
        assert_eq!(m.prob("Y_1", "Y_1"), Some(ratio(2, 3)));
        assert_eq!(m.prob("Y_1", "Y_0"), Some(ratio(1, 3)));
    }

    #[test]
    fn tolerance_mode_accepts_rounded_chain() {
        let text =
            "states=3 nnz=5\n0 0 1\n1 0 0.333333333333\n1 1 0.666666666667\n2 0 0.333333333334\n2 2 0.666666666666\n";
        let m = StochasticMatrix::parse_text_with_tolerance(text, Some(1e-9)).unwrap();
        let part = Partition::new(vec![vec![0], vec![1, 2]], vec!["A".into(), "B".into()], 3).unwrap();
        assert!(!check_lumpable(&m, &part).unwrap().is_lumpable());
        let opts = LumpOptions {
            tolerance: Some(1e-9),
            exhaustive: false,
        };
        assert!(check_lumpable_with(&m, &part, opts).unwrap().is_lumpable());
        assert!(lump_with(&m, &part, opts).is_ok());
    }

    #[test]
    fn line_pairs() {
        let p = line_pairing(4).unwrap();
        assert_eq!(p.blocks(), &[vec![0, 4], vec![1, 3], vec![2]]);
        assert_eq!(line_pairing(3).unwrap().n_blocks(), 2);
    }

    #[test]
    fn mismatched_partition() {
        let chain = voter(Topology::complete(3).unwrap());
        assert!(check_lumpable(chain.matrix(), &Partition::singletons(4)).is_err());
    }
}
