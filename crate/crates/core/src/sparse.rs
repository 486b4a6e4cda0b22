//! Row-major sparse stochastic matrices over exact rationals, and the
//! `row col num/den` text format.

use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rational::{format_ratio, parse_rational_at, to_f64, Rational};

/// Sparse row-stochastic matrix. Columns within a row are strictly
/// ascending and every stored entry is nonzero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochasticMatrix {
    rows: Vec<Vec<(usize, Rational)>>,
}

impl StochasticMatrix {
    /// Validates exact row-stochasticity.
    pub fn from_rows(rows: Vec<Vec<(usize, Rational)>>) -> Result<Self> {
        Self::from_rows_with_tolerance(rows, None)
    }

    /// As [`StochasticMatrix::from_rows`], but row sums only need to be within
    /// `tolerance` of one. Meant for chains imported from floating-point tools.
    pub fn from_rows_with_tolerance(mut rows: Vec<Vec<(usize, Rational)>>, tolerance: Option<f64>) -> Result<Self> {
        let n = rows.len();
        for (x, row) in rows.iter_mut().enumerate() {
            row.retain(|(_, p)| !p.is_zero());
            row.sort_by_key(|&(c, _)| c);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::validation(format!("row {x} has a duplicate column")));
            }
            if let Some((c, _)) = row.iter().find(|(c, _)| *c >= n) {
                return Err(Error::dimension(format!("row {x} has column {c} outside 0..{n}")));
            }
            if let Some((c, p)) = row.iter().find(|(_, p)| p.is_negative()) {
                return Err(Error::validation(format!("entry ({x}, {c}) is negative: {p}")));
            }
            let sum: Rational = row.iter().map(|(_, p)| p).sum();
            let ok = match tolerance {
                None => sum.is_one(),
                Some(eps) => (to_f64(&sum) - 1.0).abs() <= eps,
            };
            if !ok {
                return Err(Error::validation(format!("row {x} sums to {sum} ≠ 1")));
            }
        }
        Ok(StochasticMatrix { rows })
    }

    pub(crate) fn from_rows_unchecked(rows: Vec<Vec<(usize, Rational)>>) -> Self {
        StochasticMatrix { rows }
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, x: usize) -> &[(usize, Rational)] {
        &self.rows[x]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[(usize, Rational)]> {
        self.rows.iter().map(Vec::as_slice)
    }

    /// Entry `(x, y)`; zero when absent.
    pub fn get(&self, x: usize, y: usize) -> Rational {
        let row = &self.rows[x];
        match row.binary_search_by_key(&y, |&(c, _)| c) {
            Ok(k) => row[k].1.clone(),
            Err(_) => Rational::zero(),
        }
    }

    pub(crate) fn get_ref(&self, x: usize, y: usize) -> Option<&Rational> {
        let row = &self.rows[x];
        row.binary_search_by_key(&y, |&(c, _)| c).ok().map(|k| &row[k].1)
    }

    /// All `(x, y)` with a nonzero entry, row-major.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(x, row)| row.iter().map(move |&(y, _)| (x, y)))
            .collect()
    }

    /// Row vector times matrix, `μ P`.
    pub fn left_mul(&self, mu: &[Rational]) -> Result<Vec<Rational>> {
        if mu.len() != self.n_states() {
            return Err(Error::dimension(format!(
                "vector has {} entries, matrix has {} states",
                mu.len(),
                self.n_states()
            )));
        }
        let mut out = vec![Rational::zero(); self.n_states()];
        for (x, m) in mu.iter().enumerate() {
            if m.is_zero() {
                continue;
            }
            for (y, p) in &self.rows[x] {
                out[*y] += m * p;
            }
        }
        Ok(out)
    }

    pub fn to_f64_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .par_iter()
            .map(|row| {
                let mut dense = vec![0.0; self.n_states()];
                for (y, p) in row {
                    dense[*y] = to_f64(p);
                }
                dense
            })
            .collect()
    }

    /// `states=<n> nnz=<m>` followed by `row col num/den` lines, rows and
    /// columns ascending.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "states={} nnz={}", self.n_states(), self.nnz());
        for (x, row) in self.rows.iter().enumerate() {
            for (y, p) in row {
                let _ = writeln!(out, "{x} {y} {}", format_ratio(p));
            }
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        Self::parse_text_with_tolerance(text, None)
    }

    /// Entries may be `num/den`, integers, or decimals (read exactly).
    pub fn parse_text_with_tolerance(text: &str, tolerance: Option<f64>) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut rows: Vec<Vec<(usize, Rational)>> = Vec::new();
        let mut count = 0usize;
        for (k, raw) in text.lines().enumerate() {
            let number = k + 1;
            let line = raw.split_once('#').map_or(raw, |(h, _)| h).trim();
            if line.is_empty() {
                continue;
            }
            let Some((n, m)) = header else {
                header = Some(parse_header(line, number)?);
                rows = vec![Vec::new(); header.unwrap().0];
                continue;
            };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let [x, y, p] = tokens.as_slice() else {
                return Err(Error::syntax(number, "expected `row col num/den`"));
            };
            let parse_idx = |t: &str| {
                t.parse::<usize>()
                    .ok()
                    .filter(|&v| v < n)
                    .ok_or_else(|| Error::syntax(number, format!("state index `{t}` outside 0..{n}")))
            };
            let (x, y) = (parse_idx(x)?, parse_idx(y)?);
            rows[x].push((y, parse_rational_at(p, number)?));
            count += 1;
            if count > m {
                return Err(Error::syntax(number, format!("more entries than the declared nnz={m}")));
            }
        }
        let Some((_, m)) = header else {
            return Err(Error::syntax(1, "missing `states=<n> nnz=<m>` header"));
        };
        if count != m {
            return Err(Error::validation(format!(
                "header declares nnz={m} but {count} entries follow"
            )));
        }
        Self::from_rows_with_tolerance(rows, tolerance)
    }
}

fn parse_header(line: &str, number: usize) -> Result<(usize, usize)> {
    let mut states = None;
    let mut nnz = None;
    for token in line.split_whitespace() {
        match token.split_once('=') {
            Some(("states", v)) => states = v.parse().ok(),
            Some(("nnz", v)) => nnz = v.parse().ok(),
            _ => return Err(Error::syntax(number, format!("unexpected header token `{token}`"))),
        }
    }
    match (states, nnz) {
        (Some(s), Some(m)) => Ok((s, m)),
        _ => Err(Error::syntax(number, "expected `states=<n> nnz=<m>`")),
    }
}
