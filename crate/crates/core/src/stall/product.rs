//! Product-code reference model: an n x n array whose rows and columns are
//! eBCH(32,21) codewords, decoded by alternating row and column BDD phases.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bch::{ebch32, BddOutcome, BddTag, ExtendedBch, Word};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductModel {
    /// Error bits: bit `c` of `rows[r]` is position (r, c).
    rows: Vec<u32>,
    row_tags: Vec<BddTag>,
    col_tags: Vec<BddTag>,
}

/// Outcome of iterating the model; passes count half-iterations (phases).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcIteration {
    Converged { phases: usize },
    Cycle { phases: usize, period: usize },
    Exhausted { phases: usize },
}

impl Default for ProductModel {
    fn default() -> Self {
        Self::new()
    }
}

impl ProductModel {
    pub fn code() -> &'static ExtendedBch {
        ebch32()
    }

    pub fn new() -> Self {
        let n = Self::code().n();
        ProductModel {
            rows: vec![0; n],
            row_tags: vec![BddTag::AlreadyCodeword; n],
            col_tags: vec![BddTag::AlreadyCodeword; n],
        }
    }

    pub fn with_errors(errors: &[(usize, usize)]) -> Self {
        let mut m = Self::new();
        for &(r, c) in errors {
            m.flip(r, c);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn flip(&mut self, r: usize, c: usize) {
        self.rows[r] ^= 1 << c;
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r] >> c & 1 == 1
    }

    pub fn weight(&self) -> usize {
        self.rows.iter().map(|r| r.count_ones() as usize).sum()
    }

    pub fn errors(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).filter(|&(r, c)| self.get(r, c)).collect()
    }

    pub fn row_tag(&self, r: usize) -> BddTag {
        self.row_tags[r]
    }

    pub fn col_tag(&self, c: usize) -> BddTag {
        self.col_tags[c]
    }

    fn row_word(&self, r: usize) -> Word {
        Word([self.rows[r] as u64, 0, 0, 0])
    }

    fn col_word(&self, c: usize) -> Word {
        let mut v = 0u64;
        for (r, &row) in self.rows.iter().enumerate() {
            v |= ((row >> c & 1) as u64) << r;
        }
        Word([v, 0, 0, 0])
    }

    /// Decodes every row in order; returns the number of flipped bits.
    pub fn row_phase(&mut self) -> usize {
        let mut flips = 0;
        for r in 0..self.n() {
            let out = Self::code().decode(&self.row_word(r));
            self.row_tags[r] = out.tag();
            if let BddOutcome::Corrected(f) = out {
                for &c in &f {
                    self.flip(r, c as usize);
                }
                flips += f.len();
            }
        }
        flips
    }

    /// Decodes every column in order; returns the number of flipped bits.
    pub fn col_phase(&mut self) -> usize {
        let mut flips = 0;
        for c in 0..self.n() {
            let out = Self::code().decode(&self.col_word(c));
            self.col_tags[c] = out.tag();
            if let BddOutcome::Corrected(f) = out {
                for &r in &f {
                    self.flip(r as usize, c);
                }
                flips += f.len();
            }
        }
        flips
    }

    /// One iteration: all rows, then all columns.
    pub fn iteration(&mut self) -> usize {
        self.row_phase() + self.col_phase()
    }

    /// Alternates phases until an iteration flips nothing or the error state
    /// after a phase repeats one seen earlier.
    pub fn iterate(&mut self, max_phases: usize) -> PcIteration {
        let mut history: Vec<Vec<u32>> = vec![self.rows.clone()];
        let mut quiet = 0;
        for phase in 1..=max_phases {
            let f = if phase % 2 == 1 { self.row_phase() } else { self.col_phase() };
            if f == 0 {
                quiet += 1;
                if quiet == 2 {
                    return PcIteration::Converged { phases: phase };
                }
                history.push(self.rows.clone());
                continue;
            }
            quiet = 0;
            if let Some(pos) = history.iter().rposition(|h| *h == self.rows) {
                return PcIteration::Cycle { phases: phase, period: phase - pos };
            }
            history.push(self.rows.clone());
        }
        PcIteration::Exhausted { phases: max_phases }
    }

    /// Baseline SPR: flip every bit whose row and column both failed.
    pub fn spr_rapp(&mut self) -> usize {
        self.flag_flip(|row, col| row == BddTag::Failed && col == BddTag::Failed)
    }

    /// Rows play the main codeword: flip when the row failed or was corrected
    /// and the column failed.
    pub fn spr3(&mut self) -> usize {
        self.flag_flip(|row, col| matches!(row, BddTag::Failed | BddTag::Corrected) && col == BddTag::Failed)
    }

    fn flag_flip(&mut self, rule: impl Fn(BddTag, BddTag) -> bool) -> usize {
        let n = self.n();
        let mut count = 0;
        for r in 0..n {
            for c in 0..n {
                if rule(self.row_tags[r], self.col_tags[c]) {
                    self.flip(r, c);
                    count += 1;
                }
            }
        }
        count
    }
}

/// The smallest Category 1 stall: (t+1) x (t+1) errors.
pub fn cat1_minimal() -> Vec<(usize, usize)> {
    let t = ebch32().t();
    let idx: Vec<usize> = (0..=t).map(|i| 3 + 7 * i).collect();
    idx.iter().flat_map(|&r| idx.iter().map(move |&c| (r, c))).collect()
}

/// (t+2) x (t+2) grid with the diagonal crossings left empty.
pub fn cat1_enlarged() -> Vec<(usize, usize)> {
    let t = ebch32().t();
    let rows: Vec<usize> = (0..t + 2).map(|i| 2 + 6 * i).collect();
    let cols: Vec<usize> = (0..t + 2).map(|i| 5 + 5 * i).collect();
    let mut out = Vec::new();
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            if i != j {
                out.push((r, c));
            }
        }
    }
    out
}

/// A verified Category 2 pattern on the product code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcCat2 {
    pub errors: Vec<(usize, usize)>,
    /// Row that miscorrects.
    pub heavy_row: usize,
    pub gray_rows: Vec<usize>,
    pub gray_cols: Vec<usize>,
    /// Positions the miscorrection introduces.
    pub miscorrection: Vec<(usize, usize)>,
}

/// Searches for a Category 2 pattern shaped like the classic loop: a heavy row
/// with errors on 2(t+1) columns, and 2t rows with t+1 errors each that
/// cover every one of those columns exactly t times. The heavy row must
/// miscorrect onto clean columns, which correct the new errors back, so
/// phase-wise decoding cycles with period 2.
pub fn search_cat2(seed: u64, budget: usize) -> Result<PcCat2> {
    let code = ebch32();
    let n = code.n();
    let t = code.t();
    let width = 2 * (t + 1);
    let height = 2 * t;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'attempt: for _ in 0..budget {
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        let mut cols: Vec<usize> = (0..n).collect();
        cols.shuffle(&mut rng);
        let heavy_row = rows[0];
        let gray_rows: Vec<usize> = rows[1..=height].to_vec();
        let gray_cols: Vec<usize> = cols[..width].to_vec();

        let mut w = Word::default();
        for &c in &gray_cols {
            w.flip(c);
        }
        let BddOutcome::Corrected(flips) = code.decode(&w) else { continue };
        if flips.iter().any(|&c| gray_cols.contains(&(c as usize))) {
            continue;
        }

        // Gray rows pick t+1 columns each, every column used exactly t times.
        let mut left = vec![t; width];
        let mut errs: BTreeSet<(usize, usize)> = gray_cols.iter().map(|&c| (heavy_row, c)).collect();
        for &r in &gray_rows {
            let mut open: Vec<usize> = (0..width).filter(|&j| left[j] > 0).collect();
            open.shuffle(&mut rng);
            open.sort_by_key(|&j| std::cmp::Reverse(left[j]));
            if open.len() < t + 1 {
                continue 'attempt;
            }
            for &j in &open[..t + 1] {
                left[j] -= 1;
                errs.insert((r, gray_cols[j]));
            }
        }
        let errors: Vec<(usize, usize)> = errs.into_iter().collect();
        let mut probe = ProductModel::with_errors(&errors);
        if !matches!(probe.iterate(40), PcIteration::Cycle { period: 2, .. }) {
            continue;
        }
        return Ok(PcCat2 {
            errors,
            heavy_row,
            gray_rows,
            gray_cols,
            miscorrection: flips.iter().map(|&c| (heavy_row, c as usize)).collect(),
        });
    }
    Err(Error::SearchExhausted(budget))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settle(m: &mut ProductModel) {
        for _ in 0..4 {
            m.iteration();
        }
    }

    #[test]
    fn components_correct_up_to_two_errors() {
        let mut m = ProductModel::with_errors(&[(1, 1), (1, 9), (20, 4)]);
        m.iteration();
        assert_eq!(m.weight(), 0);
    }

    #[test]
    fn minimal_cat1_stalls_and_rapp_removes_it() {
        let mut m = ProductModel::with_errors(&cat1_minimal());
        assert_eq!(m.weight(), 9);
        assert!(matches!(m.iterate(20), PcIteration::Converged { .. }));
        assert_eq!(m.weight(), 9);
        let failed = (0..32).filter(|&i| m.row_tag(i) == BddTag::Failed).count()
            + (0..32).filter(|&i| m.col_tag(i) == BddTag::Failed).count();
        assert_eq!(failed, 6);
        assert_eq!(m.spr_rapp(), 9);
        assert_eq!(m.weight(), 0);
    }

    #[test]
    fn enlarged_cat1_leaves_four_crossings_for_cleanup() {
        let grid = cat1_enlarged();
        assert_eq!(grid.len(), 12);
        let mut m = ProductModel::with_errors(&grid);
        settle(&mut m);
        assert_eq!(m.weight(), 12);
        assert_eq!(m.spr_rapp(), 16);
        assert_eq!(m.weight(), 4);
        let rows: BTreeSet<usize> = m.errors().iter().map(|e| e.0).collect();
        let cols: BTreeSet<usize> = m.errors().iter().map(|e| e.1).collect();
        assert_eq!((rows.len(), cols.len()), (4, 4));
        m.iteration();
        m.iteration();
        assert_eq!(m.weight(), 0);
    }

    #[test]
    fn cat2_loops_with_period_two() {
        let p = search_cat2(1, 200_000).unwrap();
        let code = ebch32();
        let heavy = p.errors.iter().filter(|e| e.0 == p.heavy_row).count();
        assert!(heavy >= code.d_min() - code.t());
        for &r in &p.gray_rows {
            assert_eq!(p.errors.iter().filter(|e| e.0 == r).count(), code.t() + 1);
        }
        for &c in &p.gray_cols {
            assert_eq!(p.errors.iter().filter(|e| e.1 == c).count(), code.t() + 1);
        }
        let mut m = ProductModel::with_errors(&p.errors);
        let start = m.clone().errors();
        m.row_phase();
        assert_eq!(m.row_tag(p.heavy_row), BddTag::Corrected);
        for &(r, c) in &p.miscorrection {
            assert!(m.get(r, c));
        }
        m.col_phase();
        assert_eq!(m.errors(), start);
        let mut again = ProductModel::with_errors(&p.errors);
        assert!(matches!(again.iterate(40), PcIteration::Cycle { period: 2, .. }));
    }

    #[test]
    fn cat2_defeats_rapp_but_not_spr3() {
        let mut resolved_by_rapp = 0;
        let mut resolved_by_spr3 = 0;
        for seed in 0..10 {
            let p = search_cat2(seed, 200_000).unwrap();
            let mut base = ProductModel::with_errors(&p.errors);
            settle(&mut base);
            let mut r = base.clone();
            r.spr_rapp();
            settle(&mut r);
            let mut s = base.clone();
            s.spr3();
            settle(&mut s);
            assert!((0..32).all(|c| !p.gray_cols.contains(&c) || r.col_tag(c) == BddTag::Failed));
            resolved_by_rapp += (r.weight() == 0) as usize;
            resolved_by_spr3 += (s.weight() == 0) as usize;
        }
        assert_eq!((resolved_by_rapp, resolved_by_spr3), (0, 10));
    }

    #[test]
    fn search_is_deterministic() {
        assert_eq!(search_cat2(4, 200_000).unwrap(), search_cat2(4, 200_000).unwrap());
    }
}
