//! Stall-pattern generators on the OFEC geometry.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{verify_stall, ErrorPattern, Verdict};
use crate::bch::{ebch256, BddOutcome, Word};
use crate::error::{Error, Result};
use crate::geometry::{ChunkAddress, Geometry};
use crate::ibdd::Iteration;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cat1Size {
    /// (t+1) x (t+1) grid of intersections.
    Minimal,
    /// (t+2) x (t+2) grid with one diagonal of crossings left empty.
    Enlarged,
}

type Codeword = (i64, usize);

/// Codeword (other than `(addr.chunk, addr.col)`) that contains `addr`.
fn partner(geom: &Geometry, addr: ChunkAddress) -> Codeword {
    let c = geom.coupled_position(addr);
    (c.chunk, c.col)
}

/// Transmitted address of bit `p` (0..n) of codeword `w`.
fn bit_of(geom: &Geometry, w: Codeword, p: usize) -> ChunkAddress {
    let n = geom.rows();
    if p >= n {
        ChunkAddress::new(w.0, p - n, w.1)
    } else {
        geom.virtual_source(ChunkAddress::new(w.0, p, w.1))
    }
}

/// Codeword position of a transmitted address inside codeword `w`.
fn position_in(geom: &Geometry, w: Codeword, a: ChunkAddress) -> usize {
    if (a.chunk, a.col) == w {
        geom.rows() + a.row
    } else {
        geom.coupled_position(a).row
    }
}

/// Error word seen by codeword `w` when exactly the addresses in `errs` are wrong.
fn word_of(geom: &Geometry, w: Codeword, errs: &BTreeSet<ChunkAddress>) -> Word {
    let mut word = Word::default();
    for &a in errs {
        if (a.chunk, a.col) == w || partner(geom, a) == w {
            word.flip(position_in(geom, w, a));
        }
    }
    word
}

/// Generates a Category 1 pattern: every touched codeword holds exactly t+1 errors.
pub fn gen_cat1(geom: &Geometry, size: Cat1Size, seed: u64) -> Result<ErrorPattern> {
    let t = ebch256().t();
    let m = match size {
        Cat1Size::Minimal => t + 1,
        Cat1Size::Enlarged => t + 2,
    };
    let b = geom.params().block_rows;
    if b < m {
        return Err(Error::Config(format!("half-chunk of {b} columns cannot hold a {m}-wide grid")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = rng.random_range(0..2);
    let mut cols: Vec<usize> = (half * b..(half + 1) * b).collect();
    cols.shuffle(&mut rng);
    cols.truncate(m);
    cols.sort_unstable();

    let depth = geom.depth();
    let guard = geom.params().guard;
    let mut candidates: Vec<(usize, usize)> = (guard + 1..=depth + guard)
        .flat_map(|gap| ((1 - half) * b..(2 - half) * b).map(move |pc| (gap, pc)))
        .filter(|&(gap, pc)| cols.iter().all(|&c| geom.intersection(c, gap, pc).is_some()))
        .collect();
    if candidates.len() < m {
        return Err(Error::Config("geometry too small for the intersection grid".into()));
    }
    candidates.shuffle(&mut rng);
    candidates.truncate(m);

    let mut positions = Vec::new();
    for (ci, &c) in cols.iter().enumerate() {
        for (pi, &(gap, pc)) in candidates.iter().enumerate() {
            if size == Cat1Size::Enlarged && ci == pi {
                continue;
            }
            let row = geom.intersection(c, gap, pc).expect("checked above");
            positions.push(ChunkAddress::new(0, row, c));
        }
    }
    let label = match size {
        Cat1Size::Minimal => "cat1-minimal",
        Cat1Size::Enlarged => "cat1-enlarged",
    };
    Ok(ErrorPattern::new(positions, 1, seed, label))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cat2Options {
    /// Largest pattern the closure step may build.
    pub max_errors: usize,
    /// Pass budget for loop verification.
    pub max_passes: usize,
    /// Accept only loops of this period (1 or 2); `None` accepts either.
    pub period: Option<usize>,
}

impl Default for Cat2Options {
    fn default() -> Self {
        Cat2Options { max_errors: 24, max_passes: 60, period: None }
    }
}

/// Details of a verified Category 2 pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cat2Info {
    /// Relative (chunk, col) of the codeword carrying d_min - t errors.
    pub seed_codeword: Codeword,
    /// Bits (transmitted addresses, relative) the miscorrection flips.
    pub miscorrection: Vec<ChunkAddress>,
    pub period: usize,
    pub attempts: usize,
}

/// Searches for a Category 2 pattern: one codeword with d_min - t errors that
/// miscorrects, every other touched codeword failing, and plain iBDD caught in
/// a loop. Up to `budget` candidates are tried.
pub fn gen_cat2(geom: Arc<Geometry>, seed: u64, budget: usize, opts: Cat2Options) -> Result<(ErrorPattern, Cat2Info)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=budget {
        let Some((errs, a, flips)) = cat2_candidate(&geom, &mut rng, opts.max_errors) else {
            continue;
        };
        let positions: Vec<ChunkAddress> = errs.iter().copied().collect();
        let lo = positions.iter().map(|p| p.chunk).min().unwrap();
        let pattern = ErrorPattern::new(positions, 2, seed, "cat2");
        let report = verify_stall(Arc::clone(&geom), &pattern, opts.max_passes)?;
        let period = match (report.verdict, report.iteration) {
            (Verdict::Stalls, Iteration::Cycle { period, .. }) => period,
            _ => continue,
        };
        if opts.period.is_some_and(|p| p != period) {
            continue;
        }
        let shift = |x: ChunkAddress| ChunkAddress::new(x.chunk - lo, x.row, x.col);
        let info = Cat2Info {
            seed_codeword: (a.0 - lo, a.1),
            miscorrection: flips.into_iter().map(shift).collect(),
            period,
            attempts: attempt,
        };
        return Ok((pattern, info));
    }
    Err(Error::SearchExhausted(budget))
}

type Candidate = (BTreeSet<ChunkAddress>, Codeword, Vec<ChunkAddress>);

fn cat2_candidate(geom: &Geometry, rng: &mut ChaCha8Rng, max_errors: usize) -> Option<Candidate> {
    let code = ebch256();
    let n = geom.rows();
    let b = geom.params().block_rows;
    let heavy = code.d_min() - code.t();
    let half = rng.random_range(0..2);
    let a: Codeword = (0, half * b + rng.random_range(0..b));

    // Seed codeword: d_min - t errors in its transmitted half that miscorrect.
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(rng);
    rows.truncate(heavy);
    let mut word = Word::default();
    for &r in &rows {
        word.flip(n + r);
    }
    let flips = match code.decode(&word) {
        BddOutcome::Corrected(f) => f,
        _ => return None,
    };

    // Column-like codewords share the seed's half; row-like ones are their
    // coupled partners in the other half.
    let gray_count = rng.random_range(2..=4);
    let mut columns = vec![a];
    while columns.len() < gray_count + 1 {
        let c = (rng.random_range(-3..=3), half * b + rng.random_range(0..b));
        if !columns.contains(&c) {
            columns.push(c);
        }
    }
    let mut row_like: Vec<Codeword> = rows.iter().map(|&r| partner(geom, ChunkAddress::new(0, r, a.1))).collect();
    for _ in 0..rng.random_range(0..=2) {
        let g = columns[rng.random_range(1..columns.len())];
        let w = partner(geom, ChunkAddress::new(g.0, rng.random_range(0..n), g.1));
        if !row_like.contains(&w) {
            row_like.push(w);
        }
    }

    let mut errs: BTreeSet<ChunkAddress> = rows.iter().map(|&r| ChunkAddress::new(0, r, a.1)).collect();
    let density: f64 = rng.random_range(0.5..=1.0);
    for &g in &columns[1..] {
        for &w in &row_like {
            let gap = w.0 - g.0;
            if gap <= 0 {
                continue;
            }
            if let Some(r) = geom.intersection(g.1, gap as usize, w.1) {
                if rng.random_bool(density) {
                    errs.insert(ChunkAddress::new(g.0, r, g.1));
                }
            }
        }
    }
    if errs.len() > max_errors {
        return None;
    }

    // Every touched codeword except the seed must fail on its own.
    let touched: BTreeSet<Codeword> = errs.iter().flat_map(|&e| [(e.chunk, e.col), partner(geom, e)]).collect();
    for &w in &touched {
        let outcome = code.decode(&word_of(geom, w, &errs));
        if w == a {
            if outcome != BddOutcome::Corrected(flips.clone()) {
                return None;
            }
        } else if outcome != BddOutcome::Failed {
            return None;
        }
    }
    let mis = flips.iter().map(|&p| bit_of(geom, a, p as usize)).collect();
    Some((errs, a, mis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bch::BddTag;
    use crate::ibdd::bdd_pass;
    use crate::stall::injected_buffer;

    fn g() -> Arc<Geometry> {
        Arc::new(Geometry::default())
    }

    #[test]
    fn minimal_cat1_shape() {
        let geom = g();
        for seed in 0..20 {
            let p = gen_cat1(&geom, Cat1Size::Minimal, seed).unwrap();
            assert_eq!(p.len(), 9);
            let w = p.codeword_weights(&geom);
            assert_eq!(w.len(), 6);
            assert!(w.values().all(|&k| k == 3));
        }
    }

    #[test]
    fn enlarged_cat1_shape() {
        let geom = g();
        for seed in 0..20 {
            let p = gen_cat1(&geom, Cat1Size::Enlarged, seed).unwrap();
            assert_eq!(p.len(), 12);
            let w = p.codeword_weights(&geom);
            assert_eq!(w.len(), 8);
            assert!(w.values().all(|&k| k == 3));
        }
    }

    #[test]
    fn cat1_is_a_fixed_point() {
        let geom = g();
        for size in [Cat1Size::Minimal, Cat1Size::Enlarged] {
            let p = gen_cat1(&geom, size, 3).unwrap();
            let mut buf = injected_buffer(Arc::clone(&geom), &p, 0);
            let before = buf.snapshot();
            let w = buf.window();
            for _ in 0..10 {
                assert_eq!(bdd_pass(&mut buf, w.clone()).unwrap().applied, 0);
            }
            assert_eq!(buf.snapshot(), before);
            let failed = buf.count_tags(w, BddTag::Failed);
            assert_eq!(failed, if size == Cat1Size::Minimal { 6 } else { 8 });
            assert_eq!(verify_stall(Arc::clone(&geom), &p, 10).unwrap().verdict, Verdict::Stalls);
        }
    }

    #[test]
    fn cat2_search_returns_verified_miscorrection() {
        let geom = g();
        let (p, info) = gen_cat2(Arc::clone(&geom), 1, 20_000, Cat2Options::default()).unwrap();
        let errs: BTreeSet<ChunkAddress> = p.positions.iter().copied().collect();
        let seed_word = word_of(&geom, info.seed_codeword, &errs);
        assert_eq!(seed_word.weight(), 4);
        match ebch256().decode(&seed_word) {
            BddOutcome::Corrected(f) => {
                let mut fixed = seed_word;
                for &q in &f {
                    fixed.flip(q as usize);
                }
                assert!(ebch256().is_codeword(&fixed));
                assert_ne!(fixed, Word::default());
            }
            o => panic!("{o:?}"),
        }
        assert_eq!(verify_stall(geom, &p, 60).unwrap().verdict, Verdict::Stalls);
    }

    #[test]
    fn cat2_search_is_deterministic() {
        let geom = g();
        let a = gen_cat2(Arc::clone(&geom), 9, 20_000, Cat2Options::default()).unwrap();
        let b = gen_cat2(geom, 9, 20_000, Cat2Options::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cat2_budget_exhaustion() {
        assert!(matches!(
            gen_cat2(g(), 1, 0, Cat2Options::default()),
            Err(Error::SearchExhausted(0))
        ));
    }
}
