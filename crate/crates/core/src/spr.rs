//! Stall-pattern removal: flag-driven bit flipping over a [`ChunkBuffer`].

use std::ops::Range;

use crate::bch::BddTag;
use crate::buffer::{ChunkBuffer, PassMode};
use crate::error::{Error, Result};
use crate::geometry::ChunkAddress;

/// Subroutines of the staged pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subroutine {
    Spr1,
    Spr2,
    Spr3,
}

/// Which columns SPR1/SPR2 clear after flipping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClearPolicy {
    /// Only the half-chunk whose columns triggered the flips.
    #[default]
    Half,
    FullChunk,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SprPipelineConfig {
    pub stages: Vec<Subroutine>,
    pub run_mrbdd_before_each: bool,
    pub run_bdd_after_each: bool,
    pub clear_policy: ClearPolicy,
}

impl Default for SprPipelineConfig {
    fn default() -> Self {
        SprPipelineConfig {
            stages: vec![Subroutine::Spr1, Subroutine::Spr2, Subroutine::Spr3],
            run_mrbdd_before_each: true,
            run_bdd_after_each: true,
            clear_policy: ClearPolicy::Half,
        }
    }
}

impl SprPipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Config("SPR pipeline needs at least one stage".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SprOutcome {
    pub flips: usize,
    pub cleared: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageStats {
    pub stage: Subroutine,
    pub flips: usize,
    pub cleared: usize,
    pub mrbdd_flips: usize,
    pub bdd_flips: usize,
    /// Failed flags left in the window after the stage.
    pub failed_after: usize,
}

#[inline]
fn failed_or_corrected(t: Option<BddTag>) -> bool {
    matches!(t, Some(BddTag::Failed | BddTag::Corrected))
}

/// Flips every bit of chunks in `scope` whose own and coupled codewords both
/// satisfy the given predicates on the current flags.
fn flag_sweep(buf: &mut ChunkBuffer, scope: Range<i64>, main_ok: impl Fn(BddTag) -> bool) -> usize {
    let w = buf.window();
    let lo = scope.start.max(w.start);
    let hi = scope.end.min(w.end);
    let rows = buf.geometry().rows();
    let cols = buf.geometry().cols();
    let mut targets = Vec::new();
    for chunk in lo..hi {
        for col in 0..cols {
            match buf.tag(chunk, col) {
                Some(t) if main_ok(t) => {}
                _ => continue,
            }
            for row in 0..rows {
                let addr = ChunkAddress::new(chunk, row, col);
                if buf.coupled_tag(addr) == Some(BddTag::Failed) {
                    targets.push(addr);
                }
            }
        }
    }
    targets.into_iter().filter(|&a| buf.flip(a)).count()
}

/// Baseline rule: flip a bit when both of its codewords failed.
pub fn spr_rapp(buf: &mut ChunkBuffer, scope: Range<i64>) -> usize {
    flag_sweep(buf, scope, |t| t == BddTag::Failed)
}

/// Like [`spr_rapp`], but a main codeword that was corrected also qualifies.
pub fn spr3(buf: &mut ChunkBuffer, scope: Range<i64>) -> usize {
    flag_sweep(buf, scope, |t| matches!(t, BddTag::Failed | BddTag::Corrected))
}

fn require_flags(buf: &ChunkBuffer, lo: i64, hi: i64) -> Result<()> {
    let w = buf.window();
    if lo < w.start || hi > w.end {
        return Err(Error::OutOfWindow { lo, hi, win_lo: w.start, win_hi: w.end });
    }
    Ok(())
}

/// Halves of chunk `i` holding at least one Failed or Corrected column.
fn triggered_halves(buf: &ChunkBuffer, i: i64) -> [bool; 2] {
    let mut out = [false; 2];
    for col in 0..buf.geometry().cols() {
        if failed_or_corrected(buf.tag(i, col)) {
            out[buf.geometry().half(col)] = true;
        }
    }
    out
}

/// Flips bits of `chunk`'s half `half` whose column tag satisfies `own` and
/// whose coupled codeword's tag satisfies `coupled`.
fn flip_half_by(
    buf: &mut ChunkBuffer,
    chunk: i64,
    half: usize,
    own: impl Fn(Option<BddTag>) -> bool,
    coupled: impl Fn(Option<BddTag>) -> bool,
) -> usize {
    let g = buf.geometry();
    let b = g.params().block_rows;
    let rows = g.rows();
    let mut targets = Vec::new();
    for col in half * b..(half + 1) * b {
        if !own(buf.tag(chunk, col)) {
            continue;
        }
        for row in 0..rows {
            let addr = ChunkAddress::new(chunk, row, col);
            if coupled(buf.coupled_tag(addr)) {
                targets.push(addr);
            }
        }
    }
    targets.into_iter().filter(|&a| buf.flip(a)).count()
}

/// SPR1 rule: own column Failed/Corrected, coupled codeword Failed.
fn flip_half(buf: &mut ChunkBuffer, chunk: i64, half: usize) -> usize {
    flip_half_by(buf, chunk, half, failed_or_corrected, |t| t == Some(BddTag::Failed))
}

/// SPR2 rule: own column Failed, coupled codeword Failed/Corrected.
fn flip_half_mirrored(buf: &mut ChunkBuffer, chunk: i64, half: usize) -> usize {
    flip_half_by(buf, chunk, half, |t| t == Some(BddTag::Failed), failed_or_corrected)
}

fn clear_range(buf: &mut ChunkBuffer, chunks: Range<i64>, half: usize, policy: ClearPolicy) -> usize {
    let g = buf.geometry();
    let b = g.params().block_rows;
    let cols = match policy {
        ClearPolicy::Half => half * b..(half + 1) * b,
        ClearPolicy::FullChunk => 0..g.cols(),
    };
    let mut n = 0;
    for chunk in chunks {
        for col in cols.clone() {
            if buf.clear_tag(chunk, col) {
                n += 1;
            }
        }
    }
    n
}

/// SPR1 at chunk `i`: flips bits of `X(i)` and clears the flipped half over
/// `X(i)..=X(i+depth)`.
pub fn spr1(buf: &mut ChunkBuffer, i: i64, policy: ClearPolicy) -> Result<SprOutcome> {
    let depth = buf.geometry().depth() as i64;
    let reach = buf.geometry().reach() as i64;
    require_flags(buf, i, i + reach + 1)?;
    let mut out = SprOutcome::default();
    for (half, hit) in triggered_halves(buf, i).into_iter().enumerate() {
        if !hit {
            continue;
        }
        let f = flip_half(buf, i, half);
        if f > 0 {
            out.flips += f;
            out.cleared += clear_range(buf, i..i + depth + 1, half, policy);
        }
    }
    Ok(out)
}

/// SPR2 at chunk `i`: the same bits of `X(i)` seen from their coupled side.
/// For each triggered half, flips the bits of `X(i)` whose column Failed and
/// whose coupled codeword (in the opposite half of `X(i+guard+1)..=X(i+reach)`)
/// Failed or was corrected; then clears `X(i)..=X(i+depth)` and
/// `X(i+guard+1)..=X(i+2 depth+guard)`.
pub fn spr2(buf: &mut ChunkBuffer, i: i64, policy: ClearPolicy) -> Result<SprOutcome> {
    let depth = buf.geometry().depth() as i64;
    let guard = buf.geometry().params().guard as i64;
    require_flags(buf, i, i + 2 * depth + guard + 1)?;
    let mut out = SprOutcome::default();
    for (half, hit) in triggered_halves(buf, i).into_iter().enumerate() {
        if !hit {
            continue;
        }
        let f = flip_half_mirrored(buf, i, half);
        if f > 0 {
            out.flips += f;
            out.cleared += clear_range(buf, i..i + depth + 1, half, policy);
            out.cleared += clear_range(buf, i + guard + 1..i + 2 * depth + guard + 1, 1 - half, policy);
        }
    }
    Ok(out)
}

/// Chunk indices of `scope` at which `stage` has all the flags it reads.
fn eligible(buf: &ChunkBuffer, scope: &Range<i64>, stage: Subroutine) -> Range<i64> {
    let reach = buf.geometry().reach() as i64;
    let depth = buf.geometry().depth() as i64;
    let need = match stage {
        Subroutine::Spr1 => reach,
        Subroutine::Spr2 => reach + depth,
        Subroutine::Spr3 => 0,
    };
    let w = buf.window();
    scope.start.max(w.start)..scope.end.min(w.end - need)
}

/// Runs the staged pipeline. SPR1/SPR2 are scanned over `scope` oldest first;
/// SPR3 sweeps `scope`. BDD/MRBDD passes cover the whole window.
pub fn run_pipeline(buf: &mut ChunkBuffer, config: &SprPipelineConfig, scope: Range<i64>) -> Result<Vec<StageStats>> {
    config.validate()?;
    let mut stats = Vec::with_capacity(config.stages.len());
    for &stage in &config.stages {
        let mut s = StageStats { stage, flips: 0, cleared: 0, mrbdd_flips: 0, bdd_flips: 0, failed_after: 0 };
        if config.run_mrbdd_before_each {
            s.mrbdd_flips = buf.pass(buf.window(), PassMode::Mrbdd)?.applied;
        }
        match stage {
            Subroutine::Spr1 | Subroutine::Spr2 => {
                for i in eligible(buf, &scope, stage) {
                    let o = if stage == Subroutine::Spr1 {
                        spr1(buf, i, config.clear_policy)?
                    } else {
                        spr2(buf, i, config.clear_policy)?
                    };
                    s.flips += o.flips;
                    s.cleared += o.cleared;
                }
            }
            Subroutine::Spr3 => s.flips = spr3(buf, scope.clone()),
        }
        if config.run_bdd_after_each {
            s.bdd_flips = buf.pass(buf.window(), PassMode::Bdd)?.applied;
        }
        s.failed_after = buf.count_tags(buf.window(), BddTag::Failed);
        stats.push(s);
    }
    Ok(stats)
}
