//! Stall-pattern construction, injection and verification.

pub mod corpus;
pub mod ofec;
pub mod product;

use std::sync::Arc;

use crate::buffer::ChunkBuffer;
use crate::chunk::Chunk;
use crate::error::Result;
use crate::geometry::{ChunkAddress, Geometry};
use crate::ibdd::{iterate, Iteration};

/// A set of bit errors on the OFEC stream. Chunk indices are relative to the
/// pattern's oldest chunk (0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorPattern {
    pub positions: Vec<ChunkAddress>,
    pub category: u8,
    pub seed: u64,
    pub label: String,
}

impl ErrorPattern {
    pub fn new(mut positions: Vec<ChunkAddress>, category: u8, seed: u64, label: impl Into<String>) -> Self {
        positions.sort();
        positions.dedup();
        if let Some(lo) = positions.iter().map(|a| a.chunk).min() {
            for a in &mut positions {
                a.chunk -= lo;
            }
        }
        ErrorPattern { positions, category, seed, label: label.into() }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Highest relative chunk index touched (0 when empty).
    pub fn span(&self) -> i64 {
        self.positions.iter().map(|a| a.chunk).max().unwrap_or(0)
    }

    /// Error counts of every codeword touched by the pattern, keyed by
    /// (chunk, column) of the codeword's transmitted half.
    pub fn codeword_weights(&self, geom: &Geometry) -> std::collections::BTreeMap<(i64, usize), usize> {
        let mut m = std::collections::BTreeMap::new();
        for &a in &self.positions {
            *m.entry((a.chunk, a.col)).or_insert(0) += 1;
            let c = geom.coupled_position(a);
            *m.entry((c.chunk, c.col)).or_insert(0) += 1;
        }
        m
    }
}

/// Chunk at which patterns are injected, so every codeword they touch has a
/// writable virtual half.
pub fn injection_base(geom: &Geometry) -> i64 {
    geom.reach() as i64
}

/// All-zero buffer with the pattern injected at [`injection_base`], long
/// enough to hold every flag that SPR reads around it.
pub fn injected_buffer(geom: Arc<Geometry>, pattern: &ErrorPattern, min_len: usize) -> ChunkBuffer {
    let base = injection_base(&geom);
    let len = ((base + pattern.span()) as usize + 2 * geom.reach() + 1).max(min_len);
    let mut buf = ChunkBuffer::new(Arc::clone(&geom), 0);
    for _ in 0..len {
        buf.push(Chunk::zeros(geom.cols()));
    }
    for &a in &pattern.positions {
        buf.flip(ChunkAddress::new(a.chunk + base, a.row, a.col));
    }
    buf
}

/// Injects a pattern into an otherwise all-zero received stream of `len` chunks.
pub fn injected_stream(geom: &Geometry, pattern: &ErrorPattern, len: usize) -> Vec<Chunk> {
    let base = injection_base(geom);
    let mut out = vec![Chunk::zeros(geom.cols()); len];
    for &a in &pattern.positions {
        out[(a.chunk + base) as usize].flip(a.row, a.col);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The state repeats (period 1 or 2) with residual errors.
    Stalls,
    /// All errors removed after the given number of changing passes.
    Resolves(usize),
    /// Pass budget exhausted while bits still change.
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StallReport {
    pub verdict: Verdict,
    pub residual: u64,
    pub iteration: Iteration,
}

/// Runs plain iBDD on the injected pattern for at most `max_passes` passes.
pub fn verify_stall(geom: Arc<Geometry>, pattern: &ErrorPattern, max_passes: usize) -> Result<StallReport> {
    let mut buf = injected_buffer(geom, pattern, 0);
    let iteration = iterate(&mut buf, max_passes)?;
    let residual = buf.window_weight();
    let verdict = match iteration {
        Iteration::Converged { passes } if residual == 0 => Verdict::Resolves(passes),
        Iteration::Converged { .. } | Iteration::Cycle { .. } => Verdict::Stalls,
        Iteration::Exhausted { .. } => Verdict::Unresolved,
    };
    Ok(StallReport { verdict, residual, iteration })
}
