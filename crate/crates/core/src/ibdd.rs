//! Iterative BDD over the OFEC stream: passes, loop detection and the
//! sliding-window stream decoder.

use std::collections::VecDeque;
use std::ops::Range;
use std::sync::Arc;

use crate::bch::BddTag;
use crate::buffer::{ChunkBuffer, PassMode, PassStats};
use crate::chunk::Chunk;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::spr::{run_pipeline, spr_rapp, SprPipelineConfig, Subroutine};

/// One regular BDD sweep over `range`.
pub fn bdd_pass(buf: &mut ChunkBuffer, range: Range<i64>) -> Result<PassStats> {
    buf.pass(range, PassMode::Bdd)
}

/// One MRBDD sweep over `range`: flips into coupled positions are dropped.
pub fn mrbdd_pass(buf: &mut ChunkBuffer, range: Range<i64>) -> Result<PassStats> {
    buf.pass(range, PassMode::Mrbdd)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeSchedule {
    pub window: usize,
    pub passes_per_shift: usize,
    pub cleanup_passes: usize,
    /// Oldest chunks of the window that stall removal may act on.
    pub spr_span: usize,
    /// A stuck region counts as a stall only while the chunks SPR reads hold
    /// at most this many Failed codewords; larger clusters are left to BDD.
    pub max_failed: usize,
}

impl Default for DecodeSchedule {
    fn default() -> Self {
        DecodeSchedule { window: 24, passes_per_shift: 2, cleanup_passes: 2, spr_span: 4, max_failed: 12 }
    }
}

impl DecodeSchedule {
    pub fn min_window(geom: &Geometry) -> usize {
        2 * geom.depth() + geom.params().guard + 1
    }

    pub fn validate(&self, geom: &Geometry) -> Result<()> {
        let min = Self::min_window(geom);
        if self.window < min {
            return Err(Error::Config(format!("window {} below minimum {min}", self.window)));
        }
        if self.passes_per_shift == 0 {
            return Err(Error::Config("passes_per_shift must be at least 1".into()));
        }
        if self.spr_span == 0 || self.spr_span > geom.reach() + 1 {
            return Err(Error::Config(format!("spr_span must be in 1..={}", geom.reach() + 1)));
        }
        Ok(())
    }
}

/// Result of iterating BDD passes until nothing changes or a state repeats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Iteration {
    /// A pass changed no bits; `passes` counts the passes that did.
    Converged { passes: usize },
    /// The window state after pass `passes` equals the state `period` passes
    /// earlier although the pass flipped bits.
    Cycle { passes: usize, period: usize },
    /// Budget spent without convergence or a detected cycle.
    Exhausted { passes: usize },
}

/// How a pass visits the codewords of the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepOrder {
    /// Oldest chunk first, each decode seeing all earlier flips (the decoder's schedule).
    #[default]
    Sequential,
    /// All codewords decode the same snapshot; see [`ChunkBuffer::flooding_pass`].
    Flooding,
}

/// Runs sequential BDD passes over the whole window, with convergence and
/// period-1/period-2 detection.
pub fn iterate(buf: &mut ChunkBuffer, max_passes: usize) -> Result<Iteration> {
    iterate_with(buf, max_passes, SweepOrder::Sequential)
}

pub fn iterate_with(buf: &mut ChunkBuffer, max_passes: usize, order: SweepOrder) -> Result<Iteration> {
    let mut history: VecDeque<Vec<u128>> = VecDeque::with_capacity(3);
    history.push_back(buf.snapshot());
    for pass in 1..=max_passes {
        let w = buf.window();
        let st = match order {
            SweepOrder::Sequential => bdd_pass(buf, w)?,
            SweepOrder::Flooding => buf.flooding_pass(w)?,
        };
        if st.applied == 0 {
            return Ok(Iteration::Converged { passes: pass - 1 });
        }
        let snap = buf.snapshot();
        if history.back() == Some(&snap) {
            return Ok(Iteration::Cycle { passes: pass, period: 1 });
        }
        if history.len() == 2 && history[0] == snap {
            return Ok(Iteration::Cycle { passes: pass, period: 2 });
        }
        if history.len() == 2 {
            history.pop_front();
        }
        history.push_back(snap);
    }
    Ok(Iteration::Exhausted { passes: max_passes })
}

/// Stall-removal strategy applied before emitting a chunk.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum SprVariant {
    #[default]
    None,
    Rapp,
    Pipeline(SprPipelineConfig),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub chunks_in: u64,
    pub chunks_out: u64,
    pub passes: u64,
    pub stalls_detected: u64,
    pub spr_invocations: u64,
    pub spr1_flips: u64,
    pub spr2_flips: u64,
    pub spr3_flips: u64,
    pub rapp_flips: u64,
}

impl StreamStats {
    pub fn merge(&mut self, o: &StreamStats) {
        self.chunks_in += o.chunks_in;
        self.chunks_out += o.chunks_out;
        self.passes += o.passes;
        self.stalls_detected += o.stalls_detected;
        self.spr_invocations += o.spr_invocations;
        self.spr1_flips += o.spr1_flips;
        self.spr2_flips += o.spr2_flips;
        self.spr3_flips += o.spr3_flips;
        self.rapp_flips += o.rapp_flips;
    }
}

/// Sliding-window decoder. Chunks go in with [`StreamDecoder::push`]; once the
/// window is full, each push emits the oldest chunk.
#[derive(Debug, Clone)]
pub struct StreamDecoder {
    buf: ChunkBuffer,
    schedule: DecodeSchedule,
    spr: SprVariant,
    stats: StreamStats,
}

impl StreamDecoder {
    pub fn new(geom: Arc<Geometry>, schedule: DecodeSchedule, spr: SprVariant) -> Result<Self> {
        schedule.validate(&geom)?;
        if let SprVariant::Pipeline(cfg) = &spr {
            cfg.validate()?;
        }
        Ok(StreamDecoder { buf: ChunkBuffer::new(geom, 0), schedule, spr, stats: StreamStats::default() })
    }

    pub fn buffer(&self) -> &ChunkBuffer {
        &self.buf
    }

    pub fn stats(&self) -> &StreamStats {
        &self.stats
    }

    pub fn schedule(&self) -> &DecodeSchedule {
        &self.schedule
    }

    /// Feeds one received chunk; returns the emitted chunk, if any.
    pub fn push(&mut self, chunk: Chunk) -> Result<Option<(i64, Chunk)>> {
        self.buf.push(chunk);
        self.stats.chunks_in += 1;
        let stuck = self.run_passes(self.schedule.passes_per_shift)?;
        if self.buf.writable_len() >= self.schedule.window {
            return self.emit(stuck).map(Some);
        }
        Ok(None)
    }

    /// Emits every chunk still in the window, decoding as it drains.
    pub fn finish(&mut self) -> Result<Vec<(i64, Chunk)>> {
        let mut out = Vec::new();
        while self.buf.writable_len() > 0 {
            let stuck = self.run_passes(self.schedule.passes_per_shift)?;
            out.push(self.emit(stuck)?);
        }
        Ok(out)
    }

    /// Chunks whose state decides whether the oldest chunk is stalled.
    fn emission_region(&self) -> Range<i64> {
        let s = self.buf.window().start;
        s..s + self.buf.geometry().reach() as i64 + 1
    }

    /// Runs up to `n` passes and reports whether the emission region is
    /// stuck: unchanged by the last pass, or back to its state two passes
    /// earlier.
    fn run_passes(&mut self, n: usize) -> Result<bool> {
        let region = self.emission_region();
        let mut states = vec![self.buf.snapshot_range(region.clone())];
        for _ in 0..n {
            let w = self.buf.window();
            let applied = bdd_pass(&mut self.buf, w)?.applied;
            self.stats.passes += 1;
            states.push(self.buf.snapshot_range(region.clone()));
            if applied == 0 {
                break;
            }
        }
        let k = states.len() - 1;
        Ok(states[k] == states[k - 1] || (k >= 2 && states[k] == states[k - 2]))
    }

    /// A stall: the emission region is stuck, holds a Failed codeword, and
    /// the chunks stall removal reads hold few enough Failed codewords.
    fn stalled(&self, stuck: bool) -> bool {
        if !stuck {
            return false;
        }
        let region = self.emission_region();
        if self.buf.count_tags(region.clone(), BddTag::Failed) == 0 {
            return false;
        }
        let reach = self.buf.geometry().reach() as i64;
        let reads = region.start..(region.start + 2 * reach + 1).min(self.buf.window().end);
        self.buf.count_tags(reads, BddTag::Failed) <= self.schedule.max_failed
    }

    fn emit(&mut self, stuck: bool) -> Result<(i64, Chunk)> {
        let s = self.buf.window().start;
        let scope = s..s + self.schedule.spr_span as i64;
        if self.stalled(stuck) {
            self.stats.stalls_detected += 1;
            match &self.spr {
                SprVariant::None => {}
                SprVariant::Rapp => {
                    self.stats.rapp_flips += spr_rapp(&mut self.buf, scope) as u64;
                    self.stats.spr_invocations += 1;
                    self.run_passes(self.schedule.cleanup_passes)?;
                }
                SprVariant::Pipeline(cfg) => {
                    for st in run_pipeline(&mut self.buf, cfg, scope)? {
                        let f = st.flips as u64;
                        match st.stage {
                            Subroutine::Spr1 => self.stats.spr1_flips += f,
                            Subroutine::Spr2 => self.stats.spr2_flips += f,
                            Subroutine::Spr3 => self.stats.spr3_flips += f,
                        }
                    }
                    self.stats.spr_invocations += 1;
                    self.run_passes(self.schedule.cleanup_passes)?;
                }
            }
        }
        self.stats.chunks_out += 1;
        Ok(self.buf.retire_oldest().expect("window not empty"))
    }
}

/// Decodes a finite stream to completion.
pub fn decode_stream(
    geom: Arc<Geometry>,
    source: impl IntoIterator<Item = Chunk>,
    schedule: DecodeSchedule,
    spr: SprVariant,
) -> Result<(Vec<Chunk>, StreamStats)> {
    let mut dec = StreamDecoder::new(geom, schedule, spr)?;
    let mut out = Vec::new();
    for c in source {
        if let Some((_, e)) = dec.push(c)? {
            out.push(e);
        }
    }
    out.extend(dec.finish()?.into_iter().map(|(_, c)| c));
    Ok((out, *dec.stats()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChunkAddress;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom() -> Arc<Geometry> {
        Arc::new(Geometry::default())
    }

    fn zero_buffer(n: usize) -> ChunkBuffer {
        let g = geom();
        let mut b = ChunkBuffer::new(Arc::clone(&g), 0);
        for _ in 0..n {
            b.push(Chunk::zeros(g.cols()));
        }
        b
    }

    #[test]
    fn schedule_validation() {
        let g = Geometry::default();
        assert_eq!(DecodeSchedule::min_window(&g), 19);
        assert!(DecodeSchedule::default().validate(&g).is_ok());
        assert!(DecodeSchedule { window: 18, ..Default::default() }.validate(&g).is_err());
        assert!(DecodeSchedule { passes_per_shift: 0, ..Default::default() }.validate(&g).is_err());
        assert!(DecodeSchedule { spr_span: 0, ..Default::default() }.validate(&g).is_err());
        assert!(DecodeSchedule { spr_span: 11, ..Default::default() }.validate(&g).is_ok());
        assert!(DecodeSchedule { spr_span: 12, ..Default::default() }.validate(&g).is_err());
    }

    fn cat1_stream() -> Vec<Chunk> {
        use crate::stall::{injected_stream, injection_base, ofec::{gen_cat1, Cat1Size}};
        let g = geom();
        let p = gen_cat1(&g, Cat1Size::Minimal, 0).unwrap();
        let len = (injection_base(&g) + p.span()) as usize + 30;
        injected_stream(&g, &p, len)
    }

    #[test]
    fn stuck_failed_region_counts_as_stall() {
        let (out, st) = decode_stream(geom(), cat1_stream(), DecodeSchedule::default(), SprVariant::None).unwrap();
        assert!(st.stalls_detected > 0);
        assert_eq!(st.spr_invocations, 0);
        assert!(out.iter().map(Chunk::count_ones).sum::<u64>() > 0);
    }

    #[test]
    fn failed_cluster_above_gate_is_not_a_stall() {
        let sched = DecodeSchedule { max_failed: 0, ..Default::default() };
        let (_, st) = decode_stream(geom(), cat1_stream(), sched, SprVariant::Rapp).unwrap();
        assert_eq!(st.stalls_detected, 0);
        assert_eq!(st.rapp_flips, 0);
    }

    #[test]
    fn rapp_clears_the_stall() {
        let (out, st) = decode_stream(geom(), cat1_stream(), DecodeSchedule::default(), SprVariant::Rapp).unwrap();
        assert!(st.spr_invocations > 0);
        assert_eq!(out.iter().map(Chunk::count_ones).sum::<u64>(), 0);
    }

    #[test]
    fn flooding_pass_decodes_one_snapshot() {
        let mut b = zero_buffer(24);
        b.flip(ChunkAddress::new(5, 3, 7));
        let before = b.clone();
        let st = b.flooding_pass(b.window()).unwrap();
        assert!(st.applied >= 1);
        assert_eq!(b.window_weight(), 0);
        let mut seq = before;
        assert_eq!(iterate_with(&mut seq, 10, SweepOrder::Flooding).unwrap(), Iteration::Converged { passes: 1 });
    }

    #[test]
    fn clean_buffer_stays_clean() {
        let mut b = zero_buffer(24);
        let st = bdd_pass(&mut b, 0..24).unwrap();
        assert_eq!(st.applied, 0);
        assert_eq!(b.count_tags(b.window(), BddTag::AlreadyCodeword), 24 * 32);
        let st = mrbdd_pass(&mut b, 0..24).unwrap();
        assert_eq!(st.applied, 0);
    }

    #[test]
    fn range_outside_window_is_error() {
        let mut b = zero_buffer(4);
        assert!(matches!(bdd_pass(&mut b, -1..4), Err(Error::OutOfWindow { .. })));
        assert!(matches!(bdd_pass(&mut b, 0..5), Err(Error::OutOfWindow { .. })));
    }

    #[test]
    fn single_error_removed_in_one_pass() {
        let g = geom();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let mut b = zero_buffer(24);
            let a = ChunkAddress::new(rng.random_range(0..13), rng.random_range(0..128), rng.random_range(0..32));
            b.flip(a);
            bdd_pass(&mut b, 0..24).unwrap();
            assert_eq!(b.window_weight(), 0);
            let coupled = g.coupled_position(a);
            let corrected: Vec<(i64, usize)> = (0..24)
                .flat_map(|c| (0..32).map(move |col| (c, col)))
                .filter(|&(c, col)| b.tag(c, col) == Some(BddTag::Corrected))
                .collect();
            assert_eq!(corrected.len(), 1);
            assert!(corrected[0] == (a.chunk, a.col) || corrected[0] == (coupled.chunk, coupled.col));
        }
    }

    #[test]
    fn mrbdd_leaves_virtual_only_errors_in_memory() {
        let g = geom();
        let mut b = zero_buffer(24);
        // Two errors in the virtual half of codeword (12, 5).
        let s0 = g.virtual_source(ChunkAddress::new(12, 7, 5));
        let s1 = g.virtual_source(ChunkAddress::new(12, 90, 5));
        b.flip(s0);
        b.flip(s1);
        let mut view = b.clone();
        let word = view.codeword(12, 5).unwrap();
        assert_eq!(word.weight(), 2);
        let e = view.decode_codeword(12, 5, PassMode::Mrbdd).unwrap();
        assert_eq!(e.tag, BddTag::Corrected);
        assert_eq!(e.applied, 0);
        assert_eq!(view.window_weight(), 2);
        let e = b.decode_codeword(12, 5, PassMode::Bdd).unwrap();
        assert_eq!(e.applied, 2);
        assert_eq!(b.window_weight(), 0);
    }

    #[test]
    fn flips_are_coherent() {
        let g = geom();
        let mut b = zero_buffer(24);
        let a = ChunkAddress::new(3, 50, 20);
        b.flip(a);
        let c = g.coupled_position(a);
        assert!(b.codeword(a.chunk, a.col).unwrap().get(128 + a.row));
        assert!(b.codeword(c.chunk, c.col).unwrap().get(c.row));
    }

    #[test]
    fn idempotent_at_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut b = zero_buffer(24);
            for _ in 0..60 {
                b.flip(ChunkAddress::new(rng.random_range(0..24), rng.random_range(0..128), rng.random_range(0..32)));
            }
            for _ in 0..50 {
                if bdd_pass(&mut b, 0..24).unwrap().applied == 0 {
                    break;
                }
            }
            let bits = b.snapshot();
            let tags = b.tag_snapshot();
            if bdd_pass(&mut b, 0..24).unwrap().applied == 0 {
                assert_eq!(b.snapshot(), bits);
                assert_eq!(b.tag_snapshot(), tags);
            }
        }
    }

    #[test]
    fn dirty_skipping_matches_full_sweeps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let mut fast = zero_buffer(24);
            for _ in 0..150 {
                fast.flip(ChunkAddress::new(rng.random_range(0..24), rng.random_range(0..128), rng.random_range(0..32)));
            }
            let mut slow = fast.clone();
            for _ in 0..6 {
                bdd_pass(&mut fast, 0..24).unwrap();
                for c in slow.window() {
                    for col in 0..32 {
                        slow.decode_codeword(c, col, PassMode::Bdd).unwrap();
                    }
                }
                assert_eq!(fast.snapshot(), slow.snapshot());
                assert_eq!(fast.tag_snapshot(), slow.tag_snapshot());
            }
        }
    }

    #[test]
    fn noiseless_stream_decodes_cleanly() {
        let g = geom();
        let chunks: Vec<Chunk> = (0..60).map(|_| Chunk::zeros(g.cols())).collect();
        let (out, st) = decode_stream(g, chunks, DecodeSchedule::default(), SprVariant::None).unwrap();
        assert_eq!(out.len(), 60);
        assert!(out.iter().all(|c| c.count_ones() == 0));
        assert_eq!(st.stalls_detected, 0);
    }

    #[test]
    fn sparse_correctable_errors_are_removed() {
        let g = geom();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let chunks: Vec<Chunk> = (0..200)
            .map(|i| {
                let mut c = Chunk::zeros(g.cols());
                if i % 7 == 0 {
                    c.flip(rng.random_range(0..128), rng.random_range(0..32));
                }
                c
            })
            .collect();
        let (out, _) = decode_stream(g, chunks, DecodeSchedule::default(), SprVariant::None).unwrap();
        assert!(out.iter().all(|c| c.count_ones() == 0));
    }

    #[test]
    fn iterate_reports_convergence() {
        let mut b = zero_buffer(24);
        b.flip(ChunkAddress::new(5, 5, 5));
        assert_eq!(iterate(&mut b, 10).unwrap(), Iteration::Converged { passes: 1 });
        assert_eq!(iterate(&mut b, 10).unwrap(), Iteration::Converged { passes: 0 });
    }
}
