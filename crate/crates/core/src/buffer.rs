//! Windowed storage of decoder bits and per-codeword flags.
//!
//! Every bit is stored once, at its transmitted home. A codeword's virtual
//! half is read through the coupling map, so a flip is seen by both codewords
//! that contain the bit. Chunks below `writable_from` are read-only history
//! (genesis zeros or already emitted chunks) and keep no flags.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::bch::{ebch256, BddOutcome, BddTag, Word};
use crate::chunk::Chunk;
use crate::error::{Error, Result};
use crate::geometry::{ChunkAddress, Geometry};

#[derive(Debug, Clone)]
struct Slot {
    bits: Chunk,
    tags: Vec<BddTag>,
    dirty: Vec<bool>,
}

/// Which flips a decode is allowed to write back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassMode {
    /// Regular BDD: every flip is applied.
    Bdd,
    /// Miscorrection-reduction BDD: only flips in the codeword's transmitted half.
    Mrbdd,
}

#[derive(Debug, Clone)]
pub struct ChunkBuffer {
    geom: Arc<Geometry>,
    first: i64,
    writable_from: i64,
    slots: VecDeque<Slot>,
}

impl ChunkBuffer {
    /// Empty buffer whose first writable chunk will be `start`; the preceding
    /// `reach` chunks are all-zero history.
    pub fn new(geom: Arc<Geometry>, start: i64) -> Self {
        let reach = geom.reach() as i64;
        let cols = geom.cols();
        let slots = (0..reach).map(|_| Slot::history(Chunk::zeros(cols))).collect();
        ChunkBuffer { geom, first: start - reach, writable_from: start, slots }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn geometry_arc(&self) -> Arc<Geometry> {
        Arc::clone(&self.geom)
    }

    /// Writable (decodable) chunk range.
    pub fn window(&self) -> std::ops::Range<i64> {
        self.writable_from..self.end()
    }

    /// One past the newest chunk.
    pub fn end(&self) -> i64 {
        self.first + self.slots.len() as i64
    }

    pub fn writable_len(&self) -> usize {
        (self.end() - self.writable_from) as usize
    }

    pub fn push(&mut self, chunk: Chunk) {
        assert_eq!(chunk.cols.len(), self.geom.cols());
        let cols = self.geom.cols();
        self.slots.push_back(Slot { bits: chunk, tags: vec![BddTag::AlreadyCodeword; cols], dirty: vec![true; cols] });
    }

    /// Retires the oldest writable chunk to read-only history and returns a copy.
    pub fn retire_oldest(&mut self) -> Option<(i64, Chunk)> {
        if self.writable_len() == 0 {
            return None;
        }
        let idx = self.writable_from;
        let out = self.slot(idx).unwrap().bits.clone();
        self.writable_from += 1;
        while self.writable_from - self.first > self.geom.reach() as i64 {
            self.slots.pop_front();
            self.first += 1;
        }
        Some((idx, out))
    }

    #[inline]
    fn slot(&self, chunk: i64) -> Option<&Slot> {
        if chunk < self.first {
            return None;
        }
        self.slots.get((chunk - self.first) as usize)
    }

    #[inline]
    fn slot_mut(&mut self, chunk: i64) -> Option<&mut Slot> {
        if chunk < self.first {
            return None;
        }
        self.slots.get_mut((chunk - self.first) as usize)
    }

    #[inline]
    pub fn is_writable(&self, chunk: i64) -> bool {
        chunk >= self.writable_from && chunk < self.end()
    }

    pub fn chunk(&self, index: i64) -> Option<&Chunk> {
        self.slot(index).map(|s| &s.bits)
    }

    pub fn bit(&self, addr: ChunkAddress) -> Option<bool> {
        self.slot(addr.chunk).map(|s| s.bits.get(addr.row, addr.col))
    }

    /// Flag of codeword `(chunk, col)`; `None` outside the writable window.
    #[inline]
    pub fn tag(&self, chunk: i64, col: usize) -> Option<BddTag> {
        if !self.is_writable(chunk) {
            return None;
        }
        self.slot(chunk).map(|s| s.tags[col])
    }

    /// Resets a flag to the neutral value; the codeword is re-decoded by the next pass.
    pub fn clear_tag(&mut self, chunk: i64, col: usize) -> bool {
        if !self.is_writable(chunk) {
            return false;
        }
        let s = self.slot_mut(chunk).unwrap();
        s.tags[col] = BddTag::AlreadyCodeword;
        s.dirty[col] = true;
        true
    }

    /// Flag of the codeword that holds `addr` in its virtual half.
    #[inline]
    pub fn coupled_tag(&self, addr: ChunkAddress) -> Option<BddTag> {
        let (off, _, vc) = self.geom.coupled_raw(addr.row, addr.col);
        self.tag(addr.chunk + off as i64, vc)
    }

    /// Toggles a stored bit. Returns false (and does nothing) for read-only chunks.
    pub fn flip(&mut self, addr: ChunkAddress) -> bool {
        if !self.is_writable(addr.chunk) {
            return false;
        }
        let (off, _, vc) = self.geom.coupled_raw(addr.row, addr.col);
        let s = self.slot_mut(addr.chunk).unwrap();
        s.bits.flip(addr.row, addr.col);
        s.dirty[addr.col] = true;
        let partner = addr.chunk + off as i64;
        if self.is_writable(partner) {
            self.slot_mut(partner).unwrap().dirty[vc] = true;
        }
        true
    }

    /// The full 256-bit codeword of column `col` of chunk `chunk`.
    pub fn codeword(&self, chunk: i64, col: usize) -> Result<Word> {
        let reach = self.geom.reach() as i64;
        if chunk - reach < self.first || chunk >= self.end() {
            return Err(Error::MissingChunk(chunk));
        }
        Ok(self.codeword_unchecked(chunk, col))
    }

    #[inline]
    fn codeword_unchecked(&self, chunk: i64, col: usize) -> Word {
        let top = self.slot(chunk).unwrap().bits.cols[col];
        let base = (chunk - self.first) as usize;
        let mut low = 0u128;
        for (vr, &(off, r, c)) in self.geom.virtual_column_sources(col).iter().enumerate() {
            let s = &self.slots[base - off as usize];
            low |= (s.bits.cols[c as usize] >> r & 1) << vr;
        }
        Word::from_halves(low, top)
    }

    /// Decodes one codeword, writes back the permitted flips and records its flag.
    pub fn decode_codeword(&mut self, chunk: i64, col: usize, mode: PassMode) -> Result<DecodeEffect> {
        if !self.is_writable(chunk) {
            let w = self.window();
            return Err(Error::OutOfWindow { lo: chunk, hi: chunk + 1, win_lo: w.start, win_hi: w.end });
        }
        Ok(self.decode_unchecked(chunk, col, mode))
    }

    fn decode_unchecked(&mut self, chunk: i64, col: usize, mode: PassMode) -> DecodeEffect {
        let word = self.codeword_unchecked(chunk, col);
        let outcome = ebch256().decode(&word);
        let mut effect = DecodeEffect { tag: outcome.tag(), applied: 0, discarded: 0 };
        {
            let s = self.slot_mut(chunk).unwrap();
            s.tags[col] = effect.tag;
            s.dirty[col] = false;
        }
        if let BddOutcome::Corrected(flips) = outcome {
            let n = self.geom.rows();
            for &p in &flips {
                let p = p as usize;
                let addr = if p >= n {
                    ChunkAddress::new(chunk, p - n, col)
                } else if mode == PassMode::Mrbdd {
                    effect.discarded += 1;
                    continue;
                } else {
                    self.geom.virtual_source(ChunkAddress::new(chunk, p, col))
                };
                if self.flip(addr) {
                    effect.applied += 1;
                } else {
                    effect.discarded += 1;
                }
            }
            if effect.discarded > 0 {
                self.slot_mut(chunk).unwrap().dirty[col] = true;
            }
        }
        effect
    }

    /// One sweep over the codewords of `range`, oldest chunk first.
    ///
    /// Codewords whose bits and flag are unchanged since their last decode are
    /// skipped; decoding them again would reproduce the same flag and no flips.
    pub fn pass(&mut self, range: std::ops::Range<i64>, mode: PassMode) -> Result<PassStats> {
        let w = self.window();
        if range.start < w.start || range.end > w.end {
            return Err(Error::OutOfWindow { lo: range.start, hi: range.end, win_lo: w.start, win_hi: w.end });
        }
        let mut stats = PassStats::default();
        for chunk in range {
            for col in 0..self.geom.cols() {
                if !self.slot(chunk).unwrap().dirty[col] {
                    continue;
                }
                let e = self.decode_unchecked(chunk, col, mode);
                stats.decoded += 1;
                stats.applied += e.applied;
                stats.discarded += e.discarded;
            }
        }
        Ok(stats)
    }

    /// Flooding sweep: every codeword in `range` decodes the same snapshot and
    /// the union of proposed flips is applied afterwards. Not the decoding schedule; used to study
    /// loop dynamics independent of sweep order.
    pub fn flooding_pass(&mut self, range: std::ops::Range<i64>) -> Result<PassStats> {
        let w = self.window();
        if range.start < w.start || range.end > w.end {
            return Err(Error::OutOfWindow { lo: range.start, hi: range.end, win_lo: w.start, win_hi: w.end });
        }
        let n = self.geom.rows();
        let mut stats = PassStats::default();
        let mut targets = std::collections::BTreeSet::new();
        for chunk in range {
            for col in 0..self.geom.cols() {
                let outcome = ebch256().decode(&self.codeword_unchecked(chunk, col));
                stats.decoded += 1;
                self.slot_mut(chunk).unwrap().tags[col] = outcome.tag();
                if let BddOutcome::Corrected(flips) = outcome {
                    for &p in &flips {
                        let p = p as usize;
                        targets.insert(if p >= n {
                            ChunkAddress::new(chunk, p - n, col)
                        } else {
                            self.geom.virtual_source(ChunkAddress::new(chunk, p, col))
                        });
                    }
                }
            }
        }
        for a in targets {
            if self.flip(a) {
                stats.applied += 1;
            } else {
                stats.discarded += 1;
            }
        }
        for c in self.window() {
            self.slot_mut(c).unwrap().dirty.iter_mut().for_each(|d| *d = true);
        }
        Ok(stats)
    }

    /// Count of writable-window codewords carrying `tag` within `range`.
    pub fn count_tags(&self, range: std::ops::Range<i64>, tag: BddTag) -> usize {
        range
            .filter_map(|c| if self.is_writable(c) { self.slot(c) } else { None })
            .map(|s| s.tags.iter().filter(|&&t| t == tag).count())
            .sum()
    }

    /// Bits of the writable window, for loop detection.
    pub fn snapshot(&self) -> Vec<u128> {
        self.window().flat_map(|c| self.slot(c).unwrap().bits.cols.iter().copied()).collect()
    }

    /// Bits of the writable chunks in `range` (clamped to the window).
    pub fn snapshot_range(&self, range: std::ops::Range<i64>) -> Vec<u128> {
        let w = self.window();
        (range.start.max(w.start)..range.end.min(w.end))
            .flat_map(|c| self.slot(c).unwrap().bits.cols.iter().copied())
            .collect()
    }

    /// Flags of the writable window in chunk/column order.
    pub fn tag_snapshot(&self) -> Vec<BddTag> {
        self.window().flat_map(|c| self.slot(c).unwrap().tags.iter().copied()).collect()
    }

    /// Number of ones in the writable window (errors, when the truth is all-zero).
    pub fn window_weight(&self) -> u64 {
        self.window().map(|c| self.slot(c).unwrap().bits.count_ones()).sum()
    }
}

impl Slot {
    fn history(bits: Chunk) -> Slot {
        Slot { bits, tags: Vec::new(), dirty: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeEffect {
    pub tag: BddTag,
    pub applied: usize,
    pub discarded: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PassStats {
    pub decoded: usize,
    pub applied: usize,
    pub discarded: usize,
}
