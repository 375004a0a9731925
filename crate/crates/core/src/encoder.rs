//! Streaming OFEC encoder.

use std::collections::VecDeque;

use crate::bch::{ebch256, Word};
use crate::chunk::Chunk;
use crate::error::{Error, Result};
use crate::geometry::{source_chunk, BitMatrix, Geometry};

/// Read access to previously transmitted chunks.
pub trait ChunkSource {
    fn chunk(&self, index: i64) -> Option<&Chunk>;
}

/// Assembles the virtual chunk of chunk `i` from its staircase sources.
/// Chunks with negative indices are all-zero.
pub fn virtual_chunk(geom: &Geometry, history: &impl ChunkSource, i: i64) -> Result<Chunk> {
    let p = geom.params();
    let (b, cols) = (p.block_rows, p.cols());
    let mut y = Chunk::zeros(cols);
    for j in 0..p.depth() {
        let src = source_chunk(p, i, j)?;
        if src < 0 {
            continue;
        }
        let x = history.chunk(src).ok_or(Error::MissingChunk(src))?;
        let mut block = BitMatrix::zeros(b, cols);
        for r in 0..b {
            for c in 0..cols {
                block.set(r, c, x.get(j * b + r, c));
            }
        }
        let inter = geom.interleaver().interleave_block(&block)?;
        for r in 0..b {
            for c in 0..cols {
                if inter.get(r, c) {
                    y.flip(j * b + r, c);
                }
            }
        }
    }
    Ok(y)
}

/// Encodes chunk `i` from its K x 2B information bits.
///
/// Each column's message is its virtual column (rows 0..N of the codeword)
/// followed by the K information bits; the transmitted column is the top N
/// bits of the resulting codeword, information below parity.
pub fn encode_chunk(geom: &Geometry, info: &Chunk, history: &impl ChunkSource, i: i64) -> Result<Chunk> {
    let p = geom.params();
    let code = ebch256();
    if info.cols.len() != p.cols() {
        return Err(Error::Shape { rows: p.info_rows(), cols: p.cols() });
    }
    let info_mask = (1u128 << p.info_rows()) - 1;
    if info.cols.iter().any(|&c| c & !info_mask != 0) {
        return Err(Error::Shape { rows: p.info_rows(), cols: p.cols() });
    }
    let y = virtual_chunk(geom, history, i)?;
    let cols = y
        .cols
        .iter()
        .zip(&info.cols)
        .map(|(&virt, &inf)| code.encode_unchecked(&Word::from_halves(virt, inf)).high_half())
        .collect();
    Ok(Chunk { cols })
}

/// Keeps the last `depth + guard` transmitted chunks and encodes in order.
#[derive(Debug, Clone)]
pub struct Encoder {
    geom: Geometry,
    next: i64,
    recent: VecDeque<Chunk>,
}

impl ChunkSource for Encoder {
    fn chunk(&self, index: i64) -> Option<&Chunk> {
        let first = self.next - self.recent.len() as i64;
        if index < first || index >= self.next {
            return None;
        }
        self.recent.get((index - first) as usize)
    }
}

impl Encoder {
    pub fn new(geom: Geometry) -> Self {
        Encoder { geom, next: 0, recent: VecDeque::new() }
    }

    /// Index of the next chunk to be encoded.
    pub fn next_index(&self) -> i64 {
        self.next
    }

    pub fn push(&mut self, info: &Chunk) -> Result<Chunk> {
        let tx = encode_chunk(&self.geom, info, self, self.next)?;
        self.recent.push_back(tx.clone());
        if self.recent.len() > self.geom.reach() {
            self.recent.pop_front();
        }
        self.next += 1;
        Ok(tx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;
    use std::collections::HashMap;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::bch::BddOutcome;
    use crate::geometry::ChunkAddress;

    struct Recording {
        chunks: HashMap<i64, Chunk>,
        reads: RefCell<Vec<i64>>,
    }

    impl ChunkSource for Recording {
        fn chunk(&self, index: i64) -> Option<&Chunk> {
            self.reads.borrow_mut().push(index);
            self.chunks.get(&index)
        }
    }

    fn random_info(geom: &Geometry, rng: &mut impl Rng) -> Chunk {
        let mask = (1u128 << geom.params().info_rows()) - 1;
        Chunk { cols: (0..geom.cols()).map(|_| rng.random::<u128>() & mask).collect() }
    }

    #[test]
    fn zero_info_zero_history_is_zero() {
        let geom = Geometry::default();
        let mut enc = Encoder::new(geom.clone());
        for _ in 0..15 {
            assert_eq!(enc.push(&Chunk::zeros(32)).unwrap(), Chunk::zeros(32));
        }
    }

    #[test]
    fn guard_chunks_are_never_read() {
        let geom = Geometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let chunks = (0..40).map(|i| (i, random_info(&geom, &mut rng))).collect();
        let src = Recording { chunks, reads: RefCell::new(vec![]) };
        encode_chunk(&geom, &random_info(&geom, &mut rng), &src, 30).unwrap();
        let reads = src.reads.borrow();
        assert_eq!(*reads, (20..=27).collect::<Vec<_>>());
    }

    #[test]
    fn missing_history_is_an_error() {
        let geom = Geometry::default();
        let src = Recording { chunks: HashMap::new(), reads: RefCell::new(vec![]) };
        let err = encode_chunk(&geom, &Chunk::zeros(32), &src, 12).unwrap_err();
        assert!(matches!(err, Error::MissingChunk(2)));
        let mut bad = Chunk::zeros(32);
        bad.flip(120, 0);
        assert!(encode_chunk(&geom, &bad, &src, 0).is_err());
    }

    #[test]
    fn every_column_is_a_codeword_with_its_virtual_half() {
        // Assemble the coupled half through the decoder-side map rather than the
        // encoder's interleave path.
        let geom = Geometry::default();
        let code = ebch256();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut enc = Encoder::new(geom.clone());
        let mut tx: Vec<Chunk> = vec![];
        for _ in 0..30 {
            tx.push(enc.push(&random_info(&geom, &mut rng)).unwrap());
        }
        for i in 0..30i64 {
            for c in 0..32 {
                let mut w = Word::from_halves(0, tx[i as usize].cols[c]);
                for vr in 0..128 {
                    let src = geom.virtual_source(ChunkAddress::new(i, vr, c));
                    if src.chunk >= 0 && tx[src.chunk as usize].get(src.row, src.col) {
                        w.flip(vr);
                    }
                }
                assert_eq!(code.decode(&w), BddOutcome::AlreadyCodeword);
            }
        }
    }
}
