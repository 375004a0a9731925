use crate::geometry::ROWS;

/// One chunk of 2B columns; bit `r` of `cols[c]` is row `r` of column `c`.
///
/// The same type carries information chunks (only the low K rows used) and
/// transmitted chunks (all N rows).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chunk {
    pub cols: Vec<u128>,
}

impl Chunk {
    pub fn zeros(cols: usize) -> Self {
        Chunk { cols: vec![0; cols] }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cols[col] >> row & 1 == 1
    }

    #[inline]
    pub fn flip(&mut self, row: usize, col: usize) {
        self.cols[col] ^= 1u128 << row;
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: bool) {
        if self.get(row, col) != v {
            self.flip(row, col);
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.cols.iter().map(|c| c.count_ones() as u64).sum()
    }

    /// Hamming distance restricted to rows `0..rows`.
    pub fn distance(&self, other: &Chunk, rows: usize) -> u64 {
        let mask = if rows >= ROWS { u128::MAX } else { (1u128 << rows) - 1 };
        self.cols
            .iter()
            .zip(&other.cols)
            .map(|(a, b)| ((a ^ b) & mask).count_ones() as u64)
            .sum()
    }

    /// Bits in column-major order, row 0 first.
    pub fn to_bits(&self, rows: usize) -> Vec<bool> {
        self.cols.iter().flat_map(|&c| (0..rows).map(move |r| c >> r & 1 == 1)).collect()
    }

    pub fn from_bits(bits: &[bool], rows: usize) -> Self {
        assert_eq!(bits.len() % rows, 0);
        let cols = bits
            .chunks(rows)
            .map(|col| col.iter().enumerate().fold(0u128, |acc, (r, &b)| acc | (b as u128) << r))
            .collect();
        Chunk { cols }
    }
}
