//! OFEC spatial-coupling geometry.
//!
//! A chunk holds `N` rows by `2B` columns of transmitted bits; row 0 is the
//! bottom row and block `j` covers rows `j*B..(j+1)*B`. Each transmitted column
//! is the top half of an eBCH codeword whose bottom half (the virtual column)
//! is assembled from interleaved blocks of earlier chunks along a staircase:
//! virtual block `j` of chunk `i` comes from block `j` of chunk
//! `i - depth - guard + j`.

use crate::bch::ebch256;
use crate::error::{Error, Result};

/// Rows per chunk; half the component codeword length.
pub const ROWS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OfecParams {
    /// Block height B.
    pub block_rows: usize,
    /// Rows per chunk N.
    pub rows: usize,
    /// Guard interval in chunks.
    pub guard: usize,
}

impl Default for OfecParams {
    fn default() -> Self {
        OfecParams { block_rows: 16, rows: ROWS, guard: 2 }
    }
}

impl OfecParams {
    pub fn new(block_rows: usize, guard: usize) -> Result<Self> {
        let p = OfecParams { block_rows, rows: ROWS, guard };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let code = ebch256();
        if self.rows * 2 != code.n() {
            return Err(Error::Config(format!("N must equal n/2 = {}", code.n() / 2)));
        }
        if self.block_rows == 0 || !self.rows.is_multiple_of(self.block_rows) || self.block_rows > 128 {
            return Err(Error::Config(format!("B = {} must divide N = {}", self.block_rows, self.rows)));
        }
        Ok(())
    }

    /// Coupling depth N / B.
    pub fn depth(&self) -> usize {
        self.rows / self.block_rows
    }

    /// Columns per chunk, 2B.
    pub fn cols(&self) -> usize {
        2 * self.block_rows
    }

    /// New information bits per column, K = k - N.
    pub fn info_rows(&self) -> usize {
        ebch256().k() - self.rows
    }

    /// Parity bits per column, P = n - k.
    pub fn parity_rows(&self) -> usize {
        ebch256().n() - ebch256().k()
    }

    /// Largest forward distance between a chunk and a codeword it is coupled to.
    pub fn reach(&self) -> usize {
        self.depth() + self.guard
    }

    /// Information bits per transmitted bit.
    pub fn rate(&self) -> f64 {
        self.info_rows() as f64 / self.rows as f64
    }
}

/// Block index of `j` in chunk `i` draws from this chunk.
pub fn source_chunk(params: &OfecParams, i: i64, j: usize) -> Result<i64> {
    let depth = params.depth();
    if j >= depth {
        return Err(Error::BlockIndex { index: j, depth });
    }
    Ok(i - depth as i64 - params.guard as i64 + j as i64)
}

/// A bit position in a chunk. For virtual addresses `row` is the virtual row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct ChunkAddress {
    pub chunk: i64,
    pub row: usize,
    pub col: usize,
}

impl ChunkAddress {
    pub fn new(chunk: i64, row: usize, col: usize) -> Self {
        ChunkAddress { chunk, row, col }
    }

    pub fn block(&self, params: &OfecParams) -> usize {
        self.row / params.block_rows
    }
}

/// Row-major dense bit matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BitMatrix { rows, cols, bits: vec![false; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.bits[r * self.cols + c] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Per-block interleaver: `[sigma(R) | tau(L)]` on the left/right B x B halves.
///
/// `sigma` and `tau` are permutations of the B*B cell indices `row * B + col`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    b: usize,
    sigma: Vec<u32>,
    tau: Vec<u32>,
    sigma_inv: Vec<u32>,
    tau_inv: Vec<u32>,
}

impl Interleaver {
    /// Transpose on both halves.
    pub fn transpose(b: usize) -> Self {
        let t: Vec<u32> = (0..b * b).map(|idx| ((idx % b) * b + idx / b) as u32).collect();
        Self::new(b, t.clone(), t).expect("transpose is a bijection")
    }

    pub fn new(b: usize, sigma: Vec<u32>, tau: Vec<u32>) -> Result<Self> {
        let sigma_inv = invert(b, &sigma)?;
        let tau_inv = invert(b, &tau)?;
        Ok(Interleaver { b, sigma, tau, sigma_inv, tau_inv })
    }

    pub fn block_rows(&self) -> usize {
        self.b
    }

    /// Source `(row, col)` within a B x 2B block to its interleaved position.
    #[inline]
    pub fn forward(&self, row: usize, col: usize) -> (usize, usize) {
        let b = self.b;
        if col < b {
            let d = self.tau[row * b + col] as usize;
            (d / b, b + d % b)
        } else {
            let d = self.sigma[row * b + col - b] as usize;
            (d / b, d % b)
        }
    }

    #[inline]
    pub fn inverse(&self, row: usize, col: usize) -> (usize, usize) {
        let b = self.b;
        if col >= b {
            let s = self.tau_inv[row * b + col - b] as usize;
            (s / b, s % b)
        } else {
            let s = self.sigma_inv[row * b + col] as usize;
            (s / b, b + s % b)
        }
    }

    pub fn interleave_block(&self, block: &BitMatrix) -> Result<BitMatrix> {
        self.check_shape(block)?;
        let mut out = BitMatrix::zeros(self.b, 2 * self.b);
        for r in 0..self.b {
            for c in 0..2 * self.b {
                if block.get(r, c) {
                    let (rr, cc) = self.forward(r, c);
                    out.set(rr, cc, true);
                }
            }
        }
        Ok(out)
    }

    pub fn deinterleave_block(&self, block: &BitMatrix) -> Result<BitMatrix> {
        self.check_shape(block)?;
        let mut out = BitMatrix::zeros(self.b, 2 * self.b);
        for r in 0..self.b {
            for c in 0..2 * self.b {
                if block.get(r, c) {
                    let (rr, cc) = self.inverse(r, c);
                    out.set(rr, cc, true);
                }
            }
        }
        Ok(out)
    }

    fn check_shape(&self, block: &BitMatrix) -> Result<()> {
        if block.rows() != self.b || block.cols() != 2 * self.b {
            return Err(Error::Shape { rows: self.b, cols: 2 * self.b });
        }
        Ok(())
    }
}

fn invert(b: usize, perm: &[u32]) -> Result<Vec<u32>> {
    if perm.len() != b * b {
        return Err(Error::Config(format!("permutation must have {} entries", b * b)));
    }
    let mut inv = vec![u32::MAX; b * b];
    for (i, &p) in perm.iter().enumerate() {
        let p = p as usize;
        if p >= b * b || inv[p] != u32::MAX {
            return Err(Error::Config("interleaver is not a bijection".into()));
        }
        inv[p] = i as u32;
    }
    Ok(inv)
}

/// Precomputed coupling maps for one parameter set and interleaver.
#[derive(Debug, Clone)]
pub struct Geometry {
    params: OfecParams,
    interleaver: Interleaver,
    /// Indexed `row * cols + col`: (forward chunk offset, virtual row, virtual col).
    coupled: Vec<(u8, u8, u8)>,
    /// Indexed `vcol * rows + vrow`: (backward chunk offset, row, col).
    virtual_src: Vec<(u8, u8, u8)>,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry::new(OfecParams::default()).expect("default parameters are valid")
    }
}

impl Geometry {
    pub fn new(params: OfecParams) -> Result<Self> {
        Self::with_interleaver(params, Interleaver::transpose(params.block_rows))
    }

    pub fn with_interleaver(params: OfecParams, interleaver: Interleaver) -> Result<Self> {
        params.validate()?;
        if interleaver.block_rows() != params.block_rows {
            return Err(Error::Config("interleaver block size differs from B".into()));
        }
        if params.reach() > 255 {
            return Err(Error::Config("coupling reach must fit in 255 chunks".into()));
        }
        let (rows, cols, b) = (params.rows, params.cols(), params.block_rows);
        let reach = params.reach();
        let mut coupled = vec![(0, 0, 0); rows * cols];
        let mut virtual_src = vec![(0, 0, 0); rows * cols];
        for row in 0..rows {
            let j = row / b;
            let offset = reach - j;
            for col in 0..cols {
                let (lr, vc) = interleaver.forward(row % b, col);
                let vr = j * b + lr;
                coupled[row * cols + col] = (offset as u8, vr as u8, vc as u8);
                virtual_src[vc * rows + vr] = (offset as u8, row as u8, col as u8);
            }
        }
        Ok(Geometry { params, interleaver, coupled, virtual_src })
    }

    pub fn params(&self) -> &OfecParams {
        &self.params
    }

    pub fn interleaver(&self) -> &Interleaver {
        &self.interleaver
    }

    pub fn depth(&self) -> usize {
        self.params.depth()
    }

    pub fn cols(&self) -> usize {
        self.params.cols()
    }

    pub fn rows(&self) -> usize {
        self.params.rows
    }

    pub fn reach(&self) -> usize {
        self.params.reach()
    }

    /// Where a transmitted bit re-appears as a coupled (virtual) bit.
    pub fn coupled_position(&self, addr: ChunkAddress) -> ChunkAddress {
        let (off, vr, vc) = self.coupled_raw(addr.row, addr.col);
        ChunkAddress::new(addr.chunk + off as i64, vr, vc)
    }

    /// Inverse of [`Geometry::coupled_position`]: the transmitted home of a virtual bit.
    pub fn virtual_source(&self, vaddr: ChunkAddress) -> ChunkAddress {
        let (off, r, c) = self.virtual_src_raw(vaddr.row, vaddr.col);
        ChunkAddress::new(vaddr.chunk - off as i64, r, c)
    }

    #[inline]
    pub(crate) fn coupled_raw(&self, row: usize, col: usize) -> (usize, usize, usize) {
        let (o, r, c) = self.coupled[row * self.params.cols() + col];
        (o as usize, r as usize, c as usize)
    }

    #[inline]
    pub(crate) fn virtual_src_raw(&self, vrow: usize, vcol: usize) -> (usize, usize, usize) {
        let (o, r, c) = self.virtual_src[vcol * self.params.rows + vrow];
        (o as usize, r as usize, c as usize)
    }

    /// Virtual-column sources of column `vcol`, indexed by virtual row.
    #[inline]
    pub(crate) fn virtual_column_sources(&self, vcol: usize) -> &[(u8, u8, u8)] {
        let n = self.params.rows;
        &self.virtual_src[vcol * n..(vcol + 1) * n]
    }

    /// Transmitted row of column `col` in chunk `i` that is shared with codeword
    /// `(partner_chunk, partner_col)`, if any.
    pub fn intersection(&self, col: usize, chunk_gap: usize, partner_col: usize) -> Option<usize> {
        (0..self.rows()).find(|&r| {
            let (o, _, vc) = self.coupled_raw(r, col);
            o == chunk_gap && vc == partner_col
        })
    }

    /// Half-chunk (0 = first B columns, 1 = second) of a column.
    pub fn half(&self, col: usize) -> usize {
        col / self.params.block_rows
    }
}
