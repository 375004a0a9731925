//! Extended binary BCH codes with t = 2 and their bounded-distance decoder.
//!
//! A codeword of length `n = 2^m` keeps the BCH part in positions `0..n-1`
//! (position `p` is the coefficient of `x^p`) and an overall even-parity bit at
//! `n - 1`. Encoding is systematic: message bits occupy `0..k`, the `deg g`
//! BCH parity bits occupy `k..n-1`.
//!
//! For the OFEC component code (m = 8) this gives the (256, 239) layout
//! 0..127 coupled bits, 128..238 new information, 239..254 BCH parity, 255
//! overall parity.

use std::sync::OnceLock;

use arrayvec::ArrayVec;

use crate::error::{Error, Result};
use crate::gf::{GaloisField, PRIMITIVE_POLY_256, PRIMITIVE_POLY_32};

/// Up to 256 bits, bit `p` at `self.0[p / 64] >> (p % 64)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Word(pub [u64; 4]);

impl Word {
    pub const ZERO: Word = Word([0; 4]);

    #[inline]
    pub fn get(&self, p: usize) -> bool {
        self.0[p >> 6] >> (p & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, p: usize, v: bool) {
        let mask = 1u64 << (p & 63);
        if v {
            self.0[p >> 6] |= mask;
        } else {
            self.0[p >> 6] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, p: usize) {
        self.0[p >> 6] ^= 1u64 << (p & 63);
    }

    pub fn weight(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    /// Lower 128 bits.
    #[inline]
    pub fn low_half(&self) -> u128 {
        self.0[0] as u128 | (self.0[1] as u128) << 64
    }

    /// Upper 128 bits.
    #[inline]
    pub fn high_half(&self) -> u128 {
        self.0[2] as u128 | (self.0[3] as u128) << 64
    }

    #[inline]
    pub fn from_halves(low: u128, high: u128) -> Word {
        Word([low as u64, (low >> 64) as u64, high as u64, (high >> 64) as u64])
    }

    pub fn from_bits(bits: &[bool]) -> Word {
        assert!(bits.len() <= 256);
        let mut w = Word::ZERO;
        for (p, &b) in bits.iter().enumerate() {
            if b {
                w.flip(p);
            }
        }
        w
    }

    pub fn to_bits(&self, len: usize) -> Vec<bool> {
        (0..len).map(|p| self.get(p)).collect()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..4).flat_map(move |i| {
            let mut w = self.0[i];
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(i * 64 + b)
            })
        })
    }

    #[inline]
    fn byte(&self, q: usize) -> u8 {
        (self.0[q >> 3] >> ((q & 7) * 8)) as u8
    }
}

impl std::ops::BitXor for Word {
    type Output = Word;
    fn bitxor(self, rhs: Word) -> Word {
        Word([
            self.0[0] ^ rhs.0[0],
            self.0[1] ^ rhs.0[1],
            self.0[2] ^ rhs.0[2],
            self.0[3] ^ rhs.0[3],
        ])
    }
}

impl std::ops::BitXorAssign for Word {
    fn bitxor_assign(&mut self, rhs: Word) {
        for i in 0..4 {
            self.0[i] ^= rhs.0[i];
        }
    }
}

/// Positions a successful decode asks the caller to flip.
pub type Flips = ArrayVec<u16, 2>;

/// Result of one bounded-distance decoding attempt. The input is never mutated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BddOutcome {
    AlreadyCodeword,
    Corrected(Flips),
    Failed,
}

impl BddOutcome {
    pub fn tag(&self) -> BddTag {
        match self {
            BddOutcome::AlreadyCodeword => BddTag::AlreadyCodeword,
            BddOutcome::Corrected(_) => BddTag::Corrected,
            BddOutcome::Failed => BddTag::Failed,
        }
    }
}

/// The three decoder flags SPR logic keys on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BddTag {
    #[default]
    AlreadyCodeword,
    Corrected,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Syndromes {
    pub s1: u8,
    pub s3: u8,
    /// Overall parity of all n bits is odd.
    pub parity_odd: bool,
}

/// Extended BCH code with designed correction radius 2 (d_min = 6).
#[derive(Debug, Clone)]
pub struct ExtendedBch {
    field: GaloisField,
    n: usize,
    k: usize,
    generator: u32,
    /// Per message byte: XOR of `x^(p + r) mod g` over set bits.
    parity_tables: Vec<[u32; 256]>,
    /// Per BCH byte: `s1 | s3 << 8` contribution.
    syndrome_tables: Vec<[u16; 256]>,
    /// `quad_root[u]` solves `y^2 + y = u` when a solution exists.
    quad_root: Vec<Option<u8>>,
}

/// The (256, 239) eBCH component code of OFEC.
pub fn ebch256() -> &'static ExtendedBch {
    static CODE: OnceLock<ExtendedBch> = OnceLock::new();
    CODE.get_or_init(|| ExtendedBch::new(GaloisField::new(8, PRIMITIVE_POLY_256)))
}

/// The (32, 21) eBCH code used by the product-code reference model.
pub fn ebch32() -> &'static ExtendedBch {
    static CODE: OnceLock<ExtendedBch> = OnceLock::new();
    CODE.get_or_init(|| ExtendedBch::new(GaloisField::new(5, PRIMITIVE_POLY_32)))
}

impl ExtendedBch {
    pub const T: usize = 2;
    pub const D_MIN: usize = 6;

    pub fn new(field: GaloisField) -> Self {
        let m = field.degree();
        let n = 1usize << m;
        let m1 = field.minimal_polynomial(1);
        let m3 = field.minimal_polynomial(3);
        let generator = poly_mul_gf2(m1, m3);
        let r = (31 - generator.leading_zeros()) as usize;
        let k = n - 1 - r;

        // rem[p] = x^(p + r) mod g
        let mut rem = Vec::with_capacity(k);
        let mut cur = reduce_gf2(1u64 << r, generator as u64) as u32;
        for _ in 0..k {
            rem.push(cur);
            cur <<= 1;
            if cur >> r & 1 == 1 {
                cur ^= generator;
            }
        }
        let parity_tables = (0..k.div_ceil(8))
            .map(|q| {
                let mut t = [0u32; 256];
                for (v, entry) in t.iter_mut().enumerate() {
                    for b in 0..8 {
                        let p = q * 8 + b;
                        if v >> b & 1 == 1 && p < k {
                            *entry ^= rem[p];
                        }
                    }
                }
                t
            })
            .collect();

        let syndrome_tables = (0..n / 8)
            .map(|q| {
                let mut t = [0u16; 256];
                for (v, entry) in t.iter_mut().enumerate() {
                    for b in 0..8 {
                        let p = q * 8 + b;
                        if v >> b & 1 == 1 && p < n - 1 {
                            let s1 = field.alpha_pow(p) as u16;
                            let s3 = field.alpha_pow(3 * p) as u16;
                            *entry ^= s1 | s3 << 8;
                        }
                    }
                }
                t
            })
            .collect();

        let mut quad_root = vec![None; n];
        for y in 0..n {
            let y = y as u8;
            let u = field.square(y) ^ y;
            quad_root[u as usize].get_or_insert(y);
        }

        ExtendedBch { field, n, k, generator, parity_tables, syndrome_tables, quad_root }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> usize {
        Self::T
    }

    pub fn d_min(&self) -> usize {
        Self::D_MIN
    }

    /// Generator polynomial of the BCH part, bit i = coefficient of x^i.
    pub fn generator(&self) -> u32 {
        self.generator
    }

    pub fn field(&self) -> &GaloisField {
        &self.field
    }

    /// Number of BCH parity bits (degree of the generator).
    pub fn bch_parity_bits(&self) -> usize {
        self.n - 1 - self.k
    }

    /// Systematic encoding of a message held in bits `0..k` of `msg`.
    pub fn encode(&self, msg: &Word) -> Result<Word> {
        if (self.k..self.n).any(|p| msg.get(p)) {
            return Err(Error::MessageOverflow { k: self.k });
        }
        Ok(self.encode_unchecked(msg))
    }

    #[inline]
    pub(crate) fn encode_unchecked(&self, msg: &Word) -> Word {
        let mut parity = 0u32;
        for (q, table) in self.parity_tables.iter().enumerate() {
            parity ^= table[msg.byte(q) as usize];
        }
        let mut cw = *msg;
        for b in 0..self.bch_parity_bits() {
            if parity >> b & 1 == 1 {
                cw.flip(self.k + b);
            }
        }
        if cw.weight() & 1 == 1 {
            cw.flip(self.n - 1);
        }
        cw
    }

    /// Bit-vector front end of [`ExtendedBch::encode`].
    pub fn encode_bits(&self, message: &[bool]) -> Result<Vec<bool>> {
        if message.len() != self.k {
            return Err(Error::Length { expected: self.k, got: message.len() });
        }
        Ok(self.encode_unchecked(&Word::from_bits(message)).to_bits(self.n))
    }

    #[inline]
    pub fn syndromes(&self, word: &Word) -> Syndromes {
        let mut acc = 0u16;
        for (q, table) in self.syndrome_tables.iter().enumerate() {
            acc ^= table[word.byte(q) as usize];
        }
        Syndromes { s1: acc as u8, s3: (acc >> 8) as u8, parity_odd: word.weight() & 1 == 1 }
    }

    /// Bit-vector front end of [`ExtendedBch::syndromes`].
    pub fn compute_syndromes(&self, word: &[bool]) -> Result<Syndromes> {
        if word.len() != self.n {
            return Err(Error::Length { expected: self.n, got: word.len() });
        }
        Ok(self.syndromes(&Word::from_bits(word)))
    }

    /// Closed-form bounded-distance decoding up to two errors.
    ///
    /// A BCH-part solution is accepted only if the overall parity is consistent
    /// with the total number of flips staying within t.
    #[inline]
    pub fn decode(&self, word: &Word) -> BddOutcome {
        let s = self.syndromes(word);
        let last = (self.n - 1) as u16;
        let f = &self.field;
        let mut flips = Flips::new();
        if s.s1 == 0 {
            if s.s3 != 0 {
                return BddOutcome::Failed;
            }
            if !s.parity_odd {
                return BddOutcome::AlreadyCodeword;
            }
            flips.push(last);
            return BddOutcome::Corrected(flips);
        }
        let s1_cubed = f.cube(s.s1);
        if s.s3 == s1_cubed {
            let p = f.log(s.s1).unwrap() as u16;
            flips.push(p);
            if !s.parity_odd {
                flips.push(last);
            }
            return BddOutcome::Corrected(flips);
        }
        if s.parity_odd {
            // two BCH errors plus the parity bit would be three
            return BddOutcome::Failed;
        }
        let c = f.div(s.s3 ^ s1_cubed, s.s1).unwrap();
        let u = f.div(c, f.square(s.s1)).unwrap();
        let Some(y) = self.quad_root[u as usize] else {
            return BddOutcome::Failed;
        };
        let x1 = f.mul(s.s1, y);
        let x2 = x1 ^ s.s1;
        let (p1, p2) = (f.log(x1).unwrap() as u16, f.log(x2).unwrap() as u16);
        flips.push(p1.min(p2));
        flips.push(p1.max(p2));
        BddOutcome::Corrected(flips)
    }

    /// Bit-vector front end of [`ExtendedBch::decode`].
    pub fn bdd_decode(&self, word: &[bool]) -> Result<BddOutcome> {
        if word.len() != self.n {
            return Err(Error::Length { expected: self.n, got: word.len() });
        }
        Ok(self.decode(&Word::from_bits(word)))
    }

    /// True when `word` has zero syndromes and even weight.
    pub fn is_codeword(&self, word: &Word) -> bool {
        let s = self.syndromes(word);
        s.s1 == 0 && s.s3 == 0 && !s.parity_odd
    }
}

fn poly_mul_gf2(a: u32, b: u32) -> u32 {
    let mut acc = 0u32;
    for i in 0..32 {
        if b >> i & 1 == 1 {
            acc ^= a << i;
        }
    }
    acc
}

fn reduce_gf2(mut a: u64, g: u64) -> u64 {
    let dg = 63 - g.leading_zeros();
    while a != 0 && 63 - a.leading_zeros() >= dg {
        let shift = 63 - a.leading_zeros() - dg;
        a ^= g << shift;
    }
    a
}
