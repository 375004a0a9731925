//! Arithmetic in GF(2^m) for m <= 8, backed by log/antilog tables.
//!
//! Elements are stored as `u8` with bit `i` holding the coefficient of `x^i`.
//! The default field is GF(2^8) reduced by x^8 + x^4 + x^3 + x^2 + 1 (0x11D).

use std::sync::OnceLock;

/// x^8 + x^4 + x^3 + x^2 + 1.
pub const PRIMITIVE_POLY_256: u16 = 0x11D;

/// x^5 + x^2 + 1, used by the small product-code reference model.
pub const PRIMITIVE_POLY_32: u16 = 0x25;

/// An element of GF(2^8) under [`PRIMITIVE_POLY_256`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct GfElement(pub u8);

impl GfElement {
    pub const ZERO: GfElement = GfElement(0);
    pub const ONE: GfElement = GfElement(1);

    pub fn inverse(self) -> Option<GfElement> {
        gf256().inv(self.0).map(GfElement)
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl std::ops::Add for GfElement {
    type Output = GfElement;
    fn add(self, rhs: GfElement) -> GfElement {
        GfElement(self.0 ^ rhs.0)
    }
}

impl std::ops::Mul for GfElement {
    type Output = GfElement;
    fn mul(self, rhs: GfElement) -> GfElement {
        gf_mul(self, rhs)
    }
}

/// Table-driven multiplication in the default GF(2^8).
pub fn gf_mul(a: GfElement, b: GfElement) -> GfElement {
    GfElement(gf256().mul(a.0, b.0))
}

/// Carry-less shift-and-reduce multiplication, independent of the tables.
pub fn clmul_reduce(a: u8, b: u8, m: u32, poly: u16) -> u8 {
    let mut acc: u16 = 0;
    let mut a = a as u16;
    let mut b = b;
    let top = 1u16 << m;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & top != 0 {
            a ^= poly;
        }
    }
    acc as u8
}

/// The shared GF(2^8) instance.
pub fn gf256() -> &'static GaloisField {
    static FIELD: OnceLock<GaloisField> = OnceLock::new();
    FIELD.get_or_init(|| GaloisField::new(8, PRIMITIVE_POLY_256))
}

#[derive(Debug, Clone)]
pub struct GaloisField {
    m: u32,
    poly: u16,
    order: usize,
    exp: Vec<u8>,
    log: Vec<u16>,
}

impl GaloisField {
    /// Builds the tables for GF(2^m). Panics if `poly` is not primitive of degree `m`.
    pub fn new(m: u32, poly: u16) -> Self {
        assert!((2..=8).contains(&m), "field degree must be in 2..=8");
        assert_eq!(poly >> m, 1, "modulus must have degree m");
        let order = (1usize << m) - 1;
        let mut exp = vec![0u8; 2 * order];
        let mut log = vec![u16::MAX; order + 1];
        let mut x: u16 = 1;
        for i in 0..order {
            assert!(log[x as usize] == u16::MAX, "modulus is not primitive");
            exp[i] = x as u8;
            log[x as usize] = i as u16;
            x <<= 1;
            if x >> m != 0 {
                x ^= poly;
            }
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        GaloisField { m, poly, order, exp, log }
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    pub fn modulus(&self) -> u16 {
        self.poly
    }

    /// Multiplicative order, 2^m - 1.
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn mul(&self, a: u8, b: u8) -> u8 {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
    }

    #[inline]
    pub fn inv(&self, a: u8) -> Option<u8> {
        if a == 0 {
            return None;
        }
        let l = self.log[a as usize] as usize;
        Some(self.exp[(self.order - l) % self.order])
    }

    #[inline]
    pub fn div(&self, a: u8, b: u8) -> Option<u8> {
        self.inv(b).map(|ib| self.mul(a, ib))
    }

    /// alpha^e for any non-negative exponent.
    #[inline]
    pub fn alpha_pow(&self, e: usize) -> u8 {
        self.exp[e % self.order]
    }

    /// Discrete log of a nonzero element.
    #[inline]
    pub fn log(&self, a: u8) -> Option<usize> {
        if a == 0 {
            None
        } else {
            Some(self.log[a as usize] as usize)
        }
    }

    #[inline]
    pub fn square(&self, a: u8) -> u8 {
        self.mul(a, a)
    }

    #[inline]
    pub fn cube(&self, a: u8) -> u8 {
        self.mul(self.mul(a, a), a)
    }

    /// Minimal polynomial of alpha^e over GF(2), as a bit mask (bit i = coeff of x^i).
    pub fn minimal_polynomial(&self, e: usize) -> u32 {
        // conjugates alpha^(e 2^k)
        let mut conj = Vec::new();
        let mut k = e % self.order;
        loop {
            if conj.contains(&k) {
                break;
            }
            conj.push(k);
            k = (k * 2) % self.order;
        }
        // product of (x + alpha^c), coefficients in the field
        let mut poly: Vec<u8> = vec![1];
        for &c in &conj {
            let root = self.alpha_pow(c);
            let mut next = vec![0u8; poly.len() + 1];
            for (i, &coef) in poly.iter().enumerate() {
                next[i + 1] ^= coef;
                next[i] ^= self.mul(coef, root);
            }
            poly = next;
        }
        poly.iter().enumerate().fold(0u32, |acc, (i, &c)| {
            debug_assert!(c <= 1, "minimal polynomial must be binary");
            acc | ((c as u32) << i)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_zero() {
        assert_eq!(gf_mul(GfElement(0x57), GfElement(0x01)), GfElement(0x57));
        assert_eq!(gf_mul(GfElement(0x00), GfElement(0xFF)), GfElement(0x00));
    }

    #[test]
    fn x8_reduces_to_0x1d() {
        // x^7 * x = x^8 = x^4 + x^3 + x^2 + 1
        assert_eq!(gf_mul(GfElement(0x80), GfElement(0x02)), GfElement(0x1D));
    }

    #[test]
    fn tables_agree_with_clmul_exhaustively() {
        let f = gf256();
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(f.mul(a, b), clmul_reduce(a, b, 8, PRIMITIVE_POLY_256), "{a} * {b}");
            }
        }
    }

    #[test]
    fn inverses() {
        let f = gf256();
        for a in 1..=255u8 {
            let inv = f.inv(a).unwrap();
            assert_eq!(f.mul(a, inv), 1);
        }
        assert_eq!(f.inv(0), None);
    }

    #[test]
    fn minimal_polynomials() {
        let f = gf256();
        assert_eq!(f.minimal_polynomial(1), PRIMITIVE_POLY_256 as u32);
        let m3 = f.minimal_polynomial(3);
        assert_eq!(32 - m3.leading_zeros() - 1, 8);
        // alpha^3 is a root
        let mut acc = 0u8;
        for i in 0..=8 {
            if m3 >> i & 1 == 1 {
                acc ^= f.alpha_pow(3 * i);
            }
        }
        assert_eq!(acc, 0);
        let small = GaloisField::new(5, PRIMITIVE_POLY_32);
        assert_eq!(small.minimal_polynomial(1), PRIMITIVE_POLY_32 as u32);
    }

    #[test]
    fn small_field_matches_clmul() {
        let f = GaloisField::new(5, PRIMITIVE_POLY_32);
        for a in 0..32u8 {
            for b in 0..32u8 {
                assert_eq!(f.mul(a, b), clmul_reduce(a, b, 5, PRIMITIVE_POLY_32));
            }
        }
    }
}
