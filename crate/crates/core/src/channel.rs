//! Hard-decision channels: Gray-mapped 16-QAM and BPSK over AWGN, and a BSC.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use statrs::function::erf::erfc;

use crate::chunk::Chunk;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    /// 16-QAM on AWGN; `snr_db` is Es/N0.
    Qam16Awgn,
    /// BPSK on AWGN; `snr_db` is Eb/N0.
    BpskAwgn,
    /// Binary symmetric channel; `snr_db` holds the crossover probability.
    Bsc,
}

impl ChannelKind {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            ChannelKind::Qam16Awgn => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    /// SNR in dB, or the crossover probability for [`ChannelKind::Bsc`].
    pub snr_db: f64,
    pub rng_seed: u64,
}

impl ChannelModel {
    pub fn qam16(snr_db: f64, rng_seed: u64) -> Self {
        ChannelModel { kind: ChannelKind::Qam16Awgn, snr_db, rng_seed }
    }

    pub fn bpsk(snr_db: f64, rng_seed: u64) -> Self {
        ChannelModel { kind: ChannelKind::BpskAwgn, snr_db, rng_seed }
    }

    pub fn bsc(p: f64, rng_seed: u64) -> Self {
        ChannelModel { kind: ChannelKind::Bsc, snr_db: p, rng_seed }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ChannelKind::Bsc if !(0.0..=0.5).contains(&self.snr_db) => {
                Err(Error::Config(format!("crossover probability {} outside [0, 0.5]", self.snr_db)))
            }
            _ if self.snr_db.is_nan() => Err(Error::Config("SNR is NaN".into())),
            _ => Ok(()),
        }
    }

    /// Noise variance per real dimension for unit symbol (or bit) energy.
    pub fn noise_variance(&self) -> f64 {
        let snr = 10f64.powf(self.snr_db / 10.0);
        1.0 / (2.0 * snr)
    }
}

/// Standard Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Closed-form hard-decision bit-error probability under Gray mapping.
pub fn prefec_ber_theoretical(model: &ChannelModel) -> Result<f64> {
    let snr = 10f64.powf(model.snr_db / 10.0);
    match model.kind {
        ChannelKind::BpskAwgn => Ok(q_function((2.0 * snr).sqrt())),
        ChannelKind::Qam16Awgn => {
            let a = (snr / 5.0).sqrt();
            Ok((3.0 * q_function(a) + 2.0 * q_function(3.0 * a) - q_function(5.0 * a)) / 4.0)
        }
        ChannelKind::Bsc => Err(Error::Config("BSC crossover probability is already the bit-error rate".into())),
    }
}

const QAM_SCALE: f64 = 0.316_227_766_016_837_94; // 1/sqrt(10)

/// Per-axis Gray map: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3.
#[inline]
fn gray_level(b0: bool, b1: bool) -> f64 {
    match (b0, b1) {
        (false, false) => -3.0,
        (false, true) => -1.0,
        (true, true) => 1.0,
        (true, false) => 3.0,
    }
}

#[inline]
fn gray_slice(y: f64) -> (bool, bool) {
    if y < -2.0 {
        (false, false)
    } else if y < 0.0 {
        (false, true)
    } else if y < 2.0 {
        (true, true)
    } else {
        (true, false)
    }
}

/// A channel with its own random stream.
#[derive(Debug, Clone)]
pub struct Channel {
    model: ChannelModel,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    flip: Option<Bernoulli>,
}

impl Channel {
    pub fn new(model: ChannelModel) -> Result<Self> {
        model.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(model.rng_seed);
        let (noise, flip) = match model.kind {
            ChannelKind::Bsc => {
                (None, Some(Bernoulli::new(model.snr_db).map_err(|e| Error::Config(e.to_string()))?))
            }
            ChannelKind::Qam16Awgn => {
                let sd = (model.noise_variance() * 10.0).sqrt();
                (Some(Normal::new(0.0, sd).map_err(|e| Error::Config(e.to_string()))?), None)
            }
            ChannelKind::BpskAwgn => {
                let sd = model.noise_variance().sqrt();
                (Some(Normal::new(0.0, sd).map_err(|e| Error::Config(e.to_string()))?), None)
            }
        };
        Ok(Channel { model, rng, noise, flip })
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    /// Transmits `bits` and returns the hard decisions.
    pub fn transmit(&mut self, bits: &[bool]) -> Result<Vec<bool>> {
        let bps = self.model.kind.bits_per_symbol();
        if !bits.len().is_multiple_of(bps) {
            return Err(Error::Length { expected: bits.len().next_multiple_of(bps), got: bits.len() });
        }
        let mut out = Vec::with_capacity(bits.len());
        match self.model.kind {
            ChannelKind::Bsc => {
                let d = self.flip.unwrap();
                out.extend(bits.iter().map(|&b| b ^ d.sample(&mut self.rng)));
            }
            ChannelKind::BpskAwgn => {
                let n = self.noise.unwrap();
                out.extend(bits.iter().map(|&b| {
                    let x = if b { 1.0 } else { -1.0 };
                    x + n.sample(&mut self.rng) >= 0.0
                }));
            }
            ChannelKind::Qam16Awgn => {
                // Noise is drawn on the unscaled integer grid (variance already scaled by 10).
                let n = self.noise.unwrap();
                for s in bits.chunks_exact(4) {
                    let i = gray_level(s[0], s[1]) + n.sample(&mut self.rng);
                    let q = gray_level(s[2], s[3]) + n.sample(&mut self.rng);
                    let (a, b) = gray_slice(i);
                    let (c, d) = gray_slice(q);
                    out.extend([a, b, c, d]);
                }
            }
        }
        Ok(out)
    }

    /// Transmits the `rows` low rows of every column of `chunk`, column by column.
    pub fn transmit_chunk(&mut self, chunk: &Chunk, rows: usize) -> Result<Chunk> {
        let bits = chunk.to_bits(rows);
        Ok(Chunk::from_bits(&self.transmit(&bits)?, rows))
    }

    pub fn rng(&mut self) -> &mut impl Rng {
        &mut self.rng
    }
}

/// One-shot transmission using the model's seed.
pub fn transmit_hard(bits: &[bool], model: &ChannelModel) -> Result<Vec<bool>> {
    Channel::new(*model)?.transmit(bits)
}

/// Symbol energy of the normalized constellation, for reference.
pub fn qam16_average_energy() -> f64 {
    let levels = [-3.0f64, -1.0, 1.0, 3.0];
    let e: f64 = levels.iter().flat_map(|&i| levels.iter().map(move |&q| i * i + q * q)).sum();
    e / 16.0 * QAM_SCALE * QAM_SCALE
}
