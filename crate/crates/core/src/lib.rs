//! OFEC spatially coupled eBCH code: encoder, iterative BDD decoder,
//! stall-pattern removal, stall-pattern lab and Monte Carlo harness.

pub mod bch;
pub mod buffer;
pub mod channel;
pub mod chunk;
pub mod encoder;
pub mod error;
pub mod geometry;
pub mod gf;
pub mod ibdd;
pub mod sim;
pub mod spr;
pub mod stall;

pub use bch::{ebch256, BddOutcome, BddTag, ExtendedBch, Word};
pub use buffer::{ChunkBuffer, PassMode};
pub use chunk::Chunk;
pub use encoder::{encode_chunk, Encoder};
pub use error::{Error, Result};
pub use geometry::{ChunkAddress, Geometry, OfecParams};
pub use ibdd::{decode_stream, DecodeSchedule, SprVariant, StreamDecoder};
pub use spr::{ClearPolicy, SprPipelineConfig, Subroutine};
