//! Monte Carlo BER simulation and stall-pattern regression.

use std::collections::VecDeque;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Channel, ChannelKind, ChannelModel};
use crate::chunk::Chunk;
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::ibdd::{decode_stream, DecodeSchedule, SprVariant, StreamDecoder, StreamStats};
use crate::spr::SprPipelineConfig;
use crate::stall::{injected_stream, injection_base, ErrorPattern};

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `stream` under master seed `master`: `mix64(master ^ mix64(stream))`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    mix64(master ^ mix64(stream))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Ibdd,
    IbddRapp,
    IbddPipeline,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Ibdd, Variant::IbddRapp, Variant::IbddPipeline];

    pub fn spr(self, pipeline: &SprPipelineConfig) -> SprVariant {
        match self {
            Variant::Ibdd => SprVariant::None,
            Variant::IbddRapp => SprVariant::Rapp,
            Variant::IbddPipeline => SprVariant::Pipeline(pipeline.clone()),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Ibdd => "ibdd",
            Variant::IbddRapp => "ibdd-rapp",
            Variant::IbddPipeline => "ibdd-pipeline",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "ibdd" => Ok(Variant::Ibdd),
            "ibdd-rapp" => Ok(Variant::IbddRapp),
            "ibdd-pipeline" => Ok(Variant::IbddPipeline),
            _ => Err(Error::Config(format!("unknown decoder variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub channel: ChannelKind,
    /// SNR values in dB, or crossover probabilities for the BSC.
    pub points: Vec<f64>,
    pub variant: Variant,
    pub pipeline: SprPipelineConfig,
    pub schedule: DecodeSchedule,
    pub max_bits: u64,
    pub target_errors: u64,
    pub seed: u64,
    pub workers: usize,
    /// Chunks each worker decodes between stop-rule checks.
    pub batch_chunks: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            channel: ChannelKind::Qam16Awgn,
            points: vec![],
            variant: Variant::Ibdd,
            pipeline: SprPipelineConfig::default(),
            schedule: DecodeSchedule::default(),
            max_bits: 1_000_000_000,
            target_errors: 100,
            seed: 1,
            workers: 1,
            batch_chunks: 64,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, geom: &Geometry) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Config("no SNR or p values given".into()));
        }
        if self.target_errors == 0 {
            return Err(Error::Config("target errors must be at least 1".into()));
        }
        if self.workers == 0 || self.batch_chunks == 0 {
            return Err(Error::Config("workers and batch size must be at least 1".into()));
        }
        self.schedule.validate(geom)?;
        self.pipeline.validate()?;
        for &p in &self.points {
            ChannelModel { kind: self.channel, snr_db: p, rng_seed: 0 }.validate()?;
        }
        Ok(())
    }

    /// One-line description written as the CSV comment.
    pub fn describe(&self) -> String {
        let snr = match self.channel {
            ChannelKind::Qam16Awgn => "snr_db=Es/N0 (16-QAM, Gray, hard decision)",
            ChannelKind::BpskAwgn => "snr_db=Eb/N0 (BPSK, hard decision)",
            ChannelKind::Bsc => "p=BSC crossover probability",
        };
        let stages: Vec<String> = self.pipeline.stages.iter().map(|s| format!("{s:?}").to_lowercase()).collect();
        format!(
            "{snr}; decoder={} window={} passes={} cleanup={} spr_span={} max_failed={} stages={} mrbdd={} bdd_after={} clear={:?} seed={} workers={} batch={}",
            self.variant,
            self.schedule.window,
            self.schedule.passes_per_shift,
            self.schedule.cleanup_passes,
            self.schedule.spr_span,
            self.schedule.max_failed,
            stages.join(","),
            self.pipeline.run_mrbdd_before_each,
            self.pipeline.run_bdd_after_each,
            self.pipeline.clear_policy,
            self.seed,
            self.workers,
            self.batch_chunks,
        )
    }
}

/// One simulated point. Exactly one of `snr_db` and `p` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub snr_db: Option<f64>,
    pub p: Option<f64>,
    pub pre_fec_ber: f64,
    pub post_fec_ber: f64,
    pub bits_simulated: u64,
    pub bit_errors: u64,
    pub frames: u64,
    pub stalls_detected: u64,
    pub spr_invocations: u64,
    pub spr1_flips: u64,
    pub spr2_flips: u64,
    pub spr3_flips: u64,
    pub rapp_flips: u64,
    pub wall_seconds: f64,
    pub seed: u64,
}

impl BerRecord {
    /// Equality of everything except the wall-clock time.
    pub fn same_result(&self, other: &BerRecord) -> bool {
        BerRecord { wall_seconds: 0.0, ..self.clone() } == BerRecord { wall_seconds: 0.0, ..other.clone() }
    }

    pub fn point(&self) -> f64 {
        self.snr_db.or(self.p).unwrap_or(f64::NAN)
    }

    /// Poisson standard error of the post-FEC BER.
    pub fn post_fec_sigma(&self) -> f64 {
        if self.bits_simulated == 0 {
            return 0.0;
        }
        (self.bit_errors as f64).sqrt() / self.bits_simulated as f64
    }
}

/// Additive per-worker counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub channel_bits: u64,
    pub channel_errors: u64,
    pub bits: u64,
    pub errors: u64,
    pub frames: u64,
    pub stream: StreamStats,
}

impl Tally {
    pub fn merge(&mut self, o: &Tally) {
        self.channel_bits += o.channel_bits;
        self.channel_errors += o.channel_errors;
        self.bits += o.bits;
        self.errors += o.errors;
        self.frames += o.frames;
        self.stream.merge(&o.stream);
    }
}

struct Worker {
    geom: Arc<Geometry>,
    encoder: Encoder,
    channel: Channel,
    decoder: StreamDecoder,
    info_rng: ChaCha8Rng,
    sent: VecDeque<Chunk>,
    tally: Tally,
}

impl Worker {
    fn new(geom: Arc<Geometry>, cfg: &SimConfig, point: f64, seed: u64) -> Result<Self> {
        let model = ChannelModel { kind: cfg.channel, snr_db: point, rng_seed: derive_seed(seed, 1) };
        Ok(Worker {
            encoder: Encoder::new((*geom).clone()),
            channel: Channel::new(model)?,
            decoder: StreamDecoder::new(Arc::clone(&geom), cfg.schedule, cfg.variant.spr(&cfg.pipeline))?,
            info_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 0)),
            sent: VecDeque::new(),
            tally: Tally::default(),
            geom,
        })
    }

    fn step(&mut self) -> Result<()> {
        let rows = self.geom.rows();
        let k = self.geom.params().info_rows();
        let mask = (1u128 << k) - 1;
        let info = Chunk { cols: (0..self.geom.cols()).map(|_| self.info_rng.random::<u128>() & mask).collect() };
        let tx = self.encoder.push(&info)?;
        let rx = self.channel.transmit_chunk(&tx, rows)?;
        self.tally.channel_bits += (rows * self.geom.cols()) as u64;
        self.tally.channel_errors += tx.distance(&rx, rows);
        self.sent.push_back(tx);
        if let Some((idx, out)) = self.decoder.push(rx)? {
            let truth = self.sent.pop_front().expect("sent chunk queued");
            if idx >= self.geom.reach() as i64 {
                self.tally.errors += truth.distance(&out, k);
                self.tally.bits += (k * self.geom.cols()) as u64;
                self.tally.frames += 1;
            }
        }
        self.tally.stream = *self.decoder.stats();
        Ok(())
    }
}

/// Simulates one point. Workers advance in lock-step rounds of
/// `batch_chunks` chunks; the stop rule is checked between rounds on the
/// pooled counters, so the result depends only on the configuration.
pub fn run_point(geom: Arc<Geometry>, cfg: &SimConfig, point: f64) -> Result<BerRecord> {
    cfg.validate(&geom)?;
    let start = Instant::now();
    let mut workers = (0..cfg.workers)
        .map(|i| Worker::new(Arc::clone(&geom), cfg, point, derive_seed(cfg.seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut pooled = Tally::default();
    while pooled.errors < cfg.target_errors && pooled.bits < cfg.max_bits {
        workers.par_iter_mut().try_for_each(|w| (0..cfg.batch_chunks).try_for_each(|_| w.step()))?;
        pooled = Tally::default();
        for w in &workers {
            pooled.merge(&w.tally);
        }
    }
    let (snr_db, p) = match cfg.channel {
        ChannelKind::Bsc => (None, Some(point)),
        _ => (Some(point), None),
    };
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let s = pooled.stream;
    Ok(BerRecord {
        snr_db,
        p,
        pre_fec_ber: ratio(pooled.channel_errors, pooled.channel_bits),
        post_fec_ber: ratio(pooled.errors, pooled.bits),
        bits_simulated: pooled.bits,
        bit_errors: pooled.errors,
        frames: pooled.frames,
        stalls_detected: s.stalls_detected,
        spr_invocations: s.spr_invocations,
        spr1_flips: s.spr1_flips,
        spr2_flips: s.spr2_flips,
        spr3_flips: s.spr3_flips,
        rapp_flips: s.rapp_flips,
        wall_seconds: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
    })
}

pub const CSV_HEADER: &str = "snr_db,p,pre_fec_ber,post_fec_ber,bits_simulated,bit_errors,frames,stalls_detected,spr_invocations,spr1_flips,spr2_flips,spr3_flips,rapp_flips,wall_seconds,seed";

/// Reads the records already present in a sweep file.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<BerRecord>> {
    let file = std::fs::File::open(path)?;
    let body: String = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l + "\n")
        .collect();
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    Ok(rd.deserialize().collect::<std::result::Result<Vec<BerRecord>, _>>()?)
}

/// Runs every point of `cfg`, appending one CSV row per finished point.
/// Points already present in an existing file are skipped, so an interrupted
/// sweep can be resumed with the same command. Returns the new records.
pub fn run_sweep(geom: Arc<Geometry>, cfg: &SimConfig, out: impl AsRef<Path>) -> Result<Vec<BerRecord>> {
    cfg.validate(&geom)?;
    let out = out.as_ref();
    let done: Vec<f64> = if out.exists() && std::fs::metadata(out)?.len() > 0 {
        read_records(out)?.iter().map(BerRecord::point).collect()
    } else {
        let mut f = std::fs::File::create(out)?;
        writeln!(f, "# {}", cfg.describe())?;
        writeln!(f, "{CSV_HEADER}")?;
        vec![]
    };
    let mut fresh = Vec::new();
    for &point in &cfg.points {
        if done.contains(&point) {
            continue;
        }
        let rec = run_point(Arc::clone(&geom), cfg, point)?;
        let f = std::fs::OpenOptions::new().append(true).open(out)?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(f);
        w.serialize(&rec)?;
        w.flush()?;
        fresh.push(rec);
    }
    Ok(fresh)
}

/// Outcome of one pattern under one decoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegressionRow {
    pub pattern: usize,
    pub label: String,
    pub category: u8,
    pub seed: u64,
    pub decoder: String,
    pub verdict: String,
    pub residual: u64,
    pub spr_invocations: u64,
}

impl RegressionRow {
    pub fn resolved(&self) -> bool {
        self.residual == 0
    }
}

/// Decodes a pattern injected into an all-zero stream and returns the number
/// of erroneous bits left in the output, with the decoder statistics.
pub fn decode_pattern(
    geom: Arc<Geometry>,
    pattern: &ErrorPattern,
    variant: Variant,
    schedule: DecodeSchedule,
    pipeline: &SprPipelineConfig,
) -> Result<(u64, StreamStats)> {
    let len = (injection_base(&geom) + pattern.span()) as usize + schedule.window + 1;
    let stream = injected_stream(&geom, pattern, len);
    let (out, stats) = decode_stream(geom, stream, schedule, variant.spr(pipeline))?;
    Ok((out.iter().map(Chunk::count_ones).sum(), stats))
}

pub fn run_regression(
    geom: Arc<Geometry>,
    corpus: &[ErrorPattern],
    variants: &[Variant],
    schedule: DecodeSchedule,
    pipeline: &SprPipelineConfig,
) -> Result<Vec<RegressionRow>> {
    let jobs: Vec<(usize, Variant)> =
        (0..corpus.len()).flat_map(|i| variants.iter().map(move |&v| (i, v))).collect();
    jobs.par_iter()
        .map(|&(i, v)| {
            let p = &corpus[i];
            let (residual, stats) = decode_pattern(Arc::clone(&geom), p, v, schedule, pipeline)?;
            Ok(RegressionRow {
                pattern: i,
                label: p.label.clone(),
                category: p.category,
                seed: p.seed,
                decoder: v.to_string(),
                verdict: if residual == 0 { "Resolves".into() } else { "Stalls".into() },
                residual,
                spr_invocations: stats.spr_invocations,
            })
        })
        .collect()
}

pub fn write_regression(w: impl Write, rows: &[RegressionRow]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(["pattern", "label", "category", "seed", "decoder", "verdict", "residual", "spr_invocations"])?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
