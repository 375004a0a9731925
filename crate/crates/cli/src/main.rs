use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ofec_core::channel::ChannelKind;
use ofec_core::sim::{run_regression, run_sweep, write_regression, SimConfig, Variant};
use ofec_core::stall::corpus::{read_corpus, write_corpus};
use ofec_core::stall::ofec::{gen_cat1, gen_cat2, Cat1Size, Cat2Options};
use ofec_core::{DecodeSchedule, Geometry};

#[derive(Parser)]
#[command(name = "ofec-sim", version, about = "OFEC iterative BDD decoding: BER sweeps and stall-pattern regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo BER sweep, one CSV row per point.
    Simulate(SimulateArgs),
    /// Decode every pattern of a corpus with each decoder.
    Regress(RegressArgs),
    /// Generate verified stall patterns into a corpus file.
    Genpattern(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Qam16,
    Bpsk,
    Bsc,
}

impl From<ChannelArg> for ChannelKind {
    fn from(c: ChannelArg) -> Self {
        match c {
            ChannelArg::Qam16 => ChannelKind::Qam16Awgn,
            ChannelArg::Bpsk => ChannelKind::BpskAwgn,
            ChannelArg::Bsc => ChannelKind::Bsc,
        }
    }
}

#[derive(Args)]
struct ScheduleArgs {
    /// Decoding window in chunks.
    #[arg(long, default_value_t = 24)]
    window: usize,
    /// BDD passes per received chunk.
    #[arg(long, default_value_t = 2)]
    passes: usize,
    /// BDD passes after each SPR invocation.
    #[arg(long, default_value_t = 2)]
    cleanup: usize,
    /// Oldest chunks stall removal may act on.
    #[arg(long, default_value_t = 4)]
    spr_span: usize,
    /// Largest Failed-codeword count still treated as a stall.
    #[arg(long, default_value_t = 12)]
    max_failed: usize,
}

impl ScheduleArgs {
    fn schedule(&self) -> DecodeSchedule {
        DecodeSchedule {
            window: self.window,
            passes_per_shift: self.passes,
            cleanup_passes: self.cleanup,
            spr_span: self.spr_span,
            max_failed: self.max_failed,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ChannelArg::Qam16)]
    channel: ChannelArg,
    /// Comma-separated SNR values in dB (Es/N0 for 16-QAM, Eb/N0 for BPSK).
    #[arg(long, value_delimiter = ',', conflicts_with = "p")]
    snr_db: Vec<f64>,
    /// Comma-separated BSC crossover probabilities.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long, default_value = "ibdd-pipeline", value_parser = parse_variant)]
    decoder: Variant,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 1_000_000_000)]
    max_bits: u64,
    #[arg(long, default_value_t = 100)]
    target_errors: u64,
    /// Chunks per worker between stop-rule checks.
    #[arg(long, default_value_t = 64)]
    batch: usize,
    /// Output CSV; an existing file is resumed.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RegressArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "ibdd,ibdd-rapp,ibdd-pipeline", value_parser = parse_variant)]
    decoders: Vec<Variant>,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Output CSV, or - for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SizeArg {
    Minimal,
    Enlarged,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    category: u8,
    /// Seed of the first pattern; further patterns use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Category 1 grid size.
    #[arg(long, value_enum, default_value_t = SizeArg::Minimal)]
    size: SizeArg,
    /// Category 2 candidate budget per pattern.
    #[arg(long, default_value_t = 20_000)]
    budget: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: ofec_core::Error| e.to_string())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let channel: ChannelKind = args.channel.into();
    let points = match (channel, args.snr_db.is_empty(), args.p.is_empty()) {
        (ChannelKind::Bsc, true, false) => args.p,
        (ChannelKind::Bsc, _, _) => bail!("--channel bsc needs --p"),
        (_, false, true) => args.snr_db,
        _ => bail!("AWGN channels need --snr-db"),
    };
    let cfg = SimConfig {
        channel,
        points,
        variant: args.decoder,
        schedule: args.schedule.schedule(),
        max_bits: args.max_bits,
        target_errors: args.target_errors,
        seed: args.seed,
        workers: args.workers,
        batch_chunks: args.batch,
        ..SimConfig::default()
    };
    let geom = Arc::new(Geometry::default());
    let records = run_sweep(geom, &cfg, &args.out).with_context(|| format!("sweep into {}", args.out.display()))?;
    for r in &records {
        println!(
            "point {:>8} pre {:.4e} post {:.4e} ({} errors / {} bits, {} stalls, {:.1}s)",
            r.point(),
            r.pre_fec_ber,
            r.post_fec_ber,
            r.bit_errors,
            r.bits_simulated,
            r.stalls_detected,
            r.wall_seconds
        );
    }
    Ok(())
}

fn regress(args: RegressArgs) -> Result<()> {
    let geom = Arc::new(Geometry::default());
    let corpus = read_corpus(&args.corpus, &geom).with_context(|| format!("reading {}", args.corpus.display()))?;
    let rows = run_regression(geom, &corpus, &args.decoders, args.schedule.schedule(), &Default::default())?;
    let out: Box<dyn Write> = if args.out.as_os_str() == "-" {
        Box::new(io::stdout().lock())
    } else {
        Box::new(BufWriter::new(File::create(&args.out)?))
    };
    write_regression(out, &rows)?;
    for v in &args.decoders {
        let name = v.to_string();
        let resolved = rows.iter().filter(|r| r.decoder == name && r.resolved()).count();
        eprintln!("{name}: {resolved}/{} resolved", corpus.len());
    }
    Ok(())
}

fn genpattern(args: GenArgs) -> Result<()> {
    let geom = Arc::new(Geometry::default());
    let mut patterns = Vec::new();
    for seed in args.seed..args.seed + args.count {
        let p = match args.category {
            1 => {
                let size = match args.size {
                    SizeArg::Minimal => Cat1Size::Minimal,
                    SizeArg::Enlarged => Cat1Size::Enlarged,
                };
                gen_cat1(&geom, size, seed)?
            }
            _ => gen_cat2(Arc::clone(&geom), seed, args.budget, Cat2Options::default())?.0,
        };
        patterns.push(p);
    }
    write_corpus(&args.out, &patterns)?;
    eprintln!("wrote {} patterns to {}", patterns.len(), args.out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Regress(a) => regress(a),
        Command::Genpattern(a) => genpattern(a),
    }
}
