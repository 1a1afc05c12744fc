//! Command-line front end for the QRNG simulator and entropy toolkit.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 runtime or stage
//! error, 3 extraction refusal (leftover-hash-lemma gate).

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use qrng::config::RunConfig;
use qrng::error::{Error, Result};
use qrng::pipeline;
use std::fs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "qrng",
    about = "Simulator and entropy-processing toolkit for a vacuum-fluctuation QRNG",
    version
)]
struct Cli {
    /// Configuration file of `key = value` lines; defaults apply when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set run.seed=7 (repeatable, wins over file)
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the balance point, simulate a voltage trace, and digitize it
    Simulate {
        /// Output voltage trace (f64 little-endian)
        #[arg(long)]
        voltage_out: PathBuf,
        /// Output ADC code trace (u8/u16 little-endian + .meta sidecar)
        #[arg(long)]
        codes_out: PathBuf,
    },
    /// Calibrate noise from LO-on/LO-off traces, report QCNR and min-entropy
    Analyze {
        #[arg(long)]
        lo_on: PathBuf,
        #[arg(long)]
        lo_off: PathBuf,
        /// Write the report here as well as to stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stream a code trace through the Toeplitz extractor
    Extract {
        /// Input code trace (requires its .meta sidecar)
        #[arg(long, required_unless_present = "benchmark")]
        trace: Option<PathBuf>,
        /// Toeplitz seed file (one-line header + packed bits)
        #[arg(long, required_unless_present = "benchmark")]
        seed_file: Option<PathBuf>,
        /// Output packed bitstream
        #[arg(long, required_unless_present = "benchmark")]
        out: Option<PathBuf>,
        /// Derive the seed from run.seed and write it to --seed-file first
        #[arg(long)]
        gen_seed: bool,
        /// Extract even when the leftover-hash-lemma check fails
        #[arg(long)]
        override_entropy: bool,
        /// Benchmark in-memory extraction throughput instead of reading a trace
        #[arg(long)]
        benchmark: bool,
    },
    /// Closed-loop modulation-index feedback under sensitivity drift
    Rebalance {
        #[arg(long, default_value_t = 20)]
        steps: usize,
        /// Samples averaged per measurement window
        #[arg(long, default_value_t = 10_000)]
        window: usize,
        /// Additive drift applied to detection.s2 before each window
        #[arg(long, default_value_t = 1e-4)]
        drift: f64,
        /// Correct when |offset| exceeds this fraction of the tolerance
        #[arg(long, default_value_t = 0.25)]
        threshold_fraction: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the statistical battery over a packed bitstream file
    Test {
        #[arg(long)]
        bitstream: PathBuf,
        /// Write the structured text report here
        #[arg(long)]
        text_out: Option<PathBuf>,
        /// Write the delimited table here
        #[arg(long)]
        table_out: Option<PathBuf>,
    },
    /// Full in-memory pipeline: balance, simulate, audit, extract, test
    Report {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output bits generated by the throughput benchmark stage
        #[arg(long, default_value_t = 10_000_000)]
        benchmark_bits: usize,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::parse(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    for kv in &cli.overrides {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("--set {kv}: expected KEY=VALUE")))?;
        cfg.set(key.trim(), value.trim())?;
    }
    Ok(cfg)
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<()> {
    print!("{text}");
    if let Some(path) = out {
        fs::write(path, text)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Simulate {
            voltage_out,
            codes_out,
        } => {
            let s = pipeline::cmd_simulate(&cfg, &voltage_out, &codes_out)?;
            println!("m_star: {:.9}", s.m_star);
            println!("residual: {:.3e}", s.residual);
            println!("offset_v: {:.3e}", s.offset_v);
            println!("samples: {}", s.count);
            println!(
                "clipped: {} low, {} high",
                s.clip.clipped_low, s.clip.clipped_high
            );
            Ok(0)
        }
        Command::Analyze { lo_on, lo_off, out } => {
            let report = pipeline::cmd_analyze(&cfg, &lo_on, &lo_off)?;
            emit(&report.to_text(), &out)?;
            Ok(0)
        }
        Command::Extract {
            trace,
            seed_file,
            out,
            gen_seed,
            override_entropy,
            benchmark,
        } => {
            if benchmark {
                let rate = pipeline::cmd_benchmark(&cfg, 100_000_000)?;
                println!("throughput_mbit_per_sec: {:.1}", rate / 1e6);
                return Ok(0);
            }
            // clap enforces presence when not benchmarking
            let (trace, seed_file, out) = (trace.unwrap(), seed_file.unwrap(), out.unwrap());
            if gen_seed {
                qrng::io::write_seed(&seed_file, &pipeline::derive_seed(&cfg)?)?;
            }
            let s = pipeline::cmd_extract(&cfg, &trace, &seed_file, &out, override_entropy)?;
            println!("output_bits: {}", s.output_bits);
            println!("blocks: {}", s.blocks);
            println!(
                "throughput_mbit_per_sec: {:.1}",
                s.throughput_bits_per_sec / 1e6
            );
            if s.short_input {
                eprintln!(
                    "warning: input shorter than one {}-bit block; no output emitted",
                    cfg.extractor.k
                );
            } else if s.discarded_samples > 0 {
                eprintln!(
                    "warning: {} trailing samples discarded (partial block)",
                    s.discarded_samples
                );
            }
            Ok(0)
        }
        Command::Rebalance {
            steps,
            window,
            drift,
            threshold_fraction,
            out,
        } => {
            let scenario = pipeline::RebalanceScenario {
                steps,
                window,
                drift_per_step: drift,
                threshold_fraction,
            };
            let log = pipeline::cmd_rebalance(&cfg, &scenario)?;
            emit(&log.to_text(), &out)?;
            Ok(if log.failure.is_some() { 2 } else { 0 })
        }
        Command::Test {
            bitstream,
            text_out,
            table_out,
        } => {
            let report = pipeline::cmd_test(&bitstream)?;
            emit(&report.to_text(), &text_out)?;
            if let Some(path) = &table_out {
                fs::write(path, report.to_table())?;
            }
            Ok(if report.overall { 0 } else { 2 })
        }
        Command::Report {
            out,
            benchmark_bits,
        } => {
            let report = pipeline::cmd_report(&cfg, benchmark_bits)?;
            emit(&report.to_text(), &out)?;
            Ok(0)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig { .. } | Error::Parse(_) => 1,
        Error::ExtractionRefused(_) => 3,
        _ => 2,
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code(&e));
        }
    }
}
