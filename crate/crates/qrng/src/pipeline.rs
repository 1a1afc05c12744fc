//! Pipeline stages behind the CLI subcommands: simulate -> quantize ->
//! entropy audit -> extract -> statistical test, plus the closed-loop
//! rebalance scenario and the aggregate report.

use crate::config::RunConfig;
use crate::entropy::{min_entropy, EntropyInputs, EntropyReport, ExtractorParams};
use crate::error::{Error, Result};
use crate::extract::{benchmark_throughput, extract_stream, seed_from_entropy, ToeplitzSeed};
use crate::io;
use crate::optics::{
    arm_photon_numbers, balance_solve, imbalance_offset, ModulatorConfig,
};
use crate::signal::{calibrate_noise, qcnr, quantize, simulate_trace, ClipReport, NoiseModel};
use crate::stattests::{bits_from_bytes, run_battery, BatteryReport};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

/// Outcome of the simulate stage.
#[derive(Debug, Clone)]
pub struct SimulateSummary {
    /// Solved balancing modulation index.
    pub m_star: f64,
    /// Photocurrent balance residual |s1 n1 - s2 n2| / (s1 n1).
    pub residual: f64,
    /// Residual mean offset folded into the trace, V.
    pub offset_v: f64,
    pub count: usize,
    pub clip: ClipReport,
}

/// Solves the balance point, simulates a voltage trace at it, digitizes,
/// and writes both trace files (the code trace gains a `.meta` sidecar).
pub fn cmd_simulate(
    cfg: &RunConfig,
    voltage_out: &Path,
    codes_out: &Path,
) -> Result<SimulateSummary> {
    cfg.validate()?;
    if cfg.sample_count == 0 {
        return Err(Error::InvalidConfig {
            field: "run.sample_count".into(),
            reason: "must be >= 1".into(),
        });
    }
    let m_star = balance_solve(&cfg.detection, cfg.modulator.sideband_order, cfg.modulator.mu0)?;
    let modulator = ModulatorConfig {
        modulation_index: m_star,
        ..cfg.modulator.clone()
    };
    let arms = arm_photon_numbers(&modulator, &cfg.detection)?;
    let residual =
        (cfg.detection.s1 * arms.n1 - cfg.detection.s2 * arms.n2).abs()
            / (cfg.detection.s1 * arms.n1);
    let offset_v = imbalance_offset(&arms, &cfg.detection, cfg.modulator.mu0)?;
    let noise = NoiseModel {
        delta_dc: cfg.noise.delta_dc + offset_v,
        ..cfg.noise
    };
    let trace = simulate_trace(&noise, cfg.sample_count, cfg.seed)?;
    let (codes, clip) = quantize(&trace, &cfg.adc)?;
    io::write_voltage_trace(voltage_out, &trace.samples)?;
    io::write_code_trace(codes_out, &codes)?;
    Ok(SimulateSummary {
        m_star,
        residual,
        offset_v,
        count: cfg.sample_count,
        clip,
    })
}

/// Outcome of the analyze stage: calibrated noise model, QCNR, and the
/// entropy audit derived from the measured statistics.
#[derive(Debug, Clone)]
pub struct AnalyzeReport {
    pub noise: NoiseModel,
    pub qcnr_db: f64,
    pub entropy: EntropyReport,
}

impl AnalyzeReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "sigma_q2_v2: {:.6e}", self.noise.sigma_q2);
        let _ = writeln!(s, "sigma_e2_v2: {:.6e}", self.noise.sigma_e2);
        let _ = writeln!(s, "delta_dc_v: {:.6e}", self.noise.delta_dc);
        let _ = writeln!(s, "qcnr_db: {:.4}", self.qcnr_db);
        s.push_str(&self.entropy.to_text());
        s
    }
}

/// Calibrates the noise model from LO-on/LO-off voltage traces, then runs
/// the QCNR and min-entropy audit against the configured digitizer.
pub fn cmd_analyze(cfg: &RunConfig, lo_on: &Path, lo_off: &Path) -> Result<AnalyzeReport> {
    let on = crate::signal::VoltageTrace {
        samples: io::read_voltage_trace(lo_on)?,
        seed: 0,
    };
    let off = crate::signal::VoltageTrace {
        samples: io::read_voltage_trace(lo_off)?,
        seed: 0,
    };
    let noise = calibrate_noise(&on, &off)?;
    let qcnr_db = qcnr(&noise)?;
    let inputs = EntropyInputs::new(
        noise.sigma_q2.sqrt(),
        noise.sigma_e2.sqrt(),
        noise.delta_dc,
        cfg.adc,
    );
    let entropy = min_entropy(&inputs)?;
    Ok(AnalyzeReport {
        noise,
        qcnr_db,
        entropy,
    })
}

/// Entropy audit from the configured (model) noise parameters rather than a
/// measured trace; used to certify extraction parameters.
pub fn model_entropy(cfg: &RunConfig) -> Result<EntropyReport> {
    let inputs = EntropyInputs::new(
        cfg.noise.sigma_q2.sqrt(),
        cfg.noise.sigma_e2.sqrt(),
        cfg.noise.delta_dc,
        cfg.adc,
    );
    min_entropy(&inputs)
}

/// Text of the leftover-hash-lemma check for error messages and reports.
fn lemma_inequality(params: &ExtractorParams, h_min: f64) -> String {
    let bound = params.k as f64 * h_min / params.n_bits as f64
        - 2.0 * (1.0 / params.epsilon).log2();
    format!(
        "l = {} {} k h/n - 2 log2(1/eps) = {} * {:.6} / {} - {:.1} = {:.4}",
        params.l,
        if (params.l as f64) < bound { "<" } else { ">=" },
        params.k,
        h_min,
        params.n_bits,
        2.0 * (1.0 / params.epsilon).log2(),
        bound
    )
}

/// Derives the Toeplitz seed material deterministically from the run seed.
pub fn derive_seed(cfg: &RunConfig) -> Result<ToeplitzSeed> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ 0x7365_6564_5f6b_6579); // "seed_key"
    let mut material = vec![0u8; (cfg.extractor.k + cfg.extractor.l - 1).div_ceil(8)];
    rng.fill_bytes(&mut material);
    seed_from_entropy(&material, cfg.extractor.k, cfg.extractor.l)
}

/// Outcome of the extract stage.
#[derive(Debug, Clone)]
pub struct ExtractSummary {
    pub output_bits: usize,
    pub blocks: usize,
    pub discarded_samples: usize,
    pub throughput_bits_per_sec: f64,
    /// Set when the input held fewer samples than one block.
    pub short_input: bool,
}

/// Streams a code trace through the Toeplitz extractor and writes the packed
/// bitstream. Refuses unless the leftover-hash-lemma inequality holds for the
/// configured (k, l, epsilon) at the model min-entropy — `override_entropy`
/// skips the gate.
pub fn cmd_extract(
    cfg: &RunConfig,
    trace_path: &Path,
    seed_path: &Path,
    out_path: &Path,
    override_entropy: bool,
) -> Result<ExtractSummary> {
    cfg.validate()?;
    if !override_entropy {
        let entropy = model_entropy(cfg)?;
        if cfg.extractor.lemma_slack(entropy.h_min) <= 0.0 {
            return Err(Error::ExtractionRefused(lemma_inequality(
                &cfg.extractor,
                entropy.h_min,
            )));
        }
    }
    let seed = io::read_seed(seed_path)?;
    let trace = io::read_code_trace(trace_path)?;
    if trace.adc.n_bits != cfg.extractor.n_bits {
        return Err(Error::InvalidConfig {
            field: "extractor.n_bits".into(),
            reason: format!(
                "trace resolution is {} bits, extractor expects {}",
                trace.adc.n_bits, cfg.extractor.n_bits
            ),
        });
    }
    let start = Instant::now();
    let out = extract_stream(&seed, &trace.codes, &cfg.extractor)?;
    let secs = start.elapsed().as_secs_f64();
    io::write_bitstream(out_path, &out.bytes)?;
    Ok(ExtractSummary {
        output_bits: out.output_bits,
        blocks: out.blocks,
        discarded_samples: out.discarded_samples,
        throughput_bits_per_sec: out.output_bits as f64 / secs.max(1e-12),
        short_input: out.short_input(),
    })
}

/// In-memory extraction throughput benchmark, output bits per second.
pub fn cmd_benchmark(cfg: &RunConfig, min_output_bits: usize) -> Result<f64> {
    benchmark_throughput(&cfg.extractor, min_output_bits)
}

/// Drift scenario for the closed-loop rebalance demonstration: a slow linear
/// walk of the carrier-arm sensitivity, measured in windows of simulated
/// samples, corrected by re-solving the balance whenever the estimated
/// offset leaves the inner band.
#[derive(Debug, Clone)]
pub struct RebalanceScenario {
    /// Number of measurement windows.
    pub steps: usize,
    /// Samples averaged per window.
    pub window: usize,
    /// Additive drift applied to s2 before each window.
    pub drift_per_step: f64,
    /// Correct when |estimated offset| exceeds this fraction of the
    /// delta tolerance.
    pub threshold_fraction: f64,
}

impl Default for RebalanceScenario {
    fn default() -> Self {
        RebalanceScenario {
            steps: 20,
            window: 10_000,
            drift_per_step: 1e-4,
            threshold_fraction: 0.25,
        }
    }
}

/// One measurement window of the rebalance loop.
#[derive(Debug, Clone)]
pub struct RebalanceEntry {
    pub step: usize,
    /// Drifted true sensitivity of the carrier arm.
    pub s2_true: f64,
    /// True offset before any correction this step, V.
    pub delta_before: f64,
    /// Window-mean estimate the controller acted on, V.
    pub delta_measured: f64,
    /// True offset after the step (corrected or not), V.
    pub delta_after: f64,
    pub corrected: bool,
    /// Modulation index in effect after the step.
    pub m_index: f64,
}

/// Full rebalance log; `failure` is set when the drift left the correctable
/// range, with `entries` holding the last good state.
#[derive(Debug, Clone)]
pub struct RebalanceLog {
    pub tolerance_v: f64,
    pub m_initial: f64,
    pub entries: Vec<RebalanceEntry>,
    pub corrections: usize,
    pub failure: Option<String>,
}

impl RebalanceLog {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "delta_tolerance_v: {:.6}", self.tolerance_v);
        let _ = writeln!(s, "m_initial: {:.9}", self.m_initial);
        let _ = writeln!(
            s,
            "step, s2_true, delta_before_v, delta_measured_v, delta_after_v, corrected, m_index"
        );
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{}, {:.6}, {:+.6}, {:+.6}, {:+.6}, {}, {:.9}",
                e.step,
                e.s2_true,
                e.delta_before,
                e.delta_measured,
                e.delta_after,
                e.corrected,
                e.m_index
            );
        }
        let _ = writeln!(s, "corrections: {}", self.corrections);
        match &self.failure {
            Some(msg) => {
                let _ = writeln!(s, "status: failed ({msg})");
            }
            None => {
                let _ = writeln!(s, "status: ok");
            }
        }
        s
    }
}

/// True offset (V) of the drifted detector at modulation index `m`.
fn true_offset(cfg: &RunConfig, m: f64, s2_true: f64) -> Result<f64> {
    let det = crate::optics::DetectionConfig {
        s2: s2_true,
        ..cfg.detection.clone()
    };
    let modulator = ModulatorConfig {
        modulation_index: m,
        ..cfg.modulator.clone()
    };
    let arms = arm_photon_numbers(&modulator, &det)?;
    imbalance_offset(&arms, &det, cfg.modulator.mu0)
}

/// Closed-loop rebalance simulation. Each step drifts s2, measures the mean
/// voltage over a window, estimates the effective s2 from the optics model,
/// and re-solves the balance when the estimate leaves the inner band. An
/// uncorrectable drift ends the loop with `failure` set and the log intact.
pub fn cmd_rebalance(cfg: &RunConfig, scenario: &RebalanceScenario) -> Result<RebalanceLog> {
    cfg.validate()?;
    if scenario.steps == 0 || scenario.window == 0 {
        return Err(Error::InvalidConfig {
            field: "rebalance".into(),
            reason: "steps and window must be >= 1".into(),
        });
    }
    let entropy = model_entropy(cfg)?;
    let tolerance = entropy.delta_tolerance;
    let threshold = scenario.threshold_fraction * tolerance;
    let mu0 = cfg.modulator.mu0;
    let order = cfg.modulator.sideband_order;

    let m_initial = balance_solve(&cfg.detection, order, mu0)?;
    let mut m = m_initial;
    let mut s2_true = cfg.detection.s2;
    let mut log = RebalanceLog {
        tolerance_v: tolerance,
        m_initial,
        entries: Vec::with_capacity(scenario.steps),
        corrections: 0,
        failure: None,
    };
    for step in 0..scenario.steps {
        s2_true += scenario.drift_per_step;
        if s2_true <= 0.0 {
            log.failure = Some(format!("drifted s2 = {s2_true} is non-physical"));
            return Ok(log);
        }
        let delta_before = true_offset(cfg, m, s2_true)?;
        // measured window mean: true offset plus sampled noise
        let noise = NoiseModel {
            delta_dc: cfg.noise.delta_dc + delta_before,
            ..cfg.noise
        };
        let trace = simulate_trace(&noise, scenario.window, cfg.seed.wrapping_add(step as u64))?;
        let delta_measured =
            trace.samples.iter().sum::<f64>() / trace.samples.len() as f64 - cfg.noise.delta_dc;
        let mut corrected = false;
        if delta_measured.abs() > threshold {
            // invert the optics model at the current index to estimate s2
            let modulator = ModulatorConfig {
                modulation_index: m,
                ..cfg.modulator.clone()
            };
            let arms = arm_photon_numbers(&modulator, &cfg.detection)?;
            let s2_est =
                (cfg.detection.s1 * arms.n1 - 2.0 * mu0.sqrt() * delta_measured) / arms.n2;
            let det_est = crate::optics::DetectionConfig {
                s2: s2_est,
                ..cfg.detection.clone()
            };
            match det_est
                .validate()
                .and_then(|_| balance_solve(&det_est, order, mu0))
            {
                Ok(m_new) => {
                    m = m_new;
                    corrected = true;
                    log.corrections += 1;
                }
                Err(e) => {
                    log.failure = Some(format!("step {step}: {e}"));
                    return Ok(log);
                }
            }
        }
        let delta_after = true_offset(cfg, m, s2_true)?;
        log.entries.push(RebalanceEntry {
            step,
            s2_true,
            delta_before,
            delta_measured,
            delta_after,
            corrected,
            m_index: m,
        });
    }
    Ok(log)
}

/// Runs the statistical battery over a packed bitstream file.
pub fn cmd_test(bitstream_path: &Path) -> Result<BatteryReport> {
    let bytes = io::read_bitstream(bitstream_path)?;
    run_battery(&bits_from_bytes(&bytes))
}

/// Aggregate report over a full in-memory pipeline run; each section is
/// present iff the corresponding stage ran.
#[derive(Debug, Clone, Default)]
pub struct PipelineReport {
    pub balance: Option<(f64, f64)>,
    pub entropy: Option<EntropyReport>,
    pub extractor: Option<ExtractorParams>,
    pub battery: Option<BatteryReport>,
    pub throughput_bits_per_sec: Option<f64>,
}

impl PipelineReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some((m_star, residual)) = self.balance {
            let _ = writeln!(s, "[balance]");
            let _ = writeln!(s, "m_star: {m_star:.9}");
            let _ = writeln!(s, "residual: {residual:.3e}");
        }
        if let Some(e) = &self.entropy {
            let _ = writeln!(s, "[entropy]");
            s.push_str(&e.to_text());
        }
        if let Some(p) = &self.extractor {
            let _ = writeln!(s, "[extractor]");
            let _ = writeln!(s, "k: {}", p.k);
            let _ = writeln!(s, "l: {}", p.l);
            let _ = writeln!(s, "epsilon_log2: {:.1}", p.epsilon.log2());
            if let Some(e) = &self.entropy {
                let _ = writeln!(s, "lemma: {}", lemma_inequality(p, e.h_min));
            }
        }
        if let Some(b) = &self.battery {
            let _ = writeln!(s, "[battery]");
            s.push_str(&b.to_text());
        }
        if let Some(t) = self.throughput_bits_per_sec {
            let _ = writeln!(s, "[throughput]");
            let _ = writeln!(s, "extract_mbit_per_sec: {:.1}", t / 1e6);
        }
        s
    }
}

/// End-to-end in-memory pipeline: balance, simulate, digitize, entropy
/// audit, extract, run the battery, and benchmark extraction throughput.
pub fn cmd_report(cfg: &RunConfig, benchmark_bits: usize) -> Result<PipelineReport> {
    cfg.validate()?;
    let m_star = balance_solve(&cfg.detection, cfg.modulator.sideband_order, cfg.modulator.mu0)?;
    let modulator = ModulatorConfig {
        modulation_index: m_star,
        ..cfg.modulator.clone()
    };
    let arms = arm_photon_numbers(&modulator, &cfg.detection)?;
    let residual = (cfg.detection.s1 * arms.n1 - cfg.detection.s2 * arms.n2).abs()
        / (cfg.detection.s1 * arms.n1);
    let offset_v = imbalance_offset(&arms, &cfg.detection, cfg.modulator.mu0)?;

    let noise = NoiseModel {
        delta_dc: cfg.noise.delta_dc + offset_v,
        ..cfg.noise
    };
    let trace = simulate_trace(&noise, cfg.sample_count, cfg.seed)?;
    let (codes, _clip) = quantize(&trace, &cfg.adc)?;

    let entropy = model_entropy(cfg)?;
    if cfg.extractor.lemma_slack(entropy.h_min) <= 0.0 {
        return Err(Error::ExtractionRefused(lemma_inequality(
            &cfg.extractor,
            entropy.h_min,
        )));
    }
    let seed = derive_seed(cfg)?;
    let out = extract_stream(&seed, &codes.codes, &cfg.extractor)?;
    let battery = run_battery(&bits_from_bytes(&out.bytes))?;
    let throughput = benchmark_throughput(&cfg.extractor, benchmark_bits)?;
    Ok(PipelineReport {
        balance: Some((m_star, residual)),
        entropy: Some(entropy),
        extractor: Some(cfg.extractor),
        battery: Some(battery),
        throughput_bits_per_sec: Some(throughput),
    })
}
