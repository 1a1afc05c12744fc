//! Statistical randomness battery: an eight-test subset of the NIST SP 800-22
//! suite (frequency, block frequency, runs, longest run of ones, cumulative
//! sums, discrete Fourier transform, approximate entropy, serial).
//!
//! The verdict rule is the two-sided band 0.025 <= p <= 0.975. Each test is
//! pinned to its published worked-example p-value; where the published text
//! rounds inconsistently, the reference-software convention is used.

use crate::error::{Error, Result};
use crate::special::{erfc, gamma_q, normal_cdf};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::fmt::Write as _;

/// Two-sided acceptance band for p-values.
pub const PASS_BAND: (f64, f64) = (0.025, 0.975);

/// Minimum input length `run_battery` accepts.
pub const BATTERY_MIN_BITS: usize = 10_000;
/// Below this length the battery notes reduced statistical power.
pub const BATTERY_FULL_POWER_BITS: usize = 1_000_000;

const DEFAULT_BLOCK_SIZE: usize = 128;
const DEFAULT_SERIAL_M: usize = 2;
const DEFAULT_APEN_M: usize = 2;

#[inline]
fn in_band(p: f64) -> bool {
    (PASS_BAND.0..=PASS_BAND.1).contains(&p)
}

/// Outcome of a single test: the p-value, the pass/fail verdict under the
/// two-sided band, the underlying statistic, and named parameters
/// (block sizes, secondary p-values).
#[derive(Debug, Clone)]
pub struct TestResult {
    pub test_name: String,
    pub p_value: f64,
    pub verdict: bool,
    pub statistic: f64,
    pub parameters: Vec<(String, f64)>,
}

impl TestResult {
    fn new(name: &str, statistic: f64, p_value: f64, parameters: &[(&str, f64)]) -> Self {
        TestResult {
            test_name: name.to_string(),
            p_value,
            verdict: in_band(p_value),
            statistic,
            parameters: parameters
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        }
    }
}

/// Aggregated battery outcome; `overall` passes iff every test passes.
#[derive(Debug, Clone)]
pub struct BatteryReport {
    pub results: Vec<TestResult>,
    pub overall: bool,
    pub input_length: usize,
    /// True when the input is below the recommended full-power length.
    pub reduced_power: bool,
}

impl BatteryReport {
    /// Structured text rendering, one `key: value` line per field.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "input_length: {}", self.input_length);
        if self.reduced_power {
            let _ = writeln!(
                s,
                "note: reduced statistical power (input below {BATTERY_FULL_POWER_BITS} bits)"
            );
        }
        for r in &self.results {
            let _ = writeln!(s, "test: {}", r.test_name);
            let _ = writeln!(s, "  statistic: {:.6}", r.statistic);
            let _ = writeln!(s, "  p_value: {:.6}", r.p_value);
            for (k, v) in &r.parameters {
                let _ = writeln!(s, "  {k}: {v:.6}");
            }
            let _ = writeln!(s, "  verdict: {}", if r.verdict { "pass" } else { "fail" });
        }
        let _ = writeln!(s, "overall: {}", if self.overall { "pass" } else { "fail" });
        s
    }

    /// Machine-readable comma-delimited table with a header row.
    pub fn to_table(&self) -> String {
        let mut s = String::from("test_name,statistic,p_value,verdict\n");
        for r in &self.results {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{}",
                r.test_name,
                r.statistic,
                r.p_value,
                if r.verdict { "pass" } else { "fail" }
            );
        }
        s
    }
}

/// Unpacks MSB-first bytes into one bit per element.
pub fn bits_from_bytes(bytes: &[u8]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(bytes.len() * 8);
    for &b in bytes {
        for i in (0..8).rev() {
            bits.push(b >> i & 1);
        }
    }
    bits
}

fn ones(bits: &[u8]) -> usize {
    bits.iter().filter(|&&b| b != 0).count()
}

fn require_len(test: &str, bits: &[u8], min: usize) -> Result<()> {
    if bits.len() < min {
        return Err(Error::TooShort {
            min,
            got: bits.len(),
        });
    }
    let _ = test;
    Ok(())
}

/// Monobit frequency test: p = erfc(|S_n| / sqrt(2n)) for the +/-1 sum S_n.
pub fn frequency_test(bits: &[u8]) -> Result<TestResult> {
    require_len("frequency", bits, 100)?;
    let n = bits.len() as f64;
    let s_n = 2.0 * ones(bits) as f64 - n;
    let s_obs = s_n.abs() / n.sqrt();
    let p = erfc(s_obs / std::f64::consts::SQRT_2);
    Ok(TestResult::new("frequency", s_obs, p, &[]))
}

/// Block frequency test: chi^2 = 4M sum (pi_i - 1/2)^2 over N = floor(n/M)
/// blocks; p = Q(N/2, chi^2/2).
pub fn block_frequency_test(bits: &[u8], block_size: usize) -> Result<TestResult> {
    if block_size < 2 {
        return Err(Error::Domain(format!(
            "block_frequency: block_size {block_size} < 2"
        )));
    }
    require_len("block_frequency", bits, block_size)?;
    let m = block_size;
    let n_blocks = bits.len() / m;
    let mut chi2 = 0.0;
    for blk in bits.chunks_exact(m) {
        let pi = ones(blk) as f64 / m as f64;
        chi2 += (pi - 0.5) * (pi - 0.5);
    }
    chi2 *= 4.0 * m as f64;
    let p = gamma_q(n_blocks as f64 / 2.0, chi2 / 2.0);
    Ok(TestResult::new(
        "block_frequency",
        chi2,
        p,
        &[("block_size", m as f64), ("blocks", n_blocks as f64)],
    ))
}

/// Runs test: counts sign changes V_n; prerequisite |pi - 1/2| < 2/sqrt(n),
/// otherwise p = 0 (frequency already failed).
pub fn runs_test(bits: &[u8]) -> Result<TestResult> {
    require_len("runs", bits, 10)?;
    let n = bits.len() as f64;
    let pi = ones(bits) as f64 / n;
    if (pi - 0.5).abs() >= 2.0 / n.sqrt() {
        return Ok(TestResult::new(
            "runs",
            0.0,
            0.0,
            &[("prerequisite_failed", 1.0), ("proportion", pi)],
        ));
    }
    let v_n = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
    let num = (v_n as f64 - 2.0 * n * pi * (1.0 - pi)).abs();
    let den = 2.0 * (2.0 * n).sqrt() * pi * (1.0 - pi);
    let p = erfc(num / den);
    Ok(TestResult::new(
        "runs",
        v_n as f64,
        p,
        &[("proportion", pi)],
    ))
}

struct LongestRunTable {
    block_size: usize,
    categories: &'static [usize],
    pi: &'static [f64],
}

const LONGEST_RUN_TABLES: [LongestRunTable; 3] = [
    LongestRunTable {
        block_size: 8,
        categories: &[1, 2, 3, 4],
        pi: &[0.2148, 0.3672, 0.2305, 0.1875],
    },
    LongestRunTable {
        block_size: 128,
        categories: &[4, 5, 6, 7, 8, 9],
        pi: &[0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124],
    },
    LongestRunTable {
        block_size: 10_000,
        categories: &[10, 11, 12, 13, 14, 15, 16],
        pi: &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727],
    },
];

/// Longest-run-of-ones test; block size 8/128/10000 chosen by input length.
pub fn longest_run_test(bits: &[u8]) -> Result<TestResult> {
    require_len("longest_run", bits, 128)?;
    let n = bits.len();
    let table = if n < 6272 {
        &LONGEST_RUN_TABLES[0]
    } else if n < 750_000 {
        &LONGEST_RUN_TABLES[1]
    } else {
        &LONGEST_RUN_TABLES[2]
    };
    let m = table.block_size;
    let k = table.categories.len() - 1;
    let n_blocks = n / m;
    let mut nu = vec![0usize; k + 1];
    for blk in bits.chunks_exact(m) {
        let mut longest = 0usize;
        let mut cur = 0usize;
        for &b in blk {
            cur = if b != 0 { cur + 1 } else { 0 };
            longest = longest.max(cur);
        }
        let lo = table.categories[0];
        let hi = table.categories[k];
        let idx = longest.clamp(lo, hi) - lo;
        nu[idx] += 1;
    }
    let mut chi2 = 0.0;
    for i in 0..=k {
        let expect = n_blocks as f64 * table.pi[i];
        chi2 += (nu[i] as f64 - expect) * (nu[i] as f64 - expect) / expect;
    }
    let p = gamma_q(k as f64 / 2.0, chi2 / 2.0);
    Ok(TestResult::new(
        "longest_run",
        chi2,
        p,
        &[("block_size", m as f64), ("blocks", n_blocks as f64)],
    ))
}

fn cusum_p(n: usize, z: usize) -> f64 {
    let nf = n as f64;
    let zf = z as f64;
    let scale = zf / nf.sqrt();
    // summation bounds truncate toward zero (reference-software convention)
    let lo1 = ((-nf / zf + 1.0) / 4.0).trunc() as i64;
    let hi1 = ((nf / zf - 1.0) / 4.0).trunc() as i64;
    let lo2 = ((-nf / zf - 3.0) / 4.0).trunc() as i64;
    let mut sum1 = 0.0;
    for k in lo1..=hi1 {
        let kf = k as f64;
        sum1 += normal_cdf((4.0 * kf + 1.0) * scale) - normal_cdf((4.0 * kf - 1.0) * scale);
    }
    let mut sum2 = 0.0;
    for k in lo2..=hi1 {
        let kf = k as f64;
        sum2 += normal_cdf((4.0 * kf + 3.0) * scale) - normal_cdf((4.0 * kf + 1.0) * scale);
    }
    (1.0 - sum1 + sum2).clamp(0.0, 1.0)
}

fn max_excursion(bits: &[u8], reverse: bool) -> usize {
    let mut s: i64 = 0;
    let mut z: i64 = 0;
    let iter: Box<dyn Iterator<Item = &u8>> = if reverse {
        Box::new(bits.iter().rev())
    } else {
        Box::new(bits.iter())
    };
    for &b in iter {
        s += if b != 0 { 1 } else { -1 };
        z = z.max(s.abs());
    }
    z as usize
}

/// Cumulative sums test, both forward and reverse modes. The reported
/// p-value is whichever of the two lies farther from 0.5, so the verdict
/// passes iff both modes fall in the band (which is symmetric about 0.5);
/// both p-values appear in `parameters`.
pub fn cumulative_sums_test(bits: &[u8]) -> Result<TestResult> {
    require_len("cumulative_sums", bits, 10)?;
    let n = bits.len();
    let z_f = max_excursion(bits, false);
    let z_r = max_excursion(bits, true);
    let p_f = cusum_p(n, z_f);
    let p_r = cusum_p(n, z_r);
    let (p, z) = if (p_f - 0.5).abs() >= (p_r - 0.5).abs() {
        (p_f, z_f)
    } else {
        (p_r, z_r)
    };
    Ok(TestResult::new(
        "cumulative_sums",
        z as f64,
        p,
        &[
            ("p_forward", p_f),
            ("p_reverse", p_r),
            ("z_forward", z_f as f64),
            ("z_reverse", z_r as f64),
        ],
    ))
}

/// Discrete Fourier transform (spectral) test: counts DFT moduli below the
/// 95% threshold over the first n/2 bins (DC included, the reference-software
/// convention) and compares against the expected 0.95 n/2.
pub fn spectral_test(bits: &[u8]) -> Result<TestResult> {
    require_len("spectral", bits, 10)?;
    let n = bits.len();
    let mut buf: Vec<Complex64> = bits
        .iter()
        .map(|&b| Complex64::new(if b != 0 { 1.0 } else { -1.0 }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let threshold = (n as f64 * (1.0f64 / 0.05).ln()).sqrt();
    let n0 = 0.95 * n as f64 / 2.0;
    let n1 = buf[..n / 2]
        .iter()
        .filter(|c| c.norm() < threshold)
        .count() as f64;
    let d = (n1 - n0) / (n as f64 * 0.95 * 0.05 / 4.0).sqrt();
    let p = erfc(d.abs() / std::f64::consts::SQRT_2);
    Ok(TestResult::new(
        "spectral",
        d,
        p,
        &[("threshold", threshold), ("below_threshold", n1)],
    ))
}

/// Overlapping m-bit pattern counts over the circularly extended sequence.
fn pattern_counts(bits: &[u8], m: usize) -> Vec<u64> {
    let n = bits.len();
    let mask = (1usize << m) - 1;
    let mut counts = vec![0u64; 1 << m];
    let mut v = 0usize;
    for i in 0..m - 1 {
        v = v << 1 | bits[i % n] as usize;
    }
    for i in 0..n {
        v = (v << 1 | bits[(i + m - 1) % n] as usize) & mask;
        counts[v] += 1;
    }
    counts
}

fn phi(bits: &[u8], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = bits.len() as f64;
    pattern_counts(bits, m)
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let f = c as f64 / n;
            f * f.ln()
        })
        .sum()
}

/// Approximate entropy test: ApEn(m) = phi(m) - phi(m+1),
/// chi^2 = 2n (ln 2 - ApEn), p = Q(2^{m-1}, chi^2/2).
pub fn approximate_entropy_test(bits: &[u8], m: usize) -> Result<TestResult> {
    if m == 0 || m > 16 {
        return Err(Error::Domain(format!(
            "approximate_entropy: pattern length {m} outside 1..=16"
        )));
    }
    require_len("approximate_entropy", bits, m + 2)?;
    let n = bits.len() as f64;
    let apen = phi(bits, m) - phi(bits, m + 1);
    let chi2 = (2.0 * n * (std::f64::consts::LN_2 - apen)).max(0.0);
    let p = gamma_q(2f64.powi(m as i32 - 1), chi2 / 2.0);
    Ok(TestResult::new(
        "approximate_entropy",
        chi2,
        p,
        &[("m", m as f64), ("apen", apen)],
    ))
}

fn psi_sq(bits: &[u8], m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = bits.len() as f64;
    let sum: f64 = pattern_counts(bits, m)
        .iter()
        .map(|&c| (c as f64) * (c as f64))
        .sum();
    2f64.powi(m as i32) / n * sum - n
}

/// Serial test: first-difference statistic del psi^2 with
/// p1 = Q(2^{m-2}, del/2) and second difference with p2 = Q(2^{m-3}, del2/2).
/// The reported p-value is p1; p2 appears in `parameters`.
pub fn serial_test(bits: &[u8], m: usize) -> Result<TestResult> {
    if m == 0 || m > 16 {
        return Err(Error::Domain(format!(
            "serial: pattern length {m} outside 1..=16"
        )));
    }
    require_len("serial", bits, 1 << m)?;
    let psi_m = psi_sq(bits, m);
    let psi_m1 = if m >= 1 { psi_sq(bits, m - 1) } else { 0.0 };
    let psi_m2 = if m >= 2 { psi_sq(bits, m - 2) } else { 0.0 };
    // non-negative analytically; clamp away floating-point cancellation
    let del1 = (psi_m - psi_m1).max(0.0);
    let del2 = (psi_m - 2.0 * psi_m1 + psi_m2).max(0.0);
    let p1 = gamma_q(2f64.powi(m as i32 - 2), del1 / 2.0);
    let p2 = gamma_q(2f64.powi(m as i32 - 3), del2 / 2.0);
    Ok(TestResult::new(
        "serial",
        del1,
        p1,
        &[("m", m as f64), ("p_value2", p2), ("del2", del2)],
    ))
}

/// Runs all eight tests with default parameters and aggregates verdicts.
/// Requires at least 10^4 bits; inputs below 10^6 bits are flagged as
/// reduced statistical power.
pub fn run_battery(bits: &[u8]) -> Result<BatteryReport> {
    if bits.len() < BATTERY_MIN_BITS {
        return Err(Error::TooShort {
            min: BATTERY_MIN_BITS,
            got: bits.len(),
        });
    }
    let results = vec![
        frequency_test(bits)?,
        block_frequency_test(bits, DEFAULT_BLOCK_SIZE)?,
        runs_test(bits)?,
        longest_run_test(bits)?,
        cumulative_sums_test(bits)?,
        spectral_test(bits)?,
        approximate_entropy_test(bits, DEFAULT_APEN_M)?,
        serial_test(bits, DEFAULT_SERIAL_M)?,
    ];
    let overall = results.iter().all(|r| r.verdict);
    Ok(BatteryReport {
        overall,
        input_length: bits.len(),
        reduced_power: bits.len() < BATTERY_FULL_POWER_BITS,
        results,
    })
}
