//! Worst-case conditional min-entropy of the digitized signal given
//! adversarial classical noise, the tolerable DC-offset band, and extractor
//! output sizing via the leftover hash lemma.

use crate::error::{Error, Result};
use crate::signal::AdcConfig;
use crate::special::{erf, erfinv};

/// Default classical-noise excursion multiplier (the 5 in e_max = 5 sigma_e + |Delta|).
pub const DEFAULT_E_BOUND_MULTIPLIER: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyInputs {
    /// Quantum noise standard deviation, V.
    pub sigma_q: f64,
    /// Classical noise standard deviation, V.
    pub sigma_e: f64,
    /// DC offset Delta, V.
    pub delta_dc: f64,
    pub adc: AdcConfig,
    /// Classical-noise excursion multiplier, default 5.
    pub e_bound_multiplier: f64,
}

impl EntropyInputs {
    pub fn new(sigma_q: f64, sigma_e: f64, delta_dc: f64, adc: AdcConfig) -> Self {
        EntropyInputs {
            sigma_q,
            sigma_e,
            delta_dc,
            adc,
            e_bound_multiplier: DEFAULT_E_BOUND_MULTIPLIER,
        }
    }

    /// Worst-case classical noise excursion e_max = multiplier * sigma_e + |Delta|.
    pub fn e_max(&self) -> f64 {
        self.e_bound_multiplier * self.sigma_e + self.delta_dc.abs()
    }
}

/// Which of the two bound candidates dominated the max.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DominantTerm {
    /// Rail term: classical noise pushing the signal into a saturated code.
    A,
    /// Bin term: probability mass of the most likely interior code.
    B,
}

impl std::fmt::Display for DominantTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DominantTerm::A => write!(f, "A"),
            DominantTerm::B => write!(f, "B"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyReport {
    /// Conditional min-entropy, bits per sample, clamped into [0, n_bits].
    pub h_min: f64,
    pub a_term: f64,
    pub b_term: f64,
    pub dominant: DominantTerm,
    /// |Delta| at which A overtakes B with the same sigma parameters.
    pub delta_tolerance: f64,
}

fn a_term(inputs: &EntropyInputs, delta_abs: f64) -> f64 {
    let e_max = inputs.e_bound_multiplier * inputs.sigma_e + delta_abs;
    let delta_bin = inputs.adc.bin_width();
    let arg = (e_max - inputs.adc.r_half + 1.5 * delta_bin)
        / (std::f64::consts::SQRT_2 * inputs.sigma_q);
    0.5 * (erf(arg) + 1.0)
}

fn b_term(inputs: &EntropyInputs) -> f64 {
    let delta_bin = inputs.adc.bin_width();
    erf(delta_bin / (2.0 * std::f64::consts::SQRT_2 * inputs.sigma_q))
}

/// Conditional min-entropy of the digitized sample given the classical
/// noise: h_min = -log2(max(A, B)), clamped into [0, n_bits].
pub fn min_entropy(inputs: &EntropyInputs) -> Result<EntropyReport> {
    if !(inputs.sigma_q > 0.0) {
        return Err(Error::Domain(format!(
            "min_entropy: sigma_q must be > 0, got {}",
            inputs.sigma_q
        )));
    }
    inputs.adc.validate()?;
    let a = a_term(inputs, inputs.delta_dc.abs());
    let b = b_term(inputs);
    let (max, dominant) = if a > b {
        (a, DominantTerm::A)
    } else {
        (b, DominantTerm::B)
    };
    // the bound can exceed n for tiny bins; a sample of n bits cannot carry
    // more than n bits of min-entropy
    let h_min = (-max.log2()).clamp(0.0, inputs.adc.n_bits as f64);
    Ok(EntropyReport {
        h_min,
        a_term: a,
        b_term: b,
        dominant,
        delta_tolerance: delta_tolerance(inputs)?,
    })
}

/// The |Delta| at which the rail term A grows to meet the bin term B.
///
/// A is strictly increasing in |Delta|, so bisection brackets the crossing;
/// returns 0 when A already dominates at Delta = 0.
pub fn delta_tolerance(inputs: &EntropyInputs) -> Result<f64> {
    if !(inputs.sigma_q > 0.0) {
        return Err(Error::Domain(format!(
            "delta_tolerance: sigma_q must be > 0, got {}",
            inputs.sigma_q
        )));
    }
    inputs.adc.validate()?;
    let b = b_term(inputs);
    if a_term(inputs, 0.0) >= b {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    // A -> 1 > B once the excursion clears the rail by a few sigma_q
    let mut hi = inputs.adc.r_half + 10.0 * inputs.sigma_q + inputs.e_bound_multiplier * inputs.sigma_e;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if a_term(inputs, mid) < b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Closed form of [`delta_tolerance`] for sigma_e = 0, where e_max = |Delta|:
/// solving A(|Delta|) = B gives
/// |Delta|_max = R - 3 delta/2 + sqrt(2) sigma_q erfinv(2B - 1)
/// (the erfinv term is negative since B < 1/2).
pub fn delta_tolerance_closed_form(sigma_q: f64, adc: &AdcConfig) -> f64 {
    let delta_bin = adc.bin_width();
    let b = erf(delta_bin / (2.0 * std::f64::consts::SQRT_2 * sigma_q));
    adc.r_half - 1.5 * delta_bin + std::f64::consts::SQRT_2 * sigma_q * erfinv(2.0 * b - 1.0)
}

/// Toeplitz extractor block geometry certified by the leftover hash lemma.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractorParams {
    /// Input block, bits.
    pub k: usize,
    /// Output block, bits.
    pub l: usize,
    /// Security parameter.
    pub epsilon: f64,
    /// Sample resolution feeding the raw blocks.
    pub n_bits: u32,
}

impl ExtractorParams {
    /// Leftover-hash-lemma slack k h/n - l - 2 log2(1/eps); must be > 0.
    pub fn lemma_slack(&self, h_min: f64) -> f64 {
        self.k as f64 * h_min / self.n_bits as f64
            - self.l as f64
            - 2.0 * (1.0 / self.epsilon).log2()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k % 8 != 0 {
            return Err(Error::InvalidConfig {
                field: "extractor.k".into(),
                reason: format!("must be a positive multiple of 8, got {}", self.k),
            });
        }
        if self.l == 0 || self.l % 8 != 0 {
            return Err(Error::InvalidConfig {
                field: "extractor.l".into(),
                reason: format!("must be a positive multiple of 8, got {}", self.l),
            });
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig {
                field: "extractor.epsilon".into(),
                reason: format!("must be in (0, 1), got {}", self.epsilon),
            });
        }
        Ok(())
    }
}

/// Largest byte-multiple output length l strictly satisfying
/// l < k h_min / n - 2 log2(1/eps).
pub fn size_extractor(
    h_min: f64,
    n_bits: u32,
    k: usize,
    epsilon: f64,
) -> Result<ExtractorParams> {
    if !(h_min > 0.0) || h_min > n_bits as f64 {
        return Err(Error::Domain(format!(
            "size_extractor: h_min must be in (0, n_bits], got {h_min}"
        )));
    }
    if k == 0 || k % 8 != 0 {
        return Err(Error::Domain(format!(
            "size_extractor: k must be a positive multiple of 8, got {k}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!(
            "size_extractor: epsilon must be in (0, 1), got {epsilon}"
        )));
    }
    let bound = k as f64 * h_min / n_bits as f64 - 2.0 * (1.0 / epsilon).log2();
    if bound <= 0.0 {
        return Err(Error::InsufficientEntropy { bound });
    }
    // strict inequality: back off a byte when the bound is itself a byte multiple
    let mut l = (bound / 8.0).floor() as usize * 8;
    if l as f64 >= bound {
        l -= 8;
    }
    if l == 0 {
        return Err(Error::InsufficientEntropy { bound });
    }
    Ok(ExtractorParams {
        k,
        l,
        epsilon,
        n_bits,
    })
}

impl EntropyReport {
    /// Key: value lines consumed by the CLI report writer.
    pub fn to_text(&self) -> String {
        format!(
            "h_min_bits_per_sample: {:.9}\na_term: {:.6e}\nb_term: {:.6e}\ndominant: {}\ndelta_tolerance_v: {:.9}\n",
            self.h_min, self.a_term, self.b_term, self.dominant, self.delta_tolerance
        )
    }
}
