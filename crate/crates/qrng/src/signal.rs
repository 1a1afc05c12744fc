//! Measured-voltage process: Gaussian quantum + classical noise with a DC
//! offset, ADC digitization, and noise-statistics estimation from traces.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Noise-variance model of the measured voltage, V^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Quantum noise variance sigma_q^2.
    pub sigma_q2: f64,
    /// Classical noise variance sigma_e^2.
    pub sigma_e2: f64,
    /// Quantum-variance-per-LO-power coefficient, V^2/mW.
    pub kappa: f64,
    /// DC offset Delta, V.
    pub delta_dc: f64,
}

impl NoiseModel {
    /// Quantum variance from LO power through the linear law
    /// sigma_q^2 = kappa * P_LO.
    pub fn from_lo_power(kappa: f64, lo_power_mw: f64, sigma_e2: f64, delta_dc: f64) -> Self {
        NoiseModel {
            sigma_q2: kappa * lo_power_mw,
            sigma_e2,
            kappa,
            delta_dc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_q2", self.sigma_q2),
            ("sigma_e2", self.sigma_e2),
            ("kappa", self.kappa),
        ] {
            if !(v >= 0.0) {
                return Err(Error::InvalidConfig {
                    field: format!("noise.{name}"),
                    reason: format!("must be >= 0, got {v}"),
                });
            }
        }
        Ok(())
    }

    /// Total measured variance sigma_m^2 = sigma_e^2 + sigma_q^2.
    pub fn sigma_m2(&self) -> f64 {
        self.sigma_q2 + self.sigma_e2
    }
}

/// ADC digitizer parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcConfig {
    /// Resolution in bits, 1..=16.
    pub n_bits: u32,
    /// One half of the input voltage range R, V.
    pub r_half: f64,
    /// Samples per second.
    pub sample_rate: f64,
}

impl AdcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=16).contains(&self.n_bits) {
            return Err(Error::InvalidConfig {
                field: "adc.n_bits".into(),
                reason: format!("must be in [1, 16], got {}", self.n_bits),
            });
        }
        if !(self.r_half > 0.0) {
            return Err(Error::InvalidConfig {
                field: "adc.r_half".into(),
                reason: format!("must be > 0, got {}", self.r_half),
            });
        }
        Ok(())
    }

    /// Bin width delta = R / 2^(n-1).
    pub fn bin_width(&self) -> f64 {
        self.r_half / (1u64 << (self.n_bits - 1)) as f64
    }

    pub fn max_code(&self) -> u16 {
        (((1u32 << self.n_bits) - 1) & 0xffff) as u16
    }
}

/// A simulated voltage trace with its generating seed.
#[derive(Debug, Clone)]
pub struct VoltageTrace {
    pub samples: Vec<f64>,
    pub seed: u64,
}

/// A digitized trace of ADC codes.
#[derive(Debug, Clone)]
pub struct CodeTrace {
    pub codes: Vec<u16>,
    pub adc: AdcConfig,
    pub seed: u64,
}

/// Samples saturated at each rail during quantization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClipReport {
    pub clipped_low: u64,
    pub clipped_high: u64,
}

impl ClipReport {
    pub fn total(&self) -> u64 {
        self.clipped_low + self.clipped_high
    }
}

/// Draws `count` voltages from Normal(delta_dc, sigma_q^2 + sigma_e^2).
///
/// Deterministic for a fixed seed; independent traces should use distinct
/// seeds.
pub fn simulate_trace(noise: &NoiseModel, count: usize, seed: u64) -> Result<VoltageTrace> {
    noise.validate()?;
    if count == 0 {
        return Err(Error::Domain("simulate_trace: count must be >= 1".into()));
    }
    let sigma = noise.sigma_m2().sqrt();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let samples = if sigma == 0.0 {
        vec![noise.delta_dc; count]
    } else {
        let dist = Normal::new(noise.delta_dc, sigma).expect("sigma is finite and positive");
        (0..count).map(|_| dist.sample(&mut rng)).collect()
    };
    Ok(VoltageTrace { samples, seed })
}

/// Mid-rise floor quantizer: code = floor((V + R)/delta), clamped to
/// [0, 2^n - 1]. Clipping is reported, not fatal.
pub fn quantize(trace: &VoltageTrace, adc: &AdcConfig) -> Result<(CodeTrace, ClipReport)> {
    adc.validate()?;
    let delta = adc.bin_width();
    let max_code = adc.max_code();
    let mut clip = ClipReport::default();
    let codes = trace
        .samples
        .iter()
        .map(|&v| {
            let raw = ((v + adc.r_half) / delta).floor();
            if raw < 0.0 {
                clip.clipped_low += 1;
                0
            } else if raw > max_code as f64 {
                clip.clipped_high += 1;
                max_code
            } else {
                raw as u16
            }
        })
        .collect();
    Ok((
        CodeTrace {
            codes,
            adc: *adc,
            seed: trace.seed,
        },
        clip,
    ))
}

/// Midpoint voltage of a code's bin, the quantizer pseudo-inverse.
pub fn code_midpoint(code: u16, adc: &AdcConfig) -> f64 {
    let delta = adc.bin_width();
    (code as f64 + 0.5) * delta - adc.r_half
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Minimum trace length accepted by [`calibrate_noise`].
pub const CALIBRATION_MIN_SAMPLES: usize = 1000;

/// Recovers the noise model from an LO-on and an LO-off trace:
/// sigma_e^2 = var(lo_off), sigma_q^2 = var(lo_on) - sigma_e^2,
/// Delta = mean(lo_on).
pub fn calibrate_noise(lo_on: &VoltageTrace, lo_off: &VoltageTrace) -> Result<NoiseModel> {
    for (name, t) in [("lo_on", lo_on), ("lo_off", lo_off)] {
        if t.samples.len() < CALIBRATION_MIN_SAMPLES {
            return Err(Error::Domain(format!(
                "calibrate_noise: {name} trace has {} samples, need >= {CALIBRATION_MIN_SAMPLES}",
                t.samples.len()
            )));
        }
    }
    let var_off = variance(&lo_off.samples);
    let var_on = variance(&lo_on.samples);
    if var_on < var_off {
        return Err(Error::InconsistentCalibration { var_on, var_off });
    }
    Ok(NoiseModel {
        sigma_q2: var_on - var_off,
        sigma_e2: var_off,
        kappa: 0.0,
        delta_dc: mean(&lo_on.samples),
    })
}

/// Quantum-to-classical noise ratio, 10 log10(sigma_q^2 / sigma_e^2), dB.
pub fn qcnr(noise: &NoiseModel) -> Result<f64> {
    if !(noise.sigma_e2 > 0.0) || !(noise.sigma_q2 > 0.0) {
        return Err(Error::Domain(format!(
            "qcnr: variances must be > 0, got sigma_q2 = {}, sigma_e2 = {}",
            noise.sigma_q2, noise.sigma_e2
        )));
    }
    Ok(10.0 * (noise.sigma_q2 / noise.sigma_e2).log10())
}

/// Total variance as a function of LO power: sigma_m^2(P) = kappa P + sigma_e^2.
pub fn variance_vs_power(kappa: f64, sigma_e2: f64, powers_mw: &[f64]) -> Vec<(f64, f64)> {
    powers_mw
        .iter()
        .map(|&p| (p, kappa * p + sigma_e2))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    // paper operating point at 40 mW LO
    pub const SIGMA_Q2: f64 = 1.0051e-3;
    pub const SIGMA_E2: f64 = 5.49e-5;
    pub const KAPPA: f64 = SIGMA_Q2 / 40.0;

    fn adc8() -> AdcConfig {
        AdcConfig {
            n_bits: 8,
            r_half: 0.2,
            sample_rate: 100e6,
        }
    }

    #[test]
    fn zero_variance_trace_is_constant() {
        let noise = NoiseModel {
            sigma_q2: 0.0,
            sigma_e2: 0.0,
            kappa: 0.0,
            delta_dc: 0.1,
        };
        let t = simulate_trace(&noise, 5, 7).unwrap();
        assert_eq!(t.samples, vec![0.1; 5]);
    }

    #[test]
    fn trace_variance_matches_model() {
        let noise = NoiseModel {
            sigma_q2: SIGMA_Q2,
            sigma_e2: SIGMA_E2,
            kappa: KAPPA,
            delta_dc: 0.0,
        };
        let t = simulate_trace(&noise, 1_000_000, 42).unwrap();
        let v = variance(&t.samples);
        let want = 1.06e-3;
        assert!((v - want).abs() < 0.01 * want, "var = {v}");
    }

    #[test]
    fn lo_off_trace_variance() {
        let noise = NoiseModel {
            sigma_q2: 0.0,
            sigma_e2: SIGMA_E2,
            kappa: 0.0,
            delta_dc: 0.0,
        };
        let t = simulate_trace(&noise, 1_000_000, 43).unwrap();
        let v = variance(&t.samples);
        assert!((v - SIGMA_E2).abs() < 0.01 * SIGMA_E2, "var = {v}");
    }

    #[test]
    fn traces_are_deterministic_under_seed() {
        let noise = NoiseModel {
            sigma_q2: SIGMA_Q2,
            sigma_e2: SIGMA_E2,
            kappa: KAPPA,
            delta_dc: 0.01,
        };
        let a = simulate_trace(&noise, 1000, 5).unwrap();
        let b = simulate_trace(&noise, 1000, 5).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = simulate_trace(&noise, 1000, 6).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn quantizer_rails_and_midpoint() {
        let adc = adc8();
        let t = VoltageTrace {
            samples: vec![-0.2, 0.0, 1.2],
            seed: 0,
        };
        let (codes, clip) = quantize(&t, &adc).unwrap();
        assert_eq!(codes.codes, vec![0, 128, 255]);
        assert_eq!(clip.clipped_high, 1);
        assert_eq!(clip.clipped_low, 0);
    }

    #[test]
    fn quantizer_monotone_and_inverse_error_bounded() {
        let adc = adc8();
        let delta = adc.bin_width();
        let mut last = 0u16;
        let mut v = -0.2;
        while v < 0.2 {
            let t = VoltageTrace {
                samples: vec![v],
                seed: 0,
            };
            let (ct, clip) = quantize(&t, &adc).unwrap();
            assert!(ct.codes[0] >= last);
            last = ct.codes[0];
            if clip.total() == 0 {
                let back = code_midpoint(ct.codes[0], &adc);
                assert!((back - v).abs() <= delta / 2.0 + 1e-12);
            }
            v += 1.7e-4;
        }
    }

    #[test]
    fn calibration_recovers_paper_variances() {
        let lo_on = simulate_trace(
            &NoiseModel {
                sigma_q2: SIGMA_Q2,
                sigma_e2: SIGMA_E2,
                kappa: KAPPA,
                delta_dc: 0.0,
            },
            1_000_000,
            11,
        )
        .unwrap();
        let lo_off = simulate_trace(
            &NoiseModel {
                sigma_q2: 0.0,
                sigma_e2: SIGMA_E2,
                kappa: 0.0,
                delta_dc: 0.0,
            },
            1_000_000,
            12,
        )
        .unwrap();
        let est = calibrate_noise(&lo_on, &lo_off).unwrap();
        assert!((est.sigma_q2 - SIGMA_Q2).abs() < 0.03 * SIGMA_Q2);
        assert!((est.sigma_e2 - SIGMA_E2).abs() < 0.03 * SIGMA_E2);
    }

    #[test]
    fn calibration_identical_traces_gives_zero_quantum() {
        let t = simulate_trace(
            &NoiseModel {
                sigma_q2: 0.0,
                sigma_e2: SIGMA_E2,
                kappa: 0.0,
                delta_dc: 0.02,
            },
            2000,
            1,
        )
        .unwrap();
        let est = calibrate_noise(&t, &t).unwrap();
        assert_eq!(est.sigma_q2, 0.0);
        assert!((est.delta_dc - mean(&t.samples)).abs() < 1e-15);
    }

    #[test]
    fn calibration_rejects_swapped_traces() {
        let lo_on = simulate_trace(
            &NoiseModel {
                sigma_q2: SIGMA_Q2,
                sigma_e2: SIGMA_E2,
                kappa: KAPPA,
                delta_dc: 0.0,
            },
            10_000,
            3,
        )
        .unwrap();
        let lo_off = simulate_trace(
            &NoiseModel {
                sigma_q2: 0.0,
                sigma_e2: SIGMA_E2,
                kappa: 0.0,
                delta_dc: 0.0,
            },
            10_000,
            4,
        )
        .unwrap();
        assert!(matches!(
            calibrate_noise(&lo_off, &lo_on),
            Err(Error::InconsistentCalibration { .. })
        ));
    }

    #[test]
    fn qcnr_values() {
        let eq = NoiseModel {
            sigma_q2: 1.0,
            sigma_e2: 1.0,
            kappa: 0.0,
            delta_dc: 0.0,
        };
        assert_eq!(qcnr(&eq).unwrap(), 0.0);
        let ten = NoiseModel {
            sigma_q2: 10.0,
            sigma_e2: 1.0,
            kappa: 0.0,
            delta_dc: 0.0,
        };
        assert!((qcnr(&ten).unwrap() - 10.0).abs() < 1e-12);
        let paper = NoiseModel {
            sigma_q2: SIGMA_Q2,
            sigma_e2: SIGMA_E2,
            kappa: KAPPA,
            delta_dc: 0.0,
        };
        assert!((qcnr(&paper).unwrap() - 12.63).abs() < 0.005);
        let zero = NoiseModel {
            sigma_q2: 0.0,
            sigma_e2: 1.0,
            kappa: 0.0,
            delta_dc: 0.0,
        };
        assert!(qcnr(&zero).is_err());
    }

    #[test]
    fn variance_vs_power_is_linear() {
        let pts = variance_vs_power(KAPPA, SIGMA_E2, &[0.0, 10.0, 20.0, 40.0]);
        assert_eq!(pts[0].1, SIGMA_E2);
        assert!((pts[3].1 - 1.06e-3).abs() < 1e-6);
        // exact linearity: second differences vanish
        let d1 = pts[2].1 - pts[1].1;
        let d2 = pts[3].1 - pts[2].1;
        assert!(((pts[3].0 - pts[2].0) * d1 - (pts[2].0 - pts[1].0) * d2).abs() < 1e-18);
    }
}
