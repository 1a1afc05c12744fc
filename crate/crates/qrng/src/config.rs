//! Run configuration: flat `key = value` text with dotted section prefixes
//! (e.g. `modulator.S = 3`). Unknown keys are rejected; omitted keys keep
//! their defaults, which mirror the reference experimental operating point.

use crate::entropy::ExtractorParams;
use crate::error::{Error, Result};
use crate::optics::{DetectionConfig, ModulatorConfig};
use crate::signal::{AdcConfig, NoiseModel};
use std::fmt::Write as _;

/// Full pipeline configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub modulator: ModulatorConfig,
    pub detection: DetectionConfig,
    pub noise: NoiseModel,
    pub adc: AdcConfig,
    pub extractor: ExtractorParams,
    /// Simulation PRG seed.
    pub seed: u64,
    /// Samples per simulated trace.
    pub sample_count: usize,
}

impl Default for RunConfig {
    /// Reference operating point: 40 mW LO, eta_SB = 10^-0.28,
    /// eta_C = 10^-0.33, extinction 1e-4, sensitivities 0.87/0.88,
    /// 8-bit ADC with R = 0.2 V at 100 MS/s, k/l = 1024/512,
    /// epsilon = 2^-100, third-order sidebands.
    fn default() -> Self {
        let sigma_q2 = 1.0051e-3;
        RunConfig {
            modulator: ModulatorConfig {
                mu0: 1e6,
                sideband_order: 3,
                modulation_index: 1.0924661244937,
                theta: 0.0,
                omega: 4.2e9,
            },
            detection: DetectionConfig {
                eta_sb: 10f64.powf(-0.28),
                eta_c: 10f64.powf(-0.33),
                vartheta: 1e-4,
                s1: 0.87,
                s2: 0.88,
            },
            noise: NoiseModel {
                sigma_q2,
                sigma_e2: 5.49e-5,
                kappa: sigma_q2 / 40.0,
                delta_dc: 0.0,
            },
            adc: AdcConfig {
                n_bits: 8,
                r_half: 0.2,
                sample_rate: 1e8,
            },
            extractor: ExtractorParams {
                k: 1024,
                l: 512,
                epsilon: 2f64.powi(-100),
                n_bits: 8,
            },
            seed: 1,
            sample_count: 1_000_000,
        }
    }
}

impl RunConfig {
    /// Parses a config file body on top of the defaults.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn f64_of(key: &str, value: &str) -> Result<f64> {
            value
                .parse()
                .map_err(|e| Error::Parse(format!("{key}: {e}")))
        }
        fn int_of<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| Error::Parse(format!("{key}: {e}")))
        }
        match key {
            "modulator.mu0" => self.modulator.mu0 = f64_of(key, value)?,
            "modulator.S" => self.modulator.sideband_order = int_of(key, value)?,
            "modulator.m" => self.modulator.modulation_index = f64_of(key, value)?,
            "modulator.theta" => self.modulator.theta = f64_of(key, value)?,
            "modulator.omega" => self.modulator.omega = f64_of(key, value)?,
            "detection.eta_sb" => self.detection.eta_sb = f64_of(key, value)?,
            "detection.eta_c" => self.detection.eta_c = f64_of(key, value)?,
            "detection.vartheta" => self.detection.vartheta = f64_of(key, value)?,
            "detection.s1" => self.detection.s1 = f64_of(key, value)?,
            "detection.s2" => self.detection.s2 = f64_of(key, value)?,
            "noise.sigma_q2" => self.noise.sigma_q2 = f64_of(key, value)?,
            "noise.sigma_e2" => self.noise.sigma_e2 = f64_of(key, value)?,
            "noise.kappa" => self.noise.kappa = f64_of(key, value)?,
            "noise.delta_dc" => self.noise.delta_dc = f64_of(key, value)?,
            "adc.n_bits" => self.adc.n_bits = int_of(key, value)?,
            "adc.r_half" => self.adc.r_half = f64_of(key, value)?,
            "adc.sample_rate" => self.adc.sample_rate = f64_of(key, value)?,
            "extractor.k" => self.extractor.k = int_of(key, value)?,
            "extractor.l" => self.extractor.l = int_of(key, value)?,
            "extractor.epsilon" => self.extractor.epsilon = f64_of(key, value)?,
            "extractor.n_bits" => self.extractor.n_bits = int_of(key, value)?,
            "run.seed" => self.seed = int_of(key, value)?,
            "run.sample_count" => self.sample_count = int_of(key, value)?,
            other => return Err(Error::Parse(format!("unknown key {other}"))),
        }
        Ok(())
    }

    /// Serializes every field; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "modulator.mu0 = {}", self.modulator.mu0);
        let _ = writeln!(s, "modulator.S = {}", self.modulator.sideband_order);
        let _ = writeln!(s, "modulator.m = {}", self.modulator.modulation_index);
        let _ = writeln!(s, "modulator.theta = {}", self.modulator.theta);
        let _ = writeln!(s, "modulator.omega = {}", self.modulator.omega);
        let _ = writeln!(s, "detection.eta_sb = {}", self.detection.eta_sb);
        let _ = writeln!(s, "detection.eta_c = {}", self.detection.eta_c);
        let _ = writeln!(s, "detection.vartheta = {}", self.detection.vartheta);
        let _ = writeln!(s, "detection.s1 = {}", self.detection.s1);
        let _ = writeln!(s, "detection.s2 = {}", self.detection.s2);
        let _ = writeln!(s, "noise.sigma_q2 = {}", self.noise.sigma_q2);
        let _ = writeln!(s, "noise.sigma_e2 = {}", self.noise.sigma_e2);
        let _ = writeln!(s, "noise.kappa = {}", self.noise.kappa);
        let _ = writeln!(s, "noise.delta_dc = {}", self.noise.delta_dc);
        let _ = writeln!(s, "adc.n_bits = {}", self.adc.n_bits);
        let _ = writeln!(s, "adc.r_half = {}", self.adc.r_half);
        let _ = writeln!(s, "adc.sample_rate = {}", self.adc.sample_rate);
        let _ = writeln!(s, "extractor.k = {}", self.extractor.k);
        let _ = writeln!(s, "extractor.l = {}", self.extractor.l);
        let _ = writeln!(s, "extractor.epsilon = {}", self.extractor.epsilon);
        let _ = writeln!(s, "extractor.n_bits = {}", self.extractor.n_bits);
        let _ = writeln!(s, "run.seed = {}", self.seed);
        let _ = writeln!(s, "run.sample_count = {}", self.sample_count);
        s
    }

    /// Validates every section plus cross-module consistency.
    pub fn validate(&self) -> Result<()> {
        self.modulator.validate()?;
        self.detection.validate()?;
        self.noise.validate()?;
        self.adc.validate()?;
        self.extractor.validate()?;
        if self.extractor.n_bits != self.adc.n_bits {
            return Err(Error::InvalidConfig {
                field: "extractor.n_bits".into(),
                reason: format!(
                    "must equal adc.n_bits = {}, got {}",
                    self.adc.n_bits, self.extractor.n_bits
                ),
            });
        }
        if self.extractor.k % self.adc.n_bits as usize != 0 {
            return Err(Error::InvalidConfig {
                field: "extractor.k".into(),
                reason: format!(
                    "must be divisible by adc.n_bits = {}, got {}",
                    self.adc.n_bits, self.extractor.k
                ),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.extractor.k, 1024);
        assert!((cfg.noise.kappa * 40.0 - cfg.noise.sigma_q2).abs() < 1e-18);
    }

    #[test]
    fn round_trip_exact() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.serialize()).unwrap(), cfg);
    }

    #[test]
    fn parse_overrides_and_comments() {
        let cfg = RunConfig::parse(
            "# comment\n\nmodulator.S = 5\nrun.seed = 99\ndetection.s1 = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.modulator.sideband_order, 5);
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.detection.s1, 0.5);
        // untouched fields keep defaults
        assert_eq!(cfg.adc.n_bits, 8);
    }

    #[test]
    fn parse_errors() {
        assert!(RunConfig::parse("nonsense\n").is_err());
        assert!(RunConfig::parse("bogus.key = 1\n").is_err());
        assert!(RunConfig::parse("modulator.mu0 = notanumber\n").is_err());
    }

    #[test]
    fn cross_module_checks() {
        let mut cfg = RunConfig::default();
        cfg.extractor.n_bits = 10;
        assert!(matches!(
            cfg.validate(),
            Err(Error::InvalidConfig { field, .. }) if field == "extractor.n_bits"
        ));
        let mut cfg = RunConfig::default();
        cfg.adc.n_bits = 12;
        cfg.extractor.n_bits = 12;
        cfg.extractor.k = 1024; // not divisible by 12
        assert!(matches!(
            cfg.validate(),
            Err(Error::InvalidConfig { field, .. }) if field == "extractor.k"
        ));
    }

    #[test]
    fn invalid_modulation_index_names_field() {
        let mut cfg = RunConfig::default();
        cfg.modulator.modulation_index = 100.0;
        match cfg.validate() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "modulator.m"),
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn round_trip_random_floats(mu0 in 1e-3f64..1e9, eps_exp in -200i32..-1,
                                    r in 1e-3f64..10.0, seed in any::<u64>()) {
            let mut cfg = RunConfig::default();
            cfg.modulator.mu0 = mu0;
            cfg.extractor.epsilon = 2f64.powi(eps_exp);
            cfg.adc.r_half = r;
            cfg.seed = seed;
            prop_assert_eq!(RunConfig::parse(&cfg.serialize()).unwrap(), cfg);
        }
    }
}
