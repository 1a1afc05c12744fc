//! Multi-mode coherent-state optics: sideband amplitudes produced by phase
//! modulation, photon numbers at the two detector arms, and the modulation
//! index that balances them.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Phase-modulator drive parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulatorConfig {
    /// Mean photon number of the carrier per measurement window.
    pub mu0: f64,
    /// Sideband order limit; modes run over k in [-S, S].
    pub sideband_order: u32,
    /// Modulation index.
    pub modulation_index: f64,
    /// Constant phase, radians.
    pub theta: f64,
    /// Modulation frequency, Hz (metadata only).
    pub omega: f64,
}

impl ModulatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu0 > 0.0) {
            return Err(Error::InvalidConfig {
                field: "modulator.mu0".into(),
                reason: format!("must be > 0, got {}", self.mu0),
            });
        }
        if self.sideband_order < 1 {
            return Err(Error::InvalidConfig {
                field: "modulator.S".into(),
                reason: "must be >= 1".into(),
            });
        }
        if !(self.modulation_index >= 0.0) {
            return Err(Error::InvalidConfig {
                field: "modulator.m".into(),
                reason: format!("must be >= 0, got {}", self.modulation_index),
            });
        }
        let m_max = 2.0 * (self.sideband_order as f64 + 0.5);
        if self.modulation_index > m_max {
            return Err(Error::InvalidConfig {
                field: "modulator.m".into(),
                reason: format!(
                    "must be <= 2(S + 0.5) = {m_max} for a real rotation angle, got {}",
                    self.modulation_index
                ),
            });
        }
        Ok(())
    }
}

/// Detection-path transmittances, carrier extinction, and per-arm
/// photodiode sensitivities.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionConfig {
    /// Sideband-path transmittance, (0, 1].
    pub eta_sb: f64,
    /// Carrier-path transmittance, (0, 1].
    pub eta_c: f64,
    /// Carrier extinction factor of the spectral filter, [0, 1).
    pub vartheta: f64,
    /// Sensitivity of the sideband-arm photodiode.
    pub s1: f64,
    /// Sensitivity of the carrier-arm photodiode.
    pub s2: f64,
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, ok: bool, reason: String| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig {
                    field: format!("detection.{name}"),
                    reason,
                })
            }
        };
        check(
            "eta_sb",
            self.eta_sb > 0.0 && self.eta_sb <= 1.0,
            format!("must be in (0, 1], got {}", self.eta_sb),
        )?;
        check(
            "eta_c",
            self.eta_c > 0.0 && self.eta_c <= 1.0,
            format!("must be in (0, 1], got {}", self.eta_c),
        )?;
        check(
            "vartheta",
            self.vartheta >= 0.0 && self.vartheta < 1.0,
            format!("must be in [0, 1), got {}", self.vartheta),
        )?;
        check("s1", self.s1 > 0.0, format!("must be > 0, got {}", self.s1))?;
        check("s2", self.s2 > 0.0, format!("must be > 0, got {}", self.s2))?;
        Ok(())
    }

    /// Effective single sensitivity used by the quadrature normalization.
    pub fn effective_sensitivity(&self) -> f64 {
        0.5 * (self.s1 + self.s2)
    }
}

/// Coherent amplitude per mode index k in [-S, S].
#[derive(Debug, Clone)]
pub struct SidebandState {
    pub sideband_order: u32,
    /// amplitudes[i] is the mode k = i - S.
    pub amplitudes: Vec<Complex64>,
}

impl SidebandState {
    pub fn amplitude(&self, k: i32) -> Complex64 {
        let s = self.sideband_order as i32;
        assert!(k.abs() <= s, "mode index out of range");
        self.amplitudes[(k + s) as usize]
    }

    /// Total mean photon number over all modes.
    pub fn total_photon_number(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Mean photon numbers reaching the two detector arms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmPhotonNumbers {
    /// Sideband arm.
    pub n1: f64,
    /// Carrier arm.
    pub n2: f64,
}

/// Wigner d-function element d^S_{0k}(beta), Varshalovich convention.
///
/// Evaluated as a normalized associated Legendre function through the stable
/// three-term recurrence in the degree, seeded at the diagonal term.
pub fn wigner_d(order: u32, k: i32, beta: f64) -> Result<f64> {
    let s = order as i32;
    if k.abs() > s {
        return Err(Error::Domain(format!(
            "wigner_d: |k| = {} exceeds order S = {s}",
            k.abs()
        )));
    }
    if !(0.0..=std::f64::consts::PI).contains(&beta) {
        return Err(Error::Domain(format!(
            "wigner_d: beta = {beta} outside [0, pi]"
        )));
    }
    let ka = k.unsigned_abs();
    let x = beta.cos();
    let sb = beta.sin();

    // q_{k,k} = sqrt((2k-1)!!/(2k)!!) sin^k(beta)
    let mut q = 1.0;
    for i in 1..=ka {
        q *= ((2.0 * i as f64 - 1.0) / (2.0 * i as f64)).sqrt() * sb;
    }
    // sqrt((l+1)^2 - k^2) q_{l+1,k} = (2l+1) x q_{l,k} - sqrt(l^2 - k^2) q_{l-1,k}
    let mut prev = 0.0;
    let mut cur = q;
    for l in ka..order {
        let lf = l as f64;
        let kf = ka as f64;
        let next = ((2.0 * lf + 1.0) * x * cur - (lf * lf - kf * kf).sqrt() * prev)
            / (((lf + 1.0) * (lf + 1.0) - kf * kf).sqrt());
        prev = cur;
        cur = next;
    }
    // d^S_{0,-k}(beta) = (-1)^k d^S_{0,k}(beta)
    if k < 0 && ka % 2 == 1 {
        cur = -cur;
    }
    Ok(cur)
}

/// Rotation angle from the modulation index: cos(beta) = 1 - (m/(S+0.5))^2 / 2.
pub fn beta_from_index(modulation_index: f64, order: u32) -> Result<f64> {
    let half = order as f64 + 0.5;
    if !(0.0..=2.0 * half).contains(&modulation_index) {
        return Err(Error::Domain(format!(
            "beta_from_index: m = {modulation_index} outside [0, {}]",
            2.0 * half
        )));
    }
    let c = 1.0 - 0.5 * (modulation_index / half).powi(2);
    Ok(c.clamp(-1.0, 1.0).acos())
}

/// Inverse of [`beta_from_index`].
pub fn index_from_beta(beta: f64, order: u32) -> f64 {
    let half = order as f64 + 0.5;
    half * (2.0 * (1.0 - beta.cos())).sqrt()
}

/// Coherent amplitudes alpha_k = sqrt(mu0) d^S_{0k}(beta) e^{-ik theta}.
pub fn sideband_state(cfg: &ModulatorConfig) -> Result<SidebandState> {
    cfg.validate()?;
    let beta = beta_from_index(cfg.modulation_index, cfg.sideband_order)?;
    let s = cfg.sideband_order as i32;
    let root_mu = cfg.mu0.sqrt();
    let mut amplitudes = Vec::with_capacity((2 * s + 1) as usize);
    for k in -s..=s {
        let d = wigner_d(cfg.sideband_order, k, beta)?;
        let phase = Complex64::from_polar(1.0, -(k as f64) * cfg.theta);
        amplitudes.push(root_mu * d * phase);
    }
    Ok(SidebandState {
        sideband_order: cfg.sideband_order,
        amplitudes,
    })
}

/// Mean photon numbers at the two arms:
/// n1 = mu0 eta_SB (1 - (1 - vartheta) |d00|^2), n2 = mu0 eta_C (1 - vartheta) |d00|^2.
pub fn arm_photon_numbers(cfg: &ModulatorConfig, det: &DetectionConfig) -> Result<ArmPhotonNumbers> {
    cfg.validate()?;
    det.validate()?;
    let beta = beta_from_index(cfg.modulation_index, cfg.sideband_order)?;
    Ok(arm_photon_numbers_at_beta(
        cfg.mu0,
        cfg.sideband_order,
        beta,
        det,
    ))
}

fn arm_photon_numbers_at_beta(
    mu0: f64,
    order: u32,
    beta: f64,
    det: &DetectionConfig,
) -> ArmPhotonNumbers {
    let d00 = wigner_d(order, 0, beta).expect("k = 0 is always in range");
    let carrier_weight = (1.0 - det.vartheta) * d00 * d00;
    ArmPhotonNumbers {
        n1: mu0 * det.eta_sb * (1.0 - carrier_weight),
        n2: mu0 * det.eta_c * carrier_weight,
    }
}

/// First zero of d^S_{00}(beta) on (0, pi], bisected to machine precision.
pub fn first_d00_zero(order: u32) -> f64 {
    let d00 = |b: f64| wigner_d(order, 0, b).unwrap();
    let step = 1e-3;
    let mut lo = 0.0;
    let mut hi = std::f64::consts::PI;
    let mut b = step;
    while b <= std::f64::consts::PI {
        if d00(b) <= 0.0 {
            lo = b - step;
            hi = b;
            break;
        }
        b += step;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if d00(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest modulation index m* >= 0 at which the photocurrents balance,
/// s1 n1 = s2 n2.
///
/// |d00|^2 is monotone decreasing on [0, first zero of d00], so bisection
/// there finds the minimal-drive operating point.
pub fn balance_solve(det: &DetectionConfig, order: u32, mu0: f64) -> Result<f64> {
    det.validate()?;
    if !(mu0 > 0.0) {
        return Err(Error::Domain(format!(
            "balance_solve: mu0 must be > 0, got {mu0}"
        )));
    }
    // target |d00|^2 at balance
    let target =
        det.s1 * det.eta_sb / ((1.0 - det.vartheta) * (det.s1 * det.eta_sb + det.s2 * det.eta_c));
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::NoBalanceSolution { target });
    }
    let d00 = |b: f64| wigner_d(order, 0, b).unwrap();
    let mut lo = 0.0;
    let mut hi = first_d00_zero(order);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if d00(mid).powi(2) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta_star = 0.5 * (lo + hi);
    Ok(index_from_beta(beta_star, order))
}

/// Normalized quadrature mean x0 = (n1 - n2) s / (2 sqrt(mu0)).
pub fn quadrature_mean(arms: &ArmPhotonNumbers, sensitivity: f64, mu0: f64) -> Result<f64> {
    if !(mu0 > 0.0) {
        return Err(Error::Domain(format!(
            "quadrature_mean: mu0 must be > 0, got {mu0}"
        )));
    }
    Ok((arms.n1 - arms.n2) * sensitivity / (2.0 * mu0.sqrt()))
}

/// Mean offset with per-arm sensitivities: the single-s quadrature form
/// applied to the photocurrents, (s1 n1 - s2 n2) / (2 sqrt(mu0)). Zero
/// exactly at the generalized balance point s1 n1 = s2 n2.
pub fn imbalance_offset(arms: &ArmPhotonNumbers, det: &DetectionConfig, mu0: f64) -> Result<f64> {
    let weighted = ArmPhotonNumbers {
        n1: det.s1 * arms.n1,
        n2: det.s2 * arms.n2,
    };
    quadrature_mean(&weighted, 1.0, mu0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_detection() -> DetectionConfig {
        DetectionConfig {
            eta_sb: 10f64.powf(-0.28),
            eta_c: 10f64.powf(-0.33),
            vartheta: 1e-4,
            s1: 0.87,
            s2: 0.88,
        }
    }

    #[test]
    fn wigner_d_zero_rotation_is_kronecker() {
        for k in -3..=3 {
            let want = if k == 0 { 1.0 } else { 0.0 };
            assert!((wigner_d(3, k, 0.0).unwrap() - want).abs() < 1e-15);
        }
    }

    #[test]
    fn wigner_d00_is_legendre() {
        // P_2(0) = -1/2
        let v = wigner_d(2, 0, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((v + 0.5).abs() < 1e-14);
        // independent Legendre recurrence over a beta grid
        for order in 1..=20u32 {
            let mut beta = 0.0;
            while beta <= std::f64::consts::PI {
                let x: f64 = beta.cos();
                let mut p_prev = 1.0;
                let mut p = x;
                for l in 1..order {
                    let lf = l as f64;
                    let next = ((2.0 * lf + 1.0) * x * p - lf * p_prev) / (lf + 1.0);
                    p_prev = p;
                    p = next;
                }
                let p_order = if order == 0 { 1.0 } else { p };
                let d = wigner_d(order, 0, beta).unwrap();
                assert!(
                    (d - p_order).abs() < 1e-12,
                    "S={order} beta={beta}: d={d} P={p_order}"
                );
                beta += 0.01;
            }
        }
    }

    #[test]
    fn wigner_d_row_normalization() {
        for order in 1..=20u32 {
            let mut beta = 0.0;
            while beta <= std::f64::consts::PI {
                let sum: f64 = (-(order as i32)..=order as i32)
                    .map(|k| wigner_d(order, k, beta).unwrap().powi(2))
                    .sum();
                assert!((sum - 1.0).abs() < 1e-12, "S={order} beta={beta} sum={sum}");
                beta += 0.01;
            }
        }
    }

    #[test]
    fn wigner_d_opposite_sidebands_equal_magnitude() {
        for k in 1..=4 {
            let a = wigner_d(4, k, 1.234).unwrap();
            let b = wigner_d(4, -k, 1.234).unwrap();
            assert!((a.abs() - b.abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn wigner_d_rejects_out_of_range_mode() {
        assert!(wigner_d(2, 3, 0.5).is_err());
    }

    #[test]
    fn spin_one_half_power_split_at_quarter_turn() {
        // d_00 = P_1(0) = 0 at beta = pi/2, so the two sidebands carry
        // half the power each
        let b = std::f64::consts::FRAC_PI_2;
        assert!(wigner_d(1, 0, b).unwrap().abs() < 1e-15);
        assert!((wigner_d(1, 1, b).unwrap().powi(2) - 0.5).abs() < 1e-15);
        assert!((wigner_d(1, -1, b).unwrap().powi(2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn beta_from_index_examples() {
        assert_eq!(beta_from_index(0.0, 3).unwrap(), 0.0);
        // (3.5/3.5)^2 = 1 -> cos(beta) = 1/2
        let b = beta_from_index(3.5, 3).unwrap();
        assert!((b - std::f64::consts::FRAC_PI_3).abs() < 1e-14);
        // m = 1.5 sqrt(2 - sqrt(2)) inverts to beta = pi/4
        let m = 1.5 * (2.0 - std::f64::consts::SQRT_2).sqrt();
        assert!((m - 1.1480).abs() < 1e-3);
        let b = beta_from_index(m, 1).unwrap();
        assert!((b - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn beta_from_index_monotone_and_bounded() {
        let order = 3;
        let m_max = 2.0 * (order as f64 + 0.5);
        let mut last = -1.0;
        let mut m = 0.0;
        while m <= m_max {
            let b = beta_from_index(m, order).unwrap();
            assert!(b > last);
            last = b;
            m += 0.01;
        }
        assert!(beta_from_index(m_max + 1e-9, order).is_err());
        assert!(beta_from_index(-0.1, order).is_err());
    }

    #[test]
    fn sideband_state_identity_modulation() {
        let cfg = ModulatorConfig {
            mu0: 1.0,
            sideband_order: 1,
            modulation_index: 0.0,
            theta: 0.0,
            omega: 4.2e9,
        };
        let st = sideband_state(&cfg).unwrap();
        assert!((st.amplitude(0).re - 1.0).abs() < 1e-15);
        assert!(st.amplitude(1).norm() < 1e-15);
        assert!(st.amplitude(-1).norm() < 1e-15);
    }

    #[test]
    fn sideband_state_quarter_turn_splits_power() {
        // mu0 = 4, S = 1, m chosen so beta = pi/2
        let m = index_from_beta(std::f64::consts::FRAC_PI_2, 1);
        let cfg = ModulatorConfig {
            mu0: 4.0,
            sideband_order: 1,
            modulation_index: m,
            theta: 0.0,
            omega: 4.2e9,
        };
        let st = sideband_state(&cfg).unwrap();
        assert!(st.amplitude(0).norm_sqr() < 1e-28);
        assert!((st.amplitude(1).norm_sqr() - 2.0).abs() < 1e-12);
        assert!((st.amplitude(-1).norm_sqr() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sideband_state_conserves_photon_number() {
        let cfg = ModulatorConfig {
            mu0: 1.0,
            sideband_order: 3,
            modulation_index: 1.0,
            theta: 0.3,
            omega: 4.2e9,
        };
        let st = sideband_state(&cfg).unwrap();
        assert!((st.total_photon_number() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn arm_photons_no_modulation() {
        let det = DetectionConfig {
            vartheta: 0.0,
            ..paper_detection()
        };
        let cfg = ModulatorConfig {
            mu0: 1e6,
            sideband_order: 3,
            modulation_index: 0.0,
            theta: 0.0,
            omega: 4.2e9,
        };
        let arms = arm_photon_numbers(&cfg, &det).unwrap();
        assert!(arms.n1.abs() < 1e-9);
        assert!((arms.n2 - 1e6 * det.eta_c).abs() < 1e-6);
    }

    #[test]
    fn arm_photons_carrier_leakage() {
        // m = 0: n1 = mu0 eta_SB vartheta ~ 52.48
        let det = paper_detection();
        let cfg = ModulatorConfig {
            mu0: 1e6,
            sideband_order: 3,
            modulation_index: 0.0,
            theta: 0.0,
            omega: 4.2e9,
        };
        let arms = arm_photon_numbers(&cfg, &det).unwrap();
        let want = 1e6 * det.eta_sb * det.vartheta;
        assert!((arms.n1 - want).abs() < 1e-9 * want);
        assert!((arms.n1 - 52.48).abs() < 0.01);
    }

    #[test]
    fn arm_photons_bounded_by_input() {
        let det = paper_detection();
        for i in 0..30 {
            let cfg = ModulatorConfig {
                mu0: 1e6,
                sideband_order: 3,
                modulation_index: 7.0 * i as f64 / 30.0,
                theta: 0.0,
                omega: 4.2e9,
            };
            let arms = arm_photon_numbers(&cfg, &det).unwrap();
            assert!(arms.n1 >= 0.0 && arms.n2 >= 0.0);
            assert!(arms.n1 + arms.n2 <= 1e6);
        }
    }

    #[test]
    fn balance_symmetric_case() {
        // equal sensitivities and transmittances, no leakage: |d00|^2 = 1/2,
        // for S = 1 that is beta = pi/4, m = 1.5 sqrt(2 - sqrt(2))
        let det = DetectionConfig {
            eta_sb: 0.5,
            eta_c: 0.5,
            vartheta: 0.0,
            s1: 1.0,
            s2: 1.0,
        };
        let m = balance_solve(&det, 1, 1.0).unwrap();
        let want = 1.5 * (2.0 - std::f64::consts::SQRT_2).sqrt();
        assert!((m - want).abs() < 1e-9, "m = {m}, want {want}");
        assert!((want - 1.1480).abs() < 1e-3);
    }

    #[test]
    fn balance_paper_parameters() {
        let det = paper_detection();
        let m = balance_solve(&det, 3, 1e6).unwrap();
        // regression value, pinned from an independent bisection
        assert!((m - 1.092466124494).abs() < 1e-9, "m = {m}");
        let cfg = ModulatorConfig {
            mu0: 1e6,
            sideband_order: 3,
            modulation_index: m,
            theta: 0.0,
            omega: 4.2e9,
        };
        let arms = arm_photon_numbers(&cfg, &det).unwrap();
        let residual = (det.s1 * arms.n1 - det.s2 * arms.n2).abs() / (det.s1 * arms.n1);
        assert!(residual < 1e-9, "residual = {residual}");
    }

    #[test]
    fn balance_unreachable_when_carrier_passes_filter() {
        let det = DetectionConfig {
            vartheta: 0.9999,
            ..paper_detection()
        };
        assert!(matches!(
            balance_solve(&det, 3, 1.0),
            Err(Error::NoBalanceSolution { .. })
        ));
    }

    #[test]
    fn quadrature_mean_examples() {
        let balanced = ArmPhotonNumbers { n1: 3.0, n2: 3.0 };
        assert_eq!(quadrature_mean(&balanced, 1.0, 4.0).unwrap(), 0.0);
        let arms = ArmPhotonNumbers { n1: 6.0, n2: 2.0 };
        assert_eq!(quadrature_mean(&arms, 1.0, 4.0).unwrap(), 1.0);
        assert!(quadrature_mean(&arms, 1.0, 0.0).is_err());
    }
}
