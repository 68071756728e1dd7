//! Behavioral n-bit SAR ADC over a bipolar range `[-v_ref, +v_ref)`.
//!
//! The capacitive DAC uses merged capacitor switching, which drops the MSB
//! capacitor and leaves `C_DAC = 2^(n-1) * C_u`. Conversion itself is an
//! ideal binary search with a mid-rise code mapping.

use thiserror::Error;

use crate::frontend::{FrontendError, SwitchModel};
use crate::scalar::Real;

pub const MAX_BITS: u32 = 16;

#[derive(Debug, Error, PartialEq)]
pub enum AdcError {
    #[error("resolution must be 1..={MAX_BITS} bits, got {0}")]
    BadResolution(u32),
    #[error("reference voltage must be positive")]
    BadReference,
    #[error("unit capacitor must be positive")]
    BadUnitCap,
    #[error("sampling switch: {0}")]
    Switch(#[from] FrontendError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcConfig<T> {
    pub n_bits: u32,
    pub v_ref: T,
    pub c_unit: T,
    /// Sampling switch S1.
    pub s1: SwitchModel<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AdcCode(pub u32);

impl AdcCode {
    pub fn value(self) -> u32 {
        self.0
    }
}

impl<T: Real> AdcConfig<T> {
    pub fn new(n_bits: u32, v_ref: T, c_unit: T, s1: SwitchModel<T>) -> Result<Self, AdcError> {
        let cfg = Self {
            n_bits,
            v_ref,
            c_unit,
            s1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AdcError> {
        if !(1..=MAX_BITS).contains(&self.n_bits) {
            return Err(AdcError::BadResolution(self.n_bits));
        }
        if !(self.v_ref > T::zero() && self.v_ref.is_finite()) {
            return Err(AdcError::BadReference);
        }
        if !(self.c_unit > T::zero() && self.c_unit.is_finite()) {
            return Err(AdcError::BadUnitCap);
        }
        self.s1.validate()?;
        Ok(())
    }

    pub fn n_codes(&self) -> u32 {
        1 << self.n_bits
    }

    pub fn max_code(&self) -> AdcCode {
        AdcCode(self.n_codes() - 1)
    }

    pub fn lsb(&self) -> T {
        T::lit(2.0) * self.v_ref / T::from_u32(self.n_codes()).expect("code count")
    }

    /// Input position in LSB units measured from `-v_ref`.
    fn lsb_position(&self, v: T) -> T {
        (v + self.v_ref) / self.lsb()
    }

    /// True when `v` lies outside the convertible range and gets clipped.
    pub fn is_saturated(&self, v: T) -> bool {
        v < -self.v_ref || v >= self.v_ref
    }
}

/// Total DAC array capacitance, `(1 + sum_{i=0}^{n-2} 2^i) * C_u`. It doubles
/// as the hold capacitor.
pub fn c_dac<T: Real>(config: &AdcConfig<T>) -> T {
    let weights: u64 = 1 + (0..config.n_bits.saturating_sub(1)).map(|i| 1u64 << i).sum::<u64>();
    T::from_u64(weights).expect("weight sum") * config.c_unit
}

/// Mid-rise reconstruction level, `-v_ref + (code + 1/2) LSB`.
pub fn dac_output<T: Real>(code: AdcCode, config: &AdcConfig<T>) -> T {
    let level = T::from_u32(code.0).expect("code") + T::lit(0.5);
    -config.v_ref + level * config.lsb()
}

/// Successive approximation from the MSB down. A bit is kept when the input
/// is at or above the trial threshold: code `k` covers the half-open interval
/// `[-v_ref + k LSB, -v_ref + (k + 1) LSB)`, so a boundary belongs to the
/// upper code and 0 V converts to mid-scale.
pub fn sar_convert<T: Real>(v_sampled: T, config: &AdcConfig<T>) -> AdcCode {
    let x = config.lsb_position(v_sampled);
    let mut code = 0u32;
    for bit in (0..config.n_bits).rev() {
        let trial = code | (1 << bit);
        // threshold between codes trial-1 and trial
        let threshold = T::from_u32(trial).expect("code");
        if x >= threshold {
            code = trial;
        }
    }
    AdcCode(code)
}

/// Brute-force nearest reconstruction level over every code; a tie (input on
/// a decision boundary) goes to the upper code.
pub fn quantize_oracle<T: Real>(v: T, config: &AdcConfig<T>) -> AdcCode {
    let x = config.lsb_position(v);
    let half = T::lit(0.5);
    let mut best = 0u32;
    let mut best_dist = (x - half).abs();
    for code in 1..config.n_codes() {
        let d = (x - (T::from_u32(code).expect("code") + half)).abs();
        if d <= best_dist {
            best = code;
            best_dist = d;
        }
    }
    AdcCode(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn adc(n: u32, c_unit: f64) -> AdcConfig<f64> {
        AdcConfig::new(n, 0.4, c_unit, SwitchModel::Ideal).unwrap()
    }

    #[test]
    fn c_dac_examples() {
        assert!((c_dac(&adc(8, 12e-9)) - 1.536e-6).abs() < 1e-18);
        assert!((c_dac(&adc(8, 15e-15)) - 1.92e-12).abs() < 1e-24);
        assert_eq!(c_dac(&adc(1, 3e-15)), 3e-15);
    }

    #[test]
    fn c_dac_halves_per_bit() {
        for n in 2..=MAX_BITS {
            let a = c_dac(&adc(n, 1e-15));
            let b = c_dac(&adc(n - 1, 1e-15));
            assert!((a / b - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn conversion_examples() {
        let cfg = adc(8, 1e-12);
        let lsb = cfg.lsb();
        assert_eq!(sar_convert(0.0, &cfg), AdcCode(128));
        assert_eq!(sar_convert(0.4 - lsb / 2.0, &cfg), AdcCode(255));
        assert_eq!(sar_convert(-1.0, &cfg), AdcCode(0));
        assert_eq!(sar_convert(1.0, &cfg), AdcCode(255));
        assert!(cfg.is_saturated(0.4) && cfg.is_saturated(-0.41));
        assert!(!cfg.is_saturated(-0.4));
    }

    #[test]
    fn dac_output_examples() {
        let cfg = adc(8, 1e-12);
        assert!((dac_output(AdcCode(128), &cfg) - 1.5625e-3).abs() < 1e-15);
        assert!((dac_output(AdcCode(0), &cfg) - (-0.4 + 1.5625e-3)).abs() < 1e-15);
    }

    #[test]
    fn oracle_tie_breaks_up_and_hits_centers() {
        let cfg = adc(8, 1e-12);
        let lsb = cfg.lsb();
        assert_eq!(quantize_oracle(dac_output(AdcCode(77), &cfg), &cfg), AdcCode(77));
        // boundary between codes 128 and 129
        assert_eq!(quantize_oracle(lsb, &cfg), AdcCode(129));
        assert_eq!(sar_convert(lsb, &cfg), AdcCode(129));
        assert_eq!(quantize_oracle(0.0, &cfg), AdcCode(128));
    }

    #[test]
    fn oracle_ramp_is_monotone() {
        let cfg = adc(6, 1e-12);
        let n = 1usize << (cfg.n_bits + 2);
        let mut prev = AdcCode(0);
        for i in 0..n {
            let v = -0.4 + 0.8 * i as f64 / n as f64;
            let code = quantize_oracle(v, &cfg);
            assert!(code >= prev);
            prev = code;
        }
        assert_eq!(prev, cfg.max_code());
    }

    #[test]
    fn random_inputs_match_oracle() {
        let cfg = adc(8, 1e-12);
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..10_000 {
            let v: f64 = rng.gen_range(-0.4..0.4);
            let code = sar_convert(v, &cfg);
            assert_eq!(code, quantize_oracle(v, &cfg));
            assert!((dac_output(code, &cfg) - v).abs() <= cfg.lsb() / 2.0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(AdcConfig::new(0, 0.4, 1e-15, SwitchModel::Ideal).is_err());
        assert!(AdcConfig::new(17, 0.4, 1e-15, SwitchModel::Ideal).is_err());
        assert!(AdcConfig::new(8, 0.0, 1e-15, SwitchModel::Ideal).is_err());
        assert!(AdcConfig::new(8, 0.4, 0.0, SwitchModel::Ideal).is_err());
        assert!(AdcConfig::new(8, 0.4, 1e-15, SwitchModel::ConstantR { r_on: -1.0 }).is_err());
    }
}
