//! Switch on-resistance models and the exact RC integrator used by both the
//! acquisition path and the harvesting path.
//!
//! The circuit is piecewise-linear RC, so each sub-step is advanced with the
//! closed-form solution of `C dv/dt = (u(t) - v) / R` for a drive `u` that is
//! linear across the step. There is no truncation error for such drives.

use thiserror::Error;

use crate::scalar::Real;

/// Resistance used for `SwitchModel::Ideal`.
pub const IDEAL_FLOOR_OHMS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum FrontendError {
    /// |V_GS| at or below threshold: the switch is open.
    #[error("pass transistor in cutoff (|v_gs| = {v_gs} V <= v_th = {v_th} V)")]
    Cutoff { v_gs: f64, v_th: f64 },
    #[error("invalid switch model: {0}")]
    InvalidSwitch(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SwitchModel<T> {
    Ideal,
    /// Bootstrapped switch with input-independent on-resistance.
    ConstantR { r_on: T },
    /// Square-law device in triode: `R_ON = 1 / (k (|V_GS| - V_TH))`, where
    /// `k = mu * C_ox * W / L` and `V_GS = v_gate - v_signal`.
    PassTransistor { k_gain: T, v_th: T, v_gate: T },
}

impl<T: Real> SwitchModel<T> {
    pub fn validate(&self) -> Result<(), FrontendError> {
        match *self {
            SwitchModel::Ideal => Ok(()),
            SwitchModel::ConstantR { r_on } => {
                if r_on > T::zero() && r_on.is_finite() {
                    Ok(())
                } else {
                    Err(FrontendError::InvalidSwitch("r_on must be positive"))
                }
            }
            SwitchModel::PassTransistor { k_gain, v_th, v_gate } => {
                if !(k_gain > T::zero() && k_gain.is_finite()) {
                    Err(FrontendError::InvalidSwitch("k_gain must be positive"))
                } else if !(v_th >= T::zero() && v_th.is_finite()) {
                    Err(FrontendError::InvalidSwitch("v_th must be nonnegative"))
                } else if !v_gate.is_finite() {
                    Err(FrontendError::InvalidSwitch("v_gate must be finite"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn r_on(&self, v_signal: T) -> Result<T, FrontendError> {
        match *self {
            SwitchModel::Ideal => Ok(T::lit(IDEAL_FLOOR_OHMS)),
            SwitchModel::ConstantR { r_on } => Ok(r_on),
            SwitchModel::PassTransistor { k_gain, v_th, v_gate } => {
                let v_gs = (v_gate - v_signal).abs();
                if v_gs <= v_th {
                    Err(FrontendError::Cutoff {
                        v_gs: v_gs.as_f64(),
                        v_th: v_th.as_f64(),
                    })
                } else {
                    Ok(T::one() / (k_gain * (v_gs - v_th)))
                }
            }
        }
    }

    /// Largest on-resistance over signals in `[lo, hi]`.
    pub fn worst_case_r_on(&self, lo: T, hi: T) -> Result<T, FrontendError> {
        match *self {
            SwitchModel::PassTransistor { v_gate, .. } => {
                // |v_gate - v| is smallest at the point of [lo, hi] closest to v_gate
                let nearest = v_gate.max(lo).min(hi);
                self.r_on(nearest)
            }
            _ => self.r_on(lo),
        }
    }
}

/// Voltage across a capacitor node at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcState<T> {
    pub v_cap: T,
    pub t: T,
}

impl<T: Real> RcState<T> {
    pub fn new(v_cap: T, t: T) -> Self {
        Self { v_cap, t }
    }
}

/// Advances the RC node by `dt` with the drive ramping linearly from
/// `v_drive_start` to `v_drive_end`.
///
/// Closed form: `v = u1 - s*tau + (v0 - u0 + s*tau) * exp(-dt/tau)` with
/// `s = (u1 - u0)/dt`. It is evaluated as
/// `v0*e + u0*(1 - e) + (u1 - u0)*(1 - (1 - e)/x)` where `x = dt/tau`, which
/// avoids the cancellation of the textbook form when `dt << tau`.
pub fn rc_step_linear<T: Real>(
    state: RcState<T>,
    v_drive_start: T,
    v_drive_end: T,
    r: T,
    c: T,
    dt: T,
) -> RcState<T> {
    debug_assert!(r > T::zero() && c > T::zero() && dt > T::zero());
    let x = dt / (r * c);
    let one_minus_e = -(-x).exp_m1();
    let e = T::one() - one_minus_e;
    // ramp weight 1 - (1 - e^-x)/x
    let ramp = if x < T::lit(1e-3) {
        let x2 = x * x;
        x / T::lit(2.0) - x2 / T::lit(6.0) + x2 * x / T::lit(24.0) - x2 * x2 / T::lit(120.0)
    } else {
        T::one() - one_minus_e / x
    };
    let v = state.v_cap * e + v_drive_start * one_minus_e + (v_drive_end - v_drive_start) * ramp;
    RcState {
        v_cap: v,
        t: state.t + dt,
    }
}

/// Residual tracking error `exp(-t_aq / (r c))` after a constant-drive step.
pub fn settling_error<T: Real>(r: T, c: T, t_aq: T) -> T {
    (-t_aq / (r * c)).exp()
}

/// Settling factor `k = (n + 1) ln 2`: `k` time constants leave an error
/// below half an LSB of an `n`-bit full-scale step.
pub fn half_lsb_settling_factor<T: Real>(n_bits: u32) -> T {
    T::from_u32(n_bits + 1).expect("bit count") * T::LN_2()
}

/// Largest constant on-resistance that settles `c` within `t_aq` using `k`
/// time constants.
pub fn max_r_on_for_settling<T: Real>(t_aq: T, c: T, k: T) -> T {
    t_aq / (k * c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Explicit Euler over `steps` sub-steps with exact linear drive.
    fn euler_oracle(v0: f64, u0: f64, u1: f64, tau: f64, dt: f64, steps: usize) -> f64 {
        let h = dt / steps as f64;
        let mut v = v0;
        for i in 0..steps {
            let u = u0 + (u1 - u0) * (i as f64 * h) / dt;
            v += h * (u - v) / tau;
        }
        v
    }

    #[test]
    fn r_on_examples() {
        let s = SwitchModel::ConstantR { r_on: 6.51 };
        assert_eq!(s.r_on(0.3).unwrap(), 6.51);
        let p = SwitchModel::<f64>::PassTransistor {
            k_gain: 1e-3,
            v_th: 0.4,
            v_gate: 0.0,
        };
        assert!((p.r_on(1.2).unwrap() - 1250.0).abs() < 1e-9);
        assert!(matches!(p.r_on(0.4), Err(FrontendError::Cutoff { .. })));
        assert_eq!(SwitchModel::<f64>::Ideal.r_on(1.0).unwrap(), 1e-6);
    }

    #[test]
    fn worst_case_r_on_finds_cutoff_inside_range() {
        let p = SwitchModel::<f64>::PassTransistor {
            k_gain: 1e-3,
            v_th: 0.4,
            v_gate: 2.0,
        };
        let worst = p.worst_case_r_on(-0.4, 0.4).unwrap();
        assert!((worst - p.r_on(0.4).unwrap()).abs() < 1e-12);
        let inside = SwitchModel::PassTransistor {
            k_gain: 1e-3,
            v_th: 0.4,
            v_gate: 0.0,
        };
        assert!(inside.worst_case_r_on(-0.4, 0.4).is_err());
    }

    #[test]
    fn step_response_examples() {
        let s = rc_step_linear(RcState::<f64>::new(0.0, 0.0), 1.0, 1.0, 1.0, 1e-3, 1e-3);
        assert!((s.v_cap - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((s.t - 1e-3).abs() < 1e-18);

        let held = rc_step_linear(RcState::<f64>::new(0.3, 0.0), 0.3, 0.3, 10.0, 1e-6, 1e-6);
        assert!((held.v_cap - 0.3).abs() < 1e-16);

        let ramp = rc_step_linear(RcState::<f64>::new(0.0, 0.0), 0.0, 1.0, 1.0, 1.0, 1.0);
        assert!((ramp.v_cap - (-1.0f64).exp()).abs() < 1e-15);
        let oracle = euler_oracle(0.0, 0.0, 1.0, 1.0, 1.0, 1_000_000);
        assert!((ramp.v_cap - oracle).abs() / oracle < 1e-6);
    }

    #[test]
    fn settling_examples() {
        assert!((settling_error::<f64>(1.0, 1.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        let k: f64 = half_lsb_settling_factor(8);
        assert!((settling_error::<f64>(1.0, 1.0, k) - 2f64.powi(-9)).abs() < 1e-15);
        assert!((settling_error::<f64>(1.0, 1.0, 1e-300) - 1.0).abs() < 1e-15);
        let r = max_r_on_for_settling(10e-6, 1.536e-6, k);
        assert!((r - 1.043).abs() < 1e-3, "{r}");
    }

    #[test]
    fn passes_through_single_precision() {
        let s = rc_step_linear(RcState::<f32>::new(0.0, 0.0), 1.0, 1.0, 1.0, 1.0, 1.0);
        assert!((s.v_cap - 0.632_120_6).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn constant_drive_never_overshoots(v0 in -1.0f64..1.0, u in -1.0f64..1.0, ratio in 1e-3f64..1e3) {
            let s = rc_step_linear(RcState::<f64>::new(v0, 0.0), u, u, 1.0, 1.0, ratio);
            let (lo, hi) = if v0 <= u { (v0, u) } else { (u, v0) };
            prop_assert!(s.v_cap >= lo - 1e-15 && s.v_cap <= hi + 1e-15);
            prop_assert!((s.v_cap - u).abs() <= (v0 - u).abs() + 1e-15);
        }

        #[test]
        fn half_steps_compose(v0 in -1.0f64..1.0, u0 in -1.0f64..1.0, u1 in -1.0f64..1.0, log_ratio in -4.0f64..4.0) {
            let dt = 10f64.powf(log_ratio);
            let whole = rc_step_linear(RcState::<f64>::new(v0, 0.0), u0, u1, 1.0, 1.0, dt);
            let um = 0.5 * (u0 + u1);
            let a = rc_step_linear(RcState::<f64>::new(v0, 0.0), u0, um, 1.0, 1.0, dt / 2.0);
            let b = rc_step_linear(a, um, u1, 1.0, 1.0, dt / 2.0);
            let scale = whole.v_cap.abs().max(1e-3);
            prop_assert!((whole.v_cap - b.v_cap).abs() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn r_on_decreases_with_overdrive(vg1 in 0.5f64..3.0, extra in 1e-3f64..2.0) {
            let p = SwitchModel::<f64>::PassTransistor { k_gain: 2e-3, v_th: 0.4, v_gate: 0.0 };
            let r1 = p.r_on(-vg1).unwrap();
            let r2 = p.r_on(-(vg1 + extra)).unwrap();
            prop_assert!(r2 < r1);
        }
    }
}
