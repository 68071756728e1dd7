//! Energy-harvesting branch: full-wave rectifier, storage capacitor charging
//! during harvest phases, efficiency metrics, capacitor sizing, and the
//! energy balance of a boost stage fed by the harvested power.

use thiserror::Error;

use crate::frontend::{rc_step_linear, FrontendError, RcState, SwitchModel};
use crate::scalar::Real;
use crate::signal::InputPowerSpec;

#[derive(Debug, Error, PartialEq)]
pub enum EhError {
    #[error("invalid harvesting configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("harvest switch: {0}")]
    Switch(#[from] FrontendError),
    #[error(
        "storage capacitor not settled: {delta_v:.3e} V change over the final {window_s:.3e} s \
         (limit {limit_v:.3e} V)"
    )]
    NotConverged {
        delta_v: f64,
        window_s: f64,
        limit_v: f64,
    },
    #[error("charge trace is empty or never rises")]
    EmptyTrace,
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

/// Cross-coupled rectifier reduced to a conduction drop and a series
/// resistance. Reverse current is blocked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifierModel<T> {
    pub v_drop: T,
    pub r_series: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EhConfig<T> {
    pub c_eh: T,
    pub rectifier: RectifierModel<T>,
    /// Harvest switch S2.
    pub s2: SwitchModel<T>,
}

impl<T: Real> EhConfig<T> {
    pub fn validate(&self) -> Result<(), EhError> {
        if !(self.c_eh > T::zero() && self.c_eh.is_finite()) {
            return Err(EhError::InvalidConfig("c_eh must be positive"));
        }
        if !(self.rectifier.v_drop >= T::zero() && self.rectifier.v_drop.is_finite()) {
            return Err(EhError::InvalidConfig("v_drop must be nonnegative"));
        }
        if !(self.rectifier.r_series > T::zero() && self.rectifier.r_series.is_finite()) {
            return Err(EhError::InvalidConfig("r_series must be positive"));
        }
        self.s2.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EhMetrics<T> {
    /// Steady-state storage voltage.
    pub v_eh: T,
    /// Time to reach steady state.
    pub t_ceh: T,
    /// `v_eh / V_M`
    pub eta_v: T,
    /// Stored energy over input energy `P_in * t_ceh`.
    pub eta_e: T,
    pub e_h: T,
}

impl<T: Real> EhMetrics<T> {
    /// Metrics from a measured steady-state voltage and charge time.
    pub fn from_measurements(v_eh: T, t_ceh: T, p_in: &InputPowerSpec<T>, c_eh: T, v_m: T) -> Self {
        let e_h = harvested_energy(v_eh, c_eh);
        Self {
            v_eh,
            t_ceh,
            eta_v: v_eh / v_m,
            eta_e: c_eh * v_eh * v_eh / (T::lit(2.0) * p_in.p_in_rms * t_ceh),
            e_h,
        }
    }
}

/// Ideal full-wave transfer with a dead zone: `max(|v_in| - v_drop, 0)`.
pub fn rectified_envelope<T: Real>(v_in: T, rect: &RectifierModel<T>) -> T {
    (v_in.abs() - rect.v_drop).max(T::zero())
}

/// Advances the storage node over one harvest sub-step.
///
/// The node charges toward the rectified input through `r_series + R_ON(S2)`
/// whenever the envelope is above it; otherwise the rectifier blocks and the
/// voltage holds. An S2 in cutoff also holds.
pub fn eh_step<T: Real>(
    state: RcState<T>,
    v_in_start: T,
    v_in_end: T,
    cfg: &EhConfig<T>,
    dt: T,
) -> RcState<T> {
    eh_step_with_energy(state, v_in_start, v_in_end, cfg, dt).0
}

/// `eh_step` that also returns the energy delivered by the rectified drive.
pub fn eh_step_with_energy<T: Real>(
    state: RcState<T>,
    v_in_start: T,
    v_in_end: T,
    cfg: &EhConfig<T>,
    dt: T,
) -> (RcState<T>, T) {
    let hold = (
        RcState {
            v_cap: state.v_cap,
            t: state.t + dt,
        },
        T::zero(),
    );
    let u0 = rectified_envelope(v_in_start, &cfg.rectifier);
    let u1 = rectified_envelope(v_in_end, &cfg.rectifier);
    if u0.max(u1) <= state.v_cap {
        return hold;
    }
    let r_switch = match cfg.s2.r_on(v_in_start) {
        Ok(r) => r,
        Err(_) => return hold,
    };
    let r = cfg.rectifier.r_series + r_switch;
    let mut next = rc_step_linear(state, u0, u1, r, cfg.c_eh, dt);
    next.v_cap = next.v_cap.max(state.v_cap);
    (next, delivered_energy(state, u0, u1, r, cfg.c_eh, dt))
}

/// Energy `int u * max(u - v, 0) / r dt` over the step, five-point
/// Gauss-Legendre on the exact trajectory.
fn delivered_energy<T: Real>(state: RcState<T>, u0: T, u1: T, r: T, c: T, dt: T) -> T {
    const NODES: [(f64, f64); 5] = [
        (0.0, 0.568_888_888_888_888_9),
        (-0.538_469_310_105_683, 0.478_628_670_499_366_5),
        (0.538_469_310_105_683, 0.478_628_670_499_366_5),
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ];
    let half = dt / T::lit(2.0);
    NODES.iter().fold(T::zero(), |acc, &(x, w)| {
        let h = half * (T::one() + T::lit(x));
        let u_h = u0 + (u1 - u0) * h / dt;
        let v_h = rc_step_linear(state, u0, u_h, r, c, h).v_cap;
        let i = ((u_h - v_h) / r).max(T::zero());
        acc + T::lit(w) * half * u_h * i
    })
}

/// Steady-state metrics from a storage-capacitor waveform sampled at
/// increasing `times`.
///
/// The final sample is taken as `v_eh`; it must have moved by less than
/// `tol / 10` (relative) over the trailing `settle_window`. `t_ceh` is the
/// first time the voltage reaches `(1 - tol) * v_eh`.
pub fn steady_state_metrics<T: Real>(
    times: &[T],
    v_ceh: &[T],
    settle_window: T,
    p_in: &InputPowerSpec<T>,
    cfg: &EhConfig<T>,
    v_m: T,
    tol: T,
) -> Result<EhMetrics<T>, EhError> {
    assert_eq!(times.len(), v_ceh.len());
    let (&t_end, &v_eh) = match (times.last(), v_ceh.last()) {
        (Some(t), Some(v)) => (t, v),
        _ => return Err(EhError::EmptyTrace),
    };
    if v_eh <= T::zero() {
        return Err(EhError::EmptyTrace);
    }
    let window_start = t_end - settle_window;
    let idx = times.partition_point(|&t| t < window_start);
    let delta_v = v_eh - v_ceh[idx.min(times.len() - 1)];
    let limit = tol / T::lit(10.0) * v_eh;
    if delta_v.abs() > limit || window_start < times[0] {
        return Err(EhError::NotConverged {
            delta_v: delta_v.as_f64(),
            window_s: settle_window.as_f64(),
            limit_v: limit.as_f64(),
        });
    }
    let target = (T::one() - tol) * v_eh;
    let i = v_ceh
        .iter()
        .position(|&v| v >= target)
        .ok_or(EhError::EmptyTrace)?;
    let t_ceh = times[i] - times[0];
    if t_ceh <= T::zero() {
        return Err(EhError::EmptyTrace);
    }
    Ok(EhMetrics::from_measurements(v_eh, t_ceh, p_in, cfg.c_eh, v_m))
}

/// Stored energy `C V^2 / 2`.
pub fn harvested_energy<T: Real>(v_eh: T, c_eh: T) -> T {
    T::lit(0.5) * c_eh * v_eh * v_eh
}

/// Storage capacitance that keeps ripple below `delta_v` while the load draws
/// `i_load` for `t_p` between recharge peaks.
pub fn size_capacitor<T: Real>(i_load: T, t_p: T, delta_v: T) -> Result<T, EhError> {
    if !(delta_v > T::zero()) {
        return Err(EhError::NonPositive("ripple delta_v"));
    }
    if !(i_load >= T::zero()) {
        return Err(EhError::NonPositive("load current"));
    }
    if !(t_p > T::zero()) {
        return Err(EhError::NonPositive("ripple period t_p"));
    }
    Ok(i_load * t_p / delta_v)
}

/// Time for a converter of efficiency `eta_converter` fed a constant
/// `p_harvest_avg` to charge `c_load` to `v_load`.
pub fn boost_charge_time<T: Real>(
    p_harvest_avg: T,
    eta_converter: T,
    c_load: T,
    v_load: T,
) -> Result<T, EhError> {
    if !(p_harvest_avg > T::zero()) {
        return Err(EhError::NonPositive("harvested power"));
    }
    if !(eta_converter > T::zero() && eta_converter <= T::one()) {
        return Err(EhError::InvalidConfig("converter efficiency must be in (0, 1]"));
    }
    if !(c_load > T::zero()) || !(v_load > T::zero()) {
        return Err(EhError::NonPositive("load capacitance and voltage"));
    }
    Ok(harvested_energy(v_load, c_load) / (eta_converter * p_harvest_avg))
}

/// Average harvested power implied by an observed boost charge time.
pub fn boost_input_power<T: Real>(
    t_charge: T,
    eta_converter: T,
    c_load: T,
    v_load: T,
) -> Result<T, EhError> {
    if !(t_charge > T::zero()) {
        return Err(EhError::NonPositive("charge time"));
    }
    boost_charge_time(T::one(), eta_converter, c_load, v_load).map(|t_unit| t_unit / t_charge)
}
