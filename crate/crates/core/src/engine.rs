//! Transient orchestration: walks the phase schedule, advances the DAC and
//! storage nodes with sub-stepping, converts each acquired sample, and
//! reduces the trace to converter and harvesting metrics.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{self, coherent_bin, AnalysisError, Spectrum};
use crate::clocking::{ClockPlan, PhaseKind};
use crate::eh_branch::{eh_step_with_energy, steady_state_metrics, EhConfig, EhError, EhMetrics};
use crate::frontend::{half_lsb_settling_factor, max_r_on_for_settling, rc_step_linear, RcState, SwitchModel};
use crate::sar_adc::{c_dac, sar_convert, AdcCode, AdcConfig};
use crate::scalar::Real;
use crate::signal::{coherent_frequency, rms_power, InputPowerSpec, Stimulus};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error(transparent)]
    NotConverged(EhError),
    #[error("unknown sweep parameter {0:?} (expected one of alpha, c_eh, v_drop, r_on_s1, n_bits, f_s)")]
    UnknownParameter(String),
    #[error("spectral analysis: {0}")]
    Analysis(#[from] AnalysisError),
}

impl EngineError {
    pub fn is_not_converged(&self) -> bool {
        matches!(self, EngineError::NotConverged(_))
    }
}

fn invalid(e: impl std::fmt::Display) -> EngineError {
    EngineError::Validation(e.to_string())
}

/// Which reductions `run` performs after the transient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricSet {
    pub adc: bool,
    pub eh: bool,
}

impl Default for MetricSet {
    fn default() -> Self {
        Self { adc: true, eh: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub source: Stimulus<T>,
    /// When set, the tone is re-derived as the coherent frequency with this
    /// many cycles per `n_fft` record whenever `f_s` changes.
    pub coherent_cycles: Option<usize>,
    /// Replaces the source-derived input power.
    pub p_in_override: Option<T>,
    pub clock: ClockPlan<T>,
    pub adc: AdcConfig<T>,
    /// Re-solve S1 as the largest constant on-resistance meeting the settling
    /// budget instead of using `adc.s1`.
    pub auto_r_on: bool,
    pub eh: EhConfig<T>,
    /// Sub-steps per phase segment.
    pub n_sub: usize,
    pub n_fft: usize,
    pub max_periods: usize,
    /// Time constants required for acquisition; `None` means `(n + 1) ln 2`.
    pub settling_factor_k: Option<T>,
    pub steady_tol: T,
    pub metrics: MetricSet,
    /// Reserved for randomized studies; the transient itself is deterministic.
    pub seed: u64,
}

impl<T: Real> Scenario<T> {
    pub fn settling_factor(&self) -> T {
        self.settling_factor_k
            .unwrap_or_else(|| half_lsb_settling_factor(self.adc.n_bits))
    }

    /// Periods actually simulated: enough for both the requested run length
    /// and the FFT record.
    pub fn periods(&self) -> usize {
        if self.metrics.adc {
            self.clock.n_periods.max(self.n_fft)
        } else {
            self.clock.n_periods
        }
    }

    pub fn input_power(&self) -> Result<InputPowerSpec<T>, EngineError> {
        match (self.p_in_override, &self.source) {
            (Some(p), _) => InputPowerSpec::configured(p).map_err(invalid),
            (None, Stimulus::Sine(s)) => Ok(rms_power(s)),
            (None, Stimulus::Table(_)) => Err(EngineError::Validation(
                "a tabulated stimulus needs a configured input power".into(),
            )),
        }
    }

    /// Applies the derived quantities (coherent tone, auto-solved R_ON).
    pub fn resolved(&self) -> Result<Scenario<T>, EngineError> {
        let mut sc = self.clone();
        sc.clock.validate().map_err(invalid)?;
        sc.adc.validate().map_err(invalid)?;
        if let (Some(m), Stimulus::Sine(s)) = (sc.coherent_cycles, &mut sc.source) {
            s.frequency = coherent_frequency(sc.clock.f_s, sc.n_fft, m).map_err(invalid)?;
        }
        if sc.auto_r_on {
            let r_on = max_r_on_for_settling(sc.clock.t_aq(), c_dac(&sc.adc), sc.settling_factor());
            sc.adc.s1 = SwitchModel::ConstantR { r_on };
        }
        Ok(sc)
    }

    /// Checks every cross-module constraint on an already resolved scenario.
    pub fn validate(&self) -> Result<(), EngineError> {
        self.clock.validate().map_err(invalid)?;
        self.adc.validate().map_err(invalid)?;
        self.eh.validate().map_err(invalid)?;
        if self.n_sub == 0 {
            return Err(EngineError::Validation("n_sub must be at least 1".into()));
        }
        if !(self.steady_tol > T::zero() && self.steady_tol < T::one()) {
            return Err(EngineError::Validation("steady_tol must be in (0, 1)".into()));
        }
        let k = self.settling_factor();
        if !(k > T::zero()) {
            return Err(EngineError::Validation("settling factor must be positive".into()));
        }
        if let Stimulus::Sine(s) = &self.source {
            s.validate().map_err(invalid)?;
            if !(s.frequency < self.clock.f_s / T::lit(2.0)) {
                return Err(EngineError::Validation(format!(
                    "input {} Hz violates Nyquist for f_s = {} Hz",
                    s.frequency.as_f64(),
                    self.clock.f_s.as_f64()
                )));
            }
        }
        let peak = self.source.peak_magnitude();
        let r_worst = self.adc.s1.worst_case_r_on(-peak, peak).map_err(invalid)?;
        let needed = r_worst * c_dac(&self.adc) * k;
        let t_aq = self.clock.t_aq();
        if needed > t_aq * (T::one() + T::lit(1e-9)) {
            return Err(EngineError::Validation(format!(
                "acquisition does not settle: k * R_ON * C_DAC = {:e} s exceeds T_aq = {:e} s",
                needed.as_f64(),
                t_aq.as_f64()
            )));
        }
        if self.periods() > self.max_periods {
            return Err(EngineError::Validation(format!(
                "{} periods requested, limit is {}",
                self.periods(),
                self.max_periods
            )));
        }
        if self.metrics.adc {
            let s = self.source.as_sine().ok_or_else(|| {
                EngineError::Validation("spectral metrics need a sinusoidal stimulus".into())
            })?;
            coherent_bin(s.frequency, self.clock.f_s, self.n_fft)?;
        }
        if self.metrics.eh {
            self.input_power()?;
        }
        Ok(())
    }
}

/// Sub-step waveforms (struct of arrays) plus one record per period.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransientTrace<T> {
    pub t: Vec<T>,
    pub v_in: Vec<T>,
    pub phase: Vec<PhaseKind>,
    pub v_dac: Vec<T>,
    pub v_ceh: Vec<T>,
    pub periods: Vec<PeriodRecord<T>>,
    /// Energy delivered by the rectified drive into the harvest path.
    pub e_delivered: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodRecord<T> {
    pub period: usize,
    pub code: AdcCode,
    pub v_sampled: T,
    pub saturated: bool,
}

impl<T: Real> TransientTrace<T> {
    fn with_capacity(n: usize) -> Self {
        Self {
            t: Vec::with_capacity(n),
            v_in: Vec::with_capacity(n),
            phase: Vec::with_capacity(n),
            v_dac: Vec::with_capacity(n),
            v_ceh: Vec::with_capacity(n),
            periods: Vec::new(),
            e_delivered: T::zero(),
        }
    }

    fn push(&mut self, t: T, v_in: T, phase: PhaseKind, v_dac: T, v_ceh: T) {
        self.t.push(t);
        self.v_in.push(v_in);
        self.phase.push(phase);
        self.v_dac.push(v_dac);
        self.v_ceh.push(v_ceh);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn codes(&self) -> Vec<AdcCode> {
        self.periods.iter().map(|p| p.code).collect()
    }

    /// `t_s,v_in,phase,v_dac,v_ceh`, keeping every `stride`-th sample and the last.
    pub fn write_csv<W: Write>(&self, mut out: W, stride: usize) -> std::io::Result<()> {
        writeln!(out, "t_s,v_in,phase,v_dac,v_ceh")?;
        let stride = stride.max(1);
        let last = self.len().saturating_sub(1);
        for i in (0..self.len()).filter(|&i| i % stride == 0 || i == last) {
            writeln!(
                out,
                "{:e},{:e},{},{:e},{:e}",
                self.t[i].as_f64(),
                self.v_in[i].as_f64(),
                self.phase[i].as_str(),
                self.v_dac[i].as_f64(),
                self.v_ceh[i].as_f64()
            )?;
        }
        Ok(())
    }

    /// `period,code,v_sampled,saturated`
    pub fn write_codes_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "period,code,v_sampled,saturated")?;
        for p in &self.periods {
            writeln!(
                out,
                "{},{},{:e},{}",
                p.period,
                p.code.0,
                p.v_sampled.as_f64(),
                u8::from(p.saturated)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcMetrics<T> {
    pub sndr_db: T,
    pub enob: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult<T> {
    /// The scenario after derived quantities were applied.
    pub scenario: Scenario<T>,
    pub trace: TransientTrace<T>,
    pub spectrum: Option<Spectrum<T>>,
    pub adc_metrics: Option<AdcMetrics<T>>,
    pub eh_metrics: Option<EhMetrics<T>>,
}

/// Runs one scenario end to end.
pub fn run<T: Real>(scenario: &Scenario<T>) -> Result<SimulationResult<T>, EngineError> {
    let sc = scenario.resolved()?;
    sc.validate()?;
    let trace = simulate(&sc);

    let (spectrum, adc_metrics) = if sc.metrics.adc {
        let (spec, m) = adc_metrics_of(&sc, &trace)?;
        (Some(spec), Some(m))
    } else {
        (None, None)
    };

    let eh_metrics = if sc.metrics.eh {
        let t_s = sc.clock.t_s();
        let window_periods = 10.max(sc.periods() / 10);
        let window = T::from_count(window_periods) * t_s;
        let m = steady_state_metrics(
            &trace.t,
            &trace.v_ceh,
            window,
            &sc.input_power()?,
            &sc.eh,
            sc.source.peak_magnitude(),
            sc.steady_tol,
        )
        .map_err(EngineError::NotConverged)?;
        Some(m)
    } else {
        None
    };

    Ok(SimulationResult {
        scenario: sc,
        trace,
        spectrum,
        adc_metrics,
        eh_metrics,
    })
}

fn adc_metrics_of<T: Real>(
    sc: &Scenario<T>,
    trace: &TransientTrace<T>,
) -> Result<(Spectrum<T>, AdcMetrics<T>), EngineError> {
    let sine = sc.source.as_sine().expect("validated");
    let bin = coherent_bin(sine.frequency, sc.clock.f_s, sc.n_fft)?;
    let codes: Vec<AdcCode> = trace.periods[..sc.n_fft].iter().map(|p| p.code).collect();
    let spec = analysis::spectrum(&codes, &sc.adc, sc.clock.f_s, bin, sc.n_fft)?;
    let sndr_db = analysis::sndr(&spec);
    Ok((
        spec,
        AdcMetrics {
            sndr_db,
            enob: analysis::enob(sndr_db),
        },
    ))
}

/// The transient loop. Assumes a resolved, validated scenario.
fn simulate<T: Real>(sc: &Scenario<T>) -> TransientTrace<T> {
    let periods = sc.periods();
    let plan = ClockPlan {
        n_periods: periods,
        ..sc.clock
    };
    let n_sub = sc.n_sub;
    let c_hold = c_dac(&sc.adc);
    let mut trace = TransientTrace::with_capacity(2 * periods * n_sub + 1);
    trace.periods.reserve(periods);

    let mut dac = RcState::new(T::zero(), T::zero());
    let mut ceh = RcState::new(T::zero(), T::zero());
    let mut u_prev = sc.source.sample_at(T::zero());
    trace.push(T::zero(), u_prev, PhaseKind::Acquisition, dac.v_cap, ceh.v_cap);

    for k in 0..periods {
        for kind in [PhaseKind::Acquisition, PhaseKind::EnergyHarvest] {
            let seg = plan.segment(k, kind);
            let span = seg.duration();
            let mut t_prev = seg.t_start;
            for j in 1..=n_sub {
                let t = if j == n_sub {
                    seg.t_end
                } else {
                    seg.t_start + span * T::from_count(j) / T::from_count(n_sub)
                };
                let dt = t - t_prev;
                let u = sc.source.sample_at(t);
                match kind {
                    PhaseKind::Acquisition => {
                        dac = match sc.adc.s1.r_on(u_prev) {
                            Ok(r) => rc_step_linear(dac, u_prev, u, r, c_hold, dt),
                            // open switch: node holds
                            Err(_) => RcState::new(dac.v_cap, t),
                        };
                        ceh.t = t;
                    }
                    PhaseKind::EnergyHarvest => {
                        let (next, e) = eh_step_with_energy(ceh, u_prev, u, &sc.eh, dt);
                        ceh = next;
                        trace.e_delivered = trace.e_delivered + e;
                        dac.t = t;
                    }
                }
                trace.push(t, u, kind, dac.v_cap, ceh.v_cap);
                u_prev = u;
                t_prev = t;
            }
            if kind == PhaseKind::Acquisition {
                let v_sampled = dac.v_cap;
                trace.periods.push(PeriodRecord {
                    period: k,
                    code: sar_convert(v_sampled, &sc.adc),
                    v_sampled,
                    saturated: sc.adc.is_saturated(v_sampled),
                });
            }
        }
    }
    trace
}

/// Parameters a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    CEh,
    VDrop,
    ROnS1,
    NBits,
    FS,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::CEh => "c_eh",
            SweepParam::VDrop => "v_drop",
            SweepParam::ROnS1 => "r_on_s1",
            SweepParam::NBits => "n_bits",
            SweepParam::FS => "f_s",
        }
    }

    fn apply<T: Real>(self, base: &Scenario<T>, value: T) -> Result<Scenario<T>, EngineError> {
        let mut sc = base.clone();
        match self {
            SweepParam::Alpha => sc.clock.alpha = value,
            SweepParam::CEh => sc.eh.c_eh = value,
            SweepParam::VDrop => sc.eh.rectifier.v_drop = value,
            SweepParam::ROnS1 => {
                sc.adc.s1 = SwitchModel::ConstantR { r_on: value };
                sc.auto_r_on = false;
            }
            SweepParam::NBits => {
                let n = value
                    .to_u32()
                    .filter(|&n| T::from_u32(n) == Some(value))
                    .ok_or_else(|| invalid(format!("n_bits must be an integer, got {value}")))?;
                sc.adc.n_bits = n;
            }
            SweepParam::FS => sc.clock.f_s = value,
        }
        Ok(sc)
    }
}

impl FromStr for SweepParam {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "alpha" => SweepParam::Alpha,
            "c_eh" => SweepParam::CEh,
            "v_drop" => SweepParam::VDrop,
            "r_on_s1" | "r_on(s1)" => SweepParam::ROnS1,
            "n_bits" => SweepParam::NBits,
            "f_s" => SweepParam::FS,
            other => return Err(EngineError::UnknownParameter(other.to_string())),
        })
    }
}

/// Scalar outcome of one run, without the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary<T> {
    pub adc: Option<AdcMetrics<T>>,
    pub eh: Option<EhMetrics<T>>,
}

impl<T: Real> From<&SimulationResult<T>> for RunSummary<T> {
    fn from(r: &SimulationResult<T>) -> Self {
        Self {
            adc: r.adc_metrics,
            eh: r.eh_metrics,
        }
    }
}

#[derive(Debug)]
pub struct SweepRow<T> {
    pub value: T,
    pub outcome: Result<RunSummary<T>, EngineError>,
}

/// Runs `base` once per value of `parameter`. Rows are independent and come
/// back in input order; per-row failures are recorded, not propagated.
/// `jobs > 1` evaluates rows on a dedicated thread pool.
pub fn sweep<T: Real>(
    base: &Scenario<T>,
    parameter: &str,
    values: &[T],
    jobs: usize,
) -> Result<Vec<SweepRow<T>>, EngineError> {
    let param: SweepParam = parameter.parse()?;
    let eval = |&value: &T| SweepRow {
        value,
        outcome: param
            .apply(base, value)
            .and_then(|sc| run(&sc))
            .map(|r| RunSummary::from(&r)),
    };
    if jobs <= 1 {
        return Ok(values.iter().map(eval).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| EngineError::Validation(format!("thread pool: {e}")))?;
    Ok(pool.install(|| values.par_iter().map(eval).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eh_branch::RectifierModel;
    use crate::signal::SineSource;

    fn small(f_s: f64, c_eh: f64) -> Scenario<f64> {
        let n_fft = 64;
        Scenario {
            source: Stimulus::Sine(SineSource::new(0.4, 1.0, 0.0, 0.0, 50.0).unwrap()),
            coherent_cycles: Some(5),
            p_in_override: None,
            clock: ClockPlan::new(f_s, 0.1, 64).unwrap(),
            adc: AdcConfig::new(8, 0.4, 1e-12, SwitchModel::Ideal).unwrap(),
            auto_r_on: true,
            eh: EhConfig {
                c_eh,
                rectifier: RectifierModel {
                    v_drop: 0.1,
                    r_series: 100.0,
                },
                s2: SwitchModel::ConstantR { r_on: 10.0 },
            },
            n_sub: 8,
            n_fft,
            max_periods: 1 << 20,
            settling_factor_k: None,
            steady_tol: 0.01,
            metrics: MetricSet { adc: true, eh: false },
            seed: 0,
        }
    }

    #[test]
    fn one_code_per_period_and_increasing_time() {
        let r = run(&small(1e3, 1e-6)).unwrap();
        assert_eq!(r.trace.periods.len(), 64);
        assert_eq!(r.trace.len(), 2 * 64 * 8 + 1);
        assert!(r.trace.t.windows(2).all(|w| w[1] > w[0]));
        let m = r.adc_metrics.unwrap();
        assert!((m.enob - (m.sndr_db - 1.76) / 6.02).abs() < 1e-12);
    }

    #[test]
    fn phase_isolation() {
        let mut sc = small(1e3, 1e-6);
        sc.eh.rectifier.r_series = 1.0;
        let r = run(&sc).unwrap();
        let tr = &r.trace;
        for i in 1..tr.len() {
            match tr.phase[i] {
                PhaseKind::Acquisition => assert_eq!(tr.v_ceh[i], tr.v_ceh[i - 1]),
                PhaseKind::EnergyHarvest => assert_eq!(tr.v_dac[i], tr.v_dac[i - 1]),
            }
        }
        assert!(tr.v_ceh.last().unwrap() > &0.0);
    }

    #[test]
    fn nyquist_and_settling_are_enforced() {
        let mut sc = small(1e3, 1e-6);
        sc.coherent_cycles = None;
        sc.source = Stimulus::Sine(SineSource::new(0.4, 600.0, 0.0, 0.0, 50.0).unwrap());
        assert!(matches!(run(&sc), Err(EngineError::Validation(_))));

        let mut sc = small(1e3, 1e-6);
        sc.auto_r_on = false;
        sc.adc.s1 = SwitchModel::ConstantR { r_on: 1e9 };
        let err = run(&sc).unwrap_err().to_string();
        assert!(err.contains("does not settle"), "{err}");
    }

    #[test]
    fn ideal_dc_fixed_point() {
        let adc = AdcConfig::<f64>::new(8, 0.4, 1e-12, SwitchModel::Ideal).unwrap();
        // code center of code 200
        let v_dc = crate::sar_adc::dac_output(AdcCode(200), &adc);
        let table = crate::signal::PwlStimulus::new(vec![0.0, 1.0], vec![v_dc, v_dc]).unwrap();
        let sc = Scenario {
            source: Stimulus::Table(table),
            coherent_cycles: None,
            p_in_override: Some(1e-6),
            clock: ClockPlan::new(1e3, 0.1, 400).unwrap(),
            adc,
            auto_r_on: false,
            eh: EhConfig {
                c_eh: 1e-6,
                rectifier: RectifierModel {
                    v_drop: 0.0,
                    r_series: 1e-3,
                },
                s2: SwitchModel::Ideal,
            },
            n_sub: 4,
            n_fft: 0,
            max_periods: 1000,
            settling_factor_k: None,
            steady_tol: 0.01,
            metrics: MetricSet { adc: false, eh: true },
            seed: 0,
        };
        let r = run(&sc).unwrap();
        assert!(r.trace.periods.iter().all(|p| p.code == AdcCode(200)));
        let m = r.eh_metrics.unwrap();
        assert!((m.v_eh - v_dc).abs() < 1e-12);
        assert!((m.eta_v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_rows_keep_order_and_errors() {
        let base = small(1e3, 1e-6);
        let rows = sweep(&base, "alpha", &[0.1, 1.5, 0.2], 2).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].outcome.is_ok());
        assert!(matches!(rows[1].outcome, Err(EngineError::Validation(_))));
        assert_eq!(rows[2].value, 0.2);
        assert!(matches!(
            sweep(&base, "gain", &[1.0], 1),
            Err(EngineError::UnknownParameter(_))
        ));
        let single = sweep(&base, "c_eh", &[1e-6], 1).unwrap();
        let direct = RunSummary::from(&run(&base).unwrap());
        assert_eq!(single[0].outcome.as_ref().unwrap(), &direct);
        assert!(sweep(&base, "n_bits", &[7.5], 1).unwrap()[0].outcome.is_err());
    }

    #[test]
    fn runs_in_single_precision() {
        let sc = small(1e3, 1e-6);
        let sc32 = Scenario::<f32> {
            source: Stimulus::Sine(SineSource::new(0.4, 1.0, 0.0, 0.0, 50.0).unwrap()),
            coherent_cycles: sc.coherent_cycles,
            p_in_override: None,
            clock: ClockPlan::new(1e3, 0.1, 64).unwrap(),
            adc: AdcConfig::new(8, 0.4, 1e-12, SwitchModel::Ideal).unwrap(),
            auto_r_on: true,
            eh: EhConfig {
                c_eh: 1e-6,
                rectifier: RectifierModel {
                    v_drop: 0.1,
                    r_series: 100.0,
                },
                s2: SwitchModel::ConstantR { r_on: 10.0 },
            },
            n_sub: 8,
            n_fft: 64,
            max_periods: 1 << 20,
            settling_factor_k: None,
            steady_tol: 0.01,
            metrics: MetricSet { adc: true, eh: false },
            seed: 0,
        };
        let a = run(&sc).unwrap().adc_metrics.unwrap().enob;
        let b = run(&sc32).unwrap().adc_metrics.unwrap().enob as f64;
        assert!((a - b).abs() < 0.05, "{a} vs {b}");
    }
}
