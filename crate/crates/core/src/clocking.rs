//! Two-phase sampling clock: each period starts with acquisition (S1 closed)
//! and spends the remainder harvesting (S2 closed).

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum ClockError {
    #[error("sampling rate must be positive and finite")]
    BadRate,
    #[error("acquisition fraction must lie strictly between 0 and 1, got {0}")]
    BadAlpha(f64),
    #[error("plan needs at least one period")]
    NoPeriods,
    #[error("time {0} s is outside the plan")]
    OutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseKind {
    Acquisition,
    EnergyHarvest,
}

impl PhaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PhaseKind::Acquisition => "acq",
            PhaseKind::EnergyHarvest => "eh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSegment<T> {
    pub t_start: T,
    pub t_end: T,
    pub kind: PhaseKind,
    pub period_index: usize,
}

impl<T: Real> PhaseSegment<T> {
    pub fn duration(&self) -> T {
        self.t_end - self.t_start
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockPlan<T> {
    pub f_s: T,
    pub alpha: T,
    pub n_periods: usize,
}

impl<T: Real> ClockPlan<T> {
    pub fn new(f_s: T, alpha: T, n_periods: usize) -> Result<Self, ClockError> {
        let plan = Self {
            f_s,
            alpha,
            n_periods,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), ClockError> {
        if !(self.f_s > T::zero() && self.f_s.is_finite()) {
            return Err(ClockError::BadRate);
        }
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return Err(ClockError::BadAlpha(self.alpha.as_f64()));
        }
        if self.n_periods == 0 {
            return Err(ClockError::NoPeriods);
        }
        Ok(())
    }

    pub fn t_s(&self) -> T {
        T::one() / self.f_s
    }

    pub fn t_aq(&self) -> T {
        self.alpha * self.t_s()
    }

    /// Harvest window; the whole hold interval is harvested.
    pub fn t_eh(&self) -> T {
        self.t_s() - self.t_aq()
    }

    pub fn duration(&self) -> T {
        self.period_start(self.n_periods)
    }

    /// Start of period `k`, computed from the index so long runs do not drift.
    pub fn period_start(&self, k: usize) -> T {
        T::from_count(k) * self.t_s()
    }

    /// Acquisition/harvest boundary inside period `k`.
    pub fn acquisition_end(&self, k: usize) -> T {
        self.period_start(k) + self.t_aq()
    }

    pub fn segment(&self, k: usize, kind: PhaseKind) -> PhaseSegment<T> {
        let (t_start, t_end) = match kind {
            PhaseKind::Acquisition => (self.period_start(k), self.acquisition_end(k)),
            PhaseKind::EnergyHarvest => (self.acquisition_end(k), self.period_start(k + 1)),
        };
        PhaseSegment {
            t_start,
            t_end,
            kind,
            period_index: k,
        }
    }

    /// All `2 * n_periods` segments in time order.
    pub fn segments(&self) -> impl Iterator<Item = PhaseSegment<T>> + '_ {
        (0..self.n_periods).flat_map(move |k| {
            [
                self.segment(k, PhaseKind::Acquisition),
                self.segment(k, PhaseKind::EnergyHarvest),
            ]
        })
    }

    /// Segment containing `t`; a boundary belongs to the segment it starts.
    pub fn phase_at(&self, t: T) -> Result<PhaseSegment<T>, ClockError> {
        if !(t >= T::zero() && t < self.duration()) {
            return Err(ClockError::OutOfRange(t.as_f64()));
        }
        let mut k = (t * self.f_s).floor().to_usize().unwrap_or(0);
        // floor(t * f_s) can be off by one against the index-based boundaries
        if k > 0 && t < self.period_start(k) {
            k -= 1;
        } else if k + 1 < self.n_periods && t >= self.period_start(k + 1) {
            k += 1;
        }
        k = k.min(self.n_periods - 1);
        let kind = if t < self.acquisition_end(k) {
            PhaseKind::Acquisition
        } else {
            PhaseKind::EnergyHarvest
        };
        Ok(self.segment(k, kind))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn low_frequency_split() {
        let plan = ClockPlan::<f64>::new(10e3, 0.1, 1).unwrap();
        let segs: Vec<_> = plan.segments().collect();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].kind, PhaseKind::Acquisition);
        assert!((segs[0].t_end - 10e-6).abs() < 1e-18);
        assert_eq!(segs[1].kind, PhaseKind::EnergyHarvest);
        assert!((segs[1].t_end - 100e-6).abs() < 1e-18);
    }

    #[test]
    fn high_frequency_split() {
        let plan = ClockPlan::<f64>::new(40e6, 0.1, 1).unwrap();
        assert!((plan.t_aq() - 2.5e-9).abs() < 1e-22);
        assert!((plan.t_s() - 25e-9).abs() < 1e-22);
        assert!((plan.t_eh() - 22.5e-9).abs() < 1e-22);
    }

    #[test]
    fn symmetric_split() {
        let plan = ClockPlan::<f64>::new(1.0, 0.5, 1).unwrap();
        let segs: Vec<_> = plan.segments().collect();
        assert_eq!((segs[0].t_start, segs[0].t_end), (0.0, 0.5));
        assert_eq!((segs[1].t_start, segs[1].t_end), (0.5, 1.0));
    }

    #[test]
    fn phase_at_examples() {
        let plan = ClockPlan::<f64>::new(10e3, 0.1, 2).unwrap();
        let s = plan.phase_at(5e-6).unwrap();
        assert_eq!((s.kind, s.period_index), (PhaseKind::Acquisition, 0));
        let s = plan.phase_at(plan.acquisition_end(0)).unwrap();
        assert_eq!((s.kind, s.period_index), (PhaseKind::EnergyHarvest, 0));
        let s = plan.phase_at(plan.period_start(1)).unwrap();
        assert_eq!((s.kind, s.period_index), (PhaseKind::Acquisition, 1));
        assert!(plan.phase_at(plan.duration()).is_err());
        assert!(plan.phase_at(-1e-9).is_err());
    }

    #[test]
    fn rejects_bad_plans() {
        assert!(ClockPlan::<f64>::new(10e3, 1.0, 1).is_err());
        assert!(ClockPlan::<f64>::new(10e3, 0.0, 1).is_err());
        assert!(ClockPlan::<f64>::new(0.0, 0.1, 1).is_err());
        assert!(ClockPlan::<f64>::new(10e3, 0.1, 0).is_err());
    }

    proptest! {
        #[test]
        fn segments_tile_the_run(f_s in 1.0f64..1e9, alpha in 0.01f64..0.99, n in 1usize..200) {
            let plan = ClockPlan::<f64>::new(f_s, alpha, n).unwrap();
            let segs: Vec<_> = plan.segments().collect();
            prop_assert_eq!(segs.len(), 2 * n);
            prop_assert_eq!(segs[0].t_start, 0.0);
            for w in segs.windows(2) {
                prop_assert_eq!(w[0].t_end, w[1].t_start);
            }
            for s in &segs {
                prop_assert!(s.t_start < s.t_end);
            }
            let total: f64 = segs.iter().map(|s| s.duration()).sum();
            let expected = n as f64 / f_s;
            prop_assert!((total - expected).abs() <= 1e-12 * expected);
            let acq: f64 = segs
                .iter()
                .filter(|s| s.kind == PhaseKind::Acquisition)
                .map(|s| s.duration())
                .sum();
            prop_assert!((acq / total - alpha).abs() <= 1e-12);
        }

        #[test]
        fn phase_at_agrees_with_segments(f_s in 1.0f64..1e8, alpha in 0.01f64..0.99, n in 1usize..50, u in 0.0f64..1.0) {
            let plan = ClockPlan::<f64>::new(f_s, alpha, n).unwrap();
            let t = u * plan.duration();
            prop_assume!(t < plan.duration());
            let seg = plan.phase_at(t).unwrap();
            prop_assert!(seg.t_start <= t && t < seg.t_end);
        }
    }
}
