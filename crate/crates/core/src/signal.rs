//! Analog stimulus: sinusoidal sources, coherent tone selection, input power
//! bookkeeping and piecewise-linear waveforms imported from CSV.

use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("invalid source parameter: {0}")]
    InvalidSource(&'static str),
    #[error("record length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("cycle count {m} must be odd and in 1..{half} for a {n}-point record")]
    BadCycleCount { m: usize, n: usize, half: usize },
    #[error("input power must be positive")]
    NonPositivePower,
    #[error("stimulus csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("stimulus csv: {0}")]
    Io(String),
}

/// `v(t) = dc_offset + amplitude * sin(2*pi*frequency*t + phase)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineSource<T> {
    pub amplitude: T,
    pub frequency: T,
    pub phase: T,
    pub dc_offset: T,
    pub source_resistance: T,
}

impl<T: Real> SineSource<T> {
    pub fn new(
        amplitude: T,
        frequency: T,
        phase: T,
        dc_offset: T,
        source_resistance: T,
    ) -> Result<Self, SignalError> {
        let src = Self {
            amplitude,
            frequency,
            phase,
            dc_offset,
            source_resistance,
        };
        src.validate()?;
        Ok(src)
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.amplitude > T::zero() && self.amplitude.is_finite()) {
            return Err(SignalError::InvalidSource("amplitude must be positive"));
        }
        if !(self.frequency > T::zero() && self.frequency.is_finite()) {
            return Err(SignalError::InvalidSource("frequency must be positive"));
        }
        if !(self.source_resistance > T::zero() && self.source_resistance.is_finite()) {
            return Err(SignalError::InvalidSource(
                "source resistance must be positive",
            ));
        }
        if !self.phase.is_finite() || !self.dc_offset.is_finite() {
            return Err(SignalError::InvalidSource("phase and offset must be finite"));
        }
        Ok(())
    }

    pub fn sample_at(&self, t: T) -> T {
        let arg = T::TAU() * self.frequency * t + self.phase;
        let v = self.dc_offset + self.amplitude * arg.sin();
        // sin() can exceed 1 by an ulp on some platforms
        v.max(self.dc_offset - self.amplitude)
            .min(self.dc_offset + self.amplitude)
    }
}

/// Picks the tone that places exactly `m_cycles` periods in an `n_fft` record.
pub fn coherent_frequency<T: Real>(f_s: T, n_fft: usize, m_cycles: usize) -> Result<T, SignalError> {
    if !n_fft.is_power_of_two() || n_fft < 4 {
        return Err(SignalError::NotPowerOfTwo(n_fft));
    }
    let half = n_fft / 2;
    if m_cycles == 0 || m_cycles >= half || m_cycles % 2 == 0 {
        return Err(SignalError::BadCycleCount {
            m: m_cycles,
            n: n_fft,
            half,
        });
    }
    Ok(T::from_count(m_cycles) * f_s / T::from_count(n_fft))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerProvenance {
    Configured,
    ComputedFromSource,
}

/// RMS input power used as the energy reference for conversion efficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputPowerSpec<T> {
    pub p_in_rms: T,
    pub provenance: PowerProvenance,
}

impl<T: Real> InputPowerSpec<T> {
    /// A measured or otherwise externally supplied power figure.
    pub fn configured(p_in_rms: T) -> Result<Self, SignalError> {
        if !(p_in_rms > T::zero() && p_in_rms.is_finite()) {
            return Err(SignalError::NonPositivePower);
        }
        Ok(Self {
            p_in_rms,
            provenance: PowerProvenance::Configured,
        })
    }
}

/// Available sine power into the source resistance, `A^2 / (2 R)`.
pub fn rms_power<T: Real>(source: &SineSource<T>) -> InputPowerSpec<T> {
    InputPowerSpec {
        p_in_rms: source.amplitude * source.amplitude
            / (T::lit(2.0) * source.source_resistance),
        provenance: PowerProvenance::ComputedFromSource,
    }
}

/// Waveform given by `(time, volts)` breakpoints with linear interpolation.
/// Outside the table the end values are held.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlStimulus<T> {
    times: Vec<T>,
    volts: Vec<T>,
}

impl<T: Real> PwlStimulus<T> {
    pub fn new(times: Vec<T>, volts: Vec<T>) -> Result<Self, SignalError> {
        if times.len() != volts.len() || times.len() < 2 {
            return Err(SignalError::Csv {
                line: 0,
                msg: "need at least two rows".into(),
            });
        }
        for (i, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(SignalError::Csv {
                    line: i + 3,
                    msg: "time must be strictly increasing".into(),
                });
            }
        }
        Ok(Self { times, volts })
    }

    /// Parses a `time_s,volts` CSV with a header row.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, SignalError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers().map_err(|e| SignalError::Io(e.to_string()))?;
        if headers.len() != 2 || &headers[0] != "time_s" || &headers[1] != "volts" {
            return Err(SignalError::Csv {
                line: 1,
                msg: "expected header `time_s,volts`".into(),
            });
        }
        let mut times = Vec::new();
        let mut volts = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| SignalError::Csv {
                line,
                msg: e.to_string(),
            })?;
            let parse = |s: &str| -> Result<T, SignalError> {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .map(T::lit)
                    .ok_or_else(|| SignalError::Csv {
                        line,
                        msg: format!("not a finite number: {s:?}"),
                    })
            };
            times.push(parse(&rec[0])?);
            volts.push(parse(&rec[1])?);
        }
        Self::new(times, volts)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, SignalError> {
        let file = std::fs::File::open(path)
            .map_err(|e| SignalError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn sample_at(&self, t: T) -> T {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.volts[0];
        }
        if t >= self.times[n - 1] {
            return self.volts[n - 1];
        }
        // first index with times[i] > t
        let i = self.times.partition_point(|&x| x <= t);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (v0, v1) = (self.volts[i - 1], self.volts[i]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn peak_magnitude(&self) -> T {
        self.volts.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Input waveform driving both branches.
#[derive(Debug, Clone, PartialEq)]
pub enum Stimulus<T> {
    Sine(SineSource<T>),
    Table(PwlStimulus<T>),
}

impl<T: Real> Stimulus<T> {
    pub fn sample_at(&self, t: T) -> T {
        match self {
            Stimulus::Sine(s) => s.sample_at(t),
            Stimulus::Table(p) => p.sample_at(t),
        }
    }

    /// Peak input magnitude, the reference for voltage efficiency.
    pub fn peak_magnitude(&self) -> T {
        match self {
            Stimulus::Sine(s) => s.dc_offset.abs() + s.amplitude,
            Stimulus::Table(p) => p.peak_magnitude(),
        }
    }

    pub fn as_sine(&self) -> Option<&SineSource<T>> {
        match self {
            Stimulus::Sine(s) => Some(s),
            Stimulus::Table(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(amp: f64, f: f64) -> SineSource<f64> {
        SineSource::new(amp, f, 0.0, 0.0, 50.0).unwrap()
    }

    #[test]
    fn sample_at_quarter_period_and_origin() {
        let s = sine(0.4, 100.0);
        assert_eq!(s.sample_at(0.0), 0.0);
        assert!((s.sample_at(2.5e-3) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn half_period_zero_crossing() {
        let f = 100.098;
        let s = sine(0.4, f);
        let t = 1.0 / (2.0 * f);
        let direct = 0.4 * (2.0 * std::f64::consts::PI * f * t).sin();
        assert!(s.sample_at(t).abs() < 1e-12);
        assert!((s.sample_at(t) - direct).abs() < 1e-15);
    }

    #[test]
    fn coherent_frequency_examples() {
        assert_eq!(coherent_frequency(10e3, 4096, 41).unwrap(), 100.09765625);
        assert_eq!(coherent_frequency(10e3, 4096, 1).unwrap(), 2.44140625);
        assert!(coherent_frequency(40e6, 4096, 2048).is_err());
        assert!(coherent_frequency(10e3, 4096, 42).is_err());
        assert!(coherent_frequency(10e3, 4000, 41).is_err());
    }

    #[test]
    fn rms_power_computed_and_configured() {
        let p = rms_power(&sine(0.4, 100.0));
        assert!((p.p_in_rms - 1.6e-3).abs() < 1e-15);
        assert_eq!(p.provenance, PowerProvenance::ComputedFromSource);
        let c = InputPowerSpec::configured(27.7e-6).unwrap();
        assert_eq!(c.p_in_rms, 27.7e-6);
        assert_eq!(c.provenance, PowerProvenance::Configured);
        assert_eq!(
            InputPowerSpec::configured(27.255e-6).unwrap().p_in_rms,
            27.255e-6
        );
        assert!(InputPowerSpec::<f64>::configured(0.0).is_err());
    }

    #[test]
    fn rejects_invalid_sources() {
        assert!(SineSource::new(0.0, 1.0, 0.0, 0.0, 50.0).is_err());
        assert!(SineSource::new(1.0, -1.0, 0.0, 0.0, 50.0).is_err());
        assert!(SineSource::new(1.0, 1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn integer_cycles_in_coherent_record() {
        let f_s = 10e3;
        let n = 4096;
        let f = coherent_frequency(f_s, n, 41).unwrap();
        let s = sine(0.4, f);
        let t_end = n as f64 / f_s;
        assert!((s.sample_at(0.0) - s.sample_at(t_end)).abs() < 1e-9);
    }

    #[test]
    fn rms_of_whole_periods() {
        // 2^20 samples over exactly 2^20/2^10 = 1024 periods
        let n: usize = 1 << 20;
        let s = sine(0.4, 1.0);
        let dt = 1.0 / 1024.0;
        let ms: f64 = (0..n).map(|i| s.sample_at(i as f64 * dt).powi(2)).sum::<f64>() / n as f64;
        let rms = ms.sqrt();
        let expected = 0.4 / 2f64.sqrt();
        assert!(((rms - expected) / expected).abs() < 1e-6);
    }

    #[test]
    fn pwl_csv_interpolates_and_rejects_disorder() {
        let text = "time_s,volts\n0,0\n1e-3,0.2\n2e-3,-0.2\n";
        let p = PwlStimulus::<f64>::from_csv_reader(text.as_bytes()).unwrap();
        assert!((p.sample_at(0.5e-3) - 0.1).abs() < 1e-15);
        assert!((p.sample_at(1.5e-3)).abs() < 1e-15);
        assert_eq!(p.sample_at(5e-3), -0.2);
        assert_eq!(p.peak_magnitude(), 0.2);

        let bad = "time_s,volts\n0,0\n1e-3,0.2\n1e-3,0.1\n";
        assert!(matches!(
            PwlStimulus::<f64>::from_csv_reader(bad.as_bytes()),
            Err(SignalError::Csv { line: 4, .. })
        ));
        let bad_header = "t,v\n0,0\n1,1\n";
        assert!(PwlStimulus::<f64>::from_csv_reader(bad_header.as_bytes()).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let s = SineSource::<f32>::new(0.4, 100.0, 0.0, 0.0, 50.0).unwrap();
        assert!((s.sample_at(2.5e-3) - 0.4).abs() < 1e-6);
    }
}
