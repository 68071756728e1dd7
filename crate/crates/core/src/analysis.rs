//! Coherent-sampling spectral metrology of converter output: rectangular
//! window FFT, SNDR and ENOB.

use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::sar_adc::{dac_output, AdcCode, AdcConfig};
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("record has {got} samples, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("record length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("signal bin {bin} outside 1..{half}")]
    BadSignalBin { bin: usize, half: usize },
    #[error("tone is not coherent with the record ({0} cycles)")]
    NotCoherent(f64),
}

/// One-sided power spectrum. `powers[k]` for `0 < k < n/2` folds the
/// negative-frequency image, so the bins sum to the record's mean square.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub powers: Vec<T>,
    pub n_fft: usize,
    pub f_s: T,
    pub signal_bin: usize,
}

impl<T: Real> Spectrum<T> {
    pub fn bin_frequency(&self, k: usize) -> T {
        T::from_count(k) * self.f_s / T::from_count(self.n_fft)
    }

    pub fn total_power(&self) -> T {
        self.powers.iter().fold(T::zero(), |a, &p| a + p)
    }

    /// Writes `bin,freq_hz,power_db`. Empty bins are floored at -300 dB.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin,freq_hz,power_db")?;
        let floor = T::lit(1e-30);
        for (k, &p) in self.powers.iter().enumerate() {
            let db = T::lit(10.0) * p.max(floor).log10();
            writeln!(out, "{},{},{}", k, self.bin_frequency(k).as_f64(), db.as_f64())?;
        }
        Ok(())
    }
}

/// Signal bin of a tone at `f_in` in an `n_fft` record, rejecting tones that
/// do not complete an integer number of cycles.
pub fn coherent_bin<T: Real>(f_in: T, f_s: T, n_fft: usize) -> Result<usize, AnalysisError> {
    let cycles = f_in * T::from_count(n_fft) / f_s;
    let bin = cycles.round();
    if (cycles - bin).abs() > T::lit(1e-6) {
        return Err(AnalysisError::NotCoherent(cycles.as_f64()));
    }
    bin.to_usize()
        .ok_or(AnalysisError::NotCoherent(cycles.as_f64()))
}

/// Spectrum of an arbitrary real record.
pub fn spectrum_of_samples<T: Real>(
    samples: &[T],
    f_s: T,
    signal_bin: usize,
) -> Result<Spectrum<T>, AnalysisError> {
    let n = samples.len();
    if !n.is_power_of_two() || n < 4 {
        return Err(AnalysisError::NotPowerOfTwo(n));
    }
    let half = n / 2;
    if signal_bin == 0 || signal_bin >= half {
        return Err(AnalysisError::BadSignalBin {
            bin: signal_bin,
            half,
        });
    }
    let mut buf: Vec<Complex<T>> = samples.iter().map(|&x| Complex::new(x, T::zero())).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let norm = T::from_count(n) * T::from_count(n);
    let two = T::lit(2.0);
    let powers = (0..=half)
        .map(|k| {
            let p = buf[k].norm_sqr() / norm;
            if k == 0 || k == half {
                p
            } else {
                two * p
            }
        })
        .collect();
    Ok(Spectrum {
        powers,
        n_fft: n,
        f_s,
        signal_bin,
    })
}

/// Spectrum of codes reconstructed through the DAC levels.
pub fn spectrum<T: Real>(
    codes: &[AdcCode],
    config: &AdcConfig<T>,
    f_s: T,
    expected_signal_bin: usize,
    n_fft: usize,
) -> Result<Spectrum<T>, AnalysisError> {
    if codes.len() != n_fft {
        return Err(AnalysisError::LengthMismatch {
            got: codes.len(),
            expected: n_fft,
        });
    }
    let samples: Vec<T> = codes.iter().map(|&c| dac_output(c, config)).collect();
    spectrum_of_samples(&samples, f_s, expected_signal_bin)
}

/// Signal bin power over every other non-DC bin up to Nyquist, in dB.
/// Returns `+inf` when the record carries no noise.
pub fn sndr<T: Real>(spec: &Spectrum<T>) -> T {
    let signal = spec.powers[spec.signal_bin];
    let noise = spec
        .powers
        .iter()
        .enumerate()
        .skip(1)
        .filter(|&(k, _)| k != spec.signal_bin)
        .fold(T::zero(), |a, (_, &p)| a + p);
    // FFT rounding leaves a residue of order n * eps^2 on a pure tone
    let residue = T::from_count(spec.n_fft) * T::epsilon() * T::epsilon();
    if noise <= signal * residue {
        return T::infinity();
    }
    T::lit(10.0) * (signal / noise).log10()
}

/// `(SNDR - 1.76) / 6.02`
pub fn enob<T: Real>(sndr_db: T) -> T {
    (sndr_db - T::lit(1.76)) / T::lit(6.02)
}

/// Ideal SNDR of an `n`-bit quantizer driven by a full-scale sine.
pub fn ideal_sndr_db<T: Real>(n_bits: u32) -> T {
    T::lit(6.02) * T::from_u32(n_bits).expect("bits") + T::lit(1.76)
}
