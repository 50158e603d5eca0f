//! Harmonic content of a periodic torque waveform.

use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// DC component tau_0.
    pub mean: f64,
    /// Single-sided amplitudes; `amplitudes[i - 1]` is harmonic `i`, for
    /// every bin strictly below Nyquist.
    pub amplitudes: Vec<f64>,
    /// Signed Nyquist coefficient for even lengths (not a harmonic of the sum).
    pub nyquist: Option<f64>,
    /// Number of harmonics `n` summed into the THD.
    pub harmonic_count: usize,
    /// `sum_{i=1..n} tau_i / tau_0` (amplitude sum, not RMS).
    pub thd: f64,
}

impl Spectrum {
    pub fn amplitude(&self, harmonic: usize) -> f64 {
        match harmonic {
            0 => self.mean.abs(),
            h => self.amplitudes.get(h - 1).copied().unwrap_or(0.0),
        }
    }

    /// `mean^2 + sum amp^2 / 2 (+ nyquist^2)`, equal to the mean square of
    /// the sampled signal.
    pub fn power(&self) -> f64 {
        self.mean * self.mean
            + self.amplitudes.iter().map(|a| 0.5 * a * a).sum::<f64>()
            + self.nyquist.map_or(0.0, |v| v * v)
    }

    /// CSV with columns `harmonic,amplitude`; row 0 is the mean.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "harmonic,amplitude")?;
        writeln!(w, "0,{:e}", self.mean)?;
        for (i, a) in self.amplitudes.iter().enumerate() {
            writeln!(w, "{},{:e}", i + 1, a)?;
        }
        Ok(())
    }
}

/// DC value, single-sided amplitudes below Nyquist and the Nyquist term.
pub fn harmonics(signal: &[f64]) -> Result<(f64, Vec<f64>, Option<f64>)> {
    let n = signal.len();
    if n == 0 {
        return Err(Error::Shape("empty signal".into()));
    }
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    let below = (n - 1) / 2;
    let amplitudes = (1..=below).map(|i| 2.0 * buf[i].norm() * scale).collect();
    let nyquist = (n.is_multiple_of(2) && n > 1).then(|| buf[n / 2].re * scale);
    Ok((buf[0].re * scale, amplitudes, nyquist))
}

/// Spectrum and THD over `harmonic_count` harmonics (default: all bins
/// below Nyquist). The signal must cover exactly one period. A mean at
/// round-off level relative to the signal peak counts as zero.
pub fn spectrum_and_thd(signal: &[f64], harmonic_count: Option<usize>) -> Result<Spectrum> {
    let (mean, amplitudes, nyquist) = harmonics(signal)?;
    let n = harmonic_count.unwrap_or(amplitudes.len());
    if n > amplitudes.len() {
        return Err(Error::Shape(format!(
            "{n} harmonics requested, {} samples resolve {}",
            signal.len(),
            amplitudes.len()
        )));
    }
    let peak = signal.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if mean.abs() <= 64.0 * f64::EPSILON * peak {
        return Err(Error::ThdUndefined);
    }
    let thd = amplitudes[..n].iter().sum::<f64>() / mean;
    Ok(Spectrum {
        mean,
        amplitudes,
        nyquist,
        harmonic_count: n,
        thd,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn wave(n: usize, dc: f64, parts: &[(usize, f64, f64)]) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let x = 2.0 * PI * k as f64 / n as f64;
                dc + parts
                    .iter()
                    .map(|&(h, a, ph)| a * (h as f64 * x + ph).cos())
                    .sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn constant_signal_has_no_distortion() {
        let s = spectrum_and_thd(&[2.5; 30], None).unwrap();
        assert!((s.mean - 2.5).abs() < 1e-15);
        assert!(s.amplitudes.iter().all(|a| a.abs() < 1e-14));
        assert!(s.thd.abs() < 1e-14);
    }

    #[test]
    fn single_harmonic() {
        let s = spectrum_and_thd(&wave(216, 4.0, &[(72, 0.4, 0.0)]), None).unwrap();
        assert!((s.mean - 4.0).abs() < 1e-13);
        assert!((s.amplitude(72) - 0.4).abs() < 1e-13);
        assert!((s.thd - 0.1).abs() < 1e-13);
    }

    #[test]
    fn thd_sums_amplitudes_not_rms() {
        let s = spectrum_and_thd(&wave(100, 4.0, &[(3, 0.3, 0.4), (7, 0.4, -1.0)]), None).unwrap();
        assert!((s.thd - 0.175).abs() < 1e-13);
        let partial =
            spectrum_and_thd(&wave(100, 4.0, &[(3, 0.3, 0.4), (7, 0.4, -1.0)]), Some(5)).unwrap();
        assert!((partial.thd - 0.075).abs() < 1e-13);
    }

    #[test]
    fn zero_mean_is_an_error() {
        assert!(matches!(
            spectrum_and_thd(&wave(12, 0.0, &[(1, 1.0, 0.0)]), None),
            Err(Error::ThdUndefined)
        ));
    }

    #[test]
    fn too_many_harmonics() {
        assert!(spectrum_and_thd(&[1.0; 10], Some(5)).is_err());
        assert!(spectrum_and_thd(&[1.0; 10], Some(4)).is_ok());
    }
}
