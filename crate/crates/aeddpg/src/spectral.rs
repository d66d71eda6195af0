//! Periodogram slope estimate used to verify the noise spectra.

use aeddpg_core::Error as CoreError;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const SEGMENTS: usize = 16;
pub const MIN_SAMPLES: usize = 1 << 12;
/// Largest tolerated distance, in natural-log units, of any bin's power from
/// the fitted power law. A tone sits orders of magnitude above the line
/// while averaged noise bins stay within a small factor of it.
pub const MAX_LOG_RESIDUAL: f64 = 4.6;

/// Averaged periodogram over `SEGMENTS` unwindowed, non-overlapping segments.
/// Returns power for bins `0..=len/2` of one segment.
pub fn averaged_periodogram(samples: &[f64]) -> Vec<f64> {
    let seg = samples.len() / SEGMENTS;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg);
    let mut power = vec![0.0; seg / 2 + 1];
    let mut buf = vec![Complex::new(0.0, 0.0); seg];
    for chunk in samples.chunks_exact(seg) {
        for (b, x) in buf.iter_mut().zip(chunk) {
            *b = Complex::new(*x, 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p += c.norm_sqr();
        }
    }
    power.iter_mut().for_each(|p| *p /= SEGMENTS as f64);
    power
}

/// Least-squares slope of log power against log frequency, over bins `1..=len/4`
/// of the averaged periodogram (DC and the top octave are excluded).
pub fn psd_slope(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < MIN_SAMPLES || !n.is_power_of_two() {
        return Err(CoreError::InvalidArgument(format!(
            "psd_slope needs a power-of-two length of at least {MIN_SAMPLES}, got {n}"
        ))
        .into());
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::InvalidArgument("psd_slope input is not finite".into()).into());
    }
    let power = averaged_periodogram(samples);
    let seg = n / SEGMENTS;
    let band = &power[1..=seg / 4];
    if band.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::Core(CoreError::NonBroadband("band contains empty bins".into())));
    }
    let pts: Vec<(f64, f64)> = band
        .iter()
        .enumerate()
        .map(|(i, p)| (((i + 1) as f64 / seg as f64).ln(), p.ln()))
        .collect();
    let m = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let worst = pts
        .iter()
        .map(|(x, y)| (y - my - slope * (x - mx)).abs())
        .fold(0.0, f64::max);
    if worst > MAX_LOG_RESIDUAL {
        return Err(Error::Core(CoreError::NonBroadband(format!(
            "a bin lies {:.1} log units off the fitted power law",
            worst
        ))));
    }
    Ok(slope)
}
