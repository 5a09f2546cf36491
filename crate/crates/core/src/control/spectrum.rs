use std::f64::consts::PI;

use crate::error::{FvwError, Result};

/// Periodogram of `signal` (sampled every `h`) at the frequencies `j / (L h)`,
/// `j = 1..=L/2`, after removing the mean. Direct DFT.
pub fn periodogram(signal: &[f64], h: f64) -> Vec<(f64, f64)> {
    let n = signal.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    (1..=n / 2)
        .map(|j| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &x) in signal.iter().enumerate() {
                let phase = 2.0 * PI * (j * k) as f64 / n as f64;
                re += (x - mean) * phase.cos();
                im -= (x - mean) * phase.sin();
            }
            (j as f64 / (n as f64 * h), (re * re + im * im) / n as f64)
        })
        .collect()
}

/// Frequency of the largest non-DC periodogram peak.
pub fn dominant_frequency(signal: &[f64], h: f64) -> Result<f64> {
    if signal.len() < 16 {
        return Err(FvwError::Analysis(format!(
            "at least 16 samples are needed, got {}",
            signal.len()
        )));
    }
    if !(h > 0.0) || signal.iter().any(|v| !v.is_finite()) {
        return Err(FvwError::Analysis("signal and sample spacing must be finite".into()));
    }
    let scale = signal
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let spec = periodogram(signal, h);
    let (f, p) = spec
        .iter()
        .copied()
        .fold((0.0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    if p <= 1e-24 * scale * scale * signal.len() as f64 {
        return Err(FvwError::Analysis("signal has no periodic component".into()));
    }
    Ok(f)
}
