//! GFSK baseband: BT = 0.5 Gaussian pulse shaping, ±250 kHz deviation at
//! 1 Msym/s, constant envelope. Demodulation is a phase discriminator on
//! consecutive sample pairs at 2 MS/s.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{AoaError, Result};
use crate::phy::{CteConfig, IqStream, FREQ_DEVIATION_HZ, GAUSSIAN_BT, SYMBOL_RATE};

/// Gaussian lowpass taps spanning three symbol periods, normalized to unit
/// sum so a long bit run settles at full deviation.
fn gaussian_taps(oversample: usize) -> Vec<f64> {
    let b = GAUSSIAN_BT * SYMBOL_RATE; // 3 dB bandwidth in Hz
    let fs = SYMBOL_RATE * oversample as f64;
    let half = (3 * oversample) / 2;
    let alpha = 2.0 * PI * PI * b * b / (2.0_f64).ln();
    let mut taps: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let t = (i as f64 - half as f64) / fs;
            (-alpha * t * t).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Modulate a bit sequence at `oversample` samples per symbol.
///
/// The output starts at t0 = 0 on channel 0; callers retag the channel.
pub fn gfsk_modulate(bits: &[u8], oversample: usize) -> IqStream {
    assert!(oversample >= 2, "oversample must be at least 2");
    let fs = SYMBOL_RATE * oversample as f64;
    if bits.is_empty() {
        return IqStream::new(Vec::new(), fs, 0.0, 0);
    }

    let taps = gaussian_taps(oversample);
    let half = taps.len() / 2;
    let n = bits.len() * oversample;

    // NRZ upsample with edge padding so the filter settles at both ends.
    let nrz = |idx: isize| -> f64 {
        let bit_idx = (idx.div_euclid(oversample as isize)).clamp(0, bits.len() as isize - 1);
        if bits[bit_idx as usize] == 1 {
            1.0
        } else {
            -1.0
        }
    };

    let shaped = |i: isize| -> f64 {
        let mut f = 0.0;
        for (k, &h) in taps.iter().enumerate() {
            f += h * nrz(i + k as isize - half as isize);
        }
        f
    };

    // trapezoidal phase integration, so the increment between samples i-1
    // and i represents the frequency centered between them
    let mut phase = 0.0;
    let scale = 2.0 * PI * FREQ_DEVIATION_HZ / fs;
    let mut prev_f = shaped(-1);
    let samples: Vec<Complex64> = (0..n)
        .map(|i| {
            let f = shaped(i as isize);
            phase += scale * (prev_f + f) / 2.0;
            prev_f = f;
            Complex64::from_polar(1.0, phase)
        })
        .collect();
    IqStream::new(samples, fs, 0.0, 0)
}

/// Append the Constant Tone Extension: a +250 kHz tone, phase-continuous
/// with the last modulated sample.
pub fn append_cte(iq: &IqStream, cte: &CteConfig) -> Result<IqStream> {
    cte.validate()?;
    let fs = iq.sample_rate;
    let dphi = 2.0 * PI * FREQ_DEVIATION_HZ / fs;
    let n = (cte.duration_us as f64 * fs / 1e6).round() as usize;
    let (mut phase, mag) = match iq.samples.last() {
        Some(last) => (last.arg(), last.norm()),
        None => (0.0, 1.0),
    };
    let mut out = iq.clone();
    out.samples.reserve(n);
    for _ in 0..n {
        phase += dphi;
        out.samples.push(Complex64::from_polar(mag, phase));
    }
    Ok(out)
}

/// Phase increments between consecutive samples.
pub(crate) fn phase_increments(samples: &[Complex64]) -> Vec<f64> {
    samples
        .windows(2)
        .map(|w| (w[1] * w[0].conj()).arg())
        .collect()
}

/// Bit decisions from the accumulated per-symbol phase increment at
/// 2 samples per symbol.
pub fn gfsk_demodulate(iq: &IqStream) -> Vec<u8> {
    assert!(
        (iq.sample_rate - 2.0 * SYMBOL_RATE).abs() < 1e-3,
        "demodulator expects 2 MS/s"
    );
    if iq.samples.len() < 2 {
        return Vec::new();
    }
    let d = phase_increments(&iq.samples);
    // symbol k spans increments d[2k] and d[2k+1]; the final symbol may be
    // missing its trailing increment
    let nbits = iq.samples.len() / 2;
    (0..nbits)
        .map(|k| {
            let acc = d.get(2 * k).copied().unwrap_or(0.0)
                + d.get(2 * k + 1).copied().unwrap_or(0.0);
            u8::from(acc > 0.0)
        })
        .collect()
}

/// Keep every `factor`-th sample. The tone and GFSK signals occupy well under
/// half the decimated rate, so no anti-alias filter is applied.
pub fn decimate(iq: &IqStream, factor: usize) -> Result<IqStream> {
    if factor == 0 {
        return Err(AoaError::Config("decimation factor must be >= 1".into()));
    }
    let samples = iq.samples.iter().step_by(factor).copied().collect();
    let mut out = IqStream::new(samples, iq.sample_rate / factor as f64, iq.t0, iq.center_channel);
    out.valid = iq
        .valid
        .as_ref()
        .map(|m| m.iter().step_by(factor).copied().collect());
    Ok(out)
}
