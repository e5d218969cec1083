//! Direction-finding receiver: CTE sample extraction, linear phase-model
//! fitting over the reference period, phase-delay estimation against slot
//! samples, angle computation, chain-offset calibration, and cross-channel
//! aggregation.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;

use crate::airsim::SwitchPattern;
use crate::error::{AoaError, Result};
use crate::phy::{CteTiming, IqStream};

/// Wrap an angle to (-pi, pi].
pub fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    p
}

/// Circular mean of a set of phases, radians in (-pi, pi].
pub fn circular_mean(phases: &[f64]) -> f64 {
    let acc: Complex64 = phases
        .iter()
        .map(|&p| Complex64::from_polar(1.0, p))
        .sum();
    acc.arg()
}

/// Linear model of the CTE tone phase built from the 8 reference samples.
#[derive(Debug, Clone, Copy)]
pub struct PhaseModel {
    /// rad/s
    pub slope: f64,
    /// Phase at `t_ref`, radians (unwrapped).
    pub intercept: f64,
    /// Time of the first reference sample on the stream clock, seconds.
    pub t_ref: f64,
    pub residual_rms: f64,
}

impl PhaseModel {
    pub fn predict(&self, t: f64) -> f64 {
        self.intercept + self.slope * (t - self.t_ref)
    }
}

/// One per-packet AoA measurement.
#[derive(Debug, Clone, Copy)]
pub struct AoaMeasurement {
    /// Phase delay, radians wrapped to (-pi, pi].
    pub phi: f64,
    /// Derived angle, degrees in [0, 180]. Boundary-valued when clamped.
    pub theta_deg: f64,
    pub channel_index: u8,
    pub packet_seq: u32,
    pub crc_valid: bool,
    /// Set when |lambda*phi/(2*pi*d)| exceeded 1 before clamping.
    pub clamped: bool,
}

/// A timed IQ sample taken in one sample slot.
#[derive(Debug, Clone, Copy)]
pub struct SlotSample {
    pub antenna: usize,
    /// Time on the stream clock, seconds.
    pub time: f64,
    pub value: Complex64,
}

/// Reference-period and sample-slot samples extracted from a received CTE.
#[derive(Debug, Clone)]
pub struct CteSamples {
    pub reference: Vec<(f64, Complex64)>,
    pub slots: Vec<SlotSample>,
}

/// Pull the 8 reference samples (decimated to 1 MS/s) and the per-slot
/// samples off a 2 MS/s stream. Works regardless of the CRC outcome: the CTE
/// is not subject to error checking.
pub fn extract_cte(
    iq: &IqStream,
    timing: &CteTiming,
    pattern: &SwitchPattern,
) -> Result<CteSamples> {
    let fs = iq.sample_rate;
    if iq.samples.len() < timing.cte_end(fs) {
        return Err(AoaError::TruncatedCte);
    }
    let reference = timing
        .reference_sample_indices(fs)
        .into_iter()
        .map(|i| (iq.sample_time(i), iq.samples[i]))
        .collect();
    let slots = timing
        .slot_pairs(fs)
        .into_iter()
        .enumerate()
        .map(|(j, (_, idx))| SlotSample {
            antenna: pattern
                .antenna_for_slot(j)
                .unwrap_or(pattern.reference_antenna),
            time: iq.sample_time(idx),
            value: iq.samples[idx],
        })
        .collect();
    Ok(CteSamples { reference, slots })
}

/// Least-squares line through the unwrapped reference-sample phases.
///
/// Sequential unwrap is safe here: the true per-sample increment at 1 MS/s is
/// pi/2, far from the +-pi correction boundary up to a CFO of ~230 kHz.
pub fn fit_phase_model(reference: &[(f64, Complex64)]) -> Result<PhaseModel> {
    if reference.len() < 2 {
        return Err(AoaError::InsufficientData(
            "phase model needs at least 2 reference samples".into(),
        ));
    }
    if reference.iter().any(|(_, v)| v.norm() == 0.0) {
        return Err(AoaError::DegenerateSample);
    }
    let t_ref = reference[0].0;
    let mut phases: Vec<f64> = reference.iter().map(|(_, v)| v.arg()).collect();
    for i in 1..phases.len() {
        let mut d = phases[i] - phases[i - 1];
        while d > PI {
            d -= 2.0 * PI;
        }
        while d <= -PI {
            d += 2.0 * PI;
        }
        phases[i] = phases[i - 1] + d;
    }
    let times: Vec<f64> = reference.iter().map(|(t, _)| t - t_ref).collect();
    let n = times.len() as f64;
    let tm = times.iter().sum::<f64>() / n;
    let pm = phases.iter().sum::<f64>() / n;
    let sxx: f64 = times.iter().map(|t| (t - tm).powi(2)).sum();
    let sxy: f64 = times
        .iter()
        .zip(&phases)
        .map(|(t, p)| (t - tm) * (p - pm))
        .sum();
    let slope = sxy / sxx;
    let intercept = pm - slope * tm;
    let residual_rms = (times
        .iter()
        .zip(&phases)
        .map(|(t, p)| (p - (intercept + slope * t)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PhaseModel {
        slope,
        intercept,
        t_ref,
        residual_rms,
    })
}

/// Phase delay from one slot sample against the reference-antenna model:
/// phi = wrap(predicted - arg(sample) - chain_offset).
///
/// Sign convention: with the reference antenna nearer the source, theta < 90
/// degrees gives phi > 0 (locked by tests against the forward model).
pub fn estimate_phase_delay(model: &PhaseModel, slot: &SlotSample, chain_offset: f64) -> f64 {
    wrap_phase(model.predict(slot.time) - slot.value.arg() - chain_offset)
}

/// Invert Eq. 2: theta = arccos(lambda*phi / (2*pi*d)), clamping the argument
/// into [-1, 1] and flagging the clamp.
pub fn phase_to_angle(phi: f64, d_m: f64, wavelength_m: f64) -> (f64, bool) {
    assert!(d_m > 0.0);
    let arg = wavelength_m * phi / (2.0 * PI * d_m);
    let clamped = arg.abs() > 1.0;
    (arg.clamp(-1.0, 1.0).acos().to_degrees(), clamped)
}

/// Full per-packet measurement: fit the reference period, estimate phi from
/// every slot sample taken on a non-reference antenna (circular mean), and
/// convert to an angle.
#[allow(clippy::too_many_arguments)]
pub fn measure_packet(
    samples: &CteSamples,
    pattern: &SwitchPattern,
    d_m: f64,
    wavelength_m: f64,
    chain_offset: f64,
    channel_index: u8,
    packet_seq: u32,
    crc_valid: bool,
) -> Result<AoaMeasurement> {
    let model = fit_phase_model(&samples.reference)?;
    let phis: Vec<f64> = samples
        .slots
        .iter()
        .filter(|s| s.antenna != pattern.reference_antenna)
        .map(|s| estimate_phase_delay(&model, s, chain_offset))
        .collect();
    if phis.is_empty() {
        return Err(AoaError::InsufficientData(
            "no slot samples on a non-reference antenna".into(),
        ));
    }
    let phi = circular_mean(&phis);
    let (theta_deg, clamped) = phase_to_angle(phi, d_m, wavelength_m);
    Ok(AoaMeasurement {
        phi,
        theta_deg,
        channel_index,
        packet_seq,
        crc_valid,
        clamped,
    })
}

/// Recover the constant inter-chain phase offset from a common-source
/// fixture (both chains fed identically, true phi = 0): circular mean per
/// channel, then across channels.
pub fn calibrate_chain_offset(measurements: &[AoaMeasurement]) -> Result<f64> {
    if measurements.len() < 10 {
        return Err(AoaError::InsufficientData(format!(
            "calibration needs at least 10 measurements, got {}",
            measurements.len()
        )));
    }
    let mut by_channel: std::collections::BTreeMap<u8, Vec<f64>> = Default::default();
    for m in measurements {
        by_channel.entry(m.channel_index).or_default().push(m.phi);
    }
    let per_channel: Vec<f64> = by_channel.values().map(|p| circular_mean(p)).collect();
    Ok(circular_mean(&per_channel))
}

/// Average angle over a channel set: per-channel mean theta first, then the
/// arithmetic mean over channels. Clamped measurements are dropped.
pub fn aggregate_channels(measurements: &[AoaMeasurement], channel_set: &[u8]) -> Result<f64> {
    let mut by_channel: std::collections::BTreeMap<u8, (f64, usize)> = Default::default();
    for m in measurements {
        if m.clamped || !channel_set.contains(&m.channel_index) {
            continue;
        }
        let e = by_channel.entry(m.channel_index).or_insert((0.0, 0));
        e.0 += m.theta_deg;
        e.1 += 1;
    }
    if by_channel.is_empty() {
        return Err(AoaError::NoData);
    }
    let sum: f64 = by_channel.values().map(|(s, n)| s / *n as f64).sum();
    Ok(sum / by_channel.len() as f64)
}

/// Export measurements in the documented CSV schema.
pub fn write_measurements_csv(path: &Path, measurements: &[AoaMeasurement]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "packet_seq",
        "channel_index",
        "phi_rad",
        "theta_deg",
        "crc_valid",
        "clamped",
    ])?;
    for m in measurements {
        w.write_record([
            m.packet_seq.to_string(),
            m.channel_index.to_string(),
            format!("{:.9}", m.phi),
            format!("{:.6}", m.theta_deg),
            m.crc_valid.to_string(),
            m.clamped.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
