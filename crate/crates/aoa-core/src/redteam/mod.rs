//! Transmitter-side CTE phase manipulation and the switching-pattern
//! countermeasure.
//!
//! A malicious transmitter applies a constant phase step of `omega` during
//! the switch slot; the switched receiver then measures phi + omega. Swapping
//! the roles of the two antennas between packets makes an honest channel
//! antisymmetric (phi vs -phi) while a constant-omega attacker leaves a
//! residual of 2*omega, which the detector thresholds.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::airsim::{ArrayGeometry, SwitchPattern};
use crate::dfrx::{circular_mean, phase_to_angle, wrap_phase};
use crate::error::{AoaError, Result};
use crate::phy::{wavelength_m, CteTiming, IqStream};

/// Transmit-side attack parameters.
#[derive(Debug, Clone, Copy)]
pub struct AttackProfile {
    /// Constant phase step, radians.
    pub omega: f64,
    /// Time within the CTE at which the step is applied, microseconds from
    /// the end of the CRC. Must fall inside a switch slot.
    pub onset_us: f64,
}

impl AttackProfile {
    /// Step applied at the center of the first switch slot.
    pub fn constant(omega: f64, cte: &crate::phy::CteConfig) -> Self {
        let onset_us = f64::from(cte.guard_us)
            + f64::from(crate::phy::CteConfig::REFERENCE_US)
            + f64::from(cte.slot_len_us) / 2.0;
        AttackProfile { omega, onset_us }
    }
}

/// Receiver-side defense: a per-packet pattern schedule and the detection
/// threshold.
#[derive(Debug, Clone)]
pub struct DefensePolicy {
    /// Must hold at least two distinct patterns when detection is enabled.
    pub patterns: Vec<SwitchPattern>,
    pub rng_seed: u64,
    /// Threshold on the evidence, degrees of equivalent angle.
    pub detection_threshold_deg: f64,
}

impl DefensePolicy {
    /// Antenna-role swap between packets at a 2-degree evidence threshold.
    pub fn default_two_pattern(rng_seed: u64) -> Self {
        DefensePolicy {
            patterns: vec![SwitchPattern::minimal(0, 1), SwitchPattern::minimal(1, 0)],
            rng_seed,
            detection_threshold_deg: 2.0,
        }
    }

    /// Seeded uniform draw from the pattern set for packet `index`; the
    /// schedule must be unpredictable to the transmitter.
    pub fn pattern_for_packet(&self, index: u32) -> (usize, &SwitchPattern) {
        use rand::{Rng, SeedableRng};
        let mut rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(self.rng_seed ^ u64::from(index).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let id = rng.random_range(0..self.patterns.len());
        (id, &self.patterns[id])
    }
}

/// Rotate every sample at or after the onset by a fixed phase step chosen
/// so the switched receiver's measured phase delay becomes wrap(phi + omega);
/// earlier samples are untouched and magnitudes are preserved exactly. The
/// estimator reads phi as (predicted reference phase - sample phase), so the
/// +omega shift corresponds to rotating the transmitted tone by e^{-j*omega}.
pub fn inject_phase_step(
    tx: &IqStream,
    attack: &AttackProfile,
    timing: &CteTiming,
) -> Result<IqStream> {
    let fs = tx.sample_rate;
    let onset_idx = timing.packet_end + (attack.onset_us * fs / 1e6).round() as usize;
    let cte_end = timing.cte_end(fs);
    if onset_idx < timing.packet_end || onset_idx >= cte_end.min(tx.samples.len()) {
        return Err(AoaError::Config(format!(
            "attack onset {} us falls outside the CTE",
            attack.onset_us
        )));
    }
    let rot = Complex64::from_polar(1.0, -attack.omega);
    let mut out = tx.clone();
    for s in &mut out.samples[onset_idx..] {
        *s *= rot;
    }
    Ok(out)
}

/// Linear omega schedule over `n_packets` packets.
pub fn omega_schedule(range: (f64, f64), n_packets: usize) -> Vec<f64> {
    assert!(n_packets >= 2);
    (0..n_packets)
        .map(|i| range.0 + (range.1 - range.0) * i as f64 / (n_packets - 1) as f64)
        .collect()
}

/// Sweep omega linearly across packets at a fixed pose and return the
/// apparent angle trajectory of the switched receiver.
pub fn omega_sweep(
    base: &crate::pipeline::PacketSim,
    range: (f64, f64),
    n_packets: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    omega_schedule(range, n_packets)
        .into_iter()
        .enumerate()
        .map(|(i, omega)| {
            let mut sim = base.clone();
            sim.seq = i as u32;
            sim.attack = Some(AttackProfile::constant(omega, &sim.cte));
            let out = crate::pipeline::simulate_packet(&sim, seed.wrapping_add(i as u64))?;
            Ok((omega, out.measurement.theta_deg))
        })
        .collect()
}

/// Simulation-only oracle: both antennas received coherently for the whole
/// CTE. A transmit-side phase step hits both chains identically and cancels
/// in the cross-phase, so this estimate is immune to the attack.
pub fn coherent_reference_angle(
    per_antenna: &[IqStream],
    timing: &CteTiming,
    geometry: &ArrayGeometry,
) -> f64 {
    let fs = per_antenna[0].sample_rate;
    let start = timing.reference_start(fs);
    let end = timing.cte_end(fs).min(per_antenna[0].samples.len());
    let reference = &per_antenna[geometry.reference_element];
    let other = &per_antenna[1 - geometry.reference_element];
    let mut acc = Complex64::new(0.0, 0.0);
    for i in start..end {
        acc += reference.samples[i] * other.samples[i].conj();
    }
    let phi = acc.arg();
    let (theta, _) = phase_to_angle(
        phi,
        geometry.adjacent_spacing(),
        wavelength_m(per_antenna[0].center_channel),
    );
    theta
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Clean,
    Attacked,
}

#[derive(Debug, Clone, Copy)]
pub struct AttackEvidence {
    pub verdict: Verdict,
    /// |circular mean residual| converted to degrees of equivalent angle.
    pub evidence_deg: f64,
}

/// Equivalent-angle magnitude of a phase residual: the angular displacement
/// from broadside that the phase `omega` would fake at spacing `d`.
pub fn equivalent_angle_deg(omega: f64, d_m: f64, wavelength_m: f64) -> f64 {
    let (theta, _) = phase_to_angle(omega.abs(), d_m, wavelength_m);
    90.0 - theta.min(90.0)
}

/// Pattern-alternation detector.
///
/// Honest physics gives phi(swapped) = -phi(normal); a constant-omega
/// attacker that assumes a fixed pattern leaves phi_a + phi_b ~ 2*omega.
/// The evidence statistic is the circular mean of that sum, thresholded in
/// equivalent-angle degrees at mid-band.
pub fn detect_attack(
    measurements: &[(usize, f64)],
    policy: &DefensePolicy,
    d_m: f64,
    wavelength_m: f64,
) -> Result<AttackEvidence> {
    let mut by_pattern: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for &(id, phi) in measurements {
        by_pattern.entry(id).or_default().push(phi);
    }
    if by_pattern.len() < 2 {
        return Err(AoaError::InsufficientData(
            "detector needs measurements from at least 2 distinct patterns".into(),
        ));
    }
    if by_pattern.values().any(|v| v.len() < 5) {
        return Err(AoaError::InsufficientData(
            "detector needs at least 5 packets per pattern".into(),
        ));
    }
    let means: Vec<f64> = by_pattern.values().map(|v| circular_mean(v)).collect();
    let residual = wrap_phase(means[0] + means[1]);
    let evidence_deg = equivalent_angle_deg(residual / 2.0, d_m, wavelength_m);
    let verdict = if evidence_deg > policy.detection_threshold_deg {
        Verdict::Attacked
    } else {
        Verdict::Clean
    };
    Ok(AttackEvidence {
        verdict,
        evidence_deg,
    })
}

/// Default attack sweep bounds: +/- 30 degrees of injected phase.
pub const OMEGA_SWEEP_RANGE: (f64, f64) = (-PI / 6.0, PI / 6.0);
