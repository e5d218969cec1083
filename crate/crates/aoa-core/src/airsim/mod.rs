//! Forward propagation: plane-wave arrival on the antenna array, channel
//! impairments (AWGN, CFO, sparse multipath rays, per-chain phase offsets),
//! and the single-RF-chain antenna switch.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{AoaError, Result};
use crate::phy::{wavelength_m, CteTiming, IqStream};

/// Antenna element layout in world coordinates (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub element_positions: Vec<[f64; 2]>,
    pub reference_element: usize,
}

impl ArrayGeometry {
    /// Two elements 6 cm apart along `axis`, centered on `center`.
    pub fn two_element(center: [f64; 2], axis: [f64; 2], spacing_m: f64) -> Self {
        let axis = normalize(axis);
        let h = spacing_m / 2.0;
        ArrayGeometry {
            element_positions: vec![
                [center[0] - h * axis[0], center[1] - h * axis[1]],
                [center[0] + h * axis[0], center[1] + h * axis[1]],
            ],
            reference_element: 0,
        }
    }

    /// Default deployment: d = 0.06 m along +x at the origin.
    pub fn default_two_element() -> Self {
        Self::two_element([0.0, 0.0], [1.0, 0.0], 0.06)
    }

    pub fn len(&self) -> usize {
        self.element_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element_positions.is_empty()
    }

    /// Unit vector along the array axis (first to last element).
    pub fn axis(&self) -> [f64; 2] {
        let a = self.element_positions[0];
        let b = self.element_positions[self.len() - 1];
        normalize([b[0] - a[0], b[1] - a[1]])
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.len() as f64;
        let (sx, sy) = self
            .element_positions
            .iter()
            .fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        [sx / n, sy / n]
    }

    /// Spacing between the first adjacent element pair.
    pub fn adjacent_spacing(&self) -> f64 {
        let a = self.element_positions[0];
        let b = self.element_positions[1];
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(AoaError::Config("array needs at least 2 elements".into()));
        }
        if self.reference_element >= self.len() {
            return Err(AoaError::Config("reference element out of range".into()));
        }
        if self.adjacent_spacing() <= 0.0 {
            return Err(AoaError::Config("element spacing must be positive".into()));
        }
        Ok(())
    }
}

fn normalize(v: [f64; 2]) -> [f64; 2] {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    [v[0] / n, v[1] / n]
}

/// Single-chain switching schedule: which antenna serves each sample slot.
/// `reference_antenna` receives the packet and the CTE reference period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchPattern {
    pub reference_antenna: usize,
    /// (slot_index, antenna_index) for each sample slot.
    pub schedule: Vec<(usize, usize)>,
    pub slot_len_us: u32,
}

impl SwitchPattern {
    /// Shortest usable pattern: 16 us CTE, two antennas, one sample slot.
    pub fn minimal(reference_antenna: usize, other_antenna: usize) -> Self {
        SwitchPattern {
            reference_antenna,
            schedule: vec![(0, other_antenna)],
            slot_len_us: 2,
        }
    }

    /// Alternate between the non-reference and reference antenna over
    /// `n_slots` sample slots.
    pub fn alternating(reference_antenna: usize, other_antenna: usize, n_slots: usize) -> Self {
        SwitchPattern {
            reference_antenna,
            schedule: (0..n_slots)
                .map(|j| {
                    (
                        j,
                        if j % 2 == 0 {
                            other_antenna
                        } else {
                            reference_antenna
                        },
                    )
                })
                .collect(),
            slot_len_us: 2,
        }
    }

    pub fn antenna_for_slot(&self, slot: usize) -> Option<usize> {
        self.schedule
            .iter()
            .find(|(s, _)| *s == slot)
            .map(|(_, a)| *a)
    }

    pub fn max_antenna(&self) -> usize {
        self.schedule
            .iter()
            .map(|(_, a)| *a)
            .chain(std::iter::once(self.reference_antenna))
            .max()
            .unwrap_or(0)
    }
}

/// One propagation path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ray {
    /// Excess delay relative to the direct path, seconds.
    pub delay_s: f64,
    pub gain: Complex64,
    /// Arrival angle relative to the array axis, degrees.
    pub angle_deg: f64,
}

/// Channel impairments. The direct ray (unit gain, zero delay, the source
/// bearing) is always present and is not listed in `multipath_rays`.
#[derive(Debug, Clone)]
pub struct ChannelProfile {
    /// SNR relative to the received direct-ray power; `None` disables noise.
    pub snr_db: Option<f64>,
    pub cfo_hz: f64,
    pub multipath_rays: Vec<Ray>,
    /// Constant hardware phase per receive chain, radians.
    pub chain_phase_offsets: Vec<f64>,
}

impl ChannelProfile {
    pub fn clean() -> Self {
        ChannelProfile {
            snr_db: None,
            cfo_hz: 0.0,
            multipath_rays: Vec::new(),
            chain_phase_offsets: Vec::new(),
        }
    }

    pub fn chain_offset(&self, antenna: usize) -> f64 {
        self.chain_phase_offsets.get(antenna).copied().unwrap_or(0.0)
    }
}

/// Transmitter pose: a far-field bearing or a 2D position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourcePose {
    /// Angle from the array axis, degrees in (0, 180).
    Angle(f64),
    /// World position, meters.
    Position([f64; 2]),
}

impl SourcePose {
    /// Resolve to (theta_deg, amplitude scale) for the given array.
    /// Far-field: range only scales amplitude, never phase curvature.
    pub fn resolve(&self, geometry: &ArrayGeometry) -> Result<(f64, f64)> {
        match *self {
            SourcePose::Angle(theta) => {
                if !(0.0 < theta && theta < 180.0) {
                    return Err(AoaError::Config(format!(
                        "theta {theta} deg outside (0, 180)"
                    )));
                }
                Ok((theta, 1.0))
            }
            SourcePose::Position(p) => {
                let c = geometry.centroid();
                let dx = p[0] - c[0];
                let dy = p[1] - c[1];
                let range = (dx * dx + dy * dy).sqrt();
                if range < 1e-9 {
                    return Err(AoaError::DegenerateGeometry);
                }
                let axis = geometry.axis();
                let cos_theta = ((dx * axis[0] + dy * axis[1]) / range).clamp(-1.0, 1.0);
                let theta = cos_theta.acos().to_degrees();
                // free-space amplitude falloff, normalized at 1 m
                Ok((theta, 1.0 / range.max(1.0)))
            }
        }
    }
}

/// Eq.-of-motion of the whole module: phase difference between adjacent
/// elements for a plane wave, phi = 2*pi*(d/lambda)*cos(theta), unwrapped.
pub fn phase_delay_forward(theta_deg: f64, d_m: f64, wavelength_m: f64) -> f64 {
    assert!(d_m > 0.0 && wavelength_m > 0.0);
    2.0 * PI * (d_m / wavelength_m) * theta_deg.to_radians().cos()
}

/// Per-element phase lag for a plane wave arriving at `angle_deg` from the
/// array axis: elements further along the axis lag by 2*pi*proj/lambda, so a
/// reference-minus-other phase comparison reproduces `phase_delay_forward`.
fn element_phase_lags(geometry: &ArrayGeometry, angle_deg: f64, wavelength: f64) -> Vec<f64> {
    let axis = geometry.axis();
    let refp = geometry.element_positions[geometry.reference_element];
    let cos_t = angle_deg.to_radians().cos();
    geometry
        .element_positions
        .iter()
        .map(|p| {
            let proj = (p[0] - refp[0]) * axis[0] + (p[1] - refp[1]) * axis[1];
            2.0 * PI * proj * cos_t / wavelength
        })
        .collect()
}

/// Propagate a transmitted stream onto every array element.
///
/// Each antenna receives the sum over rays of gain-scaled, phase-shifted,
/// CFO-rotated copies plus seeded white Gaussian noise; chain phase offsets
/// are applied per antenna. Deterministic for a fixed seed.
pub fn propagate(
    tx: &IqStream,
    geometry: &ArrayGeometry,
    pose: &SourcePose,
    profile: &ChannelProfile,
    seed: u64,
) -> Result<Vec<IqStream>> {
    geometry.validate()?;
    let (theta_direct, amp) = pose.resolve(geometry)?;
    let lambda = wavelength_m(tx.center_channel);
    let carrier = crate::phy::channel_frequency_hz(tx.center_channel);
    let fs = tx.sample_rate;
    let n = tx.samples.len();

    // direct ray first, then the profile's extra rays
    let mut rays = Vec::with_capacity(1 + profile.multipath_rays.len());
    rays.push(Ray {
        delay_s: 0.0,
        gain: Complex64::new(1.0, 0.0),
        angle_deg: theta_direct,
    });
    rays.extend(profile.multipath_rays.iter().cloned());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_sigma = profile.snr_db.map(|snr| {
        let p_direct = amp * amp;
        (p_direct / 10f64.powf(snr / 10.0)).sqrt()
    });

    let mut out = Vec::with_capacity(geometry.len());
    for ant in 0..geometry.len() {
        let chain = Complex64::from_polar(1.0, profile.chain_offset(ant));
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for ray in &rays {
            let lags = element_phase_lags(geometry, ray.angle_deg, lambda);
            // carrier phase picked up over the excess delay gives the
            // frequency-dependent multipath rotation
            let rot = Complex64::from_polar(1.0, -2.0 * PI * carrier * ray.delay_s);
            let coeff = ray.gain * rot * Complex64::from_polar(amp, -lags[ant]);
            let shift = (ray.delay_s * fs).round() as usize;
            for (i, a) in acc.iter_mut().enumerate().skip(shift) {
                *a += coeff * tx.samples[i - shift];
            }
        }
        // CFO rotation and chain offset
        if profile.cfo_hz != 0.0 {
            let w = 2.0 * PI * profile.cfo_hz / fs;
            for (i, a) in acc.iter_mut().enumerate() {
                *a *= Complex64::from_polar(1.0, w * i as f64) * chain;
            }
        } else if profile.chain_offset(ant) != 0.0 {
            for a in acc.iter_mut() {
                *a *= chain;
            }
        }
        if let Some(sigma) = noise_sigma {
            let s = sigma / 2f64.sqrt();
            for a in acc.iter_mut() {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                *a += Complex64::new(re * s, im * s);
            }
        }
        let mut stream = IqStream::new(acc, fs, tx.t0, tx.center_channel);
        stream.t0 = tx.t0;
        out.push(stream);
    }
    Ok(out)
}

/// Apply the single-chain RF switch to time-aligned per-antenna streams.
///
/// The output follows the reference antenna through the packet, guard and
/// reference period, then the scheduled antenna in each sample slot. Samples
/// inside switch slots are zeroed and flagged invalid (switch transient).
pub fn rf_switch(
    per_antenna: &[IqStream],
    pattern: &SwitchPattern,
    timing: &CteTiming,
) -> Result<IqStream> {
    if per_antenna.is_empty() {
        return Err(AoaError::Config("no antenna streams".into()));
    }
    if pattern.max_antenna() >= per_antenna.len() {
        return Err(AoaError::Config(format!(
            "pattern addresses antenna {} but only {} are present",
            pattern.max_antenna(),
            per_antenna.len()
        )));
    }
    if timing.cte.slot_len_us != pattern.slot_len_us {
        return Err(AoaError::Config(
            "pattern slot length disagrees with the CTE configuration".into(),
        ));
    }
    let fs = per_antenna[0].sample_rate;
    let n = per_antenna[0].samples.len();
    let reference = &per_antenna[pattern.reference_antenna];

    let mut samples = reference.samples.clone();
    let mut valid = vec![true; n];

    for (j, (switch_range, _)) in timing.slot_pairs(fs).iter().enumerate() {
        // whole switch slot discarded as transient
        for i in switch_range.clone() {
            if i < n {
                samples[i] = Complex64::new(0.0, 0.0);
                valid[i] = false;
            }
        }
        // the sample slot carries the scheduled antenna's samples
        let antenna = pattern.antenna_for_slot(j).unwrap_or(pattern.reference_antenna);
        let slot = timing.cte.slot_len_us as usize * (fs / 1e6) as usize;
        let start = switch_range.end.min(n);
        let end = (start + slot).min(n);
        samples[start..end].copy_from_slice(&per_antenna[antenna].samples[start..end]);
    }

    let mut out = IqStream::new(samples, fs, reference.t0, reference.center_channel);
    out.valid = Some(valid);
    Ok(out)
}
