//! Experiment configuration: TOML with nested sections. The shipped
//! `indoor` profile is a calibration artifact tuned once against the
//! acceptance targets, not a claim about any physical channel.

use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::airsim::{ChannelProfile, Ray};
use crate::error::{AoaError, Result};
use crate::phy::{channel_frequency_hz, data_channels, is_data_channel, NUM_CHANNELS};

/// Named noise/multipath profile shipped with the repository.
pub const INDOOR_PROFILE_TOML: &str = include_str!("../../configs/indoor.toml");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub packets_per_channel: u32,
    pub packet_rate_hz: f64,
    pub channel_policy: ChannelPolicy,
    pub rng_seed: u64,
    pub oversample: usize,
    pub cte: CteSection,
    pub geometry: GeometrySection,
    pub profile: ProfileSection,
    pub sweep: SweepSection,
    pub line: LineSection,
    pub grid: GridSection,
    pub anchors: AnchorsSection,
    pub attack: AttackSection,
    pub defense: DefenseSection,
    pub calibration: CalibrationSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            packets_per_channel: 30,
            packet_rate_hz: 100.0,
            channel_policy: ChannelPolicy::Named("all".into()),
            rng_seed: 1,
            oversample: 8,
            cte: CteSection::default(),
            geometry: GeometrySection::default(),
            profile: ProfileSection::default(),
            sweep: SweepSection::default(),
            line: LineSection::default(),
            grid: GridSection::default(),
            anchors: AnchorsSection::default(),
            attack: AttackSection::default(),
            defense: DefenseSection::default(),
            calibration: CalibrationSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| AoaError::Config(format!("bad config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// The shipped indoor profile.
    pub fn indoor() -> Self {
        Self::from_toml_str(INDOOR_PROFILE_TOML).expect("embedded indoor profile parses")
    }

    /// Channels selected by the policy.
    pub fn channels(&self) -> Result<Vec<u8>> {
        self.channel_policy.resolve()
    }

    pub fn validate(&self) -> Result<()> {
        if self.packets_per_channel == 0 {
            return Err(AoaError::Config("packets_per_channel must be >= 1".into()));
        }
        if self.packet_rate_hz <= 0.0 {
            return Err(AoaError::Config("packet_rate_hz must be positive".into()));
        }
        crate::phy::CteConfig::new(self.cte.duration_us, self.cte.slot_len_us).validate()?;
        self.channels()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelPolicy {
    /// "all" or "data-only"
    Named(String),
    Explicit { explicit: Vec<u8> },
    Fh { fh: FhSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FhSpec {
    pub start: usize,
    pub hop: usize,
}

impl ChannelPolicy {
    pub fn resolve(&self) -> Result<Vec<u8>> {
        match self {
            ChannelPolicy::Named(n) => match n.as_str() {
                "all" => Ok((0..NUM_CHANNELS).collect()),
                "data-only" => Ok(data_channels()),
                other => Err(AoaError::Config(format!(
                    "unknown channel policy {other:?} (expected \"all\" or \"data-only\")"
                ))),
            },
            ChannelPolicy::Explicit { explicit } => {
                if explicit.iter().any(|&c| c >= NUM_CHANNELS) {
                    return Err(AoaError::Config("explicit channel out of range".into()));
                }
                Ok(explicit.clone())
            }
            ChannelPolicy::Fh { fh } => {
                Ok(HopSequence::new(&data_channels(), fh.start, fh.hop)?.channels)
            }
        }
    }
}

/// Deterministic hopping sequence spanning the channel set exactly once per
/// epoch, emulating the out-of-band FH controller.
#[derive(Debug, Clone)]
pub struct HopSequence {
    pub channels: Vec<u8>,
    pub start: usize,
    pub hop: usize,
}

impl HopSequence {
    pub fn new(set: &[u8], start: usize, hop: usize) -> Result<Self> {
        let n = set.len();
        if n == 0 {
            return Err(AoaError::Config("empty channel set".into()));
        }
        if gcd(hop % n, n) != 1 {
            return Err(AoaError::Config(format!(
                "hop {hop} does not span a set of {n} channels exactly once"
            )));
        }
        let channels = (0..n).map(|i| set[(start + i * hop) % n]).collect();
        Ok(HopSequence {
            channels,
            start,
            hop,
        })
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if a == 0 {
        b
    } else {
        gcd(b % a, a)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CteSection {
    pub duration_us: u32,
    pub slot_len_us: u32,
}

impl Default for CteSection {
    fn default() -> Self {
        CteSection {
            duration_us: 16,
            slot_len_us: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometrySection {
    pub spacing_m: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection { spacing_m: 0.06 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RaySection {
    pub delay_ns: f64,
    pub gain: f64,
    pub phase_deg: f64,
    /// Arrival angle relative to the direct bearing.
    pub angle_offset_deg: f64,
}

impl Default for RaySection {
    fn default() -> Self {
        RaySection {
            delay_ns: 0.0,
            gain: 0.0,
            phase_deg: 0.0,
            angle_offset_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileSection {
    /// None disables noise entirely.
    pub snr_db: Option<f64>,
    /// Per-packet CFO drawn uniformly in +-this many ppm of the carrier.
    pub cfo_ppm: f64,
    pub chain_offsets_rad: Vec<f64>,
    pub rays: Vec<RaySection>,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection {
            snr_db: None,
            cfo_ppm: 0.0,
            chain_offsets_rad: vec![0.0, 0.0],
            rays: Vec::new(),
        }
    }
}

impl ProfileSection {
    /// Instantiate the channel for one packet trial.
    pub fn instantiate(&self, channel: u8, direct_theta_deg: f64, seed: u64) -> ChannelProfile {
        let cfo_hz = if self.cfo_ppm > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xCF0_CF0);
            let ppm = rng.random_range(-self.cfo_ppm..=self.cfo_ppm);
            ppm * 1e-6 * channel_frequency_hz(channel)
        } else {
            0.0
        };
        let multipath_rays = self
            .rays
            .iter()
            .filter(|r| r.gain != 0.0)
            .map(|r| Ray {
                delay_s: r.delay_ns * 1e-9,
                gain: Complex64::from_polar(r.gain, r.phase_deg.to_radians()),
                angle_deg: (direct_theta_deg + r.angle_offset_deg).clamp(1.0, 179.0),
            })
            .collect();
        ChannelProfile {
            snr_db: self.snr_db,
            cfo_hz,
            multipath_rays,
            chain_phase_offsets: self.chain_offsets_rad.clone(),
        }
    }

    /// Perfect calibration value for the normal antenna orientation.
    pub fn ideal_chain_offset(&self) -> f64 {
        self.chain_offsets_rad.first().copied().unwrap_or(0.0)
            - self.chain_offsets_rad.get(1).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    pub theta_start_deg: f64,
    pub theta_stop_deg: f64,
    pub theta_step_deg: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            theta_start_deg: 90.0,
            theta_stop_deg: 15.0,
            theta_step_deg: -5.0,
        }
    }
}

impl SweepSection {
    pub fn angles(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut t = self.theta_start_deg;
        let step = self.theta_step_deg;
        while (step < 0.0 && t >= self.theta_stop_deg - 1e-9)
            || (step > 0.0 && t <= self.theta_stop_deg + 1e-9)
        {
            out.push(t);
            t += step;
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LineSection {
    /// Perpendicular distance from receiver to the line, meters.
    pub range_m: f64,
    pub step_m: f64,
    pub cone_min_deg: f64,
    pub cone_max_deg: f64,
}

impl Default for LineSection {
    fn default() -> Self {
        LineSection {
            range_m: 4.0,
            step_m: 0.4,
            cone_min_deg: 50.0,
            cone_max_deg: 130.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            nx: 5,
            ny: 4,
            x0: 0.4,
            y0: 0.6,
            dx: 0.8,
            dy: 0.55,
        }
    }
}

impl GridSection {
    pub fn points(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push([
                    self.x0 + self.dx * i as f64,
                    self.y0 + self.dy * j as f64,
                ]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AnchorsSection {
    pub a1_position: [f64; 2],
    pub a1_axis: [f64; 2],
    pub a1_side: [f64; 2],
    pub a2_position: [f64; 2],
    pub a2_axis: [f64; 2],
    pub a2_side: [f64; 2],
}

impl Default for AnchorsSection {
    fn default() -> Self {
        // Anchors sit just outside the playground edges (mid-bottom along +x,
        // mid-left along +y) so every grid point is seen within a moderate
        // angular cone, away from the end-fire region where the phase delay
        // saturates near +-pi.
        AnchorsSection {
            a1_position: [2.0, -0.6],
            a1_axis: [1.0, 0.0],
            a1_side: [0.0, 1.0],
            a2_position: [-0.5, 1.4],
            a2_axis: [0.0, 1.0],
            a2_side: [1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackSection {
    pub omega_min_rad: f64,
    pub omega_max_rad: f64,
    pub n_packets: usize,
    pub theta_deg: f64,
    pub channel: u8,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection {
            omega_min_rad: -std::f64::consts::PI / 6.0,
            omega_max_rad: std::f64::consts::PI / 6.0,
            n_packets: 61,
            theta_deg: 90.0,
            channel: 19,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DefenseSection {
    pub detection_threshold_deg: f64,
    pub packets_per_pattern: usize,
    pub attacker_omega_rad: f64,
}

impl Default for DefenseSection {
    fn default() -> Self {
        DefenseSection {
            detection_threshold_deg: 2.0,
            packets_per_pattern: 10,
            attacker_omega_rad: std::f64::consts::PI / 6.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSection {
    /// Injected inter-chain offset recovered by the procedure.
    pub chain_offset_rad: f64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        CalibrationSection {
            chain_offset_rad: 0.3,
        }
    }
}

/// Channels to aggregate over: the measured data channels.
pub fn aggregation_channels(measured: &[u8]) -> Vec<u8> {
    measured
        .iter()
        .copied()
        .filter(|&c| is_data_channel(c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_matches_le1m_protocol() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.packets_per_channel, 30);
        assert_eq!(cfg.packet_rate_hz, 100.0);
        assert_eq!(cfg.channels().unwrap().len(), 40);
        assert_eq!(cfg.sweep.angles().len(), 16);
        cfg.validate().unwrap();
    }

    #[test]
    fn indoor_profile_parses() {
        let cfg = ExperimentConfig::indoor();
        cfg.validate().unwrap();
        assert!(cfg.profile.snr_db.is_some());
        assert!(!cfg.profile.rays.is_empty());
    }

    #[test]
    fn hop_sequence_spans_set_once() {
        let set = data_channels();
        let seq = HopSequence::new(&set, 5, 7).unwrap();
        let mut sorted = seq.channels.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, set);
    }

    #[test]
    fn hop_sequence_rejects_non_coprime_hop() {
        let set: Vec<u8> = (0..36).collect();
        assert!(HopSequence::new(&set, 0, 6).is_err());
    }

    #[test]
    fn channel_policies() {
        assert_eq!(
            ChannelPolicy::Named("data-only".into()).resolve().unwrap().len(),
            37
        );
        let explicit = ChannelPolicy::Explicit {
            explicit: vec![1, 2, 3],
        };
        assert_eq!(explicit.resolve().unwrap(), vec![1, 2, 3]);
        let fh = ChannelPolicy::Fh {
            fh: FhSpec { start: 0, hop: 1 },
        };
        assert_eq!(fh.resolve().unwrap().len(), 37);
        assert!(ChannelPolicy::Named("bogus".into()).resolve().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::indoor();
        let s = toml::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_toml_str(&s).unwrap();
        assert_eq!(back.packets_per_channel, cfg.packets_per_channel);
        assert_eq!(back.profile.rays.len(), cfg.profile.rays.len());
    }
}
