//! End-to-end single-packet simulation: frame build, GFSK modulation, CTE,
//! optional transmit-side attack, propagation, receiver decimation, RF
//! switch, packet detection, and phase/angle estimation.

use crate::airsim::{propagate, rf_switch, ArrayGeometry, ChannelProfile, SourcePose, SwitchPattern};
use crate::dfrx::{extract_cte, measure_packet, phase_to_angle, AoaMeasurement};
use crate::error::{AoaError, Result};
use crate::phy::{
    append_cte, decimate, wavelength_m, BlePacket, CteConfig, CteTiming, IqStream, PacketDetector,
    DEFAULT_ACCESS_ADDRESS, RX_SAMPLE_RATE,
};
use crate::redteam::{inject_phase_step, AttackProfile};

/// One packet's worth of simulation parameters.
#[derive(Debug, Clone)]
pub struct PacketSim {
    pub channel: u8,
    pub seq: u32,
    pub cte: CteConfig,
    pub pattern: SwitchPattern,
    pub geometry: ArrayGeometry,
    pub pose: SourcePose,
    pub profile: ChannelProfile,
    pub oversample: usize,
    /// Calibrated chain offset subtracted during estimation.
    pub chain_offset_cal: f64,
    pub attack: Option<AttackProfile>,
    /// Transmit timestamp (pacing metadata), seconds.
    pub t0: f64,
}

impl PacketSim {
    pub fn new(channel: u8, geometry: ArrayGeometry, pose: SourcePose) -> Self {
        PacketSim {
            channel,
            seq: 0,
            cte: CteConfig::new(16, 2),
            pattern: SwitchPattern::minimal(0, 1),
            geometry,
            pose,
            profile: ChannelProfile::clean(),
            oversample: 8,
            chain_offset_cal: 0.0,
            attack: None,
            t0: 0.0,
        }
    }
}

/// Everything the receiver side produced for one packet.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub measurement: AoaMeasurement,
    /// Per-antenna streams at 2 MS/s (coherent-receiver oracle input).
    pub per_antenna_rx: Vec<IqStream>,
    /// The single-chain switched stream the real receiver sees.
    pub switched: IqStream,
    pub timing: CteTiming,
    pub detected_offset: usize,
}

/// Run the full pipeline for one packet.
pub fn simulate_packet(sim: &PacketSim, seed: u64) -> Result<SimOutput> {
    if sim.oversample < 2 || !sim.oversample.is_multiple_of(2) {
        return Err(AoaError::Config(
            "oversample must be an even integer >= 2".into(),
        ));
    }

    // transmit side
    let packet = BlePacket::with_seq(sim.seq, Some(sim.cte))?;
    let bits = packet.air_bits(sim.channel);
    let mut tx = crate::phy::gfsk_modulate(&bits, sim.oversample);
    tx.center_channel = sim.channel;
    tx.t0 = sim.t0;
    let mut tx = append_cte(&tx, &sim.cte)?;
    let tx_timing = CteTiming {
        packet_end: packet.air_len_bits() * sim.oversample,
        cte: sim.cte,
    };
    if let Some(attack) = &sim.attack {
        tx = inject_phase_step(&tx, attack, &tx_timing)?;
    }

    // channel
    let rx = propagate(&tx, &sim.geometry, &sim.pose, &sim.profile, seed)?;
    let factor = sim.oversample / 2;
    let rx2: Vec<IqStream> = rx
        .iter()
        .map(|s| decimate(s, factor))
        .collect::<Result<_>>()?;

    // the single chain camps on the reference antenna until the CTE slots,
    // so detection runs on that stream
    let detector = PacketDetector::new(DEFAULT_ACCESS_ADDRESS);
    let dets = detector.detect(&rx2[sim.pattern.reference_antenna])?;
    let det = dets
        .into_iter()
        .find(|d| d.cte_timing.is_some())
        .ok_or_else(|| AoaError::InsufficientData("packet not detected".into()))?;
    let timing = det.cte_timing.unwrap();

    let switched = rf_switch(&rx2, &sim.pattern, &timing)?;
    let samples = extract_cte(&switched, &timing, &sim.pattern)?;

    // a swapped pattern (reference on the high element) sees the negated
    // phase delay and the negated chain offset
    let swapped = sim.pattern.reference_antenna != sim.geometry.reference_element;
    let sign = if swapped { -1.0 } else { 1.0 };
    let d = sim.geometry.adjacent_spacing();
    let lambda = wavelength_m(sim.channel);
    let mut measurement = measure_packet(
        &samples,
        &sim.pattern,
        d,
        lambda,
        sign * sim.chain_offset_cal,
        sim.channel,
        det.packet.seq().unwrap_or(sim.seq),
        det.crc_valid,
    )?;
    if swapped {
        let (theta, clamped) = phase_to_angle(-measurement.phi, d, lambda);
        measurement.theta_deg = theta;
        measurement.clamped = clamped;
    }

    debug_assert!((switched.sample_rate - RX_SAMPLE_RATE).abs() < 1e-6);
    Ok(SimOutput {
        measurement,
        per_antenna_rx: rx2,
        switched,
        timing,
        detected_offset: det.offset,
    })
}
