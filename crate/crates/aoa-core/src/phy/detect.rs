//! Packet detection on a 2 MS/s stream: hard-decision correlation against
//! preamble + access address at every sample offset, then PDU parsing and an
//! independent CRC check. AoA processing continues even when the CRC fails,
//! so the CTE is located from the frame length alone.

use crate::error::Result;
use crate::phy::gfsk::phase_increments;
use crate::phy::packet::{preamble_bits, word_to_bits};
use crate::phy::{whiten, BlePacket, CteTiming, IqStream};

#[derive(Debug, Clone)]
pub struct Detection {
    /// Sample index of the first preamble sample.
    pub offset: usize,
    pub packet: BlePacket,
    pub crc_valid: bool,
    /// CTE timing when the frame carries one.
    pub cte_timing: Option<CteTiming>,
}

/// Sync correlator parameters.
///
/// The access address must match exactly; `preamble_min_match` of the 8
/// preamble bits may be relaxed (default: all 8). The default was chosen by
/// a seeded false-alarm measurement over pure noise (see tests).
#[derive(Debug, Clone)]
pub struct PacketDetector {
    pub access_address: u32,
    pub preamble_min_match: usize,
}

impl PacketDetector {
    pub fn new(access_address: u32) -> Self {
        PacketDetector {
            access_address,
            preamble_min_match: 8,
        }
    }

    /// Find every candidate frame on the stream.
    pub fn detect(&self, iq: &IqStream) -> Result<Vec<Detection>> {
        let mut sync = preamble_bits(self.access_address);
        sync.extend(word_to_bits(self.access_address));
        let sync_samples = sync.len() * 2;

        if iq.samples.len() < sync_samples + 2 {
            return Ok(Vec::new());
        }
        let d = phase_increments(&iq.samples);
        // hard bit for the symbol whose two increments start at n
        let hb: Vec<u8> = (0..d.len().saturating_sub(1))
            .map(|n| u8::from(d[n] + d[n + 1] > 0.0))
            .collect();

        let mut detections = Vec::new();
        let mut offset = 0usize;
        while offset + sync_samples <= hb.len() {
            if self.sync_matches(&sync, &hb, offset) {
                // hard bits can also match half a symbol early; refine to the
                // adjacent offset with the strongest soft sync correlation
                let mut best = offset;
                let cand = offset + 1;
                if cand + sync_samples <= hb.len()
                    && self.sync_matches(&sync, &hb, cand)
                    && sync_metric(&sync, &d, cand) > sync_metric(&sync, &d, best)
                {
                    best = cand;
                }
                if let Some(det) = self.parse_at(iq, &hb, best) {
                    // skip past the frame body to avoid re-triggering inside it
                    let skip = best - offset + det.packet.air_len_bits() * 2;
                    detections.push(det);
                    offset += skip;
                    continue;
                }
            }
            offset += 1;
        }
        Ok(detections)
    }

    fn sync_matches(&self, sync: &[u8], hb: &[u8], offset: usize) -> bool {
        if offset + 2 * (sync.len() - 1) >= hb.len() {
            return false;
        }
        // access address bits (8..40) must match exactly
        for (k, &bit) in sync.iter().enumerate().skip(8) {
            if hb[offset + 2 * k] != bit {
                return false;
            }
        }
        let preamble_hits = sync[..8]
            .iter()
            .enumerate()
            .filter(|&(k, &bit)| hb[offset + 2 * k] == bit)
            .count();
        preamble_hits >= self.preamble_min_match
    }

    fn parse_at(&self, iq: &IqStream, hb: &[u8], offset: usize) -> Option<Detection> {
        let pdu_start = offset + 40 * 2;
        let bit_at = |k: usize| -> Option<u8> { hb.get(pdu_start + 2 * k).copied() };

        // Read enough whitened bits for the largest possible frame, then parse.
        let max_pdu_bits = (3 + 255) * 8 + 24;
        let avail = (0..max_pdu_bits)
            .map_while(bit_at)
            .collect::<Vec<u8>>();
        if avail.len() < 16 {
            return None;
        }
        let pdu = whiten(&avail, iq.center_channel);
        let (packet, crc_valid) = BlePacket::from_pdu_bits(self.access_address, &pdu).ok()?;
        let packet_end = offset + packet.air_len_bits() * 2;
        let cte_timing = packet.cte_info.map(|cte| CteTiming { packet_end, cte });
        Some(Detection {
            offset,
            packet,
            crc_valid,
            cte_timing,
        })
    }
}

/// Soft sync correlation: signed per-symbol phase increment sums against the
/// expected bit polarity.
fn sync_metric(sync: &[u8], d: &[f64], offset: usize) -> f64 {
    sync.iter()
        .enumerate()
        .map(|(k, &bit)| {
            let n = offset + 2 * k;
            let soft = d.get(n).copied().unwrap_or(0.0) + d.get(n + 1).copied().unwrap_or(0.0);
            if bit == 1 {
                soft
            } else {
                -soft
            }
        })
        .sum()
}

/// One-shot detection with the default correlator.
pub fn detect_packet(iq: &IqStream, access_address: u32) -> Result<Vec<Detection>> {
    PacketDetector::new(access_address).detect(iq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{append_cte, decimate, gfsk_modulate, CteConfig, DEFAULT_ACCESS_ADDRESS};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn synth(seq: u32, channel: u8, pad: usize) -> (BlePacket, IqStream) {
        let pkt = BlePacket::with_seq(seq, Some(CteConfig::new(16, 2))).unwrap();
        let bits = pkt.air_bits(channel);
        let mut iq = gfsk_modulate(&bits, 8);
        iq.center_channel = channel;
        let iq = append_cte(&iq, &pkt.cte_info.unwrap()).unwrap();
        let mut rx = decimate(&iq, 4).unwrap();
        // lead-in silence so the packet does not start at offset 0
        let mut samples = vec![Complex64::new(0.0, 0.0); pad];
        samples.extend(rx.samples);
        rx.samples = samples;
        (pkt, rx)
    }

    #[test]
    fn loopback_single_detection_at_correct_offset() {
        let (pkt, rx) = synth(99, 5, 37);
        let dets = detect_packet(&rx, DEFAULT_ACCESS_ADDRESS).unwrap();
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].offset, 37);
        assert!(dets[0].crc_valid);
        assert_eq!(dets[0].packet, pkt);
        let timing = dets[0].cte_timing.unwrap();
        assert_eq!(timing.packet_end, 37 + pkt.air_len_bits() * 2);
    }

    #[test]
    fn corrupted_payload_detected_with_crc_invalid() {
        let (pkt, mut rx) = synth(7, 11, 16);
        // flip one payload bit post-modulation by conjugating its samples
        let bit_idx = 40 + 16 + 8 + 5; // somewhere in the payload
        let s0 = 16 + bit_idx * 2;
        for s in &mut rx.samples[s0..s0 + 2] {
            *s = s.conj();
        }
        let dets = detect_packet(&rx, DEFAULT_ACCESS_ADDRESS).unwrap();
        assert_eq!(dets.len(), 1);
        assert!(!dets[0].crc_valid);
        // the CTE is still located: AoA must not require a valid CRC
        assert!(dets[0].cte_timing.is_some());
        assert_eq!(dets[0].packet.air_len_bits(), pkt.air_len_bits());
    }

    #[test]
    fn pure_noise_yields_no_detections() {
        // Monte-Carlo false-alarm measurement at unit noise power, 1e6 samples.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xFA15EA1A);
        let samples: Vec<Complex64> = (0..1_000_000)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        let iq = IqStream::new(samples, 2e6, 0.0, 0);
        let dets = detect_packet(&iq, DEFAULT_ACCESS_ADDRESS).unwrap();
        assert!(dets.is_empty(), "false alarms: {}", dets.len());
    }
}
