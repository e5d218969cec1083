//! BLE LE 1M PHY: bit-exact framing (CRC-24, whitening), GFSK baseband
//! modulation/demodulation, the Constant Tone Extension, and packet detection.

mod crc;
mod detect;
mod gfsk;
mod iq;
mod packet;
mod whiten;

pub use crc::{crc24, crc24_bits, crc24_with_init, CRC24_INIT, CRC24_POLY};
pub use detect::{detect_packet, Detection, PacketDetector};
pub use gfsk::{append_cte, decimate, gfsk_demodulate, gfsk_modulate};
pub use iq::IqStream;
pub use packet::{
    bits_to_bytes, bytes_to_bits, BlePacket, CteConfig, CteTiming, DEFAULT_ACCESS_ADDRESS,
};
pub use whiten::whiten;

/// LE 1M PHY symbol rate, symbols per second.
pub const SYMBOL_RATE: f64 = 1e6;
/// GFSK frequency deviation (modulation index 0.5 at 1 Msym/s).
pub const FREQ_DEVIATION_HZ: f64 = 250e3;
/// Receiver front-end sample rate: two samples per symbol.
pub const RX_SAMPLE_RATE: f64 = 2e6;
/// Gaussian pulse bandwidth-bit-period product.
pub const GAUSSIAN_BT: f64 = 0.5;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const NUM_CHANNELS: u8 = 40;
/// RF channel indices reserved for advertising.
pub const ADVERTISING_CHANNELS: [u8; 3] = [0, 12, 39];

/// Center frequency of RF channel `k`: 2402 + 2k MHz.
pub fn channel_frequency_hz(channel: u8) -> f64 {
    assert!(channel < NUM_CHANNELS, "RF channel index out of range");
    f64::from(2402 + 2 * u32::from(channel)) * 1e6
}

/// Carrier wavelength on RF channel `k`.
pub fn wavelength_m(channel: u8) -> f64 {
    SPEED_OF_LIGHT / channel_frequency_hz(channel)
}

pub fn is_data_channel(channel: u8) -> bool {
    channel < NUM_CHANNELS && !ADVERTISING_CHANNELS.contains(&channel)
}

/// The 37 RF channels used for data, in ascending order.
pub fn data_channels() -> Vec<u8> {
    (0..NUM_CHANNELS).filter(|&c| is_data_channel(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_frequencies() {
        assert_eq!(channel_frequency_hz(0), 2.402e9);
        assert_eq!(channel_frequency_hz(39), 2.480e9);
    }

    #[test]
    fn data_channel_count() {
        assert_eq!(data_channels().len(), 37);
        assert!(!is_data_channel(0));
        assert!(!is_data_channel(12));
        assert!(!is_data_channel(39));
        assert!(is_data_channel(1));
    }
}
