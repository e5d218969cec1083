//! CRC-24 used by the BLE link layer, implemented as a bit-serial LFSR.

/// Generator polynomial x^24 + x^10 + x^9 + x^6 + x^4 + x^3 + x + 1.
pub const CRC24_POLY: u32 = 0x00065B;
/// Register preset for data channel PDUs.
pub const CRC24_INIT: u32 = 0x555555;

/// CRC over a bit sequence (one bit per byte, transmission order) with the
/// standard preset.
pub fn crc24(bits: &[u8]) -> u32 {
    crc24_with_init(bits, CRC24_INIT)
}

pub fn crc24_with_init(bits: &[u8], init: u32) -> u32 {
    let mut reg = init & 0xFF_FFFF;
    for &b in bits {
        let feedback = (u32::from(b) ^ (reg >> 23)) & 1;
        reg = (reg << 1) & 0xFF_FFFF;
        if feedback == 1 {
            reg ^= CRC24_POLY;
        }
    }
    reg
}

/// CRC register serialized in transmission order (most significant bit
/// first); feeding these 24 bits back through the register drives it to zero.
pub fn crc24_bits(crc: u32) -> Vec<u8> {
    (0..24).rev().map(|i| ((crc >> i) & 1) as u8).collect()
}
