//! Data whitening: 7-bit LFSR with polynomial x^7 + x^4 + 1, seeded with the
//! channel index. Applied to PDU and CRC bits only; the CTE is never whitened.

/// XOR the input bits with the channel-seeded whitening sequence.
///
/// The register byte holds position 0 in bit 6 (always preset to one) and
/// position 6 in bit 0; the channel index occupies positions 1..=6.
pub fn whiten(bits: &[u8], channel: u8) -> Vec<u8> {
    assert!(channel < 40, "RF channel index out of range");
    let mut reg: u8 = 0x40 | channel;
    bits.iter()
        .map(|&b| {
            let out = reg & 1;
            reg >>= 1;
            if out == 1 {
                reg ^= 0x44;
            }
            b ^ out
        })
        .collect()
}
