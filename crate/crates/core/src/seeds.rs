//! Named sub-seeds derived from one master seed.

/// SplitMix64 finalizer of `a` combined with `b`.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-seed for the stream called `name`.
pub fn sub_seed(master: u64, name: &str) -> u64 {
    name.bytes().fold(mix(master, 0x5EED), |acc, b| mix(acc, b as u64))
}
