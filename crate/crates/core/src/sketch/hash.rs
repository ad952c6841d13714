//! Keyed 64-bit mixing used to derive sketch randomness on demand.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of `(key, a)` for a 128-bit key.
#[inline]
pub fn keyed(key: u128, a: u64) -> u64 {
    let lo = key as u64;
    let hi = (key >> 64) as u64;
    mix64(mix64(lo ^ a.wrapping_mul(GOLDEN)) ^ hi)
}

/// Hash of `(key, a, b)`.
#[inline]
pub fn keyed2(key: u128, a: u64, b: u64) -> u64 {
    mix64(keyed(key, a) ^ b.wrapping_add(GOLDEN).wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Counter-mode stream: the `counter`-th word derived from `seed`.
#[inline]
pub fn stream_word(seed: u64, counter: u64) -> u64 {
    mix64(seed.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Maps a word to the open interval (0, 1).
#[inline]
pub fn unit_open(word: u64) -> f64 {
    ((word >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Derives a 128-bit key from a seed and a tuple of labels.
pub fn derive_key(seed: u64, labels: &[u64]) -> u128 {
    let mut a = mix64(seed ^ 0x6A09_E667_F3BC_C908);
    let mut b = mix64(seed ^ 0xBB67_AE85_84CA_A73B);
    for &l in labels {
        a = mix64(a ^ l.wrapping_mul(GOLDEN));
        b = mix64(b.wrapping_add(l) ^ a);
    }
    ((a as u128) << 64) | b as u128
}
