//! Per-cell seed derivation.
//!
//! The seed is FNV-1a (64-bit) over the byte string
//! `base_seed (u64 LE) || k (u64 LE) || round(sigma * 1e6) (i64 LE) || label (UTF-8)`,
//! passed through the SplitMix64 finalizer. Any run can be reproduced from
//! the base seed and grid recorded in its manifest.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Fixed-point scale used to encode sigma.
pub const SIGMA_SCALE: f64 = 1e6;

pub fn derive_seed(base_seed: u64, k: usize, sigma: f64, label: &str) -> u64 {
    let sigma_fixed = (sigma * SIGMA_SCALE).round() as i64;
    let mut h = FNV_OFFSET;
    let bytes = base_seed
        .to_le_bytes()
        .into_iter()
        .chain((k as u64).to_le_bytes())
        .chain(sigma_fixed.to_le_bytes())
        .chain(label.bytes());
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
