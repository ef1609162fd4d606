//! Deterministic seed derivation so every stochastic stage is reproducible,
//! including when trials run in parallel.

/// SplitMix64 step; full-period mixing of a 64-bit state.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a tag path (for example
/// `[level, trial]`). Distinct tag paths give independent streams.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix(master);
    for &t in tags {
        s = splitmix(s ^ splitmix(t));
    }
    s
}
