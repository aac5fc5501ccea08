//! Deterministic per-replicate seed derivation.

/// Derive an independent stream seed from a master seed and a replicate
/// index (splitmix64 finalizer). The same (master, index) pair always yields
/// the same seed, so replicate results are reproducible regardless of
/// scheduling.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
