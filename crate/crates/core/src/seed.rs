//! Replica seed derivation.
//!
//! Replica `r` of an ensemble with master seed `m` uses
//! `splitmix64(m + (r + 1) · 0x9E3779B97F4A7C15)`, i.e. the `(r+1)`-th
//! output of a SplitMix64 stream started at `m`. The mapping is fixed so
//! that run directories can be regenerated from their manifest.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn replica_seed(master: u64, replica: usize) -> u64 {
    mix(master.wrapping_add(GOLDEN_GAMMA.wrapping_mul(replica as u64 + 1)))
}
