//! Seed derivation. Every random stream in an experiment is keyed by the
//! master seed plus a purpose tag and indices, so that streams never overlap
//! and a change in one part of the configuration leaves the others intact.

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix64(seed), |acc, &p| mix64(acc ^ mix64(p)))
}

/// Purpose tags.
pub mod stream {
    pub const RUN: u64 = 1;
    pub const TRUTH: u64 = 2;
    pub const FAULTS: u64 = 3;
    pub const MEASUREMENTS: u64 = 4;
    pub const MATRIX: u64 = 5;
    pub const PROCESS_NOISE: u64 = 10;
    pub const INITIAL_STATE: u64 = 11;
    pub const SENSOR_NOISE: u64 = 12;
    pub const BIAS: u64 = 13;
    pub const PATTERN: u64 = 14;
}
