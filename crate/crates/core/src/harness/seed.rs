//! Independent random streams keyed by (master seed, trial, purpose, index).

/// What a stream is used for. Each purpose gets its own sequence, so adding
/// draws to one never shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Scene = 1,
    Noise = 2,
    Jitter = 3,
    Calibration = 4,
}

/// Trial index reserved for the measurement-noise calibration run.
pub const CALIBRATION_TRIAL: u64 = u64::MAX;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_seed(master: u64, trial: u64, purpose: Purpose, index: u64) -> u64 {
    let a = splitmix64(master ^ (purpose as u64).rotate_left(56));
    let b = splitmix64(a ^ trial);
    splitmix64(b ^ index)
}
