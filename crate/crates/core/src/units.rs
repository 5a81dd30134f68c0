//! Unit conversions applied when scenarios are ingested.
//!
//! Everything inside the engine is seconds, bytes, bytes/second, watts and
//! degrees Celsius. Scenario files use milliseconds, megabytes and megabits
//! per second.

/// Bytes in one megabyte (decimal).
pub const BYTES_PER_MB: f64 = 1.0e6;

/// Bytes per second in one megabit per second.
pub const BYTES_PER_SEC_PER_MBPS: f64 = 1.25e5;

pub fn ms_to_s(ms: f64) -> f64 {
    ms / 1000.0
}

pub fn s_to_ms(s: f64) -> f64 {
    s * 1000.0
}

pub fn mb_to_bytes(mb: f64) -> u64 {
    (mb * BYTES_PER_MB).round() as u64
}

pub fn mbps_to_bytes_per_sec(mbps: f64) -> f64 {
    mbps * BYTES_PER_SEC_PER_MBPS
}
