//! Global deterministic-mode switch.
//!
//! All kernels chunk work in a machine-independent way, so results are
//! bit-stable with or without thread parallelism. Deterministic mode
//! additionally forces serial execution; it is enabled programmatically or
//! by setting `DDASR_DETERMINISTIC=1`.

use std::sync::atomic::{AtomicU8, Ordering};

const UNSET: u8 = 0;
const OFF: u8 = 1;
const ON: u8 = 2;

static MODE: AtomicU8 = AtomicU8::new(UNSET);

/// True when deterministic (serial) execution is in force.
pub fn deterministic() -> bool {
    match MODE.load(Ordering::Relaxed) {
        ON => true,
        OFF => false,
        _ => {
            let on = std::env::var("DDASR_DETERMINISTIC").map(|v| v == "1").unwrap_or(false);
            MODE.store(if on { ON } else { OFF }, Ordering::Relaxed);
            on
        }
    }
}

/// Overrides the environment-derived setting for this process.
pub fn set_deterministic(on: bool) {
    MODE.store(if on { ON } else { OFF }, Ordering::Relaxed);
}
