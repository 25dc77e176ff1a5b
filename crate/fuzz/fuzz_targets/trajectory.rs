//! Trajectory CSV reader.
//!
//! ```bash
//! cargo fuzz run trajectory corpus/trajectory
//! ```

#![no_main]

use libfuzzer_sys::fuzz_target;
use shockpath::io::read_trajectory;

fuzz_target!(|data: &[u8]| {
    let _ = read_trajectory(data);
});
