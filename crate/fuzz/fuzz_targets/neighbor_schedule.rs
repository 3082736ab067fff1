#![no_main]

use libfuzzer_sys::fuzz_target;
use vecfish::io::parse_neighbor_schedule;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(schedule) = parse_neighbor_schedule(s) {
            assert!(!schedule.is_empty());
            assert!(schedule.iter().all(|&m| m > 0));
        }
    }
});
