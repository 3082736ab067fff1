#![no_main]

use libfuzzer_sys::fuzz_target;
use vecfish::io::RunRecord;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(record) = RunRecord::from_json(text) {
        // Whatever parses must serialize again.
        let _ = record.to_json().expect("re-serialize");
    }
});
