#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(l) = rscatter::breakdown::parse_ladder(s) {
            assert!(l.iter().all(|m| m.is_finite() && *m > 0.0));
        }
    }
});
