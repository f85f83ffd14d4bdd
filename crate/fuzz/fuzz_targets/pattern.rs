#![no_main]

use libfuzzer_sys::fuzz_target;
use rscatter::breakdown::{Direction, Pattern};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        _ = s.parse::<Direction>();
        if let Ok(p) = s.parse::<Pattern>() {
            let s2 = p.to_string();
            assert_eq!(s2.parse::<Pattern>().ok(), Some(p));
        }
    }
});
