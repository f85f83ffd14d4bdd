#![no_main]

use libfuzzer_sys::fuzz_target;
use rscatter::location::CenterSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(c) = s.parse::<CenterSpec>() {
            let s2 = c.to_string();
            assert_eq!(s2.parse::<CenterSpec>().ok(), Some(c));
        }
    }
});
