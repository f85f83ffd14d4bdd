#![no_main]

use libfuzzer_sys::fuzz_target;
use rscatter::weights::WeightSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(w) = s.parse::<WeightSpec>() {
            let s2 = w.to_string();
            let w2 = s2.parse::<WeightSpec>().unwrap_or_else(|e| panic!("{s2}: {e}"));
            assert_eq!(w, w2);
        }
    }
});
