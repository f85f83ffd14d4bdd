#![no_main]

use libfuzzer_sys::fuzz_target;
use rscatter::dataset::Dataset;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(d) = Dataset::parse_csv(s) {
        let again = Dataset::parse_csv(&d.to_csv()).expect("written csv must parse");
        assert_eq!(again.n(), d.n());
        assert_eq!(again.q(), d.q());
    }
});
