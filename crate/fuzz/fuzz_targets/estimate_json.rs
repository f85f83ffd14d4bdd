#![no_main]

use libfuzzer_sys::fuzz_target;
use rscatter::json::EstimateOutput;

fuzz_target!(|data: &[u8]| {
    if let Ok(out) = serde_json::from_slice::<EstimateOutput>(data) {
        let text = serde_json::to_string(&out).unwrap();
        let back: EstimateOutput = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
});
