#![no_main]

use libfuzzer_sys::fuzz_target;
use rscatter::datagen::{Distribution, ShapeSpec};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        _ = s.parse::<Distribution>();
        match s.parse::<ShapeSpec>() {
            Ok(spec @ ShapeSpec::Diagonal(_)) => {
                let m = spec.resolve().unwrap();
                assert!(m.min_eigenvalue() > 0.0);
            }
            Ok(ShapeSpec::Identity(q)) if q <= 64 => {
                _ = ShapeSpec::Identity(q).resolve().unwrap();
            }
            _ => {}
        }
    }
});
