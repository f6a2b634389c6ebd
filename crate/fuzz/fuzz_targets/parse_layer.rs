#![no_main]

use libfuzzer_sys::fuzz_target;
use num_complex::Complex64;
use spectral_cascade::scenario::LayerSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<LayerSpec>(data) else {
        return;
    };
    let Ok(map) = spec.to_map() else { return };
    // Evaluation may report a pole but must not panic.
    for z in [
        Complex64::new(0.0, 0.0),
        Complex64::new(0.5, -0.25),
        Complex64::new(1.0, 0.0),
    ] {
        let _ = map.eval(z);
    }
});
