#![no_main]

use libfuzzer_sys::fuzz_target;
use spectral_cascade::exchange;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = exchange::parse_matrix(text) {
        assert!(m.is_square());
        assert!(m.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
        let back = exchange::parse_matrix(&exchange::matrix_to_json(&m)).expect("round trip");
        assert_eq!(back, m);
    }
});
