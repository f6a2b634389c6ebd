#![no_main]

use libfuzzer_sys::fuzz_target;
use spectral_cascade::scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(s) = scenario::parse_scenario(text) {
        // Anything accepted must survive a round trip and build its maps.
        let again = scenario::parse_scenario(&scenario::to_json(&s)).expect("round trip");
        assert_eq!(again, s);
        let _ = s.cycle();
        let _ = s.conjugator();
    }
});
