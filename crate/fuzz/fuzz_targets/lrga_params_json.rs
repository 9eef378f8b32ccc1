//! Fuzzes the attention-parameter JSON decoder: arbitrary text must parse or
//! error without panicking, and serializing an accepted parameter set must be
//! a fixpoint under reparse.

#![no_main]

use libfuzzer_sys::fuzz_target;
use lrga_core::lrga::LrgaParams;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(params) = LrgaParams::from_json_str(text) {
        let json = params.to_json_string();
        let back = LrgaParams::from_json_str(&json).expect("serializer output must reparse");
        assert_eq!(
            back.to_json_string(),
            json,
            "parameter JSON round trip must be a fixpoint"
        );
    }
});
