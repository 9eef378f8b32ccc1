//! Fuzzes the JSON graph decoder: arbitrary text must parse or error without
//! panicking, and every accepted graph must round-trip through its own
//! serializer.

#![no_main]

use libfuzzer_sys::fuzz_target;
use lrga_core::graph::Graph;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // Throughput guard: a tiny document can legally declare up to the wire
    // cap of 4096 nodes and the dense adjacency it allocates dwarfs the
    // input, so keep the fuzzer's time in the parsing logic instead.
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(text) {
        if v.get("n")
            .and_then(serde_json::Value::as_u64)
            .is_some_and(|n| n > 256)
        {
            return;
        }
    }
    if let Ok(g) = Graph::from_json_str(text) {
        let json = g.to_json_string();
        let back = Graph::from_json_str(&json).expect("serializer output must reparse");
        assert_eq!(back, g, "graph JSON round trip must be lossless");
    }
});
