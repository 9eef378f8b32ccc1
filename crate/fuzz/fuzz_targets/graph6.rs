//! Fuzzes the graph6 decoder: arbitrary text must either parse cleanly or
//! fail with an error, never panic, and every graph it accepts must survive
//! an encode/reparse round trip unchanged.

#![no_main]

use libfuzzer_sys::fuzz_target;
use lrga_core::graph6::{encode_graph6, parse_graph6, parse_graph6_lines};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(graphs) = parse_graph6_lines(text) {
        for g in &graphs {
            let record = encode_graph6(g);
            let back = parse_graph6(&record).expect("encoder output must reparse");
            assert_eq!(&back, g, "graph6 round trip must be lossless");
        }
    }
    // Single-record entry point, without the line splitting.
    let _ = parse_graph6(text.trim_end_matches('\n'));
});
