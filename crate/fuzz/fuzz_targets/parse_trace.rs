#![no_main]
use libfuzzer_sys::fuzz_target;
use rfcache::trace::{parse_trace, to_text, validate};

// Anything that parses must validate and survive a text round trip.
fuzz_target!(|data: &str| {
    if let Ok(trace) = parse_trace(data) {
        assert!(validate(&trace).is_empty());
        let text = to_text(&trace);
        assert_eq!(parse_trace(&text).expect("re-parse"), trace);
    }
});
