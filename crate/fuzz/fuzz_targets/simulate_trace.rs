#![no_main]
use libfuzzer_sys::fuzz_target;
use rfcache::profiler::profile_and_annotate;
use rfcache::trace::parse_trace;
use rfcache::{simulate, Mode, SimConfig, SimError};

fuzz_target!(|data: &str| {
    let Ok(trace) = parse_trace(data) else { return };
    if trace.num_instructions() > 256 {
        return;
    }
    let trace = profile_and_annotate(&trace, 1.0, 12);
    for mode in Mode::ALL {
        let mut cfg = SimConfig::default().with_mode(mode);
        cfg.mem_latency = 20;
        cfg.interval = 64;
        match simulate(&trace, &cfg) {
            Ok(r) => assert_eq!(r.ccu_hits + r.bank_reads, r.source_fetches),
            Err(e @ (SimError::Invariant { .. } | SimError::Deadlock { .. })) => panic!("{mode}: {e}"),
            Err(_) => {}
        }
    }
});
