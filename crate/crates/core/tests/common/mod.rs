#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfcache::profiler::{Distance, OperandRole, ReuseRecord};
use rfcache::trace::{KernelTrace, OpcodeClass, TraceInstruction, MAX_DESTINATIONS, MAX_SOURCES};

/// Quadratic forward scan: for every operand, the first later instruction of
/// the same warp that reads or writes the register.
pub fn brute_force_distances(trace: &KernelTrace) -> Vec<ReuseRecord> {
    let mut out = Vec::new();
    for (w, stream) in trace.warps.iter().enumerate() {
        for (i, instr) in stream.iter().enumerate() {
            let operands = instr
                .src_regs
                .iter()
                .enumerate()
                .map(|(s, &r)| (OperandRole::Src(s as u8), r))
                .chain(
                    instr
                        .dst_regs
                        .iter()
                        .enumerate()
                        .map(|(s, &r)| (OperandRole::Dst(s as u8), r)),
                );
            for (role, reg) in operands {
                let mut distance = Distance::Infinite;
                for (j, later) in stream.iter().enumerate().skip(i + 1) {
                    if later.src_regs.contains(&reg) || later.dst_regs.contains(&reg) {
                        distance = Distance::Finite((j - i) as u32);
                        break;
                    }
                }
                out.push(ReuseRecord {
                    warp_id: w as u32,
                    dynamic_index: i,
                    static_id: instr.static_id,
                    role,
                    register: reg,
                    distance,
                });
            }
        }
    }
    out
}

/// Random unannotated trace over a small register pool so reuse is common.
pub fn random_trace(seed: u64, max_warps: usize, max_len: usize) -> KernelTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let warps = rng.gen_range(1..=max_warps);
    let pool: u8 = rng.gen_range(2..=40);
    let streams = (0..warps)
        .map(|w| {
            let len = rng.gen_range(1..=max_len);
            (0..len)
                .map(|i| {
                    let op = OpcodeClass::ALL[rng.gen_range(0..OpcodeClass::ALL.len())];
                    let latency = match op {
                        OpcodeClass::Mem => 200,
                        OpcodeClass::Tensor | OpcodeClass::Sfu => 16,
                        _ => rng.gen_range(1..=8),
                    };
                    let ns = rng.gen_range(0..=MAX_SOURCES);
                    let nd = rng.gen_range(0..=MAX_DESTINATIONS);
                    let src: Vec<u8> = (0..ns).map(|_| rng.gen_range(0..pool)).collect();
                    let dst: Vec<u8> = (0..nd).map(|_| rng.gen_range(0..pool)).collect();
                    TraceInstruction::new(w as u32, i as u32, op, latency)
                        .with_sources(&src)
                        .with_destinations(&dst)
                })
                .collect()
        })
        .collect();
    KernelTrace::new(streams)
}
