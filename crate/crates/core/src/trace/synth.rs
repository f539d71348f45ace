//! Synthetic kernel generators.
//!
//! NEAR_REUSE, FAR_REUSE and GEMM_LIKE model a loop body that every warp
//! executes identically, so static ids repeat with the body period. RANDOM
//! draws an independent stream per warp.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{KernelTrace, OpcodeClass, Reg, TraceInstruction};
use crate::error::TraceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    NearReuse,
    FarReuse,
    GemmLike,
    Random,
}

impl std::str::FromStr for SyntheticKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "near-reuse" | "near" => Ok(Self::NearReuse),
            "far-reuse" | "far" => Ok(Self::FarReuse),
            "gemm-like" | "gemm" => Ok(Self::GemmLike),
            "random" => Ok(Self::Random),
            other => Err(format!("unknown generator kind `{other}`")),
        }
    }
}

pub const ALU_LATENCY: u32 = 4;
pub const SFU_LATENCY: u32 = 16;
pub const TENSOR_LATENCY: u32 = 16;
pub const MEM_LATENCY: u32 = 200;
pub const CTRL_LATENCY: u32 = 2;

const NEAR_BODY: usize = 8;
const FAR_POOL: usize = 40;
const FAR_OFFSETS: [usize; 2] = [13, 26];
const GEMM_FRAGMENT_SETS: usize = 4;
const GEMM_TILE_WIDTH: Reg = 4;
const RANDOM_POOL: u8 = 32;

#[derive(Clone)]
struct BodyOp {
    opcode: OpcodeClass,
    latency: u32,
    src: Vec<Reg>,
    dst: Vec<Reg>,
}

/// Generate a synthetic kernel. Deterministic for fixed arguments.
pub fn gen_synthetic(
    kind: SyntheticKind,
    num_warps: usize,
    instrs_per_warp: usize,
    seed: u64,
) -> Result<KernelTrace, TraceError> {
    if num_warps == 0 {
        return Err(TraceError::InvalidParameter("num_warps must be >= 1".into()));
    }
    if instrs_per_warp == 0 {
        return Err(TraceError::InvalidParameter(
            "instrs_per_warp must be >= 1".into(),
        ));
    }
    if num_warps > u32::MAX as usize {
        return Err(TraceError::InvalidParameter("too many warps".into()));
    }
    let warps = match kind {
        SyntheticKind::NearReuse => replicate(&near_body(seed), num_warps, instrs_per_warp),
        SyntheticKind::FarReuse => replicate(&far_body(), num_warps, instrs_per_warp),
        SyntheticKind::GemmLike => replicate(&gemm_body(), num_warps, instrs_per_warp),
        SyntheticKind::Random => (0..num_warps)
            .map(|w| random_stream(w as u32, instrs_per_warp, seed))
            .collect(),
    };
    Ok(KernelTrace::new(warps))
}

fn replicate(body: &[BodyOp], num_warps: usize, len: usize) -> Vec<Vec<TraceInstruction>> {
    (0..num_warps)
        .map(|w| {
            (0..len)
                .map(|i| {
                    let op = &body[i % body.len()];
                    let mut instr = TraceInstruction::new(
                        w as u32,
                        (i % body.len()) as u32,
                        op.opcode,
                        op.latency,
                    );
                    instr.src_regs = op.src.clone();
                    instr.dst_regs = op.dst.clone();
                    instr
                })
                .collect()
        })
        .collect()
}

/// Body `j` writes `R[j]` and reads the value written one instruction earlier
/// plus one written 2..=5 instructions earlier. Every register is touched at
/// least once per body period, so all distances stay below the body length.
fn near_body(seed: u64) -> Vec<BodyOp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..NEAR_BODY)
        .map(|j| {
            let back = rng.gen_range(2..=5);
            let (opcode, latency) = if rng.gen_bool(0.2) {
                (OpcodeClass::Sfu, SFU_LATENCY)
            } else {
                (OpcodeClass::Alu, ALU_LATENCY)
            };
            BodyOp {
                opcode,
                latency,
                src: vec![
                    ((j + NEAR_BODY - 1) % NEAR_BODY) as Reg,
                    ((j + NEAR_BODY - back) % NEAR_BODY) as Reg,
                ],
                dst: vec![j as Reg],
            }
        })
        .collect()
}

/// Register `x` is written at `x`, read at `x+13` and `x+26`, and rewritten at
/// `x+40`: every gap is at least 13 instructions.
fn far_body() -> Vec<BodyOp> {
    (0..FAR_POOL)
        .map(|j| BodyOp {
            opcode: OpcodeClass::Alu,
            latency: ALU_LATENCY,
            src: FAR_OFFSETS
                .iter()
                .map(|off| ((j + FAR_POOL - off) % FAR_POOL) as Reg)
                .collect(),
            dst: vec![j as Reg],
        })
        .collect()
}

/// A 2x2 tile of MMA operations per loop iteration. Accumulators `R0..R7`
/// live across iterations; A/B fragments rotate through four register sets,
/// so a fragment is reused once inside the iteration and then only after
/// several iterations.
/// One A fragment multiplied against `GEMM_TILE_WIDTH` B fragments per
/// k-step. Accumulator pairs live in the lowest registers and are read and
/// written by every k-step.
fn gemm_body() -> Vec<BodyOp> {
    let mut body = Vec::new();
    for set in 0..GEMM_FRAGMENT_SETS {
        let base = 2 * GEMM_TILE_WIDTH + (2 + 2 * GEMM_TILE_WIDTH) * set as Reg;
        for n in 0..GEMM_TILE_WIDTH {
            let acc = [2 * n, 2 * n + 1];
            let src = vec![base, base + 1, base + 2 + 2 * n, base + 3 + 2 * n, acc[0], acc[1]];
            body.push(BodyOp {
                opcode: OpcodeClass::Tensor,
                latency: TENSOR_LATENCY,
                src,
                dst: acc.to_vec(),
            });
        }
    }
    body
}

fn random_stream(warp: u32, len: usize, seed: u64) -> Vec<TraceInstruction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(warp) << 32) ^ 0x5eed_0000_0000);
    let reg = |rng: &mut ChaCha8Rng| rng.gen_range(0..RANDOM_POOL);
    (0..len)
        .map(|i| {
            let roll: u32 = rng.gen_range(0..100);
            let (opcode, latency, nsrc, ndst) = match roll {
                0..=59 => (OpcodeClass::Alu, ALU_LATENCY, rng.gen_range(1..=3), 1),
                60..=69 => (OpcodeClass::Sfu, SFU_LATENCY, 1, 1),
                70..=79 => (OpcodeClass::Mem, MEM_LATENCY, 1, 1),
                80..=84 => (OpcodeClass::Mem, MEM_LATENCY, 2, 0),
                85..=89 => (OpcodeClass::Tensor, TENSOR_LATENCY, 6, 2),
                _ => (OpcodeClass::Ctrl, CTRL_LATENCY, rng.gen_range(0..=1), 0),
            };
            let src: Vec<Reg> = (0..nsrc).map(|_| reg(&mut rng)).collect();
            let mut dst: Vec<Reg> = Vec::with_capacity(ndst);
            while dst.len() < ndst {
                let r = reg(&mut rng);
                if !dst.contains(&r) {
                    dst.push(r);
                }
            }
            TraceInstruction::new(warp, i as u32, opcode, latency)
                .with_sources(&src)
                .with_destinations(&dst)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::validate;

    #[test]
    fn deterministic() {
        for kind in [
            SyntheticKind::NearReuse,
            SyntheticKind::FarReuse,
            SyntheticKind::GemmLike,
            SyntheticKind::Random,
        ] {
            let a = gen_synthetic(kind, 3, 40, 7).unwrap();
            let b = gen_synthetic(kind, 3, 40, 7).unwrap();
            assert_eq!(a, b);
            assert!(validate(&a).is_empty());
        }
        assert_eq!(
            gen_synthetic(SyntheticKind::NearReuse, 1, 10, 7).unwrap(),
            gen_synthetic(SyntheticKind::NearReuse, 1, 10, 7).unwrap()
        );
    }

    #[test]
    fn gemm_is_all_tensor_six_by_two() {
        let t = gen_synthetic(SyntheticKind::GemmLike, 2, 20, 1).unwrap();
        assert_eq!(t.num_warps(), 2);
        for i in t.instructions() {
            assert_eq!(i.opcode, OpcodeClass::Tensor);
            assert_eq!(i.src_regs.len(), 6);
            assert_eq!(i.dst_regs.len(), 2);
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(gen_synthetic(SyntheticKind::Random, 0, 10, 1).is_err());
        assert!(gen_synthetic(SyntheticKind::Random, 1, 0, 1).is_err());
    }

    #[test]
    fn random_warps_differ() {
        let t = gen_synthetic(SyntheticKind::Random, 2, 50, 3).unwrap();
        let strip = |w: &Vec<TraceInstruction>| {
            w.iter().map(|i| (i.opcode, i.src_regs.clone())).collect::<Vec<_>>()
        };
        assert_ne!(strip(&t.warps[0]), strip(&t.warps[1]));
    }

    #[test]
    fn kind_parses() {
        assert_eq!("NEAR_REUSE".parse::<SyntheticKind>(), Ok(SyntheticKind::NearReuse));
        assert_eq!("gemm-like".parse::<SyntheticKind>(), Ok(SyntheticKind::GemmLike));
        assert!("bogus".parse::<SyntheticKind>().is_err());
    }
}
