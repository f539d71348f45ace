//! Reuse-distance profiling and static near/far annotation.
//!
//! Distances are counted in the warp's own program order: distance 1 means
//! the register is touched again by the very next instruction of the warp.
//! Both reads and writes count as uses.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::trace::{KernelTrace, Reg, Reuse, ReuseAnnotation};

pub const DEFAULT_RTHLD: u32 = 12;
pub const DEFAULT_PROFILE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperandRole {
    Src(u8),
    Dst(u8),
}

impl OperandRole {
    pub fn kind(self) -> &'static str {
        match self {
            OperandRole::Src(_) => "src",
            OperandRole::Dst(_) => "dst",
        }
    }

    pub fn slot(self) -> u8 {
        match self {
            OperandRole::Src(s) | OperandRole::Dst(s) => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Distance {
    Finite(u32),
    Infinite,
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(d) => write!(f, "{d}"),
            Distance::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReuseRecord {
    pub warp_id: u32,
    pub dynamic_index: usize,
    pub static_id: u32,
    pub role: OperandRole,
    pub register: Reg,
    pub distance: Distance,
}

/// One exact-distance record per dynamic operand occurrence, in program order
/// (sources before destinations within an instruction).
pub fn exact_reuse_distances(trace: &KernelTrace) -> Vec<ReuseRecord> {
    let mut out = Vec::with_capacity(
        trace.instructions().map(|i| i.operand_count()).sum(),
    );
    for stream in &trace.warps {
        let start = out.len();
        // Index of the next instruction (strictly later) touching each register.
        let mut next_use: [Option<usize>; 256] = [None; 256];
        for (idx, instr) in stream.iter().enumerate().rev() {
            let distance = |r: Reg| match next_use[r as usize] {
                Some(n) => Distance::Finite((n - idx) as u32),
                None => Distance::Infinite,
            };
            let mut here: Vec<ReuseRecord> = Vec::with_capacity(instr.operand_count());
            for (slot, &r) in instr.src_regs.iter().enumerate() {
                here.push(ReuseRecord {
                    warp_id: instr.warp_id,
                    dynamic_index: idx,
                    static_id: instr.static_id,
                    role: OperandRole::Src(slot as u8),
                    register: r,
                    distance: distance(r),
                });
            }
            for (slot, &r) in instr.dst_regs.iter().enumerate() {
                here.push(ReuseRecord {
                    warp_id: instr.warp_id,
                    dynamic_index: idx,
                    static_id: instr.static_id,
                    role: OperandRole::Dst(slot as u8),
                    register: r,
                    distance: distance(r),
                });
            }
            for &r in instr.src_regs.iter().chain(&instr.dst_regs) {
                next_use[r as usize] = Some(idx);
            }
            // Built back to front; each instruction's block is reversed at the end.
            here.reverse();
            out.extend(here);
        }
        out[start..].reverse();
    }
    out
}

/// Near iff the distance is strictly below `rthld`; equality and "never
/// reused" are far.
pub fn classify(distance: Distance, rthld: u32) -> Reuse {
    match distance {
        Distance::Finite(d) if d < rthld => Reuse::Near,
        _ => Reuse::Far,
    }
}

pub fn binarize(records: &[ReuseRecord], rthld: u32) -> Vec<(ReuseRecord, Reuse)> {
    assert!(rthld >= 1, "rthld must be >= 1");
    records
        .iter()
        .map(|r| (r.clone(), classify(r.distance, rthld)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaticAnnotation {
    pub static_id: u32,
    pub role: OperandRole,
    pub verdict: Reuse,
    pub near_count: u32,
    pub far_count: u32,
}

impl StaticAnnotation {
    pub fn from_counts(static_id: u32, role: OperandRole, near_count: u32, far_count: u32) -> Self {
        // Ties go to FAR.
        let verdict = if near_count > far_count {
            Reuse::Near
        } else {
            Reuse::Far
        };
        Self {
            static_id,
            role,
            verdict,
            near_count,
            far_count,
        }
    }
}

/// Number of leading warps profiled for a given fraction.
pub fn profiled_warp_count(num_warps: usize, fraction: f64) -> usize {
    if num_warps == 0 {
        return 0;
    }
    let n = (fraction * num_warps as f64).ceil() as usize;
    n.clamp(1, num_warps)
}

/// Majority vote over the first `ceil(fraction * num_warps)` warps. Output is
/// sorted by static id, then operand role.
pub fn majority_annotate(
    trace: &KernelTrace,
    profiled_warp_fraction: f64,
    rthld: u32,
) -> Vec<StaticAnnotation> {
    assert!(
        profiled_warp_fraction > 0.0 && profiled_warp_fraction <= 1.0,
        "profiled fraction must be in (0, 1]"
    );
    let selected = profiled_warp_count(trace.num_warps(), profiled_warp_fraction);
    let subset = KernelTrace::new(trace.warps[..selected].to_vec());
    let mut counts: BTreeMap<(u32, OperandRole), (u32, u32)> = BTreeMap::new();
    for (rec, verdict) in binarize(&exact_reuse_distances(&subset), rthld) {
        let entry = counts.entry((rec.static_id, rec.role)).or_default();
        match verdict {
            Reuse::Near => entry.0 += 1,
            Reuse::Far => entry.1 += 1,
        }
    }
    counts
        .into_iter()
        .map(|((sid, role), (near, far))| StaticAnnotation::from_counts(sid, role, near, far))
        .collect()
}

/// Fill every operand's reuse bit from the static table; unknown operands are
/// FAR.
pub fn annotate_trace(trace: &KernelTrace, annotations: &[StaticAnnotation]) -> KernelTrace {
    let table: BTreeMap<(u32, OperandRole), Reuse> = annotations
        .iter()
        .map(|a| ((a.static_id, a.role), a.verdict))
        .collect();
    let lookup = |sid: u32, role| table.get(&(sid, role)).copied().unwrap_or(Reuse::Far);
    let mut out = trace.clone();
    for instr in out.warps.iter_mut().flatten() {
        let sid = instr.static_id;
        instr.reuse = Some(ReuseAnnotation {
            src: (0..instr.src_regs.len())
                .map(|s| lookup(sid, OperandRole::Src(s as u8)))
                .collect(),
            dst: (0..instr.dst_regs.len())
                .map(|s| lookup(sid, OperandRole::Dst(s as u8)))
                .collect(),
        });
    }
    out
}

/// Profile with the given parameters and annotate the whole trace.
pub fn profile_and_annotate(trace: &KernelTrace, fraction: f64, rthld: u32) -> KernelTrace {
    annotate_trace(trace, &majority_annotate(trace, fraction, rthld))
}

/// Distance histogram with buckets 1..=10, ">10" and "inf".
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceHistogram {
    pub exact: [u64; 10],
    pub beyond_ten: u64,
    pub infinite: u64,
}

impl DistanceHistogram {
    pub fn from_records(records: &[ReuseRecord]) -> Self {
        let mut h = Self::default();
        for r in records {
            match r.distance {
                Distance::Finite(d) if (1..=10).contains(&d) => h.exact[d as usize - 1] += 1,
                Distance::Finite(_) => h.beyond_ten += 1,
                Distance::Infinite => h.infinite += 1,
            }
        }
        h
    }

    pub fn total(&self) -> u64 {
        self.exact.iter().sum::<u64>() + self.beyond_ten + self.infinite
    }

    /// `(label, count)` rows in bucket order.
    pub fn rows(&self) -> Vec<(String, u64)> {
        let mut rows: Vec<(String, u64)> = self
            .exact
            .iter()
            .enumerate()
            .map(|(i, &c)| ((i + 1).to_string(), c))
            .collect();
        rows.push((">10".into(), self.beyond_ten));
        rows.push(("inf".into(), self.infinite));
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bucket,count\n");
        for (label, count) in self.rows() {
            s.push_str(&format!("{label},{count}\n"));
        }
        s
    }
}

pub fn annotations_to_csv(annotations: &[StaticAnnotation]) -> String {
    let mut s = String::from("static_id,role,slot,near,far,verdict\n");
    for a in annotations {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            a.static_id,
            a.role.kind(),
            a.role.slot(),
            a.near_count,
            a.far_count,
            a.verdict.symbol()
        ));
    }
    s
}
