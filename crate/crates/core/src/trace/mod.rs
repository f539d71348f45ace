//! Instruction-trace data model.
//!
//! A trace is a set of per-warp dynamic instruction streams with control flow
//! already resolved. Register payloads are not modeled; the engine tracks
//! version tokens instead.

mod format;
mod synth;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use format::{load_trace, parse_trace, save_trace, to_text};
pub use synth::{gen_synthetic, SyntheticKind};

/// Architectural register id. CUDA exposes at most 256 registers per thread,
/// so the tag fits in one byte.
pub type Reg = u8;

/// Maximum number of source operand slots in one collector.
pub const MAX_SOURCES: usize = 6;
/// Maximum number of destination registers per instruction.
pub const MAX_DESTINATIONS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum OpcodeClass {
    Alu,
    Sfu,
    Mem,
    Tensor,
    Ctrl,
}

impl OpcodeClass {
    pub const ALL: [OpcodeClass; 5] = [
        OpcodeClass::Alu,
        OpcodeClass::Sfu,
        OpcodeClass::Mem,
        OpcodeClass::Tensor,
        OpcodeClass::Ctrl,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            OpcodeClass::Alu => "ALU",
            OpcodeClass::Sfu => "SFU",
            OpcodeClass::Mem => "MEM",
            OpcodeClass::Tensor => "TENSOR",
            OpcodeClass::Ctrl => "CTRL",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.mnemonic() == s)
    }
}

impl fmt::Display for OpcodeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// One-bit reuse-distance hint attached to an operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Reuse {
    Near,
    Far,
}

impl Reuse {
    pub fn symbol(self) -> char {
        match self {
            Reuse::Near => 'N',
            Reuse::Far => 'F',
        }
    }

    pub fn is_near(self) -> bool {
        self == Reuse::Near
    }
}

/// Per-operand reuse hints, parallel to the source and destination lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReuseAnnotation {
    pub src: Vec<Reuse>,
    pub dst: Vec<Reuse>,
}

/// One dynamic instruction of a warp.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceInstruction {
    pub warp_id: u32,
    /// Identifies the static instruction (plays the role of the PC).
    pub static_id: u32,
    pub opcode: OpcodeClass,
    pub latency: u32,
    pub src_regs: Vec<Reg>,
    pub dst_regs: Vec<Reg>,
    pub reuse: Option<ReuseAnnotation>,
}

impl TraceInstruction {
    pub fn new(warp_id: u32, static_id: u32, opcode: OpcodeClass, latency: u32) -> Self {
        Self {
            warp_id,
            static_id,
            opcode,
            latency,
            src_regs: Vec::new(),
            dst_regs: Vec::new(),
            reuse: None,
        }
    }

    pub fn with_sources(mut self, regs: &[Reg]) -> Self {
        self.src_regs = regs.to_vec();
        self
    }

    pub fn with_destinations(mut self, regs: &[Reg]) -> Self {
        self.dst_regs = regs.to_vec();
        self
    }

    pub fn with_reuse(mut self, src: &[Reuse], dst: &[Reuse]) -> Self {
        self.reuse = Some(ReuseAnnotation {
            src: src.to_vec(),
            dst: dst.to_vec(),
        });
        self
    }

    /// Reuse hint of source slot `slot`, FAR when unannotated.
    pub fn src_hint(&self, slot: usize) -> Reuse {
        self.reuse
            .as_ref()
            .and_then(|r| r.src.get(slot).copied())
            .unwrap_or(Reuse::Far)
    }

    /// Reuse hint of destination slot `slot`, FAR when unannotated.
    pub fn dst_hint(&self, slot: usize) -> Reuse {
        self.reuse
            .as_ref()
            .and_then(|r| r.dst.get(slot).copied())
            .unwrap_or(Reuse::Far)
    }

    pub fn operand_count(&self) -> usize {
        self.src_regs.len() + self.dst_regs.len()
    }

    /// Source registers with duplicates removed, in first-appearance order.
    pub fn distinct_sources(&self) -> Vec<Reg> {
        let mut out: Vec<Reg> = Vec::with_capacity(self.src_regs.len());
        for &r in &self.src_regs {
            if !out.contains(&r) {
                out.push(r);
            }
        }
        out
    }

    fn is_fully_annotated(&self) -> bool {
        match &self.reuse {
            Some(r) => r.src.len() == self.src_regs.len() && r.dst.len() == self.dst_regs.len(),
            None => self.operand_count() == 0,
        }
    }
}

/// A kernel's worth of warps, each with its program-ordered stream.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KernelTrace {
    /// Indexed by warp id; ids are dense in `[0, warps.len())`.
    pub warps: Vec<Vec<TraceInstruction>>,
}

impl KernelTrace {
    pub fn new(warps: Vec<Vec<TraceInstruction>>) -> Self {
        Self { warps }
    }

    pub fn num_warps(&self) -> usize {
        self.warps.len()
    }

    pub fn num_instructions(&self) -> usize {
        self.warps.iter().map(Vec::len).sum()
    }

    pub fn instructions(&self) -> impl Iterator<Item = &TraceInstruction> {
        self.warps.iter().flatten()
    }

    /// True iff every operand of every instruction carries a reuse bit.
    pub fn is_annotated(&self) -> bool {
        self.instructions().all(TraceInstruction::is_fully_annotated)
    }

    /// Number of source operand occurrences (duplicates counted).
    pub fn source_occurrences(&self) -> u64 {
        self.instructions().map(|i| i.src_regs.len() as u64).sum()
    }

    /// Number of source fetches: distinct source registers per instruction.
    pub fn source_fetches(&self) -> u64 {
        self.instructions()
            .map(|i| i.distinct_sources().len() as u64)
            .sum()
    }

    /// Drop all reuse annotations.
    pub fn strip_annotations(&self) -> KernelTrace {
        let mut t = self.clone();
        t.warps
            .iter_mut()
            .flatten()
            .for_each(|i| i.reuse = None);
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    TooManySources,
    TooManyDestinations,
    SourceAnnotationLength,
    DestinationAnnotationLength,
    ZeroLatency,
    WarpIdMismatch,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::TooManySources => "at most 6 source operand slots",
            Rule::TooManyDestinations => "at most 2 destination registers",
            Rule::SourceAnnotationLength => "source annotation length must match source list",
            Rule::DestinationAnnotationLength => {
                "destination annotation length must match destination list"
            }
            Rule::ZeroLatency => "execution latency must be at least 1 cycle",
            Rule::WarpIdMismatch => "instruction warp id must match its stream",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub warp: usize,
    pub index: usize,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "warp {} instruction {}: {}", self.warp, self.index, self.rule)
    }
}

/// Check every type invariant; violations are returned as data.
pub fn validate(trace: &KernelTrace) -> Vec<Violation> {
    let mut out = Vec::new();
    for (w, stream) in trace.warps.iter().enumerate() {
        for (index, instr) in stream.iter().enumerate() {
            let mut push = |rule| out.push(Violation { warp: w, index, rule });
            if instr.warp_id as usize != w {
                push(Rule::WarpIdMismatch);
            }
            if instr.latency == 0 {
                push(Rule::ZeroLatency);
            }
            if instr.src_regs.len() > MAX_SOURCES {
                push(Rule::TooManySources);
            }
            if instr.dst_regs.len() > MAX_DESTINATIONS {
                push(Rule::TooManyDestinations);
            }
            if let Some(r) = &instr.reuse {
                if r.src.len() != instr.src_regs.len() {
                    push(Rule::SourceAnnotationLength);
                }
                if r.dst.len() != instr.dst_regs.len() {
                    push(Rule::DestinationAnnotationLength);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single() -> KernelTrace {
        KernelTrace::new(vec![vec![TraceInstruction::new(0, 0, OpcodeClass::Alu, 4)
            .with_destinations(&[3])
            .with_sources(&[1, 2])]])
    }

    #[test]
    fn valid_single_instruction_has_no_violations() {
        assert!(validate(&single()).is_empty());
    }

    #[test]
    fn seven_sources_violate_slot_limit() {
        let mut t = single();
        t.warps[0][0].src_regs = vec![0, 1, 2, 3, 4, 5, 6];
        let v = validate(&t);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::TooManySources);
        assert_eq!((v[0].warp, v[0].index), (0, 0));
        assert!(v[0].to_string().contains("6 source"));
    }

    #[test]
    fn short_annotation_is_one_violation() {
        let mut t = single();
        t.warps[0][0].reuse = Some(ReuseAnnotation {
            src: vec![Reuse::Near],
            dst: vec![Reuse::Far],
        });
        let v = validate(&t);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::SourceAnnotationLength);
    }

    #[test]
    fn annotated_flag_tracks_every_operand() {
        let mut t = single();
        assert!(!t.is_annotated());
        t.warps[0][0].reuse = Some(ReuseAnnotation {
            src: vec![Reuse::Near, Reuse::Far],
            dst: vec![Reuse::Far],
        });
        assert!(t.is_annotated());
        assert!(KernelTrace::default().is_annotated());
    }

    #[test]
    fn distinct_sources_keep_first_order() {
        let i = TraceInstruction::new(0, 0, OpcodeClass::Alu, 1).with_sources(&[5, 2, 5, 7, 2]);
        assert_eq!(i.distinct_sources(), vec![5, 2, 7]);
    }
}
