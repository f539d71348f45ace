mod common;

use proptest::prelude::*;
use rfcache::profiler::{binarize, exact_reuse_distances, profile_and_annotate, DEFAULT_RTHLD};
use rfcache::trace::{
    gen_synthetic, load_trace, parse_trace, save_trace, to_text, validate, OpcodeClass, Reuse, Rule,
    SyntheticKind, TraceInstruction,
};
use rfcache::{KernelTrace, TraceError};

#[test]
fn minimal_line_parses_unannotated() {
    let t = parse_trace("W0 ALU 4 D:R3 S:R1,R2\n").unwrap();
    assert_eq!(t.num_warps(), 1);
    assert_eq!(t.num_instructions(), 1);
    assert!(!t.is_annotated());
    let i = &t.warps[0][0];
    assert_eq!((i.opcode, i.latency), (OpcodeClass::Alu, 4));
    assert_eq!((i.src_regs.as_slice(), i.dst_regs.as_slice()), (&[1u8, 2][..], &[3u8][..]));
}

#[test]
fn maximal_tensor_line() {
    let t = parse_trace("W0 TENSOR 16 D:R8,R9 S:R0,R1,R2,R3,R4,R5 RD:S=N,N,F,F,N,N;D=F,N").unwrap();
    assert!(t.is_annotated());
    let i = &t.warps[0][0];
    assert_eq!(i.src_regs.len(), 6);
    assert_eq!(i.dst_regs.len(), 2);
    assert_eq!(i.src_hint(2), Reuse::Far);
    assert_eq!(i.dst_hint(1), Reuse::Near);
}

#[test]
fn register_out_of_range_is_rejected() {
    let err = parse_trace("W0 ALU 4 D:R300 S:R1").unwrap_err();
    assert!(matches!(err, TraceError::RegisterOutOfRange { register: 300, .. }));
    assert!(err.to_string().contains("register id out of range"));
}

#[test]
fn empty_lists_and_comments() {
    let t = parse_trace("# header\n\nW0 CTRL 2 D:- S:-   # trailing\nW1 MEM 200 D:R1 S:-\n").unwrap();
    assert_eq!(t.num_warps(), 2);
    assert!(t.warps[0][0].src_regs.is_empty() && t.warps[0][0].dst_regs.is_empty());
}

#[test]
fn parse_errors_carry_line_numbers() {
    for bad in ["W0 ALU 4 D:R1", "W0 FOO 4 D:- S:-", "W0 ALU x D:- S:-", "X0 ALU 4 D:- S:-"] {
        let err = parse_trace(&format!("W0 ALU 1 D:- S:-\n{bad}\n")).unwrap_err();
        assert!(err.to_string().starts_with("line 2"), "{bad}: {err}");
    }
    let seven = "W0 ALU 4 D:- S:R0,R1,R2,R3,R4,R5,R6";
    assert!(matches!(parse_trace(seven), Err(TraceError::OperandCount { count: 7, .. })));
    assert!(matches!(parse_trace("W1 ALU 4 D:- S:-"), Err(TraceError::SparseWarps { missing: 0 })));
}

#[test]
fn validate_reports_rule_violations() {
    let ok = KernelTrace::new(vec![vec![TraceInstruction::new(0, 0, OpcodeClass::Alu, 4).with_sources(&[1])]]);
    assert!(validate(&ok).is_empty());

    let seven = TraceInstruction::new(0, 0, OpcodeClass::Alu, 4).with_sources(&[0, 1, 2, 3, 4, 5, 6]);
    let v = validate(&KernelTrace::new(vec![vec![seven]]));
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].rule, Rule::TooManySources);

    let mut short = TraceInstruction::new(0, 0, OpcodeClass::Alu, 4).with_sources(&[1, 2]);
    short = short.with_reuse(&[Reuse::Near], &[]);
    let v = validate(&KernelTrace::new(vec![vec![short]]));
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].rule, Rule::SourceAnnotationLength);
}

#[test]
fn generators_are_deterministic_and_valid() {
    let kinds = [SyntheticKind::NearReuse, SyntheticKind::FarReuse, SyntheticKind::GemmLike, SyntheticKind::Random];
    for kind in kinds {
        let a = gen_synthetic(kind, 3, 40, 7).unwrap();
        assert_eq!(a, gen_synthetic(kind, 3, 40, 7).unwrap());
        assert!(validate(&a).is_empty(), "{kind:?}");
        assert_eq!(a.num_instructions(), 120);
    }
    assert!(gen_synthetic(SyntheticKind::Random, 0, 10, 1).is_err());
    assert!(gen_synthetic(SyntheticKind::Random, 1, 0, 1).is_err());
}

#[test]
fn gemm_instructions_are_full_tensor_ops() {
    let t = gen_synthetic(SyntheticKind::GemmLike, 2, 20, 1).unwrap();
    for i in t.instructions() {
        assert_eq!(i.opcode, OpcodeClass::Tensor);
        assert_eq!((i.src_regs.len(), i.dst_regs.len()), (6, 2));
    }
}

#[test]
fn far_reuse_binarizes_all_far() {
    let t = gen_synthetic(SyntheticKind::FarReuse, 1, 50, 3).unwrap();
    let records = exact_reuse_distances(&t);
    assert!(!records.is_empty());
    assert!(binarize(&records, DEFAULT_RTHLD).iter().all(|(_, r)| *r == Reuse::Far));
}

#[test]
fn near_reuse_destinations_are_read_soon() {
    let t = gen_synthetic(SyntheticKind::NearReuse, 2, 60, 5).unwrap();
    for stream in &t.warps {
        for (i, instr) in stream.iter().enumerate() {
            let horizon = &stream[i + 1..(i + DEFAULT_RTHLD as usize).min(stream.len())];
            if horizon.len() + 1 < DEFAULT_RTHLD as usize {
                continue;
            }
            for d in &instr.dst_regs {
                assert!(horizon.iter().any(|n| n.src_regs.contains(d)), "instr {i} R{d}");
            }
        }
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.trace");
    let t = profile_and_annotate(&gen_synthetic(SyntheticKind::GemmLike, 2, 10, 4).unwrap(), 0.5, 12);
    save_trace(&t, &path).unwrap();
    assert_eq!(load_trace(&path).unwrap(), t);
}

fn arb_trace() -> impl Strategy<Value = KernelTrace> {
    (any::<u64>(), any::<bool>(), prop::collection::vec(0u32..1000, 0..8)).prop_map(|(seed, annotate, ids)| {
        let mut t = common::random_trace(seed, 6, 30);
        if annotate {
            t = profile_and_annotate(&t, 1.0, 1 + (seed % 20) as u32);
        }
        for (k, id) in ids.into_iter().enumerate() {
            let w = k % t.num_warps();
            let n = t.warps[w].len();
            t.warps[w][(k * 7) % n].static_id = id;
        }
        t
    })
}

proptest! {
    #[test]
    fn text_round_trip(t in arb_trace()) {
        let text = to_text(&t);
        let back = parse_trace(&text).unwrap();
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(to_text(&back), text);
    }

    #[test]
    fn random_traces_validate(t in arb_trace()) {
        prop_assert!(validate(&t).is_empty());
    }
}
