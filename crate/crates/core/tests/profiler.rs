mod common;

use proptest::prelude::*;
use rfcache::profiler::{
    annotations_to_csv, classify, exact_reuse_distances, majority_annotate, profile_and_annotate,
    Distance, DistanceHistogram, OperandRole, StaticAnnotation,
};
use rfcache::trace::{gen_synthetic, parse_trace, Reuse, SyntheticKind};

#[test]
fn distance_one_is_the_next_instruction() {
    let t = parse_trace("W0 ALU 1 D:R1 S:-\nW0 ALU 1 D:- S:R1\nW0 ALU 1 D:- S:R2\n").unwrap();
    let r = exact_reuse_distances(&t);
    assert_eq!(r[0].role, OperandRole::Dst(0));
    assert_eq!(r[0].distance, Distance::Finite(1));
    assert_eq!(r[1].distance, Distance::Infinite);
}

#[test]
fn writes_end_and_start_intervals() {
    // R1 read, overwritten two instructions later, read again right after.
    let t = parse_trace("W0 ALU 1 D:- S:R1\nW0 ALU 1 D:- S:R5\nW0 ALU 1 D:R1 S:-\nW0 ALU 1 D:- S:R1\n").unwrap();
    let r = exact_reuse_distances(&t);
    assert_eq!(r[0].distance, Distance::Finite(2));
    assert_eq!(r[2].distance, Distance::Finite(1));
}

#[test]
fn warps_are_independent() {
    let t = parse_trace("W0 ALU 1 D:- S:R1\nW1 ALU 1 D:- S:R1\n").unwrap();
    assert!(exact_reuse_distances(&t).iter().all(|r| r.distance == Distance::Infinite));
}

#[test]
fn threshold_boundary_is_far() {
    assert_eq!(classify(Distance::Finite(11), 12), Reuse::Near);
    assert_eq!(classify(Distance::Finite(12), 12), Reuse::Far);
    assert_eq!(classify(Distance::Infinite, 12), Reuse::Far);
}

#[test]
fn majority_ties_go_far() {
    assert_eq!(StaticAnnotation::from_counts(0, OperandRole::Src(0), 3, 3).verdict, Reuse::Far);
    assert_eq!(StaticAnnotation::from_counts(0, OperandRole::Src(0), 4, 3).verdict, Reuse::Near);
}

#[test]
fn majority_vote_over_static_ids() {
    // Static instruction 0 reads R1; its next use is at distance 1 twice and
    // infinite once, so the vote is NEAR.
    let text = "W0 ALU 1 D:- S:R1\nW0 ALU 1 D:- S:R1 @0\nW0 ALU 1 D:- S:R1 @0\n";
    let anns = majority_annotate(&parse_trace(text).unwrap(), 1.0, 12);
    let a = anns.iter().find(|a| a.static_id == 0).unwrap();
    assert_eq!((a.near_count, a.far_count, a.verdict), (2, 1, Reuse::Near));
    assert!(annotations_to_csv(&anns).starts_with("static_id,role,slot,near,far,verdict\n"));
}

#[test]
fn histograms_follow_generators() {
    let near = gen_synthetic(SyntheticKind::NearReuse, 4, 200, 1).unwrap();
    let h = DistanceHistogram::from_records(&exact_reuse_distances(&near));
    assert!(h.exact.iter().sum::<u64>() > h.beyond_ten + h.infinite);

    let far = gen_synthetic(SyntheticKind::FarReuse, 4, 200, 1).unwrap();
    let h = DistanceHistogram::from_records(&exact_reuse_distances(&far));
    assert!(h.beyond_ten + h.infinite > h.exact.iter().sum::<u64>());

    let empty = DistanceHistogram::from_records(&[]);
    assert_eq!(empty.total(), 0);
    assert_eq!(empty.to_csv().lines().count(), 13);
}

#[test]
fn annotation_covers_every_operand() {
    let t = profile_and_annotate(&common::random_trace(9, 10, 50), 0.05, 12);
    assert!(t.is_annotated());
}

proptest! {
    #[test]
    fn matches_brute_force(seed in any::<u64>(), warps in 1usize..6, len in 1usize..200) {
        let t = common::random_trace(seed, warps, len);
        prop_assert_eq!(exact_reuse_distances(&t), common::brute_force_distances(&t));
    }

    #[test]
    fn record_count_is_operand_count(seed in any::<u64>()) {
        let t = common::random_trace(seed, 4, 50);
        let ops: usize = t.instructions().map(|i| i.src_regs.len() + i.dst_regs.len()).sum();
        prop_assert_eq!(exact_reuse_distances(&t).len(), ops);
    }

    #[test]
    fn classify_is_monotone_in_threshold(d in 1u32..100, r in 1u32..100) {
        if classify(Distance::Finite(d), r) == Reuse::Near {
            prop_assert_eq!(classify(Distance::Finite(d), r + 1), Reuse::Near);
        }
    }
}
