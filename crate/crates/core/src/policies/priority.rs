//! Warp issue priorities. Age is creation order: a lower warp id is older.

/// Greedy-then-oldest: the last issued warp if ready, then ready warps by age.
pub fn gto_priority(ready: &[u32], last_issued: Option<u32>) -> Vec<u32> {
    let mut rest: Vec<u32> = ready.to_vec();
    rest.sort_unstable();
    rest.dedup();
    let mut out = Vec::with_capacity(rest.len());
    if let Some(last) = last_issued {
        if let Some(pos) = rest.iter().position(|&w| w == last) {
            out.push(rest.remove(pos));
        }
    }
    out.extend(rest);
    out
}

/// The last issued warp if ready, then warps holding data in a collector,
/// then the rest; age order inside each group.
pub fn malekeh_priority(
    ready: &[u32],
    last_issued: Option<u32>,
    has_cached_data: impl Fn(u32) -> bool,
) -> Vec<u32> {
    let gto = gto_priority(ready, last_issued);
    let mut out = Vec::with_capacity(gto.len());
    let mut tail = gto.as_slice();
    if let (Some(&first), Some(last)) = (gto.first(), last_issued) {
        if first == last {
            out.push(first);
            tail = &gto[1..];
        }
    }
    let (with, without): (Vec<u32>, Vec<u32>) = tail.iter().partition(|&&w| has_cached_data(w));
    out.extend(with);
    out.extend(without);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gto_prefers_last_then_oldest() {
        assert_eq!(gto_priority(&[5, 2, 7], Some(7)), vec![7, 2, 5]);
        assert_eq!(gto_priority(&[5, 2, 7], Some(3)), vec![2, 5, 7]);
        assert!(gto_priority(&[], Some(1)).is_empty());
    }

    #[test]
    fn last_issued_wins_regardless_of_ownership() {
        let order = malekeh_priority(&[1, 3, 4], Some(4), |w| w == 3);
        assert_eq!(order, vec![4, 3, 1]);
    }

    #[test]
    fn owning_category_beats_age() {
        // warp 3 owns collector data, warp 1 is older but owns nothing.
        assert_eq!(malekeh_priority(&[3, 1], Some(0), |w| w == 3), vec![3, 1]);
    }

    #[test]
    fn age_within_category() {
        assert_eq!(malekeh_priority(&[7, 2, 4], None, |w| w != 4), vec![2, 7, 4]);
    }
}
