//! Collector allocation for the selected warp.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// What the allocator sees of one collector through its status port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CollectorStatus {
    pub occupied: bool,
    pub owner: Option<u32>,
    /// Any valid cache entry marked NEAR.
    pub has_near: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AllocationDecision {
    Allocate(usize),
    /// The warp's own collector is busy; no other collector may be used.
    StallOccupied,
    /// Every collector is busy.
    StallAllBusy,
    /// Free collectors exist but hold near values; waiting for their owners.
    StallWaiting,
}

/// Per-sub-core scheduler state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulerState {
    pub last_issued: Option<u32>,
    pub waiting_counter: u32,
}

fn random_pick<R: Rng + ?Sized>(candidates: &[usize], rng: &mut R) -> Option<usize> {
    match candidates.len() {
        0 => None,
        n => Some(candidates[rng.gen_range(0..n)]),
    }
}

fn free(collectors: &[CollectorStatus]) -> Vec<usize> {
    collectors
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.occupied)
        .map(|(i, _)| i)
        .collect()
}

fn owned_by(collectors: &[CollectorStatus], warp: u32) -> Option<usize> {
    collectors.iter().position(|c| c.owner == Some(warp))
}

/// Reuse-aware allocation with the waiting mechanism.
///
/// A warp that already owns a collector may only use that one. Otherwise a
/// free collector without near values is taken at random; if every free
/// collector holds near values the warp waits up to `sthld` attempts before
/// taking one anyway.
pub fn malekeh_allocation<R: Rng + ?Sized>(
    warp: u32,
    collectors: &[CollectorStatus],
    state: &mut SchedulerState,
    sthld: u32,
    rng: &mut R,
) -> AllocationDecision {
    if let Some(own) = owned_by(collectors, warp) {
        return if collectors[own].occupied {
            AllocationDecision::StallOccupied
        } else {
            AllocationDecision::Allocate(own)
        };
    }
    let free = free(collectors);
    let far: Vec<usize> = free
        .iter()
        .copied()
        .filter(|&i| !collectors[i].has_near)
        .collect();
    if let Some(pick) = random_pick(&far, rng) {
        state.waiting_counter = 0;
        return AllocationDecision::Allocate(pick);
    }
    if free.is_empty() {
        return AllocationDecision::StallAllBusy;
    }
    if state.waiting_counter < sthld {
        state.waiting_counter += 1;
        return AllocationDecision::StallWaiting;
    }
    state.waiting_counter = 0;
    AllocationDecision::Allocate(random_pick(&free, rng).expect("free is non-empty"))
}

/// Ownership rule without reuse awareness: own collector if free, otherwise a
/// random free collector.
pub fn naive_allocation<R: Rng + ?Sized>(
    warp: u32,
    collectors: &[CollectorStatus],
    rng: &mut R,
) -> AllocationDecision {
    if let Some(own) = owned_by(collectors, warp) {
        return if collectors[own].occupied {
            AllocationDecision::StallOccupied
        } else {
            AllocationDecision::Allocate(own)
        };
    }
    random_free(collectors, rng)
}

/// Conventional operand collectors: any free unit, chosen at random.
pub fn random_free<R: Rng + ?Sized>(
    collectors: &[CollectorStatus],
    rng: &mut R,
) -> AllocationDecision {
    match random_pick(&free(collectors), rng) {
        Some(i) => AllocationDecision::Allocate(i),
        None => AllocationDecision::StallAllBusy,
    }
}

/// Private collectors: the warp's own slot or nothing.
pub fn private_allocation(collectors: &[CollectorStatus], slot: usize) -> AllocationDecision {
    if collectors[slot].occupied {
        AllocationDecision::StallOccupied
    } else {
        AllocationDecision::Allocate(slot)
    }
}
