use rand::Rng;

use crate::engine::ccu::CacheTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplacementPolicy {
    /// Invalid entry, else a random unlocked FAR entry, else unlocked LRU.
    ReuseAware,
    /// Invalid entry, else unlocked LRU.
    Lru,
}

impl ReplacementPolicy {
    /// Pick a victim. `None` means every entry is locked, which the engine
    /// treats as a bug: at most `oct_slots` entries are ever locked.
    pub fn select<R: Rng + ?Sized>(self, ct: &CacheTable, rng: &mut R) -> Option<usize> {
        if let Some(i) = ct.entries().iter().position(|e| !e.valid) {
            return Some(i);
        }
        if self == ReplacementPolicy::ReuseAware {
            let far: Vec<usize> = ct
                .entries()
                .iter()
                .enumerate()
                .filter(|(_, e)| !e.lock && !e.reuse.is_near())
                .map(|(i, _)| i)
                .collect();
            if !far.is_empty() {
                return Some(far[rng.gen_range(0..far.len())]);
            }
        }
        ct.entries()
            .iter()
            .enumerate()
            .filter(|(_, e)| !e.lock)
            .max_by_key(|(_, e)| e.lru_rank)
            .map(|(i, _)| i)
    }
}
