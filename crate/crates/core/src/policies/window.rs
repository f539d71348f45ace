//! Sliding-window operand bypassing (the BOW comparator).
//!
//! Each warp keeps the registers touched by its last `size` issued
//! instructions. A source hits when it appears in that window. Destination
//! values are buffered when they come back while their instruction is still
//! in the window.

use std::collections::VecDeque;

use crate::trace::Reg;

#[derive(Debug, Clone)]
struct WindowEntry {
    seq: u64,
    /// Register and the value version it carries; `None` until a pending
    /// destination is written back.
    regs: Vec<(Reg, Option<u64>)>,
}

#[derive(Debug, Clone)]
pub struct SlidingWindow {
    size: usize,
    entries: VecDeque<WindowEntry>,
}

impl SlidingWindow {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            entries: VecDeque::with_capacity(size + 1),
        }
    }

    /// Version of `reg` if it is buffered; the most recent occurrence wins.
    pub fn lookup(&self, reg: Reg) -> Option<u64> {
        self.entries
            .iter()
            .rev()
            .find_map(|e| e.regs.iter().rev().find(|(r, _)| *r == reg))
            .and_then(|&(_, v)| v)
    }

    /// Record a newly issued instruction: its sources with the versions it
    /// reads, then its destinations as pending.
    pub fn push(&mut self, seq: u64, sources: &[(Reg, u64)], destinations: &[Reg]) {
        let mut regs: Vec<(Reg, Option<u64>)> =
            sources.iter().map(|&(r, v)| (r, Some(v))).collect();
        regs.extend(destinations.iter().map(|&r| (r, None)));
        self.entries.push_back(WindowEntry { seq, regs });
        while self.entries.len() > self.size {
            self.entries.pop_front();
        }
    }

    /// Buffer a write-back. Returns false when the producer already slid out
    /// of the window (the value then lives only in the register file).
    pub fn write_back(&mut self, seq: u64, reg: Reg, version: u64) -> bool {
        match self.entries.iter_mut().find(|e| e.seq == seq) {
            Some(e) => {
                for slot in e.regs.iter_mut().filter(|(r, v)| *r == reg && v.is_none()) {
                    slot.1 = Some(version);
                }
                true
            }
            None => false,
        }
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}
