//! Caching collector unit: cache table (CT), operand collector table (OCT)
//! and the operations applied to them.

use rand::Rng;

use crate::policies::ReplacementPolicy;
use crate::trace::{Reg, Reuse, TraceInstruction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CtEntry {
    pub tag: Reg,
    pub valid: bool,
    pub lock: bool,
    pub reuse: Reuse,
    /// 0 is most recently used; ranks of valid entries are `0..n_valid`.
    pub lru_rank: u8,
    pub version: u64,
}

impl Default for CtEntry {
    fn default() -> Self {
        Self {
            tag: 0,
            valid: false,
            lock: false,
            reuse: Reuse::Far,
            lru_rank: 0,
            version: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheTable {
    entries: Vec<CtEntry>,
}

impl CacheTable {
    pub fn new(n: usize) -> Self {
        Self {
            entries: vec![CtEntry::default(); n],
        }
    }

    pub fn entries(&self) -> &[CtEntry] {
        &self.entries
    }

    pub fn lookup(&self, reg: Reg) -> Option<usize> {
        self.entries.iter().position(|e| e.valid && e.tag == reg)
    }

    /// Make entry `idx` the most recently used.
    pub fn touch(&mut self, idx: usize) {
        debug_assert!(self.entries[idx].valid);
        let rank = self.entries[idx].lru_rank;
        for e in self.entries.iter_mut().filter(|e| e.valid && e.lru_rank < rank) {
            e.lru_rank += 1;
        }
        self.entries[idx].lru_rank = 0;
    }

    /// Fill entry `idx` (evicting its previous content) as most recently used.
    pub fn install(&mut self, idx: usize, tag: Reg, reuse: Reuse, version: u64) {
        if self.entries[idx].valid {
            self.invalidate(idx);
        }
        for e in self.entries.iter_mut().filter(|e| e.valid) {
            e.lru_rank += 1;
        }
        self.entries[idx] = CtEntry {
            tag,
            valid: true,
            lock: false,
            reuse,
            lru_rank: 0,
            version,
        };
    }

    pub fn invalidate(&mut self, idx: usize) {
        let removed = self.entries[idx];
        if !removed.valid {
            return;
        }
        for e in self
            .entries
            .iter_mut()
            .filter(|e| e.valid && e.lru_rank > removed.lru_rank)
        {
            e.lru_rank -= 1;
        }
        self.entries[idx] = CtEntry::default();
    }

    pub fn flush(&mut self) {
        self.entries.fill(CtEntry::default());
    }

    pub fn set_lock(&mut self, idx: usize, lock: bool) {
        self.entries[idx].lock = lock;
    }

    pub fn set_reuse(&mut self, idx: usize, reuse: Reuse) {
        self.entries[idx].reuse = reuse;
    }

    pub fn set_version(&mut self, idx: usize, version: u64) {
        self.entries[idx].version = version;
    }

    pub fn any_valid(&self) -> bool {
        self.entries.iter().any(|e| e.valid)
    }

    pub fn has_near(&self) -> bool {
        self.entries.iter().any(|e| e.valid && e.reuse.is_near())
    }

    pub fn locked_count(&self) -> usize {
        self.entries.iter().filter(|e| e.lock).count()
    }

    pub fn check_invariants(&self, max_locked: usize) -> Result<(), String> {
        let mut seen = vec![false; self.entries.len()];
        let mut tags = [false; 256];
        let n_valid = self.entries.iter().filter(|e| e.valid).count();
        for (i, e) in self.entries.iter().enumerate() {
            if e.lock && !e.valid {
                return Err(format!("CT entry {i} locked but invalid"));
            }
            if !e.valid {
                continue;
            }
            let r = e.lru_rank as usize;
            if r >= n_valid || seen[r] {
                return Err(format!("CT LRU ranks not distinct/compact at entry {i}"));
            }
            seen[r] = true;
            if std::mem::replace(&mut tags[e.tag as usize], true) {
                return Err(format!("CT holds R{} twice", e.tag));
            }
        }
        if self.locked_count() > max_locked {
            return Err(format!("{} CT entries locked", self.locked_count()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OctSlot {
    pub valid: bool,
    pub ready: bool,
    pub index: u8,
}

/// Metadata of the instruction held by an occupied collector.
#[derive(Debug, Clone)]
pub struct Collected {
    pub warp: u32,
    pub index: usize,
    pub issue_seq: u64,
    /// Register-file version of each source slot at issue time.
    pub expected: Vec<u64>,
}

/// Result of an allocation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Allocated {
    /// Distinct source registers found in the CT (or bypass buffer).
    pub hits: u32,
    /// Bank reads to enqueue: register and the first OCT slot waiting on it.
    pub requests: Vec<(Reg, usize)>,
}

#[derive(Debug, Clone)]
pub struct Ccu {
    pub ct: CacheTable,
    pub oct: Vec<OctSlot>,
    pub occupied: bool,
    /// Last occupant; kept while free so its CT contents can be reused.
    pub owner: Option<u32>,
    pub current: Option<Collected>,
}

impl Ccu {
    pub fn new(ct_entries: usize, oct_slots: usize) -> Self {
        Self {
            ct: CacheTable::new(ct_entries),
            oct: vec![OctSlot::default(); oct_slots],
            occupied: false,
            owner: None,
            current: None,
        }
    }

    /// Take an instruction into the collector.
    ///
    /// With `retain` unset the CT is flushed on every allocation (conventional
    /// collector). `bypass` supplies values held outside the CT; it is
    /// consulted on a CT miss and returns the value version when present.
    pub fn allocate<R: Rng + ?Sized>(
        &mut self,
        instr: &TraceInstruction,
        meta: Collected,
        retain: bool,
        policy: ReplacementPolicy,
        bypass: &dyn Fn(Reg) -> Option<u64>,
        rng: &mut R,
    ) -> Allocated {
        assert!(!self.occupied, "allocation into an occupied collector");
        if !retain || self.owner != Some(instr.warp_id) {
            self.ct.flush();
        }
        self.owner = Some(instr.warp_id);
        self.occupied = true;
        self.oct.fill(OctSlot::default());
        let mut out = Allocated::default();
        // Tag checks happen before any replacement, so hits are locked first.
        let mut missed: Vec<usize> = Vec::new();
        for (slot, &reg) in instr.src_regs.iter().enumerate() {
            if instr.src_regs[..slot].contains(&reg) {
                continue;
            }
            match self.ct.lookup(reg) {
                Some(idx) => {
                    self.ct.touch(idx);
                    self.ct.set_lock(idx, true);
                    out.hits += 1;
                    self.oct[slot] = OctSlot {
                        valid: true,
                        ready: true,
                        index: idx as u8,
                    };
                }
                None => missed.push(slot),
            }
        }
        for slot in missed {
            let reg = instr.src_regs[slot];
            let idx = policy
                .select(&self.ct, rng)
                .expect("no replaceable CT entry: every entry is locked");
            let ready = match bypass(reg) {
                Some(version) => {
                    self.ct.install(idx, reg, instr.src_hint(slot), version);
                    out.hits += 1;
                    true
                }
                None => {
                    self.ct.install(idx, reg, instr.src_hint(slot), 0);
                    out.requests.push((reg, slot));
                    false
                }
            };
            self.ct.set_lock(idx, true);
            self.oct[slot] = OctSlot {
                valid: true,
                ready,
                index: idx as u8,
            };
        }
        for (slot, &reg) in instr.src_regs.iter().enumerate() {
            if let Some(first) = instr.src_regs[..slot].iter().position(|&r| r == reg) {
                // duplicate source: share the entry of its first slot
                self.oct[slot] = self.oct[first];
            }
            self.ct.set_reuse(self.oct[slot].index as usize, instr.src_hint(slot));
        }
        self.current = Some(meta);
        out
    }

    /// A granted bank read arrives for `slot`.
    pub fn receive_source(&mut self, slot: usize, version: u64) {
        let s = self.oct[slot];
        assert!(s.valid && !s.ready, "delivery to OCT slot {slot} that is not waiting");
        self.ct.set_version(s.index as usize, version);
        for o in self.oct.iter_mut().filter(|o| o.valid && o.index == s.index) {
            o.ready = true;
        }
    }

    pub fn is_ready(&self) -> bool {
        self.occupied && self.oct.iter().all(|s| !s.valid || s.ready)
    }

    /// Hand the instruction to its execution unit. The CT and owner stay.
    pub fn dispatch(&mut self) -> Collected {
        for s in self.oct.iter().filter(|s| s.valid) {
            self.ct.set_lock(s.index as usize, false);
        }
        self.oct.fill(OctSlot::default());
        self.occupied = false;
        self.current.take().expect("dispatch from an empty collector")
    }

    /// Cache a written-back destination value.
    pub fn write_back<R: Rng + ?Sized>(
        &mut self,
        reg: Reg,
        reuse: Reuse,
        version: u64,
        policy: ReplacementPolicy,
        rng: &mut R,
    ) {
        match self.ct.lookup(reg) {
            Some(idx) => {
                self.ct.set_version(idx, version);
                self.ct.set_reuse(idx, reuse);
                self.ct.touch(idx);
            }
            None => {
                let idx = policy
                    .select(&self.ct, rng)
                    .expect("no replaceable CT entry: every entry is locked");
                self.ct.install(idx, reg, reuse, version);
            }
        }
    }

    /// Drop a stale copy of `reg` after a write that was not cached.
    pub fn invalidate_reg(&mut self, reg: Reg) {
        if let Some(idx) = self.ct.lookup(reg) {
            assert!(
                !self.ct.entries()[idx].lock,
                "write-back to R{reg} while a collecting instruction reads it"
            );
            self.ct.invalidate(idx);
        }
    }

    pub fn flush(&mut self) {
        self.ct.flush();
        self.owner = None;
    }
}
