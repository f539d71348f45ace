//! Cycle-level engine.
//!
//! Warps are partitioned over SMs and sub-cores. Each cycle every sub-core
//! runs write-back, bank arbitration, dispatch and issue in that order, then
//! the GPU-wide interval hook runs. Register values are replaced by version
//! tokens so that every value a collector hands to an execution unit can be
//! audited against the register file.

pub mod ccu;

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adaptive::{AdaptiveParams, AdaptiveState};
use crate::config::{Mode, SimConfig, SthldMode};
use crate::error::SimError;
use crate::metrics::{self, Counters, IntervalSample, MetricsReport};
use crate::policies::{
    gto_priority, malekeh_allocation, malekeh_priority, naive_allocation, private_allocation,
    random_free, AllocationDecision, CollectorStatus, ReplacementPolicy, SchedulerState,
    SlidingWindow,
};
use crate::trace::{validate, KernelTrace, OpcodeClass, Reg, Reuse, TraceInstruction};
use ccu::{Ccu, Collected};

const REGS: usize = 256;

/// Version token written by instruction `index` of `warp`; 0 is the initial
/// register content.
pub fn version_token(warp: u32, index: usize) -> u64 {
    (u64::from(warp) << 32) | (index as u64 + 1)
}

/// Run a trace to completion.
pub fn simulate(trace: &KernelTrace, cfg: &SimConfig) -> Result<MetricsReport, SimError> {
    cfg.validate()?;
    let violations = validate(trace);
    if let Some(v) = violations.first() {
        return Err(SimError::InvalidTrace(format!(
            "{v} ({} violation(s))",
            violations.len()
        )));
    }
    if cfg.mode.requires_annotations() && !trace.is_annotated() {
        return Err(SimError::MissingAnnotations(cfg.mode.to_string()));
    }
    Engine::new(trace, cfg).run()
}

struct Warp {
    next: usize,
    /// Issued and not yet through write-back.
    inflight: u32,
    /// Destination writes waiting in bank write queues.
    queued_writes: u32,
    slot: Option<usize>,
    done: bool,
    /// Destination writes issued and not yet in the register file.
    pending_write: Box<[u8; REGS]>,
    pending_reads: Box<[u16; REGS]>,
    /// Version held by the register file.
    rf: Box<[u64; REGS]>,
    window: Option<SlidingWindow>,
}

impl Warp {
    fn new(window: Option<usize>) -> Self {
        Self {
            next: 0,
            inflight: 0,
            queued_writes: 0,
            slot: None,
            done: false,
            pending_write: Box::new([0; REGS]),
            pending_reads: Box::new([0; REGS]),
            rf: Box::new([0; REGS]),
            window: window.map(SlidingWindow::new),
        }
    }

    fn can_issue(&self, instr: &TraceInstruction) -> bool {
        instr.src_regs.iter().all(|&r| self.pending_write[r as usize] == 0)
            && instr
                .dst_regs
                .iter()
                .all(|&r| self.pending_write[r as usize] == 0 && self.pending_reads[r as usize] == 0)
    }
}

#[derive(Debug, Clone, Copy)]
struct ReadReq {
    warp: u32,
    reg: Reg,
    ccu: usize,
    slot: usize,
}

#[derive(Debug, Clone, Copy)]
struct WriteReq {
    warp: u32,
    reg: Reg,
    version: u64,
}

#[derive(Debug, Clone, Copy)]
struct InFlight {
    warp: u32,
    index: usize,
    issue_seq: u64,
    complete_at: u64,
}

struct SubCore {
    id: usize,
    queue: VecDeque<u32>,
    slots: Vec<Option<u32>>,
    ccus: Vec<Ccu>,
    reads: Vec<VecDeque<ReadReq>>,
    writes: Vec<VecDeque<WriteReq>>,
    inflight: Vec<InFlight>,
    sched: SchedulerState,
    rng: ChaCha8Rng,
    active: Vec<u32>,
    unfinished: usize,
    delivered: Vec<bool>,
    /// Instructions whose destinations entered each CT this cycle.
    ct_written: Vec<Vec<u64>>,
}

struct Engine<'a> {
    trace: &'a KernelTrace,
    cfg: &'a SimConfig,
    mode: Mode,
    policy: ReplacementPolicy,
    warps: Vec<Warp>,
    subcores: Vec<SubCore>,
    counters: Counters,
    sthld: u32,
    adaptive: Option<(AdaptiveState, AdaptiveParams)>,
    intervals: Vec<IntervalSample>,
    interval_start: u64,
    cycle: u64,
    issue_seq: u64,
    progress: bool,
    remaining_warps: usize,
}

impl<'a> Engine<'a> {
    fn new(trace: &'a KernelTrace, cfg: &'a SimConfig) -> Self {
        let mode = cfg.mode;
        let n_sub = cfg.num_sms * cfg.subcores_per_sm;
        let per_sub = cfg.warps_per_subcore();
        let collectors = cfg.effective_collectors();
        let mut subcores: Vec<SubCore> = (0..n_sub)
            .map(|id| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(id as u64);
                SubCore {
                    id,
                    queue: VecDeque::new(),
                    slots: vec![None; per_sub],
                    ccus: (0..collectors)
                        .map(|_| Ccu::new(cfg.ct_entries, cfg.oct_slots))
                        .collect(),
                    reads: vec![VecDeque::new(); cfg.banks_per_subcore],
                    writes: vec![VecDeque::new(); cfg.banks_per_subcore],
                    inflight: Vec::new(),
                    sched: SchedulerState::default(),
                    rng,
                    active: Vec::new(),
                    unfinished: 0,
                    delivered: vec![false; collectors],
                    ct_written: vec![Vec::new(); collectors],
                }
            })
            .collect();
        let window = (mode == Mode::Bow).then_some(cfg.window_size);
        let mut warps = Vec::with_capacity(trace.num_warps());
        for (w, stream) in trace.warps.iter().enumerate() {
            let mut warp = Warp::new(window);
            if stream.is_empty() {
                warp.done = true;
            } else {
                subcores[Self::home(cfg, w)].queue.push_back(w as u32);
            }
            warps.push(warp);
        }
        let remaining_warps = warps.iter().filter(|w| !w.done).count();
        let mut engine = Self {
            trace,
            cfg,
            mode,
            policy: if mode == Mode::NaiveGtoLru {
                ReplacementPolicy::Lru
            } else {
                ReplacementPolicy::ReuseAware
            },
            warps,
            subcores,
            counters: Counters::default(),
            sthld: cfg.sthld,
            adaptive: (mode == Mode::Malekeh && cfg.sthld_mode == SthldMode::Dynamic).then(|| {
                (
                    AdaptiveState::new(cfg.sthld),
                    AdaptiveParams::from_config(cfg),
                )
            }),
            intervals: Vec::new(),
            interval_start: 0,
            cycle: 0,
            issue_seq: 0,
            progress: false,
            remaining_warps,
        };
        for s in 0..engine.subcores.len() {
            engine.subcores[s].unfinished = engine.subcores[s].queue.len();
            engine.admit(s);
        }
        engine
    }

    /// Sub-core a warp runs on: consecutive warps fill one scheduler's
    /// slots, then the next sub-core, then the next SM.
    fn home(cfg: &SimConfig, w: usize) -> usize {
        let sm = (w / cfg.warps_per_sm) % cfg.num_sms;
        let local = w % cfg.warps_per_sm;
        sm * cfg.subcores_per_sm + local / cfg.warps_per_subcore()
    }

    fn bank(&self, warp: u32, reg: Reg) -> usize {
        (reg as usize + warp as usize) % self.cfg.banks_per_subcore
    }

    fn instr(&self, warp: u32, index: usize) -> &'a TraceInstruction {
        &self.trace.warps[warp as usize][index]
    }

    fn admit(&mut self, s: usize) {
        let sc = &mut self.subcores[s];
        for slot in 0..sc.slots.len() {
            if sc.slots[slot].is_none() {
                match sc.queue.pop_front() {
                    Some(w) => {
                        sc.slots[slot] = Some(w);
                        self.warps[w as usize].slot = Some(slot);
                    }
                    None => break,
                }
            }
        }
    }

    fn run(mut self) -> Result<MetricsReport, SimError> {
        let max_latency = self
            .trace
            .instructions()
            .map(|i| i.latency)
            .chain(std::iter::once(self.cfg.mem_latency))
            .max()
            .unwrap_or(1);
        let deadlock_limit = 10 * u64::from(max_latency);
        let mut last_progress = 0u64;
        while self.remaining_warps > 0 {
            self.progress = false;
            for s in 0..self.subcores.len() {
                if self.subcores[s].unfinished == 0 {
                    continue;
                }
                self.write_back(s);
                self.bank_cycle(s)?;
                self.dispatch(s)?;
                self.issue(s);
                self.retire_warps(s);
            }
            self.check_cycle()?;
            self.interval_hook();
            if self.progress {
                last_progress = self.cycle;
            } else if self.cycle - last_progress > deadlock_limit {
                return Err(SimError::Deadlock {
                    cycle: self.cycle,
                    idle: self.cycle - last_progress,
                    dump: self.dump(),
                });
            }
            self.cycle += 1;
        }
        self.counters.cycles = self.cycle;
        self.check_final()?;
        let id = metrics::trace_id(self.trace);
        metrics::finalize(&self.counters, id, self.cfg, self.intervals).map_err(|message| {
            SimError::Invariant {
                cycle: self.cycle,
                message,
            }
        })
    }

    fn owned_ccu(&self, s: usize, warp: u32) -> Option<usize> {
        self.subcores[s]
            .ccus
            .iter()
            .position(|c| c.owner == Some(warp))
    }

    fn write_back(&mut self, s: usize) {
        let now = self.cycle;
        let sc = &mut self.subcores[s];
        sc.ct_written.iter_mut().for_each(Vec::clear);
        let mut done: Vec<InFlight> = Vec::new();
        sc.inflight.retain(|f| {
            if f.complete_at == now {
                done.push(*f);
                false
            } else {
                true
            }
        });
        if done.is_empty() {
            return;
        }
        done.sort_by_key(|f| f.issue_seq);
        self.progress = true;
        let retain = self.mode.retains_cache();
        // (ccu, completion, dst slot) candidates for the CT write port
        let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
        for (ci, f) in done.iter().enumerate() {
            let instr = self.instr(f.warp, f.index);
            let version = version_token(f.warp, f.index);
            self.counters.instructions += 1;
            let owned = if retain { self.owned_ccu(s, f.warp) } else { None };
            let warp = &mut self.warps[f.warp as usize];
            warp.inflight -= 1;
            for (slot, &reg) in instr.dst_regs.iter().enumerate() {
                self.counters.dst_completions += 1;
                let bank = (reg as usize + f.warp as usize) % self.cfg.banks_per_subcore;
                self.subcores[s].writes[bank].push_back(WriteReq {
                    warp: f.warp,
                    reg,
                    version,
                });
                warp.queued_writes += 1;
                match (self.mode, owned) {
                    (Mode::Bow, _) => {
                        let window = warp.window.as_mut().expect("window mode");
                        if window.write_back(f.issue_seq, reg, version) {
                            self.counters.writes_cached += 1;
                        } else {
                            self.counters.writes_filtered += 1;
                        }
                    }
                    (Mode::NaiveGtoLru, Some(c)) => candidates.push((c, ci, slot)),
                    (_, Some(c)) if instr.dst_hint(slot).is_near() => candidates.push((c, ci, slot)),
                    (_, Some(c)) => {
                        self.counters.writes_filtered += 1;
                        self.subcores[s].ccus[c].invalidate_reg(reg);
                    }
                    (_, None) => self.counters.writes_filtered += 1,
                }
            }
        }
        if candidates.is_empty() {
            return;
        }
        // One CT write per collector per cycle, carrying every destination of
        // one instruction: NEAR first, then the oldest instruction.
        let hint = |&(_, ci, slot): &(usize, usize, usize)| {
            let f = done[ci];
            self.instr(f.warp, f.index).dst_hint(slot)
        };
        let mut winners: HashMap<usize, (bool, u64, usize)> = HashMap::new();
        for cand in &candidates {
            let key = (!hint(cand).is_near(), done[cand.1].issue_seq, cand.1);
            winners
                .entry(cand.0)
                .and_modify(|best| *best = (*best).min(key))
                .or_insert(key);
        }
        let sc = &mut self.subcores[s];
        let mut won: Vec<(usize, usize, usize)> = Vec::new();
        for &cand in &candidates {
            if winners[&cand.0].2 == cand.1 {
                won.push(cand);
            } else {
                let f = done[cand.1];
                let reg = self.trace.warps[f.warp as usize][f.index].dst_regs[cand.2];
                sc.ccus[cand.0].invalidate_reg(reg);
                self.counters.writes_filtered += 1;
            }
        }
        won.sort_unstable();
        for (c, ci, slot) in won {
            let f = done[ci];
            let instr = &self.trace.warps[f.warp as usize][f.index];
            let reg = instr.dst_regs[slot];
            let reuse: Reuse = instr.dst_hint(slot);
            sc.ccus[c].write_back(
                reg,
                reuse,
                version_token(f.warp, f.index),
                self.policy,
                &mut sc.rng,
            );
            sc.ct_written[c].push(f.issue_seq);
            self.counters.writes_cached += 1;
        }
    }

    fn bank_cycle(&mut self, s: usize) -> Result<(), SimError> {
        let nbanks = self.cfg.banks_per_subcore;
        let start = (self.cycle % nbanks as u64) as usize;
        let sc = &mut self.subcores[s];
        sc.delivered.fill(false);
        for k in 0..nbanks {
            let b = (start + k) % nbanks;
            if let Some(wr) = sc.writes[b].pop_front() {
                let warp = &mut self.warps[wr.warp as usize];
                warp.rf[wr.reg as usize] = wr.version;
                warp.pending_write[wr.reg as usize] -= 1;
                warp.queued_writes -= 1;
                self.counters.bank_writes += 1;
                self.progress = true;
                continue;
            }
            let Some(&rd) = sc.reads[b].front() else {
                continue;
            };
            if sc.delivered[rd.ccu] {
                continue;
            }
            sc.reads[b].pop_front();
            let version = self.warps[rd.warp as usize].rf[rd.reg as usize];
            let c = &mut sc.ccus[rd.ccu];
            match &c.current {
                Some(m) if m.warp == rd.warp => {}
                _ => {
                    return Err(SimError::Invariant {
                        cycle: self.cycle,
                        message: format!("read of R{} delivered to foreign collector", rd.reg),
                    })
                }
            }
            c.receive_source(rd.slot, version);
            sc.delivered[rd.ccu] = true;
            self.counters.bank_reads += 1;
            self.counters.crossbar_transfers += 1;
            self.progress = true;
        }
        let queued: u64 = sc.reads.iter().map(|q| q.len() as u64).sum();
        self.counters.read_queue_sum += queued;
        self.counters.read_queue_max = self.counters.read_queue_max.max(queued);
        Ok(())
    }

    fn dispatch(&mut self, s: usize) -> Result<(), SimError> {
        for class in OpcodeClass::ALL {
            let sc = &self.subcores[s];
            let pick = sc
                .ccus
                .iter()
                .enumerate()
                .filter(|(_, c)| c.is_ready())
                .filter_map(|(i, c)| {
                    let m = c.current.as_ref()?;
                    (self.instr(m.warp, m.index).opcode == class).then_some((m.issue_seq, i))
                })
                .min();
            let Some((_, ci)) = pick else { continue };
            let ccu = &mut self.subcores[s].ccus[ci];
            for (slot, o) in ccu.oct.iter().enumerate().filter(|(_, o)| o.valid) {
                let m = ccu.current.as_ref().expect("occupied");
                let held = ccu.ct.entries()[o.index as usize].version;
                if held != m.expected[slot] {
                    return Err(SimError::Invariant {
                        cycle: self.cycle,
                        message: format!(
                            "W{} instruction {} slot {slot}: collected version {held:#x}, register file had {:#x}",
                            m.warp, m.index, m.expected[slot]
                        ),
                    });
                }
            }
            let m = ccu.dispatch();
            let instr = self.instr(m.warp, m.index);
            let warp = &mut self.warps[m.warp as usize];
            for r in instr.distinct_sources() {
                warp.pending_reads[r as usize] -= 1;
            }
            let latency = if instr.opcode == OpcodeClass::Mem {
                self.cfg.mem_latency
            } else {
                instr.latency
            };
            self.subcores[s].inflight.push(InFlight {
                warp: m.warp,
                index: m.index,
                issue_seq: m.issue_seq,
                complete_at: self.cycle + u64::from(latency),
            });
            self.progress = true;
        }
        Ok(())
    }

    fn is_ready(&self, w: u32) -> bool {
        let warp = &self.warps[w as usize];
        let stream = &self.trace.warps[w as usize];
        warp.next < stream.len() && warp.can_issue(&stream[warp.next])
    }

    fn issue(&mut self, s: usize) {
        let two_level = self.mode == Mode::TwoLevel;
        let resident: Vec<u32> = self.subcores[s].slots.iter().flatten().copied().collect();
        if two_level {
            let mut ready_pending: Vec<u32> = resident
                .iter()
                .copied()
                .filter(|w| !self.subcores[s].active.contains(w) && self.is_ready(*w))
                .collect();
            ready_pending.sort_unstable();
            let cap = self.cfg.active_set_size;
            let active = &mut self.subcores[s].active;
            for w in ready_pending {
                if active.len() >= cap {
                    break;
                }
                active.push(w);
            }
        }
        let sc = &self.subcores[s];
        let ready: Vec<u32> = resident
            .iter()
            .copied()
            .filter(|w| !two_level || sc.active.contains(w))
            .filter(|&w| self.is_ready(w))
            .collect();
        let pending_ready = two_level
            && resident
                .iter()
                .any(|w| !sc.active.contains(w) && self.is_ready(*w));
        let order = match self.mode {
            Mode::Malekeh | Mode::MalekehPrivate => {
                malekeh_priority(&ready, sc.sched.last_issued, |w| {
                    sc.ccus
                        .iter()
                        .any(|c| c.owner == Some(w) && c.ct.any_valid())
                })
            }
            _ => gto_priority(&ready, sc.sched.last_issued),
        };
        let status: Vec<CollectorStatus> = sc
            .ccus
            .iter()
            .map(|c| CollectorStatus {
                occupied: c.occupied,
                owner: if self.mode.retains_cache() || self.mode.private_collectors() {
                    c.owner
                } else {
                    None
                },
                has_near: c.ct.has_near(),
            })
            .collect();
        let mut first_stall: Option<AllocationDecision> = None;
        for &w in &order {
            let sc = &mut self.subcores[s];
            let decision = match self.mode {
                Mode::BaselineOcu | Mode::TwoLevel => random_free(&status, &mut sc.rng),
                Mode::Malekeh => {
                    malekeh_allocation(w, &status, &mut sc.sched, self.sthld, &mut sc.rng)
                }
                Mode::NaiveGtoLru => naive_allocation(w, &status, &mut sc.rng),
                Mode::MalekehPrivate | Mode::Bow => {
                    private_allocation(&status, self.warps[w as usize].slot.expect("resident"))
                }
            };
            match decision {
                AllocationDecision::Allocate(c) => {
                    self.issue_into(s, w, c);
                    self.counters.issue_states.issued += 1;
                    return;
                }
                AllocationDecision::StallWaiting => {
                    // the counter moved: this is progress toward an allocation
                    self.progress = true;
                    first_stall.get_or_insert(decision);
                    break;
                }
                AllocationDecision::StallAllBusy => {
                    first_stall.get_or_insert(decision);
                    break;
                }
                AllocationDecision::StallOccupied => {
                    first_stall.get_or_insert(decision);
                }
            }
        }
        let stalls = &mut self.counters.stalls;
        match first_stall {
            None => stalls.no_ready_warp += 1,
            Some(AllocationDecision::StallOccupied) => stalls.occupied += 1,
            Some(AllocationDecision::StallAllBusy) => stalls.all_busy += 1,
            Some(AllocationDecision::StallWaiting) => stalls.waiting += 1,
            Some(AllocationDecision::Allocate(_)) => unreachable!(),
        }
        if pending_ready {
            self.counters.issue_states.ready_pending += 1;
        } else {
            self.counters.issue_states.other += 1;
        }
    }

    fn issue_into(&mut self, s: usize, w: u32, c: usize) {
        let warp = &self.warps[w as usize];
        let index = warp.next;
        let instr = self.instr(w, index);
        let expected: Vec<u64> = instr.src_regs.iter().map(|&r| warp.rf[r as usize]).collect();
        let meta = Collected {
            warp: w,
            index,
            issue_seq: self.issue_seq,
            expected: expected.clone(),
        };
        let retain = self.mode.retains_cache();
        let window = warp.window.as_ref();
        let bypass = |r: Reg| window.and_then(|win| win.lookup(r));
        let sc = &mut self.subcores[s];
        let alloc = sc.ccus[c].allocate(instr, meta, retain, self.policy, &bypass, &mut sc.rng);
        self.counters.source_occurrences += instr.src_regs.len() as u64;
        self.counters.source_fetches += instr.distinct_sources().len() as u64;
        self.counters.ccu_hits += u64::from(alloc.hits);
        self.counters.ccu_misses += alloc.requests.len() as u64;
        for &(reg, slot) in &alloc.requests {
            let b = self.bank(w, reg);
            self.subcores[s].reads[b].push_back(ReadReq {
                warp: w,
                reg,
                ccu: c,
                slot,
            });
        }
        let warp = &mut self.warps[w as usize];
        for &r in &instr.dst_regs {
            warp.pending_write[r as usize] += 1;
        }
        let distinct = instr.distinct_sources();
        for &r in &distinct {
            warp.pending_reads[r as usize] += 1;
        }
        if let Some(win) = warp.window.as_mut() {
            let srcs: Vec<(Reg, u64)> = distinct
                .iter()
                .map(|&r| {
                    let slot = instr.src_regs.iter().position(|&x| x == r).expect("source");
                    (r, expected[slot])
                })
                .collect();
            win.push(self.issue_seq, &srcs, &instr.dst_regs);
        }
        warp.next += 1;
        warp.inflight += 1;
        let sc = &mut self.subcores[s];
        sc.sched.last_issued = Some(w);
        if self.mode == Mode::TwoLevel && instr.opcode == OpcodeClass::Mem {
            sc.active.retain(|&a| a != w);
        }
        self.issue_seq += 1;
        self.progress = true;
    }

    fn retire_warps(&mut self, s: usize) {
        let mut freed = false;
        for slot in 0..self.subcores[s].slots.len() {
            let Some(w) = self.subcores[s].slots[slot] else {
                continue;
            };
            let warp = &self.warps[w as usize];
            if warp.next < self.trace.warps[w as usize].len()
                || warp.inflight > 0
                || warp.queued_writes > 0
            {
                continue;
            }
            let warp = &mut self.warps[w as usize];
            warp.done = true;
            warp.slot = None;
            if let Some(win) = warp.window.as_mut() {
                win.clear();
            }
            let sc = &mut self.subcores[s];
            sc.slots[slot] = None;
            sc.active.retain(|&a| a != w);
            for ccu in sc.ccus.iter_mut().filter(|c| c.owner == Some(w)) {
                ccu.flush();
            }
            if sc.sched.last_issued == Some(w) {
                sc.sched.last_issued = None;
            }
            sc.unfinished -= 1;
            self.remaining_warps -= 1;
            freed = true;
        }
        if freed {
            self.admit(s);
        }
    }

    fn interval_hook(&mut self) {
        if !(self.cycle + 1).is_multiple_of(self.cfg.interval) {
            return;
        }
        let retired = self.counters.instructions - self.interval_start;
        self.interval_start = self.counters.instructions;
        let ipc = retired as f64 / self.cfg.interval as f64;
        let state = match self.adaptive.as_mut() {
            Some((st, params)) => {
                st.step(ipc, params);
                self.sthld = st.sthld;
                for sc in &mut self.subcores {
                    sc.sched.waiting_counter = sc.sched.waiting_counter.min(self.sthld);
                }
                st.state
            }
            None => 0,
        };
        self.intervals.push(IntervalSample {
            interval: self.intervals.len() as u64,
            ipc,
            state,
            sthld: self.sthld,
        });
    }

    fn fail(&self, message: String) -> Result<(), SimError> {
        Err(SimError::Invariant {
            cycle: self.cycle,
            message,
        })
    }

    fn check_cycle(&self) -> Result<(), SimError> {
        let retain = self.mode.retains_cache();
        for sc in self.subcores.iter().filter(|sc| sc.unfinished > 0 || !sc.inflight.is_empty()) {
            let mut owners: Vec<u32> = Vec::new();
            for (i, c) in sc.ccus.iter().enumerate() {
                if let Err(e) = c.ct.check_invariants(self.cfg.oct_slots) {
                    return self.fail(format!("sub-core {} collector {i}: {e}", sc.id));
                }
                if sc.ct_written[i].windows(2).any(|p| p[0] != p[1]) {
                    return self.fail(format!("sub-core {} collector {i}: two CT writers in one cycle", sc.id));
                }
                if retain && c.ct.any_valid() {
                    let Some(o) = c.owner else {
                        return self.fail(format!("sub-core {} collector {i}: data without owner", sc.id));
                    };
                    if owners.contains(&o) {
                        return self.fail(format!("W{o} has data in two collectors of sub-core {}", sc.id));
                    }
                    owners.push(o);
                }
            }
            if self.mode == Mode::Malekeh && sc.sched.waiting_counter > self.sthld {
                return self.fail(format!("waiting counter above threshold in sub-core {}", sc.id));
            }
        }
        Ok(())
    }

    fn check_final(&self) -> Result<(), SimError> {
        for (w, stream) in self.trace.warps.iter().enumerate() {
            let mut last = [0u64; REGS];
            for (i, instr) in stream.iter().enumerate() {
                for &r in &instr.dst_regs {
                    last[r as usize] = version_token(w as u32, i);
                }
            }
            let rf = &self.warps[w].rf;
            if let Some(r) = (0..REGS).find(|&r| rf[r] != last[r]) {
                return self.fail(format!(
                    "W{w} R{r}: register file holds {:#x}, last writer produced {:#x}",
                    rf[r], last[r]
                ));
            }
        }
        Ok(())
    }

    fn dump(&self) -> String {
        let mut out = String::new();
        for sc in self.subcores.iter().filter(|sc| sc.unfinished > 0) {
            let _ = writeln!(
                out,
                "sub-core {}: resident {:?} queued {} in-flight {} reads {:?} writes {:?}",
                sc.id,
                sc.slots,
                sc.queue.len(),
                sc.inflight.len(),
                sc.reads.iter().map(VecDeque::len).collect::<Vec<_>>(),
                sc.writes.iter().map(VecDeque::len).collect::<Vec<_>>(),
            );
            for (i, c) in sc.ccus.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "  collector {i}: occupied {} owner {:?} holding {:?}",
                    c.occupied,
                    c.owner,
                    c.current.as_ref().map(|m| (m.warp, m.index))
                );
            }
            for &w in sc.slots.iter().flatten() {
                let warp = &self.warps[w as usize];
                let _ = writeln!(
                    out,
                    "  W{w}: next {} in-flight {} queued writes {}",
                    warp.next, warp.inflight, warp.queued_writes
                );
            }
        }
        out
    }
}
