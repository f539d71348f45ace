//! Run-time tuning of the waiting threshold (STHLD) from per-interval IPC.
//!
//! The controller climbs while IPC holds, probes once it sees a large
//! change, backs off past the knee and then holds until IPC moves again.
//!
//! | state | S                  | L rise                 | L drop               |
//! |-------|--------------------|------------------------|----------------------|
//! | 1     | +d (cap run → 2)   | +d → 3                 | +d → 3               |
//! | 2     | stay               | → 1                    | → 1                  |
//! | 3     | → 1                | +d → 1                 | −2d → 4              |
//! | 4     | +d → 5             | −d (at 0: → 5)         | +d → 5               |
//! | 5     | → 6                | → 6                    | → 6                  |
//! | 6     | stay               | +d → 3                 | +d → 3               |

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;

pub const EPSILON: f64 = 1e-9;
/// Consecutive small changes at the cap before the controller rests.
pub const CAP_PATIENCE: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Change {
    Small,
    Rise,
    Drop,
}

impl Change {
    pub fn is_large(self) -> bool {
        self != Change::Small
    }
}

/// Relative IPC change between two intervals.
pub fn classify(ipc_now: f64, ipc_prev: f64, small_threshold: f64) -> Change {
    let rel = (ipc_now - ipc_prev).abs() / ipc_prev.max(EPSILON);
    if rel < small_threshold {
        Change::Small
    } else if ipc_now > ipc_prev {
        Change::Rise
    } else {
        Change::Drop
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveParams {
    pub delta: u32,
    pub small_threshold: f64,
    pub cap: u32,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self {
            delta: 1,
            small_threshold: 0.02,
            cap: 64,
        }
    }
}

impl AdaptiveParams {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            delta: cfg.adaptive_delta,
            small_threshold: cfg.adaptive_small_threshold,
            cap: cfg.adaptive_cap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveState {
    pub state: u8,
    pub sthld: u32,
    pub prev_ipc: Option<f64>,
    cap_run: u32,
}

impl AdaptiveState {
    pub fn new(sthld: u32) -> Self {
        Self {
            state: 1,
            sthld,
            prev_ipc: None,
            cap_run: 0,
        }
    }

    /// Apply one interval boundary. The first interval has nothing to compare
    /// against and counts as a small change.
    pub fn step(&mut self, ipc_now: f64, p: &AdaptiveParams) -> Change {
        let change = match self.prev_ipc {
            Some(prev) => classify(ipc_now, prev, p.small_threshold),
            None => Change::Small,
        };
        self.prev_ipc = Some(ipc_now);
        let up = |s: u32| s.saturating_add(p.delta).min(p.cap);
        let down = |s: u32, k: u32| s.saturating_sub(k.saturating_mul(p.delta));
        let (state, sthld) = match (self.state, change) {
            (1, Change::Small) => {
                if self.sthld >= p.cap {
                    self.cap_run += 1;
                } else {
                    self.cap_run = 0;
                }
                if self.cap_run >= CAP_PATIENCE {
                    self.cap_run = 0;
                    (2, self.sthld)
                } else {
                    (1, up(self.sthld))
                }
            }
            (1, _) => (3, up(self.sthld)),
            (2, Change::Small) => (2, self.sthld),
            (2, _) => (1, self.sthld),
            (3, Change::Small) => (1, self.sthld),
            (3, Change::Rise) => (1, up(self.sthld)),
            (3, Change::Drop) => (4, down(self.sthld, 2)),
            (4, Change::Rise) if self.sthld > 0 => (4, down(self.sthld, 1)),
            (4, Change::Rise) => (5, self.sthld),
            (4, _) => (5, up(self.sthld)),
            (5, _) => (6, self.sthld),
            (6, Change::Small) => (6, self.sthld),
            (6, _) => (3, up(self.sthld)),
            (s, _) => unreachable!("adaptive state {s}"),
        };
        if state != 1 {
            self.cap_run = 0;
        }
        self.state = state;
        self.sthld = sthld;
        change
    }
}

/// Synthetic IPC-versus-STHLD curves used to exercise the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveOracle {
    /// Flat up to `k`, then falling 8% of the flat level per step.
    Knee { k: u32 },
    /// Knee `k1` before interval `t`, knee `k2` from `t` on. The flat level
    /// also moves from 1.0 to 1.3 so the shift itself is observable.
    PhaseShift { k1: u32, k2: u32, t: u64 },
}

impl CurveOracle {
    pub fn ipc(&self, sthld: u32, interval: u64) -> f64 {
        let (k, level) = match *self {
            CurveOracle::Knee { k } => (k, 1.0),
            CurveOracle::PhaseShift { k1, t, .. } if interval < t => (k1, 1.0),
            CurveOracle::PhaseShift { k2, .. } => (k2, 1.3),
        };
        if sthld <= k {
            level
        } else {
            level * (1.0 - 0.08 * f64::from(sthld - k)).max(0.05)
        }
    }
}

/// Closed-loop run against an oracle; returns the threshold in force after
/// each interval.
pub fn drive(oracle: CurveOracle, params: &AdaptiveParams, initial: u32, intervals: u64) -> Vec<u32> {
    let mut st = AdaptiveState::new(initial);
    (0..intervals)
        .map(|i| {
            let ipc = oracle.ipc(st.sthld, i);
            st.step(ipc, params);
            st.sthld
        })
        .collect()
}
