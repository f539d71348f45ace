//! Counters, derived statistics and the per-event energy model.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Mode, SimConfig};
use crate::error::{CompareError, ConfigError};
use crate::trace::{to_text, KernelTrace};

/// Energy per event in abstract units. Only ratios between runs are
/// meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyModel {
    pub e_bank_read: f64,
    pub e_bank_write: f64,
    pub e_crossbar_transfer: f64,
    pub e_ccu_read: f64,
    pub e_ccu_write: f64,
    /// Multiplier on crossbar energy for the sliding-window comparator.
    pub wide_crossbar_factor: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            e_bank_read: 4.0,
            e_bank_write: 4.0,
            e_crossbar_transfer: 1.0,
            e_ccu_read: 1.0,
            e_ccu_write: 1.0,
            wide_crossbar_factor: 2.0,
        }
    }
}

impl EnergyModel {
    pub fn zero() -> Self {
        Self {
            e_bank_read: 0.0,
            e_bank_write: 0.0,
            e_crossbar_transfer: 0.0,
            e_ccu_read: 0.0,
            e_ccu_write: 0.0,
            wide_crossbar_factor: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let all = [
            ("energy.e_bank_read", self.e_bank_read),
            ("energy.e_bank_write", self.e_bank_write),
            ("energy.e_crossbar_transfer", self.e_crossbar_transfer),
            ("energy.e_ccu_read", self.e_ccu_read),
            ("energy.e_ccu_write", self.e_ccu_write),
            ("energy.wide_crossbar_factor", self.wide_crossbar_factor),
        ];
        for (key, v) in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::BadValue {
                    key: key.to_string(),
                    value: v.to_string(),
                    reason: "must be finite and >= 0".to_string(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StallCounts {
    pub occupied: u64,
    pub all_busy: u64,
    pub waiting: u64,
    pub no_ready_warp: u64,
}

impl StallCounts {
    pub fn total(&self) -> u64 {
        self.occupied + self.all_busy + self.waiting + self.no_ready_warp
    }
}

/// Per sub-core cycle outcome of the issue stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueStates {
    pub issued: u64,
    /// Nothing issued although a warp outside the active set was ready.
    pub ready_pending: u64,
    pub other: u64,
}

impl IssueStates {
    pub fn total(&self) -> u64 {
        self.issued + self.ready_pending + self.other
    }

    /// Fractions `[issued, ready_pending, other]`; zeros when empty.
    pub fn fractions(&self) -> [f64; 3] {
        let t = self.total();
        if t == 0 {
            return [0.0; 3];
        }
        let t = t as f64;
        [
            self.issued as f64 / t,
            self.ready_pending as f64 / t,
            self.other as f64 / t,
        ]
    }
}

/// Raw event counts accumulated by the engine.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub cycles: u64,
    pub instructions: u64,
    /// Source operands including intra-instruction duplicates.
    pub source_occurrences: u64,
    /// Distinct source registers per instruction.
    pub source_fetches: u64,
    pub ccu_hits: u64,
    pub ccu_misses: u64,
    pub bank_reads: u64,
    pub bank_writes: u64,
    pub dst_completions: u64,
    pub writes_cached: u64,
    pub writes_filtered: u64,
    pub crossbar_transfers: u64,
    pub stalls: StallCounts,
    pub issue_states: IssueStates,
    pub read_queue_sum: u64,
    pub read_queue_max: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSample {
    pub interval: u64,
    pub ipc: f64,
    pub state: u8,
    pub sthld: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub bank_reads: f64,
    pub bank_writes: f64,
    pub crossbar: f64,
    pub ccu_reads: f64,
    pub ccu_writes: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: Mode,
    pub trace_id: String,
    pub seed: u64,
    pub cycles: u64,
    pub instructions: u64,
    pub ipc: f64,
    pub source_occurrences: u64,
    pub source_fetches: u64,
    pub bank_reads: u64,
    pub bank_writes: u64,
    pub ccu_hits: u64,
    pub ccu_misses: u64,
    pub hit_ratio: f64,
    /// False when no source operand was fetched.
    pub hit_ratio_defined: bool,
    pub read_reduction: f64,
    pub writes_cached: u64,
    pub writes_filtered: u64,
    pub crossbar_transfers: u64,
    pub stalls: StallCounts,
    pub issue_states: IssueStates,
    pub issue_state_fractions: [f64; 3],
    pub mean_read_queue: f64,
    pub max_read_queue: u64,
    pub intervals: Vec<IntervalSample>,
    pub energy: EnergyBreakdown,
    pub config: SimConfig,
}

/// Short content hash identifying a trace.
pub fn trace_id(trace: &KernelTrace) -> String {
    let digest = Sha256::digest(to_text(trace).as_bytes());
    digest[..8].iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Derive the report and check the counter identities.
pub fn finalize(
    c: &Counters,
    trace_id: String,
    config: &SimConfig,
    intervals: Vec<IntervalSample>,
) -> Result<MetricsReport, String> {
    if c.ccu_hits + c.bank_reads != c.source_fetches {
        return Err(format!(
            "fetch identity: hits {} + bank reads {} != fetches {}",
            c.ccu_hits, c.bank_reads, c.source_fetches
        ));
    }
    if c.ccu_misses != c.bank_reads {
        return Err(format!(
            "every miss must become one bank read: misses {} reads {}",
            c.ccu_misses, c.bank_reads
        ));
    }
    if c.writes_cached + c.writes_filtered != c.dst_completions {
        return Err(format!(
            "write identity: cached {} + filtered {} != completions {}",
            c.writes_cached, c.writes_filtered, c.dst_completions
        ));
    }
    let lookups = c.ccu_hits + c.ccu_misses;
    let hit_ratio_defined = lookups > 0;
    let hit_ratio = if hit_ratio_defined {
        c.ccu_hits as f64 / lookups as f64
    } else {
        0.0
    };
    let read_reduction = if c.source_fetches > 0 {
        1.0 - c.bank_reads as f64 / c.source_fetches as f64
    } else {
        0.0
    };
    let mut report = MetricsReport {
        mode: config.mode,
        trace_id,
        seed: config.seed,
        cycles: c.cycles,
        instructions: c.instructions,
        ipc: if c.cycles > 0 {
            c.instructions as f64 / c.cycles as f64
        } else {
            0.0
        },
        source_occurrences: c.source_occurrences,
        source_fetches: c.source_fetches,
        bank_reads: c.bank_reads,
        bank_writes: c.bank_writes,
        ccu_hits: c.ccu_hits,
        ccu_misses: c.ccu_misses,
        hit_ratio,
        hit_ratio_defined,
        read_reduction,
        writes_cached: c.writes_cached,
        writes_filtered: c.writes_filtered,
        crossbar_transfers: c.crossbar_transfers,
        stalls: c.stalls,
        issue_states: c.issue_states,
        issue_state_fractions: c.issue_states.fractions(),
        mean_read_queue: if c.cycles > 0 {
            c.read_queue_sum as f64 / c.cycles as f64
        } else {
            0.0
        },
        max_read_queue: c.read_queue_max,
        intervals,
        energy: EnergyBreakdown::default(),
        config: config.clone(),
    };
    report.energy = energy(&report, &config.energy);
    Ok(report)
}

/// Sum of event counts times their coefficients.
pub fn energy(report: &MetricsReport, model: &EnergyModel) -> EnergyBreakdown {
    let crossbar_factor = if report.mode == Mode::Bow {
        model.wide_crossbar_factor
    } else {
        1.0
    };
    let bank_reads = report.bank_reads as f64 * model.e_bank_read;
    let bank_writes = report.bank_writes as f64 * model.e_bank_write;
    let crossbar = report.crossbar_transfers as f64 * model.e_crossbar_transfer * crossbar_factor;
    let ccu_reads = report.ccu_hits as f64 * model.e_ccu_read;
    let ccu_writes = report.writes_cached as f64 * model.e_ccu_write;
    EnergyBreakdown {
        bank_reads,
        bank_writes,
        crossbar,
        ccu_reads,
        ccu_writes,
        total: bank_reads + bank_writes + crossbar + ccu_reads + ccu_writes,
    }
}

/// `# key=value` lines describing a resolved config, for CSV preambles.
pub fn config_preamble(cfg: &SimConfig) -> String {
    let table: toml::Table = toml::from_str(&cfg.to_toml_string()).expect("config round-trips");
    let mut out = String::new();
    for (k, v) in &table {
        match v {
            toml::Value::Table(sub) => {
                for (sk, sv) in sub {
                    let _ = writeln!(out, "# {k}.{sk}={sv}");
                }
            }
            v => {
                let _ = writeln!(out, "# {k}={v}");
            }
        }
    }
    out
}

pub const SUMMARY_HEADER: &str = "mode,trace,seed,cycles,instructions,ipc,hit_ratio,read_reduction,\
bank_reads,bank_writes,ccu_hits,ccu_misses,writes_cached,writes_filtered,crossbar_transfers,energy";

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    pub fn summary_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6},{},{},{},{},{},{},{},{:.3}",
            self.mode,
            self.trace_id,
            self.seed,
            self.cycles,
            self.instructions,
            self.ipc,
            self.hit_ratio,
            self.read_reduction,
            self.bank_reads,
            self.bank_writes,
            self.ccu_hits,
            self.ccu_misses,
            self.writes_cached,
            self.writes_filtered,
            self.crossbar_transfers,
            self.energy.total
        )
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "{}{SUMMARY_HEADER}\n{}\n",
            config_preamble(&self.config),
            self.summary_row()
        )
    }

    pub fn intervals_csv(&self) -> String {
        let mut out = config_preamble(&self.config);
        out.push_str("interval,ipc,state,sthld\n");
        for s in &self.intervals {
            let _ = writeln!(out, "{},{:.6},{},{}", s.interval, s.ipc, s.state, s.sthld);
        }
        out
    }

    fn metric(&self, name: &str) -> f64 {
        match name {
            "cycles" => self.cycles as f64,
            "instructions" => self.instructions as f64,
            "ipc" => self.ipc,
            "hit_ratio" => self.hit_ratio,
            "bank_reads" => self.bank_reads as f64,
            "bank_writes" => self.bank_writes as f64,
            "ccu_hits" => self.ccu_hits as f64,
            "crossbar_transfers" => self.crossbar_transfers as f64,
            "energy" => self.energy.total,
            other => panic!("unknown metric {other}"),
        }
    }
}

/// Metrics normalized by [`compare`], in column order.
pub const NORMALIZED_METRICS: [&str; 9] = [
    "cycles",
    "instructions",
    "ipc",
    "hit_ratio",
    "bank_reads",
    "bank_writes",
    "ccu_hits",
    "crossbar_transfers",
    "energy",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRow {
    pub mode: Mode,
    pub hit_ratio: f64,
    pub read_reduction: f64,
    /// Parallel to [`NORMALIZED_METRICS`]; `None` when the baseline value is
    /// zero and this run's is not.
    pub ratios: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedTable {
    pub trace_id: String,
    pub baseline: Mode,
    pub rows: Vec<NormalizedRow>,
}

fn ratio(value: f64, base: f64) -> Option<f64> {
    if base == 0.0 {
        (value == 0.0).then_some(1.0)
    } else {
        Some(value / base)
    }
}

/// Divide each report's metrics by the baseline's.
pub fn compare(
    reports: &[MetricsReport],
    baseline: &MetricsReport,
) -> Result<NormalizedTable, CompareError> {
    let mut rows = Vec::with_capacity(reports.len());
    for r in reports {
        if r.trace_id != baseline.trace_id {
            return Err(CompareError::TraceMismatch {
                mode: r.mode.to_string(),
                expected: baseline.trace_id.clone(),
                found: r.trace_id.clone(),
            });
        }
        rows.push(NormalizedRow {
            mode: r.mode,
            hit_ratio: r.hit_ratio,
            read_reduction: r.read_reduction,
            ratios: NORMALIZED_METRICS
                .iter()
                .map(|m| ratio(r.metric(m), baseline.metric(m)))
                .collect(),
        });
    }
    Ok(NormalizedTable {
        trace_id: baseline.trace_id.clone(),
        baseline: baseline.mode,
        rows,
    })
}

impl NormalizedTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,hit_ratio,read_reduction");
        for m in NORMALIZED_METRICS {
            let _ = write!(out, ",{m}_norm");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{:.6},{:.6}", row.mode, row.hit_ratio, row.read_reduction);
            for r in &row.ratios {
                match r {
                    Some(v) => {
                        let _ = write!(out, ",{v:.6}");
                    }
                    None => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table is serializable")
    }

    /// Ratio of `metric` for `mode`, if present.
    pub fn get(&self, mode: Mode, metric: &str) -> Option<f64> {
        let col = NORMALIZED_METRICS.iter().position(|m| *m == metric)?;
        self.rows.iter().find(|r| r.mode == mode)?.ratios[col]
    }
}
