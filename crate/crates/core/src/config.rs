//! Simulator configuration.
//!
//! Defaults follow a Turing-class SM: 4 sub-cores, 32 warps per SM, two
//! single-ported banks and two collectors per sub-core, 256KB of RF per SM.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::metrics::EnergyModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Conventional operand collectors: no caching, random free OCU, GTO.
    BaselineOcu,
    /// Shared caching collectors with reuse-aware policies.
    Malekeh,
    /// Same policies with one private collector per resident warp.
    MalekehPrivate,
    /// Caching collectors driven by GTO, pure LRU and always-cache writes.
    NaiveGtoLru,
    /// Per-warp sliding-window operand bypassing.
    Bow,
    /// Baseline collectors behind a two-level (active/pending) scheduler.
    TwoLevel,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::BaselineOcu,
        Mode::Malekeh,
        Mode::MalekehPrivate,
        Mode::NaiveGtoLru,
        Mode::Bow,
        Mode::TwoLevel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::BaselineOcu => "baseline_ocu",
            Mode::Malekeh => "malekeh",
            Mode::MalekehPrivate => "malekeh_private",
            Mode::NaiveGtoLru => "naive_gto_lru",
            Mode::Bow => "bow",
            Mode::TwoLevel => "two_level",
        }
    }

    pub fn requires_annotations(self) -> bool {
        matches!(self, Mode::Malekeh | Mode::MalekehPrivate)
    }

    /// Whether collector cache tables retain values across allocations.
    pub fn retains_cache(self) -> bool {
        matches!(
            self,
            Mode::Malekeh | Mode::MalekehPrivate | Mode::NaiveGtoLru
        )
    }

    /// One collector per resident warp instead of a shared pool.
    pub fn private_collectors(self) -> bool {
        matches!(self, Mode::MalekehPrivate | Mode::Bow)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SthldMode {
    /// `sthld` stays fixed for the whole run.
    Static,
    /// `sthld` is the starting point; the interval controller tunes it.
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub num_sms: usize,
    pub subcores_per_sm: usize,
    pub warps_per_sm: usize,
    pub banks_per_subcore: usize,
    pub ccus_per_subcore: usize,
    pub ct_entries: usize,
    pub oct_slots: usize,
    pub mode: Mode,
    pub rthld: u32,
    pub profile_fraction: f64,
    pub sthld_mode: SthldMode,
    pub sthld: u32,
    pub interval: u64,
    pub adaptive_delta: u32,
    pub adaptive_small_threshold: f64,
    pub adaptive_cap: u32,
    /// Fixed latency of every MEM instruction; the trace latency is ignored.
    pub mem_latency: u32,
    pub seed: u64,
    pub window_size: usize,
    pub active_set_size: usize,
    pub energy: EnergyModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_sms: 10,
            subcores_per_sm: 4,
            warps_per_sm: 32,
            banks_per_subcore: 2,
            ccus_per_subcore: 2,
            ct_entries: 8,
            oct_slots: 6,
            mode: Mode::Malekeh,
            rthld: crate::profiler::DEFAULT_RTHLD,
            profile_fraction: crate::profiler::DEFAULT_PROFILE_FRACTION,
            sthld_mode: SthldMode::Dynamic,
            sthld: 0,
            interval: 10_000,
            adaptive_delta: 1,
            adaptive_small_threshold: 0.02,
            adaptive_cap: 64,
            mem_latency: 200,
            seed: 1,
            window_size: 3,
            active_set_size: 2,
            energy: EnergyModel::default(),
        }
    }
}

impl SimConfig {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Resident warps per sub-core.
    pub fn warps_per_subcore(&self) -> usize {
        self.warps_per_sm / self.subcores_per_sm
    }

    /// Collectors per sub-core after applying the mode (private modes get one
    /// per resident warp).
    pub fn effective_collectors(&self) -> usize {
        if self.mode.private_collectors() {
            self.warps_per_subcore()
        } else {
            self.ccus_per_subcore
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if self.num_sms == 0 || self.subcores_per_sm == 0 {
            return fail("num_sms and subcores_per_sm must be >= 1");
        }
        if self.warps_per_sm < self.subcores_per_sm || !self.warps_per_sm.is_multiple_of(self.subcores_per_sm)
        {
            return fail("warps_per_sm must be a positive multiple of subcores_per_sm");
        }
        if self.banks_per_subcore == 0 || self.ccus_per_subcore == 0 {
            return fail("banks_per_subcore and ccus_per_subcore must be >= 1");
        }
        if self.oct_slots == 0 || self.oct_slots > crate::trace::MAX_SOURCES {
            return fail("oct_slots must be in 1..=6");
        }
        if self.ct_entries < self.oct_slots || self.ct_entries > 256 {
            return fail("ct_entries must be in oct_slots..=256");
        }
        if self.mode.retains_cache() && self.ct_entries <= self.oct_slots {
            return fail("caching modes need ct_entries > oct_slots so a victim always exists");
        }
        if self.rthld == 0 {
            return fail("rthld must be >= 1");
        }
        if !(self.profile_fraction > 0.0 && self.profile_fraction <= 1.0) {
            return fail("profile_fraction must be in (0, 1]");
        }
        if self.interval == 0 {
            return fail("interval must be >= 1");
        }
        if self.adaptive_small_threshold.is_nan() || self.adaptive_small_threshold < 0.0 {
            return fail("adaptive_small_threshold must be >= 0");
        }
        if self.sthld > self.adaptive_cap {
            return fail("sthld must not exceed adaptive_cap");
        }
        if self.mem_latency == 0 {
            return fail("mem_latency must be >= 1");
        }
        if self.window_size == 0 || self.active_set_size == 0 {
            return fail("window_size and active_set_size must be >= 1");
        }
        self.energy.validate()?;
        Ok(())
    }

    /// Set one key (dotted for nested tables, e.g. `energy.e_bank_read`) from
    /// its textual value, then re-validate.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let mut table: toml::Table =
            toml::from_str(&self.to_toml_string()).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let (parent, leaf) = match key.split_once('.') {
            Some((p, l)) => (Some(p), l),
            None => (None, key),
        };
        let slot_table = match parent {
            Some(p) => table
                .get_mut(p)
                .and_then(toml::Value::as_table_mut)
                .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?,
            None => &mut table,
        };
        let current = slot_table
            .get(leaf)
            .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        let parsed = parse_scalar(value);
        let new_value = match (current, parsed) {
            (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (toml::Value::String(_), v) => toml::Value::String(match v {
                toml::Value::String(s) => s,
                other => other.to_string(),
            }),
            (_, v) => v,
        };
        slot_table.insert(leaf.to_string(), new_value);
        let updated: SimConfig = toml::Value::Table(table).try_into().map_err(
            |e: toml::de::Error| ConfigError::BadValue {
                key: key.to_string(),
                value: value.to_string(),
                reason: e.to_string(),
            },
        )?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}

fn parse_scalar(text: &str) -> toml::Value {
    if let Ok(i) = text.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = text.parse::<f64>() {
        return toml::Value::Float(f);
    }
    match text {
        "true" => toml::Value::Boolean(true),
        "false" => toml::Value::Boolean(false),
        _ => toml::Value::String(text.to_string()),
    }
}
