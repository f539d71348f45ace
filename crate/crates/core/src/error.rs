use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: register id out of range: R{register} (max R255)")]
    RegisterOutOfRange { line: usize, register: u32 },
    #[error("line {line}: too many {kind} operands: {count} (max {max})")]
    OperandCount {
        line: usize,
        kind: &'static str,
        count: usize,
        max: usize,
    },
    #[error("warp ids are not dense: W{missing} has no instructions")]
    SparseWarps { missing: u32 },
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
}

impl TraceError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        TraceError::Parse {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("mode `{0}` requires an annotated trace (run `annotate` first)")]
    MissingAnnotations(String),
    #[error("trace is invalid: {0}")]
    InvalidTrace(String),
    #[error("deadlock at cycle {cycle}: no progress for {idle} cycles\n{dump}")]
    Deadlock { cycle: u64, idle: u64, dump: String },
    #[error("engine invariant violated at cycle {cycle}: {message}")]
    Invariant { cycle: u64, message: String },
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("report for mode `{mode}` comes from trace {found}, baseline from {expected}")]
    TraceMismatch {
        mode: String,
        expected: String,
        found: String,
    },
}
