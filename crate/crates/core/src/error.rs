//! Error types. Every variant carries a stable machine-readable code
//! (see [`ValidationError::code`] and [`EngineError::code`]) next to the
//! human-readable message, so front ends can match on failures without
//! parsing text.

use thiserror::Error;

use crate::time::Time;

/// Rejections raised while building or checking a model declaration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("interaction `{interaction}` references undeclared entity `{entity}`")]
    UnknownEntity { interaction: String, entity: String },

    #[error("unknown interaction `{0}`")]
    UnknownInteraction(String),

    #[error("bad time interval: t_start {t_start} must be strictly before t_end {t_end}")]
    BadTimeInterval { t_start: Time, t_end: Time },

    #[error("activation {value} of entity `{entity}` for interaction `{interaction}` is outside [0, 1]")]
    ActivationOutOfRange {
        entity: String,
        interaction: String,
        value: f64,
    },

    #[error("no initial state declared for entity `{0}`")]
    MissingInitialState(String),

    #[error("interaction `{interaction}` uses type `{itype}` which is not in the model's type set")]
    UnknownType { interaction: String, itype: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("event set overlap: {detail}")]
    Overlap { detail: String },

    #[error("degenerate interval [{start}, {end}]")]
    DegenerateInterval { start: Time, end: Time },

    #[error("event at {time} outside the model window [{t_start}, {t_end}]")]
    OutOfRange { time: Time, t_start: Time, t_end: Time },

    #[error("bad distribution for `{context}`: {detail}")]
    BadDistribution { context: String, detail: String },

    #[error("zero set of interaction `{interaction}` is empty or incompatible with its resource space")]
    BadZeroSet { interaction: String },

    #[error("initial goods of interaction `{interaction}` lie in its zero set but the patient activation is nonzero")]
    ZeroResourceLaw { interaction: String },

    #[error("goods of entity `{entity}`: {detail}")]
    BadGoods { entity: String, detail: String },

    #[error("proper state of entity `{entity}` does not belong to its declared state space")]
    BadProperState { entity: String },

    #[error("interaction `{interaction}` can start at {start} strictly inside an ongoing interval beginning at {ongoing_start}; its propagator would arrive before it starts")]
    StartArrivalOrder {
        interaction: String,
        start: Time,
        ongoing_start: Time,
    },

    #[error("delta must be >= 0 or +inf, got {0}")]
    BadDelta(f64),

    #[error("vector interaction needs at least one part")]
    EmptyParts,

    #[error("interactions `{a}` and `{b}` are not simultaneous: their {what} specs differ")]
    NotSimultaneous { a: String, b: String, what: String },

    #[error("missing run data for interaction `{0}`")]
    MissingRunData(String),
}

impl ValidationError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ValidationError::UnknownEntity { .. } => "unknown-entity",
            ValidationError::UnknownInteraction(_) => "unknown-interaction",
            ValidationError::BadTimeInterval { .. } => "bad-time-interval",
            ValidationError::ActivationOutOfRange { .. } => "activation-out-of-range",
            ValidationError::MissingInitialState(_) => "missing-initial-state",
            ValidationError::UnknownType { .. } => "unknown-type",
            ValidationError::DuplicateId(_) => "duplicate-id",
            ValidationError::Overlap { .. } => "overlap",
            ValidationError::DegenerateInterval { .. } => "degenerate-interval",
            ValidationError::OutOfRange { .. } => "out-of-range",
            ValidationError::BadDistribution { .. } => "bad-distribution",
            ValidationError::BadZeroSet { .. } => "bad-zero-set",
            ValidationError::ZeroResourceLaw { .. } => "zero-resource-law",
            ValidationError::BadGoods { .. } => "bad-goods",
            ValidationError::BadProperState { .. } => "bad-proper-state",
            ValidationError::StartArrivalOrder { .. } => "start-arrival-order",
            ValidationError::BadDelta(_) => "bad-delta",
            ValidationError::EmptyParts => "empty-parts",
            ValidationError::NotSimultaneous { .. } => "not-simultaneous",
            ValidationError::MissingRunData(_) => "missing-run-data",
        }
    }
}

/// Failures raised while running a simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("transition of entity `{entity}` failed at t = {time}: {detail}")]
    TransitionFailure {
        entity: String,
        time: Time,
        detail: String,
    },

    #[error("neighborhood state undefined at (tau = {tau}, entity = `{entity}`) for patient `{patient}`")]
    UndefinedAt {
        patient: String,
        entity: String,
        tau: Time,
    },

    #[error("interaction `{interaction}` has no goods slot on propagator `{propagator}`")]
    NoGoodsComponent {
        interaction: String,
        propagator: String,
    },

    #[error("horizon must be finite and inside the model window, got {0}")]
    BadHorizon(Time),

    #[error("run exceeded the event budget of {0} processed events")]
    RunawayRun(usize),

    #[error(transparent)]
    Validation(#[from] ValidationError),
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::TransitionFailure { .. } => "transition-failure",
            EngineError::UndefinedAt { .. } => "undefined-at",
            EngineError::NoGoodsComponent { .. } => "no-goods-component",
            EngineError::BadHorizon(_) => "bad-horizon",
            EngineError::RunawayRun(_) => "runaway-run",
            EngineError::Validation(v) => v.code(),
        }
    }
}
