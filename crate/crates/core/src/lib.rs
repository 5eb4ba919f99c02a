//! Simulation kernel for interaction-space models.
//!
//! A model declares interacting entities, typed cause-effect interactions
//! between them (agents acting on a patient through a propagator), clocks
//! for when interactions start and how long they act, and per-entity
//! evolution transitions. The engine turns such a declaration into
//! trajectories and a causal trace of committed occurrences:
//!
//! - [`model`] — entities, interactions, state vectors, model validation
//! - [`clocks`] — finite time-event sets and the clocks they induce
//! - [`runtime`] — occurrence sampling, conditions, keyed random streams
//! - [`transition`] — the built-in evolution transition library
//! - [`engine`] — the event loop: batches of arrivals, evolution windows
//! - [`embed`] — constructors turning classical models (ODE systems,
//!   discrete maps, cellular automata, networked dynamics) into models,
//!   with independent brute-force oracles
//! - [`io`] — model files, trajectory/trace serialization
//!
//! Runs are reproducible: all randomness stems from one seed, and a run is
//! a pure function of `(model, config, seed, horizon)`.

pub mod clocks;
pub mod embed;
pub mod engine;
pub mod error;
pub mod io;
pub mod model;
pub mod runtime;
pub mod time;
pub mod transition;
pub mod value;

pub use clocks::{arrival_from_ongoing, validate_event_set, ClockFunction, EventRef, TimeEventSet};
pub use engine::{run, CausalTrace, Diagnostic, EngineConfig, RunOutput, SimRun, TraceEntry, Trajectory};
pub use error::{EngineError, ValidationError};
pub use model::{
    build_model, build_model_with_eps, make_vector_interaction, roles_of, EntityId, Interaction,
    InteractionId, Model, ModelDecl, StateVector,
};
pub use runtime::{
    ClockKind, ClockSpec, DistributionSpec, EventMode, GoodsSpec, NeighborhoodRule,
    OccurrenceRecord, OngoingWindow, RunData,
};
pub use time::{Time, DEFAULT_EPS};
pub use transition::{MapUpdate, Transition, TransitionSpec};
pub use value::{SpaceDescriptor, Value, ZeroSet};
