//! The simulation engine: samples occurrence times, finds the first arrival,
//! batches the interactions arriving inside the evolution window, applies
//! the patients' transitions over that window, records the trajectory and
//! the causal trace, and repeats until the horizon.
//!
//! Within a batch every patient reads pre-batch states; writes are committed
//! together, in entity-id order. Runs are pure functions of
//! `(model, config, seed, horizon)`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::EngineError;
use crate::model::{EntityId, InteractionId, Model, StateVector};
use crate::runtime::{
    check_arrival_conditions, check_start_conditions, extract_goods, neighborhood, rng_stream,
    sample_arrival, sample_ongoing, sample_start, NeighborhoodHistory, OccurrenceRecord,
    OngoingWindow, Purpose,
};
use crate::time::{time_eq, Time, DEFAULT_EPS};
use crate::transition::{EvolutionCtx, PatientHistory, TransitionError};

/// Engine tuning knobs, separate from the model itself.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// Absolute time tolerance.
    pub eps: f64,
    /// Sample step inside continuous ongoing windows; defaults to a
    /// thousandth of the window length. Affects trajectory resolution only.
    pub micro_step: Option<f64>,
    /// Hard cap on processed events, guarding runaway models.
    pub max_events: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            eps: DEFAULT_EPS,
            micro_step: None,
            max_events: 1_000_000,
        }
    }
}

/// Time-stamped state history, one sample list per entity.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Trajectory {
    pub samples: BTreeMap<EntityId, Vec<(Time, StateVector)>>,
}

impl Trajectory {
    /// Last recorded state at-or-before `t`.
    pub fn state_at(&self, e: &EntityId, t: Time, eps: f64) -> Option<&StateVector> {
        let list = self.samples.get(e)?;
        let idx = list.partition_point(|(ts, _)| *ts <= t + eps);
        if idx == 0 {
            None
        } else {
            Some(&list[idx - 1].1)
        }
    }

    /// Last recorded state strictly before `t`.
    pub fn state_before(&self, e: &EntityId, t: Time, eps: f64) -> Option<&StateVector> {
        let list = self.samples.get(e)?;
        let idx = list.partition_point(|(ts, _)| *ts < t - eps);
        if idx == 0 {
            None
        } else {
            Some(&list[idx - 1].1)
        }
    }

    /// Appends a sample, replacing the last one when it carries the same
    /// time stamp.
    fn push(&mut self, e: &EntityId, t: Time, state: StateVector, eps: f64) {
        let list = self.samples.entry(e.clone()).or_default();
        if let Some(last) = list.last_mut() {
            if time_eq(last.0, t, eps) {
                last.1 = state;
                return;
            }
            debug_assert!(last.0 <= t + eps, "trajectory must be time-monotone");
        }
        list.push((t, state));
    }
}

/// One committed occurrence together with the neighborhood sets used and the
/// activation values that satisfied the occurrence conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    #[serde(flatten)]
    pub record: OccurrenceRecord,
    pub patient: EntityId,
    pub neighborhood_at_start: BTreeSet<EntityId>,
    pub neighborhood_at_arrival: BTreeSet<EntityId>,
    /// Agents active for the interaction when it started.
    pub agents_active_at_start: Vec<EntityId>,
    pub propagator_activation_at_start: f64,
    pub propagator_activation_at_arrival: f64,
    pub patient_activation_at_arrival: f64,
}

/// Ordered log of committed occurrences: the raw material of cause-effect
/// graphs.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CausalTrace {
    pub entries: Vec<TraceEntry>,
}

/// Non-fatal engine observations.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    /// Start conditions failed; the occurrence was cancelled and the next
    /// start re-sampled just after it.
    StartCancelled { interaction: InteractionId, at: Time },
    /// Arrival conditions failed; the propagator was stopped mid-flight.
    ArrivalDropped { interaction: InteractionId, t_s: Time, t_a: Time },
    /// The sampled arrival fell beyond the model window; the occurrence
    /// never reaches its patient.
    ArrivalNever { interaction: InteractionId, t_s: Time },
    /// A start strictly inside an open evolution window was deferred to the
    /// window end.
    StartDeferred { interaction: InteractionId, from: Time, to: Time },
    /// A start fell inside an already-running ongoing interval; the arrival
    /// was re-anchored to the start time.
    ArrivalReanchored { interaction: InteractionId, t_s: Time, raw_arrival: Time },
    /// Zero goods forced the patient's activation for the interaction to 0.
    ZeroResourceDeactivation { interaction: InteractionId, patient: EntityId, at: Time },
}

/// Everything a finished run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub trace: CausalTrace,
    pub diagnostics: Vec<Diagnostic>,
}

/// History accessor bounded by the neighborhood grants of one patient.
pub struct NeighborhoodState<'r> {
    grants: Vec<(Time, BTreeSet<EntityId>)>,
    trajectory: &'r Trajectory,
    upper: Time,
    eps: f64,
}

impl NeighborhoodState<'_> {
    fn granted(&self, tau: Time, entity: &EntityId) -> bool {
        self.grants
            .iter()
            .any(|(t_prime, set)| *t_prime <= tau + self.eps && set.contains(entity))
            && tau <= self.upper + self.eps
    }
}

impl PatientHistory for NeighborhoodState<'_> {
    fn state_at(&self, tau: Time, entity: &EntityId) -> Result<&StateVector, TransitionError> {
        if !self.granted(tau, entity) {
            return Err(TransitionError::Undefined { entity: entity.clone(), tau });
        }
        self.trajectory
            .state_at(entity, tau, self.eps)
            .ok_or(TransitionError::Undefined { entity: entity.clone(), tau })
    }
}

/// History handed to occurrence-time distributions of one interaction.
struct InteractionHistory<'r> {
    grants: &'r [(Time, BTreeSet<EntityId>)],
    trajectory: &'r Trajectory,
    upper: Time,
    eps: f64,
}

impl NeighborhoodHistory for InteractionHistory<'_> {
    fn state_at(&self, tau: Time, entity: &EntityId) -> Option<StateVector> {
        let ok = tau <= self.upper + self.eps
            && self
                .grants
                .iter()
                .any(|(t, set)| *t <= tau + self.eps && set.contains(entity));
        if !ok {
            return None;
        }
        self.trajectory.state_at(entity, tau, self.eps).cloned()
    }
}

#[derive(Debug, Clone)]
struct CandidateStart {
    t_s: Time,
    occ_index: u64,
}

#[derive(Debug, Clone)]
struct PendingOccurrence {
    record: OccurrenceRecord,
    neighborhood_at_start: BTreeSet<EntityId>,
    agents_active_at_start: Vec<EntityId>,
    propagator_activation_at_start: f64,
}

/// A mutable simulation instance over an immutable model.
pub struct SimRun<'m> {
    model: &'m Model,
    cfg: EngineConfig,
    seed: u64,
    horizon: Time,
    now: Time,
    states: BTreeMap<EntityId, StateVector>,
    /// Next candidate start per interaction, not yet condition-checked.
    next_starts: BTreeMap<InteractionId, CandidateStart>,
    /// Where the next start of each interaction is sampled from; `+inf`
    /// marks an exhausted clock.
    sample_origin: BTreeMap<InteractionId, Time>,
    occ_counter: BTreeMap<InteractionId, u64>,
    /// Started occurrences waiting for their arrival, sorted by arrival.
    pending: Vec<PendingOccurrence>,
    trajectory: Trajectory,
    trace: CausalTrace,
    diagnostics: Vec<Diagnostic>,
    /// Committed (arrival time, neighborhood) grants, per patient.
    grants_by_patient: BTreeMap<EntityId, Vec<(Time, BTreeSet<EntityId>)>>,
    /// The same grants keyed by interaction, for occurrence-time sampling.
    grants_by_interaction: BTreeMap<InteractionId, Vec<(Time, BTreeSet<EntityId>)>>,
    events: usize,
    finished: bool,
}

impl<'m> SimRun<'m> {
    pub fn new(
        model: &'m Model,
        cfg: EngineConfig,
        seed: u64,
        horizon: Time,
    ) -> Result<Self, EngineError> {
        if !horizon.is_finite() || horizon <= model.t_start() || horizon > model.t_end() {
            return Err(EngineError::BadHorizon(horizon));
        }
        let mut trajectory = Trajectory::default();
        for (e, st) in model.initial_states() {
            trajectory.push(e, model.t_start(), st.clone(), cfg.eps);
        }
        let sample_origin = model
            .interactions()
            .keys()
            .map(|i| (i.clone(), model.t_start()))
            .collect();
        Ok(SimRun {
            model,
            cfg,
            seed,
            horizon,
            now: model.t_start(),
            states: model.initial_states().clone(),
            next_starts: BTreeMap::new(),
            sample_origin,
            occ_counter: BTreeMap::new(),
            pending: Vec::new(),
            trajectory,
            trace: CausalTrace::default(),
            diagnostics: Vec::new(),
            grants_by_patient: BTreeMap::new(),
            grants_by_interaction: BTreeMap::new(),
            events: 0,
            finished: false,
        })
    }

    pub fn now(&self) -> Time {
        self.now
    }

    pub fn states(&self) -> &BTreeMap<EntityId, StateVector> {
        &self.states
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn trace(&self) -> &CausalTrace {
        &self.trace
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    /// Minimum arrival time among occurrences started at-or-before `t`;
    /// `+inf` when nothing is in flight.
    pub fn first_arrival(&self, t: Time) -> Time {
        self.pending
            .iter()
            .filter(|o| o.record.t_s <= t + self.cfg.eps)
            .map(|o| o.record.t_a)
            .fold(f64::INFINITY, f64::min)
    }

    /// Pending interactions arriving inside `[t1, t1 + delta]` that satisfy
    /// the arrival conditions against the current states, grouped by
    /// patient.
    pub fn patients_batch(&self, t1: Time) -> BTreeMap<EntityId, Vec<InteractionId>> {
        let window_end = self.window_end(t1);
        let mut out: BTreeMap<EntityId, Vec<InteractionId>> = BTreeMap::new();
        for occ in &self.pending {
            if occ.record.t_a >= t1 - self.cfg.eps && occ.record.t_a <= window_end + self.cfg.eps {
                let interaction = &self.model.interactions()[&occ.record.interaction];
                if check_arrival_conditions(interaction, &self.states) {
                    out.entry(interaction.patient.clone())
                        .or_default()
                        .push(occ.record.interaction.clone());
                }
            }
        }
        out
    }

    /// History accessor for patient `p` bounded above by `t`, defined on
    /// exactly the `(time, entity)` pairs granted by committed arrivals.
    pub fn neighborhood_state(&self, p: &EntityId, t: Time) -> NeighborhoodState<'_> {
        let grants = self
            .grants_by_patient
            .get(p)
            .map(|g| {
                g.iter()
                    .filter(|(t_prime, _)| *t_prime <= t + self.cfg.eps)
                    .cloned()
                    .collect()
            })
            .unwrap_or_default();
        NeighborhoodState {
            grants,
            trajectory: &self.trajectory,
            upper: t,
            eps: self.cfg.eps,
        }
    }

    fn window_end(&self, t1: Time) -> Time {
        let raw = if self.model.delta().is_infinite() {
            f64::INFINITY
        } else {
            t1 + self.model.delta()
        };
        raw.min(self.model.t_end()).min(self.horizon)
    }

    fn count_event(&mut self) -> Result<(), EngineError> {
        self.events += 1;
        if self.events > self.cfg.max_events {
            return Err(EngineError::RunawayRun(self.cfg.max_events));
        }
        Ok(())
    }

    /// Makes sure every interaction whose clock is not exhausted and whose
    /// previous occurrence completed has a sampled candidate start.
    fn arm_starts(&mut self) {
        let ids: Vec<InteractionId> = self.model.interactions().keys().cloned().collect();
        for id in ids {
            if self.next_starts.contains_key(&id) {
                continue;
            }
            if self.pending.iter().any(|o| o.record.interaction == id) {
                continue; // previous occurrence still in flight
            }
            let origin = self.sample_origin[&id];
            if origin.is_infinite() {
                continue;
            }
            let occ_index = {
                let c = self.occ_counter.entry(id.clone()).or_insert(0);
                let v = *c;
                *c += 1;
                v
            };
            let run_data = self.model.run_data_of(&id);
            let history = InteractionHistory {
                grants: self.grants_by_interaction.get(&id).map(|v| v.as_slice()).unwrap_or(&[]),
                trajectory: &self.trajectory,
                upper: self.now,
                eps: self.cfg.eps,
            };
            let mut rng = rng_stream(self.seed, &id, occ_index, Purpose::Start);
            let sampled = sample_start(
                &run_data.start,
                origin,
                self.model.t_end(),
                &history,
                &mut rng,
                self.cfg.eps,
            )
            .and_then(|ev| ev.first_at_or_after(origin, self.cfg.eps));
            match sampled {
                Some(t_s) => {
                    self.next_starts.insert(id, CandidateStart { t_s, occ_index });
                }
                None => {
                    self.sample_origin.insert(id, f64::INFINITY);
                }
            }
        }
    }

    /// Processes one candidate start at its start time: condition check,
    /// goods extraction, arrival and ongoing sampling.
    fn process_start(&mut self, id: InteractionId) -> Result<(), EngineError> {
        self.count_event()?;
        let cand = self.next_starts.remove(&id).expect("candidate exists");
        let t_s = cand.t_s;
        let interaction = &self.model.interactions()[&id];
        if !check_start_conditions(interaction, &self.states) {
            self.diagnostics.push(Diagnostic::StartCancelled { interaction: id.clone(), at: t_s });
            self.sample_origin.insert(id, t_s + self.cfg.eps);
            return Ok(());
        }

        let run_data = self.model.run_data_of(&id);
        let mut goods_rng = rng_stream(self.seed, &id, cand.occ_index, Purpose::Goods);
        let goods = extract_goods(interaction, &run_data.goods, &self.states, &mut goods_rng)?;

        let history = InteractionHistory {
            grants: self.grants_by_interaction.get(&id).map(|v| v.as_slice()).unwrap_or(&[]),
            trajectory: &self.trajectory,
            upper: t_s,
            eps: self.cfg.eps,
        };
        let mut arrival_rng = rng_stream(self.seed, &id, cand.occ_index, Purpose::Arrival);
        let mut t_a = sample_arrival(
            run_data,
            t_s,
            self.model.t_end(),
            &history,
            &mut arrival_rng,
            self.cfg.eps,
        );
        if t_a.is_infinite() {
            self.diagnostics.push(Diagnostic::ArrivalNever { interaction: id.clone(), t_s });
            self.sample_origin.insert(id, t_s + self.cfg.eps);
            return Ok(());
        }
        if t_a < t_s - self.cfg.eps {
            // the interaction was already ongoing when it started
            self.diagnostics.push(Diagnostic::ArrivalReanchored {
                interaction: id.clone(),
                t_s,
                raw_arrival: t_a,
            });
            t_a = t_s;
        }
        let mut ongoing_rng = rng_stream(self.seed, &id, cand.occ_index, Purpose::Ongoing);
        let ongoing = sample_ongoing(
            run_data,
            t_s,
            t_a,
            self.model.t_end(),
            &history,
            &mut ongoing_rng,
            self.cfg.eps,
        );

        let n_start = neighborhood(interaction, &run_data.neighborhood, &self.states);
        let agents_active: Vec<EntityId> = interaction
            .agents
            .iter()
            .filter(|a| {
                self.states
                    .get(*a)
                    .map(|s| s.is_active_for(&id))
                    .unwrap_or(false)
            })
            .cloned()
            .collect();
        let prop_act = self
            .states
            .get(&interaction.propagator)
            .map(|s| s.activation(&id))
            .unwrap_or(0.0);

        let occ = PendingOccurrence {
            record: OccurrenceRecord {
                interaction: id.clone(),
                occurrence: cand.occ_index,
                t_s,
                t_a,
                ongoing,
                goods_at_start: goods,
            },
            neighborhood_at_start: n_start,
            agents_active_at_start: agents_active,
            propagator_activation_at_start: prop_act,
        };
        let key = (occ.record.t_a, occ.record.interaction.clone(), occ.record.occurrence);
        let pos = self.pending.partition_point(|o| {
            (o.record.t_a, o.record.interaction.clone(), o.record.occurrence) <= key
        });
        self.pending.insert(pos, occ);
        Ok(())
    }

    /// Computes the evolution of one patient over `[t1, end]` from the
    /// pre-batch states, without committing anything. Returns the sampled
    /// `(time, state)` pairs, one per window sample time.
    pub fn apply_evolution(
        &self,
        patient: &EntityId,
        window: (Time, Time),
        records: &[OccurrenceRecord],
    ) -> Result<Vec<(Time, StateVector)>, EngineError> {
        let eps = self.cfg.eps;
        let (t1, end) = window;
        let mut times: Vec<Time> = Vec::new();
        for rec in records {
            times.push(rec.t_a);
            match rec.ongoing {
                OngoingWindow::Point(t) => {
                    if t >= t1 - eps && t <= end + eps {
                        times.push(t);
                    }
                }
                OngoingWindow::Interval(a, b) => {
                    let lo = a.max(t1);
                    let hi = b.min(end);
                    if hi > lo + eps {
                        let h = self.cfg.micro_step.unwrap_or((end - t1) / 1000.0);
                        times.push(lo);
                        if h.is_finite() && h > eps {
                            let mut k = 1u64;
                            while lo + k as f64 * h < hi - eps {
                                times.push(lo + k as f64 * h);
                                k += 1;
                            }
                        }
                        times.push(hi);
                    } else {
                        times.push(lo);
                    }
                }
            }
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup_by(|a, b| (*a - *b).abs() <= eps);

        let start_state = self.states.get(patient).cloned().ok_or_else(|| {
            EngineError::TransitionFailure {
                entity: patient.to_string(),
                time: t1,
                detail: "patient has no state".into(),
            }
        })?;
        let transition = self.model.transition_of(patient);
        let first = records.first().expect("non-empty batch");
        let mut rng = rng_stream(self.seed, &first.interaction, first.occurrence, Purpose::Evolution);

        let mut out = Vec::with_capacity(times.len());
        for &s in &times {
            let history = self.neighborhood_state(patient, s);
            let ctx = EvolutionCtx {
                model: self.model,
                patient,
                window,
                start_state: &start_state,
                occurrences: records,
                history: &history,
                eps,
            };
            let new_state = transition.eval(&ctx, &mut rng, s).map_err(|e| match e {
                TransitionError::Undefined { entity, tau } => EngineError::UndefinedAt {
                    patient: patient.to_string(),
                    entity: entity.to_string(),
                    tau,
                },
                TransitionError::Failed(detail) => EngineError::TransitionFailure {
                    entity: patient.to_string(),
                    time: s,
                    detail,
                },
            })?;
            self.validate_written_state(patient, &new_state, s)?;
            out.push((s, new_state));
        }
        Ok(out)
    }

    fn validate_written_state(
        &self,
        entity: &EntityId,
        state: &StateVector,
        time: Time,
    ) -> Result<(), EngineError> {
        let space = &self.model.entities()[entity];
        let propagated = self.model.propagated_by(entity).expect("declared entity");
        crate::model::validate_state(entity, state, space, self.model.interactions(), propagated)
            .map_err(|e| EngineError::TransitionFailure {
                entity: entity.to_string(),
                time,
                detail: e.to_string(),
            })
    }

    /// Runs the batch whose first arrival is `t1`: commits every pending
    /// occurrence arriving inside the evolution window that passes the
    /// arrival conditions, applies the evolution of each affected patient,
    /// enforces the zero-resource law, and advances `now` to the window end.
    fn run_batch(&mut self, t1: Time) -> Result<(), EngineError> {
        self.count_event()?;
        let eps = self.cfg.eps;
        let window_end = self.window_end(t1);

        // Starts strictly inside the open window would violate the
        // exclusivity of the evolution equation; defer them to its end.
        let defer_limit = if self.model.delta().is_infinite() {
            self.model.t_end()
        } else {
            (t1 + self.model.delta()).min(self.model.t_end())
        };
        for (id, cand) in self.next_starts.iter_mut() {
            if cand.t_s > t1 + eps && cand.t_s < defer_limit - eps {
                self.diagnostics.push(Diagnostic::StartDeferred {
                    interaction: id.clone(),
                    from: cand.t_s,
                    to: defer_limit,
                });
                cand.t_s = defer_limit;
            }
        }

        // Split off the batch: arrivals inside the closed window.
        let mut batch: Vec<PendingOccurrence> = Vec::new();
        let mut keep: Vec<PendingOccurrence> = Vec::new();
        for occ in std::mem::take(&mut self.pending) {
            if occ.record.t_a <= window_end + eps {
                batch.push(occ);
            } else {
                keep.push(occ);
            }
        }
        self.pending = keep;

        // Arrival conditions against pre-batch states; survivors commit.
        let mut by_patient: BTreeMap<EntityId, Vec<OccurrenceRecord>> = BTreeMap::new();
        for occ in batch {
            let id = occ.record.interaction.clone();
            let interaction = &self.model.interactions()[&id];
            if !check_arrival_conditions(interaction, &self.states) {
                self.diagnostics.push(Diagnostic::ArrivalDropped {
                    interaction: id.clone(),
                    t_s: occ.record.t_s,
                    t_a: occ.record.t_a,
                });
                self.sample_origin.insert(id, occ.record.t_a + eps);
                continue;
            }
            let run_data = self.model.run_data_of(&id);
            let n_arrival = neighborhood(interaction, &run_data.neighborhood, &self.states);
            self.grants_by_patient
                .entry(interaction.patient.clone())
                .or_default()
                .push((occ.record.t_a, n_arrival.clone()));
            self.grants_by_interaction
                .entry(id.clone())
                .or_default()
                .push((occ.record.t_a, n_arrival.clone()));
            self.trace.entries.push(TraceEntry {
                record: occ.record.clone(),
                patient: interaction.patient.clone(),
                neighborhood_at_start: occ.neighborhood_at_start.clone(),
                neighborhood_at_arrival: n_arrival,
                agents_active_at_start: occ.agents_active_at_start.clone(),
                propagator_activation_at_start: occ.propagator_activation_at_start,
                propagator_activation_at_arrival: self
                    .states
                    .get(&interaction.propagator)
                    .map(|s| s.activation(&id))
                    .unwrap_or(0.0),
                patient_activation_at_arrival: self
                    .states
                    .get(&interaction.patient)
                    .map(|s| s.activation(&id))
                    .unwrap_or(0.0),
            });
            // next start of this interaction resumes after the window
            self.sample_origin
                .insert(id, (occ.record.t_s + eps).max(window_end));
            by_patient
                .entry(interaction.patient.clone())
                .or_default()
                .push(occ.record);
        }

        // All patients evolve from the same pre-batch snapshot.
        let mut writes: Vec<(EntityId, Vec<(Time, StateVector)>)> = Vec::new();
        for (patient, records) in &by_patient {
            let samples = self.apply_evolution(patient, (t1, window_end), records)?;
            writes.push((patient.clone(), samples));
        }
        for (patient, samples) in writes {
            for (s, state) in samples {
                self.trajectory.push(&patient, s, state.clone(), eps);
                self.states.insert(patient.clone(), state);
            }
        }

        self.enforce_zero_resources(window_end);
        self.now = window_end.max(self.now);
        Ok(())
    }

    /// Zero-resource law: whenever the goods carried for an interaction lie
    /// in its zero set, the patient cannot stay active for it.
    fn enforce_zero_resources(&mut self, at: Time) {
        for (id, interaction) in self.model.interactions() {
            let Some(zero) = &interaction.zero_set else { continue };
            let in_zero = self
                .states
                .get(&interaction.propagator)
                .and_then(|s| s.goods.get(id))
                .map(|g| zero.contains(g))
                .unwrap_or(false);
            if !in_zero {
                continue;
            }
            let patient_state = self.states.get_mut(&interaction.patient).expect("declared");
            if patient_state.activation(id) != 0.0 {
                patient_state.activation.insert(id.clone(), 0.0);
                let snapshot = patient_state.clone();
                self.trajectory.push(&interaction.patient, at, snapshot, self.cfg.eps);
                self.diagnostics.push(Diagnostic::ZeroResourceDeactivation {
                    interaction: id.clone(),
                    patient: interaction.patient.clone(),
                    at,
                });
            }
        }
    }

    fn finish(&mut self) {
        let eps = self.cfg.eps;
        for (e, st) in &self.states {
            let last = self
                .trajectory
                .samples
                .get(e)
                .and_then(|v| v.last())
                .map(|(t, _)| *t)
                .unwrap_or(f64::NEG_INFINITY);
            if last < self.horizon - eps {
                self.trajectory.push(e, self.horizon, st.clone(), eps);
            }
        }
        self.now = self.horizon;
        self.finished = true;
    }

    /// Advances the run to its next batch (or to the horizon when nothing
    /// remains). Returns `false` once the run is finished.
    pub fn step(&mut self) -> Result<bool, EngineError> {
        if self.finished {
            return Ok(false);
        }
        loop {
            self.arm_starts();
            let next_start = self
                .next_starts
                .iter()
                .map(|(id, c)| (c.t_s, id.clone()))
                .min_by(|a, b| a.partial_cmp(b).unwrap());
            let next_arrival = self.pending.first().map(|o| o.record.t_a);
            let t_next = match (next_start.as_ref(), next_arrival) {
                (Some((ts, _)), Some(ta)) => ts.min(ta),
                (Some((ts, _)), None) => *ts,
                (None, Some(ta)) => ta,
                (None, None) => f64::INFINITY,
            };
            if t_next.is_infinite() || t_next > self.horizon + self.cfg.eps {
                self.finish();
                return Ok(false);
            }
            // starts first: an instantaneous occurrence may join this batch
            let due: Vec<InteractionId> = self
                .next_starts
                .iter()
                .filter(|(_, c)| c.t_s <= t_next + self.cfg.eps)
                .map(|(id, _)| id.clone())
                .collect();
            if !due.is_empty() {
                for id in due {
                    self.process_start(id)?;
                }
                continue;
            }
            self.run_batch(t_next)?;
            return Ok(true);
        }
    }

    /// Consumes the run, producing its outputs.
    pub fn into_output(self) -> RunOutput {
        RunOutput {
            trajectory: self.trajectory,
            trace: self.trace,
            diagnostics: self.diagnostics,
        }
    }
}

/// Runs `model` from its initial states to `horizon`. The result is a pure
/// function of the arguments: identical inputs give identical outputs,
/// regardless of thread placement.
pub fn run(
    model: &Model,
    cfg: &EngineConfig,
    seed: u64,
    horizon: Time,
) -> Result<RunOutput, EngineError> {
    let mut sim = SimRun::new(model, cfg.clone(), seed, horizon)?;
    while sim.step()? {}
    Ok(sim.into_output())
}
