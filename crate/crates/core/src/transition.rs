//! Evolution transitions: the state update applied to a patient over an
//! evolution window.
//!
//! A transition receives the window, the batch of occurrences that arrived
//! for the patient, a history accessor bounded by the neighborhood law, and
//! a purpose-keyed random stream, and returns the full state (activation,
//! goods, proper value) at the queried sample time. Model files select
//! transitions from the built-in library below; library users may also
//! attach arbitrary closures, which are not serializable.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{EntityId, InteractionId, Model, StateVector};
use crate::runtime::OccurrenceRecord;
use crate::time::Time;
use crate::value::Value;

/// Failure raised by a transition evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum TransitionError {
    /// A history read outside the granted neighborhood domain.
    Undefined { entity: EntityId, tau: Time },
    Failed(String),
}

impl From<String> for TransitionError {
    fn from(s: String) -> Self {
        TransitionError::Failed(s)
    }
}

impl From<&str> for TransitionError {
    fn from(s: &str) -> Self {
        TransitionError::Failed(s.to_string())
    }
}

/// Read access to past states, defined exactly on the `(time, entity)`
/// pairs granted by committed arrivals on the patient.
pub trait PatientHistory {
    fn state_at(&self, tau: Time, entity: &EntityId) -> Result<&StateVector, TransitionError>;
}

/// Evaluation context handed to a transition for one evolution window.
pub struct EvolutionCtx<'a> {
    pub model: &'a Model,
    pub patient: &'a EntityId,
    /// The evolution window `[t1, end]`, already clipped to the model
    /// window and the run horizon.
    pub window: (Time, Time),
    /// Patient state at the window start, before any update of this batch.
    pub start_state: &'a StateVector,
    /// Occurrences of this batch whose patient is `patient`.
    pub occurrences: &'a [OccurrenceRecord],
    pub history: &'a dyn PatientHistory,
    pub eps: f64,
}

impl<'a> EvolutionCtx<'a> {
    fn first_occurrence(&self) -> Result<&OccurrenceRecord, TransitionError> {
        self.occurrences
            .first()
            .ok_or_else(|| TransitionError::Failed("empty occurrence batch".into()))
    }

    /// Whether `s` is the very first event of the model window; stepwise
    /// discrete transitions keep the initial state there.
    fn at_model_start(&self, s: Time) -> bool {
        s <= self.model.t_start() + self.eps
    }
}

/// Pointwise update applied by the discrete-map transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapUpdate {
    /// `x <- r * x * (1 - x)`, componentwise.
    Logistic { r: f64 },
    /// `x <- A x + b`.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// `x <- factor * x`.
    Scale { factor: f64 },
}

impl MapUpdate {
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>, TransitionError> {
        match self {
            MapUpdate::Logistic { r } => Ok(x.iter().map(|&v| r * v * (1.0 - v)).collect()),
            MapUpdate::Affine { matrix, offset } => affine(matrix, offset, x),
            MapUpdate::Scale { factor } => Ok(x.iter().map(|&v| factor * v).collect()),
        }
    }
}

/// Built-in transition library. Every entry is serializable; parameters are
/// plain data so models round-trip through files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionSpec {
    /// Keep the window-start state.
    Constant,
    /// Integral form of `x' = A x + b`: the state at `s` is the window-start
    /// state advanced by a fixed-step fourth-order integrator with step
    /// `step`, restarted from the window start for every sample.
    Ode {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        offset: Vec<f64>,
        step: f64,
    },
    /// Discrete orbit: at event time `s`, the new state is the update
    /// applied to the pre-window state. With `identity_at_start`, the event
    /// at the model start leaves the initial condition in place so that the
    /// state at integer time `k` is the `k`-th orbit point.
    Map {
        update: MapUpdate,
        #[serde(default)]
        identity_at_start: bool,
    },
    /// Outer-totalistic cellular-automaton rule: counts agent cells whose
    /// proper state equals `alive` and applies birth/survival count sets.
    CaRule {
        alive: String,
        dead: String,
        birth: Vec<usize>,
        survive: Vec<usize>,
        #[serde(default)]
        identity_at_start: bool,
    },
    /// Mean of the adjacent node states; adjacency is read from pair
    /// entities whose scalar state is nonzero. With no active link the
    /// state is kept.
    ConsensusMean {
        links: Vec<(EntityId, EntityId)>,
        #[serde(default)]
        identity_at_start: bool,
    },
    /// Proper state follows a time table (last entry at-or-before `s`).
    PiecewiseConstant { samples: Vec<(Time, Value)> },
    /// Full state (activation, goods, proper) follows a time table.
    UserTable { samples: Vec<(Time, StateVector)> },
    /// Overrides the patient's activation for one interaction from a time
    /// table, leaving everything else unchanged.
    ActivationSchedule {
        interaction: InteractionId,
        steps: Vec<(Time, f64)>,
    },
    /// Uniformly accelerated motion from goods `(x0, v0)` extracted at the
    /// occurrence start.
    BallisticFromGoods { accel: Vec<f64> },
}

fn affine(matrix: &[Vec<f64>], offset: &[f64], x: &[f64]) -> Result<Vec<f64>, TransitionError> {
    let n = matrix.len();
    let mut out = Vec::with_capacity(n);
    for (r, row) in matrix.iter().enumerate() {
        if row.len() != x.len() {
            return Err(format!(
                "affine row {r} has {} columns for a state of dimension {}",
                row.len(),
                x.len()
            )
            .into());
        }
        let mut sum = 0.0;
        for (c, m) in row.iter().enumerate() {
            sum += m * x[c];
        }
        if !offset.is_empty() {
            sum += offset[r];
        }
        out.push(sum);
    }
    Ok(out)
}

/// One classical fourth-order step.
fn rk4_step<F>(f: &F, t: f64, y: &[f64], h: f64) -> Result<Vec<f64>, TransitionError>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>, TransitionError>,
{
    let k1 = f(t, y)?;
    let y2: Vec<f64> = y.iter().zip(&k1).map(|(yi, k)| yi + h / 2.0 * k).collect();
    let k2 = f(t + h / 2.0, &y2)?;
    let y3: Vec<f64> = y.iter().zip(&k2).map(|(yi, k)| yi + h / 2.0 * k).collect();
    let k3 = f(t + h / 2.0, &y3)?;
    let y4: Vec<f64> = y.iter().zip(&k3).map(|(yi, k)| yi + h * k).collect();
    let k4 = f(t + h, &y4)?;
    Ok(y
        .iter()
        .enumerate()
        .map(|(j, yi)| yi + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
        .collect())
}

/// Fixed-step integration of `y' = f(t, y)` from `a` to `b`: full steps of
/// size `h` while they fit, then one shortened final step.
pub(crate) fn integrate_fixed<F>(
    f: &F,
    y0: &[f64],
    a: Time,
    b: Time,
    h: f64,
    eps: f64,
) -> Result<Vec<f64>, TransitionError>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>, TransitionError>,
{
    if h <= 0.0 || !h.is_finite() {
        return Err(format!("integrator step must be positive, got {h}").into());
    }
    let mut y = y0.to_vec();
    let mut k: u64 = 0;
    while a + (k + 1) as f64 * h <= b + eps {
        y = rk4_step(f, a + k as f64 * h, &y, h)?;
        k += 1;
    }
    let t = a + k as f64 * h;
    if b - t > eps {
        y = rk4_step(f, t, &y, b - t)?;
    }
    Ok(y)
}

fn table_lookup<T>(samples: &[(Time, T)], s: Time, eps: f64) -> Option<&T> {
    samples
        .iter()
        .take_while(|(t, _)| *t <= s + eps)
        .last()
        .map(|(_, v)| v)
}

impl TransitionSpec {
    fn eval(
        &self,
        ctx: &EvolutionCtx<'_>,
        _rng: &mut ChaCha8Rng,
        s: Time,
    ) -> Result<StateVector, TransitionError> {
        let mut state = ctx.start_state.clone();
        match self {
            TransitionSpec::Constant => Ok(state),

            TransitionSpec::Ode { matrix, offset, step } => {
                let y0 = state
                    .proper
                    .as_real()
                    .ok_or_else(|| TransitionError::from("ode transition needs a real state"))?
                    .to_vec();
                let f = |_t: f64, y: &[f64]| affine(matrix, offset, y);
                let y = integrate_fixed(&f, &y0, ctx.window.0, s, *step, ctx.eps)?;
                state.proper = Value::Real(y);
                Ok(state)
            }

            TransitionSpec::Map { update, identity_at_start } => {
                if *identity_at_start && ctx.at_model_start(s) {
                    return Ok(state);
                }
                let x = state
                    .proper
                    .as_real()
                    .ok_or_else(|| TransitionError::from("map transition needs a real state"))?
                    .to_vec();
                state.proper = Value::Real(update.apply(&x)?);
                Ok(state)
            }

            TransitionSpec::CaRule { alive, dead, birth, survive, identity_at_start } => {
                if *identity_at_start && ctx.at_model_start(s) {
                    return Ok(state);
                }
                let occ = ctx.first_occurrence()?;
                let interaction = ctx
                    .model
                    .interaction(&occ.interaction)
                    .map_err(|e| TransitionError::Failed(e.to_string()))?;
                let mut count = 0usize;
                for cell in &interaction.agents {
                    let neighbor = ctx.history.state_at(ctx.window.0, cell)?;
                    if neighbor.proper.as_label() == Some(alive.as_str()) {
                        count += 1;
                    }
                }
                let was_alive = state.proper.as_label() == Some(alive.as_str());
                let now_alive = if was_alive {
                    survive.contains(&count)
                } else {
                    birth.contains(&count)
                };
                state.proper = Value::label(if now_alive { alive } else { dead });
                Ok(state)
            }

            TransitionSpec::ConsensusMean { links, identity_at_start } => {
                if *identity_at_start && ctx.at_model_start(s) {
                    return Ok(state);
                }
                let mut sum = 0.0;
                let mut n = 0usize;
                for (pair, node) in links {
                    let link = ctx.history.state_at(ctx.window.0, pair)?;
                    let on = link.proper.as_scalar().unwrap_or(0.0);
                    if on != 0.0 {
                        let v = ctx
                            .history
                            .state_at(ctx.window.0, node)?
                            .proper
                            .as_scalar()
                            .ok_or_else(|| TransitionError::from("consensus needs scalar node states"))?;
                        sum += v;
                        n += 1;
                    }
                }
                if n > 0 {
                    state.proper = Value::scalar(sum / n as f64);
                }
                Ok(state)
            }

            TransitionSpec::PiecewiseConstant { samples } => {
                if let Some(v) = table_lookup(samples, s, ctx.eps) {
                    state.proper = v.clone();
                }
                Ok(state)
            }

            TransitionSpec::UserTable { samples } => {
                Ok(table_lookup(samples, s, ctx.eps).cloned().unwrap_or(state))
            }

            TransitionSpec::ActivationSchedule { interaction, steps } => {
                if let Some(&a) = table_lookup(steps, s, ctx.eps) {
                    state.activation.insert(interaction.clone(), a);
                }
                Ok(state)
            }

            TransitionSpec::BallisticFromGoods { accel } => {
                let occ = ctx.first_occurrence()?;
                let goods = occ
                    .goods_at_start
                    .as_real()
                    .ok_or_else(|| TransitionError::from("ballistic goods must be (x0, v0)"))?;
                let d = accel.len();
                if goods.len() != 2 * d {
                    return Err(format!(
                        "ballistic goods need dimension {} (position + velocity), got {}",
                        2 * d,
                        goods.len()
                    )
                    .into());
                }
                let dt = s - occ.t_s;
                let pos: Vec<f64> = (0..d)
                    .map(|j| goods[j] + goods[d + j] * dt + 0.5 * accel[j] * dt * dt)
                    .collect();
                state.proper = Value::Real(pos);
                Ok(state)
            }
        }
    }
}

/// Signature of a user-supplied transition closure.
pub type CustomFn = Arc<
    dyn Fn(&EvolutionCtx<'_>, &mut ChaCha8Rng, Time) -> Result<StateVector, TransitionError>
        + Send
        + Sync,
>;

/// A transition: either an entry of the built-in library or an arbitrary
/// closure. Closures cannot be serialized into model files.
#[derive(Clone)]
pub enum Transition {
    Spec(TransitionSpec),
    Custom(CustomFn),
}

impl Transition {
    pub fn constant() -> Self {
        Transition::Spec(TransitionSpec::Constant)
    }

    pub fn spec(spec: TransitionSpec) -> Self {
        Transition::Spec(spec)
    }

    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(&EvolutionCtx<'_>, &mut ChaCha8Rng, Time) -> Result<StateVector, TransitionError>
            + Send
            + Sync
            + 'static,
    {
        Transition::Custom(Arc::new(f))
    }

    /// State of the patient at sample time `s` of the evolution window.
    pub fn eval(
        &self,
        ctx: &EvolutionCtx<'_>,
        rng: &mut ChaCha8Rng,
        s: Time,
    ) -> Result<StateVector, TransitionError> {
        match self {
            Transition::Spec(spec) => spec.eval(ctx, rng, s),
            Transition::Custom(f) => f(ctx, rng, s),
        }
    }
}

impl Default for Transition {
    fn default() -> Self {
        Transition::constant()
    }
}

impl fmt::Debug for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transition::Spec(s) => write!(f, "Spec({s:?})"),
            Transition::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl PartialEq for Transition {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Transition::Spec(a), Transition::Spec(b)) => a == b,
            (Transition::Custom(a), Transition::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl Serialize for Transition {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Transition::Spec(spec) => spec.serialize(serializer),
            Transition::Custom(_) => Err(serde::ser::Error::custom(
                "custom transitions cannot be serialized; use the built-in library",
            )),
        }
    }
}

impl<'de> Deserialize<'de> for Transition {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        TransitionSpec::deserialize(deserializer).map(Transition::Spec)
    }
}

/// History accessor over a plain state map, every entity granted at every
/// time. Useful for tests and for evaluating transitions outside a run.
pub struct UnrestrictedHistory<'a>(pub &'a BTreeMap<EntityId, StateVector>);

impl PatientHistory for UnrestrictedHistory<'_> {
    fn state_at(&self, tau: Time, entity: &EntityId) -> Result<&StateVector, TransitionError> {
        self.0.get(entity).ok_or(TransitionError::Undefined {
            entity: entity.clone(),
            tau,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelDecl};
    use crate::runtime::{rng_stream, OngoingWindow, Purpose};

    fn toy_model() -> Model {
        // entity-only model; transitions under test do not consult it except
        // for the window bounds
        build_model(ModelDecl {
            t_start: 0.0,
            t_end: 10.0,
            types: Default::default(),
            entities: BTreeMap::from([("p".into(), crate::value::SpaceDescriptor::scalar())]),
            interactions: vec![],
            run_data: Default::default(),
            delta: 1.0,
            transitions: Default::default(),
            initial_states: BTreeMap::from([("p".into(), StateVector::new(Value::scalar(0.0)))]),
        })
        .unwrap()
    }

    fn eval_at(
        spec: TransitionSpec,
        start_state: &StateVector,
        window: (Time, Time),
        occurrences: &[OccurrenceRecord],
        s: Time,
    ) -> Result<StateVector, TransitionError> {
        let model = toy_model();
        let states = BTreeMap::new();
        let history = UnrestrictedHistory(&states);
        let patient = EntityId::from("p");
        let ctx = EvolutionCtx {
            model: &model,
            patient: &patient,
            window,
            start_state,
            occurrences,
            history: &history,
            eps: 1e-9,
        };
        let mut rng = rng_stream(0, &"i".into(), 0, Purpose::Evolution);
        Transition::Spec(spec).eval(&ctx, &mut rng, s)
    }

    fn occurrence(t_s: Time, goods: Value) -> OccurrenceRecord {
        OccurrenceRecord {
            interaction: "i".into(),
            occurrence: 0,
            t_s,
            t_a: t_s,
            ongoing: OngoingWindow::Point(t_s),
            goods_at_start: goods,
        }
    }

    #[test]
    fn constant_keeps_the_window_start_state() {
        let st = StateVector::new(Value::scalar(4.0)).with_activation("i", 0.5);
        let out = eval_at(TransitionSpec::Constant, &st, (0.0, 1.0), &[], 0.7).unwrap();
        assert_eq!(out, st);
    }

    #[test]
    fn ode_with_zero_rhs_is_constant() {
        let st = StateVector::new(Value::scalar(3.25));
        let spec = TransitionSpec::Ode {
            matrix: vec![vec![0.0]],
            offset: vec![],
            step: 1e-2,
        };
        let out = eval_at(spec, &st, (0.0, 1.0), &[], 1.0).unwrap();
        assert_eq!(out.proper, Value::scalar(3.25));
    }

    #[test]
    fn ode_decay_approximates_the_exponential() {
        let st = StateVector::new(Value::scalar(1.0));
        let spec = TransitionSpec::Ode {
            matrix: vec![vec![-1.0]],
            offset: vec![],
            step: 1e-3,
        };
        let out = eval_at(spec, &st, (0.0, 1.0), &[], 1.0).unwrap();
        let x = out.proper.as_scalar().unwrap();
        assert!((x - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn map_doubling_orbit() {
        let update = MapUpdate::Scale { factor: 2.0 };
        let mut x = vec![1.0];
        for _ in 0..3 {
            x = update.apply(&x).unwrap();
        }
        assert_eq!(x, vec![8.0]);
    }

    #[test]
    fn map_identity_at_the_first_event() {
        let st = StateVector::new(Value::scalar(1.0));
        let spec = TransitionSpec::Map {
            update: MapUpdate::Scale { factor: 2.0 },
            identity_at_start: true,
        };
        let out = eval_at(spec.clone(), &st, (0.0, 1.0), &[], 0.0).unwrap();
        assert_eq!(out.proper, Value::scalar(1.0));
        let out = eval_at(spec, &st, (1.0, 2.0), &[], 1.0).unwrap();
        assert_eq!(out.proper, Value::scalar(2.0));
    }

    #[test]
    fn ballistic_matches_closed_form_kinematics() {
        let goods = Value::Real(vec![0.0, 0.0, 10.0, 1.0, 2.0, 5.0]); // x0, v0 in R^3
        let spec = TransitionSpec::BallisticFromGoods {
            accel: vec![0.0, 0.0, -9.81],
        };
        let st = StateVector::new(Value::Real(vec![0.0, 0.0, 10.0]));
        let occ = occurrence(0.0, goods);
        let out = eval_at(spec, &st, (0.0, 2.0), &[occ], 2.0).unwrap();
        let pos = out.proper.as_real().unwrap();
        assert_eq!(pos[0], 0.0 + 1.0 * 2.0);
        assert_eq!(pos[1], 0.0 + 2.0 * 2.0);
        assert!((pos[2] - (10.0 + 5.0 * 2.0 + 0.5 * (-9.81) * 4.0)).abs() < 1e-12);
    }

    #[test]
    fn user_table_replaces_the_whole_state() {
        let st = StateVector::new(Value::scalar(0.0)).with_activation("i", 1.0);
        let replacement = StateVector::new(Value::scalar(9.0)).with_activation("i", 0.0);
        let spec = TransitionSpec::UserTable {
            samples: vec![(2.0, replacement.clone())],
        };
        let out = eval_at(spec.clone(), &st, (1.0, 5.0), &[], 1.5).unwrap();
        assert_eq!(out, st, "before the first table entry the state is kept");
        let out = eval_at(spec, &st, (1.0, 5.0), &[], 3.0).unwrap();
        assert_eq!(out, replacement);
    }

    #[test]
    fn activation_schedule_touches_one_interaction_only() {
        let st = StateVector::new(Value::scalar(0.0))
            .with_activation("i", 1.0)
            .with_activation("j", 0.25);
        let spec = TransitionSpec::ActivationSchedule {
            interaction: "i".into(),
            steps: vec![(0.0, 1.0), (2.0, 0.0)],
        };
        let out = eval_at(spec, &st, (2.0, 3.0), &[], 2.0).unwrap();
        assert_eq!(out.activation(&"i".into()), 0.0);
        assert_eq!(out.activation(&"j".into()), 0.25);
        assert_eq!(out.proper, st.proper);
    }

    #[test]
    fn custom_transitions_compare_by_identity_and_do_not_serialize() {
        let t = Transition::custom(|ctx, _rng, _s| Ok(ctx.start_state.clone()));
        assert_eq!(t, t.clone());
        assert_ne!(t, Transition::custom(|ctx, _rng, _s| Ok(ctx.start_state.clone())));
        assert!(serde_json::to_string(&t).is_err());
        assert!(serde_json::to_string(&Transition::constant()).is_ok());
    }
}
