//! Static structure of an interaction space: entities, typed interactions,
//! state vectors, and the validated [`Model`] that a simulation runs.
//!
//! An interaction names an ordered list of agent entities, a propagator, a
//! type label, and a patient. Every entity carries a state vector with three
//! components: an activation map (one degree in `[0, 1]` per interaction),
//! a goods value for every interaction the entity propagates, and a proper
//! state in the entity's own state space.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ValidationError;
use crate::runtime::RunData;
use crate::time::{Time, DEFAULT_EPS};
use crate::transition::Transition;
use crate::value::{SpaceDescriptor, Value, ZeroSet};

/// Identifier of an interacting entity, unique within a model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        EntityId(id.into())
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_string())
    }
}

/// Identifier of an interaction, unique within a model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InteractionId(pub String);

impl InteractionId {
    pub fn new(id: impl Into<String>) -> Self {
        InteractionId(id.into())
    }
}

impl fmt::Display for InteractionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for InteractionId {
    fn from(s: &str) -> Self {
        InteractionId(s.to_string())
    }
}

/// A typed cause-effect interaction: `agents` act on `patient` through
/// `propagator`. The propagator's resource subspace holds the goods the
/// interaction carries; an optional zero set marks resource values that
/// deactivate the patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interaction {
    pub id: InteractionId,
    /// Ordered agent list; may be empty (the agent clause of the occurrence
    /// conditions is then vacuous).
    #[serde(default)]
    pub agents: Vec<EntityId>,
    pub propagator: EntityId,
    pub itype: String,
    pub patient: EntityId,
    pub resource_space: SpaceDescriptor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_set: Option<ZeroSet>,
    /// Component interactions when this is a simultaneous vector
    /// interaction built by [`make_vector_interaction`]; empty otherwise.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<InteractionId>,
}

impl Interaction {
    /// All entities involved in the interaction: agents, propagator, patient.
    pub fn entities(&self) -> BTreeSet<&EntityId> {
        let mut set: BTreeSet<&EntityId> = self.agents.iter().collect();
        set.insert(&self.propagator);
        set.insert(&self.patient);
        set
    }

    /// Activation of this interaction in `state`. For a vector interaction
    /// this is the product of the component activations.
    pub fn activation_in(&self, state: &StateVector) -> f64 {
        if self.parts.is_empty() {
            state.activation(&self.id)
        } else {
            self.parts.iter().map(|p| state.activation(p)).product()
        }
    }
}

/// Per-entity state: activation map, goods per propagated interaction, and
/// the proper state value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateVector {
    /// Sparse activation map; interactions not present have activation 0.
    #[serde(default)]
    pub activation: BTreeMap<InteractionId, f64>,
    /// Goods values, keyed by the interactions this entity propagates.
    #[serde(default)]
    pub goods: BTreeMap<InteractionId, Value>,
    pub proper: Value,
}

impl StateVector {
    pub fn new(proper: Value) -> Self {
        StateVector {
            activation: BTreeMap::new(),
            goods: BTreeMap::new(),
            proper,
        }
    }

    pub fn with_activation(mut self, i: impl Into<InteractionId>, a: f64) -> Self {
        self.activation.insert(i.into(), a);
        self
    }

    pub fn with_goods(mut self, i: impl Into<InteractionId>, g: Value) -> Self {
        self.goods.insert(i.into(), g);
        self
    }

    /// Activation for interaction `i` (0 when absent).
    pub fn activation(&self, i: &InteractionId) -> f64 {
        self.activation.get(i).copied().unwrap_or(0.0)
    }

    pub fn is_active_for(&self, i: &InteractionId) -> bool {
        self.activation(i) != 0.0
    }

    /// Whether the entity is active for at least one interaction.
    pub fn active_for_any(&self) -> bool {
        self.activation.values().any(|&a| a != 0.0)
    }
}

/// Raw model declaration, the input of [`build_model`] and the shape that
/// model files carry. Field order is the serialization order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDecl {
    pub t_start: Time,
    #[serde(with = "crate::time::serde_inf")]
    pub t_end: Time,
    #[serde(default)]
    pub types: BTreeSet<String>,
    pub entities: BTreeMap<EntityId, SpaceDescriptor>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
    #[serde(default)]
    pub run_data: BTreeMap<InteractionId, RunData>,
    /// Length of the evolution window opened by each first arrival.
    #[serde(with = "crate::time::serde_inf")]
    pub delta: Time,
    #[serde(default)]
    pub transitions: BTreeMap<EntityId, Transition>,
    pub initial_states: BTreeMap<EntityId, StateVector>,
}

/// A validated, immutable interaction-space model. Safe to share across
/// concurrent simulation runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    t_start: Time,
    t_end: Time,
    types: BTreeSet<String>,
    entities: BTreeMap<EntityId, SpaceDescriptor>,
    interactions: BTreeMap<InteractionId, Interaction>,
    run_data: BTreeMap<InteractionId, RunData>,
    delta: Time,
    transitions: BTreeMap<EntityId, Transition>,
    initial_states: BTreeMap<EntityId, StateVector>,
    /// Derived: interactions propagated by each entity.
    propagates: BTreeMap<EntityId, BTreeSet<InteractionId>>,
    eps: f64,
}

impl Model {
    pub fn t_start(&self) -> Time {
        self.t_start
    }

    pub fn t_end(&self) -> Time {
        self.t_end
    }

    pub fn delta(&self) -> Time {
        self.delta
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn types(&self) -> &BTreeSet<String> {
        &self.types
    }

    pub fn entities(&self) -> &BTreeMap<EntityId, SpaceDescriptor> {
        &self.entities
    }

    pub fn interactions(&self) -> &BTreeMap<InteractionId, Interaction> {
        &self.interactions
    }

    pub fn interaction(&self, id: &InteractionId) -> Result<&Interaction, ValidationError> {
        self.interactions
            .get(id)
            .ok_or_else(|| ValidationError::UnknownInteraction(id.to_string()))
    }

    pub fn run_data(&self) -> &BTreeMap<InteractionId, RunData> {
        &self.run_data
    }

    pub fn run_data_of(&self, id: &InteractionId) -> &RunData {
        &self.run_data[id]
    }

    pub fn initial_states(&self) -> &BTreeMap<EntityId, StateVector> {
        &self.initial_states
    }

    /// Transition of an entity; entities without a declared transition keep
    /// their state frozen.
    pub fn transition_of(&self, e: &EntityId) -> Transition {
        self.transitions.get(e).cloned().unwrap_or_default()
    }

    pub fn transitions(&self) -> &BTreeMap<EntityId, Transition> {
        &self.transitions
    }

    /// Interactions whose propagator is `e`.
    pub fn propagated_by(&self, e: &EntityId) -> Option<&BTreeSet<InteractionId>> {
        self.propagates.get(e)
    }

    /// Reconstructs the declaration this model was built from.
    pub fn to_decl(&self) -> ModelDecl {
        ModelDecl {
            t_start: self.t_start,
            t_end: self.t_end,
            types: self.types.clone(),
            entities: self.entities.clone(),
            interactions: self.interactions.values().cloned().collect(),
            run_data: self.run_data.clone(),
            delta: self.delta,
            transitions: self.transitions.clone(),
            initial_states: self.initial_states.clone(),
        }
    }
}

/// Validates a raw declaration into an immutable [`Model`], using the
/// default time tolerance.
pub fn build_model(decl: ModelDecl) -> Result<Model, ValidationError> {
    build_model_with_eps(decl, DEFAULT_EPS)
}

/// Validates a raw declaration into an immutable [`Model`].
///
/// Returns the first violated invariant together with the offending element.
pub fn build_model_with_eps(decl: ModelDecl, eps: f64) -> Result<Model, ValidationError> {
    if !decl.t_start.is_finite() || decl.t_start >= decl.t_end {
        return Err(ValidationError::BadTimeInterval {
            t_start: decl.t_start,
            t_end: decl.t_end,
        });
    }
    if decl.delta.is_nan() || decl.delta < 0.0 {
        return Err(ValidationError::BadDelta(decl.delta));
    }

    let mut interactions = BTreeMap::new();
    for i in &decl.interactions {
        for e in i.entities() {
            if !decl.entities.contains_key(e) {
                return Err(ValidationError::UnknownEntity {
                    interaction: i.id.to_string(),
                    entity: e.to_string(),
                });
            }
        }
        if !decl.types.contains(&i.itype) {
            return Err(ValidationError::UnknownType {
                interaction: i.id.to_string(),
                itype: i.itype.clone(),
            });
        }
        if let Some(z) = &i.zero_set {
            if !z.valid_for(&i.resource_space) {
                return Err(ValidationError::BadZeroSet {
                    interaction: i.id.to_string(),
                });
            }
        }
        if interactions.insert(i.id.clone(), i.clone()).is_some() {
            return Err(ValidationError::DuplicateId(i.id.to_string()));
        }
    }
    for i in decl.interactions.iter() {
        for part in &i.parts {
            let p = interactions
                .get(part)
                .ok_or_else(|| ValidationError::UnknownInteraction(part.to_string()))?;
            if !p.parts.is_empty() {
                return Err(ValidationError::DuplicateId(format!(
                    "vector interaction `{}` may not nest vector part `{part}`",
                    i.id
                )));
            }
        }
    }

    let mut run_data = BTreeMap::new();
    for id in interactions.keys() {
        let rd = decl
            .run_data
            .get(id)
            .ok_or_else(|| ValidationError::MissingRunData(id.to_string()))?;
        let normalized = rd.validated(id, decl.t_start, decl.t_end, eps)?;
        run_data.insert(id.clone(), normalized);
    }

    // Propagated-interaction index: the goods keys every propagator must carry.
    let mut propagates: BTreeMap<EntityId, BTreeSet<InteractionId>> = BTreeMap::new();
    for e in decl.entities.keys() {
        propagates.insert(e.clone(), BTreeSet::new());
    }
    for i in interactions.values() {
        propagates
            .get_mut(&i.propagator)
            .expect("propagator declared")
            .insert(i.id.clone());
    }

    for (e, state) in &decl.initial_states {
        let space = decl
            .entities
            .get(e)
            .ok_or_else(|| ValidationError::UnknownEntity {
                interaction: "<initial state>".into(),
                entity: e.to_string(),
            })?;
        validate_state(e, state, space, &interactions, &propagates[e])?;
    }
    for e in decl.entities.keys() {
        if !decl.initial_states.contains_key(e) {
            return Err(ValidationError::MissingInitialState(e.to_string()));
        }
    }

    // Zero-resource law over the initial data: goods in the zero set force
    // the patient's activation for that interaction to zero.
    for i in interactions.values() {
        if let Some(z) = &i.zero_set {
            let goods = decl.initial_states[&i.propagator]
                .goods
                .get(&i.id)
                .expect("validated goods key");
            if z.contains(goods) && decl.initial_states[&i.patient].is_active_for(&i.id) {
                return Err(ValidationError::ZeroResourceLaw {
                    interaction: i.id.to_string(),
                });
            }
        }
    }

    for e in decl.transitions.keys() {
        if !decl.entities.contains_key(e) {
            return Err(ValidationError::UnknownEntity {
                interaction: "<transition>".into(),
                entity: e.to_string(),
            });
        }
    }

    Ok(Model {
        t_start: decl.t_start,
        t_end: decl.t_end,
        types: decl.types,
        entities: decl.entities,
        interactions,
        run_data,
        delta: decl.delta,
        transitions: decl.transitions,
        initial_states: decl.initial_states,
        propagates,
        eps,
    })
}

/// Checks one state vector against the model's spaces, activation bounds,
/// and the exact-goods-keys invariant.
pub(crate) fn validate_state(
    entity: &EntityId,
    state: &StateVector,
    space: &SpaceDescriptor,
    interactions: &BTreeMap<InteractionId, Interaction>,
    propagated: &BTreeSet<InteractionId>,
) -> Result<(), ValidationError> {
    for (i, &a) in &state.activation {
        if !interactions.contains_key(i) {
            return Err(ValidationError::UnknownInteraction(i.to_string()));
        }
        if !(0.0..=1.0).contains(&a) || a.is_nan() {
            return Err(ValidationError::ActivationOutOfRange {
                entity: entity.to_string(),
                interaction: i.to_string(),
                value: a,
            });
        }
    }
    let goods_keys: BTreeSet<InteractionId> = state.goods.keys().cloned().collect();
    if &goods_keys != propagated {
        let missing: Vec<_> = propagated.difference(&goods_keys).map(|i| i.to_string()).collect();
        let extra: Vec<_> = goods_keys.difference(propagated).map(|i| i.to_string()).collect();
        return Err(ValidationError::BadGoods {
            entity: entity.to_string(),
            detail: format!(
                "goods keys must be exactly the propagated interactions (missing: [{}], extra: [{}])",
                missing.join(", "),
                extra.join(", ")
            ),
        });
    }
    for (i, g) in &state.goods {
        let space = &interactions[i].resource_space;
        if !space.admits(g) {
            return Err(ValidationError::BadGoods {
                entity: entity.to_string(),
                detail: format!("goods value {g} is not in the resource space of `{i}`"),
            });
        }
    }
    if !space.admits(&state.proper) {
        return Err(ValidationError::BadProperState {
            entity: entity.to_string(),
        });
    }
    Ok(())
}

/// Agents, propagator, type, and patient of a declared interaction.
pub fn roles_of<'m>(
    model: &'m Model,
    id: &InteractionId,
) -> Result<(&'m [EntityId], &'m EntityId, &'m str, &'m EntityId), ValidationError> {
    let i = model.interaction(id)?;
    Ok((&i.agents, &i.propagator, &i.itype, &i.patient))
}

/// Composes simultaneous interactions into one vector interaction.
///
/// All parts must share identical start, ongoing, and arrival specs
/// (checked structurally). Agent lists are concatenated, the type and
/// propagator become tuples, and the patient collapses to a single entity
/// when all parts share one. The resource space is the product (a record
/// keyed by part id) and the activation of the result at any state is the
/// product of the part activations (see [`Interaction::activation_in`]).
///
/// The returned interaction describes a derived composite; when the parts
/// disagree on patient or propagator, the tuple ids it names are not
/// entities of `model`.
pub fn make_vector_interaction(
    model: &Model,
    parts: &[InteractionId],
) -> Result<Interaction, ValidationError> {
    if parts.is_empty() {
        return Err(ValidationError::EmptyParts);
    }
    let first = model.interaction(&parts[0])?;
    let first_rd = model.run_data_of(&parts[0]);
    for pid in &parts[1..] {
        let rd = model.run_data_of(pid);
        model.interaction(pid)?;
        let mismatch = if rd.start != first_rd.start {
            Some("start")
        } else if rd.ongoing != first_rd.ongoing {
            Some("ongoing")
        } else if rd.arrival_delay != first_rd.arrival_delay {
            Some("arrival")
        } else {
            None
        };
        if let Some(what) = mismatch {
            return Err(ValidationError::NotSimultaneous {
                a: parts[0].to_string(),
                b: pid.to_string(),
                what: what.to_string(),
            });
        }
    }

    let members: Vec<&Interaction> = parts
        .iter()
        .map(|p| model.interaction(p))
        .collect::<Result<_, _>>()?;

    let tuple = |items: Vec<String>| -> String {
        if items.len() == 1 {
            items.into_iter().next().unwrap()
        } else {
            format!("({})", items.join(","))
        }
    };

    let agents: Vec<EntityId> = members.iter().flat_map(|i| i.agents.iter().cloned()).collect();
    let patients: Vec<String> = members.iter().map(|i| i.patient.to_string()).collect();
    let patient = if members.iter().all(|i| i.patient == first.patient) {
        first.patient.clone()
    } else {
        EntityId::new(tuple(patients))
    };
    let propagators: Vec<String> = members.iter().map(|i| i.propagator.to_string()).collect();
    let propagator = if members.iter().all(|i| i.propagator == first.propagator) {
        first.propagator.clone()
    } else {
        EntityId::new(tuple(propagators))
    };
    let itype = tuple(members.iter().map(|i| i.itype.clone()).collect());
    let resource_space = if members.len() == 1 {
        first.resource_space.clone()
    } else {
        SpaceDescriptor::Record(
            members
                .iter()
                .map(|i| (i.id.to_string(), i.resource_space.clone()))
                .collect(),
        )
    };

    Ok(Interaction {
        id: InteractionId::new(format!(
            "({})",
            parts.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
        )),
        agents,
        propagator,
        itype,
        patient,
        resource_space,
        zero_set: None,
        parts: parts.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{ClockSpec, DistributionSpec, RunData};

    fn scalar_state(x: f64) -> StateVector {
        StateVector::new(Value::scalar(x))
    }

    /// Single-entity self-interaction model over [0, 1], the smallest
    /// nontrivial declaration.
    pub(crate) fn single_entity_decl() -> ModelDecl {
        let p = EntityId::from("p");
        let i = InteractionId::from("i");
        ModelDecl {
            t_start: 0.0,
            t_end: 1.0,
            types: BTreeSet::from(["ds".to_string()]),
            entities: BTreeMap::from([(p.clone(), SpaceDescriptor::scalar())]),
            interactions: vec![Interaction {
                id: i.clone(),
                agents: vec![p.clone()],
                propagator: p.clone(),
                itype: "ds".into(),
                patient: p.clone(),
                resource_space: SpaceDescriptor::trivial(),
                zero_set: None,
                parts: vec![],
            }],
            run_data: BTreeMap::from([(
                i.clone(),
                RunData::new(
                    ClockSpec::deterministic_points(&[0.0]),
                    ClockSpec::deterministic_intervals(&[(0.0, 1.0)]),
                ),
            )]),
            delta: 1.0,
            transitions: BTreeMap::new(),
            initial_states: BTreeMap::from([(
                p.clone(),
                scalar_state(1.0).with_activation("i", 1.0).with_goods("i", Value::unit()),
            )]),
        }
    }

    #[test]
    fn minimal_self_interaction_model_builds() {
        let model = build_model(single_entity_decl()).unwrap();
        assert_eq!(model.interactions().len(), 1);
        assert_eq!(model.t_start(), 0.0);
        assert_eq!(model.t_end(), 1.0);
    }

    #[test]
    fn empty_interaction_set_is_valid() {
        let mut decl = single_entity_decl();
        decl.interactions.clear();
        decl.run_data.clear();
        decl.initial_states.insert(
            EntityId::from("p"),
            scalar_state(1.0), // no activation or goods entries needed
        );
        let model = build_model(decl).unwrap();
        assert!(model.interactions().is_empty());
    }

    #[test]
    fn undeclared_patient_is_rejected() {
        let mut decl = single_entity_decl();
        decl.interactions[0].patient = EntityId::from("q");
        let err = build_model(decl).unwrap_err();
        assert_eq!(err.code(), "unknown-entity");
    }

    #[test]
    fn reversed_time_interval_is_rejected() {
        let mut decl = single_entity_decl();
        decl.t_end = -1.0;
        assert_eq!(build_model(decl).unwrap_err().code(), "bad-time-interval");
    }

    #[test]
    fn activation_outside_unit_interval_is_rejected() {
        let mut decl = single_entity_decl();
        decl.initial_states.get_mut(&EntityId::from("p")).unwrap().activation.insert("i".into(), 1.5);
        assert_eq!(build_model(decl).unwrap_err().code(), "activation-out-of-range");
    }

    #[test]
    fn missing_initial_state_is_rejected() {
        let mut decl = single_entity_decl();
        decl.entities.insert(EntityId::from("q"), SpaceDescriptor::scalar());
        assert_eq!(build_model(decl).unwrap_err().code(), "missing-initial-state");
    }

    #[test]
    fn goods_keys_must_match_propagated_interactions() {
        let mut decl = single_entity_decl();
        decl.initial_states.get_mut(&EntityId::from("p")).unwrap().goods.clear();
        assert_eq!(build_model(decl).unwrap_err().code(), "bad-goods");
    }

    #[test]
    fn zero_resource_law_enforced_on_initial_states() {
        let mut decl = single_entity_decl();
        decl.interactions[0].resource_space = SpaceDescriptor::scalar();
        decl.interactions[0].zero_set = Some(ZeroSet::ScalarZero { tol: 1e-12 });
        let st = decl.initial_states.get_mut(&EntityId::from("p")).unwrap();
        st.goods.insert("i".into(), Value::scalar(0.0));
        // patient still active for `i` while goods are zero: invalid
        assert_eq!(build_model(decl).unwrap_err().code(), "zero-resource-law");
    }

    fn two_part_decl() -> ModelDecl {
        let mut decl = single_entity_decl();
        decl.entities.insert(EntityId::from("q"), SpaceDescriptor::scalar());
        decl.entities.insert(EntityId::from("a"), SpaceDescriptor::scalar());
        decl.types.insert("b".to_string());
        decl.interactions.push(Interaction {
            id: "j".into(),
            agents: vec!["a".into()],
            propagator: "q".into(),
            itype: "b".into(),
            patient: "q".into(),
            resource_space: SpaceDescriptor::scalar(),
            zero_set: None,
            parts: vec![],
        });
        decl.run_data.insert(
            "j".into(),
            RunData::new(
                ClockSpec::deterministic_points(&[0.0]),
                ClockSpec::deterministic_intervals(&[(0.0, 1.0)]),
            ),
        );
        decl.initial_states.insert(
            "q".into(),
            scalar_state(0.0).with_activation("j", 1.0).with_goods("j", Value::scalar(2.0)),
        );
        decl.initial_states.insert("a".into(), scalar_state(0.0).with_activation("j", 0.5));
        decl
    }

    #[test]
    fn roles_follow_the_tuple_reading() {
        // i = (a, b, b, alpha, b): agents (a, b), propagator b, patient b.
        let mut decl = single_entity_decl();
        decl.entities.insert(EntityId::from("a"), SpaceDescriptor::scalar());
        decl.interactions[0].agents = vec!["a".into(), "p".into()];
        decl.initial_states.insert("a".into(), scalar_state(0.0));
        let model = build_model(decl).unwrap();
        let (agents, pr, ty, pa) = roles_of(&model, &"i".into()).unwrap();
        assert_eq!(agents, &[EntityId::from("a"), EntityId::from("p")]);
        assert_eq!(pr, &EntityId::from("p"));
        assert_eq!(ty, "ds");
        assert_eq!(pa, &EntityId::from("p"));
        assert_eq!(agents.len(), 2);
    }

    #[test]
    fn agentless_interaction_has_empty_roles() {
        let mut decl = single_entity_decl();
        decl.interactions[0].agents.clear();
        let model = build_model(decl).unwrap();
        let (agents, pr, _, pa) = roles_of(&model, &"i".into()).unwrap();
        assert!(agents.is_empty());
        assert_eq!(pr, &EntityId::from("p"));
        assert_eq!(pa, &EntityId::from("p"));
    }

    #[test]
    fn unknown_interaction_role_lookup_fails() {
        let model = build_model(single_entity_decl()).unwrap();
        assert_eq!(
            roles_of(&model, &"nope".into()).unwrap_err().code(),
            "unknown-interaction"
        );
    }

    #[test]
    fn vector_interaction_with_distinct_patients() {
        let model = build_model(two_part_decl()).unwrap();
        let v = make_vector_interaction(&model, &["i".into(), "j".into()]).unwrap();
        assert_eq!(v.patient, EntityId::from("(p,q)"));
        assert_eq!(v.propagator, EntityId::from("(p,q)"));
        assert_eq!(v.itype, "(ds,b)");
        assert_eq!(v.agents, vec![EntityId::from("p"), EntityId::from("a")]);
        match &v.resource_space {
            SpaceDescriptor::Record(fields) => assert_eq!(fields.len(), 2),
            other => panic!("expected product space, got {other:?}"),
        }
    }

    #[test]
    fn vector_interaction_collapses_shared_patient() {
        let mut decl = two_part_decl();
        // make j act on p as well
        decl.interactions[1].patient = "p".into();
        let model = build_model(decl).unwrap();
        let v = make_vector_interaction(&model, &["i".into(), "j".into()]).unwrap();
        assert_eq!(v.patient, EntityId::from("p"));
    }

    #[test]
    fn unary_vector_interaction_wraps_the_part() {
        let model = build_model(single_entity_decl()).unwrap();
        let v = make_vector_interaction(&model, &["i".into()]).unwrap();
        let i = model.interaction(&"i".into()).unwrap();
        assert_eq!(v.agents, i.agents);
        assert_eq!(v.patient, i.patient);
        assert_eq!(v.propagator, i.propagator);
        assert_eq!(v.itype, i.itype);
        assert_eq!(v.resource_space, i.resource_space);
        assert_eq!(v.parts, vec![InteractionId::from("i")]);
    }

    #[test]
    fn non_simultaneous_parts_are_rejected() {
        let mut decl = two_part_decl();
        decl.run_data.insert(
            "j".into(),
            RunData::new(
                ClockSpec::deterministic_points(&[0.5]),
                ClockSpec::deterministic_intervals(&[(0.5, 1.0)]),
            ),
        );
        let model = build_model(decl).unwrap();
        let err = make_vector_interaction(&model, &["i".into(), "j".into()]).unwrap_err();
        assert_eq!(err.code(), "not-simultaneous");
    }

    #[test]
    fn empty_parts_are_rejected() {
        let model = build_model(single_entity_decl()).unwrap();
        assert_eq!(
            make_vector_interaction(&model, &[]).unwrap_err().code(),
            "empty-parts"
        );
    }

    #[test]
    fn composed_activation_is_the_product() {
        let model = build_model(two_part_decl()).unwrap();
        let v = make_vector_interaction(&model, &["i".into(), "j".into()]).unwrap();
        let state = StateVector::new(Value::scalar(0.0))
            .with_activation("i", 0.5)
            .with_activation("j", 0.25);
        assert_eq!(v.activation_in(&state), 0.5 * 0.25);
    }

    #[test]
    fn stochastic_clock_params_are_validated() {
        let mut decl = single_entity_decl();
        decl.run_data.insert(
            "i".into(),
            RunData::new(
                ClockSpec::exponential(-1.0),
                ClockSpec::deterministic_intervals(&[(0.0, 1.0)]),
            ),
        );
        assert_eq!(build_model(decl).unwrap_err().code(), "bad-distribution");
    }

    #[test]
    fn start_inside_ongoing_interval_is_rejected() {
        let mut decl = single_entity_decl();
        decl.run_data.insert(
            "i".into(),
            RunData::new(
                ClockSpec::deterministic_points(&[0.5]),
                ClockSpec::deterministic_intervals(&[(0.0, 1.0)]),
            ),
        );
        assert_eq!(build_model(decl).unwrap_err().code(), "start-arrival-order");
    }

    #[test]
    fn arrival_delay_spec_mismatch_is_not_simultaneous() {
        let mut decl = two_part_decl();
        let rd = decl.run_data.get_mut(&InteractionId::from("j")).unwrap();
        rd.arrival_delay = DistributionSpec::Dirac { at: 0.25 };
        let model = build_model(decl).unwrap();
        let err = make_vector_interaction(&model, &["i".into(), "j".into()]).unwrap_err();
        assert!(matches!(err, ValidationError::NotSimultaneous { ref what, .. } if what == "arrival"));
    }
}
