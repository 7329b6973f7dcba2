//! Symbolic plan execution.
//!
//! A small typed environment stands in for a full simulator: objects with
//! boolean capability flags and state, an agent with a location and at
//! most one held object, and goal predicates over final states. Actions
//! apply in order; the first action whose preconditions fail halts
//! execution (prefix semantics).
//!
//! Verb arity and preconditions:
//!
//! | verb        | args          | preconditions                                         | effects                         |
//! |-------------|---------------|-------------------------------------------------------|---------------------------------|
//! | GOTO        | place         | arg is a known object id or location name             | agent (and held object) move    |
//! | PICKUP      | obj           | obj holdable, agent at obj, hand empty                | obj held, tracks agent          |
//! | PLACE       | obj, target   | holding obj, agent at target, target is a surface or an open container | obj rests on target, hand empty |
//! | OPEN        | obj           | obj openable, agent at obj, not open                  | open                            |
//! | CLOSE       | obj           | obj openable, agent at obj, open                      | closed                          |
//! | TOGGLE_ON   | obj           | obj toggleable, agent at obj, off                     | on                              |
//! | TOGGLE_OFF  | obj           | obj toggleable, agent at obj, on                      | off                             |
//! | SLICE       | obj           | obj sliceable, agent at obj, not sliced               | sliced                          |
//! | CLEAN       | obj           | obj cleanable, agent at obj                           | clean                           |
//! | HEAT        | obj           | obj heatable, agent at obj                            | hot                             |
//!
//! Identifiers are compared after lowercasing. Unknown identifiers in an
//! action make that action fail (halting execution), never crash.

mod metrics;

pub use metrics::{
    correctness, executability, lcs_score, lcs_score_multi, CorpusReport, MetricReport,
};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("unknown verb {0}")]
    UnknownVerb(String),
    #[error("verb {verb} takes {expected} argument(s), got {got}")]
    BadArity {
        verb: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("unknown predicate {0}")]
    UnknownPredicate(String),
    #[error("malformed plan file: {0}")]
    Malformed(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Action verbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verb {
    Goto,
    Pickup,
    Place,
    Open,
    Close,
    ToggleOn,
    ToggleOff,
    Slice,
    Clean,
    Heat,
}

impl Verb {
    pub fn arity(self) -> usize {
        match self {
            Verb::Place => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verb::Goto => "GOTO",
            Verb::Pickup => "PICKUP",
            Verb::Place => "PLACE",
            Verb::Open => "OPEN",
            Verb::Close => "CLOSE",
            Verb::ToggleOn => "TOGGLE_ON",
            Verb::ToggleOff => "TOGGLE_OFF",
            Verb::Slice => "SLICE",
            Verb::Clean => "CLEAN",
            Verb::Heat => "HEAT",
        }
    }
}

/// One action: a verb and its identifier arguments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub verb: Verb,
    pub args: Vec<String>,
}

impl Action {
    pub fn new(verb: Verb, args: &[&str]) -> Self {
        Self {
            verb,
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.args.len() != self.verb.arity() {
            return Err(PlanError::BadArity {
                verb: self.verb.name(),
                expected: self.verb.arity(),
                got: self.args.len(),
            });
        }
        Ok(())
    }

    /// Equality key: verb plus lowercased arguments.
    pub(crate) fn matches(&self, other: &Action) -> bool {
        self.verb == other.verb
            && self.args.len() == other.args.len()
            && self
                .args
                .iter()
                .zip(&other.args)
                .all(|(a, b)| a.to_lowercase() == b.to_lowercase())
    }
}

/// Mutable state of one object.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectState {
    pub location: String,
    pub holdable: bool,
    pub openable: bool,
    pub open: bool,
    pub toggleable: bool,
    pub on: bool,
    pub surface: bool,
    pub sliceable: bool,
    pub sliced: bool,
    pub cleanable: bool,
    pub clean: bool,
    pub heatable: bool,
    pub hot: bool,
    pub held: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub supported_by: Option<String>,
}

/// The agent: a location and at most one held object.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub location: String,
    #[serde(default)]
    pub holding: Option<String>,
}

/// A goal predicate over the final state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub pred: String,
    pub args: Vec<String>,
}

/// The symbolic environment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SymbolicEnv {
    pub objects: BTreeMap<String, ObjectState>,
    pub agent: AgentState,
    #[serde(default)]
    pub goal: Vec<Predicate>,
}

impl SymbolicEnv {
    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        let env: SymbolicEnv =
            serde_json::from_str(text).map_err(|e| PlanError::Malformed(e.to_string()))?;
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let held: Vec<&String> = self
            .objects
            .iter()
            .filter(|(_, s)| s.held)
            .map(|(id, _)| id)
            .collect();
        if held.len() > 1 {
            return Err(PlanError::Malformed(format!(
                "more than one held object: {held:?}"
            )));
        }
        match (&self.agent.holding, held.first()) {
            (Some(h), Some(f)) if &h.to_lowercase() == &f.to_lowercase() => {}
            (None, None) => {}
            (Some(h), None) => {
                return Err(PlanError::Malformed(format!(
                    "agent holds {h} but no object is marked held"
                )))
            }
            (holding, marked) => {
                return Err(PlanError::Malformed(format!(
                    "holding {holding:?} does not match held flag on {marked:?}"
                )))
            }
        }
        for predicate in &self.goal {
            if !KNOWN_PREDICATES.contains(&predicate.pred.as_str()) {
                return Err(PlanError::UnknownPredicate(predicate.pred.clone()));
            }
        }
        Ok(())
    }

    fn find_object(&self, id: &str) -> Option<(&String, &ObjectState)> {
        let wanted = id.to_lowercase();
        self.objects
            .iter()
            .find(|(key, _)| key.to_lowercase() == wanted)
    }

    fn object_key(&self, id: &str) -> Option<String> {
        self.find_object(id).map(|(key, _)| key.clone())
    }

    /// All known location names: object locations plus the agent's.
    fn is_known_location(&self, name: &str) -> bool {
        let wanted = name.to_lowercase();
        self.agent.location.to_lowercase() == wanted
            || self
                .objects
                .values()
                .any(|s| s.location.to_lowercase() == wanted)
    }
}

const KNOWN_PREDICATES: &[&str] = &[
    "at",
    "on",
    "holding",
    "open",
    "closed",
    "toggled_on",
    "toggled_off",
    "sliced",
    "clean",
    "hot",
];

/// Apply one action if its preconditions hold. Returns whether it ran.
fn apply(env: &mut SymbolicEnv, action: &Action) -> bool {
    if action.validate().is_err() {
        return false;
    }
    match action.verb {
        Verb::Goto => {
            let target = &action.args[0];
            let destination = if let Some((_, state)) = env.find_object(target) {
                state.location.clone()
            } else if env.is_known_location(target) {
                target.to_lowercase()
            } else {
                return false;
            };
            env.agent.location = destination.clone();
            if let Some(held) = env.agent.holding.clone() {
                if let Some(state) = env.objects.get_mut(&held) {
                    state.location = destination;
                }
            }
            true
        }
        Verb::Pickup => {
            let Some(key) = env.object_key(&action.args[0]) else {
                return false;
            };
            if env.agent.holding.is_some() {
                return false;
            }
            let agent_location = env.agent.location.to_lowercase();
            let state = env.objects.get_mut(&key).expect("key exists");
            if !state.holdable || state.location.to_lowercase() != agent_location {
                return false;
            }
            state.held = true;
            state.supported_by = None;
            env.agent.holding = Some(key);
            true
        }
        Verb::Place => {
            let Some(held) = env.agent.holding.clone() else {
                return false;
            };
            if !held.eq_ignore_ascii_case(&action.args[0]) {
                return false;
            }
            let Some(target_key) = env.object_key(&action.args[1]) else {
                return false;
            };
            if target_key.eq_ignore_ascii_case(&held) {
                return false;
            }
            let target = env.objects.get(&target_key).expect("key exists").clone();
            if target.location.to_lowercase() != env.agent.location.to_lowercase() {
                return false;
            }
            if !(target.surface || (target.openable && target.open)) {
                return false;
            }
            let state = env.objects.get_mut(&held).expect("held object exists");
            state.held = false;
            state.location = target.location;
            state.supported_by = Some(target_key);
            env.agent.holding = None;
            true
        }
        Verb::Open | Verb::Close => {
            let want_open = action.verb == Verb::Open;
            let Some(key) = env.object_key(&action.args[0]) else {
                return false;
            };
            let agent_location = env.agent.location.to_lowercase();
            let state = env.objects.get_mut(&key).expect("key exists");
            if !state.openable
                || state.location.to_lowercase() != agent_location
                || state.open == want_open
            {
                return false;
            }
            state.open = want_open;
            true
        }
        Verb::ToggleOn | Verb::ToggleOff => {
            let want_on = action.verb == Verb::ToggleOn;
            let Some(key) = env.object_key(&action.args[0]) else {
                return false;
            };
            let agent_location = env.agent.location.to_lowercase();
            let state = env.objects.get_mut(&key).expect("key exists");
            if !state.toggleable
                || state.location.to_lowercase() != agent_location
                || state.on == want_on
            {
                return false;
            }
            state.on = want_on;
            true
        }
        Verb::Slice => {
            let Some(key) = env.object_key(&action.args[0]) else {
                return false;
            };
            let agent_location = env.agent.location.to_lowercase();
            let state = env.objects.get_mut(&key).expect("key exists");
            if !state.sliceable || state.location.to_lowercase() != agent_location || state.sliced
            {
                return false;
            }
            state.sliced = true;
            true
        }
        Verb::Clean => {
            let Some(key) = env.object_key(&action.args[0]) else {
                return false;
            };
            let agent_location = env.agent.location.to_lowercase();
            let state = env.objects.get_mut(&key).expect("key exists");
            if !state.cleanable || state.location.to_lowercase() != agent_location {
                return false;
            }
            state.clean = true;
            true
        }
        Verb::Heat => {
            let Some(key) = env.object_key(&action.args[0]) else {
                return false;
            };
            let agent_location = env.agent.location.to_lowercase();
            let state = env.objects.get_mut(&key).expect("key exists");
            if !state.heatable || state.location.to_lowercase() != agent_location {
                return false;
            }
            state.hot = true;
            true
        }
    }
}

/// Run a plan against a copy of the environment. Returns the final state
/// and the length of the executed prefix; the first failing action halts.
pub fn execute(env: &SymbolicEnv, plan: &[Action]) -> (SymbolicEnv, usize) {
    let mut state = env.clone();
    for (idx, action) in plan.iter().enumerate() {
        if !apply(&mut state, action) {
            return (state, idx);
        }
    }
    (state, plan.len())
}

/// Does one predicate hold in this state? Unknown objects make it false.
pub fn predicate_holds(env: &SymbolicEnv, predicate: &Predicate) -> bool {
    let arg = |idx: usize| predicate.args.get(idx).map(|s| s.as_str()).unwrap_or("");
    match predicate.pred.as_str() {
        "at" => env
            .find_object(arg(0))
            .is_some_and(|(_, s)| s.location.to_lowercase() == arg(1).to_lowercase()),
        "on" => env.find_object(arg(0)).is_some_and(|(_, s)| {
            s.supported_by
                .as_deref()
                .is_some_and(|sup| sup.to_lowercase() == arg(1).to_lowercase())
        }),
        "holding" => env
            .agent
            .holding
            .as_deref()
            .is_some_and(|h| h.to_lowercase() == arg(0).to_lowercase()),
        "open" => env.find_object(arg(0)).is_some_and(|(_, s)| s.open),
        "closed" => env
            .find_object(arg(0))
            .is_some_and(|(_, s)| s.openable && !s.open),
        "toggled_on" => env.find_object(arg(0)).is_some_and(|(_, s)| s.on),
        "toggled_off" => env
            .find_object(arg(0))
            .is_some_and(|(_, s)| s.toggleable && !s.on),
        "sliced" => env.find_object(arg(0)).is_some_and(|(_, s)| s.sliced),
        "clean" => env.find_object(arg(0)).is_some_and(|(_, s)| s.clean),
        "hot" => env.find_object(arg(0)).is_some_and(|(_, s)| s.hot),
        _ => false,
    }
}

/// Parse a plan file: JSON `{"plan": [{"verb": ..., "args": [...]}]}`.
pub fn parse_plan(text: &str) -> Result<Vec<Action>, PlanError> {
    #[derive(Deserialize)]
    struct PlanFile {
        plan: Vec<Action>,
    }
    let file: PlanFile =
        serde_json::from_str(text).map_err(|e| PlanError::Malformed(e.to_string()))?;
    for action in &file.plan {
        action.validate()?;
    }
    Ok(file.plan)
}

/// Parse a gold file: JSON `{"golds": [[{"verb": ..., "args": [...]}]]}`,
/// one or more reference plans.
pub fn parse_golds(text: &str) -> Result<Vec<Vec<Action>>, PlanError> {
    #[derive(Deserialize)]
    struct GoldFile {
        golds: Vec<Vec<Action>>,
    }
    let file: GoldFile =
        serde_json::from_str(text).map_err(|e| PlanError::Malformed(e.to_string()))?;
    for plan in &file.golds {
        for action in plan {
            action.validate()?;
        }
    }
    Ok(file.golds)
}
