use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use super::constraint::{apply_all, Constraint};
use super::dialogue::{DialogueItem, DialogueTurn, MissionTime};
use super::response::{format_response, Candidate, GrounderResponse, ResponseStatus};
use super::{GroundingContext, GroundingError};
use crate::id::ObjectId;

/// Anything that maps one dialogue turn to candidate objects. Implementations
/// keep their own conversation state across calls.
pub trait Grounder {
    type Error: fmt::Display;

    fn ground(&mut self, turn: &DialogueTurn) -> Result<GrounderResponse, Self::Error>;
}

impl<G: Grounder + ?Sized> Grounder for &mut G {
    type Error = G::Error;

    fn ground(&mut self, turn: &DialogueTurn) -> Result<GrounderResponse, Self::Error> {
        (**self).ground(turn)
    }
}

/// Mission fields read from the first turn.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionDraft {
    pub time: MissionTime,
    pub position_constraints: Vec<Constraint>,
    pub object_type: Option<String>,
    pub action: String,
    pub ambiguous: bool,
    pub candidates: BTreeSet<ObjectId>,
}

/// Reads time, target type, position constraints and action from the first
/// turn and reports whether its constraints match more than one object.
pub fn parse_first_dialogue(turn: &DialogueTurn, ctx: &GroundingContext<'_>) -> Result<MissionDraft, GroundingError> {
    let action = turn.action.clone().filter(|a| !a.trim().is_empty()).ok_or(GroundingError::NoAction)?;
    let object_type = turn.constraints.iter().find_map(|c| match c {
        Constraint::TypeIs { object_type } => Some(object_type.clone()),
        _ => None,
    });
    let candidates = apply_all(&ctx.all_ids(), &turn.constraints, ctx)?;
    if candidates.is_empty() {
        return Err(GroundingError::NotFound { object_type });
    }
    Ok(MissionDraft {
        time: turn.time.unwrap_or_default(),
        position_constraints: turn
            .constraints
            .iter()
            .filter(|c| !matches!(c, Constraint::TypeIs { .. }))
            .cloned()
            .collect(),
        object_type,
        action,
        ambiguous: candidates.len() >= 2,
        candidates,
    })
}

fn label_for(candidates: &BTreeSet<ObjectId>, ctx: &GroundingContext<'_>) -> String {
    let labels: BTreeSet<&str> = candidates.iter().filter_map(|id| ctx.entry(id)).map(|e| e.label.as_str()).collect();
    match labels.len() {
        1 => labels.into_iter().next().unwrap_or("object").to_string(),
        _ => "object".to_string(),
    }
}

/// Applies a turn's constraints to `state`. Each surviving candidate is
/// reported with the image holding its largest mask.
pub fn ground_step_scripted(
    state: &BTreeSet<ObjectId>,
    turn: &DialogueTurn,
    ctx: &GroundingContext<'_>,
) -> Result<GrounderResponse, GroundingError> {
    if state.is_empty() {
        return Err(GroundingError::EmptyState);
    }
    let survivors = apply_all(state, &turn.constraints, ctx)?;
    let candidates: Vec<Candidate> = survivors
        .iter()
        .map(|id| {
            let image = ctx.entry(id).map_or(1, |e| e.largest_detection().snapshot_index);
            Candidate { id: id.clone(), image }
        })
        .collect();
    let text = format_response(&label_for(&survivors, ctx), &candidates);
    Ok(GrounderResponse::from_candidates(candidates, Some(text)))
}

/// Deterministic grounder evaluating the structured constraints exactly.
///
/// Its state is the current candidate set, starting from every observed
/// object; a turn that eliminates everything leaves the state untouched.
#[derive(Debug, Clone)]
pub struct ScriptedGrounder<'a> {
    ctx: GroundingContext<'a>,
    state: BTreeSet<ObjectId>,
}

impl<'a> ScriptedGrounder<'a> {
    pub fn new(ctx: GroundingContext<'a>) -> Self {
        let state = ctx.all_ids();
        Self { ctx, state }
    }

    pub fn state(&self) -> &BTreeSet<ObjectId> {
        &self.state
    }

    pub fn context(&self) -> &GroundingContext<'a> {
        &self.ctx
    }

    fn remove(&mut self, id: &ObjectId) {
        self.state.remove(id);
    }
}

impl Grounder for ScriptedGrounder<'_> {
    type Error = GroundingError;

    fn ground(&mut self, turn: &DialogueTurn) -> Result<GrounderResponse, GroundingError> {
        let resp = ground_step_scripted(&self.state, turn, &self.ctx)?;
        if resp.status() != ResponseStatus::NotFound {
            self.state = resp.ids();
        }
        Ok(resp)
    }
}

/// Scripted grounder that forgets one randomly chosen candidate whenever a
/// step is ambiguous. Used to check that metrics react to mistakes.
#[derive(Debug, Clone)]
pub struct PerturbedGrounder<'a, R> {
    inner: ScriptedGrounder<'a>,
    rng: R,
}

impl<'a, R: Rng> PerturbedGrounder<'a, R> {
    pub fn new(ctx: GroundingContext<'a>, rng: R) -> Self {
        Self { inner: ScriptedGrounder::new(ctx), rng }
    }
}

impl<R: Rng> Grounder for PerturbedGrounder<'_, R> {
    type Error = GroundingError;

    fn ground(&mut self, turn: &DialogueTurn) -> Result<GrounderResponse, GroundingError> {
        let resp = self.inner.ground(turn)?;
        if resp.status() != ResponseStatus::Ambiguous {
            return Ok(resp);
        }
        let mut cands = resp.candidates().to_vec();
        let dropped = cands.remove(self.rng.random_range(0..cands.len()));
        self.inner.remove(&dropped.id);
        let label = label_for(&resp.ids(), self.inner.context());
        let text = format_response(&label, &cands);
        Ok(GrounderResponse::from_candidates(cands, Some(text)))
    }
}

/// Record of one dialogue run.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundingTrace {
    pub item_id: String,
    /// Turns available to the run, `min(turns, k_max)`.
    pub k: usize,
    /// Turns consumed; `k + 1` when unresolved.
    pub alpha: usize,
    /// Candidate ids of each response, `min(alpha, k)` entries.
    pub per_step_predictions: Vec<BTreeSet<ObjectId>>,
    pub resolved_id: Option<ObjectId>,
    pub responses: Vec<GrounderResponse>,
}

impl GroundingTrace {
    pub fn succeeded(&self) -> bool {
        self.alpha <= self.k
    }

    /// Each prediction set is a subset of the previous one.
    pub fn is_monotone(&self) -> bool {
        self.per_step_predictions.windows(2).all(|w| w[1].is_subset(&w[0]))
    }
}

/// A run stopped by a grounder error. `trace` holds the steps completed
/// before the error, marked as a failure.
#[derive(Debug, Clone, PartialEq)]
pub struct DialogueAborted<E> {
    pub trace: GroundingTrace,
    pub error: E,
}

impl<E: fmt::Display> fmt::Display for DialogueAborted<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "dialogue `{}` aborted after {} step(s): {}",
            self.trace.item_id,
            self.trace.per_step_predictions.len(),
            self.error
        )
    }
}

/// Feeds turns to the grounder until one resolves or `min(turns, k_max)`
/// turns are used up.
pub fn run_dialogue<G: Grounder>(
    item: &DialogueItem,
    grounder: &mut G,
    k_max: usize,
) -> Result<GroundingTrace, DialogueAborted<G::Error>> {
    let k = item.turns.len().min(k_max);
    let mut trace = GroundingTrace {
        item_id: item.id.clone(),
        k,
        alpha: k + 1,
        per_step_predictions: Vec::with_capacity(k),
        resolved_id: None,
        responses: Vec::with_capacity(k),
    };
    for (i, turn) in item.turns.iter().take(k).enumerate() {
        let resp = match grounder.ground(turn) {
            Ok(r) => r,
            Err(error) => return Err(DialogueAborted { trace, error }),
        };
        trace.per_step_predictions.push(resp.ids());
        let resolved = resp.resolved_id().cloned();
        trace.responses.push(resp);
        if let Some(id) = resolved {
            trace.alpha = i + 1;
            trace.resolved_id = Some(id);
            break;
        }
    }
    Ok(trace)
}
