use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::constraint::{apply_all, Constraint};
use super::{GroundingContext, GroundingError};
use crate::id::ObjectId;

/// When a mission should run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MissionTime {
    #[default]
    Immediate,
    /// Absolute time in seconds.
    At(f64),
}

impl fmt::Display for MissionTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MissionTime::Immediate => f.write_str("immediate"),
            MissionTime::At(t) => write!(f, "{t}"),
        }
    }
}

impl core::str::FromStr for MissionTime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("immediate") || s.eq_ignore_ascii_case("now") {
            return Ok(MissionTime::Immediate);
        }
        match s.parse::<f64>() {
            Ok(t) if t.is_finite() && t >= 0.0 => Ok(MissionTime::At(t)),
            _ => Err(alloc::format!("mission time must be `immediate` or non-negative seconds, got `{s}`")),
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for MissionTime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MissionTime::Immediate => s.serialize_str("immediate"),
            MissionTime::At(t) => s.serialize_f64(*t),
        }
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for MissionTime {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = MissionTime;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("\"immediate\" or a non-negative number of seconds")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<MissionTime, E> {
                v.parse().map_err(E::custom)
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<MissionTime, E> {
                if v.is_finite() && v >= 0.0 {
                    Ok(MissionTime::At(v))
                } else {
                    Err(E::custom("mission time must be non-negative"))
                }
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<MissionTime, E> {
                Ok(MissionTime::At(v as f64))
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<MissionTime, E> {
                self.visit_f64(v as f64)
            }
        }
        d.deserialize_any(Visitor)
    }
}

/// One user utterance with its structured meaning.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DialogueTurn {
    pub text: String,
    pub constraints: Vec<Constraint>,
    /// Required action; only meaningful on the first turn.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub action: Option<String>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub time: Option<MissionTime>,
}

impl DialogueTurn {
    pub fn new(text: &str, constraints: Vec<Constraint>) -> Self {
        Self { text: text.to_string(), constraints, action: None, time: None }
    }

    pub fn with_action(mut self, action: &str) -> Self {
        self.action = Some(action.to_string());
        self
    }

    /// Parses a `;`-separated constraint expression such as
    /// `action go to; type chair; attr subtype=high; left_of door; at 120`.
    ///
    /// `action <words>` and `at <seconds|immediate>` set the mission fields;
    /// every other clause is a [`Constraint`]. The text of the turn is the
    /// input line.
    pub fn parse_expression(line: &str) -> Result<Self, GroundingError> {
        let mut turn = DialogueTurn { text: line.trim().to_string(), ..Default::default() };
        for clause in line.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            let (head, rest) = clause.split_once(char::is_whitespace).unwrap_or((clause, ""));
            match head.to_ascii_lowercase().as_str() {
                "action" => {
                    let rest = rest.trim();
                    if rest.is_empty() {
                        return Err(GroundingError::Expression("`action` needs a verb".into()));
                    }
                    turn.action = Some(rest.to_string());
                }
                "at" | "time" => {
                    turn.time = Some(rest.parse().map_err(GroundingError::Expression)?);
                }
                _ => turn
                    .constraints
                    .push(clause.parse().map_err(|e: super::ConstraintParseError| GroundingError::Expression(e.to_string()))?),
            }
        }
        if turn.constraints.is_empty() {
            return Err(GroundingError::Expression("no constraint in expression".into()));
        }
        Ok(turn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DialogueType {
    /// The first turn already names a unique object; later turns only clarify.
    A,
    /// Each turn shrinks an ambiguous candidate set down to one object.
    B,
}

impl fmt::Display for DialogueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DialogueType::A => "A",
            DialogueType::B => "B",
        })
    }
}

/// One scripted dialogue sequence with its ground truth.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DialogueItem {
    pub id: String,
    pub scene_ref: String,
    /// Table grouping label, e.g. `Classroom-2`; defaults to the snapshot point.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub case: Option<String>,
    pub snapshot_point_index: usize,
    pub dialogue_type: DialogueType,
    pub turns: Vec<DialogueTurn>,
    pub target_id: ObjectId,
    /// Type B only: ground-truth candidate set after each turn.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Vec::is_empty"))]
    pub step_candidates: Vec<BTreeSet<ObjectId>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ItemError {
    NoTurns,
    TurnWithoutConstraints { turn: usize },
    StepCountMismatch { turns: usize, steps: usize },
    NotNarrowing { step: usize },
    PrematureSingleton { step: usize },
    WrongTerminalSet,
    UnexpectedStepCandidates,
    OracleMismatch { step: usize, expected: BTreeSet<ObjectId>, actual: BTreeSet<ObjectId> },
    TargetRejected { step: usize },
    UnknownTarget,
    Grounding(GroundingError),
}

impl fmt::Display for ItemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt_set = |s: &BTreeSet<ObjectId>| {
            let v: Vec<&str> = s.iter().map(ObjectId::as_str).collect();
            alloc::format!("{{{}}}", v.join(", "))
        };
        match self {
            ItemError::NoTurns => write!(f, "dialogue has no turns"),
            ItemError::TurnWithoutConstraints { turn } => write!(f, "turn {turn} has no constraints"),
            ItemError::StepCountMismatch { turns, steps } => {
                write!(f, "{turns} turns but {steps} candidate sets")
            }
            ItemError::NotNarrowing { step } => write!(f, "candidate set at step {step} is not a subset of the previous one"),
            ItemError::PrematureSingleton { step } => write!(f, "candidate set at step {step} is already a single object"),
            ItemError::WrongTerminalSet => write!(f, "final candidate set is not exactly the target"),
            ItemError::UnexpectedStepCandidates => write!(f, "type-A items carry no candidate sets"),
            ItemError::OracleMismatch { step, expected, actual } => write!(
                f,
                "step {step}: recorded candidates {} differ from constraint evaluation {}",
                fmt_set(expected),
                fmt_set(actual)
            ),
            ItemError::TargetRejected { step } => write!(f, "target violates the constraints of turn {step}"),
            ItemError::UnknownTarget => write!(f, "target id is not among the observed objects"),
            ItemError::Grounding(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ItemError {}

impl From<GroundingError> for ItemError {
    fn from(e: GroundingError) -> Self {
        ItemError::Grounding(e)
    }
}

impl DialogueItem {
    pub fn case_label(&self) -> String {
        self.case.clone().unwrap_or_else(|| alloc::format!("point-{}", self.snapshot_point_index + 1))
    }

    /// Structural checks that need no scene.
    pub fn validate(&self) -> Result<(), ItemError> {
        if self.turns.is_empty() {
            return Err(ItemError::NoTurns);
        }
        if let Some(i) = self.turns.iter().position(|t| t.constraints.is_empty()) {
            return Err(ItemError::TurnWithoutConstraints { turn: i + 1 });
        }
        match self.dialogue_type {
            DialogueType::A if !self.step_candidates.is_empty() => Err(ItemError::UnexpectedStepCandidates),
            DialogueType::A => Ok(()),
            DialogueType::B => {
                let (turns, steps) = (self.turns.len(), self.step_candidates.len());
                if turns != steps {
                    return Err(ItemError::StepCountMismatch { turns, steps });
                }
                for (i, w) in self.step_candidates.windows(2).enumerate() {
                    if !w[1].is_subset(&w[0]) {
                        return Err(ItemError::NotNarrowing { step: i + 2 });
                    }
                }
                if let Some(i) = self.step_candidates[..steps - 1].iter().position(|s| s.len() < 2) {
                    return Err(ItemError::PrematureSingleton { step: i + 1 });
                }
                let last = &self.step_candidates[steps - 1];
                if last.len() != 1 || !last.contains(&self.target_id) {
                    return Err(ItemError::WrongTerminalSet);
                }
                Ok(())
            }
        }
    }

    /// Checks the item against constraint evaluation in `ctx`: type-B
    /// candidate sets must match the cumulative fold exactly, and a type-A
    /// target must survive every turn.
    pub fn check_against(&self, ctx: &GroundingContext<'_>) -> Result<(), ItemError> {
        self.validate()?;
        if ctx.entry(&self.target_id).is_none() {
            return Err(ItemError::UnknownTarget);
        }
        let mut state = ctx.all_ids();
        for (i, turn) in self.turns.iter().enumerate() {
            state = apply_all(&state, &turn.constraints, ctx)?;
            match self.dialogue_type {
                DialogueType::A if !state.contains(&self.target_id) => {
                    return Err(ItemError::TargetRejected { step: i + 1 })
                }
                DialogueType::A => {}
                DialogueType::B => {
                    if state != self.step_candidates[i] {
                        return Err(ItemError::OracleMismatch {
                            step: i + 1,
                            expected: self.step_candidates[i].clone(),
                            actual: state,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Cumulative constraint evaluation of every turn.
    pub fn oracle_steps(&self, ctx: &GroundingContext<'_>) -> Result<Vec<BTreeSet<ObjectId>>, GroundingError> {
        let mut state = ctx.all_ids();
        let mut out = Vec::with_capacity(self.turns.len());
        for turn in &self.turns {
            state = apply_all(&state, &turn.constraints, ctx)?;
            out.push(state.clone());
        }
        Ok(out)
    }
}
