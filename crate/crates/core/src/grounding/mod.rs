//! Language-to-object mapping: a multi-turn dialogue narrows a reference down
//! to one observed object id.

mod constraint;
mod dialogue;
mod grounder;
mod response;

use alloc::collections::BTreeSet;
use alloc::string::String;
use core::fmt;

pub use constraint::{apply_all, apply_constraint, Constraint, ConstraintParseError, SpatialSemantics};
pub use dialogue::{DialogueItem, DialogueTurn, DialogueType, ItemError, MissionTime};
pub use grounder::{
    ground_step_scripted, parse_first_dialogue, run_dialogue, DialogueAborted, Grounder, GroundingTrace,
    MissionDraft, PerturbedGrounder, ScriptedGrounder,
};
pub use response::{format_response, ordinal_word, parse_response, Candidate, GrounderResponse, ResponseStatus};

use crate::id::ObjectId;
use crate::sensing::ObjectEntry;
use crate::world::{Pose, Scene, SceneObject};

#[derive(Debug, Clone, PartialEq)]
pub enum GroundingError {
    UnknownLandmark { name: String },
    UnknownCandidate { id: ObjectId },
    NoAction,
    NotFound { object_type: Option<String> },
    EmptyState,
    Expression(String),
}

impl fmt::Display for GroundingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundingError::UnknownLandmark { name } => write!(f, "landmark `{name}` is not in the scene"),
            GroundingError::UnknownCandidate { id } => write!(f, "candidate `{id}` is not an observed object"),
            GroundingError::NoAction => write!(f, "no action found in the first dialogue"),
            GroundingError::NotFound { object_type: Some(t) } => write!(f, "no observed object matches `{t}`"),
            GroundingError::NotFound { object_type: None } => write!(f, "no observed object matches the request"),
            GroundingError::EmptyState => write!(f, "candidate set is empty"),
            GroundingError::Expression(msg) => write!(f, "{msg}"),
        }
    }
}

impl core::error::Error for GroundingError {}

/// What the grounder can see: the world, the deduplicated objects and the
/// pose the snapshots were taken from.
#[derive(Debug, Clone, Copy)]
pub struct GroundingContext<'a> {
    pub scene: &'a Scene,
    pub entries: &'a [ObjectEntry],
    pub pose: Pose,
    pub semantics: SpatialSemantics,
}

impl<'a> GroundingContext<'a> {
    pub fn new(scene: &'a Scene, entries: &'a [ObjectEntry], pose: Pose) -> Self {
        Self { scene, entries, pose, semantics: SpatialSemantics::default() }
    }

    pub fn entry(&self, id: &ObjectId) -> Option<&'a ObjectEntry> {
        self.entries.iter().find(|e| &e.id == id)
    }

    pub fn all_ids(&self) -> BTreeSet<ObjectId> {
        self.entries.iter().map(|e| e.id.clone()).collect()
    }

    /// Scene object behind an observed id.
    pub fn object_of(&self, id: &ObjectId) -> Result<&'a SceneObject, GroundingError> {
        self.entry(id)
            .and_then(|e| self.scene.object(&e.object_name))
            .ok_or_else(|| GroundingError::UnknownCandidate { id: id.clone() })
    }

    /// Resolves a landmark by scene object name, then by observed id.
    pub fn landmark(&self, name: &str) -> Result<&'a SceneObject, GroundingError> {
        self.scene
            .object(name)
            .or_else(|| self.entry(&ObjectId::new(name)).and_then(|e| self.scene.object(&e.object_name)))
            .ok_or_else(|| GroundingError::UnknownLandmark { name: name.into() })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::WorldPoint;
    use crate::sensing::{BBox, Detection, Pixel};
    use crate::world::{Bounds, CameraModel};
    use alloc::collections::BTreeMap;
    use alloc::string::ToString;
    use alloc::vec;
    use alloc::vec::Vec;
    use rand::SeedableRng;

    pub(crate) struct Fixture {
        pub scene: Scene,
        pub entries: Vec<ObjectEntry>,
    }

    type Spec<'s> = (&'s str, &'s str, [f64; 2], &'s [(&'s str, &'s str)]);

    impl Fixture {
        /// 0.5 x 0.5 x 1 m boxes; every object is observed in image 1 and ids
        /// are `kind + ordinal` in listing order.
        pub fn new(specs: &[Spec<'_>]) -> Self {
            let objects: Vec<SceneObject> = specs
                .iter()
                .map(|(name, kind, [x, y], attrs)| SceneObject {
                    name: name.to_string(),
                    kind: kind.to_string(),
                    attributes: attrs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
                    center: [*x, *y, 0.5],
                    size: [0.5, 0.5, 1.0],
                    yaw: 0.0,
                })
                .collect();
            let bounds = Bounds { min: WorldPoint::new(-10.0, -10.0), max: WorldPoint::new(10.0, 10.0) };
            let scene = Scene::new(bounds, 0.05, objects, vec![], CameraModel::default()).unwrap();
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            let entries = specs
                .iter()
                .map(|(name, kind, _, _)| {
                    let n = counts.entry(kind).or_insert(0);
                    *n += 1;
                    ObjectEntry {
                        id: ObjectId::from_parts(kind, *n),
                        label: kind.to_string(),
                        object_name: name.to_string(),
                        detections: vec![Detection {
                            snapshot_index: 1,
                            label: kind.to_string(),
                            object_name: name.to_string(),
                            bbox: BBox { x_min: 0, y_min: 0, x_max: 0, y_max: 0 },
                            mask: vec![Pixel { x: 0, y: 0 }],
                        }],
                    }
                })
                .collect();
            Self { scene, entries }
        }
    }

    pub(crate) fn fixture_context(fx: &Fixture, pose: Pose) -> GroundingContext<'_> {
        GroundingContext::new(&fx.scene, &fx.entries, pose)
    }

    fn five_chairs() -> Fixture {
        Fixture::new(&[
            ("door", "door", [0.0, 4.0], &[]),
            ("c1", "chair", [1.0, 1.0], &[("subtype", "high")]),
            ("c2", "chair", [2.0, 1.0], &[("subtype", "standard")]),
            ("c3", "chair", [3.0, 1.0], &[("subtype", "high")]),
            ("c4", "chair", [4.0, 1.0], &[("subtype", "standard")]),
            ("c5", "chair", [5.0, 1.0], &[("subtype", "standard")]),
        ])
    }

    fn item(turns: Vec<DialogueTurn>) -> DialogueItem {
        DialogueItem {
            id: "t".into(),
            scene_ref: "fixture".into(),
            case: None,
            snapshot_point_index: 0,
            dialogue_type: DialogueType::B,
            turns,
            target_id: ObjectId::new("chair1"),
            step_candidates: vec![],
        }
    }

    fn pose() -> Pose {
        Pose::new(WorldPoint::new(0.0, -3.0), 0.0)
    }

    fn narrowing_turns() -> Vec<DialogueTurn> {
        vec![
            DialogueTurn::new("Please go to the chair.", vec![Constraint::type_is("chair")]).with_action("go to"),
            DialogueTurn::new("Hmm, I mean a high chair.", vec![Constraint::attribute("subtype", "high")]),
            DialogueTurn::new("The one closest to the door.", vec![Constraint::nearest_to("door")]),
        ]
    }

    #[test]
    fn scripted_run_narrows_five_two_one() {
        let fx = five_chairs();
        let mut g = ScriptedGrounder::new(fixture_context(&fx, pose()));
        let trace = run_dialogue(&item(narrowing_turns()), &mut g, 5).unwrap();
        assert_eq!(trace.alpha, 3);
        let sizes: Vec<usize> = trace.per_step_predictions.iter().map(BTreeSet::len).collect();
        assert_eq!(sizes, [5, 2, 1]);
        assert_eq!(trace.resolved_id, Some(ObjectId::new("chair1")));
        assert!(trace.is_monotone());
    }

    #[test]
    fn resolves_on_first_turn() {
        let fx = five_chairs();
        let mut g = ScriptedGrounder::new(fixture_context(&fx, pose()));
        let turn = DialogueTurn::new("the chair nearest the door", vec![Constraint::type_is("chair"), Constraint::nearest_to("door")]);
        let trace = run_dialogue(&item(vec![turn]), &mut g, 5).unwrap();
        assert_eq!((trace.alpha, trace.per_step_predictions.len()), (1, 1));
        assert_eq!(trace.per_step_predictions[0].len(), 1);
    }

    #[test]
    fn unresolved_run_reports_k_plus_one() {
        let fx = five_chairs();
        let mut g = ScriptedGrounder::new(fixture_context(&fx, pose()));
        let turns = vec![DialogueTurn::new("a chair", vec![Constraint::type_is("chair")]); 3];
        let trace = run_dialogue(&item(turns), &mut g, 5).unwrap();
        assert_eq!((trace.k, trace.alpha), (3, 4));
        assert_eq!(trace.resolved_id, None);
        assert_eq!(trace.per_step_predictions.len(), 3);
    }

    #[test]
    fn k_max_caps_consumed_turns() {
        let fx = five_chairs();
        let mut g = ScriptedGrounder::new(fixture_context(&fx, pose()));
        let trace = run_dialogue(&item(narrowing_turns()), &mut g, 2).unwrap();
        assert_eq!((trace.k, trace.alpha, trace.per_step_predictions.len()), (2, 3, 2));
    }

    #[test]
    fn step_statuses_follow_cardinality() {
        let fx = five_chairs();
        let ctx = fixture_context(&fx, pose());
        let all = ctx.all_ids();
        let chairs = ground_step_scripted(&all, &DialogueTurn::new("", vec![Constraint::type_is("chair")]), &ctx).unwrap();
        assert_eq!((chairs.status(), chairs.candidates().len()), (ResponseStatus::Ambiguous, 5));
        assert!(chairs.candidates().iter().all(|c| c.image == 1));
        let none = ground_step_scripted(&all, &DialogueTurn::new("", vec![Constraint::type_is("piano")]), &ctx).unwrap();
        assert_eq!(none.status(), ResponseStatus::NotFound);
        let three = DialogueTurn::new("", vec![Constraint::type_is("chair"), Constraint::attribute("subtype", "standard")]);
        assert_eq!(ground_step_scripted(&all, &three, &ctx).unwrap().candidates().len(), 3);
        assert_eq!(ground_step_scripted(&BTreeSet::new(), &three, &ctx), Err(GroundingError::EmptyState));
    }

    #[test]
    fn scripted_reply_text_parses_back() {
        let fx = five_chairs();
        let ctx = fixture_context(&fx, pose());
        let turn = DialogueTurn::new("", vec![Constraint::type_is("chair"), Constraint::attribute("subtype", "high")]);
        let resp = ground_step_scripted(&ctx.all_ids(), &turn, &ctx).unwrap();
        assert_eq!(parse_response(resp.raw_text().unwrap()).candidates(), resp.candidates());
    }

    #[test]
    fn first_dialogue_ambiguity() {
        let specs: Vec<(String, [f64; 2])> = (0..12).map(|i| (alloc::format!("chair_{i}"), [i as f64 * 0.8 - 5.0, 2.0])).collect();
        let spec_refs: Vec<Spec<'_>> = specs.iter().map(|(n, p)| (n.as_str(), "chair", *p, &[][..])).collect();
        let fx = Fixture::new(&spec_refs);
        let ctx = fixture_context(&fx, pose());
        let turn = DialogueTurn::new("Please go to the chair.", vec![Constraint::type_is("chair")]).with_action("go to");
        let draft = parse_first_dialogue(&turn, &ctx).unwrap();
        assert!(draft.ambiguous);
        assert_eq!(draft.candidates.len(), 12);
        assert_eq!(draft.object_type.as_deref(), Some("chair"));
        assert_eq!(draft.time, MissionTime::Immediate);

        let single = Fixture::new(&[("only", "chair", [1.0, 1.0], &[])]);
        let draft = parse_first_dialogue(&turn, &fixture_context(&single, pose())).unwrap();
        assert!(!draft.ambiguous);

        let no_action = DialogueTurn::new("the chair", vec![Constraint::type_is("chair")]);
        assert_eq!(parse_first_dialogue(&no_action, &ctx), Err(GroundingError::NoAction));
        let piano = DialogueTurn::new("go to the piano", vec![Constraint::type_is("piano")]).with_action("go to");
        assert_eq!(
            parse_first_dialogue(&piano, &ctx),
            Err(GroundingError::NotFound { object_type: Some("piano".into()) })
        );
    }

    struct Flaky(usize);

    impl Grounder for Flaky {
        type Error = &'static str;
        fn ground(&mut self, _: &DialogueTurn) -> Result<GrounderResponse, &'static str> {
            self.0 += 1;
            if self.0 >= 2 {
                return Err("timeout");
            }
            Ok(parse_response("chair1 in the first image or chair2 in the first image"))
        }
    }

    #[test]
    fn transport_error_aborts_with_partial_trace() {
        let err = run_dialogue(&item(narrowing_turns()), &mut Flaky(0), 5).unwrap_err();
        assert_eq!(err.error, "timeout");
        assert_eq!(err.trace.per_step_predictions.len(), 1);
        assert_eq!(err.trace.alpha, 4);
        assert_eq!(err.trace.resolved_id, None);
    }

    #[test]
    fn perturbed_grounder_drops_one_candidate_per_ambiguous_step() {
        let fx = five_chairs();
        let rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut g = PerturbedGrounder::new(fixture_context(&fx, pose()), rng);
        let trace = run_dialogue(&item(narrowing_turns()), &mut g, 5).unwrap();
        assert_eq!(trace.per_step_predictions[0].len(), 4);
        assert!(trace.per_step_predictions.len() >= 2);
    }

    #[test]
    fn scripted_grounding_is_deterministic() {
        let fx = five_chairs();
        let a = run_dialogue(&item(narrowing_turns()), &mut ScriptedGrounder::new(fixture_context(&fx, pose())), 5);
        let b = run_dialogue(&item(narrowing_turns()), &mut ScriptedGrounder::new(fixture_context(&fx, pose())), 5);
        assert_eq!(a, b);
    }
}
