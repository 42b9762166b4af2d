//! Structured spatial constraints and their evaluation against a scene.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;


use super::{GroundingContext, GroundingError};
use crate::geometry::{normalize_angle, point_segment_distance};
use crate::id::ObjectId;

/// Thresholds behind the fuzzy spatial relations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialSemantics {
    /// Largest boundary-to-boundary gap still counted as "next to", meters.
    pub next_to_m: f64,
    /// Largest distance from the segment joining two landmarks for "between".
    pub between_m: f64,
    /// Largest deviation between an object's yaw and its bearing to the landmark.
    pub facing_deg: f64,
}

impl Default for SpatialSemantics {
    fn default() -> Self {
        Self { next_to_m: 1.0, between_m: 0.5, facing_deg: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Constraint {
    TypeIs {
        object_type: String,
    },
    Attribute {
        key: String,
        value: String,
    },
    NearestTo {
        landmark: String,
    },
    FarthestFrom {
        landmark: String,
    },
    NextTo {
        landmark: String,
        #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
        max_gap_m: Option<f64>,
    },
    LeftOf {
        landmark: String,
    },
    RightOf {
        landmark: String,
    },
    Between {
        first: String,
        second: String,
        #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
        max_offset_m: Option<f64>,
    },
    Facing {
        landmark: String,
        #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
        tolerance_deg: Option<f64>,
    },
    InImage {
        image: usize,
    },
}

impl Constraint {
    pub fn type_is(t: &str) -> Self {
        Constraint::TypeIs { object_type: t.to_string() }
    }

    pub fn attribute(key: &str, value: &str) -> Self {
        Constraint::Attribute { key: key.to_string(), value: value.to_string() }
    }

    pub fn nearest_to(landmark: &str) -> Self {
        Constraint::NearestTo { landmark: landmark.to_string() }
    }

    pub fn left_of(landmark: &str) -> Self {
        Constraint::LeftOf { landmark: landmark.to_string() }
    }

    /// Landmark names this constraint refers to.
    pub fn landmarks(&self) -> Vec<&str> {
        match self {
            Constraint::NearestTo { landmark }
            | Constraint::FarthestFrom { landmark }
            | Constraint::NextTo { landmark, .. }
            | Constraint::LeftOf { landmark }
            | Constraint::RightOf { landmark }
            | Constraint::Facing { landmark, .. } => alloc::vec![landmark.as_str()],
            Constraint::Between { first, second, .. } => alloc::vec![first.as_str(), second.as_str()],
            Constraint::TypeIs { .. } | Constraint::Attribute { .. } | Constraint::InImage { .. } => Vec::new(),
        }
    }
}

/// Keeps the candidates satisfying `c`. The result is always a subset of
/// `candidates`; a landmark is never its own candidate.
pub fn apply_constraint(
    candidates: &BTreeSet<ObjectId>,
    c: &Constraint,
    ctx: &GroundingContext<'_>,
) -> Result<BTreeSet<ObjectId>, GroundingError> {
    let landmark_names: Vec<String> = c
        .landmarks()
        .into_iter()
        .map(|l| ctx.landmark(l).map(|o| o.name.clone()))
        .collect::<Result<_, _>>()?;
    let mut pool = Vec::with_capacity(candidates.len());
    for id in candidates {
        let obj = ctx.object_of(id)?;
        if !landmark_names.contains(&obj.name) {
            pool.push((id, obj));
        }
    }
    let sem = ctx.semantics;

    let keep = |pred: &dyn Fn(&crate::world::SceneObject) -> bool| -> BTreeSet<ObjectId> {
        pool.iter().filter(|(_, o)| pred(o)).map(|(id, _)| (*id).clone()).collect()
    };

    let out = match c {
        Constraint::TypeIs { object_type } => {
            let labels: BTreeSet<&ObjectId> = pool
                .iter()
                .filter(|(id, o)| ctx.entry(id).map_or(&o.kind, |e| &e.label) == object_type)
                .map(|(id, _)| *id)
                .collect();
            labels.into_iter().cloned().collect()
        }
        Constraint::Attribute { key, value } => keep(&|o| o.attributes.get(key) == Some(value)),
        Constraint::NearestTo { landmark } | Constraint::FarthestFrom { landmark } => {
            let anchor = ctx.landmark(landmark)?.centroid();
            let nearest = matches!(c, Constraint::NearestTo { .. });
            // Pool is in ascending id order, so strict improvement keeps the lowest id on ties.
            let mut best: Option<(&ObjectId, f64)> = None;
            for (id, o) in &pool {
                let d = o.centroid().distance(anchor);
                let better = match best {
                    None => true,
                    Some((_, bd)) => (nearest && d < bd) || (!nearest && d > bd),
                };
                if better {
                    best = Some((id, d));
                }
            }
            best.into_iter().map(|(id, _)| id.clone()).collect()
        }
        Constraint::NextTo { landmark, max_gap_m } => {
            let fp = ctx.landmark(landmark)?.footprint();
            let gap = max_gap_m.unwrap_or(sem.next_to_m);
            keep(&|o| o.footprint().distance_to(&fp) <= gap)
        }
        Constraint::LeftOf { landmark } | Constraint::RightOf { landmark } => {
            let anchor = ctx.pose.azimuth_to(ctx.landmark(landmark)?.centroid());
            let left = matches!(c, Constraint::LeftOf { .. });
            keep(&|o| {
                let az = ctx.pose.azimuth_to(o.centroid());
                if left {
                    az < anchor
                } else {
                    az > anchor
                }
            })
        }
        Constraint::Between { first, second, max_offset_m } => {
            let a = ctx.landmark(first)?.centroid();
            let b = ctx.landmark(second)?.centroid();
            let limit = max_offset_m.unwrap_or(sem.between_m);
            keep(&|o| point_segment_distance(o.centroid(), a, b) < limit)
        }
        Constraint::Facing { landmark, tolerance_deg } => {
            let target = ctx.landmark(landmark)?.centroid();
            let tol = tolerance_deg.unwrap_or(sem.facing_deg).to_radians();
            keep(&|o| {
                let bearing = (target - o.centroid()).bearing();
                normalize_angle(o.yaw - bearing).abs() <= tol + 1e-12
            })
        }
        Constraint::InImage { image } => pool
            .iter()
            .filter(|(id, _)| ctx.entry(id).is_some_and(|e| e.detection_in(*image).is_some()))
            .map(|(id, _)| (*id).clone())
            .collect(),
    };
    Ok(out)
}

/// Folds every constraint over `candidates`.
pub fn apply_all(
    candidates: &BTreeSet<ObjectId>,
    constraints: &[Constraint],
    ctx: &GroundingContext<'_>,
) -> Result<BTreeSet<ObjectId>, GroundingError> {
    constraints.iter().try_fold(candidates.clone(), |acc, c| apply_constraint(&acc, c, ctx))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintParseError(pub String);

impl fmt::Display for ConstraintParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot parse constraint: {}", self.0)
    }
}

impl core::error::Error for ConstraintParseError {}

fn fmt_opt(f: &mut fmt::Formatter<'_>, v: &Option<f64>) -> fmt::Result {
    match v {
        Some(v) => write!(f, " {v}"),
        None => Ok(()),
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::TypeIs { object_type } => write!(f, "type_is {object_type}"),
            Constraint::Attribute { key, value } => write!(f, "attribute {key}={value}"),
            Constraint::NearestTo { landmark } => write!(f, "nearest_to {landmark}"),
            Constraint::FarthestFrom { landmark } => write!(f, "farthest_from {landmark}"),
            Constraint::NextTo { landmark, max_gap_m } => {
                write!(f, "next_to {landmark}")?;
                fmt_opt(f, max_gap_m)
            }
            Constraint::LeftOf { landmark } => write!(f, "left_of {landmark}"),
            Constraint::RightOf { landmark } => write!(f, "right_of {landmark}"),
            Constraint::Between { first, second, max_offset_m } => {
                write!(f, "between {first} {second}")?;
                fmt_opt(f, max_offset_m)
            }
            Constraint::Facing { landmark, tolerance_deg } => {
                write!(f, "facing {landmark}")?;
                fmt_opt(f, tolerance_deg)
            }
            Constraint::InImage { image } => write!(f, "in_image {image}"),
        }
    }
}

/// Parses the one-line form produced by `Display`, e.g. `nearest_to door`,
/// `attribute subtype=high`, `between table1 table2 0.8`. Short keywords
/// `type`, `attr`, `nearest`, `farthest`, `image` are accepted too.
impl FromStr for Constraint {
    type Err = ConstraintParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ConstraintParseError(s.trim().to_string());
        let words: Vec<&str> = s.split_whitespace().collect();
        let (&head, args) = words.split_first().ok_or_else(err)?;
        let name = |i: usize| args.get(i).map(|s| s.to_string()).ok_or_else(err);
        let number = |i: usize| -> Result<Option<f64>, ConstraintParseError> {
            match args.get(i) {
                None => Ok(None),
                Some(v) => v.parse::<f64>().map(Some).map_err(|_| err()),
            }
        };
        let max_args = |n: usize| if args.len() > n { Err(err()) } else { Ok(()) };
        let c = match head.to_ascii_lowercase().as_str() {
            "type_is" | "type" => {
                max_args(1)?;
                Constraint::TypeIs { object_type: name(0)? }
            }
            "attribute" | "attr" => {
                max_args(1)?;
                let kv = name(0)?;
                let (k, v) = kv.split_once('=').ok_or_else(err)?;
                if k.is_empty() || v.is_empty() {
                    return Err(err());
                }
                Constraint::attribute(k, v)
            }
            "nearest_to" | "nearest" => {
                max_args(1)?;
                Constraint::NearestTo { landmark: name(0)? }
            }
            "farthest_from" | "farthest" => {
                max_args(1)?;
                Constraint::FarthestFrom { landmark: name(0)? }
            }
            "next_to" => {
                max_args(2)?;
                Constraint::NextTo { landmark: name(0)?, max_gap_m: number(1)? }
            }
            "left_of" => {
                max_args(1)?;
                Constraint::LeftOf { landmark: name(0)? }
            }
            "right_of" => {
                max_args(1)?;
                Constraint::RightOf { landmark: name(0)? }
            }
            "between" => {
                max_args(3)?;
                Constraint::Between { first: name(0)?, second: name(1)?, max_offset_m: number(2)? }
            }
            "facing" => {
                max_args(2)?;
                Constraint::Facing { landmark: name(0)?, tolerance_deg: number(1)? }
            }
            "in_image" | "image" => {
                max_args(1)?;
                Constraint::InImage { image: name(0)?.parse().map_err(|_| err())? }
            }
            _ => return Err(err()),
        };
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WorldPoint;
    use crate::grounding::tests::{fixture_context, Fixture};
    use crate::world::Pose;
    use alloc::vec;

    fn ids(names: &[&str]) -> BTreeSet<ObjectId> {
        names.iter().map(|n| ObjectId::new(*n)).collect()
    }

    #[test]
    fn nearest_to_whiteboard() {
        // chair1 is 1.2 m from the whiteboard, chair2 2.0 m.
        let fx = Fixture::new(&[
            ("whiteboard", "whiteboard", [0.0, 3.0], &[]),
            ("c_a", "chair", [0.0, 1.8], &[]),
            ("c_b", "chair", [2.0, 3.0], &[]),
        ]);
        let ctx = fixture_context(&fx, Pose::new(WorldPoint::new(0.0, 0.0), 0.0));
        let out = apply_constraint(&ids(&["chair1", "chair2"]), &Constraint::nearest_to("whiteboard"), &ctx).unwrap();
        assert_eq!(out, ids(&["chair1"]));
        let far = Constraint::FarthestFrom { landmark: "whiteboard".into() };
        assert_eq!(apply_constraint(&ids(&["chair1", "chair2"]), &far, &ctx).unwrap(), ids(&["chair2"]));
    }

    #[test]
    fn nearest_tie_breaks_to_lowest_id() {
        let fx = Fixture::new(&[
            ("door", "door", [0.0, 0.0], &[]),
            ("c_a", "chair", [1.0, 0.0], &[]),
            ("c_b", "chair", [-1.0, 0.0], &[]),
        ]);
        let ctx = fixture_context(&fx, Pose::new(WorldPoint::new(0.0, 3.0), 0.0));
        let out = apply_constraint(&ids(&["chair1", "chair2"]), &Constraint::nearest_to("door"), &ctx).unwrap();
        assert_eq!(out, ids(&["chair1"]));
    }

    #[test]
    fn attribute_filter() {
        let fx = Fixture::new(&[
            ("c_a", "chair", [1.0, 0.0], &[("subtype", "high")]),
            ("c_b", "chair", [2.0, 0.0], &[("subtype", "standard")]),
        ]);
        let ctx = fixture_context(&fx, Pose::new(WorldPoint::new(0.0, 3.0), 0.0));
        let out = apply_constraint(&ids(&["chair1", "chair2"]), &Constraint::attribute("subtype", "high"), &ctx).unwrap();
        assert_eq!(out, ids(&["chair1"]));
    }

    #[test]
    fn left_of_uses_egocentric_azimuth() {
        // From the origin facing +x: chair at −10°, door at +5°.
        let (c, d) = ((-10f64).to_radians(), 5f64.to_radians());
        let fx = Fixture::new(&[
            ("door", "door", [4.0 * d.cos(), 4.0 * d.sin()], &[]),
            ("c_a", "chair", [3.0 * c.cos(), 3.0 * c.sin()], &[]),
        ]);
        let ctx = fixture_context(&fx, Pose::new(WorldPoint::new(0.0, 0.0), 0.0));
        assert_eq!(apply_constraint(&ids(&["chair1"]), &Constraint::left_of("door"), &ctx).unwrap(), ids(&["chair1"]));
        let right = Constraint::RightOf { landmark: "door".into() };
        assert!(apply_constraint(&ids(&["chair1"]), &right, &ctx).unwrap().is_empty());
    }

    #[test]
    fn next_to_between_and_facing() {
        let fx = Fixture::new(&[
            ("t1", "table", [0.0, 0.0], &[]),
            ("t2", "table", [4.0, 0.0], &[]),
            ("c_a", "chair", [2.0, 0.2], &[]),
            ("c_b", "chair", [0.0, 1.5], &[]),
        ]);
        let ctx = fixture_context(&fx, Pose::new(WorldPoint::new(2.0, -3.0), 0.0));
        let all = ids(&["chair1", "chair2"]);
        // Boundary gap from c_b to t1 is 1.5 − 0.25 − 0.25 = 1.0 (half-size 0.25).
        let next = Constraint::NextTo { landmark: "t1".into(), max_gap_m: None };
        assert_eq!(apply_constraint(&all, &next, &ctx).unwrap(), ids(&["chair2"]));
        let between = Constraint::Between { first: "t1".into(), second: "t2".into(), max_offset_m: None };
        assert_eq!(apply_constraint(&all, &between, &ctx).unwrap(), ids(&["chair1"]));
        // Fixture objects have yaw 0 (facing +x). From c_b, t2 lies at bearing atan2(-1.5, 4) ≈ −20.6°.
        let facing = Constraint::Facing { landmark: "t2".into(), tolerance_deg: None };
        assert_eq!(apply_constraint(&ids(&["chair2"]), &facing, &ctx).unwrap(), ids(&["chair2"]));
        let strict = Constraint::Facing { landmark: "t2".into(), tolerance_deg: Some(10.0) };
        assert!(apply_constraint(&ids(&["chair2"]), &strict, &ctx).unwrap().is_empty());
    }

    #[test]
    fn unknown_landmark_is_an_error() {
        let fx = Fixture::new(&[("c_a", "chair", [1.0, 0.0], &[])]);
        let ctx = fixture_context(&fx, Pose::new(WorldPoint::new(0.0, 3.0), 0.0));
        let err = apply_constraint(&ids(&["chair1"]), &Constraint::nearest_to("piano"), &ctx).unwrap_err();
        assert_eq!(err, GroundingError::UnknownLandmark { name: "piano".into() });
    }

    #[test]
    fn landmark_can_be_named_by_entry_id() {
        let fx = Fixture::new(&[
            ("c_a", "chair", [1.0, 0.0], &[]),
            ("c_b", "chair", [1.5, 0.0], &[]),
            ("c_c", "chair", [4.0, 0.0], &[]),
        ]);
        let ctx = fixture_context(&fx, Pose::new(WorldPoint::new(0.0, 3.0), 0.0));
        let out = apply_constraint(&ids(&["chair1", "chair2", "chair3"]), &Constraint::nearest_to("chair1"), &ctx).unwrap();
        assert_eq!(out, ids(&["chair2"]));
    }

    #[test]
    fn text_form_round_trips() {
        let all = vec![
            Constraint::type_is("chair"),
            Constraint::attribute("subtype", "high"),
            Constraint::nearest_to("whiteboard"),
            Constraint::FarthestFrom { landmark: "door".into() },
            Constraint::NextTo { landmark: "window".into(), max_gap_m: Some(0.5) },
            Constraint::NextTo { landmark: "window".into(), max_gap_m: None },
            Constraint::left_of("door"),
            Constraint::RightOf { landmark: "door".into() },
            Constraint::Between { first: "t1".into(), second: "t2".into(), max_offset_m: Some(0.25) },
            Constraint::Facing { landmark: "window".into(), tolerance_deg: None },
            Constraint::InImage { image: 4 },
        ];
        for c in all {
            let text = alloc::format!("{c}");
            assert_eq!(text.parse::<Constraint>().unwrap(), c, "{text}");
        }
        assert_eq!("nearest door".parse::<Constraint>().unwrap(), Constraint::nearest_to("door"));
        assert!("attr subtype".parse::<Constraint>().is_err());
        assert!("fly_to moon".parse::<Constraint>().is_err());
        assert!("left_of a b".parse::<Constraint>().is_err());
    }
}
