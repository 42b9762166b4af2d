//! Dialogue scores.
//!
//! Type A (first turn names one object in principle):
//!
//! ```text
//! SR = (k − (α − 1)) / k
//! AS = 1/α · Σ_{i≤α} found_i / β_i     if α ≤ k, else 0
//! T_A = mean(λ_sr · SR + λ_as · AS)
//! ```
//!
//! Type B (first turn is ambiguous and every turn narrows):
//!
//! ```text
//! AR = 1 if the resolved id is the target
//! NS = 1/α · Σ_{i≤α} |x_i ∩ x′_i| / |x_i ∪ x′_i|
//! T_B = mean(λ_ar · AR + λ_ns · NS)
//! ```
//!
//! `α` is the number of turns consumed, `k + 1` on failure. On failure NS
//! sums over the `k` recorded steps but still divides by `k + 1`.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::grounding::{run_dialogue, DialogueItem, DialogueType, Grounder, GroundingTrace};
use crate::id::ObjectId;

const WEIGHT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    InvalidK { k: usize },
    InvalidWeights(String),
    EmptyItems,
    MixedTypes,
    MissingStepCandidates { item: String, step: usize },
    Item { item: String, message: String },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::InvalidK { k } => write!(f, "dialogue length must be at least 1, got {k}"),
            MetricsError::InvalidWeights(msg) => write!(f, "invalid weights: {msg}"),
            MetricsError::EmptyItems => write!(f, "no items to aggregate"),
            MetricsError::MixedTypes => write!(f, "items of both dialogue types in one aggregate"),
            MetricsError::MissingStepCandidates { item, step } => {
                write!(f, "item `{item}` has no ground-truth candidates for step {step}")
            }
            MetricsError::Item { item, message } => write!(f, "item `{item}`: {message}"),
        }
    }
}

impl core::error::Error for MetricsError {}

/// Weighting factors of the two aggregate scores.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Weights {
    sr: f64,
    as_: f64,
    ar: f64,
    ns: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { sr: 0.8, as_: 0.2, ar: 0.6, ns: 0.4 }
    }
}

impl Weights {
    /// Each weight must lie in `[0, 1]` and each pair must sum to 1.
    pub fn new(sr: f64, as_: f64, ar: f64, ns: f64) -> Result<Self, MetricsError> {
        for (name, w) in [("λ_sr", sr), ("λ_as", as_), ("λ_ar", ar), ("λ_ns", ns)] {
            if !(0.0..=1.0).contains(&w) {
                return Err(MetricsError::InvalidWeights(alloc::format!("{name} = {w} is outside [0, 1]")));
            }
        }
        if (sr + as_ - 1.0).abs() > WEIGHT_TOL {
            return Err(MetricsError::InvalidWeights(alloc::format!("λ_sr + λ_as = {} ≠ 1", sr + as_)));
        }
        if (ar + ns - 1.0).abs() > WEIGHT_TOL {
            return Err(MetricsError::InvalidWeights(alloc::format!("λ_ar + λ_ns = {} ≠ 1", ar + ns)));
        }
        Ok(Self { sr, as_, ar, ns })
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.sr, self.as_, self.ar, self.ns]
    }

    /// The weight pair applied to items of type `t`.
    pub fn for_type(&self, t: DialogueType) -> (f64, f64) {
        match t {
            DialogueType::A => (self.sr, self.as_),
            DialogueType::B => (self.ar, self.ns),
        }
    }
}

/// Parses `λsr,λas,λar,λns`.
impl FromStr for Weights {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [sr, as_, ar, ns] = parts[..] else {
            return Err(MetricsError::InvalidWeights(alloc::format!("expected 4 comma-separated values, got `{s}`")));
        };
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| MetricsError::InvalidWeights(alloc::format!("`{v}` is not a number")))
        };
        Weights::new(num(sr)?, num(as_)?, num(ar)?, num(ns)?)
    }
}

fn check_k(k: usize) -> Result<(), MetricsError> {
    if k < 1 {
        return Err(MetricsError::InvalidK { k });
    }
    Ok(())
}

/// `(k − (α − 1)) / k`, 0 on failure.
pub fn success_rate(trace: &GroundingTrace, k: usize) -> Result<f64, MetricsError> {
    check_k(k)?;
    let alpha = trace.alpha.clamp(1, k + 1);
    Ok((k + 1 - alpha) as f64 / k as f64)
}

/// Mean over the consumed steps of `found_i / β_i`, 0 on failure.
pub fn accuracy_score(trace: &GroundingTrace, k: usize, target: &ObjectId) -> Result<f64, MetricsError> {
    check_k(k)?;
    if trace.alpha == 0 || trace.alpha > k {
        return Ok(0.0);
    }
    let sum: f64 = trace
        .per_step_predictions
        .iter()
        .take(trace.alpha)
        .map(|pred| match pred.len() {
            0 => 0.0,
            beta if pred.contains(target) => 1.0 / beta as f64,
            _ => 0.0,
        })
        .sum();
    Ok(sum / trace.alpha as f64)
}

/// 1 iff the run resolved to `target`.
pub fn accuracy_rate(trace: &GroundingTrace, target: &ObjectId) -> f64 {
    match &trace.resolved_id {
        Some(id) if id == target => 1.0,
        _ => 0.0,
    }
}

/// Jaccard index; two empty sets count as identical.
pub fn jaccard(a: &BTreeSet<ObjectId>, b: &BTreeSet<ObjectId>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Mean per-step Jaccard between ground-truth and predicted sets, divided by
/// `α`. Steps the run never reached count as empty predictions.
pub fn narrowing_score(trace: &GroundingTrace, item: &DialogueItem) -> Result<f64, MetricsError> {
    let alpha = trace.alpha.max(1);
    let steps = alpha.min(trace.k);
    let empty = BTreeSet::new();
    let mut sum = 0.0;
    for i in 0..steps {
        let truth = item
            .step_candidates
            .get(i)
            .ok_or_else(|| MetricsError::MissingStepCandidates { item: item.id.clone(), step: i + 1 })?;
        sum += jaccard(truth, trace.per_step_predictions.get(i).unwrap_or(&empty));
    }
    Ok(sum / alpha as f64)
}

/// `Σ (λ₁·s₁ + λ₂·s₂) / |S|` over per-item score pairs.
pub fn aggregate(scores: &[(f64, f64)], weights: &Weights, t: DialogueType) -> Result<f64, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyItems);
    }
    let (l1, l2) = weights.for_type(t);
    Ok(scores.iter().map(|(a, b)| l1 * a + l2 * b).sum::<f64>() / scores.len() as f64)
}

/// Scores of one dialogue run. `score1`/`score2` are SR/AS for type A and
/// AR/NS for type B.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ItemScores {
    pub item_id: String,
    pub dialogue_type: DialogueType,
    pub space: String,
    pub case: String,
    pub k: usize,
    pub alpha: usize,
    pub resolved_id: Option<ObjectId>,
    pub score1: f64,
    pub score2: f64,
    pub total: f64,
    pub step_sizes: Vec<usize>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub diagnostics: Option<String>,
}

/// Scores a finished (or aborted) run. `diagnostics` carries the abort reason.
pub fn score_item(
    item: &DialogueItem,
    trace: &GroundingTrace,
    weights: &Weights,
    diagnostics: Option<String>,
) -> Result<ItemScores, MetricsError> {
    let (score1, score2) = match item.dialogue_type {
        DialogueType::A => (success_rate(trace, trace.k)?, accuracy_score(trace, trace.k, &item.target_id)?),
        DialogueType::B => (accuracy_rate(trace, &item.target_id), narrowing_score(trace, item)?),
    };
    let (l1, l2) = weights.for_type(item.dialogue_type);
    Ok(ItemScores {
        item_id: item.id.clone(),
        dialogue_type: item.dialogue_type,
        space: item.scene_ref.clone(),
        case: item.case_label(),
        k: trace.k,
        alpha: trace.alpha,
        resolved_id: trace.resolved_id.clone(),
        score1,
        score2,
        total: l1 * score1 + l2 * score2,
        step_sizes: trace.per_step_predictions.iter().map(BTreeSet::len).collect(),
        diagnostics,
    })
}

/// One aggregated line: a `(space, case)` group or an overall per-type line.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ReportRow {
    pub dialogue_type: DialogueType,
    pub space: String,
    pub case: String,
    pub items: usize,
    /// Mean SR (type A) or AR (type B).
    pub score1: f64,
    /// Mean AS (type A) or NS (type B).
    pub score2: f64,
    pub total: f64,
}

pub const OVERALL_SPACE: &str = "overall";

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MetricsReport {
    pub weights: Weights,
    pub rows: Vec<ReportRow>,
    pub items: Vec<ItemScores>,
}

impl MetricsReport {
    /// Groups items by `(type, space, case)` in first-appearance order and
    /// appends one overall row per type present.
    pub fn from_items(items: Vec<ItemScores>, weights: Weights) -> Result<Self, MetricsError> {
        if items.is_empty() {
            return Err(MetricsError::EmptyItems);
        }
        type Key<'k> = (DialogueType, &'k str, &'k str);
        let mut groups: Vec<(Key<'_>, Vec<&ItemScores>)> = Vec::new();
        for s in &items {
            let key = (s.dialogue_type, s.space.as_str(), s.case.as_str());
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push(s),
                None => groups.push((key, alloc::vec![s])),
            }
        }
        let row = |t: DialogueType, space: &str, case: &str, members: &[&ItemScores]| -> Result<ReportRow, MetricsError> {
            let pairs: Vec<(f64, f64)> = members.iter().map(|s| (s.score1, s.score2)).collect();
            let n = pairs.len() as f64;
            Ok(ReportRow {
                dialogue_type: t,
                space: space.to_string(),
                case: case.to_string(),
                items: pairs.len(),
                score1: pairs.iter().map(|p| p.0).sum::<f64>() / n,
                score2: pairs.iter().map(|p| p.1).sum::<f64>() / n,
                total: aggregate(&pairs, &weights, t)?,
            })
        };
        let mut rows = Vec::with_capacity(groups.len() + 2);
        for ((t, space, case), members) in &groups {
            rows.push(row(*t, space, case, members)?);
        }
        for t in [DialogueType::A, DialogueType::B] {
            let members: Vec<&ItemScores> = items.iter().filter(|s| s.dialogue_type == t).collect();
            if !members.is_empty() {
                rows.push(row(t, OVERALL_SPACE, &alloc::format!("type-{t}"), &members)?);
            }
        }
        Ok(Self { weights, rows, items })
    }

    /// Every row's total equals the weighted combination of its two columns.
    pub fn totals_consistent(&self, tol: f64) -> bool {
        self.rows.iter().all(|r| {
            let (l1, l2) = self.weights.for_type(r.dialogue_type);
            (r.total - (l1 * r.score1 + l2 * r.score2)).abs() <= tol
        })
    }

    pub fn aborted(&self) -> impl Iterator<Item = &ItemScores> {
        self.items.iter().filter(|s| s.diagnostics.is_some())
    }
}

/// Runs every item with a fresh grounder from `make_grounder` and scores it.
///
/// A grounder error ends that item as a failure with the error kept as
/// diagnostics; an error from `make_grounder` aborts the evaluation.
pub fn evaluate_dataset<G, F>(
    items: &[DialogueItem],
    weights: &Weights,
    k_max: usize,
    mut make_grounder: F,
) -> Result<MetricsReport, MetricsError>
where
    G: Grounder,
    F: FnMut(&DialogueItem) -> Result<G, MetricsError>,
{
    if items.is_empty() {
        return Err(MetricsError::EmptyItems);
    }
    let mut scores = Vec::with_capacity(items.len());
    for item in items {
        let mut grounder = make_grounder(item)?;
        let (trace, diagnostics) = match run_dialogue(item, &mut grounder, k_max) {
            Ok(t) => (t, None),
            Err(aborted) => (aborted.trace, Some(aborted.error.to_string())),
        };
        scores.push(score_item(item, &trace, weights, diagnostics)?);
    }
    MetricsReport::from_items(scores, *weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn ids(names: &[&str]) -> BTreeSet<ObjectId> {
        names.iter().map(|&n| ObjectId::new(n)).collect()
    }

    fn trace(k: usize, preds: Vec<BTreeSet<ObjectId>>, resolved: Option<&str>) -> GroundingTrace {
        let alpha = if resolved.is_some() { preds.len() } else { k + 1 };
        GroundingTrace {
            item_id: "t".into(),
            k,
            alpha,
            per_step_predictions: preds,
            resolved_id: resolved.map(ObjectId::new),
            responses: vec![],
        }
    }

    fn item_b(steps: Vec<BTreeSet<ObjectId>>) -> DialogueItem {
        DialogueItem {
            id: "b".into(),
            scene_ref: "room".into(),
            case: None,
            snapshot_point_index: 0,
            dialogue_type: DialogueType::B,
            turns: vec![],
            target_id: ObjectId::new("a"),
            step_candidates: steps,
        }
    }

    fn bare(k: usize, alpha: usize) -> GroundingTrace {
        GroundingTrace { item_id: "t".into(), k, alpha, per_step_predictions: vec![], resolved_id: None, responses: vec![] }
    }

    #[test]
    fn success_rate_examples() {
        assert_eq!(success_rate(&bare(5, 1), 5).unwrap(), 1.0);
        assert!((success_rate(&bare(5, 4), 5).unwrap() - 0.4).abs() < 1e-12);
        assert_eq!(success_rate(&bare(3, 4), 3).unwrap(), 0.0);
        assert_eq!(success_rate(&bare(0, 1), 0), Err(MetricsError::InvalidK { k: 0 }));
    }

    #[test]
    fn accuracy_score_examples() {
        let t = trace(5, vec![ids(&["t"])], Some("t"));
        assert_eq!(accuracy_score(&t, 5, &ObjectId::new("t")).unwrap(), 1.0);
        let t = trace(5, vec![ids(&["t", "a", "b"]), ids(&["t"])], Some("t"));
        assert!((accuracy_score(&t, 5, &ObjectId::new("t")).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let t = trace(3, vec![ids(&["t", "a"]); 3], None);
        assert_eq!(accuracy_score(&t, 3, &ObjectId::new("t")).unwrap(), 0.0);
    }

    #[test]
    fn accuracy_score_not_found_step_counts_zero() {
        let t = trace(5, vec![BTreeSet::new(), ids(&["t"])], Some("t"));
        assert_eq!(accuracy_score(&t, 5, &ObjectId::new("t")).unwrap(), 0.5);
    }

    #[test]
    fn accuracy_rate_examples() {
        let target = ObjectId::new("t");
        assert_eq!(accuracy_rate(&trace(5, vec![ids(&["t"])], Some("t")), &target), 1.0);
        assert_eq!(accuracy_rate(&trace(5, vec![ids(&["x"])], Some("x")), &target), 0.0);
        assert_eq!(accuracy_rate(&trace(2, vec![ids(&["t", "x"]); 2], None), &target), 0.0);
    }

    #[test]
    fn narrowing_score_examples() {
        let item = item_b(vec![ids(&["a", "b", "c"]), ids(&["a"])]);
        let t = trace(2, vec![ids(&["a", "b"]), ids(&["a"])], Some("a"));
        assert!((narrowing_score(&t, &item).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        let exact = trace(2, vec![ids(&["a", "b", "c"]), ids(&["a"])], Some("a"));
        assert_eq!(narrowing_score(&exact, &item).unwrap(), 1.0);
        let disjoint = trace(1, vec![ids(&["x"])], Some("x"));
        assert_eq!(narrowing_score(&disjoint, &item_b(vec![ids(&["a"])])).unwrap(), 0.0);
    }

    #[test]
    fn narrowing_failure_divides_by_k_plus_one() {
        let item = item_b(vec![ids(&["a", "b"]), ids(&["a"])]);
        let t = trace(2, vec![ids(&["a", "b"]), ids(&["a", "b"])], None);
        assert!((narrowing_score(&t, &item).unwrap() - 1.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn narrowing_needs_ground_truth() {
        let t = trace(2, vec![ids(&["a", "b"]), ids(&["a"])], Some("a"));
        assert!(matches!(
            narrowing_score(&t, &item_b(vec![ids(&["a", "b"])])),
            Err(MetricsError::MissingStepCandidates { step: 2, .. })
        ));
    }

    #[test]
    fn table_rows_aggregate() {
        let w = Weights::default();
        let t = |s1, s2, ty| aggregate(&[(s1, s2)], &w, ty).unwrap();
        assert!((t(0.636, 0.79, DialogueType::A) - 0.667).abs() <= 0.001);
        assert!((t(0.866, 0.835, DialogueType::A) - 0.860).abs() <= 0.001);
        assert!((t(1.0, 0.783, DialogueType::B) - 0.913).abs() <= 0.001);
        assert_eq!(aggregate(&[], &w, DialogueType::A), Err(MetricsError::EmptyItems));
    }

    #[test]
    fn weights_validation_and_parsing() {
        assert_eq!("0.8,0.2,0.6,0.4".parse::<Weights>().unwrap(), Weights::default());
        assert!(Weights::new(0.7, 0.2, 0.6, 0.4).is_err());
        assert!(Weights::new(1.2, -0.2, 0.6, 0.4).is_err());
        assert!("0.5,0.5,1".parse::<Weights>().is_err());
        assert!("0.5,x,0.5,0.5".parse::<Weights>().is_err());
    }

    fn scores(space: &str, case: &str, t: DialogueType, s1: f64, s2: f64) -> ItemScores {
        let (l1, l2) = Weights::default().for_type(t);
        ItemScores {
            item_id: "i".into(),
            dialogue_type: t,
            space: space.into(),
            case: case.into(),
            k: 3,
            alpha: 1,
            resolved_id: None,
            score1: s1,
            score2: s2,
            total: l1 * s1 + l2 * s2,
            step_sizes: vec![],
            diagnostics: None,
        }
    }

    #[test]
    fn report_groups_in_first_appearance_order() {
        let items = vec![
            scores("office", "p1", DialogueType::A, 1.0, 1.0),
            scores("cafe", "p1", DialogueType::B, 1.0, 0.5),
            scores("office", "p1", DialogueType::A, 0.0, 0.0),
        ];
        let r = MetricsReport::from_items(items, Weights::default()).unwrap();
        let keys: Vec<(&str, &str, usize)> = r.rows.iter().map(|r| (r.space.as_str(), r.case.as_str(), r.items)).collect();
        assert_eq!(keys, [("office", "p1", 2), ("cafe", "p1", 1), ("overall", "type-A", 2), ("overall", "type-B", 1)]);
        assert!((r.rows[0].total - 0.5).abs() < 1e-12);
        assert!((r.rows[1].total - 0.8).abs() < 1e-12);
        assert!(r.totals_consistent(1e-9));
        assert_eq!(MetricsReport::from_items(vec![], Weights::default()), Err(MetricsError::EmptyItems));
    }

    fn set_strategy() -> impl Strategy<Value = BTreeSet<ObjectId>> {
        proptest::collection::btree_set(0usize..6, 0..5)
            .prop_map(|s| s.into_iter().map(|i| ObjectId::from_parts("o", i)).collect())
    }

    proptest! {
        #[test]
        fn metrics_lie_in_unit_interval(
            k in 1usize..6,
            preds in proptest::collection::vec(set_strategy(), 1..6),
            truth in proptest::collection::vec(set_strategy(), 6),
            resolve in any::<bool>(),
        ) {
            let preds: Vec<_> = preds.into_iter().take(k).collect();
            let resolved = if resolve { preds.last().and_then(|p| p.iter().next()).map(|i| i.as_str().into()) } else { None };
            let t = GroundingTrace {
                item_id: "p".into(),
                k,
                alpha: if resolved.is_some() { preds.len() } else { k + 1 },
                per_step_predictions: preds,
                resolved_id: resolved,
                responses: vec![],
            };
            let target = ObjectId::from_parts("o", 0);
            let item = DialogueItem { target_id: target.clone(), ..item_b(truth) };
            for v in [
                success_rate(&t, k).unwrap(),
                accuracy_score(&t, k, &target).unwrap(),
                accuracy_rate(&t, &target),
                narrowing_score(&t, &item).unwrap(),
            ] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn success_rate_is_monotone_in_alpha(k in 1usize..10, a in 1usize..11, b in 1usize..11) {
            let (a, b) = (a.min(k + 1), b.min(k + 1));
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(success_rate(&bare(k, lo), k).unwrap() >= success_rate(&bare(k, hi), k).unwrap());
            prop_assert_eq!(success_rate(&bare(k, lo), k).unwrap() == 1.0, lo == 1);
        }

        #[test]
        fn aggregate_is_linear(pairs in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..20), w in 0.0f64..=1.0) {
            let weights = Weights::new(w, 1.0 - w, w, 1.0 - w).unwrap();
            let n = pairs.len() as f64;
            let m1 = pairs.iter().map(|p| p.0).sum::<f64>() / n;
            let m2 = pairs.iter().map(|p| p.1).sum::<f64>() / n;
            let t = aggregate(&pairs, &weights, DialogueType::A).unwrap();
            prop_assert!((t - (w * m1 + (1.0 - w) * m2)).abs() <= 1e-12);
        }
    }
}
