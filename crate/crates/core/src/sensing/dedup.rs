//! Cross-snapshot duplicate removal.
//!
//! The camera rotates in place, so a world direction seen by two neighbouring
//! frames is rendered identically in both. Each detection's bbox is turned
//! into a world-azimuth interval, both intervals are clipped to the angular
//! region the two frames share, and detections of the same label whose
//! clipped intervals overlap with IoU above the threshold are merged.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::detect::Detection;
use super::render::Snapshot;
use crate::geometry::normalize_angle;
use crate::id::ObjectId;
use crate::world::CameraModel;

pub const DEFAULT_DEDUP_IOU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DedupConfig {
    pub iou_threshold: f64,
}

impl Default for DedupConfig {
    fn default() -> Self {
        Self { iou_threshold: DEFAULT_DEDUP_IOU }
    }
}

/// One physical object after deduplication.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectEntry {
    pub id: ObjectId,
    pub label: String,
    pub object_name: String,
    /// At most one per snapshot, ordered by snapshot index.
    pub detections: Vec<Detection>,
}

impl ObjectEntry {
    pub fn detection_in(&self, snapshot_index: usize) -> Option<&Detection> {
        self.detections.iter().find(|d| d.snapshot_index == snapshot_index)
    }

    /// Detection with the most mask pixels; earliest snapshot on ties.
    pub fn largest_detection(&self) -> &Detection {
        self.detections
            .iter()
            .reduce(|best, d| if d.mask.len() > best.mask.len() { d } else { best })
            .expect("entry has at least one detection")
    }
}

/// Azimuth span of a detection relative to its frame's optical axis, covering
/// whole pixel columns.
pub fn azimuth_interval(detection: &Detection, camera: &CameraModel) -> (f64, f64) {
    (
        camera.azimuth(detection.bbox.x_min as f64 - 0.5),
        camera.azimuth(detection.bbox.x_max as f64 + 0.5),
    )
}

struct Span {
    heading: f64,
    lo: f64,
    hi: f64,
}

fn clipped_iou(a: &Span, b: &Span, camera: &CameraModel) -> f64 {
    let half = camera.fov_x / 2.0;
    let step = camera.pixel_azimuth_step();
    let delta = normalize_angle(b.heading - a.heading);
    let (b_lo, b_hi) = (b.lo + delta, b.hi + delta);
    let (r_lo, r_hi) = ((-half).max(delta - half), half.min(delta + half));
    let shared = r_hi - r_lo;
    if shared < -step {
        return 0.0;
    }
    if shared < 2.0 * step {
        // Frames only touch: continue an object that runs off one frame's edge
        // into the next.
        let touch = 1.01 * step;
        let (a_edge, b_edge) = if delta > 0.0 { (a.hi >= half - touch, b_lo <= delta - half + touch) } else { (a.lo <= -half + touch, b_hi >= delta + half - touch) };
        return if a_edge && b_edge { 1.0 } else { 0.0 };
    }
    let (a0, a1) = (a.lo.max(r_lo), a.hi.min(r_hi));
    let (b0, b1) = (b_lo.max(r_lo), b_hi.min(r_hi));
    if a1 <= a0 || b1 <= b0 {
        return 0.0;
    }
    let inter = (a1.min(b1) - a0.max(b0)).max(0.0);
    let union = (a1 - a0) + (b1 - b0) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Merges duplicate detections across snapshots and assigns `label + ordinal`
/// ids, ordinals following each entry's first detection by
/// (snapshot index, bbox x_min).
pub fn deduplicate(
    detections: &[Detection],
    snapshots: &[Snapshot],
    camera: &CameraModel,
    config: DedupConfig,
) -> Vec<ObjectEntry> {
    let heading_of = |index: usize| {
        snapshots.iter().find(|s| s.index == index).map(|s| s.heading).unwrap_or(0.0)
    };
    let mut order: Vec<&Detection> = detections.iter().collect();
    order.sort_by(|a, b| {
        (a.snapshot_index, a.bbox.x_min, a.bbox.y_min, &a.label)
            .cmp(&(b.snapshot_index, b.bbox.x_min, b.bbox.y_min, &b.label))
    });

    let span = |d: &Detection| {
        let (lo, hi) = azimuth_interval(d, camera);
        Span { heading: heading_of(d.snapshot_index), lo, hi }
    };

    let mut clusters: Vec<(String, Vec<&Detection>)> = Vec::new();
    for det in order {
        let here = span(det);
        let mut best: Option<(usize, f64)> = None;
        for (ci, (label, members)) in clusters.iter().enumerate() {
            if *label != det.label || members.iter().any(|m| m.snapshot_index == det.snapshot_index) {
                continue;
            }
            let score = members
                .iter()
                .map(|m| clipped_iou(&span(m), &here, camera))
                .fold(0.0, f64::max);
            if score > config.iou_threshold && best.is_none_or(|(_, s)| score > s) {
                best = Some((ci, score));
            }
        }
        match best {
            Some((ci, _)) => clusters[ci].1.push(det),
            None => clusters.push((det.label.clone(), alloc::vec![det])),
        }
    }

    let mut ordinals: BTreeMap<String, usize> = BTreeMap::new();
    clusters
        .into_iter()
        .map(|(label, members)| {
            let n = ordinals.entry(label.clone()).or_insert(0);
            *n += 1;
            let mut detections: Vec<Detection> = members.into_iter().cloned().collect();
            detections.sort_by_key(|d| d.snapshot_index);
            ObjectEntry {
                id: ObjectId::from_parts(&label, *n),
                object_name: detections[0].object_name.clone(),
                label,
                detections,
            }
        })
        .collect()
}
