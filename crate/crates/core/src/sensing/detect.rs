use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::render::Snapshot;
use crate::world::Scene;

/// Pixels an object needs before the ground-truth detector reports it.
pub const DEFAULT_MIN_PIXELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pixel {
    pub x: u32,
    pub y: u32,
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BBox {
    pub fn contains(&self, p: Pixel) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&p.y)
    }

    /// Tight bounds of a pixel set; `None` when empty.
    pub fn enclosing(pixels: &[Pixel]) -> Option<BBox> {
        let first = pixels.first()?;
        let init = BBox { x_min: first.x, y_min: first.y, x_max: first.x, y_max: first.y };
        Some(pixels.iter().fold(init, |b, p| BBox {
            x_min: b.x_min.min(p.x),
            y_min: b.y_min.min(p.y),
            x_max: b.x_max.max(p.x),
            y_max: b.y_max.max(p.y),
        }))
    }
}

/// Output of a box detector, before segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDetection {
    pub label: String,
    pub object_name: String,
    pub bbox: BBox,
}

/// A segmented detection in one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub snapshot_index: usize,
    /// Class label, e.g. `chair`.
    pub label: String,
    pub object_name: String,
    pub bbox: BBox,
    /// Row-major sorted, non-empty, inside `bbox`.
    pub mask: Vec<Pixel>,
}

/// Finds labelled boxes in a snapshot.
pub trait Detector {
    fn detect(&self, scene: &Scene, snapshot: &Snapshot) -> Vec<BoxDetection>;
}

/// Turns a box into a pixel mask.
pub trait Segmenter {
    fn segment(&self, scene: &Scene, snapshot: &Snapshot, detection: &BoxDetection) -> Vec<Pixel>;
}

/// Reads object identity straight from the renderer's hit buffer.
#[derive(Debug, Clone, Copy)]
pub struct GroundTruthDetector {
    pub min_pixels: usize,
}

impl Default for GroundTruthDetector {
    fn default() -> Self {
        Self { min_pixels: DEFAULT_MIN_PIXELS }
    }
}

fn pixels_by_object(snapshot: &Snapshot) -> BTreeMap<usize, Vec<Pixel>> {
    let mut out: BTreeMap<usize, Vec<Pixel>> = BTreeMap::new();
    for y in 0..snapshot.height {
        for x in 0..snapshot.width {
            if let Some(k) = snapshot.hit_at(x, y) {
                out.entry(k).or_default().push(Pixel { x, y });
            }
        }
    }
    out
}

impl Detector for GroundTruthDetector {
    fn detect(&self, scene: &Scene, snapshot: &Snapshot) -> Vec<BoxDetection> {
        pixels_by_object(snapshot)
            .into_iter()
            .filter(|(_, px)| px.len() >= self.min_pixels.max(1))
            .filter_map(|(k, px)| {
                let obj = &scene.objects()[k];
                Some(BoxDetection {
                    label: obj.kind.clone(),
                    object_name: obj.name.clone(),
                    bbox: BBox::enclosing(&px)?,
                })
            })
            .collect()
    }
}

/// Exact segmentation: every pixel in the box whose ray hit the detected object.
#[derive(Debug, Clone, Copy, Default)]
pub struct GroundTruthSegmenter;

impl Segmenter for GroundTruthSegmenter {
    fn segment(&self, scene: &Scene, snapshot: &Snapshot, detection: &BoxDetection) -> Vec<Pixel> {
        let Some(target) = scene.object_index(&detection.object_name) else {
            return Vec::new();
        };
        let b = detection.bbox;
        let mut mask = Vec::new();
        for y in b.y_min..=b.y_max.min(snapshot.height - 1) {
            for x in b.x_min..=b.x_max.min(snapshot.width - 1) {
                if snapshot.hit_at(x, y) == Some(target) {
                    mask.push(Pixel { x, y });
                }
            }
        }
        mask
    }
}

/// Runs detector then segmenter; drops boxes whose mask comes back empty and
/// tightens each box to its mask.
pub fn detect_objects<D: Detector + ?Sized, S: Segmenter + ?Sized>(
    scene: &Scene,
    snapshot: &Snapshot,
    detector: &D,
    segmenter: &S,
) -> Vec<Detection> {
    let mut out: Vec<Detection> = detector
        .detect(scene, snapshot)
        .into_iter()
        .filter_map(|bd| {
            let mut mask: Vec<Pixel> = segmenter
                .segment(scene, snapshot, &bd)
                .into_iter()
                .filter(|p| bd.bbox.contains(*p) && p.x < snapshot.width && p.y < snapshot.height)
                .collect();
            mask.sort_by_key(|p| (p.y, p.x));
            mask.dedup();
            let bbox = BBox::enclosing(&mask)?;
            Some(Detection {
                snapshot_index: snapshot.index,
                label: bd.label,
                object_name: bd.object_name,
                bbox,
                mask,
            })
        })
        .collect();
    out.sort_by(|a, b| (a.bbox.x_min, a.bbox.y_min, &a.object_name).cmp(&(b.bbox.x_min, b.bbox.y_min, &b.object_name)));
    out
}

/// Ground-truth detection of one snapshot.
pub fn detect_ground_truth(scene: &Scene, snapshot: &Snapshot, min_pixels: usize) -> Vec<Detection> {
    detect_objects(scene, snapshot, &GroundTruthDetector { min_pixels }, &GroundTruthSegmenter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WorldPoint;
    use crate::sensing::render::render_snapshot;
    use crate::world::{Bounds, CameraModel, SceneObject};
    use alloc::string::ToString;
    use alloc::vec;

    fn obj(name: &str, center: [f64; 3], size: [f64; 3]) -> SceneObject {
        SceneObject {
            name: name.to_string(),
            kind: "box".to_string(),
            attributes: BTreeMap::new(),
            center,
            size,
            yaw: 0.0,
        }
    }

    fn scene(objects: Vec<SceneObject>) -> Scene {
        let b = Bounds { min: WorldPoint::new(-6.0, -6.0), max: WorldPoint::new(6.0, 6.0) };
        Scene::new(b, 0.05, objects, vec![], CameraModel::default()).unwrap()
    }

    #[test]
    fn invisible_object_is_absent() {
        let s = scene(vec![obj("a", [2.0, 0.0, 0.5], [0.5, 0.5, 1.0]), obj("behind", [-3.0, 0.0, 0.5], [0.5, 0.5, 1.0])]);
        let shot = render_snapshot(&s, WorldPoint::new(0.0, 0.0), 0.0, 1);
        let dets = detect_ground_truth(&s, &shot, DEFAULT_MIN_PIXELS);
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].object_name, "a");
    }

    #[test]
    fn bbox_is_tight_around_hit_pixels() {
        let s = scene(vec![obj("a", [2.0, 0.3, 0.5], [0.5, 0.5, 1.0])]);
        let shot = render_snapshot(&s, WorldPoint::new(0.0, 0.0), 0.0, 1);
        let d = &detect_ground_truth(&s, &shot, DEFAULT_MIN_PIXELS)[0];
        let hits: Vec<Pixel> = (0..shot.height)
            .flat_map(|y| (0..shot.width).map(move |x| Pixel { x, y }))
            .filter(|p| shot.hit_at(p.x, p.y) == Some(0))
            .collect();
        assert_eq!(d.mask, hits);
        assert_eq!(Some(d.bbox), BBox::enclosing(&hits));
    }

    #[test]
    fn partially_occluded_mask_keeps_only_visible_pixels() {
        // Front slab covers the left portion of the rear box.
        let s = scene(vec![
            obj("front", [1.5, -0.2, 1.0], [0.1, 0.6, 2.0]),
            obj("rear", [3.0, 0.0, 0.5], [0.5, 1.0, 1.0]),
        ]);
        let shot = render_snapshot(&s, WorldPoint::new(0.0, 0.0), 0.0, 1);
        let dets = detect_ground_truth(&s, &shot, DEFAULT_MIN_PIXELS);
        let rear = dets.iter().find(|d| d.object_name == "rear").unwrap();
        for p in &rear.mask {
            assert_eq!(shot.hit_at(p.x, p.y), Some(1));
        }
        // Unoccluded render of the rear box alone has strictly more pixels.
        let alone = scene(vec![obj("rear", [3.0, 0.0, 0.5], [0.5, 1.0, 1.0])]);
        let shot_alone = render_snapshot(&alone, WorldPoint::new(0.0, 0.0), 0.0, 1);
        let full = detect_ground_truth(&alone, &shot_alone, DEFAULT_MIN_PIXELS);
        assert!(rear.mask.len() < full[0].mask.len());
        assert!(rear.mask.iter().all(|p| full[0].mask.contains(p)));
    }
}
