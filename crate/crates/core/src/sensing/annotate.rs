use alloc::vec::Vec;

use super::dedup::ObjectEntry;
use super::detect::{BBox, Pixel};
use super::render::Snapshot;
use crate::id::ObjectId;

/// Vertical distance between a bbox's top edge and its id tag.
pub const DEFAULT_TAG_OFFSET: u32 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub object_id: ObjectId,
    pub bbox: BBox,
    pub tag_anchor: Pixel,
}

/// A snapshot overlaid with id-tagged bounding boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedSnapshot {
    pub snapshot_index: usize,
    pub annotations: Vec<Annotation>,
}

/// One annotated frame per snapshot, one annotation per entry visible in it.
pub fn annotate(snapshots: &[Snapshot], entries: &[ObjectEntry], tag_offset: u32) -> Vec<AnnotatedSnapshot> {
    snapshots
        .iter()
        .map(|shot| AnnotatedSnapshot {
            snapshot_index: shot.index,
            annotations: entries
                .iter()
                .filter_map(|e| {
                    let d = e.detection_in(shot.index)?;
                    Some(Annotation {
                        object_id: e.id.clone(),
                        bbox: d.bbox,
                        tag_anchor: Pixel { x: d.bbox.x_min, y: d.bbox.y_min.saturating_sub(tag_offset) },
                    })
                })
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::detect::Detection;
    use alloc::string::ToString;
    use alloc::vec;

    fn shot(index: usize) -> Snapshot {
        Snapshot { index, heading: 0.0, width: 160, height: 120, depth: vec![], hit_object: vec![] }
    }

    fn entry(id: &str, frames: &[usize], y_min: u32) -> ObjectEntry {
        ObjectEntry {
            id: ObjectId::new(id),
            label: "chair".to_string(),
            object_name: id.to_string(),
            detections: frames
                .iter()
                .map(|&i| Detection {
                    snapshot_index: i,
                    label: "chair".to_string(),
                    object_name: id.to_string(),
                    bbox: BBox { x_min: 5, y_min, x_max: 15, y_max: y_min + 10 },
                    mask: vec![Pixel { x: 5, y: y_min }],
                })
                .collect(),
        }
    }

    #[test]
    fn ids_are_stable_across_frames() {
        let shots: Vec<Snapshot> = (1..=8).map(shot).collect();
        let out = annotate(&shots, &[entry("chair3", &[1, 4], 30)], DEFAULT_TAG_OFFSET);
        assert_eq!(out.len(), 8);
        for a in &out {
            let expected = usize::from(a.snapshot_index == 1 || a.snapshot_index == 4);
            assert_eq!(a.annotations.len(), expected);
        }
        assert_eq!(out[0].annotations[0].object_id, out[3].annotations[0].object_id);
        assert_eq!(out[0].annotations[0].tag_anchor, Pixel { x: 5, y: 22 });
    }

    #[test]
    fn empty_entries_give_empty_annotations() {
        let shots: Vec<Snapshot> = (1..=8).map(shot).collect();
        let out = annotate(&shots, &[], DEFAULT_TAG_OFFSET);
        assert_eq!(out.len(), 8);
        assert!(out.iter().all(|a| a.annotations.is_empty()));
    }

    #[test]
    fn tag_clamps_at_top_edge() {
        let out = annotate(&[shot(1)], &[entry("chair1", &[1], 0)], DEFAULT_TAG_OFFSET);
        assert_eq!(out[0].annotations[0].tag_anchor.y, 0);
    }
}
