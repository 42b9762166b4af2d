//! Synthetic RGB-D capture, detection, deduplication and annotation.

mod annotate;
mod dedup;
mod detect;
pub mod raster;
mod render;

pub use annotate::{annotate, AnnotatedSnapshot, Annotation, DEFAULT_TAG_OFFSET};
pub use dedup::{azimuth_interval, deduplicate, DedupConfig, ObjectEntry, DEFAULT_DEDUP_IOU};
pub use detect::{
    detect_ground_truth, detect_objects, BBox, BoxDetection, Detection, Detector, GroundTruthDetector,
    GroundTruthSegmenter, Pixel, Segmenter, DEFAULT_MIN_PIXELS,
};
pub use render::{pixel_ray, ray_box_distance, render_snapshot, snapshot_heading, take_snapshots, RenderError, Snapshot};
