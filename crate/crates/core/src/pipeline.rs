//! One observation from a snapshot point: panoramic capture, detection,
//! deduplication, annotation and the online map.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::level1::{add_depth_noise, build_online_map, Level1Error, OnlineMap};
use crate::sensing::{
    annotate, deduplicate, detect_ground_truth, take_snapshots, AnnotatedSnapshot, DedupConfig, Detection, ObjectEntry,
    RenderError, Snapshot, DEFAULT_MIN_PIXELS, DEFAULT_TAG_OFFSET,
};
use crate::world::{rasterize_occupancy, Pose, Scene};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserveConfig {
    /// Snapshots per full turn.
    pub omega: usize,
    /// Standard deviation of additive depth noise, meters. 0 disables it.
    pub noise_sigma: f64,
    pub min_pixels: usize,
    pub dedup: DedupConfig,
    pub tag_offset: u32,
}

impl Default for ObserveConfig {
    fn default() -> Self {
        Self {
            omega: 8,
            noise_sigma: 0.0,
            min_pixels: DEFAULT_MIN_PIXELS,
            dedup: DedupConfig::default(),
            tag_offset: DEFAULT_TAG_OFFSET,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PipelineError {
    Render(RenderError),
    Level1(Level1Error),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Render(e) => e.fmt(f),
            PipelineError::Level1(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for PipelineError {}

impl From<RenderError> for PipelineError {
    fn from(e: RenderError) -> Self {
        PipelineError::Render(e)
    }
}

impl From<Level1Error> for PipelineError {
    fn from(e: Level1Error) -> Self {
        PipelineError::Level1(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub pose: Pose,
    pub snapshots: Vec<Snapshot>,
    pub detections: Vec<Detection>,
    pub entries: Vec<ObjectEntry>,
    pub annotated: Vec<AnnotatedSnapshot>,
    pub online: OnlineMap,
}

/// Runs the whole level-1 chain from `pose`. `rng` only feeds depth noise.
pub fn observe<R: Rng + ?Sized>(
    scene: &Scene,
    pose: &Pose,
    config: &ObserveConfig,
    rng: &mut R,
) -> Result<Observation, PipelineError> {
    let mut snapshots = take_snapshots(scene, pose, config.omega)?;
    if config.noise_sigma > 0.0 {
        for s in &mut snapshots {
            add_depth_noise(s, config.noise_sigma, rng);
        }
    }
    let detections: Vec<Detection> = snapshots
        .iter()
        .flat_map(|s| detect_ground_truth(scene, s, config.min_pixels))
        .collect();
    let entries = deduplicate(&detections, &snapshots, scene.camera(), config.dedup);
    let annotated = annotate(&snapshots, &entries, config.tag_offset);
    let online = build_online_map(&entries, &snapshots, scene.camera(), pose, rasterize_occupancy(scene))?;
    Ok(Observation { pose: *pose, snapshots, detections, entries, annotated, online })
}
