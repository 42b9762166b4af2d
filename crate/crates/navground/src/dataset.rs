//! VisDia-style dialogue datasets: a JSON document listing dialogue items and
//! the scene files they refer to.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use navground_core::grounding::{DialogueItem, GroundingContext, ItemError};
use navground_core::pipeline::{observe, Observation, ObserveConfig, PipelineError};
use navground_core::world::{CameraModel, Scene};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scene_file::{json_error, read_scene, SceneFileError};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{origin}:{line}:{column}: {message}\n  | {source_line}")]
    Parse { origin: String, line: usize, column: usize, message: String, source_line: String },
    #[error("dataset has no items")]
    Empty,
    #[error("item id `{item}` appears twice")]
    DuplicateItem { item: String },
    #[error("item `{item}`: unknown scene `{scene_ref}`")]
    UnknownScene { item: String, scene_ref: String },
    #[error("item `{item}`: scene `{scene_ref}`: {source}")]
    Scene { item: String, scene_ref: String, source: Box<SceneFileError> },
    #[error("item `{item}`: scene `{scene_ref}` has no snapshot point {index}")]
    NoSnapshotPoint { item: String, scene_ref: String, index: usize },
    #[error("item `{item}`: {source}")]
    Item { item: String, source: ItemError },
    #[error("scene `{scene_ref}`, point {index}: {source}")]
    Observation { scene_ref: String, index: usize, source: PipelineError },
}

/// On-disk dataset document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetDoc {
    #[serde(default)]
    pub name: String,
    /// Scene reference → scene file, relative to the dataset file.
    pub scenes: BTreeMap<String, PathBuf>,
    pub items: Vec<DialogueItem>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// Resolved scene file per scene reference.
    pub scene_paths: BTreeMap<String, PathBuf>,
    pub items: Vec<DialogueItem>,
}

impl Dataset {
    /// Parses a document and checks item structure. `base_dir` anchors
    /// relative scene paths.
    pub fn parse(text: &str, origin: &str, base_dir: &Path) -> Result<Self, DatasetError> {
        let doc: DatasetDoc = serde_json::from_str(text).map_err(|e| {
            let (line, column, message, source_line) = json_error(text, &e);
            DatasetError::Parse { origin: origin.to_string(), line, column, message, source_line }
        })?;
        if doc.items.is_empty() {
            return Err(DatasetError::Empty);
        }
        let mut seen = BTreeSet::new();
        for item in &doc.items {
            if !seen.insert(item.id.as_str()) {
                return Err(DatasetError::DuplicateItem { item: item.id.clone() });
            }
            if !doc.scenes.contains_key(&item.scene_ref) {
                return Err(DatasetError::UnknownScene { item: item.id.clone(), scene_ref: item.scene_ref.clone() });
            }
            item.validate().map_err(|source| DatasetError::Item { item: item.id.clone(), source })?;
        }
        let scene_paths = doc.scenes.into_iter().map(|(k, p)| (k, base_dir.join(p))).collect();
        Ok(Self { name: doc.name, scene_paths, items: doc.items })
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text, &path.display().to_string(), path.parent().unwrap_or(Path::new(".")))
    }
}

/// A dataset with its scenes loaded and every referenced snapshot point
/// observed.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub dataset: Dataset,
    pub scenes: BTreeMap<String, Scene>,
    pub observations: BTreeMap<(String, usize), Observation>,
}

impl PreparedDataset {
    /// Loads scenes and observes each referenced snapshot point once, in
    /// sorted `(scene, point)` order so depth noise is reproducible.
    /// `camera` replaces each scene's camera when given.
    pub fn prepare(
        dataset: Dataset,
        config: &ObserveConfig,
        seed: u64,
        camera: Option<&dyn Fn(&CameraModel) -> CameraModel>,
    ) -> Result<Self, DatasetError> {
        let mut scenes = BTreeMap::new();
        let mut points = BTreeSet::new();
        for item in &dataset.items {
            if !scenes.contains_key(&item.scene_ref) {
                let path = &dataset.scene_paths[&item.scene_ref];
                let scene_err = |source| DatasetError::Scene {
                    item: item.id.clone(),
                    scene_ref: item.scene_ref.clone(),
                    source: Box::new(source),
                };
                let mut scene = read_scene(path).map_err(scene_err)?;
                if let Some(f) = camera {
                    scene = scene.with_camera(f(scene.camera())).map_err(|source| {
                        scene_err(SceneFileError::Invalid { origin: path.display().to_string(), source })
                    })?;
                }
                scenes.insert(item.scene_ref.clone(), scene);
            }
            let scene = &scenes[&item.scene_ref];
            if item.snapshot_point_index >= scene.snapshot_points().len() {
                return Err(DatasetError::NoSnapshotPoint {
                    item: item.id.clone(),
                    scene_ref: item.scene_ref.clone(),
                    index: item.snapshot_point_index,
                });
            }
            points.insert((item.scene_ref.clone(), item.snapshot_point_index));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut observations = BTreeMap::new();
        for (scene_ref, index) in points {
            let scene = &scenes[&scene_ref];
            let obs = observe(scene, &scene.snapshot_points()[index], config, &mut rng)
                .map_err(|source| DatasetError::Observation { scene_ref: scene_ref.clone(), index, source })?;
            observations.insert((scene_ref, index), obs);
        }
        Ok(Self { dataset, scenes, observations })
    }

    pub fn observation(&self, item: &DialogueItem) -> &Observation {
        &self.observations[&(item.scene_ref.clone(), item.snapshot_point_index)]
    }

    /// Grounding context of an item: its scene seen from its snapshot point.
    pub fn context(&self, item: &DialogueItem) -> GroundingContext<'_> {
        let obs = self.observation(item);
        GroundingContext::new(&self.scenes[&item.scene_ref], &obs.entries, obs.pose)
    }

    /// Checks every item against constraint evaluation on its observation.
    pub fn check_items(&self) -> Result<(), DatasetError> {
        for item in &self.dataset.items {
            item.check_against(&self.context(item))
                .map_err(|source| DatasetError::Item { item: item.id.clone(), source })?;
        }
        Ok(())
    }
}
