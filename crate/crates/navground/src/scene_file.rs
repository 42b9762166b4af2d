//! JSON scene documents. Angles are degrees on disk and radians in memory.

use std::fs;
use std::path::Path;

use navground_core::world::{Bounds, CameraModel, Pose, Scene, SceneError, SceneObject, DEFAULT_RESOLUTION};
use navground_core::WorldPoint;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum SceneFileError {
    #[error("{origin}:{line}:{column}: {message}\n  | {source_line}")]
    Parse { origin: String, line: usize, column: usize, message: String, source_line: String },
    #[error("{origin}: {source}")]
    Invalid { origin: String, source: SceneError },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsDoc {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraDoc {
    pub fov_x_deg: f64,
    pub fov_y_deg: f64,
    pub width_px: u32,
    pub height_px: u32,
    pub mount_height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectDoc {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, String>,
    pub center: [f64; 3],
    pub size: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseDoc {
    pub position: [f64; 2],
    #[serde(default)]
    pub heading_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDoc {
    pub bounds: BoundsDoc,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default)]
    pub camera: Option<CameraDoc>,
    pub objects: Vec<ObjectDoc>,
    #[serde(default)]
    pub snapshot_points: Vec<PoseDoc>,
}

fn default_resolution() -> f64 {
    DEFAULT_RESOLUTION
}

// Nine decimals keep degree values written by hand exact across a round trip.
fn degrees(rad: f64) -> f64 {
    (rad.to_degrees() * 1e9).round() / 1e9
}

impl CameraDoc {
    pub fn to_model(&self) -> CameraModel {
        CameraModel {
            fov_x: self.fov_x_deg.to_radians(),
            fov_y: self.fov_y_deg.to_radians(),
            width_px: self.width_px,
            height_px: self.height_px,
            mount_height: self.mount_height,
        }
    }

    pub fn from_model(c: &CameraModel) -> Self {
        Self {
            fov_x_deg: degrees(c.fov_x),
            fov_y_deg: degrees(c.fov_y),
            width_px: c.width_px,
            height_px: c.height_px,
            mount_height: c.mount_height,
        }
    }
}

impl SceneDoc {
    pub fn to_scene(&self) -> Result<Scene, SceneError> {
        let bounds = Bounds {
            min: WorldPoint::new(self.bounds.min[0], self.bounds.min[1]),
            max: WorldPoint::new(self.bounds.max[0], self.bounds.max[1]),
        };
        let objects = self
            .objects
            .iter()
            .map(|o| SceneObject {
                name: o.name.clone(),
                kind: o.kind.clone(),
                attributes: o.attributes.clone(),
                center: o.center,
                size: o.size,
                yaw: o.yaw_deg.to_radians(),
            })
            .collect();
        let points = self
            .snapshot_points
            .iter()
            .map(|p| Pose::new(WorldPoint::new(p.position[0], p.position[1]), p.heading_deg.to_radians()))
            .collect();
        let camera = self.camera.as_ref().map_or_else(CameraModel::default, CameraDoc::to_model);
        Scene::new(bounds, self.resolution, objects, points, camera)
    }

    pub fn from_scene(scene: &Scene) -> Self {
        let b = scene.bounds();
        Self {
            bounds: BoundsDoc { min: [b.min.x, b.min.y], max: [b.max.x, b.max.y] },
            resolution: scene.resolution(),
            camera: Some(CameraDoc::from_model(scene.camera())),
            objects: scene
                .objects()
                .iter()
                .map(|o| ObjectDoc {
                    name: o.name.clone(),
                    kind: o.kind.clone(),
                    attributes: o.attributes.clone(),
                    center: o.center,
                    size: o.size,
                    yaw_deg: degrees(o.yaw),
                })
                .collect(),
            snapshot_points: scene
                .snapshot_points()
                .iter()
                .map(|p| PoseDoc { position: [p.position.x, p.position.y], heading_deg: degrees(p.heading) })
                .collect(),
        }
    }
}

/// Turns a serde_json error into a located parse error quoting the line.
pub(crate) fn json_error(text: &str, e: &serde_json::Error) -> (usize, usize, String, String) {
    let line = e.line();
    let source_line = text.lines().nth(line.saturating_sub(1)).unwrap_or("").trim_end().to_string();
    let message = e.to_string();
    // serde_json appends " at line L column C"; the location is reported separately.
    let message = match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message,
    };
    (line, e.column(), message, source_line)
}

/// Parses a scene document. `origin` names the source in error messages.
pub fn load_scene(text: &str, origin: &str) -> Result<Scene, SceneFileError> {
    let doc: SceneDoc = serde_json::from_str(text).map_err(|e| {
        let (line, column, message, source_line) = json_error(text, &e);
        SceneFileError::Parse { origin: origin.to_string(), line, column, message, source_line }
    })?;
    doc.to_scene().map_err(|source| SceneFileError::Invalid { origin: origin.to_string(), source })
}

pub fn read_scene(path: &Path) -> Result<Scene, SceneFileError> {
    let text = fs::read_to_string(path).map_err(|source| SceneFileError::Io { path: path.display().to_string(), source })?;
    load_scene(&text, &path.display().to_string())
}

/// Pretty-printed scene document.
pub fn scene_to_string(scene: &Scene) -> String {
    let mut s = serde_json::to_string_pretty(&SceneDoc::from_scene(scene)).expect("scene documents always serialize");
    s.push('\n');
    s
}
