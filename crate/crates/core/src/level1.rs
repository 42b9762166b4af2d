//! Object-to-map projection.
//!
//! Each mask pixel `(x_p, y_p)` with depth `d_p` is placed on the map by
//!
//! ```text
//! Θ   = FoV_x / w · (x_p − x_c)
//! Φ   = FoV_y / h · (y_p − y_c)
//! D_h = d_p · cos Φ
//! p   = P + D_h · (cos(Θ + A), sin(Θ + A))
//! ```
//!
//! where `P`/`A` are the camera position and yaw. Height is discarded.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::WorldPoint;
use crate::id::ObjectId;
use crate::sensing::{Detection, ObjectEntry, Pixel, Snapshot};
use crate::world::{CameraModel, Cell, OccupancyGrid, Pose, Scene};

#[derive(Debug, Clone, PartialEq)]
pub enum Level1Error {
    InvalidDepth { pixel: (f64, f64), depth: f64 },
    PixelOutsideImage { pixel: (f64, f64) },
    EmptyMask { object: String },
    InfiniteDepth { object: String, pixel: Pixel },
    MissingSnapshot { index: usize },
    UnknownObject { id: ObjectId },
    NoObjects,
}

impl fmt::Display for Level1Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level1Error::InvalidDepth { pixel, depth } => {
                write!(f, "pixel ({}, {}) has invalid depth {depth}", pixel.0, pixel.1)
            }
            Level1Error::PixelOutsideImage { pixel } => {
                write!(f, "pixel ({}, {}) lies outside the image", pixel.0, pixel.1)
            }
            Level1Error::EmptyMask { object } => write!(f, "mask of `{object}` is empty"),
            Level1Error::InfiniteDepth { object, pixel } => {
                write!(f, "mask pixel ({}, {}) of `{object}` has no depth", pixel.x, pixel.y)
            }
            Level1Error::MissingSnapshot { index } => write!(f, "no snapshot with index {index}"),
            Level1Error::UnknownObject { id } => write!(f, "`{id}` does not resolve to a scene object"),
            Level1Error::NoObjects => write!(f, "online map holds no objects"),
        }
    }
}

impl core::error::Error for Level1Error {}

/// Projects one pixel with known depth onto the map plane.
///
/// `pose` is the camera pose of the frame the pixel belongs to.
pub fn project_pixel(pixel: (f64, f64), depth: f64, camera: &CameraModel, pose: &Pose) -> Result<WorldPoint, Level1Error> {
    if !(depth.is_finite() && depth > 0.0) {
        return Err(Level1Error::InvalidDepth { pixel, depth });
    }
    let (x_p, y_p) = pixel;
    let in_image = (0.0..=(camera.width_px - 1) as f64).contains(&x_p) && (0.0..=(camera.height_px - 1) as f64).contains(&y_p);
    if !in_image {
        return Err(Level1Error::PixelOutsideImage { pixel });
    }
    let theta = camera.azimuth(x_p);
    let phi = camera.elevation(y_p);
    let horizontal = depth * phi.cos();
    let (s, c) = (theta + pose.heading).sin_cos();
    Ok(pose.position + WorldPoint::new(horizontal * c, horizontal * s))
}

fn mask_depths<'a>(detection: &'a Detection, snapshot: &'a Snapshot) -> Result<Vec<(Pixel, f64)>, Level1Error> {
    if detection.mask.is_empty() {
        return Err(Level1Error::EmptyMask { object: detection.object_name.clone() });
    }
    detection
        .mask
        .iter()
        .map(|&p| {
            let d = snapshot.depth_at(p.x, p.y);
            if d.is_finite() {
                Ok((p, d))
            } else {
                Err(Level1Error::InfiniteDepth { object: detection.object_name.clone(), pixel: p })
            }
        })
        .collect()
}

/// Per-pixel projections of a detection's mask.
pub fn project_mask(detection: &Detection, snapshot: &Snapshot, camera: &CameraModel, pose: &Pose) -> Result<Vec<WorldPoint>, Level1Error> {
    let cam_pose = snapshot.camera_pose(pose);
    mask_depths(detection, snapshot)?
        .into_iter()
        .map(|(p, d)| project_pixel((p.x as f64, p.y as f64), d, camera, &cam_pose))
        .collect()
}

/// Grid cells hit by the projection of every mask pixel. Points falling
/// outside the grid are dropped.
pub fn map_object_footprint(
    detection: &Detection,
    snapshot: &Snapshot,
    camera: &CameraModel,
    pose: &Pose,
    grid: &OccupancyGrid,
) -> Result<BTreeSet<Cell>, Level1Error> {
    Ok(project_mask(detection, snapshot, camera, pose)?
        .into_iter()
        .filter_map(|p| grid.cell_of(p))
        .collect())
}

/// Average-depth position estimate: the mask's pixel centroid projected at the
/// mean mask depth.
pub fn estimate_position(detection: &Detection, snapshot: &Snapshot, camera: &CameraModel, pose: &Pose) -> Result<WorldPoint, Level1Error> {
    let samples = mask_depths(detection, snapshot)?;
    let n = samples.len() as f64;
    let (sx, sy, sd) = samples
        .iter()
        .fold((0.0, 0.0, 0.0), |(sx, sy, sd), (p, d)| (sx + p.x as f64, sy + p.y as f64, sd + d));
    project_pixel((sx / n, sy / n), sd / n, camera, &snapshot.camera_pose(pose))
}

/// Occupancy grid augmented with per-object footprints and position estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineMap {
    base: OccupancyGrid,
    footprints: BTreeMap<ObjectId, BTreeSet<Cell>>,
    positions: BTreeMap<ObjectId, WorldPoint>,
    object_names: BTreeMap<ObjectId, String>,
}

impl OnlineMap {
    /// Map with no objects on top of `base`.
    pub fn new(base: OccupancyGrid) -> Self {
        Self { base, footprints: BTreeMap::new(), positions: BTreeMap::new(), object_names: BTreeMap::new() }
    }

    /// Adds or replaces an object.
    pub fn insert(&mut self, id: ObjectId, object_name: &str, cells: BTreeSet<Cell>, position: WorldPoint) {
        self.footprints.insert(id.clone(), cells);
        self.positions.insert(id.clone(), position);
        self.object_names.insert(id, object_name.into());
    }

    pub fn base(&self) -> &OccupancyGrid {
        &self.base
    }

    pub fn footprints(&self) -> &BTreeMap<ObjectId, BTreeSet<Cell>> {
        &self.footprints
    }

    pub fn footprint(&self, id: &ObjectId) -> Option<&BTreeSet<Cell>> {
        self.footprints.get(id)
    }

    pub fn positions(&self) -> &BTreeMap<ObjectId, WorldPoint> {
        &self.positions
    }

    pub fn position(&self, id: &ObjectId) -> Option<WorldPoint> {
        self.positions.get(id).copied()
    }

    /// Scene object behind each id.
    pub fn object_name(&self, id: &ObjectId) -> Option<&str> {
        self.object_names.get(id).map(String::as_str)
    }

    /// Free in the base grid and not claimed by any object footprint.
    pub fn is_free(&self, cell: Cell) -> bool {
        self.base.is_free(cell) && !self.footprints.values().any(|f| f.contains(&cell))
    }

    /// Base grid with every footprint cell marked occupied.
    pub fn fused_grid(&self) -> OccupancyGrid {
        let mut g = self.base.clone();
        for cell in self.footprints.values().flatten() {
            g.set_occupied(*cell, true);
        }
        g
    }
}

/// Maps every entry onto the grid. Positions come from each entry's
/// detection with the largest mask.
pub fn build_online_map(
    entries: &[ObjectEntry],
    snapshots: &[Snapshot],
    camera: &CameraModel,
    pose: &Pose,
    base: OccupancyGrid,
) -> Result<OnlineMap, Level1Error> {
    let snapshot = |index: usize| {
        snapshots
            .iter()
            .find(|s| s.index == index)
            .ok_or(Level1Error::MissingSnapshot { index })
    };
    let mut map = OnlineMap::new(base);
    for entry in entries {
        let mut cells = BTreeSet::new();
        for det in &entry.detections {
            cells.extend(map_object_footprint(det, snapshot(det.snapshot_index)?, camera, pose, &map.base)?);
        }
        let best = entry.largest_detection();
        let position = estimate_position(best, snapshot(best.snapshot_index)?, camera, pose)?;
        map.insert(entry.id.clone(), &entry.object_name, cells, position);
    }
    Ok(map)
}

/// Summary statistics of position errors, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub per_object: BTreeMap<ObjectId, f64>,
}

impl ErrorReport {
    pub const ROW_LABELS: [&'static str; 4] = ["Mean Error (m)", "Standard Deviation (m)", "Min Error (m)", "Max Error (m)"];

    pub fn from_errors(per_object: BTreeMap<ObjectId, f64>) -> Result<Self, Level1Error> {
        if per_object.is_empty() {
            return Err(Level1Error::NoObjects);
        }
        let n = per_object.len() as f64;
        let mean = per_object.values().sum::<f64>() / n;
        let var = per_object.values().map(|e| (e - mean) * (e - mean)).sum::<f64>() / n;
        let min = per_object.values().copied().fold(f64::INFINITY, f64::min);
        let max = per_object.values().copied().fold(f64::NEG_INFINITY, f64::max);
        // Clamp away rounding so that min <= mean <= max holds exactly.
        Ok(Self { mean: mean.clamp(min, max), std: var.sqrt(), min, max, per_object })
    }

    /// `(label, value)` rows in table order.
    pub fn rows(&self) -> [(&'static str, f64); 4] {
        let [a, b, c, d] = Self::ROW_LABELS;
        [(a, self.mean), (b, self.std), (c, self.min), (d, self.max)]
    }
}

impl fmt::Display for ErrorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (label, value) in self.rows() {
            writeln!(f, "{label:<24}{value:>8.3}")?;
        }
        Ok(())
    }
}

/// Distance from each estimated position to its object's footprint centroid.
pub fn analyze_errors(online: &OnlineMap, scene: &Scene) -> Result<ErrorReport, Level1Error> {
    let mut per_object = BTreeMap::new();
    for (id, pos) in online.positions() {
        let obj = online
            .object_name(id)
            .and_then(|name| scene.object(name))
            .ok_or_else(|| Level1Error::UnknownObject { id: id.clone() })?;
        per_object.insert(id.clone(), pos.distance(obj.centroid()));
    }
    ErrorReport::from_errors(per_object)
}

/// Adds zero-mean Gaussian noise with standard deviation `sigma` to every
/// finite depth, keeping depths positive.
pub fn add_depth_noise<R: Rng + ?Sized>(snapshot: &mut Snapshot, sigma: f64, rng: &mut R) {
    if sigma.is_nan() || sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    for d in snapshot.depth.iter_mut().filter(|d| d.is_finite()) {
        *d = (*d + normal.sample(rng)).max(1e-6);
    }
}
