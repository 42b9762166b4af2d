//! Synthetic environment: scene objects, camera, poses and the offline occupancy map.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

use crate::geometry::{normalize_angle, Footprint, WorldPoint};

/// Default grid resolution, meters per cell.
pub const DEFAULT_RESOLUTION: f64 = 0.05;

/// Slack used when deciding whether a footprint intersects a cell.
pub const RASTER_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum SceneError {
    NonPositiveResolution(f64),
    EmptyBounds,
    InvalidCamera(&'static str),
    NonFinite { object: String },
    InvalidSize { object: String },
    OutOfBounds { object: String },
    DuplicateName { object: String },
    SnapshotPointOutOfBounds { index: usize },
}

impl fmt::Display for SceneError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneError::NonPositiveResolution(r) => write!(f, "resolution must be positive, got {r}"),
            SceneError::EmptyBounds => write!(f, "bounds must have min < max on both axes"),
            SceneError::InvalidCamera(why) => write!(f, "invalid camera: {why}"),
            SceneError::NonFinite { object } => write!(f, "object `{object}` has non-finite geometry"),
            SceneError::InvalidSize { object } => write!(f, "object `{object}` must have positive size"),
            SceneError::OutOfBounds { object } => {
                write!(f, "footprint of object `{object}` leaves the scene bounds")
            }
            SceneError::DuplicateName { object } => write!(f, "duplicate object name `{object}`"),
            SceneError::SnapshotPointOutOfBounds { index } => {
                write!(f, "snapshot point {index} lies outside the scene bounds")
            }
        }
    }
}

impl core::error::Error for SceneError {}

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: WorldPoint,
    pub max: WorldPoint,
}

impl Bounds {
    pub fn contains(&self, p: WorldPoint, tol: f64) -> bool {
        p.x >= self.min.x - tol && p.x <= self.max.x + tol && p.y >= self.min.y - tol && p.y <= self.max.y + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: WorldPoint,
    /// Radians in `(-π, π]`.
    pub heading: f64,
}

impl Pose {
    pub fn new(position: WorldPoint, heading: f64) -> Self {
        Self { position, heading: normalize_angle(heading) }
    }

    /// Signed azimuth of `p` relative to the heading, `(-π, π]`.
    pub fn azimuth_to(&self, p: WorldPoint) -> f64 {
        normalize_angle((p - self.position).bearing() - self.heading)
    }
}

/// Equiangular RGB-D camera: pixel offsets map linearly to ray angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub fov_x: f64,
    pub fov_y: f64,
    pub width_px: u32,
    pub height_px: u32,
    pub mount_height: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            fov_x: PI / 2.0,
            fov_y: PI / 3.0,
            width_px: 160,
            height_px: 120,
            mount_height: 1.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.fov_x > 0.0 && self.fov_x < PI) {
            return Err(SceneError::InvalidCamera("fov_x must lie in (0, 180) degrees"));
        }
        if !(self.fov_y > 0.0 && self.fov_y < PI) {
            return Err(SceneError::InvalidCamera("fov_y must lie in (0, 180) degrees"));
        }
        if self.width_px < 2 || self.height_px < 2 {
            return Err(SceneError::InvalidCamera("image must be at least 2x2 pixels"));
        }
        if !self.mount_height.is_finite() {
            return Err(SceneError::InvalidCamera("mount height must be finite"));
        }
        Ok(())
    }

    /// Image center `(x_c, y_c)` in pixel coordinates.
    pub fn center(&self) -> (f64, f64) {
        ((self.width_px as f64 - 1.0) / 2.0, (self.height_px as f64 - 1.0) / 2.0)
    }

    /// Azimuth of a (possibly fractional) pixel column relative to the optical axis.
    pub fn azimuth(&self, x_p: f64) -> f64 {
        self.fov_x / self.width_px as f64 * (x_p - self.center().0)
    }

    /// Elevation of a pixel row, positive downward.
    pub fn elevation(&self, y_p: f64) -> f64 {
        self.fov_y / self.height_px as f64 * (y_p - self.center().1)
    }

    /// Angular width of one pixel column.
    pub fn pixel_azimuth_step(&self) -> f64 {
        self.fov_x / self.width_px as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub name: String,
    pub kind: String,
    pub attributes: BTreeMap<String, String>,
    pub center: [f64; 3],
    pub size: [f64; 3],
    /// Facing direction, radians in `(-π, π]`.
    pub yaw: f64,
}

impl SceneObject {
    pub fn footprint(&self) -> Footprint {
        Footprint {
            center: self.centroid(),
            half_extents: (self.size[0] / 2.0, self.size[1] / 2.0),
            yaw: self.yaw,
        }
    }

    /// Ground-plane footprint centroid.
    pub fn centroid(&self) -> WorldPoint {
        WorldPoint::new(self.center[0], self.center[1])
    }

    pub fn z_range(&self) -> (f64, f64) {
        (self.center[2] - self.size[2] / 2.0, self.center[2] + self.size[2] / 2.0)
    }

    fn validate(&self) -> Result<(), SceneError> {
        let finite = self.center.iter().chain(self.size.iter()).all(|v| v.is_finite()) && self.yaw.is_finite();
        if !finite {
            return Err(SceneError::NonFinite { object: self.name.clone() });
        }
        if self.size.iter().any(|&s| s <= 0.0) {
            return Err(SceneError::InvalidSize { object: self.name.clone() });
        }
        Ok(())
    }
}

/// A validated synthetic world.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    bounds: Bounds,
    resolution: f64,
    objects: Vec<SceneObject>,
    snapshot_points: Vec<Pose>,
    camera: CameraModel,
}

impl Scene {
    pub fn new(
        bounds: Bounds,
        resolution: f64,
        mut objects: Vec<SceneObject>,
        snapshot_points: Vec<Pose>,
        camera: CameraModel,
    ) -> Result<Self, SceneError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(SceneError::NonPositiveResolution(resolution));
        }
        if !(bounds.min.x < bounds.max.x && bounds.min.y < bounds.max.y) {
            return Err(SceneError::EmptyBounds);
        }
        camera.validate()?;
        let mut names = BTreeSet::new();
        for obj in &mut objects {
            obj.validate()?;
            obj.yaw = normalize_angle(obj.yaw);
            if !names.insert(obj.name.clone()) {
                return Err(SceneError::DuplicateName { object: obj.name.clone() });
            }
            if !obj.footprint().corners().iter().all(|c| bounds.contains(*c, 1e-9)) {
                return Err(SceneError::OutOfBounds { object: obj.name.clone() });
            }
        }
        let snapshot_points: Vec<Pose> = snapshot_points
            .into_iter()
            .map(|p| Pose::new(p.position, p.heading))
            .collect();
        for (index, p) in snapshot_points.iter().enumerate() {
            if !bounds.contains(p.position, 0.0) {
                return Err(SceneError::SnapshotPointOutOfBounds { index });
            }
        }
        Ok(Self { bounds, resolution, objects, snapshot_points, camera })
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn snapshot_points(&self) -> &[Pose] {
        &self.snapshot_points
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    pub fn object(&self, name: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn object_index(&self, name: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.name == name)
    }

    /// Returns a copy with a different camera, re-validated.
    pub fn with_camera(&self, camera: CameraModel) -> Result<Self, SceneError> {
        camera.validate()?;
        let mut s = self.clone();
        s.camera = camera;
        Ok(s)
    }

    /// Returns a copy with one more object, re-validated.
    pub fn with_object(&self, object: SceneObject) -> Result<Self, SceneError> {
        let mut objects = self.objects.clone();
        objects.push(object);
        Scene::new(self.bounds, self.resolution, objects, self.snapshot_points.clone(), self.camera)
    }
}

/// Grid cell index; `row` follows +y, `col` follows +x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Chebyshev distance; 1 means 8-adjacent.
    pub fn chebyshev(&self, other: Cell) -> usize {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: WorldPoint,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    /// All-free grid. Panics if `resolution` is not positive.
    pub fn new(width: usize, height: usize, resolution: f64, origin: WorldPoint) -> Self {
        assert!(resolution > 0.0, "grid resolution must be positive");
        Self { width, height, resolution, origin, cells: alloc::vec![false; width * height] }
    }

    /// Smallest all-free grid whose extent covers `bounds`.
    pub fn covering(bounds: Bounds, resolution: f64) -> Self {
        let w = ((bounds.max.x - bounds.min.x) / resolution - RASTER_EPS).ceil().max(1.0) as usize;
        let h = ((bounds.max.y - bounds.min.y) / resolution - RASTER_EPS).ceil().max(1.0) as usize;
        Self::new(w, h, resolution, bounds.min)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> WorldPoint {
        self.origin
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.contains(cell) && self.cells[cell.row * self.width + cell.col]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.contains(cell) && !self.cells[cell.row * self.width + cell.col]
    }

    pub fn set_occupied(&mut self, cell: Cell, occupied: bool) {
        assert!(self.contains(cell), "cell {cell:?} outside grid");
        self.cells[cell.row * self.width + cell.col] = occupied;
    }

    pub fn occupied_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(move |(i, _)| Cell::new(i / self.width, i % self.width))
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&o| o).count()
    }

    /// Cell containing `p`, using half-open `[min, max)` cell extents.
    pub fn cell_of(&self, p: WorldPoint) -> Option<Cell> {
        let cx = ((p.x - self.origin.x) / self.resolution).floor();
        let cy = ((p.y - self.origin.y) / self.resolution).floor();
        if !(cx >= 0.0 && cy >= 0.0) {
            return None;
        }
        let cell = Cell::new(cy as usize, cx as usize);
        self.contains(cell).then_some(cell)
    }

    pub fn cell_center(&self, cell: Cell) -> WorldPoint {
        WorldPoint::new(
            self.origin.x + (cell.col as f64 + 0.5) * self.resolution,
            self.origin.y + (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn cell_min(&self, cell: Cell) -> WorldPoint {
        WorldPoint::new(
            self.origin.x + cell.col as f64 * self.resolution,
            self.origin.y + cell.row as f64 * self.resolution,
        )
    }

    /// In-grid 8-neighbours in row-major order.
    pub fn neighbors8(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        const OFFSETS: [(isize, isize); 8] =
            [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        OFFSETS.iter().filter_map(move |&(dr, dc)| self.offset(cell, dr, dc))
    }

    pub fn offset(&self, cell: Cell, dr: isize, dc: isize) -> Option<Cell> {
        let r = cell.row.checked_add_signed(dr)?;
        let c = cell.col.checked_add_signed(dc)?;
        let n = Cell::new(r, c);
        self.contains(n).then_some(n)
    }

    /// Marks every cell whose interior intersects `fp`.
    pub fn fill_footprint(&mut self, fp: &Footprint) {
        for cell in self.cells_touching(fp) {
            self.set_occupied(cell, true);
        }
    }

    /// Cells whose interior intersects the footprint interior.
    pub fn cells_touching(&self, fp: &Footprint) -> Vec<Cell> {
        let corners = fp.corners();
        let (mut lo, mut hi) = (corners[0], corners[0]);
        for c in &corners[1..] {
            lo = WorldPoint::new(lo.x.min(c.x), lo.y.min(c.y));
            hi = WorldPoint::new(hi.x.max(c.x), hi.y.max(c.y));
        }
        let to_index = |v: f64, o: f64, n: usize| -> usize {
            (((v - o) / self.resolution).floor().max(0.0) as usize).min(n.saturating_sub(1))
        };
        let (c0, c1) = (to_index(lo.x, self.origin.x, self.width), to_index(hi.x, self.origin.x, self.width));
        let (r0, r1) = (to_index(lo.y, self.origin.y, self.height), to_index(hi.y, self.origin.y, self.height));
        let mut out = Vec::new();
        for row in r0..=r1 {
            for col in c0..=c1 {
                let cell = Cell::new(row, col);
                let min = self.cell_min(cell);
                let max = WorldPoint::new(min.x + self.resolution, min.y + self.resolution);
                if fp.overlaps_rect_interior(min, max, RASTER_EPS) {
                    out.push(cell);
                }
            }
        }
        out
    }
}

/// Offline occupancy map: a cell is occupied iff it intersects some object footprint.
pub fn rasterize_occupancy(scene: &Scene) -> OccupancyGrid {
    let mut grid = OccupancyGrid::covering(scene.bounds(), scene.resolution());
    for obj in scene.objects() {
        grid.fill_footprint(&obj.footprint());
    }
    grid
}
