use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::fmt;

#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

use crate::geometry::{normalize_angle, WorldPoint};
use crate::world::{CameraModel, Pose, Scene, SceneObject};

/// Intersections closer than this to the camera are ignored.
const MIN_HIT_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum RenderError {
    ZeroSnapshots,
    PoseInsideObject { object: alloc::string::String },
}

impl fmt::Display for RenderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RenderError::ZeroSnapshots => write!(f, "snapshot count must be at least 1"),
            RenderError::PoseInsideObject { object } => {
                write!(f, "pose lies inside the footprint of `{object}`")
            }
        }
    }
}

impl core::error::Error for RenderError {}

/// One synthetic RGB-D frame of a panoramic sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// 1-based position in the sweep.
    pub index: usize,
    /// Camera yaw in the map frame.
    pub heading: f64,
    pub width: u32,
    pub height: u32,
    /// Euclidean ray length per pixel, row-major; `+∞` where nothing is hit.
    pub depth: Vec<f64>,
    /// Index into `Scene::objects()` of the surface seen by each pixel.
    pub hit_object: Vec<Option<usize>>,
}

impl Snapshot {
    fn offset(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn depth_at(&self, x: u32, y: u32) -> f64 {
        self.depth[self.offset(x, y)]
    }

    pub fn hit_at(&self, x: u32, y: u32) -> Option<usize> {
        self.hit_object[self.offset(x, y)]
    }

    pub fn set_depth(&mut self, x: u32, y: u32, d: f64) {
        let i = self.offset(x, y);
        self.depth[i] = d;
    }

    /// Pose of the camera for this frame.
    pub fn camera_pose(&self, base: &Pose) -> Pose {
        Pose::new(base.position, self.heading)
    }
}

/// Yaw of snapshot `index` (1-based) in a sweep of `omega` frames.
pub fn snapshot_heading(base_heading: f64, index: usize, omega: usize) -> f64 {
    normalize_angle(base_heading + (index - 1) as f64 * TAU / omega as f64)
}

/// Unit ray direction for pixel `(x, y)` of a camera yawed to `heading`.
pub fn pixel_ray(camera: &CameraModel, heading: f64, x_p: f64, y_p: f64) -> [f64; 3] {
    let azimuth = camera.azimuth(x_p) + heading;
    let elevation = camera.elevation(y_p);
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    [ce * ca, ce * sa, -se]
}

/// Distance along a unit ray to the entry point of an object's box, if any.
pub fn ray_box_distance(origin: [f64; 3], dir: [f64; 3], obj: &SceneObject) -> Option<f64> {
    let rel = WorldPoint::new(origin[0] - obj.center[0], origin[1] - obj.center[1]).rotated(-obj.yaw);
    let d_xy = WorldPoint::new(dir[0], dir[1]).rotated(-obj.yaw);
    let o = [rel.x, rel.y, origin[2] - obj.center[2]];
    let d = [d_xy.x, d_xy.y, dir[2]];
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for axis in 0..3 {
        let half = obj.size[axis] / 2.0;
        if d[axis].abs() < 1e-15 {
            if o[axis].abs() > half {
                return None;
            }
            continue;
        }
        let t1 = (-half - o[axis]) / d[axis];
        let t2 = (half - o[axis]) / d[axis];
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        t_near = t_near.max(lo);
        t_far = t_far.min(hi);
        if t_near > t_far {
            return None;
        }
    }
    (t_near > MIN_HIT_DISTANCE).then_some(t_near)
}

/// Renders one frame at `heading`.
pub fn render_snapshot(scene: &Scene, position: WorldPoint, heading: f64, index: usize) -> Snapshot {
    let camera = scene.camera();
    let (w, h) = (camera.width_px, camera.height_px);
    let origin = [position.x, position.y, camera.mount_height];
    let n = w as usize * h as usize;
    let mut depth = alloc::vec![f64::INFINITY; n];
    let mut hit_object = alloc::vec![None; n];
    for y in 0..h {
        for x in 0..w {
            let dir = pixel_ray(camera, heading, x as f64, y as f64);
            let i = y as usize * w as usize + x as usize;
            for (k, obj) in scene.objects().iter().enumerate() {
                if let Some(t) = ray_box_distance(origin, dir, obj) {
                    if t < depth[i] {
                        depth[i] = t;
                        hit_object[i] = Some(k);
                    }
                }
            }
        }
    }
    Snapshot { index, heading, width: w, height: h, depth, hit_object }
}

/// Rotates in place and captures `omega` frames evenly spaced over a full turn.
pub fn take_snapshots(scene: &Scene, pose: &Pose, omega: usize) -> Result<Vec<Snapshot>, RenderError> {
    if omega == 0 {
        return Err(RenderError::ZeroSnapshots);
    }
    if let Some(obj) = scene.objects().iter().find(|o| o.footprint().contains(pose.position, 0.0)) {
        return Err(RenderError::PoseInsideObject { object: obj.name.clone() });
    }
    Ok((1..=omega)
        .map(|i| render_snapshot(scene, pose.position, snapshot_heading(pose.heading, i, omega), i))
        .collect())
}
