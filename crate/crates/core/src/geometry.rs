//! Planar geometry shared by the world model, projection and spatial relations.

use core::f64::consts::{PI, TAU};
use core::ops::{Add, Sub};

#[allow(unused_imports)] // inherent methods win when std is linked
use num_traits::Float;

/// Wraps an angle in radians into `(-π, π]`.
pub fn normalize_angle(angle: f64) -> f64 {
    let mut r = angle - TAU * (angle / TAU).floor();
    if r >= TAU {
        r -= TAU;
    }
    if r > PI {
        r -= TAU;
    }
    r
}

/// A point (or offset) in the map frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: WorldPoint) -> f64 {
        (*self - other).norm()
    }

    pub fn dot(&self, other: WorldPoint) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Rotates counter-clockwise about the origin.
    pub fn rotated(&self, angle: f64) -> WorldPoint {
        let (s, c) = angle.sin_cos();
        WorldPoint::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Bearing of this offset, radians in `(-π, π]`.
    pub fn bearing(&self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for WorldPoint {
    type Output = WorldPoint;
    fn add(self, rhs: WorldPoint) -> WorldPoint {
        WorldPoint::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for WorldPoint {
    type Output = WorldPoint;
    fn sub(self, rhs: WorldPoint) -> WorldPoint {
        WorldPoint::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// Distance from `p` to the closed segment `a`-`b`.
pub fn point_segment_distance(p: WorldPoint, a: WorldPoint, b: WorldPoint) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(WorldPoint::new(a.x + t * ab.x, a.y + t * ab.y))
}

/// Ground-plane footprint of a yaw-rotated box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub center: WorldPoint,
    pub half_extents: (f64, f64),
    pub yaw: f64,
}

impl Footprint {
    pub fn corners(&self) -> [WorldPoint; 4] {
        let (hx, hy) = self.half_extents;
        [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)]
            .map(|(x, y)| self.center + WorldPoint::new(x, y).rotated(self.yaw))
    }

    fn axes(&self) -> [WorldPoint; 2] {
        let (s, c) = self.yaw.sin_cos();
        [WorldPoint::new(c, s), WorldPoint::new(-s, c)]
    }

    /// Offset of `p` expressed in the box frame.
    pub fn to_local(&self, p: WorldPoint) -> WorldPoint {
        (p - self.center).rotated(-self.yaw)
    }

    /// Closed containment with slack `tol`.
    pub fn contains(&self, p: WorldPoint, tol: f64) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.half_extents.0 + tol && l.y.abs() <= self.half_extents.1 + tol
    }

    /// Euclidean distance from `p` to the footprint; zero inside.
    pub fn distance_to_point(&self, p: WorldPoint) -> f64 {
        let l = self.to_local(p);
        let dx = (l.x.abs() - self.half_extents.0).max(0.0);
        let dy = (l.y.abs() - self.half_extents.1).max(0.0);
        dx.hypot(dy)
    }

    /// Boundary-to-boundary distance; zero when the footprints touch or overlap.
    pub fn distance_to(&self, other: &Footprint) -> f64 {
        if self.overlap_depth(&other.corners(), &other.axes()) >= 0.0 {
            return 0.0;
        }
        let a = self.corners();
        let b = other.corners();
        let mut best = f64::INFINITY;
        for p in a {
            best = best.min(other.distance_to_point(p));
        }
        for p in b {
            best = best.min(self.distance_to_point(p));
        }
        best
    }

    /// True when the interiors of the footprint and the axis-aligned square
    /// `[min, max]` intersect by more than `eps` along every separating axis.
    pub fn overlaps_rect_interior(&self, min: WorldPoint, max: WorldPoint, eps: f64) -> bool {
        let rect = [
            min,
            WorldPoint::new(max.x, min.y),
            max,
            WorldPoint::new(min.x, max.y),
        ];
        let rect_axes = [WorldPoint::new(1.0, 0.0), WorldPoint::new(0.0, 1.0)];
        self.overlap_depth(&rect, &rect_axes) > eps
    }

    /// Smallest projected overlap over the separating axes of both polygons;
    /// negative when separated.
    fn overlap_depth(&self, other: &[WorldPoint; 4], other_axes: &[WorldPoint; 2]) -> f64 {
        let mine = self.corners();
        let mut depth = f64::INFINITY;
        for axis in self.axes().iter().chain(other_axes.iter()) {
            let (a0, a1) = project(&mine, *axis);
            let (b0, b1) = project(other, *axis);
            depth = depth.min(a1.min(b1) - a0.max(b0));
        }
        depth
    }
}

fn project(poly: &[WorldPoint; 4], axis: WorldPoint) -> (f64, f64) {
    poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p.dot(axis);
        (lo.min(d), hi.max(d))
    })
}
