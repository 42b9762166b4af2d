//! Core algorithms for grounding spoken object references on a robot's map.
//!
//! Two mappings are composed. Objects detected in a panoramic RGB-D sweep are
//! projected onto the occupancy grid (`level1`), and a multi-turn dialogue
//! narrows a natural-language reference down to one object id (`grounding`).
//! `metrics` scores dialogue runs and `mission` turns a resolved object into a
//! scheduled grid path.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod geometry;
pub mod grounding;
pub mod id;
pub mod level1;
pub mod metrics;
pub mod mission;
pub mod pipeline;
pub mod sensing;
pub mod world;

pub use geometry::WorldPoint;
pub use id::ObjectId;
