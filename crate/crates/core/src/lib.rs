//! Deterministic simulator and benchmark harness for viewpoint planning and
//! minimally invasive pushing in confined shelf spaces.
//!
//! The world is a shelf compartment holding upright boxes and cylinders
//! ([`scene`]). A synthetic depth camera ray-casts it ([`sensor`]) and the
//! returns are fused into a 2.5D occupancy height map ([`mapping`]). The
//! [`episode`] module wraps map updates into a step/observation/reward loop,
//! [`push`] samples, simulates and scores push actions, and [`bench`] runs
//! planners and the full view/push pipeline over seeded scene batches.

pub mod bench;
pub mod episode;
pub mod export;
pub mod geometry;
pub mod mapping;
pub mod par;
pub mod push;
pub mod scene;
pub mod sensor;

pub use geometry::{Vec2, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid shelf: {0}")]
    InvalidShelf(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("placed {placed} of {requested} objects before hitting the rejection cap")]
    PlacementFailed { placed: usize, requested: usize },
    #[error("object id mismatch: {0}")]
    IdMismatch(String),
    #[error("camera pose outside the workspace: {0}")]
    InvalidPose(String),
    #[error("episode already finished")]
    EpisodeDone,
    #[error("push start ({x:.3}, {y:.3}) lies outside the map")]
    StartOutsideMap { x: f64, y: f64 },
    #[error("push candidate at ({x:.3}, {y:.3}) touches no object")]
    NoContact { x: f64, y: f64 },
    #[error("no valid candidate poses")]
    NoCandidates,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
