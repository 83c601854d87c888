//! Superquadric proxies for 3D shapes, a line-oriented edit language over
//! them, and proxy-guided regeneration of voxel shapes by masked blending of
//! inverted latent trajectories.
//!
//! The crate is organized bottom-up:
//!
//! - [`sq`]: superquadric implicit function, poses and surface sampling
//! - [`proxy`]: primitive sets, JSON format and diffs
//! - [`dsl`]: edit scripts
//! - [`fit`]: point cloud decomposition into superquadrics
//! - [`voxel`], [`mesh`]: occupancy grids, edit masks and iso-surfaces
//! - [`warp`]: per-primitive relative transforms
//! - [`denoise`]: latent grids, the reference flow and masked blending
//! - [`metrics`]: Chamfer, localized Chamfer and IoU
//! - [`pipeline`]: the end-to-end stage runner used by the CLI

pub mod denoise;
pub mod dsl;
pub mod error;
pub mod fit;
pub mod io;
pub mod lm;
pub mod mesh;
pub mod metrics;
pub mod pipeline;
pub mod proxy;
pub mod sq;
pub mod voxel;
pub mod warp;

pub use error::{Error, Result};
pub use mesh::TriangleMesh;
pub use proxy::{Primitive, PrimitiveDiff, Proxy};
pub use sq::{Mat4, SuperquadricParams, Vec3};
pub use voxel::{MaskSet, OccupancyGrid};
