//! Assembly of the desingularized surface: crossing geometry, neck
//! scheduling, the patch atlas with its piecewise metric, surface integrals,
//! and the mesh export.

pub mod lines;
pub mod mesh;
pub mod necks;
pub mod metric;
pub mod patches;
pub mod quad;
pub mod schedule;

pub use lines::{sites, LineFrame, SingularSite};
pub use necks::{AlignedNeck, NeckShape, SeedSheet};
