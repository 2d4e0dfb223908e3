//! Differentiable triangle-soup splatting on the CPU.

pub mod appearance;
pub mod camera;
pub mod control;
pub mod eval;
pub mod error;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod optim;
pub mod planar;
pub mod render;
pub mod scene;
pub mod soup;
pub mod spatial;
pub mod synthetic;
pub mod train;

pub use camera::PinholeCamera;
pub use error::{Error, Result};
pub use geometry::{TrianglePrimitive, Vec3};
pub use soup::TriangleSoup;
