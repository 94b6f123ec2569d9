//! Stabilized finite element solver for unique continuation of the
//! time-harmonic Lamé system in two dimensions.

pub mod coefficients;
pub mod element;
pub mod error;
pub mod forms;
pub mod jet;
pub mod manufactured;
pub mod mesh;
pub mod metrics;
pub mod noise;
pub mod sparse;
pub mod system;

pub use coefficients::{MaterialModel, MaterialVariant, Phase, RhoSign};
pub use error::{Error, Result};
pub use forms::{FeSpace, StabilizationParams};
pub use manufactured::ReferenceSolution;
pub use mesh::{Geometry, Mesh, Point, Rect, Region};
pub use metrics::{ConvergenceRow, ConvergenceTable, RegionError};
pub use noise::NoiseSpec;
pub use sparse::CsrMatrix;
pub use system::{build_system, DataMode, ProblemKind, SaddleSystem, SystemOptions};
