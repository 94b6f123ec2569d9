//! Shared fixtures for the benchmarks.

use ucp_core::mesh::{build_for_geometry, refine_uniform};
use ucp_core::{FeSpace, Geometry, MaterialModel, ReferenceSolution, StabilizationParams};

/// Convex-geometry space after `levels` refinements.
pub fn convex_space(levels: usize, p: usize) -> FeSpace {
    let mut m = build_for_geometry(&Geometry::convex(), 0.25).expect("convex geometry is fitted");
    for _ in 0..levels {
        m = refine_uniform(&m);
    }
    FeSpace::new(m, p).expect("degree in range")
}

/// Smooth material, oscillatory solution and default penalties at wavenumber `k`.
pub fn problem(k: f64, p: usize) -> (MaterialModel, ReferenceSolution, StabilizationParams) {
    (MaterialModel::smooth(k), ReferenceSolution::oscillatory(k), StabilizationParams::defaults(p))
}
