//! Seeded random perturbations of the measurements and the source term.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forms::{assemble_mass, assemble_omega_mass, FeSpace};
use crate::mesh::Region;

/// Perturbations of size `c0 · h^(p - theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub theta: u32,
    pub c0: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(theta: u32, seed: u64) -> Self {
        NoiseSpec { theta, c0: 1.0, seed }
    }

    pub fn target_norm(&self, h: f64, p: usize) -> f64 {
        self.c0 * h.powi(p as i32 - self.theta as i32)
    }
}

/// Finite element coefficients of `δu` (supported on nodes of ω cells) and
/// `δf` (all nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub du: Vec<f64>,
    pub df: Vec<f64>,
}

/// Draws uniform `[-1, 1]` nodal values and rescales them so that
/// `‖δu‖_ω = ‖δf‖_Ω = c0 h^(p-θ)` exactly in the assembled L² norms.
pub fn perturb(space: &FeSpace, spec: &NoiseSpec) -> Result<Perturbation> {
    let n = space.num_vector_dofs();
    let cells = space.mesh().region_cells(Region::Data)?;
    let mut on_omega = vec![false; space.dofs().num_scalar()];
    for &c in &cells {
        for &g in space.dofs().cell_dofs(c) {
            on_omega[g] = true;
        }
    }
    if !on_omega.iter().any(|&b| b) {
        return Err(Error::EmptyDataDofs);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut du = vec![0.0; n];
    for (i, _) in on_omega.iter().enumerate().filter(|(_, &b)| b) {
        du[2 * i] = rng.random_range(-1.0..=1.0);
        du[2 * i + 1] = rng.random_range(-1.0..=1.0);
    }
    let mut df: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let target = spec.target_norm(space.h(), space.degree());
    let nu = assemble_omega_mass(space)?.quad_form(&du).sqrt();
    rescale(&mut du, nu, target);
    let nf = assemble_mass(space)?.quad_form(&df).sqrt();
    rescale(&mut df, nf, target);
    Ok(Perturbation { du, df })
}

fn rescale(v: &mut [f64], norm: f64, target: f64) {
    let s = if norm > 0.0 { target / norm } else { 0.0 };
    v.iter_mut().for_each(|x| *x *= s);
}
