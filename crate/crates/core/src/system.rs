//! The primal-dual saddle point system, its boundary elimination, sparse
//! direct solution and condition estimation.

use std::sync::OnceLock;

use faer::prelude::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coefficients::MaterialModel;
use crate::error::{Error, Result};
use crate::forms::{
    assemble_a_h, assemble_div, assemble_div_rhs, assemble_dual_laplacian, assemble_gls, assemble_gls_rhs,
    assemble_jump, assemble_omega_mass, assemble_region_load, assemble_tikhonov, FeSpace, Source,
    StabilizationParams,
};
use crate::manufactured::ReferenceSolution;
use crate::mesh::{Point, Region};
use crate::noise::{perturb, NoiseSpec, Perturbation};
use crate::sparse::{norm_inf, CsrMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProblemKind {
    /// Data only in ω, no boundary conditions on the primal variable.
    #[default]
    IllPosed,
    /// Additionally prescribes the exact displacement on ∂Ω.
    WellPosed,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DataMode {
    #[default]
    Unperturbed,
    /// Perturbed measurements and source; `None` is rejected.
    Perturbed(Option<NoiseSpec>),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SystemOptions {
    pub kind: ProblemKind,
    pub data: DataMode,
    /// Adds `(∇·u, ∇·v)` with the exact divergence as data.
    pub divergence: bool,
}

/// Assembled blocks of the saddle point operator over full vector dofs.
#[derive(Debug, Clone)]
pub struct Blocks {
    pub omega_mass: CsrMatrix,
    /// `Σ γ_j J_j + γ_GLS h² (𝓛·,𝓛·)` (the primal stabilizer `s_γ`).
    pub s_gamma: CsrMatrix,
    pub s_alpha: CsrMatrix,
    pub divergence: Option<CsrMatrix>,
    /// `a_h + s_β`, rows indexed by the dual test function.
    pub coupling: CsrMatrix,
    pub s_star: CsrMatrix,
}

/// Linear system over the free primal and dual dofs.
pub struct SaddleSystem {
    blocks: Blocks,
    matrix: CsrMatrix,
    rhs: Vec<f64>,
    n: usize,
    primal_free: Vec<usize>,
    dual_free: Vec<usize>,
    /// Constrained primal dofs and their prescribed values.
    dirichlet: Vec<(usize, f64)>,
    perturbation: Option<Perturbation>,
    factor: OnceLock<Factorization>,
}

/// Primal and dual coefficient vectors over all vector dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutput {
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    /// `‖Ax - b‖∞ / ‖b‖∞` of the reduced system (absolute when `b = 0`).
    pub residual: f64,
    pub refinement_steps: usize,
}

/// Sparse LU factors of a square matrix.
pub struct Factorization {
    lu: Lu<usize, f64>,
    n: usize,
}

impl Factorization {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!("{}x{} matrix is not square", a.nrows(), a.ncols())));
        }
        let lu = a
            .to_faer()?
            .sp_lu()
            .map_err(|e| Error::Factorization(format!("sparse LU failed: {e:?}")))?;
        Ok(Factorization { lu, n: a.nrows() })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(&mut m);
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_transpose_in_place(&mut m);
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }
}

/// Assembles every block and the right-hand side of the optimality system.
pub fn build_system(
    space: &FeSpace,
    material: &MaterialModel,
    params: &StabilizationParams,
    solution: &ReferenceSolution,
    options: &SystemOptions,
) -> Result<SaddleSystem> {
    let p = space.degree();
    params.validate(p, material)?;
    let perturbation = match options.data {
        DataMode::Unperturbed => None,
        DataMode::Perturbed(None) => return Err(Error::MissingNoise),
        DataMode::Perturbed(Some(spec)) => Some(perturb(space, &spec)?),
    };
    let blocks = assemble_blocks(space, material, params, options.divergence)?;

    let mesh = space.mesh();
    let side = |c: usize| solution.phase_at(mesh.centroid(c));
    let u_field = move |c: usize, x: Point| solution.eval_u(side(c), x).expect("solution side resolved per cell");
    let f_field =
        move |c: usize, x: Point| solution.eval_f(material, side(c), x).expect("solution side resolved per cell");
    let du = perturbation.as_ref().map(|d| d.du.as_slice());
    let df = perturbation.as_ref().map(|d| d.df.as_slice());

    let mut rhs_u = assemble_region_load(space, Region::Data, Source::field(&u_field).with_fe(du))?;
    let gls = assemble_gls_rhs(space, material, Source::field(&f_field).with_fe(df))?;
    for (r, g) in rhs_u.iter_mut().zip(&gls) {
        *r += params.gamma_gls * g;
    }
    if options.divergence {
        let q = move |c: usize, x: Point| solution.divergence_trace(side(c), x).expect("solution side resolved per cell");
        let d = assemble_div_rhs(space, &q)?;
        rhs_u.iter_mut().zip(&d).for_each(|(r, v)| *r += v);
    }
    let rhs_z = assemble_region_load(space, Region::Domain, Source::field(&f_field).with_fe(df))?;

    let n = space.num_vector_dofs();
    let boundary: Vec<bool> = (0..n).map(|i| space.dofs().is_boundary(i / 2)).collect();
    let dual_free: Vec<usize> = (0..n).filter(|&i| !boundary[i]).collect();
    let (primal_free, dirichlet) = match options.kind {
        ProblemKind::IllPosed => ((0..n).collect(), Vec::new()),
        ProblemKind::WellPosed => {
            let ui = space.dofs().interpolate(u_field);
            (dual_free.clone(), (0..n).filter(|&i| boundary[i]).map(|i| (i, ui[i])).collect())
        }
    };
    let mut system = SaddleSystem {
        blocks,
        matrix: CsrMatrix::zeros(0, 0),
        rhs: Vec::new(),
        n,
        primal_free,
        dual_free,
        dirichlet,
        perturbation,
        factor: OnceLock::new(),
    };
    system.reduce(&rhs_u, &rhs_z);
    Ok(system)
}

fn assemble_blocks(
    space: &FeSpace,
    material: &MaterialModel,
    params: &StabilizationParams,
    divergence: bool,
) -> Result<Blocks> {
    let p = space.degree();
    let mut s_gamma = assemble_gls(space, material)?.scaled(params.gamma_gls);
    let mut coupling = assemble_a_h(space, material)?;
    for j in 1..=p {
        let (g, b) = (params.gamma(j), params.beta(j));
        if g == 0.0 && b == 0.0 {
            continue;
        }
        let jj = assemble_jump(space, material, j)?;
        if g != 0.0 {
            s_gamma = s_gamma.add_scaled(g, &jj);
        }
        if b != 0.0 {
            coupling = coupling.add_scaled(b, &jj);
        }
    }
    Ok(Blocks {
        omega_mass: assemble_omega_mass(space)?,
        s_gamma,
        s_alpha: assemble_tikhonov(space, params.alpha)?,
        divergence: if divergence { Some(assemble_div(space)?) } else { None },
        coupling,
        s_star: assemble_dual_laplacian(space)?,
    })
}

impl SaddleSystem {
    /// Builds the reduced matrix and moves prescribed primal values to the
    /// right-hand side.
    fn reduce(&mut self, rhs_u: &[f64], rhs_z: &[f64]) {
        let n = self.n;
        let np = self.primal_free.len();
        let nd = self.dual_free.len();
        let mut pmap = vec![None; n];
        for (k, &i) in self.primal_free.iter().enumerate() {
            pmap[i] = Some(k);
        }
        let mut dmap = vec![None; n];
        for (k, &i) in self.dual_free.iter().enumerate() {
            dmap[i] = Some(np + k);
        }
        let k11 = self.primal_block();
        let b = &self.blocks.coupling;
        let mut t = TripletBuilder::with_capacity(np + nd, np + nd, 2 * k11.nnz() + 2 * b.nnz());
        for (i, j, v) in k11.iter() {
            if let (Some(r), Some(c)) = (pmap[i], pmap[j]) {
                t.push(r, c, v);
            }
        }
        for (i, j, v) in b.iter() {
            // dual row i, primal column j, and its transpose
            if let (Some(r), Some(c)) = (dmap[i], pmap[j]) {
                t.push(r, c, v);
                t.push(c, r, v);
            }
        }
        for (i, j, v) in self.blocks.s_star.iter() {
            if let (Some(r), Some(c)) = (dmap[i], dmap[j]) {
                t.push(r, c, -v);
            }
        }
        self.matrix = t.build();

        let mut ud = vec![0.0; n];
        for &(i, v) in &self.dirichlet {
            ud[i] = v;
        }
        let (ku, bu) = if self.dirichlet.is_empty() {
            (vec![0.0; n], vec![0.0; n])
        } else {
            (k11.mul_vec(&ud), b.mul_vec(&ud))
        };
        let mut rhs = vec![0.0; np + nd];
        for (k, &i) in self.primal_free.iter().enumerate() {
            rhs[k] = rhs_u[i] - ku[i];
        }
        for (k, &i) in self.dual_free.iter().enumerate() {
            rhs[np + k] = rhs_z[i] - bu[i];
        }
        self.rhs = rhs;
    }

    /// `ω-mass + s_γ + s_α` (+ divergence mass).
    fn primal_block(&self) -> CsrMatrix {
        let b = &self.blocks;
        let mut k = b.omega_mass.add_scaled(1.0, &b.s_gamma).add_scaled(1.0, &b.s_alpha);
        if let Some(d) = &b.divergence {
            k = k.add_scaled(1.0, d);
        }
        k
    }

    pub fn blocks(&self) -> &Blocks {
        &self.blocks
    }

    /// Reduced matrix over `[free primal dofs; free dual dofs]`.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Full (unreduced) symmetric block matrix over `[u; z]`.
    pub fn full_matrix(&self) -> CsrMatrix {
        let n = self.n;
        let k11 = self.primal_block();
        let mut t = TripletBuilder::new(2 * n, 2 * n);
        for (i, j, v) in k11.iter() {
            t.push(i, j, v);
        }
        for (i, j, v) in self.blocks.coupling.iter() {
            t.push(n + i, j, v);
            t.push(j, n + i, v);
        }
        for (i, j, v) in self.blocks.s_star.iter() {
            t.push(n + i, n + j, -v);
        }
        t.build()
    }

    pub fn num_unknowns(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn perturbation(&self) -> Option<&Perturbation> {
        self.perturbation.as_ref()
    }

    pub fn dirichlet(&self) -> &[(usize, f64)] {
        &self.dirichlet
    }

    pub fn factorization(&self) -> Result<&Factorization> {
        if let Some(f) = self.factor.get() {
            return Ok(f);
        }
        let f = Factorization::new(&self.matrix)?;
        Ok(self.factor.get_or_init(|| f))
    }

    /// Direct solve with up to two steps of iterative refinement.
    pub fn solve(&self) -> Result<SolveOutput> {
        let lu = self.factorization()?;
        let b = &self.rhs;
        let bn = norm_inf(b);
        let scale = if bn > 0.0 { bn } else { 1.0 };
        let mut x = lu.solve(b);
        let residual = |x: &[f64]| -> Vec<f64> {
            let ax = self.matrix.mul_vec(x);
            b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
        };
        let mut r = residual(&x);
        let mut steps = 0;
        while steps < 2 && norm_inf(&r) / scale > 1e-14 {
            let dx = lu.solve(&r);
            let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let rc = residual(&candidate);
            steps += 1;
            if norm_inf(&rc) >= norm_inf(&r) {
                break;
            }
            x = candidate;
            r = rc;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization("solution contains non-finite values".into()));
        }
        let (u, z) = self.expand(&x);
        Ok(SolveOutput { u, z, residual: norm_inf(&r) / scale, refinement_steps: steps })
    }

    /// Full-length primal and dual vectors from a reduced solution.
    fn expand(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let np = self.primal_free.len();
        let mut u = vec![0.0; self.n];
        let mut z = vec![0.0; self.n];
        for (k, &i) in self.primal_free.iter().enumerate() {
            u[i] = x[k];
        }
        for &(i, v) in &self.dirichlet {
            u[i] = v;
        }
        for (k, &i) in self.dual_free.iter().enumerate() {
            z[i] = x[np + k];
        }
        (u, z)
    }

    fn restrict(&self, u: &[f64], z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut uu = vec![0.0; self.n];
        let mut zz = vec![0.0; self.n];
        for &i in &self.primal_free {
            uu[i] = u[i];
        }
        for &i in &self.dual_free {
            zz[i] = z[i];
        }
        (uu, zz)
    }

    /// Both sides of `A[(u,z),(u,-z)] = ‖u‖²_ω + s_γ(u,u) + s_α(u,u) + s*(z,z)`
    /// for full-length `u`, `z`; constrained entries are treated as zero.
    /// The left side uses the reduced matrix, the right side the blocks.
    pub fn inf_sup_identity(&self, u: &[f64], z: &[f64]) -> (f64, f64) {
        let (u, z) = self.restrict(u, z);
        let np = self.primal_free.len();
        let mut x = vec![0.0; self.matrix.nrows()];
        let mut y = vec![0.0; self.matrix.nrows()];
        for (k, &i) in self.primal_free.iter().enumerate() {
            x[k] = u[i];
            y[k] = u[i];
        }
        for (k, &i) in self.dual_free.iter().enumerate() {
            x[np + k] = z[i];
            y[np + k] = -z[i];
        }
        let lhs = self.matrix.bilinear(&y, &x);
        let b = &self.blocks;
        let mut rhs = b.omega_mass.quad_form(&u) + b.s_gamma.quad_form(&u) + b.s_alpha.quad_form(&u)
            + b.s_star.quad_form(&z);
        if let Some(d) = &b.divergence {
            rhs += d.quad_form(&u);
        }
        (lhs, rhs)
    }

    pub fn condition_estimate(&self) -> Result<ConditionEstimate> {
        Ok(estimate_condition(&self.matrix, self.factorization()?))
    }

    pub fn write_matrix_market<W: std::io::Write>(&self, w: W) -> Result<()> {
        self.matrix.write_matrix_market(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionEstimate {
    pub kappa: f64,
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// False if either iteration hit its cap before settling.
    pub converged: bool,
}

const POWER_CAP: usize = 1000;
const INVERSE_CAP: usize = 200;
const POWER_TOL: f64 = 1e-4;

/// `σ_max / σ_min` from power iteration on `AᵀA` and inverse iteration
/// through the LU factors.
pub fn estimate_condition(a: &CsrMatrix, lu: &Factorization) -> ConditionEstimate {
    let n = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let start: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let at = a.transpose();
    let (lmax, cmax) = power(start.clone(), POWER_CAP, |x| at.mul_vec(&a.mul_vec(x)));
    let (lmin_inv, cmin) = power(start, INVERSE_CAP, |x| lu.solve(&lu.solve_transpose(x)));
    let sigma_max = lmax.sqrt();
    let sigma_min = 1.0 / lmin_inv.sqrt();
    ConditionEstimate { kappa: sigma_max / sigma_min, sigma_max, sigma_min, converged: cmax && cmin }
}

/// Largest eigenvalue of a symmetric positive semidefinite operator.
fn power(mut x: Vec<f64>, cap: usize, apply: impl Fn(&[f64]) -> Vec<f64>) -> (f64, bool) {
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nx = norm(&x);
    if nx == 0.0 {
        return (0.0, true);
    }
    x.iter_mut().for_each(|v| *v /= nx);
    let mut lambda = 0.0;
    for _ in 0..cap {
        let y = apply(&x);
        let ny = norm(&y);
        if ny == 0.0 || !ny.is_finite() {
            return (ny, false);
        }
        let settled = (ny - lambda).abs() <= POWER_TOL * ny;
        lambda = ny;
        x = y.into_iter().map(|v| v / ny).collect();
        if settled {
            return (lambda, true);
        }
    }
    (lambda, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_for_geometry, refine_uniform, Geometry};

    fn convex_space(levels: usize, p: usize) -> FeSpace {
        let mut m = build_for_geometry(&Geometry::convex(), 0.25).unwrap();
        for _ in 0..levels {
            m = refine_uniform(&m);
        }
        FeSpace::new(m, p).unwrap()
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn condition_of_simple_matrices() {
        let id = CsrMatrix::identity(5);
        let c = estimate_condition(&id, &Factorization::new(&id).unwrap());
        assert!((c.kappa - 1.0).abs() < 1e-12 && c.converged);
        let d = CsrMatrix::diagonal(&[1.0, 1e-6]);
        let c = estimate_condition(&d, &Factorization::new(&d).unwrap());
        assert!((c.kappa / 1e6 - 1.0).abs() < 0.1, "{c:?}");
    }

    #[test]
    fn symmetric_and_identity_holds() {
        let space = convex_space(0, 2);
        let mat = MaterialModel::smooth(2.0);
        let sol = ReferenceSolution::oscillatory(2.0);
        let params = StabilizationParams::defaults(2);
        for kind in [ProblemKind::IllPosed, ProblemKind::WellPosed] {
            let opts = SystemOptions { kind, divergence: kind == ProblemKind::WellPosed, ..Default::default() };
            let s = build_system(&space, &mat, &params, &sol, &opts).unwrap();
            assert!(s.full_matrix().max_asymmetry() <= 1e-12);
            assert!(s.matrix().max_asymmetry() <= 1e-12);
            let n = space.num_vector_dofs();
            for seed in 0..5 {
                let (u, z) = (random(n, seed), random(n, seed + 100));
                let (l, r) = s.inf_sup_identity(&u, &z);
                assert!((l - r).abs() <= 1e-10 * (1.0 + r.abs()));
                let (l0, r0) = s.inf_sup_identity(&u, &vec![0.0; n]);
                assert!((l0 - r0).abs() <= 1e-10 * (1.0 + r0.abs()));
                let (l1, r1) = s.inf_sup_identity(&vec![0.0; n], &z);
                assert!((l1 - r1).abs() <= 1e-10 * (1.0 + r1.abs()));
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let space = convex_space(0, 1);
        let mat = MaterialModel::constant(1.0, 1.25, 1.0).unwrap();
        let mut sol = ReferenceSolution::oscillatory(1.0);
        sol.k = 0.0;
        let s = build_system(&space, &mat, &StabilizationParams::defaults(1), &sol, &SystemOptions::default()).unwrap();
        assert!(s.rhs().iter().all(|&v| v == 0.0));
        let out = s.solve().unwrap();
        assert!(out.u.iter().chain(&out.z).all(|&v| v == 0.0));
    }

    #[test]
    fn perturbation_requires_noise_and_only_changes_rhs() {
        let space = convex_space(0, 1);
        let mat = MaterialModel::smooth(1.0);
        let sol = ReferenceSolution::oscillatory(1.0);
        let params = StabilizationParams::defaults(1);
        let bad = SystemOptions { data: DataMode::Perturbed(None), ..Default::default() };
        assert!(matches!(build_system(&space, &mat, &params, &sol, &bad), Err(Error::MissingNoise)));
        let clean = build_system(&space, &mat, &params, &sol, &SystemOptions::default()).unwrap();
        let noisy_opts = SystemOptions { data: DataMode::Perturbed(Some(NoiseSpec::new(0, 1))), ..Default::default() };
        let noisy = build_system(&space, &mat, &params, &sol, &noisy_opts).unwrap();
        assert_eq!(clean.matrix(), noisy.matrix());
        assert_ne!(clean.rhs(), noisy.rhs());
    }

    #[test]
    fn solve_meets_residual_and_is_deterministic() {
        let space = convex_space(1, 2);
        let mat = MaterialModel::smooth(1.0);
        let sol = ReferenceSolution::oscillatory(1.0);
        let params = StabilizationParams::defaults(2);
        let s = build_system(&space, &mat, &params, &sol, &SystemOptions::default()).unwrap();
        let a = s.solve().unwrap();
        assert!(a.residual <= 1e-8, "{}", a.residual);
        let s2 = build_system(&space, &mat, &params, &sol, &SystemOptions::default()).unwrap();
        assert_eq!(a, s2.solve().unwrap());
        let mut out = Vec::new();
        s.write_matrix_market(&mut out).unwrap();
        assert!(out.starts_with(b"%%MatrixMarket"));
    }

    #[test]
    fn dual_block_residual_of_interpolant_decays() {
        // a_h(I_h u, w) - (f, w) over interior dual dofs, measured in ℓ∞
        let mat = MaterialModel::smooth(1.0);
        let sol = ReferenceSolution::oscillatory(1.0);
        let params = StabilizationParams::defaults(2);
        let res: Vec<f64> = (0..3)
            .map(|l| {
                let space = convex_space(l, 2);
                let s = build_system(&space, &mat, &params, &sol, &SystemOptions::default()).unwrap();
                let ui = space.dofs().interpolate(|c, x| sol.eval_u(sol.phase_at(space.mesh().centroid(c)), x).unwrap());
                let rz = assemble_region_load(
                    &space,
                    Region::Domain,
                    Source::field(&|_, x| sol.eval_f(&mat, None, x).unwrap()),
                )
                .unwrap();
                let au = s.blocks().coupling.mul_vec(&ui);
                (0..au.len())
                    .filter(|&i| !space.dofs().is_boundary(i / 2))
                    .map(|i| (au[i] - rz[i]).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(res[1] < res[0] && res[2] < res[1], "{res:?}");
    }
}
