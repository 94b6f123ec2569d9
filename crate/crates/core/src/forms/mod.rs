//! Sparse assembly of every bilinear form and load vector of the stabilized
//! method over the vector Lagrange space `V_h = [X_h^p]²`.
//!
//! Cells are processed in fixed-size chunks in parallel; chunk outputs are
//! concatenated in cell order before the triplets are compressed, so results
//! do not depend on the number of threads.

mod dofmap;

pub use dofmap::DofMap;

use rayon::prelude::*;

use crate::coefficients::{MaterialJet, MaterialModel, Phase};
use crate::element::{segment_quadrature, triangle_quadrature, CellBasis, QuadratureRule, ReferenceElement};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point, Region};
use crate::sparse::{CsrMatrix, TripletBuilder};

const CHUNK: usize = 128;

/// Penalty parameters of the stabilizers. Vectors are indexed by `j - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizationParams {
    pub gamma: Vec<f64>,
    pub gamma_gls: f64,
    pub alpha: f64,
    pub beta: Vec<f64>,
}

impl StabilizationParams {
    /// γ₁ = γ_GLS = 10⁻⁵/p^3.5, α = 10⁻³, all other penalties zero.
    pub fn defaults(p: usize) -> Self {
        let g = 1e-5 / (p as f64).powf(3.5);
        let mut gamma = vec![0.0; p];
        gamma[0] = g;
        StabilizationParams { gamma, gamma_gls: g, alpha: 1e-3, beta: vec![0.0; p] }
    }

    pub fn gamma(&self, j: usize) -> f64 {
        self.gamma.get(j - 1).copied().unwrap_or(0.0)
    }

    pub fn beta(&self, j: usize) -> f64 {
        self.beta.get(j - 1).copied().unwrap_or(0.0)
    }

    /// Checks positivity of the essential penalties, `γ_j ≥ max(0, |β_j|)`
    /// for `j ≥ 2`, and that higher-order jumps are off for non-smooth
    /// coefficients.
    pub fn validate(&self, p: usize, material: &MaterialModel) -> Result<()> {
        if self.gamma.len() > p || self.beta.len() > p {
            return Err(Error::Params(format!("at most {p} jump penalties for degree {p}")));
        }
        if !(self.gamma(1) > 0.0) || !(self.gamma_gls > 0.0) || !(self.alpha > 0.0) {
            return Err(Error::Params("γ₁, γ_GLS and α must be positive".into()));
        }
        for j in 2..=p {
            if self.gamma(j) < self.beta(j).abs() {
                return Err(Error::Params(format!("γ_{j} must be at least |β_{j}|")));
            }
            if !material.is_smooth() && (self.gamma(j) != 0.0 || self.beta(j) != 0.0) {
                return Err(Error::Params(format!(
                    "γ_{j} and β_{j} must vanish for non-smooth coefficients"
                )));
            }
        }
        Ok(())
    }
}

/// Per-cell data: physical basis and mapped quadrature.
pub struct CellData {
    pub basis: CellBasis,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

/// Mesh, element, dof numbering and quadrature rules of `V_h`.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Mesh,
    element: ReferenceElement,
    dofs: DofMap,
    cell_rule: QuadratureRule,
    facet_rule: QuadratureRule,
}

impl FeSpace {
    /// Quadrature of degree `2p + 2` on cells and facets.
    pub fn new(mesh: Mesh, degree: usize) -> Result<Self> {
        Self::with_quadrature(mesh, degree, 2 * degree + 2)
    }

    pub fn with_quadrature(mesh: Mesh, degree: usize, quad_degree: usize) -> Result<Self> {
        let element = ReferenceElement::new(degree)?;
        let dofs = DofMap::new(&mesh, &element);
        Ok(FeSpace {
            mesh,
            element,
            dofs,
            cell_rule: triangle_quadrature(quad_degree),
            facet_rule: segment_quadrature(quad_degree),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn element(&self) -> &ReferenceElement {
        &self.element
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn h(&self) -> f64 {
        self.mesh.h()
    }

    pub fn num_vector_dofs(&self) -> usize {
        self.dofs.num_vector()
    }

    pub fn cell(&self, c: usize) -> CellData {
        let v = self.mesh.cell_vertices(c);
        let basis = self.element.physical_basis(&v);
        let det = ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1])).abs();
        let points = self
            .cell_rule
            .points
            .iter()
            .map(|r| {
                [
                    v[0][0] + (v[1][0] - v[0][0]) * r[0] + (v[2][0] - v[0][0]) * r[1],
                    v[0][1] + (v[1][1] - v[0][1]) * r[0] + (v[2][1] - v[0][1]) * r[1],
                ]
            })
            .collect();
        let weights = self.cell_rule.weights.iter().map(|w| w * det).collect();
        CellData { basis, points, weights }
    }

    /// Value of the finite element function `coeffs` at `x` in cell `c`.
    pub fn eval_in_cell(&self, coeffs: &[f64], c: usize, basis: &CellBasis, x: Point) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (i, &g) in self.dofs.cell_dofs(c).iter().enumerate() {
            let phi = basis.value(i, x);
            out[0] += coeffs[2 * g] * phi;
            out[1] += coeffs[2 * g + 1] * phi;
        }
        out
    }

    /// Gradient `[[∂x u₁, ∂y u₁], [∂x u₂, ∂y u₂]]` of `coeffs` at `x` in cell `c`.
    pub fn grad_in_cell(&self, coeffs: &[f64], c: usize, basis: &CellBasis, x: Point) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for (i, &g) in self.dofs.cell_dofs(c).iter().enumerate() {
            let gx = basis.derivative(i, 1, 0, x);
            let gy = basis.derivative(i, 0, 1, x);
            for a in 0..2 {
                out[a][0] += coeffs[2 * g + a] * gx;
                out[a][1] += coeffs[2 * g + a] * gy;
            }
        }
        out
    }

    fn phase(&self, material: &MaterialModel, c: usize) -> Option<Phase> {
        material.phase_at(self.mesh.centroid(c))
    }

    fn cells_of(&self, region: Region) -> Result<Vec<usize>> {
        self.mesh.region_cells(region)
    }

    /// Parallel cell loop producing a square matrix over vector dofs.
    fn assemble_matrix<F>(&self, cells: &[usize], kernel: F) -> Result<CsrMatrix>
    where
        F: Fn(usize, &CellData, &mut [f64]) -> Result<()> + Sync,
    {
        let n = self.num_vector_dofs();
        let nloc = 2 * self.element.num_basis();
        let parts: Vec<Result<TripletBuilder>> = cells
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut b = TripletBuilder::with_capacity(n, n, chunk.len() * nloc * nloc);
                let mut local = vec![0.0; nloc * nloc];
                for &c in chunk {
                    local.iter_mut().for_each(|v| *v = 0.0);
                    let data = self.cell(c);
                    kernel(c, &data, &mut local)?;
                    let dofs = self.dofs.cell_dofs(c);
                    for (r, &gr) in dofs.iter().enumerate() {
                        for a in 0..2 {
                            for (s, &gs) in dofs.iter().enumerate() {
                                for bb in 0..2 {
                                    let v = local[(2 * r + a) * nloc + 2 * s + bb];
                                    if v != 0.0 {
                                        b.push(2 * gr + a, 2 * gs + bb, v);
                                    }
                                }
                            }
                        }
                    }
                }
                Ok(b)
            })
            .collect();
        let mut all = TripletBuilder::new(n, n);
        for p in parts {
            all.append(p?);
        }
        Ok(all.build())
    }

    /// Parallel cell loop producing a load vector over vector dofs.
    fn assemble_vector<F>(&self, cells: &[usize], kernel: F) -> Result<Vec<f64>>
    where
        F: Fn(usize, &CellData, &mut [f64]) -> Result<()> + Sync,
    {
        let nloc = 2 * self.element.num_basis();
        let parts: Vec<Result<Vec<(usize, f64)>>> = cells
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut out = Vec::with_capacity(chunk.len() * nloc);
                let mut local = vec![0.0; nloc];
                for &c in chunk {
                    local.iter_mut().for_each(|v| *v = 0.0);
                    let data = self.cell(c);
                    kernel(c, &data, &mut local)?;
                    for (r, &g) in self.dofs.cell_dofs(c).iter().enumerate() {
                        out.push((2 * g, local[2 * r]));
                        out.push((2 * g + 1, local[2 * r + 1]));
                    }
                }
                Ok(out)
            })
            .collect();
        let mut rhs = vec![0.0; self.num_vector_dofs()];
        for p in parts {
            for (g, v) in p? {
                rhs[g] += v;
            }
        }
        Ok(rhs)
    }
}

/// Right-hand side data: an analytic field `f(cell, x)`, optionally plus a
/// finite element function given by its coefficients.
#[derive(Clone, Copy)]
pub struct Source<'a> {
    pub field: Option<&'a (dyn Fn(usize, Point) -> [f64; 2] + Sync)>,
    pub fe: Option<&'a [f64]>,
}

impl<'a> Source<'a> {
    pub fn field(f: &'a (dyn Fn(usize, Point) -> [f64; 2] + Sync)) -> Self {
        Source { field: Some(f), fe: None }
    }

    pub fn fe(coeffs: &'a [f64]) -> Self {
        Source { field: None, fe: Some(coeffs) }
    }

    pub fn with_fe(mut self, coeffs: Option<&'a [f64]>) -> Self {
        self.fe = coeffs;
        self
    }

    fn eval(&self, space: &FeSpace, c: usize, basis: &CellBasis, x: Point) -> [f64; 2] {
        let mut v = self.field.map_or([0.0; 2], |f| f(c, x));
        if let Some(coeffs) = self.fe {
            let w = space.eval_in_cell(coeffs, c, basis, x);
            v[0] += w[0];
            v[1] += w[1];
        }
        v
    }
}

/// Derivative of a scalar jet along a list of at most two directions.
#[inline]
fn jet_derivative(j: &crate::jet::Jet, dirs: &[usize]) -> f64 {
    match dirs {
        [] => j.value,
        [a] => j.grad[*a],
        [a, b] => j.hess[*a][*b],
        _ => unreachable!("coefficient derivatives above second order are not needed"),
    }
}

#[inline]
fn basis_derivative(basis: &CellBasis, i: usize, dirs: &[usize], x: Point) -> f64 {
    let nx = dirs.iter().filter(|&&d| d == 0).count();
    basis.derivative(i, nx, dirs.len() - nx, x)
}

/// `𝓛(φ e_a) = -∇·σ(φ e_a) - ρ φ e_a` at `x`.
pub fn operator_on_basis(m: &MaterialJet, basis: &CellBasis, i: usize, a: usize, x: Point) -> [f64; 2] {
    let phi = basis.value(i, x);
    let g = [basis.derivative(i, 1, 0, x), basis.derivative(i, 0, 1, x)];
    let hxx = basis.derivative(i, 2, 0, x);
    let hxy = basis.derivative(i, 1, 1, x);
    let hyy = basis.derivative(i, 0, 2, x);
    let hess = [[hxx, hxy], [hxy, hyy]];
    let lap = hxx + hyy;
    let mu = m.mu.value;
    let dmu = m.mu.grad;
    let la = m.lambda.value;
    let dla = m.lambda.grad;
    let gdm = dmu[0] * g[0] + dmu[1] * g[1];
    let mut out = [0.0; 2];
    for (c, o) in out.iter_mut().enumerate() {
        let d = if c == a { 1.0 } else { 0.0 };
        let div_sigma = d * (gdm + mu * lap) + dmu[a] * g[c] + (mu + la) * hess[a][c] + dla[c] * g[a];
        *o = -div_sigma - d * m.rho * phi;
    }
    out
}

/// `(∂_M σ(φ e_a)) · n` for every component `c` and every ordered
/// multi-index `M ∈ {x,y}^order`, flattened as `c · 2^order + M`.
fn stress_derivative_dot_n(
    m: &MaterialJet,
    basis: &CellBasis,
    i: usize,
    a: usize,
    order: usize,
    n: Point,
    x: Point,
    out: &mut [f64],
) {
    let nm = 1usize << order;
    let mut dirs = [0usize; 2];
    let mut sub = [0usize; 3];
    for mi in 0..nm {
        for (k, d) in dirs.iter_mut().enumerate().take(order) {
            *d = (mi >> (order - 1 - k)) & 1;
        }
        let multi = &dirs[..order];
        let mut sig = [[0.0; 2]; 2];
        // Leibniz over subsets S of the multi-index: ∂_S(coef) ∂_{M\S}(...)
        for s in 0..(1usize << order) {
            let mut coef_dirs = [0usize; 2];
            let mut nc = 0;
            let mut nr = 0;
            for (k, &d) in multi.iter().enumerate() {
                if s >> k & 1 == 1 {
                    coef_dirs[nc] = d;
                    nc += 1;
                } else {
                    sub[nr] = d;
                    nr += 1;
                }
            }
            let dmu = jet_derivative(&m.mu, &coef_dirs[..nc]);
            let dla = jet_derivative(&m.lambda, &coef_dirs[..nc]);
            if dmu == 0.0 && dla == 0.0 {
                continue;
            }
            // derivatives ∂_{M\S} ∂_e φ for e = 0, 1
            let mut dphi = [0.0; 2];
            for (e, dp) in dphi.iter_mut().enumerate() {
                sub[nr] = e;
                *dp = basis_derivative(basis, i, &sub[..nr + 1], x);
            }
            for (c, row) in sig.iter_mut().enumerate() {
                for (d, v) in row.iter_mut().enumerate() {
                    let mut t = 0.0;
                    if c == a {
                        t += dmu * dphi[d];
                    }
                    if d == a {
                        t += dmu * dphi[c];
                    }
                    if c == d {
                        t += dla * dphi[a];
                    }
                    *v += t;
                }
            }
        }
        for c in 0..2 {
            out[c * nm + mi] = sig[c][0] * n[0] + sig[c][1] * n[1];
        }
    }
}

/// `a_h(u,v) = ∫ 2μ E(u):E(v) + λ div u div v - ρ u·v`.
pub fn assemble_a_h(space: &FeSpace, material: &MaterialModel) -> Result<CsrMatrix> {
    let cells: Vec<usize> = (0..space.mesh.num_cells()).collect();
    let nb = space.element.num_basis();
    let nloc = 2 * nb;
    space.assemble_matrix(&cells, |c, data, local| {
        let phase = space.phase(material, c);
        let mut phi = vec![0.0; nb];
        let mut grad = vec![[0.0; 2]; nb];
        for (x, w) in data.points.iter().zip(&data.weights) {
            let mj = material.jet(phase, *x)?;
            let (mu, la, rho) = (mj.mu.value, mj.lambda.value, mj.rho);
            for i in 0..nb {
                phi[i] = data.basis.value(i, *x);
                grad[i] = [data.basis.derivative(i, 1, 0, *x), data.basis.derivative(i, 0, 1, *x)];
            }
            for j in 0..nb {
                for i in 0..nb {
                    let gg = grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1];
                    let pp = phi[i] * phi[j];
                    for b in 0..2 {
                        for a in 0..2 {
                            let d = if a == b { 1.0 } else { 0.0 };
                            let v = mu * (d * gg + grad[i][b] * grad[j][a]) + la * grad[i][a] * grad[j][b]
                                - rho * d * pp;
                            local[(2 * j + b) * nloc + 2 * i + a] += w * v;
                        }
                    }
                }
            }
        }
        Ok(())
    })
}

/// Continuous interior penalty term `J_j` of order `j` (1 ≤ j ≤ p):
/// `Σ_F h^{2j-1} ∫_F ⟦∇^{j-1}σ(u)·n⟧ : ⟦∇^{j-1}σ(v)·n⟧`.
pub fn assemble_jump(space: &FeSpace, material: &MaterialModel, j: usize) -> Result<CsrMatrix> {
    let p = space.degree();
    if j == 0 || j > p {
        return Err(Error::JumpOrder { order: j, degree: p });
    }
    if j > 1 && !material.is_smooth() {
        return Err(Error::Params(format!("jump order {j} requires smooth coefficients")));
    }
    let order = j - 1;
    let ncomp = 2 << order;
    let n = space.num_vector_dofs();
    let nb = space.element.num_basis();
    let weight = space.h().powi(2 * j as i32 - 1);
    let facets = space.mesh.interior_facets();
    let rule = &space.facet_rule;
    let parts: Vec<Result<TripletBuilder>> = facets
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut b = TripletBuilder::new(n, n);
            let mut dofs: Vec<usize> = Vec::with_capacity(4 * nb);
            let mut jumps = vec![0.0; 4 * nb * ncomp];
            let mut local = vec![0.0; 16 * nb * nb];
            for f in chunk {
                let bases: Vec<CellBasis> = f
                    .cells
                    .iter()
                    .map(|&c| space.element.physical_basis(&space.mesh.cell_vertices(c)))
                    .collect();
                let phases = [space.phase(material, f.cells[0]), space.phase(material, f.cells[1])];
                dofs.clear();
                for &c in &f.cells {
                    for &g in space.dofs.cell_dofs(c) {
                        dofs.push(2 * g);
                        dofs.push(2 * g + 1);
                    }
                }
                let pa = space.mesh.vertices()[f.vertices[0]];
                let pb = space.mesh.vertices()[f.vertices[1]];
                let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
                local.iter_mut().for_each(|v| *v = 0.0);
                let nl = 4 * nb;
                for (t, wq) in rule.points.iter().zip(&rule.weights) {
                    let x = [pa[0] + t[0] * (pb[0] - pa[0]), pa[1] + t[0] * (pb[1] - pa[1])];
                    for side in 0..2 {
                        let mj = material.jet(phases[side], x)?;
                        let sign = if side == 0 { 1.0 } else { -1.0 };
                        for i in 0..nb {
                            for a in 0..2 {
                                let row = side * 2 * nb + 2 * i + a;
                                let out = &mut jumps[row * ncomp..(row + 1) * ncomp];
                                stress_derivative_dot_n(&mj, &bases[side], i, a, order, f.normal, x, out);
                                out.iter_mut().for_each(|v| *v *= sign);
                            }
                        }
                    }
                    let w = wq * len * weight;
                    for r in 0..nl {
                        let jr = &jumps[r * ncomp..(r + 1) * ncomp];
                        for s in 0..nl {
                            let js = &jumps[s * ncomp..(s + 1) * ncomp];
                            let dot: f64 = jr.iter().zip(js).map(|(p, q)| p * q).sum();
                            local[r * nl + s] += w * dot;
                        }
                    }
                }
                for r in 0..nl {
                    for s in 0..nl {
                        let v = local[r * nl + s];
                        if v != 0.0 {
                            b.push(dofs[r], dofs[s], v);
                        }
                    }
                }
            }
            Ok(b)
        })
        .collect();
    let mut all = TripletBuilder::new(n, n);
    for p in parts {
        all.append(p?);
    }
    Ok(all.build())
}

/// Galerkin least-squares term `h² Σ_K (𝓛u, 𝓛v)_K`.
pub fn assemble_gls(space: &FeSpace, material: &MaterialModel) -> Result<CsrMatrix> {
    let cells: Vec<usize> = (0..space.mesh.num_cells()).collect();
    let nb = space.element.num_basis();
    let nloc = 2 * nb;
    let h2 = space.h() * space.h();
    space.assemble_matrix(&cells, |c, data, local| {
        let phase = space.phase(material, c);
        let mut lv = vec![[0.0; 2]; nloc];
        for (x, w) in data.points.iter().zip(&data.weights) {
            let mj = material.jet(phase, *x)?;
            for i in 0..nb {
                for a in 0..2 {
                    lv[2 * i + a] = operator_on_basis(&mj, &data.basis, i, a, *x);
                }
            }
            for r in 0..nloc {
                for s in 0..nloc {
                    local[r * nloc + s] += w * h2 * (lv[r][0] * lv[s][0] + lv[r][1] * lv[s][1]);
                }
            }
        }
        Ok(())
    })
}

/// `h² Σ_K (f, 𝓛v)_K`.
pub fn assemble_gls_rhs(space: &FeSpace, material: &MaterialModel, f: Source<'_>) -> Result<Vec<f64>> {
    let cells: Vec<usize> = (0..space.mesh.num_cells()).collect();
    let nb = space.element.num_basis();
    let h2 = space.h() * space.h();
    space.assemble_vector(&cells, |c, data, local| {
        let phase = space.phase(material, c);
        for (x, w) in data.points.iter().zip(&data.weights) {
            let mj = material.jet(phase, *x)?;
            let fv = f.eval(space, c, &data.basis, *x);
            for i in 0..nb {
                for a in 0..2 {
                    let l = operator_on_basis(&mj, &data.basis, i, a, *x);
                    local[2 * i + a] += w * h2 * (fv[0] * l[0] + fv[1] * l[1]);
                }
            }
        }
        Ok(())
    })
}

fn mass_on(space: &FeSpace, cells: &[usize]) -> Result<CsrMatrix> {
    let nb = space.element.num_basis();
    let nloc = 2 * nb;
    space.assemble_matrix(cells, |_, data, local| {
        let mut phi = vec![0.0; nb];
        for (x, w) in data.points.iter().zip(&data.weights) {
            for (i, p) in phi.iter_mut().enumerate() {
                *p = data.basis.value(i, *x);
            }
            for j in 0..nb {
                for i in 0..nb {
                    let v = w * phi[i] * phi[j];
                    local[(2 * j) * nloc + 2 * i] += v;
                    local[(2 * j + 1) * nloc + 2 * i + 1] += v;
                }
            }
        }
        Ok(())
    })
}

/// Vector mass matrix on the whole domain.
pub fn assemble_mass(space: &FeSpace) -> Result<CsrMatrix> {
    mass_on(space, &space.cells_of(Region::Domain)?)
}

/// Vector mass matrix restricted to the cells of `region`.
pub fn assemble_region_mass(space: &FeSpace, region: Region) -> Result<CsrMatrix> {
    mass_on(space, &space.cells_of(region)?)
}

/// Mass matrix on the measurement set ω.
pub fn assemble_omega_mass(space: &FeSpace) -> Result<CsrMatrix> {
    assemble_region_mass(space, Region::Data)
}

/// `(g, v)` integrated over the cells of `region`.
pub fn assemble_region_load(space: &FeSpace, region: Region, g: Source<'_>) -> Result<Vec<f64>> {
    let cells = space.cells_of(region)?;
    let nb = space.element.num_basis();
    space.assemble_vector(&cells, |c, data, local| {
        for (x, w) in data.points.iter().zip(&data.weights) {
            let gv = g.eval(space, c, &data.basis, *x);
            for i in 0..nb {
                let phi = data.basis.value(i, *x);
                local[2 * i] += w * gv[0] * phi;
                local[2 * i + 1] += w * gv[1] * phi;
            }
        }
        Ok(())
    })
}

/// Tikhonov term `α h^{2p} (u, v)_Ω`.
pub fn assemble_tikhonov(space: &FeSpace, alpha: f64) -> Result<CsrMatrix> {
    let scale = alpha * space.h().powi(2 * space.degree() as i32);
    Ok(assemble_mass(space)?.scaled(scale))
}

/// Dual stabilizer `s*(z, w) = ∫ ∇z : ∇w`.
pub fn assemble_dual_laplacian(space: &FeSpace) -> Result<CsrMatrix> {
    let cells: Vec<usize> = (0..space.mesh.num_cells()).collect();
    let nb = space.element.num_basis();
    let nloc = 2 * nb;
    space.assemble_matrix(&cells, |_, data, local| {
        let mut grad = vec![[0.0; 2]; nb];
        for (x, w) in data.points.iter().zip(&data.weights) {
            for (i, g) in grad.iter_mut().enumerate() {
                *g = [data.basis.derivative(i, 1, 0, *x), data.basis.derivative(i, 0, 1, *x)];
            }
            for j in 0..nb {
                for i in 0..nb {
                    let v = w * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
                    local[(2 * j) * nloc + 2 * i] += v;
                    local[(2 * j + 1) * nloc + 2 * i + 1] += v;
                }
            }
        }
        Ok(())
    })
}

/// Divergence mass `(∇·u, ∇·v)_Ω`.
pub fn assemble_div(space: &FeSpace) -> Result<CsrMatrix> {
    let cells: Vec<usize> = (0..space.mesh.num_cells()).collect();
    let nb = space.element.num_basis();
    let nloc = 2 * nb;
    space.assemble_matrix(&cells, |_, data, local| {
        let mut grad = vec![[0.0; 2]; nb];
        for (x, w) in data.points.iter().zip(&data.weights) {
            for (i, g) in grad.iter_mut().enumerate() {
                *g = [data.basis.derivative(i, 1, 0, *x), data.basis.derivative(i, 0, 1, *x)];
            }
            for r in 0..nloc {
                for s in 0..nloc {
                    local[r * nloc + s] += w * grad[r / 2][r % 2] * grad[s / 2][s % 2];
                }
            }
        }
        Ok(())
    })
}

/// `(q, ∇·v)_Ω` for a scalar field `q(cell, x)`.
pub fn assemble_div_rhs(space: &FeSpace, q: &(dyn Fn(usize, Point) -> f64 + Sync)) -> Result<Vec<f64>> {
    let cells: Vec<usize> = (0..space.mesh.num_cells()).collect();
    let nb = space.element.num_basis();
    space.assemble_vector(&cells, |c, data, local| {
        for (x, w) in data.points.iter().zip(&data.weights) {
            let qv = q(c, *x);
            for i in 0..nb {
                local[2 * i] += w * qv * data.basis.derivative(i, 1, 0, *x);
                local[2 * i + 1] += w * qv * data.basis.derivative(i, 0, 1, *x);
            }
        }
        Ok(())
    })
}
