//! Lagrange elements of degree 1..=3 on the reference triangle and the
//! quadrature rules used for cell and facet integrals.

use faer::Mat;
use faer::linalg::solvers::DenseSolveCore;

use crate::error::{Error, Result};
use crate::mesh::Point;

pub const MAX_DEGREE: usize = 3;
const NCOEF: usize = (MAX_DEGREE + 1) * (MAX_DEGREE + 2) / 2;

/// Index of the monomial `x^a y^b` in graded order.
#[inline]
fn mono(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

fn mono_exponents() -> [(usize, usize); NCOEF] {
    let mut out = [(0, 0); NCOEF];
    for d in 0..=MAX_DEGREE {
        for b in 0..=d {
            out[mono(d - b, b)] = (d - b, b);
        }
    }
    out
}

/// Bivariate polynomial of total degree at most three.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Poly {
    coef: [f64; NCOEF],
}

impl Poly {
    pub fn constant(c: f64) -> Self {
        let mut p = Poly::default();
        p.coef[0] = c;
        p
    }

    pub fn linear(c: f64, cx: f64, cy: f64) -> Self {
        let mut p = Poly::constant(c);
        p.coef[mono(1, 0)] = cx;
        p.coef[mono(0, 1)] = cy;
        p
    }

    pub fn degree(&self) -> usize {
        let exps = mono_exponents();
        (0..NCOEF)
            .filter(|&i| self.coef[i] != 0.0)
            .map(|i| exps[i].0 + exps[i].1)
            .max()
            .unwrap_or(0)
    }

    /// Product; panics if the result would exceed degree three.
    pub fn mul(&self, other: &Poly) -> Poly {
        let exps = mono_exponents();
        let mut out = Poly::default();
        for i in 0..NCOEF {
            if self.coef[i] == 0.0 {
                continue;
            }
            for j in 0..NCOEF {
                if other.coef[j] == 0.0 {
                    continue;
                }
                let (a, b) = (exps[i].0 + exps[j].0, exps[i].1 + exps[j].1);
                assert!(a + b <= MAX_DEGREE, "polynomial product exceeds degree {MAX_DEGREE}");
                out.coef[mono(a, b)] += self.coef[i] * other.coef[j];
            }
        }
        out
    }

    pub fn add_scaled(&mut self, s: f64, other: &Poly) {
        for (a, b) in self.coef.iter_mut().zip(other.coef.iter()) {
            *a += s * b;
        }
    }

    /// Evaluates `∂x^dx ∂y^dy p` at `(x, y)`.
    pub fn eval_derivative(&self, dx: usize, dy: usize, x: f64, y: f64) -> f64 {
        if dx + dy > MAX_DEGREE {
            return 0.0;
        }
        let xp = [1.0, x, x * x, x * x * x];
        let yp = [1.0, y, y * y, y * y * y];
        let mut s = 0.0;
        for d in (dx + dy)..=MAX_DEGREE {
            for b in dy..=(d - dx) {
                let a = d - b;
                let c = self.coef[mono(a, b)];
                if c != 0.0 {
                    s += c * falling(a, dx) * falling(b, dy) * xp[a - dx] * yp[b - dy];
                }
            }
        }
        s
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.eval_derivative(0, 0, x, y)
    }
}

#[inline]
fn falling(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n - i) as f64).product()
}

/// Equispaced nodal Lagrange element of degree `p` on the triangle
/// `{(0,0), (1,0), (0,1)}`.
///
/// Node order: the three vertices, then the `p-1` nodes of each edge
/// `v0→v1`, `v1→v2`, `v2→v0` in traversal order, then interior nodes.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    degree: usize,
    nodes: Vec<Point>,
    basis: Vec<Poly>,
}

impl ReferenceElement {
    pub fn new(degree: usize) -> Result<Self> {
        if !(1..=MAX_DEGREE).contains(&degree) {
            return Err(Error::Degree(degree));
        }
        let p = degree;
        let pf = p as f64;
        let mut nodes: Vec<Point> = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for k in 1..p {
            nodes.push([k as f64 / pf, 0.0]);
        }
        for k in 1..p {
            nodes.push([(p - k) as f64 / pf, k as f64 / pf]);
        }
        for k in 1..p {
            nodes.push([0.0, (p - k) as f64 / pf]);
        }
        for j in 1..p {
            for i in 1..p {
                if i + j < p {
                    nodes.push([i as f64 / pf, j as f64 / pf]);
                }
            }
        }
        let n = nodes.len();
        debug_assert_eq!(n, (p + 1) * (p + 2) / 2);
        let exps = mono_exponents();
        let vander = Mat::<f64>::from_fn(n, n, |r, c| {
            let (a, b) = exps[c];
            nodes[r][0].powi(a as i32) * nodes[r][1].powi(b as i32)
        });
        let inv = vander.partial_piv_lu().inverse();
        let basis = (0..n)
            .map(|i| {
                let mut poly = Poly::default();
                for m in 0..n {
                    poly.coef[m] = inv[(m, i)];
                }
                poly
            })
            .collect();
        Ok(ReferenceElement { degree, nodes, basis })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_basis(&self) -> usize {
        self.basis.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn basis(&self) -> &[Poly] {
        &self.basis
    }

    /// All `order`-th partial derivatives `∂x^a ∂y^b φ_i` (`a + b = order`,
    /// `b` ascending) of every basis function at a reference point.
    pub fn eval_basis(&self, point: Point, order: usize) -> Result<Vec<Vec<f64>>> {
        if order > self.degree {
            return Err(Error::DerivativeOrder { order, degree: self.degree });
        }
        Ok(self
            .basis
            .iter()
            .map(|phi| {
                (0..=order)
                    .map(|b| phi.eval_derivative(order - b, b, point[0], point[1]))
                    .collect()
            })
            .collect())
    }

    /// Basis polynomials pulled back to physical coordinates of the cell with
    /// the given vertices, expressed in `x - vertices[0]`.
    pub fn physical_basis(&self, vertices: &[Point; 3]) -> CellBasis {
        let [v0, v1, v2] = *vertices;
        let j = [[v1[0] - v0[0], v2[0] - v0[0]], [v1[1] - v0[1], v2[1] - v0[1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
        let xi = Poly::linear(0.0, inv[0][0], inv[0][1]);
        let eta = Poly::linear(0.0, inv[1][0], inv[1][1]);
        let mut xi_pow = [Poly::constant(1.0); MAX_DEGREE + 1];
        let mut eta_pow = [Poly::constant(1.0); MAX_DEGREE + 1];
        for k in 1..=MAX_DEGREE {
            xi_pow[k] = xi_pow[k - 1].mul(&xi);
            eta_pow[k] = eta_pow[k - 1].mul(&eta);
        }
        let exps = mono_exponents();
        let polys = self
            .basis
            .iter()
            .map(|phi| {
                let mut out = Poly::default();
                for (m, &(a, b)) in exps.iter().enumerate() {
                    if phi.coef[m] != 0.0 {
                        out.add_scaled(phi.coef[m], &xi_pow[a].mul(&eta_pow[b]));
                    }
                }
                out
            })
            .collect();
        CellBasis { origin: v0, polys }
    }
}

/// Basis functions of one physical cell.
#[derive(Debug, Clone)]
pub struct CellBasis {
    origin: Point,
    polys: Vec<Poly>,
}

impl CellBasis {
    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    /// `∂x^dx ∂y^dy φ_i` at a physical point.
    #[inline]
    pub fn derivative(&self, i: usize, dx: usize, dy: usize, x: Point) -> f64 {
        self.polys[i].eval_derivative(dx, dy, x[0] - self.origin[0], x[1] - self.origin[1])
    }

    pub fn value(&self, i: usize, x: Point) -> f64 {
        self.derivative(i, 0, 0, x)
    }
}

/// Quadrature rule on the reference triangle or on `[0,1]`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Reference coordinates; the second entry is unused for segments.
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss–Legendre nodes and weights on `[0,1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Gauss rule on `[0,1]` exact for polynomials up to `required_degree`.
pub fn segment_quadrature(required_degree: usize) -> QuadratureRule {
    let n = required_degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    QuadratureRule {
        points: x.into_iter().map(|t| [t, 0.0]).collect(),
        weights: w,
        degree: 2 * n - 1,
    }
}

/// Rule on the reference triangle exact up to `required_degree`.
///
/// Degrees 0–2 use the centroid and the three-point edge-interior rule;
/// higher degrees use a collapsed Gauss–Legendre product rule.
pub fn triangle_quadrature(required_degree: usize) -> QuadratureRule {
    match required_degree {
        0 | 1 => QuadratureRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
            degree: 1,
        },
        2 => QuadratureRule {
            points: vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
            weights: vec![1.0 / 6.0; 3],
            degree: 2,
        },
        d => {
            let n = (d + 2).div_ceil(2);
            let (x, w) = gauss_legendre(n);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for (t, wt) in x.iter().zip(&w) {
                for (s, ws) in x.iter().zip(&w) {
                    points.push([s * (1.0 - t), *t]);
                    weights.push(ws * wt * (1.0 - t));
                }
            }
            QuadratureRule { points, weights, degree: 2 * n - 2 }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// ∫_T x^a y^b over the reference triangle.
    fn exact_monomial(a: usize, b: usize) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    fn integrate(rule: &QuadratureRule, f: impl Fn(f64, f64) -> f64) -> f64 {
        rule.points.iter().zip(&rule.weights).map(|(p, w)| w * f(p[0], p[1])).sum()
    }

    #[test]
    fn p1_barycenter_and_gradients() {
        let e = ReferenceElement::new(1).unwrap();
        let v = e.eval_basis([1.0 / 3.0, 1.0 / 3.0], 0).unwrap();
        for row in &v {
            assert!((row[0] - 1.0 / 3.0).abs() < 1e-15);
        }
        let g = e.eval_basis([0.2, 0.7], 1).unwrap();
        let sx: f64 = g.iter().map(|r| r[0]).sum();
        let sy: f64 = g.iter().map(|r| r[1]).sum();
        assert!(sx.abs() < 1e-14 && sy.abs() < 1e-14);
    }

    #[test]
    fn nodal_property() {
        for p in 1..=3 {
            let e = ReferenceElement::new(p).unwrap();
            assert_eq!(e.num_basis(), (p + 1) * (p + 2) / 2);
            for (j, node) in e.nodes().iter().enumerate() {
                let v = e.eval_basis(*node, 0).unwrap();
                for (i, row) in v.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((row[0] - expect).abs() < 1e-12, "p={p} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn p2_edge_midpoint() {
        let e = ReferenceElement::new(2).unwrap();
        let v = e.eval_basis([0.5, 0.0], 0).unwrap();
        assert!((v[3][0] - 1.0).abs() < 1e-14);
        assert!(v.iter().enumerate().filter(|(i, _)| *i != 3).all(|(_, r)| r[0].abs() < 1e-14));
    }

    #[test]
    fn order_above_degree_rejected() {
        let e = ReferenceElement::new(2).unwrap();
        assert!(matches!(e.eval_basis([0.1, 0.1], 3), Err(Error::DerivativeOrder { .. })));
        assert!(ReferenceElement::new(4).is_err());
        assert!(ReferenceElement::new(0).is_err());
    }

    #[test]
    fn reproduces_polynomials() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for p in 1..=3 {
            let e = ReferenceElement::new(p).unwrap();
            // random polynomial of degree p
            let coeffs: Vec<((i32, i32), f64)> = (0..=p as i32)
                .flat_map(|d| (0..=d).map(move |b| (d - b, b)))
                .map(|ab| (ab, rng.random_range(-1.0..1.0)))
                .collect();
            let f = |x: f64, y: f64| coeffs.iter().map(|((a, b), c)| c * x.powi(*a) * y.powi(*b)).sum::<f64>();
            let nodal: Vec<f64> = e.nodes().iter().map(|n| f(n[0], n[1])).collect();
            for _ in 0..20 {
                let x: f64 = rng.random_range(0.0..1.0);
                let y: f64 = rng.random_range(0.0..(1.0 - x));
                let v = e.eval_basis([x, y], 0).unwrap();
                let interp: f64 = v.iter().zip(&nodal).map(|(r, c)| r[0] * c).sum();
                assert!((interp - f(x, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let e = ReferenceElement::new(3).unwrap();
        let x = [0.27, 0.31];
        let h = 1e-5;
        let shift = |dx: f64, dy: f64| e.eval_basis([x[0] + dx, x[1] + dy], 0).unwrap();
        let g = e.eval_basis(x, 1).unwrap();
        let (px, mx, py, my) = (shift(h, 0.0), shift(-h, 0.0), shift(0.0, h), shift(0.0, -h));
        for i in 0..e.num_basis() {
            assert!(((px[i][0] - mx[i][0]) / (2.0 * h) - g[i][0]).abs() < 1e-8);
            assert!(((py[i][0] - my[i][0]) / (2.0 * h) - g[i][1]).abs() < 1e-8);
        }
        // second derivative ∂xy from gradients
        let hxy = e.eval_basis(x, 2).unwrap();
        let gp = e.eval_basis([x[0], x[1] + h], 1).unwrap();
        let gm = e.eval_basis([x[0], x[1] - h], 1).unwrap();
        for i in 0..e.num_basis() {
            assert!(((gp[i][0] - gm[i][0]) / (2.0 * h) - hxy[i][1]).abs() < 1e-7);
        }
    }

    #[test]
    fn basis_integrals() {
        // P1 hat functions integrate to |T|/3; P2 vertex functions to 0 and
        // edge functions to |T|/3.
        let rule = triangle_quadrature(6);
        let e1 = ReferenceElement::new(1).unwrap();
        for phi in e1.basis() {
            assert!((integrate(&rule, |x, y| phi.eval(x, y)) - 1.0 / 6.0).abs() < 1e-14);
        }
        let e2 = ReferenceElement::new(2).unwrap();
        for (i, phi) in e2.basis().iter().enumerate() {
            let expect = if i < 3 { 0.0 } else { 1.0 / 6.0 };
            assert!((integrate(&rule, |x, y| phi.eval(x, y)) - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn triangle_rules_exact() {
        let r1 = triangle_quadrature(1);
        assert_eq!(r1.len(), 1);
        assert!((r1.weights[0] - 0.5).abs() < 1e-16);
        for d in 0..=12 {
            let rule = triangle_quadrature(d);
            assert!(rule.degree >= d);
            assert!((rule.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
            for a in 0..=d {
                for b in 0..=(d - a) {
                    let exact = exact_monomial(a, b);
                    let q = integrate(&rule, |x, y| x.powi(a as i32) * y.powi(b as i32));
                    assert!((q - exact).abs() <= 1e-13 * exact, "d={d} a={a} b={b}");
                }
            }
        }
        let r = triangle_quadrature(2);
        assert!((integrate(&r, |x, y| x * y) - 1.0 / 24.0).abs() < 1e-15);
        let r = triangle_quadrature(4);
        assert!((integrate(&r, |x, _| x.powi(4)) - 1.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn segment_rules_exact() {
        let r = segment_quadrature(1);
        assert_eq!(r.len(), 1);
        assert!((r.weights[0] - 1.0).abs() < 1e-16 && (r.points[0][0] - 0.5).abs() < 1e-16);
        let r2 = segment_quadrature(2);
        assert_eq!(r2.len(), 2);
        assert!((integrate(&r2, |t, _| t * t) - 1.0 / 3.0).abs() < 1e-15);
        let r4 = segment_quadrature(6);
        assert_eq!(r4.len(), 4);
        assert!((integrate(&r4, |t, _| t.powi(6)) - 1.0 / 7.0).abs() < 1e-14);
        for d in 0..=12 {
            let rule = segment_quadrature(d);
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for a in 0..=d {
                let q = integrate(&rule, |t, _| t.powi(a as i32));
                assert!((q - 1.0 / (a as f64 + 1.0)).abs() < 1e-13 / (a as f64 + 1.0));
            }
        }
    }

    #[test]
    fn physical_basis_matches_reference() {
        let e = ReferenceElement::new(3).unwrap();
        let verts = [[0.2, 0.1], [0.5, 0.15], [0.25, 0.4]];
        let cb = e.physical_basis(&verts);
        let xi = [0.3, 0.2];
        let map = |r: Point| {
            [
                verts[0][0] + (verts[1][0] - verts[0][0]) * r[0] + (verts[2][0] - verts[0][0]) * r[1],
                verts[0][1] + (verts[1][1] - verts[0][1]) * r[0] + (verts[2][1] - verts[0][1]) * r[1],
            ]
        };
        let x = map(xi);
        let v = e.eval_basis(xi, 0).unwrap();
        for i in 0..e.num_basis() {
            assert!((cb.value(i, x) - v[i][0]).abs() < 1e-12);
        }
        // nodal in physical space
        for (j, n) in e.nodes().iter().enumerate() {
            for i in 0..e.num_basis() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((cb.value(i, map(*n)) - expect).abs() < 1e-11);
            }
        }
    }
}
