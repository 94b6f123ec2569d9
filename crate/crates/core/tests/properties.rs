//! Randomized invariants of meshes, elements, coefficients, forms, the
//! saddle system, reference solutions, noise and metrics.

use proptest::prelude::*;
use ucp_core::coefficients::{MaterialVariant, Phase, RhoSign};
use ucp_core::element::{segment_quadrature, triangle_quadrature, ReferenceElement};
use ucp_core::forms::{
    assemble_dual_laplacian, assemble_gls, assemble_jump, assemble_omega_mass, assemble_tikhonov,
};
use ucp_core::manufactured::{jump_coefficients, verify_interface_conditions};
use ucp_core::mesh::{build_fitted_mesh, build_for_geometry, refine_uniform, tag_regions, RegionShape};
use ucp_core::metrics::{eoc, loglog_slope};
use ucp_core::noise::perturb;
use ucp_core::{
    build_system, FeSpace, Geometry, MaterialModel, Mesh, NoiseSpec, Point, ProblemKind, Rect, ReferenceSolution,
    Region, StabilizationParams, SystemOptions,
};

fn breakpoints() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..0.95, 0..4).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        let mut out = vec![0.0];
        for x in v {
            if x - out[out.len() - 1] > 0.03 {
                out.push(x);
            }
        }
        out.push(1.0);
        out
    })
}

fn ref_point() -> impl Strategy<Value = Point> {
    (0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, b)| if a + b <= 1.0 { [a, b] } else { [1.0 - a, 1.0 - b] })
}

fn unit_point() -> impl Strategy<Value = Point> {
    (0.01f64..0.99, 0.01f64..0.99).prop_map(|(x, y)| [x, y])
}

fn random_vec(seed: u64, n: usize) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn refined(mut m: Mesh, levels: usize) -> Mesh {
    for _ in 0..levels {
        m = refine_uniform(&m);
    }
    m
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn on_segment(x: Point, a: Point, b: Point) -> bool {
    let (d, e) = (sub(b, a), sub(x, a));
    let cross = d[0] * e[1] - d[1] * e[0];
    let t = (d[0] * e[0] + d[1] * e[1]) / (d[0] * d[0] + d[1] * d[1]);
    cross.abs() < 1e-12 && (-1e-12..=1.0 + 1e-12).contains(&t)
}

fn convex_space(p: usize) -> FeSpace {
    FeSpace::new(build_for_geometry(&Geometry::convex(), 0.5).unwrap(), p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mesh_topology(bx in breakpoints(), by in breakpoints(), levels in 0usize..3) {
        let base = build_fitted_mesh(&bx, &by).unwrap();
        let m = refined(base.clone(), levels);
        let area: f64 = (0..m.num_cells()).map(|c| m.signed_area(c)).sum();
        prop_assert!((area - 1.0).abs() <= 1e-12);
        prop_assert!((0..m.num_cells()).all(|c| m.signed_area(c) > 0.0));
        prop_assert_eq!(2 * m.interior_facets().len() + m.boundary_facets().len(), 3 * m.num_cells());
        for f in m.interior_facets() {
            prop_assert_ne!(f.cells[0], f.cells[1]);
            let d = sub(m.centroid(f.cells[1]), m.centroid(f.cells[0]));
            prop_assert!(f.normal[0] * d[0] + f.normal[1] * d[1] > 0.0);
            prop_assert!((f.normal[0].hypot(f.normal[1]) - 1.0).abs() < 1e-14);
        }
        for f in m.boundary_facets() {
            let out = sub(m.vertices()[f.vertices[0]], m.centroid(f.cell));
            prop_assert!(f.normal[0] * out[0] + f.normal[1] * out[1] > 0.0);
        }
        // equal up to rounding of the midpoint coordinates
        let expect = base.h() / f64::powi(2.0, levels as i32);
        prop_assert!((m.h() - expect).abs() <= 1e-14 * expect);
    }

    #[test]
    fn region_tags_follow_centroids(bx in breakpoints(), by in breakpoints(), i in any::<prop::sample::Index>(), j in any::<prop::sample::Index>(), levels in 0usize..2) {
        let (a, b) = (i.index(bx.len() - 1), j.index(by.len() - 1));
        let rect = Rect::new(bx[a], bx[a + 1], by[b], 1.0);
        let m = tag_regions(build_fitted_mesh(&bx, &by).unwrap(), &Geometry::new().with(Region::Data, RegionShape::rect(rect))).unwrap();
        let m = refined(m, levels);
        for c in 0..m.num_cells() {
            prop_assert_eq!(m.in_region(c, Region::Data), rect.contains(m.centroid(c)));
        }
        let corners = [[rect.x0, rect.y0], [rect.x1, rect.y0], [rect.x1, rect.y1], [rect.x0, rect.y1]];
        for f in m.interior_facets() {
            if m.in_region(f.cells[0], Region::Data) != m.in_region(f.cells[1], Region::Data) {
                let (p, q) = (m.vertices()[f.vertices[0]], m.vertices()[f.vertices[1]]);
                let mid = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
                prop_assert!((0..4).any(|e| on_segment(mid, corners[e], corners[(e + 1) % 4])));
            }
        }
    }

    #[test]
    fn basis_partition_of_unity_and_derivatives(p in 1usize..=3, x in ref_point()) {
        let el = ReferenceElement::new(p).unwrap();
        let v = el.eval_basis(x, 0).unwrap();
        let s: f64 = v.iter().map(|r| r[0]).sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        let g = el.eval_basis(x, 1).unwrap();
        let e = 1e-6;
        for d in 0..2 {
            let sum: f64 = g.iter().map(|r| r[d]).sum();
            prop_assert!(sum.abs() < 1e-11);
            let mut a = x;
            let mut b = x;
            a[d] += e;
            b[d] -= e;
            let (va, vb) = (el.eval_basis(a, 0).unwrap(), el.eval_basis(b, 0).unwrap());
            for i in 0..el.num_basis() {
                let fd = (va[i][0] - vb[i][0]) / (2.0 * e);
                prop_assert!((fd - g[i][d]).abs() < 1e-7 * (1.0 + g[i][d].abs()));
            }
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials(p in 1usize..=3, coeffs in prop::collection::vec(-2.0f64..2.0, 10), x in ref_point()) {
        let el = ReferenceElement::new(p).unwrap();
        let q = |z: Point| {
            let mut s = 0.0;
            let mut k = 0;
            for deg in 0..=p {
                for b in 0..=deg {
                    s += coeffs[k] * z[0].powi((deg - b) as i32) * z[1].powi(b as i32);
                    k += 1;
                }
            }
            s
        };
        let v = el.eval_basis(x, 0).unwrap();
        let interp: f64 = el.nodes().iter().zip(&v).map(|(n, phi)| q(*n) * phi[0]).sum();
        prop_assert!((interp - q(x)).abs() <= 1e-12 * (1.0 + q(x).abs()));
        for (i, n) in el.nodes().iter().enumerate() {
            let w = el.eval_basis(*n, 0).unwrap();
            for (j, r) in w.iter().enumerate() {
                let delta = if i == j { 1.0 } else { 0.0 };
                prop_assert!((r[0] - delta).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadrature_exactness(d in 0usize..=10, split in 0usize..=10) {
        let tri = triangle_quadrature(d);
        prop_assert!(tri.degree >= d);
        prop_assert!((tri.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
        let (a, b) = (split.min(d), d - split.min(d));
        let fact = |n: usize| (1..=n).map(|v| v as f64).product::<f64>();
        let exact = fact(a) * fact(b) / fact(a + b + 2);
        let got: f64 = tri.points.iter().zip(&tri.weights).map(|(x, w)| w * x[0].powi(a as i32) * x[1].powi(b as i32)).sum();
        prop_assert!((got - exact).abs() <= 1e-13 * exact);
        let seg = segment_quadrature(d);
        prop_assert!((seg.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let got: f64 = seg.points.iter().zip(&seg.weights).map(|(x, w)| w * x[0].powi(d as i32)).sum();
        prop_assert!((got - 1.0 / (d as f64 + 1.0)).abs() <= 1e-13);
    }

    #[test]
    fn smooth_coefficients_are_coercive_with_exact_gradients(x in unit_point(), k in 0.0f64..8.0) {
        let m = MaterialModel::smooth(k);
        let s = m.eval(None, x).unwrap();
        prop_assert!(s.mu >= 0.5 && s.lambda + 2.0 * s.mu >= 0.5);
        prop_assert_eq!(s.rho, -k * k);
        let e = 1e-6;
        for d in 0..2 {
            let (mut a, mut b) = (x, x);
            a[d] += e;
            b[d] -= e;
            let (sa, sb) = (m.eval(None, a).unwrap(), m.eval(None, b).unwrap());
            prop_assert!(((sa.mu - sb.mu) / (2.0 * e) - s.grad_mu[d]).abs() <= 1e-8 * (1.0 + s.grad_mu[d].abs()));
            prop_assert!(((sa.lambda - sb.lambda) / (2.0 * e) - s.grad_lambda[d]).abs() <= 1e-8 * (1.0 + s.grad_lambda[d].abs()));
        }
        prop_assert_eq!(m.with_rho_sign(RhoSign::Positive).rho(), k * k);
    }

    #[test]
    fn jump_sides_are_exact(mp in 0.5f64..3.0, mm in 0.5f64..3.0, eta in 0.2f64..0.8, x in 0.0f64..1.0) {
        let m = MaterialModel::new(MaterialVariant::PlaneJump { mu_plus: mp, mu_minus: mm, eta, lambda: 1.25 }, 1.0, RhoSign::Negative).unwrap();
        prop_assert_eq!(m.eval(Some(Phase::Plus), [x, eta]).unwrap().mu, mp);
        prop_assert_eq!(m.eval(Some(Phase::Minus), [x, eta]).unwrap().mu, mm);
    }

    #[test]
    fn plane_jump_solution_meets_interface_conditions(mp in 0.5f64..3.0, mm in 0.5f64..3.0, eta in 0.2f64..0.8, k in 0.5f64..6.0) {
        let c = jump_coefficients(mp, mm, eta, k).unwrap();
        let r = verify_interface_conditions(&c, eta, mp, mm, 1.25, k, 50);
        prop_assert!(r.displacement <= 1e-10 && r.traction <= 1e-10 * (1.0 + k * k), "{r:?}");
        // the check notices a mismatched side
        let bad = verify_interface_conditions(&c, eta, mp + 0.5, mm, 1.25, k, 50);
        prop_assert!(bad.traction > 1e-6);
    }

    #[test]
    fn inclusion_solution_vanishes_on_rectangle(t in 0.0f64..1.0, edge in 0usize..4, k in 0.5f64..6.0) {
        let r = Rect::new(0.25, 0.75, 0.25, 0.9);
        let s = ReferenceSolution::inclusion(r, k);
        let p = match edge {
            0 => [r.x0 + t * (r.x1 - r.x0), r.y0],
            1 => [r.x1, r.y0 + t * (r.y1 - r.y0)],
            2 => [r.x0 + t * (r.x1 - r.x0), r.y1],
            _ => [r.x0, r.y0 + t * (r.y1 - r.y0)],
        };
        for side in [Phase::Plus, Phase::Minus] {
            let u = s.eval_u(Some(side), p).unwrap();
            let g = s.eval_grad_u(Some(side), p).unwrap();
            prop_assert!(u.iter().all(|v| v.abs() < 1e-14));
            prop_assert!(g.iter().flatten().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn metrics_recover_rates(c in 0.1f64..10.0, r in 0.5f64..5.0, n in 2usize..6) {
        let e: Vec<f64> = (0..n).map(|i| c * f64::powf(2.0, -r * i as f64)).collect();
        for v in eoc(&e).into_iter().skip(1) {
            prop_assert!((v.unwrap() - r).abs() < 1e-10);
        }
        let h: Vec<f64> = (0..n).map(|i| 0.5f64.powi(i as i32)).collect();
        let y: Vec<f64> = h.iter().map(|x| c * x.powf(-r)).collect();
        prop_assert!((loglog_slope(&h, &y).unwrap() + r).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn stabilizers_are_symmetric_psd(p in 1usize..=3, k in 0.0f64..6.0, seed in any::<u64>()) {
        let space = convex_space(p);
        let m = MaterialModel::smooth(k);
        let n = space.num_vector_dofs();
        let mut mats = vec![
            assemble_gls(&space, &m).unwrap(),
            assemble_dual_laplacian(&space).unwrap(),
            assemble_tikhonov(&space, 1e-3).unwrap(),
            assemble_omega_mass(&space).unwrap(),
        ];
        for j in 1..=p {
            mats.push(assemble_jump(&space, &m, j).unwrap());
        }
        let u = random_vec(seed, n);
        for a in &mats {
            let scale = a.iter().map(|(_, _, v)| v.abs()).fold(0.0, f64::max);
            prop_assert!(a.max_asymmetry() <= 1e-12 * (1.0 + scale));
            prop_assert!(a.quad_form(&u) >= -1e-12 * scale * n as f64);
        }
        // ω mass + s_α alone is a norm
        let k11 = mats[3].add_scaled(1.0, &mats[2]);
        prop_assert!(k11.quad_form(&u) > 0.0);
    }

    #[test]
    fn saddle_system_identity_and_dual_boundary(p in 1usize..=2, k in 0.5f64..4.0, seed in any::<u64>(), well in any::<bool>()) {
        let space = convex_space(p);
        let m = MaterialModel::smooth(k);
        let sol = ReferenceSolution::oscillatory(k);
        let kind = if well { ProblemKind::WellPosed } else { ProblemKind::IllPosed };
        let opts = SystemOptions { kind, divergence: well, ..Default::default() };
        let s = build_system(&space, &m, &StabilizationParams::defaults(p), &sol, &opts).unwrap();
        prop_assert!(s.full_matrix().max_asymmetry() <= 1e-12);
        let n = space.num_vector_dofs();
        let (u, z) = (random_vec(seed, n), random_vec(seed ^ 1, n));
        let (lhs, rhs) = s.inf_sup_identity(&u, &z);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
        let out = s.solve().unwrap();
        for i in 0..n {
            if space.dofs().is_boundary(i / 2) {
                prop_assert_eq!(out.z[i], 0.0);
            }
        }
    }

    #[test]
    fn dofs_conform_and_boundary_set_is_exact(p in 1usize..=3, bx in breakpoints(), by in breakpoints()) {
        let space = FeSpace::new(build_fitted_mesh(&bx, &by).unwrap(), p).unwrap();
        let mesh = space.mesh();
        let dofs = space.dofs();
        for f in mesh.interior_facets() {
            let (a, b) = (mesh.vertices()[f.vertices[0]], mesh.vertices()[f.vertices[1]]);
            let on = |c: usize| {
                let mut v: Vec<usize> = dofs.cell_dofs(c).iter().copied().filter(|&d| on_segment(dofs.node(d), a, b)).collect();
                v.sort();
                v
            };
            let (l, r) = (on(f.cells[0]), on(f.cells[1]));
            prop_assert_eq!(l.len(), p + 1);
            prop_assert_eq!(l, r);
        }
        for d in 0..dofs.num_scalar() {
            let x = dofs.node(d);
            let on_boundary = [x[0], x[1], 1.0 - x[0], 1.0 - x[1]].iter().any(|v| v.abs() < 1e-14);
            prop_assert_eq!(dofs.is_boundary(d), on_boundary);
        }
    }

    #[test]
    fn noise_has_exact_norms_and_is_seeded(theta in 0u32..3, seed in any::<u64>(), p in 1usize..=2) {
        let space = convex_space(p);
        let spec = NoiseSpec::new(theta, seed);
        let a = perturb(&space, &spec).unwrap();
        prop_assert_eq!(&a, &perturb(&space, &spec).unwrap());
        let target = spec.target_norm(space.h(), p);
        let nu = assemble_omega_mass(&space).unwrap().quad_form(&a.du).sqrt();
        prop_assert!((nu - target).abs() <= 1e-12 * target);
        let other = perturb(&space, &NoiseSpec::new(theta, seed.wrapping_add(1))).unwrap();
        prop_assert_ne!(a, other);
    }
}
