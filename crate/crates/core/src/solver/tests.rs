use super::*;
use crate::geometry::{Order, Profile};
use crate::mesh::{annulus_mesh, annulus_projector, generate_mesh, MeshParams};
use proptest::prelude::*;

fn m2(eps: f64, mode: Mode) -> GapGeometry {
    GapGeometry::symmetric(
        Profile::power(Order::integer(2), 1.0, 0.5),
        eps,
        1.0,
        4.0,
        mode,
    )
}

fn mesh_for(g: &GapGeometry) -> Mesh {
    generate_mesh(g, &MeshParams::default()).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn constants_are_in_the_kernel() {
    let mesh = mesh_for(&m2(1e-2, Mode::Planar));
    let sys = assemble_system(&mesh, SolveOptions::default()).unwrap();
    let ones = vec![1.0; sys.condensed_dim()];
    // Condensed rows only couple to Dirichlet nodes near ∂D; away from it
    // the residual of a constant vanishes.
    let r = sys.stiffness.matvec(&vec![1.0; mesh.node_count()]);
    let scale = sys.stiffness.norm_inf();
    assert!(r.iter().all(|x| x.abs() <= 1e-12 * scale));
    assert_eq!(ones.len(), sys.n_free() + 2);
}

#[test]
fn annulus_condensed_dimension() {
    let mesh = annulus_mesh(0.25, 1.0, 48).unwrap();
    let sys = assemble_system(&mesh, SolveOptions::default()).unwrap();
    let interior = mesh.node_count() - 96;
    assert_eq!(sys.condensed_dim(), interior + 1);
    assert_eq!(sys.n_inclusions(), 1);
}

#[test]
fn stiffness_is_symmetric() {
    let mesh = mesh_for(&m2(1e-2, Mode::Axisymmetric));
    let sys = assemble_system(&mesh, SolveOptions::default()).unwrap();
    let a = sys.condensed_matrix();
    let mut state = 0x2545f4914f6cdd1du64;
    let mut rnd = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    for _ in 0..5 {
        let x: Vec<f64> = (0..a.n).map(|_| rnd()).collect();
        let y: Vec<f64> = (0..a.n).map(|_| rnd()).collect();
        let axy: f64 = a.matvec(&x).iter().zip(&y).map(|(p, q)| p * q).sum();
        let xay: f64 = a.matvec(&y).iter().zip(&x).map(|(p, q)| p * q).sum();
        let nrm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
        assert!((axy - xay).abs() <= 1e-13 * a.norm_inf() * nrm(&x) * nrm(&y));
    }
}

#[test]
fn no_dirichlet_is_an_error() {
    let mut mesh = annulus_mesh(0.25, 1.0, 32).unwrap();
    for (_, t) in &mut mesh.boundary {
        *t = BoundaryTag::InclusionD1;
    }
    assert!(matches!(assemble_system(&mesh, SolveOptions::default()), Err(Error::Assembly(_))));
}

#[test]
fn unit_data_gives_unit_solution() {
    let g = m2(1e-2, Mode::Planar);
    let mesh = mesh_for(&g);
    let sys = assemble_system(&mesh, SolveOptions::default()).unwrap();
    let one = BoundaryData::Constant { value: 1.0 };
    let (v0, v1, v2) = solve_subproblems(&sys, &one).unwrap();
    for i in 0..mesh.node_count() {
        assert!((v0.values[i] + v1.values[i] + v2.values[i] - 1.0).abs() < 1e-10);
    }
    let cap = solve_constants(&capacity_matrix(&sys, &v0, &v1, &v2)).unwrap();
    assert!((cap.c1 - 1.0).abs() < 1e-10 && (cap.c2 - 1.0).abs() < 1e-10);
    let (u, c1, c2) = direct_solve(&sys, &one).unwrap();
    assert!((c1 - 1.0).abs() < 1e-10 && (c2 - 1.0).abs() < 1e-10);
    assert!(u.values.iter().all(|x| (x - 1.0).abs() < 1e-10));
    let s = gradient_stats(&u, &g).unwrap();
    assert!(s.max_grad_global < 1e-6 && s.energy < 1e-10);
}

#[test]
fn capacity_properties_and_symmetry() {
    let g = m2(1e-2, Mode::Planar);
    let mesh = mesh_for(&g);
    let sys = assemble_system(&mesh, SolveOptions::default()).unwrap();
    let phi = BoundaryData::LinearXn;
    let (v0, v1, v2) = solve_subproblems(&sys, &phi).unwrap();
    let cap = solve_constants(&capacity_matrix(&sys, &v0, &v1, &v2)).unwrap();
    assert!(cap.a11 < 0.0 && cap.a22 < 0.0);
    assert!((cap.a12 - cap.a21).abs() <= 1e-10 * cap.a12.abs());
    for r in flux_residuals(&cap) {
        assert!(r < 1e-10, "flux residual {r}");
    }
    assert!((cap.c1 + cap.c2).abs() < 1e-10, "C1 {} C2 {}", cap.c1, cap.c2);
    assert!(cap.warning.is_none(), "{:?}", cap.warning);
    assert!((cap.btilde1 - cap.btilde1_check).abs() <= 1e-8 * cap.btilde1.abs());

    // Maximum principle for v1 and u.
    assert!(v1.values.iter().all(|&x| (-1e-10..=1.0 + 1e-10).contains(&x)));
    let u = reconstruct_u(&v0, &v1, &v2, cap.c1, cap.c2);
    let r = g.outer_radius;
    assert!(u.values.iter().all(|&x| x >= -r - 1e-10 && x <= r + 1e-10));

    // v2 is the mirror image of v1.
    let key = |p: [f64; 2]| (p[0].to_bits(), p[1].to_bits());
    let index: std::collections::HashMap<_, _> =
        mesh.nodes.iter().enumerate().map(|(i, p)| (key(*p), i)).collect();
    for (i, p) in mesh.nodes.iter().enumerate() {
        let m = index[&key([p[0], if p[1] == 0.0 { 0.0 } else { -p[1] }])];
        assert!((v2.values[m] - v1.values[i]).abs() < 1e-10);
    }

    // Decomposition against the constrained solve.
    let (ud, c1, c2) = direct_solve(&sys, &phi).unwrap();
    let scale = ud.values.iter().map(|x| x.abs()).fold(0.0, f64::max);
    assert!(max_abs_diff(&u.values, &ud.values) < 1e-8 * scale);
    assert!((c1 - cap.c1).abs() < 1e-8 && (c2 - cap.c2).abs() < 1e-8);

    // Zero net flux through each inclusion and the divergence theorem.
    let e = ud.energy();
    let f1 = sys.inclusion_flux(&ud.values, BoundaryTag::InclusionD1);
    let f2 = sys.inclusion_flux(&ud.values, BoundaryTag::InclusionD2);
    let fo = sys.outer_flux(&ud.values);
    assert!(f1.abs() < 1e-9 * e && f2.abs() < 1e-9 * e);
    assert!((f1 + f2 - fo).abs() < 1e-9 * e.max(1.0));

    // Per-triangle decomposition identity.
    let v12 = v1.combine(1.0, &v2, 1.0);
    for t in 0..mesh.tri_count() {
        let (gu, g1, gs, g0) = (u.gradient(t), v1.gradient(t), v12.gradient(t), v0.gradient(t));
        for k in 0..2 {
            let rhs = (cap.c1 - cap.c2) * g1[k] + cap.c2 * gs[k] + g0[k];
            assert!((gu[k] - rhs).abs() <= 1e-10 * (1.0 + gu[k].abs()));
        }
    }
}

#[test]
fn x1_data_gives_equal_constants() {
    let g = m2(1e-2, Mode::Planar);
    let mesh = mesh_for(&g);
    let sys = assemble_system(&mesh, SolveOptions::default()).unwrap();
    let (_, c1, c2) = direct_solve(&sys, &BoundaryData::LinearX1).unwrap();
    assert!((c1 - c2).abs() < 1e-10);
}

#[test]
fn direct_solution_minimizes_energy() {
    let g = m2(1e-2, Mode::Planar);
    let mesh = mesh_for(&g);
    let sys = assemble_system(&mesh, SolveOptions::default()).unwrap();
    let (u, _, _) = direct_solve(&sys, &BoundaryData::LinearXn).unwrap();
    let e0 = u.energy();
    let d1 = mesh.tag_nodes(BoundaryTag::InclusionD1);
    let d2 = mesh.tag_nodes(BoundaryTag::InclusionD2);
    let outer = mesh.tag_nodes(BoundaryTag::OuterD);
    let mut state = 7u64;
    for _ in 0..10 {
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let (s1, s2) = (rnd(), rnd());
        let mut v = u.values.clone();
        for (i, x) in v.iter_mut().enumerate() {
            if outer.binary_search(&i).is_ok() {
                continue;
            }
            *x += if d1.binary_search(&i).is_ok() {
                1e-3 * s1
            } else if d2.binary_search(&i).is_ok() {
                1e-3 * s2
            } else {
                1e-3 * rnd()
            };
        }
        assert!(HarmonicField::new(&mesh, v).energy() >= e0);
    }
}

#[test]
fn segment_midpoint_gradient_near_inverse_eps() {
    let g = m2(1e-2, Mode::Planar);
    let mesh = mesh_for(&g);
    let sys = assemble_system(&mesh, SolveOptions::default()).unwrap();
    let (_, v1, _) = solve_subproblems(&sys, &BoundaryData::LinearXn).unwrap();
    let s = gradient_stats(&v1, &g).unwrap();
    assert_eq!(s.grad_on_segment.len(), 33);
    let mid = s.grad_on_segment[16] * g.eps;
    // v1 is about 1/2 + x_n/ε across the gap at x' = 0, up to the residual.
    assert!((mid - 1.0).abs() < 0.1, "{mid}");
    let w = residual_w(&v1, &g);
    assert!(w.max_grad_w < 0.2 / g.eps);
}

#[test]
fn annulus_energy_oracle() {
    let (r0, r1): (f64, f64) = (0.25, 1.0);
    let exact = 2.0 * std::f64::consts::PI / (r1 / r0).ln();
    let mesh = annulus_mesh(r0, r1, 96).unwrap();
    let fine = mesh.refine_projected(&annulus_projector(r0, r1));
    let sys = assemble_system(&fine, SolveOptions::default()).unwrap();
    let (v0, v1, v2) = solve_subproblems(&sys, &BoundaryData::Constant { value: 0.0 }).unwrap();
    let cap = capacity_matrix(&sys, &v0, &v1, &v2);
    assert!((-cap.a11 - exact).abs() < 0.01 * exact, "{} vs {exact}", -cap.a11);
    assert!((v1.energy() + cap.a11).abs() < 1e-9 * exact);
}

#[test]
fn cg_backend_matches_cholesky() {
    let g = m2(1e-2, Mode::Axisymmetric);
    let mesh = mesh_for(&g);
    let a = assemble_system(&mesh, SolveOptions::default()).unwrap();
    let b = assemble_system(
        &mesh,
        SolveOptions {
            backend: SolverBackend::Cg,
            tol: 1e-12,
        },
    )
    .unwrap();
    let (ua, _, _) = direct_solve(&a, &BoundaryData::LinearXn).unwrap();
    let (ub, _, _) = direct_solve(&b, &BoundaryData::LinearXn).unwrap();
    assert!(max_abs_diff(&ua.values, &ub.values) < 1e-7);
}

#[test]
fn assembly_is_thread_count_independent() {
    let mesh = mesh_for(&m2(1e-3, Mode::Planar));
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| assembly::stiffness(&mesh))
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn max_principle_for_polynomial_data(
        c in proptest::collection::vec(-1.0f64..1.0, 1..4),
        log_eps in -3.0f64..-1.5,
        axi in any::<bool>(),
    ) {
        let mode = if axi { Mode::Axisymmetric } else { Mode::Planar };
        let g = m2(10f64.powf(log_eps), mode);
        let mesh = generate_mesh(&g, &MeshParams { target_outer_h: 0.5, ..Default::default() }).unwrap();
        let sys = assemble_system(&mesh, SolveOptions::default()).unwrap();
        let phi = BoundaryData::Polynomial { coeffs: c };
        let outer = mesh.tag_nodes(BoundaryTag::OuterD);
        let vals: Vec<f64> = outer.iter().map(|&i| phi.eval(mesh.nodes[i])).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (u, _, _) = direct_solve(&sys, &phi).unwrap();
        for x in &u.values {
            prop_assert!(*x >= lo - 1e-10 && *x <= hi + 1e-10);
        }
    }
}
