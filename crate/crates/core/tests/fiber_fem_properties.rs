use ischemia_core::fem::{assemble_boundary_mass, assemble_mass, assemble_stiffness, lumped_mass, solve_linear, SolveOptions};
use ischemia_core::fiber::{build_conductivity, fibers_from_potential, solve_fiber_laplace, FiberField, TensorField};
use ischemia_core::mesh::{structured_rectangle, BoundaryRegion, Mesh, RegionSet, VentricleGeometry, VentricleMeshOptions};
use ischemia_core::tensor::{dot, norm, Sym2};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ventricle() -> Mesh {
    VentricleGeometry::default()
        .mesh(&VentricleMeshOptions::uniform(0.1))
        .unwrap()
}

#[test]
fn ventricle_fibers_and_tensors() {
    let mesh = ventricle();
    let phi = solve_fiber_laplace(&mesh).unwrap();
    let fibers = fibers_from_potential(&mesh, &phi).unwrap();
    for (f, n) in fibers.e_f.iter().zip(&fibers.e_n) {
        assert!((norm(*f) - 1.0).abs() < 1e-12);
        assert!(dot(*f, *n).abs() < 1e-12);
        // e_f is e_n turned by +90 degrees.
        assert!((f[0] + n[1]).abs() < 1e-12 && (f[1] - n[0]).abs() < 1e-12);
    }
    let k0 = build_conductivity(&fibers, 1.2, 0.2538).unwrap();
    let k1 = build_conductivity(&fibers, 0.2308, 0.0062).unwrap();
    assert!(k0.commutator_defect(&k1) <= 1e-10);
    let (k_min, _) = k1.eigenvalue_range();
    let (_, k_max) = k0.eigenvalue_range();
    assert!(k_min > 0.0 && k_min <= k_max);
    assert!((k_min - 0.0062).abs() < 1e-12);
    assert!((k_max - 1.2).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conductivity_rebuilds_from_eigen(theta in 0.0f64..std::f64::consts::PI, a in 0.01f64..3.0, ratio in 0.01f64..1.0) {
        let b = a * ratio;
        let n = [theta.cos(), theta.sin()];
        let fibers = FiberField { e_f: vec![[-n[1], n[0]]], e_n: vec![n] };
        let k = build_conductivity(&fibers, a, b).unwrap()[0];
        let e = k.eigen();
        let back = Sym2::from_frame(e.vectors[0], e.values[0], e.vectors[1], e.values[1]);
        prop_assert!((back - k).max_abs() <= 1e-12);
        prop_assert!((e.values[0] - a).abs() <= 1e-12 && (e.values[1] - b).abs() <= 1e-12);
    }
}

fn assembled(mesh: &Mesh, k: Sym2) -> Vec<(&'static str, ischemia_core::fem::CsrMatrix)> {
    let kf = TensorField::uniform(k, mesh.num_triangles());
    vec![
        ("consistent mass", assemble_mass(mesh, false)),
        ("lumped mass", assemble_mass(mesh, true)),
        ("stiffness", assemble_stiffness(mesh, &kf).unwrap()),
        ("boundary mass", assemble_boundary_mass(mesh, &RegionSet::all()).unwrap()),
    ]
}

#[test]
fn assembled_matrices_are_symmetric() {
    let mesh = ventricle();
    let k = Sym2::from_frame([0.6, 0.8], 1.2, [-0.8, 0.6], 0.2538);
    for (name, a) in assembled(&mesh, k) {
        assert!(a.asymmetry() <= 1e-12 * a.max_abs(), "{name}");
    }
}

#[test]
fn mass_matrix_smallest_eigenvalue_is_positive() {
    // Inverse iteration on a small mesh.
    let mesh = structured_rectangle([0.0, 0.0], [1.0, 1.0], 6, 6, BoundaryRegion::Epi);
    let m = assemble_mass(&mesh, false);
    let opts = SolveOptions {
        tol: 1e-14,
        ..Default::default()
    };
    let mut x = vec![1.0; mesh.num_nodes()];
    x[3] = -2.0;
    let mut lambda = 0.0;
    for _ in 0..200 {
        let y = solve_linear(&m, &x, &opts).unwrap();
        let l = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.iter().map(|v| v / l).collect();
        lambda = m.bilinear(&x, &x);
    }
    // Consistent P1 mass on a triangle: smallest eigenvalue is area/12 per element.
    let min_area = mesh.areas().iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(lambda > 0.0);
    assert!(lambda >= 0.25 * min_area / 12.0, "{lambda}");
    let lumped = lumped_mass(&mesh);
    assert!(lumped.iter().all(|&v| v > 0.0));
}

#[test]
fn stiffness_energy_is_nonnegative_and_vanishes_on_constants() {
    let mesh = ventricle();
    let k = TensorField::uniform(Sym2::diag(1.2, 0.2538), mesh.num_triangles());
    let a = assemble_stiffness(&mesh, &k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let v: Vec<f64> = (0..mesh.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
        assert!(a.bilinear(&v, &v) >= 0.0);
    }
    let c = vec![0.7; mesh.num_nodes()];
    assert!(a.bilinear(&c, &c).abs() <= 1e-10);
    let mut bump = c.clone();
    bump[mesh.num_nodes() / 2] += 1e-3;
    assert!(a.bilinear(&bump, &bump) > 1e-10 * 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stiffness_energy_for_random_tensors(theta in 0.0f64..3.2, a in 0.01f64..2.0, r in 0.01f64..1.0, seed in 0u64..1000) {
        let mesh = structured_rectangle([0.0, 0.0], [2.0, 1.0], 8, 4, BoundaryRegion::Epi);
        let k = Sym2::from_frame([theta.cos(), theta.sin()], a, [-theta.sin(), theta.cos()], a * r);
        let kf = TensorField::uniform(k, mesh.num_triangles());
        let stiff = assemble_stiffness(&mesh, &kf).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..mesh.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
        prop_assert!(stiff.bilinear(&v, &v) >= -1e-14);
        prop_assert!(stiff.asymmetry() <= 1e-12 * stiff.max_abs());
        // Linear fields: energy equals area · ∇v·K∇v.
        let g = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let lin: Vec<f64> = mesh.nodes().iter().map(|p| g[0] * p[0] + g[1] * p[1]).collect();
        let exact = mesh.total_area() * k.bilinear(g, g);
        prop_assert!((stiff.bilinear(&lin, &lin) - exact).abs() <= 1e-10 * exact.max(1e-12));
    }
}
