use forcefree::beltrami::{
    kernel_projector, reduce_system, residual_report, smallest_beltrami, BeltramiSolution, BoundaryCondition,
    EigenOptions, LagrangianChoice, Method,
};
use forcefree::fem::{edge_interpolant, FemMatrices};
use forcefree::generators::{gen_grid, GridSpec};
use forcefree::SimplicialComplex3;

fn solve(c: &SimplicialComplex3, bc: BoundaryCondition, opts: EigenOptions) -> (FemMatrices, BeltramiSolution) {
    let fem = FemMatrices::assemble(c).unwrap();
    let sys = reduce_system(c, &fem, bc).unwrap();
    let proj = kernel_projector(&sys).unwrap();
    let sol = smallest_beltrami(&sys, &fem, &proj, &opts).unwrap();
    (fem, sol)
}

fn torus(n: usize, side: f64) -> SimplicialComplex3 {
    gen_grid(GridSpec::new([n; 3], [side; 3], [true; 3])).unwrap()
}

const TAU: f64 = 2.0 * std::f64::consts::PI;

#[test]
fn analytic_field_rayleigh_quotient_converges() {
    // (0, sin x, cos x) has curl equal to itself.
    let err = |n: usize| {
        let c = torus(n, TAU);
        let fem = FemMatrices::assemble(&c).unwrap();
        let h = edge_interpolant(&c, |p| [0.0, p[0].sin(), p[0].cos()]);
        (fem.s.bilinear(&h, &h) / fem.m1.bilinear(&h, &h) - 1.0).abs()
    };
    let (coarse, fine) = (err(8), err(16));
    assert!(fine < 0.02 && fine < coarse / 1.8, "{coarse} {fine}");
}

#[test]
fn lowest_shell_is_symmetric_and_twelvefold() {
    let c = torus(4, TAU);
    let (_, sol) = solve(&c, BoundaryCondition::closed_mesh(), EigenOptions::new(12));
    assert!(sol.dense);
    let pos = sol.pairs.iter().filter(|p| p.lambda > 0.0).count();
    assert_eq!(pos, 6);
    let l0 = sol.pairs[0].lambda.abs();
    for p in &sol.pairs {
        assert!((p.lambda.abs() - l0).abs() < 1e-9 * l0);
    }
}

#[test]
fn krylov_matches_dense() {
    let c = torus(4, TAU);
    let (_, dense) = solve(&c, BoundaryCondition::closed_mesh(), EigenOptions::new(2));
    let (_, krylov) = solve(&c, BoundaryCondition::closed_mesh(), EigenOptions { method: Method::Krylov, ..EigenOptions::new(2) });
    assert!(!krylov.dense);
    for (a, b) in dense.pairs.iter().zip(&krylov.pairs) {
        assert!((a.lambda.abs() - b.lambda.abs()).abs() < 1e-9, "{} {}", a.lambda, b.lambda);
        assert!(b.residual <= 1e-8);
    }
}

#[test]
fn eigenvalues_scale_inversely_with_size() {
    let (_, a) = solve(&torus(4, TAU), BoundaryCondition::closed_mesh(), EigenOptions::new(1));
    let (_, b) = solve(&torus(4, 2.0 * TAU), BoundaryCondition::closed_mesh(), EigenOptions::new(1));
    let (la, lb) = (a.pairs[0].lambda.abs(), b.pairs[0].lambda.abs());
    assert!((lb - la / 2.0).abs() < 1e-10 * la, "{la} {lb}");
}

#[test]
fn pairs_are_mass_orthonormal_and_satisfy_rayleigh() {
    let c = torus(4, TAU);
    let (fem, sol) = solve(&c, BoundaryCondition::closed_mesh(), EigenOptions::new(4));
    for (i, p) in sol.pairs.iter().enumerate() {
        assert!((p.helicity / p.energy - p.lambda).abs() <= 1e-10 * p.lambda.abs());
        for (j, q) in sol.pairs.iter().enumerate() {
            let g = fem.m1.bilinear(&p.h, &q.h);
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((g - want).abs() < 1e-8, "{i} {j} {g}");
        }
    }
}

#[test]
fn residual_report_on_krylov_solution() {
    let c = torus(6, TAU);
    let fem = FemMatrices::assemble(&c).unwrap();
    let sys = reduce_system(&c, &fem, BoundaryCondition::closed_mesh()).unwrap();
    let proj = kernel_projector(&sys).unwrap();
    let sol = smallest_beltrami(&sys, &fem, &proj, &EigenOptions::new(1)).unwrap();
    assert!(!sol.dense);
    let r = &residual_report(&c, &sol, &proj).unwrap()[0];
    assert!(r.residual <= 1e-8);
    assert!((r.rayleigh_ratio - r.lambda).abs() <= 1e-10 * r.lambda.abs());
    assert!(r.divergence <= 1e-8, "{}", r.divergence);
    assert!((r.lambda.abs() - 0.877).abs() < 0.01, "{}", r.lambda);
}

#[test]
fn bounded_domains() {
    let cube = gen_grid(GridSpec::cube(3)).unwrap();
    let (_, sol) = solve(&cube, BoundaryCondition::zero_trace(), EigenOptions::new(1));
    assert_eq!(sol.harmonic_dim, 0);
    assert!(sol.pairs[0].lambda.abs() > 1.0 && sol.pairs[0].residual <= 1e-8);

    let st = gen_grid(GridSpec::solid_torus(3, 3, 6)).unwrap();
    for choice in [LagrangianChoice::Meridian, LagrangianChoice::Longitude] {
        let (_, sol) = solve(&st, BoundaryCondition::closed_trace(choice), EigenOptions::new(1));
        assert!(sol.pairs[0].residual <= 1e-8);
    }
}

#[test]
fn incompatible_conditions_are_rejected() {
    let cube = gen_grid(GridSpec::cube(2)).unwrap();
    let fem = FemMatrices::assemble(&cube).unwrap();
    let e = reduce_system(&cube, &fem, BoundaryCondition::closed_mesh()).unwrap_err();
    assert_eq!(e.kind(), "IncompatibleBC");
    let t = torus(3, TAU);
    let fem = FemMatrices::assemble(&t).unwrap();
    assert!(reduce_system(&t, &fem, BoundaryCondition::zero_trace()).is_err());
}
