//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines always reach stdout.

#[path = "../../core/tests/common/minors.rs"]
mod minors;

use std::collections::HashSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use forcefree::beltrami::{
    kernel_projector, project_onto, reduce_system, smallest_beltrami, BeltramiSolution, BoundaryCondition,
    EigenOptions, EigenPair,
};
use forcefree::cuts::{check_manifold, choose_level, critical_scan, extract_cut, harmonic_representative, verify_cut};
use forcefree::cuts::{CutSurface, HarmonicRep};
use forcefree::fem::{edge_interpolant, proxy_all, FemMatrices};
use forcefree::field::{
    classify, force_free_measure, helicity, identity_check, near_forcefree_check, support_mask, twist_density, Verdict,
};
use forcefree::generators::{gen_box_minus_ring, gen_grid, CellRing, GridSpec};
use forcefree::homology::{betti_numbers, h1_basis, lefschetz_duality_holds, relative_betti, smith_normal_form};
use forcefree::mesh::boundary_surface;
use forcefree::SimplicialComplex3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Criteria that cannot pass as written; see the README for the analysis.
const KNOWN_FAILING: [usize; 2] = [9, 10];

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(t: Instant, limit: u64) -> Result<(), String> {
    let s = t.elapsed().as_secs_f64();
    check(s < limit as f64, format!("took {s:.1}s, limit {limit}s"))
}

fn solid_torus() -> SimplicialComplex3 {
    gen_grid(GridSpec::solid_torus(4, 4, 12)).unwrap()
}

fn box_ring() -> SimplicialComplex3 {
    gen_box_minus_ring(7, CellRing::centered(7)).unwrap()
}

fn torus(n: usize) -> SimplicialComplex3 {
    gen_grid(GridSpec::torus3(n)).unwrap()
}

fn c1_dec() -> Outcome {
    let t = Instant::now();
    let meshes = [
        ("cube", gen_grid(GridSpec::cube(4)).unwrap()),
        ("solid torus", solid_torus()),
        ("3-torus", torus(8)),
        ("box-ring", box_ring()),
    ];
    for (name, c) in &meshes {
        check(c.d1().matmul(c.d0()).is_zero(), format!("{name}: D1·D0 ≠ 0"))?;
        check(c.d2().matmul(c.d1()).is_zero(), format!("{name}: D2·D1 ≠ 0"))?;
    }
    within(t, 5)?;
    Ok("D1·D0 = D2·D1 = 0 on 4 meshes".into())
}

fn c2_homology() -> Outcome {
    let t = Instant::now();
    let cases = [
        ("cube", gen_grid(GridSpec::cube(4)).unwrap(), [1, 0, 0, 0]),
        ("solid torus", solid_torus(), [1, 1, 0, 0]),
        ("T²×I", gen_grid(GridSpec::new([4; 3], [1.0; 3], [true, true, false])).unwrap(), [1, 2, 1, 0]),
        ("3-torus", torus(8), [1, 3, 3, 1]),
        ("box-ring", box_ring(), [1, 1, 1, 0]),
    ];
    for (name, c, want) in &cases {
        let h = betti_numbers(c);
        check(h.exact, format!("{name}: not exact"))?;
        check(h.betti == *want, format!("{name}: {:?}", h.betti))?;
        check(h.is_torsion_free(), format!("{name}: torsion {:?}", h.torsion))?;
        if !boundary_surface(c).unwrap().face_ids.is_empty() {
            let rel = relative_betti(c);
            check(lefschetz_duality_holds(&h, &rel), format!("{name}: duality fails, relative {:?}", rel.betti))?;
        }
    }
    within(t, 60)?;
    Ok("5 tables exact, torsion-free, duality on bounded meshes".into())
}

fn c3_snf() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..200 {
        let (r, c) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let a: Vec<Vec<i64>> = (0..r).map(|_| (0..c).map(|_| rng.gen_range(-9..=9)).collect()).collect();
        let got: Vec<String> = smith_normal_form(&a, false).invariant_factors.iter().map(|d| d.to_string()).collect();
        let want: Vec<String> = minors::invariant_factors(&a).iter().map(|d| d.to_string()).collect();
        check(got == want, format!("matrix {i}: {got:?} vs {want:?}"))?;
    }
    Ok("200/200 matrices match the minors oracle".into())
}

/// Every boundary segment of the cut lies in a boundary face of the mesh.
fn on_boundary(c: &SimplicialComplex3, cut: &CutSurface) -> bool {
    let faces: HashSet<usize> = boundary_surface(c).unwrap().face_ids.into_iter().collect();
    cut.boundary_edges.iter().all(|[a, b]| {
        let mut vs: Vec<usize> = c.edges()[a.0].iter().chain(&c.edges()[b.0]).copied().collect();
        vs.sort_unstable();
        vs.dedup();
        vs.len() == 3 && c.find_face([vs[0], vs[1], vs[2]]).is_some_and(|f| faces.contains(&f))
    })
}

fn c4_cuts() -> Outcome {
    let t = Instant::now();
    for (name, c) in [("solid torus", solid_torus()), ("box-ring", box_ring())] {
        let fem = FemMatrices::assemble(&c).unwrap();
        let basis = h1_basis(&c).unwrap();
        let rep = harmonic_representative(&c, &fem, &basis.cocycles[0].values).unwrap();
        let first = choose_level(&rep).unwrap();
        // A second regular level: the middle of the next-largest phase gap.
        let mut phases = rep.phases();
        phases.sort_by(f64::total_cmp);
        let mut gaps: Vec<(f64, f64)> =
            phases.windows(2).map(|w| (w[1] - w[0], 0.5 * (w[0] + w[1]))).filter(|g| (g.1 - first).abs() > 1e-6).collect();
        gaps.sort_by(|a, b| b.0.total_cmp(&a.0));
        let second = gaps[0].1;
        for level in [first, second] {
            let cut = extract_cut(&c, &rep, level).map_err(|e| format!("{name}: {e}"))?;
            check_manifold(&cut).map_err(|e| format!("{name}: {e}"))?;
            check(on_boundary(&c, &cut), format!("{name}: cut boundary leaves ∂M"))?;
            check(verify_cut(&c, &cut, &basis).unwrap() == vec![1], format!("{name}: crossing at level {level}"))?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi: Vec<i64> = (0..c.num_vertices()).map(|_| rng.gen_range(-5..=5)).collect();
        let shifted: Vec<i64> =
            basis.cocycles[0].values.iter().zip(c.d0().apply(&psi)).map(|(a, b)| a + b).collect();
        let rep2 = harmonic_representative(&c, &fem, &shifted).unwrap();
        let cut = extract_cut(&c, &rep2, choose_level(&rep2).unwrap()).unwrap();
        check(verify_cut(&c, &cut, &basis).unwrap() == vec![1], format!("{name}: crossing after exact shift"))?;
    }
    within(t, 30)?;
    Ok("crossing [1] at two levels and after an exact shift; manifold, boundary on ∂M".into())
}

fn c5_fibration() -> Outcome {
    let t = Instant::now();
    let c = solid_torus();
    let fem = FemMatrices::assemble(&c).unwrap();
    let basis = h1_basis(&c).unwrap();
    let rep = harmonic_representative(&c, &fem, &basis.cocycles[0].values).unwrap();
    let clean = critical_scan(&c, &rep, 1e-6).unwrap();
    check(clean.is_empty(), format!("{} critical tets on the solid torus", clean.len()))?;

    // (x−a)² − (y−a)² with a at the middle of a cell column: the eight
    // corners of every cell in that column share the value 0.
    let cube = gen_grid(GridSpec::cube(4)).unwrap();
    let a = 0.375;
    let phi: Vec<f64> = cube.vertices().iter().map(|p| (p[0] - a).powi(2) - (p[1] - a).powi(2)).collect();
    let saddle = HarmonicRep {
        omega: cube.d0().apply_f64(&phi),
        source_cocycle: vec![0; cube.num_edges()],
        phi,
        coclosure_residual: 0.0,
    };
    let found = critical_scan(&cube, &saddle, 1e-6).unwrap();
    check(!found.is_empty(), "saddle not detected")?;
    within(t, 5)?;
    Ok(format!("solid torus certified; saddle flagged in {} tets", found.len()))
}

struct Solve {
    complex: SimplicialComplex3,
    sol: BeltramiSolution,
    secs: f64,
}

fn solve_torus(n: usize) -> Solve {
    let complex = gen_grid(GridSpec::new([n; 3], [TAU; 3], [true; 3])).unwrap();
    let t = Instant::now();
    let fem = FemMatrices::assemble(&complex).unwrap();
    let sys = reduce_system(&complex, &fem, BoundaryCondition::closed_mesh()).unwrap();
    let proj = kernel_projector(&sys).unwrap();
    let sol = smallest_beltrami(&sys, &fem, &proj, &EigenOptions::new(1)).unwrap();
    Solve { complex, sol, secs: t.elapsed().as_secs_f64() }
}

fn c6_benchmark(solves: &[Solve]) -> Outcome {
    let errs: Vec<f64> = solves.iter().map(|s| (s.sol.pairs[0].lambda.abs() - 1.0).abs()).collect();
    let detail = solves
        .iter()
        .zip(&errs)
        .map(|(s, e)| format!("|λ|={:.6} err={e:.4} res={:.1e} {:.0}s", s.sol.pairs[0].lambda.abs(), s.sol.pairs[0].residual, s.secs))
        .collect::<Vec<_>>()
        .join("; ");
    check(errs[2] <= 0.05, format!("n=16 error {:.4} > 5% ({detail})", errs[2]))?;
    check(errs[0] > errs[1] && errs[1] > errs[2], format!("not decreasing ({detail})"))?;
    for s in solves {
        let p = &s.sol.pairs[0];
        check(p.residual <= 1e-8, format!("residual {:e}", p.residual))?;
        check((p.helicity / p.energy - p.lambda).abs() <= 1e-10 * p.lambda.abs(), "Rayleigh identity")?;
    }
    check(solves[2].secs < 600.0, format!("n=16 took {:.0}s", solves[2].secs))?;
    Ok(detail)
}

fn c7_kernel() -> Outcome {
    let t = Instant::now();
    let c = torus(4);
    let fem = FemMatrices::assemble(&c).unwrap();
    let sys = reduce_system(&c, &fem, BoundaryCondition::closed_mesh()).unwrap();
    let proj = kernel_projector(&sys).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let phi: Vec<f64> = (0..c.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = c.d0().apply_f64(&phi);
        let scale = g.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let r = proj.apply(&g).unwrap().iter().fold(0.0f64, |a, x| a.max(x.abs()));
        worst = worst.max(r / scale);
    }
    check(worst <= 1e-10, format!("gradient leaks {worst:e}"))?;
    check(proj.harmonic_dim() == 3, format!("3-torus harmonic dim {}", proj.harmonic_dim()))?;
    let cube = gen_grid(GridSpec::cube(4)).unwrap();
    let fem = FemMatrices::assemble(&cube).unwrap();
    let sys = reduce_system(&cube, &fem, BoundaryCondition::zero_trace()).unwrap();
    let dim = kernel_projector(&sys).unwrap().harmonic_dim();
    check(dim == 0, format!("cube harmonic dim {dim}"))?;
    within(t, 60)?;
    Ok(format!("max relative residue {worst:.1e}; harmonic dims 3 and 0"))
}

fn c8_identity() -> Outcome {
    let t = Instant::now();
    let c = torus(4);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let h: Vec<f64> = (0..c.num_edges()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        worst = worst.max(identity_check(&proxy_all(&c, &h).unwrap()));
    }
    check(worst <= 1e-12, format!("violation {worst:e}"))?;
    within(t, 5)?;
    Ok(format!("max relative violation {worst:.1e}"))
}

fn verdict(c: &SimplicialComplex3, h: &[f64]) -> (Verdict, i8, bool) {
    let m = twist_density(c, h).unwrap();
    let support = support_mask(&proxy_all(c, h).unwrap(), 1e-3);
    let k = classify(c, h, &m, &support).unwrap();
    let positive = m.iter().zip(&support).all(|(&x, &on)| !on || x > 0.0);
    (k.verdict, k.sign, positive)
}

fn c9_classification() -> Outcome {
    let t = Instant::now();
    let c = torus(8);
    let fem = FemMatrices::assemble(&c).unwrap();
    let sys = reduce_system(&c, &fem, BoundaryCondition::closed_mesh()).unwrap();
    let proj = kernel_projector(&sys).unwrap();
    let pairs = smallest_beltrami(&sys, &fem, &proj, &EigenOptions::new(12)).unwrap().pairs;
    let (pos, neg): (Vec<&EigenPair>, Vec<&EigenPair>) = pairs.iter().partition(|p| p.lambda > 0.0);
    // The shell is degenerate; take the member closest to an analytic mode.
    let h = project_onto(&fem, &pos, &edge_interpolant(&c, |p| [0.0, p[0].sin(), p[0].cos()]));

    check(verdict(&c, &h) == (Verdict::Contact, 1, true), format!("λ>0 field: {:?}", verdict(&c, &h)))?;
    let phi: Vec<f64> = (0..c.num_vertices()).map(|i| ((i * 31) % 17) as f64 - 8.0).collect();
    let g = verdict(&c, &c.d0().apply_f64(&phi)).0;
    check(g == Verdict::Foliation, format!("gradient: {g:?}"))?;
    let a = project_onto(&fem, &pos, &edge_interpolant(&c, |p| [p[1].cos(), p[0].sin(), p[0].cos() + p[1].sin()]));
    let b = project_onto(&fem, &neg, &edge_interpolant(&c, |p| [p[2].sin(), -p[2].cos(), 0.0]));
    let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let m = verdict(&c, &mix).0;
    check(m == Verdict::Mixed, format!("mixture: {m:?}"))?;
    let triple: Vec<f64> = h.iter().map(|x| 3.0 * x).collect();
    check(verdict(&c, &triple).0 == Verdict::Contact, "h → 3h changed the verdict")?;
    within(t, 60)?;
    // The literal claim: h → −h swaps the contact branch.
    let minus: Vec<f64> = h.iter().map(|x| -x).collect();
    let (v, s, _) = verdict(&c, &minus);
    check(
        (v, s) == (Verdict::Contact, -1),
        format!(
            "contact(+), foliation, mixed and h→3h all hold; h→−h gives {v:?} sign {s:+}, not a swapped branch: \
             m = H·curl H is even in h"
        ),
    )?;
    Ok("all sub-checks hold".into())
}

fn c10_inclusion(solves: &[&Solve]) -> Outcome {
    let mut ratios = Vec::new();
    let mut near = true;
    for s in solves {
        let proxies = proxy_all(&s.complex, &s.sol.pairs[0].h).unwrap();
        ratios.push(force_free_measure(&proxies, 1e-3).unwrap().ratio);
        near &= near_forcefree_check(&s.complex, &proxies, 1e-3).unwrap().iter().all(|&x| x);
    }
    let detail = format!("max|J×B|/max|J||B| = {:.3e} (n=8), {:.3e} (n=16)", ratios[0], ratios[1]);
    check(near, format!("near-force-free check fails; {detail}"))?;
    check(ratios[1] < ratios[0], format!("no tightening under refinement; {detail}"))?;
    check(ratios[1] <= 1e-6, format!("near-force-free holds and the ratio tightens, but {detail} exceeds 1e-6"))?;
    Ok(detail)
}

fn c11_gauge() -> Outcome {
    let t = Instant::now();
    let c = torus(4);
    let fem = FemMatrices::assemble(&c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h: Vec<f64> = (0..c.num_edges()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let base = helicity(&fem, &h);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let phi: Vec<f64> = (0..c.num_vertices()).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let shifted: Vec<f64> = h.iter().zip(c.d0().apply_f64(&phi)).map(|(a, b)| a + b).collect();
        worst = worst.max((helicity(&fem, &shifted) - base).abs() / base.abs());
    }
    check(worst <= 1e-10, format!("relative change {worst:e}"))?;
    within(t, 5)?;
    Ok(format!("max relative change {worst:.1e}"))
}

fn c12_reproducible() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path| {
        Command::new(env!("CARGO_BIN_EXE_forcefree"))
            .args(["pipeline", "--geometry", "solid-torus", "--n", "3,3,8", "--k", "2", "--threads", "1", "--out"])
            .arg(out)
            .output()
            .unwrap()
    };
    for sub in ["a", "b"] {
        let out = run(&dir.path().join(sub));
        check(out.status.success(), String::from_utf8_lossy(&out.stderr).into_owned())?;
    }
    let mut files: Vec<_> = std::fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|f| f.to_string_lossy().ends_with(".json"))
        .collect();
    files.sort();
    for f in &files {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        check(a == b, format!("{} differs", f.to_string_lossy()))?;
    }
    Ok(format!("{} JSON files byte-identical", files.len()))
}

fn main() {
    // Honour `cargo test -- --list` and name filters from the test runner.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }

    let mut results: Vec<(usize, bool)> = Vec::new();
    let mut report = |id: usize, name: &str, t: Duration, outcome: Outcome| {
        let (tag, msg) = match &outcome {
            Ok(m) => ("PASS", m.clone()),
            Err(m) => ("FAIL", m.clone()),
        };
        println!("criterion {id:>2} [{tag}] {name} ({:.1}s): {msg}", t.as_secs_f64());
        results.push((id, outcome.is_ok()));
    };
    let timed = |f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        (t.elapsed(), o)
    };

    let (t, o) = timed(&c1_dec);
    report(1, "DEC exactness", t, o);
    let (t, o) = timed(&c2_homology);
    report(2, "homology table", t, o);
    let (t, o) = timed(&c3_snf);
    report(3, "Smith form oracle", t, o);
    let (t, o) = timed(&c4_cuts);
    report(4, "cuts", t, o);
    let (t, o) = timed(&c5_fibration);
    report(5, "fibration certificate", t, o);

    let t = Instant::now();
    let solves: Vec<Solve> = [8, 12, 16].into_iter().map(solve_torus).collect();
    report(6, "Beltrami benchmark", t.elapsed(), c6_benchmark(&solves));
    let (t, o) = timed(&c7_kernel);
    report(7, "kernel deflation", t, o);
    let (t, o) = timed(&c8_identity);
    report(8, "four-term identity", t, o);
    let (t, o) = timed(&c9_classification);
    report(9, "classification", t, o);
    let (t, o) = timed(&|| c10_inclusion(&[&solves[0], &solves[2]]));
    report(10, "inclusion chain", t, o);
    let (t, o) = timed(&c11_gauge);
    report(11, "gauge invariance", t, o);
    let (t, o) = timed(&c12_reproducible);
    report(12, "reproducibility", t, o);

    let passed = results.iter().filter(|r| r.1).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    let unexpected: Vec<usize> = results.iter().filter(|(id, ok)| !ok && !KNOWN_FAILING.contains(id)).map(|r| r.0).collect();
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
