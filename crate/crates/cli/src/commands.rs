use std::path::Path;

use serde_json::{json, Value};

use forcefree::beltrami::{
    kernel_projector, reduce_system, residual_report, smallest_beltrami, BeltramiSolution, EigenOptions,
};
use forcefree::cuts::{check_manifold, choose_level, critical_scan, extract_cut, harmonic_representative, verify_cut, CutSurface};
use forcefree::fem::{proxy_all, FemMatrices};
use forcefree::field::{analyze, AnalysisOptions, FieldReport, TetLabel};
use forcefree::homology::{betti_numbers, h1_basis, lefschetz_duality_holds, relative_betti};
use forcefree::io::{to_json, vtk_cuts, vtk_tets, with_schema, CellData};
use forcefree::mesh::validate_complex;
use forcefree::{Error, Result, SimplicialComplex3};

use crate::config::{Level, RunConfig};

/// Threshold on |∇φ| for the fibration certificate.
const CRITICAL_EPS: f64 = 1e-6;

fn write(out: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(name), text)?;
    log::info!("wrote {}", out.join(name).display());
    Ok(())
}

fn write_json(out: &Path, name: &str, schema: &str, value: Value) -> Result<()> {
    write(out, name, &to_json(&with_schema(schema, value)))
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

pub fn gen(cfg: &RunConfig, complex: &SimplicialComplex3) -> Result<()> {
    let report = validate_complex(complex);
    write_json(
        &cfg.out,
        "mesh.json",
        "forcefree.mesh/1",
        json!({
            "grid": cfg.grid_spec().map(|s| to_value(&s)),
            "periods": complex.periods(),
            "validation": to_value(&report),
        }),
    )?;
    write(&cfg.out, "mesh.vtk", &vtk_tets(complex, "mesh", &[]))
}

pub fn homology(cfg: &RunConfig, complex: &SimplicialComplex3) -> Result<()> {
    let abs = betti_numbers(complex);
    let rel = relative_betti(complex);
    write_json(
        &cfg.out,
        "betti.json",
        "forcefree.betti/1",
        json!({
            "counts": complex.counts(),
            "euler_characteristic": complex.euler_characteristic(),
            "betti": abs.betti,
            "torsion": abs.torsion,
            "relative_betti": rel.betti,
            "relative_torsion": rel.torsion,
            "exact": abs.exact && rel.exact,
            "has_boundary": complex.has_boundary(),
            "duality_holds": lefschetz_duality_holds(&abs, &rel),
        }),
    )
}

pub fn cuts(cfg: &RunConfig, complex: &SimplicialComplex3, fem: &FemMatrices) -> Result<()> {
    let basis = h1_basis(complex)?;
    let chains: Vec<Vec<i64>> = basis.dual_cycles.iter().map(|z| z.values.clone()).collect();
    let mut surfaces: Vec<CutSurface> = Vec::new();
    let mut entries = Vec::new();
    for (i, c) in basis.cocycles.iter().enumerate() {
        let rep = harmonic_representative(complex, fem, &c.values)?;
        let level = match cfg.level {
            Level::Auto => choose_level(&rep)?,
            Level::Value(v) => v,
        };
        let cut = extract_cut(complex, &rep, level)?;
        check_manifold(&cut)?;
        let crossing = verify_cut(complex, &cut, &basis)?;
        let critical = critical_scan(complex, &rep, CRITICAL_EPS)?;
        entries.push(json!({
            "index": i,
            "level": level,
            "periods": rep.periods(&chains),
            "coclosure_residual": rep.coclosure_residual,
            "crossing": crossing,
            "triangles": cut.polygons.len(),
            "euler_characteristic": cut.euler_characteristic(),
            "components": cut.components().1,
            "area": cut.area(),
            "boundary_edges": cut.boundary_edges.len(),
            "fibration_certificate": {
                "eps": CRITICAL_EPS,
                "critical_tets": critical,
                "certified": critical.is_empty(),
            },
        }));
        surfaces.push(cut);
    }
    write_json(
        &cfg.out,
        "cuts.json",
        "forcefree.cuts/1",
        json!({
            "rank": basis.rank(),
            "basis_source": format!("{:?}", basis.source),
            "pairing": basis.pairing,
            "cocycles": entries,
        }),
    )?;
    write(&cfg.out, "cut.vtk", &vtk_cuts("cuts", &surfaces.iter().collect::<Vec<_>>()))
}

pub fn beltrami(cfg: &RunConfig, complex: &SimplicialComplex3, fem: &FemMatrices) -> Result<BeltramiSolution> {
    let bc = cfg.boundary_condition(complex);
    let sys = reduce_system(complex, fem, bc)?;
    let proj = kernel_projector(&sys)?;
    let opts = EigenOptions { tol: cfg.tol, ..EigenOptions::new(cfg.k) };
    let sol = smallest_beltrami(&sys, fem, &proj, &opts)?;
    let reports = residual_report(complex, &sol, &proj)?;
    write_json(
        &cfg.out,
        "spectrum.json",
        "forcefree.spectrum/1",
        json!({
            "bc": to_value(&sol.bc),
            "num_dofs": sys.num_dofs(),
            "harmonic_dim": sol.harmonic_dim,
            "dense": sol.dense,
            "shift": sol.shift,
            "cycles": sol.cycles,
            "operator_applications": sol.operator_applications,
            "pairs": to_value(&reports),
        }),
    )?;
    let mut fields = Vec::new();
    for p in &sol.pairs {
        let proxies = proxy_all(complex, &p.h)?;
        fields.push((proxies.iter().map(|q| q.h).collect::<Vec<_>>(), proxies.iter().map(|q| q.curl_h).collect::<Vec<_>>()));
    }
    let names: Vec<(String, String)> = (0..fields.len()).map(|i| (format!("H_{i}"), format!("curlH_{i}"))).collect();
    let data: Vec<CellData> = fields
        .iter()
        .zip(&names)
        .flat_map(|((h, c), (nh, nc))| [CellData::Vectors(nh, h), CellData::Vectors(nc, c)])
        .collect();
    write(&cfg.out, "modes.vtk", &vtk_tets(complex, "beltrami modes", &data))?;
    Ok(sol)
}

pub fn classify(cfg: &RunConfig, complex: &SimplicialComplex3, fem: &FemMatrices, h: &[f64]) -> Result<FieldReport> {
    let report = analyze(complex, fem, h, &AnalysisOptions::default())?;
    write_json(&cfg.out, "report.json", "forcefree.field/1", to_value(&report))?;
    let labels: Vec<f64> = report
        .labels
        .iter()
        .map(|l| match l {
            TetLabel::ContactPos => 1.0,
            TetLabel::ContactNeg => -1.0,
            TetLabel::Foliation => 0.0,
            TetLabel::Degenerate => 2.0,
        })
        .collect();
    write(
        &cfg.out,
        "twist.vtk",
        &vtk_tets(complex, "twist density", &[CellData::Scalars("m", &report.twist), CellData::Scalars("label", &labels)]),
    )?;
    Ok(report)
}

pub fn first_mode(sol: &BeltramiSolution) -> Result<&[f64]> {
    sol.pairs.first().map(|p| p.h.as_slice()).ok_or(Error::NoConvergence { best_residual: f64::INFINITY })
}

pub fn pipeline(cfg: &RunConfig, complex: &SimplicialComplex3) -> Result<()> {
    gen(cfg, complex)?;
    homology(cfg, complex)?;
    let fem = FemMatrices::assemble(complex)?;
    match cuts(cfg, complex, &fem) {
        Err(Error::TrivialH1) => log::info!("H¹ is trivial; no cuts"),
        other => other?,
    }
    let sol = beltrami(cfg, complex, &fem)?;
    classify(cfg, complex, &fem, first_mode(&sol)?)?;
    Ok(())
}
