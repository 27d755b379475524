//! File output: legacy ASCII VTK and JSON with fixed float formatting.

use std::collections::HashMap;
use std::fmt::Write;

use serde_json::Value;

use crate::cuts::{CutKey, CutSurface};
use crate::mesh::{Point3, SimplicialComplex3};

/// VTK cell type for a linear tetrahedron.
const VTK_TETRA: u8 = 10;

fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

/// Pretty JSON where every float carries 17 significant digits.
pub fn to_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    let pad = |out: &mut String, d: usize| out.extend(std::iter::repeat("  ").take(d));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&fmt_f64(n.as_f64().unwrap()));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            // Short numeric arrays stay on one line.
            if items.iter().all(|x| x.is_number()) && items.len() <= 8 {
                out.push('[');
                for (i, x) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, x, depth);
                }
                out.push(']');
                return;
            }
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, x) in items.iter().enumerate() {
                pad(out, depth + 1);
                write_value(out, x, depth + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in map.iter().enumerate() {
                pad(out, depth + 1);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(out, x, depth + 1);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, depth);
            out.push('}');
        }
    }
}

/// Adds the `"schema"` tag to a JSON object.
pub fn with_schema(schema: &str, mut value: Value) -> Value {
    if let Value::Object(map) = &mut value {
        map.insert("schema".into(), Value::String(schema.into()));
    }
    value
}

pub enum CellData<'a> {
    Scalars(&'a str, &'a [f64]),
    Vectors(&'a str, &'a [Point3]),
}

fn push_point(out: &mut String, p: Point3) {
    let _ = writeln!(out, "{} {} {}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(p[2]));
}

/// Tetrahedral mesh as an unstructured grid. Periodic meshes get four
/// private points per tet so wrapped cells are not stretched across the box.
pub fn vtk_tets(complex: &SimplicialComplex3, title: &str, data: &[CellData]) -> String {
    let nt = complex.num_tets();
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let cells: Vec<[usize; 4]> = if complex.is_periodic() {
        let _ = writeln!(out, "POINTS {} double", 4 * nt);
        for t in 0..nt {
            for p in complex.tet_coords(t) {
                push_point(&mut out, p);
            }
        }
        (0..nt).map(|t| [4 * t, 4 * t + 1, 4 * t + 2, 4 * t + 3]).collect()
    } else {
        let _ = writeln!(out, "POINTS {} double", complex.num_vertices());
        for &p in complex.vertices() {
            push_point(&mut out, p);
        }
        complex.tets().to_vec()
    };
    let _ = writeln!(out, "CELLS {} {}", nt, 5 * nt);
    for c in &cells {
        let _ = writeln!(out, "4 {} {} {} {}", c[0], c[1], c[2], c[3]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(out, "{VTK_TETRA}");
    }
    if !data.is_empty() {
        let _ = writeln!(out, "CELL_DATA {nt}");
    }
    for d in data {
        match d {
            CellData::Scalars(name, v) => {
                let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for &x in v.iter() {
                    let _ = writeln!(out, "{}", fmt_f64(x));
                }
            }
            CellData::Vectors(name, v) => {
                let _ = writeln!(out, "VECTORS {name} double");
                for &p in v.iter() {
                    push_point(&mut out, p);
                }
            }
        }
    }
    out
}

/// Cut surfaces as polydata; vertices are shared through their crossing keys.
pub fn vtk_cuts(title: &str, cuts: &[&CutSurface]) -> String {
    let mut index: HashMap<(usize, CutKey), usize> = HashMap::new();
    let mut points: Vec<Point3> = Vec::new();
    let mut tris: Vec<[usize; 3]> = Vec::new();
    let mut owner: Vec<f64> = Vec::new();
    for (ci, cut) in cuts.iter().enumerate() {
        for (poly, keys) in cut.polygons.iter().zip(&cut.keys) {
            let tri: [usize; 3] = std::array::from_fn(|i| {
                *index.entry((ci, keys[i])).or_insert_with(|| {
                    points.push(poly[i]);
                    points.len() - 1
                })
            });
            tris.push(tri);
            owner.push(ci as f64);
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET POLYDATA");
    let _ = writeln!(out, "POINTS {} double", points.len());
    for &p in &points {
        push_point(&mut out, p);
    }
    let _ = writeln!(out, "POLYGONS {} {}", tris.len(), 4 * tris.len());
    for t in &tris {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    if !tris.is_empty() {
        let _ = writeln!(out, "CELL_DATA {}\nSCALARS cocycle double 1\nLOOKUP_TABLE default", tris.len());
        for x in owner {
            let _ = writeln!(out, "{}", fmt_f64(x));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_grid, GridSpec};

    #[test]
    fn floats_carry_seventeen_digits() {
        let v = serde_json::json!({"x": 0.1, "n": 3, "a": [1.0, -2.5]});
        let s = to_json(&v);
        assert!(s.contains("\"x\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn vtk_counts_are_consistent() {
        let c = gen_grid(GridSpec::torus3(3)).unwrap();
        let m = vec![1.0; c.num_tets()];
        let s = vtk_tets(&c, "t", &[CellData::Scalars("m", &m)]);
        let nt = c.num_tets();
        assert!(s.contains(&format!("POINTS {} double", 4 * nt)));
        assert!(s.contains(&format!("CELLS {nt} {}", 5 * nt)));
        assert_eq!(s.lines().filter(|l| *l == "10").count(), nt);
    }
}
