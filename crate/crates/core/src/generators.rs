//! Benchmark meshes (structured grids, box minus a ring of cells) and a
//! Gmsh MSH 2.2 ASCII reader.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{build_complex, build_complex_periodic, Point3, SimplicialComplex3};

/// Structured hexahedral grid, split into tets.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct GridSpec {
    pub n: [usize; 3],
    pub lengths: [f64; 3],
    pub periodic: [bool; 3],
}

impl GridSpec {
    pub fn new(n: [usize; 3], lengths: [f64; 3], periodic: [bool; 3]) -> Self {
        Self { n, lengths, periodic }
    }

    /// Unit cube, no identifications.
    pub fn cube(n: usize) -> Self {
        Self::new([n; 3], [1.0; 3], [false; 3])
    }

    /// Unit square cross-section, periodic along z.
    pub fn solid_torus(nx: usize, ny: usize, nz: usize) -> Self {
        Self::new([nx, ny, nz], [1.0, 1.0, 1.0], [false, false, true])
    }

    /// `[0, 2π]³` with all axes identified.
    pub fn torus3(n: usize) -> Self {
        let l = 2.0 * std::f64::consts::PI;
        Self::new([n; 3], [l; 3], [true; 3])
    }

    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            if self.n[a] == 0 {
                return Err(Error::InvalidSpec(format!("axis {a} has zero cells")));
            }
            if !(self.lengths[a] > 0.0) {
                return Err(Error::InvalidSpec(format!("axis {a} length must be positive")));
            }
            // With fewer than three cells the identification glues distinct
            // edges onto the same vertex pair and the result is not simplicial.
            if self.periodic[a] && self.n[a] < 3 {
                return Err(Error::InvalidSpec(format!("periodic axis {a} needs at least 3 cells")));
            }
        }
        Ok(())
    }
}

/// The six Freudenthal (Kuhn) tets of a unit cell, as paths from corner 000
/// to 111 through one axis step at a time.
const AXIS_ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

struct Lattice {
    spec: GridSpec,
    m: [usize; 3],
}

impl Lattice {
    fn new(spec: GridSpec) -> Self {
        let m = [0, 1, 2].map(|a| if spec.periodic[a] { spec.n[a] } else { spec.n[a] + 1 });
        Self { spec, m }
    }

    fn index(&self, mut ijk: [usize; 3]) -> usize {
        for a in 0..3 {
            ijk[a] %= self.m[a];
        }
        ijk[0] + self.m[0] * (ijk[1] + self.m[1] * ijk[2])
    }

    fn num_vertices(&self) -> usize {
        self.m.iter().product()
    }

    fn coords(&self) -> Vec<Point3> {
        let mut out = Vec::with_capacity(self.num_vertices());
        for k in 0..self.m[2] {
            for j in 0..self.m[1] {
                for i in 0..self.m[0] {
                    let ijk = [i, j, k];
                    out.push([0, 1, 2].map(|a| ijk[a] as f64 * self.spec.lengths[a] / self.spec.n[a] as f64));
                }
            }
        }
        out
    }

    fn cell_tets(&self, cell: [usize; 3]) -> [[usize; 4]; 6] {
        AXIS_ORDERS.map(|order| {
            let mut p = cell;
            let mut tet = [self.index(p), 0, 0, 0];
            for (s, &axis) in order.iter().enumerate() {
                p[axis] += 1;
                tet[s + 1] = self.index(p);
            }
            tet
        })
    }

    fn cells(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let n = self.spec.n;
        (0..n[2]).flat_map(move |k| (0..n[1]).flat_map(move |j| (0..n[0]).map(move |i| [i, j, k])))
    }
}

/// Freudenthal 6-tet subdivision of a structured grid; periodic axes are
/// identified. `(F,F,F)` is a ball, `(F,F,T)` a solid torus, `(T,T,F)`
/// is T²×I and `(T,T,T)` the 3-torus.
pub fn gen_grid(spec: GridSpec) -> Result<SimplicialComplex3> {
    spec.validate()?;
    let lattice = Lattice::new(spec);
    let tets: Vec<[usize; 4]> = lattice.cells().flat_map(|c| lattice.cell_tets(c)).collect();
    let periods = [0, 1, 2].map(|a| spec.periodic[a].then_some(spec.lengths[a]));
    build_complex_periodic(lattice.coords(), tets, periods)
}

/// A closed loop of cells running around the perimeter of the rectangle
/// `lo..=hi` (cell indices in x and y) within the z-slab `slab`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct CellRing {
    pub slab: usize,
    pub lo: [usize; 2],
    pub hi: [usize; 2],
}

impl CellRing {
    /// Smallest square ring (one-cell hole) centred in an `n`-cell box.
    pub fn centered(n: usize) -> Self {
        let c = n / 2;
        Self { slab: c, lo: [c.saturating_sub(1); 2], hi: [c + 1; 2] }
    }

    fn contains(&self, [i, j, k]: [usize; 3]) -> bool {
        k == self.slab
            && (self.lo[0]..=self.hi[0]).contains(&i)
            && (self.lo[1]..=self.hi[1]).contains(&j)
            && (i == self.lo[0] || i == self.hi[0] || j == self.lo[1] || j == self.hi[1])
    }
}

/// Unit cube with `n` cells per side, with the cells of `ring` removed.
/// The boundary is the outer sphere plus the torus around the ring.
pub fn gen_box_minus_ring(n: usize, ring: CellRing) -> Result<SimplicialComplex3> {
    for a in 0..2 {
        if ring.hi[a] < ring.lo[a] + 2 {
            return Err(Error::RingTouchesBoundary(format!("ring {ring:?} encloses no hole")));
        }
    }
    let inside = |v: usize| v >= 1 && v + 2 <= n;
    if !(inside(ring.lo[0]) && inside(ring.lo[1]) && inside(ring.hi[0]) && inside(ring.hi[1]) && inside(ring.slab)) {
        return Err(Error::RingTouchesBoundary(format!("ring {ring:?} is not strictly inside a {n}-cell box")));
    }
    let lattice = Lattice::new(GridSpec::cube(n));
    let tets: Vec<[usize; 4]> =
        lattice.cells().filter(|&c| !ring.contains(c)).flat_map(|c| lattice.cell_tets(c)).collect();
    let coords = lattice.coords();
    let (coords, tets) = compact(coords, tets);
    build_complex(coords, tets)
}

/// Drops vertices referenced by no tet and renumbers the rest in order.
fn compact(coords: Vec<Point3>, tets: Vec<[usize; 4]>) -> (Vec<Point3>, Vec<[usize; 4]>) {
    let mut map = vec![usize::MAX; coords.len()];
    for tet in &tets {
        for &v in tet {
            map[v] = 0;
        }
    }
    let mut kept = Vec::new();
    for (v, slot) in map.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = kept.len();
            kept.push(coords[v]);
        }
    }
    let tets = tets.into_iter().map(|t| t.map(|v| map[v])).collect();
    (kept, tets)
}

/// Reads a Gmsh MSH 2.2 ASCII file. Only 4-node tetrahedra (type 4) are used.
pub fn read_msh(path: impl AsRef<Path>) -> Result<SimplicialComplex3> {
    let text = std::fs::read_to_string(path)?;
    parse_msh(&text)
}

pub fn parse_msh(text: &str) -> Result<SimplicialComplex3> {
    let lines: Vec<&str> = text.lines().collect();
    let err = |line: usize, message: String| Error::ParseError { line: line + 1, message };
    let mut nodes: HashMap<i64, usize> = HashMap::new();
    let mut coords: Vec<Point3> = Vec::new();
    let mut tets: Vec<[usize; 4]> = Vec::new();
    let mut ignored = 0usize;
    let mut saw_format = false;
    let mut i = 0;

    let count_at = |i: usize, what: &str| -> Result<usize> {
        lines
            .get(i)
            .ok_or_else(|| err(i, format!("missing {what} count")))?
            .trim()
            .parse::<usize>()
            .map_err(|e| err(i, format!("bad {what} count: {e}")))
    };

    while i < lines.len() {
        let line = lines[i].trim();
        match line {
            "" => i += 1,
            "$MeshFormat" => {
                let fields: Vec<&str> = lines.get(i + 1).map(|l| l.split_whitespace().collect()).unwrap_or_default();
                if fields.len() < 3 {
                    return Err(err(i + 1, "malformed $MeshFormat header".into()));
                }
                if !fields[0].starts_with("2.") {
                    return Err(err(i + 1, format!("unsupported MSH version {}", fields[0])));
                }
                if fields[1] != "0" {
                    return Err(err(i + 1, "binary MSH files are not supported".into()));
                }
                expect(&lines, i + 2, "$EndMeshFormat")?;
                saw_format = true;
                i += 3;
            }
            "$Nodes" => {
                let count = count_at(i + 1, "node")?;
                for k in 0..count {
                    let ln = i + 2 + k;
                    let f: Vec<&str> = lines.get(ln).map(|l| l.split_whitespace().collect()).unwrap_or_default();
                    if f.len() != 4 || f[0].starts_with('$') {
                        return Err(err(ln, format!("expected node line {} of {count}", k + 1)));
                    }
                    let id: i64 = f[0].parse().map_err(|e| err(ln, format!("bad node id: {e}")))?;
                    let mut p = [0.0; 3];
                    for a in 0..3 {
                        p[a] = f[a + 1].parse().map_err(|e| err(ln, format!("bad coordinate: {e}")))?;
                    }
                    if nodes.insert(id, coords.len()).is_some() {
                        return Err(err(ln, format!("duplicate node id {id}")));
                    }
                    coords.push(p);
                }
                expect(&lines, i + 2 + count, "$EndNodes")?;
                i += 3 + count;
            }
            "$Elements" => {
                let count = count_at(i + 1, "element")?;
                for k in 0..count {
                    let ln = i + 2 + k;
                    let f: Vec<&str> = lines.get(ln).map(|l| l.split_whitespace().collect()).unwrap_or_default();
                    if f.len() < 3 || f[0].starts_with('$') {
                        return Err(err(ln, format!("expected element line {} of {count}", k + 1)));
                    }
                    let parse = |s: &str| s.parse::<i64>().map_err(|e| err(ln, format!("bad integer {s:?}: {e}")));
                    let etype = parse(f[1])?;
                    let ntags = parse(f[2])? as usize;
                    let conn = f.get(3 + ntags..).ok_or_else(|| err(ln, "tag count exceeds line".into()))?;
                    if etype != 4 {
                        ignored += 1;
                        continue;
                    }
                    if conn.len() != 4 {
                        return Err(err(ln, format!("tetrahedron with {} nodes", conn.len())));
                    }
                    let mut tet = [0usize; 4];
                    for (slot, s) in tet.iter_mut().zip(conn) {
                        let id = parse(s)?;
                        *slot = *nodes.get(&id).ok_or_else(|| err(ln, format!("unknown node {id}")))?;
                    }
                    tets.push(tet);
                }
                expect(&lines, i + 2 + count, "$EndElements")?;
                i += 3 + count;
            }
            s if s.starts_with('$') && !s.starts_with("$End") => {
                let end = format!("$End{}", &s[1..]);
                let skip = lines[i..].iter().position(|l| l.trim() == end).ok_or_else(|| err(i, format!("unterminated {s}")))?;
                i += skip + 1;
            }
            other => return Err(err(i, format!("unexpected line {other:?}"))),
        }
    }
    if !saw_format {
        return Err(err(0, "missing $MeshFormat section".into()));
    }
    if ignored > 0 {
        log::warn!("ignored {ignored} non-tetrahedral elements");
    }
    if tets.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let (coords, tets) = compact(coords, tets);
    build_complex(coords, tets)
}

fn expect(lines: &[&str], i: usize, tag: &str) -> Result<()> {
    match lines.get(i) {
        Some(l) if l.trim() == tag => Ok(()),
        Some(l) => Err(Error::ParseError { line: i + 1, message: format!("expected {tag}, found {:?}", l.trim()) }),
        None => Err(Error::ParseError { line: i + 1, message: format!("expected {tag}, found end of file") }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{boundary_surface, validate_complex};
    use std::collections::BTreeSet;

    /// Independent count of distinct sub-simplices by brute-force enumeration.
    fn brute_counts(c: &SimplicialComplex3) -> [usize; 4] {
        let mut sets: [BTreeSet<Vec<usize>>; 4] = Default::default();
        for tet in c.tets() {
            for mask in 1u32..16 {
                let mut s: Vec<usize> = (0..4).filter(|i| mask & (1 << i) != 0).map(|i| tet[i]).collect();
                s.sort_unstable();
                sets[s.len() - 1].insert(s);
            }
        }
        [sets[0].len(), sets[1].len(), sets[2].len(), sets[3].len()]
    }

    #[test]
    fn unit_cell_counts() {
        let c = gen_grid(GridSpec::cube(1)).unwrap();
        assert_eq!(brute_counts(&c), [8, 19, 18, 6]);
        assert_eq!(c.counts(), [8, 19, 18, 6]);
        assert_eq!(c.euler_characteristic(), 1);
    }

    #[test]
    fn periodic_counts() {
        for n in 3..6 {
            let c = gen_grid(GridSpec::torus3(n)).unwrap();
            let n3 = n * n * n;
            assert_eq!(brute_counts(&c), [n3, 7 * n3, 12 * n3, 6 * n3]);
            assert_eq!(c.counts(), [n3, 7 * n3, 12 * n3, 6 * n3]);
            assert_eq!(c.euler_characteristic(), 0);
            assert!(!c.has_boundary());
        }
    }

    #[test]
    fn solid_torus_shape() {
        let c = gen_grid(GridSpec::solid_torus(2, 2, 4)).unwrap();
        assert_eq!(c.euler_characteristic(), 0);
        let s = boundary_surface(&c).unwrap();
        assert_eq!(s.components.len(), 1);
        assert_eq!(s.components[0].genus, 1);
        assert!(validate_complex(&c).passed);
    }

    #[test]
    fn cube_boundary_is_sphere() {
        let c = gen_grid(GridSpec::cube(3)).unwrap();
        let s = boundary_surface(&c).unwrap();
        assert_eq!(s.components.iter().map(|c| c.genus).collect::<Vec<_>>(), vec![0]);
        assert!((c.total_volume() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn short_periodic_axis_rejected() {
        let r = gen_grid(GridSpec::new([2, 2, 2], [1.0; 3], [true, false, false]));
        assert!(matches!(r, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn box_minus_ring_topology() {
        let c = gen_box_minus_ring(5, CellRing::centered(5)).unwrap();
        assert_eq!(c.euler_characteristic(), 1);
        let report = validate_complex(&c);
        assert!(report.passed, "{:?}", report.failures);
        let mut genera: Vec<i64> = report.boundary_components.iter().map(|b| b.1).collect();
        genera.sort_unstable();
        assert_eq!(genera, vec![0, 1]);
    }

    #[test]
    fn ring_touching_wall_rejected() {
        let ring = CellRing { slab: 2, lo: [0, 1], hi: [2, 3] };
        assert!(matches!(gen_box_minus_ring(5, ring), Err(Error::RingTouchesBoundary(_))));
        let ring = CellRing { slab: 4, lo: [1, 1], hi: [3, 3] };
        assert!(matches!(gen_box_minus_ring(5, ring), Err(Error::RingTouchesBoundary(_))));
    }

    const ONE_TET: &str = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 0 1 0\n4 0 0 1\n$EndNodes\n$Elements\n2\n1 2 2 0 1 1 2 3\n2 4 2 0 1 1 2 3 4\n$EndElements\n";

    #[test]
    fn msh_single_tet() {
        let c = parse_msh(ONE_TET).unwrap();
        assert_eq!(c.counts(), [4, 6, 4, 1]);
    }

    #[test]
    fn msh_triangles_only_is_empty() {
        let text = ONE_TET.replace("2\n1 2 2 0 1 1 2 3\n2 4 2 0 1 1 2 3 4", "1\n1 2 2 0 1 1 2 3");
        assert!(matches!(parse_msh(&text), Err(Error::EmptyMesh)));
    }

    #[test]
    fn msh_bad_element_count() {
        let text = ONE_TET.replace("$Elements\n2\n", "$Elements\nx2\n");
        assert!(matches!(parse_msh(&text), Err(Error::ParseError { line: 12, .. })));
        let text = ONE_TET.replace("$Elements\n2\n", "$Elements\n3\n");
        assert!(matches!(parse_msh(&text), Err(Error::ParseError { .. })));
    }

    #[test]
    fn msh_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.msh");
        std::fs::write(&p, ONE_TET).unwrap();
        assert_eq!(read_msh(&p).unwrap().num_tets(), 1);
    }
}
