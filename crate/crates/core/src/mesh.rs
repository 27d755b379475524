//! Tetrahedral simplicial 3-complexes and their signed incidence operators.
//!
//! Edges and faces are keyed by their sorted vertex tuples. The sign of an
//! incidence entry is the parity of the permutation between a simplex's
//! intrinsic vertex order and that key, so every operator is exact and the
//! same input always yields the same operators.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::sparse::IntMatrix;

pub type Point3 = [f64; 3];

/// Local vertex pairs of the six tet edges, in the order used by `tet_edges`.
pub const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

const NONE: usize = usize::MAX;

/// Values on the oriented `degree`-simplices of a complex.
#[derive(Clone, Debug, PartialEq)]
pub struct Cochain<T> {
    pub degree: usize,
    pub values: Vec<T>,
}

impl<T: Clone + Default> Cochain<T> {
    pub fn zeros(degree: usize, len: usize) -> Self {
        Self { degree, values: vec![T::default(); len] }
    }
}

impl<T> Cochain<T> {
    pub fn new(degree: usize, values: Vec<T>) -> Self {
        Self { degree, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Cochain<i64> {
    pub fn to_f64(&self) -> Cochain<f64> {
        Cochain::new(self.degree, self.values.iter().map(|&v| v as f64).collect())
    }
}

#[derive(Clone, Debug)]
pub struct SimplicialComplex3 {
    pub(crate) vertices: Vec<Point3>,
    pub(crate) tets: Vec<[usize; 4]>,
    pub(crate) edges: Vec<[usize; 2]>,
    pub(crate) faces: Vec<[usize; 3]>,
    /// Per tet: global edge index and orientation sign for each entry of `TET_EDGES`.
    pub(crate) tet_edges: Vec<[(usize, i8); 6]>,
    /// Per tet: global face index opposite local vertex `i`.
    pub(crate) tet_faces: Vec<[usize; 4]>,
    pub(crate) face_tets: Vec<[usize; 2]>,
    pub(crate) d0: IntMatrix,
    pub(crate) d1: IntMatrix,
    pub(crate) d2: IntMatrix,
    pub(crate) boundary_faces: Vec<usize>,
    pub(crate) periods: [Option<f64>; 3],
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: Point3, b: Point3) -> Point3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn dot3(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn signed_volume(p: &[Point3; 4]) -> f64 {
    dot3(sub(p[1], p[0]), cross(sub(p[2], p[0]), sub(p[3], p[0]))) / 6.0
}

/// Parity of the permutation that sorts `v` (entries distinct).
fn sort_parity(v: &[usize]) -> i64 {
    let mut sign = 1;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            if v[i] > v[j] {
                sign = -sign;
            }
        }
    }
    sign
}

fn wrap(d: f64, period: Option<f64>) -> f64 {
    match period {
        Some(l) => d - l * (d / l).round(),
        None => d,
    }
}

/// Builds a complex embedded in ℝ³.
pub fn build_complex(vertices: Vec<Point3>, tets: Vec<[usize; 4]>) -> Result<SimplicialComplex3> {
    build_complex_periodic(vertices, tets, [None, None, None])
}

/// Builds a complex whose coordinates live in a periodic cell. Axes with
/// `Some(length)` are identified with that period; tet shapes use the
/// minimal-image offset of each vertex from the tet's first vertex.
pub fn build_complex_periodic(
    vertices: Vec<Point3>,
    mut tets: Vec<[usize; 4]>,
    periods: [Option<f64>; 3],
) -> Result<SimplicialComplex3> {
    if tets.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let nv = vertices.len();
    let mut seen = HashMap::with_capacity(tets.len());
    let mut used = vec![false; nv];
    for (t, tet) in tets.iter().enumerate() {
        for &v in tet {
            if v >= nv {
                return Err(Error::InvalidMesh(format!("tet {t} references vertex {v} of {nv}")));
            }
            used[v] = true;
        }
        let mut key = *tet;
        key.sort_unstable();
        if key.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DegenerateTet { tet: t, relative_volume: 0.0 });
        }
        if let Some(prev) = seen.insert(key, t) {
            return Err(Error::InvalidMesh(format!("tets {prev} and {t} are duplicates")));
        }
    }
    if let Some(v) = used.iter().position(|u| !u) {
        return Err(Error::InvalidMesh(format!("vertex {v} belongs to no tet")));
    }

    let coords = |tet: &[usize; 4]| -> [Point3; 4] {
        let p0 = vertices[tet[0]];
        let mut p = [p0; 4];
        for i in 1..4 {
            let d = sub(vertices[tet[i]], p0);
            for a in 0..3 {
                p[i][a] = p0[a] + wrap(d[a], periods[a]);
            }
        }
        p
    };
    let volumes: Vec<f64> = tets.iter().map(|t| signed_volume(&coords(t))).collect();
    let mean = volumes.iter().map(|v| v.abs()).sum::<f64>() / volumes.len() as f64;
    for (t, &vol) in volumes.iter().enumerate() {
        let rel = vol.abs() / mean;
        if !(rel >= 1e-14) {
            return Err(Error::DegenerateTet { tet: t, relative_volume: rel });
        }
        if vol < 0.0 {
            tets[t].swap(2, 3);
        }
    }

    let mut edge_set = Vec::with_capacity(tets.len() * 6);
    let mut face_set = Vec::with_capacity(tets.len() * 4);
    for tet in &tets {
        for [a, b] in TET_EDGES {
            let (x, y) = (tet[a].min(tet[b]), tet[a].max(tet[b]));
            edge_set.push([x, y]);
        }
        for skip in 0..4 {
            let mut f: Vec<usize> = (0..4).filter(|&i| i != skip).map(|i| tet[i]).collect();
            f.sort_unstable();
            face_set.push([f[0], f[1], f[2]]);
        }
    }
    edge_set.sort_unstable();
    edge_set.dedup();
    face_set.sort_unstable();
    face_set.dedup();
    let edges = edge_set;
    let faces = face_set;
    let edge_index: HashMap<[usize; 2], usize> = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let face_index: HashMap<[usize; 3], usize> = faces.iter().enumerate().map(|(i, &f)| (f, i)).collect();

    let mut tet_edges = Vec::with_capacity(tets.len());
    let mut tet_faces = Vec::with_capacity(tets.len());
    let mut face_tets = vec![[NONE, NONE]; faces.len()];
    let mut d2_rows = Vec::with_capacity(tets.len());
    for (t, tet) in tets.iter().enumerate() {
        let mut te = [(0usize, 0i8); 6];
        for (k, [a, b]) in TET_EDGES.iter().enumerate() {
            let (va, vb) = (tet[*a], tet[*b]);
            let key = [va.min(vb), va.max(vb)];
            te[k] = (edge_index[&key], if va < vb { 1 } else { -1 });
        }
        tet_edges.push(te);
        let mut tf = [0usize; 4];
        let mut row = Vec::with_capacity(4);
        for skip in 0..4 {
            let ordered: Vec<usize> = (0..4).filter(|&i| i != skip).map(|i| tet[i]).collect();
            let mut key = ordered.clone();
            key.sort_unstable();
            let f = face_index[&[key[0], key[1], key[2]]];
            tf[skip] = f;
            let sign = if skip % 2 == 0 { 1 } else { -1 } * sort_parity(&ordered);
            row.push((f, sign));
            let slot = &mut face_tets[f];
            if slot[0] == NONE {
                slot[0] = t;
            } else if slot[1] == NONE {
                slot[1] = t;
            } else {
                let count = tets.iter().filter(|other| other.iter().filter(|v| key.contains(v)).count() == 3).count();
                return Err(Error::NonManifoldFace { face: [key[0], key[1], key[2]], count });
            }
        }
        tet_faces.push(tf);
        d2_rows.push(row);
    }

    let d0 = IntMatrix::from_rows(nv, edges.iter().map(|&[a, b]| vec![(a, -1), (b, 1)]).collect());
    let d1 = IntMatrix::from_rows(
        edges.len(),
        faces
            .iter()
            .map(|&[a, b, c]| vec![(edge_index[&[b, c]], 1), (edge_index[&[a, c]], -1), (edge_index[&[a, b]], 1)])
            .collect(),
    );
    let d2 = IntMatrix::from_rows(faces.len(), d2_rows);
    let boundary_faces = face_tets.iter().enumerate().filter(|(_, s)| s[1] == NONE).map(|(f, _)| f).collect();

    Ok(SimplicialComplex3 {
        vertices,
        tets,
        edges,
        faces,
        tet_edges,
        tet_faces,
        face_tets,
        d0,
        d1,
        d2,
        boundary_faces,
        periods,
    })
}

impl SimplicialComplex3 {
    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn counts(&self) -> [usize; 4] {
        [self.num_vertices(), self.num_edges(), self.num_faces(), self.num_tets()]
    }

    /// Number of `k`-simplices.
    pub fn count(&self, k: usize) -> usize {
        self.counts()[k]
    }

    pub fn euler_characteristic(&self) -> i64 {
        let [v, e, f, t] = self.counts();
        v as i64 - e as i64 + f as i64 - t as i64
    }

    pub fn periods(&self) -> [Option<f64>; 3] {
        self.periods
    }

    pub fn is_periodic(&self) -> bool {
        self.periods.iter().any(Option::is_some)
    }

    pub fn d0(&self) -> &IntMatrix {
        &self.d0
    }

    pub fn d1(&self) -> &IntMatrix {
        &self.d1
    }

    pub fn d2(&self) -> &IntMatrix {
        &self.d2
    }

    pub fn tet_edges(&self, t: usize) -> &[(usize, i8); 6] {
        &self.tet_edges[t]
    }

    pub fn tet_faces(&self, t: usize) -> &[usize; 4] {
        &self.tet_faces[t]
    }

    /// Tets incident to face `f` (one for boundary faces).
    pub fn face_tets(&self, f: usize) -> impl Iterator<Item = usize> + '_ {
        self.face_tets[f].iter().copied().filter(|&t| t != NONE)
    }

    pub fn boundary_faces(&self) -> &[usize] {
        &self.boundary_faces
    }

    pub fn has_boundary(&self) -> bool {
        !self.boundary_faces.is_empty()
    }

    /// Unwrapped corner coordinates of tet `t` (minimal image on periodic axes).
    pub fn tet_coords(&self, t: usize) -> [Point3; 4] {
        let tet = &self.tets[t];
        let p0 = self.vertices[tet[0]];
        let mut p = [p0; 4];
        for i in 1..4 {
            let d = sub(self.vertices[tet[i]], p0);
            for a in 0..3 {
                p[i][a] = p0[a] + wrap(d[a], self.periods[a]);
            }
        }
        p
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        signed_volume(&self.tet_coords(t))
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_tets()).map(|t| self.tet_volume(t)).sum()
    }

    pub fn tet_barycenter(&self, t: usize) -> Point3 {
        let p = self.tet_coords(t);
        let mut c = [0.0; 3];
        for q in p {
            for a in 0..3 {
                c[a] += 0.25 * q[a];
            }
        }
        c
    }

    /// Minimal-image displacement from vertex `a` to vertex `b`.
    pub fn displacement(&self, a: usize, b: usize) -> Point3 {
        let d = sub(self.vertices[b], self.vertices[a]);
        [wrap(d[0], self.periods[0]), wrap(d[1], self.periods[1]), wrap(d[2], self.periods[2])]
    }

    /// Coboundary matrix for degree `k - 1 -> k` (the transpose of ∂ₖ).
    pub fn boundary_operator(&self, k: usize) -> &IntMatrix {
        match k {
            1 => &self.d0,
            2 => &self.d1,
            3 => &self.d2,
            _ => panic!("boundary operator degree must be 1, 2 or 3 (got {k})"),
        }
    }

    /// Component label per vertex (edge connectivity) and component count.
    pub fn vertex_components(&self) -> (Vec<usize>, usize) {
        let mut uf = UnionFind::new(self.num_vertices());
        for &[a, b] in &self.edges {
            uf.union(a, b);
        }
        uf.labels()
    }

    /// Flags of vertices, edges and faces lying on the boundary surface.
    pub fn boundary_flags(&self) -> BoundaryFlags {
        let mut vertices = vec![false; self.num_vertices()];
        let mut edges = vec![false; self.num_edges()];
        let mut faces = vec![false; self.num_faces()];
        for &f in &self.boundary_faces {
            faces[f] = true;
            for &(e, _) in self.d1.row(f) {
                edges[e] = true;
            }
            for &v in &self.faces[f] {
                vertices[v] = true;
            }
        }
        BoundaryFlags { vertices, edges, faces }
    }

    /// Index of edge `{a, b}` if present.
    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        let key = [a.min(b), a.max(b)];
        self.edges.binary_search(&key).ok()
    }

    pub fn find_face(&self, mut f: [usize; 3]) -> Option<usize> {
        f.sort_unstable();
        self.faces.binary_search(&f).ok()
    }
}

#[derive(Clone, Debug)]
pub struct BoundaryFlags {
    pub vertices: Vec<bool>,
    pub edges: Vec<bool>,
    pub faces: Vec<bool>,
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }

    /// Dense labels in order of first appearance.
    pub(crate) fn labels(&mut self) -> (Vec<usize>, usize) {
        let n = self.parent.len();
        let mut map = HashMap::new();
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let r = self.find(i);
            let next = map.len();
            labels.push(*map.entry(r).or_insert(next));
        }
        (labels, map.len())
    }
}

/// One connected component of the boundary surface.
#[derive(Clone, Debug)]
pub struct BoundaryComponent {
    /// Global face indices.
    pub faces: Vec<usize>,
    /// Global edge indices, ascending.
    pub edges: Vec<usize>,
    /// Global vertex indices, ascending.
    pub vertices: Vec<usize>,
    pub euler: i64,
    pub genus: i64,
}

/// The boundary 2-complex with its induced orientation.
#[derive(Clone, Debug)]
pub struct BoundarySurface {
    /// Boundary triangles with vertex order giving the outward (induced) orientation.
    pub triangles: Vec<[usize; 3]>,
    /// Global face index of each triangle.
    pub face_ids: Vec<usize>,
    pub components: Vec<BoundaryComponent>,
    /// Every boundary edge is traversed once in each direction.
    pub consistently_oriented: bool,
}

/// Extracts the boundary surface and its components.
pub fn boundary_surface(complex: &SimplicialComplex3) -> Result<BoundarySurface> {
    let mut triangles = Vec::with_capacity(complex.boundary_faces.len());
    let mut face_ids = Vec::with_capacity(complex.boundary_faces.len());
    for &f in &complex.boundary_faces {
        let t = complex.face_tets[f][0];
        let tet = complex.tets[t];
        let skip = complex.tet_faces[t].iter().position(|&g| g == f).unwrap();
        let mut tri: Vec<usize> = (0..4).filter(|&i| i != skip).map(|i| tet[i]).collect();
        if skip % 2 == 1 {
            tri.swap(0, 1);
        }
        triangles.push([tri[0], tri[1], tri[2]]);
        face_ids.push(f);
    }

    let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut undirected: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            *directed.entry((a, b)).or_default() += 1;
            undirected.entry((a.min(b), a.max(b))).or_default().push(i);
        }
    }
    for (&(a, b), tris) in &undirected {
        if tris.len() != 2 {
            return Err(Error::OpenBoundary(format!(
                "boundary edge ({a},{b}) is shared by {} boundary faces",
                tris.len()
            )));
        }
    }
    let consistently_oriented = directed.iter().all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1));

    let mut uf = UnionFind::new(triangles.len());
    for tris in undirected.values() {
        uf.union(tris[0], tris[1]);
    }
    let (labels, ncomp) = uf.labels();
    let mut components = Vec::with_capacity(ncomp);
    for c in 0..ncomp {
        let faces: Vec<usize> = (0..triangles.len()).filter(|&i| labels[i] == c).map(|i| face_ids[i]).collect();
        let mut edges: Vec<usize> =
            faces.iter().flat_map(|&f| complex.d1.row(f).iter().map(|&(e, _)| e)).collect();
        edges.sort_unstable();
        edges.dedup();
        let mut vertices: Vec<usize> = faces.iter().flat_map(|&f| complex.faces[f]).collect();
        vertices.sort_unstable();
        vertices.dedup();
        let euler = vertices.len() as i64 - edges.len() as i64 + faces.len() as i64;
        components.push(BoundaryComponent { genus: (2 - euler) / 2, faces, edges, vertices, euler });
    }
    Ok(BoundarySurface { triangles, face_ids, components, consistently_oriented })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub counts: [usize; 4],
    pub euler_characteristic: i64,
    pub connected_components: usize,
    /// `(euler, genus)` for each boundary component.
    pub boundary_components: Vec<(i64, i64)>,
    pub failures: Vec<String>,
}

/// Checks every structural invariant and lists all failures.
pub fn validate_complex(complex: &SimplicialComplex3) -> ValidationReport {
    let mut failures = Vec::new();
    for t in 0..complex.num_tets() {
        let v = complex.tet_volume(t);
        if !(v > 0.0) {
            failures.push(format!("tet {t} has non-positive volume {v:e}"));
        }
    }
    if !complex.d1.matmul(&complex.d0).is_zero() {
        failures.push("D1·D0 ≠ 0".to_string());
    }
    if !complex.d2.matmul(&complex.d1).is_zero() {
        failures.push("D2·D1 ≠ 0".to_string());
    }
    for (e, row) in complex.d0.rows().iter().enumerate() {
        let mut vals: Vec<i64> = row.iter().map(|&(_, v)| v).collect();
        vals.sort_unstable();
        if vals != [-1, 1] {
            failures.push(format!("D0 row {e} is not a (−1, +1) pair"));
        }
    }
    let d2t = complex.d2.transpose();
    for f in 0..complex.num_faces() {
        let n = complex.face_tets(f).count();
        let col: i64 = d2t.row(f).iter().map(|&(_, v)| v).sum();
        if n == 2 && col != 0 {
            failures.push(format!("interior face {f} has inconsistent induced orientations"));
        }
        if n != d2t.row(f).len() {
            failures.push(format!("face {f} incidence count mismatch"));
        }
    }
    let boundary_components = match boundary_surface(complex) {
        Ok(s) => {
            if !s.consistently_oriented {
                failures.push("boundary surface is not consistently oriented".to_string());
            }
            s.components.iter().map(|c| (c.euler, c.genus)).collect()
        }
        Err(e) => {
            failures.push(e.to_string());
            Vec::new()
        }
    };
    let (_, connected_components) = complex.vertex_components();
    ValidationReport {
        passed: failures.is_empty(),
        counts: complex.counts(),
        euler_characteristic: complex.euler_characteristic(),
        connected_components,
        boundary_components,
        failures,
    }
}
