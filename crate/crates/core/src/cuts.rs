//! Harmonic circle-valued potentials with integer periods and the cut
//! surfaces cut out by their regular level sets.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{proxy_all, tet_geometry, FemMatrices};
use crate::homology::CohomologyBasis;
use crate::mesh::{cross, dot3, Point3, SimplicialComplex3};
use crate::solvers::cg;
use crate::sparse::{norm, CsrMatrix};

/// Minimum distance between a cut level and any vertex phase.
pub const REGULARITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct HarmonicRep {
    pub omega: Vec<f64>,
    pub source_cocycle: Vec<i64>,
    /// Vertex potential with `omega = source + D0·phi`, mean zero per component.
    pub phi: Vec<f64>,
    /// `‖D0ᵀM1·omega‖ / ‖M1·omega‖`.
    pub coclosure_residual: f64,
}

impl HarmonicRep {
    /// Vertex phases in [0, 1).
    pub fn phases(&self) -> Vec<f64> {
        self.phi.iter().map(|p| p.rem_euclid(1.0)).collect()
    }

    /// Periods of `omega` over the given 1-chains.
    pub fn periods(&self, chains: &[Vec<i64>]) -> Vec<f64> {
        chains.iter().map(|z| z.iter().zip(&self.omega).map(|(&a, b)| a as f64 * b).sum()).collect()
    }
}

/// Solves `a·x = b` with the entries flagged in `pinned` held at zero.
pub(crate) fn solve_pinned(a: &CsrMatrix, b: &[f64], pinned: &[bool], tol: f64) -> Result<Vec<f64>> {
    let keep: Vec<bool> = pinned.iter().map(|p| !p).collect();
    let idx: Vec<usize> = (0..b.len()).filter(|&i| keep[i]).collect();
    let rhs: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let mut x = vec![0.0; b.len()];
    if norm(&rhs) == 0.0 {
        return Ok(x);
    }
    let (y, stats) = cg(&a.principal(&keep), &rhs, tol, 20 * idx.len() + 1000)?;
    log::debug!("pinned solve: {} iterations, residual {:e}", stats.iterations, stats.relative_residual);
    for (k, &i) in idx.iter().enumerate() {
        x[i] = y[k];
    }
    Ok(x)
}

/// Harmonic representative of the class of the closed integer cochain `c`.
pub fn harmonic_representative(complex: &SimplicialComplex3, fem: &FemMatrices, c: &[i64]) -> Result<HarmonicRep> {
    if complex.d1().apply(c).iter().any(|&x| x != 0) {
        return Err(Error::InvalidSpec("source cochain is not closed".into()));
    }
    let cf: Vec<f64> = c.iter().map(|&x| x as f64).collect();
    let d0 = complex.d0();
    let rhs: Vec<f64> = d0.transpose().apply_f64(&fem.m1.mul_vec(&cf)).iter().map(|x| -x).collect();
    let (labels, ncomp) = complex.vertex_components();
    let mut pinned = vec![false; complex.num_vertices()];
    let mut seen = vec![false; ncomp];
    for (v, &l) in labels.iter().enumerate() {
        if !seen[l] {
            seen[l] = true;
            pinned[v] = true;
        }
    }
    let mut phi = solve_pinned(&fem.l0, &rhs, &pinned, 1e-13)?;
    // Fixing the additive constant by the component mean rather than the pin
    // keeps vertex phases away from round levels on symmetric grids.
    let mut sum = vec![0.0; ncomp];
    let mut cnt = vec![0usize; ncomp];
    for (v, &l) in labels.iter().enumerate() {
        sum[l] += phi[v];
        cnt[l] += 1;
    }
    for (v, &l) in labels.iter().enumerate() {
        phi[v] -= sum[l] / cnt[l] as f64;
    }
    let grad = d0.apply_f64(&phi);
    let omega: Vec<f64> = cf.iter().zip(&grad).map(|(a, b)| a + b).collect();
    let m_omega = fem.m1.mul_vec(&omega);
    let scale = norm(&m_omega);
    let coclosure_residual = if scale == 0.0 { 0.0 } else { norm(&d0.transpose().apply_f64(&m_omega)) / scale };
    Ok(HarmonicRep { omega, source_cocycle: c.to_vec(), phi, coclosure_residual })
}

/// Midpoint of the largest circular gap between vertex phases; ties go to
/// the lowest level.
pub fn choose_level(rep: &HarmonicRep) -> Result<f64> {
    choose_level_from(&rep.phases())
}

pub fn choose_level_from(phases: &[f64]) -> Result<f64> {
    let mut p: Vec<f64> = phases.iter().map(|x| x.rem_euclid(1.0)).collect();
    if p.is_empty() {
        return Ok(0.5);
    }
    p.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64)> = None;
    for i in 0..p.len() {
        let next = if i + 1 < p.len() { p[i + 1] } else { p[0] + 1.0 };
        let gap = next - p[i];
        let mid = (p[i] + 0.5 * gap).rem_euclid(1.0);
        best = match best {
            Some((g, m)) if g > gap + 1e-12 || ((g - gap).abs() <= 1e-12 && m <= mid) => Some((g, m)),
            _ => Some((gap, mid)),
        };
    }
    let (gap, mid) = best.unwrap();
    if gap < 2.0 * REGULARITY_TOL {
        return Err(Error::NoGap);
    }
    Ok(mid)
}

/// Crossing point of the cut with mesh edge `.0`, at level `θ₀ + .1` of the
/// edge's own lift (φ at its lower vertex).
pub type CutKey = (usize, i64);

#[derive(Clone, Debug, Default)]
pub struct CutSurface {
    pub level: f64,
    /// Triangles, oriented so the normal points toward increasing phase.
    pub polygons: Vec<[Point3; 3]>,
    pub keys: Vec<[CutKey; 3]>,
    pub source_tet: Vec<usize>,
    /// Polygon edges lying on boundary faces of the mesh.
    pub boundary_edges: Vec<[CutKey; 2]>,
}

impl CutSurface {
    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    fn edge_set(&self) -> HashMap<(CutKey, CutKey), usize> {
        let mut edges = HashMap::new();
        for tri in &self.keys {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    pub fn euler_characteristic(&self) -> i64 {
        let mut verts: Vec<CutKey> = self.keys.iter().flatten().copied().collect();
        verts.sort_unstable();
        verts.dedup();
        verts.len() as i64 - self.edge_set().len() as i64 + self.keys.len() as i64
    }

    /// Connected components, as a component label per polygon.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut uf = crate::mesh::UnionFind::new(self.keys.len());
        let mut owner: HashMap<(CutKey, CutKey), usize> = HashMap::new();
        for (p, tri) in self.keys.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                match owner.entry((a.min(b), a.max(b))) {
                    std::collections::hash_map::Entry::Occupied(o) => uf.union(*o.get(), p),
                    std::collections::hash_map::Entry::Vacant(v) => {
                        v.insert(p);
                    }
                }
            }
        }
        uf.labels()
    }

    pub fn area(&self) -> f64 {
        self.polygons
            .iter()
            .map(|[p, q, r]| {
                let n = cross(sub(*q, *p), sub(*r, *p));
                0.5 * dot3(n, n).sqrt()
            })
            .sum()
    }
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn lerp(a: Point3, b: Point3, t: f64) -> Point3 {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
}

fn signed(c: &[i64], complex: &SimplicialComplex3, from: usize, to: usize) -> i64 {
    let e = complex.find_edge(from, to).expect("tet edge exists");
    if from < to {
        c[e]
    } else {
        -c[e]
    }
}

/// Cut surface at level `θ₀`: the preimage of θ₀ under the circle-valued
/// potential, sliced tet by tet from a locally integrated phase.
pub fn extract_cut(complex: &SimplicialComplex3, rep: &HarmonicRep, level: f64) -> Result<CutSurface> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::InvalidSpec(format!("cut level {level} is not in [0, 1)")));
    }
    let distance = rep
        .phases()
        .iter()
        .map(|p| {
            let d = (p - level).rem_euclid(1.0);
            d.min(1.0 - d)
        })
        .fold(f64::INFINITY, f64::min);
    if distance < REGULARITY_TOL {
        return Err(Error::NonRegularLevel { level, distance });
    }
    let boundary = complex.boundary_flags().faces;
    let c = &rep.source_cocycle;
    let phi = &rep.phi;

    let pieces: Vec<Result<Vec<([Point3; 3], [CutKey; 3], Vec<[CutKey; 2]>)>>> = (0..complex.num_tets())
        .into_par_iter()
        .map(|t| {
            let tet = complex.tets()[t];
            let pos = complex.tet_coords(t);
            let offset: [i64; 4] = std::array::from_fn(|i| if i == 0 { 0 } else { signed(c, complex, tet[0], tet[i]) });
            let lift: [f64; 4] = std::array::from_fn(|i| phi[tet[i]] + offset[i] as f64);
            let geo = tet_geometry(complex, t)?;
            let grad: Point3 = std::array::from_fn(|d| (0..4).map(|i| lift[i] * geo.grads[i][d]).sum());
            let lo = lift.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = lift.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut out = Vec::new();
            let crossing = |i: usize, j: usize, k: i64| -> (Point3, CutKey) {
                let (a, b) = if tet[i] < tet[j] { (i, j) } else { (j, i) };
                let e = complex.find_edge(tet[a], tet[b]).unwrap();
                let jc = k - offset[a];
                let (la, lb) = (phi[tet[a]], phi[tet[b]] + c[e] as f64);
                let s = (level + jc as f64 - la) / (lb - la);
                (lerp(pos[a], pos[b], s), (e, jc))
            };
            let on_boundary = |x: CutKey, y: CutKey| -> Option<[CutKey; 2]> {
                let mut vs: Vec<usize> = complex.edges()[x.0].iter().chain(&complex.edges()[y.0]).copied().collect();
                vs.sort_unstable();
                vs.dedup();
                if vs.len() != 3 {
                    return None;
                }
                let f = complex.find_face([vs[0], vs[1], vs[2]])?;
                boundary[f].then_some([x, y])
            };
            let mut emit = |pts: [(Point3, CutKey); 3]| {
                let [p, mut q, mut r] = pts;
                if dot3(cross(sub(q.0, p.0), sub(r.0, p.0)), grad) < 0.0 {
                    std::mem::swap(&mut q, &mut r);
                }
                let keys = [p.1, q.1, r.1];
                let bnd: Vec<[CutKey; 2]> = (0..3).filter_map(|k| on_boundary(keys[k], keys[(k + 1) % 3])).collect();
                out.push(([p.0, q.0, r.0], keys, bnd));
            };
            let kmin = (lo - level).ceil() as i64;
            let kmax = (hi - level).floor() as i64;
            for k in kmin..=kmax {
                let l = level + k as f64;
                let below: Vec<usize> = (0..4).filter(|&i| lift[i] < l).collect();
                let above: Vec<usize> = (0..4).filter(|&i| lift[i] > l).collect();
                match (below.len(), above.len()) {
                    (1, 3) => emit([0, 1, 2].map(|m| crossing(below[0], above[m], k))),
                    (3, 1) => emit([0, 1, 2].map(|m| crossing(below[m], above[0], k))),
                    (2, 2) => {
                        let (a, b, c2, d) = (below[0], below[1], above[0], above[1]);
                        let quad = [crossing(a, c2, k), crossing(a, d, k), crossing(b, d, k), crossing(b, c2, k)];
                        emit([quad[0], quad[1], quad[2]]);
                        emit([quad[0], quad[2], quad[3]]);
                    }
                    _ => {}
                }
            }
            Ok(out)
        })
        .collect();

    let mut cut = CutSurface { level, ..Default::default() };
    for (t, piece) in pieces.into_iter().enumerate() {
        for (poly, keys, bnd) in piece? {
            cut.polygons.push(poly);
            cut.keys.push(keys);
            cut.source_tet.push(t);
            cut.boundary_edges.extend(bnd);
        }
    }
    Ok(cut)
}

/// Checks that the cut is a manifold with boundary on ∂M.
pub fn check_manifold(cut: &CutSurface) -> Result<()> {
    let mut directed: HashMap<(CutKey, CutKey), Vec<bool>> = HashMap::new();
    for tri in &cut.keys {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            directed.entry((a.min(b), a.max(b))).or_default().push(a < b);
        }
    }
    let boundary: std::collections::HashSet<(CutKey, CutKey)> =
        cut.boundary_edges.iter().map(|&[a, b]| (a.min(b), a.max(b))).collect();
    for (edge, dirs) in &directed {
        if boundary.contains(edge) {
            if dirs.len() != 1 {
                return Err(Error::NonManifoldCut(format!("boundary edge {edge:?} used {} times", dirs.len())));
            }
        } else if dirs.len() != 2 || dirs[0] == dirs[1] {
            return Err(Error::NonManifoldCut(format!(
                "interior edge {edge:?} used {} times with orientations {dirs:?}",
                dirs.len()
            )));
        }
    }
    if boundary.iter().any(|e| !directed.contains_key(e)) {
        return Err(Error::NonManifoldCut("boundary edge without polygon".into()));
    }
    Ok(())
}

/// Signed crossing count of each 1-chain through the cut, read off from the
/// surface: each crossing point on edge e contributes sign(n·e).
pub fn crossing_numbers(complex: &SimplicialComplex3, cut: &CutSurface, chains: &[Vec<i64>]) -> Vec<i64> {
    let mut sign: HashMap<CutKey, i64> = HashMap::new();
    for (poly, keys) in cut.polygons.iter().zip(&cut.keys) {
        let n = cross(sub(poly[1], poly[0]), sub(poly[2], poly[0]));
        for key in keys {
            sign.entry(*key).or_insert_with(|| {
                let [a, b] = complex.edges()[key.0];
                if dot3(n, complex.displacement(a, b)) > 0.0 {
                    1
                } else {
                    -1
                }
            });
        }
    }
    let mut per_edge = vec![0i64; complex.num_edges()];
    for ((e, _), s) in sign {
        per_edge[e] += s;
    }
    chains.iter().map(|z| z.iter().zip(&per_edge).map(|(a, b)| a * b).sum()).collect()
}

/// Crossing vector of the cut against every dual cycle of `basis`.
pub fn verify_cut(complex: &SimplicialComplex3, cut: &CutSurface, basis: &CohomologyBasis) -> Result<Vec<i64>> {
    check_manifold(cut)?;
    let chains: Vec<Vec<i64>> = basis.dual_cycles.iter().map(|z| z.values.clone()).collect();
    Ok(crossing_numbers(complex, cut, &chains))
}

/// Tets where `|H|` of the 1-cochain is at most `eps` times the median.
pub fn critical_tets(complex: &SimplicialComplex3, omega: &[f64], eps: f64) -> Result<Vec<usize>> {
    let mags: Vec<f64> = proxy_all(complex, omega)?.iter().map(|p| dot3(p.h, p.h).sqrt()).collect();
    let mut sorted = mags.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    Ok((0..n).filter(|&t| mags[t] <= eps * median).collect())
}

/// Critical-point scan of a harmonic representative; an empty result
/// certifies that its regular level sets are the pages of a fibration.
pub fn critical_scan(complex: &SimplicialComplex3, rep: &HarmonicRep, eps: f64) -> Result<Vec<usize>> {
    critical_tets(complex, &rep.omega, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_grid, GridSpec};

    #[test]
    fn level_choice() {
        assert_eq!(choose_level_from(&[0.0, 0.5]).unwrap(), 0.25);
        assert!((choose_level_from(&[0.3]).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(choose_level_from(&[]).unwrap(), 0.5);
        assert!(matches!(choose_level_from(&[0.0; 3]), Ok(l) if l == 0.5));
        let crowded: Vec<f64> = (0..1001).map(|i| i as f64 * 1e-3).collect();
        assert!(choose_level_from(&crowded).is_ok());
    }

    #[test]
    fn zero_and_exact_classes() {
        let c = gen_grid(GridSpec::solid_torus(2, 2, 4)).unwrap();
        let fem = FemMatrices::assemble(&c).unwrap();
        let rep = harmonic_representative(&c, &fem, &vec![0; c.num_edges()]).unwrap();
        assert!(rep.omega.iter().all(|&x| x == 0.0));
        assert!(extract_cut(&c, &rep, 0.5).unwrap().is_empty());
        assert_eq!(critical_scan(&c, &rep, 1e-6).unwrap().len(), c.num_tets());

        let psi: Vec<i64> = (0..c.num_vertices() as i64).map(|i| (i * 37) % 5 - 2).collect();
        let exact: Vec<i64> = c.d0().apply(&psi);
        let rep = harmonic_representative(&c, &fem, &exact).unwrap();
        assert!(rep.omega.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn rejects_open_cochain() {
        let c = gen_grid(GridSpec::cube(2)).unwrap();
        let fem = FemMatrices::assemble(&c).unwrap();
        let mut x = vec![0; c.num_edges()];
        x[0] = 1;
        assert!(matches!(harmonic_representative(&c, &fem, &x), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn saddle_is_flagged() {
        let c = gen_grid(GridSpec::cube(3)).unwrap();
        let phi: Vec<f64> = c
            .vertices()
            .iter()
            .map(|p| (p[0] - 0.5).powi(2) - (p[1] - 0.5).powi(2) + (p[2] - 0.5).powi(2))
            .collect();
        let flagged = critical_tets(&c, &c.d0().apply_f64(&phi), 1e-6).unwrap();
        assert!(!flagged.is_empty());
    }
}
