//! Lowest-order Whitney elements: exact mass matrices, the curl pairing,
//! barycentric vector proxies and de Rham interpolants.

use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{cross, dot3, Point3, SimplicialComplex3, TET_EDGES};
use crate::sparse::CsrMatrix;

/// `∫ λᵢλⱼ dV` over a tet of volume `v`.
fn lambda_product(v: f64, i: usize, j: usize) -> f64 {
    if i == j {
        v / 10.0
    } else {
        v / 20.0
    }
}

/// Shape data of one tet: volume and barycentric gradients.
#[derive(Clone, Copy, Debug)]
pub(crate) struct TetGeometry {
    pub volume: f64,
    pub grads: [Point3; 4],
}

pub(crate) fn tet_geometry(complex: &SimplicialComplex3, t: usize) -> Result<TetGeometry> {
    let p = complex.tet_coords(t);
    let col = |k: usize| nalgebra::Vector3::new(p[k][0] - p[0][0], p[k][1] - p[0][1], p[k][2] - p[0][2]);
    let j = Matrix3::from_columns(&[col(1), col(2), col(3)]);
    let det = j.determinant();
    let scale = (1..4).map(|k| col(k).norm()).product::<f64>();
    if det.abs() <= 1e-14 * scale {
        return Err(Error::SingularGeometry(t));
    }
    let inv = j.try_inverse().ok_or(Error::SingularGeometry(t))?;
    let mut grads = [[0.0; 3]; 4];
    for i in 0..3 {
        grads[i + 1] = [inv[(i, 0)], inv[(i, 1)], inv[(i, 2)]];
    }
    grads[0] = [
        -(grads[1][0] + grads[2][0] + grads[3][0]),
        -(grads[1][1] + grads[2][1] + grads[3][1]),
        -(grads[1][2] + grads[2][2] + grads[3][2]),
    ];
    Ok(TetGeometry { volume: det.abs() / 6.0, grads })
}

fn geometries(complex: &SimplicialComplex3) -> Result<Vec<TetGeometry>> {
    (0..complex.num_tets()).into_par_iter().map(|t| tet_geometry(complex, t)).collect()
}

/// Local vertex indices of the global face, in sorted global order.
fn local_face(complex: &SimplicialComplex3, t: usize, f: usize) -> [usize; 3] {
    let tet = complex.tets()[t];
    complex.faces()[f].map(|g| tet.iter().position(|&v| v == g).unwrap())
}

/// Whitney 2-form of local face (a,b,c) as Σ λᵢ·cᵢ over its vertices.
fn face_terms(g: &TetGeometry, [a, b, c]: [usize; 3]) -> [(usize, Point3); 3] {
    let s = |v: Point3| v.map(|x| 2.0 * x);
    [
        (a, s(cross(g.grads[b], g.grads[c]))),
        (b, s(cross(g.grads[c], g.grads[a]))),
        (c, s(cross(g.grads[a], g.grads[b]))),
    ]
}

/// Whitney 1-form of local edge (a,b) as Σ λᵢ·cᵢ.
fn edge_terms(g: &TetGeometry, [a, b]: [usize; 2]) -> [(usize, Point3); 2] {
    [(a, g.grads[b]), (b, g.grads[a].map(|x| -x))]
}

fn pair_integral(v: f64, x: &[(usize, Point3)], y: &[(usize, Point3)]) -> f64 {
    let mut s = 0.0;
    for (i, ci) in x {
        for (j, cj) in y {
            s += dot3(*ci, *cj) * lambda_product(v, *i, *j);
        }
    }
    s
}

fn assemble(n: usize, local: Vec<Vec<(usize, usize, f64)>>) -> CsrMatrix {
    let triplets: Vec<(usize, usize, f64)> = local.into_iter().flatten().collect();
    CsrMatrix::from_triplets(n, n, &triplets)
}

/// Mass matrix of Whitney k-forms, k ∈ {0, 1, 2}.
pub fn mass_matrix(complex: &SimplicialComplex3, k: usize) -> Result<CsrMatrix> {
    let geo = geometries(complex)?;
    Ok(mass_from(complex, &geo, k))
}

fn mass_from(complex: &SimplicialComplex3, geo: &[TetGeometry], k: usize) -> CsrMatrix {
    let local: Vec<Vec<(usize, usize, f64)>> = (0..complex.num_tets())
        .into_par_iter()
        .map(|t| {
            let g = &geo[t];
            let mut out = Vec::new();
            match k {
                0 => {
                    let tet = complex.tets()[t];
                    for i in 0..4 {
                        for j in 0..4 {
                            out.push((tet[i], tet[j], lambda_product(g.volume, i, j)));
                        }
                    }
                }
                1 => {
                    let te = complex.tet_edges(t);
                    let terms: Vec<_> = TET_EDGES.iter().map(|&e| edge_terms(g, e)).collect();
                    for i in 0..6 {
                        for j in 0..6 {
                            let sign = (te[i].1 * te[j].1) as f64;
                            out.push((te[i].0, te[j].0, sign * pair_integral(g.volume, &terms[i], &terms[j])));
                        }
                    }
                }
                2 => {
                    let tf = complex.tet_faces(t);
                    let terms: Vec<_> = tf.iter().map(|&f| face_terms(g, local_face(complex, t, f))).collect();
                    for i in 0..4 {
                        for j in 0..4 {
                            out.push((tf[i], tf[j], pair_integral(g.volume, &terms[i], &terms[j])));
                        }
                    }
                }
                _ => panic!("mass_matrix: degree {k} not in 0..=2"),
            }
            out
        })
        .collect();
    assemble(complex.count(k), local)
}

/// Curl pairing with `S[i][j] = ∫ curl wⱼ · wᵢ dV`.
///
/// This index order makes `S·D0φ = 0` hold exactly on meshes with boundary
/// too; `S − Sᵀ` is the boundary pairing and vanishes on closed meshes.
pub fn curl_pairing(complex: &SimplicialComplex3) -> Result<CsrMatrix> {
    let geo = geometries(complex)?;
    Ok(curl_from(complex, &geo))
}

fn curl_from(complex: &SimplicialComplex3, geo: &[TetGeometry]) -> CsrMatrix {
    let local: Vec<Vec<(usize, usize, f64)>> = (0..complex.num_tets())
        .into_par_iter()
        .map(|t| {
            let g = &geo[t];
            let te = complex.tet_edges(t);
            let mut out = Vec::with_capacity(36);
            for (i, &ei) in TET_EDGES.iter().enumerate() {
                // ∫ w_{ab} = V/4·(∇λ_b − ∇λ_a)
                let mean = sub(g.grads[ei[1]], g.grads[ei[0]]).map(|x| x * g.volume / 4.0);
                for (j, &ej) in TET_EDGES.iter().enumerate() {
                    let curl = edge_curl(g, ej);
                    let sign = (te[i].1 * te[j].1) as f64;
                    out.push((te[i].0, te[j].0, sign * dot3(curl, mean)));
                }
            }
            out
        })
        .collect();
    assemble(complex.num_edges(), local)
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// `curl w_{ab} = 2∇λ_a × ∇λ_b`.
fn edge_curl(g: &TetGeometry, [a, b]: [usize; 2]) -> Point3 {
    cross(g.grads[a], g.grads[b]).map(|x| 2.0 * x)
}

/// Scalar stiffness `D0ᵀ·M1·D0`.
pub fn laplacian0(complex: &SimplicialComplex3) -> Result<CsrMatrix> {
    let m1 = mass_matrix(complex, 1)?;
    Ok(m1.congruence(&complex.d0().to_csr()))
}

/// All matrices needed downstream, assembled from one pass over the tets.
#[derive(Clone, Debug)]
pub struct FemMatrices {
    pub m0: CsrMatrix,
    pub m1: CsrMatrix,
    pub m2: CsrMatrix,
    pub s: CsrMatrix,
    pub l0: CsrMatrix,
}

impl FemMatrices {
    pub fn assemble(complex: &SimplicialComplex3) -> Result<Self> {
        let geo = geometries(complex)?;
        let m1 = mass_from(complex, &geo, 1);
        let l0 = m1.congruence(&complex.d0().to_csr());
        Ok(FemMatrices {
            m0: mass_from(complex, &geo, 0),
            m2: mass_from(complex, &geo, 2),
            s: curl_from(complex, &geo),
            m1,
            l0,
        })
    }
}

/// Vector proxies of a 1-cochain and of its curl at a tet barycenter.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TetProxy {
    pub tet: usize,
    pub h: Point3,
    pub curl_h: Point3,
}

pub fn proxy_eval(complex: &SimplicialComplex3, h: &[f64], t: usize) -> Result<TetProxy> {
    let g = tet_geometry(complex, t)?;
    Ok(proxy_with(complex, &g, h, t))
}

fn proxy_with(complex: &SimplicialComplex3, g: &TetGeometry, h: &[f64], t: usize) -> TetProxy {
    let mut hv = [0.0; 3];
    let mut cv = [0.0; 3];
    for (k, &(e, s)) in complex.tet_edges(t).iter().enumerate() {
        let coef = h[e] * s as f64;
        let [a, b] = TET_EDGES[k];
        let w = sub(g.grads[b], g.grads[a]);
        let c = edge_curl(g, [a, b]);
        for d in 0..3 {
            hv[d] += coef * w[d] / 4.0;
            cv[d] += coef * c[d];
        }
    }
    TetProxy { tet: t, h: hv, curl_h: cv }
}

/// Proxies in every tet.
pub fn proxy_all(complex: &SimplicialComplex3, h: &[f64]) -> Result<Vec<TetProxy>> {
    let geo = geometries(complex)?;
    Ok((0..complex.num_tets()).into_par_iter().map(|t| proxy_with(complex, &geo[t], h, t)).collect())
}

/// Proxy of a 2-cochain (sum of face Whitney forms) at a tet barycenter.
pub fn face_proxy(complex: &SimplicialComplex3, b: &[f64], t: usize) -> Result<Point3> {
    let g = tet_geometry(complex, t)?;
    let mut out = [0.0; 3];
    for &f in complex.tet_faces(t) {
        for (_, c) in face_terms(&g, local_face(complex, t, f)) {
            for d in 0..3 {
                out[d] += b[f] * c[d] / 4.0;
            }
        }
    }
    Ok(out)
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Edge interpolant `∫_e v·dl`, by 5-point Gauss quadrature along each edge.
/// On periodic meshes the edge runs from its first vertex along the
/// minimal-image displacement.
pub fn edge_interpolant<F>(complex: &SimplicialComplex3, v: F) -> Vec<f64>
where
    F: Fn(Point3) -> Point3 + Sync,
{
    complex
        .edges()
        .par_iter()
        .map(|&[a, b]| {
            let p = complex.vertices()[a];
            let d = complex.displacement(a, b);
            GAUSS5
                .iter()
                .map(|&(x, w)| {
                    let s = 0.5 * (x + 1.0);
                    let q = [p[0] + s * d[0], p[1] + s * d[1], p[2] + s * d[2]];
                    0.5 * w * dot3(v(q), d)
                })
                .sum()
        })
        .collect()
}

/// Face interpolant `∫_f v·n dA` with the face oriented by its sorted
/// vertex order, using the edge-midpoint rule (exact for quadratics).
pub fn face_interpolant<F>(complex: &SimplicialComplex3, v: F) -> Vec<f64>
where
    F: Fn(Point3) -> Point3 + Sync,
{
    complex
        .faces()
        .par_iter()
        .map(|&[a, b, c]| {
            let p = complex.vertices()[a];
            let u = complex.displacement(a, b);
            let w = complex.displacement(a, c);
            let area = cross(u, w).map(|x| 0.5 * x);
            let mid = |s: f64, t: f64| [p[0] + s * u[0] + t * w[0], p[1] + s * u[1] + t * w[1], p[2] + s * u[2] + t * w[2]];
            [mid(0.5, 0.0), mid(0.0, 0.5), mid(0.5, 0.5)].iter().map(|&q| dot3(v(q), area) / 3.0).sum()
        })
        .collect()
}

/// Vertex interpolant of a scalar field.
pub fn vertex_interpolant<F>(complex: &SimplicialComplex3, f: F) -> Vec<f64>
where
    F: Fn(Point3) -> f64,
{
    complex.vertices().iter().map(|&p| f(p)).collect()
}
