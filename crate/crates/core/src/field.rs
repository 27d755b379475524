//! Pointwise diagnostics of an edge field: helicity, twist, contact
//! classification and the force-free family of checks.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{proxy_all, tet_geometry, FemMatrices, TetProxy};
use crate::mesh::{cross, dot3, SimplicialComplex3, UnionFind, TET_EDGES};

/// `½ hᵀ S h`
pub fn helicity(fem: &FemMatrices, h: &[f64]) -> f64 {
    0.5 * fem.s.bilinear(h, h)
}

/// `½ hᵀ M1 h`
pub fn energy(fem: &FemMatrices, h: &[f64]) -> f64 {
    0.5 * fem.m1.bilinear(h, h)
}

/// Per-tet `m = H·curl H` from barycentric proxies.
pub fn twist_density(complex: &SimplicialComplex3, h: &[f64]) -> Result<Vec<f64>> {
    Ok(proxy_all(complex, h)?.iter().map(|p| dot3(p.h, p.curl_h)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TetLabel {
    ContactPos,
    ContactNeg,
    Foliation,
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Contact,
    ConfoliationPos,
    ConfoliationNeg,
    Foliation,
    Mixed,
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub labels: Vec<TetLabel>,
    pub verdict: Verdict,
    /// Sign of the contact branch: +1, −1, or 0 when not contact.
    pub sign: i8,
    pub tolerance: f64,
}

/// Tets with `|H|² ≥ eps·mean |H|²`.
pub fn support_mask(proxies: &[TetProxy], eps: f64) -> Vec<bool> {
    if proxies.is_empty() {
        return Vec::new();
    }
    let mags: Vec<f64> = proxies.iter().map(|p| dot3(p.h, p.h)).collect();
    let mean = mags.iter().sum::<f64>() / mags.len() as f64;
    mags.iter().map(|&m| mean > 0.0 && m >= eps * mean).collect()
}

/// Largest |m| round-off can produce on tet `p.tet`: `|H|` times the curl
/// with every cancellation removed.
fn roundoff_floor(complex: &SimplicialComplex3, h: &[f64], p: &TetProxy) -> Result<f64> {
    let g = tet_geometry(complex, p.tet)?;
    let mut bound = 0.0;
    for (k, &(e, _)) in complex.tet_edges(p.tet).iter().enumerate() {
        let [a, b] = TET_EDGES[k];
        let c = cross(g.grads[a], g.grads[b]);
        bound += 2.0 * h[e].abs() * dot3(c, c).sqrt();
    }
    Ok(1e-12 * dot3(p.h, p.h).sqrt() * bound)
}

/// Labels every tet and derives the verdict from the labels on the support.
///
/// A tet is flat when `|m| ≤ 1e-9·max|m|`, or below what round-off alone
/// can produce.
pub fn classify(complex: &SimplicialComplex3, h: &[f64], m: &[f64], support: &[bool]) -> Result<Classification> {
    let proxies = proxy_all(complex, h)?;
    let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let tolerance = 1e-9 * scale;
    let floors: Vec<f64> = proxies.par_iter().map(|p| roundoff_floor(complex, h, p)).collect::<Result<_>>()?;
    let labels: Vec<TetLabel> = m
        .iter()
        .zip(&floors)
        .zip(support)
        .map(|((&x, &floor), &on)| {
            if x.abs() <= tolerance.max(floor) {
                if on {
                    TetLabel::Foliation
                } else {
                    TetLabel::Degenerate
                }
            } else if x > 0.0 {
                TetLabel::ContactPos
            } else {
                TetLabel::ContactNeg
            }
        })
        .collect();
    let (mut pos, mut neg, mut flat) = (false, false, false);
    for (l, _) in labels.iter().zip(support).filter(|(_, &on)| on) {
        match l {
            TetLabel::ContactPos => pos = true,
            TetLabel::ContactNeg => neg = true,
            _ => flat = true,
        }
    }
    let (verdict, sign) = match (pos, neg, flat) {
        (true, true, _) => (Verdict::Mixed, 0),
        (true, false, false) => (Verdict::Contact, 1),
        (false, true, false) => (Verdict::Contact, -1),
        (true, false, true) => (Verdict::ConfoliationPos, 0),
        (false, true, true) => (Verdict::ConfoliationNeg, 0),
        (false, false, _) => (Verdict::Foliation, 0),
    };
    Ok(Classification { labels, verdict, sign, tolerance })
}

/// Connected components of the masked tets under face adjacency.
pub fn support_components(complex: &SimplicialComplex3, mask: &[bool]) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(complex.num_tets());
    for f in 0..complex.num_faces() {
        let ts: Vec<usize> = complex.face_tets(f).filter(|&t| mask[t]).collect();
        if let [a, b] = ts[..] {
            uf.union(a, b);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for t in (0..complex.num_tets()).filter(|&t| mask[t]) {
        groups.entry(uf.find(t)).or_default().push(t);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|c| c[0]);
    out
}

/// Support of both B and J.
pub fn joint_support(proxies: &[TetProxy], eps: f64) -> Vec<bool> {
    let b = support_mask(proxies, eps);
    let swapped: Vec<TetProxy> = proxies.iter().map(|p| TetProxy { tet: p.tet, h: p.curl_h, curl_h: p.h }).collect();
    let j = support_mask(&swapped, eps);
    b.iter().zip(&j).map(|(x, y)| *x && *y).collect()
}

/// Relative margin by which `|J|²|B|²` must exceed `|J×B|²`; below it the
/// difference is round-off.
pub const NEAR_FORCEFREE_MARGIN: f64 = 1e-12;

/// One boolean per component of the joint support: every tet satisfies
/// `|J|²|B|² > |J×B|²`.
pub fn near_forcefree_check(complex: &SimplicialComplex3, proxies: &[TetProxy], eps: f64) -> Result<Vec<bool>> {
    let mask = joint_support(proxies, eps);
    let comps = support_components(complex, &mask);
    if comps.is_empty() {
        return Err(Error::EmptySupport);
    }
    Ok(comps
        .iter()
        .map(|c| {
            c.iter().all(|&t| {
                let (j, b) = (proxies[t].curl_h, proxies[t].h);
                let jxb = cross(j, b);
                let jb = dot3(j, j) * dot3(b, b);
                jb - dot3(jxb, jxb) > NEAR_FORCEFREE_MARGIN * jb
            })
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct ForceFree {
    /// `max |J×B|` over the joint support.
    pub max_cross: f64,
    /// `max |J||B|` over the joint support.
    pub max_product: f64,
    pub ratio: f64,
}

pub fn force_free_measure(proxies: &[TetProxy], eps: f64) -> Result<ForceFree> {
    let mask = joint_support(proxies, eps);
    let (mut max_cross, mut max_product) = (0.0f64, 0.0f64);
    for p in proxies.iter().filter(|p| mask[p.tet]) {
        let c = cross(p.curl_h, p.h);
        max_cross = max_cross.max(dot3(c, c).sqrt());
        max_product = max_product.max((dot3(p.curl_h, p.curl_h) * dot3(p.h, p.h)).sqrt());
    }
    if max_product == 0.0 {
        return Err(Error::EmptySupport);
    }
    Ok(ForceFree { max_cross, max_product, ratio: max_cross / max_product })
}

/// Largest relative violation of `|J|²|B|² = |J×B|² + (J·B)²` over tets.
pub fn identity_check(proxies: &[TetProxy]) -> f64 {
    proxies
        .par_iter()
        .map(|p| {
            let (j, b) = (p.curl_h, p.h);
            let lhs = dot3(j, j) * dot3(b, b);
            let c = cross(j, b);
            let d = dot3(j, b);
            let rhs = dot3(c, c) + d * d;
            if lhs == 0.0 && rhs == 0.0 {
                0.0
            } else {
                (lhs - rhs).abs() / lhs.max(rhs)
            }
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct AnalysisOptions {
    /// Relative support threshold on `|H|²`.
    pub support_eps: f64,
    /// Allowance on `max|J×B| / max|J||B|`.
    pub force_free_tol: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { support_eps: 1e-3, force_free_tol: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldReport {
    pub helicity: f64,
    pub energy: f64,
    pub twist: Vec<f64>,
    pub labels: Vec<TetLabel>,
    pub verdict: Verdict,
    pub contact_sign: i8,
    pub support_size: usize,
    /// Empty when the joint support is empty.
    pub near_forcefree: Vec<bool>,
    pub force_free: Option<ForceFree>,
    pub force_free_pass: bool,
    pub identity_max_violation: f64,
}

pub fn analyze(
    complex: &SimplicialComplex3,
    fem: &FemMatrices,
    h: &[f64],
    opts: &AnalysisOptions,
) -> Result<FieldReport> {
    let proxies = proxy_all(complex, h)?;
    let twist: Vec<f64> = proxies.iter().map(|p| dot3(p.h, p.curl_h)).collect();
    let support = support_mask(&proxies, opts.support_eps);
    let class = classify(complex, h, &twist, &support)?;
    let near_forcefree = match near_forcefree_check(complex, &proxies, opts.support_eps) {
        Ok(v) => v,
        Err(Error::EmptySupport) => Vec::new(),
        Err(e) => return Err(e),
    };
    let force_free = force_free_measure(&proxies, opts.support_eps).ok();
    Ok(FieldReport {
        helicity: helicity(fem, h),
        energy: energy(fem, h),
        support_size: support.iter().filter(|&&s| s).count(),
        labels: class.labels,
        verdict: class.verdict,
        contact_sign: class.sign,
        near_forcefree,
        force_free_pass: force_free.as_ref().is_some_and(|f| f.ratio <= opts.force_free_tol),
        force_free,
        identity_max_violation: identity_check(&proxies),
        twist,
    })
}
