use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{BoundaryCondition, KernelProjector, ReducedSystem};
use crate::error::{Error, Result};
use crate::fem::{proxy_all, tet_geometry, FemMatrices};
use crate::mesh::{dot3, SimplicialComplex3};
use crate::solvers::{cg, minres_diag};
use crate::sparse::{dot, norm, CsrMatrix};

/// Below this many degrees of freedom the pencil is solved densely.
const DENSE_LIMIT: usize = 700;

/// Shift as a fraction of the current estimate of the smallest |λ|.
const SHIFT_FRACTION: f64 = 0.6;

#[derive(Clone, Debug)]
pub struct EigenOptions {
    pub k: usize,
    /// Required residual `‖S̃y − λM̃y‖_{M̃⁻¹}` for M̃-normalized `y`.
    pub tol: f64,
    /// Block width; defaults to `max(k + 8, 16)`.
    pub block: Option<usize>,
    /// Krylov blocks per restart cycle.
    pub depth: usize,
    pub max_cycles: usize,
    pub seed: u64,
    /// Spectral shift; estimated from the domain size when absent.
    pub shift: Option<f64>,
    pub method: Method,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Dense up to a size limit, Krylov beyond.
    Auto,
    Dense,
    Krylov,
}

impl EigenOptions {
    pub fn new(k: usize) -> Self {
        EigenOptions { k, tol: 1e-8, block: None, depth: 4, max_cycles: 80, seed: 0x5EED, shift: None, method: Method::Auto }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct EigenPair {
    pub lambda: f64,
    /// Full edge cochain, normalized to `hᵀM1h = 1`.
    #[serde(skip)]
    pub h: Vec<f64>,
    /// Reduced coordinates of `h`.
    #[serde(skip)]
    pub y: Vec<f64>,
    pub residual: f64,
    /// `½ hᵀ S h`
    pub helicity: f64,
    /// `½ hᵀ M1 h`
    pub energy: f64,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct BeltramiSolution {
    pub bc: BoundaryCondition,
    /// Sorted by |λ|.
    pub pairs: Vec<EigenPair>,
    pub harmonic_dim: usize,
    pub shift: f64,
    pub cycles: usize,
    pub operator_applications: usize,
    pub dense: bool,
}

fn m_inverse_norm(m: &CsrMatrix, r: &[f64]) -> f64 {
    match cg(m, r, 1e-12, 10 * r.len() + 100) {
        Ok((z, _)) => dot(r, &z).max(0.0).sqrt(),
        Err(_) => f64::INFINITY,
    }
}

fn rayleigh(sys: &ReducedSystem, y: &[f64]) -> f64 {
    sys.s.bilinear(y, y) / sys.m.bilinear(y, y)
}

fn residual(sys: &ReducedSystem, y: &[f64], lambda: f64) -> f64 {
    let sy = sys.s.mul_vec(y);
    let my = sys.m.mul_vec(y);
    let r: Vec<f64> = sy.iter().zip(&my).map(|(a, b)| a - lambda * b).collect();
    m_inverse_norm(&sys.m, &r) / sys.m.bilinear(y, y).sqrt()
}

/// Fixes the overall sign: the largest-magnitude entry (first on ties) is positive.
fn canonical_sign(y: &mut [f64]) {
    let mut best = 0usize;
    for (i, v) in y.iter().enumerate() {
        if v.abs() > y[best].abs() * (1.0 + 1e-9) {
            best = i;
        }
    }
    if y[best] < 0.0 {
        y.iter_mut().for_each(|v| *v = -*v);
    }
}

fn finish(sys: &ReducedSystem, fem: &FemMatrices, mut y: Vec<f64>) -> EigenPair {
    let scale = sys.m.bilinear(&y, &y).sqrt();
    y.iter_mut().for_each(|v| *v /= scale);
    canonical_sign(&mut y);
    let lambda = rayleigh(sys, &y);
    let h = sys.expand(&y);
    EigenPair {
        lambda,
        residual: residual(sys, &y, lambda),
        helicity: 0.5 * fem.s.bilinear(&h, &h),
        energy: 0.5 * fem.m1.bilinear(&h, &h),
        h,
        y,
    }
}

/// Eigenpairs of smallest nonzero |λ| of `S̃y = λM̃y` on the range of the
/// kernel projector.
pub fn smallest_beltrami(
    sys: &ReducedSystem,
    fem: &FemMatrices,
    proj: &KernelProjector,
    opts: &EigenOptions,
) -> Result<BeltramiSolution> {
    if opts.k == 0 {
        return Err(Error::InvalidSpec("k must be at least 1".into()));
    }
    match opts.method {
        Method::Dense => dense_solve(sys, fem, proj, opts),
        Method::Krylov => krylov_solve(sys, fem, proj, opts),
        Method::Auto if sys.num_dofs() <= DENSE_LIMIT => dense_solve(sys, fem, proj, opts),
        Method::Auto => krylov_solve(sys, fem, proj, opts),
    }
}

fn dense_solve(
    sys: &ReducedSystem,
    fem: &FemMatrices,
    proj: &KernelProjector,
    opts: &EigenOptions,
) -> Result<BeltramiSolution> {
    let n = sys.num_dofs();
    let to_dense = |a: &CsrMatrix| DMatrix::from_fn(n, n, |i, j| a.get(i, j));
    let m = to_dense(&sys.m);
    let s = to_dense(&sys.s);
    let chol = m.clone().cholesky().ok_or_else(|| Error::SolverFailure("mass matrix is not SPD".into()))?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::SolverFailure("singular Cholesky factor".into()))?;
    let c = &linv * &s * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut idx: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i].abs() > 1e-8 * scale).collect();
    idx.sort_by(|&a, &b| {
        eig.eigenvalues[a].abs().total_cmp(&eig.eigenvalues[b].abs()).then(eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]))
    });
    if idx.len() < opts.k {
        return Err(Error::NoConvergence { best_residual: f64::INFINITY });
    }
    let lt = linv.transpose();
    let pairs: Vec<EigenPair> = idx[..opts.k]
        .iter()
        .map(|&i| {
            let y = &lt * eig.eigenvectors.column(i);
            finish(sys, fem, y.iter().copied().collect())
        })
        .collect();
    Ok(BeltramiSolution {
        bc: sys.bc,
        pairs,
        harmonic_dim: proj.harmonic_dim(),
        shift: 0.0,
        cycles: 0,
        operator_applications: 0,
        dense: true,
    })
}

/// `y ↦ P ½[(S̃ − σM̃)⁻¹ + (S̃ + σM̃)⁻¹] M̃ y`, with spectrum `λ/(λ² − σ²)`.
///
/// The curl pairing has null vectors that are neither gradients nor
/// harmonic, so a one-sided shift would make them dominant. Averaging the
/// two shifts maps every null vector to zero and treats ±λ alike.
struct TwoShift<'a> {
    sys: &'a ReducedSystem,
    proj: &'a KernelProjector,
    minus: CsrMatrix,
    plus: CsrMatrix,
    precond: Vec<f64>,
}

impl<'a> TwoShift<'a> {
    fn new(sys: &'a ReducedSystem, proj: &'a KernelProjector, sigma: f64) -> Self {
        let minus = sys.s.add_scaled(&sys.m, -sigma);
        let plus = sys.s.add_scaled(&sys.m, sigma);
        let precond = sys.m.diagonal().iter().map(|d| 1.0 / d).collect();
        TwoShift { sys, proj, minus, plus, precond }
    }

    fn apply(&self, cols: &[Vec<f64>], tol: f64) -> Result<Vec<Vec<f64>>> {
        let jobs: Vec<(usize, bool)> = (0..cols.len()).flat_map(|i| [(i, false), (i, true)]).collect();
        let solved: Vec<Vec<f64>> = jobs
            .par_iter()
            .map(|&(i, plus)| {
                let rhs = self.sys.m.mul_vec(&cols[i]);
                let a = if plus { &self.plus } else { &self.minus };
                let (x, stats) = minres_diag(a, &rhs, &self.precond, tol, 20 * rhs.len());
                log::trace!("minres: {} iterations, residual {:e}", stats.iterations, stats.relative_residual);
                x
            })
            .collect();
        solved
            .chunks(2)
            .map(|pair| {
                let x: Vec<f64> = pair[0].iter().zip(&pair[1]).map(|(a, b)| 0.5 * (a + b)).collect();
                self.proj.apply(&x)
            })
            .collect()
    }
}

/// M̃-orthonormalizes `w` against `basis` and itself; drops dependent columns.
fn orthonormalize(m: &CsrMatrix, basis: &[Vec<f64>], mbasis: &[Vec<f64>], w: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut mout: Vec<Vec<f64>> = Vec::new();
    for mut v in w {
        let start = m.bilinear(&v, &v).sqrt();
        if start == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for (b, mb) in basis.iter().zip(mbasis).chain(out.iter().zip(&mout)) {
                let c = dot(mb, &v);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let nrm = m.bilinear(&v, &v).sqrt();
        if nrm > 1e-10 * start {
            v.iter_mut().for_each(|x| *x /= nrm);
            mout.push(m.mul_vec(&v));
            out.push(v);
        }
    }
    out
}

fn combine(vs: &[Vec<f64>], c: &DVector<f64>) -> Vec<f64> {
    let mut y = vec![0.0; vs[0].len()];
    for (v, &a) in vs.iter().zip(c.iter()) {
        for (yi, vi) in y.iter_mut().zip(v) {
            *yi += a * vi;
        }
    }
    y
}

struct Ritz {
    mu: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    images: Vec<Vec<f64>>,
}

/// Rayleigh–Ritz for the M̃-self-adjoint operator T on an M̃-orthonormal
/// basis `v` with images `tv`, ordered by decreasing |μ|.
fn rayleigh_ritz(m: &CsrMatrix, v: &[Vec<f64>], tv: &[Vec<f64>]) -> Ritz {
    let nb = v.len();
    let mtv: Vec<Vec<f64>> = tv.par_iter().map(|x| m.mul_vec(x)).collect();
    let h = DMatrix::from_fn(nb, nb, |i, j| 0.5 * (dot(&v[i], &mtv[j]) + dot(&v[j], &mtv[i])));
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..nb).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()).then(a.cmp(&b)));
    let mut out = Ritz { mu: Vec::new(), vectors: Vec::new(), images: Vec::new() };
    for i in order {
        let c = eig.eigenvectors.column(i).into_owned();
        out.mu.push(eig.eigenvalues[i]);
        out.vectors.push(combine(v, &c));
        out.images.push(combine(tv, &c));
    }
    out
}

/// Rayleigh–Ritz for the pencil itself on an M̃-orthonormal set; returns the
/// finished pairs sorted by |λ| and their worst residual.
fn pencil_ritz(sys: &ReducedSystem, fem: &FemMatrices, z: Vec<Vec<f64>>) -> (Vec<EigenPair>, f64) {
    if z.is_empty() {
        return (Vec::new(), f64::INFINITY);
    }
    let sz: Vec<Vec<f64>> = z.par_iter().map(|y| sys.s.mul_vec(y)).collect();
    let nb = z.len();
    let h = DMatrix::from_fn(nb, nb, |i, j| 0.5 * (dot(&z[i], &sz[j]) + dot(&z[j], &sz[i])));
    let eig = h.symmetric_eigen();
    let mut pairs: Vec<EigenPair> = (0..nb)
        .into_par_iter()
        .map(|i| finish(sys, fem, combine(&z, &eig.eigenvectors.column(i).into_owned())))
        .collect();
    pairs.sort_by(|a, b| a.lambda.abs().total_cmp(&b.lambda.abs()).then(b.lambda.total_cmp(&a.lambda)));
    let worst = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
    (pairs, worst)
}

fn krylov_solve(
    sys: &ReducedSystem,
    fem: &FemMatrices,
    proj: &KernelProjector,
    opts: &EigenOptions,
) -> Result<BeltramiSolution> {
    let n = sys.num_dofs();
    let block = opts.block.unwrap_or((opts.k + 8).max(16)).max(opts.k);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start: Vec<Vec<f64>> = (0..block).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let start: Vec<Vec<f64>> = start.iter().map(|x| proj.apply(x)).collect::<Result<_>>()?;
    let mut x = orthonormalize(&sys.m, &[], &[], start);
    let mut applications = 0usize;
    let mut best = f64::INFINITY;
    let mut inner = 1e-8;
    let mut images_tol = inner;

    // Keep the shift well below the smallest |λ|: start from the lowest
    // mode a domain of this size could carry, then follow the Ritz values.
    let mut sigma = opts.shift.unwrap_or(0.1 * std::f64::consts::PI / sys.extent.max(f64::MIN_POSITIVE));
    let mut op = TwoShift::new(sys, proj, sigma);
    let mut settled = false;
    let mut tx = op.apply(&x, inner)?;
    applications += x.len();
    for cycle in 0..opts.max_cycles {
        let mut v = x.clone();
        let mut tv = tx.clone();
        let mut mv: Vec<Vec<f64>> = v.par_iter().map(|y| sys.m.mul_vec(y)).collect();
        let mut last = tx.clone();
        for _ in 1..opts.depth {
            let w = orthonormalize(&sys.m, &v, &mv, last);
            if w.is_empty() {
                break;
            }
            let tw = op.apply(&w, inner)?;
            applications += w.len();
            images_tol = images_tol.max(inner);
            mv.extend(w.par_iter().map(|y| sys.m.mul_vec(y)).collect::<Vec<_>>());
            v.extend(w);
            tv.extend(tw.iter().cloned());
            last = tw;
        }
        let ritz = rayleigh_ritz(&sys.m, &v, &tv);
        let keep = block.min(ritz.vectors.len());
        // Candidates: the k smallest |λ| among the kept Ritz vectors, skipping
        // anything the pencil annihilates.
        let mut cands: Vec<(f64, usize)> = (0..keep)
            .map(|i| (rayleigh(sys, &ritz.vectors[i]), i))
            .filter(|c| c.0.abs() > 1e-6 * sigma)
            .collect();
        cands.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()).then(b.0.total_cmp(&a.0)));
        cands.truncate(opts.k);
        let res: Vec<f64> = cands.par_iter().map(|&(l, i)| residual(sys, &ritz.vectors[i], l)).collect();
        let worst = res.iter().copied().fold(0.0, f64::max);
        best = best.min(worst);
        log::debug!(
            "cycle {cycle}: σ={sigma:.4} λ={:?} worst residual {worst:e}",
            cands.iter().map(|c| c.0).collect::<Vec<_>>()
        );

        // The spectrum of the two-shift operator separates best, and the
        // shifted solves are best conditioned, with σ just under the target;
        // move there once the estimate is trustworthy, and back off if the
        // target comes too close.
        let lowest = cands.first().map(|c| c.0.abs()).unwrap_or(f64::INFINITY);
        let retarget = if lowest < 1.2 * sigma {
            Some(0.5 * lowest)
        } else if opts.shift.is_none() && !settled && worst < 5e-2 && sigma < 0.4 * lowest {
            settled = true;
            Some(SHIFT_FRACTION * lowest)
        } else {
            None
        };
        if let Some(next) = retarget {
            sigma = next;
            op = TwoShift::new(sys, proj, sigma);
            x = ritz.vectors[..keep].to_vec();
            tx = op.apply(&x, inner)?;
            applications += x.len();
            images_tol = inner;
            continue;
        }
        if cands.len() == opts.k && worst <= opts.tol.max(1e-4) {
            // Null-space leakage from inexact solves moves the residual but
            // barely the Rayleigh quotient; one tight application removes it.
            let picked: Vec<Vec<f64>> = cands.iter().map(|&(_, i)| ritz.vectors[i].clone()).collect();
            let purified = op.apply(&picked, 1e-12)?;
            applications += picked.len();
            let (pairs, worst) = pencil_ritz(sys, fem, orthonormalize(&sys.m, &[], &[], purified));
            log::debug!("purified: worst residual {worst:e}");
            best = best.min(worst);
            if pairs.len() == opts.k && worst <= opts.tol {
                return Ok(BeltramiSolution {
                    bc: sys.bc,
                    pairs,
                    harmonic_dim: proj.harmonic_dim(),
                    shift: sigma,
                    cycles: cycle + 1,
                    operator_applications: applications,
                    dense: false,
                });
            }
        }
        inner = (1e-3 * worst).clamp(1e-12, 1e-6).min(inner);
        x = ritz.vectors[..keep].to_vec();
        // Thick restart: images follow from the Ritz combination unless the
        // inner tolerance has tightened well below what produced them.
        if inner < 0.1 * images_tol {
            tx = op.apply(&x, inner)?;
            applications += x.len();
            images_tol = inner;
        } else {
            tx = ritz.images[..keep].to_vec();
        }
    }
    Err(Error::NoConvergence { best_residual: best })
}

/// M1-orthogonal projection of `h` onto the span of `pairs`. Within a
/// degenerate shell this picks out the eigenfield closest to a given field.
pub fn project_onto(fem: &FemMatrices, pairs: &[&EigenPair], h: &[f64]) -> Vec<f64> {
    let mh = fem.m1.mul_vec(h);
    let mut out = vec![0.0; h.len()];
    for p in pairs {
        let c = dot(&p.h, &mh);
        for (o, x) in out.iter_mut().zip(&p.h) {
            *o += c * x;
        }
    }
    out
}

/// Per-pair diagnostics on the full mesh.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ResidualReport {
    pub lambda: f64,
    /// `‖S h − λ M1 h‖_{M1⁻¹}` in reduced coordinates.
    pub residual: f64,
    /// `‖curl H − λH‖_{L²} / ‖H‖_{L²}` from barycentric proxies.
    pub proxy_residual: f64,
    /// `‖Gᵀ M̃ y‖`, the constrained divergence.
    pub divergence: f64,
    pub helicity: f64,
    pub energy: f64,
    /// helicity / energy; equals λ for an eigenpair.
    pub rayleigh_ratio: f64,
}

pub fn residual_report(
    complex: &SimplicialComplex3,
    solution: &BeltramiSolution,
    proj: &KernelProjector,
) -> Result<Vec<ResidualReport>> {
    solution
        .pairs
        .iter()
        .map(|p| {
            let proxies = proxy_all(complex, &p.h)?;
            let (mut num, mut den) = (0.0, 0.0);
            for q in &proxies {
                let v = tet_geometry(complex, q.tet)?.volume;
                let d: [f64; 3] = std::array::from_fn(|k| q.curl_h[k] - p.lambda * q.h[k]);
                num += v * dot3(d, d);
                den += v * dot3(q.h, q.h);
            }
            Ok(ResidualReport {
                lambda: p.lambda,
                residual: p.residual,
                proxy_residual: (num / den).sqrt(),
                divergence: norm(&proj.divergence(&p.y)),
                helicity: p.helicity,
                energy: p.energy,
                rayleigh_ratio: p.helicity / p.energy,
            })
        })
        .collect()
}
