//! Krylov solvers for the sparse symmetric systems that show up in the
//! potential solves (SPD, conjugate gradients) and in shift-invert
//! eigen-iterations (indefinite, MINRES).

use crate::error::{Error, Result};
use crate::sparse::{axpy, dot, norm, CsrMatrix};

#[derive(Clone, Copy, Debug)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn jacobi(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d.abs() > 0.0 { 1.0 / d.abs() } else { 1.0 })
        .collect()
}

/// Jacobi-preconditioned conjugate gradients for SPD `a`.
///
/// Fails when the true relative residual is still above `tol` after
/// `max_iter` iterations.
pub fn cg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let dinv = jacobi(a);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        if norm(&r) <= tol * bnorm {
            break;
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let true_res = {
        let ax = a.mul_vec(&x);
        let res: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
        norm(&res) / bnorm
    };
    let stats = SolveStats { iterations, relative_residual: true_res };
    if true_res > tol {
        return Err(Error::SolverFailure(format!(
            "conjugate gradients stagnated at relative residual {true_res:e} (target {tol:e}) after {iterations} iterations"
        )));
    }
    Ok((x, stats))
}

/// MINRES for symmetric (possibly indefinite or singular but consistent)
/// systems, with an SPD Jacobi-type preconditioner built from `|diag(a)|`.
///
/// Returns the best iterate; `relative_residual` is the true residual.
pub fn minres(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, SolveStats) {
    minres_diag(a, b, &jacobi(a), tol, max_iter)
}

/// MINRES with the diagonal preconditioner `dinv` (positive entries).
pub fn minres_diag(a: &CsrMatrix, b: &[f64], dinv: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, SolveStats) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return (x, SolveStats { iterations: 0, relative_residual: 0.0 });
    }
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(dinv).map(|(a, d)| a * d).collect() };

    let mut r1 = b.to_vec();
    let mut y = precond(&r1);
    let beta1 = dot(&r1, &y).sqrt();
    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut iterations = 0;

    for it in 0..max_iter {
        iterations = it + 1;
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        y = a.mul_vec(&v);
        if it >= 1 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        y = precond(&r2);
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let denom = 1.0 / gamma;
        for i in 0..n {
            let w1 = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - oldeps * w1 - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        if phibar <= tol * beta1 || beta == 0.0 {
            break;
        }
    }
    let ax = a.mul_vec(&x);
    let res: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    (x, SolveStats { iterations, relative_residual: norm(&res) / bnorm })
}
