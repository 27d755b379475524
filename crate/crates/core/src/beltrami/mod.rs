//! Linear force-free fields: eigenpairs of the discrete curl pairing under
//! boundary conditions that make it self-adjoint, with the curl kernel
//! (gradients and harmonic fields) projected out.

mod eigen;

pub use eigen::{project_onto, residual_report, smallest_beltrami, BeltramiSolution, EigenOptions, EigenPair, Method, ResidualReport};

use std::collections::{HashMap, VecDeque};

use nalgebra::DMatrix;

use crate::cuts::solve_pinned;
use crate::error::{Error, Result};
use crate::fem::FemMatrices;
use crate::homology::cohomology::integral_h1;
use crate::homology::h1_basis;
use crate::mesh::{boundary_surface, BoundaryComponent, SimplicialComplex3};
use crate::sparse::{dot, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BcKind {
    /// No boundary; every edge is free.
    ClosedMesh,
    /// Tangential trace vanishes: boundary edges carry zero.
    ZeroTrace,
    /// Tangential trace is closed, with periods in a chosen Lagrangian line.
    ClosedTrace,
}

/// Which line of H¹ of a boundary torus the trace periods may occupy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagrangianChoice {
    /// Periods dual to the boundary cycle that bounds in M: net current
    /// through the spanning disk is allowed, the other period is zero.
    Meridian,
    /// Classes restricted from M: zero circulation around the bounding cycle.
    Longitude,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct BoundaryCondition {
    pub kind: BcKind,
    pub lagrangian_choice: LagrangianChoice,
}

impl BoundaryCondition {
    pub fn closed_mesh() -> Self {
        BoundaryCondition { kind: BcKind::ClosedMesh, lagrangian_choice: LagrangianChoice::Meridian }
    }

    pub fn zero_trace() -> Self {
        BoundaryCondition { kind: BcKind::ZeroTrace, lagrangian_choice: LagrangianChoice::Meridian }
    }

    pub fn closed_trace(choice: LagrangianChoice) -> Self {
        BoundaryCondition { kind: BcKind::ClosedTrace, lagrangian_choice: choice }
    }

    /// CLOSED_MESH without boundary, ZERO_TRACE otherwise.
    pub fn default_for(complex: &SimplicialComplex3) -> Self {
        if complex.has_boundary() {
            Self::zero_trace()
        } else {
            Self::closed_mesh()
        }
    }
}

/// The pencil `(S̃, M̃)` on constrained degrees of freedom.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub bc: BoundaryCondition,
    pub s: CsrMatrix,
    pub m: CsrMatrix,
    /// Edge cochain of each degree of freedom (edges × dofs).
    pub dof_map: CsrMatrix,
    /// Gradients in reduced coordinates (dofs × vertex potentials).
    pub gradient: CsrMatrix,
    /// Potentials held at zero to make the gradient map injective.
    pub pinned: Vec<bool>,
    /// Curl-free fields that are not gradients, not yet orthogonalized.
    pub harmonic_seeds: Vec<Vec<f64>>,
    /// `‖S̃ − S̃ᵀ‖_max / ‖S̃‖_max` before symmetrization.
    pub asymmetry: f64,
    /// Largest side of the bounding box (or period), used to size shifts.
    pub extent: f64,
}

impl ReducedSystem {
    pub fn num_dofs(&self) -> usize {
        self.s.nrows()
    }

    /// Full edge cochain of reduced coordinates.
    pub fn expand(&self, y: &[f64]) -> Vec<f64> {
        self.dof_map.mul_vec(y)
    }
}

/// Integer H¹ data of one boundary component, in global edge numbering.
struct BoundaryH1 {
    cocycles: Vec<Vec<f64>>,
    chains: Vec<Vec<i64>>,
}

fn boundary_h1(complex: &SimplicialComplex3, comp: &BoundaryComponent) -> BoundaryH1 {
    let vlocal: HashMap<usize, usize> = comp.vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let elocal: HashMap<usize, usize> = comp.edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let edges: Vec<[usize; 2]> =
        comp.edges.iter().map(|&e| complex.edges()[e].map(|v| vlocal[&v])).collect();
    let faces: Vec<Vec<(usize, i64)>> =
        comp.faces.iter().map(|&f| complex.d1().row(f).iter().map(|&(e, s)| (elocal[&e], s)).collect()).collect();
    let data = integral_h1(comp.vertices.len(), &edges, &faces);
    let globalize = |local: &[i64]| -> Vec<i64> {
        let mut g = vec![0; complex.num_edges()];
        for (i, &x) in local.iter().enumerate() {
            g[comp.edges[i]] = x;
        }
        g
    };
    BoundaryH1 {
        cocycles: data.cocycles.iter().map(|c| globalize(c).iter().map(|&x| x as f64).collect()).collect(),
        chains: data.chains.iter().map(|z| globalize(z)).collect(),
    }
}

fn pairing_f(c: &[f64], z: &[i64]) -> f64 {
    c.iter().zip(z).map(|(a, &b)| a * b as f64).sum()
}

/// Potential on a boundary component with `D0ψ = r` on its edges, zero at `root`.
fn integrate_on(complex: &SimplicialComplex3, comp: &BoundaryComponent, r: &[f64], root: usize) -> HashMap<usize, f64> {
    let mut adj: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    for &e in &comp.edges {
        let [a, b] = complex.edges()[e];
        adj.entry(a).or_default().push((b, e));
        adj.entry(b).or_default().push((a, e));
    }
    let mut psi = HashMap::from([(root, 0.0)]);
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for &(v, e) in &adj[&u] {
            if psi.contains_key(&v) {
                continue;
            }
            let step = if complex.edges()[e][0] == u { r[e] } else { -r[e] };
            psi.insert(v, psi[&u] + step);
            queue.push_back(v);
        }
    }
    psi
}

/// Real null space of a small dense matrix (columns of the result).
fn null_space(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    }
    let ata = a.transpose() * a;
    let eig = ata.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut idx: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i].abs() <= 1e-10 * scale).collect();
    idx.sort_unstable();
    idx.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect()
}

fn first_vertex_per_component(labels: &[usize], ncomp: usize, eligible: impl Fn(usize) -> bool) -> Vec<Option<usize>> {
    let mut first = vec![None; ncomp];
    for (v, &l) in labels.iter().enumerate() {
        if first[l].is_none() && eligible(v) {
            first[l] = Some(v);
        }
    }
    first
}

/// Restricts the pencil to the degrees of freedom allowed by `bc`.
pub fn reduce_system(complex: &SimplicialComplex3, fem: &FemMatrices, bc: BoundaryCondition) -> Result<ReducedSystem> {
    let ne = complex.num_edges();
    let nv = complex.num_vertices();
    let (labels, ncomp) = complex.vertex_components();
    let cocycles: Vec<Vec<i64>> = match h1_basis(complex) {
        Ok(b) => b.cocycles.into_iter().map(|c| c.values).collect(),
        Err(Error::TrivialH1) => Vec::new(),
        Err(e) => return Err(e),
    };

    let (dof_map, gradient, pinned, seeds) = match bc.kind {
        BcKind::ClosedMesh => {
            if complex.has_boundary() {
                return Err(Error::IncompatibleBC("CLOSED_MESH requires a mesh without boundary".into()));
            }
            let mut pinned = vec![false; nv];
            for v in first_vertex_per_component(&labels, ncomp, |_| true).into_iter().flatten() {
                pinned[v] = true;
            }
            let seeds = cocycles.iter().map(|c| c.iter().map(|&x| x as f64).collect()).collect();
            (CsrMatrix::identity(ne), complex.d0().to_csr(), pinned, seeds)
        }
        BcKind::ZeroTrace | BcKind::ClosedTrace => {
            if !complex.has_boundary() {
                return Err(Error::IncompatibleBC("trace conditions need a mesh with boundary".into()));
            }
            reduce_bounded(complex, bc, &labels, ncomp, &cocycles)?
        }
    };

    let s_red = fem.s.congruence(&dof_map);
    let m = fem.m1.congruence(&dof_map);
    let scale = s_red.max_abs();
    let asymmetry = if scale > 0.0 { s_red.asymmetry() / scale } else { 0.0 };
    if asymmetry > 1e-12 {
        return Err(Error::IncompatibleBC(format!(
            "reduced curl pairing is not symmetric (relative asymmetry {asymmetry:e})"
        )));
    }
    let s = s_red.add_scaled(&s_red.transpose(), 1.0).scale(0.5);
    let extent = extent(complex);
    Ok(ReducedSystem { bc, s, m, dof_map, gradient, pinned, harmonic_seeds: seeds, asymmetry, extent })
}

type Reduction = (CsrMatrix, CsrMatrix, Vec<bool>, Vec<Vec<f64>>);

fn reduce_bounded(
    complex: &SimplicialComplex3,
    bc: BoundaryCondition,
    labels: &[usize],
    ncomp: usize,
    cocycles: &[Vec<i64>],
) -> Result<Reduction> {
    let ne = complex.num_edges();
    let nv = complex.num_vertices();
    let flags = complex.boundary_flags();
    let surface = boundary_surface(complex)?;
    let interior: Vec<usize> = (0..ne).filter(|&e| !flags.edges[e]).collect();
    let mut dof_of_edge = vec![usize::MAX; ne];
    for (k, &e) in interior.iter().enumerate() {
        dof_of_edge[e] = k;
    }
    let bh1: Vec<BoundaryH1> = surface.components.iter().map(|c| boundary_h1(complex, c)).collect();

    // Boundary periods of the M-cocycles, one row per boundary cycle.
    let cyc: Vec<(usize, &Vec<i64>)> =
        bh1.iter().enumerate().flat_map(|(k, b)| b.chains.iter().map(move |z| (k, z))).collect();

    // Chosen boundary cochains (CLOSED_TRACE only), one per torus component.
    let mut chosen: Vec<(usize, Vec<f64>)> = Vec::new();
    if bc.kind == BcKind::ClosedTrace {
        for (k, comp) in surface.components.iter().enumerate() {
            match comp.genus {
                0 => {}
                1 => chosen.push((k, lagrangian_cochain(&bh1[k], cocycles, bc.lagrangian_choice)?)),
                g => {
                    return Err(Error::IncompatibleBC(format!(
                        "boundary component {k} has genus {g}; only spheres and tori are supported"
                    )))
                }
            }
        }
    }

    // Cocycle combinations (and trace coefficients) compatible with the
    // boundary condition: boundary periods of Σxᵢcᵢ − Σtⱼgⱼ vanish.
    let nb = cocycles.len();
    let mut a = DMatrix::<f64>::zeros(cyc.len(), nb + chosen.len());
    for (r, (_, z)) in cyc.iter().enumerate() {
        for (i, c) in cocycles.iter().enumerate() {
            a[(r, i)] = c.iter().zip(z.iter()).map(|(&x, &y)| (x * y) as f64).sum();
        }
        for (j, (_, g)) in chosen.iter().enumerate() {
            a[(r, nb + j)] = -pairing_f(g, z);
        }
    }
    let combos = if nb + chosen.len() == 0 { Vec::new() } else { null_space(&a) };

    let comp_of_bvertex: HashMap<usize, usize> = surface
        .components
        .iter()
        .enumerate()
        .flat_map(|(k, c)| c.vertices.iter().map(move |&v| (v, k)))
        .collect();
    let roots: Vec<usize> = surface.components.iter().map(|c| c.vertices[0]).collect();

    let combine = |x: &[f64], t: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; ne];
        for (xi, ci) in x.iter().zip(cocycles) {
            for (e, &v) in ci.iter().enumerate() {
                c[e] += xi * v as f64;
            }
        }
        for (tj, (_, g)) in t.iter().zip(&chosen) {
            for e in 0..ne {
                if flags.edges[e] {
                    c[e] -= tj * g[e];
                }
            }
        }
        c
    };
    // Potential on boundary vertices whose gradient matches `r` on boundary edges.
    let boundary_potential = |r: &[f64]| -> HashMap<usize, f64> {
        let mut psi = HashMap::new();
        for (k, comp) in surface.components.iter().enumerate() {
            psi.extend(integrate_on(complex, comp, r, roots[k]));
        }
        psi
    };

    match bc.kind {
        BcKind::ZeroTrace => {
            let potentials: Vec<usize> = (0..nv).filter(|&v| !flags.vertices[v]).collect();
            let mut col_of = vec![usize::MAX; nv];
            for (k, &v) in potentials.iter().enumerate() {
                col_of[v] = k;
            }
            let mut trip = Vec::new();
            for (k, &e) in interior.iter().enumerate() {
                for &(v, s) in complex.d0().row(e) {
                    if col_of[v] != usize::MAX {
                        trip.push((k, col_of[v], s as f64));
                    }
                }
            }
            let gradient = CsrMatrix::from_triplets(interior.len(), potentials.len(), &trip);
            let mut pin = vec![false; potentials.len()];
            for v in first_vertex_per_component(labels, ncomp, |_| true).into_iter().flatten() {
                let has_boundary = labels.iter().enumerate().any(|(u, &l)| l == labels[v] && flags.vertices[u]);
                if !has_boundary {
                    pin[col_of[v]] = true;
                }
            }
            let dof_map = CsrMatrix::from_triplets(
                ne,
                interior.len(),
                &interior.iter().enumerate().map(|(k, &e)| (e, k, 1.0)).collect::<Vec<_>>(),
            );
            let restrict = |c: &[f64]| -> Vec<f64> { interior.iter().map(|&e| c[e]).collect() };
            let mut seeds = Vec::new();
            // Potentials that are 1 on one boundary component and 0 on the
            // others of the same body (all but one per body).
            for l in 0..ncomp {
                let comps: Vec<usize> = (0..surface.components.len())
                    .filter(|&k| labels[surface.components[k].vertices[0]] == l)
                    .collect();
                for &k in comps.iter().skip(1) {
                    let mut u = vec![0.0; nv];
                    for &v in &surface.components[k].vertices {
                        u[v] = 1.0;
                    }
                    seeds.push(restrict(&complex.d0().apply_f64(&u)));
                }
            }
            // Cocycles whose boundary restriction is exact.
            for x in &combos {
                let c = combine(x, &[]);
                let psi = boundary_potential(&c);
                let mut u = vec![0.0; nv];
                for (&v, &p) in &psi {
                    u[v] = p;
                }
                let g = complex.d0().apply_f64(&u);
                let h: Vec<f64> = c.iter().zip(&g).map(|(a, b)| a - b).collect();
                seeds.push(restrict(&h));
            }
            Ok((dof_map, gradient, pin, seeds))
        }
        BcKind::ClosedTrace => {
            // dofs: interior edges | unpinned boundary vertices | trace coefficients
            let alpha: Vec<usize> =
                (0..nv).filter(|&v| flags.vertices[v] && !roots.contains(&v)).collect();
            let mut alpha_col = vec![usize::MAX; nv];
            for (k, &v) in alpha.iter().enumerate() {
                alpha_col[v] = interior.len() + k;
            }
            let t0 = interior.len() + alpha.len();
            let ndofs = t0 + chosen.len();
            let mut r = Vec::new();
            for (k, &e) in interior.iter().enumerate() {
                r.push((e, k, 1.0));
            }
            for e in 0..ne {
                if !flags.edges[e] {
                    continue;
                }
                for &(v, s) in complex.d0().row(e) {
                    if alpha_col[v] != usize::MAX {
                        r.push((e, alpha_col[v], s as f64));
                    }
                }
                for (j, (_, g)) in chosen.iter().enumerate() {
                    if g[e] != 0.0 {
                        r.push((e, t0 + j, g[e]));
                    }
                }
            }
            let dof_map = CsrMatrix::from_triplets(ne, ndofs, &r);

            let mut trip = Vec::new();
            for (k, &e) in interior.iter().enumerate() {
                for &(v, s) in complex.d0().row(e) {
                    trip.push((k, v, s as f64));
                }
            }
            for &v in &alpha {
                let root = roots[comp_of_bvertex[&v]];
                trip.push((alpha_col[v], v, 1.0));
                trip.push((alpha_col[v], root, -1.0));
            }
            let gradient = CsrMatrix::from_triplets(ndofs, nv, &trip);
            let mut pin = vec![false; nv];
            for v in first_vertex_per_component(labels, ncomp, |_| true).into_iter().flatten() {
                pin[v] = true;
            }

            let mut seeds = Vec::new();
            for combo in &combos {
                let (x, t) = combo.split_at(nb);
                let c = combine(x, t);
                let psi = boundary_potential(&c);
                let mut y = vec![0.0; ndofs];
                for (k, &e) in interior.iter().enumerate() {
                    y[k] = c[e];
                }
                for &v in &alpha {
                    y[alpha_col[v]] = psi[&v];
                }
                y[t0..].copy_from_slice(t);
                seeds.push(y);
            }
            Ok((dof_map, gradient, pin, seeds))
        }
        BcKind::ClosedMesh => unreachable!(),
    }
}

/// Boundary cochain spanning the chosen Lagrangian line of a boundary torus.
fn lagrangian_cochain(b: &BoundaryH1, cocycles: &[Vec<i64>], choice: LagrangianChoice) -> Result<Vec<f64>> {
    // Pairings of the M-cocycles with the two boundary cycles.
    let rows: Vec<Vec<i64>> = b
        .chains
        .iter()
        .map(|z| cocycles.iter().map(|c| c.iter().zip(z).map(|(x, y)| x * y).sum()).collect())
        .collect();
    // The bounding (meridian) cycle m = a₀z₀ + a₁z₁ pairs to zero with all of H¹(M).
    let pivot = (0..cocycles.len()).find(|&i| rows[0][i] != 0 || rows[1][i] != 0);
    let a = match pivot {
        None => {
            return Err(Error::IncompatibleBC("both boundary cycles bound; no Lagrangian line to choose".into()))
        }
        Some(i) => {
            let (p, q) = (rows[1][i], -rows[0][i]);
            let g = num_integer::gcd(p, q).max(1);
            [p / g, q / g]
        }
    };
    let bounds = (0..cocycles.len()).all(|i| a[0] * rows[0][i] + a[1] * rows[1][i] == 0);
    if !bounds {
        return Err(Error::IncompatibleBC("no boundary cycle bounds in M; meridian is undefined".into()));
    }
    let coeff = match choice {
        LagrangianChoice::Meridian => [a[0] as f64, a[1] as f64],
        LagrangianChoice::Longitude => [-a[1] as f64, a[0] as f64],
    };
    let n = b.cocycles[0].len();
    Ok((0..n).map(|e| coeff[0] * b.cocycles[0][e] + coeff[1] * b.cocycles[1][e]).collect())
}

/// M̃-orthogonal projector onto the complement of gradients ⊕ harmonic fields.
#[derive(Clone, Debug)]
pub struct KernelProjector {
    m: CsrMatrix,
    gradient: CsrMatrix,
    gradient_t: CsrMatrix,
    laplacian: CsrMatrix,
    pinned: Vec<bool>,
    /// M̃-orthonormal harmonic fields in reduced coordinates.
    pub harmonic: Vec<Vec<f64>>,
    tol: f64,
}

impl KernelProjector {
    pub fn harmonic_dim(&self) -> usize {
        self.harmonic.len()
    }

    /// `Gᵀ M̃ x`: the discrete divergence in reduced coordinates.
    pub fn divergence(&self, x: &[f64]) -> Vec<f64> {
        self.gradient_t.mul_vec(&self.m.mul_vec(x))
    }

    /// Removes the M̃-orthogonal projection onto gradients.
    pub fn remove_gradients(&self, x: &[f64]) -> Result<Vec<f64>> {
        let rhs = self.divergence(x);
        let phi = solve_pinned(&self.laplacian, &rhs, &self.pinned, self.tol)?;
        let g = self.gradient.mul_vec(&phi);
        Ok(x.iter().zip(&g).map(|(a, b)| a - b).collect())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.remove_gradients(x)?;
        let my = self.m.mul_vec(&y);
        let coeffs: Vec<f64> = self.harmonic.iter().map(|h| dot(h, &my)).collect();
        for (h, c) in self.harmonic.iter().zip(coeffs) {
            for (yi, hi) in y.iter_mut().zip(h) {
                *yi -= c * hi;
            }
        }
        Ok(y)
    }
}

/// Builds the kernel projector for a reduced system.
pub fn kernel_projector(system: &ReducedSystem) -> Result<KernelProjector> {
    let gradient_t = system.gradient.transpose();
    let laplacian = system.m.congruence(&system.gradient);
    let mut proj = KernelProjector {
        m: system.m.clone(),
        gradient: system.gradient.clone(),
        gradient_t,
        laplacian,
        pinned: system.pinned.clone(),
        harmonic: Vec::new(),
        tol: 1e-12,
    };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for seed in &system.harmonic_seeds {
        let mut h = proj.remove_gradients(seed)?;
        for _ in 0..2 {
            let mh = system.m.mul_vec(&h);
            for b in &basis {
                let c = dot(b, &mh);
                for (x, y) in h.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let nrm = system.m.bilinear(&h, &h).sqrt();
        let seed_norm = system.m.bilinear(seed, seed).sqrt();
        if nrm > 1e-8 * seed_norm.max(f64::MIN_POSITIVE) {
            basis.push(h.iter().map(|x| x / nrm).collect());
        }
    }
    proj.harmonic = basis;
    Ok(proj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_box_minus_ring, gen_grid, CellRing, GridSpec};

    fn system(c: &SimplicialComplex3, bc: BoundaryCondition) -> Result<ReducedSystem> {
        reduce_system(c, &FemMatrices::assemble(c).unwrap(), bc)
    }

    #[test]
    fn torus_closed_mesh() {
        let c = gen_grid(GridSpec::torus3(4)).unwrap();
        let sys = system(&c, BoundaryCondition::closed_mesh()).unwrap();
        assert_eq!(sys.num_dofs(), c.num_edges());
        let p = kernel_projector(&sys).unwrap();
        assert_eq!(p.harmonic_dim(), 3);
        for h in &p.harmonic {
            assert!(sys.s.mul_vec(h).iter().all(|x| x.abs() < 1e-10));
        }
        assert!(matches!(system(&c, BoundaryCondition::zero_trace()), Err(Error::IncompatibleBC(_))));
    }

    #[test]
    fn cube_zero_trace() {
        let c = gen_grid(GridSpec::cube(3)).unwrap();
        let sys = system(&c, BoundaryCondition::zero_trace()).unwrap();
        assert!(sys.asymmetry <= 1e-12);
        assert_eq!(kernel_projector(&sys).unwrap().harmonic_dim(), 0);
        assert!(matches!(system(&c, BoundaryCondition::closed_mesh()), Err(Error::IncompatibleBC(_))));
    }

    #[test]
    fn solid_torus_closed_trace_choices() {
        let c = gen_grid(GridSpec::new([3, 3, 6], [1.0; 3], [false, false, true])).unwrap();
        let mer = system(&c, BoundaryCondition::closed_trace(LagrangianChoice::Meridian)).unwrap();
        let lon = system(&c, BoundaryCondition::closed_trace(LagrangianChoice::Longitude)).unwrap();
        assert!(mer.asymmetry <= 1e-12 && lon.asymmetry <= 1e-12);
        assert_eq!(kernel_projector(&mer).unwrap().harmonic_dim(), 0);
        let p = kernel_projector(&lon).unwrap();
        assert_eq!(p.harmonic_dim(), 1);
        assert!(lon.s.mul_vec(&p.harmonic[0]).iter().all(|x| x.abs() < 1e-10));
        // The reconstructed trace is closed on the boundary.
        let h = lon.expand(&p.harmonic[0]);
        let surface = boundary_surface(&c).unwrap();
        for &f in &surface.face_ids {
            let curl: f64 = c.d1().row(f).iter().map(|&(e, s)| s as f64 * h[e]).sum();
            assert!(curl.abs() < 1e-10);
        }
    }

    #[test]
    fn ring_complement_zero_trace_has_step_field() {
        let c = gen_box_minus_ring(5, CellRing::centered(5)).unwrap();
        let sys = system(&c, BoundaryCondition::zero_trace()).unwrap();
        // Relative H¹ of the ring complement has rank 1: the potential
        // difference between the box and the ring.
        assert_eq!(kernel_projector(&sys).unwrap().harmonic_dim(), 1);
    }

    #[test]
    fn projector_kills_gradients() {
        let c = gen_grid(GridSpec::torus3(4)).unwrap();
        let sys = system(&c, BoundaryCondition::closed_mesh()).unwrap();
        let p = kernel_projector(&sys).unwrap();
        let phi: Vec<f64> = (0..c.num_vertices()).map(|i| ((i * 31) % 17) as f64 - 8.0).collect();
        let g = c.d0().apply_f64(&phi);
        let pg = p.apply(&g).unwrap();
        let scale = crate::sparse::norm(&g);
        assert!(crate::sparse::norm(&pg) <= 1e-10 * scale);
        let x: Vec<f64> = (0..c.num_edges()).map(|i| (i as f64 * 0.7).sin()).collect();
        let px = p.apply(&x).unwrap();
        let ppx = p.apply(&px).unwrap();
        assert!(px.iter().zip(&ppx).all(|(a, b)| (a - b).abs() < 1e-10));
    }
}

fn extent(complex: &SimplicialComplex3) -> f64 {
    (0..3)
        .map(|a| {
            complex.periods()[a].unwrap_or_else(|| {
                let (lo, hi) = complex
                    .vertices()
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[a]), hi.max(p[a])));
                hi - lo
            })
        })
        .fold(0.0, f64::max)
}
