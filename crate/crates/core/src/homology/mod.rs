//! Integer homology of a complex and of the pair (M, ∂M), and an integral
//! basis of H¹ with dual edge loops.

pub(crate) mod cohomology;
pub mod snf;

pub use cohomology::{h1_basis, BasisSource, CohomologyBasis};
pub use snf::{smith_normal_form, SnfResult};

use crate::mesh::SimplicialComplex3;
use crate::sparse::IntMatrix;

/// Above this many simplices in a degree, ranks are computed over a large
/// prime field instead of exactly, and torsion is not reported.
pub const EXACT_SNF_LIMIT: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct HomologyReport {
    pub betti: [usize; 4],
    /// Torsion coefficients of H₀…H₃ (invariant factors greater than one).
    pub torsion: [Vec<u64>; 4],
    /// False when ranks came from modular elimination.
    pub exact: bool,
}

impl HomologyReport {
    pub fn is_torsion_free(&self) -> bool {
        self.torsion.iter().all(Vec::is_empty)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.betti.iter().enumerate().map(|(k, &b)| if k % 2 == 0 { b as i64 } else { -(b as i64) }).sum()
    }
}

/// Homology of a chain complex given by its three coboundary matrices and
/// simplex counts.
fn chain_homology(ops: [&IntMatrix; 3], counts: [usize; 4]) -> HomologyReport {
    let exact = counts.iter().all(|&c| c <= EXACT_SNF_LIMIT);
    if !exact {
        log::warn!("complex exceeds {EXACT_SNF_LIMIT} simplices in some degree; computing ranks modulo a prime");
    }
    let mut ranks = [0usize; 3];
    let mut torsion: [Vec<u64>; 4] = Default::default();
    for (k, op) in ops.iter().enumerate() {
        if exact {
            let snf = snf::sparse_invariant_factors(op);
            ranks[k] = snf.rank;
            // The coboundary dᵏ: Cᵏ → Cᵏ⁺¹ is the transpose of ∂ₖ₊₁, which has
            // the same invariant factors; its torsion lives in Hₖ.
            torsion[k] = snf.torsion().iter().map(snf::to_u64).collect();
        } else {
            ranks[k] = snf::rank_mod_p(op);
        }
    }
    let betti = [
        counts[0] - ranks[0],
        counts[1] - ranks[0] - ranks[1],
        counts[2] - ranks[1] - ranks[2],
        counts[3] - ranks[2],
    ];
    HomologyReport { betti, torsion, exact }
}

/// Betti numbers and torsion of M.
pub fn betti_numbers(complex: &SimplicialComplex3) -> HomologyReport {
    chain_homology([complex.d0(), complex.d1(), complex.d2()], complex.counts())
}

/// Betti numbers and torsion of the pair (M, ∂M), from the quotient chain
/// complex with all boundary simplices removed. For closed M this is the
/// absolute homology.
pub fn relative_betti(complex: &SimplicialComplex3) -> HomologyReport {
    let flags = complex.boundary_flags();
    let keep_v: Vec<bool> = flags.vertices.iter().map(|b| !b).collect();
    let keep_e: Vec<bool> = flags.edges.iter().map(|b| !b).collect();
    let keep_f: Vec<bool> = flags.faces.iter().map(|b| !b).collect();
    let keep_t = vec![true; complex.num_tets()];
    let d0 = complex.d0().restrict(&keep_e, &keep_v);
    let d1 = complex.d1().restrict(&keep_f, &keep_e);
    let d2 = complex.d2().restrict(&keep_t, &keep_f);
    let count = |m: &[bool]| m.iter().filter(|&&k| k).count();
    chain_homology([&d0, &d1, &d2], [count(&keep_v), count(&keep_e), count(&keep_f), complex.num_tets()])
}

/// `βₖ(M) = β₃₋ₖ(M, ∂M)` for all k.
pub fn lefschetz_duality_holds(absolute: &HomologyReport, relative: &HomologyReport) -> bool {
    (0..4).all(|k| absolute.betti[k] == relative.betti[3 - k])
}
