//! Topology and spectra of magnetic fields on tetrahedral meshes of compact
//! 3-manifolds: integer (co)homology, cuts for multivalued scalar potentials,
//! linear force-free (Beltrami) eigenfields of a self-adjoint discrete curl,
//! and pointwise contact/foliation classification of fields.

pub mod beltrami;
pub mod cuts;
pub mod error;
pub mod fem;
pub mod field;
pub mod generators;
pub mod io;
pub mod homology;
pub mod mesh;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result};
pub use mesh::{build_complex, build_complex_periodic, Cochain, SimplicialComplex3};
