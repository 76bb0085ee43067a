//! Dense and sparse symmetric matrix primitives, a conjugate-gradient solver
//! and a partial symmetric eigensolver.

pub mod cg;
pub mod dense;
pub mod eigen;
pub mod sparse;

pub use cg::solve_spd;
pub use dense::{axpy, dot, norm2, DenseMatrix};
pub use eigen::{dense_smallest, lanczos_smallest, smallest_eigenpairs, EigenPairs};
pub use sparse::SparseSymMatrix;
