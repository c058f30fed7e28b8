//! Tensor-train tools for lattice-theoretic (GCD/LCM) tensors and their
//! extremal H-, Z- and B-eigenvalues.

pub mod cross;
pub mod eigen;
pub mod lattice;
pub mod oracle;
pub mod tt;
