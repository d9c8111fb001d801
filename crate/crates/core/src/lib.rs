//! Finite-volume laboratory for the Keller-Segel-Navier-Stokes system with a
//! nonlinear flux boundary condition on a rectangle.

pub mod cli;
pub mod diagnostics;
pub mod eigen;
pub mod grid;
pub mod ksns;
pub mod linalg;
pub mod linstep;
