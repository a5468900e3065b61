//! Coupled unsteady vortex-lattice and ribbon-structure simulation of a
//! flexible plate, with exact, quasi- and inexact Newton solvers.

pub mod linalg;
pub mod structure;
pub mod uvlm;
pub mod coupling;
pub mod solvers;
pub mod sim;
