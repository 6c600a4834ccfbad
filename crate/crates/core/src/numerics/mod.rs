//! Shared numerical kernels.

pub mod expint;
pub mod fd;
pub mod grid;
pub mod linalg;
pub mod quadrature;
pub mod roots;

pub use expint::expint;
pub use grid::{clustered_map, Grid1D};
pub use linalg::{leading_eigenpair, Eigenpair};
pub use quadrature::{gauss_nodes, QuadratureRule};
pub use roots::{brent_root, golden_min};
