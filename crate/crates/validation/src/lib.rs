//! Independent oracles and the acceptance criteria built on them.
//!
//! Nothing here reuses the numerical kernels under test: the Voigt oracle is
//! a direct quadrature of the convolution integral, the catalog oracle
//! enumerates selection rules from tabulated nuclear spins, and the
//! steady-state oracle scans the fixed-point residual on a dense grid.

pub mod criteria;
pub mod oracles;

pub use criteria::{run_all, Report};
