//! Green's functions for linear ODEs with parameterized non-local boundary
//! conditions, plus constant-sign analysis over parameter grids.

// `!(a < b)` is how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod expr;
pub mod functional;
pub mod linalg;
pub mod nonlocal;
pub mod ode;
pub mod periodic;
pub mod quadrature;
pub mod twopoint;

pub use analysis::{
    comparison_check, constant_sign_on_grid, sign_region_scan, ComparisonReport, Kernel, ParameterFamily,
    PeriodicFamily, ScanOptions, SignLabel, SignRegionReport, SpecFamily,
};
pub use error::{Error, Result};
pub use expr::Expr;
pub use functional::LinearFunctional;
pub use linalg::Matrix;
pub use nonlocal::{FunctionalSet, NonlocalGreen, NonlocalOptions, NonlocalSpec, SolveOptions};
pub use ode::{Coefficient, FundamentalSystem, LinearODEProblem, SolutionTrajectory};
pub use periodic::{oracle_G, oracle_g, oracle_omega1, sign_boundaries, PeriodicParams};
pub use quadrature::Quadrature;
pub use twopoint::{BoundaryOperatorSet, Branch, TwoPointGreen};
