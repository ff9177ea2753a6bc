//! Finite-difference study of the vanishing-viscosity limit of a regularized
//! one-phase Stefan problem.
//!
//! The regularized equation `∂_t u = Δα_ε(u) + f(u)` is solved in its
//! enthalpy form by an implicit scheme with semi-smooth Newton steps
//! ([`solver`]). Sweeps over `ε` ([`limit_analysis`]) and post-processing of
//! the finest run ([`stefan_verify`]) check that the solutions settle onto a
//! Stefan problem with latent heat `W(x) = -u0(x) - ∫_0^{T(x)} f̄`.
//!
//! ```
//! use stefan_limit::grid::Grid1D;
//! use stefan_limit::nonlinearity::{Epsilon, NonlinearitySpec};
//! use stefan_limit::presets;
//! use stefan_limit::solver::{solve, NewtonParams};
//!
//! let grid = Grid1D::unit(64, 200).unwrap();
//! let scenario = presets::melting_default(grid);
//! let spec = scenario.problem(Epsilon::new(0.01).unwrap(), NonlinearitySpec::zero()).unwrap();
//! let run = solve(&spec, &NewtonParams::default()).unwrap();
//! assert!(run.u.sup_norm() <= 1.0 + 1e-9);
//! ```

pub mod benchmarks;
pub mod error;
pub mod grid;
pub mod limit_analysis;
pub mod nonlinearity;
pub mod presets;
pub mod solver;
pub mod stefan_verify;
pub mod transforms;
mod tridiag;

pub use error::{Error, Result};

// Book chapters, compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/enthalpy.md")]
    mod enthalpy {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/transforms.md")]
    mod transforms {}
    #[doc = include_str!("../../../book/src/limit.md")]
    mod limit {}
    #[doc = include_str!("../../../book/src/free_boundary.md")]
    mod free_boundary {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    mod benchmarks {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
