//! Spectral laboratory for admissibility, integral-norm input-to-state
//! stability and Lyapunov certificates of diagonal linear control systems.
//!
//! States live in a truncated `ℓ²` with the generator acting diagonally, so
//! every mild solution driven by a piecewise-constant input has an exact
//! per-mode closed form. The analysis modules build on that:
//!
//! * [`spectral`]: generators, semigroups, fractional powers, control operators.
//! * [`signals`]: piecewise-constant and analytic inputs with `L^p` norms.
//! * [`mild_solution`]: exact trajectories and time norms of trajectories.
//! * [`admissibility`]: estimates of admissibility constants and verdicts.
//! * [`iss`]: ISS gain fits and exponential-stability diagnostics.
//! * [`lyapunov`]: Lyapunov function constructions and their verification.
//! * [`scenarios`]: the catalog of reference systems and claims.
//! * [`cli`]: the command-line front end.

pub mod admissibility;
pub mod cli;
pub mod error;
pub mod exponent;
pub mod iss;
pub mod lyapunov;
pub mod mild_solution;
pub mod numerics;
pub mod scenarios;
pub mod signals;
pub mod spectral;

pub use error::{Error, Result};
pub use exponent::Exponent;
