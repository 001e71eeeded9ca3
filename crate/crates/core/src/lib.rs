//! MAP and minimum-energy state-path estimation for continuous-discrete
//! systems `dX = f(t, X) dt + G dW` observed at discrete instants.
//!
//! The crate evaluates the discretized merits (Euler and trapezoidal) and
//! their continuous-time limits (Onsager–Machlup and energy functionals),
//! maximizes them over piecewise-linear paths, simulates test data and
//! provides independent oracles for validation.

pub mod functionals;
pub mod model;
pub mod optimizer;
pub mod oracle;
pub mod simulate;
