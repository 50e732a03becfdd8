//! Numerical machinery for entire radial solutions of Liouville systems
//!
//!   Δu_i + Σ_j a_ij h_j e^{u_j} = 0   on ℝ²,   ∫_{ℝ²} e^{u_i} < ∞,
//!
//! with `A = (a_ij)` symmetric, non-negative, invertible and irreducible.
//!
//! The crate solves the singular radial initial value problem by adaptive
//! integration in log-radius, computes the masses σ_i = ∫_0^∞ e^{u_i} s ds
//! together with the residuals of the Rellich-Pohozaev constraint Λ_I(σ) = 0,
//! integrates the linearized (variational) system to obtain the Jacobian
//! ∂σ_i/∂β_m of the shooting map, and inverts the mass map by damped Newton.
//!
//! Module layout:
//! - [`coeff`]: the interaction matrix and the Λ_J polynomials
//! - [`radial`]: the radial ODE solver and solution profiles
//! - [`masses`]: mass quadrature, tail fits and Π-membership residuals
//! - [`variational`]: linearized solves, kernel check, shooting Jacobian
//! - [`shooting`]: mass-map inversion, injectivity sweeps, ε-continuation
//! - [`pohozaev`]: finite-ball Pohozaev identities as numerical residuals
//! - [`report`]: serializable solve summaries

pub mod coeff;
pub mod integrate;
pub mod masses;
pub mod pohozaev;
pub mod radial;
pub mod report;
pub mod shooting;
pub mod variational;

pub use coeff::{CoefficientMatrix, MatrixError, PiResidual};
pub use masses::{MassError, MassVector, TailFit};
pub use radial::{RadialProfile, SolveError, SolveOptions};
pub use report::SolveReport;
pub use shooting::{InversionResult, InversionTarget, NewtonOptions, ShootError, SweepReport};
pub use variational::{KernelCheck, LinearizedProfile, VariationalBasis, VariationalError};

