//! Serializable summaries of one radial solve.

use crate::masses::{self, MassError};
use crate::radial::RadialProfile;
use serde::Serialize;

/// Full record of one solve: masses, Π residuals, convergence diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    /// Diagonal perturbation ε, when the solve came from a continuation path.
    pub eps: Option<f64>,
    pub converged: bool,
    pub r_cut: f64,
    pub grid_points: usize,
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
    /// h-weighted masses, the ones entering Λ.
    pub weighted_sigma: Vec<f64>,
    pub m: Vec<f64>,
    pub tail_fraction: Vec<f64>,
    pub lambda_i: f64,
    pub min_proper_lambda: f64,
}

impl SolveReport {
    pub fn from_profile(profile: &RadialProfile, eps: Option<f64>) -> Result<Self, MassError> {
        let mv = masses::compute_masses(profile)?;
        let weighted = mv.weighted_sigma(profile.weights());
        let res = profile.matrix().pi_residual(&weighted)?;
        Ok(Self {
            eps,
            converged: profile.converged(),
            r_cut: profile.r_cut(),
            grid_points: profile.grid().len(),
            beta: profile.beta().to_vec(),
            sigma: mv.sigma.clone(),
            weighted_sigma: weighted,
            m: mv.m.clone(),
            tail_fraction: mv.tail_fraction(),
            lambda_i: res.lambda_i,
            min_proper_lambda: res.min_proper_lambda,
        })
    }
}
