//! Inversion of the mass map β ↦ σ, injectivity sweeps over β-grids, and
//! diagonal ε-perturbation continuation.
//!
//! Throughout, β_n = 0 is the normalization that removes the scaling
//! degeneracy; the Newton unknowns are β_1..β_{n−1}.

use crate::coeff::{CoefficientMatrix, MatrixError};
use crate::masses::{self, MassError};
use crate::radial::{self, RadialProfile, SolveError, SolveOptions};
use crate::report::SolveReport;
use crate::variational::{self, VariationalError};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ShootError {
    #[error("sigma head entries must be positive, got {value} at index {index}")]
    NonPositiveTarget { index: usize, value: f64 },
    #[error("neither root of the Λ_I quadratic yields Π membership")]
    NoAdmissibleRoot,
    #[error("both quadratic roots yield Π membership and the m > 2 tie-break is inconclusive")]
    AmbiguousRoot,
    #[error("inversion needs n ≥ 2 (for n = 1 every β maps to the same σ)")]
    TrivialDimension,
    #[error("Jacobian is numerically singular at iterate {iteration} (|det| = {det:e})")]
    SingularJacobian { iteration: usize, det: f64 },
    #[error("no convergence after {max_iterations} Newton iterations (best residual {best_residual:e})")]
    MaxIterations {
        max_iterations: usize,
        best_residual: f64,
    },
    #[error("line search failed at iterate {iteration} (residual {residual:e})")]
    LineSearchFailed { iteration: usize, residual: f64 },
    #[error("inner radial solve failed: {0}")]
    SolveFailed(#[from] SolveError),
    #[error("mass computation failed: {0}")]
    MassFailed(#[from] MassError),
    #[error("variational solve failed: {0}")]
    VariationalFailed(#[from] VariationalError),
    #[error("perturbed matrix A + {eps}·I is inadmissible: {source}")]
    InadmissiblePerturbedMatrix { eps: f64, source: MatrixError },
    #[error("epsilon path must be non-negative and strictly decreasing")]
    BadEpsPath,
    #[error("duplicate grid points at indices {first} and {second}")]
    DuplicateGridPoint { first: usize, second: usize },
    #[error("grid point {index} has {got} entries, expected {expected}")]
    GridDimension {
        index: usize,
        expected: usize,
        got: usize,
    },
}

/// A target on Π given by its first n−1 (h-weighted) masses.
#[derive(Clone, Debug)]
pub struct InversionTarget {
    pub matrix: CoefficientMatrix,
    pub h: Vec<f64>,
    pub sigma_head: Vec<f64>,
}

/// Newton iteration controls.
#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Convergence threshold on max_i |σ_i − target_i|.
    pub residual_tol: f64,
    /// Armijo sufficient-decrease slope.
    pub armijo_slope: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 40,
            residual_tol: 1e-8,
            armijo_slope: 1e-4,
            max_halvings: 20,
        }
    }
}

/// Outcome of a successful mass-map inversion.
#[derive(Debug)]
pub struct InversionResult {
    /// Recovered β_1..β_{n−1} (β_n = 0 by normalization).
    pub beta: Vec<f64>,
    pub iterations: usize,
    /// max_i |σ_i(β) − σ_target_i| at the solution.
    pub residual_norm: f64,
    pub sigma: Vec<f64>,
    pub profile: RadialProfile,
}

/// Completes (σ_1..σ_{n−1}) to a point of Π by solving Λ_I = 0 for σ_n.
///
/// Picks the root with all proper Λ_J > 0; ties are broken by requiring
/// m_i = (Aσ)_i > 2 for all i.
pub fn complete_sigma(
    matrix: &CoefficientMatrix,
    sigma_head: &[f64],
) -> Result<Vec<f64>, ShootError> {
    let n = matrix.n();
    assert_eq!(sigma_head.len(), n - 1, "head must have n − 1 entries");
    for (index, &value) in sigma_head.iter().enumerate() {
        if value <= 0.0 {
            return Err(ShootError::NonPositiveTarget { index, value });
        }
    }
    // Λ_I(σ_head, x) = Λ_head + 4x − 2x Σ_{j<n} a_nj σ_j − a_nn x²
    let mut head_full = sigma_head.to_vec();
    head_full.push(0.0);
    let head_subset: Vec<usize> = (0..n - 1).collect();
    let lambda_head = matrix.lambda_j(&head_full, &head_subset);
    let s: f64 = (0..n - 1)
        .map(|j| matrix.entry(n - 1, j) * sigma_head[j])
        .sum();
    let a_nn = matrix.entry(n - 1, n - 1);
    let linear = 4.0 - 2.0 * s;

    let mut roots = Vec::new();
    if a_nn.abs() < 1e-14 {
        if linear.abs() > 1e-14 {
            roots.push(-lambda_head / linear);
        }
    } else {
        // a_nn x² − (4 − 2s) x − Λ_head = 0
        let disc = linear * linear + 4.0 * a_nn * lambda_head;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            roots.push((linear + sq) / (2.0 * a_nn));
            roots.push((linear - sq) / (2.0 * a_nn));
        }
    }
    let mut admissible: Vec<Vec<f64>> = Vec::new();
    for x in roots {
        if !(x > 0.0) {
            continue;
        }
        let mut sigma = sigma_head.to_vec();
        sigma.push(x);
        let res = matrix.pi_residual(&sigma).map_err(|_| ShootError::NoAdmissibleRoot)?;
        if res.lambda_i.abs() < 1e-9 * (1.0 + lambda_head.abs()) && res.min_proper_lambda > 0.0 {
            admissible.push(sigma);
        }
    }
    match admissible.len() {
        0 => Err(ShootError::NoAdmissibleRoot),
        1 => Ok(admissible.pop().unwrap()),
        _ => {
            let good: Vec<Vec<f64>> = admissible
                .into_iter()
                .filter(|sigma| matrix.apply(sigma).iter().all(|&m| m > 2.0))
                .collect();
            if good.len() == 1 {
                Ok(good.into_iter().next().unwrap())
            } else {
                Err(ShootError::AmbiguousRoot)
            }
        }
    }
}

fn weighted_sigma(profile: &RadialProfile) -> Result<Vec<f64>, ShootError> {
    let mv = masses::compute_masses(profile)?;
    Ok(mv.weighted_sigma(profile.weights()))
}

/// Damped Newton inversion of the mass map with the variational Jacobian.
pub fn invert_sigma(
    target: &InversionTarget,
    beta0: &[f64],
    solve_opts: &SolveOptions,
    newton: &NewtonOptions,
) -> Result<InversionResult, ShootError> {
    let n = target.matrix.n();
    if n < 2 {
        return Err(ShootError::TrivialDimension);
    }
    assert_eq!(beta0.len(), n - 1);
    // validate the target lies on Π before iterating
    complete_sigma(&target.matrix, &target.sigma_head)?;

    let full_beta = |head: &[f64]| {
        let mut b = head.to_vec();
        b.push(0.0);
        b
    };
    let residual = |sigma: &[f64]| -> Vec<f64> {
        (0..n - 1)
            .map(|i| sigma[i] - target.sigma_head[i])
            .collect()
    };
    let norm2 = |f: &[f64]| f.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_inf = |f: &[f64]| f.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut beta = beta0.to_vec();
    let mut profile = radial::solve_radial(&target.matrix, &target.h, &full_beta(&beta), solve_opts)?;
    let mut sigma = weighted_sigma(&profile)?;
    let mut f = residual(&sigma);
    let mut best_residual = norm_inf(&f);

    for iteration in 0..newton.max_iterations {
        if norm_inf(&f) <= newton.residual_tol {
            return Ok(InversionResult {
                beta,
                iterations: iteration,
                residual_norm: norm_inf(&f),
                sigma,
                profile,
            });
        }
        let basis = variational::jacobian_sigma(&profile)?;
        let det = basis.det_m_reduced();
        if det.abs() < 1e-10 {
            return Err(ShootError::SingularJacobian {
                iteration,
                det: det.abs(),
            });
        }
        let neg_f: Vec<f64> = f.iter().map(|x| -x).collect();
        let step = basis
            .solve_reduced(&neg_f)
            .ok_or(ShootError::SingularJacobian {
                iteration,
                det: det.abs(),
            })?;

        // Armijo backtracking on ‖F‖
        let f_norm = norm2(&f);
        let mut lambda = 1.0f64;
        let mut accepted = false;
        for _ in 0..=newton.max_halvings {
            let trial: Vec<f64> = beta
                .iter()
                .zip(&step)
                .map(|(b, s)| b + lambda * s)
                .collect();
            let trial_profile =
                match radial::solve_radial(&target.matrix, &target.h, &full_beta(&trial), solve_opts)
                {
                    Ok(p) => p,
                    Err(_) => {
                        lambda *= 0.5;
                        continue;
                    }
                };
            let trial_sigma = match weighted_sigma(&trial_profile) {
                Ok(s) => s,
                Err(_) => {
                    lambda *= 0.5;
                    continue;
                }
            };
            let trial_f = residual(&trial_sigma);
            if norm2(&trial_f) <= (1.0 - newton.armijo_slope * lambda) * f_norm {
                beta = trial;
                profile = trial_profile;
                sigma = trial_sigma;
                f = trial_f;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(ShootError::LineSearchFailed {
                iteration,
                residual: f_norm,
            });
        }
        best_residual = best_residual.min(norm_inf(&f));
    }
    if norm_inf(&f) <= newton.residual_tol {
        return Ok(InversionResult {
            beta,
            iterations: newton.max_iterations,
            residual_norm: norm_inf(&f),
            sigma,
            profile,
        });
    }
    Err(ShootError::MaxIterations {
        max_iterations: newton.max_iterations,
        best_residual,
    })
}

/// Per-point record of an injectivity sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub beta: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
    pub lambda_i: Option<f64>,
    pub det_m: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

/// Report of a β-grid sweep testing injectivity of the normalized mass map.
#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    /// Minimum over converged pairs of ‖σ_a − σ_b‖_∞ / ‖β_a − β_b‖_∞.
    pub min_image_ratio: Option<f64>,
    /// Pairs with image distance < 1e-7 while β distance > 1e-3.
    pub violations: Vec<(usize, usize)>,
    /// n = 1: the whole grid is the scaling direction, images coincide.
    pub scaling_degenerate: bool,
}

/// Solves every grid point in parallel and compares the σ-images pairwise.
///
/// Grid points hold β_1..β_{n−1} (β_n = 0); for n = 1 they hold the single
/// initial value u_1(0), which only moves along the scaling family.
pub fn injectivity_sweep(
    matrix: &CoefficientMatrix,
    h: &[f64],
    grid: &[Vec<f64>],
    opts: &SolveOptions,
) -> Result<SweepReport, ShootError> {
    let n = matrix.n();
    let expected = if n == 1 { 1 } else { n - 1 };
    for (index, point) in grid.iter().enumerate() {
        if point.len() != expected {
            return Err(ShootError::GridDimension {
                index,
                expected,
                got: point.len(),
            });
        }
    }
    for i in 0..grid.len() {
        for j in (i + 1)..grid.len() {
            let dist = grid[i]
                .iter()
                .zip(&grid[j])
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if dist < 1e-12 {
                return Err(ShootError::DuplicateGridPoint { first: i, second: j });
            }
        }
    }

    let points: Vec<SweepPoint> = grid
        .par_iter()
        .map(|head| {
            let beta = if n == 1 {
                head.clone()
            } else {
                let mut b = head.clone();
                b.push(0.0);
                b
            };
            match radial::solve_radial(matrix, h, &beta, opts) {
                Ok(profile) => {
                    let det = variational::jacobian_sigma(&profile)
                        .map(|b| b.det_m_reduced())
                        .ok();
                    match masses::compute_masses(&profile) {
                        Ok(mv) => {
                            let ws = mv.weighted_sigma(h);
                            let lambda_i = matrix.lambda_full(&ws);
                            SweepPoint {
                                beta: head.clone(),
                                sigma: Some(ws),
                                lambda_i: Some(lambda_i),
                                det_m: det,
                                converged: true,
                                error: None,
                            }
                        }
                        Err(e) => SweepPoint {
                            beta: head.clone(),
                            sigma: None,
                            lambda_i: None,
                            det_m: det,
                            converged: false,
                            error: Some(e.to_string()),
                        },
                    }
                }
                Err(e) => SweepPoint {
                    beta: head.clone(),
                    sigma: None,
                    lambda_i: None,
                    det_m: None,
                    converged: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut min_ratio: Option<f64> = None;
    let mut violations = Vec::new();
    if n > 1 {
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                let (Some(si), Some(sj)) = (&points[i].sigma, &points[j].sigma) else {
                    continue;
                };
                let d_sigma = si
                    .iter()
                    .zip(sj)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                let d_beta = grid[i]
                    .iter()
                    .zip(&grid[j])
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                let ratio = d_sigma / d_beta;
                min_ratio = Some(min_ratio.map_or(ratio, |m: f64| m.min(ratio)));
                if d_sigma < 1e-7 && d_beta > 1e-3 {
                    violations.push((i, j));
                }
            }
        }
    }
    Ok(SweepReport {
        points,
        min_image_ratio: min_ratio,
        violations,
        scaling_degenerate: n == 1,
    })
}

/// Solves the diagonally perturbed system A + εI along a decreasing ε path.
pub fn continuation_solve(
    matrix: &CoefficientMatrix,
    h: &[f64],
    beta: &[f64],
    eps_path: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<SolveReport>, ShootError> {
    if eps_path.is_empty()
        || eps_path.iter().any(|&e| e < 0.0)
        || eps_path.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(ShootError::BadEpsPath);
    }
    let n = matrix.n();
    let base_entries = matrix.rows();
    let mut reports = Vec::with_capacity(eps_path.len());
    for &eps in eps_path {
        let mut entries = base_entries.clone();
        for (i, row) in entries.iter_mut().enumerate().take(n) {
            row[i] += eps;
        }
        let perturbed = CoefficientMatrix::new(&entries)
            .map_err(|source| ShootError::InadmissiblePerturbedMatrix { eps, source })?;
        match radial::solve_radial(&perturbed, h, beta, opts) {
            Ok(profile) => {
                let report = SolveReport::from_profile(&profile, Some(eps))?;
                reports.push(report);
            }
            Err(e) => return Err(ShootError::SolveFailed(e)),
        }
    }
    Ok(reports)
}
