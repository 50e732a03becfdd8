//! Strict JSON run configuration: unknown keys are rejected, every default
//! is filled in at load time so reports can embed the fully resolved config.

use liouville::coeff::CoefficientMatrix;
use liouville::radial::SolveOptions;
use liouville::shooting::NewtonOptions;
use serde::{Deserialize, Serialize};

/// One axis of a β grid for `sweep`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

/// Solver tolerances; every field optional, defaults from `SolveOptions`.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolveBlock {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub t_start: Option<f64>,
    pub t_max: Option<f64>,
    pub slope_margin: Option<f64>,
    pub tail_tol: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InvertBlock {
    /// Target h-weighted masses σ_1..σ_{n−1}; σ_n is completed via Λ_I = 0.
    pub sigma_head: Vec<f64>,
    /// Initial guess for β_1..β_{n−1} (default zeros).
    pub guess: Option<Vec<f64>>,
    pub max_iterations: Option<usize>,
    pub residual_tol: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuationBlock {
    /// Strictly decreasing non-negative diagonal perturbations ε.
    pub eps_path: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PohozaevBlock {
    /// Radii at which the identity residuals are traced.
    pub radii: Vec<f64>,
}

/// On-disk configuration. See `liouville --help` for field documentation.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Coefficient matrix A (square, symmetric, non-negative, invertible,
    /// irreducible).
    pub matrix: Vec<Vec<f64>>,
    /// Positive weights h_i (default: all 1).
    pub h: Option<Vec<f64>>,
    /// Initial values u_i(0), full n-vector (the u_n(0) = 0 normalization is
    /// a convention, not enforced).
    pub beta: Option<Vec<f64>>,
    /// Per-axis grid over β_1..β_{n−1} for `sweep` (a single axis over
    /// u_1(0) when n = 1).
    pub beta_grid: Option<Vec<AxisSpec>>,
    pub solve: Option<SolveBlock>,
    pub invert: Option<InvertBlock>,
    pub continuation: Option<ContinuationBlock>,
    pub pohozaev: Option<PohozaevBlock>,
}

/// Fully-defaulted configuration embedded verbatim in every report.
#[derive(Clone, Debug, Serialize)]
pub struct ResolvedConfig {
    pub matrix: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub beta: Option<Vec<f64>>,
    pub beta_grid: Option<Vec<AxisSpec>>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_start: f64,
    pub t_max: f64,
    pub slope_margin: f64,
    pub tail_tol: f64,
    pub invert: Option<InvertBlock>,
    pub continuation: Option<ContinuationBlock>,
    pub pohozaev: Option<PohozaevBlock>,
}

/// A loaded, validated run: parsed matrix plus the resolved scalar options.
pub struct Run {
    pub matrix: CoefficientMatrix,
    pub resolved: ResolvedConfig,
}

#[derive(Debug)]
pub struct ConfigError {
    pub kind: String,
    pub message: String,
}

impl ConfigError {
    fn new(kind: &str, message: impl Into<String>) -> Self {
        Self {
            kind: kind.to_string(),
            message: message.into(),
        }
    }
}

fn matrix_error_kind(e: &liouville::coeff::MatrixError) -> &'static str {
    use liouville::coeff::MatrixError::*;
    match e {
        NotSquare { .. } => "NotSquare",
        Empty => "Empty",
        NotSymmetric { .. } => "NotSymmetric",
        NegativeEntry { .. } => "NegativeEntry",
        Singular { .. } => "Singular",
        Reducible => "Reducible",
        DimensionTooLarge { .. } => "DimensionTooLarge",
    }
}

/// Parses and validates a config file; `tol_override` comes from `--tol`.
pub fn load(path: &std::path::Path, tol_override: Option<f64>) -> Result<Run, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("Io", format!("cannot read {}: {e}", path.display())))?;
    let raw: RunConfig = serde_json::from_str(&text)
        .map_err(|e| ConfigError::new("Schema", e.to_string()))?;

    let matrix = CoefficientMatrix::new(&raw.matrix)
        .map_err(|e| ConfigError::new(matrix_error_kind(&e), e.to_string()))?;
    let n = matrix.n();

    let h = raw.h.clone().unwrap_or_else(|| vec![1.0; n]);
    if h.len() != n {
        return Err(ConfigError::new(
            "Dimension",
            format!("h has {} entries, matrix is {n}x{n}", h.len()),
        ));
    }
    if h.iter().any(|&x| !(x > 0.0)) {
        return Err(ConfigError::new("NonPositiveWeight", "weights h must be positive"));
    }
    if let Some(beta) = &raw.beta {
        if beta.len() != n {
            return Err(ConfigError::new(
                "Dimension",
                format!("beta has {} entries, expected {n}", beta.len()),
            ));
        }
    }
    if let Some(grid) = &raw.beta_grid {
        let expected = if n == 1 { 1 } else { n - 1 };
        if grid.len() != expected {
            return Err(ConfigError::new(
                "Dimension",
                format!("beta_grid has {} axes, expected {expected}", grid.len()),
            ));
        }
        if grid.iter().any(|a| a.count == 0) {
            return Err(ConfigError::new("Grid", "axis count must be at least 1"));
        }
        let total: usize = grid.iter().map(|a| a.count).product();
        if total > 100_000 {
            return Err(ConfigError::new(
                "Grid",
                format!("grid has {total} points, limit is 100000"),
            ));
        }
    }
    if let Some(inv) = &raw.invert {
        if inv.sigma_head.len() != n.saturating_sub(1) {
            return Err(ConfigError::new(
                "Dimension",
                format!(
                    "invert.sigma_head has {} entries, expected {}",
                    inv.sigma_head.len(),
                    n.saturating_sub(1)
                ),
            ));
        }
        if let Some(g) = &inv.guess {
            if g.len() != n.saturating_sub(1) {
                return Err(ConfigError::new(
                    "Dimension",
                    format!("invert.guess has {} entries, expected {}", g.len(), n - 1),
                ));
            }
        }
    }
    if let Some(p) = &raw.pohozaev {
        if p.radii.iter().any(|&r| !(r > 0.0)) {
            return Err(ConfigError::new("Radii", "pohozaev radii must be positive"));
        }
    }

    let d = SolveOptions::default();
    let s = raw.solve.clone().unwrap_or_default();
    let resolved = ResolvedConfig {
        matrix: raw.matrix.clone(),
        h,
        beta: raw.beta.clone(),
        beta_grid: raw.beta_grid.clone(),
        rel_tol: tol_override.or(s.rel_tol).unwrap_or(d.rel_tol),
        abs_tol: s.abs_tol.unwrap_or(d.abs_tol),
        t_start: s.t_start.unwrap_or(d.t_start),
        t_max: s.t_max.unwrap_or(d.t_max),
        slope_margin: s.slope_margin.unwrap_or(d.slope_margin),
        tail_tol: s.tail_tol.unwrap_or(d.tail_tol),
        invert: raw.invert.clone(),
        continuation: raw.continuation.clone(),
        pohozaev: raw.pohozaev.clone(),
    };
    Ok(Run { matrix, resolved })
}

impl ResolvedConfig {
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            t_start: self.t_start,
            t_max: self.t_max,
            slope_margin: self.slope_margin,
            tail_tol: self.tail_tol,
        }
    }

    pub fn newton_options(&self) -> NewtonOptions {
        let mut o = NewtonOptions::default();
        if let Some(inv) = &self.invert {
            if let Some(m) = inv.max_iterations {
                o.max_iterations = m;
            }
            if let Some(t) = inv.residual_tol {
                o.residual_tol = t;
            }
        }
        o
    }

    /// Cartesian product of the grid axes, row-major in axis order.
    pub fn grid_points(&self) -> Option<Vec<Vec<f64>>> {
        let axes = self.beta_grid.as_ref()?;
        let axis_values: Vec<Vec<f64>> = axes
            .iter()
            .map(|a| {
                (0..a.count)
                    .map(|k| {
                        if a.count == 1 {
                            a.start
                        } else {
                            a.start + (a.stop - a.start) * k as f64 / (a.count - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let mut points = vec![Vec::new()];
        for axis in &axis_values {
            let mut next = Vec::with_capacity(points.len() * axis.len());
            for p in &points {
                for &v in axis {
                    let mut q = p.clone();
                    q.push(v);
                    next.push(q);
                }
            }
            points = next;
        }
        Some(points)
    }
}
