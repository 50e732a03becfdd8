//! Adaptive solver for the singular radial initial value problem
//!
//!   u_i'' + u_i'/r + Σ_j a_ij h_j e^{u_j} = 0,   u_i(0) = β_i,  u_i'(0) = 0.
//!
//! Integration runs in log-radius t = ln r with the regular autonomous state
//! v_i(t) = u_i(e^t) + 2t, v_i'' = −Σ_j a_ij h_j e^{v_j}, seeded near the
//! origin from the Taylor expansion of u.

use crate::coeff::CoefficientMatrix;
use crate::integrate::{self, IntegrateError, Monitor, OdeRhs, Outcome};
use std::io::Write;
use thiserror::Error;

/// Ceiling on v_i beyond which the solve is declared blown up.
const V_CEILING: f64 = 100.0;

/// Tolerances and stopping parameters of the radial solver.
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Per-step relative tolerance.
    pub rel_tol: f64,
    /// Per-step absolute tolerance.
    pub abs_tol: f64,
    /// Log-radius at which the Taylor seed is applied (may be lowered further
    /// so the dropped O(r^4) term stays below `abs_tol`).
    pub t_start: f64,
    /// Hard cap on log-radius.
    pub t_max: f64,
    /// Slope margin δ: stopping requires r u_i'(R) ≤ −(2 + δ) for all i.
    pub slope_margin: f64,
    /// Maximum estimated tail mass allowed at the stopping radius.
    pub tail_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            t_start: -12.0,
            t_max: 60.0,
            slope_margin: 0.05,
            tail_tol: 1e-9,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<(), SolveError> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.slope_margin > 0.0
            && self.tail_tol > 0.0
            && self.t_start < 0.0
            && self.t_max > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SolveError::BadOptions)
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("tolerances must be positive and t_start < 0 < t_max")]
    BadOptions,
    #[error("weights h must all be positive")]
    NonPositiveWeight,
    #[error("dimension mismatch: matrix is {n}x{n} but h has {h_len} and beta {beta_len} entries")]
    DimensionMismatch { n: usize, h_len: usize, beta_len: usize },
    #[error("solution blew up before a finite radius (v exceeded {V_CEILING} at t = {t})")]
    BlowupInFiniteRadius { t: f64 },
    #[error(
        "no decay before t_max = {t_max}: slowest slope r u'(R) = {worst_slope} \
         (outside-or-undecided for zero-diagonal rows)"
    )]
    NoDecayBeforeTmax { t_max: f64, worst_slope: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
}

/// A solved radial profile on a log-radius grid, with dense output.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    matrix: CoefficientMatrix,
    h: Vec<f64>,
    beta: Vec<f64>,
    grid: Vec<f64>,
    v: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    dense: integrate::DenseOutput,
    t_start: f64,
    t_end: f64,
    converged: bool,
    opts: SolveOptions,
}

struct LiouvilleRhs<'a> {
    matrix: &'a CoefficientMatrix,
    h: &'a [f64],
}

impl OdeRhs for LiouvilleRhs<'_> {
    fn dim(&self) -> usize {
        2 * self.matrix.n()
    }

    fn eval(&self, _t: f64, y: &[f64], dydt: &mut [f64]) {
        let n = self.matrix.n();
        let (v, w) = y.split_at(n);
        for i in 0..n {
            dydt[i] = w[i];
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.matrix.entry(i, j) * self.h[j] * v[j].min(V_CEILING + 1.0).exp();
            }
            dydt[n + i] = -acc;
        }
    }
}

/// Solves the radial IVP. `beta` holds all n initial values u_i(0); the
/// normalization u_n(0) = 0 is a caller convention, not enforced here.
pub fn solve_radial(
    matrix: &CoefficientMatrix,
    h: &[f64],
    beta: &[f64],
    opts: &SolveOptions,
) -> Result<RadialProfile, SolveError> {
    opts.validate()?;
    let n = matrix.n();
    if h.len() != n || beta.len() != n {
        return Err(SolveError::DimensionMismatch {
            n,
            h_len: h.len(),
            beta_len: beta.len(),
        });
    }
    if h.iter().any(|&x| x <= 0.0) {
        return Err(SolveError::NonPositiveWeight);
    }

    // Taylor seed: u_i = β_i − q_i r²/4 + c_i r⁴ + O(r⁶) with
    // q_i = Σ_j a_ij h_j e^{β_j}, c_i = Σ_j a_ij h_j e^{β_j} q_j / 64.
    let q: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| matrix.entry(i, j) * h[j] * beta[j].exp())
                .sum()
        })
        .collect();
    let c4: f64 = (0..n)
        .map(|i| {
            let ci: f64 = (0..n)
                .map(|j| matrix.entry(i, j) * h[j] * beta[j].exp() * q[j])
                .sum::<f64>()
                / 64.0;
            ci.abs()
        })
        .fold(0.0, f64::max);
    // choose t0 so the dropped quartic term is below abs_tol
    let t0 = opts
        .t_start
        .min(0.25 * (opts.abs_tol / (1.0 + c4)).ln());

    let r0_sq = (2.0 * t0).exp();
    let mut y0 = vec![0.0; 2 * n];
    for i in 0..n {
        y0[i] = beta[i] + 2.0 * t0 - q[i] * r0_sq / 4.0;
        y0[n + i] = 2.0 - q[i] * r0_sq / 2.0;
    }

    let rhs = LiouvilleRhs { matrix, h };
    let slope_margin = opts.slope_margin;
    let tail_tol = opts.tail_tol;
    let monitor = |_t: f64, y: &[f64]| {
        let (v, w) = y.split_at(n);
        if v.iter().any(|&vi| vi > V_CEILING) {
            return Monitor::Abort;
        }
        let decayed = (0..n).all(|i| {
            w[i] <= -slope_margin && v[i].exp() / (-w[i]) <= tail_tol
        });
        if decayed {
            Monitor::Stop
        } else {
            Monitor::Continue
        }
    };

    let run = integrate::integrate(&rhs, t0, &y0, opts.t_max, opts.rel_tol, opts.abs_tol, monitor)
        .map_err(|IntegrateError::StepUnderflow { t }| SolveError::StepUnderflow { t })?;

    match run.outcome {
        Outcome::Aborted => {
            // v is concave in t (v'' ≤ 0 for non-negative A), so a ceiling hit
            // at t > 0 means sustained growth, i.e. β outside-or-undecided for
            // Π_1, not a finite-radius blowup.
            let last = run.points.last().unwrap();
            if last.t <= 0.0 {
                return Err(SolveError::BlowupInFiniteRadius { t: last.t });
            }
            let worst = last.y[n..2 * n]
                .iter()
                .fold(f64::NEG_INFINITY, |m, &w| m.max(w));
            return Err(SolveError::NoDecayBeforeTmax {
                t_max: last.t,
                worst_slope: worst - 2.0,
            });
        }
        Outcome::ReachedTMax => {
            let last = run.points.last().unwrap();
            let worst = last.y[n..2 * n]
                .iter()
                .fold(f64::NEG_INFINITY, |m, &w| m.max(w));
            return Err(SolveError::NoDecayBeforeTmax {
                t_max: opts.t_max,
                worst_slope: worst - 2.0,
            });
        }
        Outcome::Stopped => {}
    }

    let grid: Vec<f64> = run.points.iter().map(|p| p.t).collect();
    let v: Vec<Vec<f64>> = run.points.iter().map(|p| p.y[..n].to_vec()).collect();
    let w: Vec<Vec<f64>> = run.points.iter().map(|p| p.y[n..].to_vec()).collect();
    let t_end = *grid.last().unwrap();

    Ok(RadialProfile {
        matrix: matrix.clone(),
        h: h.to_vec(),
        beta: beta.to_vec(),
        grid,
        v,
        w,
        dense: run.dense,
        t_start: t0,
        t_end,
        converged: true,
        opts: *opts,
    })
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("radius {r} outside (0, {r_cut}]")]
    OutOfRange { r: f64, r_cut: f64 },
}

impl RadialProfile {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn matrix(&self) -> &CoefficientMatrix {
        &self.matrix
    }

    pub fn weights(&self) -> &[f64] {
        &self.h
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn r_cut(&self) -> f64 {
        self.t_end.exp()
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Options the profile was solved with (linearized solves reuse them).
    pub fn options(&self) -> &SolveOptions {
        &self.opts
    }

    /// v_i(t_k) on the stored grid.
    pub fn v(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// v_i'(t_k) = r u_i'(r) + 2 on the stored grid.
    pub fn w(&self) -> &[Vec<f64>] {
        &self.w
    }

    /// Dense state (v, v') at log-radius `t`, Taylor-extended below t_start.
    pub fn state_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        if t < self.t_start {
            // below the seed point the profile is the Taylor expansion
            let q: Vec<f64> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| self.matrix.entry(i, j) * self.h[j] * self.beta[j].exp())
                        .sum()
                })
                .collect();
            let r_sq = (2.0 * t).exp();
            let v = (0..n)
                .map(|i| self.beta[i] + 2.0 * t - q[i] * r_sq / 4.0)
                .collect();
            let w = (0..n).map(|i| 2.0 - q[i] * r_sq / 2.0).collect();
            return (v, w);
        }
        let mut y = vec![0.0; 2 * n];
        self.dense.eval(t, &mut y);
        let w = y.split_off(n);
        (y, w)
    }

    /// Interpolated (u_i(r), r u_i'(r)) at radius r ∈ (0, R_cut].
    pub fn evaluate(&self, r: f64) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
        if !(r > 0.0) || r > self.r_cut() * (1.0 + 1e-12) {
            return Err(EvalError::OutOfRange {
                r,
                r_cut: self.r_cut(),
            });
        }
        let t = r.ln().min(self.t_end);
        let (v, w) = self.state_at(t);
        let u = v.iter().map(|vi| vi - 2.0 * t).collect();
        let rup = w.iter().map(|wi| wi - 2.0).collect();
        Ok((u, rup))
    }

    /// Writes the profile as CSV: `t,r,u_1..u_n,ru_1'..ru_n'`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let n = self.n();
        write!(out, "t,r")?;
        for i in 1..=n {
            write!(out, ",u_{i}")?;
        }
        for i in 1..=n {
            write!(out, ",ru_{i}'")?;
        }
        writeln!(out)?;
        for (k, &t) in self.grid.iter().enumerate() {
            write!(out, "{:.16e},{:.16e}", t, t.exp())?;
            for i in 0..n {
                write!(out, ",{:.16e}", self.v[k][i] - 2.0 * t)?;
            }
            for i in 0..n {
                write!(out, ",{:.16e}", self.w[k][i] - 2.0)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::CoefficientMatrix;

    fn bubble_profile() -> RadialProfile {
        let a = CoefficientMatrix::new(&[vec![1.0]]).unwrap();
        solve_radial(&a, &[1.0], &[0.0], &SolveOptions::default()).unwrap()
    }

    /// u(r) = −2 ln(1 + r²/8), the scalar Liouville bubble.
    fn bubble_u(r: f64) -> f64 {
        -2.0 * (1.0 + r * r / 8.0).ln()
    }

    fn bubble_rup(r: f64) -> f64 {
        let s = r * r / 8.0;
        -4.0 * s / (1.0 + s)
    }

    #[test]
    fn bubble_matches_closed_form_everywhere() {
        let p = bubble_profile();
        assert!(p.converged());
        assert!(p.r_cut() > 100.0);
        let mut worst = 0.0f64;
        for k in 1..=1000 {
            let r = 0.1 * k as f64;
            let (u, rup) = p.evaluate(r).unwrap();
            worst = worst.max((u[0] - bubble_u(r)).abs());
            worst = worst.max((rup[0] - bubble_rup(r)).abs());
        }
        assert!(worst < 1e-8, "max pointwise error {worst:e}");
    }

    #[test]
    fn evaluate_near_origin_recovers_initial_value() {
        let p = bubble_profile();
        let r = p.t_start().exp();
        let (u, _) = p.evaluate(r).unwrap();
        assert!(u[0].abs() < 1e-8);
    }

    #[test]
    fn evaluate_at_sqrt8() {
        let p = bubble_profile();
        let r = 8.0f64.sqrt();
        let (u, rup) = p.evaluate(r).unwrap();
        assert!((u[0] + 2.0 * 2.0f64.ln()).abs() < 1e-8);
        assert!((rup[0] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn evaluate_rejects_out_of_range() {
        let p = bubble_profile();
        assert!(p.evaluate(0.0).is_err());
        assert!(p.evaluate(p.r_cut() * 2.0).is_err());
    }

    #[test]
    fn symmetric_system_collapses_to_bubble() {
        let a = CoefficientMatrix::new(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let p = solve_radial(&a, &[1.0, 1.0], &[0.0, 0.0], &SolveOptions::default()).unwrap();
        for k in 1..=500 {
            let r = 0.2 * k as f64;
            if r > p.r_cut() {
                break;
            }
            let (u, _) = p.evaluate(r).unwrap();
            assert!((u[0] - u[1]).abs() < 1e-9);
            assert!((u[0] - bubble_u(r)).abs() < 1e-8, "r = {r}");
        }
    }

    #[test]
    fn scaling_family_shifts_initial_value() {
        // u_δ(r) = u(δ r) + 2 ln δ solves the same equation with β = 2 ln δ
        let a = CoefficientMatrix::new(&[vec![1.0]]).unwrap();
        let delta = 2.0f64;
        let beta = 2.0 * delta.ln();
        let p = solve_radial(&a, &[1.0], &[beta], &SolveOptions::default()).unwrap();
        for k in 1..=300 {
            let r = 0.1 * k as f64;
            let (u, _) = p.evaluate(r).unwrap();
            let expected = bubble_u(delta * r) + beta;
            assert!((u[0] - expected).abs() < 1e-8, "r = {r}");
        }
    }

    #[test]
    fn slopes_decrease_and_stay_below_two() {
        let a = CoefficientMatrix::new(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let p = solve_radial(&a, &[1.0, 1.0], &[0.5, 0.0], &SolveOptions::default()).unwrap();
        for k in 1..p.grid().len() {
            for i in 0..2 {
                assert!(p.w()[k][i] < 2.0);
                assert!(p.w()[k][i] <= p.w()[k - 1][i] + 1e-12);
            }
        }
        // stopping rule: r u_i' + 2 = v_i' ≤ −slope_margin at R_cut
        let last = p.w().last().unwrap();
        for i in 0..2 {
            assert!(last[i] <= -0.05);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = CoefficientMatrix::new(&[vec![1.0]]).unwrap();
        assert!(matches!(
            solve_radial(&a, &[0.0], &[0.0], &SolveOptions::default()),
            Err(SolveError::NonPositiveWeight)
        ));
        assert!(matches!(
            solve_radial(&a, &[1.0, 1.0], &[0.0], &SolveOptions::default()),
            Err(SolveError::DimensionMismatch { .. })
        ));
        let bad = SolveOptions {
            rel_tol: -1.0,
            ..SolveOptions::default()
        };
        assert!(matches!(
            solve_radial(&a, &[1.0], &[0.0], &bad),
            Err(SolveError::BadOptions)
        ));
    }
}
