//! Linearized (variational) solves along a base profile and the shooting
//! Jacobian ∂σ_i/∂β_m.
//!
//! The linearized system in log-radius, with state (φ_i, g_i = r φ_i'), is
//!
//!   dφ_i/dt = g_i,   dg_i/dt = −Σ_j a_ij h_j e^{v_j(t)} φ_j,
//!
//! where v_j comes from the base profile's dense output. The bounded kernel
//! solution has initial data (2,…,2) and equals (r u_i' + 2).

use crate::integrate::{self, IntegrateError, Monitor, OdeRhs};
use crate::masses::{self, TailFit};
use crate::radial::RadialProfile;
use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VariationalError {
    #[error("base profile did not converge")]
    NotConverged,
    #[error("initial data must have {n} entries, got {got}")]
    DimensionMismatch { n: usize, got: usize },
    #[error("linearized integration failed: step underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("mass computation failed: {0}")]
    Mass(#[from] masses::MassError),
}

/// A solution of the linearized system along one base profile.
#[derive(Clone, Debug)]
pub struct LinearizedProfile {
    init: Vec<f64>,
    grid: Vec<f64>,
    phi: Vec<Vec<f64>>,
    /// g_i = r φ_i' on the grid.
    g: Vec<Vec<f64>>,
    dense: integrate::DenseOutput,
    t_start: f64,
    t_end: f64,
}

impl LinearizedProfile {
    pub fn init(&self) -> &[f64] {
        &self.init
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn phi(&self) -> &[Vec<f64>] {
        &self.phi
    }

    pub fn g(&self) -> &[Vec<f64>] {
        &self.g
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Dense (φ, r φ') at log-radius t, extended by the Taylor seed below
    /// the start point.
    pub fn state_at(&self, t: f64, base: &RadialProfile) -> (Vec<f64>, Vec<f64>) {
        let n = self.init.len();
        if t < self.t_start {
            let mat = base.matrix();
            let h = base.weights();
            let beta = base.beta();
            let r_sq = (2.0 * t).exp();
            let q: Vec<f64> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| mat.entry(i, j) * h[j] * beta[j].exp() * self.init[j])
                        .sum()
                })
                .collect();
            let phi = (0..n).map(|i| self.init[i] - q[i] * r_sq / 4.0).collect();
            let g = (0..n).map(|i| -q[i] * r_sq / 2.0).collect();
            return (phi, g);
        }
        let mut y = vec![0.0; 2 * n];
        self.dense.eval(t, &mut y);
        let g = y.split_off(n);
        (y, g)
    }
}

struct LinearizedRhs<'a> {
    base: &'a RadialProfile,
}

impl OdeRhs for LinearizedRhs<'_> {
    fn dim(&self) -> usize {
        2 * self.base.n()
    }

    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        let n = self.base.n();
        let mat = self.base.matrix();
        let h = self.base.weights();
        let (v, _) = self.base.state_at(t);
        let (phi, g) = y.split_at(n);
        for i in 0..n {
            dydt[i] = g[i];
            let mut acc = 0.0;
            for j in 0..n {
                acc += mat.entry(i, j) * h[j] * v[j].exp() * phi[j];
            }
            dydt[n + i] = -acc;
        }
    }
}

/// Integrates the linearized system with φ_i(0) = init_i, φ_i'(0) = 0.
pub fn solve_linearized(
    base: &RadialProfile,
    init: &[f64],
) -> Result<LinearizedProfile, VariationalError> {
    if !base.converged() {
        return Err(VariationalError::NotConverged);
    }
    let n = base.n();
    if init.len() != n {
        return Err(VariationalError::DimensionMismatch { n, got: init.len() });
    }
    let t0 = base.t_start();
    let r0_sq = (2.0 * t0).exp();
    let mat = base.matrix();
    let h = base.weights();
    let beta = base.beta();
    // Taylor seed: φ_i ≈ init_i − q_i r²/4 with q_i = Σ_j a_ij h_j e^{β_j} init_j
    let mut y0 = vec![0.0; 2 * n];
    for i in 0..n {
        let q: f64 = (0..n)
            .map(|j| mat.entry(i, j) * h[j] * beta[j].exp() * init[j])
            .sum();
        y0[i] = init[i] - q * r0_sq / 4.0;
        y0[n + i] = -q * r0_sq / 2.0;
    }
    // linearized solves reuse the base solve's tolerance budget
    let rhs = LinearizedRhs { base };
    let opts = base.options();
    let run = integrate::integrate(&rhs, t0, &y0, base.t_end(), opts.rel_tol, opts.abs_tol, |_, _| {
        Monitor::Continue
    })
    .map_err(|IntegrateError::StepUnderflow { t }| VariationalError::StepUnderflow { t })?;

    let grid: Vec<f64> = run.points.iter().map(|p| p.t).collect();
    let phi: Vec<Vec<f64>> = run.points.iter().map(|p| p.y[..n].to_vec()).collect();
    let g: Vec<Vec<f64>> = run.points.iter().map(|p| p.y[n..].to_vec()).collect();
    let t_end = *grid.last().unwrap();
    Ok(LinearizedProfile {
        init: init.to_vec(),
        grid,
        phi,
        g,
        dense: run.dense,
        t_start: t0,
        t_end,
    })
}

/// Result of checking the kernel characterization on one profile.
#[derive(Clone, Debug, Serialize)]
pub struct KernelCheck {
    /// max over grid and components of |φ_i − (r u_i' + 2)| for init (2,…,2).
    pub max_deviation: f64,
    /// ∫_0^∞ e^{u_i} φ_i s ds per component (should vanish).
    pub orthogonality: Vec<f64>,
}

/// Solves with initial data (2,…,2) and compares against (r u_i' + 2).
pub fn kernel_check(base: &RadialProfile) -> Result<KernelCheck, VariationalError> {
    let n = base.n();
    let lp = solve_linearized(base, &vec![2.0; n])?;
    let mut max_dev = 0.0f64;
    for (k, &t) in lp.grid.iter().enumerate() {
        let (_, w) = base.state_at(t);
        for i in 0..n {
            // kernel solution is v_i' = r u_i' + 2
            max_dev = max_dev.max((lp.phi[k][i] - w[i]).abs());
        }
    }
    let orthogonality = linearized_mass_integrals(base, &lp);
    Ok(KernelCheck {
        max_deviation: max_dev,
        orthogonality,
    })
}

/// ∫_0^∞ e^{u_i} φ_i s ds = head + ∫ e^{v_i(t)} φ_i(t) dt per component.
fn linearized_mass_integrals(base: &RadialProfile, lp: &LinearizedProfile) -> Vec<f64> {
    let n = base.n();
    let t0 = base.t_start();
    let body = masses::integrate_dense(base, t0, base.t_end(), n, |t, v, _w, out| {
        let (phi, _) = lp.state_at(t, base);
        for i in 0..n {
            out[i] = v[i].exp() * phi[i];
        }
    });
    let r0_sq = (2.0 * t0).exp();
    (0..n)
        .map(|i| body[i] + base.beta()[i].exp() * lp.init[i] * r0_sq / 2.0)
        .collect()
}

/// The n unit-initial-data linearized solutions and the shooting Jacobian.
#[derive(Debug)]
pub struct VariationalBasis {
    psi: Vec<LinearizedProfile>,
    /// dsigma[i][m] = ∂(h_i σ_i)/∂β_m, finite part of the quadrature.
    dsigma: Vec<Vec<f64>>,
    /// Top-left (n−1)×(n−1) block of dsigma.
    m_reduced: Vec<Vec<f64>>,
    det_m_reduced: f64,
    /// Upper bound on the neglected tail of each row's integrals.
    tail_bound: Vec<f64>,
    /// max over the grid of |ψ^m_i(t)| / max(1, t), per basis solution m.
    log_growth: Vec<f64>,
}

impl VariationalBasis {
    pub fn psi(&self) -> &[LinearizedProfile] {
        &self.psi
    }

    pub fn dsigma(&self) -> &[Vec<f64>] {
        &self.dsigma
    }

    pub fn m_reduced(&self) -> &[Vec<f64>] {
        &self.m_reduced
    }

    pub fn det_m_reduced(&self) -> f64 {
        self.det_m_reduced
    }

    pub fn tail_bound(&self) -> &[f64] {
        &self.tail_bound
    }

    pub fn log_growth(&self) -> &[f64] {
        &self.log_growth
    }

    /// Solves M_reduced x = rhs. Returns None when the factorization fails.
    pub fn solve_reduced(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let k = self.m_reduced.len();
        assert_eq!(rhs.len(), k);
        let m = DMatrix::from_fn(k, k, |i, j| self.m_reduced[i][j]);
        let b = nalgebra::DVector::from_column_slice(rhs);
        m.lu().solve(&b).map(|x| x.as_slice().to_vec())
    }
}

/// Integrates all n basis solutions ψ^m and assembles the Jacobian.
pub fn jacobian_sigma(base: &RadialProfile) -> Result<VariationalBasis, VariationalError> {
    let n = base.n();
    let mut psi = Vec::with_capacity(n);
    for m in 0..n {
        let mut init = vec![0.0; n];
        init[m] = 1.0;
        psi.push(solve_linearized(base, &init)?);
    }
    let h = base.weights();
    let mut dsigma = vec![vec![0.0; n]; n];
    for (m, lp) in psi.iter().enumerate() {
        let col = linearized_mass_integrals(base, lp);
        for i in 0..n {
            dsigma[i][m] = h[i] * col[i];
        }
    }
    // tail of ∫ e^{u_i} ψ_i s ds, bounded via the fitted far field and the
    // logarithmic growth of ψ: e^{ĉ} R^{2−m̂} (ln R + 1/(m̂−2)) / (m̂−2)
    let fit: TailFit = masses::tail_fit(base)?;
    let t_end = base.t_end();
    let tail_bound: Vec<f64> = (0..n)
        .map(|i| {
            let decay = (fit.c_hat[i] + (2.0 - fit.m_hat[i]) * t_end).exp();
            h[i] * decay * (t_end + 1.0 / (fit.m_hat[i] - 2.0)) / (fit.m_hat[i] - 2.0)
        })
        .collect();
    let log_growth: Vec<f64> = psi
        .iter()
        .map(|lp| {
            lp.grid
                .iter()
                .zip(&lp.phi)
                .flat_map(|(&t, row)| row.iter().map(move |p| p.abs() / t.max(1.0)))
                .fold(0.0f64, f64::max)
        })
        .collect();
    let k = n.saturating_sub(1);
    let m_reduced: Vec<Vec<f64>> = (0..k).map(|i| dsigma[i][..k].to_vec()).collect();
    let det_m_reduced = if k == 0 {
        1.0
    } else {
        DMatrix::from_fn(k, k, |i, j| m_reduced[i][j])
            .lu()
            .determinant()
    };
    Ok(VariationalBasis {
        psi,
        dsigma,
        m_reduced,
        det_m_reduced,
        tail_bound,
        log_growth,
    })
}
