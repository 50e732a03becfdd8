//! Mass quadrature, analytic tail completion and Π-membership residuals.
//!
//! σ_i = ∫_0^∞ e^{u_i(s)} s ds splits into a finite part (Simpson quadrature
//! of e^{v_i(t)} dt on a uniform resampling of the dense output), a small
//! head below the Taylor seed point, and an analytic tail using the fitted
//! far-field u_i ≈ −m̂_i ln r + ĉ_i.

use crate::coeff::{MatrixError, PiResidual};
use crate::radial::RadialProfile;
use serde::Serialize;
use thiserror::Error;

/// Uniform quadrature points per unit of log-radius.
const POINTS_PER_UNIT: f64 = 800.0;
/// Floor on the number of quadrature intervals.
const MIN_INTERVALS: usize = 4000;

#[derive(Debug, Error)]
pub enum MassError {
    #[error("profile did not converge")]
    NotConverged,
    #[error(
        "tail dominates for component {component}: tail {tail:e} vs finite {finite:e} \
         (premature cutoff)"
    )]
    TailDominates {
        component: usize,
        tail: f64,
        finite: f64,
    },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Fitted far-field decay u_i ≈ −m̂_i ln r + ĉ_i over the last decade.
#[derive(Clone, Debug, Serialize)]
pub struct TailFit {
    pub m_hat: Vec<f64>,
    pub c_hat: Vec<f64>,
    /// Radius window (r_lo, r_hi) used for the constant fit.
    pub window: (f64, f64),
    /// Max deviation of u_i + m̂_i ln r − ĉ_i over the window, per component.
    pub residual: Vec<f64>,
}

/// Mass vector σ with the exponents m = A (h ⊙ σ).
#[derive(Clone, Debug, Serialize)]
pub struct MassVector {
    pub sigma: Vec<f64>,
    pub m: Vec<f64>,
    pub finite_part: Vec<f64>,
    pub tail_part: Vec<f64>,
}

impl MassVector {
    /// h-weighted masses h_i σ_i, the ones entering the Λ polynomials.
    pub fn weighted_sigma(&self, h: &[f64]) -> Vec<f64> {
        self.sigma.iter().zip(h).map(|(s, hi)| s * hi).collect()
    }

    pub fn tail_fraction(&self) -> Vec<f64> {
        self.tail_part
            .iter()
            .zip(&self.finite_part)
            .map(|(t, f)| t / f)
            .collect()
    }
}

/// Composite Simpson over a uniform resampling of [t_lo, t_hi].
///
/// The integrand writes `dim` values at each sample via `g(t, v, w, out)`
/// with (v, w) the dense profile state at t.
pub(crate) fn integrate_dense<G>(
    profile: &RadialProfile,
    t_lo: f64,
    t_hi: f64,
    dim: usize,
    g: G,
) -> Vec<f64>
where
    G: Fn(f64, &[f64], &[f64], &mut [f64]),
{
    let span = t_hi - t_lo;
    if span <= 0.0 {
        return vec![0.0; dim];
    }
    let mut n = ((span * POINTS_PER_UNIT) as usize).max(MIN_INTERVALS);
    if n % 2 == 1 {
        n += 1;
    }
    let dt = span / n as f64;
    let mut acc = vec![0.0; dim];
    let mut val = vec![0.0; dim];
    for k in 0..=n {
        let t = t_lo + dt * k as f64;
        let (v, w) = profile.state_at(t);
        g(t, &v, &w, &mut val);
        let weight = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        for i in 0..dim {
            acc[i] += weight * val[i];
        }
    }
    for a in &mut acc {
        *a *= dt / 3.0;
    }
    acc
}

/// ∫_0^{e^{t_hi}} e^{u_i(s)} s ds for every component, head included.
pub fn partial_mass_at(profile: &RadialProfile, t_hi: f64) -> Vec<f64> {
    let n = profile.n();
    let t0 = profile.t_start();
    let mut head = head_mass(profile);
    if t_hi <= t0 {
        // entire integral sits inside the Taylor region
        let shrink = ((t_hi - t0) * 2.0).exp();
        for h in &mut head {
            *h *= shrink;
        }
        return head;
    }
    let body = integrate_dense(profile, t0, t_hi, n, |_t, v, _w, out| {
        for i in 0..n {
            out[i] = v[i].exp();
        }
    });
    head.iter().zip(body).map(|(h, b)| h + b).collect()
}

/// ∫_0^{r_0} e^{u_i} s ds from the Taylor expansion at the seed radius.
fn head_mass(profile: &RadialProfile) -> Vec<f64> {
    let n = profile.n();
    let mat = profile.matrix();
    let beta = profile.beta();
    let h = profile.weights();
    let r0_sq = (2.0 * profile.t_start()).exp();
    (0..n)
        .map(|i| {
            let q: f64 = (0..n)
                .map(|j| mat.entry(i, j) * h[j] * beta[j].exp())
                .sum();
            beta[i].exp() * (r0_sq / 2.0 - q * r0_sq * r0_sq / 16.0)
        })
        .collect()
}

/// Per-component residual of the exact identity
/// ∫_0^r e^{u_i}(s u_i' + 2) s ds − r² e^{u_i(r)} at radius r = e^t.
pub fn exact_identity_residual(profile: &RadialProfile, t: f64) -> Vec<f64> {
    let n = profile.n();
    let t0 = profile.t_start();
    // integrand in log coordinates is e^{v_i} v_i'
    let body = integrate_dense(profile, t0, t, n, |_t, v, w, out| {
        for i in 0..n {
            out[i] = v[i].exp() * w[i];
        }
    });
    let r0_sq = (2.0 * t0).exp();
    let (v_t, _) = profile.state_at(t);
    (0..n)
        .map(|i| {
            let head = profile.beta()[i].exp() * r0_sq; // (su'+2) ≈ 2 near 0
            head + body[i] - v_t[i].exp()
        })
        .collect()
}

/// Fits the far-field slope and intercept over the last decade of the grid.
pub fn tail_fit(profile: &RadialProfile) -> Result<TailFit, MassError> {
    if !profile.converged() {
        return Err(MassError::NotConverged);
    }
    let n = profile.n();
    let t_end = profile.t_end();
    let t_lo = (t_end - std::f64::consts::LN_10).max(profile.t_start());
    let (_, w_end) = profile.state_at(t_end);
    let m_hat: Vec<f64> = (0..n).map(|i| 2.0 - w_end[i]).collect();

    let samples = 256;
    let mut c_hat = vec![0.0; n];
    for k in 0..samples {
        let t = t_lo + (t_end - t_lo) * k as f64 / (samples - 1) as f64;
        let (v, _) = profile.state_at(t);
        for i in 0..n {
            // u_i + m̂_i ln r = v_i − 2t + m̂_i t
            c_hat[i] += v[i] - 2.0 * t + m_hat[i] * t;
        }
    }
    for c in &mut c_hat {
        *c /= samples as f64;
    }
    let mut residual = vec![0.0f64; n];
    for k in 0..samples {
        let t = t_lo + (t_end - t_lo) * k as f64 / (samples - 1) as f64;
        let (v, _) = profile.state_at(t);
        for i in 0..n {
            residual[i] = residual[i].max((v[i] - 2.0 * t + m_hat[i] * t - c_hat[i]).abs());
        }
    }
    Ok(TailFit {
        m_hat,
        c_hat,
        window: (t_lo.exp(), t_end.exp()),
        residual,
    })
}

/// Masses with analytic tail completion and exponents m = A (h ⊙ σ).
pub fn compute_masses(profile: &RadialProfile) -> Result<MassVector, MassError> {
    if !profile.converged() {
        return Err(MassError::NotConverged);
    }
    let n = profile.n();
    let fit = tail_fit(profile)?;
    let finite_part = partial_mass_at(profile, profile.t_end());
    let t_end = profile.t_end();
    let mut tail_part = vec![0.0; n];
    for i in 0..n {
        // ∫_R^∞ e^{ĉ} s^{1−m̂} ds = e^{ĉ} R^{2−m̂} / (m̂ − 2)
        tail_part[i] = (fit.c_hat[i] + (2.0 - fit.m_hat[i]) * t_end).exp() / (fit.m_hat[i] - 2.0);
        if tail_part[i] > 1e-3 * finite_part[i] {
            return Err(MassError::TailDominates {
                component: i,
                tail: tail_part[i],
                finite: finite_part[i],
            });
        }
    }
    let sigma: Vec<f64> = finite_part
        .iter()
        .zip(&tail_part)
        .map(|(f, t)| f + t)
        .collect();
    let weighted: Vec<f64> = sigma
        .iter()
        .zip(profile.weights())
        .map(|(s, h)| s * h)
        .collect();
    let m = profile.matrix().apply(&weighted);
    Ok(MassVector {
        sigma,
        m,
        finite_part,
        tail_part,
    })
}

/// Rellich-Pohozaev residuals of the h-weighted masses of a converged solve.
pub fn check_pi(profile: &RadialProfile) -> Result<PiResidual, MassError> {
    let masses = compute_masses(profile)?;
    let weighted = masses.weighted_sigma(profile.weights());
    Ok(profile.matrix().pi_residual(&weighted)?)
}
