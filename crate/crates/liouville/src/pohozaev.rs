//! Finite-ball Pohozaev identities evaluated as numerical residuals.
//!
//! Radial reduction on B_R (h constant, so the ∇h terms vanish). Boundary
//! data: x·ν = R, ∂_ν u = u'(R), x·∇u = R u'(R), surface measure 2πR.
//!
//! Nonlinear identity:
//!   4π Σ_i h_i ∫_0^R e^{u_i} s ds
//!     = 2πR² [ Σ_i h_i e^{u_i(R)} + ½ Σ_{ij} a^{ij} u_i'(R) u_j'(R) ].
//!
//! Linearized identity, for any solution φ of the linearized system:
//!   Σ_i h_i ( R² φ_i(R) e^{u_i(R)} − 2 ∫_0^R s e^{u_i} φ_i ds )
//!     + Σ_{ij} a^{ij} (R φ_j'(R)) (R u_i'(R)) = 0.

use crate::masses;
use crate::radial::RadialProfile;
use crate::variational::LinearizedProfile;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PohozaevError {
    #[error("radius {r} outside (0, {r_cut}]")]
    OutOfRange { r: f64, r_cut: f64 },
}

/// Residuals of both identities over a list of radii.
#[derive(Clone, Debug, Serialize)]
pub struct PohozaevTrace {
    pub radii: Vec<f64>,
    pub nonlinear_residual: Vec<f64>,
    pub linear_residual: Option<Vec<f64>>,
}

fn check_radius(profile: &RadialProfile, r: f64) -> Result<(), PohozaevError> {
    if !(r > 0.0) || r > profile.r_cut() * (1.0 + 1e-12) {
        return Err(PohozaevError::OutOfRange {
            r,
            r_cut: profile.r_cut(),
        });
    }
    Ok(())
}

/// LHS − RHS of the nonlinear identity on B_R.
pub fn nonlinear_residual(profile: &RadialProfile, r: f64) -> Result<f64, PohozaevError> {
    check_radius(profile, r)?;
    let n = profile.n();
    let h = profile.weights();
    let mat = profile.matrix();
    let t = r.ln().min(profile.t_end());
    let partial = masses::partial_mass_at(profile, t);
    let lhs = 4.0 * PI * (0..n).map(|i| h[i] * partial[i]).sum::<f64>();
    let (u, rup) = profile.evaluate(r).unwrap();
    let mut boundary = (0..n).map(|i| h[i] * u[i].exp()).sum::<f64>() * r * r;
    let mut cross = 0.0;
    for i in 0..n {
        for j in 0..n {
            cross += mat.inv_entry(i, j) * rup[i] * rup[j];
        }
    }
    boundary += 0.5 * cross;
    Ok(lhs - 2.0 * PI * boundary)
}

/// Residual of the linearized identity on B_R for an attached solution φ.
pub fn linear_residual(
    profile: &RadialProfile,
    phi: &LinearizedProfile,
    r: f64,
) -> Result<f64, PohozaevError> {
    check_radius(profile, r)?;
    let n = profile.n();
    let h = profile.weights();
    let mat = profile.matrix();
    let t = r.ln().min(profile.t_end());
    let t0 = profile.t_start();

    // ∫_0^R s e^{u_i} φ_i ds = head + ∫ e^{v_i} φ_i dt
    let body = masses::integrate_dense(profile, t0, t, n, |tt, v, _w, out| {
        let (ph, _) = phi.state_at(tt, profile);
        for i in 0..n {
            out[i] = v[i].exp() * ph[i];
        }
    });
    let r0_sq = (2.0 * t0).exp();
    let integrals: Vec<f64> = (0..n)
        .map(|i| body[i] + profile.beta()[i].exp() * phi.init()[i] * r0_sq / 2.0)
        .collect();

    let (u, rup) = profile.evaluate(r).unwrap();
    let (ph_r, g_r) = phi.state_at(t, profile);
    let mut residual = 0.0;
    for i in 0..n {
        residual += h[i] * (r * r * ph_r[i] * u[i].exp() - 2.0 * integrals[i]);
    }
    for i in 0..n {
        for j in 0..n {
            residual += mat.inv_entry(i, j) * g_r[j] * rup[i];
        }
    }
    Ok(residual)
}

/// Evaluates both residuals at each radius.
pub fn trace(
    profile: &RadialProfile,
    phi: Option<&LinearizedProfile>,
    radii: &[f64],
) -> Result<PohozaevTrace, PohozaevError> {
    let mut nonlinear = Vec::with_capacity(radii.len());
    for &r in radii {
        nonlinear.push(nonlinear_residual(profile, r)?);
    }
    let linear = match phi {
        Some(lp) => {
            let mut vals = Vec::with_capacity(radii.len());
            for &r in radii {
                vals.push(linear_residual(profile, lp, r)?);
            }
            Some(vals)
        }
        None => None,
    };
    Ok(PohozaevTrace {
        radii: radii.to_vec(),
        nonlinear_residual: nonlinear,
        linear_residual: linear,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::CoefficientMatrix;
    use crate::radial::{solve_radial, SolveOptions};
    use crate::variational::solve_linearized;

    fn bubble() -> RadialProfile {
        let m = CoefficientMatrix::new(&[vec![1.0]]).unwrap();
        solve_radial(&m, &[1.0], &[0.0], &SolveOptions::default()).unwrap()
    }

    #[test]
    fn nonlinear_identity_holds_on_bubble() {
        let p = bubble();
        for r in [0.5, 1.0, 5.0, 20.0, 80.0] {
            let res = nonlinear_residual(&p, r).unwrap();
            // scale of both sides is ≤ 16π
            assert!(res.abs() < 1e-7 * 16.0 * PI, "r = {r}: {res:e}");
        }
    }

    #[test]
    fn nonlinear_identity_vanishes_with_the_domain() {
        let p = bubble();
        let res_small = nonlinear_residual(&p, 1e-4).unwrap();
        assert!(res_small.abs() < 1e-10);
    }

    #[test]
    fn nonlinear_residual_against_symbolic_bubble_sides() {
        // closed-form sides: LHS = 16π s/(1+s), RHS = 2πR²[e^u + ½ u'²]
        let p = bubble();
        for r in [1.0f64, 3.0, 10.0] {
            let s = r * r / 8.0;
            let lhs = 16.0 * PI * s / (1.0 + s);
            let e_u = (1.0 + s).powi(-2);
            let up = -r / (2.0 * (1.0 + s));
            let rhs = 2.0 * PI * r * r * (e_u + 0.5 * up * up);
            let numeric = nonlinear_residual(&p, r).unwrap();
            assert!(((lhs - rhs) - numeric).abs() < 1e-7, "r = {r}");
        }
    }

    #[test]
    fn rejects_radius_beyond_cutoff() {
        let p = bubble();
        assert!(nonlinear_residual(&p, p.r_cut() * 3.0).is_err());
        assert!(nonlinear_residual(&p, -1.0).is_err());
    }

    #[test]
    fn linear_identity_for_kernel_on_bubble() {
        let p = bubble();
        let lp = solve_linearized(&p, &[2.0]).unwrap();
        for r in [1.0, 5.0, 20.0] {
            let res = linear_residual(&p, &lp, r).unwrap();
            assert!(res.abs() < 1e-6, "r = {r}: {res:e}");
        }
    }

    #[test]
    fn linear_identity_for_zero_solution() {
        let p = bubble();
        let lp = solve_linearized(&p, &[0.0]).unwrap();
        let res = linear_residual(&p, &lp, 5.0).unwrap();
        assert!(res.abs() < 1e-12);
    }

    #[test]
    fn linear_identity_for_basis_solution_on_symmetric_system() {
        let m = CoefficientMatrix::new(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let p = solve_radial(&m, &[1.0, 1.0], &[0.0, 0.0], &SolveOptions::default()).unwrap();
        let lp = solve_linearized(&p, &[1.0, 0.0]).unwrap();
        let res = linear_residual(&p, &lp, p.r_cut()).unwrap();
        assert!(res.abs() < 1e-5, "{res:e}");
    }

    #[test]
    fn cutoff_residual_recovers_lambda_i() {
        // as R → ∞ the identity degenerates to π Λ_I(σ) = 0
        let m = CoefficientMatrix::new(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let p = solve_radial(&m, &[1.0, 1.0], &[0.3, 0.0], &SolveOptions::default()).unwrap();
        let mv = crate::masses::compute_masses(&p).unwrap();
        let lambda = p.matrix().lambda_full(&mv.weighted_sigma(p.weights()));
        let res = nonlinear_residual(&p, p.r_cut()).unwrap();
        assert!((res - PI * lambda).abs() < 1e-4, "res {res:e} vs πΛ {:e}", PI * lambda);
    }

    #[test]
    fn residual_shrinks_under_tolerance_refinement() {
        let m = CoefficientMatrix::new(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let h = [1.0, 1.0];
        let beta = [0.3, 0.0];
        let coarse = SolveOptions {
            rel_tol: 1e-6,
            abs_tol: 1e-8,
            ..SolveOptions::default()
        };
        let fine = SolveOptions {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            ..SolveOptions::default()
        };
        let pc = solve_radial(&m, &h, &beta, &coarse).unwrap();
        let pf = solve_radial(&m, &h, &beta, &fine).unwrap();
        let r = 5.0;
        let rc = nonlinear_residual(&pc, r).unwrap().abs();
        let rf = nonlinear_residual(&pf, r).unwrap().abs();
        assert!(rf * 10.0 <= rc + 1e-13, "coarse {rc:e}, fine {rf:e}");
    }
}
