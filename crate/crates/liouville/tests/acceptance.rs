//! Acceptance gate: one sequential run over the eleven shipping criteria,
//! printing a pass/fail line per criterion and failing at the end if any
//! tolerance was missed.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use liouville::coeff::CoefficientMatrix;
use liouville::masses::{check_pi, compute_masses, tail_fit};
use liouville::pohozaev;
use liouville::radial::{solve_radial, RadialProfile, SolveOptions};
use liouville::shooting::{self, InversionTarget, NewtonOptions};
use liouville::variational;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn new() -> Self {
        Self { failures: Vec::new() }
    }

    fn record(&mut self, id: usize, name: &str, result: Result<String, String>) {
        match result {
            Ok(detail) => println!("criterion {id:2} PASS  {name}: {detail}"),
            Err(detail) => {
                println!("criterion {id:2} FAIL  {name}: {detail}");
                self.failures.push(format!("{id} ({name}): {detail}"));
            }
        }
    }

    fn finish(self) {
        assert!(
            self.failures.is_empty(),
            "failed acceptance criteria:\n{}",
            self.failures.join("\n")
        );
    }
}

fn fmt_max(x: f64) -> String {
    format!("{x:.2e}")
}

/// Random admissible (A, h=1, β) cases shared by criteria 3–6 and 10.
struct RandomCase {
    matrix: CoefficientMatrix,
    beta: Vec<f64>,
}

fn draw_cases(count: usize) -> Vec<RandomCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_11ab);
    let mut cases = Vec::with_capacity(count);
    while cases.len() < count {
        let n = if rng.gen_bool(0.5) { 2 } else { 3 };
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.gen_range(0.0..2.0);
                a[i][j] = v;
                a[j][i] = v;
            }
            a[i][i] = a[i][i].max(0.2);
        }
        let Ok(matrix) = CoefficientMatrix::new(&a) else {
            continue; // singular or reducible draw
        };
        let mut beta: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
        beta.push(0.0);
        cases.push(RandomCase { matrix, beta });
    }
    cases
}

fn bubble_u(r: f64) -> f64 {
    -2.0 * (1.0 + r * r / 8.0).ln()
}

#[test]
fn acceptance() {
    let mut gate = Gate::new();
    let opts = SolveOptions::default();

    // 1. scalar mass quantization: sigma = 4 within 1e-6, under a second
    {
        let started = Instant::now();
        let result = (|| {
            let m = CoefficientMatrix::new(&[vec![1.0]]).map_err(|e| e.to_string())?;
            let p = solve_radial(&m, &[1.0], &[0.0], &opts).map_err(|e| e.to_string())?;
            let mv = compute_masses(&p).map_err(|e| e.to_string())?;
            let err = (mv.sigma[0] - 4.0).abs();
            let elapsed = started.elapsed();
            if err >= 1e-6 {
                return Err(format!("|sigma - 4| = {}", fmt_max(err)));
            }
            if elapsed.as_secs_f64() >= 1.0 {
                return Err(format!("took {elapsed:?}"));
            }
            Ok(format!("|sigma - 4| = {} in {elapsed:?}", fmt_max(err)))
        })();
        gate.record(1, "scalar mass quantization", result);
    }

    // 2. closed-form bubble profile within 1e-8 on r in [0, 100]
    {
        let started = Instant::now();
        let result = (|| {
            let m = CoefficientMatrix::new(&[vec![1.0]]).map_err(|e| e.to_string())?;
            // the default tail rule stops near r = 1.8e5, well past r = 100
            let p = solve_radial(&m, &[1.0], &[0.0], &opts).map_err(|e| e.to_string())?;
            if p.r_cut() < 100.0 {
                return Err(format!("profile stops at r = {}", p.r_cut()));
            }
            let mut max_err = 0.0f64;
            for k in 0..=1000 {
                let r = (k as f64 / 10.0).max(1e-8);
                let (u, _) = p.evaluate(r).map_err(|e| e.to_string())?;
                max_err = max_err.max((u[0] - bubble_u(r)).abs());
            }
            let elapsed = started.elapsed();
            if max_err >= 1e-8 {
                return Err(format!("max pointwise error {}", fmt_max(max_err)));
            }
            if elapsed.as_secs_f64() >= 1.0 {
                return Err(format!("took {elapsed:?}"));
            }
            Ok(format!("max error {} in {elapsed:?}", fmt_max(max_err)))
        })();
        gate.record(2, "closed-form bubble profile", result);
    }

    // 3. random admissible systems land on the hypersurface
    let cases = draw_cases(50);
    let started3 = Instant::now();
    let solved: Vec<(usize, RadialProfile)> = cases
        .iter()
        .enumerate()
        .filter_map(|(k, c)| {
            solve_radial(&c.matrix, &vec![1.0; c.matrix.n()], &c.beta, &opts)
                .ok()
                .map(|p| (k, p))
        })
        .collect();
    let elapsed3 = started3.elapsed();
    {
        let result = (|| {
            if solved.is_empty() {
                return Err("no random case converged".to_string());
            }
            let mut worst_lambda = 0.0f64;
            let mut worst_proper = f64::INFINITY;
            for (k, p) in &solved {
                let res = check_pi(p).map_err(|e| format!("case {k}: {e}"))?;
                worst_lambda = worst_lambda.max(res.lambda_i.abs());
                worst_proper = worst_proper.min(res.min_proper_lambda);
                if res.lambda_i.abs() >= 1e-5 {
                    return Err(format!("case {k}: |lambda_I| = {}", fmt_max(res.lambda_i.abs())));
                }
                if res.min_proper_lambda <= 0.0 {
                    return Err(format!("case {k}: min proper lambda = {}", res.min_proper_lambda));
                }
            }
            if elapsed3.as_secs_f64() >= 120.0 {
                return Err(format!("took {elapsed3:?}"));
            }
            Ok(format!(
                "{}/50 converged, max |lambda_I| = {}, min proper lambda = {} in {elapsed3:?}",
                solved.len(),
                fmt_max(worst_lambda),
                fmt_max(worst_proper)
            ))
        })();
        gate.record(3, "random systems on the hypersurface", result);
    }

    // 4. decay exponents: m_i > 2.05 and tail fit agrees with A(h . sigma)
    {
        let result = (|| {
            let mut worst_gap = f64::INFINITY;
            let mut worst_fit = 0.0f64;
            for (k, p) in &solved {
                let mv = compute_masses(p).map_err(|e| format!("case {k}: {e}"))?;
                let fit = tail_fit(p).map_err(|e| format!("case {k}: {e}"))?;
                for i in 0..p.n() {
                    worst_gap = worst_gap.min(mv.m[i] - 2.0);
                    if mv.m[i] <= 2.05 {
                        return Err(format!("case {k}: m_{i} = {}", mv.m[i]));
                    }
                    let diff = (fit.m_hat[i] - mv.m[i]).abs();
                    worst_fit = worst_fit.max(diff);
                    if diff >= 1e-3 {
                        return Err(format!(
                            "case {k}: |m_hat - m| = {} for component {i}",
                            fmt_max(diff)
                        ));
                    }
                }
            }
            Ok(format!(
                "min m_i - 2 = {}, max |m_hat - m| = {}",
                fmt_max(worst_gap),
                fmt_max(worst_fit)
            ))
        })();
        gate.record(4, "decay exponents", result);
    }

    // 5. kernel identity on all criterion-3 solves
    {
        let result = (|| {
            let mut worst_dev = 0.0f64;
            let mut worst_orth = 0.0f64;
            for (k, p) in &solved {
                let kc = variational::kernel_check(p).map_err(|e| format!("case {k}: {e}"))?;
                worst_dev = worst_dev.max(kc.max_deviation);
                if kc.max_deviation >= 1e-7 {
                    return Err(format!("case {k}: deviation {}", fmt_max(kc.max_deviation)));
                }
                for o in &kc.orthogonality {
                    worst_orth = worst_orth.max(o.abs());
                    if o.abs() >= 1e-6 {
                        return Err(format!("case {k}: orthogonality {}", fmt_max(o.abs())));
                    }
                }
            }
            Ok(format!(
                "max deviation {}, max orthogonality {}",
                fmt_max(worst_dev),
                fmt_max(worst_orth)
            ))
        })();
        gate.record(5, "kernel identity", result);
    }

    // 6. Jacobian vs central finite differences on 10 sampled solves
    {
        let result = (|| {
            let mut worst_rel = 0.0f64;
            let mut worst_constraint = 0.0f64;
            let step = 1e-4;
            for (k, p) in solved.iter().step_by((solved.len() / 10).max(1)).take(10) {
                let basis =
                    variational::jacobian_sigma(p).map_err(|e| format!("case {k}: {e}"))?;
                let mv = compute_masses(p).map_err(|e| format!("case {k}: {e}"))?;
                let n = p.n();
                let h = p.weights().to_vec();
                for m in 0..n {
                    // central difference of the h-weighted masses in beta_m
                    let mut bp = p.beta().to_vec();
                    bp[m] += step;
                    let mut bm = p.beta().to_vec();
                    bm[m] -= step;
                    let sp = compute_masses(
                        &solve_radial(p.matrix(), &h, &bp, &opts)
                            .map_err(|e| format!("case {k}: {e}"))?,
                    )
                    .map_err(|e| format!("case {k}: {e}"))?
                    .weighted_sigma(&h);
                    let sm = compute_masses(
                        &solve_radial(p.matrix(), &h, &bm, &opts)
                            .map_err(|e| format!("case {k}: {e}"))?,
                    )
                    .map_err(|e| format!("case {k}: {e}"))?
                    .weighted_sigma(&h);
                    for i in 0..n {
                        let fd = (sp[i] - sm[i]) / (2.0 * step);
                        let ds = basis.dsigma()[i][m];
                        let rel = (fd - ds).abs() / fd.abs().max(1.0);
                        worst_rel = worst_rel.max(rel);
                        if rel >= 1e-4 {
                            return Err(format!(
                                "case {k}: dsigma[{i}][{m}] = {ds:e} vs fd {fd:e}"
                            ));
                        }
                    }
                    // differentiated constraint sum_i (m_i - 2) dsigma[i][m] = 0
                    let s: f64 = (0..n).map(|i| (mv.m[i] - 2.0) * basis.dsigma()[i][m]).sum();
                    worst_constraint = worst_constraint.max(s.abs());
                    if s.abs() >= 1e-5 {
                        return Err(format!("case {k}: constraint residual {}", fmt_max(s.abs())));
                    }
                }
            }
            Ok(format!(
                "max relative error {}, max constraint residual {}",
                fmt_max(worst_rel),
                fmt_max(worst_constraint)
            ))
        })();
        gate.record(6, "Jacobian vs finite differences", result);
    }

    // 7. injectivity: nonzero reduced determinant + round trip on a 1D grid
    {
        let started = Instant::now();
        let result = (|| {
            let mut min_det = f64::INFINITY;
            for (k, p) in solved.iter().step_by((solved.len() / 10).max(1)).take(10) {
                let basis =
                    variational::jacobian_sigma(p).map_err(|e| format!("case {k}: {e}"))?;
                min_det = min_det.min(basis.det_m_reduced().abs());
                if basis.det_m_reduced().abs() <= 1e-8 {
                    return Err(format!(
                        "case {k}: |det M_reduced| = {}",
                        fmt_max(basis.det_m_reduced().abs())
                    ));
                }
            }
            let matrix =
                CoefficientMatrix::new(&[vec![1.0, 0.5], vec![0.5, 1.0]]).map_err(|e| e.to_string())?;
            let h = vec![1.0, 1.0];
            let mut worst_rt = 0.0f64;
            for b in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                let p = solve_radial(&matrix, &h, &[b, 0.0], &opts).map_err(|e| e.to_string())?;
                let ws = compute_masses(&p).map_err(|e| e.to_string())?.weighted_sigma(&h);
                let target = InversionTarget {
                    matrix: matrix.clone(),
                    h: h.clone(),
                    sigma_head: ws[..1].to_vec(),
                };
                let res = shooting::invert_sigma(&target, &[b + 0.4], &opts, &NewtonOptions::default())
                    .map_err(|e| format!("beta = {b}: {e}"))?;
                let err = (res.beta[0] - b).abs();
                worst_rt = worst_rt.max(err);
                if err >= 1e-6 {
                    return Err(format!("beta = {b}: recovered {} (error {})", res.beta[0], fmt_max(err)));
                }
            }
            let elapsed = started.elapsed();
            if elapsed.as_secs_f64() >= 60.0 {
                return Err(format!("took {elapsed:?}"));
            }
            Ok(format!(
                "min |det M| = {}, max round-trip error = {} in {elapsed:?}",
                fmt_max(min_det),
                fmt_max(worst_rt)
            ))
        })();
        gate.record(7, "injectivity and round trip", result);
    }

    // 8. symmetric closed form sigma_i = 4/(1+c)
    {
        let result = (|| {
            let mut worst = 0.0f64;
            for c in [0.25, 0.5, 0.75] {
                let m = CoefficientMatrix::new(&[vec![1.0, c], vec![c, 1.0]])
                    .map_err(|e| e.to_string())?;
                let p = solve_radial(&m, &[1.0, 1.0], &[0.0, 0.0], &opts)
                    .map_err(|e| format!("c = {c}: {e}"))?;
                let mv = compute_masses(&p).map_err(|e| format!("c = {c}: {e}"))?;
                for i in 0..2 {
                    let err = (mv.sigma[i] - 4.0 / (1.0 + c)).abs();
                    worst = worst.max(err);
                    if err >= 1e-6 {
                        return Err(format!("c = {c}: |sigma_{i} - 4/(1+c)| = {}", fmt_max(err)));
                    }
                }
            }
            Ok(format!("max |sigma - 4/(1+c)| = {}", fmt_max(worst)))
        })();
        gate.record(8, "symmetric closed form", result);
    }

    // 9. scaling invariance of the masses
    {
        let result = (|| {
            let m = CoefficientMatrix::new(&[vec![1.0, 0.5], vec![0.5, 1.0]])
                .map_err(|e| e.to_string())?;
            let h = vec![1.0, 1.0];
            let mut worst = 0.0f64;
            for b in [-0.7, 0.0, 0.9] {
                let p0 = solve_radial(&m, &h, &[b, 0.0], &opts).map_err(|e| e.to_string())?;
                let p1 =
                    solve_radial(&m, &h, &[b + 1.3, 1.3], &opts).map_err(|e| e.to_string())?;
                let s0 = compute_masses(&p0).map_err(|e| e.to_string())?.sigma;
                let s1 = compute_masses(&p1).map_err(|e| e.to_string())?.sigma;
                for i in 0..2 {
                    let err = (s0[i] - s1[i]).abs();
                    worst = worst.max(err);
                    if err >= 1e-7 {
                        return Err(format!("beta = {b}: |d sigma_{i}| = {}", fmt_max(err)));
                    }
                }
            }
            Ok(format!("max mass shift {}", fmt_max(worst)))
        })();
        gate.record(9, "scaling invariance", result);
    }

    // 10. Pohozaev traces small everywhere and shrinking under refinement
    {
        let result = (|| {
            let mut worst_nl = 0.0f64;
            let mut worst_lin = 0.0f64;
            for (k, p) in &solved {
                let lp = variational::solve_linearized(p, &vec![2.0; p.n()])
                    .map_err(|e| format!("case {k}: {e}"))?;
                let radii = [1.0, 5.0, p.r_cut()];
                let tr = pohozaev::trace(p, Some(&lp), &radii)
                    .map_err(|e| format!("case {k}: {e}"))?;
                let lin = tr.linear_residual.as_ref().unwrap();
                for (j, &r) in radii.iter().enumerate() {
                    worst_nl = worst_nl.max(tr.nonlinear_residual[j].abs());
                    worst_lin = worst_lin.max(lin[j].abs());
                    if tr.nonlinear_residual[j].abs() >= 1e-5 {
                        return Err(format!(
                            "case {k}, R = {r}: nonlinear residual {}",
                            fmt_max(tr.nonlinear_residual[j].abs())
                        ));
                    }
                    if lin[j].abs() >= 1e-5 {
                        return Err(format!(
                            "case {k}, R = {r}: linear residual {}",
                            fmt_max(lin[j].abs())
                        ));
                    }
                }
            }
            // refinement: coarse 1e-6 vs 100x tighter 1e-8 on one system
            let m = CoefficientMatrix::new(&[vec![1.0, 0.5], vec![0.5, 1.0]])
                .map_err(|e| e.to_string())?;
            let h = vec![1.0, 1.0];
            let residuals = |rel: f64, abs: f64| -> Result<(f64, f64), String> {
                let mut o = opts;
                o.rel_tol = rel;
                o.abs_tol = abs;
                let p = solve_radial(&m, &h, &[0.4, 0.0], &o).map_err(|e| e.to_string())?;
                let lp = variational::solve_linearized(&p, &[2.0, 2.0])
                    .map_err(|e| e.to_string())?;
                let nl = pohozaev::nonlinear_residual(&p, 5.0).map_err(|e| e.to_string())?;
                let li = pohozaev::linear_residual(&p, &lp, 5.0).map_err(|e| e.to_string())?;
                Ok((nl.abs(), li.abs()))
            };
            let (nl_coarse, li_coarse) = residuals(1e-6, 1e-8)?;
            let (nl_fine, li_fine) = residuals(1e-8, 1e-10)?;
            if nl_fine * 10.0 > nl_coarse {
                return Err(format!(
                    "nonlinear residual only {nl_coarse:e} -> {nl_fine:e} under refinement"
                ));
            }
            if li_fine * 10.0 > li_coarse {
                return Err(format!(
                    "linear residual only {li_coarse:e} -> {li_fine:e} under refinement"
                ));
            }
            Ok(format!(
                "max residuals {} / {}, refinement {:.0}x / {:.0}x",
                fmt_max(worst_nl),
                fmt_max(worst_lin),
                nl_coarse / nl_fine,
                li_coarse / li_fine
            ))
        })();
        gate.record(10, "Pohozaev traces", result);
    }

    // 11. continuation along a shrinking diagonal perturbation
    {
        let result = (|| {
            let m = CoefficientMatrix::new(&[vec![0.0, 1.0], vec![1.0, 0.0]])
                .map_err(|e| e.to_string())?;
            let reports = shooting::continuation_solve(
                &m,
                &[1.0, 1.0],
                &[0.0, 0.0],
                &[0.1, 0.01, 0.001, 0.0],
                &opts,
            )
            .map_err(|e| e.to_string())?;
            let last = reports.last().unwrap();
            let mut gaps = Vec::new();
            for r in &reports {
                if r.lambda_i.abs() >= 1e-5 {
                    return Err(format!(
                        "eps = {:?}: |lambda_I| = {}",
                        r.eps,
                        fmt_max(r.lambda_i.abs())
                    ));
                }
                let gap = r
                    .weighted_sigma
                    .iter()
                    .zip(&last.weighted_sigma)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                gaps.push(gap);
            }
            for w in gaps.windows(2) {
                if w[1] > w[0] + 1e-12 {
                    return Err(format!("gap sequence not monotone: {gaps:?}"));
                }
            }
            Ok(format!("gaps to eps = 0: {gaps:?}"))
        })();
        gate.record(11, "diagonal continuation", result);
    }

    gate.finish();
}
