//! Embedded Dormand-Prince 5(4) integrator with fourth-order dense output.
//!
//! Coefficients follow Hairer-Norsett-Wanner (DOPRI5), including the
//! continuous extension used for interpolation between accepted steps.

use thiserror::Error;

/// Right-hand side of a first-order system y' = f(t, y).
pub trait OdeRhs {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64]);
}

/// Monitor verdict after each accepted step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monitor {
    Continue,
    /// Terminate successfully at the current step end.
    Stop,
    /// Terminate unsuccessfully (e.g. state left the admissible region).
    Abort,
}

/// How an integration ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Monitor requested a stop.
    Stopped,
    /// Reached `t_max` without a stop request.
    ReachedTMax,
    /// Monitor aborted.
    Aborted,
}

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
}

/// Interpolation data for one accepted step on [t0, t0 + h].
#[derive(Clone, Debug)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    /// Five interpolation coefficients per state component, flattened.
    cont: Vec<f64>,
}

impl DenseStep {
    pub fn dim(&self) -> usize {
        self.cont.len() / 5
    }

    /// Evaluates the quartic interpolant at `t` within the step.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let dim = self.dim();
        debug_assert_eq!(out.len(), dim);
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        for i in 0..dim {
            let c = &self.cont[5 * i..5 * i + 5];
            out[i] = c[0] + theta * (c[1] + theta1 * (c[2] + theta * (c[3] + theta1 * c[4])));
        }
    }
}

/// Piecewise interpolant covering the whole integration interval.
#[derive(Clone, Debug)]
pub struct DenseOutput {
    steps: Vec<DenseStep>,
    t_start: f64,
    t_end: f64,
}

impl DenseOutput {
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Evaluates the solution at `t`, clamped to the covered interval.
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let t = t.clamp(self.t_start, self.t_end);
        let idx = match self
            .steps
            .binary_search_by(|s| s.t0.partial_cmp(&t).unwrap())
        {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        };
        self.steps[idx].eval(t, out);
    }
}

/// One accepted grid point.
#[derive(Clone, Debug)]
pub struct GridPoint {
    pub t: f64,
    pub y: Vec<f64>,
}

/// Result of an adaptive integration run.
#[derive(Debug)]
pub struct Integration {
    pub points: Vec<GridPoint>,
    pub dense: DenseOutput,
    pub outcome: Outcome,
}

// Butcher tableau of the Dormand-Prince 5(4) pair.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Error coefficients b5 - b4.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights for the fifth interpolation coefficient.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Adaptive integration of `rhs` from `(t0, y0)` until `t_max`, a monitor
/// stop, or an abort. The monitor sees every accepted step end.
pub fn integrate<F, M>(
    rhs: &F,
    t0: f64,
    y0: &[f64],
    t_max: f64,
    rel_tol: f64,
    abs_tol: f64,
    mut monitor: M,
) -> Result<Integration, IntegrateError>
where
    F: OdeRhs,
    M: FnMut(f64, &[f64]) -> Monitor,
{
    let dim = rhs.dim();
    assert_eq!(y0.len(), dim);
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    rhs.eval(t, &y, &mut k[0]);

    let mut points = vec![GridPoint { t, y: y.clone() }];
    let mut steps: Vec<DenseStep> = Vec::new();
    let mut outcome = Outcome::ReachedTMax;

    let mut h = initial_step(rhs, t, &y, &k[0], rel_tol, abs_tol).min(t_max - t0);
    let mut y_new = vec![0.0; dim];
    let mut y_stage = vec![0.0; dim];

    'outer: while t < t_max {
        if h < 1e-13 * t.abs().max(1.0) {
            return Err(IntegrateError::StepUnderflow { t });
        }
        if t + h > t_max {
            h = t_max - t;
        }
        // stages 2..7 (k1 carried over, FSAL)
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            rhs.eval(t + C[s] * h, &y_stage, &mut tail[0]);
        }
        // k7 was evaluated at y1 since A[6] equals the 5th-order weights
        for i in 0..dim {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(6) {
                acc += A[6][j] * kj[i];
            }
            y_new[i] = y[i] + h * acc;
        }
        // error norm
        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            e *= h;
            let sc = abs_tol + rel_tol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / dim as f64).sqrt();

        if err <= 1.0 {
            // accepted: build dense coefficients
            let mut cont = vec![0.0; 5 * dim];
            for i in 0..dim {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                let mut d5 = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    d5 += D[j] * kj[i];
                }
                cont[5 * i] = y[i];
                cont[5 * i + 1] = ydiff;
                cont[5 * i + 2] = bspl;
                cont[5 * i + 3] = ydiff - h * k[6][i] - bspl;
                cont[5 * i + 4] = h * d5;
            }
            steps.push(DenseStep { t0: t, h, cont });
            t += h;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6); // FSAL
            points.push(GridPoint { t, y: y.clone() });
            match monitor(t, &y) {
                Monitor::Continue => {}
                Monitor::Stop => {
                    outcome = Outcome::Stopped;
                    break 'outer;
                }
                Monitor::Abort => {
                    outcome = Outcome::Aborted;
                    break 'outer;
                }
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 10.0);
            h *= fac;
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac;
            // k1 is still valid for the retried step
        }
    }

    let t_end = t;
    Ok(Integration {
        points,
        dense: DenseOutput {
            steps,
            t_start: t0,
            t_end,
        },
        outcome,
    })
}

/// Crude initial step guess from the scale of y and f.
fn initial_step<F: OdeRhs>(
    _rhs: &F,
    _t: f64,
    y: &[f64],
    f: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> f64 {
    let ynorm = y.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
    let fnorm = f.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let tol = (abs_tol + rel_tol * ynorm).max(1e-14);
    if fnorm <= 1e-12 {
        1e-3
    } else {
        (0.01 * ynorm / fnorm).min(1.0).max(tol.powf(0.2) * 0.1).min(1e-1)
    }
}
