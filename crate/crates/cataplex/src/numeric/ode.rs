//! Adaptive embedded Runge-Kutta initial-value solver (Dormand-Prince 5(4)).

use super::{NumericError, Tolerance};

/// Sampled solution path: strictly increasing abscissae with one state
/// vector per abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct OdePath {
    pub abscissae: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl OdePath {
    pub fn len(&self) -> usize {
        self.abscissae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissae.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("path is never empty")
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
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
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// 5th-order weights equal the last A row (FSAL); 4th-order embedded weights:
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

struct Stepper<'a, F> {
    rhs: &'a F,
    dim: usize,
    abs_tol: f64,
    rel_tol: f64,
}

impl<'a, F> Stepper<'a, F>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    /// One attempted step from (t, y) with size h. Returns (y_new, err_norm).
    fn attempt(&self, t: f64, y: &[f64], k0: &[f64], h: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let n = self.dim;
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        k.push(k0.to_vec());
        for stage in 0..6 {
            let mut ys = y.to_vec();
            for (j, kj) in k.iter().enumerate() {
                let a = A[stage][j];
                if a != 0.0 {
                    for i in 0..n {
                        ys[i] += h * a * kj[i];
                    }
                }
            }
            k.push((self.rhs)(t + C[stage] * h, &ys));
        }
        let mut y5 = y.to_vec();
        let mut y4 = y.to_vec();
        for (j, kj) in k.iter().enumerate() {
            for i in 0..n {
                y5[i] += h * B5[j] * kj[i];
                y4[i] += h * B4[j] * kj[i];
            }
        }
        let mut err_norm: f64 = 0.0;
        for i in 0..n {
            let scale = self.abs_tol + self.rel_tol * y[i].abs().max(y5[i].abs());
            err_norm = err_norm.max(((y5[i] - y4[i]) / scale).abs());
        }
        // FSAL: k[6] is the derivative at the new point.
        (y5, k.pop().expect("7 stages"), err_norm)
    }
}

/// Integrate rhs from range.0 to range.1, recording every accepted step.
pub fn solve_ivp<F>(
    rhs: F,
    y0: &[f64],
    range: (f64, f64),
    tol: &Tolerance,
) -> Result<OdePath, NumericError>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    integrate(rhs, y0, range, tol, None)
}

/// Integrate rhs and record the state exactly at each of the given sample
/// points (strictly increasing; the first is the initial abscissa).
pub fn solve_ivp_sampled<F>(
    rhs: F,
    y0: &[f64],
    samples: &[f64],
    tol: &Tolerance,
) -> Result<OdePath, NumericError>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    if samples.len() < 2 {
        return Err(NumericError::BadRange {
            lo: samples.first().copied().unwrap_or(f64::NAN),
            hi: samples.last().copied().unwrap_or(f64::NAN),
        });
    }
    integrate(
        rhs,
        y0,
        (samples[0], samples[samples.len() - 1]),
        tol,
        Some(samples),
    )
}

fn integrate<F>(
    rhs: F,
    y0: &[f64],
    range: (f64, f64),
    tol: &Tolerance,
    samples: Option<&[f64]>,
) -> Result<OdePath, NumericError>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let (t0, t_end) = range;
    if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(NumericError::BadRange { lo: t0, hi: t_end });
    }
    let stepper = Stepper {
        rhs: &rhs,
        dim: y0.len(),
        abs_tol: tol.abs_tol,
        rel_tol: tol.rel_tol,
    };

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k0 = rhs(t, &y);
    let span = t_end - t0;
    let mut h = (span / 100.0).min(0.1).max(1e-8);

    let mut abscissae = vec![t0];
    let mut states = vec![y.clone()];
    // Next sample to hit, when sampling is requested.
    let mut next_sample = 1usize;

    let h_floor = |t: f64| 8.0 * f64::EPSILON * t.abs().max(1.0);

    while t < t_end {
        let target = match samples {
            Some(s) => s[next_sample],
            None => t_end,
        };
        let mut h_try = h.min(target - t);
        if h_try < h_floor(t) {
            // Degenerate remaining gap: snap to the target.
            t = target;
            abscissae.push(t);
            states.push(y.clone());
            if samples.is_some() {
                next_sample += 1;
                if next_sample >= samples.unwrap().len() {
                    break;
                }
            }
            continue;
        }
        loop {
            let (y_new, k_new, err) = stepper.attempt(t, &y, &k0, h_try);
            if err <= 1.0 && y_new.iter().all(|v| v.is_finite()) {
                t += h_try;
                y = y_new;
                k0 = k_new;
                let grow = if err > 0.0 {
                    (0.9 * err.powf(-0.2)).min(5.0)
                } else {
                    5.0
                };
                h = (h_try * grow).min(span);
                break;
            }
            let shrink = if err.is_finite() && err > 0.0 {
                (0.9 * err.powf(-0.2)).max(0.2)
            } else {
                0.2
            };
            h_try *= shrink;
            if h_try < h_floor(t) {
                return Err(NumericError::StepUnderflow { sigma: t });
            }
        }

        match samples {
            Some(s) => {
                // Record only when we land on the requested sample.
                if (t - s[next_sample]).abs() <= h_floor(t) {
                    t = s[next_sample];
                    abscissae.push(t);
                    states.push(y.clone());
                    next_sample += 1;
                    if next_sample >= s.len() {
                        break;
                    }
                }
            }
            None => {
                abscissae.push(t);
                states.push(y.clone());
            }
        }
    }

    Ok(OdePath { abscissae, states })
}
