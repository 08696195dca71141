//! Explicit adaptive Dormand-Prince 5(4) with dense output.
//!
//! Target systems are small and non-stiff; a step-size underflow is reported
//! as a stiffness failure with the time reached, never silently accepted.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 1_000_000,
        }
    }
}

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
// b5 - b4: error-estimate weights over k1..k7
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];
// dense-output weights over k1, k3..k7 (k2 drops out)
const D: [f64; 6] = [
    -12715105075.0 / 11282082432.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Integrates y' = f(t, y) from (t0, y0) to t_end, returning the states at
/// `sample_times` (which must be non-decreasing and within [t0, t_end]).
/// Components within atol of zero are clamped to exact zero.
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    sample_times: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    assert!(t_end >= t0, "integration horizon before start");
    for pair in sample_times.windows(2) {
        assert!(pair[0] <= pair[1], "sample times must be non-decreasing");
    }
    if let (Some(&first), Some(&last)) = (sample_times.first(), sample_times.last()) {
        assert!(first >= t0 && last <= t_end, "sample times out of range");
    }

    let mut samples = Vec::with_capacity(sample_times.len());
    let mut next_sample = 0;

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    f(t, &y, &mut k1);

    // leading samples at exactly t0
    while next_sample < sample_times.len() && sample_times[next_sample] <= t0 {
        samples.push(clamped(&y, opts.atol));
        next_sample += 1;
    }
    if t0 == t_end || next_sample == sample_times.len() {
        while samples.len() < sample_times.len() {
            samples.push(clamped(&y, opts.atol));
        }
        return Ok(samples);
    }

    let mut h = initial_step(&mut f, t0, &y, &k1, t_end, opts);
    let mut stages = vec![vec![0.0; dim]; 7];
    let mut y_stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];

    for _ in 0..opts.max_steps {
        if t + h == t {
            return Err(Error::Stiffness { t_reached: t });
        }
        if t + h > t_end {
            h = t_end - t;
        }

        stages[0].copy_from_slice(&k1);
        for stage in 0..6 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, s) in stages.iter().enumerate().take(stage + 1) {
                    acc += A[stage][j] * s[i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            let (head, tail) = stages.split_at_mut(stage + 1);
            let _ = head;
            f(t + C[stage] * h, &y_stage, &mut tail[0]);
        }
        // stage 6 evaluated y_new = y + h * (b5 . k); A[5] is the b5 row
        y_new.copy_from_slice(&y_stage);

        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, s) in stages.iter().enumerate() {
                e += E[j] * s[i];
            }
            e *= h;
            let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / scale).powi(2);
        }
        let err = (err_sq / dim as f64).sqrt();

        if err <= 1.0 {
            // dense output over [t, t+h]: the method's own fourth-order
            // continuous extension, same order as the accepted step
            if next_sample < sample_times.len() && sample_times[next_sample] <= t + h {
                let rcont = dense_coefficients(&y, &y_new, &stages, h);
                while next_sample < sample_times.len() && sample_times[next_sample] <= t + h {
                    let theta = (sample_times[next_sample] - t) / h;
                    let interpolated = dense_eval(&rcont, theta);
                    samples.push(clamped(&interpolated, opts.atol));
                    next_sample += 1;
                }
            }
            t += h;
            y.copy_from_slice(&y_new);
            k1.copy_from_slice(&stages[6]); // FSAL
            if t >= t_end || next_sample == sample_times.len() {
                return Ok(samples);
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        let grown = h * if err <= 1.0 { factor } else { factor.min(1.0) };
        h = grown;
        if !h.is_finite() || h <= f64::MIN_POSITIVE * 1e4 {
            return Err(Error::Stiffness { t_reached: t });
        }
    }
    Err(Error::Stiffness { t_reached: t })
}

fn dense_coefficients(y: &[f64], y_new: &[f64], stages: &[Vec<f64>], h: f64) -> [Vec<f64>; 5] {
    let dim = y.len();
    let mut rcont = [
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
        vec![0.0; dim],
    ];
    for i in 0..dim {
        let ydiff = y_new[i] - y[i];
        let bspl = h * stages[0][i] - ydiff;
        rcont[0][i] = y[i];
        rcont[1][i] = ydiff;
        rcont[2][i] = bspl;
        rcont[3][i] = ydiff - h * stages[6][i] - bspl;
        rcont[4][i] = h
            * (D[0] * stages[0][i]
                + D[1] * stages[2][i]
                + D[2] * stages[3][i]
                + D[3] * stages[4][i]
                + D[4] * stages[5][i]
                + D[5] * stages[6][i]);
    }
    rcont
}

fn dense_eval(rcont: &[Vec<f64>; 5], theta: f64) -> Vec<f64> {
    let theta1 = 1.0 - theta;
    (0..rcont[0].len())
        .map(|i| {
            rcont[0][i]
                + theta
                    * (rcont[1][i]
                        + theta1 * (rcont[2][i] + theta * (rcont[3][i] + theta1 * rcont[4][i])))
        })
        .collect()
}

fn clamped(y: &[f64], atol: f64) -> Vec<f64> {
    y.iter()
        .map(|&v| if v < 0.0 && v.abs() < atol { 0.0 } else { v })
        .collect()
}

/// Hairer-style starting step: balance the scale of y and y' and probe one
/// Euler step for the second derivative.
fn initial_step<F>(f: &mut F, t0: f64, y0: &[f64], f0: &[f64], t_end: f64, opts: &OdeOptions) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let scale: Vec<f64> = y0
        .iter()
        .map(|&v| opts.atol + opts.rtol * v.abs())
        .collect();
    let rms = |v: &[f64]| {
        (v.iter()
            .zip(&scale)
            .map(|(x, s)| (x / s).powi(2))
            .sum::<f64>()
            / dim as f64)
            .sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, k)| y + h0 * k).collect();
    let mut f1 = vec![0.0; dim];
    f(t0 + h0, &y1, &mut f1);
    let d2 = {
        let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
        rms(&diff) / h0
    };
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_end - t0)
}
