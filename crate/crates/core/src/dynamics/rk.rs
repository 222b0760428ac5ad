//! Explicit Runge-Kutta drivers over flat `f64` state vectors.
//!
//! The adaptive method is Dormand-Prince 5(4) with the FSAL property and
//! per-component error control; steps are clamped so the trajectory lands
//! exactly on every sample instant.

use super::{Direction, IntegratorConfig, Method};
use crate::error::Error;
use crate::Result;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
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
// 5th-order weights coincide with the last A row (FSAL).
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
// B minus the embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = rhs(t, y)` from t = 0 over the configured horizon, calling
/// `on_sample` at t = 0, at every multiple of `sample_every`, and at the end
/// point. Returns the final state.
pub(crate) fn drive<F, S>(
    rhs: &mut F,
    y0: &[f64],
    config: &IntegratorConfig,
    tau_min: f64,
    on_sample: &mut S,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    S: FnMut(f64, &[f64]) -> Result<()>,
{
    let sign = match config.direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let max_step = config.max_step.unwrap_or(tau_min);
    let h0 = config.dt_init.unwrap_or(tau_min / 100.0).min(max_step);

    // sample instants, strictly increasing in |t|
    let mut boundaries = Vec::new();
    let mut k = 1u64;
    loop {
        let t = k as f64 * config.sample_every;
        if t >= config.t_end * (1.0 - 1e-12) {
            break;
        }
        boundaries.push(sign * t);
        k += 1;
    }
    boundaries.push(sign * config.t_end);

    let mut t = 0.0;
    let mut y = y0.to_vec();
    on_sample(t, &y)?;

    match config.method {
        Method::Rk45Adaptive => {
            let mut stepper = Dopri5::new(rhs, &y, config, sign, max_step, h0)?;
            for &boundary in &boundaries {
                while (boundary - t) * sign > 1e-13 * boundary.abs().max(1.0) {
                    stepper.step(rhs, &mut t, &mut y, boundary)?;
                }
                t = boundary;
                on_sample(t, &y)?;
            }
        }
        Method::Rk4Fixed => {
            let h_nominal = sign * h0;
            let mut k1 = vec![0.0; y.len()];
            let mut k2 = vec![0.0; y.len()];
            let mut k3 = vec![0.0; y.len()];
            let mut k4 = vec![0.0; y.len()];
            let mut tmp = vec![0.0; y.len()];
            for &boundary in &boundaries {
                while (boundary - t) * sign > 1e-13 * boundary.abs().max(1.0) {
                    let h = if (t + h_nominal - boundary) * sign > 0.0 {
                        boundary - t
                    } else {
                        h_nominal
                    };
                    rhs(t, &y, &mut k1)?;
                    stage(&y, &k1, 0.5 * h, &mut tmp);
                    rhs(t + 0.5 * h, &tmp, &mut k2)?;
                    stage(&y, &k2, 0.5 * h, &mut tmp);
                    rhs(t + 0.5 * h, &tmp, &mut k3)?;
                    stage(&y, &k3, h, &mut tmp);
                    rhs(t + h, &tmp, &mut k4)?;
                    for i in 0..y.len() {
                        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                    }
                    t += h;
                }
                t = boundary;
                on_sample(t, &y)?;
            }
        }
    }
    Ok(y)
}

fn stage(y: &[f64], k: &[f64], h: f64, out: &mut [f64]) {
    for i in 0..y.len() {
        out[i] = y[i] + h * k[i];
    }
}

struct Dopri5 {
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
    h: f64,
    sign: f64,
    max_step: f64,
    rel_tol: f64,
    abs_tol: f64,
    k1_fresh: bool,
}

impl Dopri5 {
    fn new<F>(
        rhs: &mut F,
        y: &[f64],
        config: &IntegratorConfig,
        sign: f64,
        max_step: f64,
        h0: f64,
    ) -> Result<Self>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let n = y.len();
        let mut k = [(); 7].map(|_| vec![0.0; n]);
        rhs(0.0, y, &mut k[0])?;
        Ok(Self {
            k,
            y_stage: vec![0.0; n],
            y_new: vec![0.0; n],
            h: sign * h0,
            sign,
            max_step,
            rel_tol: config.rel_tol,
            abs_tol: config.abs_tol,
            k1_fresh: true,
        })
    }

    fn step<F>(&mut self, rhs: &mut F, t: &mut f64, y: &mut Vec<f64>, boundary: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let n = y.len();
        if !self.k1_fresh {
            rhs(*t, y, &mut self.k[0])?;
            self.k1_fresh = true;
        }
        loop {
            let mut h = self.h.clamp(-self.max_step, self.max_step);
            let clipped = (*t + h - boundary) * self.sign > 0.0;
            if clipped {
                h = boundary - *t;
            }
            if h.abs() < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t: *t, h });
            }

            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, a) in A[s][..s].iter().enumerate() {
                        acc += a * self.k[j][i];
                    }
                    self.y_stage[i] = y[i] + h * acc;
                }
                rhs(*t + C[s] * h, &self.y_stage, &mut self.k[s])?;
            }
            for i in 0..n {
                let mut acc = 0.0;
                for (j, b) in B.iter().enumerate() {
                    acc += b * self.k[j][i];
                }
                self.y_new[i] = y[i] + h * acc;
            }

            let mut err_sq = 0.0;
            for i in 0..n {
                let mut err_i = 0.0;
                for (j, e) in E.iter().enumerate() {
                    err_i += e * self.k[j][i];
                }
                err_i *= h;
                let scale = self.abs_tol + self.rel_tol * y[i].abs().max(self.y_new[i].abs());
                err_sq += (err_i / scale) * (err_i / scale);
            }
            let err = (err_sq / n as f64).sqrt();

            let factor = if err > 0.0 {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            if err <= 1.0 {
                *t += h;
                std::mem::swap(y, &mut self.y_new);
                self.k.swap(0, 6); // FSAL: k7 at the accepted point becomes k1
                if !clipped {
                    self.h = h * factor;
                } else {
                    self.h = (self.h * factor).clamp(-self.max_step, self.max_step);
                }
                return Ok(());
            }
            self.h = h * factor;
        }
    }
}
