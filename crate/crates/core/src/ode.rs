//! Adaptive Dormand–Prince 5(4) integrator with a step-acceptance hook.
//!
//! The hook sees every trial step that passed the error test and may reject
//! it (the step is then halved) or stop the integration after it. That is
//! enough to bracket events such as a sign change of `det g` down to the
//! step floor.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step magnitude before giving up.
    pub min_step: f64,
    pub max_step: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            min_step: 1e-12,
            max_step: f64::INFINITY,
            initial_step: None,
            max_steps: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError<E> {
    #[error("step size fell below {min_step:e} at s = {at}")]
    StepUnderflow { at: f64, min_step: f64, last: Option<E> },
    #[error("exceeded {0} steps")]
    TooManySteps(usize),
    #[error("right-hand side failed at the initial point")]
    Rhs(E),
}

/// Verdict of the acceptance hook on a trial step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepControl {
    Accept,
    /// Discard the step and retry with half the step size.
    Reject,
    /// Keep the step and end the integration.
    Stop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Accepted nodes, starting with the initial point.
    pub s: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    /// True when the hook stopped the run before `s_end`.
    pub stopped: bool,
}

impl Solution {
    pub fn last(&self) -> (f64, &[f64]) {
        (*self.s.last().expect("non-empty"), self.y.last().expect("non-empty"))
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// One trial step; returns the 5th-order solution and the scaled error norm.
fn trial<E, F>(f: &mut F, s: f64, y: &[f64], h: f64, opts: &OdeOptions) -> Result<(Vec<f64>, f64), E>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
{
    let n = y.len();
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    f(s, y, &mut k[0])?;
    for stage in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(stage) {
                acc += A[stage][j] * kj[i];
            }
            tmp[i] = y[i] + h * acc;
        }
        f(s + C[stage] * h, &tmp, &mut k[stage])?;
    }
    let mut y5 = vec![0.0; n];
    let mut err = 0.0_f64;
    for i in 0..n {
        let mut hi = 0.0;
        let mut lo = 0.0;
        for st in 0..7 {
            hi += B5[st] * k[st][i];
            lo += B4[st] * k[st][i];
        }
        y5[i] = y[i] + h * hi;
        let scale = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
        let e = h * (hi - lo) / scale;
        err += e * e;
    }
    let err = (err / n.max(1) as f64).sqrt();
    if y5.iter().any(|v| !v.is_finite()) || !err.is_finite() {
        // Treated by the caller as a failed step.
        return Ok((y5, f64::INFINITY));
    }
    Ok((y5, err))
}

fn initial_step<E, F>(f: &mut F, s0: f64, y0: &[f64], span: f64, opts: &OdeOptions) -> Result<f64, E>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
{
    let mut d = vec![0.0; y0.len()];
    f(s0, y0, &mut d)?;
    let scale = |i: usize| opts.atol + opts.rtol * y0[i].abs();
    let d0 = (y0.iter().enumerate().map(|(i, v)| (v / scale(i)).powi(2)).sum::<f64>() / y0.len() as f64).sqrt();
    let d1 = (d.iter().enumerate().map(|(i, v)| (v / scale(i)).powi(2)).sum::<f64>() / y0.len() as f64).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    Ok(h.min(span.abs()).min(opts.max_step).max(opts.min_step))
}

/// Integrates `y' = f(s, y)` from `s0` to `s_end` (either direction).
///
/// A failing right-hand side is treated like a rejected step, so callers can
/// signal leaving a domain by returning an error from `f`.
pub fn integrate<E, F, H>(
    mut f: F,
    s0: f64,
    y0: &[f64],
    s_end: f64,
    opts: &OdeOptions,
    mut hook: H,
) -> Result<Solution, OdeError<E>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    H: FnMut(f64, &[f64]) -> StepControl,
{
    let mut sol = Solution { s: vec![s0], y: vec![y0.to_vec()], stopped: false };
    let span = s_end - s0;
    if span == 0.0 {
        return Ok(sol);
    }
    let dir = span.signum();
    let mut h = match opts.initial_step {
        Some(h) => h.abs().min(span.abs()),
        None => initial_step(&mut f, s0, y0, span, opts).map_err(OdeError::Rhs)?,
    };
    let (mut s, mut y) = (s0, y0.to_vec());
    let mut last_err: Option<E> = None;
    let mut steps = 0;
    while dir * (s_end - s) > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(OdeError::TooManySteps(opts.max_steps));
        }
        let remaining = (s_end - s).abs();
        let last_step = h >= remaining;
        let step = if last_step { remaining } else { h };
        let (y_new, err) = match trial(&mut f, s, &y, dir * step, opts) {
            Ok(r) => r,
            Err(e) => {
                last_err = Some(e);
                (Vec::new(), f64::INFINITY)
            }
        };
        if err > 1.0 {
            let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.5) } else { 0.5 };
            h = step * factor;
            if h < opts.min_step {
                return Err(OdeError::StepUnderflow { at: s, min_step: opts.min_step, last: last_err });
            }
            continue;
        }
        let s_new = if last_step { s_end } else { s + dir * step };
        match hook(s_new, &y_new) {
            StepControl::Reject => {
                h = 0.5 * step;
                if h < opts.min_step {
                    return Err(OdeError::StepUnderflow { at: s, min_step: opts.min_step, last: last_err });
                }
                continue;
            }
            control => {
                s = s_new;
                y = y_new;
                sol.s.push(s);
                sol.y.push(y.clone());
                if control == StepControl::Stop {
                    sol.stopped = true;
                    return Ok(sol);
                }
            }
        }
        let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (step * grow).min(opts.max_step).max(opts.min_step);
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_decay(_: f64, y: &[f64], d: &mut [f64]) -> Result<(), ()> {
        d[0] = -y[0];
        Ok(())
    }

    #[test]
    fn exponential_decay_is_accurate() {
        let sol = integrate(exp_decay, 0.0, &[1.0], 3.0, &OdeOptions::default(), |_, _| StepControl::Accept).unwrap();
        let (s, y) = sol.last();
        assert_eq!(s, 3.0);
        assert!((y[0] - (-3.0_f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn backwards_integration() {
        let sol = integrate(exp_decay, 1.0, &[1.0], -1.0, &OdeOptions::default(), |_, _| StepControl::Accept).unwrap();
        assert!((sol.last().1[0] - 2.0_f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator_conserves_energy() {
        let f = |_: f64, y: &[f64], d: &mut [f64]| -> Result<(), ()> {
            d[0] = y[1];
            d[1] = -y[0];
            Ok(())
        };
        let sol = integrate(f, 0.0, &[1.0, 0.0], 20.0, &OdeOptions::default(), |_, _| StepControl::Accept).unwrap();
        let y = sol.last().1;
        assert!((y[0] - 20.0_f64.cos()).abs() < 1e-8);
        assert!((y[1] + 20.0_f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn hook_brackets_a_sign_change() {
        // y = 1 - s crosses zero at s = 1; reject steps past it, stop close to it.
        let f = |_: f64, _: &[f64], d: &mut [f64]| -> Result<(), ()> {
            d[0] = -1.0;
            Ok(())
        };
        let sol = integrate(f, 0.0, &[1.0], 5.0, &OdeOptions::default(), |_, y| {
            if y[0] < 0.0 {
                StepControl::Reject
            } else if y[0] < 1e-10 {
                StepControl::Stop
            } else {
                StepControl::Accept
            }
        })
        .unwrap();
        assert!(sol.stopped);
        let (s, y) = sol.last();
        assert!(y[0] >= 0.0 && y[0] < 1e-10);
        assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rhs_failure_shrinks_the_step() {
        // sqrt(1 - s) is undefined past s = 1.
        let f = |s: f64, _: &[f64], d: &mut [f64]| -> Result<(), &'static str> {
            if s > 1.0 {
                return Err("outside");
            }
            d[0] = (1.0 - s).sqrt();
            Ok(())
        };
        let sol = integrate(f, 0.0, &[0.0], 1.0, &OdeOptions::default(), |_, _| StepControl::Accept).unwrap();
        assert!((sol.last().1[0] - 2.0 / 3.0).abs() < 1e-9);
        let err = integrate(f, 0.0, &[0.0], 2.0, &OdeOptions::default(), |_, _| StepControl::Accept).unwrap_err();
        assert!(matches!(err, OdeError::StepUnderflow { last: Some("outside"), .. }));
    }
}
