//! Explicit Runge–Kutta integration with sampled output.
//!
//! Both integrators land exactly on every sample instant `t₀ + i·Δ`, so the
//! recorded samples are integrator nodes rather than interpolants. A
//! right-hand side that reports a [`Singularity`](crate::Singularity) stops
//! the run; the adaptive integrator first retries with halved steps down to
//! `min_step`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How an integration ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Singularity { time: f64, description: String },
    StepCollapse { time: f64, step: f64 },
}

impl Termination {
    pub fn is_completed(&self) -> bool {
        matches!(self, Self::Completed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        Some((*self.times.last()?, self.samples.last()?.as_slice()))
    }

    fn push(&mut self, t: f64, y: &[f64]) {
        if self.times.last().is_some_and(|last| t <= *last) {
            return;
        }
        self.times.push(t);
        self.samples.push(y.to_vec());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub sample_interval: f64,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-10, max_step: 0.1, min_step: 1e-12, sample_interval: 0.05 }
    }
}

impl IntegrationSettings {
    /// Default settings with both tolerances set to `tol`.
    pub fn with_tol(tol: f64) -> Self {
        Self { rel_tol: tol, abs_tol: tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("min_step", self.min_step),
            ("sample_interval", self.sample_interval),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive, got {value}")));
            }
        }
        if self.min_step >= self.max_step {
            return Err(Error::Validation(format!(
                "min_step {} must be below max_step {}",
                self.min_step, self.max_step
            )));
        }
        Ok(())
    }
}

/// Sample instants `t₀ + iΔ`, always ending at `t₁`.
fn sample_times(t0: f64, t1: f64, interval: f64) -> Vec<f64> {
    let count = ((t1 - t0) / interval).floor() as usize;
    let mut times: Vec<f64> = (0..=count).map(|i| t0 + i as f64 * interval).collect();
    let last = *times.last().expect("at least t0");
    if t1 - last <= 1e-9 * interval {
        *times.last_mut().expect("non-empty") = t1;
    } else {
        times.push(t1);
    }
    if times.len() > 1 && times[0] == times[1] {
        times.remove(0);
    }
    times
}

fn check_span(t_span: (f64, f64), sample_interval: f64) -> Result<()> {
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::Validation(format!("time span ({t0}, {t1}) must be increasing")));
    }
    if !(sample_interval.is_finite() && sample_interval > 0.0) {
        return Err(Error::Validation(format!("sample interval must be positive, got {sample_interval}")));
    }
    Ok(())
}

/// Step toward `target`, absorbing a remainder too small to be its own step.
fn clamp_step(h: f64, t: f64, target: f64) -> (f64, bool) {
    let remaining = target - t;
    if remaining <= h * (1.0 + 1e-6) {
        (remaining, true)
    } else {
        (h, false)
    }
}

/// Classical fourth-order Runge–Kutta with a fixed step.
pub fn integrate_fixed_rk4<F>(
    mut rhs: F,
    y0: &[f64],
    t_span: (f64, f64),
    step: f64,
    sample_interval: f64,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    check_span(t_span, sample_interval)?;
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Validation(format!("step must be positive, got {step}")));
    }
    let dim = y0.len();
    let targets = sample_times(t_span.0, t_span.1, sample_interval);
    let mut traj = Trajectory { times: vec![], samples: vec![], termination: Termination::Completed };
    let mut t = t_span.0;
    let mut y = y0.to_vec();
    traj.push(t, &y);

    let mut k = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    let mut tmp = vec![0.0; dim];
    for &target in targets.iter().skip(1) {
        while t < target {
            let (h, hit) = clamp_step(step, t, target);
            let stages = (|| -> Result<()> {
                rhs(t, &y, &mut k[0])?;
                for (o, (yi, ki)) in tmp.iter_mut().zip(y.iter().zip(&k[0])) {
                    *o = yi + 0.5 * h * ki;
                }
                rhs(t + 0.5 * h, &tmp, &mut k[1])?;
                for (o, (yi, ki)) in tmp.iter_mut().zip(y.iter().zip(&k[1])) {
                    *o = yi + 0.5 * h * ki;
                }
                rhs(t + 0.5 * h, &tmp, &mut k[2])?;
                for (o, (yi, ki)) in tmp.iter_mut().zip(y.iter().zip(&k[2])) {
                    *o = yi + h * ki;
                }
                rhs(t + h, &tmp, &mut k[3])
            })();
            if let Err(e) = stages {
                traj.push(t, &y);
                traj.termination = Termination::Singularity { time: t, description: e.to_string() };
                return Ok(traj);
            }
            for i in 0..dim {
                tmp[i] = y[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
            }
            if tmp.iter().any(|v| !v.is_finite()) {
                traj.push(t, &y);
                traj.termination = Termination::Singularity { time: t, description: "non-finite state".into() };
                return Ok(traj);
            }
            y.copy_from_slice(&tmp);
            t = if hit { target } else { t + h };
        }
        traj.push(t, &y);
    }
    Ok(traj)
}

// Dormand–Prince 5(4) tableau.
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
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] =
    [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Adaptive Dormand–Prince 5(4) integration.
pub fn integrate_adaptive<F>(
    rhs: F,
    y0: &[f64],
    t_span: (f64, f64),
    settings: &IntegrationSettings,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    integrate_adaptive_projected(rhs, |_: &mut [f64]| {}, y0, t_span, settings)
}

/// As [`integrate_adaptive`], applying `project` to every accepted state.
pub fn integrate_adaptive_projected<F, P>(
    mut rhs: F,
    mut project: P,
    y0: &[f64],
    t_span: (f64, f64),
    settings: &IntegrationSettings,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    P: FnMut(&mut [f64]),
{
    settings.validate()?;
    check_span(t_span, settings.sample_interval)?;
    let dim = y0.len();
    let targets = sample_times(t_span.0, t_span.1, settings.sample_interval);
    let mut traj = Trajectory { times: vec![], samples: vec![], termination: Termination::Completed };
    let mut t = t_span.0;
    let mut y = y0.to_vec();
    traj.push(t, &y);

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    if let Err(e) = rhs(t, &y, &mut k[0]) {
        traj.termination = Termination::Singularity { time: t, description: e.to_string() };
        return Ok(traj);
    }
    let mut h = initial_step(&mut rhs, t, &y, &k[0], settings);
    let mut stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];

    for &target in targets.iter().skip(1) {
        while t < target {
            let (h_try, hit) = clamp_step(h.min(settings.max_step), t, target);

            let mut failure = None;
            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = 0.0;
                    for (j, a) in A[s][..s].iter().enumerate() {
                        acc += a * k[j][i];
                    }
                    stage[i] = y[i] + h_try * acc;
                }
                if let Err(e) = rhs(t + C[s] * h_try, &stage, &mut k[s]) {
                    failure = Some(e);
                    break;
                }
            }
            if let Some(e) = failure {
                let fatal = !matches!(e, Error::Singularity(_));
                h = 0.5 * h_try;
                if fatal || h < settings.min_step {
                    traj.push(t, &y);
                    traj.termination = Termination::Singularity { time: t, description: e.to_string() };
                    return Ok(traj);
                }
                continue;
            }
            // Stage 7 is evaluated at the fifth-order solution.
            y_new.copy_from_slice(&stage);

            let mut err = 0.0f64;
            for i in 0..dim {
                let mut e = 0.0;
                for (j, w) in E.iter().enumerate() {
                    e += w * k[j][i];
                }
                let scale = settings.abs_tol + settings.rel_tol * y[i].abs().max(y_new[i].abs());
                err = err.max((h_try * e).abs() / scale);
            }
            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                h = FAC_MIN * h_try;
                if h < settings.min_step {
                    traj.push(t, &y);
                    traj.termination = Termination::StepCollapse { time: t, step: h };
                    return Ok(traj);
                }
                continue;
            }

            let fac = if err == 0.0 { FAC_MAX } else { (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, FAC_MAX) };
            if err <= 1.0 {
                t = if hit { target } else { t + h_try };
                std::mem::swap(&mut y, &mut y_new);
                project(&mut y);
                let last = k.pop().expect("seven stages");
                k.insert(0, last);
                if let Err(e) = rhs(t, &y, &mut k[0]) {
                    traj.push(t, &y);
                    traj.termination = Termination::Singularity { time: t, description: e.to_string() };
                    return Ok(traj);
                }
                let proposed = h_try * fac;
                h = if hit { proposed.max(h) } else { proposed };
            } else {
                h = h_try * fac.min(1.0);
                if h < settings.min_step {
                    traj.push(t, &y);
                    traj.termination = Termination::StepCollapse { time: t, step: h };
                    return Ok(traj);
                }
            }
        }
        traj.push(t, &y);
    }
    Ok(traj)
}

/// Starting step from the local scale of `y` and its first two derivatives.
fn initial_step<F>(rhs: &mut F, t: f64, y: &[f64], f0: &[f64], settings: &IntegrationSettings) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let dim = y.len().max(1) as f64;
    let scale = |i: usize| settings.abs_tol + settings.rel_tol * y[i].abs();
    let rms = |v: &dyn Fn(usize) -> f64| ((0..y.len()).map(|i| v(i).powi(2)).sum::<f64>() / dim).sqrt();
    let d0 = rms(&|i| y[i] / scale(i));
    let d1 = rms(&|i| f0[i] / scale(i));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(settings.max_step);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    if rhs(t + h0, &y1, &mut f1).is_err() {
        return h0.max(settings.min_step);
    }
    let d2 = rms(&|i| (f1[i] - f0[i]) / scale(i)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(settings.max_step).max(settings.min_step)
}
