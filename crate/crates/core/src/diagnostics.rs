//! Criterion verdicts over `ρ`-grids, conservation monitoring along
//! integrated trajectories, and cross-validation of the reduced system
//! against the full equations of motion.
//!
//! Every verdict here is numerical: equality of the `bᵢ` is checked on a
//! finite grid of `ρ` values and the vanishing of the `cᵢ` to a tolerance.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::dynamics::{criterion_terms, FullSystem, ReducedSystem};
use crate::error::{Error, Result};
use crate::geometry::sigma_dot_unchecked;
use crate::geometry::CurvatureSign;
use crate::integrator::{
    integrate_adaptive, integrate_adaptive_projected, IntegrationSettings, Termination, Trajectory,
};
use crate::model::{embed, embed_unchecked, FullState, PolygonConfig, ReducedState};

pub const DEFAULT_TOL_B: f64 = 1e-10;
pub const DEFAULT_TOL_C: f64 = 1e-10;
pub const DEFAULT_GRID_POINTS: usize = 5;

/// Attached to every report: the grid verdict is evidence, not proof.
pub const VERDICT_NOTE: &str =
    "numerical verdict: b-equality and c-vanishing checked on a finite rho grid, not symbolically";

/// `count` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let mut grid: Vec<f64> = (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect();
            grid[0] = lo;
            grid[count - 1] = hi;
            grid
        }
    }
}

/// Five log-spaced points: `[0.1, 0.95]` on the sphere, `[0.1, 3]` on the hyperboloid.
pub fn default_rho_grid(sigma: CurvatureSign) -> Vec<f64> {
    match sigma {
        CurvatureSign::Positive => log_grid(0.1, 0.95, DEFAULT_GRID_POINTS),
        CurvatureSign::Negative => log_grid(0.1, 3.0, DEFAULT_GRID_POINTS),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailedCondition {
    BEquality,
    CVanishing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Admissible,
    Inadmissible { rho: f64, index: usize, condition: FailedCondition },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub rho_grid: Vec<f64>,
    /// `None` where the grid point is singular.
    pub b_spread_abs: Vec<Option<f64>>,
    pub b_spread_rel: Vec<Option<f64>>,
    pub c_max: Vec<Option<f64>>,
    pub tol_b: f64,
    pub tol_c: f64,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
    pub note: String,
}

impl CriterionReport {
    pub fn is_admissible(&self) -> bool {
        self.verdict == Verdict::Admissible
    }

    pub fn max_b_spread_rel(&self) -> f64 {
        self.b_spread_rel.iter().flatten().fold(0.0, |m, v| m.max(*v))
    }

    pub fn max_b_spread_abs(&self) -> f64 {
        self.b_spread_abs.iter().flatten().fold(0.0, |m, v| m.max(*v))
    }

    pub fn max_c(&self) -> f64 {
        self.c_max.iter().flatten().fold(0.0, |m, v| m.max(*v))
    }
}

/// Checks `b₁ = … = bₙ` (relative spread `≤ tol_b`) and `|cᵢ| ≤ tol_c` at
/// every grid point. Singular points are reported and skipped.
pub fn criterion_report(config: &PolygonConfig, rho_grid: &[f64], tol_b: f64, tol_c: f64) -> Result<CriterionReport> {
    if rho_grid.is_empty() {
        return Err(Error::Validation("rho grid is empty".into()));
    }
    let mut report = CriterionReport {
        rho_grid: rho_grid.to_vec(),
        b_spread_abs: Vec::with_capacity(rho_grid.len()),
        b_spread_rel: Vec::with_capacity(rho_grid.len()),
        c_max: Vec::with_capacity(rho_grid.len()),
        tol_b,
        tol_c,
        verdict: Verdict::Admissible,
        warnings: vec![],
        note: VERDICT_NOTE.into(),
    };
    let mut evaluated = 0;
    for &rho in rho_grid {
        let terms = match criterion_terms(config, rho) {
            Ok(t) => t,
            Err(e) => {
                report.warnings.push(format!("rho = {rho} skipped: {e}"));
                report.b_spread_abs.push(None);
                report.b_spread_rel.push(None);
                report.c_max.push(None);
                continue;
            }
        };
        evaluated += 1;
        let (spread_rel, c_max) = (terms.b_spread_rel(), terms.c_max());
        report.b_spread_abs.push(Some(terms.b_spread_abs()));
        report.b_spread_rel.push(Some(spread_rel));
        report.c_max.push(Some(c_max));
        if report.verdict != Verdict::Admissible {
            continue;
        }
        if !(spread_rel <= tol_b) {
            let mean = terms.b.iter().sum::<f64>() / terms.b.len() as f64;
            report.verdict = Verdict::Inadmissible {
                rho,
                index: argmax(terms.b.iter().map(|b| (b - mean).abs())),
                condition: FailedCondition::BEquality,
            };
        } else if !(c_max <= tol_c) {
            report.verdict = Verdict::Inadmissible {
                rho,
                index: argmax(terms.c.iter().map(|c| c.abs())),
                condition: FailedCondition::CVanishing,
            };
        }
    }
    if evaluated == 0 {
        return Err(Error::Validation(format!("every rho grid point is singular: {}", report.warnings.join("; "))));
    }
    Ok(report)
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    values.enumerate().fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best }).0
}

/// Largest deviation of the cyclic angle gaps from `2π/n`.
pub fn regularity_defect(beta: &[f64]) -> f64 {
    let n = beta.len();
    if n < 2 {
        return 0.0;
    }
    let mut wrapped: Vec<f64> = beta.iter().map(|b| b.rem_euclid(TAU)).collect();
    wrapped.sort_by(f64::total_cmp);
    let ideal = TAU / n as f64;
    let mut defect: f64 = 0.0;
    for i in 0..n {
        let gap = if i + 1 < n { wrapped[i + 1] - wrapped[i] } else { wrapped[0] + TAU - wrapped[n - 1] };
        defect = defect.max((gap - ideal).abs());
    }
    defect
}

/// Whether the angles, taken modulo `2π`, are equally spaced within `tol`.
pub fn is_regular_polygon(beta: &[f64], tol: f64) -> bool {
    beta.len() >= 2 && regularity_defect(beta) <= tol
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Full,
    Reduced,
}

/// Conserved quantities sampled along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationSeries {
    pub times: Vec<f64>,
    /// `ρ²θ̇`; on full runs recovered as `C₁₂ / Σmᵢ`.
    pub angular_momentum: Vec<f64>,
    /// Full runs only.
    pub wedge_c12: Option<Vec<f64>>,
    /// `maxᵢ |qᵢ⊙qᵢ − σ|` (full) or `|ρ² + Z⊙Z − σ|` (reduced).
    pub constraint_drift: Vec<f64>,
    /// `maxᵢ |qᵢ⊙q̇ᵢ|` (full) or `|ρρ̇ + Z⊙Ż|` (reduced).
    pub tangency_drift: Vec<f64>,
}

fn relative_drift(series: &[f64]) -> f64 {
    let Some(&first) = series.first() else { return 0.0 };
    let scale = if first != 0.0 { first.abs() } else { 1.0 };
    series.iter().map(|v| (v - first).abs() / scale).fold(0.0, f64::max)
}

impl ConservationSeries {
    /// `max |L(t) − L(0)| / |L(0)|`, absolute when `L(0) = 0`.
    pub fn angular_momentum_drift(&self) -> f64 {
        relative_drift(&self.angular_momentum)
    }

    pub fn wedge_c12_drift(&self) -> Option<f64> {
        self.wedge_c12.as_deref().map(relative_drift)
    }

    pub fn max_constraint_drift(&self) -> f64 {
        self.constraint_drift.iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn max_tangency_drift(&self) -> f64 {
        self.tangency_drift.iter().fold(0.0, |m, v| m.max(*v))
    }
}

pub fn conservation_series(
    trajectory: &Trajectory,
    kind: RunKind,
    config: &PolygonConfig,
) -> Result<ConservationSeries> {
    let sigma = config.sigma();
    let n = trajectory.len();
    let mut series = ConservationSeries {
        times: trajectory.times.clone(),
        angular_momentum: Vec::with_capacity(n),
        wedge_c12: None,
        constraint_drift: Vec::with_capacity(n),
        tangency_drift: Vec::with_capacity(n),
    };
    match kind {
        RunKind::Reduced => {
            for y in &trajectory.samples {
                let s = ReducedState::from_flat(y, config.z_dim())?;
                series.angular_momentum.push(s.angular_momentum());
                series.constraint_drift.push(s.constraint_residual(sigma).abs());
                series.tangency_drift.push(s.tangency_residual(sigma).abs());
            }
        }
        RunKind::Full => {
            let total = config.total_mass();
            let mut c12 = Vec::with_capacity(n);
            for y in &trajectory.samples {
                let f = FullState::from_flat(y, config.masses(), sigma, config.dim())?;
                let c = f.wedge_c12();
                c12.push(c);
                series.angular_momentum.push(c / total);
                series.constraint_drift.push(f.manifold_residual());
                series.tangency_drift.push(f.tangency_residual());
            }
            series.wedge_c12 = Some(c12);
        }
    }
    Ok(series)
}

/// Integrates the reduced system from `initial`.
pub fn simulate_reduced(
    config: &PolygonConfig,
    initial: &ReducedState,
    t_span: (f64, f64),
    settings: &IntegrationSettings,
    strict_b: bool,
) -> Result<Trajectory> {
    let system = ReducedSystem::new(config.clone()).strict(strict_b);
    integrate_adaptive(|_, y, dy| system.derivative(y, dy), &initial.to_flat(), t_span, settings)
}

/// Integrates the full equations of motion from `initial`, optionally
/// rescaling positions onto the manifold after every accepted step.
pub fn simulate_full(
    config: &PolygonConfig,
    initial: &FullState,
    t_span: (f64, f64),
    settings: &IntegrationSettings,
    project: bool,
) -> Result<Trajectory> {
    let system = FullSystem::from_config(config);
    let y0 = initial.to_flat();
    if project {
        integrate_adaptive_projected(|_, y, dy| system.derivative(y, dy), |y| system.project(y), &y0, t_span, settings)
    } else {
        integrate_adaptive(|_, y, dy| system.derivative(y, dy), &y0, t_span, settings)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CrossValidationOptions {
    /// Run even when the criterion fails.
    pub force: bool,
    pub strict_b: bool,
    pub project: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub max_position_deviation: f64,
    pub max_velocity_deviation: f64,
    /// Largest `|q̈_fd − full_rhs|` over interior samples of the embedded
    /// reduced trajectory.
    pub residual_max: f64,
    pub compared_samples: usize,
    pub reduced_termination: Termination,
    pub full_termination: Termination,
    pub off_criterion: bool,
}

impl CrossValidation {
    pub fn max_deviation(&self) -> f64 {
        self.max_position_deviation.max(self.max_velocity_deviation)
    }

    pub fn completed(&self) -> bool {
        self.reduced_termination.is_completed() && self.full_termination.is_completed()
    }
}

/// Integrates the reduced system and the full system from the embedding of
/// the same initial data, and measures how far apart they end up.
pub fn cross_validate(
    config: &PolygonConfig,
    initial: &ReducedState,
    t_span: (f64, f64),
    settings: &IntegrationSettings,
    options: CrossValidationOptions,
) -> Result<CrossValidation> {
    let report = criterion_report(config, &default_rho_grid(config.sigma()), DEFAULT_TOL_B, DEFAULT_TOL_C)?;
    if !report.is_admissible() && !options.force {
        return Err(Error::Criterion(format!("configuration is inadmissible: {:?}", report.verdict)));
    }
    let full0 = embed(initial, config)?;
    let reduced = simulate_reduced(config, initial, t_span, settings, options.strict_b)?;
    let full = simulate_full(config, &full0, t_span, settings, options.project)?;

    let zd = config.z_dim();
    let embedded: Vec<FullState> = reduced
        .samples
        .iter()
        .map(|y| ReducedState::from_flat(y, zd).map(|s| embed_unchecked(&s, config)))
        .collect::<Result<_>>()?;

    let (mut dev_q, mut dev_v, mut compared) = (0.0f64, 0.0f64, 0);
    for (i, (t, y)) in full.times.iter().zip(&full.samples).enumerate() {
        let Some(e) = embedded.get(i) else { break };
        if reduced.times[i] != *t {
            break;
        }
        let f = FullState::from_flat(y, config.masses(), config.sigma(), config.dim())?;
        for b in 0..config.n() {
            dev_q = dev_q.max(max_abs_diff(&f.positions[b], &e.positions[b]));
            dev_v = dev_v.max(max_abs_diff(&f.velocities[b], &e.velocities[b]));
        }
        compared += 1;
    }

    let residual_max = embedded_residual(config, &reduced.samples, options.strict_b)?;
    Ok(CrossValidation {
        max_position_deviation: dev_q,
        max_velocity_deviation: dev_v,
        residual_max,
        compared_samples: compared,
        reduced_termination: reduced.termination,
        full_termination: full.termination,
        off_criterion: !report.is_admissible(),
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Spacing of the local finite-difference stencil used for the residual.
pub const RESIDUAL_STEP: f64 = 1e-3;

/// Five-point central second differences of the embedded reduced solution
/// against the full right-hand side, at every sample except the first and
/// last. The stencil points come from short reduced integrations forward and
/// backward from each sample, so its accuracy does not depend on the sample
/// spacing.
fn embedded_residual(config: &PolygonConfig, samples: &[Vec<f64>], strict_b: bool) -> Result<f64> {
    let full = FullSystem::from_config(config);
    let reduced = ReducedSystem::new(config.clone()).strict(strict_b);
    let (n, k) = (config.n(), config.dim());
    let h = RESIDUAL_STEP;
    let local =
        IntegrationSettings { rel_tol: 1e-13, abs_tol: 1e-13, max_step: h, min_step: 1e-15, sample_interval: h };
    let mut acc = vec![0.0; n * k];
    let mut worst = 0.0f64;
    for y in samples.iter().skip(1).take(samples.len().saturating_sub(2)) {
        let ahead = integrate_adaptive(|_, y, dy| reduced.derivative(y, dy), y, (0.0, 2.0 * h), &local)?;
        let behind = integrate_adaptive(
            |_, y, dy| {
                reduced.derivative(y, dy)?;
                dy.iter_mut().for_each(|d| *d = -*d);
                Ok(())
            },
            y,
            (0.0, 2.0 * h),
            &local,
        )?;
        if ahead.len() != 3 || behind.len() != 3 {
            // The stencil runs into a singularity; no residual here.
            continue;
        }
        let stencil: Vec<FullState> = [&behind.samples[2], &behind.samples[1], y, &ahead.samples[1], &ahead.samples[2]]
            .into_iter()
            .map(|y| ReducedState::from_flat(y, config.z_dim()).map(|s| embed_unchecked(&s, config)))
            .collect::<Result<_>>()?;
        let flat = stencil[2].to_flat();
        let (pos, vel) = flat.split_at(n * k);
        full.accelerations(pos, vel, &mut acc)?;
        for b in 0..n {
            for c in 0..k {
                let q = |j: usize| stencil[j].positions[b][c];
                let fd = (-q(0) + 16.0 * q(1) - 30.0 * q(2) + 16.0 * q(3) - q(4)) / (12.0 * h * h);
                worst = worst.max((fd - acc[b * k + c]).abs());
            }
        }
    }
    Ok(worst)
}

/// `|ρ² + Z⊙Z − σ|` for a packed reduced sample.
pub fn reduced_constraint_drift(y: &[f64], config: &PolygonConfig) -> f64 {
    let zd = config.z_dim();
    let sigma = config.sigma();
    (y[0] * y[0] + sigma_dot_unchecked(&y[4..4 + zd], &y[4..4 + zd], sigma) - sigma.value()).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::relative_equilibrium_spin;
    use crate::model::{regular_polygon, synthesize_initial};
    use std::f64::consts::PI;

    use CurvatureSign::{Negative, Positive};

    #[test]
    fn regular_pentagon_admissible() {
        let c = regular_polygon(5, 0.0, vec![1.0; 5], Positive, 3).unwrap();
        let r = criterion_report(&c, &[0.3, 0.6, 0.9], DEFAULT_TOL_B, DEFAULT_TOL_C).unwrap();
        assert!(r.is_admissible());
        assert_eq!(r.note, VERDICT_NOTE);
    }

    #[test]
    fn perturbed_pentagon_inadmissible() {
        let c = regular_polygon(5, 0.0, vec![1.0; 5], Positive, 3).unwrap();
        let mut beta = c.beta().to_vec();
        beta[2] += 0.1;
        let p = PolygonConfig::new(vec![1.0; 5], beta, Positive, 3).unwrap();
        let r = criterion_report(&p, &[0.3, 0.6, 0.9], DEFAULT_TOL_B, DEFAULT_TOL_C).unwrap();
        match r.verdict {
            Verdict::Inadmissible { rho, condition, .. } => {
                assert_eq!(rho, 0.3);
                assert_eq!(condition, FailedCondition::BEquality);
            }
            Verdict::Admissible => panic!("perturbed pentagon passed"),
        }
        assert!(r.max_b_spread_abs() > 1e-6);
    }

    #[test]
    fn unequal_pair_ratio() {
        let c = PolygonConfig::new(vec![1.0, 2.0], vec![0.0, PI], Positive, 3).unwrap();
        let grid = default_rho_grid(Positive);
        let r = criterion_report(&c, &grid, DEFAULT_TOL_B, DEFAULT_TOL_C).unwrap();
        assert!(!r.is_admissible());
        for rho in grid {
            let t = criterion_terms(&c, rho).unwrap();
            assert!((t.b[0] / t.b[1] - 2.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn singular_grid_points_are_skipped() {
        let c = regular_polygon(2, 0.0, vec![1.0; 2], Positive, 3).unwrap();
        let r = criterion_report(&c, &[0.5, 1.0], DEFAULT_TOL_B, DEFAULT_TOL_C).unwrap();
        assert!(r.is_admissible());
        assert_eq!(r.warnings.len(), 1);
        assert_eq!(r.c_max[1], None);
        assert!(criterion_report(&c, &[1.0], DEFAULT_TOL_B, DEFAULT_TOL_C).is_err());
        assert!(criterion_report(&c, &[], DEFAULT_TOL_B, DEFAULT_TOL_C).is_err());
    }

    #[test]
    fn regular_detection() {
        assert!(is_regular_polygon(&[0.0, PI / 2.0, PI, 1.5 * PI], 1e-12));
        assert!(!is_regular_polygon(&[0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0 + 0.05], 1e-6));
        assert!(is_regular_polygon(&[0.5, 0.5 + PI], 1e-12));
        assert!(is_regular_polygon(&[3.0 * PI, 0.0], 1e-12));
        assert!(!is_regular_polygon(&[0.0], 1e-12));
    }

    #[test]
    fn grid_shapes() {
        let g = default_rho_grid(Negative);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 0.1).abs() < 1e-15 && (g[4] - 3.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn relative_equilibrium_series() {
        let c = regular_polygon(3, 0.0, vec![1.0; 3], Positive, 3).unwrap();
        let spin = relative_equilibrium_spin(&c, 0.8).unwrap();
        let s = synthesize_initial(&c, 0.8, 0.0, spin).unwrap();
        let tr = simulate_reduced(&c, &s, (0.0, 2.0), &IntegrationSettings::with_tol(1e-10), false).unwrap();
        let series = conservation_series(&tr, RunKind::Reduced, &c).unwrap();
        assert!(series.angular_momentum_drift() <= 1e-10);
        assert!(series.max_constraint_drift() <= 1e-12);
        assert!(series.wedge_c12.is_none());
        assert!(conservation_series(&tr, RunKind::Full, &c).is_err());
    }

    #[test]
    fn cross_validation_refuses_inadmissible() {
        let c = PolygonConfig::new(vec![1.0, 1.0, 1.0], vec![0.0, 2.0, 4.5], Positive, 3).unwrap();
        let s = synthesize_initial(&c, 0.8, 0.0, 1.0).unwrap();
        let settings = IntegrationSettings::with_tol(1e-8);
        let err = cross_validate(&c, &s, (0.0, 0.5), &settings, CrossValidationOptions::default());
        assert!(matches!(err, Err(Error::Criterion(_))));
    }
}
