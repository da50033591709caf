//! Right-hand sides of the full equations of motion on the manifold and of
//! the reduced `(ρ, θ, Z)` system, plus the criterion sums `bᵢ` and `cᵢ`.
//!
//! The pairwise denominator is `D = σ(1 − (qᵢ⊙qⱼ)²)`. With
//! `u = ρ²(1 − cos Δ)` this reduces to `u(2 − σu)` for either sign of the
//! curvature, which is the form the reduced system is built on.

use serde::Serialize;

use crate::error::{check_len, Error, Result, Singularity};
use crate::geometry::{sigma_dot_unchecked, AmbientVector, CurvatureSign};
use crate::model::{half_angle_sin, FullState, PolygonConfig, ReducedState, COLLISION_EPS};

/// Relative spread of the `bᵢ` tolerated by strict mode.
pub const STRICT_B_TOL: f64 = 1e-10;

/// `qᵢ⊙qⱼ = σ − ρ²(1 − cos Δ)` for two bodies of a rotopulsating state.
pub fn pair_inner(rho: f64, delta: f64, sigma: CurvatureSign) -> f64 {
    sigma.value() - rho * rho * one_minus_cos(delta)
}

/// `1 − cos Δ`, evaluated as `2 sin²(Δ/2)` to keep precision for close pairs.
#[inline]
pub(crate) fn one_minus_cos(delta: f64) -> f64 {
    let s = half_angle_sin(delta);
    2.0 * s * s
}

/// Per-body criterion sums at one value of `ρ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionTerms {
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub rho: f64,
}

impl CriterionTerms {
    /// `maxᵢⱼ |bᵢ − bⱼ|`.
    pub fn b_spread_abs(&self) -> f64 {
        let (lo, hi) = self.b.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| (lo.min(*b), hi.max(*b)));
        hi - lo
    }

    /// `maxᵢⱼ |bᵢ − bⱼ| / maxᵢ |bᵢ|`.
    pub fn b_spread_rel(&self) -> f64 {
        let scale = self.b.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        self.b_spread_abs() / scale
    }

    pub fn c_max(&self) -> f64 {
        self.c.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }
}

struct PairFactors {
    /// `(1 − cos Δ)^{−1/2} (2 − σρ²(1 − cos Δ))^{−3/2}`
    b: f64,
    /// `sin Δ (1 − cos Δ)^{−3/2} (2 − σρ²(1 − cos Δ))^{−3/2}`
    c: f64,
}

fn pair_factors(config: &PolygonConfig, rho: f64, i: usize, j: usize) -> Result<PairFactors> {
    let delta = config.beta()[i] - config.beta()[j];
    if half_angle_sin(delta).abs() <= COLLISION_EPS {
        return Err(Singularity::Collision { i, j }.into());
    }
    let gap = one_minus_cos(delta);
    let w = 2.0 - config.sigma().value() * rho * rho * gap;
    if !(w > 0.0) {
        return Err(Singularity::Antipodal { i, j }.into());
    }
    let w32 = w * w.sqrt();
    let b = 1.0 / (gap.sqrt() * w32);
    let c = delta.sin() / (gap * gap.sqrt() * w32);
    if !(b.is_finite() && c.is_finite()) {
        return Err(Singularity::Antipodal { i, j }.into());
    }
    Ok(PairFactors { b, c })
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > 0.0 {
        Ok(())
    } else {
        Err(Singularity::ZeroSize { rho }.into())
    }
}

/// `bᵢ` for a single body, summing companions in ascending index order.
pub fn b_single(config: &PolygonConfig, rho: f64, i: usize) -> Result<f64> {
    check_rho(rho)?;
    let mut b = 0.0;
    for j in (0..config.n()).filter(|&j| j != i) {
        b += config.masses()[j] * pair_factors(config, rho, i, j)?.b;
    }
    Ok(b)
}

/// Evaluates every `bᵢ` and `cᵢ` at `ρ`.
pub fn criterion_terms(config: &PolygonConfig, rho: f64) -> Result<CriterionTerms> {
    check_rho(rho)?;
    let n = config.n();
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let f = pair_factors(config, rho, i, j)?;
            let m = config.masses()[j];
            b[i] += m * f.b;
            c[i] += m * f.c;
        }
    }
    Ok(CriterionTerms { b, c, rho })
}

/// The full equations of motion for `n` bodies on `q⊙q = σ` in `R^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullSystem {
    masses: Vec<f64>,
    sigma: CurvatureSign,
    dim: usize,
}

impl FullSystem {
    pub fn new(masses: Vec<f64>, sigma: CurvatureSign, dim: usize) -> Self {
        Self { masses, sigma, dim }
    }

    pub fn from_config(config: &PolygonConfig) -> Self {
        Self::new(config.masses().to_vec(), config.sigma(), config.dim())
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn sigma(&self) -> CurvatureSign {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length of the packed state `(positions…, velocities…)`.
    pub fn state_len(&self) -> usize {
        2 * self.masses.len() * self.dim
    }

    /// Writes `q̈ᵢ` for every body into `out`, all slices packed body-major.
    pub fn accelerations(&self, positions: &[f64], velocities: &[f64], out: &mut [f64]) -> Result<()> {
        let (n, k, sigma) = (self.masses.len(), self.dim, self.sigma);
        check_len(n * k, positions.len())?;
        check_len(n * k, velocities.len())?;
        check_len(n * k, out.len())?;
        let s = sigma.value();
        for i in 0..n {
            let qi = &positions[i * k..(i + 1) * k];
            let vi = &velocities[i * k..(i + 1) * k];
            let acc = &mut out[i * k..(i + 1) * k];
            let speed = sigma_dot_unchecked(vi, vi, sigma);
            for (a, q) in acc.iter_mut().zip(qi) {
                *a = -s * speed * q;
            }
            for j in (0..n).filter(|&j| j != i) {
                let qj = &positions[j * k..(j + 1) * k];
                let x = sigma_dot_unchecked(qi, qj, sigma);
                let d = s * (1.0 - x) * (1.0 + x);
                if !(d > 0.0) {
                    let err = if sigma == CurvatureSign::Positive && x < 0.0 {
                        Singularity::Antipodal { i, j }
                    } else {
                        Singularity::Collision { i, j }
                    };
                    return Err(err.into());
                }
                let weight = self.masses[j] / (d * d.sqrt());
                let along = s * x;
                for ((a, pj), pi) in acc.iter_mut().zip(qj).zip(qi) {
                    *a += weight * (pj - along * pi);
                }
            }
            if acc.iter().any(|a| !a.is_finite()) {
                return Err(Singularity::Other(format!("non-finite acceleration on body {i}")).into());
            }
        }
        Ok(())
    }

    /// `ẏ = f(y)` on the packed state.
    pub fn derivative(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        check_len(self.state_len(), y.len())?;
        check_len(self.state_len(), dy.len())?;
        let half = y.len() / 2;
        let (pos, vel) = y.split_at(half);
        let (dpos, dvel) = dy.split_at_mut(half);
        dpos.copy_from_slice(vel);
        self.accelerations(pos, vel, dvel)
    }

    /// Rescales each position back onto `q⊙q = σ`. Velocities are left alone.
    pub fn project(&self, y: &mut [f64]) {
        let k = self.dim;
        let half = self.masses.len() * k;
        for q in y[..half].chunks_mut(k) {
            let ratio = sigma_dot_unchecked(q, q, self.sigma) * self.sigma.value();
            if ratio > 0.0 {
                let scale = ratio.sqrt().recip();
                q.iter_mut().for_each(|x| *x *= scale);
            }
        }
    }
}

/// `q̈ᵢ` for every body of `state`.
pub fn full_rhs(state: &FullState) -> Result<Vec<AmbientVector>> {
    let n = state.n();
    check_len(n, state.masses.len())?;
    check_len(n, state.velocities.len())?;
    let k = state.dim();
    for (q, v) in state.positions.iter().zip(&state.velocities) {
        check_len(k, q.len())?;
        check_len(k, v.len())?;
    }
    let system = FullSystem::new(state.masses.clone(), state.sigma, k);
    let flat = state.to_flat();
    let (pos, vel) = flat.split_at(n * k);
    let mut acc = vec![0.0; n * k];
    system.accelerations(pos, vel, &mut acc)?;
    Ok(acc.chunks(k.max(1)).map(|c| AmbientVector::new(c.to_vec())).collect())
}

/// Time derivative of a [`ReducedState`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedDerivative {
    pub rho_dot: f64,
    pub rho_ddot: f64,
    pub theta_dot: f64,
    pub theta_ddot: f64,
    pub z_dot: Vec<f64>,
    pub z_ddot: Vec<f64>,
}

/// The reduced system for a polygonal configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    config: PolygonConfig,
    strict_b: bool,
}

impl ReducedSystem {
    pub fn new(config: PolygonConfig) -> Self {
        Self { config, strict_b: false }
    }

    /// Recompute every `bᵢ` at each evaluation and fail once their relative
    /// spread exceeds [`STRICT_B_TOL`].
    pub fn strict(mut self, strict_b: bool) -> Self {
        self.strict_b = strict_b;
        self
    }

    pub fn config(&self) -> &PolygonConfig {
        &self.config
    }

    pub fn state_len(&self) -> usize {
        4 + 2 * self.config.z_dim()
    }

    fn b(&self, rho: f64) -> Result<f64> {
        if !self.strict_b {
            return b_single(&self.config, rho, 0);
        }
        let terms = criterion_terms(&self.config, rho)?;
        let spread = terms.b_spread_rel();
        if spread > STRICT_B_TOL {
            return Err(Error::Criterion(format!("b spread {spread:e} at rho = {rho:e} exceeds {STRICT_B_TOL:e}")));
        }
        Ok(terms.b[0])
    }

    /// `ẏ = f(y)` on the packed state `(ρ, ρ̇, θ, θ̇, Z…, Ż…)`.
    pub fn derivative(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        check_len(self.state_len(), y.len())?;
        check_len(self.state_len(), dy.len())?;
        let zd = self.config.z_dim();
        let sigma = self.config.sigma();
        let s = sigma.value();
        let (rho, rho_dot, theta_dot) = (y[0], y[1], y[3]);
        check_rho(rho)?;
        let z = &y[4..4 + zd];
        let z_dot = &y[4 + zd..];
        let b = self.b(rho)?;

        let zdz = sigma_dot_unchecked(z_dot, z_dot, sigma);
        let spin_sq = theta_dot * theta_dot;
        let kinetic = rho_dot * rho_dot + rho * rho * spin_sq + zdz;

        dy[0] = rho_dot;
        dy[1] = rho * spin_sq - s * rho * kinetic + (s - 1.0 / (rho * rho)) * b;
        dy[2] = theta_dot;
        dy[3] = -2.0 * rho_dot * theta_dot / rho;
        let z_coeff = s * b / rho - s * kinetic;
        dy[4..4 + zd].copy_from_slice(z_dot);
        for (out, zi) in dy[4 + zd..].iter_mut().zip(z) {
            *out = z_coeff * zi;
        }
        if dy.iter().any(|v| !v.is_finite()) {
            return Err(Singularity::Other(format!("non-finite reduced derivative at rho = {rho:e}")).into());
        }
        Ok(())
    }
}

/// Derivative of `state` under the reduced system, using `b₁` for `b`.
pub fn reduced_rhs(state: &ReducedState, config: &PolygonConfig) -> Result<ReducedDerivative> {
    let system = ReducedSystem::new(config.clone());
    let zd = config.z_dim();
    check_len(zd, state.z.len())?;
    check_len(zd, state.z_dot.len())?;
    let y = state.to_flat();
    let mut dy = vec![0.0; y.len()];
    system.derivative(&y, &mut dy)?;
    Ok(ReducedDerivative {
        rho_dot: dy[0],
        rho_ddot: dy[1],
        theta_dot: dy[2],
        theta_ddot: dy[3],
        z_dot: dy[4..4 + zd].to_vec(),
        z_ddot: dy[4 + zd..].to_vec(),
    })
}

/// `θ̇` that holds `ρ` fixed: `θ̇² = b(ρ)/ρ³`.
pub fn relative_equilibrium_spin(config: &PolygonConfig, rho: f64) -> Result<f64> {
    let b = b_single(config, rho, 0)?;
    Ok((b / (rho * rho * rho)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{embed, regular_polygon, synthesize_initial};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    use CurvatureSign::{Negative, Positive};

    /// Direct transcription of the criterion sums using `1 − cos Δ` as written.
    fn oracle_terms(masses: &[f64], beta: &[f64], sigma: f64, rho: f64) -> (Vec<f64>, Vec<f64>) {
        let n = masses.len();
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = beta[i] - beta[j];
                let g = 1.0 - d.cos();
                let w = 2.0 - sigma * rho * rho * g;
                b[i] += masses[j] * g.powf(-0.5) / w.powf(1.5);
                c[i] += masses[j] * d.sin() / (g.powf(1.5) * w.powf(1.5));
            }
        }
        (b, c)
    }

    #[test]
    fn pair_inner_examples() {
        assert_eq!(pair_inner(0.7, 0.0, Positive), 1.0);
        assert_eq!(pair_inner(0.7, 0.0, Negative), -1.0);
        assert!((pair_inner(1.0, PI, Positive) + 1.0).abs() < 1e-15);
        assert!((pair_inner(0.5, FRAC_PI_2, Negative) + 1.25).abs() < 1e-15);
    }

    #[test]
    fn two_body_terms() {
        let c = regular_polygon(2, 0.0, vec![1.0; 2], Positive, 3).unwrap();
        let t = criterion_terms(&c, 0.5).unwrap();
        let (ob, _) = oracle_terms(&[1.0, 1.0], &[0.0, PI], 1.0, 0.5);
        let expected = 2f64.powf(-0.5) / 1.5f64.powf(1.5);
        assert!((ob[0] - expected).abs() < 1e-15);
        assert!((t.b[0] - expected).abs() < 1e-15 && (t.b[1] - expected).abs() < 1e-15);
        assert!((t.b[0] - 0.384900).abs() < 1e-6);
        assert!(t.c_max() < 1e-15);
    }

    #[test]
    fn unequal_triangle_c_matches_oracle() {
        let masses = [1.0, 1.0, 2.0];
        let beta = [0.0, TAU / 3.0, 2.0 * TAU / 3.0];
        let config = PolygonConfig::new(masses.to_vec(), beta.to_vec(), Positive, 3).unwrap();
        let t = criterion_terms(&config, 0.5).unwrap();
        let (ob, oc) = oracle_terms(&masses, &beta, 1.0, 0.5);
        for i in 0..3 {
            assert!((t.b[i] - ob[i]).abs() <= 1e-14 * ob[i]);
            assert!((t.c[i] - oc[i]).abs() <= 1e-13);
        }
        // Frozen oracle value for c₁.
        assert!((oc[0] - 0.2275693112718885).abs() < 1e-12, "{}", oc[0]);
        assert!(t.c[0].abs() > 0.1);
    }

    #[test]
    fn regular_triangle_terms_balance() {
        for sigma in CurvatureSign::both() {
            let c = regular_polygon(3, 0.2, vec![1.0; 3], sigma, 3).unwrap();
            let t = criterion_terms(&c, 0.7).unwrap();
            assert!(t.b_spread_rel() < 1e-15 * 10.0);
            assert!(t.c_max() < 1e-14);
        }
    }

    #[test]
    fn singular_terms_are_typed() {
        let c = regular_polygon(2, 0.0, vec![1.0; 2], Positive, 3).unwrap();
        assert!(matches!(criterion_terms(&c, 1.0), Err(Error::Singularity(Singularity::Antipodal { .. }))));
        assert!(matches!(criterion_terms(&c, 0.0), Err(Error::Singularity(Singularity::ZeroSize { .. }))));
        // The hyperboloid has no antipodal degeneracy.
        assert!(criterion_terms(&c.with_sigma(Negative), 1.0).is_ok());
    }

    #[test]
    fn full_rhs_mirror_symmetry() {
        let positions = vec![
            AmbientVector::from([0.6, 0.3, (1.0f64 - 0.45).sqrt()]),
            AmbientVector::from([0.6, -0.3, (1.0f64 - 0.45).sqrt()]),
        ];
        let velocities = vec![AmbientVector::from([0.1, 0.2, -0.0]), AmbientVector::from([0.1, -0.2, 0.0])];
        let mut velocities = velocities;
        for (q, v) in positions.iter().zip(velocities.iter_mut()) {
            // make tangent: adjust last component
            v[2] = -(q[0] * v[0] + q[1] * v[1]) / q[2];
        }
        let state = FullState { positions, velocities, masses: vec![1.0, 1.0], sigma: Positive };
        let acc = full_rhs(&state).unwrap();
        assert!((acc[0][0] - acc[1][0]).abs() < 1e-12);
        assert!((acc[0][1] + acc[1][1]).abs() < 1e-12);
        assert!((acc[0][2] - acc[1][2]).abs() < 1e-12);
    }

    #[test]
    fn full_rhs_singularities() {
        let q = AmbientVector::from([0.0, 0.0, 1.0]);
        let state = FullState {
            positions: vec![q.clone(), q],
            velocities: vec![AmbientVector::zeros(3), AmbientVector::zeros(3)],
            masses: vec![1.0, 1.0],
            sigma: Positive,
        };
        assert!(matches!(full_rhs(&state), Err(Error::Singularity(Singularity::Collision { i: 0, j: 1 }))));
        let state = FullState {
            positions: vec![AmbientVector::from([1.0, 0.0, 0.0]), AmbientVector::from([-1.0, 0.0, 0.0])],
            velocities: vec![AmbientVector::zeros(3), AmbientVector::zeros(3)],
            masses: vec![1.0, 1.0],
            sigma: Positive,
        };
        assert!(matches!(full_rhs(&state), Err(Error::Singularity(Singularity::Antipodal { .. }))));
    }

    #[test]
    fn relative_equilibrium_is_fixed() {
        for (sigma, rho) in [(Positive, 0.8), (Negative, 0.6), (Negative, 2.5)] {
            let c = regular_polygon(4, 0.0, vec![1.0; 4], sigma, 4).unwrap();
            let spin = relative_equilibrium_spin(&c, rho).unwrap();
            let s = synthesize_initial(&c, rho, 0.0, spin).unwrap();
            let d = reduced_rhs(&s, &c).unwrap();
            assert!(d.rho_ddot.abs() <= 1e-12, "{}", d.rho_ddot);
            assert!(d.z_ddot.iter().all(|z| z.abs() <= 1e-12));
            assert_eq!(d.theta_ddot, 0.0);
        }
    }

    #[test]
    fn pure_attraction_shrinks() {
        let c = regular_polygon(3, 0.0, vec![1.0; 3], Positive, 3).unwrap();
        let s = synthesize_initial(&c, 0.8, 0.0, 0.0).unwrap();
        let d = reduced_rhs(&s, &c).unwrap();
        let b = b_single(&c, 0.8, 0).unwrap();
        assert!((d.rho_ddot - (1.0 - 1.0 / 0.64) * b).abs() < 1e-14);
        assert!(d.rho_ddot < 0.0);
    }

    #[test]
    fn angular_momentum_rate_vanishes() {
        let c = regular_polygon(5, 0.0, vec![1.0; 5], Negative, 3).unwrap();
        let s = synthesize_initial(&c, 1.3, -0.4, 0.9).unwrap();
        let d = reduced_rhs(&s, &c).unwrap();
        let rate = 2.0 * s.rho * s.rho_dot * s.theta_dot + s.rho * s.rho * d.theta_ddot;
        assert!(rate.abs() < 1e-15);
    }

    #[test]
    fn constraint_second_derivative_vanishes() {
        for sigma in CurvatureSign::both() {
            let c = regular_polygon(3, 0.0, vec![1.0; 3], sigma, 4).unwrap();
            let s = synthesize_initial(&c, 0.55, 0.3, 1.1).unwrap();
            let d = reduced_rhs(&s, &c).unwrap();
            let zz = sigma_dot_unchecked(&s.z_dot, &s.z_dot, sigma) + sigma_dot_unchecked(&s.z, &d.z_ddot, sigma);
            let second = 2.0 * (s.rho_dot * s.rho_dot + s.rho * d.rho_ddot + zz);
            assert!(second.abs() < 1e-12, "{second}");
        }
    }

    #[test]
    fn strict_mode_rejects_unequal_b() {
        let config = PolygonConfig::new(vec![1.0, 2.0], vec![0.0, PI], Positive, 3).unwrap();
        let s = synthesize_initial(&config, 0.5, 0.0, 1.0).unwrap();
        let sys = ReducedSystem::new(config.clone()).strict(true);
        let mut dy = vec![0.0; sys.state_len()];
        assert!(matches!(sys.derivative(&s.to_flat(), &mut dy), Err(Error::Criterion(_))));
        assert!(ReducedSystem::new(config).derivative(&s.to_flat(), &mut dy).is_ok());
    }

    #[test]
    fn pair_inner_rate_matches_embedding() {
        for sigma in CurvatureSign::both() {
            let c = regular_polygon(4, 0.3, vec![1.0; 4], sigma, 3).unwrap();
            let s = synthesize_initial(&c, 0.6, 0.25, 0.8).unwrap();
            let f = embed(&s, &c).unwrap();
            let h = 1e-5;
            for (i, j) in [(0, 1), (0, 2), (1, 3)] {
                let delta = c.beta()[i] - c.beta()[j];
                let fd = (pair_inner(s.rho + s.rho_dot * h, delta, sigma)
                    - pair_inner(s.rho - s.rho_dot * h, delta, sigma))
                    / (2.0 * h);
                let exact = sigma_dot_unchecked(&f.velocities[i], &f.positions[j], sigma)
                    + sigma_dot_unchecked(&f.positions[i], &f.velocities[j], sigma);
                assert!((fd - exact).abs() < 1e-6, "{fd} vs {exact}");
                let x = sigma_dot_unchecked(&f.positions[i], &f.positions[j], sigma);
                assert!((x - pair_inner(s.rho, delta, sigma)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn two_body_b_ratio() {
        for sigma in CurvatureSign::both() {
            let config = PolygonConfig::new(vec![1.0, 2.0], vec![0.3, 0.3 + 2.0], sigma, 3).unwrap();
            for rho in [0.2, 0.5, 0.9] {
                let t = criterion_terms(&config, rho).unwrap();
                assert!((t.b[0] / 2.0 - t.b[1] / 1.0).abs() <= 1e-14 * t.b[1]);
            }
        }
    }

    /// Random valid full state: points on the manifold with tangent velocities.
    fn random_state() -> impl Strategy<Value = FullState> {
        (2usize..6, 3usize..5, any::<bool>()).prop_flat_map(|(n, k, neg)| {
            let body = (prop::collection::vec(-1.5..1.5f64, k), prop::collection::vec(-1.0..1.0f64, k), 0.1..3.0f64);
            prop::collection::vec(body, n).prop_map(move |bodies| {
                let sigma = if neg { Negative } else { Positive };
                let mut positions = Vec::new();
                let mut velocities = Vec::new();
                let mut masses = Vec::new();
                for (mut q, mut v, m) in bodies {
                    match sigma {
                        Positive => {
                            let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
                            q.iter_mut().for_each(|x| *x /= norm);
                        }
                        Negative => {
                            let head: f64 = q[..k - 1].iter().map(|x| x * x).sum();
                            q[k - 1] = (1.0 + head).sqrt();
                        }
                    }
                    let qq = sigma_dot_unchecked(&q, &q, sigma);
                    let qv = sigma_dot_unchecked(&q, &v, sigma);
                    for (vi, qi) in v.iter_mut().zip(&q) {
                        *vi -= qv / qq * qi;
                    }
                    positions.push(AmbientVector::new(q));
                    velocities.push(AmbientVector::new(v));
                    masses.push(m);
                }
                FullState { positions, velocities, masses, sigma }
            })
        })
    }

    proptest! {
        #[test]
        fn full_rhs_tangency_identity(state in random_state()) {
            if let Ok(acc) = full_rhs(&state) {
                for ((q, v), a) in state.positions.iter().zip(&state.velocities).zip(&acc) {
                    let lhs = sigma_dot_unchecked(q, a, state.sigma);
                    let rhs = -sigma_dot_unchecked(v, v, state.sigma);
                    let scale = 1.0 + a.iter().map(|x| x.abs()).sum::<f64>() * q.iter().map(|x| x.abs()).sum::<f64>();
                    prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "{} vs {}", lhs, rhs);
                }
            }
        }

        #[test]
        fn regular_polygon_c_vanishes(n in 2usize..13, phase in 0.0..TAU, neg in any::<bool>(), rho_frac in 0.0..1.0f64) {
            let sigma = if neg { Negative } else { Positive };
            let rho = if neg { 0.1 + 2.9 * rho_frac } else { 0.1 + 0.85 * rho_frac };
            let c = regular_polygon(n, phase, vec![1.0; n], sigma, 3).unwrap();
            let t = criterion_terms(&c, rho).unwrap();
            prop_assert!(t.c_max() <= 1e-13, "c_max {}", t.c_max());
        }
    }
}
