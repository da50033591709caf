//! Polygonal configurations, admissible initial data and the embedding of
//! reduced `(ρ, θ, Z)` states into ambient positions and velocities.
//!
//! A rotopulsating state places body `i` at `(ρ T(θ) Qᵢ ; Z)` where
//! `Qᵢ = (cos βᵢ, sin βᵢ)` and `T(θ)` rotates the first two coordinates.
//! The remaining `k − 2` coordinates are shared by every body.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    rotate, rotation_generator_apply, sigma_dot_unchecked, AmbientVector, CurvatureSign, DEFAULT_MANIFOLD_TOL,
};

/// Two bodies whose angles satisfy `|sin(Δ/2)|` at or below this are coincident.
pub const COLLISION_EPS: f64 = 1e-12;

/// `n` bodies whose unit planar directions `Qᵢ` sit at angles `βᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolygonConfig {
    masses: Vec<f64>,
    beta: Vec<f64>,
    sigma: CurvatureSign,
    dim: usize,
}

impl PolygonConfig {
    pub fn new(masses: Vec<f64>, beta: Vec<f64>, sigma: CurvatureSign, dim: usize) -> Result<Self> {
        let n = masses.len();
        if n < 2 {
            return Err(Error::Validation(format!("need at least 2 bodies, got {n}")));
        }
        if beta.len() != n {
            return Err(Error::Dimension { expected: n, found: beta.len() });
        }
        if dim < 2 {
            return Err(Error::Validation(format!("ambient dimension must be at least 2, got {dim}")));
        }
        if let Some((i, m)) = masses.iter().enumerate().find(|(_, m)| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::Validation(format!("mass {i} must be positive and finite, got {m}")));
        }
        if let Some(b) = beta.iter().find(|b| !b.is_finite()) {
            return Err(Error::Validation(format!("angle {b} is not finite")));
        }
        for i in 0..n {
            for j in i + 1..n {
                if half_angle_sin(beta[i] - beta[j]).abs() <= COLLISION_EPS {
                    return Err(Error::Validation(format!("bodies {i} and {j} share the angle {} (mod 2π)", beta[i])));
                }
            }
        }
        Ok(Self { masses, beta, sigma, dim })
    }

    pub fn n(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn sigma(&self) -> CurvatureSign {
        self.sigma
    }

    /// Ambient dimension `k`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length `k − 2` of the shared `Z` block.
    pub fn z_dim(&self) -> usize {
        self.dim - 2
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `Qᵢ = (cos βᵢ, sin βᵢ)`.
    pub fn unit_vector(&self, i: usize) -> [f64; 2] {
        let (s, c) = self.beta[i].sin_cos();
        [c, s]
    }

    pub fn with_sigma(&self, sigma: CurvatureSign) -> Self {
        Self { sigma, ..self.clone() }
    }
}

#[inline]
pub(crate) fn half_angle_sin(delta: f64) -> f64 {
    (0.5 * delta).sin()
}

/// Bodies at `βᵢ = phase + 2πi/n`.
pub fn regular_polygon(
    n: usize,
    phase: f64,
    masses: Vec<f64>,
    sigma: CurvatureSign,
    dim: usize,
) -> Result<PolygonConfig> {
    if n < 2 {
        return Err(Error::Validation(format!("need at least 2 bodies, got {n}")));
    }
    if masses.len() != n {
        return Err(Error::Dimension { expected: n, found: masses.len() });
    }
    let beta = (0..n).map(|i| phase + TAU * i as f64 / n as f64).collect();
    PolygonConfig::new(masses, beta, sigma, dim)
}

/// Reduced coordinates `(ρ, ρ̇, θ, θ̇, Z, Ż)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedState {
    pub rho: f64,
    pub rho_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub z: Vec<f64>,
    pub z_dot: Vec<f64>,
}

impl ReducedState {
    /// `ρ² + Z⊙Z − σ`, zero on the manifold.
    pub fn constraint_residual(&self, sigma: CurvatureSign) -> f64 {
        self.rho * self.rho + sigma_dot_unchecked(&self.z, &self.z, sigma) - sigma.value()
    }

    /// `ρρ̇ + Z⊙Ż`, zero when velocities are tangent.
    pub fn tangency_residual(&self, sigma: CurvatureSign) -> f64 {
        self.rho * self.rho_dot + sigma_dot_unchecked(&self.z, &self.z_dot, sigma)
    }

    /// `ρ²θ̇`, conserved along the reduced flow.
    pub fn angular_momentum(&self) -> f64 {
        self.rho * self.rho * self.theta_dot
    }

    /// Packs as `(ρ, ρ̇, θ, θ̇, Z…, Ż…)`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(4 + 2 * self.z.len());
        y.extend_from_slice(&[self.rho, self.rho_dot, self.theta, self.theta_dot]);
        y.extend_from_slice(&self.z);
        y.extend_from_slice(&self.z_dot);
        y
    }

    pub fn from_flat(y: &[f64], z_dim: usize) -> Result<Self> {
        if y.len() != 4 + 2 * z_dim {
            return Err(Error::Dimension { expected: 4 + 2 * z_dim, found: y.len() });
        }
        Ok(Self {
            rho: y[0],
            rho_dot: y[1],
            theta: y[2],
            theta_dot: y[3],
            z: y[4..4 + z_dim].to_vec(),
            z_dot: y[4 + z_dim..].to_vec(),
        })
    }
}

/// Ambient positions and velocities of every body.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullState {
    pub positions: Vec<AmbientVector>,
    pub velocities: Vec<AmbientVector>,
    pub masses: Vec<f64>,
    pub sigma: CurvatureSign,
}

impl FullState {
    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn dim(&self) -> usize {
        self.positions.first().map_or(0, |q| q.len())
    }

    /// Packs all positions body-major, then all velocities body-major.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.n() * self.dim());
        for q in &self.positions {
            y.extend_from_slice(q);
        }
        for v in &self.velocities {
            y.extend_from_slice(v);
        }
        y
    }

    pub fn from_flat(y: &[f64], masses: &[f64], sigma: CurvatureSign, dim: usize) -> Result<Self> {
        let n = masses.len();
        if y.len() != 2 * n * dim {
            return Err(Error::Dimension { expected: 2 * n * dim, found: y.len() });
        }
        let (pos, vel) = y.split_at(n * dim);
        Ok(Self {
            positions: pos.chunks(dim).map(|c| AmbientVector::new(c.to_vec())).collect(),
            velocities: vel.chunks(dim).map(|c| AmbientVector::new(c.to_vec())).collect(),
            masses: masses.to_vec(),
            sigma,
        })
    }

    /// `maxᵢ |qᵢ⊙qᵢ − σ|`.
    pub fn manifold_residual(&self) -> f64 {
        self.positions
            .iter()
            .map(|q| (sigma_dot_unchecked(q, q, self.sigma) - self.sigma.value()).abs())
            .fold(0.0, f64::max)
    }

    /// `maxᵢ |qᵢ⊙q̇ᵢ|`.
    pub fn tangency_residual(&self) -> f64 {
        self.positions
            .iter()
            .zip(&self.velocities)
            .map(|(q, v)| sigma_dot_unchecked(q, v, self.sigma).abs())
            .fold(0.0, f64::max)
    }

    pub fn wedge_c12(&self) -> f64 {
        crate::geometry::wedge_c12(&self.masses, &self.positions, &self.velocities)
            .expect("full state has consistent shapes")
    }
}

/// Free choices left open when solving the constraint for `Z`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InitialOptions {
    /// Take the negative root (southern hemisphere / lower sheet).
    pub lower_root: bool,
    /// Direction of `Z` in `R^{k−2}`; defaults to the last ambient axis.
    pub z_direction: Option<Vec<f64>>,
}

/// Builds reduced initial data on the manifold with `θ(0) = 0`.
pub fn synthesize_initial(config: &PolygonConfig, rho0: f64, rho_dot0: f64, theta_dot0: f64) -> Result<ReducedState> {
    synthesize_initial_with(config, rho0, rho_dot0, theta_dot0, &InitialOptions::default())
}

pub fn synthesize_initial_with(
    config: &PolygonConfig,
    rho0: f64,
    rho_dot0: f64,
    theta_dot0: f64,
    options: &InitialOptions,
) -> Result<ReducedState> {
    let sigma = config.sigma();
    if !(rho0.is_finite() && rho0 > 0.0) {
        return Err(Error::Validation(format!("rho0 must be positive and finite, got {rho0}")));
    }
    if !(rho_dot0.is_finite() && theta_dot0.is_finite()) {
        return Err(Error::Validation("initial rates must be finite".into()));
    }
    let z_dim = config.z_dim();

    if z_dim == 0 {
        if sigma == CurvatureSign::Negative {
            return Err(Error::Infeasible("k = 2 admits no rotating polygon on the hyperboloid".into()));
        }
        if (rho0 - 1.0).abs() > 1e-12 {
            return Err(Error::Infeasible(format!("k = 2 on the sphere forces rho = 1, got {rho0}")));
        }
        if rho_dot0 != 0.0 {
            return Err(Error::Infeasible(format!("k = 2 on the sphere forces rho_dot = 0, got {rho_dot0}")));
        }
        return Ok(ReducedState {
            rho: 1.0,
            rho_dot: 0.0,
            theta: 0.0,
            theta_dot: theta_dot0,
            z: Vec::new(),
            z_dot: Vec::new(),
        });
    }

    let target = sigma.value() - rho0 * rho0; // Z⊙Z
    if sigma == CurvatureSign::Positive && target < 0.0 {
        return Err(Error::Infeasible(format!("rho0 = {rho0} exceeds 1 on the sphere")));
    }

    let direction = match &options.z_direction {
        Some(d) => {
            if d.len() != z_dim {
                return Err(Error::Dimension { expected: z_dim, found: d.len() });
            }
            d.clone()
        }
        None => {
            let mut d = vec![0.0; z_dim];
            d[z_dim - 1] = 1.0;
            d
        }
    };

    if target == 0.0 {
        if rho_dot0 != 0.0 {
            return Err(Error::Infeasible(
                "rho0 = 1 on the sphere is a maximum of rho, so rho_dot0 must vanish".into(),
            ));
        }
        return Ok(ReducedState {
            rho: rho0,
            rho_dot: 0.0,
            theta: 0.0,
            theta_dot: theta_dot0,
            z: vec![0.0; z_dim],
            z_dot: vec![0.0; z_dim],
        });
    }

    let norm = sigma_dot_unchecked(&direction, &direction, sigma);
    let scale_sq = target / norm;
    if !(norm != 0.0 && scale_sq > 0.0 && scale_sq.is_finite()) {
        return Err(Error::Infeasible(format!("Z direction has d⊙d = {norm}, which cannot reach Z⊙Z = {target}")));
    }
    let scale = if options.lower_root { -scale_sq.sqrt() } else { scale_sq.sqrt() };
    let z: Vec<f64> = direction.iter().map(|d| scale * d).collect();
    // Ż ∥ Z solves ρρ̇ + Z⊙Ż = 0.
    let rate = -rho0 * rho_dot0 / target;
    let z_dot = z.iter().map(|zi| rate * zi).collect();

    Ok(ReducedState { rho: rho0, rho_dot: rho_dot0, theta: 0.0, theta_dot: theta_dot0, z, z_dot })
}

/// Maps a reduced state to ambient positions and velocities, rejecting
/// states off the manifold by more than [`DEFAULT_MANIFOLD_TOL`].
pub fn embed(state: &ReducedState, config: &PolygonConfig) -> Result<FullState> {
    embed_with_tol(state, config, DEFAULT_MANIFOLD_TOL)
}

pub fn embed_with_tol(state: &ReducedState, config: &PolygonConfig, tol: f64) -> Result<FullState> {
    let sigma = config.sigma();
    let z_dim = config.z_dim();
    if state.z.len() != z_dim {
        return Err(Error::Dimension { expected: z_dim, found: state.z.len() });
    }
    if state.z_dot.len() != z_dim {
        return Err(Error::Dimension { expected: z_dim, found: state.z_dot.len() });
    }
    if !(state.rho > 0.0) {
        return Err(Error::Validation(format!("rho must be positive, got {}", state.rho)));
    }
    let constraint = state.constraint_residual(sigma);
    if !(constraint.abs() <= tol) {
        return Err(Error::Validation(format!("reduced state is off the manifold: rho² + Z⊙Z − σ = {constraint:e}")));
    }
    let tangency = state.tangency_residual(sigma);
    if !(tangency.abs() <= tol) {
        return Err(Error::Validation(format!("reduced velocity is not tangent: ρρ̇ + Z⊙Ż = {tangency:e}")));
    }
    Ok(embed_unchecked(state, config))
}

pub(crate) fn embed_unchecked(state: &ReducedState, config: &PolygonConfig) -> FullState {
    let n = config.n();
    let mut positions = Vec::with_capacity(n);
    let mut velocities = Vec::with_capacity(n);
    for i in 0..n {
        let tq = rotate(state.theta, config.unit_vector(i));
        let jtq = rotation_generator_apply(tq);
        let mut q = Vec::with_capacity(config.dim());
        q.extend_from_slice(&[state.rho * tq[0], state.rho * tq[1]]);
        q.extend_from_slice(&state.z);
        let spin = state.rho * state.theta_dot;
        let mut v = Vec::with_capacity(config.dim());
        v.extend_from_slice(&[state.rho_dot * tq[0] + spin * jtq[0], state.rho_dot * tq[1] + spin * jtq[1]]);
        v.extend_from_slice(&state.z_dot);
        positions.push(AmbientVector::new(q));
        velocities.push(AmbientVector::new(v));
    }
    FullState { positions, velocities, masses: config.masses().to_vec(), sigma: config.sigma() }
}
