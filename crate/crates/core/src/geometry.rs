//! Signed inner product, manifold membership and planar rotations.
//!
//! Points of the curved space live in `R^k` on the set `q ⊙ q = σ`, where `⊙`
//! is the Euclidean product with the last coordinate weighted by the
//! curvature sign `σ`. For `σ = +1` this is the unit sphere, for `σ = -1` the
//! unit hyperboloid.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Default tolerance for manifold membership checks.
pub const DEFAULT_MANIFOLD_TOL: f64 = 1e-9;

/// Sign of the curvature: `+1` for the sphere, `-1` for the hyperboloid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum CurvatureSign {
    Positive,
    Negative,
}

impl CurvatureSign {
    pub fn from_int(value: i64) -> Result<Self> {
        match value {
            1 => Ok(Self::Positive),
            -1 => Ok(Self::Negative),
            other => Err(Error::Validation(format!("curvature sign must be +1 or -1, got {other}"))),
        }
    }

    pub fn as_int(self) -> i64 {
        match self {
            Self::Positive => 1,
            Self::Negative => -1,
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Self::Positive => 1.0,
            Self::Negative => -1.0,
        }
    }

    /// `σ⁻¹`, which equals `σ`.
    #[inline]
    pub fn inverse(self) -> Self {
        self
    }

    pub fn both() -> [Self; 2] {
        [Self::Positive, Self::Negative]
    }
}

impl TryFrom<i64> for CurvatureSign {
    type Error = Error;

    fn try_from(value: i64) -> Result<Self> {
        Self::from_int(value)
    }
}

impl From<CurvatureSign> for i64 {
    fn from(s: CurvatureSign) -> i64 {
        s.as_int()
    }
}

impl std::fmt::Display for CurvatureSign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:+}", self.as_int())
    }
}

/// A vector in `R^m` whose length is fixed at construction.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AmbientVector(Vec<f64>);

impl AmbientVector {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for AmbientVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl<const N: usize> From<[f64; N]> for AmbientVector {
    fn from(v: [f64; N]) -> Self {
        Self(v.to_vec())
    }
}

impl Deref for AmbientVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

// Length stays fixed: only element access is exposed mutably.
impl DerefMut for AmbientVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// `a ⊙ b = a₁b₁ + … + a_{m−1}b_{m−1} + σ a_m b_m`. Empty vectors give 0.
pub fn sigma_dot(a: &[f64], b: &[f64], s: CurvatureSign) -> Result<f64> {
    check_len(a.len(), b.len())?;
    Ok(sigma_dot_unchecked(a, b, s))
}

#[inline]
pub(crate) fn sigma_dot_unchecked(a: &[f64], b: &[f64], s: CurvatureSign) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let m = a.len();
    if m == 0 {
        return 0.0;
    }
    let head: f64 = a[..m - 1].iter().zip(&b[..m - 1]).map(|(x, y)| x * y).sum();
    head + s.value() * a[m - 1] * b[m - 1]
}

/// Whether `q ⊙ q = σ` holds within `tol`.
pub fn on_manifold(q: &[f64], s: CurvatureSign, tol: f64) -> Result<bool> {
    if !(tol > 0.0) {
        return Err(Error::Validation(format!("tolerance must be positive, got {tol}")));
    }
    Ok((sigma_dot_unchecked(q, q, s) - s.value()).abs() <= tol)
}

/// Applies the planar rotation `T(θ)`.
#[inline]
pub fn rotate(theta: f64, v: [f64; 2]) -> [f64; 2] {
    let (sin, cos) = theta.sin_cos();
    [cos * v[0] - sin * v[1], sin * v[0] + cos * v[1]]
}

/// Applies `J = [[0, -1], [1, 0]]`, the generator of planar rotations.
#[inline]
pub fn rotation_generator_apply(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

/// The `(1, 2)` component of the angular-momentum bivector,
/// `Σ mᵢ (q_{i1} q̇_{i2} − q_{i2} q̇_{i1})`.
pub fn wedge_c12<P, V>(masses: &[f64], positions: &[P], velocities: &[V]) -> Result<f64>
where
    P: AsRef<[f64]>,
    V: AsRef<[f64]>,
{
    check_len(masses.len(), positions.len())?;
    check_len(masses.len(), velocities.len())?;
    let mut total = 0.0;
    for ((m, q), v) in masses.iter().zip(positions).zip(velocities) {
        let (q, v) = (q.as_ref(), v.as_ref());
        check_len(q.len(), v.len())?;
        if q.len() < 2 {
            return Err(Error::Dimension { expected: 2, found: q.len() });
        }
        total += m * (q[0] * v[1] - q[1] * v[0]);
    }
    Ok(total)
}

impl AsRef<[f64]> for AmbientVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    use CurvatureSign::{Negative, Positive};

    #[test]
    fn sigma_dot_examples() {
        assert_eq!(sigma_dot(&[1.0, 0.0], &[1.0, 0.0], Positive).unwrap(), 1.0);
        assert_eq!(sigma_dot(&[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0], Negative).unwrap(), -1.0);
        assert_eq!(sigma_dot(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Negative).unwrap(), -4.0);
        assert_eq!(sigma_dot(&[2.0], &[3.0], Negative).unwrap(), -6.0);
        assert_eq!(sigma_dot(&[], &[], Negative).unwrap(), 0.0);
    }

    #[test]
    fn sigma_dot_length_mismatch() {
        assert!(matches!(sigma_dot(&[1.0, 2.0], &[1.0], Positive), Err(Error::Dimension { expected: 2, found: 1 })));
    }

    #[test]
    fn sign_roundtrip() {
        for s in CurvatureSign::both() {
            assert_eq!(CurvatureSign::from_int(s.as_int()).unwrap(), s);
            assert_eq!(s.value() * s.value(), 1.0);
            assert_eq!(s.inverse(), s);
        }
        assert!(CurvatureSign::from_int(0).is_err());
        let parsed: CurvatureSign = serde_json::from_str("-1").unwrap();
        assert_eq!(parsed, Negative);
        assert!(serde_json::from_str::<CurvatureSign>("2").is_err());
    }

    #[test]
    fn manifold_membership() {
        assert!(on_manifold(&[0.0, 0.0, 1.0], Positive, 1e-12).unwrap());
        assert!(on_manifold(&[0.0, 0.0, 1.0], Negative, 1e-12).unwrap());
        assert!(!on_manifold(&[1.0, 1.0, 1.0], Positive, 1e-12).unwrap());
        assert!(on_manifold(&[0.0, 0.0, 1.0], Positive, 0.0).is_err());
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(rotate(0.0, [0.3, 0.7]), [0.3, 0.7]);
        let r = rotate(FRAC_PI_2, [1.0, 0.0]);
        assert!(r[0].abs() < 1e-16 && (r[1] - 1.0).abs() < 1e-16);
        let r = rotate(PI, [0.3, -0.7]);
        assert!((r[0] + 0.3).abs() < 1e-15 && (r[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn generator_examples() {
        assert_eq!(rotation_generator_apply([1.0, 0.0]), [-0.0, 1.0]);
        assert_eq!(rotation_generator_apply([0.0, 1.0]), [-1.0, 0.0]);
        let v = [0.25, -3.0];
        assert_eq!(rotation_generator_apply(rotation_generator_apply(v)), [-0.25, 3.0]);
    }

    #[test]
    fn wedge_examples() {
        let c = wedge_c12(&[1.0], &[[1.0, 0.0, 0.0]], &[[0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(c, 1.0);
        let c = wedge_c12(&[1.0, 2.0], &[[1.0, 0.0], [0.0, 1.0]], &[[0.0; 2], [0.0; 2]]).unwrap();
        assert_eq!(c, 0.0);
        assert!(wedge_c12(&[1.0, 2.0], &[[1.0, 0.0]], &[[0.0, 1.0]]).is_err());
        assert!(wedge_c12(&[1.0], &[[1.0]], &[[0.0]]).is_err());
    }

    fn sign() -> impl Strategy<Value = CurvatureSign> {
        prop_oneof![Just(Positive), Just(Negative)]
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
        (0usize..7).prop_flat_map(|m| {
            (
                prop::collection::vec(-10.0..10.0f64, m),
                prop::collection::vec(-10.0..10.0f64, m),
                prop::collection::vec(-10.0..10.0f64, m),
            )
        })
    }

    proptest! {
        #[test]
        fn sigma_dot_symmetric_bilinear((a, b, c) in vec_pair(), s in sign(), alpha in -3.0..3.0f64) {
            let ab = sigma_dot(&a, &b, s).unwrap();
            prop_assert_eq!(ab, sigma_dot(&b, &a, s).unwrap());
            let lhs: Vec<f64> = a.iter().zip(&c).map(|(x, z)| alpha * x + z).collect();
            let combined = sigma_dot(&lhs, &b, s).unwrap();
            let expected = alpha * ab + sigma_dot(&c, &b, s).unwrap();
            prop_assert!((combined - expected).abs() <= 1e-12 * (1.0 + expected.abs() + ab.abs() * alpha.abs()) * 100.0);
        }

        #[test]
        fn positive_sign_is_euclidean((a, b, _c) in vec_pair()) {
            let euclid: f64 = if a.is_empty() {
                0.0
            } else {
                let m = a.len();
                a[..m - 1].iter().zip(&b[..m - 1]).map(|(x, y)| x * y).sum::<f64>() + a[m - 1] * b[m - 1]
            };
            prop_assert_eq!(sigma_dot(&a, &b, Positive).unwrap(), euclid);
        }

        #[test]
        fn rotations_compose(t1 in -10.0..10.0f64, t2 in -10.0..10.0f64, x in -5.0..5.0f64, y in -5.0..5.0f64) {
            let lhs = rotate(t1, rotate(t2, [x, y]));
            let rhs = rotate(t1 + t2, [x, y]);
            prop_assert!((lhs[0] - rhs[0]).abs() <= 1e-12 * 10.0 && (lhs[1] - rhs[1]).abs() <= 1e-12 * 10.0);
        }

        #[test]
        fn generator_is_orthogonal(x in -1e3..1e3f64, y in -1e3..1e3f64) {
            let jv = rotation_generator_apply([x, y]);
            prop_assert!((x * jv[0] + y * jv[1]).abs() <= 1e-15);
        }

        #[test]
        fn wedge_rotation_invariant(
            bodies in prop::collection::vec((0.1..5.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64, -1.0..1.0f64), 1..6),
            theta in -6.0..6.0f64,
        ) {
            let masses: Vec<f64> = bodies.iter().map(|b| b.0).collect();
            let q: Vec<[f64; 3]> = bodies.iter().map(|b| [b.1, b.2, b.5]).collect();
            let v: Vec<[f64; 3]> = bodies.iter().map(|b| [b.3, b.4, 0.0]).collect();
            let base = wedge_c12(&masses, &q, &v).unwrap();
            let rot = |p: &[f64; 3]| { let r = rotate(theta, [p[0], p[1]]); [r[0], r[1], p[2]] };
            let qr: Vec<[f64; 3]> = q.iter().map(rot).collect();
            let vr: Vec<[f64; 3]> = v.iter().map(rot).collect();
            let turned = wedge_c12(&masses, &qr, &vr).unwrap();
            let scale: f64 = bodies.iter().map(|b| b.0 * (b.1.abs() + b.2.abs()) * (b.3.abs() + b.4.abs())).sum::<f64>() + 1e-300;
            prop_assert!((base - turned).abs() <= 1e-12 * scale.max(base.abs()));
        }
    }
}
