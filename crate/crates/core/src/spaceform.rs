//! Space forms `Q³_ε` as quadrics of (pseudo-)Euclidean space.
//!
//! `S³ ⊂ R⁴`, `R³` itself, and the upper sheet of the hyperboloid
//! `H³ ⊂ R⁴₁`. Lorentzian forms put the negative direction first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Real;

/// Sign of the sectional curvature of the space form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Epsilon {
    Hyperbolic,
    Flat,
    Spherical,
}

impl TryFrom<i8> for Epsilon {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Epsilon::Hyperbolic),
            0 => Ok(Epsilon::Flat),
            1 => Ok(Epsilon::Spherical),
            _ => Err(format!("eps must be -1, 0 or 1, got {v}")),
        }
    }
}

impl From<Epsilon> for i8 {
    fn from(e: Epsilon) -> i8 {
        e.sign()
    }
}

impl Epsilon {
    pub const ALL: [Epsilon; 3] = [Epsilon::Hyperbolic, Epsilon::Flat, Epsilon::Spherical];

    pub fn sign(self) -> i8 {
        match self {
            Epsilon::Hyperbolic => -1,
            Epsilon::Flat => 0,
            Epsilon::Spherical => 1,
        }
    }

    pub fn value(self) -> f64 {
        self.sign() as f64
    }

    /// 1 for the Lorentzian ambient of `H³`, 0 otherwise.
    pub fn mu(self) -> u8 {
        u8::from(self == Epsilon::Hyperbolic)
    }

    pub fn lorentzian(self) -> bool {
        self.mu() == 1
    }

    /// Dimension of the space in which `Q³_ε` is modelled.
    pub fn space_dim(self) -> usize {
        3 + self.sign().unsigned_abs() as usize
    }

    /// Dimension of the space in which `Q³_ε × R` is modelled; the
    /// `∂/∂t` axis is the last coordinate.
    pub fn product_dim(self) -> usize {
        self.space_dim() + 1
    }
}

/// Ambient vector together with the signature of its space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmbientVector {
    pub coords: Vec<f64>,
    pub lorentzian: bool,
}

impl AmbientVector {
    pub fn new(eps: Epsilon, coords: Vec<f64>) -> Self {
        AmbientVector { coords, lorentzian: eps.lorentzian() }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// `(C_ε(s), S_ε(s))`.
pub fn ceps_seps<T: Real>(eps: Epsilon, s: T) -> (T, T) {
    match eps {
        Epsilon::Spherical => (s.cos(), s.sin()),
        Epsilon::Flat => (s.lift(1.0), s),
        Epsilon::Hyperbolic => (s.cosh(), s.sinh()),
    }
}

/// `(C_ε'(s), S_ε'(s)) = (−ε S_ε(s), C_ε(s))`.
pub fn ceps_seps_prime<T: Real>(eps: Epsilon, s: T) -> (T, T) {
    let (c, sn) = ceps_seps(eps, s);
    (sn * -eps.value(), c)
}

/// Inner product on `R^n` or `R^n_1`.
pub fn inner<T: Real>(lorentzian: bool, u: &[T], v: &[T]) -> T {
    crate::jet::dot(lorentzian, u, v)
}

/// The bilinear form of the ambient space of `Q³_ε` (or of `Q³_ε × R`).
pub fn ambient_inner(eps: Epsilon, u: &AmbientVector, v: &AmbientVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch(u.dim(), v.dim()));
    }
    if u.lorentzian != v.lorentzian || u.lorentzian != eps.lorentzian() {
        return Err(Error::InvalidParams("signature mismatch".into()));
    }
    Ok(inner(eps.lorentzian(), &u.coords, &v.coords))
}

/// `|⟨p,p⟩ − ε|` for `ε ≠ 0`; points of `R³` are always members.
pub fn membership_residual(eps: Epsilon, p: &[f64]) -> Result<f64> {
    if eps == Epsilon::Flat {
        return Ok(0.0);
    }
    if p.len() != eps.space_dim() {
        return Err(Error::DimensionMismatch(p.len(), eps.space_dim()));
    }
    if eps == Epsilon::Hyperbolic && p[0] <= 0.0 {
        return Err(Error::WrongSheet(p[0]));
    }
    Ok((inner(eps.lorentzian(), p, p) - eps.value()).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn trig_pair_examples() {
        let (c, s) = ceps_seps(Epsilon::Spherical, FRAC_PI_2);
        assert!(c.abs() < 1e-15 && (s - 1.0).abs() < 1e-15);
        assert_eq!(ceps_seps(Epsilon::Flat, 2.0), (1.0, 2.0));
        assert_eq!(ceps_seps(Epsilon::Hyperbolic, 0.0), (1.0, 0.0));
    }

    #[test]
    fn inner_examples() {
        let e0 = |eps: Epsilon, n: usize, i: usize| {
            let mut c = vec![0.0; n];
            c[i] = 1.0;
            AmbientVector::new(eps, c)
        };
        let f = Epsilon::Flat;
        assert_eq!(ambient_inner(f, &e0(f, 3, 0), &e0(f, 3, 0)).unwrap(), 1.0);
        let h = Epsilon::Hyperbolic;
        assert_eq!(ambient_inner(h, &e0(h, 4, 0), &e0(h, 4, 0)).unwrap(), -1.0);
        let s = Epsilon::Spherical;
        assert_eq!(ambient_inner(s, &e0(s, 4, 0), &e0(s, 4, 1)).unwrap(), 0.0);
        assert!(matches!(
            ambient_inner(f, &e0(f, 3, 0), &e0(f, 4, 0)),
            Err(Error::DimensionMismatch(3, 4))
        ));
    }

    #[test]
    fn membership_examples() {
        assert_eq!(membership_residual(Epsilon::Spherical, &[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(membership_residual(Epsilon::Hyperbolic, &[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(membership_residual(Epsilon::Spherical, &[2.0, 0.0, 0.0, 0.0]).unwrap(), 3.0);
        assert_eq!(membership_residual(Epsilon::Flat, &[7.0, 1.0, 2.0]).unwrap(), 0.0);
        assert!(matches!(
            membership_residual(Epsilon::Hyperbolic, &[-1.0, 0.0, 0.0, 0.0]),
            Err(Error::WrongSheet(_))
        ));
    }

    #[test]
    fn mu_and_dims() {
        assert_eq!(Epsilon::Hyperbolic.mu(), 1);
        assert_eq!(Epsilon::Flat.mu(), 0);
        assert_eq!(Epsilon::Spherical.mu(), 0);
        assert_eq!(Epsilon::Flat.product_dim(), 4);
        assert_eq!(Epsilon::Hyperbolic.product_dim(), 5);
    }

    #[test]
    fn serde_as_integer() {
        let e: Epsilon = serde_json::from_str("-1").unwrap();
        assert_eq!(e, Epsilon::Hyperbolic);
        assert!(serde_json::from_str::<Epsilon>("2").is_err());
        assert_eq!(serde_json::to_string(&Epsilon::Spherical).unwrap(), "1");
    }

    fn any_eps() -> impl Strategy<Value = Epsilon> {
        prop_oneof![
            Just(Epsilon::Hyperbolic),
            Just(Epsilon::Flat),
            Just(Epsilon::Spherical)
        ]
    }

    proptest! {
        #[test]
        fn pythagorean_identity(eps in any_eps(), s in -5.0f64..5.0) {
            let (c, sn) = ceps_seps(eps, s);
            let scale = 1.0 + c * c;
            prop_assert!((c * c + eps.value() * sn * sn - 1.0).abs() < 1e-12 * scale);
        }

        #[test]
        fn double_angle(eps in any_eps(), s in -5.0f64..5.0) {
            let (c, sn) = ceps_seps(eps, s);
            let (c2, s2) = ceps_seps(eps, 2.0 * s);
            let scale = 1.0 + c * c;
            prop_assert!((c2 - (c * c - eps.value() * sn * sn)).abs() < 1e-12 * scale);
            prop_assert!((s2 - 2.0 * c * sn).abs() < 1e-12 * scale);
        }

        #[test]
        fn derivative_pair_matches_differences(eps in any_eps(), s in -3.0f64..3.0) {
            let h = 1e-4;
            let (cp, sp) = ceps_seps(eps, s + h);
            let (cm, sm) = ceps_seps(eps, s - h);
            let (dc, ds) = ceps_seps_prime(eps, s);
            let scale = 1.0 + ceps_seps(eps, s).0.abs();
            prop_assert!(((cp - cm) / (2.0 * h) - dc).abs() < 1e-7 * scale);
            prop_assert!(((sp - sm) / (2.0 * h) - ds).abs() < 1e-7 * scale);
        }

        #[test]
        fn hyperboloid_points_are_members(u in -2.0f64..2.0, v in -3.0f64..3.0, d in 0.0f64..2.0) {
            let p = [d.cosh() * u.cosh(), d.cosh() * u.sinh(), d.sinh() * v.cos(), d.sinh() * v.sin()];
            prop_assert!(membership_residual(Epsilon::Hyperbolic, &p).unwrap() < 1e-12 * p[0] * p[0]);
        }
    }
}
