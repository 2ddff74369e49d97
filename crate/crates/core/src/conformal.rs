//! Conformal maps from `Q³_ε × R` into `R⁴`, sphere inversions, and the
//! conformal Killing fields of `R⁴`.
//!
//! For `ε = −1` a hyperboloid point `p` (standard coordinates, `p₀` the
//! timelike one) is written in the null basis
//! `e₀ = (1,0,0,1), e₁, e₂, e₃ = ¼(1,0,0,−1)`, giving
//! `y₀ = (p₀ + p₃)/2`, `y₃ = 2(p₀ − p₃)`, and then
//! `Φ(p, t) = (y₁, y₂, cos t, sin t) / y₀`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypersurface::{cross4, Box3, Hypersurface};
use crate::jet::{dot, Jet, Real};
use crate::spaceform::{ceps_seps, Epsilon};

/// One step of a map pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConformalMap {
    /// The map for the pipeline's `ε`, resolved by [`ConformalMap::resolve`].
    Phi,
    PhiSphere,
    PhiHyperbolic,
    IdentityProduct,
    Inversion { center: [f64; 4], radius: f64 },
}

impl ConformalMap {
    pub fn resolve(&self, eps: Epsilon) -> Result<ConformalMap> {
        let want = match eps {
            Epsilon::Spherical => ConformalMap::PhiSphere,
            Epsilon::Flat => ConformalMap::IdentityProduct,
            Epsilon::Hyperbolic => ConformalMap::PhiHyperbolic,
        };
        match self {
            ConformalMap::Phi => Ok(want),
            ConformalMap::Inversion { radius, center } => {
                if !(*radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidParams(format!("inversion radius {radius} must be positive")));
                }
                Ok(self.clone())
            }
            m if *m == want => Ok(want),
            m => Err(Error::InvalidParams(format!("{m:?} does not apply for eps = {}", eps.sign()))),
        }
    }

    pub fn is_product_map(&self) -> bool {
        !matches!(self, ConformalMap::Inversion { .. })
    }

    /// Input dimension: the product model for `Φ`, `R⁴` for inversions.
    pub fn input_dim(&self, eps: Epsilon) -> usize {
        if self.is_product_map() {
            eps.product_dim()
        } else {
            4
        }
    }

    /// Image of `x`. Works on plain values and on jets alike.
    pub fn apply<T: Real>(&self, eps: Epsilon, x: &[T]) -> Result<Vec<T>> {
        let map = self.resolve(eps)?;
        if x.len() != map.input_dim(eps) {
            return Err(Error::DimensionMismatch(x.len(), map.input_dim(eps)));
        }
        match map {
            ConformalMap::IdentityProduct => Ok(x.to_vec()),
            ConformalMap::PhiSphere => {
                let s = x[4].exp();
                Ok(x[..4].iter().map(|&c| c * s).collect())
            }
            ConformalMap::PhiHyperbolic => {
                let y0 = (x[0] + x[3]) * 0.5;
                if y0.value() <= 1e-300 {
                    return Err(Error::MapDomain(format!("null coordinate y0 = {} at the ideal boundary", y0.value())));
                }
                let r = y0.recip();
                Ok(vec![x[1] * r, x[2] * r, x[4].cos() * r, x[4].sin() * r])
            }
            ConformalMap::Inversion { center, radius } => {
                let d: Vec<T> = x.iter().zip(center).map(|(&a, c)| a - c).collect();
                let n2 = dot(false, &d, &d);
                if n2.value() < 1e-28 * (1.0 + radius * radius) {
                    return Err(Error::MapDomain(format!("point {:?} hits the inversion center", center)));
                }
                let k = n2.recip() * (radius * radius);
                Ok(d.iter().zip(center).map(|(&di, c)| di * k + c).collect())
            }
            ConformalMap::Phi => unreachable!("resolved above"),
        }
    }

    /// Conformal factor `λ` with `|dΦ(v)| = λ |v|`.
    pub fn factor(&self, eps: Epsilon, x: &[f64]) -> Result<f64> {
        let map = self.resolve(eps)?;
        Ok(match map {
            ConformalMap::IdentityProduct => 1.0,
            ConformalMap::PhiSphere => x[4].exp(),
            ConformalMap::PhiHyperbolic => 2.0 / (x[0] + x[3]),
            ConformalMap::Inversion { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                radius * radius / d2
            }
            ConformalMap::Phi => unreachable!("resolved above"),
        })
    }
}

/// A left-to-right composition `𝓘_k ∘ … ∘ 𝓘_1 ∘ Φ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapPipeline {
    pub eps: Epsilon,
    pub steps: Vec<ConformalMap>,
}

impl MapPipeline {
    /// Validates the steps; a leading `Φ` is inserted when absent.
    pub fn new(eps: Epsilon, steps: &[ConformalMap]) -> Result<Self> {
        let mut out = Vec::with_capacity(steps.len() + 1);
        for (k, s) in steps.iter().enumerate() {
            let r = s.resolve(eps)?;
            if r.is_product_map() && k != 0 {
                return Err(Error::Config("the product map must come first in the pipeline".into()));
            }
            out.push(r);
        }
        if out.first().map_or(true, |s| !s.is_product_map()) {
            out.insert(0, ConformalMap::Phi.resolve(eps)?);
        }
        Ok(MapPipeline { eps, steps: out })
    }

    pub fn apply<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        let mut cur = x.to_vec();
        for s in &self.steps {
            cur = s.apply(self.eps, &cur)?;
        }
        Ok(cur)
    }

    pub fn factor(&self, x: &[f64]) -> Result<f64> {
        let mut cur = x.to_vec();
        let mut lam = 1.0;
        for s in &self.steps {
            lam *= s.factor(self.eps, &cur)?;
            cur = s.apply(self.eps, &cur)?;
        }
        Ok(lam)
    }

    pub fn has_inversion(&self) -> bool {
        self.steps.iter().any(|s| !s.is_product_map())
    }

    /// Pushforward `dM_x(v)` from a first-order jet along `v`.
    pub fn push(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let xs: Vec<Jet> = x.iter().zip(v).map(|(&a, &b)| Jet::constant(a, 1) + Jet::var(0, 0.0, 1) * b).collect();
        Ok(self.apply(&xs)?.iter().map(|j| j.grad(0)).collect())
    }
}

/// Fourth-order central difference of a vector-valued curve at 0.
pub fn central_diff(f: impl Fn(f64) -> Result<Vec<f64>>, h: f64) -> Result<Vec<f64>> {
    let (p2, p1, m1, m2) = (f(2.0 * h)?, f(h)?, f(-h)?, f(-2.0 * h)?);
    Ok((0..p1.len())
        .map(|k| (-p2[k] + 8.0 * p1[k] - 8.0 * m1[k] + m2[k]) / (12.0 * h))
        .collect())
}

/// A basis of `T_p(Q³_ε × R)`, orthonormal for the product metric, together
/// with the geodesic through `p` in each direction.
fn tangent_frame(eps: Epsilon, p: &[f64]) -> Vec<Vec<f64>> {
    let n = eps.space_dim();
    let lor = eps.lorentzian();
    let x = &p[..n];
    let e = eps.value();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        if e != 0.0 {
            let vx = dot(lor, &v, x);
            for i in 0..n {
                v[i] -= e * vx * x[i];
            }
        }
        for b in &basis {
            let c = dot(lor, &v, b);
            for i in 0..n {
                v[i] -= c * b[i];
            }
        }
        let nn = dot(lor, &v, &v);
        if nn > 1e-8 {
            let s = nn.sqrt();
            basis.push(v.iter().map(|c| c / s).collect());
        }
        if basis.len() == 3 {
            break;
        }
    }
    basis
}

fn geodesic(eps: Epsilon, p: &[f64], dir: Option<&[f64]>, tau: f64) -> Vec<f64> {
    let n = eps.space_dim();
    let mut q = p.to_vec();
    match dir {
        Some(w) => {
            let (c, s) = ceps_seps(eps, tau);
            for i in 0..n {
                q[i] = if eps == Epsilon::Flat { p[i] + tau * w[i] } else { c * p[i] + s * w[i] };
            }
        }
        None => q[n] += tau,
    }
    q
}

/// Result of the numerical conformality test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Conformality {
    /// `sqrt(tr(JᵀJ)/4)` from the numerical Jacobian.
    pub lambda: f64,
    /// The closed-form factor.
    pub lambda_exact: f64,
    /// `‖JᵀJ − λ² I‖_F / λ²`.
    pub residual: f64,
}

/// Numerical Jacobian of one map in an orthonormal frame, 4th-order
/// differences with step `1e−5 · max(1, |p|)`.
pub fn map_jacobian_conformality(map: &ConformalMap, eps: Epsilon, p: &[f64]) -> Result<Conformality> {
    let map = map.resolve(eps)?;
    let h = 1e-5 * p.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let cols: Vec<Vec<f64>> = if map.is_product_map() {
        let mut dirs: Vec<Option<Vec<f64>>> = tangent_frame(eps, p).into_iter().map(Some).collect();
        dirs.push(None);
        dirs.iter()
            .map(|d| central_diff(|tau| map.apply(eps, &geodesic(eps, p, d.as_deref(), tau)), h))
            .collect::<Result<_>>()?
    } else {
        (0..4)
            .map(|k| {
                central_diff(
                    |tau| {
                        let mut q = p.to_vec();
                        q[k] += tau;
                        map.apply(eps, &q)
                    },
                    h,
                )
            })
            .collect::<Result<_>>()?
    };
    Ok(gram_conformality(&cols, map.factor(eps, p)?))
}

fn gram_conformality(cols: &[Vec<f64>], lambda_exact: f64) -> Conformality {
    let n = cols.len();
    let gram: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| dot(false, &cols[i], &cols[j])).collect()).collect();
    let l2 = (0..n).map(|i| gram[i][i]).sum::<f64>() / n as f64;
    let mut r2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { l2 } else { 0.0 };
            r2 += (gram[i][j] - want).powi(2);
        }
    }
    Conformality { lambda: l2.sqrt(), lambda_exact, residual: r2.sqrt() / l2 }
}

/// Conformality of a whole pipeline.
pub fn pipeline_conformality(pipe: &MapPipeline, p: &[f64]) -> Result<Conformality> {
    let eps = pipe.eps;
    let h = 1e-5 * p.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let mut dirs: Vec<Option<Vec<f64>>> = tangent_frame(eps, p).into_iter().map(Some).collect();
    dirs.push(None);
    let cols: Vec<Vec<f64>> = dirs
        .iter()
        .map(|d| central_diff(|tau| pipe.apply(&geodesic(eps, p, d.as_deref(), tau)), h))
        .collect::<Result<_>>()?;
    Ok(gram_conformality(&cols, pipe.factor(p)?))
}

/// Conformal Killing fields of `R⁴`; indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KillingField {
    Constant { i: usize },
    /// `𝒦_{ij} = x_i ∂_j − x_j ∂_i`.
    Rotation { i: usize, j: usize },
    Radial,
    /// `𝒞_i = ½(x_i² − Σ_{j≠i} x_j²) ∂_i + x_i Σ_{j≠i} x_j ∂_j`.
    Special { i: usize },
}

impl KillingField {
    pub fn validate(&self) -> Result<()> {
        let ok = |i: usize| (1..=4).contains(&i);
        let good = match *self {
            KillingField::Constant { i } | KillingField::Special { i } => ok(i),
            KillingField::Rotation { i, j } => ok(i) && ok(j) && i != j,
            KillingField::Radial => true,
        };
        if good {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("bad field indices in {self:?}")))
        }
    }

    /// The field designated for each `ε`: `∂₄`, `𝓡`, or the rotation of the
    /// `(cos t, sin t)` plane.
    pub fn designated(eps: Epsilon) -> KillingField {
        match eps {
            Epsilon::Flat => KillingField::Constant { i: 4 },
            Epsilon::Spherical => KillingField::Radial,
            Epsilon::Hyperbolic => KillingField::Rotation { i: 3, j: 4 },
        }
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> Vec<T> {
        let z = x[0].lift(0.0);
        let mut v = vec![z; 4];
        match *self {
            KillingField::Constant { i } => v[i - 1] = x[0].lift(1.0),
            KillingField::Rotation { i, j } => {
                v[j - 1] = x[i - 1];
                v[i - 1] = -x[j - 1];
            }
            KillingField::Radial => v.copy_from_slice(&x[..4]),
            KillingField::Special { i } => {
                let i = i - 1;
                let mut others = z;
                for j in (0..4).filter(|&j| j != i) {
                    others = others + x[j] * x[j];
                    v[j] = x[i] * x[j];
                }
                v[i] = (x[i] * x[i] - others) * 0.5;
            }
        }
        v
    }
}

pub fn eval_conformal_killing(field: KillingField, p: &[f64]) -> Result<Vec<f64>> {
    field.validate()?;
    if p.len() != 4 {
        return Err(Error::DimensionMismatch(p.len(), 4));
    }
    Ok(field.eval(p))
}

/// `max |∂_a X_b + ∂_b X_a − ½ (div X) δ_ab|` at `p ∈ R⁴`, by finite differences.
pub fn killing_equation_residual(field: KillingField, p: &[f64]) -> Result<f64> {
    let h = 1e-4;
    let d: Vec<Vec<f64>> = (0..4)
        .map(|a| {
            central_diff(
                |t| {
                    let mut q = p.to_vec();
                    q[a] += t;
                    eval_conformal_killing(field, &q)
                },
                h,
            )
        })
        .collect::<Result<_>>()?;
    let div: f64 = (0..4).map(|a| d[a][a]).sum();
    let mut worst: f64 = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            let want = if a == b { 0.5 * div } else { 0.0 };
            worst = worst.max((d[a][b] + d[b][a] - want).abs());
        }
    }
    Ok(worst)
}

/// `|M_*(∂/∂t) − c X(M(p))| / |M_*(∂/∂t)|` with `c = 1`, or the best
/// multiple when `proportional` is set.
pub fn field_relatedness_check(
    pipe: &MapPipeline,
    field: KillingField,
    p: &[f64],
    proportional: bool,
) -> Result<f64> {
    field.validate()?;
    let n = pipe.eps.product_dim();
    if p.len() != n {
        return Err(Error::DimensionMismatch(p.len(), n));
    }
    let mut dt = vec![0.0; n];
    dt[n - 1] = 1.0;
    let h = 1e-5 * p.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let v = central_diff(|tau| pipe.apply(&geodesic(pipe.eps, p, None, tau)), h)?;
    let x = field.eval(&pipe.apply(p)?);
    let xx = dot(false, &x, &x);
    let c = if proportional && xx > 0.0 { dot(false, &v, &x) / xx } else { 1.0 };
    let r: Vec<f64> = v.iter().zip(&x).map(|(a, b)| a - c * b).collect();
    Ok(dot(false, &r, &r).sqrt() / dot(false, &v, &v).sqrt().max(1e-300))
}

/// `F = M ∘ f` for a hypersurface `f` of `Q³_ε × R`.
#[derive(Clone, Debug)]
pub struct MappedHypersurface<H> {
    pub inner: H,
    pub pipeline: MapPipeline,
}

impl<H: Hypersurface> MappedHypersurface<H> {
    pub fn new(inner: H, pipeline: MapPipeline) -> Result<Self> {
        if inner.ambient_dim() != pipeline.eps.product_dim() {
            return Err(Error::DimensionMismatch(inner.ambient_dim(), pipeline.eps.product_dim()));
        }
        Ok(MappedHypersurface { inner, pipeline })
    }
}

impl<H: Hypersurface> Hypersurface for MappedHypersurface<H> {
    fn ambient_dim(&self) -> usize {
        4
    }

    fn domain(&self) -> Box3 {
        self.inner.domain()
    }

    fn position_jet(&self, p: [f64; 3], order: usize) -> Result<Vec<Jet>> {
        self.pipeline.apply(&self.inner.position_jet(p, order)?)
    }

    /// The unit normal of the image, oriented along `dM(η)`.
    fn normal_jet(&self, p: [f64; 3], order: usize) -> Result<Vec<Jet>> {
        let pos = self.position_jet(p, order + 1)?;
        let t: Vec<Vec<Jet>> = (0..3).map(|k| pos.iter().map(|x| x.d(k)).collect()).collect();
        let n = cross4(&t[0], &t[1], &t[2]);
        let len = dot(false, &n, &n).sqrt().recip();
        let n: Vec<Jet> = n.into_iter().map(|x| x * len).collect();
        let x = self.inner.position(p)?;
        let eta: Vec<f64> = self.inner.normal_jet(p, 0)?.iter().map(Jet::value).collect();
        let reference = self.pipeline.push(&x, &eta)?;
        let sign = n.iter().zip(&reference).map(|(a, b)| a.value() * b).sum::<f64>();
        Ok(if sign < 0.0 { n.into_iter().map(|x| -x).collect() } else { n })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{instantiate_catalog, ChartKind, ChartSpec};
    use crate::construction::{assemble_hypersurface, derive_bars, find_admissible_intervals, select_interval, Profile};
    use crate::hypersurface::local_geometry;
    use proptest::prelude::*;

    fn sphere_point(a: f64, b: f64, c: f64) -> [f64; 4] {
        [a.cos(), a.sin() * b.cos(), a.sin() * b.sin() * c.cos(), a.sin() * b.sin() * c.sin()]
    }

    fn hyperboloid_point(u: f64, v: f64, w: f64) -> [f64; 4] {
        [u.cosh(), u.sinh() * v.cos(), u.sinh() * v.sin() * w.cos(), u.sinh() * v.sin() * w.sin()]
    }

    fn with_t(x: [f64; 4], t: f64) -> Vec<f64> {
        let mut v = x.to_vec();
        v.push(t);
        v
    }

    #[test]
    fn apply_examples() {
        let s = Epsilon::Spherical;
        let x = sphere_point(0.3, 0.7, 1.1);
        let y = ConformalMap::Phi.apply(s, &with_t(x, 0.0)).unwrap();
        assert_eq!(y, x.to_vec());
        let y = ConformalMap::Phi.apply(s, &[1.0, 0.0, 0.0, 0.0, 2f64.ln()]).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-15);

        let h = Epsilon::Hyperbolic;
        let y = ConformalMap::Phi.apply(h, &[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(y, vec![0.0, 0.0, 2.0, 0.0]);

        let inv = ConformalMap::Inversion { center: [0.0; 4], radius: 1.0 };
        let y = inv.apply(Epsilon::Flat, &[2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(y, vec![0.5, 0.0, 0.0, 0.0]);
        assert!(matches!(inv.apply(Epsilon::Flat, &[0.0; 4]), Err(Error::MapDomain(_))));
        assert!(ConformalMap::Inversion { center: [0.0; 4], radius: 0.0 }.resolve(h).is_err());
        assert!(ConformalMap::PhiSphere.resolve(h).is_err());
    }

    #[test]
    fn null_basis_has_the_stated_inner_products() {
        let e0 = [1.0, 0.0, 0.0, 1.0];
        let e3 = [0.25, 0.0, 0.0, -0.25];
        assert_eq!(dot(true, &e0, &e0), 0.0);
        assert_eq!(dot(true, &e3, &e3), 0.0);
        assert_eq!(dot(true, &e0, &e3), -0.5);
        // y-coordinates reproduce the point
        let p = hyperboloid_point(0.4, 1.0, 2.0);
        let (y0, y3) = ((p[0] + p[3]) / 2.0, 2.0 * (p[0] - p[3]));
        for k in [0, 3] {
            assert!((y0 * e0[k] + y3 * e3[k] - p[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn jacobian_examples() {
        let s = Epsilon::Spherical;
        let c = map_jacobian_conformality(&ConformalMap::Phi, s, &with_t(sphere_point(0.4, 1.2, -0.3), 0.7)).unwrap();
        assert!((c.lambda - 0.7f64.exp()).abs() < 1e-8 && c.residual < 1e-8);
        let c = map_jacobian_conformality(&ConformalMap::Phi, Epsilon::Flat, &[0.3, 0.1, 2.0, 5.0]).unwrap();
        assert!((c.lambda - 1.0).abs() < 1e-10 && c.residual < 1e-10);
        let c = map_jacobian_conformality(&ConformalMap::Phi, Epsilon::Hyperbolic, &[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((c.lambda - 2.0).abs() < 1e-8 && c.residual < 1e-8, "{c:?}");
    }

    #[test]
    fn killing_examples() {
        assert_eq!(eval_conformal_killing(KillingField::Radial, &[1.0, 2.0, 0.0, 0.0]).unwrap(), vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(
            eval_conformal_killing(KillingField::Rotation { i: 1, j: 2 }, &[1.0, 0.0, 0.0, 0.0]).unwrap(),
            vec![0.0, 1.0, 0.0, 0.0]
        );
        assert_eq!(
            eval_conformal_killing(KillingField::Special { i: 1 }, &[1.0, 0.0, 0.0, 0.0]).unwrap(),
            vec![0.5, 0.0, 0.0, 0.0]
        );
        assert!(eval_conformal_killing(KillingField::Rotation { i: 2, j: 2 }, &[0.0; 4]).is_err());
        assert!(eval_conformal_killing(KillingField::Constant { i: 5 }, &[0.0; 4]).is_err());
        let json = serde_json::to_string(&KillingField::Rotation { i: 3, j: 4 }).unwrap();
        assert_eq!(json, r#"{"kind":"rotation","i":3,"j":4}"#);
    }

    #[test]
    fn relatedness_examples() {
        let s = MapPipeline::new(Epsilon::Spherical, &[ConformalMap::Phi]).unwrap();
        let r = field_relatedness_check(&s, KillingField::Radial, &with_t(sphere_point(0.2, 0.9, 2.0), -0.4), false).unwrap();
        assert!(r < 1e-7);
        let f = MapPipeline::new(Epsilon::Flat, &[]).unwrap();
        let r = field_relatedness_check(&f, KillingField::Constant { i: 4 }, &[0.2, 0.1, 0.3, 0.4], false).unwrap();
        assert!(r < 1e-10);
        let h = MapPipeline::new(Epsilon::Hyperbolic, &[ConformalMap::Phi]).unwrap();
        let r = field_relatedness_check(
            &h,
            KillingField::designated(Epsilon::Hyperbolic),
            &with_t(hyperboloid_point(0.5, 0.3, 1.0), 0.8),
            false,
        )
        .unwrap();
        assert!(r < 1e-7);
        // the origin-centred inversion sends the radial field to its negative
        let inv = MapPipeline::new(
            Epsilon::Spherical,
            &[ConformalMap::Phi, ConformalMap::Inversion { center: [0.0; 4], radius: 1.3 }],
        )
        .unwrap();
        let p = with_t(sphere_point(0.2, 0.9, 2.0), -0.4);
        assert!(field_relatedness_check(&inv, KillingField::Radial, &p, true).unwrap() < 1e-7);
        assert!(field_relatedness_check(&inv, KillingField::Radial, &p, false).unwrap() > 1.0);
    }

    #[test]
    fn pipeline_rules() {
        let inv = ConformalMap::Inversion { center: [3.0, 0.0, 0.0, 0.0], radius: 1.0 };
        let p = MapPipeline::new(Epsilon::Spherical, &[inv.clone()]).unwrap();
        assert_eq!(p.steps[0], ConformalMap::PhiSphere);
        assert!(MapPipeline::new(Epsilon::Spherical, &[inv, ConformalMap::Phi]).is_err());
        let steps: Vec<ConformalMap> =
            serde_json::from_str(r#"[{"kind":"phi"},{"kind":"inversion","center":[0,0,0,5],"radius":2}]"#).unwrap();
        assert_eq!(steps.len(), 2);
        assert!(serde_json::from_str::<Vec<ConformalMap>>(r#"[{"kind":"moebius"}]"#).is_err());
    }

    #[test]
    fn mapped_patch_normal_and_chain_rule() {
        let eps = Epsilon::Spherical;
        let spec = ChartSpec { kind: ChartKind::FlatTorus { r1: 0.6 }, domain: None, umbilic_gap: None };
        let chart = instantiate_catalog(&spec, eps).unwrap();
        let c = derive_bars(-1.0, 1.0, 31.0 / 24.0, eps);
        let iv = select_interval(&find_admissible_intervals(&c, eps, -2.0, 2.0, 400).unwrap(), 0.0, None).unwrap();
        let prof = Profile::new(c, eps, 0.0, iv).unwrap();
        let patch = assemble_hypersurface(chart, prof, (-0.3, 0.3)).unwrap();
        let pipe = MapPipeline::new(
            eps,
            &[ConformalMap::Phi, ConformalMap::Inversion { center: [0.0, 0.0, 0.0, 0.0], radius: 1.0 }],
        )
        .unwrap();
        let mapped = MappedHypersurface::new(patch.clone(), pipe.clone()).unwrap();
        for p in patch.box3().shrink(0.1).grid([2, 2, 2]) {
            let geo = local_geometry(&mapped, p, 2).unwrap();
            for t in &geo.tangents {
                assert!(dot(false, t, &geo.normal).abs() < 1e-12);
            }
            assert!((dot(false, &geo.normal, &geo.normal) - 1.0).abs() < 1e-12);
            // chain rule: J_F = J_M · J_f, with J_F by differences in parameter space
            let x = patch.position(p).unwrap();
            let g0 = local_geometry(&patch, p, 2).unwrap();
            for k in 0..3 {
                let fd = central_diff(
                    |t| {
                        let mut q = p;
                        q[k] += t;
                        mapped.position(q)
                    },
                    1e-4,
                )
                .unwrap();
                let chain = pipe.push(&x, &g0.tangents[k]).unwrap();
                for i in 0..4 {
                    assert!((fd[i] - chain[i]).abs() < 1e-6 * (1.0 + chain[i].abs()));
                }
            }
            // the normal follows dM(η)
            let eta = patch.eta(p).unwrap();
            let pushed = pipe.push(&x, &eta).unwrap();
            assert!(dot(false, &pushed, &geo.normal) > 0.0);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn phi_maps_are_conformal(a in 0.1f64..3.0, b in 0.1f64..3.0, c in -3.0f64..3.0, t in -2.0f64..2.0, u in 0.0f64..1.5) {
            let cs = map_jacobian_conformality(&ConformalMap::Phi, Epsilon::Spherical, &with_t(sphere_point(a, b, c), t)).unwrap();
            prop_assert!(cs.residual < 1e-8);
            prop_assert!((cs.lambda - cs.lambda_exact).abs() < 1e-8 * cs.lambda_exact);
            let ch = map_jacobian_conformality(&ConformalMap::Phi, Epsilon::Hyperbolic, &with_t(hyperboloid_point(u, b, c), t)).unwrap();
            prop_assert!(ch.residual < 1e-8);
            prop_assert!((ch.lambda - ch.lambda_exact).abs() < 1e-7 * ch.lambda_exact);
            let cf = map_jacobian_conformality(&ConformalMap::Phi, Epsilon::Flat, &[a, b, c, t]).unwrap();
            prop_assert!(cf.residual < 1e-8);
        }

        #[test]
        fn inversion_is_a_conformal_involution(
            p in proptest::array::uniform4(-3.0f64..3.0),
            c in proptest::array::uniform4(-1.0f64..1.0),
            r in 0.2f64..3.0,
        ) {
            let inv = ConformalMap::Inversion { center: c, radius: r };
            let d2: f64 = p.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            prop_assume!(d2 > 0.05);
            let e = Epsilon::Flat;
            let q = inv.apply(e, &p).unwrap();
            let back = inv.apply(e, &q).unwrap();
            for k in 0..4 {
                prop_assert!((back[k] - p[k]).abs() < 1e-10 * (1.0 + p[k].abs()));
            }
            let (lp, lq) = (inv.factor(e, &p).unwrap(), inv.factor(e, &q).unwrap());
            prop_assert!((lp * lq - 1.0).abs() < 1e-8);
            prop_assert!((lp * d2 / (r * r) - 1.0).abs() < 1e-12);
            let cj = map_jacobian_conformality(&inv, e, &p).unwrap();
            prop_assert!(cj.residual < 1e-7, "{:?}", cj);
        }

        #[test]
        fn killing_fields_are_conformal(p in proptest::array::uniform4(-2.0f64..2.0), i in 1usize..=4, j in 1usize..=4) {
            let mut fields = vec![KillingField::Constant { i }, KillingField::Radial, KillingField::Special { i }];
            if i != j {
                fields.push(KillingField::Rotation { i, j });
            }
            for f in fields {
                prop_assert!(killing_equation_residual(f, &p).unwrap() < 1e-8);
            }
        }
    }
}
