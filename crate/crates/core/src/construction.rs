//! Hypersurfaces of `Q³_ε × R` built from a linear Weingarten surface `h`
//! and the profile `a(s)`: `f(x, s) = h_s(x) + a(s) ∂/∂t`, where `h_s` is the
//! parallel surface at distance `s` and `a' = √((1 − r)/r)`.

use serde::{Deserialize, Serialize};

use crate::charts::{principal_from_jets, PrincipalData, SurfaceChart};
use crate::error::{Error, Result};
use crate::hypersurface::{Box3, Hypersurface};
use crate::jet::{Jet, Real};
use crate::quadrature;
use crate::spaceform::{ceps_seps, Epsilon};

/// `(P, Q, R)` of `P K_ext + Q H = R` together with the barred combinations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeingartenCoefficients {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub p_bar: f64,
    pub q_bar: f64,
    pub r_bar: f64,
    pub lambda: f64,
}

pub fn derive_bars(p: f64, q: f64, r: f64, eps: Epsilon) -> WeingartenCoefficients {
    let e = eps.value();
    WeingartenCoefficients {
        p,
        q,
        r,
        p_bar: p + e * r,
        q_bar: q,
        r_bar: p - e * r + 4.0,
        lambda: 2.0 * (e * e - 1.0) * r,
    }
}

/// Integration constants `(c1, c2, λ)` with `e^{-2B} = c1 C(2s) + c2 S(2s) + (1−ε²) λ S² + ε(ε+λ)/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProofConstants {
    pub c1: f64,
    pub c2: f64,
    pub lambda: f64,
}

impl ProofConstants {
    pub fn to_pqr(&self, eps: Epsilon) -> [f64; 3] {
        let e = eps.value();
        let ProofConstants { c1, c2, lambda } = *self;
        [
            e * (e + lambda) + 2.0 * c1 - 2.0,
            4.0 * c2,
            e * e * (e + lambda) + 2.0 * e * c1 - 2.0 * lambda,
        ]
    }

    /// Inverse of [`ProofConstants::to_pqr`].
    pub fn from_pqr(pqr: [f64; 3], eps: Epsilon) -> ProofConstants {
        let [p, q, r] = pqr;
        let e = eps.value();
        match eps {
            Epsilon::Flat => ProofConstants { c1: 0.5 * (p + 2.0), c2: 0.25 * q, lambda: -0.5 * r },
            _ => ProofConstants {
                c1: 0.25 * (p + e * r),
                c2: 0.25 * q,
                lambda: 0.5 * e * (p - e * r + 2.0),
            },
        }
    }

    /// `e^{-2B(s)}` written with the integration constants.
    pub fn r_at<T: Real>(&self, eps: Epsilon, s: T) -> T {
        let e = eps.value();
        let (c2s, s2s) = ceps_seps(eps, s * 2.0);
        let (_, sn) = ceps_seps(eps, s);
        c2s * self.c1 + s2s * self.c2 + sn * sn * ((1.0 - e * e) * self.lambda)
            + 0.5 * e * (e + self.lambda)
    }
}

/// `(P, Q, R)` from the integration constants, with the largest pointwise
/// gap between `4 r(s)` computed both ways over `s ∈ [−1, 1]`.
pub fn constants_roundtrip(c: ProofConstants, eps: Epsilon) -> ([f64; 3], f64) {
    let pqr = c.to_pqr(eps);
    let coeffs = derive_bars(pqr[0], pqr[1], pqr[2], eps);
    let mut worst = 0.0f64;
    for i in 0..=200 {
        let s = -1.0 + 2.0 * i as f64 / 200.0;
        worst = worst.max((4.0 * eval_r(&coeffs, eps, s) - 4.0 * c.r_at(eps, s)).abs());
    }
    (pqr, worst)
}

/// `r(s) = ¼(P̄ C(2s) + Q̄ S(2s) + Λ S(s)² + R̄)`.
pub fn eval_r<T: Real>(c: &WeingartenCoefficients, eps: Epsilon, s: T) -> T {
    let (c2s, s2s) = ceps_seps(eps, s * 2.0);
    let (_, sn) = ceps_seps(eps, s);
    (c2s * c.p_bar + s2s * c.q_bar + sn * sn * c.lambda + c.r_bar) * 0.25
}

/// `r'(s)`.
pub fn eval_r_prime(c: &WeingartenCoefficients, eps: Epsilon, s: f64) -> f64 {
    eval_r(c, eps, Jet::var(2, s, 1)).grad(2)
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fa < 0.0) == (fm < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Maximal open subintervals of `[lo, hi]` on which `0 < r < 1`.
///
/// Critical points of `r` are located first so that every cell of the scan is
/// monotone; a tangency `r = 1` therefore splits intervals correctly.
pub fn find_admissible_intervals(
    c: &WeingartenCoefficients,
    eps: Epsilon,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    if n < 64 {
        return Err(Error::InvalidParams(format!("scan resolution {n} below 64")));
    }
    if !(lo < hi) {
        return Err(Error::InvalidParams(format!("empty scan range [{lo}, {hi}]")));
    }
    let r = |s: f64| eval_r(c, eps, s);
    let dr = |s: f64| eval_r_prime(c, eps, s);
    let mut knots: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let mut crit = Vec::new();
    for w in knots.windows(2) {
        let (da, db) = (dr(w[0]), dr(w[1]));
        if da != 0.0 && db != 0.0 && (da < 0.0) != (db < 0.0) {
            crit.push(bisect(dr, w[0], w[1]));
        }
    }
    knots.extend(crit);
    knots.sort_by(f64::total_cmp);

    // a knot where r touches 0 or 1 counts as outside
    let band = 1e-14;
    let inside = |v: f64| v > band && v < 1.0 - band;
    let crossing = |a: f64, b: f64, level: f64| {
        if (r(a) - level).abs() <= band {
            a
        } else if (r(b) - level).abs() <= band {
            b
        } else {
            bisect(|s| r(s) - level, a, b)
        }
    };
    let mut out = Vec::new();
    let mut start = if inside(r(knots[0])) { Some(knots[0]) } else { None };
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a == b {
            continue;
        }
        let (ra, rb) = (r(a), r(b));
        match (inside(ra), inside(rb)) {
            (true, true) => {}
            (true, false) => {
                let level = if rb <= 0.0 { 0.0 } else { 1.0 };
                out.push((start.take().unwrap_or(a), crossing(a, b, level)));
            }
            (false, true) => {
                let level = if ra <= 0.0 { 0.0 } else { 1.0 };
                start = Some(crossing(a, b, level));
            }
            (false, false) => {
                // monotone cell jumping over the whole band
                if (ra <= 0.0 && rb >= 1.0) || (ra >= 1.0 && rb <= 0.0) {
                    let t0 = crossing(a, b, 0.0);
                    let t1 = crossing(a, b, 1.0);
                    out.push((t0.min(t1), t0.max(t1)));
                }
            }
        }
    }
    if let Some(s) = start {
        out.push((s, *knots.last().expect("non-empty")));
    }
    out.retain(|(a, b)| b > a);
    Ok(out)
}

/// Picks an interval by index, else the one containing `s0`, else the widest.
pub fn select_interval(
    intervals: &[(f64, f64)],
    s0: f64,
    index: Option<usize>,
) -> Result<(f64, f64)> {
    if let Some(i) = index {
        return intervals.get(i).copied().ok_or_else(|| {
            Error::EmptyInterval(format!("interval index {i} of {} found", intervals.len()))
        });
    }
    if let Some(iv) = intervals.iter().find(|(a, b)| *a < s0 && s0 < *b) {
        return Ok(*iv);
    }
    intervals
        .iter()
        .max_by(|x, y| (x.1 - x.0).total_cmp(&(y.1 - y.0)))
        .copied()
        .ok_or_else(|| Error::EmptyInterval("no admissible interval in scan range".into()))
}

/// Values of the profile and its derived functions at one `s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileValues {
    pub a: f64,
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
    pub big_b: f64,
    pub big_b1: f64,
}

/// `r`, `a`, `b = √(1 + a'²)` and `B = log b` on an admissible interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Profile {
    pub coeffs: WeingartenCoefficients,
    pub eps: Epsilon,
    pub s0: f64,
    pub interval: (f64, f64),
    /// Extra `c s²` added to `a` (a negative control that breaks conformal flatness).
    pub perturbation: f64,
}

/// Margin kept from the ends of the interval where `a'` degenerates.
pub const EDGE_GUARD: f64 = 1e-9;

impl Profile {
    pub fn new(
        coeffs: WeingartenCoefficients,
        eps: Epsilon,
        s0: f64,
        interval: (f64, f64),
    ) -> Result<Self> {
        let p = Profile { coeffs, eps, s0, interval, perturbation: 0.0 };
        p.check(s0)?;
        Ok(p)
    }

    pub fn with_perturbation(mut self, c: f64) -> Self {
        self.perturbation = c;
        self
    }

    pub fn r<T: Real>(&self, s: T) -> T {
        eval_r(&self.coeffs, self.eps, s)
    }

    pub fn check(&self, s: f64) -> Result<()> {
        let (lo, hi) = self.interval;
        let r = self.r(s);
        if !(s > lo && s < hi) || 1.0 - r < EDGE_GUARD || r < EDGE_GUARD {
            return Err(Error::OutsideInterval { s, lo, hi });
        }
        Ok(())
    }

    fn a1_unperturbed(&self, s: f64) -> f64 {
        let r = self.r(s);
        ((1.0 - r) / r).sqrt()
    }

    /// `a(s) = ∫_{s0}^s a'`, by adaptive quadrature.
    pub fn a(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        let v = quadrature::integrate(|t| self.a1_unperturbed(t), self.s0, s, 1e-12)?;
        Ok(v + self.perturbation * s * s)
    }

    /// `a'(s)` as a jet in the third variable.
    pub fn a1_jet(&self, s: f64, order: usize) -> Result<Jet> {
        self.check(s)?;
        let x = Jet::var(2, s, order);
        let r = self.r(x);
        Ok(((x.lift(1.0) - r) / r).sqrt() + x * (2.0 * self.perturbation))
    }

    /// `a(s)` as a jet in the third variable.
    pub fn a_jet(&self, s: f64, order: usize) -> Result<Jet> {
        let a = self.a(s)?;
        if order == 0 {
            return Ok(Jet::constant(a, 0));
        }
        Ok(self.a1_jet(s, order - 1)?.integrate(2, a))
    }

    /// `B = ½ log(1 + a'²)` as a jet in the third variable.
    pub fn big_b_jet(&self, s: f64, order: usize) -> Result<Jet> {
        let a1 = self.a1_jet(s, order)?;
        Ok((a1 * a1 + 1.0).ln() * 0.5)
    }

    pub fn eval(&self, s: f64) -> Result<ProfileValues> {
        let a = self.a(s)?;
        let r = self.r(s);
        let dr = eval_r_prime(&self.coeffs, self.eps, s);
        let a1u = self.a1_unperturbed(s);
        let a1 = a1u + 2.0 * self.perturbation * s;
        let a2 = -dr / (2.0 * r * r * a1u) + 2.0 * self.perturbation;
        let b = (1.0 + a1 * a1).sqrt();
        Ok(ProfileValues { a, a1, a2, b, big_b: b.ln(), big_b1: a1 * a2 / (b * b) })
    }
}

/// The parallel surface `h_s = C(s) h + S(s) N` with normal `N_s = C N − ε S h`.
#[derive(Clone, Copy, Debug)]
pub struct ParallelSurface<'a> {
    pub chart: &'a SurfaceChart,
    pub s: f64,
}

pub fn parallel_surface(chart: &SurfaceChart, s: f64) -> ParallelSurface<'_> {
    ParallelSurface { chart, s }
}

/// `(h_s, N_s)` for generic scalars; `s` may itself be a jet variable.
pub fn parallel_pair<T: Real>(chart: &SurfaceChart, u: T, v: T, s: T) -> (Vec<T>, Vec<T>) {
    let eps = chart.eps();
    let h = chart.position(u, v);
    let n = chart.normal(u, v);
    let (c, sn) = ceps_seps(eps, s);
    let hs = h.iter().zip(&n).map(|(&hi, &ni)| c * hi + sn * ni).collect();
    let ns = h
        .iter()
        .zip(&n)
        .map(|(&hi, &ni)| c * ni - sn * hi * eps.value())
        .collect();
    (hs, ns)
}

impl ParallelSurface<'_> {
    pub fn position<T: Real>(&self, u: T, v: T) -> Vec<T> {
        parallel_pair(self.chart, u, v, u.lift(self.s)).0
    }

    pub fn normal<T: Real>(&self, u: T, v: T) -> Vec<T> {
        parallel_pair(self.chart, u, v, u.lift(self.s)).1
    }

    /// Principal data by differentiating `h_s` directly.
    pub fn fundamental_forms(&self, x1: f64, x2: f64) -> Result<PrincipalData> {
        let u = Jet::var(0, x1, 2);
        let v = Jet::var(1, x2, 2);
        let pos = self.position(u, v);
        let n = self.normal(x1, x2);
        let pd = principal_from_jets(self.chart.eps().lorentzian(), &pos, &n)?;
        if pd.v[0] < 1e-12 || pd.v[1] < 1e-12 {
            return Err(Error::Focal(format!("h_s degenerates at ({x1}, {x2}, {})", self.s)));
        }
        Ok(pd)
    }

    /// Principal data from `v_i^s = C v_i − S V_i` and `V_i^s = ε S v_i + C V_i`.
    pub fn principal_formula(&self, x1: f64, x2: f64) -> Result<PrincipalData> {
        let base = self.chart.fundamental_forms(x1, x2)?;
        let eps = self.chart.eps();
        let (c, sn) = ceps_seps(eps, self.s);
        let v = [0, 1].map(|i| c * base.v[i] - sn * base.big_v[i]);
        if v.iter().any(|x| x.abs() < 1e-12) {
            return Err(Error::Focal(format!("v_i^s = 0 at ({x1}, {x2}, {})", self.s)));
        }
        let big_v = [0, 1].map(|i| eps.value() * sn * base.v[i] + c * base.big_v[i]);
        let k = [big_v[0] / v[0], big_v[1] / v[1]];
        let pd = self.fundamental_forms(x1, x2)?;
        Ok(PrincipalData {
            v: [v[0].abs(), v[1].abs()],
            big_v: [big_v[0] * v[0].signum(), big_v[1] * v[1].signum()],
            k,
            e: pd.e,
            k_ext: k[0] * k[1],
            h_mean: 0.5 * (k[0] + k[1]),
        })
    }
}

/// `(K^s_ext, H^s)` of the parallel surface at distance `s`.
pub fn curvature_transform<T: Real>(k: T, h: T, eps: Epsilon, s: T) -> Result<(T, T)> {
    let e = eps.value();
    let (c, sn) = ceps_seps(eps, s);
    let (c2s, s2s) = ceps_seps(eps, s * 2.0);
    let den = c * c - s2s * h + sn * sn * k;
    if den.value().abs() < 1e-12 {
        return Err(Error::Focal(format!("parallel surface singular at s = {}", s.value())));
    }
    let ks = (sn * sn * (e * e) + s2s * h * e + c * c * k) / den;
    let hs = (s2s * e + c2s * h * 2.0 - s2s * k) / (den * 2.0);
    Ok((ks, hs))
}

/// The hypersurface `f(x, s) = h_s(x) + a(s) ∂/∂t` on a parameter box.
#[derive(Clone, Debug)]
pub struct HypersurfacePatch {
    pub chart: SurfaceChart,
    pub profile: Profile,
    pub eps: Epsilon,
    /// `s`-range of the patch, inside the admissible interval.
    pub window: (f64, f64),
}

pub fn assemble_hypersurface(
    chart: SurfaceChart,
    profile: Profile,
    window: (f64, f64),
) -> Result<HypersurfacePatch> {
    let eps = chart.eps();
    if profile.eps != eps {
        return Err(Error::InvalidParams("profile and chart disagree on eps".into()));
    }
    if !(window.0 < window.1) {
        return Err(Error::InvalidParams(format!("empty s-window {window:?}")));
    }
    profile.check(window.0)?;
    profile.check(window.1)?;
    Ok(HypersurfacePatch { chart, profile, eps, window })
}

impl HypersurfacePatch {
    pub fn box3(&self) -> Box3 {
        let d = self.chart.domain();
        Box3 { lo: [d.x1[0], d.x2[0], self.window.0], hi: [d.x1[1], d.x2[1], self.window.1] }
    }

    fn seeds(&self, p: [f64; 3], order: usize) -> Result<[Jet; 3]> {
        if !self.box3().contains(p) {
            return Err(Error::OutOfDomain(p.to_vec()));
        }
        Ok(Jet::seed(p, order))
    }

    /// `(h_s, N_s)` as jets in all three variables.
    pub fn parallel_jets(&self, p: [f64; 3], order: usize) -> Result<(Vec<Jet>, Vec<Jet>)> {
        let [u, v, s] = self.seeds(p, order)?;
        Ok(parallel_pair(&self.chart, u, v, s))
    }

    pub fn f_jet(&self, p: [f64; 3], order: usize) -> Result<Vec<Jet>> {
        let (mut hs, _) = self.parallel_jets(p, order)?;
        hs.push(self.profile.a_jet(p[2], order)?);
        Ok(hs)
    }

    /// `η = −(a'/b) N_s + (1/b) ∂/∂t`.
    pub fn eta_jet(&self, p: [f64; 3], order: usize) -> Result<Vec<Jet>> {
        let (_, ns) = self.parallel_jets(p, order)?;
        let a1 = self.profile.a1_jet(p[2], order)?;
        let inv_b = (a1 * a1 + 1.0).sqrt().recip();
        let w = -(a1 * inv_b);
        let mut eta: Vec<Jet> = ns.into_iter().map(|x| x * w).collect();
        eta.push(inv_b);
        Ok(eta)
    }

    pub fn f(&self, p: [f64; 3]) -> Result<Vec<f64>> {
        Ok(self.f_jet(p, 0)?.iter().map(Jet::value).collect())
    }

    pub fn eta(&self, p: [f64; 3]) -> Result<Vec<f64>> {
        Ok(self.eta_jet(p, 0)?.iter().map(Jet::value).collect())
    }

    /// Principal curvatures of `h_s` at `(x1, x2)` from the closed formula.
    pub fn parallel_curvatures(&self, p: [f64; 3]) -> Result<[f64; 2]> {
        let base = self.chart.fundamental_forms(p[0], p[1])?;
        let e = self.eps.value();
        let (c, sn) = ceps_seps(self.eps, p[2]);
        let mut k = [0.0; 2];
        for i in 0..2 {
            let den = c - sn * base.k[i];
            if den.abs() < 1e-12 {
                return Err(Error::Focal(format!("focal point at {p:?}")));
            }
            k[i] = (e * sn + c * base.k[i]) / den;
        }
        Ok(k)
    }

    /// Principal curvatures of `f` along `∂1, ∂2, ∂s` from the closed formula
    /// `A X = −(a'/b) A^s X`, `A ∂s = (a''/b³) ∂s`.
    pub fn closed_form_principal(&self, p: [f64; 3]) -> Result<[f64; 3]> {
        let k = self.parallel_curvatures(p)?;
        let pv = self.profile.eval(p[2])?;
        let w = -pv.a1 / pv.b;
        Ok([w * k[0], w * k[1], pv.a2 / pv.b.powi(3)])
    }
}

impl Hypersurface for HypersurfacePatch {
    fn ambient_dim(&self) -> usize {
        self.eps.product_dim()
    }

    fn lorentzian(&self) -> bool {
        self.eps.lorentzian()
    }

    fn domain(&self) -> Box3 {
        self.box3()
    }

    fn position_jet(&self, p: [f64; 3], order: usize) -> Result<Vec<Jet>> {
        self.f_jet(p, order)
    }

    fn normal_jet(&self, p: [f64; 3], order: usize) -> Result<Vec<Jet>> {
        self.eta_jet(p, order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{instantiate_catalog, ChartKind, ChartSpec};
    use crate::hypersurface::local_geometry;
    use crate::spaceform::inner;
    use proptest::prelude::*;

    fn cylinder() -> SurfaceChart {
        let spec = ChartSpec {
            kind: ChartKind::CylinderOverPlaneCurve { radius: Some(1.0), plane_curve: None },
            domain: None,
            umbilic_gap: None,
        };
        instantiate_catalog(&spec, Epsilon::Flat).unwrap()
    }

    fn torus() -> SurfaceChart {
        let spec = ChartSpec { kind: ChartKind::FlatTorus { r1: 0.6 }, domain: None, umbilic_gap: None };
        instantiate_catalog(&spec, Epsilon::Spherical).unwrap()
    }

    fn cylinder_patch() -> HypersurfacePatch {
        let eps = Epsilon::Flat;
        let c = derive_bars(-1.0, 1.0, 0.5, eps);
        let iv = select_interval(&find_admissible_intervals(&c, eps, -2.0, 2.0, 400).unwrap(), 0.0, None)
            .unwrap();
        let prof = Profile::new(c, eps, 0.0, iv).unwrap();
        assemble_hypersurface(cylinder(), prof, (-0.5, 0.8)).unwrap()
    }

    #[test]
    fn bars_examples() {
        let c = derive_bars(-1.0, 2.0, 1.0, Epsilon::Flat);
        assert_eq!((c.p_bar, c.q_bar, c.lambda, c.r_bar), (-1.0, 2.0, -2.0, 3.0));
        let c = derive_bars(1.0, 0.0, -1.0, Epsilon::Spherical);
        assert_eq!((c.p_bar, c.q_bar, c.lambda, c.r_bar), (0.0, 0.0, 0.0, 6.0));
        for eps in [Epsilon::Spherical, Epsilon::Hyperbolic] {
            assert_eq!(derive_bars(0.3, -2.0, 7.0, eps).lambda, 0.0);
        }
    }

    #[test]
    fn constants_examples() {
        let (pqr, res) = constants_roundtrip(ProofConstants { c1: 1.0, c2: 0.0, lambda: 0.0 }, Epsilon::Flat);
        assert_eq!(pqr, [0.0, 0.0, 0.0]);
        assert!(res < 1e-12);
        let (pqr, _) = constants_roundtrip(ProofConstants { c1: 0.0, c2: 0.0, lambda: 0.0 }, Epsilon::Spherical);
        assert_eq!(pqr, [-1.0, 0.0, 1.0]);
        for c2 in [-3.0, 0.0, 5.0] {
            let (pqr, _) = constants_roundtrip(ProofConstants { c1: 0.4, c2, lambda: 1.5 }, Epsilon::Flat);
            assert_eq!(pqr[2], -3.0);
        }
    }

    #[test]
    fn r_examples() {
        let c = derive_bars(-1.0, 2.0, 1.0, Epsilon::Flat);
        assert_eq!(eval_r(&c, Epsilon::Flat, 0.0), 0.5);
        for s in [-0.3, 0.2, 0.9, 1.0] {
            let want = (1.0 + 2.0 * s - s * s) / 2.0;
            assert!((eval_r(&c, Epsilon::Flat, s) - want).abs() < 1e-15);
        }
        assert!((eval_r(&c, Epsilon::Flat, 1.0) - 1.0).abs() < 1e-15);
        let clifford = derive_bars(1.0, 0.0, -1.0, Epsilon::Spherical);
        for s in [-2.0, 0.1, 3.0] {
            assert!((eval_r(&clifford, Epsilon::Spherical, s) - 1.5).abs() < 1e-15);
        }
        // r' in closed form: ¼(2 Q̄ C(2s) − 2ε P̄ S(2s) + Λ S(2s))
        let c = derive_bars(-1.0, 1.0, 0.5, Epsilon::Hyperbolic);
        let s: f64 = 0.37;
        let want = 0.25 * (2.0 * c.q_bar * (2.0 * s).cosh() + 2.0 * c.p_bar * (2.0 * s).sinh());
        assert!((eval_r_prime(&c, Epsilon::Hyperbolic, s) - want).abs() < 1e-14);
    }

    #[test]
    fn interval_examples() {
        let c = derive_bars(-1.0, 2.0, 1.0, Epsilon::Flat);
        let iv = find_admissible_intervals(&c, Epsilon::Flat, -2.0, 2.0, 256).unwrap();
        // r touches 1 at s = 1, which closes the interval around the base point
        let (lo, hi) = select_interval(&iv, 0.0, None).unwrap();
        assert!((lo - (1.0 - 2f64.sqrt())).abs() < 1e-8);
        assert!((hi - 1.0).abs() < 1e-8);

        let clifford = derive_bars(1.0, 0.0, -1.0, Epsilon::Spherical);
        assert!(find_admissible_intervals(&clifford, Epsilon::Spherical, -3.0, 3.0, 128)
            .unwrap()
            .is_empty());
        assert!(find_admissible_intervals(&c, Epsilon::Flat, -2.0, 2.0, 10).is_err());
    }

    #[test]
    fn tangency_splits_the_interval() {
        // r = 1 − (1−s)²/2 touches 1 at s = 1 from below
        let c = derive_bars(-1.0, 2.0, 1.0, Epsilon::Flat);
        let iv = find_admissible_intervals(&c, Epsilon::Flat, -0.3, 2.7, 300).unwrap();
        assert_eq!(iv.len(), 2, "{iv:?}");
        assert!((iv[0].1 - 1.0).abs() < 1e-8 && (iv[1].0 - 1.0).abs() < 1e-8);
        assert!((iv[1].1 - (1.0 + 2f64.sqrt())).abs() < 1e-8);
    }

    #[test]
    fn symmetric_intervals_for_even_profiles() {
        // Q̄ = 0 on the sphere: r is even and π-periodic
        let eps = Epsilon::Spherical;
        let c = derive_bars(-1.0, 0.0, 0.6, eps);
        let iv = find_admissible_intervals(&c, eps, -3.0, 3.0, 600).unwrap();
        assert!(!iv.is_empty());
        for &(a, b) in &iv {
            let mirrored = iv.iter().any(|&(x, y)| (x + b).abs() < 1e-8 && (y + a).abs() < 1e-8);
            let a_inside = a > -3.0 + 1e-9;
            let b_inside = b < 3.0 - 1e-9;
            if a_inside && b_inside {
                assert!(mirrored, "{iv:?}");
            }
        }
    }

    #[test]
    fn selection_rules() {
        let ivs = [(-1.0, 0.5), (1.0, 4.0)];
        assert_eq!(select_interval(&ivs, 0.0, None).unwrap(), (-1.0, 0.5));
        assert_eq!(select_interval(&ivs, 0.7, None).unwrap(), (1.0, 4.0));
        assert_eq!(select_interval(&ivs, 0.0, Some(1)).unwrap(), (1.0, 4.0));
        assert!(matches!(select_interval(&[], 0.0, None), Err(Error::EmptyInterval(_))));
    }

    #[test]
    fn profile_quadrature_against_simpson() {
        let eps = Epsilon::Flat;
        let c = derive_bars(-1.0, 2.0, 1.0, eps);
        let prof = Profile::new(c, eps, 0.0, (1.0 - 2f64.sqrt(), 1.0)).unwrap();
        assert_eq!(prof.a(0.0).unwrap(), 0.0);
        let oracle = crate::quadrature::simpson(
            |s| {
                let r = (1.0 + 2.0 * s - s * s) / 2.0;
                ((1.0 - r) / r).sqrt()
            },
            0.0,
            0.5,
            1_000_000,
        );
        assert!((prof.a(0.5).unwrap() - oracle).abs() < 1e-9);
        assert!(prof.a(1.2).is_err());
    }

    #[test]
    fn a2_matches_jet_derivative() {
        let eps = Epsilon::Hyperbolic;
        let c = derive_bars(-1.0, 1.0, -1.0 + 0.5 * (1f64.tanh() + 1.0 / 1f64.tanh()), eps);
        let iv = select_interval(&find_admissible_intervals(&c, eps, -2.0, 2.0, 400).unwrap(), 0.0, None)
            .unwrap();
        let prof = Profile::new(c, eps, 0.0, iv).unwrap();
        for s in [-0.3, 0.1, 0.4] {
            let pv = prof.eval(s).unwrap();
            let j = prof.a_jet(s, 4).unwrap();
            assert!((j.grad(2) - pv.a1).abs() < 1e-14);
            assert!((j.partial([0, 0, 2]) - pv.a2).abs() < 1e-12);
            let bj = prof.big_b_jet(s, 1).unwrap();
            assert!((bj.grad(2) - pv.big_b1).abs() < 1e-12);
        }
    }

    #[test]
    fn parallel_surface_examples() {
        let cyl = cylinder();
        let p0 = parallel_surface(&cyl, 0.0);
        assert_eq!(p0.position(0.3, 0.2), cyl.position(0.3, 0.2));
        assert_eq!(p0.normal(0.3, 0.2), cyl.normal(0.3, 0.2));
        let ps = parallel_surface(&cyl, 0.25);
        let x = ps.position(0.3, 0.2);
        assert!(((x[0] * x[0] + x[1] * x[1]).sqrt() - 0.75).abs() < 1e-15);

        let tor = torus();
        let s: f64 = 0.4;
        let x = parallel_surface(&tor, s).position(0.3, 1.1);
        let (r1, r2) = (0.6 * s.cos() - 0.8 * s.sin(), 0.8 * s.cos() + 0.6 * s.sin());
        let want = [r1 * 0.3f64.cos(), r1 * 0.3f64.sin(), r2 * 1.1f64.cos(), r2 * 1.1f64.sin()];
        for k in 0..4 {
            assert!((x[k] - want[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn curvature_transform_examples() {
        for s in [-0.4, 0.0, 0.3, 0.6] {
            let (ks, hs) = curvature_transform(0.0, 0.5, Epsilon::Flat, s).unwrap();
            assert!(ks.abs() < 1e-15);
            assert!((hs - 1.0 / (2.0 * (1.0 - s))).abs() < 1e-14);
            let pd = parallel_surface(&cylinder(), s).fundamental_forms(0.3, 0.1).unwrap();
            assert!((pd.h_mean - hs).abs() < 1e-10 && (pd.k_ext - ks).abs() < 1e-10);

            let (ks, hs) = curvature_transform(-1.0, 0.0, Epsilon::Spherical, s).unwrap();
            assert!((ks + 1.0).abs() < 1e-14);
            assert!((hs - (2.0 * s).tan()).abs() < 1e-14);
        }
        assert_eq!(curvature_transform(0.3, 0.7, Epsilon::Hyperbolic, 0.0).unwrap(), (0.3, 0.7));
        assert!(matches!(curvature_transform(0.0, 0.5, Epsilon::Flat, 1.0), Err(Error::Focal(_))));
    }

    #[test]
    fn parallel_formula_matches_direct_differentiation() {
        let tor = torus();
        for s in [-0.5, 0.2, 0.5] {
            let ps = parallel_surface(&tor, s);
            let a = ps.principal_formula(0.4, 0.9).unwrap();
            let b = ps.fundamental_forms(0.4, 0.9).unwrap();
            for i in 0..2 {
                assert!((a.v[i] - b.v[i]).abs() < 1e-12);
                assert!((a.k[i] - b.k[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn patch_normal_and_metric_blocks() {
        let patch = cylinder_patch();
        for p in patch.box3().grid([3, 3, 4]) {
            let geo = local_geometry(&patch, p, 2).unwrap();
            let eta = patch.eta(p).unwrap();
            assert!((inner(false, &eta, &eta) - 1.0).abs() < 1e-12);
            for t in &geo.tangents {
                assert!(inner(false, &eta, t).abs() < 1e-12);
            }
            let g = geo.metric();
            let b = patch.profile.eval(p[2]).unwrap().b;
            assert!(g[(0, 2)].abs() < 1e-10 && g[(1, 2)].abs() < 1e-10);
            assert!((g[(2, 2)] - b * b).abs() < 1e-10);
        }
    }

    #[test]
    fn shape_operator_matches_closed_form() {
        let patch = cylinder_patch();
        for p in patch.box3().grid([2, 2, 5]) {
            let a = local_geometry(&patch, p, 2).unwrap().shape_operator().unwrap();
            let want = patch.closed_form_principal(p).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let w = if i == j { want[i] } else { 0.0 };
                    assert!((a[(i, j)] - w).abs() < 1e-10, "{p:?} {a}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn b_squared_r_is_one(s in -0.4f64..0.95) {
            let eps = Epsilon::Flat;
            let c = derive_bars(-1.0, 2.0, 1.0, eps);
            let prof = Profile::new(c, eps, 0.0, (1.0 - 2f64.sqrt(), 1.0)).unwrap();
            if let Ok(pv) = prof.eval(s) {
                prop_assert!((pv.b * pv.b * prof.r(s) - 1.0).abs() < 1e-12);
                prop_assert!(pv.a1 >= 0.0);
            }
        }

        #[test]
        fn constants_invert(p in -3.0f64..3.0, q in -3.0f64..3.0, r in -3.0f64..3.0, e in -1i8..=1) {
            let eps = Epsilon::try_from(e).unwrap();
            let c = ProofConstants::from_pqr([p, q, r], eps);
            let back = c.to_pqr(eps);
            prop_assert!((back[0] - p).abs() < 1e-12 && (back[1] - q).abs() < 1e-12 && (back[2] - r).abs() < 1e-12);
            let coeffs = derive_bars(p, q, r, eps);
            for s in [-0.7, 0.0, 0.45] {
                prop_assert!((eval_r(&coeffs, eps, s) - c.r_at(eps, s)).abs() < 1e-12);
            }
        }

        #[test]
        fn parallel_curvature_derivatives(k in -2.0f64..2.0, h in -2.0f64..2.0, s in -0.3f64..0.3, e in -1i8..=1) {
            let eps = Epsilon::try_from(e).unwrap();
            let sj = Jet::var(2, s, 1);
            let lift = |x: f64| Jet::constant(x, 1);
            if let Ok((ks, hs)) = curvature_transform(lift(k), lift(h), eps, sj) {
                if curvature_transform(k, h, eps, s + 1e-4).is_ok() && curvature_transform(k, h, eps, s - 1e-4).is_ok() {
                    let (kp, hp) = curvature_transform(k, h, eps, s + 1e-4).unwrap();
                    let (km, hm) = curvature_transform(k, h, eps, s - 1e-4).unwrap();
                    let (dk, dh) = ((kp - km) / 2e-4, (hp - hm) / 2e-4);
                    let e = eps.value();
                    let scale = (1.0 + ks.value().abs() + hs.value().abs()).powi(4);
                    prop_assert!((dk - 2.0 * hs.value() * (e + ks.value())).abs() < 1e-6 * scale);
                    prop_assert!((dh - (e + 2.0 * hs.value().powi(2) - ks.value())).abs() < 1e-6 * scale);
                    prop_assert!((ks.grad(2) - 2.0 * hs.value() * (e + ks.value())).abs() < 1e-9 * scale);
                }
            }
        }
    }
}
