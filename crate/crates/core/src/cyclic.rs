//! Certification of the cyclic property for hypersurfaces of `R⁴`: principal
//! frames, the `ρ_j`, `μ`, `ζ` quantities, curvature-line traces and
//! least-squares circle and sphere fits.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::conformal::KillingField;
use crate::curvature::{christoffel_jets, metric_inverse};
use crate::error::{Error, Result};
use crate::hypersurface::{
    eigen_jet, g_angle, g_inner, local_geometry, Box3, Hypersurface, LocalGeometry, Principal,
};
use crate::jet::{dot, Jet, Real};

/// Stencil step as a fraction of the domain scale.
pub const STENCIL_FRACTION: f64 = 1e-3;
/// Default minimum scaled gap between principal curvatures.
pub const DEFAULT_MIN_GAP: f64 = 1e-5;
/// Scaled tolerance for the pointwise criteria.
pub const ITEM_TOL: f64 = 1e-4;
/// Scaled tolerance for circle, sphere and pencil fits.
pub const FIT_TOL: f64 = 1e-6;
/// Quadratic coefficient below which a sphere fit is reported as a hyperplane.
pub const FLAT_SPHERE: f64 = 1e-10;

/// Which principal curvature plays the role of `λ₁`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Distinguished {
    /// The one whose direction is closest to `∂_s`.
    AlongS,
    /// Position in the descending order.
    Index(usize),
}

#[derive(Clone, Debug)]
pub struct PrincipalFrame {
    pub point: [f64; 3],
    /// `λ₁` first, then the remaining two in descending order.
    pub lambda: [f64; 3],
    /// `g`-unit principal directions in parameter coordinates.
    pub dirs: [Vector3<f64>; 3],
    /// `F_* e_i` in ambient coordinates.
    pub e: [Vec<f64>; 3],
    pub normal: Vec<f64>,
    /// `max |λ| + 1`.
    pub scale: f64,
    /// Smallest pairwise gap, divided by `scale`.
    pub min_gap: f64,
    pub orthonormality: f64,
    /// `max |A e_i − λ_i e_i|`, divided by `scale`.
    pub eigen_residual: f64,
    metric: Matrix3<f64>,
}

impl PrincipalFrame {
    pub fn metric(&self) -> Matrix3<f64> {
        self.metric
    }
}

enum Slots<'a> {
    Rule(Distinguished),
    Like(&'a PrincipalFrame),
}

fn cos_param(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.dot(b) / (a.norm() * b.norm())
}

fn order_slots(pr: [Principal; 3], g: &Matrix3<f64>, slots: &Slots) -> Result<[Principal; 3]> {
    match slots {
        Slots::Rule(rule) => {
            let first = match *rule {
                Distinguished::AlongS => {
                    let ds = Vector3::new(0.0, 0.0, 1.0);
                    (0..3)
                        .min_by(|&a, &b| g_angle(g, &pr[a].dir, &ds).total_cmp(&g_angle(g, &pr[b].dir, &ds)))
                        .expect("three directions")
                }
                Distinguished::Index(k) if k < 3 => k,
                Distinguished::Index(k) => {
                    return Err(Error::InvalidParams(format!("principal index {k} out of range")))
                }
            };
            let rest: Vec<usize> = (0..3).filter(|&k| k != first).collect();
            Ok([first, rest[0], rest[1]].map(|k| {
                let mut p = pr[k];
                // largest g-weighted component is positive
                let lead = (0..3)
                    .max_by(|&a, &b| {
                        (p.dir[a].abs() * g[(a, a)].sqrt()).total_cmp(&(p.dir[b].abs() * g[(b, b)].sqrt()))
                    })
                    .expect("three components");
                if p.dir[lead] < 0.0 {
                    p.dir = -p.dir;
                }
                p
            }))
        }
        Slots::Like(reference) => {
            let mut used = [false; 3];
            let mut out = pr;
            for (slot, want) in reference.dirs.iter().enumerate() {
                let k = (0..3)
                    .filter(|&k| !used[k])
                    .max_by(|&a, &b| {
                        cos_param(&pr[a].dir, want).abs().total_cmp(&cos_param(&pr[b].dir, want).abs())
                    })
                    .expect("an unused direction");
                used[k] = true;
                let mut p = pr[k];
                if p.dir.dot(want) < 0.0 {
                    p.dir = -p.dir;
                }
                out[slot] = p;
            }
            Ok(out)
        }
    }
}

fn assemble_frame(geo: &LocalGeometry, ordered: [Principal; 3], min_gap: f64) -> Result<PrincipalFrame> {
    let lambda = ordered.map(|p| p.lambda);
    let scale = lambda.iter().fold(0.0f64, |m, l| m.max(l.abs())) + 1.0;
    let gap = [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| (lambda[i] - lambda[j]).abs())
        .fold(f64::INFINITY, f64::min)
        / scale;
    if gap < min_gap {
        return Err(Error::NearUmbilic { gap, threshold: min_gap });
    }
    let dirs = ordered.map(|p| p.dir);
    let e = dirs.map(|d| geo.push(&d));
    let lor = geo.lorentzian;
    let mut ortho = (dot(lor, &geo.normal, &geo.normal) - 1.0).abs();
    for i in 0..3 {
        ortho = ortho.max(dot(lor, &e[i], &geo.normal).abs());
        for j in i..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((dot(lor, &e[i], &e[j]) - delta).abs());
        }
    }
    let g = geo.metric();
    let shape = geo.shape_operator()?;
    let eigen_residual = (0..3)
        .map(|i| {
            let r = shape * dirs[i] - dirs[i] * lambda[i];
            g_inner(&g, &r, &r).max(0.0).sqrt()
        })
        .fold(0.0, f64::max)
        / scale;
    Ok(PrincipalFrame {
        point: geo.p,
        lambda,
        dirs,
        e,
        normal: geo.normal.clone(),
        scale,
        min_gap: gap,
        orthonormality: ortho,
        eigen_residual,
        metric: g,
    })
}

/// Principal frame of `hs` at `p` with `λ₁` chosen by `rule`.
pub fn principal_frame(
    hs: &dyn Hypersurface,
    p: [f64; 3],
    rule: Distinguished,
    min_gap: f64,
) -> Result<PrincipalFrame> {
    let geo = local_geometry(hs, p, 2)?;
    let g = geo.metric();
    let ordered = order_slots(geo.principal()?, &g, &Slots::Rule(rule))?;
    assemble_frame(&geo, ordered, min_gap)
}

/// Frame at `q` whose slots and signs continue those of `reference`.
pub fn frame_like(
    hs: &dyn Hypersurface,
    q: [f64; 3],
    reference: &PrincipalFrame,
    min_gap: f64,
) -> Result<PrincipalFrame> {
    let geo = local_geometry(hs, q, 2)?;
    let g = geo.metric();
    let ordered = order_slots(geo.principal()?, &g, &Slots::Like(reference))?;
    assemble_frame(&geo, ordered, min_gap)
}

const OFFSETS: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];

fn stencil(p: [f64; 3], dir: &Vector3<f64>, h: f64) -> ([[f64; 3]; 4], f64) {
    let tau = h / dir.norm();
    let pts = OFFSETS.map(|k| [0, 1, 2].map(|i| p[i] + k * tau * dir[i]));
    (pts, tau)
}

fn diff4(v: [f64; 4], tau: f64) -> f64 {
    (v[0] - 8.0 * v[1] + 8.0 * v[2] - v[3]) / (12.0 * tau)
}

/// First-order quantities at one point.
struct Firsts {
    frame: PrincipalFrame,
    /// `e_i(λ₁)`.
    d_l1: [f64; 3],
    rho: [f64; 2],
    mu: f64,
}

struct Stencil<'a> {
    hs: &'a dyn Hypersurface,
    base: &'a PrincipalFrame,
    h: f64,
    min_gap: f64,
}

impl Stencil<'_> {
    fn firsts(&self, q: [f64; 3]) -> Result<Firsts> {
        let frame = frame_like(self.hs, q, self.base, self.min_gap)?;
        let mut d_l1 = [0.0; 3];
        for (i, d) in d_l1.iter_mut().enumerate() {
            let (pts, tau) = stencil(q, &frame.dirs[i], self.h);
            let mut v = [0.0; 4];
            for (k, x) in pts.iter().enumerate() {
                v[k] = frame_like(self.hs, *x, self.base, self.min_gap)?.lambda[0];
            }
            *d = diff4(v, tau);
        }
        let l = frame.lambda;
        let rho = [d_l1[1] / (l[0] - l[1]), d_l1[2] / (l[0] - l[2])];
        let mu = d_l1[0] / ((l[1] - l[0]) * (l[2] - l[0]));
        Ok(Firsts { frame, d_l1, rho, mu })
    }

    fn along(&self, p: [f64; 3], dir: &Vector3<f64>) -> Result<([Firsts; 4], f64)> {
        let (pts, tau) = stencil(p, dir, self.h);
        let [a, b, c, d] = pts;
        Ok(([self.firsts(a)?, self.firsts(b)?, self.firsts(c)?, self.firsts(d)?], tau))
    }
}

/// The quantities of the cyclic criteria at one point.
#[derive(Clone, Debug, Serialize)]
pub struct CyclicQuantities {
    pub point: [f64; 3],
    pub lambda: [f64; 3],
    pub scale: f64,
    pub rho: [f64; 2],
    pub mu: f64,
    /// `F_* e₁ − μ N`.
    pub zeta: Vec<f64>,
    /// `e_i(λ₁)` for `i = 1, 2, 3`.
    pub e_lambda1: [f64; 3],
    /// `e₁(ρ_j)`, `j = 2, 3`.
    pub e1_rho: [f64; 2],
    /// `(λ₁−λ_j) e_j e₁(λ₁) − 2 e₁(λ₁) e_j(λ₁)`.
    pub item3: [f64; 2],
    /// `e_j(μ)`.
    pub ej_mu: [f64; 2],
}

impl CyclicQuantities {
    pub fn scaled_e1_rho(&self) -> f64 {
        self.e1_rho[0].abs().max(self.e1_rho[1].abs()) / self.scale.powi(2)
    }

    pub fn scaled_item3(&self) -> f64 {
        self.item3[0].abs().max(self.item3[1].abs()) / self.scale.powi(4)
    }

    pub fn scaled_ej_mu(&self) -> f64 {
        self.ej_mu[0].abs().max(self.ej_mu[1].abs()) / self.scale
    }
}

/// Evaluates `ρ_j`, `μ`, `ζ` and the derivatives entering the cyclic
/// criteria by nested fourth-order stencils of the principal curvatures.
pub fn rho_mu_zeta(
    hs: &dyn Hypersurface,
    p: [f64; 3],
    rule: Distinguished,
    min_gap: f64,
) -> Result<CyclicQuantities> {
    let base = principal_frame(hs, p, rule, min_gap)?;
    let st = Stencil { hs, base: &base, h: STENCIL_FRACTION * hs.domain().scale(), min_gap };
    let center = st.firsts(p)?;
    let l = center.frame.lambda;

    let (on_e1, tau1) = st.along(p, &center.frame.dirs[0])?;
    let e1_rho = [0, 1].map(|j| diff4([0, 1, 2, 3].map(|k| on_e1[k].rho[j]), tau1));

    let mut item3 = [0.0; 2];
    let mut ej_mu = [0.0; 2];
    for j in 0..2 {
        let (on_ej, tau) = st.along(p, &center.frame.dirs[j + 1])?;
        let ej_e1_l1 = diff4([0, 1, 2, 3].map(|k| on_ej[k].d_l1[0]), tau);
        item3[j] = (l[0] - l[j + 1]) * ej_e1_l1 - 2.0 * center.d_l1[0] * center.d_l1[j + 1];
        ej_mu[j] = diff4([0, 1, 2, 3].map(|k| on_ej[k].mu), tau);
    }
    let zeta = center.frame.e[0]
        .iter()
        .zip(&center.frame.normal)
        .map(|(e, n)| e - center.mu * n)
        .collect();
    Ok(CyclicQuantities {
        point: p,
        lambda: l,
        scale: center.frame.scale,
        rho: center.rho,
        mu: center.mu,
        zeta,
        e_lambda1: center.d_l1,
        e1_rho,
        item3,
        ej_mu,
    })
}

/// `⟨∇_{e₁}∇_{e₁}e₁, e_j⟩` for `j = 2, 3`, from exact jets of the metric and
/// of the principal frame.
pub fn extrinsic_circle_defect(
    hs: &dyn Hypersurface,
    p: [f64; 3],
    rule: Distinguished,
    min_gap: f64,
) -> Result<[f64; 2]> {
    let base = principal_frame(hs, p, rule, min_gap)?;
    let geo = local_geometry(hs, p, 4)?;
    let start = Principal { lambda: base.lambda[0], dir: base.dirs[0] };
    let (_, e1) = eigen_jet(&geo.g, &geo.ii, &start)?;
    let ginv = metric_inverse(&geo.g)?;
    let gam = christoffel_jets(&geo.g, &ginv);
    let e1v = e1.map(|x| x.value());
    // W = ∇_{e₁} e₁ as a jet field
    let w: [Jet; 3] = [0, 1, 2].map(|c| {
        let mut acc = Jet::constant(0.0, 1);
        for a in 0..3 {
            let mut inner = e1[c].d(a).truncate(1);
            for b in 0..3 {
                inner += (gam[c][a][b] * e1[b]).truncate(1);
            }
            acc += (e1[a] * inner).truncate(1);
        }
        acc
    });
    let v = Vector3::from_fn(|c, _| {
        (0..3)
            .map(|a| {
                e1v[a] * (w[c].grad(a) + (0..3).map(|b| gam[c][a][b].value() * w[b].value()).sum::<f64>())
            })
            .sum()
    });
    let g = geo.metric();
    Ok([g_inner(&g, &v, &base.dirs[1]), g_inner(&g, &v, &base.dirs[2])])
}

/// A curvature line sampled at equal arclength steps.
#[derive(Clone, Debug)]
pub struct Trace {
    pub params: Vec<[f64; 3]>,
    pub points: Vec<Vec<f64>>,
    /// `F_* e_slot` along the line.
    pub tangents: Vec<Vec<f64>>,
    pub normals: Vec<Vec<f64>>,
}

/// Integrates `x' = e_slot(x)` by classical Runge–Kutta with the direction
/// sign carried continuously from the starting frame.
pub fn curvature_line_trace(
    hs: &dyn Hypersurface,
    start: [f64; 3],
    slot: usize,
    rule: Distinguished,
    arclength: f64,
    n_steps: usize,
    min_gap: f64,
) -> Result<Trace> {
    if slot > 2 {
        return Err(Error::InvalidParams(format!("direction index {slot} out of range")));
    }
    let mut frame = principal_frame(hs, start, rule, min_gap)?;
    let mut out = Trace {
        params: vec![start],
        points: vec![hs.position(start)?],
        tangents: vec![frame.e[slot].clone()],
        normals: vec![frame.normal.clone()],
    };
    if n_steps == 0 || arclength == 0.0 {
        return Ok(out);
    }
    let h = arclength / n_steps as f64;
    let mut x = start;
    let shift = |x: [f64; 3], k: &Vector3<f64>, c: f64| [0, 1, 2].map(|i| x[i] + c * k[i]);
    for _ in 0..n_steps {
        let field = |y: [f64; 3]| frame_like(hs, y, &frame, min_gap).map(|f| f.dirs[slot]);
        let k1 = frame.dirs[slot];
        let k2 = field(shift(x, &k1, 0.5 * h))?;
        let k3 = field(shift(x, &k2, 0.5 * h))?;
        let k4 = field(shift(x, &k3, h))?;
        let k = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        x = shift(x, &k, h);
        frame = frame_like(hs, x, &frame, min_gap)?;
        out.params.push(x);
        out.points.push(hs.position(x)?);
        out.tangents.push(frame.e[slot].clone());
        out.normals.push(frame.normal.clone());
    }
    Ok(out)
}

/// Arclength of the `s`-line through `(x1, x2)` between two values of `s`,
/// by Simpson's rule on the metric coefficient.
pub fn s_line_length(hs: &dyn Hypersurface, x1: f64, x2: f64, s_from: f64, s_to: f64) -> Result<f64> {
    let speed = |s: f64| -> Result<f64> {
        let pos = hs.position_jet([x1, x2, s], 1)?;
        let t: Vec<f64> = pos.iter().map(|c| c.grad(2)).collect();
        Ok(dot(hs.lorentzian(), &t, &t).max(0.0).sqrt())
    };
    speed(s_from)?;
    speed(s_to)?;
    let (lo, hi) = if s_from <= s_to { (s_from, s_to) } else { (s_to, s_from) };
    Ok(crate::quadrature::simpson(|s| speed(s).unwrap_or(f64::NAN), lo, hi, 64))
}

#[derive(Clone, Debug, Serialize)]
pub struct Alignment {
    pub angle: f64,
    /// Position of the nearest principal direction in descending order.
    pub nearest: usize,
    /// `|X^T| / |X|`.
    pub tangential_fraction: f64,
}

/// Angle between the tangential part of a conformal Killing field along
/// `hs` and the closest principal direction.
pub fn killing_alignment(hs: &dyn Hypersurface, field: KillingField, p: [f64; 3]) -> Result<Alignment> {
    field.validate()?;
    let geo = local_geometry(hs, p, 2)?;
    let x = field.eval(&geo.position);
    let xt = geo.tangential_coords(&x)?;
    let g = geo.metric();
    let full = dot(geo.lorentzian, &x, &x).abs().sqrt();
    let tan = g_inner(&g, &xt, &xt).max(0.0).sqrt();
    if full == 0.0 || tan <= 1e-12 * full {
        return Err(Error::Degenerate(format!("field is tangentially vanishing at {p:?}")));
    }
    let pr = geo.principal()?;
    let (nearest, angle) = (0..3)
        .map(|k| (k, g_angle(&g, &xt, &pr[k].dir)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("three directions");
    Ok(Alignment { angle, nearest, tangential_fraction: tan / full })
}

fn mean_and_extent(points: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let d = points.first().map(Vec::len).unwrap_or(0);
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::InvalidParams("points of mixed dimension".into()));
    }
    let mut m = vec![0.0; d];
    for p in points {
        for (a, b) in m.iter_mut().zip(p) {
            *a += b / points.len() as f64;
        }
    }
    let ext = points
        .iter()
        .map(|p| p.iter().zip(&m).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if ext == 0.0 {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    Ok((m, ext))
}

/// Singular values (descending) and right singular vectors as columns,
/// padding with zero rows so that the null space is represented.
fn svd_full(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (r, c) = m.shape();
    let m = if r < c { m.resize_vertically(c, 0.0) } else { m };
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested right vectors");
    let mut idx: Vec<usize> = (0..c).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let vals = idx.iter().map(|&k| svd.singular_values[k]).collect();
    let v = DMatrix::from_fn(c, c, |i, j| vt[(idx[j], i)]);
    (vals, v)
}

#[derive(Clone, Debug, Serialize)]
pub struct CircleFit {
    pub center: Vec<f64>,
    /// Infinite for a straight line.
    pub radius: f64,
    /// Orthonormal frame of the fitted plane; for a line the first vector is
    /// its direction.
    pub plane: [Vec<f64>; 2],
    pub rms_residual: f64,
    pub max_residual: f64,
    pub degenerate: bool,
    /// Largest distance of a sample from the centroid.
    pub extent: f64,
}

impl CircleFit {
    pub fn distance(&self, x: &[f64]) -> f64 {
        let q: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let u = dot(false, &q, &self.plane[0]);
        if self.degenerate {
            return (dot(false, &q, &q) - u * u).max(0.0).sqrt();
        }
        let w = dot(false, &q, &self.plane[1]);
        let perp2 = (dot(false, &q, &q) - u * u - w * w).max(0.0);
        (perp2 + (u.hypot(w) - self.radius).powi(2)).sqrt()
    }

    /// Maximal residual relative to the radius, or to the extent for lines.
    pub fn scaled_residual(&self) -> f64 {
        self.max_residual / if self.degenerate { self.extent } else { self.radius }
    }
}

/// Algebraic circle fit of centered planar data (Taubin's method, Newton
/// iteration on the characteristic polynomial).
fn taubin(u: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let n = u.len() as f64;
    let (mut mxx, mut myy, mut mxy, mut mxz, mut myz, mut mzz) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in u.iter().zip(w) {
        let z = x * x + y * y;
        mxx += x * x / n;
        myy += y * y / n;
        mxy += x * y / n;
        mxz += x * z / n;
        myz += y * z / n;
        mzz += z * z / n;
    }
    let mz = mxx + myy;
    let cov = mxx * myy - mxy * mxy;
    let a3 = 4.0 * mz;
    let a2 = -3.0 * mz * mz - mzz;
    let a1 = mzz * mz + 4.0 * cov * mz - mxz * mxz - myz * myz - mz * mz * mz;
    let a0 = mxz * mxz * myy + myz * myz * mxx - mzz * cov - 2.0 * mxz * myz * mxy + mz * mz * cov;
    let mut x = 0.0f64;
    let mut y = f64::INFINITY;
    for _ in 0..100 {
        let yold = y;
        y = a0 + x * (a1 + x * (a2 + x * a3));
        if y.abs() > yold.abs() {
            x = 0.0;
            break;
        }
        let dy = a1 + x * (2.0 * a2 + 3.0 * x * a3);
        let xold = x;
        x = xold - y / dy;
        if !x.is_finite() || x < 0.0 {
            x = 0.0;
            break;
        }
        if ((x - xold) / x).abs() < 1e-15 {
            break;
        }
    }
    let det = x * x - x * mz + cov;
    let cx = (mxz * (myy - x) - myz * mxy) / det / 2.0;
    let cy = (myz * (mxx - x) - mxz * mxy) / det / 2.0;
    (cx, cy, (cx * cx + cy * cy + mz).sqrt())
}

/// Geometric refinement of a planar circle by Gauss–Newton.
fn refine_circle(u: &[f64], w: &[f64], mut c: (f64, f64, f64)) -> (f64, f64, f64) {
    for _ in 0..20 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&x, &y) in u.iter().zip(w) {
            let (dx, dy) = (x - c.0, y - c.1);
            let rho = dx.hypot(dy);
            if rho == 0.0 {
                continue;
            }
            let j = Vector3::new(-dx / rho, -dy / rho, -1.0);
            jtj += j * j.transpose();
            jtr += j * (rho - c.2);
        }
        if jtr.norm() < 1e-12 {
            break;
        }
        let Some(step) = jtj.lu().solve(&(-jtr)) else { break };
        c = (c.0 + step[0], c.1 + step[1], c.2 + step[2]);
    }
    c
}

/// Best-fit circle in `R^d`: plane by principal components, Taubin
/// initialization, geometric refinement, residuals in full distance.
pub fn circle_fit(points: &[Vec<f64>]) -> Result<CircleFit> {
    if points.len() < 3 {
        return Err(Error::InvalidParams(format!("circle fit needs 3 points, got {}", points.len())));
    }
    let (m, ext) = mean_and_extent(points)?;
    let d = m.len();
    let x = DMatrix::from_fn(points.len(), d, |i, k| (points[i][k] - m[k]) / ext);
    let (sv, v) = svd_full(x.clone());
    let axis = |k: usize| (0..d).map(|i| v[(i, k)]).collect::<Vec<f64>>();
    let (v1, v2) = (axis(0), axis(1));
    let collinear = sv.len() < 2 || sv[1] <= 1e-12 * sv[0];
    let mut fit = if collinear {
        CircleFit {
            center: m.clone(),
            radius: f64::INFINITY,
            plane: [v1, vec![0.0; d]],
            rms_residual: 0.0,
            max_residual: 0.0,
            degenerate: true,
            extent: ext,
        }
    } else {
        let proj = |a: &Vec<f64>| (0..points.len()).map(|i| (0..d).map(|k| x[(i, k)] * a[k]).sum()).collect();
        let (u, w): (Vec<f64>, Vec<f64>) = (proj(&v1), proj(&v2));
        let (cx, cy, r) = refine_circle(&u, &w, taubin(&u, &w));
        let center = (0..d).map(|k| m[k] + ext * (cx * v1[k] + cy * v2[k])).collect();
        CircleFit {
            center,
            radius: r * ext,
            plane: [v1, v2],
            rms_residual: 0.0,
            max_residual: 0.0,
            degenerate: false,
            extent: ext,
        }
    };
    let res: Vec<f64> = points.iter().map(|p| fit.distance(p)).collect();
    fit.max_residual = res.iter().copied().fold(0.0, f64::max);
    fit.rms_residual = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();
    Ok(fit)
}

#[derive(Clone, Debug, Serialize)]
pub struct SphereFit {
    /// Center, or the foot of the centroid on the hyperplane.
    pub center: Vec<f64>,
    /// Infinite for a hyperplane.
    pub radius: f64,
    /// Unit normal of the hyperplane; empty for a sphere.
    pub normal: Vec<f64>,
    pub rms_residual: f64,
    pub max_residual: f64,
    pub degenerate: bool,
    pub extent: f64,
}

impl SphereFit {
    pub fn distance(&self, x: &[f64]) -> f64 {
        let q: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        if self.degenerate {
            dot(false, &q, &self.normal).abs()
        } else {
            (dot(false, &q, &q).sqrt() - self.radius).abs()
        }
    }

    pub fn scaled_residual(&self) -> f64 {
        self.max_residual / if self.degenerate { self.extent } else { self.radius }
    }
}

/// Linear least-squares hypersphere `A|x|² − 2⟨c, x⟩ + γ = 0` through a
/// point cloud, with the hyperplane case `A ≈ 0`.
pub fn sphere_fit(points: &[Vec<f64>]) -> Result<SphereFit> {
    let (m, ext) = mean_and_extent(points)?;
    let d = m.len();
    if points.len() < d + 1 {
        return Err(Error::RankDeficient(format!("{} points cannot determine a hypersphere in R^{d}", points.len())));
    }
    let y: Vec<Vec<f64>> = points.iter().map(|p| p.iter().zip(&m).map(|(a, b)| (a - b) / ext).collect()).collect();
    let rows = DMatrix::from_fn(points.len(), d + 2, |i, k| match k {
        0 => dot(false, &y[i], &y[i]),
        k if k <= d => -2.0 * y[i][k - 1],
        _ => 1.0,
    });
    let (sv, v) = svd_full(rows);
    let n = sv.len();
    if sv[n - 2] <= 1e-10 * sv[0] {
        return Err(Error::RankDeficient("points lie on a lower-dimensional sphere".into()));
    }
    let z: Vec<f64> = (0..d + 2).map(|i| v[(i, n - 1)]).collect();
    let (a, c, gamma) = (z[0], &z[1..=d], z[d + 1]);
    let cn = dot(false, c, c).sqrt();
    let mut fit = if a.abs() < FLAT_SPHERE {
        // ⟨c, y⟩ = γ/2
        let normal: Vec<f64> = c.iter().map(|x| x / cn).collect();
        let off = gamma / (2.0 * cn);
        SphereFit {
            center: (0..d).map(|k| m[k] + ext * off * normal[k]).collect(),
            radius: f64::INFINITY,
            normal,
            rms_residual: 0.0,
            max_residual: 0.0,
            degenerate: true,
            extent: ext,
        }
    } else {
        let cy: Vec<f64> = c.iter().map(|x| x / a).collect();
        let r2 = dot(false, &cy, &cy) - gamma / a;
        if r2 <= 0.0 {
            return Err(Error::Degenerate("fitted sphere has imaginary radius".into()));
        }
        SphereFit {
            center: (0..d).map(|k| m[k] + ext * cy[k]).collect(),
            radius: ext * r2.sqrt(),
            normal: Vec::new(),
            rms_residual: 0.0,
            max_residual: 0.0,
            degenerate: false,
            extent: ext,
        }
    };
    let res: Vec<f64> = points.iter().map(|p| fit.distance(p)).collect();
    fit.max_residual = res.iter().copied().fold(0.0, f64::max);
    fit.rms_residual = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();
    Ok(fit)
}

/// Two-sphere containment test for a curve: the hyperspheres through the
/// samples whose gradients are orthogonal to both `tangents` and `normals`
/// form a pencil (a 2-sphere or 2-plane) exactly when the relative
/// second-smallest singular value vanishes.
#[derive(Clone, Debug, Serialize)]
pub struct PencilFit {
    /// Singular values divided by the largest, descending.
    pub singular_values: Vec<f64>,
    pub residual: f64,
}

pub fn two_sphere_pencil(points: &[Vec<f64>], tangents: &[Vec<f64>], normals: &[Vec<f64>]) -> Result<PencilFit> {
    if points.len() != tangents.len() || points.len() != normals.len() {
        return Err(Error::DimensionMismatch(points.len(), tangents.len().min(normals.len())));
    }
    let (m, ext) = mean_and_extent(points)?;
    let d = m.len();
    let n = points.len();
    let mut rows = DMatrix::zeros(3 * n, d + 2);
    for i in 0..n {
        let y: Vec<f64> = points[i].iter().zip(&m).map(|(a, b)| (a - b) / ext).collect();
        rows[(3 * i, 0)] = dot(false, &y, &y);
        rows[(3 * i, d + 1)] = 1.0;
        for k in 0..d {
            rows[(3 * i, k + 1)] = -2.0 * y[k];
        }
        for (r, t) in [(3 * i + 1, &tangents[i]), (3 * i + 2, &normals[i])] {
            let tn = dot(false, t, t).sqrt();
            rows[(r, 0)] = dot(false, &y, t) / tn;
            for k in 0..d {
                rows[(r, k + 1)] = -t[k] / tn;
            }
        }
    }
    let (sv, _) = svd_full(rows);
    let top = sv[0];
    let singular_values: Vec<f64> = sv.iter().map(|s| s / top).collect();
    let residual = singular_values[singular_values.len() - 2];
    Ok(PencilFit { singular_values, residual })
}

/// The graph `(x₁, x₂, x₃, φ(x))` of a cubic with three distinct principal
/// curvatures; it is neither conformally flat nor cyclic.
#[derive(Clone, Debug)]
pub struct GraphHypersurface {
    pub hessian: [f64; 3],
    pub cubic: f64,
    pub domain: Box3,
}

impl Default for GraphHypersurface {
    fn default() -> Self {
        GraphHypersurface {
            hessian: [1.0, 0.4, -0.5],
            cubic: 0.8,
            domain: Box3 { lo: [-0.3; 3], hi: [0.3; 3] },
        }
    }
}

impl GraphHypersurface {
    fn height<T: Real>(&self, x: [T; 3]) -> T {
        let [a, b, c] = self.hessian;
        x[0] * x[0] * (0.5 * a)
            + x[1] * x[1] * (0.5 * b)
            + x[2] * x[2] * (0.5 * c)
            + x[0] * x[1] * x[2] * self.cubic
            + x[0] * x[0] * x[0] * (0.3 * self.cubic)
            + x[1] * x[2] * x[2] * (0.5 * self.cubic)
    }
}

impl Hypersurface for GraphHypersurface {
    fn ambient_dim(&self) -> usize {
        4
    }

    fn domain(&self) -> Box3 {
        self.domain
    }

    fn position_jet(&self, p: [f64; 3], order: usize) -> Result<Vec<Jet>> {
        let x = Jet::seed(p, order);
        Ok(vec![x[0], x[1], x[2], self.height(x)])
    }

    fn normal_jet(&self, p: [f64; 3], order: usize) -> Result<Vec<Jet>> {
        crate::hypersurface::euclidean_normal_jet(&self.position_jet(p, order + 1)?, Some(&[0.0, 0.0, 0.0, 1.0]))
            .map(|n| n.into_iter().map(|c| c.truncate(order)).collect())
    }
}

/// One trace of the battery.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceSpec {
    pub start: [f64; 3],
    pub arclength: f64,
    pub n_steps: usize,
}

/// Sample sets for the equivalence battery.
#[derive(Clone, Debug)]
pub struct BatteryPlan {
    pub rule: Distinguished,
    pub min_gap: f64,
    pub points: Vec<[f64; 3]>,
    pub traces: Vec<TraceSpec>,
    /// Images of leaves of the `e₂, e₃` distribution, when known.
    pub leaves: Vec<Vec<Vec<f64>>>,
    pub item_tol: f64,
    pub fit_tol: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ItemOutcome {
    pub item: &'static str,
    pub max_scaled: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ItemOutcome {
    fn new(item: &'static str, max_scaled: f64, tolerance: f64) -> Self {
        ItemOutcome { item, max_scaled, tolerance, pass: max_scaled < tolerance }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CurveRecord {
    pub start: [f64; 3],
    pub n: usize,
    pub circle: CircleFit,
    pub pencil: PencilFit,
}

/// Scaled pointwise criteria at one sample.
#[derive(Clone, Debug, Serialize)]
pub struct PointOutcome {
    pub point: [f64; 3],
    pub item_i: f64,
    pub item_ii: f64,
    pub item_iii: f64,
    pub item_v: f64,
    pub quantities: CyclicQuantities,
}

#[derive(Clone, Debug, Serialize)]
pub struct BatteryReport {
    pub items: Vec<ItemOutcome>,
    pub points: Vec<PointOutcome>,
    pub curves: Vec<CurveRecord>,
    pub leaves: Vec<SphereFit>,
    /// Largest scaled residual of the ambient circle fits of the traces.
    pub ambient_circle_max: f64,
    /// All criteria agree.
    pub agree: bool,
}

/// Evaluates the five criteria of the cyclic characterization on the plan's
/// samples and reports whether their verdicts agree.
pub fn equivalence_battery(hs: &dyn Hypersurface, plan: &BatteryPlan) -> Result<BatteryReport> {
    let quantities: Vec<CyclicQuantities> = plan
        .points
        .par_iter()
        .map(|&p| rho_mu_zeta(hs, p, plan.rule, plan.min_gap))
        .collect::<Result<_>>()?;
    let defects: Vec<f64> = plan
        .points
        .par_iter()
        .zip(&quantities)
        .map(|(&p, q)| {
            extrinsic_circle_defect(hs, p, plan.rule, plan.min_gap)
                .map(|d| d[0].abs().max(d[1].abs()) / q.scale.powi(2))
        })
        .collect::<Result<_>>()?;
    let curves: Vec<CurveRecord> = plan
        .traces
        .par_iter()
        .map(|t| {
            let tr = curvature_line_trace(hs, t.start, 0, plan.rule, t.arclength, t.n_steps, plan.min_gap)?;
            Ok(CurveRecord {
                start: t.start,
                n: tr.points.len(),
                circle: circle_fit(&tr.points)?,
                pencil: two_sphere_pencil(&tr.points, &tr.tangents, &tr.normals)?,
            })
        })
        .collect::<Result<_>>()?;
    let leaves: Vec<SphereFit> = plan.leaves.par_iter().map(|l| sphere_fit(l)).collect::<Result<_>>()?;

    let worst = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0, f64::max);
    let mut items = vec![
        ItemOutcome::new("i", worst(&mut defects.iter().copied()), plan.item_tol),
        ItemOutcome::new("ii", worst(&mut quantities.iter().map(|q| q.scaled_e1_rho())), plan.item_tol),
        ItemOutcome::new("iii", worst(&mut quantities.iter().map(|q| q.scaled_item3())), plan.item_tol),
    ];
    if !curves.is_empty() {
        items.push(ItemOutcome::new("iv", worst(&mut curves.iter().map(|c| c.pencil.residual)), plan.fit_tol));
    }
    items.push(ItemOutcome::new("v", worst(&mut quantities.iter().map(|q| q.scaled_ej_mu())), plan.item_tol));
    if !leaves.is_empty() {
        items.push(ItemOutcome::new("v-leaves", worst(&mut leaves.iter().map(|l| l.scaled_residual())), plan.fit_tol));
    }
    let agree = items.iter().all(|i| i.pass) || items.iter().all(|i| !i.pass);
    let ambient_circle_max = worst(&mut curves.iter().map(|c| c.circle.scaled_residual()));
    let points = quantities
        .into_iter()
        .zip(defects)
        .map(|(q, d)| PointOutcome {
            point: q.point,
            item_i: d,
            item_ii: q.scaled_e1_rho(),
            item_iii: q.scaled_item3(),
            item_v: q.scaled_ej_mu(),
            quantities: q,
        })
        .collect();
    Ok(BatteryReport { items, points, curves, leaves, ambient_circle_max, agree })
}
