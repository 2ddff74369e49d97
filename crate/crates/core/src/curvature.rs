//! Intrinsic geometry of Riemannian 3-metrics: Levi-Civita curvature,
//! Schouten and Cotton tensors, the orthogonal-coordinate (Lamé) formulas,
//! the conformal-flatness PDEs in the `e^{2α}, e^{2β}, 1` gauge, and the
//! identities behind the construction.

use std::collections::HashMap;

use nalgebra::Matrix3;
use serde::Serialize;

use crate::construction::{HypersurfacePatch, ProofConstants};
use crate::error::{Error, Result};
use crate::hypersurface::{eigen_jet, local_geometry, values3, Hypersurface, Mat3J};
use crate::jet::{dot, Jet, Real};

/// Points where `sqrt(σ_min/σ_max)` of the metric falls below this are singular.
pub const REGULARITY_FLOOR: f64 = 1e-6;

/// Coefficient `c` of the standard dimension-3 Schouten endomorphism `T − c s I`.
pub const STANDARD_SCHOUTEN: f64 = 0.25;

/// Coefficient as printed for `L = T − c s I` with `s` read as the raw scalar curvature.
pub const LITERAL_SCHOUTEN: f64 = 1.5;

pub(crate) type T3<T> = [[[T; 3]; 3]; 3];
type T4<T> = [[[[T; 3]; 3]; 3]; 3];

/// The metric and its derivatives at a point, stored as jets.
#[derive(Clone, Debug)]
pub struct MetricJet {
    pub p: [f64; 3],
    pub g: Mat3J,
}

fn zero(order: usize) -> Jet {
    Jet::constant(0.0, order)
}

fn inverse(g: &Mat3J) -> Result<(Mat3J, Jet)> {
    let mut cof = [[zero(0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (i1, i2, j1, j2) = ((i + 1) % 3, (i + 2) % 3, (j + 1) % 3, (j + 2) % 3);
            cof[i][j] = g[i1][j1] * g[i2][j2] - g[i1][j2] * g[i2][j1];
        }
    }
    let det = g[0][0] * cof[0][0] + g[0][1] * cof[0][1] + g[0][2] * cof[0][2];
    if det.value().abs() < 1e-300 {
        return Err(Error::Degenerate("metric determinant vanishes".into()));
    }
    let r = det.recip();
    let mut inv = cof;
    for i in 0..3 {
        for j in 0..3 {
            inv[i][j] = cof[j][i] * r;
        }
    }
    Ok((inv, det))
}

impl MetricJet {
    pub fn new(p: [f64; 3], g: Mat3J) -> Result<Self> {
        let m = values3(&g);
        let asym = (m - m.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + m.abs().max()) {
            return Err(Error::InvalidParams(format!("metric not symmetric at {p:?}")));
        }
        let ev = m.symmetric_eigenvalues();
        if ev.min() <= 0.0 || (ev.min() / ev.max()).sqrt() < REGULARITY_FLOOR {
            return Err(Error::Degenerate(format!("metric not positive definite at {p:?}")));
        }
        Ok(MetricJet { p, g })
    }

    /// Pull-back metric of an immersion, from jets of order 4.
    pub fn from_hypersurface(hs: &dyn Hypersurface, p: [f64; 3]) -> Result<Self> {
        let geo = local_geometry(hs, p, 4)?;
        if geo.regularity() < REGULARITY_FLOOR {
            return Err(Error::Degenerate(format!("non-regular point {p:?}")));
        }
        MetricJet::new(p, geo.g)
    }

    /// A metric given in closed form, evaluated on seeded jets.
    pub fn from_analytic(p: [f64; 3], metric: impl Fn([Jet; 3]) -> Mat3J) -> Result<Self> {
        MetricJet::new(p, metric(Jet::seed(p, 3)))
    }

    /// `diag(v₁², v₂², v₃²)`.
    pub fn diagonal(p: [f64; 3], v: [Jet; 3]) -> Result<Self> {
        let o = v.iter().map(Jet::order).min().unwrap_or(0);
        let mut g = [[zero(o); 3]; 3];
        for i in 0..3 {
            g[i][i] = v[i] * v[i];
        }
        MetricJet::new(p, g)
    }

    /// A black-box metric differentiated numerically: tensor products of
    /// second-order central stencils at `h` and `h/2`, Richardson-combined.
    pub fn from_samples(p: [f64; 3], metric: impl Fn([f64; 3]) -> Matrix3<f64>, h: f64) -> Result<Self> {
        let mut cache: HashMap<[i32; 3], Matrix3<f64>> = HashMap::new();
        let q = 0.5 * h;
        let mut sample = |k: [i32; 3]| -> Matrix3<f64> {
            *cache.entry(k).or_insert_with(|| {
                metric([p[0] + q * k[0] as f64, p[1] + q * k[1] as f64, p[2] + q * k[2] as f64])
            })
        };
        // central stencils (offset, weight) for derivatives of order 0..=3
        let stencil = |m: usize| -> Vec<(i32, f64)> {
            match m {
                0 => vec![(0, 1.0)],
                1 => vec![(-1, -0.5), (1, 0.5)],
                2 => vec![(-1, 1.0), (0, -2.0), (1, 1.0)],
                _ => vec![(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
            }
        };
        let mut partials: HashMap<[usize; 3], Matrix3<f64>> = HashMap::new();
        for a in 0..=3 {
            for b in 0..=(3 - a) {
                for c in 0..=(3 - a - b) {
                    let e = [a, b, c];
                    let mut est = [Matrix3::zeros(); 2];
                    for (slot, scale) in [(0usize, 2i32), (1, 1)] {
                        let step = q * scale as f64;
                        let mut acc = Matrix3::zeros();
                        for &(o0, w0) in &stencil(a) {
                            for &(o1, w1) in &stencil(b) {
                                for &(o2, w2) in &stencil(c) {
                                    let k = [o0 * scale, o1 * scale, o2 * scale];
                                    acc += sample(k) * (w0 * w1 * w2);
                                }
                            }
                        }
                        est[slot] = acc / step.powi((a + b + c) as i32);
                    }
                    partials.insert(e, (est[1] * 4.0 - est[0]) / 3.0);
                }
            }
        }
        let mut g = [[zero(3); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] = Jet::from_partials(3, |e| {
                    let m = partials[&e];
                    0.5 * (m[(i, j)] + m[(j, i)])
                });
            }
        }
        MetricJet::new(p, g)
    }

    pub fn order(&self) -> usize {
        self.g.iter().flatten().map(Jet::order).min().unwrap_or(0)
    }

    pub fn value(&self) -> Matrix3<f64> {
        values3(&self.g)
    }

    pub fn is_orthogonal(&self, tol: f64) -> bool {
        let m = self.value();
        (0..3).all(|i| (0..3).all(|j| i == j || m[(i, j)].abs() <= tol * (m[(i, i)] * m[(j, j)]).sqrt()))
    }
}

/// Curvature of a metric at a point.
#[derive(Clone, Debug)]
pub struct CurvatureBundle {
    pub p: [f64; 3],
    pub g: Matrix3<f64>,
    /// `Γ^k_{ij}` as `christoffel[k][i][j]`.
    pub christoffel: T3<f64>,
    /// `R(∂_k, ∂_l)∂_j = R^i_{jkl} ∂_i`, stored as `riemann[i][j][k][l]`.
    pub riemann: T4<f64>,
    pub ricci: Matrix3<f64>,
    /// Ricci endomorphism `T = g⁻¹ Ric`.
    pub ricci_endo: Matrix3<f64>,
    pub scalar: f64,
    /// Standard Schouten endomorphism `T − (s/4) I`.
    pub schouten: Matrix3<f64>,
    /// `C_{ijk} = ∇_k P_{ij} − ∇_j P_{ik}` for the Schouten tensor `P`.
    pub cotton: T3<f64>,
    pub cotton_norm: f64,
    /// Sectional curvatures of the coordinate planes `(12, 13, 23)`.
    pub sectional: [f64; 3],
    ginv: Mat3J,
    gamma: T3<Jet>,
    ric: Mat3J,
    scal: Jet,
}

fn vals3(t: &T3<Jet>) -> T3<f64> {
    let mut out = [[[0.0; 3]; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                out[a][b][c] = t[a][b][c].value();
            }
        }
    }
    out
}

/// `Γ^k_{ij}` as jets, indexed `[k][i][j]`.
pub(crate) fn christoffel_jets(g: &Mat3J, ginv: &Mat3J) -> T3<Jet> {
    // dg[a][b][c] = ∂_a g_{bc}
    let dg: T3<Jet> = [0, 1, 2].map(|a| [0, 1, 2].map(|b| [0, 1, 2].map(|c| g[b][c].d(a))));
    let o1 = dg[0][0][0].order();
    let mut gamma = [[[zero(o1); 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = zero(o1);
                for l in 0..3 {
                    acc += ginv[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                }
                gamma[k][i][j] = acc * 0.5;
            }
        }
    }
    gamma
}

pub(crate) fn metric_inverse(g: &Mat3J) -> Result<Mat3J> {
    inverse(g).map(|(gi, _)| gi)
}

pub fn curvature_bundle(m: &MetricJet) -> Result<CurvatureBundle> {
    if m.order() < 3 {
        return Err(Error::InvalidParams("curvature needs metric jets of order 3".into()));
    }
    let g = &m.g;
    let (ginv, _) = inverse(g)?;
    let gamma = christoffel_jets(g, &ginv);
    let o1 = gamma[0][0][0].order();
    let o2 = o1 - 1;
    let mut riem: T4<Jet> = [[[[zero(o2); 3]; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let mut acc = gamma[i][l][j].d(k) - gamma[i][k][j].d(l);
                    for mm in 0..3 {
                        acc += gamma[i][k][mm] * gamma[mm][l][j] - gamma[i][l][mm] * gamma[mm][k][j];
                    }
                    riem[i][j][k][l] = acc;
                }
            }
        }
    }
    let mut ric = [[zero(o2); 3]; 3];
    for j in 0..3 {
        for l in 0..3 {
            let mut acc = zero(o2);
            for k in 0..3 {
                acc += riem[k][j][k][l];
            }
            ric[j][l] = acc;
        }
    }
    // symmetrize against roundoff
    for j in 0..3 {
        for l in (j + 1)..3 {
            let s = (ric[j][l] + ric[l][j]) * 0.5;
            ric[j][l] = s;
            ric[l][j] = s;
        }
    }
    let mut scal = zero(o2);
    for j in 0..3 {
        for l in 0..3 {
            scal += ginv[j][l] * ric[j][l];
        }
    }
    // Schouten tensor P = Ric − (s/4) g and its covariant derivative
    let mut sch = [[zero(o2); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            sch[i][j] = ric[i][j] - scal * g[i][j] * STANDARD_SCHOUTEN;
        }
    }
    let nabla_p = |k: usize, i: usize, j: usize| -> f64 {
        let mut v = sch[i][j].grad(k);
        for mm in 0..3 {
            v -= gamma[mm][k][i].value() * sch[mm][j].value() + gamma[mm][k][j].value() * sch[i][mm].value();
        }
        v
    };
    let mut cotton = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                cotton[i][j][k] = nabla_p(k, i, j) - nabla_p(j, i, k);
            }
        }
    }
    let gi = values3(&ginv);
    let mut norm2 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for a in 0..3 {
                    for b in 0..3 {
                        for c in 0..3 {
                            norm2 += gi[(i, a)] * gi[(j, b)] * gi[(k, c)] * cotton[i][j][k] * cotton[a][b][c];
                        }
                    }
                }
            }
        }
    }
    let gv = m.value();
    let riemann = {
        let mut out = [[[[0.0; 3]; 3]; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        out[i][j][k][l] = riem[i][j][k][l].value();
                    }
                }
            }
        }
        out
    };
    let sec = |i: usize, j: usize| {
        let num: f64 = (0..3).map(|mm| gv[(i, mm)] * riemann[mm][j][i][j]).sum();
        num / (gv[(i, i)] * gv[(j, j)] - gv[(i, j)] * gv[(i, j)])
    };
    let ricci = values3(&ric);
    let ricci_endo = gi * ricci;
    let scalar = scal.value();
    Ok(CurvatureBundle {
        p: m.p,
        g: gv,
        christoffel: vals3(&gamma),
        riemann,
        ricci,
        ricci_endo,
        scalar,
        schouten: ricci_endo - Matrix3::identity() * (scalar * STANDARD_SCHOUTEN),
        cotton,
        cotton_norm: norm2.max(0.0).sqrt(),
        sectional: [sec(0, 1), sec(0, 2), sec(1, 2)],
        ginv,
        gamma,
        ric,
        scal,
    })
}

impl CurvatureBundle {
    /// `max |K(σ)| + 1` over all tangent planes `σ`. In dimension three the
    /// plane with unit normal `n` has `K = s/2 − Ric(n, n)`.
    pub fn curvature_scale(&self) -> f64 {
        let t = self.ricci_endo;
        // T is self-adjoint for g; its eigenvalues are those of L⁻¹ Ric L⁻ᵀ
        let eig = match self.g.cholesky() {
            Some(ch) => {
                let li = ch.l().try_inverse().unwrap_or_else(Matrix3::identity);
                let m = li * self.ricci * li.transpose();
                (0.5 * (m + m.transpose())).symmetric_eigenvalues()
            }
            None => t.diagonal(),
        };
        eig.iter().map(|r| (0.5 * self.scalar - r).abs()).fold(0.0, f64::max) + 1.0
    }

    /// Largest violation of `R^i_{jkl} = −R^i_{jlk}`, the first Bianchi
    /// identity and pair symmetry, relative to `max |R| + 1`.
    pub fn symmetry_residual(&self) -> f64 {
        let r = &self.riemann;
        let lower = |i: usize, j: usize, k: usize, l: usize| -> f64 {
            (0..3).map(|m| self.g[(i, m)] * r[m][j][k][l]).sum()
        };
        let mut scale: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        scale = scale.max(r[i][j][k][l].abs());
                        worst = worst.max((r[i][j][k][l] + r[i][j][l][k]).abs());
                        worst = worst.max((r[i][j][k][l] + r[i][k][l][j] + r[i][l][j][k]).abs());
                        worst = worst.max((lower(i, j, k, l) - lower(k, l, i, j)).abs());
                    }
                }
            }
        }
        let sym = (self.ricci - self.ricci.transpose()).abs().max();
        let trace = (self.ricci_endo.trace() - self.scalar).abs();
        worst.max(sym).max(trace) / (scale + 1.0)
    }

    /// `max |(∇_X L)Y − (∇_Y L)X|` over unit coordinate directions `X, Y`,
    /// for `L = T − c s I`.
    pub fn codazzi_residual(&self, coefficient: f64) -> f64 {
        let o = self.scal.order();
        let mut l = [[zero(o); 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = zero(o);
                for m in 0..3 {
                    acc += self.ginv[a][m] * self.ric[m][b];
                }
                if a == b {
                    acc -= self.scal * coefficient;
                }
                l[a][b] = acc;
            }
        }
        let gam = &self.gamma;
        // (∇_i L)^a_b
        let nabla = |i: usize, a: usize, b: usize| -> f64 {
            let mut v = l[a][b].grad(i);
            for m in 0..3 {
                v += gam[a][i][m].value() * l[m][b].value() - gam[m][i][b].value() * l[a][m].value();
            }
            v
        };
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in (i + 1)..3 {
                let w = nalgebra::Vector3::from_fn(|a, _| nabla(i, a, j) - nabla(j, a, i));
                let n = (w.transpose() * self.g * w)[(0, 0)].max(0.0).sqrt();
                worst = worst.max(n / (self.g[(i, i)] * self.g[(j, j)]).sqrt());
            }
        }
        worst
    }
}

/// Orthogonal-coordinate data of a diagonal metric `Σ v_i² dx_i²`.
#[derive(Clone, Debug, Serialize)]
pub struct LameData {
    pub v: [f64; 3],
    /// `φ^{ij} = v_{j,i}/v_i`, zero on the diagonal.
    pub phi: [[f64; 3]; 3],
    /// Sectional curvatures `(K12, K13, K23)`.
    pub sectional: [f64; 3],
    /// `2ℓ_1 = K12 + K13 − K23` and its companions.
    pub ell: [f64; 3],
    pub psi: [f64; 3],
    /// For each ordered triple `(i, j, k)` of distinct indices, the
    /// coefficients of `X_j` and `X_i` in `R(∂_i, ∂_j) X_k`.
    pub r_components: Vec<([usize; 3], f64, f64)>,
    /// `max |ψ_{i,j} − φ^{ji} ψ_j| / (v_i v_j)` over `i ≠ j`.
    pub codazzi: f64,
}

pub fn lame_curvatures(m: &MetricJet) -> Result<LameData> {
    if !m.is_orthogonal(1e-10) {
        return Err(Error::InvalidParams(format!("metric not orthogonal at {:?}", m.p)));
    }
    if m.order() < 3 {
        return Err(Error::InvalidParams("Lamé formulas need metric jets of order 3".into()));
    }
    let v: [Jet; 3] = [0, 1, 2].map(|i| m.g[i][i].sqrt());
    let mut phi = [[zero(2); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                phi[i][j] = v[j].d(i) / v[i];
            }
        }
    }
    let third = |i: usize, j: usize| 3 - i - j;
    let sect = |i: usize, j: usize| -> Jet {
        let k = third(i, j);
        -(phi[i][j].d(i) + phi[j][i].d(j) + phi[k][i] * phi[k][j]) / (v[i] * v[j])
    };
    let (k12, k13, k23) = (sect(0, 1), sect(0, 2), sect(1, 2));
    let ell = [
        (k12 + k13 - k23) * 0.5,
        (k12 + k23 - k13) * 0.5,
        (k13 + k23 - k12) * 0.5,
    ];
    let psi: [Jet; 3] = [0, 1, 2].map(|i| ell[i] * v[i].truncate(1));
    let mut codazzi: f64 = 0.0;
    let mut r_components = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                continue;
            }
            let res = psi[i].grad(j) - phi[j][i].value() * psi[j].value();
            codazzi = codazzi.max(res.abs() / (v[i].value() * v[j].value()));
            let k = third(i, j);
            let cj = phi[k][j].grad(i) - phi[k][i].value() * phi[i][j].value();
            let ci = -(phi[k][i].grad(j) - phi[k][j].value() * phi[j][i].value());
            r_components.push(([i, j, k], cj, ci));
        }
    }
    Ok(LameData {
        v: v.map(|x| x.value()),
        phi: [0, 1, 2].map(|i| [0, 1, 2].map(|j| phi[i][j].value())),
        sectional: [k12.value(), k13.value(), k23.value()],
        ell: ell.map(|x| x.value()),
        psi: psi.map(|x| x.value()),
        r_components,
        codazzi,
    })
}

/// The same components read off the Riemann tensor: `R(∂_i,∂_j)X_k` has
/// `X_m`-coefficient `R^m_{kij} v_m / v_k`.
pub fn r_components_from_bundle(b: &CurvatureBundle, ijk: [usize; 3]) -> (f64, f64) {
    let [i, j, k] = ijk;
    let v = |a: usize| b.g[(a, a)].sqrt();
    (
        b.riemann[j][k][i][j] * v(j) / v(k),
        b.riemann[i][k][i][j] * v(i) / v(k),
    )
}

/// `(α, β)` with `g = b² (e^{2α} dx₁² + e^{2β} dx₂² + dx₃²)`, `b² = g₃₃`.
pub fn alpha_beta(m: &MetricJet) -> (Jet, Jet) {
    let g33 = m.g[2][2];
    ((m.g[0][0] / g33).ln() * 0.5, (m.g[1][1] / g33).ln() * 0.5)
}

/// `e^{2α} dx₁² + e^{2β} dx₂² + dx₃²`.
pub fn tilde_metric(p: [f64; 3], alpha: Jet, beta: Jet) -> Result<MetricJet> {
    let o = alpha.order().min(beta.order());
    MetricJet::diagonal(p, [alpha.exp(), beta.exp(), Jet::constant(1.0, o)])
}

/// Residuals of the PDE system for `e^{2α}dx₁² + e^{2β}dx₂² + dx₃²`.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct GuichardResiduals {
    pub f23: f64,
    pub h13: f64,
    pub conf4: f64,
    pub conf5: f64,
    pub conf6: f64,
    /// `β₁₁ + β₁(β−α)₁ − φ^{12}₁ e^{α−β}` and its `α` companion.
    pub h11: f64,
    pub f22: f64,
    /// `(φ^{12})₃` and `(φ^{21})₃`.
    pub phi12_3: f64,
    pub phi21_3: f64,
    pub rho: f64,
    /// `ρ₁`, `ρ₂` and `ρ₃ + 2β₃ρ + 2β₃(β₃₃+β₃²) + 2(β₃₃+β₃²)₃`.
    pub rho_1: f64,
    pub rho_2: f64,
    pub rho_3: f64,
}

pub fn guichard_pde_residuals(alpha: &Jet, beta: &Jet) -> Result<GuichardResiduals> {
    if alpha.order() < 3 || beta.order() < 3 {
        return Err(Error::InvalidParams("α, β need jets of order 3".into()));
    }
    let (a, b) = (*alpha, *beta);
    let a1 = a.d(0);
    let a2 = a.d(1);
    let a3 = a.d(2);
    let b1 = b.d(0);
    let b2 = b.d(1);
    let b3 = b.d(2);
    let a22 = a2.d(1);
    let b11 = b1.d(0);
    let a33 = a3.d(2);
    let b33 = b3.d(2);
    let inner1 = a22 + a2 * a2 - a2 * b2;
    let inner2 = b11 + b1 * b1 - a1 * b1;
    let e1 = (b * -2.0).exp() * inner1;
    let e2 = (a * -2.0).exp() * inner2;
    let e3 = a33 + a3 * a3 + b33 + b3 * b3 - a3 * b3;
    let rho = e1 + e2 - e3;
    let conf6_lhs = (b * -2.0).exp().value() * inner1.grad(2)
        + e2.grad(2)
        + (a3 * b3 + b33 + b3 * b3 - a33 - a3 * a3).grad(2);
    let conf6_rhs = 2.0 * (a33 + a3 * a3 - a3 * b3).value() * b3.value() - 2.0 * e2.value() * b3.value();
    let amb = a - b;
    // φ^{12} = v_{2,1}/v_1 = β₁ e^{β−α}, φ^{21} = α₂ e^{α−β}
    let phi12 = b1 * (b - a).exp().truncate(2);
    let phi21 = a2 * (a - b).exp().truncate(2);
    let bb = b33 + b3 * b3;
    Ok(GuichardResiduals {
        f23: a2.d(2).value() + a2.value() * amb.grad(2),
        h13: b1.d(2).value() - b1.value() * amb.grad(2),
        conf4: rho.grad(1),
        conf5: rho.grad(0),
        conf6: conf6_lhs - conf6_rhs,
        h11: b11.value() + b1.value() * (-amb).grad(0) - phi12.grad(0) * amb.value().exp(),
        f22: a22.value() + a2.value() * amb.grad(1) - phi21.grad(1) * (-amb.value()).exp(),
        phi12_3: phi12.grad(2),
        phi21_3: phi21.grad(2),
        rho: rho.value(),
        rho_1: rho.grad(0),
        rho_2: rho.grad(1),
        rho_3: rho.grad(2)
            + 2.0 * b3.value() * rho.value()
            + 2.0 * b3.value() * bb.value()
            + 2.0 * bb.grad(2),
    })
}

/// Quantities from the proof that conformal flatness forces the profile.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct ProofDiagnostics {
    /// `φ = (e^{2B} − 1) K^s + 2 B' H^s`.
    pub varphi: f64,
    pub varphi_1: f64,
    pub varphi_2: f64,
    pub varphi_3: f64,
    /// `θ = ε e^{2B} + B'' − ε + φ − 2B'²`.
    pub theta: f64,
    /// `ρ` from the metric and `2B'' − B'² − εe^{2B} + 2ε − φ`.
    pub rho_metric: f64,
    pub rho_closed: f64,
    /// `φ' − 2B'(ε + φ)`.
    pub system_first: f64,
    /// `ε + 2B'² − εe^{2B} − B'' − φ`.
    pub system_second: f64,
    /// `φ₃ − 2k₂θ − 2B'(ε+φ)` and `φ₃ − 2Hθ − 2B'(ε+φ)`.
    pub varphi_3_k2: f64,
    pub varphi_3_h: f64,
    /// `α₃ + k₁^s + B'` and `β₃ + k₂^s + B'`.
    pub alpha_3: f64,
    pub beta_3: f64,
    /// `E₃ − (2B'H^s − K^s − 2ε − 2B'' + B'²)`.
    pub third_order_terms: f64,
    /// `E₁ + E₂ + b²(K^s + ε)`.
    pub gauss_terms: f64,
    /// `|φ − (λ e^{2B} − ε)|` when integration constants are given.
    pub varphi_constants: Option<f64>,
}

pub fn proof_diagnostics(
    patch: &HypersurfacePatch,
    p: [f64; 3],
    constants: Option<ProofConstants>,
) -> Result<ProofDiagnostics> {
    let eps = patch.eps.value();
    let lor = patch.eps.lorentzian();
    // principal curvatures of h_s as −∂_s log v_i^s
    let (hs, _) = patch.parallel_jets(p, 3)?;
    let k: [Jet; 2] = [0, 1].map(|i| {
        let t: Vec<Jet> = hs.iter().map(|x| x.d(i)).collect();
        let v = dot(lor, &t, &t).sqrt();
        -(v.d(2) / v)
    });
    let kext = k[0] * k[1];
    let hmean = (k[0] + k[1]) * 0.5;
    let big_b = patch.profile.big_b_jet(p[2], 3)?;
    let b1 = big_b.d(2);
    let b2 = b1.d(2);
    let e2b = (big_b * 2.0).exp();
    let varphi = (e2b.truncate(1) - 1.0) * kext + b1.truncate(1) * hmean * 2.0;
    let (bv, b1v, b2v, e2bv) = (big_b.value(), b1.value(), b2.value(), e2b.value());
    let phi = varphi.value();
    let theta = eps * e2bv + b2v - eps + phi - 2.0 * b1v * b1v;
    let phi3 = varphi.grad(2);

    let metric = MetricJet::from_hypersurface(patch, p)?;
    let (alpha, beta) = alpha_beta(&metric);
    let gr = guichard_pde_residuals(&alpha, &beta)?;
    let closed = patch.parallel_curvatures(p)?;
    let a3 = alpha.grad(2);
    let be3 = beta.grad(2);
    let e3 = {
        let (a, b) = (alpha.d(2), beta.d(2));
        (a.d(2) + a * a + b.d(2) + b * b - a * b).value()
    };
    let e12 = gr.rho + e3;
    let b_sq = (2.0 * bv).exp();
    Ok(ProofDiagnostics {
        varphi: phi,
        varphi_1: varphi.grad(0),
        varphi_2: varphi.grad(1),
        varphi_3: phi3,
        theta,
        rho_metric: gr.rho,
        rho_closed: 2.0 * b2v - b1v * b1v - eps * e2bv + 2.0 * eps - phi,
        system_first: phi3 - 2.0 * b1v * (eps + phi),
        system_second: eps + 2.0 * b1v * b1v - eps * e2bv - b2v - phi,
        varphi_3_k2: phi3 - 2.0 * k[1].value() * theta - 2.0 * b1v * (eps + phi),
        varphi_3_h: phi3 - 2.0 * hmean.value() * theta - 2.0 * b1v * (eps + phi),
        alpha_3: a3 + closed[0] + b1v,
        beta_3: be3 + closed[1] + b1v,
        third_order_terms: e3
            - (2.0 * b1v * hmean.value() - kext.value() - 2.0 * eps - 2.0 * b2v + b1v * b1v),
        gauss_terms: e12 + b_sq * (kext.value() + eps),
        varphi_constants: constants.map(|c| (phi - (c.lambda * e2bv - eps)).abs()),
    })
}

/// Conditions on a principal frame of a hypersurface of a space form that
/// characterize conformal flatness when the principal curvatures are distinct.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct CartanResiduals {
    /// `max |⟨∇_{e_i} e_j, e_k⟩|` over distinct `i, j, k`.
    pub uno: f64,
    /// `max_i |(λ_j−λ_k) e_i(λ_i) + (λ_i−λ_k) e_i(λ_j) + (λ_j−λ_i) e_i(λ_k)|`.
    pub dos: f64,
    /// `max_i |∇_{e_i} e_i − Σ_{j≠i} (λ_i−λ_j)⁻¹ e_j(λ_i) e_j|`.
    pub tres: f64,
    pub lambda: [f64; 3],
    pub min_gap: f64,
}

pub fn cartan_conditions(hs: &dyn Hypersurface, p: [f64; 3], min_gap: f64) -> Result<CartanResiduals> {
    let geo = local_geometry(hs, p, 4)?;
    let start = geo.principal()?;
    let gap = (start[0].lambda - start[1].lambda).min(start[1].lambda - start[2].lambda);
    if gap < min_gap {
        return Err(Error::NearUmbilic { gap, threshold: min_gap });
    }
    let metric = MetricJet::new(p, geo.g)?;
    let bundle = curvature_bundle(&metric)?;
    let gam = bundle.christoffel;
    let g = bundle.g;
    let mut lam = Vec::new();
    let mut e = Vec::new();
    for st in &start {
        let (l, v) = eigen_jet(&geo.g, &geo.ii, st)?;
        lam.push(l);
        e.push(v);
    }
    let ev: Vec<nalgebra::Vector3<f64>> =
        e.iter().map(|v| nalgebra::Vector3::new(v[0].value(), v[1].value(), v[2].value())).collect();
    // e_i(f) for a jet f
    let deriv = |i: usize, f: &Jet| (0..3).map(|a| ev[i][a] * f.grad(a)).sum::<f64>();
    let cov = |i: usize, j: usize| -> nalgebra::Vector3<f64> {
        nalgebra::Vector3::from_fn(|c, _| {
            (0..3)
                .map(|a| {
                    ev[i][a]
                        * (e[j][c].grad(a) + (0..3).map(|b| gam[c][a][b] * ev[j][b]).sum::<f64>())
                })
                .sum()
        })
    };
    let gi = |x: &nalgebra::Vector3<f64>, y: &nalgebra::Vector3<f64>| (x.transpose() * g * y)[(0, 0)];
    let l: Vec<f64> = lam.iter().map(Jet::value).collect();
    let mut out = CartanResiduals {
        lambda: [l[0], l[1], l[2]],
        min_gap: gap,
        ..Default::default()
    };
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        for (a, b, c) in [(i, j, k), (i, k, j)] {
            out.uno = out.uno.max(gi(&cov(a, b), &ev[c]).abs());
        }
        let dos = (l[j] - l[k]) * deriv(i, &lam[i])
            + (l[i] - l[k]) * deriv(i, &lam[j])
            + (l[j] - l[i]) * deriv(i, &lam[k]);
        out.dos = out.dos.max(dos.abs());
        let mut w = cov(i, i);
        for m in [j, k] {
            w -= ev[m] * (deriv(m, &lam[i]) / (l[i] - l[m]));
        }
        out.tres = out.tres.max(gi(&w, &w).max(0.0).sqrt());
    }
    Ok(out)
}

/// `dx² + dy² + (dz − x dy)²`, a left-invariant metric on the Heisenberg group.
pub fn nil_metric<T: Real>(x: [T; 3]) -> [[T; 3]; 3] {
    let one = x[0].lift(1.0);
    let zero = x[0].lift(0.0);
    [
        [one, zero, zero],
        [zero, one + x[0] * x[0], -x[0]],
        [zero, -x[0], one],
    ]
}

/// The round metric of `S³` in hyperspherical coordinates `(χ, θ, φ)`.
pub fn round_sphere_metric<T: Real>(x: [T; 3]) -> [[T; 3]; 3] {
    let zero = x[0].lift(0.0);
    let s1 = x[0].sin();
    let s2 = x[1].sin();
    [
        [x[0].lift(1.0), zero, zero],
        [zero, s1 * s1, zero],
        [zero, zero, s1 * s1 * s2 * s2],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{instantiate_catalog, ChartKind, ChartSpec};
    use crate::construction::{assemble_hypersurface, derive_bars, find_admissible_intervals, select_interval, Profile};
    use crate::hypersurface::Box3;
    use crate::spaceform::Epsilon;
    use proptest::prelude::*;

    fn flat(p: [f64; 3]) -> MetricJet {
        MetricJet::from_analytic(p, |x| {
            let (o, z) = (x[0].lift(1.0), x[0].lift(0.0));
            [[o, z, z], [z, o, z], [z, z, o]]
        })
        .unwrap()
    }

    fn cylinder_patch(perturb: f64) -> HypersurfacePatch {
        let eps = Epsilon::Flat;
        let spec = ChartSpec {
            kind: ChartKind::CylinderOverPlaneCurve { radius: Some(1.0), plane_curve: None },
            domain: None,
            umbilic_gap: None,
        };
        let chart = instantiate_catalog(&spec, eps).unwrap();
        let c = derive_bars(-1.0, 1.0, 0.5, eps);
        let iv = select_interval(&find_admissible_intervals(&c, eps, -2.0, 2.0, 400).unwrap(), 0.0, None)
            .unwrap();
        let prof = Profile::new(c, eps, 0.0, iv).unwrap().with_perturbation(perturb);
        assemble_hypersurface(chart, prof, (-0.5, 0.6)).unwrap()
    }

    /// `(cos χ, sin χ cos θ, sin χ sin θ cos φ, sin χ sin θ sin φ)`.
    struct UnitSphere;
    impl Hypersurface for UnitSphere {
        fn ambient_dim(&self) -> usize {
            4
        }
        fn domain(&self) -> Box3 {
            Box3 { lo: [0.3, 0.3, -1.0], hi: [2.5, 2.5, 1.0] }
        }
        fn position_jet(&self, p: [f64; 3], order: usize) -> Result<Vec<Jet>> {
            let [c, t, f] = Jet::seed(p, order);
            Ok(vec![c.cos(), c.sin() * t.cos(), c.sin() * t.sin() * f.cos(), c.sin() * t.sin() * f.sin()])
        }
        fn normal_jet(&self, p: [f64; 3], order: usize) -> Result<Vec<Jet>> {
            self.position_jet(p, order)
        }
    }

    #[test]
    fn flat_metric_has_no_curvature() {
        let b = curvature_bundle(&flat([0.1, 0.2, 0.3])).unwrap();
        assert_eq!(b.scalar, 0.0);
        assert_eq!(b.cotton_norm, 0.0);
        assert_eq!(b.codazzi_residual(STANDARD_SCHOUTEN), 0.0);
        let l = lame_curvatures(&flat([0.0; 3])).unwrap();
        assert_eq!(l.sectional, [0.0; 3]);
        assert!(l.phi.iter().flatten().all(|&x| x == 0.0));
        let gr = guichard_pde_residuals(&Jet::constant(0.0, 3), &Jet::constant(0.0, 3)).unwrap();
        assert_eq!(gr.conf4 + gr.conf5 + gr.conf6 + gr.f23 + gr.h13, 0.0);
    }

    #[test]
    fn round_sphere_is_constant_curvature_and_conformally_flat() {
        let p = [0.7, 1.1, 0.4];
        let b = curvature_bundle(&MetricJet::from_analytic(p, round_sphere_metric).unwrap()).unwrap();
        for k in b.sectional {
            assert!((k - 1.0).abs() < 1e-12);
        }
        assert!((b.scalar - 6.0).abs() < 1e-12);
        assert!(b.cotton_norm < 1e-12);
        assert!(b.symmetry_residual() < 1e-12);
        assert!((b.curvature_scale() - 2.0).abs() < 1e-12);
        // the same metric induced by the embedding
        let e = curvature_bundle(&MetricJet::from_hypersurface(&UnitSphere, p).unwrap()).unwrap();
        assert!((e.scalar - 6.0).abs() < 1e-10);
        assert!(e.cotton_norm < 1e-10);
    }

    #[test]
    fn nil_metric_is_not_conformally_flat() {
        // frame computation: in (∂x, ∂y + x∂z, ∂z) the only bracket is
        // [E1, E2] = −E3, so Ric = diag(−1/2, −1/2, 1/2) and s = −1/2
        let b = curvature_bundle(&MetricJet::from_analytic([0.0; 3], nil_metric).unwrap()).unwrap();
        assert!((b.scalar + 0.5).abs() < 1e-12);
        assert!((b.ricci[(0, 0)] + 0.5).abs() < 1e-12);
        assert!((b.ricci[(2, 2)] - 0.5).abs() < 1e-12);
        assert!(b.cotton_norm > 0.1, "{}", b.cotton_norm);
        assert!(b.codazzi_residual(STANDARD_SCHOUTEN) > 0.1);
        // left invariance: the norm is the same elsewhere
        let c = curvature_bundle(&MetricJet::from_analytic([0.4, -0.3, 1.0], nil_metric).unwrap()).unwrap();
        assert!((c.cotton_norm - b.cotton_norm).abs() < 1e-12);
    }

    #[test]
    fn sampled_metric_matches_jets() {
        let p = [0.3, -0.2, 0.5];
        let exact = curvature_bundle(&MetricJet::from_analytic(p, nil_metric).unwrap()).unwrap();
        let fd = MetricJet::from_samples(p, |x| Matrix3::from_fn(|i, j| nil_metric(x)[i][j]), 1e-3).unwrap();
        let approx = curvature_bundle(&fd).unwrap();
        assert!((approx.scalar - exact.scalar).abs() < 1e-7);
        assert!((approx.cotton_norm - exact.cotton_norm).abs() < 1e-5);
        let fd = MetricJet::from_samples(p, |x| Matrix3::from_fn(|i, j| round_sphere_metric(x)[i][j]), 1e-3).unwrap();
        let b = curvature_bundle(&fd).unwrap();
        assert!((b.scalar - 6.0).abs() < 1e-6);
        assert!(b.cotton_norm < 1e-4);
    }

    #[test]
    fn lame_route_matches_tensor_route() {
        let p = [0.4, 0.9, -0.3];
        let m = MetricJet::from_analytic(p, |x| {
            let z = x[0].lift(0.0);
            let v1 = (x[0] * x[1] + x[2] * 0.3).exp();
            let v2 = x[2].cos() + 2.0 + x[0] * x[0];
            let v3 = (x[1] * 0.5).sinh() + 1.5;
            [[v1 * v1, z, z], [z, v2 * v2, z], [z, z, v3 * v3]]
        })
        .unwrap();
        let l = lame_curvatures(&m).unwrap();
        let b = curvature_bundle(&m).unwrap();
        for k in 0..3 {
            assert!((l.sectional[k] - b.sectional[k]).abs() < 1e-8, "{:?} {:?}", l.sectional, b.sectional);
        }
        for &(ijk, cj, ci) in &l.r_components {
            let (tj, ti) = r_components_from_bundle(&b, ijk);
            assert!((cj - tj).abs() < 1e-8 && (ci - ti).abs() < 1e-8, "{ijk:?}");
        }
    }

    #[test]
    fn patch_metric_blocks_and_lemma_residuals() {
        let patch = cylinder_patch(0.0);
        for p in patch.box3().shrink(0.05).grid([3, 3, 4]) {
            let m = MetricJet::from_hypersurface(&patch, p).unwrap();
            let g = m.value();
            let b = patch.profile.eval(p[2]).unwrap().b;
            assert!((g[(2, 2)] - b * b).abs() < 1e-12);
            assert!(g[(0, 2)].abs() < 1e-12 && g[(1, 2)].abs() < 1e-12);
            let (al, be) = alpha_beta(&m);
            let gr = guichard_pde_residuals(&al, &be).unwrap();
            for r in [gr.f23, gr.h13, gr.conf4, gr.conf5, gr.conf6, gr.phi12_3, gr.phi21_3, gr.h11, gr.f22] {
                assert!(r.abs() < 1e-8, "{p:?} {gr:?}");
            }
            let bundle = curvature_bundle(&m).unwrap();
            assert!(bundle.cotton_norm / bundle.curvature_scale() < 1e-8);
            // standard Schouten is the one that satisfies Codazzi
            assert!(bundle.codazzi_residual(STANDARD_SCHOUTEN) < 1e-8);
            let tilde = tilde_metric(p, al, be).unwrap();
            let lame = lame_curvatures(&tilde).unwrap();
            let tb = curvature_bundle(&tilde).unwrap();
            assert!((2.0 * lame.ell[0] - (tb.schouten[(0, 0)] * 2.0)).abs() < 1e-8);
            assert!(lame.codazzi < 1e-8);
        }
    }

    #[test]
    fn proof_identities_hold_on_a_build() {
        let patch = cylinder_patch(0.0);
        let constants = ProofConstants::from_pqr([-1.0, 1.0, 0.5], Epsilon::Flat);
        for p in patch.box3().shrink(0.05).grid([3, 3, 5]) {
            let d = proof_diagnostics(&patch, p, Some(constants)).unwrap();
            for r in [
                d.theta,
                d.varphi_1,
                d.varphi_2,
                d.system_first,
                d.system_second,
                d.varphi_3_k2,
                d.varphi_3_h,
                d.alpha_3,
                d.beta_3,
                d.third_order_terms,
                d.gauss_terms,
                d.rho_metric - d.rho_closed,
                d.varphi_constants.unwrap(),
            ] {
                assert!(r.abs() < 1e-8, "{p:?} {d:?}");
            }
        }
    }

    #[test]
    fn perturbed_profile_breaks_conformal_flatness() {
        let patch = cylinder_patch(0.01);
        let worst = patch
            .box3()
            .grid([4, 4, 6])
            .into_iter()
            .map(|p| {
                let b = curvature_bundle(&MetricJet::from_hypersurface(&patch, p).unwrap()).unwrap();
                b.cotton_norm / b.curvature_scale()
            })
            .fold(0.0, f64::max);
        assert!(worst > 1e-3, "{worst}");
    }

    #[test]
    fn cartan_conditions_on_a_flat_build() {
        let patch = cylinder_patch(0.0);
        for p in patch.box3().shrink(0.05).grid([2, 2, 3]) {
            let c = cartan_conditions(&patch, p, 1e-4).unwrap();
            assert!(c.uno < 1e-8 && c.dos < 1e-8 && c.tres < 1e-8, "{c:?}");
        }
        assert!(matches!(
            cartan_conditions(&UnitSphere, [0.7, 1.1, 0.4], 1e-4),
            Err(Error::NearUmbilic { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn cotton_and_codazzi_vanish_together(
            c in proptest::array::uniform6(-0.5f64..0.5),
            t in prop_oneof![Just(0.0), 0.2f64..0.6],
        ) {
            let p = [0.1, -0.2, 0.3];
            let m = MetricJet::from_analytic(p, |x| {
                let u = x[0] * c[0] + x[1] * x[2] * c[1] + (x[2] * c[2]).sin() + x[0] * x[1] * c[3];
                let w = (u * 2.0).exp();
                let z = x[0].lift(0.0);
                let bump = x[0] * x[1] * c[4] * t + x[2] * x[2] * t + x[0] * c[5] * t;
                [[w, z, z], [z, w * (bump.exp()), z], [z, z, w]]
            }).unwrap();
            let b = curvature_bundle(&m).unwrap();
            let cot = b.cotton_norm < 1e-8;
            let cod = b.codazzi_residual(STANDARD_SCHOUTEN) < 1e-8;
            prop_assert_eq!(cot, cod);
            if t == 0.0 {
                prop_assert!(cot);
            }
            prop_assert!(b.symmetry_residual() < 1e-9);
        }
    }
}
