//! Hypersurfaces given by exact position jets over a box of parameters,
//! and their pointwise extrinsic geometry.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{dot, Jet};

/// Parameter box `[lo, hi]` in `(x1, x2, s)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Box3 {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Box3 {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| {
            let tol = 1e-12 * (1.0 + (self.hi[i] - self.lo[i]).abs());
            p[i] >= self.lo[i] - tol && p[i] <= self.hi[i] + tol
        })
    }

    pub fn scale(&self) -> f64 {
        (0..3).map(|i| self.hi[i] - self.lo[i]).fold(0.0, f64::max)
    }

    pub fn center(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = 0.5 * (self.lo[i] + self.hi[i]);
        }
        c
    }

    /// Uniform grid, row-major over `(i1, i2, is)` with `is` fastest.
    pub fn grid(&self, n: [usize; 3]) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(n[0] * n[1] * n[2]);
        for i in 0..n[0] {
            for j in 0..n[1] {
                for k in 0..n[2] {
                    out.push([
                        crate::charts::lerp([self.lo[0], self.hi[0]], i, n[0]),
                        crate::charts::lerp([self.lo[1], self.hi[1]], j, n[1]),
                        crate::charts::lerp([self.lo[2], self.hi[2]], k, n[2]),
                    ]);
                }
            }
        }
        out
    }

    /// The box shrunk by `frac` of each side length on both ends.
    pub fn shrink(&self, frac: f64) -> Box3 {
        let mut b = *self;
        for i in 0..3 {
            let m = frac * (self.hi[i] - self.lo[i]);
            b.lo[i] += m;
            b.hi[i] -= m;
        }
        b
    }
}

/// A parametrized hypersurface with exact jets.
pub trait Hypersurface: Send + Sync {
    fn ambient_dim(&self) -> usize;

    fn lorentzian(&self) -> bool {
        false
    }

    fn domain(&self) -> Box3;

    /// Ambient coordinates as jets in `(x1, x2, s)`.
    fn position_jet(&self, p: [f64; 3], order: usize) -> Result<Vec<Jet>>;

    /// Unit normal (within the relevant ambient space) as jets.
    fn normal_jet(&self, p: [f64; 3], order: usize) -> Result<Vec<Jet>>;

    fn position(&self, p: [f64; 3]) -> Result<Vec<f64>> {
        Ok(self.position_jet(p, 0)?.iter().map(Jet::value).collect())
    }
}

pub type Mat3J = [[Jet; 3]; 3];

/// Generalized cross product of three vectors of `R⁴`: the vector `n` with
/// `⟨n, x⟩ = det[a; b; c; x]`.
pub fn cross4<T>(a: &[T], b: &[T], c: &[T]) -> Vec<T>
where
    T: crate::jet::Real,
{
    let det3 = |m: [[T; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    (0..4)
        .map(|i| {
            let cols: Vec<usize> = (0..4).filter(|&k| k != i).collect();
            let row = |v: &[T]| [v[cols[0]], v[cols[1]], v[cols[2]]];
            let d = det3([row(a), row(b), row(c)]);
            if (3 + i) % 2 == 0 {
                d
            } else {
                -d
            }
        })
        .collect()
}

/// Unit normal jet of a hypersurface of Euclidean `R⁴`, oriented to agree
/// with `reference` when given.
pub fn euclidean_normal_jet(pos: &[Jet], reference: Option<&[f64]>) -> Result<Vec<Jet>> {
    if pos.len() != 4 {
        return Err(Error::DimensionMismatch(pos.len(), 4));
    }
    let d: Vec<Vec<Jet>> = (0..3).map(|k| pos.iter().map(|x| x.d(k)).collect()).collect();
    let n = cross4(&d[0], &d[1], &d[2]);
    let len2 = dot(false, &n, &n);
    if len2.value() <= 1e-300 {
        return Err(Error::Degenerate("tangent vectors are dependent".into()));
    }
    let inv = crate::jet::Real::sqrt(len2).recip();
    let mut n: Vec<Jet> = n.into_iter().map(|x| x * inv).collect();
    if let Some(r) = reference {
        let s: f64 = n.iter().zip(r).map(|(a, b)| a.value() * b).sum();
        if s < 0.0 {
            n = n.into_iter().map(|x| -x).collect();
        }
    }
    Ok(n)
}

/// Pointwise first and second fundamental forms as jets.
#[derive(Clone, Debug)]
pub struct LocalGeometry {
    pub p: [f64; 3],
    pub lorentzian: bool,
    pub position: Vec<f64>,
    /// `F_* ∂_i` as ambient vectors.
    pub tangents: [Vec<f64>; 3],
    pub normal: Vec<f64>,
    /// Induced metric, jets of order `order − 1`.
    pub g: Mat3J,
    /// Second fundamental form, jets of order `order − 2`.
    pub ii: Mat3J,
}

pub fn local_geometry(hs: &dyn Hypersurface, p: [f64; 3], order: usize) -> Result<LocalGeometry> {
    if order < 2 {
        return Err(Error::InvalidParams("local geometry needs jets of order >= 2".into()));
    }
    if !hs.domain().contains(p) {
        return Err(Error::OutOfDomain(p.to_vec()));
    }
    let lor = hs.lorentzian();
    let pos = hs.position_jet(p, order)?;
    let nrm = hs.normal_jet(p, order - 1)?;
    let d1: Vec<Vec<Jet>> = (0..3).map(|k| pos.iter().map(|x| x.d(k)).collect()).collect();
    let zero = Jet::constant(0.0, order - 1);
    let mut g = [[zero; 3]; 3];
    let mut ii = [[zero.truncate(order - 2); 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let gij = dot(lor, &d1[i], &d1[j]);
            g[i][j] = gij;
            g[j][i] = gij;
            let dij: Vec<Jet> = d1[i].iter().map(|x| x.d(j)).collect();
            let bij = dot(lor, &dij, &nrm).truncate(order - 2);
            ii[i][j] = bij;
            ii[j][i] = bij;
        }
    }
    Ok(LocalGeometry {
        p,
        lorentzian: lor,
        position: pos.iter().map(Jet::value).collect(),
        tangents: [0, 1, 2].map(|k| d1[k].iter().map(Jet::value).collect()),
        normal: nrm.iter().map(Jet::value).collect(),
        g,
        ii,
    })
}

pub fn values3(m: &Mat3J) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j].value())
}

/// A principal curvature with its `g`-unit direction in parameter coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Principal {
    pub lambda: f64,
    pub dir: Vector3<f64>,
}

/// Solves `B v = λ G v` with `G` positive definite; eigenvalues descending,
/// eigenvectors `G`-orthonormal.
pub fn generalized_eigen(g: &Matrix3<f64>, b: &Matrix3<f64>) -> Result<[Principal; 3]> {
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::Degenerate("metric is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("metric factor is singular".into()))?;
    let m = linv * b * linv.transpose();
    let m = 0.5 * (m + m.transpose());
    let eig = m.symmetric_eigen();
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let lt_inv = linv.transpose();
    Ok(idx.map(|k| Principal {
        lambda: eig.eigenvalues[k],
        dir: lt_inv * eig.eigenvectors.column(k),
    }))
}

impl LocalGeometry {
    pub fn metric(&self) -> Matrix3<f64> {
        values3(&self.g)
    }

    pub fn second_form(&self) -> Matrix3<f64> {
        values3(&self.ii)
    }

    /// Shape operator `A = g⁻¹ II` in coordinates.
    pub fn shape_operator(&self) -> Result<Matrix3<f64>> {
        let gi = self
            .metric()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate(format!("singular metric at {:?}", self.p)))?;
        Ok(gi * self.second_form())
    }

    /// `sqrt(σ_min / σ_max)` of the metric: ratio of extreme stretch factors.
    pub fn regularity(&self) -> f64 {
        let ev = self.metric().symmetric_eigenvalues();
        let (mn, mx) = (ev.min(), ev.max());
        if mx <= 0.0 || mn <= 0.0 {
            0.0
        } else {
            (mn / mx).sqrt()
        }
    }

    pub fn principal(&self) -> Result<[Principal; 3]> {
        generalized_eigen(&self.metric(), &self.second_form())
    }

    /// Ambient vector `F_* X` for parameter-space `X`.
    pub fn push(&self, x: &Vector3<f64>) -> Vec<f64> {
        let n = self.tangents[0].len();
        (0..n)
            .map(|k| x[0] * self.tangents[0][k] + x[1] * self.tangents[1][k] + x[2] * self.tangents[2][k])
            .collect()
    }

    /// Coordinates of the tangential part of an ambient vector.
    pub fn tangential_coords(&self, v: &[f64]) -> Result<Vector3<f64>> {
        let rhs = Vector3::from_fn(|i, _| dot(self.lorentzian, &self.tangents[i], v));
        self.metric()
            .try_inverse()
            .map(|gi| gi * rhs)
            .ok_or_else(|| Error::Degenerate(format!("singular metric at {:?}", self.p)))
    }
}

/// Metric inner product of parameter-space vectors.
pub fn g_inner(g: &Matrix3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a.transpose() * g * b)[(0, 0)]
}

/// Angle in `[0, π/2]` between the lines spanned by `a` and `b` in metric `g`.
pub fn g_angle(g: &Matrix3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let na = g_inner(g, a, a).sqrt();
    let bb = g_inner(g, b, b);
    let ab = g_inner(g, a, b);
    // sine from the component of a orthogonal to b; acos loses accuracy near 0
    let perp = a - b * (ab / bb);
    let sin = g_inner(g, &perp, &perp).max(0.0).sqrt() / na;
    sin.atan2((ab / (na * bb.sqrt())).abs())
}

/// Solves the jet linear system `m x = rhs` by Gaussian elimination with
/// partial pivoting on the values.
pub fn solve_jets(mut m: Vec<Vec<Jet>>, mut rhs: Vec<Jet>) -> Result<Vec<Jet>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| m[a][col].value().abs().total_cmp(&m[b][col].value().abs()))
            .expect("non-empty");
        if m[piv][col].value().abs() < 1e-300 {
            return Err(Error::RankDeficient("singular jet system".into()));
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let inv = m[col][col].recip();
        for row in col + 1..n {
            let f = m[row][col] * inv;
            for k in col..n {
                let t = m[col][k];
                m[row][k] -= f * t;
            }
            let t = rhs[col];
            rhs[row] -= f * t;
        }
    }
    let mut x = rhs.clone();
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Ok(x)
}

/// Jet of a simple eigenpair of `ii v = λ g v` with `vᵀ g v = 1`, obtained by
/// Newton's method on truncated series; each step doubles the correct order.
pub fn eigen_jet(g: &Mat3J, ii: &Mat3J, start: &Principal) -> Result<(Jet, [Jet; 3])> {
    let order = ii[0][0].order();
    let g: Mat3J = g.map(|row| row.map(|x| x.truncate(order)));
    let c = |x: f64| Jet::constant(x, order);
    let mut lam = c(start.lambda);
    let mut v = [c(start.dir[0]), c(start.dir[1]), c(start.dir[2])];
    for _ in 0..3 {
        let gv: Vec<Jet> = (0..3)
            .map(|i| g[i][0] * v[0] + g[i][1] * v[1] + g[i][2] * v[2])
            .collect();
        let mut res = Vec::with_capacity(4);
        for i in 0..3 {
            let mut r = c(0.0);
            for k in 0..3 {
                r += (ii[i][k] - lam * g[i][k]) * v[k];
            }
            res.push(-r);
        }
        let norm = v[0] * gv[0] + v[1] * gv[1] + v[2] * gv[2];
        res.push(-((norm - 1.0) * 0.5));
        let mut jac = vec![vec![c(0.0); 4]; 4];
        for i in 0..3 {
            for k in 0..3 {
                jac[i][k] = ii[i][k] - lam * g[i][k];
            }
            jac[i][3] = -gv[i];
            jac[3][i] = gv[i];
        }
        let delta = solve_jets(jac, res)?;
        for k in 0..3 {
            v[k] += delta[k];
        }
        lam += delta[3];
    }
    Ok((lam, v))
}
