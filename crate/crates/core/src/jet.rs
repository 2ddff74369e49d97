//! Truncated Taylor jets in three variables.
//!
//! A [`Jet`] stores the Taylor coefficients `c_α = ∂^α f / α!` of a smooth
//! function of `(x1, x2, x3)` around an expansion point, for every multi-index
//! of total degree up to the jet's order (at most [`MAX_ORDER`]). Arithmetic
//! and the elementary functions act on the truncated series, so evaluating a
//! closed-form expression on seeded variables yields its exact partial
//! derivatives up to roundoff.
//!
//! Differentiating a jet lowers its order by one; that is how metric jets of
//! order 3 come out of immersion jets of order 4.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::OnceLock;

/// Number of independent variables.
pub const NVARS: usize = 3;
/// Highest supported total degree.
pub const MAX_ORDER: usize = 4;
/// Number of monomials of degree ≤ [`MAX_ORDER`] in [`NVARS`] variables.
pub const NCOEF: usize = 35;

const NONE: u8 = u8::MAX;

struct Tables {
    exps: [[u8; NVARS]; NCOEF],
    degree: [u8; NCOEF],
    index: [[[u8; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1],
    len: [usize; MAX_ORDER + 1],
    // (i, j, k) with exps[i] + exps[j] = exps[k], grouped by degree of k
    mul: Vec<(u8, u8, u8)>,
    mul_len: [usize; MAX_ORDER + 1],
    // up[v][k]: index of exps[k] + e_v
    up: [[u8; NCOEF]; NVARS],
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut exps = [[0u8; NVARS]; NCOEF];
        let mut degree = [0u8; NCOEF];
        let mut index = [[[NONE; MAX_ORDER + 1]; MAX_ORDER + 1]; MAX_ORDER + 1];
        let mut len = [0usize; MAX_ORDER + 1];
        let mut n = 0;
        for d in 0..=MAX_ORDER {
            for a in (0..=d).rev() {
                for b in (0..=d - a).rev() {
                    let c = d - a - b;
                    exps[n] = [a as u8, b as u8, c as u8];
                    degree[n] = d as u8;
                    index[a][b][c] = n as u8;
                    n += 1;
                }
            }
            len[d] = n;
        }
        debug_assert_eq!(n, NCOEF);

        let mut mul = Vec::new();
        let mut mul_len = [0usize; MAX_ORDER + 1];
        for k in 0..NCOEF {
            let ek = exps[k];
            for i in 0..NCOEF {
                let ei = exps[i];
                if (0..NVARS).all(|v| ei[v] <= ek[v]) {
                    let j = index[(ek[0] - ei[0]) as usize][(ek[1] - ei[1]) as usize]
                        [(ek[2] - ei[2]) as usize];
                    mul.push((i as u8, j, k as u8));
                }
            }
            mul_len[degree[k] as usize] = mul.len();
        }

        let mut up = [[NONE; NCOEF]; NVARS];
        for (v, row) in up.iter_mut().enumerate() {
            for k in 0..NCOEF {
                if (degree[k] as usize) < MAX_ORDER {
                    let mut e = exps[k];
                    e[v] += 1;
                    row[k] = index[e[0] as usize][e[1] as usize][e[2] as usize];
                }
            }
        }

        Tables { exps, degree, index, len, mul, mul_len, up }
    })
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Truncated Taylor expansion of a scalar function of three variables.
#[derive(Clone, Copy, PartialEq)]
pub struct Jet {
    order: u8,
    c: [f64; NCOEF],
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = tables().len[self.order as usize];
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("coeffs", &&self.c[..n])
            .finish()
    }
}

impl Jet {
    /// A constant: all derivatives vanish.
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut c = [0.0; NCOEF];
        c[0] = value;
        Jet { order: order as u8, c }
    }

    /// The coordinate function `x_var`, expanded at `value`.
    pub fn var(var: usize, value: f64, order: usize) -> Self {
        assert!(var < NVARS);
        let mut j = Jet::constant(value, order);
        if order >= 1 {
            j.c[1 + var] = 1.0;
        }
        j
    }

    /// Seeds all three variables at `point`.
    pub fn seed(point: [f64; 3], order: usize) -> [Jet; 3] {
        [
            Jet::var(0, point[0], order),
            Jet::var(1, point[1], order),
            Jet::var(2, point[2], order),
        ]
    }

    /// A jet assembled from partial derivatives `∂^e f` at the expansion point.
    pub fn from_partials(order: usize, partial: impl Fn([usize; 3]) -> f64) -> Self {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let t = tables();
        let mut c = [0.0; NCOEF];
        for (k, ck) in c.iter_mut().enumerate().take(t.len[order]) {
            let e = t.exps[k];
            let e = [e[0] as usize, e[1] as usize, e[2] as usize];
            *ck = partial(e) / e.iter().map(|&m| factorial(m)).product::<f64>();
        }
        Jet { order: order as u8, c }
    }

    pub fn order(&self) -> usize {
        self.order as usize
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Taylor coefficient of the monomial with exponents `e`.
    pub fn coeff(&self, e: [usize; 3]) -> f64 {
        if e.iter().sum::<usize>() > self.order() {
            return 0.0;
        }
        let t = tables();
        self.c[t.index[e[0]][e[1]][e[2]] as usize]
    }

    /// Mixed partial derivative `∂^e f` at the expansion point.
    pub fn partial(&self, e: [usize; 3]) -> f64 {
        assert!(
            e.iter().sum::<usize>() <= self.order(),
            "partial of degree {:?} beyond jet order {}",
            e,
            self.order
        );
        self.coeff(e) * e.iter().map(|&k| factorial(k)).product::<f64>()
    }

    /// First partial derivative with respect to `var`.
    pub fn grad(&self, var: usize) -> f64 {
        let mut e = [0; 3];
        e[var] = 1;
        self.partial(e)
    }

    /// The derivative `∂f/∂x_var` as a jet of one order less.
    pub fn d(&self, var: usize) -> Jet {
        assert!(self.order > 0, "cannot differentiate an order-0 jet");
        let t = tables();
        let order = self.order as usize - 1;
        let mut c = [0.0; NCOEF];
        for (k, ck) in c.iter_mut().enumerate().take(t.len[order]) {
            let src = t.up[var][k] as usize;
            *ck = (t.exps[k][var] as f64 + 1.0) * self.c[src];
        }
        Jet { order: order as u8, c }
    }

    /// Antiderivative in `var` taking the value `at_origin` on the
    /// hyperplane `x_var = expansion point`. The order grows by one, capped
    /// at [`MAX_ORDER`].
    pub fn integrate(&self, var: usize, at_origin: f64) -> Jet {
        let t = tables();
        let order = (self.order as usize + 1).min(MAX_ORDER);
        let mut c = [0.0; NCOEF];
        c[0] = at_origin;
        for k in 0..t.len[self.order as usize] {
            let dst = t.up[var][k];
            if dst != NONE && (t.degree[dst as usize] as usize) <= order {
                c[dst as usize] = self.c[k] / (t.exps[k][var] as f64 + 1.0);
            }
        }
        Jet { order: order as u8, c }
    }

    /// Drops all terms above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order as usize);
        let t = tables();
        let mut c = [0.0; NCOEF];
        c[..t.len[order]].copy_from_slice(&self.c[..t.len[order]]);
        Jet { order: order as u8, c }
    }

    /// Evaluates the truncated polynomial at a displacement from the
    /// expansion point.
    pub fn eval_at(&self, delta: [f64; 3]) -> f64 {
        let t = tables();
        (0..t.len[self.order as usize])
            .map(|k| {
                let e = t.exps[k];
                self.c[k]
                    * delta[0].powi(e[0] as i32)
                    * delta[1].powi(e[1] as i32)
                    * delta[2].powi(e[2] as i32)
            })
            .sum()
    }

    /// `f(self)` for a scalar function with derivatives `derivs[k] = f^(k)(x0)`.
    fn compose(&self, derivs: &[f64]) -> Jet {
        let order = self.order as usize;
        debug_assert!(derivs.len() > order);
        let mut delta = *self;
        delta.c[0] = 0.0;
        let mut acc = Jet::constant(derivs[order] / factorial(order), order);
        for k in (0..order).rev() {
            acc = acc * delta;
            acc.c[0] += derivs[k] / factorial(k);
        }
        acc
    }

    fn scalar_derivs(&self, f: impl Fn(usize, f64) -> f64) -> [f64; MAX_ORDER + 1] {
        let x = self.c[0];
        let mut d = [0.0; MAX_ORDER + 1];
        for (k, dk) in d.iter_mut().enumerate().take(self.order as usize + 1) {
            *dk = f(k, x);
        }
        d
    }

    pub fn recip(self) -> Jet {
        let d = self.scalar_derivs(|k, x| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * factorial(k) / x.powi(k as i32 + 1)
        });
        self.compose(&d)
    }

    pub fn powf(self, p: f64) -> Jet {
        let d = self.scalar_derivs(|k, x| {
            let falling: f64 = (0..k).map(|m| p - m as f64).product();
            falling * x.powf(p - k as f64)
        });
        self.compose(&d)
    }

    pub fn exp(self) -> Jet {
        let e = self.c[0].exp();
        self.compose(&[e; MAX_ORDER + 1])
    }
}

impl Default for Jet {
    fn default() -> Self {
        Jet::constant(0.0, 0)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let n = tables().len[order as usize];
        let mut c = [0.0; NCOEF];
        for k in 0..n {
            c[k] = self.c[k] + rhs.c[k];
        }
        Jet { order, c }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let n = tables().len[order as usize];
        let mut c = [0.0; NCOEF];
        for k in 0..n {
            c[k] = self.c[k] - rhs.c[k];
        }
        Jet { order, c }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let t = tables();
        let mut c = [0.0; NCOEF];
        for &(i, j, k) in &t.mul[..t.mul_len[order as usize]] {
            c[k as usize] += self.c[i as usize] * rhs.c[j as usize];
        }
        Jet { order, c }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for v in self.c.iter_mut() {
            *v = -*v;
        }
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        for v in self.c.iter_mut() {
            *v *= rhs;
        }
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self * (1.0 / rhs)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        rhs + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        -rhs + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs * self
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self = *self - rhs;
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, rhs: Jet) {
        *self = *self * rhs;
    }
}

/// Scalar arithmetic shared by `f64` and [`Jet`], so closed-form geometry can
/// be written once and evaluated either plainly or with derivatives.
pub trait Real:
    Copy
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    /// A constant carrying the same jet order as `self`.
    fn lift(&self, v: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn recip(self) -> Self;

    fn tanh(self) -> Self {
        self.sinh() / self.cosh()
    }
    fn sq(self) -> Self {
        self * self
    }
}

impl Real for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, v: f64) -> f64 {
        v
    }
    fn sin(self) -> f64 {
        f64::sin(self)
    }
    fn cos(self) -> f64 {
        f64::cos(self)
    }
    fn sinh(self) -> f64 {
        f64::sinh(self)
    }
    fn cosh(self) -> f64 {
        f64::cosh(self)
    }
    fn exp(self) -> f64 {
        f64::exp(self)
    }
    fn ln(self) -> f64 {
        f64::ln(self)
    }
    fn sqrt(self) -> f64 {
        f64::sqrt(self)
    }
    fn recip(self) -> f64 {
        1.0 / self
    }
    fn tanh(self) -> f64 {
        f64::tanh(self)
    }
}

impl Real for Jet {
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn lift(&self, v: f64) -> Jet {
        Jet::constant(v, self.order as usize)
    }
    fn sin(self) -> Jet {
        let d = self.scalar_derivs(|k, x| match k % 4 {
            0 => x.sin(),
            1 => x.cos(),
            2 => -x.sin(),
            _ => -x.cos(),
        });
        self.compose(&d)
    }
    fn cos(self) -> Jet {
        let d = self.scalar_derivs(|k, x| match k % 4 {
            0 => x.cos(),
            1 => -x.sin(),
            2 => -x.cos(),
            _ => x.sin(),
        });
        self.compose(&d)
    }
    fn sinh(self) -> Jet {
        let d = self.scalar_derivs(|k, x| if k % 2 == 0 { x.sinh() } else { x.cosh() });
        self.compose(&d)
    }
    fn cosh(self) -> Jet {
        let d = self.scalar_derivs(|k, x| if k % 2 == 0 { x.cosh() } else { x.sinh() });
        self.compose(&d)
    }
    fn exp(self) -> Jet {
        Jet::exp(self)
    }
    fn ln(self) -> Jet {
        let d = self.scalar_derivs(|k, x| {
            if k == 0 {
                x.ln()
            } else {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sign * factorial(k - 1) / x.powi(k as i32)
            }
        });
        self.compose(&d)
    }
    fn sqrt(self) -> Jet {
        let d = self.scalar_derivs(|k, x| {
            let falling: f64 = (0..k).map(|m| 0.5 - m as f64).product();
            if k == 0 {
                x.sqrt()
            } else {
                falling * x.sqrt() / x.powi(k as i32)
            }
        });
        self.compose(&d)
    }
    fn recip(self) -> Jet {
        Jet::recip(self)
    }
}

/// Euclidean (or Lorentzian, first coordinate negated) inner product.
pub fn dot<T: Real>(lorentzian: bool, u: &[T], v: &[T]) -> T {
    assert_eq!(u.len(), v.len());
    let mut acc = u[0] * v[0];
    if lorentzian {
        acc = -acc;
    }
    for i in 1..u.len() {
        acc = acc + u[i] * v[i];
    }
    acc
}

/// Values of a vector of jets.
pub fn values(v: &[Jet]) -> Vec<f64> {
    v.iter().map(Jet::value).collect()
}

/// Componentwise derivative of a vector of jets.
pub fn d_vec(v: &[Jet], var: usize) -> Vec<Jet> {
    v.iter().map(|x| x.d(var)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_sizes() {
        let t = tables();
        assert_eq!(t.len, [1, 4, 10, 20, 35]);
        assert_eq!(t.mul.len(), 210);
    }

    #[test]
    fn product_rule_matches_polynomial() {
        // f = (x + 2y)(y - z^2) expanded at (1, 2, 3)
        let [x, y, z] = Jet::seed([1.0, 2.0, 3.0], 4);
        let f = (x + y * 2.0) * (y - z * z);
        // ∂x f = y - z² = -7 ; ∂z f = -(x+2y)·2z = -30 ; ∂xz f = -2z = -6
        assert_eq!(f.value(), 5.0 * -7.0);
        assert!((f.partial([1, 0, 0]) + 7.0).abs() < 1e-14);
        assert!((f.partial([0, 0, 1]) + 30.0).abs() < 1e-14);
        assert!((f.partial([1, 0, 1]) + 6.0).abs() < 1e-14);
        assert!((f.partial([0, 1, 2]) + 4.0).abs() < 1e-14);
        assert_eq!(f.partial([0, 0, 4]), 0.0);
    }

    #[test]
    fn elementary_functions_against_known_derivatives() {
        let x = Jet::var(0, 0.7, 4);
        let s = x.sin();
        assert!((s.partial([3, 0, 0]) + 0.7f64.cos()).abs() < 1e-14);
        assert!((s.partial([4, 0, 0]) - 0.7f64.sin()).abs() < 1e-14);
        let l = x.ln();
        assert!((l.partial([4, 0, 0]) + 6.0 / 0.7f64.powi(4)).abs() < 1e-10);
        let r = x.sqrt();
        // d³/dx³ sqrt x = 3/8 x^{-5/2}
        assert!((r.partial([3, 0, 0]) - 0.375 * 0.7f64.powf(-2.5)).abs() < 1e-12);
        let q = x.recip() * x;
        assert!((q.value() - 1.0).abs() < 1e-15);
        for e in [[1, 0, 0], [2, 0, 0], [3, 0, 0], [4, 0, 0]] {
            assert!(q.partial(e).abs() < 1e-12);
        }
        let h = x.cosh() * x.cosh() - x.sinh() * x.sinh();
        assert!((h.value() - 1.0).abs() < 1e-14);
        assert!(h.partial([3, 0, 0]).abs() < 1e-12);
    }

    #[test]
    fn derivative_and_integral_are_inverse() {
        let [x, y, z] = Jet::seed([0.3, -0.2, 0.5], 4);
        let f = (x * y).sin() + z.exp() * y;
        let df = f.d(2);
        assert!((df.value() - 0.5f64.exp() * -0.2).abs() < 1e-15);
        let back = df.integrate(2, f.value());
        // recovers the z-dependent part exactly; x,y dependence at z=z0 is lost
        assert!((back.partial([0, 0, 3]) - f.partial([0, 0, 3])).abs() < 1e-13);
        assert!((back.partial([0, 1, 2]) - f.partial([0, 1, 2])).abs() < 1e-13);
    }

    #[test]
    fn eval_at_reproduces_taylor_polynomial() {
        let [x, y, _] = Jet::seed([0.1, 0.2, 0.0], 4);
        let f = (x + y).exp();
        let h = 5e-3;
        let approx = f.eval_at([h, h, 0.0]);
        let exact = (0.3f64 + 2.0 * h).exp();
        assert!((approx - exact).abs() < 1e-11);
    }
}
