//! Divided differences `f^{[n]}(a_0,...,a_n)`: stable evaluation, a simplex
//! quadrature oracle, exact expansion for integer powers, and the primitives
//! `F_{k,d}`.

use num_rational::Rational64;
use num_traits::One;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DdError {
    #[error("point {0} outside the domain (0, inf)")]
    Domain(f64),
    #[error("simplex quadrature did not converge: value {value}, error estimate {estimate}")]
    NonConvergence { value: f64, estimate: f64 },
    #[error("no points given")]
    Empty,
}

/// `n`-th derivative oracle for user-supplied smooth functions.
pub type DerivFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum FunctionSpec {
    /// `c * a^p`
    Power { c: f64, p: f64 },
    /// `c * a^p * log a`
    PowerLog { c: f64, p: f64 },
    /// `c * exp(s * a)`
    Exp { c: f64, s: f64 },
    /// Smooth function given by its derivatives; `radius` bounds the Taylor
    /// expansion step (distance to the nearest singularity, `inf` if entire).
    Custom { name: String, deriv: DerivFn, radius: f64 },
}

impl fmt::Debug for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::Power { c, p } => write!(f, "{c}*a^{p}"),
            FunctionSpec::PowerLog { c, p } => write!(f, "{c}*a^{p}*log(a)"),
            FunctionSpec::Exp { c, s } => write!(f, "{c}*exp({s}*a)"),
            FunctionSpec::Custom { name, .. } => write!(f, "{name}"),
        }
    }
}

/// Falling factorial `p(p-1)...(p-m+1)` and its derivative in `p`.
fn falling(p: f64, m: usize) -> (f64, f64) {
    let mut val = 1.0;
    let mut der = 0.0;
    for i in 0..m {
        let fac = p - i as f64;
        der = der * fac + val;
        val *= fac;
    }
    (val, der)
}

impl FunctionSpec {
    pub fn log() -> Self {
        FunctionSpec::PowerLog { c: 1.0, p: 0.0 }
    }

    pub fn power(p: f64) -> Self {
        FunctionSpec::Power { c: 1.0, p }
    }

    /// `exp(-a)`
    pub fn neg_exp() -> Self {
        FunctionSpec::Exp { c: 1.0, s: -1.0 }
    }

    pub fn needs_positive(&self) -> bool {
        match self {
            FunctionSpec::Power { p, .. } => p.fract() != 0.0 || *p < 0.0,
            FunctionSpec::PowerLog { .. } => true,
            _ => false,
        }
    }

    /// `f^{(m)}(a)`.
    pub fn derivative(&self, m: usize, a: f64) -> f64 {
        match self {
            FunctionSpec::Power { c, p } => {
                let (ff, _) = falling(*p, m);
                if ff == 0.0 {
                    0.0
                } else {
                    c * ff * a.powf(p - m as f64)
                }
            }
            FunctionSpec::PowerLog { c, p } => {
                let (ff, dff) = falling(*p, m);
                let base = a.powf(p - m as f64);
                c * base * (dff + ff * a.ln())
            }
            FunctionSpec::Exp { c, s } => c * s.powi(m as i32) * (s * a).exp(),
            FunctionSpec::Custom { deriv, .. } => deriv(m, a),
        }
    }

    pub fn value(&self, a: f64) -> f64 {
        self.derivative(0, a)
    }

    /// Half-width of an interval around `center` on which Taylor series converge fast.
    fn taylor_radius(&self, center: f64) -> f64 {
        match self {
            FunctionSpec::Power { p, .. } if p.fract() == 0.0 && *p >= 0.0 => f64::INFINITY,
            FunctionSpec::Power { .. } | FunctionSpec::PowerLog { .. } => center.abs(),
            FunctionSpec::Exp { s, .. } => {
                if *s == 0.0 {
                    f64::INFINITY
                } else {
                    8.0 / s.abs()
                }
            }
            FunctionSpec::Custom { radius, .. } => *radius,
        }
    }
}

/// The explicit `k/2`-th primitive of `a -> a^{-d/2}`.
pub fn fkd(k: u32, d: u32) -> FunctionSpec {
    let half_k = (k / 2) as i64;
    let sign = if half_k % 2 == 0 { 1.0 } else { -1.0 };
    let p = (k as f64 - d as f64) / 2.0;
    if d % 2 == 1 || k < d {
        let c = sign * gamma(d as f64 / 2.0 - k as f64 / 2.0) / gamma(d as f64 / 2.0);
        FunctionSpec::Power { c, p }
    } else {
        let hd = (d / 2) as i64;
        let s = if (hd - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let c = s / (factorial(hd - 1) * factorial(half_k - hd));
        FunctionSpec::PowerLog { c, p }
    }
}

fn factorial(n: i64) -> f64 {
    (1..=n).fold(1.0, |acc, j| acc * j as f64)
}

/// Gamma function at integers and half-integers (all that `fkd` needs).
pub fn gamma(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    assert!((2.0 * x - twice).abs() < 1e-12, "gamma only at half-integers");
    let n = twice as i64;
    if n % 2 == 0 {
        assert!(n > 0, "gamma pole");
        factorial(n / 2 - 1)
    } else {
        // Gamma(1/2) = sqrt(pi), shifted up or down with x Gamma(x) = Gamma(x+1)
        let mut g = std::f64::consts::PI.sqrt();
        let mut y = 0.5;
        while y < x - 0.25 {
            g *= y;
            y += 1.0;
        }
        while y > x + 0.25 {
            y -= 1.0;
            g /= y;
        }
        g
    }
}

const TAYLOR_FRACTION: f64 = 0.125;
const TAYLOR_TERMS: usize = 40;

/// `f^{[n]}(points)` with `n = points.len() - 1`, permutation symmetric and
/// continuous across coinciding points.
///
/// Clusters narrower than a fraction of the Taylor radius are expanded around
/// their mean; wider sets are split with the defining recursion on the two
/// extreme points so that every division is by a well-separated gap.
pub fn dd_eval(f: &FunctionSpec, points: &[f64]) -> Result<f64, DdError> {
    if points.is_empty() {
        return Err(DdError::Empty);
    }
    if f.needs_positive() {
        if let Some(&bad) = points.iter().find(|&&a| a <= 0.0 || !a.is_finite()) {
            return Err(DdError::Domain(bad));
        }
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(dd_sorted(f, &sorted))
}

fn dd_sorted(f: &FunctionSpec, pts: &[f64]) -> f64 {
    let n = pts.len() - 1;
    if n == 0 {
        return f.value(pts[0]);
    }
    let lo = pts[0];
    let hi = pts[n];
    let center = pts.iter().sum::<f64>() / pts.len() as f64;
    let spread = hi - lo;
    if spread <= TAYLOR_FRACTION * f.taylor_radius(center) {
        return taylor(f, pts, center);
    }
    let left = dd_sorted(f, &pts[..n]);
    let right = dd_sorted(f, &pts[1..]);
    (right - left) / spread
}

/// `sum_j f^{(n+j)}(c)/(n+j)! * h_j(points - c)`.
fn taylor(f: &FunctionSpec, pts: &[f64], c: f64) -> f64 {
    let n = pts.len() - 1;
    let y: Vec<f64> = pts.iter().map(|a| a - c).collect();
    // h[j] = complete homogeneous symmetric polynomial of degree j in y
    let mut h = vec![0.0; TAYLOR_TERMS];
    h[0] = 1.0;
    for &yr in &y {
        for j in 1..TAYLOR_TERMS {
            h[j] += yr * h[j - 1];
        }
    }
    let terms = if y.iter().all(|&v| v == 0.0) { 1 } else { TAYLOR_TERMS };
    let mut fact = factorial(n as i64);
    let mut sum = 0.0;
    for (j, hj) in h.iter().enumerate().take(terms) {
        if j > 0 {
            fact *= (n + j) as f64;
        }
        sum += f.derivative(n + j, c) / fact * hj;
    }
    sum
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let n = order;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Nodes `(t_0..t_n, weight)` of a product rule on the standard simplex
/// `{t >= 0, sum t = 1}` with total mass `1/n!`, via collapsed coordinates.
pub fn simplex_rule(n: usize, order: usize) -> Vec<(Vec<f64>, f64)> {
    let gl = gauss_legendre(order);
    let mut out = vec![(vec![], 1.0f64, 1.0f64)]; // (coords, weight, remaining mass)
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * gl.len());
        for (coords, w, rem) in &out {
            for &(u, wu) in &gl {
                let mut c = coords.clone();
                c.push(rem * u);
                // t = rem*u has Jacobian rem
                next.push((c, w * wu * rem, rem * (1.0 - u)));
            }
        }
        out = next;
    }
    out.into_iter()
        .map(|(mut c, w, rem)| {
            c.push(rem);
            (c, w)
        })
        .collect()
}

/// Hermite-Genocchi oracle: `int_{simplex} f^{(n)}(sum t_j a_j) dt`.
pub fn dd_quadrature(f: &FunctionSpec, points: &[f64], order: usize) -> Result<f64, DdError> {
    if points.is_empty() {
        return Err(DdError::Empty);
    }
    let n = points.len() - 1;
    let run = |q: usize| -> f64 {
        simplex_rule(n, q)
            .iter()
            .map(|(t, w)| {
                let a: f64 = t.iter().zip(points).map(|(t, a)| t * a).sum();
                w * f.derivative(n, a)
            })
            .sum()
    };
    let value = run(order);
    let check = run(order + 4);
    let estimate = (value - check).abs();
    if estimate > 1e-9 * check.abs().max(1e-300) && estimate > 1e-14 {
        return Err(DdError::NonConvergence { value: check, estimate });
    }
    Ok(check)
}

/// Exact divided differences of `a -> a^p` for integer `p` as a sum of
/// monomials `coeff * prod a_j^{e_j}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetricMonomialSum {
    pub terms: Vec<(Rational64, Vec<i32>)>,
}

impl SymmetricMonomialSum {
    pub fn eval(&self, points: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| {
                let c = *c.numer() as f64 / *c.denom() as f64;
                c * e.iter().zip(points).map(|(&e, &a)| a.powi(e)).product::<f64>()
            })
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Exponent vectors of length `len` with entries `>= 0` summing to `total`.
fn compositions(total: i32, len: usize) -> Vec<Vec<i32>> {
    if len == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, len - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// `(a^p)^{[n]}`: complete homogeneous polynomial of degree `p-n` for
/// `p >= n`, zero for `0 <= p < n`, and
/// `(-1)^n prod a_j^{-1} h_{q-1}(1/a_0,...,1/a_n)` for `p = -q < 0`.
pub fn dd_expand_power(p: i32, n: usize) -> SymmetricMonomialSum {
    let len = n + 1;
    if p >= 0 {
        if (p as usize) < n {
            return SymmetricMonomialSum { terms: Vec::new() };
        }
        let terms = compositions(p - n as i32, len).into_iter().map(|e| (Rational64::one(), e)).collect();
        return SymmetricMonomialSum { terms };
    }
    let q = -p;
    let sign = if n.is_multiple_of(2) { Rational64::one() } else { -Rational64::one() };
    let terms = compositions(q - 1, len)
        .into_iter()
        .map(|e| (sign, e.into_iter().map(|e| -1 - e).collect()))
        .collect();
    SymmetricMonomialSum { terms }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn square_first_difference() {
        let f = FunctionSpec::power(2.0);
        assert!(close(dd_eval(&f, &[1.5, 4.0]).unwrap(), 5.5, 1e-14));
    }

    #[test]
    fn inverse_second_difference() {
        let f = FunctionSpec::power(-1.0);
        let v = dd_eval(&f, &[1.0, 2.0, 5.0]).unwrap();
        assert!(close(v, 1.0 / 10.0, 1e-14));
    }

    #[test]
    fn fkd_constants() {
        let f = fkd(2, 2);
        assert!(close(f.value(3.0), 3.0f64.ln(), 1e-15));
        let f = fkd(0, 3);
        assert!(close(f.value(4.0), 0.125, 1e-15));
        // F_{2,d} = a^{1-d/2}/(1-d/2)
        let f = fkd(2, 3);
        assert!(close(f.value(4.0), -2.0 * 0.5, 1e-15));
        for (k, d) in [(2, 2), (4, 2), (4, 4), (6, 4), (2, 5), (4, 3), (2, 6)] {
            let f = fkd(k, d);
            for a in [0.3f64, 1.0, 2.7] {
                let want = a.powf(-(d as f64) / 2.0);
                assert!(close(f.derivative((k / 2) as usize, a), want, 1e-12), "k={k} d={d}");
            }
        }
    }

    #[test]
    fn gamma_values() {
        assert!(close(gamma(0.5), std::f64::consts::PI.sqrt(), 1e-15));
        assert!(close(gamma(-0.5), -2.0 * std::f64::consts::PI.sqrt(), 1e-15));
        assert!(close(gamma(3.0), 2.0, 1e-15));
    }

    #[test]
    fn exp_first_difference_at_zero() {
        let v = dd_quadrature(&FunctionSpec::neg_exp(), &[0.0, 0.0], 12).unwrap();
        assert!(close(v, -1.0, 1e-14));
    }

    #[test]
    fn constant_has_vanishing_differences() {
        let f = FunctionSpec::Power { c: 3.0, p: 0.0 };
        assert_eq!(dd_eval(&f, &[1.0, 2.0]).unwrap(), 0.0);
        assert!(dd_quadrature(&f, &[1.0, 2.0, 3.0], 8).unwrap().abs() < 1e-15);
    }

    #[test]
    fn power_expansion_examples() {
        let e = dd_expand_power(2, 1);
        assert_eq!(e.terms.len(), 2);
        assert!(close(e.eval(&[2.0, 3.0]), 5.0, 1e-15));
        assert!(dd_expand_power(1, 2).is_zero());
        let e = dd_expand_power(-1, 1);
        assert!(close(e.eval(&[2.0, 5.0]), -0.1, 1e-15));
    }

    #[test]
    fn domain_is_checked() {
        assert_eq!(dd_eval(&fkd(2, 2), &[1.0, -1.0]), Err(DdError::Domain(-1.0)));
    }
}
