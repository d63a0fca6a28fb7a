//! Closed-form second order symbols for conformally perturbed Laplacians and
//! their modular counterparts `K_0`, `H_0`, `K_0^d`.

use crate::divdiff::{dd_eval, fkd, DdError, FunctionSpec};
use crate::spectral::{moi_symbol, CMat, MoiError, SpectralOperator};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::io::{self, Write};

/// Below this distance to a removable singularity the contour mean is used.
const NEAR: f64 = 0.5;
const CONTOUR_POINTS: usize = 96;

/// Mean of an analytic function over a circle in the complex `u`-plane:
/// equals its value at the centre, including removable singularities inside.
fn contour_mean(f: impl Fn(Complex64) -> Complex64, radius: f64) -> f64 {
    let mut sum = 0.0;
    for j in 0..CONTOUR_POINTS {
        let phi = 2.0 * PI * (j as f64 + 0.5) / CONTOUR_POINTS as f64;
        sum += f(Complex64::from_polar(radius, phi)).re;
    }
    sum / CONTOUR_POINTS as f64
}

/// Radius in `[1, 1.5]` keeping distance from the given real points.
fn safe_radius(avoid: &[f64]) -> f64 {
    let mut best = (1.0, -1.0);
    for r in [1.0, 1.1, 1.2, 1.3, 1.4, 1.5] {
        let gap = avoid.iter().map(|a| (a.abs() - r).abs()).fold(f64::INFINITY, f64::min);
        if gap > best.1 {
            best = (r, gap);
        }
    }
    best.0
}

fn coth(z: Complex64) -> Complex64 {
    z.cosh() / z.sinh()
}

fn k0_c(s: Complex64) -> Complex64 {
    (s * coth(s / 2.0) - 2.0) / (s * (s / 2.0).sinh())
}

fn h0_c(s: Complex64, t: Complex64) -> Complex64 {
    let u = s + t;
    let num = t * u * s.cosh() - s * u * t.cosh() + (s - t) * (u + s.sinh() + t.sinh() - u.sinh());
    let sh = (u / 2.0).sinh();
    num / (s * t * u * (s / 2.0).sinh() * (t / 2.0).sinh() * sh * sh)
}

/// `(e^{cs} - 1)/c`, continuous at `c = 0`.
fn expm1_over(c: f64, s: Complex64) -> Complex64 {
    if c == 0.0 {
        s
    } else {
        ((s * c).exp() - 1.0) / c
    }
}

fn k0d_c(s: Complex64, d: f64) -> Complex64 {
    let c = 1.0 - d / 2.0;
    let e = (s * c).exp();
    (-1.0 - e + expm1_over(c, s) * coth(s / 2.0)) / (s * (s / 2.0).sinh()) * (2.0 / d)
}

/// `K_0(s) = (-2 + s coth(s/2)) / (s sinh(s/2))`, `K_0(0) = 1/3`.
pub fn k0(s: f64) -> f64 {
    if s.abs() < NEAR {
        return contour_mean(|u| k0_c(u + s), 1.0);
    }
    k0_c(Complex64::new(s, 0.0)).re
}

/// `K_0^d(s)`; `d <= 2` is outside the range where the formula was derived and
/// is reported by [`is_extrapolated`].
pub fn k0d(s: f64, d: f64) -> f64 {
    if s.abs() < NEAR {
        return contour_mean(|u| k0d_c(u + s, d), 1.0);
    }
    k0d_c(Complex64::new(s, 0.0), d).re
}

pub fn is_extrapolated(d: f64) -> bool {
    d <= 2.0
}

pub fn h0(s: f64, t: f64) -> f64 {
    if s.abs() < NEAR || t.abs() < NEAR || (s + t).abs() < NEAR {
        // move along (1,1): removable lines sit at u = -s, -t, -(s+t)/2
        let r = safe_radius(&[s, t, (s + t) / 2.0]);
        return contour_mean(|u| h0_c(u + s, u + t), r);
    }
    h0_c(Complex64::new(s, 0.0), Complex64::new(t, 0.0)).re
}

fn f2(d: u32) -> FunctionSpec {
    fkd(2, d)
}

fn check_positive(args: &[f64]) -> Result<(), DdError> {
    match args.iter().find(|&&a| a <= 0.0 || !a.is_finite()) {
        Some(&a) => Err(DdError::Domain(a)),
        None => Ok(()),
    }
}

/// `Phi(a0,a1) = 2 sqrt(a0 a1)/d * (a0 F^{[2]}(a0,a0,a1) - a1 F^{[2]}(a0,a1,a1))/(a1-a0)`.
///
/// Near the diagonal the quotient is rewritten with the Leibniz rule as
/// `-(a0 F^{[3]}(a0,a0,a1,a1) + F^{[2]}(a0,a1,a1))`.
pub fn phi(a0: f64, a1: f64, d: u32) -> Result<f64, DdError> {
    check_positive(&[a0, a1])?;
    let f = f2(d);
    let pre = 2.0 * (a0 * a1).sqrt() / d as f64;
    let q = if (a1 - a0).abs() > 1e-2 * a0.max(a1) {
        (a0 * dd_eval(&f, &[a0, a0, a1])? - a1 * dd_eval(&f, &[a0, a1, a1])?) / (a1 - a0)
    } else {
        -(a0 * dd_eval(&f, &[a0, a0, a1, a1])? + dd_eval(&f, &[a0, a1, a1])?)
    };
    Ok(pre * q)
}

/// `Phi` in the unsimplified form `(a1/a0)^{1/2} (a0 F^{[2]}(a0,a0,a1) + (4/d) a0^2 F^{[3]}(a0,a0,a0,a1))`.
pub fn phi_expanded(a0: f64, a1: f64, d: u32) -> Result<f64, DdError> {
    check_positive(&[a0, a1])?;
    let f = f2(d);
    let dd = d as f64;
    Ok((a1 / a0).sqrt() * (a0 * dd_eval(&f, &[a0, a0, a1])? + 4.0 / dd * a0 * a0 * dd_eval(&f, &[a0, a0, a0, a1])?))
}

/// `g^{[3]}` for `g(a) = F(a) + F^{[1]}(1,a)`, using `(F^{[1]}(1,.))^{[n]} = F^{[n+1]}(1,.)`.
fn g3(f: &FunctionSpec, pts: &[f64; 4]) -> Result<f64, DdError> {
    let mut with_one = vec![1.0];
    with_one.extend_from_slice(pts);
    Ok(dd_eval(f, pts)? + dd_eval(f, &with_one)?)
}

/// `Psi(a0,a1,a2) = -(4/d) (a0 a2)^{1/2} / a1^{2+d/2} g^{[3]}(b0,b0,b2,b2)` with `b_j = a_j/a1`.
pub fn psi(a0: f64, a1: f64, a2: f64, d: u32) -> Result<f64, DdError> {
    check_positive(&[a0, a1, a2])?;
    let f = f2(d);
    let dd = d as f64;
    let (b0, b2) = (a0 / a1, a2 / a1);
    Ok(-4.0 / dd * (a0 * a2).sqrt() / a1.powf(2.0 + dd / 2.0) * g3(&f, &[b0, b0, b2, b2])?)
}

/// `Psi` before simplification:
/// `(a2/a0)^{1/2} ((4/d) a0 a1 F^{[4]}(a0,a0,a1,a1,a2) + (2+4/d) a0 F^{[3]}(a0,a0,a1,a2)
///  + (8/d) a0^2 F^{[4]}(a0,a0,a0,a1,a2))`.
pub fn psi_expanded(a0: f64, a1: f64, a2: f64, d: u32) -> Result<f64, DdError> {
    check_positive(&[a0, a1, a2])?;
    let f = f2(d);
    let dd = d as f64;
    let t1 = 4.0 / dd * a0 * a1 * dd_eval(&f, &[a0, a0, a1, a1, a2])?;
    let t2 = (2.0 + 4.0 / dd) * a0 * dd_eval(&f, &[a0, a0, a1, a2])?;
    let t3 = 8.0 / dd * a0 * a0 * dd_eval(&f, &[a0, a0, a0, a1, a2])?;
    Ok((a2 / a0).sqrt() * (t1 + t2 + t3))
}

/// `(d+2) F^{[2]}(1,1,a) + 2a F^{[3]}(1,1,a,a) + 4 F^{[3]}(1,1,1,a)`, identically zero.
pub fn vanishing_symbol(a: f64, d: u32) -> Result<f64, DdError> {
    let f = f2(d);
    let dd = d as f64;
    Ok((dd + 2.0) * dd_eval(&f, &[1.0, 1.0, a])?
        + 2.0 * a * dd_eval(&f, &[1.0, 1.0, a, a])?
        + 4.0 * dd_eval(&f, &[1.0, 1.0, 1.0, a])?)
}

/// Both sides of `f^{[2]}(a,a,b) + 2 g^{[3]}(a,a,a,b) = -g^{[3]}(a,a,b,b)` for
/// `f(a) = F^{[2]}(1,1,a) + (d/2-1) F^{[1]}(1,a)` and `g` as in [`psi`].
pub fn fg_identity_sides(a: f64, b: f64, d: u32) -> Result<(f64, f64), DdError> {
    let f = f2(d);
    let c = d as f64 / 2.0 - 1.0;
    let f_dd = dd_eval(&f, &[1.0, 1.0, a, a, b])? + c * dd_eval(&f, &[1.0, a, a, b])?;
    let lhs = f_dd + 2.0 * g3(&f, &[a, a, a, b])?;
    let rhs = -g3(&f, &[a, a, b, b])?;
    Ok((lhs, rhs))
}

fn log_dd(pts: &[f64]) -> Result<f64, DdError> {
    dd_eval(&FunctionSpec::log(), pts)
}

/// `Phi_K(a0,a1) = K(log(a1/a0)) log^{[1]}(a0,a1) / 2`.
pub fn phi_k(k: impl Fn(f64) -> f64, a0: f64, a1: f64) -> Result<f64, DdError> {
    Ok(0.5 * k((a1 / a0).ln()) * log_dd(&[a0, a1])?)
}

/// `Psi_{K,H}(a0,a1,a2) = K(log(a2/a0)) log^{[2]}(a0,a1,a2)
///  + H(log(a1/a0), log(a2/a1)) log^{[1]}(a0,a1) log^{[1]}(a1,a2) / 4`.
pub fn psi_kh(k: impl Fn(f64) -> f64, h: impl Fn(f64, f64) -> f64, a0: f64, a1: f64, a2: f64) -> Result<f64, DdError> {
    Ok(k((a2 / a0).ln()) * log_dd(&[a0, a1, a2])?
        + 0.25 * h((a1 / a0).ln(), (a2 / a1).ln()) * log_dd(&[a0, a1])? * log_dd(&[a1, a2])?)
}

/// `K_0^d(log a)` recovered from `Phi`: `2 Phi(1,a) / log^{[1]}(1,a)`.
pub fn k0d_from_phi(s: f64, d: u32) -> Result<f64, DdError> {
    let a = s.exp();
    Ok(2.0 * phi(1.0, a, d)? / log_dd(&[1.0, a])?)
}

/// `K(nabla)(V) = T^x_{K(log(a1/a0))}(V)`.
pub fn modular_apply(k: impl Fn(f64) -> f64 + Sync, x: &SpectralOperator, v: &CMat) -> Result<CMat, MoiError> {
    positive(x)?;
    moi_symbol(x, |p: &[f64]| k((p[1] / p[0]).ln()), std::slice::from_ref(v))
}

/// `H(nabla_1, nabla_2)(V1, V2) = T^x_{H(log(a1/a0), log(a2/a1))}(V1, V2)`.
pub fn modular_apply2(
    h: impl Fn(f64, f64) -> f64 + Sync,
    x: &SpectralOperator,
    v1: &CMat,
    v2: &CMat,
) -> Result<CMat, MoiError> {
    positive(x)?;
    moi_symbol(x, |p: &[f64]| h((p[1] / p[0]).ln(), (p[2] / p[1]).ln()), &[v1.clone(), v2.clone()])
}

fn positive(x: &SpectralOperator) -> Result<(), MoiError> {
    if x.min_eigenvalue() <= 0.0 {
        return Err(MoiError::NonPositive(x.min_eigenvalue()));
    }
    Ok(())
}

pub const FIGURE_DIMENSIONS: [f64; 6] = [0.01, 1.0, 2.01, 3.0, 4.0, 5.0];

/// Rows `d,s,k0d,extrapolated` on `points` equispaced `s` in `[-smax, smax]`.
pub fn write_k0d_grid<W: Write>(mut out: W, dims: &[f64], smax: f64, points: usize) -> io::Result<()> {
    writeln!(out, "d,s,k0d,extrapolated")?;
    for &d in dims {
        for i in 0..points {
            let s = -smax + 2.0 * smax * i as f64 / (points - 1).max(1) as f64;
            writeln!(out, "{d},{s},{:.15e},{}", k0d(s, d), is_extrapolated(d))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k0_at_zero() {
        assert!((k0(0.0) - 1.0 / 3.0).abs() < 1e-14);
        assert!((k0(0.49) - k0_c(Complex64::new(0.49, 0.0)).re).abs() < 1e-12);
    }

    #[test]
    fn symmetry_of_modular_functions() {
        for s in [-3.0, -0.2, 0.0, 0.7, 4.0] {
            assert!((k0(s) - k0(-s)).abs() < 1e-14);
            for t in [-2.5, -0.1, 0.0, 1.3] {
                // the displayed H0 is odd under s <-> t
                assert!((h0(s, t) + h0(t, s)).abs() < 1e-10 * h0(s, t).abs().max(1.0));
                assert!(h0(s, t).is_finite());
            }
        }
    }

    #[test]
    fn h0_continuous_across_singular_lines() {
        for (s, t) in [(0.0, 1.7), (1.2, -1.2), (0.0, 0.0), (-2.0, 0.0)] {
            let near = h0_c(Complex64::new(s + 0.51, 0.0), Complex64::new(t + 0.49, 0.0)).re;
            let at = h0(s + 0.51, t + 0.49);
            assert!((near - at).abs() < 1e-12, "{s} {t}");
        }
    }

    #[test]
    fn k0d_four_vanishes() {
        for s in [-5.0, -0.3, 0.0, 0.2, 3.0] {
            assert!(k0d(s, 4.0).abs() < 1e-13);
        }
    }

    #[test]
    fn phi_homogeneity() {
        for d in [2, 3, 5] {
            let (a0, a1, l) = (0.7, 2.9, 3.3);
            let lhs = phi(l * a0, l * a1, d).unwrap();
            let rhs = l.powf(-(d as f64) / 2.0) * phi(a0, a1, d).unwrap();
            assert!((lhs - rhs).abs() < 1e-13 * rhs.abs());
        }
    }

    #[test]
    fn phi_confluent_branch_is_continuous() {
        let a = phi(1.0, 1.01 + 1e-12, 3).unwrap();
        let b = phi(1.0, 1.01 - 1e-12, 3).unwrap();
        assert!((a - b).abs() < 1e-11, "{a} {b}");
    }

    #[test]
    fn power_symbol_conjugates() {
        let x = SpectralOperator::from_real_diagonal(&[0.5, 2.0, 3.0]).unwrap();
        let v = crate::spectral::identity(3);
        let out = modular_apply(|s| (0.5 * s).exp(), &x, &v).unwrap();
        assert!((out[(1, 1)].re - 1.0).abs() < 1e-14);
        let w = faer::Mat::from_fn(3, 3, |i, j| faer::c64::new((i + 2 * j) as f64, 1.0));
        let out = modular_apply(|s| (0.5 * s).exp(), &x, &w).unwrap();
        let l = [0.5f64, 2.0, 3.0];
        for i in 0..3 {
            for j in 0..3 {
                let want = w[(i, j)] * (l[j] / l[i]).sqrt();
                assert!((out[(i, j)] - want).norm() < 1e-12);
            }
        }
    }
}
