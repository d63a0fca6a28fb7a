//! Verification suites with per-check deviations.
//!
//! Every check reports a nonnegative deviation and the tolerance it is held
//! to; `NaN` deviations fail.

use crate::config::RunConfig;
use crate::divdiff::{dd_eval, dd_expand_power, dd_quadrature, fkd, DdError, FunctionSpec};
use crate::evaluate::{eval_expression_torus, prefactor, EvalError, OpExpr, TorusBinding};
use crate::modular::{self, h0, k0, k0d};
use crate::recursion::local_invariant;
use crate::spectral::{check_commutator_identities, frobenius, moi_spectral, simplex_fm, CMat, MoiError, SpectralOperator};
use crate::torus::{build_p, cg_solve, fit_invariants, tau, FitResult, FourierElement, HeatSpectrum, TorusError, TruncatedRep};
use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown suite {0:?} (expected dd, moi, symbols, conjugation or heatfit)")]
    UnknownSuite(String),
    #[error("configuration lacks {0}")]
    Missing(&'static str),
    #[error(transparent)]
    Dd(#[from] DdError),
    #[error(transparent)]
    Moi(#[from] MoiError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Torus(#[from] TorusError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Dd,
    Moi,
    Symbols,
    Conjugation,
    Heatfit,
}

impl FromStr for Suite {
    type Err = VerifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "dd" => Suite::Dd,
            "moi" => Suite::Moi,
            "symbols" => Suite::Symbols,
            "conjugation" => Suite::Conjugation,
            "heatfit" => Suite::Heatfit,
            _ => return Err(VerifyError::UnknownSuite(s.to_string())),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Suite::Dd => "dd",
            Suite::Moi => "moi",
            Suite::Symbols => "symbols",
            Suite::Conjugation => "conjugation",
            Suite::Heatfit => "heatfit",
        };
        f.write_str(name)
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, deviation: f64, tolerance: f64) -> Self {
        Check { name: name.into(), deviation, tolerance }
    }

    pub fn passed(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub suite: Suite,
    pub checks: Vec<Check>,
    /// Informational `key=value` lines (fitted values, timings).
    pub notes: Vec<String>,
}

impl Report {
    fn new(suite: Suite) -> Self {
        Report { suite, checks: Vec::new(), notes: Vec::new() }
    }

    fn push(&mut self, name: impl Into<String>, deviation: f64, tolerance: f64) {
        self.checks.push(Check::new(name, deviation, tolerance));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tab-separated: `suite check deviation tolerance PASS|FAIL`, then notes
/// prefixed with `#`.
impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passed() { "PASS" } else { "FAIL" };
            writeln!(f, "{}\t{}\t{:.3e}\t{:.1e}\t{status}", self.suite, c.name, c.deviation, c.tolerance)?;
        }
        for n in &self.notes {
            writeln!(f, "# {n}")?;
        }
        Ok(())
    }
}

pub fn run(suite: Suite, cfg: &RunConfig) -> Result<Report, VerifyError> {
    match suite {
        Suite::Dd => dd_suite(cfg),
        Suite::Moi => moi_suite(cfg),
        Suite::Symbols => symbols_suite(cfg),
        Suite::Conjugation => conjugation_suite(cfg),
        Suite::Heatfit => heatfit_suite(cfg),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

fn dd_specs() -> Vec<FunctionSpec> {
    let mut specs = Vec::new();
    for d in [2, 3, 4, 6] {
        for k in [0, 2, 4] {
            specs.push(fkd(k, d));
        }
    }
    specs.push(FunctionSpec::neg_exp());
    specs.push(FunctionSpec::Exp { c: 2.0, s: 0.7 });
    specs
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|j| j as f64).product()
}

/// Hermite-Genocchi oracle at increasing orders until it converges.
fn quadrature(f: &FunctionSpec, pts: &[f64]) -> Result<f64, DdError> {
    let mut last = None;
    for order in [24, 32, 48] {
        match dd_quadrature(f, pts, order) {
            Ok(v) => return Ok(v),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one order"))
}

fn dd_suite(cfg: &RunConfig) -> Result<Report, VerifyError> {
    let tol = &cfg.tolerances;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rep = Report::new(Suite::Dd);
    let (mut quad, mut sym, mut conf) = (0.0f64, 0.0f64, 0.0f64);
    for f in dd_specs() {
        for n in 0..=4usize {
            for _ in 0..8 {
                let pts: Vec<f64> = (0..=n).map(|_| rng.gen_range(0.3..6.0)).collect();
                let v = dd_eval(&f, &pts)?;
                quad = quad.max(rel(v, quadrature(&f, &pts)?));
                for p in permutations(n + 1) {
                    let q: Vec<f64> = p.iter().map(|&i| pts[i]).collect();
                    sym = sym.max(rel(dd_eval(&f, &q)?, v));
                }
                // clustered points must approach the confluent value
                let a = pts[0];
                let want = f.derivative(n, a) / factorial(n);
                conf = conf.max(rel(dd_eval(&f, &vec![a; n + 1])?, want));
            }
        }
    }
    rep.push("quadrature_rel", quad, tol.dd_quadrature_rel);
    rep.push("permutation_symmetry_rel", sym, tol.dd_symmetry);
    rep.push("confluent_rel", conf, tol.dd_confluent);
    let mut expand = 0.0f64;
    for p in -4..=6 {
        for n in 0..=4usize {
            let poly = dd_expand_power(p, n);
            for _ in 0..6 {
                let pts: Vec<f64> = (0..=n).map(|_| rng.gen_range(0.3..3.0)).collect();
                let exact = poly.eval(&pts);
                let num = dd_eval(&FunctionSpec::power(p as f64), &pts)?;
                let scale = poly.terms.iter().map(|(c, e)| {
                    let c = *c.numer() as f64 / *c.denom() as f64;
                    (c * e.iter().zip(&pts).map(|(&e, &a)| a.powi(e)).product::<f64>()).abs()
                });
                let scale = scale.sum::<f64>().max(1e-300);
                expand = expand.max(if poly.is_zero() { num.abs() } else { (exact - num).abs() / scale });
            }
        }
    }
    rep.push("expand_power_rel", expand, tol.dd_expand);
    Ok(rep)
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> CMat {
    let a = Mat::from_fn(n, n, |_, _| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5 + if i == j { c64::new(shift, 0.0) } else { c64::new(0.0, 0.0) })
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    Mat::from_fn(n, n, |_, _| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn moi_suite(cfg: &RunConfig) -> Result<Report, VerifyError> {
    let tol = &cfg.tolerances;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rep = Report::new(Suite::Moi);
    for m in 1..=3usize {
        let mut worst = 0.0f64;
        for _ in 0..3 {
            let x = SpectralOperator::new(random_hermitian(&mut rng, 6, 3.0))?;
            let v: Vec<CMat> = (0..m).map(|_| random_matrix(&mut rng, 6)).collect();
            let xi2 = rng.gen_range(0.2..1.0);
            let quad = simplex_fm(xi2, &x, &v, 16)?;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let spec = crate::spectral::scale(&moi_spectral(&x.scaled(xi2), &FunctionSpec::neg_exp(), &v)?, c64::new(sign, 0.0));
            worst = worst.max(frobenius(&(&quad - &spec)) / frobenius(&spec));
        }
        rep.push(format!("simplex_vs_spectral_m{m}_rel"), worst, tol.moi_oracle_rel);
    }
    let mut worst = 0.0f64;
    for f in [fkd(2, 3), fkd(2, 2), fkd(4, 2), fkd(0, 4), FunctionSpec::neg_exp()] {
        for n in 1..=3usize {
            let x = SpectralOperator::new(random_hermitian(&mut rng, 6, 3.0))?;
            let y = random_matrix(&mut rng, 6);
            let v: Vec<CMat> = (0..n).map(|_| random_matrix(&mut rng, 6)).collect();
            worst = worst.max(check_commutator_identities(&x, &f, &y, &v)?);
        }
    }
    rep.push("commutator_identities", worst, tol.moi_commutator);
    Ok(rep)
}

/// 20 points, geometrically spaced in `[0.1, 10]`.
fn grid() -> Vec<f64> {
    (0..20).map(|i| 0.1 * 100f64.powf(i as f64 / 19.0)).collect()
}

fn symbols_suite(cfg: &RunConfig) -> Result<Report, VerifyError> {
    let tol = &cfg.tolerances;
    let mut rep = Report::new(Suite::Symbols);
    let g = grid();
    let (mut vanishing, mut phi_forms, mut psi_forms, mut fg) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for d in [2u32, 3, 4, 6] {
        let dd = d as f64;
        let f = fkd(2, d);
        for &a in &g {
            // measured against the size of its three summands
            let s1 = (dd + 2.0) * dd_eval(&f, &[1.0, 1.0, a])?;
            let s2 = 2.0 * a * dd_eval(&f, &[1.0, 1.0, a, a])?;
            let s3 = 4.0 * dd_eval(&f, &[1.0, 1.0, 1.0, a])?;
            let v = modular::vanishing_symbol(a, d)?;
            vanishing = vanishing.max(v.abs() / (s1.abs() + s2.abs() + s3.abs()));
        }
        for &a0 in &g {
            for &a1 in &g {
                // homogeneous of degree -d/2
                let scale = (a0 * a1).powf(-dd / 4.0);
                phi_forms = phi_forms.max((modular::phi(a0, a1, d)? - modular::phi_expanded(a0, a1, d)?).abs() / scale);
                let (l, r) = modular::fg_identity_sides(a0, a1, d)?;
                fg = fg.max((l - r).abs() / l.abs().max(r.abs()).max(1e-300).max((a0 * a1).powf(-1.0 - dd / 4.0)));
                for a1m in [0.37, 1.0, 4.1] {
                    // homogeneous of degree -1-d/2
                    let scale = (a0 * a1m * a1).powf(-(1.0 + dd / 2.0) / 3.0);
                    let dev = (modular::psi(a0, a1m, a1, d)? - modular::psi_expanded(a0, a1m, a1, d)?).abs() / scale;
                    psi_forms = psi_forms.max(dev);
                }
            }
        }
    }
    rep.push("vanishing_symbol", vanishing, tol.symbols_identity);
    rep.push("phi_forms_agree", phi_forms, tol.symbols_identity);
    rep.push("psi_forms_agree", psi_forms, tol.symbols_identity);
    rep.push("fg_identity", fg, tol.symbols_identity);

    let (mut phi_k0, mut psi_k0) = (0.0f64, 0.0f64);
    for &a0 in &g {
        for &a1 in &g {
            let scale = 1.0 / (a0 * a1).sqrt();
            phi_k0 = phi_k0.max((modular::phi(a0, a1, 2)? - modular::phi_k(k0, a0, a1)?).abs() / scale);
            for a1m in [0.37, 1.0, 4.1] {
                let scale = (a0 * a1m * a1).powf(-2.0 / 3.0);
                let dev = (modular::psi(a0, a1m, a1, 2)? - modular::psi_kh(k0, h0, a0, a1m, a1)?).abs() / scale;
                psi_k0 = psi_k0.max(dev);
            }
        }
    }
    rep.push("phi_equals_phi_k0_d2", phi_k0, tol.symbols_modular);
    rep.push("psi_equals_psi_k0h0_d2", psi_k0, tol.symbols_modular);

    let s_grid: Vec<f64> = (0..401).map(|i| -10.0 + 0.05 * i as f64).collect();
    let k04 = s_grid.iter().map(|&s| k0d(s, 4.0).abs()).fold(0.0, f64::max);
    rep.push("k0_4_vanishes", k04, tol.symbols_k04);
    let limit = s_grid.iter().map(|&s| (k0d(s, 2.0 + 1e-6) - k0(s)).abs()).fold(0.0, f64::max);
    rep.push("k0d_limit_d_to_2", limit, tol.symbols_k0_limit);
    let mut from_phi = 0.0f64;
    for d in [3u32, 4, 6] {
        for &s in &s_grid {
            if s == 0.0 {
                continue;
            }
            from_phi = from_phi.max((modular::k0d_from_phi(s, d)? - k0d(s, d as f64)).abs());
        }
    }
    rep.push("k0d_from_phi", from_phi, tol.symbols_modular);
    Ok(rep)
}

/// `I_k` of `lambda(x) Delta + sum lambda(a_i) D_i + lambda(a)` as Fourier
/// coefficients on `rep`, evaluated from the symbolic formula.
pub fn invariant_vector(k: u32, rep: &TruncatedRep, binding: &TorusBinding) -> Result<Vec<c64>, VerifyError> {
    let expr = local_invariant(k).expect("even order");
    let d = rep.d() as u32;
    let v = eval_expression_torus(&expr, d, rep, binding)?;
    let pre = prefactor(&expr, d);
    Ok(v.into_iter().map(|z| z * pre).collect())
}

pub struct ConjugationRun {
    pub truncation: usize,
    pub max_error: f64,
}

/// Interior errors of `I_2(y^{-1} x Delta y) - y^{-1} I_2(x Delta) y` per truncation.
pub fn conjugation_errors(cfg: &RunConfig) -> Result<Vec<ConjugationRun>, VerifyError> {
    let y = cfg.y.clone().ok_or(VerifyError::Missing("elements.y"))?;
    let d = cfg.d;
    let th = &cfg.theta;
    let x = FourierElement::constant(d, 2.0).add(&y).add(&y.mul(&y, th).scale(c64::new(0.25, 0.0)));
    let lap_y = (0..d).fold(FourierElement::zero(d), |acc, k| acc.add(&y.derivative(k).derivative(k)));
    let mut out = Vec::new();
    for &n in &cfg.conjugation.truncations {
        let rep = TruncatedRep::new(n, th.clone());
        let inv_y = OpExpr::solve(y.clone(), &rep);
        let mx = OpExpr::mult(x.clone(), &rep);
        let a_i: Vec<OpExpr> = (0..d)
            .map(|k| {
                let prod = OpExpr::Product(vec![inv_y.clone(), mx.clone(), OpExpr::mult(y.derivative(k), &rep)]);
                OpExpr::Scaled(c64::new(2.0, 0.0), Box::new(prod))
            })
            .collect();
        let a = OpExpr::Product(vec![inv_y.clone(), mx.clone(), OpExpr::mult(lap_y.clone(), &rep)]);
        let conjugated = TorusBinding { x: x.clone(), a: a_i, apot: a };
        let lhs = invariant_vector(2, &rep, &conjugated)?;
        let zero = FourierElement::zero(d);
        let plain = TorusBinding::from_elements(&x, &vec![zero.clone(); d], &zero, &rep);
        let z = invariant_vector(2, &rep, &plain)?;
        let zy = rep.right_mult_sparse(&y).apply(&z);
        let rhs = cg_solve(&rep.left_mult_sparse(&y), 0.0, &zy, crate::evaluate::CG_TOL)?;
        let interior = cfg.conjugation.interior as i32;
        let max_error = (0..rep.dim())
            .filter(|&i| rep.mode(i).iter().all(|v| v.abs() <= interior))
            .map(|i| (lhs[i] - rhs[i]).norm())
            .fold(0.0, f64::max);
        out.push(ConjugationRun { truncation: n, max_error });
    }
    Ok(out)
}

fn conjugation_suite(cfg: &RunConfig) -> Result<Report, VerifyError> {
    let mut rep = Report::new(Suite::Conjugation);
    let runs = conjugation_errors(cfg)?;
    for r in &runs {
        rep.notes.push(format!("N={} interior_max_error={:.3e}", r.truncation, r.max_error));
    }
    let last = runs.last().expect("nonempty truncation list");
    rep.push(format!("interior_error_N{}", last.truncation), last.max_error, cfg.tolerances.conjugation);
    // 0 when the errors decrease along the truncation list
    let growth = runs.windows(2).map(|w| (w[1].max_error - w[0].max_error).max(0.0)).fold(0.0, f64::max);
    rep.push("monotone_in_N", growth, 0.0);
    Ok(rep)
}

/// `(t, Tr(lambda(y) e^{-tP}))` on the configured grid at truncation `n`,
/// together with `||P - P^*|| / ||P||` of the compressed operator.
pub fn heat_samples(cfg: &RunConfig, n: usize) -> Result<(Vec<(f64, c64)>, f64), VerifyError> {
    let x = cfg.x.clone().ok_or(VerifyError::Missing("elements.x"))?;
    let a_vec = cfg.first_order(&x);
    let a = cfg.a.clone().unwrap_or_else(|| FourierElement::zero(cfg.d));
    let rep = TruncatedRep::new(n, cfg.theta.clone());
    let p = build_p(&x, &a_vec, &a, &rep)?;
    let spec = HeatSpectrum::new(&p, cfg.y.as_ref(), &rep)?;
    drop(p);
    Ok((cfg.heat.times().into_iter().map(|t| (t, spec.trace(t))).collect(), spec.asymmetry))
}

pub fn fit_samples(cfg: &RunConfig, samples: &[(f64, c64)]) -> Result<FitResult, VerifyError> {
    let real: Vec<(f64, f64)> = samples.iter().map(|(t, z)| (*t, z.re)).collect();
    Ok(fit_invariants(&real, cfg.d, &cfg.heat.orders)?)
}

/// `tau(y I_0)` and `tau(y I_2)` from the symbolic formula.
pub fn expected_heat_coefficients(cfg: &RunConfig) -> Result<[f64; 2], VerifyError> {
    let x = cfg.x.clone().ok_or(VerifyError::Missing("elements.x"))?;
    let a_vec = cfg.first_order(&x);
    let a = cfg.a.clone().unwrap_or_else(|| FourierElement::zero(cfg.d));
    let rep = TruncatedRep::new(cfg.eval_truncation, cfg.theta.clone());
    let binding = TorusBinding::from_elements(&x, &a_vec, &a, &rep);
    let y = cfg.y.clone().unwrap_or_else(|| FourierElement::constant(cfg.d, 1.0));
    let mut out = [0.0; 2];
    for (slot, k) in [0u32, 2].into_iter().enumerate() {
        let ik = rep.to_element(&invariant_vector(k, &rep, &binding)?);
        out[slot] = tau(&y.mul(&ik, &cfg.theta)).re;
    }
    Ok(out)
}

fn heatfit_suite(cfg: &RunConfig) -> Result<Report, VerifyError> {
    let tol = &cfg.tolerances;
    let mut rep = Report::new(Suite::Heatfit);
    let pos = |k: u32| cfg.heat.orders.iter().position(|&o| o == k);
    let (Some(i0), Some(i2)) = (pos(0), pos(2)) else {
        return Err(VerifyError::Missing("heat.orders containing 0 and 2"));
    };
    let expected = expected_heat_coefficients(cfg)?;
    let (samples, asym) = heat_samples(cfg, cfg.truncation)?;
    rep.push("p_symmetric", asym, 1e-12);
    let fit = fit_samples(cfg, &samples)?;
    let c = [fit.coefficients[i0], fit.coefficients[i2]];
    rep.notes.push(format!(
        "N={} fit c0={:.8} c1={:.8} expected c0={:.8} c1={:.8} residual_rms={:.2e} condition={:.2e}",
        cfg.truncation, c[0], c[1], expected[0], expected[1], fit.residual_rms, fit.condition
    ));
    let tols = [tol.heat_c0_rel, tol.heat_c1_rel];
    for j in 0..2 {
        rep.push(format!("c{j}_rel"), rel(c[j], expected[j]), tols[j]);
    }
    if let Some(n2) = cfg.check_truncation {
        let (s2, _) = heat_samples(cfg, n2)?;
        let fit2 = fit_samples(cfg, &s2)?;
        let c2 = [fit2.coefficients[i0], fit2.coefficients[i2]];
        rep.notes.push(format!("N={n2} fit c0={:.8} c1={:.8}", c2[0], c2[1]));
        for j in 0..2 {
            let moved = (c[j] - c2[j]).abs() / expected[j].abs().max(1e-300);
            rep.push(format!("c{j}_truncation_shift"), moved, tols[j] / 2.0);
        }
    }
    if let Some((cx, mu)) = constant_coefficients(cfg) {
        let d = cfg.d as f64;
        let base = (PI / cx).powf(d / 2.0);
        rep.push("c0_closed_form_rel", rel(c[0], base), tol.heat_control_rel);
        rep.push("c1_closed_form_rel", rel(c[1], -mu * base), tol.heat_control_rel);
    }
    Ok(rep)
}

/// `(c, mu)` when `x = c`, `a = mu`, `a_i = 0` and `y = 1`.
fn constant_coefficients(cfg: &RunConfig) -> Option<(f64, f64)> {
    let x = cfg.x.as_ref()?;
    let origin = vec![0; cfg.d];
    let is_const = |e: &FourierElement| e.modes().all(|(n, c)| *n == origin || c.norm() == 0.0) && e.coeff(&origin).im == 0.0;
    if !is_const(x) || cfg.y.is_some() {
        return None;
    }
    if !cfg.first_order(x).iter().all(|ai| ai.modes().all(|(_, c)| c.norm() == 0.0)) {
        return None;
    }
    let mu = match &cfg.a {
        None => 0.0,
        Some(a) if is_const(a) => a.coeff(&origin).re,
        Some(_) => return None,
    };
    Some((x.coeff(&origin).re, mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in ["dd", "moi", "symbols", "conjugation", "heatfit"] {
            assert_eq!(s.parse::<Suite>().unwrap().to_string(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn nan_deviation_fails() {
        assert!(!Check::new("x", f64::NAN, 1.0).passed());
        assert!(Check::new("x", 0.0, 0.0).passed());
    }

    #[test]
    fn constant_control_small_truncation() {
        let cfg = RunConfig::parse(
            r#"
            [torus]
            truncation = 24
            eval_truncation = 2
            [elements]
            x = [{ n = [0, 0], re = 1.5 }]
            a = [{ n = [0, 0], re = 0.1 }]
            "#,
        )
        .unwrap();
        let r = run(Suite::Heatfit, &cfg).unwrap();
        assert!(r.passed(), "{r}");
    }
}
