//! Numeric realization of symbolic MOI expressions.
//!
//! Abstract indices are expanded into concrete assignments in `0..d`. The
//! resulting terms are evaluated either densely with [`moi_spectral`] or, for
//! large torus truncations, through resolvent integrals
//! `f^{[n]}(a_0..a_n) = (-1)^n int_0^inf w(s) prod_j (a_j + s)^{-1} ds`
//! applied to a single vector with conjugate gradients.

use crate::divdiff::{fkd, FunctionSpec};
use crate::spectral::{moi_spectral, CMat, MoiError, SpectralOperator};
use crate::term::{substitute_dimension, Atom, Generator, MoiExpression};
use crate::torus::{cg_solve, FourierElement, SparseMatrix, TorusError, TruncatedRep};
use faer::c64;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no binding for {0}")]
    Unbound(String),
    #[error("index {index} out of range for dimension {d}")]
    IndexRange { index: usize, d: usize },
    #[error("invalid dimension: {0}")]
    Dimension(String),
    #[error("symbol {0:?} has no resolvent representation")]
    Unsupported(FunctionSpec),
    #[error(transparent)]
    Moi(#[from] MoiError),
    #[error(transparent)]
    Torus(#[from] TorusError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConcreteGenerator {
    X,
    A(usize),
    Apot,
}

/// `D_{j_1} ... D_{j_r} g` with concrete 0-based indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConcreteAtom {
    pub generator: ConcreteGenerator,
    pub derivs: Vec<usize>,
}

/// `(-1)^{k/2} pi^{d/2}`: the factor turning the expression sum into `I_k`.
pub fn prefactor(expr: &MoiExpression, d: u32) -> f64 {
    expr.sign as f64 * PI.powf(d as f64 / 2.0)
}

/// All concrete terms of `expr` at dimension `d`, with coefficients evaluated.
pub fn concrete_terms(expr: &MoiExpression, d: u32) -> Result<Vec<(f64, Vec<ConcreteAtom>)>, EvalError> {
    let subst = substitute_dimension(expr, d as i64).map_err(EvalError::Dimension)?;
    let mut out: BTreeMap<Vec<ConcreteAtom>, f64> = BTreeMap::new();
    for (args, q) in subst {
        let labels = args
            .iter()
            .flat_map(|a| {
                let g = match a.generator {
                    Generator::A(l) => Some(l),
                    _ => None,
                };
                g.into_iter().chain(a.derivs.iter().copied())
            })
            .max()
            .map_or(0, |m| m as usize + 1);
        let coeff = q.to_f64().unwrap_or(f64::NAN);
        let total = (d as usize).pow(labels as u32);
        for code in 0..total {
            let mut assign = vec![0usize; labels];
            let mut c = code;
            for slot in assign.iter_mut() {
                *slot = c % d as usize;
                c /= d as usize;
            }
            let atoms: Vec<ConcreteAtom> = args.iter().map(|a| concretize(a, &assign)).collect();
            *out.entry(atoms).or_insert(0.0) += coeff;
        }
    }
    Ok(out.into_iter().map(|(a, c)| (c, a)).collect())
}

fn concretize(atom: &Atom, assign: &[usize]) -> ConcreteAtom {
    let generator = match atom.generator {
        Generator::X => ConcreteGenerator::X,
        Generator::A(l) => ConcreteGenerator::A(assign[l as usize]),
        Generator::Apot => ConcreteGenerator::Apot,
    };
    let mut derivs: Vec<usize> = atom.derivs.iter().map(|&l| assign[l as usize]).collect();
    derivs.sort_unstable();
    ConcreteAtom { generator, derivs }
}

/// Dense evaluation of the expression sum
/// `sum coeff(d) T^x_{F_{k,d}^{[m]}}(atoms)` (without [`prefactor`]).
pub fn eval_expression<R>(expr: &MoiExpression, d: u32, x: &SpectralOperator, realize: R) -> Result<CMat, EvalError>
where
    R: Fn(&ConcreteAtom) -> Result<CMat, EvalError>,
{
    let f = fkd(expr.k, d);
    let n = x.dim();
    let mut cache: HashMap<ConcreteAtom, CMat> = HashMap::new();
    let mut acc = CMat::zeros(n, n);
    for (coeff, atoms) in concrete_terms(expr, d)? {
        let mut mats = Vec::with_capacity(atoms.len());
        for a in &atoms {
            if !cache.contains_key(a) {
                let m = realize(a)?;
                if m.nrows() != n || m.ncols() != n {
                    return Err(MoiError::Dimension { expected: n, rows: m.nrows(), cols: m.ncols() }.into());
                }
                cache.insert(a.clone(), m);
            }
            mats.push(cache[a].clone());
        }
        let t = moi_spectral(x, &f, &mats)?;
        acc += crate::spectral::scale(&t, c64::new(coeff, 0.0));
    }
    Ok(acc)
}

/// Dense realization of atoms from Fourier data on a truncation.
pub fn torus_dense_realizer<'a>(
    rep: &'a TruncatedRep,
    x: &'a FourierElement,
    a_vec: &'a [FourierElement],
    a: &'a FourierElement,
) -> impl Fn(&ConcreteAtom) -> Result<CMat, EvalError> + 'a {
    move |atom| {
        let mut e = match atom.generator {
            ConcreteGenerator::X => x.clone(),
            ConcreteGenerator::A(i) => a_vec.get(i).cloned().ok_or(EvalError::IndexRange { index: i, d: a_vec.len() })?,
            ConcreteGenerator::Apot => a.clone(),
        };
        for &k in &atom.derivs {
            if k >= rep.d() {
                return Err(EvalError::IndexRange { index: k, d: rep.d() });
            }
            e = e.derivative(k);
        }
        Ok(rep.left_mult_matrix(&e))
    }
}

/// Operator on a truncation built from left multiplications and inverses.
#[derive(Clone, Debug)]
pub enum OpExpr {
    Mult { elem: FourierElement, mat: Arc<SparseMatrix> },
    /// Inverse of the compressed left multiplication by a positive element.
    Solve { elem: FourierElement, mat: Arc<SparseMatrix> },
    Scaled(c64, Box<OpExpr>),
    /// Composition; the last factor acts first.
    Product(Vec<OpExpr>),
    Sum(Vec<OpExpr>),
}

pub const CG_TOL: f64 = 1e-13;

impl OpExpr {
    pub fn mult(elem: FourierElement, rep: &TruncatedRep) -> Self {
        let mat = Arc::new(rep.left_mult_sparse(&elem));
        OpExpr::Mult { elem, mat }
    }

    pub fn solve(elem: FourierElement, rep: &TruncatedRep) -> Self {
        let mat = Arc::new(rep.left_mult_sparse(&elem));
        OpExpr::Solve { elem, mat }
    }

    pub fn apply(&self, v: &[c64]) -> Result<Vec<c64>, TorusError> {
        match self {
            OpExpr::Mult { mat, .. } => Ok(mat.apply(v)),
            OpExpr::Solve { mat, .. } => cg_solve(mat, 0.0, v, CG_TOL),
            OpExpr::Scaled(s, inner) => Ok(inner.apply(v)?.into_iter().map(|z| z * s).collect()),
            OpExpr::Product(factors) => {
                let mut u = v.to_vec();
                for f in factors.iter().rev() {
                    u = f.apply(&u)?;
                }
                Ok(u)
            }
            OpExpr::Sum(parts) => {
                let mut acc = vec![c64::new(0.0, 0.0); v.len()];
                for p in parts {
                    for (a, b) in acc.iter_mut().zip(p.apply(v)?) {
                        *a += b;
                    }
                }
                Ok(acc)
            }
        }
    }

    /// Commutator with `D_k`, by the Leibniz rule.
    pub fn derivative(&self, k: usize, rep: &TruncatedRep) -> Self {
        match self {
            OpExpr::Mult { elem, .. } => OpExpr::mult(elem.derivative(k), rep),
            OpExpr::Solve { elem, .. } => OpExpr::Scaled(
                c64::new(-1.0, 0.0),
                Box::new(OpExpr::Product(vec![self.clone(), OpExpr::mult(elem.derivative(k), rep), self.clone()])),
            ),
            OpExpr::Scaled(s, inner) => OpExpr::Scaled(*s, Box::new(inner.derivative(k, rep))),
            OpExpr::Product(factors) => OpExpr::Sum(
                (0..factors.len())
                    .map(|j| {
                        let mut f = factors.clone();
                        f[j] = factors[j].derivative(k, rep);
                        OpExpr::Product(f)
                    })
                    .collect(),
            ),
            OpExpr::Sum(parts) => OpExpr::Sum(parts.iter().map(|p| p.derivative(k, rep)).collect()),
        }
    }
}

/// Generators realized as operators on a truncation; `x` must be self-adjoint
/// with positive truncated spectrum.
pub struct TorusBinding {
    pub x: FourierElement,
    pub a: Vec<OpExpr>,
    pub apot: OpExpr,
}

impl TorusBinding {
    /// Multiplication operators for Fourier data.
    pub fn from_elements(x: &FourierElement, a_vec: &[FourierElement], a: &FourierElement, rep: &TruncatedRep) -> Self {
        TorusBinding {
            x: x.clone(),
            a: a_vec.iter().map(|ai| OpExpr::mult(ai.clone(), rep)).collect(),
            apot: OpExpr::mult(a.clone(), rep),
        }
    }

    fn realize(&self, atom: &ConcreteAtom, rep: &TruncatedRep) -> Result<OpExpr, EvalError> {
        let mut op = match atom.generator {
            ConcreteGenerator::X => OpExpr::mult(self.x.clone(), rep),
            ConcreteGenerator::A(i) => self.a.get(i).cloned().ok_or(EvalError::IndexRange { index: i, d: self.a.len() })?,
            ConcreteGenerator::Apot => self.apot.clone(),
        };
        for &k in &atom.derivs {
            if k >= rep.d() {
                return Err(EvalError::IndexRange { index: k, d: rep.d() });
            }
            op = op.derivative(k, rep);
        }
        Ok(op)
    }
}

#[derive(Clone, Copy, Debug)]
enum Kernel {
    /// `c log`: weight `-c`.
    Log(f64),
    /// `c a^p`, `-1 < p < 0`: weight `c sin(-p pi)/pi s^p`.
    Power(f64, f64),
    /// `c a^{-1}`: point mass at `s = 0`.
    Inverse(f64),
}

/// Resolvent-quadrature evaluation of `T^x_{f^{[n]}}(B_1..B_n) v` on a truncation.
pub struct ResolventEvaluator {
    lx: SparseMatrix,
    kernel: Kernel,
    nodes: Vec<(f64, f64)>,
}

/// Trapezoid step in `u = log s`; the integrand is analytic in a strip of
/// half-width `pi`, so the discretization error is about `exp(-2 pi^2 / h)`.
const STEP: f64 = 0.5;

impl ResolventEvaluator {
    pub fn new(x: &FourierElement, f: &FunctionSpec, rep: &TruncatedRep) -> Result<Self, EvalError> {
        let kernel = match *f {
            FunctionSpec::PowerLog { c, p } if p == 0.0 => Kernel::Log(c),
            FunctionSpec::Power { c, p } if p == -1.0 => Kernel::Inverse(c),
            FunctionSpec::Power { c, p } if p > -1.0 && p < 0.0 => Kernel::Power(c, p),
            _ => return Err(EvalError::Unsupported(f.clone())),
        };
        let lx = rep.left_mult_sparse(x);
        let (lo, weight): (f64, Box<dyn Fn(f64) -> f64>) = match kernel {
            Kernel::Log(c) => (-36.0, Box::new(move |_| -c)),
            Kernel::Power(c, p) => (-36.0 / (1.0 + p), Box::new(move |s: f64| c * (-p * PI).sin() / PI * s.powf(p))),
            Kernel::Inverse(_) => (0.0, Box::new(|_| 0.0)),
        };
        let nodes = match kernel {
            Kernel::Inverse(_) => Vec::new(),
            _ => {
                let hi = 36.0;
                let count = ((hi - lo) / STEP).ceil() as usize;
                (0..=count)
                    .map(|j| {
                        let u = lo + j as f64 * STEP;
                        let s = u.exp();
                        (s, weight(s) * s * STEP)
                    })
                    .collect()
            }
        };
        Ok(ResolventEvaluator { lx, kernel, nodes })
    }

    fn chain(&self, s: f64, ops: &[&OpExpr], v: &[c64]) -> Result<Vec<c64>, TorusError> {
        let mut u = cg_solve(&self.lx, s, v, CG_TOL)?;
        for op in ops.iter().rev() {
            u = op.apply(&u)?;
            u = cg_solve(&self.lx, s, &u, CG_TOL)?;
        }
        Ok(u)
    }

    /// `T^x_{f^{[n]}}(ops) v` with `n = ops.len()`.
    pub fn apply(&self, ops: &[&OpExpr], v: &[c64]) -> Result<Vec<c64>, TorusError> {
        let n = ops.len();
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        if let Kernel::Inverse(c) = self.kernel {
            return Ok(self.chain(0.0, ops, v)?.into_iter().map(|z| z * (sign * c)).collect());
        }
        let parts: Vec<Vec<c64>> = self
            .nodes
            .par_iter()
            .map(|&(s, w)| {
                let mut u = self.chain(s, ops, v)?;
                if n == 0 {
                    // f = int w(s) ((1+s)^{-1} - (a+s)^{-1}) ds for the log kernel
                    if let Kernel::Log(_) = self.kernel {
                        for (z, vi) in u.iter_mut().zip(v) {
                            *z -= vi / (1.0 + s);
                        }
                    }
                }
                Ok(u.into_iter().map(|z| z * (sign * w)).collect())
            })
            .collect::<Result<_, TorusError>>()?;
        let mut acc = vec![c64::new(0.0, 0.0); v.len()];
        for p in parts {
            for (a, b) in acc.iter_mut().zip(p) {
                *a += b;
            }
        }
        Ok(acc)
    }
}

/// The element `sum coeff(d) T^x_{F_{k,d}^{[m]}}(atoms)` (without [`prefactor`])
/// as a vector of Fourier coefficients on the truncation.
pub fn eval_expression_torus(
    expr: &MoiExpression,
    d: u32,
    rep: &TruncatedRep,
    binding: &TorusBinding,
) -> Result<Vec<c64>, EvalError> {
    if rep.d() != d as usize {
        return Err(EvalError::Dimension(format!("truncation has d={}, expression evaluated at d={d}", rep.d())));
    }
    let f = fkd(expr.k, d);
    let eval = ResolventEvaluator::new(&binding.x, &f, rep)?;
    let e0 = rep.to_vector(&FourierElement::constant(rep.d(), 1.0));
    let mut cache: HashMap<ConcreteAtom, OpExpr> = HashMap::new();
    let mut acc = vec![c64::new(0.0, 0.0); rep.dim()];
    for (coeff, atoms) in concrete_terms(expr, d)? {
        for a in &atoms {
            if !cache.contains_key(a) {
                let op = binding.realize(a, rep)?;
                cache.insert(a.clone(), op);
            }
        }
        let ops: Vec<&OpExpr> = atoms.iter().map(|a| &cache[a]).collect();
        let v = eval.apply(&ops, &e0)?;
        for (z, w) in acc.iter_mut().zip(v) {
            *z += w * coeff;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recursion::local_invariant;
    use crate::spectral::identity;
    use crate::torus::ThetaMatrix;

    #[test]
    fn zeroth_invariant_on_scalar() {
        let e = local_invariant(0).unwrap();
        let c = 2.5;
        for d in [2u32, 3, 4] {
            let x = SpectralOperator::from_real_diagonal(&[c; 3]).unwrap();
            let s = eval_expression(&e, d, &x, |_| Ok(identity(3))).unwrap();
            let i0 = s[(0, 0)].re * prefactor(&e, d);
            let want = PI.powf(d as f64 / 2.0) * c.powf(-(d as f64) / 2.0);
            assert!((i0 - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn second_invariant_constant_coefficients() {
        let e = local_invariant(2).unwrap();
        let (c, mu) = (1.7, 0.3);
        let x = SpectralOperator::from_real_diagonal(&[c; 2]).unwrap();
        let realize = |a: &ConcreteAtom| -> Result<CMat, EvalError> {
            let zero = CMat::zeros(2, 2);
            Ok(match (a.generator, a.derivs.is_empty()) {
                (ConcreteGenerator::X, true) => crate::spectral::scale(&identity(2), c64::new(c, 0.0)),
                (ConcreteGenerator::Apot, true) => crate::spectral::scale(&identity(2), c64::new(mu, 0.0)),
                _ => zero,
            })
        };
        let s = eval_expression(&e, 2, &x, realize).unwrap();
        let i2 = s[(0, 0)].re * prefactor(&e, 2);
        assert!((i2 + PI * mu / c).abs() < 1e-12);
    }

    #[test]
    fn resolvent_matches_dense_log_differences() {
        let th = ThetaMatrix::planar(0.3);
        let rep = TruncatedRep::new(3, th);
        let x = FourierElement::constant(2, 1.5).add(&FourierElement::cosine(2, 0, 0.2)).add(&FourierElement::cosine(2, 1, 0.15));
        let b = FourierElement::cosine(2, 1, 0.3).add(&FourierElement::monomial(&[1, 1], c64::new(0.1, -0.2)));
        let ops = [OpExpr::mult(b.clone(), &rep), OpExpr::mult(x.derivative(0), &rep)];
        let eval = ResolventEvaluator::new(&x, &FunctionSpec::log(), &rep).unwrap();
        let e0 = rep.to_vector(&FourierElement::constant(2, 1.0));
        let got = eval.apply(&[&ops[0], &ops[1]], &e0).unwrap();
        let xs = SpectralOperator::new(rep.left_mult_matrix(&x)).unwrap();
        let dense = moi_spectral(&xs, &FunctionSpec::log(), &[rep.left_mult_matrix(&b), rep.left_mult_matrix(&x.derivative(0))]).unwrap();
        let o = rep.origin();
        for i in 0..rep.dim() {
            assert!((got[i] - dense[(i, o)]).norm() < 1e-11, "{i}");
        }
        let f0 = eval.apply(&[], &e0).unwrap();
        let dense0 = moi_spectral(&xs, &FunctionSpec::log(), &[]).unwrap();
        assert!((f0[o] - dense0[(o, o)]).norm() < 1e-11);
    }

    #[test]
    fn solve_derivative_is_consistent() {
        let th = ThetaMatrix::planar(0.21);
        let rep = TruncatedRep::new(4, th);
        let y = FourierElement::constant(2, 2.0).add(&FourierElement::cosine(2, 0, 0.3)).add(&FourierElement::cosine(2, 1, 0.4));
        let inv = OpExpr::solve(y.clone(), &rep);
        let dinv = inv.derivative(1, &rep);
        let v = rep.to_vector(&FourierElement::monomial(&[1, 0], c64::new(1.0, 0.0)));
        // [D, Y^{-1}] v computed directly
        let diag = rep.derivative_diagonal(1);
        let dv: Vec<c64> = v.iter().zip(&diag).map(|(z, d)| z * d).collect();
        let a = inv.apply(&v).unwrap();
        let da: Vec<c64> = a.iter().zip(&diag).map(|(z, d)| z * d).collect();
        let b = inv.apply(&dv).unwrap();
        let got = dinv.apply(&v).unwrap();
        for i in 0..v.len() {
            assert!((got[i] - (da[i] - b[i])).norm() < 1e-11);
        }
    }
}
