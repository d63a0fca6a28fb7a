//! Truncated left-regular representation of the non-commutative torus.
//!
//! Basis vectors are the monomials `U^n = U_1^{n_1} ... U_d^{n_d}` with
//! `|n|_inf <= N`. With this ordering `U^m U^n = phase(m,n) U^{m+n}` where
//! `phase(m,n) = exp(2 pi i sum_{l>k} theta_{lk} m_l n_k)`.

use crate::spectral::CMat;
use faer::linalg::solvers::SolveLstsq;
use faer::{c64, Mat, Side};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TorusError {
    #[error("theta is not antisymmetric (deviation {0:e})")]
    NotAntisymmetric(f64),
    #[error("theta must be a {0}x{0} matrix")]
    ThetaShape(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("truncated spectrum not positive (minimum {0:e})")]
    NonPositive(f64),
    #[error("function undefined on truncated spectrum point {0:e}")]
    Domain(f64),
    #[error("eigensolver failed")]
    Eigen,
    #[error("least-squares design is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),
    #[error("need at least as many samples as fitted orders")]
    TooFewSamples,
    #[error("conjugate gradients stalled at relative residual {0:e}")]
    NoConvergence(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThetaMatrix {
    d: usize,
    entries: Vec<f64>,
}

impl ThetaMatrix {
    /// Row-major `d x d` entries.
    pub fn new(d: usize, entries: Vec<f64>) -> Result<Self, TorusError> {
        if entries.len() != d * d {
            return Err(TorusError::ThetaShape(d));
        }
        let mut dev = 0.0f64;
        for k in 0..d {
            for l in 0..d {
                dev = dev.max((entries[k * d + l] + entries[l * d + k]).abs());
            }
        }
        if dev > 1e-14 {
            return Err(TorusError::NotAntisymmetric(dev));
        }
        Ok(ThetaMatrix { d, entries })
    }

    pub fn zero(d: usize) -> Self {
        ThetaMatrix { d, entries: vec![0.0; d * d] }
    }

    /// `theta_{12} = t`, `theta_{21} = -t`.
    pub fn planar(t: f64) -> Self {
        ThetaMatrix { d: 2, entries: vec![0.0, t, -t, 0.0] }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries[k * self.d + l]
    }
}

/// `phase(m,n)` with `U^m U^n = phase(m,n) U^{m+n}`.
pub fn mult_phase(m: &[i32], n: &[i32], theta: &ThetaMatrix) -> c64 {
    let mut angle = 0.0;
    for l in 0..m.len() {
        if m[l] == 0 {
            continue;
        }
        for k in 0..l {
            angle += theta.get(l, k) * (m[l] as f64) * (n[k] as f64);
        }
    }
    c64::from_polar(1.0, 2.0 * PI * angle)
}

/// Finitely supported `sum c_n U^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierElement {
    d: usize,
    coeffs: BTreeMap<Vec<i32>, c64>,
}

impl FourierElement {
    pub fn zero(d: usize) -> Self {
        FourierElement { d, coeffs: BTreeMap::new() }
    }

    pub fn constant(d: usize, c: f64) -> Self {
        let mut e = Self::zero(d);
        e.add_mode(&vec![0; d], c64::new(c, 0.0));
        e
    }

    pub fn monomial(n: &[i32], c: c64) -> Self {
        let mut e = Self::zero(n.len());
        e.add_mode(n, c);
        e
    }

    /// `c (U_k + U_k^*)` for generator index `k` (0-based).
    pub fn cosine(d: usize, k: usize, c: f64) -> Self {
        let mut n = vec![0; d];
        n[k] = 1;
        let mut e = Self::monomial(&n, c64::new(c, 0.0));
        n[k] = -1;
        e.add_mode(&n, c64::new(c, 0.0));
        e
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn add_mode(&mut self, n: &[i32], c: c64) {
        assert_eq!(n.len(), self.d);
        let slot = self.coeffs.entry(n.to_vec()).or_insert(c64::new(0.0, 0.0));
        *slot += c;
        if *slot == c64::new(0.0, 0.0) {
            self.coeffs.remove(n);
        }
    }

    pub fn coeff(&self, n: &[i32]) -> c64 {
        self.coeffs.get(n).copied().unwrap_or(c64::new(0.0, 0.0))
    }

    pub fn modes(&self) -> impl Iterator<Item = (&Vec<i32>, &c64)> {
        self.coeffs.iter()
    }

    pub fn support_radius(&self) -> i32 {
        self.coeffs.keys().flat_map(|n| n.iter().map(|v| v.abs())).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (n, c) in &other.coeffs {
            out.add_mode(n, *c);
        }
        out
    }

    pub fn scale(&self, s: c64) -> Self {
        let mut out = Self::zero(self.d);
        for (n, c) in &self.coeffs {
            out.add_mode(n, c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self, theta: &ThetaMatrix) -> Self {
        let mut out = Self::zero(self.d);
        for (m, a) in &self.coeffs {
            for (n, b) in &other.coeffs {
                let s: Vec<i32> = m.iter().zip(n).map(|(x, y)| x + y).collect();
                out.add_mode(&s, a * b * mult_phase(m, n, theta));
            }
        }
        out
    }

    /// `(U^n)^* = conj(phase(n,-n)) U^{-n}`.
    pub fn adjoint(&self, theta: &ThetaMatrix) -> Self {
        let mut out = Self::zero(self.d);
        for (n, c) in &self.coeffs {
            let neg: Vec<i32> = n.iter().map(|v| -v).collect();
            out.add_mode(&neg, c.conj() * mult_phase(n, &neg, theta).conj());
        }
        out
    }

    pub fn is_self_adjoint(&self, theta: &ThetaMatrix, tol: f64) -> bool {
        let diff = self.add(&self.adjoint(theta).scale(c64::new(-1.0, 0.0)));
        diff.coeffs.values().all(|c| c.norm() <= tol)
    }

    /// `D_k`, 0-based.
    pub fn derivative(&self, k: usize) -> Self {
        let mut out = Self::zero(self.d);
        for (n, c) in &self.coeffs {
            out.add_mode(n, c * n[k] as f64);
        }
        out
    }

    pub fn truncate(&self, radius: i32) -> Self {
        let mut out = Self::zero(self.d);
        for (n, c) in &self.coeffs {
            if n.iter().all(|v| v.abs() <= radius) {
                out.add_mode(n, *c);
            }
        }
        out
    }

    /// `||b||_2 = tau(b^* b)^{1/2}`.
    pub fn norm_l2(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest coefficient modulus.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// `tau(sum c_n U^n) = c_0`.
pub fn tau(z: &FourierElement) -> c64 {
    z.coeff(&vec![0; z.dim()])
}

/// Compressed sparse rows.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<c64>,
}

impl SparseMatrix {
    fn from_triplets(n: usize, mut trip: Vec<(usize, usize, c64)>) -> Self {
        trip.sort_by_key(|t| (t.0, t.1));
        let mut row_start = vec![0; n + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<c64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            row_start[r + 1] += 1;
            cols.push(c);
            vals.push(v);
            last = Some((r, c));
        }
        for r in 0..n {
            row_start[r + 1] += row_start[r];
        }
        SparseMatrix { n, row_start, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored `(row, col, value)` entries in row order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, c64)> + '_ {
        (0..self.n).flat_map(move |r| (self.row_start[r]..self.row_start[r + 1]).map(move |i| (r, self.cols[i], self.vals[i])))
    }

    pub fn apply(&self, v: &[c64]) -> Vec<c64> {
        let mut out = vec![c64::new(0.0, 0.0); self.n];
        self.apply_into(v, &mut out);
        out
    }

    pub fn apply_into(&self, v: &[c64], out: &mut [c64]) {
        for r in 0..self.n {
            let mut acc = c64::new(0.0, 0.0);
            for idx in self.row_start[r]..self.row_start[r + 1] {
                acc += self.vals[idx] * v[self.cols[idx]];
            }
            out[r] = acc;
        }
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = Mat::<c64>::zeros(self.n, self.n);
        for r in 0..self.n {
            for idx in self.row_start[r]..self.row_start[r + 1] {
                m[(r, self.cols[idx])] += self.vals[idx];
            }
        }
        m
    }
}

/// Basis `U^n`, `|n|_inf <= radius`, ordered lexicographically.
#[derive(Clone, Debug)]
pub struct TruncatedRep {
    radius: i32,
    theta: ThetaMatrix,
    side: usize,
    dim: usize,
}

impl TruncatedRep {
    pub fn new(radius: usize, theta: ThetaMatrix) -> Self {
        let side = 2 * radius + 1;
        let dim = side.pow(theta.dim() as u32);
        TruncatedRep { radius: radius as i32, theta, side, dim }
    }

    pub fn radius(&self) -> i32 {
        self.radius
    }

    pub fn d(&self) -> usize {
        self.theta.dim()
    }

    pub fn theta(&self) -> &ThetaMatrix {
        &self.theta
    }

    /// `(2N+1)^d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn index(&self, n: &[i32]) -> Option<usize> {
        let mut idx = 0;
        for &v in n {
            if v.abs() > self.radius {
                return None;
            }
            idx = idx * self.side + (v + self.radius) as usize;
        }
        Some(idx)
    }

    pub fn mode(&self, mut idx: usize) -> Vec<i32> {
        let mut n = vec![0; self.d()];
        for k in (0..self.d()).rev() {
            n[k] = (idx % self.side) as i32 - self.radius;
            idx /= self.side;
        }
        n
    }

    pub fn origin(&self) -> usize {
        self.index(&vec![0; self.d()]).unwrap()
    }

    /// Diagonal of `D_k`.
    pub fn derivative_diagonal(&self, k: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.mode(i)[k] as f64).collect()
    }

    pub fn to_vector(&self, b: &FourierElement) -> Vec<c64> {
        let mut v = vec![c64::new(0.0, 0.0); self.dim];
        for (n, c) in b.modes() {
            if let Some(i) = self.index(n) {
                v[i] = *c;
            }
        }
        v
    }

    pub fn to_element(&self, v: &[c64]) -> FourierElement {
        let mut e = FourierElement::zero(self.d());
        for (i, c) in v.iter().enumerate() {
            if *c != c64::new(0.0, 0.0) {
                e.add_mode(&self.mode(i), *c);
            }
        }
        e
    }

    fn triplets(&self, b: &FourierElement, left: bool) -> Vec<(usize, usize, c64)> {
        let mut trip = Vec::new();
        for col in 0..self.dim {
            let n = self.mode(col);
            for (m, c) in b.modes() {
                let s: Vec<i32> = m.iter().zip(&n).map(|(a, b)| a + b).collect();
                if let Some(row) = self.index(&s) {
                    let ph = if left { mult_phase(m, &n, &self.theta) } else { mult_phase(&n, m, &self.theta) };
                    trip.push((row, col, c * ph));
                }
            }
        }
        trip
    }

    /// Compression of `lambda_l(b)`.
    pub fn left_mult_sparse(&self, b: &FourierElement) -> SparseMatrix {
        SparseMatrix::from_triplets(self.dim, self.triplets(b, true))
    }

    /// Compression of right multiplication `v -> v b`.
    pub fn right_mult_sparse(&self, b: &FourierElement) -> SparseMatrix {
        SparseMatrix::from_triplets(self.dim, self.triplets(b, false))
    }

    pub fn left_mult_matrix(&self, b: &FourierElement) -> CMat {
        self.left_mult_sparse(b).to_dense()
    }
}

/// `lambda(x) Delta + sum lambda(a_i) D_i + lambda(a)` on the truncation.
///
/// The Hermitian part of the compressed `lambda(x)` must be positive definite.
/// A diagonal-dominance bound settles this cheaply in the usual case; the
/// dense eigenvalue check is the fallback.
pub fn build_p(x: &FourierElement, a_vec: &[FourierElement], a: &FourierElement, rep: &TruncatedRep) -> Result<CMat, TorusError> {
    let d = rep.d();
    if a_vec.len() != d {
        return Err(TorusError::Dimension(a_vec.len(), d));
    }
    let origin = vec![0; d];
    let re0 = x.coeff(&origin).re;
    let off: f64 = x.modes().filter(|(n, _)| **n != origin).map(|(_, c)| c.norm()).sum();
    let herm_x = x.add(&x.adjoint(rep.theta())).scale(c64::new(0.5, 0.0));
    let herm_off: f64 = herm_x.modes().filter(|(n, _)| **n != origin).map(|(_, c)| c.norm()).sum();
    if re0 - off.min(herm_off) <= 0.0 {
        let lx = rep.left_mult_matrix(x);
        let herm = Mat::from_fn(lx.nrows(), lx.ncols(), |i, j| (lx[(i, j)] + lx[(j, i)].conj()) * 0.5);
        let min = herm.self_adjoint_eigenvalues(Side::Lower).map_err(|_| TorusError::Eigen)?[0];
        if min <= 0.0 {
            return Err(TorusError::NonPositive(min));
        }
    }
    let diags: Vec<Vec<f64>> = (0..d).map(|k| rep.derivative_diagonal(k)).collect();
    let lap: Vec<f64> = (0..rep.dim()).map(|j| diags.iter().map(|dk| dk[j] * dk[j]).sum()).collect();
    let mut p = Mat::<c64>::zeros(rep.dim(), rep.dim());
    for (r, c, v) in rep.left_mult_sparse(x).entries() {
        p[(r, c)] += v * lap[c];
    }
    for (k, ai) in a_vec.iter().enumerate() {
        for (r, c, v) in rep.left_mult_sparse(ai).entries() {
            p[(r, c)] += v * diags[k][c];
        }
    }
    for (r, c, v) in rep.left_mult_sparse(a).entries() {
        p[(r, c)] += v;
    }
    Ok(p)
}

/// Hermitian heat-trace data `Tr(lambda(y) e^{-tP})` for a fixed `P`.
pub struct HeatSpectrum {
    eigenvalues: Vec<f64>,
    weights: Option<Vec<c64>>,
    /// `||P - P^*||_F / ||P||_F` before symmetrisation.
    pub asymmetry: f64,
}

impl HeatSpectrum {
    /// `y = None` means `y = 1`.
    pub fn new(p: &CMat, y: Option<&FourierElement>, rep: &TruncatedRep) -> Result<Self, TorusError> {
        let n = p.nrows();
        let sym = Mat::from_fn(n, n, |i, j| (p[(i, j)] + p[(j, i)].conj()) * 0.5);
        let asymmetry = (p - &sym).norm_l2() * 2.0 / p.norm_l2().max(1e-300);
        match y {
            None => {
                let eigenvalues = sym.self_adjoint_eigenvalues(Side::Lower).map_err(|_| TorusError::Eigen)?;
                Ok(HeatSpectrum { eigenvalues, weights: None, asymmetry })
            }
            Some(y) => {
                let eig = sym.self_adjoint_eigen(Side::Lower).map_err(|_| TorusError::Eigen)?;
                let u = eig.U();
                let ly = rep.left_mult_matrix(y);
                let prod = u.adjoint() * &ly * u;
                let weights = (0..n).map(|j| prod[(j, j)]).collect();
                let eigenvalues = (0..n).map(|j| eig.S()[j].re).collect();
                Ok(HeatSpectrum { eigenvalues, weights: Some(weights), asymmetry })
            }
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn trace(&self, t: f64) -> c64 {
        match &self.weights {
            None => c64::new(self.eigenvalues.iter().map(|l| (-t * l).exp()).sum(), 0.0),
            Some(w) => self.eigenvalues.iter().zip(w).map(|(l, w)| w * (-t * l).exp()).sum(),
        }
    }
}

pub fn heat_trace(p: &CMat, y: Option<&FourierElement>, rep: &TruncatedRep, t: f64) -> Result<c64, TorusError> {
    Ok(HeatSpectrum::new(p, y, rep)?.trace(t))
}

#[derive(Clone, Debug)]
pub struct FitResult {
    /// Coefficient of `t^{(k-d)/2}` for each requested `k`.
    pub coefficients: Vec<f64>,
    pub residual_rms: f64,
    pub condition: f64,
}

/// Least-squares fit of `sum_k c_k t^{(k-d)/2}` to `(t, trace)` samples.
pub fn fit_invariants(samples: &[(f64, f64)], d: usize, orders: &[u32]) -> Result<FitResult, TorusError> {
    let rows = samples.len();
    let cols = orders.len();
    if rows < cols {
        return Err(TorusError::TooFewSamples);
    }
    let raw = Mat::<f64>::from_fn(rows, cols, |i, j| samples[i].0.powf((orders[j] as f64 - d as f64) / 2.0));
    let norms: Vec<f64> = (0..cols).map(|j| (0..rows).map(|i| raw[(i, j)].powi(2)).sum::<f64>().sqrt()).collect();
    let a = Mat::<f64>::from_fn(rows, cols, |i, j| raw[(i, j)] / norms[j]);
    let sv = a.singular_values().map_err(|_| TorusError::Eigen)?;
    let condition = sv[0] / sv[cols - 1];
    if !condition.is_finite() || condition > 1e12 {
        return Err(TorusError::IllConditioned(condition));
    }
    let b = Mat::<f64>::from_fn(rows, 1, |i, _| samples[i].1);
    let sol = a.qr().solve_lstsq(&b);
    let coefficients: Vec<f64> = (0..cols).map(|j| sol[(j, 0)] / norms[j]).collect();
    let residual_rms = ((0..rows)
        .map(|i| {
            let model: f64 = (0..cols).map(|j| raw[(i, j)] * coefficients[j]).sum();
            (model - samples[i].1).powi(2)
        })
        .sum::<f64>()
        / rows as f64)
        .sqrt();
    Ok(FitResult { coefficients, residual_rms, condition })
}

/// `f(b)` for self-adjoint `b`, read off from `f(lambda_N(b)) U^0`.
pub fn matrix_function_fourier(
    b: &FourierElement,
    f: impl Fn(f64) -> f64,
    rep: &TruncatedRep,
) -> Result<FourierElement, TorusError> {
    let lb = rep.left_mult_matrix(b);
    let n = lb.nrows();
    let sym = Mat::from_fn(n, n, |i, j| (lb[(i, j)] + lb[(j, i)].conj()) * 0.5);
    let eig = sym.self_adjoint_eigen(Side::Lower).map_err(|_| TorusError::Eigen)?;
    let u = eig.U();
    let o = rep.origin();
    let mut coeff = vec![c64::new(0.0, 0.0); n];
    for j in 0..n {
        let l = eig.S()[j].re;
        let fl = f(l);
        if !fl.is_finite() {
            return Err(TorusError::Domain(l));
        }
        let w = u[(o, j)].conj() * fl;
        for (i, c) in coeff.iter_mut().enumerate() {
            *c += u[(i, j)] * w;
        }
    }
    Ok(rep.to_element(&coeff))
}

pub fn write_trace_csv<W: Write>(mut out: W, rows: &[(f64, c64)]) -> io::Result<()> {
    writeln!(out, "t,re_trace,im_trace")?;
    for (t, z) in rows {
        writeln!(out, "{t},{:.17e},{:.17e}", z.re, z.im)?;
    }
    Ok(())
}

/// Conjugate gradients for a Hermitian positive definite `A + shift`.
pub fn cg_solve(a: &SparseMatrix, shift: f64, b: &[c64], tol: f64) -> Result<Vec<c64>, TorusError> {
    let n = b.len();
    let dot = |u: &[c64], v: &[c64]| -> c64 { u.iter().zip(v).map(|(a, b)| a.conj() * b).sum() };
    let bnorm = dot(b, b).re.sqrt();
    let mut x = vec![c64::new(0.0, 0.0); n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r).re;
    let mut ap = vec![c64::new(0.0, 0.0); n];
    for _ in 0..10 * n.max(50) {
        a.apply_into(&p, &mut ap);
        for (q, v) in ap.iter_mut().zip(&p) {
            *q += v * shift;
        }
        let alpha = rr / dot(&p, &ap).re;
        for i in 0..n {
            x[i] += p[i] * alpha;
            r[i] -= ap[i] * alpha;
        }
        let rr_new = dot(&r, &r).re;
        if rr_new.sqrt() <= tol * bnorm {
            return Ok(x);
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + p[i] * beta;
        }
        rr = rr_new;
    }
    Err(TorusError::NoConvergence(rr.sqrt() / bnorm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: c64, b: c64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn phase_examples() {
        let th = ThetaMatrix::planar(0.3);
        assert!(close(mult_phase(&[1, 0], &[0, 1], &th), c64::new(1.0, 0.0), 1e-15));
        let want = c64::from_polar(1.0, 2.0 * PI * th.get(1, 0));
        assert!(close(mult_phase(&[0, 1], &[1, 0], &th), want, 1e-15));
        assert!(close(mult_phase(&[3, -2], &[0, 0], &th), c64::new(1.0, 0.0), 1e-15));
    }

    #[test]
    fn phase_is_a_cocycle() {
        let th = ThetaMatrix::new(3, vec![0.0, 0.3, -0.11, -0.3, 0.0, 0.7, 0.11, -0.7, 0.0]).unwrap();
        let vs = [[1, 0, 2], [-1, 3, 0], [2, -2, 1]];
        for a in &vs {
            for b in &vs {
                for c in &vs {
                    let ab: Vec<i32> = (0..3).map(|i| a[i] + b[i]).collect();
                    let bc: Vec<i32> = (0..3).map(|i| b[i] + c[i]).collect();
                    let lhs = mult_phase(a, b, &th) * mult_phase(&ab, c, &th);
                    let rhs = mult_phase(b, c, &th) * mult_phase(a, &bc, &th);
                    assert!(close(lhs, rhs, 1e-13));
                }
            }
        }
    }

    #[test]
    fn commutation_relation_on_interior() {
        let th = ThetaMatrix::planar(0.3);
        let rep = TruncatedRep::new(3, th.clone());
        let u1 = rep.left_mult_matrix(&FourierElement::monomial(&[1, 0], c64::new(1.0, 0.0)));
        let u2 = rep.left_mult_matrix(&FourierElement::monomial(&[0, 1], c64::new(1.0, 0.0)));
        let lhs = &u1 * &u2;
        let rhs = &u2 * &u1;
        let ph = c64::from_polar(1.0, 2.0 * PI * th.get(0, 1));
        for col in 0..rep.dim() {
            let n = rep.mode(col);
            if n.iter().any(|v| v.abs() > 1) {
                continue;
            }
            for row in 0..rep.dim() {
                assert!(close(lhs[(row, col)], rhs[(row, col)] * ph, 1e-14));
            }
        }
    }

    #[test]
    fn adjoint_and_trace() {
        let th = ThetaMatrix::planar(0.3);
        let mut b = FourierElement::constant(2, 0.5);
        b.add_mode(&[1, 1], c64::new(0.2, 0.1));
        b.add_mode(&[0, -1], c64::new(-0.3, 0.0));
        let c = FourierElement::cosine(2, 1, 0.4).add(&FourierElement::monomial(&[1, -1], c64::new(0.0, 1.0)));
        let bs = b.adjoint(&th);
        assert!(bs.adjoint(&th).add(&b.scale(c64::new(-1.0, 0.0))).max_coeff() < 1e-15);
        let pos = tau(&bs.mul(&b, &th));
        assert!(pos.re > 0.0 && pos.im.abs() < 1e-15);
        assert!(close(tau(&b.mul(&c, &th)), tau(&c.mul(&b, &th)), 1e-14));
        assert!(FourierElement::cosine(2, 0, 0.2).is_self_adjoint(&th, 1e-15));
    }

    #[test]
    fn leibniz_rule() {
        let th = ThetaMatrix::planar(0.17);
        let b = FourierElement::cosine(2, 0, 0.3).add(&FourierElement::monomial(&[1, 2], c64::new(0.1, 0.2)));
        let c = FourierElement::monomial(&[-1, 1], c64::new(0.4, 0.0)).add(&FourierElement::constant(2, 1.0));
        for k in 0..2 {
            let lhs = b.mul(&c, &th).derivative(k);
            let rhs = b.derivative(k).mul(&c, &th).add(&b.mul(&c.derivative(k), &th));
            assert!(lhs.add(&rhs.scale(c64::new(-1.0, 0.0))).max_coeff() < 1e-14);
        }
    }

    #[test]
    fn left_multiplication_is_multiplicative() {
        let th = ThetaMatrix::planar(0.3);
        let rep = TruncatedRep::new(4, th.clone());
        let b = FourierElement::cosine(2, 0, 0.3).add(&FourierElement::monomial(&[1, 1], c64::new(0.1, 0.2)));
        let c = FourierElement::cosine(2, 1, 0.5);
        let bc = b.mul(&c, &th);
        let v = rep.to_vector(&FourierElement::monomial(&[0, 1], c64::new(1.0, 0.0)));
        let lhs = rep.left_mult_sparse(&b).apply(&rep.left_mult_sparse(&c).apply(&v));
        let rhs = rep.left_mult_sparse(&bc).apply(&v);
        for (l, r) in lhs.iter().zip(&rhs) {
            assert!(close(*l, *r, 1e-14));
        }
        assert_eq!(rep.left_mult_matrix(&FourierElement::constant(2, 1.0)), crate::spectral::identity(rep.dim()));
    }

    #[test]
    fn constant_operator_is_diagonal() {
        let rep = TruncatedRep::new(2, ThetaMatrix::zero(2));
        let p = build_p(
            &FourierElement::constant(2, 1.5),
            &[FourierElement::zero(2), FourierElement::zero(2)],
            &FourierElement::constant(2, 0.25),
            &rep,
        )
        .unwrap();
        for i in 0..rep.dim() {
            let n = rep.mode(i);
            let want = 1.5 * (n[0] * n[0] + n[1] * n[1]) as f64 + 0.25;
            assert!(close(p[(i, i)], c64::new(want, 0.0), 1e-14));
        }
    }

    #[test]
    fn hand_computed_nine_by_nine() {
        // d=2, N=1, theta=0: x = 1 + c(U_1 + U_1^*), a_1 = D_1 x, a_2 = 0, a = 0.
        let c = 0.1;
        let rep = TruncatedRep::new(1, ThetaMatrix::zero(2));
        let x = FourierElement::constant(2, 1.0).add(&FourierElement::cosine(2, 0, c));
        let p = build_p(&x, &[x.derivative(0), FourierElement::zero(2)], &FourierElement::zero(2), &rep).unwrap();
        for col in 0..9 {
            let n = rep.mode(col);
            let lap = (n[0] * n[0] + n[1] * n[1]) as f64;
            for row in 0..9 {
                let m = rep.mode(row);
                let want = if m == n {
                    lap
                } else if m[1] == n[1] && (m[0] - n[0]).abs() == 1 {
                    let s = (m[0] - n[0]) as f64;
                    c * lap + c * s * n[0] as f64
                } else {
                    0.0
                };
                assert!(close(p[(row, col)], c64::new(want, 0.0), 1e-14), "{m:?} {n:?}");
            }
        }
        // D_1 lambda(x) D_1 + D_2 lambda(x) D_2 is Hermitian
        assert!((&p - p.adjoint()).norm_l2() < 1e-14);
    }

    #[test]
    fn flat_heat_trace_factorises() {
        let rep = TruncatedRep::new(5, ThetaMatrix::zero(2));
        let c = 1.3;
        let mu = 0.2;
        let p = build_p(
            &FourierElement::constant(2, c),
            &[FourierElement::zero(2), FourierElement::zero(2)],
            &FourierElement::constant(2, mu),
            &rep,
        )
        .unwrap();
        let t = 0.07;
        let one: f64 = (-5..=5).map(|n: i32| (-t * c * (n * n) as f64).exp()).sum();
        let got = heat_trace(&p, None, &rep, t).unwrap();
        assert!((got.re - one * one * (-t * mu).exp()).abs() < 1e-11);
    }

    #[test]
    fn exact_fit_recovers_coefficients() {
        let samples: Vec<(f64, f64)> = (1..20).map(|i| {
            let t = 0.01 * i as f64;
            (t, 3.0 / t - 0.7)
        }).collect();
        let fit = fit_invariants(&samples, 2, &[0, 2]).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((fit.coefficients[1] + 0.7).abs() < 1e-12);
    }

    #[test]
    fn square_root_round_trip() {
        let th = ThetaMatrix::planar(0.3);
        let rep = TruncatedRep::new(8, th.clone());
        let x = FourierElement::constant(2, 1.5).add(&FourierElement::cosine(2, 0, 0.2)).add(&FourierElement::cosine(2, 1, 0.1));
        let r = matrix_function_fourier(&x, f64::sqrt, &rep).unwrap();
        let back = r.mul(&r, &th).truncate(2);
        assert!(back.add(&x.scale(c64::new(-1.0, 0.0))).max_coeff() < 1e-9);
        let id = matrix_function_fourier(&x, |a| a, &rep).unwrap();
        assert!(id.add(&x.scale(c64::new(-1.0, 0.0))).max_coeff() < 1e-13);
    }

    #[test]
    fn conjugate_gradient_inverts() {
        let th = ThetaMatrix::planar(0.3);
        let rep = TruncatedRep::new(6, th);
        let x = FourierElement::constant(2, 1.5).add(&FourierElement::cosine(2, 0, 0.2));
        let lx = rep.left_mult_sparse(&x);
        let b = rep.to_vector(&FourierElement::constant(2, 1.0));
        let sol = cg_solve(&lx, 0.5, &b, 1e-14).unwrap();
        let back = lx.apply(&sol);
        for i in 0..b.len() {
            assert!(close(back[i] + sol[i] * 0.5, b[i], 1e-12));
        }
    }
}
