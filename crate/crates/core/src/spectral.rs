//! Multiple operator integrals of Hermitian matrices.
//!
//! In the eigenbasis of `x` the integral `T^x_phi(V_1,...,V_n)` has entries
//! `sum phi(l_{p0},...,l_{pn}) (V_1)_{p0 p1} ... (V_n)_{p(n-1) pn}`. Eigenvalues
//! that agree to working precision are grouped into clusters so that the
//! symbol is evaluated once per cluster tuple.

use crate::divdiff::{dd_eval, simplex_rule, DdError, FunctionSpec};
use faer::{c64, Mat, Side};
use rayon::prelude::*;
use std::ops::Range;
use thiserror::Error;

pub type CMat = Mat<c64>;

#[derive(Debug, Error)]
pub enum MoiError {
    #[error("dimension mismatch: expected {expected}x{expected}, got {rows}x{cols}")]
    Dimension { expected: usize, rows: usize, cols: usize },
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("eigendecomposition residual {0:e} exceeds tolerance")]
    Residual(f64),
    #[error("eigensolver failed")]
    Eigen,
    #[error("spectrum not positive (minimum eigenvalue {0:e})")]
    NonPositive(f64),
    #[error(transparent)]
    Symbol(#[from] DdError),
    #[error("simplex quadrature did not converge (relative error estimate {0:e})")]
    Quadrature(f64),
    #[error("summation of {work:e} symbol evaluations exceeds the cap {cap:e}")]
    TooLarge { work: f64, cap: f64 },
}

/// Cap on `N^(n+1)` symbol evaluations for the dense spectral summation.
pub const DEFAULT_WORK_CAP: f64 = 2e9;

const CLUSTER_TOL: f64 = 1e-12;

/// Hermitian matrix with a cached eigendecomposition.
#[derive(Clone, Debug)]
pub struct SpectralOperator {
    matrix: CMat,
    eigenvalues: Vec<f64>,
    eigenvectors: CMat,
    clusters: Vec<Range<usize>>,
}

pub fn frobenius(m: &CMat) -> f64 {
    m.norm_l2()
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint().to_owned()
}

pub fn scale(m: &CMat, s: c64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

impl SpectralOperator {
    pub fn new(matrix: CMat) -> Result<Self, MoiError> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(MoiError::Dimension { expected: n, rows: n, cols: matrix.ncols() });
        }
        let norm = frobenius(&matrix);
        let asym = frobenius(&(&matrix - matrix.adjoint()));
        if asym > 1e-12 * norm.max(1.0) {
            return Err(MoiError::NotHermitian(asym));
        }
        let eig = matrix.self_adjoint_eigen(Side::Lower).map_err(|_| MoiError::Eigen)?;
        let eigenvectors = eig.U().to_owned();
        let eigenvalues: Vec<f64> = (0..n).map(|i| eig.S()[i].re).collect();
        let mut op = SpectralOperator { matrix, eigenvalues, eigenvectors, clusters: Vec::new() };
        let recon = op.apply_function(|a| a);
        let residual = frobenius(&(&recon - &op.matrix));
        if residual > 1e-10 * norm.max(1e-300) {
            return Err(MoiError::Residual(residual));
        }
        op.clusters = cluster(&op.eigenvalues);
        Ok(op)
    }

    pub fn from_real_diagonal(values: &[f64]) -> Result<Self, MoiError> {
        let n = values.len();
        Self::new(Mat::from_fn(n, n, |i, j| if i == j { c64::new(values[i], 0.0) } else { c64::new(0.0, 0.0) }))
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMat {
        &self.eigenvectors
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::INFINITY)
    }

    /// `f(x)` by functional calculus.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64) -> CMat {
        let u = &self.eigenvectors;
        let n = self.dim();
        let fu = Mat::from_fn(n, n, |i, j| u[(i, j)] * f(self.eigenvalues[j]));
        &fu * u.adjoint()
    }

    pub fn to_eigenbasis(&self, v: &CMat) -> CMat {
        self.eigenvectors.adjoint() * v * &self.eigenvectors
    }

    pub fn from_eigenbasis(&self, v: &CMat) -> CMat {
        &self.eigenvectors * v * self.eigenvectors.adjoint()
    }

    /// The operator `s * x` with the decomposition reused.
    pub fn scaled(&self, s: f64) -> SpectralOperator {
        assert!(s > 0.0);
        SpectralOperator {
            matrix: scale(&self.matrix, c64::new(s, 0.0)),
            eigenvalues: self.eigenvalues.iter().map(|l| l * s).collect(),
            eigenvectors: self.eigenvectors.clone(),
            clusters: self.clusters.clone(),
        }
    }

    fn check_operands(&self, v: &[CMat]) -> Result<(), MoiError> {
        let n = self.dim();
        for m in v {
            if m.nrows() != n || m.ncols() != n {
                return Err(MoiError::Dimension { expected: n, rows: m.nrows(), cols: m.ncols() });
            }
        }
        Ok(())
    }
}

fn cluster(sorted: &[f64]) -> Vec<Range<usize>> {
    let scale = sorted.iter().fold(1.0f64, |m, l| m.max(l.abs()));
    let mut out: Vec<Range<usize>> = Vec::new();
    for i in 0..sorted.len() {
        match out.last_mut() {
            Some(r) if sorted[i] - sorted[r.end - 1] <= CLUSTER_TOL * scale => r.end = i + 1,
            _ => out.push(i..i + 1),
        }
    }
    out
}

/// Dense row-major block used for the chained products inside the summation.
struct Block {
    cols: usize,
    data: Vec<c64>,
}

fn block_chain(prev: &Block, v: &CMat, rows: &Range<usize>, cols: &Range<usize>) -> Block {
    let nr = prev.data.len() / prev.cols;
    let nc = cols.len();
    let mut data = vec![c64::new(0.0, 0.0); nr * nc];
    for r in 0..nr {
        for (kk, k) in rows.clone().enumerate() {
            let a = prev.data[r * prev.cols + kk];
            if a == c64::new(0.0, 0.0) {
                continue;
            }
            for (cc, c) in cols.clone().enumerate() {
                data[r * nc + cc] += a * v[(k, c)];
            }
        }
    }
    Block { cols: nc, data }
}

/// `T^x_phi(V_1,...,V_n)` for an arbitrary symbol `phi` on `n+1` eigenvalues.
pub fn moi_symbol<S>(x: &SpectralOperator, symbol: S, v: &[CMat]) -> Result<CMat, MoiError>
where
    S: Fn(&[f64]) -> f64 + Sync,
{
    moi_symbol_capped(x, symbol, v, DEFAULT_WORK_CAP)
}

pub fn moi_symbol_capped<S>(x: &SpectralOperator, symbol: S, v: &[CMat], cap: f64) -> Result<CMat, MoiError>
where
    S: Fn(&[f64]) -> f64 + Sync,
{
    x.check_operands(v)?;
    let n = v.len();
    let dim = x.dim();
    if n == 0 {
        return Ok(x.apply_function(|a| symbol(&[a])));
    }
    let work = (x.clusters.len() as f64).powi(n as i32 + 1);
    if work > cap {
        return Err(MoiError::TooLarge { work, cap });
    }
    let vt: Vec<CMat> = v.iter().map(|m| x.to_eigenbasis(m)).collect();
    let clusters = &x.clusters;
    let means: Vec<f64> = clusters
        .iter()
        .map(|r| x.eigenvalues[r.clone()].iter().sum::<f64>() / r.len() as f64)
        .collect();

    // Rows of the result belonging to cluster q0 are filled independently.
    let pieces: Vec<(usize, Vec<(usize, Block)>)> = (0..clusters.len())
        .into_par_iter()
        .map(|q0| {
            let r0 = &clusters[q0];
            let start = Block {
                cols: r0.len(),
                data: (0..r0.len() * r0.len())
                    .map(|i| if i / r0.len() == i % r0.len() { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) })
                    .collect(),
            };
            let mut acc: Vec<Option<Block>> = (0..clusters.len()).map(|_| None).collect();
            let mut pts = vec![means[q0]];
            descend(&vt, clusters, &means, &symbol, 0, q0, &start, &mut pts, &mut acc);
            let done = acc.into_iter().enumerate().filter_map(|(q, b)| b.map(|b| (q, b))).collect();
            (q0, done)
        })
        .collect();

    let mut out = Mat::<c64>::zeros(dim, dim);
    for (q0, blocks) in pieces {
        for (qn, b) in blocks {
            for (rr, r) in clusters[q0].clone().enumerate() {
                for (cc, c) in clusters[qn].clone().enumerate() {
                    out[(r, c)] = b.data[rr * b.cols + cc];
                }
            }
        }
    }
    Ok(x.from_eigenbasis(&out))
}

#[allow(clippy::too_many_arguments)]
fn descend<S>(
    vt: &[CMat],
    clusters: &[Range<usize>],
    means: &[f64],
    symbol: &S,
    depth: usize,
    q: usize,
    prefix: &Block,
    pts: &mut Vec<f64>,
    acc: &mut [Option<Block>],
) where
    S: Fn(&[f64]) -> f64,
{
    for (qn, rn) in clusters.iter().enumerate() {
        let next = block_chain(prefix, &vt[depth], &clusters[q], rn);
        if next.data.iter().all(|z| *z == c64::new(0.0, 0.0)) {
            continue;
        }
        pts.push(means[qn]);
        if depth + 1 == vt.len() {
            let s = symbol(pts);
            let slot = acc[qn].get_or_insert_with(|| Block { cols: next.cols, data: vec![c64::new(0.0, 0.0); next.data.len()] });
            for (a, b) in slot.data.iter_mut().zip(&next.data) {
                *a += b * s;
            }
        } else {
            descend(vt, clusters, means, symbol, depth + 1, qn, &next, pts, acc);
        }
        pts.pop();
    }
}

/// `T^x_{f^{[n]}}(V_1,...,V_n)` with `n = V.len()`; `n = 0` gives `f(x)`.
pub fn moi_spectral(x: &SpectralOperator, f: &FunctionSpec, v: &[CMat]) -> Result<CMat, MoiError> {
    if f.needs_positive() && x.min_eigenvalue() <= 0.0 {
        return Err(MoiError::NonPositive(x.min_eigenvalue()));
    }
    if v.is_empty() {
        return Ok(x.apply_function(|a| f.value(a)));
    }
    moi_symbol(x, |p: &[f64]| dd_eval(f, p).unwrap_or(f64::NAN), v)
}

/// Ordered-simplex integral
/// `int e^{(s_1-1)|xi|^2 x} V_1 e^{(s_2-s_1)|xi|^2 x} ... V_m e^{-s_m |xi|^2 x} ds`
/// over `1 >= s_1 >= ... >= s_m >= 0`, by product Gauss-Legendre quadrature.
/// The rule at `quad_order` is compared with `quad_order + 4`.
pub fn simplex_fm(xi_norm_sq: f64, x: &SpectralOperator, v: &[CMat], quad_order: usize) -> Result<CMat, MoiError> {
    x.check_operands(v)?;
    let m = v.len();
    let lam: Vec<f64> = x.eigenvalues.iter().map(|l| l * xi_norm_sq).collect();
    if m == 0 {
        return Ok(x.apply_function(|a| (-xi_norm_sq * a).exp()));
    }
    let vt: Vec<CMat> = v.iter().map(|a| x.to_eigenbasis(a)).collect();
    let n = x.dim();
    let run = |order: usize| -> CMat {
        let nodes = simplex_rule(m, order);
        nodes
            .par_iter()
            .fold(
                || Mat::<c64>::zeros(n, n),
                |mut acc, (t, w)| {
                    // gaps t_0 = 1 - s_1, t_j = s_j - s_{j+1}, t_m = s_m
                    let mut prod = Mat::from_fn(n, n, |i, j| {
                        if i == j {
                            c64::new((-t[0] * lam[i]).exp(), 0.0)
                        } else {
                            c64::new(0.0, 0.0)
                        }
                    });
                    for (j, vj) in vt.iter().enumerate() {
                        let e = &lam;
                        let tj = t[j + 1];
                        let right = Mat::from_fn(n, n, |r, c| vj[(r, c)] * (-tj * e[c]).exp());
                        prod = &prod * &right;
                    }
                    acc += scale(&prod, c64::new(*w, 0.0));
                    acc
                },
            )
            .reduce(|| Mat::<c64>::zeros(n, n), |a, b| &a + &b)
    };
    let coarse = run(quad_order);
    let fine = run(quad_order + 4);
    let err = frobenius(&(&fine - &coarse)) / frobenius(&fine).max(1e-300);
    if err > 1e-7 {
        return Err(MoiError::Quadrature(err));
    }
    Ok(x.from_eigenbasis(&fine))
}

/// Largest Frobenius deviation over the four commutator identities for
/// `MOI` perturbations, evaluated with `f` on `x`, perturbation `y` and the
/// operand list `v` (`n = v.len() >= 1`).
pub fn check_commutator_identities(
    x: &SpectralOperator,
    f: &FunctionSpec,
    y: &CMat,
    v: &[CMat],
) -> Result<f64, MoiError> {
    x.check_operands(v)?;
    x.check_operands(std::slice::from_ref(y))?;
    let xm = x.matrix();
    let comm = &(xm * y) - &(y * xm);
    let mut worst = 0.0f64;
    let mut track = |a: &CMat, b: &CMat| worst = worst.max(frobenius(&(a - b)));

    // interior insertion
    for j in 1..v.len() {
        let mut left = v.to_vec();
        left[j] = y * &v[j];
        let mut right = v.to_vec();
        right[j - 1] = &v[j - 1] * y;
        let lhs = &moi_spectral(x, f, &left)? - &moi_spectral(x, f, &right)?;
        let mut ins = v.to_vec();
        ins.insert(j, comm.clone());
        track(&lhs, &moi_spectral(x, f, &ins)?);
    }
    if !v.is_empty() {
        // left end
        let mut left = v.to_vec();
        left[0] = y * &v[0];
        let lhs = &moi_spectral(x, f, &left)? - &(y * &moi_spectral(x, f, v)?);
        let mut ins = v.to_vec();
        ins.insert(0, comm.clone());
        track(&lhs, &moi_spectral(x, f, &ins)?);
        // right end
        let mut right = v.to_vec();
        let last = v.len() - 1;
        right[last] = &v[last] * y;
        let lhs = &(&moi_spectral(x, f, v)? * y) - &moi_spectral(x, f, &right)?;
        let mut ins = v.to_vec();
        ins.push(comm.clone());
        track(&lhs, &moi_spectral(x, f, &ins)?);
    }
    // functional calculus
    let fx = moi_spectral(x, f, &[])?;
    let lhs = &(&fx * y) - &(y * &fx);
    track(&lhs, &moi_spectral(x, f, std::slice::from_ref(&comm))?);
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> CMat {
        let a = Mat::from_fn(n, n, |_, _| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let h = &a + a.adjoint();
        Mat::from_fn(n, n, |i, j| h[(i, j)] * 0.5 + if i == j { c64::new(shift, 0.0) } else { c64::new(0.0, 0.0) })
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMat {
        Mat::from_fn(n, n, |_, _| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn zeroth_order_is_functional_calculus() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = SpectralOperator::new(random_hermitian(&mut rng, 5, 4.0)).unwrap();
        let sq = moi_spectral(&x, &FunctionSpec::power(2.0), &[]).unwrap();
        let direct = x.matrix() * x.matrix();
        assert!(frobenius(&(&sq - &direct)) < 1e-12 * frobenius(&direct));
    }

    #[test]
    fn commuting_operands_collapse() {
        let x = SpectralOperator::from_real_diagonal(&[1.0, 2.0, 2.0, 3.5]).unwrap();
        let v = x.apply_function(|a| a * a + 1.0);
        let f = FunctionSpec::log();
        let got = moi_spectral(&x, &f, &[v.clone(), v.clone()]).unwrap();
        let want = x.apply_function(|a| {
            let d = dd_eval(&f, &[a, a, a]).unwrap();
            d * (a * a + 1.0) * (a * a + 1.0)
        });
        assert!(frobenius(&(&got - &want)) < 1e-12);
    }

    #[test]
    fn first_order_with_identity_is_derivative() {
        let x = SpectralOperator::from_real_diagonal(&[0.5, 1.0, 3.0]).unwrap();
        let out = simplex_fm(1.0, &x, &[identity(3)], 16).unwrap();
        for (i, l) in [0.5f64, 1.0, 3.0].iter().enumerate() {
            assert!((out[(i, i)].re - (-l).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn second_order_matches_simplex_integral() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = SpectralOperator::new(random_hermitian(&mut rng, 6, 3.0)).unwrap();
        let v = vec![random_matrix(&mut rng, 6), random_matrix(&mut rng, 6)];
        let xi = 0.7;
        let quad = simplex_fm(xi, &x, &v, 20).unwrap();
        let spec = moi_spectral(&x.scaled(xi), &FunctionSpec::neg_exp(), &v).unwrap();
        assert!(frobenius(&(&quad - &spec)) < 1e-8 * frobenius(&spec));
    }

    #[test]
    fn identities_hold_for_fkd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = SpectralOperator::new(random_hermitian(&mut rng, 5, 4.0)).unwrap();
        let y = random_matrix(&mut rng, 5);
        let v = vec![random_matrix(&mut rng, 5), random_matrix(&mut rng, 5)];
        let dev = check_commutator_identities(&x, &crate::divdiff::fkd(2, 3), &y, &v).unwrap();
        assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn rejects_mismatched_operands() {
        let x = SpectralOperator::from_real_diagonal(&[1.0, 2.0]).unwrap();
        assert!(matches!(
            moi_spectral(&x, &FunctionSpec::log(), &[identity(3)]),
            Err(MoiError::Dimension { .. })
        ));
        let y = SpectralOperator::from_real_diagonal(&[-1.0, 2.0]).unwrap();
        assert!(matches!(moi_spectral(&y, &FunctionSpec::log(), &[]), Err(MoiError::NonPositive(_))));
    }
}
