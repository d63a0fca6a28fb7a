//! Rational functions of the dimension symbol `d` of the shape `q / ((d+j1)(d+j2)...)`.

use num_rational::Rational64;
use num_traits::{One, Zero};
use std::fmt;

/// `numerator / prod (d + shift)`, exact.
///
/// Two coefficients can only be added when they share the same denominator
/// (the same *family*); terms of different families are kept apart by the
/// expression engine.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoefficientFunction {
    pub shifts: Vec<u32>,
    pub numerator: Rational64,
}

impl CoefficientFunction {
    pub fn new(numerator: Rational64, mut shifts: Vec<u32>) -> Self {
        shifts.sort_unstable();
        CoefficientFunction { shifts, numerator }
    }

    pub fn constant(q: Rational64) -> Self {
        CoefficientFunction { shifts: Vec::new(), numerator: q }
    }

    pub fn integer(n: i64) -> Self {
        Self::constant(Rational64::from_integer(n))
    }

    pub fn one() -> Self {
        Self::integer(1)
    }

    pub fn zero() -> Self {
        Self::integer(0)
    }

    /// `1/(d(d+2)...(d+2(p-1)))`, the contribution of one perfect matching of `2p` slots.
    pub fn pairing(p: usize) -> Self {
        Self::new(Rational64::one(), (0..p as u32).map(|j| 2 * j).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    pub fn same_family(&self, other: &Self) -> bool {
        self.shifts == other.shifts
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut shifts = self.shifts.clone();
        shifts.extend_from_slice(&other.shifts);
        Self::new(self.numerator * other.numerator, shifts)
    }

    pub fn scale(&self, q: Rational64) -> Self {
        CoefficientFunction { shifts: self.shifts.clone(), numerator: self.numerator * q }
    }

    /// Value at a concrete dimension.
    pub fn eval(&self, d: i64) -> Rational64 {
        let den = self.shifts.iter().fold(1i64, |acc, &j| acc * (d + j as i64));
        self.numerator / Rational64::from_integer(den)
    }

    pub fn eval_f64(&self, d: f64) -> f64 {
        let num = *self.numerator.numer() as f64 / *self.numerator.denom() as f64;
        self.shifts.iter().fold(num, |acc, &j| acc / (d + j as f64))
    }

    /// Denominator as LaTeX, e.g. `d(d+2)`; empty for family 1.
    pub fn denominator_latex(&self) -> String {
        self.shifts
            .iter()
            .map(|&j| if j == 0 { "d".to_string() } else { format!("(d+{j})") })
            .collect()
    }
}

impl Default for CoefficientFunction {
    fn default() -> Self {
        Self::one()
    }
}

/// Sum of two coefficients. Zero absorbs across families; otherwise `None`
/// when the denominators differ.
pub fn coeff_add(a: &CoefficientFunction, b: &CoefficientFunction) -> Option<CoefficientFunction> {
    if a.is_zero() {
        return Some(b.clone());
    }
    if b.is_zero() {
        return Some(a.clone());
    }
    if !a.same_family(b) {
        return None;
    }
    let n = a.numerator + b.numerator;
    if n.is_zero() {
        Some(CoefficientFunction::zero())
    } else {
        Some(CoefficientFunction { shifts: a.shifts.clone(), numerator: n })
    }
}

impl fmt::Display for CoefficientFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.numerator)?;
        if !self.shifts.is_empty() {
            write!(f, "/({})", self.denominator_latex())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, m: i64) -> Rational64 {
        Rational64::new(n, m)
    }

    #[test]
    fn add_within_family() {
        let a = CoefficientFunction::new(q(1, 1), vec![0]);
        assert_eq!(coeff_add(&a, &a).unwrap(), CoefficientFunction::new(q(2, 1), vec![0]));
        let b = CoefficientFunction::new(q(3, 1), vec![0, 2]);
        let c = CoefficientFunction::new(q(1, 1), vec![2, 0]);
        assert_eq!(coeff_add(&b, &c).unwrap(), CoefficientFunction::new(q(4, 1), vec![0, 2]));
        let one = CoefficientFunction::one();
        let minus = CoefficientFunction::integer(-1);
        assert!(coeff_add(&one, &minus).unwrap().is_zero());
    }

    #[test]
    fn add_across_families_is_refused() {
        let a = CoefficientFunction::one();
        let b = CoefficientFunction::pairing(1);
        assert!(coeff_add(&a, &b).is_none());
        assert_eq!(coeff_add(&CoefficientFunction::zero(), &b).unwrap(), b);
    }

    #[test]
    fn evaluation() {
        assert_eq!(CoefficientFunction::pairing(1).eval(2), q(1, 2));
        let c = CoefficientFunction::new(q(3, 1), vec![0, 2]);
        assert_eq!(c.eval(4), q(1, 8));
        assert_eq!(CoefficientFunction::one().eval(7), q(1, 1));
        assert!((c.eval_f64(4.0) - 0.125).abs() < 1e-15);
    }
}
