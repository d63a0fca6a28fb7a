//! Formal differential operators, multiple-operator-integral terms and their
//! canonical form under relabeling of summed indices.

use crate::coeff::{coeff_add, CoefficientFunction};
use num_rational::Rational64;
use num_traits::Zero;
use smallvec::SmallVec;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

/// Abstract index label, implicitly summed over `1..=d`.
pub type Label = u8;

pub type Labels = SmallVec<[Label; 6]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Generator {
    X,
    /// First-order coefficient `a_i`.
    A(Label),
    /// Zeroth-order coefficient `a`.
    Apot,
}

impl Generator {
    fn relabel(self, map: &[Label]) -> Self {
        match self {
            Generator::A(l) => Generator::A(map[l as usize]),
            g => g,
        }
    }
}

/// `D^alpha g`: a generator with a sorted multiset of applied derivatives.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub generator: Generator,
    pub derivs: Labels,
}

impl Atom {
    pub fn new(generator: Generator, derivs: &[Label]) -> Self {
        let mut d: Labels = derivs.iter().copied().collect();
        d.sort_unstable();
        Atom { generator, derivs: d }
    }

    pub fn x() -> Self {
        Atom::new(Generator::X, &[])
    }

    /// `D_i` applied to this atom.
    pub fn differentiate(&self, i: Label) -> Self {
        let mut derivs = self.derivs.clone();
        let pos = derivs.partition_point(|&l| l <= i);
        derivs.insert(pos, i);
        Atom { generator: self.generator, derivs }
    }

    pub fn order(&self) -> usize {
        self.derivs.len()
    }

    fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        let g = match self.generator {
            Generator::A(l) => Some(l),
            _ => None,
        };
        g.into_iter().chain(self.derivs.iter().copied())
    }

    fn relabel(&self, map: &[Label]) -> Self {
        let mut derivs: Labels = self.derivs.iter().map(|&l| map[l as usize]).collect();
        derivs.sort_unstable();
        Atom { generator: self.generator.relabel(map), derivs }
    }
}

/// `coeff * (D^alpha g) * D_formal`, where the formal derivatives are an
/// ordered word that the recursion consumes from the right.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XTerm {
    pub coeff: CoefficientFunction,
    pub atom: Atom,
    pub formal: Labels,
}

impl XTerm {
    pub fn new(coeff: CoefficientFunction, atom: Atom, formal: &[Label]) -> Self {
        XTerm { coeff, atom, formal: formal.iter().copied().collect() }
    }

    pub fn pure(atom: Atom) -> Self {
        XTerm::new(CoefficientFunction::one(), atom, &[])
    }

    pub fn is_pure(&self) -> bool {
        self.formal.is_empty()
    }
}

/// One summand `coeff * T^x_{F^{[m]}}(args)`; `m = args.len()`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MoiTerm {
    pub coeff: CoefficientFunction,
    pub args: Vec<Atom>,
}

impl MoiTerm {
    pub fn order(&self) -> usize {
        self.args.len()
    }
}

/// Key identifying a canonical term: its coefficient family and its arguments.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermKey {
    pub family: Vec<u32>,
    pub args: Vec<Atom>,
}

/// Canonical sum of MOI terms sharing the symbol `F_{k,d}`.
///
/// The global prefactor `(-1)^{k/2} pi^{d/2}` of a local invariant is kept as
/// metadata (`sign`) and is not folded into the coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MoiExpression {
    pub k: u32,
    pub sign: i8,
    terms: BTreeMap<TermKey, Rational64>,
}

impl MoiExpression {
    pub fn new(k: u32) -> Self {
        MoiExpression { k, sign: 1, terms: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds a term as given, without relabeling.
    pub fn add_raw(&mut self, coeff: &CoefficientFunction, args: Vec<Atom>) {
        let key = TermKey { family: coeff.shifts.clone(), args };
        let e = self.terms.entry(key).or_insert_with(Rational64::zero);
        *e += coeff.numerator;
    }

    /// Adds a term after bringing its indices to canonical form.
    pub fn add(&mut self, coeff: &CoefficientFunction, args: &[Atom]) {
        self.add_raw(coeff, canonical_args(args));
    }

    pub fn add_keyed(&mut self, key: TermKey, q: Rational64) {
        *self.terms.entry(key).or_insert_with(Rational64::zero) += q;
    }

    pub fn merge(&mut self, other: MoiExpression) {
        for (key, q) in other.terms {
            self.add_keyed(key, q);
        }
        self.drop_zeros();
    }

    pub fn drop_zeros(&mut self) {
        self.terms.retain(|_, q| !q.is_zero());
    }

    pub fn scale(&mut self, q: Rational64) {
        for v in self.terms.values_mut() {
            *v *= q;
        }
        self.drop_zeros();
    }

    pub fn terms(&self) -> impl Iterator<Item = MoiTerm> + '_ {
        self.terms.iter().map(|(key, q)| MoiTerm {
            coeff: CoefficientFunction::new(*q, key.family.clone()),
            args: key.args.clone(),
        })
    }

    pub fn keyed(&self) -> impl Iterator<Item = (&TermKey, &Rational64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, family: &[u32], args: &[Atom]) -> Option<CoefficientFunction> {
        let key = TermKey { family: family.to_vec(), args: args.to_vec() };
        self.terms.get(&key).map(|q| CoefficientFunction::new(*q, key.family))
    }

    /// Distinct coefficient families in ascending order.
    pub fn families(&self) -> Vec<Vec<u32>> {
        let mut f: Vec<Vec<u32>> = self.terms.keys().map(|k| k.family.clone()).collect();
        f.dedup();
        f.sort();
        f.dedup();
        f
    }

    /// Terms per family.
    pub fn family_counts(&self) -> BTreeMap<Vec<u32>, usize> {
        let mut out = BTreeMap::new();
        for key in self.terms.keys() {
            *out.entry(key.family.clone()).or_insert(0) += 1;
        }
        out
    }
}

/// Re-canonicalizes every term and merges coincident ones. Idempotent.
pub fn canonicalize(expr: &MoiExpression) -> MoiExpression {
    let mut out = MoiExpression { k: expr.k, sign: expr.sign, terms: BTreeMap::new() };
    for (key, q) in expr.terms.iter() {
        let args = canonical_args(&key.args);
        out.add_keyed(TermKey { family: key.family.clone(), args }, *q);
    }
    out.drop_zeros();
    out
}

/// Adds two coefficient-carrying expressions term by term; used where callers
/// hold [`MoiTerm`] lists instead of expressions.
pub fn sum_terms(k: u32, terms: &[MoiTerm]) -> MoiExpression {
    let mut acc: HashMap<TermKey, CoefficientFunction> = HashMap::new();
    for t in terms {
        let key = TermKey { family: t.coeff.shifts.clone(), args: canonical_args(&t.args) };
        let e = acc.entry(key).or_insert_with(CoefficientFunction::zero);
        *e = coeff_add(e, &t.coeff).expect("keyed by family");
    }
    let mut out = MoiExpression::new(k);
    for (key, c) in acc {
        out.add_keyed(key, c.numerator);
    }
    out.drop_zeros();
    out
}

/// Evaluates all coefficients at a concrete dimension. Terms that share
/// arguments across families are merged, so the result is keyed by arguments only.
pub fn substitute_dimension(expr: &MoiExpression, d: i64) -> Result<BTreeMap<Vec<Atom>, Rational64>, String> {
    if d < 2 {
        return Err(format!("dimension must be at least 2, got {d}"));
    }
    let mut out: BTreeMap<Vec<Atom>, Rational64> = BTreeMap::new();
    for t in expr.terms() {
        *out.entry(t.args.clone()).or_insert_with(Rational64::zero) += t.coeff.eval(d);
    }
    out.retain(|_, q| !q.is_zero());
    Ok(out)
}

/// Canonical relabeling of a term's summed indices.
///
/// Labels are numbered by first occurrence, scanning the arguments left to
/// right. Ties between labels first met in the same atom are broken by taking
/// the lexicographically smallest resulting argument list, so the result does
/// not depend on the input labels.
pub fn canonical_args(args: &[Atom]) -> Vec<Atom> {
    let max = args.iter().flat_map(|a| a.labels()).max();
    let Some(max) = max else {
        return args.to_vec();
    };
    let n = max as usize + 1;
    let mut map = vec![Label::MAX; n];
    let mut best: Option<Vec<Atom>> = None;
    let mut prefix = Vec::with_capacity(args.len());
    search(args, 0, &mut map, 0, &mut prefix, &mut best);
    best.expect("at least one relabeling")
}

fn search(
    args: &[Atom],
    pos: usize,
    map: &mut Vec<Label>,
    next: Label,
    prefix: &mut Vec<Atom>,
    best: &mut Option<Vec<Atom>>,
) {
    if pos == args.len() {
        if best.as_ref().is_none_or(|b| prefix.as_slice() < b.as_slice()) {
            *best = Some(prefix.clone());
        }
        return;
    }
    let mut fresh: Labels = SmallVec::new();
    for l in args[pos].labels() {
        if map[l as usize] == Label::MAX && !fresh.contains(&l) {
            fresh.push(l);
        }
    }
    // Every ordering of the fresh labels gets the next consecutive numbers;
    // only orderings that minimize this atom survive to the next position.
    let mut candidates: Vec<(Atom, Labels)> = Vec::new();
    let mut perm = fresh.clone();
    perm.sort_unstable();
    loop {
        for (j, &l) in perm.iter().enumerate() {
            map[l as usize] = next + j as Label;
        }
        let atom = args[pos].relabel(map);
        match candidates.first() {
            Some((a, _)) if atom > *a => {}
            Some((a, _)) if atom < *a => {
                candidates.clear();
                candidates.push((atom, perm.clone()));
            }
            _ => candidates.push((atom, perm.clone())),
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    for &l in fresh.iter() {
        map[l as usize] = Label::MAX;
    }
    // Prune against the best complete term found so far.
    if let Some(b) = best.as_ref() {
        let cand = &candidates[0].0;
        match prefix.as_slice().cmp(&b[..pos]) {
            std::cmp::Ordering::Greater => return,
            std::cmp::Ordering::Equal if *cand > b[pos] => return,
            _ => {}
        }
    }
    for (atom, perm) in candidates {
        for (j, &l) in perm.iter().enumerate() {
            map[l as usize] = next + j as Label;
        }
        prefix.push(atom);
        search(args, pos + 1, map, next + perm.len() as Label, prefix, best);
        prefix.pop();
        for &l in perm.iter() {
            map[l as usize] = Label::MAX;
        }
    }
}

/// Lexicographic successor; `false` when `v` was the last permutation.
fn next_permutation(v: &mut [Label]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Every index label occurs an even number of times.
pub fn labels_balanced(args: &[Atom]) -> bool {
    let mut count = [0u8; 256];
    for a in args {
        for l in a.labels() {
            count[l as usize] ^= 1;
        }
    }
    count.iter().all(|&c| c == 0)
}

pub(crate) const LETTERS: [&str; 12] = ["i", "j", "k", "l", "p", "q", "r", "s", "t", "u", "v", "w"];

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &l in &self.derivs {
            write!(f, "D_{}", letter(l))?;
        }
        match self.generator {
            Generator::X => write!(f, "x"),
            Generator::A(l) => write!(f, "a_{}", letter(l)),
            Generator::Apot => write!(f, "a"),
        }
    }
}

pub(crate) fn letter(l: Label) -> String {
    LETTERS.get(l as usize).map(|s| s.to_string()).unwrap_or_else(|| format!("i_{{{l}}}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dx(ls: &[Label]) -> Atom {
        Atom::new(Generator::X, ls)
    }

    #[test]
    fn relabel_merge() {
        let mut e = MoiExpression::new(2);
        e.add(&CoefficientFunction::one(), &[dx(&[3]), dx(&[3])]);
        e.add(&CoefficientFunction::one(), &[dx(&[1]), dx(&[1])]);
        assert_eq!(e.len(), 1);
        let t = e.terms().next().unwrap();
        assert_eq!(t.coeff, CoefficientFunction::integer(2));
        assert_eq!(t.args, vec![dx(&[0]), dx(&[0])]);
    }

    #[test]
    fn zero_terms_vanish() {
        let mut e = MoiExpression::new(2);
        e.add(&CoefficientFunction::one(), &[dx(&[0, 0])]);
        e.add(&CoefficientFunction::integer(-1), &[dx(&[1, 1])]);
        e.drop_zeros();
        assert!(e.is_empty());
    }

    #[test]
    fn tie_break_inside_one_atom() {
        // D_jD_i x , D_i x , D_j x  vs its relabeled twin
        let a = vec![dx(&[5, 2]), dx(&[2]), dx(&[5])];
        let b = vec![dx(&[5, 2]), dx(&[5]), dx(&[2])];
        assert_eq!(canonical_args(&a), canonical_args(&b));
        assert_eq!(canonical_args(&a), vec![dx(&[0, 1]), dx(&[0]), dx(&[1])]);
    }

    #[test]
    fn generator_index_participates() {
        let a = vec![Atom::new(Generator::A(7), &[]), dx(&[7, 4]), dx(&[4])];
        let c = canonical_args(&a);
        assert_eq!(c, vec![Atom::new(Generator::A(0), &[]), dx(&[0, 1]), dx(&[1])]);
    }

    #[test]
    fn next_permutation_enumerates_all() {
        let mut v = [0u8, 1, 2];
        let mut n = 1;
        while next_permutation(&mut v) {
            n += 1;
        }
        assert_eq!(n, 6);
    }

    #[test]
    fn substitute_rejects_small_dimension() {
        let e = MoiExpression::new(0);
        assert!(substitute_dimension(&e, 1).is_err());
    }
}
