//! The recursive maps `T^{x,m}_f` on formal differential operators and the
//! enumeration producing the local invariants `I_k`.

use crate::coeff::CoefficientFunction;
use crate::term::{canonical_args, Atom, Generator, Label, Labels, MoiExpression, TermKey, XTerm};
use num_rational::Rational64;
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecursionError {
    #[error("order k must be even, got {0}")]
    OddOrder(u32),
}

#[derive(Clone, Debug)]
struct Slot {
    atom: Atom,
    formal: Labels,
}

/// Expands `T^{x,m}_f(args)` where every argument is a sum of [`XTerm`]s.
/// The result is canonical; its symbol order is tagged with `k`.
pub fn expand_t(k: u32, args: &[Vec<XTerm>]) -> MoiExpression {
    let mut out = MoiExpression::new(k);
    for_each_product(args, |coeff, raw| {
        for (args, w) in raw {
            out.add(&coeff.scale(Rational64::from_integer(w)), &args);
        }
    });
    out.drop_zeros();
    out
}

/// Like [`expand_t`] but treating every index as fixed: argument lists are
/// merged only when literally equal, never up to relabeling.
pub fn expand_t_fixed(args: &[Vec<XTerm>]) -> BTreeMap<(Vec<u32>, Vec<Atom>), Rational64> {
    let mut out: BTreeMap<(Vec<u32>, Vec<Atom>), Rational64> = BTreeMap::new();
    for_each_product(args, |coeff, raw| {
        for (args, w) in raw {
            *out.entry((coeff.shifts.clone(), args)).or_default() += coeff.numerator * w;
        }
    });
    out.retain(|_, q| *q != Rational64::from_integer(0));
    out
}

fn for_each_product(args: &[Vec<XTerm>], mut sink: impl FnMut(&CoefficientFunction, HashMap<Vec<Atom>, i64>)) {
    if args.iter().any(|a| a.is_empty()) {
        return;
    }
    let mut choice = vec![0usize; args.len()];
    loop {
        let mut coeff = CoefficientFunction::one();
        let mut slots = Vec::with_capacity(args.len());
        for (j, &c) in choice.iter().enumerate() {
            let t = &args[j][c];
            coeff = coeff.mul(&t.coeff);
            slots.push(Slot { atom: t.atom.clone(), formal: t.formal.clone() });
        }
        let mut raw: HashMap<Vec<Atom>, i64> = HashMap::new();
        expand_slots(slots, 1, &mut raw);
        sink(&coeff, raw);
        if !advance(&mut choice, args) {
            break;
        }
    }
}

fn advance(choice: &mut [usize], args: &[Vec<XTerm>]) -> bool {
    for j in (0..choice.len()).rev() {
        choice[j] += 1;
        if choice[j] < args[j].len() {
            return true;
        }
        choice[j] = 0;
    }
    false
}

/// Core rewriting loop on a single product of slots, accumulating integer
/// multiplicities of base-case argument lists (labels not yet canonical).
fn expand_slots(slots: Vec<Slot>, weight: i64, sink: &mut HashMap<Vec<Atom>, i64>) {
    let mut stack = vec![(weight, slots)];
    while let Some((w, mut s)) = stack.pop() {
        // Rightmost slot still carrying a formal derivative: everything to its
        // right is an algebra element, so the rules apply directly.
        let Some(k) = s.iter().rposition(|slot| !slot.formal.is_empty()) else {
            *sink.entry(s.into_iter().map(|slot| slot.atom).collect()).or_insert(0) += w;
            continue;
        };
        let i = s[k].formal.pop().expect("nonempty");
        let dx = Slot { atom: Atom::new(Generator::X, &[i]), formal: Labels::new() };
        if k + 1 == s.len() {
            s.push(dx);
            stack.push((w, s));
            continue;
        }
        // insert D_i x after slot k
        let mut ins = Vec::with_capacity(s.len() + 1);
        ins.extend_from_slice(&s[..=k]);
        ins.push(dx);
        ins.extend_from_slice(&s[k + 1..]);
        stack.push((w, ins));
        // differentiate the next argument
        let mut dif = s.clone();
        dif[k + 1].atom = dif[k + 1].atom.differentiate(i);
        stack.push((w, dif));
        // carry D_i over to the next argument
        s[k + 1].formal.push(i);
        stack.push((w, s));
    }
}

/// `c_d` for an index pattern with multiplicities `n_j`: zero if any is odd,
/// else `prod (n_j-1)!! / prod_{j<|n|/2} (d+2j)`.
pub fn sphere_moment(multiplicities: &[u32]) -> CoefficientFunction {
    if multiplicities.iter().any(|n| n % 2 == 1) {
        return CoefficientFunction::zero();
    }
    let total: u32 = multiplicities.iter().sum();
    let num: i64 = multiplicities.iter().map(|&n| double_factorial(n as i64 - 1)).product();
    CoefficientFunction::new(Rational64::from_integer(num), (0..total / 2).map(|j| 2 * j).collect())
}

fn double_factorial(n: i64) -> i64 {
    if n <= 0 {
        1
    } else {
        n * double_factorial(n - 2)
    }
}

/// Role of one argument slot of a block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SlotSpec {
    /// `2x D_i + a_i` with the pair label `i`.
    A(Label),
    /// `x D_i D_i + a_i D_i + a` with its own summed label `i`.
    P(Label),
}

/// One top-level summand of the main formula: block size `m`, the subset of
/// A-slots, and one perfect matching of them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub m: usize,
    pub a_set: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
    pub coeff: CoefficientFunction,
    pub slots: Vec<SlotSpec>,
}

/// All blocks for order `k`, in a fixed order.
///
/// The sum over index maps on the A-slots is collapsed with Isserlis' rule:
/// the sphere moment of a pattern equals the number of perfect matchings
/// compatible with it divided by `d(d+2)...`, so summing over patterns in
/// Einstein notation is the same as summing over perfect matchings, each with
/// one summed label per pair and coefficient `1/(d(d+2)...)`.
pub fn enumerate_blocks(k: u32) -> Result<Vec<Block>, RecursionError> {
    if k % 2 == 1 {
        return Err(RecursionError::OddOrder(k));
    }
    let k = k as usize;
    let mut blocks = Vec::new();
    for m in k / 2..=k {
        let na = 2 * m - k;
        for a_set in combinations(m, na) {
            for pairs in matchings(&a_set) {
                let mut slots = vec![SlotSpec::P(0); m];
                for (p, &(u, v)) in pairs.iter().enumerate() {
                    slots[u] = SlotSpec::A(p as Label);
                    slots[v] = SlotSpec::A(p as Label);
                }
                let mut next = pairs.len() as Label;
                for (j, s) in slots.iter_mut().enumerate() {
                    if !a_set.contains(&j) {
                        *s = SlotSpec::P(next);
                        next += 1;
                    }
                }
                blocks.push(Block { m, a_set: a_set.clone(), pairs, coeff: CoefficientFunction::pairing(na / 2), slots });
            }
        }
    }
    Ok(blocks)
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    rec(0, n, r, &mut cur, &mut out);
    out
}

/// Perfect matchings of an even-sized set, pairs listed by smallest element.
pub fn matchings(set: &[usize]) -> Vec<Vec<(usize, usize)>> {
    if set.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let first = set[0];
    for j in 1..set.len() {
        let rest: Vec<usize> = set[1..].iter().enumerate().filter(|&(t, _)| t + 1 != j).map(|(_, &v)| v).collect();
        for mut m in matchings(&rest) {
            m.insert(0, (first, set[j]));
            out.push(m);
        }
    }
    out
}

/// The formal symbols `A_i` and `P` as sums of [`XTerm`]s.
pub fn slot_terms(spec: SlotSpec) -> Vec<XTerm> {
    let one = CoefficientFunction::one();
    match spec {
        SlotSpec::A(i) => vec![
            XTerm::new(CoefficientFunction::integer(2), Atom::x(), &[i]),
            XTerm::new(one, Atom::new(Generator::A(i), &[]), &[]),
        ],
        SlotSpec::P(i) => vec![
            XTerm::new(one.clone(), Atom::x(), &[i, i]),
            XTerm::new(one.clone(), Atom::new(Generator::A(i), &[]), &[i]),
            XTerm::new(one, Atom::new(Generator::Apot, &[]), &[]),
        ],
    }
}

/// Expansion of a single block, not yet multiplied by the block coefficient.
pub fn expand_block(block: &Block) -> HashMap<Vec<Atom>, i64> {
    let args: Vec<Vec<XTerm>> = block.slots.iter().map(|&s| slot_terms(s)).collect();
    let mut choices: Vec<Vec<usize>> = vec![Vec::new()];
    for a in &args {
        choices = choices
            .into_iter()
            .flat_map(|c| {
                (0..a.len()).map(move |j| {
                    let mut c = c.clone();
                    c.push(j);
                    c
                })
            })
            .collect();
    }
    let parts: Vec<HashMap<Vec<Atom>, i64>> = choices
        .par_iter()
        .map(|choice| {
            let mut w = 1i64;
            let mut slots = Vec::with_capacity(choice.len());
            for (j, &c) in choice.iter().enumerate() {
                let t = &args[j][c];
                w *= *t.coeff.numerator.numer();
                slots.push(Slot { atom: t.atom.clone(), formal: t.formal.clone() });
            }
            let mut raw = HashMap::new();
            expand_slots(slots, w, &mut raw);
            let mut canon: HashMap<Vec<Atom>, i64> = HashMap::with_capacity(raw.len());
            for (a, w) in raw {
                *canon.entry(canonical_args(&a)).or_insert(0) += w;
            }
            canon
        })
        .collect();
    let mut out: HashMap<Vec<Atom>, i64> = HashMap::new();
    for p in parts {
        for (a, w) in p {
            *out.entry(a).or_insert(0) += w;
        }
    }
    out
}

/// `(-1)^{k/2} pi^{-d/2} I_k` as a canonical expression; `sign` carries `(-1)^{k/2}`.
pub fn local_invariant(k: u32) -> Result<MoiExpression, RecursionError> {
    let blocks = enumerate_blocks(k)?;
    let parts: Vec<(CoefficientFunction, HashMap<Vec<Atom>, i64>)> =
        blocks.iter().map(|b| (b.coeff.clone(), expand_block(b))).collect();
    let mut out = MoiExpression::new(k);
    out.sign = if (k / 2).is_multiple_of(2) { 1 } else { -1 };
    for (coeff, raw) in parts {
        for (args, w) in raw {
            let q = coeff.numerator * Rational64::from_integer(w);
            out.add_keyed(TermKey { family: coeff.shifts.clone(), args }, q);
        }
    }
    out.drop_zeros();
    Ok(out)
}

/// Number of canonical terms of `I_k`.
pub fn count(k: u32) -> Result<usize, RecursionError> {
    Ok(local_invariant(k)?.len())
}
