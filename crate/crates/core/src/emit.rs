//! LaTeX rendering of local invariants and a reader for the same notation.
//!
//! Terms are grouped by coefficient family (`1`, `1/d`, `1/(d(d+2))`, ...)
//! and, inside a family, by the number of summed indices, each group forming
//! one `\sum_{i,j,...}\frac{1}{...}\Bigg(...\Bigg)` block. The reader also
//! accepts an argument divided by `d` inside a sum over an index it does not
//! use, e.g. `\sum_{i}\Bigg(T^x_{F_{2,d}^{[1]}}(a/d)\Bigg)`.

use crate::coeff::CoefficientFunction;
use crate::term::{letter, Atom, Generator, Label, MoiExpression, LETTERS};
use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt::Write;
use thiserror::Error;

const TERMS_PER_LINE: usize = 3;

#[derive(Debug, Error, PartialEq)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

fn term_latex(k: u32, d: Option<i64>, args: &[Atom]) -> String {
    let dd = d.map_or("d".to_string(), |d| d.to_string());
    let joined: Vec<String> = args.iter().map(|a| a.to_string()).collect();
    format!("T^x_{{F_{{{k},{dd}}}^{{[{}]}}}}({})", args.len(), joined.join(","))
}

fn rational_latex(q: Rational64) -> String {
    let a = q.abs();
    if a.is_integer() {
        if a.is_one() {
            String::new()
        } else {
            a.numer().to_string()
        }
    } else {
        format!("\\frac{{{}}}{{{}}}", a.numer(), a.denom())
    }
}

fn signed_term(first: bool, q: Rational64, body: &str) -> String {
    let sign = if q.is_negative() {
        "-"
    } else if first {
        ""
    } else {
        "+"
    };
    format!("{sign}{}{body}", rational_latex(q))
}

fn distinct_labels(args: &[Atom]) -> usize {
    let mut seen = [false; 256];
    let mut n = 0;
    for a in args {
        let g = match a.generator {
            Generator::A(l) => Some(l),
            _ => None,
        };
        for l in g.into_iter().chain(a.derivs.iter().copied()) {
            if !seen[l as usize] {
                seen[l as usize] = true;
                n += 1;
            }
        }
    }
    n
}

fn render_groups(groups: Vec<(String, Vec<(Rational64, String)>)>, sign: i8, k: u32) -> String {
    let lhs = if sign < 0 { "-" } else { "" };
    let mut out = String::new();
    let mut line = format!("{lhs}\\pi^{{-d/2}}I_{{{k}}}=");
    let mut first_item = true;
    let mut on_line = 0;
    let flush = |line: &mut String, out: &mut String| {
        writeln!(out, "$${line}$$").unwrap();
        line.clear();
    };
    for (header, terms) in groups {
        if header.is_empty() {
            for (q, body) in terms {
                if on_line == TERMS_PER_LINE {
                    flush(&mut line, &mut out);
                    on_line = 0;
                }
                line.push_str(&signed_term(first_item, q, &body));
                first_item = false;
                on_line += 1;
            }
            continue;
        }
        if on_line > 0 && !first_item {
            flush(&mut line, &mut out);
        }
        if !first_item {
            line.push('+');
        }
        line.push_str(&header);
        line.push_str("\\Bigg(");
        on_line = 0;
        let mut first_in_block = true;
        for (q, body) in terms {
            if on_line == TERMS_PER_LINE {
                flush(&mut line, &mut out);
                on_line = 0;
            }
            line.push_str(&signed_term(first_in_block, q, &body));
            first_in_block = false;
            on_line += 1;
        }
        line.push_str("\\Bigg)");
        first_item = false;
        flush(&mut line, &mut out);
        on_line = 0;
    }
    if !line.is_empty() {
        if first_item {
            line.push('0');
        }
        flush(&mut line, &mut out);
    }
    out
}

fn sum_header(labels: usize, family: &[u32]) -> String {
    if labels == 0 && family.is_empty() {
        return String::new();
    }
    let mut h = String::new();
    if labels > 0 {
        let letters: Vec<String> = (0..labels).map(|l| letter(l as Label)).collect();
        write!(h, "\\sum_{{{}}}", letters.join(",")).unwrap();
    }
    if !family.is_empty() {
        let c = CoefficientFunction::new(Rational64::one(), family.to_vec());
        write!(h, "\\frac{{1}}{{{}}}", c.denominator_latex()).unwrap();
    }
    h
}

/// LaTeX for `(-1)^{k/2} pi^{-d/2} I_k` with symbolic `d`.
pub fn emit(expr: &MoiExpression) -> String {
    let mut groups: BTreeMap<(Vec<u32>, usize), Vec<(Rational64, String)>> = BTreeMap::new();
    for (key, q) in expr.keyed() {
        let n = distinct_labels(&key.args);
        groups.entry((key.family.clone(), n)).or_default().push((*q, term_latex(expr.k, None, &key.args)));
    }
    let blocks = groups.into_iter().map(|((fam, n), terms)| (sum_header(n, &fam), terms)).collect();
    render_groups(blocks, expr.sign, expr.k)
}

/// LaTeX with the dimension substituted; all coefficients become rationals.
pub fn emit_at_dimension(expr: &MoiExpression, d: i64) -> Result<String, String> {
    let subst = crate::term::substitute_dimension(expr, d)?;
    let mut groups: BTreeMap<usize, Vec<(Rational64, String)>> = BTreeMap::new();
    for (args, q) in subst {
        groups.entry(distinct_labels(&args)).or_default().push((q, term_latex(expr.k, Some(d), &args)));
    }
    let blocks = groups.into_iter().map(|(n, terms)| (sum_header(n, &[]), terms)).collect();
    let text = render_groups(blocks, expr.sign, expr.k);
    Ok(text.replace("\\pi^{-d/2}", &format!("\\pi^{{-{d}/2}}")))
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { pos: self.pos, msg: msg.into() })
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn starts(&self, lit: &str) -> bool {
        self.s[self.pos..].starts_with(lit.as_bytes())
    }

    fn eat(&mut self, lit: &str) -> bool {
        if self.starts(lit) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &str) -> Result<(), ParseError> {
        if self.eat(lit) {
            Ok(())
        } else {
            self.err(format!("expected `{lit}`"))
        }
    }

    fn number(&mut self) -> Result<i64, ParseError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .unwrap()
            .parse()
            .or_else(|_| self.err("expected a number"))
    }

    fn braced(&mut self) -> Result<&'a str, ParseError> {
        self.expect("{")?;
        let start = self.pos;
        let mut depth = 1;
        while let Some(c) = self.peek() {
            match c {
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        let inner = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                        self.pos += 1;
                        return Ok(inner);
                    }
                }
                _ => {}
            }
            self.pos += 1;
        }
        self.err("unbalanced braces")
    }

    /// `{...}` or a single character, as after `_` or `^`.
    fn subscript(&mut self) -> Result<&'a str, ParseError> {
        if self.starts("{") {
            return self.braced();
        }
        match self.peek() {
            Some(c) if c.is_ascii_alphanumeric() => {
                self.pos += 1;
                Ok(std::str::from_utf8(&self.s[self.pos - 1..self.pos]).unwrap())
            }
            _ => self.err("expected a subscript"),
        }
    }

    fn letter(&mut self) -> Result<Label, ParseError> {
        if self.eat("i_{") {
            let n = self.number()?;
            self.expect("}")?;
            return Ok(n as Label);
        }
        for (idx, l) in LETTERS.iter().enumerate() {
            if self.eat(l) {
                return Ok(idx as Label);
            }
        }
        self.err("expected an index letter")
    }

    /// `D_iD_jx`, `a_i`, `a`, optionally followed by `/d`.
    fn atom(&mut self) -> Result<(Atom, bool), ParseError> {
        let mut derivs = Vec::new();
        while self.eat("D_") {
            derivs.push(self.letter()?);
        }
        let generator = if self.eat("x") {
            Generator::X
        } else if self.eat("a_") {
            Generator::A(self.letter()?)
        } else if self.eat("a") {
            Generator::Apot
        } else {
            return self.err("expected x, a_i or a");
        };
        let over_d = self.eat("/d");
        Ok((Atom::new(generator, &derivs), over_d))
    }

    fn coefficient(&mut self) -> Result<Rational64, ParseError> {
        if self.eat("\\frac") {
            let num: i64 = self.braced()?.parse().or_else(|_| self.err("bad numerator"))?;
            let den: i64 = self.braced()?.parse().or_else(|_| self.err("bad denominator"))?;
            return Ok(Rational64::new(num, den));
        }
        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            return Ok(Rational64::from_integer(self.number()?));
        }
        Ok(Rational64::one())
    }

    fn family(&mut self) -> Result<Vec<u32>, ParseError> {
        // \frac{1}{d(d+2)...}
        let save = self.pos;
        if !self.eat("\\frac{1}{") {
            return Ok(Vec::new());
        }
        let mut shifts = Vec::new();
        loop {
            if self.eat("}") {
                break;
            } else if self.eat("d") {
                shifts.push(0);
            } else if self.eat("(d+") {
                shifts.push(self.number()? as u32);
                self.expect(")")?;
            } else {
                self.pos = save;
                return Ok(Vec::new());
            }
        }
        Ok(shifts)
    }

    fn term(&mut self, k_seen: &mut Option<u32>) -> Result<(Vec<Atom>, u32), ParseError> {
        self.expect("T^x_{F_{")?;
        let k = self.number()?;
        self.expect(",")?;
        if !self.eat("d") {
            self.number()?;
        }
        self.expect("}^{[")?;
        let m = self.number()?;
        self.expect("]}}(")?;
        let mut args = Vec::new();
        let mut over = 0;
        if !self.eat(")") {
            loop {
                let (a, o) = self.atom()?;
                args.push(a);
                over += o as u32;
                if self.eat(")") {
                    break;
                }
                self.expect(",")?;
            }
        }
        if args.len() as i64 != m {
            return self.err(format!("superscript [{m}] but {} arguments", args.len()));
        }
        match k_seen {
            Some(k0) if *k0 as i64 != k => return self.err("mixed orders"),
            _ => *k_seen = Some(k as u32),
        }
        Ok((args, over))
    }
}

/// Reads text produced by [`emit`] (or written in the same notation) back
/// into a canonical expression.
pub fn parse(text: &str) -> Result<MoiExpression, ParseError> {
    let cleaned: String = text.replace("$$", "").chars().filter(|c| !c.is_whitespace()).collect();
    let mut p = Parser { s: cleaned.as_bytes(), pos: 0 };
    let sign: i8 = if p.eat("-") { -1 } else { 1 };
    p.expect("\\pi^{-d/2}I_")?;
    let k = p.subscript()?.parse::<u32>().or_else(|_| p.err("bad order"))?;
    p.expect("=")?;
    let mut expr = MoiExpression::new(k);
    expr.sign = sign;
    let mut k_seen = Some(k);
    let mut outer_sign = Rational64::one();
    let mut first = true;
    while p.pos < p.s.len() {
        if p.eat("+") {
            outer_sign = Rational64::one();
        } else if p.eat("-") {
            outer_sign = -Rational64::one();
        } else if !first {
            return p.err("expected + or -");
        }
        first = false;
        if p.eat("0") {
            continue;
        }
        if p.starts("\\sum_") || (p.starts("\\frac{1}{d") && !p.starts("\\frac{1}{d}T")) {
            let mut summed = 0usize;
            if p.eat("\\sum_") {
                summed = p.braced()?.split(',').count();
            }
            let family = p.family()?;
            p.expect("\\Bigg(")?;
            let mut inner_first = true;
            loop {
                if p.eat("\\Bigg)") {
                    break;
                }
                let mut s = outer_sign;
                if p.eat("-") {
                    s = -s;
                } else if !p.eat("+") && !inner_first {
                    return p.err("expected + or - inside block");
                }
                inner_first = false;
                let q = p.coefficient()? * s;
                let (args, over) = p.term(&mut k_seen)?;
                let missing = summed.saturating_sub(crate::emit::distinct_labels(&args)) as u32;
                add_term(&mut expr, q, &family, args, over, missing).map_err(|msg| ParseError { pos: p.pos, msg })?;
            }
        } else {
            let q = p.coefficient()? * outer_sign;
            let (args, over) = p.term(&mut k_seen)?;
            add_term(&mut expr, q, &[], args, over, 0).map_err(|msg| ParseError { pos: p.pos, msg })?;
        }
    }
    Ok(expr)
}

/// `missing` summed indices unused by the term contribute `d^missing`, which
/// must cancel against `/d` arguments or the family denominator.
fn add_term(expr: &mut MoiExpression, q: Rational64, family: &[u32], args: Vec<Atom>, over: u32, missing: u32) -> Result<(), String> {
    let mut shifts: Vec<u32> = family.to_vec();
    shifts.extend(std::iter::repeat_n(0, over as usize));
    for _ in 0..missing {
        match shifts.iter().position(|&s| s == 0) {
            Some(i) => {
                shifts.remove(i);
            }
            None => return Err("index summed over a term that does not use it".into()),
        }
    }
    if q.is_zero() {
        return Ok(());
    }
    expr.add(&CoefficientFunction::new(q, shifts), &args);
    Ok(())
}

/// Term-by-term comparison; one line per disagreement, empty when equal.
pub fn diff(expected: &MoiExpression, actual: &MoiExpression) -> Vec<String> {
    let mut out = Vec::new();
    if expected.sign != actual.sign {
        out.push(format!("sign: expected {} got {}", expected.sign, actual.sign));
    }
    let show = |key: &crate::term::TermKey, q: &Rational64| {
        let c = CoefficientFunction::new(*q, key.family.clone());
        format!("({c}) {}", term_latex(expected.k, None, &key.args))
    };
    let exp: BTreeMap<_, _> = expected.keyed().collect();
    let act: BTreeMap<_, _> = actual.keyed().collect();
    for (key, q) in &exp {
        match act.get(key) {
            None => out.push(format!("- {}", show(key, q))),
            Some(r) if r != q => out.push(format!("~ {} vs {}", show(key, q), show(key, r))),
            _ => {}
        }
    }
    for (key, q) in &act {
        if !exp.contains_key(key) {
            out.push(format!("+ {}", show(key, q)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recursion::local_invariant;

    #[test]
    fn zeroth_order() {
        let e = local_invariant(0).unwrap();
        assert_eq!(emit(&e).trim(), "$$\\pi^{-d/2}I_{0}=T^x_{F_{0,d}^{[0]}}()$$");
    }

    #[test]
    fn round_trip_second_order() {
        let e = local_invariant(2).unwrap();
        let text = emit(&e);
        assert_eq!(parse(&text).unwrap(), e);
    }

    #[test]
    fn reads_over_d_arguments() {
        let text = "-\\pi^{-d/2}I_{2}=\\sum_{i}\\Bigg(T^x_{F_{2,d}^{[1]}}(a/d)+T^x_{F_{2,d}^{[2]}}(a_i,D_ix)\\Bigg)";
        let e = parse(text).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e.coefficient(&[], &[Atom::new(Generator::Apot, &[])]), Some(CoefficientFunction::one()));
    }

    #[test]
    fn rejects_arity_mismatch() {
        assert!(parse("\\pi^{-d/2}I_{2}=T^x_{F_{2,d}^{[2]}}(x)").is_err());
    }

    #[test]
    fn concrete_dimension() {
        let e = local_invariant(2).unwrap();
        let text = emit_at_dimension(&e, 2).unwrap();
        assert!(text.starts_with("$$-\\pi^{-2/2}I_{2}="));
        assert!(text.contains("F_{2,2}^{[4]}"));
        assert!(emit_at_dimension(&e, 1).is_err());
    }
}
