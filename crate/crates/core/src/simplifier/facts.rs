//! Linear reasoning over constraint atoms: Fourier-Motzkin elimination with
//! integer tightening, and interval bounds for rational functions.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::poly::{Key, Mono, Poly, Rf};
use super::term::{normalize_atom, Atom, Norm};
use super::Context;

/// `p >= 0`, or `p > 0` when `strict`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Lin {
    pub p: Poly,
    pub strict: bool,
}

impl Lin {
    fn atom(&self) -> Atom {
        if self.strict {
            Atom::Gt(self.p.clone())
        } else {
            Atom::Ge(self.p.clone())
        }
    }
}

pub fn lins(atoms: &[Atom]) -> Vec<Lin> {
    let mut out = Vec::new();
    for a in atoms {
        match a {
            Atom::Ge(p) => out.push(Lin { p: p.clone(), strict: false }),
            Atom::Gt(p) => out.push(Lin { p: p.clone(), strict: true }),
            Atom::Eq(p) => {
                out.push(Lin { p: p.clone(), strict: false });
                out.push(Lin { p: p.neg(), strict: false });
            }
            Atom::Opaque(_) => {}
        }
    }
    out
}

const MAX_CONSTRAINTS: usize = 400;

/// Tightens a constraint; `Err` when it is a contradiction, `Ok(None)` when
/// it is trivially true.
fn tighten(l: Lin, ctx: &Context) -> Result<Option<Lin>, ()> {
    match normalize_atom(l.atom(), ctx) {
        Norm::True => Ok(None),
        Norm::False => Err(()),
        Norm::Atom(Atom::Ge(p)) => Ok(Some(Lin { p, strict: false })),
        Norm::Atom(Atom::Gt(p)) => Ok(Some(Lin { p, strict: true })),
        Norm::Atom(_) => Ok(Some(l)),
    }
}

/// True when the constraints have no solution. Sound but incomplete: a
/// `false` answer proves nothing.
pub fn infeasible(cons: &[Lin], ctx: &Context) -> bool {
    let mut set: Vec<Lin> = Vec::new();
    for c in cons {
        match tighten(c.clone(), ctx) {
            Err(()) => return true,
            Ok(Some(l)) => set.push(l),
            Ok(None) => {}
        }
    }
    set.sort();
    set.dedup();
    loop {
        let mut vars: BTreeMap<Mono, (usize, usize)> = BTreeMap::new();
        for l in &set {
            for (m, c) in &l.p.0 {
                if m.is_one() {
                    continue;
                }
                let slot = vars.entry(m.clone()).or_insert((0, 0));
                if c.is_positive() {
                    slot.0 += 1;
                } else {
                    slot.1 += 1;
                }
            }
        }
        let Some((var, _)) = vars.iter().min_by_key(|(_, (p, n))| p * n) else {
            return false;
        };
        let var = var.clone();
        let coef = |l: &Lin| l.p.0.get(&var).cloned().unwrap_or_else(BigRational::zero);
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for l in set {
            let c = coef(&l);
            if c.is_positive() {
                pos.push((c, l));
            } else if c.is_negative() {
                neg.push((-c, l));
            } else {
                rest.push(l);
            }
        }
        if rest.len() + pos.len() * neg.len() > MAX_CONSTRAINTS {
            return false;
        }
        for (a, p) in &pos {
            for (b, q) in &neg {
                let combined = Lin {
                    p: p.p.scale(b).add(&q.p.scale(a)),
                    strict: p.strict || q.strict,
                };
                match tighten(combined, ctx) {
                    Err(()) => return true,
                    Ok(Some(l)) => rest.push(l),
                    Ok(None) => {}
                }
            }
        }
        rest.sort();
        rest.dedup();
        set = rest;
    }
}

/// The negation of an atom as constraints (a single one unless `Eq`).
fn negations(a: &Atom) -> Vec<Vec<Lin>> {
    match a {
        Atom::Ge(p) => vec![vec![Lin { p: p.neg(), strict: true }]],
        Atom::Gt(p) => vec![vec![Lin { p: p.neg(), strict: false }]],
        Atom::Eq(p) => vec![
            vec![Lin { p: p.clone(), strict: true }],
            vec![Lin { p: p.neg(), strict: true }],
        ],
        Atom::Opaque(_) => Vec::new(),
    }
}

/// True when `facts` imply `goal`.
pub fn entails(facts: &[Lin], goal: &Atom, ctx: &Context) -> bool {
    if matches!(goal, Atom::Opaque(_)) {
        return false;
    }
    negations(goal).into_iter().all(|neg| {
        let mut all = facts.to_vec();
        all.extend(neg);
        infeasible(&all, ctx)
    })
}

pub fn entails_ge(facts: &[Lin], p: &Poly, ctx: &Context) -> bool {
    entails(facts, &Atom::Ge(p.clone()), ctx)
}

/// Endpoint of an interval: value and whether it is excluded.
type End = Option<(BigRational, bool)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub lo: End,
    pub hi: End,
}

impl Interval {
    pub fn top() -> Self {
        Interval { lo: None, hi: None }
    }

    pub fn point(c: BigRational) -> Self {
        Interval {
            lo: Some((c.clone(), false)),
            hi: Some((c, false)),
        }
    }

    fn add(&self, o: &Interval) -> Interval {
        let f = |a: &End, b: &End| match (a, b) {
            (Some((x, s)), Some((y, t))) => Some((x + y, *s || *t)),
            _ => None,
        };
        Interval {
            lo: f(&self.lo, &o.lo),
            hi: f(&self.hi, &o.hi),
        }
    }

    fn scale(&self, k: &BigRational) -> Interval {
        let f = |e: &End| e.as_ref().map(|(x, s)| (x * k, *s));
        if k.is_negative() {
            Interval { lo: f(&self.hi), hi: f(&self.lo) }
        } else if k.is_zero() {
            Interval::point(BigRational::zero())
        } else {
            Interval { lo: f(&self.lo), hi: f(&self.hi) }
        }
    }

    fn nonnegative(&self) -> bool {
        self.lo.as_ref().is_some_and(|(x, _)| !x.is_negative())
    }

    fn mul(&self, o: &Interval) -> Interval {
        if let (Some(a), Some(b), Some(c), Some(d)) = (&self.lo, &self.hi, &o.lo, &o.hi) {
            let prod = |(x, s): &(BigRational, bool), (y, t): &(BigRational, bool)| {
                let strict = (*s && !y.is_zero()) || (*t && !x.is_zero());
                let strict = strict && !((x.is_zero() && !s) || (y.is_zero() && !t));
                (x * y, strict)
            };
            let cands = [prod(a, c), prod(a, d), prod(b, c), prod(b, d)];
            let lo = cands
                .iter()
                .min_by(|p, q| p.0.cmp(&q.0).then(p.1.cmp(&q.1)))
                .cloned();
            let hi = cands
                .iter()
                .max_by(|p, q| p.0.cmp(&q.0).then(q.1.cmp(&p.1)))
                .cloned();
            return Interval { lo, hi };
        }
        if self.nonnegative() && o.nonnegative() {
            let (a, s) = self.lo.clone().unwrap();
            let (c, t) = o.lo.clone().unwrap();
            let lo = Some((&a * &c, (s || t) && !(a.is_zero() && !s) && !(c.is_zero() && !t)));
            return Interval { lo, hi: None };
        }
        Interval::top()
    }

    fn recip(&self) -> Interval {
        let positive = self.lo.as_ref().is_some_and(|(x, s)| x.is_positive() || (x.is_zero() && *s));
        let negative = self.hi.as_ref().is_some_and(|(x, s)| x.is_negative() || (x.is_zero() && *s));
        if !positive && !negative {
            return Interval::top();
        }
        let inv = |e: &End| -> End {
            match e {
                None => Some((BigRational::zero(), true)),
                Some((x, _)) if x.is_zero() => None,
                Some((x, s)) => Some((x.recip(), *s)),
            }
        };
        Interval {
            lo: inv(&self.hi),
            hi: inv(&self.lo),
        }
    }

    fn pow(&self, e: i64) -> Interval {
        let base = if e < 0 { self.recip() } else { self.clone() };
        let mut out = Interval::point(BigRational::one());
        for _ in 0..e.unsigned_abs() {
            out = out.mul(&base);
        }
        out
    }

    fn meet(&self, o: &Interval) -> Interval {
        let lo = match (&self.lo, &o.lo) {
            (None, x) | (x, None) => x.clone(),
            (Some(a), Some(b)) => Some(if a.0 > b.0 || (a.0 == b.0 && a.1) { a.clone() } else { b.clone() }),
        };
        let hi = match (&self.hi, &o.hi) {
            (None, x) | (x, None) => x.clone(),
            (Some(a), Some(b)) => Some(if a.0 < b.0 || (a.0 == b.0 && a.1) { a.clone() } else { b.clone() }),
        };
        Interval { lo, hi }
    }

    pub fn below_one(&self) -> bool {
        self.hi.as_ref().is_some_and(|(x, s)| x < &BigRational::one() || (x.is_one() && *s))
    }

    pub fn above_one(&self) -> bool {
        self.lo.as_ref().is_some_and(|(x, s)| x > &BigRational::one() || (x.is_one() && *s))
    }

    pub fn at_least_zero(&self) -> bool {
        self.nonnegative()
    }

    pub fn above_zero(&self) -> bool {
        self.lo.as_ref().is_some_and(|(x, s)| x.is_positive() || (x.is_zero() && *s))
    }
}

/// Interval bounds of symbols read off single-symbol constraints.
pub struct Bounds(BTreeMap<Key, Interval>);

impl Bounds {
    pub fn from_lins(facts: &[Lin]) -> Bounds {
        let mut map: BTreeMap<Key, Interval> = BTreeMap::new();
        for l in facts {
            let nonconst: Vec<(&Mono, &BigRational)> = l.p.0.iter().filter(|(m, _)| !m.is_one()).collect();
            let [(m, a)] = nonconst.as_slice() else { continue };
            if m.0.len() != 1 || m.0.values().next() != Some(&1) {
                continue;
            }
            let k = m.0.keys().next().unwrap().clone();
            let bound = -l.p.constant_term() / *a;
            let iv = if a.is_positive() {
                Interval { lo: Some((bound, l.strict)), hi: None }
            } else {
                Interval { lo: None, hi: Some((bound, l.strict)) }
            };
            let slot = map.entry(k).or_insert_with(Interval::top);
            *slot = slot.meet(&iv);
        }
        Bounds(map)
    }

    fn key(&self, k: &Key) -> Interval {
        self.0.get(k).cloned().unwrap_or_else(Interval::top)
    }

    pub fn poly(&self, p: &Poly) -> Interval {
        let mut acc = Interval::point(BigRational::zero());
        for (m, c) in &p.0 {
            let mut iv = Interval::point(BigRational::one());
            for (k, e) in &m.0 {
                iv = iv.mul(&self.key(k).pow(*e));
            }
            acc = acc.add(&iv.scale(c));
        }
        acc
    }

    pub fn rf(&self, r: &Rf) -> Interval {
        let mut iv = self.poly(&r.num);
        for (d, k) in &r.den {
            iv = iv.mul(&self.poly(d).pow(-(*k as i64)));
        }
        iv
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probexpr::ratio;

    fn ctx() -> Context {
        Context::default()
    }

    fn s(x: &str) -> Poly {
        Poly::sym(x)
    }

    fn ge(p: Poly) -> Lin {
        Lin { p, strict: false }
    }

    #[test]
    fn chains_and_integer_gaps() {
        let c = ctx();
        let facts = vec![ge(s("x").sub(&Poly::one())), ge(s("n").sub(&s("x")))];
        assert!(entails_ge(&facts, &s("n").sub(&Poly::one()), &c));
        assert!(!entails_ge(&facts, &s("n").sub(&Poly::int(2)), &c));
        let gap = vec![
            ge(s("x").scale(&ratio(2, 1)).sub(&Poly::one())),
            ge(Poly::one().sub(&s("x").scale(&ratio(2, 1)))),
        ];
        assert!(infeasible(&gap, &c));
    }

    #[test]
    fn geometric_ratio_bounds() {
        let facts = vec![ge(s("n").sub(&Poly::one()))];
        let b = Bounds::from_lins(&facts);
        let inv_n = Rf::poly(s("n")).inv().unwrap();
        let r = Rf::one().sub(&inv_n);
        let iv = b.rf(&r);
        assert!(iv.below_one() && iv.at_least_zero());
        let a = vec![Lin { p: s("a"), strict: true }, Lin { p: Poly::one().sub(&s("a")), strict: true }];
        let iv = Bounds::from_lins(&a).poly(&s("a"));
        assert!(iv.below_one() && iv.above_zero());
    }
}
