//! Laurent polynomials over opaque keys and rational functions built on them.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::probexpr::ProbExpr;

/// An indeterminate: a symbol or an expression treated as an atom
/// (`min`/`max`, source calls, list operations, irreducible powers).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Key {
    Sym(String),
    Op(ProbExpr),
}

impl Key {
    pub fn expr(&self) -> ProbExpr {
        match self {
            Key::Sym(s) => ProbExpr::sym(s),
            Key::Op(e) => e.clone(),
        }
    }

    pub fn mentions(&self, v: &str) -> bool {
        match self {
            Key::Sym(s) => s == v,
            Key::Op(e) => e.mentions(v),
        }
    }

    pub fn is_min_max(&self) -> bool {
        matches!(self, Key::Op(ProbExpr::Min(..) | ProbExpr::Max(..)))
    }
}

/// Product of keys with (possibly negative) integer exponents.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Mono(pub BTreeMap<Key, i64>);

impl Mono {
    pub fn one() -> Self {
        Mono::default()
    }

    pub fn key(k: Key) -> Self {
        Mono(BTreeMap::from([(k, 1)]))
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> i64 {
        self.0.values().sum()
    }

    pub fn exp(&self, k: &Key) -> i64 {
        self.0.get(k).copied().unwrap_or(0)
    }

    pub fn mul(&self, o: &Mono) -> Mono {
        let mut out = self.0.clone();
        for (k, e) in &o.0 {
            let slot = out.entry(k.clone()).or_insert(0);
            *slot += e;
            if *slot == 0 {
                out.remove(k);
            }
        }
        Mono(out)
    }

    pub fn inv(&self) -> Mono {
        Mono(self.0.iter().map(|(k, e)| (k.clone(), -e)).collect())
    }

    pub fn without(&self, k: &Key) -> Mono {
        let mut out = self.0.clone();
        out.remove(k);
        Mono(out)
    }

    pub fn has_negative(&self) -> bool {
        self.0.values().any(|e| *e < 0)
    }

    /// Lexicographic monomial order (a proper term order).
    pub fn lex_cmp(&self, o: &Mono) -> Ordering {
        let mut keys: Vec<&Key> = self.0.keys().chain(o.0.keys()).collect();
        keys.sort();
        keys.dedup();
        for k in keys {
            match self.exp(k).cmp(&o.exp(k)) {
                Ordering::Equal => continue,
                other => return other,
            }
        }
        Ordering::Equal
    }

    pub fn divides(&self, o: &Mono) -> bool {
        self.0.iter().all(|(k, e)| o.exp(k) >= *e)
    }
}

/// Finite sum of rational multiples of monomials.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Poly(pub BTreeMap<Mono, BigRational>);

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn one() -> Self {
        Poly::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Poly::zero();
        p.add_term(Mono::one(), c);
        p
    }

    pub fn int(n: i64) -> Self {
        Poly::constant(BigRational::from_integer(n.into()))
    }

    pub fn key(k: Key) -> Self {
        Poly(BTreeMap::from([(Mono::key(k), BigRational::one())]))
    }

    pub fn sym(s: &str) -> Self {
        Poly::key(Key::Sym(s.to_string()))
    }

    pub fn mono(m: Mono, c: BigRational) -> Self {
        let mut p = Poly::zero();
        p.add_term(m, c);
        p
    }

    pub fn add_term(&mut self, m: Mono, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let slot = self.0.entry(m.clone()).or_insert_with(BigRational::zero);
        *slot += c;
        if slot.is_zero() {
            self.0.remove(&m);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_const(&self) -> Option<BigRational> {
        match self.0.len() {
            0 => Some(BigRational::zero()),
            1 => self.0.get(&Mono::one()).cloned(),
            _ => None,
        }
    }

    pub fn constant_term(&self) -> BigRational {
        self.0.get(&Mono::one()).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &o.0 {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|(m, c)| (m.clone(), -c)).collect())
    }

    pub fn scale(&self, k: &BigRational) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly(self.0.iter().map(|(m, c)| (m.clone(), c * k)).collect())
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &o.0 {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn mul_mono(&self, m: &Mono) -> Poly {
        Poly(self.0.iter().map(|(k, c)| (k.mul(m), c.clone())).collect())
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut out = Poly::one();
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    pub fn keys(&self) -> Vec<&Key> {
        let mut ks: Vec<&Key> = self.0.keys().flat_map(|m| m.0.keys()).collect();
        ks.sort();
        ks.dedup();
        ks
    }

    pub fn mentions(&self, v: &str) -> bool {
        self.keys().iter().any(|k| k.mentions(v))
    }

    pub fn has_negative_exponents(&self) -> bool {
        self.0.keys().any(Mono::has_negative)
    }

    /// `(a, rest)` with `self = a*k + rest`, when `k` occurs only to the
    /// first power with a constant coefficient.
    pub fn linear_in(&self, k: &Key) -> Option<(BigRational, Poly)> {
        let mut a = BigRational::zero();
        let mut rest = Poly::zero();
        for (m, c) in &self.0 {
            match m.exp(k) {
                0 => {
                    if m.0.keys().any(|other| other != k && key_contains(other, k)) {
                        return None;
                    }
                    rest.add_term(m.clone(), c.clone());
                }
                1 if m.0.len() == 1 => a += c,
                _ => return None,
            }
        }
        Some((a, rest))
    }

    /// Coefficients of the powers of `k`: `self = sum_e k^e * out[e]`.
    pub fn by_powers(&self, k: &Key) -> BTreeMap<i64, Poly> {
        let mut out: BTreeMap<i64, Poly> = BTreeMap::new();
        for (m, c) in &self.0 {
            out.entry(m.exp(k)).or_default().add_term(m.without(k), c.clone());
        }
        out
    }

    /// Substitutes keys: `f` returns the replacement of a key or `None` to keep
    /// it. Fails when a replaced key has a negative exponent and its
    /// replacement is not a single monomial.
    pub fn subst_keys(&self, f: &mut dyn FnMut(&Key) -> Option<Poly>) -> Option<Poly> {
        let mut cache: BTreeMap<Key, Option<Poly>> = BTreeMap::new();
        let mut out = Poly::zero();
        for (m, c) in &self.0 {
            let mut acc = Poly::constant(c.clone());
            let mut kept = Mono::one();
            for (k, e) in &m.0 {
                let rep = cache.entry(k.clone()).or_insert_with(|| f(k)).clone();
                match rep {
                    None => kept = kept.mul(&Mono(BTreeMap::from([(k.clone(), *e)]))),
                    Some(p) if *e >= 0 => acc = acc.mul(&p.pow(*e as u32)),
                    Some(p) => {
                        let (pm, pc) = p.single_term()?;
                        if pc.is_zero() {
                            return None;
                        }
                        let inv = Poly::mono(pm.inv(), pc.recip());
                        acc = acc.mul(&inv.pow((-e) as u32));
                    }
                }
            }
            out = out.add(&acc.mul_mono(&kept));
        }
        Some(out)
    }

    pub fn single_term(&self) -> Option<(Mono, BigRational)> {
        if self.0.len() == 1 {
            self.0.iter().next().map(|(m, c)| (m.clone(), c.clone()))
        } else if self.0.is_empty() {
            Some((Mono::one(), BigRational::zero()))
        } else {
            None
        }
    }

    /// Leading term in the lexicographic order.
    fn leading(&self) -> Option<(&Mono, &BigRational)> {
        self.0.iter().max_by(|a, b| a.0.lex_cmp(b.0))
    }

    /// Monomial with the smallest exponent of each key over all terms.
    pub fn monomial_content(&self) -> Mono {
        let mut out: BTreeMap<Key, i64> = BTreeMap::new();
        let mut first = true;
        for m in self.0.keys() {
            if first {
                out = m.0.clone();
                first = false;
                continue;
            }
            let keys: Vec<Key> = out.keys().chain(m.0.keys()).cloned().collect();
            let mut next = BTreeMap::new();
            for k in keys {
                let e = out.get(&k).copied().unwrap_or(0).min(m.exp(&k));
                if e != 0 {
                    next.insert(k, e);
                }
            }
            out = next;
        }
        Mono(out)
    }

    /// Exact quotient `self / d`, if `d` divides `self`.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        let (mn, md) = (self.monomial_content(), d.monomial_content());
        let num = self.mul_mono(&mn.inv());
        let den = d.mul_mono(&md.inv());
        let (lm, lc) = den.leading().map(|(m, c)| (m.clone(), c.clone()))?;
        let mut rem = num;
        let mut q = Poly::zero();
        let mut guard = 0;
        while !rem.is_zero() {
            guard += 1;
            if guard > 10_000 {
                return None;
            }
            let (rm, rc) = rem.leading().map(|(m, c)| (m.clone(), c.clone()))?;
            if !lm.divides(&rm) {
                return None;
            }
            let t = Poly::mono(rm.mul(&lm.inv()), rc / &lc);
            rem = rem.sub(&t.mul(&den));
            q = q.add(&t);
        }
        Some(q.mul_mono(&mn.mul(&md.inv())))
    }

    /// Least common multiple of the coefficient denominators.
    pub fn denominator_lcm(&self) -> BigInt {
        self.0.values().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
    }

    /// Gcd of the numerators of the non-constant coefficients.
    pub fn content_gcd(&self) -> BigInt {
        self.0
            .iter()
            .filter(|(m, _)| !m.is_one())
            .fold(BigInt::zero(), |acc, (_, c)| acc.gcd(c.numer()))
    }

    pub fn leading_sign_positive(&self) -> bool {
        self.0
            .iter()
            .find(|(m, _)| !m.is_one())
            .or_else(|| self.0.iter().next())
            .is_none_or(|(_, c)| c.is_positive())
    }

    pub fn to_expr(&self) -> ProbExpr {
        let mut terms: Vec<(&Mono, &BigRational)> = self.0.iter().collect();
        terms.sort_by(display_order);
        if terms.len() > 1 && terms[0].1.is_negative() {
            if let Some((m, c)) = terms.last().copied() {
                if m.is_one() && c.is_positive() {
                    terms.rotate_right(1);
                }
            }
        }
        let mut out: Option<ProbExpr> = None;
        for (m, c) in terms {
            let neg = c.is_negative();
            let body = mono_expr(m, &c.abs());
            out = Some(match out {
                None if neg => negate_expr(body),
                None => body,
                Some(acc) if neg => ProbExpr::sub(acc, body),
                Some(acc) => ProbExpr::add(acc, body),
            });
        }
        out.unwrap_or_else(ProbExpr::zero)
    }
}

fn key_contains(outer: &Key, inner: &Key) -> bool {
    match (outer, inner) {
        (Key::Op(e), Key::Sym(v)) => e.mentions(v),
        (Key::Op(e), Key::Op(i)) => {
            let mut found = false;
            e.walk(&mut |n| found |= n == i);
            found
        }
        _ => false,
    }
}

fn negate_expr(e: ProbExpr) -> ProbExpr {
    match e {
        ProbExpr::Num(k) => ProbExpr::Num(-k),
        ProbExpr::Mul(a, b) if a.as_num().is_some() => ProbExpr::mul(ProbExpr::Num(-a.as_num().unwrap().clone()), *b),
        e => ProbExpr::neg(e),
    }
}

fn display_order(a: &(&Mono, &BigRational), b: &(&Mono, &BigRational)) -> Ordering {
    let rank = |(m, c): &(&Mono, &BigRational)| (m.is_one(), -m.degree(), c.is_negative());
    rank(a).cmp(&rank(b)).then_with(|| a.0.cmp(b.0))
}

fn power_expr(k: &Key, e: i64) -> ProbExpr {
    let base = k.expr();
    if e <= 3 {
        ProbExpr::product((0..e).map(|_| base.clone()))
    } else {
        ProbExpr::pow(base, ProbExpr::int(e))
    }
}

/// `c * m` with negative exponents rendered as a denominator.
pub fn mono_expr(m: &Mono, c: &BigRational) -> ProbExpr {
    let ups: Vec<ProbExpr> = m.0.iter().filter(|(_, e)| **e > 0).map(|(k, e)| power_expr(k, *e)).collect();
    let downs: Vec<ProbExpr> = m.0.iter().filter(|(_, e)| **e < 0).map(|(k, e)| power_expr(k, -e)).collect();
    let numer = BigRational::from_integer(c.numer().clone());
    let denom = BigRational::from_integer(c.denom().clone());
    if downs.is_empty() {
        if ups.is_empty() {
            return ProbExpr::Num(c.clone());
        }
        let body = ProbExpr::product(ups);
        return if c.is_one() { body } else { ProbExpr::mul(ProbExpr::Num(c.clone()), body) };
    }
    let top = if ups.is_empty() {
        ProbExpr::Num(numer)
    } else if numer.is_one() {
        ProbExpr::product(ups)
    } else {
        ProbExpr::mul(ProbExpr::Num(numer), ProbExpr::product(ups))
    };
    let bottom = if denom.is_one() {
        ProbExpr::product(downs)
    } else {
        ProbExpr::mul(ProbExpr::Num(denom), ProbExpr::product(downs))
    };
    ProbExpr::div(top, bottom)
}

/// `num / prod den` with every denominator factor a non-monomial polynomial
/// whose first coefficient is 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rf {
    pub num: Poly,
    pub den: BTreeMap<Poly, u32>,
}

impl Rf {
    pub fn poly(p: Poly) -> Self {
        Rf { num: p, den: BTreeMap::new() }
    }

    pub fn constant(c: BigRational) -> Self {
        Rf::poly(Poly::constant(c))
    }

    pub fn one() -> Self {
        Rf::poly(Poly::one())
    }

    pub fn zero() -> Self {
        Rf::poly(Poly::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn as_poly(&self) -> Option<&Poly> {
        self.den.is_empty().then_some(&self.num)
    }

    pub fn as_const(&self) -> Option<BigRational> {
        self.as_poly().and_then(Poly::as_const)
    }

    pub fn mentions(&self, v: &str) -> bool {
        self.num.mentions(v) || self.den.keys().any(|d| d.mentions(v))
    }

    pub fn keys(&self) -> Vec<Key> {
        let mut ks: Vec<Key> = self.num.keys().into_iter().cloned().collect();
        for d in self.den.keys() {
            ks.extend(d.keys().into_iter().cloned());
        }
        ks.sort();
        ks.dedup();
        ks
    }

    pub fn mul(&self, o: &Rf) -> Rf {
        let mut den = self.den.clone();
        for (d, k) in &o.den {
            *den.entry(d.clone()).or_insert(0) += k;
        }
        Rf { num: self.num.mul(&o.num), den }.cancel()
    }

    pub fn scale(&self, k: &BigRational) -> Rf {
        Rf {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    pub fn neg(&self) -> Rf {
        self.scale(&-BigRational::one())
    }

    pub fn add(&self, o: &Rf) -> Rf {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        let mut den = self.den.clone();
        for (d, k) in &o.den {
            let slot = den.entry(d.clone()).or_insert(0);
            *slot = (*slot).max(*k);
        }
        let lift = |r: &Rf| {
            let mut num = r.num.clone();
            for (d, k) in &den {
                let have = r.den.get(d).copied().unwrap_or(0);
                num = num.mul(&d.pow(k - have));
            }
            num
        };
        let num = lift(self).add(&lift(o));
        Rf { num, den }.cancel()
    }

    pub fn sub(&self, o: &Rf) -> Rf {
        self.add(&o.neg())
    }

    /// `1 / self`, or `None` for zero.
    pub fn inv(&self) -> Option<Rf> {
        if self.is_zero() {
            return None;
        }
        let mut num = Poly::one();
        for (d, k) in &self.den {
            num = num.mul(&d.pow(*k));
        }
        Some(Rf::poly(num).div_poly(&self.num))
    }

    pub fn div(&self, o: &Rf) -> Option<Rf> {
        Some(self.mul(&o.inv()?))
    }

    pub fn pow(&self, e: i64) -> Option<Rf> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut out = Rf::one();
        for _ in 0..e.unsigned_abs() {
            out = out.mul(&base);
        }
        Some(out)
    }

    /// Divides by a polynomial, splitting it into a scalar, a monomial and a
    /// normalized factor.
    fn div_poly(&self, p: &Poly) -> Rf {
        let m = p.monomial_content();
        let rest = p.mul_mono(&m.inv());
        let mut num = self.num.mul_mono(&m.inv());
        let mut den = self.den.clone();
        if let Some(c) = rest.as_const() {
            num = num.scale(&c.recip());
        } else {
            let lead = rest.0.values().next().cloned().unwrap();
            num = num.scale(&lead.recip());
            *den.entry(rest.scale(&lead.recip())).or_insert(0) += 1;
        }
        Rf { num, den }.cancel()
    }

    fn cancel(mut self) -> Rf {
        if self.num.is_zero() {
            self.den.clear();
            return self;
        }
        let factors: Vec<Poly> = self.den.keys().cloned().collect();
        for d in factors {
            while self.den.get(&d).copied().unwrap_or(0) > 0 {
                match self.num.div_exact(&d) {
                    Some(q) => {
                        self.num = q;
                        let slot = self.den.get_mut(&d).unwrap();
                        *slot -= 1;
                        if *slot == 0 {
                            self.den.remove(&d);
                        }
                    }
                    None => break,
                }
            }
        }
        self
    }

    /// Substitutes keys in numerator and denominator.
    pub fn subst_keys(&self, f: &mut dyn FnMut(&Key) -> Option<Poly>) -> Option<Rf> {
        let mut out = Rf::poly(self.num.subst_keys(f)?);
        for (d, k) in &self.den {
            let d2 = d.subst_keys(f)?;
            if d2.is_zero() {
                return None;
            }
            for _ in 0..*k {
                out = out.div_poly(&d2);
            }
        }
        Some(out)
    }

    pub fn to_expr(&self) -> ProbExpr {
        let m = self.num.monomial_content();
        let lower = Mono(m.0.iter().filter(|(_, e)| **e < 0).map(|(k, e)| (k.clone(), *e)).collect());
        let top = self.num.mul_mono(&lower.inv());
        let mut downs: Vec<ProbExpr> = lower
            .0
            .iter()
            .map(|(k, e)| power_expr(k, -e))
            .collect();
        for (d, k) in &self.den {
            for _ in 0..*k {
                downs.push(d.to_expr());
            }
        }
        if downs.is_empty() {
            return top.to_expr();
        }
        if let Some(c) = top.as_const() {
            let mut bottom = downs;
            if !c.denom().is_one() {
                bottom.insert(0, ProbExpr::Num(BigRational::from_integer(c.denom().clone())));
            }
            return ProbExpr::div(ProbExpr::Num(BigRational::from_integer(c.numer().clone())), ProbExpr::product(bottom));
        }
        ProbExpr::mul(ProbExpr::div(ProbExpr::one(), ProbExpr::product(downs)), top.to_expr())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probexpr::ratio;

    fn s(x: &str) -> Poly {
        Poly::sym(x)
    }

    #[test]
    fn exact_division() {
        let p = s("a").mul(&s("b")).sub(&s("a").mul(&s("a")));
        let d = s("b").sub(&s("a"));
        assert_eq!(p.div_exact(&d), Some(s("a")));
        assert_eq!(s("a").add(&Poly::one()).div_exact(&s("a").add(&Poly::constant(ratio(2, 1)))), None);
        let sq = s("n").add(&Poly::one()).pow(2);
        assert_eq!(sq.div_exact(&s("n").add(&Poly::one())), Some(s("n").add(&Poly::one())));
    }

    #[test]
    fn rational_function_cancellation() {
        let one_minus_a = Rf::poly(Poly::one().sub(&s("a")));
        let r = one_minus_a.mul(&one_minus_a.inv().unwrap());
        assert_eq!(r, Rf::one());
        let n = Rf::poly(s("n"));
        let inv_n2 = n.mul(&n).inv().unwrap();
        assert_eq!(inv_n2.mul(&n).mul(&n), Rf::one());
        assert_eq!(inv_n2.to_expr().to_string(), "1/(n*n)");
        let sum = Rf::constant(ratio(1, 2)).add(&Rf::constant(ratio(1, 3)));
        assert_eq!(sum, Rf::constant(ratio(5, 6)));
    }

    #[test]
    fn rendering() {
        let p = s("z").scale(&ratio(2, 1)).sub(&Poly::one());
        assert_eq!(p.to_expr().to_string(), "2*z - 1");
        let q = s("z").sub(&s("n"));
        assert_eq!(q.to_expr().to_string(), "z-n");
        let r = Rf::poly(p).mul(&Rf::poly(s("n").pow(2)).inv().unwrap());
        assert_eq!(r.to_expr().to_string(), "1/(n*n)*(2*z - 1)");
        let g = Rf::poly(Poly::one()).div(&Rf::poly(Poly::one().sub(&s("a")))).unwrap();
        assert_eq!(g.to_expr().to_string(), "1/(1-a)");
    }
}
