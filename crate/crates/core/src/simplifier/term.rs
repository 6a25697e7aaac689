//! Sum-of-products normal form: each term is
//! `sum_vars coef * prod geo * prod prods * C(atoms)`.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::poly::{Key, Poly, Rf};
use super::Context;
use crate::probexpr::{fresh_name, BoolExpr, CmpOp, ProbExpr};

/// A constraint factor.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Eq(Poly),
    Ge(Poly),
    Gt(Poly),
    Opaque(BoolExpr),
}

impl Atom {
    pub fn poly(&self) -> Option<&Poly> {
        match self {
            Atom::Eq(p) | Atom::Ge(p) | Atom::Gt(p) => Some(p),
            Atom::Opaque(_) => None,
        }
    }

    pub fn mentions(&self, v: &str) -> bool {
        match self {
            Atom::Opaque(b) => b.free_symbols().contains(v),
            a => a.poly().unwrap().mentions(v),
        }
    }
}

/// `prod_{var=lo}^{hi} body`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prod {
    pub var: String,
    pub lo: Poly,
    pub hi: Poly,
    pub body: ProbExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    /// Summation variables, outermost first.
    pub vars: Vec<String>,
    pub atoms: Vec<Atom>,
    pub coef: Rf,
    /// `base^exponent` factors with a symbolic exponent.
    pub geo: Vec<(Rf, Poly)>,
    pub prods: Vec<Prod>,
}

impl Term {
    pub fn constant(c: BigRational) -> Self {
        Term::coef(Rf::constant(c))
    }

    pub fn coef(coef: Rf) -> Self {
        Term {
            vars: Vec::new(),
            atoms: Vec::new(),
            coef,
            geo: Vec::new(),
            prods: Vec::new(),
        }
    }

    pub fn one() -> Self {
        Term::constant(BigRational::one())
    }

    pub fn atom(a: Atom) -> Self {
        let mut t = Term::one();
        t.atoms.push(a);
        t
    }

    /// True when the term is a plain rational function.
    pub fn is_pure(&self) -> bool {
        self.vars.is_empty() && self.atoms.is_empty() && self.prods.is_empty() && self.geo.is_empty()
    }

    pub fn free_symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut keys = self.coef.keys();
        for (b, e) in &self.geo {
            keys.extend(b.keys());
            keys.extend(e.keys().into_iter().cloned());
        }
        for a in &self.atoms {
            match a {
                Atom::Opaque(b) => out.extend(b.free_symbols()),
                a => keys.extend(a.poly().unwrap().keys().into_iter().cloned()),
            }
        }
        for p in &self.prods {
            keys.extend(p.lo.keys().into_iter().cloned());
            keys.extend(p.hi.keys().into_iter().cloned());
            let mut inner = p.body.free_symbols();
            inner.remove(&p.var);
            out.extend(inner);
        }
        for k in keys {
            match k {
                Key::Sym(s) => {
                    out.insert(s);
                }
                Key::Op(e) => out.extend(e.free_symbols()),
            }
        }
        for v in &self.vars {
            out.remove(v);
        }
        out
    }

    /// Every key occurring in the coefficient, geometric factors and atoms.
    pub fn keys(&self) -> Vec<Key> {
        let mut keys = self.coef.keys();
        for (b, e) in &self.geo {
            keys.extend(b.keys());
            keys.extend(e.keys().into_iter().cloned());
        }
        for a in &self.atoms {
            if let Some(p) = a.poly() {
                keys.extend(p.keys().into_iter().cloned());
            }
        }
        for p in &self.prods {
            keys.extend(p.lo.keys().into_iter().cloned());
            keys.extend(p.hi.keys().into_iter().cloned());
        }
        keys.sort();
        keys.dedup();
        keys
    }

    /// Product of two terms whose binders do not clash.
    pub fn mul(&self, o: &Term) -> Term {
        let mut vars = self.vars.clone();
        vars.extend(o.vars.iter().cloned());
        let mut atoms = self.atoms.clone();
        atoms.extend(o.atoms.iter().cloned());
        let mut geo = self.geo.clone();
        geo.extend(o.geo.iter().cloned());
        let mut prods = self.prods.clone();
        prods.extend(o.prods.iter().cloned());
        Term {
            vars,
            atoms,
            coef: self.coef.mul(&o.coef),
            geo,
            prods,
        }
    }

    pub fn mentions(&self, v: &str) -> bool {
        self.coef.mentions(v)
            || self.geo.iter().any(|(b, e)| b.mentions(v) || e.mentions(v))
            || self.atoms.iter().any(|a| a.mentions(v))
            || self.prods.iter().any(|p| p.lo.mentions(v) || p.hi.mentions(v) || (p.var != v && p.body.mentions(v)))
    }

    /// Canonical shape used to merge like terms: everything but the
    /// coefficient.
    pub fn shape(&self) -> (Vec<String>, Vec<Atom>, Vec<(Rf, Poly)>, Vec<Prod>) {
        let mut atoms = self.atoms.clone();
        atoms.sort();
        let mut geo = self.geo.clone();
        geo.sort();
        let mut prods = self.prods.clone();
        prods.sort();
        (self.vars.clone(), atoms, geo, prods)
    }
}

/// Outcome of normalizing a single comparison.
pub enum Norm {
    True,
    False,
    Atom(Atom),
}

/// True when the expression can only denote an integer (or be undefined).
pub fn int_expr(e: &ProbExpr, ctx: &Context) -> bool {
    match e {
        ProbExpr::Num(r) => r.is_integer(),
        ProbExpr::Lit(v) => v.as_int().is_some(),
        ProbExpr::Sym(s) => !ctx.rationals.contains(s),
        ProbExpr::Neg(a) => int_expr(a, ctx),
        ProbExpr::Add(a, b) | ProbExpr::Sub(a, b) | ProbExpr::Mul(a, b) | ProbExpr::Min(a, b) | ProbExpr::Max(a, b) => {
            int_expr(a, ctx) && int_expr(b, ctx)
        }
        ProbExpr::Pow(a, b) => int_expr(a, ctx) && b.as_num().is_some_and(|k| k.is_integer() && !k.is_negative()),
        ProbExpr::Call(f, _) => ctx.source_functions.contains(f),
        ProbExpr::Len(_) | ProbExpr::Hd(_) => true,
        _ => false,
    }
}

pub fn int_key(k: &Key, ctx: &Context) -> bool {
    match k {
        Key::Sym(s) => !ctx.rationals.contains(s),
        Key::Op(e) => int_expr(e, ctx),
    }
}

pub fn int_poly(p: &Poly, ctx: &Context) -> bool {
    p.0.iter()
        .all(|(m, c)| c.is_integer() && m.0.iter().all(|(k, e)| *e >= 0 && int_key(k, ctx)))
}

fn positive_lead(p: &Poly) -> BigRational {
    p.0.iter()
        .find(|(m, _)| !m.is_one())
        .map(|(_, c)| c.abs())
        .unwrap_or_else(BigRational::one)
}

/// Brings a comparison `p op 0` into canonical form, tightening strict and
/// fractional bounds on integer-valued polynomials.
pub fn normalize_atom(a: Atom, ctx: &Context) -> Norm {
    let Some(p) = a.poly() else { return Norm::Atom(a) };
    if let Some(c) = p.as_const() {
        let holds = match a {
            Atom::Eq(_) => c.is_zero(),
            Atom::Ge(_) => !c.is_negative(),
            Atom::Gt(_) => c.is_positive(),
            Atom::Opaque(_) => unreachable!(),
        };
        return if holds { Norm::True } else { Norm::False };
    }
    let scaled = p.scale(&BigRational::from_integer(p.denominator_lcm()));
    if int_poly(&scaled, ctx) {
        let g = scaled.content_gcd();
        let c = scaled.constant_term().to_integer();
        let rest = scaled.sub(&Poly::constant(BigRational::from_integer(c.clone())));
        let q = rest.scale(&BigRational::new(BigInt::one(), g.clone()));
        return match a {
            Atom::Eq(_) => {
                if !c.is_multiple_of(&g) {
                    return Norm::False;
                }
                let e = q.add(&Poly::constant(BigRational::from_integer(c / &g)));
                Norm::Atom(Atom::Eq(if e.leading_sign_positive() { e } else { e.neg() }))
            }
            Atom::Ge(_) | Atom::Gt(_) => {
                let c = if matches!(a, Atom::Gt(_)) { c - 1 } else { c };
                let floor = c.div_floor(&g);
                Norm::Atom(Atom::Ge(q.add(&Poly::constant(BigRational::from_integer(floor)))))
            }
            Atom::Opaque(_) => unreachable!(),
        };
    }
    let lead = positive_lead(p);
    let q = p.scale(&lead.recip());
    Norm::Atom(match a {
        Atom::Eq(_) => Atom::Eq(if q.leading_sign_positive() { q } else { q.neg() }),
        Atom::Ge(_) => Atom::Ge(q),
        Atom::Gt(_) => Atom::Gt(q),
        Atom::Opaque(_) => unreachable!(),
    })
}

/// Rebuilds every node of an expression bottom-up, including operands
/// inside constraints.
pub fn map_deep(e: &ProbExpr, f: &dyn Fn(&ProbExpr) -> Option<ProbExpr>) -> ProbExpr {
    if let Some(r) = f(e) {
        return r;
    }
    match e {
        ProbExpr::C(b) => ProbExpr::C(Box::new(map_deep_bool(b, f))),
        ProbExpr::Truth(b) => ProbExpr::Truth(Box::new(map_deep_bool(b, f))),
        ProbExpr::Ite(b, t, x) => ProbExpr::ite(map_deep_bool(b, f), map_deep(t, f), map_deep(x, f)),
        ProbExpr::Sum(v, body) => ProbExpr::sum(v, map_deep(body, f)),
        ProbExpr::FinProd { var, lo, hi, body } => {
            ProbExpr::fin_prod(var, map_deep(lo, f), map_deep(hi, f), map_deep(body, f))
        }
        other => other.map_children(&mut |c| map_deep(c, f)),
    }
}

pub fn map_deep_bool(b: &BoolExpr, f: &dyn Fn(&ProbExpr) -> Option<ProbExpr>) -> BoolExpr {
    b.map_exprs(&mut |e| map_deep(e, f))
}

/// Converts probability expressions into [`Term`]s.
pub struct Normalizer<'a> {
    pub ctx: &'a Context,
    taken: BTreeSet<String>,
    depth: usize,
}

impl<'a> Normalizer<'a> {
    pub fn new(ctx: &'a Context) -> Self {
        let mut taken: BTreeSet<String> = ctx.parameters.iter().cloned().collect();
        taken.extend(ctx.functions.iter().map(|f| f.name.clone()));
        taken.extend(ctx.source_functions.iter().cloned());
        Normalizer { ctx, taken, depth: 0 }
    }

    pub fn reserve(&mut self, e: &ProbExpr) {
        e.collect_names(&mut self.taken);
    }

    pub fn fresh(&mut self, base: &str) -> String {
        let n = fresh_name(base, &self.taken);
        self.taken.insert(n.clone());
        n
    }

    pub fn terms(&mut self, e: &ProbExpr) -> Vec<Term> {
        self.reserve(e);
        self.go(e)
    }

    fn opaque(&self, e: &ProbExpr) -> Vec<Term> {
        vec![Term::coef(Rf::poly(Poly::key(Key::Op(e.clone()))))]
    }

    /// A single rational function, if `e` normalizes to one.
    pub fn pure_rf(&mut self, e: &ProbExpr) -> Option<Rf> {
        let ts = self.go(e);
        match ts.as_slice() {
            [] => Some(Rf::zero()),
            [t] if t.is_pure() => Some(t.coef.clone()),
            _ => {
                if ts.iter().all(Term::is_pure) {
                    Some(ts.iter().fold(Rf::zero(), |acc, t| acc.add(&t.coef)))
                } else {
                    None
                }
            }
        }
    }

    pub fn pure_poly(&mut self, e: &ProbExpr) -> Option<Poly> {
        self.pure_rf(e).and_then(|r| r.as_poly().cloned())
    }

    /// The polynomial denoted by `e`, or `e` as an opaque key.
    pub fn key_poly(&mut self, e: &ProbExpr) -> Poly {
        match e {
            ProbExpr::Sym(s) => Poly::sym(s),
            _ => self.pure_poly(e).unwrap_or_else(|| Poly::key(Key::Op(e.clone()))),
        }
    }

    fn go(&mut self, e: &ProbExpr) -> Vec<Term> {
        match e {
            ProbExpr::Num(r) => vec![Term::constant(r.clone())],
            ProbExpr::Sym(s) => vec![Term::coef(Rf::poly(Poly::sym(s)))],
            ProbExpr::Lit(v) => match v.as_int() {
                Some(n) => vec![Term::constant(BigRational::from_integer(n.clone()))],
                None => self.opaque(e),
            },
            ProbExpr::Neg(a) => self.go(a).into_iter().map(|mut t| {
                t.coef = t.coef.neg();
                t
            }).collect(),
            ProbExpr::Add(a, b) => {
                let mut out = self.go(a);
                out.extend(self.go(b));
                out
            }
            ProbExpr::Sub(a, b) => {
                let mut out = self.go(a);
                out.extend(self.go(&ProbExpr::neg((**b).clone())));
                out
            }
            ProbExpr::Mul(a, b) => {
                let left = self.go(a);
                let right = self.go(b);
                self.product(&left, &right)
            }
            ProbExpr::Div(a, b) => match self.pure_rf(b).and_then(|d| d.inv()) {
                Some(inv) => self.go(a).into_iter().map(|mut t| {
                    t.coef = t.coef.mul(&inv);
                    t
                }).collect(),
                None => self.opaque(e),
            },
            ProbExpr::Pow(a, b) => self.power(e, a, b),
            ProbExpr::Min(..) | ProbExpr::Max(..) => match self.min_max(e) {
                Some(p) => vec![Term::coef(Rf::poly(p))],
                None => self.opaque(e),
            },
            ProbExpr::C(b) => self.cond(b),
            ProbExpr::Sum(v, body) => {
                let inner = self.go(body);
                inner.into_iter().map(|t| self.bind(v, t)).collect()
            }
            ProbExpr::FinProd { var, lo, hi, body } => {
                match (self.pure_poly(lo), self.pure_poly(hi)) {
                    (Some(lo), Some(hi)) => {
                        let mut t = Term::one();
                        t.prods.push(Prod {
                            var: var.clone(),
                            lo,
                            hi,
                            body: (**body).clone(),
                        });
                        vec![t]
                    }
                    _ => self.opaque(e),
                }
            }
            ProbExpr::Call(f, args) => {
                if let Some(def) = self.ctx.functions.iter().find(|d| &d.name == f) {
                    if def.params.len() == args.len() && self.depth < 64 {
                        let pairs: Vec<(String, ProbExpr)> =
                            def.params.iter().cloned().zip(args.iter().cloned()).collect();
                        let body = def.body.subst_all(&pairs);
                        self.reserve(&body);
                        self.depth += 1;
                        let out = self.go(&body);
                        self.depth -= 1;
                        return out;
                    }
                }
                self.opaque(e)
            }
            ProbExpr::Ite(b, t, x) => {
                let mut out = self.go(&ProbExpr::mul(ProbExpr::c((**b).clone()), (**t).clone()));
                out.extend(self.go(&ProbExpr::mul(ProbExpr::c(b.negated()), (**x).clone())));
                out
            }
            ProbExpr::Truth(_) | ProbExpr::Cons(..) | ProbExpr::Hd(_) | ProbExpr::Tl(_) | ProbExpr::Len(_) => {
                self.opaque(e)
            }
        }
    }

    /// Prepends the binder `v`, renaming an inner binder of the same name.
    fn bind(&mut self, v: &str, mut t: Term) -> Term {
        if t.vars.iter().any(|w| w == v) {
            let w = self.fresh(v);
            t = self.rename(&t, v, &w);
        }
        t.vars.insert(0, v.to_string());
        t
    }

    /// Renames a summation variable of `t`.
    pub fn rename(&mut self, t: &Term, from: &str, to: &str) -> Term {
        let mut out = self
            .subst(t, from, &ProbExpr::sym(to))
            .expect("renaming cannot fail");
        for v in out.vars.iter_mut() {
            if v == from {
                *v = to.to_string();
            }
        }
        out
    }

    fn product(&mut self, left: &[Term], right: &[Term]) -> Vec<Term> {
        let mut out = Vec::new();
        for l in left {
            for r in right {
                let mut l = l.clone();
                let mut r = r.clone();
                let lf = l.free_symbols();
                for v in r.vars.clone() {
                    if lf.contains(&v) || l.vars.contains(&v) {
                        let w = self.fresh(&v);
                        r = self.rename(&r, &v, &w);
                    }
                }
                let rf = r.free_symbols();
                for v in l.vars.clone() {
                    if rf.contains(&v) {
                        let w = self.fresh(&v);
                        l = self.rename(&l, &v, &w);
                    }
                }
                out.push(l.mul(&r));
            }
        }
        out
    }

    fn power(&mut self, e: &ProbExpr, a: &ProbExpr, b: &ProbExpr) -> Vec<Term> {
        let exp = self.pure_poly(b);
        if let Some(k) = exp.as_ref().and_then(Poly::as_const) {
            if k.is_integer() {
                let k = k.to_integer().to_i64().unwrap_or(i64::MAX);
                if (0..=16).contains(&k) {
                    let base = self.go(a);
                    let mut acc = vec![Term::one()];
                    for _ in 0..k {
                        acc = self.product(&acc, &base);
                    }
                    return acc;
                }
                if (-16..0).contains(&k) {
                    if let Some(r) = self.pure_rf(a).and_then(|r| r.pow(k)) {
                        return vec![Term::coef(r)];
                    }
                }
            }
            return self.opaque(e);
        }
        match (self.pure_rf(a), exp) {
            (Some(base), Some(exp)) => {
                if base.as_const().is_some_and(|c| c.is_one()) {
                    return vec![Term::one()];
                }
                let mut t = Term::one();
                t.geo.push((base, exp));
                vec![t]
            }
            _ => self.opaque(e),
        }
    }

    /// Canonical `min`/`max` of polynomial arguments: nested operations of
    /// the same kind are flattened, arguments differing by a constant are
    /// resolved, the rest are sorted.
    fn min_max(&mut self, e: &ProbExpr) -> Option<Poly> {
        let is_min = matches!(e, ProbExpr::Min(..));
        let mut raw = Vec::new();
        collect_args(e, is_min, &mut raw);
        let mut args: Vec<Poly> = Vec::new();
        for a in raw {
            let p = self.pure_poly(&a)?;
            let mut nested = false;
            if let [k] = p.keys().as_slice() {
                if let Key::Op(inner) = k {
                    if p == Poly::key((*k).clone()) && matches!((is_min, inner), (true, ProbExpr::Min(..)) | (false, ProbExpr::Max(..))) {
                        let mut more = Vec::new();
                        collect_args(inner, is_min, &mut more);
                        for m in more {
                            args.push(self.pure_poly(&m)?);
                        }
                        nested = true;
                    }
                }
            }
            if !nested {
                args.push(p);
            }
        }
        Some(min_max_of(args, is_min))
    }

    /// Normal form of a condition as a sum of constraint products.
    pub fn cond(&mut self, b: &BoolExpr) -> Vec<Term> {
        match b {
            BoolExpr::True => vec![Term::one()],
            BoolExpr::False => Vec::new(),
            BoolExpr::And(x, y) => {
                let l = self.cond(x);
                let r = self.cond(y);
                self.product(&l, &r)
            }
            BoolExpr::Or(x, y) => {
                let mut out = self.cond(x);
                let l = self.cond(&x.negated());
                let r = self.cond(y);
                out.extend(self.product(&l, &r));
                out
            }
            BoolExpr::Not(x) => match x.as_ref() {
                BoolExpr::Holds(_) | BoolExpr::ElemsIn(..) => vec![Term::atom(Atom::Opaque(b.clone()))],
                inner => self.cond(&inner.negated()),
            },
            BoolExpr::Holds(ProbExpr::Truth(inner)) => self.cond(inner),
            BoolExpr::Holds(_) | BoolExpr::ElemsIn(..) => vec![Term::atom(Atom::Opaque(b.clone()))],
            BoolExpr::Cmp(op, x, y) => self.comparison(b, *op, x, y),
        }
    }

    fn comparison(&mut self, b: &BoolExpr, op: CmpOp, x: &ProbExpr, y: &ProbExpr) -> Vec<Term> {
        let opaque = vec![Term::atom(Atom::Opaque(b.clone()))];
        let calls_source = |e: &ProbExpr| e.calls_any(&|f| self.ctx.source_functions.contains(f));
        if calls_source(x) || calls_source(y) || !numeric_safe(x) || !numeric_safe(y) {
            return opaque;
        }
        let (Some(px), Some(py)) = (self.pure_poly(x), self.pure_poly(y)) else { return opaque };
        let d = px.sub(&py);
        let atoms = match op {
            CmpOp::Eq => vec![Atom::Eq(d)],
            CmpOp::Ne => vec![Atom::Gt(d.clone()), Atom::Gt(d.neg())],
            CmpOp::Lt => vec![Atom::Gt(d.neg())],
            CmpOp::Le => vec![Atom::Ge(d.neg())],
            CmpOp::Gt => vec![Atom::Gt(d)],
            CmpOp::Ge => vec![Atom::Ge(d)],
        };
        atoms
            .into_iter()
            .filter_map(|a| match normalize_atom(a, self.ctx) {
                Norm::True => Some(Term::one()),
                Norm::False => None,
                Norm::Atom(a) => Some(Term::atom(a)),
            })
            .collect()
    }

    /// Applies `f` to every expression node of the term and renormalizes
    /// what changed. `None` when a substitution into a negative power fails.
    pub fn rewrite(&mut self, t: &Term, f: &dyn Fn(&ProbExpr) -> Option<ProbExpr>) -> Option<Term> {
        let mut table: BTreeMap<Key, Poly> = BTreeMap::new();
        for k in t.keys() {
            let e = k.expr();
            let e2 = map_deep(&e, f);
            if e2 != e {
                self.reserve(&e2);
                let p = self.key_poly(&e2);
                table.insert(k, p);
            }
        }
        let mut keymap = |k: &Key| -> Option<Poly> { table.get(k).cloned() };
        let coef = t.coef.subst_keys(&mut keymap)?;
        let mut geo = Vec::new();
        for (b, x) in &t.geo {
            geo.push((b.subst_keys(&mut keymap)?, x.subst_keys(&mut keymap)?));
        }
        let mut prods = Vec::new();
        for p in &t.prods {
            prods.push(Prod {
                var: p.var.clone(),
                lo: p.lo.subst_keys(&mut keymap)?,
                hi: p.hi.subst_keys(&mut keymap)?,
                body: map_deep(&p.body, f),
            });
        }
        let mut atoms = Vec::new();
        let mut coef = coef;
        for a in &t.atoms {
            match a {
                Atom::Opaque(b) => {
                    let b2 = map_deep_bool(b, f);
                    if &b2 == b {
                        atoms.push(a.clone());
                        continue;
                    }
                    let ts = self.cond(&b2);
                    match ts.as_slice() {
                        [] => coef = Rf::zero(),
                        [only] if only.vars.is_empty() && only.prods.is_empty() && only.geo.is_empty() && only.coef == Rf::one() => {
                            atoms.extend(only.atoms.iter().cloned())
                        }
                        _ => atoms.push(Atom::Opaque(b2)),
                    }
                }
                other => {
                    let p = other.poly().unwrap().subst_keys(&mut keymap)?;
                    let a2 = match other {
                        Atom::Eq(_) => Atom::Eq(p),
                        Atom::Ge(_) => Atom::Ge(p),
                        _ => Atom::Gt(p),
                    };
                    match normalize_atom(a2, self.ctx) {
                        Norm::True => {}
                        Norm::False => coef = Rf::zero(),
                        Norm::Atom(a) => atoms.push(a),
                    }
                }
            }
        }
        Some(Term {
            vars: t.vars.clone(),
            atoms,
            coef,
            geo,
            prods,
        })
    }

    /// Substitutes `by` for the symbol `v` (which stays in `vars`).
    pub fn subst(&mut self, t: &Term, v: &str, by: &ProbExpr) -> Option<Term> {
        let v = v.to_string();
        let by = by.clone();
        self.rewrite(t, &move |e| e.mentions(&v).then(|| e.subst(&v, &by)))
    }

    /// Replaces the key `k` by `by` everywhere in the term.
    pub fn replace_key(&mut self, t: &Term, k: &Key, by: &Poly) -> Option<Term> {
        let from = k.expr();
        let to = by.to_expr();
        self.rewrite(t, &move |e| (e == &from).then(|| to.clone()))
    }
}

fn collect_args(e: &ProbExpr, is_min: bool, out: &mut Vec<ProbExpr>) {
    match (e, is_min) {
        (ProbExpr::Min(a, b), true) | (ProbExpr::Max(a, b), false) => {
            collect_args(a, is_min, out);
            collect_args(b, is_min, out);
        }
        (other, _) => out.push(other.clone()),
    }
}

/// True when numeric reasoning about the operand is sound: it can only be
/// a number or undefined.
fn numeric_safe(e: &ProbExpr) -> bool {
    let mut ok = true;
    e.walk(&mut |n| match n {
        ProbExpr::Lit(v) if v.as_int().is_none() => ok = false,
        ProbExpr::Cons(..) | ProbExpr::Tl(_) | ProbExpr::Truth(_) | ProbExpr::C(_) | ProbExpr::Sum(..) => ok = false,
        _ => {}
    });
    ok
}

fn nesting(e: &ProbExpr) -> usize {
    let mut depth = 0;
    e.walk(&mut |n| {
        if matches!(n, ProbExpr::Min(..) | ProbExpr::Max(..)) {
            depth += 1;
        }
    });
    depth
}

fn symbol_count(e: &ProbExpr) -> usize {
    let mut n = 0;
    e.walk(&mut |x| {
        if matches!(x, ProbExpr::Sym(_)) {
            n += 1;
        }
    });
    n
}

/// `min`/`max` of polynomials as a polynomial: a single argument, or a
/// canonical key.
pub fn min_max_of(args: Vec<Poly>, is_min: bool) -> Poly {
    let mut kept: Vec<Poly> = Vec::new();
    'next: for p in args {
        for q in kept.iter_mut() {
            if let Some(c) = p.sub(q).as_const() {
                let better = if is_min { c.is_negative() } else { c.is_positive() };
                if better {
                    *q = p.clone();
                }
                continue 'next;
            }
        }
        kept.push(p);
    }
    if kept.len() == 1 {
        return kept.pop().unwrap();
    }
    let mut exprs: Vec<ProbExpr> = kept.iter().map(Poly::to_expr).collect();
    exprs.sort_by(|a, b| {
        nesting(b)
            .cmp(&nesting(a))
            .then(symbol_count(a).cmp(&symbol_count(b)))
            .then(a.to_string().cmp(&b.to_string()))
    });
    let mut it = exprs.into_iter().rev();
    let last = it.next().unwrap();
    let e = it.fold(last, |acc, a| if is_min { ProbExpr::min(a, acc) } else { ProbExpr::max(a, acc) });
    Poly::key(Key::Op(e))
}

/// The arguments of a canonical `min`/`max` key.
pub fn min_max_args(k: &Key, nz: &mut Normalizer) -> Option<(bool, Vec<Poly>)> {
    let Key::Op(e) = k else { return None };
    let is_min = match e {
        ProbExpr::Min(..) => true,
        ProbExpr::Max(..) => false,
        _ => return None,
    };
    let mut raw = Vec::new();
    collect_args(e, is_min, &mut raw);
    let args = raw.iter().map(|a| nz.pure_poly(a)).collect::<Option<Vec<_>>>()?;
    Some((is_min, args))
}

fn subject_of(p: &Poly, ctx: &Context) -> Option<(Key, BigRational)> {
    let mut best: Option<(Key, BigRational)> = None;
    for k in p.keys() {
        if let Key::Sym(s) = k {
            if ctx.parameters.contains(s) {
                continue;
            }
            if let Some((a, _)) = p.linear_in(k) {
                if a.abs().is_one() && best.is_none() {
                    best = Some((k.clone(), a));
                }
            }
        }
    }
    best
}

fn split_signs(p: &Poly) -> (Poly, Poly) {
    let mut pos = Poly::zero();
    let mut neg = Poly::zero();
    for (m, c) in &p.0 {
        if c.is_negative() {
            neg.add_term(m.clone(), -c);
        } else {
            pos.add_term(m.clone(), c.clone());
        }
    }
    (pos, neg)
}

/// Renders an atom around its subject; the sort key groups chains.
fn render_atom(a: &Atom, ctx: &Context) -> (Option<Key>, u8, BoolExpr) {
    let Some(p) = a.poly() else {
        let Atom::Opaque(b) = a else { unreachable!() };
        return (None, 3, b.clone());
    };
    let strict = matches!(a, Atom::Gt(_));
    if let Some((k, coef)) = subject_of(p, ctx) {
        let s = Poly::key(k.clone());
        let rest = p.sub(&s.scale(&coef));
        let se = k.expr();
        return match a {
            Atom::Eq(_) => (Some(k), 0, BoolExpr::cmp(CmpOp::Eq, se, rest.scale(&-coef.recip()).to_expr())),
            _ => {
                let op = if strict { CmpOp::Lt } else { CmpOp::Le };
                if coef.is_positive() {
                    (Some(k), 1, BoolExpr::cmp(op, rest.neg().to_expr(), se))
                } else {
                    (Some(k), 2, BoolExpr::cmp(op, se, rest.to_expr()))
                }
            }
        };
    }
    let (pos, neg) = split_signs(p);
    let b = match a {
        Atom::Eq(_) => BoolExpr::cmp(CmpOp::Eq, pos.to_expr(), neg.to_expr()),
        Atom::Ge(_) => BoolExpr::cmp(CmpOp::Le, neg.to_expr(), pos.to_expr()),
        _ => BoolExpr::cmp(CmpOp::Lt, neg.to_expr(), pos.to_expr()),
    };
    (None, 3, b)
}

pub fn atoms_expr(atoms: &[Atom], ctx: &Context) -> Option<ProbExpr> {
    if atoms.is_empty() {
        return None;
    }
    let mut parts: Vec<(Option<Key>, u8, BoolExpr)> = atoms.iter().map(|a| render_atom(a, ctx)).collect();
    parts.sort_by(|a, b| match (&a.0, &b.0) {
        (Some(x), Some(y)) => x.cmp(y).then(a.1.cmp(&b.1)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.1.cmp(&b.1),
    });
    Some(ProbExpr::c(BoolExpr::all(parts.into_iter().map(|p| p.2))))
}

pub fn geo_expr(base: &Rf, exp: &Poly) -> ProbExpr {
    let b = base.to_expr();
    ProbExpr::pow(b, exp.to_expr())
}

pub fn term_expr(t: &Term, ctx: &Context) -> ProbExpr {
    let mut factors = Vec::new();
    if t.coef != Rf::one() {
        factors.push(t.coef.to_expr());
    }
    for (b, e) in &t.geo {
        factors.push(geo_expr(b, e));
    }
    for p in &t.prods {
        factors.push(ProbExpr::fin_prod(&p.var, p.lo.to_expr(), p.hi.to_expr(), p.body.clone()));
    }
    if let Some(c) = atoms_expr(&t.atoms, ctx) {
        factors.push(c);
    }
    ProbExpr::sums(&t.vars, ProbExpr::product(factors))
}

pub fn terms_expr(ts: &[Term], ctx: &Context) -> ProbExpr {
    let mut out: Option<ProbExpr> = None;
    for t in ts {
        let negative = t.coef.as_const().is_some_and(|c| c.is_negative())
            || (t.coef.den.is_empty() && t.coef.num.0.len() == 1 && t.coef.num.0.values().all(|c| c.is_negative()));
        if let (true, Some(acc)) = (negative, out.as_ref()) {
            let mut pos = t.clone();
            pos.coef = pos.coef.neg();
            out = Some(ProbExpr::sub(acc.clone(), term_expr(&pos, ctx)));
            continue;
        }
        let e = term_expr(t, ctx);
        out = Some(match out {
            None => e,
            Some(acc) => ProbExpr::add(acc, e),
        });
    }
    out.unwrap_or_else(ProbExpr::zero)
}
