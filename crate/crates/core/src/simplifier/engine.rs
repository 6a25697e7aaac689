//! Term-level rewriting: point masses, interval sums, geometric series,
//! `min`/`max` splits and finite-product elimination.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::facts::{entails, entails_ge, infeasible, lins, Bounds, Lin};
use super::poly::{Key, Poly, Rf};
use super::term::{int_poly, min_max_args, min_max_of, normalize_atom, term_expr, Atom, Norm, Normalizer, Prod, Term};
use super::Context;
use crate::probexpr::{BoolExpr, CmpOp, EvalCtx, Limits, ProbExpr};

/// Largest power of the summation variable handled by the closed forms.
const MAX_POWER: i64 = 12;
/// Finite products with at most this many constant factors are unrolled.
const UNROLL: i64 = 32;

pub struct Engine<'a> {
    pub nz: Normalizer<'a>,
    ctx: &'a Context,
    assumptions: Vec<Lin>,
    pub budget: u64,
    pub steps: u64,
    pub trace: Vec<String>,
    pub exhausted: bool,
    tracing: bool,
}

enum Outcome {
    Done(Term),
    Rewrite(&'static str, String, Vec<Term>),
}

fn faulhaber_var() -> Key {
    Key::Sym("#N".into())
}

fn binomial(n: i64, k: i64) -> BigInt {
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

/// `sum_{j=0}^{N} j^k` as a polynomial in `N`, for every `k <= max`.
fn faulhaber(max: i64) -> Vec<Poly> {
    let n = Poly::key(faulhaber_var());
    let mut out: Vec<Poly> = Vec::new();
    for k in 0..=max {
        let mut acc = n.add(&Poly::one()).pow((k + 1) as u32);
        for (m, s) in out.iter().enumerate() {
            acc = acc.sub(&s.scale(&BigRational::from_integer(binomial(k + 1, m as i64))));
        }
        out.push(acc.scale(&BigRational::new(BigInt::one(), BigInt::from(k + 1))));
    }
    out
}

fn at(p: &Poly, value: &Poly) -> Poly {
    let n = faulhaber_var();
    p.subst_keys(&mut |k| (k == &n).then(|| value.clone())).expect("polynomial substitution")
}

/// `sum_{u>=0} u^m a^u` for `m <= 2`.
fn geometric_moment(a: &Rf, m: i64) -> Option<Rf> {
    let one_minus = Rf::one().sub(a);
    match m {
        0 => one_minus.inv(),
        1 => a.div(&one_minus.pow(2)?),
        2 => a.mul(&Rf::one().add(a)).div(&one_minus.pow(3)?),
        _ => None,
    }
}

fn with_atom(mut t: Term, a: Atom, ctx: &Context) -> Option<Term> {
    match normalize_atom(a, ctx) {
        Norm::True => Some(t),
        Norm::False => None,
        Norm::Atom(a) => {
            t.atoms.push(a);
            Some(t)
        }
    }
}

impl<'a> Engine<'a> {
    pub fn new(ctx: &'a Context, budget: u64, tracing: bool) -> Self {
        let mut nz = Normalizer::new(ctx);
        let mut assumptions = Vec::new();
        for b in &ctx.assumptions {
            let ts = nz.cond(b);
            if let [t] = ts.as_slice() {
                if t.vars.is_empty() && t.prods.is_empty() && t.geo.is_empty() {
                    assumptions.extend(lins(&t.atoms));
                }
            }
        }
        Engine {
            nz,
            ctx,
            assumptions,
            budget,
            steps: 0,
            trace: Vec::new(),
            exhausted: false,
            tracing,
        }
    }

    /// Rewrites every term to normal form (or until the budget runs out),
    /// then merges like terms.
    pub fn reduce(&mut self, terms: Vec<Term>) -> Vec<Term> {
        let mut work: Vec<Term> = terms.into_iter().rev().collect();
        let mut done = Vec::new();
        while let Some(t) = work.pop() {
            if self.steps >= self.budget {
                self.exhausted = true;
                done.push(t);
                continue;
            }
            let Some(t) = self.cleanup(t) else { continue };
            match self.step(t) {
                Outcome::Done(t) => done.push(t),
                Outcome::Rewrite(rule, what, out) => {
                    self.steps += 1;
                    if self.tracing {
                        let shown: Vec<String> = out.iter().map(|t| term_expr(t, self.ctx).to_string()).collect();
                        let rhs = if shown.is_empty() { "0".to_string() } else { shown.join(" + ") };
                        self.trace.push(format!("[{rule}] {what}: {rhs}"));
                    }
                    work.extend(out.into_iter().rev());
                }
            }
        }
        self.merge(done)
    }

    fn merge(&mut self, terms: Vec<Term>) -> Vec<Term> {
        let mut groups: Vec<(Term, Rf)> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for t in terms {
            let key = format!("{:?}", t.shape());
            match index.get(&key) {
                Some(&i) => groups[i].1 = groups[i].1.add(&t.coef),
                None => {
                    index.insert(key, groups.len());
                    let c = t.coef.clone();
                    groups.push((t, c));
                }
            }
        }
        let mut out: Vec<Term> = groups
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(mut t, c)| {
                t.coef = c;
                t
            })
            .collect();
        while let Some((i, j)) = self.relaxable_pair(&out) {
            let tight = out.remove(i);
            let j = if j > i { j - 1 } else { j };
            out[j].coef = out[j].coef.add(&tight.coef);
            if out[j].coef.is_zero() {
                out.remove(j);
            }
        }
        out
    }

    /// Two terms that differ only in one lower bound, where the tighter one
    /// has a coefficient vanishing on the gap; its bound can be relaxed.
    fn relaxable_pair(&self, ts: &[Term]) -> Option<(usize, usize)> {
        for i in 0..ts.len() {
            for j in 0..ts.len() {
                if i != j && self.relaxes_to(&ts[i], &ts[j]) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    fn relaxes_to(&self, tight: &Term, loose: &Term) -> bool {
        let (v1, a1, g1, p1) = tight.shape();
        let (v2, a2, g2, p2) = loose.shape();
        if v1 != v2 || g1 != g2 || p1 != p2 || a1.len() != a2.len() {
            return false;
        }
        let only_t: Vec<&Atom> = a1.iter().filter(|a| !a2.contains(a)).collect();
        let only_l: Vec<&Atom> = a2.iter().filter(|a| !a1.contains(a)).collect();
        let ([Atom::Ge(pt)], [Atom::Ge(pl)]) = (only_t.as_slice(), only_l.as_slice()) else { return false };
        let Some(d) = pl.sub(pt).as_const() else { return false };
        if !d.is_integer() || !d.is_positive() || d > BigRational::from_integer(8.into()) {
            return false;
        }
        let Some((k, a, rest)) = pl.keys().into_iter().find_map(|k| {
            let (a, rest) = pl.linear_in(k)?;
            a.abs().is_one().then(|| (k.clone(), a, rest))
        }) else {
            return false;
        };
        let gap = d.to_integer().to_i64().unwrap_or(0);
        (0..gap).all(|g| {
            let value = Poly::int(g).sub(&rest).scale(&a.recip());
            tight
                .coef
                .subst_keys(&mut |key| (key == &k).then(|| value.clone()))
                .is_some_and(|c| c.is_zero())
        })
    }

    /// True when the facts give `p >= -d` for some small `d` and `coef`
    /// vanishes wherever `-d <= p < 0`, so the bound `p >= 0` is redundant.
    fn vanishes_on_gap(&self, coef: &Rf, p: &Poly, facts: &[Lin]) -> bool {
        if coef.as_const().is_some() {
            return false;
        }
        let Some((k, a, rest)) = p.keys().into_iter().find_map(|k| {
            let (a, rest) = p.linear_in(k)?;
            a.abs().is_one().then(|| (k.clone(), a, rest))
        }) else {
            return false;
        };
        let Some(d) = (1..=8).find(|d| entails_ge(facts, &p.add(&Poly::int(*d)), self.ctx)) else {
            return false;
        };
        (-d..0).all(|g| {
            let value = Poly::int(g).sub(&rest).scale(&a.recip());
            coef.subst_keys(&mut |key| (key == &k).then(|| value.clone())).is_some_and(|c| c.is_zero())
        })
    }

    fn facts(&self, atoms: &[Atom]) -> Vec<Lin> {
        let mut f = lins(atoms);
        f.extend(self.assumptions.iter().cloned());
        f
    }

    /// Drops infeasible terms, entailed atoms and dominated `min`/`max`
    /// arguments; folds constant geometric factors and empty products.
    pub fn cleanup(&mut self, mut t: Term) -> Option<Term> {
        for _ in 0..16 {
            if t.coef.is_zero() {
                return None;
            }
            let mut atoms: Vec<Atom> = Vec::new();
            for a in std::mem::take(&mut t.atoms) {
                match self.decide_opaque(&a) {
                    Some(true) => continue,
                    Some(false) => return None,
                    None => {}
                }
                if !atoms.contains(&a) {
                    atoms.push(a);
                }
            }
            for a in &atoms {
                if let Atom::Opaque(b) = a {
                    if atoms.contains(&Atom::Opaque(b.negated())) {
                        return None;
                    }
                }
            }
            if infeasible(&self.facts(&atoms), self.ctx) {
                return None;
            }
            let mut i = 0;
            while i < atoms.len() {
                if atoms[i].poly().is_some() {
                    let mut others = atoms.clone();
                    let a = others.remove(i);
                    if entails(&self.facts(&others), &a, self.ctx) {
                        atoms = others;
                        continue;
                    }
                }
                i += 1;
            }
            let mut i = 0;
            while i < atoms.len() {
                if let Atom::Ge(p) = &atoms[i] {
                    let mut others = atoms.clone();
                    others.remove(i);
                    if self.vanishes_on_gap(&t.coef, p, &self.facts(&others)) {
                        atoms = others;
                        continue;
                    }
                }
                i += 1;
            }
            t.atoms = atoms;
            self.fold_geo(&mut t)?;
            t.prods.retain(|p| {
                let empty = p.hi.sub(&p.lo).as_const().is_some_and(|c| c.is_negative());
                let trivial = p.body == ProbExpr::one() || matches!(&p.body, ProbExpr::C(b) if **b == BoolExpr::True);
                !(empty || trivial)
            });
            match self.simplify_min_max(&t) {
                Some(next) => t = next,
                None => return Some(t),
            }
        }
        Some(t)
    }

    fn decide_opaque(&self, a: &Atom) -> Option<bool> {
        let Atom::Opaque(b) = a else { return None };
        if !b.free_symbols().is_empty() {
            return None;
        }
        let ev = EvalCtx::new(&self.ctx.functions, self.ctx.source.as_ref(), Limits::default());
        match ev.eval_bool(b, &Default::default()) {
            Ok(Some(v)) => Some(v),
            Ok(None) => Some(false),
            Err(_) => None,
        }
    }

    fn fold_geo(&self, t: &mut Term) -> Option<()> {
        let mut merged: Vec<(Rf, Poly)> = Vec::new();
        for (b, e) in std::mem::take(&mut t.geo) {
            if e.is_zero() || b.as_const().is_some_and(|c| c.is_one()) {
                continue;
            }
            if let Some(k) = e.as_const().filter(|k| k.is_integer()).and_then(|k| k.to_integer().to_i64()) {
                if let Some(p) = b.pow(k) {
                    t.coef = t.coef.mul(&p);
                    continue;
                }
            }
            match merged.iter_mut().find(|(b2, _)| *b2 == b) {
                Some(slot) => slot.1 = slot.1.add(&e),
                None => merged.push((b, e)),
            }
        }
        t.geo = merged;
        if t.coef.is_zero() {
            return None;
        }
        Some(())
    }

    /// Resolves one `min`/`max` key whose arguments are ordered by the facts.
    fn simplify_min_max(&mut self, t: &Term) -> Option<Term> {
        let facts = self.facts(&t.atoms);
        for k in t.keys() {
            let Some((is_min, args)) = min_max_args(&k, &mut self.nz) else { continue };
            let mut kept = args.clone();
            let mut i = 0;
            while i < kept.len() {
                let dominated = (0..kept.len()).any(|j| {
                    j != i && {
                        let d = if is_min { kept[i].sub(&kept[j]) } else { kept[j].sub(&kept[i]) };
                        entails_ge(&facts, &d, self.ctx)
                    }
                });
                if dominated && kept.len() > 1 {
                    kept.remove(i);
                } else {
                    i += 1;
                }
            }
            if kept.len() < args.len() {
                let by = min_max_of(kept, is_min);
                return self.nz.replace_key(t, &k, &by);
            }
        }
        None
    }

    fn step(&mut self, t: Term) -> Outcome {
        for v in t.vars.iter().rev() {
            if let Some(out) = self.point_mass(&t, v) {
                return out;
            }
        }
        for v in t.vars.iter().rev() {
            if let Some(out) = self.interval_sum(&t, v, true) {
                return out;
            }
        }
        if let Some(out) = self.split(&t, true) {
            return out;
        }
        for i in 0..t.prods.len() {
            if let Some(out) = self.eliminate_product(&t, i) {
                return out;
            }
        }
        Outcome::Done(t)
    }

    /// R1: `sum_v C(v = e) f(v) = f(e)`.
    fn point_mass(&mut self, t: &Term, v: &str) -> Option<Outcome> {
        let key = Key::Sym(v.to_string());
        for (i, a) in t.atoms.iter().enumerate() {
            let Atom::Eq(p) = a else { continue };
            let Some((c, rest)) = p.linear_in(&key) else { continue };
            if !c.abs().is_one() {
                continue;
            }
            let value = rest.scale(&-c.recip());
            if !int_poly(&value, self.ctx) {
                continue;
            }
            let mut base = t.clone();
            base.atoms.remove(i);
            base.vars.retain(|w| w != v);
            let by = value.to_expr();
            let out = self.nz.subst(&base, v, &by)?;
            return Some(Outcome::Rewrite("R1", format!("sum_{v} with {v} = {by}"), vec![out]));
        }
        None
    }

    /// R2/R3 (with R4 bound fusion) and the geometric rules R6/R7.
    fn interval_sum(&mut self, t: &Term, v: &str, allow_flip: bool) -> Option<Outcome> {
        let key = Key::Sym(v.to_string());
        if t.prods.iter().any(|p| p.lo.mentions(v) || p.hi.mentions(v) || p.body.mentions(v)) {
            return None;
        }
        if t.keys().iter().any(|k| matches!(k, Key::Op(_)) && k.mentions(v)) {
            return None;
        }
        if t.coef.den.keys().any(|d| d.mentions(v)) {
            return None;
        }
        let powers = t.coef.num.by_powers(&key);
        if powers.keys().any(|e| *e < 0 || *e > MAX_POWER) {
            return None;
        }
        let mut ratio = Rf::one();
        let mut geo = Vec::new();
        for (b, e) in &t.geo {
            if b.mentions(v) {
                return None;
            }
            let (c, rest) = e.linear_in(&key)?;
            if !c.is_integer() {
                return None;
            }
            if !c.is_zero() {
                ratio = ratio.mul(&b.pow(c.to_integer().to_i64()?)?);
            }
            if !rest.is_zero() {
                geo.push((b.clone(), rest));
            }
        }
        let mut lowers = Vec::new();
        let mut uppers = Vec::new();
        let mut others = Vec::new();
        for a in &t.atoms {
            if !a.mentions(v) {
                others.push(a.clone());
                continue;
            }
            let Atom::Ge(p) = a else { return None };
            let (c, rest) = p.linear_in(&key)?;
            if !int_poly(&rest, self.ctx) {
                return None;
            }
            if c.is_one() {
                lowers.push(rest.neg());
            } else if (-c).is_one() {
                uppers.push(rest);
            } else {
                return None;
            }
        }
        let geometric = ratio != Rf::one();
        if uppers.is_empty() && geometric && allow_flip && !lowers.is_empty() {
            // handled below
        } else if lowers.is_empty() && geometric && allow_flip && !uppers.is_empty() {
            let neg = ProbExpr::neg(ProbExpr::sym(v));
            let flipped = self.nz.subst(t, v, &neg)?;
            return self.interval_sum(&flipped, v, false).map(|o| match o {
                Outcome::Rewrite(r, w, out) => Outcome::Rewrite(r, format!("{w} (after {v} := -{v})"), out),
                d => d,
            });
        } else if lowers.is_empty() || (uppers.is_empty() && !geometric) {
            return None;
        }
        let facts = self.facts(&others);
        prune(&mut lowers, |a, b| entails_ge(&facts, &b.sub(a), self.ctx));
        prune(&mut uppers, |a, b| entails_ge(&facts, &a.sub(b), self.ctx));
        let fused = lowers.len() > 1 || uppers.len() > 1;
        let lo = min_max_of(lowers, false);
        let base = Term {
            vars: t.vars.iter().filter(|w| *w != v).cloned().collect(),
            atoms: others,
            coef: Rf::one(),
            geo,
            prods: t.prods.clone(),
        };
        let den = Rf {
            num: Poly::one(),
            den: t.coef.den.clone(),
        };
        if !geometric {
            let hi = min_max_of(uppers, true);
            let count = hi.sub(&lo).add(&Poly::one());
            let range = format!("sum_{v} over [{}, {}]", lo.to_expr(), hi.to_expr());
            if powers.keys().all(|e| *e == 0) && fused {
                let mut out = base;
                let c = powers.get(&0).cloned().unwrap_or_default();
                out.coef = Rf::poly(c.mul(&min_max_of(vec![count, Poly::zero()], false))).mul(&den);
                return Some(Outcome::Rewrite("R2", range, vec![out]));
            }
            let max = *powers.keys().max().unwrap_or(&0);
            let f = faulhaber(max);
            let l1 = lo.sub(&Poly::one());
            let mut total = Poly::zero();
            for (k, c) in &powers {
                let s = at(&f[*k as usize], &hi).sub(&at(&f[*k as usize], &l1));
                total = total.add(&c.mul(&s));
            }
            let rule = if max == 0 { "R2" } else { "R3" };
            let mut out = base;
            out.coef = Rf::poly(total).mul(&den);
            let out = with_atom(out, Atom::Ge(hi.sub(&lo)), self.ctx);
            return Some(Outcome::Rewrite(rule, range, out.into_iter().collect()));
        }
        let bounds = Bounds::from_lins(&facts);
        let iv = bounds.rf(&ratio);
        let nonzero_base = iv.above_zero() || entails_ge(&facts, &lo, self.ctx);
        if uppers.is_empty() {
            if !(iv.at_least_zero() && iv.below_one() && nonzero_base) {
                return None;
            }
            let mut acc = Rf::zero();
            for (k, c) in &powers {
                if *k > 2 {
                    return None;
                }
                for m in 0..=*k {
                    let b = BigRational::from_integer(binomial(*k, m));
                    let lpow = Rf::poly(lo.pow((k - m) as u32).scale(&b));
                    acc = acc.add(&Rf::poly(c.clone()).mul(&lpow).mul(&geometric_moment(&ratio, m)?));
                }
            }
            let mut out = base;
            out.coef = acc.mul(&den);
            out.geo.push((ratio.clone(), lo.clone()));
            let rule = if powers.keys().any(|k| *k > 0) { "R7" } else { "R6" };
            let what = format!("sum_{v} >= {} of ({})^{v}", lo.to_expr(), ratio.to_expr());
            return Some(Outcome::Rewrite(rule, what, vec![out]));
        }
        if powers.keys().any(|k| *k != 0) || !(iv.below_one() || iv.above_one()) || !nonzero_base {
            return None;
        }
        let hi = min_max_of(uppers, true);
        let c = powers.get(&0).cloned().unwrap_or_default();
        let scale = Rf::poly(c).mul(&den).div(&ratio.sub(&Rf::one()))?;
        let mut top = base.clone();
        top.coef = scale.clone();
        top.geo.push((ratio.clone(), hi.add(&Poly::one())));
        let mut bottom = base;
        bottom.coef = scale.neg();
        bottom.geo.push((ratio.clone(), lo.clone()));
        let guard = Atom::Ge(hi.sub(&lo));
        let out: Vec<Term> = [top, bottom]
            .into_iter()
            .filter_map(|t| with_atom(t, guard.clone(), self.ctx))
            .collect();
        let what = format!("sum_{v} over [{}, {}] of ({})^{v}", lo.to_expr(), hi.to_expr(), ratio.to_expr());
        Some(Outcome::Rewrite("R6", what, out))
    }

    /// R5/R5': case split on the innermost `min`/`max` that mentions a
    /// summation variable (or any, when `bound_only` is false).
    pub fn split_any(&mut self, t: &Term) -> Option<Vec<Term>> {
        match self.split(t, false)? {
            Outcome::Rewrite(_, _, out) => Some(out),
            Outcome::Done(_) => None,
        }
    }

    fn split(&mut self, t: &Term, bound_only: bool) -> Option<Outcome> {
        let mut candidates: Vec<(usize, ProbExpr)> = Vec::new();
        for k in t.keys() {
            key_min_max(&k.expr(), &mut candidates);
        }
        for a in &t.atoms {
            if let Atom::Opaque(b) = a {
                b.walk(&mut |e| {
                    if matches!(e, ProbExpr::Min(..) | ProbExpr::Max(..)) {
                        candidates.push((nesting(e), e.clone()));
                    }
                });
            }
        }
        candidates.sort();
        candidates.dedup();
        let relevant = |e: &ProbExpr| !bound_only || t.vars.iter().any(|v| e.mentions(v));
        let (_, e) = candidates.into_iter().find(|(_, e)| relevant(e))?;
        let key = Key::Op(e.clone());
        let (is_min, args) = min_max_args(&key, &mut self.nz)?;
        let (first, rest) = args.split_first()?;
        let second = min_max_of(rest.to_vec(), is_min);
        let (a, b) = (first.clone(), second);
        let (take_a, take_b) = if is_min {
            (Atom::Ge(b.sub(&a)), Atom::Gt(a.sub(&b)))
        } else {
            (Atom::Ge(a.sub(&b)), Atom::Gt(b.sub(&a)))
        };
        let mut out = Vec::new();
        for (by, guard) in [(a, take_a), (b, take_b)] {
            let replaced = self.nz.replace_key(t, &key, &by)?;
            if let Some(r) = with_atom(replaced, guard, self.ctx) {
                out.push(r);
            }
        }
        let rule = if is_min { "R5'" } else { "R5" };
        Some(Outcome::Rewrite(rule, format!("split {e}"), out))
    }

    /// R8: finite products of constraints.
    fn eliminate_product(&mut self, t: &Term, i: usize) -> Option<Outcome> {
        let p = &t.prods[i];
        let mut base = t.clone();
        base.prods.remove(i);
        let (lo, hi) = (p.lo.to_expr(), p.hi.to_expr());
        if let Some(n) = p.hi.sub(&p.lo).as_const() {
            let count = n.to_integer().to_i64()? + 1;
            if count <= UNROLL {
                let mut factors = Vec::new();
                let start = p.lo.as_const();
                for k in 0..count.max(0) {
                    let j = match &start {
                        Some(s) => ProbExpr::Num(s + BigRational::from_integer(k.into())),
                        None => ProbExpr::add(lo.clone(), ProbExpr::int(k)),
                    };
                    factors.push(p.body.subst(&p.var, &j));
                }
                let repl = ProbExpr::product(factors);
                return Some(self.replace_product(base, p, &repl, "unroll"));
            }
        }
        let ProbExpr::C(b) = &p.body else {
            if let ProbExpr::Mul(x, y) = &p.body {
                let mut out = base;
                for part in [x, y] {
                    out.prods.push(Prod {
                        var: p.var.clone(),
                        lo: p.lo.clone(),
                        hi: p.hi.clone(),
                        body: (**part).clone(),
                    });
                }
                return Some(Outcome::Rewrite("R8", "split product".into(), vec![out]));
            }
            return None;
        };
        let empty = BoolExpr::cmp(CmpOp::Lt, hi.clone(), lo.clone());
        let nonempty = BoolExpr::cmp(CmpOp::Ge, hi.clone(), lo.clone());
        let facts = self.facts(&t.atoms);
        let repl = match b.as_ref() {
            BoolExpr::And(x, y) => {
                let mut out = base;
                for part in [x, y] {
                    out.prods.push(Prod {
                        var: p.var.clone(),
                        lo: p.lo.clone(),
                        hi: p.hi.clone(),
                        body: ProbExpr::c((**part).clone()),
                    });
                }
                return Some(Outcome::Rewrite("R8", "split product".into(), vec![out]));
            }
            b if !b.free_symbols().contains(&p.var) => ProbExpr::add(
                ProbExpr::c(empty),
                ProbExpr::mul(ProbExpr::c(nonempty), ProbExpr::c(b.clone())),
            ),
            BoolExpr::Cmp(op, x, y) => {
                let d = self.nz.pure_poly(&ProbExpr::sub(x.clone(), y.clone()))?;
                let (c, rest) = d.linear_in(&Key::Sym(p.var.clone()))?;
                if c.is_zero() {
                    return None;
                }
                let at = |j: &ProbExpr| b.subst(&p.var, j);
                match op {
                    CmpOp::Ne => {
                        if !c.abs().is_one() {
                            return None;
                        }
                        let root = rest.scale(&-c.recip());
                        if !int_poly(&root, self.ctx) {
                            return None;
                        }
                        let r = root.to_expr();
                        let below = ProbExpr::c(BoolExpr::cmp(CmpOp::Lt, r.clone(), lo.clone()));
                        let above = ProbExpr::c(BoolExpr::cmp(CmpOp::Gt, r, hi.clone()));
                        let size = p.hi.sub(&p.lo).add(&Poly::one());
                        if entails_ge(&facts, &size, self.ctx) {
                            ProbExpr::add(below, above)
                        } else {
                            let guard = ProbExpr::c(nonempty);
                            ProbExpr::total([
                                ProbExpr::c(empty),
                                ProbExpr::mul(guard.clone(), below),
                                ProbExpr::mul(guard, above),
                            ])
                        }
                    }
                    CmpOp::Eq => ProbExpr::add(
                        ProbExpr::c(empty),
                        ProbExpr::mul(ProbExpr::c(BoolExpr::cmp(CmpOp::Eq, hi.clone(), lo.clone())), ProbExpr::c(at(&lo))),
                    ),
                    _ => {
                        let grows = matches!(op, CmpOp::Gt | CmpOp::Ge) == c.is_positive();
                        let worst = if grows { &lo } else { &hi };
                        ProbExpr::add(
                            ProbExpr::c(empty),
                            ProbExpr::mul(ProbExpr::c(nonempty), ProbExpr::c(at(worst))),
                        )
                    }
                }
            }
            _ => return None,
        };
        Some(self.replace_product(base, p, &repl, "R8"))
    }

    fn replace_product(&mut self, base: Term, p: &Prod, repl: &ProbExpr, rule: &'static str) -> Outcome {
        self.nz.reserve(repl);
        let parts = self.nz.terms(repl);
        let out: Vec<Term> = parts.iter().map(|r| base.mul(r)).collect();
        let shown = ProbExpr::fin_prod(&p.var, p.lo.to_expr(), p.hi.to_expr(), p.body.clone());
        Outcome::Rewrite(rule, format!("eliminate {shown}"), out)
    }

    pub fn is_closed(terms: &[Term]) -> bool {
        terms.iter().all(|t| t.vars.is_empty() && t.prods.is_empty())
    }

    pub fn has_infeasible_facts(&self) -> bool {
        infeasible(&self.assumptions, self.ctx)
    }
}

/// Removes every bound that another bound dominates; `beats(a, b)` means
/// keeping `b` makes `a` redundant.
fn prune(bounds: &mut Vec<Poly>, beats: impl Fn(&Poly, &Poly) -> bool) {
    bounds.sort();
    bounds.dedup();
    let mut i = 0;
    while i < bounds.len() {
        let redundant = (0..bounds.len()).any(|j| j != i && beats(&bounds[i], &bounds[j]));
        if redundant && bounds.len() > 1 {
            bounds.remove(i);
        } else {
            i += 1;
        }
    }
}

fn nesting(e: &ProbExpr) -> usize {
    let mut n = 0;
    e.walk(&mut |x| {
        if matches!(x, ProbExpr::Min(..) | ProbExpr::Max(..)) {
            n += 1;
        }
    });
    n
}

fn key_min_max(e: &ProbExpr, out: &mut Vec<(usize, ProbExpr)>) {
    e.walk(&mut |x| {
        if matches!(x, ProbExpr::Min(..) | ProbExpr::Max(..)) {
            out.push((nesting(x), x.clone()));
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn faulhaber_small_cases() {
        let f = faulhaber(3);
        let five = Poly::int(5);
        assert_eq!(at(&f[0], &five), Poly::int(6));
        assert_eq!(at(&f[1], &five), Poly::int(15));
        assert_eq!(at(&f[2], &five), Poly::int(55));
        assert_eq!(at(&f[3], &five), Poly::int(225));
    }
}
