//! Removes source-program calls from constraint terms.
//!
//! Conditionals are split, non-recursive calls are inlined, and a constraint
//! `C(w = f(x̄))` on a primitive-recursive `f` becomes
//!
//! ```text
//! sum_i C(i >= 0) * prod_{j=0}^{i-1} C(not b(h(j,x̄))) * C(b(h(i,x̄))) * C(w = g(h(i,x̄)))
//! ```
//!
//! where `h(i, x̄)` is the closed form of the argument tuple after `i`
//! recursive steps. Calls whose iterate has no closed form are left in place
//! and reported.

use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::NonAffineIteration;
use crate::lang::{FunctionDef, FunctionKind};
use crate::probexpr::{
    cond_from_source, fresh_name, from_source, BoolExpr, CmpOp, DistProgram, ProbExpr, ProbFunction,
};

/// What unfolding did, for tracing and for the approximator.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UnfoldReport {
    pub trace: Vec<String>,
    /// Primitive-recursive functions whose calls stay opaque.
    pub non_affine: BTreeSet<String>,
    /// Auxiliary probability functions added by the call rule.
    pub aux_functions: Vec<String>,
}

impl UnfoldReport {
    pub fn is_exact(&self) -> bool {
        self.non_affine.is_empty()
    }
}

/// Splits the outermost conditional inside every constraint:
/// `C(φ[if b then t else e])` becomes `C(b)*C(φ[t]) + C(not b)*C(φ[e])`.
pub fn unfold_conditional(expr: &ProbExpr) -> ProbExpr {
    match expr {
        ProbExpr::C(b) => match split_ite(b) {
            Some((c, t, e)) => ProbExpr::add(
                ProbExpr::mul(ProbExpr::c(c.clone()), ProbExpr::c(t)),
                ProbExpr::mul(ProbExpr::c(c.negated()), ProbExpr::c(e)),
            ),
            None => expr.clone(),
        },
        ProbExpr::Sum(v, body) => ProbExpr::sum(v, unfold_conditional(body)),
        ProbExpr::FinProd { var, lo, hi, body } => {
            ProbExpr::fin_prod(var, (**lo).clone(), (**hi).clone(), unfold_conditional(body))
        }
        other => other.map_children(&mut |c| unfold_conditional(c)),
    }
}

/// Closed form of `h(i, x̄)` for componentwise affine updates
/// `x <- x + c`, `x <- c` and `x <- a*x + c`, where `c` only mentions
/// arguments that never change.
pub fn iterate_closed_form(def: &FunctionDef, i: &str) -> Result<Vec<ProbExpr>, NonAffineIteration> {
    let parts = def.primrec_parts().ok_or_else(|| NonAffineIteration {
        function: def.name.clone(),
        param: String::new(),
        update: "not primitive recursive".into(),
    })?;
    let steps: Vec<ProbExpr> = parts.step_args.iter().map(from_source).collect();
    let invariant: BTreeSet<&str> = def
        .params
        .iter()
        .zip(&steps)
        .filter(|(p, e)| matches!(e, ProbExpr::Sym(s) if s == *p))
        .map(|(p, _)| p.as_str())
        .collect();
    let i = ProbExpr::sym(i);
    def.params
        .iter()
        .zip(&steps)
        .map(|(p, e)| {
            let fail = || NonAffineIteration {
                function: def.name.clone(),
                param: p.clone(),
                update: e.to_string(),
            };
            let (a, c) = affine_in(e, p).ok_or_else(fail)?;
            if !c.free_symbols().iter().all(|s| invariant.contains(s.as_str())) {
                return Err(fail());
            }
            let x = ProbExpr::sym(p);
            if a.is_zero() {
                Ok(ProbExpr::ite(BoolExpr::cmp(CmpOp::Eq, i.clone(), ProbExpr::zero()), x, c))
            } else if a.is_one() {
                Ok(plus(x, times(c, i.clone())))
            } else if a.is_integer() {
                let ai = ProbExpr::pow(ProbExpr::Num(a.clone()), i.clone());
                let d = a.clone() - BigRational::one();
                let scale = match c.as_num() {
                    Some(k) => ProbExpr::Num(k / &d),
                    None if d.is_one() => c,
                    None => ProbExpr::div(c, ProbExpr::Num(d)),
                };
                Ok(plus(
                    times(ai.clone(), x),
                    times(scale, ProbExpr::sub(ai, ProbExpr::one())),
                ))
            } else {
                Err(fail())
            }
        })
        .collect()
}

/// Writes `e` as `a*x + rest` with `rest` free of `x`.
fn affine_in(e: &ProbExpr, x: &str) -> Option<(BigRational, ProbExpr)> {
    if !e.mentions(x) {
        return Some((BigRational::zero(), e.clone()));
    }
    match e {
        ProbExpr::Sym(s) if s == x => Some((BigRational::one(), ProbExpr::zero())),
        ProbExpr::Add(a, b) => {
            let (p, r) = affine_in(a, x)?;
            let (q, s) = affine_in(b, x)?;
            Some((p + q, plus(r, s)))
        }
        ProbExpr::Sub(a, b) => {
            let (p, r) = affine_in(a, x)?;
            let (q, s) = affine_in(b, x)?;
            Some((p - q, minus(r, s)))
        }
        ProbExpr::Neg(a) => {
            let (p, r) = affine_in(a, x)?;
            Some((-p, negate(r)))
        }
        ProbExpr::Mul(a, b) => {
            let (k, other) = match (a.as_num(), b.as_num()) {
                (Some(k), _) => (k, b),
                (_, Some(k)) => (k, a),
                _ => return None,
            };
            let (p, r) = affine_in(other, x)?;
            Some((k * p, times(ProbExpr::Num(k.clone()), r)))
        }
        _ => None,
    }
}

fn is_zero(e: &ProbExpr) -> bool {
    e.as_num().is_some_and(Zero::is_zero)
}

fn plus(a: ProbExpr, b: ProbExpr) -> ProbExpr {
    if is_zero(&b) {
        return a;
    }
    if is_zero(&a) {
        return b;
    }
    match b {
        ProbExpr::Num(k) if k < BigRational::zero() => ProbExpr::sub(a, ProbExpr::Num(-k)),
        ProbExpr::Mul(k, rest) if matches!(k.as_num(), Some(k) if *k < BigRational::zero()) => {
            let k = -k.as_num().unwrap().clone();
            ProbExpr::sub(a, times(ProbExpr::Num(k), *rest))
        }
        b => ProbExpr::add(a, b),
    }
}

fn negate(e: ProbExpr) -> ProbExpr {
    match e {
        ProbExpr::Num(k) => ProbExpr::Num(-k),
        ProbExpr::Neg(a) => *a,
        e => ProbExpr::neg(e),
    }
}

fn minus(a: ProbExpr, b: ProbExpr) -> ProbExpr {
    if is_zero(&b) {
        return a;
    }
    if is_zero(&a) {
        return negate(b);
    }
    match b {
        ProbExpr::Num(k) if k < BigRational::zero() => ProbExpr::add(a, ProbExpr::Num(-k)),
        b => ProbExpr::sub(a, b),
    }
}

fn times(a: ProbExpr, b: ProbExpr) -> ProbExpr {
    if is_zero(&a) || is_zero(&b) {
        return ProbExpr::zero();
    }
    if a.as_num().is_some_and(One::is_one) {
        return b;
    }
    if b.as_num().is_some_and(One::is_one) {
        return a;
    }
    ProbExpr::mul(a, b)
}

/// Replaces every `C(w = f(args))` (either orientation) by the
/// primitive-recursion unfolding of `def`.
pub fn unfold_primrec(
    expr: &ProbExpr,
    def: &FunctionDef,
    avoid: &BTreeSet<String>,
) -> Result<ProbExpr, NonAffineIteration> {
    let mut avoid = avoid.clone();
    expr.collect_names(&mut avoid);
    let mut err = None;
    let out = rewrite_all(expr, &mut |e| {
        let ProbExpr::C(b) = e else { return None };
        let (w, args) = call_equation(b, &def.name)?;
        match primrec_unfolding(&w, &args, def, &mut avoid) {
            Ok(u) => Some(u.expr()),
            Err(e) => {
                err = Some(e);
                None
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// `(w, args)` when `b` is `w = f(args)` or `f(args) = w` with `w` call-free.
fn call_equation(b: &BoolExpr, f: &str) -> Option<(ProbExpr, Vec<ProbExpr>)> {
    let BoolExpr::Cmp(CmpOp::Eq, l, r) = b else { return None };
    match (l, r) {
        (w, ProbExpr::Call(g, args)) | (ProbExpr::Call(g, args), w) if g == f && !matches!(w, ProbExpr::Call(..)) => {
            Some((w.clone(), args.clone()))
        }
        _ => None,
    }
}

/// The pieces of one primitive-recursion unfolding.
struct Unfolding {
    i: String,
    factors: Vec<ProbExpr>,
    iterate: Vec<ProbExpr>,
}

impl Unfolding {
    fn expr(&self) -> ProbExpr {
        ProbExpr::sum(&self.i, ProbExpr::product(self.factors.iter().cloned()))
    }
}

fn primrec_unfolding(
    w: &ProbExpr,
    args: &[ProbExpr],
    def: &FunctionDef,
    avoid: &mut BTreeSet<String>,
) -> Result<Unfolding, NonAffineIteration> {
    let parts = def.primrec_parts().expect("caller checks the kind");
    let i = fresh_name("i", avoid);
    avoid.insert(i.clone());
    let j = fresh_name("j", avoid);
    avoid.insert(j.clone());
    let h_i = iterate_closed_form(def, &i)?;
    let h_j = iterate_closed_form(def, &j)?;
    let at = |h: &[ProbExpr]| -> Vec<(String, ProbExpr)> {
        let on_args: Vec<(String, ProbExpr)> = def.params.iter().cloned().zip(args.iter().cloned()).collect();
        def.params
            .iter()
            .cloned()
            .zip(h.iter().map(|c| c.subst_all(&on_args)))
            .collect()
    };
    let (at_i, at_j) = (at(&h_i), at(&h_j));
    let test = cond_from_source(parts.base_test);
    let value = from_source(parts.base_value);
    let factors = vec![
        ProbExpr::c(BoolExpr::cmp(CmpOp::Ge, ProbExpr::sym(&i), ProbExpr::zero())),
        ProbExpr::fin_prod(
            &j,
            ProbExpr::zero(),
            ProbExpr::sub(ProbExpr::sym(&i), ProbExpr::one()),
            ProbExpr::c(subst_bool(&test, &at_j).negated()),
        ),
        ProbExpr::c(subst_bool(&test, &at_i)),
        ProbExpr::c(BoolExpr::cmp(CmpOp::Eq, w.clone(), value.subst_all(&at_i))),
    ];
    Ok(Unfolding {
        i,
        factors,
        iterate: at_i.into_iter().map(|(_, e)| e).collect(),
    })
}

fn subst_bool(b: &BoolExpr, pairs: &[(String, ProbExpr)]) -> BoolExpr {
    b.map_exprs(&mut |e| e.subst_all(pairs))
}

/// One summand `sum_vars prod factors` of a body being unfolded.
#[derive(Debug, Clone)]
struct Term {
    vars: Vec<String>,
    factors: Vec<ProbExpr>,
}

impl Term {
    fn expr(&self) -> ProbExpr {
        ProbExpr::sums(&self.vars, ProbExpr::product(self.factors.iter().cloned()))
    }
}

/// Sum-of-products view of `e`, with probability-function calls inlined.
fn flatten(e: &ProbExpr, dp: &DistProgram, avoid: &mut BTreeSet<String>, depth: usize) -> Vec<Term> {
    let mut claimed = BTreeSet::new();
    flatten_in(e, dp, avoid, &mut claimed, depth)
}

fn flatten_in(
    e: &ProbExpr,
    dp: &DistProgram,
    avoid: &mut BTreeSet<String>,
    claimed: &mut BTreeSet<String>,
    depth: usize,
) -> Vec<Term> {
    match e {
        ProbExpr::Add(a, b) => {
            let mut out = flatten_in(a, dp, avoid, claimed, depth);
            out.extend(flatten_in(b, dp, avoid, claimed, depth));
            out
        }
        ProbExpr::Sum(v, body) => {
            let v2 = if claimed.contains(v) { fresh_name(v, avoid) } else { v.clone() };
            avoid.insert(v2.clone());
            claimed.insert(v2.clone());
            let body = if v2 == *v { (**body).clone() } else { body.subst(v, &ProbExpr::sym(&v2)) };
            flatten_in(&body, dp, avoid, claimed, depth)
                .into_iter()
                .map(|mut t| {
                    t.vars.insert(0, v2.clone());
                    t
                })
                .collect()
        }
        ProbExpr::Mul(a, b) => {
            let left = flatten_in(a, dp, avoid, claimed, depth);
            let right = flatten_in(b, dp, avoid, claimed, depth);
            let mut out = Vec::new();
            for l in &left {
                for r in &right {
                    let mut t = l.clone();
                    let r_free: BTreeSet<String> = r.factors.iter().flat_map(|f| f.free_symbols()).collect();
                    for v in t.vars.iter_mut() {
                        if r_free.contains(v) || r.vars.contains(v) {
                            let v2 = fresh_name(v, avoid);
                            avoid.insert(v2.clone());
                            let to = ProbExpr::sym(&v2);
                            t.factors = t.factors.iter().map(|f| f.subst(v, &to)).collect();
                            *v = v2;
                        }
                    }
                    t.vars.extend(r.vars.iter().cloned());
                    t.factors.extend(r.factors.iter().cloned());
                    out.push(t);
                }
            }
            out
        }
        ProbExpr::Call(f, args) if depth > 0 => match dp.function(f) {
            Some(pf) if pf.params.len() == args.len() => {
                let pairs: Vec<(String, ProbExpr)> = pf.params.iter().cloned().zip(args.iter().cloned()).collect();
                flatten_in(&pf.body.subst_all(&pairs), dp, avoid, claimed, depth - 1)
            }
            _ => vec![Term { vars: vec![], factors: vec![e.clone()] }],
        },
        other => vec![Term {
            vars: vec![],
            factors: vec![other.clone()],
        }],
    }
}

/// Pre-order rewrite of the first node accepted by `f`.
fn rewrite_first(e: &ProbExpr, f: &mut dyn FnMut(&ProbExpr) -> Option<ProbExpr>) -> Option<ProbExpr> {
    if let Some(r) = f(e) {
        return Some(r);
    }
    let mut done = false;
    let mut visit = |c: &ProbExpr| {
        if done {
            return c.clone();
        }
        match rewrite_first(c, f) {
            Some(r) => {
                done = true;
                r
            }
            None => c.clone(),
        }
    };
    let out = match e {
        ProbExpr::C(b) => ProbExpr::C(Box::new(b.map_exprs(&mut visit))),
        ProbExpr::Truth(b) => ProbExpr::Truth(Box::new(b.map_exprs(&mut visit))),
        ProbExpr::Ite(b, t, x) => {
            let b = b.map_exprs(&mut visit);
            let t = visit(t);
            let x = visit(x);
            ProbExpr::ite(b, t, x)
        }
        ProbExpr::Sum(v, body) => ProbExpr::sum(v, visit(body)),
        ProbExpr::FinProd { var, lo, hi, body } => {
            let lo = visit(lo);
            let hi = visit(hi);
            let body = visit(body);
            ProbExpr::fin_prod(var, lo, hi, body)
        }
        other => other.map_children(&mut visit),
    };
    done.then_some(out)
}

/// Rewrites every node accepted by `f`, outermost first, without revisiting
/// rewritten nodes.
fn rewrite_all(e: &ProbExpr, f: &mut dyn FnMut(&ProbExpr) -> Option<ProbExpr>) -> ProbExpr {
    if let Some(r) = f(e) {
        return r;
    }
    let mut visit = |c: &ProbExpr| rewrite_all(c, f);
    match e {
        ProbExpr::C(b) => ProbExpr::C(Box::new(b.map_exprs(&mut visit))),
        ProbExpr::Truth(b) => ProbExpr::Truth(Box::new(b.map_exprs(&mut visit))),
        ProbExpr::Ite(b, t, x) => {
            let b = b.map_exprs(&mut visit);
            let t = visit(t);
            let x = visit(x);
            ProbExpr::ite(b, t, x)
        }
        ProbExpr::Sum(v, body) => ProbExpr::sum(v, visit(body)),
        ProbExpr::FinProd { var, lo, hi, body } => {
            let lo = visit(lo);
            let hi = visit(hi);
            let body = visit(body);
            ProbExpr::fin_prod(var, lo, hi, body)
        }
        other => other.map_children(&mut visit),
    }
}

/// The outermost conditional inside `b`, with `b` rebuilt on each branch.
fn split_ite(b: &BoolExpr) -> Option<(BoolExpr, BoolExpr, BoolExpr)> {
    let mut found = None;
    let probe = ProbExpr::C(Box::new(b.clone()));
    probe.walk(&mut |e| {
        if found.is_none() {
            if let ProbExpr::Ite(c, t, x) = e {
                found = Some(((**c).clone(), (**t).clone(), (**x).clone(), e.clone()));
            }
        }
    });
    let (c, t, x, node) = found?;
    let pick = |by: &ProbExpr| {
        let mut by = Some(by.clone());
        match rewrite_first(&probe, &mut |e| if *e == node { by.take() } else { None }) {
            Some(ProbExpr::C(b)) => *b,
            _ => unreachable!("the conditional was found in the constraint"),
        }
    };
    Some((c, pick(&t), pick(&x)))
}

/// Source calls in post-order (arguments before the call itself).
fn source_calls(e: &ProbExpr, dp: &DistProgram) -> Vec<(String, Vec<ProbExpr>)> {
    let mut out = Vec::new();
    collect_calls(e, dp, &mut out);
    out
}

fn collect_calls(e: &ProbExpr, dp: &DistProgram, out: &mut Vec<(String, Vec<ProbExpr>)>) {
    let mut direct = Vec::new();
    // walk is pre-order; recurse manually into arguments first
    if let ProbExpr::Call(f, args) = e {
        for a in args {
            collect_calls(a, dp, out);
        }
        if dp.source.function(f).is_some() {
            out.push((f.clone(), args.clone()));
        }
        return;
    }
    let mut visit = |c: &ProbExpr| {
        direct.push(c.clone());
        c.clone()
    };
    match e {
        ProbExpr::C(b) | ProbExpr::Truth(b) => {
            b.map_exprs(&mut visit);
        }
        ProbExpr::Ite(b, t, x) => {
            b.map_exprs(&mut visit);
            visit(t);
            visit(x);
        }
        ProbExpr::Sum(_, body) => {
            visit(body);
        }
        ProbExpr::FinProd { lo, hi, body, .. } => {
            visit(lo);
            visit(hi);
            visit(body);
        }
        other => {
            other.map_children(&mut visit);
        }
    }
    for c in direct {
        collect_calls(&c, dp, out);
    }
}

fn contains_ite(e: &ProbExpr) -> bool {
    let mut found = false;
    e.walk(&mut |n| found |= matches!(n, ProbExpr::Ite(..)));
    found
}

fn is_affine(def: &FunctionDef) -> bool {
    iterate_closed_form(def, "i").is_ok()
}

/// The action the driver takes on one factor.
enum Step {
    Split,
    Inline(String),
    Primrec(ProbExpr, Vec<ProbExpr>, String),
    Call(ProbExpr, Vec<ProbExpr>, String),
    Lift(String, Vec<ProbExpr>),
}

struct Driver<'a> {
    dp: &'a mut DistProgram,
    avoid: BTreeSet<String>,
    report: UnfoldReport,
}

impl Driver<'_> {
    fn classify(&mut self, factor: &ProbExpr) -> Option<Step> {
        let in_constraint = matches!(factor, ProbExpr::C(_));
        if in_constraint && contains_ite(factor) {
            return Some(Step::Split);
        }
        let calls = source_calls(factor, self.dp);
        if let Some((f, _)) = calls
            .iter()
            .find(|(f, _)| self.dp.source.function(f).unwrap().kind == FunctionKind::NonRecursive)
        {
            return Some(Step::Inline(f.clone()));
        }
        if !in_constraint {
            return None;
        }
        let ProbExpr::C(b) = factor else { unreachable!() };
        let mut opaque = Vec::new();
        for (f, args) in &calls {
            let def = self.dp.source.function(f).unwrap();
            if !is_affine(def) {
                continue;
            }
            if let Some((w, wargs)) = call_equation(b, f) {
                if wargs == *args && matches!(w, ProbExpr::Sym(_)) {
                    if args.iter().all(|a| matches!(a, ProbExpr::Sym(_))) {
                        return Some(Step::Primrec(w, wargs, f.clone()));
                    }
                    return Some(Step::Call(w, wargs, f.clone()));
                }
            }
        }
        for (f, args) in &calls {
            let def = self.dp.source.function(f).unwrap();
            if !is_affine(def) {
                opaque.push(f.clone());
                continue;
            }
            if args.iter().all(|a| source_calls(a, self.dp).is_empty()) {
                return Some(Step::Lift(f.clone(), args.clone()));
            }
        }
        for f in opaque {
            if self.report.non_affine.insert(f.clone()) {
                self.report
                    .trace
                    .push(format!("{f}: the iterate has no closed form, calls stay opaque"));
            }
        }
        None
    }

    fn fresh(&mut self, base: &str) -> String {
        let n = fresh_name(base, &self.avoid);
        self.avoid.insert(n.clone());
        n
    }

    /// Unfolds every term of the body of `name`.
    fn run(&mut self, name: &str) {
        let body = self.dp.function(name).unwrap().body.clone();
        let mut pending = flatten(&body, self.dp, &mut self.avoid, 32);
        let mut done = Vec::new();
        while let Some(mut term) = pending.pop() {
            let step = term
                .factors
                .iter()
                .enumerate()
                .find_map(|(k, f)| self.classify(f).map(|s| (k, s)));
            let Some((k, step)) = step else {
                done.push(term);
                continue;
            };
            let factor = term.factors[k].clone();
            match step {
                Step::Split => {
                    let ProbExpr::C(b) = &factor else { unreachable!() };
                    let (c, t, e) = split_ite(b).unwrap();
                    self.report
                        .trace
                        .push(format!("{name}: split `if {c}` in {factor}"));
                    let mut yes = term.clone();
                    yes.factors.splice(k..=k, [ProbExpr::c(c.clone()), ProbExpr::c(t)]);
                    term.factors.splice(k..=k, [ProbExpr::c(c.negated()), ProbExpr::c(e)]);
                    pending.push(term);
                    pending.push(yes);
                }
                Step::Inline(f) => {
                    let def = self.dp.source.function(&f).unwrap().clone();
                    let body = from_source(&def.body);
                    let new = rewrite_all(&factor, &mut |e| match e {
                        ProbExpr::Call(g, args) if *g == f => {
                            let pairs: Vec<(String, ProbExpr)> =
                                def.params.iter().cloned().zip(args.iter().cloned()).collect();
                            Some(body.subst_all(&pairs))
                        }
                        _ => None,
                    });
                    self.report.trace.push(format!("{name}: inline {f} giving {new}"));
                    term.factors[k] = new;
                    pending.push(term);
                }
                Step::Primrec(w, args, f) => {
                    let def = self.dp.source.function(&f).unwrap().clone();
                    let u = primrec_unfolding(&w, &args, &def, &mut self.avoid).expect("checked affine");
                    let shown: Vec<String> = u.iterate.iter().map(|e| e.to_string()).collect();
                    let argv: Vec<String> = args.iter().map(|e| e.to_string()).collect();
                    self.report.trace.push(format!(
                        "{name}: unfold {f} with h({},{}) = ({})",
                        u.i,
                        argv.join(","),
                        shown.join(", ")
                    ));
                    term.vars.push(u.i.clone());
                    term.factors.splice(k..=k, u.factors);
                    pending.push(term);
                }
                Step::Call(w, args, f) => {
                    let aux = self.unfold_call_term(&mut term, k, &w, &args, &f);
                    self.report.trace.push(format!(
                        "{name}: new {aux}({}) = {}",
                        self.dp.function(&aux).unwrap().params.join(","),
                        self.dp.function(&aux).unwrap().body
                    ));
                    self.report.aux_functions.push(aux.clone());
                    self.run(&aux);
                    pending.push(term);
                }
                Step::Lift(f, args) => {
                    let w = self.fresh("w");
                    let call = ProbExpr::call(&f, args);
                    let mut call_ref = Some(ProbExpr::sym(&w));
                    let new = rewrite_first(&factor, &mut |e| if *e == call { call_ref.take() } else { None })
                        .unwrap();
                    self.report.trace.push(format!("{name}: name {call} as {w}"));
                    term.vars.push(w.clone());
                    term.factors[k] = new;
                    term.factors.insert(
                        k,
                        ProbExpr::c(BoolExpr::cmp(CmpOp::Eq, ProbExpr::sym(&w), call)),
                    );
                    pending.push(term);
                }
            }
        }
        done.reverse();
        let body = ProbExpr::total(done.iter().map(Term::expr));
        self.dp.function_mut(name).unwrap().body = body;
    }

    /// Moves everything but `C(w = f(args))` into a new function `P_u` of
    /// fresh variables `u1..un` with `C(uk = argk)` factors, and leaves
    /// `sum_u P_u(u) * C(w = f(u))` in the term.
    fn unfold_call_term(&mut self, term: &mut Term, k: usize, w: &ProbExpr, args: &[ProbExpr], f: &str) -> String {
        let us: Vec<String> = (1..=args.len()).map(|_| self.fresh("u")).collect();
        let kept = ProbExpr::c(BoolExpr::cmp(
            CmpOp::Eq,
            w.clone(),
            ProbExpr::call(f, us.iter().map(|u| ProbExpr::sym(u)).collect()),
        ));
        let kept_free = w.free_symbols();
        let outer: Vec<String> = term.vars.iter().filter(|v| kept_free.contains(*v)).cloned().collect();
        let inner: Vec<String> = term.vars.iter().filter(|v| !kept_free.contains(*v)).cloned().collect();
        let mut moved: Vec<ProbExpr> = term
            .factors
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .map(|(_, f)| f.clone())
            .collect();
        for (u, a) in us.iter().zip(args) {
            moved.push(ProbExpr::c(BoolExpr::cmp(CmpOp::Eq, ProbExpr::sym(u), a.clone())));
        }
        let body = ProbExpr::sums(&inner, ProbExpr::product(moved));
        let mut params = us.clone();
        for s in body.free_symbols() {
            if !params.contains(&s) && !self.dp.parameters.contains(&s) && !self.dp.rationals.contains(&s) {
                params.push(s);
            }
        }
        let name = self.fresh("P_u");
        let call_args = params.iter().map(|p| ProbExpr::sym(p)).collect();
        self.dp.prob_functions.push(ProbFunction {
            name: name.clone(),
            params,
            body,
        });
        term.vars = outer;
        term.vars.extend(us);
        term.factors = vec![ProbExpr::call(&name, call_args), kept];
        name
    }
}

/// Replaces the first term of `dist_program`'s output function that carries
/// `C(w = g(e1..en))` with non-variable arguments by the call rule.
pub fn unfold_call(dist_program: &DistProgram) -> DistProgram {
    let mut dp = dist_program.clone();
    let mut avoid = dp.used_names();
    let out = dp.output_function.clone();
    let body = dp.output().body.clone();
    let mut terms = flatten(&body, &dp, &mut avoid, 32);
    let mut driver = Driver {
        dp: &mut dp,
        avoid,
        report: UnfoldReport::default(),
    };
    let mut changed = false;
    'outer: for term in terms.iter_mut() {
        for k in 0..term.factors.len() {
            let ProbExpr::C(b) = &term.factors[k] else { continue };
            let b = (**b).clone();
            for (f, args) in source_calls(&term.factors[k], driver.dp) {
                if let Some((w, wargs)) = call_equation(&b, &f) {
                    if wargs == args && !args.iter().all(|a| matches!(a, ProbExpr::Sym(_))) {
                        driver.unfold_call_term(term, k, &w, &args, &f);
                        changed = true;
                        break 'outer;
                    }
                }
            }
        }
    }
    if !changed {
        return dist_program.clone();
    }
    let body = ProbExpr::total(terms.iter().map(Term::expr));
    dp.function_mut(&out).unwrap().body = body;
    dp
}

/// Applies the unfolding rules to the output function until no rule fires.
pub fn unfold_all(dist_program: &DistProgram) -> (DistProgram, UnfoldReport) {
    let mut dp = dist_program.clone();
    let avoid = dp.used_names();
    let out = dp.output_function.clone();
    let mut driver = Driver {
        dp: &mut dp,
        avoid,
        report: UnfoldReport::default(),
    };
    driver.run(&out);
    let report = driver.report;
    (dp, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;
    use crate::probexpr::parse_prob;

    fn def(src: &str) -> FunctionDef {
        parse_program(src).unwrap().functions.remove(0)
    }

    #[test]
    fn iterate_of_add() {
        let add = def("add(x,y) = if (x=0) then y else add(x-1,y+1)");
        let h = iterate_closed_form(&add, "i").unwrap();
        let shown: Vec<String> = h.iter().map(|e| e.to_string()).collect();
        assert_eq!(shown, ["x-i", "y+i"]);
    }

    #[test]
    fn iterate_forms() {
        let f = def("f(x,y,c) = if (x=0) then y else f(x-1, 2*y+c, c)");
        let h = iterate_closed_form(&f, "i").unwrap();
        assert_eq!(h[1].to_string(), "2^i*y + c*(2^i - 1)");
        let g = def("g(x,y) = if (x=0) then y else g(x-1, 5)");
        assert_eq!(iterate_closed_form(&g, "i").unwrap()[1].to_string(), "if i = 0 then y else 5");
        let p = def("p(x,k) = if (k=0) then x else p(x*x, k-1)");
        let err = iterate_closed_form(&p, "i").unwrap_err();
        assert_eq!(err.param, "x");
        let q = def("q(x,y) = if (x=0) then y else q(x-1, y+x)");
        assert!(iterate_closed_form(&q, "i").is_err());
    }

    #[test]
    fn conditional_split() {
        let e = parse_prob("C(z = if x > y then x else y)").unwrap();
        assert_eq!(unfold_conditional(&e).to_string(), "C(x > y)*C(z = x) + C(x <= y)*C(z = y)");
        let t = parse_prob("C(z = if true then 1 else 2)").unwrap();
        assert_eq!(unfold_conditional(&t).to_string(), "C(true)*C(z = 1) + C(false)*C(z = 2)");
        let plain = parse_prob("C(z = x)").unwrap();
        assert_eq!(unfold_conditional(&plain), plain);
    }

    #[test]
    fn primrec_rule_on_add() {
        let add = def("add(x,y) = if (x=0) then y else add(x-1,y+1)");
        let e = parse_prob("C(z = add(x, y))").unwrap();
        let out = unfold_primrec(&e, &add, &BTreeSet::new()).unwrap();
        assert_eq!(
            out.to_string(),
            "sum_i C(i >= 0)*(prod_{j=0}^{i-1} C(x-j <> 0))*C(x-i = 0)*C(z = y+i)"
        );
    }
}
