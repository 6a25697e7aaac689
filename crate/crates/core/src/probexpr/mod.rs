//! Probability expressions: the intermediate language of distribution
//! programs, with the constraint function `C`, sums over the integers and
//! finite indexed products.

mod eval;
mod parse;
mod print;
mod serial;
mod support;

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::lang::{Expr, PrimOp, Program, Value};

pub use eval::{eval_prob, Bindings, Datum, EvalCtx, Limits};
pub use parse::{parse_bool, parse_dist, parse_prob, DistDecl, DistFile};
pub use print::{print_bool, print_prob};
pub use serial::{read_dist_program, write_dist_program};
pub use support::{support_of, Support};
pub(crate) use eval::all_lists;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    /// The operator with its operands swapped: `a op b` iff `b op.flip() a`.
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            other => other,
        }
    }
}

/// A symbolic probability expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProbExpr {
    Num(BigRational),
    Sym(String),
    /// A non-numeric constant (boolean or list).
    Lit(Value),
    Neg(Box<ProbExpr>),
    Add(Box<ProbExpr>, Box<ProbExpr>),
    Sub(Box<ProbExpr>, Box<ProbExpr>),
    Mul(Box<ProbExpr>, Box<ProbExpr>),
    Div(Box<ProbExpr>, Box<ProbExpr>),
    Pow(Box<ProbExpr>, Box<ProbExpr>),
    Min(Box<ProbExpr>, Box<ProbExpr>),
    Max(Box<ProbExpr>, Box<ProbExpr>),
    C(Box<BoolExpr>),
    /// Sum over every integer (or, in the oracle-backed evaluator, every list).
    Sum(String, Box<ProbExpr>),
    /// `prod_{var=lo}^{hi} body`; empty when `hi < lo`.
    FinProd {
        var: String,
        lo: Box<ProbExpr>,
        hi: Box<ProbExpr>,
        body: Box<ProbExpr>,
    },
    /// Call to a probability function or, inside constraints, a source function.
    Call(String, Vec<ProbExpr>),
    /// Source-level conditional, only present before unfolding.
    Ite(Box<BoolExpr>, Box<ProbExpr>, Box<ProbExpr>),
    /// A boolean-valued expression.
    Truth(Box<BoolExpr>),
    Cons(Box<ProbExpr>, Box<ProbExpr>),
    Hd(Box<ProbExpr>),
    Tl(Box<ProbExpr>),
    Len(Box<ProbExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoolExpr {
    True,
    False,
    Cmp(CmpOp, ProbExpr, ProbExpr),
    And(Box<BoolExpr>, Box<BoolExpr>),
    Or(Box<BoolExpr>, Box<BoolExpr>),
    Not(Box<BoolExpr>),
    /// A boolean-valued expression used as a condition.
    Holds(ProbExpr),
    /// Every element of the list lies in `lo..=hi`.
    ElemsIn(ProbExpr, ProbExpr, ProbExpr),
}

/// A named probability function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbFunction {
    pub name: String,
    pub params: Vec<String>,
    pub body: ProbExpr,
}

/// Probability functions plus the source program they describe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistProgram {
    pub prob_functions: Vec<ProbFunction>,
    pub source: Program,
    pub output_function: String,
    /// Symbolic parameters such as `n`.
    pub parameters: BTreeSet<String>,
    /// Parameters that may take non-integer values.
    pub rationals: BTreeSet<String>,
    pub assumptions: Vec<BoolExpr>,
}

impl DistProgram {
    pub fn function(&self, name: &str) -> Option<&ProbFunction> {
        self.prob_functions.iter().find(|f| f.name == name)
    }

    pub fn function_mut(&mut self, name: &str) -> Option<&mut ProbFunction> {
        self.prob_functions.iter_mut().find(|f| f.name == name)
    }

    pub fn output(&self) -> &ProbFunction {
        self.function(&self.output_function).expect("output function is defined")
    }

    /// Every name used anywhere, for fresh-name generation.
    pub fn used_names(&self) -> BTreeSet<String> {
        let mut names: BTreeSet<String> = self.parameters.iter().cloned().collect();
        for f in &self.prob_functions {
            names.insert(f.name.clone());
            names.extend(f.params.iter().cloned());
            f.body.collect_names(&mut names);
        }
        for f in &self.source.functions {
            names.insert(f.name.clone());
        }
        names
    }
}

pub fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// A name based on `base` that is not in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    if !avoid.contains(base) {
        return base.to_string();
    }
    (1..)
        .map(|k| format!("{base}{k}"))
        .find(|n| !avoid.contains(n))
        .expect("unbounded supply")
}

fn bx(e: ProbExpr) -> Box<ProbExpr> {
    Box::new(e)
}

impl ProbExpr {
    pub fn num(r: BigRational) -> Self {
        ProbExpr::Num(r)
    }

    pub fn int(n: i64) -> Self {
        ProbExpr::Num(rat(n))
    }

    pub fn sym(s: &str) -> Self {
        ProbExpr::Sym(s.to_string())
    }

    pub fn one() -> Self {
        ProbExpr::Num(BigRational::one())
    }

    pub fn zero() -> Self {
        ProbExpr::Num(BigRational::zero())
    }

    pub fn c(b: BoolExpr) -> Self {
        ProbExpr::C(Box::new(b))
    }

    pub fn sum(var: &str, body: ProbExpr) -> Self {
        ProbExpr::Sum(var.to_string(), bx(body))
    }

    pub fn call(name: &str, args: Vec<ProbExpr>) -> Self {
        ProbExpr::Call(name.to_string(), args)
    }

    pub fn add(a: ProbExpr, b: ProbExpr) -> Self {
        ProbExpr::Add(bx(a), bx(b))
    }

    pub fn sub(a: ProbExpr, b: ProbExpr) -> Self {
        ProbExpr::Sub(bx(a), bx(b))
    }

    pub fn mul(a: ProbExpr, b: ProbExpr) -> Self {
        ProbExpr::Mul(bx(a), bx(b))
    }

    pub fn div(a: ProbExpr, b: ProbExpr) -> Self {
        ProbExpr::Div(bx(a), bx(b))
    }

    pub fn pow(a: ProbExpr, b: ProbExpr) -> Self {
        ProbExpr::Pow(bx(a), bx(b))
    }

    pub fn min(a: ProbExpr, b: ProbExpr) -> Self {
        ProbExpr::Min(bx(a), bx(b))
    }

    pub fn max(a: ProbExpr, b: ProbExpr) -> Self {
        ProbExpr::Max(bx(a), bx(b))
    }

    pub fn neg(a: ProbExpr) -> Self {
        ProbExpr::Neg(bx(a))
    }

    pub fn ite(b: BoolExpr, t: ProbExpr, e: ProbExpr) -> Self {
        ProbExpr::Ite(Box::new(b), bx(t), bx(e))
    }

    pub fn fin_prod(var: &str, lo: ProbExpr, hi: ProbExpr, body: ProbExpr) -> Self {
        ProbExpr::FinProd {
            var: var.to_string(),
            lo: bx(lo),
            hi: bx(hi),
            body: bx(body),
        }
    }

    /// Left-nested product of the factors, `1` when empty.
    pub fn product(factors: impl IntoIterator<Item = ProbExpr>) -> Self {
        factors
            .into_iter()
            .reduce(ProbExpr::mul)
            .unwrap_or_else(ProbExpr::one)
    }

    /// Left-nested sum of the summands, `0` when empty.
    pub fn total(summands: impl IntoIterator<Item = ProbExpr>) -> Self {
        summands
            .into_iter()
            .reduce(ProbExpr::add)
            .unwrap_or_else(ProbExpr::zero)
    }

    /// Nested sums, outermost first.
    pub fn sums(vars: &[String], body: ProbExpr) -> Self {
        vars.iter()
            .rev()
            .fold(body, |acc, v| ProbExpr::Sum(v.clone(), bx(acc)))
    }

    pub fn as_num(&self) -> Option<&BigRational> {
        match self {
            ProbExpr::Num(r) => Some(r),
            _ => None,
        }
    }

    /// Free parameters and variables; `Sum` and `FinProd` bind their index.
    pub fn free_symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.free_into(&mut Vec::new(), &mut out);
        out
    }

    fn free_into(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            ProbExpr::Num(_) | ProbExpr::Lit(_) => {}
            ProbExpr::Sym(s) => {
                if !bound.contains(s) {
                    out.insert(s.clone());
                }
            }
            ProbExpr::Sum(v, body) => {
                bound.push(v.clone());
                body.free_into(bound, out);
                bound.pop();
            }
            ProbExpr::FinProd { var, lo, hi, body } => {
                lo.free_into(bound, out);
                hi.free_into(bound, out);
                bound.push(var.clone());
                body.free_into(bound, out);
                bound.pop();
            }
            ProbExpr::C(b) | ProbExpr::Truth(b) => b.free_into(bound, out),
            ProbExpr::Ite(b, t, e) => {
                b.free_into(bound, out);
                t.free_into(bound, out);
                e.free_into(bound, out);
            }
            other => other.children().into_iter().for_each(|c| c.free_into(bound, out)),
        }
    }

    /// Direct sub-expressions that are plain `ProbExpr`s (not under a binder
    /// and not inside a `BoolExpr`).
    fn children(&self) -> Vec<&ProbExpr> {
        match self {
            ProbExpr::Neg(a) | ProbExpr::Hd(a) | ProbExpr::Tl(a) | ProbExpr::Len(a) => vec![a],
            ProbExpr::Add(a, b)
            | ProbExpr::Sub(a, b)
            | ProbExpr::Mul(a, b)
            | ProbExpr::Div(a, b)
            | ProbExpr::Pow(a, b)
            | ProbExpr::Min(a, b)
            | ProbExpr::Max(a, b)
            | ProbExpr::Cons(a, b) => vec![a, b],
            ProbExpr::Call(_, args) => args.iter().collect(),
            _ => vec![],
        }
    }

    /// All names appearing anywhere, bound or free.
    pub fn collect_names(&self, out: &mut BTreeSet<String>) {
        self.walk(&mut |e| match e {
            ProbExpr::Sym(s) | ProbExpr::Sum(s, _) => {
                out.insert(s.clone());
            }
            ProbExpr::FinProd { var, .. } => {
                out.insert(var.clone());
            }
            ProbExpr::Call(f, _) => {
                out.insert(f.clone());
            }
            _ => {}
        });
    }

    /// Pre-order visit of every `ProbExpr` node, including those nested in
    /// constraints.
    pub fn walk(&self, f: &mut impl FnMut(&ProbExpr)) {
        f(self);
        match self {
            ProbExpr::Sum(_, body) => body.walk(f),
            ProbExpr::FinProd { lo, hi, body, .. } => {
                lo.walk(f);
                hi.walk(f);
                body.walk(f);
            }
            ProbExpr::C(b) | ProbExpr::Truth(b) => b.walk(f),
            ProbExpr::Ite(b, t, e) => {
                b.walk(f);
                t.walk(f);
                e.walk(f);
            }
            other => other.children().into_iter().for_each(|c| c.walk(f)),
        }
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.free_symbols().contains(name)
    }

    /// True when some call to one of `names` occurs.
    pub fn calls_any(&self, names: &dyn Fn(&str) -> bool) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if let ProbExpr::Call(f, _) = e {
                found |= names(f);
            }
        });
        found
    }

    /// Capture-avoiding substitution of `var` by `by`.
    pub fn subst(&self, var: &str, by: &ProbExpr) -> ProbExpr {
        let fv = by.free_symbols();
        self.subst_inner(var, by, &fv)
    }

    fn subst_inner(&self, var: &str, by: &ProbExpr, fv: &BTreeSet<String>) -> ProbExpr {
        let go = |e: &ProbExpr| e.subst_inner(var, by, fv);
        match self {
            ProbExpr::Sym(s) if s == var => by.clone(),
            ProbExpr::Num(_) | ProbExpr::Sym(_) | ProbExpr::Lit(_) => self.clone(),
            ProbExpr::Sum(v, body) => {
                if v == var {
                    return self.clone();
                }
                let (v2, body2) = rebind(v, body, fv, self);
                ProbExpr::Sum(v2, bx(go(&body2)))
            }
            ProbExpr::FinProd { var: v, lo, hi, body } => {
                let (lo, hi) = (go(lo), go(hi));
                if v == var {
                    return ProbExpr::FinProd {
                        var: v.clone(),
                        lo: bx(lo),
                        hi: bx(hi),
                        body: body.clone(),
                    };
                }
                let (v2, body2) = rebind(v, body, fv, self);
                ProbExpr::FinProd {
                    var: v2,
                    lo: bx(lo),
                    hi: bx(hi),
                    body: bx(go(&body2)),
                }
            }
            ProbExpr::C(b) => ProbExpr::C(Box::new(b.subst_inner(var, by, fv))),
            ProbExpr::Truth(b) => ProbExpr::Truth(Box::new(b.subst_inner(var, by, fv))),
            ProbExpr::Ite(b, t, e) => ProbExpr::Ite(Box::new(b.subst_inner(var, by, fv)), bx(go(t)), bx(go(e))),
            _ => self.map_children(&mut |c| go(c)),
        }
    }

    /// Rebuilds the node with `f` applied to each plain child.
    pub fn map_children(&self, f: &mut impl FnMut(&ProbExpr) -> ProbExpr) -> ProbExpr {
        match self {
            ProbExpr::Neg(a) => ProbExpr::Neg(bx(f(a))),
            ProbExpr::Hd(a) => ProbExpr::Hd(bx(f(a))),
            ProbExpr::Tl(a) => ProbExpr::Tl(bx(f(a))),
            ProbExpr::Len(a) => ProbExpr::Len(bx(f(a))),
            ProbExpr::Add(a, b) => ProbExpr::Add(bx(f(a)), bx(f(b))),
            ProbExpr::Sub(a, b) => ProbExpr::Sub(bx(f(a)), bx(f(b))),
            ProbExpr::Mul(a, b) => ProbExpr::Mul(bx(f(a)), bx(f(b))),
            ProbExpr::Div(a, b) => ProbExpr::Div(bx(f(a)), bx(f(b))),
            ProbExpr::Pow(a, b) => ProbExpr::Pow(bx(f(a)), bx(f(b))),
            ProbExpr::Min(a, b) => ProbExpr::Min(bx(f(a)), bx(f(b))),
            ProbExpr::Max(a, b) => ProbExpr::Max(bx(f(a)), bx(f(b))),
            ProbExpr::Cons(a, b) => ProbExpr::Cons(bx(f(a)), bx(f(b))),
            ProbExpr::Call(n, args) => ProbExpr::Call(n.clone(), args.iter().map(&mut *f).collect()),
            other => other.clone(),
        }
    }

    /// Substitutes several variables at once.
    pub fn subst_all(&self, pairs: &[(String, ProbExpr)]) -> ProbExpr {
        if pairs.is_empty() {
            return self.clone();
        }
        // go through fresh intermediates so that replacements do not interfere
        let mut avoid = BTreeSet::new();
        self.collect_names(&mut avoid);
        for (v, e) in pairs {
            avoid.insert(v.clone());
            e.collect_names(&mut avoid);
        }
        let mut tmp = Vec::new();
        let mut out = self.clone();
        for (v, _) in pairs {
            let t = fresh_name(&format!("{v}'"), &avoid);
            avoid.insert(t.clone());
            out = out.subst(v, &ProbExpr::Sym(t.clone()));
            tmp.push(t);
        }
        for (t, (_, e)) in tmp.iter().zip(pairs) {
            out = out.subst(t, e);
        }
        out
    }
}

fn rebind(v: &str, body: &ProbExpr, fv: &BTreeSet<String>, whole: &ProbExpr) -> (String, ProbExpr) {
    if !fv.contains(v) {
        return (v.to_string(), body.clone());
    }
    let mut avoid = fv.clone();
    whole.collect_names(&mut avoid);
    let v2 = fresh_name(v, &avoid);
    (v2.clone(), body.subst(v, &ProbExpr::Sym(v2)))
}

impl BoolExpr {
    pub fn cmp(op: CmpOp, a: ProbExpr, b: ProbExpr) -> Self {
        BoolExpr::Cmp(op, a, b)
    }

    pub fn and(a: BoolExpr, b: BoolExpr) -> Self {
        BoolExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: BoolExpr, b: BoolExpr) -> Self {
        BoolExpr::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: BoolExpr) -> Self {
        BoolExpr::Not(Box::new(a))
    }

    /// Conjunction of all parts, `True` when empty.
    pub fn all(parts: impl IntoIterator<Item = BoolExpr>) -> Self {
        parts.into_iter().reduce(BoolExpr::and).unwrap_or(BoolExpr::True)
    }

    fn free_into(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            BoolExpr::True | BoolExpr::False => {}
            BoolExpr::Cmp(_, a, b) => {
                a.free_into(bound, out);
                b.free_into(bound, out);
            }
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
                a.free_into(bound, out);
                b.free_into(bound, out);
            }
            BoolExpr::Not(a) => a.free_into(bound, out),
            BoolExpr::Holds(e) => e.free_into(bound, out),
            BoolExpr::ElemsIn(l, lo, hi) => {
                l.free_into(bound, out);
                lo.free_into(bound, out);
                hi.free_into(bound, out);
            }
        }
    }

    pub fn free_symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.free_into(&mut Vec::new(), &mut out);
        out
    }

    pub fn walk(&self, f: &mut impl FnMut(&ProbExpr)) {
        match self {
            BoolExpr::True | BoolExpr::False => {}
            BoolExpr::Cmp(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            BoolExpr::And(a, b) | BoolExpr::Or(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            BoolExpr::Not(a) => a.walk(f),
            BoolExpr::Holds(e) => e.walk(f),
            BoolExpr::ElemsIn(l, lo, hi) => {
                l.walk(f);
                lo.walk(f);
                hi.walk(f);
            }
        }
    }

    pub fn subst(&self, var: &str, by: &ProbExpr) -> BoolExpr {
        let fv = by.free_symbols();
        self.subst_inner(var, by, &fv)
    }

    fn subst_inner(&self, var: &str, by: &ProbExpr, fv: &BTreeSet<String>) -> BoolExpr {
        self.map_exprs(&mut |e| e.subst_inner(var, by, fv))
    }

    /// Rebuilds the condition with `f` applied to each expression operand.
    pub fn map_exprs(&self, f: &mut impl FnMut(&ProbExpr) -> ProbExpr) -> BoolExpr {
        match self {
            BoolExpr::True => BoolExpr::True,
            BoolExpr::False => BoolExpr::False,
            BoolExpr::Cmp(op, a, b) => BoolExpr::Cmp(*op, f(a), f(b)),
            BoolExpr::And(a, b) => BoolExpr::And(Box::new(a.map_exprs(f)), Box::new(b.map_exprs(f))),
            BoolExpr::Or(a, b) => BoolExpr::Or(Box::new(a.map_exprs(f)), Box::new(b.map_exprs(f))),
            BoolExpr::Not(a) => BoolExpr::Not(Box::new(a.map_exprs(f))),
            BoolExpr::Holds(e) => BoolExpr::Holds(f(e)),
            BoolExpr::ElemsIn(l, lo, hi) => BoolExpr::ElemsIn(f(l), f(lo), f(hi)),
        }
    }

    /// Negation pushed down to the comparisons.
    pub fn negated(&self) -> BoolExpr {
        match self {
            BoolExpr::True => BoolExpr::False,
            BoolExpr::False => BoolExpr::True,
            BoolExpr::Cmp(op, a, b) => BoolExpr::Cmp(op.negate(), a.clone(), b.clone()),
            BoolExpr::And(a, b) => BoolExpr::or(a.negated(), b.negated()),
            BoolExpr::Or(a, b) => BoolExpr::and(a.negated(), b.negated()),
            BoolExpr::Not(a) => (**a).clone(),
            other => BoolExpr::not(other.clone()),
        }
    }
}

/// Translates a source expression into a probability expression.
///
/// Source conditionals become [`ProbExpr::Ite`] and calls stay calls, so the
/// result still needs unfolding before it can be simplified.
pub fn from_source(e: &Expr) -> ProbExpr {
    match e {
        Expr::Const(Value::Int(n)) => ProbExpr::Num(BigRational::from_integer(n.clone())),
        Expr::Const(v) => ProbExpr::Lit(v.clone()),
        Expr::Var(x) => ProbExpr::Sym(x.clone()),
        Expr::If(c, t, f) => ProbExpr::ite(cond_from_source(c), from_source(t), from_source(f)),
        Expr::Call(name, args) => ProbExpr::Call(name.clone(), args.iter().map(from_source).collect()),
        Expr::Prim(op, args) => {
            let a = |i: usize| from_source(&args[i]);
            match op {
                PrimOp::Add => ProbExpr::add(a(0), a(1)),
                PrimOp::Sub => ProbExpr::sub(a(0), a(1)),
                PrimOp::Mul => ProbExpr::mul(a(0), a(1)),
                PrimOp::Neg => ProbExpr::neg(a(0)),
                PrimOp::Hd => ProbExpr::Hd(bx(a(0))),
                PrimOp::Tl => ProbExpr::Tl(bx(a(0))),
                PrimOp::Cons => ProbExpr::Cons(bx(a(0)), bx(a(1))),
                _ => ProbExpr::Truth(Box::new(cond_from_source(e))),
            }
        }
    }
}

/// Translates a source expression used as a condition.
pub fn cond_from_source(e: &Expr) -> BoolExpr {
    match e {
        Expr::Const(Value::Bool(true)) => BoolExpr::True,
        Expr::Const(Value::Bool(false)) => BoolExpr::False,
        Expr::Prim(op, args) => {
            let a = |i: usize| from_source(&args[i]);
            let cmp = |c: CmpOp| BoolExpr::Cmp(c, a(0), a(1));
            match op {
                PrimOp::Eq => cmp(CmpOp::Eq),
                PrimOp::Ne => cmp(CmpOp::Ne),
                PrimOp::Lt => cmp(CmpOp::Lt),
                PrimOp::Le => cmp(CmpOp::Le),
                PrimOp::Gt => cmp(CmpOp::Gt),
                PrimOp::Ge => cmp(CmpOp::Ge),
                PrimOp::And => BoolExpr::and(cond_from_source(&args[0]), cond_from_source(&args[1])),
                PrimOp::Or => BoolExpr::or(cond_from_source(&args[0]), cond_from_source(&args[1])),
                PrimOp::Not => BoolExpr::not(cond_from_source(&args[0])),
                PrimOp::IsNil => BoolExpr::Cmp(CmpOp::Eq, a(0), ProbExpr::Lit(Value::List(vec![]))),
                _ => BoolExpr::Holds(from_source(e)),
            }
        }
        other => BoolExpr::Holds(from_source(other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_symbols_respect_binders() {
        let e = parse_prob("1/n^2 * (2*z - 1)").unwrap();
        assert_eq!(e.free_symbols(), ["n", "z"].iter().map(|s| s.to_string()).collect());
        let s = parse_prob("sum_x C(x = z)").unwrap();
        assert_eq!(s.free_symbols(), ["z".to_string()].into_iter().collect());
        assert!(ProbExpr::Num(ratio(1, 2)).free_symbols().is_empty());
    }

    #[test]
    fn substitution_avoids_capture() {
        let e = parse_prob("sum_x C(x = y)").unwrap();
        let out = e.subst("y", &ProbExpr::sym("x"));
        assert_eq!(out.free_symbols(), ["x".to_string()].into_iter().collect());
        let b = Bindings::from([("x".to_string(), Datum::int(3))]);
        let limits = Limits::default();
        assert_eq!(eval_prob(&out, &b, &limits).unwrap(), rat(1));
    }
}
