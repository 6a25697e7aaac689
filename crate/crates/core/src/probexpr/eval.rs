use std::cell::Cell;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::support::Support;
use super::{BoolExpr, CmpOp, DistProgram, ProbExpr, ProbFunction};
use crate::error::{EvalError, RuntimeError};
use crate::lang::{call_function, Outcome, Program, Value};

/// A value a probability expression can denote.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Datum {
    Num(BigRational),
    Bool(bool),
    List(Vec<Value>),
}

impl Datum {
    pub fn int(n: i64) -> Self {
        Datum::Num(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_value(v: &Value) -> Self {
        match v {
            Value::Int(n) => Datum::Num(BigRational::from_integer(n.clone())),
            Value::Bool(b) => Datum::Bool(*b),
            Value::List(items) => Datum::List(items.clone()),
        }
    }

    /// The source-language value, when the datum is not a proper fraction.
    pub fn to_value(&self) -> Option<Value> {
        match self {
            Datum::Num(r) if r.is_integer() => Some(Value::Int(r.to_integer())),
            Datum::Num(_) => None,
            Datum::Bool(b) => Some(Value::Bool(*b)),
            Datum::List(items) => Some(Value::List(items.clone())),
        }
    }

    pub fn as_num(&self) -> Option<&BigRational> {
        match self {
            Datum::Num(r) => Some(r),
            _ => None,
        }
    }
}

impl fmt::Display for Datum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Datum::Num(r) => write!(f, "{r}"),
            Datum::Bool(b) => write!(f, "{b}"),
            Datum::List(items) => write!(f, "{}", Value::List(items.clone())),
        }
    }
}

impl From<Value> for Datum {
    fn from(v: Value) -> Self {
        Datum::from_value(&v)
    }
}

pub type Bindings = BTreeMap<String, Datum>;

/// Evaluation budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Limits {
    /// Call budget handed to the interpreter for each source-function call.
    pub source_steps: u64,
    /// Total number of summation points and product factors visited.
    pub max_points: u64,
    /// When set, a summation variable without a derivable lower (upper)
    /// bound ranges from `-t` (up to `t`). Only used for explicit truncation.
    pub truncate: Option<BigInt>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            source_steps: 10_000,
            max_points: 20_000_000,
            truncate: None,
        }
    }
}

impl Limits {
    pub fn truncated(t: i64) -> Self {
        Limits {
            truncate: Some(BigInt::from(t)),
            ..Limits::default()
        }
    }
}

/// Evaluation context: the probability functions and source program that
/// calls may refer to.
pub struct EvalCtx<'a> {
    pub functions: &'a [ProbFunction],
    pub source: Option<&'a Program>,
    pub limits: Limits,
    points: Cell<u64>,
}

/// `None` is the undefined value of a diverging or failing source call.
pub(super) type Ev = Option<Datum>;

/// Exact value of a closed expression under `bindings`.
pub fn eval_prob(expr: &ProbExpr, bindings: &Bindings, limits: &Limits) -> Result<BigRational, EvalError> {
    EvalCtx::new(&[], None, limits.clone()).eval(expr, bindings)
}

impl<'a> EvalCtx<'a> {
    pub fn new(functions: &'a [ProbFunction], source: Option<&'a Program>, limits: Limits) -> Self {
        EvalCtx {
            functions,
            source,
            limits,
            points: Cell::new(0),
        }
    }

    pub fn for_program(dp: &'a DistProgram, limits: Limits) -> Self {
        EvalCtx::new(&dp.prob_functions, Some(&dp.source), limits)
    }

    pub(super) fn function(&self, name: &str) -> Option<&'a ProbFunction> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Numeric value of `expr`.
    pub fn eval(&self, expr: &ProbExpr, bindings: &Bindings) -> Result<BigRational, EvalError> {
        let mut env = bindings.clone();
        match self.value(expr, &mut env)? {
            Some(Datum::Num(r)) => Ok(r),
            Some(other) => Err(EvalError::Type(format!("expected a number, found {other}"))),
            None => Err(EvalError::Type("the expression is undefined".into())),
        }
    }

    /// Truth value of a condition; `None` when it depends on a diverging call.
    pub fn eval_bool(&self, b: &BoolExpr, bindings: &Bindings) -> Result<Option<bool>, EvalError> {
        let mut env = bindings.clone();
        self.truth(b, &mut env)
    }

    /// Value of an arbitrary expression.
    pub fn eval_datum(&self, expr: &ProbExpr, bindings: &Bindings) -> Result<Option<Datum>, EvalError> {
        let mut env = bindings.clone();
        self.value(expr, &mut env)
    }

    fn tick(&self) -> Result<(), EvalError> {
        let n = self.points.get() + 1;
        if n > self.limits.max_points {
            return Err(EvalError::Budget);
        }
        self.points.set(n);
        Ok(())
    }

    fn num(&self, e: &ProbExpr, env: &mut Bindings) -> Result<Option<BigRational>, EvalError> {
        match self.value(e, env)? {
            None => Ok(None),
            Some(Datum::Num(r)) => Ok(Some(r)),
            Some(other) => Err(EvalError::Type(format!("expected a number, found {other}"))),
        }
    }

    pub(super) fn value(&self, e: &ProbExpr, env: &mut Bindings) -> Result<Ev, EvalError> {
        macro_rules! num {
            ($x:expr) => {
                match self.num($x, env)? {
                    Some(r) => r,
                    None => return Ok(None),
                }
            };
        }
        let n = |r: BigRational| Ok(Some(Datum::Num(r)));
        match e {
            ProbExpr::Num(r) => n(r.clone()),
            ProbExpr::Lit(v) => Ok(Some(Datum::from_value(v))),
            ProbExpr::Sym(s) => env
                .get(s)
                .cloned()
                .map(Some)
                .ok_or_else(|| EvalError::UnboundSymbol(s.clone())),
            ProbExpr::Neg(a) => n(-num!(a)),
            ProbExpr::Add(a, b) => {
                let x = num!(a);
                n(x + num!(b))
            }
            ProbExpr::Sub(a, b) => {
                let x = num!(a);
                n(x - num!(b))
            }
            ProbExpr::Mul(a, b) => {
                let x = num!(a);
                if x.is_zero() {
                    return n(x);
                }
                n(x * num!(b))
            }
            ProbExpr::Div(a, b) => {
                let x = num!(a);
                let y = num!(b);
                if y.is_zero() {
                    return Err(EvalError::DivisionByZero);
                }
                n(x / y)
            }
            ProbExpr::Pow(a, b) => {
                let base = num!(a);
                let exp = num!(b);
                n(power(&base, &exp)?)
            }
            ProbExpr::Min(a, b) => {
                let x = num!(a);
                n(x.min(num!(b)))
            }
            ProbExpr::Max(a, b) => {
                let x = num!(a);
                n(x.max(num!(b)))
            }
            ProbExpr::C(b) => n(if self.truth(b, env)? == Some(true) {
                BigRational::one()
            } else {
                BigRational::zero()
            }),
            ProbExpr::Sum(v, body) => self.sum(v, body, env).map(|r| Some(Datum::Num(r))),
            ProbExpr::FinProd { var, lo, hi, body } => {
                let lo = integer(&num!(lo))?;
                let hi = integer(&num!(hi))?;
                let saved = env.remove(var);
                let mut acc = BigRational::one();
                let mut j = lo;
                let mut out = Ok(());
                while j <= hi {
                    if let Err(err) = self.tick() {
                        out = Err(err);
                        break;
                    }
                    env.insert(var.clone(), Datum::Num(BigRational::from_integer(j.clone())));
                    match self.num(body, env) {
                        Ok(Some(r)) => acc *= r,
                        Ok(None) => {
                            out = Err(EvalError::Type("undefined factor in a product".into()));
                            break;
                        }
                        Err(err) => {
                            out = Err(err);
                            break;
                        }
                    }
                    if acc.is_zero() {
                        break;
                    }
                    j += 1;
                }
                restore(env, var, saved);
                out.map(|_| Some(Datum::Num(acc)))
            }
            ProbExpr::Call(name, args) => self.call(name, args, env),
            ProbExpr::Ite(c, t, f) => match self.truth(c, env)? {
                Some(true) => self.value(t, env),
                Some(false) => self.value(f, env),
                None => Ok(None),
            },
            ProbExpr::Truth(b) => Ok(self.truth(b, env)?.map(Datum::Bool)),
            ProbExpr::Cons(h, t) => {
                let Some(head) = self.value(h, env)? else { return Ok(None) };
                let Some(tail) = self.value(t, env)? else { return Ok(None) };
                match (head.to_value(), tail) {
                    (Some(hv), Datum::List(mut items)) => {
                        items.insert(0, hv);
                        Ok(Some(Datum::List(items)))
                    }
                    _ => Ok(None),
                }
            }
            ProbExpr::Hd(l) => Ok(match self.value(l, env)? {
                Some(Datum::List(items)) if !items.is_empty() => Some(Datum::from_value(&items[0])),
                _ => None,
            }),
            ProbExpr::Tl(l) => Ok(match self.value(l, env)? {
                Some(Datum::List(mut items)) if !items.is_empty() => {
                    items.remove(0);
                    Some(Datum::List(items))
                }
                _ => None,
            }),
            ProbExpr::Len(l) => Ok(match self.value(l, env)? {
                Some(Datum::List(items)) => Some(Datum::int(items.len() as i64)),
                _ => None,
            }),
        }
    }

    fn call(&self, name: &str, args: &[ProbExpr], env: &mut Bindings) -> Result<Ev, EvalError> {
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            match self.value(a, env)? {
                Some(d) => vals.push(d),
                None => return Ok(None),
            }
        }
        if let Some(f) = self.function(name) {
            if f.params.len() != vals.len() {
                return Err(EvalError::Type(format!(
                    "`{name}` expects {} argument(s), got {}",
                    f.params.len(),
                    vals.len()
                )));
            }
            let mut inner = env.clone();
            for (p, v) in f.params.iter().zip(vals) {
                inner.insert(p.clone(), v);
            }
            return self.value(&f.body, &mut inner);
        }
        let Some(program) = self.source.filter(|p| p.function(name).is_some()) else {
            return Err(EvalError::UnknownFunction(name.to_string()));
        };
        let mut values = Vec::with_capacity(vals.len());
        for d in &vals {
            match d.to_value() {
                Some(v) => values.push(v),
                None => return Ok(None),
            }
        }
        match call_function(program, name, values, self.limits.source_steps) {
            Ok(Outcome::Value(v)) => Ok(Some(Datum::from_value(&v))),
            Ok(Outcome::NonTerminated) => Ok(None),
            // a failing program produces no output, exactly like divergence
            Err(RuntimeError::Type(_)) => Ok(None),
            Err(other) => Err(other.into()),
        }
    }

    pub(super) fn truth(&self, b: &BoolExpr, env: &mut Bindings) -> Result<Option<bool>, EvalError> {
        match b {
            BoolExpr::True => Ok(Some(true)),
            BoolExpr::False => Ok(Some(false)),
            BoolExpr::Cmp(op, a, c) => {
                let Some(x) = self.value(a, env)? else { return Ok(None) };
                let Some(y) = self.value(c, env)? else { return Ok(None) };
                Ok(compare(*op, &x, &y))
            }
            BoolExpr::And(a, c) => match self.truth(a, env)? {
                Some(true) => self.truth(c, env),
                other => Ok(other),
            },
            BoolExpr::Or(a, c) => match self.truth(a, env)? {
                Some(false) => self.truth(c, env),
                other => Ok(other),
            },
            BoolExpr::Not(a) => Ok(self.truth(a, env)?.map(|t| !t)),
            BoolExpr::Holds(e) => match self.value(e, env)? {
                Some(Datum::Bool(t)) => Ok(Some(t)),
                None => Ok(None),
                Some(other) => Err(EvalError::Type(format!("expected a boolean, found {other}"))),
            },
            BoolExpr::ElemsIn(l, lo, hi) => {
                let Some(list) = self.value(l, env)? else { return Ok(None) };
                let Some(lo) = self.num(lo, env)? else { return Ok(None) };
                let Some(hi) = self.num(hi, env)? else { return Ok(None) };
                match list {
                    Datum::List(items) => Ok(Some(items.iter().all(|v| match v {
                        Value::Int(k) => {
                            let k = BigRational::from_integer(k.clone());
                            lo <= k && k <= hi
                        }
                        _ => false,
                    }))),
                    _ => Ok(None),
                }
            }
        }
    }

    fn sum(&self, v: &str, body: &ProbExpr, env: &mut Bindings) -> Result<BigRational, EvalError> {
        let support = self.support(body, v, env)?;
        let saved = env.remove(v);
        let result = self.sum_over(v, body, support, env);
        restore(env, v, saved);
        result
    }

    fn sum_over(&self, v: &str, body: &ProbExpr, support: Support, env: &mut Bindings) -> Result<BigRational, EvalError> {
        let mut acc = BigRational::zero();
        let mut add = |ctx: &Self, d: Datum, env: &mut Bindings| -> Result<(), EvalError> {
            ctx.tick()?;
            env.insert(v.to_string(), d);
            match ctx.num(body, env)? {
                Some(r) => acc += r,
                None => return Err(EvalError::Type("undefined summand".into())),
            }
            Ok(())
        };
        match support {
            Support::Empty => {}
            Support::Ints { lo, hi } => {
                let t = self.limits.truncate.as_ref();
                let lo = lo.or_else(|| t.map(|t| -t)).ok_or_else(|| EvalError::UnboundedSum(v.to_string()))?;
                let hi = hi.or_else(|| t.cloned()).ok_or_else(|| EvalError::UnboundedSum(v.to_string()))?;
                let mut k = lo;
                while k <= hi {
                    add(self, Datum::Num(BigRational::from_integer(k.clone())), env)?;
                    k += 1;
                }
            }
            Support::Lists { len, elems } => {
                let (llo, lhi) = len;
                let (elo, ehi) = elems;
                let llo = llo.max(BigInt::zero());
                let lmax = lhi.to_usize().ok_or(EvalError::Budget)?;
                let alphabet: Vec<Value> = num_iter(&elo, &ehi).map(Value::Int).collect();
                let mut len = llo.to_usize().ok_or(EvalError::Budget)?;
                while len <= lmax {
                    for list in all_lists(&alphabet, len) {
                        add(self, Datum::List(list), env)?;
                    }
                    len += 1;
                }
            }
            Support::Unknown => return Err(EvalError::UnboundedSum(v.to_string())),
        }
        Ok(acc)
    }
}

fn num_iter(lo: &BigInt, hi: &BigInt) -> impl Iterator<Item = BigInt> {
    let hi = hi.clone();
    let mut k = lo.clone();
    std::iter::from_fn(move || {
        if k > hi {
            return None;
        }
        let out = k.clone();
        k += 1;
        Some(out)
    })
}

/// Every list of length `len` over `alphabet`, in lexicographic order.
pub(crate) fn all_lists(alphabet: &[Value], len: usize) -> Vec<Vec<Value>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                alphabet.iter().map(move |a| {
                    let mut l = prefix.clone();
                    l.push(a.clone());
                    l
                })
            })
            .collect();
    }
    out
}

fn restore(env: &mut Bindings, var: &str, saved: Option<Datum>) {
    match saved {
        Some(d) => {
            env.insert(var.to_string(), d);
        }
        None => {
            env.remove(var);
        }
    }
}

fn integer(r: &BigRational) -> Result<BigInt, EvalError> {
    if r.is_integer() {
        Ok(r.to_integer())
    } else {
        Err(EvalError::Type(format!("expected an integer, found {r}")))
    }
}

pub(crate) fn power(base: &BigRational, exp: &BigRational) -> Result<BigRational, EvalError> {
    let k = integer(exp)?;
    let mag = k.abs().to_u32().ok_or(EvalError::Budget)?;
    let p = num_traits::pow(base.clone(), mag as usize);
    if k.is_negative() {
        if p.is_zero() {
            return Err(EvalError::DivisionByZero);
        }
        Ok(p.recip())
    } else {
        Ok(p)
    }
}

fn compare(op: CmpOp, x: &Datum, y: &Datum) -> Option<bool> {
    match op {
        CmpOp::Eq => Some(x == y),
        CmpOp::Ne => Some(x != y),
        _ => {
            let (Datum::Num(a), Datum::Num(b)) = (x, y) else { return None };
            Some(match op {
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
                CmpOp::Eq | CmpOp::Ne => unreachable!(),
            })
        }
    }
}

/// `ceil(r)` for a rational.
pub(crate) fn ceil(r: &BigRational) -> BigInt {
    let (q, m) = r.numer().div_mod_floor(r.denom());
    if m.is_zero() {
        q
    } else {
        q + 1
    }
}

/// `floor(r)` for a rational.
pub(crate) fn floor(r: &BigRational) -> BigInt {
    r.numer().div_floor(r.denom())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probexpr::{parse_prob, rat, ratio};

    fn ev(src: &str, binds: &[(&str, i64)]) -> BigRational {
        let e = parse_prob(src).unwrap();
        let b: Bindings = binds.iter().map(|(k, v)| (k.to_string(), Datum::int(*v))).collect();
        eval_prob(&e, &b, &Limits::default()).unwrap()
    }

    #[test]
    fn max_closed_form_at_a_point() {
        assert_eq!(ev("1/n^2 * (2*z - 1) * C(1 <= z <= n)", &[("n", 2), ("z", 1)]), ratio(1, 4));
    }

    #[test]
    fn true_constraint_is_one() {
        assert_eq!(ev("C(3 = 3)", &[]), rat(1));
    }

    #[test]
    fn residual_sum_over_constraint_support() {
        assert_eq!(ev("sum_y 1/4 * C(1 <= y <= 4) * C(y <= 2)", &[]), ratio(1, 2));
    }

    #[test]
    fn empty_product_is_one() {
        let e = ProbExpr::fin_prod("j", ProbExpr::int(0), ProbExpr::int(-1), ProbExpr::zero());
        assert_eq!(eval_prob(&e, &Bindings::new(), &Limits::default()).unwrap(), rat(1));
    }

    #[test]
    fn unbounded_sum_is_refused_unless_truncated() {
        let e = parse_prob("sum_x C(x >= 0) * (1/2)^x").unwrap();
        assert!(matches!(
            eval_prob(&e, &Bindings::new(), &Limits::default()),
            Err(EvalError::UnboundedSum(_))
        ));
        let t = eval_prob(&e, &Bindings::new(), &Limits::truncated(10)).unwrap();
        assert_eq!(t, rat(2) - ratio(1, 1024));
    }

    #[test]
    fn division_by_zero_is_reported() {
        let e = parse_prob("1/n").unwrap();
        let b = Bindings::from([("n".to_string(), Datum::int(0))]);
        assert_eq!(eval_prob(&e, &b, &Limits::default()), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn unbound_symbol_is_reported() {
        let e = parse_prob("n + 1").unwrap();
        assert_eq!(
            eval_prob(&e, &Bindings::new(), &Limits::default()),
            Err(EvalError::UnboundSymbol("n".into()))
        );
    }

    #[test]
    fn list_sums_enumerate_list_support() {
        let e = parse_prob("sum_L C(len(L) = 2) * C(elems_in(L, 1, 3)) * 1/9").unwrap();
        assert_eq!(eval_prob(&e, &Bindings::new(), &Limits::default()).unwrap(), rat(1));
    }

    #[test]
    fn floor_and_ceil() {
        assert_eq!(ceil(&ratio(-3, 2)), BigInt::from(-1));
        assert_eq!(floor(&ratio(-3, 2)), BigInt::from(-2));
        assert_eq!(ceil(&ratio(4, 2)), BigInt::from(2));
    }
}
