//! Interval analysis of constraint factors, used to find a finite range for
//! a summation variable.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::eval::{ceil, floor, Bindings, EvalCtx, Limits};
use super::{BoolExpr, CmpOp, ProbExpr};
use crate::error::EvalError;

/// Where a summand can be nonzero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Support {
    Empty,
    Ints { lo: Option<BigInt>, hi: Option<BigInt> },
    /// Lists with length and elements in the given closed ranges.
    Lists { len: (BigInt, BigInt), elems: (BigInt, BigInt) },
    Unknown,
}

/// Support of `body` in `var` with the other symbols bound by `bindings`.
pub fn support_of(body: &ProbExpr, var: &str, bindings: &Bindings) -> Result<Support, EvalError> {
    let ctx = EvalCtx::new(&[], None, Limits::default());
    ctx.support(body, var, bindings)
}

type Bound = Option<BigInt>;

#[derive(Debug, Clone, PartialEq)]
struct Info {
    empty: bool,
    lo: Bound,
    hi: Bound,
    len_lo: Bound,
    len_hi: Bound,
    elems: Option<(BigInt, BigInt)>,
    listy: bool,
}

impl Info {
    fn full() -> Self {
        Info {
            empty: false,
            lo: None,
            hi: None,
            len_lo: None,
            len_hi: None,
            elems: None,
            listy: false,
        }
    }

    fn empty() -> Self {
        Info { empty: true, ..Info::full() }
    }

    fn meet(self, o: Info) -> Info {
        if self.empty || o.empty {
            return Info::empty();
        }
        let mut out = Info {
            empty: false,
            lo: max_bound(self.lo, o.lo),
            hi: min_bound(self.hi, o.hi),
            len_lo: max_bound(self.len_lo, o.len_lo),
            len_hi: min_bound(self.len_hi, o.len_hi),
            elems: match (self.elems, o.elems) {
                (Some((a, b)), Some((c, d))) => Some((a.max(c), b.min(d))),
                (x, None) | (None, x) => x,
            },
            listy: self.listy || o.listy,
        };
        if matches!((&out.lo, &out.hi), (Some(l), Some(h)) if l > h)
            || matches!((&out.len_lo, &out.len_hi), (Some(l), Some(h)) if l > h)
        {
            out = Info::empty();
        }
        out
    }

    fn join(self, o: Info) -> Info {
        if self.empty {
            return o;
        }
        if o.empty {
            return self;
        }
        Info {
            empty: false,
            lo: self.lo.zip(o.lo).map(|(a, b)| a.min(b)),
            hi: self.hi.zip(o.hi).map(|(a, b)| a.max(b)),
            len_lo: self.len_lo.zip(o.len_lo).map(|(a, b)| a.min(b)),
            len_hi: self.len_hi.zip(o.len_hi).map(|(a, b)| a.max(b)),
            elems: self.elems.zip(o.elems).map(|((a, b), (c, d))| (a.min(c), b.max(d))),
            listy: self.listy && o.listy,
        }
    }

    fn ints(lo: Bound, hi: Bound) -> Info {
        Info { lo, hi, ..Info::full() }.meet(Info::full())
    }
}

fn max_bound(a: Bound, b: Bound) -> Bound {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) | (None, x) => x,
    }
}

fn min_bound(a: Bound, b: Bound) -> Bound {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) | (None, x) => x,
    }
}

const INLINE_DEPTH: usize = 32;

impl EvalCtx<'_> {
    /// Finite range (or list shape) for `var` outside of which `body` is 0.
    pub fn support(&self, body: &ProbExpr, var: &str, env: &Bindings) -> Result<Support, EvalError> {
        let mut env = env.clone();
        env.remove(var);
        let info = self.expr_info(body, var, &mut env, INLINE_DEPTH)?;
        if info.empty {
            return Ok(Support::Empty);
        }
        if info.listy || info.elems.is_some() || info.len_lo.is_some() || info.len_hi.is_some() {
            return Ok(match (info.len_lo, info.len_hi, info.elems) {
                (lo, Some(hi), Some(elems)) => Support::Lists {
                    len: (lo.unwrap_or_else(BigInt::zero), hi),
                    elems,
                },
                _ => Support::Unknown,
            });
        }
        Ok(Support::Ints { lo: info.lo, hi: info.hi })
    }

    fn expr_info(&self, e: &ProbExpr, v: &str, env: &mut Bindings, depth: usize) -> Result<Info, EvalError> {
        Ok(match e {
            ProbExpr::Num(r) if r.is_zero() => Info::empty(),
            ProbExpr::Mul(a, b) => {
                let ia = self.expr_info(a, v, env, depth)?;
                if ia.empty {
                    return Ok(ia);
                }
                ia.meet(self.expr_info(b, v, env, depth)?)
            }
            ProbExpr::Add(a, b) | ProbExpr::Sub(a, b) => {
                self.expr_info(a, v, env, depth)?.join(self.expr_info(b, v, env, depth)?)
            }
            ProbExpr::Neg(a) | ProbExpr::Div(a, _) => self.expr_info(a, v, env, depth)?,
            ProbExpr::C(b) => self.bool_info(b, v, env)?,
            ProbExpr::Sum(w, body) if w != v => {
                let saved = env.remove(w);
                let out = self.expr_info(body, v, env, depth);
                if let Some(d) = saved {
                    env.insert(w.clone(), d);
                }
                out?
            }
            ProbExpr::Call(name, args) if depth > 0 => match self.function(name) {
                Some(f) if f.params.len() == args.len() => {
                    let pairs: Vec<(String, ProbExpr)> = f.params.iter().cloned().zip(args.iter().cloned()).collect();
                    let inlined = f.body.subst_all(&pairs);
                    self.expr_info(&inlined, v, env, depth - 1)?
                }
                _ => Info::full(),
            },
            ProbExpr::Ite(b, t, f) => {
                let yes = self.bool_info(b, v, env)?.meet(self.expr_info(t, v, env, depth)?);
                let no = self.bool_info(&b.negated(), v, env)?.meet(self.expr_info(f, v, env, depth)?);
                yes.join(no)
            }
            _ => Info::full(),
        })
    }

    fn bool_info(&self, b: &BoolExpr, v: &str, env: &mut Bindings) -> Result<Info, EvalError> {
        Ok(match b {
            BoolExpr::True | BoolExpr::Holds(_) => Info::full(),
            BoolExpr::False => Info::empty(),
            BoolExpr::And(a, c) => self.bool_info(a, v, env)?.meet(self.bool_info(c, v, env)?),
            BoolExpr::Or(a, c) => self.bool_info(a, v, env)?.join(self.bool_info(c, v, env)?),
            BoolExpr::Not(a) => match a.negated() {
                BoolExpr::Not(_) => Info::full(),
                n => self.bool_info(&n, v, env)?,
            },
            BoolExpr::ElemsIn(l, lo, hi) if is_var(l, v) => {
                let lo = self.constant(lo, v, env)?;
                let hi = self.constant(hi, v, env)?;
                match (lo, hi) {
                    (Some(lo), Some(hi)) => Info {
                        elems: Some((ceil(&lo), floor(&hi))),
                        listy: true,
                        ..Info::full()
                    },
                    _ => Info {
                        listy: true,
                        ..Info::full()
                    },
                }
            }
            BoolExpr::ElemsIn(..) => Info::full(),
            BoolExpr::Cmp(op, a, c) => {
                if let Some(info) = self.len_info(*op, a, c, v, env)? {
                    return Ok(info);
                }
                if let Some(split) = split_extremum(*op, a, c) {
                    return self.bool_info(&split, v, env);
                }
                let (Some((p, q)), Some((r, s))) = (self.affine(a, v, env)?, self.affine(c, v, env)?) else {
                    return Ok(Info::full());
                };
                // (p - r) v + (q - s)  op  0
                atom_info(*op, p - r, q - s)
            }
        })
    }

    fn len_info(&self, op: CmpOp, a: &ProbExpr, c: &ProbExpr, v: &str, env: &mut Bindings) -> Result<Option<Info>, EvalError> {
        let (op, other) = match (a, c) {
            (ProbExpr::Len(l), other) if is_var(l, v) => (op, other),
            (other, ProbExpr::Len(l)) if is_var(l, v) => (op.flip(), other),
            _ => return Ok(None),
        };
        let Some(k) = self.constant(other, v, env)? else {
            return Ok(Some(Info {
                listy: true,
                ..Info::full()
            }));
        };
        let range = atom_info(op, BigRational::from_integer(1.into()), -k);
        Ok(Some(Info {
            empty: range.empty,
            len_lo: range.lo,
            len_hi: range.hi,
            listy: true,
            ..Info::full()
        }))
    }

    /// Value of an expression that does not mention `v`, if it is evaluable.
    fn constant(&self, e: &ProbExpr, v: &str, env: &mut Bindings) -> Result<Option<BigRational>, EvalError> {
        if e.mentions(v) {
            return Ok(None);
        }
        match self.value(e, env) {
            Ok(Some(super::Datum::Num(r))) => Ok(Some(r)),
            Ok(_) | Err(EvalError::UnboundSymbol(_)) | Err(EvalError::UnboundedSum(_)) => Ok(None),
            Err(EvalError::Type(_)) | Err(EvalError::DivisionByZero) => Ok(None),
            Err(other) => Err(other),
        }
    }

    /// `(a, b)` with `e = a·v + b`, when `e` is affine in `v`.
    fn affine(&self, e: &ProbExpr, v: &str, env: &mut Bindings) -> Result<Option<(BigRational, BigRational)>, EvalError> {
        let zero = BigRational::zero;
        if !e.mentions(v) {
            return Ok(self.constant(e, v, env)?.map(|c| (zero(), c)));
        }
        Ok(match e {
            ProbExpr::Sym(_) => Some((BigRational::from_integer(1.into()), zero())),
            ProbExpr::Neg(a) => self.affine(a, v, env)?.map(|(p, q)| (-p, -q)),
            ProbExpr::Add(a, b) => match (self.affine(a, v, env)?, self.affine(b, v, env)?) {
                (Some((p, q)), Some((r, s))) => Some((p + r, q + s)),
                _ => None,
            },
            ProbExpr::Sub(a, b) => match (self.affine(a, v, env)?, self.affine(b, v, env)?) {
                (Some((p, q)), Some((r, s))) => Some((p - r, q - s)),
                _ => None,
            },
            ProbExpr::Mul(a, b) => match (self.affine(a, v, env)?, self.affine(b, v, env)?) {
                (Some((p, q)), Some((r, s))) if p.is_zero() => Some((&q * r, q * s)),
                (Some((p, q)), Some((r, s))) if r.is_zero() => Some((p * &s, q * s)),
                _ => None,
            },
            ProbExpr::Div(a, b) => match (self.affine(a, v, env)?, self.affine(b, v, env)?) {
                (Some((p, q)), Some((r, s))) if r.is_zero() && !s.is_zero() => Some((p / &s, q / s)),
                _ => None,
            },
            _ => None,
        })
    }
}

/// `max(p,q) <= c` as `p <= c and q <= c`, and the other three shapes.
fn split_extremum(op: CmpOp, a: &ProbExpr, c: &ProbExpr) -> Option<BoolExpr> {
    let below = matches!(op, CmpOp::Le | CmpOp::Lt);
    let above = matches!(op, CmpOp::Ge | CmpOp::Gt);
    match a {
        ProbExpr::Max(p, q) | ProbExpr::Min(p, q) if below || above => {
            let l = BoolExpr::cmp(op, (**p).clone(), c.clone());
            let r = BoolExpr::cmp(op, (**q).clone(), c.clone());
            let both = matches!(a, ProbExpr::Max(..)) == below;
            Some(if both { BoolExpr::and(l, r) } else { BoolExpr::or(l, r) })
        }
        _ if matches!(c, ProbExpr::Max(..) | ProbExpr::Min(..)) => split_extremum(op.flip(), c, a),
        _ => None,
    }
}

fn is_var(e: &ProbExpr, v: &str) -> bool {
    matches!(e, ProbExpr::Sym(s) if s == v)
}

/// Integer solutions of `a·v + b op 0`.
fn atom_info(op: CmpOp, a: BigRational, b: BigRational) -> Info {
    if a.is_zero() {
        let holds = match op {
            CmpOp::Eq => b.is_zero(),
            CmpOp::Ne => !b.is_zero(),
            CmpOp::Lt => b.is_negative(),
            CmpOp::Le => !b.is_positive(),
            CmpOp::Gt => b.is_positive(),
            CmpOp::Ge => !b.is_negative(),
        };
        return if holds { Info::full() } else { Info::empty() };
    }
    let t = -b / &a;
    let op = if a.is_negative() { op.flip() } else { op };
    match op {
        CmpOp::Eq => {
            if t.is_integer() {
                let k = t.to_integer();
                Info::ints(Some(k.clone()), Some(k))
            } else {
                Info::empty()
            }
        }
        CmpOp::Ne => Info::full(),
        CmpOp::Ge => Info::ints(Some(ceil(&t)), None),
        CmpOp::Gt => Info::ints(Some(floor(&t) + 1), None),
        CmpOp::Le => Info::ints(None, Some(floor(&t))),
        CmpOp::Lt => Info::ints(None, Some(ceil(&t) - 1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probexpr::{parse_prob, Datum};

    fn sup(src: &str, var: &str, binds: &[(&str, i64)]) -> Support {
        let e = parse_prob(src).unwrap();
        let b: Bindings = binds.iter().map(|(k, v)| (k.to_string(), Datum::int(*v))).collect();
        support_of(&e, var, &b).unwrap()
    }

    fn ints(lo: Option<i64>, hi: Option<i64>) -> Support {
        Support::Ints {
            lo: lo.map(BigInt::from),
            hi: hi.map(BigInt::from),
        }
    }

    #[test]
    fn intersects_factors_and_joins_summands() {
        assert_eq!(sup("C(1 <= x <= n) * C(x < 4)", "x", &[("n", 10)]), ints(Some(1), Some(3)));
        assert_eq!(sup("C(x = 1) + C(x = 5)", "x", &[]), ints(Some(1), Some(5)));
        assert_eq!(sup("C(x = 1) * C(x = 5)", "x", &[]), Support::Empty);
        assert_eq!(sup("C(2*x >= 3)", "x", &[]), ints(Some(2), None));
        assert_eq!(sup("C(z - x > n)", "x", &[("z", 7), ("n", 2)]), ints(None, Some(4)));
    }

    #[test]
    fn ignores_constraints_on_inner_variables() {
        assert_eq!(sup("sum_y C(x <= y) * C(0 <= x)", "x", &[]), ints(Some(0), None));
    }
}
