//! Over/under approximations of output distributions, cumulative bounds and
//! expected-value intervals.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::ApproxError;
use crate::lang::Value;
use crate::oracle::{eval_at, output_var};
use crate::probexpr::{Bindings, DistProgram, EvalCtx, Limits, ProbExpr, Support};
use crate::simplifier::{case_split, relax_source_calls, simplify, Context, Status, DEFAULT_BUDGET};

/// Where the output distribution can be nonzero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SupportHint {
    Ints { lo: BigInt, hi: BigInt },
    Unbounded,
}

/// Paired over and under approximations of an output distribution, as
/// expressions in the output variable.
#[derive(Debug, Clone, PartialEq)]
pub struct PBox {
    pub over: ProbExpr,
    pub under: ProbExpr,
    /// True when both sides are the exact distribution.
    pub exact: bool,
}

impl PBox {
    pub fn exact(e: ProbExpr) -> Self {
        PBox {
            over: e.clone(),
            under: e,
            exact: true,
        }
    }

    /// `over(z)` clamped to `[0,1]`; 1 when the expression cannot be evaluated.
    pub fn over_at(&self, dp: &DistProgram, params: &Bindings, z: &Value) -> BigRational {
        match eval_at(dp, &self.over, params, z) {
            Ok(r) => clamp(r),
            Err(_) => BigRational::one(),
        }
    }

    /// `under(z)` clamped to `[0,1]`; 0 when the expression cannot be evaluated.
    pub fn under_at(&self, dp: &DistProgram, params: &Bindings, z: &Value) -> BigRational {
        match eval_at(dp, &self.under, params, z) {
            Ok(r) => clamp(r),
            Err(_) => BigRational::zero(),
        }
    }

    /// Both sides evaluated on an ordered finite domain.
    pub fn tabulate(&self, dp: &DistProgram, params: &Bindings, domain: &[Value]) -> Table {
        let rows = domain
            .iter()
            .map(|z| {
                let over = self.over_at(dp, params, z);
                let under = self.under_at(dp, params, z).min(over.clone());
                (z.clone(), under, over)
            })
            .collect();
        Table { rows }
    }

    /// Integer range outside of which `over` vanishes at this instantiation.
    pub fn support_hint(&self, dp: &DistProgram, params: &Bindings) -> SupportHint {
        let z = output_var(dp);
        let ctx = EvalCtx::for_program(dp, Limits::default());
        let hint = |e: &ProbExpr| match ctx.support(e, &z, params) {
            Ok(Support::Ints { lo: Some(lo), hi: Some(hi) }) => SupportHint::Ints { lo, hi },
            Ok(Support::Empty) => SupportHint::Ints {
                lo: BigInt::zero(),
                hi: -BigInt::one(),
            },
            _ => SupportHint::Unbounded,
        };
        match hint(&self.over) {
            SupportHint::Unbounded => hint(&case_split(&self.over, &Context::for_program(dp), DEFAULT_BUDGET).expr),
            h => h,
        }
    }
}

fn clamp(r: BigRational) -> BigRational {
    if r.is_negative() {
        BigRational::zero()
    } else if r > BigRational::one() {
        BigRational::one()
    } else {
        r
    }
}

/// A P-box evaluated at one instantiation: rows `(z, under, over)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub rows: Vec<(Value, BigRational, BigRational)>,
}

impl Table {
    pub fn domain(&self) -> Vec<Value> {
        self.rows.iter().map(|r| r.0.clone()).collect()
    }

    pub fn under_total(&self) -> BigRational {
        self.rows.iter().fold(BigRational::zero(), |a, r| a + &r.1)
    }
}

/// Over approximation of a residual distribution expression.
///
/// Constraint factors that depend on source-function calls are dropped (each
/// lies in `[0,1]`), and the result is simplified again; the under side keeps
/// only the terms free of such calls. Both rely on every residual summand
/// being nonnegative, which holds for distributions built from input
/// probabilities and constraints.
pub fn over_approximate(expr: &ProbExpr, ctx: &Context) -> PBox {
    let direct = simplify(expr, ctx, DEFAULT_BUDGET);
    let calls = expr.calls_any(&|f| ctx.source_functions.contains(f));
    if direct.status == Status::Closed && !calls {
        return PBox::exact(direct.expr);
    }
    let parts = relax_source_calls(expr, ctx, DEFAULT_BUDGET);
    if parts.relaxed_terms == 0 {
        return PBox::exact(parts.exact);
    }
    let over = match parts.relaxed {
        Some(r) => simplify(&ProbExpr::add(parts.exact.clone(), r), ctx, DEFAULT_BUDGET).expr,
        None => ProbExpr::one(),
    };
    PBox {
        over,
        under: parts.exact,
        exact: false,
    }
}

/// P-box of the output function of a distribution program.
pub fn pbox_of_program(dp: &DistProgram) -> PBox {
    over_approximate(&dp.output().body, &Context::for_program(dp))
}

/// Which output values the under accumulation subtracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Tail {
    /// `F↓(z) = max(1 - Σ_{v>z} over(v), 0)`, a bound on `F(z)`.
    #[default]
    Exclusive,
    /// `F↓(z) = max(1 - Σ_{v>=z} over(v), 0)`, a bound on `F(dec(z))`.
    Inclusive,
}

/// Over and under accumulations on an ordered finite domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CumulativeBounds {
    pub domain: Vec<Value>,
    pub f_up: Vec<BigRational>,
    pub f_down: Vec<BigRational>,
}

/// `F↑(z) = min(Σ_{v<=z} over(v), 1)` and the matching under accumulation.
pub fn cumulative_bounds(table: &Table, tail: Tail) -> CumulativeBounds {
    let mut rows = table.rows.clone();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let one = BigRational::one();
    let mut f_up = Vec::with_capacity(rows.len());
    let mut acc = BigRational::zero();
    for r in &rows {
        acc += &r.2;
        f_up.push(acc.clone().min(one.clone()));
    }
    let mut f_down = vec![BigRational::zero(); rows.len()];
    let mut above = BigRational::zero();
    for (i, r) in rows.iter().enumerate().rev() {
        if tail == Tail::Inclusive {
            above += &r.2;
        }
        let v = &one - &above;
        f_down[i] = if v.is_negative() { BigRational::zero() } else { v };
        if tail == Tail::Exclusive {
            above += &r.2;
        }
    }
    CumulativeBounds {
        domain: rows.into_iter().map(|r| r.0).collect(),
        f_up,
        f_down,
    }
}

/// Cumulative bounds for a P-box on the integer range it is supported on.
pub fn cumulative_bounds_of(pbox: &PBox, dp: &DistProgram, params: &Bindings, tail: Tail) -> Result<(Table, CumulativeBounds), ApproxError> {
    let domain = match pbox.support_hint(dp, params) {
        SupportHint::Ints { lo, hi } => int_range(&lo, &hi),
        SupportHint::Unbounded => return Err(ApproxError::UnboundedSupport),
    };
    let table = pbox.tabulate(dp, params, &domain);
    let cum = cumulative_bounds(&table, tail);
    Ok((table, cum))
}

pub fn int_range(lo: &BigInt, hi: &BigInt) -> Vec<Value> {
    let mut out = Vec::new();
    let mut k = lo.clone();
    while &k <= hi {
        out.push(Value::Int(k.clone()));
        k += 1;
    }
    out
}

/// `[E↓, E↑]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedInterval {
    pub low: BigRational,
    pub high: BigRational,
}

impl ExpectedInterval {
    pub fn contains(&self, e: &BigRational) -> bool {
        &self.low <= e && e <= &self.high
    }
}

impl fmt::Display for ExpectedInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.low, self.high)
    }
}

/// `E↓ = Σ z·(F↑(z) - F↑(dec z))` and `E↑` likewise from `F↓`, with `dec`
/// the predecessor in the domain and `F(dec(min)) = 0`.
pub fn expected_interval(cum: &CumulativeBounds) -> Result<ExpectedInterval, ApproxError> {
    let zs = numeric(&cum.domain)?;
    let weigh = |f: &[BigRational]| {
        let mut prev = BigRational::zero();
        let mut acc = BigRational::zero();
        for (z, v) in zs.iter().zip(f) {
            acc += z * (v - &prev);
            prev = v.clone();
        }
        acc
    };
    Ok(ExpectedInterval {
        low: weigh(&cum.f_up),
        high: weigh(&cum.f_down),
    })
}

fn numeric(domain: &[Value]) -> Result<Vec<BigRational>, ApproxError> {
    domain
        .iter()
        .map(|v| match v.as_int() {
            Some(k) => Ok(BigRational::from_integer(k.clone())),
            None => Err(ApproxError::NonNumeric(v.clone())),
        })
        .collect()
}

/// `Σ z·P(z)` over `domain`; refused when the weight there is below one.
pub fn expected_value(dp: &DistProgram, expr: &ProbExpr, params: &Bindings, domain: &[Value]) -> Result<BigRational, ApproxError> {
    let zs = numeric(domain)?;
    let mut total = BigRational::zero();
    let mut acc = BigRational::zero();
    for (v, z) in domain.iter().zip(&zs) {
        let p = eval_at(dp, expr, params, v)?;
        acc += z * &p;
        total += p;
    }
    if total != BigRational::one() {
        return Err(ApproxError::WeightDeficit { total: total.to_string() });
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Terminates,
    Unknown,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Terminates => "terminates",
            Termination::Unknown => "unknown",
        })
    }
}

/// Terminates when the under approximation sums symbolically to 1.
pub fn check_termination_weight(under: &ProbExpr, z: &str, ctx: &Context) -> Termination {
    let is_one = |e: &ProbExpr| {
        let total = simplify(&ProbExpr::sum(z, e.clone()), ctx, DEFAULT_BUDGET);
        total.status == Status::Closed && total.expr.as_num().is_some_and(|c| c.is_one())
    };
    if is_one(under) || is_one(&case_split(under, ctx, DEFAULT_BUDGET).expr) {
        Termination::Terminates
    } else {
        Termination::Unknown
    }
}

/// Terminates when the tabulated under approximation sums to exactly 1.
pub fn check_termination_weight_on(table: &Table) -> Termination {
    if table.under_total().is_one() {
        Termination::Terminates
    } else {
        Termination::Unknown
    }
}

/// Rows `z,under,over,f_down,f_up` with exact rationals.
pub fn to_csv(table: &Table, cum: &CumulativeBounds) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["z", "under", "over", "f_down", "f_up"]).unwrap();
    let mut rows = table.rows.clone();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    for (i, (z, under, over)) in rows.iter().enumerate() {
        w.write_record([
            z.to_string(),
            under.to_string(),
            over.to_string(),
            cum.f_down[i].to_string(),
            cum.f_up[i].to_string(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}
