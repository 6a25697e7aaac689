//! The rewrite-rule catalogue and a randomized soundness harness.
//!
//! Each rule is an equation between a left pattern and a right template
//! over metavariables. [`check_rule`] instantiates the metavariables with
//! random admissible values and checks, exactly, that the pattern, the
//! template and the engine's own rewrite of the pattern all agree.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{simplify, Context, Status};
use crate::probexpr::{parse_bool, parse_prob, Bindings, BoolExpr, Datum, EvalCtx, Limits, ProbExpr};

/// Range a metavariable is drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Domain {
    Int(i64, i64),
    /// A fraction `p/q` strictly between 0 and 1 with `q <= max_den`.
    UnitFraction(i64),
}

/// Truncated-evaluation parameters for rules over an infinite range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    /// `sum_{x > N} a^x = a^{N+1}/(1-a)`.
    Geometric,
    /// `sum_{x > N} x a^x <= a^{N+1}(N+2)/(1-a)^2`.
    GeometricLinear,
}

impl Tail {
    pub fn bound(self, a: &BigRational, n: i64) -> BigRational {
        let one = BigRational::one();
        let an = pow(a, n + 1);
        match self {
            Tail::Geometric => an / (&one - a),
            Tail::GeometricLinear => {
                let d = &one - a;
                an * BigRational::from_integer(BigInt::from(n + 2)) / (&d * &d)
            }
        }
    }
}

fn pow(a: &BigRational, k: i64) -> BigRational {
    (0..k).fold(BigRational::one(), |acc, _| acc * a)
}

#[derive(Debug, Clone)]
pub struct RewriteRule {
    pub name: String,
    pub description: String,
    pub lhs: ProbExpr,
    pub rhs: ProbExpr,
    /// Conditions on the metavariables under which the equation holds.
    pub side: Vec<BoolExpr>,
    pub metavars: Vec<(String, Domain)>,
    /// Metavariables ranging over rationals.
    pub rationals: Vec<String>,
    pub tail: Option<(String, Tail)>,
    /// The engine must bring the left side to closed form.
    pub closes: bool,
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} = {}", self.name, self.lhs, self.rhs)?;
        if !self.side.is_empty() {
            let side: Vec<String> = self.side.iter().map(|b| b.to_string()).collect();
            write!(f, "  given {}", side.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleReport {
    pub rule: String,
    pub trials: usize,
    /// Samples drawn and rejected by the side conditions.
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("rule {rule} fails at {bindings}: {left} = {lhs}, {right} = {rhs}")]
pub struct CounterexampleFound {
    pub rule: String,
    pub bindings: String,
    pub left: String,
    pub right: String,
    pub lhs: String,
    pub rhs: String,
}

struct Spec<'a> {
    name: &'a str,
    description: &'a str,
    lhs: ProbExpr,
    rhs: &'a str,
    side: &'a [&'a str],
    metavars: &'a [(&'a str, Domain)],
    closes: bool,
}

fn rule(s: Spec<'_>) -> RewriteRule {
    RewriteRule {
        name: s.name.into(),
        description: s.description.into(),
        lhs: s.lhs,
        rhs: parse_prob(s.rhs).expect("rule template parses"),
        side: s.side.iter().map(|b| parse_bool(b).expect("side condition parses")).collect(),
        metavars: s.metavars.iter().map(|(v, d)| (v.to_string(), d.clone())).collect(),
        rationals: Vec::new(),
        tail: None,
        closes: s.closes,
    }
}

fn p(src: &str) -> ProbExpr {
    parse_prob(src).expect("rule pattern parses")
}

const SMALL: Domain = Domain::Int(-6, 6);

/// The rule catalogue, in engine priority order.
pub fn catalogue() -> Vec<RewriteRule> {
    use Domain::Int;
    let e12 = [("e1", SMALL), ("e2", SMALL)];
    let e1234 = [("e1", SMALL), ("e2", SMALL), ("e3", SMALL), ("e4", SMALL)];
    let mut rules = vec![
        rule(Spec {
            name: "R1",
            description: "point mass",
            lhs: p("sum_x C(x = e1) * (x*x + e2*x + 1)"),
            rhs: "e1*e1 + e2*e1 + 1",
            side: &[],
            metavars: &e12,
            closes: true,
        }),
        rule(Spec {
            name: "R2",
            description: "interval count",
            lhs: p("sum_x C(e1 <= x <= e2)"),
            rhs: "(e2 - e1 + 1) * C(e1 <= e2)",
            side: &[],
            metavars: &e12,
            closes: true,
        }),
        rule(Spec {
            name: "R3",
            description: "interval sum of the index",
            lhs: p("sum_x x * C(e1 <= x <= e2)"),
            rhs: "(e2*(e2+1)/2 - e1*(e1-1)/2) * C(e1 <= e2)",
            side: &[],
            metavars: &e12,
            closes: true,
        }),
        rule(Spec {
            name: "R3-square",
            description: "interval sum of the squared index",
            lhs: p("sum_x x^2 * C(e1 <= x <= e2)"),
            rhs: "(e2*(e2+1)*(2*e2+1)/6 - (e1-1)*e1*(2*e1-1)/6) * C(e1 <= e2)",
            side: &[],
            metavars: &e12,
            closes: true,
        }),
        rule(Spec {
            name: "R4",
            description: "interval fusion",
            lhs: p("C(e1 <= x <= e2) * C(e3 <= x <= e4)"),
            rhs: "C(max(e1,e3) <= x <= min(e2,e4))",
            side: &[],
            metavars: &[("e1", SMALL), ("e2", SMALL), ("e3", SMALL), ("e4", SMALL), ("x", SMALL)],
            closes: true,
        }),
        rule(Spec {
            name: "R4-count",
            description: "sum over fused intervals",
            lhs: p("sum_x C(e1 <= x <= e2) * C(e3 <= x <= e4)"),
            rhs: "max(min(e2,e4) - max(e1,e3) + 1, 0)",
            side: &[],
            metavars: &e1234,
            closes: true,
        }),
        rule(Spec {
            name: "R5",
            description: "max split",
            lhs: p("C(max(e1,e2) <= e3)"),
            rhs: "C(e1 > e2) * C(e1 <= e3) + C(e1 <= e2) * C(e2 <= e3)",
            side: &[],
            metavars: &[("e1", SMALL), ("e2", SMALL), ("e3", SMALL)],
            closes: true,
        }),
        rule(Spec {
            name: "R5'",
            description: "min split",
            lhs: p("C(e3 <= min(e1,e2))"),
            rhs: "C(e1 < e2) * C(e3 <= e1) + C(e1 >= e2) * C(e3 <= e2)",
            side: &[],
            metavars: &[("e1", SMALL), ("e2", SMALL), ("e3", SMALL)],
            closes: true,
        }),
        rule(Spec {
            name: "R5-sum",
            description: "max split under a sum",
            lhs: p("sum_x C(max(e1, x) <= e2) * C(x >= e3)"),
            rhs: "max(e2 - e3 + 1, 0) * C(e1 <= e2)",
            side: &[],
            metavars: &[("e1", SMALL), ("e2", SMALL), ("e3", SMALL)],
            closes: true,
        }),
        rule(Spec {
            name: "R5-isolate",
            description: "variable isolation",
            lhs: p("C(2*x - e1 <= x + e2)"),
            rhs: "C(x <= e1 + e2)",
            side: &[],
            metavars: &[("e1", SMALL), ("e2", SMALL), ("x", SMALL)],
            closes: true,
        }),
        rule(Spec {
            name: "R8",
            description: "finite product of disequalities",
            lhs: ProbExpr::fin_prod("j", ProbExpr::int(0), p("i - 1"), p("C(e1 - j <> 0)")),
            rhs: "C(e1 < 0) + C(e1 >= i)",
            side: &["i >= 0"],
            metavars: &[("e1", Int(-4, 12)), ("i", Int(0, 12))],
            closes: true,
        }),
        rule(Spec {
            name: "R8-monotone",
            description: "finite product of a monotone bound",
            lhs: ProbExpr::fin_prod("j", p("e1"), p("e2"), p("C(j + e3 >= 0)")),
            rhs: "C(e2 < e1) + C(e2 >= e1) * C(e1 + e3 >= 0)",
            side: &[],
            metavars: &[("e1", SMALL), ("e2", SMALL), ("e3", SMALL)],
            closes: true,
        }),
        rule(Spec {
            name: "R8-sum",
            description: "first-hit sum",
            lhs: p("sum_i C(i >= 0) * C(i = e1)").mul_prod(ProbExpr::fin_prod(
                "j",
                ProbExpr::int(0),
                p("i - 1"),
                p("C(e1 - j <> 0)"),
            )),
            rhs: "C(e1 >= 0)",
            side: &[],
            metavars: &[("e1", SMALL)],
            closes: true,
        }),
        rule(Spec {
            name: "R9-or",
            description: "disjunction",
            lhs: p("C(e1 < x or x < e2)"),
            rhs: "C(e1 < x) + C(e1 >= x) * C(x < e2)",
            side: &[],
            metavars: &[("e1", SMALL), ("e2", SMALL), ("x", SMALL)],
            closes: true,
        }),
        rule(Spec {
            name: "R9-ne",
            description: "disequality split",
            lhs: p("C(e1 <> e2)"),
            rhs: "C(e1 < e2) + C(e1 > e2)",
            side: &[],
            metavars: &e12,
            closes: true,
        }),
        rule(Spec {
            name: "R9-and",
            description: "conjunction",
            lhs: p("C(e1 <= x and x <= e2)"),
            rhs: "C(e1 <= x) * C(x <= e2)",
            side: &[],
            metavars: &[("e1", SMALL), ("e2", SMALL), ("x", SMALL)],
            closes: true,
        }),
        rule(Spec {
            name: "R9-distribute",
            description: "distribution and hoisting",
            lhs: p("sum_x (e3 * C(e1 <= x <= e2) + e4 * C(x = e1))"),
            rhs: "e3 * (e2 - e1 + 1) * C(e1 <= e2) + e4",
            side: &["e1 <= e2 + 1"],
            metavars: &e1234,
            closes: true,
        }),
        rule(Spec {
            name: "R9-finite-geometric",
            description: "finite geometric sum",
            lhs: p("sum_x C(e1 <= x <= e2) * 2^x"),
            rhs: "(2^(e2+1) - 2^e1) * C(e1 <= e2)",
            side: &[],
            metavars: &e12,
            closes: true,
        }),
    ];
    let mut r6 = rule(Spec {
        name: "R6",
        description: "geometric series",
        lhs: p("sum_x C(x >= 0) * a^x"),
        rhs: "1/(1 - a)",
        side: &["0 < a", "a < 1"],
        metavars: &[("a", Domain::UnitFraction(12))],
        closes: true,
    });
    r6.rationals = vec!["a".into()];
    r6.tail = Some(("a".into(), Tail::Geometric));
    let mut r7 = rule(Spec {
        name: "R7",
        description: "derivative of the geometric series",
        lhs: p("sum_x C(x >= 0) * x * a^x"),
        rhs: "1/((1 - a)*(1 - a)) - 1/(1 - a)",
        side: &["0 < a", "a < 1"],
        metavars: &[("a", Domain::UnitFraction(12))],
        closes: true,
    });
    r7.rationals = vec!["a".into()];
    r7.tail = Some(("a".into(), Tail::GeometricLinear));
    rules.insert(rules.iter().position(|r| r.name == "R8").unwrap(), r7);
    rules.insert(rules.iter().position(|r| r.name == "R7").unwrap(), r6);
    rules
}

trait MulProd {
    fn mul_prod(self, factor: ProbExpr) -> ProbExpr;
}

impl MulProd for ProbExpr {
    /// Multiplies `factor` into the body of a leading sum.
    fn mul_prod(self, factor: ProbExpr) -> ProbExpr {
        match self {
            ProbExpr::Sum(v, body) => ProbExpr::sum(&v, ProbExpr::mul(*body, factor)),
            other => ProbExpr::mul(other, factor),
        }
    }
}

fn sample(d: &Domain, rng: &mut ChaCha8Rng) -> BigRational {
    match d {
        Domain::Int(lo, hi) => BigRational::from_integer(BigInt::from(rng.gen_range(*lo..=*hi))),
        Domain::UnitFraction(max) => {
            let q = rng.gen_range(2..=*max);
            let p = rng.gen_range(1..q);
            BigRational::new(p.into(), q.into())
        }
    }
}

fn show(b: &Bindings) -> String {
    let parts: Vec<String> = b.iter().map(|(k, v)| format!("{k}={v}")).collect();
    parts.join(", ")
}

fn seed_of(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

/// Truncation point for rules over an infinite range.
pub const TRUNCATION: i64 = 64;

pub fn check_rule(rule: &RewriteRule, trials: usize) -> Result<RuleReport, CounterexampleFound> {
    check_rule_seeded(rule, trials, seed_of(&rule.name))
}

pub fn check_rule_seeded(rule: &RewriteRule, trials: usize, seed: u64) -> Result<RuleReport, CounterexampleFound> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ctx = Context::new().with_rationals(rule.rationals.iter().cloned());
    for b in &rule.side {
        ctx = ctx.assume(b.clone());
    }
    let engine = simplify(&rule.lhs, &ctx, super::DEFAULT_BUDGET);
    let fail = |b: &Bindings, left: &str, right: &str, l: String, r: String| CounterexampleFound {
        rule: rule.name.clone(),
        bindings: show(b),
        left: left.into(),
        right: right.into(),
        lhs: l,
        rhs: r,
    };
    if rule.closes && engine.status != Status::Closed {
        return Err(fail(
            &Bindings::new(),
            "engine result",
            "closed form",
            engine.expr.to_string(),
            "none".into(),
        ));
    }
    let exact = EvalCtx::new(&[], None, Limits::default());
    let truncated = EvalCtx::new(&[], None, Limits::truncated(TRUNCATION));
    let mut done = 0;
    let mut rejected = 0;
    while done < trials {
        let mut b = Bindings::new();
        for (v, d) in &rule.metavars {
            b.insert(v.clone(), Datum::Num(sample(d, &mut rng)));
        }
        let admissible = rule
            .side
            .iter()
            .all(|s| exact.eval_bool(s, &b).ok().flatten() == Some(true));
        if !admissible {
            rejected += 1;
            if rejected > 100 * trials.max(1) {
                break;
            }
            continue;
        }
        done += 1;
        let rhs = exact.eval(&rule.rhs, &b).map_err(|e| fail(&b, "template", "value", e.to_string(), String::new()))?;
        let lhs = match &rule.tail {
            None => exact.eval(&rule.lhs, &b),
            Some(_) => truncated.eval(&rule.lhs, &b),
        }
        .map_err(|e| fail(&b, "pattern", "value", e.to_string(), String::new()))?;
        let agrees = match &rule.tail {
            None => lhs == rhs,
            Some((a, tail)) => {
                let a = b[a].as_num().unwrap().clone();
                let gap = &rhs - &lhs;
                !gap.is_negative() && gap <= tail.bound(&a, TRUNCATION)
            }
        };
        if !agrees {
            return Err(fail(&b, "pattern", "template", lhs.to_string(), rhs.to_string()));
        }
        let ours = exact
            .eval(&engine.expr, &b)
            .map_err(|e| fail(&b, "engine result", "value", e.to_string(), engine.expr.to_string()))?;
        if ours != rhs {
            return Err(fail(&b, "engine result", "template", ours.to_string(), rhs.to_string()));
        }
    }
    Ok(RuleReport {
        rule: rule.name.clone(),
        trials: done,
        rejected,
    })
}

/// Every rule of the catalogue with its report.
pub fn check_all(trials: usize) -> Vec<Result<RuleReport, CounterexampleFound>> {
    catalogue().iter().map(|r| check_rule(r, trials)).collect()
}
