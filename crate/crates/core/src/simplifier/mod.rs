//! Rewriting of call-free probability expressions to closed form.

mod engine;
mod facts;
pub mod poly;
mod rules;
pub(crate) mod term;

use std::collections::BTreeSet;
use std::fmt;

use crate::lang::Program;
use crate::probexpr::{BoolExpr, DistProgram, ProbExpr, ProbFunction};

pub use engine::Engine;
pub use rules::{catalogue, check_all, check_rule, check_rule_seeded, CounterexampleFound, Domain, RewriteRule, RuleReport, Tail, TRUNCATION};
pub use term::Term;


/// Default rewrite-step budget.
pub const DEFAULT_BUDGET: u64 = 10_000;

/// What the engine may use besides the expression itself.
#[derive(Debug, Clone, Default)]
pub struct Context {
    /// Probability functions that calls are inlined from.
    pub functions: Vec<ProbFunction>,
    /// Source functions; calls to these are opaque integer-valued terms.
    pub source_functions: BTreeSet<String>,
    pub source: Option<Program>,
    /// Symbolic parameters; atoms are displayed around the other symbols.
    pub parameters: BTreeSet<String>,
    /// Symbols that may take non-integer values.
    pub rationals: BTreeSet<String>,
    pub assumptions: Vec<BoolExpr>,
}

impl Context {
    pub fn new() -> Self {
        Context::default()
    }

    pub fn for_program(dp: &DistProgram) -> Self {
        Context {
            functions: dp.prob_functions.clone(),
            source_functions: dp.source.functions.iter().map(|f| f.name.clone()).collect(),
            source: Some(dp.source.clone()),
            parameters: dp.parameters.clone(),
            rationals: dp.rationals.clone(),
            assumptions: dp.assumptions.clone(),
        }
    }

    pub fn with_parameters<S: Into<String>>(mut self, ps: impl IntoIterator<Item = S>) -> Self {
        self.parameters.extend(ps.into_iter().map(Into::into));
        self
    }

    pub fn with_rationals<S: Into<String>>(mut self, ps: impl IntoIterator<Item = S>) -> Self {
        self.rationals.extend(ps.into_iter().map(Into::into));
        self
    }

    pub fn assume(mut self, b: BoolExpr) -> Self {
        self.assumptions.push(b);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Closed,
    Residual,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Closed => "closed",
            Status::Residual => "residual",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Simplified {
    pub expr: ProbExpr,
    pub status: Status,
    pub steps: u64,
    /// True when the step budget ran out.
    pub exhausted: bool,
    pub trace: Vec<String>,
    pub terms: Vec<Term>,
}

/// Rewrites `expr` towards a sum of guarded rational functions.
pub fn simplify(expr: &ProbExpr, ctx: &Context, budget: u64) -> Simplified {
    let mut engine = Engine::new(ctx, budget, true);
    let terms = engine.nz.terms(expr);
    let terms = engine.reduce(terms);
    finish(engine, terms, ctx)
}

/// Like [`simplify`], then splits every remaining `min`/`max` so that the
/// result is a sum of terms `guard * rational function`.
pub fn case_split(expr: &ProbExpr, ctx: &Context, budget: u64) -> Simplified {
    let mut engine = Engine::new(ctx, budget, true);
    let terms = engine.nz.terms(expr);
    let mut work = engine.reduce(terms);
    let mut done = Vec::new();
    while let Some(t) = work.pop() {
        if engine.steps >= engine.budget {
            engine.exhausted = true;
            done.push(t);
            continue;
        }
        match engine.split_any(&t) {
            Some(parts) => {
                engine.steps += 1;
                let parts: Vec<Term> = parts.into_iter().collect();
                work.extend(engine.reduce(parts));
            }
            None => done.push(t),
        }
    }
    done.reverse();
    finish(engine, done, ctx)
}

fn finish(engine: Engine<'_>, terms: Vec<Term>, ctx: &Context) -> Simplified {
    let status = if Engine::is_closed(&terms) && !engine.exhausted {
        Status::Closed
    } else {
        Status::Residual
    };
    Simplified {
        expr: term::terms_expr(&terms, ctx),
        status,
        steps: engine.steps,
        exhausted: engine.exhausted,
        trace: engine.trace,
        terms,
    }
}

/// Simplifies the output function of a distribution program in place.
pub fn simplify_program(dp: &DistProgram, budget: u64) -> (DistProgram, Simplified) {
    let ctx = Context::for_program(dp);
    let out = simplify(&dp.output().body, &ctx, budget);
    let mut next = dp.clone();
    next.function_mut(&dp.output_function.clone()).unwrap().body = out.expr.clone();
    (next, out)
}

/// A residual expression split into exactly known terms and bounds on the rest.
#[derive(Debug, Clone)]
pub struct Relaxed {
    /// Terms that do not depend on source-function calls.
    pub exact: ProbExpr,
    /// The remaining terms with every constraint on a source call dropped and
    /// simplified again; `None` when a call survives outside a constraint.
    pub relaxed: Option<ProbExpr>,
    /// Number of terms that needed relaxing.
    pub relaxed_terms: usize,
}

/// Separates the terms of `expr` that depend on calls to source functions and
/// drops the constraint factors carrying those calls.
pub fn relax_source_calls(expr: &ProbExpr, ctx: &Context, budget: u64) -> Relaxed {
    let out = simplify(expr, ctx, budget);
    let calls = |e: &ProbExpr| e.calls_any(&|f| ctx.source_functions.contains(f));
    let (mut exact, mut rest) = (Vec::new(), Vec::new());
    for t in out.terms {
        if calls(&term::term_expr(&t, ctx)) {
            rest.push(t);
        } else {
            exact.push(t);
        }
    }
    let relaxed_terms = rest.len();
    let mut dropped = Vec::new();
    let mut stuck = false;
    for mut t in rest {
        t.atoms.retain(|a| match a {
            term::Atom::Opaque(b) => {
                let mut hit = false;
                b.walk(&mut |e| hit |= calls(e));
                !hit
            }
            _ => true,
        });
        t.prods.retain(|p| !calls(&p.body));
        let e = term::term_expr(&t, ctx);
        stuck |= calls(&e);
        dropped.push(t);
    }
    let relaxed = (!stuck).then(|| simplify(&term::terms_expr(&dropped, ctx), ctx, budget).expr);
    Relaxed {
        exact: term::terms_expr(&exact, ctx),
        relaxed,
        relaxed_terms,
    }
}
