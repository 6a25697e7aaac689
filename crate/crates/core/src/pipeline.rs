//! Construct, unfold, simplify and approximate in one call.

use thiserror::Error;

use crate::approximator::{pbox_of_program, PBox};
use crate::constructor::{build_dist_program, InputDist};
use crate::error::{DistError, LangError, SyntaxError};
use crate::lang::{parse_program, Program};
use crate::probexpr::{parse_bool, parse_dist, BoolExpr, DistFile, DistProgram};
use crate::simplifier::{simplify_program, Simplified, Status};
use crate::unfolder::{unfold_all, UnfoldReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InputError {
    #[error("program: {0}")]
    Program(#[from] LangError),
    #[error("distribution: {0}")]
    Dist(#[from] DistError),
    #[error("assumption: {0}")]
    Assumption(SyntaxError),
}

/// Parsed inputs and the raw distribution program built from them.
#[derive(Debug, Clone)]
pub struct Problem {
    pub program: Program,
    pub dist: DistFile,
    pub input: InputDist,
    pub raw: DistProgram,
}

impl Problem {
    /// Parses a program and a distribution file; `assumptions` are added to
    /// the ones the distribution file states.
    pub fn parse(program: &str, dist: &str, assumptions: &[&str]) -> Result<Self, InputError> {
        let program = parse_program(program)?;
        let file = parse_dist(dist).map_err(DistError::from)?;
        let input = InputDist::from_file(&file)?;
        let mut raw = build_dist_program(&program, &input)?;
        raw.assumptions.extend(file.assumptions.iter().cloned());
        raw.rationals.extend(file.rationals.iter().cloned());
        for a in assumptions {
            raw.assumptions.push(parse_bool(a).map_err(InputError::Assumption)?);
        }
        Ok(Problem {
            program,
            dist: file,
            input,
            raw,
        })
    }

    pub fn assume(&mut self, b: BoolExpr) {
        self.raw.assumptions.push(b);
    }

    pub fn analyze(&self, budget: u64) -> Analysis {
        let (unfolded, unfolding) = unfold_all(&self.raw);
        let (closed, simplified) = simplify_program(&unfolded, budget);
        let pbox = if simplified.status == Status::Closed && unfolding.is_exact() {
            PBox::exact(simplified.expr.clone())
        } else {
            pbox_of_program(&closed)
        };
        Analysis {
            unfolded,
            unfolding,
            closed,
            simplified,
            pbox,
        }
    }
}

/// Everything the analysis produced.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub unfolded: DistProgram,
    pub unfolding: UnfoldReport,
    /// The unfolded program with the simplified output function.
    pub closed: DistProgram,
    pub simplified: Simplified,
    pub pbox: PBox,
}

impl Analysis {
    pub fn is_closed(&self) -> bool {
        self.simplified.status == Status::Closed && self.pbox.exact
    }

    /// Unfolding trace, rewrite trace and the final line.
    pub fn derivation(&self) -> String {
        let mut lines = self.unfolding.trace.clone();
        lines.extend(self.simplified.trace.iter().cloned());
        lines.push(format!("=> {} ({} steps)", self.simplified.expr, self.simplified.steps));
        lines.join("\n") + "\n"
    }
}
