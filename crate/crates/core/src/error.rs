use thiserror::Error;

use crate::lang::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("function `{0}` is defined more than once")]
    DuplicateFunction(String),
    #[error("call to unknown function `{name}` in `{caller}`")]
    UnknownFunction { caller: String, name: String },
    #[error("`{callee}` expects {expected} argument(s), called with {found} in `{caller}`")]
    ArityMismatch {
        caller: String,
        callee: String,
        expected: usize,
        found: usize,
    },
    #[error("unbound variable `{name}` in `{function}`")]
    UnboundVariable { function: String, name: String },
    #[error("unsupported recursion in `{function}`: {reason}")]
    UnsupportedRecursion { function: String, reason: String },
    #[error("empty program")]
    EmptyProgram,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("type error: {0}")]
    Type(String),
    #[error("wrong number of arguments for `{function}`: expected {expected}, got {found}")]
    Arity {
        function: String,
        expected: usize,
        found: usize,
    },
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("unbound variable `{0}`")]
    Unbound(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("no finite support derivable for summation variable `{0}`")]
    UnboundedSum(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("evaluation budget exhausted")]
    Budget,
    #[error("type error: {0}")]
    Type(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("program error: {0}")]
    Runtime(#[from] RuntimeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{0}")]
    Invalid(String),
    #[error("arity mismatch: entry `{function}` takes {expected} argument(s), distribution has {found} variable(s)")]
    ArityMismatch {
        function: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate input variable `{0}`")]
    DuplicateVariable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("no finite support for input variable `{0}`")]
    UnboundedSupport(String),
    #[error("input weights sum to {total}, not 1")]
    WeightNotOne { total: String },
    #[error("evaluating the input distribution: {0}")]
    Eval(#[from] EvalError),
    #[error("program failed on input ({inputs}): {error}")]
    Program { inputs: String, error: RuntimeError },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApproxError {
    #[error("no finite domain for the cumulative bounds")]
    UnboundedSupport,
    #[error("expected values need a numeric domain, found `{0}`")]
    NonNumeric(Value),
    #[error("total weight {total} is below 1; the program may diverge")]
    WeightDeficit { total: String },
    #[error("{0}")]
    Eval(#[from] EvalError),
}

/// The step arguments of a primitive-recursive function are not affine, so
/// the iterate `h(i, x̄)` has no closed form.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no closed form for the iterate of `{function}`: argument `{param}` is updated by `{update}`")]
pub struct NonAffineIteration {
    pub function: String,
    pub param: String,
    pub update: String,
}
