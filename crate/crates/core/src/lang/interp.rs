use std::collections::HashMap;

use num_bigint::BigInt;

use super::ast::{Expr, PrimOp, Program, Value};
use crate::error::RuntimeError;

/// Result of running a program under a step budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Value(Value),
    NonTerminated,
}

impl Outcome {
    pub fn value(self) -> Option<Value> {
        match self {
            Outcome::Value(v) => Some(v),
            Outcome::NonTerminated => None,
        }
    }
}

struct Budget {
    remaining: u64,
}

enum Flow {
    Done(Value),
    Diverged,
}

/// Call-by-value evaluation of the entry function.
///
/// The budget counts function-call unfoldings; once more than `step_budget`
/// calls have been made the run reports [`Outcome::NonTerminated`].
pub fn interpret(program: &Program, args: &[Value], step_budget: u64) -> Result<Outcome, RuntimeError> {
    call_function(program, &program.entry().name, args.to_vec(), step_budget)
}

/// Like [`interpret`] but for an arbitrary named function of the program.
pub fn call_function(
    program: &Program,
    name: &str,
    args: Vec<Value>,
    step_budget: u64,
) -> Result<Outcome, RuntimeError> {
    let mut budget = Budget { remaining: step_budget };
    match apply(program, name, args, &mut budget)? {
        Flow::Done(v) => Ok(Outcome::Value(v)),
        Flow::Diverged => Ok(Outcome::NonTerminated),
    }
}

fn apply(program: &Program, name: &str, mut args: Vec<Value>, budget: &mut Budget) -> Result<Flow, RuntimeError> {
    let mut def = program
        .function(name)
        .ok_or_else(|| RuntimeError::UnknownFunction(name.to_string()))?;
    // tail calls reuse this frame, so primitive recursion runs in constant stack
    'call: loop {
        if args.len() != def.arity() {
            return Err(RuntimeError::Arity {
                function: def.name.clone(),
                expected: def.arity(),
                found: args.len(),
            });
        }
        if budget.remaining == 0 {
            return Ok(Flow::Diverged);
        }
        budget.remaining -= 1;
        let env: HashMap<&str, Value> = def.params.iter().map(String::as_str).zip(args).collect();
        let mut expr = &def.body;
        loop {
            match expr {
                Expr::If(c, t, e) => {
                    let cond = match eval(program, c, &env, budget)? {
                        Flow::Done(v) => v,
                        Flow::Diverged => return Ok(Flow::Diverged),
                    };
                    expr = if truth(&cond)? { t } else { e };
                }
                Expr::Call(callee, call_args) => {
                    let mut vals = Vec::with_capacity(call_args.len());
                    for a in call_args {
                        match eval(program, a, &env, budget)? {
                            Flow::Done(v) => vals.push(v),
                            Flow::Diverged => return Ok(Flow::Diverged),
                        }
                    }
                    def = program
                        .function(callee)
                        .ok_or_else(|| RuntimeError::UnknownFunction(callee.clone()))?;
                    args = vals;
                    continue 'call;
                }
                other => return eval(program, other, &env, budget),
            }
        }
    }
}

fn eval(program: &Program, expr: &Expr, env: &HashMap<&str, Value>, budget: &mut Budget) -> Result<Flow, RuntimeError> {
    macro_rules! value {
        ($e:expr) => {
            match eval(program, $e, env, budget)? {
                Flow::Done(v) => v,
                Flow::Diverged => return Ok(Flow::Diverged),
            }
        };
    }
    let v = match expr {
        Expr::Const(v) => v.clone(),
        Expr::Var(x) => env.get(x.as_str()).cloned().ok_or_else(|| RuntimeError::Unbound(x.clone()))?,
        Expr::If(c, t, e) => {
            let cond = value!(c);
            if truth(&cond)? {
                value!(t)
            } else {
                value!(e)
            }
        }
        Expr::Call(name, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(value!(a));
            }
            return apply(program, name, vals, budget);
        }
        Expr::Prim(PrimOp::And, args) => {
            let lhs = value!(&args[0]);
            if !truth(&lhs)? {
                Value::Bool(false)
            } else {
                let rhs = value!(&args[1]);
                Value::Bool(truth(&rhs)?)
            }
        }
        Expr::Prim(PrimOp::Or, args) => {
            let lhs = value!(&args[0]);
            if truth(&lhs)? {
                Value::Bool(true)
            } else {
                let rhs = value!(&args[1]);
                Value::Bool(truth(&rhs)?)
            }
        }
        Expr::Prim(op, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(value!(a));
            }
            prim(*op, vals)?
        }
    };
    Ok(Flow::Done(v))
}

fn truth(v: &Value) -> Result<bool, RuntimeError> {
    v.as_bool()
        .ok_or_else(|| RuntimeError::Type(format!("expected a boolean, found {v}")))
}

fn int(v: &Value) -> Result<&BigInt, RuntimeError> {
    v.as_int()
        .ok_or_else(|| RuntimeError::Type(format!("expected an integer, found {v}")))
}

/// Applies a primitive operator to already-evaluated operands.
pub fn prim(op: PrimOp, mut vals: Vec<Value>) -> Result<Value, RuntimeError> {
    if vals.len() != op.arity() {
        return Err(RuntimeError::Type(format!(
            "`{}` expects {} operand(s)",
            op.symbol(),
            op.arity()
        )));
    }
    Ok(match op {
        PrimOp::Add => Value::Int(int(&vals[0])? + int(&vals[1])?),
        PrimOp::Sub => Value::Int(int(&vals[0])? - int(&vals[1])?),
        PrimOp::Mul => Value::Int(int(&vals[0])? * int(&vals[1])?),
        PrimOp::Neg => Value::Int(-int(&vals[0])?.clone()),
        PrimOp::Eq => Value::Bool(vals[0] == vals[1]),
        PrimOp::Ne => Value::Bool(vals[0] != vals[1]),
        PrimOp::Lt => Value::Bool(int(&vals[0])? < int(&vals[1])?),
        PrimOp::Gt => Value::Bool(int(&vals[0])? > int(&vals[1])?),
        PrimOp::Le => Value::Bool(int(&vals[0])? <= int(&vals[1])?),
        PrimOp::Ge => Value::Bool(int(&vals[0])? >= int(&vals[1])?),
        PrimOp::And => Value::Bool(truth(&vals[0])? && truth(&vals[1])?),
        PrimOp::Or => Value::Bool(truth(&vals[0])? || truth(&vals[1])?),
        PrimOp::Not => Value::Bool(!truth(&vals[0])?),
        PrimOp::Hd => match vals.pop() {
            Some(Value::List(items)) if !items.is_empty() => items.into_iter().next().unwrap(),
            Some(v) => return Err(RuntimeError::Type(format!("hd of {v}"))),
            None => unreachable!(),
        },
        PrimOp::Tl => match vals.pop() {
            Some(Value::List(mut items)) if !items.is_empty() => {
                items.remove(0);
                Value::List(items)
            }
            Some(v) => return Err(RuntimeError::Type(format!("tl of {v}"))),
            None => unreachable!(),
        },
        PrimOp::Cons => {
            let tail = vals.pop().unwrap();
            let head = vals.pop().unwrap();
            match tail {
                Value::List(mut items) => {
                    items.insert(0, head);
                    Value::List(items)
                }
                other => return Err(RuntimeError::Type(format!("cons onto non-list {other}"))),
            }
        }
        PrimOp::IsNil => match &vals[0] {
            Value::List(items) => Value::Bool(items.is_empty()),
            other => return Err(RuntimeError::Type(format!("null of {other}"))),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    fn run(src: &str, args: &[i64], budget: u64) -> Outcome {
        let p = parse_program(src).unwrap();
        let args: Vec<Value> = args.iter().map(|&a| Value::int(a)).collect();
        interpret(&p, &args, budget).unwrap()
    }

    const ADD: &str = "add(x,y) = if (x=0) then y else add(x-1,y+1)";

    #[test]
    fn add_examples() {
        assert_eq!(run(ADD, &[3, 4], 100), Outcome::Value(Value::int(7)));
        assert_eq!(run(ADD, &[0, 9], 100), Outcome::Value(Value::int(9)));
    }

    #[test]
    fn self_loop_does_not_terminate() {
        assert_eq!(run("loop(x) = if (x=0) then 0 else loop(x)", &[1], 100), Outcome::NonTerminated);
    }

    #[test]
    fn deep_tail_recursion_runs_in_constant_stack() {
        assert_eq!(run(ADD, &[200_000, 1], 1_000_000), Outcome::Value(Value::int(200_001)));
    }

    #[test]
    fn type_errors_are_distinct_from_divergence() {
        let p = parse_program("f(x) = hd(x)").unwrap();
        assert!(matches!(interpret(&p, &[Value::int(1)], 10), Err(RuntimeError::Type(_))));
    }

    #[test]
    fn add_matches_arithmetic_on_grid() {
        let p = parse_program(ADD).unwrap();
        for x in 0..=20 {
            for y in 0..=20 {
                let out = interpret(&p, &[Value::int(x), Value::int(y)], 100).unwrap();
                assert_eq!(out, Outcome::Value(Value::int(x + y)));
            }
        }
    }

    #[test]
    fn member_on_lists() {
        let p = parse_program("member(X,L) = if (tl(L)=[] || hd(L)=X) then hd(L)=X else member(X,tl(L))").unwrap();
        let list = Value::List(vec![Value::int(1), Value::int(2)]);
        assert_eq!(
            interpret(&p, &[Value::int(2), list.clone()], 10).unwrap(),
            Outcome::Value(Value::Bool(true))
        );
        assert_eq!(
            interpret(&p, &[Value::int(3), list], 10).unwrap(),
            Outcome::Value(Value::Bool(false))
        );
    }
}
