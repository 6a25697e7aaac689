use std::fmt::Write;

use num_bigint::Sign;

use super::ast::{Expr, FunctionDef, PrimOp, Program, Value};

pub fn print_program(program: &Program) -> String {
    let mut out = String::new();
    for f in &program.functions {
        writeln!(out, "{}", print_function(f)).unwrap();
    }
    out
}

pub fn print_function(f: &FunctionDef) -> String {
    format!("{}({}) = {}", f.name, f.params.join(", "), print_expr(&f.body))
}

pub fn print_expr(e: &Expr) -> String {
    render(e, 0)
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::If(..) => 0,
        Expr::Prim(op, _) => match op {
            PrimOp::Or => 1,
            PrimOp::And => 2,
            PrimOp::Not => 3,
            PrimOp::Eq | PrimOp::Ne | PrimOp::Lt | PrimOp::Gt | PrimOp::Le | PrimOp::Ge => 4,
            PrimOp::Cons => 5,
            PrimOp::Add | PrimOp::Sub => 6,
            PrimOp::Mul => 7,
            PrimOp::Neg => 8,
            PrimOp::Hd | PrimOp::Tl | PrimOp::IsNil => 9,
        },
        Expr::Const(Value::Int(n)) if n.sign() == Sign::Minus => 8,
        _ => 9,
    }
}

fn render(e: &Expr, min: u8) -> String {
    let s = match e {
        Expr::Const(v) => v.to_string(),
        Expr::Var(x) => x.clone(),
        Expr::If(c, t, f) => format!("if ({}) then {} else {}", render(c, 0), render(t, 0), render(f, 0)),
        Expr::Call(name, args) => {
            let args: Vec<String> = args.iter().map(|a| render(a, 0)).collect();
            format!("{name}({})", args.join(", "))
        }
        Expr::Prim(op, args) => match op {
            PrimOp::Or => format!("{} || {}", render(&args[0], 1), render(&args[1], 2)),
            PrimOp::And => format!("{} and {}", render(&args[0], 2), render(&args[1], 3)),
            PrimOp::Not => format!("not {}", render(&args[0], 3)),
            PrimOp::Eq | PrimOp::Ne | PrimOp::Lt | PrimOp::Gt | PrimOp::Le | PrimOp::Ge => {
                format!("{} {} {}", render(&args[0], 5), op.symbol(), render(&args[1], 5))
            }
            PrimOp::Cons => format!("{} :: {}", render(&args[0], 6), render(&args[1], 5)),
            PrimOp::Add | PrimOp::Sub => {
                format!("{} {} {}", render(&args[0], 6), op.symbol(), render(&args[1], 7))
            }
            PrimOp::Mul => format!("{} * {}", render(&args[0], 7), render(&args[1], 8)),
            PrimOp::Neg => match &args[0] {
                Expr::Const(Value::Int(n)) if n.sign() != Sign::Minus => format!("-({n})"),
                a => format!("-{}", render(a, 9)),
            },
            PrimOp::Hd | PrimOp::Tl | PrimOp::IsNil => format!("{}({})", op.symbol(), render(&args[0], 0)),
        },
    };
    if prec(e) < min {
        format!("({s})")
    } else {
        s
    }
}
