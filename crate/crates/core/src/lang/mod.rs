//! The analysed source language: a first-order functional language whose
//! functions are either non-recursive or primitive recursive.

mod ast;
mod classify;
mod interp;
mod parser;
mod print;

pub use ast::{Expr, FunctionDef, FunctionKind, PrimOp, PrimRecParts, Program, Value};
pub use classify::classify;
pub use interp::{call_function, interpret, prim, Outcome};
pub use parser::{build_program, parse_expr, parse_program};
pub use print::{print_expr, print_function, print_program};

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_expr(vars: Vec<&'static str>) -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-5i64..20).prop_map(Expr::int),
            any::<bool>().prop_map(|b| Expr::Const(Value::Bool(b))),
            Just(Expr::Const(Value::List(vec![]))),
            prop::sample::select(vars).prop_map(Expr::var),
        ];
        leaf.prop_recursive(4, 32, 3, |inner| {
            let binops = prop::sample::select(vec![
                PrimOp::Add,
                PrimOp::Sub,
                PrimOp::Mul,
                PrimOp::Eq,
                PrimOp::Ne,
                PrimOp::Lt,
                PrimOp::Ge,
                PrimOp::And,
                PrimOp::Or,
                PrimOp::Cons,
            ]);
            let unops = prop::sample::select(vec![PrimOp::Neg, PrimOp::Not, PrimOp::Hd, PrimOp::Tl, PrimOp::IsNil]);
            prop_oneof![
                (binops, inner.clone(), inner.clone()).prop_map(|(op, a, b)| Expr::Prim(op, vec![a, b])),
                (unops, inner.clone()).prop_map(|(op, a)| Expr::Prim(op, vec![a])),
                (inner.clone(), inner.clone(), inner.clone())
                    .prop_map(|(c, t, e)| Expr::If(Box::new(c), Box::new(t), Box::new(e))),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Call("h".into(), vec![a, b])),
            ]
        })
    }

    proptest! {
        #[test]
        fn parse_print_round_trip(body in arb_expr(vec!["x", "y"])) {
            let program = build_program(vec![
                ("f".into(), vec!["x".into(), "y".into()], body),
                ("h".into(), vec!["a".into(), "b".into()], Expr::var("a")),
            ]).unwrap();
            let printed = print_program(&program);
            let reparsed = parse_program(&printed).unwrap();
            prop_assert_eq!(reparsed, program);
        }

        #[test]
        fn interpreter_is_deterministic_and_budget_monotone(x in 0i64..15, y in 0i64..15, k in 1u64..40) {
            let p = parse_program("add(x,y) = if (x=0) then y else add(x-1,y+1)").unwrap();
            let args = [Value::int(x), Value::int(y)];
            let a = interpret(&p, &args, k).unwrap();
            prop_assert_eq!(&a, &interpret(&p, &args, k).unwrap());
            if let Outcome::Value(v) = a {
                for more in [k + 1, 2 * k, 10 * k] {
                    prop_assert_eq!(interpret(&p, &args, more).unwrap(), Outcome::Value(v.clone()));
                }
            }
        }
    }
}
