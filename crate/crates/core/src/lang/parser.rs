//! Recursive-descent parser for the source language.
//!
//! ```text
//! program := fundef*
//! fundef  := IDENT "(" [IDENT ("," IDENT)*] ")" "=" expr
//! expr    := or
//! or      := and (("||" | "or") and)*
//! and     := not (("&&" | "and") not)*
//! not     := ("not" | "!") not | cmp
//! cmp     := cons [("=" | "<>" | "<" | ">" | "<=" | ">=") cons]
//! cons    := add ["::" cons]
//! add     := mul (("+" | "-") mul)*
//! mul     := unary ("*" unary)*
//! unary   := "-" unary | atom
//! atom    := INT | "true" | "false" | "[" [expr ("," expr)*] "]"
//!          | "if" expr "then" expr "else" expr
//!          | IDENT "(" args ")" | IDENT | "(" expr ")"
//! ```

use std::collections::HashSet;

use super::ast::{Expr, FunctionDef, FunctionKind, PrimOp, Program, Value};
use super::classify::classify;
use crate::error::{LangError, SyntaxError};
use crate::lexer::{tokenize, Cursor, Tok};

const KEYWORDS: &[&str] = &["if", "then", "else", "and", "or", "not", "true", "false"];

/// Parses and validates a program; every function is classified on the way.
pub fn parse_program(text: &str) -> Result<Program, LangError> {
    let mut cur = Cursor::new(tokenize(text)?);
    let mut raw = Vec::new();
    while !cur.at_eof() {
        raw.push(parse_fundef(&mut cur)?);
    }
    build_program(raw)
}

/// Parses a single source expression (used by tests and the distribution grammar).
pub fn parse_expr(text: &str) -> Result<Expr, SyntaxError> {
    let mut cur = Cursor::new(tokenize(text)?);
    let e = expr(&mut cur)?;
    if !cur.at_eof() {
        return Err(cur.unexpected("end of input"));
    }
    Ok(e)
}

/// Validates names, arities and scoping, then classifies each function.
pub fn build_program(raw: Vec<(String, Vec<String>, Expr)>) -> Result<Program, LangError> {
    if raw.is_empty() {
        return Err(LangError::EmptyProgram);
    }
    let mut seen = HashSet::new();
    for (name, _, _) in &raw {
        if !seen.insert(name.clone()) {
            return Err(LangError::DuplicateFunction(name.clone()));
        }
    }
    let arities: Vec<(String, usize)> = raw.iter().map(|(n, p, _)| (n.clone(), p.len())).collect();
    for (name, params, body) in &raw {
        let mut err = None;
        body.for_each_call(&mut |callee, args| {
            if err.is_some() {
                return;
            }
            match arities.iter().find(|(n, _)| n == callee) {
                None => {
                    err = Some(LangError::UnknownFunction {
                        caller: name.clone(),
                        name: callee.to_string(),
                    })
                }
                Some((_, k)) if *k != args.len() => {
                    err = Some(LangError::ArityMismatch {
                        caller: name.clone(),
                        callee: callee.to_string(),
                        expected: *k,
                        found: args.len(),
                    })
                }
                _ => {}
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        let mut unbound = None;
        body.for_each_var(&mut |v| {
            if unbound.is_none() && !params.iter().any(|p| p == v) {
                unbound = Some(v.to_string());
            }
        });
        if let Some(v) = unbound {
            return Err(LangError::UnboundVariable {
                function: name.clone(),
                name: v,
            });
        }
    }
    let mut program = Program {
        functions: raw
            .into_iter()
            .map(|(name, params, body)| FunctionDef {
                name,
                params,
                body,
                kind: FunctionKind::NonRecursive,
            })
            .collect(),
    };
    let kinds = program
        .functions
        .iter()
        .map(|f| classify(f, &program))
        .collect::<Result<Vec<_>, _>>()?;
    for (f, k) in program.functions.iter_mut().zip(kinds) {
        f.kind = k;
    }
    Ok(program)
}

fn parse_fundef(cur: &mut Cursor) -> Result<(String, Vec<String>, Expr), SyntaxError> {
    let name = cur.expect_ident("a function name")?;
    if KEYWORDS.contains(&name.as_str()) {
        return Err(cur.error(format!("`{name}` is a keyword")));
    }
    cur.expect(&Tok::LParen, "`(`")?;
    let mut params = Vec::new();
    if !cur.eat(&Tok::RParen) {
        loop {
            let p = cur.expect_ident("a parameter name")?;
            if params.contains(&p) {
                return Err(cur.error(format!("duplicate parameter `{p}`")));
            }
            params.push(p);
            if cur.eat(&Tok::RParen) {
                break;
            }
            cur.expect(&Tok::Comma, "`,` or `)`")?;
        }
    }
    cur.expect(&Tok::Eq, "`=`")?;
    let body = expr(cur)?;
    Ok((name, params, body))
}

pub(crate) fn expr(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    or_expr(cur)
}

fn or_expr(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let mut lhs = and_expr(cur)?;
    while cur.eat(&Tok::OrOr) || cur.eat_keyword("or") {
        let rhs = and_expr(cur)?;
        lhs = Expr::Prim(PrimOp::Or, vec![lhs, rhs]);
    }
    Ok(lhs)
}

fn and_expr(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let mut lhs = not_expr(cur)?;
    while cur.eat(&Tok::AndAnd) || cur.eat_keyword("and") {
        let rhs = not_expr(cur)?;
        lhs = Expr::Prim(PrimOp::And, vec![lhs, rhs]);
    }
    Ok(lhs)
}

fn not_expr(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    if cur.eat(&Tok::Bang) || cur.eat_keyword("not") {
        let inner = not_expr(cur)?;
        return Ok(Expr::Prim(PrimOp::Not, vec![inner]));
    }
    cmp_expr(cur)
}

fn cmp_expr(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let lhs = cons_expr(cur)?;
    let op = match cur.peek() {
        Tok::Eq => PrimOp::Eq,
        Tok::Ne => PrimOp::Ne,
        Tok::Lt => PrimOp::Lt,
        Tok::Gt => PrimOp::Gt,
        Tok::Le => PrimOp::Le,
        Tok::Ge => PrimOp::Ge,
        _ => return Ok(lhs),
    };
    cur.advance();
    let rhs = cons_expr(cur)?;
    Ok(Expr::Prim(op, vec![lhs, rhs]))
}

fn cons_expr(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let head = add_expr(cur)?;
    if cur.eat(&Tok::ColonColon) {
        let tail = cons_expr(cur)?;
        return Ok(Expr::Prim(PrimOp::Cons, vec![head, tail]));
    }
    Ok(head)
}

fn add_expr(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let mut lhs = mul_expr(cur)?;
    loop {
        let op = match cur.peek() {
            Tok::Plus => PrimOp::Add,
            Tok::Minus => PrimOp::Sub,
            _ => return Ok(lhs),
        };
        cur.advance();
        let rhs = mul_expr(cur)?;
        lhs = Expr::Prim(op, vec![lhs, rhs]);
    }
}

fn mul_expr(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    let mut lhs = unary(cur)?;
    while cur.eat(&Tok::Star) {
        let rhs = unary(cur)?;
        lhs = Expr::Prim(PrimOp::Mul, vec![lhs, rhs]);
    }
    if *cur.peek() == Tok::Slash {
        return Err(cur.error("division is not part of the source language"));
    }
    Ok(lhs)
}

fn unary(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    if cur.eat(&Tok::Minus) {
        // `-5` is a literal, `-(5)` and `-x` are negations
        if let Tok::Int(n) = cur.peek().clone() {
            cur.advance();
            return Ok(Expr::Const(Value::Int(-n)));
        }
        let inner = unary(cur)?;
        return Ok(Expr::Prim(PrimOp::Neg, vec![inner]));
    }
    atom(cur)
}

fn atom(cur: &mut Cursor) -> Result<Expr, SyntaxError> {
    match cur.peek().clone() {
        Tok::Int(n) => {
            cur.advance();
            Ok(Expr::Const(Value::Int(n)))
        }
        Tok::LParen => {
            cur.advance();
            let e = expr(cur)?;
            cur.expect(&Tok::RParen, "`)`")?;
            Ok(e)
        }
        Tok::LBracket => {
            cur.advance();
            let mut items = Vec::new();
            if !cur.eat(&Tok::RBracket) {
                loop {
                    items.push(expr(cur)?);
                    if cur.eat(&Tok::RBracket) {
                        break;
                    }
                    cur.expect(&Tok::Comma, "`,` or `]`")?;
                }
            }
            Ok(list_literal(items))
        }
        Tok::Ident(name) => {
            cur.advance();
            match name.as_str() {
                "true" => return Ok(Expr::Const(Value::Bool(true))),
                "false" => return Ok(Expr::Const(Value::Bool(false))),
                "if" => {
                    let c = expr(cur)?;
                    if !cur.eat_keyword("then") {
                        return Err(cur.unexpected("`then`"));
                    }
                    let t = expr(cur)?;
                    if !cur.eat_keyword("else") {
                        return Err(cur.unexpected("`else`"));
                    }
                    let e = expr(cur)?;
                    return Ok(Expr::If(Box::new(c), Box::new(t), Box::new(e)));
                }
                kw if KEYWORDS.contains(&kw) => {
                    return Err(cur.error(format!("unexpected keyword `{kw}`")));
                }
                _ => {}
            }
            if !cur.eat(&Tok::LParen) {
                return Ok(Expr::Var(name));
            }
            let mut args = Vec::new();
            if !cur.eat(&Tok::RParen) {
                loop {
                    args.push(expr(cur)?);
                    if cur.eat(&Tok::RParen) {
                        break;
                    }
                    cur.expect(&Tok::Comma, "`,` or `)`")?;
                }
            }
            let builtin = match name.as_str() {
                "hd" => Some(PrimOp::Hd),
                "tl" => Some(PrimOp::Tl),
                "null" => Some(PrimOp::IsNil),
                _ => None,
            };
            match builtin {
                Some(op) if args.len() == 1 => Ok(Expr::Prim(op, args)),
                Some(_) => Err(cur.error(format!("`{name}` takes one argument"))),
                None => Ok(Expr::Call(name, args)),
            }
        }
        _ => Err(cur.unexpected("an expression")),
    }
}

/// `[a, b]` desugars to `a :: b :: []`; all-constant lists fold to a value.
fn list_literal(items: Vec<Expr>) -> Expr {
    if items.iter().all(|e| matches!(e, Expr::Const(_))) {
        let values = items
            .into_iter()
            .map(|e| match e {
                Expr::Const(v) => v,
                _ => unreachable!(),
            })
            .collect();
        return Expr::Const(Value::List(values));
    }
    items.into_iter().rev().fold(Expr::Const(Value::List(vec![])), |tail, head| {
        Expr::Prim(PrimOp::Cons, vec![head, tail])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_add_as_primitive_recursive() {
        let p = parse_program("add(x,y) = if (x=0) then y else add(x-1,y+1)").unwrap();
        assert_eq!(p.functions.len(), 1);
        assert_eq!(p.entry().kind, FunctionKind::PrimitiveRecursive);
    }

    #[test]
    fn parses_max_as_non_recursive() {
        let p = parse_program("max(x,y) = if (x>y) then x else y").unwrap();
        assert_eq!(p.entry().kind, FunctionKind::NonRecursive);
    }

    #[test]
    fn rejects_recursion_outside_template() {
        let err = parse_program("f(x) = f(x+1) + 1").unwrap_err();
        assert!(matches!(err, LangError::UnsupportedRecursion { .. }), "{err}");
    }

    #[test]
    fn reports_syntax_position() {
        let err = parse_program("f(x) =\n  x + * 2").unwrap_err();
        match err {
            LangError::Syntax(s) => assert_eq!((s.line, s.col), (2, 7)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn reports_scope_errors() {
        assert!(matches!(
            parse_program("f(x) = y").unwrap_err(),
            LangError::UnboundVariable { .. }
        ));
        assert!(matches!(
            parse_program("f(x) = g(x)").unwrap_err(),
            LangError::UnknownFunction { .. }
        ));
        assert!(matches!(
            parse_program("f(x) = g(x, x)\ng(y) = y").unwrap_err(),
            LangError::ArityMismatch { .. }
        ));
    }

    #[test]
    fn comments_and_continuation_lines() {
        let src = "# membership test\nmember(X,L) = if (tl(L)=[] || hd(L)=X) then hd(L)=X\n              else member(X,tl(L))\n";
        let p = parse_program(src).unwrap();
        assert_eq!(p.entry().kind, FunctionKind::PrimitiveRecursive);
    }

    #[test]
    fn list_syntax() {
        assert_eq!(
            parse_expr("[1,2]").unwrap(),
            Expr::Const(Value::List(vec![Value::int(1), Value::int(2)]))
        );
        assert!(matches!(parse_expr("1 :: []").unwrap(), Expr::Prim(PrimOp::Cons, _)));
    }
}
