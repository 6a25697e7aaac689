//! Parser for probability expressions and distribution files.
//!
//! ```text
//! file   := item*
//! item   := "assume" bool
//!         | "rational" IDENT ("," IDENT)*
//!         | IDENT "(" [IDENT ("," IDENT)*] [";" [IDENT ("," IDENT)*]] ")" "=" pexpr
//! pexpr  := "sum_"VAR pexpr | "if" bool "then" pexpr "else" pexpr | add ["::" pexpr]
//! add    := mul (("+" | "-") mul)*
//! mul    := unary (("*" | "/") unary)*
//! unary  := "-" unary | pow
//! pow    := atom ["^" unary]
//! atom   := INT | IDENT | IDENT "(" args ")" | "(" pexpr ")" | "[" ints "]" | "true" | "false"
//! bool   := and (("or" | "||") and)*
//! and    := not (("and" | "&&") not)*
//! not    := ("not" | "!") not | "(" bool ")" | "elems_in" "(" pexpr "," pexpr "," pexpr ")"
//!         | "true" | "false" | pexpr (cmp pexpr)*
//! ```
//!
//! A comparison chain `a <= b <= c` means `a <= b and b <= c`. The builtins
//! are `C`, `min`, `max`, `len`, `hd`, `tl`; any other call is kept as a call.

use std::collections::BTreeSet;

use num_rational::BigRational;

use super::{BoolExpr, CmpOp, ProbExpr};
use crate::error::SyntaxError;
use crate::lang::Value;
use crate::lexer::{tokenize, Cursor, Tok};

/// One declaration `name(vars; params) = body` of a distribution file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistDecl {
    pub name: String,
    pub vars: Vec<String>,
    pub params: Vec<String>,
    pub body: ProbExpr,
}

/// A parsed distribution file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DistFile {
    pub decls: Vec<DistDecl>,
    pub assumptions: Vec<BoolExpr>,
    pub rationals: BTreeSet<String>,
}

pub fn parse_prob(text: &str) -> Result<ProbExpr, SyntaxError> {
    let mut cur = Cursor::new(tokenize(text)?);
    let e = pexpr(&mut cur)?;
    if !cur.at_eof() {
        return Err(cur.unexpected("end of input"));
    }
    Ok(e)
}

pub fn parse_bool(text: &str) -> Result<BoolExpr, SyntaxError> {
    let mut cur = Cursor::new(tokenize(text)?);
    let b = bool_or(&mut cur)?;
    if !cur.at_eof() {
        return Err(cur.unexpected("end of input"));
    }
    Ok(b)
}

pub fn parse_dist(text: &str) -> Result<DistFile, SyntaxError> {
    let mut cur = Cursor::new(tokenize(text)?);
    let mut file = DistFile::default();
    while !cur.at_eof() {
        if cur.eat_keyword("assume") {
            file.assumptions.push(bool_or(&mut cur)?);
            continue;
        }
        if cur.eat_keyword("rational") {
            loop {
                file.rationals.insert(cur.expect_ident("a parameter name")?);
                if !cur.eat(&Tok::Comma) {
                    break;
                }
            }
            continue;
        }
        file.decls.push(decl(&mut cur)?);
    }
    Ok(file)
}

fn decl(cur: &mut Cursor) -> Result<DistDecl, SyntaxError> {
    let name = cur.expect_ident("a distribution name")?;
    cur.expect(&Tok::LParen, "`(`")?;
    let mut vars = Vec::new();
    let mut params = Vec::new();
    let mut in_params = false;
    if !cur.eat(&Tok::RParen) {
        loop {
            if cur.eat(&Tok::Semi) {
                if in_params {
                    return Err(cur.error("only one `;` is allowed"));
                }
                in_params = true;
                if cur.eat(&Tok::RParen) {
                    break;
                }
                continue;
            }
            let id = cur.expect_ident("a variable name")?;
            if in_params { &mut params } else { &mut vars }.push(id);
            if cur.eat(&Tok::RParen) {
                break;
            }
            if *cur.peek() != Tok::Semi {
                cur.expect(&Tok::Comma, "`,`, `;` or `)`")?;
            }
        }
    }
    cur.expect(&Tok::Eq, "`=`")?;
    let body = pexpr(cur)?;
    Ok(DistDecl { name, vars, params, body })
}

fn pexpr(cur: &mut Cursor) -> Result<ProbExpr, SyntaxError> {
    if let Tok::Ident(id) = cur.peek().clone() {
        if let Some(v) = id.strip_prefix("sum_") {
            if v.is_empty() {
                return Err(cur.error("`sum_` needs a variable, as in `sum_x`"));
            }
            cur.advance();
            let body = pexpr(cur)?;
            return Ok(ProbExpr::sum(v, body));
        }
        if id == "if" {
            cur.advance();
            let c = bool_or(cur)?;
            if !cur.eat_keyword("then") {
                return Err(cur.unexpected("`then`"));
            }
            let t = pexpr(cur)?;
            if !cur.eat_keyword("else") {
                return Err(cur.unexpected("`else`"));
            }
            let f = pexpr(cur)?;
            return Ok(ProbExpr::ite(c, t, f));
        }
    }
    let head = add(cur)?;
    if cur.eat(&Tok::ColonColon) {
        let tail = pexpr(cur)?;
        return Ok(ProbExpr::Cons(Box::new(head), Box::new(tail)));
    }
    Ok(head)
}

fn add(cur: &mut Cursor) -> Result<ProbExpr, SyntaxError> {
    let mut lhs = mul(cur)?;
    loop {
        if cur.eat(&Tok::Plus) {
            lhs = ProbExpr::add(lhs, mul(cur)?);
        } else if cur.eat(&Tok::Minus) {
            lhs = ProbExpr::sub(lhs, mul(cur)?);
        } else {
            return Ok(lhs);
        }
    }
}

fn mul(cur: &mut Cursor) -> Result<ProbExpr, SyntaxError> {
    let mut lhs = unary(cur)?;
    loop {
        if cur.eat(&Tok::Star) {
            lhs = ProbExpr::mul(lhs, unary(cur)?);
        } else if cur.eat(&Tok::Slash) {
            lhs = ProbExpr::div(lhs, unary(cur)?);
        } else {
            return Ok(lhs);
        }
    }
}

fn unary(cur: &mut Cursor) -> Result<ProbExpr, SyntaxError> {
    if cur.eat(&Tok::Minus) {
        return Ok(match unary(cur)? {
            ProbExpr::Num(r) => ProbExpr::Num(-r),
            other => ProbExpr::neg(other),
        });
    }
    let base = atom(cur)?;
    if cur.eat(&Tok::Caret) {
        let exp = unary(cur)?;
        return Ok(ProbExpr::pow(base, exp));
    }
    Ok(base)
}

fn args(cur: &mut Cursor) -> Result<Vec<ProbExpr>, SyntaxError> {
    let mut out = Vec::new();
    if cur.eat(&Tok::RParen) {
        return Ok(out);
    }
    loop {
        out.push(pexpr(cur)?);
        if cur.eat(&Tok::RParen) {
            return Ok(out);
        }
        cur.expect(&Tok::Comma, "`,` or `)`")?;
    }
}

fn atom(cur: &mut Cursor) -> Result<ProbExpr, SyntaxError> {
    match cur.peek().clone() {
        Tok::Int(n) => {
            cur.advance();
            Ok(ProbExpr::Num(BigRational::from_integer(n)))
        }
        Tok::LParen => {
            cur.advance();
            let e = pexpr(cur)?;
            cur.expect(&Tok::RParen, "`)`")?;
            Ok(e)
        }
        Tok::LBracket => {
            cur.advance();
            let mut items = Vec::new();
            if !cur.eat(&Tok::RBracket) {
                loop {
                    let neg = cur.eat(&Tok::Minus);
                    match cur.advance() {
                        Tok::Int(n) => items.push(Value::Int(if neg { -n } else { n })),
                        _ => return Err(cur.error("list literals may only contain integers")),
                    }
                    if cur.eat(&Tok::RBracket) {
                        break;
                    }
                    cur.expect(&Tok::Comma, "`,` or `]`")?;
                }
            }
            Ok(ProbExpr::Lit(Value::List(items)))
        }
        Tok::Ident(id) if id.starts_with("sum_") || id == "if" => pexpr(cur),
        Tok::Ident(id) => {
            cur.advance();
            match id.as_str() {
                "true" => return Ok(ProbExpr::Lit(Value::Bool(true))),
                "false" => return Ok(ProbExpr::Lit(Value::Bool(false))),
                _ => {}
            }
            if !cur.eat(&Tok::LParen) {
                return Ok(ProbExpr::Sym(id));
            }
            if id == "C" {
                let b = bool_or(cur)?;
                cur.expect(&Tok::RParen, "`)`")?;
                return Ok(ProbExpr::c(b));
            }
            let mut a = args(cur)?;
            let want = |k: usize, a: &Vec<ProbExpr>| -> Result<(), SyntaxError> {
                if a.len() == k {
                    Ok(())
                } else {
                    Err(cur.error(format!("`{id}` takes {k} argument(s)")))
                }
            };
            match id.as_str() {
                "min" | "max" => {
                    want(2, &a)?;
                    let b = a.pop().unwrap();
                    let x = a.pop().unwrap();
                    Ok(if id == "min" { ProbExpr::min(x, b) } else { ProbExpr::max(x, b) })
                }
                "len" | "hd" | "tl" => {
                    want(1, &a)?;
                    let x = Box::new(a.pop().unwrap());
                    Ok(match id.as_str() {
                        "len" => ProbExpr::Len(x),
                        "hd" => ProbExpr::Hd(x),
                        _ => ProbExpr::Tl(x),
                    })
                }
                _ => Ok(ProbExpr::Call(id, a)),
            }
        }
        _ => Err(cur.unexpected("an expression")),
    }
}

fn bool_or(cur: &mut Cursor) -> Result<BoolExpr, SyntaxError> {
    let mut lhs = bool_and(cur)?;
    while cur.eat(&Tok::OrOr) || cur.eat_keyword("or") {
        lhs = BoolExpr::or(lhs, bool_and(cur)?);
    }
    Ok(lhs)
}

fn bool_and(cur: &mut Cursor) -> Result<BoolExpr, SyntaxError> {
    let mut lhs = bool_not(cur)?;
    while cur.eat(&Tok::AndAnd) || cur.eat_keyword("and") {
        lhs = BoolExpr::and(lhs, bool_not(cur)?);
    }
    Ok(lhs)
}

fn cmp_op(t: &Tok) -> Option<CmpOp> {
    Some(match t {
        Tok::Eq => CmpOp::Eq,
        Tok::Ne => CmpOp::Ne,
        Tok::Lt => CmpOp::Lt,
        Tok::Le => CmpOp::Le,
        Tok::Gt => CmpOp::Gt,
        Tok::Ge => CmpOp::Ge,
        _ => return None,
    })
}

fn continues_expr(t: &Tok) -> bool {
    cmp_op(t).is_some()
        || matches!(
            t,
            Tok::Plus | Tok::Minus | Tok::Star | Tok::Slash | Tok::Caret | Tok::ColonColon
        )
}

fn bool_not(cur: &mut Cursor) -> Result<BoolExpr, SyntaxError> {
    if cur.eat(&Tok::Bang) || cur.eat_keyword("not") {
        return Ok(BoolExpr::not(bool_not(cur)?));
    }
    if *cur.peek() == Tok::LParen {
        // either a parenthesised condition or the start of an arithmetic operand
        let start = cur.pos();
        cur.advance();
        if let Ok(b) = bool_or(cur) {
            if cur.eat(&Tok::RParen) && !continues_expr(cur.peek()) {
                return Ok(b);
            }
        }
        cur.reset(start);
    }
    if let Tok::Ident(id) = cur.peek().clone() {
        let start = cur.pos();
        match id.as_str() {
            "true" | "false" => {
                cur.advance();
                if cmp_op(cur.peek()).is_none() {
                    return Ok(if id == "true" { BoolExpr::True } else { BoolExpr::False });
                }
                cur.reset(start);
            }
            "elems_in" => {
                cur.advance();
                cur.expect(&Tok::LParen, "`(`")?;
                let mut a = args(cur)?;
                if a.len() != 3 {
                    return Err(cur.error("`elems_in` takes 3 arguments"));
                }
                let hi = a.pop().unwrap();
                let lo = a.pop().unwrap();
                return Ok(BoolExpr::ElemsIn(a.pop().unwrap(), lo, hi));
            }
            _ => {}
        }
    }
    let first = pexpr(cur)?;
    let mut parts = Vec::new();
    let mut lhs = first.clone();
    while let Some(op) = cmp_op(cur.peek()) {
        cur.advance();
        let rhs = pexpr(cur)?;
        parts.push(BoolExpr::Cmp(op, lhs, rhs.clone()));
        lhs = rhs;
    }
    if parts.is_empty() {
        return Ok(BoolExpr::Holds(first));
    }
    Ok(BoolExpr::all(parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_uniform_declarations() {
        let f = parse_dist("# inputs\npx(x; n) = 1/n * C(1 <= x <= n)\npy(y; n) = 1/n * C(1 <= y <= n)\nassume n >= 1\n").unwrap();
        assert_eq!(f.decls.len(), 2);
        assert_eq!(f.decls[0].vars, vec!["x".to_string()]);
        assert_eq!(f.decls[0].params, vec!["n".to_string()]);
        assert_eq!(f.assumptions.len(), 1);
    }

    #[test]
    fn chains_become_conjunctions() {
        let b = parse_bool("1 <= x <= n").unwrap();
        assert!(matches!(b, BoolExpr::And(..)));
    }

    #[test]
    fn parenthesised_operands_are_not_conditions() {
        let b = parse_bool("(x + 1) <= 2").unwrap();
        assert!(matches!(b, BoolExpr::Cmp(CmpOp::Le, ProbExpr::Add(..), _)));
        let b = parse_bool("(x = 1) or (x = 2)").unwrap();
        assert!(matches!(b, BoolExpr::Or(..)));
    }

    #[test]
    fn list_distribution() {
        let f = parse_dist("pl(L; n, k) = C(len(L) = k) * C(elems_in(L, 1, n)) * 1/n^k").unwrap();
        assert_eq!(f.decls[0].params.len(), 2);
    }

    #[test]
    fn reports_positions() {
        let err = parse_prob("1 + * 2").unwrap_err();
        assert_eq!((err.line, err.col), (1, 5));
    }
}
