//! Stable line-oriented text format for distribution programs.
//!
//! ```text
//! poa-dist 1
//! source <one printed source function>
//! param <name>
//! rational <name>
//! assume <condition>
//! prob <name> (<params>) <expression>
//! output <name>
//! ```
//!
//! Expressions and conditions are prefix s-expressions: numbers are written
//! `3`, `-2` or `1/4`; symbols are bare identifiers; every other node is
//! `(head child...)` with heads `neg + - * / ^ min max C sum prod call ite
//! truth lit cons hd tl len` and, for conditions, `true false = <> < <= > >=
//! and or not holds elems_in`.

use std::collections::BTreeSet;

use num_rational::BigRational;

use super::{BoolExpr, CmpOp, DistProgram, ProbExpr, ProbFunction};
use crate::error::DistError;
use crate::lang::{parse_program, print_function, Value};

const HEADER: &str = "poa-dist 1";

pub fn write_dist_program(dp: &DistProgram) -> String {
    let mut out = vec![HEADER.to_string()];
    for f in &dp.source.functions {
        out.push(format!("source {}", print_function(f)));
    }
    for p in &dp.parameters {
        out.push(format!("param {p}"));
    }
    for p in &dp.rationals {
        out.push(format!("rational {p}"));
    }
    for a in &dp.assumptions {
        out.push(format!("assume {}", sexp_bool(a)));
    }
    for f in &dp.prob_functions {
        out.push(format!("prob {} ({}) {}", f.name, f.params.join(" "), sexp(&f.body)));
    }
    out.push(format!("output {}", dp.output_function));
    out.join("\n") + "\n"
}

pub fn read_dist_program(text: &str) -> Result<DistProgram, DistError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(HEADER) {
        return Err(DistError::Invalid(format!("missing `{HEADER}` header")));
    }
    let mut source = String::new();
    let mut parameters = BTreeSet::new();
    let mut rationals = BTreeSet::new();
    let mut assumptions = Vec::new();
    let mut prob_functions = Vec::new();
    let mut output = None;
    for (no, line) in lines.enumerate() {
        let bad = |m: &str| DistError::Invalid(format!("line {}: {m}", no + 2));
        let (kw, rest) = line.split_once(' ').ok_or_else(|| bad("expected `keyword payload`"))?;
        match kw {
            "source" => {
                source.push_str(rest);
                source.push('\n');
            }
            "param" => {
                parameters.insert(rest.trim().to_string());
            }
            "rational" => {
                rationals.insert(rest.trim().to_string());
            }
            "assume" => assumptions.push(read_bool(&mut tokens(rest).peekable()).map_err(|m| bad(&m))?),
            "prob" => {
                let (name, rest) = rest.split_once(' ').ok_or_else(|| bad("expected a function name"))?;
                let open = rest.find('(').ok_or_else(|| bad("expected `(`"))?;
                let close = rest.find(')').ok_or_else(|| bad("expected `)`"))?;
                let params = rest[open + 1..close].split_whitespace().map(String::from).collect();
                let mut toks = tokens(&rest[close + 1..]).peekable();
                let body = read_expr(&mut toks).map_err(|m| bad(&m))?;
                if toks.next().is_some() {
                    return Err(bad("trailing input"));
                }
                prob_functions.push(ProbFunction {
                    name: name.to_string(),
                    params,
                    body,
                });
            }
            "output" => output = Some(rest.trim().to_string()),
            other => return Err(bad(&format!("unknown keyword `{other}`"))),
        }
    }
    let source = parse_program(&source).map_err(|e| DistError::Invalid(format!("source program: {e}")))?;
    let output_function = output.ok_or_else(|| DistError::Invalid("missing `output` line".into()))?;
    Ok(DistProgram {
        prob_functions,
        source,
        output_function,
        parameters,
        rationals,
        assumptions,
    })
}

fn num_text(r: &BigRational) -> String {
    r.to_string()
}

pub(crate) fn sexp(e: &ProbExpr) -> String {
    let node = |head: &str, kids: &[&ProbExpr]| {
        let mut s = format!("({head}");
        for k in kids {
            s.push(' ');
            s.push_str(&sexp(k));
        }
        s.push(')');
        s
    };
    match e {
        ProbExpr::Num(r) => num_text(r),
        ProbExpr::Sym(s) => s.clone(),
        ProbExpr::Lit(v) => format!("(lit {})", sexp_value(v)),
        ProbExpr::Neg(a) => node("neg", &[a]),
        ProbExpr::Add(a, b) => node("+", &[a, b]),
        ProbExpr::Sub(a, b) => node("-", &[a, b]),
        ProbExpr::Mul(a, b) => node("*", &[a, b]),
        ProbExpr::Div(a, b) => node("/", &[a, b]),
        ProbExpr::Pow(a, b) => node("^", &[a, b]),
        ProbExpr::Min(a, b) => node("min", &[a, b]),
        ProbExpr::Max(a, b) => node("max", &[a, b]),
        ProbExpr::C(b) => format!("(C {})", sexp_bool(b)),
        ProbExpr::Sum(v, body) => format!("(sum {v} {})", sexp(body)),
        ProbExpr::FinProd { var, lo, hi, body } => {
            format!("(prod {var} {} {} {})", sexp(lo), sexp(hi), sexp(body))
        }
        ProbExpr::Call(f, args) => {
            let mut s = format!("(call {f}");
            for a in args {
                s.push(' ');
                s.push_str(&sexp(a));
            }
            s.push(')');
            s
        }
        ProbExpr::Ite(b, t, f) => format!("(ite {} {} {})", sexp_bool(b), sexp(t), sexp(f)),
        ProbExpr::Truth(b) => format!("(truth {})", sexp_bool(b)),
        ProbExpr::Cons(a, b) => node("cons", &[a, b]),
        ProbExpr::Hd(a) => node("hd", &[a]),
        ProbExpr::Tl(a) => node("tl", &[a]),
        ProbExpr::Len(a) => node("len", &[a]),
    }
}

fn sexp_value(v: &Value) -> String {
    match v {
        Value::Int(n) => n.to_string(),
        Value::Bool(true) => "#t".into(),
        Value::Bool(false) => "#f".into(),
        Value::List(items) => {
            let inner: Vec<String> = items.iter().map(sexp_value).collect();
            if inner.is_empty() {
                "(list)".into()
            } else {
                format!("(list {})", inner.join(" "))
            }
        }
    }
}

pub(crate) fn sexp_bool(b: &BoolExpr) -> String {
    match b {
        BoolExpr::True => "true".into(),
        BoolExpr::False => "false".into(),
        BoolExpr::Cmp(op, a, c) => format!("({} {} {})", op.symbol(), sexp(a), sexp(c)),
        BoolExpr::And(a, c) => format!("(and {} {})", sexp_bool(a), sexp_bool(c)),
        BoolExpr::Or(a, c) => format!("(or {} {})", sexp_bool(a), sexp_bool(c)),
        BoolExpr::Not(a) => format!("(not {})", sexp_bool(a)),
        BoolExpr::Holds(e) => format!("(holds {})", sexp(e)),
        BoolExpr::ElemsIn(l, lo, hi) => format!("(elems_in {} {} {})", sexp(l), sexp(lo), sexp(hi)),
    }
}

fn tokens(s: &str) -> impl Iterator<Item = String> + '_ {
    let mut chars = s.chars().peekable();
    std::iter::from_fn(move || {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        let c = chars.next()?;
        if c == '(' || c == ')' {
            return Some(c.to_string());
        }
        let mut t = c.to_string();
        while let Some(&d) = chars.peek() {
            if d.is_whitespace() || d == '(' || d == ')' {
                break;
            }
            t.push(d);
            chars.next();
        }
        Some(t)
    })
}

type Toks<I> = std::iter::Peekable<I>;

fn next<I: Iterator<Item = String>>(t: &mut Toks<I>) -> Result<String, String> {
    t.next().ok_or_else(|| "unexpected end of line".to_string())
}

fn close<I: Iterator<Item = String>>(t: &mut Toks<I>) -> Result<(), String> {
    match t.next().as_deref() {
        Some(")") => Ok(()),
        other => Err(format!("expected `)`, found {other:?}")),
    }
}

fn read_expr<I: Iterator<Item = String>>(t: &mut Toks<I>) -> Result<ProbExpr, String> {
    let tok = next(t)?;
    if tok != "(" {
        if tok == ")" {
            return Err("unexpected `)`".into());
        }
        return Ok(match tok.parse::<BigRational>() {
            Ok(r) => ProbExpr::Num(r),
            Err(_) => ProbExpr::Sym(tok),
        });
    }
    let head = next(t)?;
    let b = |e: ProbExpr| Box::new(e);
    let e = match head.as_str() {
        "neg" => ProbExpr::Neg(b(read_expr(t)?)),
        "hd" => ProbExpr::Hd(b(read_expr(t)?)),
        "tl" => ProbExpr::Tl(b(read_expr(t)?)),
        "len" => ProbExpr::Len(b(read_expr(t)?)),
        "+" | "-" | "*" | "/" | "^" | "min" | "max" | "cons" => {
            let x = read_expr(t)?;
            let y = read_expr(t)?;
            match head.as_str() {
                "+" => ProbExpr::add(x, y),
                "-" => ProbExpr::sub(x, y),
                "*" => ProbExpr::mul(x, y),
                "/" => ProbExpr::div(x, y),
                "^" => ProbExpr::pow(x, y),
                "min" => ProbExpr::min(x, y),
                "max" => ProbExpr::max(x, y),
                _ => ProbExpr::Cons(b(x), b(y)),
            }
        }
        "C" => ProbExpr::c(read_bool(t)?),
        "truth" => ProbExpr::Truth(Box::new(read_bool(t)?)),
        "sum" => {
            let v = next(t)?;
            ProbExpr::Sum(v, b(read_expr(t)?))
        }
        "prod" => {
            let var = next(t)?;
            let lo = read_expr(t)?;
            let hi = read_expr(t)?;
            let body = read_expr(t)?;
            ProbExpr::fin_prod(&var, lo, hi, body)
        }
        "ite" => {
            let c = read_bool(t)?;
            let x = read_expr(t)?;
            let y = read_expr(t)?;
            ProbExpr::ite(c, x, y)
        }
        "lit" => ProbExpr::Lit(read_value(t)?),
        "call" => {
            let f = next(t)?;
            let mut args = Vec::new();
            while t.peek().map(String::as_str) != Some(")") {
                args.push(read_expr(t)?);
            }
            ProbExpr::Call(f, args)
        }
        other => return Err(format!("unknown expression head `{other}`")),
    };
    close(t)?;
    Ok(e)
}

fn read_value<I: Iterator<Item = String>>(t: &mut Toks<I>) -> Result<Value, String> {
    let tok = next(t)?;
    match tok.as_str() {
        "#t" => Ok(Value::Bool(true)),
        "#f" => Ok(Value::Bool(false)),
        "(" => {
            if next(t)? != "list" {
                return Err("expected `list`".into());
            }
            let mut items = Vec::new();
            while t.peek().map(String::as_str) != Some(")") {
                items.push(read_value(t)?);
            }
            close(t)?;
            Ok(Value::List(items))
        }
        n => n.parse().map(Value::Int).map_err(|_| format!("bad value `{n}`")),
    }
}

fn read_bool<I: Iterator<Item = String>>(t: &mut Toks<I>) -> Result<BoolExpr, String> {
    let tok = next(t)?;
    match tok.as_str() {
        "true" => return Ok(BoolExpr::True),
        "false" => return Ok(BoolExpr::False),
        "(" => {}
        other => return Err(format!("expected a condition, found `{other}`")),
    }
    let head = next(t)?;
    let op = match head.as_str() {
        "=" => Some(CmpOp::Eq),
        "<>" => Some(CmpOp::Ne),
        "<" => Some(CmpOp::Lt),
        "<=" => Some(CmpOp::Le),
        ">" => Some(CmpOp::Gt),
        ">=" => Some(CmpOp::Ge),
        _ => None,
    };
    let b = match (op, head.as_str()) {
        (Some(op), _) => {
            let x = read_expr(t)?;
            BoolExpr::Cmp(op, x, read_expr(t)?)
        }
        (None, "and") => {
            let x = read_bool(t)?;
            BoolExpr::and(x, read_bool(t)?)
        }
        (None, "or") => {
            let x = read_bool(t)?;
            BoolExpr::or(x, read_bool(t)?)
        }
        (None, "not") => BoolExpr::not(read_bool(t)?),
        (None, "holds") => BoolExpr::Holds(read_expr(t)?),
        (None, "elems_in") => {
            let l = read_expr(t)?;
            let lo = read_expr(t)?;
            BoolExpr::ElemsIn(l, lo, read_expr(t)?)
        }
        (None, other) => return Err(format!("unknown condition head `{other}`")),
    };
    close(t)?;
    Ok(b)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::lang::parse_program;
    use crate::probexpr::rat;
    use proptest::prelude::*;

    pub fn arb_prob() -> impl Strategy<Value = ProbExpr> {
        let leaf = prop_oneof![
            (-20i64..20, 1i64..6).prop_map(|(p, q)| ProbExpr::Num(BigRational::new(p.into(), q.into()))),
            prop::sample::select(vec!["x", "y", "n", "z1"]).prop_map(ProbExpr::sym),
            Just(ProbExpr::Lit(Value::List(vec![Value::int(1)]))),
            Just(ProbExpr::Lit(Value::Bool(false))),
        ];
        leaf.prop_recursive(4, 40, 3, |inner| {
            let cmp = prop::sample::select(vec![CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge]);
            let boolean = (cmp, inner.clone(), inner.clone()).prop_map(|(op, a, b)| BoolExpr::Cmp(op, a, b));
            let boolean = boolean.prop_recursive(2, 6, 2, |b| {
                prop_oneof![
                    (b.clone(), b.clone()).prop_map(|(x, y)| BoolExpr::and(x, y)),
                    (b.clone(), b.clone()).prop_map(|(x, y)| BoolExpr::or(x, y)),
                    b.prop_map(BoolExpr::not),
                ]
            });
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ProbExpr::add(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ProbExpr::sub(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ProbExpr::mul(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ProbExpr::div(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ProbExpr::max(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| ProbExpr::min(a, b)),
                inner.clone().prop_map(ProbExpr::neg),
                boolean.clone().prop_map(ProbExpr::c),
                inner.clone().prop_map(|b| ProbExpr::sum("x", b)),
                (inner.clone(), inner.clone()).prop_map(|(h, b)| ProbExpr::fin_prod("j", ProbExpr::zero(), h, b)),
                (boolean, inner.clone(), inner.clone()).prop_map(|(c, a, b)| ProbExpr::ite(c, a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| ProbExpr::call("P_u", vec![a, b])),
            ]
        })
    }

    fn sample_program(body: ProbExpr) -> DistProgram {
        DistProgram {
            prob_functions: vec![
                ProbFunction {
                    name: "P_x".into(),
                    params: vec!["x".into(), "y".into()],
                    body: ProbExpr::mul(ProbExpr::Num(rat(1)), body),
                },
                ProbFunction {
                    name: "P_add".into(),
                    params: vec!["z".into()],
                    body: ProbExpr::one(),
                },
            ],
            source: parse_program("add(x,y) = if (x=0) then y else add(x-1,y+1)").unwrap(),
            output_function: "P_add".into(),
            parameters: ["n".to_string()].into_iter().collect(),
            rationals: BTreeSet::new(),
            assumptions: vec![BoolExpr::Cmp(CmpOp::Ge, ProbExpr::sym("n"), ProbExpr::int(1))],
        }
    }

    proptest! {
        #[test]
        fn serialization_round_trips(body in arb_prob()) {
            let dp = sample_program(body);
            let text = write_dist_program(&dp);
            prop_assert_eq!(read_dist_program(&text).unwrap(), dp);
        }
    }

    #[test]
    fn rejects_missing_header() {
        assert!(read_dist_program("output P").is_err());
    }
}
