//! Human-readable rendering in the notation of the derivations:
//! `C(1 <= z <= n)`, `sum_x ...`, `prod_{j=0}^{i-1} ...`, `min`, `max`.

use num_traits::Signed;

use super::{BoolExpr, CmpOp, ProbExpr};

pub fn print_prob(e: &ProbExpr) -> String {
    render(e, 0)
}

pub fn print_bool(b: &BoolExpr) -> String {
    render_bool(b, 0)
}

const BINDER: u8 = 0;
const CONS: u8 = 1;
const ADD: u8 = 2;
const MUL: u8 = 3;
const NEG: u8 = 4;
const ATOM: u8 = 6;

fn prec(e: &ProbExpr) -> u8 {
    match e {
        ProbExpr::Sum(..) | ProbExpr::FinProd { .. } | ProbExpr::Ite(..) => BINDER,
        ProbExpr::Cons(..) => CONS,
        ProbExpr::Add(..) | ProbExpr::Sub(..) => ADD,
        ProbExpr::Mul(..) | ProbExpr::Div(..) => MUL,
        ProbExpr::Num(r) if !r.is_integer() => MUL,
        ProbExpr::Num(r) if r.is_negative() => NEG,
        ProbExpr::Neg(_) => NEG,
        ProbExpr::Pow(..) => 5,
        _ => ATOM,
    }
}

fn is_atomic(e: &ProbExpr) -> bool {
    match e {
        ProbExpr::Sym(_) => true,
        ProbExpr::Num(r) => r.is_integer() && !r.is_negative(),
        _ => false,
    }
}

fn render(e: &ProbExpr, min: u8) -> String {
    let s = match e {
        ProbExpr::Num(r) => r.to_string(),
        ProbExpr::Sym(s) => s.clone(),
        ProbExpr::Lit(v) => v.to_string(),
        ProbExpr::Add(..) | ProbExpr::Sub(..) => {
            let mut parts = Vec::new();
            flatten_sum(e, &mut parts);
            let spaced = parts.iter().any(|(_, p)| !is_atomic(p));
            let mut out = String::new();
            for (i, (sign, p)) in parts.iter().enumerate() {
                let text = render(p, if i == 0 { ADD } else { MUL });
                if i > 0 {
                    match (spaced, sign) {
                        (true, true) => out.push_str(" + "),
                        (true, false) => out.push_str(" - "),
                        (false, true) => out.push('+'),
                        (false, false) => out.push('-'),
                    }
                }
                out.push_str(&text);
            }
            out
        }
        ProbExpr::Mul(a, b) => format!("{}*{}", render(a, MUL), render(b, NEG)),
        ProbExpr::Div(a, b) => format!("{}/{}", render(a, MUL), render(b, NEG + 1)),
        ProbExpr::Neg(a) => match a.as_ref() {
            ProbExpr::Num(r) if !r.is_negative() => format!("-({r})"),
            other => format!("-{}", render(other, NEG + 1)),
        },
        ProbExpr::Pow(a, b) => format!("{}^{}", render(a, ATOM), render(b, ATOM)),
        ProbExpr::Min(a, b) => format!("min({},{})", render(a, 0), render(b, 0)),
        ProbExpr::Max(a, b) => format!("max({},{})", render(a, 0), render(b, 0)),
        ProbExpr::C(b) => format!("C({})", render_bool(b, 0)),
        ProbExpr::Sum(v, body) => format!("sum_{v} {}", render(body, 0)),
        ProbExpr::FinProd { var, lo, hi, body } => {
            format!("prod_{{{var}={}}}^{{{}}} {}", render(lo, 0), render(hi, 0), render(body, 0))
        }
        ProbExpr::Call(f, args) => {
            let args: Vec<String> = args.iter().map(|a| render(a, 0)).collect();
            format!("{f}({})", args.join(","))
        }
        ProbExpr::Ite(b, t, f) => format!("if {} then {} else {}", render_bool(b, 0), render(t, CONS), render(f, 0)),
        ProbExpr::Truth(b) => format!("({})", render_bool(b, 0)),
        ProbExpr::Cons(h, t) => format!("{} :: {}", render(h, ADD), render(t, CONS)),
        ProbExpr::Hd(a) => format!("hd({})", render(a, 0)),
        ProbExpr::Tl(a) => format!("tl({})", render(a, 0)),
        ProbExpr::Len(a) => format!("len({})", render(a, 0)),
    };
    if prec(e) < min {
        format!("({s})")
    } else {
        s
    }
}

/// Summands of an `Add`/`Sub` chain with their signs (`true` for plus).
fn flatten_sum<'a>(e: &'a ProbExpr, out: &mut Vec<(bool, &'a ProbExpr)>) {
    match e {
        ProbExpr::Add(a, b) => {
            flatten_sum(a, out);
            out.push((true, b));
        }
        ProbExpr::Sub(a, b) => {
            flatten_sum(a, out);
            out.push((false, b));
        }
        other => out.push((true, other)),
    }
}

fn bool_prec(b: &BoolExpr) -> u8 {
    match b {
        BoolExpr::Or(..) => 0,
        BoolExpr::And(..) => 1,
        BoolExpr::Not(_) => 2,
        _ => 3,
    }
}

fn render_bool(b: &BoolExpr, min: u8) -> String {
    let s = match b {
        BoolExpr::True => "true".to_string(),
        BoolExpr::False => "false".to_string(),
        BoolExpr::Cmp(op, a, c) => format!("{} {} {}", render(a, CONS), op.symbol(), render(c, CONS)),
        BoolExpr::Or(a, c) => format!("{} or {}", render_bool(a, 0), render_bool(c, 1)),
        BoolExpr::And(..) => {
            let mut parts = Vec::new();
            flatten_and(b, &mut parts);
            render_conjunction(&parts)
        }
        BoolExpr::Not(a) => format!("not {}", render_bool(a, 2)),
        BoolExpr::Holds(e) => render(e, ATOM),
        BoolExpr::ElemsIn(l, lo, hi) => format!("elems_in({},{},{})", render(l, 0), render(lo, 0), render(hi, 0)),
    };
    if bool_prec(b) < min {
        format!("({s})")
    } else {
        s
    }
}

fn flatten_and<'a>(b: &'a BoolExpr, out: &mut Vec<&'a BoolExpr>) {
    match b {
        BoolExpr::And(a, c) => {
            flatten_and(a, out);
            flatten_and(c, out);
        }
        other => out.push(other),
    }
}

fn ascending(op: CmpOp) -> bool {
    matches!(op, CmpOp::Lt | CmpOp::Le)
}

fn descending(op: CmpOp) -> bool {
    matches!(op, CmpOp::Gt | CmpOp::Ge)
}

/// Joins conjuncts with `and`, merging `a <= b` followed by `b <= c` into
/// the chain `a <= b <= c`.
fn render_conjunction(parts: &[&BoolExpr]) -> String {
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < parts.len() {
        let mut text = render_bool(parts[i], 2);
        if let BoolExpr::Cmp(op, _, mut last) = parts[i].clone() {
            let dir: fn(CmpOp) -> bool = if ascending(op) { ascending } else { descending };
            while i + 1 < parts.len() {
                match parts[i + 1] {
                    BoolExpr::Cmp(op2, a2, c2) if (ascending(op) || descending(op)) && dir(*op2) && *a2 == last => {
                        text.push_str(&format!(" {} {}", op2.symbol(), render(c2, CONS)));
                        last = c2.clone();
                        i += 1;
                    }
                    _ => break,
                }
            }
        }
        out.push(text);
        i += 1;
    }
    out.join(" and ")
}

impl std::fmt::Display for ProbExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print_prob(self))
    }
}

impl std::fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print_bool(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probexpr::parse_prob;

    fn p(src: &str) -> String {
        print_prob(&parse_prob(src).unwrap())
    }

    #[test]
    fn closed_form_rendering() {
        assert_eq!(
            p("1/(n*n) * max(min(n, z-1) - max(1, z-n) + 1, 0)"),
            "1/(n*n)*max(min(n,z-1) - max(1,z-n) + 1,0)"
        );
        assert_eq!(p("1/(n*n) * (2*z - 1) * C(1 <= z <= n)"), "1/(n*n)*(2*z - 1)*C(1 <= z <= n)");
    }

    #[test]
    fn constraint_and_sum_rendering() {
        assert_eq!(p("C(1 <= z <= n)"), "C(1 <= z <= n)");
        assert_eq!(p("sum_x C(x = 5)"), "sum_x C(x = 5)");
        assert_eq!(p("C(x > y and y > 0)"), "C(x > y > 0)");
        assert_eq!(p("C(not (x = 1) or x < 0)"), "C(not x = 1 or x < 0)");
    }

    #[test]
    fn product_rendering() {
        let e = ProbExpr::fin_prod(
            "j",
            ProbExpr::int(0),
            parse_prob("i - 1").unwrap(),
            parse_prob("C(x - j <> 0)").unwrap(),
        );
        assert_eq!(print_prob(&e), "prod_{j=0}^{i-1} C(x-j <> 0)");
    }
}
