use std::fmt;

use num_bigint::BigInt;

/// A runtime value of the source language.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(BigInt),
    Bool(bool),
    List(Vec<Value>),
}

impl Value {
    pub fn int(n: i64) -> Self {
        Value::Int(BigInt::from(n))
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Value::Int(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrimOp {
    Add,
    Sub,
    Mul,
    Neg,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    And,
    Or,
    Not,
    Hd,
    Tl,
    Cons,
    IsNil,
}

impl PrimOp {
    pub fn arity(self) -> usize {
        match self {
            PrimOp::Neg | PrimOp::Not | PrimOp::Hd | PrimOp::Tl | PrimOp::IsNil => 1,
            _ => 2,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            PrimOp::Add => "+",
            PrimOp::Sub | PrimOp::Neg => "-",
            PrimOp::Mul => "*",
            PrimOp::Eq => "=",
            PrimOp::Ne => "<>",
            PrimOp::Lt => "<",
            PrimOp::Gt => ">",
            PrimOp::Le => "<=",
            PrimOp::Ge => ">=",
            PrimOp::And => "and",
            PrimOp::Or => "or",
            PrimOp::Not => "not",
            PrimOp::Hd => "hd",
            PrimOp::Tl => "tl",
            PrimOp::Cons => "::",
            PrimOp::IsNil => "null",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Const(Value),
    Var(String),
    Prim(PrimOp, Vec<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Self {
        Expr::Var(name.to_string())
    }

    pub fn int(n: i64) -> Self {
        Expr::Const(Value::int(n))
    }

    pub fn prim(op: PrimOp, args: Vec<Expr>) -> Self {
        Expr::Prim(op, args)
    }

    /// Visits every call site in the expression, outermost first.
    pub fn for_each_call<'a>(&'a self, f: &mut impl FnMut(&'a str, &'a [Expr])) {
        match self {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Prim(_, args) => args.iter().for_each(|a| a.for_each_call(f)),
            Expr::If(c, t, e) => {
                c.for_each_call(f);
                t.for_each_call(f);
                e.for_each_call(f);
            }
            Expr::Call(name, args) => {
                f(name, args);
                args.iter().for_each(|a| a.for_each_call(f));
            }
        }
    }

    pub fn calls(&self, name: &str) -> bool {
        let mut found = false;
        self.for_each_call(&mut |callee, _| found |= callee == name);
        found
    }

    pub fn for_each_var<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => f(v),
            Expr::Prim(_, args) | Expr::Call(_, args) => args.iter().for_each(|a| a.for_each_var(f)),
            Expr::If(c, t, e) => {
                c.for_each_var(f);
                t.for_each_var(f);
                e.for_each_var(f);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FunctionKind {
    NonRecursive,
    PrimitiveRecursive,
}

/// The components of `f(x̄) = if b(x̄) then g(x̄) else f(e_1, …, e_n)`.
#[derive(Debug, Clone, Copy)]
pub struct PrimRecParts<'a> {
    pub base_test: &'a Expr,
    pub base_value: &'a Expr,
    pub step_args: &'a [Expr],
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Expr,
    pub kind: FunctionKind,
}

impl FunctionDef {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Splits a primitive-recursive body into its template components.
    pub fn primrec_parts(&self) -> Option<PrimRecParts<'_>> {
        if self.kind != FunctionKind::PrimitiveRecursive {
            return None;
        }
        match &self.body {
            Expr::If(b, g, rec) => match rec.as_ref() {
                Expr::Call(name, args) if *name == self.name => Some(PrimRecParts {
                    base_test: b,
                    base_value: g,
                    step_args: args,
                }),
                _ => None,
            },
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub functions: Vec<FunctionDef>,
}

impl Program {
    pub fn entry(&self) -> &FunctionDef {
        &self.functions[0]
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }
}
