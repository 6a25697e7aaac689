use std::collections::{HashMap, HashSet};

use super::ast::{Expr, FunctionDef, FunctionKind, Program};
use crate::error::LangError;

/// Decides whether `def` is non-recursive or follows the primitive-recursive
/// template `f(x̄) = if b(x̄) then g(x̄) else f(e_1, …, e_n)`.
///
/// The existing `kind` field of `def` is ignored.
pub fn classify(def: &FunctionDef, program: &Program) -> Result<FunctionKind, LangError> {
    let unsupported = |reason: &str| LangError::UnsupportedRecursion {
        function: def.name.clone(),
        reason: reason.to_string(),
    };
    if reaches_through_others(&def.name, program) {
        return Err(unsupported("mutual recursion through other functions"));
    }
    if !def.body.calls(&def.name) {
        return Ok(FunctionKind::NonRecursive);
    }
    let Expr::If(test, base, rec) = &def.body else {
        return Err(unsupported("self-call outside the `if b then g else f(…)` template"));
    };
    let Expr::Call(callee, args) = rec.as_ref() else {
        return Err(unsupported("the else-branch must be exactly the recursive call"));
    };
    if *callee != def.name {
        return Err(unsupported("the else-branch must be exactly the recursive call"));
    }
    if args.len() != def.params.len() {
        return Err(unsupported("recursive call arity differs from the formals"));
    }
    if test.calls(&def.name) || base.calls(&def.name) {
        return Err(unsupported("self-call inside the test or base case"));
    }
    if args.iter().any(|a| a.calls(&def.name)) {
        return Err(unsupported("nested self-call in the recursive arguments"));
    }
    Ok(FunctionKind::PrimitiveRecursive)
}

/// True when `name` can reach itself through a path that leaves the function.
fn reaches_through_others(name: &str, program: &Program) -> bool {
    let graph: HashMap<&str, HashSet<&str>> = program
        .functions
        .iter()
        .map(|f| {
            let mut callees = HashSet::new();
            f.body.for_each_call(&mut |c, _| {
                callees.insert(c);
            });
            (f.name.as_str(), callees)
        })
        .collect();
    let mut stack: Vec<&str> = graph
        .get(name)
        .map(|cs| cs.iter().copied().filter(|c| *c != name).collect())
        .unwrap_or_default();
    let mut seen = HashSet::new();
    while let Some(f) = stack.pop() {
        if f == name {
            return true;
        }
        if !seen.insert(f) {
            continue;
        }
        if let Some(cs) = graph.get(f) {
            stack.extend(cs.iter().copied());
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    #[test]
    fn nested_self_call_is_rejected() {
        let err = parse_program("g(x) = if (x=0) then 1 else g(g(x-1))").unwrap_err();
        assert!(matches!(err, LangError::UnsupportedRecursion { .. }));
    }

    #[test]
    fn mutual_recursion_is_rejected() {
        let err = parse_program("even(x) = if (x=0) then true else odd(x-1)\nodd(x) = if (x=0) then false else even(x-1)")
            .unwrap_err();
        assert!(matches!(err, LangError::UnsupportedRecursion { .. }));
    }

    #[test]
    fn helpers_inside_template_are_allowed() {
        let p = parse_program("f(x) = if (z(x)) then inc(x) else f(x-1)\nz(x) = x=0\ninc(x) = x+1").unwrap();
        assert_eq!(p.entry().kind, FunctionKind::PrimitiveRecursive);
        assert_eq!(p.function("inc").unwrap().kind, FunctionKind::NonRecursive);
    }

    #[test]
    fn self_loop_is_primitive_recursive() {
        let p = parse_program("loop(x) = if (x=0) then 0 else loop(x)").unwrap();
        assert_eq!(p.entry().kind, FunctionKind::PrimitiveRecursive);
    }
}
