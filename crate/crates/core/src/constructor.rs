//! Builds the raw output-distribution program
//! `P_f(z) = sum_x1 ... sum_xn P_x(x1,...,xn) * C(z = f(x1,...,xn))`.

use std::collections::BTreeSet;

use crate::error::DistError;
use crate::lang::Program;
use crate::probexpr::{fresh_name, BoolExpr, CmpOp, DistDecl, DistFile, DistProgram, ProbExpr, ProbFunction};

/// A joint input distribution `P_x(params) = body`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputDist {
    pub params: Vec<String>,
    pub body: ProbExpr,
    pub symbolic_parameters: BTreeSet<String>,
}

impl InputDist {
    pub fn new(
        params: Vec<String>,
        body: ProbExpr,
        symbolic_parameters: BTreeSet<String>,
    ) -> Result<Self, DistError> {
        let mut seen = BTreeSet::new();
        for p in &params {
            if !seen.insert(p.clone()) {
                return Err(DistError::DuplicateVariable(p.clone()));
            }
            if symbolic_parameters.contains(p) {
                return Err(DistError::Invalid(format!("`{p}` is both an input variable and a parameter")));
            }
        }
        let stray: Vec<String> = body
            .free_symbols()
            .into_iter()
            .filter(|s| !seen.contains(s) && !symbolic_parameters.contains(s))
            .collect();
        if !stray.is_empty() {
            return Err(DistError::Invalid(format!(
                "distribution mentions undeclared symbol(s): {}",
                stray.join(", ")
            )));
        }
        Ok(InputDist {
            params,
            body,
            symbolic_parameters,
        })
    }

    pub fn from_decl(decl: &DistDecl) -> Result<Self, DistError> {
        InputDist::new(
            decl.vars.clone(),
            decl.body.clone(),
            decl.params.iter().cloned().collect(),
        )
    }

    /// The product of every declaration in a distribution file, in order.
    pub fn from_file(file: &DistFile) -> Result<Self, DistError> {
        if file.decls.is_empty() {
            return Err(DistError::Invalid("the distribution file declares nothing".into()));
        }
        let parts = file.decls.iter().map(InputDist::from_decl).collect::<Result<Vec<_>, _>>()?;
        product_input(&parts)
    }
}

pub fn product_input(dists: &[InputDist]) -> Result<InputDist, DistError> {
    let mut params = Vec::new();
    let mut symbolic = BTreeSet::new();
    for d in dists {
        params.extend(d.params.iter().cloned());
        symbolic.extend(d.symbolic_parameters.iter().cloned());
    }
    let body = ProbExpr::product(dists.iter().map(|d| d.body.clone()));
    InputDist::new(params, body, symbolic)
}

/// The raw distribution program for the entry function of `program`.
///
/// The result holds the input distribution as `P_x...` and the output
/// function `P_<entry>(z)`; assumptions and rational declarations are left
/// empty for the caller to fill in.
pub fn build_dist_program(program: &Program, input: &InputDist) -> Result<DistProgram, DistError> {
    let entry = program.entry();
    if entry.arity() != input.params.len() {
        return Err(DistError::ArityMismatch {
            function: entry.name.clone(),
            expected: entry.arity(),
            found: input.params.len(),
        });
    }
    let mut taken: BTreeSet<String> = input.params.iter().cloned().collect();
    taken.extend(input.symbolic_parameters.iter().cloned());
    taken.extend(program.functions.iter().map(|f| f.name.clone()));
    let input_name = fresh_name(&format!("P_{}", input.params.concat()), &taken);
    taken.insert(input_name.clone());
    let output_name = fresh_name(&format!("P_{}", entry.name), &taken);
    taken.insert(output_name.clone());
    let z = fresh_name("z", &taken);

    let args: Vec<ProbExpr> = input.params.iter().map(|p| ProbExpr::sym(p)).collect();
    let body = ProbExpr::sums(
        &input.params,
        ProbExpr::mul(
            ProbExpr::call(&input_name, args.clone()),
            ProbExpr::c(BoolExpr::cmp(CmpOp::Eq, ProbExpr::sym(&z), ProbExpr::call(&entry.name, args))),
        ),
    );
    Ok(DistProgram {
        prob_functions: vec![
            ProbFunction {
                name: input_name,
                params: input.params.clone(),
                body: input.body.clone(),
            },
            ProbFunction {
                name: output_name.clone(),
                params: vec![z],
                body,
            },
        ],
        source: program.clone(),
        output_function: output_name,
        parameters: input.symbolic_parameters.clone(),
        rationals: BTreeSet::new(),
        assumptions: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;
    use crate::probexpr::parse_dist;

    #[test]
    fn max_template() {
        let p = parse_program("max(x,y) = if (x>y) then x else y").unwrap();
        let file = parse_dist("px(x; n) = 1/n * C(1 <= x <= n)\npy(y; n) = 1/n * C(1 <= y <= n)").unwrap();
        let input = InputDist::from_file(&file).unwrap();
        let dp = build_dist_program(&p, &input).unwrap();
        assert_eq!(dp.output_function, "P_max");
        assert_eq!(dp.output().body.to_string(), "sum_x sum_y P_xy(x,y)*C(z = max(x,y))");
        assert_eq!(dp.function("P_xy").unwrap().body.to_string(), "1/n*C(1 <= x <= n)*(1/n*C(1 <= y <= n))");
    }

    #[test]
    fn arity_and_duplicates() {
        let p = parse_program("id(x) = x").unwrap();
        let two = parse_dist("px(x, y; n) = C(x = y)").unwrap();
        assert!(matches!(
            build_dist_program(&p, &InputDist::from_file(&two).unwrap()),
            Err(DistError::ArityMismatch { expected: 1, found: 2, .. })
        ));
        let dup = parse_dist("px(x) = C(x = 1)\npx2(x) = C(x = 1)").unwrap();
        assert_eq!(InputDist::from_file(&dup), Err(DistError::DuplicateVariable("x".into())));
        let stray = parse_dist("px(x) = C(x = m)").unwrap();
        assert!(InputDist::from_file(&stray).is_err());
    }
}
