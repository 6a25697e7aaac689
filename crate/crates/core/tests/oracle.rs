use num_rational::BigRational;
use num_traits::{One, Zero};
use poa_core::error::OracleError;
use poa_core::lang::Value;
use poa_core::oracle::{compare, compare_sandwich, enumerate_support, outputs, run_oracle, run_oracle_truncated};
use poa_core::pipeline::Problem;
use poa_core::probexpr::{parse_prob, ratio, Bindings, Datum};

const ADD: &str = "add(x,y) = if (x=0) then y else add(x-1,y+1)";
const MAX: &str = "max(x,y) = if (x>y) then x else y";
const MEMBER: &str = "member(X,L) = if (tl(L)=[] || hd(L)=X) then hd(L)=X else member(X,tl(L))";
const UNIFORM2: &str = "px(x; n) = 1/n * C(1 <= x <= n)\npy(y; n) = 1/n * C(1 <= y <= n)\nassume n >= 1";
const LISTS: &str = "px(X; n) = 1/n * C(1 <= X <= n)\npl(L; n, k) = 1/n^k * C(len(L) = k) * C(elems_in(L, 1, n))";

fn params(pairs: &[(&str, i64)]) -> Bindings {
    pairs.iter().map(|(k, v)| (k.to_string(), Datum::int(*v))).collect()
}

#[test]
fn uniform_pair_has_four_tuples() {
    let p = Problem::parse(ADD, UNIFORM2, &[]).unwrap();
    let tuples = enumerate_support(&p.input, &params(&[("n", 2)])).unwrap();
    assert_eq!(tuples.len(), 4);
    assert!(tuples.iter().all(|(_, w)| *w == ratio(1, 4)));
}

#[test]
fn repeating_lists_of_length_two() {
    let p = Problem::parse("f(L) = L", "pl(L; n, k) = 1/n^k * C(len(L) = k) * C(elems_in(L, 1, n))", &[]).unwrap();
    let tuples = enumerate_support(&p.input, &params(&[("n", 2), ("k", 2)])).unwrap();
    assert_eq!(tuples.len(), 4);
    assert!(tuples.iter().all(|(_, w)| *w == ratio(1, 4)));
}

#[test]
fn geometric_input_needs_truncation() {
    let p = Problem::parse("g(x) = x", "px(x) = 1/2^(x+1) * C(x >= 0)", &[]).unwrap();
    assert!(matches!(enumerate_support(&p.input, &Bindings::new()), Err(OracleError::UnboundedSupport(_))));
    let d = run_oracle_truncated(&p.program, &p.input, &Bindings::new(), 100, 9).unwrap();
    assert_eq!(d.unresolved, ratio(1, 1024));
    assert!(d.weight().is_one());
}

#[test]
fn add_and_max_for_n_two() {
    let add = Problem::parse(ADD, UNIFORM2, &[]).unwrap();
    let d = run_oracle(&add.program, &add.input, &params(&[("n", 2)]), 10_000).unwrap();
    let expect: Vec<(Value, BigRational)> = vec![(Value::int(2), ratio(1, 4)), (Value::int(3), ratio(1, 2)), (Value::int(4), ratio(1, 4))];
    assert_eq!(d.mass.clone().into_iter().collect::<Vec<_>>(), expect);
    assert!(d.nonterm_mass.is_zero());
    assert_eq!(d.to_csv(), "value,numerator,denominator\n2,1,4\n3,1,2\n4,1,4\n");
    assert_eq!(d.expected_value(), Some(ratio(3, 1)));

    let max = Problem::parse(MAX, UNIFORM2, &[]).unwrap();
    let d = run_oracle(&max.program, &max.input, &params(&[("n", 2)]), 10_000).unwrap();
    assert_eq!(d.prob(&Value::int(1)), ratio(1, 4));
    assert_eq!(d.prob(&Value::int(2)), ratio(3, 4));
}

#[test]
fn member_with_three_elements() {
    let p = Problem::parse(MEMBER, LISTS, &[]).unwrap();
    let d = run_oracle(&p.program, &p.input, &params(&[("n", 2), ("k", 3)]), 10_000).unwrap();
    assert_eq!(d.prob(&Value::Bool(true)), ratio(7, 8));
    assert_eq!(d.prob(&Value::Bool(false)), ratio(1, 8));
}

#[test]
fn divergence_is_reported_as_nontermination() {
    let p = Problem::parse("loop(x) = if (x=0) then 0 else loop(x)", "px(x) = C(x = 1)", &[]).unwrap();
    let d = run_oracle(&p.program, &p.input, &Bindings::new(), 1000).unwrap();
    assert!(d.mass.is_empty());
    assert!(d.nonterm_mass.is_one());
}

#[test]
fn larger_budgets_only_resolve_mass() {
    let p = Problem::parse("countdown(x) = if (x=0) then 0 else countdown(x-1)", "px(x) = 1/20 * C(1 <= x <= 20)", &[]).unwrap();
    let mut last = BigRational::one();
    for budget in [1, 2, 4, 8, 16, 32] {
        let d = run_oracle(&p.program, &p.input, &Bindings::new(), budget).unwrap();
        assert!(d.nonterm_mass <= last);
        assert!(d.weight().is_one());
        last = d.nonterm_mass;
    }
    assert!(last.is_zero());
}

#[test]
fn empty_support_is_rejected() {
    let p = Problem::parse("id(x) = x", "px(x) = C(1 <= x <= 0)", &[]).unwrap();
    assert!(matches!(enumerate_support(&p.input, &Bindings::new()), Err(OracleError::WeightNotOne { .. })));
}

#[test]
fn comparisons_report_discrepancies() {
    let p = Problem::parse(MAX, UNIFORM2, &[]).unwrap();
    let a = p.analyze(10_000);
    let ps = params(&[("n", 2)]);
    let d = run_oracle(&p.program, &p.input, &ps, 10_000).unwrap();
    let zs = outputs(&d, (-1..=4).map(Value::int));
    assert!(compare(&a.closed, &a.simplified.expr, &d, &ps, &zs).unwrap().ok());
    let wrong = parse_prob("1/(n*n)*2*z*C(1 <= z <= n)").unwrap();
    let report = compare(&a.closed, &wrong, &d, &ps, &zs).unwrap();
    assert_eq!(report.discrepancies[0].z, Value::int(1));
    assert_eq!(report.discrepancies[0].expected, ratio(1, 4));
    assert_eq!(report.discrepancies[0].got, ratio(1, 2));
    let vacuous = compare_sandwich(&d, &zs, |_| BigRational::zero(), |_| BigRational::one());
    assert!(vacuous.ok());
}
