use num_rational::BigRational;
use poa_core::approximator::{
    check_termination_weight, check_termination_weight_on, cumulative_bounds, cumulative_bounds_of, expected_interval, expected_value,
    int_range, to_csv, PBox, Table, Tail, Termination,
};
use poa_core::error::ApproxError;
use poa_core::lang::Value;
use poa_core::oracle::{output_var, run_oracle};
use poa_core::pipeline::Problem;
use poa_core::probexpr::{ratio, Bindings, Datum, ProbExpr};
use poa_core::simplifier::Context;

const ADD: &str = "add(x,y) = if (x=0) then y else add(x-1,y+1)";
const MAX: &str = "max(x,y) = if (x>y) then x else y";
const UNIFORM2: &str = "px(x; n) = 1/n * C(1 <= x <= n)\npy(y; n) = 1/n * C(1 <= y <= n)\nassume n >= 1";
const FOUR_BRANCH: &str = "f(x) = if (x = 1) then 1 else if (x = 4) then 4 else if (p(x,x) > 5) then 2 else 3\n\
                           p(x,k) = if (k=0) then x else p(x*x, k-1)";
const MEMBER: &str = "member(X,L) = if (tl(L)=[] || hd(L)=X) then hd(L)=X else member(X,tl(L))";
const LISTS: &str = "px(X; n) = 1/n * C(1 <= X <= n)\npl(L; n, k) = 1/n^k * C(len(L) = k) * C(elems_in(L, 1, n))";

fn params(pairs: &[(&str, i64)]) -> Bindings {
    pairs.iter().map(|(k, v)| (k.to_string(), Datum::int(*v))).collect()
}

fn r(p: i64, q: i64) -> BigRational {
    ratio(p, q)
}

#[test]
fn four_branch_program_pbox() {
    let p = Problem::parse(FOUR_BRANCH, "px(x) = 1/4 * C(1 <= x <= 4)", &[]).unwrap();
    let a = p.analyze(10_000);
    assert!(!a.pbox.exact);
    let none = Bindings::new();
    let (table, cum) = cumulative_bounds_of(&a.pbox, &a.closed, &none, Tail::Exclusive).unwrap();
    assert_eq!(table.domain(), int_range(&1.into(), &4.into()));
    let over: Vec<_> = table.rows.iter().map(|r| r.2.clone()).collect();
    let under: Vec<_> = table.rows.iter().map(|r| r.1.clone()).collect();
    assert_eq!(over, [r(1, 4), r(1, 2), r(1, 2), r(1, 4)]);
    assert_eq!(under, [r(1, 4), r(0, 1), r(0, 1), r(1, 4)]);
    assert_eq!(cum.f_up, [r(1, 4), r(3, 4), r(1, 1), r(1, 1)]);
    assert_eq!(cum.f_down, [r(0, 1), r(1, 4), r(3, 4), r(1, 1)]);
    let e = expected_interval(&cum).unwrap();
    assert_eq!((e.low.clone(), e.high.clone()), (r(2, 1), r(3, 1)));
    // whichever way the opaque branch goes, the expectation stays inside
    assert!(e.contains(&(r(1, 4) + r(2, 1) * r(1, 2) + r(4, 1) * r(1, 4))));
    assert!(e.contains(&(r(1, 4) + r(3, 1) * r(1, 2) + r(4, 1) * r(1, 4))));
    let oracle = run_oracle(&p.program, &p.input, &none, 10_000).unwrap();
    assert!(e.contains(&oracle.expected_value().unwrap()));
    assert_eq!(check_termination_weight_on(&table), Termination::Unknown);
    assert_eq!(
        to_csv(&table, &cum),
        "z,under,over,f_down,f_up\n1,1/4,1/4,0,1/4\n2,0,1/2,1/4,3/4\n3,0,1/2,3/4,1\n4,1/4,1/4,1,1\n"
    );
}

#[test]
fn four_branch_cumulative_golden() {
    let p = Problem::parse(FOUR_BRANCH, "px(x) = 1/4 * C(1 <= x <= 4)", &[]).unwrap();
    let a = p.analyze(10_000);
    let (table, cum) = cumulative_bounds_of(&a.pbox, &a.closed, &Bindings::new(), Tail::Exclusive).unwrap();
    assert_eq!(to_csv(&table, &cum), include_str!("golden/four_branch.csv"));
    let inclusive = cumulative_bounds(&table, Tail::Inclusive);
    assert_eq!(inclusive.f_down, [r(0, 1), r(0, 1), r(1, 4), r(3, 4)]);
}

#[test]
fn member_is_bounded_vacuously_and_soundly() {
    let p = Problem::parse(MEMBER, LISTS, &[]).unwrap();
    let a = p.analyze(10_000);
    assert!(!a.unfolding.is_exact());
    for n in 1..=3 {
        for k in 1..=3 {
            let ps = params(&[("n", n), ("k", k)]);
            let oracle = run_oracle(&p.program, &p.input, &ps, 10_000).unwrap();
            for z in [Value::Bool(false), Value::Bool(true)] {
                let (lo, hi) = (a.pbox.under_at(&a.closed, &ps, &z), a.pbox.over_at(&a.closed, &ps, &z));
                assert_eq!(hi, r(1, 1));
                assert_eq!(lo, r(0, 1));
                assert!(lo <= oracle.prob(&z) && oracle.prob(&z) <= hi);
            }
        }
    }
    let table = a.pbox.tabulate(&a.closed, &params(&[("n", 2), ("k", 2)]), &[Value::Bool(false), Value::Bool(true)]);
    let cum = cumulative_bounds(&table, Tail::Exclusive);
    assert!(matches!(expected_interval(&cum), Err(ApproxError::NonNumeric(_))));
}

#[test]
fn exact_pbox_collapses() {
    let p = Problem::parse(ADD, UNIFORM2, &[]).unwrap();
    let a = p.analyze(10_000);
    assert!(a.pbox.exact);
    for n in 1..=6 {
        let ps = params(&[("n", n)]);
        let (table, cum) = cumulative_bounds_of(&a.pbox, &a.closed, &ps, Tail::Exclusive).unwrap();
        assert_eq!(cum.f_up, cum.f_down);
        let e = expected_interval(&cum).unwrap();
        assert_eq!(e.low, e.high);
        let domain = table.domain();
        let exact = expected_value(&a.closed, &a.simplified.expr, &ps, &domain).unwrap();
        assert_eq!(exact, r(n + 1, 1));
        assert_eq!(e.low, exact);
        assert_eq!(check_termination_weight_on(&table), Termination::Terminates);
    }
}

#[test]
fn expected_values_of_closed_forms() {
    let add = Problem::parse(ADD, UNIFORM2, &[]).unwrap().analyze(10_000);
    let ps = params(&[("n", 10)]);
    assert_eq!(expected_value(&add.closed, &add.simplified.expr, &ps, &int_range(&2.into(), &20.into())).unwrap(), r(11, 1));
    let max = Problem::parse(MAX, UNIFORM2, &[]).unwrap().analyze(10_000);
    let two = params(&[("n", 2)]);
    assert_eq!(expected_value(&max.closed, &max.simplified.expr, &two, &int_range(&1.into(), &2.into())).unwrap(), r(7, 4));
    let short = expected_value(&max.closed, &max.simplified.expr, &two, &int_range(&1.into(), &1.into()));
    assert!(matches!(short, Err(ApproxError::WeightDeficit { .. })));
}

#[test]
fn point_mass_expectation() {
    let p = Problem::parse("id(x) = x", "px(x) = C(x = 5)", &[]).unwrap();
    let a = p.analyze(10_000);
    let (_, cum) = cumulative_bounds_of(&a.pbox, &a.closed, &Bindings::new(), Tail::Exclusive).unwrap();
    let e = expected_interval(&cum).unwrap();
    assert_eq!((e.low, e.high), (r(5, 1), r(5, 1)));
}

#[test]
fn vacuous_over_approximation() {
    let table = Table {
        rows: (1..=3).map(|z| (Value::int(z), r(0, 1), r(1, 1))).collect(),
    };
    let cum = cumulative_bounds(&table, Tail::Exclusive);
    assert_eq!(cum.f_up, [r(1, 1), r(1, 1), r(1, 1)]);
    assert_eq!(cum.f_down, [r(0, 1), r(0, 1), r(1, 1)]);
    let inclusive = cumulative_bounds(&table, Tail::Inclusive);
    assert_eq!(inclusive.f_down, [r(0, 1), r(0, 1), r(0, 1)]);
    assert_eq!(check_termination_weight_on(&table), Termination::Unknown);
}

#[test]
fn termination_weight_symbolically() {
    let add = Problem::parse(ADD, UNIFORM2, &[]).unwrap().analyze(10_000);
    let ctx = Context::for_program(&add.closed);
    let z = output_var(&add.closed);
    assert_eq!(check_termination_weight(&add.pbox.under, &z, &ctx), Termination::Terminates);
    assert_eq!(check_termination_weight(&ProbExpr::zero(), &z, &ctx), Termination::Unknown);
    let looping = Problem::parse("loop(x) = if (x=0) then 0 else loop(x)", "px(x) = C(x = 1)", &[]).unwrap().analyze(10_000);
    assert!(looping.pbox.exact);
    let ctx = Context::for_program(&looping.closed);
    assert_eq!(check_termination_weight(&looping.pbox.under, &z, &ctx), Termination::Unknown);
}

#[test]
fn geometric_input_closes_symbolically() {
    let p = Problem::parse(
        "countdown(x) = if (x=0) then 0 else countdown(x-1)",
        "px(x; a) = (1-a) * a^x * C(x >= 0)\nrational a\nassume 0 < a\nassume a < 1",
        &[],
    )
    .unwrap();
    let a = p.analyze(10_000);
    assert!(a.is_closed());
    assert_eq!(a.simplified.expr.to_string(), "C(z = 0)");
    let ctx = Context::for_program(&a.closed);
    assert_eq!(check_termination_weight(&a.pbox.under, "z", &ctx), Termination::Terminates);
}

#[allow(dead_code)]
fn unused(_: PBox) {}
