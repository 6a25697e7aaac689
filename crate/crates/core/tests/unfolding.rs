use num_bigint::BigInt;
use poa_core::constructor::{build_dist_program, InputDist};
use poa_core::lang::parse_program;
use poa_core::probexpr::{parse_dist, Bindings, Datum, DistProgram, EvalCtx, Limits, ProbExpr};
use poa_core::unfolder::{unfold_all, unfold_call};

fn build(src: &str, dist: &str) -> DistProgram {
    let program = parse_program(src).unwrap();
    let input = InputDist::from_file(&parse_dist(dist).unwrap()).unwrap();
    build_dist_program(&program, &input).unwrap()
}

const UNIFORM2: &str = "px(x; n) = 1/n * C(1 <= x <= n)\npy(y; n) = 1/n * C(1 <= y <= n)";

fn output_at(dp: &DistProgram, n: i64, z: i64, truncate: Option<i64>) -> num_rational::BigRational {
    let limits = match truncate {
        Some(t) => Limits::truncated(t),
        None => Limits::default(),
    };
    let ctx = EvalCtx::for_program(dp, limits);
    let mut env = Bindings::new();
    env.insert("n".into(), Datum::int(n));
    let call = ProbExpr::call(&dp.output_function, vec![ProbExpr::int(z)]);
    ctx.eval(&call, &env).unwrap()
}

#[test]
fn max_unfolds_to_call_free_double_sum() {
    let dp = build("max(x,y) = if (x>y) then x else y", UNIFORM2);
    let (out, report) = unfold_all(&dp);
    assert!(report.is_exact());
    let body = &out.output().body;
    assert!(!body.calls_any(&|f| f == "max"));
    for n in 1..=4 {
        for z in -1..=n + 1 {
            assert_eq!(output_at(&dp, n, z, None), output_at(&out, n, z, None), "n={n} z={z}");
        }
    }
}

#[test]
fn add_unfolds_with_closed_iterate() {
    let dp = build("add(x,y) = if (x=0) then y else add(x-1,y+1)", UNIFORM2);
    let (out, report) = unfold_all(&dp);
    assert!(report.is_exact());
    assert!(report.trace.iter().any(|l| l.contains("h(i,x,y) = (x-i, y+i)")), "{:?}", report.trace);
    assert!(!out.output().body.calls_any(&|f| f == "add"));
    for n in 1..=4 {
        for z in 0..=2 * n + 1 {
            assert_eq!(output_at(&dp, n, z, None), output_at(&out, n, z, Some(12)), "n={n} z={z}");
        }
    }
}

#[test]
fn identity_is_unchanged() {
    let dp = build("id(x) = x", "px(x; n) = 1/n * C(1 <= x <= n)");
    let (out, report) = unfold_all(&dp);
    assert!(report.is_exact());
    assert_eq!(out.output().body.to_string(), "sum_x 1/n*C(1 <= x <= n)*C(z = x)");
}

#[test]
fn countdown_keeps_measure() {
    let dp = build(
        "countdown(x) = if (x=0) then 0 else countdown(x-1)",
        "px(x) = 1/11 * C(0 <= x <= 10)",
    );
    let (out, _) = unfold_all(&dp);
    for z in -1..=2 {
        assert_eq!(output_at(&dp, 1, z, None), output_at(&out, 1, z, Some(12)));
    }
}

#[test]
fn composition_goes_through_an_auxiliary_function() {
    let src = "f(x) = g(dec(x))\ndec(x) = if (x=0) then 0 else dec(x-1)\ng(x) = if (x=0) then 7 else g(x-1)";
    let dp = build(src, "px(x; n) = 1/n * C(1 <= x <= n)");
    let (out, report) = unfold_all(&dp);
    assert!(report.is_exact());
    assert_eq!(report.aux_functions.len(), 1);
    assert!(report.aux_functions.len() <= 3);
    for n in 1..=3 {
        for z in [0, 7, 8] {
            assert_eq!(output_at(&dp, n, z, None), output_at(&out, n, z, Some(10)), "n={n} z={z}");
        }
    }
    let direct = build("h(x) = if (x=0) then 0 else h(x-1)", "px(x; n) = 1/n * C(1 <= x <= n)");
    let once = unfold_call(&direct);
    assert_eq!(once, direct);
}

#[test]
fn non_affine_calls_are_flagged() {
    let src = "f(x) = if (x = 1) then 1 else if (x = 4) then 4 else if (p(x,x) > 5) then 2 else 3\n\
               p(x,k) = if (k=0) then x else p(x*x, k-1)";
    let dp = build(src, "px(x) = 1/4 * C(1 <= x <= 4)");
    let (out, report) = unfold_all(&dp);
    assert_eq!(report.non_affine.iter().collect::<Vec<_>>(), ["p"]);
    for z in 0..=5 {
        assert_eq!(output_at(&dp, 1, z, None), output_at(&out, 1, z, None));
    }
    let _ = BigInt::from(0);
}
