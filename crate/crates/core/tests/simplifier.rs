use num_rational::BigRational;
use poa_core::constructor::{build_dist_program, InputDist};
use poa_core::lang::parse_program;
use poa_core::probexpr::{parse_bool, parse_dist, parse_prob, Bindings, Datum, DistProgram, EvalCtx, Limits, ProbExpr};
use poa_core::simplifier::{case_split, check_rule, catalogue, simplify, simplify_program, Context, Status};
use poa_core::unfolder::unfold_all;

const UNIFORM2: &str = "px(x; n) = 1/n * C(1 <= x <= n)\npy(y; n) = 1/n * C(1 <= y <= n)";

fn build(src: &str, dist: &str) -> DistProgram {
    let program = parse_program(src).unwrap();
    let input = InputDist::from_file(&parse_dist(dist).unwrap()).unwrap();
    let mut dp = build_dist_program(&program, &input).unwrap();
    dp.assumptions.push(parse_bool("n >= 1").unwrap());
    dp
}

fn value(e: &ProbExpr, dp: &DistProgram, env: &[(&str, i64)], truncate: Option<i64>) -> BigRational {
    let limits = truncate.map(Limits::truncated).unwrap_or_default();
    let ctx = EvalCtx::for_program(dp, limits);
    let b: Bindings = env.iter().map(|(k, v)| (k.to_string(), Datum::int(*v))).collect();
    ctx.eval(e, &b).unwrap()
}

#[test]
fn point_mass() {
    let out = simplify(&parse_prob("sum_x C(x = 7) * x^2").unwrap(), &Context::new(), 100);
    assert_eq!(out.status, Status::Closed);
    assert_eq!(out.expr.to_string(), "49");
}

#[test]
fn max_closed_form() {
    let dp = build("max(x,y) = if (x>y) then x else y", UNIFORM2);
    let (unfolded, _) = unfold_all(&dp);
    let (closed, out) = simplify_program(&unfolded, 10_000);
    assert_eq!(out.status, Status::Closed, "{}", out.expr);
    assert_eq!(out.expr.to_string(), "1/(n*n)*(2*z - 1)*C(1 <= z <= n)");
    let call = ProbExpr::call(&dp.output_function, vec![ProbExpr::sym("z")]);
    for n in 1..=6 {
        for z in -2..=n + 2 {
            let env = [("n", n), ("z", z)];
            assert_eq!(value(&call, &dp, &env, None), value(&call, &closed, &env, None), "n={n} z={z}");
        }
    }
}

#[test]
fn add_closed_form() {
    let dp = build("add(x,y) = if (x=0) then y else add(x-1,y+1)", UNIFORM2);
    let (unfolded, _) = unfold_all(&dp);
    let (closed, out) = simplify_program(&unfolded, 10_000);
    assert_eq!(out.status, Status::Closed, "{}\n{}", out.expr, out.trace.join("\n"));
    assert_eq!(out.expr.to_string(), "1/(n*n)*max(min(n,z-1) - max(1,z-n) + 1,0)");
    let call = ProbExpr::call(&dp.output_function, vec![ProbExpr::sym("z")]);
    for n in 1..=5 {
        for z in -2..=2 * n + 2 {
            let env = [("n", n), ("z", z)];
            assert_eq!(value(&call, &dp, &env, None), value(&call, &closed, &env, None), "n={n} z={z}");
        }
    }
    let ctx = Context::for_program(&closed);
    let split = case_split(&out.expr, &ctx, 10_000);
    assert_eq!(split.status, Status::Closed);
    for n in 1..=5 {
        for z in -2..=2 * n + 2 {
            let env = [("n", n), ("z", z)];
            assert_eq!(value(&split.expr, &dp, &env, None), value(&out.expr, &dp, &env, None), "n={n} z={z}");
        }
    }
}

#[test]
fn rule_catalogue_is_sound() {
    for r in catalogue() {
        let report = check_rule(&r, 200).unwrap_or_else(|e| panic!("{e}"));
        assert!(report.trials > 0, "{}", r.name);
    }
}

fn derivation(src: &str) -> String {
    let dp = build(src, UNIFORM2);
    let (unfolded, report) = unfold_all(&dp);
    let (_, out) = simplify_program(&unfolded, 10_000);
    let mut lines = report.trace.clone();
    lines.extend(out.trace.iter().cloned());
    lines.push(format!("=> {} ({} steps)", out.expr, out.steps));
    lines.join("\n") + "\n"
}

#[test]
fn max_derivation_matches_golden() {
    let golden = include_str!("golden/max.derivation");
    assert_eq!(derivation("max(x,y) = if (x>y) then x else y"), golden);
}

#[test]
fn add_derivation_matches_golden() {
    let golden = include_str!("golden/add.derivation");
    assert_eq!(derivation("add(x,y) = if (x=0) then y else add(x-1,y+1)"), golden);
}

#[test]
fn add_with_asymmetric_ranges_matches_the_oracle() {
    let dp = build(
        "add(x,y) = if (x=0) then y else add(x-1,y+1)",
        "px(x; n) = 1/n * C(1 <= x <= n)\npy(y; m) = 1/m * C(1 <= y <= m)",
    );
    let mut dp = dp;
    dp.assumptions.push(parse_bool("m >= 1").unwrap());
    let (unfolded, _) = unfold_all(&dp);
    let (closed, out) = simplify_program(&unfolded, 10_000);
    assert_eq!(out.status, Status::Closed, "{}", out.expr);
    let call = ProbExpr::call(&dp.output_function, vec![ProbExpr::sym("z")]);
    for n in 1..=4 {
        for m in 1..=4 {
            for z in -1..=n + m + 1 {
                let env = [("n", n), ("m", m), ("z", z)];
                assert_eq!(value(&call, &dp, &env, None), value(&call, &closed, &env, None), "n={n} m={m} z={z}");
            }
        }
    }
}

#[test]
fn geometric_series_closes_under_assumptions() {
    let ctx = Context::new()
        .with_rationals(["a"])
        .assume(parse_bool("0 < a").unwrap())
        .assume(parse_bool("a < 1").unwrap());
    let out = simplify(&parse_prob("sum_x C(x >= 0) * a^x").unwrap(), &ctx, 100);
    assert_eq!(out.status, Status::Closed);
    assert_eq!(out.expr.to_string(), "1/(1-a)");
    let unassumed = simplify(&parse_prob("sum_x C(x >= 0) * a^x").unwrap(), &Context::new().with_rationals(["a"]), 100);
    assert_eq!(unassumed.status, Status::Residual);
}

#[test]
fn budget_exhaustion_is_residual() {
    let dp = build("add(x,y) = if (x=0) then y else add(x-1,y+1)", UNIFORM2);
    let (unfolded, _) = unfold_all(&dp);
    let (_, out) = simplify_program(&unfolded, 1);
    assert_eq!(out.status, Status::Residual);
    assert!(out.exhausted);
}
