use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::{One, Zero};

use poa_core::approximator::{check_termination_weight, cumulative_bounds, expected_interval, expected_value, int_range, Tail, Termination};
use poa_core::lang::Value;
use poa_core::oracle::{eval_at, output_var, run_oracle, run_oracle_truncated, OracleDist};
use poa_core::pipeline::{Analysis, Problem};
use poa_core::probexpr::{eval_prob, parse_bool, parse_prob, ratio, Bindings, Datum, Limits};
use poa_core::simplifier::{case_split, catalogue, check_rule, simplify, Context, Status};

const ADD: &str = "add(x,y) = if (x=0) then y else add(x-1,y+1)";
const MAX: &str = "max(x,y) = if (x>y) then x else y";
const UNIFORM2: &str = "px(x; n) = 1/n * C(1 <= x <= n)\npy(y; n) = 1/n * C(1 <= y <= n)\nassume n >= 1";
const FOUR_BRANCH: &str = "f(x) = if (x = 1) then 1 else if (x = 4) then 4 else if (p(x,x) > 5) then 2 else 3\n\
                           p(x,k) = if (k=0) then x else p(x*x, k-1)";
const MEMBER: &str = "member(X,L) = if (tl(L)=[] || hd(L)=X) then hd(L)=X else member(X,tl(L))";
const LISTS: &str = "px(X; n) = 1/n * C(1 <= X <= n)\npl(L; n, k) = 1/n^k * C(len(L) = k) * C(elems_in(L, 1, n))\nassume n >= 1\nassume k >= 1";
const BUDGET: u64 = 10_000;

type Outcome = Result<String, String>;

fn params(pairs: &[(&str, i64)]) -> Bindings {
    pairs.iter().map(|(k, v)| (k.to_string(), Datum::int(*v))).collect()
}

fn analysis(src: &str, dist: &str) -> (Problem, Analysis) {
    let p = Problem::parse(src, dist, &[]).unwrap();
    let a = p.analyze(BUDGET);
    (p, a)
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let t = start.elapsed();
    if t > limit {
        return Err(format!("took {t:?}, limit {limit:?}"));
    }
    Ok(())
}

/// Evaluates a reference formula in `n` and `z`.
fn formula(text: &str, n: i64, z: i64) -> BigRational {
    let e = parse_prob(text).unwrap();
    eval_prob(&e, &params(&[("n", n), ("z", z)]), &Limits::default()).unwrap()
}

fn closed_form_grid(src: &str, reference: &str, zs: impl Fn(i64) -> std::ops::RangeInclusive<i64>) -> Outcome {
    let start = Instant::now();
    let (p, a) = analysis(src, UNIFORM2);
    if a.simplified.status != Status::Closed {
        return Err(format!("residual: {}", a.simplified.expr));
    }
    let mut checked = 0;
    for n in 1..=10 {
        let ps = params(&[("n", n)]);
        let oracle = run_oracle(&p.program, &p.input, &ps, BUDGET).map_err(|e| e.to_string())?;
        for z in zs(n) {
            let got = eval_at(&a.closed, &a.simplified.expr, &ps, &Value::int(z)).map_err(|e| e.to_string())?;
            let want = formula(reference, n, z);
            let truth = oracle.prob(&Value::int(z));
            if got != want || got != truth {
                return Err(format!("n={n} z={z}: pipeline {got}, formula {want}, oracle {truth}"));
            }
            checked += 1;
        }
    }
    within(Duration::from_secs(5), start)?;
    Ok(format!("{} ; {checked} points", a.simplified.expr))
}

fn criterion_1() -> Outcome {
    closed_form_grid(MAX, "1/(n^2)*(2*z-1)*C(1 <= z <= n)", |n| -2..=n + 3)
}

fn criterion_2() -> Outcome {
    closed_form_grid(ADD, "1/(n^2)*max(min(n,z-1) - max(1,z-n) + 1, 0)", |n| -2..=2 * n + 3)
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let (_, a) = analysis(ADD, UNIFORM2);
    let split = case_split(&a.simplified.expr, &Context::for_program(&a.closed), BUDGET);
    if split.status != Status::Closed {
        return Err(format!("case split left {}", split.expr));
    }
    let reference = "1/(n^2)*(C(n < z <= 2*n)*(2*n - z + 1) + C(1 <= z <= n)*(z - 1))";
    for n in 1..=10 {
        let ps = params(&[("n", n)]);
        for z in -2..=2 * n + 3 {
            let got = eval_at(&a.closed, &split.expr, &ps, &Value::int(z)).map_err(|e| e.to_string())?;
            let want = formula(reference, n, z);
            if got != want {
                return Err(format!("n={n} z={z}: normal form {got}, two-case form {want}"));
            }
        }
    }
    within(Duration::from_secs(5), start)?;
    Ok(split.expr.to_string())
}

fn criterion_4() -> Outcome {
    let (p, a) = analysis(ADD, UNIFORM2);
    for n in 1..=10 {
        let ps = params(&[("n", n)]);
        let domain = int_range(&2.into(), &(2 * n).into());
        let e = expected_value(&a.closed, &a.simplified.expr, &ps, &domain).map_err(|e| e.to_string())?;
        let oracle = run_oracle(&p.program, &p.input, &ps, BUDGET).map_err(|e| e.to_string())?;
        let o = oracle.expected_value().ok_or("oracle saw nontermination")?;
        if e != ratio(n + 1, 1) || o != e {
            return Err(format!("n={n}: closed form {e}, oracle {o}, expected {}", n + 1));
        }
    }
    Ok("E_add = n+1 for n in 1..10".into())
}

fn criterion_5() -> Outcome {
    let ctx = Context::new()
        .with_rationals(["a"])
        .assume(parse_bool("0 < a").unwrap())
        .assume(parse_bool("a < 1").unwrap());
    let r6 = simplify(&parse_prob("sum_x C(x >= 0) * a^x").unwrap(), &ctx, BUDGET);
    let r7 = simplify(&parse_prob("sum_x C(x >= 0) * x * a^x").unwrap(), &ctx, BUDGET);
    if r6.status != Status::Closed || r7.status != Status::Closed {
        return Err(format!("not closed: {} / {}", r6.expr, r7.expr));
    }
    let n = 200usize;
    for a in [ratio(1, 2), ratio(1, 3), ratio(9, 10)] {
        let env: Bindings = [("a".to_string(), Datum::Num(a.clone()))].into_iter().collect();
        let one = BigRational::one();
        let geo_ref = &one / (&one - &a);
        let lin_ref = &one / ((&one - &a) * (&one - &a)) - &geo_ref;
        let geo = eval_prob(&r6.expr, &env, &Limits::default()).map_err(|e| e.to_string())?;
        let lin = eval_prob(&r7.expr, &env, &Limits::default()).map_err(|e| e.to_string())?;
        if geo != geo_ref || lin != lin_ref {
            return Err(format!("a={a}: engine {geo}, {lin}; formulas {geo_ref}, {lin_ref}"));
        }
        let mut power = one.clone();
        let (mut s0, mut s1) = (BigRational::zero(), BigRational::zero());
        for x in 0..=n {
            s0 += &power;
            s1 += BigRational::from_integer(x.into()) * &power;
            power *= &a;
        }
        // power = a^(N+1)
        let tail = &power * BigRational::from_integer((n + 2).into()) / ((&one - &a) * (&one - &a));
        let (d0, d1) = (&geo - &s0, &lin - &s1);
        if d0 < BigRational::zero() || d0 > tail || d1 < BigRational::zero() || d1 > tail {
            return Err(format!("a={a}: tails {d0}, {d1} exceed bound {tail}"));
        }
    }
    Ok(format!("{} and {}", r6.expr, r7.expr))
}

fn criterion_6() -> Outcome {
    let rules = catalogue();
    let mut trials = 0;
    for r in &rules {
        let report = check_rule(r, 1000).map_err(|e| e.to_string())?;
        if report.trials < 1000 {
            return Err(format!("{}: only {} trials", r.name, report.trials));
        }
        trials += report.trials;
    }
    Ok(format!("{} rules, {trials} trials", rules.len()))
}

/// Residual or approximated examples with their instantiations.
fn sandwich_corpus() -> Vec<(&'static str, &'static str, &'static str, Vec<Bindings>)> {
    let mut lists = Vec::new();
    for n in 1..=5 {
        for k in 1..=5 {
            lists.push(params(&[("n", n), ("k", k)]));
        }
    }
    vec![
        ("four-branch", FOUR_BRANCH, "px(x) = 1/4 * C(1 <= x <= 4)", vec![Bindings::new()]),
        ("four-branch on 1..n", FOUR_BRANCH, "px(x; n) = 1/n * C(1 <= x <= n)\nassume n >= 1", (1..=5).map(|n| params(&[("n", n)])).collect()),
        ("member", MEMBER, LISTS, lists),
        ("loop", "loop(x) = if (x=0) then 0 else loop(x)", "px(x) = C(x = 1)", vec![Bindings::new()]),
    ]
}

fn cumulative(oracle: &OracleDist, domain: &[Value], i: usize) -> BigRational {
    domain[..=i].iter().fold(BigRational::zero(), |acc, v| acc + oracle.prob(v))
}

fn criterion_7() -> Outcome {
    let mut points = 0;
    for (name, src, dist, insts) in sandwich_corpus() {
        let (p, a) = analysis(src, dist);
        for ps in insts {
            let oracle = run_oracle(&p.program, &p.input, &ps, BUDGET).map_err(|e| e.to_string())?;
            let boolean = oracle.mass.keys().any(|v| matches!(v, Value::Bool(_)));
            let domain: Vec<Value> = if boolean {
                vec![Value::Bool(false), Value::Bool(true)]
            } else {
                int_range(&(-3).into(), &8.into())
            };
            let table = a.pbox.tabulate(&a.closed, &ps, &domain);
            for (z, under, over) in &table.rows {
                let truth = oracle.prob(z);
                if !(under <= &truth && &truth <= over) {
                    return Err(format!("{name} {ps:?} z={z}: {under} <= {truth} <= {over} fails"));
                }
                points += 1;
            }
            let cum = cumulative_bounds(&table, Tail::Exclusive);
            let terminated = oracle.nonterm_mass.is_zero();
            if terminated {
                for i in 0..domain.len() {
                    let f = cumulative(&oracle, &domain, i);
                    if !(cum.f_down[i] <= f && f <= cum.f_up[i]) {
                        return Err(format!("{name} {ps:?} z={}: {} <= F {f} <= {} fails", domain[i], cum.f_down[i], cum.f_up[i]));
                    }
                }
            }
            if let (Some(e), Ok(iv)) = (oracle.expected_value(), expected_interval(&cum)) {
                if !iv.contains(&e) {
                    return Err(format!("{name} {ps:?}: E {e} outside {iv}"));
                }
            }
        }
    }
    Ok(format!("{points} sandwich points"))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let p = Problem::parse(MEMBER, LISTS, &[]).unwrap();
    for n in 1..=5i64 {
        for k in 1..=5u32 {
            let ps = params(&[("n", n), ("k", k as i64)]);
            let oracle = run_oracle(&p.program, &p.input, &ps, BUDGET).map_err(|e| e.to_string())?;
            let miss = BigRational::one() - ratio(1, n);
            let want = BigRational::one() - num_traits::pow(miss, k as usize);
            let got = oracle.prob(&Value::Bool(true));
            if got != want {
                return Err(format!("n={n} k={k}: oracle {got}, formula {want}"));
            }
        }
    }
    within(Duration::from_secs(30), start)?;
    Ok(format!("25 instantiations in {:?}", start.elapsed()))
}

fn criterion_9() -> Outcome {
    let uniform1 = "px(x; n) = 1/n * C(1 <= x <= n)\nassume n >= 1";
    let corpus: Vec<(&str, &str, Vec<Bindings>)> = vec![
        (ADD, UNIFORM2, (1..=5).map(|n| params(&[("n", n)])).collect()),
        (MAX, UNIFORM2, (1..=5).map(|n| params(&[("n", n)])).collect()),
        ("countdown(x) = if (x=0) then 0 else countdown(x-1)", uniform1, (1..=5).map(|n| params(&[("n", n)])).collect()),
        ("loop(x) = if (x=0) then 0 else loop(x)", "px(x) = C(x = 1)", vec![Bindings::new()]),
        ("spin(x) = if (x=0) then 0 else spin(x+1)", "px(x) = 1/3 * C(-1 <= x <= 1)", vec![Bindings::new()]),
        (FOUR_BRANCH, "px(x) = 1/4 * C(1 <= x <= 4)", vec![Bindings::new()]),
        (MEMBER, LISTS, (1..=3).flat_map(|n| (1..=3).map(move |k| params(&[("n", n), ("k", k)]))).collect()),
    ];
    let mut runs = 0;
    let mut terminating = 0;
    for (src, dist, insts) in corpus {
        let (p, a) = analysis(src, dist);
        let claim = check_termination_weight(&a.pbox.under, &output_var(&a.closed), &Context::for_program(&a.closed));
        if claim == Termination::Terminates {
            terminating += 1;
        }
        for ps in insts {
            let oracle = run_oracle(&p.program, &p.input, &ps, 1000).map_err(|e| e.to_string())?;
            if !oracle.weight().is_one() {
                return Err(format!("{src}: weight {}", oracle.weight()));
            }
            if claim == Termination::Terminates && !oracle.nonterm_mass.is_zero() {
                return Err(format!("{src}: claimed terminating, oracle nonterm {}", oracle.nonterm_mass));
            }
            runs += 1;
        }
    }
    let geometric = Problem::parse(
        "countdown(x) = if (x=0) then 0 else countdown(x-1)",
        "px(x; a) = (1-a) * a^x * C(x >= 0)\nrational a\nassume 0 < a\nassume a < 1",
        &[],
    )
    .unwrap();
    let ga = geometric.analyze(BUDGET);
    let claim = check_termination_weight(&ga.pbox.under, &output_var(&ga.closed), &Context::for_program(&ga.closed));
    let env: Bindings = [("a".to_string(), Datum::Num(ratio(1, 2)))].into_iter().collect();
    let oracle = run_oracle_truncated(&geometric.program, &geometric.input, &env, 1000, 40).map_err(|e| e.to_string())?;
    if !oracle.weight().is_one() || (claim == Termination::Terminates && !oracle.nonterm_mass.is_zero()) {
        return Err("geometric countdown".into());
    }
    Ok(format!("{} runs, {} programs proved terminating", runs + 1, terminating + (claim == Termination::Terminates) as usize))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 max closed form", criterion_1),
        ("2 add closed form", criterion_2),
        ("3 add two-case form", criterion_3),
        ("4 expected value of add", criterion_4),
        ("5 geometric rules", criterion_5),
        ("6 rule soundness", criterion_6),
        ("7 sandwich soundness", criterion_7),
        ("8 member oracle", criterion_8),
        ("9 weight and termination", criterion_9),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        match run() {
            Ok(detail) => println!("PASS {name} ({:.2?}): {detail}", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({:.2?}): {why}", start.elapsed());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
