use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use poa_core::approximator::{cumulative_bounds, expected_interval, Table, Tail};
use poa_core::lang::Value;
use poa_core::oracle::{enumerate_support, run_oracle};
use poa_core::pipeline::Problem;
use poa_core::probexpr::{ratio, Bindings, Datum};

/// A random distribution over `lo..lo+len` and an over approximation of it.
fn dist_and_over() -> impl Strategy<Value = (i64, Vec<BigRational>, Vec<BigRational>)> {
    (-5i64..5, prop::collection::vec((1u32..20, 0u32..10), 1..8)).prop_map(|(lo, cells)| {
        let total: u32 = cells.iter().map(|c| c.0).sum();
        let p: Vec<BigRational> = cells.iter().map(|c| ratio(c.0 as i64, total as i64)).collect();
        let over = p
            .iter()
            .zip(&cells)
            .map(|(q, c)| (q + ratio(c.1 as i64, 10)).min(BigRational::one()))
            .collect();
        (lo, p, over)
    })
}

fn table(lo: i64, under: &[BigRational], over: &[BigRational]) -> Table {
    Table {
        rows: (0..over.len())
            .map(|i| (Value::int(lo + i as i64), under[i].clone(), over[i].clone()))
            .collect(),
    }
}

proptest! {
    #[test]
    fn cumulative_bounds_enclose_the_distribution((lo, p, over) in dist_and_over()) {
        let zeros = vec![BigRational::zero(); p.len()];
        let cum = cumulative_bounds(&table(lo, &zeros, &over), Tail::Exclusive);
        let mut f = BigRational::zero();
        for i in 0..p.len() {
            f += &p[i];
            prop_assert!(cum.f_down[i] <= f && f <= cum.f_up[i]);
            prop_assert!(cum.f_down[i] <= cum.f_up[i]);
            prop_assert!(cum.f_up[i] <= BigRational::one() && cum.f_down[i] >= BigRational::zero());
            if i > 0 {
                prop_assert!(cum.f_up[i - 1] <= cum.f_up[i]);
                prop_assert!(cum.f_down[i - 1] <= cum.f_down[i]);
            }
        }
        let inclusive = cumulative_bounds(&table(lo, &zeros, &over), Tail::Inclusive);
        for i in 0..p.len() {
            prop_assert!(inclusive.f_down[i] <= cum.f_down[i]);
        }
    }

    #[test]
    fn expected_interval_contains_the_mean((lo, p, over) in dist_and_over()) {
        let mean = p.iter().enumerate().fold(BigRational::zero(), |acc, (i, q)| acc + BigRational::from_integer((lo + i as i64).into()) * q);
        let zeros = vec![BigRational::zero(); p.len()];
        let iv = expected_interval(&cumulative_bounds(&table(lo, &zeros, &over), Tail::Exclusive)).unwrap();
        prop_assert!(iv.low <= iv.high);
        prop_assert!(iv.contains(&mean));
    }

    #[test]
    fn exact_bounds_collapse((lo, p, _) in dist_and_over()) {
        let mean = p.iter().enumerate().fold(BigRational::zero(), |acc, (i, q)| acc + BigRational::from_integer((lo + i as i64).into()) * q);
        let cum = cumulative_bounds(&table(lo, &p, &p), Tail::Exclusive);
        prop_assert_eq!(&cum.f_up, &cum.f_down);
        let iv = expected_interval(&cum).unwrap();
        prop_assert_eq!(&iv.low, &mean);
        prop_assert_eq!(&iv.high, &mean);
    }

    #[test]
    fn oracle_weight_is_one(a in 1i64..6, b in 1i64..6, n in 1i64..5) {
        let dist = format!("px(x) = 1/{a} * C(0 <= x < {a})\npy(y; n) = 1/n * C(1 <= y <= n)");
        let p = Problem::parse("add(x,y) = if (x=0) then y else add(x-1,y+1)", &dist, &[]).unwrap();
        let ps: Bindings = [("n".to_string(), Datum::int(n))].into_iter().collect();
        let tuples = enumerate_support(&p.input, &ps).unwrap();
        prop_assert_eq!(tuples.len() as i64, a * n);
        let budget = b as u64;
        let d = run_oracle(&p.program, &p.input, &ps, budget).unwrap();
        prop_assert!(d.weight().is_one());
        let more = run_oracle(&p.program, &p.input, &ps, budget * 2).unwrap();
        prop_assert!(more.nonterm_mass <= d.nonterm_mass);
    }

    #[test]
    fn closed_forms_match_the_oracle(lo in -2i64..3, width in 1i64..5) {
        let hi = lo + width - 1;
        let dist = format!("px(x) = 1/{width} * C({lo} <= x <= {hi})\npy(y) = 1/{width} * C({lo} <= y <= {hi})");
        for src in ["max(x,y) = if (x>y) then x else y", "min(x,y) = if (x<y) then x else y", "diff(x,y) = x - y"] {
            let p = Problem::parse(src, &dist, &[]).unwrap();
            let a = p.analyze(10_000);
            prop_assert!(a.is_closed(), "{}: {}", src, a.simplified.expr);
            let oracle = run_oracle(&p.program, &p.input, &Bindings::new(), 1000).unwrap();
            for z in 2 * lo - 4..=2 * hi + 4 {
                let z = Value::int(z);
                let got = poa_core::oracle::eval_at(&a.closed, &a.simplified.expr, &Bindings::new(), &z).unwrap();
                prop_assert_eq!(got, oracle.prob(&z), "{} at {}", src, z);
            }
        }
    }
}
