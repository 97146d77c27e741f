mod common;

use common::rates::{dominance_violations, worst_rate_error, RATE_CASES, RATE_TOL};
use localsgd::rates::{evaluate, expression, rate, regime_compare, Convexity, Expr, RateName, RateParams, Smaller};
use proptest::prelude::*;

#[test]
fn frozen_values_match() {
    for (name, conv, [h, lambda, b, sigma, m, k, r], want) in RATE_CASES {
        let p = RateParams::new(h, lambda, b, sigma, m, k, r);
        let got = rate(name.parse().unwrap(), conv.parse().unwrap(), &p).unwrap();
        assert!(((got - want) / want).abs() <= RATE_TOL, "{name} {conv}: {got} vs {want}");
    }
    assert!(worst_rate_error().0 <= RATE_TOL);
}

#[test]
fn prior_work_is_dominated_on_the_probe_grid() {
    let (checked, bad) = dominance_violations();
    assert!(checked > 5000);
    assert!(bad.is_empty(), "{bad:?}");
}

fn term(e: &Expr, name: &str) -> Option<f64> {
    match e {
        Expr::Term(n, v) => (*n == name).then_some(*v),
        Expr::Sum(xs) | Expr::Min(xs) => xs.iter().find_map(|x| term(x, name)),
    }
}

fn params() -> impl Strategy<Value = RateParams> {
    (0.1f64..10.0, 0.1f64..10.0, 0.0f64..10.0, 1u32..1000, 1u32..1000, 1u32..1000)
        .prop_map(|(h, b, s, m, k, r)| RateParams::new(h, 0.0, b, s, m as f64, k as f64, r as f64))
}

proptest! {
    #[test]
    fn rates_are_finite_and_nonnegative(p in params()) {
        for name in RateName::ALL {
            if let Ok(e) = evaluate(name, Convexity::General, &p) {
                prop_assert!(e.value >= 0.0 && e.value.is_finite());
                prop_assert!(!e.dominant_term.is_empty());
            }
        }
    }

    #[test]
    fn minibatch_never_loses_to_thumb_twiddling(p in params()) {
        let mb = rate(RateName::Minibatch, Convexity::General, &p).unwrap();
        let tt = rate(RateName::ThumbTwiddling, Convexity::General, &p).unwrap();
        prop_assert!(mb <= tt);
    }

    #[test]
    fn more_rounds_never_hurt(p in params()) {
        for name in RateName::ALL.into_iter().filter(|n| *n != RateName::Khaled) {
            let a = rate(name, Convexity::General, &p).unwrap();
            let b = rate(name, Convexity::General, &RateParams { r: p.r * 2.0, ..p }).unwrap();
            prop_assert!(b <= a * (1.0 + 1e-12), "{name}");
        }
    }

    #[test]
    fn local_upper_is_at_most_serial(p in params()) {
        let up = rate(RateName::LocalUpper, Convexity::General, &p).unwrap();
        prop_assert!(up <= rate(RateName::Serial, Convexity::General, &p).unwrap());
    }

    #[test]
    fn statistical_term_is_shared(p in params()) {
        let name = "sigma B/sqrt(MKR)";
        let want = p.sigma * p.b / (p.m * p.k * p.r).sqrt();
        for n in [RateName::Minibatch, RateName::LocalUpper, RateName::LocalLower] {
            let e = expression(n, Convexity::General, &p).unwrap();
            prop_assert_eq!(term(&e, name).map(f64::to_bits), Some(want.to_bits()), "{}", n);
        }
    }

    #[test]
    fn local_upper_overtakes_minibatch_as_k_passes_r(r in 4u32..2000) {
        let r = r as f64;
        let at = |k: f64| regime_compare(RateName::LocalUpper, RateName::Minibatch, Convexity::General, &RateParams::unit(1e12, k, r)).unwrap();
        prop_assert_eq!(at((r / 4.0).max(1.0)).smaller, Smaller::Second);
        prop_assert_eq!(at(4.0 * r).smaller, Smaller::First);
    }
}
