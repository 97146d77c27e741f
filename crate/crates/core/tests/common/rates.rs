//! Frozen output of scripts/rates_oracle.py (50-digit re-derivation).

/// `(name, convexity, [H, lambda, B, sigma, M, K, R], value)`
pub const RATE_CASES: [(&str, &str, [f64; 7], f64); 20] = [
    ("minibatch", "general", [1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0], 2.0),
    ("minibatch", "general", [2.0, 0.0, 3.0, 0.5, 16.0, 4.0, 10.0], 1.8592927061281571125),
    ("thumb_twiddling", "general", [1.0, 0.0, 1.0, 1.0, 8.0, 2.0, 5.0], 0.3581138830084189666),
    ("stich2018", "general", [1.0, 0.0, 1.0, 1.0, 100.0, 10.0, 10.0], 0.28853920345120769712),
    ("stich2019", "general", [1.5, 0.0, 2.0, 1.0, 7.0, 3.0, 11.0], 3.9497721571737719795),
    ("khaled", "general", [1.0, 0.0, 1.0, 1.0, 4.0, 5.0, 6.0], 0.84924085250172203782),
    ("local_upper", "general", [1.0, 0.0, 1.0, 1.0, 256.0, 2.0, 64.0], 0.06294305460202613612),
    ("local_upper", "general", [1.0, 0.0, 1.0, 0.001, 100.0, 10.0, 10.0], 0.010100000000000000002),
    ("local_lower", "general", [1.0, 0.0, 1.0, 1.0, 256.0, 512.0, 4.0], 0.0075818532912557548318),
    ("local_quadratic", "general", [3.0, 0.0, 0.5, 2.0, 10.0, 20.0, 30.0], 0.014159944487358056284),
    ("local_acsa_quadratic", "general", [1.0, 0.0, 1.0, 1.0, 10.0, 200.0, 100.0], 0.0022360704774997896964),
    ("serial", "general", [1.0, 0.0, 1.0, 1.0, 1.0, 6.0, 7.0], 0.17811287377161571978),
    ("minibatch", "strongly_convex", [1.0, 0.1, 1.0, 1.0, 10.0, 5.0, 40.0], 0.3728794411714423009),
    ("thumb_twiddling", "strongly_convex", [2.0, 0.5, 1.0, 1.0, 3.0, 3.0, 3.0], 1.8802804585830229083),
    ("stich2018", "strongly_convex", [1.0, 0.05, 1.0, 1.0, 10.0, 10.0, 10.0], 8.383999999999999037),
    ("stich2019", "strongly_convex", [1.0, 0.2, 1.0, 1.0, 4.0, 8.0, 100.0], 19.410543610804269017),
    ("khaled", "strongly_convex", [1.0, 0.25, 2.0, 1.0, 2.0, 4.0, 8.0], 0.50390625),
    ("local_upper", "strongly_convex", [1.0, 0.01, 1.0, 1.0, 50.0, 20.0, 5.0], 1.7788007830714048434),
    ("local_lower", "strongly_convex", [1.0, 0.0625, 1.0, 1.0, 16.0, 2.0, 64.0], 0.0234375),
    ("serial", "strongly_convex", [4.0, 1.0, 1.0, 2.0, 1.0, 3.0, 9.0], 0.88807374777736529852),
];

pub const RATE_TOL: f64 = 1e-12;

use localsgd::rates::{expression, rate, Convexity, RateName, RateParams};

/// The probe grid for the dominance checks: `M, K, R` over powers of two up
/// to `2^12`, `H = B = sigma = 1`.
pub fn probe_grid() -> Vec<RateParams> {
    let pows: Vec<f64> = (0..=12).map(|e| 2f64.powi(e)).collect();
    let mut out = Vec::new();
    for &m in &pows {
        for &k in &pows {
            for &r in &pows {
                out.push(RateParams::unit(m, k, r));
            }
        }
    }
    out
}

/// `(points checked, violations)` of: each prior-work bound's leading term is
/// at least `1/R`, and the bound is no better than minibatch SGD.
pub fn dominance_violations() -> (usize, Vec<String>) {
    let mut checked = 0;
    let mut bad = Vec::new();
    for p in probe_grid() {
        let mb = rate(RateName::Minibatch, Convexity::General, &p).unwrap();
        for name in RateName::ALL.into_iter().filter(RateName::is_prior_work) {
            let Ok(e) = expression(name, Convexity::General, &p) else {
                continue;
            };
            checked += 1;
            if e.leading_term() < 1.0 / p.r {
                bad.push(format!("{name} leading term below 1/R at {p:?}"));
            }
            if e.value() < mb {
                bad.push(format!("{name} beats minibatch at {p:?}"));
            }
        }
    }
    (checked, bad)
}

/// Largest relative error of the library against the frozen values.
pub fn worst_rate_error() -> (f64, &'static str) {
    let mut worst = (0.0, "");
    for (name, conv, [h, lambda, b, sigma, m, k, r], want) in RATE_CASES {
        let p = RateParams::new(h, lambda, b, sigma, m, k, r);
        let got = rate(name.parse().unwrap(), conv.parse().unwrap(), &p).unwrap();
        let err = ((got - want) / want).abs();
        if err > worst.0 || err.is_nan() {
            worst = (err, name);
        }
    }
    worst
}
