//! Closed-form worst-case error rates for intermittent-communication methods,
//! with every universal constant set to one.
//!
//! Each rate is an expression tree of named terms joined by sums and
//! minima, so besides its value it can report which term dominates. All
//! inputs are `f64` so that limits such as `M = inf` can be evaluated.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateName {
    Minibatch,
    ThumbTwiddling,
    Stich2018,
    Stich2019,
    Khaled,
    LocalUpper,
    LocalLower,
    LocalQuadratic,
    LocalAcsaQuadratic,
    Serial,
}

impl RateName {
    pub const ALL: [RateName; 10] = [
        RateName::Minibatch,
        RateName::ThumbTwiddling,
        RateName::Stich2018,
        RateName::Stich2019,
        RateName::Khaled,
        RateName::LocalUpper,
        RateName::LocalLower,
        RateName::LocalQuadratic,
        RateName::LocalAcsaQuadratic,
        RateName::Serial,
    ];

    /// Rates that are guarantees rather than lower bounds.
    pub fn is_upper_bound(&self) -> bool {
        *self != RateName::LocalLower
    }

    /// Published analyses of local SGD predating the local upper bound.
    pub fn is_prior_work(&self) -> bool {
        matches!(self, RateName::Stich2018 | RateName::Stich2019 | RateName::Khaled)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            RateName::Minibatch => "minibatch",
            RateName::ThumbTwiddling => "thumb_twiddling",
            RateName::Stich2018 => "stich2018",
            RateName::Stich2019 => "stich2019",
            RateName::Khaled => "khaled",
            RateName::LocalUpper => "local_upper",
            RateName::LocalLower => "local_lower",
            RateName::LocalQuadratic => "local_quadratic",
            RateName::LocalAcsaQuadratic => "local_acsa_quadratic",
            RateName::Serial => "serial",
        }
    }
}

impl fmt::Display for RateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RateName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RateName::ALL
            .iter()
            .copied()
            .find(|n| n.as_str() == s)
            .or(match s {
                "thumb" | "thumb-twiddling" => Some(RateName::ThumbTwiddling),
                _ => None,
            })
            .ok_or_else(|| Error::UnknownName(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Convexity {
    #[default]
    General,
    StronglyConvex,
}

impl Convexity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Convexity::General => "general",
            Convexity::StronglyConvex => "strongly_convex",
        }
    }
}

impl fmt::Display for Convexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Convexity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" | "convex" => Ok(Convexity::General),
            "strongly_convex" | "sc" | "strongly-convex" => Ok(Convexity::StronglyConvex),
            other => Err(Error::UnknownName(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub h: f64,
    pub lambda: f64,
    pub b: f64,
    pub sigma: f64,
    pub m: f64,
    pub k: f64,
    pub r: f64,
}

impl RateParams {
    pub fn new(h: f64, lambda: f64, b: f64, sigma: f64, m: f64, k: f64, r: f64) -> Self {
        Self { h, lambda, b, sigma, m, k, r }
    }

    /// `H = B = sigma = 1`, `lambda = 0`.
    pub fn unit(m: f64, k: f64, r: f64) -> Self {
        Self::new(1.0, 0.0, 1.0, 1.0, m, k, r)
    }
}

/// Expression tree of a rate.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Term(&'static str, f64),
    Sum(Vec<Expr>),
    Min(Vec<Expr>),
}

impl Expr {
    pub fn value(&self) -> f64 {
        match self {
            Expr::Term(_, v) => *v,
            Expr::Sum(xs) => xs.iter().map(Expr::value).sum(),
            Expr::Min(xs) => xs.iter().map(Expr::value).fold(f64::INFINITY, f64::min),
        }
    }

    /// The term carrying the most weight: the largest summand, following the
    /// active (smallest) branch of each minimum.
    pub fn dominant_term(&self) -> &'static str {
        match self {
            Expr::Term(name, _) => name,
            Expr::Sum(xs) => pick(xs, |a, b| a > b).dominant_term(),
            Expr::Min(xs) => pick(xs, |a, b| a < b).dominant_term(),
        }
    }

    /// The first top-level summand.
    pub fn leading_term(&self) -> f64 {
        match self {
            Expr::Term(_, v) => *v,
            Expr::Sum(xs) | Expr::Min(xs) => xs[0].leading_term(),
        }
    }
}

fn pick(xs: &[Expr], better: impl Fn(f64, f64) -> bool) -> &Expr {
    let mut best = &xs[0];
    for x in &xs[1..] {
        if better(x.value(), best.value()) {
            best = x;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateEvaluation {
    pub name: RateName,
    pub convexity: Convexity,
    pub params: RateParams,
    pub expr: Expr,
    pub value: f64,
    pub dominant_term: &'static str,
}

fn range_err(name: RateName, reason: impl Into<String>) -> Error {
    Error::RateRange { name: name.to_string(), reason: reason.into() }
}

fn check(name: RateName, conv: Convexity, p: &RateParams) -> Result<()> {
    let positive = |v: f64| v > 0.0 && !v.is_nan();
    if !(positive(p.h) && p.h.is_finite() && positive(p.b) && p.b.is_finite()) {
        return Err(range_err(name, "H and B must be positive and finite"));
    }
    if !(p.sigma >= 0.0 && p.sigma.is_finite()) {
        return Err(range_err(name, "sigma must be finite and >= 0"));
    }
    if !(p.m >= 1.0 && p.k >= 1.0 && p.k.is_finite() && p.r >= 1.0 && p.r.is_finite()) {
        return Err(range_err(name, "need M >= 1 and finite K, R >= 1"));
    }
    if !(p.lambda >= 0.0 && p.lambda <= p.h) {
        return Err(range_err(name, "need 0 <= lambda <= H"));
    }
    if conv == Convexity::StronglyConvex && p.lambda <= 0.0 {
        return Err(range_err(name, "strongly convex rates need lambda > 0"));
    }
    if name == RateName::Khaled && p.m > p.k * p.r {
        return Err(range_err(name, "bound applies only when M <= K R"));
    }
    Ok(())
}

/// Builds the expression tree of `name` at `p`.
pub fn expression(name: RateName, conv: Convexity, p: &RateParams) -> Result<Expr> {
    use Expr::{Min, Sum, Term};
    check(name, conv, p)?;
    let RateParams { h, lambda, b, sigma, m, k, r } = *p;
    let s2 = sigma * sigma;
    let b2 = b * b;
    let kr = k * r;
    let n = m * kr;
    let stat = || Term("sigma B/sqrt(MKR)", sigma * b / n.sqrt());
    let sc_stat = || Term("sigma^2/(lambda MKR)", s2 / (lambda * n));
    let exp_kr = || Term("HB^2 exp(-lambda KR/(4H))", h * b2 * (-lambda * kr / (4.0 * h)).exp());

    let e = match (name, conv) {
        (RateName::Minibatch, Convexity::General) => Sum(vec![Term("HB^2/R", h * b2 / r), stat()]),
        (RateName::Minibatch, Convexity::StronglyConvex) => Sum(vec![
            Term("HB^2 exp(-lambda R/(4H))", h * b2 * (-lambda * r / (4.0 * h)).exp()),
            sc_stat(),
        ]),
        (RateName::ThumbTwiddling, Convexity::General) => {
            Sum(vec![Term("HB^2/R", h * b2 / r), Term("sigma B/sqrt(MR)", sigma * b / (m * r).sqrt())])
        }
        (RateName::ThumbTwiddling, Convexity::StronglyConvex) => Sum(vec![
            Term("HB^2 exp(-lambda R/(4H))", h * b2 * (-lambda * r / (4.0 * h)).exp()),
            Term("sigma^2/(lambda MR)", s2 / (lambda * m * r)),
        ]),
        (RateName::Stich2018, Convexity::General) => Sum(vec![
            Term("HB^2/R^(2/3)", h * b2 / r.powf(2.0 / 3.0)),
            Term("HB^2/(KR)^(3/5)", h * b2 / kr.powf(0.6)),
            stat(),
        ]),
        (RateName::Stich2018, Convexity::StronglyConvex) => {
            let g = h * h * b2 + s2;
            Sum(vec![
                sc_stat(),
                Term("H sigma^2/(lambda^2 M K^2 R^2)", h * s2 / (lambda * lambda * m * kr * kr)),
                Term("H(H^2B^2+sigma^2)/(lambda^2 R^2)", h * g / (lambda * lambda * r * r)),
                Term("H^3(H^2B^2+sigma^2)/(lambda^4 K^3 R^3)", h.powi(3) * g / (lambda.powi(4) * kr.powi(3))),
                Term("(H^2B^2+sigma^2)/(lambda R^3)", g / (lambda * r.powi(3))),
            ])
        }
        (RateName::Stich2019, Convexity::General) => Sum(vec![Term("HB^2 M/R", h * b2 * m / r), stat()]),
        (RateName::Stich2019, Convexity::StronglyConvex) => Sum(vec![
            Term("HKMB^2 exp(-lambda R/(10HM))", h * k * m * b2 * (-lambda * r / (10.0 * h * m)).exp()),
            sc_stat(),
        ]),
        (RateName::Khaled, Convexity::General) => Sum(vec![
            Term("sigma^2 M/(HR)", s2 * m / (h * r)),
            Term("(H^2B^2+sigma^2)/(H sqrt(MKR))", (h * h * b2 + s2) / (h * n.sqrt())),
        ]),
        (RateName::Khaled, Convexity::StronglyConvex) => Sum(vec![
            Term("HB^2/(K^2R^2)", h * b2 / (kr * kr)),
            Term("H sigma^2/(lambda^2 MKR)", h * s2 / (lambda * lambda * n)),
            Term("H^2 sigma^2/(lambda^3 K R^2)", h * h * s2 / (lambda.powi(3) * k * r * r)),
        ]),
        (RateName::LocalUpper, Convexity::General) => Min(vec![
            Sum(vec![
                Term("HB^2/(KR)", h * b2 / kr),
                stat(),
                Term("(H sigma^2 B^4)^(1/3)/(K^(1/3) R^(2/3))", (h * s2 * b2 * b2).cbrt() / (k.cbrt() * r.powf(2.0 / 3.0))),
            ]),
            Sum(vec![Term("HB^2/(KR)", h * b2 / kr), Term("sigma B/sqrt(KR)", sigma * b / kr.sqrt())]),
        ]),
        (RateName::LocalUpper, Convexity::StronglyConvex) => Min(vec![
            Sum(vec![
                exp_kr(),
                sc_stat(),
                Term(
                    "H sigma^2 log(9+lambda KR/H)/(lambda^2 K R^2)",
                    h * s2 * (9.0 + lambda * kr / h).ln() / (lambda * lambda * k * r * r),
                ),
            ]),
            Sum(vec![exp_kr(), Term("sigma^2/(lambda KR)", s2 / (lambda * kr))]),
        ]),
        (RateName::LocalLower, conv) => {
            let lam = if conv == Convexity::General { 0.0 } else { lambda };
            let or_inf = |v: f64| if lam == 0.0 { f64::INFINITY } else { v };
            Sum(vec![
                Min(vec![
                    Term("H^(1/3) sigma^(2/3) B^(4/3)/(KR)^(2/3)", h.cbrt() * s2.cbrt() * b2.powf(2.0 / 3.0) / kr.powf(2.0 / 3.0)),
                    Term("H sigma^2/(lambda^2 K^2 R^2)", or_inf(h * s2 / (lam * lam * kr * kr))),
                    Term("HB^2", h * b2),
                ]),
                Min(vec![stat(), Term("sigma^2/(lambda MKR)", or_inf(s2 / (lam * n)))]),
            ])
        }
        (RateName::LocalQuadratic, Convexity::General) => Sum(vec![Term("HB^2/(KR)", h * b2 / kr), stat()]),
        (RateName::LocalQuadratic, Convexity::StronglyConvex) => Sum(vec![exp_kr(), sc_stat()]),
        (RateName::LocalAcsaQuadratic, _) => Sum(vec![Term("HB^2/(K^2R^2)", h * b2 / (kr * kr)), match conv {
            Convexity::General => stat(),
            Convexity::StronglyConvex => sc_stat(),
        }]),
        (RateName::Serial, Convexity::General) => {
            Sum(vec![Term("HB^2/(KR)", h * b2 / kr), Term("sigma B/sqrt(KR)", sigma * b / kr.sqrt())])
        }
        (RateName::Serial, Convexity::StronglyConvex) => {
            Sum(vec![exp_kr(), Term("sigma^2/(lambda KR)", s2 / (lambda * kr))])
        }
    };
    Ok(e)
}

pub fn evaluate(name: RateName, conv: Convexity, p: &RateParams) -> Result<RateEvaluation> {
    let expr = expression(name, conv, p)?;
    let value = expr.value();
    let dominant_term = expr.dominant_term();
    Ok(RateEvaluation { name, convexity: conv, params: *p, expr, value, dominant_term })
}

/// Value of rate `name` with unit constants.
pub fn rate(name: RateName, conv: Convexity, p: &RateParams) -> Result<f64> {
    Ok(expression(name, conv, p)?.value())
}

/// The argmax term at `p`.
pub fn dominant_term(name: RateName, conv: Convexity, p: &RateParams) -> Result<&'static str> {
    Ok(expression(name, conv, p)?.dominant_term())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smaller {
    First,
    Second,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub first: f64,
    pub second: f64,
    /// `first / second`.
    pub ratio: f64,
    pub smaller: Smaller,
}

pub fn regime_compare(a: RateName, b: RateName, conv: Convexity, p: &RateParams) -> Result<Comparison> {
    let first = rate(a, conv, p)?;
    let second = rate(b, conv, p)?;
    let smaller = if first < second {
        Smaller::First
    } else if second < first {
        Smaller::Second
    } else {
        Smaller::Tie
    };
    let ratio = if first == second { 1.0 } else { first / second };
    Ok(Comparison { first, second, ratio, smaller })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minibatch_examples() {
        assert_eq!(rate(RateName::Minibatch, Convexity::General, &RateParams::unit(1.0, 1.0, 1.0)).unwrap(), 2.0);
        assert_eq!(rate(RateName::Minibatch, Convexity::General, &RateParams::unit(4.0, 4.0, 4.0)).unwrap(), 0.375);
    }

    #[test]
    fn infinite_machines_drop_the_statistical_term() {
        let p = RateParams::unit(f64::INFINITY, 10.0, 10.0);
        assert_eq!(rate(RateName::Minibatch, Convexity::General, &p).unwrap(), 0.1);
        assert!(rate(RateName::Khaled, Convexity::General, &p).is_err());
    }

    #[test]
    fn range_violations_are_errors() {
        let p = RateParams::unit(1.0, 1.0, 1.0);
        assert!(rate(RateName::Serial, Convexity::StronglyConvex, &p).is_err());
        assert!(rate(RateName::Khaled, Convexity::General, &RateParams::unit(8.0, 2.0, 2.0)).is_err());
        assert!(rate(RateName::Minibatch, Convexity::General, &RateParams::unit(0.5, 1.0, 1.0)).is_err());
        assert!("nope".parse::<RateName>().is_err());
    }

    #[test]
    fn self_comparison_is_a_tie() {
        let p = RateParams::unit(3.0, 5.0, 7.0);
        for n in RateName::ALL {
            let c = regime_compare(n, n, Convexity::General, &p).unwrap();
            assert_eq!(c.ratio, 1.0);
            assert_eq!(c.smaller, Smaller::Tie);
        }
    }

    #[test]
    fn dominant_term_follows_the_active_branch() {
        // tiny noise: the serial branch of the local upper bound is active
        let p = RateParams::new(1.0, 0.0, 1.0, 1e-6, 100.0, 10.0, 10.0);
        let e = evaluate(RateName::LocalUpper, Convexity::General, &p).unwrap();
        assert_eq!(e.dominant_term, "HB^2/(KR)");
        let stich = evaluate(RateName::Stich2018, Convexity::General, &RateParams::unit(100.0, 10.0, 10.0)).unwrap();
        assert_eq!(stich.dominant_term, "HB^2/R^(2/3)");
    }
}
