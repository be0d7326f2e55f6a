//! Strictly proper scoring rules and their pointwise risks.
//!
//! Each rule is generated by a convex function `G` on the simplex. The loss
//! is `<G'(p), p> - G'_y(p) - G(p)`, the Bayes risk is `-G(eta)`, the total
//! risk of predicting `eta_hat` when the truth is `eta` is
//! `<G'(eta_hat), eta_hat> - G(eta_hat) - <G'(eta_hat), eta>`, and the excess
//! risk is the Bregman divergence `D_G(eta || eta_hat)`.
//!
//! The per-rule closed forms below are the ones used everywhere else; the
//! literal generator route lives in [`crate::bregman`] and is kept as an
//! independent cross-check.
//!
//! Functions taking two vectors panic if their class counts differ.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::simplex::{argmax, dot, dot_zero_inf, l2_norm, ProbVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoringRule {
    /// Cross-entropy; `G(p) = sum p ln p`.
    Log,
    /// Quadratic score; `G(p) = -sum p (1 - p)`.
    Brier,
    /// `G(p) = max p - 1`. Convex but not strictly convex.
    ZeroOne,
    /// `G(p) = |p|_2 - 1`.
    Spherical,
    /// `G(p) = -sum ln p`, defined on the open simplex; excess risk is the
    /// Itakura-Saito divergence.
    NegLog,
}

impl ScoringRule {
    pub const ALL: [ScoringRule; 5] = [
        ScoringRule::Log,
        ScoringRule::Brier,
        ScoringRule::ZeroOne,
        ScoringRule::Spherical,
        ScoringRule::NegLog,
    ];

    /// Rules offered by default; `NegLog` is opt-in.
    pub const DEFAULT: [ScoringRule; 4] = [
        ScoringRule::Log,
        ScoringRule::Brier,
        ScoringRule::ZeroOne,
        ScoringRule::Spherical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoringRule::Log => "log",
            ScoringRule::Brier => "brier",
            ScoringRule::ZeroOne => "zero-one",
            ScoringRule::Spherical => "spherical",
            ScoringRule::NegLog => "neg-log",
        }
    }

    pub fn is_strictly_convex(self) -> bool {
        !matches!(self, ScoringRule::ZeroOne)
    }

    /// Whether a closed-form central prediction exists for this rule.
    pub fn has_central_prediction(self) -> bool {
        matches!(self, ScoringRule::Log | ScoringRule::Brier | ScoringRule::Spherical)
    }

    /// Additive constant removed from [`ScoringRule::loss`] relative to the
    /// generator representation, for `k` classes.
    pub fn loss_constant(self, k: usize) -> f64 {
        match self {
            ScoringRule::Brier => 1.0,
            ScoringRule::NegLog => -(k as f64),
            _ => 0.0,
        }
    }

    /// `G(p)`. `NegLog` returns `+inf` on the simplex boundary.
    pub fn generator(self, p: &ProbVector) -> f64 {
        self.generator_raw(p.as_slice())
    }

    /// Elementwise (sub)gradient `G'(p)`. Zero-one picks the lowest-index
    /// argmax; `Log` and `NegLog` give `-inf` at zero entries.
    pub fn subgradient(self, p: &ProbVector) -> Vec<f64> {
        self.subgradient_raw(p.as_slice())
    }

    /// Loss of forecast `p` when class `y` materialises, in the simplified
    /// per-rule form (see [`ScoringRule::loss_constant`] for what is dropped).
    ///
    /// Panics if `y` is out of range.
    pub fn loss(self, p: &ProbVector, y: usize) -> f64 {
        assert!(y < p.len(), "class {y} out of range for K = {}", p.len());
        let s = p.as_slice();
        match self {
            ScoringRule::Log => {
                if s[y] == 0.0 {
                    f64::INFINITY
                } else {
                    -s[y].ln()
                }
            }
            ScoringRule::Brier => dot(s, s) - 2.0 * s[y],
            ScoringRule::ZeroOne => {
                if y == argmax(s) {
                    0.0
                } else {
                    1.0
                }
            }
            ScoringRule::Spherical => 1.0 - s[y] / p.norm2(),
            ScoringRule::NegLog => {
                if s[y] == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / s[y] + s.iter().map(|&x| clamp_ln(x)).sum::<f64>()
                }
            }
        }
    }

    /// Loss straight from the generator representation.
    pub fn loss_from_generator(self, p: &ProbVector, y: usize) -> f64 {
        let g = self.subgradient(p);
        dot_zero_inf(&g, p.as_slice()) - g[y] - self.generator(p)
    }

    /// Bayes (aleatoric) risk `-G(eta)`.
    pub fn bayes_risk(self, eta: &ProbVector) -> f64 {
        self.bayes_risk_raw(eta.as_slice())
    }

    /// Total risk of predicting `eta_hat` under truth `eta`.
    pub fn total_risk(self, eta: &ProbVector, eta_hat: &ProbVector) -> f64 {
        self.total_risk_raw(eta.as_slice(), eta_hat.as_slice())
    }

    /// Excess (epistemic) risk `D_G(eta || eta_hat)`.
    pub fn excess_risk(self, eta: &ProbVector, eta_hat: &ProbVector) -> f64 {
        self.excess_risk_raw(eta.as_slice(), eta_hat.as_slice())
    }

    // The `_raw` forms accept points of the affine hull `sum = 1` that may
    // leave the simplex (the spherical central prediction can).

    pub(crate) fn generator_raw(self, p: &[f64]) -> f64 {
        match self {
            ScoringRule::Log => p.iter().map(|&x| xlnx(x)).sum(),
            ScoringRule::Brier => -p.iter().map(|&x| x * (1.0 - x)).sum::<f64>(),
            ScoringRule::ZeroOne => p[argmax(p)] - 1.0,
            ScoringRule::Spherical => l2_norm(p) - 1.0,
            ScoringRule::NegLog => {
                if p.contains(&0.0) {
                    f64::INFINITY
                } else {
                    -p.iter().map(|x| x.ln()).sum::<f64>()
                }
            }
        }
    }

    pub(crate) fn subgradient_raw(self, s: &[f64]) -> Vec<f64> {
        match self {
            ScoringRule::Log => s
                .iter()
                .map(|&x| if x == 0.0 { f64::NEG_INFINITY } else { 1.0 + x.ln() })
                .collect(),
            ScoringRule::Brier => s.iter().map(|&x| 2.0 * x - 1.0).collect(),
            ScoringRule::ZeroOne => {
                let a = argmax(s);
                (0..s.len()).map(|k| if k == a { 1.0 } else { 0.0 }).collect()
            }
            ScoringRule::Spherical => {
                let n = l2_norm(s);
                s.iter().map(|&x| x / n).collect()
            }
            ScoringRule::NegLog => s
                .iter()
                .map(|&x| if x == 0.0 { f64::NEG_INFINITY } else { -1.0 / x })
                .collect(),
        }
    }

    pub(crate) fn bayes_risk_raw(self, s: &[f64]) -> f64 {
        match self {
            ScoringRule::Log => -s.iter().map(|&x| xlnx(x)).sum::<f64>(),
            ScoringRule::Brier => 1.0 - dot(s, s),
            ScoringRule::ZeroOne => 1.0 - s[argmax(s)],
            ScoringRule::Spherical => 1.0 - l2_norm(s),
            ScoringRule::NegLog => s.iter().map(|&x| clamp_ln(x)).sum(),
        }
    }

    pub(crate) fn total_risk_raw(self, e: &[f64], h: &[f64]) -> f64 {
        assert_eq!(e.len(), h.len(), "class counts differ");
        match self {
            // cross-entropy
            ScoringRule::Log => e
                .iter()
                .zip(h)
                .map(|(&a, &b)| {
                    if a == 0.0 {
                        0.0
                    } else if b == 0.0 {
                        f64::INFINITY
                    } else {
                        -a * b.ln()
                    }
                })
                .sum(),
            ScoringRule::Brier => sq_dist(e, h) - dot(e, e) + 1.0,
            ScoringRule::ZeroOne => 1.0 - e[argmax(h)],
            ScoringRule::Spherical => 1.0 - dot(e, h) / l2_norm(h),
            ScoringRule::NegLog => {
                if h.contains(&0.0) {
                    return f64::INFINITY;
                }
                e.iter().zip(h).map(|(&a, &b)| a / b + b.ln() - 1.0).sum()
            }
        }
    }

    pub(crate) fn excess_risk_raw(self, e: &[f64], h: &[f64]) -> f64 {
        assert_eq!(e.len(), h.len(), "class counts differ");
        match self {
            ScoringRule::Log => kl(e, h),
            ScoringRule::Brier => sq_dist(e, h),
            // max_k eta_k rather than eta at its own argmax; same value, but
            // this form can never go negative.
            ScoringRule::ZeroOne => e[argmax(e)] - e[argmax(h)],
            ScoringRule::Spherical => {
                let (ne, nh) = (l2_norm(e), l2_norm(h));
                let cos = (dot(e, h) / (ne * nh)).clamp(-1.0, 1.0);
                ne * (1.0 - cos)
            }
            ScoringRule::NegLog => itakura_saito(e, h),
        }
    }
}

impl fmt::Display for ScoringRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoringRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "log" => Ok(ScoringRule::Log),
            "brier" => Ok(ScoringRule::Brier),
            "zero-one" | "zeroone" | "zero_one" => Ok(ScoringRule::ZeroOne),
            "spherical" => Ok(ScoringRule::Spherical),
            "neg-log" | "neglog" | "neg_log" => Ok(ScoringRule::NegLog),
            other => Err(Error::InvalidArgument(format!("unknown scoring rule '{other}'"))),
        }
    }
}

fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn clamp_ln(x: f64) -> f64 {
    if x == 0.0 {
        f64::NEG_INFINITY
    } else {
        x.ln()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            if a == 0.0 {
                0.0
            } else if b == 0.0 {
                f64::INFINITY
            } else {
                a * (a.ln() - b.ln())
            }
        })
        .sum()
}

/// Infinite whenever either argument touches the boundary, unless `p == q`.
fn itakura_saito(p: &[f64], q: &[f64]) -> f64 {
    if p == q {
        return 0.0;
    }
    if p.iter().chain(q).any(|&x| x == 0.0) {
        return f64::INFINITY;
    }
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            let r = a / b;
            r - r.ln() - 1.0
        })
        .sum()
}
