//! Bregman divergences assembled literally from a rule's generator and
//! subgradient: `D_G(p || q) = G(p) - G(q) - <G'(q), p - q>`.
//!
//! This is a second code path next to [`ScoringRule::excess_risk`]; the two
//! are required to agree.

use crate::error::{Error, Result};
use crate::scoring::ScoringRule;
use crate::simplex::{check_same_len, ProbVector};

/// Which argument of the divergence holds the free point `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `E D_G(z || eta_m)`, minimised by the central prediction.
    Forward,
    /// `E D_G(eta_m || z)`, minimised by the central label.
    Reverse,
}

/// Generic Bregman divergence. `0 * inf` inside the inner product counts as
/// zero. When `G` itself is infinite (`NegLog` on the boundary) the result is
/// `+inf` unless `p == q`.
///
/// Panics if the class counts differ.
pub fn bregman_div(rule: ScoringRule, p: &ProbVector, q: &ProbVector) -> f64 {
    bregman_div_raw(rule, p.as_slice(), q.as_slice())
}

/// Slice form of [`bregman_div`] for points on the affine hull.
pub(crate) fn bregman_div_raw(rule: ScoringRule, p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "class counts differ");
    let gp = rule.generator_raw(p);
    let gq = rule.generator_raw(q);
    if gp.is_infinite() || gq.is_infinite() {
        return if p == q { 0.0 } else { f64::INFINITY };
    }
    let grad = rule.subgradient_raw(q);
    let mut inner = 0.0;
    for ((&g, &a), &b) in grad.iter().zip(p).zip(q) {
        let d = a - b;
        if d != 0.0 {
            inner += g * d;
        }
    }
    let d = gp - gq - inner;
    // A -inf inner product means +inf divergence. Tiny negative round-off is
    // clipped: D_G of a convex G is nonnegative.
    if d.is_nan() {
        f64::INFINITY
    } else {
        d.max(0.0)
    }
}

/// Uniformly weighted mean of `D_G` between `z` and each member.
///
/// `z` may be any point with `sum = 1`, so the spherical central prediction
/// can be evaluated even when it leaves the simplex.
pub fn expected_bregman_objective<Z: AsRef<[f64]> + ?Sized>(
    rule: ScoringRule,
    z: &Z,
    members: &[ProbVector],
    direction: Direction,
) -> Result<f64> {
    let z = z.as_ref();
    if members.is_empty() {
        return Err(Error::InvalidArgument("empty member list".into()));
    }
    check_same_len(members, z.len())?;
    let mut acc = 0.0;
    for m in members {
        acc += match direction {
            Direction::Forward => bregman_div_raw(rule, z, m.as_slice()),
            Direction::Reverse => bregman_div_raw(rule, m.as_slice(), z),
        };
    }
    Ok(acc / members.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn examples() {
        let p = pv(&[0.3, 0.7]);
        assert_eq!(bregman_div(ScoringRule::Log, &p, &p), 0.0);
        assert_abs_diff_eq!(
            bregman_div(ScoringRule::Brier, &pv(&[0.5, 0.5]), &pv(&[0.25, 0.75])),
            0.125,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            bregman_div(ScoringRule::Log, &pv(&[1.0, 0.0]), &pv(&[0.5, 0.5])),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        assert_eq!(
            bregman_div(ScoringRule::Log, &pv(&[0.5, 0.5]), &pv(&[1.0, 0.0])),
            f64::INFINITY
        );
    }

    #[test]
    fn objective_examples() {
        let m = pv(&[0.2, 0.8]);
        for rule in ScoringRule::ALL {
            for dir in [Direction::Forward, Direction::Reverse] {
                assert_eq!(
                    expected_bregman_objective(rule, &m, std::slice::from_ref(&m), dir).unwrap(),
                    0.0
                );
            }
        }
        let members = [pv(&[0.5, 0.5]), pv(&[0.9, 0.1])];
        let v = expected_bregman_objective(ScoringRule::Brier, &pv(&[0.7, 0.3]), &members, Direction::Forward).unwrap();
        assert_abs_diff_eq!(v, 0.08, epsilon = 1e-15);
        assert!(expected_bregman_objective(ScoringRule::Log, &m, &[], Direction::Forward).is_err());
    }

    fn simplex(k: usize) -> impl Strategy<Value = ProbVector> {
        prop::collection::vec(1e-3f64..1.0, k).prop_map(|v| {
            let s: f64 = v.iter().sum();
            ProbVector::new(v.into_iter().map(|x| x / s).collect()).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn matches_closed_form_excess(
            (p, q) in (2usize..8).prop_flat_map(|k| (simplex(k), simplex(k)))
        ) {
            for rule in ScoringRule::ALL {
                let a = bregman_div(rule, &p, &q);
                let b = rule.excess_risk(&p, &q);
                prop_assert!((a - b).abs() <= 1e-10 * 1f64.max(b.abs()), "{} {} {}", rule, a, b);
                prop_assert!(a >= 0.0);
                prop_assert_eq!(bregman_div(rule, &p, &p), 0.0);
            }
            let (ab, ba) = (bregman_div(ScoringRule::Brier, &p, &q), bregman_div(ScoringRule::Brier, &q, &p));
            prop_assert!((ab - ba).abs() <= 1e-12);
        }
    }
}
