//! Central label and central prediction of an ensemble.
//!
//! The central label is the arithmetic mean of the members and minimises
//! `E D_G(eta_m || z)` for every rule. The central prediction minimises
//! `E D_G(z || eta_m)` and depends on the rule:
//!
//! * log: normalised geometric mean, `exp(E ln eta) / sum`,
//! * Brier: the arithmetic mean,
//! * spherical: `|x0| (n + m / sqrt(1 - |m|^2))` with `x0` the uniform vector,
//!   `n = x0 / |x0|`, `eta_E = E[eta / |eta|]` and `m` the part of `eta_E`
//!   orthogonal to `x0`,
//! * zero-one and neg-log: no closed form, reported as undefined.

use crate::error::{Error, Result};
use crate::scoring::ScoringRule;
use crate::simplex::{check_same_len, l2_norm, mean_of, ProbVector};

#[derive(Debug, Clone, PartialEq)]
pub struct CentralPrediction {
    rule: ScoringRule,
    value: Option<Vec<f64>>,
}

impl CentralPrediction {
    pub fn rule(&self) -> ScoringRule {
        self.rule
    }

    pub fn is_defined(&self) -> bool {
        self.value.is_some()
    }

    /// Coordinates of the central prediction. They sum to one; for the
    /// spherical rule they are not guaranteed to be nonnegative.
    pub fn value(&self) -> Option<&[f64]> {
        self.value.as_deref()
    }

    /// True when a defined value has a negative coordinate.
    pub fn leaves_simplex(&self) -> bool {
        self.value.as_ref().is_some_and(|v| v.iter().any(|&x| x < 0.0))
    }

    /// The value as a probability vector, if defined and on the simplex.
    pub fn to_prob_vector(&self) -> Option<ProbVector> {
        if self.leaves_simplex() {
            return None;
        }
        self.value.as_ref().map(|v| ProbVector::from_normalized(v.clone()))
    }
}

/// Posterior predictive mean of the members.
pub fn central_label(members: &[ProbVector]) -> Result<ProbVector> {
    mean_of(members)
}

/// Closed-form central prediction. Zero-one and neg-log come back undefined
/// rather than as an error.
pub fn central_prediction(rule: ScoringRule, members: &[ProbVector]) -> Result<CentralPrediction> {
    let value = match rule {
        ScoringRule::ZeroOne | ScoringRule::NegLog => None,
        _ => Some(central_point(rule, members)?),
    };
    Ok(CentralPrediction { rule, value })
}

/// Central prediction coordinates, or [`Error::Undefined`] for rules without
/// a closed form.
pub(crate) fn central_point(rule: ScoringRule, members: &[ProbVector]) -> Result<Vec<f64>> {
    let first = members
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty member list".into()))?;
    check_same_len(members, first.len())?;
    if !rule.has_central_prediction() {
        return Err(Error::Undefined(format!(
            "central prediction for the {rule} score is Not defined"
        )));
    }
    if members.iter().all(|m| m == first) {
        return Ok(first.as_slice().to_vec());
    }
    match rule {
        ScoringRule::Brier => Ok(mean_of(members)?.into_vec()),
        ScoringRule::Log => log_central(members),
        ScoringRule::Spherical => spherical_central(members),
        ScoringRule::ZeroOne | ScoringRule::NegLog => unreachable!(),
    }
}

fn log_central(members: &[ProbVector]) -> Result<Vec<f64>> {
    let k = members[0].len();
    let mut mean_log = vec![0.0; k];
    for (i, m) in members.iter().enumerate() {
        let w = 1.0 / (i + 1) as f64;
        for (acc, &p) in mean_log.iter_mut().zip(m.as_slice()) {
            if p == 0.0 {
                *acc = f64::NEG_INFINITY;
            } else if acc.is_finite() {
                *acc += (p.ln() - *acc) * w;
            }
        }
    }
    let max = mean_log.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::LogCentralUndefined);
    }
    let unnorm: Vec<f64> = mean_log.iter().map(|&a| (a - max).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    Ok(unnorm.into_iter().map(|x| x / total).collect())
}

fn spherical_central(members: &[ProbVector]) -> Result<Vec<f64>> {
    let k = members[0].len();
    let kf = k as f64;
    // eta_E = E[eta / |eta|]
    let mut eta_e = vec![0.0; k];
    for (i, m) in members.iter().enumerate() {
        let w = 1.0 / (i + 1) as f64;
        let n = m.norm2();
        for (acc, &p) in eta_e.iter_mut().zip(m.as_slice()) {
            *acc += (p / n - *acc) * w;
        }
    }
    // Component of eta_E orthogonal to x0 = (1/K, ..., 1/K).
    let shift = eta_e.iter().sum::<f64>() / kf;
    let m: Vec<f64> = eta_e.iter().map(|&x| x - shift).collect();
    let m_norm = l2_norm(&m);
    if m_norm >= 1.0 {
        return Err(Error::SphericalCentralUndefined(m_norm));
    }
    let x0_norm = (1.0 / kf).sqrt();
    let scale = x0_norm / (1.0 - m_norm * m_norm).sqrt();
    // |x0| * n = x0
    Ok(m.iter().map(|&mk| 1.0 / kf + scale * mk).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bregman::{expected_bregman_objective, Direction};
    use approx::assert_abs_diff_eq;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn central_label_examples() {
        let c = central_label(&[pv(&[0.5, 0.5]), pv(&[0.9, 0.1])]).unwrap();
        assert_abs_diff_eq!(c.get(0), 0.7, epsilon = 1e-15);
        assert_eq!(central_label(&[pv(&[0.2, 0.8])]).unwrap().as_slice(), &[0.2, 0.8]);
        let c = central_label(&[pv(&[1.0, 0.0]), pv(&[0.0, 1.0]), pv(&[0.5, 0.5])]).unwrap();
        assert_abs_diff_eq!(c.get(0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn log_central_geometric_mean() {
        // sqrt(0.45) : sqrt(0.05) = 3 : 1
        let c = central_prediction(ScoringRule::Log, &[pv(&[0.5, 0.5]), pv(&[0.9, 0.1])]).unwrap();
        let v = c.value().unwrap();
        assert_abs_diff_eq!(v[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn log_central_zero_classes() {
        let c = central_prediction(ScoringRule::Log, &[pv(&[0.5, 0.5, 0.0]), pv(&[0.2, 0.4, 0.4])]).unwrap();
        assert_eq!(c.value().unwrap()[2], 0.0);
        assert_eq!(
            central_prediction(ScoringRule::Log, &[pv(&[1.0, 0.0]), pv(&[0.0, 1.0])]),
            Err(Error::LogCentralUndefined)
        );
    }

    #[test]
    fn brier_central_is_label() {
        let members = [pv(&[0.1, 0.2, 0.7]), pv(&[0.3, 0.3, 0.4]), pv(&[0.6, 0.2, 0.2])];
        let c = central_prediction(ScoringRule::Brier, &members).unwrap();
        assert_eq!(c.value().unwrap(), central_label(&members).unwrap().as_slice());
    }

    #[test]
    fn spherical_two_member_example() {
        // Frozen from a bounded scalar minimiser of the forward objective
        // along (t, 1 - t); see also the grid oracle in the acceptance suite.
        let members = [pv(&[0.5, 0.5]), pv(&[0.6, 0.4])];
        let c = central_prediction(ScoringRule::Spherical, &members).unwrap();
        let v = c.value().unwrap();
        assert_abs_diff_eq!(v[0], 0.549_266_466, epsilon = 1e-8);
        assert_abs_diff_eq!(v[0] + v[1], 1.0, epsilon = 1e-15);
        assert!(!c.leaves_simplex());
    }

    #[test]
    fn undefined_rules() {
        let members = [pv(&[0.5, 0.5]), pv(&[0.6, 0.4])];
        for rule in [ScoringRule::ZeroOne, ScoringRule::NegLog] {
            let c = central_prediction(rule, &members).unwrap();
            assert!(!c.is_defined());
            assert!(matches!(central_point(rule, &members), Err(Error::Undefined(_))));
        }
    }

    #[test]
    fn identical_members_are_fixed_points() {
        let p = pv(&[0.15, 0.25, 0.6]);
        for rule in [ScoringRule::Log, ScoringRule::Brier, ScoringRule::Spherical] {
            let c = central_prediction(rule, &vec![p.clone(); 4]).unwrap();
            assert_eq!(c.value().unwrap(), p.as_slice());
        }
        // Without the shortcut the spherical formula still lands on p.
        let v = spherical_central(&vec![p.clone(); 3]).unwrap();
        for (a, b) in v.iter().zip(p.as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn log_central_permutation_equivariant() {
        let members = [pv(&[0.1, 0.3, 0.6]), pv(&[0.5, 0.2, 0.3]), pv(&[0.25, 0.25, 0.5])];
        let perm = [2, 0, 1];
        let base = central_prediction(ScoringRule::Log, &members).unwrap();
        let permuted: Vec<_> = members.iter().map(|m| m.permuted(&perm)).collect();
        let moved = central_prediction(ScoringRule::Log, &permuted).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            assert_abs_diff_eq!(moved.value().unwrap()[i], base.value().unwrap()[p], epsilon = 1e-15);
        }
    }

    #[test]
    fn forward_objective_minimised() {
        let members = [pv(&[0.1, 0.3, 0.6]), pv(&[0.5, 0.2, 0.3]), pv(&[0.7, 0.25, 0.05])];
        for rule in [ScoringRule::Log, ScoringRule::Brier, ScoringRule::Spherical] {
            let c = central_point(rule, &members).unwrap();
            let best = expected_bregman_objective(rule, &c, &members, Direction::Forward).unwrap();
            for d in [[0.01, -0.01, 0.0], [0.0, 0.02, -0.02], [-0.03, 0.0, 0.03]] {
                let z: Vec<f64> = c.iter().zip(d).map(|(a, b)| a + b).collect();
                let v = expected_bregman_objective(rule, &z, &members, Direction::Forward).unwrap();
                assert!(best <= v + 1e-12, "{rule}: {best} > {v}");
            }
        }
    }
}
