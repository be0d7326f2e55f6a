//! Bayesian approximations of the Bayes, Excess and Total risks.
//!
//! The unknown truth `eta` and the prediction `eta_hat` are each replaced by
//! one of three ensemble-based stand-ins, indexed positionally:
//!
//! 1. the members themselves, averaged over (Bayesian averaging),
//! 2. the central label (mean of members),
//! 3. the central prediction of the rule.
//!
//! `Excess(i, j)` plugs approximation `i` into the first argument of `D_G`
//! and `j` into the second. Named special cases: `(1,1)` EPBD (expected
//! pairwise Bregman divergence), `(1,2)` BI (Bregman information; mutual
//! information for the log score), `(2,1)` RBI (reverse BI), `(1,3)` MBI,
//! `(3,1)` MRBI, and the bias terms `(2,3)`, `(3,2)`. `Total(i, j)` is
//! `Bayes(i) + Excess(i, j)`.
//!
//! All averages use uniform `1/M` weights and are accumulated in member
//! order, then class order, so results do not depend on scheduling.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::fmt;

use crate::central::central_point;
use crate::error::{Error, Result};
use crate::scoring::ScoringRule;
use crate::simplex::{check_same_len, dot, dot_zero_inf, mean_of, ProbVector};

/// Above this many members EPBD switches from the literal `M^2` pair loop to
/// the algebraically equal cross-moment form
/// `E <G'(eta), eta> - <E G'(eta), E eta>`.
pub const PAIRWISE_MAX_MEMBERS: usize = 512;

/// Positional approximation index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Approx {
    /// 1: average over members.
    Bayesian,
    /// 2: the central label.
    CentralLabel,
    /// 3: the central prediction.
    CentralPrediction,
}

impl Approx {
    pub const ALL: [Approx; 3] = [Approx::Bayesian, Approx::CentralLabel, Approx::CentralPrediction];

    pub fn index(self) -> u8 {
        match self {
            Approx::Bayesian => 1,
            Approx::CentralLabel => 2,
            Approx::CentralPrediction => 3,
        }
    }

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Approx::Bayesian),
            2 => Ok(Approx::CentralLabel),
            3 => Ok(Approx::CentralPrediction),
            _ => Err(Error::InvalidArgument(format!("approximation index {i} not in 1..=3"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Risk {
    Bayes(Approx),
    Excess(Approx, Approx),
    Total(Approx, Approx),
}

impl Risk {
    fn indices(self) -> (Approx, Option<Approx>) {
        match self {
            Risk::Bayes(i) => (i, None),
            Risk::Excess(i, j) | Risk::Total(i, j) => (i, Some(j)),
        }
    }

    pub fn kind_name(self) -> &'static str {
        match self {
            Risk::Bayes(_) => "bayes",
            Risk::Excess(..) => "excess",
            Risk::Total(..) => "total",
        }
    }

    fn uses_central_prediction(self) -> bool {
        let (i, j) = self.indices();
        i == Approx::CentralPrediction || j == Some(Approx::CentralPrediction)
    }
}

/// A risk approximation under a particular scoring rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeasureSpec {
    risk: Risk,
    rule: ScoringRule,
}

impl MeasureSpec {
    /// Rejects combinations that need a central prediction the rule lacks.
    pub fn new(risk: Risk, rule: ScoringRule) -> Result<Self> {
        if risk.uses_central_prediction() && !rule.has_central_prediction() {
            return Err(Error::Undefined(format!(
                "{} uses the central prediction, which is Not defined for the {rule} score",
                Self { risk, rule }.name()
            )));
        }
        Ok(Self { risk, rule })
    }

    pub fn bayes(i: u8, rule: ScoringRule) -> Result<Self> {
        Self::new(Risk::Bayes(Approx::from_index(i)?), rule)
    }

    pub fn excess(i: u8, j: u8, rule: ScoringRule) -> Result<Self> {
        Self::new(Risk::Excess(Approx::from_index(i)?, Approx::from_index(j)?), rule)
    }

    pub fn total(i: u8, j: u8, rule: ScoringRule) -> Result<Self> {
        Self::new(Risk::Total(Approx::from_index(i)?, Approx::from_index(j)?), rule)
    }

    /// Parses `bayes1`..`bayes3`, `exc11`..`exc33`, `tot11`..`tot33`.
    pub fn parse(name: &str, rule: ScoringRule) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown measure '{name}'"));
        let digits = |s: &str| -> Result<Vec<u8>> {
            s.chars()
                .map(|c| c.to_digit(10).map(|d| d as u8).ok_or_else(bad))
                .collect()
        };
        if let Some(rest) = name.strip_prefix("bayes") {
            match digits(rest)?.as_slice() {
                [i] => Self::bayes(*i, rule),
                _ => Err(bad()),
            }
        } else if let Some(rest) = name.strip_prefix("exc") {
            match digits(rest)?.as_slice() {
                [i, j] => Self::excess(*i, *j, rule),
                _ => Err(bad()),
            }
        } else if let Some(rest) = name.strip_prefix("tot") {
            match digits(rest)?.as_slice() {
                [i, j] => Self::total(*i, *j, rule),
                _ => Err(bad()),
            }
        } else {
            Err(bad())
        }
    }

    /// Every valid spec for `rule`: 3 Bayes, 9 Excess and 9 Total variants
    /// for rules with a central prediction, fewer otherwise.
    pub fn all_for(rule: ScoringRule) -> Vec<Self> {
        let mut out = Vec::new();
        for i in Approx::ALL {
            out.extend(Self::new(Risk::Bayes(i), rule));
        }
        for i in Approx::ALL {
            for j in Approx::ALL {
                out.extend(Self::new(Risk::Excess(i, j), rule));
            }
        }
        for i in Approx::ALL {
            for j in Approx::ALL {
                out.extend(Self::new(Risk::Total(i, j), rule));
            }
        }
        out
    }

    pub fn risk(&self) -> Risk {
        self.risk
    }

    pub fn rule(&self) -> ScoringRule {
        self.rule
    }

    /// `(i, j)` indices; `j` is absent for Bayes risk.
    pub fn indices(&self) -> (u8, Option<u8>) {
        let (i, j) = self.risk.indices();
        (i.index(), j.map(Approx::index))
    }

    /// CLI name such as `exc12`.
    pub fn name(&self) -> String {
        match self.risk {
            Risk::Bayes(i) => format!("bayes{}", i.index()),
            Risk::Excess(i, j) => format!("exc{}{}", i.index(), j.index()),
            Risk::Total(i, j) => format!("tot{}{}", i.index(), j.index()),
        }
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.name(), self.rule)
    }
}

/// Members of one sample plus their central label and (lazily) the central
/// prediction, shared across every measure evaluated on that sample.
///
/// Members are put in lexicographic order first, so every estimate is
/// bitwise invariant to the order the ensemble lists them in.
#[derive(Debug, Clone)]
pub struct EnsembleSummary<'a> {
    rule: ScoringRule,
    members: Cow<'a, [ProbVector]>,
    label: ProbVector,
    prediction: Option<Result<Vec<f64>>>,
}

impl<'a> EnsembleSummary<'a> {
    pub fn new(rule: ScoringRule, members: &'a [ProbVector]) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty member list".into()))?;
        check_same_len(members, first.len())?;
        let ordered = |a: &ProbVector, b: &ProbVector| lex_cmp(a, b) != Ordering::Greater;
        let members: Cow<'a, [ProbVector]> = if members.windows(2).all(|w| ordered(&w[0], &w[1])) {
            Cow::Borrowed(members)
        } else {
            let mut v = members.to_vec();
            v.sort_by(lex_cmp);
            Cow::Owned(v)
        };
        let label = mean_of(&members)?;
        Ok(Self {
            rule,
            members,
            label,
            prediction: None,
        })
    }

    pub fn rule(&self) -> ScoringRule {
        self.rule
    }

    /// Members in canonical order.
    pub fn members(&self) -> &[ProbVector] {
        &self.members
    }

    pub fn central_label(&self) -> &ProbVector {
        &self.label
    }

    pub fn central_prediction(&mut self) -> Result<&[f64]> {
        let rule = self.rule;
        let members = &self.members;
        let cached = self.prediction.get_or_insert_with(|| central_point(rule, members));
        match cached {
            Ok(v) => Ok(v.as_slice()),
            Err(e) => Err(e.clone()),
        }
    }

    fn point(&mut self, a: Approx) -> Result<Vec<f64>> {
        match a {
            Approx::Bayesian => unreachable!("members are not a single point"),
            Approx::CentralLabel => Ok(self.label.as_slice().to_vec()),
            Approx::CentralPrediction => Ok(self.central_prediction()?.to_vec()),
        }
    }

    pub fn bayes(&mut self, i: Approx) -> Result<f64> {
        let rule = self.rule;
        Ok(match i {
            Approx::Bayesian => {
                let mut acc = 0.0;
                for m in self.members.iter() {
                    acc += rule.bayes_risk(m);
                }
                acc / self.members.len() as f64
            }
            _ => rule.bayes_risk_raw(&self.point(i)?),
        })
    }

    pub fn excess(&mut self, i: Approx, j: Approx) -> Result<f64> {
        use Approx::*;
        let rule = self.rule;
        let m = self.members.len() as f64;
        Ok(match (i, j) {
            (CentralLabel, CentralLabel) | (CentralPrediction, CentralPrediction) => {
                if i == CentralPrediction {
                    // still surface an undefined central prediction
                    self.central_prediction()?;
                }
                0.0
            }
            (Bayesian, Bayesian) => {
                let members = &self.members;
                if members.len() <= PAIRWISE_MAX_MEMBERS {
                    epbd_pairwise(rule, members)
                } else {
                    epbd_cross_moment(rule, members)
                }
            }
            (Bayesian, _) => {
                let c = self.point(j)?;
                let mut acc = 0.0;
                for mem in self.members.iter() {
                    acc += rule.excess_risk_raw(mem.as_slice(), &c);
                }
                acc / m
            }
            (_, Bayesian) => {
                let c = self.point(i)?;
                let mut acc = 0.0;
                for mem in self.members.iter() {
                    acc += rule.excess_risk_raw(&c, mem.as_slice());
                }
                acc / m
            }
            _ => {
                let a = self.point(i)?;
                let b = self.point(j)?;
                rule.excess_risk_raw(&a, &b)
            }
        })
    }

    pub fn total(&mut self, i: Approx, j: Approx) -> Result<f64> {
        let v = self.bayes(i)? + self.excess(i, j)?;
        if v.is_nan() {
            return Err(Error::NaN(format!(
                "tot{}{} under the {} score",
                i.index(),
                j.index(),
                self.rule
            )));
        }
        Ok(v)
    }

    /// Evaluates `risk` under this summary's rule.
    pub fn evaluate(&mut self, risk: Risk) -> Result<f64> {
        let v = match risk {
            Risk::Bayes(i) => self.bayes(i)?,
            Risk::Excess(i, j) => self.excess(i, j)?,
            Risk::Total(i, j) => self.total(i, j)?,
        };
        if v.is_nan() {
            return Err(Error::NaN(format!(
                "{} under the {} score",
                risk.kind_name(),
                self.rule
            )));
        }
        Ok(v)
    }
}

fn lex_cmp(a: &ProbVector, b: &ProbVector) -> Ordering {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn check_spec(spec: &MeasureSpec) -> Result<()> {
    // Specs built through `new` are already validated; this re-check keeps a
    // hand-built spec with an undefined central prediction from slipping by.
    MeasureSpec::new(spec.risk, spec.rule).map(|_| ())
}

/// Evaluates any risk approximation for one sample's members.
pub fn evaluate(spec: &MeasureSpec, members: &[ProbVector]) -> Result<f64> {
    check_spec(spec)?;
    EnsembleSummary::new(spec.rule, members)?.evaluate(spec.risk)
}

/// `Bayes(i)`; fails if `spec` is not a Bayes-risk spec.
pub fn bayes_variant(spec: &MeasureSpec, members: &[ProbVector]) -> Result<f64> {
    match spec.risk {
        Risk::Bayes(_) => evaluate(spec, members),
        _ => Err(Error::InvalidArgument(format!("{} is not a Bayes risk", spec.name()))),
    }
}

/// `Excess(i, j)`; fails if `spec` is not an Excess-risk spec.
pub fn excess_variant(spec: &MeasureSpec, members: &[ProbVector]) -> Result<f64> {
    match spec.risk {
        Risk::Excess(..) => evaluate(spec, members),
        _ => Err(Error::InvalidArgument(format!("{} is not an Excess risk", spec.name()))),
    }
}

/// `Total(i, j) = Bayes(i) + Excess(i, j)`.
pub fn total_variant(spec: &MeasureSpec, members: &[ProbVector]) -> Result<f64> {
    match spec.risk {
        Risk::Total(..) => evaluate(spec, members),
        _ => Err(Error::InvalidArgument(format!("{} is not a Total risk", spec.name()))),
    }
}

/// Mean of `D_G(eta_a || eta_b)` over all `M^2` ordered pairs, diagonal
/// included.
pub fn epbd_pairwise(rule: ScoringRule, members: &[ProbVector]) -> f64 {
    let mut acc = 0.0;
    for a in members {
        for b in members {
            acc += rule.excess_risk_raw(a.as_slice(), b.as_slice());
        }
    }
    let m = members.len() as f64;
    acc / (m * m)
}

/// EPBD through first moments: `E <G'(eta), eta> - <E G'(eta), E eta>`.
/// Linear in `M`; equal to [`epbd_pairwise`] up to round-off.
pub fn epbd_cross_moment(rule: ScoringRule, members: &[ProbVector]) -> f64 {
    let k = members[0].len();
    let m = members.len() as f64;
    let mut self_term = 0.0;
    let mut mean_grad = vec![0.0; k];
    let mut mean_eta = vec![0.0; k];
    for mem in members {
        let g = rule.subgradient(mem);
        self_term += dot_zero_inf(&g, mem.as_slice());
        for ((mg, me), (&gk, &pk)) in mean_grad
            .iter_mut()
            .zip(mean_eta.iter_mut())
            .zip(g.iter().zip(mem.as_slice()))
        {
            *mg += gk;
            *me += pk;
        }
    }
    for (mg, me) in mean_grad.iter_mut().zip(mean_eta.iter_mut()) {
        *mg /= m;
        *me /= m;
    }
    let v = self_term / m - dot_zero_inf(&mean_grad, &mean_eta);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v.max(0.0)
    }
}

/// Outcome of one identity check in [`identity_audit`].
#[derive(Debug, Clone, PartialEq)]
pub enum Residual {
    /// Absolute difference of the two sides.
    Value(f64),
    /// Some term is infinite, so the residual is meaningless.
    Indeterminate,
    /// Needs a central prediction the rule does not have.
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub residual: Residual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub rule: ScoringRule,
    pub checks: Vec<IdentityCheck>,
}

impl AuditReport {
    /// Largest finite residual, ignoring skipped and indeterminate checks.
    pub fn max_residual(&self) -> f64 {
        self.checks
            .iter()
            .filter_map(|c| match c.residual {
                Residual::Value(v) => Some(v),
                _ => None,
            })
            .fold(0.0, f64::max)
    }

    pub fn get(&self, name: &str) -> Option<&Residual> {
        self.checks.iter().find(|c| c.name == name).map(|c| &c.residual)
    }
}

/// Identity names in the order [`identity_audit`] reports them.
pub const IDENTITIES: [&str; 9] = [
    "exc11 = exc12 + exc21",
    "exc21 = exc23 + exc31",
    "exc11 = exc13 + exc31",
    "exc12 = bayes2 - bayes1",
    "exc21 = tot11 - tot12",
    "tot11 = bayes2 + exc31 + exc23",
    "tot11 = tot21",
    "tot12 = tot22",
    "tot13 = tot23",
];

/// Name of the extra Brier-only check reported by [`identity_audit`].
pub const BRIER_SYMMETRY: &str = "brier: exc12 = exc21 = exc13 = exc31 = exc11 / 2";

/// Checks the relations between estimates on one ensemble and reports the
/// absolute residual of each.
pub fn identity_audit(members: &[ProbVector], rule: ScoringRule) -> Result<AuditReport> {
    use Approx::*;
    let mut s = EnsembleSummary::new(rule, members)?;
    let central_ok = rule.has_central_prediction() && s.central_prediction().is_ok();

    let e11 = s.excess(Bayesian, Bayesian)?;
    let e12 = s.excess(Bayesian, CentralLabel)?;
    let e21 = s.excess(CentralLabel, Bayesian)?;
    let b1 = s.bayes(Bayesian)?;
    let b2 = s.bayes(CentralLabel)?;
    let t11 = b1 + e11;
    let t12 = b1 + e12;
    let t21 = b2 + e21;
    let t22 = b2;

    let central = if central_ok {
        let e13 = s.excess(Bayesian, CentralPrediction)?;
        let e31 = s.excess(CentralPrediction, Bayesian)?;
        let e23 = s.excess(CentralLabel, CentralPrediction)?;
        let t13 = b1 + e13;
        let t23 = b2 + e23;
        Some((e13, e31, e23, t13, t23))
    } else {
        None
    };

    let res = |lhs: f64, rhs: f64| -> Residual {
        if lhs.is_finite() && rhs.is_finite() {
            Residual::Value((lhs - rhs).abs())
        } else {
            Residual::Indeterminate
        }
    };
    let with_central = |f: &dyn Fn(f64, f64, f64, f64, f64) -> Residual| -> Residual {
        match central {
            Some((e13, e31, e23, t13, t23)) => f(e13, e31, e23, t13, t23),
            None => Residual::Skipped,
        }
    };

    let mut checks = vec![
        IdentityCheck {
            name: IDENTITIES[0],
            residual: res(e11, e12 + e21),
        },
        IdentityCheck {
            name: IDENTITIES[1],
            residual: with_central(&|_, e31, e23, _, _| res(e21, e23 + e31)),
        },
        IdentityCheck {
            name: IDENTITIES[2],
            residual: with_central(&|e13, e31, _, _, _| res(e11, e13 + e31)),
        },
        IdentityCheck {
            name: IDENTITIES[3],
            residual: res(e12, b2 - b1),
        },
        IdentityCheck {
            name: IDENTITIES[4],
            residual: res(e21, t11 - t12),
        },
        IdentityCheck {
            name: IDENTITIES[5],
            residual: with_central(&|_, e31, e23, _, _| res(t11, b2 + e31 + e23)),
        },
        IdentityCheck {
            name: IDENTITIES[6],
            residual: res(t11, t21),
        },
        IdentityCheck {
            name: IDENTITIES[7],
            residual: res(t12, t22),
        },
        IdentityCheck {
            name: IDENTITIES[8],
            residual: with_central(&|_, _, _, t13, t23| res(t13, t23)),
        },
    ];

    if rule == ScoringRule::Brier {
        let residual = match central {
            Some((e13, e31, _, _, _)) => {
                let vals = [e12, e21, e13, e31, e11 / 2.0];
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                Residual::Value(hi - lo)
            }
            None => Residual::Skipped,
        };
        checks.push(IdentityCheck {
            name: BRIER_SYMMETRY,
            residual,
        });
    }

    Ok(AuditReport { rule, checks })
}

/// `(Bayes(1), Bayes(2))`, which should satisfy `Bayes(1) <= Bayes(2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JensenCheck {
    pub outer: f64,
    pub inner: f64,
}

impl JensenCheck {
    pub fn holds(&self) -> bool {
        self.outer <= self.inner + 1e-12
    }
}

/// Compares averaged Bayes risk against Bayes risk of the averaged member.
pub fn jensen_check(members: &[ProbVector], rule: ScoringRule) -> Result<JensenCheck> {
    let mut s = EnsembleSummary::new(rule, members)?;
    Ok(JensenCheck {
        outer: s.bayes(Approx::Bayesian)?,
        inner: s.bayes(Approx::CentralLabel)?,
    })
}

/// Sum over classes of the population variance of member probabilities.
pub fn sum_of_variances(members: &[ProbVector]) -> Result<f64> {
    let mean = mean_of(members)?;
    let m = members.len() as f64;
    let mut acc = 0.0;
    for mem in members {
        let d: Vec<f64> = mem.as_slice().iter().zip(mean.as_slice()).map(|(a, b)| a - b).collect();
        acc += dot(&d, &d);
    }
    Ok(acc / m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    fn two() -> Vec<ProbVector> {
        vec![pv(&[0.5, 0.5]), pv(&[0.9, 0.1])]
    }

    fn entropy(p: &[f64]) -> f64 {
        -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
    }

    #[test]
    fn spec_parsing_and_validation() {
        let s = MeasureSpec::parse("exc13", ScoringRule::Log).unwrap();
        assert_eq!(s.indices(), (1, Some(3)));
        assert_eq!(s.name(), "exc13");
        assert!(matches!(
            MeasureSpec::parse("exc13", ScoringRule::ZeroOne),
            Err(Error::Undefined(_))
        ));
        assert!(matches!(
            MeasureSpec::parse("bayes3", ScoringRule::ZeroOne),
            Err(Error::Undefined(_))
        ));
        assert!(MeasureSpec::parse("exc12", ScoringRule::ZeroOne).is_ok());
        assert!(MeasureSpec::parse("exc14", ScoringRule::Log).is_err());
        assert!(MeasureSpec::parse("bayes", ScoringRule::Log).is_err());
        assert!(MeasureSpec::parse("foo", ScoringRule::Log).is_err());
        assert_eq!(MeasureSpec::all_for(ScoringRule::Log).len(), 21);
        assert_eq!(MeasureSpec::all_for(ScoringRule::ZeroOne).len(), 2 + 4 + 4);
    }

    #[test]
    fn bayes_examples() {
        let b2 = bayes_variant(&MeasureSpec::bayes(2, ScoringRule::Log).unwrap(), &two()).unwrap();
        assert_abs_diff_eq!(b2, entropy(&[0.7, 0.3]), epsilon = 1e-15);
        assert_abs_diff_eq!(b2, 0.610_864_302_054_894, epsilon = 1e-12);

        let b1 = bayes_variant(&MeasureSpec::bayes(1, ScoringRule::Log).unwrap(), &two()).unwrap();
        assert_abs_diff_eq!(b1, 0.5 * (entropy(&[0.5, 0.5]) + entropy(&[0.9, 0.1])), epsilon = 1e-15);
        assert_abs_diff_eq!(b1, 0.509_115_076_975_696_7, epsilon = 1e-12);

        let same = vec![pv(&[0.2, 0.3, 0.5]); 3];
        for rule in [ScoringRule::Log, ScoringRule::Brier, ScoringRule::Spherical] {
            let v: Vec<f64> = (1..=3)
                .map(|i| bayes_variant(&MeasureSpec::bayes(i, rule).unwrap(), &same).unwrap())
                .collect();
            assert_eq!(v[0], v[1]);
            assert_eq!(v[1], v[2]);
        }
    }

    #[test]
    fn excess_examples() {
        for rule in ScoringRule::ALL {
            let e22 = excess_variant(&MeasureSpec::excess(2, 2, rule).unwrap(), &two()).unwrap();
            assert_eq!(e22, 0.0);
        }
        let bi = excess_variant(&MeasureSpec::excess(1, 2, ScoringRule::Brier).unwrap(), &two()).unwrap();
        assert_abs_diff_eq!(bi, 0.08, epsilon = 1e-15);
        let same = vec![pv(&[0.2, 0.3, 0.5]); 4];
        let e11 = excess_variant(&MeasureSpec::excess(1, 1, ScoringRule::Log).unwrap(), &same).unwrap();
        assert_eq!(e11, 0.0);
    }

    #[test]
    fn wrong_kind_rejected() {
        let spec = MeasureSpec::excess(1, 2, ScoringRule::Log).unwrap();
        assert!(bayes_variant(&spec, &two()).is_err());
        assert!(total_variant(&spec, &two()).is_err());
        assert!(excess_variant(&spec, &[]).is_err());
    }

    #[test]
    fn total_examples() {
        let members = vec![pv(&[0.1, 0.6, 0.3]), pv(&[0.4, 0.4, 0.2]), pv(&[0.3, 0.1, 0.6])];
        for rule in [ScoringRule::Log, ScoringRule::Brier, ScoringRule::Spherical] {
            let t = |i, j| total_variant(&MeasureSpec::total(i, j, rule).unwrap(), &members).unwrap();
            let b1 = bayes_variant(&MeasureSpec::bayes(1, rule).unwrap(), &members).unwrap();
            let e12 = excess_variant(&MeasureSpec::excess(1, 2, rule).unwrap(), &members).unwrap();
            assert_abs_diff_eq!(t(1, 2), b1 + e12, epsilon = 1e-15);
            assert_abs_diff_eq!(t(1, 1), t(2, 1), epsilon = 1e-10);
        }
        let same = vec![pv(&[0.2, 0.3, 0.5]); 3];
        for j in 1..=3 {
            let t = total_variant(&MeasureSpec::total(1, j, ScoringRule::Log).unwrap(), &same).unwrap();
            assert_abs_diff_eq!(t, ScoringRule::Log.bayes_risk(&same[0]), epsilon = 1e-15);
        }
    }

    #[test]
    fn total_matches_direct_double_plug_in() {
        // Averaging the pointwise total risk directly, as a second route.
        let members = vec![pv(&[0.1, 0.6, 0.3]), pv(&[0.4, 0.4, 0.2]), pv(&[0.3, 0.1, 0.6])];
        for rule in [ScoringRule::Log, ScoringRule::Brier, ScoringRule::Spherical] {
            let label = central_label(&members);
            let pred = central_point(rule, &members).unwrap();
            let m = members.len() as f64;
            let direct_11: f64 = members
                .iter()
                .flat_map(|a| members.iter().map(move |b| rule.total_risk(a, b)))
                .sum::<f64>()
                / (m * m);
            let direct_13: f64 = members
                .iter()
                .map(|a| rule.total_risk_raw(a.as_slice(), &pred))
                .sum::<f64>()
                / m;
            let direct_32: f64 = rule.total_risk_raw(&pred, label.as_slice());
            let t = |i, j| total_variant(&MeasureSpec::total(i, j, rule).unwrap(), &members).unwrap();
            assert_abs_diff_eq!(t(1, 1), direct_11, epsilon = 1e-12);
            assert_abs_diff_eq!(t(1, 3), direct_13, epsilon = 1e-12);
            assert_abs_diff_eq!(t(3, 2), direct_32, epsilon = 1e-12);
        }
    }

    fn central_label(members: &[ProbVector]) -> ProbVector {
        mean_of(members).unwrap()
    }

    #[test]
    fn zero_one_central_errors_surface() {
        let spec = MeasureSpec {
            risk: Risk::Excess(Approx::CentralPrediction, Approx::CentralPrediction),
            rule: ScoringRule::ZeroOne,
        };
        assert!(matches!(evaluate(&spec, &two()), Err(Error::Undefined(_))));
    }

    #[test]
    fn audit_identical_members() {
        let same = vec![pv(&[0.2, 0.3, 0.5]); 5];
        for rule in ScoringRule::ALL {
            let r = identity_audit(&same, rule).unwrap();
            assert_eq!(r.max_residual(), 0.0, "{rule}");
        }
    }

    #[test]
    fn audit_skips_central_for_zero_one() {
        let r = identity_audit(&two(), ScoringRule::ZeroOne).unwrap();
        assert_eq!(r.get(IDENTITIES[1]), Some(&Residual::Skipped));
        assert!(matches!(r.get(IDENTITIES[0]), Some(Residual::Value(v)) if *v <= 1e-12));
    }

    #[test]
    fn audit_marks_infinite_terms() {
        let members = vec![pv(&[1.0, 0.0]), pv(&[0.5, 0.5])];
        let r = identity_audit(&members, ScoringRule::Log).unwrap();
        assert_eq!(r.get(IDENTITIES[0]), Some(&Residual::Indeterminate));
    }

    #[test]
    fn jensen_example() {
        let j = jensen_check(&two(), ScoringRule::Log).unwrap();
        assert_abs_diff_eq!(j.outer, 0.509_115_076_975_696_7, epsilon = 1e-12);
        assert_abs_diff_eq!(j.inner, 0.610_864_302_054_894, epsilon = 1e-12);
        assert!(j.holds());
        let same = vec![pv(&[0.2, 0.8]); 3];
        let j = jensen_check(&same, ScoringRule::Brier).unwrap();
        assert_eq!(j.outer, j.inner);
    }

    #[test]
    fn epbd_routes_agree_with_zeros() {
        let members = vec![pv(&[0.5, 0.5, 0.0]), pv(&[0.2, 0.3, 0.5]), pv(&[0.0, 0.4, 0.6])];
        for rule in ScoringRule::DEFAULT {
            let a = epbd_pairwise(rule, &members);
            let b = epbd_cross_moment(rule, &members);
            if a.is_finite() {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            } else {
                assert_eq!(b, f64::INFINITY, "{rule}");
            }
        }
    }

    fn simplex(k: usize) -> impl Strategy<Value = ProbVector> {
        prop::collection::vec(1e-3f64..1.0, k).prop_map(|v| {
            let s: f64 = v.iter().sum();
            ProbVector::new(v.into_iter().map(|x| x / s).collect()).unwrap()
        })
    }

    fn ensemble() -> impl Strategy<Value = Vec<ProbVector>> {
        (2usize..6, 1usize..8).prop_flat_map(|(k, m)| prop::collection::vec(simplex(k), m))
    }

    proptest! {
        #[test]
        fn audit_holds(members in ensemble()) {
            for rule in [ScoringRule::Log, ScoringRule::Brier, ScoringRule::Spherical] {
                let r = identity_audit(&members, rule).unwrap();
                prop_assert!(r.max_residual() <= 1e-9, "{:?}", r);
            }
        }

        #[test]
        fn nonnegativity_chain(members in ensemble()) {
            for rule in ScoringRule::ALL {
                let mut s = EnsembleSummary::new(rule, &members).unwrap();
                let e11 = s.excess(Approx::Bayesian, Approx::Bayesian).unwrap();
                let e12 = s.excess(Approx::Bayesian, Approx::CentralLabel).unwrap();
                let e21 = s.excess(Approx::CentralLabel, Approx::Bayesian).unwrap();
                prop_assert!(e12 >= 0.0 && e21 >= 0.0);
                prop_assert!(e11 + 1e-12 >= e12 && e11 + 1e-12 >= e21);
            }
        }

        #[test]
        fn bi_is_mutual_information(members in ensemble()) {
            let bi = excess_variant(&MeasureSpec::excess(1, 2, ScoringRule::Log).unwrap(), &members).unwrap();
            let mean = central_label(&members);
            let mi = entropy(mean.as_slice())
                - members.iter().map(|m| entropy(m.as_slice())).sum::<f64>() / members.len() as f64;
            prop_assert!((bi - mi).abs() <= 1e-10);
        }

        #[test]
        fn brier_bi_is_variance(members in ensemble()) {
            let bi = excess_variant(&MeasureSpec::excess(1, 2, ScoringRule::Brier).unwrap(), &members).unwrap();
            prop_assert!((bi - sum_of_variances(&members).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn permutation_invariance(members in ensemble(), seed in 0u64..1000) {
            let m = members.len();
            let k = members[0].len();
            let member_perm: Vec<usize> = (0..m).map(|i| (i + seed as usize) % m).collect();
            let class_perm: Vec<usize> = (0..k).map(|i| (i * 7 + seed as usize) % k).collect();
            let class_perm = if is_perm(&class_perm) { class_perm } else { (0..k).rev().collect() };
            let shuffled: Vec<ProbVector> = member_perm.iter().map(|&i| members[i].clone()).collect();
            let relabeled: Vec<ProbVector> = members.iter().map(|p| p.permuted(&class_perm)).collect();
            for rule in [ScoringRule::Log, ScoringRule::Brier, ScoringRule::Spherical] {
                for spec in MeasureSpec::all_for(rule) {
                    let a = evaluate(&spec, &members).unwrap();
                    let b = evaluate(&spec, &shuffled).unwrap();
                    let c = evaluate(&spec, &relabeled).unwrap();
                    let tol = 1e-12 * 1f64.max(a.abs());
                    prop_assert!((a - b).abs() <= tol, "{} member perm {} {}", spec, a, b);
                    prop_assert!((a - c).abs() <= tol, "{} class perm {} {}", spec, a, c);
                }
            }
        }

        #[test]
        fn epbd_forms_agree(members in ensemble()) {
            for rule in ScoringRule::ALL {
                let a = epbd_pairwise(rule, &members);
                let b = epbd_cross_moment(rule, &members);
                prop_assert!((a - b).abs() <= 1e-10 * 1f64.max(a.abs()), "{} {} {}", rule, a, b);
            }
        }
    }

    fn is_perm(p: &[usize]) -> bool {
        let mut seen = vec![false; p.len()];
        for &i in p {
            if seen[i] {
                return false;
            }
            seen[i] = true;
        }
        true
    }
}
