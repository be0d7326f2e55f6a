//! Free energies of logit vectors and their link to the log-score MRBI.
//!
//! `E(x; f) = -T logsumexp(f / T)`. For an ensemble of logits,
//! `(E(x; E f) - E E(x; f)) / T` equals `Excess(3, 1)` under the log score
//! on the softmaxed members, because the log central prediction is the
//! softmax of the mean logit.

use crate::error::{Error, Result};
use crate::estimators::{epbd_pairwise, Approx, EnsembleSummary};
use crate::scoring::ScoringRule;
use crate::simplex::{softmax, LogitVector, ProbVector};

/// The two ensemble estimates of free energy for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyScores {
    /// `E(x; E f)`: energy of the mean logit vector.
    pub energy_of_mean_logit: f64,
    /// `E E(x; f)`: mean of member energies.
    pub mean_energy: f64,
    pub temperature: f64,
}

impl EnergyScores {
    /// `(E(x; E f) - E E(x; f)) / T`, the log-score MRBI.
    pub fn difference(&self) -> f64 {
        (self.energy_of_mean_logit - self.mean_energy) / self.temperature
    }
}

/// `-T logsumexp(l / T)` with max-shift.
pub fn free_energy(l: &LogitVector) -> f64 {
    free_energy_raw(l.logits(), l.temperature())
}

fn free_energy_raw(logits: &[f64], t: f64) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&x| ((x - max) / t).exp()).sum();
    -(max + t * sum.ln())
}

fn check_members(members: &[LogitVector]) -> Result<(usize, f64)> {
    let first = members
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty member list".into()))?;
    let (k, t) = (first.len(), first.temperature());
    for m in members {
        if m.len() != k {
            return Err(Error::Shape(format!("member has {} classes, expected {k}", m.len())));
        }
        if m.temperature() != t {
            return Err(Error::InvalidArgument("members use different temperatures".into()));
        }
    }
    Ok((k, t))
}

/// Both energy estimates. Members are summed in lexicographic order of their
/// logits, so the result does not depend on how the ensemble lists them.
pub fn energy_pair(members: &[LogitVector]) -> Result<EnergyScores> {
    let (k, t) = check_members(members)?;
    let mut sorted: Vec<&LogitVector> = members.iter().collect();
    sorted.sort_by(|a, b| {
        a.logits()
            .iter()
            .zip(b.logits())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut mean_logit = vec![0.0; k];
    let mut mean_energy = 0.0;
    for m in sorted {
        for (acc, &x) in mean_logit.iter_mut().zip(m.logits()) {
            *acc += x;
        }
        mean_energy += free_energy(m);
    }
    let n = members.len() as f64;
    mean_logit.iter_mut().for_each(|x| *x /= n);
    mean_energy /= n;
    let mut energy_of_mean_logit = free_energy_raw(&mean_logit, t);
    if members.iter().all(|m| m.logits() == members[0].logits()) {
        // Keeps the difference exactly zero instead of round-off.
        energy_of_mean_logit = mean_energy;
    }
    Ok(EnergyScores {
        energy_of_mean_logit,
        mean_energy,
        temperature: t,
    })
}

/// Residuals of the two covariance identities on one logit ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceResiduals {
    /// `|EPKL - sum_i cov(eta_i, f_i / T)|`.
    pub epkl_vs_covariance: f64,
    /// `|MBI + MRBI - EPKL|`.
    pub split_vs_epkl: f64,
    pub epkl: f64,
}

/// Checks EPKL against the summed member covariances of probabilities and
/// scaled logits (population normalisation), and against `MBI + MRBI`.
pub fn covariance_identity_check(members: &[LogitVector]) -> Result<CovarianceResiduals> {
    let (k, t) = check_members(members)?;
    let probs: Vec<ProbVector> = members.iter().map(softmax).collect();
    let n = members.len() as f64;

    let mut cov_sum = 0.0;
    for i in 0..k {
        let mp = probs.iter().map(|p| p.get(i)).sum::<f64>() / n;
        let mf = members.iter().map(|m| m.logits()[i] / t).sum::<f64>() / n;
        let c: f64 = probs
            .iter()
            .zip(members)
            .map(|(p, m)| (p.get(i) - mp) * (m.logits()[i] / t - mf))
            .sum();
        cov_sum += c / n;
    }

    let epkl = epbd_pairwise(ScoringRule::Log, &probs);
    let mut s = EnsembleSummary::new(ScoringRule::Log, &probs)?;
    let mbi = s.excess(Approx::Bayesian, Approx::CentralPrediction)?;
    let mrbi = s.excess(Approx::CentralPrediction, Approx::Bayesian)?;
    Ok(CovarianceResiduals {
        epkl_vs_covariance: (epkl - cov_sum).abs(),
        split_vs_epkl: (mbi + mrbi - epkl).abs(),
        epkl,
    })
}
