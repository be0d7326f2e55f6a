//! Probability vectors, logits and ensembles of categorical predictions.
//!
//! Exact zeros are kept as zeros. Anything computed in the log domain may be
//! `-inf`, and downstream divergences may be `+inf`; there is no flooring.

use crate::error::{Error, Result};

/// Accepted deviation of a raw vector's sum from 1 before renormalization.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// A point on the probability simplex with at least two classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates `probs` and divides it by its sum.
    ///
    /// Fails when fewer than two classes are given, when an entry is negative
    /// or non-finite, or when the sum is off by more than [`SUM_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidSimplex(format!(
                "need at least 2 classes, got {}",
                probs.len()
            )));
        }
        if let Some(&bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidSimplex(format!("entry {bad} is not a probability")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidSimplex(format!("entries sum to {sum}")));
        }
        if sum == 1.0 {
            return Ok(Self(probs));
        }
        Ok(Self(probs.into_iter().map(|p| p / sum).collect()))
    }

    /// Wraps a vector already known to lie on the simplex (up to round-off).
    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        debug_assert!(probs.len() >= 2);
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        Self(probs)
    }

    /// The uniform distribution over `k` classes.
    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn max(&self) -> f64 {
        self.0[self.argmax()]
    }

    pub fn norm2(&self) -> f64 {
        l2_norm(&self.0)
    }

    /// True when every entry is strictly positive.
    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&p| p > 0.0)
    }

    /// Returns the vector with classes reordered so that `out[i] = self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self(perm.iter().map(|&i| self.0[i]).collect())
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Lowest index of the maximum; NaN entries are never selected.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dot product with the convention `0 * (+-inf) = 0`.
pub(crate) fn dot_zero_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| if x == 0.0 || y == 0.0 { 0.0 } else { x * y })
        .sum()
}

/// Class logits together with the temperature used to soften them.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector {
    logits: Vec<f64>,
    temperature: f64,
}

impl LogitVector {
    pub fn new(logits: Vec<f64>, temperature: f64) -> Result<Self> {
        if logits.len() < 2 {
            return Err(Error::InvalidLogits(format!(
                "need at least 2 classes, got {}",
                logits.len()
            )));
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidLogits("non-finite logit".into()));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidLogits(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok(Self { logits, temperature })
    }

    /// Logits at temperature 1.
    pub fn unit(logits: Vec<f64>) -> Result<Self> {
        Self::new(logits, 1.0)
    }

    /// `ln p` read as logits at T = 1, so that `softmax` returns `p` back.
    /// Fails on exact zeros since their logit is not finite.
    pub fn from_probs(p: &ProbVector) -> Result<Self> {
        if !p.is_interior() {
            return Err(Error::InvalidLogits(
                "probability vector has a zero entry; its log is not a finite logit".into(),
            ));
        }
        Self::new(p.as_slice().iter().map(|x| x.ln()).collect(), 1.0)
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.logits)
    }
}

/// Tempered softmax with max-shift.
pub fn softmax(l: &LogitVector) -> ProbVector {
    let t = l.temperature();
    let max = l.logits().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = l.logits().iter().map(|&x| ((x - max) / t).exp()).collect();
    let sum: f64 = exps.iter().sum();
    ProbVector::from_normalized(exps.into_iter().map(|e| e / sum).collect())
}

/// Elementwise `ln p`, zeros mapped to `-inf`.
pub fn clamp_log(p: &ProbVector) -> Vec<f64> {
    p.as_slice()
        .iter()
        .map(|&x| if x == 0.0 { f64::NEG_INFINITY } else { x.ln() })
        .collect()
}

/// Arithmetic mean of `members`, accumulated in member order.
///
/// Uses the running-mean update so that identical members reproduce their
/// common value bit for bit.
pub fn mean_of(members: &[ProbVector]) -> Result<ProbVector> {
    let first = members
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty member list".into()))?;
    let k = first.len();
    check_same_len(members, k)?;
    let mut mean = first.as_slice().to_vec();
    for (i, m) in members.iter().enumerate().skip(1) {
        let w = 1.0 / (i + 1) as f64;
        for (acc, &x) in mean.iter_mut().zip(m.as_slice()) {
            *acc += (x - *acc) * w;
        }
    }
    Ok(ProbVector::from_normalized(mean))
}

pub(crate) fn check_same_len(members: &[ProbVector], k: usize) -> Result<()> {
    if let Some(m) = members.iter().find(|m| m.len() != k) {
        return Err(Error::Shape(format!("member has {} classes, expected {k}", m.len())));
    }
    Ok(())
}

/// Whether the ensemble stores logits or probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Probabilities,
    Logits,
}

/// `M` members x `N` samples x `K` classes, stored row-major as
/// `[member][sample][class]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePredictions {
    members: usize,
    samples: usize,
    classes: usize,
    kind: ValueKind,
    temperature: f64,
    values: Vec<f64>,
}

impl EnsemblePredictions {
    pub fn new(
        members: usize,
        samples: usize,
        classes: usize,
        kind: ValueKind,
        temperature: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if members == 0 || samples == 0 {
            return Err(Error::Shape(format!(
                "need M >= 1 and N >= 1, got M={members} N={samples}"
            )));
        }
        if classes < 2 {
            return Err(Error::Shape(format!("need K >= 2, got {classes}")));
        }
        let expected = members
            .checked_mul(samples)
            .and_then(|x| x.checked_mul(classes))
            .ok_or_else(|| Error::Shape("M*N*K overflows".into()))?;
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} values for {members}x{samples}x{classes}, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::NaN(format!("ensemble value at flat index {pos}")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("ensemble contains infinite values".into()));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        let e = Self {
            members,
            samples,
            classes,
            kind,
            temperature,
            values,
        };
        if kind == ValueKind::Probabilities {
            for m in 0..members {
                for n in 0..samples {
                    ProbVector::new(e.slice(m, n).to_vec())
                        .map_err(|err| Error::InvalidSimplex(format!("member {m}, sample {n}: {err}")))?;
                }
            }
        }
        Ok(e)
    }

    /// Builds a probability ensemble from per-member, per-sample vectors.
    pub fn from_probs(members: &[Vec<ProbVector>]) -> Result<Self> {
        let m = members.len();
        let n = members.first().map_or(0, Vec::len);
        let k = members.first().and_then(|s| s.first()).map_or(0, ProbVector::len);
        let mut values = Vec::with_capacity(m * n * k);
        for member in members {
            if member.len() != n {
                return Err(Error::Shape("members disagree on sample count".into()));
            }
            for p in member {
                if p.len() != k {
                    return Err(Error::Shape("vectors disagree on class count".into()));
                }
                values.extend_from_slice(p.as_slice());
            }
        }
        Self::new(m, n, k, ValueKind::Probabilities, 1.0, values)
    }

    pub fn members(&self) -> usize {
        self.members
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        self.temperature = temperature;
        Ok(self)
    }

    /// Raw values of member `m` on sample `n`.
    pub fn slice(&self, m: usize, n: usize) -> &[f64] {
        let start = (m * self.samples + n) * self.classes;
        &self.values[start..start + self.classes]
    }

    fn check_sample(&self, n: usize) -> Result<()> {
        if n >= self.samples {
            return Err(Error::InvalidArgument(format!(
                "sample {n} out of range (N = {})",
                self.samples
            )));
        }
        Ok(())
    }

    /// Per-member predictive distributions for sample `n`.
    pub fn member_probs(&self, n: usize) -> Result<Vec<ProbVector>> {
        self.check_sample(n)?;
        (0..self.members)
            .map(|m| match self.kind {
                ValueKind::Probabilities => ProbVector::new(self.slice(m, n).to_vec()),
                ValueKind::Logits => Ok(softmax(&LogitVector::new(self.slice(m, n).to_vec(), self.temperature)?)),
            })
            .collect()
    }

    /// Per-member logits for sample `n`. Probability ensembles are mapped
    /// through `ln p` at T = 1.
    pub fn member_logits(&self, n: usize) -> Result<Vec<LogitVector>> {
        self.check_sample(n)?;
        (0..self.members)
            .map(|m| match self.kind {
                ValueKind::Logits => LogitVector::new(self.slice(m, n).to_vec(), self.temperature),
                ValueKind::Probabilities => LogitVector::from_probs(&ProbVector::new(self.slice(m, n).to_vec())?),
            })
            .collect()
    }

    /// A copy with members reordered so that member `i` is the old `perm[i]`.
    pub fn permute_members(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.members {
            return Err(Error::Shape("permutation length differs from M".into()));
        }
        let block = self.samples * self.classes;
        let mut values = Vec::with_capacity(self.values.len());
        for &p in perm {
            values.extend_from_slice(&self.values[p * block..(p + 1) * block]);
        }
        Self::new(
            self.members,
            self.samples,
            self.classes,
            self.kind,
            self.temperature,
            values,
        )
    }
}

/// Posterior predictive mean over members for one sample.
pub fn mean_prob(e: &EnsemblePredictions, sample: usize) -> Result<ProbVector> {
    mean_of(&e.member_probs(sample)?)
}
