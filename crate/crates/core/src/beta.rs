//! Conjugate Beta-Bernoulli model with closed-form epistemic measures.
//!
//! With posterior `theta ~ Beta(alpha, beta)` and members `(theta, 1 - theta)`:
//! EPKL is `1/(alpha+beta)`, MI and RMI have digamma closed forms that add up
//! to EPKL, and EPBS is twice the posterior variance. [`mc_validate`] checks
//! the generic estimators against these forms by sampling the posterior.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta as BetaDist, Distribution};

use crate::error::{Error, Result};
use crate::estimators::{Approx, EnsembleSummary};
use crate::scoring::ScoringRule;
use crate::simplex::ProbVector;

/// Draws per RNG stream in [`mc_validate`]. Shard `s` covers draws
/// `s * SHARD_DRAWS ..` and uses stream `s` of the seeded ChaCha20 generator,
/// so the draw sequence does not depend on the number of worker threads.
pub const SHARD_DRAWS: usize = 1 << 16;

/// Minimum draw count accepted by [`mc_validate`].
pub const MIN_DRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPosterior {
    alpha: f64,
    beta: f64,
}

impl BetaPosterior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Beta parameters must be positive and finite, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }
}

/// `Beta(alpha + x, beta + n - x)`.
pub fn posterior_update(prior: BetaPosterior, successes: u64, trials: u64) -> Result<BetaPosterior> {
    if successes > trials {
        return Err(Error::InvalidArgument(format!(
            "successes ({successes}) exceed trials ({trials})"
        )));
    }
    BetaPosterior::new(prior.alpha + successes as f64, prior.beta + (trials - successes) as f64)
}

/// Digamma function for `x > 0`.
///
/// Uses `psi(x) = psi(x + 1) - 1/x` until `x >= 10`, then the asymptotic
/// expansion with Bernoulli terms through `x^-12`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "digamma needs a positive finite argument, got {x}"
        )));
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < 10.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    // B_2k / (2k), k = 1..6
    let series = r
        * (1.0 / 12.0
            - r * (1.0 / 120.0 - r * (1.0 / 252.0 - r * (1.0 / 240.0 - r * (1.0 / 132.0 - r * (691.0 / 32760.0))))));
    Ok(shift + x.ln() - 0.5 / x - series)
}

fn psi(x: f64) -> f64 {
    digamma(x).expect("Beta parameters are positive")
}

/// Expected pairwise KL divergence, `1 / (alpha + beta)`.
pub fn epkl(p: &BetaPosterior) -> f64 {
    1.0 / (p.alpha + p.beta)
}

/// Mutual information between label and `theta`.
pub fn mutual_information(p: &BetaPosterior) -> f64 {
    let (a, b) = (p.alpha, p.beta);
    let s = a + b;
    let ps = psi(s);
    1.0 / s + a / s * (psi(a) - ps - a.ln()) + b / s * (psi(b) - ps - b.ln()) + s.ln()
}

/// Reverse mutual information.
pub fn reverse_mutual_information(p: &BetaPosterior) -> f64 {
    let (a, b) = (p.alpha, p.beta);
    let s = a + b;
    let ps = psi(s);
    a / s * (a.ln() - psi(a) + ps) + b / s * (b.ln() - psi(b) + ps) - s.ln()
}

/// Expected pairwise Brier score, `2 var theta`.
pub fn epbs(p: &BetaPosterior) -> f64 {
    2.0 * p.variance()
}

/// One Monte Carlo estimate next to its closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub closed_form: f64,
}

impl McEstimate {
    pub fn abs_error(&self) -> f64 {
        (self.estimate - self.closed_form).abs()
    }

    /// Error in units of the standard error.
    pub fn z_score(&self) -> f64 {
        self.abs_error() / self.std_error
    }

    pub fn within(&self, sigmas: f64) -> bool {
        self.abs_error() <= sigmas * self.std_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McReport {
    pub posterior: BetaPosterior,
    pub draws: usize,
    pub seed: u64,
    /// `Excess(1,1)` under the log score.
    pub epkl: McEstimate,
    /// `Excess(1,2)` under the log score, against MI.
    pub bi: McEstimate,
    /// `Excess(2,1)` under the log score, against RMI.
    pub rbi: McEstimate,
    /// `Excess(1,1)` under Brier against `2 * epbs`: the Brier score here
    /// sums over both classes, which doubles the per-class EPBS.
    pub brier_epbd: McEstimate,
}

impl McReport {
    pub fn estimates(&self) -> [(&'static str, &McEstimate); 4] {
        [
            ("epkl", &self.epkl),
            ("mi", &self.bi),
            ("rmi", &self.rbi),
            ("brier_epbd", &self.brier_epbd),
        ]
    }

    pub fn all_within(&self, sigmas: f64) -> bool {
        self.estimates().iter().all(|(_, e)| e.within(sigmas))
    }
}

fn draw_shard(dist: &BetaDist<f64>, seed: u64, shard: usize, len: usize) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(shard as u64);
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let t = dist.sample(&mut rng);
        // Exact 0 or 1 would put a member on the boundary where KL is
        // infinite; those have probability zero under the posterior.
        if t > 0.0 && t < 1.0 {
            out.push(t);
        }
    }
    out
}

/// Posterior draws of `theta`, reproducible for a given `(seed, draws)`.
pub fn posterior_draws(p: &BetaPosterior, draws: usize, seed: u64) -> Vec<f64> {
    let dist = BetaDist::new(p.alpha, p.beta).expect("validated parameters");
    let shards = draws.div_ceil(SHARD_DRAWS);
    let len = |s: usize| SHARD_DRAWS.min(draws - s * SHARD_DRAWS);
    #[cfg(feature = "parallel")]
    let chunks: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..shards)
            .into_par_iter()
            .map(|s| draw_shard(&dist, seed, s, len(s)))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let chunks: Vec<Vec<f64>> = (0..shards).map(|s| draw_shard(&dist, seed, s, len(s))).collect();
    chunks.concat()
}

fn mean_sd_err(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

/// Samples `theta`, runs the generic estimators on the members
/// `(theta, 1 - theta)` and compares against the closed forms.
///
/// Standard errors come from the sample variance of each estimator's
/// first-order influence terms, so "within 3 sigma" is a calibrated check.
pub fn mc_validate(p: &BetaPosterior, draws: usize, seed: u64) -> Result<McReport> {
    if draws < MIN_DRAWS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_DRAWS} draws, got {draws}"
        )));
    }
    let thetas = posterior_draws(p, draws, seed);
    let members: Vec<ProbVector> = thetas
        .iter()
        .map(|&t| ProbVector::new(vec![t, 1.0 - t]))
        .collect::<Result<_>>()?;

    let mut log = EnsembleSummary::new(ScoringRule::Log, &members)?;
    let epkl_hat = log.excess(Approx::Bayesian, Approx::Bayesian)?;
    let bi_hat = log.excess(Approx::Bayesian, Approx::CentralLabel)?;
    let rbi_hat = log.excess(Approx::CentralLabel, Approx::Bayesian)?;
    let mut brier = EnsembleSummary::new(ScoringRule::Brier, &members)?;
    let brier_hat = brier.excess(Approx::Bayesian, Approx::Bayesian)?;

    // Moments used by the influence terms.
    let n = thetas.len() as f64;
    let mean = |f: &dyn Fn(f64) -> f64| thetas.iter().map(|&t| f(t)).sum::<f64>() / n;
    let m_t = mean(&|t| t);
    let m_lt = mean(&|t| t.ln());
    let m_l1t = mean(&|t| (1.0 - t).ln());
    let m_neg_h = mean(&|t| t * t.ln() + (1.0 - t) * (1.0 - t).ln());
    let m_t2 = mean(&|t| t * t);
    let var_t = m_t2 - m_t * m_t;
    let hat = [m_t, 1.0 - m_t];

    let kl = |a: [f64; 2], b: [f64; 2]| ScoringRule::Log.excess_risk_raw(&a, &b);
    let epkl_g: Vec<f64> = thetas
        .iter()
        .map(|&t| {
            let neg_h = t * t.ln() + (1.0 - t) * (1.0 - t).ln();
            // E_b KL(a || b) + E_b KL(b || a)
            let fwd = neg_h - (t * m_lt + (1.0 - t) * m_l1t);
            let rev = m_neg_h - (m_t * t.ln() + (1.0 - m_t) * (1.0 - t).ln());
            fwd + rev
        })
        .collect();
    let bi_g: Vec<f64> = thetas.iter().map(|&t| kl([t, 1.0 - t], hat)).collect();
    // G'(eta_hat) - E G'(eta) under the log score, dotted with eta_theta.
    let (c0, c1) = (hat[0].ln() - m_lt, hat[1].ln() - m_l1t);
    let rbi_g: Vec<f64> = thetas
        .iter()
        .map(|&t| kl(hat, [t, 1.0 - t]) + c0 * t + c1 * (1.0 - t))
        .collect();
    // E_b ||a - b||^2 twice, with ||a - b||^2 = 2 (t_a - t_b)^2.
    let brier_g: Vec<f64> = thetas.iter().map(|&t| 4.0 * ((t - m_t) * (t - m_t) + var_t)).collect();

    Ok(McReport {
        posterior: *p,
        draws,
        seed,
        epkl: McEstimate {
            estimate: epkl_hat,
            std_error: mean_sd_err(&epkl_g),
            closed_form: epkl(p),
        },
        bi: McEstimate {
            estimate: bi_hat,
            std_error: mean_sd_err(&bi_g),
            closed_form: mutual_information(p),
        },
        rbi: McEstimate {
            estimate: rbi_hat,
            std_error: mean_sd_err(&rbi_g),
            closed_form: reverse_mutual_information(p),
        },
        brier_epbd: McEstimate {
            estimate: brier_hat,
            std_error: mean_sd_err(&brier_g),
            closed_form: 2.0 * epbs(p),
        },
    })
}

/// One row of a posterior-concentration sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub alpha_prior: f64,
    pub beta_prior: f64,
    pub n: u64,
    pub successes: u64,
    pub posterior: BetaPosterior,
    pub epkl: f64,
    pub mi: f64,
    pub rmi: f64,
    pub epbs: f64,
}

pub const SWEEP_HEADER: &str = "alpha_prior,beta_prior,n,successes,alpha,beta,epkl,mi,rmi,epbs";

impl SweepRow {
    pub fn new(prior: BetaPosterior, successes: u64, n: u64) -> Result<Self> {
        let post = posterior_update(prior, successes, n)?;
        Ok(Self {
            alpha_prior: prior.alpha,
            beta_prior: prior.beta,
            n,
            successes,
            posterior: post,
            epkl: epkl(&post),
            mi: mutual_information(&post),
            rmi: reverse_mutual_information(&post),
            epbs: epbs(&post),
        })
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.alpha_prior,
            self.beta_prior,
            self.n,
            self.successes,
            self.posterior.alpha,
            self.posterior.beta,
            self.epkl,
            self.mi,
            self.rmi,
            self.epbs
        )
    }
}

/// Priors used for the default sweep.
pub const SWEEP_PRIORS: [(f64, f64); 3] = [(1.0, 1.0), (3.0, 17.0), (9.0, 1.0)];

/// Dataset sizes used for the default sweep.
pub const SWEEP_SIZES: [u64; 12] = [0, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000];

/// Measures for each prior and dataset size, with `round(rate * n)`
/// successes out of `n`.
pub fn sweep(priors: &[(f64, f64)], sizes: &[u64], rate: f64) -> Result<Vec<SweepRow>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("success rate {rate} not in [0, 1]")));
    }
    let mut rows = Vec::new();
    for &(a, b) in priors {
        let prior = BetaPosterior::new(a, b)?;
        for &n in sizes {
            let x = (rate * n as f64).round() as u64;
            rows.push(SweepRow::new(prior, x, n)?);
        }
    }
    Ok(rows)
}
