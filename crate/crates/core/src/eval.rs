//! Per-sample scoring and AUROC-based detection reports.

use std::cmp::Ordering;
use std::fmt;

use crate::energy::energy_pair;
use crate::error::{Error, Result};
use crate::estimators::{EnsembleSummary, MeasureSpec};
use crate::scoring::ScoringRule;
use crate::simplex::{mean_prob, EnsemblePredictions};

/// Energy-based scores, computed from logits (or `ln p` at T = 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnergyMeasure {
    /// `E(x; E f)`
    OfMean,
    /// `E E(x; f)`
    MeanEnergy,
    /// `(E(x; E f) - E E(x; f)) / T`
    Difference,
}

/// Anything that turns one sample's ensemble into a scalar score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Risk(MeasureSpec),
    Energy(EnergyMeasure),
}

impl Measure {
    /// Parses a CLI measure name. Energy names ignore `rule`.
    pub fn parse(name: &str, rule: ScoringRule) -> Result<Self> {
        Ok(match name {
            "energy-of-mean" => Measure::Energy(EnergyMeasure::OfMean),
            "mean-energy" => Measure::Energy(EnergyMeasure::MeanEnergy),
            "energy-diff" => Measure::Energy(EnergyMeasure::Difference),
            _ => Measure::Risk(MeasureSpec::parse(name, rule)?),
        })
    }

    pub fn name(&self) -> String {
        match self {
            Measure::Risk(s) => s.name(),
            Measure::Energy(EnergyMeasure::OfMean) => "energy-of-mean".into(),
            Measure::Energy(EnergyMeasure::MeanEnergy) => "mean-energy".into(),
            Measure::Energy(EnergyMeasure::Difference) => "energy-diff".into(),
        }
    }

    /// Rule name for reports; energies are tied to the log score.
    pub fn rule_name(&self) -> &'static str {
        match self {
            Measure::Risk(s) => s.rule().name(),
            Measure::Energy(_) => ScoringRule::Log.name(),
        }
    }

    /// Approximation indices for reports. `energy-diff` is the `(3,1)`
    /// excess under the log score; the other energies have none.
    pub fn indices(&self) -> (Option<u8>, Option<u8>) {
        match self {
            Measure::Risk(s) => {
                let (i, j) = s.indices();
                (Some(i), j)
            }
            Measure::Energy(EnergyMeasure::Difference) => (Some(3), Some(1)),
            Measure::Energy(_) => (None, None),
        }
    }

    /// Score for one sample of `e`.
    pub fn score(&self, e: &EnsemblePredictions, sample: usize) -> Result<f64> {
        let v = match self {
            Measure::Risk(spec) => {
                let members = e.member_probs(sample)?;
                EnsembleSummary::new(spec.rule(), &members)?.evaluate(spec.risk())?
            }
            Measure::Energy(kind) => {
                let pair = energy_pair(&e.member_logits(sample)?)?;
                match kind {
                    EnergyMeasure::OfMean => pair.energy_of_mean_logit,
                    EnergyMeasure::MeanEnergy => pair.mean_energy,
                    EnergyMeasure::Difference => pair.difference(),
                }
            }
        };
        if v.is_nan() {
            return Err(Error::NaN(format!("{} at sample {sample}", self.name())));
        }
        Ok(v)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.name(), self.rule_name())
    }
}

impl From<MeasureSpec> for Measure {
    fn from(s: MeasureSpec) -> Self {
        Measure::Risk(s)
    }
}

/// One score per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureResult {
    pub measure: Measure,
    pub scores: Vec<f64>,
}

impl MeasureResult {
    /// `sample_index,score` lines with a header; infinities as `inf`/`-inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_index,score\n");
        for (i, s) in self.scores.iter().enumerate() {
            out.push_str(&format!("{i},{}\n", format_score(*s)));
        }
        out
    }
}

/// Shortest round-trip decimal, with `inf`/`-inf` for infinities.
pub fn format_score(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

/// Scores every sample independently. With the `parallel` feature samples
/// are spread over the current rayon pool; the output is identical either
/// way.
pub fn score_samples(e: &EnsemblePredictions, measure: impl Into<Measure>) -> Result<MeasureResult> {
    let measure = measure.into();
    #[cfg(feature = "parallel")]
    let scores: Result<Vec<f64>> = {
        use rayon::prelude::*;
        (0..e.samples()).into_par_iter().map(|n| measure.score(e, n)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let scores: Result<Vec<f64>> = (0..e.samples()).map(|n| measure.score(e, n)).collect();
    Ok(MeasureResult {
        measure,
        scores: scores?,
    })
}

/// Scores paired with binary labels (`true` = positive).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScores {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl LabeledScores {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::NaN("scores".into()));
        }
        Ok(Self { scores, labels })
    }

    /// Positives and negatives given as separate score lists.
    pub fn from_groups(positives: &[f64], negatives: &[f64]) -> Result<Self> {
        let scores = positives.iter().chain(negatives).copied().collect();
        let labels = std::iter::repeat_n(true, positives.len())
            .chain(std::iter::repeat_n(false, negatives.len()))
            .collect();
        Self::new(scores, labels)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l).count();
        (pos, self.labels.len() - pos)
    }
}

/// AUROC plus the pair counts behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AurocSummary {
    pub auroc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Positive-negative pairs tied at `+inf` or at `-inf`.
    pub indeterminate: u64,
}

/// Mann-Whitney AUROC: the fraction of positive-negative pairs where the
/// positive scores higher, ties counting one half.
pub fn auroc(s: &LabeledScores) -> Result<f64> {
    Ok(auroc_summary(s)?.auroc)
}

/// [`auroc`] with counts. Sorts once, then walks tie groups keeping the
/// number of negatives strictly below, so the pair count is exact.
pub fn auroc_summary(s: &LabeledScores) -> Result<AurocSummary> {
    let (n_pos, n_neg) = s.counts();
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::OneClass { n_pos, n_neg });
    }
    // `+ 0.0` folds -0 into +0 so that total_cmp agrees with `==`.
    let mut order: Vec<(f64, bool)> = s.scores.iter().map(|x| x + 0.0).zip(s.labels.iter().copied()).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Twice the Mann-Whitney U, kept as an integer.
    let mut u2: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut indeterminate: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let v = order[i].0;
        let mut pos = 0u128;
        let mut neg = 0u128;
        while i < order.len() && order[i].0.total_cmp(&v) == Ordering::Equal {
            if order[i].1 {
                pos += 1;
            } else {
                neg += 1;
            }
            i += 1;
        }
        u2 += 2 * pos * neg_below + pos * neg;
        if v.is_infinite() {
            indeterminate += (pos * neg) as u64;
        }
        neg_below += neg;
    }
    let pairs = n_pos as f64 * n_neg as f64;
    Ok(AurocSummary {
        auroc: u2 as f64 / 2.0 / pairs,
        n_pos,
        n_neg,
        indeterminate,
    })
}

pub const REPORT_HEADER: &str = "measure,rule,i,j,auroc,n_pos,n_neg,indeterminate";

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub measure: Measure,
    pub auroc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub indeterminate: u64,
}

impl DetectionReport {
    fn new(measure: Measure, s: AurocSummary) -> Self {
        Self {
            measure,
            auroc: s.auroc,
            n_pos: s.n_pos,
            n_neg: s.n_neg,
            indeterminate: s.indeterminate,
        }
    }

    /// One CSV row matching [`REPORT_HEADER`]; absent indices are empty.
    pub fn csv_row(&self) -> String {
        let (i, j) = self.measure.indices();
        let idx = |x: Option<u8>| x.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.measure.name(),
            self.measure.rule_name(),
            idx(i),
            idx(j),
            format_score(self.auroc),
            self.n_pos,
            self.n_neg,
            self.indeterminate
        )
    }
}

fn check_compatible(a: &EnsemblePredictions, b: &EnsemblePredictions) -> Result<()> {
    if a.classes() != b.classes() {
        return Err(Error::Shape(format!(
            "in-distribution has {} classes, out-of-distribution {}",
            a.classes(),
            b.classes()
        )));
    }
    if a.kind() != b.kind() {
        return Err(Error::Shape(
            "in- and out-of-distribution files store different value kinds".into(),
        ));
    }
    Ok(())
}

/// Out-of-distribution samples are positives, in-distribution negatives.
pub fn ood_detect(
    in_dist: &EnsemblePredictions,
    out_dist: &EnsemblePredictions,
    measure: impl Into<Measure>,
) -> Result<DetectionReport> {
    let measure = measure.into();
    check_compatible(in_dist, out_dist)?;
    let neg = score_samples(in_dist, measure)?.scores;
    let pos = score_samples(out_dist, measure)?.scores;
    let s = LabeledScores::from_groups(&pos, &neg)?;
    Ok(DetectionReport::new(measure, auroc_summary(&s)?))
}

/// Which samples the ensemble gets wrong: argmax of the central label
/// (lowest index on ties) differs from the true label.
pub fn misclassified(e: &EnsemblePredictions, labels: &[usize]) -> Result<Vec<bool>> {
    if labels.len() != e.samples() {
        return Err(Error::Shape(format!(
            "{} labels for {} samples",
            labels.len(),
            e.samples()
        )));
    }
    labels
        .iter()
        .enumerate()
        .map(|(n, &y)| {
            if y >= e.classes() {
                return Err(Error::InvalidArgument(format!(
                    "label {y} at sample {n} is not below K = {}",
                    e.classes()
                )));
            }
            Ok(mean_prob(e, n)?.argmax() != y)
        })
        .collect()
}

/// Misclassified samples are positives.
pub fn misclassification_detect(
    e: &EnsemblePredictions,
    labels: &[usize],
    measure: impl Into<Measure>,
) -> Result<DetectionReport> {
    let measure = measure.into();
    let wrong = misclassified(e, labels)?;
    let n_wrong = wrong.iter().filter(|&&w| w).count();
    if n_wrong == 0 || n_wrong == wrong.len() {
        return Err(Error::DegenerateLabels(format!(
            "{n_wrong} of {} samples misclassified; need both correct and wrong samples",
            wrong.len()
        )));
    }
    let scores = score_samples(e, measure)?.scores;
    Ok(DetectionReport::new(
        measure,
        auroc_summary(&LabeledScores::new(scores, wrong)?)?,
    ))
}

/// Mean and sample standard deviation of AUROCs over groups of ensembles.
pub fn aggregate(reports: &[DetectionReport]) -> Option<(f64, f64)> {
    if reports.len() < 2 {
        return None;
    }
    let n = reports.len() as f64;
    let mean = reports.iter().map(|r| r.auroc).sum::<f64>() / n;
    let var = reports.iter().map(|r| (r.auroc - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{ProbVector, ValueKind};
    use proptest::prelude::*;

    fn brute(s: &LabeledScores) -> f64 {
        let mut wins = 0.0;
        let (p, n) = s.counts();
        for (a, &la) in s.scores().iter().zip(s.labels()) {
            for (b, &lb) in s.scores().iter().zip(s.labels()) {
                if la && !lb {
                    wins += match a.partial_cmp(b).unwrap() {
                        Ordering::Greater => 1.0,
                        Ordering::Equal => 0.5,
                        Ordering::Less => 0.0,
                    };
                }
            }
        }
        wins / (p as f64 * n as f64)
    }

    #[test]
    fn auroc_examples() {
        let s = LabeledScores::from_groups(&[0.3, 0.4], &[0.1, 0.2]).unwrap();
        assert_eq!(auroc(&s).unwrap(), 1.0);
        let s = LabeledScores::from_groups(&[0.8, 0.5], &[0.5, 0.2]).unwrap();
        assert_eq!(auroc(&s).unwrap(), 0.875);
        let s = LabeledScores::from_groups(&[0.1, 0.5, 0.5], &[0.5, 0.1, 0.5]).unwrap();
        assert_eq!(auroc(&s).unwrap(), 0.5);
        assert!(matches!(
            auroc(&LabeledScores::from_groups(&[1.0], &[]).unwrap()),
            Err(Error::OneClass { n_pos: 1, n_neg: 0 })
        ));
        assert!(LabeledScores::new(vec![f64::NAN], vec![true]).is_err());
        assert!(LabeledScores::new(vec![1.0], vec![true, false]).is_err());
    }

    #[test]
    fn infinite_ties_counted() {
        let inf = f64::INFINITY;
        let s = LabeledScores::from_groups(&[inf, inf, 1.0], &[inf, 0.0]).unwrap();
        let r = auroc_summary(&s).unwrap();
        assert_eq!(r.indeterminate, 2);
        assert_eq!(r.auroc, brute(&s));
    }

    fn two_member(samples: &[[f64; 2]]) -> EnsemblePredictions {
        let a: Vec<ProbVector> = samples
            .iter()
            .map(|_| ProbVector::new(vec![0.5, 0.5]).unwrap())
            .collect();
        let b: Vec<ProbVector> = samples.iter().map(|s| ProbVector::new(s.to_vec()).unwrap()).collect();
        EnsemblePredictions::from_probs(&[a, b]).unwrap()
    }

    #[test]
    fn score_samples_examples() {
        let e = two_member(&[[0.9, 0.1]]);
        let r = score_samples(&e, MeasureSpec::bayes(2, ScoringRule::Log).unwrap()).unwrap();
        assert!((r.scores[0] - 0.610_864_302_054_893_5).abs() < 1e-12);
        let same = EnsemblePredictions::from_probs(&vec![vec![ProbVector::new(vec![0.3, 0.7]).unwrap()]; 3]).unwrap();
        let r = score_samples(&same, MeasureSpec::excess(1, 1, ScoringRule::Log).unwrap()).unwrap();
        assert_eq!(r.scores, vec![0.0]);
        let swapped = e.permute_members(&[1, 0]).unwrap();
        for spec in MeasureSpec::all_for(ScoringRule::Log) {
            assert_eq!(
                score_samples(&e, spec).unwrap().scores,
                score_samples(&swapped, spec).unwrap().scores
            );
        }
        for name in ["energy-of-mean", "mean-energy", "energy-diff"] {
            let m = Measure::parse(name, ScoringRule::Log).unwrap();
            assert_eq!(
                score_samples(&e, m).unwrap().scores,
                score_samples(&swapped, m).unwrap().scores
            );
        }
        assert_eq!(
            score_samples(&e, Measure::parse("energy-diff", ScoringRule::Log).unwrap())
                .unwrap()
                .scores
                .len(),
            1
        );
    }

    #[test]
    fn csv_formats() {
        let r = MeasureResult {
            measure: Measure::parse("exc11", ScoringRule::Log).unwrap(),
            scores: vec![0.5, f64::INFINITY, f64::NEG_INFINITY],
        };
        assert_eq!(r.to_csv(), "sample_index,score\n0,0.5\n1,inf\n2,-inf\n");
        let d = DetectionReport {
            measure: r.measure,
            auroc: 0.75,
            n_pos: 3,
            n_neg: 4,
            indeterminate: 0,
        };
        assert_eq!(d.csv_row(), "exc11,log,1,1,0.75,3,4,0");
        let d = DetectionReport {
            measure: Measure::parse("mean-energy", ScoringRule::Brier).unwrap(),
            ..d
        };
        assert_eq!(d.csv_row(), "mean-energy,log,,,0.75,3,4,0");
    }

    #[test]
    fn ood_examples() {
        let inn = two_member(&[[0.5, 0.5], [0.6, 0.4], [0.55, 0.45]]);
        let out = two_member(&[[0.99, 0.01], [0.01, 0.99]]);
        let spec = MeasureSpec::excess(1, 2, ScoringRule::Log).unwrap();
        assert_eq!(ood_detect(&inn, &out, spec).unwrap().auroc, 1.0);
        assert_eq!(ood_detect(&inn, &inn, spec).unwrap().auroc, 0.5);
        let other = EnsemblePredictions::new(1, 1, 3, ValueKind::Probabilities, 1.0, vec![0.2, 0.3, 0.5]).unwrap();
        assert!(ood_detect(&inn, &other, spec).is_err());
    }

    #[test]
    fn misclassification_examples() {
        let e = two_member(&[[0.9, 0.1], [0.2, 0.8], [0.52, 0.48]]);
        let spec = MeasureSpec::bayes(1, ScoringRule::Log).unwrap();
        assert!(matches!(
            misclassification_detect(&e, &[0, 1, 0], spec),
            Err(Error::DegenerateLabels(_))
        ));
        // The third sample is wrong and the most uncertain.
        let r = misclassification_detect(&e, &[0, 1, 1], spec).unwrap();
        assert_eq!((r.auroc, r.n_pos, r.n_neg), (1.0, 1, 2));
        assert!(misclassification_detect(&e, &[0, 1], spec).is_err());
        assert!(misclassification_detect(&e, &[0, 1, 2], spec).is_err());
    }

    #[test]
    fn aggregate_needs_two() {
        let m = Measure::parse("exc11", ScoringRule::Log).unwrap();
        let r = |a| DetectionReport {
            measure: m,
            auroc: a,
            n_pos: 1,
            n_neg: 1,
            indeterminate: 0,
        };
        assert_eq!(aggregate(&[r(0.5)]), None);
        let (mean, sd) = aggregate(&[r(0.5), r(0.7)]).unwrap();
        assert!((mean - 0.6).abs() < 1e-15 && (sd - 0.1414213562373095).abs() < 1e-12);
    }

    fn tied_scores() -> impl Strategy<Value = LabeledScores> {
        prop::collection::vec(
            (
                prop::sample::select(vec![f64::NEG_INFINITY, -1.0, -0.0, 0.0, 0.5, 1.0, 2.0, f64::INFINITY]),
                any::<bool>(),
            ),
            2..60,
        )
        .prop_filter("both classes", |v| v.iter().any(|x| x.1) && v.iter().any(|x| !x.1))
        .prop_map(|v| {
            let (s, l) = v.into_iter().unzip();
            LabeledScores::new(s, l).unwrap()
        })
    }

    proptest! {
        #[test]
        fn sort_equals_brute_force(s in tied_scores()) {
            prop_assert_eq!(auroc(&s).unwrap(), brute(&s));
        }

        #[test]
        fn swap_and_monotone(s in tied_scores()) {
            let a = auroc(&s).unwrap();
            let flipped = LabeledScores::new(s.scores().to_vec(), s.labels().iter().map(|l| !l).collect()).unwrap();
            prop_assert!((auroc(&flipped).unwrap() - (1.0 - a)).abs() <= 1e-15);
            let mapped = LabeledScores::new(s.scores().iter().map(|x| x.atan() * 3.0 + 1.0).collect(), s.labels().to_vec()).unwrap();
            prop_assert_eq!(auroc(&mapped).unwrap(), a);
        }
    }
}
