//! `uqt`: uncertainty measures, identity audits, detection AUROCs and the
//! Beta-Bernoulli oracle from the command line.
//!
//! Exit codes: 0 success, 1 identity check failed, 2 invalid input,
//! 3 undefined measure for the rule, 4 degenerate or one-class labels.
//! Errors print one line, `error[E<code>]: <message>`, to stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uqt_core::beta::{self, BetaPosterior};
use uqt_core::estimators::{identity_audit, jensen_check, Residual};
use uqt_core::eval::{
    aggregate, format_score, misclassification_detect, ood_detect, score_samples, DetectionReport, Measure,
    REPORT_HEADER,
};
use uqt_core::io::{ensemble_from_csv, labels_from_csv, read_ensemble, write_ensemble};
use uqt_core::{EnsemblePredictions, Error, ScoringRule, ValueKind};

#[derive(Parser)]
#[command(
    name = "uqt",
    version,
    about = "Risk-based uncertainty measures for ensemble predictions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-sample scores of one measure, as `sample_index,score` CSV.
    Measures(MeasuresArgs),
    /// Audit the relations between estimates on every sample.
    Identities(IdentitiesArgs),
    /// Out-of-distribution detection AUROC.
    Auroc(AurocArgs),
    /// Misclassification detection AUROC.
    Misclassification(MisclassArgs),
    /// Closed-form Beta-Bernoulli measures, optionally checked by Monte Carlo.
    Oracle(OracleArgs),
    /// Convert a `member,sample,class,value` CSV into the binary format.
    ConvertCsv(ConvertArgs),
}

#[derive(Args)]
struct Common {
    /// Scoring rule: log, brier, spherical, zero-one or neg-log.
    #[arg(long)]
    rule: String,
    /// Overrides the temperature stored in the file header.
    #[arg(long)]
    temperature: Option<f64>,
    /// Write output here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MeasuresArgs {
    #[arg(long)]
    input: PathBuf,
    /// bayes1..3, exc11..exc33, tot11..tot33, energy-of-mean, mean-energy or energy-diff.
    #[arg(long)]
    measure: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct IdentitiesArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct AurocArgs {
    /// In-distribution ensemble; repeat to evaluate several groups.
    #[arg(long = "in-dist", required = true)]
    in_dist: Vec<PathBuf>,
    /// Out-of-distribution ensemble, paired with `--in-dist` by position.
    #[arg(long = "out-dist", required = true)]
    out_dist: Vec<PathBuf>,
    #[arg(long)]
    measure: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct MisclassArgs {
    #[arg(long)]
    input: PathBuf,
    /// One class index per sample, or `index,label` rows.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    measure: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 1.0)]
    alpha_prior: f64,
    #[arg(long, default_value_t = 1.0)]
    beta_prior: f64,
    /// Number of Bernoulli trials observed.
    #[arg(long, default_value_t = 0)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    successes: u64,
    /// Posterior draws for the Monte Carlo check; 0 skips it.
    #[arg(long, default_value_t = 0)]
    mc_draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit the prior x dataset-size sweep instead of a single posterior.
    #[arg(long)]
    sweep: bool,
    /// Success rate used by `--sweep`.
    #[arg(long, default_value_t = 0.9)]
    rate: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Probs,
    Logits,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Undefined(_) | Error::LogCentralUndefined | Error::SphericalCentralUndefined(_) => 3,
            Error::OneClass { .. } | Error::DegenerateLabels(_) => 4,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn validation(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

type CliResult = Result<u8, Failure>;

fn parse_rule(s: &str) -> Result<ScoringRule, Failure> {
    s.parse::<ScoringRule>()
        .map_err(|_| validation(format!("unknown rule '{s}'")))
}

fn load(path: &Path, temperature: Option<f64>) -> Result<EnsemblePredictions, Failure> {
    let e = read_ensemble(path)?;
    Ok(match temperature {
        Some(t) => e.with_temperature(t)?,
        None => e,
    })
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| validation(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| validation(format!("stdout: {e}"))),
    }
}

fn cmd_measures(a: MeasuresArgs) -> CliResult {
    let rule = parse_rule(&a.common.rule)?;
    let measure = Measure::parse(&a.measure, rule)?;
    let e = load(&a.input, a.common.temperature)?;
    let r = score_samples(&e, measure)?;
    emit(a.common.output.as_deref(), &r.to_csv())?;
    Ok(0)
}

#[derive(Default, Clone)]
struct Tally {
    max: f64,
    checked: usize,
    indeterminate: usize,
    skipped: usize,
}

fn cmd_identities(a: IdentitiesArgs) -> CliResult {
    let rule = parse_rule(&a.common.rule)?;
    if !(a.tolerance >= 0.0) {
        return Err(validation("tolerance must be nonnegative"));
    }
    let e = load(&a.input, a.common.temperature)?;
    let mut names: Vec<&'static str> = Vec::new();
    let mut tallies: Vec<Tally> = Vec::new();
    let mut jensen = Tally::default();
    for n in 0..e.samples() {
        let members = e.member_probs(n)?;
        let report = identity_audit(&members, rule)?;
        if names.is_empty() {
            names = report.checks.iter().map(|c| c.name).collect();
            tallies = vec![Tally::default(); names.len()];
        }
        for (t, c) in tallies.iter_mut().zip(&report.checks) {
            match c.residual {
                Residual::Value(v) => {
                    t.max = t.max.max(v);
                    t.checked += 1;
                }
                Residual::Indeterminate => t.indeterminate += 1,
                Residual::Skipped => t.skipped += 1,
            }
        }
        let j = jensen_check(&members, rule)?;
        jensen.max = jensen.max.max(j.outer - j.inner);
        jensen.checked += 1;
    }
    let mut out = String::from("identity,max_residual,checked,indeterminate,skipped\n");
    let mut ok = true;
    let rows = names
        .iter()
        .zip(&tallies)
        .chain(std::iter::once((&"jensen: bayes1 - bayes2 <= 0", &jensen)));
    for (name, t) in rows {
        if t.max > a.tolerance {
            ok = false;
        }
        out.push_str(&format!(
            "{name},{},{},{},{}\n",
            format_score(t.max),
            t.checked,
            t.indeterminate,
            t.skipped
        ));
    }
    emit(a.common.output.as_deref(), &out)?;
    if ok {
        Ok(0)
    } else {
        eprintln!("error[E1]: identity residual above tolerance {}", a.tolerance);
        Ok(1)
    }
}

fn cmd_auroc(a: AurocArgs) -> CliResult {
    let rule = parse_rule(&a.common.rule)?;
    let measure = Measure::parse(&a.measure, rule)?;
    if a.in_dist.len() != a.out_dist.len() {
        return Err(validation(format!(
            "{} --in-dist files but {} --out-dist files",
            a.in_dist.len(),
            a.out_dist.len()
        )));
    }
    let mut reports: Vec<DetectionReport> = Vec::new();
    for (i, o) in a.in_dist.iter().zip(&a.out_dist) {
        let inn = load(i, a.common.temperature)?;
        let out = load(o, a.common.temperature)?;
        reports.push(ood_detect(&inn, &out, measure)?);
    }
    emit(a.common.output.as_deref(), &report_table(&reports))?;
    Ok(0)
}

/// One row per group; with two or more groups, an extra `group=mean` row
/// and an `auroc_std` column.
fn report_table(reports: &[DetectionReport]) -> String {
    match aggregate(reports) {
        None => format!("{REPORT_HEADER}\n{}\n", reports[0].csv_row()),
        Some((mean, sd)) => {
            let mut out = format!("group,{REPORT_HEADER},auroc_std\n");
            for (g, r) in reports.iter().enumerate() {
                out.push_str(&format!("{g},{},\n", r.csv_row()));
            }
            let first = &reports[0];
            let summary = DetectionReport {
                auroc: mean,
                n_pos: reports.iter().map(|r| r.n_pos).sum(),
                n_neg: reports.iter().map(|r| r.n_neg).sum(),
                indeterminate: reports.iter().map(|r| r.indeterminate).sum(),
                ..first.clone()
            };
            out.push_str(&format!("mean,{},{}\n", summary.csv_row(), format_score(sd)));
            out
        }
    }
}

fn cmd_misclassification(a: MisclassArgs) -> CliResult {
    let rule = parse_rule(&a.common.rule)?;
    let measure = Measure::parse(&a.measure, rule)?;
    let e = load(&a.input, a.common.temperature)?;
    let text = fs::read_to_string(&a.labels).map_err(|err| validation(format!("{}: {err}", a.labels.display())))?;
    let labels = labels_from_csv(&text)?;
    let r = misclassification_detect(&e, &labels, measure)?;
    emit(a.common.output.as_deref(), &report_table(&[r]))?;
    Ok(0)
}

fn cmd_oracle(a: OracleArgs) -> CliResult {
    let prior = BetaPosterior::new(a.alpha_prior, a.beta_prior)?;
    if a.sweep {
        let rows = beta::sweep(&[(a.alpha_prior, a.beta_prior)], &beta::SWEEP_SIZES, a.rate)?;
        let mut out = format!("{}\n", beta::SWEEP_HEADER);
        for r in rows {
            out.push_str(&r.to_csv());
            out.push('\n');
        }
        emit(a.output.as_deref(), &out)?;
        return Ok(0);
    }
    let post = beta::posterior_update(prior, a.successes, a.n)?;
    let mc = if a.mc_draws > 0 {
        Some(beta::mc_validate(&post, a.mc_draws, a.seed)?)
    } else {
        None
    };
    let mut out = String::from("measure,alpha,beta,closed_form,mc_estimate,mc_std_error\n");
    let row = |name: &str, closed: f64, est: Option<&beta::McEstimate>| {
        let (e, s) = est.map_or((String::new(), String::new()), |m| {
            (format_score(m.estimate), format_score(m.std_error))
        });
        format!(
            "{name},{},{},{},{e},{s}\n",
            post.alpha(),
            post.beta(),
            format_score(closed)
        )
    };
    out.push_str(&row("epkl", beta::epkl(&post), mc.as_ref().map(|r| &r.epkl)));
    out.push_str(&row("mi", beta::mutual_information(&post), mc.as_ref().map(|r| &r.bi)));
    out.push_str(&row(
        "rmi",
        beta::reverse_mutual_information(&post),
        mc.as_ref().map(|r| &r.rbi),
    ));
    out.push_str(&row("epbs", beta::epbs(&post), None));
    out.push_str(&row(
        "brier_epbd",
        2.0 * beta::epbs(&post),
        mc.as_ref().map(|r| &r.brier_epbd),
    ));
    emit(a.output.as_deref(), &out)?;
    Ok(0)
}

fn cmd_convert(a: ConvertArgs) -> CliResult {
    let text = fs::read_to_string(&a.input).map_err(|e| validation(format!("{}: {e}", a.input.display())))?;
    let kind = match a.kind {
        KindArg::Probs => ValueKind::Probabilities,
        KindArg::Logits => ValueKind::Logits,
    };
    let e = ensemble_from_csv(&text, kind, a.temperature)?;
    write_ensemble(&a.output, &e)?;
    Ok(0)
}

/// Honours `UQT_THREADS` (0 or unset = rayon's default).
fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("UQT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| validation(format!("UQT_THREADS must be a nonnegative integer, got '{v}'")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| validation(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    configure_threads()?;
    match cli.command {
        Command::Measures(a) => cmd_measures(a),
        Command::Identities(a) => cmd_identities(a),
        Command::Auroc(a) => cmd_auroc(a),
        Command::Misclassification(a) => cmd_misclassification(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::ConvertCsv(a) => cmd_convert(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("error[E2]: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error[E{}]: {}", f.code, f.message.replace('\n', " "));
            ExitCode::from(f.code)
        }
    }
}
