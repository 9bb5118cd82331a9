//! Monte Carlo benchmarking of control policies and figure-data export.
//!
//! Episode `i` of every evaluation draws from stream `i` of the master seed,
//! so compared policies see common random numbers and results do not depend
//! on how episodes are scheduled across threads. Statistics are computed
//! from exact integer sums.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::policy::PolicySpec;
use crate::probability::{ProblemSpec, TransitionModel};
use crate::simulator::{
    episode_length, policy_thetas, EpisodeOutcome, RngSeed, Start, DEFAULT_STEP_CAP,
};
use crate::solver::{backward_induction, greedy_policy, policy_evaluation, ValueFunction};

/// Start states used for the value-function marks.
pub const MARK_STARTS: [usize; 4] = [5, 10, 22, 45];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalStart {
    State(usize),
    /// Uniform random bitstring.
    Random,
}

impl EvalStart {
    fn to_start(self) -> Start {
        match self {
            EvalStart::State(s) => Start::State(s),
            EvalStart::Random => Start::Random,
        }
    }
}

impl fmt::Display for EvalStart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalStart::State(s) => write!(f, "{s}"),
            EvalStart::Random => write!(f, "random"),
        }
    }
}

/// Count, mean and sample standard deviation of step counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
}

impl StepStats {
    pub fn from_steps(steps: &[u64]) -> Self {
        let runs = steps.len();
        if runs == 0 {
            return Self {
                runs,
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let sum: u128 = steps.iter().map(|&x| x as u128).sum();
        let sum_sq: u128 = steps.iter().map(|&x| (x as u128) * (x as u128)).sum();
        let n = runs as u128;
        let mean = sum as f64 / runs as f64;
        let std = if runs < 2 {
            0.0
        } else {
            // n * sum_sq - sum^2 is exact in integers.
            let centred = n * sum_sq - sum * sum;
            (centred as f64 / (n * (n - 1)) as f64).sqrt()
        };
        Self { runs, mean, std }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.std / (self.runs as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyBenchmark {
    pub label: String,
    pub start: EvalStart,
    pub seed: u64,
    /// Statistics over completed (non-truncated) episodes.
    pub stats: StepStats,
    pub truncated: usize,
    /// Statistics grouped by realised start state.
    pub by_start: BTreeMap<usize, StepStats>,
    /// Per-episode outcomes in episode order.
    pub episodes: Vec<EpisodeOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkOptions {
    pub runs: usize,
    pub seed: u64,
    pub start: EvalStart,
    pub step_cap: u64,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            runs: 2000,
            seed: 42,
            start: EvalStart::Random,
            step_cap: DEFAULT_STEP_CAP,
        }
    }
}

/// Runs `options.runs` seeded episodes of `policy` and summarises their lengths.
pub fn monte_carlo_eval(
    spec: &ProblemSpec,
    label: &str,
    policy: &PolicySpec,
    options: &BenchmarkOptions,
) -> Result<PolicyBenchmark> {
    if options.runs == 0 {
        return Err(Error::Domain("runs must be at least 1".into()));
    }
    let thetas = policy_thetas(policy, spec)?;
    let start = options.start.to_start();
    let episodes: Vec<EpisodeOutcome> = (0..options.runs as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngSeed::new(options.seed, i).rng();
            episode_length(&thetas, &start, &mut rng, options.step_cap)
        })
        .collect::<Result<_>>()?;

    let completed: Vec<&EpisodeOutcome> = episodes.iter().filter(|e| !e.truncated).collect();
    let truncated = episodes.len() - completed.len();
    if completed.is_empty() {
        return Err(Error::AllTruncated { runs: options.runs });
    }
    let steps: Vec<u64> = completed.iter().map(|e| e.steps).collect();
    let mut grouped: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for e in &completed {
        grouped.entry(e.start_state).or_default().push(e.steps);
    }
    Ok(PolicyBenchmark {
        label: label.to_string(),
        start: options.start,
        seed: options.seed,
        stats: StepStats::from_steps(&steps),
        truncated,
        by_start: grouped
            .into_iter()
            .map(|(s, v)| (s, StepStats::from_steps(&v)))
            .collect(),
        episodes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub seed: u64,
    pub entries: Vec<PolicyBenchmark>,
}

/// Evaluates every policy with the same per-episode streams.
pub fn compare_policies(
    spec: &ProblemSpec,
    policies: &[(String, PolicySpec)],
    options: &BenchmarkOptions,
) -> Result<BenchmarkReport> {
    if policies.is_empty() {
        return Err(Error::Domain("no policies to compare".into()));
    }
    let entries = policies
        .iter()
        .map(|(label, policy)| monte_carlo_eval(spec, label, policy, options))
        .collect::<Result<_>>()?;
    Ok(BenchmarkReport {
        seed: options.seed,
        entries,
    })
}

impl BenchmarkReport {
    /// CSV with header `policy,start,runs,mean,std,truncated`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "policy,start,runs,mean,std,truncated")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                e.label,
                e.start,
                e.stats.runs,
                sig17(e.stats.mean),
                sig17(e.stats.std),
                e.truncated
            )?;
        }
        Ok(())
    }

    /// Policies as columns, average and standard deviation as rows.
    pub fn text_table(&self) -> String {
        let width = self
            .entries
            .iter()
            .map(|e| e.label.len())
            .max()
            .unwrap_or(0)
            .max(10);
        let mut out = String::new();
        let row = |out: &mut String, name: &str, cells: Vec<String>| {
            out.push_str(&format!("{name:<20}|"));
            for c in cells {
                out.push_str(&format!(" {c:>width$}"));
            }
            out.push('\n');
        };
        row(
            &mut out,
            "Policy",
            self.entries.iter().map(|e| e.label.clone()).collect(),
        );
        out.push_str(&format!(
            "{}+{}\n",
            "-".repeat(20),
            "-".repeat((width + 1) * self.entries.len())
        ));
        row(
            &mut out,
            "Average",
            self.entries
                .iter()
                .map(|e| format!("{:.1}", e.stats.mean))
                .collect(),
        );
        row(
            &mut out,
            "Standard Deviation",
            self.entries
                .iter()
                .map(|e| format!("{:.1}", e.stats.std))
                .collect(),
        );
        out
    }
}

/// Mean over non-terminal states of `(V*(s) - V^pi(s)) / |V*(s)|`.
/// Infinite if the policy never terminates from some state.
pub fn mean_relative_suboptimality(
    model: &TransitionModel,
    policy: &PolicySpec,
    optimal: &ValueFunction,
) -> Result<f64> {
    let values = match policy_evaluation(model, policy) {
        Ok(v) => v,
        Err(Error::ImproperPolicy { .. }) => return Ok(f64::INFINITY),
        Err(e) => return Err(e),
    };
    let n = model.n();
    let total: f64 = (0..n)
        .map(|s| (optimal.get(s) - values.get(s)) / optimal.get(s).abs())
        .sum();
    Ok(total / n as f64)
}

/// Constant `1/n`, reciprocal `1/(1+s)`, and the exact optimum, labelled
/// `constant`, `reciprocal` and `optimal`.
pub fn reference_policies(model: &TransitionModel) -> Result<Vec<(String, PolicySpec)>> {
    let n = model.n();
    let optimal = greedy_policy(model, &backward_induction(model)?);
    Ok(vec![
        (
            "constant".to_string(),
            PolicySpec::constant(1.0 / n as f64)?,
        ),
        ("reciprocal".to_string(), PolicySpec::Reciprocal),
        ("optimal".to_string(), optimal),
    ])
}

/// One curve of the value/policy figures.
#[derive(Debug, Clone)]
pub struct FigureCurve {
    pub label: String,
    pub policy: PolicySpec,
    pub values: ValueFunction,
}

/// Builds curves for `policies` with exact values from [`policy_evaluation`].
pub fn figure_curves(
    model: &TransitionModel,
    policies: &[(String, PolicySpec)],
) -> Result<Vec<FigureCurve>> {
    policies
        .iter()
        .map(|(label, policy)| {
            Ok(FigureCurve {
                label: label.clone(),
                policy: policy.clone(),
                values: policy_evaluation(model, policy)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarksOptions {
    /// Start states; those above `n` are skipped.
    pub starts: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub step_cap: u64,
}

impl Default for MarksOptions {
    fn default() -> Self {
        Self {
            starts: MARK_STARTS.to_vec(),
            runs: 2000,
            seed: 42,
            step_cap: DEFAULT_STEP_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigurePaths {
    pub values: PathBuf,
    pub policies: PathBuf,
    pub marks: PathBuf,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

/// Writes `<prefix>_values.csv`, `<prefix>_policies.csv` and
/// `<prefix>_marks.csv`.
pub fn export_figure_data(
    spec: &ProblemSpec,
    curves: &[FigureCurve],
    marks: &MarksOptions,
    prefix: impl AsRef<Path>,
) -> Result<FigurePaths> {
    let prefix = prefix.as_ref();
    let paths = FigurePaths {
        values: with_suffix(prefix, "_values.csv"),
        policies: with_suffix(prefix, "_policies.csv"),
        marks: with_suffix(prefix, "_marks.csv"),
    };
    let n = spec.n();

    let mut out = BufWriter::new(File::create(&paths.values)?);
    writeln!(out, "state,policy,value")?;
    for curve in curves {
        for (s, v) in curve.values.values().iter().enumerate() {
            writeln!(out, "{s},{},{}", curve.label, sig17(*v))?;
        }
    }
    out.flush()?;

    let mut out = BufWriter::new(File::create(&paths.policies)?);
    writeln!(out, "state,policy,theta")?;
    for curve in curves {
        for s in 0..n {
            let theta = curve.policy.theta_for_state(s, spec)?;
            writeln!(out, "{s},{},{}", curve.label, sig17(theta))?;
        }
    }
    out.flush()?;

    let mut out = BufWriter::new(File::create(&paths.marks)?);
    writeln!(out, "state,policy,runs,mean,std")?;
    for curve in curves {
        for &s in marks.starts.iter().filter(|&&s| s <= n) {
            let options = BenchmarkOptions {
                runs: marks.runs,
                seed: marks.seed,
                start: EvalStart::State(s),
                step_cap: marks.step_cap,
            };
            let bench = monte_carlo_eval(spec, &curve.label, &curve.policy, &options)?;
            writeln!(
                out,
                "{s},{},{},{},{}",
                curve.label,
                bench.stats.runs,
                sig17(bench.stats.mean),
                sig17(bench.stats.std)
            )?;
        }
    }
    out.flush()?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::build_transition_model;

    fn spec(n: usize) -> ProblemSpec {
        ProblemSpec::with_default_grid(n).unwrap()
    }

    fn options(runs: usize, start: EvalStart) -> BenchmarkOptions {
        BenchmarkOptions {
            runs,
            seed: 5,
            start,
            step_cap: DEFAULT_STEP_CAP,
        }
    }

    #[test]
    fn stats_are_exact() {
        let s = StepStats::from_steps(&[2, 4, 4, 4, 5, 5, 7, 9]);
        assert_eq!(s.mean, 5.0);
        assert!((s.std - (32.0f64 / 7.0).sqrt()).abs() < 1e-15);
        assert_eq!(StepStats::from_steps(&[3]).std, 0.0);
        let mut shuffled = vec![9, 2, 5, 4, 7, 4, 5, 4];
        assert_eq!(StepStats::from_steps(&shuffled), s);
        shuffled.reverse();
        assert_eq!(StepStats::from_steps(&shuffled), s);
    }

    #[test]
    fn trivial_benchmarks() {
        let b = monte_carlo_eval(
            &spec(6),
            "r",
            &PolicySpec::Reciprocal,
            &options(20, EvalStart::State(6)),
        )
        .unwrap();
        assert_eq!((b.stats.mean, b.stats.std, b.stats.runs), (0.0, 0.0, 20));

        let b = monte_carlo_eval(
            &spec(1),
            "c",
            &PolicySpec::Constant(1.0),
            &options(50, EvalStart::State(0)),
        )
        .unwrap();
        assert_eq!((b.stats.mean, b.stats.std), (1.0, 0.0));
    }

    #[test]
    fn all_truncated_is_an_error() {
        let opts = BenchmarkOptions {
            step_cap: 10,
            ..options(5, EvalStart::State(3))
        };
        let err = monte_carlo_eval(&spec(4), "c", &PolicySpec::Constant(1.0), &opts).unwrap_err();
        assert!(matches!(err, Error::AllTruncated { runs: 5 }));
        assert!(monte_carlo_eval(
            &spec(4),
            "c",
            &PolicySpec::Reciprocal,
            &options(0, EvalStart::Random)
        )
        .is_err());
    }

    #[test]
    fn common_random_numbers() {
        let policies = vec![
            ("a".to_string(), PolicySpec::Reciprocal),
            ("b".to_string(), PolicySpec::Reciprocal),
        ];
        let report =
            compare_policies(&spec(20), &policies, &options(200, EvalStart::Random)).unwrap();
        assert_eq!(report.entries[0].episodes, report.entries[1].episodes);

        let single =
            compare_policies(&spec(20), &policies[..1], &options(200, EvalStart::Random)).unwrap();
        let direct = monte_carlo_eval(
            &spec(20),
            "a",
            &PolicySpec::Reciprocal,
            &options(200, EvalStart::Random),
        )
        .unwrap();
        assert_eq!(single.entries, vec![direct]);
    }

    #[test]
    fn reports_are_deterministic() {
        let model = build_transition_model(&spec(12));
        let policies = reference_policies(&model).unwrap();
        let a = compare_policies(&spec(12), &policies, &options(300, EvalStart::Random)).unwrap();
        let b = compare_policies(&spec(12), &policies, &options(300, EvalStart::Random)).unwrap();
        assert_eq!(a, b);
        let by_start_runs: usize = a.entries[0].by_start.values().map(|s| s.runs).sum();
        assert_eq!(by_start_runs, 300);

        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with("policy,start,runs,mean,std,truncated\nconstant,random,300,"));
        let table = a.text_table();
        assert!(table.lines().next().unwrap().contains("reciprocal"));
        assert!(table.contains("Standard Deviation"));
    }

    #[test]
    fn suboptimality_of_the_optimum_is_zero() {
        let model = build_transition_model(&spec(10));
        let v = backward_induction(&model).unwrap();
        let pi = greedy_policy(&model, &v);
        assert!(mean_relative_suboptimality(&model, &pi, &v).unwrap().abs() < 1e-12);
        let worse = mean_relative_suboptimality(&model, &PolicySpec::Constant(0.1), &v).unwrap();
        assert!(worse > 0.0);
        let improper = mean_relative_suboptimality(&model, &PolicySpec::Constant(1.0), &v).unwrap();
        assert!(improper.is_infinite());
    }

    #[test]
    fn figure_export_shapes() {
        let spec = spec(12);
        let model = build_transition_model(&spec);
        let curves = figure_curves(&model, &reference_policies(&model).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let marks = MarksOptions {
            runs: 50,
            ..Default::default()
        };
        let paths = export_figure_data(&spec, &curves, &marks, dir.path().join("fig")).unwrap();
        assert!(paths.values.ends_with("fig_values.csv"));

        let values = std::fs::read_to_string(&paths.values).unwrap();
        assert_eq!(values.lines().count(), 1 + 3 * 13);
        assert!(values.contains("12,optimal,0\n"));
        let policies = std::fs::read_to_string(&paths.policies).unwrap();
        assert_eq!(policies.lines().count(), 1 + 3 * 12);
        assert!(policies.contains("0,reciprocal,1\n"));
        let marks = std::fs::read_to_string(&paths.marks).unwrap();
        // Starts 5 and 10 fit in n = 12.
        assert_eq!(marks.lines().count(), 1 + 3 * 2);
    }
}
