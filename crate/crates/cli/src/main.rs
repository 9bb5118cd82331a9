//! `evoctrl`: solve, learn, simulate and benchmark mutation-rate control of
//! the (1+1) EA on OneMax.

mod config;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use evoctrl_core::evaluation::MARK_STARTS;
use evoctrl_core::simulator::DEFAULT_STEP_CAP;
use evoctrl_core::solver::{DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE};
use evoctrl_core::{
    backward_induction, build_transition_model, compare_policies, export_figure_data,
    figure_curves, greedy_from_q, greedy_policy, load_policy, mean_relative_suboptimality,
    run_episode, save_policy, train, value_iteration, AlphaSchedule, BenchmarkOptions,
    EpsilonSchedule, Error, EvalStart, LearningConfig, MarksOptions, PolicySpec, ProblemSpec,
    RngSeed, Sampler, SolveOptions, Start, StartDistribution, TransitionModel,
};

#[derive(Parser, Debug)]
#[command(
    name = "evoctrl",
    version,
    about = "Optimal mutation-rate control for the (1+1) EA on OneMax"
)]
#[command(after_help = "Exit codes: 0 success, 1 error, 2 learned table misses states.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the MDP exactly; write value.csv and policy.csv.
    Solve(SolveArgs),
    /// Train tabular Q-learning; write qtable.csv and policy.csv.
    Learn(LearnArgs),
    /// Run one traced episode of a policy; write trace.csv.
    Simulate(SimulateArgs),
    /// Benchmark policies from random starts; write benchmark.csv.
    Evaluate(EvaluateArgs),
    /// Write value, policy and Monte Carlo mark CSVs for the three reference policies.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key = value file; keys are long flag names, flags take precedence.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Bitstring length.
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Smallest mutation rate on the action grid.
    #[arg(long, default_value_t = 0.01)]
    grid_min: f64,
    /// Largest mutation rate on the action grid.
    #[arg(long, default_value_t = 1.0)]
    grid_max: f64,
    /// Action grid spacing.
    #[arg(long, default_value_t = 0.01)]
    grid_step: f64,
    /// Master random seed.
    #[arg(long, env = "EVOCTRL_SEED", default_value_t = 42)]
    seed: u64,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

impl Common {
    fn spec(&self) -> Result<ProblemSpec> {
        Ok(ProblemSpec::with_grid(
            self.n,
            self.grid_min,
            self.grid_max,
            self.grid_step,
        )?)
    }

    fn output(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))?;
        Ok(self.out_dir.join(name))
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Method {
    /// Backward induction over states (exact, one pass).
    Bi,
    /// Synchronous value iteration from zero.
    Vi,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Method::Bi)]
    method: Method,
    /// Value iteration stops when the sup-norm residual is at most this.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Value iteration sweep limit.
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_iterations: usize,
    /// Also write the transition model as CSV.
    #[arg(long, value_name = "FILE")]
    model_csv: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SamplerArg {
    /// Draw successors from the exact transition model.
    Model,
    /// Mutate real bitstrings.
    Bit,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum StartArg {
    /// Start state uniform over 0..n.
    UniformState,
    /// Uniform random bitstring.
    UniformBitstring,
}

#[derive(Args, Debug)]
struct LearnArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 200_000)]
    episodes: u64,
    /// Constant learning rate; overrides the polynomial schedule.
    #[arg(long)]
    alpha: Option<f64>,
    /// Polynomial schedule alpha0 / (1 + visits)^omega.
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
    #[arg(long, default_value_t = 0.51)]
    omega: f64,
    /// Constant exploration rate; overrides the linear schedule.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Exploration rate at the first episode.
    #[arg(long, default_value_t = 1.0)]
    epsilon_start: f64,
    /// Exploration rate at the last episode.
    #[arg(long, default_value_t = 0.05)]
    epsilon_end: f64,
    #[arg(long, value_enum, default_value_t = StartArg::UniformState)]
    start_distribution: StartArg,
    #[arg(long, value_enum, default_value_t = SamplerArg::Model)]
    sampler: SamplerArg,
    /// Steps after which an episode is cut off.
    #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
    step_cap: u64,
    /// Report the learned policy's mean relative suboptimality against the exact optimum.
    #[arg(long)]
    compare_exact: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Built-in (constant, constant:<theta>, reciprocal, optimal) or a policy file.
    #[arg(long, default_value = "optimal")]
    policy: String,
    /// Start state, or `random` for a uniform bitstring.
    #[arg(long, default_value = "random")]
    start: String,
    #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
    step_cap: u64,
    /// Trace file name inside the output directory.
    #[arg(long, default_value = "trace.csv")]
    trace: String,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated built-ins (constant, constant:<theta>, reciprocal, optimal) or policy files.
    #[arg(long, default_value = "constant,reciprocal,optimal")]
    policies: String,
    #[arg(long, default_value_t = 2000)]
    runs: usize,
    /// Start state, or `random` for a uniform bitstring.
    #[arg(long, default_value = "random")]
    start: String,
    #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
    step_cap: u64,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    common: Common,
    /// Output file prefix inside the output directory.
    #[arg(long, default_value = "figure")]
    prefix: String,
    /// Monte Carlo runs per mark.
    #[arg(long, default_value_t = 2000)]
    runs: usize,
    /// Comma-separated start states for the marks.
    #[arg(long, default_value_t = join(&MARK_STARTS))]
    marks: String,
    #[arg(long, default_value_t = DEFAULT_STEP_CAP)]
    step_cap: u64,
}

fn join(xs: &[usize]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Lazily solved model shared by commands that may need the optimum.
struct Solved {
    model: TransitionModel,
    optimal: Option<PolicySpec>,
}

impl Solved {
    fn new(spec: &ProblemSpec) -> Self {
        Self {
            model: build_transition_model(spec),
            optimal: None,
        }
    }

    fn optimal(&mut self) -> Result<PolicySpec> {
        if self.optimal.is_none() {
            let v = backward_induction(&self.model)?;
            self.optimal = Some(greedy_policy(&self.model, &v));
        }
        Ok(self.optimal.clone().expect("just solved"))
    }
}

fn resolve_policy(
    name: &str,
    spec: &ProblemSpec,
    solved: &mut Option<Solved>,
) -> Result<(String, PolicySpec)> {
    let policy = match name {
        "constant" => PolicySpec::constant(1.0 / spec.n() as f64)?,
        "reciprocal" => PolicySpec::Reciprocal,
        "optimal" => solved.get_or_insert_with(|| Solved::new(spec)).optimal()?,
        _ => match name.strip_prefix("constant:") {
            Some(theta) => PolicySpec::constant(
                theta
                    .parse()
                    .with_context(|| format!("bad rate in {name:?}"))?,
            )?,
            None => load_policy(name).with_context(|| format!("loading policy {name}"))?,
        },
    };
    policy
        .check(spec)
        .with_context(|| format!("policy {name}"))?;
    let label = match Path::new(name).file_stem() {
        Some(stem) if Path::new(name).exists() => stem.to_string_lossy().into_owned(),
        _ => name.to_string(),
    };
    Ok((label, policy))
}

fn parse_start(text: &str) -> Result<EvalStart> {
    if text == "random" {
        return Ok(EvalStart::Random);
    }
    let s = text
        .parse()
        .with_context(|| format!("start must be a state or `random`, got {text:?}"))?;
    Ok(EvalStart::State(s))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let spec = args.common.spec()?;
    let model = build_transition_model(&spec);
    let values = match args.method {
        Method::Bi => {
            println!("method: backward induction");
            backward_induction(&model)?
        }
        Method::Vi => {
            let options = SolveOptions {
                tolerance: args.tolerance,
                max_iterations: args.max_iterations,
            };
            let (values, report) = value_iteration(&model, options)?;
            println!("method: value iteration");
            println!("iterations: {}", report.iterations);
            println!("final residual: {:e}", report.final_residual);
            if !report.converged {
                bail!(
                    "value iteration did not reach tolerance {} in {} sweeps",
                    args.tolerance,
                    args.max_iterations
                );
            }
            values
        }
    };
    let policy = greedy_policy(&model, &values);
    let value_path = args.common.output("value.csv")?;
    let mut out = create(&value_path)?;
    values.write_csv(&mut out)?;
    out.flush()?;
    let policy_path = args.common.output("policy.csv")?;
    save_policy(&policy, &policy_path)?;
    if let Some(path) = &args.model_csv {
        let mut out = create(path)?;
        model.write_csv(&mut out)?;
        out.flush()?;
    }
    println!("expected steps from s=0: {}", values.expected_steps(0));
    println!(
        "wrote {} and {}",
        value_path.display(),
        policy_path.display()
    );
    Ok(())
}

fn cmd_learn(args: &LearnArgs) -> Result<()> {
    let spec = args.common.spec()?;
    let config = LearningConfig {
        episodes: args.episodes,
        alpha: match args.alpha {
            Some(alpha) => AlphaSchedule::Constant(alpha),
            None => AlphaSchedule::Polynomial {
                alpha0: args.alpha0,
                omega: args.omega,
            },
        },
        epsilon: match args.epsilon {
            Some(eps) => EpsilonSchedule::Constant(eps),
            None => EpsilonSchedule::Linear {
                start: args.epsilon_start,
                end: args.epsilon_end,
            },
        },
        start: match args.start_distribution {
            StartArg::UniformState => StartDistribution::UniformState,
            StartArg::UniformBitstring => StartDistribution::UniformBitstring,
        },
        seed: RngSeed::new(args.common.seed, 0),
        step_cap: args.step_cap,
    };
    let sampler = match args.sampler {
        SamplerArg::Model => Sampler::ModelLevel,
        SamplerArg::Bit => Sampler::BitLevel,
    };
    let (q, report) = train(&spec, &config, sampler)?;
    let q_path = args.common.output("qtable.csv")?;
    q.save(&q_path)?;
    println!("episodes: {}", report.episodes_run);
    println!("total steps: {}", report.total_steps);
    println!("truncated episodes: {}", report.truncated_episodes);

    let policy = greedy_from_q(&q)?;
    let policy_path = args.common.output("policy.csv")?;
    save_policy(&policy, &policy_path)?;
    if args.compare_exact {
        let model = build_transition_model(&spec);
        let optimal = backward_induction(&model)?;
        let gap = mean_relative_suboptimality(&model, &policy, &optimal)?;
        println!("mean relative suboptimality: {:.4}%", 100.0 * gap);
    }
    println!("wrote {} and {}", q_path.display(), policy_path.display());
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let spec = args.common.spec()?;
    let (label, policy) = resolve_policy(&args.policy, &spec, &mut None)?;
    let start = match parse_start(&args.start)? {
        EvalStart::State(s) => Start::State(s),
        EvalStart::Random => Start::Random,
    };
    let mut rng = RngSeed::new(args.common.seed, 0).rng();
    let trace = run_episode(&spec, &policy, &start, &mut rng, args.step_cap)?;
    let path = args.common.output(&args.trace)?;
    let mut out = create(&path)?;
    trace.write_csv(&mut out)?;
    out.flush()?;
    println!("policy: {label}");
    println!("start state: {}", trace.start_state);
    println!(
        "steps: {}{}",
        trace.steps,
        if trace.truncated { " (truncated)" } else { "" }
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let spec = args.common.spec()?;
    let mut solved = None;
    let policies = args
        .policies
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|name| resolve_policy(name, &spec, &mut solved))
        .collect::<Result<Vec<_>>>()?;
    let options = BenchmarkOptions {
        runs: args.runs,
        seed: args.common.seed,
        start: parse_start(&args.start)?,
        step_cap: args.step_cap,
    };
    let report = compare_policies(&spec, &policies, &options)?;
    let path = args.common.output("benchmark.csv")?;
    let mut out = create(&path)?;
    report.write_csv(&mut out)?;
    out.flush()?;
    print!("{}", report.text_table());
    for entry in report.entries.iter().filter(|e| e.truncated > 0) {
        println!(
            "warning: {} had {} truncated runs",
            entry.label, entry.truncated
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_export(args: &ExportArgs) -> Result<()> {
    let spec = args.common.spec()?;
    let mut solved = Solved::new(&spec);
    let policies = vec![
        (
            "constant".to_string(),
            PolicySpec::constant(1.0 / spec.n() as f64)?,
        ),
        ("reciprocal".to_string(), PolicySpec::Reciprocal),
        ("optimal".to_string(), solved.optimal()?),
    ];
    let curves = figure_curves(&solved.model, &policies)?;
    let starts = args
        .marks
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| anyhow!("bad mark state {s:?}")))
        .collect::<Result<Vec<usize>>>()?;
    let marks = MarksOptions {
        starts,
        runs: args.runs,
        seed: args.common.seed,
        step_cap: args.step_cap,
    };
    let prefix = args.common.output(&args.prefix)?;
    let paths = export_figure_data(&spec, &curves, &marks, prefix)?;
    for path in [&paths.values, &paths.policies, &paths.marks] {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn parse_cli(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let cmd = Cli::command();
    let matches = cmd.clone().try_get_matches_from(&argv)?;
    let config = matches
        .subcommand()
        .and_then(|(_, sub)| sub.get_one::<PathBuf>("config").cloned());
    let Some(path) = config else {
        return Cli::from_arg_matches(&matches);
    };
    let merged = config::merge(&cmd, &matches, &argv, &path).map_err(|e| {
        cmd.clone()
            .error(clap::error::ErrorKind::InvalidValue, format!("{e:#}"))
    })?;
    Cli::from_arg_matches(&cmd.try_get_matches_from(merged)?)
}

fn main() -> ExitCode {
    let cli = match parse_cli(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Learn(args) => cmd_learn(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Export(args) => cmd_export(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::IncompleteTable { .. }) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
