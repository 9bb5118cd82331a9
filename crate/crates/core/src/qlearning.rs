//! Tabular Q-learning over (state, mutation-rate) pairs.
//!
//! Each step from a non-terminal state earns reward -1; the terminal row of
//! the table is pinned at zero, so learned values are minus expected
//! remaining steps, as with the exact solvers.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::policy::PolicySpec;
use crate::probability::{build_transition_model, ProblemSpec};
use crate::simulator::{sample_row, Bitstring, RngSeed, DEFAULT_STEP_CAP};

/// Reward for every step taken from a non-terminal state.
pub const STEP_REWARD: f64 = -1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n: usize,
    actions: Vec<f64>,
    q: Vec<f64>,
    visits: Vec<u64>,
}

impl QTable {
    pub fn new(spec: &ProblemSpec) -> Self {
        let cells = (spec.n() + 1) * spec.num_actions();
        Self {
            n: spec.n(),
            actions: spec.actions().to_vec(),
            q: vec![0.0; cells],
            visits: vec![0; cells],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    fn index(&self, s: usize, a: usize) -> usize {
        s * self.actions.len() + a
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.q[self.index(s, a)]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        let a = self.actions.len();
        &self.q[s * a..(s + 1) * a]
    }

    pub fn max_value(&self, s: usize) -> f64 {
        self.row(s)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Number of updates applied to `(s, a)`.
    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visits[self.index(s, a)]
    }

    pub fn visit_counts(&self) -> &[u64] {
        &self.visits
    }

    pub fn state_visits(&self, s: usize) -> u64 {
        let a = self.actions.len();
        self.visits[s * a..(s + 1) * a].iter().sum()
    }

    /// Whether `s` has recorded updates, or, for tables loaded from disk
    /// where counts are not stored, any nonzero entry.
    pub fn is_visited(&self, s: usize) -> bool {
        self.state_visits(s) > 0 || self.row(s).iter().any(|&q| q != 0.0)
    }

    /// CSV with header `state,theta,q`, one line per cell including the
    /// terminal row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "state,theta,q")?;
        for s in 0..=self.n {
            for (a, &theta) in self.actions.iter().enumerate() {
                writeln!(out, "{s},{},{}", sig17(theta), sig17(self.get(s, a)))?;
            }
        }
        Ok(())
    }

    /// Parses [`QTable::write_csv`] output. Visit counts are not part of the
    /// format and come back as zero.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, "state,theta,q")) => {}
            _ => return Err(Error::parse(1, "expected header `state,theta,q`")),
        }
        let mut cells: Vec<(usize, f64, f64, usize)> = Vec::new();
        for (line_no, line) in lines.filter(|(_, l)| !l.is_empty()) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::parse(line_no, "expected 3 fields"));
            }
            let s: usize = fields[0]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad state `{}`", fields[0])))?;
            let theta: f64 = fields[1]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad theta `{}`", fields[1])))?;
            let q: f64 = fields[2]
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad q `{}`", fields[2])))?;
            cells.push((s, theta, q, line_no));
        }
        let actions: Vec<f64> = cells.iter().take_while(|c| c.0 == 0).map(|c| c.1).collect();
        if actions.is_empty() || !cells.len().is_multiple_of(actions.len()) {
            return Err(Error::parse(2, "table is not a full state x action grid"));
        }
        let states = cells.len() / actions.len();
        if states < 2 {
            return Err(Error::parse(
                2,
                "table needs at least one non-terminal state",
            ));
        }
        let spec = ProblemSpec::new(states - 1, actions.clone())
            .map_err(|e| Error::parse(2, e.to_string()))?;
        let mut table = QTable::new(&spec);
        for (i, &(s, theta, q, line_no)) in cells.iter().enumerate() {
            let (want_s, want_a) = (i / actions.len(), i % actions.len());
            if s != want_s || theta != actions[want_a] {
                return Err(Error::parse(
                    line_no,
                    format!("expected state {want_s}, theta {}", actions[want_a]),
                ));
            }
            if s == table.n && q != 0.0 {
                return Err(Error::parse(line_no, "terminal row must be zero"));
            }
            table.q[i] = q;
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_csv(&fs::read_to_string(path)?)
    }
}

/// `Q(s,a) += alpha (r + max_a' Q(s',a') - Q(s,a))`.
pub fn q_update(
    q: &mut QTable,
    s: usize,
    a: usize,
    reward: f64,
    s_next: usize,
    alpha: f64,
) -> Result<()> {
    if s >= q.n {
        return Err(Error::Domain(format!("no update from terminal state {s}")));
    }
    if s_next > q.n || a >= q.actions.len() {
        return Err(Error::Domain(format!("cell ({s_next}, {a}) out of range")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!(
            "learning rate {alpha} outside (0, 1]"
        )));
    }
    let target = reward + q.max_value(s_next);
    let i = q.index(s, a);
    q.q[i] += alpha * (target - q.q[i]);
    q.visits[i] += 1;
    Ok(())
}

/// Epsilon-greedy choice; greedy ties are broken uniformly at random.
pub fn choose_action<R: Rng + ?Sized>(q: &QTable, s: usize, epsilon: f64, rng: &mut R) -> usize {
    let k = q.actions.len();
    if rng.random::<f64>() < epsilon {
        return rng.random_range(0..k);
    }
    let row = q.row(s);
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties = row.iter().filter(|&&v| v == best).count();
    let pick = if ties == 1 {
        0
    } else {
        rng.random_range(0..ties)
    };
    row.iter()
        .enumerate()
        .filter(|(_, &v)| v == best)
        .nth(pick)
        .map(|(a, _)| a)
        .expect("row has a maximum")
}

/// Per-state argmax, ties to the smaller rate.
pub fn greedy_from_q(q: &QTable) -> Result<PolicySpec> {
    let unvisited: Vec<usize> = (0..q.n).filter(|&s| !q.is_visited(s)).collect();
    if !unvisited.is_empty() {
        return Err(Error::IncompleteTable { states: unvisited });
    }
    let entries = (0..q.n)
        .map(|s| {
            let mut best = 0;
            for (a, &v) in q.row(s).iter().enumerate() {
                if v > q.row(s)[best] {
                    best = a;
                }
            }
            q.actions[best]
        })
        .collect();
    Ok(PolicySpec::Table(entries))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSchedule {
    Constant(f64),
    /// `alpha0 / (1 + visits(s, a))^omega`.
    Polynomial {
        alpha0: f64,
        omega: f64,
    },
}

impl AlphaSchedule {
    pub fn rate(&self, visits: u64) -> f64 {
        match *self {
            AlphaSchedule::Constant(alpha) => alpha,
            AlphaSchedule::Polynomial { alpha0, omega } => {
                alpha0 / (1.0 + visits as f64).powf(omega)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonSchedule {
    Constant(f64),
    /// Linear from `start` at the first episode to `end` at the last.
    Linear {
        start: f64,
        end: f64,
    },
}

impl EpsilonSchedule {
    pub fn value(&self, episode: u64, episodes: u64) -> f64 {
        match *self {
            EpsilonSchedule::Constant(eps) => eps,
            EpsilonSchedule::Linear { start, end } => {
                if episodes <= 1 {
                    return start;
                }
                let frac = episode as f64 / (episodes - 1) as f64;
                start + (end - start) * frac
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartDistribution {
    /// Uniform random bitstring: start state `Bin(n, 1/2)`.
    UniformBitstring,
    /// Uniform over non-terminal states `0..n`.
    UniformState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    /// Mutate an actual bitstring.
    BitLevel,
    /// Draw successors from the exact transition model.
    ModelLevel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningConfig {
    pub episodes: u64,
    pub alpha: AlphaSchedule,
    pub epsilon: EpsilonSchedule,
    pub start: StartDistribution,
    pub seed: RngSeed,
    pub step_cap: u64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            episodes: 200_000,
            // Slower decay (omega near 0.5) lets the self-loop values settle;
            // omega = 0.85 leaves n = 10 tables far from the fixed point.
            alpha: AlphaSchedule::Polynomial {
                alpha0: 1.0,
                omega: 0.51,
            },
            epsilon: EpsilonSchedule::Linear {
                start: 1.0,
                end: 0.05,
            },
            start: StartDistribution::UniformState,
            seed: RngSeed::new(42, 0),
            step_cap: DEFAULT_STEP_CAP,
        }
    }
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        match self.alpha {
            AlphaSchedule::Constant(a) if !(a > 0.0 && a <= 1.0) => {
                return Err(Error::Domain(format!("alpha {a} outside (0, 1]")))
            }
            AlphaSchedule::Polynomial { alpha0, omega }
                if !(alpha0 > 0.0 && alpha0 <= 1.0) || !(omega > 0.5 && omega <= 1.0) =>
            {
                return Err(Error::Domain(format!(
                    "polynomial schedule needs alpha0 in (0, 1] and omega in (0.5, 1], got {alpha0}, {omega}"
                )))
            }
            _ => {}
        }
        match self.epsilon {
            EpsilonSchedule::Constant(e) if !unit(e) => {
                return Err(Error::Domain(format!("epsilon {e} outside [0, 1]")))
            }
            EpsilonSchedule::Linear { start, end } if !unit(start) || !unit(end) => {
                return Err(Error::Domain(format!(
                    "epsilon schedule {start} -> {end} outside [0, 1]"
                )))
            }
            _ => {}
        }
        if self.step_cap == 0 {
            return Err(Error::Domain("step cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub episodes_run: u64,
    pub total_steps: u64,
    /// Updates per `(s, a)` cell, row-major over states.
    pub visit_counts: Vec<u64>,
    pub truncated_episodes: u64,
    /// Mean relative suboptimality of the greedy policy, when computed.
    pub mean_suboptimality: Option<f64>,
}

enum Env {
    Model(crate::probability::TransitionModel),
    Bits(Bitstring, Vec<usize>),
}

/// Runs `config.episodes` episodes of epsilon-greedy Q-learning.
/// Deterministic given `config.seed`.
pub fn train(
    spec: &ProblemSpec,
    config: &LearningConfig,
    sampler: Sampler,
) -> Result<(QTable, TrainingReport)> {
    config.validate()?;
    let n = spec.n();
    let actions = spec.actions();
    let mut rng = config.seed.rng();
    let mut q = QTable::new(spec);
    let mut env = match sampler {
        Sampler::ModelLevel => Env::Model(build_transition_model(spec)),
        Sampler::BitLevel => Env::Bits(Bitstring::with_leading_ones(n, 0), Vec::with_capacity(n)),
    };
    let mut total_steps = 0;
    let mut truncated = 0;

    for episode in 0..config.episodes {
        let epsilon = config.epsilon.value(episode, config.episodes);
        let mut s = match config.start {
            StartDistribution::UniformState => rng.random_range(0..n),
            StartDistribution::UniformBitstring => {
                let bits = Bitstring::random(n, &mut rng);
                let s = bits.ones();
                if let Env::Bits(x, _) = &mut env {
                    *x = bits;
                }
                s
            }
        };
        if let (Env::Bits(x, _), StartDistribution::UniformState) = (&mut env, config.start) {
            *x = Bitstring::with_leading_ones(n, s);
        }

        let mut steps = 0;
        while s < n && steps < config.step_cap {
            let a = choose_action(&q, s, epsilon, &mut rng);
            let s_next = match &mut env {
                Env::Model(model) => sample_row(model.row(s, a), &mut rng),
                Env::Bits(x, scratch) => {
                    x.step_in_place(actions[a], &mut rng, scratch);
                    x.ones()
                }
            };
            let alpha = config.alpha.rate(q.visits(s, a));
            q_update(&mut q, s, a, STEP_REWARD, s_next, alpha)?;
            s = s_next;
            steps += 1;
        }
        total_steps += steps;
        if s < n {
            truncated += 1;
        }
    }

    let report = TrainingReport {
        episodes_run: config.episodes,
        total_steps,
        visit_counts: q.visits.clone(),
        truncated_episodes: truncated,
        mean_suboptimality: None,
    };
    Ok((q, report))
}
