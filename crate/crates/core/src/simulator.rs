//! Bit-level (1+1) EA on OneMax, plus state-level sampling from a
//! [`TransitionModel`].
//!
//! Every mutation consumes exactly `n` uniform draws, one per bit in index
//! order, whether or not the offspring is accepted. Seeded runs are therefore
//! reproducible and policies compared on the same stream stay aligned.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::policy::PolicySpec;
use crate::probability::{ProblemSpec, TransitionModel, TransitionRow};

/// Default per-episode step cap.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000;

pub type SimRng = ChaCha8Rng;

/// `(master_seed, stream_id)` names one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngSeed {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        Self { stream_id, ..self }
    }

    pub fn rng(&self) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitstring {
    bits: Vec<bool>,
    ones: usize,
}

impl Bitstring {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        let ones = bits.iter().filter(|&&b| b).count();
        Self { bits, ones }
    }

    /// Canonical representative of state `s`: `s` leading ones.
    pub fn with_leading_ones(n: usize, s: usize) -> Self {
        assert!(s <= n, "state {s} exceeds n = {n}");
        Self {
            bits: (0..n).map(|i| i < s).collect(),
            ones: s,
        }
    }

    /// Uniform random bitstring (one draw per bit).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self::from_bits((0..n).map(|_| rng.random::<bool>()).collect())
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// OneMax fitness.
    pub fn ones(&self) -> usize {
        self.ones
    }

    pub fn is_optimal(&self) -> bool {
        self.ones == self.bits.len()
    }

    /// One elitist step in place. Returns whether the offspring was kept.
    /// `flips` is scratch space.
    pub(crate) fn step_in_place<R: Rng + ?Sized>(
        &mut self,
        theta: f64,
        rng: &mut R,
        flips: &mut Vec<usize>,
    ) -> bool {
        flips.clear();
        let mut gain: i64 = 0;
        for (i, &bit) in self.bits.iter().enumerate() {
            if rng.random::<f64>() < theta {
                flips.push(i);
                gain += if bit { -1 } else { 1 };
            }
        }
        if gain <= 0 {
            return false;
        }
        for &i in flips.iter() {
            self.bits[i] = !self.bits[i];
        }
        self.ones = (self.ones as i64 + gain) as usize;
        true
    }
}

/// Flips each bit independently with probability `theta`.
pub fn mutate<R: Rng + ?Sized>(x: &Bitstring, theta: f64, rng: &mut R) -> Bitstring {
    debug_assert!((0.0..=1.0).contains(&theta));
    let bits = x
        .bits
        .iter()
        .map(|&b| if rng.random::<f64>() < theta { !b } else { b })
        .collect();
    Bitstring::from_bits(bits)
}

/// Mutation followed by strict-improvement selection.
pub fn step<R: Rng + ?Sized>(x: &Bitstring, theta: f64, rng: &mut R) -> Bitstring {
    let child = mutate(x, theta, rng);
    if child.ones > x.ones {
        child
    } else {
        x.clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    Bits(Bitstring),
    /// Canonical bitstring with this many leading ones.
    State(usize),
    /// Uniform random bitstring, so the start state is `Bin(n, 1/2)`.
    Random,
}

impl Start {
    pub fn realize<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Bitstring> {
        match self {
            Start::Bits(bits) if bits.len() == n => Ok(bits.clone()),
            Start::Bits(bits) => Err(Error::Domain(format!(
                "start bitstring has length {}, expected {n}",
                bits.len()
            ))),
            Start::State(s) if *s <= n => Ok(Bitstring::with_leading_ones(n, *s)),
            Start::State(s) => Err(Error::Domain(format!("start state {s} exceeds n = {n}"))),
            Start::Random => Ok(Bitstring::random(n, rng)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: usize,
    pub theta: f64,
    pub s_next: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub start_state: usize,
    pub transitions: Vec<Transition>,
    pub steps: u64,
    /// The step cap was reached before the optimum.
    pub truncated: bool,
}

impl EpisodeTrace {
    /// CSV with header `t,s,theta,s_prime`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,s,theta,s_prime")?;
        for (t, tr) in self.transitions.iter().enumerate() {
            writeln!(out, "{t},{},{},{}", tr.s, sig17(tr.theta), tr.s_next)?;
        }
        Ok(())
    }
}

/// Length of an episode without its trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeOutcome {
    pub start_state: usize,
    pub steps: u64,
    pub truncated: bool,
}

/// Mutation rate per non-terminal state, resolved once per run.
pub fn policy_thetas(policy: &PolicySpec, spec: &ProblemSpec) -> Result<Vec<f64>> {
    policy.check(spec)?;
    (0..spec.n())
        .map(|s| {
            let theta = policy.theta_for_state(s, spec)?;
            if theta > 0.0 && theta <= 1.0 {
                Ok(theta)
            } else {
                Err(Error::Domain(format!(
                    "state {s}: theta {theta} outside (0, 1]"
                )))
            }
        })
        .collect()
}

fn simulate<R: Rng + ?Sized>(
    thetas: &[f64],
    start: &Start,
    rng: &mut R,
    step_cap: u64,
    mut on_step: impl FnMut(Transition),
) -> Result<EpisodeOutcome> {
    if step_cap == 0 {
        return Err(Error::Domain("step cap must be positive".into()));
    }
    let n = thetas.len();
    let mut x = start.realize(n, rng)?;
    let start_state = x.ones();
    let mut flips = Vec::with_capacity(n);
    let mut steps = 0;
    while !x.is_optimal() && steps < step_cap {
        let s = x.ones();
        let theta = thetas[s];
        x.step_in_place(theta, rng, &mut flips);
        on_step(Transition {
            s,
            theta,
            s_next: x.ones(),
        });
        steps += 1;
    }
    Ok(EpisodeOutcome {
        start_state,
        steps,
        truncated: !x.is_optimal(),
    })
}

/// Runs the policy-controlled EA until the optimum or `step_cap` steps.
/// Mutation rates are used exactly, never snapped to the grid.
pub fn run_episode<R: Rng + ?Sized>(
    spec: &ProblemSpec,
    policy: &PolicySpec,
    start: &Start,
    rng: &mut R,
    step_cap: u64,
) -> Result<EpisodeTrace> {
    let thetas = policy_thetas(policy, spec)?;
    let mut transitions = Vec::new();
    let outcome = simulate(&thetas, start, rng, step_cap, |t| transitions.push(t))?;
    Ok(EpisodeTrace {
        start_state: outcome.start_state,
        transitions,
        steps: outcome.steps,
        truncated: outcome.truncated,
    })
}

/// [`run_episode`] without recording the trace; `thetas` comes from
/// [`policy_thetas`]. Consumes the random stream identically.
pub fn episode_length<R: Rng + ?Sized>(
    thetas: &[f64],
    start: &Start,
    rng: &mut R,
    step_cap: u64,
) -> Result<EpisodeOutcome> {
    simulate(thetas, start, rng, step_cap, |_| {})
}

/// Inverse-CDF draw from a transition row (one uniform per call).
pub fn sample_row<R: Rng + ?Sized>(row: &TransitionRow, rng: &mut R) -> usize {
    let u = rng.random::<f64>();
    let mut acc = 0.0;
    let mut last = row.s;
    for (s_next, p) in row.iter() {
        if p == 0.0 {
            continue;
        }
        acc += p;
        last = s_next;
        if u < acc {
            return s_next;
        }
    }
    last
}

/// Draws `s'` from the model row for `(s, theta)`; `theta` must be a grid point.
pub fn sample_transition<R: Rng + ?Sized>(
    s: usize,
    theta: f64,
    model: &TransitionModel,
    rng: &mut R,
) -> Result<usize> {
    if s > model.n() {
        return Err(Error::Domain(format!(
            "state {s} exceeds n = {}",
            model.n()
        )));
    }
    let a = model
        .spec()
        .action_index(theta)
        .ok_or_else(|| Error::Domain(format!("theta {theta} is not on the action grid")))?;
    Ok(sample_row(model.row(s, a), rng))
}
