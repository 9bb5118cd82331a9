//! Exact solvers for the undiscounted shortest-path MDP: every step from a
//! non-terminal state costs 1 (reward -1), the all-ones state is absorbing
//! with reward 0, and a value is minus the expected number of steps left.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::policy::PolicySpec;
use crate::probability::{transition_row, TransitionModel, TransitionRow};

/// Default sup-norm tolerance on the Bellman residual.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

/// Value per state `0..=n`; `V(n) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    values: Vec<f64>,
}

impl ValueFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, s: usize) -> f64 {
        self.values[s]
    }

    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    /// Expected steps to reach the optimum from `s`.
    pub fn expected_steps(&self, s: usize) -> f64 {
        -self.values[s]
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with header `state,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "state,value")?;
        for (s, v) in self.values.iter().enumerate() {
            writeln!(out, "{s},{}", sig17(*v))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Sup-norm of the last Bellman update.
    pub final_residual: f64,
    pub converged: bool,
    /// Residual after every sweep.
    pub residuals: Vec<f64>,
}

fn admissible(row: &TransitionRow) -> bool {
    row.improvement_prob() > 0.0
}

fn check_every_state_has_action(model: &TransitionModel) -> Result<()> {
    for s in 0..model.n() {
        if !model.rows_for(s).iter().any(admissible) {
            return Err(Error::ImproperPolicy { state: s });
        }
    }
    Ok(())
}

/// Synchronous value iteration from `V = 0`.
///
/// Actions with zero improvement probability at a state are left out of the
/// maximum there. Non-convergence is reported, not an error.
pub fn value_iteration(
    model: &TransitionModel,
    options: SolveOptions,
) -> Result<(ValueFunction, SolveReport)> {
    if options.tolerance.is_nan() || options.tolerance <= 0.0 {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {}",
            options.tolerance
        )));
    }
    check_every_state_has_action(model)?;
    let n = model.n();
    let mut current = vec![0.0; n + 1];
    let mut next = vec![0.0; n + 1];
    let mut residuals = Vec::new();
    let mut converged = false;

    while residuals.len() < options.max_iterations {
        let mut residual: f64 = 0.0;
        for s in 0..n {
            let best = model
                .rows_for(s)
                .iter()
                .filter(|row| admissible(row))
                .map(|row| {
                    let expected: f64 = row.iter().map(|(sn, p)| p * current[sn]).sum();
                    -1.0 + expected
                })
                .fold(f64::NEG_INFINITY, f64::max);
            next[s] = best;
            residual = residual.max((best - current[s]).abs());
        }
        next[n] = 0.0;
        std::mem::swap(&mut current, &mut next);
        residuals.push(residual);
        if residual <= options.tolerance {
            converged = true;
            break;
        }
    }

    let report = SolveReport {
        iterations: residuals.len(),
        final_residual: residuals.last().copied().unwrap_or(f64::INFINITY),
        converged,
        residuals,
    };
    Ok((ValueFunction::new(current), report))
}

/// One-pass exact solve from `s = n - 1` down to 0.
///
/// Transitions never go below the current state, so
/// `V(s) = max_theta (-1 + sum_{s' > s} P(s'|s) V(s')) / P(s' > s | s)`.
pub fn backward_induction(model: &TransitionModel) -> Result<ValueFunction> {
    let n = model.n();
    let mut values = vec![0.0; n + 1];
    for s in (0..n).rev() {
        let mut best = f64::NEG_INFINITY;
        for row in model.rows_for(s) {
            let p = row.improvement_prob();
            if p <= 0.0 {
                continue;
            }
            let v = (-1.0 + row.improving_dot(&values)) / p;
            if v > best {
                best = v;
            }
        }
        if best == f64::NEG_INFINITY {
            return Err(Error::ImproperPolicy { state: s });
        }
        values[s] = best;
    }
    Ok(ValueFunction::new(values))
}

/// Greedy table policy with respect to `values`; ties go to the smaller theta.
pub fn greedy_policy(model: &TransitionModel, values: &ValueFunction) -> PolicySpec {
    let n = model.n();
    let actions = model.spec().actions();
    let v = values.values();
    let entries = (0..n)
        .map(|s| {
            let mut best = f64::NEG_INFINITY;
            let mut best_action = 0;
            for (a, row) in model.rows_for(s).iter().enumerate() {
                if !admissible(row) {
                    continue;
                }
                let q = -1.0 + row.iter().map(|(sn, p)| p * v[sn]).sum::<f64>();
                if q > best {
                    best = q;
                    best_action = a;
                }
            }
            actions[best_action]
        })
        .collect();
    PolicySpec::Table(entries)
}

/// Exact value of a fixed policy, with each rate snapped to the action grid
/// so that every row is a model row.
pub fn policy_evaluation(model: &TransitionModel, policy: &PolicySpec) -> Result<ValueFunction> {
    let spec = model.spec();
    evaluate_with(model, |s| {
        Ok(RowRef::Model(model.row(s, policy.grid_action(s, spec)?)))
    })
}

/// Like [`policy_evaluation`] but off-grid rates (such as `1/(1+s)`) get
/// their own exact row, matching bit-level simulation.
pub fn policy_evaluation_exact(
    model: &TransitionModel,
    policy: &PolicySpec,
) -> Result<ValueFunction> {
    let spec = model.spec();
    evaluate_with(model, |s| {
        let theta = policy.theta_for_state(s, spec)?;
        match spec.action_index(theta) {
            Some(a) => Ok(RowRef::Model(model.row(s, a))),
            None => Ok(RowRef::Owned(transition_row(s, theta, spec.n())?)),
        }
    })
}

enum RowRef<'a> {
    Model(&'a TransitionRow),
    Owned(TransitionRow),
}

impl RowRef<'_> {
    fn get(&self) -> &TransitionRow {
        match self {
            RowRef::Model(row) => row,
            RowRef::Owned(row) => row,
        }
    }
}

fn evaluate_with<'a>(
    model: &'a TransitionModel,
    mut row_for: impl FnMut(usize) -> Result<RowRef<'a>>,
) -> Result<ValueFunction> {
    let n = model.n();
    let mut values = vec![0.0; n + 1];
    for s in (0..n).rev() {
        let row = row_for(s)?;
        let row = row.get();
        let p = row.improvement_prob();
        if p <= 0.0 {
            return Err(Error::ImproperPolicy { state: s });
        }
        values[s] = (-1.0 + row.improving_dot(&values)) / p;
    }
    Ok(ValueFunction::new(values))
}
