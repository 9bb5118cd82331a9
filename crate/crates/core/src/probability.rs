//! Exact transition law of the (1+1) EA on OneMax.
//!
//! A state is the number of ones `s` in the current bitstring. Mutating with
//! per-bit flip probability `theta` gains `W ~ Bin(n - s, theta)` ones and
//! loses `L ~ Bin(s, theta)` ones; the offspring is kept only when the net
//! gain `Z = W - L` is strictly positive, so all mass at `Z <= 0` lands on
//! the self-loop.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fmt::sig17;

/// Problem size and the ordered grid of admissible mutation probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    n: usize,
    actions: Vec<f64>,
}

impl ProblemSpec {
    pub fn new(n: usize, actions: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpec("n must be at least 1".into()));
        }
        if actions.is_empty() {
            return Err(Error::InvalidSpec("action grid is empty".into()));
        }
        for (i, &theta) in actions.iter().enumerate() {
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "action {i} = {theta} outside (0, 1]"
                )));
            }
            if i > 0 && theta <= actions[i - 1] {
                return Err(Error::InvalidSpec(format!(
                    "actions must be strictly increasing (action {i} = {theta})"
                )));
            }
        }
        Ok(Self { n, actions })
    }

    /// `{0.01, 0.02, ..., 1.00}`.
    pub fn with_default_grid(n: usize) -> Result<Self> {
        Self::with_grid(n, 0.01, 1.0, 0.01)
    }

    /// Evenly spaced grid `min, min + step, ..., max`.
    ///
    /// When `1 / step` is an integer `k` the points are computed as `i / k`,
    /// so a grid step of 0.01 yields exactly the literals `0.01, 0.02, ...`.
    pub fn with_grid(n: usize, min: f64, max: f64, step: f64) -> Result<Self> {
        let ordered = step > 0.0 && min > 0.0 && max <= 1.0 && min <= max;
        if !ordered {
            return Err(Error::InvalidSpec(format!(
                "bad grid {min}:{max}:{step}, need 0 < min <= max <= 1 and step > 0"
            )));
        }
        let count = ((max - min) / step + 1e-9).floor() as usize + 1;
        let scale = 1.0 / step;
        let actions = if (scale - scale.round()).abs() < 1e-9
            && (min * scale - (min * scale).round()).abs() < 1e-6
        {
            let k = scale.round();
            let first = (min * k).round();
            (0..count).map(|i| (first + i as f64) / k).collect()
        } else {
            (0..count).map(|i| min + i as f64 * step).collect()
        };
        Self::new(n, actions)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    /// Index of the grid point nearest to `theta`; ties go to the smaller one.
    pub fn snap_index(&self, theta: f64) -> usize {
        let i = self.actions.partition_point(|&a| a < theta);
        if i == 0 {
            return 0;
        }
        if i == self.actions.len() {
            return i - 1;
        }
        let below = theta - self.actions[i - 1];
        let above = self.actions[i] - theta;
        if above < below {
            i
        } else {
            i - 1
        }
    }

    /// Index of `theta` if it is exactly a grid point.
    pub fn action_index(&self, theta: f64) -> Option<usize> {
        let i = self.actions.partition_point(|&a| a < theta);
        (i < self.actions.len() && self.actions[i] == theta).then_some(i)
    }
}

/// `C(m, k) theta^k (1 - theta)^(m - k)`.
pub fn binomial_pmf(k: usize, m: usize, theta: f64) -> Result<f64> {
    if k > m {
        return Err(Error::domain(format!("k = {k} exceeds m = {m}")));
    }
    check_probability(theta)?;
    Ok(binomial_pmf_vec(m, theta)[k])
}

/// The whole `Bin(m, theta)` pmf for `k = 0..=m`.
///
/// Built by the ratio recurrence `p(k+1)/p(k) = (m-k)/(k+1) * theta/(1-theta)`
/// outward from the mode (where the unnormalised value is 1, so nothing can
/// overflow) and then normalised. Tail entries that underflow are exactly 0.
/// `theta` must already be validated to lie in `[0, 1]`.
pub fn binomial_pmf_vec(m: usize, theta: f64) -> Vec<f64> {
    let mut p = vec![0.0; m + 1];
    if theta == 0.0 {
        p[0] = 1.0;
        return p;
    }
    if theta == 1.0 {
        p[m] = 1.0;
        return p;
    }
    let odds = theta / (1.0 - theta);
    let mode = ((((m + 1) as f64) * theta).floor() as usize).min(m);
    p[mode] = 1.0;
    for k in mode..m {
        let next = p[k] * ((m - k) as f64 / (k + 1) as f64) * odds;
        if next == 0.0 {
            break;
        }
        p[k + 1] = next;
    }
    for k in (1..=mode).rev() {
        let prev = p[k] * (k as f64 / (m - k + 1) as f64) / odds;
        if prev == 0.0 {
            break;
        }
        p[k - 1] = prev;
    }
    let total: f64 = p.iter().sum();
    for x in &mut p {
        *x /= total;
    }
    p
}

fn check_probability(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::domain(format!("probability {theta} outside [0, 1]")))
    }
}

fn check_mutation_rate(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "mutation probability {theta} outside (0, 1]"
        )))
    }
}

/// Distribution of the net gain `Z = W - L` before selection.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGainDistribution {
    pub s: usize,
    pub n: usize,
    pub theta: f64,
    /// `-s`, the value of `z` at `probs[0]`.
    pub support_min: i64,
    /// `P(Z = z)` for `z = support_min ..= n - s`.
    pub probs: Vec<f64>,
}

impl NetGainDistribution {
    pub fn prob(&self, z: i64) -> f64 {
        let i = z - self.support_min;
        if i < 0 {
            return 0.0;
        }
        self.probs.get(i as usize).copied().unwrap_or(0.0)
    }

    pub fn support_max(&self) -> i64 {
        self.support_min + self.probs.len() as i64 - 1
    }
}

/// Convolution `P(Z = z) = sum_k P(W = k) P(L = k - z)`.
pub fn net_gain_pmf(s: usize, theta: f64, n: usize) -> Result<NetGainDistribution> {
    if s > n {
        return Err(Error::domain(format!("state {s} exceeds n = {n}")));
    }
    check_mutation_rate(theta)?;
    let gained = binomial_pmf_vec(n - s, theta);
    let lost = binomial_pmf_vec(s, theta);

    // Index i of `probs` is z = i - s. With the loss pmf reversed,
    // `w - l + s = w + (s - l)`, so each nonzero P(W = w) adds a scaled,
    // contiguous copy of the reversed loss pmf starting at index w.
    let reversed: Vec<f64> = lost.iter().rev().copied().collect();
    let (lo, hi) = nonzero_span(&reversed);
    let band = &reversed[lo..=hi];
    let mut probs = vec![0.0; n + 1];
    for (w, &pw) in gained.iter().enumerate() {
        if pw == 0.0 {
            continue;
        }
        let out = &mut probs[w + lo..=w + hi];
        for (o, &pl) in out.iter_mut().zip(band) {
            *o += pw * pl;
        }
    }
    Ok(NetGainDistribution {
        s,
        n,
        theta,
        support_min: -(s as i64),
        probs,
    })
}

fn nonzero_span(p: &[f64]) -> (usize, usize) {
    let lo = p.iter().position(|&x| x != 0.0).unwrap_or(0);
    let hi = p.iter().rposition(|&x| x != 0.0).unwrap_or(0);
    (lo, hi)
}

/// Successor distribution from state `s` under mutation rate `theta`.
///
/// `probs[k]` is `P(s' = s + k)`; trailing zeros are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRow {
    pub s: usize,
    pub theta: f64,
    probs: Vec<f64>,
}

impl TransitionRow {
    /// `probs[k]` is the mass at `s + k`. Trailing exact zeros are dropped.
    pub fn new(s: usize, theta: f64, mut probs: Vec<f64>) -> Self {
        while probs.len() > 1 && probs.last() == Some(&0.0) {
            probs.pop();
        }
        if probs.is_empty() {
            probs.push(0.0);
        }
        Self { s, theta, probs }
    }

    pub fn absorbing(s: usize, theta: f64) -> Self {
        Self {
            s,
            theta,
            probs: vec![1.0],
        }
    }

    /// Stored masses for `s' = s, s + 1, ...`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, s_next: usize) -> f64 {
        if s_next < self.s {
            return 0.0;
        }
        self.probs.get(s_next - self.s).copied().unwrap_or(0.0)
    }

    pub fn stay_prob(&self) -> f64 {
        self.probs[0]
    }

    /// `P(s' > s)`, summed directly rather than as `1 - stay`.
    pub fn improvement_prob(&self) -> f64 {
        self.probs[1..].iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Highest successor state with stored mass.
    pub fn max_successor(&self) -> usize {
        self.s + self.probs.len() - 1
    }

    /// `(s', P(s' | s, theta))` over the stored support.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(k, &p)| (self.s + k, p))
    }

    /// Expected value of `values[s']` over the improving successors only.
    pub(crate) fn improving_dot(&self, values: &[f64]) -> f64 {
        self.probs[1..]
            .iter()
            .zip(&values[self.s + 1..])
            .map(|(p, v)| p * v)
            .sum()
    }
}

/// Collapses all non-improving mass onto the self-loop.
pub fn elitist_truncate(d: &NetGainDistribution) -> TransitionRow {
    let zero = (-d.support_min) as usize;
    let stay: f64 = d.probs[..=zero].iter().sum();
    let mut probs = Vec::with_capacity(d.probs.len() - zero);
    probs.push(stay);
    probs.extend_from_slice(&d.probs[zero + 1..]);
    TransitionRow::new(d.s, d.theta, probs)
}

/// Transition row for any `theta` in (0, 1], on or off the grid.
pub fn transition_row(s: usize, theta: f64, n: usize) -> Result<TransitionRow> {
    if s == n {
        check_mutation_rate(theta)?;
        return Ok(TransitionRow::absorbing(s, theta));
    }
    Ok(elitist_truncate(&net_gain_pmf(s, theta, n)?))
}

/// `P(s' | s, theta)` for every state and every grid action.
#[derive(Debug, Clone)]
pub struct TransitionModel {
    spec: ProblemSpec,
    rows: Vec<TransitionRow>,
}

impl TransitionModel {
    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn num_actions(&self) -> usize {
        self.spec.actions.len()
    }

    pub fn row(&self, s: usize, action: usize) -> &TransitionRow {
        &self.rows[s * self.num_actions() + action]
    }

    /// Rows for state `s`, one per action in grid order.
    pub fn rows_for(&self, s: usize) -> &[TransitionRow] {
        let a = self.num_actions();
        &self.rows[s * a..(s + 1) * a]
    }

    pub fn rows(&self) -> &[TransitionRow] {
        &self.rows
    }

    /// CSV with header `s,theta,s_prime,prob`, one line per nonzero entry.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "s,theta,s_prime,prob")?;
        for row in &self.rows {
            for (s_next, p) in row.iter() {
                if p != 0.0 {
                    writeln!(
                        out,
                        "{},{},{},{}",
                        row.s,
                        sig17(row.theta),
                        s_next,
                        sig17(p)
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Builds every row of the model. Rows are independent, so they are
/// computed in parallel; the result does not depend on scheduling.
pub fn build_transition_model(spec: &ProblemSpec) -> TransitionModel {
    let n = spec.n;
    let actions = &spec.actions;
    let rows = (0..(n + 1) * actions.len())
        .into_par_iter()
        .map(|i| {
            let s = i / actions.len();
            let theta = actions[i % actions.len()];
            transition_row(s, theta, n).expect("spec actions are validated")
        })
        .collect();
    TransitionModel {
        spec: spec.clone(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn binomial_trivial_values() {
        assert_eq!(binomial_pmf(0, 5, 0.0).unwrap(), 1.0);
        assert_eq!(binomial_pmf(5, 5, 1.0).unwrap(), 1.0);
        assert_eq!(binomial_pmf(4, 5, 1.0).unwrap(), 0.0);
        assert!(close(binomial_pmf(2, 2, 0.5).unwrap(), 0.25, 1e-16));
        assert!(close(binomial_pmf(1, 3, 0.5).unwrap(), 0.375, 1e-15));
    }

    #[test]
    fn binomial_domain_errors() {
        assert!(matches!(binomial_pmf(3, 2, 0.5), Err(Error::Domain(_))));
        assert!(matches!(binomial_pmf(0, 2, 1.5), Err(Error::Domain(_))));
        assert!(matches!(binomial_pmf(0, 2, -0.1), Err(Error::Domain(_))));
        assert!(binomial_pmf(0, 2, f64::NAN).is_err());
    }

    #[test]
    fn binomial_large_m_is_normalised() {
        for &theta in &[0.01, 0.5, 0.99] {
            let p = binomial_pmf_vec(1000, theta);
            let total: f64 = p.iter().sum();
            assert!(close(total, 1.0, 1e-13), "theta {theta}: {total}");
            assert!(p.iter().all(|&x| x >= 0.0 && x.is_finite()));
        }
        // Mean of Bin(1000, 0.3).
        let p = binomial_pmf_vec(1000, 0.3);
        let mean: f64 = p.iter().enumerate().map(|(k, x)| k as f64 * x).sum();
        assert!(close(mean, 300.0, 1e-9));
    }

    #[test]
    fn binomial_matches_direct_formula_small_m() {
        // C(10, k) 0.3^k 0.7^(10-k) with exact integer binomials.
        let choose = [
            1.0, 10.0, 45.0, 120.0, 210.0, 252.0, 210.0, 120.0, 45.0, 10.0, 1.0,
        ];
        let p = binomial_pmf_vec(10, 0.3);
        for k in 0..=10 {
            let direct = choose[k] * 0.3f64.powi(k as i32) * 0.7f64.powi(10 - k as i32);
            assert!(close(p[k], direct, 1e-15), "k = {k}");
        }
    }

    #[test]
    fn net_gain_enumerated_example() {
        let d = net_gain_pmf(1, 0.5, 3).unwrap();
        assert_eq!(d.support_min, -1);
        assert_eq!(d.support_max(), 2);
        let expected = [1.0 / 8.0, 3.0 / 8.0, 3.0 / 8.0, 1.0 / 8.0];
        for (z, e) in (-1..=2).zip(expected) {
            assert!(close(d.prob(z), e, 1e-15), "z = {z}");
        }
    }

    #[test]
    fn net_gain_full_flips() {
        let n = 7;
        let d = net_gain_pmf(n, 1.0, n).unwrap();
        assert_eq!(d.prob(-(n as i64)), 1.0);
        let d = net_gain_pmf(0, 1.0, n).unwrap();
        assert_eq!(d.prob(n as i64), 1.0);
        // s = n: Z = -L with L ~ Bin(n, theta).
        let d = net_gain_pmf(n, 0.3, n).unwrap();
        let lost = binomial_pmf_vec(n, 0.3);
        for (l, &p) in lost.iter().enumerate() {
            assert!(close(d.prob(-(l as i64)), p, 1e-15));
        }
    }

    #[test]
    fn net_gain_rejects_bad_input() {
        assert!(net_gain_pmf(4, 0.5, 3).is_err());
        assert!(net_gain_pmf(1, 0.0, 3).is_err());
        assert!(net_gain_pmf(1, 1.2, 3).is_err());
    }

    #[test]
    fn truncation_examples() {
        let row = elitist_truncate(&net_gain_pmf(1, 0.5, 3).unwrap());
        assert!(close(row.prob(1), 0.5, 1e-15));
        assert!(close(row.prob(2), 0.375, 1e-15));
        assert!(close(row.prob(3), 0.125, 1e-15));
        assert_eq!(row.prob(0), 0.0);

        let row = elitist_truncate(&net_gain_pmf(5, 1.0, 5).unwrap());
        assert_eq!(row.prob(5), 1.0);
        assert_eq!(row.probs(), &[1.0]);
    }

    #[test]
    fn truncation_is_identity_without_nonpositive_mass() {
        // s = 0, theta = 1: all mass at z = n > 0.
        let d = net_gain_pmf(0, 1.0, 4).unwrap();
        let row = elitist_truncate(&d);
        for k in 0..=4 {
            assert_eq!(row.prob(k), d.prob(k as i64));
        }
        // Hand-built distribution with all mass strictly positive.
        let d = NetGainDistribution {
            s: 2,
            n: 5,
            theta: 0.5,
            support_min: -2,
            probs: vec![0.0, 0.0, 0.0, 0.25, 0.5, 0.25],
        };
        let row = elitist_truncate(&d);
        assert_eq!(row.stay_prob(), 0.0);
        assert_eq!((row.prob(3), row.prob(4), row.prob(5)), (0.25, 0.5, 0.25));
    }

    #[test]
    fn model_examples() {
        let spec = ProblemSpec::new(1, vec![1.0]).unwrap();
        let model = build_transition_model(&spec);
        assert_eq!(model.row(0, 0).prob(1), 1.0);
        assert_eq!(model.row(0, 0).stay_prob(), 0.0);
        assert_eq!(model.row(1, 0).probs(), &[1.0]);

        let spec = ProblemSpec::new(2, vec![0.5]).unwrap();
        let row = build_transition_model(&spec).row(0, 0).clone();
        assert!(close(row.prob(0), 0.25, 1e-15));
        assert!(close(row.prob(1), 0.5, 1e-15));
        assert!(close(row.prob(2), 0.25, 1e-15));

        let spec = ProblemSpec::new(3, vec![0.5]).unwrap();
        let model = build_transition_model(&spec);
        let expected = elitist_truncate(&net_gain_pmf(1, 0.5, 3).unwrap());
        assert_eq!(model.row(1, 0), &expected);
    }

    #[test]
    fn default_grid_is_exact() {
        let spec = ProblemSpec::with_default_grid(50).unwrap();
        assert_eq!(spec.num_actions(), 100);
        assert_eq!(spec.actions()[0], 0.01);
        assert_eq!(spec.actions()[1], 0.02);
        assert_eq!(spec.actions()[32], 0.33);
        assert_eq!(spec.actions()[99], 1.0);
        assert_eq!(spec.action_index(1.0 / 50.0), Some(1));
    }

    #[test]
    fn spec_validation() {
        assert!(ProblemSpec::new(0, vec![0.5]).is_err());
        assert!(ProblemSpec::new(3, vec![]).is_err());
        assert!(ProblemSpec::new(3, vec![0.0, 0.5]).is_err());
        assert!(ProblemSpec::new(3, vec![0.5, 1.1]).is_err());
        assert!(ProblemSpec::new(3, vec![0.5, 0.5]).is_err());
        assert!(ProblemSpec::new(3, vec![0.6, 0.5]).is_err());
        assert!(ProblemSpec::with_grid(3, 0.0, 1.0, 0.01).is_err());
    }

    #[test]
    fn snapping_breaks_ties_downward() {
        let spec = ProblemSpec::new(3, vec![0.25, 0.5, 0.75]).unwrap();
        assert_eq!(spec.snap_index(0.375), 0);
        assert_eq!(spec.snap_index(0.4), 1);
        assert_eq!(spec.snap_index(0.01), 0);
        assert_eq!(spec.snap_index(1.0), 2);
        assert_eq!(spec.snap_index(0.5), 1);
    }

    #[test]
    fn csv_export_lists_nonzero_entries() {
        let spec = ProblemSpec::new(2, vec![0.5, 1.0]).unwrap();
        let model = build_transition_model(&spec);
        let mut buf = Vec::new();
        model.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "s,theta,s_prime,prob");
        assert!(lines.contains(&"0,0.5,0,0.25"));
        assert!(lines.contains(&"0,1,2,1"));
        // s = 1, theta = 1 flips 1 -> 1 ones: self-loop only.
        assert!(lines.contains(&"1,1,1,1"));
        assert!(lines.iter().all(|l| !l.ends_with(",0")));
    }
}
