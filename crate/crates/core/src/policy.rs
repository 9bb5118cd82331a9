//! Mutation-rate control policies and their CSV form.
//!
//! ```text
//! # policy: table            # policy: constant:0.02      # policy: reciprocal
//! state,theta
//! 0,1.0
//! 1,0.79
//! ```

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::probability::ProblemSpec;

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// The same `theta` in every state.
    Constant(f64),
    /// `theta = 1 / (1 + s)`.
    Reciprocal,
    /// `theta` for each non-terminal state `0..n`.
    Table(Vec<f64>),
}

fn valid_theta(theta: f64) -> bool {
    theta > 0.0 && theta <= 1.0
}

impl PolicySpec {
    pub fn constant(theta: f64) -> Result<Self> {
        if !valid_theta(theta) {
            return Err(Error::Domain(format!(
                "constant theta {theta} outside (0, 1]"
            )));
        }
        Ok(PolicySpec::Constant(theta))
    }

    pub fn table(entries: Vec<f64>) -> Result<Self> {
        if let Some((s, theta)) = entries.iter().enumerate().find(|(_, t)| !valid_theta(**t)) {
            return Err(Error::Domain(format!(
                "state {s}: theta {theta} outside (0, 1]"
            )));
        }
        Ok(PolicySpec::Table(entries))
    }

    /// Mutation rate in non-terminal state `s`, exactly as specified.
    pub fn theta_for_state(&self, s: usize, spec: &ProblemSpec) -> Result<f64> {
        let n = spec.n();
        if s >= n {
            return Err(Error::Domain(format!(
                "state {s} is terminal or out of range for n = {n}"
            )));
        }
        match self {
            PolicySpec::Constant(theta) => Ok(*theta),
            PolicySpec::Reciprocal => Ok(1.0 / (1.0 + s as f64)),
            PolicySpec::Table(entries) => {
                if entries.len() != n {
                    return Err(Error::Domain(format!(
                        "table covers {} states, problem has {n}",
                        entries.len()
                    )));
                }
                Ok(entries[s])
            }
        }
    }

    /// Index of the grid action nearest to `theta_for_state(s)`.
    pub fn grid_action(&self, s: usize, spec: &ProblemSpec) -> Result<usize> {
        Ok(spec.snap_index(self.theta_for_state(s, spec)?))
    }

    /// Checks that the policy is defined on every non-terminal state of `spec`.
    pub fn check(&self, spec: &ProblemSpec) -> Result<()> {
        match self {
            PolicySpec::Table(entries) if entries.len() != spec.n() => Err(Error::Domain(format!(
                "table covers {} states, problem has {}",
                entries.len(),
                spec.n()
            ))),
            _ => Ok(()),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        match self {
            PolicySpec::Constant(theta) => writeln!(out, "# policy: constant:{theta:?}")?,
            PolicySpec::Reciprocal => writeln!(out, "# policy: reciprocal")?,
            PolicySpec::Table(entries) => {
                writeln!(out, "# policy: table")?;
                writeln!(out, "state,theta")?;
                for (s, theta) in entries.iter().enumerate() {
                    writeln!(out, "{s},{theta:?}")?;
                }
            }
        }
        Ok(())
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        let (line_no, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty policy file"))?;
        let kind = header
            .strip_prefix('#')
            .map(str::trim)
            .and_then(|h| h.strip_prefix("policy:"))
            .map(str::trim)
            .ok_or_else(|| Error::parse(line_no, "expected `# policy: <kind>` header"))?;

        let policy = if kind == "reciprocal" {
            PolicySpec::Reciprocal
        } else if let Some(theta) = kind.strip_prefix("constant:") {
            let theta = parse_theta(theta, line_no)?;
            PolicySpec::Constant(theta)
        } else if kind == "table" {
            return parse_table(lines);
        } else {
            return Err(Error::parse(
                line_no,
                format!("unknown policy kind `{kind}`"),
            ));
        };
        if let Some((line_no, _)) = lines.next() {
            return Err(Error::parse(
                line_no,
                "unexpected content after policy header",
            ));
        }
        Ok(policy)
    }
}

fn parse_theta(field: &str, line_no: usize) -> Result<f64> {
    let theta: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(line_no, format!("bad theta `{field}`")))?;
    if !valid_theta(theta) {
        return Err(Error::parse(
            line_no,
            format!("theta {theta} outside (0, 1]"),
        ));
    }
    Ok(theta)
}

fn parse_table<'a>(mut lines: impl Iterator<Item = (usize, &'a str)>) -> Result<PolicySpec> {
    match lines.next() {
        Some((_, "state,theta")) => {}
        Some((line_no, other)) => {
            return Err(Error::parse(
                line_no,
                format!("expected `state,theta`, got `{other}`"),
            ))
        }
        None => return Err(Error::parse(2, "missing `state,theta` header")),
    }
    let mut entries = Vec::new();
    for (line_no, line) in lines {
        let (state, theta) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(line_no, "expected `state,theta`"))?;
        let state: usize = state
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, format!("bad state `{state}`")))?;
        let theta = parse_theta(theta, line_no)?;
        if state != entries.len() {
            let message = if state < entries.len() {
                format!("state {state} listed twice")
            } else {
                format!("missing state {} (found {state})", entries.len())
            };
            return Err(Error::parse(line_no, message));
        }
        entries.push(theta);
    }
    if entries.is_empty() {
        return Err(Error::parse(2, "table policy has no states"));
    }
    Ok(PolicySpec::Table(entries))
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Constant(theta) => write!(f, "constant({theta})"),
            PolicySpec::Reciprocal => write!(f, "reciprocal"),
            PolicySpec::Table(entries) => write!(f, "table({} states)", entries.len()),
        }
    }
}

pub fn save_policy(policy: &PolicySpec, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    policy.write_csv(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<PolicySpec> {
    PolicySpec::parse_csv(&fs::read_to_string(path)?)
}
