//! Brute-force transition rows by enumerating every mutation mask.
//!
//! Shares nothing with the convolution in [`crate::probability`] apart from
//! the row container; it exists to check that code.

use crate::error::{Error, Result};
use crate::probability::TransitionRow;

/// Largest `n` accepted by [`enumerate_transition_oracle`].
pub const MAX_ENUMERATION_BITS: usize = 16;

/// Applies all `2^n` masks to the bitstring with `s` leading ones, weights
/// each by `theta^f (1 - theta)^(n - f)` and applies strict-improvement
/// acceptance.
pub fn enumerate_transition_oracle(s: usize, theta: f64, n: usize) -> Result<TransitionRow> {
    if n > MAX_ENUMERATION_BITS {
        return Err(Error::Budget {
            n,
            max: MAX_ENUMERATION_BITS,
        });
    }
    if s > n {
        return Err(Error::Domain(format!("state {s} exceeds n = {n}")));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Domain(format!("probability {theta} outside [0, 1]")));
    }

    let parent: u32 = if s == 0 { 0 } else { u32::MAX >> (32 - s) };
    let mut mass = vec![0.0; n + 1];
    for mask in 0u32..(1u32 << n) {
        let flips = mask.count_ones() as i32;
        let weight = theta.powi(flips) * (1.0 - theta).powi(n as i32 - flips);
        let ones = (parent ^ mask).count_ones() as usize;
        let next = if ones > s { ones } else { s };
        mass[next] += weight;
    }
    Ok(TransitionRow::new(s, theta, mass.split_off(s)))
}
