//! Box and Hausdorff dimensions of Bedford–McMullen carpets with holes.
//!
//! A carpet is fixed by integers `2 <= m < n` and a digit set
//! `D ⊆ {0..n} × {0..m}`. Holes are finite sets of forbidden symbolic words
//! of uniform length; the survivor set is everything whose forward orbit never
//! enters the hole. The crate computes escape rates of Bernoulli measures
//! through such holes as Perron roots of hole-restricted transfer operators,
//! the dimension formulas and bounds built from them, shrinking-hole
//! asymptotics, and brute-force oracles for cross-checking at small depth.

pub mod carpet;
pub mod dimension;
mod error;
pub mod escape;
pub mod numerics;
pub mod oracle;
pub mod symbolic;
mod weights;

pub use carpet::{Carpet, CarpetDoc, CellRect};
pub use error::{Error, Result};
pub use weights::BernoulliWeights;

/// A word over a finite alphabet, stored as symbol indices.
pub type Word = Vec<usize>;

/// Work limits shared by every enumeration and dynamic program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    /// Largest admissible state space or cell enumeration.
    pub max_states: u64,
    /// Largest admissible number of dynamic-programming cell updates.
    pub max_updates: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_states: 2_000_000,
            max_updates: 50_000_000,
        }
    }
}

impl Budget {
    pub fn with_max_states(max_states: u64) -> Self {
        Self {
            max_states,
            ..Self::default()
        }
    }

    pub(crate) fn check_states(&self, what: &'static str, needed: u128) -> Result<()> {
        if needed > self.max_states as u128 {
            return Err(Error::BudgetExceeded {
                what,
                needed,
                limit: self.max_states,
            });
        }
        Ok(())
    }

    pub(crate) fn check_updates(&self, what: &'static str, needed: u128) -> Result<()> {
        if needed > self.max_updates as u128 {
            return Err(Error::BudgetExceeded {
                what,
                needed,
                limit: self.max_updates,
            });
        }
        Ok(())
    }
}

/// `base^exp` without overflow; saturates at `u128::MAX`.
pub(crate) fn checked_pow(base: usize, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = match acc.checked_mul(base as u128) {
            Some(v) => v,
            None => return u128::MAX,
        };
    }
    acc
}
