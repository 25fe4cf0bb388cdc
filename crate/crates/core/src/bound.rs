//! Exact rational suboptimality factors.
//!
//! Every `cost ≤ ε·lb` test in the solvers runs on integers: costs and lower
//! bounds are integral, so the test reduces to `cost ≤ ⌊ε·lb⌋`.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use thiserror::Error;

/// A suboptimality factor `ε ≥ 1`, held as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bound(Ratio<u64>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundError {
    #[error("suboptimality bound must be at least 1, got {0}")]
    BelowOne(String),
    #[error("cannot parse suboptimality bound {0:?}")]
    Syntax(String),
}

impl Bound {
    pub const ONE: Bound = Bound(Ratio::new_raw(1, 1));

    pub fn new(numer: u64, denom: u64) -> Result<Self, BoundError> {
        if denom == 0 {
            return Err(BoundError::Syntax(format!("{numer}/{denom}")));
        }
        let r = Ratio::new(numer, denom);
        if r < Ratio::from_integer(1) {
            return Err(BoundError::BelowOne(format!("{numer}/{denom}")));
        }
        Ok(Bound(r))
    }

    pub fn integer(n: u64) -> Result<Self, BoundError> {
        Self::new(n, 1)
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn is_one(&self) -> bool {
        self.numer() == self.denom()
    }

    pub fn as_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// `⌊ε·lb⌋`: the largest integer cost admitted against lower bound `lb`.
    pub fn threshold(&self, lb: u64) -> u64 {
        let v = (self.numer() as u128 * lb as u128) / self.denom() as u128;
        v.min(u64::MAX as u128) as u64
    }

    /// Exact `cost ≤ ε·lb`.
    pub fn admits(&self, cost: u64, lb: u64) -> bool {
        cost as u128 * self.denom() as u128 <= self.numer() as u128 * lb as u128
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

/// Accepts integers (`10`), fractions (`7/6`) and finite decimals (`1.15`);
/// decimals are converted exactly.
impl FromStr for Bound {
    type Err = BoundError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let syntax = || BoundError::Syntax(s.to_string());
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| syntax())?;
            let d = d.trim().parse().map_err(|_| syntax())?;
            return Bound::new(n, d);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty()
            || !int.bytes().all(|b| b.is_ascii_digit())
            || !frac.bytes().all(|b| b.is_ascii_digit())
            || frac.len() > 12
        {
            return Err(syntax());
        }
        let denom = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| syntax())? };
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| syntax())? };
        let numer = int
            .checked_mul(denom)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(syntax)?;
        Bound::new(numer, denom)
    }
}

/// Exact ratio `cost / lb`, the proven suboptimality of a solution.
pub fn proven_ratio(cost: u64, lb: u64) -> Ratio<u64> {
    Ratio::new(cost, lb.max(1))
}
