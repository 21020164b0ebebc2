//! Exact representation of sums `sum_i c_i * log2(a_i)` with rational
//! coefficients and positive rational arguments.
//!
//! Every argument is factored into primes, so the sum collapses to one
//! rational coefficient per prime.  Since `{log2 p : p prime}` is linearly
//! independent over the rationals, the sum is zero iff every per-prime
//! coefficient is zero; equality checks are therefore exact.

use std::collections::BTreeMap;

use num::rational::BigRational;
use num::{BigInt, Signed, ToPrimitive, Zero};

use crate::error::Error;

/// `sum_p coeff_p * log2(p)` over primes `p`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LogSum {
    coeffs: BTreeMap<u64, BigRational>,
}

fn factor(mut n: u64) -> Result<Vec<(u64, i64)>, Error> {
    if n == 0 {
        return Err(Error::InvalidDistribution("log of zero".into()));
    }
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            let mut e = 0i64;
            while n.is_multiple_of(d) {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    Ok(out)
}

fn to_u64(x: &BigInt) -> Result<u64, Error> {
    x.to_u64()
        .ok_or_else(|| Error::InvalidDistribution("log argument exceeds u64 factor range".into()))
}

impl LogSum {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Add `coeff * log2(arg)`; `arg` must be positive.
    pub fn add_term(&mut self, coeff: &BigRational, arg: &BigRational) -> Result<(), Error> {
        if !arg.is_positive() {
            return Err(Error::InvalidDistribution(format!("log argument {arg} <= 0")));
        }
        if coeff.is_zero() {
            return Ok(());
        }
        for (p, e) in factor(to_u64(arg.numer())?)? {
            let entry = self.coeffs.entry(p).or_insert_with(BigRational::zero);
            *entry += coeff * BigRational::from(BigInt::from(e));
        }
        for (p, e) in factor(to_u64(arg.denom())?)? {
            let entry = self.coeffs.entry(p).or_insert_with(BigRational::zero);
            *entry -= coeff * BigRational::from(BigInt::from(e));
        }
        self.coeffs.retain(|_, c| !c.is_zero());
        Ok(())
    }

    pub fn sub(&self, other: &LogSum) -> LogSum {
        let mut out = self.clone();
        for (p, c) in &other.coeffs {
            let entry = out.coeffs.entry(*p).or_insert_with(BigRational::zero);
            *entry -= c;
        }
        out.coeffs.retain(|_, c| !c.is_zero());
        out
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Numeric value in bits.
    pub fn to_f64(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(p, c)| c.to_f64().unwrap_or(f64::NAN) * (*p as f64).log2())
            .sum()
    }
}
