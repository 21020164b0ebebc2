//! Prime-field arithmetic and the evaluation-constant configuration shared by
//! every scheme.
//!
//! Elements are plain `u64` residues in `[0, q)`; all operations go through a
//! [`PrimeField`] context carrying the modulus.  The default modulus is the
//! Mersenne prime `2^31 - 1`, large enough for every decode system used here
//! while keeping products inside `u128`.

use crate::error::Error;

/// Default modulus: the Mersenne prime 2^31 - 1.
pub const DEFAULT_MODULUS: u64 = 2_147_483_647;

/// A prime field F_q.  All element values are residues in `[0, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimeField {
    q: u64,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

impl PrimeField {
    pub fn new(q: u64) -> Result<Self, Error> {
        if !is_prime(q) {
            return Err(Error::ConfigError(format!("{q} is not prime")));
        }
        Ok(Self { q })
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        x % self.q
    }

    /// Embed a signed integer as a residue.
    pub fn from_signed(&self, x: i64) -> u64 {
        let m = self.q as i64;
        (((x % m) + m) % m) as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.q { s - self.q } else { s }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b { a - b } else { a + self.q - b }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 { 0 } else { self.q - a }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.q as u128) as u64
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64;
        base %= self.q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by Fermat's little theorem.
    pub fn inv(&self, a: u64) -> Result<u64, Error> {
        if a.is_multiple_of(self.q) {
            return Err(Error::ZeroInverse);
        }
        Ok(self.pow(a, self.q - 2))
    }

    /// `a^{-k}` for a nonzero base; used by the coded-storage layouts.
    pub fn inv_pow(&self, a: u64, k: u64) -> Result<u64, Error> {
        self.inv(self.pow(a, k))
    }
}

/// Evaluation constants for one scheme instance: `f_1..f_ell` index the model
/// parameters within a subpacket and `alpha_1..alpha_N` index the databases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldConfig {
    field: PrimeField,
    f: Vec<u64>,
    alpha: Vec<u64>,
}

impl FieldConfig {
    /// Validates distinctness of all constants, `f_i != alpha_n` for every
    /// pair, nonzero `alpha_n` (negative powers must exist for the coded
    /// cases), and that the field has room: `ell + N + 1 <= q`.
    pub fn new(field: PrimeField, f: Vec<u64>, alpha: Vec<u64>) -> Result<Self, Error> {
        let q = field.modulus();
        if (f.len() + alpha.len() + 1) as u64 > q {
            return Err(Error::ConfigError(format!(
                "need ell + N + 1 <= q, got ell={} N={} q={q}",
                f.len(),
                alpha.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for &x in f.iter().chain(alpha.iter()) {
            if x >= q {
                return Err(Error::ConfigError(format!("constant {x} >= q")));
            }
            if !seen.insert(x) {
                return Err(Error::ConfigError(format!("constant {x} repeated")));
            }
        }
        if alpha.contains(&0) {
            return Err(Error::ConfigError("alpha_n must be nonzero".into()));
        }
        Ok(Self { field, f, alpha })
    }

    /// Deterministic defaults: `f_i = i` and `alpha_n = ell + n`.
    pub fn with_defaults(q: u64, ell: usize, n: usize) -> Result<Self, Error> {
        let field = PrimeField::new(q)?;
        let f = (1..=ell as u64).collect();
        let alpha = (1..=n as u64).map(|i| ell as u64 + i).collect();
        Self::new(field, f, alpha)
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn ell(&self) -> usize {
        self.f.len()
    }

    pub fn n_databases(&self) -> usize {
        self.alpha.len()
    }

    pub fn f(&self, k: usize) -> u64 {
        self.f[k]
    }

    pub fn alpha(&self, n: usize) -> u64 {
        self.alpha[n]
    }

    /// `f_k - alpha_n`, guaranteed nonzero by construction.
    pub fn f_minus_alpha(&self, k: usize, n: usize) -> u64 {
        self.field.sub(self.f[k], self.alpha[n])
    }

    /// `1 / (f_k - alpha_n)`: the Cauchy entry and the `Gamma_n` diagonal.
    pub fn cauchy(&self, k: usize, n: usize) -> u64 {
        self.field
            .inv(self.f_minus_alpha(k, n))
            .expect("f_k != alpha_n by FieldConfig invariant")
    }

    /// Diagonal of `Gamma_n`, entry k = 1/(f_k - alpha_n).
    pub fn gamma(&self, n: usize) -> Vec<u64> {
        (0..self.ell()).map(|k| self.cauchy(k, n)).collect()
    }

    /// `prod_{r != k} (f_r - f_k)` -- the denominator that normalizes the
    /// k-th update before it enters a combined-update symbol.  Nonzero by
    /// distinctness of the `f_i`; the empty product (`ell = 1`) is 1.
    pub fn lagrange_denominator(&self, k: usize) -> u64 {
        let mut acc = 1u64;
        for r in 0..self.ell() {
            if r != k {
                acc = self.field.mul(acc, self.field.sub(self.f[r], self.f[k]));
            }
        }
        acc
    }
}
