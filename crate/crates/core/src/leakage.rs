//! Index-leakage analysis: closed-form entropies of the per-segment sparse
//! count vector (ordered and as a multiset) and a brute-force mutual
//! information oracle that enumerates permutations exactly.
//!
//! All probabilities are exact rationals; entropies are exact [`LogSum`]s
//! with `f64` projections in bits.

use std::collections::BTreeMap;

use itertools::Itertools;
use num::rational::BigRational;
use num::{BigInt, One, Zero};
use rand::Rng;

use crate::error::Error;
use crate::logsum::LogSum;

/// A distribution over the user's sparse index set: `Pr`-subsets of
/// `{0..P-1}` with exact rational probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternDistribution {
    pub p: usize,
    pub b: usize,
    pub pr: usize,
    pub mass: BTreeMap<Vec<usize>, BigRational>,
}

impl PatternDistribution {
    pub fn validate(&self) -> Result<(), Error> {
        if self.b == 0 || !self.p.is_multiple_of(self.b) {
            return Err(Error::InvalidB(self.b));
        }
        let mut total = BigRational::zero();
        for (x, prob) in &self.mass {
            if x.len() != self.pr
                || !x.windows(2).all(|w| w[0] < w[1])
                || x.iter().any(|&i| i >= self.p)
            {
                return Err(Error::InvalidDistribution(format!(
                    "support element {x:?} is not a {}-subset of 0..{}",
                    self.pr, self.p
                )));
            }
            if prob < &BigRational::zero() {
                return Err(Error::InvalidDistribution("negative probability".into()));
            }
            total += prob;
        }
        if !total.is_one() {
            return Err(Error::InvalidDistribution(format!("mass sums to {total}, not 1")));
        }
        Ok(())
    }

    /// Uniform over all C(P, Pr) subsets.
    pub fn uniform(p: usize, b: usize, pr: usize) -> Result<Self, Error> {
        let subsets: Vec<Vec<usize>> = (0..p).combinations(pr).collect();
        let prob = BigRational::new(BigInt::one(), BigInt::from(subsets.len()));
        let mass = subsets.into_iter().map(|x| (x, prob.clone())).collect();
        let d = Self { p, b, pr, mass };
        d.validate()?;
        Ok(d)
    }

    /// Random integer weights over the full support, normalized exactly.
    pub fn random<R: Rng>(p: usize, b: usize, pr: usize, rng: &mut R) -> Result<Self, Error> {
        let subsets: Vec<Vec<usize>> = (0..p).combinations(pr).collect();
        let weights: Vec<u64> = subsets.iter().map(|_| rng.gen_range(1..=20)).collect();
        let total: u64 = weights.iter().sum();
        let mass = subsets
            .into_iter()
            .zip(weights)
            .map(|(x, w)| (x, BigRational::new(BigInt::from(w), BigInt::from(total))))
            .collect();
        let d = Self { p, b, pr, mass };
        d.validate()?;
        Ok(d)
    }
}

/// Per-segment sparse counts of one index set; segment `i` covers the
/// consecutive subpackets `[i*P/B, (i+1)*P/B)`.
pub fn histogram_of(x: &[usize], p: usize, b: usize) -> Result<Vec<usize>, Error> {
    if b == 0 || !p.is_multiple_of(b) {
        return Err(Error::InvalidB(b));
    }
    let seg = p / b;
    let mut h = vec![0usize; b];
    for &i in x {
        if i >= p {
            return Err(Error::IndexOutOfRange(format!("subpacket {i} >= P = {p}")));
        }
        h[i / seg] += 1;
    }
    Ok(h)
}

fn induced<F>(dist: &PatternDistribution, key: F) -> Result<BTreeMap<Vec<usize>, BigRational>, Error>
where
    F: Fn(Vec<usize>) -> Vec<usize>,
{
    let mut out: BTreeMap<Vec<usize>, BigRational> = BTreeMap::new();
    for (x, prob) in &dist.mass {
        let h = key(histogram_of(x, dist.p, dist.b)?);
        *out.entry(h).or_insert_with(BigRational::zero) += prob;
    }
    Ok(out)
}

fn entropy_of(map: &BTreeMap<Vec<usize>, BigRational>) -> Result<LogSum, Error> {
    let mut s = LogSum::zero();
    for prob in map.values() {
        if !prob.is_zero() {
            s.add_term(&-prob.clone(), prob)?;
        }
    }
    Ok(s)
}

/// Exact `H(X_hat_1, ..., X_hat_B)`: entropy of the ordered count vector.
pub fn entropy_hat_exact(dist: &PatternDistribution) -> Result<LogSum, Error> {
    dist.validate()?;
    entropy_of(&induced(dist, |h| h)?)
}

/// Exact `H(X_tilde_1, ..., X_tilde_B)`: entropy of the count multiset.
pub fn entropy_tilde_exact(dist: &PatternDistribution) -> Result<LogSum, Error> {
    dist.validate()?;
    entropy_of(&induced(dist, |mut h| {
        h.sort_unstable();
        h
    })?)
}

pub fn entropy_hat(dist: &PatternDistribution) -> Result<f64, Error> {
    Ok(entropy_hat_exact(dist)?.to_f64())
}

pub fn entropy_tilde(dist: &PatternDistribution) -> Result<f64, Error> {
    Ok(entropy_tilde_exact(dist)?.to_f64())
}

/// Which permutations the observing databases cannot see through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiMode {
    WithinOnly,
    WithinInter,
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// Exact `I(X; Y)` where `Y` is the observed set of permuted indices under
/// uniformly random within-segment permutations (plus a uniform
/// inter-segment permutation in [`MiMode::WithinInter`]).
pub fn brute_force_mi_exact(dist: &PatternDistribution, mode: MiMode) -> Result<LogSum, Error> {
    dist.validate()?;
    let seg = dist.p / dist.b;
    let inter_count = match mode {
        MiMode::WithinOnly => 1u128,
        MiMode::WithinInter => factorial(dist.b),
    };
    let total = factorial(seg)
        .checked_pow(dist.b as u32)
        .and_then(|w| w.checked_mul(inter_count))
        .and_then(|w| w.checked_mul(dist.mass.len() as u128))
        .ok_or(Error::InfeasibleEnumeration(u128::MAX))?;
    if total > 10_000_000 {
        return Err(Error::InfeasibleEnumeration(total));
    }

    let within_perms: Vec<Vec<usize>> = (0..seg).permutations(seg).collect();
    let inter_perms: Vec<Vec<usize>> = match mode {
        MiMode::WithinOnly => vec![(0..dist.b).collect()],
        MiMode::WithinInter => (0..dist.b).permutations(dist.b).collect(),
    };
    let perm_count = BigInt::from(within_perms.len().pow(dist.b as u32) * inter_perms.len());

    // Joint distribution over (x, y); y is the sorted permuted index set.
    let mut joint: BTreeMap<(Vec<usize>, Vec<(usize, usize)>), BigRational> = BTreeMap::new();
    let mut y_marginal: BTreeMap<Vec<(usize, usize)>, BigRational> = BTreeMap::new();
    for (x, prob) in &dist.mass {
        let weight = prob / BigRational::from(perm_count.clone());
        for combo in (0..dist.b).map(|_| within_perms.iter()).multi_cartesian_product() {
            for hat in &inter_perms {
                // perm maps permuted slot -> real index; observing real
                // index r means slot position_of(r).
                let mut y: Vec<(usize, usize)> = x
                    .iter()
                    .map(|&i| {
                        let (seg_r, sub_r) = (i / seg, i % seg);
                        let sub_p = combo[seg_r].iter().position(|&v| v == sub_r).unwrap();
                        let seg_p = hat.iter().position(|&v| v == seg_r).unwrap();
                        (seg_p, sub_p)
                    })
                    .collect();
                y.sort_unstable();
                *joint
                    .entry((x.clone(), y.clone()))
                    .or_insert_with(BigRational::zero) += &weight;
                *y_marginal.entry(y).or_insert_with(BigRational::zero) += &weight;
            }
        }
    }

    let mut mi = LogSum::zero();
    for ((x, y), pxy) in &joint {
        let px = &dist.mass[x];
        let py = &y_marginal[y];
        mi.add_term(pxy, &(pxy / (px * py)))?;
    }
    Ok(mi)
}

pub fn brute_force_mi(dist: &PatternDistribution, mode: MiMode) -> Result<f64, Error> {
    Ok(brute_force_mi_exact(dist, mode)?.to_f64())
}

/// One leakage-curve row.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LeakageRow {
    pub b: usize,
    pub h_hat_bits: f64,
    pub h_tilde_bits: f64,
}

/// Closed-form leakage for the uniform pattern family across segment counts.
pub fn leakage_curve(p: usize, pr: usize, b_list: &[usize]) -> Result<Vec<LeakageRow>, Error> {
    b_list
        .iter()
        .map(|&b| {
            if b == 0 || !p.is_multiple_of(b) {
                return Err(Error::InvalidB(b));
            }
            let dist = PatternDistribution::uniform(p, b, pr)?;
            Ok(LeakageRow {
                b,
                h_hat_bits: entropy_hat(&dist)?,
                h_tilde_bits: entropy_tilde(&dist)?,
            })
        })
        .collect()
}

/// Render a value with 12 significant digits.
pub fn sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (11 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// CSV with header `B,H_hat_bits,H_tilde_bits`.
pub fn leakage_csv(rows: &[LeakageRow]) -> String {
    let mut out = String::from("B,H_hat_bits,H_tilde_bits\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.b, sig12(r.h_hat_bits), sig12(r.h_tilde_bits)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn histogram_fixtures() {
        assert_eq!(histogram_of(&[0, 1, 2], 12, 3).unwrap(), vec![3, 0, 0]);
        assert_eq!(histogram_of(&[0, 4, 8], 12, 3).unwrap(), vec![1, 1, 1]);
        assert_eq!(histogram_of(&[0, 4, 8], 12, 1).unwrap(), vec![3]);
        assert!(histogram_of(&[12], 12, 3).is_err());
        assert!(histogram_of(&[0], 12, 5).is_err());
    }

    #[test]
    fn b1_entropies_are_zero() {
        let dist = PatternDistribution::uniform(6, 1, 2).unwrap();
        assert!(entropy_hat_exact(&dist).unwrap().is_zero());
        assert!(entropy_tilde_exact(&dist).unwrap().is_zero());
    }

    #[test]
    fn point_mass_entropy_is_zero() {
        let mut mass = BTreeMap::new();
        mass.insert(vec![0, 3], BigRational::one());
        let dist = PatternDistribution { p: 6, b: 3, pr: 2, mass };
        assert_eq!(entropy_hat(&dist).unwrap(), 0.0);
        assert_eq!(entropy_tilde(&dist).unwrap(), 0.0);
    }

    #[test]
    fn tilde_never_exceeds_hat() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let dist = PatternDistribution::random(6, 3, 2, &mut rng).unwrap();
            assert!(
                entropy_tilde(&dist).unwrap() <= entropy_hat(&dist).unwrap() + 1e-12
            );
        }
    }

    #[test]
    fn oracle_matches_closed_forms_small() {
        let dist = PatternDistribution::uniform(4, 2, 2).unwrap();
        let mi_w = brute_force_mi_exact(&dist, MiMode::WithinOnly).unwrap();
        assert!(mi_w.sub(&entropy_hat_exact(&dist).unwrap()).is_zero());
        let mi_i = brute_force_mi_exact(&dist, MiMode::WithinInter).unwrap();
        assert!(mi_i.sub(&entropy_tilde_exact(&dist).unwrap()).is_zero());
        // Frozen numeric values for this instance.
        assert!((mi_w.to_f64() - 1.2516291673878228).abs() < 1e-12);
        assert!((mi_i.to_f64() - 0.9182958340544896).abs() < 1e-12);
    }

    #[test]
    fn infeasible_enumeration_rejected() {
        let dist = PatternDistribution::uniform(12, 1, 2).unwrap();
        assert!(matches!(
            brute_force_mi_exact(&dist, MiMode::WithinOnly),
            Err(Error::InfeasibleEnumeration(_))
        ));
    }

    #[test]
    fn curve_fixture_p12() {
        let rows = leakage_curve(12, 3, &[1, 2, 3, 4, 6]).unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[0].h_hat_bits, 0.0);
        assert_eq!(rows[0].h_tilde_bits, 0.0);
        // Frozen enumeration values.
        let expect_hat = [0.0, 1.6840384356390419, 2.9257478948708115, 3.8909972117545477, 5.326814258979207];
        let expect_tilde = [0.0, 0.6840384356390417, 1.1473199398139922, 1.112924711400527, 0.8453509366224364];
        for (i, r) in rows.iter().enumerate() {
            assert!((r.h_hat_bits - expect_hat[i]).abs() < 1e-9, "B={}", r.b);
            assert!((r.h_tilde_bits - expect_tilde[i]).abs() < 1e-9, "B={}", r.b);
            assert!(r.h_tilde_bits <= r.h_hat_bits + 1e-12);
        }
        // H_hat is nondecreasing in B on this family.
        for w in rows.windows(2) {
            assert!(w[0].h_hat_bits <= w[1].h_hat_bits + 1e-12);
        }
    }

    #[test]
    fn curve_rejects_bad_b() {
        assert!(matches!(leakage_curve(12, 3, &[5]), Err(Error::InvalidB(5))));
    }

    #[test]
    fn csv_shape() {
        let rows = leakage_curve(12, 3, &[1, 3]).unwrap();
        let csv = leakage_csv(&rows);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines[0], "B,H_hat_bits,H_tilde_bits");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1,0,0"));
        assert!(lines[2].starts_with("3,2.9257478948"));
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(2.5), "2.5");
        assert_eq!(sig12(2.9257478948708115), "2.92574789487");
    }
}
