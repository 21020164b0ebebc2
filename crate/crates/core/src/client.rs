//! User-side protocol engine: resolve downlink indices, decode answers,
//! rank and select local updates, and build the masked per-database upload
//! tuples.

use rand::Rng;

use crate::error::Error;
use crate::field::FieldConfig;
use crate::linalg::{solve_mixed_vandermonde, DecodeLayout};
use crate::node::{DownlinkSelection, ReadAnswer, UpdateTuple};
use crate::perm::{NoiseMode, PermutationSet};
use crate::scheme::SchemeParams;

/// The user's full gradient for one round: per real subpacket, `ell` field
/// deltas plus an integer ranking score.  Field residues carry no canonical
/// magnitude, so the score is supplied by the caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalUpdate {
    /// Indexed by global subpacket id; each entry holds `ell` deltas.
    pub deltas: Vec<Vec<u64>>,
    /// Ranking key per global subpacket id, larger = more significant.
    pub magnitudes: Vec<i64>,
}

impl LocalUpdate {
    pub fn validate(&self, params: &SchemeParams) -> Result<(), Error> {
        if self.deltas.len() != params.p_subpackets
            || self.magnitudes.len() != params.p_subpackets
            || self.deltas.iter().any(|d| d.len() != params.ell)
        {
            return Err(Error::DimensionMismatch(format!(
                "local update must cover all {} subpackets with {} deltas each",
                params.p_subpackets, params.ell
            )));
        }
        Ok(())
    }
}

/// A decoded downlink subpacket in real coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedSubpacket {
    pub real_id: (usize, usize),
    pub params: Vec<u64>,
}

/// Map the broadcast permuted indices to real `(segment, subpacket)` ids.
pub fn resolve_downlink(
    ps: &PermutationSet,
    params: &SchemeParams,
    sel: &DownlinkSelection,
) -> Result<Vec<(usize, usize)>, Error> {
    sel.targets
        .iter()
        .map(|&(s, u)| ps.permuted_to_real(params.case, s, u))
        .collect()
}

/// Solve the case decode system from one answer per database and return the
/// `ell` subpacket parameters.
pub fn decode_subpacket(
    params: &SchemeParams,
    cfg: &FieldConfig,
    answers: &[ReadAnswer],
) -> Result<Vec<u64>, Error> {
    if answers.len() != params.n_databases {
        return Err(Error::DimensionMismatch(format!(
            "need one answer per database, got {}",
            answers.len()
        )));
    }
    let target = answers[0].target;
    if answers.iter().any(|a| a.target != target) {
        return Err(Error::DimensionMismatch("answers target different indices".into()));
    }
    let layout = DecodeLayout::for_case(params.case, params.ell);
    let m = layout.matrix(cfg)?;
    let mut rhs = vec![0u64; params.n_databases];
    for a in answers {
        rhs[a.db_index] = a.value;
    }
    let sol = solve_mixed_vandermonde(&m, &rhs, cfg.field())?;
    let mut out: Vec<u64> = sol[..params.ell].to_vec();
    if layout.reversed_unknowns() {
        out.reverse();
    }
    Ok(out)
}

/// The `Pr` global subpacket ids with the largest magnitude keys; ties break
/// toward the smaller id.
pub fn select_top_r(upd: &LocalUpdate, params: &SchemeParams) -> Result<Vec<usize>, Error> {
    upd.validate(params)?;
    let mut ids: Vec<usize> = (0..params.p_subpackets).collect();
    ids.sort_by(|&a, &b| upd.magnitudes[b].cmp(&upd.magnitudes[a]).then(a.cmp(&b)));
    ids.truncate(params.pr);
    ids.sort_unstable();
    Ok(ids)
}

/// Build each database's `Pr` upload tuples for the chosen real subpackets.
///
/// The combined value at database `n` packs all `ell` deltas of a subpacket
/// into one symbol masked by fresh noise shared across databases: uncoded
/// cases use the Lagrange-scaled form
/// `sum_k prod_{r != k}(f_r - alpha_n) * delta_k / prod_{r != k}(f_r - f_k)
///  + prod_r (f_r - alpha_n) * z`,
/// coded cases use `sum_k alpha_n^{-k} delta_k + z`.
pub fn build_update_tuples<R: Rng>(
    params: &SchemeParams,
    cfg: &FieldConfig,
    ps: &PermutationSet,
    upd: &LocalUpdate,
    chosen: &[usize],
    mode: NoiseMode,
    rng: &mut R,
) -> Result<Vec<Vec<UpdateTuple>>, Error> {
    upd.validate(params)?;
    if chosen.len() != params.pr {
        return Err(Error::InvalidParams(format!(
            "expected {} chosen subpackets, got {}",
            params.pr,
            chosen.len()
        )));
    }
    let field = cfg.field();
    let ell = params.ell;
    let seg_len = params.seg();
    let mut out = vec![Vec::with_capacity(chosen.len()); params.n_databases];
    for &gid in chosen {
        if gid >= params.p_subpackets {
            return Err(Error::IndexOutOfRange(format!("subpacket id {gid}")));
        }
        let (seg_r, sub_r) = (gid / seg_len, gid % seg_len);
        let (seg_p, sub_p) = ps.real_to_permuted(params.case, seg_r, sub_r)?;
        let delta = &upd.deltas[gid];
        let z = match mode {
            NoiseMode::Random => rng.gen_range(0..field.modulus()),
            NoiseMode::Zero => 0,
        };
        for (n, tuples) in out.iter_mut().enumerate() {
            let value = if params.case.coded() {
                let mut v = z;
                for (k, &d) in delta.iter().enumerate() {
                    v = field.add(v, field.mul(field.inv_pow(cfg.alpha(n), k as u64 + 1)?, d));
                }
                v
            } else {
                let mut v = 0u64;
                for (k, &d) in delta.iter().enumerate() {
                    let mut coeff = field.inv(cfg.lagrange_denominator(k))?;
                    for r in 0..ell {
                        if r != k {
                            coeff = field.mul(coeff, cfg.f_minus_alpha(r, n));
                        }
                    }
                    v = field.add(v, field.mul(coeff, d));
                }
                let mut mask = z;
                for r in 0..ell {
                    mask = field.mul(mask, cfg.f_minus_alpha(r, n));
                }
                field.add(v, mask)
            };
            tuples.push(UpdateTuple { value, segment: seg_p, subpacket: sub_p });
        }
    }
    Ok(out)
}
