//! Per-database protocol engine: downlink selection, read queries and
//! answers, and permutation-reversed incremental writes.
//!
//! A node only ever touches its own storage and noisy matrices; the
//! permutations themselves never cross this module's boundary.

use crate::coordinator::DatabaseState;
use crate::error::Error;
use crate::field::FieldConfig;
use crate::scheme::SchemeParams;

/// A permuted target: `(segment, subpacket)`.  For the single-stage cases
/// the segment is real and only the subpacket index is permuted.
pub type PermutedIndex = (usize, usize);

/// One database's scalar answer to one read query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadAnswer {
    pub db_index: usize,
    pub target: PermutedIndex,
    pub value: u64,
}

/// One element of a user's upload: a noise-masked combined update addressed
/// by permuted coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct UpdateTuple {
    pub value: u64,
    pub segment: usize,
    pub subpacket: usize,
}

/// The `P*r'` permuted indices broadcast for the reading phase.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DownlinkSelection {
    pub targets: Vec<PermutedIndex>,
}

/// Pick the `Pr'` most popular permuted indices; ties and the empty first
/// round fall back to lexicographically smallest `(segment, subpacket)`.
pub fn select_downlink(db: &DatabaseState, params: &SchemeParams) -> DownlinkSelection {
    let mut all: Vec<(u64, PermutedIndex)> = (0..params.b_segments)
        .flat_map(|s| (0..params.seg()).map(move |u| (s, u)))
        .map(|idx| (db.popularity.get(&idx).copied().unwrap_or(0), idx))
        .collect();
    all.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    DownlinkSelection { targets: all.into_iter().take(params.pr_prime).map(|(_, i)| i).collect() }
}

fn check_target(params: &SchemeParams, target: PermutedIndex) -> Result<(), Error> {
    if target.0 >= params.b_segments || target.1 >= params.seg() {
        return Err(Error::IndexOutOfRange(format!(
            "permuted target ({}, {})",
            target.0, target.1
        )));
    }
    Ok(())
}

/// Build the query vector this database expects for one permuted target.
pub fn make_read_query(
    db: &DatabaseState,
    params: &SchemeParams,
    cfg: &FieldConfig,
    target: PermutedIndex,
) -> Result<Vec<u64>, Error> {
    check_target(params, target)?;
    let field = cfg.field();
    let ell = params.ell;
    let (seg, sub) = target;
    if params.case.two_stage() {
        let combined = db.combined.as_ref().ok_or_else(|| {
            Error::DimensionMismatch("combined matrix missing for two-stage case".into())
        })?;
        if params.case.coded() {
            // Case 4: one column of the combined P x P matrix.
            Ok(combined.column(seg * params.seg() + sub))
        } else {
            // Case 3: sum of ell columns, rescaled by Gamma_n^{-1} per row.
            let base = (seg * params.seg() + sub) * ell;
            let mut q = vec![0u64; params.model_len()];
            for k in 0..ell {
                let col = combined.column(base + k);
                for (row, v) in col.into_iter().enumerate() {
                    q[row] = field.add(q[row], v);
                }
            }
            for (row, v) in q.iter_mut().enumerate() {
                *v = field.mul(*v, cfg.f_minus_alpha(row % ell, db.index));
            }
            Ok(q)
        }
    } else {
        let m = &db.within[seg].matrix;
        if params.case.coded() {
            // Case 2: one column of the within matrix.
            Ok(m.column(sub))
        } else {
            // Case 1: sum of the ell columns of the target's block.
            let mut q = vec![0u64; params.seg() * ell];
            for k in 0..ell {
                let col = m.column(sub * ell + k);
                for (row, v) in col.into_iter().enumerate() {
                    q[row] = field.add(q[row], v);
                }
            }
            Ok(q)
        }
    }
}

/// Dot the query against storage (uncoded single-stage storage is first
/// rescaled by `D_n = I (x) Gamma_n^{-1}`).
pub fn answer_read(
    db: &DatabaseState,
    params: &SchemeParams,
    cfg: &FieldConfig,
    query: &[u64],
    target: PermutedIndex,
) -> Result<ReadAnswer, Error> {
    check_target(params, target)?;
    let field = cfg.field();
    let ell = params.ell;
    let value = if params.case.two_stage() {
        if query.len() != db.storage.len() {
            return Err(Error::DimensionMismatch(format!(
                "query length {} != storage length {}",
                query.len(),
                db.storage.len()
            )));
        }
        let mut acc = 0u64;
        for (q, s) in query.iter().zip(db.storage.iter()) {
            acc = field.add(acc, field.mul(*q, *s));
        }
        acc
    } else {
        let span = if params.case.coded() { params.seg() } else { params.seg() * ell };
        if query.len() != span {
            return Err(Error::DimensionMismatch(format!(
                "query length {} != segment span {span}",
                query.len()
            )));
        }
        let base = target.0 * span;
        let mut acc = 0u64;
        for (row, q) in query.iter().enumerate() {
            let mut s = db.storage[base + row];
            if !params.case.coded() {
                s = field.mul(s, cfg.f_minus_alpha(row % ell, db.index));
            }
            acc = field.add(acc, field.mul(*q, s));
        }
        acc
    };
    Ok(ReadAnswer { db_index: db.index, target, value })
}

/// Apply one user's upload: form the permuted update vector, reverse it
/// through this database's noisy matrices, and add it into storage.
/// Popularity counters are bumped at the permuted indices.
pub fn apply_write(
    db: &mut DatabaseState,
    params: &SchemeParams,
    cfg: &FieldConfig,
    tuples: &[UpdateTuple],
) -> Result<(), Error> {
    let field = cfg.field();
    let ell = params.ell;
    let seg_len = params.seg();
    let mut seen = std::collections::BTreeSet::new();
    for t in tuples {
        check_target(params, (t.segment, t.subpacket))?;
        if !seen.insert((t.segment, t.subpacket)) {
            return Err(Error::DuplicateIndex { segment: t.segment, subpacket: t.subpacket });
        }
    }
    if params.case.two_stage() {
        let combined = db.combined.as_ref().ok_or_else(|| {
            Error::DimensionMismatch("combined matrix missing for two-stage case".into())
        })?;
        // Permuted update vector over all P subpackets; absent ones are 0.
        let mut u = vec![0u64; params.p_subpackets];
        for t in tuples {
            u[t.segment * seg_len + t.subpacket] = t.value;
        }
        let expanded: Vec<u64> = if params.case.coded() {
            u
        } else {
            u.iter().flat_map(|&v| std::iter::repeat_n(v, ell)).collect()
        };
        let reversed = combined.mul_vec(&expanded, field)?;
        for (slot, v) in reversed.into_iter().enumerate() {
            db.storage[slot] = field.add(db.storage[slot], v);
        }
    } else {
        for seg in 0..params.b_segments {
            let mut y = vec![0u64; seg_len];
            let mut any = false;
            for t in tuples.iter().filter(|t| t.segment == seg) {
                y[t.subpacket] = t.value;
                any = true;
            }
            if !any {
                continue;
            }
            let expanded: Vec<u64> = if params.case.coded() {
                y
            } else {
                y.iter().flat_map(|&v| std::iter::repeat_n(v, ell)).collect()
            };
            let reversed = db.within[seg].matrix.mul_vec(&expanded, field)?;
            let span = expanded.len();
            for (row, v) in reversed.into_iter().enumerate() {
                let slot = seg * span + row;
                db.storage[slot] = field.add(db.storage[slot], v);
            }
        }
    }
    for t in tuples {
        *db.popularity.entry((t.segment, t.subpacket)).or_insert(0) += 1;
    }
    Ok(())
}
