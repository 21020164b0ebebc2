//! Versioned binary snapshots of an initialized system, for reproducible
//! fixtures: header (case, N, P, B, ell, q, seed) followed by length-prefixed
//! little-endian residue arrays.

use std::io::{Read, Write};

use crate::coordinator::DatabaseState;
use crate::error::Error;
use crate::linalg::Matrix;
use crate::perm::{NoisyReversingMatrix, Permutation, PermutationSet};
use crate::scheme::{CaseId, SchemeParams};

const MAGIC: &[u8; 4] = b"PRUW";
const VERSION: u16 = 1;

#[derive(Debug)]
pub struct Snapshot {
    pub params: SchemeParams,
    pub seed: u64,
    pub ps: PermutationSet,
    pub databases: Vec<DatabaseState>,
}

fn w_u32<W: Write>(w: &mut W, v: u32) -> Result<(), Error> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn w_u64<W: Write>(w: &mut W, v: u64) -> Result<(), Error> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn r_u32<R: Read>(r: &mut R) -> Result<u32, Error> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn r_u64<R: Read>(r: &mut R) -> Result<u64, Error> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn w_array<W: Write>(w: &mut W, data: &[u64]) -> Result<(), Error> {
    w_u64(w, data.len() as u64)?;
    for &v in data {
        w_u64(w, v)?;
    }
    Ok(())
}

fn r_array<R: Read>(r: &mut R) -> Result<Vec<u64>, Error> {
    let len = r_u64(r)? as usize;
    if len > (1 << 28) {
        return Err(Error::MalformedSnapshot(format!("array length {len} implausible")));
    }
    (0..len).map(|_| r_u64(r)).collect()
}

fn w_matrix<W: Write>(w: &mut W, m: &Matrix) -> Result<(), Error> {
    w_u32(w, m.rows() as u32)?;
    w_u32(w, m.cols() as u32)?;
    for &v in m.data() {
        w_u64(w, v)?;
    }
    Ok(())
}

fn r_matrix<R: Read>(r: &mut R) -> Result<Matrix, Error> {
    let rows = r_u32(r)? as usize;
    let cols = r_u32(r)? as usize;
    if rows * cols > (1 << 28) {
        return Err(Error::MalformedSnapshot(format!("matrix {rows}x{cols} implausible")));
    }
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m.set(i, j, r_u64(r)?);
        }
    }
    Ok(m)
}

pub fn write_snapshot<W: Write>(
    w: &mut W,
    params: &SchemeParams,
    seed: u64,
    ps: &PermutationSet,
    databases: &[DatabaseState],
) -> Result<(), Error> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[params.case.as_u8()])?;
    for v in [
        params.n_databases,
        params.p_subpackets,
        params.b_segments,
        params.ell,
        params.pr,
        params.pr_prime,
    ] {
        w_u32(w, v as u32)?;
    }
    w_u64(w, params.q)?;
    w_u64(w, seed)?;
    for p in &ps.within {
        w_array(w, &p.mapping().iter().map(|&x| x as u64).collect::<Vec<_>>())?;
    }
    w.write_all(&[ps.inter.is_some() as u8])?;
    if let Some(p) = &ps.inter {
        w_array(w, &p.mapping().iter().map(|&x| x as u64).collect::<Vec<_>>())?;
    }
    for db in databases {
        w_array(w, &db.storage)?;
        for m in &db.within {
            w_matrix(w, &m.matrix)?;
        }
        w.write_all(&[db.inter.is_some() as u8])?;
        if let Some(m) = &db.inter {
            w_matrix(w, &m.matrix)?;
        }
        w.write_all(&[db.combined.is_some() as u8])?;
        if let Some(m) = &db.combined {
            w_matrix(w, m)?;
        }
    }
    Ok(())
}

fn r_flag<R: Read>(r: &mut R) -> Result<bool, Error> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    match b[0] {
        0 => Ok(false),
        1 => Ok(true),
        v => Err(Error::MalformedSnapshot(format!("flag byte {v}"))),
    }
}

pub fn read_snapshot<R: Read>(r: &mut R) -> Result<Snapshot, Error> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::MalformedSnapshot("bad magic".into()));
    }
    let mut ver = [0u8; 2];
    r.read_exact(&mut ver)?;
    if u16::from_le_bytes(ver) != VERSION {
        return Err(Error::MalformedSnapshot(format!(
            "unsupported version {}",
            u16::from_le_bytes(ver)
        )));
    }
    let mut case_b = [0u8; 1];
    r.read_exact(&mut case_b)?;
    let case = CaseId::from_u8(case_b[0])?;
    let n = r_u32(r)? as usize;
    let p = r_u32(r)? as usize;
    let b = r_u32(r)? as usize;
    let ell = r_u32(r)? as usize;
    let pr = r_u32(r)? as usize;
    let pr_prime = r_u32(r)? as usize;
    let q = r_u64(r)?;
    let seed = r_u64(r)?;
    let params = SchemeParams::new(case, n, p, b, pr, pr_prime, q)
        .map_err(|e| Error::MalformedSnapshot(e.to_string()))?;
    if params.ell != ell {
        return Err(Error::MalformedSnapshot(format!(
            "header ell {ell} disagrees with derived {}",
            params.ell
        )));
    }
    let read_perm = |r: &mut R| -> Result<Permutation, Error> {
        let map: Vec<usize> = r_array(r)?.into_iter().map(|v| v as usize).collect();
        Permutation::from_mapping(map).map_err(|e| Error::MalformedSnapshot(e.to_string()))
    };
    let within: Vec<Permutation> =
        (0..b).map(|_| read_perm(r)).collect::<Result<_, _>>()?;
    let inter = if r_flag(r)? { Some(read_perm(r)?) } else { None };
    if case.two_stage() != inter.is_some() {
        return Err(Error::MalformedSnapshot("inter permutation presence mismatch".into()));
    }
    let ps = PermutationSet { within, inter };
    let mut databases = Vec::with_capacity(n);
    for index in 0..n {
        let storage = r_array(r)?;
        if storage.len() != params.storage_len() {
            return Err(Error::MalformedSnapshot(format!(
                "storage length {} != {}",
                storage.len(),
                params.storage_len()
            )));
        }
        let within = (0..b)
            .map(|_| Ok(NoisyReversingMatrix { case, matrix: r_matrix(r)? }))
            .collect::<Result<Vec<_>, Error>>()?;
        let inter =
            if r_flag(r)? { Some(NoisyReversingMatrix { case, matrix: r_matrix(r)? }) } else { None };
        let combined = if r_flag(r)? { Some(r_matrix(r)?) } else { None };
        databases.push(DatabaseState {
            index,
            storage,
            within,
            inter,
            combined,
            popularity: Default::default(),
        });
    }
    Ok(Snapshot { params, seed, ps, databases })
}
