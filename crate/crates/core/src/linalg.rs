//! Dense matrices over a prime field and the structured decode systems.
//!
//! Every system solved here is tiny (N x N with N below a few dozen), so a
//! plain Gaussian elimination with first-nonzero pivoting is used; arithmetic
//! is exact, no tolerances.

use crate::error::Error;
use crate::field::{FieldConfig, PrimeField};
use crate::scheme::CaseId;

/// Row-major dense matrix of field residues.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self, Error> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[u64] {
        &self.data
    }

    pub fn column(&self, c: usize) -> Vec<u64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn add(&self, other: &Matrix, field: &PrimeField) -> Result<Matrix, Error> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch("matrix add".into()));
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| field.add(a, b))
            .collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, s: u64, field: &PrimeField) -> Matrix {
        let data = self.data.iter().map(|&a| field.mul(a, s)).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn mul(&self, other: &Matrix, field: &PrimeField) -> Result<Matrix, Error> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "mul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = field.add(out.get(i, j), field.mul(a, other.get(k, j)));
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[u64], field: &PrimeField) -> Result<Vec<u64>, Error> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "mul_vec {}x{} by {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0u64; self.rows];
        for i in 0..self.rows {
            let mut acc = 0u64;
            for j in 0..self.cols {
                acc = field.add(acc, field.mul(self.get(i, j), v[j]));
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &Matrix, field: &PrimeField) -> Matrix {
        let mut out = Matrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a == 0 {
                    continue;
                }
                for r in 0..other.rows {
                    for c in 0..other.cols {
                        out.set(
                            i * other.rows + r,
                            j * other.cols + c,
                            field.mul(a, other.get(r, c)),
                        );
                    }
                }
            }
        }
        out
    }
}

/// Solve `m x = rhs` exactly; `m` must be square and invertible.
pub fn solve(m: &Matrix, rhs: &[u64], field: &PrimeField) -> Result<Vec<u64>, Error> {
    if m.rows() != m.cols() || m.rows() != rhs.len() {
        return Err(Error::DimensionMismatch("solve expects square system".into()));
    }
    let n = m.rows();
    // Augmented working copy.
    let mut a: Vec<Vec<u64>> = (0..n)
        .map(|i| {
            let mut row: Vec<u64> = (0..n).map(|j| m.get(i, j)).collect();
            row.push(rhs[i]);
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| a[r][col] != 0).ok_or(Error::SingularSystem)?;
        a.swap(col, pivot);
        let inv = field.inv(a[col][col])?;
        for j in col..=n {
            a[col][j] = field.mul(a[col][j], inv);
        }
        for r in 0..n {
            if r != col && a[r][col] != 0 {
                let factor = a[r][col];
                for j in col..=n {
                    let sub = field.mul(factor, a[col][j]);
                    a[r][j] = field.sub(a[r][j], sub);
                }
            }
        }
    }
    Ok(a.into_iter().map(|row| row[n]).collect())
}

/// Row layout of the N x N decode system for one case.
///
/// Cases 1/3 mix `ell` Cauchy entries with powers `alpha^0 .. alpha^d`;
/// cases 2/4 use negative powers `alpha^{-ell} .. alpha^{-1}` followed by
/// `alpha^0 .. alpha^d`.  The first `ell` unknowns are the subpacket
/// parameters (reversed, `W_ell .. W_1`, for the negative-power layout).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeLayout {
    CauchyPowers { ell: usize, degree: usize },
    NegativePowers { ell: usize, degree: usize },
}

impl DecodeLayout {
    pub fn for_case(case: CaseId, ell: usize) -> Self {
        let degree = case.decode_degree(ell);
        if case.coded() {
            DecodeLayout::NegativePowers { ell, degree }
        } else {
            DecodeLayout::CauchyPowers { ell, degree }
        }
    }

    pub fn width(&self) -> usize {
        match *self {
            DecodeLayout::CauchyPowers { ell, degree }
            | DecodeLayout::NegativePowers { ell, degree } => ell + degree + 1,
        }
    }

    /// Are the leading `ell` unknowns in reversed order `W_ell .. W_1`?
    pub fn reversed_unknowns(&self) -> bool {
        matches!(self, DecodeLayout::NegativePowers { .. })
    }

    pub fn row(&self, cfg: &FieldConfig, n: usize) -> Result<Vec<u64>, Error> {
        let field = cfg.field();
        let alpha = cfg.alpha(n);
        let mut row = Vec::with_capacity(self.width());
        match *self {
            DecodeLayout::CauchyPowers { ell, degree } => {
                for k in 0..ell {
                    row.push(cfg.cauchy(k, n));
                }
                for j in 0..=degree {
                    row.push(field.pow(alpha, j as u64));
                }
            }
            DecodeLayout::NegativePowers { ell, degree } => {
                for k in (1..=ell).rev() {
                    row.push(field.inv_pow(alpha, k as u64)?);
                }
                for j in 0..=degree {
                    row.push(field.pow(alpha, j as u64));
                }
            }
        }
        Ok(row)
    }

    /// The full N x N system matrix; width must match `cfg.n_databases()`.
    pub fn matrix(&self, cfg: &FieldConfig) -> Result<Matrix, Error> {
        let n = cfg.n_databases();
        if self.width() != n {
            return Err(Error::DimensionMismatch(format!(
                "decode layout width {} != N = {n}",
                self.width()
            )));
        }
        let rows = (0..n).map(|i| self.row(cfg, i)).collect::<Result<Vec<_>, _>>()?;
        Matrix::from_rows(rows)
    }
}

/// Solve the mixed Cauchy/Vandermonde decode system.
pub fn solve_mixed_vandermonde(
    rows: &Matrix,
    rhs: &[u64],
    field: &PrimeField,
) -> Result<Vec<u64>, Error> {
    solve(rows, rhs, field)
}
