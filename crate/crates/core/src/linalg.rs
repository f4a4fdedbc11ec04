//! Small dense linear algebra: square matrices, Cholesky factorization,
//! quadratic forms and log-determinants.
//!
//! Dimensions here are tiny (a handful of rows), so everything is plain
//! row-major `Vec<f64>` storage with O(d³) kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivots at or below this value are treated as a failed factorization.
pub const PIVOT_TOL: f64 = 1e-300;

/// Square matrix in row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        Ok(Matrix { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// (M + Mᵀ) / 2
    pub fn symmetrized(&self) -> Matrix {
        let mut s = self.clone();
        for i in 0..self.dim {
            for j in 0..i {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        s
    }

    pub fn scaled(&self, c: f64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// `self += w · v vᵀ`
    pub fn add_outer(&mut self, w: f64, v: &[f64]) {
        debug_assert_eq!(v.len(), self.dim);
        for i in 0..self.dim {
            let wi = w * v[i];
            let row = &mut self.data[i * self.dim..(i + 1) * self.dim];
            for (r, &vj) in row.iter_mut().zip(v) {
                *r += wi * vj;
            }
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        let d = self.dim;
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.dim)
            .map(|row| dot(row, v))
            .collect()
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Serialize for Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Symmetric positive definite matrix together with its lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    entries: Matrix,
    chol: Matrix,
}

/// Factor a symmetric matrix. The input is symmetrized first to absorb
/// round-off from accumulated outer products.
pub fn cholesky(m: &Matrix) -> Result<SpdMatrix> {
    if !m.is_finite() {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    let entries = m.symmetrized();
    let d = entries.dim();
    let mut l = Matrix::zeros(d);
    for j in 0..d {
        let mut diag = entries[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > PIVOT_TOL) {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..d {
            let mut s = entries[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(SpdMatrix { entries, chol: l })
}

impl SpdMatrix {
    pub fn new(m: &Matrix) -> Result<Self> {
        cholesky(m)
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix {
            entries: Matrix::identity(dim),
            chol: Matrix::identity(dim),
        }
    }

    /// Build from a lower-triangular factor with strictly positive diagonal.
    pub fn from_cholesky(l: Matrix) -> Result<Self> {
        let d = l.dim();
        for i in 0..d {
            if !(l[(i, i)] > PIVOT_TOL) || !l[(i, i)].is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: i });
            }
            for j in i + 1..d {
                if l[(i, j)] != 0.0 {
                    return Err(Error::Domain("factor is not lower triangular".into()));
                }
            }
        }
        let entries = l.matmul(&l.transpose()).symmetrized();
        if !entries.is_finite() {
            return Err(Error::Domain("factor overflows".into()));
        }
        Ok(SpdMatrix { entries, chol: l })
    }

    pub fn dim(&self) -> usize {
        self.entries.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.entries
    }

    pub fn chol(&self) -> &Matrix {
        &self.chol
    }

    /// Solve `L y = v` by forward substitution.
    pub fn solve_lower(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut s = v[i];
            for k in 0..i {
                s -= self.chol[(i, k)] * y[k];
            }
            y[i] = s / self.chol[(i, i)];
        }
        y
    }

    /// Solve `M x = v`.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut x = self.solve_lower(v);
        for i in (0..d).rev() {
            let mut s = x[i];
            for k in i + 1..d {
                s -= self.chol[(k, i)] * x[k];
            }
            x[i] = s / self.chol[(i, i)];
        }
        x
    }

    /// `vᵀ M⁻¹ v`
    pub fn quad_form(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(norm_sq(&self.solve_lower(v)))
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.chol[(i, i)].ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> Matrix {
        let d = self.dim();
        let mut inv = Matrix::zeros(d);
        let mut e = vec![0.0; d];
        for j in 0..d {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..d {
                inv[(i, j)] = col[i];
            }
        }
        inv.symmetrized()
    }
}

impl Serialize for SpdMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpdMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = Matrix::deserialize(d)?;
        cholesky(&m).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> Matrix {
        Matrix::from_rows(&[vec![a, b], vec![c, d]]).unwrap()
    }

    #[test]
    fn identity_factor() {
        let s = cholesky(&Matrix::identity(2)).unwrap();
        assert_eq!(s.chol(), &Matrix::identity(2));
    }

    #[test]
    fn diagonal_factor() {
        let s = cholesky(&m2(4.0, 0.0, 0.0, 9.0)).unwrap();
        assert_eq!(s.chol(), &m2(2.0, 0.0, 0.0, 3.0));
    }

    #[test]
    fn reconstruction() {
        let m = m2(2.0, -1.0, -1.0, 2.0);
        let s = cholesky(&m).unwrap();
        let l = s.chol();
        let r = l.matmul(&l.transpose());
        assert!(r.max_abs_diff(&m) < 1e-14);
    }

    #[test]
    fn not_positive_definite() {
        let err = cholesky(&m2(1.0, 2.0, 2.0, 1.0)).unwrap_err();
        assert_eq!(err, Error::NotPositiveDefinite { pivot: 1 });
        assert!(cholesky(&Matrix::zeros(2)).is_err());
    }

    #[test]
    fn quad_form_examples() {
        let id = SpdMatrix::identity(2);
        assert_eq!(id.quad_form(&[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(id.quad_form(&[0.0, 0.0]).unwrap(), 0.0);
        // inverse of [[2,-1],[-1,2]] is [[2/3,1/3],[1/3,2/3]]
        let s = cholesky(&m2(2.0, -1.0, -1.0, 2.0)).unwrap();
        let q = s.quad_form(&[1.0, 1.0]).unwrap();
        assert!((q - 2.0).abs() < 1e-15);
        assert!(matches!(
            s.quad_form(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn log_det_examples() {
        assert_eq!(SpdMatrix::identity(3).log_det(), 0.0);
        let e = std::f64::consts::E;
        let s = cholesky(&Matrix::from_diag(&[e, e])).unwrap();
        assert!((s.log_det() - 2.0).abs() < 1e-15);
        let s = cholesky(&m2(2.0, -1.0, -1.0, 2.0)).unwrap();
        assert!((s.log_det() - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn inverse_roundtrip() {
        let m = m2(2.0, -1.0, -1.0, 2.0);
        let inv = cholesky(&m).unwrap().inverse();
        assert!(m.matmul(&inv).max_abs_diff(&Matrix::identity(2)) < 1e-15);
    }

    fn random_spd(d: usize, vals: &[f64]) -> Matrix {
        let a = Matrix::from_row_major(d, vals[..d * d].to_vec()).unwrap();
        let mut m = a.matmul(&a.transpose());
        for i in 0..d {
            m[(i, i)] += 0.1;
        }
        m
    }

    proptest! {
        #[test]
        fn quad_form_positive(vals in prop::collection::vec(-2.0f64..2.0, 9),
                              v in prop::collection::vec(-5.0f64..5.0, 3)) {
            prop_assume!(norm_sq(&v) > 1e-6);
            let s = cholesky(&random_spd(3, &vals)).unwrap();
            prop_assert!(s.quad_form(&v).unwrap() > 0.0);
        }

        #[test]
        fn log_det_scaling(vals in prop::collection::vec(-2.0f64..2.0, 9), c in 0.01f64..100.0) {
            let m = random_spd(3, &vals);
            let base = cholesky(&m).unwrap().log_det();
            let scaled = cholesky(&m.scaled(c)).unwrap().log_det();
            let expect = 3.0 * c.ln() + base;
            prop_assert!((scaled - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }

        #[test]
        fn quad_form_congruence(vals in prop::collection::vec(-2.0f64..2.0, 9),
                                avals in prop::collection::vec(-0.9f64..0.9, 9),
                                v in prop::collection::vec(-5.0f64..5.0, 3)) {
            let m = random_spd(3, &vals);
            let mut a = Matrix::from_row_major(3, avals).unwrap();
            for i in 0..3 { a[(i, i)] += 3.0; }
            let ama = a.matmul(&m).matmul(&a.transpose());
            let q1 = cholesky(&m).unwrap().quad_form(&v).unwrap();
            let q2 = cholesky(&ama).unwrap().quad_form(&a.mul_vec(&v)).unwrap();
            prop_assert!((q1 - q2).abs() <= 1e-10 * q1.abs().max(1e-12));
        }
    }
}
