//! Quaternions, octonions and orthogonal complex structures.
//!
//! `ℝ⁴` is identified with the quaternions by `(w, x, y, z) ↦ w + xi + yj + zk`
//! and `ℝ⁸` with the octonions as pairs of quaternions. Octonion products use
//! Cayley–Dickson doubling, `(a, b)(c, d) = (ac − d̄b, da + bc̄)`, which fixes
//! the basis `e0 = 1`, `e1..e3 = i, j, k`, `e4 = (0, 1)`, `e5..e7 = (0, i/j/k)`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, mat_vec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2], s[3])
    }

    /// Purely imaginary quaternion with vector part `v`.
    pub fn pure(v: [f64; 3]) -> Self {
        Self::new(0.0, v[0], v[1], v[2])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn vector(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_sq(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn inverse(self) -> Self {
        self.conj().scale(1.0 / self.norm_sq())
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(self, o: Self) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }
}

/// Hamilton product.
pub fn quat_mul(a: Quaternion, b: Quaternion) -> Quaternion {
    Quaternion::new(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: Self) -> Self {
        quat_mul(self, rhs)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, o: Self) -> Self {
        Self::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, o: Self) -> Self {
        Self::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Octonion {
    pub c: [f64; 8],
}

impl Octonion {
    pub const fn new(c: [f64; 8]) -> Self {
        Self { c }
    }

    pub fn basis(i: usize) -> Self {
        let mut c = [0.0; 8];
        c[i] = 1.0;
        Self { c }
    }

    pub fn one() -> Self {
        Self::basis(0)
    }

    pub fn from_slice(s: &[f64]) -> Self {
        let mut c = [0.0; 8];
        c.copy_from_slice(&s[..8]);
        Self { c }
    }

    pub fn from_pair(a: Quaternion, b: Quaternion) -> Self {
        let (a, b) = (a.to_array(), b.to_array());
        Self {
            c: [a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3]],
        }
    }

    pub fn halves(self) -> (Quaternion, Quaternion) {
        (
            Quaternion::from_slice(&self.c[..4]),
            Quaternion::from_slice(&self.c[4..]),
        )
    }

    pub fn conj(self) -> Self {
        let mut c = self.c.map(|v| -v);
        c[0] = self.c[0];
        Self { c }
    }

    pub fn norm(self) -> f64 {
        linalg::norm(&self.c)
    }
}

impl Sub for Octonion {
    type Output = Octonion;
    fn sub(self, o: Self) -> Self {
        let mut c = self.c;
        for (ci, oi) in c.iter_mut().zip(o.c) {
            *ci -= oi;
        }
        Self { c }
    }
}

/// Cayley–Dickson product over Hamilton quaternion pairs.
pub fn oct_mul(p: Octonion, q: Octonion) -> Octonion {
    let (a, b) = p.halves();
    let (c, d) = q.halves();
    Octonion::from_pair(a * c - d.conj() * b, d * a + b * c.conj())
}

impl Mul for Octonion {
    type Output = Octonion;
    fn mul(self, rhs: Self) -> Self {
        oct_mul(self, rhs)
    }
}

/// Entry of the basis multiplication table: `e_i · e_j = sign · e_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignedIndex {
    pub sign: i8,
    pub index: usize,
}

impl fmt::Display for SignedIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.sign < 0 { '-' } else { '+' };
        write!(f, "{s}{}", self.index)
    }
}

impl std::str::FromStr for SignedIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("bad table cell {s:?}"));
        let (sign, rest) = match s.as_bytes().first() {
            Some(b'+') => (1, &s[1..]),
            Some(b'-') => (-1, &s[1..]),
            _ => return Err(bad()),
        };
        let index: usize = rest.parse().map_err(|_| bad())?;
        if index > 7 {
            return Err(bad());
        }
        Ok(SignedIndex { sign, index })
    }
}

/// Generate the 8×8 basis multiplication table from [`oct_mul`].
pub fn octonion_table() -> [[SignedIndex; 8]; 8] {
    let mut table = [[SignedIndex { sign: 1, index: 0 }; 8]; 8];
    for (i, row) in table.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let prod = oct_mul(Octonion::basis(i), Octonion::basis(j));
            let (k, v) = prod
                .c
                .iter()
                .enumerate()
                .find(|(_, v)| **v != 0.0)
                .expect("basis products are nonzero");
            *cell = SignedIndex {
                sign: if *v > 0.0 { 1 } else { -1 },
                index: k,
            };
        }
    }
    table
}

/// Table as CSV: row `i`, column `j` holds `e_i · e_j` as `±k`. No header.
pub fn octonion_table_csv() -> String {
    let mut out = String::new();
    for row in octonion_table() {
        let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_octonion_table(csv: &str) -> Result<[[SignedIndex; 8]; 8]> {
    let mut table = [[SignedIndex { sign: 1, index: 0 }; 8]; 8];
    let rows: Vec<&str> = csv.lines().filter(|l| !l.trim().is_empty()).collect();
    if rows.len() != 8 {
        return Err(Error::DimensionMismatch {
            expected: 8,
            got: rows.len(),
        });
    }
    for (i, line) in rows.iter().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 8 {
            return Err(Error::DimensionMismatch {
                expected: 8,
                got: cells.len(),
            });
        }
        for (j, cell) in cells.iter().enumerate() {
            table[i][j] = cell.parse()?;
        }
    }
    Ok(table)
}

/// An orthogonal `J` with `J² = −I` on `ℝ^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalComplexStructure {
    dim: usize,
    matrix: DMatrix<f64>,
}

impl OrthogonalComplexStructure {
    /// Block-diagonal structure sending `e_{2k} ↦ e_{2k+1}`; this is
    /// multiplication by `i` on `ℂ^{dim/2}` with interleaved coordinates.
    pub fn standard(dim: usize) -> Result<Self> {
        check_even(dim)?;
        let mut m = DMatrix::zeros(dim, dim);
        for k in (0..dim).step_by(2) {
            m[(k + 1, k)] = 1.0;
            m[(k, k + 1)] = -1.0;
        }
        Ok(Self { dim, matrix: m })
    }

    /// Wrap a matrix after checking the structure invariants to `tol`.
    pub fn from_matrix(matrix: DMatrix<f64>, tol: f64) -> Result<Self> {
        let s = Self::from_matrix_unchecked(matrix)?;
        let (orth, square) = s.defects();
        if orth > tol || square > tol {
            return Err(Error::InvalidArgument(format!(
                "not an orthogonal complex structure (|JᵀJ−I| = {orth:.2e}, |J²+I| = {square:.2e})"
            )));
        }
        Ok(s)
    }

    /// Wrap any square matrix of even size; used for negative controls.
    pub fn from_matrix_unchecked(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidArgument("matrix must be square".into()));
        }
        check_even(matrix.nrows())?;
        Ok(Self {
            dim: matrix.nrows(),
            matrix,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `(max |JᵀJ − I|, max |J² + I|)`
    pub fn defects(&self) -> (f64, f64) {
        let orth = linalg::orthogonality_defect(&self.matrix);
        let sq = &self.matrix * &self.matrix + DMatrix::identity(self.dim, self.dim);
        (orth, sq.amax())
    }

    /// Orthonormal frame `F = (u₁, Ju₁, u₂, Ju₂, …)` with `J = F·J₀·Fᵀ`.
    ///
    /// Built by complex Gram–Schmidt over the standard basis, always taking
    /// the basis vector with the largest residual next.
    pub fn adapted_frame(&self) -> Result<DMatrix<f64>> {
        let n = self.dim;
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
        while cols.len() < n {
            let mut best: Option<(f64, Vec<f64>)> = None;
            for k in 0..n {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                // two passes keep the rejected vector orthogonal to roundoff
                let r = linalg::reject(&linalg::reject(&e, &cols), &cols);
                let nr = linalg::norm(&r);
                if best.as_ref().is_none_or(|(b, _)| nr > *b) {
                    best = Some((nr, r));
                }
            }
            let (nr, r) = best.expect("dimension is positive");
            if nr < 1e-6 {
                return Err(Error::InvalidArgument(
                    "matrix has no J-invariant orthonormal frame".into(),
                ));
            }
            let u = linalg::scale(&r, 1.0 / nr);
            let ju = mat_vec(&self.matrix, &u);
            let ju = linalg::reject(&ju, &cols);
            let ju = linalg::normalized(&ju)
                .ok_or_else(|| Error::InvalidArgument("J maps a frame vector to zero".into()))?;
            cols.push(u);
            cols.push(ju);
        }
        Ok(DMatrix::from_fn(n, n, |i, j| cols[j][i]))
    }

    /// Some `g ∈ O(dim)` with `g·J = J'·g`.
    pub fn conjugator_to(&self, other: &Self) -> Result<DMatrix<f64>> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let f = self.adapted_frame()?;
        let f2 = other.adapted_frame()?;
        Ok(f2 * f.transpose())
    }

    /// `R·J·Rᵀ`.
    pub fn conjugate_by(&self, r: &DMatrix<f64>) -> Self {
        Self {
            dim: self.dim,
            matrix: r * &self.matrix * r.transpose(),
        }
    }
}

fn check_even(dim: usize) -> Result<()> {
    if dim < 2 || !dim.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "complex structures need an even dimension ≥ 2, got {dim}"
        )));
    }
    Ok(())
}

/// `R·J₀·Rᵀ` for a seeded random rotation `R`, returned together with `R`.
pub fn random_ocs_with_rotation(dim: usize, seed: u64) -> Result<(OrthogonalComplexStructure, DMatrix<f64>)> {
    let j0 = OrthogonalComplexStructure::standard(dim)?;
    let r = linalg::random_rotation(dim, seed);
    Ok((j0.conjugate_by(&r), r))
}

pub fn random_ocs(dim: usize, seed: u64) -> Result<OrthogonalComplexStructure> {
    random_ocs_with_rotation(dim, seed).map(|(j, _)| j)
}

pub fn apply_ocs(j: &OrthogonalComplexStructure, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != j.dim {
        return Err(Error::DimensionMismatch {
            expected: j.dim,
            got: x.len(),
        });
    }
    Ok(mat_vec(&j.matrix, x))
}
