//! Dense matrices over F_q.
//!
//! Row vectors throughout: a vector times a matrix is `v · A`, matching the
//! right action of edge labels on message spaces.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Elem, FieldSpec};
use crate::subspace::Subspace;

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Matrix {
    field: FieldSpec,
    rows: usize,
    cols: usize,
    data: Vec<Elem>,
}

/// Output of [`Matrix::rref`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rref {
    pub matrix: Matrix,
    pub rank: usize,
    pub pivots: Vec<usize>,
}

/// A consistent linear system `A x = b`: one solution plus the kernel of `A`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub particular: Vec<Elem>,
    pub nullspace: Subspace,
}

impl Matrix {
    pub fn zeros(field: FieldSpec, rows: usize, cols: usize) -> Self {
        Matrix { field, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(field: FieldSpec, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn from_vec(field: FieldSpec, rows: usize, cols: usize, data: Vec<Elem>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries", rows * cols),
                got: format!("{} entries", data.len()),
            });
        }
        for &v in &data {
            field.check(v as u64)?;
        }
        Ok(Matrix { field, rows, cols, data })
    }

    /// Builds a matrix from nested rows; every row must have the same length.
    pub fn from_rows<R: AsRef<[u64]>>(field: FieldSpec, rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::ShapeMismatch {
                    expected: format!("rows of length {cols}"),
                    got: format!("row of length {}", r.len()),
                });
            }
            for &v in r {
                data.push(field.check(v)?);
            }
        }
        Ok(Matrix { field, rows: rows.len(), cols, data })
    }

    /// Stacks row vectors (all of length `cols`).
    pub fn from_row_vecs(field: FieldSpec, cols: usize, rows: &[&[Elem]]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols);
            data.extend_from_slice(r);
        }
        Matrix { field, rows: rows.len(), cols, data }
    }

    #[inline]
    pub fn field(&self) -> FieldSpec {
        self.field
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Elem {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Elem) {
        debug_assert!((v as u32) < self.field.q());
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[Elem] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [Elem] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn entries(&self) -> &[Elem] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    fn same_field(&self, other: &Matrix) -> Result<()> {
        if self.field != other.field {
            return Err(Error::FieldMismatch { left: self.field.q(), right: other.field.q() });
        }
        Ok(())
    }

    fn same_shape(&self, other: &Matrix) -> Result<()> {
        self.same_field(other)?;
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                got: format!("{}x{}", other.rows, other.cols),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.same_shape(other)?;
        let f = self.field;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f.add(a, b)).collect();
        Ok(Matrix { field: self.field, rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.same_shape(other)?;
        let f = self.field;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f.sub(a, b)).collect();
        Ok(Matrix { field: self.field, rows: self.rows, cols: self.cols, data })
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        self.same_field(other)?;
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows on the right operand", self.cols),
                got: format!("{}", other.rows),
            });
        }
        let mut out = Matrix::zeros(self.field, self.rows, other.cols);
        for r in 0..self.rows {
            let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a != 0 {
                    self.field.axpy(dst, a, other.row(k));
                }
            }
        }
        Ok(out)
    }

    /// Row vector times matrix.
    pub fn left_mul_vec(&self, v: &[Elem]) -> Vec<Elem> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0; self.cols];
        for (k, &a) in v.iter().enumerate() {
            if a != 0 {
                self.field.axpy(&mut out, a, self.row(k));
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Vertical concatenation.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        self.same_field(other)?;
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{} columns", self.cols),
                got: format!("{}", other.cols),
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix { field: self.field, rows: self.rows + other.rows, cols: self.cols, data })
    }

    /// Copies rows `range` into a new matrix.
    pub fn row_block(&self, range: std::ops::Range<usize>) -> Matrix {
        assert!(range.end <= self.rows);
        Matrix {
            field: self.field,
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
        }
    }

    /// Copies columns `range` into a new matrix.
    pub fn col_block(&self, range: std::ops::Range<usize>) -> Matrix {
        assert!(range.end <= self.cols);
        let w = range.len();
        let mut data = Vec::with_capacity(self.rows * w);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[range.clone()]);
        }
        Matrix { field: self.field, rows: self.rows, cols: w, data }
    }

    /// Gauss–Jordan elimination in place; returns (rank, pivot columns).
    /// Non-zero rows end up on top, in canonical RREF.
    pub fn rref_in_place(&mut self) -> (usize, Vec<usize>) {
        let f = self.field;
        let cols = self.cols;
        let mut pivots = Vec::new();
        let mut rank = 0;
        for c in 0..cols {
            if rank == self.rows {
                break;
            }
            let Some(p) = (rank..self.rows).find(|&r| self.data[r * cols + c] != 0) else {
                continue;
            };
            if p != rank {
                for j in 0..cols {
                    self.data.swap(p * cols + j, rank * cols + j);
                }
            }
            let lead = self.data[rank * cols + c];
            if lead != 1 {
                let inv = f.inv(lead).expect("non-zero pivot");
                f.scale(&mut self.data[rank * cols..(rank + 1) * cols], inv);
            }
            let (head, tail) = self.data.split_at_mut(rank * cols);
            let (prow, tail) = tail.split_at_mut(cols);
            for r in 0..self.rows {
                let row = if r < rank {
                    &mut head[r * cols..(r + 1) * cols]
                } else if r > rank {
                    let o = (r - rank - 1) * cols;
                    &mut tail[o..o + cols]
                } else {
                    continue;
                };
                let v = row[c];
                if v != 0 {
                    f.axpy(row, f.neg(v), prow);
                }
            }
            pivots.push(c);
            rank += 1;
        }
        (rank, pivots)
    }

    pub fn rref(&self) -> Rref {
        let mut m = self.clone();
        let (rank, pivots) = m.rref_in_place();
        Rref { matrix: m, rank, pivots }
    }

    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        m.rref_in_place().0
    }

    pub fn row_space(&self) -> Subspace {
        Subspace::from_generators(self)
    }

    /// Solves `A x = b` (column convention). `Ok(None)` means inconsistent.
    pub fn solve(&self, b: &[Elem]) -> Result<Option<Solution>> {
        if b.len() != self.rows {
            return Err(Error::ShapeMismatch {
                expected: format!("right-hand side of length {}", self.rows),
                got: format!("{}", b.len()),
            });
        }
        let n = self.cols;
        let f = self.field;
        let mut aug = Matrix::zeros(f, self.rows, n + 1);
        for r in 0..self.rows {
            aug.row_mut(r)[..n].copy_from_slice(self.row(r));
            aug.row_mut(r)[n] = f.check(b[r] as u64)?;
        }
        let (rank, pivots) = aug.rref_in_place();
        if pivots.last() == Some(&n) {
            return Ok(None);
        }
        let mut particular = vec![0; n];
        for (r, &p) in pivots.iter().enumerate() {
            particular[p] = aug.get(r, n);
        }
        let mut is_pivot = vec![false; n];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let mut kernel = Vec::new();
        for free in (0..n).filter(|&c| !is_pivot[c]) {
            let mut v = vec![0; n];
            v[free] = 1;
            for (r, &p) in pivots.iter().enumerate().take(rank) {
                v[p] = f.neg(aug.get(r, free));
            }
            kernel.extend(v);
        }
        let kernel = Matrix { field: f, rows: n - rank, cols: n, data: kernel };
        Ok(Some(Solution { particular, nullspace: Subspace::from_generators(&kernel) }))
    }

    pub fn inverse(&self) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::ShapeMismatch {
                expected: "square matrix".into(),
                got: format!("{}x{}", self.rows, self.cols),
            });
        }
        let n = self.rows;
        let mut aug = Matrix::zeros(self.field, n, 2 * n);
        for r in 0..n {
            aug.row_mut(r)[..n].copy_from_slice(self.row(r));
            aug.row_mut(r)[n + r] = 1;
        }
        let (rank, pivots) = aug.rref_in_place();
        if rank < n || pivots[n - 1] != n - 1 {
            return Err(Error::Singular);
        }
        Ok(aug.col_block(n..2 * n))
    }

    pub fn random<R: Rng + ?Sized>(field: FieldSpec, rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| field.random(rng)).collect();
        Matrix { field, rows, cols, data }
    }

    /// Uniform over GL_m(F_q), by rejection on the rank.
    pub fn random_invertible<R: Rng + ?Sized>(m: usize, field: FieldSpec, rng: &mut R) -> Result<Self> {
        if m == 0 {
            return Err(Error::OutOfRange("random_invertible needs m >= 1".into()));
        }
        Ok(Self::random_full_rank(field, m, m, rng))
    }

    /// Uniform over `rows x cols` matrices of rank `min(rows, cols)`.
    pub fn random_full_rank<R: Rng + ?Sized>(field: FieldSpec, rows: usize, cols: usize, rng: &mut R) -> Self {
        let target = rows.min(cols);
        loop {
            let m = Self::random(field, rows, cols, rng);
            if m.rank() == target {
                return m;
            }
        }
    }

    /// Uniform over `l x m` matrices of rank exactly `s`, as `A·B` with `A`
    /// full column rank and `B` full row rank. Each rank-`s` matrix has
    /// exactly |GL_s| such factorizations.
    pub fn random_rank<R: Rng + ?Sized>(
        l: usize,
        m: usize,
        s: usize,
        field: FieldSpec,
        rng: &mut R,
    ) -> Result<Self> {
        if s > l.min(m) {
            return Err(Error::OutOfRange(format!("rank {s} exceeds min({l}, {m})")));
        }
        if s == 0 {
            return Ok(Self::zeros(field, l, m));
        }
        let a = Self::random_full_rank(field, l, s, rng);
        let b = Self::random_full_rank(field, s, m, rng);
        a.mul(&b)
    }

    /// Plain-text form: `"rows cols q"` then one line of space-separated
    /// entries per row.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.rows, self.cols, self.field.q());
        for r in 0..self.rows {
            let line: Vec<String> = self.row(r).iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty matrix text".into()))?;
        let nums: Vec<u64> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header {header:?}"))))
            .collect::<Result<_>>()?;
        let [rows, cols, q] = nums[..] else {
            return Err(Error::Parse(format!("header must be \"rows cols q\", got {header:?}")));
        };
        let field = FieldSpec::new(q as u32)?;
        let mut data = Vec::with_capacity((rows * cols) as usize);
        for line in lines.by_ref().take(rows as usize) {
            let row: Vec<u64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad entry in {line:?}"))))
                .collect::<Result<_>>()?;
            if row.len() != cols as usize {
                return Err(Error::Parse(format!("expected {cols} entries, got {}", row.len())));
            }
            for v in row {
                data.push(field.check(v)?);
            }
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing rows after matrix".into()));
        }
        Matrix::from_vec(field, rows as usize, cols as usize, data)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} over F_{}", self.rows, self.cols, self.field.q())?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}
