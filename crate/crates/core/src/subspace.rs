//! Linear and affine subspaces of (F_q)^m in canonical form.
//!
//! A [`Subspace`] keeps its basis in reduced row echelon form, so two values
//! are equal as sets iff they are equal field by field. An
//! [`AffineSubspace`] additionally reduces its offset against the direction
//! basis (all pivot coordinates zero), which makes the coset representative
//! canonical too.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Elem, FieldSpec};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Subspace {
    basis: Matrix,
    pivots: Vec<usize>,
}

impl Subspace {
    /// The zero subspace of (F_q)^m.
    pub fn zero(field: FieldSpec, m: usize) -> Self {
        Subspace { basis: Matrix::zeros(field, 0, m), pivots: Vec::new() }
    }

    pub fn full(field: FieldSpec, m: usize) -> Self {
        Subspace { basis: Matrix::identity(field, m), pivots: (0..m).collect() }
    }

    /// Row space of `generators`.
    pub fn from_generators(generators: &Matrix) -> Self {
        let mut m = generators.clone();
        let (rank, pivots) = m.rref_in_place();
        Subspace { basis: m.row_block(0..rank), pivots }
    }

    /// Span of the first `d` coordinate vectors.
    pub fn coordinate(field: FieldSpec, m: usize, d: usize) -> Self {
        assert!(d <= m);
        let mut basis = Matrix::zeros(field, d, m);
        for i in 0..d {
            basis.set(i, i, 1);
        }
        Subspace { basis, pivots: (0..d).collect() }
    }

    /// Uniformly random `d`-dimensional subspace.
    pub fn random<R: Rng + ?Sized>(field: FieldSpec, m: usize, d: usize, rng: &mut R) -> Result<Self> {
        if d > m {
            return Err(Error::OutOfRange(format!("dimension {d} exceeds ambient {m}")));
        }
        Ok(Self::from_generators(&Matrix::random_full_rank(field, d, m, rng)))
    }

    #[inline]
    pub fn field(&self) -> FieldSpec {
        self.basis.field()
    }

    #[inline]
    pub fn ambient_dim(&self) -> usize {
        self.basis.cols()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    /// Basis rows in canonical RREF.
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    fn same_ambient(&self, other: &Subspace) -> Result<()> {
        if self.field() != other.field() {
            return Err(Error::FieldMismatch { left: self.field().q(), right: other.field().q() });
        }
        if self.ambient_dim() != other.ambient_dim() {
            return Err(Error::AmbientMismatch { left: self.ambient_dim(), right: other.ambient_dim() });
        }
        Ok(())
    }

    /// Reduces `v` against the basis; the result is the canonical coset
    /// representative of `v + self`.
    pub fn reduce(&self, v: &[Elem]) -> Vec<Elem> {
        assert_eq!(v.len(), self.ambient_dim());
        let f = self.field();
        let mut out = v.to_vec();
        for (r, &p) in self.pivots.iter().enumerate() {
            let c = out[p];
            if c != 0 {
                f.axpy(&mut out, f.neg(c), self.basis.row(r));
            }
        }
        out
    }

    pub fn contains(&self, v: &[Elem]) -> bool {
        self.reduce(v).iter().all(|&x| x == 0)
    }

    pub fn is_subspace_of(&self, other: &Subspace) -> bool {
        (0..self.dim()).all(|r| other.contains(self.basis.row(r)))
    }

    pub fn sum(&self, other: &Subspace) -> Result<Subspace> {
        self.same_ambient(other)?;
        if other.dim() == 0 {
            return Ok(self.clone());
        }
        if self.dim() == 0 {
            return Ok(other.clone());
        }
        Ok(Self::from_generators(&self.basis.vstack(&other.basis)?))
    }

    /// Zassenhaus: row-reduce `[[U, U], [V, 0]]`; the rows whose left half
    /// vanishes carry a basis of U ∩ V in their right half.
    pub fn intersection(&self, other: &Subspace) -> Result<Subspace> {
        self.same_ambient(other)?;
        let m = self.ambient_dim();
        let f = self.field();
        if self.dim() == 0 || other.dim() == 0 {
            return Ok(Subspace::zero(f, m));
        }
        if self.dim() == m {
            return Ok(other.clone());
        }
        if other.dim() == m {
            return Ok(self.clone());
        }
        let (du, dv) = (self.dim(), other.dim());
        let mut z = Matrix::zeros(f, du + dv, 2 * m);
        for r in 0..du {
            let row = self.basis.row(r);
            z.row_mut(r)[..m].copy_from_slice(row);
            z.row_mut(r)[m..].copy_from_slice(row);
        }
        for r in 0..dv {
            z.row_mut(du + r)[..m].copy_from_slice(other.basis.row(r));
        }
        let (rank, pivots) = z.rref_in_place();
        let sum_dim = pivots.iter().take_while(|&&p| p < m).count();
        let inter = z.row_block(sum_dim..rank).col_block(m..2 * m);
        Ok(Self::from_generators(&inter))
    }

    /// Right action `U h = { u h : u ∈ U }`; `h` must be invertible.
    pub fn image(&self, h: &Matrix) -> Result<Subspace> {
        let m = self.ambient_dim();
        if h.rows() != m || h.cols() != m {
            return Err(Error::ShapeMismatch {
                expected: format!("{m}x{m} matrix"),
                got: format!("{}x{}", h.rows(), h.cols()),
            });
        }
        if h.rank() != m {
            return Err(Error::Singular);
        }
        Ok(self.image_by_invertible(h))
    }

    /// [`Subspace::image`] without the invertibility check; `h` must be an
    /// invertible m×m matrix.
    pub fn image_by_invertible(&self, h: &Matrix) -> Subspace {
        if self.dim() == 0 {
            return self.clone();
        }
        Self::from_generators(&self.basis.mul(h).expect("shapes checked by caller"))
    }

    /// Enumerates every vector of the subspace. Only sensible for tiny
    /// `q^dim`; used by test oracles.
    pub fn elements(&self) -> Vec<Vec<Elem>> {
        let f = self.field();
        let q = f.q() as usize;
        let d = self.dim();
        let total = q.pow(d as u32);
        let mut out = Vec::with_capacity(total);
        let mut coeffs = vec![0 as Elem; d];
        for _ in 0..total {
            let mut v = vec![0; self.ambient_dim()];
            for (r, &c) in coeffs.iter().enumerate() {
                f.axpy(&mut v, c, self.basis.row(r));
            }
            out.push(v);
            for c in coeffs.iter_mut() {
                *c += 1;
                if (*c as usize) < q {
                    break;
                }
                *c = 0;
            }
        }
        out
    }
}

/// `offset + direction`, with `offset` reduced against `direction`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AffineSubspace {
    offset: Vec<Elem>,
    direction: Subspace,
}

impl AffineSubspace {
    pub fn new(offset: Vec<Elem>, direction: Subspace) -> Result<Self> {
        if offset.len() != direction.ambient_dim() {
            return Err(Error::AmbientMismatch { left: offset.len(), right: direction.ambient_dim() });
        }
        let offset = direction.reduce(&offset);
        Ok(AffineSubspace { offset, direction })
    }

    pub fn point(field: FieldSpec, v: Vec<Elem>) -> Self {
        let m = v.len();
        AffineSubspace { offset: v, direction: Subspace::zero(field, m) }
    }

    pub fn linear(direction: Subspace) -> Self {
        AffineSubspace { offset: vec![0; direction.ambient_dim()], direction }
    }

    pub fn offset(&self) -> &[Elem] {
        &self.offset
    }

    pub fn direction(&self) -> &Subspace {
        &self.direction
    }

    pub fn field(&self) -> FieldSpec {
        self.direction.field()
    }

    pub fn ambient_dim(&self) -> usize {
        self.offset.len()
    }

    pub fn dim(&self) -> usize {
        self.direction.dim()
    }

    /// The unique element, when the space is a point.
    pub fn as_point(&self) -> Option<&[Elem]> {
        (self.dim() == 0).then_some(&self.offset[..])
    }

    pub fn contains(&self, v: &[Elem]) -> bool {
        let f = self.field();
        let diff: Vec<Elem> = v.iter().zip(&self.offset).map(|(&a, &b)| f.sub(a, b)).collect();
        self.direction.contains(&diff)
    }

    fn same_ambient(&self, other: &AffineSubspace) -> Result<()> {
        self.direction.same_ambient(&other.direction)
    }

    /// `{ -x : x ∈ self }`.
    pub fn negate(&self) -> AffineSubspace {
        let f = self.field();
        let offset: Vec<Elem> = self.offset.iter().map(|&v| f.neg(v)).collect();
        AffineSubspace { offset: self.direction.reduce(&offset), direction: self.direction.clone() }
    }

    pub fn image(&self, h: &Matrix) -> Result<AffineSubspace> {
        self.direction.image(h)?;
        Ok(self.image_by_invertible(h))
    }

    /// [`AffineSubspace::image`] without the invertibility check.
    pub fn image_by_invertible(&self, h: &Matrix) -> AffineSubspace {
        let direction = self.direction.image_by_invertible(h);
        let offset = h.left_mul_vec(&self.offset);
        AffineSubspace { offset: direction.reduce(&offset), direction }
    }

    pub fn sum(&self, other: &AffineSubspace) -> Result<AffineSubspace> {
        self.same_ambient(other)?;
        let f = self.field();
        let direction = self.direction.sum(&other.direction)?;
        let offset: Vec<Elem> = self.offset.iter().zip(&other.offset).map(|(&a, &b)| f.add(a, b)).collect();
        Ok(AffineSubspace { offset: direction.reduce(&offset), direction })
    }

    /// Set intersection; `Ok(None)` when empty.
    pub fn intersection(&self, other: &AffineSubspace) -> Result<Option<AffineSubspace>> {
        self.same_ambient(other)?;
        let f = self.field();
        let m = self.ambient_dim();
        let direction = self.direction.intersection(&other.direction)?;
        // Need u ∈ U, v ∈ V with offset_a + u = offset_b + v, i.e. u - v = offset_b - offset_a.
        let diff: Vec<Elem> = other.offset.iter().zip(&self.offset).map(|(&b, &a)| f.sub(b, a)).collect();
        let (du, dv) = (self.dim(), other.dim());
        if du + dv == 0 {
            return Ok(diff.iter().all(|&x| x == 0).then(|| self.clone()));
        }
        // Columns of the system are the generators of U and V.
        let mut sys = Matrix::zeros(f, m, du + dv);
        for r in 0..du {
            for (c, &v) in self.direction.basis().row(r).iter().enumerate() {
                sys.set(c, r, v);
            }
        }
        for r in 0..dv {
            for (c, &v) in other.direction.basis().row(r).iter().enumerate() {
                sys.set(c, du + r, v);
            }
        }
        let Some(sol) = sys.solve(&diff)? else {
            return Ok(None);
        };
        let mut point = self.offset.clone();
        for r in 0..du {
            f.axpy(&mut point, sol.particular[r], self.direction.basis().row(r));
        }
        Ok(Some(AffineSubspace { offset: direction.reduce(&point), direction }))
    }

    /// Every element of the coset (test oracle helper).
    pub fn elements(&self) -> Vec<Vec<Elem>> {
        let f = self.field();
        self.direction
            .elements()
            .into_iter()
            .map(|v| v.iter().zip(&self.offset).map(|(&a, &b)| f.add(a, b)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn f2() -> FieldSpec {
        FieldSpec::binary()
    }

    fn span(rows: &[&[u64]]) -> Subspace {
        let m = Matrix::from_rows(f2(), rows).unwrap();
        m.row_space()
    }

    fn e(i: usize, m: usize) -> Vec<u64> {
        let mut v = vec![0; m];
        v[i] = 1;
        v
    }

    #[test]
    fn row_space_examples() {
        assert_eq!(Matrix::zeros(f2(), 2, 3).row_space().dim(), 0);
        assert_eq!(Matrix::identity(f2(), 3).row_space(), Subspace::full(f2(), 3));
        let s = span(&[&[1, 1, 0], &[0, 0, 1], &[1, 1, 1]]);
        assert_eq!(s.dim(), 2);
    }

    #[test]
    fn sum_examples() {
        let u = span(&[&[1, 0, 1], &[0, 1, 1]]);
        assert_eq!(u.sum(&Subspace::zero(f2(), 3)).unwrap(), u);
        assert_eq!(u.sum(&u).unwrap(), u);
        let s = span(&[&e(0, 3)]).sum(&span(&[&e(1, 3)])).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(u.sum(&Subspace::zero(f2(), 4)).is_err());
    }

    #[test]
    fn intersection_examples() {
        let u = span(&[&[1, 0, 1], &[0, 1, 1]]);
        assert_eq!(u.intersection(&Subspace::full(f2(), 3)).unwrap(), u);
        assert_eq!(span(&[&e(0, 3)]).intersection(&span(&[&e(1, 3)])).unwrap().dim(), 0);
        let a = span(&[&e(0, 3), &e(1, 3)]);
        let b = span(&[&e(1, 3), &e(2, 3)]);
        assert_eq!(a.intersection(&b).unwrap(), span(&[&e(1, 3)]));
        assert!(a.intersection(&Subspace::zero(f2(), 2)).is_err());
    }

    #[test]
    fn affine_image_swap() {
        let a = AffineSubspace::new(vec![1, 0], span(&[&[0, 1]])).unwrap();
        let h = Matrix::from_rows(f2(), &[[0, 1], [1, 0]]).unwrap();
        let img = a.image(&h).unwrap();
        let expect = AffineSubspace::new(vec![0, 1], span(&[&[1, 0]])).unwrap();
        assert_eq!(img, expect);
        assert_eq!(a.image(&Matrix::identity(f2(), 2)).unwrap(), a);
        let sing = Matrix::from_rows(f2(), &[[1, 1], [1, 1]]).unwrap();
        assert_eq!(a.image(&sing), Err(Error::Singular));
    }

    #[test]
    fn affine_sum_examples() {
        let a = AffineSubspace::new(vec![1, 0], span(&[&[0, 1]])).unwrap();
        let zero = AffineSubspace::point(f2(), vec![0, 0]);
        assert_eq!(a.sum(&zero).unwrap(), a);
        let b = AffineSubspace::new(vec![0, 1], span(&[&[0, 1]])).unwrap();
        assert_eq!(a.sum(&b).unwrap(), a);
        let c = AffineSubspace::linear(span(&[&[1, 0]]));
        assert_eq!(a.sum(&c).unwrap().dim(), 2);
    }

    #[test]
    fn affine_intersection_examples() {
        let a = AffineSubspace::new(vec![1, 0], span(&[&[0, 1]])).unwrap();
        assert_eq!(a.intersection(&a).unwrap(), Some(a.clone()));
        let parallel = AffineSubspace::linear(span(&[&[0, 1]]));
        assert_eq!(a.intersection(&parallel).unwrap(), None);
        let diag = AffineSubspace::linear(span(&[&[1, 1]]));
        let p = a.intersection(&diag).unwrap().unwrap();
        assert_eq!(p.as_point(), Some(&[1, 1][..]));
    }

    #[test]
    fn offset_is_canonical() {
        let dir = span(&[&[1, 1, 0]]);
        let a = AffineSubspace::new(vec![1, 0, 1], dir.clone()).unwrap();
        let b = AffineSubspace::new(vec![0, 1, 1], dir).unwrap();
        assert_eq!(a, b);
        assert!(a.contains(&[1, 0, 1]));
        assert!(a.contains(a.offset()));
    }

    #[test]
    fn random_subspace_dimension() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = FieldSpec::new(5).unwrap();
        for d in 0..=6 {
            assert_eq!(Subspace::random(f, 6, d, &mut rng).unwrap().dim(), d);
        }
        assert!(Subspace::random(f, 3, 4, &mut rng).is_err());
    }

    #[test]
    fn elements_count() {
        let s = span(&[&[1, 0, 1], &[0, 1, 1]]);
        let set: BTreeSet<_> = s.elements().into_iter().collect();
        assert_eq!(set.len(), 4);
    }
}
