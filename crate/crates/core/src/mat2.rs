//! 2x2 matrices over F2[x]/(x^n), under multiplication only.
//!
//! This is the platform for the scheme. It is a semigroup, not a group:
//! determinants land in a ring full of zero divisors, so most matrices have
//! no inverse, and nothing here ever asks for one. The transpose is the
//! anti-automorphism the protocol uses in place of inversion.

use std::fmt;

use rand::Rng;

use crate::f2poly::{AlgebraError, ConstTerm, Endo, TruncPoly};

/// A 2x2 matrix with entries in F2[x]/(x^n), row-major (a b / c d).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mat2 {
    a: TruncPoly,
    b: TruncPoly,
    c: TruncPoly,
    d: TruncPoly,
}

impl Mat2 {
    /// Builds a matrix from entries (a b / c d), requiring all four to share
    /// one truncation order.
    pub fn new(
        a: TruncPoly,
        b: TruncPoly,
        c: TruncPoly,
        d: TruncPoly,
    ) -> Result<Self, AlgebraError> {
        for e in [&b, &c, &d] {
            if e.n() != a.n() {
                return Err(AlgebraError::OrderMismatch { left: a.n(), right: e.n() });
            }
        }
        Ok(Mat2 { a, b, c, d })
    }

    pub fn zero(n: usize) -> Self {
        Mat2 {
            a: TruncPoly::zero(n),
            b: TruncPoly::zero(n),
            c: TruncPoly::zero(n),
            d: TruncPoly::zero(n),
        }
    }

    pub fn identity(n: usize) -> Self {
        Mat2 {
            a: TruncPoly::one(n),
            b: TruncPoly::zero(n),
            c: TruncPoly::zero(n),
            d: TruncPoly::one(n),
        }
    }

    /// Truncation order shared by the entries.
    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn a(&self) -> &TruncPoly {
        &self.a
    }

    pub fn b(&self) -> &TruncPoly {
        &self.b
    }

    pub fn c(&self) -> &TruncPoly {
        &self.c
    }

    pub fn d(&self) -> &TruncPoly {
        &self.d
    }

    /// Entries in row-major order (a, b, c, d).
    pub fn entries(&self) -> [&TruncPoly; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    /// Ordinary matrix product over the coefficient ring.
    pub fn mul(&self, rhs: &Self) -> Result<Self, AlgebraError> {
        if self.n() != rhs.n() {
            return Err(AlgebraError::OrderMismatch { left: self.n(), right: rhs.n() });
        }
        Ok(Mat2 {
            a: self.a.mul(&rhs.a)?.add(&self.b.mul(&rhs.c)?)?,
            b: self.a.mul(&rhs.b)?.add(&self.b.mul(&rhs.d)?)?,
            c: self.c.mul(&rhs.a)?.add(&self.d.mul(&rhs.c)?)?,
            d: self.c.mul(&rhs.b)?.add(&self.d.mul(&rhs.d)?)?,
        })
    }

    /// Transpose: the anti-automorphism (m1 m2)^T = m2^T m1^T.
    pub fn transpose(&self) -> Self {
        Mat2 {
            a: self.a.clone(),
            b: self.c.clone(),
            c: self.b.clone(),
            d: self.d.clone(),
        }
    }

    /// Entry-wise XOR. Not part of the platform semigroup's signature, but
    /// the residual algebra in the attack works with matrix differences.
    pub(crate) fn xor(&self, rhs: &Self) -> Self {
        debug_assert_eq!(self.n(), rhs.n());
        Mat2 {
            a: self.a.add(&rhs.a).unwrap(),
            b: self.b.add(&rhs.b).unwrap(),
            c: self.c.add(&rhs.c).unwrap(),
            d: self.d.add(&rhs.d).unwrap(),
        }
    }

    /// The four degree-`i` coefficient bits packed as a nibble:
    /// bit 0 = a, bit 1 = b, bit 2 = c, bit 3 = d.
    pub(crate) fn coeff_nibble(&self, i: usize) -> u8 {
        (self.a.coeff(i) as u8)
            | (self.b.coeff(i) as u8) << 1
            | (self.c.coeff(i) as u8) << 2
            | (self.d.coeff(i) as u8) << 3
    }

    /// Uniformly random matrix, entries drawn in row-major order (a, b, c, d)
    /// with the given constant-term policy on each.
    pub fn random<R: Rng + ?Sized>(n: usize, ct: ConstTerm, rng: &mut R) -> Self {
        let a = TruncPoly::random(n, ct, rng);
        let b = TruncPoly::random(n, ct, rng);
        let c = TruncPoly::random(n, ct, rng);
        let d = TruncPoly::random(n, ct, rng);
        Mat2 { a, b, c, d }
    }

    /// Same entries carried to a different truncation order (truncate or
    /// zero-extend each).
    pub(crate) fn resized(&self, new_n: usize) -> Self {
        Mat2 {
            a: self.a.resized(new_n),
            b: self.b.resized(new_n),
            c: self.c.resized(new_n),
            d: self.d.resized(new_n),
        }
    }
}

impl Endo {
    /// Entry-wise image of a matrix. Because the endomorphism fixes 0 and 1
    /// and respects ring operations, this commutes with matrix products.
    pub fn apply_mat(&self, m: &Mat2) -> Result<Mat2, AlgebraError> {
        Mat2::new(
            self.apply(m.a())?,
            self.apply(m.b())?,
            self.apply(m.c())?,
            self.apply(m.d())?,
        )
    }
}

impl fmt::Debug for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    fn p(n: usize, degs: &[usize]) -> TruncPoly {
        TruncPoly::from_support(n, degs)
    }

    #[test]
    fn mul_worked_example() {
        // [[1, x], [0, 1]] * [[1, 0], [x, 1]] at n=4
        let m1 = Mat2::new(p(4, &[0]), p(4, &[1]), p(4, &[]), p(4, &[0])).unwrap();
        let m2 = Mat2::new(p(4, &[0]), p(4, &[]), p(4, &[1]), p(4, &[0])).unwrap();
        let prod = m1.mul(&m2).unwrap();
        // hand-checked: a = 1 + x^2, b = x, c = x, d = 1
        assert_eq!(prod.a(), &p(4, &[0, 2]));
        assert_eq!(prod.b(), &p(4, &[1]));
        assert_eq!(prod.c(), &p(4, &[1]));
        assert_eq!(prod.d(), &p(4, &[0]));
    }

    #[test]
    fn identity_is_two_sided() {
        let mut r = rng(10);
        let id = Mat2::identity(17);
        for _ in 0..30 {
            let m = Mat2::random(17, ConstTerm::Free, &mut r);
            assert_eq!(m.mul(&id).unwrap(), m);
            assert_eq!(id.mul(&m).unwrap(), m);
        }
    }

    #[test]
    fn mul_is_associative() {
        let mut r = rng(11);
        for _ in 0..50 {
            let x = Mat2::random(19, ConstTerm::Free, &mut r);
            let y = Mat2::random(19, ConstTerm::Free, &mut r);
            let z = Mat2::random(19, ConstTerm::Free, &mut r);
            assert_eq!(
                x.mul(&y).unwrap().mul(&z).unwrap(),
                x.mul(&y.mul(&z).unwrap()).unwrap()
            );
        }
    }

    #[test]
    fn multiplication_is_not_commutative() {
        // witness at the smallest nontrivial order
        let e12 = Mat2::new(p(2, &[]), p(2, &[0]), p(2, &[]), p(2, &[])).unwrap();
        let e21 = Mat2::new(p(2, &[]), p(2, &[]), p(2, &[0]), p(2, &[])).unwrap();
        assert_ne!(e12.mul(&e21).unwrap(), e21.mul(&e12).unwrap());
    }

    #[test]
    fn transpose_reverses_products() {
        let mut r = rng(12);
        for _ in 0..50 {
            let x = Mat2::random(23, ConstTerm::Free, &mut r);
            let y = Mat2::random(23, ConstTerm::Free, &mut r);
            assert_eq!(
                x.mul(&y).unwrap().transpose(),
                y.transpose().mul(&x.transpose()).unwrap()
            );
            assert_eq!(x.transpose().transpose(), x);
        }
    }

    #[test]
    fn endo_commutes_with_products() {
        let mut r = rng(13);
        for _ in 0..30 {
            let e = Endo::random(23, &mut r);
            let x = Mat2::random(23, ConstTerm::Free, &mut r);
            let y = Mat2::random(23, ConstTerm::Free, &mut r);
            assert_eq!(
                e.apply_mat(&x.mul(&y).unwrap()).unwrap(),
                e.apply_mat(&x).unwrap().mul(&e.apply_mat(&y).unwrap()).unwrap()
            );
        }
    }

    #[test]
    fn new_rejects_mixed_orders() {
        let err = Mat2::new(p(4, &[0]), p(4, &[]), p(5, &[]), p(4, &[0])).unwrap_err();
        assert_eq!(err, AlgebraError::OrderMismatch { left: 4, right: 5 });
    }

    #[test]
    fn mul_rejects_mixed_orders() {
        let x = Mat2::identity(4);
        let y = Mat2::identity(6);
        assert_eq!(
            x.mul(&y).unwrap_err(),
            AlgebraError::OrderMismatch { left: 4, right: 6 }
        );
    }

    #[test]
    fn coeff_nibble_packs_row_major() {
        let m = Mat2::new(p(4, &[1]), p(4, &[]), p(4, &[1, 2]), p(4, &[2])).unwrap();
        assert_eq!(m.coeff_nibble(0), 0b0000);
        assert_eq!(m.coeff_nibble(1), 0b0101); // a and c have x
        assert_eq!(m.coeff_nibble(2), 0b1100); // c and d have x^2
    }

    #[test]
    fn random_draw_order_is_row_major() {
        let mut r1 = rng(14);
        let m = Mat2::random(9, ConstTerm::Free, &mut r1);
        let mut r2 = rng(14);
        let a = TruncPoly::random(9, ConstTerm::Free, &mut r2);
        let b = TruncPoly::random(9, ConstTerm::Free, &mut r2);
        let c = TruncPoly::random(9, ConstTerm::Free, &mut r2);
        let d = TruncPoly::random(9, ConstTerm::Free, &mut r2);
        assert_eq!(m, Mat2::new(a, b, c, d).unwrap());
    }
}
