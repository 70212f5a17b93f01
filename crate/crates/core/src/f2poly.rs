//! Arithmetic in F2[x]/(x^n): one-variable polynomials over the two-element
//! field, truncated at a fixed order n. This ring supplies the matrix entries
//! for the whole scheme.
//!
//! Coefficients are bit-packed: the coefficient of x^i lives at bit (i % 64)
//! of word (i / 64). Addition is word-wise XOR, multiplication is word-sliced
//! carryless schoolbook truncated at n, and composition is Horner's rule.
//! Operations never coerce truncation orders; mixing orders is reported as
//! [`AlgebraError::OrderMismatch`].

use std::fmt;

use rand::Rng;
use thiserror::Error;

const WORD_BITS: usize = 64;

/// Errors from the scalar and matrix algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AlgebraError {
    /// Two operands live in rings with different truncation orders.
    #[error("truncation order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },
    /// An endomorphism was built from a polynomial with constant term 1.
    #[error("endomorphism polynomial must have zero constant term")]
    NonzeroConstantTerm,
}

/// Constant-term policy for random sampling.
///
/// Private keys use `One` (every entry is a unit at x=0), endomorphism
/// polynomials use `Zero` (so substitution is well defined on the quotient),
/// and per-round commitment randomness uses `Free`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstTerm {
    Zero,
    One,
    Free,
}

/// An element of F2[x]/(x^n): coefficients for degrees 0..n-1.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TruncPoly {
    n: usize,
    words: Vec<u64>,
}

fn word_count(n: usize) -> usize {
    n.div_ceil(WORD_BITS)
}

impl TruncPoly {
    /// The zero polynomial at truncation order `n`.
    ///
    /// Panics if `n == 0`; an order-0 ring has no elements worth having, and
    /// every entry point validates n before construction.
    pub fn zero(n: usize) -> Self {
        assert!(n >= 1, "truncation order must be at least 1");
        TruncPoly { n, words: vec![0; word_count(n)] }
    }

    /// The constant polynomial 1.
    pub fn one(n: usize) -> Self {
        let mut p = Self::zero(n);
        p.words[0] = 1;
        p
    }

    /// The monomial x^d, which truncates to zero when d >= n.
    pub fn monomial(n: usize, d: usize) -> Self {
        let mut p = Self::zero(n);
        if d < n {
            p.words[d / WORD_BITS] |= 1u64 << (d % WORD_BITS);
        }
        p
    }

    /// Sum of the monomials x^d for each listed degree (degrees >= n truncate
    /// away; repeated degrees cancel in characteristic 2).
    pub fn from_support(n: usize, degrees: &[usize]) -> Self {
        let mut p = Self::zero(n);
        for &d in degrees {
            if d < n {
                p.words[d / WORD_BITS] ^= 1u64 << (d % WORD_BITS);
            }
        }
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Coefficient of x^i; degrees at or above n read as zero.
    pub fn coeff(&self, i: usize) -> bool {
        if i >= self.n {
            return false;
        }
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    /// Degrees with coefficient 1, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.coeff(i)).collect()
    }

    fn check_order(&self, rhs: &Self) -> Result<(), AlgebraError> {
        if self.n != rhs.n {
            return Err(AlgebraError::OrderMismatch { left: self.n, right: rhs.n });
        }
        Ok(())
    }

    /// Coefficient-wise XOR.
    pub fn add(&self, rhs: &Self) -> Result<Self, AlgebraError> {
        self.check_order(rhs)?;
        let words = self
            .words
            .iter()
            .zip(&rhs.words)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(TruncPoly { n: self.n, words })
    }

    /// Carryless product truncated at n.
    ///
    /// Word-sliced schoolbook: for every set bit of `self`, XOR a shifted copy
    /// of `rhs` into the accumulator, discarding words at or beyond the
    /// truncation boundary. At the working sizes here (n around 300, five
    /// words) this beats any subquadratic scheme's constant factor.
    pub fn mul(&self, rhs: &Self) -> Result<Self, AlgebraError> {
        self.check_order(rhs)?;
        let nwords = self.words.len();
        let mut acc = vec![0u64; nwords];
        for (wi, &w) in self.words.iter().enumerate() {
            let mut bits = w;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let shift = wi * WORD_BITS + b;
                let off = shift / WORD_BITS;
                let sh = shift % WORD_BITS;
                for j in 0..nwords - off {
                    acc[j + off] ^= rhs.words[j] << sh;
                }
                if sh != 0 {
                    for j in 0..nwords - off - 1 {
                        acc[j + off + 1] ^= rhs.words[j] >> (WORD_BITS - sh);
                    }
                }
            }
        }
        let mut out = TruncPoly { n: self.n, words: acc };
        out.mask_top();
        Ok(out)
    }

    /// Substitution: self(inner(x)) mod x^n, i.e. the sum of
    /// self[i] * inner^i over the stored coefficients, by Horner's rule.
    ///
    /// This is a ring homomorphism exactly when `inner` has zero constant
    /// term; for other inner polynomials it is still the literal truncated
    /// power sum of the stored representative.
    pub fn compose(&self, inner: &Self) -> Result<Self, AlgebraError> {
        self.check_order(inner)?;
        let mut acc = TruncPoly::zero(self.n);
        for i in (0..self.n).rev() {
            acc = acc.mul(inner)?;
            if self.coeff(i) {
                acc.words[0] ^= 1;
            }
        }
        Ok(acc)
    }

    /// Uniformly random polynomial with the given constant-term policy.
    ///
    /// Draws `ceil(n/64)` words from `rng` in ascending word order, masks the
    /// top word, then applies the policy to bit 0. Every free coefficient is
    /// an independent fair bit, and the draw order is part of the seeded
    /// reproducibility contract.
    pub fn random<R: Rng + ?Sized>(n: usize, ct: ConstTerm, rng: &mut R) -> Self {
        assert!(n >= 1, "truncation order must be at least 1");
        let words = (0..word_count(n)).map(|_| rng.next_u64()).collect();
        let mut p = TruncPoly { n, words };
        p.mask_top();
        match ct {
            ConstTerm::Zero => p.words[0] &= !1,
            ConstTerm::One => p.words[0] |= 1,
            ConstTerm::Free => {}
        }
        p
    }

    /// Number of coefficients equal to 1.
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Same coefficients, different truncation order: truncates mod x^new_n
    /// when shrinking, zero-extends when growing. Used to embed values drawn
    /// at one degree bound into a larger working ring and to reduce
    /// endomorphism polynomials drawn past the working order.
    pub(crate) fn resized(&self, new_n: usize) -> Self {
        let mut out = TruncPoly::zero(new_n);
        let keep = out.words.len().min(self.words.len());
        out.words[..keep].copy_from_slice(&self.words[..keep]);
        out.mask_top();
        out
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn from_words(n: usize, words: Vec<u64>) -> Self {
        debug_assert_eq!(words.len(), word_count(n));
        let mut p = TruncPoly { n, words };
        p.mask_top();
        p
    }

    fn mask_top(&mut self) {
        let used = self.n % WORD_BITS;
        if used != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << used) - 1;
        }
    }
}

impl fmt::Display for TruncPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for d in self.support() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match d {
                0 => write!(f, "1")?,
                1 => write!(f, "x")?,
                _ => write!(f, "x^{d}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for TruncPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TruncPoly(n={}: {})", self.n, self)
    }
}

/// A ring endomorphism of F2[x]/(x^n) determined by x -> p(x).
///
/// The defining polynomial must have zero constant term; that makes the
/// substitution well defined on the quotient and gives it the triangularity
/// property the attack module leans on (coefficient d of an image depends
/// only on coefficients 0..d of the preimage).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Endo {
    p: TruncPoly,
}

impl Endo {
    pub fn new(p: TruncPoly) -> Result<Self, AlgebraError> {
        if p.coeff(0) {
            return Err(AlgebraError::NonzeroConstantTerm);
        }
        Ok(Endo { p })
    }

    /// The identity endomorphism x -> x.
    pub fn identity(n: usize) -> Self {
        Endo { p: TruncPoly::monomial(n, 1) }
    }

    /// Random endomorphism: defining polynomial uniform with forced-zero
    /// constant term.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Endo { p: TruncPoly::random(n, ConstTerm::Zero, rng) }
    }

    pub fn poly(&self) -> &TruncPoly {
        &self.p
    }

    pub fn n(&self) -> usize {
        self.p.n
    }

    /// Image of a scalar: q(p(x)).
    pub fn apply(&self, q: &TruncPoly) -> Result<TruncPoly, AlgebraError> {
        q.compose(&self.p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    // ---- independent oracles ------------------------------------------
    //
    // Naive Vec<bool> arithmetic, written before the packed implementation
    // and kept deliberately free of it. Expected values in the fixed tests
    // below were computed with these.

    fn naive_mul(a: &[bool], b: &[bool]) -> Vec<bool> {
        let n = a.len();
        let mut out = vec![false; n];
        for i in 0..n {
            if !a[i] {
                continue;
            }
            for j in 0..n - i {
                if b[j] {
                    out[i + j] ^= true;
                }
            }
        }
        out
    }

    fn naive_compose(f: &[bool], g: &[bool]) -> Vec<bool> {
        // sum of f[i] * g^i, powers by repeated naive multiplication
        let n = f.len();
        let mut out = vec![false; n];
        let mut power = vec![false; n]; // g^0 = 1
        power[0] = true;
        for &fi in f.iter().take(n) {
            if fi {
                for (o, p) in out.iter_mut().zip(&power) {
                    *o ^= p;
                }
            }
            power = naive_mul(&power, g);
        }
        out
    }

    fn to_bools(p: &TruncPoly) -> Vec<bool> {
        (0..p.n()).map(|i| p.coeff(i)).collect()
    }

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    // ---- fixed worked examples ----------------------------------------

    #[test]
    fn add_worked_example() {
        let a = TruncPoly::from_support(4, &[0, 1]); // 1+x
        let b = TruncPoly::from_support(4, &[1, 2]); // x+x^2
        let sum = a.add(&b).unwrap();
        assert_eq!(sum, TruncPoly::from_support(4, &[0, 2]), "(1+x)+(x+x^2) = 1+x^2");
    }

    #[test]
    fn mul_worked_example() {
        let a = TruncPoly::from_support(4, &[0, 1]); // 1+x
        let b = TruncPoly::from_support(4, &[0, 1, 2]); // 1+x+x^2
        let prod = a.mul(&b).unwrap();
        // frozen from the naive convolution oracle
        assert_eq!(prod, TruncPoly::from_support(4, &[0, 3]), "(1+x)(1+x+x^2) = 1+x^3 mod x^4");
        assert_eq!(to_bools(&prod), naive_mul(&to_bools(&a), &to_bools(&b)));
    }

    #[test]
    fn mul_truncates_high_terms() {
        for n in [1, 2, 7, 64, 65] {
            let hi = TruncPoly::monomial(n, n - 1);
            let x = TruncPoly::monomial(n, 1);
            assert!(hi.mul(&x).unwrap().is_zero(), "x^{} * x = 0 mod x^{}", n - 1, n);
        }
    }

    #[test]
    fn mul_identity() {
        let mut r = rng(1);
        for _ in 0..50 {
            let p = TruncPoly::random(37, ConstTerm::Free, &mut r);
            assert_eq!(p.mul(&TruncPoly::one(37)).unwrap(), p);
        }
    }

    #[test]
    fn compose_worked_example() {
        let f = TruncPoly::from_support(4, &[2]); // x^2
        let g = TruncPoly::from_support(4, &[1, 2]); // x+x^2
        let got = f.compose(&g).unwrap();
        // (x+x^2)^2 = x^2 + x^4, and x^4 truncates away; frozen from the
        // naive power-sum oracle
        assert_eq!(got, TruncPoly::from_support(4, &[2]));
        assert_eq!(to_bools(&got), naive_compose(&to_bools(&f), &to_bools(&g)));
    }

    #[test]
    fn compose_identity_both_sides() {
        let mut r = rng(2);
        for _ in 0..50 {
            let f = TruncPoly::random(21, ConstTerm::Free, &mut r);
            let x = TruncPoly::monomial(21, 1);
            assert_eq!(f.compose(&x).unwrap(), f, "f(x) = f");
            let g = TruncPoly::random(21, ConstTerm::Zero, &mut r);
            assert_eq!(x.compose(&g).unwrap(), g, "x(g) = g");
        }
    }

    #[test]
    fn compose_matches_naive_oracle() {
        let mut r = rng(3);
        for _ in 0..200 {
            let n = 1 + (r.next_u64() % 48) as usize;
            let f = TruncPoly::random(n, ConstTerm::Free, &mut r);
            let g = TruncPoly::random(n, ConstTerm::Free, &mut r);
            let got = f.compose(&g).unwrap();
            assert_eq!(to_bools(&got), naive_compose(&to_bools(&f), &to_bools(&g)));
        }
    }

    #[test]
    fn mul_matches_naive_oracle_across_word_boundaries() {
        let mut r = rng(4);
        for n in [1, 2, 31, 32, 63, 64, 65, 127, 128, 129, 300] {
            for _ in 0..30 {
                let a = TruncPoly::random(n, ConstTerm::Free, &mut r);
                let b = TruncPoly::random(n, ConstTerm::Free, &mut r);
                let got = a.mul(&b).unwrap();
                assert_eq!(
                    to_bools(&got),
                    naive_mul(&to_bools(&a), &to_bools(&b)),
                    "schoolbook disagrees with convolution oracle at n={n}"
                );
            }
        }
    }

    #[test]
    fn order_mismatch_is_an_error() {
        let a = TruncPoly::one(4);
        let b = TruncPoly::one(5);
        let want = AlgebraError::OrderMismatch { left: 4, right: 5 };
        assert_eq!(a.add(&b).unwrap_err(), want);
        assert_eq!(a.mul(&b).unwrap_err(), want);
        assert_eq!(a.compose(&b).unwrap_err(), want);
    }

    #[test]
    fn endo_rejects_nonzero_constant_term() {
        let p = TruncPoly::from_support(4, &[0, 1]);
        assert_eq!(Endo::new(p).unwrap_err(), AlgebraError::NonzeroConstantTerm);
        assert!(Endo::new(TruncPoly::from_support(4, &[1])).is_ok());
    }

    #[test]
    fn endo_fixes_constants_and_moves_the_generator() {
        let e = Endo::new(TruncPoly::from_support(4, &[2])).unwrap(); // x -> x^2
        let x = TruncPoly::monomial(4, 1);
        assert_eq!(e.apply(&x).unwrap(), TruncPoly::monomial(4, 2));
        let one = TruncPoly::one(4);
        assert_eq!(e.apply(&one).unwrap(), one);
        // same computation as the compose worked example
        let e2 = Endo::new(TruncPoly::from_support(4, &[1, 2])).unwrap();
        let q = TruncPoly::from_support(4, &[2]);
        assert_eq!(e2.apply(&q).unwrap(), TruncPoly::from_support(4, &[2]));
    }

    #[test]
    fn random_respects_constant_term_policy() {
        let mut r = rng(5);
        for _ in 0..200 {
            assert!(!TruncPoly::random(9, ConstTerm::Zero, &mut r).coeff(0));
            assert!(TruncPoly::random(9, ConstTerm::One, &mut r).coeff(0));
        }
        // n=1 with forced constant 1 has no free bits at all
        assert_eq!(TruncPoly::random(1, ConstTerm::One, &mut r), TruncPoly::one(1));
    }

    #[test]
    fn random_is_reproducible_from_the_seed() {
        let a = TruncPoly::random(300, ConstTerm::Free, &mut rng(42));
        let b = TruncPoly::random(300, ConstTerm::Free, &mut rng(42));
        assert_eq!(a, b);
    }

    #[test]
    fn random_free_bits_are_balanced() {
        // n=300 with forced constant term: 299 free bits, expected weight 149.5
        let mut r = rng(6);
        let samples = 2000usize;
        let total: usize = (0..samples)
            .map(|_| TruncPoly::random(300, ConstTerm::One, &mut r).weight() - 1)
            .sum();
        let mean = total as f64 / samples as f64;
        assert!(
            (mean - 149.5).abs() < 149.5 * 0.05,
            "mean free-bit weight {mean} strays more than 5% from 149.5"
        );
    }

    #[test]
    fn display_renders_support_form() {
        assert_eq!(TruncPoly::from_support(8, &[0, 1, 5]).to_string(), "1 + x + x^5");
        assert_eq!(TruncPoly::zero(3).to_string(), "0");
    }
}
