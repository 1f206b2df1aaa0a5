//! Arithmetic in the prime field F_p.
//!
//! Values are always stored as canonical least nonnegative residues, so
//! equality of [`FieldElement`]s is plain integer equality.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported modulus. Products of two residues fit in a `u64`.
pub const MAX_MODULUS: u64 = 1 << 31;

/// The prime field F_p. Primality is checked when the field is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct PrimeField {
    modulus: u32,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

impl PrimeField {
    pub fn new(modulus: u64) -> Result<Self> {
        if !(2..=MAX_MODULUS).contains(&modulus) {
            return Err(Error::ModulusOutOfRange(modulus));
        }
        if !is_prime(modulus) {
            return Err(Error::NotPrime(modulus));
        }
        Ok(Self {
            modulus: modulus as u32,
        })
    }

    #[inline]
    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    /// Field size as `u64`, convenient for enumeration arithmetic.
    #[inline]
    pub fn order(&self) -> u64 {
        self.modulus as u64
    }

    /// Reduces an arbitrary integer into the field.
    #[inline]
    pub fn element(&self, value: u64) -> FieldElement {
        FieldElement {
            value: (value % self.modulus as u64) as u32,
            field: *self,
        }
    }

    /// Reduces a signed integer into the field.
    pub fn element_i64(&self, value: i64) -> FieldElement {
        let p = self.modulus as i64;
        self.element(value.rem_euclid(p) as u64)
    }

    #[inline]
    pub fn zero(&self) -> FieldElement {
        self.element(0)
    }

    #[inline]
    pub fn one(&self) -> FieldElement {
        self.element(1)
    }

    /// Draws a uniformly random element.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        FieldElement {
            value: rng.gen_range(0..self.modulus),
            field: *self,
        }
    }

    /// Draws a uniformly random nonzero element.
    pub fn sample_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        FieldElement {
            value: rng.gen_range(1..self.modulus),
            field: *self,
        }
    }

    // Raw residue arithmetic used by the dense kernels.

    #[inline]
    pub(crate) fn add_raw(&self, a: u32, b: u32) -> u32 {
        ((a as u64 + b as u64) % self.modulus as u64) as u32
    }

    #[inline]
    pub(crate) fn sub_raw(&self, a: u32, b: u32) -> u32 {
        ((a as u64 + self.modulus as u64 - b as u64) % self.modulus as u64) as u32
    }

    #[inline]
    pub(crate) fn mul_raw(&self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.modulus as u64) as u32
    }

    /// Σ aᵢ·bᵢ over raw residues.
    #[inline]
    pub(crate) fn dot_raw(
        &self,
        a: impl Iterator<Item = u32>,
        b: impl Iterator<Item = u32>,
    ) -> u32 {
        let p = self.modulus as u64;
        let mut acc = 0u64;
        for (x, y) in a.zip(b) {
            acc = (acc + x as u64 * y as u64) % p;
        }
        acc as u32
    }
}

impl TryFrom<u64> for PrimeField {
    type Error = Error;

    fn try_from(value: u64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<PrimeField> for u64 {
    fn from(f: PrimeField) -> u64 {
        f.modulus as u64
    }
}

impl fmt::Display for PrimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.modulus)
    }
}

/// An element of a [`PrimeField`], always in `[0, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u32,
    field: PrimeField,
}

impl FieldElement {
    #[inline]
    pub fn value(&self) -> u32 {
        self.value
    }

    #[inline]
    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn same_field(&self, other: &Self) -> Result<PrimeField> {
        if self.field == other.field {
            Ok(self.field)
        } else {
            Err(Error::FieldMismatch {
                left: self.field.modulus,
                right: other.field.modulus,
            })
        }
    }

    pub fn try_add(self, other: Self) -> Result<Self> {
        let f = self.same_field(&other)?;
        Ok(FieldElement {
            value: f.add_raw(self.value, other.value),
            field: f,
        })
    }

    pub fn try_sub(self, other: Self) -> Result<Self> {
        let f = self.same_field(&other)?;
        Ok(FieldElement {
            value: f.sub_raw(self.value, other.value),
            field: f,
        })
    }

    pub fn try_mul(self, other: Self) -> Result<Self> {
        let f = self.same_field(&other)?;
        Ok(FieldElement {
            value: f.mul_raw(self.value, other.value),
            field: f,
        })
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;

    fn neg(self) -> FieldElement {
        FieldElement {
            value: self.field.sub_raw(0, self.value),
            field: self.field,
        }
    }
}

// The operator forms panic on mismatched fields; use the `try_*` methods
// when the operands may come from different fields.

impl Add for FieldElement {
    type Output = FieldElement;

    fn add(self, rhs: Self) -> Self {
        self.try_add(rhs).expect("field mismatch in addition")
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;

    fn sub(self, rhs: Self) -> Self {
        self.try_sub(rhs).expect("field mismatch in subtraction")
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;

    fn mul(self, rhs: Self) -> Self {
        self.try_mul(rhs).expect("field mismatch in multiplication")
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn f(p: u64) -> PrimeField {
        PrimeField::new(p).unwrap()
    }

    #[test]
    fn rejects_composites_and_out_of_range() {
        assert_eq!(PrimeField::new(4), Err(Error::NotPrime(4)));
        assert_eq!(PrimeField::new(91), Err(Error::NotPrime(91)));
        assert_eq!(PrimeField::new(1), Err(Error::ModulusOutOfRange(1)));
        assert_eq!(PrimeField::new(0), Err(Error::ModulusOutOfRange(0)));
        assert!(PrimeField::new((1 << 31) + 11).is_err());
        assert!(PrimeField::new(2_147_483_647).is_ok());
        for p in [2, 3, 5, 7, 11, 13, 65_537] {
            assert!(PrimeField::new(p).is_ok(), "{p}");
        }
    }

    #[test]
    fn small_examples() {
        let f5 = f(5);
        assert_eq!((f5.element(3) + f5.element(4)).value(), 2);
        assert_eq!((f5.element(2) - f5.element(4)).value(), 3);
        assert_eq!((f5.element(3) * f5.element(4)).value(), 2);
        assert_eq!((-f5.zero()).value(), 0);
        assert_eq!(f5.element_i64(-2).value(), 3);
        let f7 = f(7);
        for x in 0..7 {
            let x = f7.element(x);
            assert_eq!(f7.zero() + x, x);
            assert!((x + f7.element(7 - x.value() as u64)).is_zero());
        }
    }

    #[test]
    fn mismatched_fields_error() {
        let a = f(5).element(1);
        let b = f(7).element(1);
        assert_eq!(
            a.try_add(b),
            Err(Error::FieldMismatch { left: 5, right: 7 })
        );
        assert!(a.try_sub(b).is_err());
        assert!(a.try_mul(b).is_err());
    }

    #[test]
    fn ring_axioms_exhaustive() {
        for p in [2u64, 3, 5, 7] {
            let fp = f(p);
            let elems: Vec<_> = (0..p).map(|x| fp.element(x)).collect();
            for &a in &elems {
                for &b in &elems {
                    assert_eq!(a + b, b + a);
                    assert_eq!(a - b, a + (-b));
                    for &c in &elems {
                        assert_eq!((a + b) + c, a + (b + c));
                        assert_eq!(a * (b + c), a * b + a * c);
                    }
                }
            }
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let fp = f(5);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64)
                .map(|_| fp.sample_uniform(&mut rng).value())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn sampling_f2_mean() {
        // 10^4 Bernoulli(1/2) draws: sd of the mean is 0.005, [0.45, 0.55] is 10 sd.
        let fp = f(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ones: u32 = (0..10_000)
            .map(|_| fp.sample_uniform(&mut rng).value())
            .sum();
        let mean = ones as f64 / 10_000.0;
        assert!((0.45..=0.55).contains(&mean), "{mean}");
    }

    #[test]
    fn sampling_f3_frequencies() {
        // sd of each frequency at 3*10^4 draws is ~0.0027; the band is >= 5 sd wide.
        let fp = f(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts = [0u32; 3];
        for _ in 0..30_000 {
            counts[fp.sample_uniform(&mut rng).value() as usize] += 1;
        }
        for c in counts {
            let freq = c as f64 / 30_000.0;
            assert!((0.31..=0.36).contains(&freq), "{freq}");
        }
    }

    #[test]
    fn nonzero_sampling_never_zero() {
        let fp = f(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..100).all(|_| fp.sample_nonzero(&mut rng).value() == 1));
    }
}
