//! Prime field arithmetic.
//!
//! A [`Modulus`] is a prime `q < 2^32` checked by trial division when it is
//! constructed. Elements carry their modulus so that mixing fields is caught
//! at run time; the `checked_*` methods report it as an error while the
//! operator impls panic.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A verified prime modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct Modulus(u32);

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

impl Modulus {
    pub fn new(q: u64) -> Result<Self> {
        if q > u32::MAX as u64 || !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        Ok(Modulus(q as u32))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    /// Reduces any signed integer into `[0, q)`.
    #[inline]
    pub fn reduce(self, v: i64) -> u32 {
        v.rem_euclid(self.0 as i64) as u32
    }

    #[inline]
    pub fn add(self, a: u32, b: u32) -> u32 {
        ((a as u64 + b as u64) % self.0 as u64) as u32
    }

    #[inline]
    pub fn sub(self, a: u32, b: u32) -> u32 {
        ((a as u64 + self.0 as u64 - b as u64) % self.0 as u64) as u32
    }

    #[inline]
    pub fn mul(self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.0 as u64) as u32
    }

    #[inline]
    pub fn neg(self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.0 - a
        }
    }

    pub fn pow(self, mut base: u32, mut exp: u64) -> u32 {
        let mut acc = 1 % self.0;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse by the extended Euclidean algorithm.
    pub fn inv(self, a: u32) -> Result<u32> {
        if a % self.0 == 0 {
            return Err(Error::InverseOfZero);
        }
        let (mut r0, mut r1) = (self.0 as i64, a as i64);
        let (mut t0, mut t1) = (0i64, 1i64);
        while r1 != 0 {
            let quot = r0 / r1;
            (r0, r1) = (r1, r0 - quot * r1);
            (t0, t1) = (t1, t0 - quot * t1);
        }
        debug_assert_eq!(r0, 1);
        Ok(self.reduce(t0))
    }

    pub fn element(self, v: i64) -> FieldElement {
        FieldElement {
            value: self.reduce(v),
            modulus: self,
        }
    }

    pub fn zero(self) -> FieldElement {
        self.element(0)
    }

    pub fn one(self) -> FieldElement {
        self.element(1)
    }

    /// Every element of the field in increasing order.
    pub fn elements(self) -> impl Iterator<Item = FieldElement> {
        (0..self.0).map(move |v| FieldElement { value: v, modulus: self })
    }
}

impl TryFrom<u64> for Modulus {
    type Error = Error;

    fn try_from(q: u64) -> Result<Self> {
        Modulus::new(q)
    }
}

impl From<Modulus> for u64 {
    fn from(m: Modulus) -> u64 {
        m.0 as u64
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An element of `F_q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement {
    value: u32,
    modulus: Modulus,
}

impl FieldElement {
    pub fn new(value: i64, modulus: Modulus) -> Self {
        modulus.element(value)
    }

    /// Builds an element from a value that must already be reduced.
    pub fn from_reduced(value: u32, modulus: Modulus) -> Result<Self> {
        if value >= modulus.get() {
            return Err(Error::Frame(format!(
                "symbol {value} is not reduced mod {modulus}"
            )));
        }
        Ok(FieldElement { value, modulus })
    }

    #[inline]
    pub fn value(self) -> u32 {
        self.value
    }

    #[inline]
    pub fn modulus(self) -> Modulus {
        self.modulus
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    fn same_field(self, other: FieldElement) -> Result<Modulus> {
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch {
                left: self.modulus.get(),
                right: other.modulus.get(),
            });
        }
        Ok(self.modulus)
    }

    pub fn checked_add(self, rhs: FieldElement) -> Result<FieldElement> {
        let m = self.same_field(rhs)?;
        Ok(FieldElement { value: m.add(self.value, rhs.value), modulus: m })
    }

    pub fn checked_sub(self, rhs: FieldElement) -> Result<FieldElement> {
        let m = self.same_field(rhs)?;
        Ok(FieldElement { value: m.sub(self.value, rhs.value), modulus: m })
    }

    pub fn checked_mul(self, rhs: FieldElement) -> Result<FieldElement> {
        let m = self.same_field(rhs)?;
        Ok(FieldElement { value: m.mul(self.value, rhs.value), modulus: m })
    }

    pub fn inv(self) -> Result<FieldElement> {
        Ok(FieldElement {
            value: self.modulus.inv(self.value)?,
            modulus: self.modulus,
        })
    }

    pub fn pow(self, exp: u64) -> FieldElement {
        FieldElement {
            value: self.modulus.pow(self.value, exp),
            modulus: self.modulus,
        }
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $checked:ident) => {
        impl $tr for FieldElement {
            type Output = FieldElement;

            fn $method(self, rhs: FieldElement) -> FieldElement {
                self.$checked(rhs).expect("field elements from different fields")
            }
        }
    };
}

binop!(Add, add, checked_add);
binop!(Sub, sub, checked_sub);
binop!(Mul, mul, checked_mul);

impl Neg for FieldElement {
    type Output = FieldElement;

    fn neg(self) -> FieldElement {
        FieldElement {
            value: self.modulus.neg(self.value),
            modulus: self.modulus,
        }
    }
}
