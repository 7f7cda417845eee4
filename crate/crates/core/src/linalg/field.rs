use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MERSENNE31: u64 = (1 << 31) - 1;

/// Prime field GF(modulus) with modulus below 2^32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct FieldSpec {
    modulus: u64,
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self { modulus: MERSENNE31 }
    }
}

impl TryFrom<u64> for FieldSpec {
    type Error = Error;
    fn try_from(m: u64) -> Result<Self> {
        FieldSpec::new(m)
    }
}

impl From<FieldSpec> for u64 {
    fn from(f: FieldSpec) -> u64 {
        f.modulus
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

impl FieldSpec {
    pub fn new(modulus: u64) -> Result<Self> {
        if modulus >= 1 << 32 || !is_prime(modulus) {
            return Err(Error::BadModulus(modulus));
        }
        Ok(Self { modulus })
    }

    pub fn gf2() -> Self {
        Self { modulus: 2 }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn is_binary(&self) -> bool {
        self.modulus == 2
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        if self.modulus == MERSENNE31 {
            let r = (x & MERSENNE31) + (x >> 31);
            let r = (r & MERSENNE31) + (r >> 31);
            if r >= MERSENNE31 {
                r - MERSENNE31
            } else {
                r
            }
        } else {
            x % self.modulus
        }
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.modulus {
            s - self.modulus
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.modulus - b
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce(a * b)
    }

    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.modulus - a
        }
    }

    pub fn pow(&self, mut a: u64, mut e: u64) -> u64 {
        let mut r = 1 % self.modulus;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, a);
            }
            a = self.mul(a, a);
            e >>= 1;
        }
        r
    }

    /// Multiplicative inverse of a nonzero element.
    pub fn inv(&self, a: u64) -> u64 {
        debug_assert!(a != 0);
        self.pow(a, self.modulus - 2)
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.gen_range(0..self.modulus)
    }

    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.gen_range(1..self.modulus)
    }
}
