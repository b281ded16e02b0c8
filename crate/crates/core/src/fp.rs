//! Arithmetic in the prime field F_p.
//!
//! Coefficients of all series live here. Only prime p is supported; the
//! constructor rejects composite moduli. Extension fields F_q would slot in
//! behind the same handful of operations.

use crate::error::{Error, Result};

/// The prime field F_p, passed around by value as a tiny context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fp {
    p: u32,
}

impl Fp {
    pub fn new(p: u32) -> Result<Fp> {
        if p < 2 || !is_prime(p) {
            return Err(Error::Parse(format!("q = {p} is not a supported prime")));
        }
        Ok(Fp { p })
    }

    pub fn modulus(&self) -> u32 {
        self.p
    }

    pub fn reduce(&self, n: i64) -> u32 {
        n.rem_euclid(self.p as i64) as u32
    }

    pub fn add(&self, a: u32, b: u32) -> u32 {
        (a + b) % self.p
    }

    pub fn sub(&self, a: u32, b: u32) -> u32 {
        (a + self.p - b % self.p) % self.p
    }

    pub fn neg(&self, a: u32) -> u32 {
        (self.p - a % self.p) % self.p
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.p as u64) as u32
    }

    /// Multiplicative inverse of a nonzero residue, via Fermat.
    pub fn inv(&self, a: u32) -> u32 {
        assert!(a % self.p != 0, "inverse of zero in F_{}", self.p);
        self.pow(a, self.p - 2)
    }

    pub fn pow(&self, mut base: u32, mut e: u32) -> u32 {
        let mut acc = 1u32;
        base %= self.p;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// All residues 0..p, for line enumeration over the residue field.
    pub fn elements(&self) -> impl Iterator<Item = u32> + '_ {
        0..self.p
    }
}

fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u32;
    while (d as u64) * (d as u64) <= n as u64 {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_composite_modulus() {
        assert!(Fp::new(4).is_err());
        assert!(Fp::new(1).is_err());
        assert!(Fp::new(9).is_err());
        assert!(Fp::new(2).is_ok());
        assert!(Fp::new(13).is_ok());
    }

    #[test]
    fn inverse_roundtrip() {
        let f = Fp::new(7).unwrap();
        for a in 1..7 {
            assert_eq!(f.mul(a, f.inv(a)), 1);
        }
    }
}
