//! The rank-2 value group Z + Z with lexicographic order, t-exponent dominant.
//!
//! All valuations in the crate take values here (or in [`GammaExt`], which
//! adjoins the valuation of zero). The coordinate convention is fixed once:
//! a pair is `(t_exp, u_exp)` and comparison weighs `t_exp` first.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};

/// An element of the value group: `(t_exp, u_exp)`, ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Gamma {
    pub t: i64,
    pub u: i64,
}

impl Gamma {
    pub const ZERO: Gamma = Gamma { t: 0, u: 0 };

    pub fn new(t: i64, u: i64) -> Gamma {
        Gamma { t, u }
    }

    /// Lexicographic comparison with t dominant. Same as the derived `Ord`;
    /// kept as a named operation because it is the order of the value group.
    pub fn cmp_lex(&self, other: &Gamma) -> Ordering {
        (self.t, self.u).cmp(&(other.t, other.u))
    }

    /// The quotient map onto the rank-1 value group Z: forgets the u-exponent.
    pub fn project(&self) -> i64 {
        self.t
    }

    /// Membership in the non-negative cone.
    pub fn is_nonneg(&self) -> bool {
        *self >= Gamma::ZERO
    }

    /// Absolute value: the element or its negative, whichever is non-negative.
    pub fn abs(&self) -> Gamma {
        if self.is_nonneg() {
            *self
        } else {
            -*self
        }
    }

    /// Componentwise reduction mod 2, used for vertex types.
    pub fn mod2(&self) -> (u8, u8) {
        (self.t.rem_euclid(2) as u8, self.u.rem_euclid(2) as u8)
    }

    /// Halve both components; `None` if either is odd.
    pub fn half(&self) -> Option<Gamma> {
        if self.t % 2 == 0 && self.u % 2 == 0 {
            Some(Gamma::new(self.t / 2, self.u / 2))
        } else {
            None
        }
    }
}

impl Add for Gamma {
    type Output = Gamma;
    fn add(self, rhs: Gamma) -> Gamma {
        Gamma {
            t: self.t.checked_add(rhs.t).expect("t exponent overflow"),
            u: self.u.checked_add(rhs.u).expect("u exponent overflow"),
        }
    }
}

impl Sub for Gamma {
    type Output = Gamma;
    fn sub(self, rhs: Gamma) -> Gamma {
        Gamma {
            t: self.t.checked_sub(rhs.t).expect("t exponent overflow"),
            u: self.u.checked_sub(rhs.u).expect("u exponent overflow"),
        }
    }
}

impl Neg for Gamma {
    type Output = Gamma;
    fn neg(self) -> Gamma {
        Gamma {
            t: self.t.checked_neg().expect("t exponent overflow"),
            u: self.u.checked_neg().expect("u exponent overflow"),
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.t, self.u)
    }
}

/// The value group extended by the valuation of zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaExt {
    Finite(Gamma),
    Infinity,
}

impl GammaExt {
    pub fn finite(self) -> Option<Gamma> {
        match self {
            GammaExt::Finite(g) => Some(g),
            GammaExt::Infinity => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, GammaExt::Infinity)
    }
}

impl PartialOrd for GammaExt {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GammaExt {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (GammaExt::Infinity, GammaExt::Infinity) => Ordering::Equal,
            (GammaExt::Infinity, GammaExt::Finite(_)) => Ordering::Greater,
            (GammaExt::Finite(_), GammaExt::Infinity) => Ordering::Less,
            (GammaExt::Finite(a), GammaExt::Finite(b)) => a.cmp(b),
        }
    }
}

impl Add for GammaExt {
    type Output = GammaExt;
    fn add(self, rhs: GammaExt) -> GammaExt {
        match (self, rhs) {
            (GammaExt::Finite(a), GammaExt::Finite(b)) => GammaExt::Finite(a + b),
            _ => GammaExt::Infinity,
        }
    }
}

impl From<Gamma> for GammaExt {
    fn from(g: Gamma) -> Self {
        GammaExt::Finite(g)
    }
}

impl fmt::Display for GammaExt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaExt::Finite(g) => g.fmt(f),
            GammaExt::Infinity => write!(f, "inf"),
        }
    }
}
