//! Names for the vertices of a standard apartment.
//!
//! An apartment is combinatorially the compactified line of picture-2 order:
//! x_0, ..., y_{n-1}, z_n, ..., x_{i,n}, x_{i+1,n}, ..., y_n, z_{n+1}, ...,
//! x_inf. Labels identify vertices relative to a chosen basis.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ApartmentLabel {
    /// Inner vertex x_{i,n} = <m_{i,n} + O'>.
    X { i: i64, n: i64 },
    /// Inner-boundary vertex y_n = <O' + p^{-n}>, the i -> +inf end of level n.
    Y { n: i64 },
    /// Inner-boundary vertex z_n = <p^n + O'>, the i -> -inf end of level n.
    Z { n: i64 },
    /// External boundary x_0 = <K + O'>, the n -> -inf end.
    XZero,
    /// External boundary x_inf = <O' + K>, the n -> +inf end.
    XInfty,
}

impl ApartmentLabel {
    /// Total position along the apartment line; lexicographic comparison of
    /// the returned keys is the picture-2 order.
    pub fn position(&self) -> (i64, i8, i64) {
        match *self {
            ApartmentLabel::XZero => (i64::MIN, 0, 0),
            ApartmentLabel::Z { n } => (n, -1, 0),
            ApartmentLabel::X { i, n } => (n, 0, i),
            ApartmentLabel::Y { n } => (n, 1, 0),
            ApartmentLabel::XInfty => (i64::MAX, 1, 0),
        }
    }

    pub fn stratum(&self) -> u8 {
        match self {
            ApartmentLabel::X { .. } => 2,
            ApartmentLabel::Y { .. } | ApartmentLabel::Z { .. } => 1,
            ApartmentLabel::XZero | ApartmentLabel::XInfty => 0,
        }
    }
}

impl fmt::Display for ApartmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ApartmentLabel::X { i, n } => write!(f, "x_{{{i},{n}}}"),
            ApartmentLabel::Y { n } => write!(f, "y_{n}"),
            ApartmentLabel::Z { n } => write!(f, "z_{n}"),
            ApartmentLabel::XZero => write!(f, "x_0"),
            ApartmentLabel::XInfty => write!(f, "x_inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::ApartmentLabel::*;

    #[test]
    fn picture_order() {
        let line = [
            XZero,
            Y { n: 0 },
            Z { n: 1 },
            X { i: -3, n: 1 },
            X { i: 4, n: 1 },
            Y { n: 1 },
            Z { n: 2 },
            XInfty,
        ];
        for w in line.windows(2) {
            assert!(w[0].position() < w[1].position(), "{} < {}", w[0], w[1]);
        }
    }
}
