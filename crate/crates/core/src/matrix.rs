//! Square matrices over K = F_q((u))((t)).

use crate::error::{Error, Result};
use crate::field::{FieldElement, Precision};
use crate::gamma::GammaExt;
use serde::{Deserialize, Serialize};
use std::fmt;

/// An n x n matrix of field elements sharing one base field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixK {
    n: usize,
    q: u32,
    /// row-major entries
    entries: Vec<FieldElement>,
}

impl MatrixK {
    pub fn new(n: usize, q: u32, entries: Vec<FieldElement>) -> MatrixK {
        assert!(n >= 1 && entries.len() == n * n, "bad matrix shape");
        assert!(
            entries.iter().all(|e| e.q() == q),
            "mixed base fields in a matrix"
        );
        MatrixK { n, q, entries }
    }

    pub fn from_rows(q: u32, rows: Vec<Vec<FieldElement>>) -> MatrixK {
        let n = rows.len();
        let entries: Vec<_> = rows.into_iter().flatten().collect();
        Self::new(n, q, entries)
    }

    pub fn identity(n: usize, q: u32) -> MatrixK {
        let mut m = Self::zero(n, q);
        for i in 0..n {
            *m.at_mut(i, i) = FieldElement::one(q);
        }
        m
    }

    pub fn zero(n: usize, q: u32) -> MatrixK {
        MatrixK {
            n,
            q,
            entries: vec![FieldElement::zero(q); n * n],
        }
    }

    /// diag(d_1, ..., d_n)
    pub fn diagonal(q: u32, diag: &[FieldElement]) -> MatrixK {
        let mut m = Self::zero(diag.len(), q);
        for (i, d) in diag.iter().enumerate() {
            *m.at_mut(i, i) = d.clone();
        }
        m
    }

    /// Elementary transvection e_{i,j}(lambda): identity plus lambda at (i,j).
    pub fn transvection(n: usize, q: u32, i: usize, j: usize, lambda: &FieldElement) -> MatrixK {
        assert!(i != j && i < n && j < n);
        let mut m = Self::identity(n, q);
        *m.at_mut(i, j) = lambda.clone();
        m
    }

    /// Signed permutation swapping rows/columns i and j with determinant 1.
    pub fn signed_swap(n: usize, q: u32, i: usize, j: usize) -> MatrixK {
        assert!(i != j && i < n && j < n);
        let mut m = Self::identity(n, q);
        *m.at_mut(i, i) = FieldElement::zero(q);
        *m.at_mut(j, j) = FieldElement::zero(q);
        *m.at_mut(i, j) = FieldElement::one(q);
        *m.at_mut(j, i) = FieldElement::monomial(q, 0, 0, -1);
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn at(&self, i: usize, j: usize) -> &FieldElement {
        &self.entries[i * self.n + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut FieldElement {
        &mut self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> impl Iterator<Item = &FieldElement> + '_ {
        self.entries.iter()
    }

    pub fn column(&self, j: usize) -> Vec<FieldElement> {
        (0..self.n).map(|i| self.at(i, j).clone()).collect()
    }

    pub fn transpose(&self) -> MatrixK {
        let mut m = Self::zero(self.n, self.q);
        for i in 0..self.n {
            for j in 0..self.n {
                *m.at_mut(j, i) = self.at(i, j).clone();
            }
        }
        m
    }

    pub fn mul(&self, other: &MatrixK) -> MatrixK {
        assert_eq!(self.n, other.n);
        let mut out = Self::zero(self.n, self.q);
        for i in 0..self.n {
            for j in 0..self.n {
                let mut acc = FieldElement::zero(self.q);
                for k in 0..self.n {
                    acc = acc.add(&self.at(i, k).mul(other.at(k, j)));
                }
                *out.at_mut(i, j) = acc;
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[FieldElement]) -> Vec<FieldElement> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| {
                let mut acc = FieldElement::zero(self.q);
                for k in 0..self.n {
                    acc = acc.add(&self.at(i, k).mul(&v[k]));
                }
                acc
            })
            .collect()
    }

    pub fn scale(&self, c: &FieldElement) -> MatrixK {
        let mut out = self.clone();
        for e in out.entries.iter_mut() {
            *e = e.mul(c);
        }
        out
    }

    /// Laplace expansion; fine for the small n used here.
    pub fn det(&self) -> FieldElement {
        if self.n == 1 {
            return self.at(0, 0).clone();
        }
        if self.n == 2 {
            return self
                .at(0, 0)
                .mul(self.at(1, 1))
                .sub(&self.at(0, 1).mul(self.at(1, 0)));
        }
        let mut acc = FieldElement::zero(self.q);
        for j in 0..self.n {
            let m = self.minor_matrix(0, j);
            let c = self.at(0, j).mul(&m.det());
            if j % 2 == 0 {
                acc = acc.add(&c);
            } else {
                acc = acc.sub(&c);
            }
        }
        acc
    }

    pub fn minor_matrix(&self, row: usize, col: usize) -> MatrixK {
        let mut entries = Vec::with_capacity((self.n - 1) * (self.n - 1));
        for i in 0..self.n {
            if i == row {
                continue;
            }
            for j in 0..self.n {
                if j == col {
                    continue;
                }
                entries.push(self.at(i, j).clone());
            }
        }
        MatrixK::new(self.n - 1, self.q, entries)
    }

    /// r x r minor with the given row and column index sets (ascending).
    pub fn minor(&self, rows: &[usize], cols: &[usize]) -> FieldElement {
        assert_eq!(rows.len(), cols.len());
        let r = rows.len();
        let entries: Vec<_> = rows
            .iter()
            .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.at(i, j).clone())
            .collect();
        MatrixK::new(r, self.q, entries).det()
    }

    /// Inverse via the adjugate; only 2 x 2 is needed by the tree modules.
    pub fn inverse(&self, prec: Precision) -> Result<MatrixK> {
        let det = self.det();
        self.inverse_hinted(prec, &det)
    }

    /// Inverse with a structurally known determinant, for matrices built as
    /// products whose entrywise determinant may hide its valuation.
    pub fn inverse_hinted(&self, prec: Precision, det: &FieldElement) -> Result<MatrixK> {
        assert_eq!(self.n, 2, "inverse implemented for 2 x 2 only");
        if det.is_exact_zero() {
            return Err(Error::SingularMatrix);
        }
        let det_inv = det.invert(prec).map_err(|e| match e {
            Error::ZeroAtPrecision => Error::SingularMatrix,
            other => other,
        })?;
        let adj = MatrixK::from_rows(
            self.q,
            vec![
                vec![self.at(1, 1).clone(), self.at(0, 1).neg()],
                vec![self.at(1, 0).neg(), self.at(0, 0).clone()],
            ],
        );
        Ok(adj.scale(&det_inv))
    }

    /// True when the determinant is 1 below the working caps.
    pub fn det_is_one(&self) -> bool {
        self.det().is_one_below_caps()
    }

    /// Entrywise agreement below the joint caps.
    pub fn eq_below_caps(&self, other: &MatrixK) -> bool {
        self.n == other.n
            && self
                .entries
                .iter()
                .zip(other.entries.iter())
                .all(|(a, b)| a.eq_below_caps(b))
    }

    /// min over entries of nu' (Infinity for the zero matrix).
    pub fn vprime(&self) -> Result<GammaExt> {
        vprime_slice(&self.entries)
    }
}

/// nu' of a vector: the minimum over components.
pub fn vprime_slice(xs: &[FieldElement]) -> Result<GammaExt> {
    let mut best = GammaExt::Infinity;
    for x in xs {
        let v = x.valuation()?;
        if v < best {
            best = v;
        }
    }
    Ok(best)
}

impl fmt::Display for MatrixK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n {
            write!(f, "[")?;
            for j in 0..self.n {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self.at(i, j))?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_element;

    fn m2(q: u32, rows: [[&str; 2]; 2]) -> MatrixK {
        MatrixK::from_rows(
            q,
            rows.iter()
                .map(|r| r.iter().map(|s| parse_element(q, s).unwrap()).collect())
                .collect(),
        )
    }

    #[test]
    fn det_and_inverse() {
        let g = m2(2, [["1", "t"], ["u", "1"]]);
        let d = g.det();
        assert_eq!(format!("{d}"), "1+t*u");
        let inv = g.inverse(Precision::new(6, 6)).unwrap();
        assert!(g.mul(&inv).eq_below_caps(&MatrixK::identity(2, 2)));
    }

    #[test]
    fn signed_swap_has_det_one() {
        let s = MatrixK::signed_swap(3, 3, 0, 2);
        assert!(s.det_is_one());
    }

    #[test]
    fn minors() {
        let g = m2(3, [["t", "1"], ["0", "u"]]);
        assert_eq!(format!("{}", g.minor(&[0], &[1])), "1");
        assert_eq!(format!("{}", g.minor(&[0, 1], &[0, 1])), "t*u");
    }
}
