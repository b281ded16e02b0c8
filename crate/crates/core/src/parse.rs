//! Text expressions for field elements: Laurent polynomials in `u` and `t`.
//!
//! Grammar: sums/differences of products of powers, with parentheses, e.g.
//! `u^-3*t^2 + t^5` or `t*(1+u)^2`. Produces exact elements.

use crate::error::{Error, Result};
use crate::field::FieldElement;
use crate::fp::Fp;

const MAX_EXP: i64 = 1_000_000;

pub fn parse_element(q: u32, input: &str) -> Result<FieldElement> {
    Fp::new(q)?;
    let mut p = Parser {
        q,
        bytes: input.as_bytes(),
        pos: 0,
    };
    let x = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(Error::Parse(format!(
            "unexpected input at byte {}: {:?}",
            p.pos,
            &input[p.pos..]
        )));
    }
    Ok(x)
}

struct Parser<'a> {
    q: u32,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn expr(&mut self) -> Result<FieldElement> {
        let mut acc = match self.peek() {
            Some(b'-') => {
                self.bump();
                self.term()?.neg()
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.bump();
                    let t = self.term()?;
                    acc = acc.add(&t);
                }
                Some(b'-') => {
                    self.bump();
                    let t = self.term()?;
                    acc = acc.sub(&t);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<FieldElement> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.bump();
                    let f = self.factor()?;
                    acc = acc.mul(&f);
                }
                // juxtaposition like `2u` or `u t`
                Some(c) if c == b'u' || c == b't' || c == b'(' => {
                    let f = self.factor()?;
                    acc = acc.mul(&f);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<FieldElement> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.bump();
            let e = self.integer()?;
            return self.power(&base, e);
        }
        Ok(base)
    }

    fn power(&mut self, base: &FieldElement, e: i64) -> Result<FieldElement> {
        if e.abs() > 512 {
            return Err(Error::Parse(format!("exponent {e} too large")));
        }
        let positive = |b: &FieldElement, n: i64| -> FieldElement {
            let mut acc = FieldElement::one(self.q);
            for _ in 0..n {
                acc = acc.mul(b);
            }
            acc
        };
        if e >= 0 {
            return Ok(positive(base, e));
        }
        // negative exponents only for exact monomials (no series division here)
        if base.is_exact() {
            let mut it = base.terms();
            if let (Some((g, c)), None) = (it.next(), it.next()) {
                let fp = Fp::new(self.q)?;
                let mut acc = FieldElement::one(self.q);
                let inv = FieldElement::monomial(self.q, -g.t, -g.u, fp.inv(c) as i64);
                for _ in 0..(-e) {
                    acc = acc.mul(&inv);
                }
                return Ok(acc);
            }
        }
        Err(Error::Parse(
            "negative exponents are only supported on monomials".to_string(),
        ))
    }

    fn atom(&mut self) -> Result<FieldElement> {
        match self.peek() {
            Some(b'u') => {
                self.bump();
                Ok(FieldElement::monomial(self.q, 0, 1, 1))
            }
            Some(b't') => {
                self.bump();
                Ok(FieldElement::monomial(self.q, 1, 0, 1))
            }
            Some(b'(') => {
                self.bump();
                let x = self.expr()?;
                if self.bump() != Some(b')') {
                    return Err(Error::Parse("expected ')'".to_string()));
                }
                Ok(x)
            }
            Some(c) if c.is_ascii_digit() => {
                let n = self.integer()?;
                Ok(FieldElement::monomial(self.q, 0, 0, n))
            }
            other => Err(Error::Parse(format!("unexpected token {other:?}"))),
        }
    }

    fn integer(&mut self) -> Result<i64> {
        self.skip_ws();
        let neg = if self.bytes.get(self.pos) == Some(&b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Parse("expected an integer".to_string()));
        }
        let s = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        let v: i64 = s
            .parse()
            .map_err(|_| Error::Parse(format!("integer out of range: {s}")))?;
        if v > MAX_EXP {
            return Err(Error::Parse(format!("integer too large: {v}")));
        }
        Ok(if neg { -v } else { v })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::{Gamma, GammaExt};

    #[test]
    fn parses_spec_expressions() {
        let x = parse_element(2, "u^-3*t^2 + t^5").unwrap();
        assert_eq!(
            x.valuation().unwrap(),
            GammaExt::Finite(Gamma::new(2, -3))
        );
        let y = parse_element(2, "t*(1+u)^2").unwrap();
        assert_eq!(format!("{y}"), "t+t*u^2");
    }

    #[test]
    fn negative_powers_of_monomials() {
        let x = parse_element(3, "2*u^-1*t").unwrap();
        assert_eq!(x.coeff(1, -1), 2);
        let y = parse_element(3, "(u*t)^-2").unwrap();
        assert_eq!(y.coeff(-2, -2), 1);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_element(2, "u^").is_err());
        assert!(parse_element(2, "(1+u").is_err());
        assert!(parse_element(2, "v").is_err());
        assert!(parse_element(2, "u^99999999999").is_err());
        assert!(parse_element(2, "(1+u)^-1").is_err());
    }
}
