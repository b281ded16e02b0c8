//! Fractional O'-ideals: classification, arithmetic and the Hom table.
//!
//! Every finitely generated fractional O'-ideal is principal, generated by a
//! monomial u^i t^n; the infinitely generated ones are exactly the
//! O_K-multiples t^n O_K. `Zero` and `FullK` close the family under the Hom
//! table and serve as coefficient ideals for tree strata.

use crate::error::Result;
use crate::field::{FieldElement, RingId};
use crate::gamma::{Gamma, GammaExt};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A fractional O'-ideal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FractionalIdeal {
    /// m_{i,n} = (u^i t^n), with the generator's valuation (n, i).
    Principal { i: i64, n: i64 },
    /// p_n = t^n O_K, infinitely generated over O'.
    #[serde(rename = "p")]
    PType { n: i64 },
    Zero,
    #[serde(rename = "K")]
    FullK,
}

pub use FractionalIdeal::{FullK, PType, Principal, Zero};

impl FractionalIdeal {
    /// The unit ideal O' = m_{0,0}.
    pub const UNIT: FractionalIdeal = Principal { i: 0, n: 0 };
    /// O_K = p_0 as an O'-module.
    pub const OK_MODULE: FractionalIdeal = PType { n: 0 };

    /// Valuation of a principal generator, as a Gamma pair (t, u).
    pub fn generator_valuation(&self) -> Option<Gamma> {
        match *self {
            Principal { i, n } => Some(Gamma::new(n, i)),
            _ => None,
        }
    }

    /// Ideal product.
    pub fn mul(&self, other: &FractionalIdeal) -> FractionalIdeal {
        match (*self, *other) {
            (Zero, _) | (_, Zero) => Zero,
            (FullK, _) | (_, FullK) => FullK,
            (Principal { i, n }, Principal { i: i2, n: n2 }) => Principal {
                i: i + i2,
                n: n + n2,
            },
            // u^i is a unit of O_K, so the u-exponent is absorbed
            (Principal { n, .. }, PType { n: n2 }) | (PType { n: n2 }, Principal { n, .. }) => {
                PType { n: n + n2 }
            }
            (PType { n }, PType { n: n2 }) => PType { n: n + n2 },
        }
    }

    /// Containment of ideals.
    pub fn contains_ideal(&self, other: &FractionalIdeal) -> bool {
        match (*self, *other) {
            (_, Zero) => true,
            (Zero, _) => false,
            (FullK, _) => true,
            (_, FullK) => false,
            (Principal { i, n }, Principal { i: i2, n: n2 }) => {
                Gamma::new(n2, i2) >= Gamma::new(n, i)
            }
            (PType { n }, PType { n: n2 }) => n2 >= n,
            (PType { n }, Principal { n: n2, .. }) => n2 >= n,
            // t^n O_K needs all u-exponents, a principal ideal has a u-floor
            (Principal { .. }, PType { .. }) => false,
        }
    }

    /// Membership of a field element.
    pub fn contains(&self, x: &FieldElement) -> Result<bool> {
        let v = x.valuation()?;
        Ok(match (*self, v) {
            (_, GammaExt::Infinity) => true,
            (Zero, _) => false,
            (FullK, _) => true,
            (Principal { i, n }, GammaExt::Finite(w)) => w >= Gamma::new(n, i),
            (PType { n }, GammaExt::Finite(w)) => w.t >= n,
        })
    }

    /// The ring of the tower presented as an ideal.
    pub fn from_ring(r: RingId) -> FractionalIdeal {
        match r {
            RingId::K => FullK,
            RingId::OK => PType { n: 0 },
            RingId::OPrime => Principal { i: 0, n: 0 },
        }
    }
}

impl fmt::Display for FractionalIdeal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Principal { i, n } => write!(f, "m_{{{i},{n}}}"),
            PType { n } => write!(f, "p_{n}"),
            Zero => write!(f, "(0)"),
            FullK => write!(f, "K"),
        }
    }
}

/// Classify the O'-module generated by finitely many elements. Finite
/// generator lists always produce a principal ideal (or zero): the minimum
/// of the valuations over nonzero generators is attained.
pub fn classify_module(gens: &[FieldElement]) -> Result<FractionalIdeal> {
    let mut best: Option<Gamma> = None;
    for g in gens {
        match g.valuation()? {
            GammaExt::Infinity => {}
            GammaExt::Finite(v) => {
                best = Some(match best {
                    None => v,
                    Some(b) => b.min(v),
                });
            }
        }
    }
    Ok(match best {
        None => Zero,
        Some(v) => Principal { i: v.u, n: v.t },
    })
}

/// Hom_{O'}(O_(src), O_(dst)) as a fractional ideal, per the tower table:
/// the larger ring maps into the smaller only through (0) or p.
pub fn hom_ideal(src: RingId, dst: RingId) -> FractionalIdeal {
    let rank = |r: RingId| match r {
        RingId::K => 0u8,
        RingId::OK => 1,
        RingId::OPrime => 2,
    };
    if rank(src) >= rank(dst) {
        FractionalIdeal::from_ring(dst)
    } else {
        match (src, dst) {
            (RingId::K, _) => Zero,
            (RingId::OK, RingId::OPrime) => PType { n: 1 },
            _ => unreachable!("rank comparison covers the rest"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_element;
    use proptest::prelude::*;

    fn el(s: &str) -> FieldElement {
        parse_element(3, s).unwrap()
    }

    #[test]
    fn classify_picks_min_valuation() {
        let a = classify_module(&[el("u^2*t"), el("u^-1*t")]).unwrap();
        assert_eq!(a, Principal { i: -1, n: 1 });
        let b = classify_module(&[el("1")]).unwrap();
        assert_eq!(b, FractionalIdeal::UNIT);
        let c = classify_module(&[el("t^2"), el("u*t^2"), el("u^5*t^3")]).unwrap();
        assert_eq!(c, Principal { i: 0, n: 2 });
        let z = classify_module(&[FieldElement::zero(3)]).unwrap();
        assert_eq!(z, Zero);
    }

    #[test]
    fn hom_table() {
        use RingId::*;
        assert_eq!(hom_ideal(K, OK), Zero);
        assert_eq!(hom_ideal(K, OPrime), Zero);
        assert_eq!(hom_ideal(OK, OPrime), PType { n: 1 });
        assert_eq!(hom_ideal(OPrime, OPrime), Principal { i: 0, n: 0 });
        assert_eq!(hom_ideal(OK, OK), PType { n: 0 });
        assert_eq!(hom_ideal(K, K), FullK);
        assert_eq!(hom_ideal(OPrime, OK), PType { n: 0 });
        assert_eq!(hom_ideal(OPrime, K), FullK);
        assert_eq!(hom_ideal(OK, K), FullK);
    }

    #[test]
    fn product_cases() {
        assert_eq!(
            Principal { i: 1, n: 0 }.mul(&Principal { i: 0, n: 2 }),
            Principal { i: 1, n: 2 }
        );
        assert_eq!(
            Principal { i: 7, n: 1 }.mul(&PType { n: 2 }),
            PType { n: 3 }
        );
        assert_eq!(PType { n: 0 }.mul(&PType { n: 0 }), PType { n: 0 });
        assert_eq!(Zero.mul(&FullK), Zero);
    }

    #[test]
    fn membership_cases() {
        assert!(FractionalIdeal::UNIT.contains(&el("t*u^-5")).unwrap());
        assert!(PType { n: 0 }.contains(&el("u^-9")).unwrap());
        assert!(!Principal { i: 0, n: 1 }.contains(&el("u")).unwrap());
        assert!(Zero.contains(&FieldElement::zero(3)).unwrap());
        assert!(!Zero.contains(&el("1")).unwrap());
    }

    fn gens_strategy() -> impl Strategy<Value = Vec<FieldElement>> {
        proptest::collection::vec(
            proptest::collection::vec(((-3i64..4), (-3i64..4), (1i64..3)), 1..4)
                .prop_map(|items| FieldElement::from_terms(3, &items)),
            1..5,
        )
    }

    proptest! {
        #[test]
        fn classify_is_order_independent(gens in gens_strategy()) {
            let a = classify_module(&gens).unwrap();
            let mut rev = gens.clone();
            rev.reverse();
            prop_assert_eq!(a, classify_module(&rev).unwrap());
        }

        #[test]
        fn classify_invariant_under_common_unit(gens in gens_strategy()) {
            // multiply all generators by the O'-unit (1 + u)
            let unit = FieldElement::from_terms(3, &[(0, 0, 1), (0, 1, 1)]);
            let scaled: Vec<_> = gens.iter().map(|g| g.mul(&unit)).collect();
            prop_assert_eq!(classify_module(&gens).unwrap(), classify_module(&scaled).unwrap());
        }

        #[test]
        fn classify_multiplicative(a in gens_strategy(), b in gens_strategy()) {
            let ia = classify_module(&a).unwrap();
            let ib = classify_module(&b).unwrap();
            let mut prods = Vec::new();
            for x in &a {
                for y in &b {
                    prods.push(x.mul(y));
                }
            }
            prop_assert_eq!(ia.mul(&ib), classify_module(&prods).unwrap());
        }

        #[test]
        fn ideal_contains_its_generators(gens in gens_strategy()) {
            let a = classify_module(&gens).unwrap();
            for g in &gens {
                prop_assert!(a.contains(g).unwrap());
            }
        }
    }

    /// Brute-force cross-check of the Hom table: lambda * src lands in dst
    /// exactly when lambda lies in the tabulated ideal (sampled).
    #[test]
    fn hom_table_matches_membership_sampling() {
        use RingId::*;
        let lambdas: Vec<FieldElement> = {
            let mut v = Vec::new();
            for t in -3..4i64 {
                for u in -3..4i64 {
                    v.push(FieldElement::monomial(3, t, u, 1));
                    v.push(FieldElement::from_terms(3, &[(t, u, 1), (t + 1, u, 2)]));
                }
            }
            v
        };
        let ring_samples = |r: RingId| -> Vec<FieldElement> {
            let mut v = Vec::new();
            for t in 0..4i64 {
                for u in -3..4i64 {
                    let x = FieldElement::monomial(3, t, u, 1);
                    if x.in_ring(r).unwrap() {
                        v.push(x);
                    }
                }
            }
            // deep witnesses so that every lambda outside the Hom ideal
            // provably fails on some sample
            if r == K {
                v.push(FieldElement::monomial(3, -8, 0, 1));
                v.push(FieldElement::monomial(3, -8, -8, 1));
            }
            if r == K || r == OK {
                v.push(FieldElement::monomial(3, 0, -8, 1));
            }
            v
        };
        for (src, dst) in [
            (K, OK),
            (K, OPrime),
            (OK, OPrime),
            (OPrime, OPrime),
            (OK, OK),
            (OPrime, OK),
        ] {
            let hom = hom_ideal(src, dst);
            let dst_ideal = FractionalIdeal::from_ring(dst);
            for lam in &lambdas {
                let in_hom = hom.contains(lam).unwrap();
                let maps = ring_samples(src)
                    .iter()
                    .all(|x| dst_ideal.contains(&lam.mul(x)).unwrap());
                assert_eq!(in_hom, maps, "lambda = {lam}, Hom({src:?},{dst:?}) = {hom}");
            }
        }
    }
}
