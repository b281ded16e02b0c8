//! The Weyl group N/T for n = 2: words in the three involutions w0, w1, w2,
//! normal forms in (Z + Z) x| Z/2, matrix representatives and the action on
//! apartment labels.
//!
//! With a = w0 w1 and b = w0 w2 the group is presented by
//! w0^2 = e, w0 a w0 = a^-1, w0 b w0 = b^-1, ab = ba, and every element has
//! the unique normal form a^m b^n w0^eps. The translation subgroup is free
//! abelian of rank 2 and conjugation by w0 inverts it, which is exactly the
//! configuration a Coxeter group cannot contain.

use crate::decomp::GenId;
use crate::error::{Error, Result};
use crate::gamma::Gamma;
use crate::label::ApartmentLabel;
use crate::matrix::MatrixK;
use serde::{Deserialize, Serialize};
use std::fmt;

/// A word over the generators.
pub type WeylWord = Vec<GenId>;

/// Normal form a^m b^n w0^eps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeylNF {
    pub m: i64,
    pub n: i64,
    pub eps: bool,
}

impl WeylNF {
    pub const IDENTITY: WeylNF = WeylNF {
        m: 0,
        n: 0,
        eps: false,
    };

    pub fn new(m: i64, n: i64, eps: bool) -> WeylNF {
        WeylNF { m, n, eps }
    }

    pub fn generator(g: GenId) -> WeylNF {
        match g {
            GenId::W0 => WeylNF::new(0, 0, true),
            GenId::W1 => WeylNF::new(-1, 0, true),
            GenId::W2 => WeylNF::new(0, -1, true),
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == WeylNF::IDENTITY
    }
}

impl fmt::Display for WeylNF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a^{} b^{} w0^{}", self.m, self.n, self.eps as u8)
    }
}

/// Group law: the flip inverts translations as it moves past them.
pub fn nf_mul(x: WeylNF, y: WeylNF) -> WeylNF {
    let sign = if x.eps { -1 } else { 1 };
    WeylNF {
        m: x.m + sign * y.m,
        n: x.n + sign * y.n,
        eps: x.eps ^ y.eps,
    }
}

pub fn nf_inv(x: WeylNF) -> WeylNF {
    if x.eps {
        // flip elements are involutions
        x
    } else {
        WeylNF::new(-x.m, -x.n, false)
    }
}

/// Fold a word into its normal form; two words are equal in the group iff
/// they reduce to the same normal form.
pub fn reduce(word: &[GenId]) -> WeylNF {
    word.iter()
        .fold(WeylNF::IDENTITY, |acc, &g| nf_mul(acc, WeylNF::generator(g)))
}

/// The monomial representative in N: a^m b^n w0^eps normalized by a scalar
/// in T so that the generators reproduce the standard displays
/// w0 = [[0,1],[-1,0]], w1 = [[0,t],[-t^-1,0]], w2 = [[0,u],[-u^-1,0]].
pub fn to_matrix(x: WeylNF, q: u32) -> MatrixK {
    // a = w0 w1 = diag(-t^-1, -t) and b = w0 w2 = diag(-u^-1, -u); the
    // scalar (-1)^{m+n} is stripped
    let d1 = crate::field::FieldElement::monomial(q, -x.m, -x.n, 1);
    let d2 = crate::field::FieldElement::monomial(q, x.m, x.n, 1);
    let diag = MatrixK::from_rows(
        q,
        vec![
            vec![d1, crate::field::FieldElement::zero(q)],
            vec![crate::field::FieldElement::zero(q), d2],
        ],
    );
    if x.eps {
        let w0 = MatrixK::from_rows(
            q,
            vec![
                vec![
                    crate::field::FieldElement::zero(q),
                    crate::field::FieldElement::one(q),
                ],
                vec![
                    crate::field::FieldElement::monomial(q, 0, 0, -1),
                    crate::field::FieldElement::zero(q),
                ],
            ],
        );
        diag.mul(&w0)
    } else {
        diag
    }
}

/// Classify a monomial 2x2 matrix by its T-coset.
pub fn nf_of_monomial_matrix(w: &MatrixK) -> Result<WeylNF> {
    assert_eq!(w.n(), 2);
    let diag_nonzero = !w.at(0, 0).is_zero_below_caps() && !w.at(1, 1).is_zero_below_caps();
    let anti_nonzero = !w.at(0, 1).is_zero_below_caps() && !w.at(1, 0).is_zero_below_caps();
    if diag_nonzero && !anti_nonzero {
        let v = w
            .at(1, 1)
            .valuation()?
            .finite()
            .ok_or(Error::ZeroAtPrecision)?;
        Ok(WeylNF::new(v.t, v.u, false))
    } else if anti_nonzero && !diag_nonzero {
        let v = w
            .at(1, 0)
            .valuation()?
            .finite()
            .ok_or(Error::ZeroAtPrecision)?;
        Ok(WeylNF::new(v.t, v.u, true))
    } else {
        Err(Error::Unsupported("matrix is not monomial"))
    }
}

/// The projection to the residue Weyl group of order two.
pub fn project_to_wk(x: WeylNF) -> bool {
    x.eps
}

/// Diagonal valuations of the translation part, summing to zero.
pub fn translation_part(x: WeylNF) -> Result<(Gamma, Gamma)> {
    if x.eps {
        return Err(Error::TranslationOfFlip);
    }
    Ok((Gamma::new(-x.m, -x.n), Gamma::new(x.m, x.n)))
}

/// The map to the Weyl group of the rank-1 structure K/K-bar: the pure-u
/// translation subgroup dies, the a-direction carries the t-exponent.
pub fn project_to_1d(x: WeylNF) -> (i64, bool) {
    (x.m, x.eps)
}

/// The action on apartment labels. Translations shift levels (and inner
/// positions); flips reflect around the fixed inner vertex and swap the two
/// external ends.
pub fn act_on_apartment(x: WeylNF, label: ApartmentLabel) -> ApartmentLabel {
    use ApartmentLabel::*;
    if !x.eps {
        match label {
            X { i, n } => X {
                i: i - 2 * x.n,
                n: n - 2 * x.m,
            },
            Y { n } => Y { n: n - 2 * x.m },
            Z { n } => Z { n: n - 2 * x.m },
            XZero => XZero,
            XInfty => XInfty,
        }
    } else {
        // fixed point of the reflection
        let i0 = -x.n;
        let n0 = -x.m;
        match label {
            X { i, n } => X {
                i: 2 * i0 - i,
                n: 2 * n0 - n,
            },
            Y { n } => Z { n: 2 * n0 - n },
            Z { n } => Y { n: 2 * n0 - n },
            XZero => XInfty,
            XInfty => XZero,
        }
    }
}

/// Parse a comma-separated word like "w0,w1,w2".
pub fn parse_word(s: &str) -> Result<WeylWord> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.push(match part {
            "w0" => GenId::W0,
            "w1" => GenId::W1,
            "w2" => GenId::W2,
            other => return Err(Error::Parse(format!("unknown generator {other:?}"))),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::GenId::*;
    use proptest::prelude::*;

    #[test]
    fn generators_are_involutions() {
        assert!(reduce(&[W1, W1]).is_identity());
        assert!(reduce(&[W0, W0]).is_identity());
        assert!(reduce(&[W2, W2]).is_identity());
    }

    #[test]
    fn braidless_relator() {
        assert!(reduce(&[W0, W1, W2, W0, W1, W2]).is_identity());
    }

    #[test]
    fn a_squared() {
        // (w0 w1)^2 = a^2; the matrix route gives diag(t^-2, t^2) mod T
        let nf = reduce(&[W0, W1, W0, W1]);
        assert_eq!(nf, WeylNF::new(2, 0, false));
        let m = to_matrix(nf, 3);
        assert_eq!(
            nf_of_monomial_matrix(&m).unwrap(),
            WeylNF::new(2, 0, false)
        );
        assert_eq!(
            m.at(1, 1).valuation().unwrap().finite().unwrap(),
            Gamma::new(2, 0)
        );
    }

    #[test]
    fn nf_mul_cases() {
        assert_eq!(
            nf_mul(WeylNF::new(1, 0, false), WeylNF::new(0, 1, false)),
            WeylNF::new(1, 1, false)
        );
        // w0 a w0 = a^-1
        let w0 = WeylNF::new(0, 0, true);
        let a = WeylNF::new(1, 0, false);
        assert_eq!(nf_mul(nf_mul(w0, a), w0), WeylNF::new(-1, 0, false));
        // flips are involutions
        let x = WeylNF::new(1, 2, true);
        assert_eq!(nf_inv(x), x);
        assert!(nf_mul(x, nf_inv(x)).is_identity());
    }

    #[test]
    fn matrix_representatives() {
        let w2 = to_matrix(WeylNF::generator(W2), 5);
        assert_eq!(format!("{}", w2.at(0, 1)), "u");
        assert_eq!(format!("{}", w2.at(1, 0)), "4*u^-1");
        assert!(to_matrix(WeylNF::IDENTITY, 5).eq_below_caps(&MatrixK::identity(2, 5)));
        assert!(w2.det_is_one());
    }

    #[test]
    fn projections() {
        assert!(project_to_wk(WeylNF::generator(W1)));
        let (d1, d2) = translation_part(WeylNF::new(2, -1, false)).unwrap();
        assert_eq!((d1, d2), (Gamma::new(-2, 1), Gamma::new(2, -1)));
        assert_eq!(d1 + d2, Gamma::ZERO);
        assert_eq!(
            translation_part(WeylNF::new(0, 0, true)),
            Err(crate::error::Error::TranslationOfFlip)
        );
        assert_eq!(project_to_1d(WeylNF::new(5, 0, false)), (5, false));
        assert_eq!(project_to_1d(WeylNF::generator(W0)), (0, true));
        assert_eq!(project_to_1d(WeylNF::new(0, 3, false)), (0, false));
        assert_eq!(
            translation_part(WeylNF::IDENTITY).unwrap(),
            (Gamma::ZERO, Gamma::ZERO)
        );
    }

    #[test]
    fn apartment_action_formulas() {
        use ApartmentLabel::*;
        // t-translation by one step: x_{i,n} -> x_{i,n+2}
        let shift_t = WeylNF::new(-1, 0, false);
        assert_eq!(
            act_on_apartment(shift_t, X { i: 3, n: 1 }),
            X { i: 3, n: 3 }
        );
        assert_eq!(act_on_apartment(shift_t, Y { n: 0 }), Y { n: 2 });
        // u-translation fixes the inner boundary
        let shift_u = WeylNF::new(0, -1, false);
        assert_eq!(act_on_apartment(shift_u, Y { n: 5 }), Y { n: 5 });
        assert_eq!(
            act_on_apartment(shift_u, X { i: 0, n: 0 }),
            X { i: 2, n: 0 }
        );
        // flip with fixed point (0,0)
        let w0 = WeylNF::generator(W0);
        assert_eq!(act_on_apartment(w0, Y { n: 2 }), Z { n: -2 });
        assert_eq!(act_on_apartment(w0, XZero), XInfty);
        assert_eq!(
            act_on_apartment(w0, X { i: 4, n: -1 }),
            X { i: -4, n: 1 }
        );
    }

    fn word_strategy() -> impl Strategy<Value = WeylWord> {
        proptest::collection::vec(
            prop_oneof![Just(W0), Just(W1), Just(W2)],
            0..24,
        )
    }

    fn label_strategy() -> impl Strategy<Value = ApartmentLabel> {
        prop_oneof![
            ((-6i64..7), (-6i64..7)).prop_map(|(i, n)| ApartmentLabel::X { i, n }),
            (-6i64..7).prop_map(|n| ApartmentLabel::Y { n }),
            (-6i64..7).prop_map(|n| ApartmentLabel::Z { n }),
            Just(ApartmentLabel::XZero),
            Just(ApartmentLabel::XInfty),
        ]
    }

    proptest! {
        #[test]
        fn reduce_is_homomorphism(a in word_strategy(), b in word_strategy()) {
            let mut ab = a.clone();
            ab.extend_from_slice(&b);
            prop_assert_eq!(reduce(&ab), nf_mul(reduce(&a), reduce(&b)));
        }

        #[test]
        fn relator_insertion_is_invisible(w in word_strategy(), at in 0usize..24) {
            let relators: [&[GenId]; 4] = [&[W0, W0], &[W1, W1], &[W2, W2], &[W0, W1, W2, W0, W1, W2]];
            for r in relators {
                let mut v = w.clone();
                let at = at.min(v.len());
                for (k, &g) in r.iter().enumerate() {
                    v.insert(at + k, g);
                }
                prop_assert_eq!(reduce(&v), reduce(&w));
            }
        }

        #[test]
        fn matrix_representation_is_faithful_mod_t(a in word_strategy(), b in word_strategy()) {
            let na = reduce(&a);
            let nb = reduce(&b);
            let prod = to_matrix(na, 3).mul(&to_matrix(nb, 3));
            prop_assert_eq!(nf_of_monomial_matrix(&prod).unwrap(), nf_mul(na, nb));
        }

        #[test]
        fn action_is_compatible_with_multiplication(a in word_strategy(), b in word_strategy(), l in label_strategy()) {
            let na = reduce(&a);
            let nb = reduce(&b);
            prop_assert_eq!(
                act_on_apartment(nf_mul(na, nb), l),
                act_on_apartment(na, act_on_apartment(nb, l))
            );
        }

        #[test]
        fn translations_commute_and_are_torsion_free(m in -20i64..21, n in -20i64..21, m2 in -20i64..21, n2 in -20i64..21) {
            let x = WeylNF::new(m, n, false);
            let y = WeylNF::new(m2, n2, false);
            prop_assert_eq!(nf_mul(x, y), nf_mul(y, x));
            // no torsion: squaring a nontrivial translation never gives e
            if !x.is_identity() {
                prop_assert!(!nf_mul(x, x).is_identity());
            }
            // conjugation by w0 inverts the translation subgroup
            let w0 = WeylNF::generator(crate::decomp::GenId::W0);
            prop_assert_eq!(nf_mul(nf_mul(w0, x), w0), nf_inv(x));
        }

        #[test]
        fn one_d_projection_commutes(w in word_strategy()) {
            // the diagram: W -> W_{K/K-bar} -> W_K agrees with W -> W_K
            let nf = reduce(&w);
            let (_, flip) = project_to_1d(nf);
            prop_assert_eq!(flip, project_to_wk(nf));
        }
    }
}
