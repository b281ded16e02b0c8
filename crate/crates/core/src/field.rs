//! Exact/truncated arithmetic in K = F_q((u))((t)).
//!
//! An element stores a finite set of known terms together with precision
//! caps: a global t-cap (levels at or above it are unknown) and, per stored
//! t-level, an optional u-cap (exponents at or above it on that level are
//! unknown). A level without a cap is exact: every coefficient not stored on
//! it is zero. An element with no caps at all is an exact Laurent polynomial.
//!
//! Every operation keeps the invariant that each stored term is certain:
//! recomputing with larger caps never changes a coefficient below the
//! smaller caps.

use crate::error::{Error, Result};
use crate::fp::Fp;
use crate::gamma::{Gamma, GammaExt};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;

/// Working precision for operations that must truncate (inversion, division).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precision {
    /// Number of t-levels kept above the valuation.
    pub t_window: i64,
    /// Number of u-steps kept above the valuation, per level.
    pub u_window: i64,
}

impl Default for Precision {
    fn default() -> Self {
        Precision {
            t_window: 32,
            u_window: 32,
        }
    }
}

impl Precision {
    pub fn new(t_window: i64, u_window: i64) -> Precision {
        Precision { t_window, u_window }
    }
}

/// The three valuation rings of the tower K = O_(0), O_K = O_(1), O' = O_(2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RingId {
    K,
    OK,
    OPrime,
}

/// A truncated two-variable Laurent series over F_q.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldElement {
    q: u32,
    /// (t_exp, u_exp) -> nonzero coefficient; BTreeMap order is the
    /// lexicographic order of the value group.
    terms: BTreeMap<(i64, i64), u32>,
    /// Levels at or above this are unknown. `None` means exact in t.
    t_cap: Option<i64>,
    /// level -> first unknown u-exponent on that level. Missing level: exact.
    u_caps: BTreeMap<i64, i64>,
}

impl FieldElement {
    pub fn zero(q: u32) -> FieldElement {
        FieldElement {
            q,
            terms: BTreeMap::new(),
            t_cap: None,
            u_caps: BTreeMap::new(),
        }
    }

    pub fn one(q: u32) -> FieldElement {
        Self::monomial(q, 0, 0, 1)
    }

    pub fn monomial(q: u32, t: i64, u: i64, coeff: i64) -> FieldElement {
        let fp = Fp::new(q).expect("valid prime");
        let c = fp.reduce(coeff);
        let mut terms = BTreeMap::new();
        if c != 0 {
            terms.insert((t, u), c);
        }
        FieldElement {
            q,
            terms,
            t_cap: None,
            u_caps: BTreeMap::new(),
        }
    }

    /// The stored terms alone, caps dropped: the canonical-data convention
    /// treats tails that agree below joint caps as equal, so differences of
    /// canonical data are exactly their known parts.
    pub fn known_part(&self) -> FieldElement {
        FieldElement {
            q: self.q,
            terms: self.terms.clone(),
            t_cap: None,
            u_caps: BTreeMap::new(),
        }
    }

    /// Drop only the caps lying below the first stored term, asserting that
    /// the leading term is the true leading term. This is the cap-honest
    /// form of the agreed-below-caps convention: differences of canonical
    /// data keep their precision bounds above the leading term.
    pub fn assume_leading(&self) -> FieldElement {
        let mut out = self.clone();
        if let Some((&first, _)) = self.terms.iter().next() {
            let lead = Gamma::new(first.0, first.1);
            out.u_caps.retain(|&l, &mut c| Gamma::new(l, c) >= lead);
        }
        out
    }

    /// Drop caps on negative t-levels for an element known a priori to lie
    /// in O_K (canonicalization factors are constructed integral); stored
    /// terms must already respect that.
    pub fn assume_in_ok(&self) -> FieldElement {
        debug_assert!(self.terms.keys().all(|&(t, _)| t >= 0));
        let mut out = self.clone();
        out.u_caps.retain(|&l, _| l >= 0);
        if let Some(tc) = out.t_cap {
            if tc <= 0 {
                out.t_cap = Some(0);
            }
        }
        out
    }

    /// An element with no known terms and the given precision caps.
    pub fn caps_only(q: u32, t_cap: Option<i64>, u_caps: &[(i64, i64)]) -> FieldElement {
        let mut x = FieldElement::zero(q);
        x.t_cap = t_cap;
        for &(l, c) in u_caps {
            x.u_caps.insert(l, c);
        }
        x.normalize();
        x
    }

    pub fn from_terms(q: u32, items: &[(i64, i64, i64)]) -> FieldElement {
        let mut x = Self::zero(q);
        let fp = x.fp();
        for &(t, u, c) in items {
            let cur = x.terms.get(&(t, u)).copied().unwrap_or(0);
            let nc = fp.add(cur, fp.reduce(c));
            if nc == 0 {
                x.terms.remove(&(t, u));
            } else {
                x.terms.insert((t, u), nc);
            }
        }
        x
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn fp(&self) -> Fp {
        Fp::new(self.q).expect("valid prime")
    }

    pub fn terms(&self) -> impl Iterator<Item = (Gamma, u32)> + '_ {
        self.terms.iter().map(|(&(t, u), &c)| (Gamma::new(t, u), c))
    }

    pub fn coeff(&self, t: i64, u: i64) -> u32 {
        self.terms.get(&(t, u)).copied().unwrap_or(0)
    }

    pub fn t_cap(&self) -> Option<i64> {
        self.t_cap
    }

    pub fn u_caps(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.u_caps.iter().map(|(&l, &c)| (l, c))
    }

    /// True when there are no precision caps: the element is an exact
    /// Laurent polynomial.
    pub fn is_exact(&self) -> bool {
        self.t_cap.is_none() && self.u_caps.is_empty()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.terms.is_empty() && self.is_exact()
    }

    /// No known terms (the element may still be nonzero above its caps).
    pub fn is_zero_below_caps(&self) -> bool {
        self.terms.is_empty()
    }

    fn assert_same_q(&self, other: &FieldElement) {
        assert_eq!(
            self.q, other.q,
            "mismatched base fields F_{} vs F_{}",
            self.q, other.q
        );
    }

    /// Restore invariants: drop zero coefficients, terms at or above caps,
    /// and caps on levels at or above the t-cap.
    fn normalize(&mut self) {
        if let Some(tc) = self.t_cap {
            self.terms.retain(|&(t, _), _| t < tc);
            self.u_caps.retain(|&l, _| l < tc);
        }
        let caps = self.u_caps.clone();
        self.terms
            .retain(|&(t, u), &mut c| c != 0 && caps.get(&t).is_none_or(|&cap| u < cap));
        self.terms.retain(|_, &mut c| c != 0);
    }

    /// Is the point (t, u) below all caps, i.e. is its coefficient certain?
    pub fn knows(&self, t: i64, u: i64) -> bool {
        if let Some(tc) = self.t_cap {
            if t >= tc {
                return false;
            }
        }
        match self.u_caps.get(&t) {
            Some(&cap) => u < cap,
            None => true,
        }
    }

    /// Minimal t-exponent mentioned by either a term or a cap corner.
    fn known_tmin(&self) -> Option<i64> {
        let t1 = self.terms.keys().map(|&(t, _)| t).min();
        let t2 = self.u_caps.keys().copied().min();
        match (t1, t2) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        }
    }

    /// The rank-2 valuation. `Infinity` for the exact zero; errors when the
    /// caps leave the minimum of the support uncertain.
    pub fn valuation(&self) -> Result<GammaExt> {
        match self.terms.keys().next() {
            Some(&(t0, u0)) => {
                // a capped level strictly below the first term could hide a
                // smaller term
                if self.u_caps.keys().any(|&l| l < t0) {
                    return Err(Error::InsufficientPrecision(
                        "capped level below the first stored term",
                    ));
                }
                Ok(GammaExt::Finite(Gamma::new(t0, u0)))
            }
            None => {
                if self.is_exact() {
                    Ok(GammaExt::Infinity)
                } else {
                    Err(Error::ZeroAtPrecision)
                }
            }
        }
    }

    /// The rank-1 valuation (minimal t-exponent of the support).
    pub fn t_valuation(&self) -> Result<Option<i64>> {
        match self.terms.keys().next() {
            Some(&(t0, _)) => {
                if self.u_caps.keys().any(|&l| l < t0) {
                    return Err(Error::InsufficientPrecision(
                        "capped level below the first stored term",
                    ));
                }
                Ok(Some(t0))
            }
            None => {
                if self.is_exact() {
                    Ok(None)
                } else {
                    Err(Error::ZeroAtPrecision)
                }
            }
        }
    }

    /// Ring membership per the valuation tower. Exact zero is in every ring.
    pub fn in_ring(&self, r: RingId) -> Result<bool> {
        if r == RingId::K {
            return Ok(true);
        }
        match self.valuation()? {
            GammaExt::Infinity => Ok(true),
            GammaExt::Finite(v) => Ok(match r {
                RingId::K => true,
                RingId::OK => v.t >= 0,
                RingId::OPrime => v.is_nonneg(),
            }),
        }
    }

    /// Ring membership decided at precision: a zero-below-caps element whose
    /// unknown regions all lie inside the ring counts as a member.
    pub fn in_ring_at_precision(&self, r: RingId) -> Result<bool> {
        match self.valuation() {
            Ok(GammaExt::Infinity) => Ok(true),
            Ok(GammaExt::Finite(v)) => Ok(match r {
                RingId::K => true,
                RingId::OK => v.t >= 0,
                RingId::OPrime => v.is_nonneg(),
            }),
            Err(_) => {
                // Unknown regions: per-level corners and the t-cap region.
                let corners_ok = match r {
                    RingId::K => true,
                    RingId::OK => {
                        self.u_caps.keys().all(|&l| l >= 0)
                            && self.t_cap.is_none_or(|tc| tc >= 0)
                    }
                    RingId::OPrime => {
                        self.u_caps
                            .iter()
                            .all(|(&l, &c)| Gamma::new(l, c) >= Gamma::ZERO)
                            && self.t_cap.is_none_or(|tc| tc >= 1)
                    }
                };
                let terms_ok = match r {
                    RingId::K => true,
                    RingId::OK => self.terms.keys().all(|&(t, _)| t >= 0),
                    RingId::OPrime => self
                        .terms
                        .keys()
                        .all(|&(t, u)| Gamma::new(t, u) >= Gamma::ZERO),
                };
                if corners_ok && terms_ok {
                    Ok(true)
                } else if !terms_ok {
                    Ok(false)
                } else {
                    Err(Error::InsufficientPrecision("ring membership undecidable"))
                }
            }
        }
    }

    pub fn neg(&self) -> FieldElement {
        let fp = self.fp();
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = fp.neg(*c);
        }
        out
    }

    pub fn add(&self, other: &FieldElement) -> FieldElement {
        self.assert_same_q(other);
        let fp = self.fp();
        let mut out = FieldElement::zero(self.q);
        // caps: pointwise minima
        out.t_cap = match (self.t_cap, other.t_cap) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        };
        for (&l, &c) in self.u_caps.iter().chain(other.u_caps.iter()) {
            out.u_caps
                .entry(l)
                .and_modify(|e| *e = (*e).min(c))
                .or_insert(c);
        }
        for (&k, &c) in self.terms.iter() {
            let cur = out.terms.get(&k).copied().unwrap_or(0);
            out.terms.insert(k, fp.add(cur, c));
        }
        for (&k, &c) in other.terms.iter() {
            let cur = out.terms.get(&k).copied().unwrap_or(0);
            out.terms.insert(k, fp.add(cur, c));
        }
        out.normalize();
        out
    }

    pub fn sub(&self, other: &FieldElement) -> FieldElement {
        self.add(&other.neg())
    }

    pub fn mul_scalar(&self, c: i64) -> FieldElement {
        let fp = self.fp();
        let c = fp.reduce(c);
        let mut out = self.clone();
        if c == 0 {
            // caps survive: the unknown tail times zero is still zero
            out.terms.clear();
            return out;
        }
        for v in out.terms.values_mut() {
            *v = fp.mul(*v, c);
        }
        out
    }

    /// Multiply by the monomial u^{g.u} t^{g.t} (shifts terms and caps).
    pub fn shift(&self, g: Gamma) -> FieldElement {
        let mut out = FieldElement::zero(self.q);
        out.t_cap = self.t_cap.map(|tc| tc + g.t);
        for (&l, &c) in self.u_caps.iter() {
            out.u_caps.insert(l + g.t, c + g.u);
        }
        for (&(t, u), &c) in self.terms.iter() {
            out.terms.insert((t + g.t, u + g.u), c);
        }
        out
    }

    pub fn mul(&self, other: &FieldElement) -> FieldElement {
        self.assert_same_q(other);
        let fp = self.fp();
        if self.is_exact_zero() || other.is_exact_zero() {
            return FieldElement::zero(self.q);
        }
        let mut out = FieldElement::zero(self.q);

        // t-cap: the unknown high-t region of one factor shifted by the
        // lowest t the other factor mentions.
        let cross_tcap = |a: &FieldElement, b: &FieldElement| -> Option<i64> {
            let tc = a.t_cap?;
            b.known_tmin().map(|m| tc + m)
        };
        let mut tcap_candidates: Vec<i64> = Vec::new();
        if let Some(c) = cross_tcap(self, other) {
            tcap_candidates.push(c);
        }
        if let Some(c) = cross_tcap(other, self) {
            tcap_candidates.push(c);
        }
        if let (Some(a), Some(b)) = (self.t_cap, other.t_cap) {
            tcap_candidates.push(a + b);
        }
        out.t_cap = tcap_candidates.into_iter().min();

        // level caps: unknown corner of one factor shifted by every term and
        // every corner of the other.
        let push_cap = |caps: &mut BTreeMap<i64, i64>, l: i64, c: i64| {
            caps.entry(l).and_modify(|e| *e = (*e).min(c)).or_insert(c);
        };
        for (&cl, &cc) in self.u_caps.iter() {
            for (&(t, u), _) in other.terms.iter() {
                push_cap(&mut out.u_caps, cl + t, cc + u);
            }
            for (&cl2, &cc2) in other.u_caps.iter() {
                push_cap(&mut out.u_caps, cl + cl2, cc + cc2);
            }
        }
        for (&cl, &cc) in other.u_caps.iter() {
            for (&(t, u), _) in self.terms.iter() {
                push_cap(&mut out.u_caps, cl + t, cc + u);
            }
        }

        // term convolution
        for (&(t1, u1), &c1) in self.terms.iter() {
            for (&(t2, u2), &c2) in other.terms.iter() {
                let k = (t1 + t2, u1 + u2);
                let cur = out.terms.get(&k).copied().unwrap_or(0);
                let nc = fp.add(cur, fp.mul(c1, c2));
                if nc == 0 {
                    out.terms.remove(&k);
                } else {
                    out.terms.insert(k, nc);
                }
            }
        }
        out.normalize();
        out
    }

    /// x = t^{v.t} u^{v.u} * unit with the unit a 1-unit times a scalar.
    pub fn unit_decompose(&self) -> Result<(Gamma, FieldElement)> {
        match self.valuation()? {
            GammaExt::Infinity => Err(Error::ZeroAtPrecision),
            GammaExt::Finite(v) => {
                let unit = self.shift(-v);
                Ok((v, unit))
            }
        }
    }

    /// Multiplicative inverse at the requested working precision.
    pub fn invert(&self, prec: Precision) -> Result<FieldElement> {
        let (v, w) = self.unit_decompose()?;
        let fp = self.fp();
        let c0 = w.coeff(0, 0);
        debug_assert_ne!(c0, 0);
        let c0inv = fp.inv(c0);

        // exact monomial: exact inverse
        if w.is_exact() && w.terms.len() == 1 {
            return Ok(FieldElement::monomial(self.q, -v.t, -v.u, c0inv as i64));
        }

        // z = w / c0 - 1 has positive valuation
        let z = {
            let mut z = w.mul_scalar(c0inv as i64);
            let cur = z.terms.get(&(0, 0)).copied().unwrap_or(0);
            if cur == 1 {
                z.terms.remove(&(0, 0));
            } else {
                z.terms.insert((0, 0), fp.sub(cur, 1));
            }
            z
        };

        // caps of the inverse in "unit space" (valuation 0): an element
        // supported on one t-level (terms and caps alike) inverts within
        // that level
        let single_level = {
            let lvl = self.terms.keys().next().unwrap().0;
            self.t_cap.is_none()
                && self.terms.keys().all(|&(t, _)| t == lvl)
                && self.u_caps.keys().all(|&l| l == lvl)
        };
        let mut target = FieldElement::zero(self.q);
        if single_level {
            target.t_cap = None;
            target.u_caps.insert(0, prec.u_window);
        } else {
            target.t_cap = Some(prec.t_window);
            for l in 0..prec.t_window {
                target.u_caps.insert(l, prec.u_window);
            }
        }
        // precision forced by the input's own caps: the error term is
        // x^{-2} * tail, which in unit space (before the final shift by -v)
        // sits at the input cap corners shifted by -v
        if !self.is_exact() {
            let shifted = FieldElement {
                q: self.q,
                terms: BTreeMap::new(),
                t_cap: self.t_cap,
                u_caps: self.u_caps.clone(),
            }
            .shift(-v);
            target.t_cap = match (target.t_cap, shifted.t_cap.map(|c| c - -0)) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, None) => a,
                (None, b) => b,
            };
            for (l, c) in shifted.u_caps.iter() {
                target
                    .u_caps
                    .entry(*l)
                    .and_modify(|e| *e = (*e).min(*c))
                    .or_insert(*c);
            }
        }

        // Geometric series sum_k (-z)^k. A power is dropped only when no
        // later product of it with z-terms can re-enter the visible window:
        // terms that climb the t-level may dip in u, so clipping uses a
        // funnel that widens below the t-cap by the largest per-factor
        // u-drop of z.
        let t_top: i64 = match target.t_cap {
            Some(tc) => tc,
            None => 1, // single-level inversion stays on level 0
        };
        let u_top: i64 = target.u_caps.values().copied().max().unwrap_or(0);
        // a u-drop of b needs a t-climb of a, so the reachable window below
        // the t-cap widens by at most the per-level slope
        let slope: i64 = z
            .terms
            .keys()
            .filter(|&&(t, _)| t >= 1)
            .map(|&(t, u)| ((-u).max(0) + t - 1) / t)
            .max()
            .unwrap_or(0);
        let funnel = |level: i64| -> Option<i64> {
            if level >= t_top {
                None
            } else {
                Some(u_top + (t_top - 1 - level).max(0) * slope)
            }
        };
        let clip = |x: &FieldElement| -> FieldElement {
            let mut out = x.clone();
            out.terms
                .retain(|&(t, u), _| funnel(t).is_some_and(|f| u < f));
            out
        };
        let neg_z = z.neg();
        let mut sum = FieldElement::one(self.q);
        let mut pow = clip(&neg_z);
        let mut guard = 0usize;
        while !pow.terms.is_empty() {
            sum = sum.add(&pow);
            pow = clip(&pow.mul(&neg_z));
            guard += 1;
            if guard > 100_000 {
                return Err(Error::InsufficientPrecision("inversion did not converge"));
            }
        }

        // w^{-1} = c0^{-1} * sum, then shift back by -v and impose caps
        let mut inv = sum.mul_scalar(c0inv as i64);
        inv.t_cap = match (inv.t_cap, target.t_cap) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, None) => a,
            (None, b) => b,
        };
        for (&l, &c) in target.u_caps.iter() {
            inv.u_caps
                .entry(l)
                .and_modify(|e| *e = (*e).min(c))
                .or_insert(c);
        }
        inv.normalize();
        Ok(inv.shift(-v))
    }

    pub fn div(&self, other: &FieldElement, prec: Precision) -> Result<FieldElement> {
        Ok(self.mul(&other.invert(prec)?))
    }

    /// The reduction O_K -> K-bar: the t-level-0 slice.
    pub fn reduce_first_residue(&self) -> Result<FieldElement> {
        if self.terms.keys().any(|&(t, _)| t < 0) {
            return Err(Error::NotInRing);
        }
        if self.u_caps.keys().any(|&l| l < 0) {
            return Err(Error::InsufficientPrecision(
                "membership in O_K uncertain below level 0",
            ));
        }
        let mut out = FieldElement::zero(self.q);
        if let Some(tc) = self.t_cap {
            if tc <= 0 {
                return Err(Error::InsufficientPrecision("level 0 unknown"));
            }
        }
        for (&(t, u), &c) in self.terms.iter() {
            if t == 0 {
                out.terms.insert((0, u), c);
            }
        }
        if let Some(&cap) = self.u_caps.get(&0) {
            out.u_caps.insert(0, cap);
        }
        out.normalize();
        Ok(out)
    }

    /// The reduction O' -> k: the coefficient at (0,0).
    pub fn reduce_last_residue(&self) -> Result<u32> {
        if !self.in_ring_at_precision(RingId::OPrime)? {
            return Err(Error::NotInRing);
        }
        if !self.knows(0, 0) {
            return Err(Error::ZeroAtPrecision);
        }
        Ok(self.coeff(0, 0))
    }

    /// Terms agree below the pointwise minimum of both cap sets.
    pub fn eq_below_caps(&self, other: &FieldElement) -> bool {
        if self.q != other.q {
            return false;
        }
        let agree = |a: &FieldElement, b: &FieldElement| -> bool {
            a.terms.iter().all(|(&(t, u), &c)| {
                if a.knows(t, u) && b.knows(t, u) {
                    b.coeff(t, u) == c
                } else {
                    true
                }
            })
        };
        agree(self, other) && agree(other, self)
    }

    pub fn is_one_below_caps(&self) -> bool {
        self.eq_below_caps(&FieldElement::one(self.q))
    }

    /// The canonical representative of this element modulo the principal
    /// ideal generated by u^{d.u} t^{d.t}: drop every term at or above `d`.
    /// Errors when an unknown region dips below `d` (the representative
    /// would depend on unknown coefficients). The result is exact.
    pub fn reduce_mod_monomial(&self, d: Gamma) -> Result<FieldElement> {
        if let Some(tc) = self.t_cap {
            if tc <= d.t {
                return Err(Error::InsufficientPrecision("reduction below t-cap"));
            }
        }
        for (&l, &c) in self.u_caps.iter() {
            if Gamma::new(l, c) < d {
                return Err(Error::InsufficientPrecision("reduction below u-cap"));
            }
        }
        let mut out = FieldElement::zero(self.q);
        for (&(t, u), &c) in self.terms.iter() {
            if Gamma::new(t, u) < d {
                out.terms.insert((t, u), c);
            }
        }
        Ok(out)
    }

    /// Canonical representative modulo the principal ideal at `d`, keeping
    /// precision caps that fall inside the kept region: coset data below a
    /// lex cut genuinely contains whole u-lines of lower t-levels, so the
    /// representative may be a capped series. Comparisons go below joint
    /// caps.
    pub fn reduce_mod_monomial_capped(&self, d: Gamma) -> FieldElement {
        let mut out = FieldElement::zero(self.q);
        for (&(t, u), &c) in self.terms.iter() {
            if Gamma::new(t, u) < d {
                out.terms.insert((t, u), c);
            }
        }
        for (&l, &c) in self.u_caps.iter() {
            if l < d.t || (l == d.t && c < d.u) {
                out.u_caps.insert(l, c);
            }
        }
        out.t_cap = match self.t_cap {
            Some(tc) if tc <= d.t => Some(tc),
            _ => None,
        };
        out.normalize();
        out
    }

    /// Canonical representative modulo t^n O_K: keep levels strictly below n.
    /// Kept levels may still carry u-caps; levels at or above n must not be
    /// consulted, so only the t-cap is checked.
    pub fn reduce_mod_t_pow(&self, n: i64) -> Result<FieldElement> {
        if let Some(tc) = self.t_cap {
            if tc < n {
                return Err(Error::InsufficientPrecision("reduction below t-cap"));
            }
        }
        let mut out = FieldElement::zero(self.q);
        for (&(t, u), &c) in self.terms.iter() {
            if t < n {
                out.terms.insert((t, u), c);
            }
        }
        for (&l, &c) in self.u_caps.iter() {
            if l < n {
                out.u_caps.insert(l, c);
            }
        }
        out.normalize();
        Ok(out)
    }

    /// Restrict the element to the caps of `other` (pointwise minimum).
    pub fn meet_caps(&self, other: &FieldElement) -> FieldElement {
        let mut out = self.clone();
        out.t_cap = match (self.t_cap, other.t_cap) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        };
        for (&l, &c) in other.u_caps.iter() {
            out.u_caps
                .entry(l)
                .and_modify(|e| *e = (*e).min(c))
                .or_insert(c);
        }
        out.normalize();
        out
    }

    /// Require the element to be exact, returning it unchanged.
    pub fn expect_exact(&self) -> Result<FieldElement> {
        if self.is_exact() {
            Ok(self.clone())
        } else {
            Err(Error::InsufficientPrecision("exact element required"))
        }
    }

    /// Exact quotient of Laurent polynomials: `Some(q)` with `self = q * d`
    /// when the division terminates in the polynomial ring, `None` when an
    /// operand is capped or the quotient is an infinite series.
    pub fn exact_div_poly(&self, d: &FieldElement) -> Option<FieldElement> {
        self.exact_div_poly_impl(d, 256, 8 * (self.term_count() + d.term_count()) + 64)
    }

    /// Exact quotient with generous limits, for divisions that are known to
    /// terminate (fraction-free elimination steps).
    pub fn exact_div_poly_generous(&self, d: &FieldElement) -> Option<FieldElement> {
        self.exact_div_poly_impl(d, 100_000, usize::MAX / 2)
    }

    fn term_count(&self) -> usize {
        self.terms.len()
    }

    fn exact_div_poly_impl(
        &self,
        d: &FieldElement,
        max_steps: usize,
        size_limit: usize,
    ) -> Option<FieldElement> {
        if !self.is_exact() || !d.is_exact() || d.is_exact_zero() {
            return None;
        }
        let fp = self.fp();
        let (&(dt, du), &dc) = d.terms.iter().next().unwrap();
        let dc_inv = fp.inv(dc);
        let mut rem = self.clone();
        let mut quo = FieldElement::zero(self.q);
        let mut steps = 0usize;
        while let Some((&(rt, ru), &rc)) = rem.terms.iter().next() {
            steps += 1;
            // infinite-series quotients blow the remainder up; bail out
            // and let the caller fall back to capped division
            if steps > max_steps || rem.terms.len() > size_limit {
                return None;
            }
            let qt = rt - dt;
            let qu = ru - du;
            let qc = fp.mul(rc, dc_inv);
            quo.terms.insert((qt, qu), qc);
            let m = FieldElement::monomial(self.q, qt, qu, qc as i64);
            rem = rem.sub(&m.mul(d));
        }
        Some(quo)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        for (&(t, u), &c) in self.terms.iter() {
            let mut factors: Vec<String> = Vec::new();
            if c != 1 || (t == 0 && u == 0) {
                factors.push(format!("{c}"));
            }
            if t == 1 {
                factors.push("t".to_string());
            } else if t != 0 {
                factors.push(format!("t^{t}"));
            }
            if u == 1 {
                factors.push("u".to_string());
            } else if u != 0 {
                factors.push(format!("u^{u}"));
            }
            parts.push(factors.join("*"));
        }
        for (&l, &c) in self.u_caps.iter() {
            let ucap = if c == 1 {
                "O(u)".to_string()
            } else {
                format!("O(u^{c})")
            };
            if l == 0 {
                parts.push(ucap);
            } else if l == 1 {
                parts.push(format!("{ucap}*t"));
            } else {
                parts.push(format!("{ucap}*t^{l}"));
            }
        }
        if let Some(tc) = self.t_cap {
            parts.push(if tc == 1 {
                "O(t)".to_string()
            } else {
                format!("O(t^{tc})")
            });
        }
        if parts.is_empty() {
            parts.push("0".to_string());
        }
        write!(f, "{}", parts.join("+"))
    }
}

// --- serde: the wire format {"q":..,"terms":[{"t","u","c"}],"t_cap":..,"u_caps":[[l,c]..]} ---

#[derive(Serialize, Deserialize)]
struct TermRepr {
    t: i64,
    u: i64,
    c: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CapRepr {
    Exact(String),
    At(i64),
}

#[derive(Serialize, Deserialize)]
struct ElementRepr {
    q: u32,
    terms: Vec<TermRepr>,
    t_cap: CapRepr,
    u_caps: Vec<(i64, CapRepr)>,
}

impl Serialize for FieldElement {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = ElementRepr {
            q: self.q,
            terms: self
                .terms
                .iter()
                .map(|(&(t, u), &c)| TermRepr { t, u, c })
                .collect(),
            t_cap: match self.t_cap {
                Some(tc) => CapRepr::At(tc),
                None => CapRepr::Exact("exact".to_string()),
            },
            u_caps: self
                .u_caps
                .iter()
                .map(|(&l, &c)| (l, CapRepr::At(c)))
                .collect(),
        };
        repr.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FieldElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = ElementRepr::deserialize(d)?;
        Fp::new(repr.q).map_err(|e| D::Error::custom(e.to_string()))?;
        let mut x = FieldElement::zero(repr.q);
        let fp = x.fp();
        for t in repr.terms {
            if t.c % repr.q == 0 {
                continue;
            }
            x.terms.insert((t.t, t.u), fp.reduce(t.c as i64));
        }
        x.t_cap = match repr.t_cap {
            CapRepr::At(v) => Some(v),
            CapRepr::Exact(s) if s == "exact" => None,
            CapRepr::Exact(s) => {
                return Err(D::Error::custom(format!("bad t_cap marker {s:?}")))
            }
        };
        for (l, c) in repr.u_caps {
            match c {
                CapRepr::At(v) => {
                    x.u_caps.insert(l, v);
                }
                CapRepr::Exact(s) if s == "exact" => {}
                CapRepr::Exact(s) => {
                    return Err(D::Error::custom(format!("bad u_cap marker {s:?}")))
                }
            }
        }
        x.normalize();
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fe(items: &[(i64, i64, i64)]) -> FieldElement {
        FieldElement::from_terms(3, items)
    }

    #[test]
    fn add_cancels_exactly() {
        let t = FieldElement::monomial(3, 1, 0, 1);
        let neg_t = FieldElement::monomial(3, 1, 0, -1);
        assert!(t.add(&neg_t).is_exact_zero());
    }

    #[test]
    fn add_mod_3() {
        // (1+u) + u = 1 + 2u over F_3
        let a = fe(&[(0, 0, 1), (0, 1, 1)]);
        let b = fe(&[(0, 1, 1)]);
        let s = a.add(&b);
        assert_eq!(s, fe(&[(0, 0, 1), (0, 1, 2)]));
    }

    #[test]
    fn add_respects_caps() {
        // (x with t_cap 2) + t^3 has t_cap 2 and no t^3 term
        let mut x = fe(&[(0, 0, 1)]);
        x.t_cap = Some(2);
        let t3 = fe(&[(3, 0, 1)]);
        let s = x.add(&t3);
        assert_eq!(s.t_cap(), Some(2));
        assert_eq!(s.coeff(3, 0), 0);
        assert!(!s.knows(3, 0));
    }

    #[test]
    fn mul_basics() {
        let t = FieldElement::monomial(3, 1, 0, 1);
        let u = FieldElement::monomial(3, 0, 1, 1);
        let p = t.mul(&u);
        assert_eq!(p, fe(&[(1, 1, 1)]));

        // (1+u)^2 = 1 + u^2 over F_2
        let a = FieldElement::from_terms(2, &[(0, 0, 1), (0, 1, 1)]);
        let sq = a.mul(&a);
        assert_eq!(sq, FieldElement::from_terms(2, &[(0, 0, 1), (0, 2, 1)]));
    }

    #[test]
    fn mul_shifts_caps() {
        // (1 + O(t^2)) * t^3 = t^3 + O(t^5)
        let mut x = fe(&[(0, 0, 1)]);
        x.t_cap = Some(2);
        let t3 = fe(&[(3, 0, 1)]);
        let p = x.mul(&t3);
        assert_eq!(p.coeff(3, 0), 1);
        assert_eq!(p.t_cap(), Some(5));
    }

    #[test]
    fn valuation_cases() {
        // u^-3 t^2 + t^5 has valuation (2,-3)
        let x = fe(&[(2, -3, 1), (5, 0, 1)]);
        assert_eq!(x.valuation().unwrap(), GammaExt::Finite(Gamma::new(2, -3)));
        assert_eq!(fe(&[]).valuation().unwrap(), GammaExt::Infinity);
        let mut z = fe(&[]);
        z.t_cap = Some(4);
        assert_eq!(z.valuation(), Err(Error::ZeroAtPrecision));
    }

    #[test]
    fn ring_membership() {
        let uinv = fe(&[(0, -1, 1)]);
        assert!(uinv.in_ring(RingId::OK).unwrap());
        assert!(!uinv.in_ring(RingId::OPrime).unwrap());
        // t*u^-5 is in O' by lexicographic dominance
        let x = fe(&[(1, -5, 1)]);
        assert!(x.in_ring(RingId::OPrime).unwrap());
        let y = fe(&[(0, 0, 1), (0, 1, 1)]);
        assert!(y.in_ring(RingId::OPrime).unwrap());
    }

    #[test]
    fn first_residue() {
        // u^-1 + t  ->  u^-1
        let x = fe(&[(0, -1, 1), (1, 0, 1)]);
        assert_eq!(x.reduce_first_residue().unwrap(), fe(&[(0, -1, 1)]));
        let t3 = fe(&[(3, 0, 1)]);
        assert!(t3.reduce_first_residue().unwrap().is_exact_zero());
        let bad = fe(&[(-1, -1, 1)]);
        assert_eq!(bad.reduce_first_residue(), Err(Error::NotInRing));
    }

    #[test]
    fn last_residue() {
        let x = FieldElement::from_terms(5, &[(0, 0, 2), (0, 1, 1), (1, 0, 1)]);
        assert_eq!(x.reduce_last_residue().unwrap(), 2);
        let u = FieldElement::monomial(5, 0, 1, 1);
        assert_eq!(u.reduce_last_residue().unwrap(), 0);
        // u^-1 t lies in O' with valuation (1,-1); residue 0
        let x = FieldElement::from_terms(5, &[(1, -1, 1)]);
        assert_eq!(x.reduce_last_residue().unwrap(), 0);
    }

    #[test]
    fn unit_decomposition() {
        // u^2 t^-1 (1+t) = t^-1 u^2 * (1 + t)
        let x = fe(&[(-1, 2, 1), (0, 2, 1)]);
        let (v, unit) = x.unit_decompose().unwrap();
        assert_eq!(v, Gamma::new(-1, 2));
        assert_eq!(unit, fe(&[(0, 0, 1), (1, 0, 1)]));
        assert_ne!(unit.reduce_last_residue().unwrap(), 0);

        let one = FieldElement::one(3);
        let (v, u) = one.unit_decompose().unwrap();
        assert_eq!(v, Gamma::ZERO);
        assert!(u.is_one_below_caps());

        let two_u = fe(&[(0, 1, 2)]);
        let (v, unit) = two_u.unit_decompose().unwrap();
        assert_eq!(v, Gamma::new(0, 1));
        assert_eq!(unit, fe(&[(0, 0, 2)]));
    }

    #[test]
    fn invert_geometric_series() {
        // over F_2, (1+u)^-1 with u window 4 = 1 + u + u^2 + u^3 + O(u^4)
        let x = FieldElement::from_terms(2, &[(0, 0, 1), (0, 1, 1)]);
        let y = x.invert(Precision::new(4, 4)).unwrap();
        assert_eq!(format!("{y}"), "1+u+u^2+u^3+O(u^4)");
        assert!(x.mul(&y).is_one_below_caps());
    }

    #[test]
    fn invert_monomial_exact() {
        let t = fe(&[(1, 0, 1)]);
        let y = t.invert(Precision::default()).unwrap();
        assert_eq!(y, fe(&[(-1, 0, 1)]));
        assert!(y.is_exact());
    }

    #[test]
    fn invert_mixed_levels() {
        // over F_3, (u(1+t))^-1 with t window 3 = u^-1 (1 + 2t + t^2) + O(t^3)u^-1
        let x = fe(&[(0, 1, 1), (1, 1, 1)]);
        let y = x.invert(Precision::new(3, 8)).unwrap();
        assert_eq!(y.coeff(0, -1), 1);
        assert_eq!(y.coeff(1, -1), 2);
        assert_eq!(y.coeff(2, -1), 1);
        assert_eq!(y.t_cap(), Some(3));
        assert!(x.mul(&y).is_one_below_caps());
    }

    #[test]
    fn display_exact_products() {
        let x = FieldElement::from_terms(2, &[(1, 0, 1), (1, 2, 1)]);
        assert_eq!(format!("{x}"), "t+t*u^2");
    }

    #[test]
    fn json_roundtrip() {
        let mut x = fe(&[(2, -3, 1), (5, 0, 2)]);
        x.t_cap = Some(7);
        x.u_caps.insert(2, 9);
        let s = serde_json::to_string(&x).unwrap();
        let y: FieldElement = serde_json::from_str(&s).unwrap();
        assert_eq!(x, y);
    }

    fn element_strategy() -> impl Strategy<Value = FieldElement> {
        proptest::collection::vec(((-4i64..5), (-4i64..5), (0i64..3)), 0..6)
            .prop_map(|items| FieldElement::from_terms(3, &items))
    }

    proptest! {
        #[test]
        fn valuation_is_multiplicative(a in element_strategy(), b in element_strategy()) {
            let va = a.valuation().unwrap();
            let vb = b.valuation().unwrap();
            let vab = a.mul(&b).valuation().unwrap();
            prop_assert_eq!(vab, va + vb);
        }

        #[test]
        fn valuation_of_sum_bounded(a in element_strategy(), b in element_strategy()) {
            let va = a.valuation().unwrap();
            let vb = b.valuation().unwrap();
            let vs = a.add(&b).valuation().unwrap();
            prop_assert!(vs >= va.min(vb));
        }

        #[test]
        fn divisibility_matches_valuation_order(a in element_strategy(), b in element_strategy()) {
            // Eq-(1) check: nu'(a) >= nu'(b) iff a/b lies in O'.
            prop_assume!(!a.is_exact_zero() && !b.is_exact_zero());
            let va = a.valuation().unwrap();
            let vb = b.valuation().unwrap();
            let q = a.div(&b, Precision::new(8, 8)).unwrap();
            prop_assert_eq!(va >= vb, q.in_ring_at_precision(RingId::OPrime).unwrap());
        }

        #[test]
        fn inverse_multiplies_to_one(a in element_strategy()) {
            prop_assume!(!a.is_exact_zero());
            let inv = a.invert(Precision::new(6, 6)).unwrap();
            prop_assert!(a.mul(&inv).is_one_below_caps());
        }

        #[test]
        fn unit_part_has_nonzero_residue(a in element_strategy()) {
            prop_assume!(!a.is_exact_zero());
            let (_, unit) = a.unit_decompose().unwrap();
            prop_assert!(unit.reduce_last_residue().unwrap() != 0);
        }

        #[test]
        fn larger_caps_refine(a in element_strategy(), b in element_strategy()) {
            // computing at lower precision must agree below the lower caps
            prop_assume!(!b.is_exact_zero());
            let lo = a.div(&b, Precision::new(3, 3)).unwrap();
            let hi = a.div(&b, Precision::new(9, 9)).unwrap();
            prop_assert!(lo.eq_below_caps(&hi));
        }
    }
}
