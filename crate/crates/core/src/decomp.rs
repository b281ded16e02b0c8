//! Subgroups of SL(n, K) and the Bruhat, Cartan and Iwasawa decompositions.
//!
//! All three decompositions run by valuation-pivoted elementary
//! transformations. The Bruhat elimination may only use transvections that
//! stay in the Iwahori subgroup B (entries above the diagonal in O', below
//! in the maximal ideal m of O'), which forces the pivot rule: a global
//! minimum of nu' over the remaining submatrix, preferring the largest row
//! and then the smallest column among ties. Cartan and Iwasawa are free to
//! use any O'-transvections and signed swaps.

use crate::error::{Error, Result};
use crate::field::{FieldElement, Precision};
use crate::gamma::{Gamma, GammaExt};
use crate::matrix::MatrixK;
use serde::{Deserialize, Serialize};

/// The subgroups of section-2 displays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubgroupId {
    /// Iwahori: diagonal and above in O', strictly below in m, det 1.
    B,
    /// Monomial matrices of determinant 1.
    N,
    /// Diagonal with unit (valuation-zero) entries, det 1.
    T,
    /// Entries in O', determinant a unit of O' (invertible over O').
    P,
    /// Diagonal exact monomials with coefficient 1.
    A,
    /// A with lexicographically non-increasing diagonal valuations.
    APlus,
    /// Upper unitriangular.
    U,
    /// Entries in O', determinant exactly 1.
    SLOPrime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecompositionKind {
    Bruhat,
    Cartan,
    Iwasawa,
}

/// A factored matrix: g = left * middle * right.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Decomposition {
    pub kind: DecompositionKind,
    pub left: MatrixK,
    pub middle: MatrixK,
    pub right: MatrixK,
}

impl Decomposition {
    /// Multiply the factors back and compare with `g` below the caps.
    pub fn verify(&self, g: &MatrixK) -> bool {
        self.left.mul(&self.middle).mul(&self.right).eq_below_caps(g)
    }
}

/// Valuation of one entry: `None` for an exact zero.
fn entry_val(g: &MatrixK, i: usize, j: usize) -> Result<Option<Gamma>> {
    let e = g.at(i, j);
    if e.is_exact_zero() {
        return Ok(None);
    }
    if e.is_zero_below_caps() {
        // nothing visible: treated as zero at this precision
        return Ok(None);
    }
    match e.valuation()? {
        GammaExt::Infinity => Ok(None),
        GammaExt::Finite(v) => Ok(Some(v)),
    }
}

/// Membership in O' decided at precision.
fn in_oprime(e: &FieldElement) -> bool {
    e.in_ring_at_precision(crate::field::RingId::OPrime)
        .unwrap_or(false)
}

/// Membership in the maximal ideal m of O' (valuation strictly positive).
fn in_m(e: &FieldElement) -> bool {
    if e.is_zero_below_caps() {
        return e
            .u_caps()
            .all(|(l, c)| Gamma::new(l, c) >= Gamma::new(0, 1))
            && e.t_cap().is_none_or(|tc| tc >= 1);
    }
    match e.valuation() {
        Ok(GammaExt::Finite(v)) => v >= Gamma::new(0, 1),
        Ok(GammaExt::Infinity) => true,
        Err(_) => false,
    }
}

fn is_unit_oprime(e: &FieldElement) -> bool {
    matches!(e.valuation(), Ok(GammaExt::Finite(v)) if v == Gamma::ZERO)
}

fn is_exact_monic_monomial(e: &FieldElement) -> bool {
    if !e.is_exact() {
        return false;
    }
    let mut it = e.terms();
    matches!((it.next(), it.next()), (Some((_, 1)), None))
}

/// Subgroup membership by entrywise ideal pattern.
pub fn membership(g: &MatrixK, s: SubgroupId) -> Result<bool> {
    let n = g.n();
    let zero_at = |i: usize, j: usize| g.at(i, j).is_zero_below_caps();
    match s {
        SubgroupId::B => {
            for i in 0..n {
                for j in 0..n {
                    let e = g.at(i, j);
                    let ok = if i > j { in_m(e) } else { in_oprime(e) };
                    if !ok {
                        return Ok(false);
                    }
                }
            }
            Ok(g.det_is_one())
        }
        SubgroupId::N => {
            for i in 0..n {
                let row_nonzero = (0..n).filter(|&j| !zero_at(i, j)).count();
                let col_nonzero = (0..n).filter(|&j| !zero_at(j, i)).count();
                if row_nonzero != 1 || col_nonzero != 1 {
                    return Ok(false);
                }
            }
            Ok(g.det_is_one())
        }
        SubgroupId::T => {
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        if !is_unit_oprime(g.at(i, j)) {
                            return Ok(false);
                        }
                    } else if !zero_at(i, j) {
                        return Ok(false);
                    }
                }
            }
            Ok(g.det_is_one())
        }
        SubgroupId::P | SubgroupId::SLOPrime => {
            for i in 0..n {
                for j in 0..n {
                    if !in_oprime(g.at(i, j)) {
                        return Ok(false);
                    }
                }
            }
            if s == SubgroupId::SLOPrime {
                Ok(g.det_is_one())
            } else {
                Ok(is_unit_oprime(&g.det()))
            }
        }
        SubgroupId::A | SubgroupId::APlus => {
            let mut vals = Vec::with_capacity(n);
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        if !is_exact_monic_monomial(g.at(i, j)) {
                            return Ok(false);
                        }
                        vals.push(g.at(i, i).valuation()?.finite().unwrap());
                    } else if !zero_at(i, j) {
                        return Ok(false);
                    }
                }
            }
            if s == SubgroupId::APlus {
                Ok(vals.windows(2).all(|w| w[0] >= w[1]))
            } else {
                Ok(true)
            }
        }
        SubgroupId::U => {
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        if !g.at(i, j).is_one_below_caps() {
                            return Ok(false);
                        }
                    } else if i > j && !zero_at(i, j) {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
    }
}

/// Which side a transvection multiplies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// A recorded elementary transformation e_{i,j}(lambda).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transvection {
    pub side: Side,
    pub i: usize,
    pub j: usize,
    pub lambda: FieldElement,
}

impl Transvection {
    pub fn matrix(&self, n: usize, q: u32) -> MatrixK {
        MatrixK::transvection(n, q, self.i, self.j, &self.lambda)
    }

    pub fn inverse_matrix(&self, n: usize, q: u32) -> MatrixK {
        MatrixK::transvection(n, q, self.i, self.j, &self.lambda.neg())
    }
}

/// One elementary reduction: use the pivot entry to create an exact zero at
/// the target place. For `Side::Right` the pivot and target share a row and
/// the result is g * e_{pc,tc}(lambda); for `Side::Left` they share a
/// column and the result is e_{tr,pr}(lambda) * g. The computed lambda is
/// -pivot^{-1} * target.
pub fn elementary_reduce_step(
    g: &MatrixK,
    side: Side,
    pivot: (usize, usize),
    target: (usize, usize),
    prec: Precision,
) -> Result<(MatrixK, Transvection)> {
    let (pr, pc) = pivot;
    let (tr, tc) = target;
    entry_val(g, pr, pc)?.ok_or(Error::InsufficientPrecision("pivot is zero"))?;
    let lambda = g.at(tr, tc).div(g.at(pr, pc), prec)?.neg();
    let tv = Transvection {
        side,
        i: if side == Side::Right { pc } else { tr },
        j: if side == Side::Right { tc } else { pr },
        lambda,
    };
    let e = tv.matrix(g.n(), g.q());
    let mut out = match side {
        Side::Right => {
            assert_eq!(pr, tr, "right reduction works along a row");
            g.mul(&e)
        }
        Side::Left => {
            assert_eq!(pc, tc, "left reduction works along a column");
            e.mul(g)
        }
    };
    // the new entry vanishes identically; record it as an exact zero
    *out.at_mut(tr, tc) = FieldElement::zero(g.q());
    Ok((out, tv))
}

/// Internal elimination state carrying the accumulated outer factors.
/// Elimination state. For exact input matrices the entries are carried
/// fraction-free: `nums` holds exact minor numerators over the common
/// denominator `den` (the previous pivot numerator), so every remaining
/// entry's valuation is exactly visible at any size - leading-term
/// cancellations happen inside exact polynomial algebra. Capped inputs fall
/// back to value arithmetic in Schur-quotient form.
struct Elim {
    prec: Precision,
    exact: bool,
    /// exact numerators (authoritative while `exact`)
    nums: MatrixK,
    /// exact common denominator (authoritative while `exact`)
    den: FieldElement,
    /// frozen and cleared entry values; fully authoritative when not exact
    vals: MatrixK,
    /// exact numerator snapshots of frozen rows (triangular use)
    frozen_nums: MatrixK,
    /// denominator snapshot per frozen row
    row_dens: Vec<FieldElement>,
    left: MatrixK,
    right: MatrixK,
}

impl Elim {
    fn new(g: &MatrixK, prec: Precision) -> Elim {
        let exact = g.entries().all(|e| e.is_exact());
        Elim {
            prec,
            exact,
            nums: g.clone(),
            den: FieldElement::one(g.q()),
            vals: g.clone(),
            frozen_nums: g.clone(),
            row_dens: vec![FieldElement::one(g.q()); g.n()],
            left: MatrixK::identity(g.n(), g.q()),
            right: MatrixK::identity(g.n(), g.q()),
        }
    }

    fn n(&self) -> usize {
        self.vals.n()
    }

    fn q(&self) -> u32 {
        self.vals.q()
    }

    /// Valuation of the current value at (i, j); `None` for zero.
    fn val_of(&self, i: usize, j: usize) -> Result<Option<Gamma>> {
        if self.exact {
            let nv = entry_val(&self.nums, i, j)?;
            Ok(match nv {
                None => None,
                Some(v) => {
                    let dv = self
                        .den
                        .valuation()?
                        .finite()
                        .expect("nonzero denominator");
                    Some(v - dv)
                }
            })
        } else {
            entry_val(&self.vals, i, j)
        }
    }

    /// The current value at (i, j) as a field element.
    fn value(&self, i: usize, j: usize) -> Result<FieldElement> {
        if self.exact {
            let num = self.nums.at(i, j);
            if num.is_exact_zero() {
                return Ok(FieldElement::zero(self.q()));
            }
            if self.den.is_one_below_caps() && self.den.is_exact() {
                return Ok(num.clone());
            }
            if let Some(qt) = num.exact_div_poly(&self.den) {
                return Ok(qt);
            }
            num.div(&self.den, self.prec)
        } else {
            Ok(self.vals.at(i, j).clone())
        }
    }

    /// Update e := e - (a/p) b as the Schur quotient (e p - a b)/p so that
    /// numerator cancellations stay visible before any division.
    fn schur_value(
        e: &FieldElement,
        p: &FieldElement,
        a: &FieldElement,
        b: &FieldElement,
        prec: Precision,
    ) -> Result<FieldElement> {
        let num = e.mul(p).sub(&a.mul(b));
        if num.is_exact_zero() {
            return Ok(FieldElement::zero(e.q()));
        }
        if let Some(qt) = num.exact_div_poly(p) {
            return Ok(qt);
        }
        num.div(p, prec)
    }

    /// One full pivot step at (r, c): clear `rows` with left transvections
    /// and `cols` with right transvections, updating the block of the
    /// remaining `live_rows` x `live_cols` entries fraction-free (or in
    /// value Schur form), then freeze the pivot value. When `freeze_row`
    /// is set, the untouched entries of the pivot row are materialized too
    /// (used by the triangular elimination).
    #[allow(clippy::too_many_arguments)]
    fn pivot_step(
        &mut self,
        r: usize,
        c: usize,
        rows: &[usize],
        cols: &[usize],
        live_rows: &[usize],
        live_cols: &[usize],
        freeze_row: bool,
    ) -> Result<()> {
        let n = self.n();
        let q = self.q();
        // factors first: lambda_i = -g_ic / g_rc and mu_j = -g_rj / g_rc
        let pivot_val = self.value(r, c)?;
        for &i in rows {
            let lam = self.value(i, c)?.div(&pivot_val, self.prec)?.neg();
            let inv = MatrixK::transvection(n, q, i, r, &lam.neg());
            self.left = self.left.mul(&inv);
        }
        for &j in cols {
            let mu = self.value(r, j)?.div(&pivot_val, self.prec)?.neg();
            let inv = MatrixK::transvection(n, q, c, j, &mu.neg());
            self.right = inv.mul(&self.right);
        }
        // freeze the pivot value and, for triangular use, a fraction-free
        // snapshot of its row
        *self.vals.at_mut(r, c) = pivot_val.clone();
        if freeze_row {
            for j in 0..n {
                if j != c && !cols.contains(&j) {
                    let v = self.value(r, j)?;
                    *self.vals.at_mut(r, j) = v;
                }
            }
            if self.exact {
                for j in 0..n {
                    *self.frozen_nums.at_mut(r, j) = self.nums.at(r, j).clone();
                }
                self.row_dens[r] = self.den.clone();
            } else {
                for j in 0..n {
                    *self.frozen_nums.at_mut(r, j) = self.vals.at(r, j).clone();
                }
                self.row_dens[r] = FieldElement::one(q);
            }
        }
        // update the live block
        if self.exact {
            let p = self.nums.at(r, c).clone();
            let mut fresh = self.nums.clone();
            let mut ok = true;
            'outer: for &i in live_rows {
                for &j in live_cols {
                    if i == r || j == c {
                        continue;
                    }
                    let raw = self
                        .nums
                        .at(i, j)
                        .mul(&p)
                        .sub(&self.nums.at(i, c).mul(self.nums.at(r, j)));
                    let divided = if self.den.is_exact() && self.den.is_one_below_caps() {
                        Some(raw.clone())
                    } else {
                        raw.exact_div_poly_generous(&self.den)
                    };
                    match divided {
                        Some(d) => *fresh.at_mut(i, j) = d,
                        None => {
                            ok = false;
                            break 'outer;
                        }
                    }
                }
            }
            if ok {
                self.nums = fresh;
                self.den = p;
                for &i in rows {
                    *self.nums.at_mut(i, c) = FieldElement::zero(q);
                    *self.vals.at_mut(i, c) = FieldElement::zero(q);
                }
                for &j in cols {
                    *self.nums.at_mut(r, j) = FieldElement::zero(q);
                    *self.vals.at_mut(r, j) = FieldElement::zero(q);
                }
                return Ok(());
            }
            // exact division failed; materialize values and degrade
            for i in 0..n {
                for j in 0..n {
                    let v = self.value(i, j)?;
                    *self.vals.at_mut(i, j) = v;
                }
            }
            self.exact = false;
        }
        // value-based Schur updates
        let p = self.vals.at(r, c).clone();
        for &i in live_rows {
            if i == r {
                continue;
            }
            let a = self.vals.at(i, c).clone();
            for &j in live_cols {
                if j == c {
                    continue;
                }
                let e = self.vals.at(i, j).clone();
                let b = self.vals.at(r, j).clone();
                *self.vals.at_mut(i, j) = Self::schur_value(&e, &p, &a, &b, self.prec)?;
            }
        }
        for &i in rows {
            *self.vals.at_mut(i, c) = FieldElement::zero(q);
        }
        for &j in cols {
            *self.vals.at_mut(r, j) = FieldElement::zero(q);
        }
        Ok(())
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        let n = self.n();
        let q = self.q();
        let s = MatrixK::signed_swap(n, q, i, j);
        let s_inv = MatrixK::signed_swap(n, q, j, i);
        self.nums = s.mul(&self.nums);
        self.vals = s.mul(&self.vals);
        self.frozen_nums = s.mul(&self.frozen_nums);
        self.row_dens.swap(i, j);
        self.left = self.left.mul(&s_inv);
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        let n = self.n();
        let q = self.q();
        let s = MatrixK::signed_swap(n, q, i, j);
        let s_inv = MatrixK::signed_swap(n, q, j, i);
        self.nums = self.nums.mul(&s);
        self.vals = self.vals.mul(&s);
        self.frozen_nums = self.frozen_nums.mul(&s);
        self.right = s_inv.mul(&self.right);
    }
}

fn check_invertible(g: &MatrixK) -> Result<()> {
    let d = g.det();
    if d.is_exact_zero() {
        return Err(Error::SingularMatrix);
    }
    if d.is_zero_below_caps() {
        return Err(Error::SingularMatrix);
    }
    d.valuation()?;
    Ok(())
}

/// Bruhat decomposition g = b1 * w * b2 with b1, b2 in B and w monomial.
pub fn bruhat(g: &MatrixK, prec: Precision) -> Result<Decomposition> {
    check_invertible(g)?;
    let n = g.n();
    let mut st = Elim::new(g, prec);
    let mut row_done = vec![false; n];
    let mut col_done = vec![false; n];

    for _ in 0..n {
        // global minimum over the active submatrix; ties prefer the largest
        // row, then the smallest column, which makes every clearing legal
        let mut best: Option<(Gamma, usize, usize)> = None;
        for i in 0..n {
            if row_done[i] {
                continue;
            }
            for j in 0..n {
                if col_done[j] {
                    continue;
                }
                if let Some(v) = st.val_of(i, j)? {
                    let better = match best {
                        None => true,
                        Some((bv, bi, bj)) => {
                            v < bv || (v == bv && (i > bi || (i == bi && j < bj)))
                        }
                    };
                    if better {
                        best = Some((v, i, j));
                    }
                }
            }
        }
        let (_, r, c) = best.ok_or(Error::SingularMatrix)?;
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        for i in 0..n {
            if i != r && !row_done[i] && st.val_of(i, c)?.is_some() {
                rows.push(i);
            }
        }
        for j in 0..n {
            if j != c && !col_done[j] && st.val_of(r, j)?.is_some() {
                cols.push(j);
            }
        }
        let live_rows: Vec<usize> = (0..n).filter(|&i| !row_done[i] && i != r).collect();
        let live_cols: Vec<usize> = (0..n).filter(|&j| !col_done[j] && j != c).collect();
        st.pivot_step(r, c, &rows, &cols, &live_rows, &live_cols, false)?;
        row_done[r] = true;
        col_done[c] = true;
    }

    Ok(Decomposition {
        kind: DecompositionKind::Bruhat,
        left: st.left,
        middle: st.vals,
        right: st.right,
    })
}

/// Cartan decomposition g = p1 * a * p2 with p_i over O' and a in A_+.
pub fn cartan(g: &MatrixK, prec: Precision) -> Result<Decomposition> {
    check_invertible(g)?;
    let n = g.n();
    let q = g.q();
    let mut st = Elim::new(g, prec);

    for k in 0..n {
        // global minimum over the trailing submatrix; smallest row then
        // column for determinism
        let mut best: Option<(Gamma, usize, usize)> = None;
        for i in k..n {
            for j in k..n {
                if let Some(v) = st.val_of(i, j)? {
                    let better = match best {
                        None => true,
                        Some((bv, bi, bj)) => {
                            v < bv || (v == bv && (i < bi || (i == bi && j < bj)))
                        }
                    };
                    if better {
                        best = Some((v, i, j));
                    }
                }
            }
        }
        let (_, r, c) = best.ok_or(Error::SingularMatrix)?;
        if r != k {
            st.swap_rows(k, r);
        }
        if c != k {
            st.swap_cols(k, c);
        }
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        for i in (k + 1)..n {
            if st.val_of(i, k)?.is_some() {
                rows.push(i);
            }
        }
        for j in (k + 1)..n {
            if st.val_of(k, j)?.is_some() {
                cols.push(j);
            }
        }
        let live_rows: Vec<usize> = ((k + 1)..n).collect();
        let live_cols: Vec<usize> = ((k + 1)..n).collect();
        st.pivot_step(k, k, &rows, &cols, &live_rows, &live_cols, false)?;
    }

    // normalize diagonal entries to monic monomials, absorbing units right
    let mut units = Vec::with_capacity(n);
    let mut monos = Vec::with_capacity(n);
    for i in 0..n {
        let (v, unit) = st.vals.at(i, i).unit_decompose()?;
        monos.push(FieldElement::monomial(q, v.t, v.u, 1));
        units.push(unit);
    }
    let unit_mat = MatrixK::diagonal(q, &units);
    let mut middle = MatrixK::diagonal(q, &monos);
    let mut left = st.left;
    let mut right = unit_mat.mul(&st.right);

    // sort the diagonal into non-increasing valuations by a signed
    // permutation applied to both sides
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let va = monos[a].valuation().unwrap().finite().unwrap();
        let vb = monos[b].valuation().unwrap().finite().unwrap();
        vb.cmp(&va)
    });
    if order.iter().enumerate().any(|(i, &o)| i != o) {
        let mut perm = MatrixK::zero(n, q);
        for (i, &o) in order.iter().enumerate() {
            *perm.at_mut(i, o) = FieldElement::one(q);
        }
        if !perm.det_is_one() {
            for j in 0..n {
                let e = perm.at(0, j).clone();
                *perm.at_mut(0, j) = e.neg();
            }
        }
        let perm_inv = perm.transpose_signed_inverse();
        middle = perm.mul(&middle).mul(&perm_inv);
        left = left.mul(&perm_inv);
        right = perm.mul(&right);
    }

    Ok(Decomposition {
        kind: DecompositionKind::Cartan,
        left,
        middle,
        right,
    })
}

/// Iwasawa decomposition g = p * a * u with p over O', a diagonal monomial
/// (position-ordered) and u upper unitriangular over K.
pub fn iwasawa(g: &MatrixK, prec: Precision) -> Result<Decomposition> {
    check_invertible(g)?;
    let n = g.n();
    let q = g.q();
    let mut st = Elim::new(g, prec);

    // triangularize with left operations over O', freezing each pivot row
    for c in 0..n {
        let mut best: Option<(Gamma, usize)> = None;
        for i in c..n {
            if let Some(v) = st.val_of(i, c)? {
                let better = match best {
                    None => true,
                    Some((bv, _)) => v < bv,
                };
                if better {
                    best = Some((v, i));
                }
            }
        }
        let (_, r) = best.ok_or(Error::SingularMatrix)?;
        if r != c {
            st.swap_rows(c, r);
        }
        let mut rows = Vec::new();
        for i in (c + 1)..n {
            if st.val_of(i, c)?.is_some() {
                rows.push(i);
            }
        }
        let live_rows: Vec<usize> = ((c + 1)..n).collect();
        let live_cols: Vec<usize> = ((c + 1)..n).collect();
        st.pivot_step(c, c, &rows, &[], &live_rows, &live_cols, true)?;
    }

    // clear above the diagonal with right unipotent operations over K. The
    // triangle is carried as per-entry exact rationals num/den so that the
    // sweep's own cancellations never hide a valuation.
    let mut num = st.frozen_nums.clone();
    let mut dens: Vec<Vec<FieldElement>> = (0..n)
        .map(|i| vec![st.row_dens[i].clone(); n])
        .collect();
    let mut right = st.right;
    let zeroish = |e: &FieldElement| e.is_exact_zero() || e.is_zero_below_caps();
    for j in 1..n {
        for r in (0..j).rev() {
            let an = num.at(r, j).clone();
            if zeroish(&an) {
                continue;
            }
            let ad = dens[r][j].clone();
            let pn = num.at(r, r).clone();
            let pd = dens[r][r].clone();
            // lambda = -(an/ad) / (pn/pd) = -(an pd)/(ad pn)
            let lam_num = an.mul(&pd);
            let lam_den = ad.mul(&pn);
            let lam = match lam_num.exact_div_poly(&lam_den) {
                Some(e) => e.neg(),
                None => lam_num.div(&lam_den, prec)?.neg(),
            };
            for i in 0..r {
                // e' = e - (an/ad)(pd/pn)(bn/bd)
                let bn = num.at(i, r).clone();
                if zeroish(&bn) {
                    continue;
                }
                let bd = dens[i][r].clone();
                let en = num.at(i, j).clone();
                let ed = dens[i][j].clone();
                let new_num = en
                    .mul(&ad)
                    .mul(&pn)
                    .mul(&bd)
                    .sub(&ed.mul(&an).mul(&pd).mul(&bn));
                let new_den = ed.mul(&ad).mul(&pn).mul(&bd);
                *num.at_mut(i, j) = new_num;
                dens[i][j] = new_den;
            }
            *num.at_mut(r, j) = FieldElement::zero(q);
            let inv = MatrixK::transvection(n, q, r, j, &lam.neg());
            right = inv.mul(&right);
        }
    }

    // absorb diagonal units into the left factor
    let mut units = Vec::with_capacity(n);
    let mut monos = Vec::with_capacity(n);
    for i in 0..n {
        let nn = num.at(i, i).clone();
        let dd = dens[i][i].clone();
        let value = match nn.exact_div_poly(&dd) {
            Some(e) => e,
            None => nn.div(&dd, prec)?,
        };
        let (v, unit) = value.unit_decompose()?;
        monos.push(FieldElement::monomial(q, v.t, v.u, 1));
        units.push(unit);
    }
    let middle = MatrixK::diagonal(q, &monos);
    let left = st.left.mul(&MatrixK::diagonal(q, &units));

    Ok(Decomposition {
        kind: DecompositionKind::Iwasawa,
        left,
        middle,
        right,
    })
}

impl MatrixK {
    /// Inverse of a signed permutation matrix (transpose with signs kept
    /// consistent), used when reordering Cartan diagonals.
    fn transpose_signed_inverse(&self) -> MatrixK {
        let n = self.n();
        let q = self.q();
        let mut out = MatrixK::zero(n, q);
        for i in 0..n {
            for j in 0..n {
                let e = self.at(i, j);
                if !e.is_exact_zero() {
                    // entry is +-1; the inverse of a signed permutation is
                    // its transpose with the same signs
                    *out.at_mut(j, i) = e.clone();
                }
            }
        }
        debug_assert!(self
            .mul(&out)
            .eq_below_caps(&MatrixK::identity(n, q)));
        out
    }
}

/// delta_{r,k,l}(g): the minimum over the generating wedge basis of
/// Lambda^r L_k of the L_l-normalized valuation of its image, where L_k
/// scales the first k basis vectors by the maximal ideal generator u and
/// vectors are acted on as rows (the convention in which B stabilizes
/// every L_k, making the quantity a BgB-class invariant).
pub fn delta_rkl(g: &MatrixK, r: usize, k: usize, l: usize) -> Result<GammaExt> {
    let n = g.n();
    assert!(r >= 1 && r <= n && k < n && l < n);
    check_invertible(g)?;
    let subsets = combinations(n, r);
    let weight = |s: &[usize], bound: usize| s.iter().filter(|&&i| i < bound).count() as i64;
    let mut best = GammaExt::Infinity;
    for s in &subsets {
        let shift_in = Gamma::new(0, weight(s, k));
        // nu'_{L_l}(sum_T minor(S,T) e_T) = min_T (nu'(minor) - u-weight_l(T))
        let mut img = GammaExt::Infinity;
        for t in &subsets {
            let m = g.minor(s, t);
            match m.valuation()? {
                GammaExt::Infinity => {}
                GammaExt::Finite(v) => {
                    let adj = GammaExt::Finite(v - Gamma::new(0, weight(t, l)));
                    if adj < img {
                        img = adj;
                    }
                }
            }
        }
        let total = img + GammaExt::Finite(shift_in);
        if total < best {
            best = total;
        }
    }
    Ok(best)
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    rec(0, n, r, &mut cur, &mut out);
    out
}

/// Generators of the Weyl group as coset data for the product classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GenId {
    W0,
    W1,
    W2,
}

impl GenId {
    /// nu' of the antidiagonal datum y with s = w(y).
    pub fn datum_valuation(&self) -> Gamma {
        match self {
            GenId::W0 => Gamma::new(0, 0),
            GenId::W1 => Gamma::new(-1, 0),
            GenId::W2 => Gamma::new(0, -1),
        }
    }
}

/// The classes appearing in (BwB)(BsB) for an antidiagonal w with datum
/// valuation v and an antidiagonal generator s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProductClass {
    /// Only B(ws)B appears.
    Single,
    /// B(ws)B together with Bw(y)B for all lo <= nu'(y) <= hi (inclusive).
    Union { lo: Gamma, hi: Gamma },
}

/// Classify (BwB)(BsB) where w = [[0, x^-1], [-x, 0]] and v = nu'(x).
///
/// Writing zeta for the datum valuation of s, the extra antidiagonal
/// classes are exactly w(y) with nu'(y) = v + zeta + beta for beta running
/// over the O'-valuations up to min(-2v, -2 zeta); no such beta exists when
/// v > 0. For s = w0 the union degenerates to BwB itself, which is the
/// Tits-axiom shape BwBsB inside BwB union BwsB.
pub fn double_coset_product_class(v: Gamma, s: GenId) -> ProductClass {
    let zeta = s.datum_valuation();
    let cap = (-(v + v)).min(-(zeta + zeta));
    if !cap.is_nonneg() {
        return ProductClass::Single;
    }
    ProductClass::Union {
        lo: v + zeta,
        hi: v + zeta + cap,
    }
}
