//! The stratified tree of O'-module classes in V = K^2.
//!
//! Vertices come in three strata by module type: inner points (O' + O'),
//! inner-boundary points (O' + O_K) and external-boundary points (O' + K).
//! Inner vertices fall into fibers over the rank-1 tree of K; every fiber
//! is a classical tree over K-bar whose boundary points are exactly the
//! inner-boundary vertices over the same base. External-boundary vertices
//! biject with the projective line over K.
//!
//! Canonical forms: an inner class is a Hermite form [[u^i t^n, c], [0, 1]]
//! over O' with c reduced modulo the diagonal ideal; an inner-boundary
//! class is the pair (base vertex over K, boundary direction of its fiber);
//! an external class is its line.

pub mod apartment;

pub use apartment::{
    PathLabelHint,
    Apartment2, ApartmentError, Path2, PathSegment, RaySpec, StabSimplex,
};

use crate::error::{Error, Result};
use crate::field::{FieldElement, Precision, RingId};
use crate::gamma::{Gamma, GammaExt};
use crate::ideal::FractionalIdeal;
use crate::matrix::MatrixK;
use crate::tree1d::{line_from_vector, BoundaryPoint1, Dvr, Vertex1};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Coefficient module attached to a basis column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coeff {
    OPrime,
    OK,
    K,
}

impl Coeff {
    pub fn ideal(&self) -> FractionalIdeal {
        match self {
            Coeff::OPrime => FractionalIdeal::UNIT,
            Coeff::OK => FractionalIdeal::OK_MODULE,
            Coeff::K => FractionalIdeal::FullK,
        }
    }
}

/// An O'-submodule of V presented as coefficient ideals on basis columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lattice2 {
    pub basis: MatrixK,
    pub coeffs: (Coeff, Coeff),
}

impl Lattice2 {
    pub fn new(basis: MatrixK, coeffs: (Coeff, Coeff)) -> Result<Lattice2> {
        assert_eq!(basis.n(), 2);
        // exactly the module shapes of the three strata
        let ok = matches!(
            coeffs,
            (Coeff::OPrime, Coeff::OPrime)
                | (Coeff::OPrime, Coeff::OK)
                | (Coeff::OK, Coeff::OPrime)
                | (Coeff::OPrime, Coeff::K)
                | (Coeff::K, Coeff::OPrime)
        );
        if !ok {
            return Err(Error::Unsupported(
                "coefficients must mix O' with at most one of O_K or K",
            ));
        }
        Ok(Lattice2 { basis, coeffs })
    }

    /// 2 for O'+O', 1 for the O_K mix, 0 for the K mix.
    pub fn stratum(&self) -> u8 {
        match self.coeffs {
            (Coeff::OPrime, Coeff::OPrime) => 2,
            (Coeff::OPrime, Coeff::OK) | (Coeff::OK, Coeff::OPrime) => 1,
            _ => 0,
        }
    }

    /// Column index carrying the non-O' coefficient, if any.
    fn special_col(&self) -> Option<usize> {
        match self.coeffs {
            (Coeff::OPrime, Coeff::OPrime) => None,
            (Coeff::OPrime, _) => Some(1),
            _ => Some(0),
        }
    }
}

/// A canonical vertex of the stratified tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Vertex2 {
    /// Stratum 2: class of [[u^{d.u} t^{d.t}, c], [0, 1]] over O'.
    Inner { d: Gamma, c: FieldElement },
    /// Stratum 1: base vertex over K plus a boundary direction of its fiber.
    InnerBoundary {
        base: Vertex1,
        dir: BoundaryPoint1,
    },
    /// Stratum 0: a line in V, as a point of P^1(K).
    Outer { line: BoundaryPoint1 },
}

impl Vertex2 {
    pub fn stratum(&self) -> u8 {
        match self {
            Vertex2::Inner { .. } => 2,
            Vertex2::InnerBoundary { .. } => 1,
            Vertex2::Outer { .. } => 0,
        }
    }

    pub fn same(&self, other: &Vertex2) -> bool {
        match (self, other) {
            (Vertex2::Inner { d, c }, Vertex2::Inner { d: d2, c: c2 }) => {
                d == d2 && c.eq_below_caps(c2)
            }
            (
                Vertex2::InnerBoundary { base, dir },
                Vertex2::InnerBoundary { base: b2, dir: d2 },
            ) => base.same(b2) && dir.same(d2),
            (Vertex2::Outer { line }, Vertex2::Outer { line: l2 }) => line.same(l2),
            _ => false,
        }
    }
}

impl PartialEq for Vertex2 {
    fn eq(&self, other: &Self) -> bool {
        self.same(other)
    }
}

impl fmt::Display for Vertex2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex2::Inner { d, c } => write!(f, "inner[d={d}, c={c}]"),
            Vertex2::InnerBoundary { base, dir } => {
                write!(f, "inner-boundary[base={base}, dir={dir}]")
            }
            Vertex2::Outer { line } => write!(f, "outer[{line}]"),
        }
    }
}

/// Image of the projection to the rank-1 tree of K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Projected {
    Vertex(Vertex1),
    Boundary(BoundaryPoint1),
}

/// Position inside a fiber: a vertex or boundary point of the tree over K-bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FiberPoint {
    Vertex(Vertex1),
    Boundary(BoundaryPoint1),
}

/// Context: base field size and working precision.
#[derive(Debug, Clone, Copy)]
pub struct TreeCtx {
    pub q: u32,
    pub prec: Precision,
}

impl TreeCtx {
    pub fn new(q: u32, prec: Precision) -> TreeCtx {
        TreeCtx { q, prec }
    }

    /// The rank-1 structure of K (projection target).
    pub fn kdvr(&self) -> Dvr {
        Dvr::over_t(self.q, self.prec)
    }

    /// The fiber structure over K-bar.
    pub fn fdvr(&self) -> Dvr {
        Dvr::over_u(self.q, self.prec)
    }

    pub fn base_vertex(&self) -> Vertex2 {
        Vertex2::Inner {
            d: Gamma::ZERO,
            c: FieldElement::zero(self.q),
        }
    }

    /// Canonical basis matrix of an inner vertex.
    pub fn inner_matrix(&self, v: &Vertex2) -> Result<MatrixK> {
        match v {
            Vertex2::Inner { d, c } => Ok(MatrixK::from_rows(
                self.q,
                vec![
                    vec![FieldElement::monomial(self.q, d.t, d.u, 1), c.clone()],
                    vec![FieldElement::zero(self.q), FieldElement::one(self.q)],
                ],
            )),
            _ => Err(Error::StratumError),
        }
    }

    /// A representative lattice of any vertex.
    pub fn representative(&self, v: &Vertex2) -> Result<Lattice2> {
        Ok(self.representative_with_det(v)?.0)
    }

    /// A representative lattice together with its basis determinant built
    /// structurally (products of factor determinants), so that downstream
    /// canonicalization never depends on an entrywise determinant with
    /// phantom caps.
    pub fn representative_with_det(&self, v: &Vertex2) -> Result<(Lattice2, FieldElement)> {
        let lat = self.representative_inner(v)?;
        let det = match v {
            Vertex2::Inner { d, .. } => FieldElement::monomial(self.q, d.t, d.u, 1),
            Vertex2::InnerBoundary { base, dir } => {
                let nd = self.kdvr().vertex_matrix(base).det();
                let (z, w) = lift_line(self.q, dir);
                let pair = MatrixK::from_rows(
                    self.q,
                    vec![
                        vec![w[0].clone(), z[0].clone()],
                        vec![w[1].clone(), z[1].clone()],
                    ],
                );
                nd.mul(&pair.det())
            }
            Vertex2::Outer { .. } => lat.basis.det(),
        };
        Ok((lat, det))
    }

    fn representative_inner(&self, v: &Vertex2) -> Result<Lattice2> {
        match v {
            Vertex2::Inner { .. } => Lattice2::new(
                self.inner_matrix(v)?,
                (Coeff::OPrime, Coeff::OPrime),
            ),
            Vertex2::InnerBoundary { base, dir } => {
                let n = self.kdvr().vertex_matrix(base);
                let (z, w) = lift_line(self.q, dir);
                let zc = n.mul_vec(&z);
                let wc = n.mul_vec(&w);
                Lattice2::new(
                    MatrixK::from_rows(
                        self.q,
                        vec![
                            vec![wc[0].clone(), zc[0].clone()],
                            vec![wc[1].clone(), zc[1].clone()],
                        ],
                    ),
                    (Coeff::OPrime, Coeff::OK),
                )
            }
            Vertex2::Outer { line } => {
                let (z, w) = lift_line(self.q, line);
                Lattice2::new(
                    MatrixK::from_rows(
                        self.q,
                        vec![
                            vec![z[0].clone(), w[0].clone()],
                            vec![z[1].clone(), w[1].clone()],
                        ],
                    ),
                    (Coeff::K, Coeff::OPrime),
                )
            }
        }
    }

    /// Canonicalize a lattice into its vertex.
    pub fn canonicalize(&self, lat: &Lattice2) -> Result<Vertex2> {
        self.canonicalize_hinted(lat, None)
    }

    /// Canonicalize with a structurally known basis determinant.
    pub fn canonicalize_hinted(
        &self,
        lat: &Lattice2,
        det_hint: Option<FieldElement>,
    ) -> Result<Vertex2> {
        match lat.stratum() {
            2 => self.canon_inner(&lat.basis, det_hint),
            1 => {
                let special = lat.special_col().unwrap();
                // the O_K-coefficient column reduced mod the maximal ideal
                // of O_K spans the boundary direction in the residue plane;
                // the residue of the coordinate change is computed factor by
                // factor from the canonicalization transform
                let (base, ybar) = self
                    .kdvr()
                    .canon1_residue_transform(&lat.basis, det_hint)?;
                let dir = line_from_vector(
                    &self.fdvr(),
                    ybar.at(0, special),
                    ybar.at(1, special),
                )?;
                Ok(Vertex2::InnerBoundary { base, dir })
            }
            _ => {
                let special = lat.special_col().unwrap();
                let line = line_from_vector(
                    &self.kdvr(),
                    lat.basis.at(0, special),
                    lat.basis.at(1, special),
                )?;
                Ok(Vertex2::Outer { line })
            }
        }
    }

    /// Hermite form over O' for stratum 2.
    fn canon_inner(&self, m: &MatrixK, det_hint: Option<FieldElement>) -> Result<Vertex2> {
        let det = det_hint.unwrap_or_else(|| m.det());
        if det.is_exact_zero() || det.is_zero_below_caps() {
            return Err(Error::SingularMatrix);
        }
        let val = |e: &FieldElement| -> Result<Option<Gamma>> {
            if e.is_exact_zero() || e.is_zero_below_caps() {
                return Ok(None);
            }
            Ok(e.valuation()?.finite())
        };
        let v0 = val(m.at(1, 0))?;
        let v1 = val(m.at(1, 1))?;
        let mut cols: [Vec<FieldElement>; 2] = [m.column(0), m.column(1)];
        let swap = match (v0, v1) {
            (None, None) => false,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) => a < b,
        };
        if swap {
            cols.swap(0, 1);
        }
        // the cleared form is [[x, y], [0, z]] with x z = +-det; the scaled
        // representative [[det/z^2, y/z], [0, 1]] is computed via the
        // determinant so that its corner valuation stays visible
        let z = cols[1][1].clone();
        let z2 = z.mul(&z);
        let det_cur = if swap { det.neg() } else { det };
        let top_left = match det_cur.exact_div_poly(&z2) {
            Some(q) => q,
            None => det_cur.div(&z2, self.prec)?,
        };
        let d = match top_left.valuation()? {
            GammaExt::Finite(v) => v,
            GammaExt::Infinity => return Err(Error::SingularMatrix),
        };
        // the off-diagonal data is only needed modulo the ideal at d, so
        // widen the division window to reach it
        let y = &cols[1][0];
        let top_right = match y.exact_div_poly(&z) {
            Some(q) => q,
            None => {
                let mut prec = self.prec;
                if let (Ok(GammaExt::Finite(vy)), Ok(GammaExt::Finite(vz))) =
                    (y.valuation(), z.valuation())
                {
                    let vq = vy - vz;
                    prec = Precision::new(
                        prec.t_window.max(d.t - vq.t + 4),
                        prec.u_window.max(d.u - vq.u + 4),
                    );
                }
                y.div(&z, prec)?
            }
        };
        let c = top_right.reduce_mod_monomial_capped(d);
        Ok(Vertex2::Inner { d, c })
    }

    /// The projection to the rank-1 tree: tensoring with O_K.
    pub fn project(&self, v: &Vertex2) -> Result<Projected> {
        match v {
            Vertex2::Inner { .. } => {
                Ok(Projected::Vertex(self.kdvr().canon1(&self.inner_matrix(v)?)?))
            }
            Vertex2::InnerBoundary { base, .. } => Ok(Projected::Vertex(base.clone())),
            Vertex2::Outer { line } => Ok(Projected::Boundary(line.clone())),
        }
    }

    /// Position of a vertex inside the fiber over `sigma`.
    ///
    /// For an inner vertex the coordinates come straight from the canonical
    /// data: with d = (n, i) and off-diagonal c, the base vertex is
    /// (n, c mod t^n) and the residue lattice is [[u^i, c_n], [0, 1]] where
    /// c_n is the t-level-n slice of c shifted down to level zero.
    pub fn fiber_coords(&self, sigma: &Vertex1, v: &Vertex2) -> Result<FiberPoint> {
        match self.project(v)? {
            Projected::Vertex(s) if s.same(sigma) => {}
            _ => return Err(Error::FiberMismatch),
        }
        match v {
            Vertex2::Inner { d, c } => {
                let c_slice = self.t_level_slice(c, d.t)?;
                let fb = MatrixK::from_rows(
                    self.q,
                    vec![
                        vec![FieldElement::monomial(self.q, 0, d.u, 1), c_slice],
                        vec![FieldElement::zero(self.q), FieldElement::one(self.q)],
                    ],
                );
                Ok(FiberPoint::Vertex(self.fdvr().canon1(&fb)?))
            }
            Vertex2::InnerBoundary { dir, .. } => Ok(FiberPoint::Boundary(dir.clone())),
            Vertex2::Outer { .. } => Err(Error::StratumError),
        }
    }

    /// The t-level-n slice of an element moved down to level zero, with its
    /// cap; errors when the level is above the element's t-cap.
    fn t_level_slice(&self, x: &FieldElement, n: i64) -> Result<FieldElement> {
        if let Some(tc) = x.t_cap() {
            if tc <= n {
                return Err(Error::InsufficientPrecision("level above the t-cap"));
            }
        }
        let mut items = Vec::new();
        for (g, coeff) in x.terms() {
            if g.t == n {
                items.push((0i64, g.u, coeff as i64));
            }
        }
        let mut out = FieldElement::from_terms(self.q, &items);
        for (l, cap) in x.u_caps() {
            if l == n {
                out = out.meet_caps(&FieldElement::caps_only(self.q, None, &[(0, cap)]));
            }
        }
        Ok(out)
    }

    /// The action of an invertible matrix on a vertex.
    pub fn act(&self, g: &MatrixK, v: &Vertex2) -> Result<Vertex2> {
        self.act_hinted(g, &g.det(), v)
    }

    /// The action with a structurally known determinant of g (used when g
    /// itself is a product whose entrywise determinant carries caps).
    pub fn act_hinted(&self, g: &MatrixK, g_det: &FieldElement, v: &Vertex2) -> Result<Vertex2> {
        let (lat, d0) = self.representative_with_det(v)?;
        let hint = g_det.mul(&d0);
        self.canonicalize_hinted(
            &Lattice2 {
                basis: g.mul(&lat.basis),
                coeffs: lat.coeffs,
            },
            Some(hint),
        )
    }

    /// The Gamma-valued metric on stratum 2 via the relative Cartan form.
    /// In canonical coordinates the transporter is
    /// [[m_{dw-dv}, (c_w - c_v) m_{-dv}], [0, 1]]; the data difference is
    /// taken under the agreed-below-caps convention.
    pub fn distance(&self, v: &Vertex2, w: &Vertex2) -> Result<Gamma> {
        let ((dv, cv), (dw, cw)) = match (v, w) {
            (Vertex2::Inner { d: dv, c: cv }, Vertex2::Inner { d: dw, c: cw }) => {
                ((dv, cv), (dw, cw))
            }
            _ => return Err(Error::StratumError),
        };
        let delta = *dw - *dv;
        let diff = cw.sub(cv).assume_leading();
        let mut candidates = vec![delta, Gamma::ZERO];
        if !diff.is_exact_zero() && !diff.is_zero_below_caps() {
            let val = diff.valuation()?.finite().ok_or(Error::ZeroAtPrecision)?;
            candidates.push(val - *dv);
        }
        let min = candidates.into_iter().min().unwrap();
        Ok((delta - min - min).abs())
    }

    /// The q+1 neighbors of an inner vertex, all in the same fiber.
    pub fn neighbors(&self, v: &Vertex2) -> Result<Vec<Vertex2>> {
        let sigma = match self.project(v)? {
            Projected::Vertex(s) => s,
            Projected::Boundary(_) => return Err(Error::StratumError),
        };
        let vbar = match self.fiber_coords(&sigma, v)? {
            FiberPoint::Vertex(x) => x,
            FiberPoint::Boundary(_) => return Err(Error::StratumError),
        };
        let fdvr = self.fdvr();
        let nmat = self.kdvr().vertex_matrix(&sigma);
        let mut out = Vec::new();
        for nb in fdvr.neighbors1(&vbar)? {
            out.push(self.lift_fiber_vertex(&nmat, &nb)?);
        }
        Ok(out)
    }

    /// Lift a fiber vertex (over K-bar) through the base lattice into an
    /// inner vertex: the preimage of the residue lattice.
    pub fn lift_fiber_vertex(&self, base_matrix: &MatrixK, nb: &Vertex1) -> Result<Vertex2> {
        let fdvr = self.fdvr();
        let mut fb = fdvr.vertex_matrix(nb);
        // scale into O_K-bar so the entries lift into O_K
        let mut shift = 0i64;
        for e in fb.entries() {
            if e.is_exact_zero() || e.is_zero_below_caps() {
                continue;
            }
            if let Some(val) = fdvr.val(e)? {
                shift = shift.min(val);
            }
        }
        if shift < 0 {
            fb = fb.scale(&fdvr.pi_pow(-shift));
        }
        let lifted = base_matrix.mul(&fb);
        self.canonicalize(&Lattice2::new(
            lifted,
            (Coeff::OPrime, Coeff::OPrime),
        )?)
    }

    /// Edge relation: inner-inner edges live inside one fiber at fiber
    /// distance one; inner-boundary pairs are joined exactly when each one's
    /// direction points along the base edge toward the other; external
    /// vertices have no edges.
    pub fn edge_between(&self, v: &Vertex2, w: &Vertex2) -> Result<bool> {
        match (v, w) {
            (Vertex2::Inner { .. }, Vertex2::Inner { .. }) => {
                let sv = match self.project(v)? {
                    Projected::Vertex(s) => s,
                    _ => unreachable!(),
                };
                let sw = match self.project(w)? {
                    Projected::Vertex(s) => s,
                    _ => unreachable!(),
                };
                if !sv.same(&sw) {
                    return Ok(false);
                }
                let a = match self.fiber_coords(&sv, v)? {
                    FiberPoint::Vertex(x) => x,
                    _ => unreachable!(),
                };
                let b = match self.fiber_coords(&sv, w)? {
                    FiberPoint::Vertex(x) => x,
                    _ => unreachable!(),
                };
                Ok(self.fdvr().distance1(&a, &b)? == 1)
            }
            (
                Vertex2::InnerBoundary { base: bv, dir: dv },
                Vertex2::InnerBoundary { base: bw, dir: dw },
            ) => {
                let kdvr = self.kdvr();
                if kdvr.distance1(bv, bw)? != 1 {
                    return Ok(false);
                }
                let toward_w = kdvr.line_toward(bv, bw)?;
                let toward_v = kdvr.line_toward(bw, bv)?;
                Ok(dv.same(&toward_w) && dw.same(&toward_v))
            }
            _ => Ok(false),
        }
    }

    /// The unique edge partner of an inner-boundary vertex.
    pub fn boundary_edge_partner(&self, v: &Vertex2) -> Result<Vertex2> {
        let (base, dir) = match v {
            Vertex2::InnerBoundary { base, dir } => (base, dir),
            _ => return Err(Error::StratumError),
        };
        let kdvr = self.kdvr();
        let tau = kdvr.neighbor_toward(base, dir)?;
        let back = kdvr.line_toward(&tau, base)?;
        Ok(Vertex2::InnerBoundary {
            base: tau,
            dir: back,
        })
    }

    /// Class equality decided by mutual membership of generators, with the
    /// scalar pinned by determinant data (stratum 2); canonical data are
    /// compared on the boundary strata.
    pub fn same_class(&self, a: &Lattice2, b: &Lattice2) -> Result<bool> {
        if a.stratum() != b.stratum() {
            return Ok(false);
        }
        if a.stratum() == 2 {
            let va = a
                .basis
                .det()
                .valuation()?
                .finite()
                .ok_or(Error::SingularMatrix)?;
            let vb = b
                .basis
                .det()
                .valuation()?
                .finite()
                .ok_or(Error::SingularMatrix)?;
            let diff = vb - va;
            let lam = match diff.half() {
                Some(h) => h,
                None => return Ok(false),
            };
            let scaled = a.basis.scale(&FieldElement::monomial(self.q, lam.t, lam.u, 1));
            let fwd = self.columns_in_span(&scaled, &b.basis)?;
            let bwd = self.columns_in_span(&b.basis, &scaled)?;
            Ok(fwd && bwd)
        } else {
            Ok(self.canonicalize(a)?.same(&self.canonicalize(b)?))
        }
    }

    /// Are both columns of `m` inside the O'-span of the columns of `span`?
    fn columns_in_span(&self, m: &MatrixK, span: &MatrixK) -> Result<bool> {
        let inv = span.inverse(self.prec)?;
        let coords = inv.mul(m);
        for e in coords.entries() {
            if !e.in_ring_at_precision(RingId::OPrime)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Type of an inner vertex: the determinant valuation of a transporter
    /// from the base vertex, mod 2 componentwise.
    pub fn vertex_type(&self, v: &Vertex2) -> Result<(u8, u8)> {
        match v {
            Vertex2::Inner { d, .. } => Ok(d.mod2()),
            _ => Err(Error::StratumError),
        }
    }
}

/// Lift a boundary-point datum to a line vector plus a basis completion.
fn lift_line(q: u32, line: &BoundaryPoint1) -> (Vec<FieldElement>, Vec<FieldElement>) {
    match line {
        BoundaryPoint1::Finite(s) => (
            vec![FieldElement::one(q), s.clone()],
            vec![FieldElement::zero(q), FieldElement::one(q)],
        ),
        BoundaryPoint1::Infinity => (
            vec![FieldElement::zero(q), FieldElement::one(q)],
            vec![FieldElement::one(q), FieldElement::zero(q)],
        ),
    }
}
