//! Truncated bivariate power series and homogeneous polynomials over F_{p^m}.
//!
//! A [`BiSeries`] stores finitely many nonzero terms c_{ij} x^i y^j in a
//! sorted map, together with a precision bound `prec`: every term of total
//! degree `< prec` is exact, and no term of total degree `>= prec` is stored.
//! Arithmetic tracks precision conservatively:
//!
//! * sums keep the smaller precision;
//! * products use min(prec_f + ord(g), prec_g + ord(f)), so multiplying by a
//!   monomial *gains* precision;
//! * dividing by x^r (or y^r) lowers precision by exactly r;
//! * blow-up substitutions keep the precision number unchanged.
//!
//! Whenever an operation discards a nonzero term at the precision bound, the
//! series remembers a **ghost bound**: a componentwise lower bound on the
//! (x-degree, y-degree) of every term it has ever dropped, transformed along
//! with the series by later operations.  A series with no ghost bound is
//! *certifiably* its stored terms, so even emptiness is exact knowledge.
//! Total-degree reads are certified by `prec` alone (dropped terms always
//! have total degree at least the bound at the moment they are dropped), but
//! single-axis orders can be undercut by a dropped term, so the certified
//! accessors ([`BiSeries::ord_x_certified`], [`BiSeries::ord_y_certified`],
//! [`BiSeries::try_div_x`]) consult the ghost bound and report when the
//! stored data no longer pins the answer.
//!
//! [`HomogPoly`] is a dense homogeneous polynomial Σ c_k x^{d-k} y^k used for
//! initial forms and their factorizations.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::field::{lucas_binomial, Fq, FqCtx};

/// Lower bound information about the total order of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrdBound {
    /// The minimal total degree of a nonzero term, known exactly.
    Finite(u32),
    /// No nonzero term below the precision bound: the order is at least
    /// this value (the series may be identically zero).
    AtLeast(u32),
}

impl OrdBound {
    /// The known lower bound in either case.
    pub fn lower(&self) -> u32 {
        match *self {
            OrdBound::Finite(o) | OrdBound::AtLeast(o) => o,
        }
    }

    pub fn finite(&self) -> Option<u32> {
        match *self {
            OrdBound::Finite(o) => Some(o),
            OrdBound::AtLeast(_) => None,
        }
    }
}

/// Why an exact division by a power of an axis variable was refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivBlock {
    /// A stored term has too small an exponent on the axis: the division
    /// genuinely fails, and this term witnesses it.
    Witness { i: u32, j: u32 },
    /// The stored data cannot certify the division: the precision budget is
    /// too small, or a dropped term may sit below the divisor power.
    Knowledge,
}

/// Point blow-up chart substitutions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChartMap {
    /// (x, y) ↦ (x̃, x̃·(ỹ + c)): the chart where the exceptional divisor is
    /// {x̃ = 0} and the fiber point is the direction y/x = c.
    PointX(Fq),
    /// (x, y) ↦ (x̃·ỹ, ỹ): the chart where the exceptional divisor is
    /// {ỹ = 0} and the fiber point is the direction "x/y = 0".
    PointY,
}

/// A truncated bivariate power series.
#[derive(Clone, PartialEq, Eq)]
pub struct BiSeries {
    terms: BTreeMap<(u32, u32), Fq>,
    prec: u32,
    /// Componentwise lower bound on the (x-degree, y-degree) of every term
    /// ever dropped at a precision bound in this series' history; `None`
    /// when nothing was dropped, so the stored terms are the whole object.
    ghost: Option<(u32, u32)>,
    ctx: Arc<FqCtx>,
}

impl fmt::Debug for BiSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            write!(f, "0")?;
        } else {
            for (n, ((i, j), c)) in self.terms.iter().enumerate() {
                if n > 0 {
                    write!(f, " + ")?;
                }
                write!(f, "{c}*x^{i}y^{j}")?;
            }
        }
        write!(f, " (prec {})", self.prec)
    }
}

impl BiSeries {
    pub fn zero(ctx: &Arc<FqCtx>, prec: u32) -> BiSeries {
        assert!(prec >= 1, "precision must be positive");
        BiSeries {
            terms: BTreeMap::new(),
            prec,
            ghost: None,
            ctx: Arc::clone(ctx),
        }
    }

    /// Builds a series from raw terms, summing duplicates and dropping
    /// zeros and terms at or above the precision bound.
    pub fn from_terms<I>(ctx: &Arc<FqCtx>, prec: u32, terms: I) -> BiSeries
    where
        I: IntoIterator<Item = ((u32, u32), Fq)>,
    {
        let mut s = BiSeries::zero(ctx, prec);
        for ((i, j), c) in terms {
            s.add_term(i, j, &c);
        }
        s
    }

    pub fn monomial(ctx: &Arc<FqCtx>, prec: u32, i: u32, j: u32, c: Fq) -> BiSeries {
        BiSeries::from_terms(ctx, prec, [((i, j), c)])
    }

    pub fn ctx(&self) -> &Arc<FqCtx> {
        &self.ctx
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &Fq)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, i: u32, j: u32) -> Fq {
        self.terms
            .get(&(i, j))
            .cloned()
            .unwrap_or_else(|| self.ctx.zero())
    }

    fn add_term(&mut self, i: u32, j: u32, c: &Fq) {
        if c.is_zero() {
            return;
        }
        if i.saturating_add(j) >= self.prec {
            self.merge_ghost(i, j);
            return;
        }
        let entry = self.terms.entry((i, j)).or_insert_with(|| self.ctx.zero());
        *entry = entry.add(c);
        if entry.is_zero() {
            self.terms.remove(&(i, j));
        }
    }

    /// Lowers the ghost bound to cover a dropped (or otherwise unknowable)
    /// term at (i, j).
    fn merge_ghost(&mut self, i: u32, j: u32) {
        self.ghost = Some(match self.ghost {
            None => (i, j),
            Some((gx, gy)) => (gx.min(i), gy.min(j)),
        });
    }

    /// Re-truncates to a smaller precision bound.
    pub fn truncate_to(&self, prec: u32) -> BiSeries {
        assert!(prec >= 1, "precision must be positive");
        let mut s = BiSeries::zero(&self.ctx, prec);
        s.ghost = self.ghost;
        for (&(i, j), c) in &self.terms {
            s.add_term(i, j, c);
        }
        s
    }

    /// Total-order lower bound.  Dropped terms always have total degree at
    /// least the precision bound, so a series that never dropped anything
    /// and stores nothing is certifiably zero (order at least `u32::MAX`).
    pub fn ord(&self) -> OrdBound {
        match self.terms.keys().map(|&(i, j)| i + j).min() {
            Some(o) => OrdBound::Finite(o),
            None => OrdBound::AtLeast(if self.ghost.is_none() {
                u32::MAX
            } else {
                self.prec
            }),
        }
    }

    /// Minimal x-degree over stored terms (`None` when no terms stored).
    /// This reads the stored data only; use [`Self::ord_x_certified`] when
    /// the answer must hold for the underlying object.
    pub fn ord_x(&self) -> Option<u32> {
        self.terms.keys().map(|&(i, _)| i).min()
    }

    /// Minimal y-degree over stored terms.
    pub fn ord_y(&self) -> Option<u32> {
        self.terms.keys().map(|&(_, j)| j).min()
    }

    /// The ghost bound: componentwise lower bound on the degrees of every
    /// dropped term, or `None` when the stored terms are the whole object.
    pub fn ghost(&self) -> Option<(u32, u32)> {
        self.ghost
    }

    /// Certified x-adic order of the underlying object (stored terms plus
    /// whatever was dropped): `Ok(Some(r))` when exact, `Ok(None)` when the
    /// object is certifiably zero, and `Err(lb)` when only "at least lb" is
    /// known because a dropped term may undercut the stored minimum.
    pub fn ord_x_certified(&self) -> Result<Option<u32>, u32> {
        let vis = self.ord_x();
        match (vis, self.ghost) {
            (Some(r), None) => Ok(Some(r)),
            (Some(r), Some((gx, _))) if gx >= r => Ok(Some(r)),
            (Some(_), Some((gx, _))) => Err(gx),
            (None, None) => Ok(None),
            (None, Some((gx, _))) => Err(gx),
        }
    }

    /// Certified y-adic order (mirror of [`Self::ord_x_certified`]).
    pub fn ord_y_certified(&self) -> Result<Option<u32>, u32> {
        let vis = self.ord_y();
        match (vis, self.ghost) {
            (Some(s), None) => Ok(Some(s)),
            (Some(s), Some((_, gy))) if gy >= s => Ok(Some(s)),
            (Some(_), Some((_, gy))) => Err(gy),
            (None, None) => Ok(None),
            (None, Some((_, gy))) => Err(gy),
        }
    }

    /// Residual order: the smallest total degree of a stored term whose
    /// exponent pair is not componentwise divisible by p^e.  `None` when no
    /// such term is stored below the precision bound.
    pub fn res_ord_pe(&self, pe: u32) -> Option<u32> {
        self.terms
            .iter()
            .filter(|(&(i, j), _)| !(i % pe == 0 && j % pe == 0))
            .map(|(&(i, j), _)| i + j)
            .min()
    }

    pub fn add(&self, other: &BiSeries) -> BiSeries {
        let prec = self.prec.min(other.prec);
        let mut s = self.truncate_to(prec);
        for (&(i, j), c) in &other.terms {
            s.add_term(i, j, c);
        }
        if let Some((gx, gy)) = other.ghost {
            s.merge_ghost(gx, gy);
        }
        s
    }

    pub fn sub(&self, other: &BiSeries) -> BiSeries {
        self.add(&other.scale(&other.ctx.from_u32(other.ctx.p() - 1)))
    }

    pub fn scale(&self, c: &Fq) -> BiSeries {
        if c.is_zero() {
            // The scalar annihilates dropped terms too: the result is
            // certifiably zero.
            return BiSeries::zero(&self.ctx, u32::MAX);
        }
        let mut s = BiSeries::zero(&self.ctx, self.prec);
        s.ghost = self.ghost;
        for (&(i, j), a) in &self.terms {
            s.add_term(i, j, &a.mul(c));
        }
        s
    }

    pub fn neg(&self) -> BiSeries {
        let mut s = BiSeries::zero(&self.ctx, self.prec);
        s.ghost = self.ghost;
        for (&(i, j), a) in &self.terms {
            s.add_term(i, j, &a.neg());
        }
        s
    }

    /// Componentwise lower bound on the degrees of every term of the
    /// underlying object, stored or dropped; `None` when the object is
    /// certifiably zero.
    fn content_lower(&self) -> Option<(u32, u32)> {
        let vis = match (self.ord_x(), self.ord_y()) {
            (Some(x), Some(y)) => Some((x, y)),
            _ => None,
        };
        match (vis, self.ghost) {
            (None, None) => None,
            (Some(v), None) => Some(v),
            (None, Some(g)) => Some(g),
            (Some((vx, vy)), Some((gx, gy))) => Some((vx.min(gx), vy.min(gy))),
        }
    }

    pub fn mul(&self, other: &BiSeries) -> BiSeries {
        if (self.is_zero() && self.ghost.is_none())
            || (other.is_zero() && other.ghost.is_none())
        {
            // A certifiably zero factor annihilates everything.
            return BiSeries::zero(&self.ctx, u32::MAX);
        }
        let la = self.ord().lower();
        let lb = other.ord().lower();
        let prec = (self.prec.saturating_add(lb)).min(other.prec.saturating_add(la));
        let mut s = BiSeries::zero(&self.ctx, prec);
        for (&(i1, j1), c1) in &self.terms {
            for (&(i2, j2), c2) in &other.terms {
                s.add_term(i1 + i2, j1 + j2, &c1.mul(c2));
            }
        }
        // Products involving a dropped factor term sit at or above the sum
        // of that ghost bound and the other factor's content bound.
        if let (Some((gx, gy)), Some((lx, ly))) = (self.ghost, other.content_lower()) {
            s.merge_ghost(gx.saturating_add(lx), gy.saturating_add(ly));
        }
        if let (Some((gx, gy)), Some((lx, ly))) = (other.ghost, self.content_lower()) {
            s.merge_ghost(gx.saturating_add(lx), gy.saturating_add(ly));
        }
        s
    }

    /// Multiplies by the monomial x^i y^j (gains precision i + j).
    pub fn mul_monomial(&self, i: u32, j: u32) -> BiSeries {
        let mut s = BiSeries::zero(&self.ctx, self.prec.saturating_add(i + j));
        s.ghost = self
            .ghost
            .map(|(gx, gy)| (gx.saturating_add(i), gy.saturating_add(j)));
        for (&(a, b), c) in &self.terms {
            s.add_term(a + i, b + j, c);
        }
        s
    }

    /// Small nonnegative power by repeated multiplication.
    pub fn pow(&self, k: u32) -> BiSeries {
        let mut acc = BiSeries::monomial(&self.ctx, u32::MAX, 0, 0, self.ctx.one());
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Exact division by x^r, certified for the underlying object: every
    /// stored term needs x-degree at least r (a violator is returned as a
    /// [`DivBlock::Witness`]), and both the precision budget and the ghost
    /// bound must rule out trouble below x^r ([`DivBlock::Knowledge`]
    /// otherwise).  Lowers precision by r.
    pub fn try_div_x(&self, r: u32) -> Result<BiSeries, DivBlock> {
        if r == 0 {
            return Ok(self.clone());
        }
        if let Some(&(i, j)) = self.terms.keys().find(|&&(i, _)| i < r) {
            return Err(DivBlock::Witness { i, j });
        }
        if self.is_zero() && self.ghost.is_none() {
            return Ok(BiSeries::zero(&self.ctx, u32::MAX));
        }
        if matches!(self.ghost, Some((gx, _)) if gx < r) {
            return Err(DivBlock::Knowledge);
        }
        if self.prec <= r {
            return Err(DivBlock::Knowledge);
        }
        let mut s = BiSeries::zero(&self.ctx, self.prec - r);
        s.ghost = self.ghost.map(|(gx, gy)| (gx - r, gy));
        for (&(i, j), c) in &self.terms {
            s.add_term(i - r, j, c);
        }
        Ok(s)
    }

    /// Exact division by y^r (mirror of [`Self::try_div_x`]).
    pub fn try_div_y(&self, r: u32) -> Result<BiSeries, DivBlock> {
        if r == 0 {
            return Ok(self.clone());
        }
        if let Some(&(i, j)) = self.terms.keys().find(|&&(_, j)| j < r) {
            return Err(DivBlock::Witness { i, j });
        }
        if self.is_zero() && self.ghost.is_none() {
            return Ok(BiSeries::zero(&self.ctx, u32::MAX));
        }
        if matches!(self.ghost, Some((_, gy)) if gy < r) {
            return Err(DivBlock::Knowledge);
        }
        if self.prec <= r {
            return Err(DivBlock::Knowledge);
        }
        let mut s = BiSeries::zero(&self.ctx, self.prec - r);
        s.ghost = self.ghost.map(|(gx, gy)| (gx, gy - r));
        for (&(i, j), c) in &self.terms {
            s.add_term(i, j - r, c);
        }
        Ok(s)
    }

    /// The homogeneous initial form (lowest-degree part), or `None` when no
    /// term is stored.
    pub fn initial_form(&self) -> Option<HomogPoly> {
        let d = self.ord().finite()?;
        let mut coeffs = vec![self.ctx.zero(); d as usize + 1];
        for (&(i, j), c) in &self.terms {
            if i + j == d {
                coeffs[j as usize] = c.clone();
            }
        }
        Some(HomogPoly {
            coeffs,
            ctx: Arc::clone(&self.ctx),
        })
    }

    /// The coefficient of x^r as a polynomial in y: map j ↦ c_{r,j}.
    pub fn x_section(&self, r: u32) -> BTreeMap<u32, Fq> {
        self.terms
            .iter()
            .filter(|(&(i, _), _)| i == r)
            .map(|(&(_, j), c)| (j, c.clone()))
            .collect()
    }

    /// The coefficient of y^s as a polynomial in x: map i ↦ c_{i,s}.
    pub fn y_section(&self, s: u32) -> BTreeMap<u32, Fq> {
        self.terms
            .iter()
            .filter(|(&(_, j), _)| j == s)
            .map(|(&(i, _), c)| (i, c.clone()))
            .collect()
    }

    /// Whether every stored exponent pair is componentwise ≡ 0 mod p^e.
    /// Coefficients never obstruct extraction of p^e-th roots because the
    /// Frobenius is bijective on a finite field.  This judges the stored
    /// terms; a dropped term beyond the budget is not consulted.
    pub fn is_pe_power(&self, pe: u32) -> bool {
        self.terms
            .keys()
            .all(|&(i, j)| i % pe == 0 && j % pe == 0)
    }

    /// The p^e-th root of a series all of whose stored exponents are
    /// divisible by p^e.  `None` if some exponent is not.  In
    /// characteristic p, (Σ c x^{ip^e} y^{jp^e})^{1/p^e} = Σ c^{1/p^e} x^i y^j,
    /// and the root is additive, so the root of the dropped part stays
    /// bounded by the ghost bound divided by p^e.
    pub fn pe_root(&self, p: u32, e: u32) -> Option<BiSeries> {
        let pe = p.pow(e);
        if !self.is_pe_power(pe) {
            return None;
        }
        let prec = self.prec.div_ceil(pe).max(1);
        let mut s = BiSeries::zero(&self.ctx, prec);
        s.ghost = self.ghost.map(|(gx, gy)| (gx / pe, gy / pe));
        for (&(i, j), c) in &self.terms {
            s.add_term(i / pe, j / pe, &c.pe_root(e));
        }
        Some(s)
    }

    /// The p^e-th power (Frobenius image): exponents multiply by p^e,
    /// coefficients are raised to the p^e.
    pub fn pe_power(&self, p: u32, e: u32) -> BiSeries {
        let pe = p.pow(e);
        let prec = self.prec.saturating_mul(pe);
        let mut s = BiSeries::zero(&self.ctx, prec);
        s.ghost = self
            .ghost
            .map(|(gx, gy)| (gx.saturating_mul(pe), gy.saturating_mul(pe)));
        for (&(i, j), c) in &self.terms {
            s.add_term(i * pe, j * pe, &c.pow(pe as u64));
        }
        s
    }

    /// Applies a point blow-up chart substitution, keeping the precision
    /// number unchanged (terms whose substituted total degree reaches the
    /// bound are dropped and remembered in the ghost bound).
    pub fn blowup_substitute(&self, chart: &ChartMap) -> BiSeries {
        let mut s = BiSeries::zero(&self.ctx, self.prec);
        if let Some((gx, gy)) = self.ghost {
            // Image of the ghost bound under the chart: x^i y^j maps to
            // x^{i+j} y^{≤j} in an x-chart (exactly y^j at direction 0) and
            // to x^i y^{i+j} in the y-chart.
            let mapped = match chart {
                ChartMap::PointY => (gx, gx.saturating_add(gy)),
                ChartMap::PointX(c0) if c0.is_zero() => (gx.saturating_add(gy), gy),
                ChartMap::PointX(_) => (gx.saturating_add(gy), 0),
            };
            s.merge_ghost(mapped.0, mapped.1);
        }
        match chart {
            ChartMap::PointY => {
                // x^i y^j ↦ x̃^i ỹ^{i+j}
                for (&(i, j), c) in &self.terms {
                    s.add_term(i, i + j, c);
                }
            }
            ChartMap::PointX(c0) => {
                // x^i y^j ↦ x̃^{i+j} (ỹ + c)^j = Σ_l C(j,l) c^{j-l} x̃^{i+j} ỹ^l
                let p = self.ctx.p();
                for (&(i, j), c) in &self.terms {
                    if c0.is_zero() {
                        s.add_term(i + j, j, c);
                        continue;
                    }
                    for l in 0..=j {
                        let binom = lucas_binomial(j as u64, l as u64, p);
                        if binom == 0 {
                            continue;
                        }
                        let coeff = c
                            .mul(&c0.pow((j - l) as u64))
                            .mul(&self.ctx.from_u32(binom));
                        s.add_term(i + j, l, &coeff);
                    }
                }
            }
        }
        s
    }
}

/// A dense homogeneous polynomial Σ_k c_k x^{d-k} y^k of degree d.
#[derive(Clone, PartialEq, Eq)]
pub struct HomogPoly {
    /// coeffs[k] is the coefficient of x^{d-k} y^k; length d + 1.
    coeffs: Vec<Fq>,
    ctx: Arc<FqCtx>,
}

impl fmt::Debug for HomogPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.degree();
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}*x^{}y^{k}", d as usize - k)?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl HomogPoly {
    pub fn new(ctx: &Arc<FqCtx>, coeffs: Vec<Fq>) -> HomogPoly {
        assert!(!coeffs.is_empty(), "degree must be determined");
        HomogPoly {
            coeffs,
            ctx: Arc::clone(ctx),
        }
    }

    pub fn ctx(&self) -> &Arc<FqCtx> {
        &self.ctx
    }

    pub fn degree(&self) -> u32 {
        (self.coeffs.len() - 1) as u32
    }

    /// coefficient of x^{d-k} y^k.
    pub fn coeff(&self, k: u32) -> &Fq {
        &self.coeffs[k as usize]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Minimal y-exponent with nonzero coefficient.
    pub fn ord_y(&self) -> Option<u32> {
        self.coeffs.iter().position(|c| !c.is_zero()).map(|k| k as u32)
    }

    /// Minimal x-exponent with nonzero coefficient.
    pub fn ord_x(&self) -> Option<u32> {
        self.coeffs
            .iter()
            .rposition(|c| !c.is_zero())
            .map(|k| self.degree() - k as u32)
    }

    /// Whether the polynomial is a p^e-th power of a homogeneous form.
    /// Because the Frobenius is bijective on F_{p^m}, this holds iff the
    /// degree and every exponent with nonzero coefficient are ≡ 0 mod p^e.
    pub fn is_pe_power(&self, pe: u32) -> bool {
        self.degree() % pe == 0
            && self
                .coeffs
                .iter()
                .enumerate()
                .all(|(k, c)| c.is_zero() || k as u32 % pe == 0)
    }

    /// The p^e-th root of a p^e-power form.
    pub fn pe_root(&self, p: u32, e: u32) -> Option<HomogPoly> {
        let pe = p.pow(e);
        if !self.is_pe_power(pe) {
            return None;
        }
        let d = self.degree() / pe;
        let mut coeffs = vec![self.ctx.zero(); d as usize + 1];
        for (k, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                coeffs[k / pe as usize] = c.pe_root(e);
            }
        }
        Some(HomogPoly {
            coeffs,
            ctx: Arc::clone(&self.ctx),
        })
    }

    pub fn mul(&self, other: &HomogPoly) -> HomogPoly {
        let d = self.degree() + other.degree();
        let mut coeffs = vec![self.ctx.zero(); d as usize + 1];
        for (k1, c1) in self.coeffs.iter().enumerate() {
            if c1.is_zero() {
                continue;
            }
            for (k2, c2) in other.coeffs.iter().enumerate() {
                if c2.is_zero() {
                    continue;
                }
                coeffs[k1 + k2] = coeffs[k1 + k2].add(&c1.mul(c2));
            }
        }
        HomogPoly {
            coeffs,
            ctx: Arc::clone(&self.ctx),
        }
    }

    pub fn scale(&self, c: &Fq) -> HomogPoly {
        HomogPoly {
            coeffs: self.coeffs.iter().map(|a| a.mul(c)).collect(),
            ctx: Arc::clone(&self.ctx),
        }
    }

    /// Exact division by the linear form (y - c·x); `None` when it does not
    /// divide.  Uses synthetic division in the variable y at x = 1:
    /// f(1, y) / (y - c) with the homogeneous grading restored afterwards.
    pub fn try_div_linear(&self, c: &Fq) -> Option<HomogPoly> {
        let d = self.degree();
        if d == 0 {
            return None;
        }
        // f = (y - cx) * q + r x^d with q homogeneous of degree d - 1.
        // Synthetic division from the top y-coefficient downwards.
        let mut q = vec![self.ctx.zero(); d as usize];
        let mut carry = self.ctx.zero();
        // coefficient of y^k in q: q_k; iterate k = d-1 down to 0:
        // f_k+1-coeff relation: f_{k+1} = q_k - c * q_{k+1}
        for k in (0..d as usize).rev() {
            let f_next = &self.coeffs[k + 1];
            let qk = f_next.add(&c.mul(&carry));
            q[k] = qk.clone();
            carry = qk;
        }
        // f_0 = -c * q_0 + remainder, so the remainder is f_0 + c·q_0 and
        // must vanish for exact division.
        let rem = self.coeffs[0].add(&c.mul(&q[0]));
        if !rem.is_zero() {
            return None;
        }
        Some(HomogPoly {
            coeffs: q,
            ctx: Arc::clone(&self.ctx),
        })
    }

    /// Exact division by x^r.
    pub fn try_div_x(&self, r: u32) -> Option<HomogPoly> {
        let d = self.degree();
        if r > d {
            return None;
        }
        // x^{d-k} has exponent >= r iff k <= d - r.
        if self.coeffs[(d - r + 1) as usize..].iter().any(|c| !c.is_zero()) {
            return None;
        }
        Some(HomogPoly {
            coeffs: self.coeffs[..=(d - r) as usize].to_vec(),
            ctx: Arc::clone(&self.ctx),
        })
    }

    /// Exact division by y^s.
    pub fn try_div_y(&self, s: u32) -> Option<HomogPoly> {
        let d = self.degree();
        if s > d {
            return None;
        }
        if self.coeffs[..s as usize].iter().any(|c| !c.is_zero()) {
            return None;
        }
        Some(HomogPoly {
            coeffs: self.coeffs[s as usize..].to_vec(),
            ctx: Arc::clone(&self.ctx),
        })
    }

    /// Evaluates f(1, v).
    pub fn eval_at_x1(&self, v: &Fq) -> Fq {
        let mut acc = self.ctx.zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(v).add(c);
        }
        acc
    }

    /// Converts to a series with the given precision.
    pub fn to_series(&self, prec: u32) -> BiSeries {
        let d = self.degree();
        BiSeries::from_terms(
            &self.ctx,
            prec,
            self.coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(k, c)| ((d - k as u32, k as u32), c.clone())),
        )
    }

    /// The univariate restriction f(1, 1 + t) as a dense coefficient vector
    /// in t of length d + 1.
    pub fn eval_shifted_line(&self) -> Vec<Fq> {
        // f(1, 1+t) = Σ_k c_k (1+t)^k = Σ_l [Σ_k c_k C(k,l)] t^l
        let d = self.degree() as usize;
        let p = self.ctx.p();
        let mut out = vec![self.ctx.zero(); d + 1];
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for (l, slot) in out.iter_mut().enumerate().take(k + 1) {
                let b = lucas_binomial(k as u64, l as u64, p);
                if b != 0 {
                    *slot = slot.add(&c.mul(&self.ctx.from_u32(b)));
                }
            }
        }
        out
    }
}
