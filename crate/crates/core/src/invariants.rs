//! Cleaning and the numerical invariants of a state.
//!
//! For a state h = z^{p^e} + a_1 z^{p^e-1} + … + a_{p^e} with boundary pair
//! (M, a), the fundamental quantities are
//!
//! * μ(P) = Σ m_D / a and μ(ξ_D) = m_D / a — the assigned weights;
//! * slope(P) = min{ord_P(a_{p^e})/p^e, μ(P)} and, per divisor,
//!   slope(ξ_D) = min{ord_{ξ_D}(a_{p^e})/p^e, μ(ξ_D)};
//! * H(P), H(ξ_D) — the same minima after *cleaning*, i.e. after z-shifts
//!   z ↦ z + φ remove every removable p^e-th power from the initial data.
//!
//! A divisor (resp. the point) is **good** when H equals its μ, **bad** when
//! H falls strictly short.  From the cleaned data the module computes the
//! tight monomial M_tight = ∏ x_D^{H(ξ_D)}, the usual monomial
//! M_usual = ∏ x_D^{m_D/a}, the residual orders ρ and w-ρ of bad divisors,
//! the main invariants inv♥ and inv♠, the legacy comparison tuple, the
//! center-selection value Γ, the singular-locus description, and the tight
//! case classification.
//!
//! Precision convention: a coefficient's stored terms are exact, and every
//! term ever dropped at a precision bound is remembered by the series as a
//! ghost bound on the degrees it may have had.  Total-degree decisions
//! (point slope, initial forms, residual orders on a pinned section) are
//! certified by the precision bound alone, because dropped terms always
//! carry total degree at least the bound.  Single-axis decisions (divisor
//! slopes and their sections) are certified against the ghost bound, since
//! a dropped term of huge total degree can still have a small degree on one
//! axis; `PrecisionExhausted` is raised exactly where a dropped term could
//! overturn the answer.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::field::Fq;
use crate::order::{GammaValue, OldTuple, SpadePair, Word};
use crate::rat::Rat;
use crate::series::{BiSeries, OrdBound};
use crate::state::{Axis, Configuration, MonomialState};

/// Errors raised by invariant computations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvariantError {
    #[error("precision exhausted: {what}")]
    PrecisionExhausted { what: String },
    #[error("divisor on the {axis} axis is good; residual orders are defined for bad divisors only")]
    NotBadDivisor { axis: Axis },
    #[error("no divisor on the {axis} axis passes through the point")]
    NoSuchDivisor { axis: Axis },
    #[error("tight characterization failed: {detail}")]
    CharacterizationMismatch { detail: String },
    #[error("cleaning did not stabilize within {rounds} rounds")]
    CleaningDiverged { rounds: u32 },
    #[error("cleaning left the validity conditions: {condition}")]
    CleaningBrokeValidity { condition: String },
    #[error("no boundary divisor passes through the point")]
    NoBoundary,
}

/// Which branch of min{ord/p^e, μ} attains the slope.  Ties go to `Mu`
/// (the order branch is reported only when strictly smaller).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeCase {
    Mu,
    Ord,
}

/// Good/bad classification of a point or divisor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Good,
    Bad,
}

/// Tight-case classification: `TypeI` when a_{p^e} = unit · (M_tight)^{p^e},
/// `TypeII` when M_tight = M_usual (all divisors good).  When both hold,
/// `TypeII` is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TightCase {
    NotTight,
    TypeI,
    TypeII,
}

/// The shape of the singular locus near the point, decided by whether each
/// divisor slope reaches 1 (an absent divisor counts as slope 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularLocusDesc {
    BothCurves,
    CurveX,
    CurveY,
    PointOnly,
}

impl fmt::Display for SingularLocusDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SingularLocusDesc::BothCurves => write!(f, "both curves"),
            SingularLocusDesc::CurveX => write!(f, "curve V(z,x)"),
            SingularLocusDesc::CurveY => write!(f, "curve V(z,y)"),
            SingularLocusDesc::PointOnly => write!(f, "the point alone"),
        }
    }
}

impl fmt::Display for TightCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TightCase::NotTight => write!(f, "not tight"),
            TightCase::TypeI => write!(f, "type I"),
            TightCase::TypeII => write!(f, "type II"),
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Good => write!(f, "good"),
            Classification::Bad => write!(f, "bad"),
        }
    }
}

/// Result of cleaning: the shifted state, the total shift φ (the cleaned
/// state is the original with z ↦ z + φ), and how many rounds ran.
#[derive(Debug, Clone)]
pub struct CleanReport {
    pub state: MonomialState,
    pub shift: BiSeries,
    pub rounds: u32,
}

/// Per-divisor slice of the invariant report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisorReport {
    pub axis: Axis,
    pub index: u32,
    pub m: u32,
    pub mu: Rat,
    pub h: Rat,
    pub bad: bool,
    /// Residual order of the divisor section (bad divisors only).
    pub res_ord: Option<u32>,
    pub rho: Option<Rat>,
    pub w_rho: Option<Rat>,
}

/// Every invariant of one cleaned state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub mu_p: Rat,
    pub h_p: Rat,
    pub slope_case: SlopeCase,
    pub point_good: bool,
    pub divisors: Vec<DivisorReport>,
    pub ord_m_tight: Rat,
    pub ord_m_usual: Rat,
    pub inv_heart: Rat,
    pub inv_spade: SpadePair,
    pub inv_old: OldTuple,
    pub configuration: Configuration,
    pub singular_locus: SingularLocusDesc,
    pub tight: TightCase,
    /// Center-selection value at the point over all divisors through it.
    pub gamma: GammaValue,
}

/// Cleaned state plus its full invariant report.
#[derive(Debug, Clone)]
pub struct StateAnalysis {
    pub cleaned: MonomialState,
    pub shift: BiSeries,
    pub rounds: u32,
    pub report: InvariantReport,
}

// ---------------------------------------------------------------------------
// Weights.
// ---------------------------------------------------------------------------

/// μ(P) = Σ m_D / a.
pub fn mu_point(state: &MonomialState) -> Rat {
    Rat::new(state.monomial.sum_m() as i64, state.a() as i64)
}

/// μ(ξ_D) = m_D / a for the divisor on `axis`.
pub fn mu_divisor(state: &MonomialState, axis: Axis) -> Result<Rat, InvariantError> {
    let d = state
        .monomial
        .divisor(axis)
        .ok_or(InvariantError::NoSuchDivisor { axis })?;
    Ok(Rat::new(d.m as i64, state.a() as i64))
}

// ---------------------------------------------------------------------------
// Slopes (pre-cleaning values; H is the same computation after cleaning).
// ---------------------------------------------------------------------------

/// slope(P) = min{ord_P(a_{p^e})/p^e, μ(P)}, with the attaining branch.
pub fn slope_point(state: &MonomialState) -> Result<(Rat, SlopeCase), InvariantError> {
    let mu = mu_point(state);
    let pe = state.pe() as i64;
    match state.hyp.last().ord() {
        OrdBound::AtLeast(bound) => {
            if Rat::new(bound as i64, pe) >= mu {
                Ok((mu, SlopeCase::Mu))
            } else {
                Err(InvariantError::PrecisionExhausted {
                    what: format!(
                        "a_{{p^e}} has no term below precision {bound} but μ = {mu} exceeds {bound}/p^e"
                    ),
                })
            }
        }
        OrdBound::Finite(o) => {
            let s = Rat::new(o as i64, pe);
            if s < mu {
                Ok((s, SlopeCase::Ord))
            } else {
                Ok((mu, SlopeCase::Mu))
            }
        }
    }
}

/// The certified order of a_{p^e} along the divisor axis: its x-order for
/// the x-axis divisor, y-order for the y-axis one.  `Ok(None)` when a_{p^e}
/// is certifiably zero; `Err(lb)` when a dropped term may undercut the
/// stored minimum and only the lower bound lb is certified.
fn axis_order(ape: &BiSeries, axis: Axis) -> Result<Option<u32>, u32> {
    match axis {
        Axis::X => ape.ord_x_certified(),
        Axis::Y => ape.ord_y_certified(),
    }
}

/// The divisor section: the order r along the axis together with the
/// coefficient series of the axis-variable^r layer, keyed by the exponent of
/// the *other* variable.  Reads the stored terms; callers reach it only
/// after [`slope_divisor`] certified the axis order.
fn axis_section(ape: &BiSeries, axis: Axis) -> Option<(u32, BTreeMap<u32, Fq>)> {
    match axis {
        Axis::X => ape.ord_x().map(|r| (r, ape.x_section(r))),
        Axis::Y => ape.ord_y().map(|s| (s, ape.y_section(s))),
    }
}

/// slope(ξ_D) = min{ord_{ξ_D}(a_{p^e})/p^e, μ(ξ_D)} with the attaining
/// branch, for the divisor on `axis`.
///
/// A certifiably zero a_{p^e} has infinite order, so the μ branch wins.
/// When only a lower bound on the axis order is certified, the μ branch is
/// still reported if even a dropped term could not undercut it; otherwise
/// the answer depends on discarded knowledge and the computation stops.
pub fn slope_divisor(
    state: &MonomialState,
    axis: Axis,
) -> Result<(Rat, SlopeCase), InvariantError> {
    let mu = mu_divisor(state, axis)?;
    let pe = state.pe() as i64;
    let ape = state.hyp.last();
    match axis_order(ape, axis) {
        Ok(None) => Ok((mu, SlopeCase::Mu)),
        Ok(Some(r)) => {
            let s = Rat::new(r as i64, pe);
            if s < mu {
                Ok((s, SlopeCase::Ord))
            } else {
                Ok((mu, SlopeCase::Mu))
            }
        }
        Err(lb) => {
            if Rat::new(lb as i64, pe) >= mu {
                Ok((mu, SlopeCase::Mu))
            } else {
                Err(InvariantError::PrecisionExhausted {
                    what: format!(
                        "the {axis}-order of a_{{p^e}} is only certified to be at least {lb}, \
                         and deciding min{{ord/p^e, μ(ξ_{axis}) = {mu}}} needs terms beyond the budget"
                    ),
                })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Well-adaptedness and cleaning.
// ---------------------------------------------------------------------------

/// `true` when nothing at the point can be absorbed by a z-shift:
/// either slope(P) = μ(P), or the initial form of a_{p^e} is not a
/// p^e-th power.
pub fn is_well_adapted_point(state: &MonomialState) -> Result<bool, InvariantError> {
    let (_, case) = slope_point(state)?;
    if case == SlopeCase::Mu {
        return Ok(true);
    }
    let inf = state
        .hyp
        .last()
        .initial_form()
        .expect("finite order implies a nonempty initial form");
    Ok(!inf.is_pe_power(state.pe()))
}

/// `true` when nothing along the divisor can be absorbed: either
/// slope(ξ_D) = μ(ξ_D), or the section x_D^r·g is not a p^e-th power
/// (which requires r ≡ 0 mod p^e and every exponent of g divisible by p^e;
/// coefficients always have roots over a finite field).
pub fn is_well_adapted_divisor(
    state: &MonomialState,
    axis: Axis,
) -> Result<bool, InvariantError> {
    let (_, case) = slope_divisor(state, axis)?;
    if case == SlopeCase::Mu {
        return Ok(true);
    }
    let pe = state.pe();
    let (r, g) = axis_section(state.hyp.last(), axis)
        .expect("finite axis order implies a nonempty section");
    Ok(!(r % pe == 0 && g.keys().all(|&j| j % pe == 0)))
}

/// Builds the series (v^r · g)^{1/p^e} where v is the axis variable and g is
/// the section in the other variable; exponents of v^r·g must all be
/// divisible by p^e.
fn section_root(
    state: &MonomialState,
    axis: Axis,
    r: u32,
    g: &BTreeMap<u32, Fq>,
) -> BiSeries {
    let ctx = state.ctx();
    let pe = state.pe();
    let e = state.e();
    let prec = state.hyp.last().prec().div_ceil(pe).max(1);
    let mut root = BiSeries::zero(ctx, prec);
    for (&j, c) in g {
        let (i2, j2) = match axis {
            Axis::X => (r / pe, j / pe),
            Axis::Y => (j / pe, r / pe),
        };
        root = root.add(&BiSeries::monomial(ctx, prec, i2, j2, c.pe_root(e)));
    }
    root
}

/// Residual order of the divisor section x_D^r·g: the least r + j over
/// section terms with (r, j) not ≡ (0, 0) mod p^e.  `None` when every stored
/// section term is p^e-power-graded.
fn section_res_ord(pe: u32, r: u32, g: &BTreeMap<u32, Fq>, axis: Axis) -> Option<u32> {
    let _ = axis;
    g.keys()
        .filter(|&&j| !(r % pe == 0 && j % pe == 0))
        .map(|&j| r + j)
        .min()
}

/// Computes the next cleaning shift, or `None` when the state is fully
/// cleaned: well-adapted at the point and every divisor, with every bad
/// divisor's section order equal to its residual order.
fn next_cleaning_shift(state: &MonomialState) -> Result<Option<BiSeries>, InvariantError> {
    let ctx = state.ctx();
    let pe = state.pe();
    let ape = state.hyp.last();

    // Point adaptation: absorb a p^e-th power initial form.
    let (_, case) = slope_point(state)?;
    if case == SlopeCase::Ord {
        let inf = ape.initial_form().expect("finite order");
        if inf.is_pe_power(pe) {
            let root = inf
                .pe_root(state.p(), state.e())
                .expect("power test passed");
            return Ok(Some(root.to_series(u32::MAX).neg()));
        }
    }

    // Divisor adaptation: absorb a p^e-th power section.
    for d in &state.monomial.divisors {
        let (_, dcase) = slope_divisor(state, d.axis)?;
        if dcase == SlopeCase::Ord {
            let (r, g) = axis_section(ape, d.axis).expect("finite axis order");
            if r % pe == 0 && g.keys().all(|&j| j % pe == 0) {
                return Ok(Some(section_root(state, d.axis, r, &g).neg()));
            }
        }
    }

    // Residual normalization, bad divisors only: shift away power-graded
    // section terms below the residual order until the section order itself
    // is residual.  Each such term is a single p^e-th power monomial.
    for d in &state.monomial.divisors {
        let (_, dcase) = slope_divisor(state, d.axis)?;
        if dcase != SlopeCase::Ord {
            continue;
        }
        let (r, g) = axis_section(ape, d.axis).expect("finite axis order");
        let res = section_res_ord(pe, r, &g, d.axis).ok_or_else(|| {
            InvariantError::PrecisionExhausted {
                what: format!(
                    "no residual term in the {} section below precision {}",
                    d.axis,
                    ape.prec()
                ),
            }
        })?;
        let (&j0, c0) = g.iter().next().expect("nonempty section");
        if r + j0 < res {
            // Below the residual order every term is power-graded.
            debug_assert!(r % pe == 0 && j0 % pe == 0);
            let (i2, j2) = match d.axis {
                Axis::X => (r / pe, j0 / pe),
                Axis::Y => (j0 / pe, r / pe),
            };
            let phi = BiSeries::monomial(ctx, u32::MAX, i2, j2, c0.pe_root(state.e()));
            return Ok(Some(phi.neg()));
        }
    }

    Ok(None)
}

/// Cleans the state: iterates z-shifts until it is well-adapted at the point
/// and all divisors simultaneously, and every bad divisor's section order
/// equals its residual order.  Each effective shift strictly increases an
/// order bounded by the precision, so the loop terminates; a generous fuse
/// guards against modeling bugs.
pub fn clean(state: &MonomialState) -> Result<CleanReport, InvariantError> {
    let ctx = state.ctx();
    let mut st = state.clone();
    let mut total = BiSeries::zero(ctx, u32::MAX);
    let mut rounds = 0u32;
    let fuse = state.prec.max(8).saturating_mul(8).saturating_add(64);
    while let Some(phi) = next_cleaning_shift(&st)? {
        st = st.shifted(&phi);
        total = total.add(&phi);
        rounds += 1;
        if rounds > fuse {
            return Err(InvariantError::CleaningDiverged { rounds });
        }
    }
    // Re-shaping the presentation must keep every validity condition (a
    // state that genuinely carries the claimed boundary data keeps them
    // automatically; a state that loses one here was never realizable and
    // its invariants would be meaningless).
    if rounds > 0 {
        let report = st.validate();
        if let Some(broken) = report
            .checks
            .iter()
            .find(|c| !c.passed && !c.condition.starts_with("monomial-weight"))
        {
            return Err(InvariantError::CleaningBrokeValidity {
                condition: match &broken.witness {
                    Some(w) => format!("{} — {w}", broken.condition),
                    None => broken.condition.clone(),
                },
            });
        }
    }
    Ok(CleanReport {
        state: st,
        shift: total,
        rounds,
    })
}

// ---------------------------------------------------------------------------
// H, classification, monomials — computed on cleaned states.
// ---------------------------------------------------------------------------

/// H(P): the point slope after cleaning.
pub fn h_point(state: &MonomialState) -> Result<Rat, InvariantError> {
    let cleaned = clean(state)?;
    Ok(slope_point(&cleaned.state)?.0)
}

/// H(ξ_D): the divisor slope after cleaning.
pub fn h_divisor(state: &MonomialState, axis: Axis) -> Result<Rat, InvariantError> {
    let cleaned = clean(state)?;
    Ok(slope_divisor(&cleaned.state, axis)?.0)
}

/// Good iff H(P) = μ(P).
pub fn classify_point(state: &MonomialState) -> Result<Classification, InvariantError> {
    let cleaned = clean(state)?;
    Ok(match slope_point(&cleaned.state)?.1 {
        SlopeCase::Mu => Classification::Good,
        SlopeCase::Ord => Classification::Bad,
    })
}

/// Good iff H(ξ_D) = μ(ξ_D).
pub fn classify_divisor(
    state: &MonomialState,
    axis: Axis,
) -> Result<Classification, InvariantError> {
    let cleaned = clean(state)?;
    Ok(match slope_divisor(&cleaned.state, axis)?.1 {
        SlopeCase::Mu => Classification::Good,
        SlopeCase::Ord => Classification::Bad,
    })
}

/// (ord_P(M_tight), ord_P(M_usual)) = (Σ H(ξ_D), μ(P)).
pub fn monomial_orders(state: &MonomialState) -> Result<(Rat, Rat), InvariantError> {
    let cleaned = clean(state)?;
    let mut tight = Rat::zero();
    for d in &cleaned.state.monomial.divisors {
        tight = tight + slope_divisor(&cleaned.state, d.axis)?.0;
    }
    Ok((tight, mu_point(&cleaned.state)))
}

/// ρ_D(P) = res-ord(x_D^r·g)/p^e − r/p^e for the bad divisor on `axis`.
pub fn rho(state: &MonomialState, axis: Axis) -> Result<Rat, InvariantError> {
    let cleaned = clean(state)?;
    divisor_residuals(&cleaned.state, axis).map(|(res, r, _)| {
        let pe = cleaned.state.pe() as i64;
        Rat::new(res as i64, pe) - Rat::new(r as i64, pe)
    })
}

/// w-ρ_D(P) = res-ord(x_D^r·g)/p^e − ord_P(M_tight) for the bad divisor on
/// `axis`.
pub fn w_rho(state: &MonomialState, axis: Axis) -> Result<Rat, InvariantError> {
    let cleaned = clean(state)?;
    let (res, _, _) = divisor_residuals(&cleaned.state, axis)?;
    let (tight, _) = monomial_orders(&cleaned.state)?;
    Ok(Rat::new(res as i64, cleaned.state.pe() as i64) - tight)
}

/// (residual order, section order r, section) of the bad divisor on `axis`,
/// on an already-cleaned state.
fn divisor_residuals(
    state: &MonomialState,
    axis: Axis,
) -> Result<(u32, u32, BTreeMap<u32, Fq>), InvariantError> {
    let (_, dcase) = slope_divisor(state, axis)?;
    if dcase != SlopeCase::Ord {
        return Err(InvariantError::NotBadDivisor { axis });
    }
    let ape = state.hyp.last();
    let (r, g) = axis_section(ape, axis).expect("finite axis order");
    let res = section_res_ord(state.pe(), r, &g, axis).ok_or_else(|| {
        InvariantError::PrecisionExhausted {
            what: format!(
                "no residual term in the {axis} section below precision {}",
                ape.prec()
            ),
        }
    })?;
    Ok((res, r, g))
}

// ---------------------------------------------------------------------------
// The main invariants.
// ---------------------------------------------------------------------------

/// inv♥ = H(P) − ord_P(M_tight).
pub fn inv_heart(state: &MonomialState) -> Result<Rat, InvariantError> {
    Ok(analyze(state)?.report.inv_heart)
}

/// inv♠: the pair {A, B} with A the ascending word of w-ρ over bad divisors
/// and B the single letter ord_P(M_usual) − ord_P(M_tight); Zero when either
/// word vanishes.
pub fn inv_spade(state: &MonomialState) -> Result<SpadePair, InvariantError> {
    Ok(analyze(state)?.report.inv_spade)
}

/// The legacy comparison tuple for the state's configuration.
pub fn inv_old(state: &MonomialState) -> Result<OldTuple, InvariantError> {
    Ok(analyze(state)?.report.inv_old)
}

/// Γ at a stratum: over nonempty subsets of the divisors on `axes`, find the
/// minimal size n whose best sum of H-values reaches 1; report
/// (−n, the maximal such sum, the maximal index tuple).  `NegInfinity` when
/// even the full sum stays below 1.
pub fn gamma_tight(state: &MonomialState, axes: &[Axis]) -> Result<GammaValue, InvariantError> {
    let analysis = analyze(state)?;
    Ok(gamma_from_divisors(
        &analysis
            .report
            .divisors
            .iter()
            .filter(|d| axes.contains(&d.axis))
            .map(|d| (d.index, d.h))
            .collect::<Vec<_>>(),
    ))
}

/// Γ from (index, H) pairs; subset enumeration is trivial at ≤ 2 divisors.
pub(crate) fn gamma_from_divisors(divs: &[(u32, Rat)]) -> GammaValue {
    let one = Rat::from_int(1);
    let mut best: Option<GammaValue> = None;
    let count = divs.len() as u32;
    for mask in 1u32..(1 << count) {
        let subset: Vec<&(u32, Rat)> = divs
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .map(|(_, d)| d)
            .collect();
        let sum = subset.iter().fold(Rat::zero(), |acc, d| acc + d.1);
        if sum < one {
            continue;
        }
        let mut indices: Vec<u32> = subset.iter().map(|d| d.0).collect();
        indices.sort_unstable_by(|a, b| b.cmp(a));
        let cand = GammaValue::Value {
            n: subset.len() as u32,
            h_sum: sum,
            indices,
        };
        let better = match &best {
            None => true,
            Some(b) => cand > *b,
        };
        if better {
            best = Some(cand);
        }
    }
    best.unwrap_or(GammaValue::NegInfinity)
}

/// The singular-locus description by (H(ξ_x) ≥ 1?, H(ξ_y) ≥ 1?); an absent
/// divisor counts as 0.
pub fn singular_locus(state: &MonomialState) -> Result<SingularLocusDesc, InvariantError> {
    Ok(analyze(state)?.report.singular_locus)
}

/// Tight-case classification; `CharacterizationMismatch` when inv♥ = 0 but
/// neither factorization validates (a modeling bug, not a math outcome).
pub fn tight_case(state: &MonomialState) -> Result<TightCase, InvariantError> {
    Ok(analyze(state)?.report.tight)
}

// ---------------------------------------------------------------------------
// One-stop analysis.
// ---------------------------------------------------------------------------

/// Cleans the state and computes every invariant from the cleaned data.
pub fn analyze(state: &MonomialState) -> Result<StateAnalysis, InvariantError> {
    let cleaned = clean(state)?;
    let st = &cleaned.state;
    let pe = st.pe() as i64;

    let mu_p = mu_point(st);
    let (h_p, slope_case) = slope_point(st)?;
    let point_good = slope_case == SlopeCase::Mu;

    let mut divisors = Vec::new();
    let mut flags = Vec::new();
    let mut ord_m_tight = Rat::zero();
    for d in &st.monomial.divisors {
        let mu = Rat::new(d.m as i64, st.a() as i64);
        let (h, dcase) = slope_divisor(st, d.axis)?;
        let bad = dcase == SlopeCase::Ord;
        flags.push(bad);
        ord_m_tight = ord_m_tight + h;
        divisors.push(DivisorReport {
            axis: d.axis,
            index: d.index,
            m: d.m,
            mu,
            h,
            bad,
            res_ord: None,
            rho: None,
            w_rho: None,
        });
    }
    let ord_m_usual = mu_p;

    for rep in divisors.iter_mut().filter(|r| r.bad) {
        let (res, r0, _) = divisor_residuals(st, rep.axis)?;
        rep.res_ord = Some(res);
        rep.rho = Some(Rat::new(res as i64, pe) - Rat::new(r0 as i64, pe));
        rep.w_rho = Some(Rat::new(res as i64, pe) - ord_m_tight);
    }

    let inv_heart = h_p - ord_m_tight;

    let a_letters: Vec<Rat> = {
        let mut v: Vec<Rat> = divisors.iter().filter_map(|d| d.w_rho).collect();
        v.sort();
        v
    };
    let inv_spade = SpadePair::from_words(
        Word(a_letters),
        Word::single(ord_m_usual - ord_m_tight),
    );

    let configuration =
        Configuration::from_flags(&flags).map_err(|_| InvariantError::NoBoundary)?;

    let inv_old = old_tuple(configuration, &divisors);

    let gamma = gamma_from_divisors(
        &divisors.iter().map(|d| (d.index, d.h)).collect::<Vec<_>>(),
    );

    let one = Rat::from_int(1);
    let hx = divisors
        .iter()
        .find(|d| d.axis == Axis::X)
        .map(|d| d.h)
        .unwrap_or_else(Rat::zero);
    let hy = divisors
        .iter()
        .find(|d| d.axis == Axis::Y)
        .map(|d| d.h)
        .unwrap_or_else(Rat::zero);
    let singular_locus = match (hx >= one, hy >= one) {
        (true, true) => SingularLocusDesc::BothCurves,
        (true, false) => SingularLocusDesc::CurveX,
        (false, true) => SingularLocusDesc::CurveY,
        (false, false) => SingularLocusDesc::PointOnly,
    };

    let tight = classify_tight(st, &divisors, inv_heart, ord_m_tight)?;

    Ok(StateAnalysis {
        cleaned: st.clone(),
        shift: cleaned.shift,
        rounds: cleaned.rounds,
        report: InvariantReport {
            mu_p,
            h_p,
            slope_case,
            point_good,
            divisors,
            ord_m_tight,
            ord_m_usual,
            inv_heart,
            inv_spade,
            inv_old,
            configuration,
            singular_locus,
            tight,
            gamma,
        },
    })
}

/// The legacy tuple rows, by configuration.  Rows with a single bad divisor
/// use that divisor's ρ and μ.
fn old_tuple(config: Configuration, divisors: &[DivisorReport]) -> OldTuple {
    let zero = Rat::zero();
    match config {
        Configuration::OneGood => {
            let d = &divisors[0];
            OldTuple(vec![zero, zero, d.mu])
        }
        Configuration::TwoGood => {
            let m0 = divisors[0].mu;
            let m1 = divisors[1].mu;
            OldTuple(vec![zero, zero, m0.min(m1), m0.max(m1)])
        }
        Configuration::OneBad => {
            let d = &divisors[0];
            OldTuple(vec![d.rho.expect("bad divisor has rho"), zero, d.mu])
        }
        Configuration::OneBadOneGood => {
            let d = divisors.iter().find(|d| d.bad).expect("one bad divisor");
            let r = d.rho.expect("bad divisor has rho");
            OldTuple(vec![r.min(d.mu), r.max(d.mu)])
        }
        Configuration::TwoBad => {
            let r0 = divisors[0].rho.expect("bad divisor has rho");
            let r1 = divisors[1].rho.expect("bad divisor has rho");
            OldTuple(vec![r0.min(r1), r0.max(r1)])
        }
    }
}

/// Tight classification on a cleaned state with its divisor reports.
fn classify_tight(
    st: &MonomialState,
    divisors: &[DivisorReport],
    inv_heart: Rat,
    ord_m_tight: Rat,
) -> Result<TightCase, InvariantError> {
    if !inv_heart.is_zero() {
        return Ok(TightCase::NotTight);
    }
    // Type II: M_tight = M_usual, i.e. every divisor good.
    if divisors.iter().all(|d| !d.bad) {
        return Ok(TightCase::TypeII);
    }
    // Type I: a_{p^e} = unit · (M_tight)^{p^e} with integral exponents
    // H(ξ_D)·p^e.
    let pe = st.pe();
    let exps: Option<Vec<(Axis, u32)>> = divisors
        .iter()
        .map(|d| {
            let scaled = d.h * Rat::from_int(pe as i64);
            if scaled.is_integer() && !scaled.is_negative() {
                Some((d.axis, scaled.numer() as u32))
            } else {
                None
            }
        })
        .collect();
    let Some(exps) = exps else {
        return Err(InvariantError::CharacterizationMismatch {
            detail: "inv♥ = 0 with a non-integral tight exponent H(ξ_D)·p^e".into(),
        });
    };
    let ape = st.hyp.last();
    if ape.ord() != OrdBound::Finite((ord_m_tight * Rat::from_int(pe as i64)).numer() as u32) {
        return Err(InvariantError::CharacterizationMismatch {
            detail: "inv♥ = 0 but ord(a_{p^e}) ≠ ord(M_tight)·p^e".into(),
        });
    }
    let mut q = ape.clone();
    for (axis, k) in exps {
        let divided = match axis {
            Axis::X => q.try_div_x(k),
            Axis::Y => q.try_div_y(k),
        };
        match divided {
            Ok(d) => q = d,
            Err(crate::series::DivBlock::Witness { .. }) => {
                return Err(InvariantError::CharacterizationMismatch {
                    detail: format!("(M_tight)^{{p^e}} does not divide a_{{p^e}} on the {axis} axis"),
                })
            }
            Err(crate::series::DivBlock::Knowledge) => {
                return Err(InvariantError::PrecisionExhausted {
                    what: format!(
                        "dividing a_{{p^e}} by the tight monomial on the {axis} axis \
                         is not certified within the budget"
                    ),
                })
            }
        }
    }
    if q.coeff(0, 0).is_zero() {
        return Err(InvariantError::CharacterizationMismatch {
            detail: "quotient a_{p^e}/(M_tight)^{p^e} is not a unit".into(),
        });
    }
    Ok(TightCase::TypeI)
}
