//! Blow-up transforms of game states.
//!
//! Three kinds of center occur in the resolution game:
//!
//! * a **point** blow-up at the distinguished point P, followed by the
//!   choice of a point on the exceptional fiber (the y-chart origin or an
//!   x-chart point at a direction c from the base field),
//! * a **curve** blow-up along V(z, x_D) for a boundary divisor D whose
//!   adapted slope is at least 1 (so that the curve lies inside the
//!   singular locus), and
//! * a **gamma-directed** blow-up in the tight phase, whose center is the
//!   intersection of V(z) with the divisors named by the maximizing subset
//!   (one divisor: a curve; two divisors: the point).
//!
//! Every transform rewrites the Weierstrass data exactly: substitute the
//! chart map into each coefficient, divide a_i by the i-th power of the
//! chart variable, and update the boundary monomial.  The exceptional
//! divisor enters with exponent Σ_{D∋P} m_D − a and the largest index seen
//! so far; strict transforms of old divisors are kept exactly when they
//! pass through the new point.  The result is judged before it is
//! returned: a point outside the singular locus is [`Outcome::NotSingular`],
//! a point where the z-multiplicity degrades is [`Outcome::SigmaDrop`], and
//! a surviving state is cleaned and returned as [`Outcome::NewState`].
//!
//! Precision: substitution keeps the knowledge bound and division by the
//! i-th power lowers it by i, so the raw transform costs exactly p^e of the
//! (cleaned) parent's budget; the cleaning of the result can only spend
//! more, never recover any, so a child's budget is at most the parent's
//! minus p^e.  Precision failures inside a single candidate surface as
//! [`Outcome::PrecisionExhausted`]; failures while preparing the input of a
//! list-returning transform surface as the corresponding invariant error.

use std::fmt;

use crate::field::Fq;
use crate::invariants::{self, InvariantError, SingularLocusDesc, TightCase};
use crate::rat::Rat;
use crate::series::{BiSeries, ChartMap, DivBlock, OrdBound};
use crate::state::{Axis, DivisorInfo, Hypersurface, MonomialData, MonomialState};

/// A blow-up center.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Center {
    /// The distinguished point itself.
    Point,
    /// The curve V(z, x_D) on the given axis.
    Curve(Axis),
    /// The gamma-directed center: V(z) intersected with the named divisors.
    Gamma(Vec<Axis>),
}

impl fmt::Display for Center {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Center::Point => write!(f, "point"),
            Center::Curve(ax) => write!(f, "curve-{ax}"),
            Center::Gamma(axes) => {
                write!(f, "gamma[")?;
                for (n, ax) in axes.iter().enumerate() {
                    if n > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{ax}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// A candidate point on the exceptional fiber of a point blow-up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FiberPoint {
    /// The origin of the chart (z/y, x/y, y); the only fiber point not
    /// covered by the x-charts.
    YChartOrigin,
    /// The origin of the chart (z/x, x, y/x − c): the direction y/x = c.
    XChart(Fq),
}

impl fmt::Display for FiberPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FiberPoint::YChartOrigin => write!(f, "y-chart origin"),
            FiberPoint::XChart(c) => write!(f, "x-chart(c={c})"),
        }
    }
}

/// What a transform produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// The game continues at the new point with the cleaned transformed
    /// state.
    NewState(MonomialState),
    /// The candidate point is not in the singular locus (the z-multiplicity
    /// strictly dropped there, or the boundary monomial no longer reaches
    /// the level a).
    NotSingular,
    /// The point stays singular but the Weierstrass orders hit their bounds
    /// exactly, so the multiplicity invariant of the ambient problem
    /// strictly improves; this run of the game is won.
    SigmaDrop,
    /// The stored precision cannot certify the outcome.
    PrecisionExhausted,
}

impl Outcome {
    /// The new state, if the game continues.
    pub fn state(&self) -> Option<&MonomialState> {
        match self {
            Outcome::NewState(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::NewState(_) => write!(f, "new state"),
            Outcome::NotSingular => write!(f, "not singular"),
            Outcome::SigmaDrop => write!(f, "sigma drop"),
            Outcome::PrecisionExhausted => write!(f, "precision exhausted"),
        }
    }
}

/// Errors for transforms applied to inputs that break their contract.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BlowupError {
    /// An exact division failed, or an exceptional multiplicity came out
    /// negative: the input state violates the coefficient-control or
    /// membership conditions.
    #[error("division failure: {what}")]
    DivisionFailure { what: String },
    /// The requested center is not contained in the singular locus.
    #[error("center not permissible: {what}")]
    NotPermissible { what: String },
    /// A gamma-directed transform was requested on a state that is not
    /// tight (its heart invariant is nonzero).
    #[error("state is not tight")]
    NotTight,
    /// An invariant computation on the input failed.
    #[error(transparent)]
    Invariant(#[from] InvariantError),
}

/// Internal: which judgement rules apply to a transformed state.
///
/// After a point blow-up the candidate is one point of a whole fiber, so a
/// strict multiplicity drop just means this candidate is outside the
/// singular locus.  After a curve blow-up there is a single distinguished
/// candidate and the center was contained in the singular locus, so any
/// degradation of the Weierstrass orders means the multiplicity invariant
/// dropped along the whole fiber.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Flavor {
    Curve,
    Point,
}

enum Prepped {
    Ready(MonomialState),
    Halt(Outcome),
}

/// Cleans the input state, mapping a precision failure to a halting
/// outcome.
fn prepared(state: &MonomialState) -> Result<Prepped, BlowupError> {
    match invariants::clean(state) {
        Ok(rep) => Ok(Prepped::Ready(rep.state)),
        Err(InvariantError::PrecisionExhausted { .. }) => {
            Ok(Prepped::Halt(Outcome::PrecisionExhausted))
        }
        Err(e) => Err(e.into()),
    }
}

fn div_axis(s: &BiSeries, axis: Axis, k: u32) -> Result<BiSeries, DivBlock> {
    match axis {
        Axis::X => s.try_div_x(k),
        Axis::Y => s.try_div_y(k),
    }
}

/// Judges a freshly transformed state and cleans it if the game continues.
fn finalize(
    hyp: Hypersurface,
    monomial: MonomialData,
    year: u32,
    flavor: Flavor,
) -> Result<Outcome, BlowupError> {
    let pe = hyp.pe();
    let p = hyp.p();
    let e = hyp.e();

    // Coefficients a_1..a_{p^e-1}: the Weierstrass orders must stay strict.
    for i in 1..pe {
        match hyp.coeff(i).ord() {
            OrdBound::AtLeast(b) if b <= i => return Ok(Outcome::PrecisionExhausted),
            OrdBound::Finite(o) if o < i => {
                return Ok(match flavor {
                    Flavor::Curve => Outcome::SigmaDrop,
                    Flavor::Point => Outcome::NotSingular,
                });
            }
            OrdBound::Finite(o) if o == i => return Ok(Outcome::SigmaDrop),
            _ => {}
        }
    }

    // Boundary membership: the monomial part of the singular locus needs
    // Σ m_D ≥ a at the point.
    if monomial.sum_m() < monomial.a {
        return Ok(Outcome::NotSingular);
    }

    // The last coefficient.  An order of exactly p^e whose initial form is
    // the p^e-th power of a linear form ℓ is a coordinate artifact: the
    // shift z ↦ z − ℓ removes it (re-preparation).  Anything else at or
    // below p^e is a genuine degradation.
    let mut hyp = hyp;
    let mut prev_ord: Option<u32> = None;
    loop {
        match hyp.last().ord() {
            OrdBound::AtLeast(b) if b <= pe => return Ok(Outcome::PrecisionExhausted),
            OrdBound::Finite(o) if o < pe => {
                return Ok(match flavor {
                    Flavor::Curve => Outcome::SigmaDrop,
                    Flavor::Point => Outcome::NotSingular,
                });
            }
            OrdBound::Finite(o) if o == pe => {
                if prev_ord == Some(o) {
                    // A re-preparation shift must strictly raise the order;
                    // if it did not, the degradation is genuine.
                    return Ok(Outcome::SigmaDrop);
                }
                let inf = hyp.last().initial_form().expect("finite order has terms");
                match inf.pe_root(p, e) {
                    Some(root) => {
                        let phi = root.to_series(u32::MAX).neg();
                        prev_ord = Some(o);
                        hyp = hyp.shift(&phi);
                    }
                    None => return Ok(Outcome::SigmaDrop),
                }
            }
            _ => break,
        }
    }

    let state = MonomialState::new(hyp, monomial, year);
    match invariants::clean(&state) {
        Ok(rep) => Ok(Outcome::NewState(rep.state)),
        Err(InvariantError::PrecisionExhausted { .. }) => Ok(Outcome::PrecisionExhausted),
        Err(e) => Err(e.into()),
    }
}

/// Core of the curve blow-up, on an already cleaned state whose divisor on
/// `axis` has adapted slope ≥ 1.
fn curve_transform(cleaned: &MonomialState, axis: Axis) -> Result<Outcome, BlowupError> {
    let pe = cleaned.pe();
    if cleaned.prec <= pe {
        return Ok(Outcome::PrecisionExhausted);
    }

    // Strict transform: in the surviving chart the substitution is
    // z = z̃·x_D with x_D and the other variable unchanged, so the i-th
    // coefficient just divides by x_D^i.
    let mut coeffs = Vec::with_capacity(pe as usize);
    for i in 1..=pe {
        let ai = cleaned.hyp.coeff(i);
        match div_axis(ai, axis, i) {
            Ok(q) => coeffs.push(q),
            Err(DivBlock::Knowledge) => return Ok(Outcome::PrecisionExhausted),
            Err(DivBlock::Witness { .. }) => {
                return Err(BlowupError::DivisionFailure {
                    what: format!("{axis}^{i} does not divide a_{i}"),
                });
            }
        }
    }

    // The old divisor on `axis` contains the center; its place is taken by
    // the fresh exceptional divisor with exponent m − a (gone when 0).
    // The other divisor meets the new point and survives unchanged.
    let old = cleaned
        .monomial
        .divisor(axis)
        .expect("permissibility guarantees the divisor exists");
    let m_new = old
        .m
        .checked_sub(cleaned.a())
        .ok_or_else(|| BlowupError::DivisionFailure {
            what: format!("exceptional multiplicity {} - {} is negative", old.m, cleaned.a()),
        })?;
    let fresh = cleaned.monomial.next_index();
    let mut divisors: Vec<DivisorInfo> = cleaned
        .monomial
        .divisors
        .iter()
        .filter(|d| d.axis != axis)
        .cloned()
        .collect();
    if m_new > 0 {
        divisors.push(DivisorInfo {
            axis,
            index: fresh,
            m: m_new,
        });
    }

    let hyp = Hypersurface::new(cleaned.p(), cleaned.e(), coeffs).expect("count preserved");
    let monomial = MonomialData {
        a: cleaned.a(),
        divisors,
    };
    finalize(hyp, monomial, cleaned.year + 1, Flavor::Curve)
}

/// Core of the point blow-up at one fiber candidate, on an already cleaned
/// state.
fn point_transform(cleaned: &MonomialState, fiber: &FiberPoint) -> Result<Outcome, BlowupError> {
    let pe = cleaned.pe();
    if cleaned.prec <= pe {
        return Ok(Outcome::PrecisionExhausted);
    }

    let (chart, chart_axis) = match fiber {
        FiberPoint::YChartOrigin => (ChartMap::PointY, Axis::Y),
        FiberPoint::XChart(c) => (ChartMap::PointX(c.clone()), Axis::X),
    };

    let mut coeffs = Vec::with_capacity(pe as usize);
    for i in 1..=pe {
        let sub = cleaned.hyp.coeff(i).blowup_substitute(&chart);
        match div_axis(&sub, chart_axis, i) {
            Ok(q) => coeffs.push(q),
            Err(DivBlock::Knowledge) => return Ok(Outcome::PrecisionExhausted),
            Err(DivBlock::Witness { .. }) => {
                return Err(BlowupError::DivisionFailure {
                    what: format!("chart variable^{i} does not divide the transform of a_{i}"),
                });
            }
        }
    }

    // Exceptional multiplicity: all current divisors pass through P.
    let m_f = cleaned
        .monomial
        .sum_m()
        .checked_sub(cleaned.a())
        .ok_or_else(|| BlowupError::DivisionFailure {
            what: format!(
                "exceptional multiplicity {} - {} is negative",
                cleaned.monomial.sum_m(),
                cleaned.a()
            ),
        })?;
    let fresh = cleaned.monomial.next_index();

    // Strict transforms through the new point: the y-chart origin lies on
    // the old x-divisor, the x-chart at direction 0 lies on the old
    // y-divisor, and an x-chart at a nonzero direction lies on neither.
    let mut divisors: Vec<DivisorInfo> = Vec::new();
    match fiber {
        FiberPoint::YChartOrigin => {
            if let Some(d) = cleaned.monomial.divisor(Axis::X) {
                divisors.push(d.clone());
            }
            if m_f > 0 {
                divisors.push(DivisorInfo {
                    axis: Axis::Y,
                    index: fresh,
                    m: m_f,
                });
            }
        }
        FiberPoint::XChart(c) => {
            if c.is_zero() {
                if let Some(d) = cleaned.monomial.divisor(Axis::Y) {
                    divisors.push(d.clone());
                }
            }
            if m_f > 0 {
                divisors.push(DivisorInfo {
                    axis: Axis::X,
                    index: fresh,
                    m: m_f,
                });
            }
        }
    }

    let hyp = Hypersurface::new(cleaned.p(), cleaned.e(), coeffs).expect("count preserved");
    let monomial = MonomialData {
        a: cleaned.a(),
        divisors,
    };
    finalize(hyp, monomial, cleaned.year + 1, Flavor::Point)
}

/// Checks that the curve V(z, x_D) is a permissible center: the divisor
/// exists and its adapted slope is at least 1.
fn check_curve_permissible(cleaned: &MonomialState, axis: Axis) -> Result<Option<Outcome>, BlowupError> {
    match invariants::h_divisor(cleaned, axis) {
        Ok(h) => {
            if h < Rat::from_int(1) {
                return Err(BlowupError::NotPermissible {
                    what: format!("curve on {axis} has adapted slope {h} < 1"),
                });
            }
            Ok(None)
        }
        Err(InvariantError::NoSuchDivisor { axis }) => Err(BlowupError::NotPermissible {
            what: format!("no divisor on axis {axis}"),
        }),
        Err(InvariantError::PrecisionExhausted { .. }) => Ok(Some(Outcome::PrecisionExhausted)),
        Err(e) => Err(e.into()),
    }
}

/// Blows up the curve V(z, x_D) on the given axis.
///
/// Requires the divisor's adapted slope to be at least 1 (so that the curve
/// lies inside the singular locus).  The single distinguished candidate is
/// the origin of the surviving chart; the outcome describes the game there.
pub fn transform_curve(state: &MonomialState, axis: Axis) -> Result<Outcome, BlowupError> {
    let cleaned = match prepared(state)? {
        Prepped::Ready(s) => s,
        Prepped::Halt(o) => return Ok(o),
    };
    if let Some(halt) = check_curve_permissible(&cleaned, axis)? {
        return Ok(halt);
    }
    curve_transform(&cleaned, axis)
}

/// Blows up the distinguished point and moves to the given fiber candidate.
///
/// Requires the singular locus to be the point alone; one-dimensional loci
/// are handled by [`transform_curve`].
pub fn transform_point(state: &MonomialState, fiber: &FiberPoint) -> Result<Outcome, BlowupError> {
    let cleaned = match prepared(state)? {
        Prepped::Ready(s) => s,
        Prepped::Halt(o) => return Ok(o),
    };
    match invariants::singular_locus(&cleaned) {
        Ok(SingularLocusDesc::PointOnly) => {}
        Ok(desc) => {
            return Err(BlowupError::NotPermissible {
                what: format!("singular locus is {desc}, not the point alone"),
            });
        }
        Err(InvariantError::PrecisionExhausted { .. }) => {
            return Ok(Outcome::PrecisionExhausted);
        }
        Err(e) => return Err(e.into()),
    }
    point_transform(&cleaned, fiber)
}

/// All candidates on the exceptional fiber of the point blow-up, in the
/// fixed order: the y-chart origin first, then the x-chart directions in
/// field enumeration order.  Candidates outside the singular locus are
/// dropped; an empty list means the blow-up resolved the point.
pub fn enumerate_fiber(state: &MonomialState) -> Result<Vec<(FiberPoint, Outcome)>, BlowupError> {
    let cleaned = match prepared(state)? {
        Prepped::Ready(s) => s,
        Prepped::Halt(Outcome::PrecisionExhausted) => {
            return Err(InvariantError::PrecisionExhausted {
                what: "cleaning the parent state".into(),
            }
            .into());
        }
        Prepped::Halt(_) => unreachable!("prepared only halts on precision"),
    };
    match invariants::singular_locus(&cleaned)? {
        SingularLocusDesc::PointOnly => {}
        desc => {
            return Err(BlowupError::NotPermissible {
                what: format!("singular locus is {desc}, not the point alone"),
            });
        }
    }
    fiber_candidates(&cleaned)
}

fn fiber_candidates(cleaned: &MonomialState) -> Result<Vec<(FiberPoint, Outcome)>, BlowupError> {
    let mut fibers = vec![FiberPoint::YChartOrigin];
    fibers.extend(cleaned.ctx().clone().elements().map(FiberPoint::XChart));
    let mut out = Vec::new();
    for f in fibers {
        let o = point_transform(cleaned, &f)?;
        if !matches!(o, Outcome::NotSingular) {
            out.push((f, o));
        }
    }
    Ok(out)
}

/// Blows up the gamma-directed center of a tight state.
///
/// One named divisor gives the codimension-two center V(z, x_D) with its
/// single candidate (labelled by the surviving chart's origin); two give
/// the point blow-up with the full fiber.  Candidates outside the singular
/// locus are dropped.
pub fn transform_gamma(
    state: &MonomialState,
    axes: &[Axis],
) -> Result<Vec<(FiberPoint, Outcome)>, BlowupError> {
    let cleaned = match prepared(state)? {
        Prepped::Ready(s) => s,
        Prepped::Halt(_) => {
            return Err(InvariantError::PrecisionExhausted {
                what: "cleaning the parent state".into(),
            }
            .into());
        }
    };
    match invariants::tight_case(&cleaned)? {
        TightCase::NotTight => return Err(BlowupError::NotTight),
        TightCase::TypeI | TightCase::TypeII => {}
    }
    for ax in axes {
        if cleaned.monomial.divisor(*ax).is_none() {
            return Err(BlowupError::NotPermissible {
                what: format!("no divisor on axis {ax}"),
            });
        }
    }
    match axes {
        [axis] => {
            if let Some(halt) = check_curve_permissible(&cleaned, *axis)? {
                let label = match axis {
                    Axis::X => FiberPoint::XChart(cleaned.ctx().zero()),
                    Axis::Y => FiberPoint::YChartOrigin,
                };
                return Ok(vec![(label, halt)]);
            }
            let outcome = curve_transform(&cleaned, *axis)?;
            let label = match axis {
                Axis::X => FiberPoint::XChart(cleaned.ctx().zero()),
                Axis::Y => FiberPoint::YChartOrigin,
            };
            if matches!(outcome, Outcome::NotSingular) {
                Ok(vec![])
            } else {
                Ok(vec![(label, outcome)])
            }
        }
        [a1, a2] if a1 != a2 => fiber_candidates(&cleaned),
        _ => Err(BlowupError::NotPermissible {
            what: "gamma center must name one or two distinct divisors".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FqCtx;
    use crate::invariants::{
        analyze, classify_divisor, h_divisor, inv_spade, tight_case, Classification,
    };
    use crate::order::SpadePair;
    use std::sync::Arc;

    fn f2() -> Arc<FqCtx> {
        FqCtx::new(2, 1).unwrap()
    }

    /// p = 2, e = 1, a_2 = x^4 + x^3 y^2, one x-divisor with m = 5, a = 2.
    fn running(prec: u32) -> MonomialState {
        let ctx = f2();
        let a1 = BiSeries::zero(&ctx, prec);
        let a2 = BiSeries::from_terms(
            &ctx,
            prec,
            [((4, 0), ctx.one()), ((3, 2), ctx.one())],
        );
        MonomialState::new(
            Hypersurface::new(2, 1, vec![a1, a2]).unwrap(),
            MonomialData {
                a: 2,
                divisors: vec![DivisorInfo {
                    axis: Axis::X,
                    index: 0,
                    m: 5,
                }],
            },
            0,
        )
    }

    /// p = 2, e = 1, a_2 = x^3 y + x y^3 (two bad divisors, bad point).
    fn flagship(prec: u32) -> MonomialState {
        let ctx = f2();
        let a1 = BiSeries::zero(&ctx, prec);
        let a2 = BiSeries::from_terms(
            &ctx,
            prec,
            [((3, 1), ctx.one()), ((1, 3), ctx.one())],
        );
        MonomialState::new(
            Hypersurface::new(2, 1, vec![a1, a2]).unwrap(),
            MonomialData {
                a: 2,
                divisors: vec![
                    DivisorInfo {
                        axis: Axis::X,
                        index: 0,
                        m: 5,
                    },
                    DivisorInfo {
                        axis: Axis::Y,
                        index: 1,
                        m: 5,
                    },
                ],
            },
            0,
        )
    }

    #[test]
    fn curve_step_on_running_fixture() {
        let st = running(32);
        let spade_before = inv_spade(&st).unwrap();
        let out = transform_curve(&st, Axis::X).unwrap();
        let new = out.state().expect("game continues");

        let ctx = f2();
        let a2 = new.hyp.last();
        assert_eq!(a2.num_terms(), 1);
        assert_eq!(a2.coeff(1, 2), ctx.one());
        assert_eq!(new.prec, 30);
        assert_eq!(new.year, 1);

        // The x-divisor is replaced by the fresh exceptional with m = 3.
        assert_eq!(new.monomial.divisors.len(), 1);
        let d = &new.monomial.divisors[0];
        assert_eq!(d.axis, Axis::X);
        assert_eq!(d.index, 1);
        assert_eq!(d.m, 3);

        let analysis = analyze(new).unwrap();
        assert_eq!(h_divisor(new, Axis::X).unwrap(), Rat::new(1, 2));
        let dx = &analysis.report.divisors[0];
        assert_eq!(dx.w_rho, Some(Rat::from_int(1)));
        assert_eq!(analysis.report.inv_spade, spade_before);
        assert!(matches!(spade_before, SpadePair::Pair { .. }));
    }

    #[test]
    fn curve_step_sigma_drop_at_unit_quotient() {
        // a_2 = x^2·(1 + y) with divisor slope exactly 1.  Cleaning first
        // normalizes the residually even term x^2 away (a_2 becomes x^2 y);
        // the division by x^2 then leaves order 1 < p^e, so the
        // multiplicity degrades along the fiber.
        let ctx = f2();
        let a1 = BiSeries::zero(&ctx, 16);
        let a2 = BiSeries::from_terms(&ctx, 16, [((2, 0), ctx.one()), ((2, 1), ctx.one())]);
        let st = MonomialState::new(
            Hypersurface::new(2, 1, vec![a1, a2]).unwrap(),
            MonomialData {
                a: 2,
                divisors: vec![DivisorInfo {
                    axis: Axis::X,
                    index: 0,
                    m: 4,
                }],
            },
            0,
        );
        assert_eq!(h_divisor(&st, Axis::X).unwrap(), Rat::from_int(1));
        let out = transform_curve(&st, Axis::X).unwrap();
        assert_eq!(out, Outcome::SigmaDrop);
    }

    #[test]
    fn curve_step_divisor_exit() {
        // m_x = a = 2: the exceptional multiplicity is 0, the x-divisor
        // exits, and the y-divisor keeps the locus alive.
        let ctx = f2();
        let a1 = BiSeries::zero(&ctx, 16);
        let a2 = BiSeries::monomial(&ctx, 16, 3, 3, ctx.one());
        let st = MonomialState::new(
            Hypersurface::new(2, 1, vec![a1, a2]).unwrap(),
            MonomialData {
                a: 2,
                divisors: vec![
                    DivisorInfo {
                        axis: Axis::X,
                        index: 0,
                        m: 2,
                    },
                    DivisorInfo {
                        axis: Axis::Y,
                        index: 1,
                        m: 3,
                    },
                ],
            },
            0,
        );
        assert_eq!(h_divisor(&st, Axis::X).unwrap(), Rat::from_int(1));
        let out = transform_curve(&st, Axis::X).unwrap();
        let new = out.state().expect("continues on the y-divisor");
        assert_eq!(new.monomial.divisors.len(), 1);
        assert_eq!(new.monomial.divisors[0].axis, Axis::Y);
        assert_eq!(new.monomial.divisors[0].m, 3);
        // a_2 = x^3 y^3 / x^2 = x y^3.
        assert_eq!(new.hyp.last().coeff(1, 3), ctx.one());
        assert_eq!(new.hyp.last().num_terms(), 1);
    }

    #[test]
    fn curve_step_not_singular_when_monomial_level_fails() {
        // Single divisor with m = 3, a = 2: after the step m̃ = 1 < a, so
        // the singular locus is empty near the new point.
        let ctx = f2();
        let a1 = BiSeries::zero(&ctx, 16);
        let a2 = BiSeries::monomial(&ctx, 16, 3, 0, ctx.one());
        let st = MonomialState::new(
            Hypersurface::new(2, 1, vec![a1, a2]).unwrap(),
            MonomialData {
                a: 2,
                divisors: vec![DivisorInfo {
                    axis: Axis::X,
                    index: 0,
                    m: 3,
                }],
            },
            0,
        );
        assert_eq!(h_divisor(&st, Axis::X).unwrap(), Rat::new(3, 2));
        let out = transform_curve(&st, Axis::X).unwrap();
        assert_eq!(out, Outcome::NotSingular);
    }

    #[test]
    fn curve_step_rejects_shallow_divisor() {
        let st = flagship(32);
        // Both divisors have adapted slope 1/2 < 1.
        let err = transform_curve(&st, Axis::X).unwrap_err();
        assert!(matches!(err, BlowupError::NotPermissible { .. }));
    }

    #[test]
    fn curve_step_rejects_missing_divisor() {
        let st = running(32);
        let err = transform_curve(&st, Axis::Y).unwrap_err();
        assert!(matches!(err, BlowupError::NotPermissible { .. }));
    }

    #[test]
    fn curve_step_division_failure_on_control_violation() {
        // a_1 = y^3 breaks coefficient control for the x-divisor; the
        // division by x then fails.
        let ctx = f2();
        let a1 = BiSeries::monomial(&ctx, 16, 0, 3, ctx.one());
        let a2 = BiSeries::monomial(&ctx, 16, 4, 1, ctx.one());
        let st = MonomialState::new(
            Hypersurface::new(2, 1, vec![a1, a2]).unwrap(),
            MonomialData {
                a: 2,
                divisors: vec![DivisorInfo {
                    axis: Axis::X,
                    index: 0,
                    m: 4,
                }],
            },
            0,
        );
        let err = transform_curve(&st, Axis::X).unwrap_err();
        assert!(matches!(err, BlowupError::DivisionFailure { .. }));
    }

    #[test]
    fn point_step_flagship_x_chart_at_one() {
        // a_2 = x^3 y + x y^3 = x y (y − x)^2 in characteristic 2.
        // Substituting y = x(ỹ+1) gives x̃^4 ỹ^2 (ỹ+1); dividing by x̃^2
        // leaves x̃^2(ỹ^2 + ỹ^3), whose square initial part (x̃ỹ)^2 the
        // cleaning absorbs: the cleaned child has ã_2 = x̃^2 ỹ^3.
        let st = flagship(32);
        let out = transform_point(&st, &FiberPoint::XChart(f2().one())).unwrap();
        let new = out.state().expect("jump target continues");

        let ctx = f2();
        assert_eq!(new.hyp.last().num_terms(), 1);
        assert_eq!(new.hyp.last().coeff(2, 3), ctx.one());
        assert_eq!(new.prec, 30);

        // Only the fresh exceptional divisor passes through the new point.
        assert_eq!(new.monomial.divisors.len(), 1);
        let d = &new.monomial.divisors[0];
        assert_eq!(d.axis, Axis::X);
        assert_eq!(d.index, 2);
        assert_eq!(d.m, 8);

        // The parent point is bad, so the exceptional divisor is bad.
        assert_eq!(
            classify_divisor(new, Axis::X).unwrap(),
            Classification::Bad
        );

        // Its residual slope jumps: w-ρ = 3/2 against 1 on the parent.
        let analysis = analyze(new).unwrap();
        let dx = &analysis.report.divisors[0];
        assert_eq!(dx.h, Rat::from_int(1));
        assert_eq!(dx.rho, Some(Rat::new(3, 2)));
        assert_eq!(dx.w_rho, Some(Rat::new(3, 2)));

        let parent = analyze(&st).unwrap();
        for d in &parent.report.divisors {
            assert_eq!(d.w_rho, Some(Rat::from_int(1)));
        }
        assert_eq!(parent.report.inv_heart, Rat::from_int(1));
    }

    #[test]
    fn point_step_flagship_y_chart() {
        // x = x̃ỹ, y = ỹ: a_2 ↦ ỹ^4(x̃^3 + x̃), so ã_2 = x̃ỹ^2 + x̃^3ỹ^2.
        let st = flagship(32);
        let out = transform_point(&st, &FiberPoint::YChartOrigin).unwrap();
        let new = out.state().expect("continues");

        let ctx = f2();
        assert_eq!(new.hyp.last().coeff(1, 2), ctx.one());
        assert_eq!(new.hyp.last().coeff(3, 2), ctx.one());
        assert_eq!(new.hyp.last().num_terms(), 2);

        // The old x-divisor survives; the exceptional is on the y-axis.
        assert_eq!(new.monomial.divisors.len(), 2);
        assert_eq!(new.monomial.divisors[0].axis, Axis::X);
        assert_eq!(new.monomial.divisors[0].index, 0);
        assert_eq!(new.monomial.divisors[0].m, 5);
        assert_eq!(new.monomial.divisors[1].axis, Axis::Y);
        assert_eq!(new.monomial.divisors[1].index, 2);
        assert_eq!(new.monomial.divisors[1].m, 8);

        // The residual slope strictly drops at the y-chart origin.
        let analysis = analyze(new).unwrap();
        let dx = analysis
            .report
            .divisors
            .iter()
            .find(|d| d.axis == Axis::X)
            .unwrap();
        assert_eq!(dx.w_rho, Some(Rat::from_int(0)));
    }

    #[test]
    fn point_step_good_point_keeps_exceptional_good() {
        // a_2 = x y^9 + x^9 y: slope 5 = μ, so P is good; both divisor
        // slopes are 1/2, so the locus is the point alone.
        let ctx = f2();
        let a1 = BiSeries::zero(&ctx, 40);
        let a2 = BiSeries::from_terms(&ctx, 40, [((1, 9), ctx.one()), ((9, 1), ctx.one())]);
        let st = MonomialState::new(
            Hypersurface::new(2, 1, vec![a1, a2]).unwrap(),
            MonomialData {
                a: 2,
                divisors: vec![
                    DivisorInfo {
                        axis: Axis::X,
                        index: 0,
                        m: 5,
                    },
                    DivisorInfo {
                        axis: Axis::Y,
                        index: 1,
                        m: 5,
                    },
                ],
            },
            0,
        );
        let pre = analyze(&st).unwrap();
        assert!(pre.report.point_good);

        let out = transform_point(&st, &FiberPoint::XChart(ctx.one())).unwrap();
        let new = out.state().expect("continues");
        assert_eq!(
            classify_divisor(new, Axis::X).unwrap(),
            Classification::Good
        );
    }

    #[test]
    fn fiber_enumeration_order_and_content() {
        let st = flagship(32);
        let fiber = enumerate_fiber(&st).unwrap();
        assert_eq!(fiber.len(), 3);
        assert_eq!(fiber[0].0, FiberPoint::YChartOrigin);
        assert_eq!(fiber[1].0, FiberPoint::XChart(f2().zero()));
        assert_eq!(fiber[2].0, FiberPoint::XChart(f2().one()));
        for (_, o) in &fiber {
            assert!(matches!(o, Outcome::NewState(_)));
        }
        // The direction-0 chart keeps the old y-divisor.
        let s1 = fiber[1].1.state().unwrap();
        assert_eq!(s1.monomial.divisors.len(), 2);
        assert!(s1.monomial.divisor(Axis::Y).is_some());
        assert_eq!(s1.monomial.divisor(Axis::X).unwrap().m, 8);
    }

    #[test]
    fn point_step_rejects_curve_locus() {
        let st = running(32);
        let err = transform_point(&st, &FiberPoint::YChartOrigin).unwrap_err();
        assert!(matches!(err, BlowupError::NotPermissible { .. }));
    }

    #[test]
    fn point_step_negative_exceptional_multiplicity_is_rejected() {
        // Σ m_D = 1 < a = 2 cannot arise from a valid state; the transform
        // reports it as a division failure.
        let ctx = f2();
        let a1 = BiSeries::zero(&ctx, 16);
        let a2 = BiSeries::monomial(&ctx, 16, 1, 2, ctx.one());
        let st = MonomialState::new(
            Hypersurface::new(2, 1, vec![a1, a2]).unwrap(),
            MonomialData {
                a: 2,
                divisors: vec![DivisorInfo {
                    axis: Axis::X,
                    index: 0,
                    m: 1,
                }],
            },
            0,
        );
        let err = transform_point(&st, &FiberPoint::YChartOrigin).unwrap_err();
        assert!(matches!(err, BlowupError::DivisionFailure { .. }));
    }

    #[test]
    fn point_step_precision_exhaustion() {
        // At prec 5 the transform of a_2 loses every term, and the child's
        // slope can no longer be certified.
        let st = flagship(5);
        let out = transform_point(&st, &FiberPoint::XChart(f2().one())).unwrap();
        assert_eq!(out, Outcome::PrecisionExhausted);
    }

    #[test]
    fn gamma_rejects_non_tight_state() {
        let st = running(32);
        let err = transform_gamma(&st, &[Axis::X]).unwrap_err();
        assert!(matches!(err, BlowupError::NotTight));
    }

    /// Tight type-I fixture: a_2 = x^3 y^2 (1 + x), divisors m_x = 4,
    /// m_y = 3, a = 2.  H(ξ_x) = 3/2, H(ξ_y) = 1, H(P) = 5/2 = ord M_tight.
    fn tight_type_i(prec: u32) -> MonomialState {
        let ctx = f2();
        let a1 = BiSeries::zero(&ctx, prec);
        let a2 = BiSeries::from_terms(&ctx, prec, [((3, 2), ctx.one()), ((4, 2), ctx.one())]);
        MonomialState::new(
            Hypersurface::new(2, 1, vec![a1, a2]).unwrap(),
            MonomialData {
                a: 2,
                divisors: vec![
                    DivisorInfo {
                        axis: Axis::X,
                        index: 0,
                        m: 4,
                    },
                    DivisorInfo {
                        axis: Axis::Y,
                        index: 1,
                        m: 3,
                    },
                ],
            },
            0,
        )
    }

    #[test]
    fn gamma_codim_two_step_preserves_tightness() {
        let st = tight_type_i(32);
        assert_eq!(tight_case(&st).unwrap(), TightCase::TypeI);
        let pre = analyze(&st).unwrap();

        let list = transform_gamma(&st, &[Axis::X]).unwrap();
        assert_eq!(list.len(), 1);
        let new = list[0].1.state().expect("tight game continues");

        // Exceptional exponent on ã_2: H·p^e − p^e = 3 − 2 = 1.
        let ctx = f2();
        assert_eq!(new.hyp.last().coeff(1, 2), ctx.one());
        assert_eq!(new.hyp.last().coeff(2, 2), ctx.one());
        assert_eq!(new.monomial.divisor(Axis::X).unwrap().m, 2);
        assert_eq!(new.monomial.divisor(Axis::X).unwrap().index, 2);
        assert_eq!(new.monomial.divisor(Axis::Y).unwrap().m, 3);

        // Same tight type, strictly smaller gamma.
        assert_eq!(tight_case(new).unwrap(), TightCase::TypeI);
        let post = analyze(new).unwrap();
        assert!(post.report.gamma < pre.report.gamma);
        assert_eq!(post.report.inv_heart, Rat::from_int(0));
    }

    #[test]
    fn gamma_point_step_can_resolve_everything() {
        // a_2 = xy with m_x = m_y = 1, a = 2: tight type II, and every
        // fiber candidate of the point blow-up leaves the singular locus.
        let ctx = f2();
        let a1 = BiSeries::zero(&ctx, 16);
        let a2 = BiSeries::monomial(&ctx, 16, 1, 1, ctx.one());
        let st = MonomialState::new(
            Hypersurface::new(2, 1, vec![a1, a2]).unwrap(),
            MonomialData {
                a: 2,
                divisors: vec![
                    DivisorInfo {
                        axis: Axis::X,
                        index: 0,
                        m: 1,
                    },
                    DivisorInfo {
                        axis: Axis::Y,
                        index: 1,
                        m: 1,
                    },
                ],
            },
            0,
        );
        assert_eq!(tight_case(&st).unwrap(), TightCase::TypeII);
        let list = transform_gamma(&st, &[Axis::X, Axis::Y]).unwrap();
        assert!(list.is_empty());
    }
}
