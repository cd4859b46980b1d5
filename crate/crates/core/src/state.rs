//! The domain model for one point of the local resolution game.
//!
//! A state bundles a Weierstrass hypersurface
//!
//! ```text
//!     h = z^{p^e} + a_1 z^{p^e-1} + … + a_{p^e}
//! ```
//!
//! with boundary data (M, a): a monomial M = ∏ x_D^{m_D} supported on the
//! coordinate divisors through the point, and a positive level a.  The
//! required setting is
//!
//! 1. ord_P(a_i) > i for all i (Weierstrass orders),
//! 2. Σ m_D > a (the monomial weight exceeds 1),
//! 3. x_D^⌈m_D·i/a⌉ divides a_i for i = 1..p^e−1 (coefficient control).
//!
//! [`validate`](MonomialState::validate) checks each condition and reports
//! pass/fail with a witnessing term on failure; it never errors.  Condition 2
//! is additionally reported with a three-state verdict because transformed
//! states may legitimately sit on the boundary Σ m_D = a while the game
//! continues.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::field::{lucas_binomial, FqCtx};
use crate::series::BiSeries;

/// Which coordinate axis a boundary divisor lives on: V(x) or V(y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    /// The other axis.
    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X => write!(f, "x"),
            Axis::Y => write!(f, "y"),
        }
    }
}

/// One boundary divisor through the point: its coordinate axis, its global
/// creation index (larger index = born later), and its exponent m_D in the
/// boundary monomial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisorInfo {
    pub axis: Axis,
    pub index: u32,
    pub m: u32,
}

/// The boundary monomial M = ∏ x_D^{m_D} together with the level a, i.e. the
/// pair (M, a) assigning weight m_D/a to each divisor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialData {
    /// The level a > 0.
    pub a: u32,
    /// The divisors through the point, at most one per axis.
    pub divisors: Vec<DivisorInfo>,
}

impl MonomialData {
    /// Sum of the exponents m_D.
    pub fn sum_m(&self) -> u32 {
        self.divisors.iter().map(|d| d.m).sum()
    }

    /// The divisor on the given axis, if present.
    pub fn divisor(&self, axis: Axis) -> Option<&DivisorInfo> {
        self.divisors.iter().find(|d| d.axis == axis)
    }

    /// Smallest index strictly larger than every current divisor index
    /// (used when a blow-up creates a fresh exceptional divisor).
    pub fn next_index(&self) -> u32 {
        self.divisors.iter().map(|d| d.index + 1).max().unwrap_or(0)
    }
}

/// Errors for structurally impossible states.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StateError {
    #[error("expected {expected} coefficient series a_1..a_{{p^e}}, got {got}")]
    CoeffCountMismatch { expected: u32, got: usize },
    #[error("no boundary divisor passes through the point")]
    NoBoundary,
}

/// The Weierstrass data: p, e and the coefficient series a_1..a_{p^e}
/// (index 0 of `coeffs` holds a_1).  a_i may be identically zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypersurface {
    p: u32,
    e: u32,
    coeffs: Vec<BiSeries>,
}

impl Hypersurface {
    /// Builds the hypersurface, checking that exactly p^e coefficient series
    /// are supplied.
    pub fn new(p: u32, e: u32, coeffs: Vec<BiSeries>) -> Result<Hypersurface, StateError> {
        let pe = p.pow(e);
        if coeffs.len() != pe as usize {
            return Err(StateError::CoeffCountMismatch {
                expected: pe,
                got: coeffs.len(),
            });
        }
        Ok(Hypersurface { p, e, coeffs })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn e(&self) -> u32 {
        self.e
    }

    /// p^e, the z-degree of h.
    pub fn pe(&self) -> u32 {
        self.p.pow(self.e)
    }

    /// The coefficient a_i for 1 ≤ i ≤ p^e.
    pub fn coeff(&self, i: u32) -> &BiSeries {
        &self.coeffs[(i - 1) as usize]
    }

    /// The last coefficient a_{p^e}, which carries the residual data.
    pub fn last(&self) -> &BiSeries {
        &self.coeffs[self.coeffs.len() - 1]
    }

    pub fn coeffs(&self) -> &[BiSeries] {
        &self.coeffs
    }

    pub fn ctx(&self) -> &Arc<FqCtx> {
        self.coeffs[0].ctx()
    }

    /// Replaces every coefficient via `f` (used by the blow-up transforms).
    pub fn map_coeffs<F>(&self, mut f: F) -> Hypersurface
    where
        F: FnMut(u32, &BiSeries) -> BiSeries,
    {
        Hypersurface {
            p: self.p,
            e: self.e,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, a)| f(k as u32 + 1, a))
                .collect(),
        }
    }

    /// The coordinate change z ↦ z + φ.  Writing h(z + φ) again in powers of
    /// the new variable gives
    ///
    /// ```text
    ///     a'_j = Σ_{i=0..j} C(p^e − i, j − i) · a_i · φ^{j−i},   a_0 = 1,
    /// ```
    ///
    /// with binomials taken mod p.  Since C(p^e, j) ≡ 0 mod p for
    /// 0 < j < p^e, the pure φ-power only reaches a'_{p^e} (as φ^{p^e}).
    pub fn shift(&self, phi: &BiSeries) -> Hypersurface {
        let pe = self.pe();
        let ctx = self.ctx();
        // φ^0..φ^{p^e}, with φ^0 = 1 at unbounded precision so that products
        // with it inherit the other factor's precision.  Each power splits
        // off its p-part first: φ^{p^v·k'} = (φ^{p^v})^{k'}, because the
        // Frobenius factor is known to v-fold multiplied precision (knowing
        // φ below degree m pins φ^{p^v} below degree m·p^v exactly).
        let pows: Vec<BiSeries> = (0..=pe)
            .map(|k| {
                if k == 0 {
                    return BiSeries::monomial(ctx, u32::MAX, 0, 0, ctx.one());
                }
                let mut v = 0;
                let mut rest = k;
                while rest % self.p == 0 {
                    rest /= self.p;
                    v += 1;
                }
                let base = phi.pe_power(self.p, v);
                if rest == 1 {
                    base
                } else {
                    base.pow(rest)
                }
            })
            .collect();
        let coeffs = (1..=pe)
            .map(|j| {
                let mut s = BiSeries::zero(ctx, u32::MAX);
                // i = 0 contribution: C(p^e, j) · φ^j.
                let c0 = lucas_binomial(pe as u64, j as u64, self.p);
                if c0 != 0 {
                    s = s.add(&pows[j as usize].scale(&ctx.from_u32(c0)));
                }
                for i in 1..=j {
                    let c = lucas_binomial((pe - i) as u64, (j - i) as u64, self.p);
                    if c == 0 {
                        continue;
                    }
                    let piece = self.coeff(i).mul(&pows[(j - i) as usize]);
                    s = s.add(&piece.scale(&ctx.from_u32(c)));
                }
                // A sum with no surviving binomial term still has bounded
                // knowledge: it equals a_j's own precision at worst.
                if s.prec() == u32::MAX {
                    s = s.truncate_to(self.coeff(j).prec());
                }
                s
            })
            .collect();
        Hypersurface {
            p: self.p,
            e: self.e,
            coeffs,
        }
    }
}

/// The five shapes a boundary through the point can take, by divisor count
/// and the good/bad classification of each divisor (a divisor is good when
/// its well-adapted slope equals its assigned weight, bad when it falls
/// short).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Configuration {
    OneGood,
    TwoGood,
    OneBad,
    OneBadOneGood,
    TwoBad,
}

impl Configuration {
    /// Classifies from the per-divisor flags (`true` = bad), in divisor-list
    /// order.  Errors when no divisor passes through the point.
    pub fn from_flags(flags: &[bool]) -> Result<Configuration, StateError> {
        let bad = flags.iter().filter(|&&b| b).count();
        match (flags.len(), bad) {
            (0, _) => Err(StateError::NoBoundary),
            (1, 0) => Ok(Configuration::OneGood),
            (1, _) => Ok(Configuration::OneBad),
            (2, 0) => Ok(Configuration::TwoGood),
            (2, 1) => Ok(Configuration::OneBadOneGood),
            (2, _) => Ok(Configuration::TwoBad),
            _ => unreachable!("at most two divisors through a point"),
        }
    }

    /// Number of bad divisors in this configuration.
    pub fn bad_count(self) -> u32 {
        match self {
            Configuration::OneGood | Configuration::TwoGood => 0,
            Configuration::OneBad | Configuration::OneBadOneGood => 1,
            Configuration::TwoBad => 2,
        }
    }

    /// Number of divisors through the point.
    pub fn divisor_count(self) -> u32 {
        match self {
            Configuration::OneGood | Configuration::OneBad => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Configuration::OneGood => "one-good",
            Configuration::TwoGood => "two-good",
            Configuration::OneBad => "one-bad",
            Configuration::OneBadOneGood => "one-bad-one-good",
            Configuration::TwoBad => "two-bad",
        };
        write!(f, "{s}")
    }
}

/// Verdict for the monomial-weight condition Σ m_D > a.  Freshly validated
/// inputs must be strictly greater; states transformed mid-game may touch the
/// boundary Σ m_D = a (weight exactly 1) and continue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cond2Verdict {
    StrictlyGreater,
    Boundary,
    Fails,
}

/// Outcome of a single validation check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub condition: String,
    pub passed: bool,
    /// Human-readable witness of a failure (offending term or numbers).
    pub witness: Option<String>,
}

/// The full validation report: one entry per checkable condition, plus the
/// refined three-state verdict for the monomial-weight condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub cond2: Cond2Verdict,
}

impl ValidationReport {
    /// All conditions pass with Σ m_D strictly greater than a.
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// All conditions except possibly the strictness of Σ m_D > a pass; the
    /// weight may sit on the boundary Σ m_D = a.  Transformed states are held
    /// to this standard.
    pub fn ok_at_boundary(&self) -> bool {
        self.cond2 != Cond2Verdict::Fails
            && self
                .checks
                .iter()
                .all(|c| c.passed || c.condition.starts_with("monomial-weight"))
    }

    /// The failing checks.
    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let mark = if c.passed { "pass" } else { "FAIL" };
            write!(f, "[{mark}] {}", c.condition)?;
            if let Some(w) = &c.witness {
                write!(f, " — {w}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// One point of the game: hypersurface + boundary monomial + bookkeeping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialState {
    pub hyp: Hypersurface,
    pub monomial: MonomialData,
    /// How many blow-ups deep this state is.
    pub year: u32,
    /// Common precision budget: every coefficient is exact in total degrees
    /// below this bound.
    pub prec: u32,
}

impl MonomialState {
    /// Bundles the parts; the precision budget is the weakest coefficient
    /// precision, and every coefficient is re-truncated to that common
    /// budget so the budget arithmetic of later transforms stays uniform.
    pub fn new(hyp: Hypersurface, monomial: MonomialData, year: u32) -> MonomialState {
        let prec = hyp.coeffs().iter().map(|c| c.prec()).min().unwrap_or(0);
        let hyp = if hyp.coeffs().iter().any(|c| c.prec() != prec) {
            hyp.map_coeffs(|_, a| a.truncate_to(prec))
        } else {
            hyp
        };
        MonomialState {
            hyp,
            monomial,
            year,
            prec,
        }
    }

    pub fn ctx(&self) -> &Arc<FqCtx> {
        self.hyp.ctx()
    }

    pub fn p(&self) -> u32 {
        self.hyp.p()
    }

    pub fn e(&self) -> u32 {
        self.hyp.e()
    }

    pub fn pe(&self) -> u32 {
        self.hyp.pe()
    }

    /// The level a of the boundary pair (M, a).
    pub fn a(&self) -> u32 {
        self.monomial.a
    }

    /// Applies z ↦ z + φ, leaving boundary data untouched.
    pub fn shifted(&self, phi: &BiSeries) -> MonomialState {
        MonomialState::new(self.hyp.shift(phi), self.monomial.clone(), self.year)
    }

    /// Checks every condition of the setting and reports each with a witness
    /// on failure.  Never errors; inspect [`ValidationReport::ok`].
    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();
        let pe = self.pe();

        // Structural checks on the boundary data.
        {
            let n = self.monomial.divisors.len();
            let mut passed = n <= 2;
            let mut witness = None;
            if !passed {
                witness = Some(format!("{n} divisors listed; at most 2 pass through a point"));
            } else if n == 2 {
                let d0 = &self.monomial.divisors[0];
                let d1 = &self.monomial.divisors[1];
                if d0.axis == d1.axis {
                    passed = false;
                    witness = Some(format!("two divisors share the {} axis", d0.axis));
                } else if d0.index == d1.index {
                    passed = false;
                    witness = Some(format!("duplicate divisor index {}", d0.index));
                }
            }
            if passed && self.monomial.a == 0 {
                passed = false;
                witness = Some("level a must be positive".into());
            }
            checks.push(CheckResult {
                condition: "divisor-structure".into(),
                passed,
                witness,
            });
        }

        // Weierstrass orders: ord_P(a_i) > i, verifiable below prec.
        for i in 1..=pe {
            let a_i = self.hyp.coeff(i);
            let (passed, witness) = match a_i.ord() {
                // Zero below prec: nothing observable violates the bound.
                crate::series::OrdBound::AtLeast(_) => (true, None),
                crate::series::OrdBound::Finite(o) if o > i => (true, None),
                crate::series::OrdBound::Finite(o) => {
                    let term = a_i
                        .terms()
                        .find(|&(&(ti, tj), _)| ti + tj == o)
                        .map(|(&(ti, tj), _)| format!("term x^{ti} y^{tj}"))
                        .unwrap_or_default();
                    (false, Some(format!("ord(a_{i}) = {o} ≤ {i}: {term}")))
                }
            };
            checks.push(CheckResult {
                condition: format!("weierstrass-order a_{i}"),
                passed,
                witness,
            });
        }

        // Coefficient control: x_D^⌈m_D i / a⌉ | a_i for i = 1..p^e−1.
        // The last coefficient a_{p^e} is exempt.
        for i in 1..pe {
            let a_i = self.hyp.coeff(i);
            for d in &self.monomial.divisors {
                let need =
                    ((d.m as u64 * i as u64).div_ceil(self.monomial.a.max(1) as u64)) as u32;
                let got = match d.axis {
                    Axis::X => a_i.ord_x(),
                    Axis::Y => a_i.ord_y(),
                };
                let (passed, witness) = match got {
                    None => (true, None),
                    Some(o) if o >= need => (true, None),
                    Some(o) => {
                        let term = a_i
                            .terms()
                            .find(|&(&(ti, tj), _)| match d.axis {
                                Axis::X => ti == o,
                                Axis::Y => tj == o,
                            })
                            .map(|(&(ti, tj), _)| format!("term x^{ti} y^{tj}"))
                            .unwrap_or_default();
                        (
                            false,
                            Some(format!(
                                "{}-order of a_{i} is {o} < ⌈{}·{i}/{}⌉ = {need}: {term}",
                                d.axis, d.m, self.monomial.a
                            )),
                        )
                    }
                };
                checks.push(CheckResult {
                    condition: format!("coefficient-control a_{i} ({} axis)", d.axis),
                    passed,
                    witness,
                });
            }
        }

        // Monomial weight: Σ m_D > a, with a refined verdict.
        let sum: u32 = self.monomial.sum_m();
        let a = self.monomial.a;
        let cond2 = if sum > a {
            Cond2Verdict::StrictlyGreater
        } else if sum == a {
            Cond2Verdict::Boundary
        } else {
            Cond2Verdict::Fails
        };
        checks.push(CheckResult {
            condition: "monomial-weight Σm_D > a".into(),
            passed: cond2 == Cond2Verdict::StrictlyGreater,
            witness: if cond2 == Cond2Verdict::StrictlyGreater {
                None
            } else {
                Some(format!("Σ m_D = {sum}, a = {a}"))
            },
        });

        ValidationReport { checks, cond2 }
    }
}
