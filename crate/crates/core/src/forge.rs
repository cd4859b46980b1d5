//! Forging and verifying residual jumps at point blow-ups.
//!
//! A point blow-up normally lowers the two-word invariant; on rare
//! configurations it raises it instead, because the weighted residual of the
//! fresh exceptional divisor overshoots every residual seen before the move.
//! This module pins down exactly when that happens.  The critical
//! lowest-degree form of the top coefficient factors as
//!
//! ```text
//!   x^r · y^s · (y - x)^t · ψ(x, y)
//! ```
//!
//! where ψ is a deformation factor determined by finitely many field
//! elements γ_1, .., γ_α.  A [`JumpSpec`] records those shape parameters.
//! From the spec alone, [`analyze_jump`] predicts where the pulled-back form
//! first leaves the p^e-grid; [`build_phi`] expands the explicit polynomial;
//! [`embed_jump`] wraps it into a playable surface position whose first
//! move jumps; [`verify_jump`] plays that move and measures the jump against
//! the prediction; and [`recover_spec`] inverts the whole construction,
//! factoring the critical form of any observed jump back into a spec.

use std::sync::Arc;

use crate::blowup::{transform_point, FiberPoint, Outcome};
use crate::driver::{classify_transformation, EpisodeCheck, StepClass};
use crate::field::{lucas_binomial, Fq, FqCtx};
use crate::invariants::{analyze, InvariantReport, SingularLocusDesc};
use crate::rat::Rat;
use crate::series::{BiSeries, HomogPoly};
use crate::state::{
    Axis, Configuration, DivisorInfo, Hypersurface, MonomialData, MonomialState,
};

// ---------------------------------------------------------------------------
// Errors.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ForgeError {
    /// The shape parameters violate one of the structural conditions.
    #[error("spec violation: {condition}")]
    SpecViolation { condition: String },
    /// The surrounding surface position cannot carry the jump.
    #[error("embedding invalid: {detail}")]
    EmbeddingInvalid { detail: String },
    /// The position is fine but the move at the chosen fiber point does not
    /// raise the residual word.
    #[error("jump absent: {detail}")]
    JumpAbsent { detail: String },
}

fn spec_violation(condition: impl Into<String>) -> ForgeError {
    ForgeError::SpecViolation {
        condition: condition.into(),
    }
}

fn embedding_invalid(detail: impl Into<String>) -> ForgeError {
    ForgeError::EmbeddingInvalid {
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// The spec.
// ---------------------------------------------------------------------------

/// Shape parameters of a forged jump: the factor exponents r, s, t of the
/// critical form, its total degree d, and the deformation coefficients
/// γ_1, .., γ_α of the residual factor ψ.  Constructed only through
/// [`JumpSpec::new`], which enforces every structural condition, so a spec
/// in hand is always buildable.
#[derive(Debug, Clone)]
pub struct JumpSpec {
    ctx: Arc<FqCtx>,
    e: u32,
    r: u32,
    s: u32,
    t: u32,
    d: u32,
    gammas: Vec<Fq>,
}

impl JumpSpec {
    pub fn new(
        ctx: &Arc<FqCtx>,
        e: u32,
        r: u32,
        s: u32,
        t: u32,
        d: u32,
        gammas: Vec<Fq>,
    ) -> Result<JumpSpec, ForgeError> {
        if e == 0 {
            return Err(spec_violation("the power e must be at least 1"));
        }
        let pe = ctx.p().checked_pow(e).filter(|&pe| pe <= 1 << 20);
        let pe = match pe {
            Some(pe) => pe,
            None => return Err(spec_violation("p^e is too large to work with")),
        };
        if d % pe != 0 || d / pe < 2 {
            return Err(spec_violation(format!(
                "the total degree must be a proper multiple of p^e: got {d}, p^e = {pe}"
            )));
        }
        if r == 0 || r >= pe {
            return Err(spec_violation(format!(
                "the x-divisor exponent must lie strictly between 0 and p^e: got {r}"
            )));
        }
        if s == 0 || s >= pe {
            return Err(spec_violation(format!(
                "the y-divisor exponent must lie strictly between 0 and p^e: got {s}"
            )));
        }
        if t % pe != 0 {
            return Err(spec_violation(format!(
                "the diagonal exponent must be a multiple of p^e: got {t}"
            )));
        }
        if r + s + t > d {
            return Err(spec_violation(format!(
                "the fixed factors use degree {}, more than the total {d}",
                r + s + t
            )));
        }
        let u = d - r - s - t;
        let alpha = u / pe;
        let beta = u % pe;
        if beta + s >= pe {
            return Err(spec_violation(format!(
                "the deformation remainder {beta} must stay below p^e - s = {}",
                pe - s
            )));
        }
        if gammas.len() != alpha as usize {
            return Err(spec_violation(format!(
                "need exactly {alpha} deformation coefficients, got {}",
                gammas.len()
            )));
        }
        if gammas.iter().any(|g| !Arc::ptr_eq(g.ctx(), ctx)) {
            return Err(spec_violation(
                "deformation coefficients must live in the given field",
            ));
        }
        let spec = JumpSpec {
            ctx: Arc::clone(ctx),
            e,
            r,
            s,
            t,
            d,
            gammas,
        };
        if alpha > 0 {
            let eps = epsilon_residues(&spec);
            if eps[alpha as usize - 1].is_zero() {
                return Err(spec_violation(
                    "the leading deformation residue vanishes, so the form \
                     would be a p^e-th power",
                ));
            }
        }
        Ok(spec)
    }

    pub fn ctx(&self) -> &Arc<FqCtx> {
        &self.ctx
    }

    pub fn p(&self) -> u32 {
        self.ctx.p()
    }

    pub fn e(&self) -> u32 {
        self.e
    }

    pub fn pe(&self) -> u32 {
        self.ctx.p().pow(self.e)
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn gammas(&self) -> &[Fq] {
        &self.gammas
    }

    /// Degree of the deformation factor ψ.
    pub fn u(&self) -> u32 {
        self.d - self.r - self.s - self.t
    }

    /// Number of deformation coefficients: u div p^e.
    pub fn alpha(&self) -> u32 {
        self.u() / self.pe()
    }

    /// Deformation remainder: u mod p^e.
    pub fn beta(&self) -> u32 {
        self.u() % self.pe()
    }

    /// Total degree in blocks of p^e.
    pub fn n(&self) -> u32 {
        self.d / self.pe()
    }

    /// Diagonal exponent in blocks of p^e.
    pub fn l(&self) -> u32 {
        self.t / self.pe()
    }
}

// ---------------------------------------------------------------------------
// Series bookkeeping.
// ---------------------------------------------------------------------------

fn minus_one_pow(ctx: &Arc<FqCtx>, k: u32) -> Fq {
    if k % 2 == 0 {
        ctx.one()
    } else {
        ctx.one().neg()
    }
}

/// Coefficients c_0, c_1, .. of (1 + Σ γ_i ỹ^{i·p^e}) / (1 + ỹ)^s, out to
/// index `len - 1`.
fn c_vector(spec: &JumpSpec, len: usize) -> Vec<Fq> {
    let ctx = spec.ctx();
    let p = ctx.p();
    let s = spec.s() as u64;
    // Invert (1 + ỹ)^s term by term: f_0 = 1 and each later coefficient
    // cancels everything the binomial row already produced.
    let mut f = vec![ctx.zero(); len.max(1)];
    f[0] = ctx.one();
    for k in 1..f.len() {
        let mut acc = ctx.zero();
        for j in 1..=k.min(s as usize) {
            let b = lucas_binomial(s, j as u64, p);
            if b != 0 {
                acc = acc.add(&ctx.from_u32(b).mul(&f[k - j]));
            }
        }
        f[k] = acc.neg();
    }
    // Multiply by the deformation numerator.
    let pe = spec.pe() as usize;
    let mut c = f.clone();
    for (i, g) in spec.gammas().iter().enumerate() {
        if g.is_zero() {
            continue;
        }
        let shift = (i + 1) * pe;
        for v in shift..c.len() {
            let bump = g.mul(&f[v - shift]);
            c[v] = c[v].add(&bump);
        }
    }
    c
}

/// Residues ε_1, .., ε_{α+1} of the deformation numerator against
/// (1 + ỹ)^{p^e}: the product (1 + Σ γ_i Y^i) · Σ_k (-1)^k Y^k in the block
/// variable Y = ỹ^{p^e}.
fn epsilon_residues(spec: &JumpSpec) -> Vec<Fq> {
    let ctx = spec.ctx();
    let alpha = spec.gammas().len();
    (1..=alpha + 1)
        .map(|j| {
            let mut e = minus_one_pow(ctx, j as u32);
            for (i, g) in spec.gammas().iter().enumerate().take(j) {
                let term = g.mul(&minus_one_pow(ctx, (j - i - 1) as u32));
                e = e.add(&term);
            }
            e
        })
        .collect()
}

fn digits_base_p(mut n: u32, p: u32, e: u32) -> Vec<u32> {
    (0..e)
        .map(|_| {
            let d = n % p;
            n /= p;
            d
        })
        .collect()
}

/// Least index above `floor` where the binomial row of `n` survives
/// reduction mod p, located purely from base-p digits.  Returns
/// `(l0, l1, w0)`: the highest digit where `n` falls short of `floor`
/// (-1 when none does), the next digit above it where `n` dominates, and
/// the index itself.  Requires `n > floor`.
fn least_live_index_by_digits(n: u32, floor: u32, p: u32, e: u32) -> (i32, u32, u32) {
    let a = digits_base_p(n, p, e);
    let delta = digits_base_p(floor, p, e);
    let l0 = (0..e as usize)
        .filter(|&l| a[l] < delta[l])
        .map(|l| l as i32)
        .max()
        .unwrap_or(-1);
    let l1 = ((l0 + 1) as u32..e)
        .find(|&l| a[l as usize] > delta[l as usize])
        .expect("n exceeds floor, so some digit above l0 must dominate");
    let mut w0 = (delta[l1 as usize] + 1) * p.pow(l1);
    for l in (l1 + 1)..e {
        w0 += delta[l as usize] * p.pow(l);
    }
    (l0, l1, w0)
}

/// The same index found by scanning the binomial row directly.
fn least_live_index_by_scan(n: u32, floor: u32, p: u32) -> u32 {
    (floor + 1..=n)
        .find(|&w| lucas_binomial(n as u64, w as u64, p) != 0)
        .expect("the top binomial coefficient is always 1")
}

// ---------------------------------------------------------------------------
// Analysis.
// ---------------------------------------------------------------------------

/// Everything the spec alone predicts about the jump.
#[derive(Debug, Clone)]
pub struct JumpAnalysis {
    pub pe: u32,
    pub u: u32,
    pub alpha: u32,
    pub beta: u32,
    /// Deformation-series coefficients c_0 .. c_{(α+1)·p^e}.
    pub c: Vec<Fq>,
    /// Residues ε_1 .. ε_{α+1} of the deformation numerator against the
    /// p^e-th power of the line.  The α-th entry never vanishes.
    pub epsilons: Vec<Fq>,
    /// Measured: least index above u with a nonzero series coefficient.
    pub v0: u32,
    /// The same offset within the top block, computed from base-p digits.
    pub w0: u32,
    /// The offset found by scanning binomial coefficients directly.
    pub w0_scan: u32,
    /// Highest digit where p^e - s falls short of β (-1 when none does).
    pub l0: i32,
    /// The digit above l0 where p^e - s dominates β.
    pub l1: u32,
    /// Residual order of the pulled-back form on the fresh divisor: t + v0.
    pub residual: u32,
    /// How far the jump index overshoots the deformation degree: v0 - u.
    pub overshoot: u32,
}

impl JumpAnalysis {
    /// The block-plus-digit prediction for v0.
    pub fn predicted_v0(&self) -> u32 {
        self.alpha * self.pe + self.w0
    }
}

/// Computes the deformation series of a spec and locates the first index
/// where it leaves the p^e-grid, by three independent routes: scanning the
/// series itself (`v0`), the digit recipe (`w0`), and the binomial scan
/// (`w0_scan`).
pub fn analyze_jump(spec: &JumpSpec) -> JumpAnalysis {
    let pe = spec.pe();
    let u = spec.u();
    let alpha = spec.alpha();
    let beta = spec.beta();
    let len = ((alpha + 1) * pe + 1) as usize;
    let c = c_vector(spec, len);
    let epsilons = epsilon_residues(spec);
    assert!(
        alpha == 0 || !epsilons[alpha as usize - 1].is_zero(),
        "a validated spec keeps its leading residue nonzero"
    );
    let v0 = (u + 1..len as u32)
        .find(|&v| !c[v as usize].is_zero())
        .expect("a validated spec always leaves the grid within one block");
    let (l0, l1, w0) = least_live_index_by_digits(pe - spec.s(), beta, spec.p(), spec.e());
    let w0_scan = least_live_index_by_scan(pe - spec.s(), beta, spec.p());
    JumpAnalysis {
        pe,
        u,
        alpha,
        beta,
        c,
        epsilons,
        v0,
        w0,
        w0_scan,
        l0,
        l1,
        residual: spec.t() + v0,
        overshoot: v0 - u,
    }
}

// ---------------------------------------------------------------------------
// Construction.
// ---------------------------------------------------------------------------

/// Expands the spec into the explicit critical form
/// x^r · y^s · (y - x)^t · ψ(x, y) with ψ = Σ_k c_k x^{u-k} (y - x)^k.
pub fn build_phi(spec: &JumpSpec) -> HomogPoly {
    let ctx = spec.ctx();
    let p = spec.p();
    let u = spec.u();
    let c = c_vector(spec, u as usize + 1);
    // ψ assembled coefficient-wise; index = y-degree.
    let mut psi = vec![ctx.zero(); u as usize + 1];
    for k in 0..=u {
        if c[k as usize].is_zero() {
            continue;
        }
        for j in 0..=k {
            let b = lucas_binomial(k as u64, j as u64, p);
            if b == 0 {
                continue;
            }
            let term = c[k as usize]
                .mul(&ctx.from_u32(b))
                .mul(&minus_one_pow(ctx, k - j));
            psi[j as usize] = psi[j as usize].add(&term);
        }
    }
    // x^r shifts nothing in y; y^s shifts every y-degree up by s.
    let mut coeffs = vec![ctx.zero(); spec.s() as usize];
    coeffs.extend(psi);
    coeffs.extend(std::iter::repeat_with(|| ctx.zero()).take(spec.r() as usize));
    let mut phi = HomogPoly::new(ctx, coeffs);
    let line = HomogPoly::new(ctx, vec![ctx.one().neg(), ctx.one()]);
    for _ in 0..spec.t() {
        phi = phi.mul(&line);
    }
    assert_eq!(phi.degree(), spec.d(), "the factor degrees add up");
    assert!(
        !phi.is_pe_power(spec.pe()),
        "a validated spec never builds a p^e-th power"
    );
    phi
}

// ---------------------------------------------------------------------------
// Embedding.
// ---------------------------------------------------------------------------

fn embed_with(
    spec: &JumpSpec,
    m_x: u32,
    m_y: u32,
    prec: Option<u32>,
) -> Result<MonomialState, ForgeError> {
    let ctx = spec.ctx();
    let pe = spec.pe();
    let d = spec.d();
    let prec = prec.unwrap_or(2 * (d + pe));
    if prec <= d + pe {
        return Err(embedding_invalid(format!(
            "precision {prec} cannot hold the pinning tail at degree {}",
            d + pe
        )));
    }
    let phi = build_phi(spec);
    let mut top = phi.to_series(prec);
    // The divisor slopes read off the coefficient orders along each axis, so
    // when the deformation factor eats the matching monomial, pin the order
    // with a tail term of higher total degree (it leaves the critical form
    // untouched).
    if phi.ord_x() != Some(spec.r()) {
        top = top.add(&BiSeries::monomial(
            ctx,
            prec,
            spec.r(),
            d + pe - spec.r(),
            ctx.one(),
        ));
    }
    if phi.ord_y() != Some(spec.s()) {
        top = top.add(&BiSeries::monomial(
            ctx,
            prec,
            d + pe - spec.s(),
            spec.s(),
            ctx.one(),
        ));
    }
    let mut coeffs: Vec<BiSeries> = (1..pe).map(|_| BiSeries::zero(ctx, prec)).collect();
    coeffs.push(top);
    let hyp = Hypersurface::new(spec.p(), spec.e(), coeffs)
        .map_err(|err| embedding_invalid(err.to_string()))?;
    let monomial = MonomialData {
        a: pe,
        divisors: vec![
            DivisorInfo {
                axis: Axis::X,
                index: 1,
                m: m_x,
            },
            DivisorInfo {
                axis: Axis::Y,
                index: 2,
                m: m_y,
            },
        ],
    };
    Ok(MonomialState::new(hyp, monomial, 0))
}

/// Smallest two-bad-divisor position carrying the spec: boundary exponent
/// p^e, x-multiplicity r + 1, y-multiplicity just deep enough to keep the
/// center bad.  The first move at the fiber point c = 1 jumps.
pub fn embed_jump(spec: &JumpSpec, prec: Option<u32>) -> Result<MonomialState, ForgeError> {
    let m_y = (spec.s() + 1).max(spec.d() - spec.r());
    embed_with(spec, spec.r() + 1, m_y, prec)
}

/// Variant with a good y-divisor: its multiplicity `m_y` must not exceed s,
/// and the x-multiplicity deepens to keep the center bad.
pub fn embed_jump_with_good_divisor(
    spec: &JumpSpec,
    m_y: u32,
    prec: Option<u32>,
) -> Result<MonomialState, ForgeError> {
    if m_y == 0 || m_y > spec.s() {
        return Err(embedding_invalid(format!(
            "the companion multiplicity must lie in 1..={} so the y-divisor stays good, got {m_y}",
            spec.s()
        )));
    }
    let m_x = (spec.r() + 1).max(spec.d() + 1 - m_y);
    embed_with(spec, m_x, m_y, prec)
}

// ---------------------------------------------------------------------------
// Verification.
// ---------------------------------------------------------------------------

/// Outcome of playing the forged move and measuring the jump.
#[derive(Debug, Clone)]
pub struct JumpReport {
    pub analysis: JumpAnalysis,
    pub pre: InvariantReport,
    pub post: InvariantReport,
    /// Index of the fresh exceptional divisor in the landing position.
    pub fresh_index: u32,
    /// Weighted residual of the fresh divisor, when it is bad.
    pub measured: Option<Rat>,
    /// (t + v0) / p^e, what the spec predicts for that residual.
    pub predicted: Rat,
    pub checks: Vec<EpisodeCheck>,
}

impl JumpReport {
    pub fn verified(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn scalar_ratio(a: &HomogPoly, b: &HomogPoly) -> Option<Fq> {
    if a.degree() != b.degree() {
        return None;
    }
    let k = (0..=b.degree()).find(|&k| !b.coeff(k).is_zero())?;
    let lam = a.coeff(k).mul(&b.coeff(k).inv()?);
    if lam.is_zero() {
        return None;
    }
    if *a == b.scale(&lam) {
        Some(lam)
    } else {
        None
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> EpisodeCheck {
    EpisodeCheck {
        name,
        passed,
        detail,
    }
}

/// Plays one point move at the fiber point c = 1 on a position claimed to
/// embed `spec`, and measures the fresh divisor's weighted residual against
/// the predicted t + v0.  Errs when the position does not carry the spec at
/// all, or when the move turns out not to raise the residual word.
pub fn verify_jump(spec: &JumpSpec, state: &MonomialState) -> Result<JumpReport, ForgeError> {
    let analysis = analyze_jump(spec);
    let pre_an = analyze(state).map_err(|err| {
        embedding_invalid(format!("the position does not analyze cleanly: {err}"))
    })?;
    let pre = pre_an.report.clone();
    let pre_x = pre
        .divisors
        .iter()
        .find(|dv| dv.axis == Axis::X)
        .ok_or_else(|| embedding_invalid("no x-divisor passes through the point"))?;
    if !pre_x.bad {
        return Err(embedding_invalid(
            "the x-divisor must be bad to carry the jump",
        ));
    }
    if pre.point_good {
        return Err(embedding_invalid("the center must be bad"));
    }
    if pre.singular_locus != SingularLocusDesc::PointOnly {
        return Err(embedding_invalid(
            "the singular locus must be the point alone, or the game would \
             move along a curve instead",
        ));
    }
    let top = pre_an.cleaned.hyp.coeff(spec.pe());
    let inp = top
        .initial_form()
        .ok_or_else(|| embedding_invalid("the top coefficient vanishes"))?;
    let phi = build_phi(spec);
    if scalar_ratio(&inp, &phi).is_none() {
        return Err(embedding_invalid(
            "the lowest-degree form of the top coefficient is not the \
             forged shape",
        ));
    }
    let fiber = FiberPoint::XChart(state.ctx().one());
    let outcome = transform_point(&pre_an.cleaned, &fiber)
        .map_err(|err| embedding_invalid(format!("the move failed: {err}")))?;
    let post_state = match outcome {
        Outcome::NewState(s) => s,
        Outcome::NotSingular => {
            return Err(ForgeError::JumpAbsent {
                detail: "the move resolves the point".into(),
            })
        }
        Outcome::SigmaDrop => {
            return Err(ForgeError::JumpAbsent {
                detail: "the move drops the ambient order".into(),
            })
        }
        Outcome::PrecisionExhausted => {
            return Err(embedding_invalid(
                "precision ran out during the move; embed with more",
            ))
        }
    };
    let post_an = analyze(&post_state).map_err(|err| {
        embedding_invalid(format!(
            "the landing does not analyze; embed with more precision: {err}"
        ))
    })?;
    let post = post_an.report.clone();
    if classify_transformation(&pre, &post) != StepClass::Esoteric {
        return Err(ForgeError::JumpAbsent {
            detail: "the move lowers the residual word (a standard step)".into(),
        });
    }
    let fresh = post
        .divisors
        .iter()
        .max_by_key(|dv| dv.index)
        .expect("a word-raising landing carries a fresh divisor")
        .clone();
    let predicted = Rat::new(analysis.residual as i64, spec.pe() as i64);
    let measured = fresh.w_rho;
    let moh_cap = spec.p().pow(spec.e() - 1);

    let mut checks = Vec::new();
    checks.push(check(
        "fresh-divisor-lies-on-the-x-axis",
        fresh.axis == Axis::X,
        format!("fresh divisor sits on axis {}", fresh.axis),
    ));
    checks.push(check(
        "fresh-divisor-is-bad",
        fresh.bad,
        format!(
            "fresh divisor {} with slope {} against weight {}",
            if fresh.bad { "is bad" } else { "is good" },
            fresh.h,
            fresh.mu
        ),
    ));
    checks.push(check(
        "landing-keeps-a-single-bad-divisor",
        post.configuration == Configuration::OneBad,
        format!("landing configuration is {:?}", post.configuration),
    ));
    checks.push(check(
        "measured-jump-matches-prediction",
        measured == Some(predicted),
        match measured {
            Some(m) => format!("measured {m}, predicted {predicted}"),
            None => format!("no residual measured, predicted {predicted}"),
        },
    ));
    let cap_detail;
    let cap_ok;
    match measured {
        Some(m) => {
            let excess = (m - pre.inv_heart) * Rat::from_int(spec.pe() as i64);
            cap_ok = excess <= Rat::from_int(spec.s() as i64);
            cap_detail = format!(
                "jump excess {excess} against the companion exponent {}",
                spec.s()
            );
        }
        None => {
            cap_ok = false;
            cap_detail = "no residual measured".into();
        }
    }
    checks.push(check(
        "jump-stays-within-the-companion-exponent",
        cap_ok,
        cap_detail,
    ));
    checks.push(check(
        "jump-overshoot-within-the-digit-bound",
        analysis.overshoot <= moh_cap,
        format!(
            "overshoot {} against the digit bound {moh_cap}",
            analysis.overshoot
        ),
    ));
    Ok(JumpReport {
        analysis,
        pre,
        post,
        fresh_index: fresh.index,
        measured,
        predicted,
        checks,
    })
}

// ---------------------------------------------------------------------------
// Recovery.
// ---------------------------------------------------------------------------

/// A spec factored back out of an observed jump.
#[derive(Debug, Clone)]
pub struct RecoveredJump {
    pub spec: JumpSpec,
    /// Whether the two axes swapped roles (the bad divisor sat on the
    /// y-axis).
    pub swapped: bool,
    /// The fiber coordinate of the landing, normalized away by x ↦ crit·x.
    pub crit: Fq,
    /// Global scale of the observed form against the rebuilt one.
    pub scale: Fq,
}

fn transpose(s: &BiSeries) -> BiSeries {
    BiSeries::from_terms(
        s.ctx(),
        s.prec(),
        s.terms().map(|(&(i, j), c)| ((j, i), c.clone())),
    )
}

/// f(λ·x, y): the coefficient of x^{d-k} y^k picks up λ^{d-k}.
fn rescale_x(f: &HomogPoly, lam: &Fq) -> HomogPoly {
    let d = f.degree();
    let coeffs = (0..=d)
        .map(|k| f.coeff(k).mul(&lam.pow((d - k) as u64)))
        .collect();
    HomogPoly::new(f.ctx(), coeffs)
}

/// Factors the critical form of a position whose point move at `fiber`
/// raises the residual word, recovering the spec that forges it. The bad
/// divisor's axis plays the x-role; when that divisor sits on the y-axis the
/// coordinates transpose first (`swapped`), and the landing coordinate
/// rescales onto c = 1 (`crit`).
pub fn recover_spec(
    state: &MonomialState,
    fiber: &FiberPoint,
) -> Result<RecoveredJump, ForgeError> {
    let c = match fiber {
        FiberPoint::XChart(c) if !c.is_zero() => c.clone(),
        _ => {
            return Err(ForgeError::JumpAbsent {
                detail: "jumps happen only at fiber points away from both axes".into(),
            })
        }
    };
    let pre_an = analyze(state).map_err(|err| {
        embedding_invalid(format!("the position does not analyze cleanly: {err}"))
    })?;
    let report = &pre_an.report;
    let eligible = matches!(
        report.configuration,
        Configuration::OneBadOneGood | Configuration::TwoBad
    );
    if report.point_good || !eligible {
        return Err(ForgeError::JumpAbsent {
            detail: format!(
                "jumps start from a bad center with two boundary divisors, \
                 at least one bad; found {:?} with a {} center",
                report.configuration,
                if report.point_good { "good" } else { "bad" }
            ),
        });
    }
    let x_div = report
        .divisors
        .iter()
        .find(|dv| dv.axis == Axis::X)
        .ok_or_else(|| embedding_invalid("no x-divisor passes through the point"))?;
    let y_div = report
        .divisors
        .iter()
        .find(|dv| dv.axis == Axis::Y)
        .ok_or_else(|| embedding_invalid("no y-divisor passes through the point"))?;
    // The bad divisor carries the x-role; with two bad divisors the
    // geometric x-axis keeps it.
    let swapped = !x_div.bad;
    let (h_bad, h_other) = if swapped {
        (y_div.h, x_div.h)
    } else {
        (x_div.h, y_div.h)
    };
    let ctx = state.ctx().clone();
    let pe = state.pe();
    let e = state.hyp.e();
    let top = pre_an.cleaned.hyp.coeff(pe);
    let top = if swapped { transpose(top) } else { top.clone() };
    let crit = if swapped {
        c.inv().expect("a nonzero fiber coordinate inverts")
    } else {
        c.clone()
    };
    let inp = top
        .initial_form()
        .ok_or_else(|| embedding_invalid("the top coefficient vanishes"))?;
    let d = inp.degree();
    if d % pe != 0 || d / pe < 2 {
        return Err(spec_violation(format!(
            "the critical form has degree {d}, not a proper multiple of p^e = {pe}"
        )));
    }
    let r_rat = h_bad * Rat::from_int(pe as i64);
    if r_rat.denom() != 1 {
        return Err(spec_violation(format!(
            "the bad-divisor slope scaled by p^e is not whole: {r_rat}"
        )));
    }
    let r = r_rat.numer() as u32;
    let s = (h_other * Rat::from_int(pe as i64)).ceil_i64() as u32;
    // Multiplicity of the landing line in the critical form.
    let mut t = 0u32;
    let mut rest = inp.clone();
    while let Some(q) = rest.try_div_linear(&crit) {
        rest = q;
        t += 1;
    }
    // Move the landing line onto y - x.
    let lam_x = crit.inv().expect("a nonzero fiber coordinate inverts");
    let phi_n = rescale_x(&inp, &lam_x);
    let after_x = phi_n.try_div_x(r).ok_or_else(|| {
        spec_violation(format!(
            "the critical form misses the x-divisor exponent {r}"
        ))
    })?;
    let after_y = after_x.try_div_y(s).ok_or_else(|| {
        spec_violation(format!(
            "the critical form misses the y-divisor exponent {s}"
        ))
    })?;
    let one = ctx.one();
    let mut psi = after_y;
    for _ in 0..t {
        psi = psi
            .try_div_linear(&one)
            .expect("the landing-line multiplicity was measured on the same form");
    }
    let u = psi.degree();
    let lam = psi.eval_at_x1(&one);
    if lam.is_zero() {
        return Err(spec_violation(
            "the residual factor still vanishes on the landing line",
        ));
    }
    let lam_inv = lam.inv().expect("nonzero");
    let psi_n = psi.scale(&lam_inv);
    // ψ_n(1, 1+ỹ) lists c_0..c_u; folding the y-divisor line back in
    // recovers the deformation numerator on the p^e-grid.
    let cs = psi_n.eval_shifted_line();
    let mut h = vec![ctx.zero(); u as usize + 1];
    for (k, ck) in cs.iter().enumerate() {
        if ck.is_zero() {
            continue;
        }
        for w in 0..=s as usize {
            if k + w > u as usize {
                break;
            }
            let b = lucas_binomial(s as u64, w as u64, ctx.p());
            if b != 0 {
                let bump = ck.mul(&ctx.from_u32(b));
                h[k + w] = h[k + w].add(&bump);
            }
        }
    }
    if !h[0].is_one() {
        return Err(spec_violation(
            "the deformation numerator does not start at 1",
        ));
    }
    let mut gammas = Vec::new();
    for (v, hv) in h.iter().enumerate().skip(1) {
        if v as u32 % pe == 0 {
            gammas.push(hv.clone());
        } else if !hv.is_zero() {
            return Err(spec_violation(format!(
                "the deformation numerator has a stray term at degree {v}"
            )));
        }
    }
    let spec = JumpSpec::new(&ctx, e, r, s, t, d, gammas)?;
    let rebuilt = build_phi(&spec);
    if rebuilt != phi_n.scale(&lam_inv) {
        return Err(spec_violation(
            "the residual factor is not a deformation tail",
        ));
    }
    Ok(RecoveredJump {
        spec,
        swapped,
        crit,
        scale: lam,
    })
}

// ---------------------------------------------------------------------------
// Tests.
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::analyze;

    fn f2() -> Arc<FqCtx> {
        FqCtx::new(2, 1).unwrap()
    }

    fn f4() -> Arc<FqCtx> {
        FqCtx::new(2, 2).unwrap()
    }

    /// r=1, s=1, t=2, d=4 over F_2: the smallest jumping shape.
    fn diagonal_square(ctx: &Arc<FqCtx>) -> JumpSpec {
        JumpSpec::new(ctx, 1, 1, 1, 2, 4, vec![]).unwrap()
    }

    #[test]
    fn diagonal_square_example() {
        let ctx = f2();
        let spec = diagonal_square(&ctx);
        assert_eq!((spec.u(), spec.alpha(), spec.beta(), spec.n()), (0, 0, 0, 2));
        let phi = build_phi(&spec);
        // x y (y - x)^2 = x^3 y + x y^3 over F_2.
        assert_eq!(phi.degree(), 4);
        let expect: Vec<u32> = vec![0, 1, 0, 1, 0];
        for (k, want) in expect.iter().enumerate() {
            assert_eq!(
                *phi.coeff(k as u32),
                ctx.from_u32(*want),
                "coefficient of y^{k}"
            );
        }
        let an = analyze_jump(&spec);
        assert_eq!(an.v0, 1);
        assert_eq!(an.w0, 1);
        assert_eq!(an.w0_scan, 1);
        assert_eq!(an.predicted_v0(), 1);
        assert_eq!(an.residual, 3);
        assert_eq!(an.overshoot, 1);
        assert_eq!((an.l0, an.l1), (-1, 0));
    }

    #[test]
    fn deformation_family_matches_hand_series() {
        let ctx = f4();
        let omega = ctx.from_digits(&[0, 1]).unwrap();
        assert!(!omega.is_zero() && !omega.is_one());
        let spec = JumpSpec::new(&ctx, 1, 1, 1, 0, 4, vec![omega.clone()]).unwrap();
        assert_eq!((spec.u(), spec.alpha(), spec.beta()), (2, 1, 0));
        let an = analyze_jump(&spec);
        // (1 + γ ỹ^2) / (1 + ỹ) = 1 + ỹ + (1+γ) ỹ^2 + (1+γ) ỹ^3 + ...
        let one_plus = ctx.one().add(&omega);
        assert_eq!(an.c[0], ctx.one());
        assert_eq!(an.c[1], ctx.one());
        assert_eq!(an.c[2], one_plus);
        assert_eq!(an.c[3], one_plus);
        assert_eq!(an.v0, 3);
        assert_eq!(an.w0, 1);
        assert_eq!(an.predicted_v0(), 3);
        // ψ = x^2 + x(y-x) + (1+γ)(y-x)^2 = (1+γ)x^2 + xy + (1+γ)y^2.
        let phi = build_phi(&spec);
        assert_eq!(phi.degree(), 4);
        assert_eq!(*phi.coeff(0), ctx.zero());
        assert_eq!(*phi.coeff(1), one_plus);
        assert_eq!(*phi.coeff(2), ctx.one());
        assert_eq!(*phi.coeff(3), one_plus);
        assert_eq!(*phi.coeff(4), ctx.zero());
    }

    #[test]
    fn power_detection_blocks_degenerate_deformation() {
        let ctx = f2();
        // γ_1 = 1 over F_2 makes the residue vanish: the form would be
        // (xy)^2.
        let err = JumpSpec::new(&ctx, 1, 1, 1, 0, 4, vec![ctx.one()]).unwrap_err();
        match err {
            ForgeError::SpecViolation { condition } => {
                assert!(condition.contains("power"), "{condition}");
            }
            other => panic!("wrong error: {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let ctx = f2();
        let f4 = f4();
        let cases: Vec<(ForgeError, &str)> = vec![
            (
                JumpSpec::new(&ctx, 1, 1, 2, 0, 4, vec![]).unwrap_err(),
                "y-divisor exponent",
            ),
            (
                JumpSpec::new(&ctx, 1, 0, 1, 2, 4, vec![]).unwrap_err(),
                "x-divisor exponent",
            ),
            (
                JumpSpec::new(&ctx, 1, 1, 1, 2, 5, vec![]).unwrap_err(),
                "total degree",
            ),
            (
                JumpSpec::new(&ctx, 1, 1, 1, 1, 4, vec![]).unwrap_err(),
                "diagonal exponent",
            ),
            (
                JumpSpec::new(&f4, 2, 3, 2, 0, 8, vec![]).unwrap_err(),
                "deformation remainder",
            ),
            (
                JumpSpec::new(&ctx, 1, 1, 1, 2, 4, vec![ctx.one()]).unwrap_err(),
                "deformation coefficients",
            ),
        ];
        for (err, needle) in cases {
            match err {
                ForgeError::SpecViolation { condition } => {
                    assert!(condition.contains(needle), "{condition} vs {needle}");
                }
                other => panic!("wrong error: {other:?}"),
            }
        }
    }

    #[test]
    fn digit_recipe_matches_scan_everywhere() {
        for (p, m, e) in [(2u32, 1u32, 1u32), (2, 1, 2), (2, 1, 3), (3, 1, 1), (3, 1, 2), (5, 1, 1)] {
            let ctx = FqCtx::new(p, m).unwrap();
            let pe = p.pow(e);
            for s in 1..pe {
                for beta in 0..(pe - s) {
                    let r = pe - s - beta;
                    // d = r + s + t + u with t = p^e and u = beta.
                    let spec = JumpSpec::new(&ctx, e, r, s, pe, 2 * pe, vec![])
                        .unwrap_or_else(|err| panic!("p={p} e={e} s={s} beta={beta}: {err}"));
                    assert_eq!(spec.beta(), beta);
                    let an = analyze_jump(&spec);
                    assert_eq!(an.w0, an.w0_scan, "p={p} e={e} s={s} beta={beta}");
                    assert_eq!(an.v0, an.predicted_v0(), "p={p} e={e} s={s} beta={beta}");
                    assert_eq!(an.overshoot, an.w0 - beta);
                    assert!(
                        an.overshoot <= p.pow(e - 1),
                        "overshoot {} breaks the digit bound at p={p} e={e} s={s} beta={beta}",
                        an.overshoot
                    );
                }
            }
        }
    }

    #[test]
    fn block_identity_ties_series_to_binomials() {
        // c_{α p^e + w} = ε_α · C(p^e - s, w) for every w below p^e.
        let ctx = f4();
        let omega = ctx.from_digits(&[0, 1]).unwrap();
        for spec in [
            JumpSpec::new(&ctx, 1, 1, 1, 0, 4, vec![omega.clone()]).unwrap(),
            JumpSpec::new(&ctx, 2, 1, 2, 4, 8, vec![]).unwrap(),
            JumpSpec::new(&ctx, 2, 1, 1, 0, 8, vec![omega]).unwrap(),
        ] {
            let pe = spec.pe();
            let an = analyze_jump(&spec);
            let eps_alpha = if spec.alpha() == 0 {
                ctx.one()
            } else {
                an.epsilons[spec.alpha() as usize - 1].clone()
            };
            for w in 0..pe {
                let idx = (spec.alpha() * pe + w) as usize;
                let b = lucas_binomial((pe - spec.s()) as u64, w as u64, spec.p());
                let want = eps_alpha.mul(&ctx.from_u32(b));
                assert_eq!(an.c[idx], want, "block identity at w={w} for {spec:?}");
            }
        }
    }

    #[test]
    fn flagship_verify_roundtrip() {
        let ctx = f2();
        let spec = diagonal_square(&ctx);
        let state = embed_jump(&spec, None).unwrap();
        assert_eq!(state.prec, 12);
        let pre = analyze(&state).unwrap().report;
        assert_eq!(pre.configuration, Configuration::TwoBad);
        assert_eq!(pre.inv_heart, Rat::from_int(1));
        let report = verify_jump(&spec, &state).unwrap();
        assert!(report.verified(), "failed checks: {:?}", report.checks);
        assert_eq!(report.predicted, Rat::new(3, 2));
        assert_eq!(report.measured, Some(Rat::new(3, 2)));
        assert_eq!(report.post.configuration, Configuration::OneBad);
        assert_eq!(report.analysis.residual, 3);
    }

    #[test]
    fn good_companion_embedding() {
        let ctx = f2();
        let spec = diagonal_square(&ctx);
        let state = embed_jump_with_good_divisor(&spec, 1, None).unwrap();
        let pre = analyze(&state).unwrap().report;
        assert_eq!(pre.configuration, Configuration::OneBadOneGood);
        assert!(!pre.point_good);
        let report = verify_jump(&spec, &state).unwrap();
        assert!(report.verified(), "failed checks: {:?}", report.checks);
        assert_eq!(report.measured, Some(Rat::new(3, 2)));
        // Asking for a multiplicity that would turn the companion bad fails.
        assert!(matches!(
            embed_jump_with_good_divisor(&spec, 2, None),
            Err(ForgeError::EmbeddingInvalid { .. })
        ));
    }

    #[test]
    fn tail_pinning_keeps_the_shape() {
        let ctx = f4();
        // Over e=2 the deformation factor collapses to ψ = x, eating the
        // x-order; the embedding must pin it back with a tail term.
        let spec = JumpSpec::new(&ctx, 2, 1, 2, 4, 8, vec![]).unwrap();
        assert_eq!((spec.u(), spec.alpha(), spec.beta()), (1, 0, 1));
        let phi = build_phi(&spec);
        assert_eq!(phi.ord_x(), Some(2), "ψ = x bumps the x-order");
        assert_eq!(phi.ord_y(), Some(2));
        let state = embed_jump(&spec, None).unwrap();
        let top = state.hyp.coeff(4);
        assert_eq!(top.ord_x(), Some(1), "the tail pins the x-order back to r");
        let an = analyze_jump(&spec);
        assert_eq!(an.v0, 2);
        assert_eq!(an.w0, 2);
        assert_eq!((an.l0, an.l1), (0, 1));
        assert_eq!(an.residual, 6);
        assert_eq!(an.overshoot, 1);
        let report = verify_jump(&spec, &state).unwrap();
        assert!(report.verified(), "failed checks: {:?}", report.checks);
        assert_eq!(report.measured, Some(Rat::new(6, 4)));
    }

    #[test]
    fn recovery_inverts_the_forge() {
        let ctx = f2();
        let spec = diagonal_square(&ctx);
        let state = embed_jump(&spec, None).unwrap();
        let rec = recover_spec(&state, &FiberPoint::XChart(ctx.one())).unwrap();
        assert_eq!(
            (rec.spec.r(), rec.spec.s(), rec.spec.t(), rec.spec.d()),
            (1, 1, 2, 4)
        );
        assert!(rec.spec.gammas().is_empty());
        assert!(!rec.swapped);
        assert!(rec.crit.is_one());
        assert!(rec.scale.is_one());

        let f4 = f4();
        let omega = f4.from_digits(&[0, 1]).unwrap();
        let spec4 = JumpSpec::new(&f4, 1, 1, 1, 0, 4, vec![omega.clone()]).unwrap();
        let state4 = embed_jump(&spec4, None).unwrap();
        let rec4 = recover_spec(&state4, &FiberPoint::XChart(f4.one())).unwrap();
        assert_eq!(rec4.spec.gammas(), &[omega]);
        assert_eq!(
            (rec4.spec.r(), rec4.spec.s(), rec4.spec.t(), rec4.spec.d()),
            (1, 1, 0, 4)
        );
    }

    #[test]
    fn recovery_normalizes_the_landing_line() {
        let ctx = f4();
        let omega = ctx.from_digits(&[0, 1]).unwrap();
        let spec = JumpSpec::new(&ctx, 1, 1, 1, 2, 4, vec![]).unwrap();
        // Push the landing line to c = ω and scale the whole form by ω:
        // a_pe = ω · φ(ω x, y) has its critical line at y = ω x.
        let phi = build_phi(&spec);
        let moved = rescale_x(&phi, &omega).scale(&omega);
        let top = moved.to_series(12);
        let hyp = Hypersurface::new(2, 1, vec![BiSeries::zero(&ctx, 12), top]).unwrap();
        let monomial = MonomialData {
            a: 2,
            divisors: vec![
                DivisorInfo {
                    axis: Axis::X,
                    index: 1,
                    m: 2,
                },
                DivisorInfo {
                    axis: Axis::Y,
                    index: 2,
                    m: 3,
                },
            ],
        };
        let state = MonomialState::new(hyp, monomial, 0);
        // ω·φ(ωx, y) = ω²·x·y·(y - ωx)², so the critical line sits at the
        // fiber coordinate ω and the residual factor carries the scale ω.
        let rec = recover_spec(&state, &FiberPoint::XChart(omega.clone())).unwrap();
        assert_eq!(
            (rec.spec.r(), rec.spec.s(), rec.spec.t(), rec.spec.d()),
            (1, 1, 2, 4)
        );
        assert_eq!(rec.crit, omega);
        assert_eq!(rec.scale, omega);
        assert!(!rec.swapped);
    }

    #[test]
    fn recovery_swaps_roles_when_the_bad_divisor_sits_on_y() {
        let ctx = f2();
        let spec = diagonal_square(&ctx);
        let phi = build_phi(&spec);
        let top = phi.to_series(12);
        // m_x = 1 keeps the x-divisor good; m_y = 4 makes the y-divisor bad.
        let hyp = Hypersurface::new(2, 1, vec![BiSeries::zero(&ctx, 12), top]).unwrap();
        let monomial = MonomialData {
            a: 2,
            divisors: vec![
                DivisorInfo {
                    axis: Axis::X,
                    index: 1,
                    m: 1,
                },
                DivisorInfo {
                    axis: Axis::Y,
                    index: 2,
                    m: 4,
                },
            ],
        };
        let state = MonomialState::new(hyp, monomial, 0);
        let pre = analyze(&state).unwrap().report;
        assert_eq!(pre.configuration, Configuration::OneBadOneGood);
        let rec = recover_spec(&state, &FiberPoint::XChart(ctx.one())).unwrap();
        assert!(rec.swapped);
        // The form is symmetric, so the spec looks the same after the swap.
        assert_eq!(
            (rec.spec.r(), rec.spec.s(), rec.spec.t(), rec.spec.d()),
            (1, 1, 2, 4)
        );
    }

    #[test]
    fn recovery_rejects_axis_landings() {
        let ctx = f2();
        let spec = diagonal_square(&ctx);
        let state = embed_jump(&spec, None).unwrap();
        assert!(matches!(
            recover_spec(&state, &FiberPoint::XChart(ctx.zero())),
            Err(ForgeError::JumpAbsent { .. })
        ));
        assert!(matches!(
            recover_spec(&state, &FiberPoint::YChartOrigin),
            Err(ForgeError::JumpAbsent { .. })
        ));
    }

    #[test]
    fn verify_reports_jump_absent_on_plain_positions() {
        let ctx = f2();
        let spec = diagonal_square(&ctx);
        // A position whose critical form is not the forged shape.
        let top = BiSeries::from_terms(&ctx, 12, [((4, 0), ctx.one()), ((0, 3), ctx.one())]);
        let hyp = Hypersurface::new(2, 1, vec![BiSeries::zero(&ctx, 12), top]).unwrap();
        let monomial = MonomialData {
            a: 2,
            divisors: vec![
                DivisorInfo {
                    axis: Axis::X,
                    index: 1,
                    m: 2,
                },
                DivisorInfo {
                    axis: Axis::Y,
                    index: 2,
                    m: 3,
                },
            ],
        };
        let state = MonomialState::new(hyp, monomial, 0);
        assert!(matches!(
            verify_jump(&spec, &state),
            Err(ForgeError::EmbeddingInvalid { .. })
        ));
    }
}
